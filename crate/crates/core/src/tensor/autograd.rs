use std::collections::{HashMap, HashSet};

use super::{Tensor, GRAD_ENABLED};
use crate::error::{Error, Result};

pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Restores the previous grad mode on drop.
pub struct GradModeGuard {
    prev: bool,
}

impl GradModeGuard {
    pub fn new(enabled: bool) -> Self {
        let prev = GRAD_ENABLED.with(|g| g.replace(enabled));
        GradModeGuard { prev }
    }
}

impl Drop for GradModeGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|g| g.set(self.prev));
    }
}

/// Disables graph recording until the guard is dropped.
pub fn no_grad() -> GradModeGuard {
    GradModeGuard::new(false)
}

/// Operations reachable from a root, in topological order (inputs first).
pub struct GradTape {
    order: Vec<Tensor>,
}

impl GradTape {
    pub fn record(root: &Tensor) -> Self {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        // iterative post-order DFS; deep generator graphs overflow recursion
        let mut stack: Vec<(Tensor, bool)> = vec![(root.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !t.requires_grad() || !seen.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(f) = t.grad_fn() {
                for inp in f.inputs().iter().rev() {
                    if inp.requires_grad() && !seen.contains(&inp.id()) {
                        stack.push((inp.clone(), false));
                    }
                }
            }
        }
        GradTape { order }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Names of recorded operations, inputs first.
    pub fn op_names(&self) -> Vec<&'static str> {
        self.order.iter().filter_map(Tensor::op_name).collect()
    }

    /// Ids of nodes that lie on a path to one of `targets`.
    fn relevant(&self, targets: &HashSet<usize>) -> HashSet<usize> {
        let mut rel = HashSet::new();
        for t in &self.order {
            let hit = targets.contains(&t.id())
                || t
                    .grad_fn()
                    .map(|f| f.inputs().iter().any(|i| rel.contains(&i.id())))
                    .unwrap_or(false);
            if hit {
                rel.insert(t.id());
            }
        }
        rel
    }

    /// Reverse sweep. Returns accumulated gradients for every relevant node.
    fn sweep(&self, root: &Tensor, targets: &HashSet<usize>, create_graph: bool) -> Result<HashMap<usize, Tensor>> {
        let relevant = self.relevant(targets);
        let mut grads: HashMap<usize, Tensor> = HashMap::new();
        if !relevant.contains(&root.id()) {
            return Ok(grads);
        }
        let _mode = GradModeGuard::new(create_graph);
        grads.insert(root.id(), Tensor::ones(root.shape()));
        for node in self.order.iter().rev() {
            let Some(f) = node.grad_fn() else { continue };
            let Some(g) = grads.get(&node.id()).cloned() else { continue };
            if !targets.contains(&node.id()) {
                grads.remove(&node.id());
            }
            let needs: Vec<bool> = f.inputs().iter().map(|i| relevant.contains(&i.id())).collect();
            if !needs.iter().any(|&b| b) {
                continue;
            }
            let parts = f.backward(node, &g, &needs)?;
            for ((inp, part), need) in f.inputs().iter().zip(parts).zip(&needs) {
                let (Some(part), true) = (part, *need) else { continue };
                if part.shape() != inp.shape() {
                    return Err(Error::dim(
                        f.name(),
                        format!("backward produced {:?} for input {:?}", part.shape(), inp.shape()),
                    ));
                }
                let merged = match grads.remove(&inp.id()) {
                    Some(prev) => prev.add(&part)?,
                    None => part,
                };
                grads.insert(inp.id(), merged);
            }
        }
        Ok(grads)
    }
}

fn check_scalar(loss: &Tensor) -> Result<()> {
    if loss.numel() != 1 {
        return Err(Error::Contract(format!(
            "backward requires a scalar loss, got shape {:?}",
            loss.shape()
        )));
    }
    Ok(())
}

/// Gradients of a scalar `loss` with respect to `wrt`.
///
/// Inputs not reachable from the loss get zeros. With `create_graph` the
/// returned gradients are themselves differentiable.
pub fn grad(loss: &Tensor, wrt: &[&Tensor], create_graph: bool) -> Result<Vec<Tensor>> {
    check_scalar(loss)?;
    let tape = GradTape::record(loss);
    let targets: HashSet<usize> = wrt.iter().map(|t| t.id()).collect();
    let mut grads = tape.sweep(loss, &targets, create_graph)?;
    Ok(wrt
        .iter()
        .map(|t| grads.remove(&t.id()).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect())
}

impl Tensor {
    /// Accumulates `d self / d leaf` into every reachable leaf that requires
    /// gradients. Repeated calls add up; use [`Tensor::zero_grad`] between steps.
    pub fn backward(&self) -> Result<()> {
        check_scalar(self)?;
        let tape = GradTape::record(self);
        let leaves: Vec<Tensor> = tape.order.iter().filter(|t| t.is_leaf()).cloned().collect();
        let targets: HashSet<usize> = leaves.iter().map(Tensor::id).collect();
        let grads = tape.sweep(self, &targets, false)?;
        for leaf in &leaves {
            if let Some(g) = grads.get(&leaf.id()) {
                leaf.accumulate_grad(g.data());
            }
        }
        Ok(())
    }
}
