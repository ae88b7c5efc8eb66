//! Dense `f64` tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is an immutable, reference-counted node. Operations on
//! tensors that require gradients record a backward rule pointing at their
//! inputs, so the graph reachable from a loss doubles as the gradient tape.
//! Every backward rule is itself written in terms of tensor operations,
//! which means gradients can be differentiated again (`create_graph`), as
//! the R1 penalty requires.

mod autograd;
pub mod gradcheck;
mod ops;
mod spatial;

use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use autograd::{grad, is_grad_enabled, no_grad, GradModeGuard, GradTape};
pub use ops::MatTranspose;

static NEXT_ID: AtomicUsize = AtomicUsize::new(1);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Backward rule of one recorded operation.
pub(crate) trait GradFn {
    fn name(&self) -> &'static str;
    fn inputs(&self) -> &[Tensor];
    /// Vector-Jacobian product. `needs[i]` is false when input `i` does not
    /// lead to any requested gradient; such slots may be `None`.
    fn backward(&self, out: &Tensor, grad: &Tensor, needs: &[bool]) -> Result<Vec<Option<Tensor>>>;
}

pub(crate) struct Node {
    id: usize,
    shape: Vec<usize>,
    data: Rc<Vec<f64>>,
    requires_grad: bool,
    grad_fn: Option<Box<dyn GradFn>>,
    grad: RefCell<Option<Vec<f64>>>,
}

/// Dense row-major tensor of 64-bit reals.
///
/// Cloning is cheap (it clones a pointer); the values are never mutated
/// after construction. Parameters are updated by replacing the tensor.
#[derive(Clone)]
pub struct Tensor(Rc<Node>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Tensor");
        s.field("shape", &self.0.shape);
        if self.numel() <= 16 {
            s.field("data", &self.0.data);
        }
        s.field("requires_grad", &self.0.requires_grad);
        if let Some(op) = &self.0.grad_fn {
            s.field("op", &op.name());
        }
        s.finish()
    }
}

pub(crate) fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    fn build(data: Rc<Vec<f64>>, shape: Vec<usize>, requires_grad: bool, grad_fn: Option<Box<dyn GradFn>>) -> Self {
        debug_assert_eq!(numel_of(&shape), data.len());
        Tensor(Rc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            grad_fn,
            grad: RefCell::new(None),
        }))
    }

    /// Leaf tensor that does not track gradients.
    pub fn from_vec(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::dim("from_vec", format!("zero-sized dimension in {shape:?}")));
        }
        if numel_of(shape) != data.len() {
            return Err(Error::dim(
                "from_vec",
                format!("shape {shape:?} needs {} values, got {}", numel_of(shape), data.len()),
            ));
        }
        Ok(Self::build(Rc::new(data), shape.to_vec(), false, None))
    }

    /// Leaf tensor that participates in gradient computation.
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        Ok(Self::from_vec(data, shape)?.requires_grad_(true))
    }

    pub fn scalar(value: f64) -> Self {
        Self::build(Rc::new(vec![value]), Vec::new(), false, None)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self::build(Rc::new(vec![value; numel_of(shape)]), shape.to_vec(), false, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    /// Standard-normal entries scaled by `std`.
    pub fn randn<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], std: f64) -> Self {
        let data = (0..numel_of(shape))
            .map(|_| rng.sample::<f64, _>(StandardNormal) * std)
            .collect();
        Self::build(Rc::new(data), shape.to_vec(), false, None)
    }

    /// Internal constructor for operation outputs. Records `grad_fn` only
    /// when grad mode is on and some input requires gradients.
    pub(crate) fn from_op(data: Vec<f64>, shape: Vec<usize>, grad_fn: impl GradFn + 'static) -> Self {
        let track = is_grad_enabled() && grad_fn.inputs().iter().any(Tensor::requires_grad);
        if track {
            Self::build(Rc::new(data), shape, true, Some(Box::new(grad_fn)))
        } else {
            Self::build(Rc::new(data), shape, false, None)
        }
    }

    /// Output sharing this tensor's storage under a new shape.
    pub(crate) fn from_op_shared(&self, shape: Vec<usize>, grad_fn: impl GradFn + 'static) -> Self {
        let track = is_grad_enabled() && grad_fn.inputs().iter().any(Tensor::requires_grad);
        let data = Rc::clone(&self.0.data);
        if track {
            Self::build(data, shape, true, Some(Box::new(grad_fn)))
        } else {
            Self::build(data, shape, false, None)
        }
    }

    /// Same values as a fresh leaf with the given gradient flag.
    pub fn requires_grad_(self, flag: bool) -> Self {
        Self::build(Rc::clone(&self.0.data), self.0.shape.clone(), flag, None)
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Self {
        Self::build(Rc::clone(&self.0.data), self.0.shape.clone(), false, None)
    }

    pub fn id(&self) -> usize {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.as_ref().clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.grad_fn.is_none()
    }

    pub(crate) fn grad_fn(&self) -> Option<&dyn GradFn> {
        self.0.grad_fn.as_deref()
    }

    /// Name of the operation that produced this tensor, if recorded.
    pub fn op_name(&self) -> Option<&'static str> {
        self.0.grad_fn.as_ref().map(|f| f.name())
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(Error::Contract(format!("item() on tensor of shape {:?}", self.shape())));
        }
        Ok(self.0.data[0])
    }

    /// Accumulated gradient from [`Tensor::backward`], if any.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    pub(crate) fn accumulate_grad(&self, g: &[f64]) {
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => *slot = Some(g.to_vec()),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data().iter().all(|v| v.is_finite())
    }

    /// Errors with a diagnostic naming `what` when any value is NaN or infinite.
    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if let Some(pos) = self.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{what} (shape {:?}, index {pos}, value {})",
                self.shape(),
                self.data()[pos]
            )));
        }
        Ok(())
    }

    /// Bitwise equality of shape and values.
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        self.shape() == other.shape()
            && self
                .data()
                .iter()
                .zip(other.data())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Largest absolute elementwise difference; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data()
            .iter()
            .zip(other.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests;
