use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::tokens::StyleTokenSet;

/// Tokens `[0, t)` from `a` and `[t, n)` from `b`.
pub fn mix_styles(a: &StyleTokenSet, b: &StyleTokenSet, t: usize) -> Result<StyleTokenSet> {
    if a.styles.shape() != b.styles.shape() {
        return Err(Error::dim(
            "mix_styles",
            format!("{:?} vs {:?}", a.styles.shape(), b.styles.shape()),
        ));
    }
    let n = a.n();
    if t > n {
        return Err(Error::Contract(format!("inject point {t} outside 0..={n}")));
    }
    if t == n {
        return Ok(a.clone());
    }
    if t == 0 {
        return Ok(b.clone());
    }
    let head = a.styles.narrow(1, 0, t)?;
    let tail = b.styles.narrow(1, t, n - t)?;
    StyleTokenSet::new(Tensor::concat(&[head, tail], 1)?)
}

/// Layers `[0, cut)` take `a`'s styles, the rest take `b`'s.
pub fn mix_layers(a: &[Tensor], b: &[Tensor], cut: usize) -> Result<Vec<Tensor>> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!("{} layers vs {} layers", a.len(), b.len())));
    }
    if cut > a.len() {
        return Err(Error::Contract(format!("layer cut {cut} outside 0..={}", a.len())));
    }
    Ok(a[..cut].iter().chain(&b[cut..]).cloned().collect())
}
