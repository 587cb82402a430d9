use crate::error::{Error, Result};
use crate::numerics::Rng;

/// One row after masking: what the encoder sees and what it must also
/// reconstruct.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedRow {
    pub row: usize,
    pub observed: Vec<(usize, f64)>,
    pub hidden: Vec<(usize, f64)>,
}

/// Keeps each observation independently with probability `p_keep`.
pub fn bernoulli_mask(
    row: usize,
    observations: &[(usize, f64)],
    p_keep: f64,
    rng: &mut Rng,
) -> Result<MaskedRow> {
    if !(p_keep > 0.0 && p_keep <= 1.0) {
        return Err(Error::invalid(format!("p_keep must lie in (0, 1], got {p_keep}")));
    }
    let mut observed = Vec::with_capacity(observations.len());
    let mut hidden = Vec::new();
    for &o in observations {
        if rng.bernoulli(p_keep) {
            observed.push(o);
        } else {
            hidden.push(o);
        }
    }
    Ok(MaskedRow {
        row,
        observed,
        hidden,
    })
}
