//! Segmented sums over index arrays.
//!
//! `out[i] = Σ_{k : I_k = i} V_k`. Accumulation runs in ascending input
//! position, so results do not depend on thread count or call order.

use crate::error::ScatterError;

pub fn scatter(indices: &[usize], values: &[f64], size: usize) -> Result<Vec<f64>, ScatterError> {
    if indices.len() != values.len() {
        return Err(ScatterError::LengthMismatch {
            indices: indices.len(),
            values: values.len(),
        });
    }
    if let Some((position, &index)) = indices.iter().enumerate().find(|(_, &i)| i >= size) {
        return Err(ScatterError::IndexOutOfRange {
            position,
            index,
            size,
        });
    }
    let mut out = vec![0.0; size];
    scatter_into(&mut out, indices, values);
    Ok(out)
}

/// Unchecked accumulation into an existing buffer (zeroed first).
#[inline]
pub(crate) fn scatter_into(out: &mut [f64], indices: &[usize], values: &[f64]) {
    debug_assert_eq!(indices.len(), values.len());
    out.fill(0.0);
    for (&i, &v) in indices.iter().zip(values) {
        out[i] += v;
    }
}
