//! Adaptive entrywise weights for the sparse penalty.
//!
//! Each update rescales `|W ∘ S|` by its largest entry, turns the scaled values into
//! per-entry retention factors `1 - t^p`, and multiplies them into the current
//! weights. Entries where the sparse estimate is large relative to the rest lose
//! weight quickly; entries where it stays near zero keep a weight close to one.
//! Weights only ever shrink, and always stay in `[0, 1]`.

use crate::error::{Dims, Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightState {
    w: DenseMatrix,
    p: f64,
    step: usize,
}

impl WeightState {
    pub fn weights(&self) -> &DenseMatrix {
        &self.w
    }

    pub fn into_weights(self) -> DenseMatrix {
        self.w
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Applies one update driven by the sparse estimate `s`.
    pub fn update(&self, s: &DenseMatrix) -> Result<WeightState> {
        update_weights(self, s)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Parameter(format!("weight exponent p must be positive, got {p}")));
    }
    Ok(())
}

/// Uniform starting weights: no entry is suspected of being an outlier yet.
pub fn init_weights(dims: Dims, p: f64) -> Result<WeightState> {
    check_exponent(p)?;
    let dims = Dims::new(dims.rows, dims.cols)?;
    Ok(WeightState {
        w: DenseMatrix::ones(dims),
        p,
        step: 0,
    })
}

/// `|w ∘ s| / max |w ∘ s|`, or all zeros when `w ∘ s` vanishes.
pub fn scaling_factor(w: &DenseMatrix, s: &DenseMatrix) -> Result<DenseMatrix> {
    let ws = w.hadamard(s)?;
    let peak = ws.max_abs();
    if peak == 0.0 {
        return Ok(DenseMatrix::zeros(ws.dims()));
    }
    // |x| <= peak, so the correctly rounded quotient never exceeds 1.
    ws.map("scaling_factor", |v| v.abs() / peak)
}

/// `1 - t^p` entrywise.
pub fn intermediate_weights(t: &DenseMatrix, p: f64) -> Result<DenseMatrix> {
    check_exponent(p)?;
    if let Some(&bad) = t.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("scaling factor {bad} outside [0, 1]")));
    }
    t.map("intermediate_weights", |v| (1.0 - v.powf(p)).clamp(0.0, 1.0))
}

/// One full weight update: `W' = (1 - T^p) ∘ W` with `T` from [`scaling_factor`].
pub fn update_weights(state: &WeightState, s: &DenseMatrix) -> Result<WeightState> {
    let t = scaling_factor(&state.w, s)?;
    let retain = intermediate_weights(&t, state.p)?;
    let w = retain.hadamard(&state.w)?;
    debug_assert!(w
        .as_slice()
        .iter()
        .zip(state.w.as_slice())
        .all(|(new, old)| (0.0..=*old).contains(new)));
    Ok(WeightState {
        w,
        p: state.p,
        step: state.step + 1,
    })
}
