//! Alternating minimization of
//!
//! ```text
//! J(U, V, S; W) = ||Y - U V - S||_F^2 + λ ||W ∘ S||_F^2
//! ```
//!
//! Every sweep refreshes the weights from the previous sparse estimate, then
//! solves for `S` entrywise in closed form and for `U` and `V` through small
//! proximal normal equations (`r x r` SPD systems).

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Dims, Error, Result};
use crate::matrix::{spd_solve, DenseMatrix};
use crate::weights::{init_weights, WeightState};

/// Penalty applied to the weighted sparse component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Weighted squared Frobenius norm, `λ Σ w² s²`.
    L2,
    /// Weighted support count, `λ Σ w² [s ≠ 0]`.
    L0,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::L2 => "l2",
            Variant::L0 => "l0",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Variant::L2),
            "l0" => Ok(Variant::L0),
            other => Err(Error::Parameter(format!("unknown variant {other:?} (expected l2 or l0)"))),
        }
    }
}

/// How the factors `U`, `V` are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// I.i.d. standard normal entries.
    GaussianRandom,
    /// A few sweeps of block power iteration on `Y` from a Gaussian start.
    PowerIteration,
}

const POWER_SWEEPS: usize = 5;

/// Convergence also requires `max(||ΔU||_F, ||ΔV||_F) <= STEP_TOL_FACTOR * tol`.
pub const STEP_TOL_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rank: usize,
    pub lambda: f64,
    pub prox_t: f64,
    pub p: f64,
    pub variant: Variant,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    pub init: Init,
}

impl Default for SolverConfig {
    /// Defaults: `λ = 1`, `t = 0.1`, `p = 10`, power-iteration start, 500 sweeps,
    /// tolerance `1e-9`.
    ///
    /// A small exponent (`p ≈ 1`) or a random start lets the weights collapse
    /// everywhere during the first few sweeps, while the fit is still poor, and
    /// they can never grow back.
    fn default() -> Self {
        Self {
            rank: 1,
            lambda: 1.0,
            prox_t: 0.1,
            p: 10.0,
            variant: Variant::L2,
            max_iter: 500,
            tol: 1e-9,
            seed: 0,
            init: Init::PowerIteration,
        }
    }
}

impl SolverConfig {
    pub fn with_rank(rank: usize) -> Self {
        Self {
            rank,
            ..Self::default()
        }
    }

    /// Checks parameter ranges, and `rank <= min(m, n)` when `dims` is given.
    pub fn validate(&self, dims: Option<Dims>) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if self.rank == 0 {
            return Err(Error::Parameter("rank must be at least 1".into()));
        }
        positive("lambda", self.lambda)?;
        positive("t", self.prox_t)?;
        positive("p", self.p)?;
        positive("tol", self.tol)?;
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be at least 1".into()));
        }
        if let Some(d) = dims {
            if self.rank > d.rows.min(d.cols) {
                return Err(Error::Parameter(format!(
                    "rank {} exceeds min dimension of {d} input",
                    self.rank
                )));
            }
        }
        Ok(())
    }
}

/// Low-rank factors with `X̂ = U V`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl FactorPair {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.cols() != v.rows() {
            return Err(Error::shape("factor pair", u.dims(), v.dims()));
        }
        Ok(Self { u, v })
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn low_rank(&self) -> Result<DenseMatrix> {
        self.u.matmul(&self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective after the sweep, for the configured variant.
    pub objective: f64,
    pub delta_u: f64,
    pub delta_v: f64,
    /// Largest entrywise weight decrease in this sweep.
    pub weight_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    MaxIter,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max-iter",
        })
    }
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub factors: FactorPair,
    pub sparse: DenseMatrix,
    pub weights: WeightState,
    /// Objective at the starting point (`S = 0`, `W = 1`).
    pub initial_objective: f64,
    pub trace: Vec<IterationRecord>,
    pub iterations: usize,
    pub termination: Termination,
}

impl DecompositionResult {
    pub fn low_rank(&self) -> Result<DenseMatrix> {
        self.factors.low_rank()
    }

    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(self.initial_objective, |r| r.objective)
    }

    /// Writes the per-sweep trace as CSV (`iteration,J,dU,dV,dW`).
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,J,dU,dV,dW")?;
        for r in &self.trace {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?}",
                r.iteration, r.objective, r.delta_u, r.delta_v, r.weight_change
            )?;
        }
        Ok(())
    }
}

/// `||Y - U V - S||_F^2 + λ ||W ∘ S||_F^2`.
pub fn objective(
    y: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    s: &DenseMatrix,
    w: &DenseMatrix,
    lambda: f64,
) -> Result<f64> {
    objective_from_product(y, &u.matmul(v)?, s, w, lambda, Variant::L2)
}

/// `||Y - U V - S||_F^2 + λ Σ w² [s ≠ 0]`, the objective tracked by the L0 variant.
pub fn objective_l0(
    y: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    s: &DenseMatrix,
    w: &DenseMatrix,
    lambda: f64,
) -> Result<f64> {
    objective_from_product(y, &u.matmul(v)?, s, w, lambda, Variant::L0)
}

fn objective_from_product(
    y: &DenseMatrix,
    uv: &DenseMatrix,
    s: &DenseMatrix,
    w: &DenseMatrix,
    lambda: f64,
    variant: Variant,
) -> Result<f64> {
    for (other, op) in [(uv, "objective (UV)"), (s, "objective (S)"), (w, "objective (W)")] {
        if other.dims() != y.dims() {
            return Err(Error::shape(op, y.dims(), other.dims()));
        }
    }
    let (y, uv, s, w) = (y.as_slice(), uv.as_slice(), s.as_slice(), w.as_slice());
    let mut fidelity = 0.0;
    let mut penalty = 0.0;
    for i in 0..y.len() {
        let r = y[i] - uv[i] - s[i];
        fidelity += r * r;
        penalty += match variant {
            Variant::L2 => (w[i] * s[i]).powi(2),
            Variant::L0 if s[i] != 0.0 => w[i] * w[i],
            Variant::L0 => 0.0,
        };
    }
    Ok(fidelity + lambda * penalty)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Parameter(format!("lambda must be non-negative, got {lambda}")));
    }
    Ok(())
}

/// Exact minimizer of `(r - s)² + λ w² s²` per entry: `s = r / (1 + λ w²)`.
pub fn update_sparse_l2(residual: &DenseMatrix, w: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    check_lambda(lambda)?;
    residual.zip_map(w, "update_sparse_l2", |r, w| r / (1.0 + lambda * w * w))
}

/// Exact minimizer of `(r - s)² + λ w² [s ≠ 0]` per entry: keep `r` only when
/// `r² > λ w²`; ties go to zero.
pub fn update_sparse_l0(residual: &DenseMatrix, w: &DenseMatrix, lambda: f64) -> Result<DenseMatrix> {
    check_lambda(lambda)?;
    residual.zip_map(w, "update_sparse_l0", |r, w| if r * r > lambda * w * w { r } else { 0.0 })
}

fn check_prox(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Parameter(format!("proximal parameter t must be positive, got {t}")));
    }
    Ok(())
}

fn shifted(mut gram: DenseMatrix, t: f64) -> Result<DenseMatrix> {
    let n = gram.rows();
    gram = gram.add(&DenseMatrix::identity(n).scale(t)?)?;
    Ok(gram)
}

/// `U⁺ = [t U + D Vᵀ] [V Vᵀ + t I]⁻¹` with `D = Y - S`, solved as `A U⁺ᵀ = (...)ᵀ`.
fn u_step(target: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if target.rows() != u.rows() || target.cols() != v.cols() || u.cols() != v.rows() {
        return Err(Error::shape("update_u", u.dims(), v.dims()));
    }
    let a = shifted(v.matmul_transpose(v)?, t)?;
    let rhs = target.matmul_transpose(v)?.add(&u.scale(t)?)?;
    Ok(spd_solve(&a, &rhs.transpose())?.transpose())
}

/// `V⁺ = [t I + Uᵀ U]⁻¹ [t V + Uᵀ D]` with `D = Y - S`.
fn v_step(target: &DenseMatrix, u: &DenseMatrix, v: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    if target.rows() != u.rows() || target.cols() != v.cols() || u.cols() != v.rows() {
        return Err(Error::shape("update_v", u.dims(), v.dims()));
    }
    let a = shifted(u.transpose_matmul(u)?, t)?;
    let rhs = u.transpose_matmul(target)?.add(&v.scale(t)?)?;
    spd_solve(&a, &rhs)
}

/// Proximal least-squares update of `U` with `S` and `V` held fixed.
pub fn update_u(
    y: &DenseMatrix,
    s: &DenseMatrix,
    u_prev: &DenseMatrix,
    v: &DenseMatrix,
    t: f64,
) -> Result<DenseMatrix> {
    check_prox(t)?;
    u_step(&y.sub(s)?, u_prev, v, t)
}

/// Proximal least-squares update of `V` with `S` and `U` held fixed.
pub fn update_v(
    y: &DenseMatrix,
    s: &DenseMatrix,
    u: &DenseMatrix,
    v_prev: &DenseMatrix,
    t: f64,
) -> Result<DenseMatrix> {
    check_prox(t)?;
    v_step(&y.sub(s)?, u, v_prev, t)
}

/// Frobenius norms of `(Y - UV - S) Vᵀ` and `Uᵀ (Y - UV - S)`, the partial
/// gradients of the fidelity term (up to a factor of -2).
pub fn stationarity_residuals(
    y: &DenseMatrix,
    u: &DenseMatrix,
    v: &DenseMatrix,
    s: &DenseMatrix,
) -> Result<(f64, f64)> {
    let resid = y.sub(&u.matmul(v)?)?.sub(s)?;
    let grad_u = resid.matmul_transpose(v)?;
    let grad_v = u.transpose_matmul(&resid)?;
    Ok((grad_u.frob_norm(), grad_v.frob_norm()))
}

pub(crate) fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::raw(rows, cols, data)
}

/// In-place modified Gram-Schmidt (two passes) on the columns. Columns that are
/// numerically dependent on earlier ones are zeroed.
fn orthonormalize_columns(m: &mut DenseMatrix) {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m.cols());
    for j in 0..m.cols() {
        let mut col = m.col(j);
        let original = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..2 {
            for q in &basis {
                let proj: f64 = q.iter().zip(&col).map(|(a, b)| a * b).sum();
                col.iter_mut().zip(q).for_each(|(c, qv)| *c -= proj * qv);
            }
        }
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 * original && norm > 0.0 {
            col.iter_mut().for_each(|c| *c /= norm);
            basis.push(col.clone());
        } else {
            col.iter_mut().for_each(|c| *c = 0.0);
        }
        m.set_col(j, &col);
    }
}

fn initial_factors(y: &DenseMatrix, config: &SolverConfig) -> Result<FactorPair> {
    let (m, n, r) = (y.rows(), y.cols(), config.rank);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match config.init {
        Init::GaussianRandom => FactorPair::new(gaussian(m, r, &mut rng), gaussian(r, n, &mut rng)),
        Init::PowerIteration => {
            let mut q = gaussian(n, r, &mut rng);
            orthonormalize_columns(&mut q);
            for _ in 0..POWER_SWEEPS {
                let mut z = y.matmul(&q)?;
                orthonormalize_columns(&mut z);
                q = y.transpose_matmul(&z)?;
                orthonormalize_columns(&mut q);
            }
            FactorPair::new(y.matmul(&q)?, q.transpose())
        }
    }
}

/// Runs the alternating minimization on `y`.
///
/// Sweep order: weights (from the previous `S`), `S`, `U`, `V`. Stops when the
/// relative objective change and `||ΔX̂||_F / (1 + ||Y||_F)` both fall below
/// `config.tol` and the factor steps are at most `STEP_TOL_FACTOR * tol`, or
/// after `config.max_iter` sweeps.
pub fn solve(y: &DenseMatrix, config: &SolverConfig) -> Result<DecompositionResult> {
    solve_observed(y, config, |_| {})
}

/// State at the end of one sweep, as seen by [`solve_observed`].
#[derive(Debug, Clone, Copy)]
pub struct SweepView<'a> {
    pub u: &'a DenseMatrix,
    pub v: &'a DenseMatrix,
    pub sparse: &'a DenseMatrix,
    pub weights: &'a WeightState,
    pub record: &'a IterationRecord,
}

/// [`solve`], calling `observe` after every sweep.
pub fn solve_observed(
    y: &DenseMatrix,
    config: &SolverConfig,
    mut observe: impl FnMut(&SweepView<'_>),
) -> Result<DecompositionResult> {
    config.validate(Some(y.dims()))?;
    let FactorPair { mut u, mut v } = initial_factors(y, config)?;
    let mut s = DenseMatrix::zeros(y.dims());
    let mut weights = init_weights(y.dims(), config.p)?;
    let mut uv = u.matmul(&v)?;
    let y_norm = y.frob_norm();
    let lambda = config.lambda;

    let initial_objective = objective_from_product(y, &uv, &s, weights.weights(), lambda, config.variant)?;
    let mut prev_objective = initial_objective;
    let mut trace = Vec::new();
    let mut termination = Termination::MaxIter;

    for k in 0..config.max_iter {
        let next_weights = weights.update(&s)?;
        let weight_change = next_weights.weights().max_abs_diff(weights.weights())?;
        weights = next_weights;

        let residual = y.sub(&uv)?;
        s = match config.variant {
            Variant::L2 => update_sparse_l2(&residual, weights.weights(), lambda)?,
            Variant::L0 => update_sparse_l0(&residual, weights.weights(), lambda)?,
        };

        let target = y.sub(&s)?;
        let u_next = u_step(&target, &u, &v, config.prox_t)?;
        let v_next = v_step(&target, &u_next, &v, config.prox_t)?;
        let delta_u = u_next.dist_sq(&u)?.sqrt();
        let delta_v = v_next.dist_sq(&v)?.sqrt();
        u = u_next;
        v = v_next;

        let uv_next = u.matmul(&v)?;
        let uv_change = uv_next.dist_sq(&uv)?.sqrt();
        uv = uv_next;

        let objective = objective_from_product(y, &uv, &s, weights.weights(), lambda, config.variant)?;
        let record = IterationRecord {
            iteration: k + 1,
            objective,
            delta_u,
            delta_v,
            weight_change,
        };
        observe(&SweepView {
            u: &u,
            v: &v,
            sparse: &s,
            weights: &weights,
            record: &record,
        });
        trace.push(record);

        let rel_objective = (prev_objective - objective).abs() / (1.0 + prev_objective);
        let rel_fit = uv_change / (1.0 + y_norm);
        prev_objective = objective;
        let steps_small = delta_u.max(delta_v) <= STEP_TOL_FACTOR * config.tol;
        if rel_objective.max(rel_fit) < config.tol && steps_small {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(DecompositionResult {
        factors: FactorPair { u, v },
        sparse: s,
        weights,
        initial_objective,
        iterations: trace.len(),
        trace,
        termination,
    })
}
