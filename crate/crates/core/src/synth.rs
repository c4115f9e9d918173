//! Synthetic low-rank + sparse-noise instances and the error metrics used to
//! score a decomposition against them.
//!
//! The low-rank part is `X = U V` with standard normal factors. The sparse part
//! starts as a dense Gaussian matrix `M`, rescaled so that the signal-to-noise
//! ratio `log10(||X||_F² / ||M||_F²)` hits the requested value, and is then
//! masked entrywise with i.i.d. Bernoulli(sparsity) draws.
//!
//! All randomness comes from ChaCha8 streams keyed by the instance seed, so the
//! same seed gives bit-identical instances on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Dims, Error, Result};
use crate::matrix::DenseMatrix;
use crate::solver::gaussian;

const FACTOR_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;
const MASK_STREAM: u64 = 2;

/// Units of the signal-to-noise ratio.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrScale {
    /// `log10` of the power ratio.
    #[default]
    Log10,
    /// `10 * log10` of the power ratio.
    Decibel,
}

impl SnrScale {
    fn power_ratio(&self, snr: f64) -> f64 {
        match self {
            SnrScale::Log10 => 10f64.powf(snr),
            SnrScale::Decibel => 10f64.powf(snr / 10.0),
        }
    }

    fn encode_power_ratio(&self, ratio: f64) -> f64 {
        match self {
            SnrScale::Log10 => ratio.log10(),
            SnrScale::Decibel => 10.0 * ratio.log10(),
        }
    }
}

/// Rank used when none is given: `m / 50`, at least 1.
pub fn default_rank(m: usize) -> usize {
    (m / 50).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub m: usize,
    pub n: usize,
    pub rank: usize,
    pub sparsity: f64,
    pub snr: f64,
    pub snr_scale: SnrScale,
    pub seed: u64,
}

impl SynthSpec {
    /// Spec with the default rank `m / 50` and log10 SNR units.
    pub fn new(m: usize, n: usize, sparsity: f64, snr: f64, seed: u64) -> Self {
        Self {
            m,
            n,
            rank: default_rank(m),
            sparsity,
            snr,
            snr_scale: SnrScale::Log10,
            seed,
        }
    }

    pub fn with_rank(mut self, rank: usize) -> Self {
        self.rank = rank;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = Dims::new(self.m, self.n)?;
        if self.rank == 0 || self.rank > dims.rows.min(dims.cols) {
            return Err(Error::Parameter(format!(
                "rank {} must lie in 1..={} for a {dims} matrix",
                self.rank,
                dims.rows.min(dims.cols)
            )));
        }
        check_sparsity(self.sparsity)?;
        if !self.snr.is_finite() {
            return Err(Error::Parameter(format!("snr must be finite, got {}", self.snr)));
        }
        Ok(())
    }
}

fn check_sparsity(sparsity: f64) -> Result<()> {
    if !(sparsity > 0.0 && sparsity < 1.0) {
        return Err(Error::Parameter(format!("sparsity must lie in (0, 1), got {sparsity}")));
    }
    Ok(())
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowRankSample {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub x: DenseMatrix,
}

/// `X = U V` with i.i.d. standard normal `U` (m x r) and `V` (r x n).
pub fn gen_lowrank(spec: &SynthSpec) -> Result<LowRankSample> {
    spec.validate()?;
    let mut rng = stream(spec.seed, FACTOR_STREAM);
    let u = gaussian(spec.m, spec.rank, &mut rng);
    let v = gaussian(spec.rank, spec.n, &mut rng);
    let x = u.matmul(&v)?;
    Ok(LowRankSample { u, v, x })
}

/// Boolean mask over a matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask {
    dims: Dims,
    bits: Vec<bool>,
}

impl SupportMask {
    pub fn new(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != dims.len() {
            return Err(Error::Parameter(format!("{} mask bits for a {dims} matrix", bits.len())));
        }
        Ok(Self { dims, bits })
    }

    /// Entries with `|m_ij| > threshold`.
    pub fn from_threshold(m: &DenseMatrix, threshold: f64) -> Self {
        Self {
            dims: m.dims(),
            bits: m.as_slice().iter().map(|v| v.abs() > threshold).collect(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.dims.cols + j]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    /// Fraction of entries on which two masks agree.
    pub fn accuracy(&self, truth: &SupportMask) -> Result<f64> {
        self.check(truth)?;
        let agree = self.bits.iter().zip(&truth.bits).filter(|(a, b)| a == b).count();
        Ok(agree as f64 / self.bits.len() as f64)
    }

    /// F1 score of `self` as a prediction of `truth`.
    pub fn f1(&self, truth: &SupportMask) -> Result<f64> {
        self.check(truth)?;
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        for (&p, &t) in self.bits.iter().zip(&truth.bits) {
            match (p, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
        if tp + fp + fneg == 0 {
            return Ok(1.0);
        }
        Ok(2.0 * tp as f64 / (2 * tp + fp + fneg) as f64)
    }

    fn check(&self, other: &SupportMask) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape("support mask", self.dims, other.dims));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseNoise {
    /// Masked noise, the sparse component.
    pub s: DenseMatrix,
    pub support: SupportMask,
    /// Scaled noise before masking.
    pub dense: DenseMatrix,
}

/// Scaled Gaussian noise at the requested SNR relative to `x`, masked to
/// roughly `sparsity` of the entries.
pub fn gen_sparse_noise(
    x: &DenseMatrix,
    sparsity: f64,
    snr: f64,
    scale: SnrScale,
    seed: u64,
) -> Result<SparseNoise> {
    check_sparsity(sparsity)?;
    let signal = x.frob_norm_sq();
    if signal == 0.0 {
        return Err(Error::Domain("SNR is undefined for an all-zero signal".into()));
    }
    let mut noise_rng = stream(seed, NOISE_STREAM);
    let raw = gaussian(x.rows(), x.cols(), &mut noise_rng);
    let gain = (signal / (raw.frob_norm_sq() * scale.power_ratio(snr))).sqrt();
    let dense = raw.scale(gain)?;

    let mut mask_rng = stream(seed, MASK_STREAM);
    let bits: Vec<bool> = (0..x.len()).map(|_| mask_rng.gen::<f64>() < sparsity).collect();
    let data = dense
        .as_slice()
        .iter()
        .zip(&bits)
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect();
    let s = DenseMatrix::from_vec(x.rows(), x.cols(), data)?;
    Ok(SparseNoise {
        s,
        support: SupportMask::new(x.dims(), bits)?,
        dense,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    pub x_true: DenseMatrix,
    pub s_true: DenseMatrix,
    pub y: DenseMatrix,
    pub support: SupportMask,
}

impl SynthInstance {
    pub fn generate(spec: &SynthSpec) -> Result<Self> {
        let low = gen_lowrank(spec)?;
        let noise = gen_sparse_noise(&low.x, spec.sparsity, spec.snr, spec.snr_scale, spec.seed)?;
        let y = low.x.add(&noise.s)?;
        Ok(Self {
            x_true: low.x,
            s_true: noise.s,
            y,
            support: noise.support,
        })
    }
}

/// Root mean square entrywise difference.
pub fn rmse(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    Ok((a.dist_sq(b)? / a.len() as f64).sqrt())
}

/// Signal-to-noise ratio of `x` against `noise`.
pub fn snr_of(x: &DenseMatrix, noise: &DenseMatrix, scale: SnrScale) -> Result<f64> {
    let (signal, power) = (x.frob_norm_sq(), noise.frob_norm_sq());
    if signal == 0.0 || power == 0.0 {
        return Err(Error::Domain("SNR needs nonzero signal and noise".into()));
    }
    Ok(scale.encode_power_ratio(signal / power))
}
