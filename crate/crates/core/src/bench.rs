//! Grid benchmark: synthesize, decompose, score.
//!
//! Each (cell, trial) pair derives its own seed from the base seed and the cell
//! parameters, so results do not depend on scheduling or on which other cells
//! are in the grid.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{solve, SolverConfig, Variant};
use crate::synth::{rmse, SnrScale, SynthInstance, SynthSpec};

pub const CSV_HEADER: &str = "m,n,sparsity,snr,trial,variant,rmse_x,rmse_s,iterations,wall_seconds";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub m: usize,
    pub n: usize,
    /// `None` uses the default `m / 50`.
    pub rank: Option<usize>,
    pub sparsity: f64,
    pub snr: f64,
    pub variant: Variant,
}

/// Cartesian product in the order sizes, sparsities, SNRs, variants. Sizes are
/// square.
pub fn grid(sizes: &[usize], sparsities: &[f64], snrs: &[f64], variants: &[Variant]) -> Vec<BenchCell> {
    let mut cells = Vec::new();
    for &m in sizes {
        for &sparsity in sparsities {
            for &snr in snrs {
                for &variant in variants {
                    cells.push(BenchCell {
                        m,
                        n: m,
                        rank: None,
                        sparsity,
                        snr,
                        variant,
                    });
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub trials: usize,
    pub base_seed: u64,
    /// Rank, seed and variant are overridden per cell.
    pub solver: SolverConfig,
    pub snr_scale: SnrScale,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    /// When false every `wall_seconds` is 0, which makes reports byte-stable.
    pub timing: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            trials: 1,
            base_seed: 0,
            solver: SolverConfig::default(),
            snr_scale: SnrScale::Log10,
            threads: 0,
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub m: usize,
    pub n: usize,
    pub sparsity: f64,
    pub snr: f64,
    pub trial: usize,
    pub variant: Variant,
    pub rmse_x: f64,
    pub rmse_s: f64,
    pub iterations: usize,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
}

/// Mean figures over the trials of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub m: usize,
    pub n: usize,
    pub sparsity: f64,
    pub snr: f64,
    pub variant: Variant,
    pub trials: usize,
    pub failures: usize,
    pub mean_rmse_x: f64,
    pub mean_rmse_s: f64,
    pub mean_iterations: f64,
    pub mean_wall_seconds: f64,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{:?},{:?},{},{},{:?},{:?},{},{:?}",
                r.m, r.n, r.sparsity, r.snr, r.trial, r.variant, r.rmse_x, r.rmse_s, r.iterations, r.wall_seconds
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Pretty-printed JSON array; NaN metrics of failed cells become `null`.
    pub fn to_json(&self) -> Vec<u8> {
        let mut buf = serde_json::to_vec_pretty(self).expect("report serializes");
        buf.push(b'\n');
        buf
    }

    pub fn failures(&self) -> impl Iterator<Item = &BenchRecord> {
        self.records.iter().filter(|r| r.error.is_some())
    }

    /// One summary per cell, in first-appearance order. Failed trials are
    /// excluded from the means.
    pub fn summary(&self) -> Vec<CellSummary> {
        let mut out: Vec<CellSummary> = Vec::new();
        for r in &self.records {
            let pos = out.iter().position(|c| {
                c.m == r.m && c.n == r.n && c.sparsity == r.sparsity && c.snr == r.snr && c.variant == r.variant
            });
            let cell = match pos {
                Some(i) => &mut out[i],
                None => {
                    out.push(CellSummary {
                        m: r.m,
                        n: r.n,
                        sparsity: r.sparsity,
                        snr: r.snr,
                        variant: r.variant,
                        trials: 0,
                        failures: 0,
                        mean_rmse_x: 0.0,
                        mean_rmse_s: 0.0,
                        mean_iterations: 0.0,
                        mean_wall_seconds: 0.0,
                    });
                    out.last_mut().unwrap()
                }
            };
            cell.trials += 1;
            if r.error.is_some() {
                cell.failures += 1;
                continue;
            }
            cell.mean_rmse_x += r.rmse_x;
            cell.mean_rmse_s += r.rmse_s;
            cell.mean_iterations += r.iterations as f64;
            cell.mean_wall_seconds += r.wall_seconds;
        }
        for c in &mut out {
            let ok = (c.trials - c.failures) as f64;
            if ok == 0.0 {
                c.mean_rmse_x = f64::NAN;
                c.mean_rmse_s = f64::NAN;
                c.mean_iterations = f64::NAN;
                c.mean_wall_seconds = f64::NAN;
            } else {
                c.mean_rmse_x /= ok;
                c.mean_rmse_s /= ok;
                c.mean_iterations /= ok;
                c.mean_wall_seconds /= ok;
            }
        }
        out
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Data seed for one trial of a cell. The variant is left out so that every
/// variant sees the same instance.
pub fn cell_seed(base_seed: u64, cell: &BenchCell, trial: usize) -> u64 {
    let fields = [
        cell.m as u64,
        cell.n as u64,
        cell.rank.map_or(0, |r| r as u64 + 1),
        cell.sparsity.to_bits(),
        cell.snr.to_bits(),
        trial as u64,
    ];
    fields.iter().fold(splitmix64(base_seed), |h, &f| splitmix64(h ^ f))
}

fn run_one(cell: &BenchCell, trial: usize, opts: &BenchOptions) -> BenchRecord {
    let mut record = BenchRecord {
        m: cell.m,
        n: cell.n,
        sparsity: cell.sparsity,
        snr: cell.snr,
        trial,
        variant: cell.variant,
        rmse_x: f64::NAN,
        rmse_s: f64::NAN,
        iterations: 0,
        wall_seconds: 0.0,
        error: None,
    };
    let seed = cell_seed(opts.base_seed, cell, trial);
    let outcome = (|| -> Result<_> {
        let mut spec = SynthSpec::new(cell.m, cell.n, cell.sparsity, cell.snr, seed);
        spec.snr_scale = opts.snr_scale;
        if let Some(r) = cell.rank {
            spec.rank = r;
        }
        let inst = SynthInstance::generate(&spec)?;
        let config = SolverConfig {
            rank: spec.rank,
            variant: cell.variant,
            seed: splitmix64(seed),
            ..opts.solver.clone()
        };
        let start = Instant::now();
        let result = solve(&inst.y, &config)?;
        let elapsed = start.elapsed().as_secs_f64();
        Ok((
            rmse(&result.low_rank()?, &inst.x_true)?,
            rmse(&result.sparse, &inst.s_true)?,
            result.iterations,
            elapsed,
        ))
    })();
    match outcome {
        Ok((rx, rs, iterations, elapsed)) => {
            record.rmse_x = rx;
            record.rmse_s = rs;
            record.iterations = iterations;
            if opts.timing {
                record.wall_seconds = elapsed;
            }
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record
}

/// Runs every cell `opts.trials` times. Records come back in grid order, trial
/// minor, whatever the thread count. Cell failures are recorded, not raised.
pub fn run_bench(cells: &[BenchCell], opts: &BenchOptions) -> Result<BenchReport> {
    let jobs: Vec<(&BenchCell, usize)> = cells
        .iter()
        .flat_map(|c| (0..opts.trials).map(move |t| (c, t)))
        .collect();
    let run = || -> Vec<BenchRecord> { jobs.par_iter().map(|(c, t)| run_one(c, *t, opts)).collect() };
    let records = if opts.threads == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::Parameter(format!("cannot start {} bench threads: {e}", opts.threads)))?
            .install(run)
    };
    Ok(BenchReport { records })
}
