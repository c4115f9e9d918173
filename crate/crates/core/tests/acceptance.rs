//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits non-zero if any criterion fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 7`.

mod common;

use std::process::{Command, ExitCode};
use std::time::Instant;

use awls_rpca::bench::{grid, run_bench, BenchOptions};
use awls_rpca::io::{read_matrix, to_csv, to_mat1};
use awls_rpca::media::{
    decompose_stack, moving_block_video, read_pgm, stack_frames, unstack, write_pgm, FrameStack,
    DEFAULT_FOREGROUND_THRESHOLD,
};
use awls_rpca::solver::{
    objective, stationarity_residuals, update_sparse_l0, update_sparse_l2, update_u, update_v, IterationRecord,
};
use awls_rpca::synth::SupportMask;
use awls_rpca::weights::init_weights;
use awls_rpca::{
    rmse, solve, solve_observed, DenseMatrix, Dims, Init, SolverConfig, SynthInstance, SynthSpec,
    Termination, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{
    fd_gradient, l0_sparse_oracle, l2_sparse_oracle, u_optimality_residual, uniform, v_optimality_residual,
};

type Check = std::result::Result<String, String>;

fn verdict(pass: bool, detail: String) -> Check {
    if pass {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Synthetic recovery, 500x500, rank 10, 26.4% outliers, SNR 10.
fn c1_synthetic_recovery() -> Check {
    let spec = SynthSpec::new(500, 500, 0.264, 10.0, 2024);
    let inst = SynthInstance::generate(&spec).map_err(|e| e.to_string())?;
    let config = SolverConfig::with_rank(spec.rank);
    let res = solve(&inst.y, &config).map_err(|e| e.to_string())?;
    let rx = rmse(&res.low_rank().unwrap(), &inst.x_true).unwrap();
    let rs = rmse(&res.sparse, &inst.s_true).unwrap();
    verdict(
        rx <= 1e-6 && rs <= 1e-6 && res.iterations <= 500,
        format!(
            "RMSE(X)={rx:.3e} RMSE(S)={rs:.3e} iterations={} ({}) [λ={} t={} p={}]",
            res.iterations, res.termination, config.lambda, config.prox_t, config.p
        ),
    )
}

/// Table-1 grid at 500x500, sparsity 0.1, six SNRs, three trials each.
fn c2_table_grid() -> Check {
    let cells = grid(&[500], &[0.1], &[1.0, 3.0, 6.0, 9.0, 12.0, 15.0], &[Variant::L2]);
    let opts = BenchOptions {
        trials: 3,
        base_seed: 1,
        ..BenchOptions::default()
    };
    let report = run_bench(&cells, &opts).map_err(|e| e.to_string())?;
    let worst = report
        .records
        .iter()
        .map(|r| if r.error.is_some() { f64::INFINITY } else { r.rmse_x })
        .fold(0.0, f64::max);
    let per_snr: Vec<String> = report
        .summary()
        .iter()
        .map(|c| format!("snr{}:{:.1e}", c.snr, c.mean_rmse_x))
        .collect();
    verdict(
        report.records.len() == 18 && worst <= 1e-6,
        format!("{} runs, worst RMSE(X)={worst:.3e}; means {}", report.records.len(), per_snr.join(" ")),
    )
}

struct DescentStats {
    runs: usize,
    sweeps: usize,
    descent_violations: Vec<String>,
    bound_violations: usize,
    monotone_violations: usize,
    step_violations: Vec<String>,
    converged: usize,
    seconds: f64,
}

fn random_descent_runs() -> DescentStats {
    let mut rng = ChaCha8Rng::seed_from_u64(0xDE5C);
    let mut stats = DescentStats {
        runs: 0,
        sweeps: 0,
        descent_violations: Vec::new(),
        bound_violations: 0,
        monotone_violations: 0,
        step_violations: Vec::new(),
        converged: 0,
        seconds: 0.0,
    };
    let start = Instant::now();
    for case in 0..100 {
        let m = rng.gen_range(5..=50);
        let n = rng.gen_range(5..=50);
        let r = rng.gen_range(1..=5usize.min(m).min(n));
        let mut spec = SynthSpec::new(m, n, rng.gen_range(0.05..0.4), rng.gen_range(-1.0..6.0), rng.gen());
        spec.rank = r;
        let y = if case % 4 == 3 {
            // Unstructured data: full-rank Gaussian with a few gross outliers.
            uniform(m, n, -3.0, 3.0, &mut rng)
                .zip_map(&uniform(m, n, 0.0, 1.0, &mut rng), "outliers", |v, u| {
                    if u < 0.05 {
                        v * 40.0
                    } else {
                        v
                    }
                })
                .unwrap()
        } else {
            SynthInstance::generate(&spec).unwrap().y
        };
        let config = SolverConfig {
            rank: rng.gen_range(1..=5usize.min(m).min(n)),
            lambda: rng.gen_range(0.1..5.0),
            prox_t: rng.gen_range(0.01..1.0),
            p: [0.5, 1.0, 2.0, 10.0][case % 4],
            variant: Variant::L2,
            max_iter: 300,
            tol: 1e-9,
            seed: rng.gen(),
            init: if case % 2 == 0 { Init::PowerIteration } else { Init::GaussianRandom },
        };
        let mut prev_w = init_weights(y.dims(), config.p).unwrap().into_weights();
        let res = solve_observed(&y, &config, |view| {
            let w = view.weights.weights();
            for (new, old) in w.as_slice().iter().zip(prev_w.as_slice()) {
                if !(0.0..=1.0).contains(new) {
                    stats.bound_violations += 1;
                }
                if new > old {
                    stats.monotone_violations += 1;
                }
            }
            prev_w = w.clone();
        });
        let res = match res {
            Ok(r) => r,
            Err(e) => {
                stats.descent_violations.push(format!("case {case}: solver error {e}"));
                continue;
            }
        };
        let j0 = res.initial_objective;
        let mut before = j0;
        for rec in &res.trace {
            let required = config.prox_t * (rec.delta_u.powi(2) + rec.delta_v.powi(2)) - 1e-12 * (1.0 + j0);
            if before - rec.objective < required {
                stats.descent_violations.push(format!(
                    "case {case} iter {}: decrease {:.3e} < {:.3e}",
                    rec.iteration,
                    before - rec.objective,
                    required
                ));
            }
            before = rec.objective;
        }
        if res.termination == Termination::Converged {
            stats.converged += 1;
            let last = res.trace.last().unwrap();
            if last.delta_u.max(last.delta_v) > 10.0 * config.tol {
                stats.step_violations.push(format!(
                    "case {case}: ||dU||={:.2e} ||dV||={:.2e}",
                    last.delta_u, last.delta_v
                ));
            }
        }
        stats.runs += 1;
        stats.sweeps += res.iterations;
    }
    stats.seconds = start.elapsed().as_secs_f64();
    stats
}

/// Monotone descent with the proximal sufficient-decrease bound, 100 instances.
fn c3_descent(stats: &DescentStats) -> Check {
    verdict(
        stats.runs == 100 && stats.descent_violations.is_empty(),
        format!(
            "{} runs in {:.1}s, {} sweeps, {} violations{}; converged {} (final-step violations {})",
            stats.runs,
            stats.seconds,
            stats.sweeps,
            stats.descent_violations.len(),
            stats
                .descent_violations
                .first()
                .map(|s| format!(" e.g. {s}"))
                .unwrap_or_default(),
            stats.converged,
            stats.step_violations.len()
        ),
    )
}

/// Largest entry change at the 50th repeated update with a fixed sparse input.
fn late_weight_change(p: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = uniform(50, 50, -5.0, 5.0, &mut rng);
    let mut state = init_weights(s.dims(), p).unwrap();
    let mut change = f64::INFINITY;
    for _ in 0..50 {
        let next = state.update(&s).unwrap();
        change = next.weights().max_abs_diff(state.weights()).unwrap();
        state = next;
    }
    change
}

/// Weight bounds and monotonicity over the runs of (3), plus the fixed-input
/// convergence check.
fn c4_weight_laws(stats: &DescentStats) -> Check {
    let gated: Vec<(f64, f64)> = [0.5, 1.0, 2.0]
        .iter()
        .flat_map(|&p| (0..5).map(move |seed| (p, late_weight_change(p, seed))))
        .collect();
    let worst = gated.iter().map(|&(_, c)| c).fold(0.0, f64::max);
    let default_p = SolverConfig::default().p;
    let at_default = (0..5).map(|seed| late_weight_change(default_p, seed)).fold(0.0, f64::max);
    verdict(
        stats.bound_violations == 0 && stats.monotone_violations == 0 && worst < 1e-6,
        format!(
            "bounds violations {}, monotonicity violations {}; 50-update change for p in {{0.5,1,2}}: max {worst:.2e} \
             (solver default p={default_p}: {at_default:.2e}, not gated)",
            stats.bound_violations, stats.monotone_violations
        ),
    )
}

/// S, U and V updates against independent oracles, 60 random 5x5 instances each.
fn c5_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0AC1E);
    let (mut l2_err, mut l0_mismatch, mut uv_ratio) = (0.0f64, 0usize, 0.0f64);
    for case in 0..60 {
        let r = uniform(5, 5, -10.0, 10.0, &mut rng);
        let w = uniform(5, 5, 0.0, 1.0, &mut rng);
        let lambda = rng.gen_range(0.0..20.0);
        let got = update_sparse_l2(&r, &w, lambda).unwrap();
        l2_err = l2_err.max(got.max_abs_diff(&l2_sparse_oracle(&r, &w, lambda)).unwrap());

        // Include exact ties r² = λ w² on some entries.
        let r0 = if case % 3 == 0 {
            DenseMatrix::from_fn(5, 5, |i, j| if (i + j) % 2 == 0 { 0.5 } else { r.get(i, j) }).unwrap()
        } else {
            r.clone()
        };
        let (w0, lambda0) = if case % 3 == 0 {
            (DenseMatrix::filled(Dims::new(5, 5).unwrap(), 0.5).unwrap(), 1.0)
        } else {
            (w.clone(), lambda)
        };
        let got0 = update_sparse_l0(&r0, &w0, lambda0).unwrap();
        let want0 = l0_sparse_oracle(&r0, &w0, lambda0);
        l0_mismatch += got0
            .as_slice()
            .iter()
            .zip(want0.as_slice())
            .filter(|(a, b)| a.to_bits() != b.to_bits())
            .count();

        let rank = rng.gen_range(1..=5);
        let y = uniform(5, 5, -5.0, 5.0, &mut rng);
        let s = uniform(5, 5, -1.0, 1.0, &mut rng);
        let u = uniform(5, rank, -2.0, 2.0, &mut rng);
        let v = uniform(rank, 5, -2.0, 2.0, &mut rng);
        let t = rng.gen_range(1e-3..2.0);
        let scale = 1.0 + y.frob_norm();
        let u_next = update_u(&y, &s, &u, &v, t).unwrap();
        let v_next = update_v(&y, &s, &u_next, &v, t).unwrap();
        uv_ratio = uv_ratio.max(u_optimality_residual(&y, &s, &u, &v, &u_next, t).unwrap() / scale);
        uv_ratio = uv_ratio.max(v_optimality_residual(&y, &s, &u_next, &v, &v_next, t).unwrap() / scale);
    }
    verdict(
        l2_err <= 1e-8 && l0_mismatch == 0 && uv_ratio <= 1e-9,
        format!(
            "60 instances each: L2 max dev {l2_err:.2e}, L0 mismatches {l0_mismatch}, \
             U/V optimality residual / (1+||Y||) max {uv_ratio:.2e}"
        ),
    )
}

/// Stationarity residuals against central finite differences of J.
fn c6_gradient() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6AD);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let y = uniform(8, 8, -3.0, 3.0, &mut rng);
        let u = uniform(8, 2, -1.0, 1.0, &mut rng);
        let v = uniform(2, 8, -1.0, 1.0, &mut rng);
        let s = uniform(8, 8, -0.5, 0.5, &mut rng);
        let w = uniform(8, 8, 0.0, 1.0, &mut rng);
        let lambda = rng.gen_range(0.1..5.0);
        let (res_u, res_v) = stationarity_residuals(&y, &u, &v, &s).unwrap();
        let gu = fd_gradient(&u, 1e-4, |uu| objective(&y, uu, &v, &s, &w, lambda).unwrap());
        let gv = fd_gradient(&v, 1e-4, |vv| objective(&y, &u, vv, &s, &w, lambda).unwrap());
        // ∂J/∂U = -2 (Y - UV - S) Vᵀ and likewise for V.
        worst = worst.max((gu.frob_norm() / 2.0 - res_u).abs() / res_u);
        worst = worst.max((gv.frob_norm() / 2.0 - res_v).abs() / res_v);
    }
    verdict(worst <= 1e-6, format!("25 instances 8x8 r=2, max relative deviation {worst:.2e}"))
}

/// Support recovery by thresholding the final weights at 0.5.
fn c7_support() -> Check {
    let spec = SynthSpec::new(500, 500, 0.1, 9.0, 77);
    let inst = SynthInstance::generate(&spec).map_err(|e| e.to_string())?;
    let res = solve(&inst.y, &SolverConfig::with_rank(spec.rank)).map_err(|e| e.to_string())?;
    let w = res.weights.weights();
    let predicted = SupportMask::new(w.dims(), w.as_slice().iter().map(|&v| v < 0.5).collect()).unwrap();
    let acc = predicted.accuracy(&inst.support).unwrap();
    verdict(
        acc >= 0.99,
        format!(
            "accuracy {:.4}% ({} predicted, {} true outliers)",
            100.0 * acc,
            predicted.count(),
            inst.support.count()
        ),
    )
}

/// Moving-block video, rank 1.
fn c8_media() -> Check {
    let video = moving_block_video(20, 32, 32, 6).map_err(|e| e.to_string())?;
    let dec = decompose_stack(&video.stack, &SolverConfig::with_rank(1)).map_err(|e| e.to_string())?;
    let f1 = dec.foreground_mask(DEFAULT_FOREGROUND_THRESHOLD).f1(&video.support).unwrap();
    let deviation = dec
        .background
        .frames()
        .iter()
        .map(|f| f.max_abs_diff(&video.background).unwrap())
        .fold(0.0, f64::max);
    verdict(
        f1 >= 0.9 && deviation <= 2.0,
        format!(
            "F1 {f1:.4} (|S| > {DEFAULT_FOREGROUND_THRESHOLD}), max background deviation {deviation:.2e} gray levels, {} iterations",
            dec.result.iterations
        ),
    )
}

fn run_cli_bench(dir: &std::path::Path, name: &str) -> std::result::Result<Vec<u8>, String> {
    let out = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_awls"))
        .args(["bench", "--sizes", "60,80", "--sparsities", "0.1,0.2", "--snrs", "1,9"])
        .args(["--trials", "3", "--seed", "1", "--variant", "l2,l0", "--no-timing", "--out"])
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(format!("bench exited with {}", status.status));
    }
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn trace_bits(trace: &[IterationRecord]) -> Vec<u64> {
    trace
        .iter()
        .flat_map(|r| {
            [
                r.iteration as u64,
                r.objective.to_bits(),
                r.delta_u.to_bits(),
                r.delta_v.to_bits(),
                r.weight_change.to_bits(),
            ]
        })
        .collect()
}

/// Repeated bench runs and repeated solves are bit-identical.
fn c9_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = (run_cli_bench(dir.path(), "a.csv")?, run_cli_bench(dir.path(), "b.csv")?);
    let json = (run_cli_bench(dir.path(), "a.json")?, run_cli_bench(dir.path(), "b.json")?);

    let inst = SynthInstance::generate(&SynthSpec::new(120, 90, 0.2, 3.0, 5)).unwrap();
    let mut identical_traces = true;
    for variant in [Variant::L2, Variant::L0] {
        for init in [Init::PowerIteration, Init::GaussianRandom] {
            let config = SolverConfig {
                variant,
                init,
                ..SolverConfig::with_rank(2)
            };
            let a = solve(&inst.y, &config).unwrap();
            let b = solve(&inst.y, &config).unwrap();
            identical_traces &= trace_bits(&a.trace) == trace_bits(&b.trace);
        }
    }
    verdict(
        csv.0 == csv.1 && json.0 == json.1 && identical_traces,
        format!(
            "bench CSV identical: {}, JSON identical: {} ({} rows); solve traces identical: {identical_traces}",
            csv.0 == csv.1,
            json.0 == json.1,
            csv.0.iter().filter(|&&b| b == b'\n').count() - 1
        ),
    )
}

fn same_bits(a: &DenseMatrix, b: &DenseMatrix) -> bool {
    a.dims() == b.dims() && a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// CSV, MAT1, PGM and stack/unstack round trips.
fn c10_round_trips() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10);
    let mut failures = Vec::new();
    for case in 0..200 {
        let (r, c) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let m = DenseMatrix::from_fn(r, c, |_, _| loop {
            let v = if case % 2 == 0 {
                f64::from_bits(rng.gen())
            } else {
                rng.gen_range(-1e3..1e3)
            };
            if v.is_finite() {
                break v;
            }
        })
        .unwrap();
        if !same_bits(&read_matrix(&to_csv(&m)).unwrap(), &m) {
            failures.push(format!("csv case {case}"));
        }
        if !same_bits(&read_matrix(&to_mat1(&m)).unwrap(), &m) {
            failures.push(format!("mat1 case {case}"));
        }

        let img = DenseMatrix::from_fn(r, c, |_, _| f64::from(rng.gen::<u8>())).unwrap();
        if !same_bits(&read_pgm(&write_pgm(&img)).unwrap(), &img) {
            failures.push(format!("pgm case {case}"));
        }

        let frames: Vec<DenseMatrix> = (0..rng.gen_range(1..6)).map(|_| uniform(r, c, -300.0, 300.0, &mut rng)).collect();
        let stack = FrameStack::new(frames).unwrap();
        let back = unstack(&stack_frames(&stack), r, c).unwrap();
        if !stack.frames().iter().zip(back.frames()).all(|(a, b)| same_bits(a, b)) || back.len() != stack.len() {
            failures.push(format!("stack case {case}"));
        }
    }
    verdict(
        failures.is_empty(),
        format!("200 cases per format, failures: {}", if failures.is_empty() { "none".into() } else { failures.join(", ") }),
    )
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: usize| selected.is_empty() || selected.contains(&id);

    // Criteria 3 and 4 share the same 100 solver runs.
    let descent = (wanted(3) || wanted(4)).then(random_descent_runs);

    let mut results: Vec<(usize, &str, Check, f64)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Check| {
        if wanted(id) {
            let start = Instant::now();
            let outcome = f();
            let secs = start.elapsed().as_secs_f64();
            let (tag, detail) = match &outcome {
                Ok(d) => ("PASS", d),
                Err(d) => ("FAIL", d),
            };
            println!("criterion {id:>2} {tag} {name}: {detail} [{secs:.1}s]");
            results.push((id, name, outcome, secs));
        }
    };

    record(1, "synthetic recovery", &mut c1_synthetic_recovery);
    record(2, "table grid 500x500", &mut c2_table_grid);
    if let Some(stats) = &descent {
        record(3, "monotone descent", &mut || c3_descent(stats));
        record(4, "weight laws", &mut || c4_weight_laws(stats));
    }
    record(5, "oracle equivalence", &mut c5_oracles);
    record(6, "gradient check", &mut c6_gradient);
    record(7, "support identification", &mut c7_support);
    record(8, "media smoke test", &mut c8_media);
    record(9, "determinism", &mut c9_determinism);
    record(10, "round trips", &mut c10_round_trips);

    let failed = results.iter().filter(|r| r.2.is_err()).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
