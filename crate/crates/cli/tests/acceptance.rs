//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

// `!(x <= tol)` is deliberate: NaN must fail.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::process::Command;
use std::time::{Duration, Instant};

use asf_lab::frameop::DEFAULT_DENSE_CAP;
use asf_lab::linalg::{max_abs, LinearMap};
use asf_lab::operators::commutation_phase;
use asf_lab::pnorms::{raw_pnorm, singular_values};
use asf_lab::sweep::{resume_sweep, run_sweep, ResultTable, SweepConfig, SweepSpec};
use asf_lab::{
    asf_verdict, assemble_frame_matrix, build_cyclic_model, conjugate_exponent, exact_p2_extremes, modulate,
    opnorm_estimate, painless_oracle, scale_study, translate, vector_pnorm, Classification, CyclicModel,
    EstimatorOptions, FramePair, GaborTriple, GridVector, Matrix, NormEstimate, ScaleParams, Tolerances, Trend,
    TrendThresholds,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn lab<T>(r: asf_lab::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    Matrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

fn indicator_pair(t: GaborTriple, period: f64, len: usize) -> Result<(FramePair, CyclicModel), String> {
    let model = lab(build_cyclic_model(&t, &t, period / len as f64, period))?;
    let pair = lab(FramePair::indicator(&model, &t, &t))?;
    Ok((pair, model))
}

fn exact_tiling() -> Outcome {
    let t = lab(GaborTriple::new(1.0, 1.0, 1.0))?;
    let start = Instant::now();
    let mut worst = (0.0f64, 0.0f64);
    for len in [16, 32] {
        let (pair, model) = indicator_pair(t, 4.0, len)?;
        let s = lab(assemble_frame_matrix(&pair, DEFAULT_DENSE_CAP))?;
        let dev = max_abs(&(s - Matrix::identity(len, len)));
        ensure!(dev <= 1e-10, "L={len}: |S - I|_max = {dev:e}");
        let oracle = lab(painless_oracle(1.0, 1.0, 1.0, &model))?;
        ensure!(
            oracle.min == 1 && oracle.max == 1,
            "L={len}: covering count not identically 1"
        );
        let v = lab(asf_verdict(&pair, &model, 2.0, &Tolerances::default()))?;
        ensure!(
            v.classification == Classification::Asf,
            "L={len}: {:?}",
            v.classification
        );
        ensure!(v.condition <= 1.0 + 1e-6, "L={len}: condition {}", v.condition);
        worst = (worst.0.max(dev), worst.1.max(v.condition));
    }
    let el = start.elapsed();
    ensure!(el < Duration::from_secs(1), "runtime {el:?}");
    Ok(format!("|S-I|_max={:.1e} condition={} in {el:.2?}", worst.0, worst.1))
}

fn painless_equivalence() -> Outcome {
    let (a, b, c) = (0.5, 1.0, 0.75);
    let t = lab(GaborTriple::new(a, b, c))?;
    let start = Instant::now();
    let (pair, model) = indicator_pair(t, 4.0, 16)?;
    let oracle = lab(painless_oracle(a, b, c, &model))?;
    ensure!(
        oracle.min == 1 && oracle.max == 2,
        "G range {}..{}",
        oracle.min,
        oracle.max
    );
    let s = lab(assemble_frame_matrix(&pair, DEFAULT_DENSE_CAP))?;
    let mut diag = Matrix::zeros(16, 16);
    for (j, g) in oracle.counts.iter().enumerate() {
        diag[(j, j)] = Complex64::new(*g as f64 / b, 0.0);
    }
    let dev = max_abs(&(s - diag));
    ensure!(dev <= 1e-12, "|S - diag(G)|_max = {dev:e}");
    for p in [1.5, 2.0, 3.0] {
        let v = lab(asf_verdict(&pair, &model, p, &Tolerances::default()))?;
        ensure!(
            rel(v.lower, 1.0) <= 1e-6 && rel(v.upper, 2.0) <= 1e-6,
            "p={p}: (lower, upper) = ({}, {})",
            v.lower,
            v.upper
        );
    }
    let el = start.elapsed();
    ensure!(el < Duration::from_secs(5), "runtime {el:?}");
    Ok(format!(
        "|S-diag(G)|_max={dev:.1e}, bounds (1,2) at p=1.5,2,3 in {el:.2?}"
    ))
}

fn density_counting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gap = lab(GaborTriple::new(1.0, 2.0, 0.5))?;
    for len in [4usize, 8, 16] {
        // Two translates, one modulation: redundancy 2/L < 1.
        let model = lab(CyclicModel::discrete(len, (len / 2, 1), (len / 2, 1)))?;
        let g = GridVector::new(random_vector(&mut rng, len), model.h());
        let pair = lab(FramePair::from_windows(&model, g.clone(), g.conj()))?;
        ensure!(pair.synth().redundancy() < 1.0, "L={len}: redundancy not below 1");
        let (pair_gap, model_gap) = indicator_pair(gap, 2.0, len)?;
        ensure!(
            pair_gap.synth().redundancy() < 1.0,
            "L={len}: (1,2) redundancy not below 1"
        );
        for (name, pair, model) in [("discrete", &pair, &model), ("(1,2)", &pair_gap, &model_gap)] {
            for p in [1.5, 2.0, 3.0] {
                let v = lab(asf_verdict(pair, model, p, &Tolerances::default()))?;
                ensure!(
                    v.lower == 0.0 && v.singular && v.classification == Classification::NotAsf,
                    "{name} L={len} p={p}: lower={} {:?}",
                    v.lower,
                    v.classification
                );
            }
        }
    }
    Ok("lower=0, NOT_ASF at L=4,8,16 for both models".into())
}

fn spectral_cross_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let len = [4usize, 6, 8, 12, 16, 24, 32][rng.gen_range(0..7)];
        let lattices: Vec<(usize, usize)> = divisors(len)
            .into_iter()
            .flat_map(|dt| divisors(len).into_iter().map(move |df| (dt, df)))
            .filter(|(dt, df)| dt * df <= len)
            .collect();
        let steps = lattices[rng.gen_range(0..lattices.len())];
        let h = 4.0 / len as f64;
        let model = lab(CyclicModel::from_steps(len, h, steps, steps))?;
        let g = GridVector::new(random_vector(&mut rng, len), h);
        let pair = lab(FramePair::from_windows(&model, g.clone(), g.conj()))?;
        let mut tol = Tolerances::default();
        tol.estimator.seed = trial;
        let v = lab(asf_verdict(&pair, &model, 2.0, &tol))?;
        let s = lab(assemble_frame_matrix(&pair, DEFAULT_DENSE_CAP))?;
        let exact = lab(exact_p2_extremes(&s, DEFAULT_DENSE_CAP))?;
        let e_up = rel(v.upper, exact.upper);
        let e_lo = rel(v.lower, exact.lower);
        ensure!(
            e_up <= 1e-6 && e_lo <= 1e-6,
            "trial {trial} L={len} lattice {steps:?}: ({}, {}) vs SVD ({}, {})",
            v.lower,
            v.upper,
            exact.lower,
            exact.upper
        );
        worst = worst.max(e_up).max(e_lo);
    }
    Ok(format!("50 pairs, worst relative error {worst:.1e}"))
}

fn witness_consistent(a: &Matrix, e: &NormEstimate, p: f64, what: &str) -> Result<(), String> {
    let attained = raw_pnorm(&a.apply(&e.witness), p) / raw_pnorm(&e.witness, p);
    ensure!(
        rel(attained, e.value) <= 1e-10,
        "{what}: witness gives {attained}, reported {}",
        e.value
    );
    Ok(())
}

fn estimator_suite() -> Outcome {
    let opts = EstimatorOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut runs = 0usize;
    for p in [1.2, 1.5, 2.0, 3.0, 8.0] {
        for _ in 0..5 {
            let n = rng.gen_range(1..10);
            let d = random_vector(&mut rng, n);
            let a = Matrix::from_fn(n, n, |i, j| if i == j { d[i] } else { Complex64::new(0.0, 0.0) });
            let e = lab(opnorm_estimate(&a, p, &opts))?;
            let exact = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
            ensure!(rel(e.value, exact) <= 1e-10, "diagonal p={p}: {} vs {exact}", e.value);
            witness_consistent(&a, &e, p, "diagonal")?;
            runs += 1;
        }
    }
    for i in 0..50 {
        let a = random_matrix(&mut rng, 8);
        let e = lab(opnorm_estimate(&a, 2.0, &opts))?;
        let sv = singular_values(&a).into_iter().fold(0.0, f64::max);
        ensure!(rel(e.value, sv) <= 1e-8, "8x8 #{i}: {} vs SVD {sv}", e.value);
        witness_consistent(&a, &e, 2.0, "8x8")?;
        runs += 1;
    }
    let mut worst = 0.0f64;
    for p in [1.5, 3.0] {
        let q = lab(conjugate_exponent(p))?;
        for i in 0..20 {
            let a = random_matrix(&mut rng, 6);
            let adj = a.adjoint();
            let ep = lab(opnorm_estimate(&a, p, &opts))?;
            let eq = lab(opnorm_estimate(&adj, q, &opts))?;
            witness_consistent(&a, &ep, p, "duality A")?;
            witness_consistent(&adj, &eq, q, "duality A*")?;
            runs += 2;
            let d = rel(ep.value, eq.value);
            ensure!(d <= 0.01, "6x6 #{i} p={p}: {} vs {}", ep.value, eq.value);
            worst = worst.max(d);
        }
    }
    Ok(format!(
        "{runs} runs witness-consistent, duality gap at most {:.2}%",
        worst * 100.0
    ))
}

fn isometry_commutation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut drift = 0.0f64;
    let mut phase_err = 0.0f64;
    let mut check = |f: &GridVector, n: i64, m: i64, df: usize| -> Result<(), String> {
        let len = f.len();
        for p in [1.5, 2.0, 3.0] {
            let base = lab(vector_pnorm(f, p))?;
            for g in [translate(f, n), modulate(f, m, df)] {
                let d = (lab(vector_pnorm(&g, p))? - base).abs() / base.max(1.0);
                drift = drift.max(d);
                ensure!(d <= 1e-14, "L={len} n={n} m={m} df={df} p={p}: drift {d:e}");
            }
        }
        let lhs = modulate(&translate(f, n), m, df);
        let rhs = translate(&modulate(f, m, df), n).scale(commutation_phase(m, df, n, len));
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            let d = (a - b).norm();
            phase_err = phase_err.max(d);
            ensure!(d <= 1e-14, "L={len} n={n} m={m} df={df}: commutation error {d:e}");
        }
        Ok(())
    };
    let mut cases = 0;
    for len in 1..=16usize {
        let f = GridVector::new(random_vector(&mut rng, len), 1.0 / len as f64);
        for df in divisors(len) {
            for m in 0..(len / df) as i64 {
                for n in 0..len as i64 {
                    check(&f, n, m, df)?;
                    cases += 1;
                }
            }
        }
    }
    let d64 = divisors(64);
    for _ in 0..100 {
        let f = GridVector::new(random_vector(&mut rng, 64), 0.0625);
        let df = d64[rng.gen_range(0..d64.len())];
        check(&f, rng.gen_range(-128..128), rng.gen_range(-64..64), df)?;
        cases += 1;
    }
    Ok(format!(
        "{cases} cases, max norm drift {drift:.1e}, max phase error {phase_err:.1e}"
    ))
}

fn scale_stability() -> Outcome {
    let start = Instant::now();
    let tol = Tolerances::default();
    let th = TrendThresholds::default();
    let sizes = [16, 32, 64];
    let t = lab(GaborTriple::new(0.5, 1.0, 0.75))?;
    let good = ScaleParams {
        synth: t,
        anal: t,
        period: 4.0,
    };
    let gap = lab(GaborTriple::new(1.0, 2.0, 0.5))?;
    let bad = ScaleParams {
        synth: gap,
        anal: gap,
        period: 2.0,
    };
    let mut lowers = Vec::new();
    for p in [1.5, 2.0, 3.0] {
        let study = lab(scale_study(&good, p, &sizes, &tol, &th))?;
        ensure!(study.trend == Trend::Stable, "painless p={p}: trend {:?}", study.trend);
        ensure!(study.rows.len() == sizes.len(), "painless p={p}: gaps {:?}", study.gaps);
        for r in &study.rows {
            ensure!(
                (r.lower - 1.0).abs() <= 0.1,
                "painless p={p} L={}: lower {}",
                r.len,
                r.lower
            );
            lowers.push(r.lower);
        }
        let study = lab(scale_study(&bad, p, &sizes, &tol, &th))?;
        ensure!(study.rows.len() == sizes.len(), "gap p={p}: gaps {:?}", study.gaps);
        for r in &study.rows {
            ensure!(r.lower == 0.0, "gap p={p} L={}: lower {}", r.len, r.lower);
        }
    }
    let el = start.elapsed();
    ensure!(el < Duration::from_secs(30), "runtime {el:?}");
    let (lo, hi) = lowers
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    Ok(format!(
        "painless STABLE with lower in [{lo}, {hi}], gap lower=0 at L=16,32,64 in {el:.2?}"
    ))
}

const SWEEP: &str = r#"
period = 6.0
grid_res = 0.25
seed = 11
[axes]
a = [0.5, 0.75, 1.0, 1.5]
b = [0.5, 1.0, 2.0]
c = [0.75, 1.0]
rho = [0.5, 0.75]
p = [1.5, 2.0, 3.0]
"#;

fn check_json() -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_asf-lab"))
        .args([
            "check",
            "--p",
            "1.5",
            "--synth",
            "0.5,1,0.75",
            "--anal",
            "0.5,1,0.5",
            "--size",
            "24",
            "--period",
            "6",
        ])
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "check exited with {:?}", out.status);
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let cfg = lab(SweepConfig::from_toml(SWEEP))?;
    let spec = lab(SweepSpec::from_config(&cfg))?;
    let one = lab(run_sweep(&spec, 1))?.to_csv_string();
    let eight = lab(run_sweep(&spec, 8))?.to_csv_string();
    ensure!(one == eight, "workers=1 and workers=8 tables differ");
    let mut partial = lab(ResultTable::read_csv(one.as_bytes()))?;
    let total = partial.rows.len();
    partial.rows.truncate(total / 2);
    let resumed = lab(resume_sweep(&spec, &partial, 8))?.to_csv_string();
    ensure!(resumed == one, "resumed table differs");
    let (first, second) = (check_json()?, check_json()?);
    ensure!(first == second, "check output differs between runs");
    Ok(format!(
        "{total}-row CSV identical for 1 and 8 workers and after resume; check JSON identical"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("exact tiling identity", exact_tiling),
        ("painless oracle equivalence", painless_equivalence),
        ("density counting", density_counting),
        ("p=2 spectral cross-check", spectral_cross_check),
        ("p-norm estimator suite", estimator_suite),
        ("isometry and commutation", isometry_commutation),
        ("scale stability", scale_stability),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
