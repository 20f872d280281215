//! Acceptance criteria, one pass/fail line each.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use calderon_core::atoms::make_atom;
use calderon_core::experiments::{
    run_suite, verify_lemma12, verify_lemma14, verify_norm_equivalence, verify_prop15, verify_theorem1_pointwise,
    verify_theorem2, ExperimentConfig, Outcome, Status,
};
use calderon_core::exponents::{luxemburg_norm, modular};
use calderon_core::maximal::{hl_maximal, n_maximal, NOptions};
use calderon_core::potential::{inversion_error, potential};
use calderon_core::{
    Cube, DomainBox, ExponentFunction, FunctionClass, GridFunction, KernelSpec, MaximalParams, Result, ScaleGrid,
    VariableExponent,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Result<(bool, String)>,
}

fn status_of(outcomes: &[Outcome]) -> (bool, String) {
    let pass = outcomes.iter().all(|o| o.report.status() == Status::Pass);
    let detail = outcomes
        .iter()
        .map(|o| {
            let r = &o.report;
            let checks: Vec<String> = r.tolerance.keys().map(|k| format!("{k}={:.4}", r.measured[k])).collect();
            format!("{} [{}]", r.name, checks.join(" "))
        })
        .collect::<Vec<_>>()
        .join("; ");
    (pass, detail)
}

fn luxemburg() -> Result<(bool, String)> {
    // Smooth, rapidly decaying integrands: the midpoint rule is exact to
    // rounding, so the closed forms are the oracle.
    let line = DomainBox::new(1, 16.0, 4096)?;
    let plane = DomainBox::new(2, 8.0, 512)?;
    let cases: [(&str, GridFunction, f64, f64); 5] = [
        ("exp(-x^2), p=2", GridFunction::from_fn(line, |x| (-x[0] * x[0]).exp()), 2.0, (PI / 2.0).powf(0.25)),
        ("x^2 exp(-x^2), p=1", GridFunction::from_fn(line, |x| x[0] * x[0] * (-x[0] * x[0]).exp()), 1.0, PI.sqrt() / 2.0),
        ("sech x, p=2", GridFunction::from_fn(line, |x| 1.0 / x[0].cosh()), 2.0, 2f64.sqrt()),
        ("exp(-|x|^2) 2d, p=3", GridFunction::from_fn(plane, |x| (-x[0] * x[0] - x[1] * x[1]).exp()), 3.0, (PI / 3.0).powf(1.0 / 3.0)),
        ("exp(-x^2), p=1/2", GridFunction::from_fn(line, |x| (-x[0] * x[0]).exp()), 0.5, 2.0 * PI),
    ];
    let mut reduction: f64 = 0.0;
    for (_, f, p, exact) in &cases {
        let norm = luxemburg_norm(f, &ExponentFunction::constant(*p)?, 1e-12)?;
        reduction = reduction.max((norm / exact - 1.0).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = DomainBox::new(1, 2.0, 64)?;
    let mut identity: f64 = 0.0;
    let mut triangle_violations = 0;
    for _ in 0..1000 {
        let p = match rng.gen_range(0..3) {
            0 => ExponentFunction::constant(rng.gen_range(0.2..4.0))?,
            1 => ExponentFunction::asymptotic(rng.gen_range(0.2..3.0), rng.gen_range(0.0..1.5))?,
            _ => ExponentFunction::radial_bump(rng.gen_range(0.3..3.0), rng.gen_range(0.3..3.0), &[0.0], 0.5, 0.5)?,
        };
        let f = GridFunction::new(d, (0..d.len()).map(|_| rng.gen_range(-3.0..3.0)).collect())?;
        let g = GridFunction::new(d, (0..d.len()).map(|_| rng.gen_range(-3.0..3.0)).collect())?;
        let (nf, ng) = (luxemburg_norm(&f, &p, 1e-12)?, luxemburg_norm(&g, &p, 1e-12)?);
        let nfg = luxemburg_norm(&f.axpy(1.0, &g)?, &p, 1e-12)?;
        let pu = p.p_underline();
        if nfg.powf(pu) > (nf.powf(pu) + ng.powf(pu)) * (1.0 + 1e-9) {
            triangle_violations += 1;
        }
        identity = identity.max((modular(&f.scaled(1.0 / nf), &p).value - 1.0).abs());
    }
    let pass = identity <= 1e-6 && reduction <= 1e-6 && triangle_violations == 0;
    Ok((
        pass,
        format!(
            "modular identity residual {identity:.1e}, constant-exponent error {reduction:.1e} on {} functions, {triangle_violations}/1000 triangle violations",
            cases.len()
        ),
    ))
}

fn maximal() -> Result<(bool, String)> {
    let d = DomainBox::new(1, 2.0, 2048)?;
    let x0 = 0.3;
    let sq = FunctionClass::new(GridFunction::from_fn(d, |x| x[0] * x[0]), 1);
    let prm = MaximalParams::new(2.0, 2.0, ScaleGrid::geometric(0.01, 1.5)?)?;
    let r = n_maximal(&sq, &prm, &[x0], &NOptions { restarts: 10, seed: 5, ..NOptions::default() })?;
    let value_err = (r.value - 80f64.powf(-0.5)).abs();
    let coef_err = r
        .run_minimizers
        .iter()
        .map(|p| {
            let c = p.coefficients();
            (c[0] - x0 * x0).abs().max((c[1] - 2.0 * x0).abs())
        })
        .fold(0.0, f64::max);

    let line = DomainBox::new(1, 8.0, 4096)?;
    let chi = GridFunction::from_fn(line, |x| if (0.0..=1.0).contains(&x[0]) { 1.0 } else { 0.0 });
    let hl = hl_maximal(&chi, &[2.0], &ScaleGrid::geometric(0.25, 16.0)?)?.value;
    let hl_err = (hl - 0.25).abs();
    let pass = value_err <= 1e-3 && coef_err <= 1e-3 && r.run_minimizers.len() >= 10 && hl_err <= 1e-3;
    Ok((
        pass,
        format!(
            "N(class x^2)(0.3) = {:.6} (error {value_err:.1e}), minimiser error {coef_err:.1e} over {} starts, M(chi)(2) = {hl:.6}",
            r.value,
            r.run_minimizers.len()
        ),
    ))
}

fn kernel() -> Result<(bool, String)> {
    Ok(status_of(&[verify_lemma14(&ExperimentConfig::default())?]))
}

fn inversion() -> Result<(bool, String)> {
    let atom = |n: usize, points: usize, m: u32| {
        let d = DomainBox::new(n, 1.0, points)?;
        let side = 0.98 * 2.0 / 17.0;
        let p = ExponentFunction::constant(1.0)?;
        make_atom(d, &Cube::new(&vec![0.0; n], side)?, 2.0, 2 * m - 1, &p, 3)
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (n, points) in [(1, 4096), (2, 512)] {
        for m in [1, 2] {
            let spec = KernelSpec::new(m, n)?;
            let coarse = inversion_error(&potential(&atom(n, points / 2, m)?, &spec)?);
            let fine = inversion_error(&potential(&atom(n, points, m)?, &spec)?);
            let order = (coarse / fine).log2();
            pass &= fine <= 0.05 && order >= 1.5;
            parts.push(format!("n={n} m={m}: {:.2}% order {order:.2}", 100.0 * fine));
        }
    }
    Ok((pass, parts.join(", ")))
}

fn far_field_decay() -> Result<(bool, String)> {
    Ok(status_of(&[verify_lemma12(&ExperimentConfig::default())?]))
}

fn domination() -> Result<(bool, String)> {
    Ok(status_of(&[verify_prop15(&ExperimentConfig::default())?]))
}

fn norm_equivalence() -> Result<(bool, String)> {
    let cfg = ExperimentConfig::default();
    Ok(status_of(&[verify_theorem1_pointwise(&cfg)?, verify_norm_equivalence(&cfg)?]))
}

fn critical_exponent() -> Result<(bool, String)> {
    Ok(status_of(&[verify_theorem2(&ExperimentConfig::default())?]))
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Result<(bool, String)> {
    let cfg = ExperimentConfig { seed: 7, ..ExperimentConfig::default() };
    let tmp = tempfile::tempdir()?;
    let mut runs = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut passing = 0;
    for k in 0..2 {
        let dir = tmp.path().join(format!("run{k}"));
        let start = Instant::now();
        let reports = run_suite(&cfg, &dir)?;
        passing = reports.iter().filter(|r| r.status() != Status::Fail).count();
        slowest = slowest.max(start.elapsed());
        runs.push(files(&dir));
    }
    let identical = runs[0] == runs[1];
    let pass = identical && !runs[0].is_empty() && slowest < Duration::from_secs(20 * 60);
    Ok((
        pass,
        format!(
            "{} files {}, {passing} experiments pass or skip at seed 7, suite wall-clock {:.1} s",
            runs[0].len(),
            if identical { "byte-identical" } else { "DIFFER" },
            slowest.as_secs_f64()
        ),
    ))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "Luxemburg/modular", budget: Duration::from_secs(30), run: luxemburg },
        Criterion { id: 2, name: "maximal functions", budget: Duration::from_secs(60), run: maximal },
        Criterion { id: 3, name: "kernel homogeneity", budget: Duration::from_secs(10), run: kernel },
        Criterion { id: 4, name: "potential inversion", budget: Duration::from_secs(180), run: inversion },
        Criterion { id: 5, name: "far-field decay", budget: Duration::from_secs(180), run: far_field_decay },
        Criterion { id: 6, name: "pointwise domination", budget: Duration::from_secs(300), run: domination },
        Criterion { id: 7, name: "Hardy norm equivalence", budget: Duration::from_secs(300), run: norm_equivalence },
        Criterion { id: 8, name: "critical exponent", budget: Duration::from_secs(120), run: critical_exponent },
        Criterion { id: 9, name: "determinism", budget: Duration::from_secs(40 * 60), run: determinism },
    ];
    let mut failed = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let (pass, detail) = match (c.run)() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let ok = pass && in_time;
        println!(
            "criterion {} {:<24} {} {:>6.1}s  {detail}{}",
            c.id,
            c.name,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            if in_time { "" } else { " (over time budget)" }
        );
        if !ok {
            failed.push(c.id);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
