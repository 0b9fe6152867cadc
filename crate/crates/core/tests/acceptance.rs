//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.
//!
//! `cargo test --test acceptance -- 4 9` runs only the listed criteria.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;

use reflected_wz::cli::ConfigFile;
use reflected_wz::domain::{
    skorohod_halfline, skorohod_interval, skorohod_projected, DomainShape, SampledPath, TimeGrid,
};
use reflected_wz::driver::{
    estimate_statistics, sample_brownian, ApproxDriver, CorrectionMatrix, DriverKind, DriverSpec, Interpolant, Kernel, PathSource,
    StatsSetup,
};
use reflected_wz::experiment::{
    run_convergence_study, verify_prop1, verify_recursion, ConvergenceReport, CorrectionMode, LimitTable,
    StudyConfig, BANDS,
};
use reflected_wz::mc::{derive_seed, MeanEstimate};
use reflected_wz::sde::{integrate_ito_reflected, Preset, SigmaKind};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: usize,
    budget_s: f64,
    run: fn() -> Outcome,
}

fn main() {
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria = [
        Criterion { id: 1, budget_s: 5.0, run: c1_halfline_formula },
        Criterion { id: 2, budget_s: 30.0, run: c2_variation_bound },
        Criterion { id: 3, budget_s: 10.0, run: c3_shift_identity },
        Criterion { id: 4, budget_s: 120.0, run: c4_skew_statistics },
        Criterion { id: 5, budget_s: 180.0, run: c5_recursion },
        Criterion { id: 6, budget_s: 180.0, run: c6_limit_trend },
        Criterion { id: 7, budget_s: 600.0, run: c7_convergence },
        Criterion { id: 8, budget_s: 600.0, run: c8_correction_needed },
        Criterion { id: 9, budget_s: 60.0, run: c9_reflected_bm_mean },
        Criterion { id: 10, budget_s: f64::INFINITY, run: c10_determinism },
    ];
    let mut failed = Vec::new();
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let timing = if c.budget_s.is_finite() {
            let over = if secs > c.budget_s { ", OVER BUDGET" } else { "" };
            format!("{secs:.1}s of {:.0}s{over}", c.budget_s)
        } else {
            format!("{secs:.1}s")
        };
        let (pass, detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        println!("criterion {} {}: {detail} [{timing}]", c.id, if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(c.id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn linear() -> Interpolant {
    Interpolant::named("linear").unwrap()
}

fn quadratic() -> Interpolant {
    Interpolant::named("quadratic").unwrap()
}

fn pl() -> DriverKind {
    DriverKind::piecewise_linear(linear())
}

fn mcshane() -> DriverKind {
    DriverKind::mcshane(linear(), quadratic())
}

fn mollifier() -> DriverKind {
    DriverKind::mollifier(Kernel::bump())
}

fn c1_halfline_formula() -> Outcome {
    let grid = TimeGrid::new(1.0, 4096).map_err(e2s)?;
    let half = DomainShape::half_line(0.0).map_err(e2s)?;
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let w = sample_brownian(grid, 1, derive_seed(1, &[seed])).map_err(e2s)?;
        let exact = skorohod_halfline(w.path(), 0.0).map_err(e2s)?;
        let clamp = skorohod_projected(&half, w.path()).map_err(e2s)?;
        worst = worst
            .max(exact.x.sup_distance(&clamp.x).map_err(e2s)?)
            .max(exact.k.sup_distance(&clamp.k).map_err(e2s)?);
    }
    Ok((worst < 1e-12, format!("max sup gap over 100 paths {worst:.3e} (tolerance 1e-12)")))
}

/// Random bounded-variation path: a walk mixing small jitter with long pushes.
fn random_bv_path<R: Rng>(rng: &mut R, grid: TimeGrid, start: f64, scale: f64) -> SampledPath {
    let steps = Uniform::new(-1.0, 1.0).unwrap();
    let mut v = start;
    let mut drift = 0.0;
    let mut values = Vec::with_capacity(grid.n_nodes());
    values.push(v);
    for _ in 1..grid.n_nodes() {
        if rng.random_bool(0.15) {
            drift = 3.0 * scale * steps.sample(rng);
        }
        v += drift / grid.n_fine() as f64 * 8.0 + scale * 0.3 * steps.sample(rng);
        values.push(v);
    }
    SampledPath::new(grid, 1, values).unwrap()
}

fn c2_variation_bound() -> Outcome {
    let bound = 2.0 * (2f64.sqrt() + 1.0);
    let grid = TimeGrid::new(1.0, 63).map_err(e2s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_ratio: f64 = 0.0;
    let mut pairs = 0usize;
    for case in 0..1000 {
        let (h, pair) = if case % 2 == 0 {
            let origin = Uniform::new(-1.0, 1.0).unwrap().sample(&mut rng);
            let start = origin + rng.random::<f64>();
            let h = random_bv_path(&mut rng, grid, start, 1.0);
            let p = skorohod_halfline(&h, origin).map_err(e2s)?;
            (h, p)
        } else {
            let a = Uniform::new(-1.0, 0.0).unwrap().sample(&mut rng);
            let b = a + Uniform::new(0.05, 2.0).unwrap().sample(&mut rng);
            let start = a + (b - a) * rng.random::<f64>();
            let h = random_bv_path(&mut rng, grid, start, b - a);
            let p = skorohod_interval(&h, a, b).map_err(e2s)?;
            (h, p)
        };
        let tv_h = h.running_total_variation();
        let tv_x = pair.x.running_total_variation();
        for s in 0..grid.n_nodes() {
            for t in s + 1..grid.n_nodes() {
                let dh = tv_h[t] - tv_h[s];
                let dx = tv_x[t] - tv_x[s];
                pairs += 1;
                if dx > bound * dh + 1e-12 {
                    return Ok((false, format!("case {case}: |x| = {dx} exceeds {bound} |h| = {}", bound * dh)));
                }
                if dh > 0.0 {
                    worst_ratio = worst_ratio.max(dx / dh);
                }
            }
        }
    }
    Ok((
        true,
        format!("1000 paths, {pairs} node pairs, largest |x|/|h| = {worst_ratio:.4} (bound {bound:.4})"),
    ))
}

fn c3_shift_identity() -> Outcome {
    let grid = TimeGrid::new(1.0, 1024).map_err(e2s)?;
    let delta = 1.0 / 16.0;
    let m = 64;
    let mut worst: f64 = 0.0;
    let mut checks = 0usize;
    for (kind, r) in [(pl(), 1), (mollifier(), 1), (mcshane(), 2)] {
        let d = ApproxDriver::on_grid(kind, delta, &grid, r).map_err(e2s)?;
        for path in 0..50 {
            let w = sample_brownian(grid, r, derive_seed(3, &[r as u64, path])).map_err(e2s)?;
            for k in 1..=3 {
                let shifted = w.shifted(k * m).map_err(e2s)?;
                for j in 0..shifted.grid().n_nodes() {
                    let t = shifted.grid().time(j);
                    let lhs = d.eval_g(&w, grid.time(j + k * m));
                    let rhs = d.eval_g(&shifted, t);
                    match (lhs, rhs) {
                        (Ok(l), Ok(rv)) => {
                            for i in 0..r {
                                worst = worst.max((l[i] - (rv[i] + w.at(k * m, i))).abs());
                            }
                            checks += 1;
                        }
                        (Err(_), Err(_)) => {}
                        _ => {
                            return Ok((
                                false,
                                format!("{}: G defined on one side only at t = {t}, k = {k}", d.kind().label()),
                            ))
                        }
                    }
                }
            }
        }
    }
    Ok((worst < 1e-12, format!("{checks} evaluations, max gap {worst:.3e} (tolerance 1e-12)")))
}

/// `½∫₀^δ (G¹Ġ² - G²Ġ¹)` of the McShane curve through `(a, b)`, by the shoelace sum over a
/// fine polygon. With the linear and quadratic shapes the curve is `(a u, b u²)` when `ab >= 0`
/// and `(a u², b u)` otherwise.
fn mcshane_area(a: f64, b: f64) -> f64 {
    const POINTS: usize = 4000;
    let curve = |u: f64| if a * b >= 0.0 { (a * u, b * u * u) } else { (a * u * u, b * u) };
    let mut area = 0.0;
    let mut prev = curve(0.0);
    for i in 1..=POINTS {
        let next = curve(i as f64 / POINTS as f64);
        area += prev.0 * next.1 - next.0 * prev.1;
        prev = next;
    }
    0.5 * area
}

fn c4_skew_statistics() -> Outcome {
    const N: usize = 100_000;
    let delta = 2f64.powi(-6);
    let target = 1.0 / (3.0 * PI);
    let mut lines = Vec::new();
    let mut pass = true;

    // brute-force oracle: raw normals, a numerical curve area, nothing from the library
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sd = delta.sqrt();
    let mut identity_gap: f64 = 0.0;
    let samples: Vec<f64> = (0..N)
        .map(|_| {
            let (za, zb): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            let (a, b) = (sd * za, sd * zb);
            let area = mcshane_area(a, b);
            // (1 - 2∫ḟ¹f²)/2 = (1 - 2/3)/2
            identity_gap = identity_gap.max((area - a.abs() * b.abs() / 6.0).abs() / (a.abs() * b.abs()).max(1e-300));
            area / delta
        })
        .collect();
    let oracle = MeanEstimate::from_samples(&samples);
    let oracle_ok = identity_gap < 1e-6 && oracle.within(target, BANDS);
    pass &= oracle_ok;
    lines.push(format!(
        "oracle {:.5} +- {:.1e} vs 1/(3 pi) = {target:.5}, identity gap {identity_gap:.1e}",
        oracle.mean, oracle.stderr
    ));

    for (kind, label, expected) in [(mollifier(), "mollifier", 0.0), (pl(), "piecewise-linear", 0.0), (mcshane(), "mcshane", target)] {
        let est = estimate_statistics(&StatsSetup::new(kind, 2, delta), delta, N, PathSource::Brownian {
            seed: derive_seed(4, &[label.len() as u64]),
        })
        .map_err(e2s)?;
        let s12 = est.s.get(0, 1);
        let ok = s12.within(expected, BANDS);
        pass &= ok;
        lines.push(format!("{label} s12 {:.3e} +- {:.1e} (target {expected:.4})", s12.mean, s12.stderr));
    }
    Ok((pass, lines.join("; ")))
}

fn c5_recursion() -> Outcome {
    let delta = 2f64.powi(-6);
    let mut pass = true;
    let mut lines = Vec::new();
    for (kind, seed) in [(mollifier(), 51), (pl(), 52)] {
        let t = verify_recursion(&kind, 2, delta, 5, 100_000, seed).map_err(e2s)?;
        let worst = t
            .rows
            .iter()
            .flat_map(|row| row.residual.iter().zip(&row.stderr).map(|(v, s)| if *s > 0.0 { v.abs() / s } else { 0.0 }))
            .fold(0.0, f64::max);
        pass &= t.pass;
        lines.push(format!("{} k=2..5 worst |residual|/stderr {worst:.2}", t.driver));
    }
    Ok((pass, lines.join("; ")))
}

fn describe_limit(t: &LimitTable) -> String {
    let rows: Vec<String> = t
        .rows
        .iter()
        .map(|r| format!("d=2^{} k={} {:.2e}+-{:.1e}", r.delta.log2(), r.k, r.deviation, r.stderr))
        .collect();
    format!("{} [{}]", t.driver, rows.join(", "))
}

fn c6_limit_trend() -> Outcome {
    let deltas = [2f64.powi(-4), 2f64.powi(-6), 2f64.powi(-8)];
    let q = 1.0 / 6.0;
    let src = PathSource::Brownian { seed: 6 };
    let tables = [
        verify_prop1(&pl(), 1, &deltas, q, 100_000, src).map_err(e2s)?,
        verify_prop1(&mcshane(), 2, &deltas, q, 100_000, src).map_err(e2s)?,
    ];
    let pass = tables.iter().all(|t| t.pass);
    let consistent = tables.iter().all(|t| t.rows.iter().all(|r| r.deviation <= BANDS * r.stderr));
    let informational = verify_prop1(&mollifier(), 1, &deltas, q, 100_000, src).map_err(e2s)?;
    println!(
        "  info: deviations of the tested drivers within {BANDS} stderr of 0 at every mesh: {consistent}; {}",
        describe_limit(&informational)
    );
    let detail: Vec<String> = tables.iter().map(describe_limit).collect();
    Ok((pass, detail.join("; ")))
}

fn bundled_config() -> Result<StudyConfig, String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/wz-interval.toml");
    ConfigFile::load(&path).map_err(e2s)?.study_config().map_err(e2s)
}

/// The bundled study with the given driver; McShane needs two noise components.
fn study_for(driver: DriverSpec, correction: CorrectionMode) -> Result<StudyConfig, String> {
    let mut cfg = bundled_config()?;
    if matches!(driver, DriverSpec::Mcshane { .. }) {
        cfg.coefficients.r = 2;
    }
    cfg.driver = driver;
    cfg.study.correction = correction;
    Ok(cfg)
}

fn drivers() -> [(&'static str, DriverSpec); 3] {
    [
        ("piecewise-linear", DriverSpec::piecewise_linear()),
        ("mollifier", DriverSpec::mollifier()),
        ("mcshane", DriverSpec::mcshane()),
    ]
}

fn last_row(report: &ConvergenceReport) -> (f64, f64) {
    let rows = report.rows_for(2.0);
    let r = rows[rows.len() - 1];
    (r.error, r.stderr)
}

fn c7_convergence() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for (label, spec) in drivers() {
        let report = run_convergence_study(&study_for(spec, CorrectionMode::Limit)?).map_err(e2s)?;
        let rows = report.rows_for(2.0);
        let monotone = rows
            .windows(2)
            .all(|w| w[1].error - w[0].error <= 2.0 * w[0].stderr.hypot(w[1].stderr));
        let (first, last) = (rows[0].error, rows[rows.len() - 1].error);
        let slope = report.slope_for(2.0).map(|f| f.slope).unwrap_or(f64::NAN);
        let ok = monotone && last < 0.25 * first && slope > 0.2;
        pass &= ok;
        lines.push(format!(
            "{label} errors {first:.3e} -> {last:.3e}, monotone {monotone}, slope {slope:.2}"
        ));
        store_report(label, "limit", &report);
    }
    Ok((pass, lines.join("; ")))
}

fn c8_correction_needed() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for (label, spec) in drivers() {
        let corrected = match load_report(label, "limit") {
            Some(r) => r,
            None => run_convergence_study(&study_for(spec.clone(), CorrectionMode::Limit)?).map_err(e2s)?,
        };
        let zero = run_convergence_study(&study_for(spec, CorrectionMode::Zero)?).map_err(e2s)?;
        let (ec, sc) = last_row(&corrected);
        let (ez, sz) = last_row(&zero);
        let gap = (ez - ec) / sc.hypot(sz);
        let ok = gap > BANDS;
        pass &= ok;
        lines.push(format!("{label} c=0 {ez:.3e} vs corrected {ec:.3e} ({gap:.1} stderr)"));
    }
    Ok((pass, lines.join("; ")))
}

// Criterion 8 reuses the corrected studies of criterion 7 when both run in one process.
static REPORTS: std::sync::Mutex<Vec<(String, ConvergenceReport)>> = std::sync::Mutex::new(Vec::new());

fn store_report(label: &str, mode: &str, report: &ConvergenceReport) {
    REPORTS.lock().unwrap().push((format!("{label}/{mode}"), report.clone()));
}

fn load_report(label: &str, mode: &str) -> Option<ConvergenceReport> {
    let key = format!("{label}/{mode}");
    REPORTS.lock().unwrap().iter().find(|(k, _)| *k == key).map(|(_, r)| r.clone())
}

fn c9_reflected_bm_mean() -> Outcome {
    const N: usize = 100_000;
    const STEPS: usize = 16_384;
    let target = (2.0 / PI).sqrt();

    // the oracle: E[X(1)] = E|W(1)| for reflected Brownian motion started at the wall
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let abs_w: Vec<f64> = (0..N)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z.abs()
        })
        .collect();
    let oracle = MeanEstimate::from_samples(&abs_w);
    if !oracle.within(target, BANDS) {
        return Ok((false, format!("E|W(1)| = {:.5} +- {:.1e} misses sqrt(2/pi)", oracle.mean, oracle.stderr)));
    }

    let grid = TimeGrid::new(1.0, STEPS).map_err(e2s)?;
    let half = DomainShape::half_line(0.0).map_err(e2s)?;
    let bm = Preset::new(SigmaKind::Additive { value: 1.0 }, 1, 1, 0.0, 0.0).map_err(e2s)?;
    let c = CorrectionMatrix::symmetric(1);
    let ends: Vec<f64> = (0..N as u64)
        .into_par_iter()
        .map(|i| {
            let w = sample_brownian(grid, 1, derive_seed(9, &[i]))?;
            Ok(integrate_ito_reflected(&bm, &half, &w, &c, &[0.0])?.x.at(STEPS, 0))
        })
        .collect::<reflected_wz::Result<_>>()
        .map_err(e2s)?;
    let est = MeanEstimate::from_samples(&ends);
    Ok((
        est.within(target, BANDS),
        format!(
            "oracle E|W(1)| {:.5} +- {:.1e}; E[X(1)] {:.5} +- {:.1e} vs sqrt(2/pi) = {target:.5} ({:.2} stderr, {STEPS} steps)",
            oracle.mean,
            oracle.stderr,
            est.mean,
            est.stderr,
            (est.mean - target) / est.stderr
        ),
    ))
}

fn rwz(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rwz")).args(args).output().map_err(e2s)?;
    if !out.status.success() {
        return Err(format!("rwz {args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn dir_contents(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(e2s)?
        .map(|e| e.map(|e| e.path()).map_err(e2s))
        .collect::<Result<_, _>>()?;
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let bytes = fs::read(&p).map_err(e2s)?;
            Ok((p.file_name().unwrap().into(), bytes))
        })
        .collect()
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e2s)?;
    let root = tmp.path();

    let grid = TimeGrid::new(1.0, 512).map_err(e2s)?;
    let w = sample_brownian(grid, 1, 10).map_err(e2s)?;
    let mut csv = String::from("t,h\n");
    for k in 0..grid.n_nodes() {
        csv.push_str(&format!("{:?},{:?}\n", grid.time(k), w.at(k, 0)));
    }
    let input = root.join("h.csv");
    fs::write(&input, csv).map_err(e2s)?;

    let mut cfg = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/wz-interval.toml"))
        .map_err(e2s)?;
    cfg = cfg
        .replace("n_paths = 2000", "n_paths = 64")
        .replace("n_fine_ref = 8192", "n_fine_ref = 1024\ncorrection_samples = 200")
        .replace(
            "delta_schedule = [0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125]",
            "delta_schedule = [0.0625, 0.03125, 0.015625, 0.0078125]",
        )
        .replace("n_samples = 10000", "n_samples = 2000");
    let config = root.join("small.toml");
    fs::write(&config, cfg).map_err(e2s)?;
    let config = config.to_str().unwrap();
    let input = input.to_str().unwrap();

    let mut compared = 0;
    let commands: [(&str, Vec<&str>); 6] = [
        ("skorohod csv", vec!["skorohod", "--input", input, "--domain", "interval:-0.5,0.5"]),
        ("skorohod json", vec!["skorohod", "--input", input, "--domain", "half-line", "--format", "json"]),
        ("stats", vec!["--config", config, "stats"]),
        ("stats mcshane csv", vec!["stats", "--driver", "mcshane", "--n", "3000", "--seed", "5", "--format", "csv"]),
        ("simulate", vec!["--config", config, "simulate"]),
        ("simulate json", vec!["--config", config, "simulate", "--format", "json", "--seed", "3"]),
    ];
    for (label, args) in &commands {
        let mut outputs = Vec::new();
        for threads in ["1", "4", "auto", "1"] {
            let mut a = args.clone();
            a.extend(["--threads", threads]);
            outputs.push(rwz(&a)?);
        }
        if outputs.iter().any(|o| o != &outputs[0]) {
            return Ok((false, format!("{label}: output depends on the thread count or the run")));
        }
        compared += 1;
    }
    let mut reports = Vec::new();
    for threads in ["1", "4", "auto", "1"] {
        let dir = root.join(format!("converge-{threads}-{}", reports.len()));
        fs::create_dir(&dir).map_err(e2s)?;
        let stdout = rwz(&["--config", config, "converge", "--threads", threads, "--out", dir.to_str().unwrap()])?;
        reports.push((stdout, dir_contents(&dir)?));
    }
    if reports.iter().any(|r| r != &reports[0]) {
        return Ok((false, "converge: report files depend on the thread count or the run".into()));
    }
    let files = reports[0].1.len();
    Ok((
        files == 2,
        format!("{} commands plus converge ({files} files) byte-identical across threads 1, 4, auto and a rerun", compared),
    ))
}
