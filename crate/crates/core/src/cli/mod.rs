//! The `rwz` command line: `skorohod`, `stats`, `simulate` and `converge`.
//!
//! Exit codes: 0 success, 2 i/o or malformed input, 3 domain violation,
//! 4 invalid config or arguments, 5 numerical failure.

mod io;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use io::{exit, read_path_csv, Failure};
use io::{csv_table, json_bytes, read_text, write_output};

use crate::domain::{skorohod_halfline, skorohod_interval, skorohod_projected, DomainShape, DomainSpec, TimeGrid};
use crate::driver::{
    estimate_statistics, limit_correction, sample_brownian, ApproxDriver, CorrectionMatrix, DriverSpec,
    MatrixEstimate, PathSource, StatsSetup, DEFAULT_SUBSTEPS,
};
use crate::error::Error;
use crate::experiment::{run_convergence_study, verify_recursion, ConvergenceReport, CorrectionMode, RecursionTable, StudyConfig, StudyParams};
use crate::sde::{integrate_driven_reflected, integrate_ito_reflected, CoefficientSpec};

#[derive(Debug, Parser)]
#[command(name = "rwz", version, about = "Reflected SDEs driven by smooth approximations of Brownian motion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML file with [domain], [driver], [coefficients], [study], [stats] and [simulate] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, or "auto" for one per core.
    #[arg(long, global = true, default_value = "auto", value_parser = parse_threads)]
    pub threads: usize,
    /// Output file; the output directory for `converge`. Standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reflect a sampled path `t,h1,...,hd` and write `t,x...,k...,k_tv`.
    Skorohod {
        #[arg(long)]
        input: PathBuf,
        /// `half-line[:origin]` or `interval:a,b`; otherwise the [domain] section is used.
        #[arg(long)]
        domain: Option<String>,
    },
    /// Monte Carlo estimates of the driver statistics s, c and c*.
    Stats {
        /// `piecewise-linear`, `mollifier` or `mcshane` with default shapes; otherwise [driver].
        #[arg(long)]
        driver: Option<String>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        t: Option<f64>,
        /// Number of Monte Carlo samples.
        #[arg(long)]
        n: Option<usize>,
        /// Noise dimension.
        #[arg(long)]
        r: Option<usize>,
    },
    /// One coupled pair: the Itô reference and the driven solution on a shared path.
    Simulate,
    /// Convergence study; writes `<name>-<hash>.csv` and `.json` and prints the slopes.
    Converge,
}

fn parse_threads(s: &str) -> Result<usize, String> {
    if s == "auto" {
        return Ok(0);
    }
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected a positive integer or \"auto\", got {s:?}")),
    }
}

fn default_stats_delta() -> f64 {
    1.0 / 64.0
}

fn default_stats_samples() -> usize {
    10_000
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

fn default_k_max() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsParams {
    #[serde(default = "default_stats_delta")]
    pub delta: f64,
    /// Defaults to `delta`.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "default_stats_samples")]
    pub n_samples: usize,
    /// Defaults to 2 so the skew part is visible.
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    /// Recursion residuals are reported for `k = 2..=k_max`; below 2 skips them.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for StatsParams {
    fn default() -> Self {
        Self {
            delta: default_stats_delta(),
            t: None,
            n_samples: default_stats_samples(),
            r: None,
            substeps: default_substeps(),
            k_max: default_k_max(),
            seed: 0,
        }
    }
}

fn default_horizon() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub n_fine: usize,
    pub delta: f64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub correction: CorrectionMode,
    #[serde(default)]
    pub seed: u64,
}

/// Contents of a `--config` file. Every section is optional; each verb checks for what it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub domain: Option<DomainSpec>,
    pub coefficients: Option<CoefficientSpec>,
    pub driver: Option<DriverSpec>,
    pub study: Option<StudyParams>,
    pub stats: Option<StatsParams>,
    pub simulate: Option<SimulateParams>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = read_text(path)?;
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }

    fn section<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T, Failure> {
        value
            .as_ref()
            .ok_or_else(|| Failure::Config(format!("the config has no [{name}] section")))
    }

    /// The study described by this file, failing if a section is missing.
    pub fn study_config(&self) -> Result<StudyConfig, Failure> {
        Ok(StudyConfig {
            domain: Self::section(&self.domain, "domain")?.clone(),
            coefficients: Self::section(&self.coefficients, "coefficients")?.clone(),
            driver: Self::section(&self.driver, "driver")?.clone(),
            study: Self::section(&self.study, "study")?.clone(),
        })
    }
}

/// Parses the arguments, runs the verb and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::IO } else { exit::OK };
        }
    };
    match execute(&cli) {
        Ok(()) => exit::OK,
        Err(f) => {
            eprintln!("rwz: {f}");
            f.code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Failure::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Skorohod { input, domain } => cmd_skorohod(cli, &config, input, domain.as_deref()),
        Command::Stats { driver, delta, t, n, r } => {
            let mut params = config.stats.clone().unwrap_or_default();
            if let Some(v) = delta {
                params.delta = *v;
            }
            if let Some(v) = t {
                params.t = Some(*v);
            }
            if let Some(v) = n {
                params.n_samples = *v;
            }
            if let Some(v) = r {
                params.r = Some(*v);
            }
            if let Some(v) = cli.seed {
                params.seed = v;
            }
            let spec = match driver.as_deref() {
                Some(name) => named_driver(name)?,
                None => config.driver.clone().unwrap_or_else(DriverSpec::mollifier),
            };
            cmd_stats(cli, &spec, &params)
        }
        Command::Simulate => cmd_simulate(cli, &config),
        Command::Converge => cmd_converge(cli, &config),
    })
}

fn named_driver(name: &str) -> Result<DriverSpec, Failure> {
    match name {
        "piecewise-linear" => Ok(DriverSpec::piecewise_linear()),
        "mollifier" => Ok(DriverSpec::mollifier()),
        "mcshane" => Ok(DriverSpec::mcshane()),
        other => Err(Failure::Config(format!(
            "unknown driver \"{other}\" (known: piecewise-linear, mollifier, mcshane)"
        ))),
    }
}

fn parse_domain_flag(s: &str) -> Result<DomainSpec, Failure> {
    let (kind, args) = s.split_once(':').unwrap_or((s, ""));
    let nums: Result<Vec<f64>, _> = args
        .split(',')
        .filter(|a| !a.trim().is_empty())
        .map(|a| a.trim().parse::<f64>())
        .collect();
    let nums = nums.map_err(|e| Failure::Config(format!("domain {s:?}: {e}")))?;
    match (kind, nums.as_slice()) {
        ("half-line", []) => Ok(DomainSpec::HalfLine { origin: 0.0 }),
        ("half-line", [o]) => Ok(DomainSpec::HalfLine { origin: *o }),
        ("interval", [a, b]) => Ok(DomainSpec::Interval { a: *a, b: *b }),
        _ => Err(Failure::Config(format!(
            "cannot read domain {s:?}; use half-line[:origin] or interval:a,b"
        ))),
    }
}

fn cmd_skorohod(cli: &Cli, config: &ConfigFile, input: &Path, domain: Option<&str>) -> Result<(), Failure> {
    let spec = match domain {
        Some(s) => parse_domain_flag(s)?,
        None => ConfigFile::section(&config.domain, "domain")?.clone(),
    };
    let shape = spec.build()?;
    let h = read_path_csv(input)?;
    if h.dim() != shape.dim() {
        return Err(Error::DimensionMismatch(format!(
            "path has {} components, domain dimension is {}",
            h.dim(),
            shape.dim()
        ))
        .into());
    }
    let pair = match &shape {
        DomainShape::HalfLine { origin } => skorohod_halfline(&h, *origin)?,
        DomainShape::Interval { a, b } => skorohod_interval(&h, *a, *b)?,
        other => skorohod_projected(other, &h)?,
    };
    let grid = *h.grid();
    let d = h.dim();
    let bytes = match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut header = vec!["t".to_string()];
            header.extend((1..=d).map(|i| format!("x{i}")));
            header.extend((1..=d).map(|i| format!("k{i}")));
            header.push("k_tv".to_string());
            csv_table(
                &header,
                (0..grid.n_nodes()).map(|j| {
                    let mut row = vec![grid.time(j)];
                    row.extend_from_slice(pair.x.node(j));
                    row.extend_from_slice(pair.k.node(j));
                    row.push(pair.k_tv[j]);
                    row
                }),
            )?
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                t: Vec<f64>,
                x: Vec<&'a [f64]>,
                k: Vec<&'a [f64]>,
                k_tv: &'a [f64],
            }
            json_bytes(&Out {
                t: (0..grid.n_nodes()).map(|j| grid.time(j)).collect(),
                x: (0..grid.n_nodes()).map(|j| pair.x.node(j)).collect(),
                k: (0..grid.n_nodes()).map(|j| pair.k.node(j)).collect(),
                k_tv: &pair.k_tv,
            })?
        }
    };
    write_output(cli.out.as_deref(), &bytes)
}

#[derive(Debug, Serialize)]
struct StatsOutput {
    driver: DriverSpec,
    r: usize,
    delta: f64,
    t: f64,
    n_samples: usize,
    substeps: usize,
    seed: u64,
    s: MatrixEstimate,
    c: MatrixEstimate,
    c_star: MatrixEstimate,
    limit: CorrectionMatrix,
    recursion: Option<RecursionTable>,
}

fn cmd_stats(cli: &Cli, spec: &DriverSpec, params: &StatsParams) -> Result<(), Failure> {
    let kind = spec.build()?;
    let r = params.r.or(kind.required_r()).unwrap_or(2);
    let setup = StatsSetup::new(kind.clone(), r, params.delta).with_substeps(params.substeps);
    let t = params.t.unwrap_or(params.delta);
    let limit = limit_correction(&kind, r)?;
    let est = estimate_statistics(&setup, t, params.n_samples, PathSource::Brownian { seed: params.seed })?;
    let recursion = if params.k_max >= 2 {
        let seed = crate::mc::derive_seed(params.seed, &[1]);
        Some(verify_recursion(&kind, r, params.delta, params.k_max, params.n_samples, seed)?)
    } else {
        None
    };
    let out = StatsOutput {
        driver: spec.clone(),
        r,
        delta: params.delta,
        t: est.t,
        n_samples: params.n_samples,
        substeps: params.substeps,
        seed: params.seed,
        s: est.s,
        c: est.c,
        c_star: est.c_star,
        limit,
        recursion,
    };
    let bytes = match cli.format.unwrap_or(Format::Json) {
        Format::Json => json_bytes(&out)?,
        Format::Csv => {
            let header: Vec<String> = ["statistic", "i", "j", "mean", "stderr"].map(String::from).to_vec();
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Failure::Io(e.to_string());
            w.write_record(&header).map_err(io)?;
            for (name, m) in [("s", &out.s), ("c", &out.c), ("c_star", &out.c_star)] {
                for i in 0..r {
                    for j in 0..r {
                        let e = m.get(i, j);
                        w.write_record([
                            name.to_string(),
                            (i + 1).to_string(),
                            (j + 1).to_string(),
                            format!("{:?}", e.mean),
                            format!("{:?}", e.stderr),
                        ])
                        .map_err(io)?;
                    }
                }
            }
            w.into_inner().map_err(|e| Failure::Io(e.to_string()))?
        }
    };
    write_output(cli.out.as_deref(), &bytes)
}

fn cmd_simulate(cli: &Cli, config: &ConfigFile) -> Result<(), Failure> {
    let params = ConfigFile::section(&config.simulate, "simulate")?;
    let domain = ConfigFile::section(&config.domain, "domain")?.build()?;
    let coeffs = ConfigFile::section(&config.coefficients, "coefficients")?.build()?;
    let kind = ConfigFile::section(&config.driver, "driver")?.build()?;
    let seed = cli.seed.unwrap_or(params.seed);
    let windows = params.horizon / params.delta;
    if !(params.delta > 0.0) || (windows - windows.round()).abs() > 1e-9 * windows.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "delta = {} does not divide T = {}",
            params.delta, params.horizon
        ))
        .into());
    }
    let grid = TimeGrid::new(params.horizon, params.n_fine).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let driver = ApproxDriver::on_grid(kind.clone(), params.delta, &grid, coeffs.r)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let correction = match params.correction {
        CorrectionMode::Limit => limit_correction(&kind, coeffs.r)?,
        CorrectionMode::Zero => CorrectionMatrix::zero(coeffs.r),
    };
    let w = sample_brownian(grid, coeffs.r, seed)?;
    let reference = integrate_ito_reflected(&coeffs, &domain, &w, &correction, &params.x0)?;
    let driven = integrate_driven_reflected(&coeffs, &domain, &driver, &w, &params.x0)?;
    let d = coeffs.d;
    let bytes = match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut header = vec!["t".to_string()];
            header.extend((1..=d).map(|i| format!("x{i}")));
            header.extend((1..=d).map(|i| format!("xdelta{i}")));
            header.push("k_tv".to_string());
            header.push("kdelta_tv".to_string());
            csv_table(
                &header,
                (0..grid.n_nodes()).map(|j| {
                    let mut row = vec![grid.time(j)];
                    row.extend_from_slice(reference.x.node(j));
                    row.extend_from_slice(driven.x.node(j));
                    row.push(reference.k_tv[j]);
                    row.push(driven.k_tv[j]);
                    row
                }),
            )?
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                seed: u64,
                t: Vec<f64>,
                x: &'a [f64],
                xdelta: &'a [f64],
                k_tv: &'a [f64],
                kdelta_tv: &'a [f64],
            }
            json_bytes(&Out {
                seed,
                t: (0..grid.n_nodes()).map(|j| grid.time(j)).collect(),
                x: reference.x.values(),
                xdelta: driven.x.values(),
                k_tv: &reference.k_tv,
                kdelta_tv: &driven.k_tv,
            })?
        }
    };
    write_output(cli.out.as_deref(), &bytes)
}

/// First 12 hex digits of the SHA-256 of the compact JSON form of `cfg`.
pub fn config_hash(cfg: &StudyConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("study configs always serialize");
    hex::encode(Sha256::digest(&bytes))[..12].to_string()
}

pub fn report_csv(report: &ConvergenceReport) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Io(e.to_string());
    w.write_record(["delta", "n_delta", "p", "error", "stderr", "n_paths"]).map_err(io)?;
    for r in &report.rows {
        w.write_record([
            format!("{:?}", r.delta),
            r.n_delta.to_string(),
            format!("{:?}", r.p),
            format!("{:?}", r.error),
            format!("{:?}", r.stderr),
            r.n_paths.to_string(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Failure::Io(e.to_string()))
}

fn slope_table(report: &ConvergenceReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>10} {:>4} {:>12} {:>12}", "delta", "p", "error", "stderr");
    for r in &report.rows {
        let _ = writeln!(s, "{:>10.6} {:>4} {:>12.5e} {:>12.3e}", r.delta, r.p, r.error, r.stderr);
    }
    let _ = writeln!(s, "\n{:>4} {:>8} {:>8} {:>20}", "p", "slope", "stderr", "95% interval");
    for row in &report.slopes {
        let f = row.fit;
        let _ = writeln!(
            s,
            "{:>4} {:>8.4} {:>8.4} {:>9.4} .. {:<8.4}",
            row.p, f.slope, f.slope_stderr, f.ci_low, f.ci_high
        );
    }
    s
}

fn cmd_converge(cli: &Cli, config: &ConfigFile) -> Result<(), Failure> {
    if cli.config.is_none() {
        return Err(Failure::Config("converge needs --config".into()));
    }
    let mut cfg = config.study_config()?;
    if let Some(seed) = cli.seed {
        cfg.study.base_seed = seed;
    }
    cfg.validate()?;
    let report = run_convergence_study(&cfg)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    let stem = format!("{}-{}", cfg.study.name, config_hash(&cfg));
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_output(Some(&csv_path), &report_csv(&report)?)?;
    write_output(Some(&json_path), &json_bytes(&report)?)?;
    print!("{}", slope_table(&report));
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}
