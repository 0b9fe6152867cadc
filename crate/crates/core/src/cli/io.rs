use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::domain::{SampledPath, TimeGrid};
use crate::error::Error;

/// Exit codes of the `rwz` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 2;
    pub const DOMAIN: i32 = 3;
    pub const CONFIG: i32 = 4;
    pub const NUMERIC: i32 = 5;
}

/// Why a command failed, carrying its exit code.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or unwritable file, or malformed input data.
    Io(String),
    /// Config could not be parsed or names something unknown.
    Config(String),
    Core(Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Self::Io(_) => exit::IO,
            Self::Config(_) => exit::CONFIG,
            Self::Core(e) if e.is_domain_error() => exit::DOMAIN,
            Self::Core(e) if e.is_numeric_failure() => exit::NUMERIC,
            Self::Core(_) => exit::CONFIG,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io(m) => write!(f, "i/o error: {m}"),
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}

pub fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// Writes to `out`, or to standard output when no path is given.
pub fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

/// Serializes a numeric table. Values use the shortest decimal (exponent form when very small or
/// large) that parses back to the same `f64`.
pub fn csv_table(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<Vec<u8>, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io)?;
    }
    w.into_inner().map_err(|e| Failure::Io(e.to_string()))
}

pub fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Reads a path table `t,v1,...,vd` on a uniform grid starting at 0. A non-numeric first
/// row is taken as a header.
pub fn read_path_csv(path: &Path) -> Result<SampledPath, Failure> {
    let text = read_text(path)?;
    let bad = |m: String| Failure::Io(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut dim = None;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let nums = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(bad(format!("row {}: {e}", line + 1))),
        };
        if nums.len() < 2 {
            return Err(bad(format!("row {} needs a time and at least one value", line + 1)));
        }
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("row {} holds a non-finite value", line + 1)));
        }
        match dim {
            None => dim = Some(nums.len() - 1),
            Some(d) if d != nums.len() - 1 => {
                return Err(bad(format!("row {} has {} values, expected {d}", line + 1, nums.len() - 1)))
            }
            _ => {}
        }
        times.push(nums[0]);
        values.extend_from_slice(&nums[1..]);
    }
    let Some(dim) = dim else {
        return Err(bad("no data rows".into()));
    };
    if times.len() < 2 {
        return Err(bad("a path needs at least two nodes".into()));
    }
    let n = times.len() - 1;
    let horizon = times[n];
    if times[0] != 0.0 || !(horizon > 0.0) {
        return Err(bad("times must start at 0 and increase".into()));
    }
    let grid = TimeGrid::new(horizon, n).map_err(|e| bad(e.to_string()))?;
    for (k, &t) in times.iter().enumerate() {
        if (t - grid.time(k)).abs() > 1e-9 * horizon {
            return Err(bad(format!("time {t} at row {k} is off the uniform grid")));
        }
    }
    SampledPath::new(grid, dim, values).map_err(|e| bad(e.to_string()))
}
