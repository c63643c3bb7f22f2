//! Shared option plumbing: exit-code-typed errors, the config-file merge,
//! demand-model specs, rounding dispatch, and output provenance.

use std::fmt;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use batchsplit::instance::{InstanceError, TourError};
use batchsplit::saa::SaaError;
use batchsplit::scenario::{DemandKind, ScenarioError};
use batchsplit::search::SearchError;
use batchsplit::split::{SplitError, DEFAULT_TILE_ROWS};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("BUILD_VERSION");

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_RESOURCE: u8 = 4;

/// An error carrying the process exit code it should produce:
/// 2 usage, 3 data, 4 resource.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn usage(msg: impl fmt::Display) -> CliError {
    CliError { code: EXIT_USAGE, message: msg.to_string() }
}

pub fn data_err(msg: impl fmt::Display) -> CliError {
    CliError { code: EXIT_DATA, message: msg.to_string() }
}

pub fn resource(msg: impl fmt::Display) -> CliError {
    CliError { code: EXIT_RESOURCE, message: msg.to_string() }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        data_err(e)
    }
}

impl From<InstanceError> for CliError {
    fn from(e: InstanceError) -> Self {
        data_err(e)
    }
}

impl From<TourError> for CliError {
    fn from(e: TourError) -> Self {
        data_err(e)
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        data_err(e)
    }
}

impl From<SplitError> for CliError {
    fn from(e: SplitError) -> Self {
        match e {
            SplitError::Allocation { .. } => resource(e),
            other => data_err(other),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::InvalidConfig(_) => usage(e),
            SearchError::Split(inner) => inner.into(),
            other => data_err(other),
        }
    }
}

impl From<SaaError> for CliError {
    fn from(e: SaaError) -> Self {
        match e {
            SaaError::InvalidParameter(_) => usage(e),
            SaaError::Split(inner) => inner.into(),
            SaaError::Search(inner) => inner.into(),
            other => data_err(other),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        data_err(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        data_err(e)
    }
}

/// Cost arithmetic selector; every command dispatches its generic body on
/// this.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// f64 distances, infeasible = +inf.
    Exact,
    /// Distances rounded half away from zero to i64 units.
    Integer,
}

impl fmt::Display for Rounding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rounding::Exact => "exact",
            Rounding::Integer => "integer",
        })
    }
}

/// Demand model spec, `KIND[:PARAMS]`:
/// `fixed`, `uniform:LO,HI`, `normal:CV`, `common:CV,RHO`.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub raw: String,
    pub kind: DemandKind,
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind_name, params) = match s.split_once(':') {
            Some((k, p)) => (k, Some(p)),
            None => (s, None),
        };
        let floats = |p: Option<&str>, want: usize| -> Result<Vec<f64>, String> {
            let p = p.ok_or_else(|| format!("model {kind_name} needs {want} parameter(s)"))?;
            let vals: Result<Vec<f64>, _> = p.split(',').map(str::trim).map(f64::from_str).collect();
            let vals = vals.map_err(|e| format!("bad model parameter in {p:?}: {e}"))?;
            if vals.len() != want {
                return Err(format!("model {kind_name} needs {want} parameter(s), got {}", vals.len()));
            }
            Ok(vals)
        };
        let kind = match kind_name {
            "fixed" => {
                if params.is_some() {
                    return Err("model fixed takes no parameters".into());
                }
                DemandKind::Fixed
            }
            "uniform" => {
                let v = floats(params, 2)?;
                DemandKind::UniformInteger { lo_frac: v[0], hi_frac: v[1] }
            }
            "normal" => {
                let v = floats(params, 1)?;
                DemandKind::TruncatedNormal { cv: v[0] }
            }
            "common" => {
                let v = floats(params, 2)?;
                DemandKind::CommonFactor { cv: v[0], rho: v[1] }
            }
            other => {
                return Err(format!(
                    "unknown model {other:?}; expected fixed, uniform:LO,HI, normal:CV, or common:CV,RHO"
                ))
            }
        };
        kind.validate().map_err(|e| e.to_string())?;
        Ok(ModelSpec { raw: s.to_string(), kind })
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to built-in defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct CommonOpts {
    /// TOML file supplying defaults for the shared flags; explicit flags win.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 means all available cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Scenario rows per processing tile.
    #[arg(long)]
    pub tile_size: Option<usize>,
    /// Cost arithmetic.
    #[arg(long, value_enum)]
    pub rounding: Option<Rounding>,
    /// Base RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDefaults {
    workers: Option<usize>,
    tile_size: Option<usize>,
    rounding: Option<String>,
    seed: Option<u64>,
    model: Option<String>,
}

/// The shared flags after the flag/config/default merge.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub workers: usize,
    pub tile_size: usize,
    pub rounding: Rounding,
    pub seed: u64,
    #[serde(skip)]
    pub model_default: Option<String>,
}

pub fn resolve(common: &CommonOpts) -> Result<Resolved, CliError> {
    let file = match &common.config {
        None => FileDefaults::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| usage(format!("bad config {}: {e}", path.display())))?
        }
    };
    let rounding = match (common.rounding, &file.rounding) {
        (Some(r), _) => r,
        (None, Some(s)) => Rounding::from_str(s, true)
            .map_err(|_| usage(format!("bad rounding {s:?} in config; expected exact or integer")))?,
        (None, None) => Rounding::Exact,
    };
    let workers_requested = common.workers.or(file.workers).unwrap_or(0);
    let workers = if workers_requested == 0 {
        std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
    } else {
        workers_requested
    };
    let tile_size = common.tile_size.or(file.tile_size).unwrap_or(DEFAULT_TILE_ROWS);
    if tile_size == 0 {
        return Err(usage("--tile-size must be >= 1"));
    }
    Ok(Resolved {
        workers,
        tile_size,
        rounding,
        seed: common.seed.or(file.seed).unwrap_or(0),
        model_default: file.model,
    })
}

/// The demand-model spec for a command: explicit flag, else the config
/// file's `model` key.
pub fn resolve_model(flag: &Option<ModelSpec>, resolved: &Resolved) -> Result<ModelSpec, CliError> {
    match (flag, &resolved.model_default) {
        (Some(m), _) => Ok(m.clone()),
        (None, Some(raw)) => ModelSpec::from_str(raw).map_err(usage),
        (None, None) => Err(usage("missing --model (or a model key in --config)")),
    }
}

/// Runs `f` inside a dedicated thread pool of `workers` threads, so every
/// parallel region in the library is capped by the flag.
pub fn run_in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| resource(format!("cannot build {workers}-thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Version + command + fully resolved config, embedded in every output.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        Provenance {
            version: VERSION.to_string(),
            command: command.to_string(),
            config,
        }
    }

    /// `# key: value` comment lines placed before CSV content.
    pub fn write_csv_preamble<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# version: {}", self.version)?;
        writeln!(w, "# command: {}", self.command)?;
        writeln!(w, "# config: {}", self.config)?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let k = file.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    let mut hex = String::with_capacity(64);
    for byte in hasher.finalize() {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

/// Writes JSON to `--out` or pretty-prints it to stdout.
pub fn emit_json(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => {
            fs::write(path, text + "\n")?;
            eprintln!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

/// Parses a comma-separated ascending list of positive integers.
pub fn parse_grid(s: &str, name: &str) -> Result<Vec<usize>, CliError> {
    let vals: Result<Vec<usize>, _> = s.split(',').map(str::trim).map(usize::from_str).collect();
    let vals = vals.map_err(|e| usage(format!("bad {name} {s:?}: {e}")))?;
    if vals.is_empty() || vals[0] == 0 || !vals.windows(2).all(|w| w[0] < w[1]) {
        return Err(usage(format!(
            "{name} must be a strictly ascending list of positive integers, got {s:?}"
        )));
    }
    Ok(vals)
}
