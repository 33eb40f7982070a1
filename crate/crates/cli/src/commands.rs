use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use causal_core::algo_icm::{second_law_run, BitState, Compressor, ReversibleRule};
use causal_core::cause_effect::{self, AnmConfig, BatchConfig, IgciConfig, Method, PairCase};
use causal_core::exec::Execution;
use causal_core::half_sibling::{self, HsrConfig, PanelSpec};
use causal_core::scm::{Intervention, Scm, DEFAULT_CI_TOLERANCE};
use causal_core::ssl_bench::{self, SslConfig};
use causal_core::stats;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cli::{Cli, Command, MethodArg};
use crate::error::{CliError, ErrorCode, Result};
use crate::pairs::{parse_metadata, read_pair_file};
use crate::report::Report;
use crate::spec::{json_error, parse_spec_file};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub n: usize,
    pub interventions: Vec<Intervention>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { n: 1000, interventions: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsepConfig {
    pub x: Vec<String>,
    pub y: Vec<String>,
    pub given: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkovConfig {
    pub tolerance: f64,
}

impl Default for MarkovConfig {
    fn default() -> Self {
        Self { tolerance: DEFAULT_CI_TOLERANCE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverConfig {
    pub method: Method,
    pub anm: AnmConfig,
    pub igci: IgciConfig,
}

impl Default for DiscoverConfig {
    fn default() -> Self {
        Self { method: Method::Anm, anm: AnmConfig::default(), igci: IgciConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HsrCommandConfig {
    pub panel: PanelSpec,
    pub hsr: HsrConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecondLawConfig {
    pub n_bits: usize,
    /// First bit of the initial block of ones.
    pub ones_start: usize,
    pub ones_len: usize,
    pub steps: usize,
    pub block_bits: u32,
    pub level: u32,
}

impl Default for SecondLawConfig {
    fn default() -> Self {
        Self { n_bits: 4096, ones_start: 1792, ones_len: 512, steps: 200, block_bits: 8, level: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SslCommandConfig {
    pub ssl: SslConfig,
    pub n_seeds: usize,
}

impl Default for SslCommandConfig {
    fn default() -> Self {
        Self { ssl: SslConfig::default(), n_seeds: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TargetRecovery {
    target: usize,
    mse: f64,
    correlation: f64,
    raw_correlation: f64,
    r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct HsrReport {
    mean_sibling_correlation: f64,
    targets: Vec<TargetRecovery>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => serde_json::from_str(&read_text(p)?)
            .map_err(|e| {
                let e = json_error(e);
                CliError::new(e.code, format!("{}: {}", p.display(), e.message))
            }),
    }
}

fn load_scm(path: &Path) -> Result<(Scm, Option<u64>)> {
    let tag = |e: CliError| CliError::new(e.code, format!("{}: {}", path.display(), e.message));
    let file = parse_spec_file(&read_text(path)?).map_err(tag)?;
    let scm = Scm::new(file.nodes).map_err(|e| tag(e.into()))?;
    Ok((scm, file.seed))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(|e| CliError::new(ErrorCode::Io, format!("stdout: {e}")))
        }
    }
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// Parses `NAME=VALUE` into a hard intervention.
pub fn parse_do(arg: &str) -> Result<Intervention> {
    let (name, value) = arg
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("--do expects NAME=VALUE, got `{arg}`")))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("--do {arg}: `{value}` is not a number")))?;
    Ok(Intervention::set_constant(name.trim(), value))
}

fn method_of(arg: Option<MethodArg>, default: Method) -> Method {
    match arg {
        Some(MethodArg::Anm) => Method::Anm,
        Some(MethodArg::Igci) => Method::Igci,
        None => default,
    }
}

fn pair_path(dir: &Path, id: &str) -> Option<PathBuf> {
    [format!("{id}.txt"), format!("pair{id}.txt")].into_iter().map(|f| dir.join(f)).find(|p| p.is_file())
}

/// Parses `args` (program name first) and runs the command; argument
/// errors become usage errors.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::Parser;
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::usage(e.to_string().trim_end()))?;
    run(&cli)
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = cli.config.as_deref();
    let out = cli.out.as_deref();
    let execution = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    match &cli.command {
        Command::Simulate { spec, n } => {
            let mut cfg: SampleConfig = load_config(config)?;
            if !cfg.interventions.is_empty() {
                return Err(CliError::usage("simulate takes no interventions; use `intervene`"));
            }
            cfg.n = n.unwrap_or(cfg.n);
            let (scm, file_seed) = load_scm(spec)?;
            let seed = cli.seed.or(file_seed).unwrap_or(0);
            let data = scm.sample_with(cfg.n, seed, execution);
            emit(out, &csv_bytes(|b| data.write_csv(b)))
        }
        Command::Intervene { spec, n, set, interventions } => {
            let mut cfg: SampleConfig = load_config(config)?;
            cfg.n = n.unwrap_or(cfg.n);
            if let Some(p) = interventions {
                let list: Vec<Intervention> = serde_json::from_str(&read_text(p)?).map_err(json_error)?;
                cfg.interventions.extend(list);
            }
            for s in set {
                cfg.interventions.push(parse_do(s)?);
            }
            if cfg.interventions.is_empty() {
                return Err(CliError::usage("intervene needs at least one --do or --interventions"));
            }
            let (mut scm, file_seed) = load_scm(spec)?;
            for iv in &cfg.interventions {
                scm = scm.intervene(iv)?;
            }
            let seed = cli.seed.or(file_seed).unwrap_or(0);
            let data = scm.sample_with(cfg.n, seed, execution);
            emit(out, &csv_bytes(|b| data.write_csv(b)))
        }
        Command::Dsep { spec, x, y, given } => {
            let mut cfg: DsepConfig = load_config(config)?;
            for (flag, field) in [(x, &mut cfg.x), (y, &mut cfg.y), (given, &mut cfg.given)] {
                if !flag.is_empty() {
                    *field = flag.clone();
                }
            }
            if cfg.x.is_empty() || cfg.y.is_empty() {
                return Err(CliError::usage("dsep needs non-empty --x and --y"));
            }
            let (scm, file_seed) = load_scm(spec)?;
            let separated = scm
                .graph()
                .d_separated(&cfg.x, &cfg.y, &cfg.given)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let seed = cli.seed.or(file_seed).unwrap_or(0);
            let report = Report::new("dsep", &cfg, seed, &serde_json::json!({ "d_separated": separated }))?;
            emit(out, &report.to_bytes())
        }
        Command::Markov { spec, tolerance } => {
            let mut cfg: MarkovConfig = load_config(config)?;
            cfg.tolerance = tolerance.unwrap_or(cfg.tolerance);
            if !(cfg.tolerance >= 0.0) {
                return Err(CliError::usage("tolerance must be non-negative"));
            }
            let (scm, file_seed) = load_scm(spec)?;
            let checks = scm.verify_markov_with(cfg.tolerance)?;
            let max_deviation = checks.iter().map(|c| c.deviation).fold(0.0, f64::max);
            let results = serde_json::json!({
                "all_hold": checks.iter().all(|c| c.holds),
                "max_deviation": max_deviation,
                "checks": checks,
            });
            let seed = cli.seed.or(file_seed).unwrap_or(0);
            emit(out, &Report::new("markov", &cfg, seed, &results)?.to_bytes())
        }
        Command::DiscoverPair { file, method } => {
            let mut cfg: DiscoverConfig = load_config(config)?;
            cfg.method = method_of(*method, cfg.method);
            let (x, y) = read_pair_file(file)?;
            let seed = cli.seed.unwrap_or(0);
            let verdict = match cfg.method {
                Method::Anm => {
                    let anm = AnmConfig { seed, execution, ..cfg.anm.clone() };
                    cause_effect::anm_direction(&x, &y, &anm)?
                }
                Method::Igci => cause_effect::igci_direction(&x, &y, &cfg.igci)?,
            };
            emit(out, &Report::new("discover-pair", &cfg, seed, &verdict)?.to_bytes())
        }
        Command::DiscoverDir { dir, metadata, method } => {
            let mut cfg: DiscoverConfig = load_config(config)?;
            cfg.method = method_of(*method, cfg.method);
            let meta_path = metadata.clone().unwrap_or_else(|| dir.join("pairmeta.txt"));
            let truth = parse_metadata(&read_text(&meta_path)?)
                .map_err(|e| CliError::new(e.code, format!("{}: {}", meta_path.display(), e.message)))?;
            let mut pairs = Vec::with_capacity(truth.len());
            for (id, dir_truth) in &truth {
                let path = pair_path(dir, id).ok_or_else(|| {
                    CliError::new(ErrorCode::Io, format!("{}: no pair file for `{id}`", dir.display()))
                })?;
                let (x, y) = read_pair_file(&path)?;
                pairs.push(PairCase { id: id.clone(), x, y, truth: *dir_truth });
            }
            let seed = cli.seed.unwrap_or(0);
            let batch = BatchConfig { anm: cfg.anm.clone(), igci: cfg.igci.clone(), seed, execution };
            let summary = cause_effect::batch_discover(&pairs, cfg.method, &batch)?;
            emit(out, &Report::new("discover-dir", &cfg, seed, &summary)?.to_bytes())
        }
        Command::Hsr { panel_csv } => {
            let cfg: HsrCommandConfig = load_config(config)?;
            let seed = cli.seed.unwrap_or(0);
            let panel = half_sibling::simulate_panel(&cfg.panel, seed)?;
            if let Some(p) = panel_csv {
                let bytes = csv_bytes(|b| panel.write_csv(b));
                fs::write(p, bytes).map_err(|e| CliError::io(p, e))?;
            }
            let fits = half_sibling::hsr_panel(&panel, &cfg.hsr, execution)?;
            let mut targets = Vec::with_capacity(fits.len());
            for (k, fit) in fits.iter().enumerate() {
                let (mse, correlation) = half_sibling::recovery_score(&fit.estimate, &panel.signals[k])?;
                targets.push(TargetRecovery {
                    target: k,
                    mse,
                    correlation,
                    raw_correlation: stats::pearson(&panel.targets[k], &panel.signals[k]).unwrap_or(0.0),
                    r_squared: fit.r_squared,
                });
            }
            let results = HsrReport { mean_sibling_correlation: half_sibling::mean_sibling_correlation(&panel), targets };
            emit(out, &Report::new("hsr", &cfg, seed, &results)?.to_bytes())
        }
        Command::SecondLaw { n_bits, steps, block_bits } => {
            let mut cfg: SecondLawConfig = load_config(config)?;
            cfg.n_bits = n_bits.unwrap_or(cfg.n_bits);
            cfg.steps = steps.unwrap_or(cfg.steps);
            cfg.block_bits = block_bits.unwrap_or(cfg.block_bits);
            if cfg.level > 9 {
                return Err(CliError::usage(format!("compression level {} is not in 0..=9", cfg.level)));
            }
            if cfg.ones_start + cfg.ones_len > cfg.n_bits {
                return Err(CliError::usage("initial block of ones does not fit in the state"));
            }
            let seed = cli.seed.unwrap_or(0);
            let rule = ReversibleRule::random_mixing(cfg.block_bits, seed)?;
            let initial = BitState::single_block(cfg.n_bits, cfg.ones_start, cfg.ones_len);
            let run = second_law_run(&initial, &rule, cfg.steps, &Compressor { level: cfg.level }, execution)?;
            emit(out, &csv_bytes(|b| run.write_csv(b)))
        }
        Command::SslBench { seeds } => {
            let mut cfg: SslCommandConfig = load_config(config)?;
            cfg.n_seeds = seeds.unwrap_or(cfg.n_seeds);
            let seed = cli.seed.unwrap_or(0);
            let summary = ssl_bench::ssl_gap_experiment(&cfg.ssl, cfg.n_seeds, seed, execution)?;
            emit(out, &Report::new("ssl-bench", &cfg, seed, &summary)?.to_bytes())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn do_flag() {
        assert_eq!(parse_do("X=1.5").unwrap(), Intervention::set_constant("X", 1.5));
        assert_eq!(parse_do("X").unwrap_err().code, ErrorCode::Usage);
        assert_eq!(parse_do("X=abc").unwrap_err().code, ErrorCode::Usage);
    }

    #[test]
    fn configs_reject_unknown_fields() {
        assert!(serde_json::from_str::<SecondLawConfig>(r#"{"n_bits": 64, "bogus": 1}"#).is_err());
        let c: SecondLawConfig = serde_json::from_str(r#"{"steps": 3}"#).unwrap();
        assert_eq!(c.steps, 3);
        assert_eq!(c.n_bits, 4096);
    }
}
