use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::harness::{ExperimentConfig, DEFAULT_REPS, DEFAULT_SEED};
use crate::rules::{RuleId, RuleParams};
use crate::seqgen::SequenceModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    /// `--help` or `--version`; not a failure.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
    #[error("cannot read config file {path}: {reason}")]
    Io { path: String, reason: String },
}

fn usage(msg: impl Into<String>) -> ConfigError {
    ConfigError::Usage(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub config: ExperimentConfig,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditOptions {
    pub n_max: usize,
    pub rules: Vec<RuleId>,
    pub reps: u64,
    pub seed: u64,
    pub params: RuleParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Run(RunOptions),
    Audit(AuditOptions),
}

/// Monte Carlo experiments for rank-based secretary stopping rules.
#[derive(Debug, Parser)]
#[command(
    name = "secretary",
    version,
    args_conflicts_with_subcommands = true,
    allow_negative_numbers = true
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Compare exact enumeration against Monte Carlo for small horizons.
    #[command(allow_negative_numbers = true)]
    Audit(AuditArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Horizons, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Monte Carlo replications per cell.
    #[arg(long)]
    reps: Option<u64>,
    /// Value model: uniform, normal, exponential or ar1. Repeatable.
    #[arg(long, value_delimiter = ',')]
    dist: Vec<String>,
    /// AR(1) coefficient.
    #[arg(long)]
    phi: Option<f64>,
    /// Rules, comma separated (Exact, Odds, ER, AD, PR, TP, DP, VE).
    #[arg(long, value_delimiter = ',')]
    rules: Vec<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    params: ParamArgs,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Largest horizon to enumerate (at most 10).
    #[arg(long = "n-max")]
    n_max: usize,
    #[arg(long, value_delimiter = ',')]
    rules: Vec<String>,
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Debug, Args, Default)]
struct ParamArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Early-accept curvature.
    #[arg(long = "p")]
    p: Option<f64>,
    #[arg(long)]
    cs: Option<f64>,
    #[arg(long)]
    q0: Option<f64>,
    #[arg(long)]
    q1: Option<f64>,
    #[arg(long)]
    m0: Option<usize>,
}

/// Every setting before defaults are applied.
#[derive(Debug, Default)]
struct Settings {
    n: Option<Vec<usize>>,
    reps: Option<u64>,
    dist: Option<Vec<String>>,
    phi: Option<f64>,
    rules: Option<Vec<String>>,
    seed: Option<u64>,
    gamma: Option<f64>,
    cap: Option<f64>,
    eta: Option<f64>,
    p: Option<f64>,
    cs: Option<f64>,
    q0: Option<f64>,
    q1: Option<f64>,
    m0: Option<usize>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| usage(format!("invalid value `{value}` for `{key}`")))
}

fn split_list(value: &str) -> Vec<String> {
    value.split(',').map(|s| s.trim().to_string()).collect()
}

impl Settings {
    fn from_file(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key=value", lineno + 1)))?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut s = Settings::default();
        for (key, value) in &map {
            let v = value.as_str();
            match key.as_str() {
                "n" => {
                    s.n = Some(
                        split_list(v)
                            .iter()
                            .map(|x| parse_value(key, x))
                            .collect::<Result<_, _>>()?,
                    )
                }
                "reps" => s.reps = Some(parse_value(key, v)?),
                "dist" => s.dist = Some(split_list(v)),
                "phi" => s.phi = Some(parse_value(key, v)?),
                "rules" => s.rules = Some(split_list(v)),
                "seed" => s.seed = Some(parse_value(key, v)?),
                "gamma" => s.gamma = Some(parse_value(key, v)?),
                "cap" => s.cap = Some(parse_value(key, v)?),
                "eta" => s.eta = Some(parse_value(key, v)?),
                "p" => s.p = Some(parse_value(key, v)?),
                "cs" => s.cs = Some(parse_value(key, v)?),
                "q0" => s.q0 = Some(parse_value(key, v)?),
                "q1" => s.q1 = Some(parse_value(key, v)?),
                "m0" => s.m0 = Some(parse_value(key, v)?),
                "out" => s.out = Some(PathBuf::from(v)),
                "format" => {
                    s.format = Some(
                        OutputFormat::from_str(v, true)
                            .map_err(|_| usage(format!("invalid value `{v}` for `format`")))?,
                    )
                }
                other => return Err(usage(format!("unknown config key `{other}`"))),
            }
        }
        Ok(s)
    }

    fn overlay_params(&mut self, p: ParamArgs) {
        macro_rules! take {
            ($($field:ident <- $src:ident),*) => { $( if p.$src.is_some() { self.$field = p.$src; } )* };
        }
        take!(gamma <- gamma, cap <- cap, eta <- eta, p <- p, cs <- cs, q0 <- q0, q1 <- q1, m0 <- m0);
    }

    fn overlay_run(&mut self, args: RunArgs) {
        if !args.n.is_empty() {
            self.n = Some(args.n);
        }
        if !args.dist.is_empty() {
            self.dist = Some(args.dist);
        }
        if !args.rules.is_empty() {
            self.rules = Some(args.rules);
        }
        self.reps = args.reps.or(self.reps);
        self.phi = args.phi.or(self.phi);
        self.seed = args.seed.or(self.seed);
        self.out = args.out.or(self.out.take());
        self.format = args.format.or(self.format);
        self.overlay_params(args.params);
    }

    fn params(&self) -> Result<RuleParams, ConfigError> {
        let d = RuleParams::default();
        let params = RuleParams {
            gamma: self.gamma.unwrap_or(d.gamma),
            cap: self.cap.unwrap_or(d.cap),
            eta: self.eta.unwrap_or(d.eta),
            p_exp: self.p.unwrap_or(d.p_exp),
            c_s: self.cs.unwrap_or(d.c_s),
            q0: self.q0.unwrap_or(d.q0),
            q1: self.q1.unwrap_or(d.q1),
            m0: self.m0.unwrap_or(d.m0),
            k_rules: d.k_rules,
        };
        params.validate().map_err(|e| usage(e.to_string()))?;
        Ok(params)
    }

    fn rules(&self) -> Result<Vec<RuleId>, ConfigError> {
        let Some(names) = &self.rules else {
            return Ok(RuleId::ALL.to_vec());
        };
        let mut rules = Vec::new();
        for name in names {
            let rule: RuleId = name.parse().map_err(|e: crate::rules::RuleError| usage(e.to_string()))?;
            if !rules.contains(&rule) {
                rules.push(rule);
            }
        }
        if rules.is_empty() {
            return Err(usage("rule list is empty"));
        }
        rules.sort();
        Ok(rules)
    }

    fn reps(&self, default: u64) -> Result<u64, ConfigError> {
        let reps = self.reps.unwrap_or(default);
        if reps < 1 {
            return Err(usage("--reps must be at least 1"));
        }
        Ok(reps)
    }

    fn experiment(&self) -> Result<ExperimentConfig, ConfigError> {
        let phi = self.phi.unwrap_or(SequenceModel::DEFAULT_PHI);
        if !(phi.abs() < 1.0) {
            return Err(usage(format!("--phi {phi} must lie in (-1, 1)")));
        }
        let models = match &self.dist {
            None => vec![
                SequenceModel::Uniform01,
                SequenceModel::StandardNormal,
                SequenceModel::ExponentialUnitRate,
                SequenceModel::Ar1 { phi },
            ],
            Some(names) => {
                let mut models = Vec::new();
                for name in names {
                    let model = if name.trim().eq_ignore_ascii_case("ar1") {
                        SequenceModel::Ar1 { phi }
                    } else {
                        name.parse::<SequenceModel>().map_err(|e| usage(e.to_string()))?
                    };
                    if !models.contains(&model) {
                        models.push(model);
                    }
                }
                models.sort_by_key(|m: &SequenceModel| m.sort_key());
                models
            }
        };
        let mut n_list = self.n.clone().unwrap_or_else(|| crate::harness::DEFAULT_N_LIST.to_vec());
        if let Some(n) = n_list.iter().find(|&&n| n < 2) {
            return Err(usage(format!("--n values must be at least 2, got {n}")));
        }
        n_list.sort_unstable();
        n_list.dedup();
        Ok(ExperimentConfig {
            n_list,
            reps: self.reps(DEFAULT_REPS)?,
            models,
            rules: self.rules()?,
            params: self.params()?,
            master_seed: self.seed.unwrap_or(DEFAULT_SEED),
        })
    }
}

fn clap_error(err: clap::Error) -> ConfigError {
    use clap::error::ErrorKind;
    let text = err.render().to_string();
    match err.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ConfigError::Help(text),
        _ => ConfigError::Usage(text),
    }
}

/// Default number of Monte Carlo replications per audit cell.
pub const DEFAULT_AUDIT_REPS: u64 = 100_000;

/// Parses the command line. `file_text`, when given, stands in for the
/// contents of `--config`; otherwise the `--config` path is read from disk.
pub fn parse_config_with<I, T>(argv: I, file_text: Option<&str>) -> Result<Command, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(clap_error)?;
    match cli.command {
        Some(Sub::Audit(args)) => {
            let mut settings = Settings {
                reps: args.reps,
                seed: args.seed,
                rules: if args.rules.is_empty() { None } else { Some(args.rules) },
                ..Settings::default()
            };
            settings.overlay_params(args.params);
            if !(2..=crate::oracle::MAX_ENUMERATION_N).contains(&args.n_max) {
                return Err(usage(format!(
                    "--n-max must lie in 2..={}, got {}",
                    crate::oracle::MAX_ENUMERATION_N,
                    args.n_max
                )));
            }
            Ok(Command::Audit(AuditOptions {
                n_max: args.n_max,
                rules: settings.rules()?,
                reps: settings.reps(DEFAULT_AUDIT_REPS)?,
                seed: settings.seed.unwrap_or(DEFAULT_SEED),
                params: settings.params()?,
            }))
        }
        None => {
            let mut settings = match (file_text, &cli.run.config) {
                (Some(text), _) => Settings::from_file(text)?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                        path: path.display().to_string(),
                        reason: e.to_string(),
                    })?;
                    Settings::from_file(&text)?
                }
                (None, None) => Settings::default(),
            };
            settings.overlay_run(cli.run);
            Ok(Command::Run(RunOptions {
                config: settings.experiment()?,
                format: settings.format.unwrap_or(OutputFormat::Csv),
                out: settings.out,
            }))
        }
    }
}

pub fn parse_config<I, T>(argv: I) -> Result<Command, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    parse_config_with(argv, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Result<RunOptions, ConfigError> {
        let argv = std::iter::once("secretary").chain(args.iter().copied());
        match parse_config(argv)? {
            Command::Run(opts) => Ok(opts),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_arguments_is_full_default_grid() {
        let opts = run(&[]).unwrap();
        assert_eq!(opts.config, ExperimentConfig::default());
        assert_eq!(opts.config.n_list, vec![50, 100, 200, 500, 1000]);
        assert_eq!(opts.config.reps, 10_000);
        assert_eq!(opts.config.models.len(), 4);
        assert_eq!(opts.config.models[3], SequenceModel::Ar1 { phi: 0.5 });
        assert_eq!(opts.config.rules, RuleId::ALL.to_vec());
        assert_eq!(opts.format, OutputFormat::Csv);
        assert_eq!(opts.out, None);
    }

    #[test]
    fn restricted_configuration() {
        let opts = run(&[
            "--n", "50", "--dist", "uniform", "--rules", "exact,odds", "--reps", "1000", "--seed",
            "42",
        ])
        .unwrap();
        assert_eq!(opts.config.n_list, vec![50]);
        assert_eq!(opts.config.models, vec![SequenceModel::Uniform01]);
        assert_eq!(opts.config.rules, vec![RuleId::Exact, RuleId::Odds]);
        assert_eq!(opts.config.reps, 1000);
        assert_eq!(opts.config.master_seed, 42);
    }

    #[test]
    fn repeated_dist_and_phi() {
        let opts = run(&["--dist", "ar1", "--dist", "normal", "--phi", "-0.3"]).unwrap();
        assert_eq!(
            opts.config.models,
            vec![SequenceModel::StandardNormal, SequenceModel::Ar1 { phi: -0.3 }]
        );
    }

    #[test]
    fn parameter_overrides() {
        let opts = run(&["--gamma", "2", "--cap", "1.5", "--eta", "0.1", "--p", "1", "--cs", "0.5",
            "--q0", "0.1", "--q1", "0.2", "--m0", "8"]).unwrap();
        let p = opts.config.params;
        assert_eq!((p.gamma, p.cap, p.eta, p.p_exp, p.c_s, p.q0, p.q1, p.m0),
            (2.0, 1.5, 0.1, 1.0, 0.5, 0.1, 0.2, 8));
    }

    #[test]
    fn usage_errors() {
        for args in [
            &["--phi", "1.5"][..],
            &["--reps", "0"],
            &["--reps", "many"],
            &["--bogus"],
            &["--rules", "exact,nope"],
            &["--n", "1"],
            &["--dist", "cauchy"],
            &["--eta", "1.2"],
            &["--format", "json"],
        ] {
            assert!(matches!(run(args), Err(ConfigError::Usage(_))), "{args:?}");
        }
    }

    #[test]
    fn help_is_not_an_error() {
        assert!(matches!(run(&["--help"]), Err(ConfigError::Help(_))));
    }

    #[test]
    fn file_values_are_overridden_by_flags() {
        let file = "# experiment\nn = 20,40\nreps=500\nseed=9\ndist=normal\ngamma=4\nformat=table\n";
        let argv = ["secretary", "--seed", "11", "--config", "ignored.conf"];
        let Command::Run(opts) = parse_config_with(argv, Some(file)).unwrap() else {
            panic!()
        };
        assert_eq!(opts.config.n_list, vec![20, 40]);
        assert_eq!(opts.config.reps, 500);
        assert_eq!(opts.config.master_seed, 11);
        assert_eq!(opts.config.models, vec![SequenceModel::StandardNormal]);
        assert_eq!(opts.config.params.gamma, 4.0);
        assert_eq!(opts.format, OutputFormat::Table);
    }

    #[test]
    fn bad_config_file() {
        assert!(matches!(
            parse_config_with(["secretary"], Some("colour=blue\n")),
            Err(ConfigError::Usage(_))
        ));
        assert!(matches!(
            parse_config_with(["secretary"], Some("reps\n")),
            Err(ConfigError::Usage(_))
        ));
        assert!(matches!(
            parse_config(["secretary", "--config", "/nonexistent/secretary.conf"]),
            Err(ConfigError::Io { .. })
        ));
    }

    #[test]
    fn audit_subcommand() {
        let cmd = parse_config(["secretary", "audit", "--n-max", "4", "--rules", "exact"]).unwrap();
        let Command::Audit(opts) = cmd else { panic!() };
        assert_eq!(opts.n_max, 4);
        assert_eq!(opts.rules, vec![RuleId::Exact]);
        assert_eq!(opts.reps, DEFAULT_AUDIT_REPS);

        assert!(matches!(
            parse_config(["secretary", "audit", "--n-max", "11"]),
            Err(ConfigError::Usage(_))
        ));
        assert!(matches!(
            parse_config(["secretary", "audit", "--n-max", "4", "--rules", ""]),
            Err(ConfigError::Usage(_))
        ));
        assert!(matches!(
            parse_config(["secretary", "audit"]),
            Err(ConfigError::Usage(_))
        ));
    }
}
