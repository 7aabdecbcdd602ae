//! Argument definitions and subcommand dispatch.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use bbl_core::linalg::{Matrix, RankTolerance};
use bbl_core::oracle::{integrate_posterior, Agreement, Decision, OracleConfig};
use bbl_core::propriety::{classify_with, decide_with};
use bbl_core::sampler::{sample_posterior, summarize, SamplerConfig};
use bbl_core::{BetaPrior, Dataset, Error as CoreError, GaussianPrior, HyperPriorSpec, RPrior, Status, ThresholdMode};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::datasets;
use crate::error::{CliError, Result};
use crate::io::{read_dataset_file, write_draws};
use crate::report::{status_exit_code, InputSummary, OracleSection, ReportDocument, SamplerSection};
use crate::reproduce::{reproduce_coins, reproduce_hospitals};

#[derive(Debug, Parser)]
#[command(name = "bbl", version, about = "Posterior propriety checks and sampling for Beta-Binomial-Logit models")]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interior set, its rank and the extreme-group tallies.
    Classify {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = f64::EPSILON)]
        rank_tol: f64,
    },
    /// Analytic propriety verdict; exit code 0 proper, 2 improper, 3 unknown.
    Check {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Corrected)]
        mode: ModeArg,
        #[arg(long, default_value_t = f64::EPSILON)]
        rank_tol: f64,
        /// Also run the integration oracle (m <= 2).
        #[arg(long)]
        oracle: bool,
    },
    /// Expanding-domain integration of the hyper-posterior kernel (m <= 2).
    Integrate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 8)]
        max_levels: usize,
    },
    /// Metropolis draws of (log r, beta) with exact Beta draws of p.
    Sample {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        prior: PriorArgs,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 2_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 1)]
        thin: usize,
        /// Required when the CI environment variable is set.
        #[arg(long)]
        seed: Option<u64>,
        /// Starting beta, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        initial_beta: Option<Vec<f64>>,
        /// Delimited draws file (s, beta1.., p1..).
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON summary document.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Sample even when the analytic verdict is unknown.
        #[arg(long)]
        force_unknown: bool,
    },
    /// Reproduce the built-in coin panels or hospital verdicts.
    Reproduce {
        #[arg(value_enum)]
        target: Target,
        #[arg(long, value_enum, default_value_t = ModeArg::Corrected)]
        mode: ModeArg,
        /// Add oracle decisions to each coin panel.
        #[arg(long)]
        oracle: bool,
    },
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Data file with header `n,y,x1,...`, or `builtin:<name>`.
    pub file: String,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
}

#[derive(Debug, Clone, Args)]
pub struct PriorArgs {
    #[arg(long = "f", value_enum, default_value_t = RFamily::Power)]
    pub f: RFamily,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1.0)]
    pub u: f64,
    #[arg(long = "g", value_enum, default_value_t = BetaFamily::Flat)]
    pub g: BetaFamily,
    #[arg(long, default_value_t = 10.0)]
    pub g_sd: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub g_mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RFamily {
    Power,
    DrOverR,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BetaFamily {
    Flat,
    Logistic,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Literal threshold `k_y >= u + 1`.
    Paper,
    /// Corrected threshold `k_y > u`.
    Corrected,
    /// Report both; the corrected verdict sets the exit code.
    Both,
}

impl ModeArg {
    pub fn modes(self) -> Vec<ThresholdMode> {
        match self {
            ModeArg::Paper => vec![ThresholdMode::Literal],
            ModeArg::Corrected => vec![ThresholdMode::Corrected],
            ModeArg::Both => vec![ThresholdMode::Literal, ThresholdMode::Corrected],
        }
    }

    /// Mode whose status sets the exit code.
    pub fn primary(self) -> ThresholdMode {
        match self {
            ModeArg::Paper => ThresholdMode::Literal,
            _ => ThresholdMode::Corrected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Coins,
    Hospitals,
}

impl PriorArgs {
    pub fn build(&self, m: usize) -> Result<HyperPriorSpec> {
        let f = match self.f {
            RFamily::Power => RPrior::PowerLaw { t: self.t, u: self.u },
            RFamily::DrOverR => RPrior::DrOverR,
        };
        let g = match self.g {
            BetaFamily::Flat => BetaPrior::Flat,
            BetaFamily::Logistic => BetaPrior::StandardLogisticIntercept,
            BetaFamily::Gaussian => {
                if !(self.g_sd > 0.0 && self.g_sd.is_finite()) {
                    return Err(CliError::Usage("--g-sd must be positive".into()));
                }
                let mut cov = Matrix::identity(m);
                for i in 0..m {
                    cov[(i, i)] = self.g_sd * self.g_sd;
                }
                BetaPrior::Gaussian(GaussianPrior::new(vec![self.g_mean; m], cov)?)
            }
        };
        Ok(HyperPriorSpec::new(f, g)?)
    }
}

/// Report plus the process exit code it implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: ReportDocument,
    pub exit_code: i32,
}

fn load(input: &InputArgs) -> Result<(Dataset, InputSummary)> {
    let data = match input.file.strip_prefix("builtin:") {
        Some(name) => datasets::builtin(name).ok_or_else(|| {
            CliError::Usage(format!("unknown built-in dataset '{name}'; known: {}", datasets::BUILTIN_NAMES.join(", ")))
        })?,
        None => {
            let delimiter = u8::try_from(input.delimiter)
                .map_err(|_| CliError::Usage("--delimiter must be a single-byte character".into()))?;
            read_dataset_file(input.file.as_ref(), delimiter)?
        }
    };
    let summary = InputSummary { source: input.file.clone(), k: data.k(), m: data.m() };
    Ok((data, summary))
}

fn rank_tolerance(relative: f64) -> Result<RankTolerance> {
    if !(relative >= 0.0 && relative.is_finite()) {
        return Err(CliError::Usage("--rank-tol must be a non-negative number".into()));
    }
    Ok(RankTolerance { relative, ..RankTolerance::default() })
}

fn agreement(status: Status, decision: Decision) -> Agreement {
    match (status, decision) {
        (Status::Unknown, _) | (_, Decision::Inconclusive) => Agreement::Undetermined,
        (Status::Proper, Decision::Finite) | (Status::Improper, Decision::Divergent) => Agreement::Agree,
        _ => Agreement::Disagree,
    }
}

fn oracle_section(
    data: &Dataset,
    hp: &HyperPriorSpec,
    cfg: &OracleConfig,
    tol: &RankTolerance,
) -> Result<OracleSection> {
    let report = integrate_posterior(data, hp, cfg)?;
    let corrected = decide_with(data, hp, ThresholdMode::Corrected, tol)?.status;
    let literal = decide_with(data, hp, ThresholdMode::Literal, tol)?.status;
    Ok(OracleSection {
        agreement: Some(agreement(corrected, report.decision)),
        literal_agrees: Some(agreement(literal, report.decision) == Agreement::Agree),
        report,
    })
}

fn check_oracle_dim(data: &Dataset) -> Result<()> {
    if data.m() > bbl_core::oracle::MAX_ORACLE_DIM {
        return Err(CoreError::OracleDimension(data.m()).into());
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Classify { input, rank_tol } => {
            let (data, summary) = load(input)?;
            let mut report = ReportDocument::new("classify");
            report.input = Some(summary);
            report.classification = Some(classify_with(&data, &rank_tolerance(*rank_tol)?));
            Ok(Outcome { report, exit_code: 0 })
        }
        Command::Check { input, prior, mode, rank_tol, oracle } => {
            let (data, summary) = load(input)?;
            let hp = prior.build(data.m())?;
            let tol = rank_tolerance(*rank_tol)?;
            let mut report = ReportDocument::new("check");
            report.input = Some(summary);
            report.classification = Some(classify_with(&data, &tol));
            for m in mode.modes() {
                report.verdicts.push(decide_with(&data, &hp, m, &tol)?);
            }
            let exit_code = status_exit_code(decide_with(&data, &hp, mode.primary(), &tol)?.status);
            if *oracle {
                check_oracle_dim(&data)?;
                report.oracle = Some(oracle_section(&data, &hp, &OracleConfig::default(), &tol)?);
            }
            report.hyper_prior = Some(hp);
            Ok(Outcome { report, exit_code })
        }
        Command::Integrate { input, prior, mode, tol, max_levels } => {
            let (data, summary) = load(input)?;
            check_oracle_dim(&data)?;
            let hp = prior.build(data.m())?;
            let cfg = OracleConfig { max_levels: *max_levels, ..OracleConfig::with_tolerance(*tol) };
            let rank = RankTolerance::default();
            let mut report = ReportDocument::new("integrate");
            report.input = Some(summary);
            for m in mode.modes() {
                report.verdicts.push(decide_with(&data, &hp, m, &rank)?);
            }
            report.oracle = Some(oracle_section(&data, &hp, &cfg, &rank)?);
            report.hyper_prior = Some(hp);
            Ok(Outcome { report, exit_code: 0 })
        }
        Command::Sample { input, prior, draws, burn_in, thin, seed, initial_beta, out, summary, force_unknown } => {
            let seed = match seed {
                Some(s) => *s,
                None if std::env::var_os("CI").is_some() => {
                    return Err(CliError::Usage("--seed is required when CI is set".into()));
                }
                None => 0,
            };
            let (data, input_summary) = load(input)?;
            let hp = prior.build(data.m())?;
            let cfg = SamplerConfig {
                draws: *draws,
                burn_in: *burn_in,
                thin: *thin,
                seed,
                initial_beta: initial_beta.clone(),
                allow_unknown: *force_unknown,
                ..SamplerConfig::default()
            };
            let samples = sample_posterior(&data, &hp, &cfg).map_err(|e| match e {
                CoreError::SamplingRefused { status, condition } => CliError::Refused { status, condition },
                other => CliError::Core(other),
            })?;
            if let Some(path) = out {
                let file = File::create(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                write_draws(BufWriter::new(file), &samples)
                    .map_err(|e| CliError::Io { path: path.clone(), source: std::io::Error::other(e.to_string()) })?;
            }
            let mut report = ReportDocument::new("sample");
            report.input = Some(input_summary);
            report.verdicts.push(decide_with(&data, &hp, cfg.mode, &RankTolerance::default())?);
            report.hyper_prior = Some(hp);
            report.sampler = Some(SamplerSection {
                config: cfg,
                summary: summarize(&samples)?,
                draws_file: out.as_ref().map(|p| p.display().to_string()),
            });
            if let Some(path) = summary {
                std::fs::write(path, report.to_json()?)
                    .map_err(|source| CliError::Io { path: path.clone(), source })?;
            }
            Ok(Outcome { report, exit_code: 0 })
        }
        Command::Reproduce { target, mode, oracle } => {
            let modes = mode.modes();
            let reproduction = match target {
                Target::Coins => reproduce_coins(&modes, oracle.then(OracleConfig::default).as_ref())?,
                Target::Hospitals => {
                    if *oracle {
                        return Err(CliError::Usage("--oracle is only available for the coin panels".into()));
                    }
                    reproduce_hospitals(&modes)?
                }
            };
            let mut report = ReportDocument::new("reproduce");
            report.reproduction = Some(reproduction);
            Ok(Outcome { report, exit_code: 0 })
        }
    }
}

pub fn render(report: &ReportDocument, format: Format) -> Result<String> {
    match format {
        Format::Text => Ok(report.to_text()),
        Format::Json => report.to_json(),
    }
}
