//! Command-line driver: covariance/precision estimation on data files and
//! the seeded Monte Carlo benchmarks.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 estimator failure
//! (estimate command only).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use poet_core::clime::graph_from_pilot;
use poet_core::io;
use poet_core::poet::{poet_estimate, FamilySpec, PsdMode, Shrinkage, ThresholdRule};
use poet_core::sim::{self, Design, ExperimentConfig, NRule, PairPolicy};
use poet_core::{DataError, EstimateError, MEstimatorConfig, MFamily, PairMode, PilotFamily};

#[derive(Parser)]
#[command(
    name = "poet",
    version,
    about = "Covariance and precision matrix estimation for approximate factor models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a covariance matrix (and optionally a precision matrix)
    /// from a delimiter-separated data file, one observation per row.
    Estimate(Box<EstimateArgs>),
    /// Run a seeded Monte Carlo benchmark and write the error report.
    #[command(subcommand)]
    Simulate(SimulateCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Subgaussian,
    Elliptical,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShrinkageArg {
    Hard,
    Soft,
    Scad,
}

impl From<ShrinkageArg> for Shrinkage {
    fn from(v: ShrinkageArg) -> Self {
        match v {
            ShrinkageArg::Hard => Shrinkage::Hard,
            ShrinkageArg::Soft => Shrinkage::Soft,
            ShrinkageArg::Scad => Shrinkage::Scad,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PsdArg {
    /// Family default: none for subgaussian, clip for elliptical.
    Auto,
    None,
    Clip,
    MaxnormDual,
}

impl PsdArg {
    fn resolve(self, family: PilotFamily) -> PsdMode {
        match self {
            PsdArg::Auto => PsdMode::default_for(family),
            PsdArg::None => PsdMode::None,
            PsdArg::Clip => PsdMode::Clip,
            PsdArg::MaxnormDual => PsdMode::MaxnormDual,
        }
    }

    fn as_option(self) -> Option<PsdMode> {
        match self {
            PsdArg::Auto => None,
            PsdArg::None => Some(PsdMode::None),
            PsdArg::Clip => Some(PsdMode::Clip),
            PsdArg::MaxnormDual => Some(PsdMode::MaxnormDual),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MFamilyArg {
    Huber,
    Catoni,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairsArg {
    Full,
    Disjoint,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input data file.
    #[arg(long)]
    input: PathBuf,
    /// Number of factors (0 runs pure sparse thresholding).
    #[arg(long)]
    factors: usize,
    /// Pilot family.
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Constant C in the threshold tau = C * w_n.
    #[arg(long, default_value_t = 0.5)]
    tau_const: f64,
    /// Shrinkage family.
    #[arg(long, value_enum, default_value_t = ShrinkageArg::Soft)]
    shrinkage: ShrinkageArg,
    /// SCAD parameter.
    #[arg(long, default_value_t = 3.7)]
    scad_a: f64,
    /// PSD handling of the residual.
    #[arg(long, value_enum, default_value_t = PsdArg::Auto)]
    psd: PsdArg,
    /// Output path for the covariance estimate.
    #[arg(long)]
    out_cov: PathBuf,
    /// Also estimate the precision matrix and write it here.
    #[arg(long)]
    out_precision: Option<PathBuf>,
    /// Constant for the precision constraint level tau = C2 * w_n.
    #[arg(long, default_value_t = 0.5)]
    clime_tau_const: f64,
    /// Influence function for the robust scale estimates.
    #[arg(long, value_enum, default_value_t = MFamilyArg::Catoni)]
    m_family: MFamilyArg,
    /// Confidence parameter for the robust scale estimates
    /// (default 1/(max(n, p))^2).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Pair selection for the multivariate Kendall's tau.
    #[arg(long, value_enum, default_value_t = PairsArg::Full)]
    mk_pairs: PairsArg,
    /// Seed for disjoint pair selection.
    #[arg(long, default_value_t = 0)]
    mk_seed: u64,
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Conditional sparse covariance design (identity idiosyncratic
    /// covariance), default n = p/2.
    Cov(SimArgs),
    /// Conditional graphical model design (2x2 block precision), default
    /// n = 0.6 p.
    Graph(SimArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Comma-separated dimensions, e.g. 100,200.
    #[arg(long, value_delimiter = ',')]
    p: Vec<usize>,
    /// Sample-size rule: half_p, point6_p, or a comma-separated list
    /// matching --p.
    #[arg(long)]
    n_rule: Option<String>,
    /// Number of factors.
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Degrees of freedom (must exceed 4) or "inf" for Gaussian data.
    #[arg(long, default_value = "4.2")]
    nu: String,
    /// Replications per dimension.
    #[arg(long, default_value_t = 50)]
    reps: usize,
    /// Master seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output report path.
    #[arg(long)]
    out: PathBuf,
    /// Threshold constant.
    #[arg(long, default_value_t = 0.5)]
    tau_const: f64,
    /// Shrinkage family.
    #[arg(long, value_enum, default_value_t = ShrinkageArg::Soft)]
    shrinkage: ShrinkageArg,
    /// PSD handling of the residual.
    #[arg(long, value_enum, default_value_t = PsdArg::Auto)]
    psd: PsdArg,
    /// Precision constraint constant.
    #[arg(long, default_value_t = 0.5)]
    clime_tau_const: f64,
    /// Families to compare.
    #[arg(long, value_enum, value_delimiter = ',',
          default_values_t = [FamilyArg::Subgaussian, FamilyArg::Elliptical])]
    families: Vec<FamilyArg>,
    /// Draw the loadings once and reuse them in every replication.
    #[arg(long, default_value_t = false)]
    fix_loadings: bool,
    /// Pair selection for the multivariate Kendall's tau.
    #[arg(long, value_enum, default_value_t = PairsArg::Full)]
    mk_pairs: PairsArg,
}

enum CliError {
    Usage(String),
    Data(DataError),
    Estimator(EstimateError),
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e)
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        CliError::Estimator(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match cli.command {
        Command::Estimate(args) => run_estimate(&args),
        Command::Simulate(cmd) => run_simulate(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("data error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Estimator(e)) => {
            eprintln!("estimator failure: {e}");
            ExitCode::from(3)
        }
    }
}

fn run_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let y = io::read_data_matrix(&args.input)?;
    eprintln!(
        "read {} observations of dimension {} from {}",
        y.n(),
        y.p(),
        args.input.display()
    );

    let m_config = MEstimatorConfig {
        family: match args.m_family {
            MFamilyArg::Huber => MFamily::Huber,
            MFamilyArg::Catoni => MFamily::Catoni,
        },
        epsilon: args.epsilon,
        ..MEstimatorConfig::default()
    };
    let (spec, family) = match args.family {
        FamilyArg::Subgaussian => (FamilySpec::Subgaussian, PilotFamily::Subgaussian),
        FamilyArg::Elliptical => (
            FamilySpec::Elliptical {
                config: m_config,
                pairs: match args.mk_pairs {
                    PairsArg::Full => PairMode::Full,
                    PairsArg::Disjoint => PairMode::DisjointPairs { seed: args.mk_seed },
                },
            },
            PilotFamily::Elliptical,
        ),
    };
    let rule = ThresholdRule {
        shrinkage: args.shrinkage.into(),
        scad_a: args.scad_a,
        tau_const: args.tau_const,
        tau_override: None,
    };
    let psd = args.psd.resolve(family);

    let result = poet_estimate(&y, args.factors, &spec, &rule, psd)?;
    eprintln!(
        "threshold tau = {:.6}, psd = {}{}",
        result.tau_used,
        result.psd_mode_applied.name(),
        if result.diag_fallback {
            " (max-diagonal threshold fallback applied)"
        } else {
            ""
        }
    );
    io::write_matrix(&args.out_cov, result.sigma_total.as_array())?;
    eprintln!("wrote covariance estimate to {}", args.out_cov.display());

    if let Some(out_precision) = &args.out_precision {
        let est = graph_from_pilot(&result.pilot, args.clime_tau_const, psd)?;
        if !est.columns_failed.is_empty() {
            eprintln!(
                "warning: {} column programs failed (zero-filled): {:?}",
                est.columns_failed.len(),
                est.columns_failed
            );
        }
        eprintln!(
            "precision tau = {:.6}, feasibility residual = {:.3e}, min eigenvalue = {:.3e}",
            est.tau_used, est.feasibility_residual, est.omega_u_min_eigenvalue
        );
        let omega = est.omega.as_ref().expect("recomposed by graph_from_pilot");
        io::write_matrix(out_precision, omega.as_array())?;
        eprintln!("wrote precision estimate to {}", out_precision.display());
    }
    Ok(())
}

fn parse_nu(text: &str) -> Result<f64, CliError> {
    match text.trim().to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        other => other
            .parse::<f64>()
            .map_err(|e| CliError::Usage(format!("invalid --nu value '{text}': {e}"))),
    }
}

fn parse_n_rule(text: Option<&str>, design: Design, p_len: usize) -> Result<NRule, CliError> {
    let Some(text) = text else {
        return Ok(match design {
            Design::Cov => NRule::HalfP,
            Design::Graph => NRule::Point6P,
        });
    };
    match text.trim().to_ascii_lowercase().as_str() {
        "half_p" => Ok(NRule::HalfP),
        "point6_p" => Ok(NRule::Point6P),
        list => {
            let ns: Result<Vec<usize>, _> =
                list.split(',').map(|t| t.trim().parse::<usize>()).collect();
            let ns = ns.map_err(|e| {
                CliError::Usage(format!("invalid --n-rule value '{text}': {e}"))
            })?;
            if ns.len() != p_len {
                return Err(CliError::Usage(format!(
                    "--n-rule lists {} sample sizes for {} dimensions",
                    ns.len(),
                    p_len
                )));
            }
            Ok(NRule::Explicit(ns))
        }
    }
}

fn run_simulate(cmd: SimulateCommand) -> Result<(), CliError> {
    let (design, args) = match cmd {
        SimulateCommand::Cov(args) => (Design::Cov, args),
        SimulateCommand::Graph(args) => (Design::Graph, args),
    };
    if args.p.is_empty() {
        return Err(CliError::Usage("--p needs at least one dimension".into()));
    }
    let nu = parse_nu(&args.nu)?;
    let n_rule = parse_n_rule(args.n_rule.as_deref(), design, args.p.len())?;
    let families: Vec<PilotFamily> = args
        .families
        .iter()
        .map(|f| match f {
            FamilyArg::Subgaussian => PilotFamily::Subgaussian,
            FamilyArg::Elliptical => PilotFamily::Elliptical,
        })
        .collect();

    let config = ExperimentConfig {
        design,
        p_list: args.p.clone(),
        n_rule,
        m: args.m,
        nu,
        reps: args.reps,
        seed: args.seed,
        tau_const: args.tau_const,
        shrinkage: args.shrinkage.into(),
        psd: args.psd.as_option(),
        families,
        clime_tau_const: args.clime_tau_const,
        fix_loadings: args.fix_loadings,
        pairs: match args.mk_pairs {
            PairsArg::Full => PairPolicy::Full,
            PairsArg::Disjoint => PairPolicy::Disjoint,
        },
        m_config: MEstimatorConfig::default(),
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let report = sim::run_experiment(&config).map_err(|e| CliError::Usage(e.to_string()))?;
    io::write_report(&args.out, &report)?;

    eprintln!(
        "wrote {} rows ({} notes) to {}",
        report.rows.len(),
        report.notes.len(),
        args.out.display()
    );
    // Mean log2 ratios (subgaussian over elliptical) per dimension.
    for &p in &args.p {
        let ratios: Vec<String> = sim::Metric::all_for(design)
            .iter()
            .filter_map(|metric| {
                report
                    .log2_ratio(p, *metric)
                    .map(|v| format!("{}={:+.3}", metric.name(), v))
            })
            .collect();
        if !ratios.is_empty() {
            eprintln!("p={p}: {}", ratios.join(" "));
        }
    }
    Ok(())
}
