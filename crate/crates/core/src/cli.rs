//! Command-line front end: `analyze` runs the full per-base sweep and writes
//! its artifacts, `synth` emits synthetic panels.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::ingest::{parse_rates, synchronize, write_rates, CurrencyCode, GroupConfig};
use crate::msttree::{export_tree, write_degree_distribution, TreeFormat};
use crate::scaling::{
    sweep_report, write_report, write_scatter, BaseOutcome, BaseSelection, FitMode, SweepConfig,
    SweepReport,
};
use crate::spectrum::write_spectrum;
use crate::synth::{
    hierarchical_panel, one_factor_panel, random_walk_panel, HierarchySpec, DEFAULT_DECAY,
};

#[derive(Debug, Parser)]
#[command(name = "fxmst", version, about = "Currency-network spectra, spanning trees and degree scaling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze a rate panel for one or all base currencies.
    Analyze(AnalyzeArgs),
    /// Write a synthetic rate panel to standard output.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Panel CSV (`-` for standard input).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Base currency code, or `all`.
    #[arg(long, default_value = "all")]
    pub base: String,
    /// Zero returns larger than this many standard deviations.
    #[arg(long, default_value_t = 5.0)]
    pub despike_sigma: f64,
    #[arg(long, value_enum, default_value_t = FitModeArg::Two)]
    pub fit_mode: FitModeArg,
    /// JSON mapping group tag to currency codes (defaults to the shipped four groups).
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Return lag in trading days.
    #[arg(long, default_value_t = 1)]
    pub tau: usize,
    /// Currency the input prices are quoted in; omit for an abstract numeraire.
    #[arg(long)]
    pub quote: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitModeArg {
    Two,
    Unit,
}

impl From<FitModeArg> for FitMode {
    fn from(m: FitModeArg) -> FitMode {
        match m {
            FitModeArg::Two => FitMode::TwoParameter,
            FitModeArg::Unit => FitMode::UnitAmplitude,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// Independent geometric random walks.
    Walk,
    /// Nested-factor hierarchy with M^L leaves.
    Hier,
    /// Equicorrelated one-factor model.
    Factor,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = Model::Walk)]
    pub model: Model,
    /// Number of currencies; for `hier`, keeps the first n leaves.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of dates.
    #[arg(long, default_value_t = 1658)]
    pub t: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hierarchy branching factor.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Hierarchy depth.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Deepest-block correlation (`hier`) or pairwise correlation (`factor`).
    #[arg(long, default_value_t = 0.5)]
    pub corr: f64,
    /// Idiosyncratic noise scale (`hier`).
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Loading ratio between hierarchy levels (`hier`).
    #[arg(long, default_value_t = DEFAULT_DECAY)]
    pub decay: f64,
}

/// Where the analyzed panel comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Input {
    Stdin,
    File(PathBuf),
}

/// Resolved settings for one `analyze` run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Input,
    pub out_dir: PathBuf,
    pub bases: BaseSelection,
    pub despike_sigma: f64,
    pub fit_mode: FitMode,
    pub groups: GroupConfig,
    pub lag: usize,
    pub quote: Option<CurrencyCode>,
}

impl RunConfig {
    pub fn from_args(args: &AnalyzeArgs) -> Result<Self> {
        if !(args.despike_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "despike threshold must be positive, got {}",
                args.despike_sigma
            )));
        }
        let groups = match &args.groups {
            Some(path) => GroupConfig::from_json(&fs::read_to_string(path)?)?,
            None => GroupConfig::default_groups(),
        };
        let input = if args.input.as_os_str() == "-" {
            Input::Stdin
        } else {
            Input::File(args.input.clone())
        };
        Ok(RunConfig {
            input,
            out_dir: args.out.clone(),
            bases: args.base.parse()?,
            despike_sigma: args.despike_sigma,
            fit_mode: args.fit_mode.into(),
            groups,
            lag: args.tau,
            quote: args.quote.as_deref().map(CurrencyCode::new).transpose()?,
        })
    }
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &target)?;
    Ok(target)
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

pub struct AnalyzeOutcome {
    pub report: SweepReport,
    pub written: Vec<PathBuf>,
}

impl AnalyzeOutcome {
    pub fn success(&self) -> bool {
        self.report.failures().next().is_none()
    }
}

/// Reads, synchronizes and sweeps the panel, then writes every artifact.
/// `stdin` is read only when the input is `-`.
pub fn cmd_analyze<R: Read>(config: &RunConfig, stdin: R) -> Result<AnalyzeOutcome> {
    let panel = match &config.input {
        Input::Stdin => parse_rates(stdin)?,
        Input::File(path) => parse_rates(fs::File::open(path)?)?,
    };
    let panel = match config.quote {
        Some(q) => panel.with_quote(q)?,
        None => panel,
    };
    let panel = synchronize(&panel)?;
    if let BaseSelection::One(code) = config.bases {
        if !panel.market().contains(&code) {
            return Err(Error::UnknownCurrency(code));
        }
    }
    let sweep = SweepConfig {
        groups: config.groups.clone(),
        despike_sigma: Some(config.despike_sigma),
        fit_mode: config.fit_mode,
        lag: config.lag,
        bases: config.bases,
    };
    let report = sweep_report(&panel, &sweep)?;

    fs::create_dir_all(&config.out_dir)?;
    let dir = config.out_dir.as_path();
    let mut written = Vec::new();
    for outcome in &report.outcomes {
        if let BaseOutcome::Done(a) = outcome {
            let base = a.report.base;
            written.push(write_atomic(
                dir,
                &format!("{base}_mst.dot"),
                &export_tree(&a.tree, TreeFormat::Dot),
            )?);
            written.push(write_atomic(
                dir,
                &format!("{base}_fk.csv"),
                &render(|b| write_degree_distribution(&a.distribution, b))?,
            )?);
            written.push(write_atomic(
                dir,
                &format!("{base}_spectrum.csv"),
                &render(|b| write_spectrum(&a.spectrum, b))?,
            )?);
        }
    }
    written.push(write_atomic(
        dir,
        "report.csv",
        &render(|b| write_report(&report, b))?,
    )?);
    written.push(write_atomic(
        dir,
        "scatter.csv",
        &render(|b| write_scatter(&report, b))?,
    )?);
    let beta = match &report.beta {
        Ok(b) => json!({
            "beta": b.beta,
            "prefactor": b.prefactor,
            "lambda_rm": b.lambda_rm,
            "sse": b.sse,
            "points": report.scatter().len(),
        }),
        Err(reason) => json!({ "error": reason }),
    };
    let mut beta_bytes = serde_json::to_vec_pretty(&beta)?;
    beta_bytes.push(b'\n');
    written.push(write_atomic(dir, "beta_fit.json", &beta_bytes)?);
    Ok(AnalyzeOutcome { report, written })
}

/// Generates the requested synthetic panel and writes it as panel CSV.
pub fn cmd_synth<W: Write>(args: &SynthArgs, out: W) -> Result<()> {
    let panel = match args.model {
        Model::Walk => random_walk_panel(args.n.unwrap_or(60), args.t, args.seed)?,
        Model::Factor => one_factor_panel(args.n.unwrap_or(60), args.corr, args.t, args.seed)?,
        Model::Hier => {
            let spec = HierarchySpec {
                branching: args.m,
                levels: args.levels,
                intra_block_corr: args.corr,
                noise_scale: args.noise,
                decay: args.decay,
                seed: args.seed,
            };
            let full = hierarchical_panel(&spec, args.t)?;
            match args.n {
                Some(n) => full.take_columns(n)?,
                None => full,
            }
        }
    };
    write_rates(&panel, out)
}
