//! `sicfet` command-line front end.
//!
//! Exit codes: 0 success, 2 bad input or configuration, 3 output could not be
//! written, 4 a fit stage aborted.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::card::ModelCard;
use crate::config::{Config, SweepKind};
use crate::dataset::{self, MeasurementSet, Region};
use crate::extraction::{self, point_residual, Weighting};
use crate::numerics::SolverOptions;
use crate::presets;
use crate::sweep::{self, Curve};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_OUTPUT: i32 = 3;
pub const EXIT_STAGE_ABORT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "sicfet", version, about = "SiC power MOSFET compact model: sweeps, fitting, validation, export")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when omitted (sweep, export).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Parameter preset to start from.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the `[sweep]` section of the config and write curves as CSV.
    Sweep,
    /// Fit the model to measurement data and write a card plus a report.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Starting card; overrides `--preset` and the config's model section.
        #[arg(long)]
        card: Option<PathBuf>,
    },
    /// Compare a card against measurement data.
    Validate {
        #[arg(long)]
        card: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
    },
    /// Print a card as flat `name=value # unit` lines.
    Export {
        #[arg(long)]
        card: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ExportFormat::Flat)]
        format: ExportFormat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExportFormat {
    Flat,
    Toml,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn output_err(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_OUTPUT,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32, Failure> {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(input)?,
        None => Config::default(),
    };
    let run = || match &cli.command {
        Command::Sweep => cmd_sweep(cli, &config),
        Command::Fit { data, card } => cmd_fit(cli, &config, data, card.as_deref()),
        Command::Validate { card, data } => cmd_validate(cli, &config, card.as_deref(), data),
        Command::Export { card, format } => cmd_export(cli, &config, card.as_deref(), *format),
    };
    match cli.threads {
        Some(0) => Err(input("--threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| input(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Starting card: `--card`, else `--preset`, else the config's model
/// section, else the default preset. Config overrides apply last.
fn resolve_card(cli: &Cli, config: &Config, card: Option<&Path>) -> Result<ModelCard, Failure> {
    let mut c = if let Some(path) = card {
        read_card(path)?
    } else if let Some(name) = &cli.preset {
        presets::by_name(name).ok_or_else(|| input(format!("unknown preset {name:?}")))?
    } else if let Some(path) = &config.model.card {
        read_card(path)?
    } else {
        let name = config.model.preset.as_deref().unwrap_or(presets::PRESETS[0].0);
        presets::by_name(name).ok_or_else(|| input(format!("unknown preset {name:?}")))?
    };
    for (name, value) in &config.model.overrides {
        c.params.set(name, *value).map_err(|e| input(e.to_string()))?;
    }
    c.params.validate().map_err(|e| input(e.to_string()))?;
    Ok(c)
}

fn read_card(path: &Path) -> Result<ModelCard, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| input(format!("cannot read card {}: {e}", path.display())))?;
    ModelCard::parse(&text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn read_data(path: &Path, config: &Config) -> Result<(MeasurementSet, String), Failure> {
    let bytes = std::fs::read(path).map_err(|e| input(format!("cannot read data {}: {e}", path.display())))?;
    let set = dataset::load_measurements(bytes.as_slice()).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let set = dataset::partition_regions(&set, &config.regions).map_err(|e| input(e.to_string()))?;
    Ok((set, hex(&Sha256::digest(&bytes))))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(|e| output_err(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| output_err(Path::new("<stdout>"), e)),
    }
}

/// CSV with one row per curve point.
pub fn curves_csv(curves: &[Curve]) -> String {
    let mut out = String::from("label,x_V,y,converged,tj_K\n");
    for c in curves {
        for ((x, y), m) in c.x.iter().zip(&c.y).zip(&c.meta) {
            let _ = writeln!(out, "{},{x:?},{y:?},{},{:?}", c.label, u8::from(m.converged), m.t_j);
        }
    }
    out
}

fn cmd_sweep(cli: &Cli, config: &Config) -> Result<i32, Failure> {
    let section = config
        .sweep
        .as_ref()
        .ok_or_else(|| input("sweep needs a config with a [sweep] section"))?;
    let card = resolve_card(cli, config, None)?;
    let opts = SolverOptions::default();
    let curves = match section.kind() {
        SweepKind::Transfer => sweep::transfer_sweep(&card.params, &section.spec, &opts),
        SweepKind::Output => sweep::output_sweep(&card.params, &section.spec, &opts),
        SweepKind::Transconductance => sweep::transconductance(&card.params, &section.spec, &opts),
    }
    .map_err(|e| input(format!("sweep: {e}")))?;
    let bad: usize = curves.iter().map(|c| c.meta.iter().filter(|m| !m.converged).count()).sum();
    if bad > 0 {
        eprintln!("warning: {bad} point(s) did not converge");
    }
    emit(cli, &curves_csv(&curves))?;
    Ok(EXIT_OK)
}

fn report_path(card_path: &Path) -> PathBuf {
    let stem = card_path.file_stem().map_or_else(|| "card".into(), |s| s.to_string_lossy().into_owned());
    card_path.with_file_name(format!("{stem}.report.txt"))
}

fn cmd_fit(cli: &Cli, config: &Config, data: &Path, card: Option<&Path>) -> Result<i32, Failure> {
    let out_path = cli.output.clone().ok_or_else(|| input("fit needs --output for the fitted card"))?;
    let start = resolve_card(cli, config, card)?;
    let (set, sha) = read_data(data, config)?;
    if set.is_empty() {
        return Err(input(format!("{} holds no measurements", data.display())));
    }
    let schedule = config.schedule().map_err(input)?;

    let report = extraction::fit_all(&start.params, &set, &schedule);

    let mut fitted = ModelCard::new(start.device_name.clone(), report.final_params.clone());
    fitted.provenance.created = Some(chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    let data_name = data
        .file_name()
        .map_or_else(|| data.display().to_string(), |n| n.to_string_lossy().into_owned());
    fitted.provenance.data_sha256.insert(data_name, sha);
    let stages: Vec<&str> = report.per_stage.iter().map(|s| s.name.as_str()).collect();
    fitted.provenance.notes = Some(format!(
        "fitted from {:?}; stages {}; overall relative rms {:e}{}",
        start.device_name,
        stages.join(","),
        report.overall_rms,
        if report.aborted.is_some() { "; schedule aborted" } else { "" }
    ));

    std::fs::write(&out_path, fitted.to_toml()).map_err(|e| output_err(&out_path, e))?;
    let rpath = report_path(&out_path);
    std::fs::write(&rpath, report.to_text()).map_err(|e| output_err(&rpath, e))?;
    match &report.aborted {
        Some(e) => {
            eprintln!("error: fit aborted: {e}");
            Ok(EXIT_STAGE_ABORT)
        }
        None => {
            println!("fit done: overall relative rms {:e}", report.overall_rms);
            Ok(EXIT_OK)
        }
    }
}

/// Per-region relative RMS and the worst point, as printed by `validate`.
pub fn validation_text(card: &ModelCard, set: &MeasurementSet) -> String {
    let opts = SolverOptions::default();
    let mut out = String::new();
    let mut all = Vec::new();
    for region in Region::ALL {
        let recs: Vec<_> = set.in_region(region).collect();
        if recs.is_empty() {
            let _ = writeln!(out, "{region}: rms n/a (0 points)");
            continue;
        }
        let res: Vec<(f64, &dataset::MeasurementRecord)> = recs
            .iter()
            .map(|r| {
                let v = extraction::model_current(&card.params, r, &opts)
                    .map_or(extraction::PENALTY, |m| point_residual(m, r.id, Weighting::Relative));
                (v, *r)
            })
            .collect();
        let rms = (res.iter().map(|(v, _)| v * v).sum::<f64>() / res.len() as f64).sqrt();
        let (worst, w) = res
            .iter()
            .copied()
            .max_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
            .expect("non-empty");
        let _ = writeln!(
            out,
            "{region}: rms {rms:.6e} ({} points), worst {worst:+.4e} at vgs={} V vds={} V tcase={} K",
            res.len(),
            w.vgs,
            w.vds,
            w.t_case
        );
        all.extend(res.into_iter().map(|(v, _)| v));
    }
    let overall = (all.iter().map(|v| v * v).sum::<f64>() / all.len().max(1) as f64).sqrt();
    let _ = writeln!(out, "overall: rms {overall:.6e} ({} points)", all.len());
    out
}

fn cmd_validate(cli: &Cli, config: &Config, card: Option<&Path>, data: &Path) -> Result<i32, Failure> {
    let card = resolve_card(cli, config, card)?;
    let (set, _) = read_data(data, config)?;
    emit(cli, &validation_text(&card, &set))?;
    Ok(EXIT_OK)
}

fn cmd_export(cli: &Cli, config: &Config, card: Option<&Path>, format: ExportFormat) -> Result<i32, Failure> {
    let card = resolve_card(cli, config, card)?;
    let text = match format {
        ExportFormat::Flat => card.to_flat(),
        ExportFormat::Toml => card.to_toml(),
    };
    emit(cli, &text)?;
    Ok(EXIT_OK)
}

/// Overall relative RMS as printed by `validate`.
pub fn parse_overall_rms(text: &str) -> Option<f64> {
    text.lines()
        .find_map(|l| l.strip_prefix("overall: rms "))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|v| v.parse().ok())
}
