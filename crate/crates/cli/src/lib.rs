//! Command-line pipeline: ingest, train, generate, evaluate, report.
//!
//! Every artifact of a run lives in `<out>/run-<hash>`, where the hash covers
//! the data and training keys of the config.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::FixedOffset;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use loadsynth::datapipe::{self, ColumnSpec, DataError, DayMatrix, Units};
use loadsynth::kvfile::KvDoc;
use loadsynth::metrics::{self, MetricsError, MetricsReport};
use loadsynth::nets::{Checkpoint, Model, NetsError};
use loadsynth::synth::{self, SynthError};
use loadsynth::trainer::{self, TrainError, TrainLog};

pub use config::{keys_help, RunConfig, Settings, KEYS};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Diverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Diverged(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<NetsError> for CliError {
    fn from(e: NetsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Diverged { .. } => CliError::Diverged(e.to_string()),
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Fixed artifact names inside a run directory.
pub mod artifacts {
    use std::path::{Path, PathBuf};

    use loadsynth::nets::ModelKind;

    pub fn config(dir: &Path) -> PathBuf {
        dir.join("config.txt")
    }
    pub fn days(dir: &Path) -> PathBuf {
        dir.join("days.csv")
    }
    pub fn checkpoint(dir: &Path, model: ModelKind) -> PathBuf {
        dir.join(format!("checkpoint-{model}.txt"))
    }
    pub fn trainlog(dir: &Path, model: ModelKind) -> PathBuf {
        dir.join(format!("trainlog-{model}.csv"))
    }
    pub fn synthetic(dir: &Path, model: ModelKind) -> PathBuf {
        dir.join(format!("synthetic-{model}.csv"))
    }
    pub fn report(dir: &Path, label: &str) -> PathBuf {
        dir.join(format!("report-{label}.json"))
    }
    pub fn histogram(dir: &Path, label: &str) -> PathBuf {
        dir.join(format!("histogram-{label}.csv"))
    }
    pub fn comparison(dir: &Path) -> PathBuf {
        dir.join("comparison.csv")
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_config(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let path = artifacts::config(dir);
    std::fs::write(&path, cfg.identity_doc().to_string()).map_err(|e| io_err(&path, e))
}

fn require(path: &Path, hint: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} not found; {hint}", path.display())))
    }
}

/// Reads a day matrix written by this tool and returns it in watts.
fn read_watts(path: &Path) -> Result<(DayMatrix, KvDoc), CliError> {
    let (m, meta) = DayMatrix::read_csv(path)?;
    let m = match m.units() {
        Units::Watts => m,
        Units::Normalized => datapipe::denormalize(&m)?,
    };
    Ok((m, meta))
}

/// load_csv, resample to 15 minutes, keep complete days, normalize, and
/// persist `days.csv` in the run directory.
pub fn cmd_ingest(cfg: &RunConfig, out: &mut dyn Write) -> Result<PathBuf, CliError> {
    let s = cfg.settings()?;
    let input =
        s.input.clone().ok_or_else(|| CliError::Usage("no input file; set input=<path> or pass --input".into()))?;
    let spec = ColumnSpec {
        timestamp: s.timestamp_column.clone(),
        value: s.value_column.clone(),
        period_minutes: s.source_period_minutes,
    };
    let series = datapipe::load_csv(&input, &spec)?;
    let source_period = series.period_minutes();
    let gaps = series.gap_count();
    let quarter = datapipe::resample(&series, datapipe::SLOT_MINUTES)?;
    let offset = FixedOffset::east_opt(s.utc_offset_minutes * 60).expect("offset checked in settings");
    let days = datapipe::clean_days(&quarter, s.kind, offset)?;
    let normalized = datapipe::normalize(&days)?;

    let dir = cfg.run_dir();
    ensure_dir(&dir)?;
    write_config(cfg, &dir)?;
    let mut extra = KvDoc::new();
    extra.set("input", input.display());
    extra.set("household", &s.household);
    extra.set("column", &s.value_column);
    extra.set("source_period_minutes", source_period);
    extra.set("source_gaps", gaps);
    let path = artifacts::days(&dir);
    normalized.write_csv(&path, &extra)?;
    writeln!(
        out,
        "kept {} complete days of {} ({} source gaps) -> {}",
        normalized.rows(),
        s.kind,
        gaps,
        path.display()
    )
    .ok();
    Ok(dir)
}

fn save_state(model: &Model, log: &TrainLog, ckpt: &Path, log_path: &Path, hash: &str) -> Result<String, TrainError> {
    let mut c = Checkpoint::new(model.clone());
    c.meta.set("config_hash", hash);
    let id = c.save(ckpt).map_err(|e| TrainError::Io(e.to_string()))?;
    log.write(log_path)?;
    Ok(id)
}

/// Trains the configured model on the run's `days.csv`. With `resume`, an
/// existing checkpoint is continued up to `epochs`.
pub fn cmd_train(cfg: &RunConfig, resume: bool, out: &mut dyn Write) -> Result<String, CliError> {
    let s = cfg.settings()?;
    let dir = cfg.run_dir();
    let days_path = artifacts::days(&dir);
    require(&days_path, "run `ingest` with the same config first")?;
    let (data, _) = DayMatrix::read_csv(&days_path)?;
    let ckpt_path = artifacts::checkpoint(&dir, s.model);
    let log_path = artifacts::trainlog(&dir, s.model);

    let (mut model, mut log) = if resume && ckpt_path.exists() {
        let (c, _) = Checkpoint::load(&ckpt_path)?;
        let m = c.model;
        if m.kind != s.model || m.arch != s.arch || m.seed != s.train.seed {
            return Err(CliError::Usage(format!(
                "{} does not match the config (model, architecture or seed)",
                ckpt_path.display()
            )));
        }
        let mut log = TrainLog::read(&log_path).map_err(CliError::from)?;
        log.truncate_to_epoch(m.epochs_done);
        writeln!(out, "resuming {} from epoch {}", s.model, m.epochs_done).ok();
        (m, log)
    } else {
        (Model::new(s.model, s.arch.clone(), s.train.seed)?, TrainLog::new())
    };

    write_config(cfg, &dir)?;
    let hash = cfg.hash();
    let mut last_id = None;
    let result = trainer::fit(&mut model, &data, &s.train, &mut log, &mut |m, l| {
        last_id = Some(save_state(m, l, &ckpt_path, &log_path, &hash)?);
        Ok(())
    });
    if let Err(e) = result {
        if matches!(e, TrainError::Diverged { .. }) {
            log.write(&log_path).ok();
        }
        return Err(e.into());
    }
    let id = match last_id {
        Some(id) => id,
        // already trained to `epochs`: nothing new ran
        None => save_state(&model, &log, &ckpt_path, &log_path, &hash)?,
    };
    let last = log.records.last().map(|r| r.losses.l_d).unwrap_or(f64::NAN);
    let mse = log.epochs().last().and_then(|e| e.mean_recon_mse);
    write!(out, "trained {} to epoch {} ({} steps), final l_d {last:.6}", s.model, model.epochs_done, model.steps_done)
        .ok();
    if let Some(mse) = mse {
        write!(out, ", recon mse {mse:.6}").ok();
    }
    writeln!(out, "\ncheckpoint {} -> {}", id, ckpt_path.display()).ok();
    Ok(id)
}

/// Samples `n` days from the run's checkpoint into `synthetic-<model>.csv`.
pub fn cmd_generate(cfg: &RunConfig, out: &mut dyn Write) -> Result<PathBuf, CliError> {
    let s = cfg.settings()?;
    let dir = cfg.run_dir();
    let ckpt_path = artifacts::checkpoint(&dir, s.model);
    require(&ckpt_path, "run `train` with the same config first")?;
    let (c, id) = Checkpoint::load(&ckpt_path)?;
    let batch = synth::sample(&c.model, s.n, s.train.seed)?.with_checkpoint_id(id.clone());
    let path = artifacts::synthetic(&dir, s.model);
    synth::export(&batch, &path)?;
    writeln!(out, "generated {} {} days from checkpoint {id} -> {}", s.n, s.model, path.display()).ok();
    Ok(path)
}

/// Compares real and synthetic days, writing `report-<label>.json` and
/// `histogram-<label>.csv`. Defaults to the run's `days.csv` and
/// `synthetic-<model>.csv`; the label is the synthetic set's model, or the
/// file stem when it has none.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    real: Option<&Path>,
    synth_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<PathBuf, CliError> {
    let s = cfg.settings()?;
    let dir = cfg.run_dir();
    let real_path = real.map(Path::to_path_buf).unwrap_or_else(|| artifacts::days(&dir));
    let synth_path = synth_path.map(Path::to_path_buf).unwrap_or_else(|| artifacts::synthetic(&dir, s.model));
    require(&real_path, "run `ingest` first or pass --real")?;
    require(&synth_path, "run `generate` first or pass --synth")?;
    let (real_m, _) = read_watts(&real_path)?;
    let (synth_m, meta) = read_watts(&synth_path)?;
    if real_m.kind() != synth_m.kind() {
        return Err(CliError::Data(format!(
            "real days are {} but synthetic days are {}",
            real_m.kind(),
            synth_m.kind()
        )));
    }
    let mut report = metrics::full_report(&real_m, &synth_m, &s.metrics)?;
    report.model = meta.get("model").map(str::to_string);
    let label = match &report.model {
        Some(m) => m.clone(),
        None => synth_path.file_stem().map(|f| f.to_string_lossy().into_owned()).unwrap_or_else(|| "synth".into()),
    };
    ensure_dir(&dir)?;
    let report_path = artifacts::report(&dir, &label);
    report.write(&report_path)?;
    metrics::write_histogram_csv(&real_m, &synth_m, &s.metrics, &artifacts::histogram(&dir, &label))?;
    writeln!(
        out,
        "{label} vs real ({} days each side: {} / {}): KL {:.6}  W1 {:.3} W  MMD {:.6} -> {}",
        real_m.kind(),
        report.real_days,
        report.synth_days,
        report.kl,
        report.wasserstein,
        report.mmd,
        report_path.display()
    )
    .ok();
    Ok(report_path)
}

fn model_rank(model: &str) -> (u8, &str) {
    match model {
        "gan" => (0, model),
        "vaegan" => (1, model),
        other => (2, other),
    }
}

fn display_model(model: &str) -> &str {
    match model {
        "gan" => "GAN",
        "vaegan" => "VAE-GAN",
        other => other,
    }
}

const KIND_ORDER: [&str; 2] = ["load", "pv"];

/// Side-by-side distances (one row per model; KL, Wasserstein and MMD per
/// series kind) and the load-shape statistics of every report.
pub struct Comparison {
    pub text: String,
    pub csv: String,
}

pub fn compare_reports(reports: &[MetricsReport]) -> Result<Comparison, CliError> {
    if reports.is_empty() {
        return Err(CliError::Data("no reports to compare".into()));
    }
    let label = |r: &MetricsReport| r.model.clone().unwrap_or_else(|| "unknown".into());
    let mut models: Vec<String> = reports.iter().map(label).collect();
    models.sort_by(|a, b| model_rank(a).cmp(&model_rank(b)));
    models.dedup();
    let mut kinds: Vec<&str> = KIND_ORDER.iter().copied().filter(|k| reports.iter().any(|r| r.kind == *k)).collect();
    let mut extra: Vec<&str> = reports.iter().map(|r| r.kind.as_str()).filter(|k| !KIND_ORDER.contains(k)).collect();
    extra.sort();
    extra.dedup();
    kinds.extend(extra);
    let find = |model: &str, kind: &str| -> Result<Option<&MetricsReport>, CliError> {
        let hits: Vec<_> = reports.iter().filter(|r| label(r) == model && r.kind == kind).collect();
        match hits.len() {
            0 => Ok(None),
            1 => Ok(Some(hits[0])),
            _ => Err(CliError::Data(format!("more than one report for {model} on {kind}"))),
        }
    };

    type Pick = fn(&MetricsReport) -> f64;
    let metric_cols: [(&str, Pick, usize); 3] =
        [("KL", |r| r.kl, 4), ("Wasserstein", |r| r.wasserstein, 1), ("MMD", |r| r.mmd, 4)];
    let mut header = vec!["model".to_string()];
    let mut csv_header = vec!["model".to_string()];
    for (name, _, _) in &metric_cols {
        for k in &kinds {
            header.push(format!("{name} ({k})"));
            csv_header.push(format!("{}_{k}", name.to_lowercase()));
        }
    }
    let mut rows = Vec::new();
    let mut csv = csv_header.join(",") + "\n";
    for m in &models {
        let mut row = vec![display_model(m).to_string()];
        let mut csv_row = vec![m.clone()];
        for (_, pick, digits) in &metric_cols {
            for k in &kinds {
                match find(m, k)? {
                    Some(r) => {
                        row.push(format!("{:.*}", digits, pick(r)));
                        csv_row.push(pick(r).to_string());
                    }
                    None => {
                        row.push("-".into());
                        csv_row.push(String::new());
                    }
                }
            }
        }
        rows.push(row);
        csv.push_str(&(csv_row.join(",") + "\n"));
    }

    let mut text = String::from("Distance between real and synthetic distributions\n");
    text.push_str(&table(&header, &rows));
    for k in &kinds {
        for m in &models {
            let Some(r) = find(m, k)? else { continue };
            writeln!(
                text,
                "\nLoad-shape statistics, {} on {k} ({} real / {} synthetic days)",
                display_model(m),
                r.real_days,
                r.synth_days
            )
            .ok();
            let head: Vec<String> = ["parameter", "real mean", "real std", "synth mean", "synth std"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let body: Vec<Vec<String>> = r
                .real_stats
                .fields()
                .iter()
                .zip(r.synth_stats.fields())
                .map(|((name, a), (_, b))| {
                    vec![
                        name.to_string(),
                        format!("{:.2}", a.mean),
                        format!("{:.2}", a.std),
                        format!("{:.2}", b.mean),
                        format!("{:.2}", b.std),
                    ]
                })
                .collect();
            text.push_str(&table(&head, &body));
        }
    }
    Ok(Comparison { text, csv })
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&(rule.join("  ") + "\n"));
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

/// Prints the comparison of `paths` (default: the run's GAN and VAE-GAN
/// reports) and writes it as CSV to `csv_path` (default:
/// `comparison.csv` in the run directory).
pub fn cmd_report(
    cfg: &RunConfig,
    paths: &[PathBuf],
    csv_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<Comparison, CliError> {
    cfg.settings()?;
    let dir = cfg.run_dir();
    let paths: Vec<PathBuf> = if paths.is_empty() {
        let found: Vec<PathBuf> =
            ["gan", "vaegan"].iter().map(|m| artifacts::report(&dir, m)).filter(|p| p.exists()).collect();
        if found.is_empty() {
            return Err(CliError::Data(format!(
                "no reports in {}; run `evaluate` first or pass report paths",
                dir.display()
            )));
        }
        found
    } else {
        paths.to_vec()
    };
    let reports =
        paths.iter().map(|p| MetricsReport::read(p).map_err(CliError::from)).collect::<Result<Vec<_>, _>>()?;
    let cmp = compare_reports(&reports)?;
    let csv_path = csv_path.map(Path::to_path_buf).unwrap_or_else(|| artifacts::comparison(&dir));
    if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    std::fs::write(&csv_path, &cmp.csv).map_err(|e| io_err(&csv_path, e))?;
    write!(out, "{}", cmp.text).ok();
    writeln!(out, "\ncsv -> {}", csv_path.display()).ok();
    Ok(cmp)
}

#[derive(Parser, Debug)]
#[command(name = "loadsynth", version, about = "Synthetic smart-meter day profiles with a VAE-GAN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Config file of key=value lines
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Model kind
    #[arg(long, value_name = "vaegan|gan")]
    model: Option<String>,
    #[arg(long, value_name = "INT")]
    seed: Option<String>,
    /// Directory holding run directories
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override any config key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a meter CSV, resample to 15 min, keep complete days, normalize
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Meter CSV to read
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Train the configured model on the ingested days
    Train {
        #[command(flatten)]
        common: Common,
        /// Continue from the run's checkpoint if one exists
        #[arg(long)]
        resume: bool,
    },
    /// Sample synthetic days from the trained checkpoint
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of days
        #[arg(long, value_name = "INT")]
        n: Option<String>,
    },
    /// Compute KL, Wasserstein, MMD and load-shape statistics
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "INT")]
        bins: Option<String>,
        #[arg(long, value_name = "median|REAL")]
        sigma: Option<String>,
        /// Real days (default: the run's days.csv)
        #[arg(long, value_name = "PATH")]
        real: Option<PathBuf>,
        /// Synthetic days (default: the run's synthetic-<model>.csv)
        #[arg(long, value_name = "PATH")]
        synth: Option<PathBuf>,
    },
    /// Tabulate reports side by side
    Report {
        #[command(flatten)]
        common: Common,
        /// Report files (default: the run's GAN and VAE-GAN reports)
        reports: Vec<PathBuf>,
        /// Where to write the CSV table
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
}

fn resolve(common: &Common, flags: &[(&str, Option<String>)]) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for pair in &common.set {
        cfg.apply_pair(pair)?;
    }
    let named = [
        ("model", common.model.clone()),
        ("seed", common.seed.clone()),
        ("out", common.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in named.iter().chain(flags) {
        if let Some(v) = v {
            cfg.set(k, v.clone())?;
        }
    }
    Ok(cfg)
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Ingest { common, input } => {
            let cfg = resolve(&common, &[("input", input.map(|p| p.display().to_string()))])?;
            cmd_ingest(&cfg, out).map(drop)
        }
        Command::Train { common, resume } => cmd_train(&resolve(&common, &[])?, resume, out).map(drop),
        Command::Generate { common, n } => cmd_generate(&resolve(&common, &[("n", n)])?, out).map(drop),
        Command::Evaluate { common, bins, sigma, real, synth } => {
            let cfg = resolve(&common, &[("bins", bins), ("sigma", sigma)])?;
            cmd_evaluate(&cfg, real.as_deref(), synth.as_deref(), out).map(drop)
        }
        Command::Report { common, reports, csv } => {
            cmd_report(&resolve(&common, &[])?, &reports, csv.as_deref(), out).map(drop)
        }
    }
}

/// The full `clap` command, with the config key table appended to every
/// subcommand's help.
pub fn command() -> clap::Command {
    let help = keys_help();
    let mut cmd = Cli::command();
    for name in ["ingest", "train", "generate", "evaluate", "report"] {
        cmd = cmd.mut_subcommand(name, |s| s.after_help(help.clone()));
    }
    cmd
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = command().try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    write!(out, "{text}").ok();
                    0
                }
                _ => {
                    write!(err, "{text}").ok();
                    1
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            writeln!(err, "error: {e}").ok();
            e.exit_code()
        }
    }
}
