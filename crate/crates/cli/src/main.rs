use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pigchase_core::cognitive::ModelParams;
use pigchase_core::game::{load_layout, BoardLayout};
use pigchase_core::record::{Treatment, TreatmentCondition};
use pigchase_core::sim::{
    fit_r2, read_curves, run_batch, run_session_traced, sweep, write_sweep_csv, AgentKind, BatchConfig, SweepGrid,
};
use pigchase_core::stats::{
    analyze, merge_second_coder, read_rows, write_rows_csv, write_rows_jsonl, AnalysisOptions, ScoreField,
};
use pigchase_session::{
    render_export, run_cohort, serve, AssignmentMode, CohortConfig, ExportFilter, ExportFormat, ManualClock,
    SessionStore, StoreConfig, SystemClock,
};

#[derive(Parser)]
#[command(name = "pigchase", version, about = "Pig Chase simulation, analysis and session hosting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Agent {
    Model,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum ZField {
    TotalScore,
    IntelligenceEstimate,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
    Sessions,
    Transcripts,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded batch of model sessions against the A* collaborator.
    Simulate {
        #[arg(long, default_value_t = 150)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model parameters (TOML); defaults apply to missing keys.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Board layout text file.
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Agent::Model)]
        agent: Agent,
        /// Also write the production trace of run 0 to `trace.jsonl`.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// R² of a model curve against each reference curve.
    Fit {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// One batch per point of a parameter grid.
    Sweep {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Clean, test and tabulate participant rows (CSV or JSONL).
    Analyze {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        anova: bool,
        /// Compute coder agreement; an optional `id,labels` CSV replaces the
        /// second coder's labels first.
        #[arg(long, num_args = 0..=1, value_name = "CODES2")]
        kappa: Option<Option<PathBuf>>,
        #[arg(long)]
        figures: bool,
        #[arg(long, default_value_t = 3.0)]
        zscore: f64,
        #[arg(long, value_enum, default_value_t = ZField::TotalScore)]
        zscore_field: ZField,
    },
    /// Play a synthetic cohort through the session store and export it.
    Cohort {
        #[arg(long, default_value_t = 50)]
        per_demographic: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Assignment::Balanced)]
        assignment: Assignment,
        /// Persist the sessions' event logs here as well.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export sessions persisted by `serve` or `cohort`.
    Export {
        #[arg(long, env = "PIGCHASE_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        include_in_progress: bool,
        #[arg(long)]
        include_abandoned: bool,
        #[arg(long)]
        include_duplicates: bool,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the default layout, model parameters and an example sweep grid.
    Init {
        #[arg(long)]
        out: PathBuf,
    },
    /// Host live sessions over HTTP and WebSocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Assignment::Random)]
        assignment: Assignment,
        #[arg(long, default_value_t = 120)]
        timeout_s: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON list of treatment conditions overriding the shipped texts.
        #[arg(long)]
        conditions: Option<PathBuf>,
        #[arg(long, env = "PIGCHASE_DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Assignment {
    Random,
    Balanced,
}

impl From<Assignment> for AssignmentMode {
    fn from(a: Assignment) -> Self {
        match a {
            Assignment::Random => AssignmentMode::Random,
            Assignment::Balanced => AssignmentMode::Balanced,
        }
    }
}

fn layout_from(path: Option<&Path>) -> Result<Arc<BoardLayout>> {
    Ok(Arc::new(match path {
        Some(p) => load_layout(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => BoardLayout::default_layout(),
    }))
}

fn params_from(path: Option<&Path>) -> Result<ModelParams> {
    Ok(match path {
        Some(p) => ModelParams::load(p)?,
        None => ModelParams::default(),
    })
}

fn read_curve_file(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_curves(file)?)
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn simulate(
    runs: usize,
    seed: u64,
    params: Option<&Path>,
    layout: Option<&Path>,
    agent: Agent,
    trace: bool,
    out: &Path,
) -> Result<()> {
    let config = BatchConfig {
        n_runs: runs,
        base_seed: seed,
        model_params: params_from(params)?,
        layout: layout_from(layout)?,
        agent: match agent {
            Agent::Model => AgentKind::Model,
            Agent::Random => AgentKind::RandomKeys,
        },
        ..BatchConfig::default()
    };
    config.model_params.validate()?;
    let summary = run_batch(&config)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("summary.json"), summary.to_json())?;
    fs::write(out.join("curves.csv"), summary.curve_csv())?;
    if trace {
        let s = run_session_traced(&config.model_params, &config.layout, seed, config.rules)?;
        let mut f = fs::File::create(out.join("trace.jsonl"))?;
        for entry in &s.trace {
            serde_json::to_writer(&mut f, entry)?;
            f.write_all(b"\n")?;
        }
    }
    let r = summary.outcome_rates;
    println!(
        "{} runs: caught {:.3}, exited {:.3}, exhausted {:.3}; mean total {:.2}",
        summary.n_runs,
        r.caught,
        r.exited,
        r.exhausted,
        summary.mean_total()
    );
    Ok(())
}

fn fit(model: &Path, reference: &Path) -> Result<()> {
    let model = read_curve_file(model)?;
    let [(_, curve)] = <[_; 1]>::try_from(model.into_iter().collect::<Vec<_>>())
        .map_err(|_| anyhow::anyhow!("model CSV must hold exactly one curve"))?;
    for (group, reference) in read_curve_file(reference)? {
        let name = if group.is_empty() { "reference".to_string() } else { group };
        match fit_r2(&curve, &reference) {
            Ok(r2) => println!("{name}\tR2 = {r2:.4}"),
            Err(e) => println!("{name}\tR2 undefined: {e}"),
        }
    }
    Ok(())
}

fn run_sweep(
    grid: &Path,
    reference: Option<&Path>,
    params: Option<&Path>,
    layout: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let grid = SweepGrid::from_text(&fs::read_to_string(grid)?)?;
    let references = match reference {
        Some(p) => read_curve_file(p)?,
        None => BTreeMap::new(),
    };
    let base =
        BatchConfig { model_params: params_from(params)?, layout: layout_from(layout)?, ..BatchConfig::default() };
    let rows = sweep(&grid, &base, &references)?;
    let mut csv = vec![];
    write_sweep_csv(&mut csv, &grid, &references, &rows)?;
    write_out(out, &csv)
}

#[allow(clippy::too_many_arguments)]
fn run_analyze(
    input: &Path,
    out: &Path,
    anova: bool,
    kappa: Option<Option<&Path>>,
    figures: bool,
    zscore: f64,
    field: ZField,
) -> Result<()> {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let mut rows = read_rows(&text)?;
    if let Some(Some(codes)) = kappa {
        let merged = merge_second_coder(&mut rows, &fs::read_to_string(codes)?)?;
        eprintln!("merged second-coder labels for {merged} participants");
    }
    let options = AnalysisOptions {
        zscore_threshold: zscore,
        zscore_field: match field {
            ZField::TotalScore => ScoreField::TotalScore,
            ZField::IntelligenceEstimate => ScoreField::IntelligenceEstimate,
        },
        anova,
        kappa: kappa.is_some(),
        figures,
    };
    let report = analyze(&rows, &options);
    report.write_to(out)?;
    print!("{}", report.to_markdown());
    Ok(())
}

/// Fixed start time for synthetic cohorts (2024-01-01T00:00:00Z).
const COHORT_EPOCH_MS: u64 = 1_704_067_200_000;

#[allow(clippy::too_many_arguments)]
fn cohort(
    per_demographic: usize,
    seed: u64,
    params: Option<&Path>,
    layout: Option<&Path>,
    assignment: Assignment,
    data_dir: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    let config = StoreConfig {
        layout: layout_from(layout)?,
        assignment: assignment.into(),
        seed,
        data_dir,
        ..StoreConfig::default()
    };
    let clock = ManualClock::new(COHORT_EPOCH_MS);
    let store = SessionStore::new(config, Arc::new(clock.clone()))?;
    let cohort = CohortConfig {
        per_demographic,
        seed,
        params: params_from(params)?,
        clock: Some(clock),
        ..CohortConfig::default()
    };
    let result = run_cohort(&store, &cohort)?;
    let filter = ExportFilter::default();
    let mut rows = store.export_rows(&filter);
    result.attach_labels(&mut rows);
    fs::create_dir_all(out)?;
    write_rows_csv(fs::File::create(out.join("participants.csv"))?, &rows)?;
    write_rows_jsonl(fs::File::create(out.join("participants.jsonl"))?, &rows)?;
    for (format, name) in [(ExportFormat::Sessions, "sessions.jsonl"), (ExportFormat::Transcripts, "transcripts.jsonl")]
    {
        fs::write(out.join(name), render_export(&store, format, &filter)?.1)?;
    }
    println!("{} participants written to {}", rows.len(), out.display());
    Ok(())
}

const EXAMPLE_GRID: &str = "\
runs = 100
seed = 0

[grid]
rotation_bla = [-0.3, -0.15, 0.0]
exit_patience = [1, 2, 3]
";

fn init(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(out.join("layout.txt"), BoardLayout::default_layout().to_text())?;
    fs::write(out.join("params.toml"), ModelParams::default().to_text())?;
    fs::write(out.join("sweep_grid.toml"), EXAMPLE_GRID)?;
    let conditions: Vec<_> = Treatment::ALL.iter().map(|t| TreatmentCondition::standard(*t)).collect();
    fs::write(out.join("conditions.json"), serde_json::to_string_pretty(&conditions)? + "\n")?;
    Ok(())
}

fn load_conditions(path: &Path) -> Result<BTreeMap<Treatment, TreatmentCondition>> {
    let list: Vec<TreatmentCondition> = serde_json::from_str(&fs::read_to_string(path)?)?;
    let mut map: BTreeMap<Treatment, TreatmentCondition> =
        Treatment::ALL.iter().map(|t| (*t, TreatmentCondition::standard(*t))).collect();
    for c in list {
        map.insert(c.code, c);
    }
    Ok(map)
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Simulate { runs, seed, params, layout, agent, trace, out } => {
            simulate(runs, seed, params.as_deref(), layout.as_deref(), agent, trace, &out)
        }
        Command::Fit { model, reference } => fit(&model, &reference),
        Command::Sweep { grid, reference, params, layout, out } => {
            run_sweep(&grid, reference.as_deref(), params.as_deref(), layout.as_deref(), out.as_deref())
        }
        Command::Analyze { input, out, anova, kappa, figures, zscore, zscore_field } => {
            run_analyze(&input, &out, anova, kappa.as_ref().map(|k| k.as_deref()), figures, zscore, zscore_field)
        }
        Command::Cohort { per_demographic, seed, params, layout, assignment, data_dir, out } => {
            cohort(per_demographic, seed, params.as_deref(), layout.as_deref(), assignment, data_dir, &out)
        }
        Command::Export { data_dir, format, include_in_progress, include_abandoned, include_duplicates, out } => {
            if !data_dir.is_dir() {
                bail!("{} is not a directory", data_dir.display());
            }
            let store = SessionStore::new(
                StoreConfig { data_dir: Some(data_dir), ..StoreConfig::default() },
                Arc::new(SystemClock),
            )?;
            let format = match format {
                Format::Csv => ExportFormat::Csv,
                Format::Jsonl => ExportFormat::Jsonl,
                Format::Sessions => ExportFormat::Sessions,
                Format::Transcripts => ExportFormat::Transcripts,
            };
            let filter = ExportFilter { include_in_progress, include_abandoned, include_duplicates };
            write_out(out.as_deref(), &render_export(&store, format, &filter)?.1)
        }
        Command::Init { out } => init(&out),
        Command::Serve { port, host, layout, assignment, timeout_s, seed, conditions, data_dir } => {
            let mut config = StoreConfig {
                layout: layout_from(layout.as_deref())?,
                assignment: assignment.into(),
                timeout_ms: timeout_s * 1000,
                seed,
                data_dir,
                ..StoreConfig::default()
            };
            if let Some(p) = conditions {
                config.conditions = load_conditions(&p)?;
            }
            let store = Arc::new(SessionStore::new(config, Arc::new(SystemClock))?);
            let addr: SocketAddr = format!("{host}:{port}").parse().context("bad host or port")?;
            tokio::runtime::Runtime::new()?.block_on(serve(store, addr))?;
            Ok(())
        }
    }
}
