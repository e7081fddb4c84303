use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tokcast::harness::bench::Forecaster;
use tokcast::harness::config::{read_config, sha256_hex, BenchmarkConfig, DatasetRef, ModelRef, TrainConfig};
use tokcast::harness::output::{read_errors, read_record, tables_text, write_run};
use tokcast::harness::pipeline::{load_pool, train_from_pool};
use tokcast::harness::timing::{sidecar_path, time_models, timing_text};
use tokcast::harness::{dm_table, dm_text, run_benchmark};
use tokcast::metrics::DmLoss;
use tokcast::series::{default_quantiles, load_csv, save_csv, CsvOptions, ForecastTask, DEFAULT_LOOKBACK};
use tokcast::{point_forecast, Error, Result};

// Stdout writes that surface errors (a closed pipe, say) instead of panicking.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write;
        write!(std::io::stdout(), $($t)*)?
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write;
        writeln!(std::io::stdout(), $($t)*)?
    }};
}

#[derive(Parser)]
#[command(name = "tokcast", version, about = "Token-based probabilistic load forecasting")]
struct Cli {
    /// JSON config for train, benchmark, dm and time.
    #[arg(long, global = true, env = "TOKCAST_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a long-format CSV and optionally write the cleaned series.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        impute: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate the augmented corpus, train and write a checkpoint.
    Train {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Forecast the step after the end of every series in a CSV.
    Forecast {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = DEFAULT_LOOKBACK)]
        lookback: usize,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 1.0)]
        temperature: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rolling-origin evaluation of one model on one CSV.
    Evaluate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = DEFAULT_LOOKBACK)]
        lookback: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        max_windows: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        impute: bool,
        /// Write the report JSON here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every (model, dataset, horizon) cell of the config.
    Benchmark {
        #[command(flatten)]
        overrides: BenchOverrides,
        #[arg(long)]
        output: PathBuf,
    },
    /// Diebold-Mariano tests between two models of a run.
    Dm {
        model_a: String,
        model_b: String,
        /// Directory of a completed benchmark; recomputed from the config when absent.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, value_parser = parse_loss)]
        loss: Option<DmLoss>,
        #[arg(long)]
        json: bool,
    },
    /// Training time and per-window inference time for each model.
    Time {
        #[command(flatten)]
        overrides: BenchOverrides,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
    },
    /// Check a run's config hash and print its tables.
    Report { run: PathBuf },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    baseline: Option<String>,
}

impl ModelArgs {
    fn to_ref(&self) -> Result<ModelRef> {
        match (&self.checkpoint, &self.baseline) {
            (Some(c), _) => Ok(ModelRef::Checkpoint {
                checkpoint: c.clone(),
                id: None,
            }),
            (None, Some(b)) => Ok(ModelRef::Baseline { baseline: b.parse()? }),
            (None, None) => Err(Error::InvalidConfig("give --checkpoint or --baseline".into())),
        }
    }
}

#[derive(Args, Default)]
struct BenchOverrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    #[arg(long)]
    max_windows: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
}

fn parse_loss(s: &str) -> std::result::Result<DmLoss, String> {
    match s {
        "squared" => Ok(DmLoss::Squared),
        "absolute" => Ok(DmLoss::Absolute),
        _ => Err(format!("unknown loss `{s}` (squared or absolute)")),
    }
}

fn require_config(config: &Option<PathBuf>) -> Result<&Path> {
    config
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("no config given (use --config or TOKCAST_CONFIG)".into()))
}

fn config_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

/// Parse the benchmark config and apply flag overrides. Without overrides the
/// stored text is the file's bytes; otherwise it is the effective config.
fn load_bench(config: &Option<PathBuf>, o: &BenchOverrides) -> Result<(BenchmarkConfig, String)> {
    let path = require_config(config)?;
    let (text, _) = read_config(path)?;
    let mut cfg: BenchmarkConfig = serde_json::from_str(&text)?;
    cfg.resolve_paths(config_dir(path));
    let mut changed = false;
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = &o.$field {
                cfg.$field = v.clone();
                changed = true;
            }
        };
    }
    set!(seed);
    set!(threads);
    set!(repetitions);
    set!(horizons);
    set!(samples);
    if let Some(m) = o.max_windows {
        cfg.max_windows = Some(m);
        changed = true;
    }
    cfg.validate()?;
    let text = if changed { serde_json::to_string_pretty(&cfg)? } else { text };
    Ok((cfg, text))
}

fn ingest(input: &Path, impute: bool, output: Option<&Path>) -> Result<()> {
    let loaded = load_csv(
        input,
        &CsvOptions {
            impute,
            ..Default::default()
        },
    )?;
    outln!("{:<24} {:>8} {:>8} {:>26}", "series_id", "points", "filled", "start");
    for l in &loaded {
        outln!(
            "{:<24} {:>8} {:>8} {:>26}",
            l.series.id,
            l.series.len(),
            l.filled,
            l.series.timestamp(0).to_rfc3339()
        );
    }
    if let Some(out) = output {
        let series: Vec<_> = loaded.into_iter().map(|l| l.series).collect();
        save_csv(out, &series)?;
    }
    Ok(())
}

fn train(config: &Option<PathBuf>, output: Option<PathBuf>, steps: Option<usize>, seed: Option<u64>, threads: Option<usize>) -> Result<()> {
    let path = require_config(config)?;
    let (text, hash) = read_config(path)?;
    let mut cfg: TrainConfig = serde_json::from_str(&text)?;
    cfg.resolve_paths(config_dir(path));
    if let Some(s) = steps {
        cfg.train.steps = s;
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
        cfg.mixup.seed = s;
    }
    if let Some(t) = threads {
        cfg.train.threads = t;
    }
    let output = output
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::InvalidConfig("no checkpoint output path".into()))?;
    cfg.validate()?;
    let pool = load_pool(&cfg)?;
    let trained = train_from_pool(&pool, &cfg)?;
    trained.checkpoint.save(&output)?;
    fs::write(sidecar_path(&output), serde_json::to_string_pretty(&trained.sidecar)?)?;
    outln!("config hash: {hash}");
    outln!("held-out loss: {:.6} -> {:.6}", trained.report.initial_heldout_loss, trained.report.final_heldout_loss);
    if let Some(last) = trained.report.losses.last() {
        outln!("final training loss: {last:.6}");
    }
    outln!("checkpoint: {}", output.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn forecast(model: &ModelArgs, input: &Path, horizon: usize, lookback: usize, samples: usize, temperature: f64, seed: u64, output: &Path) -> Result<()> {
    let cfg: BenchmarkConfig = serde_json::from_value(serde_json::json!({
        "datasets": [],
        "models": [],
        "samples": samples,
        "temperature": temperature,
    }))?;
    let forecaster = Forecaster::from_ref(&model.to_ref()?, &cfg)?;
    let grid = default_quantiles();
    let task = ForecastTask::with_quantiles(horizon, lookback, grid.clone())?;
    let loaded = load_csv(input, &CsvOptions::default())?;
    let mut w = csv::Writer::from_path(output)?;
    let mut header = vec!["series_id".to_string(), "step".into()];
    header.extend(grid.iter().map(|a| format!("q{a}")));
    header.push("point".into());
    w.write_record(&header)?;
    for (i, l) in loaded.iter().enumerate() {
        let v = &l.series.values;
        let context = &v[v.len().saturating_sub(lookback)..];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let qf = forecaster.forecast(context, &task, &mut rng)?;
        let point = point_forecast(&qf);
        for t in 0..horizon {
            let mut rec = vec![l.series.id.clone(), (t + 1).to_string()];
            for &a in &grid {
                let row = qf.row(a).ok_or_else(|| Error::InvalidConfig(format!("missing level {a}")))?;
                rec.push(row[t].to_string());
            }
            rec.push(point[t].to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate(model: &ModelArgs, input: &Path, horizon: usize, lookback: usize, stride: usize, max_windows: Option<usize>, seed: u64, impute: bool, output: Option<&Path>) -> Result<()> {
    let cfg = BenchmarkConfig {
        datasets: vec![DatasetRef {
            id: input
                .file_stem()
                .map_or_else(|| "data".into(), |s| s.to_string_lossy().into_owned()),
            path: input.to_path_buf(),
            impute,
        }],
        models: vec![model.to_ref()?],
        horizons: vec![horizon],
        lookback,
        stride,
        max_windows,
        seed,
        ..serde_json::from_value(serde_json::json!({"datasets": [], "models": []}))?
    };
    let text = serde_json::to_string_pretty(&cfg)?;
    let run = run_benchmark(&cfg, &text)?;
    if let Some(f) = run.record.failed.first() {
        return Err(Error::InvalidConfig(f.error.clone()));
    }
    out!("{}", tables_text(&run.record));
    if let Some(out) = output {
        fs::write(out, serde_json::to_string_pretty(&run.record.reports)?)?;
    }
    Ok(())
}

fn benchmark(config: &Option<PathBuf>, o: &BenchOverrides, output: &Path) -> Result<()> {
    let (cfg, text) = load_bench(config, o)?;
    let run = run_benchmark(&cfg, &text)?;
    write_run(output, &run, &cfg.quantiles)?;
    out!("{}", tables_text(&run.record));
    outln!("config hash: {}", run.record.config_hash);
    Ok(())
}

fn dm(config: &Option<PathBuf>, a: &str, b: &str, run: Option<&Path>, loss: Option<DmLoss>, json: bool) -> Result<()> {
    let (errors, default_loss) = match run {
        Some(dir) => {
            let record = read_record(dir)?;
            let loss = serde_json::from_str::<BenchmarkConfig>(&record.config).map_or(DmLoss::default(), |c| c.dm_loss);
            (read_errors(dir)?, loss)
        }
        None => {
            let (cfg, text) = load_bench(config, &BenchOverrides::default())?;
            (run_benchmark(&cfg, &text)?.errors, cfg.dm_loss)
        }
    };
    let rows = dm_table(&errors, a, b, loss.unwrap_or(default_loss))?;
    if json {
        outln!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        out!("{}", dm_text(&rows, a, b));
    }
    Ok(())
}

fn time(config: &Option<PathBuf>, o: &BenchOverrides, horizon: Option<usize>, runs: usize) -> Result<()> {
    let (cfg, _) = load_bench(config, o)?;
    let h = horizon.unwrap_or(cfg.horizons[0]);
    out!("{}", timing_text(&time_models(&cfg, h, runs)?));
    Ok(())
}

fn report(run: &Path) -> Result<()> {
    let record = read_record(run)?;
    if !record.verify() {
        return Err(Error::InvalidConfig(format!(
            "config hash mismatch: recorded {}, stored config hashes to {}",
            record.config_hash,
            sha256_hex(record.config.as_bytes())
        )));
    }
    out!("{}", tables_text(&record));
    outln!("config hash: {} (verified)", record.config_hash);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, impute, output } => ingest(&input, impute, output.as_deref()),
        Command::Train {
            output,
            steps,
            seed,
            threads,
        } => train(&cli.config, output, steps, seed, threads),
        Command::Forecast {
            model,
            input,
            horizon,
            lookback,
            samples,
            temperature,
            seed,
            output,
        } => forecast(&model, &input, horizon, lookback, samples, temperature, seed, &output),
        Command::Evaluate {
            model,
            input,
            horizon,
            lookback,
            stride,
            max_windows,
            seed,
            impute,
            output,
        } => evaluate(&model, &input, horizon, lookback, stride, max_windows, seed, impute, output.as_deref()),
        Command::Benchmark { overrides, output } => benchmark(&cli.config, &overrides, &output),
        Command::Dm {
            model_a,
            model_b,
            run,
            loss,
            json,
        } => dm(&cli.config, &model_a, &model_b, run.as_deref(), loss, json),
        Command::Time {
            overrides,
            horizon,
            runs,
        } => time(&cli.config, &overrides, horizon, runs),
        Command::Report { run } => report(&run),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

