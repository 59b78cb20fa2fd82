use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};

use oriented_assign::analysis::{prediction_oracle, run_sweep, synth_population};
use oriented_assign::io::{
    emit_assignment, emit_imbalance, emit_sweep, parse_dota_reader, record_to_gt, ClassMap,
    EngineConfig, ReportFormat,
};
use oriented_assign::{assign, build_prior_grid, max_iou_assign, Error, MaxIouConfig, Prediction};

#[derive(Parser)]
#[command(
    name = "oriented-assign",
    version,
    about = "Coarse-to-fine label assignment for oriented objects"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Assign labels for one annotated image.
    Assign {
        #[arg(long)]
        config: PathBuf,
        /// DOTA annotation file.
        #[arg(long)]
        ann: PathBuf,
        /// Image size as WIDTHxHEIGHT.
        #[arg(long, value_parser = parse_size)]
        image_size: (u32, u32),
        /// JSON array of per-prior predictions; the noiseless oracle is used when absent.
        #[arg(long)]
        preds: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Newline-separated category names; defaults to the DOTA-v2.0 classes.
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Run the angle/scale imbalance sweep for MaxIoU and the coarse-to-fine assigner.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// JSON report, or a CSV stem: `<stem>.max_iou.csv` and `<stem>.dcfl.csv`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Time each stage of the sweep.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let w: u32 = w.parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad height `{h}`"))?;
    if w == 0 || h == 0 {
        return Err("image size must be positive".into());
    }
    Ok((w, h))
}

enum Failure {
    Input(Error),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidConfig(format!("cannot open {}: {e}", path.display())))
}

fn load_classes(path: Option<&Path>) -> Result<ClassMap, Error> {
    let Some(path) = path else {
        return Ok(ClassMap::dota_v2());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    Ok(ClassMap::from_names(
        text.lines().map(str::trim).filter(|l| !l.is_empty()),
    ))
}

fn load_preds(path: &Path) -> Result<Vec<Prediction>, Error> {
    let preds: Vec<Prediction> = serde_json::from_reader(open(path)?)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    for p in &preds {
        p.validate()?;
    }
    Ok(preds)
}

fn run_assign(
    config: &Path,
    ann: &Path,
    image_size: (u32, u32),
    preds: Option<&Path>,
    out: &Path,
    format: Format,
    classes: Option<&Path>,
) -> Result<(), Failure> {
    let cfg = EngineConfig::from_path(config)?;
    let classes = load_classes(classes)?;
    let records = parse_dota_reader(open(ann)?)?;
    let gts = records
        .iter()
        .map(|r| record_to_gt(r, &classes))
        .collect::<Result<Vec<_>, _>>()?;
    let priors = build_prior_grid(&cfg.fpn, image_size)?;
    let preds = match preds {
        Some(p) => load_preds(p)?,
        None => prediction_oracle(&priors, &gts, 0.0, cfg.seed)?,
    };
    let result = assign(&priors, &gts, &preds, &cfg.assigner)?;
    result
        .check_invariants(cfg.assigner.k, cfg.assigner.q)
        .map_err(Failure::Invariant)?;
    emit_assignment(&result, &gts, format.into(), &mut create(out)?)?;
    Ok(())
}

fn csv_path(stem: &Path, name: &str) -> PathBuf {
    let mut s = stem.with_extension("").into_os_string();
    s.push(format!(".{name}.csv"));
    PathBuf::from(s)
}

fn run_analyze(config: &Path, out: &Path, format: Format) -> Result<(), Failure> {
    let cfg = EngineConfig::from_path(config)?;
    let run = run_sweep(
        &cfg.fpn,
        &cfg.assigner,
        &cfg.population_or_default(),
        cfg.seed,
    )?;
    run.dcfl
        .check_invariants(cfg.assigner.k, cfg.assigner.q)
        .map_err(Failure::Invariant)?;
    match format {
        Format::Json => emit_sweep(&run.report, &mut create(out)?)?,
        Format::Csv => {
            for (name, rep) in [("max_iou", &run.report.max_iou), ("dcfl", &run.report.dcfl)] {
                emit_imbalance(rep, ReportFormat::Csv, &mut create(&csv_path(out, name))?)?;
            }
        }
    }
    Ok(())
}

fn timed<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let v = f();
    report_time(label, t.elapsed());
    v
}

fn report_time(label: &str, d: Duration) {
    println!("{label:<12} {:>10.3} ms", d.as_secs_f64() * 1e3);
}

fn run_bench(config: &Path) -> Result<(), Failure> {
    let cfg = EngineConfig::from_path(config)?;
    let pop = cfg.population_or_default();
    let gts = timed("population", || synth_population(&pop))?;
    let size = (pop.image_size[0], pop.image_size[1]);
    let priors = timed("priors", || build_prior_grid(&cfg.fpn, size))?;
    let preds = timed("oracle", || prediction_oracle(&priors, &gts, 0.0, cfg.seed))?;
    let result = timed("dcfl", || assign(&priors, &gts, &preds, &cfg.assigner))?;
    timed("max_iou", || {
        max_iou_assign(&priors, &gts, &MaxIouConfig::default())
    })?;
    println!(
        "gts {} priors {} positives {}",
        gts.len(),
        priors.len(),
        result.positive_counts().iter().sum::<usize>()
    );
    std::io::stdout().flush().map_err(Error::from)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Assign {
            config,
            ann,
            image_size,
            preds,
            out,
            format,
            classes,
        } => run_assign(
            config,
            ann,
            *image_size,
            preds.as_deref(),
            out,
            *format,
            classes.as_deref(),
        ),
        Command::Analyze {
            config,
            out,
            format,
        } => run_analyze(config, out, *format),
        Command::Bench { config } => run_bench(config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("internal invariant violated: {msg}");
            ExitCode::from(2)
        }
    }
}
