use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use wimax_sim::config::{ConfigDoc, ScenarioId, SimConfig};
use wimax_sim::error::{ConfigError, SimError};
use wimax_sim::scenario::all_scenarios;
use wimax_sim::stats::{compare, downsample, emit_csv, ScenarioSummary, StatsRecord};

/// Run WiMAX uplink link-adaptation scenarios and write per-frame CSVs.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// qpsk12, amc-a, amc-b, amc-a-harq or all
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Average the CSV into bins of this many seconds.
    #[arg(long)]
    downsample: Option<f64>,
}

enum Selection {
    One(ScenarioId),
    All,
}

fn load(args: &Args) -> Result<(Selection, SimConfig), ConfigError> {
    let (mut doc, base_dir) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
            (ConfigDoc::parse(&text)?, path.parent().map(Path::to_path_buf))
        }
        None => (ConfigDoc::default(), None),
    };
    let selection = match args.scenario.as_deref().or(doc.get("scenario")) {
        None => return Err(ConfigError::MissingKey("scenario".into())),
        Some("all") => Selection::All,
        Some(s) => Selection::One(s.parse()?),
    };
    let preset = match selection {
        Selection::One(id) => id,
        Selection::All => ScenarioId::Qpsk12,
    };
    doc.set("scenario", preset.slug());
    if let Some(seed) = args.seed {
        doc.set("seed", seed.to_string());
    }
    if let Some(d) = args.duration {
        doc.set("duration", d.to_string());
    }
    if let Some(bin) = args.downsample {
        if !(bin > 0.0) {
            return Err(ConfigError::Invalid {
                key: "--downsample".into(),
                message: "must be positive".into(),
            });
        }
    }
    Ok((selection, SimConfig::from_doc(&doc, base_dir.as_deref())?))
}

fn write_outputs(
    args: &Args,
    config: &SimConfig,
    records: &[StatsRecord],
) -> Result<ScenarioSummary, SimError> {
    let summary = ScenarioSummary::from_records(config, records)?;
    let slug = config.scenario.slug();
    let csv_path = args.out.join(format!("{slug}.csv"));
    match args.downsample {
        Some(bin) => emit_csv(&downsample(records, config.frame_duration_s(), bin), &csv_path)?,
        None => emit_csv(records, &csv_path)?,
    }
    let summary_path = args.out.join(format!("{slug}.summary.txt"));
    std::fs::write(&summary_path, summary.to_text()).map_err(|source| SimError::Io {
        path: summary_path,
        source,
    })?;
    Ok(summary)
}

fn execute(args: &Args, selection: Selection, base: SimConfig) -> Result<(), SimError> {
    std::fs::create_dir_all(&args.out).map_err(|source| SimError::Io {
        path: args.out.clone(),
        source,
    })?;
    let configs = match selection {
        Selection::One(_) => vec![base],
        Selection::All => all_scenarios(&base),
    };
    let results: Vec<Result<Vec<StatsRecord>, SimError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| scope.spawn(move || wimax_sim::run(cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });

    let mut summaries = Vec::new();
    for (cfg, records) in configs.iter().zip(results) {
        let summary = write_outputs(args, cfg, &records?)?;
        print!("{}", summary.to_text());
        println!();
        summaries.push(summary);
    }
    if summaries.len() > 1 {
        let report = compare(&summaries);
        let path = args.out.join("comparison.csv");
        let file = std::fs::File::create(&path).map_err(|source| SimError::Io {
            path: path.clone(),
            source,
        })?;
        report.write_csv(file).map_err(|e| SimError::Io {
            path,
            source: std::io::Error::other(e.to_string()),
        })?;
        print!("{}", report.to_text());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (selection, config) = match load(&args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&args, selection, config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(SimError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e @ SimError::Invariant { .. }) => {
            eprintln!("aborted: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
