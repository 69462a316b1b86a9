//! `analyze`: runs the market-efficiency pipeline over a monthly price table.
//!
//! Settings come from an optional `key = value` file (`--config`); any flag
//! given on the command line overrides the file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use efficiency_core::pipeline::{run_pipeline, write_bundle, PipelineConfig};
use serde_json::json;

/// Exit code when every series failed or the run could not start.
const EXIT_ERROR: u8 = 1;
/// Exit code when outputs were written but some series failed.
const EXIT_PARTIAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "analyze", version, about = "Time-varying degree of market efficiency from monthly prices")]
struct Args {
    /// Config file of `key = value` lines; keys are the long flag names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Price table (CSV with a `date` column in YYYY-MM form).
    #[arg(long)]
    input: Option<String>,
    /// Comma-separated columns, each `name` or `name=label`.
    #[arg(long)]
    columns: Option<String>,
    #[arg(long)]
    delimiter: Option<String>,
    #[arg(long)]
    date_column: Option<String>,
    /// Sample window as START:END, e.g. 1924-06:1945-08.
    #[arg(long)]
    window: Option<String>,
    /// Largest AR order considered by SBIC.
    #[arg(long)]
    q_max: Option<String>,
    /// Fixed AR order, skipping SBIC selection.
    #[arg(long)]
    order: Option<String>,
    /// Largest ADF-GLS lag; `auto` uses the default rule.
    #[arg(long)]
    p_max: Option<String>,
    /// ADF-GLS lag criterion: mbic or maic.
    #[arg(long)]
    criterion: Option<String>,
    /// Ratio of coefficient-innovation to error variance.
    #[arg(long)]
    lambda: Option<String>,
    /// Compute bootstrap bands (true/false).
    #[arg(long)]
    bands: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    level: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    singular_tol: Option<String>,
    /// Event table (`start,end,label`) drawn as chart overlay.
    #[arg(long)]
    events: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    workers: Option<String>,
}

impl Args {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let pairs = [
            ("input", &self.input),
            ("columns", &self.columns),
            ("delimiter", &self.delimiter),
            ("date-column", &self.date_column),
            ("window", &self.window),
            ("q-max", &self.q_max),
            ("order", &self.order),
            ("p-max", &self.p_max),
            ("criterion", &self.criterion),
            ("lambda", &self.lambda),
            ("bands", &self.bands),
            ("reps", &self.reps),
            ("level", &self.level),
            ("seed", &self.seed),
            ("singular-tol", &self.singular_tol),
            ("events", &self.events),
            ("out", &self.out),
            ("workers", &self.workers),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }
}

fn report(level: &str, stage: &str, series: Option<&str>, message: &str) {
    eprintln!("{}", json!({ "level": level, "stage": stage, "series": series, "message": message }));
}

fn build_config(args: &Args) -> Result<PipelineConfig, (String, String)> {
    let mut config = PipelineConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ("config".to_string(), format!("{}: {e}", path.display())))?;
        config.apply_file_text(&text).map_err(|e| ("config".into(), e.to_string()))?;
    }
    for (key, value) in args.overrides() {
        config.set(key, value).map_err(|e| ("arguments".into(), e.to_string()))?;
    }
    config.validate().map_err(|e| ("config".into(), e.to_string()))?;
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match build_config(&args) {
        Ok(c) => c,
        Err((stage, message)) => {
            report("error", &stage, None, &message);
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let bundle = match run_pipeline(&config) {
        Ok(b) => b,
        Err(e) => {
            report("error", "input", None, &e.to_string());
            return ExitCode::from(EXIT_ERROR);
        }
    };
    for f in &bundle.failures {
        report("error", f.stage, Some(&f.label), &f.message);
    }
    if let Err(e) = write_bundle(&bundle, &config.out) {
        report("error", "output", None, &e.to_string());
        return ExitCode::from(EXIT_ERROR);
    }
    if bundle.series.is_empty() {
        ExitCode::from(EXIT_ERROR)
    } else if !bundle.failures.is_empty() {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}
