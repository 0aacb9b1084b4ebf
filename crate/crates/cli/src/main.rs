mod commands;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "rtb", version, about = "Offline RTB experiments: synthetic logs, campaign statistics, CTR models, bid tuning and auction replay")]
struct Cli {
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic campaign with known click probabilities.
    Synth(SynthArgs),
    /// Campaign summary table and per-feature breakdowns.
    Stats(StatsArgs),
    /// Train a CTR model and evaluate it on the test split.
    TrainCtr(TrainArgs),
    /// Tune one strategy's parameter on the training split.
    Tune(TuneArgs),
    /// Tune every strategy on training data and replay it on test data.
    Replay(ReplayArgs),
}

/// Where the logs come from.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Dataset root holding `train/` and `test/`, or a single split directory (stats only).
    #[arg(long, required_unless_present = "real_data", conflicts_with = "real_data")]
    pub input: Option<PathBuf>,
    /// Root of the public release (training2nd, testing2nd, ...), logs decompressed.
    #[arg(long)]
    pub real_data: Option<PathBuf>,
    /// Keep only these advertisers (repeatable).
    #[arg(long)]
    pub advertiser: Vec<u32>,
    /// Column layout of `bid*` files.
    #[arg(long, default_value = "bid")]
    pub schema: String,
    /// Fail on the first malformed line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// CTR model: lr or gbrt.
    #[arg(long, default_value = "lr")]
    pub model: String,
    /// Seed for every stochastic step.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// LR passes over the training data.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// GBRT boosting rounds.
    #[arg(long)]
    pub rounds: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `key = value` generator settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one setting, `key=value` (repeatable).
    #[arg(long = "set")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub advertiser: Option<u32>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Breakdown keys (repeatable); all keys by default.
    #[arg(long)]
    pub feature: Vec<String>,
    /// Breakdown metrics: ctr, market_price, ecpc (repeatable); all by default.
    #[arg(long)]
    pub metric: Vec<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// const, rand or lin.
    #[arg(long)]
    pub strategy: String,
    #[arg(long, default_value = "1/32")]
    pub budget_fraction: String,
    /// Comma-separated parameter grid.
    #[arg(long)]
    pub grid: Option<String>,
    /// KPI weight N for advertisers without a known value.
    #[arg(long, default_value_t = 0)]
    pub conversion_weight: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Strategy columns such as const, rand, mcpc-l, lin-g (repeatable); all six by default.
    #[arg(long)]
    pub strategy: Vec<String>,
    /// Budget fraction such as 1/32 (repeatable); 1/32, 1/8 and 1/2 by default.
    #[arg(long)]
    pub budget_fraction: Vec<String>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub conversion_weight: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let text: Vec<&str> = message
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(|l| l.trim().trim_start_matches("error: "))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{}", error_line("usage", &text.join(" ")));
            return ExitCode::from(2);
        }
    };
    let exec = if cli.sequential { rtb_core::Exec::Sequential } else { rtb_core::Exec::Parallel };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a, exec),
        Command::Stats(a) => commands::stats(&a, exec),
        Command::TrainCtr(a) => commands::train_ctr(&a, exec),
        Command::Tune(a) => commands::tune(&a, exec),
        Command::Replay(a) => commands::replay(&a, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&error_code(&e), &format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}

/// One JSON object per line: `{"error":"<code>","message":"..."}`.
fn error_line(code: &str, message: &str) -> String {
    let mut s = String::from("{\"error\":\"");
    escape_into(&mut s, code);
    s.push_str("\",\"message\":\"");
    escape_into(&mut s, message);
    s.push_str("\"}");
    s
}

fn escape_into(out: &mut String, text: &str) {
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
}

/// Snake-case name of the innermost library error variant, or `failed`.
fn error_code(e: &anyhow::Error) -> String {
    use rtb_core::{bidding, features, logdata, models, replay, stats, synthgen};
    for cause in e.chain() {
        let debug = if let Some(x) = cause.downcast_ref::<replay::ReplayError>() {
            format!("{x:?}")
        } else if let Some(x) = cause.downcast_ref::<bidding::BiddingError>() {
            format!("{x:?}")
        } else if let Some(x) = cause.downcast_ref::<models::ModelError>() {
            format!("{x:?}")
        } else if let Some(x) = cause.downcast_ref::<features::FeatureError>() {
            format!("{x:?}")
        } else if let Some(x) = cause.downcast_ref::<stats::StatsError>() {
            format!("{x:?}")
        } else if let Some(x) = cause.downcast_ref::<synthgen::SynthError>() {
            format!("{x:?}")
        } else if let Some(x) = cause.downcast_ref::<logdata::LineError>() {
            format!("{:?}", x.error)
        } else if let Some(x) = cause.downcast_ref::<logdata::LogError>() {
            format!("{x:?}")
        } else if cause.downcast_ref::<std::io::Error>().is_some() {
            return "io".to_string();
        } else {
            continue;
        };
        return snake(innermost_variant(&debug));
    }
    "failed".to_string()
}

/// Variants that only wrap another library error.
const WRAPPERS: [&str; 5] = ["Bidding", "Replay", "Model", "Feature", "Log"];

/// `Bidding(Replay(FractionOutOfRange("2")))` -> `FractionOutOfRange`.
fn innermost_variant(debug: &str) -> &str {
    let mut rest = debug;
    loop {
        let end = rest.find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).unwrap_or(rest.len());
        let name = &rest[..end];
        match rest[end..].strip_prefix('(') {
            Some(inner) if WRAPPERS.contains(&name) => rest = inner,
            _ => return name,
        }
    }
}

fn snake(name: &str) -> String {
    let mut s = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_ascii_uppercase() {
            if i > 0 {
                s.push('_');
            }
            s.push(c.to_ascii_lowercase());
        } else {
            s.push(c);
        }
    }
    s
}
