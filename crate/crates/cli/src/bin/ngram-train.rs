//! Train an interpolated Kneser-Ney n-gram model.
//!
//! Same as `syneval ngram-train`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use syneval::ngram::{train_from_file, TrainConfig};

#[derive(Parser)]
#[command(
    name = "ngram-train",
    version,
    about = "Train a Kneser-Ney n-gram model"
)]
struct Args {
    /// Corpus file, one whitespace-tokenised sentence per line.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 5)]
    order: usize,
    #[arg(long, default_value_t = 2)]
    unk_threshold: u64,
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let config = TrainConfig {
        order: args.order,
        unk_threshold: args.unk_threshold,
    };
    match train_from_file(&args.corpus, config).and_then(|m| m.save(&args.out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": {"kind": "error", "message": e.to_string()}})
            );
            ExitCode::from(if e.kind() == syneval::ErrorKind::Validation {
                2
            } else {
                1
            })
        }
    }
}
