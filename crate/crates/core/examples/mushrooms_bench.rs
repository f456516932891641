//! Runs a benchmark configuration (Mushrooms decision trees by default) and
//! prints the per-cell summary.
//!
//! ```text
//! cargo run --release --example mushrooms_bench -- configs/mushrooms_rf.json
//! ```

use robust_trees::dataeng::{evaluate, summarize};
use robust_trees::ExperimentConfig;
use std::path::PathBuf;

fn main() {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/mushrooms_dt.json"));
    let config = ExperimentConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let records = evaluate(&config).unwrap();
    println!("{:<20} {:<14} {:>3} {:>8} {:>8}", "criterion", "noise", "n", "mean", "sd");
    for row in summarize(&records) {
        println!("{:<20} {:<14} {:>3} {:>8.4} {:>8.4}", row.criterion, row.noise, row.n, row.mean, row.sd);
    }
}
