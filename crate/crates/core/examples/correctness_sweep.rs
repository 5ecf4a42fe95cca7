//! Sweeps map-prior correctness and reports mean trajectory error per level.
//!
//! Usage: `cargo run --release --example correctness_sweep [seeds]`

use std::time::Instant;

use pomloc::experiments::{run_correctness_sweep, SweepConfig};

fn main() -> pomloc::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let cfg = SweepConfig {
        seeds,
        ..SweepConfig::default()
    };
    let start = Instant::now();
    let report = run_correctness_sweep(&cfg)?;
    for r in &report.rows {
        println!(
            "seed {:>2}  {:>9}  ate {:7.3}  aligned {:7.3}",
            r.seed, r.label, r.ate, r.ate_aligned
        );
    }
    println!("\nmean over {seeds} seeds:");
    for (label, ate, aligned) in report.means() {
        println!("  {label:>9}  ate {ate:7.3} m  aligned {aligned:7.3} m");
    }
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
