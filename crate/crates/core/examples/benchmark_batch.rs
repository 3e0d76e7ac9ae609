//! Paired batch comparison on one synthetic benchmark.
//!
//! cargo run --release -p monobo --example benchmark_batch -- f1 20 30 7

use std::time::Instant;

use monobo::benchmarks::{run_batch, text_summary, BenchmarkId};
use monobo::engine::{AlgoConfig, AlgoTag};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let id: BenchmarkId = args.first().map(String::as_str).unwrap_or("f1").parse()?;
    let trials: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
    let budget: usize = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(30);
    let seed: u64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(7);

    let started = Instant::now();
    let report = run_batch(&id.spec(), &AlgoTag::ALL, trials, budget, seed, &AlgoConfig::default())?;
    print!("{}", text_summary(&report));
    println!("elapsed {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
