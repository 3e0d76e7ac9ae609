//! Full suggest/evaluate loops on the 2D bowl benchmark for each algorithm,
//! with the trace written as CSV.

use monobo::benchmarks::BenchmarkId;
use monobo::engine::{run_loop, write_trace_csv, AlgoConfig, AlgoTag, BoState};

fn main() -> monobo::Result<()> {
    let spec = BenchmarkId::F1.spec();
    for algo in AlgoTag::ALL {
        let mut state = BoState::new(
            spec.bounds.clone(),
            spec.target,
            spec.declarations.clone(),
            algo,
            AlgoConfig::default(),
            11,
        )?;
        state.initialize(|x| spec.evaluate(x))?;
        run_loop(&mut state, |x| spec.evaluate(x), 20)?;
        println!("{algo:>9}: best distance {:.5}", state.best_distance().unwrap());
        if algo == AlgoTag::BoMg {
            write_trace_csv(&state, std::io::stdout())?;
        }
    }
    Ok(())
}
