//! Reconstruct a synthetic scene with the GSM solver and the TV baseline.
//!
//! cargo run --release --example compare_methods -- [blobs] [seed]

use cassi_gsm::metrics::MetricReport;
use cassi_gsm::scene::{generate_scene, SceneSpec};
use cassi_gsm::solver::{self, TvConfig};
use cassi_gsm::{Dims, ForwardOperator, Mask2D, SolverConfig};

fn main() -> cassi_gsm::Result<()> {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<u64>().expect("integer argument"));
    let blobs = args.next().unwrap_or(12) as usize;
    let seed = args.next().unwrap_or(7);

    let truth = generate_scene(&SceneSpec::new(Dims::new(48, 48, 8)?, blobs, seed))?;
    let op = ForwardOperator::new(Mask2D::random_binary(48, 48, 0.5, 11)?, 8, 2)?;
    let y = op.forward(&truth)?;

    let init = solver::initialize(&y, &op, Default::default())?;
    let (gsm, trace) = solver::run(&y, &op, &SolverConfig::default())?;
    let (tv, _) = solver::tv_baseline(&y, &op, &TvConfig::default())?;

    for (name, x) in [("init", &init), ("gsm", &gsm), ("tv", &tv)] {
        println!(
            "{name:>5}: {}",
            MetricReport::evaluate(&truth, x, 1.0)?.summary()
        );
    }
    println!(
        "gsm trace monotone within stages: {}",
        trace.is_monotone_within_stages()
    );
    Ok(())
}
