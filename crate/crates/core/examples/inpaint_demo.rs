//! Removes a random fraction of pixels and inpaints them.
//!
//! ```text
//! cargo run --release --example inpaint_demo -- OPERATOR IMAGE [MISSING] [ITERS]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use goal::global_op::MeasurementOperator;
use goal::metrics::QualityReport;
use goal::reconstruct::{self, ReconstructionProblem};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> goal::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 3 {
        eprintln!("usage: inpaint_demo OPERATOR IMAGE [MISSING] [ITERS]");
        std::process::exit(2);
    }
    let op = goal::io::read_operator(&PathBuf::from(&args[1]))?;
    let clean = goal::io::read_image(&PathBuf::from(&args[2]))?;
    let missing: f64 = args.get(3).map_or(0.5, |s| s.parse().expect("missing fraction"));
    let iters: usize = args.get(4).map_or(reconstruct::INPAINT_ITERS, |s| s.parse().expect("iters"));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (h, w) = clean.dims();
    let observed = Array2::from_shape_simple_fn((h, w), || rng.random::<f64>() >= missing);
    let a = MeasurementOperator::mask(observed.view())?;
    let y = a.measure(&clean)?;
    let prob = ReconstructionProblem::new(a, y, op, reconstruct::INPAINT_LAMBDA)?;
    let baseline = reconstruct::smooth_fill_baseline(&prob)?;
    let init = reconstruct::init_guess(&prob)?;
    let start = Instant::now();
    let (out, report) = reconstruct::solve(&prob, &init, iters, reconstruct::REL_COST_TOL)?;
    println!("baseline:      {}", QualityReport::compute(&clean, &baseline)?);
    println!("reconstructed: {}", QualityReport::compute(&clean, &out)?);
    println!(
        "{:?} after {} iterations in {:.1?}",
        report.status,
        report.iterations,
        start.elapsed()
    );
    Ok(())
}
