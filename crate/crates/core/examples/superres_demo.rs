//! Downsamples images bicubically by a factor, magnifies them back and
//! compares against plain bicubic upsampling.
//!
//! ```text
//! cargo run --release --example superres_demo -- OPERATOR FACTOR IMAGE...
//! ```

use std::path::PathBuf;
use std::time::Instant;

use goal::global_op::MeasurementOperator;
use goal::metrics::QualityReport;
use goal::reconstruct::{self, ReconstructionProblem};
use goal::resize;

fn main() -> goal::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 4 {
        eprintln!("usage: superres_demo OPERATOR FACTOR IMAGE...");
        std::process::exit(2);
    }
    let op = goal::io::read_operator(&PathBuf::from(&args[1]))?;
    let factor: usize = args[2].parse().expect("factor");
    for path in &args[3..] {
        let clean = goal::io::read_image(&PathBuf::from(path))?;
        let (h, w) = clean.dims();
        let low = resize::bicubic(&clean, h / factor, w / factor)?;
        let a = MeasurementOperator::blur_decimate(h, w, factor)?;
        let prob = ReconstructionProblem::new(a, low.to_vector(), op.clone(), reconstruct::SUPERRES_LAMBDA)?;
        let init = reconstruct::init_guess(&prob)?;
        let start = Instant::now();
        let (out, report) = reconstruct::solve(&prob, &init, reconstruct::SUPERRES_ITERS, reconstruct::REL_COST_TOL)?;
        println!("{path}");
        println!("  bicubic: {}", QualityReport::compute(&clean, &init)?);
        println!("  goal:    {}", QualityReport::compute(&clean, &out)?);
        println!("  {:?} after {} iterations in {:.1?}", report.status, report.iterations, start.elapsed());
    }
    Ok(())
}
