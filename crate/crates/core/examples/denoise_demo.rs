//! Adds Gaussian noise to an image, denoises it and reports PSNR/MSSIM.
//!
//! ```text
//! cargo run --release --example denoise_demo -- OPERATOR IMAGE [SIGMA] [ITERS]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use goal::global_op::MeasurementOperator;
use goal::metrics::QualityReport;
use goal::patches::Image;
use goal::reconstruct::{self, ReconstructionProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> goal::Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 3 {
        eprintln!("usage: denoise_demo OPERATOR IMAGE [SIGMA] [ITERS]");
        std::process::exit(2);
    }
    let op = goal::io::read_operator(&PathBuf::from(&args[1]))?;
    let clean = goal::io::read_image(&PathBuf::from(&args[2]))?;
    let sigma: f64 = args.get(3).map_or(20.0, |s| s.parse().expect("sigma"));
    let iters: usize = args.get(4).map_or(reconstruct::DENOISE_ITERS, |s| s.parse().expect("iters"));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, sigma).expect("valid sigma");
    let noisy = Image::new(clean.view().mapv(|v| v + noise.sample(&mut rng)))?;
    let (h, w) = clean.dims();
    let prob = ReconstructionProblem::new(
        MeasurementOperator::identity(h, w),
        noisy.to_vector(),
        op,
        reconstruct::denoise_lambda(sigma),
    )?;
    let start = Instant::now();
    let (out, report) = reconstruct::solve(&prob, &noisy, iters, reconstruct::REL_COST_TOL)?;
    println!("noisy:    {}", QualityReport::compute(&clean, &noisy)?);
    println!("denoised: {}", QualityReport::compute(&clean, &out)?);
    println!(
        "{:?} after {} iterations in {:.1?}",
        report.status,
        report.iterations,
        start.elapsed()
    );
    Ok(())
}
