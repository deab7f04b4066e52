//! Image quality: PSNR and mean structural similarity.
//!
//! MSSIM uses an 11×11 Gaussian window with `σ = 1.5`, `K1 = 0.01`,
//! `K2 = 0.03`, dynamic range 255 and population (not sample) variances,
//! averaged over the pixels whose window lies inside the image.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::patches::Image;

const PEAK: f64 = 255.0;
const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn same_dims(a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::dim(format!("images differ in size: {:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

/// `10·log10(255²·N / Σ(a − b)²)`, `+∞` for identical images.
pub fn psnr(reference: &Image, test: &Image) -> Result<f64> {
    same_dims(reference, test)?;
    let mut sse = 0.0;
    Zip::from(reference.view()).and(test.view()).for_each(|&a, &b| {
        sse += (a - b) * (a - b);
    });
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK * reference.len() as f64 / sse).log10())
}

fn gaussian_taps() -> Array1<f64> {
    let r = (WINDOW / 2) as f64;
    let mut t = Array1::from_shape_fn(WINDOW, |i| {
        let x = i as f64 - r;
        (-0.5 * x * x / (WINDOW_SIGMA * WINDOW_SIGMA)).exp()
    });
    let s = t.sum();
    t /= s;
    t
}

/// Separable correlation keeping only fully covered outputs.
fn filter_valid(a: ArrayView2<f64>, taps: &Array1<f64>) -> Array2<f64> {
    let (h, w) = a.dim();
    let n = taps.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut rows = Array2::zeros((oh, w));
    for r in 0..oh {
        for (i, &t) in taps.iter().enumerate() {
            rows.row_mut(r).scaled_add(t, &a.row(r + i));
        }
    }
    let mut out = Array2::zeros((oh, ow));
    for c in 0..ow {
        for (i, &t) in taps.iter().enumerate() {
            out.column_mut(c).scaled_add(t, &rows.column(c + i));
        }
    }
    out
}

/// Mean SSIM over all fully covered 11×11 windows.
pub fn mssim(reference: &Image, test: &Image) -> Result<f64> {
    same_dims(reference, test)?;
    let (h, w) = reference.dims();
    if h < WINDOW || w < WINDOW {
        return Err(Error::dim(format!("MSSIM needs at least {WINDOW}x{WINDOW} pixels, got {h}x{w}")));
    }
    let taps = gaussian_taps();
    let x = reference.view();
    let y = test.view();
    let ux = filter_valid(x, &taps);
    let uy = filter_valid(y, &taps);
    let uxx = filter_valid((&x * &x).view(), &taps);
    let uyy = filter_valid((&y * &y).view(), &taps);
    let uxy = filter_valid((&x * &y).view(), &taps);
    let c1 = (K1 * PEAK).powi(2);
    let c2 = (K2 * PEAK).powi(2);

    let mut total = 0.0;
    Zip::from(&ux)
        .and(&uy)
        .and(&uxx)
        .and(&uyy)
        .and(&uxy)
        .for_each(|&mx, &my, &mxx, &myy, &mxy| {
            let vx = mxx - mx * mx;
            let vy = myy - my * my;
            let vxy = mxy - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * vxy + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
        });
    Ok(total / ux.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub psnr: f64,
    pub mssim: f64,
}

impl QualityReport {
    pub fn compute(reference: &Image, test: &Image) -> Result<Self> {
        Ok(Self {
            psnr: psnr(reference, test)?,
            mssim: mssim(reference, test)?,
        })
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.psnr.is_infinite() {
            write!(f, "PSNR: inf, MSSIM: {:.3}", self.mssim)
        } else {
            write!(f, "PSNR: {:.2} dB, MSSIM: {:.3}", self.psnr, self.mssim)
        }
    }
}
