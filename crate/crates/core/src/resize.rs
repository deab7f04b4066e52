//! Separable bicubic resampling (Keys kernel, `a = −0.5`).
//!
//! Output pixel `x` samples the input at `(x + 0.5)/scale − 0.5`. When
//! shrinking, the kernel is stretched by `1/scale` to low-pass the input
//! first. Borders replicate the edge pixels.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::patches::Image;

/// Keys cubic convolution kernel with `a = −0.5`.
pub fn cubic(x: f64) -> f64 {
    let a = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Sparse interpolation weights for one axis: for each output index the
/// first input index and the weights starting there (before clamping).
struct AxisWeights {
    first: Vec<isize>,
    weights: Vec<Vec<f64>>,
}

fn axis_weights(in_len: usize, out_len: usize) -> AxisWeights {
    let scale = out_len as f64 / in_len as f64;
    let stretch = if scale < 1.0 { scale } else { 1.0 };
    let support = 2.0 / stretch;
    let mut first = Vec::with_capacity(out_len);
    let mut weights = Vec::with_capacity(out_len);
    for x in 0..out_len {
        let center = (x as f64 + 0.5) / scale - 0.5;
        let lo = (center - support).floor() as isize;
        let hi = (center + support).ceil() as isize;
        let mut w: Vec<f64> = (lo..=hi)
            .map(|i| stretch * cubic(stretch * (center - i as f64)))
            .collect();
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        first.push(lo);
        weights.push(w);
    }
    AxisWeights { first, weights }
}

fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

fn resize_rows(a: ArrayView2<f64>, out_h: usize) -> Array2<f64> {
    let (h, w) = a.dim();
    let aw = axis_weights(h, out_h);
    let mut out = Array2::zeros((out_h, w));
    for r in 0..out_h {
        for (j, &wt) in aw.weights[r].iter().enumerate() {
            let src = clamp_index(aw.first[r] + j as isize, h);
            out.row_mut(r).scaled_add(wt, &a.row(src));
        }
    }
    out
}

/// Resamples `img` to `out_h × out_w`.
pub fn bicubic(img: &Image, out_h: usize, out_w: usize) -> Result<Image> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::dim("output size must be positive"));
    }
    let rows = resize_rows(img.view(), out_h);
    let both = resize_rows(rows.t(), out_w);
    Ok(Image::from_raw(both.t().as_standard_layout().into_owned()))
}

/// Resamples by a uniform factor, rounding the output size up.
pub fn bicubic_scale(img: &Image, scale: f64) -> Result<Image> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param(format!("scale must be positive, got {scale}")));
    }
    let out_h = (img.height() as f64 * scale).ceil() as usize;
    let out_w = (img.width() as f64 * scale).ceil() as usize;
    bicubic(img, out_h, out_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_interpolates() {
        assert_eq!(cubic(0.0), 1.0);
        assert_eq!(cubic(1.0), 0.0);
        assert_eq!(cubic(2.0), 0.0);
        // partition of unity at a half-integer offset
        let s: f64 = [-1.5, -0.5, 0.5, 1.5].iter().map(|&x| cubic(x)).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cubic(0.5), 0.5625, epsilon = 1e-15);
    }

    #[test]
    fn same_size_is_identity() {
        let img = Image::new(Array2::from_shape_fn((7, 5), |(r, c)| (r * r + 3 * c) as f64)).unwrap();
        let out = bicubic(&img, 7, 5).unwrap();
        for (a, b) in out.view().iter().zip(img.view().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn constants_are_preserved() {
        let img = Image::filled(9, 12, 77.0);
        for (h, w) in [(3, 4), (27, 36), (5, 20)] {
            let out = bicubic(&img, h, w).unwrap();
            assert_eq!(out.dims(), (h, w));
            assert!(out.view().iter().all(|&v| (v - 77.0).abs() < 1e-12));
        }
    }

    #[test]
    fn upsampling_hits_source_samples() {
        // with factor 3 the output pixel 3i + 1 sits exactly on input i
        let img = Image::new(Array2::from_shape_fn((6, 6), |(r, c)| ((r * 7 + c * 13) % 11) as f64)).unwrap();
        let up = bicubic(&img, 18, 18).unwrap();
        for r in 0..6 {
            for c in 0..6 {
                assert_abs_diff_eq!(up.view()[[3 * r + 1, 3 * c + 1]], img.view()[[r, c]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn downsampling_linear_ramp_stays_linear_inside() {
        let img = Image::new(Array2::from_shape_fn((30, 30), |(_, c)| c as f64)).unwrap();
        let down = bicubic(&img, 10, 10).unwrap();
        // interior output pixel x samples input 3x + 1
        for c in 2..8 {
            assert_abs_diff_eq!(down.view()[[5, c]], (3 * c + 1) as f64, epsilon = 1e-10);
        }
    }
}
