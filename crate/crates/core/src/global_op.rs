//! The global analysis operator `Ω^F` and the measurement operators.
//!
//! `Ω^F` applies the patch operator to every patch of the edge-padded image
//! whose center lies on the grid `{0, d_v, 2d_v, …} × {0, d_h, 2d_h, …}`.
//! The image is padded by `⌊√n/2⌋` replicated pixels per side, so the patch
//! "centered" at `(r, c)` of the original image is the window with top-left
//! corner `(r, c)` of the padded image. Coefficients are stored block by
//! block, row-major over the centers: entry `b·k + i` is atom `i` applied to
//! patch `b = r_index · |c| + c_index`.
//!
//! Both directions are computed with sliding windows; the `K × N` matrix is
//! never formed.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2};

use crate::error::{Error, Result};
use crate::objective::AnalysisOperator;
use crate::par;
use crate::patches::Image;

/// Center rows handled by one parallel work item.
const ROWS_PER_CHUNK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalOperatorConfig {
    pub patch_side: usize,
    pub stride_v: usize,
    pub stride_h: usize,
    pub height: usize,
    pub width: usize,
}

impl GlobalOperatorConfig {
    /// Maximum overlap (`d_v = d_h = 1`).
    pub fn dense(patch_side: usize, height: usize, width: usize) -> Self {
        Self {
            patch_side,
            stride_v: 1,
            stride_h: 1,
            height,
            width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_side == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::param("patch side and image dimensions must be positive"));
        }
        for d in [self.stride_v, self.stride_h] {
            if d == 0 || d > self.patch_side {
                return Err(Error::param(format!(
                    "strides must lie in [1, {}], got {d}",
                    self.patch_side
                )));
            }
        }
        Ok(())
    }

    /// Replicated border width `⌊√n/2⌋`.
    pub fn padding(&self) -> usize {
        self.patch_side / 2
    }

    /// `|r|`, the number of center rows.
    pub fn center_rows(&self) -> usize {
        self.height.div_ceil(self.stride_v)
    }

    /// `|c|`, the number of center columns.
    pub fn center_cols(&self) -> usize {
        self.width.div_ceil(self.stride_h)
    }

    pub fn patch_count(&self) -> usize {
        self.center_rows() * self.center_cols()
    }

    /// `K = k·|r|·|c|` for an operator with `atoms` rows.
    pub fn coefficient_count(&self, atoms: usize) -> usize {
        atoms * self.patch_count()
    }
}

/// Replicates the border pixels `amount` times on every side.
pub fn pad_constant(img: &Image, amount: usize) -> Image {
    Image::from_raw(pad_array(img.view(), amount))
}

fn pad_array(a: ArrayView2<f64>, amount: usize) -> Array2<f64> {
    let (h, w) = a.dim();
    Array2::from_shape_fn((h + 2 * amount, w + 2 * amount), |(r, c)| {
        let rr = r.saturating_sub(amount).min(h - 1);
        let cc = c.saturating_sub(amount).min(w - 1);
        a[[rr, cc]]
    })
}

/// Adjoint of [`pad_constant`]: folds the border back onto the edge pixels.
pub fn pad_adjoint(padded: ArrayView2<f64>, amount: usize) -> Result<Image> {
    let (ph, pw) = padded.dim();
    if ph <= 2 * amount || pw <= 2 * amount {
        return Err(Error::dim(format!(
            "padded array {ph}x{pw} too small for border {amount}"
        )));
    }
    let (h, w) = (ph - 2 * amount, pw - 2 * amount);
    let mut out = Array2::zeros((h, w));
    for ((r, c), &v) in padded.indexed_iter() {
        let rr = r.saturating_sub(amount).min(h - 1);
        let cc = c.saturating_sub(amount).min(w - 1);
        out[[rr, cc]] += v;
    }
    Ok(Image::from_raw(out))
}

fn check_operator(op: &AnalysisOperator, cfg: &GlobalOperatorConfig) -> Result<()> {
    cfg.validate()?;
    if op.patch_side() != cfg.patch_side {
        return Err(Error::dim(format!(
            "operator patch side {} differs from configuration {}",
            op.patch_side(),
            cfg.patch_side
        )));
    }
    Ok(())
}

/// `Ω^F s`.
pub fn apply_global(op: &AnalysisOperator, img: &Image, cfg: &GlobalOperatorConfig) -> Result<Array1<f64>> {
    check_operator(op, cfg)?;
    if img.dims() != (cfg.height, cfg.width) {
        return Err(Error::dim(format!(
            "image is {:?}, configuration expects {}x{}",
            img.dims(),
            cfg.height,
            cfg.width
        )));
    }
    let padded = pad_array(img.view(), cfg.padding());
    let k = op.atoms();
    let nc = cfg.center_cols();
    let omega = op.view();
    let omega_t = omega.t();
    let mut z = Array1::zeros(cfg.coefficient_count(k));
    let chunk_len = ROWS_PER_CHUNK * nc * k;
    let out = z.as_slice_mut().expect("fresh array is contiguous");
    par::for_each_chunk_mut(out, chunk_len, |chunk_idx, out| {
        let first_row = chunk_idx * ROWS_PER_CHUNK;
        let rows = out.len() / (nc * k);
        let patches = gather_patches(padded.view(), cfg, first_row, rows);
        let coeffs = patches.dot(&omega_t);
        // small products may come back column-major
        out.copy_from_slice(coeffs.as_standard_layout().as_slice().expect("standard layout"));
    });
    Ok(z)
}

/// Patch matrix (one column-stacked patch per row) for `rows` center rows
/// starting at center row `first_row`.
fn gather_patches(padded: ArrayView2<f64>, cfg: &GlobalOperatorConfig, first_row: usize, rows: usize) -> Array2<f64> {
    let side = cfg.patch_side;
    let nc = cfg.center_cols();
    let mut out = Array2::zeros((rows * nc, side * side));
    for lr in 0..rows {
        let r = (first_row + lr) * cfg.stride_v;
        for ci in 0..nc {
            let c = ci * cfg.stride_h;
            let mut row = out.row_mut(lr * nc + ci);
            for pc in 0..side {
                for pr in 0..side {
                    row[pc * side + pr] = padded[[r + pr, c + pc]];
                }
            }
        }
    }
    out
}

/// `(Ω^F)ᵀ z`, including the adjoint of the padding.
pub fn apply_global_adjoint(op: &AnalysisOperator, z: ArrayView1<f64>, cfg: &GlobalOperatorConfig) -> Result<Image> {
    check_operator(op, cfg)?;
    let k = op.atoms();
    if z.len() != cfg.coefficient_count(k) {
        return Err(Error::dim(format!(
            "coefficient vector has length {}, expected {}",
            z.len(),
            cfg.coefficient_count(k)
        )));
    }
    let z = z.as_standard_layout();
    let z = z.as_slice().expect("standard layout");
    let pad = cfg.padding();
    let side = cfg.patch_side;
    let (ph, pw) = (cfg.height + 2 * pad, cfg.width + 2 * pad);
    let nr = cfg.center_rows();
    let nc = cfg.center_cols();
    let omega = op.view();

    let chunks = par::chunk_count(nr, ROWS_PER_CHUNK);
    let strips = par::map_collect(chunks, |chunk_idx| {
        let first_row = chunk_idx * ROWS_PER_CHUNK;
        let rows = ROWS_PER_CHUNK.min(nr - first_row);
        let block = &z[first_row * nc * k..(first_row + rows) * nc * k];
        let coeffs = ArrayView2::from_shape((rows * nc, k), block).expect("block shape");
        let patches = coeffs.dot(&omega);
        let top = first_row * cfg.stride_v;
        let strip_h = (rows - 1) * cfg.stride_v + side;
        let mut strip = Array2::<f64>::zeros((strip_h, pw));
        scatter_patches(strip.view_mut(), patches.view(), cfg, rows);
        (top, strip)
    });

    let mut padded = Array2::<f64>::zeros((ph, pw));
    for (top, strip) in strips {
        let h = strip.nrows();
        let mut dst = padded.slice_mut(s![top..top + h, ..]);
        dst += &strip;
    }
    pad_adjoint(padded.view(), pad)
}

fn scatter_patches(mut strip: ArrayViewMut2<f64>, patches: ArrayView2<f64>, cfg: &GlobalOperatorConfig, rows: usize) {
    let side = cfg.patch_side;
    let nc = cfg.center_cols();
    for lr in 0..rows {
        let r = lr * cfg.stride_v;
        for ci in 0..nc {
            let c = ci * cfg.stride_h;
            let row = patches.row(lr * nc + ci);
            for pc in 0..side {
                for pr in 0..side {
                    strip[[r + pr, c + pc]] += row[pc * side + pr];
                }
            }
        }
    }
}

/// Normalized `(2d−1) × (2d−1)` Gaussian with `σ = d/3`.
pub fn gaussian_kernel(factor: usize) -> Result<Array2<f64>> {
    if factor == 0 {
        return Err(Error::param("magnification factor must be positive"));
    }
    let size = 2 * factor - 1;
    let sigma = factor as f64 / 3.0;
    Ok(gaussian_window(size, sigma))
}

/// Normalized `size × size` Gaussian window with standard deviation `sigma`.
pub fn gaussian_window(size: usize, sigma: f64) -> Array2<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let mut k = Array2::from_shape_fn((size, size), |(r, c)| {
        let dr = r as f64 - center;
        let dc = c as f64 - center;
        (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp()
    });
    let total = k.sum();
    k /= total;
    k
}

/// Correlation with `kernel` on an edge-replicated image (same size output).
pub fn blur(img: ArrayView2<f64>, kernel: ArrayView2<f64>) -> Array2<f64> {
    let radius = kernel.nrows() / 2;
    let padded = pad_array(img, radius);
    let (h, w) = img.dim();
    let (kh, kw) = kernel.dim();
    let mut out = Array2::zeros((h, w));
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for i in 0..kh {
                for j in 0..kw {
                    acc += kernel[[i, j]] * padded[[r + i, c + j]];
                }
            }
            out[[r, c]] = acc;
        }
    }
    out
}

/// Adjoint of [`blur`].
pub fn blur_adjoint(img: ArrayView2<f64>, kernel: ArrayView2<f64>) -> Array2<f64> {
    let radius = kernel.nrows() / 2;
    let (h, w) = img.dim();
    let (kh, kw) = kernel.dim();
    let mut padded = Array2::zeros((h + 2 * radius, w + 2 * radius));
    for r in 0..h {
        for c in 0..w {
            let v = img[[r, c]];
            if v == 0.0 {
                continue;
            }
            for i in 0..kh {
                for j in 0..kw {
                    padded[[r + i, c + j]] += kernel[[i, j]] * v;
                }
            }
        }
    }
    pad_adjoint(padded.view(), radius)
        .expect("padded by construction")
        .into_inner()
}

/// Linear measurement model `y = A s`.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementOperator {
    /// Denoising.
    Identity { height: usize, width: usize },
    /// Inpainting: keeps the pixels whose column-major indices are listed
    /// (strictly increasing).
    Mask {
        height: usize,
        width: usize,
        kept: Vec<usize>,
    },
    /// Super-resolution: Gaussian blur followed by keeping every `factor`-th
    /// pixel starting at `⌊factor/2⌋`.
    BlurDecimate {
        height: usize,
        width: usize,
        factor: usize,
        kernel: Array2<f64>,
    },
}

impl MeasurementOperator {
    pub fn identity(height: usize, width: usize) -> Self {
        Self::Identity { height, width }
    }

    /// Mask from a boolean `h × w` array, `true` = observed.
    pub fn mask(observed: ArrayView2<bool>) -> Result<Self> {
        let (height, width) = observed.dim();
        let mut kept = Vec::new();
        for c in 0..width {
            for r in 0..height {
                if observed[[r, c]] {
                    kept.push(c * height + r);
                }
            }
        }
        Self::mask_from_indices(height, width, kept)
    }

    pub fn mask_from_indices(height: usize, width: usize, mut kept: Vec<usize>) -> Result<Self> {
        kept.sort_unstable();
        if kept.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("mask indices must be unique"));
        }
        if kept.last().is_some_and(|&i| i >= height * width) {
            return Err(Error::param("mask index out of range"));
        }
        Ok(Self::Mask { height, width, kept })
    }

    /// Blur + decimation for magnification by `factor` with the default
    /// Gaussian kernel; `height × width` is the high-resolution size.
    pub fn blur_decimate(height: usize, width: usize, factor: usize) -> Result<Self> {
        let kernel = gaussian_kernel(factor)?;
        if height < factor || width < factor {
            return Err(Error::dim("image smaller than the decimation factor"));
        }
        Ok(Self::BlurDecimate {
            height,
            width,
            factor,
            kernel,
        })
    }

    /// Input (image) dimensions.
    pub fn input_dims(&self) -> (usize, usize) {
        match *self {
            Self::Identity { height, width }
            | Self::Mask { height, width, .. }
            | Self::BlurDecimate { height, width, .. } => (height, width),
        }
    }

    /// Dimensions of the decimated grid for [`MeasurementOperator::BlurDecimate`].
    pub fn low_res_dims(&self) -> Option<(usize, usize)> {
        match *self {
            Self::BlurDecimate {
                height, width, factor, ..
            } => {
                let off = factor / 2;
                Some(((height - off).div_ceil(factor), (width - off).div_ceil(factor)))
            }
            _ => None,
        }
    }

    /// Number of measurements `m`.
    pub fn output_len(&self) -> usize {
        match self {
            Self::Identity { height, width } => height * width,
            Self::Mask { kept, .. } => kept.len(),
            Self::BlurDecimate { .. } => {
                let (a, b) = self.low_res_dims().expect("blur-decimate");
                a * b
            }
        }
    }

    /// `A s`. Blur-decimate output is the column-stacked low-resolution image.
    pub fn measure(&self, img: &Image) -> Result<Array1<f64>> {
        if img.dims() != self.input_dims() {
            return Err(Error::dim(format!(
                "image is {:?}, operator expects {:?}",
                img.dims(),
                self.input_dims()
            )));
        }
        Ok(match self {
            Self::Identity { .. } => img.to_vector(),
            Self::Mask { height, kept, .. } => kept
                .iter()
                .map(|&i| img.view()[[i % height, i / height]])
                .collect(),
            Self::BlurDecimate { factor, kernel, .. } => {
                let blurred = blur(img.view(), kernel.view());
                let off = factor / 2;
                let low = blurred.slice(s![off..;*factor, off..;*factor]);
                crate::patches::vectorize_patch(low)
            }
        })
    }

    /// `Aᵀ y`.
    pub fn measure_adjoint(&self, y: ArrayView1<f64>) -> Result<Image> {
        if y.len() != self.output_len() {
            return Err(Error::dim(format!(
                "measurement vector has length {}, expected {}",
                y.len(),
                self.output_len()
            )));
        }
        let (h, w) = self.input_dims();
        Ok(match self {
            Self::Identity { .. } => Image::from_vector(y, h, w)?,
            Self::Mask { kept, .. } => {
                let mut out = Array2::zeros((h, w));
                for (&i, &v) in kept.iter().zip(y.iter()) {
                    out[[i % h, i / h]] = v;
                }
                Image::from_raw(out)
            }
            Self::BlurDecimate { factor, kernel, .. } => {
                let (lh, lw) = self.low_res_dims().expect("blur-decimate");
                let off = factor / 2;
                let mut up = Array2::zeros((h, w));
                for c in 0..lw {
                    for r in 0..lh {
                        up[[off + r * factor, off + c * factor]] = y[c * lh + r];
                    }
                }
                Image::from_raw(blur_adjoint(up.view(), kernel.view()))
            }
        })
    }

    /// `AᵀA s`, used for the fidelity gradient.
    pub fn normal(&self, img: &Image) -> Result<Image> {
        let y = self.measure(img)?;
        self.measure_adjoint(y.view())
    }
}
