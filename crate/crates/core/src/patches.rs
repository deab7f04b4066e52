//! Grayscale images and training-set construction.
//!
//! Patches are vectorized by stacking their columns (column-major), and the
//! same convention is used by the global operator. Mixing conventions between
//! learning and reconstruction would silently scramble the operator.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::objective::TrainingSet;
use crate::par;

/// A real-valued grayscale image, `h` rows by `w` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Array2<f64>,
}

impl Image {
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::dim("image must have at least one pixel"));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("image contains non-finite pixels".into()));
        }
        Ok(Self { pixels })
    }

    /// Skips the finiteness scan; for intermediate solver images.
    pub(crate) fn from_raw(pixels: Array2<f64>) -> Self {
        Self { pixels }
    }

    pub fn filled(h: usize, w: usize, value: f64) -> Self {
        Self {
            pixels: Array2::from_elem((h, w), value),
        }
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.pixels.view()
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut Array2<f64> {
        &mut self.pixels
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.pixels
    }

    /// Column-stacked pixel vector.
    pub fn to_vector(&self) -> Array1<f64> {
        vectorize_patch(self.pixels.view())
    }

    /// Inverse of [`Image::to_vector`].
    pub fn from_vector(v: ArrayView1<f64>, h: usize, w: usize) -> Result<Self> {
        if v.len() != h * w {
            return Err(Error::dim(format!("vector of length {} is not {h}x{w}", v.len())));
        }
        Ok(Self {
            pixels: Array2::from_shape_fn((h, w), |(r, c)| v[c * h + r]),
        })
    }

    /// Copy of the `rows × cols` window with top-left corner `(r0, c0)`.
    pub fn crop(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Result<Image> {
        if r0 + rows > self.height() || c0 + cols > self.width() || rows == 0 || cols == 0 {
            return Err(Error::dim(format!(
                "crop {rows}x{cols} at ({r0},{c0}) outside {}x{}",
                self.height(),
                self.width()
            )));
        }
        Ok(Self {
            pixels: self.pixels.slice(s![r0..r0 + rows, c0..c0 + cols]).to_owned(),
        })
    }
}

/// Column-major vectorization: `[[a, c], [b, d]] ↦ (a, b, c, d)`.
pub fn vectorize_patch(patch: ArrayView2<f64>) -> Array1<f64> {
    patch.t().iter().copied().collect()
}

/// Inverse of [`vectorize_patch`] for a square patch.
pub fn devectorize(v: ArrayView1<f64>, side: usize) -> Result<Array2<f64>> {
    if v.len() != side * side {
        return Err(Error::dim(format!("vector of length {} is not {side}x{side}", v.len())));
    }
    Ok(Array2::from_shape_fn((side, side), |(r, c)| v[c * side + r]))
}

/// Draws `count` random patches, one per counter value `i` of a
/// `(seed, i)`-keyed stream, so the result is identical for serial and
/// parallel extraction.
///
/// Each draw picks an image uniformly, then a valid top-left corner
/// uniformly, vectorizes the patch and normalizes it to unit norm. Zero
/// patches are rejected and redrawn from the same stream.
pub fn extract_training_set(images: &[Image], patch_side: usize, count: usize, seed: u64) -> Result<TrainingSet> {
    if images.is_empty() {
        return Err(Error::Extraction("no training images".into()));
    }
    if patch_side == 0 || count == 0 {
        return Err(Error::param("patch side and sample count must be positive"));
    }
    for (i, img) in images.iter().enumerate() {
        if img.height() < patch_side || img.width() < patch_side {
            return Err(Error::Extraction(format!(
                "image {i} ({}x{}) is smaller than the patch",
                img.height(),
                img.width()
            )));
        }
    }
    let has_nonzero = images.iter().any(|img| img.view().iter().any(|&v| v != 0.0));
    if !has_nonzero {
        return Err(Error::Extraction("every patch is zero".into()));
    }

    let n = patch_side * patch_side;
    let columns = par::map_collect(count, |i| draw_patch(images, patch_side, seed, i as u64));
    let mut data = Array2::zeros((n, count));
    for (mut col, v) in data.columns_mut().into_iter().zip(columns) {
        col.assign(&v?);
    }
    TrainingSet::new(data)
}

/// Upper bound on redraws for a single sample before giving up.
const MAX_REDRAWS: usize = 10_000;

fn draw_patch(images: &[Image], side: usize, seed: u64, index: u64) -> Result<Array1<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    for _ in 0..MAX_REDRAWS {
        let img = &images[rng.random_range(0..images.len())];
        let r = rng.random_range(0..=img.height() - side);
        let c = rng.random_range(0..=img.width() - side);
        let mut v = vectorize_patch(img.view().slice(s![r..r + side, c..c + side]));
        let nrm = v.dot(&v).sqrt();
        if nrm > 0.0 {
            v /= nrm;
            return Ok(v);
        }
    }
    Err(Error::Extraction(format!("sample {index}: only zero patches found")))
}
