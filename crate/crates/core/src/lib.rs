//! Analysis operator learning on the oblique manifold (GOAL) and
//! analysis-prior image reconstruction.
//!
//! The crate is split along the pipeline:
//!
//! * [`oblique`]: geometry of `OB(n, k)`: tangent projection, geodesics,
//!   parallel transport.
//! * [`objective`]: the learning cost (smoothed lp sparsity of the analyzed
//!   training patches plus rank and coherence barriers) and its gradients.
//! * [`cg`]: geometric nonlinear conjugate gradient with the hybrid
//!   Dai-Yuan/Hestenes-Stiefel update and Armijo backtracking, shared by
//!   operator learning and image reconstruction.
//! * [`patches`]: training-set construction from grayscale images.
//! * [`global_op`]: the sliding-window global analysis operator and the
//!   measurement operators (identity, pixel mask, blur + decimation).
//! * [`reconstruct`]: the reconstruction cost and solver.
//! * [`metrics`]: PSNR and MSSIM.
//! * [`io`] and [`cli`]: file formats and the command-line front end.
//!
//! Data-parallel kernels run on rayon when the `parallel` feature is on
//! (default). Every parallel reduction uses fixed chunking and an ordered
//! merge, so results are bit-identical with or without the feature and for
//! any thread count.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cg;
pub mod cli;
pub mod error;
pub mod global_op;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod objective;
pub mod oblique;
pub(crate) mod par;
pub mod patches;
pub mod reconstruct;
pub mod resize;

pub use error::{Error, Result};
