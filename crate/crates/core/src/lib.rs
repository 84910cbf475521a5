//! Spectral regularization of linear inverse problems and regularizing
//! networks (RegNets) built on top of it.
//!
//! The crate is organized bottom-up:
//!
//! - [`linop`]: dense operators with a cached singular system.
//! - [`filters`]: regularizing filters `g_alpha` and `B_alpha = g_alpha(A*A)A*`.
//! - [`network`]: a small convolutional network with SGD + momentum training.
//! - [`regnet`]: null-space networks and the data-driven continued SVD.
//! - [`radon`]: sparse-angle Radon matrices in a Kaiser-Bessel basis.
//! - [`analysis`]: distance function, error bounds, rate and test-set experiments.
//! - [`io`]: binary containers, manifests and PGM export.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod filters;
pub mod io;
pub mod linop;
pub mod network;
pub mod radon;
pub mod regnet;
pub mod special;

pub use error::{Error, Result};
pub use filters::{FilterKind, FilterRegularizer, RegularizingFilter};
pub use linop::SvdOperator;
pub use network::{NetworkArch, NetworkParams};
pub use regnet::{ReconstructionMethod, RegNetFamily, Variant};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Euclidean distance between two vectors of equal length.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Euclidean norm.
pub fn l2_norm(a: &[f64]) -> f64 {
    norm(a)
}
