//! Seeded random matrices and points shared by generators and tests.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, operator_norm, zeros, CMatrix};

/// Complex matrix with i.i.d. standard complex Gaussian entries.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re * s, im * s)
    })
}

/// Rescales the tuple so that `‖Σ Zₖ*Zₖ‖ = margin` (zero tuples are left alone).
pub fn scale_to_margin(components: Vec<CMatrix>, margin: f64) -> Vec<CMatrix> {
    let d = components.first().map_or(0, |z| z.nrows());
    let mut sum = zeros(d, d);
    for z in &components {
        sum += z.adjoint() * z;
    }
    let current = operator_norm(&sum);
    if current == 0.0 {
        return components;
    }
    let s = c((margin / current).sqrt(), 0.0);
    components.into_iter().map(|z| z * s).collect()
}

/// Rescales `F₁..F_N` so that `‖Σ FₖFₖ*‖ = bound`.
pub fn scale_row_contraction(fs: Vec<CMatrix>, bound: f64) -> Vec<CMatrix> {
    let g = fs.first().map_or(0, |f| f.nrows());
    let mut sum = zeros(g, g);
    for f in &fs {
        sum += f * f.adjoint();
    }
    let current = operator_norm(&sum);
    if current == 0.0 {
        return fs;
    }
    let s = c((bound / current).sqrt(), 0.0);
    fs.into_iter().map(|f| f * s).collect()
}
