//! Seeded instances that are feasible by construction: targets are read off
//! a random contractive element at random points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derive::{CaraProblem, Variant};
use crate::displacement::DisplacementSystem;
use crate::error::{Error, Result};
use crate::interpolate::NPProblem;
use crate::points::OperatorTuple;
use crate::random::{random_matrix, scale_row_contraction, scale_to_margin};
use crate::schur::{random_schur, SchurElement};

/// Degree of the hidden element behind generated targets.
pub const GENERATOR_DEGREE: usize = 6;
/// Default ceiling on `ρ(Z)` for generated Nevanlinna–Pick points.
pub const NP_POINT_MARGIN: f64 = 0.04;
/// Default ceiling on `ρ(Z)` for generated Carathéodory points.
pub const CARA_POINT_MARGIN: f64 = 0.0025;

#[derive(Clone, Debug, PartialEq)]
pub struct NpParams {
    pub seed: u64,
    pub points: usize,
    pub alphabet: usize,
    pub dim: usize,
    /// Norm bound of the hidden element.
    pub margin: f64,
    /// Points have `ρ(Z)` drawn from `[point_margin/4, point_margin]`.
    pub point_margin: f64,
    pub degree: usize,
}

impl Default for NpParams {
    fn default() -> Self {
        NpParams { seed: 0, points: 2, alphabet: 2, dim: 1, margin: 0.9, point_margin: NP_POINT_MARGIN, degree: GENERATOR_DEGREE }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaraParams {
    pub seed: u64,
    pub order: usize,
    pub alphabet: usize,
    pub dim: usize,
    pub margin: f64,
    pub point_margin: f64,
    pub variant: Variant,
    pub degree: usize,
    pub zero_point: bool,
}

impl Default for CaraParams {
    fn default() -> Self {
        CaraParams {
            seed: 0,
            order: 1,
            alphabet: 2,
            dim: 1,
            margin: 0.9,
            point_margin: CARA_POINT_MARGIN,
            variant: Variant::Total,
            degree: GENERATOR_DEGREE,
            zero_point: false,
        }
    }
}

fn check_common(alphabet: usize, dim: usize, margin: f64, point_margin: f64) -> Result<()> {
    if alphabet == 0 || dim == 0 {
        return Err(Error::InvalidParameter("N and dim E must be positive".into()));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidParameter(format!("margin {margin} must lie in (0, 1)")));
    }
    if !(point_margin > 0.0 && point_margin < 1.0) {
        return Err(Error::InvalidParameter(format!("point margin {point_margin} must lie in (0, 1)")));
    }
    Ok(())
}

fn random_point(rng: &mut ChaCha8Rng, alphabet: usize, dim: usize, point_margin: f64) -> Result<OperatorTuple> {
    let rho = rng.random_range(0.25 * point_margin..=point_margin);
    let comps = (0..alphabet).map(|_| random_matrix(rng, dim, dim)).collect();
    OperatorTuple::new(scale_to_margin(comps, rho))
}

/// A Nevanlinna–Pick instance with `Bⱼ = T(Zⱼ)`, and the hidden `T`.
pub fn generate_np(p: &NpParams) -> Result<(NPProblem, SchurElement)> {
    check_common(p.alphabet, p.dim, p.margin, p.point_margin)?;
    if p.points == 0 {
        return Err(Error::InvalidParameter("at least one point is required".into()));
    }
    let t = random_schur(p.seed, p.alphabet, p.dim, p.degree, p.margin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x9e37_79b9_7f4a_7c15);
    let points = (0..p.points).map(|_| random_point(&mut rng, p.alphabet, p.dim, p.point_margin)).collect::<Result<Vec<_>>>()?;
    let targets = points.iter().map(|z| Ok(t.evaluate(z)?.value)).collect::<Result<Vec<_>>>()?;
    Ok((NPProblem::new(points, targets)?, t))
}

/// A Carathéodory instance whose targets are the derivatives of the hidden `T`.
pub fn generate_cara(p: &CaraParams) -> Result<(CaraProblem, SchurElement)> {
    check_common(p.alphabet, p.dim, p.margin, p.point_margin)?;
    let t = random_schur(p.seed, p.alphabet, p.dim, p.degree, p.margin)?;
    let point = if p.zero_point {
        OperatorTuple::zero(p.alphabet, p.dim)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x9e37_79b9_7f4a_7c15);
        random_point(&mut rng, p.alphabet, p.dim, p.point_margin)?
    };
    Ok((CaraProblem::from_element(&t, point, p.order, p.variant)?, t))
}

/// Random system with `‖ΣFₖFₖ*‖ = bound < 1`, `U` of width `p` and `V` of width `q`.
pub fn generate_displacement(seed: u64, dim: usize, alphabet: usize, p: usize, q: usize, bound: f64) -> Result<DisplacementSystem> {
    if !(0.0..1.0).contains(&bound) {
        return Err(Error::InvalidParameter(format!("contraction bound {bound} must lie in [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = scale_row_contraction((0..alphabet).map(|_| random_matrix(&mut rng, dim, dim)).collect(), bound);
    DisplacementSystem::new(fs, random_matrix(&mut rng, dim, p), random_matrix(&mut rng, dim, q))
}
