//! The Nevanlinna–Pick problem on the operator ball: Pick-matrix feasibility
//! and synthesis of an interpolant from a unitary colligation.

use serde::{Deserialize, Serialize};

use crate::displacement::{
    solve_exact, solve_series, wave_residual, DisplacementSystem, DEFAULT_DEPTH_CAP, DEFAULT_SERIES_TOL,
};
use crate::error::{shape, Error, Result};
use crate::linalg::{
    block_diag, hermitian_eigen, hermitian_part, identity, is_psd, operator_norm, unitarity_defect,
    unitary_completion, vstack, zeros, CMatrix, C64,
};
use crate::points::{geometric_depth, level_sum, OperatorTuple};
use crate::schur::SchurElement;

/// Vectorized solves are used up to this system dimension.
pub const EXACT_SOLVE_LIMIT: usize = 40;
/// Two points closer than this (componentwise, in operator norm) coincide.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Tolerances and truncation shared by both interpolation problems.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub tol_psd: f64,
    pub tol_interp: f64,
    pub tol_series: f64,
    pub depth_cap: usize,
    /// Relative eigenvalue cutoff for the factor space.
    pub rank_tol: f64,
    pub cross_check: f64,
    pub k_out: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            tol_psd: 1e-9,
            tol_interp: 1e-6,
            tol_series: DEFAULT_SERIES_TOL,
            depth_cap: DEFAULT_DEPTH_CAP,
            rank_tol: 1e-10,
            cross_check: 1e-8,
            k_out: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NPProblem {
    points: Vec<OperatorTuple>,
    targets: Vec<CMatrix>,
}

impl NPProblem {
    pub fn new(points: Vec<OperatorTuple>, targets: Vec<CMatrix>) -> Result<Self> {
        let first = points.first().ok_or_else(|| shape("at least one point is required"))?;
        if points.len() != targets.len() {
            return Err(shape(format!("{} points but {} targets", points.len(), targets.len())));
        }
        let d = first.dim();
        if points.iter().any(|p| !p.same_shape(first)) {
            return Err(shape("all points must share N and dim E"));
        }
        if let Some(k) = targets.iter().position(|b| b.shape() != (d, d)) {
            return Err(shape(format!("target {k} is not {d}x{d}")));
        }
        for (j, zj) in points.iter().enumerate() {
            for (k, zk) in points.iter().enumerate().skip(j + 1) {
                let gap = zj
                    .components()
                    .iter()
                    .zip(zk.components())
                    .map(|(a, b)| operator_norm(&(a - b)))
                    .fold(0.0, f64::max);
                if gap <= DUPLICATE_TOL {
                    return Err(Error::DuplicatePoints { first: j, second: k });
                }
            }
        }
        Ok(NPProblem { points, targets })
    }

    pub fn points(&self) -> &[OperatorTuple] {
        &self.points
    }

    pub fn targets(&self) -> &[CMatrix] {
        &self.targets
    }

    pub fn alphabet(&self) -> usize {
        self.points[0].alphabet()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }
}

/// `Fₖ = ⊕ⱼ Z*_{j,k}`, `U = [I … I]*`, `V = [B₁ … B_n]*`.
pub fn np_system(prob: &NPProblem) -> DisplacementSystem {
    let d = prob.dim();
    let fs = (1..=prob.alphabet())
        .map(|k| block_diag(&prob.points.iter().map(|p| p.component(k).adjoint()).collect::<Vec<_>>()))
        .collect();
    let u = vstack(&vec![identity(d); prob.points.len()]).expect("conformal blocks");
    let v = vstack(&prob.targets.iter().map(|b| b.adjoint()).collect::<Vec<_>>()).expect("conformal blocks");
    DisplacementSystem::new(fs, u, v).expect("system built from a validated problem")
}

/// `P` and the agreement of its two computations.
#[derive(Clone, Debug)]
pub struct PickComputation {
    pub matrix: CMatrix,
    /// Largest level depth used by the direct series.
    pub depth: usize,
    /// `‖P_series − P_displacement‖`.
    pub cross_check: f64,
}

/// Direct level series `Σ_σ Z*_{j,σ}(I − Bⱼ*Bₖ)(Z*_{k,σ})*` per block.
fn pick_series(prob: &NPProblem, settings: &Settings) -> Result<(CMatrix, usize)> {
    let (n, d) = (prob.points.len(), prob.dim());
    let mut p = zeros(n * d, n * d);
    let mut max_depth = 0;
    for (j, zj) in prob.points.iter().enumerate() {
        for (k, zk) in prob.points.iter().enumerate() {
            let x = identity(d) - prob.targets[j].adjoint() * &prob.targets[k];
            let r = (zj.margin() * zk.margin()).sqrt();
            let tol = settings.tol_series * 1e-2 / (1.0 + operator_norm(&x));
            let depth = geometric_depth(r, tol);
            if depth > settings.depth_cap {
                return Err(Error::DepthExceeded { needed: depth, cap: settings.depth_cap });
            }
            max_depth = max_depth.max(depth);
            p.view_mut((j * d, k * d), (d, d)).copy_from(&level_sum(zj, zk, &x, depth));
        }
    }
    Ok((hermitian_part(&p), max_depth))
}

/// Most accurate available solution of the displacement equation.
pub(crate) fn accurate_solution(sys: &DisplacementSystem, settings: &Settings) -> Result<CMatrix> {
    if sys.dim() <= EXACT_SOLVE_LIMIT {
        match solve_exact(sys) {
            Ok(a) => return Ok(a),
            Err(Error::SingularMap { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(solve_series(sys, settings.tol_series.min(1e-13), settings.depth_cap)?.a)
}

pub fn pick_matrix_checked(prob: &NPProblem, settings: &Settings) -> Result<PickComputation> {
    let (matrix, depth) = pick_series(prob, settings)?;
    let other = accurate_solution(&np_system(prob), settings)?;
    let cross_check = operator_norm(&(&matrix - &other));
    let allowed = settings.cross_check * (1.0 + operator_norm(&matrix));
    if cross_check > allowed {
        return Err(Error::CrossCheckFailure { what: "pick matrix series and displacement solve".into(), defect: cross_check });
    }
    Ok(PickComputation { matrix, depth, cross_check })
}

/// `P = [L(Zⱼ) diag[I − Bⱼ*Bₖ] L(Zₖ)*]`.
pub fn pick_matrix(prob: &NPProblem, settings: &Settings) -> Result<CMatrix> {
    Ok(pick_matrix_checked(prob, settings)?.matrix)
}

#[derive(Clone, Debug)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// The Pick matrix, or the displacement solution for Carathéodory data.
    pub matrix: CMatrix,
    pub min_eig: f64,
    /// Disagreement between the two computations of `matrix`, when both ran.
    pub cross_check: Option<f64>,
    pub depth: Option<usize>,
}

pub fn np_feasible(prob: &NPProblem, settings: &Settings) -> Result<FeasibilityReport> {
    let pick = pick_matrix_checked(prob, settings)?;
    let verdict = is_psd(&pick.matrix, settings.tol_psd)?;
    Ok(FeasibilityReport {
        feasible: verdict.psd,
        matrix: pick.matrix,
        min_eig: verdict.min_eig,
        cross_check: Some(pick.cross_check),
        depth: Some(pick.depth),
    })
}

/// Output of the colligation construction for any displacement system.
#[derive(Clone, Debug)]
pub struct Realization {
    pub element: SchurElement,
    pub theta_defect: f64,
    pub rank: usize,
    pub r1: usize,
    pub r2: usize,
}

/// `A ≈ LL*` keeping eigenvalues above `rank_tol·λ_max`; small negative
/// eigenvalues of a marginally feasible `A` are dropped with the rest.
fn factor(a: &CMatrix, rank_tol: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let top = values.last().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return zeros(a.nrows(), 0);
    }
    let kept: Vec<usize> = (0..values.len()).rev().filter(|&i| values[i] > rank_tol * top).collect();
    let mut l = zeros(a.nrows(), kept.len());
    for (dst, &src) in kept.iter().enumerate() {
        l.set_column(dst, &(vectors.column(src) * C64::new(values[src].sqrt(), 0.0)));
    }
    l
}

/// Builds `T` from a positive solution `A` of the displacement equation:
/// a unitary `Θ` maps `[L*Fₖ*]ₖ ⊕ U*` onto `L* ⊕ V*`, and its blocks give
/// `c_∅ = W`, `c_{kσ} = Yₖ X_σ Z`.
pub fn synthesize_system(sys: &DisplacementSystem, a: &CMatrix, k_out: usize, settings: &Settings) -> Result<Realization> {
    let n = sys.fs().len();
    let (p, q) = (sys.u().ncols(), sys.v().ncols());
    if p != q {
        return Err(shape("U and V must have the same number of columns"));
    }
    let l = factor(a, settings.rank_tol);
    let r = l.ncols();
    let l_adj = l.adjoint();
    let acol = vstack(&[l_adj.clone(), sys.v().adjoint()])?;
    let mut pieces: Vec<CMatrix> = sys.fs().iter().map(|f| &l_adj * f.adjoint()).collect();
    pieces.push(sys.u().adjoint());
    let bcol = vstack(&pieces)?;
    let completion = unitary_completion(&bcol, &acol, (10.0 * settings.tol_psd).max(1e-8))?;
    let theta = &completion.theta;
    let x: Vec<CMatrix> = (0..n).map(|k| theta.view((0, k * r), (r, r)).into_owned()).collect();
    let y: Vec<CMatrix> = (0..n).map(|k| theta.view((r, k * r), (q, r)).into_owned()).collect();
    let zb = theta.view((0, n * r), (r, p)).into_owned();
    let w = theta.view((r, n * r), (q, p)).into_owned();

    let mut levels = vec![vec![w]];
    let mut tails = vec![zb];
    for _ in 1..=k_out {
        let level = y.iter().flat_map(|yk| tails.iter().map(move |m| yk * m)).collect();
        levels.push(level);
        tails = x.iter().flat_map(|xk| tails.iter().map(move |m| xk * m)).collect();
    }
    let element = SchurElement::from_levels(n, q, levels)?;
    Ok(Realization {
        element,
        theta_defect: unitarity_defect(theta),
        rank: r,
        r1: completion.r1,
        r2: completion.r2,
    })
}

#[derive(Clone, Debug)]
pub struct InterpolantCertificate {
    pub element: SchurElement,
    /// `‖T(Zₖ) − Bₖ‖` (or derivative defects for Carathéodory data).
    pub residuals: Vec<f64>,
    /// `‖T^{(m)}‖` for `m = 0..=K_out`.
    pub norm_bounds: Vec<f64>,
    pub theta_defect: f64,
    pub wave_residual: f64,
    pub rank: usize,
    pub r1: usize,
    pub r2: usize,
}

impl InterpolantCertificate {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_norm(&self) -> f64 {
        self.norm_bounds.iter().copied().fold(0.0, f64::max)
    }
}

pub(crate) fn truncation_norms(t: &SchurElement) -> Result<Vec<f64>> {
    (0..=t.degree()).map(|m| t.norm_lower_bound(m)).collect()
}

fn np_residuals(prob: &NPProblem, t: &SchurElement) -> Result<Vec<f64>> {
    prob.points
        .iter()
        .zip(&prob.targets)
        .map(|(z, b)| Ok(operator_norm(&(t.evaluate(z)?.value - b))))
        .collect()
}

/// Feasibility check, colligation construction and certificate.
pub fn synthesize(prob: &NPProblem, settings: &Settings) -> Result<InterpolantCertificate> {
    let report = np_feasible(prob, settings)?;
    if !report.feasible {
        return Err(Error::Infeasible { min_eig: report.min_eig });
    }
    let sys = np_system(prob);
    let a = accurate_solution(&sys, settings)?;
    let real = synthesize_system(&sys, &a, settings.k_out, settings)?;
    Ok(InterpolantCertificate {
        residuals: np_residuals(prob, &real.element)?,
        norm_bounds: truncation_norms(&real.element)?,
        wave_residual: wave_residual(&sys, &real.element)?,
        theta_defect: real.theta_defect,
        rank: real.rank,
        r1: real.r1,
        r2: real.r2,
        element: real.element,
    })
}

/// Independent recomputation of a certificate's claims.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub wave_residual: f64,
    pub max_norm: f64,
    pub passed: bool,
}

pub fn verify_certificate(cert: &InterpolantCertificate, prob: &NPProblem, settings: &Settings) -> Result<VerificationReport> {
    let residuals = np_residuals(prob, &cert.element)?;
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let wave = wave_residual(&np_system(prob), &cert.element)?;
    let max_norm = truncation_norms(&cert.element)?.into_iter().fold(0.0, f64::max);
    let passed = max_residual <= settings.tol_interp && wave <= settings.tol_interp && max_norm <= 1.0 + 1e-8;
    Ok(VerificationReport { residuals, max_residual, wave_residual: wave, max_norm, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::points::kernel_gram;
    use crate::random::{random_matrix, scale_to_margin};
    use crate::schur::random_schur;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: C64) -> CMatrix {
        CMatrix::from_element(1, 1, v)
    }

    fn random_point(rng: &mut ChaCha8Rng, n: usize, d: usize, margin: f64) -> OperatorTuple {
        OperatorTuple::new(scale_to_margin((0..n).map(|_| random_matrix(rng, d, d)).collect(), margin)).unwrap()
    }

    fn generated(seed: u64) -> NPProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (count, n, d) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=2));
        let t = random_schur(seed, n, d, 5, 0.9).unwrap();
        let points: Vec<OperatorTuple> =
            (0..count).map(|_| { let m = rng.random_range(0.01..0.04); random_point(&mut rng, n, d, m) }).collect();
        let targets = points.iter().map(|z| t.evaluate(z).unwrap().value).collect();
        NPProblem::new(points, targets).unwrap()
    }

    #[test]
    fn one_point_at_origin() {
        let s = Settings::default();
        let prob = NPProblem::new(vec![OperatorTuple::zero(1, 1)], vec![scalar(c(0.5, 0.0))]).unwrap();
        let rep = np_feasible(&prob, &s).unwrap();
        assert!(rep.feasible);
        assert_abs_diff_eq!(rep.min_eig, 0.75, epsilon = 1e-14);

        let prob = NPProblem::new(vec![OperatorTuple::zero(2, 1)], vec![scalar(c(2.0, 0.0))]).unwrap();
        let rep = np_feasible(&prob, &s).unwrap();
        assert!(!rep.feasible);
        assert_abs_diff_eq!(rep.min_eig, -3.0, epsilon = 1e-14);
        assert!(matches!(synthesize(&prob, &s), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn zero_targets_give_kernel_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points: Vec<_> = (0..3).map(|_| random_point(&mut rng, 2, 2, 0.5)).collect();
        let prob = NPProblem::new(points.clone(), vec![zeros(2, 2); 3]).unwrap();
        let p = pick_matrix(&prob, &Settings::default()).unwrap();
        let gram = kernel_gram(&points, 1e-12, 200).unwrap();
        assert!(operator_norm(&(p - gram)) < 1e-9);
        let rep = np_feasible(&prob, &Settings::default()).unwrap();
        assert!(rep.feasible);
    }

    #[test]
    fn rejects_bad_problems() {
        let z = OperatorTuple::scalar(&[c(0.1, 0.0), c(0.2, 0.0)]).unwrap();
        assert!(matches!(
            NPProblem::new(vec![z.clone(), z.clone()], vec![scalar(c(0.0, 0.0)); 2]),
            Err(Error::DuplicatePoints { first: 0, second: 1 })
        ));
        assert!(NPProblem::new(vec![z.clone()], vec![]).is_err());
        assert!(NPProblem::new(vec![z], vec![zeros(2, 2)]).is_err());
    }

    #[test]
    fn scalar_diagonal_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = 2;
        let coords: Vec<Vec<C64>> = (0..3)
            .map(|_| (0..2).map(|_| c(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4))).collect())
            .collect();
        let points: Vec<_> = coords.iter().map(|z| OperatorTuple::scalar_diagonal(z, d).unwrap()).collect();
        let targets: Vec<CMatrix> = (0..3).map(|_| random_matrix(&mut rng, d, d) * c(0.3, 0.0)).collect();
        let prob = NPProblem::new(points, targets.clone()).unwrap();
        let p = pick_matrix(&prob, &Settings::default()).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let inner: C64 = coords[j].iter().zip(&coords[k]).map(|(a, b)| a.conj() * b).sum();
                let expected = (identity(d) - targets[j].adjoint() * &targets[k]) / (c(1.0, 0.0) - inner);
                let block = p.view((j * d, k * d), (d, d)).into_owned();
                assert!(operator_norm(&(block - expected)) < 1e-8);
            }
        }
    }

    #[test]
    fn generated_instances_round_trip() {
        let s = Settings::default();
        for seed in 0..10 {
            let prob = generated(seed);
            let rep = np_feasible(&prob, &s).unwrap();
            assert!(rep.min_eig >= -1e-8, "seed {seed}");
            let cert = synthesize(&prob, &s).unwrap();
            assert!(cert.max_residual() <= 1e-6, "seed {seed}: {:?}", cert.residuals);
            assert!(cert.max_norm() <= 1.0 + 1e-8, "seed {seed}: {:?}", cert.norm_bounds);
            assert!(cert.theta_defect <= 1e-10);
            assert!(verify_certificate(&cert, &prob, &s).unwrap().passed);
        }
    }

    #[test]
    fn classical_one_point_problem() {
        let prob = NPProblem::new(vec![OperatorTuple::zero(1, 1)], vec![scalar(c(0.5, 0.0))]).unwrap();
        let cert = synthesize(&prob, &Settings::default()).unwrap();
        assert!(cert.max_residual() <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let radius: f64 = rng.random_range(0.0..0.95);
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let z = OperatorTuple::scalar(&[C64::from_polar(radius, angle)]).unwrap();
            assert!(cert.element.evaluate(&z).unwrap().value[(0, 0)].norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn zero_targets_synthesize_zero_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let points: Vec<_> = (0..2).map(|_| random_point(&mut rng, 2, 2, 0.03)).collect();
        let prob = NPProblem::new(points, vec![zeros(2, 2); 2]).unwrap();
        let cert = synthesize(&prob, &Settings::default()).unwrap();
        assert!(cert.max_residual() <= 1e-8);
    }

    #[test]
    fn tampered_certificate_fails() {
        let s = Settings::default();
        let prob = generated(3);
        let mut cert = synthesize(&prob, &s).unwrap();
        let mut c0 = cert.element.level(0)[0].clone();
        c0[(0, 0)] += c(1e-3, 0.0);
        cert.element.set_coeff(&crate::words::Word::empty(), c0).unwrap();
        assert!(!verify_certificate(&cert, &prob, &s).unwrap().passed);
    }

    #[test]
    fn residual_does_not_grow_with_k_out() {
        let prob = generated(4);
        let mut last = f64::INFINITY;
        for k in [2, 4, 6, 8] {
            let s = Settings { k_out: k, ..Settings::default() };
            let cert = synthesize(&prob, &s).unwrap();
            assert!(cert.max_residual() <= last * (1.0 + 1e-6) + 1e-13, "k_out {k}");
            last = cert.max_residual();
        }
    }
}
