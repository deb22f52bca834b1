//! The displacement equation `A − Σₖ FₖAFₖ* = GJG*` with `G = [U V]` and
//! `J = I_p ⊕ −I_q`, solved by level series or by vectorization.

use crate::error::{shape, Error, Result};
use crate::linalg::{hermitian_part, operator_norm, vec_solve, vstack, zeros, CMatrix};
use crate::schur::SchurElement;

pub const DEFAULT_SERIES_TOL: f64 = 1e-9;
pub const DEFAULT_DEPTH_CAP: usize = 200;
/// Observed level ratios must stay below this to count as geometric decay.
pub const DECAY_RATIO_CEILING: f64 = 0.999;
const DECAY_WINDOW: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementSystem {
    fs: Vec<CMatrix>,
    u: CMatrix,
    v: CMatrix,
}

impl DisplacementSystem {
    pub fn new(fs: Vec<CMatrix>, u: CMatrix, v: CMatrix) -> Result<Self> {
        let g = u.nrows();
        if fs.is_empty() {
            return Err(shape("a displacement system needs at least one F"));
        }
        if fs.iter().any(|f| f.shape() != (g, g)) {
            return Err(shape(format!("every F must be {g}x{g}")));
        }
        if v.nrows() != g {
            return Err(shape(format!("V has {} rows, expected {g}", v.nrows())));
        }
        Ok(DisplacementSystem { fs, u, v })
    }

    pub fn fs(&self) -> &[CMatrix] {
        &self.fs
    }

    pub fn u(&self) -> &CMatrix {
        &self.u
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// `GJG* = UU* − VV*`.
    pub fn gjg(&self) -> CMatrix {
        &self.u * self.u.adjoint() - &self.v * self.v.adjoint()
    }

    /// `‖A − ΣFₖAFₖ* − GJG*‖`.
    pub fn residual(&self, a: &CMatrix) -> f64 {
        crate::linalg::displacement_residual(&self.fs, a, &self.gjg())
    }
}

/// One application of `X ↦ Σₖ FₖXFₖ*`.
fn push_level(fs: &[CMatrix], x: &CMatrix) -> CMatrix {
    let mut out = zeros(x.nrows(), x.ncols());
    for f in fs {
        out += f * x * f.adjoint();
    }
    out
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    /// `‖S_m‖` for `m = 0..=depth`, with `S_0 = I`.
    pub level_norms: Vec<f64>,
    /// Largest of the last few ratios `‖S_m‖/‖S_{m−1}‖` (zero once a level vanishes).
    pub rate: f64,
    pub decays: bool,
}

fn decay_verdict(norms: &[f64]) -> (f64, bool) {
    if norms.last() == Some(&0.0) {
        return (0.0, true);
    }
    if norms.len() < DECAY_WINDOW + 1 {
        return (f64::INFINITY, false);
    }
    let tail = &norms[norms.len() - DECAY_WINDOW - 1..];
    let rate = tail.windows(2).map(|p| p[1] / p[0]).fold(0.0, f64::max);
    (rate, rate <= DECAY_RATIO_CEILING)
}

/// Level norms of `S_m = Σ_{|σ|=m} F_σF_σ* = ΣₖFₖS_{m−1}Fₖ*`.
pub fn decay_check(fs: &[CMatrix], depth: usize) -> DecayReport {
    let g = fs.first().map_or(0, |f| f.nrows());
    let mut s = crate::linalg::identity(g);
    let mut level_norms = vec![operator_norm(&s)];
    for _ in 0..depth {
        s = push_level(fs, &s);
        level_norms.push(operator_norm(&s));
        if level_norms.last() == Some(&0.0) {
            break;
        }
    }
    let (rate, decays) = decay_verdict(&level_norms);
    DecayReport { level_norms, rate, decays }
}

#[derive(Clone, Debug)]
pub struct SeriesSolution {
    pub a: CMatrix,
    /// Highest level included in the sum.
    pub depth: usize,
    /// Bound on the norm of the omitted levels.
    pub tail_estimate: f64,
    /// `‖A_m‖` of every summed level.
    pub level_norms: Vec<f64>,
}

/// `A = Σ_m A_m` with `A_0 = GJG*`, `A_m = ΣₖFₖA_{m−1}Fₖ*`.
///
/// The omitted tail is bounded by `‖GJG*‖·‖S_{M+1}‖/(1 − r̄)` with `r̄` the
/// observed decay rate of `‖S_m‖`; summation stops once that bound falls
/// below `tol·(1 + ‖GJG*‖)`.
pub fn solve_series(sys: &DisplacementSystem, tol: f64, depth_cap: usize) -> Result<SeriesSolution> {
    let gjg = sys.gjg();
    let scale = operator_norm(&gjg);
    let target = tol * (1.0 + scale);
    let mut level = gjg.clone();
    let mut a = gjg;
    let mut level_norms = vec![scale];
    let mut s = crate::linalg::identity(sys.dim());
    let mut s_norms = vec![operator_norm(&s)];
    for depth in 0..=depth_cap {
        s = push_level(&sys.fs, &s);
        s_norms.push(operator_norm(&s));
        let (rate, decays) = decay_verdict(&s_norms);
        let s_next = *s_norms.last().expect("nonempty");
        if s_next == 0.0 || (decays && scale * s_next / (1.0 - rate) <= target) {
            let tail_estimate = if s_next == 0.0 { 0.0 } else { scale * s_next / (1.0 - rate) };
            return Ok(SeriesSolution { a: hermitian_part(&a), depth, tail_estimate, level_norms });
        }
        if depth == depth_cap {
            if !decays {
                return Err(Error::DecayNotEstablished { ratio: rate });
            }
            let needed = depth + ((scale * s_next / (1.0 - rate) / target).ln() / -rate.ln()).ceil() as usize;
            return Err(Error::DepthExceeded { needed, cap: depth_cap });
        }
        level = push_level(&sys.fs, &level);
        level_norms.push(operator_norm(&level));
        a += &level;
    }
    unreachable!("loop returns at depth_cap")
}

/// Direct solve through the vectorized map; Hermitian by construction.
pub fn solve_exact(sys: &DisplacementSystem) -> Result<CMatrix> {
    Ok(hermitian_part(&vec_solve(&sys.fs, &sys.gjg())?))
}

#[derive(Clone, Debug)]
pub struct WaveOperators {
    /// Rows `(F_σU)*` stacked in word order for `|σ| ≤ depth`.
    pub u_inf: CMatrix,
    pub v_inf: CMatrix,
    pub depth: usize,
    /// `‖U_m‖` with `U_m = [F_σU]_{|σ|=m}`.
    pub u_level_norms: Vec<f64>,
    pub v_level_norms: Vec<f64>,
}

fn stacked_rows(fs: &[CMatrix], seed: &CMatrix, depth: usize) -> Result<(CMatrix, Vec<f64>)> {
    let mut rows: Vec<CMatrix> = vec![seed.adjoint()];
    let mut level = vec![seed.clone()];
    let mut norms = vec![operator_norm(seed)];
    for _ in 0..depth {
        let next: Vec<CMatrix> = fs.iter().flat_map(|f| level.iter().map(move |m| f * m)).collect();
        let gathered = crate::linalg::hstack(&next)?;
        norms.push(operator_norm(&gathered));
        rows.extend(next.iter().map(|m| m.adjoint()));
        level = next;
    }
    Ok((vstack(&rows)?, norms))
}

/// `U∞`, `V∞` cut at words of length `depth`.
pub fn wave_operators(sys: &DisplacementSystem, depth: usize) -> Result<WaveOperators> {
    let (u_inf, u_level_norms) = stacked_rows(&sys.fs, &sys.u, depth)?;
    let (v_inf, v_level_norms) = stacked_rows(&sys.fs, &sys.v, depth)?;
    Ok(WaveOperators { u_inf, v_inf, depth, u_level_norms, v_level_norms })
}

impl WaveOperators {
    /// `U∞*U∞ − V∞*V∞` on the computed rows.
    pub fn reconstruction(&self) -> CMatrix {
        self.u_inf.adjoint() * &self.u_inf - self.v_inf.adjoint() * &self.v_inf
    }
}

/// `Σ_{|γ| ≤ K} F_γ·U·c_γ*`; its word blocks are the adjoints of the
/// entries of the row `P_E·T·U∞`.
pub fn transfer_column(fs: &[CMatrix], u: &CMatrix, t: &SchurElement) -> Result<CMatrix> {
    if fs.len() != t.alphabet() {
        return Err(shape("element alphabet must match the number of F"));
    }
    if u.ncols() != t.dim() {
        return Err(shape("element dimension must match U"));
    }
    let mut level = vec![u.clone()];
    let mut out = u * t.level(0)[0].adjoint();
    for j in 1..=t.degree() {
        level = fs.iter().flat_map(|f| level.iter().map(move |m| f * m)).collect();
        for (fu, coeff) in level.iter().zip(t.level(j)) {
            out += fu * coeff.adjoint();
        }
    }
    Ok(out)
}

/// `max_{|α| ≤ 1} ‖F_α(V − Σ_γ F_γUc_γ*)‖`: the defect of `V∞ = T·U∞` on
/// the rows of length at most one.
pub fn wave_residual(sys: &DisplacementSystem, t: &SchurElement) -> Result<f64> {
    if sys.v.ncols() != t.dim() {
        return Err(shape("element dimension must match V"));
    }
    let gap = &sys.v - transfer_column(&sys.fs, &sys.u, t)?;
    let mut worst = operator_norm(&gap);
    for f in &sys.fs {
        worst = worst.max(operator_norm(&(f * &gap)));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, identity};
    use crate::random::{random_matrix, scale_row_contraction};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> CMatrix {
        CMatrix::from_element(1, 1, c(v, 0.0))
    }

    fn random_system(seed: u64) -> DisplacementSystem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = rng.random_range(1..=12);
        let n = rng.random_range(1..=3);
        let (p, q) = (rng.random_range(1..=3), rng.random_range(0..=3));
        let bound = rng.random_range(0.2..0.9);
        let fs = scale_row_contraction((0..n).map(|_| random_matrix(&mut rng, g, g)).collect(), bound);
        DisplacementSystem::new(fs, random_matrix(&mut rng, g, p), random_matrix(&mut rng, g, q)).unwrap()
    }

    #[test]
    fn zero_f_gives_gjg() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sys = DisplacementSystem::new(
            vec![zeros(3, 3), zeros(3, 3)],
            random_matrix(&mut rng, 3, 2),
            random_matrix(&mut rng, 3, 1),
        )
        .unwrap();
        let series = solve_series(&sys, 1e-9, 200).unwrap();
        assert_eq!(series.depth, 0);
        assert!(operator_norm(&(series.a - sys.gjg())) < 1e-15);
        assert!(operator_norm(&(solve_exact(&sys).unwrap() - sys.gjg())) < 1e-14);
    }

    #[test]
    fn scalar_geometric_series() {
        let sys = DisplacementSystem::new(vec![scalar(0.5)], scalar(1.0), zeros(1, 0)).unwrap();
        let series = solve_series(&sys, 1e-9, 200).unwrap();
        // omitted tail is within tol·(1 + ‖GJG*‖)
        assert_abs_diff_eq!(series.a[(0, 0)].re, 4.0 / 3.0, epsilon = 2e-9);
        assert_abs_diff_eq!(solve_exact(&sys).unwrap()[(0, 0)].re, 4.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn series_and_exact_agree() {
        for seed in 0..40 {
            let sys = random_system(seed);
            let series = solve_series(&sys, 1e-9, 200).unwrap();
            let exact = solve_exact(&sys).unwrap();
            let scale = 1.0 + operator_norm(&sys.gjg());
            assert!(operator_norm(&(&series.a - &exact)) <= 1e-8 * scale, "seed {seed}");
            assert!(sys.residual(&series.a) <= 1e-9 * scale);
            assert!(sys.residual(&exact) <= 1e-10 * scale);
            assert!(series.tail_estimate <= 1e-9 * scale);
            assert!(operator_norm(&(&exact - exact.adjoint())) <= 1e-10 * (1.0 + operator_norm(&exact)));
        }
    }

    #[test]
    fn positive_signature_gives_psd() {
        for seed in 0..10 {
            let sys = random_system(seed);
            let sys = DisplacementSystem::new(sys.fs.clone(), sys.u.clone(), zeros(sys.dim(), 0)).unwrap();
            let a = solve_series(&sys, 1e-9, 200).unwrap().a;
            assert!(crate::linalg::is_psd(&a, 1e-9).unwrap().psd);
        }
    }

    #[test]
    fn decay_examples() {
        let rep = decay_check(&[zeros(2, 2)], 5);
        assert_eq!(rep.level_norms[1], 0.0);
        assert!(rep.decays);
        let theta = 0.3f64;
        let rot = crate::linalg::from_real_rows(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let rep = decay_check(&[rot], 10);
        assert!(rep.level_norms.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert!(!rep.decays);
        let sys = DisplacementSystem::new(vec![identity(2)], identity(2), zeros(2, 0)).unwrap();
        assert!(matches!(solve_series(&sys, 1e-9, 20), Err(Error::DecayNotEstablished { .. })));
    }

    #[test]
    fn slow_decay_hits_depth_cap() {
        let sys = DisplacementSystem::new(vec![scalar(0.99)], scalar(1.0), zeros(1, 0)).unwrap();
        match solve_series(&sys, 1e-9, 50) {
            Err(Error::DepthExceeded { needed, cap }) => {
                assert_eq!(cap, 50);
                assert!(needed > 50);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singular_exact_map() {
        let sys = DisplacementSystem::new(vec![identity(2)], identity(2), zeros(2, 0)).unwrap();
        assert!(matches!(solve_exact(&sys), Err(Error::SingularMap { .. })));
    }

    #[test]
    fn wave_operator_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sys = random_system(3);
        let w0 = wave_operators(&sys, 0).unwrap();
        assert_eq!(w0.u_inf, sys.u.adjoint());
        assert_eq!(w0.v_inf, sys.v.adjoint());

        // strictly lower triangular F are nilpotent of order 2 on C^2
        let mut f1 = zeros(2, 2);
        f1[(1, 0)] = c(0.7, 0.1);
        let mut f2 = zeros(2, 2);
        f2[(1, 0)] = c(-0.2, 0.4);
        let sys = DisplacementSystem::new(vec![f1, f2], random_matrix(&mut rng, 2, 2), random_matrix(&mut rng, 2, 1))
            .unwrap();
        let w = wave_operators(&sys, 4).unwrap();
        assert!(w.u_level_norms[2..].iter().all(|&x| x == 0.0));
        let exact = solve_exact(&sys).unwrap();
        assert!(operator_norm(&(w.reconstruction() - exact)) < 1e-13);
    }

    #[test]
    fn wave_reconstruction_matches_series() {
        for seed in 0..8 {
            let sys = random_system(seed);
            let series = solve_series(&sys, 1e-9, 200).unwrap();
            let w = wave_operators(&sys, 6).unwrap();
            // the reconstruction omits levels beyond 6
            let omitted: f64 = series.level_norms.iter().skip(7).sum();
            let gap = operator_norm(&(w.reconstruction() - &series.a));
            assert!(gap <= omitted + series.tail_estimate + 1e-12, "seed {seed}");
        }
    }
}
