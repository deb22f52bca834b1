//! Partial and total derivatives of Schur elements at a point, and the two
//! Carathéodory-type problems built on them.
//!
//! The lowered tuple `F_k^{(l)}` acts on `⊕_{m ≤ l} E_m` (one copy of `E` per
//! word of length at most `l`) by `(Fₖx)_α = Zₖ*x_α` plus a shift placing
//! `x_β` at the word `βk`. The total tuple `TF_k^{(l)}` acts on `E^{l+1}` with
//! `Zₖ*` on the diagonal and `I` on the first subdiagonal.

use serde::{Deserialize, Serialize};

use crate::displacement::{solve_exact, solve_series, transfer_column, wave_residual, DisplacementSystem};
use crate::error::{shape, Error, Result};
use crate::interpolate::{
    accurate_solution, synthesize_system, truncation_norms, FeasibilityReport, InterpolantCertificate, Settings,
    EXACT_SOLVE_LIMIT,
};
use crate::linalg::{direct_sum_copies, hstack, identity, is_psd, operator_norm, zeros, CMatrix};
use crate::points::OperatorTuple;
use crate::schur::SchurElement;
use crate::words::{global_index, level_size, level_start, words_up_to, words_up_to_count, Word};

/// `Eₖ`: the isometric injection of `E` as the `k`-th summand of `E^{⊕N}`.
pub fn injection(alphabet: usize, dim: usize, k: usize) -> CMatrix {
    let mut e = zeros(alphabet * dim, dim);
    e.view_mut(((k - 1) * dim, 0), (dim, dim)).copy_from(&identity(dim));
    e
}

/// `F_1^{(l)}, …, F_N^{(l)}` on `⊕_{m ≤ l} E_m`.
#[derive(Clone, Debug)]
pub struct LoweredTuple {
    order: usize,
    alphabet: usize,
    dim: usize,
    matrices: Vec<CMatrix>,
}

impl LoweredTuple {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, letter: usize) -> &CMatrix {
        &self.matrices[letter - 1]
    }

    /// Row or column offset of the block of word `w`.
    pub fn offset(&self, w: &Word) -> Result<usize> {
        Ok(self.dim * global_index(w, self.alphabet)?)
    }

    /// Offset and size of level `j`.
    pub fn level_range(&self, j: usize) -> (usize, usize) {
        (self.dim * level_start(self.alphabet, j), self.dim * level_size(self.alphabet, j))
    }

    /// `F_σ = F_{i₁}···F_{i_k}`.
    pub fn word_product(&self, w: &Word) -> Result<CMatrix> {
        w.validate(self.alphabet)?;
        Ok(w.letters().iter().fold(identity(self.matrices[0].nrows()), |acc, &l| acc * self.matrix(l)))
    }
}

pub fn build_lowered(z: &OperatorTuple, order: usize) -> LoweredTuple {
    let (n, d) = (z.alphabet(), z.dim());
    let g = d * words_up_to_count(n, order);
    let words = words_up_to(n, order).expect("N ≥ 1");
    let matrices = (1..=n)
        .map(|k| {
            let mut f = zeros(g, g);
            let zk = z.component(k).adjoint();
            for (pos, beta) in words.iter().enumerate() {
                f.view_mut((pos * d, pos * d), (d, d)).copy_from(&zk);
                if beta.len() < order {
                    let target = global_index(&beta.concat(&Word::from_letters(&[k])), n).expect("valid word");
                    f.view_mut((target * d, pos * d), (d, d)).copy_from(&identity(d));
                }
            }
            f
        })
        .collect();
    LoweredTuple { order, alphabet: n, dim: d, matrices }
}

/// `TF_1^{(l)}, …, TF_N^{(l)}` on `E^{l+1}`.
#[derive(Clone, Debug)]
pub struct TotalTuple {
    order: usize,
    matrices: Vec<CMatrix>,
}

impl TotalTuple {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrices(&self) -> &[CMatrix] {
        &self.matrices
    }

    pub fn word_product(&self, w: &Word) -> Result<CMatrix> {
        w.validate(self.matrices.len())?;
        Ok(w.letters().iter().fold(identity(self.matrices[0].nrows()), |acc, &l| acc * &self.matrices[l - 1]))
    }
}

pub fn build_total(z: &OperatorTuple, order: usize) -> TotalTuple {
    let d = z.dim();
    let g = d * (order + 1);
    let matrices = z
        .components()
        .iter()
        .map(|zk| {
            let mut f = direct_sum_copies(&zk.adjoint(), order + 1);
            for i in 1..=order {
                f.view_mut((i * d, (i - 1) * d), (d, d)).copy_from(&identity(d));
            }
            debug_assert_eq!(f.nrows(), g);
            f
        })
        .collect();
    TotalTuple { order, matrices }
}

/// `[I, 0, …, 0]*` with `blocks − 1` zero blocks.
fn leading_identity(dim: usize, blocks: usize) -> CMatrix {
    let mut u = zeros(dim * blocks, dim);
    u.view_mut((0, 0), (dim, dim)).copy_from(&identity(dim));
    u
}

fn check_shapes(t: &SchurElement, z: &OperatorTuple) -> Result<()> {
    if t.alphabet() != z.alphabet() || t.dim() != z.dim() {
        return Err(shape("element and point must share N and dim E"));
    }
    Ok(())
}

/// All `D_σT_Z` for `|σ| ≤ l`, level by level in word order.
pub fn partial_derivatives(t: &SchurElement, z: &OperatorTuple, order: usize) -> Result<Vec<Vec<CMatrix>>> {
    check_shapes(t, z)?;
    let (n, d) = (z.alphabet(), z.dim());
    let lowered = build_lowered(z, order);
    let u = leading_identity(d, words_up_to_count(n, order));
    let y = transfer_column(lowered.matrices(), &u, t)?;
    Ok((0..=order)
        .map(|j| {
            let start = level_start(n, j);
            (0..level_size(n, j)).map(|a| y.view(((start + a) * d, 0), (d, d)).adjoint()).collect()
        })
        .collect())
}

/// `D_σT_Z = P_E·T·L(σ, Z)*` computed with the lowered tuple of order `l ≥ |σ|`.
pub fn partial_derivative(t: &SchurElement, z: &OperatorTuple, sigma: &Word, order: usize) -> Result<CMatrix> {
    if sigma.len() > order {
        return Err(Error::OrderTooSmall { length: sigma.len(), order });
    }
    sigma.validate(z.alphabet())?;
    let table = partial_derivatives(t, z, order)?;
    let idx = crate::words::word_index(sigma, z.alphabet())?;
    Ok(table[idx.level][idx.offset].clone())
}

/// `D^kT_Z = Σ_{|σ|=k} D_σT_Z`.
pub fn total_derivative_direct(t: &SchurElement, z: &OperatorTuple, k: usize, order: usize) -> Result<CMatrix> {
    if k > order {
        return Err(Error::OrderTooSmall { length: k, order });
    }
    let table = partial_derivatives(t, z, order)?;
    Ok(table[k].iter().fold(zeros(z.dim(), z.dim()), |acc, m| acc + m))
}

/// `D^0T_Z, …, D^lT_Z` through `M_k(Z)`, the `k`-th block column of the
/// wave operator of the total tuple.
pub fn total_derivatives_mk(t: &SchurElement, z: &OperatorTuple, order: usize) -> Result<Vec<CMatrix>> {
    check_shapes(t, z)?;
    let d = z.dim();
    let total = build_total(z, order);
    let y = transfer_column(total.matrices(), &leading_identity(d, order + 1), t)?;
    Ok((0..=order).map(|k| y.view((k * d, 0), (d, d)).adjoint()).collect())
}

pub fn total_derivative_mk(t: &SchurElement, z: &OperatorTuple, k: usize, order: usize) -> Result<CMatrix> {
    if k > order {
        return Err(Error::OrderTooSmall { length: k, order });
    }
    Ok(total_derivatives_mk(t, z, order)?.swap_remove(k))
}

/// Blocks of the first block columns of `F_σ^{(l)}` and `TF_σ^{(l)}` and
/// the defects of the identities relating them.
#[derive(Clone, Debug)]
pub struct PqReport {
    /// `P_j(σ)`, a column of `N^j` blocks, for `j = 0..=l`.
    pub p_blocks: Vec<CMatrix>,
    /// `Q_j(σ)` for `j = 0..=l`.
    pub q_blocks: Vec<CMatrix>,
    /// `max_j ‖Σ_s P_j^s(σ) − Q_j(σ)‖`.
    pub defect: f64,
    /// Defect of `P_j(kτ) = Eₖ^{⊕N^{j−1}}P_{j−1}(τ) + (Zₖ*)^{⊕N^j}P_j(τ)`.
    pub p_recursion_defect: f64,
    /// Defect of `Q_j(kτ) = Q_{j−1}(τ) + Zₖ*Q_j(τ)`.
    pub q_recursion_defect: f64,
    /// Defect of the variant `Q_j(kτ) = Q_{j−1}(τ) + Z*_τ Q_j(τ)`, reported
    /// for comparison; it is not an identity in general.
    pub q_variant_defect: f64,
}

fn p_column(lowered: &LoweredTuple, sigma: &Word) -> Result<Vec<CMatrix>> {
    let d = lowered.dim;
    let col = lowered.word_product(sigma)?.columns(0, d).into_owned();
    Ok((0..=lowered.order)
        .map(|j| {
            let (at, len) = lowered.level_range(j);
            col.rows(at, len).into_owned()
        })
        .collect())
}

fn q_column(total: &TotalTuple, sigma: &Word, d: usize) -> Result<Vec<CMatrix>> {
    let col = total.word_product(sigma)?.columns(0, d).into_owned();
    Ok((0..=total.order).map(|j| col.rows(j * d, d).into_owned()).collect())
}

fn block_sum(column: &CMatrix, d: usize) -> CMatrix {
    (0..column.nrows() / d).fold(zeros(d, d), |acc, s| acc + column.rows(s * d, d))
}

pub fn pq_check(z: &OperatorTuple, sigma: &Word, order: usize) -> Result<PqReport> {
    let (k, tau) = sigma.split_first()?;
    let (n, d) = (z.alphabet(), z.dim());
    let lowered = build_lowered(z, order);
    let total = build_total(z, order);
    let p = p_column(&lowered, sigma)?;
    let q = q_column(&total, sigma, d)?;
    let p_tau = p_column(&lowered, &tau)?;
    let q_tau = q_column(&total, &tau, d)?;
    let zk = z.component(k).adjoint();
    let z_tau = z.word_product(&tau)?;

    let mut report = PqReport {
        p_blocks: p.clone(),
        q_blocks: q.clone(),
        defect: 0.0,
        p_recursion_defect: 0.0,
        q_recursion_defect: 0.0,
        q_variant_defect: 0.0,
    };
    for j in 0..=order {
        report.defect = report.defect.max(operator_norm(&(block_sum(&p[j], d) - &q[j])));
        let mut p_rec = direct_sum_copies(&zk, level_size(n, j)) * &p_tau[j];
        let mut q_rec = &zk * &q_tau[j];
        let mut q_var = &z_tau * &q_tau[j];
        if j > 0 {
            p_rec += direct_sum_copies(&injection(n, d, k), level_size(n, j - 1)) * &p_tau[j - 1];
            q_rec += &q_tau[j - 1];
            q_var += &q_tau[j - 1];
        }
        report.p_recursion_defect = report.p_recursion_defect.max(operator_norm(&(p_rec - &p[j])));
        report.q_recursion_defect = report.q_recursion_defect.max(operator_norm(&(q_rec - &q[j])));
        report.q_variant_defect = report.q_variant_defect.max(operator_norm(&(q_var - &q[j])));
    }
    Ok(report)
}

/// Largest gap between `P_σ` from the recursion `P_k = Eₖ`,
/// `P_{kτ} = EₖZ*_τ + (Zₖ*)^{⊕N}P_τ` and the lower-left block of `F_σ^{(1)}`,
/// over all `1 ≤ |σ| ≤ max_len`. The diagonal blocks are compared too.
pub fn rec_check(z: &OperatorTuple, max_len: usize) -> Result<f64> {
    let (n, d) = (z.alphabet(), z.dim());
    let lowered = build_lowered(z, 1);
    let mut recursive: Vec<CMatrix> = (1..=n).map(|k| injection(n, d, k)).collect();
    let mut worst = 0.0f64;
    for len in 1..=max_len {
        let words = crate::words::enumerate_words(n, len)?;
        if len > 1 {
            let prev = recursive;
            let prev_words = crate::words::enumerate_words(n, len - 1)?;
            recursive = Vec::with_capacity(words.len());
            for k in 1..=n {
                let zk = direct_sum_copies(&z.component(k).adjoint(), n);
                for (tau, p_tau) in prev_words.iter().zip(&prev) {
                    recursive.push(injection(n, d, k) * z.word_product(tau)? + &zk * p_tau);
                }
            }
        }
        for (w, p) in words.iter().zip(&recursive) {
            let f = lowered.word_product(w)?;
            let z_w = z.word_product(w)?;
            worst = worst
                .max(operator_norm(&(f.view((d, 0), (n * d, d)) - p)))
                .max(operator_norm(&(f.view((0, 0), (d, d)) - &z_w)))
                .max(operator_norm(&(f.view((d, d), (n * d, n * d)) - direct_sum_copies(&z_w, n))))
                .max(operator_norm(&f.view((0, d), (d, n * d)).into_owned()));
        }
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Partial,
    Total,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaraProblem {
    point: OperatorTuple,
    order: usize,
    variant: Variant,
    /// `targets[k]` is `B_k`: `d × d·N^k` for the partial variant, `d × d` for the total one.
    targets: Vec<CMatrix>,
}

impl CaraProblem {
    pub fn new(point: OperatorTuple, order: usize, variant: Variant, targets: Vec<CMatrix>) -> Result<Self> {
        if targets.len() != order + 1 {
            return Err(shape(format!("order {order} needs {} targets B_0..B_l, got {}", order + 1, targets.len())));
        }
        let (n, d) = (point.alphabet(), point.dim());
        for (k, b) in targets.iter().enumerate() {
            let width = match variant {
                Variant::Partial => d * level_size(n, k),
                Variant::Total => d,
            };
            if b.shape() != (d, width) {
                return Err(shape(format!("B_{k} must be {d}x{width}, got {}x{}", b.nrows(), b.ncols())));
            }
        }
        Ok(CaraProblem { point, order, variant, targets })
    }

    pub fn point(&self) -> &OperatorTuple {
        &self.point
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn targets(&self) -> &[CMatrix] {
        &self.targets
    }

    /// The same problem with every target multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> CaraProblem {
        let targets = self.targets.iter().map(|b| b * crate::linalg::c(factor, 0.0)).collect();
        CaraProblem { targets, ..self.clone() }
    }

    /// Targets realized by `t` at the point.
    pub fn from_element(t: &SchurElement, point: OperatorTuple, order: usize, variant: Variant) -> Result<Self> {
        let targets = match variant {
            Variant::Partial => {
                partial_derivatives(t, &point, order)?.iter().map(|lvl| hstack(lvl)).collect::<Result<Vec<_>>>()?
            }
            Variant::Total => total_derivatives_mk(t, &point, order)?,
        };
        CaraProblem::new(point, order, variant, targets)
    }
}

/// `Fₖ` lowered or total, `U = [I 0 … 0]*`, `V* = [B_0 B_1 … B_l]`.
pub fn cara_system(prob: &CaraProblem) -> DisplacementSystem {
    let d = prob.point.dim();
    let fs = match prob.variant {
        Variant::Partial => build_lowered(&prob.point, prob.order).matrices,
        Variant::Total => build_total(&prob.point, prob.order).matrices,
    };
    let g = fs[0].nrows();
    let u = leading_identity(d, g / d);
    let v = hstack(&prob.targets).expect("validated target rows").adjoint();
    DisplacementSystem::new(fs, u, v).expect("system built from a validated problem")
}

/// Positivity of `U∞*U∞ − V∞*V∞`, computed by the level series and, when the
/// system is small enough, by the vectorized solve; the two are cross-checked.
pub fn cara_feasible(prob: &CaraProblem, settings: &Settings) -> Result<FeasibilityReport> {
    let sys = cara_system(prob);
    // an inconclusive ratio test falls back to the vectorized solve
    let series = match solve_series(&sys, settings.tol_series, settings.depth_cap) {
        Err(e) if !matches!(e, Error::DecayNotEstablished { .. } | Error::DepthExceeded { .. }) => return Err(e),
        other => other,
    };
    let exact = if sys.dim() <= EXACT_SOLVE_LIMIT { Some(solve_exact(&sys)) } else { None };
    let (matrix, cross_check, depth) = match (series, exact) {
        (Ok(s), Some(Ok(a))) => {
            let gap = operator_norm(&(&s.a - &a));
            if gap > settings.cross_check * (1.0 + operator_norm(&a)) {
                return Err(Error::CrossCheckFailure { what: "series and vectorized solutions".into(), defect: gap });
            }
            (a, Some(gap), Some(s.depth))
        }
        (Ok(s), _) => (s.a, None, Some(s.depth)),
        (Err(_), Some(Ok(a))) => (a, None, None),
        (Err(e), _) => return Err(e),
    };
    let verdict = is_psd(&matrix, settings.tol_psd)?;
    Ok(FeasibilityReport { feasible: verdict.psd, matrix, min_eig: verdict.min_eig, cross_check, depth })
}

/// `‖D-data of T at Z − B_k‖` for `k = 0..=l`.
pub fn cara_residuals(prob: &CaraProblem, t: &SchurElement) -> Result<Vec<f64>> {
    let got = CaraProblem::from_element(t, prob.point.clone(), prob.order, prob.variant)?;
    Ok(got.targets.iter().zip(&prob.targets).map(|(a, b)| operator_norm(&(a - b))).collect())
}

pub fn cara_synthesize(prob: &CaraProblem, settings: &Settings) -> Result<InterpolantCertificate> {
    let report = cara_feasible(prob, settings)?;
    if !report.feasible {
        return Err(Error::Infeasible { min_eig: report.min_eig });
    }
    let sys = cara_system(prob);
    let a = accurate_solution(&sys, settings)?;
    let real = synthesize_system(&sys, &a, settings.k_out, settings)?;
    Ok(InterpolantCertificate {
        residuals: cara_residuals(prob, &real.element)?,
        norm_bounds: truncation_norms(&real.element)?,
        wave_residual: wave_residual(&sys, &real.element)?,
        theta_defect: real.theta_defect,
        rank: real.rank,
        r1: real.r1,
        r2: real.r2,
        element: real.element,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::random::{random_matrix, scale_to_margin};
    use crate::schur::random_schur;
    use crate::words::enumerate_words;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(seed: u64, n: usize, d: usize, margin: f64) -> OperatorTuple {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OperatorTuple::new(scale_to_margin((0..n).map(|_| random_matrix(&mut rng, d, d)).collect(), margin)).unwrap()
    }

    fn w(l: &[usize]) -> Word {
        Word::from_letters(l)
    }

    #[test]
    fn lowered_order_zero_and_one() {
        let z = random_point(1, 2, 2, 0.5);
        let f0 = build_lowered(&z, 0);
        assert_eq!(f0.matrix(1), &z.component(1).adjoint());
        let f1 = build_lowered(&z, 1);
        for k in 1..=2 {
            let f = f1.matrix(k);
            assert_eq!(f.view((2, 0), (4, 2)).into_owned(), injection(2, 2, k));
            assert_eq!(f.view((2, 2), (4, 4)).into_owned(), direct_sum_copies(&z.component(k).adjoint(), 2));
            assert_eq!(f.view((0, 2), (2, 4)).into_owned(), zeros(2, 4));
        }
    }

    #[test]
    fn lowered_block_recursion() {
        let z = random_point(2, 2, 1, 0.5);
        let f = build_lowered(&z, 3);
        for k in 1..=2 {
            let m = f.matrix(k);
            let block = |i: usize, j: usize| {
                let (ri, si) = f.level_range(i);
                let (rj, sj) = f.level_range(j);
                m.view((ri, rj), (si, sj)).into_owned()
            };
            assert_eq!(block(0, 0), z.component(k).adjoint());
            assert_eq!(block(1, 0), injection(2, 1, k));
            for i in 2..=3 {
                assert_eq!(block(i, 0), zeros(f.level_range(i).1, 1));
            }
            for i in 1..=3 {
                for j in 1..=3 {
                    assert_eq!(block(i, j), direct_sum_copies(&block(i - 1, j - 1), 2));
                }
            }
        }
    }

    #[test]
    fn rec_recursion_matches_products() {
        for seed in 0..4 {
            let n = 1 + seed as usize % 3;
            let z = random_point(seed, n, 2, 0.7);
            assert!(rec_check(&z, 4).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn pq_base_case() {
        let z = random_point(3, 3, 2, 0.6);
        let rep = pq_check(&z, &w(&[2]), 1).unwrap();
        assert_eq!(rep.p_blocks[1], injection(3, 2, 2));
        assert_eq!(rep.q_blocks[1], identity(2));
        assert_eq!(rep.defect, 0.0);
    }

    #[test]
    fn pq_identities_exhaustive() {
        for n in 1..=3 {
            for l in 0..=3 {
                let z = random_point((n * 10 + l) as u64, n, 2, 0.8);
                for len in 1..=4 {
                    for sigma in enumerate_words(n, len).unwrap() {
                        let rep = pq_check(&z, &sigma, l).unwrap();
                        assert!(rep.defect <= 1e-12);
                        assert!(rep.p_recursion_defect <= 1e-12);
                        assert!(rep.q_recursion_defect <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn pq_at_origin_is_exact() {
        let z = OperatorTuple::zero(2, 2);
        for sigma in words_up_to(2, 4).unwrap().into_iter().skip(1) {
            let rep = pq_check(&z, &sigma, 3).unwrap();
            assert_eq!(rep.defect, 0.0);
            assert_eq!(rep.p_recursion_defect, 0.0);
            assert_eq!(rep.q_recursion_defect, 0.0);
        }
    }

    #[test]
    fn word_product_q_recursion_fails_somewhere() {
        let z = random_point(4, 2, 2, 0.8);
        let rep = pq_check(&z, &w(&[1, 2]), 2).unwrap();
        assert!(rep.q_variant_defect > 1e-6);
        assert!(rep.q_recursion_defect <= 1e-12);
    }

    #[test]
    fn empty_word_is_evaluation() {
        let t = random_schur(1, 2, 2, 4, 0.9).unwrap();
        let z = random_point(5, 2, 2, 0.5);
        let d0 = partial_derivative(&t, &z, &Word::empty(), 2).unwrap();
        assert!(operator_norm(&(d0 - t.evaluate(&z).unwrap().value)) < 1e-14);
        assert!(matches!(partial_derivative(&t, &z, &w(&[1, 2, 1]), 2), Err(Error::OrderTooSmall { .. })));
    }

    #[test]
    fn scalar_derivatives_are_classical() {
        // N = 1, d = 1: D_{1^j} T at z is T^{(j)}(z)/j!
        let t = random_schur(2, 1, 1, 6, 0.9).unwrap();
        let zc = c(0.3, -0.2);
        let z = OperatorTuple::scalar(&[zc]).unwrap();
        let table = partial_derivatives(&t, &z, 3).unwrap();
        for (j, lvl) in table.iter().enumerate() {
            let mut expected = c(0.0, 0.0);
            for m in j..=6 {
                let binom = (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64);
                expected += t.level(m)[0][(0, 0)] * zc.powi((m - j) as i32) * binom;
            }
            assert!((lvl[0][(0, 0)] - expected).norm() < 1e-13, "order {j}");
        }
    }

    #[test]
    fn derivatives_at_origin_match_brute_force() {
        let t = random_schur(3, 2, 2, 4, 0.9).unwrap();
        let z = OperatorTuple::zero(2, 2);
        let lowered = build_lowered(&z, 3);
        let u = leading_identity(2, words_up_to_count(2, 3));
        for sigma in words_up_to(2, 3).unwrap() {
            let at = lowered.offset(&sigma).unwrap();
            let mut expected = zeros(2, 2);
            for tau in words_up_to(2, 4).unwrap() {
                let fu = lowered.word_product(&tau).unwrap() * &u;
                expected += t.coeff(&tau).unwrap() * fu.view((at, 0), (2, 2)).adjoint();
            }
            let got = partial_derivative(&t, &z, &sigma, 3).unwrap();
            assert!(operator_norm(&(got - expected)) < 1e-14);
        }
    }

    #[test]
    fn total_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for seed in 0..10 {
            let n = rng.random_range(1..=3);
            let d = rng.random_range(1..=2);
            let l = rng.random_range(0..=3);
            let t = random_schur(seed, n, d, 5, 0.9).unwrap();
            let z = random_point(seed + 50, n, d, rng.random_range(0.0..0.8));
            let mk = total_derivatives_mk(&t, &z, l).unwrap();
            for (k, m) in mk.iter().enumerate() {
                let direct = total_derivative_direct(&t, &z, k, l).unwrap();
                assert!(operator_norm(&(direct - m)) <= 1e-9 * (1.0 + operator_norm(m)));
            }
        }
        let zero = SchurElement::zero(2, 2, 3);
        let z = random_point(1, 2, 2, 0.5);
        assert!(total_derivatives_mk(&zero, &z, 2).unwrap().iter().all(|m| operator_norm(m) == 0.0));
    }

    #[test]
    fn single_letter_total_equals_partial() {
        let t = random_schur(8, 1, 2, 5, 0.9).unwrap();
        let z = random_point(8, 1, 2, 0.4);
        for k in 0..=3 {
            let sigma = Word::from_letters(&vec![1; k]);
            let a = partial_derivative(&t, &z, &sigma, 3).unwrap();
            let b = total_derivative_direct(&t, &z, k, 3).unwrap();
            assert!(operator_norm(&(a - b)) < 1e-15);
        }
    }

    #[test]
    fn zero_targets_at_origin() {
        let z = OperatorTuple::zero(2, 1);
        let prob = CaraProblem::new(z, 1, Variant::Total, vec![zeros(1, 1); 2]).unwrap();
        let rep = cara_feasible(&prob, &Settings::default()).unwrap();
        assert!(rep.feasible);
        let sys = cara_system(&prob);
        assert!(operator_norm(&(rep.matrix.clone() - solve_exact(&sys).unwrap())) < 1e-14);
        let cert = cara_synthesize(&prob, &Settings::default()).unwrap();
        assert!(cert.max_residual() <= 1e-8);
    }

    #[test]
    fn classical_caratheodory() {
        let z = OperatorTuple::zero(1, 1);
        let b = |v: f64| CMatrix::from_element(1, 1, c(v, 0.0));
        let prob = CaraProblem::new(z.clone(), 1, Variant::Partial, vec![b(0.5), b(0.0)]).unwrap();
        assert!(cara_feasible(&prob, &Settings::default()).unwrap().feasible);
        let cert = cara_synthesize(&prob, &Settings::default()).unwrap();
        assert!(cert.max_residual() <= 1e-6);
        // |c0|² + |c1|² ≤ 1 is necessary for a one-variable Schur function
        let bad = CaraProblem::new(z, 1, Variant::Partial, vec![b(0.8), b(0.8)]).unwrap();
        assert!(!cara_feasible(&bad, &Settings::default()).unwrap().feasible);
    }

    #[test]
    fn order_zero_reduces_to_pick() {
        let t = random_schur(9, 2, 2, 4, 0.9).unwrap();
        let z = random_point(9, 2, 2, 0.4);
        let np = crate::interpolate::NPProblem::new(vec![z.clone()], vec![t.evaluate(&z).unwrap().value]).unwrap();
        let pick = crate::interpolate::pick_matrix(&np, &Settings::default()).unwrap();
        for variant in [Variant::Partial, Variant::Total] {
            let prob = CaraProblem::from_element(&t, z.clone(), 0, variant).unwrap();
            let rep = cara_feasible(&prob, &Settings::default()).unwrap();
            assert!(operator_norm(&(rep.matrix - &pick)) < 1e-9);
        }
    }

    #[test]
    fn generator_round_trip_and_scaling() {
        let s = Settings::default();
        for seed in 0..6 {
            for variant in [Variant::Partial, Variant::Total] {
                let t = random_schur(seed, 2, 1 + seed as usize % 2, 5, 0.9).unwrap();
                let z = if seed % 3 == 0 { OperatorTuple::zero(2, t.dim()) } else { random_point(seed, 2, t.dim(), 0.002) };
                let prob = CaraProblem::from_element(&t, z, 2, variant).unwrap();
                let rep = cara_feasible(&prob, &s).unwrap();
                assert!(rep.feasible && rep.min_eig >= -1e-8, "seed {seed} {variant:?}");
                let cert = cara_synthesize(&prob, &s).unwrap();
                assert!(cert.max_residual() <= 1e-6, "seed {seed} {variant:?}: {:?}", cert.residuals);
                assert!(cert.max_norm() <= 1.0 + 1e-8);
                assert!(!cara_feasible(&prob.scaled(10.0), &s).unwrap().feasible);
            }
        }
    }
}
