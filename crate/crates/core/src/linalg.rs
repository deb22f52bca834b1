//! Dense complex-matrix plumbing: block assembly, norms, positivity,
//! factorization, unitary completion and the vectorized displacement solve.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{shape, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// Builds a matrix from real row-major data.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    assert_eq!(data.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| c(data[i * cols + j], 0.0))
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// `[m_1 m_2 ...]`; all blocks must share the row count.
pub fn hstack(blocks: &[CMatrix]) -> Result<CMatrix> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    if blocks.iter().any(|b| b.nrows() != rows) {
        return Err(shape("hstack: row counts differ"));
    }
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(b);
        at += b.ncols();
    }
    Ok(out)
}

/// `[m_1; m_2; ...]`; all blocks must share the column count.
pub fn vstack(blocks: &[CMatrix]) -> Result<CMatrix> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    if blocks.iter().any(|b| b.ncols() != cols) {
        return Err(shape("vstack: column counts differ"));
    }
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(b);
        at += b.nrows();
    }
    Ok(out)
}

pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let (mut r, mut col) = (0, 0);
    for b in blocks {
        out.view_mut((r, col), b.shape()).copy_from(b);
        r += b.nrows();
        col += b.ncols();
    }
    out
}

/// `m^{⊕copies}`.
pub fn direct_sum_copies(m: &CMatrix, copies: usize) -> CMatrix {
    let (r, k) = m.shape();
    let mut out = zeros(r * copies, k * copies);
    for i in 0..copies {
        out.view_mut((i * r, i * k), (r, k)).copy_from(m);
    }
    out
}

/// A dense matrix with a fixed partition into row and column blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
    row_starts: Vec<usize>,
    col_starts: Vec<usize>,
    data: CMatrix,
}

fn prefix_sums(dims: &[usize]) -> Vec<usize> {
    let mut starts = Vec::with_capacity(dims.len());
    let mut acc = 0;
    for &d in dims {
        starts.push(acc);
        acc += d;
    }
    starts
}

impl BlockMatrix {
    pub fn zeros(row_dims: Vec<usize>, col_dims: Vec<usize>) -> Self {
        let rows = row_dims.iter().sum();
        let cols = col_dims.iter().sum();
        BlockMatrix {
            row_starts: prefix_sums(&row_dims),
            col_starts: prefix_sums(&col_dims),
            row_dims,
            col_dims,
            data: zeros(rows, cols),
        }
    }

    pub fn from_dense(row_dims: Vec<usize>, col_dims: Vec<usize>, data: CMatrix) -> Result<Self> {
        if row_dims.iter().sum::<usize>() != data.nrows()
            || col_dims.iter().sum::<usize>() != data.ncols()
        {
            return Err(shape("block dimensions do not match the dense matrix"));
        }
        Ok(BlockMatrix {
            row_starts: prefix_sums(&row_dims),
            col_starts: prefix_sums(&col_dims),
            row_dims,
            col_dims,
            data,
        })
    }

    pub fn row_dims(&self) -> &[usize] {
        &self.row_dims
    }

    pub fn col_dims(&self) -> &[usize] {
        &self.col_dims
    }

    pub fn block(&self, i: usize, j: usize) -> CMatrix {
        self.data
            .view((self.row_starts[i], self.col_starts[j]), (self.row_dims[i], self.col_dims[j]))
            .into_owned()
    }

    pub fn set_block(&mut self, i: usize, j: usize, value: &CMatrix) -> Result<()> {
        if value.shape() != (self.row_dims[i], self.col_dims[j]) {
            return Err(shape(format!(
                "block ({i},{j}) expects {}x{}, got {}x{}",
                self.row_dims[i],
                self.col_dims[j],
                value.nrows(),
                value.ncols()
            )));
        }
        self.data
            .view_mut((self.row_starts[i], self.col_starts[j]), value.shape())
            .copy_from(value);
        Ok(())
    }

    pub fn dense(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_dense(self) -> CMatrix {
        self.data
    }
}

/// Largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.ncols() == 1 || m.nrows() == 1 {
        return m.norm();
    }
    m.clone().singular_values().max()
}

/// Eigenvalues (ascending) and matching eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdVerdict {
    pub psd: bool,
    pub min_eig: f64,
}

/// Positivity test with a relative eigenvalue floor `-tol·(1 + ‖M‖)`.
pub fn is_psd(m: &CMatrix, tol: f64) -> Result<PsdVerdict> {
    if m.nrows() != m.ncols() {
        return Err(shape(format!("is_psd: {}x{} is not square", m.nrows(), m.ncols())));
    }
    if m.is_empty() {
        return Ok(PsdVerdict { psd: true, min_eig: 0.0 });
    }
    let norm = operator_norm(m);
    let asymmetry = operator_norm(&(m - m.adjoint()));
    let allowed = tol * (1.0 + norm);
    if asymmetry > allowed {
        return Err(Error::NotHermitian { asymmetry, allowed });
    }
    let (values, _) = hermitian_eigen(m);
    let min_eig = values[0];
    Ok(PsdVerdict { psd: min_eig >= -allowed, min_eig })
}

/// `M ≈ L·L*` from the eigendecomposition, keeping eigenvalues above
/// `rank_tol·λ_max`. Columns of `L` follow descending eigenvalues.
pub fn psd_factor(m: &CMatrix, rank_tol: f64) -> Result<CMatrix> {
    let verdict = is_psd(m, rank_tol)?;
    if !verdict.psd {
        return Err(Error::NotPsd { min_eig: verdict.min_eig });
    }
    let n = m.nrows();
    let (values, vectors) = hermitian_eigen(m);
    let lambda_max = values.last().copied().unwrap_or(0.0);
    if lambda_max <= 0.0 {
        return Ok(zeros(n, 0));
    }
    let cutoff = rank_tol * lambda_max;
    let kept: Vec<usize> = (0..n).rev().filter(|&i| values[i] > cutoff).collect();
    let mut l = zeros(n, kept.len());
    for (dst, &src) in kept.iter().enumerate() {
        let scale = c(values[src].sqrt(), 0.0);
        l.set_column(dst, &(vectors.column(src) * scale));
    }
    Ok(l)
}

/// Orthonormal basis of the complement of the column span of `q`
/// (assumed orthonormal), by column-pivoted Gram–Schmidt on the identity.
pub fn orthonormal_complement(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let want = n.saturating_sub(q.ncols());
    let mut cand: Vec<DVector<C64>> = (0..n)
        .map(|i| {
            let mut e = DVector::<C64>::zeros(n);
            e[i] = ONE;
            for _ in 0..2 {
                let coeffs = q.adjoint() * &e;
                e -= q * coeffs;
            }
            e
        })
        .collect();
    let mut basis: Vec<DVector<C64>> = Vec::with_capacity(want);
    let mut used = vec![false; n];
    for _ in 0..want {
        let mut best = None;
        let mut best_norm = -1.0;
        for (i, v) in cand.iter().enumerate() {
            if used[i] {
                continue;
            }
            let nv = v.norm();
            // strict comparison keeps the lowest index on ties
            if nv > best_norm + 1e-14 {
                best_norm = nv;
                best = Some(i);
            }
        }
        let Some(pick) = best else { break };
        used[pick] = true;
        let mut v = cand[pick].clone();
        for _ in 0..2 {
            let coeffs = q.adjoint() * &v;
            v -= q * coeffs;
            for b in &basis {
                let p = b.dotc(&v);
                v -= b * p;
            }
        }
        let nv = v.norm();
        if nv < 1e-12 {
            continue;
        }
        v /= c(nv, 0.0);
        for (i, other) in cand.iter_mut().enumerate() {
            if !used[i] {
                let p = v.dotc(other);
                *other -= &v * p;
            }
        }
        basis.push(v);
    }
    let mut out = zeros(n, basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

/// Unitary polar factor of a matrix with full column rank.
fn polar_isometry(m: &CMatrix) -> CMatrix {
    if m.ncols() == 0 {
        return zeros(m.nrows(), 0);
    }
    let svd = SVD::new(m.clone(), true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    u * v_t
}

/// Result of [`unitary_completion`].
#[derive(Clone, Debug)]
pub struct Completion {
    /// Unitary of size `rows(B) + r1 = rows(A) + r2`.
    pub theta: CMatrix,
    pub r1: usize,
    pub r2: usize,
    /// Dimension of the common range that was matched.
    pub range_rank: usize,
}

/// Finds a unitary `Θ` with `Θ·[B; 0] = [A; 0]` given `B*B = A*A`.
///
/// `θ₀` is built on the range of `[B; 0]` by matching the polar factors of
/// `B·V` and `A·V` (`V` the leading right singular vectors of `B`), then
/// extended by pivoted orthonormal bases of the two complements.
pub fn unitary_completion(bcol: &CMatrix, acol: &CMatrix, tol: f64) -> Result<Completion> {
    if bcol.ncols() != acol.ncols() {
        return Err(shape(format!(
            "unitary_completion: column counts {} and {} differ",
            bcol.ncols(),
            acol.ncols()
        )));
    }
    let gram_b = bcol.adjoint() * bcol;
    let gram_a = acol.adjoint() * acol;
    let defect = operator_norm(&(&gram_b - &gram_a));
    let allowed = tol * (1.0 + operator_norm(&gram_b));
    if defect > allowed {
        return Err(Error::GramMismatch { defect, allowed });
    }
    let (mb, ma) = (bcol.nrows(), acol.nrows());
    let r1 = ma.saturating_sub(mb);
    let r2 = mb.saturating_sub(ma);
    let size = mb + r1;
    let bp = vstack(&[bcol.clone(), zeros(r1, bcol.ncols())])?;
    let ap = vstack(&[acol.clone(), zeros(r2, acol.ncols())])?;

    let g = bcol.ncols();
    let mut rank = 0;
    let mut right = zeros(g, 0);
    if g > 0 && size > 0 {
        let svd = SVD::new(bp.clone(), false, true);
        let sigma_max = svd.singular_values.max();
        if sigma_max > 0.0 {
            let cutoff = 1e-11 * sigma_max.max(1.0);
            rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
            let v_t = svd.v_t.expect("right singular vectors requested");
            right = v_t.rows(0, rank).adjoint();
        }
    }
    let ub = polar_isometry(&(&bp * &right));
    let ua = polar_isometry(&(&ap * &right));
    let cb = orthonormal_complement(&ub);
    let ca = orthonormal_complement(&ua);
    if cb.ncols() != ca.ncols() {
        return Err(Error::CrossCheckFailure {
            what: "complement dimensions".into(),
            defect: (cb.ncols() as f64 - ca.ncols() as f64).abs(),
        });
    }
    let theta = &ua * ub.adjoint() + &ca * cb.adjoint();
    Ok(Completion { theta, r1, r2, range_rank: rank })
}

/// `‖ΘΘ* − I‖` together with `‖Θ*Θ − I‖`, whichever is larger.
pub fn unitarity_defect(theta: &CMatrix) -> f64 {
    let n = theta.nrows();
    let m = theta.ncols();
    let a = operator_norm(&(theta * theta.adjoint() - identity(n)));
    let b = operator_norm(&(theta.adjoint() * theta - identity(m)));
    a.max(b)
}

/// Largest singular value of an operator given only through `x ↦ A*A·x`,
/// by Lanczos with local reorthogonalization. Ritz values stay inside the
/// spectrum (up to rounding), so the result never exceeds the true norm.
pub fn lanczos_norm<F>(dim: usize, steps: usize, apply_gram: F) -> f64
where
    F: Fn(&DVector<C64>) -> DVector<C64>,
{
    if dim == 0 {
        return 0.0;
    }
    let steps = steps.clamp(1, dim);
    // deterministic, generic start vector
    let mut v = DVector::<C64>::from_fn(dim, |i, _| {
        let t = (i as f64 + 1.0) * 0.754_877_666_246_692_7;
        c(1.0 + (t.fract() - 0.5), 0.3 * (t * 1.618).fract())
    });
    v /= c(v.norm(), 0.0);
    let mut prev = DVector::<C64>::zeros(dim);
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut last_top = f64::NEG_INFINITY;
    for j in 0..steps {
        let mut w = apply_gram(&v);
        let alpha = v.dotc(&w).re;
        alphas.push(alpha);
        w -= &v * c(alpha, 0.0);
        if let Some(&b) = betas.last() {
            w -= &prev * c(b, 0.0);
        }
        for q in [&v, &prev] {
            let p = q.dotc(&w);
            w -= q * p;
        }
        let beta = w.norm();
        let scale = alphas.iter().fold(1e-300, |a: f64, x| a.max(x.abs()));
        if j + 1 == steps || beta <= 1e-14 * scale {
            break;
        }
        if (j + 1) % 10 == 0 {
            let top = tridiagonal_top(&alphas, &betas);
            if (top - last_top).abs() <= 1e-15 * top.abs().max(1e-300) {
                break;
            }
            last_top = top;
        }
        betas.push(beta);
        prev = std::mem::replace(&mut v, w / c(beta, 0.0));
    }
    tridiagonal_top(&alphas, &betas).max(0.0).sqrt()
}

fn tridiagonal_top(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    SymmetricEigen::new(t).eigenvalues.max()
}

/// Conditioning ceiling of the vectorized displacement map.
pub const VEC_SOLVE_MAX_CONDITION: f64 = 1e12;

/// Solves `X − Σₖ Fₖ X Fₖ* = RHS` by vectorization:
/// `(I − Σₖ conj(Fₖ) ⊗ Fₖ) vec(X) = vec(RHS)`.
pub fn vec_solve(fs: &[CMatrix], rhs: &CMatrix) -> Result<CMatrix> {
    let g = rhs.nrows();
    if rhs.ncols() != g {
        return Err(shape("vec_solve: right-hand side must be square"));
    }
    if fs.iter().any(|f| f.shape() != (g, g)) {
        return Err(shape("vec_solve: every F must match the right-hand side"));
    }
    if g == 0 {
        return Ok(zeros(0, 0));
    }
    let n = g * g;
    let mut system = identity(n);
    for f in fs {
        system -= f.map(|z| z.conj()).kronecker(f);
    }
    let norm1 = one_norm(&system);
    let lu = system.clone().lu();
    let inverse = lu.try_inverse().ok_or(Error::SingularMap { condition: f64::INFINITY })?;
    let condition = norm1 * one_norm(&inverse);
    if !condition.is_finite() || condition > VEC_SOLVE_MAX_CONDITION {
        return Err(Error::SingularMap { condition });
    }
    let b = DVector::from_column_slice(rhs.as_slice());
    let mut x = &inverse * &b;
    // one step of iterative refinement
    let r = &b - &system * &x;
    x += &inverse * r;
    Ok(CMatrix::from_column_slice(g, g, x.as_slice()))
}

fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Residual `‖X − Σ FₖXFₖ* − RHS‖` of the displacement map.
pub fn displacement_residual(fs: &[CMatrix], x: &CMatrix, rhs: &CMatrix) -> f64 {
    let mut r = x - rhs;
    for f in fs {
        r -= f * x * f.adjoint();
    }
    operator_norm(&r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, k: usize) -> CMatrix {
        CMatrix::from_fn(r, k, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn norms() {
        assert_eq!(operator_norm(&zeros(3, 3)), 0.0);
        assert_abs_diff_eq!(operator_norm(&identity(3)), 1.0, epsilon = 1e-14);
        let d = from_real_rows(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        assert_abs_diff_eq!(operator_norm(&d), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_examples() {
        let v = is_psd(&identity(3), 1e-9).unwrap();
        assert!(v.psd);
        assert_abs_diff_eq!(v.min_eig, 1.0, epsilon = 1e-14);

        let v = is_psd(&from_real_rows(1, 1, &[-3.0]), 1e-9).unwrap();
        assert!(!v.psd);
        assert_abs_diff_eq!(v.min_eig, -3.0, epsilon = 1e-14);

        let v = is_psd(&from_real_rows(2, 2, &[1.0, 0.5, 0.5, 1.0]), 1e-9).unwrap();
        assert!(v.psd);
        assert_abs_diff_eq!(v.min_eig, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn psd_errors() {
        assert!(matches!(is_psd(&zeros(2, 3), 1e-9), Err(Error::Shape(_))));
        let skew = from_real_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(is_psd(&skew, 1e-9), Err(Error::NotHermitian { .. })));
        assert!(matches!(
            psd_factor(&from_real_rows(1, 1, &[-1.0]), 1e-10),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn factor_examples() {
        let l = psd_factor(&identity(2), 1e-10).unwrap();
        assert_eq!(l.shape(), (2, 2));
        assert!(operator_norm(&(&l * l.adjoint() - identity(2))) < 1e-14);

        let l = psd_factor(&from_real_rows(1, 1, &[4.0]), 1e-10).unwrap();
        assert_abs_diff_eq!(l[(0, 0)].norm(), 2.0, epsilon = 1e-14);

        let m = from_real_rows(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = psd_factor(&m, 1e-10).unwrap();
        assert_eq!(l.shape(), (2, 1));
        assert!(operator_norm(&(&l * l.adjoint() - &m)) < 1e-12);

        assert_eq!(psd_factor(&zeros(3, 3), 1e-10).unwrap().shape(), (3, 0));
    }

    #[test]
    fn factor_reproduces_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let n = 1 + trial % 20;
            let rank = 1 + rng.random_range(0..n);
            let g = random(&mut rng, n, rank);
            let m = &g * g.adjoint();
            let lmax = operator_norm(&m);
            let l = psd_factor(&m, 1e-10).unwrap();
            assert!(l.ncols() <= n);
            assert!(operator_norm(&(&l * l.adjoint() - &m)) <= 10.0 * 1e-10 * lmax);
        }
    }

    #[test]
    fn completion_identity() {
        let comp = unitary_completion(&identity(3), &identity(3), 1e-10).unwrap();
        assert_eq!((comp.r1, comp.r2), (0, 0));
        assert!(operator_norm(&(&comp.theta - identity(3))) < 1e-12);
    }

    #[test]
    fn completion_pads_minimally() {
        let b = from_real_rows(2, 1, &[1.0, 0.0]);
        let a = from_real_rows(1, 1, &[1.0]);
        let comp = unitary_completion(&b, &a, 1e-10).unwrap();
        assert_eq!((comp.r1, comp.r2), (0, 1));
        assert_eq!(comp.theta.shape(), (2, 2));
        assert_abs_diff_eq!(comp.theta[(0, 0)].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(comp.theta[(1, 0)].norm(), 0.0, epsilon = 1e-12);
        assert!(unitarity_defect(&comp.theta) < 1e-12);
    }

    #[test]
    fn completion_random_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..30 {
            let g = 1 + trial % 4;
            let (m1, m2) = (g + rng.random_range(0..4), g + rng.random_range(0..4));
            let r = random(&mut rng, g, g);
            let q1 = polar_isometry(&random(&mut rng, m1, g));
            let q2 = polar_isometry(&random(&mut rng, m2, g));
            let (b, a) = (&q1 * &r, &q2 * &r);
            let comp = unitary_completion(&b, &a, 1e-10).unwrap();
            assert!(unitarity_defect(&comp.theta) < 1e-10);
            let bp = vstack(&[b.clone(), zeros(comp.r1, g)]).unwrap();
            let ap = vstack(&[a.clone(), zeros(comp.r2, g)]).unwrap();
            assert!(operator_norm(&(&comp.theta * bp - ap)) < 1e-10);
        }
    }

    #[test]
    fn completion_rejects_gram_mismatch() {
        let b = from_real_rows(1, 1, &[1.0]);
        let a = from_real_rows(1, 1, &[2.0]);
        assert!(matches!(unitary_completion(&b, &a, 1e-10), Err(Error::GramMismatch { .. })));
    }

    #[test]
    fn complement_is_deterministic_and_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = polar_isometry(&random(&mut rng, 6, 2));
        let c1 = orthonormal_complement(&q);
        let c2 = orthonormal_complement(&q);
        assert_eq!(c1, c2);
        let full = hstack(&[q, c1]).unwrap();
        assert!(unitarity_defect(&full) < 1e-13);
    }

    #[test]
    fn vec_solve_examples() {
        let rhs = from_real_rows(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let x = vec_solve(&[zeros(2, 2), zeros(2, 2)], &rhs).unwrap();
        assert!(operator_norm(&(x - &rhs)) < 1e-14);

        let f = from_real_rows(1, 1, &[0.5]);
        let x = vec_solve(&[f], &from_real_rows(1, 1, &[1.0])).unwrap();
        assert_abs_diff_eq!(x[(0, 0)].re, 4.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn vec_solve_singular() {
        let f = identity(2);
        assert!(matches!(vec_solve(&[f], &identity(2)), Err(Error::SingularMap { .. })));
    }

    #[test]
    fn vec_solve_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let fs: Vec<CMatrix> = (0..2).map(|_| random(&mut rng, 4, 4) * c(0.4, 0.0)).collect();
            let rhs = random(&mut rng, 4, 4);
            let x = vec_solve(&fs, &rhs).unwrap();
            let res = displacement_residual(&fs, &x, &rhs);
            assert!(res <= 1e-10 * (1.0 + operator_norm(&rhs)));
        }
    }

    #[test]
    fn lanczos_matches_dense_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [1, 5, 17, 40] {
            let a = random(&mut rng, n, n);
            let gram = a.adjoint() * &a;
            let est = lanczos_norm(n, n, |x| &gram * x);
            assert_abs_diff_eq!(est, operator_norm(&a), epsilon = 1e-10 * operator_norm(&a));
        }
    }

    #[test]
    fn block_matrix_access() {
        let mut b = BlockMatrix::zeros(vec![1, 2], vec![2, 1]);
        b.set_block(1, 0, &identity(2)).unwrap();
        assert_eq!(b.block(1, 0), identity(2));
        assert_eq!(b.dense().shape(), (3, 3));
        assert!(b.set_block(0, 0, &identity(2)).is_err());
    }
}
