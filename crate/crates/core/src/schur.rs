//! Truncated Schur-class elements: noncommutative power series with `d×d`
//! coefficients `c_σ`, stored by their first block row only.
//!
//! The full upper triangular operator is recovered from the replication rule
//! `T_{ij} = T_{i-1,j-1}^{⊕N}`, which in word coordinates says that the block
//! at row word `α` and column word `αγ` is `c_γ` and every other block is zero.

use std::collections::BTreeMap;

use nalgebra::{DMatrixView, DMatrixViewMut, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{shape, Error, Result};
use crate::linalg::{c, hstack, lanczos_norm, operator_norm, zeros, BlockMatrix, CMatrix, C64};
use crate::points::{OperatorTuple, WordProductCache};
use crate::random::random_matrix;
use crate::words::{level_size, level_start, word_index, words_up_to_count, Word};

/// Dense norms are used up to this matrix dimension, Lanczos beyond it.
const DENSE_NORM_LIMIT: usize = 320;
const LANCZOS_STEPS: usize = 120;

#[derive(Clone, Debug, PartialEq)]
pub struct SchurElement {
    alphabet: usize,
    dim: usize,
    /// `levels[j][offset]` is `c_σ` for the word of length `j` at `offset`.
    levels: Vec<Vec<CMatrix>>,
}

/// `T(Z)` with the truncation it was computed at.
#[derive(Clone, Debug)]
pub struct EvaluationResult {
    pub value: CMatrix,
    pub depth: usize,
    /// Bound on `‖Σ_{|σ|>K} c_σ (Z*_σ)*‖` for any contractive continuation
    /// of the coefficients; zero contribution for polynomial elements.
    pub tail_bound: f64,
}

impl SchurElement {
    pub fn zero(alphabet: usize, dim: usize, degree: usize) -> Self {
        let levels =
            (0..=degree).map(|j| vec![zeros(dim, dim); level_size(alphabet, j)]).collect();
        SchurElement { alphabet, dim, levels }
    }

    pub fn constant(value: CMatrix, alphabet: usize, degree: usize) -> Self {
        let mut t = Self::zero(alphabet, value.nrows(), degree);
        t.levels[0][0] = value;
        t
    }

    /// Builds an element from level-ordered coefficient lists.
    pub fn from_levels(alphabet: usize, dim: usize, levels: Vec<Vec<CMatrix>>) -> Result<Self> {
        if alphabet == 0 || levels.is_empty() {
            return Err(shape("a Schur element needs N ≥ 1 and at least the constant term"));
        }
        for (j, lvl) in levels.iter().enumerate() {
            if lvl.len() != level_size(alphabet, j) {
                return Err(shape(format!("level {j} needs {} coefficients", level_size(alphabet, j))));
            }
            if lvl.iter().any(|m| m.shape() != (dim, dim)) {
                return Err(shape(format!("level {j} has a coefficient that is not {dim}x{dim}")));
            }
        }
        Ok(SchurElement { alphabet, dim, levels })
    }

    /// Builds an element of degree `degree` from a sparse word map; absent words are zero.
    pub fn from_coefficients(
        alphabet: usize,
        dim: usize,
        degree: usize,
        coeffs: &BTreeMap<Word, CMatrix>,
    ) -> Result<Self> {
        let mut t = Self::zero(alphabet, dim, degree);
        for (w, m) in coeffs {
            t.set_coeff(w, m.clone())?;
        }
        Ok(t)
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, j: usize) -> &[CMatrix] {
        &self.levels[j]
    }

    pub fn coeff(&self, w: &Word) -> Result<&CMatrix> {
        let idx = word_index(w, self.alphabet)?;
        self.levels
            .get(idx.level)
            .map(|l| &l[idx.offset])
            .ok_or(Error::TruncationExceeded { level: idx.level, degree: self.degree() })
    }

    pub fn set_coeff(&mut self, w: &Word, value: CMatrix) -> Result<()> {
        if value.shape() != (self.dim, self.dim) {
            return Err(shape("coefficient has the wrong shape"));
        }
        let idx = word_index(w, self.alphabet)?;
        let degree = self.degree();
        let slot = self
            .levels
            .get_mut(idx.level)
            .ok_or(Error::TruncationExceeded { level: idx.level, degree })?;
        slot[idx.offset] = value;
        Ok(())
    }

    /// `T_{0j} = [c_σ]_{|σ|=j}` as a `d × d·N^j` row.
    pub fn row_block(&self, j: usize) -> Result<CMatrix> {
        let lvl = self
            .levels
            .get(j)
            .ok_or(Error::TruncationExceeded { level: j, degree: self.degree() })?;
        hstack(lvl)
    }

    /// Certified upper bound `Σ_j ‖T_{0j}‖` on the norm of the full operator.
    pub fn norm_upper_bound(&self) -> f64 {
        (0..=self.degree()).map(|j| operator_norm(&self.row_block(j).expect("level exists"))).sum()
    }

    pub fn scaled(&self, factor: C64) -> SchurElement {
        let levels =
            self.levels.iter().map(|l| l.iter().map(|m| m * factor).collect()).collect();
        SchurElement { alphabet: self.alphabet, dim: self.dim, levels }
    }

    /// Truncation to coefficients of length at most `degree`.
    pub fn truncated(&self, degree: usize) -> SchurElement {
        let keep = degree.min(self.degree());
        SchurElement {
            alphabet: self.alphabet,
            dim: self.dim,
            levels: self.levels[..=keep].to_vec(),
        }
    }

    fn check_level(&self, m: usize) -> Result<()> {
        if m > self.degree() {
            return Err(Error::TruncationExceeded { level: m, degree: self.degree() });
        }
        Ok(())
    }

    /// Dense `T^{(m)} = [T_{ij}]_{i,j ≤ m}` partitioned by levels.
    pub fn assemble_truncation(&self, m: usize) -> Result<BlockMatrix> {
        self.check_level(m)?;
        let (n, d) = (self.alphabet, self.dim);
        let dims: Vec<usize> = (0..=m).map(|i| d * level_size(n, i)).collect();
        let mut out = BlockMatrix::zeros(dims.clone(), dims);
        for i in 0..=m {
            for j in i..=m {
                let span = j - i;
                let row = self.row_block(span)?;
                let mut block = zeros(d * level_size(n, i), d * level_size(n, j));
                for a in 0..level_size(n, i) {
                    block.view_mut((a * d, a * row.ncols()), row.shape()).copy_from(&row);
                }
                out.set_block(i, j, &block)?;
            }
        }
        Ok(out)
    }

    /// Row `α` of `T^{(m)}x` is `Σ_j T_{0j}·x[α·level j]`, and for fixed
    /// `(|α|, j)` the chunks `x[αγ]` are contiguous, so each pair of levels
    /// is one product `T_{0j}·X` with `X` the level-`(i+j)` slice reshaped
    /// to `d·N^j × N^i`.
    fn level_pairs(&self, m: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let (n, d) = (self.alphabet, self.dim);
        (0..=m).flat_map(move |i| {
            (0..=(m - i).min(self.degree())).map(move |j| {
                (i, j, d * level_start(n, i), d * level_start(n, i + j))
            })
        })
    }

    /// `T^{(m)}·x` without assembling the matrix.
    pub fn apply_truncation(&self, m: usize, x: &DVector<C64>) -> DVector<C64> {
        let (n, d) = (self.alphabet, self.dim);
        let rows: Vec<CMatrix> = (0..=self.degree().min(m)).map(|j| self.row_block(j).expect("level")).collect();
        let mut y = DVector::<C64>::zeros(x.len());
        for (i, j, row_at, col_at) in self.level_pairs(m) {
            let (wide, count) = (d * level_size(n, j), level_size(n, i));
            let xs = DMatrixView::from_slice(&x.as_slice()[col_at..col_at + wide * count], wide, count);
            let mut ys = DMatrixViewMut::from_slice(&mut y.as_mut_slice()[row_at..row_at + d * count], d, count);
            ys.gemm(c(1.0, 0.0), &rows[j], &xs, c(1.0, 0.0));
        }
        y
    }

    /// `T^{(m)*}·y` without assembling the matrix.
    pub fn apply_truncation_adjoint(&self, m: usize, y: &DVector<C64>) -> DVector<C64> {
        let (n, d) = (self.alphabet, self.dim);
        let rows: Vec<CMatrix> = (0..=self.degree().min(m)).map(|j| self.row_block(j).expect("level")).collect();
        let mut x = DVector::<C64>::zeros(y.len());
        for (i, j, row_at, col_at) in self.level_pairs(m) {
            let (wide, count) = (d * level_size(n, j), level_size(n, i));
            let ys = DMatrixView::from_slice(&y.as_slice()[row_at..row_at + d * count], d, count);
            let mut xs = DMatrixViewMut::from_slice(&mut x.as_mut_slice()[col_at..col_at + wide * count], wide, count);
            xs.gemm_ad(c(1.0, 0.0), &rows[j], &ys, c(1.0, 0.0));
        }
        x
    }

    /// `‖T^{(m)}‖`, a lower bound on the norm of the full element that is
    /// nondecreasing in `m`.
    pub fn norm_lower_bound(&self, m: usize) -> Result<f64> {
        self.check_level(m)?;
        let dim = self.dim * words_up_to_count(self.alphabet, m);
        if dim <= DENSE_NORM_LIMIT {
            return Ok(operator_norm(self.assemble_truncation(m)?.dense()));
        }
        Ok(lanczos_norm(dim, LANCZOS_STEPS, |x| {
            self.apply_truncation_adjoint(m, &self.apply_truncation(m, x))
        }))
    }

    /// `T(Z) = Σ_{|σ| ≤ K} c_σ (Z*_σ)*`.
    pub fn evaluate(&self, z: &OperatorTuple) -> Result<EvaluationResult> {
        if z.alphabet() != self.alphabet || z.dim() != self.dim {
            return Err(shape("point and element must share N and dim E"));
        }
        if z.margin() >= 1.0 {
            return Err(Error::NotInBall { margin: z.margin() });
        }
        let degree = self.degree();
        let cache = WordProductCache::build(z, degree);
        let mut value = zeros(self.dim, self.dim);
        for j in 0..=degree {
            for (coeff, prod) in self.levels[j].iter().zip(cache.level(j)) {
                value += coeff * prod.adjoint();
            }
        }
        let root = z.margin().sqrt();
        let tail_bound = if root > 0.0 { root.powi(degree as i32 + 1) / (1.0 - root) } else { 0.0 };
        Ok(EvaluationResult { value, depth: degree, tail_bound })
    }

    /// Free-monoid convolution `(T·S)_σ = Σ_{σ = ατ} t_α s_τ`, truncated at the
    /// larger of the two degrees.
    pub fn multiply(&self, other: &SchurElement) -> Result<SchurElement> {
        if self.alphabet != other.alphabet || self.dim != other.dim {
            return Err(shape("factors must share N and dim E"));
        }
        let n = self.alphabet;
        let degree = self.degree().max(other.degree());
        let mut out = SchurElement::zero(n, self.dim, degree);
        for i in 0..=self.degree() {
            for (a, t) in self.levels[i].iter().enumerate() {
                for j in 0..=other.degree().min(degree - i) {
                    for (b, s) in other.levels[j].iter().enumerate() {
                        out.levels[i + j][a * level_size(n, j) + b] += t * s;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Random element with level-decaying Gaussian coefficients, scaled so that
/// the certified bound `Σ_j ‖T_{0j}‖` equals `margin`; hence the full
/// operator, and every truncation, has norm at most `margin`.
pub fn random_schur(seed: u64, alphabet: usize, dim: usize, degree: usize, margin: f64) -> Result<SchurElement> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidParameter(format!("margin {margin} must lie in (0, 1)")));
    }
    if alphabet == 0 || dim == 0 {
        return Err(Error::InvalidParameter("N and dim E must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<Vec<CMatrix>> = (0..=degree)
        .map(|j| {
            let weight = c(0.5f64.powi(j as i32), 0.0);
            (0..level_size(alphabet, j)).map(|_| random_matrix(&mut rng, dim, dim) * weight).collect()
        })
        .collect();
    let raw = SchurElement { alphabet, dim, levels };
    let bound = raw.norm_upper_bound();
    Ok(raw.scaled(c(margin / bound, 0.0)))
}

/// Finite-block check of `T·L(Z)* = diag[T(Z)]·L(Z)*`.
#[derive(Clone, Debug)]
pub struct PointEvaluationReport {
    pub rows_checked: usize,
    /// Largest `‖(T^{(m)}L(Z)*)_α − T(Z)(Z*_α)*‖` over rows `|α| ≤ m`.
    pub max_defect: f64,
    /// Largest slack `defect − tail bound` (non-positive when the identity holds).
    pub worst_excess: f64,
    pub holds: bool,
}

/// Compares the rows of `T^{(m)}·L(Z)*` (assembled densely, `L(Z)*` cut at
/// level `m`) with `diag[T(Z)]·L(Z)*`. Row `α` may differ only by the
/// coefficients of length `> m − |α|` that the cut drops, which are bounded
/// by `‖(Z*_α)*‖·Σ_j ‖T_{0j}‖ ρ(Z)^{j/2}`.
pub fn point_evaluation_identity(t: &SchurElement, z: &OperatorTuple, m: usize) -> Result<PointEvaluationReport> {
    let d = t.dim();
    let n = t.alphabet();
    let tm = t.assemble_truncation(m)?;
    let cache = WordProductCache::build(z, m);
    let kernel_col: Vec<CMatrix> = (0..=m).flat_map(|i| cache.level(i).iter().map(|p| p.adjoint())).collect();
    let stacked = crate::linalg::vstack(&kernel_col)?;
    let lhs = tm.dense() * &stacked;
    let tz = t.evaluate(z)?.value;
    let root = z.margin().sqrt();
    let row_norms: Vec<f64> = (0..=t.degree()).map(|j| operator_norm(&t.row_block(j).expect("level"))).collect();
    let mut report = PointEvaluationReport { rows_checked: 0, max_defect: 0.0, worst_excess: f64::NEG_INFINITY, holds: true };
    for i in 0..=m {
        let dropped: f64 = ((m - i + 1)..=t.degree()).map(|j| row_norms[j] * root.powi(j as i32)).sum();
        for (a, prod) in cache.level(i).iter().enumerate() {
            let row = level_start(n, i) + a;
            let lhs_row = lhs.view((row * d, 0), (d, d)).into_owned();
            let rhs_row = &tz * prod.adjoint();
            let defect = operator_norm(&(lhs_row - rhs_row));
            let bound = operator_norm(prod) * dropped;
            let excess = defect - bound * (1.0 + 1e-9) - 1e-12;
            report.rows_checked += 1;
            report.max_defect = report.max_defect.max(defect);
            report.worst_excess = report.worst_excess.max(excess);
            if excess > 0.0 {
                report.holds = false;
            }
        }
    }
    Ok(report)
}
