//! Points of the operator unit ball, word products `Z*_σ` and the
//! Szegő-type kernel `K(Z, W) = Σ_σ Z*_σ (W*_σ)*`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{shape, Error, Result};
use crate::linalg::{identity, is_finite, is_psd, operator_norm, zeros, CMatrix};
use crate::random::{random_matrix, scale_to_margin};
use crate::words::{word_index, Word};

/// Default level cap for kernel series.
pub const KERNEL_DEPTH_CAP: usize = 64;

/// `ρ(Z) = ‖Σₖ Zₖ*Zₖ‖` for raw components.
pub fn ball_margin(components: &[CMatrix]) -> Result<f64> {
    let d = match components.first() {
        Some(z) => z.nrows(),
        None => return Err(shape("a point needs at least one component")),
    };
    if components.iter().any(|z| z.shape() != (d, d)) {
        return Err(shape("all components must be square of a common dimension"));
    }
    let mut sum = zeros(d, d);
    for z in components {
        sum += z.adjoint() * z;
    }
    Ok(operator_norm(&sum))
}

/// A point `Z = (Z₁, …, Z_N)` with `ρ(Z) < 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTuple {
    components: Vec<CMatrix>,
    margin: f64,
}

impl OperatorTuple {
    pub fn new(components: Vec<CMatrix>) -> Result<Self> {
        if components.iter().any(|z| !is_finite(z)) {
            return Err(shape("point components must be finite"));
        }
        let margin = ball_margin(&components)?;
        if margin >= 1.0 {
            return Err(Error::NotInBall { margin });
        }
        Ok(OperatorTuple { components, margin })
    }

    /// The origin of `B_N(C^d)`.
    pub fn zero(alphabet: usize, dim: usize) -> Self {
        OperatorTuple { components: vec![zeros(dim, dim); alphabet], margin: 0.0 }
    }

    /// Scalar point `(z₁, …, z_N)` in `B_N(C)`.
    pub fn scalar(coords: &[num_complex::Complex64]) -> Result<Self> {
        Self::new(coords.iter().map(|&z| CMatrix::from_element(1, 1, z)).collect())
    }

    /// The diagonal point `Zₖ = zₖ·I_d`.
    pub fn scalar_diagonal(coords: &[num_complex::Complex64], dim: usize) -> Result<Self> {
        Self::new(coords.iter().map(|&z| identity(dim) * z).collect())
    }

    pub fn alphabet(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].nrows()
    }

    pub fn components(&self) -> &[CMatrix] {
        &self.components
    }

    pub fn component(&self, letter: usize) -> &CMatrix {
        &self.components[letter - 1]
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// `Z*_σ = Z*_{i₁}···Z*_{i_k}`.
    pub fn word_product(&self, word: &Word) -> Result<CMatrix> {
        word.validate(self.alphabet())?;
        let mut out = identity(self.dim());
        for &l in word.letters() {
            out *= self.component(l).adjoint();
        }
        Ok(out)
    }

    pub fn same_shape(&self, other: &OperatorTuple) -> bool {
        self.alphabet() == other.alphabet() && self.dim() == other.dim()
    }
}

/// `Z*_σ` for all words up to a fixed level, stored level by level in word order.
#[derive(Clone, Debug)]
pub struct WordProductCache {
    alphabet: usize,
    levels: Vec<Vec<CMatrix>>,
}

impl WordProductCache {
    pub fn build(point: &OperatorTuple, max_level: usize) -> Self {
        let adjoints: Vec<CMatrix> = point.components().iter().map(|z| z.adjoint()).collect();
        let mut levels = vec![vec![identity(point.dim())]];
        for _ in 0..max_level {
            let prev = levels.last().expect("level 0 present");
            let mut next = Vec::with_capacity(prev.len() * adjoints.len());
            for zk in &adjoints {
                next.extend(prev.iter().map(|p| zk * p));
            }
            levels.push(next);
        }
        WordProductCache { alphabet: point.alphabet(), levels }
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, k: usize) -> &[CMatrix] {
        &self.levels[k]
    }

    pub fn get(&self, word: &Word) -> Result<&CMatrix> {
        let idx = word_index(word, self.alphabet)?;
        self.levels
            .get(idx.level)
            .map(|lvl| &lvl[idx.offset])
            .ok_or(Error::TruncationExceeded { level: idx.level, degree: self.max_level() })
    }
}

/// Kernel value with its truncation certificate.
#[derive(Clone, Debug)]
pub struct KernelValue {
    pub value: CMatrix,
    pub depth: usize,
    pub tail_bound: f64,
}

/// Smallest `D` with `r^{D+1}/(1−r) ≤ tol`.
pub fn geometric_depth(r: f64, tol: f64) -> usize {
    if r <= 0.0 {
        return 0;
    }
    let mut depth = 0;
    let mut term = r; // r^{depth+1}
    while term / (1.0 - r) > tol {
        term *= r;
        depth += 1;
        if depth > 100_000 {
            break;
        }
    }
    depth
}

/// `K(Z, W) = Σ_{|σ| ≤ D} Z*_σ (W*_σ)*` with `r = sqrt(ρ(Z)ρ(W))` and certified
/// tail `r^{D+1}/(1−r) ≤ tol`, using `S_m = Σₖ Z*ₖ S_{m−1} Wₖ`.
pub fn szego_kernel(
    z: &OperatorTuple,
    w: &OperatorTuple,
    tol: f64,
    depth_cap: usize,
) -> Result<KernelValue> {
    if !z.same_shape(w) {
        return Err(shape("kernel arguments must share N and dim E"));
    }
    let r = (z.margin() * w.margin()).sqrt();
    let depth = geometric_depth(r, tol);
    if depth > depth_cap {
        return Err(Error::DepthExceeded { needed: depth, cap: depth_cap });
    }
    let tail_bound = if r > 0.0 { r.powi(depth as i32 + 1) / (1.0 - r) } else { 0.0 };
    let value = level_sum(z, w, &identity(z.dim()), depth);
    Ok(KernelValue { value, depth, tail_bound })
}

/// `Σ_{m ≤ depth} Σ_{|σ|=m} Z*_σ · X · (W*_σ)*`.
pub(crate) fn level_sum(z: &OperatorTuple, w: &OperatorTuple, x: &CMatrix, depth: usize) -> CMatrix {
    let z_adj: Vec<CMatrix> = z.components().iter().map(|m| m.adjoint()).collect();
    let mut level = x.clone();
    let mut total = x.clone();
    for _ in 0..depth {
        let mut next = zeros(level.nrows(), level.ncols());
        for (za, wk) in z_adj.iter().zip(w.components()) {
            next += za * &level * wk;
        }
        total += &next;
        level = next;
    }
    total
}

/// `‖S_m(Z, Z)‖` for `m = 0..=depth`.
pub fn level_norms(z: &OperatorTuple, depth: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(depth + 1);
    let mut level = identity(z.dim());
    out.push(1.0);
    for _ in 0..depth {
        let mut next = zeros(z.dim(), z.dim());
        for zk in z.components() {
            next += zk.adjoint() * &level * zk;
        }
        out.push(operator_norm(&next));
        level = next;
    }
    out
}

/// `(I − (Z|W))^{-1}` with `(Z|W) = Σₖ Zₖ*Wₖ`; equals the kernel when `dim E = 1`.
pub fn closed_form_kernel(z: &OperatorTuple, w: &OperatorTuple) -> Result<CMatrix> {
    if !z.same_shape(w) {
        return Err(shape("kernel arguments must share N and dim E"));
    }
    let mut m = identity(z.dim());
    for (zk, wk) in z.components().iter().zip(w.components()) {
        m -= zk.adjoint() * wk;
    }
    m.try_inverse().ok_or_else(|| shape("I - (Z|W) is singular"))
}

/// Block Gram matrix `[K(Zⱼ, Zₖ)]`.
pub fn kernel_gram(points: &[OperatorTuple], tol: f64, depth_cap: usize) -> Result<CMatrix> {
    let d = points.first().map_or(0, |p| p.dim());
    let n = points.len();
    let mut out = zeros(n * d, n * d);
    for (j, zj) in points.iter().enumerate() {
        for (k, zk) in points.iter().enumerate() {
            let kv = szego_kernel(zj, zk, tol, depth_cap)?;
            out.view_mut((j * d, k * d), (d, d)).copy_from(&kv.value);
        }
    }
    Ok(out)
}

/// Outcome of [`closed_form_counterexample_search`].
#[derive(Clone, Debug)]
pub struct CounterexampleReport {
    /// Most negative eigenvalue of `[(I − (Zⱼ|Zₖ))^{-1}]` seen.
    pub min_eig: f64,
    /// Trial index where it was seen.
    pub worst_trial: usize,
    /// Largest `‖K − (I − (Z|W))^{-1}‖` over all pairs tried.
    pub max_kernel_gap: f64,
    pub trials: usize,
}

/// Searches random `dim E > 1` configurations for a non-positive block matrix
/// built from the scalar closed form. Diagnostic only.
pub fn closed_form_counterexample_search(
    seed: u64,
    trials: usize,
    points: usize,
    alphabet: usize,
    dim: usize,
    radius: f64,
) -> Result<CounterexampleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report =
        CounterexampleReport { min_eig: f64::INFINITY, worst_trial: 0, max_kernel_gap: 0.0, trials };
    for t in 0..trials {
        let pts: Vec<OperatorTuple> = (0..points)
            .map(|_| {
                let comps: Vec<CMatrix> =
                    (0..alphabet).map(|_| random_matrix(&mut rng, dim, dim)).collect();
                OperatorTuple::new(scale_to_margin(comps, radius))
            })
            .collect::<Result<_>>()?;
        let mut m = zeros(points * dim, points * dim);
        for (j, zj) in pts.iter().enumerate() {
            for (k, zk) in pts.iter().enumerate() {
                let closed = closed_form_kernel(zj, zk)?;
                let series = szego_kernel(zj, zk, 1e-12, 10_000)?;
                report.max_kernel_gap =
                    report.max_kernel_gap.max(operator_norm(&(&closed - &series.value)));
                m.view_mut((j * dim, k * dim), (dim, dim)).copy_from(&closed);
            }
        }
        let herm = crate::linalg::hermitian_part(&m);
        let v = is_psd(&herm, 1e-12)?;
        if v.min_eig < report.min_eig {
            report.min_eig = v.min_eig;
            report.worst_trial = t;
        }
    }
    Ok(report)
}
