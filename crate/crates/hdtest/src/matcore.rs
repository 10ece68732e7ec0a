//! Dense matrix primitives shared by every other module: data samples,
//! per-sample summaries, the dual covariance matrix and its
//! eigendecomposition, and positive-semidefinite weighting matrices.
//!
//! Eigenvectors of the p×p sample covariance are always recovered through
//! the n×n dual matrix; p may be in the thousands while n stays small.

use nalgebra::{DMatrix, DVector};
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Relative threshold below which a dual eigenvalue is clamped to zero.
pub const EIGENVALUE_ZERO_TOL: f64 = 1e-12;

/// One population's data: p variables (rows) by n observations (columns).
#[derive(Debug, Clone)]
pub struct Sample {
    data: DMatrix<f64>,
}

impl Sample {
    /// Wraps a p×n matrix of observations. Rejects empty or non-finite data.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::BadDimension("sample must be non-empty".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Self { data })
    }

    /// Builds a sample from observation columns.
    pub fn from_columns(cols: &[DVector<f64>]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::BadDimension("sample must be non-empty".into()));
        }
        let p = cols[0].len();
        if cols.iter().any(|c| c.len() != p) {
            return Err(Error::DimensionMismatch(
                "observations have differing lengths".into(),
            ));
        }
        let data = DMatrix::from_fn(p, cols.len(), |i, j| cols[j][i]);
        Self::new(data)
    }

    /// Number of variables.
    pub fn p(&self) -> usize {
        self.data.nrows()
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Observation mean vector x̄.
    pub fn mean(&self) -> DVector<f64> {
        self.data.column_sum() / self.n() as f64
    }

    /// Centered data matrix X − X̄ (p×n).
    pub fn centered(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut out = self.data.clone();
        for mut col in out.column_iter_mut() {
            col -= &mean;
        }
        out
    }

    /// Loads a sample from CSV text: one observation per row, one variable
    /// per column, optional header row. The stored matrix is the transpose.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, record) in rdr.records().enumerate() {
            let record = record?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(vals) => rows.push(vals),
                // A non-numeric first row is treated as a header.
                Err(_) if idx == 0 => continue,
                Err(_) => {
                    return Err(Error::DimensionMismatch(format!(
                        "row {} contains non-numeric fields",
                        idx + 1
                    )))
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::BadDimension("csv contains no data rows".into()));
        }
        let p = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    r.len(),
                    p
                )));
            }
        }
        let n = rows.len();
        let data = DMatrix::from_fn(p, n, |i, j| rows[j][i]);
        Self::new(data)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }
}

/// Mean, centered data, and dual covariance of one sample.
///
/// The p×p covariance S_n is not stored; [`SampleSummary::cov`] materializes
/// it on demand. Everything downstream works from the centered matrix and
/// the n×n dual matrix S_D, which shares the nonzero eigenvalues of S_n.
#[derive(Debug, Clone)]
pub struct SampleSummary {
    mean: DVector<f64>,
    centered: DMatrix<f64>,
    dual_cov: DMatrix<f64>,
    trace_cov: f64,
}

/// Computes mean, centered matrix, dual covariance, and trace for a sample.
pub fn summarize(sample: &Sample) -> Result<SampleSummary> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let mean = sample.mean();
    let mut centered = sample.data().clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let mut dual_cov = centered.transpose() * &centered / (n - 1) as f64;
    // symmetrize away gemm roundoff
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (dual_cov[(i, j)] + dual_cov[(j, i)]);
            dual_cov[(i, j)] = v;
            dual_cov[(j, i)] = v;
        }
    }
    let trace_cov = dual_cov.trace();
    Ok(SampleSummary {
        mean,
        centered,
        dual_cov,
        trace_cov,
    })
}

impl SampleSummary {
    pub fn p(&self) -> usize {
        self.centered.nrows()
    }

    pub fn n(&self) -> usize {
        self.centered.ncols()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Centered data matrix X − X̄ (p×n).
    pub fn centered(&self) -> &DMatrix<f64> {
        &self.centered
    }

    /// Dual sample covariance S_D = (X−X̄)ᵀ(X−X̄)/(n−1).
    pub fn dual_cov(&self) -> &DMatrix<f64> {
        &self.dual_cov
    }

    /// tr(S_n) = tr(S_D).
    pub fn trace_cov(&self) -> f64 {
        self.trace_cov
    }

    /// Materializes the p×p sample covariance S_n.
    pub fn cov(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut cov = &self.centered * self.centered.transpose() / (n - 1) as f64;
        let p = cov.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov
    }
}

/// Ordered eigenpairs (λ̂_j, û_j), j = 1..n−1, of the dual covariance.
///
/// Eigenvalues are sorted descending and clamped to zero below
/// `EIGENVALUE_ZERO_TOL · λ̂₁`; the n-th eigenvalue is structurally zero
/// (the centered matrix annihilates the all-ones vector) and is dropped.
/// Each eigenvector is normalized so its largest-magnitude entry is positive.
#[derive(Debug, Clone)]
pub struct DualEigen {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    trace: f64,
}

/// Eigendecomposition of S_D.
pub fn dual_eigen(summary: &SampleSummary) -> Result<DualEigen> {
    let n = summary.n();
    let eig = summary
        .dual_cov
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 100_000)
        .ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let kept = n - 1;
    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = EIGENVALUE_ZERO_TOL * top;
    let mut values = Vec::with_capacity(kept);
    let mut vectors = DMatrix::zeros(n, kept);
    for (slot, &idx) in order.iter().take(kept).enumerate() {
        let lam = eig.eigenvalues[idx];
        values.push(if lam > tol { lam } else { 0.0 });
        let mut col = eig.eigenvectors.column(idx).clone_owned();
        canonical_sign(&mut col);
        vectors.set_column(slot, &col);
    }
    Ok(DualEigen {
        values,
        vectors,
        trace: summary.trace_cov,
    })
}

impl DualEigen {
    /// Number of retained eigenpairs (n−1).
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// λ̂ values, descending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// û_j for the j-th largest eigenvalue (0-based).
    pub fn vector(&self, j: usize) -> nalgebra::DVectorView<'_, f64> {
        self.vectors.column(j)
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// tr(S_D), carried over from the summary.
    pub fn trace(&self) -> f64 {
        self.trace
    }
}

/// Flips a vector in place so its largest-magnitude entry is positive.
pub(crate) fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = 0usize;
    let mut best_abs = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Unit eigenvector ĥ_j of S_n, recovered from the dual decomposition as
/// ĥ_j = {(n−1)λ̂_j}^{−1/2}(X−X̄)û_j.
pub fn full_eigenvector(summary: &SampleSummary, dual: &DualEigen, j: usize) -> Result<DVector<f64>> {
    let lam = dual.values()[j];
    let top = dual.values()[0];
    if lam <= EIGENVALUE_ZERO_TOL * top || lam <= 0.0 {
        return Err(Error::DegenerateEigenvalue { index: j });
    }
    let n = summary.n();
    let mut h = summary.centered() * dual.vector(j);
    h /= (((n - 1) as f64) * lam).sqrt();
    let norm = h.norm();
    h /= norm;
    Ok(h)
}

/// A positive-semidefinite weighting matrix, stored by structural form so
/// products with data matrices stay cheap.
#[derive(Debug, Clone)]
pub enum PsdMatrix {
    Identity { dim: usize },
    Diagonal { diag: DVector<f64> },
    Dense { entries: DMatrix<f64> },
    /// I − UUᵀ for a p×k matrix U with orthonormal columns.
    Projection { removed: DMatrix<f64> },
}

impl PsdMatrix {
    pub fn identity(dim: usize) -> Self {
        PsdMatrix::Identity { dim }
    }

    /// Diagonal matrix; entries must be finite and nonnegative.
    pub fn diagonal(diag: DVector<f64>) -> Result<Self> {
        if diag.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        let max = diag.iter().cloned().fold(0.0f64, f64::max);
        if diag.iter().any(|&v| v < -1e-8 * max.max(1.0)) {
            return Err(Error::BadFamilyParams(
                "diagonal weighting matrix has negative entries".into(),
            ));
        }
        Ok(PsdMatrix::Diagonal {
            diag: diag.map(|v| v.max(0.0)),
        })
    }

    /// Dense symmetric matrix. Symmetry is enforced here; semidefiniteness
    /// is only checked by [`PsdMatrix::validate`].
    pub fn dense(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::BadDimension("weighting matrix must be square".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        let scale = entries.amax().max(1.0);
        let p = entries.nrows();
        for i in 0..p {
            for j in (i + 1)..p {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-8 * scale {
                    return Err(Error::DimensionMismatch(
                        "weighting matrix is not symmetric".into(),
                    ));
                }
            }
        }
        Ok(PsdMatrix::Dense { entries })
    }

    /// Projection I − UUᵀ removing the span of U's columns.
    pub fn projection(removed: DMatrix<f64>) -> Result<Self> {
        let k = removed.ncols();
        let gram = removed.transpose() * &removed;
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - want).abs() > 1e-8 {
                    return Err(Error::BadFamilyParams(
                        "projection basis is not orthonormal".into(),
                    ));
                }
            }
        }
        Ok(PsdMatrix::Projection { removed })
    }

    pub fn dim(&self) -> usize {
        match self {
            PsdMatrix::Identity { dim } => *dim,
            PsdMatrix::Diagonal { diag } => diag.len(),
            PsdMatrix::Dense { entries } => entries.nrows(),
            PsdMatrix::Projection { removed } => removed.nrows(),
        }
    }

    /// A · X without materializing A.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            PsdMatrix::Identity { .. } => x.clone(),
            PsdMatrix::Diagonal { diag } => {
                let mut out = x.clone();
                for i in 0..out.nrows() {
                    let d = diag[i];
                    for j in 0..out.ncols() {
                        out[(i, j)] *= d;
                    }
                }
                out
            }
            PsdMatrix::Dense { entries } => entries * x,
            PsdMatrix::Projection { removed } => {
                let coef = removed.transpose() * x;
                x - removed * coef
            }
        }
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            PsdMatrix::Identity { .. } => v.clone(),
            PsdMatrix::Diagonal { diag } => v.component_mul(diag),
            PsdMatrix::Dense { entries } => entries * v,
            PsdMatrix::Projection { removed } => {
                let coef = removed.transpose() * v;
                v - removed * coef
            }
        }
    }

    /// xᵀ A y.
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        match self {
            PsdMatrix::Identity { .. } => x.dot(y),
            PsdMatrix::Diagonal { diag } => x.iter().zip(y.iter()).zip(diag.iter()).map(|((a, b), d)| a * b * d).sum(),
            PsdMatrix::Dense { entries } => (x.transpose() * entries * y)[(0, 0)],
            PsdMatrix::Projection { .. } => {
                // projection is idempotent: xᵀAy = (Ax)ᵀ(Ay)
                self.apply_vec(x).dot(&self.apply_vec(y))
            }
        }
    }

    /// Materializes the dense p×p matrix.
    pub fn entries(&self) -> DMatrix<f64> {
        match self {
            PsdMatrix::Identity { dim } => DMatrix::identity(*dim, *dim),
            PsdMatrix::Diagonal { diag } => DMatrix::from_diagonal(diag),
            PsdMatrix::Dense { entries } => entries.clone(),
            PsdMatrix::Projection { removed } => {
                let p = removed.nrows();
                DMatrix::identity(p, p) - removed * removed.transpose()
            }
        }
    }

    /// Symmetric square root A^{1/2}: elementwise for identity/diagonal,
    /// eigen square root for dense, and A itself for projections.
    pub fn sqrt(&self) -> Result<PsdMatrix> {
        match self {
            PsdMatrix::Identity { dim } => Ok(PsdMatrix::Identity { dim: *dim }),
            PsdMatrix::Diagonal { diag } => Ok(PsdMatrix::Diagonal {
                diag: diag.map(|v| v.max(0.0).sqrt()),
            }),
            PsdMatrix::Projection { removed } => Ok(PsdMatrix::Projection {
                removed: removed.clone(),
            }),
            PsdMatrix::Dense { entries } => {
                let eig = entries
                    .clone()
                    .try_symmetric_eigen(f64::EPSILON, 100_000)
                    .ok_or(Error::EigenFailure)?;
                Ok(PsdMatrix::Dense {
                    entries: symmetric_sqrt_from_eigen(&eig),
                })
            }
        }
    }

    /// Checks the semidefiniteness and projection-idempotence invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            PsdMatrix::Identity { .. } | PsdMatrix::Diagonal { .. } => Ok(()),
            PsdMatrix::Projection { removed } => {
                // idempotence of I − UUᵀ reduces to UᵀU = I
                let k = removed.ncols();
                let gram = removed.transpose() * removed;
                let dev = (&gram - DMatrix::identity(k, k)).amax();
                if dev > 1e-8 {
                    return Err(Error::BadFamilyParams(format!(
                        "projection not idempotent (deviation {dev:.2e})"
                    )));
                }
                Ok(())
            }
            PsdMatrix::Dense { entries } => {
                let eig = entries
                    .clone()
                    .try_symmetric_eigen(f64::EPSILON, 100_000)
                    .ok_or(Error::EigenFailure)?;
                let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
                let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
                if min < -1e-8 * max.max(1.0) {
                    return Err(Error::BadFamilyParams(format!(
                        "matrix has eigenvalue {min:.3e}, not positive semidefinite"
                    )));
                }
                Ok(())
            }
        }
    }
}

pub(crate) fn symmetric_sqrt_from_eigen(
    eig: &nalgebra::SymmetricEigen<f64, nalgebra::Dyn>,
) -> DMatrix<f64> {
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gauss_matrix(p: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(p, n, |_, _| rng.sample(StandardNormal))
    }

    fn sample_from(cols: &[&[f64]]) -> Sample {
        let vecs: Vec<DVector<f64>> = cols.iter().map(|c| DVector::from_row_slice(c)).collect();
        Sample::from_columns(&vecs).unwrap()
    }

    #[test]
    fn summarize_identical_observations() {
        let s = sample_from(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let sum = summarize(&s).unwrap();
        assert_relative_eq!(sum.mean()[0], 1.0);
        assert_relative_eq!(sum.mean()[1], 0.0);
        assert_eq!(sum.cov().amax(), 0.0);
    }

    #[test]
    fn summarize_univariate() {
        let s = sample_from(&[&[0.0], &[1.0], &[2.0]]);
        let sum = summarize(&s).unwrap();
        assert_relative_eq!(sum.mean()[0], 1.0);
        assert_relative_eq!(sum.cov()[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sum.trace_cov(), 1.0, epsilon = 1e-12);
        let dual = dual_eigen(&sum).unwrap();
        assert_relative_eq!(dual.values()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn summarize_rejects_tiny_samples() {
        let s = sample_from(&[&[1.0, 2.0]]);
        assert!(matches!(
            summarize(&s),
            Err(Error::TooFewObservations { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn non_finite_data_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert!(matches!(Sample::new(bad), Err(Error::NonFiniteData)));
        let inf = DMatrix::from_row_slice(1, 2, &[1.0, f64::INFINITY]);
        assert!(matches!(Sample::new(inf), Err(Error::NonFiniteData)));
    }

    #[test]
    fn cov_and_dual_share_nonzero_eigenvalues() {
        let s = Sample::new(gauss_matrix(5, 6, 7)).unwrap();
        let sum = summarize(&s).unwrap();
        let cov_eig = sum.cov().symmetric_eigen();
        let mut cov_vals: Vec<f64> = cov_eig.eigenvalues.iter().cloned().collect();
        cov_vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let dual = dual_eigen(&sum).unwrap();
        for (j, &lam) in dual.values().iter().enumerate() {
            assert_relative_eq!(lam, cov_vals[j].max(0.0), epsilon = 1e-8 * cov_vals[0]);
        }
        // trace identities
        let sum_vals: f64 = dual.values().iter().sum();
        assert_relative_eq!(sum_vals, sum.trace_cov(), max_relative = 1e-8);
        assert_relative_eq!(sum.cov().trace(), sum.trace_cov(), max_relative = 1e-10);
    }

    #[test]
    fn dual_eigen_equilateral_triangle() {
        // three points on a circle of radius sqrt(8/3): dual spectrum is (2, 2)
        let r = (8.0f64 / 3.0).sqrt();
        let cols: Vec<DVector<f64>> = (0..3)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                DVector::from_row_slice(&[r * th.cos(), r * th.sin()])
            })
            .collect();
        let s = Sample::from_columns(&cols).unwrap();
        let dual = dual_eigen(&summarize(&s).unwrap()).unwrap();
        assert_eq!(dual.len(), 2);
        assert_relative_eq!(dual.values()[0], 2.0, epsilon = 1e-10);
        assert_relative_eq!(dual.values()[1], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn dual_eigenvectors_orthogonal_to_ones() {
        let s = Sample::new(gauss_matrix(6, 5, 11)).unwrap();
        let dual = dual_eigen(&summarize(&s).unwrap()).unwrap();
        let ones = DVector::from_element(5, 1.0);
        for j in 0..dual.len() {
            if dual.values()[j] > 0.0 {
                assert!(dual.vector(j).dot(&ones).abs() < 1e-8);
            }
            for j2 in (j + 1)..dual.len() {
                assert!(dual.vector(j).dot(&dual.vector(j2).clone_owned()).abs() < 1e-8);
            }
            assert_relative_eq!(dual.vector(j).norm(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn full_eigenvector_axis_aligned() {
        // variance only in coordinate 1
        let s = sample_from(&[&[1.0, 0.0, 0.0], &[3.0, 0.0, 0.0], &[5.0, 0.0, 0.0]]);
        let sum = summarize(&s).unwrap();
        let dual = dual_eigen(&sum).unwrap();
        let h = full_eigenvector(&sum, &dual, 0).unwrap();
        assert_relative_eq!(h[0].abs(), 1.0, epsilon = 1e-12);
        assert!(h[1].abs() < 1e-12 && h[2].abs() < 1e-12);
    }

    #[test]
    fn full_eigenvector_residuals() {
        let s = Sample::new(gauss_matrix(8, 6, 13)).unwrap();
        let sum = summarize(&s).unwrap();
        let dual = dual_eigen(&sum).unwrap();
        let cov = sum.cov();
        let top = dual.values()[0];
        for j in 0..dual.len() {
            if dual.values()[j] <= EIGENVALUE_ZERO_TOL * top {
                continue;
            }
            let h = full_eigenvector(&sum, &dual, j).unwrap();
            assert_relative_eq!(h.norm(), 1.0, epsilon = 1e-10);
            let resid = (&cov * &h - dual.values()[j] * &h).norm();
            assert!(resid <= 1e-6 * top, "residual {resid} too large for j={j}");
        }
    }

    #[test]
    fn full_eigenvector_univariate() {
        let s = sample_from(&[&[0.0], &[1.0], &[2.0]]);
        let sum = summarize(&s).unwrap();
        let dual = dual_eigen(&sum).unwrap();
        let h = full_eigenvector(&sum, &dual, 0).unwrap();
        assert_relative_eq!(h[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigen_roundtrip_reconstructs_cov() {
        let s = Sample::new(gauss_matrix(7, 5, 17)).unwrap();
        let sum = summarize(&s).unwrap();
        let dual = dual_eigen(&sum).unwrap();
        let cov = sum.cov();
        let mut recon = DMatrix::zeros(7, 7);
        for j in 0..dual.len() {
            if dual.values()[j] == 0.0 {
                continue;
            }
            let h = full_eigenvector(&sum, &dual, j).unwrap();
            recon += dual.values()[j] * &h * h.transpose();
        }
        let rel = (&recon - &cov).norm() / cov.norm();
        assert!(rel < 1e-6, "relative reconstruction error {rel}");
    }

    #[test]
    fn degenerate_eigenvalue_rejected() {
        let s = sample_from(&[&[1.0, 0.0], &[2.0, 0.0], &[3.0, 0.0]]);
        let sum = summarize(&s).unwrap();
        let dual = dual_eigen(&sum).unwrap();
        assert!(matches!(
            full_eigenvector(&sum, &dual, 1),
            Err(Error::DegenerateEigenvalue { index: 1 })
        ));
    }

    #[test]
    fn projection_idempotent() {
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let proj = PsdMatrix::projection(u).unwrap();
        proj.validate().unwrap();
        let m = proj.entries();
        let diff = (&m * &m - &m).amax();
        assert!(diff < 1e-12);
        // its own square root
        let sq = proj.sqrt().unwrap().entries();
        assert!((sq - m).amax() < 1e-12);
    }

    #[test]
    fn dense_sqrt_squares_back() {
        let a = PsdMatrix::dense(DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let r = a.sqrt().unwrap().entries();
        assert_relative_eq!((&r * &r - a.entries()).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_roundtrip_with_header() {
        let text = "a,b,c\n1,2,3\n4,5,6\n";
        let s = Sample::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!((s.p(), s.n()), (3, 2));
        assert_eq!(s.data()[(2, 1)], 6.0);
        let no_header = Sample::from_csv_reader("1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(no_header.data(), s.data());
    }

    #[test]
    fn csv_rejects_ragged_rows() {
        let res = Sample::from_csv_reader("1,2,3\n4,5\n".as_bytes());
        assert!(matches!(res, Err(Error::DimensionMismatch(_))));
    }
}
