//! U-statistic and spectral estimators: the unbiased tr(Σ_A²) statistic,
//! the variance estimator K̂₁(A), noise-reduced eigenvalues and eigenvectors,
//! bias-reduced score vectors, and cross-data-matrix (CDM) estimates.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matcore::{dual_eigen, summarize, DualEigen, PsdMatrix, Sample, SampleSummary};

/// Unbiased estimate of tr(Σ_A²) from one sample.
#[derive(Debug, Clone, Copy)]
pub struct TraceSquareEstimate {
    /// W_n(A); may be negative on unlucky samples.
    pub value: f64,
    pub n_used: usize,
}

/// W_n(A): the three-term U-statistic over distinct index tuples,
/// reduced to O(n²) work on the Gram matrix B = XᵀAX.
pub fn w_stat(sample: &Sample, a: &PsdMatrix) -> Result<TraceSquareEstimate> {
    let n = sample.n();
    if n < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: n });
    }
    if a.dim() != sample.p() {
        return Err(Error::DimensionMismatch(format!(
            "weighting matrix is {}x{} but sample has p={}",
            a.dim(),
            a.dim(),
            sample.p()
        )));
    }
    let ax = a.apply(sample.data());
    let mut b = sample.data().transpose() * ax;
    symmetrize(&mut b);
    Ok(TraceSquareEstimate {
        value: w_from_gram(&b),
        n_used: n,
    })
}

/// Falling factorial n·(n−1)···(n−r+1).
fn perm(n: usize, r: usize) -> f64 {
    (0..r).map(|i| (n - i) as f64).product()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inclusion–exclusion evaluation of the three sums over distinct tuples.
///
/// With b_ij = x_iᵀAx_j, row sums r_j, diagonal d_j, u_j = r_j − d_j,
/// O = Σ_{i≠j} b_ij, F2 = Σ b_ij², D2 = Σ d_j²:
///   Σ_{i≠j} b_ij²          = F2 − D2
///   Σ_{i≠j≠s} b_ij b_js    = Σ r_j² − 2 Σ d_j r_j − F2 + 2 D2
///   Σ_{i≠j≠s≠t} b_ij b_st  = O² − 4 Σ u_j² + 2 (F2 − D2)
pub(crate) fn w_from_gram(b: &DMatrix<f64>) -> f64 {
    let n = b.nrows();
    let mut f2 = 0.0;
    let mut d2 = 0.0;
    let mut sum_r2 = 0.0;
    let mut t_dr = 0.0;
    let mut su2 = 0.0;
    let mut total = 0.0;
    for j in 0..n {
        let mut r = 0.0;
        let mut c2 = 0.0;
        for i in 0..n {
            let v = b[(i, j)];
            r += v;
            c2 += v * v;
        }
        let d = b[(j, j)];
        f2 += c2;
        d2 += d * d;
        sum_r2 += r * r;
        t_dr += d * r;
        su2 += (r - d) * (r - d);
        total += r;
    }
    let off_total = total - b.trace();
    let term1 = (f2 - d2) / perm(n, 2);
    let term2 = sum_r2 - 2.0 * t_dr - f2 + 2.0 * d2;
    let term3 = off_total * off_total - 4.0 * su2 + 2.0 * (f2 - d2);
    term1 - 2.0 * term2 / perm(n, 3) + term3 / perm(n, 4)
}

/// Estimator of the leading variance component:
/// K̂₁(A) = 2 Σᵢ W_{i n_i}(A)/{n_i(n_i−1)} + 4 tr(S₁AS₂A)/(n₁n₂).
///
/// May be negative; callers decide how to guard.
pub fn k1_hat(s1: &Sample, s2: &Sample, a: &PsdMatrix) -> Result<f64> {
    if s1.p() != s2.p() {
        return Err(Error::DimensionMismatch(format!(
            "samples have p={} and p={}",
            s1.p(),
            s2.p()
        )));
    }
    let w1 = w_stat(s1, a)?.value;
    let w2 = w_stat(s2, a)?.value;
    let (n1, n2) = (s1.n() as f64, s2.n() as f64);
    let c1 = s1.centered();
    let c2 = s2.centered();
    // tr(S₁AS₂A) = ‖C₁ᵀ A C₂‖_F² / {(n₁−1)(n₂−1)}
    let m = c1.transpose() * a.apply(&c2);
    let tr_cross = m.norm_squared() / ((n1 - 1.0) * (n2 - 1.0));
    Ok(2.0 * (w1 / (n1 * (n1 - 1.0)) + w2 / (n2 * (n2 - 1.0))) + 4.0 * tr_cross / (n1 * n2))
}

/// Noise-reduced eigenvalues λ̃_j = λ̂_j − {tr(S_D) − Σ_{l≤j} λ̂_l}/(n−1−j)
/// for j = 1..n−2, clamped at zero.
pub fn nr_eigenvalues(dual: &DualEigen) -> Result<Vec<f64>> {
    let n = dual.len() + 1;
    if n < 3 {
        return Err(Error::TooFewObservations { needed: 3, got: n });
    }
    let trace = dual.trace();
    let mut out = Vec::with_capacity(n - 2);
    let mut partial = 0.0;
    for j in 0..(n - 2) {
        partial += dual.values()[j];
        let denom = (n - 2 - j) as f64;
        let v = dual.values()[j] - (trace - partial) / denom;
        out.push(v.max(0.0));
    }
    Ok(out)
}

/// Noise-reduced direction vectors h̃_j = {(n−1)λ̃_j}^{−1/2}(X−X̄)û_j for
/// j < k, returned as the columns of a p×k matrix. Not unit vectors:
/// ‖h̃_j‖² = λ̂_j/λ̃_j.
pub fn nr_eigenvectors(
    summary: &SampleSummary,
    dual: &DualEigen,
    k: usize,
) -> Result<DMatrix<f64>> {
    let n = summary.n();
    if k + 2 > n {
        return Err(Error::BadDimension(format!(
            "k={k} exceeds n−2={}",
            n.saturating_sub(2)
        )));
    }
    let lam_tilde = nr_eigenvalues(dual)?;
    let mut out = DMatrix::zeros(summary.p(), k);
    for j in 0..k {
        if lam_tilde[j] <= 0.0 {
            return Err(Error::DegenerateEigenvalue { index: j });
        }
        let mut col = summary.centered() * dual.vector(j);
        col /= (((n - 1) as f64) * lam_tilde[j]).sqrt();
        out.set_column(j, &col);
    }
    Ok(out)
}

/// Leave-one-out direction vectors h̃_{jl} and the bias-reduced scores
/// x̃_{jl} = h̃_{jl}ᵀ x_l.
#[derive(Debug, Clone)]
pub struct ScoreVectors {
    /// `per_observation[j]` is p×n; column l holds h̃_{jl}.
    pub per_observation: Vec<DMatrix<f64>>,
    /// k×n matrix of scores x̃_{jl}.
    pub scores: DMatrix<f64>,
    /// c_n = (n−1)^{1/2}/(n−2).
    pub c_n: f64,
}

/// Materializes h̃_{jl} for j < k together with the scores x̃_{jl}.
///
/// h̃_{jl} = c_n λ̃_j^{−1/2}(X−X̄)û_{jl}, where û_{jl} is û_j with its l-th
/// entry replaced by −û_{jl}/(n−1); their mean over l recovers h̃_j.
pub fn score_vectors(summary: &SampleSummary, dual: &DualEigen, k: usize) -> Result<ScoreVectors> {
    let n = summary.n();
    if n < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: n });
    }
    let lam_tilde = nr_eigenvalues(dual)?;
    let scores = bias_reduced_scores(summary, dual, &lam_tilde, k)?;
    let c_n = ((n - 1) as f64).sqrt() / (n - 2) as f64;
    let adj = n as f64 / (n - 1) as f64;
    let centered = summary.centered();
    let mut per_observation = Vec::with_capacity(k);
    for j in 0..k {
        let base = centered * dual.vector(j);
        let scale = c_n / lam_tilde[j].sqrt();
        let mut mat = DMatrix::zeros(summary.p(), n);
        for l in 0..n {
            let u_jl = dual.vector(j)[l];
            let col = (&base - adj * u_jl * centered.column(l)) * scale;
            mat.set_column(l, &col);
        }
        per_observation.push(mat);
    }
    Ok(ScoreVectors {
        per_observation,
        scores,
        c_n,
    })
}

/// Scores x̃_{jl} (k×n) computed from Gram products only.
///
/// Uses (X−X̄)ᵀX = (n−1)S_D + {(X−X̄)ᵀx̄}1ᵀ, so no p-length vectors are
/// touched beyond one O(pn) pass.
pub(crate) fn bias_reduced_scores(
    summary: &SampleSummary,
    dual: &DualEigen,
    lam_tilde: &[f64],
    k: usize,
) -> Result<DMatrix<f64>> {
    let n = summary.n();
    if n < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: n });
    }
    if k + 2 > n {
        return Err(Error::BadDimension(format!(
            "k={k} exceeds n−2={}",
            n.saturating_sub(2)
        )));
    }
    let c_n = ((n - 1) as f64).sqrt() / (n - 2) as f64;
    let adj = n as f64 / (n - 1) as f64;
    // g̃ = (X−X̄)ᵀX, column l lists (x_m−x̄)ᵀx_l over m
    let cm = summary.centered().transpose() * summary.mean();
    let gt = summary.dual_cov() * (n - 1) as f64
        + DMatrix::from_fn(n, n, |m, _| cm[m]);
    let mut scores = DMatrix::zeros(k, n);
    for j in 0..k {
        if j >= lam_tilde.len() || lam_tilde[j] <= 0.0 {
            return Err(Error::DegenerateEigenvalue { index: j });
        }
        let scale = c_n / lam_tilde[j].sqrt();
        let proj = dual.vector(j).transpose() * &gt;
        for l in 0..n {
            let u_jl = dual.vector(j)[l];
            scores[(j, l)] = scale * (proj[(0, l)] - adj * u_jl * gt[(l, l)]);
        }
    }
    Ok(scores)
}

/// Cross-data-matrix estimates from the deterministic half split.
#[derive(Debug, Clone)]
pub struct CdmEstimates {
    /// Singular values λ́_j of S_{D(1)}, descending. The last one is
    /// structurally zero (centering makes rank(S_{D(1)}) ≤ n₍₂₎−1) and is
    /// clamped exactly.
    pub singular: Vec<f64>,
    /// Ψ̂_{(j)} for j = 1..n₍₂₎ as exact tail sums of squared singular
    /// values, so Ψ̂_{(j)} − Ψ̂_{(j+1)} = λ́_j² holds identically.
    pub psi: Vec<f64>,
    /// Sizes of the two halves (n₍₁₎ = ⌈n/2⌉, n₍₂₎ = n − n₍₁₎).
    pub split: (usize, usize),
}

impl CdmEstimates {
    /// Ψ̂_{(j)} with 1-based j; zero beyond the stored range.
    pub fn psi_at(&self, j: usize) -> f64 {
        assert!(j >= 1, "psi index is 1-based");
        self.psi.get(j - 1).copied().unwrap_or(0.0)
    }
}

/// CDM estimates of eigenvalues and tail energies Ψ_{(j)} = Σ_{l≥j} λ_l².
pub fn cdm_estimates(sample: &Sample) -> Result<CdmEstimates> {
    let n = sample.n();
    if n < 6 {
        return Err(Error::TooFewObservations { needed: 6, got: n });
    }
    cdm_estimates_core(sample)
}

/// Same computation with the weaker n ≥ 4 bound, for internal use by the
/// eigenstructure-adjusted test at very small n.
pub(crate) fn cdm_estimates_core(sample: &Sample) -> Result<CdmEstimates> {
    let n = sample.n();
    if n < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: n });
    }
    let n1 = n.div_ceil(2);
    let n2 = n - n1;

    let x1 = sample.data().columns(0, n1).clone_owned();
    let x2 = sample.data().columns(n1, n2).clone_owned();
    let c1 = center_columns(&x1);
    let c2 = center_columns(&x2);
    let scale = (((n1 - 1) * (n2 - 1)) as f64).sqrt();
    let sd1 = c1.transpose() * c2 / scale; // n₍₁₎ × n₍₂₎
    let mut singular: Vec<f64> = sd1.singular_values().iter().cloned().collect();
    singular.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // rank(S_{D(1)}) ≤ n₍₂₎ − 1: the smallest singular value is structural noise
    if let Some(last) = singular.last_mut() {
        *last = 0.0;
    }
    let mut psi = vec![0.0; singular.len()];
    let mut tail = 0.0;
    for j in (0..singular.len()).rev() {
        tail += singular[j] * singular[j];
        psi[j] = tail;
    }
    Ok(CdmEstimates {
        singular,
        psi,
        split: (n1, n2),
    })
}

fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    let mean = x.column_sum() / n as f64;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        col -= &mean;
    }
    out
}

/// All per-population spectral quantities used by the eigenstructure-adjusted
/// procedures, computed with one eigendecomposition and one Gram pass.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    /// λ̂_j, j = 1..n−1 (descending).
    pub lam_hat: Vec<f64>,
    /// λ̃_j, j = 1..n−2.
    pub lam_tilde: Vec<f64>,
    /// CDM singular values λ́_j.
    pub lam_cdm: Vec<f64>,
    /// CDM tail energies Ψ̂_{(j)}, j = 1..n₍₂₎.
    pub psi_hat: Vec<f64>,
    /// p×k matrix of noise-reduced vectors h̃_j.
    pub h_tilde: DMatrix<f64>,
    /// p×k matrix of unit sample eigenvectors ĥ_j.
    pub h_hat: DMatrix<f64>,
    /// k×n matrix of bias-reduced scores x̃_{jl}.
    pub scores: DMatrix<f64>,
    pub c_n: f64,
    pub k: usize,
}

impl SpectralEstimate {
    /// Computes the estimate for the leading k directions. Requires n ≥ 4
    /// and λ̃_j > 0 for all j < k.
    pub fn compute(sample: &Sample, k: usize) -> Result<Self> {
        let n = sample.n();
        if n < 4 {
            return Err(Error::TooFewObservations { needed: 4, got: n });
        }
        let summary = summarize(sample)?;
        let dual = dual_eigen(&summary)?;
        let lam_tilde = nr_eigenvalues(&dual)?;
        let scores = bias_reduced_scores(&summary, &dual, &lam_tilde, k)?;
        let h_tilde = nr_eigenvectors(&summary, &dual, k)?;
        let mut h_hat = DMatrix::zeros(sample.p(), k);
        for j in 0..k {
            let h = crate::matcore::full_eigenvector(&summary, &dual, j)?;
            h_hat.set_column(j, &h);
        }
        let cdm = cdm_estimates_core(sample)?;
        let c_n = ((n - 1) as f64).sqrt() / (n - 2) as f64;
        Ok(SpectralEstimate {
            lam_hat: dual.values().to_vec(),
            lam_tilde,
            lam_cdm: cdm.singular,
            psi_hat: cdm.psi,
            h_tilde,
            h_hat,
            scores,
            c_n,
            k,
        })
    }

    /// Ψ̂_{(j)} with 1-based j; zero beyond the stored range.
    pub fn psi_at(&self, j: usize) -> f64 {
        assert!(j >= 1, "psi index is 1-based");
        self.psi_hat.get(j - 1).copied().unwrap_or(0.0)
    }
}
