//! Model diagnosis: decide between the non-strongly-spiked (NSSE) and
//! strongly spiked (SSE) eigenvalue models via the η̂ rule, and select the
//! number of spike directions k̂ via the τ̂ rule on CDM tail-energy ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{cdm_estimates, nr_eigenvalues, w_stat};
use crate::matcore::{dual_eigen, summarize, PsdMatrix, Sample};

/// Threshold function κ(n) separating NSSE from SSE evidence.
///
/// The default √(log n / n) reproduces the reference values κ(47)=0.286 and
/// κ(25)=0.359; any n^{−c} with c ∈ (0, 1/2) is also admissible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaFn {
    #[default]
    SqrtLogOverN,
    PowerLaw {
        c: f64,
    },
}

impl KappaFn {
    pub fn eval(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            KappaFn::SqrtLogOverN => (nf.ln() / nf).sqrt(),
            KappaFn::PowerLaw { c } => nf.powf(-c),
        }
    }
}

/// κ(n) = √(log n / n), natural logarithm.
pub fn kappa(n: usize) -> f64 {
    KappaFn::SqrtLogOverN.eval(n)
}

/// Verdict of the SSE/NSSE check plus, when requested, the selected spike
/// counts and the τ̃ trace that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDiagnosis {
    pub eta1: f64,
    pub eta2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// W_{i n_i} ≤ 0 forced η̂_i to +∞.
    pub eta1_degenerate: bool,
    pub eta2_degenerate: bool,
    /// true when η̂_i ≥ κ(n_i) for at least one population.
    pub sse: bool,
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    /// τ̃_{(j)} = τ̂_{(j)}{1 + j·κ(n)} values examined by the k̂ scan.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_trace1: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_trace2: Option<Vec<f64>>,
}

/// η̂_i = λ̃_{i1}²/W_{i n_i}; the SSE model is claimed as soon as one
/// population has η̂_i ≥ κ(n_i). A nonpositive W maps to η̂ = +∞ (spike
/// evidence) rather than an error.
pub fn sse_check(s1: &Sample, s2: &Sample, kappa_fn: &KappaFn) -> Result<ModelDiagnosis> {
    let (eta1, deg1) = eta_hat(s1)?;
    let (eta2, deg2) = eta_hat(s2)?;
    let kappa1 = kappa_fn.eval(s1.n());
    let kappa2 = kappa_fn.eval(s2.n());
    Ok(ModelDiagnosis {
        eta1,
        eta2,
        kappa1,
        kappa2,
        eta1_degenerate: deg1,
        eta2_degenerate: deg2,
        sse: eta1 >= kappa1 || eta2 >= kappa2,
        k1: None,
        k2: None,
        tau_trace1: None,
        tau_trace2: None,
    })
}

fn eta_hat(sample: &Sample) -> Result<(f64, bool)> {
    let n = sample.n();
    if n < 4 {
        return Err(Error::TooFewObservations { needed: 4, got: n });
    }
    let w = w_stat(sample, &PsdMatrix::identity(sample.p()))?.value;
    let dual = dual_eigen(&summarize(sample)?)?;
    let lam_tilde_1 = nr_eigenvalues(&dual)?[0];
    // λ̃₁ = 0 means no spike evidence at all, whatever W is.
    if lam_tilde_1 <= crate::matcore::EIGENVALUE_ZERO_TOL * dual.values()[0] {
        return Ok((0.0, false));
    }
    if w <= 0.0 {
        return Ok((f64::INFINITY, true));
    }
    Ok((lam_tilde_1 * lam_tilde_1 / w, false))
}

pub(crate) struct SpikeScan {
    pub k_hat: usize,
    pub tau_tilde: Vec<f64>,
}

/// Scans j = 0, 1, … for the first j with τ̂_{(j+1)}{1+(j+1)κ(n)} > 1,
/// capped at n₍₂₎ − 2. A zero Ψ̂ during the scan returns the cap.
pub(crate) fn spike_scan(sample: &Sample, kappa_fn: &KappaFn) -> Result<SpikeScan> {
    let cdm = cdm_estimates(sample)?;
    let (_, n2) = cdm.split;
    let cap = n2 - 2;
    let kap = kappa_fn.eval(sample.n());
    let mut tau_tilde = Vec::new();
    let mut k_hat = cap;
    for j in 0..=cap {
        let psi_j1 = cdm.psi_at(j + 1);
        let psi_j2 = cdm.psi_at(j + 2);
        if psi_j1 <= 0.0 {
            k_hat = k_hat.min(cap);
            break;
        }
        let tau = psi_j2 / psi_j1;
        let tt = tau * (1.0 + (j + 1) as f64 * kap);
        tau_tilde.push(tt);
        if tt > 1.0 {
            k_hat = j;
            break;
        }
    }
    Ok(SpikeScan { k_hat, tau_tilde })
}

/// Spike count k̂ = min{k̂₀, n₍₂₎−2} from the first-integer rule.
pub fn select_k(sample: &Sample, kappa_fn: &KappaFn) -> Result<usize> {
    Ok(spike_scan(sample, kappa_fn)?.k_hat)
}

/// Full diagnosis: η̂ verdict plus per-population spike counts.
pub fn diagnose(s1: &Sample, s2: &Sample, kappa_fn: &KappaFn) -> Result<ModelDiagnosis> {
    let mut diag = sse_check(s1, s2, kappa_fn)?;
    let scan1 = spike_scan(s1, kappa_fn)?;
    let scan2 = spike_scan(s2, kappa_fn)?;
    diag.k1 = Some(scan1.k_hat);
    diag.k2 = Some(scan2.k_hat);
    diag.tau_trace1 = Some(scan1.tau_tilde);
    diag.tau_trace2 = Some(scan2.tau_tilde);
    Ok(diag)
}
