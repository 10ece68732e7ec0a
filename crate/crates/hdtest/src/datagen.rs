//! Reproducible random generators and covariance builders for the
//! simulation designs: power-decay correlation matrices with optional
//! variance ramp, two-spike block covariances, and Gaussian, multivariate-t,
//! chi-square-marginal, skew-normal, and skew-t observation models.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared as ChiSquaredDist, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::matcore::{PsdMatrix, Sample};

/// Deterministic replication substream: the same (seed, index) pair always
/// yields the same generator state, and distinct indices give independent
/// streams of the same keyed cipher.
pub fn seeded_stream(seed: u64, replication_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replication_index);
    rng
}

/// Population covariance structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CovSpec {
    Identity,
    /// Entry (i,j) = C_i ρ^{|i−j|^{1/2}} C_j. With `ramp` the scale is
    /// C_i = (0.5 + i/(p+1))^{1/2} (1-based i); otherwise C = I.
    ScaledPowerCorr { rho: f64, ramp: bool },
    /// Two leading variances p^{e₁}, p^{e₂} on the first coordinates and a
    /// scaled power-decay correlation block on the remaining p−2.
    SpikedBlock {
        exponents: [f64; 2],
        rho: f64,
        tail_scale: f64,
    },
    /// Diagonal covariance with the given eigenvalues.
    Diagonal { values: Vec<f64> },
    Custom { rows: Vec<Vec<f64>> },
}

fn power_corr(dim: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        let d = (i as f64 - j as f64).abs();
        rho.powf(d.sqrt())
    })
}

fn ramp_scale(p: usize, i: usize) -> f64 {
    (0.5 + (i + 1) as f64 / (p + 1) as f64).sqrt()
}

/// Materializes the covariance for dimension p and checks positive
/// definiteness (by Cholesky) for p ≤ 2048.
pub fn build_cov(spec: &CovSpec, p: usize) -> Result<PsdMatrix> {
    if p < 2 {
        return Err(Error::BadDimension("covariance needs p >= 2".into()));
    }
    let matrix = match spec {
        CovSpec::Identity => return Ok(PsdMatrix::identity(p)),
        CovSpec::Diagonal { values } => {
            if values.len() != p {
                return Err(Error::BadDimension(format!(
                    "diagonal has {} entries, expected {p}",
                    values.len()
                )));
            }
            return PsdMatrix::diagonal(DVector::from_row_slice(values));
        }
        CovSpec::ScaledPowerCorr { rho, ramp } => {
            let mut m = power_corr(p, *rho);
            if *ramp {
                for i in 0..p {
                    for j in 0..p {
                        m[(i, j)] *= ramp_scale(p, i) * ramp_scale(p, j);
                    }
                }
            }
            m
        }
        CovSpec::SpikedBlock {
            exponents,
            rho,
            tail_scale,
        } => {
            if p <= 2 {
                return Err(Error::BadDimension("spiked block needs p > 2".into()));
            }
            let pf = p as f64;
            let mut m = DMatrix::zeros(p, p);
            m[(0, 0)] = pf.powf(exponents[0]);
            m[(1, 1)] = pf.powf(exponents[1]);
            let tail = power_corr(p - 2, *rho) * *tail_scale;
            m.view_mut((2, 2), (p - 2, p - 2)).copy_from(&tail);
            m
        }
        CovSpec::Custom { rows } => {
            if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                return Err(Error::BadDimension(format!(
                    "custom covariance must be {p}x{p}"
                )));
            }
            DMatrix::from_fn(p, p, |i, j| rows[i][j])
        }
    };
    if p <= 2048 && matrix.clone().cholesky().is_none() {
        return Err(Error::BadFamilyParams(
            "covariance is not positive definite".into(),
        ));
    }
    PsdMatrix::dense(matrix)
}

/// Observation model on top of a covariance structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    /// Multivariate t with one chi-square mixing draw per observation,
    /// standardized to unit coordinate variances. Needs df ≥ 5.
    Mvt { df: f64 },
    /// Coordinates i.i.d. (v−5)/√10 with v ~ χ²₅ before mixing.
    ChisqMarginal,
    /// Multivariate skew normal with shape vector `shape`·1 on the
    /// correlation base given by the covariance spec.
    SkewNormal { shape: f64 },
    /// Skew normal divided by √(q/df), recentred with the gamma-function
    /// mean constant. Needs df ≥ 5.
    SkewT { shape: f64, df: f64 },
}

/// Mean vector patterns used across the simulation designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanSpec {
    #[default]
    Zero,
    /// First `count` coordinates 1, the rest 0.
    FirstOnes { count: usize },
    /// Last `count` coordinates 1, the rest 0.
    LastOnes { count: usize },
    /// First `count` coordinates +1 and last `count` coordinates −1.
    FirstPosLastNeg { count: usize },
    Custom { values: Vec<f64> },
}

impl MeanSpec {
    pub fn resolve(&self, p: usize) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(p);
        match self {
            MeanSpec::Zero => {}
            MeanSpec::FirstOnes { count } => {
                if *count > p {
                    return Err(Error::BadDimension(format!("count {count} exceeds p={p}")));
                }
                for i in 0..*count {
                    v[i] = 1.0;
                }
            }
            MeanSpec::LastOnes { count } => {
                if *count > p {
                    return Err(Error::BadDimension(format!("count {count} exceeds p={p}")));
                }
                for i in (p - count)..p {
                    v[i] = 1.0;
                }
            }
            MeanSpec::FirstPosLastNeg { count } => {
                if 2 * count > p {
                    return Err(Error::BadDimension(format!("2x{count} exceeds p={p}")));
                }
                for i in 0..*count {
                    v[i] = 1.0;
                    v[p - 1 - i] = -1.0;
                }
            }
            MeanSpec::Custom { values } => {
                if values.len() != p {
                    return Err(Error::BadDimension(format!(
                        "mean has {} entries, expected {p}",
                        values.len()
                    )));
                }
                v = DVector::from_row_slice(values);
            }
        }
        Ok(v)
    }
}

/// Full description of one population's generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub family: Family,
    pub cov: CovSpec,
    #[serde(default)]
    pub mean: MeanSpec,
    /// Multiplies the population covariance (the centered draw is scaled by
    /// its square root before the mean is added).
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

impl DistSpec {
    pub fn new(family: Family, cov: CovSpec) -> Self {
        DistSpec {
            family,
            cov,
            mean: MeanSpec::Zero,
            scale: 1.0,
        }
    }

    pub fn with_mean(mut self, mean: MeanSpec) -> Self {
        self.mean = mean;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

enum GammaFactor {
    Identity,
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl GammaFactor {
    fn apply(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            GammaFactor::Identity => w.clone(),
            GammaFactor::Diagonal(d) => {
                let mut out = w.clone();
                for i in 0..out.nrows() {
                    let s = d[i];
                    for j in 0..out.ncols() {
                        out[(i, j)] *= s;
                    }
                }
                out
            }
            GammaFactor::Dense(g) => g * w,
        }
    }
}

enum LinearFamily {
    Gaussian,
    Mvt { df: f64 },
    ChisqMarginal,
}

struct SkewCore {
    dim: usize,
    delta: DVector<f64>,
    /// (Ω − δδᵀ)^{1/2}
    resid_sqrt: DMatrix<f64>,
    /// Mean of the unrecentred draw; subtracted before scaling.
    center: DVector<f64>,
    omega: DMatrix<f64>,
    t_df: Option<f64>,
}

impl SkewCore {
    fn new(omega: DMatrix<f64>, shape: f64, t_df: Option<f64>) -> Result<Self> {
        let dim = omega.nrows();
        let alpha = DVector::from_element(dim, shape);
        let oa = &omega * &alpha;
        let denom = (1.0 + alpha.dot(&oa)).sqrt();
        let delta = oa / denom;
        let resid = &omega - &delta * delta.transpose();
        let eig = resid
            .clone()
            .try_symmetric_eigen(f64::EPSILON, 100_000)
            .ok_or(Error::EigenFailure)?;
        let resid_sqrt = crate::matcore::symmetric_sqrt_from_eigen(&eig);
        let center = match t_df {
            // E = (2/π)^{1/2} δ
            None => &delta * (2.0 / std::f64::consts::PI).sqrt(),
            // E = (ν/π)^{1/2} Γ((ν−1)/2)/Γ(ν/2) δ
            Some(df) => {
                let c = (df / std::f64::consts::PI).sqrt()
                    * (ln_gamma((df - 1.0) / 2.0) - ln_gamma(df / 2.0)).exp();
                &delta * c
            }
        };
        Ok(SkewCore {
            dim,
            delta,
            resid_sqrt,
            center,
            omega,
            t_df,
        })
    }

    /// One centered draw matrix (dim×n): raw skew draws minus their mean.
    fn draw_centered(&self, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let mut u1 = DMatrix::zeros(self.dim, n);
        for j in 0..n {
            for i in 0..self.dim {
                u1[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let mut x = &self.resid_sqrt * u1;
        for j in 0..n {
            let u0: f64 = rng.sample(StandardNormal);
            let a = u0.abs();
            for i in 0..self.dim {
                x[(i, j)] += self.delta[i] * a;
            }
        }
        if let Some(df) = self.t_df {
            let chi = ChiSquaredDist::new(df).expect("chi-squared mixing");
            for j in 0..n {
                let q: f64 = chi.sample(rng);
                let s = (df / q).sqrt();
                for i in 0..self.dim {
                    x[(i, j)] *= s;
                }
            }
        }
        for j in 0..n {
            for i in 0..self.dim {
                x[(i, j)] -= self.center[i];
            }
        }
        x
    }

    /// Population covariance of the centered draw.
    fn covariance(&self) -> DMatrix<f64> {
        match self.t_df {
            None => &self.omega - &self.center * self.center.transpose(),
            Some(df) => {
                &self.omega * (df / (df - 2.0)) - &self.center * self.center.transpose()
            }
        }
    }
}

enum SamplerKind {
    Linear {
        family: LinearFamily,
        gamma: GammaFactor,
    },
    Skew(SkewCore),
    SkewSpiked {
        spike_sd: [f64; 2],
        tail_scale_sqrt: f64,
        tail: SkewCore,
    },
}

/// Prebuilt generator for one population: covariance factor, skew geometry,
/// and mean are resolved once so draws are cheap and deterministic.
pub struct Sampler {
    p: usize,
    mean: DVector<f64>,
    scale_sqrt: f64,
    kind: SamplerKind,
}

impl Sampler {
    pub fn new(spec: &DistSpec, p: usize) -> Result<Self> {
        if spec.scale <= 0.0 || !spec.scale.is_finite() {
            return Err(Error::BadFamilyParams(format!(
                "scale must be positive, got {}",
                spec.scale
            )));
        }
        let mean = spec.mean.resolve(p)?;
        let scale_sqrt = spec.scale.sqrt();
        let kind = match &spec.family {
            Family::Gaussian => SamplerKind::Linear {
                family: LinearFamily::Gaussian,
                gamma: gamma_factor(&spec.cov, p)?,
            },
            Family::Mvt { df } => {
                require_df(*df)?;
                SamplerKind::Linear {
                    family: LinearFamily::Mvt { df: *df },
                    gamma: gamma_factor(&spec.cov, p)?,
                }
            }
            Family::ChisqMarginal => SamplerKind::Linear {
                family: LinearFamily::ChisqMarginal,
                gamma: gamma_factor(&spec.cov, p)?,
            },
            Family::SkewNormal { shape } => skew_kind(&spec.cov, p, *shape, None)?,
            Family::SkewT { shape, df } => {
                require_df(*df)?;
                skew_kind(&spec.cov, p, *shape, Some(*df))?
            }
        };
        Ok(Sampler {
            p,
            mean,
            scale_sqrt,
            kind,
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Draws n observations. The centered draw is produced first and the
    /// mean added last, so shifting the mean shifts the output bit-for-bit.
    pub fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Sample {
        let mut x = match &self.kind {
            SamplerKind::Linear { family, gamma } => {
                let w = draw_standardized(family, self.p, n, rng);
                gamma.apply(&w)
            }
            SamplerKind::Skew(core) => core.draw_centered(n, rng),
            SamplerKind::SkewSpiked {
                spike_sd,
                tail_scale_sqrt,
                tail,
            } => {
                let mut x = DMatrix::zeros(self.p, n);
                for j in 0..n {
                    let g0: f64 = rng.sample(StandardNormal);
                    let g1: f64 = rng.sample(StandardNormal);
                    x[(0, j)] = spike_sd[0] * g0;
                    x[(1, j)] = spike_sd[1] * g1;
                }
                let t = tail.draw_centered(n, rng) * *tail_scale_sqrt;
                x.view_mut((2, 0), (self.p - 2, n)).copy_from(&t);
                x
            }
        };
        if self.scale_sqrt != 1.0 {
            x *= self.scale_sqrt;
        }
        for j in 0..n {
            for i in 0..self.p {
                x[(i, j)] += self.mean[i];
            }
        }
        Sample::new(x).expect("generated data is finite")
    }

    /// The exact population covariance realized by this generator.
    pub fn population_cov(&self) -> DMatrix<f64> {
        let base = match &self.kind {
            SamplerKind::Linear { gamma, .. } => match gamma {
                GammaFactor::Identity => DMatrix::identity(self.p, self.p),
                GammaFactor::Diagonal(d) => DMatrix::from_diagonal(&d.map(|v| v * v)),
                GammaFactor::Dense(g) => g * g.transpose(),
            },
            SamplerKind::Skew(core) => core.covariance(),
            SamplerKind::SkewSpiked {
                spike_sd,
                tail_scale_sqrt,
                tail,
            } => {
                let mut m = DMatrix::zeros(self.p, self.p);
                m[(0, 0)] = spike_sd[0] * spike_sd[0];
                m[(1, 1)] = spike_sd[1] * spike_sd[1];
                let t = tail.covariance() * (tail_scale_sqrt * tail_scale_sqrt);
                m.view_mut((2, 2), (self.p - 2, self.p - 2)).copy_from(&t);
                m
            }
        };
        base * (self.scale_sqrt * self.scale_sqrt)
    }

    /// The exact population mean realized by this generator.
    pub fn population_mean(&self) -> DVector<f64> {
        self.mean.clone()
    }
}

fn require_df(df: f64) -> Result<()> {
    if df < 5.0 || !df.is_finite() {
        return Err(Error::BadFamilyParams(format!(
            "degrees of freedom must be at least 5, got {df}"
        )));
    }
    Ok(())
}

/// Γ with ΓΓᵀ = Σ, realized as the symmetric square root.
fn gamma_factor(cov: &CovSpec, p: usize) -> Result<GammaFactor> {
    match cov {
        CovSpec::Identity => Ok(GammaFactor::Identity),
        CovSpec::Diagonal { .. } => {
            let built = build_cov(cov, p)?;
            match built {
                PsdMatrix::Diagonal { diag } => {
                    Ok(GammaFactor::Diagonal(diag.map(|v| v.sqrt())))
                }
                _ => unreachable!("diagonal spec builds a diagonal matrix"),
            }
        }
        _ => {
            let built = build_cov(cov, p)?;
            let dense = built.entries();
            let eig = dense
                .try_symmetric_eigen(f64::EPSILON, 100_000)
                .ok_or(Error::EigenFailure)?;
            Ok(GammaFactor::Dense(crate::matcore::symmetric_sqrt_from_eigen(
                &eig,
            )))
        }
    }
}

fn skew_kind(cov: &CovSpec, p: usize, shape: f64, t_df: Option<f64>) -> Result<SamplerKind> {
    match cov {
        CovSpec::SpikedBlock {
            exponents,
            rho,
            tail_scale,
        } => {
            if p <= 2 {
                return Err(Error::BadDimension("spiked block needs p > 2".into()));
            }
            let pf = p as f64;
            let omega = power_corr(p - 2, *rho);
            Ok(SamplerKind::SkewSpiked {
                spike_sd: [
                    pf.powf(exponents[0]).sqrt(),
                    pf.powf(exponents[1]).sqrt(),
                ],
                tail_scale_sqrt: tail_scale.sqrt(),
                tail: SkewCore::new(omega, shape, t_df)?,
            })
        }
        _ => {
            let omega = build_cov(cov, p)?.entries();
            Ok(SamplerKind::Skew(SkewCore::new(omega, shape, t_df)?))
        }
    }
}

fn draw_standardized(
    family: &LinearFamily,
    p: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(p, n);
    match family {
        LinearFamily::Gaussian => {
            for j in 0..n {
                for i in 0..p {
                    w[(i, j)] = rng.sample(StandardNormal);
                }
            }
        }
        LinearFamily::Mvt { df } => {
            for j in 0..n {
                for i in 0..p {
                    w[(i, j)] = rng.sample(StandardNormal);
                }
            }
            let chi = ChiSquaredDist::new(*df).expect("chi-squared mixing");
            for j in 0..n {
                let q: f64 = chi.sample(rng);
                let s = ((df - 2.0) / q).sqrt();
                for i in 0..p {
                    w[(i, j)] *= s;
                }
            }
        }
        LinearFamily::ChisqMarginal => {
            let chi = ChiSquaredDist::new(5.0).expect("chi-squared(5)");
            let scale = 10.0f64.sqrt();
            for j in 0..n {
                for i in 0..p {
                    let v: f64 = chi.sample(rng);
                    w[(i, j)] = (v - 5.0) / scale;
                }
            }
        }
    }
    w
}

/// Draws one sample with a fresh stream derived from `seed`.
pub fn draw_sample(spec: &DistSpec, p: usize, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    let sampler = Sampler::new(spec, p)?;
    let mut rng = seeded_stream(seed, 0);
    Ok(sampler.draw(n, &mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Mean and covariance without the n×n dual matrix (n is huge here).
    fn moments(s: &Sample) -> (DVector<f64>, DMatrix<f64>) {
        let mean = s.mean();
        let c = s.centered();
        let cov = &c * c.transpose() / (s.n() - 1) as f64;
        (mean, cov)
    }

    #[test]
    fn power_corr_entries() {
        let a = build_cov(&CovSpec::ScaledPowerCorr { rho: 0.3, ramp: false }, 4)
            .unwrap()
            .entries();
        assert_relative_eq!(a[(0, 2)], 0.3f64.powf(2.0f64.sqrt()), epsilon = 1e-15);
        assert_eq!(format!("{:.3}", a[(0, 2)]), "0.182");
        assert_eq!(a[(1, 1)], 1.0);
        assert_eq!(a, a.transpose());
    }

    #[test]
    fn ramped_power_corr_diagonal() {
        let p = 6;
        let a = build_cov(&CovSpec::ScaledPowerCorr { rho: 0.3, ramp: true }, p)
            .unwrap()
            .entries();
        for i in 0..p {
            assert_relative_eq!(
                a[(i, i)],
                0.5 + (i + 1) as f64 / (p + 1) as f64,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn spiked_block_top_eigenvalue() {
        let a = build_cov(
            &CovSpec::SpikedBlock {
                exponents: [2.0 / 3.0, 0.5],
                rho: 0.3,
                tail_scale: 1.0,
            },
            64,
        )
        .unwrap()
        .entries();
        assert_relative_eq!(a[(0, 0)], 16.0, epsilon = 1e-12);
        assert_relative_eq!(a[(1, 1)], 8.0, epsilon = 1e-12);
        let top = a.symmetric_eigen().eigenvalues.max();
        assert!(top >= 16.0 * (1.0 - 1e-12), "top eigenvalue {top}");
    }

    #[test]
    fn identity_cov_builds_identity() {
        let a = build_cov(&CovSpec::Identity, 10).unwrap();
        assert!(matches!(a, PsdMatrix::Identity { dim: 10 }));
    }

    #[test]
    fn gaussian_law_of_large_numbers() {
        let spec = DistSpec::new(Family::Gaussian, CovSpec::Identity);
        let s = draw_sample(&spec, 5, 100_000, 7).unwrap();
        let (mean, cov) = moments(&s);
        for i in 0..5 {
            assert!(mean[i].abs() < 0.02);
        }
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((cov[(i, j)] - want).abs() < 0.05);
            }
        }
    }

    #[test]
    fn chisq_marginal_standardized() {
        let spec = DistSpec::new(Family::ChisqMarginal, CovSpec::Identity);
        let s = draw_sample(&spec, 1, 100_000, 11).unwrap();
        let (mean, cov) = moments(&s);
        // 3·SE bands: SE(mean) = 1/√n; Var(w²) = 2 + 12/5 for this family
        assert!(mean[0].abs() < 3.0 / (100_000f64).sqrt());
        let var = cov[(0, 0)];
        assert!((var - 1.0).abs() < 3.0 * (4.4f64 / 100_000.0).sqrt());
        // skewness should be clearly positive for chi-square marginals
        let c = s.centered();
        let skew: f64 = c.iter().map(|v| v * v * v).sum::<f64>() / 100_000.0;
        assert!(skew > 0.5);
    }

    #[test]
    fn mvt_unit_variances_and_common_mixing() {
        let spec = DistSpec::new(Family::Mvt { df: 15.0 }, CovSpec::Identity);
        let s = draw_sample(&spec, 3, 100_000, 13).unwrap();
        let (mean, cov) = moments(&s);
        for i in 0..3 {
            assert!((cov[(i, i)] - 1.0).abs() < 0.05);
            assert!(mean[i].abs() < 0.02);
        }
        // squared coordinates are positively correlated (shared mixing draw)
        let c = s.centered();
        let mut corr = 0.0;
        for j in 0..s.n() {
            corr += (c[(0, j)] * c[(0, j)] - 1.0) * (c[(1, j)] * c[(1, j)] - 1.0);
        }
        corr /= s.n() as f64;
        assert!(corr > 0.05, "expected dependent squares, got {corr}");
    }

    #[test]
    fn mvt_requires_df_at_least_five() {
        let spec = DistSpec::new(Family::Mvt { df: 4.0 }, CovSpec::Identity);
        assert!(matches!(
            draw_sample(&spec, 2, 10, 1),
            Err(Error::BadFamilyParams(_))
        ));
    }

    #[test]
    fn skew_normal_matches_moment_formulas() {
        let p = 3;
        let shape = 4.0;
        let spec = DistSpec::new(
            Family::SkewNormal { shape },
            CovSpec::ScaledPowerCorr { rho: 0.3, ramp: false },
        );
        let sampler = Sampler::new(&spec, p).unwrap();
        let mut rng = seeded_stream(17, 0);
        let s = sampler.draw(200_000, &mut rng);
        let (mean, cov) = moments(&s);
        // the generator recentres, so the mean is 0 and the covariance is
        // Ω − μ̆μ̆ᵀ with μ̆ = (2/π)^{1/2}Ωα/(1+αᵀΩα)^{1/2}
        let pop = sampler.population_cov();
        for i in 0..p {
            assert!(mean[i].abs() < 3.0 * (1.0f64 / 200_000.0).sqrt());
            for j in 0..p {
                assert!((cov[(i, j)] - pop[(i, j)]).abs() < 0.02);
            }
        }
        // raw (unrecentred) draw mean equals μ̆: rebuild it from the spec
        let omega = power_corr(p, 0.3);
        let alpha = DVector::from_element(p, shape);
        let mu_breve =
            (2.0 / std::f64::consts::PI).sqrt() * (&omega * &alpha) / (1.0 + alpha.dot(&(&omega * &alpha))).sqrt();
        // sample mean of raw draws = sample mean of centered + μ̆
        for i in 0..p {
            let raw_mean = mean[i] + mu_breve[i];
            assert!((raw_mean - mu_breve[i]).abs() < 0.01);
        }
        // positive skewness in every coordinate
        let c = s.centered();
        for i in 0..p {
            let skew: f64 = (0..s.n()).map(|j| c[(i, j)].powi(3)).sum::<f64>() / s.n() as f64;
            assert!(skew > 0.0, "coordinate {i} should be right-skewed");
        }
    }

    #[test]
    fn skew_t_matches_population_cov() {
        let spec = DistSpec::new(
            Family::SkewT { shape: 10.0, df: 10.0 },
            CovSpec::ScaledPowerCorr { rho: 0.3, ramp: false },
        );
        let sampler = Sampler::new(&spec, 3).unwrap();
        let mut rng = seeded_stream(19, 0);
        let s = sampler.draw(200_000, &mut rng);
        let (mean, cov) = moments(&s);
        let pop = sampler.population_cov();
        for i in 0..3 {
            assert!(mean[i].abs() < 0.02, "mean {}", mean[i]);
            for j in 0..3 {
                assert!(
                    (cov[(i, j)] - pop[(i, j)]).abs() < 0.05,
                    "cov ({i},{j}): {} vs {}",
                    cov[(i, j)],
                    pop[(i, j)]
                );
            }
        }
    }

    #[test]
    fn spiked_skew_block_structure() {
        let spec = DistSpec::new(
            Family::SkewNormal { shape: 4.0 },
            CovSpec::SpikedBlock {
                exponents: [2.0 / 3.0, 0.5],
                rho: 0.3,
                tail_scale: 1.0,
            },
        );
        let sampler = Sampler::new(&spec, 10).unwrap();
        let pop = sampler.population_cov();
        assert_relative_eq!(pop[(0, 0)], 10.0f64.powf(2.0 / 3.0), epsilon = 1e-12);
        assert_eq!(pop[(0, 5)], 0.0);
        let mut rng = seeded_stream(23, 0);
        let s = sampler.draw(50_000, &mut rng);
        let (_, cov) = moments(&s);
        assert!((cov[(0, 0)] - pop[(0, 0)]).abs() < 0.2);
        assert!(cov[(0, 5)].abs() < 0.05);
    }

    #[test]
    fn streams_reproducible_and_distinct() {
        let spec = DistSpec::new(Family::Gaussian, CovSpec::Identity);
        let a = draw_sample(&spec, 4, 6, 42).unwrap();
        let b = draw_sample(&spec, 4, 6, 42).unwrap();
        assert_eq!(a.data(), b.data());

        let sampler = Sampler::new(&spec, 4).unwrap();
        let mut s0 = seeded_stream(42, 0);
        let mut s1 = seeded_stream(42, 1);
        let d0 = sampler.draw(6, &mut s0);
        let d1 = sampler.draw(6, &mut s1);
        assert_ne!(d0.data(), d1.data());
    }

    #[test]
    fn substream_cross_correlations_small() {
        // 20 adjacent stream pairs, 2000 draws each
        let mut prev: Option<Vec<f64>> = None;
        for idx in 0..20u64 {
            let mut rng = seeded_stream(42, idx);
            let draws: Vec<f64> = (0..2000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            if let Some(prev_draws) = &prev {
                let n = draws.len() as f64;
                let (ma, mb) = (
                    draws.iter().sum::<f64>() / n,
                    prev_draws.iter().sum::<f64>() / n,
                );
                let mut num = 0.0;
                let mut va = 0.0;
                let mut vb = 0.0;
                for (a, b) in draws.iter().zip(prev_draws.iter()) {
                    num += (a - ma) * (b - mb);
                    va += (a - ma) * (a - ma);
                    vb += (b - mb) * (b - mb);
                }
                let corr = num / (va.sqrt() * vb.sqrt());
                assert!(corr.abs() < 0.1, "stream {idx} corr {corr}");
            }
            prev = Some(draws);
        }
    }

    #[test]
    fn shift_equivariance_is_bitwise() {
        for family in [
            Family::Gaussian,
            Family::Mvt { df: 15.0 },
            Family::ChisqMarginal,
            Family::SkewNormal { shape: 4.0 },
            Family::SkewT { shape: 4.0, df: 10.0 },
        ] {
            let cov = CovSpec::ScaledPowerCorr { rho: 0.3, ramp: false };
            let zero = DistSpec::new(family.clone(), cov.clone());
            let shifted = DistSpec::new(family, cov).with_mean(MeanSpec::FirstOnes { count: 2 });
            let a = draw_sample(&zero, 4, 8, 99).unwrap();
            let b = draw_sample(&shifted, 4, 8, 99).unwrap();
            let mu = MeanSpec::FirstOnes { count: 2 }.resolve(4).unwrap();
            for j in 0..8 {
                for i in 0..4 {
                    let expect = a.data()[(i, j)] + mu[i];
                    assert_eq!(b.data()[(i, j)], expect, "family draw not shift-equivariant");
                }
            }
        }
    }

    #[test]
    fn scale_multiplies_covariance() {
        let base = DistSpec::new(Family::Gaussian, CovSpec::Identity);
        let scaled = base.clone().with_scale(2.25);
        let s1 = Sampler::new(&base, 3).unwrap();
        let s2 = Sampler::new(&scaled, 3).unwrap();
        let c1 = s1.population_cov();
        let c2 = s2.population_cov();
        assert_relative_eq!(c2[(0, 0)], 2.25 * c1[(0, 0)], epsilon = 1e-12);
    }
}
