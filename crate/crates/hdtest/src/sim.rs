//! Monte Carlo engine: runs every requested procedure over a (p, n₁, n₂)
//! grid of replicated two-sample draws, aggregates empirical size and power
//! with standard errors, and attaches asymptotic-power overlays where the
//! theory provides one. Replications use indexed substreams, so results are
//! identical for any worker-thread count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

use crate::datagen::{seeded_stream, CovSpec, DistSpec, Family, MeanSpec, Sampler};
use crate::error::{Error, Result};
use crate::matcore::{PsdMatrix, Sample};
use crate::modelcheck::KappaFn;
use crate::procedures::{
    asymptotic_power, test_adaptive_with, test_chi2, test_naive, test_normal_resolved, test_sse,
    MatrixChoice,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisCase {
    pub label: String,
    /// Mean of population 2 under this case; population 1 keeps its own.
    pub mu2: MeanSpec,
}

impl HypothesisCase {
    pub fn null() -> Self {
        HypothesisCase {
            label: "null".into(),
            mu2: MeanSpec::Zero,
        }
    }

    pub fn alt(label: &str, mu2: MeanSpec) -> Self {
        HypothesisCase {
            label: label.into(),
            mu2,
        }
    }
}

/// Weighting-matrix choice for the normal-calibrated procedure, resolved
/// against population covariances (oracles) or per replication (estimated).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalMatrix {
    Identity,
    AStarOracle,
    AStarDiagOracle,
    AStarDiagEstimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KChoice {
    Estimated,
    Fixed { k1: usize, k2: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcedureSpec {
    Normal { matrix: NormalMatrix },
    Chi2,
    Sse { k: KChoice },
    Naive { k1: usize, k2: usize },
    Adaptive,
}

impl ProcedureSpec {
    /// Stable label used in result rows.
    pub fn label(&self) -> String {
        match self {
            ProcedureSpec::Normal { matrix } => match matrix {
                NormalMatrix::Identity => "normal_identity".into(),
                NormalMatrix::AStarOracle => "normal_astar_oracle".into(),
                NormalMatrix::AStarDiagOracle => "normal_astar_diag_oracle".into(),
                NormalMatrix::AStarDiagEstimated => "normal_astar_diag_est".into(),
            },
            ProcedureSpec::Chi2 => "chi2".into(),
            ProcedureSpec::Sse { k: KChoice::Estimated } => "sse_khat".into(),
            ProcedureSpec::Sse {
                k: KChoice::Fixed { k1, k2 },
            } => format!("sse_{k1}_{k2}"),
            ProcedureSpec::Naive { k1, k2 } => format!("naive_{k1}_{k2}"),
            ProcedureSpec::Adaptive => "adaptive".into(),
        }
    }
}

/// One simulation experiment: populations, hypothesis cases, grid,
/// procedures, and replication control.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub scenario: String,
    pub population1: DistSpec,
    pub population2: DistSpec,
    pub hypotheses: Vec<HypothesisCase>,
    pub grid: Vec<GridPoint>,
    pub procedures: Vec<ProcedureSpec>,
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
}

/// One result row: a (grid point, hypothesis, procedure) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridRow {
    pub scenario: String,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub procedure: String,
    pub hypothesis: String,
    /// Rejection frequency over the evaluated replications; `None` when the
    /// cell was aborted for exceeding 10% degenerate replications.
    pub reject_freq: Option<f64>,
    /// √(f(1−f)/R) over the evaluated replications.
    pub se: Option<f64>,
    /// Asymptotic power where the theory states one.
    pub overlay: Option<f64>,
    /// Degenerate outcomes (nonpositive variance estimates) plus hard
    /// per-replication failures. Failures are excluded from the frequency
    /// denominator; degenerate outcomes are not.
    pub degenerate: usize,
    /// Replications contributing to `reject_freq`.
    pub evaluated: usize,
    pub aborted: bool,
    /// Mean wall-clock per replication; populated only when timing was
    /// requested (timings are excluded by default so that repeated runs are
    /// byte-identical).
    pub ms_per_rep: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    pub scenario: String,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<GridRow>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record wall-clock per replication. Off by default: timing values are
    /// inherently nondeterministic, and results must be byte-reproducible.
    pub timings: bool,
}

enum ResolvedProcedure {
    NormalStatic(PsdMatrix),
    NormalEstimatedDiag,
    Chi2,
    SseFixed { k1: usize, k2: usize },
    SseEstimated,
    Naive { k1: usize, k2: usize },
    Adaptive,
}

#[derive(Clone, Copy)]
enum RepOutcome {
    Evaluated { reject: bool, degenerate: bool },
    Failed,
}

pub fn run_grid(grid: &ExperimentGrid) -> Result<GridResult> {
    run_grid_with(grid, &RunOptions::default())
}

pub fn run_grid_with(grid: &ExperimentGrid, opts: &RunOptions) -> Result<GridResult> {
    if grid.replications == 0 {
        return Err(Error::BadConfig("replications must be at least 1".into()));
    }
    if !(grid.alpha > 0.0 && grid.alpha < 0.5) {
        return Err(Error::BadAlpha(grid.alpha));
    }
    if grid.grid.is_empty() || grid.procedures.is_empty() || grid.hypotheses.is_empty() {
        return Err(Error::BadConfig(
            "grid, procedures, and hypotheses must be non-empty".into(),
        ));
    }
    let r = grid.replications;
    let n_hyp = grid.hypotheses.len() as u64;
    let mut rows = Vec::new();

    // population covariances feed both the oracle matrices and the overlays
    let needs_pop_cov = grid.procedures.iter().any(|p| {
        matches!(
            p,
            ProcedureSpec::Normal {
                matrix: NormalMatrix::Identity
                    | NormalMatrix::AStarOracle
                    | NormalMatrix::AStarDiagOracle
            } | ProcedureSpec::Sse {
                k: KChoice::Fixed { .. }
            }
        )
    });

    for (gi, point) in grid.grid.iter().enumerate() {
        let sampler1 = Sampler::new(&grid.population1, point.p)?;
        let pop_cov = if needs_pop_cov {
            // population covariances are mean-independent; build once per point
            let sampler2 = Sampler::new(&grid.population2, point.p)?;
            Some((sampler1.population_cov(), sampler2.population_cov()))
        } else {
            None
        };
        let resolved = resolve_procedures(grid, point, pop_cov.as_ref())?;

        for (hi, case) in grid.hypotheses.iter().enumerate() {
            let mut pop2 = grid.population2.clone();
            pop2.mean = case.mu2.clone();
            let sampler2 = Sampler::new(&pop2, point.p)?;
            let mu1 = sampler1.population_mean();
            let mu2 = sampler2.population_mean();

            let overlays: Vec<Option<f64>> = grid
                .procedures
                .iter()
                .map(|proc| {
                    overlay_power(
                        proc,
                        pop_cov.as_ref(),
                        &mu1,
                        &mu2,
                        point,
                        grid.alpha,
                    )
                })
                .collect();

            let stream_base = (gi as u64 * n_hyp + hi as u64) * r as u64;
            let t0 = Instant::now();
            let per_rep: Vec<Vec<RepOutcome>> = (0..r)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = seeded_stream(grid.seed, stream_base + rep as u64);
                    let s1 = sampler1.draw(point.n1, &mut rng);
                    let s2 = sampler2.draw(point.n2, &mut rng);
                    resolved
                        .iter()
                        .map(|proc| eval_procedure(proc, &s1, &s2, grid.alpha))
                        .collect()
                })
                .collect();
            let elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;

            for (pi, proc) in grid.procedures.iter().enumerate() {
                let mut rejects = 0usize;
                let mut degenerate = 0usize;
                let mut failures = 0usize;
                for rep in &per_rep {
                    match rep[pi] {
                        RepOutcome::Evaluated { reject, degenerate: d } => {
                            if reject {
                                rejects += 1;
                            }
                            if d {
                                degenerate += 1;
                            }
                        }
                        RepOutcome::Failed => failures += 1,
                    }
                }
                let evaluated = r - failures;
                let total_degenerate = degenerate + failures;
                let aborted = 10 * total_degenerate > r;
                let (freq, se) = if aborted || evaluated == 0 {
                    (None, None)
                } else {
                    let f = rejects as f64 / evaluated as f64;
                    (Some(f), Some((f * (1.0 - f) / evaluated as f64).sqrt()))
                };
                rows.push(GridRow {
                    scenario: grid.scenario.clone(),
                    p: point.p,
                    n1: point.n1,
                    n2: point.n2,
                    procedure: proc.label(),
                    hypothesis: case.label.clone(),
                    reject_freq: freq,
                    se,
                    overlay: overlays[pi],
                    degenerate: total_degenerate,
                    evaluated,
                    aborted,
                    ms_per_rep: opts.timings.then(|| elapsed_ms / r as f64),
                });
            }
        }
    }
    Ok(GridResult {
        scenario: grid.scenario.clone(),
        alpha: grid.alpha,
        replications: grid.replications,
        seed: grid.seed,
        rows,
    })
}

fn resolve_procedures(
    grid: &ExperimentGrid,
    point: &GridPoint,
    pop_cov: Option<&(DMatrix<f64>, DMatrix<f64>)>,
) -> Result<Vec<ResolvedProcedure>> {
    let c_star = 1.0 / point.n1 as f64 + 1.0 / point.n2 as f64;
    grid.procedures
        .iter()
        .map(|proc| {
            Ok(match proc {
                ProcedureSpec::Normal { matrix } => match matrix {
                    NormalMatrix::Identity => {
                        ResolvedProcedure::NormalStatic(PsdMatrix::identity(point.p))
                    }
                    NormalMatrix::AStarOracle => {
                        let (sig1, sig2) = pop_cov.ok_or(Error::OracleRequired)?;
                        let pooled = sig1 / point.n1 as f64 + sig2 / point.n2 as f64;
                        let inv = pooled
                            .cholesky()
                            .ok_or_else(|| {
                                Error::BadFamilyParams(
                                    "pooled population covariance not positive definite".into(),
                                )
                            })?
                            .inverse();
                        ResolvedProcedure::NormalStatic(PsdMatrix::dense(inv * c_star)?)
                    }
                    NormalMatrix::AStarDiagOracle => {
                        let (sig1, sig2) = pop_cov.ok_or(Error::OracleRequired)?;
                        let diag = DVector::from_fn(point.p, |j, _| {
                            c_star
                                / (sig1[(j, j)] / point.n1 as f64 + sig2[(j, j)] / point.n2 as f64)
                        });
                        ResolvedProcedure::NormalStatic(PsdMatrix::diagonal(diag)?)
                    }
                    NormalMatrix::AStarDiagEstimated => ResolvedProcedure::NormalEstimatedDiag,
                },
                ProcedureSpec::Chi2 => ResolvedProcedure::Chi2,
                ProcedureSpec::Sse { k: KChoice::Fixed { k1, k2 } } => {
                    ResolvedProcedure::SseFixed { k1: *k1, k2: *k2 }
                }
                ProcedureSpec::Sse { k: KChoice::Estimated } => ResolvedProcedure::SseEstimated,
                ProcedureSpec::Naive { k1, k2 } => ResolvedProcedure::Naive { k1: *k1, k2: *k2 },
                ProcedureSpec::Adaptive => ResolvedProcedure::Adaptive,
            })
        })
        .collect()
}

fn eval_procedure(proc: &ResolvedProcedure, s1: &Sample, s2: &Sample, alpha: f64) -> RepOutcome {
    let result = match proc {
        ResolvedProcedure::NormalStatic(a) => test_normal_resolved(s1, s2, a, alpha),
        ResolvedProcedure::NormalEstimatedDiag => MatrixChoice::AStarDiagEstimated
            .resolve(s1, s2)
            .and_then(|a| test_normal_resolved(s1, s2, &a, alpha)),
        ResolvedProcedure::Chi2 => test_chi2(s1, s2, alpha),
        ResolvedProcedure::SseFixed { k1, k2 } => test_sse(s1, s2, *k1, *k2, alpha),
        ResolvedProcedure::SseEstimated => {
            let kf = KappaFn::default();
            crate::modelcheck::select_k(s1, &kf)
                .and_then(|k1| crate::modelcheck::select_k(s2, &kf).map(|k2| (k1, k2)))
                .and_then(|(k1, k2)| test_sse(s1, s2, k1, k2, alpha))
        }
        ResolvedProcedure::Naive { k1, k2 } => test_naive(s1, s2, *k1, *k2, alpha),
        ResolvedProcedure::Adaptive => test_adaptive_with(s1, s2, alpha, &KappaFn::default()),
    };
    match result {
        Ok(out) => RepOutcome::Evaluated {
            reject: out.reject,
            degenerate: out.degenerate,
        },
        Err(_) => RepOutcome::Failed,
    }
}

/// Asymptotic power at population quantities, where the theory states one:
/// the normal-calibrated test with a population-resolvable matrix, and the
/// eigenstructure-adjusted test with fixed spike counts. Everything else
/// (estimated matrices or spike counts, the chi-square and naive tests)
/// returns `None`.
pub fn overlay_power(
    proc: &ProcedureSpec,
    pop_cov: Option<&(DMatrix<f64>, DMatrix<f64>)>,
    mu1: &DVector<f64>,
    mu2: &DVector<f64>,
    point: &GridPoint,
    alpha: f64,
) -> Option<f64> {
    let mu_diff = mu1 - mu2;
    match proc {
        ProcedureSpec::Normal { matrix } => {
            let a = match matrix {
                NormalMatrix::Identity => PsdMatrix::identity(point.p),
                NormalMatrix::AStarOracle => {
                    let (sig1, sig2) = pop_cov?;
                    let c_star = 1.0 / point.n1 as f64 + 1.0 / point.n2 as f64;
                    let pooled = sig1 / point.n1 as f64 + sig2 / point.n2 as f64;
                    let inv = pooled.cholesky()?.inverse();
                    PsdMatrix::dense(inv * c_star).ok()?
                }
                NormalMatrix::AStarDiagOracle => {
                    let (sig1, sig2) = pop_cov?;
                    let c_star = 1.0 / point.n1 as f64 + 1.0 / point.n2 as f64;
                    let diag = DVector::from_fn(point.p, |j, _| {
                        c_star / (sig1[(j, j)] / point.n1 as f64 + sig2[(j, j)] / point.n2 as f64)
                    });
                    PsdMatrix::diagonal(diag).ok()?
                }
                NormalMatrix::AStarDiagEstimated => return None,
            };
            let (sig1, sig2) = match (&a, pop_cov) {
                // identity weighting only needs the covariances themselves
                (_, Some(pair)) => (pair.0.clone(), pair.1.clone()),
                (PsdMatrix::Identity { .. }, None) => return None,
                _ => return None,
            };
            let (k1, k2) = population_k(&a, &sig1, &sig2, &mu_diff, point);
            let delta = a.bilinear(&mu_diff, &mu_diff);
            asymptotic_power(delta, k1, k2, alpha).ok()
        }
        ProcedureSpec::Sse {
            k: KChoice::Fixed { k1, k2 },
        } => {
            let (sig1, sig2) = pop_cov?;
            sse_overlay(sig1, sig2, mu1, mu2, *k1, *k2, point, alpha)
        }
        _ => None,
    }
}

/// Population (K₁, K₂) for the weighting matrix A.
fn population_k(
    a: &PsdMatrix,
    sig1: &DMatrix<f64>,
    sig2: &DMatrix<f64>,
    mu_diff: &DVector<f64>,
    point: &GridPoint,
) -> (f64, f64) {
    let (n1, n2) = (point.n1 as f64, point.n2 as f64);
    let m1 = a.apply(sig1); // AΣ₁
    let m2 = a.apply(sig2);
    let p = sig1.nrows();
    let mut tr11 = 0.0;
    let mut tr22 = 0.0;
    let mut tr12 = 0.0;
    for i in 0..p {
        for j in 0..p {
            tr11 += m1[(i, j)] * m1[(j, i)];
            tr22 += m2[(i, j)] * m2[(j, i)];
            tr12 += m1[(i, j)] * m2[(j, i)];
        }
    }
    let k1 = 2.0 * (tr11 / (n1 * (n1 - 1.0)) + tr22 / (n2 * (n2 - 1.0))) + 4.0 * tr12 / (n1 * n2);
    let amu = a.apply_vec(mu_diff);
    let k2 = 4.0 * ((amu.transpose() * sig1 * &amu)[(0, 0)] / n1
        + (amu.transpose() * sig2 * &amu)[(0, 0)] / n2);
    (k1, k2)
}

/// Theorem-style overlay for the spike-removed statistic: population
/// projections drop the top-k eigenspaces of each covariance.
#[allow(clippy::too_many_arguments)]
fn sse_overlay(
    sig1: &DMatrix<f64>,
    sig2: &DMatrix<f64>,
    mu1: &DVector<f64>,
    mu2: &DVector<f64>,
    k1: usize,
    k2: usize,
    point: &GridPoint,
    alpha: f64,
) -> Option<f64> {
    let (n1, n2) = (point.n1 as f64, point.n2 as f64);
    let (star1, basis1) = remove_top_eigenspace(sig1, k1)?;
    let (star2, basis2) = remove_top_eigenspace(sig2, k2)?;
    let psi1 = star1.norm_squared();
    let psi2 = star2.norm_squared();
    let mut tr12 = 0.0;
    for i in 0..sig1.nrows() {
        for j in 0..sig1.ncols() {
            tr12 += star1[(i, j)] * star2[(i, j)];
        }
    }
    let k1_star = 2.0 * (psi1 / (n1 * (n1 - 1.0)) + psi2 / (n2 * (n2 - 1.0))) + 4.0 * tr12 / (n1 * n2);
    let mu_star = project_out(mu1, &basis1) - project_out(mu2, &basis2);
    let delta_star = mu_star.norm_squared();
    let k2_star = 4.0 * ((mu_star.transpose() * &star1 * &mu_star)[(0, 0)] / n1
        + (mu_star.transpose() * &star2 * &mu_star)[(0, 0)] / n2);
    asymptotic_power(delta_star, k1_star, k2_star, alpha).ok()
}

fn project_out(v: &DVector<f64>, basis: &DMatrix<f64>) -> DVector<f64> {
    if basis.ncols() == 0 {
        return v.clone();
    }
    let coef = basis.transpose() * v;
    v - basis * coef
}

/// Σ − Σ_{j≤k} λ_j h_j h_jᵀ and the removed orthonormal basis.
fn remove_top_eigenspace(sigma: &DMatrix<f64>, k: usize) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let p = sigma.nrows();
    if k == 0 {
        return Some((sigma.clone(), DMatrix::zeros(p, 0)));
    }
    let eig = sigma.clone().try_symmetric_eigen(f64::EPSILON, 100_000)?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let mut reduced = sigma.clone();
    let mut basis = DMatrix::zeros(p, k);
    for (slot, &idx) in order.iter().take(k).enumerate() {
        let lam = eig.eigenvalues[idx];
        let h = eig.eigenvectors.column(idx);
        reduced -= lam * h * h.transpose();
        basis.set_column(slot, &h);
    }
    Some((reduced, basis))
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) => format!("{x:.digits$}"),
        None => "NA".into(),
    }
}

/// Writes the result rows as CSV with the stable column set.
pub fn write_csv<W: Write>(result: &GridResult, out: &mut W) -> Result<()> {
    writeln!(
        out,
        "scenario,p,n1,n2,procedure,hypothesis,reject_freq,se,overlay,degenerate,ms_per_rep"
    )?;
    for row in &result.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.scenario,
            row.p,
            row.n1,
            row.n2,
            row.procedure,
            row.hypothesis,
            fmt_opt(row.reject_freq, 6),
            fmt_opt(row.se, 6),
            fmt_opt(row.overlay, 6),
            row.degenerate,
            fmt_opt(row.ms_per_rep, 3),
        )?;
    }
    Ok(())
}

pub fn write_json<W: Write>(result: &GridResult, out: &mut W) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, result)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn ceil_sqrt(p: usize) -> usize {
    (p as f64).sqrt().ceil() as usize
}

fn powers_of_two_grid(n1_of_p: impl Fn(usize) -> usize, n2_of_p: impl Fn(usize) -> usize) -> Vec<GridPoint> {
    (4..=10)
        .map(|s| {
            let p = 1usize << s;
            GridPoint {
                p,
                n1: n1_of_p(p),
                n2: n2_of_p(p),
            }
        })
        .collect()
}

const DEFAULT_REPS: usize = 500;
const DEFAULT_SEED: u64 = 20170408;

/// Built-in experiment presets mirroring the simulation designs.
pub fn named_scenario(name: &str) -> Result<ExperimentGrid> {
    let normal_procs = vec![
        ProcedureSpec::Normal { matrix: NormalMatrix::Identity },
        ProcedureSpec::Normal { matrix: NormalMatrix::AStarOracle },
        ProcedureSpec::Normal { matrix: NormalMatrix::AStarDiagOracle },
        ProcedureSpec::Normal { matrix: NormalMatrix::AStarDiagEstimated },
    ];
    let sse_procs = vec![
        ProcedureSpec::Normal { matrix: NormalMatrix::Identity },
        ProcedureSpec::Chi2,
        ProcedureSpec::Sse { k: KChoice::Fixed { k1: 2, k2: 2 } },
        ProcedureSpec::Sse { k: KChoice::Estimated },
        ProcedureSpec::Naive { k1: 2, k2: 2 },
    ];
    let spiked = |rho: f64, tail_scale: f64| CovSpec::SpikedBlock {
        exponents: [2.0 / 3.0, 0.5],
        rho,
        tail_scale,
    };
    let grid = match name {
        "fig1" => ExperimentGrid {
            scenario: "fig1".into(),
            population1: DistSpec::new(
                Family::Gaussian,
                CovSpec::ScaledPowerCorr { rho: 0.3, ramp: true },
            ),
            population2: DistSpec::new(
                Family::Gaussian,
                CovSpec::ScaledPowerCorr { rho: 0.3, ramp: true },
            ),
            hypotheses: vec![
                HypothesisCase::null(),
                HypothesisCase::alt("b", MeanSpec::FirstOnes { count: 10 }),
                HypothesisCase::alt("c", MeanSpec::LastOnes { count: 10 }),
            ],
            grid: powers_of_two_grid(ceil_sqrt, ceil_sqrt),
            procedures: normal_procs,
            replications: DEFAULT_REPS,
            seed: DEFAULT_SEED,
            alpha: 0.05,
        },
        "fig2a" => ExperimentGrid {
            scenario: "fig2a".into(),
            population1: DistSpec::new(Family::Gaussian, spiked(0.3, 1.0)),
            population2: DistSpec::new(Family::Gaussian, spiked(0.3, 1.5)),
            hypotheses: vec![
                HypothesisCase::null(),
                HypothesisCase::alt("alt", MeanSpec::LastOnes { count: 4 }),
            ],
            grid: powers_of_two_grid(|p| 3 * ceil_sqrt(p), |p| 4 * ceil_sqrt(p)),
            procedures: sse_procs,
            replications: DEFAULT_REPS,
            seed: DEFAULT_SEED,
            alpha: 0.05,
        },
        "fig2b" => ExperimentGrid {
            scenario: "fig2b".into(),
            population1: DistSpec::new(Family::Mvt { df: 15.0 }, spiked(0.3, 1.0)),
            population2: DistSpec::new(Family::Mvt { df: 15.0 }, spiked(0.3, 1.5)),
            hypotheses: vec![
                HypothesisCase::null(),
                HypothesisCase::alt("alt", MeanSpec::LastOnes { count: 4 }),
            ],
            grid: (1..=7)
                .map(|s| GridPoint {
                    p: 50 + 100 * (s - 1),
                    n1: 40,
                    n2: 60,
                })
                .collect(),
            procedures: sse_procs,
            replications: DEFAULT_REPS,
            seed: DEFAULT_SEED,
            alpha: 0.05,
        },
        "fig2c" => ExperimentGrid {
            scenario: "fig2c".into(),
            population1: DistSpec::new(Family::ChisqMarginal, spiked(0.3, 1.0)),
            population2: DistSpec::new(Family::ChisqMarginal, spiked(0.3, 1.5)),
            hypotheses: vec![
                HypothesisCase::null(),
                HypothesisCase::alt("alt", MeanSpec::LastOnes { count: 4 }),
            ],
            grid: (2..=8)
                .map(|s| GridPoint {
                    p: 500,
                    n1: 10 * s,
                    n2: 15 * s,
                })
                .collect(),
            procedures: sse_procs,
            replications: DEFAULT_REPS,
            seed: DEFAULT_SEED,
            alpha: 0.05,
        },
        "s4_1" => ExperimentGrid {
            scenario: "s4_1".into(),
            population1: DistSpec::new(
                Family::SkewNormal { shape: 4.0 },
                CovSpec::ScaledPowerCorr { rho: 0.3, ramp: false },
            ),
            population2: DistSpec::new(
                Family::SkewNormal { shape: 4.0 },
                CovSpec::ScaledPowerCorr { rho: 0.3, ramp: false },
            )
            .with_scale(1.5),
            hypotheses: vec![
                HypothesisCase::null(),
                HypothesisCase::alt("alt", MeanSpec::FirstPosLastNeg { count: 5 }),
            ],
            grid: powers_of_two_grid(ceil_sqrt, |p| 2 * ceil_sqrt(p)),
            procedures: normal_procs,
            replications: DEFAULT_REPS,
            seed: DEFAULT_SEED,
            alpha: 0.05,
        },
        "s4_2" => ExperimentGrid {
            scenario: "s4_2".into(),
            population1: DistSpec::new(Family::SkewNormal { shape: 4.0 }, spiked(0.3, 1.0)),
            population2: DistSpec::new(Family::SkewNormal { shape: 4.0 }, spiked(0.5, 1.0)),
            hypotheses: vec![
                HypothesisCase::null(),
                HypothesisCase::alt("alt", MeanSpec::LastOnes { count: 4 }),
            ],
            grid: powers_of_two_grid(|p| 3 * ceil_sqrt(p), |p| 4 * ceil_sqrt(p)),
            procedures: sse_procs,
            replications: DEFAULT_REPS,
            seed: DEFAULT_SEED,
            alpha: 0.05,
        },
        other => return Err(Error::UnknownScenario(other.into())),
    };
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_grid() -> ExperimentGrid {
        ExperimentGrid {
            scenario: "tiny".into(),
            population1: DistSpec::new(Family::Gaussian, CovSpec::Identity),
            population2: DistSpec::new(Family::Gaussian, CovSpec::Identity),
            hypotheses: vec![
                HypothesisCase::null(),
                HypothesisCase::alt("alt", MeanSpec::FirstOnes { count: 3 }),
            ],
            grid: vec![GridPoint { p: 12, n1: 8, n2: 10 }],
            procedures: vec![
                ProcedureSpec::Normal { matrix: NormalMatrix::Identity },
                ProcedureSpec::Chi2,
                ProcedureSpec::Adaptive,
            ],
            replications: 8,
            seed: 99,
            alpha: 0.05,
        }
    }

    #[test]
    fn rerun_is_identical() {
        let grid = tiny_grid();
        let a = run_grid(&grid).unwrap();
        let b = run_grid(&grid).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let grid = tiny_grid();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| run_grid(&grid)).unwrap();
        let b = pool4.install(|| run_grid(&grid)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn row_layout_and_csv() {
        let grid = tiny_grid();
        let result = run_grid(&grid).unwrap();
        assert_eq!(result.rows.len(), 1 * 2 * 3);
        let mut csv = Vec::new();
        write_csv(&result, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scenario,p,n1,n2,procedure,hypothesis,reject_freq,se,overlay,degenerate,ms_per_rep"
        );
        assert_eq!(lines.count(), 6);
        // timings are off by default
        assert!(text.lines().skip(1).all(|l| l.ends_with(",NA")));
    }

    #[test]
    fn null_overlay_is_alpha() {
        let point = GridPoint { p: 6, n1: 10, n2: 12 };
        let eye = nalgebra::DMatrix::identity(6, 6);
        let pop = (eye.clone(), eye);
        let overlay = overlay_power(
            &ProcedureSpec::Normal { matrix: NormalMatrix::Identity },
            Some(&pop),
            &DVector::zeros(6),
            &DVector::zeros(6),
            &point,
            0.05,
        )
        .unwrap();
        assert_relative_eq!(overlay, 0.05, epsilon = 1e-9);

        let sse_null = overlay_power(
            &ProcedureSpec::Sse { k: KChoice::Fixed { k1: 1, k2: 1 } },
            Some(&pop),
            &DVector::zeros(6),
            &DVector::zeros(6),
            &point,
            0.05,
        )
        .unwrap();
        assert_relative_eq!(sse_null, 0.05, epsilon = 1e-9);

        assert!(overlay_power(
            &ProcedureSpec::Chi2,
            Some(&pop),
            &DVector::zeros(6),
            &DVector::zeros(6),
            &point,
            0.05
        )
        .is_none());
    }

    #[test]
    fn named_scenarios_have_expected_shape() {
        let fig1 = named_scenario("fig1").unwrap();
        assert_eq!(fig1.grid.len(), 7);
        assert_eq!(fig1.procedures.len(), 4);
        assert_eq!(fig1.hypotheses.len(), 3);
        assert_eq!(fig1.grid[0], GridPoint { p: 16, n1: 4, n2: 4 });
        assert_eq!(fig1.grid[6], GridPoint { p: 1024, n1: 32, n2: 32 });

        let fig2a = named_scenario("fig2a").unwrap();
        assert_eq!(fig2a.grid[6], GridPoint { p: 1024, n1: 96, n2: 128 });
        assert_eq!(fig2a.procedures.len(), 5);

        let fig2c = named_scenario("fig2c").unwrap();
        assert!(fig2c.grid.iter().all(|g| g.p == 500 && g.n2 == 3 * g.n1 / 2));

        for name in ["fig1", "fig2a", "fig2b", "fig2c", "s4_1", "s4_2"] {
            assert!(named_scenario(name).is_ok(), "{name} should exist");
        }
        assert!(matches!(
            named_scenario("fig99"),
            Err(Error::UnknownScenario(_))
        ));
    }

    #[test]
    fn config_roundtrips_through_json() {
        let grid = named_scenario("fig2a").unwrap();
        let text = serde_json::to_string_pretty(&grid).unwrap();
        let back: ExperimentGrid = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&grid).unwrap());
    }

    #[test]
    fn aborted_cell_reports_na() {
        // spike selection needs n >= 6, so every replication fails and the
        // cell is aborted rather than reported with a fake frequency
        let grid = ExperimentGrid {
            scenario: "aborts".into(),
            population1: DistSpec::new(Family::Gaussian, CovSpec::Identity),
            population2: DistSpec::new(Family::Gaussian, CovSpec::Identity),
            hypotheses: vec![HypothesisCase::null()],
            grid: vec![GridPoint { p: 10, n1: 5, n2: 8 }],
            procedures: vec![
                ProcedureSpec::Sse { k: KChoice::Estimated },
                ProcedureSpec::Normal { matrix: NormalMatrix::Identity },
            ],
            replications: 10,
            seed: 1,
            alpha: 0.05,
        };
        let result = run_grid(&grid).unwrap();
        let aborted = &result.rows[0];
        assert!(aborted.aborted);
        assert_eq!(aborted.reject_freq, None);
        assert_eq!(aborted.degenerate, 10);
        assert_eq!(aborted.evaluated, 0);
        // the healthy procedure in the same cell is unaffected
        let healthy = &result.rows[1];
        assert!(!healthy.aborted);
        assert!(healthy.reject_freq.is_some());
        let mut csv = Vec::new();
        write_csv(&result, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.lines().nth(1).unwrap().contains("NA,NA,NA,10"));
    }

    #[test]
    fn rejects_bad_config() {
        let mut grid = tiny_grid();
        grid.replications = 0;
        assert!(matches!(run_grid(&grid), Err(Error::BadConfig(_))));
        let mut grid = tiny_grid();
        grid.alpha = 0.7;
        assert!(matches!(run_grid(&grid), Err(Error::BadAlpha(_))));
    }
}
