//! Deciding between the spiked and non-spiked eigenvalue regimes from data:
//! the η̂ statistic against the κ(n) threshold, and the τ̂ scan that picks
//! the number of spike directions.
//!
//! ```bash
//! cargo run --example model_diagnosis
//! ```

use hdtest::datagen::{draw_sample, CovSpec, DistSpec, Family};
use hdtest::modelcheck::{diagnose, KappaFn};

fn report(label: &str, diag: &hdtest::ModelDiagnosis) {
    println!("{label}:");
    println!(
        "  eta = ({:.3}, {:.3})  kappa = ({:.3}, {:.3})  verdict = {}",
        diag.eta1,
        diag.eta2,
        diag.kappa1,
        diag.kappa2,
        if diag.sse { "strongly spiked" } else { "non-spiked" }
    );
    println!(
        "  selected spike counts: k = ({}, {})",
        diag.k1.unwrap(),
        diag.k2.unwrap()
    );
    if let Some(trace) = &diag.tau_trace1 {
        let vals: Vec<String> = trace.iter().map(|t| format!("{t:.3}")).collect();
        println!("  tau-tilde trace (group 1): [{}]", vals.join(", "));
    }
}

fn main() -> hdtest::Result<()> {
    let p = 500;
    let n = 100;
    let kf = KappaFn::default();

    // two planted spike directions on top of a correlated tail
    let spiked = CovSpec::SpikedBlock {
        exponents: [2.0 / 3.0, 0.5],
        rho: 0.3,
        tail_scale: 1.0,
    };
    let s1 = draw_sample(&DistSpec::new(Family::Gaussian, spiked.clone()), p, n, 25)?;
    let s2 = draw_sample(&DistSpec::new(Family::Gaussian, spiked), p, n, 26)?;
    report("two-spike design", &diagnose(&s1, &s2, &kf)?);

    // flat spectrum
    let f1 = draw_sample(&DistSpec::new(Family::Gaussian, CovSpec::Identity), p, n, 23)?;
    let f2 = draw_sample(&DistSpec::new(Family::Gaussian, CovSpec::Identity), p, n, 24)?;
    report("identity covariance", &diagnose(&f1, &f2, &kf)?);
    Ok(())
}
