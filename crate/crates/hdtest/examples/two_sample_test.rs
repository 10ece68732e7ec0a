//! Basic two-sample testing: draw two Gaussian groups with a small mean
//! shift and run the normal-calibrated test and the chi-square variant.
//!
//! ```bash
//! cargo run --example two_sample_test
//! ```

use hdtest::datagen::{draw_sample, CovSpec, DistSpec, Family, MeanSpec};
use hdtest::procedures::{test_chi2, test_normal, MatrixChoice};

fn main() -> hdtest::Result<()> {
    let p = 200;
    let n = 30;
    let cov = CovSpec::ScaledPowerCorr { rho: 0.3, ramp: false };

    let group1 = draw_sample(&DistSpec::new(Family::Gaussian, cov.clone()), p, n, 7)?;
    let shifted = DistSpec::new(Family::Gaussian, cov).with_mean(MeanSpec::FirstOnes { count: 8 });
    let group2 = draw_sample(&shifted, p, n, 8)?;

    let normal = test_normal(&group1, &group2, &MatrixChoice::Identity, 0.05)?;
    println!(
        "normal-calibrated: statistic {:.4}, score {:.3}, critical {:.3}, reject {}, p-value {:.4}",
        normal.statistic, normal.score, normal.critical, normal.reject, normal.p_value
    );

    let chi2 = test_chi2(&group1, &group2, 0.05)?;
    println!(
        "chi-square form:   statistic {:.4}, score {:.3}, critical {:.3}, reject {}, p-value {:.4}",
        chi2.statistic, chi2.score, chi2.critical, chi2.reject, chi2.p_value
    );
    for caveat in &chi2.caveats {
        println!("  caveat: {caveat}");
    }
    Ok(())
}
