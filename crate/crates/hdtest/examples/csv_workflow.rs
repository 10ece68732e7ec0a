//! The data workflow behind the CLI: write two groups to CSV (one
//! observation per row), load them back, and run the adaptive test.
//!
//! ```bash
//! cargo run --example csv_workflow
//! ```

use std::io::Write;

use hdtest::datagen::{draw_sample, CovSpec, DistSpec, Family, MeanSpec};
use hdtest::matcore::Sample;
use hdtest::procedures::test_adaptive;

fn write_group(path: &std::path::Path, sample: &Sample) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    // header row is optional; write one to show it round-trips
    let header: Vec<String> = (0..sample.p()).map(|i| format!("v{i}")).collect();
    writeln!(file, "{}", header.join(","))?;
    for j in 0..sample.n() {
        let row: Vec<String> = (0..sample.p())
            .map(|i| format!("{}", sample.data()[(i, j)]))
            .collect();
        writeln!(file, "{}", row.join(","))?;
    }
    Ok(())
}

fn main() -> hdtest::Result<()> {
    let dir = std::env::temp_dir().join("hdtest_csv_workflow");
    std::fs::create_dir_all(&dir)?;
    let path1 = dir.join("group1.csv");
    let path2 = dir.join("group2.csv");

    let p = 150;
    let cov = CovSpec::ScaledPowerCorr { rho: 0.3, ramp: false };
    let g1 = draw_sample(&DistSpec::new(Family::Gaussian, cov.clone()), p, 40, 5)?;
    let shifted = DistSpec::new(Family::Gaussian, cov).with_mean(MeanSpec::FirstOnes { count: 6 });
    let g2 = draw_sample(&shifted, p, 45, 6)?;
    write_group(&path1, &g1)?;
    write_group(&path2, &g2)?;
    println!("wrote {} and {}", path1.display(), path2.display());

    let s1 = Sample::from_csv_path(&path1)?;
    let s2 = Sample::from_csv_path(&path2)?;
    assert_eq!((s1.p(), s1.n()), (p, 40));

    let outcome = test_adaptive(&s1, &s2, 0.05)?;
    println!("{}", serde_json::to_string_pretty(&outcome)?);
    Ok(())
}
