//! Property tests for the algebraic invariants.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use hdtest::estimators::{cdm_estimates, nr_eigenvalues, w_stat};
use hdtest::matcore::{dual_eigen, summarize, PsdMatrix, Sample};
use hdtest::modelcheck::{select_k, KappaFn};
use hdtest::procedures::t_stat;

fn data_matrix(p: usize, n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-5.0f64..5.0, p * n)
        .prop_map(move |v| DMatrix::from_vec(p, n, v))
}

fn first_form(s1: &Sample, s2: &Sample, a: &PsdMatrix) -> f64 {
    let d = s1.mean() - s2.mean();
    let mut v = a.bilinear(&d, &d);
    for s in [s1, s2] {
        let c = s.centered();
        let n = s.n() as f64;
        let ac = a.apply(&c);
        let tr: f64 =
            (0..s.n()).map(|l| c.column(l).dot(&ac.column(l))).sum::<f64>() / (n - 1.0);
        v -= tr / n;
    }
    v
}

fn w_literal(b: &DMatrix<f64>) -> f64 {
    let n = b.nrows();
    let perm = |r: usize| -> f64 { (0..r).map(|i| (n - i) as f64).product() };
    let mut t1 = 0.0;
    let mut t2 = 0.0;
    let mut t3 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            t1 += b[(i, j)] * b[(i, j)];
            for s in 0..n {
                if s == i || s == j {
                    continue;
                }
                t2 += b[(i, j)] * b[(j, s)];
                for t in 0..n {
                    if t == i || t == j || t == s {
                        continue;
                    }
                    t3 += b[(i, j)] * b[(s, t)];
                }
            }
        }
    }
    t1 / perm(2) - 2.0 * t2 / perm(3) + t3 / perm(4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn statistic_forms_agree(
        d1 in data_matrix(5, 6),
        d2 in data_matrix(5, 7),
        diag in proptest::collection::vec(0.01f64..3.0, 5),
    ) {
        let s1 = Sample::new(d1).unwrap();
        let s2 = Sample::new(d2).unwrap();
        let a = PsdMatrix::diagonal(DVector::from_row_slice(&diag)).unwrap();
        let pairwise = t_stat(&s1, &s2, &a).unwrap();
        let direct = first_form(&s1, &s2, &a);
        let scale = pairwise.abs().max(direct.abs()).max(1.0);
        prop_assert!((pairwise - direct).abs() <= 1e-9 * scale);
    }

    #[test]
    fn w_reduction_matches_literal(n in 4usize..=8, seed_data in data_matrix(6, 8)) {
        let d = seed_data.columns(0, n).clone_owned();
        let s = Sample::new(d).unwrap();
        let a = PsdMatrix::identity(6);
        let fast = w_stat(&s, &a).unwrap().value;
        let mut b = s.data().transpose() * s.data();
        let nn = b.nrows();
        for i in 0..nn {
            for j in (i + 1)..nn {
                let v = 0.5 * (b[(i, j)] + b[(j, i)]);
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
        }
        let slow = w_literal(&b);
        let scale = fast.abs().max(slow.abs()).max(1.0);
        prop_assert!((fast - slow).abs() <= 1e-9 * scale);
    }

    #[test]
    fn noise_reduction_never_exceeds_plain_eigenvalues(d in data_matrix(9, 8)) {
        let s = Sample::new(d).unwrap();
        let dual = dual_eigen(&summarize(&s).unwrap()).unwrap();
        let tilde = nr_eigenvalues(&dual).unwrap();
        for (j, t) in tilde.iter().enumerate() {
            prop_assert!(*t <= dual.values()[j] + 1e-12);
            prop_assert!(*t >= 0.0);
        }
    }

    #[test]
    fn tail_energies_monotone_nonnegative(d in data_matrix(7, 10)) {
        let s = Sample::new(d).unwrap();
        let cdm = cdm_estimates(&s).unwrap();
        for w in cdm.psi.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert!(cdm.psi.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(*cdm.psi.last().unwrap(), 0.0);
    }

    #[test]
    fn spike_selection_scale_invariant(d in data_matrix(12, 10), c in 0.05f64..50.0) {
        let s = Sample::new(d.clone()).unwrap();
        let scaled = Sample::new(d * c).unwrap();
        let kf = KappaFn::default();
        prop_assert_eq!(select_k(&s, &kf).unwrap(), select_k(&scaled, &kf).unwrap());
    }
}
