mod common;

use common::{gaussian_vec, min_eigenvalue, rel_err, rel_max_diff, rng, DirectRls};
use dieselnn::control::{CriterionWeights, RlsState, SensitivityPair};
use proptest::prelude::*;

fn stream_single(n: usize, steps: usize, seed: u64) -> Vec<(f64, Vec<f64>)> {
    let mut r = rng(seed);
    (0..steps)
        .map(|_| (gaussian_vec(&mut r, 1, 1.0)[0], gaussian_vec(&mut r, n, 1.0)))
        .collect()
}

fn stream_pairs(n: usize, steps: usize, seed: u64) -> Vec<SensitivityPair<f64>> {
    let mut r = rng(seed);
    (0..steps)
        .map(|_| {
            let e = gaussian_vec(&mut r, 2, 1.0);
            SensitivityPair {
                psi_y: gaussian_vec(&mut r, n, 1.0),
                psi_z: gaussian_vec(&mut r, n, 1.0),
                e_y: e[0],
                e_z: e[1],
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn single_update_matches_direct_inverse(n in 2usize..21, seed in 0u64..100_000, delta in prop_oneof![Just(1.0), Just(1000.0)]) {
        let w0 = gaussian_vec(&mut rng(seed ^ 0xabc), n, 1.0);
        let mut s = RlsState::new(w0.clone(), delta).unwrap();
        let mut d = DirectRls::new(w0, delta);
        for (e, psi) in stream_single(n, 200, seed) {
            s.update_single(e, &psi).unwrap();
            let g: Vec<f64> = psi.iter().map(|p| e * p).collect();
            let p = d.step(&[&psi], &g);
            prop_assert!(rel_max_diff(s.p.as_slice(), &p) < 1e-8);
        }
        prop_assert!(rel_err(&s.w, &d.w, 1e-12) < 1e-8);
    }

    #[test]
    fn multi_update_matches_direct_inverse(n in 2usize..21, seed in 0u64..100_000, eta in 0.0..2.0f64) {
        let w0 = gaussian_vec(&mut rng(seed ^ 0xdef), n, 1.0);
        let weights = CriterionWeights { eta_y: 1.0, eta_z: eta };
        let mut s = RlsState::new(w0.clone(), 1000.0).unwrap();
        let mut d = DirectRls::new(w0, 1000.0);
        for pair in stream_pairs(n, 200, seed) {
            s.update_multi(&pair, &weights).unwrap();
            let g: Vec<f64> = pair
                .psi_y
                .iter()
                .zip(&pair.psi_z)
                .map(|(y, z)| weights.eta_y * pair.e_y * y + weights.eta_z * pair.e_z * z)
                .collect();
            let p = d.step(&[&pair.psi_y, &pair.psi_z], &g);
            prop_assert!(rel_max_diff(s.p.as_slice(), &p) < 1e-8);
        }
        prop_assert!(rel_err(&s.w, &d.w, 1e-12) < 1e-8);
    }

    #[test]
    fn multi_without_opacity_is_single(n in 1usize..21, seed in 0u64..100_000, eta_z in 0.0..5.0f64) {
        let w0 = gaussian_vec(&mut rng(seed), n, 1.0);
        let mut a = RlsState::new(w0.clone(), 1000.0).unwrap();
        let mut b = RlsState::new(w0, 1000.0).unwrap();
        let weights = CriterionWeights { eta_y: 1.0, eta_z };
        for (e, psi) in stream_single(n, 200, seed + 1) {
            a.update_single(e, &psi).unwrap();
            let pair = SensitivityPair { psi_y: psi, psi_z: vec![0.0; n], e_y: e, e_z: 3.0 };
            b.update_multi(&pair, &weights).unwrap();
        }
        let scale = a.p.max_abs().max(1.0);
        prop_assert!(a.p.max_abs_diff(&b.p) <= 1e-14 * scale);
        let wscale = a.w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(a.w.iter().zip(&b.w).all(|(x, y)| (x - y).abs() <= 1e-14 * wscale));
    }

    #[test]
    fn opacity_weight_changes_weights_only(n in 1usize..15, seed in 0u64..100_000, eta_a in 0.0..3.0f64, eta_b in 0.0..3.0f64) {
        let w0 = gaussian_vec(&mut rng(seed), n, 1.0);
        let mut a = RlsState::new(w0.clone(), 1000.0).unwrap();
        let mut b = RlsState::new(w0, 1000.0).unwrap();
        for pair in stream_pairs(n, 50, seed + 2) {
            a.update_multi(&pair, &CriterionWeights { eta_y: 1.0, eta_z: eta_a }).unwrap();
            b.update_multi(&pair, &CriterionWeights { eta_y: 1.0, eta_z: eta_b }).unwrap();
            prop_assert_eq!(&a.p, &b.p);
        }
    }

    #[test]
    fn update_uses_only_the_current_error(n in 1usize..10, seed in 0u64..100_000) {
        // Same sensitivities, different past errors: once W is aligned the next
        // increment is identical, so history enters only through W and P.
        let stream = stream_pairs(n, 20, seed);
        let w = CriterionWeights::opacity(0.5);
        let mut a = RlsState::new(vec![0.0; n], 1000.0).unwrap();
        let mut b = a.clone();
        for p in &stream[..19] {
            a.update_multi(p, &w).unwrap();
            let other = SensitivityPair { e_y: -2.0 * p.e_y + 1.0, e_z: 0.3, ..p.clone() };
            b.update_multi(&other, &w).unwrap();
        }
        prop_assert_eq!(&a.p, &b.p);
        prop_assert!(a.w != b.w);
        b.w = a.w.clone();
        a.update_multi(&stream[19], &w).unwrap();
        b.update_multi(&stream[19], &w).unwrap();
        prop_assert_eq!(&a.w, &b.w);
    }
}

#[test]
fn covariance_stays_symmetric_positive_definite() {
    for (n, seed) in [(3usize, 1u64), (10, 2), (20, 3)] {
        let mut s = RlsState::new(vec![0.0; n], 1000.0).unwrap();
        let mut r = rng(seed);
        let w = CriterionWeights::opacity(0.8);
        for t in 0..10_000 {
            let pair = SensitivityPair {
                psi_y: gaussian_vec(&mut r, n, 1.0),
                psi_z: gaussian_vec(&mut r, n, 0.5),
                e_y: 0.1,
                e_z: -0.1,
            };
            s.update_multi(&pair, &w).unwrap();
            if t % 1000 == 999 {
                let sym = s.p.symmetry_residual() / s.p.max_abs();
                assert!(sym < 1e-10, "n {n} step {t}: symmetry residual {sym:e}");
                let lam = min_eigenvalue(s.p.as_slice(), n);
                assert!(lam > 0.0, "n {n} step {t}: min eigenvalue {lam:e}");
            }
        }
    }
}
