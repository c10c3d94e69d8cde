mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use noise_floor_core::envelope::{build_grid, v_epsilon, v_epsilon_tilde, EnvelopeParams};
use noise_floor_core::estimator::{select_alpha, sigma2_alpha};
use noise_floor_core::regularizers::{d_and_w, g_value, q_from_w};
use noise_floor_core::spectral::{spectralize, DEFAULT_RANK_TOLERANCE};
use noise_floor_core::{FamilyKind, LinearModelData, Regularizer, SpectralModel, Q_CONST};
use proptest::prelude::*;

fn eigenvalue_set() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..25).prop_map(|v| {
        let mut l: Vec<f64> = v.into_iter().map(|e| 10f64.powf(e)).collect();
        l.sort_by(|a, b| b.total_cmp(a));
        l
    })
}

fn model_strategy() -> impl Strategy<Value = SpectralModel> {
    (eigenvalue_set(), 1usize..30, any::<u64>()).prop_map(|(l, extra, seed)| {
        let n = l.len() + extra;
        SpectralModel::new(l, random_vector(seed, n)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn functionals_are_monotone_in_alpha(
        l in eigenvalue_set(),
        extra in 1usize..50,
        a in -4.0f64..4.0,
        b in -4.0f64..4.0,
        family in 0usize..3,
    ) {
        let (lo, hi) = if a <= b { (10f64.powf(a), 10f64.powf(b)) } else { (10f64.powf(b), 10f64.powf(a)) };
        let n = l.len() + extra;
        let fam = FamilyKind::ALL[family].bind(&l).unwrap();
        let (d_lo, w_lo) = d_and_w(&fam, lo, &l);
        let (d_hi, w_hi) = d_and_w(&fam, hi, &l);
        prop_assert!(d_lo >= d_hi);
        prop_assert!(w_lo >= w_hi);
        if let (Ok(q_lo), Ok(q_hi)) = (q_from_w(w_lo, n, lo), q_from_w(w_hi, n, hi)) {
            prop_assert!(q_lo >= q_hi);
        }
    }

    #[test]
    fn g_lies_between_h_and_one(h in 0.0f64..=1.0) {
        let g = g_value(h).unwrap();
        prop_assert!(g >= h && g <= 1.0);
    }

    #[test]
    fn cutoff_functionals_count_components(l in eigenvalue_set(), a in -3.0f64..3.0) {
        let alpha = 10f64.powf(a);
        let count = l.iter().filter(|&&x| x >= alpha).count() as f64;
        let (d, w) = d_and_w(&Regularizer::Cutoff, alpha, &l);
        prop_assert_eq!(d, count);
        prop_assert_eq!(w, count);
    }

    #[test]
    fn scaling_by_powers_of_two_is_exact(model in model_strategy(), k in -20i32..20, a in -3.0f64..3.0, family in 0usize..3) {
        let c = 2f64.powi(k);
        let alpha = 10f64.powf(a);
        let fam = FamilyKind::ALL[family].bind(model.eigenvalues()).unwrap();
        if let Ok(base) = sigma2_alpha(&model, &fam, alpha) {
            let scaled = sigma2_alpha(&model.scaled(c), &fam, alpha).unwrap();
            prop_assert_eq!(scaled, c * c * base);
        }
    }

    #[test]
    fn scaling_keeps_selected_alpha(model in model_strategy(), c in prop_oneof![0.001f64..1000.0, -1000.0f64..-0.001]) {
        let grid = build_grid(&Regularizer::Tikhonov, model.eigenvalues(), 1e-4, 1e4, 0.5, None).unwrap();
        let (Ok(base), Ok(scaled)) = (
            select_alpha(&model, &Regularizer::Tikhonov, &grid),
            select_alpha(&model.scaled(c), &Regularizer::Tikhonov, &grid),
        ) else {
            return Ok(());
        };
        prop_assert_eq!(base.alpha_index, scaled.alpha_index);
        prop_assert!(rel_err(scaled.sigma2_hat, c * c * base.sigma2_hat) < 1e-13);
    }

    #[test]
    fn rotation_preserves_norm_and_is_idempotent(seed in any::<u64>(), p in 1usize..8, extra in 0usize..8) {
        let n = p + extra;
        let x = random_matrix(seed, n, p);
        let y = random_vector(seed ^ 0x5555, n);
        let data = LinearModelData::new(to_dmatrix(&x), DVector::from_vec(y.clone())).unwrap();
        let model = spectralize(&data, DEFAULT_RANK_TOLERANCE).unwrap();
        let norm: f64 = y.iter().map(|v| v * v).sum();
        let rotated: f64 = model.ybar().iter().map(|v| v * v).sum();
        prop_assert!(rel_err(rotated, norm) < 1e-10);

        let (lambda, _) = jacobi_eigen(&gram(&x));
        for k in 0..p {
            prop_assert!((model.eigenvalues()[k] - lambda[k]).abs() <= 1e-8 * lambda[0]);
        }

        let lam = model.eigenvalues();
        let xd = DMatrix::from_fn(n, p, |i, j| if i == j { lam[j].sqrt() } else { 0.0 });
        let again = spectralize(&LinearModelData::new(xd, DVector::from_vec(model.ybar().to_vec())).unwrap(), DEFAULT_RANK_TOLERANCE).unwrap();
        for k in 0..p {
            prop_assert!((again.eigenvalues()[k] - lam[k]).abs() <= 1e-12 * lam[0]);
        }
        for k in 0..model.rank() {
            prop_assert!((again.ybar()[k].abs() - model.ybar()[k].abs()).abs() <= 1e-10 * norm.sqrt());
        }
        prop_assert!((again.tail_energy() - model.tail_energy()).abs() <= 1e-10 * norm);
    }

    #[test]
    fn envelope_nondecreasing_beyond_clamp_region(eps in 0.01f64..=1.0, t1 in 0.0f64..50.0, dt in 0.0f64..10.0, d_max in 5.0f64..1e4) {
        let params = EnvelopeParams::new(eps, 1.0, d_max).unwrap();
        let t0 = eps * eps / Q_CONST;
        let d1 = d_max * (t0 + t1).exp();
        let d2 = d1 * dt.exp();
        prop_assert!(v_epsilon(&params, d1).unwrap() <= v_epsilon(&params, d2).unwrap());
    }

    #[test]
    fn envelope_leading_order_band(eps in 0.0101f64..=1.0, d_max in 1.0f64..1e3) {
        let params = EnvelopeParams::new(eps, 1.0, d_max).unwrap();
        let d = d_max * 1e6;
        let ratio = v_epsilon(&params, d).unwrap() / (2.0 * d * 1e6f64.ln()).sqrt();
        prop_assert!(ratio >= 1.0 && ratio <= (1.0 + eps) * 1.8, "ratio {}", ratio);
    }

    #[test]
    fn simplified_envelope_is_smaller(eps in 0.01f64..=1.0, t in std::f64::consts::E..200.0) {
        let params = EnvelopeParams::new(eps, 1.0, 10.0).unwrap();
        let d = 10.0 * t.exp();
        prop_assert!(v_epsilon_tilde(&params, d).unwrap() <= v_epsilon(&params, d).unwrap());
    }

    #[test]
    fn grid_levels_are_geometric(l in eigenvalue_set(), eps in 0.1f64..=1.0) {
        let grid = build_grid(&Regularizer::Tikhonov, &l, 1e-6, 1e6, eps, None).unwrap();
        let d = grid.d_values();
        for w in d.windows(2).take(d.len().saturating_sub(2)) {
            prop_assert!(rel_err(w[1] / w[0], 1.0 + grid.ratio()) < 1e-6);
        }
    }
}

#[test]
fn tikhonov_limits() {
    assert!(Regularizer::Tikhonov.h(1e-12, 1.0) > 1.0 - 1e-11);
    for fam in [Regularizer::Tikhonov, Regularizer::Cutoff, Regularizer::Landweber { step: 0.1 }] {
        assert_eq!(fam.h(0.5, 0.0), 0.0);
        assert_eq!(fam.h(0.5, f64::INFINITY), 1.0);
    }
}
