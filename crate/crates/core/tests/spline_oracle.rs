mod common;

use std::f64::consts::PI;

use common::*;
use noise_floor_core::envelope::GridSpec;
use noise_floor_core::estimator::oracle_quantities;
use noise_floor_core::regularizers::d_and_w;
use noise_floor_core::splines::{demmler_reinsch, k_m_constant, spline_fit, uniform_design};
use noise_floor_core::{Regularizer, SplineNoiseEstimator};

// Frozen from a 40-digit adaptive quadrature run (independent of the crate's GK15).
const K1: f64 = 1.276_272_015_520_853_5;
const K2: f64 = 1.084_688_217_323_819_9;
const K3: f64 = 1.046_389_528_394_748_5;
const K20: f64 = 1.004_571_527_715_651_1;

#[test]
fn k_constant_golden_values() {
    assert!((k_m_constant(1) - 13.0 * PI / 32.0).abs() < 1e-12);
    assert!((k_m_constant(1) - K1).abs() < 1e-12);
    assert!((k_m_constant(2) - K2).abs() < 1e-10);
    assert!((k_m_constant(3) - K3).abs() < 1e-10);
    assert!((k_m_constant(20) - K20).abs() < 1e-10);
}

#[test]
fn k_constant_against_composite_simpson() {
    // ∫_0^∞ via x = u/(1−u) on [0, 1), composite Simpson with 2·10⁵ panels.
    let m = 2;
    let f = |x: f64| {
        let a = 1.0 / (1.0 + x.powi(2 * m));
        let g = a * (2.0 - a);
        g * g
    };
    let n = 200_000;
    let h = 1.0 / n as f64;
    let mapped = |u: f64| if u >= 1.0 { 0.0 } else { f(u / (1.0 - u)) / ((1.0 - u) * (1.0 - u)) };
    let mut s = mapped(0.0) + mapped(1.0);
    for i in 1..n {
        let u = i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * mapped(u);
    }
    let simpson = s * h / 3.0;
    assert!((k_m_constant(2) - simpson).abs() < 1e-10, "{} vs {simpson}", k_m_constant(2));
}

#[test]
fn m1_spectrum_matches_closed_form_and_jacobi() {
    // Uniform design, m = 1: P = n·L with L the path Laplacian, whose
    // eigenvalues are 4 sin²(πk/2n); hence ν_k = 4n² sin²(πk/2n).
    let n = 8;
    let basis = demmler_reinsch(&uniform_design(n), 1).unwrap();
    let (mu, _) = jacobi_eigen(&uniform_penalty(n, 1));
    let mut oracle: Vec<f64> = mu.iter().map(|v| n as f64 * v).collect();
    oracle.reverse();
    assert!(basis.nu()[0].abs() <= 1e-8);
    for k in 1..n {
        let closed = 4.0 * (n * n) as f64 * (PI * k as f64 / (2 * n) as f64).sin().powi(2);
        assert!(rel_err(basis.nu()[k], closed) < 1e-10, "k {k}: {} vs {closed}", basis.nu()[k]);
        assert!(rel_err(basis.nu()[k], oracle[k]) < 1e-10);
    }
}

#[test]
fn m2_spectrum_matches_jacobi_on_assembled_penalty() {
    let n = 20;
    let basis = demmler_reinsch(&uniform_design(n), 2).unwrap();
    let (mu, _) = jacobi_eigen(&uniform_penalty(n, 2));
    let mut oracle: Vec<f64> = mu.iter().map(|v| n as f64 * v).collect();
    oracle.reverse();
    assert!(basis.nu()[0].abs() <= 1e-8 && basis.nu()[1].abs() <= 1e-8);
    for k in 2..n {
        assert!(rel_err(basis.nu()[k], oracle[k]) < 1e-10, "k {k}");
    }
}

#[test]
fn spline_fit_solves_penalized_normal_equations() {
    let n = 16;
    let alpha = 0.01;
    let y: Vec<f64> = random_vector(5, n).iter().enumerate().map(|(i, e)| (2.0 * PI * (i as f64 + 0.5) / n as f64).sin() + 0.3 * e).collect();
    let basis = demmler_reinsch(&uniform_design(n), 2).unwrap();
    let fit = spline_fit(&basis, &y, alpha).unwrap();

    let p = uniform_penalty(n, 2);
    let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| n as f64 * alpha * p[i][j] + if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let direct = solve(&a, &y);
    for i in 0..n {
        assert!((fit[i] - direct[i]).abs() < 1e-8, "i {i}: {} vs {}", fit[i], direct[i]);
    }
}

#[test]
fn residual_decomposition_in_empirical_basis() {
    let n = 64;
    let y: Vec<f64> = random_vector(9, n).iter().enumerate().map(|(i, e)| ((i as f64 + 0.5) / n as f64).powi(3) + 0.1 * e).collect();
    let basis = demmler_reinsch(&uniform_design(n), 2).unwrap();
    let coefs = basis.coefficients(&y).unwrap();
    for alpha in [1e-7, 1e-4, 1e-1] {
        let fit = spline_fit(&basis, &y, alpha).unwrap();
        let direct: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum();
        let spectral: f64 = coefs
            .iter()
            .zip(basis.nu())
            .map(|(c, nu)| {
                let shrink = 1.0 - 1.0 / (1.0 + alpha * nu);
                shrink * shrink * n as f64 * c * c
            })
            .sum();
        assert!(rel_err(direct, spectral) < 1e-8, "alpha {alpha}");
    }
}

#[test]
fn spline_smoother_is_tikhonov_on_reciprocal_eigenvalues() {
    let basis = demmler_reinsch(&uniform_design(32), 2).unwrap();
    for &alpha in &[1e-6, 1e-3, 1.0] {
        for (nu, lambda) in basis.nu().iter().zip(basis.lambdas()) {
            let spline = 1.0 / (1.0 + alpha * nu);
            let tikhonov = Regularizer::Tikhonov.h(alpha, lambda);
            assert!((spline - tikhonov).abs() <= 1e-15, "nu {nu}");
        }
    }
}

#[test]
fn d_alpha_follows_k_constant_asymptotics() {
    let n = 1024;
    let basis = demmler_reinsch(&uniform_design(n), 1).unwrap();
    let lambdas = basis.lambdas();
    let k1 = k_m_constant(1);
    for alpha in [1e-6, 1e-5, 1e-4, 1e-3] {
        let (d, _) = d_and_w(&Regularizer::Tikhonov, alpha, &lambdas);
        let ratio = d * PI * alpha.sqrt() / k1;
        assert!((0.8..=1.2).contains(&ratio), "alpha {alpha}: ratio {ratio}");
    }
}

#[test]
fn oracle_risk_matches_exhaustive_evaluation() {
    let n = 128;
    let sigma = 0.5;
    let basis = demmler_reinsch(&uniform_design(n), 2).unwrap();
    let est = SplineNoiseEstimator::new(basis.clone(), &GridSpec::default()).unwrap();
    let grid = est.grid();

    let f: Vec<f64> = uniform_design(n).iter().map(|x| (2.0 * PI * x).sin()).collect();
    let signal: Vec<f64> = basis.coefficients(&f).unwrap().iter().map(|c| c * (n as f64).sqrt()).collect();
    let report = oracle_quantities(&signal, est.lambdas(), n, &Regularizer::Tikhonov, grid, sigma).unwrap();

    let nf = n as f64;
    let mut best = f64::INFINITY;
    for (i, (&alpha, &v)) in grid.alphas().iter().zip(grid.v_values()).enumerate() {
        let h: Vec<f64> = basis.nu().iter().map(|nu| 1.0 / (1.0 + alpha * nu)).collect();
        let w: f64 = h.iter().map(|h| 2.0 * h - h * h).sum();
        let q = w / (nf - w);
        let bias: f64 = h.iter().zip(&signal).map(|(h, s)| (1.0 - h) * (1.0 - h) * s * s).sum();
        let risk = (1.0 + v / nf) * ((1.0 + q) * bias + sigma * sigma * v);
        assert!(rel_err(report.risk_values[i], risk) < 1e-10, "point {i}");
        best = best.min(risk);
    }
    assert!(rel_err(report.r_eps, best) < 1e-10);
    assert!(rel_err(report.rho, sigma * sigma * grid.d_alpha_max().sqrt() / best) < 1e-10);
}
