//! Checks against independently computed reference values.

use nalgebra::{DMatrix, DVector};
use tempered_causal::analytic::{f_n, f_n_prime, risk, GaussianRiskParams};
use tempered_causal::linalg::Matrix;
use tempered_causal::panel::{quantile_sorted, summarize_slice};
use tempered_causal::regression::{conjugate_moments, RegressionPriors};
use tempered_causal::scalar::{norm_cdf, norm_pdf, norm_quantile, norm_sf};
use tempered_causal::scoring::{crps_slice, interval_score};

/// `E[IS]` by Simpson quadrature over the sampling law of `Ȳ`.
fn expected_interval_score(omega: f64, sigma: f64, n: usize, alpha: f64) -> f64 {
    let se = sigma / (n as f64).sqrt();
    let half = norm_quantile(1.0 - alpha / 2.0) * se / omega.sqrt();
    let steps = 200_000;
    let (a, b) = (-12.0 * se, 12.0 * se);
    let h = (b - a) / steps as f64;
    let g = |ybar: f64| {
        let dens = (-0.5 * (ybar / se).powi(2)).exp() / (se * (2.0 * std::f64::consts::PI).sqrt());
        interval_score(ybar - half, ybar + half, 0.0, alpha).unwrap() * dens
    };
    let mut s = g(a) + g(b);
    for j in 1..steps {
        s += g(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn f_n_matches_quadrature() {
    for &(n, sigma) in &[(1usize, 1.0), (10, 1.0), (4, 2.5)] {
        let p = GaussianRiskParams::<f64>::new(n, sigma, 0.05).unwrap();
        for &w in &[0.25, 0.5, 1.0, 2.0, 3.0] {
            let q = expected_interval_score(w, sigma, n, 0.05);
            assert!((f_n(w, &p).unwrap() - q).abs() < 1e-8 * q.max(1.0), "n={n} w={w}");
        }
    }
}

#[test]
fn frozen_unit_values() {
    // Quadrature oracle value for σ = 1, n = 1, α = 0.05, ω = 1.
    let p = GaussianRiskParams::<f64>::new(1, 1.0, 0.05).unwrap();
    assert!((expected_interval_score(1.0, 1.0, 1, 0.05) - 4.675_605_584_402_829).abs() < 1e-8);
    assert!((f_n(1.0, &p).unwrap() - 4.675_605_584_402_829).abs() < 1e-12);
    assert!((risk(1.0, &p).unwrap() - 5.675_605_584_402_829).abs() < 1e-12);
}

#[test]
fn f_n_prime_matches_finite_difference() {
    let p = GaussianRiskParams::<f64>::new(1, 1.0, 0.05).unwrap();
    let h = 1e-5_f64;
    for &w in &[0.3, 2.0, 2.7] {
        let fd = (f_n(w + h, &p).unwrap() - f_n(w - h, &p).unwrap()) / (2.0 * h);
        let an = f_n_prime(w, &p).unwrap();
        assert!(((fd - an) / an).abs() < 1e-6, "w={w}");
    }
}

#[test]
fn derivative_has_single_sign_change_at_one() {
    let p = GaussianRiskParams::<f64>::new(1, 1.0, 0.05).unwrap();
    let grid: Vec<f64> = (0..1000).map(|j| 10f64.powf(-2.0 + 4.0 * j as f64 / 999.0)).collect();
    let signs: Vec<bool> = grid.iter().map(|&w| f_n_prime(w, &p).unwrap() > 0.0).collect();
    let changes: Vec<usize> = (1..signs.len()).filter(|&j| signs[j] != signs[j - 1]).collect();
    assert_eq!(changes.len(), 1);
    let j = changes[0];
    assert!(!signs[j - 1] && signs[j]);
    assert!(grid[j - 1] < 1.0 && grid[j] > 1.0);
}

#[test]
fn normal_routines_against_reference_values() {
    // Reference values from a 30-digit evaluation.
    assert!((norm_cdf(1.0_f64) - 0.841_344_746_068_542_9).abs() < 1e-15);
    assert!((norm_sf(3.0_f64) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
    assert!((norm_pdf(1.959_963_984_540_054_f64) - 0.058_445_069_805_035_38).abs() < 1e-15);
    assert!((norm_quantile(0.995_f64) - 2.575_829_303_548_900_4).abs() < 1e-13);
    let q = norm_quantile(1e-10_f64);
    assert!((q + 6.361_340_902_404_056).abs() < 1e-11, "{q}");
}

#[test]
fn conjugate_moments_match_nalgebra() {
    let n = 40;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, (i as f64 * 0.37).sin(), (i % 3) as f64]).collect();
    let y: Vec<f64> = rows.iter().map(|r| 0.5 * r[0] - r[1] + 2.0 * r[2] + 0.1 * (r[1] * 7.0).cos()).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let v0 = Matrix::from_rows(&[vec![4.0, 0.5, 0.0], vec![0.5, 2.0, 0.3], vec![0.0, 0.3, 1.0]]).unwrap();
    let m0 = vec![0.2, -0.1, 0.4];
    let priors = RegressionPriors::new(m0.clone(), &v0, 0.01, 0.01).unwrap();

    let xn = DMatrix::from_fn(n, 3, |i, j| rows[i][j]);
    let yn = DVector::from_vec(y.clone());
    let v0n = DMatrix::from_fn(3, 3, |i, j| v0[(i, j)]);
    let m0n = DVector::from_vec(m0);
    for &(omega, sigma2) in &[(0.5, 1.0), (1.0, 0.3), (2.0, 2.0)] {
        let w = omega / sigma2;
        let p0 = v0n.clone().try_inverse().unwrap();
        let v = (&p0 + xn.transpose() * &xn * w).try_inverse().unwrap();
        let m = &v * (&p0 * &m0n + xn.transpose() * &yn * w);
        let (mm, vv) = conjugate_moments(&x, &y, &priors, omega, sigma2).unwrap();
        for i in 0..3 {
            assert!((mm[i] - m[i]).abs() < 1e-10);
            for j in 0..3 {
                assert!((vv[(i, j)] - v[(i, j)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn crps_sorted_identity_matches_pairwise_sum() {
    let draws: Vec<f64> = (0..301).map(|i| ((i * 7919) % 301) as f64 / 37.0 - 3.0).collect();
    for &tau in &[-1.0, 0.3, 5.0] {
        let m = draws.len() as f64;
        let first: f64 = draws.iter().map(|x| (x - tau).abs()).sum::<f64>() / m;
        let mut pair = 0.0;
        for a in &draws {
            for b in &draws {
                pair += (a - b).abs();
            }
        }
        let brute = first - 0.5 * pair / (m * m);
        assert!((crps_slice(&draws, tau).unwrap() - brute).abs() < 1e-12);
    }
}

#[test]
fn type7_quantiles_match_definition() {
    let sorted = [1.0_f64, 2.0, 4.0, 8.0, 16.0];
    // h = (n − 1) p = 4 · 0.3 = 1.2 → 2 + 0.2 · (4 − 2)
    assert!((quantile_sorted(&sorted, 0.3) - 2.4_f64).abs() < 1e-15);
    assert_eq!(quantile_sorted(&sorted, 0.0), 1.0);
    assert_eq!(quantile_sorted(&sorted, 1.0), 16.0);
    let s = summarize_slice(&[3.0_f64, 1.0, 2.0, 5.0, 4.0], 0.5).unwrap();
    assert!((s.lower - 2.0).abs() < 1e-15 && (s.upper - 4.0).abs() < 1e-15);
}
