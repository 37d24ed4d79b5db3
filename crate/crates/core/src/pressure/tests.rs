use super::*;
use crate::equilibrium::{b_constant_circle, b_constant_line, BConfig};
use proptest::prelude::*;

fn settings(seed: u64) -> PressureSettings {
    PressureSettings { seed, ..PressureSettings::default() }
}

/// Tensor Gauss–Legendre integral of `f` over `[lo, hi]^dim`.
fn cube_integral(dim: usize, lo: f64, hi: f64, nodes: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let (x, w) = gauss_legendre_on(nodes, lo, hi);
    let mut idx = vec![0usize; dim];
    let mut total = 0.0;
    loop {
        let pt: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let wt: f64 = idx.iter().map(|&i| w[i]).product();
        total += wt * f(&pt);
        let mut k = 0;
        while k < dim {
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == dim {
            return total;
        }
    }
}

fn vandermonde_sq(x: &[f64]) -> f64 {
    let mut p = 1.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            p *= (x[i] - x[j]).powi(2);
        }
    }
    p
}

#[test]
fn gaussian_partition_is_exact() {
    let half_log_tau = 0.5 * TAU.ln();
    for n in 1..=64 {
        let z = log_partition_line(&Potential::quadratic(), n, &settings(0)).unwrap();
        assert_eq!(z.method, PartitionMethod::Exact);
        assert!((z.normalized - half_log_tau).abs() < 1e-10, "N={n}: {}", z.normalized);
        // Weyl integration formula reproduces the same Gaussian integral.
        let nf = n as f64;
        let via_weyl = weyl_log_constant(n) + log_gaussian_eigenvalue_integral(n);
        assert!((via_weyl - 0.5 * nf * nf * (TAU / nf).ln()).abs() < 1e-9 * nf * nf, "N={n}");
    }
    let z = log_partition_line(&Potential::scaled_quadratic(1.0), 10, &settings(0)).unwrap();
    assert!((z.normalized - 0.5 * PI.ln()).abs() < 1e-10);
}

#[test]
fn gaussian_eigenvalue_integral_matches_quadrature() {
    for n in [2usize, 3] {
        let nf = n as f64;
        let direct = cube_integral(n, -9.0, 9.0, 60, |x| {
            vandermonde_sq(x) * (-nf * x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp()
        });
        let closed = log_gaussian_eigenvalue_integral(n);
        assert!((direct.ln() - closed).abs() < 1e-8, "N={n}: {} vs {closed}", direct.ln());
    }
}

#[test]
fn cube_integral_matches_quadrature() {
    assert!((log_cube_eigenvalue_integral(2, 1.0) - (8.0f64 / 3.0).ln()).abs() < 1e-12);
    for (n, r) in [(2usize, 0.7), (3, 1.0), (4, 1.3)] {
        // The integrand is a polynomial, so a few nodes are exact.
        let direct = cube_integral(n, -r, r, 8, vandermonde_sq);
        assert!((direct.ln() - log_cube_eigenvalue_integral(n, r)).abs() < 1e-11, "N={n}");
    }
}

#[test]
fn ball_volume_limit() {
    for r in [0.5, 2.0, 5.0] {
        let limit = (r / 2.0f64).ln() + 0.75 + 0.5 * TAU.ln();
        let n = 4000usize;
        let nf = n as f64;
        let v = log_ball_volume(n, r) / (nf * nf) + 0.5 * nf.ln();
        assert!((v - limit).abs() < 1e-6, "R={r}: {v} vs {limit}");
    }
}

#[test]
fn flat_pressure_matches_ball_volume() {
    let zero = Potential::line(vec![0.0], 0.0);
    for (n, r) in [(1usize, 1.5), (2, 2.0), (4, 2.0), (6, 1.0)] {
        let p = pressure_at(std::slice::from_ref(&zero), n, r, &settings(3)).unwrap();
        let nf = n as f64;
        let exact = log_ball_volume(n, r) / (nf * nf) + 0.5 * nf.ln();
        assert!(p.truncation_mass.is_none());
        assert!((p.value - exact).abs() < 4.0 * p.std_error + 1e-3, "N={n}: {} vs {exact} ({})", p.value, p.std_error);
    }
}

#[test]
fn constant_shift_peels_off_exactly() {
    let q = Potential::line(vec![0.0, 0.3, 0.0, 0.0, 0.25], 0.0);
    let s = settings(5);
    let base = log_partition_line(&q, 6, &s).unwrap();
    let shifted = log_partition_line(&q.shifted(1.75), 6, &s).unwrap();
    assert_eq!(base.method, PartitionMethod::ThermodynamicIntegration);
    assert!((shifted.log_z - (base.log_z - 1.75 * 36.0)).abs() < 1e-9);
    assert!((shifted.normalized - base.normalized + 1.75).abs() < 1e-12);

    let g = Potential::line(vec![-2.0, 1.0, 1.5], 3.0);
    let a = pressure_at(std::slice::from_ref(&g), 5, 3.0, &s).unwrap();
    let b = pressure_at(&[g.shifted(0.5)], 5, 3.0, &s).unwrap();
    assert!((a.value - b.value - 0.5).abs() < 1e-12);
}

#[test]
fn quartic_extrapolates_to_b_constant() {
    let q = Potential::quartic();
    let b = b_constant_line(std::slice::from_ref(&q), &BConfig::default()).unwrap();
    let s = settings(11);
    let values: Vec<(f64, f64)> = [6usize, 10, 16]
        .iter()
        .map(|&n| {
            let z = log_partition_line(&q, n, &s).unwrap();
            (1.0 / (n * n) as f64, z.normalized)
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = values.into_iter().unzip();
    let (a, _, _) = linear_fit(&x, &y);
    assert!((a - b).abs() < 1e-2, "{a} vs {b}");
}

#[test]
fn circle_pressure_approaches_b_constant() {
    let q = Potential::cosine(2.0);
    let b = b_constant_circle(std::slice::from_ref(&q), &BConfig::default()).unwrap();
    let z = log_partition_circle(&q, 12, &settings(2)).unwrap();
    assert!((z.normalized - b).abs() < 5e-2, "{} vs {b}", z.normalized);
    let z0 = log_partition_circle(&Potential::zero_circle().shifted(0.25), 7, &settings(2)).unwrap();
    assert_eq!(z0.method, PartitionMethod::Exact);
    assert!((z0.normalized + 0.25).abs() < 1e-15);
}

#[test]
fn partition_rejects_bad_input() {
    let s = settings(0);
    assert!(log_partition_line(&Potential::line(vec![0.0, 0.0, 0.0, 1.0], 0.0), 3, &s).is_err());
    assert!(matches!(log_partition_line(&Potential::cosine(1.0), 3, &s), Err(Error::CarrierMismatch(_))));
    assert!(matches!(log_partition_circle(&Potential::quadratic(), 3, &s), Err(Error::CarrierMismatch(_))));
    assert!(pressure_at(&[], 3, 1.0, &s).is_err());
    assert!(pressure_at(&[Potential::quadratic()], 3, -1.0, &s).is_err());
    let tight = PressureSettings { samples: 4, max_std_error: 1e-9, ..s };
    assert!(matches!(log_partition_line(&Potential::quartic(), 4, &tight), Err(Error::Diagnostics(_))));
}

#[test]
fn truncation_is_reported() {
    let s = settings(1);
    let loose = pressure_at(&[Potential::quadratic()], 4, 6.0, &s).unwrap();
    assert!(loose.warnings.is_empty());
    assert!(loose.truncation_mass.unwrap() < TRUNCATION_WARN);
    let err = pressure_at(&[Potential::quadratic()], 4, 1.0, &s).unwrap_err();
    assert!(matches!(err, Error::Truncation { .. }));
}

#[test]
fn estimate_extrapolates_gaussian_letters() {
    let h = [Potential::quadratic(), Potential::scaled_quadratic(1.0)];
    let r = pressure_estimate(&h, &[4, 8, 16], 6.0, &settings(0)).unwrap();
    let limit = 0.5 * TAU.ln() + 0.5 * PI.ln();
    assert_eq!(r.points.len(), 3);
    assert!((r.extrapolated - limit).abs() < 1e-9, "{}", r.extrapolated);
    assert!(r.slope.abs() < 1e-6);
    assert!(pressure_estimate(&h, &[], 6.0, &settings(0)).is_err());
}

#[test]
fn variational_identity_gaussian() {
    let h = Potential::quadratic();
    let one = gibbs_variational_check(&h, 1, 6.0, &settings(0)).unwrap();
    assert!(one.residual <= 1e-3 * one.pressure.abs(), "{one:?}");
    let tilted = Potential::line(vec![0.2, -0.5, 1.0], 2.0);
    let t = gibbs_variational_check(&tilted, 1, 1.2, &settings(0));
    // Mass outside is well above the warning level at this radius.
    assert!(matches!(t, Err(Error::Truncation { .. })));
    let n16 = gibbs_variational_check(&h, 16, 4.0, &PressureSettings { samples: 400, ..settings(4) }).unwrap();
    assert!(n16.residual <= 1e-2 * n16.pressure.abs(), "{n16:?}");
    assert!(matches!(gibbs_variational_check(&h, 16, 1.0, &settings(0)), Err(Error::Truncation { .. })));
    assert!(gibbs_variational_check(&Potential::quartic(), 2, 3.0, &settings(0)).is_err());
}

#[test]
fn truncated_normal_formulas_against_quadrature() {
    // Energy and entropy of the N = 1 law on a tight interval, by direct
    // quadrature of the density.
    let (a, b, c, r) = (0.8, 0.4, 0.1, 3.0);
    let q = Potential::line(vec![c, b, a], 1.6);
    let v = gibbs_variational_check(&q, 1, r, &settings(0)).unwrap();
    let (x, w) = gauss_legendre_on(200, -r, r);
    let dens: Vec<f64> = x.iter().map(|t| (-(a * t * t + b * t + c)).exp()).collect();
    let z: f64 = dens.iter().zip(&w).map(|(d, w)| d * w).sum();
    let energy: f64 = x.iter().zip(&dens).zip(&w).map(|((t, d), w)| (a * t * t + b * t + c) * d * w).sum::<f64>() / z;
    let entropy: f64 = dens.iter().zip(&w).map(|(d, w)| -(d / z) * (d / z).ln() * w).sum();
    assert!((v.pressure - z.ln()).abs() < 1e-12);
    assert!((v.energy - energy).abs() < 1e-12);
    assert!((v.entropy - entropy).abs() < 1e-12);
    assert!(v.residual < 1e-12);
}

fn quartic_family(t: f64) -> Potential {
    Potential::line(vec![0.0, 0.0, 0.5 + t, 0.0, 0.1], 0.0)
}

#[test]
fn pressure_is_monotone_lipschitz_and_convex() {
    let (n, r) = (4usize, 3.0);
    let s = PressureSettings { samples: 400, ..settings(21) };
    let p = |h: &Potential| pressure_at(std::slice::from_ref(h), n, r, &s).unwrap();
    let lo = p(&quartic_family(0.0));
    let hi = p(&quartic_family(0.5));
    let mid = p(&quartic_family(0.25));
    let err = |a: &PressurePoint, b: &PressurePoint| 2.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    // h <= h' pointwise gives P(h) >= P(h').
    assert!(lo.value >= hi.value - err(&lo, &hi));
    // |P(h) - P(h')| <= sup_{|x| <= R} |h - h'| = 0.5 R^2.
    assert!((lo.value - hi.value).abs() <= 0.5 * r * r + err(&lo, &hi));
    // Convexity along the segment.
    let chord = 0.5 * (lo.value + hi.value);
    let e = 2.0 * (mid.std_error.powi(2) + 0.5 * lo.std_error.powi(2) + 0.5 * hi.std_error.powi(2)).sqrt();
    assert!(mid.value <= chord + e, "{} > {chord}", mid.value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gaussian_pressure_is_convex_and_one_lipschitz(
        a1 in 0.3f64..2.0, a2 in 0.3f64..2.0, b1 in -1.0f64..1.0, b2 in -1.0f64..1.0, n in 1usize..40,
    ) {
        // Exact normalised log-partition of a x^2 + b x, untruncated.
        let f = |a: f64, b: f64| log_partition_line(&Potential::line(vec![0.0, b, a], 0.0), n, &settings(0)).unwrap().normalized;
        let (am, bm) = (0.5 * (a1 + a2), 0.5 * (b1 + b2));
        prop_assert!(f(am, bm) <= 0.5 * (f(a1, b1) + f(a2, b2)) + 1e-12);
        if a1 <= a2 {
            prop_assert!(f(a1, 0.0) >= f(a2, 0.0) - 1e-12);
        }
    }

    #[test]
    fn constant_shift_identity(c in -5.0f64..5.0, n in 1usize..30) {
        let q = Potential::quadratic();
        let a = log_partition_line(&q, n, &settings(0)).unwrap();
        let b = log_partition_line(&q.shifted(c), n, &settings(0)).unwrap();
        prop_assert!((a.normalized - b.normalized - c).abs() < 1e-10);
    }
}
