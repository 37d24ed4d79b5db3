use super::*;
use crate::equilibrium::solve_equilibrium;
use crate::free_moments::{semicircular_moment, Alphabet, Word};
use crate::measures::{Carrier, EmpiricalMeasure};
use proptest::prelude::*;

fn w(s: &str) -> Word {
    s.parse().unwrap()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn pooled(samples: &[Vec<f64>], carrier: Carrier) -> EmpiricalMeasure {
    EmpiricalMeasure::new(carrier, samples.iter().flatten().copied().collect()).unwrap()
}

#[test]
fn gue_moments() {
    let samples = sample_gue(64, 500, 11);
    let mut m1 = Vec::new();
    let mut m2 = Vec::new();
    let mut m4 = Vec::new();
    for s in &samples {
        let a = s.to_dense();
        let a2 = &a * &a;
        m1.push(a.trace().re / 64.0);
        m2.push(a2.trace().re / 64.0);
        m4.push(a2.norm_squared() / 64.0);
    }
    let (mean1, sd1) = mean_sd(&m1);
    assert!(mean1.abs() <= 3.0 * sd1 + 1e-12, "{mean1} {sd1}");
    assert!((mean_sd(&m2).0 - 1.0).abs() < 0.02);
    assert!((mean_sd(&m4).0 - 2.0).abs() < 0.05);
    for s in samples.iter().take(3) {
        assert!(MatrixSample::new(MatrixKind::SelfAdjoint, s.entries().clone()).is_ok());
    }
}

#[test]
fn tridiagonal_model_matches_dense_gue() {
    let mut rng = chain_rng(3, 0);
    let n = 32;
    let mut m2 = Vec::new();
    let mut m4 = Vec::new();
    for _ in 0..400 {
        let v = gue_eigenvalues(n, &mut rng);
        m2.push(v.iter().map(|x| x * x).sum::<f64>() / n as f64);
        m4.push(v.iter().map(|x| x.powi(4)).sum::<f64>() / n as f64);
    }
    // Exact finite-N values: E tr A^2 = 1, E tr A^4 = 2 + 1/N^2.
    let (a, sa) = mean_sd(&m2);
    let (b, sb) = mean_sd(&m4);
    assert!((a - 1.0).abs() < 4.0 * sa, "{a} {sa}");
    assert!((b - 2.0 - 1.0 / (n * n) as f64).abs() < 4.0 * sb, "{b} {sb}");
    assert_eq!(gue_eigenvalues(1, &mut rng).len(), 1);
}

#[test]
fn gaussian_spectrum_is_semicircular() {
    let s = sample_gibbs_eigenvalues(&Potential::quadratic(), 128, 4, 5).unwrap();
    let d = pooled(&s, Carrier::Interval { radius: 10.0 }).kolmogorov_distance(crate::measures::semicircle_cdf);
    assert!(d < 0.05, "{d}");
}

#[test]
fn scalar_gaussian_case() {
    let s = sample_gibbs_eigenvalues(&Potential::quadratic(), 1, 4000, 9).unwrap();
    let xs: Vec<f64> = s.iter().map(|v| v[0]).collect();
    let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
    assert!((var - 1.0).abs() < 0.08, "{var}");
}

#[test]
fn quartic_spectrum_matches_equilibrium() {
    let q = Potential::quartic();
    let run = sample_gibbs_eigenvalues_with(&q, 128, 8, 21, &SamplerSettings::default(), None).unwrap();
    assert!(!run.exact);
    assert!((0.1..=0.9).contains(&run.acceptance));
    let mu = solve_equilibrium(&q, 3.0, 600).unwrap();
    let d = pooled(&run.samples, Carrier::Interval { radius: 10.0 }).kolmogorov_distance(|x| mu.cdf(x));
    assert!(d < 0.07, "{d}");
}

#[test]
fn mcmc_path_reproduces_gaussian_second_moment() {
    // A vanishing quartic term forces the Metropolis path.
    let q = Potential::line(vec![0.0, 0.0, 0.5, 0.0, 1e-300], 1.0);
    let run = sample_gibbs_eigenvalues_with(&q, 32, 40, 2, &SamplerSettings::default(), None).unwrap();
    assert!(!run.exact);
    let m2: Vec<f64> = run.samples.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>() / 32.0).collect();
    let (m, _) = mean_sd(&m2);
    assert!((m - 1.0).abs() < 0.05, "{m}");
}

#[test]
fn retraction_examples() {
    let a = MatrixSample::new(
        MatrixKind::SelfAdjoint,
        Entries::Dense(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(-3.0, 0.0),
        ]))),
    )
    .unwrap();
    let r = retract(&a, 2.0).unwrap();
    assert_eq!(r.eigenvalues().unwrap(), vec![-2.0, 2.0]);
    let g = &sample_gue(8, 1, 1)[0];
    assert_eq!(&retract(g, 10.0).unwrap(), g);
    assert!(retract(&sample_haar_unitary(2, 1, 0)[0], 1.0).is_err());
}

#[test]
fn retraction_is_a_contraction() {
    for &n in &[2usize, 8, 32] {
        let a = sample_gue(n, 1000, 100 + n as u64);
        let b = sample_gue(n, 1000, 200 + n as u64);
        for (x, y) in a.iter().zip(&b) {
            let before = x.hs_distance(y).unwrap();
            let after = retract(x, 1.0).unwrap().hs_distance(&retract(y, 1.0).unwrap()).unwrap();
            assert!(after <= before + 1e-12, "N={n}: {after} > {before}");
        }
    }
}

#[test]
fn word_trace_examples() {
    let id = MatrixSample::new(MatrixKind::SelfAdjoint, Entries::Diagonal(vec![Complex64::new(1.0, 0.0); 3])).unwrap();
    assert_eq!(word_trace(&[id], &w("1")).unwrap(), Complex64::new(1.0, 0.0));
    let a1 = MatrixSample::new(
        MatrixKind::SelfAdjoint,
        Entries::Dense(CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ]))),
    )
    .unwrap();
    let a2 = MatrixSample::new(MatrixKind::SelfAdjoint, Entries::Dense(CMatrix::identity(2, 2))).unwrap();
    assert_eq!(word_trace(&[a1.clone(), a2], &w("1 2")).unwrap().norm(), 0.0);
    let u = &sample_haar_unitary(5, 1, 3)[0];
    assert!((word_trace(std::slice::from_ref(u), &w("1 1*")).unwrap() - 1.0).norm() < 1e-12);
    assert!(word_trace(&[a1], &w("2")).is_err());
}

#[test]
fn evaluator_matches_direct_products() {
    let mut rng = chain_rng(8, 0);
    let n = 6;
    let diag = MatrixSample::unchecked(
        MatrixKind::Unitary,
        Entries::Diagonal((0..n).map(|k| Complex64::from_polar(1.0, k as f64)).collect()),
    );
    let h1 = MatrixSample::unchecked(MatrixKind::Unitary, Entries::Dense(haar_matrix(n, &mut rng)));
    let h2 = MatrixSample::unchecked(MatrixKind::Unitary, Entries::Dense(haar_matrix(n, &mut rng)));
    let tuple = vec![diag, h1, h2];
    let mut eval = WordEvaluator::new(&tuple).unwrap();
    for word in all_words(Alphabet::Unitary, 3, 4) {
        let mut p = CMatrix::identity(n, n);
        for l in word.letters() {
            let m = tuple[l.index - 1].to_dense();
            p = if l.star { p * m.adjoint() } else { p * m };
        }
        let direct = p.trace() / n as f64;
        assert!((eval.trace(&word).unwrap() - direct).norm() < 1e-10, "{word}");
    }
}

#[test]
fn palindromes_have_real_traces() {
    let mut tuple = sample_gue(12, 2, 4);
    tuple.push(MatrixSample::unchecked(
        MatrixKind::SelfAdjoint,
        Entries::Diagonal((0..12).map(|k| Complex64::new(k as f64 * 0.1, 0.0)).collect()),
    ));
    for word in all_words(Alphabet::SelfAdjoint, 3, 5) {
        let rev = Word(word.letters().iter().rev().copied().collect());
        if rev == word {
            assert!(word_trace(&tuple, &word).unwrap().im.abs() < 1e-10);
        }
    }
}

#[test]
fn haar_moments_vanish() {
    let us = sample_haar_unitary(64, 500, 17);
    let mut t1 = Complex64::new(0.0, 0.0);
    let mut t2 = Complex64::new(0.0, 0.0);
    for u in &us {
        let m = u.to_dense();
        t1 += m.trace() / 64.0;
        t2 += (&m * &m).trace() / 64.0;
    }
    assert!((t1 / 500.0).norm() <= 3e-2);
    assert!((t2 / 500.0).norm() <= 3e-2);
    for u in us.iter().take(5) {
        let m = u.to_dense();
        assert!((m.adjoint() * &m - CMatrix::identity(64, 64)).camax() < 1e-10);
    }
}

#[test]
fn cayley_angles_match_schur() {
    let mut rng = chain_rng(12, 0);
    for _ in 0..5 {
        let u = haar_matrix(6, &mut rng);
        let mut a = unitary_eigenangles(&u).unwrap();
        a.sort_by(f64::total_cmp);
        let (_, t) = u.clone().schur().unpack();
        let mut b: Vec<f64> = (0..6).map(|i| t[(i, i)].arg().rem_euclid(TAU)).collect();
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn su_projection_examples() {
    let i = Complex64::new(0.0, 1.0);
    let u = MatrixSample::new(MatrixKind::Unitary, Entries::Dense(CMatrix::from_diagonal_element(2, 2, i))).unwrap();
    let p = project_su(&u).unwrap();
    assert!((p.to_dense() - CMatrix::identity(2, 2)).camax() < 1e-12);
    assert_eq!(p.kind(), MatrixKind::SpecialUnitary);

    let haar = sample_haar_unitary(5, 1, 2).remove(0);
    let su = project_su(&haar).unwrap();
    let again = project_su(&su).unwrap();
    assert!((again.to_dense() - su.to_dense()).camax() < 1e-8);

    for u in sample_haar_unitary(8, 10_000, 77) {
        let s = project_su(&u).unwrap();
        let det = s.to_dense().lu().determinant();
        assert!((det - 1.0).norm() < 1e-8);
    }
}

#[test]
fn su_projection_of_angles_zeroes_the_sum() {
    let angles = vec![0.3, 2.0, 5.9, 4.4];
    let p = project_su_angles(&angles);
    let s: f64 = p.iter().sum();
    let r = s.rem_euclid(TAU);
    assert!(r < 1e-9 || TAU - r < 1e-9);
}

#[test]
fn haar_su_angles_are_uniform() {
    let samples = sample_gibbs_su_eigenangles(&Potential::zero_circle(), 64, 6, 31).unwrap();
    for s in &samples {
        let r = s.iter().sum::<f64>().rem_euclid(TAU);
        assert!(r < 1e-6 || TAU - r < 1e-6);
    }
    let d = pooled(&samples, Carrier::Circle).kolmogorov_distance(|t| t / TAU);
    assert!(d < 0.05, "{d}");
}

#[test]
fn su_gibbs_angles_match_equilibrium() {
    let q = Potential::cosine(2.0);
    let samples = sample_gibbs_su_eigenangles(&q, 64, 8, 5).unwrap();
    for s in &samples {
        let r = s.iter().sum::<f64>().rem_euclid(TAU);
        assert!(r < 1e-6 || TAU - r < 1e-6);
    }
    let mu = solve_equilibrium(&q, 0.0, 720).unwrap();
    let d = pooled(&samples, Carrier::Circle).kolmogorov_distance(|t| mu.cdf(t));
    assert!(d < 0.07, "{d}");
}

#[test]
fn microstate_examples() {
    let tau = MomentTable::tabulate(Alphabet::SelfAdjoint, 2, 4, |w| Ok(Complex64::new(semicircular_moment(w), 0.0)))
        .unwrap();
    let zero = MatrixSample::new(MatrixKind::SelfAdjoint, Entries::Dense(CMatrix::zeros(4, 4))).unwrap();
    assert!(!microstate_membership(&[zero.clone(), zero], &tau, 2, 0.1, 3.0).unwrap());

    let tuple = sample_gue(6, 2, 9);
    let own = MomentTable::tabulate(Alphabet::SelfAdjoint, 2, 3, |w| word_trace(&tuple, w)).unwrap();
    assert!(microstate_membership(&tuple, &own, 3, 1e-9, 100.0).unwrap());
    assert!(microstate_membership(&tuple, &own, 4, 1e-9, 100.0).is_err());
}

#[test]
fn tuples_are_deterministic() {
    let spec = EnsembleSpec::gue(2, 16, 42);
    let a = sample_tuples(&spec, 3).unwrap();
    let b = sample_tuples(&spec, 3).unwrap();
    assert_eq!(a, b);
    let spec = EnsembleSpec::haar(MatrixKind::SpecialUnitary, 2, 8, 42);
    let a = sample_tuples(&spec, 2).unwrap();
    assert_eq!(a, sample_tuples(&spec, 2).unwrap());
    for t in &a {
        for s in t {
            assert!(MatrixSample::new(MatrixKind::SpecialUnitary, s.entries().clone()).is_ok());
        }
    }
    let mut quartic = EnsembleSpec::gue(2, 8, 1);
    quartic.potentials[1] = Potential::quartic();
    let x = sample_tuples(&quartic, 2).unwrap();
    assert_eq!(x, sample_tuples(&quartic, 2).unwrap());
    assert!(!x[0][1].is_diagonal());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn retraction_bounds_the_norm(seed in 0u64..1000, r in 0.1f64..3.0) {
        let a = &sample_gue(8, 1, seed)[0];
        let ra = retract(a, r).unwrap();
        prop_assert!(ra.operator_norm().unwrap() <= r + 1e-10);
    }
}

#[test]
fn gue_mean_density_moments() {
    use crate::quadrature::integrate;
    for n in [1usize, 3, 8, 20] {
        let m = |k: i32| integrate(|x| x.powi(k) * gue_mean_density(n, x), -8.0, 8.0, 400, 10);
        assert!((m(0) - 1.0).abs() < 1e-12, "n={n}");
        assert!((m(2) - 1.0).abs() < 1e-12);
        let nn = (n * n) as f64;
        assert!((m(4) - (2.0 + 1.0 / nn)).abs() < 1e-11);
    }
    let law = gue_spectral_law(16, 0.5, 2.0, 7.0, 1400).unwrap();
    assert!((law.real_moment(1).unwrap() - 0.5).abs() < 1e-9);
    let var = law.real_moment(2).unwrap() - 0.25;
    assert!((var - 4.0).abs() < 1e-4, "{var}");
    assert!(matches!(gue_spectral_law(4, 0.0, 1.0, 1.5, 100), Err(Error::EnlargeWindow { .. })));
}
