use freetci::free_moments::{free_product_moment, limit_marginal, Alphabet, MomentTable};
use freetci::potentials::Potential;
use freetci::random_matrices::{microstate_membership, retract, EnsembleSpec, TupleSampler};

/// GUE pairs at N = 256, retracted to the ball of radius 3, land in the
/// degree-4 microstate neighbourhood of a free semicircular pair almost
/// every time.
#[test]
fn gue_pairs_are_semicircular_microstates() {
    let q = Potential::quadratic();
    let marginals = vec![limit_marginal(&q, 4).unwrap(); 2];
    let tau = MomentTable::tabulate(Alphabet::SelfAdjoint, 2, 4, |w| free_product_moment(&marginals, w)).unwrap();
    let spec = EnsembleSpec::gue(2, 256, 17);
    let sampler = TupleSampler::new(&spec, 100).unwrap();
    let hits = sampler
        .map(|_, tuple| {
            let retracted = tuple.iter().map(|a| retract(a, 3.0)).collect::<Result<Vec<_>, _>>()?;
            microstate_membership(&retracted, &tau, 4, 0.1, 3.0)
        })
        .unwrap();
    let frequency = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
    assert!(frequency >= 0.9, "membership frequency {frequency}");
}
