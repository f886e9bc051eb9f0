#![allow(dead_code)]

use gauge_thermo::dynamics::{evolve, EvolutionResult, Protocol};
use gauge_thermo::entropy::LevelDistribution;
use gauge_thermo::gauge::{sample_gauge_element, twirl, DegeneracyStructure};
use gauge_thermo::linalg::DensityOperator;
use gauge_thermo::models::random_protocol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive random level probabilities on `ds`.
pub fn random_levels<R: Rng>(ds: &DegeneracyStructure, rng: &mut R) -> LevelDistribution {
    let w: Vec<f64> = (0..ds.num_levels())
        .map(|_| rng.random_range(0.05..1.0))
        .collect();
    let z: f64 = w.iter().sum();
    LevelDistribution::on_structure(ds, w.iter().map(|x| x / z).collect()).unwrap()
}

/// Fuzz protocol for case `i`: dimension cycles through 2..=8 and every
/// third case forces degenerate endpoints.
pub fn fuzz_protocol(seed: u64, case: usize, nodes: usize) -> Protocol {
    let dim = 2 + case % 7;
    random_protocol(dim, nodes, case.is_multiple_of(3), &mut rng(seed)).unwrap()
}

pub fn thermal_run(p: &Protocol) -> EvolutionResult {
    evolve(p, &p.thermal_start().unwrap()).unwrap()
}

/// Conjugates every state by an independent random gauge element of its node
/// and re-twirls.
pub fn gauge_transformed<R: Rng>(ev: &EvolutionResult, rng: &mut R) -> EvolutionResult {
    let states: Vec<DensityOperator> = ev
        .states
        .iter()
        .zip(&ev.structures)
        .map(|(s, ds)| s.conjugate_by(&sample_gauge_element(ds, rng).embedded))
        .collect();
    let twirled_states = states
        .iter()
        .zip(&ev.structures)
        .map(|(s, ds)| twirl(s, ds).unwrap())
        .collect();
    EvolutionResult {
        states,
        twirled_states,
        propagators: ev.propagators.clone(),
        structures: ev.structures.clone(),
    }
}
