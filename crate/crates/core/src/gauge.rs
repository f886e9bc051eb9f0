//! Degenerate-level structure of a Hamiltonian and the gauge group it induces.
//!
//! For an agent restricted to energy measurements the gauge group at time `t`
//! is `U(n_1) x ... x U(n_k)`, one unitary factor per degenerate level. The
//! twirl (group average) sends a state to the block-diagonal operator that is
//! maximally mixed inside every level.

use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    eigh, from_spectrum, haar_unitary, max_abs, CMatrix, DensityOperator, EigenSystem,
    HermitianOperator, UnitaryOperator,
};

/// Clustering tolerances for grouping numerically degenerate eigenvalues.
///
/// Two neighbouring eigenvalues belong to the same level when their gap is at
/// most `abs_scale * max(1, |H|_max * dim) + rel * spectral_radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub abs_scale: f64,
    pub rel: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            abs_scale: 1e-9,
            rel: 1e-9,
        }
    }
}

impl ClusterConfig {
    /// Absolute tolerance for a given Hamiltonian.
    pub fn abs_tolerance(&self, h: &HermitianOperator) -> f64 {
        self.abs_scale * (max_abs(h.matrix()) * h.dim() as f64).max(1.0)
    }
}

/// One energy level: its energy and multiplicity.
#[derive(Debug, Clone)]
pub struct Level {
    pub energy: f64,
    pub multiplicity: usize,
    /// Columns of the eigenbasis spanning this level.
    pub columns: Range<usize>,
}

/// Clustered spectrum of an instantaneous Hamiltonian.
#[derive(Debug, Clone)]
pub struct DegeneracyStructure {
    levels: Vec<Level>,
    eigensystem: EigenSystem,
}

/// Greedy gap clustering of a sorted spectrum.
pub fn cluster_spectrum(es: &EigenSystem, tol_abs: f64, tol_rel: f64) -> DegeneracyStructure {
    let threshold = tol_abs + tol_rel * es.spectral_radius();
    let vals = &es.eigenvalues;
    let mut ranges: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    for i in 1..vals.len() {
        if vals[i] - vals[i - 1] > threshold {
            ranges.push(start..i);
            start = i;
        }
    }
    ranges.push(start..vals.len());

    let levels = ranges
        .into_iter()
        .map(|cols| {
            let n = cols.len();
            let energy = vals[cols.clone()].iter().sum::<f64>() / n as f64;
            Level {
                energy,
                multiplicity: n,
                columns: cols,
            }
        })
        .collect();
    DegeneracyStructure {
        levels,
        eigensystem: es.clone(),
    }
}

impl DegeneracyStructure {
    pub fn from_hamiltonian(h: &HermitianOperator, cfg: &ClusterConfig) -> Result<Self> {
        let es = eigh(h)?;
        Ok(cluster_spectrum(&es, cfg.abs_tolerance(h), cfg.rel))
    }

    pub fn dim(&self) -> usize {
        self.eigensystem.dim()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.multiplicity).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eigensystem
    }

    pub fn basis(&self) -> &CMatrix {
        self.eigensystem.eigenvectors.matrix()
    }

    /// Spectral projector of level `k`, built on demand.
    pub fn projector(&self, k: usize) -> CMatrix {
        let l = &self.levels[k];
        let block = self.basis().columns(l.columns.start, l.multiplicity);
        block * block.adjoint()
    }

    pub fn is_degenerate(&self) -> bool {
        self.levels.iter().any(|l| l.multiplicity > 1)
    }

    /// `sum_k eps_k Pi_k`.
    pub fn energy_operator(&self) -> HermitianOperator {
        let vals = self.per_column(|l| Complex64::new(l.energy, 0.0));
        HermitianOperator::hermitized(from_spectrum(self.basis(), &vals))
    }

    /// Repeats a per-level value over the eigenbasis columns of that level.
    pub(crate) fn per_column<T: Clone>(&self, f: impl Fn(&Level) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.dim());
        for level in &self.levels {
            let v = f(level);
            out.extend(std::iter::repeat_n(v, level.multiplicity));
        }
        out
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: dim,
            });
        }
        Ok(())
    }

    /// Diagonal of `rho` in the eigenbasis (real parts).
    pub fn eigenbasis_diagonal(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        self.check_dim(rho.dim())?;
        let e = self.basis();
        let n = self.dim();
        let rho_e = rho.matrix() * e;
        Ok((0..n)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..n {
                    acc += e[(r, i)].conj() * rho_e[(r, i)];
                }
                acc.re
            })
            .collect())
    }

    /// Unnormalized level populations `Tr(Pi_k rho)`.
    pub fn populations(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        let diag = self.eigenbasis_diagonal(rho)?;
        Ok(self
            .levels
            .iter()
            .map(|l| diag[l.columns.clone()].iter().sum())
            .collect())
    }

    /// The gauge-invariant state `sum_k (p_k / n_k) Pi_k` for given level
    /// probabilities.
    pub fn invariant_state(&self, probs: &[f64]) -> Result<DensityOperator> {
        if probs.len() != self.num_levels() {
            return Err(Error::DimensionMismatch {
                expected: self.num_levels(),
                got: probs.len(),
            });
        }
        let vals: Vec<Complex64> = self
            .levels
            .iter()
            .zip(probs)
            .flat_map(|(l, &p)| {
                std::iter::repeat_n(
                    Complex64::new(p / l.multiplicity as f64, 0.0),
                    l.multiplicity,
                )
            })
            .collect();
        Ok(DensityOperator::hermitized(from_spectrum(
            self.basis(),
            &vals,
        )))
    }

    /// Index of the level containing `energy`, if any.
    pub fn level_of(&self, energy: f64, tol: f64) -> Option<usize> {
        self.levels
            .iter()
            .position(|l| (l.energy - energy).abs() <= tol)
    }
}

/// Twirl `rho -> sum_k Tr(Pi_k rho Pi_k) / n_k * Pi_k`.
pub fn twirl(rho: &DensityOperator, ds: &DegeneracyStructure) -> Result<DensityOperator> {
    let pops = ds.populations(rho)?;
    ds.invariant_state(&pops)
}

/// An element of the gauge group: one unitary per level, and its embedding
/// in the full Hilbert space.
#[derive(Debug, Clone)]
pub struct GaugeElement {
    pub blocks: Vec<UnitaryOperator>,
    pub embedded: UnitaryOperator,
}

/// Independent Haar unitary per level, embedded through the eigenbasis.
pub fn sample_gauge_element<R: Rng + ?Sized>(
    ds: &DegeneracyStructure,
    rng: &mut R,
) -> GaugeElement {
    let blocks: Vec<UnitaryOperator> = ds
        .levels
        .iter()
        .map(|l| haar_unitary(l.multiplicity, rng))
        .collect();
    let embedded = embed_blocks(ds, &blocks);
    GaugeElement { blocks, embedded }
}

/// `E blockdiag(U_1, ..., U_k) E^dagger` with `E` the eigenbasis.
pub fn embed_blocks(ds: &DegeneracyStructure, blocks: &[UnitaryOperator]) -> UnitaryOperator {
    let n = ds.dim();
    let mut inner = CMatrix::zeros(n, n);
    for (level, block) in ds.levels.iter().zip(blocks) {
        let s = level.columns.start;
        inner
            .view_mut((s, s), (level.multiplicity, level.multiplicity))
            .copy_from(block.matrix());
    }
    let e = ds.basis();
    UnitaryOperator::new_unchecked(e * inner * e.adjoint())
}

/// Monte Carlo twirl `(1/M) sum_m V_m rho V_m^dagger` over Haar-random gauge
/// elements. Converges to [`twirl`] at rate `O(1/sqrt(M))`.
pub fn twirl_oracle<R: Rng + ?Sized>(
    rho: &DensityOperator,
    ds: &DegeneracyStructure,
    samples: usize,
    rng: &mut R,
) -> Result<DensityOperator> {
    ds.check_dim(rho.dim())?;
    if samples == 0 {
        return Err(Error::Domain(
            "twirl oracle needs at least one sample".into(),
        ));
    }
    let n = ds.dim();
    let mut acc = CMatrix::zeros(n, n);
    for _ in 0..samples {
        let v = sample_gauge_element(ds, rng).embedded;
        acc += v.matrix() * rho.matrix() * v.matrix().adjoint();
    }
    Ok(DensityOperator::hermitized(
        acc / Complex64::new(samples as f64, 0.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, random_density, random_hermitian, trace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn structure(diag: &[f64]) -> DegeneracyStructure {
        DegeneracyStructure::from_hamiltonian(
            &HermitianOperator::from_real_diagonal(diag),
            &ClusterConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn clusters_simple_spectra() {
        let ds = structure(&[0.0, 1.0, 2.0]);
        assert_eq!(ds.multiplicities(), vec![1, 1, 1]);
        let ds = structure(&[0.0, 0.0, 1.0]);
        assert_eq!(ds.multiplicities(), vec![2, 1]);
        assert_eq!(ds.energies(), vec![0.0, 1.0]);
    }

    #[test]
    fn clustering_merges_round_off_splits() {
        let ds = structure(&[1.0, 1.0 + 1e-13, 3.0]);
        assert_eq!(ds.multiplicities(), vec![2, 1]);
        assert!((ds.energies()[0] - (1.0 + 0.5e-13)).abs() < 1e-15);
    }

    #[test]
    fn projectors_are_complete_and_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 2..=7 {
            let h = random_hermitian(n, 1.0, &mut rng);
            let ds = DegeneracyStructure::from_hamiltonian(&h, &ClusterConfig::default()).unwrap();
            let mut sum = CMatrix::zeros(n, n);
            let projectors: Vec<CMatrix> = (0..ds.num_levels()).map(|k| ds.projector(k)).collect();
            for (i, (a, pa)) in ds.levels().iter().zip(&projectors).enumerate() {
                sum += pa;
                assert!((trace(pa).re - a.multiplicity as f64).abs() < 1e-9);
                for (j, pb) in projectors.iter().enumerate() {
                    let prod = pa * pb;
                    let expected = if i == j {
                        pa.clone()
                    } else {
                        CMatrix::zeros(n, n)
                    };
                    assert!(max_abs_diff(&prod, &expected) < 1e-9);
                }
            }
            assert!(max_abs_diff(&sum, &CMatrix::identity(n, n)) < 1e-9);
            assert_eq!(ds.multiplicities().iter().sum::<usize>(), n);
        }
    }

    #[test]
    fn twirl_nondegenerate_keeps_eigenbasis_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_hermitian(4, 1.0, &mut rng);
        let ds = DegeneracyStructure::from_hamiltonian(&h, &ClusterConfig::default()).unwrap();
        let rho = random_density(4, &mut rng);
        let tw = twirl(&rho, &ds).unwrap();
        let e = ds.basis();
        let in_basis = e.adjoint() * tw.matrix() * e;
        let diag = ds.eigenbasis_diagonal(&rho).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { diag[i] } else { 0.0 };
                assert!((in_basis[(i, j)] - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn twirl_fully_degenerate_is_maximally_mixed() {
        let ds = structure(&[2.0, 2.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(3, &mut rng);
        let tw = twirl(&rho, &ds).unwrap();
        assert!(max_abs_diff(tw.matrix(), DensityOperator::maximally_mixed(3).matrix()) < 1e-14);
    }

    #[test]
    fn twirl_of_pure_state_in_two_plus_one_structure() {
        // |psi> = sqrt(p) (cos a |0> + sin a |1>) + sqrt(1-p) |2>
        let ds = structure(&[0.0, 0.0, 1.0]);
        let p: f64 = 0.6;
        let a: f64 = 0.3;
        let psi = [
            Complex64::new(p.sqrt() * a.cos(), 0.0),
            Complex64::new(0.0, p.sqrt() * a.sin()),
            Complex64::new((1.0 - p).sqrt(), 0.0),
        ];
        let rho = DensityOperator::pure(&psi).unwrap();
        let tw = twirl(&rho, &ds).unwrap();
        let expected = DensityOperator::from_diagonal(&[p / 2.0, p / 2.0, 1.0 - p]).unwrap();
        assert!(max_abs_diff(tw.matrix(), expected.matrix()) < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mc = twirl_oracle(&rho, &ds, 4000, &mut rng).unwrap();
        assert!(max_abs_diff(mc.matrix(), expected.matrix()) < 3.0 / (4000f64).sqrt() + 1e-3);
    }

    #[test]
    fn twirl_is_idempotent_and_energy_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = structure(&[-1.0, 0.5, 0.5, 2.0, 2.0, 2.0]);
        let h = ds.energy_operator();
        for _ in 0..20 {
            let rho = random_density(6, &mut rng);
            let once = twirl(&rho, &ds).unwrap();
            let twice = twirl(&once, &ds).unwrap();
            assert!(max_abs_diff(once.matrix(), twice.matrix()) < 1e-10);
            assert!((once.expectation(&h) - rho.expectation(&h)).abs() < 1e-9);
            for k in 0..ds.num_levels() {
                let pk = ds.projector(k);
                let c = &pk * once.matrix() - once.matrix() * &pk;
                assert!(crate::linalg::max_abs(&c) < 1e-12);
            }
        }
    }

    #[test]
    fn gauge_elements_commute_with_energy_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_hermitian(3, 1.0, &mut rng);
        let ds = DegeneracyStructure::from_hamiltonian(&h, &ClusterConfig::default()).unwrap();
        let g = sample_gauge_element(&ds, &mut rng);
        // non-degenerate: diagonal phases in the eigenbasis
        let inner = ds.basis().adjoint() * g.embedded.matrix() * ds.basis();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(inner[(i, j)].norm() < 1e-12);
                }
            }
            assert!((inner[(i, i)].norm() - 1.0).abs() < 1e-12);
        }

        let ds = structure(&[0.0, 0.0, 1.0, 1.0, 1.0, 3.0]);
        let e = ds.energy_operator();
        for _ in 0..20 {
            let g = sample_gauge_element(&ds, &mut rng);
            let c = crate::linalg::commutator(g.embedded.matrix(), e.matrix());
            assert!(crate::linalg::max_abs(&c) < 1e-9);
            let rho = random_density(6, &mut rng);
            let a = twirl(&rho.conjugate_by(&g.embedded), &ds).unwrap();
            let b = twirl(&rho, &ds).unwrap();
            assert!(max_abs_diff(a.matrix(), b.matrix()) < 1e-9);
        }
    }

    #[test]
    fn oracle_single_sample_on_diagonal_state() {
        let ds = structure(&[0.0, 1.0, 2.0]);
        let rho = DensityOperator::from_diagonal(&[0.5, 0.3, 0.2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mc = twirl_oracle(&rho, &ds, 1, &mut rng).unwrap();
        assert!(max_abs_diff(mc.matrix(), rho.matrix()) < 1e-15);
    }

    #[test]
    fn oracle_preserves_trace() {
        let ds = structure(&[0.0, 0.0, 1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random_density(4, &mut rng);
        for m in [1, 2, 17] {
            let mc = twirl_oracle(&rho, &ds, m, &mut rng).unwrap();
            assert!((trace(mc.matrix()).re - 1.0).abs() < 1e-10);
        }
        assert!(twirl_oracle(&rho, &ds, 0, &mut rng).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let ds = structure(&[0.0, 1.0]);
        let rho = DensityOperator::maximally_mixed(3);
        assert!(matches!(
            twirl(&rho, &ds),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
