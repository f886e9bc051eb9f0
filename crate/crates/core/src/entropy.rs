//! Gauge-invariant entropy and its decompositions.
//!
//! `S_GT` is the von Neumann entropy of the twirled state; in terms of level
//! probabilities it reads `-sum p ln p + sum p ln n`. It splits as
//! `S_GT = S_d + S_Gamma = S_vN + C_rel + S_Gamma`, with `S_d` the diagonal
//! entropy in the energy eigenbasis, `C_rel = S_d - S_vN` the relative entropy
//! of coherence and `S_Gamma = S_GT - S_d` the asymmetry inside degenerate
//! levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::DegeneracyStructure;
use crate::linalg::{
    entropy_term, shannon_entropy, von_neumann_entropy, DensityOperator, HermitianOperator,
    LOG_FLOOR,
};

/// Probabilities of the energy levels of a [`DegeneracyStructure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDistribution {
    pub probs: Vec<f64>,
    pub mults: Vec<usize>,
    pub energies: Vec<f64>,
}

const NORMALIZATION_TOL: f64 = 1e-10;

impl LevelDistribution {
    pub fn new(probs: Vec<f64>, mults: Vec<usize>, energies: Vec<f64>) -> Result<Self> {
        if probs.len() != mults.len() || probs.len() != energies.len() {
            return Err(Error::DimensionMismatch {
                expected: mults.len(),
                got: probs.len(),
            });
        }
        if mults.contains(&0) {
            return Err(Error::Domain(
                "level multiplicities must be positive".into(),
            ));
        }
        if let Some(&p) = probs.iter().find(|&&p| p < -1e-12 || p.is_nan()) {
            return Err(Error::Domain(format!("negative level probability {p}")));
        }
        let probs: Vec<f64> = probs.into_iter().map(|p| p.max(0.0)).collect();
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization { sum });
        }
        Ok(Self {
            probs,
            mults,
            energies,
        })
    }

    /// Level probabilities of an arbitrary distribution aligned with `ds`.
    pub fn on_structure(ds: &DegeneracyStructure, probs: Vec<f64>) -> Result<Self> {
        Self::new(probs, ds.multiplicities(), ds.energies())
    }

    /// `p_k = n_k exp(-beta eps_k) / Z`.
    pub fn thermal(ds: &DegeneracyStructure, beta: f64) -> Result<Self> {
        let energies = ds.energies();
        let mults = ds.multiplicities();
        let e0 = energies[0];
        let w: Vec<f64> = energies
            .iter()
            .zip(&mults)
            .map(|(&e, &n)| n as f64 * (-beta * (e - e0)).exp())
            .collect();
        let z: f64 = w.iter().sum();
        Self::new(w.iter().map(|x| x / z).collect(), mults, energies)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `ln Z = ln sum_k n_k exp(-beta eps_k)`, evaluated with a shift.
    pub fn log_partition(&self, beta: f64) -> f64 {
        let e0 = self.energies.iter().copied().fold(f64::INFINITY, f64::min);
        let z: f64 = self
            .energies
            .iter()
            .zip(&self.mults)
            .map(|(&e, &n)| n as f64 * (-beta * (e - e0)).exp())
            .sum();
        z.ln() - beta * e0
    }

    /// Whether the distribution equals the thermal one at `beta` within `tol`.
    pub fn is_thermal(&self, beta: f64, tol: f64) -> bool {
        let ln_z = self.log_partition(beta);
        self.probs
            .iter()
            .zip(&self.energies)
            .zip(&self.mults)
            .all(|((&p, &e), &n)| (p - n as f64 * (-beta * e - ln_z).exp()).abs() <= tol)
    }

    /// Mean energy `sum_k p_k eps_k`.
    pub fn mean_energy(&self) -> f64 {
        self.probs
            .iter()
            .zip(&self.energies)
            .map(|(p, e)| p * e)
            .sum()
    }
}

/// `p_k = Tr(Pi_k rho)`, clamped at zero and renormalized.
pub fn level_distribution(
    rho: &DensityOperator,
    ds: &DegeneracyStructure,
) -> Result<LevelDistribution> {
    let pops = ds.populations(rho)?;
    let sum: f64 = pops.iter().sum();
    if (sum - 1.0).abs() >= 1e-8 {
        return Err(Error::Normalization { sum });
    }
    let clamped: Vec<f64> = pops.iter().map(|&p| p.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    LevelDistribution::on_structure(ds, clamped.into_iter().map(|p| p / total).collect())
}

/// Gauge-invariant entropy `-sum p ln p + sum p ln n`.
pub fn s_gauge(ld: &LevelDistribution) -> f64 {
    ld.probs
        .iter()
        .zip(&ld.mults)
        .map(|(&p, &n)| {
            if p <= LOG_FLOOR {
                0.0
            } else {
                entropy_term(p) + p * (n as f64).ln()
            }
        })
        .sum()
}

/// Stochastic entropy `s(k) = -ln(p_k / n_k)` of a level outcome.
pub fn stochastic_entropy(k: usize, ld: &LevelDistribution) -> Result<f64> {
    let p = *ld
        .probs
        .get(k)
        .ok_or_else(|| Error::Domain(format!("level index {k} out of range")))?;
    if p <= 0.0 {
        return Err(Error::Domain(format!(
            "level {k} has zero probability; its trajectory never occurs"
        )));
    }
    Ok(-(p / ld.mults[k] as f64).ln())
}

/// Entropy budget of a state relative to an energy structure (nats).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub s_gt: f64,
    pub s_vn: f64,
    pub s_d: f64,
    pub c_rel: f64,
    pub s_gamma: f64,
}

pub fn entropy_report(rho: &DensityOperator, ds: &DegeneracyStructure) -> Result<EntropyReport> {
    let s_vn = von_neumann_entropy(rho)?;
    let s_d = shannon_entropy(ds.eigenbasis_diagonal(rho)?);
    let s_gt = s_gauge(&level_distribution(rho, ds)?);
    Ok(EntropyReport {
        s_gt,
        s_vn,
        s_d,
        c_rel: s_d - s_vn,
        s_gamma: s_gt - s_d,
    })
}

/// Asymmetry `S_Gamma[f] = -sum_v v ln|v|` over the entries of the `f` matrix:
/// the negated eigenbasis diagonal of `rho` followed by the level-averaged
/// populations `p_k / n_k`, each repeated `n_k` times.
pub fn holevo_asymmetry_f(rho: &DensityOperator, ds: &DegeneracyStructure) -> Result<f64> {
    let diag = ds.eigenbasis_diagonal(rho)?;
    let ld = level_distribution(rho, ds)?;
    let averaged = ld
        .probs
        .iter()
        .zip(&ld.mults)
        .flat_map(|(&p, &n)| std::iter::repeat_n(p / n as f64, n));
    let entries = diag.iter().map(|&x| -x.max(0.0)).chain(averaged);
    Ok(entries
        .map(|v| {
            let a = v.abs();
            if a <= LOG_FLOOR {
                0.0
            } else {
                -v * a.ln()
            }
        })
        .sum())
}

/// Invariant non-equilibrium free energy `Tr(rho H) - S_GT / beta`.
pub fn noneq_free_energy(
    rho: &DensityOperator,
    h: &HermitianOperator,
    ds: &DegeneracyStructure,
    beta: f64,
) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    let s = s_gauge(&level_distribution(rho, ds)?);
    Ok(rho.expectation(h) - s / beta)
}
