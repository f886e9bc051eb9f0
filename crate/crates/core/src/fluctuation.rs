//! Two-point energy measurements between gauge orbits.
//!
//! An outcome `(k, l)` is a level `k` of the initial Hamiltonian followed by
//! a level `l` of the final one. Only levels are resolved, so the state after
//! the first measurement is maximally mixed inside level `k`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EvolutionResult, Protocol};
use crate::entropy::{level_distribution, s_gauge, LevelDistribution};
use crate::error::{Error, Result};
use crate::gauge::DegeneracyStructure;
use crate::linalg::{real_trace_of_product, relative_entropy, CMatrix, UnitaryOperator};

/// Everything needed to evaluate the fluctuation theorems by enumeration.
#[derive(Debug, Clone)]
pub struct TwoPointEnsemble {
    /// Level probabilities at `t = 0`.
    pub forward_init: LevelDistribution,
    /// Reference level probabilities at `t = tau` for the backward process.
    pub reverse_ref: LevelDistribution,
    /// `p(l|k)`, rows `k`, columns `l`.
    pub transition: DMatrix<f64>,
    /// `p(k|l)`, rows `l`, columns `k`.
    pub reverse_transition: DMatrix<f64>,
    /// `p_F(k, l) = p_F^k p(l|k)`.
    pub joint_forward: DMatrix<f64>,
    /// `p_R(l, k) = p_R^l p(k|l)`, rows `l`.
    pub joint_reverse: DMatrix<f64>,
    /// `sigma(k, l) = ln(p_F^k / p_R^l) + ln(n_l / n_k)`. Infinite where a
    /// probability vanishes; such entries carry no forward weight.
    pub sigma: DMatrix<f64>,
    pub initial: DegeneracyStructure,
    pub last: DegeneracyStructure,
    pub propagator: UnitaryOperator,
    pub beta: f64,
}

fn check_aligned(ld: &LevelDistribution, ds: &DegeneracyStructure, which: &str) -> Result<()> {
    if ld.mults != ds.multiplicities() {
        return Err(Error::Domain(format!(
            "{which} distribution has multiplicities {:?}, structure has {:?}",
            ld.mults,
            ds.multiplicities()
        )));
    }
    Ok(())
}

impl TwoPointEnsemble {
    pub fn from_propagator(
        u: &UnitaryOperator,
        initial: &DegeneracyStructure,
        last: &DegeneracyStructure,
        forward_init: LevelDistribution,
        reverse_ref: LevelDistribution,
        beta: f64,
    ) -> Result<Self> {
        check_aligned(&forward_init, initial, "forward")?;
        check_aligned(&reverse_ref, last, "reverse")?;
        if u.dim() != initial.dim() || u.dim() != last.dim() {
            return Err(Error::DimensionMismatch {
                expected: initial.dim(),
                got: u.dim(),
            });
        }
        let um = u.matrix();
        let ud = um.adjoint();
        let (nk, nl) = (initial.num_levels(), last.num_levels());

        // Forward: evolve Pi_k / n_k and measure Pi_l.
        let mut transition = DMatrix::zeros(nk, nl);
        let initial_projectors: Vec<CMatrix> = (0..nk).map(|k| initial.projector(k)).collect();
        let last_projectors: Vec<CMatrix> = (0..nl).map(|l| last.projector(l)).collect();
        for (k, pk) in initial_projectors.iter().enumerate() {
            let n_k = initial.levels()[k].multiplicity as f64;
            let evolved: CMatrix = (um * pk * &ud).unscale(n_k);
            for (l, pl) in last_projectors.iter().enumerate() {
                transition[(k, l)] = real_trace_of_product(pl, &evolved).clamp(0.0, 1.0);
            }
        }
        // Backward: evolve Pi_l / n_l with U^dagger and measure the time-0 Pi_k.
        let mut reverse_transition = DMatrix::zeros(nl, nk);
        for (l, pl) in last_projectors.iter().enumerate() {
            let n_l = last.levels()[l].multiplicity as f64;
            let evolved: CMatrix = (&ud * pl * um).unscale(n_l);
            for (k, pk) in initial_projectors.iter().enumerate() {
                reverse_transition[(l, k)] = real_trace_of_product(pk, &evolved).clamp(0.0, 1.0);
            }
        }

        let mut joint_forward = DMatrix::zeros(nk, nl);
        let mut joint_reverse = DMatrix::zeros(nl, nk);
        let mut sigma = DMatrix::zeros(nk, nl);
        for k in 0..nk {
            let pk = forward_init.probs[k];
            let n_k = forward_init.mults[k] as f64;
            for l in 0..nl {
                let pl = reverse_ref.probs[l];
                let n_l = reverse_ref.mults[l] as f64;
                joint_forward[(k, l)] = pk * transition[(k, l)];
                joint_reverse[(l, k)] = pl * reverse_transition[(l, k)];
                sigma[(k, l)] = (pk.ln() - pl.ln()) + (n_l.ln() - n_k.ln());
                if joint_forward[(k, l)] > 0.0 && pl == 0.0 {
                    return Err(Error::AbsoluteContinuity {
                        k,
                        l,
                        p_forward: joint_forward[(k, l)],
                    });
                }
            }
        }
        Ok(Self {
            forward_init,
            reverse_ref,
            transition,
            reverse_transition,
            joint_forward,
            joint_reverse,
            sigma,
            initial: initial.clone(),
            last: last.clone(),
            propagator: u.clone(),
            beta,
        })
    }

    pub fn num_initial(&self) -> usize {
        self.transition.nrows()
    }

    pub fn num_final(&self) -> usize {
        self.transition.ncols()
    }

    /// `p_F(k, l) exp(-sigma(k, l))`, evaluated in the log domain; zero where
    /// the forward weight vanishes.
    pub fn reweighted(&self, k: usize, l: usize) -> f64 {
        let pf = self.joint_forward[(k, l)];
        if pf > 0.0 {
            (pf.ln() - self.sigma[(k, l)]).exp()
        } else {
            0.0
        }
    }
}

/// Ensemble for protocol `p` with trajectory `ev`.
pub fn build_ensemble(
    p: &Protocol,
    forward_init: LevelDistribution,
    reverse_ref: LevelDistribution,
    ev: &EvolutionResult,
) -> Result<TwoPointEnsemble> {
    let last = ev
        .structures
        .last()
        .ok_or_else(|| Error::Protocol("empty trajectory".into()))?;
    TwoPointEnsemble::from_propagator(
        ev.final_propagator(),
        &ev.structures[0],
        last,
        forward_init,
        reverse_ref,
        p.beta,
    )
}

/// Thermal forward and reverse distributions at the protocol temperature.
pub fn thermal_ensemble(p: &Protocol, ev: &EvolutionResult) -> Result<TwoPointEnsemble> {
    let first = &ev.structures[0];
    let last = ev.structures.last().expect("non-empty trajectory");
    build_ensemble(
        p,
        LevelDistribution::thermal(first, p.beta)?,
        LevelDistribution::thermal(last, p.beta)?,
        ev,
    )
}

/// Exact-enumeration fluctuation-theorem report. Entropies in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FtReport {
    /// `<exp(-sigma)>`.
    pub ift_value: f64,
    /// `sum p_F sigma`.
    pub mean_sigma: f64,
    /// `beta (<w> - dF_eq)`; only when both endpoint distributions are thermal.
    pub mean_sigma_via_work: Option<f64>,
    /// `dS_GT + S(rho^E_tau || sigma_ref)`.
    pub mean_sigma_via_entropy: f64,
    /// `S_GT(reference) - S_GT(initial)`; equals `mean_sigma` only when the
    /// evolved final distribution coincides with the reference.
    pub entropy_difference: f64,
    /// Two-point mean energy change `sum p_F (eps_l - eps_k)`.
    pub mean_work: f64,
    /// `max |p_F exp(-sigma) - p_R|` over all outcomes.
    pub crooks_max_violation: f64,
}

const THERMAL_TOL: f64 = 1e-12;

pub fn verify_ft(ens: &TwoPointEnsemble) -> Result<FtReport> {
    let (nk, nl) = (ens.num_initial(), ens.num_final());
    let mut ift = 0.0;
    let mut mean_sigma = 0.0;
    let mut mean_work = 0.0;
    let mut crooks: f64 = 0.0;
    for k in 0..nk {
        for l in 0..nl {
            let pf = ens.joint_forward[(k, l)];
            let rw = ens.reweighted(k, l);
            crooks = crooks.max((rw - ens.joint_reverse[(l, k)]).abs());
            if pf > 0.0 {
                ift += rw;
                mean_sigma += pf * ens.sigma[(k, l)];
                mean_work += pf * (ens.reverse_ref.energies[l] - ens.forward_init.energies[k]);
            }
        }
    }

    let both_thermal = ens.forward_init.is_thermal(ens.beta, THERMAL_TOL)
        && ens.reverse_ref.is_thermal(ens.beta, THERMAL_TOL);
    let mean_sigma_via_work = both_thermal.then(|| {
        let delta_f = -(ens.reverse_ref.log_partition(ens.beta)
            - ens.forward_init.log_partition(ens.beta))
            / ens.beta;
        ens.beta * (mean_work - delta_f)
    });

    // Evolve the post-measurement initial state and compare against the
    // reference state through operator-level entropies.
    let rho_f = ens.initial.invariant_state(&ens.forward_init.probs)?;
    let rho_tau = rho_f.conjugate_by(&ens.propagator);
    let final_levels = level_distribution(&rho_tau, &ens.last)?;
    let rho_e_tau = ens.last.invariant_state(&final_levels.probs)?;
    let reference = ens.last.invariant_state(&ens.reverse_ref.probs)?;
    let delta_s_gt = s_gauge(&final_levels) - s_gauge(&ens.forward_init);
    let mean_sigma_via_entropy = delta_s_gt + relative_entropy(&rho_e_tau, &reference)?;

    Ok(FtReport {
        ift_value: ift,
        mean_sigma,
        mean_sigma_via_work,
        mean_sigma_via_entropy,
        entropy_difference: s_gauge(&ens.reverse_ref) - s_gauge(&ens.forward_init),
        mean_work,
        crooks_max_violation: crooks,
    })
}

/// Monte Carlo estimate of the fluctuation-theorem averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub count: usize,
    pub ift_value: f64,
    pub ift_stderr: f64,
    pub mean_sigma: f64,
    pub sigma_stderr: f64,
    /// Outcome counts, `counts[k][l]`.
    pub counts: Vec<Vec<u64>>,
}

fn mean_and_stderr(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Draws `count` outcomes from `p_F` by inverse CDF over the row-major
/// outcome table.
pub fn sample_trajectories<R: Rng + ?Sized>(
    ens: &TwoPointEnsemble,
    count: usize,
    rng: &mut R,
) -> Result<SampleReport> {
    if count == 0 {
        return Err(Error::Domain("sample count must be positive".into()));
    }
    let (nk, nl) = (ens.num_initial(), ens.num_final());
    let mut cdf = Vec::with_capacity(nk * nl);
    let mut acc = 0.0;
    for k in 0..nk {
        for l in 0..nl {
            acc += ens.joint_forward[(k, l)];
            cdf.push(acc);
        }
    }
    let total = acc;
    let mut counts = vec![vec![0u64; nl]; nk];
    let (mut s1, mut s2, mut e1, mut e2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..count {
        let u: f64 = rng.random::<f64>() * total;
        let mut idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        // Never land on a zero-weight outcome at the upper edge.
        while ens.joint_forward[(idx / nl, idx % nl)] == 0.0 && idx > 0 {
            idx -= 1;
        }
        let (k, l) = (idx / nl, idx % nl);
        counts[k][l] += 1;
        let s = ens.sigma[(k, l)];
        let e = (-s).exp();
        s1 += s;
        s2 += s * s;
        e1 += e;
        e2 += e * e;
    }
    let (mean_sigma, sigma_stderr) = mean_and_stderr(s1, s2, count);
    let (ift_value, ift_stderr) = mean_and_stderr(e1, e2, count);
    Ok(SampleReport {
        count,
        ift_value,
        ift_stderr,
        mean_sigma,
        sigma_stderr,
        counts,
    })
}
