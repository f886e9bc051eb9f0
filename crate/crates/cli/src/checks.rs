//! Checks shared by `run` and `verify`.

use gauge_thermo::dynamics::{work_and_heat, EvolutionResult, Protocol};
use gauge_thermo::entropy::{entropy_report, LevelDistribution};
use gauge_thermo::fluctuation::{verify_ft, TwoPointEnsemble};
use gauge_thermo::gauge::{sample_gauge_element, twirl, DegeneracyStructure};
use gauge_thermo::linalg::max_abs_diff;
use gauge_thermo::Result;
use rand::Rng;
use serde::Serialize;

pub const GAUGE_GATE: f64 = 1e-9;
pub const IFT_GATE: f64 = 1e-9;
pub const CROOKS_GATE: f64 = 1e-10;
pub const THIRD_LAW_GATE: f64 = 1e-4;

/// Strictly positive random level probabilities on `ds`.
pub fn random_levels<R: Rng + ?Sized>(
    ds: &DegeneracyStructure,
    rng: &mut R,
) -> Result<LevelDistribution> {
    let w: Vec<f64> = (0..ds.num_levels())
        .map(|_| rng.random_range(0.05..1.0))
        .collect();
    let z: f64 = w.iter().sum();
    LevelDistribution::on_structure(ds, w.iter().map(|x| x / z).collect())
}

/// Largest change of each invariant quantity under random gauge
/// transformations.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct GaugeDeviation {
    /// `twirl(V rho V^dagger)` against `twirl(rho)`, and `V rho^E V^dagger`
    /// against `rho^E`.
    pub twirl: f64,
    pub s_gt: f64,
    pub w_inv_q_c: f64,
    pub ft: f64,
}

impl GaugeDeviation {
    pub fn max(&self) -> f64 {
        self.twirl.max(self.s_gt).max(self.w_inv_q_c).max(self.ft)
    }
}

/// Conjugates every node's state by an independent gauge element, and the
/// propagator's ends by two more, then compares every invariant.
pub fn gauge_deviation<R: Rng + ?Sized>(
    p: &Protocol,
    ev: &EvolutionResult,
    forward: LevelDistribution,
    reverse: LevelDistribution,
    rng: &mut R,
) -> Result<GaugeDeviation> {
    let mut dev = GaugeDeviation::default();
    let mut moved = ev.clone();
    for (j, ds) in ev.structures.iter().enumerate() {
        let v = sample_gauge_element(ds, rng).embedded;
        let state = ev.states[j].conjugate_by(&v);
        let twirled = twirl(&state, ds)?;
        dev.twirl = dev
            .twirl
            .max(max_abs_diff(
                twirled.matrix(),
                ev.twirled_states[j].matrix(),
            ))
            .max(max_abs_diff(
                ev.twirled_states[j].conjugate_by(&v).matrix(),
                ev.twirled_states[j].matrix(),
            ));
        let (a, b) = (
            entropy_report(&ev.states[j], ds)?,
            entropy_report(&state, ds)?,
        );
        dev.s_gt = dev.s_gt.max((a.s_gt - b.s_gt).abs());
        moved.states[j] = state;
        moved.twirled_states[j] = twirled;
    }

    let (a, b) = (work_and_heat(p, ev)?, work_and_heat(p, &moved)?);
    for j in 0..p.num_nodes() {
        dev.w_inv_q_c = dev
            .w_inv_q_c
            .max((a.w_inv[j] - b.w_inv[j]).abs())
            .max((a.q_c[j] - b.q_c[j]).abs());
    }

    let (d0, d1) = (&ev.structures[0], ev.structures.last().expect("non-empty"));
    let u = ev.final_propagator();
    let v0 = sample_gauge_element(d0, rng).embedded;
    let v1 = sample_gauge_element(d1, rng).embedded;
    let e = TwoPointEnsemble::from_propagator(u, d0, d1, forward.clone(), reverse.clone(), p.beta)?;
    let f = TwoPointEnsemble::from_propagator(
        &v1.compose(u).compose(&v0),
        d0,
        d1,
        forward,
        reverse,
        p.beta,
    )?;
    let (fe, ff) = (verify_ft(&e)?, verify_ft(&f)?);
    let sigma = e
        .sigma
        .iter()
        .zip(f.sigma.iter())
        .filter(|(x, _)| x.is_finite())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    dev.ft = (&e.transition - &f.transition)
        .amax()
        .max((&e.joint_forward - &f.joint_forward).amax())
        .max((&e.joint_reverse - &f.joint_reverse).amax())
        .max(sigma)
        .max((fe.ift_value - ff.ift_value).abs())
        .max((fe.mean_sigma - ff.mean_sigma).abs())
        .max((fe.mean_sigma_via_entropy - ff.mean_sigma_via_entropy).abs());
    Ok(dev)
}

/// Log-spaced inverse temperatures from `0.1 / gap` to `1e6 / gap`, four per
/// decade.
pub fn third_law_betas(gap: f64) -> Vec<f64> {
    (-4..=24)
        .map(|k| 10f64.powf(k as f64 / 4.0) / gap)
        .collect()
}
