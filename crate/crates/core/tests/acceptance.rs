//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p gauge-thermo --test acceptance`. The process exits
//! nonzero when any criterion fails, except for failures listed as known,
//! which are still printed as FAIL together with their diagnosis.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use gauge_thermo::dynamics::{
    clausius_report, connection_cross_check, evolve, integration_tolerance, ledger, work_and_heat,
    EvolutionResult, Protocol, ThermoLedger,
};
use gauge_thermo::entropy::entropy_report;
use gauge_thermo::fluctuation::{build_ensemble, thermal_ensemble, verify_ft, TwoPointEnsemble};
use gauge_thermo::gauge::{
    sample_gauge_element, twirl, twirl_oracle, ClusterConfig, DegeneracyStructure,
};
use gauge_thermo::linalg::{
    bures_angle, haar_unitary, max_abs_diff, random_density, relative_entropy, CMatrix,
    DensityOperator, HermitianOperator,
};
use gauge_thermo::models::{curie_weiss, ground_level, third_law_scan, ModelSpec};
use rand::Rng;

const FUZZ_CASES: usize = 100;
const CLAUSIUS_GATE: f64 = 1e-6;

struct Criterion {
    name: &'static str,
    pass: bool,
    known_failure: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Criterion {
    Criterion {
        name,
        pass,
        known_failure: false,
        detail,
    }
}

struct Run {
    p: Protocol,
    ev: EvolutionResult,
    tl: ThermoLedger,
    tol: f64,
}

fn run(p: Protocol) -> Run {
    let ev = thermal_run(&p);
    let tl = ledger(&p, &ev).unwrap();
    let tol = integration_tolerance(&p, &ev).unwrap().estimate;
    Run { p, ev, tl, tol }
}

fn delta_f(tl: &ThermoLedger) -> f64 {
    tl.f_eq[tl.last()] - tl.f_eq[0]
}

fn fuzz_ensembles() -> Vec<TwoPointEnsemble> {
    (0..FUZZ_CASES)
        .map(|i| {
            let p = fuzz_protocol(1000 + i as u64, i, 101);
            let ev = evolve(&p, &DensityOperator::maximally_mixed(p.dim())).unwrap();
            let mut r = rng(5000 + i as u64);
            let f = random_levels(&ev.structures[0], &mut r);
            let g = random_levels(ev.structures.last().unwrap(), &mut r);
            build_ensemble(&p, f, g, &ev).unwrap()
        })
        .collect()
}

fn integral_ft(ensembles: &[TwoPointEnsemble], models: &[&Run]) -> Criterion {
    let mut worst: f64 = 0.0;
    let mut degenerate = 0;
    for ens in ensembles {
        worst = worst.max((verify_ft(ens).unwrap().ift_value - 1.0).abs());
        degenerate += (ens.initial.is_degenerate() || ens.last.is_degenerate()) as usize;
    }
    for r in models {
        let ens = thermal_ensemble(&r.p, &r.ev).unwrap();
        worst = worst.max((verify_ft(&ens).unwrap().ift_value - 1.0).abs());
    }
    check(
        "integral fluctuation theorem",
        worst <= 1e-9,
        format!(
            "max |<exp(-sigma)> - 1| = {worst:.2e} over {} fuzz ensembles ({degenerate} degenerate) + 2 reference models (gate 1e-9)",
            ensembles.len()
        ),
    )
}

fn detailed_relation(ensembles: &[TwoPointEnsemble]) -> Criterion {
    let worst = ensembles
        .iter()
        .map(|e| verify_ft(e).unwrap().crooks_max_violation)
        .fold(0.0, f64::max);
    check(
        "detailed relation",
        worst < 1e-10,
        format!("max |p_F exp(-sigma) - p_R| = {worst:.2e} (gate 1e-10)"),
    )
}

fn mean_sigma_consistency(runs: &[&Run]) -> Criterion {
    let mut worst_ratio: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    for r in runs {
        let ft = verify_ft(&thermal_ensemble(&r.p, &r.ev).unwrap()).unwrap();
        let via_ledger = r.p.beta * (r.tl.w_u[r.tl.last()] - delta_f(&r.tl));
        let vals = [ft.mean_sigma, via_ledger, ft.mean_sigma_via_entropy];
        let spread = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let gate = r.tol.max(1e-8);
        worst_abs = worst_abs.max(spread);
        worst_ratio = worst_ratio.max(spread / gate);
    }
    check(
        "mean entropy production, three evaluations",
        worst_ratio <= 1.0,
        format!(
            "max spread {worst_abs:.2e}, worst spread/gate {worst_ratio:.2e} over {} thermal-start runs (gate max(1e-8, integration tolerance))",
            runs.len()
        ),
    )
}

fn clausius(runs: &[&Run]) -> (Criterion, Criterion) {
    let mut worst = [f64::INFINITY; 4];
    let mut opposite = f64::INFINITY;
    let mut worst_balance_ratio: f64 = 0.0;
    let mut worst_balance: f64 = 0.0;
    for r in runs {
        let rep = clausius_report(&r.p, &r.ev, &r.tl).unwrap();
        assert!(rep.applicable, "{}", r.p.label);
        for (w, s) in worst.iter_mut().zip(rep.min_slacks()) {
            *w = w.min(s);
        }
        for n in &rep.nodes {
            opposite = opposite.min(n.slack_invariant_opposite_sign);
        }
        let gate = (r.p.beta * r.tol).max(1e-8);
        worst_balance = worst_balance.max(rep.max_balance_residual());
        worst_balance_ratio = worst_balance_ratio.max(rep.max_balance_residual() / gate);
    }
    let slacks = check(
        "Clausius inequalities (i)-(iv)",
        worst.iter().all(|&s| s >= -CLAUSIUS_GATE),
        format!(
            "min slacks [{:.2e}, {:.2e}, {:.2e}, {:.2e}] over LZ, CW and {FUZZ_CASES} random runs (gate -1e-6); \
             invariant-work bound with opposite coherent-heat sign, not gated: min slack {opposite:.3e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    );
    let balance = check(
        "entropy balance equality",
        worst_balance_ratio <= 1.0,
        format!(
            "max |beta (W_u - dF) - dS_GT - S(rho^E || sigma)| = {worst_balance:.2e}, worst residual/gate {worst_balance_ratio:.2e} (gate max(1e-8, beta * integration tolerance))"
        ),
    )
    .with_nodes(runs.iter().map(|r| r.tl.len()).sum());
    (slacks, balance)
}

impl Criterion {
    fn with_nodes(mut self, nodes: usize) -> Self {
        self.detail.push_str(&format!(", {nodes} nodes"));
        self
    }
}

// Frozen from the reference run: 1000 steps, Delta = 2, v = 1, beta = 2.
const LZ_C_REL_FINAL: f64 = 0.117_964_484_629_975_93;
const LZ_COHERENCE_SHARE: f64 = 0.739_429_475_171_642_7;

fn landau_zener_qualitative(r: &Run) -> Criterion {
    let tl = &r.tl;
    let n = tl.last();
    let max_s_gamma = tl.s_gamma.iter().fold(0.0f64, |a, s| a.max(s.abs()));
    let c_rel = tl.c_rel[n];
    let share = c_rel / r.p.beta / (tl.w_u[n] - delta_f(tl));
    let snapshot = (c_rel / LZ_C_REL_FINAL - 1.0).abs() < 1e-9
        && (share / LZ_COHERENCE_SHARE - 1.0).abs() < 1e-9;
    check(
        "Landau-Zener: coherence carries the bound",
        max_s_gamma < 1e-10 && c_rel > 1e-3 && share > 0.5 && snapshot,
        format!(
            "max s_gamma {max_s_gamma:.1e} (< 1e-10), c_rel(tau) {c_rel:.12} (> 1e-3), \
             T c_rel / (W_u - dF) = {share:.6} (> 0.5), snapshot match {snapshot}"
        ),
    )
}

fn curie_weiss_qualitative(r: &Run) -> Criterion {
    let tl = &r.tl;
    let n = tl.last();
    let max_c_rel = tl.c_rel.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let final_s_gamma = tl.s_gamma[n];
    let tol_b = 1e-9;
    let mut offenders = Vec::new();
    let mut off_crossing = false;
    for j in 0..tl.len() {
        let field = 2.0 - 0.4 * tl.t[j];
        if field > tol_b && tl.s_gamma[j] >= 1e-8 {
            // m and m' cross when m + m' = -N B / J.
            let s = (50.0 * field).round();
            let crossing = (50.0 * field - s).abs() < 1e-9 && (1.0..=49.0).contains(&s);
            off_crossing |= !crossing;
            offenders.push(format!("B={field:.2}: {:.2e}", tl.s_gamma[j]));
        }
    }
    let pass = max_c_rel < 1e-10 && offenders.is_empty() && final_s_gamma > 0.1;
    let known = !pass && max_c_rel < 1e-10 && final_s_gamma > 0.1 && !off_crossing;
    Criterion {
        name: "Curie-Weiss: no coherence, Holevo cost at the end",
        pass,
        known_failure: known,
        detail: format!(
            "max c_rel {max_c_rel:.1e} (< 1e-10), final s_gamma {final_s_gamma:.6} (> 0.1, ln 2 = {:.6}), \
             s_gamma >= 1e-8 at B > 0 on nodes [{}]{}",
            2f64.ln(),
            offenders.join(", "),
            if known {
                "; these nodes sit on exact level crossings m + m' = -50 B of the Hamiltonian"
            } else {
                ""
            }
        ),
    }
}

fn third_law() -> Criterion {
    let cases = [
        (
            "diag(0,1)",
            HermitianOperator::from_real_diagonal(&[0.0, 1.0]),
        ),
        (
            "diag(0,0,1)",
            HermitianOperator::from_real_diagonal(&[0.0, 0.0, 1.0]),
        ),
        ("CW N=4 B=0", curie_weiss(1.0, 4, 0.0).unwrap()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, h) in cases {
        let (n0, gap) = ground_level(&h, &ClusterConfig::default()).unwrap();
        let beta = 1e6 / gap.unwrap();
        let s = third_law_scan(&h, &[beta]).unwrap()[0].1;
        let err = (s - (n0 as f64).ln()).abs();
        pass &= err < 1e-4;
        parts.push(format!("{name}: n0={n0}, |s_gt - ln n0| = {err:.1e}"));
    }
    check(
        "third law",
        pass,
        format!("{} (gate 1e-4)", parts.join("; ")),
    )
}

fn gauge_invariance() -> Criterion {
    let mut worst_s: f64 = 0.0;
    let mut worst_wq: f64 = 0.0;
    let mut worst_ft: f64 = 0.0;
    for i in 0..FUZZ_CASES {
        let p = fuzz_protocol(9000 + i as u64, i, 41);
        let mut r = rng(9500 + i as u64);
        let rho0 = random_density(p.dim(), &mut r);
        let ev = evolve(&p, &rho0).unwrap();
        let moved = gauge_transformed(&ev, &mut r);
        for ((a, b), ds) in ev.states.iter().zip(&moved.states).zip(&ev.structures) {
            let (ra, rb) = (
                entropy_report(a, ds).unwrap(),
                entropy_report(b, ds).unwrap(),
            );
            worst_s = worst_s.max((ra.s_gt - rb.s_gt).abs());
        }
        let (wa, wb) = (
            work_and_heat(&p, &ev).unwrap(),
            work_and_heat(&p, &moved).unwrap(),
        );
        for j in 0..p.num_nodes() {
            worst_wq = worst_wq
                .max((wa.w_inv[j] - wb.w_inv[j]).abs())
                .max((wa.q_c[j] - wb.q_c[j]).abs());
        }

        let (d0, d1) = (&ev.structures[0], ev.structures.last().unwrap());
        let f = random_levels(d0, &mut r);
        let g = random_levels(d1, &mut r);
        let u = ev.final_propagator();
        let v0 = sample_gauge_element(d0, &mut r).embedded;
        let v1 = sample_gauge_element(d1, &mut r).embedded;
        let a = TwoPointEnsemble::from_propagator(u, d0, d1, f.clone(), g.clone(), p.beta).unwrap();
        let b =
            TwoPointEnsemble::from_propagator(&v1.compose(u).compose(&v0), d0, d1, f, g, p.beta)
                .unwrap();
        let (fa, fb) = (verify_ft(&a).unwrap(), verify_ft(&b).unwrap());
        let sigma_diff = a
            .sigma
            .iter()
            .zip(b.sigma.iter())
            .filter(|(x, _)| x.is_finite())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        worst_ft = worst_ft
            .max((&a.transition - &b.transition).amax())
            .max((&a.joint_forward - &b.joint_forward).amax())
            .max((&a.joint_reverse - &b.joint_reverse).amax())
            .max(sigma_diff)
            .max((fa.ift_value - fb.ift_value).abs())
            .max((fa.mean_sigma - fb.mean_sigma).abs())
            .max((fa.mean_sigma_via_entropy - fb.mean_sigma_via_entropy).abs())
            .max((fa.crooks_max_violation - fb.crooks_max_violation).abs());
    }
    check(
        "gauge invariance",
        worst_s < 1e-9 && worst_wq < 1e-9 && worst_ft < 1e-9,
        format!(
            "max change s_gt {worst_s:.1e}, w_inv/q_c {worst_wq:.1e}, FT quantities {worst_ft:.1e} over {FUZZ_CASES} cases (gate 1e-9)"
        ),
    )
}

fn twirl_oracle_check() -> Criterion {
    const M: usize = 20_000;
    let gate = 3.0 / (M as f64).sqrt() + 1e-3;
    let mut worst: f64 = 0.0;
    for dim in 2..=6usize {
        let mut r = rng(700 + dim as u64);
        let levels: Vec<f64> = (0..dim).map(|i| i.div_ceil(2) as f64).collect();
        let h =
            HermitianOperator::from_real_diagonal(&levels).conjugate_by(&haar_unitary(dim, &mut r));
        let ds = DegeneracyStructure::from_hamiltonian(&h, &ClusterConfig::default()).unwrap();
        let rho = random_density(dim, &mut r);
        let exact = twirl(&rho, &ds).unwrap();
        let mc = twirl_oracle(&rho, &ds, M, &mut r).unwrap();
        worst = worst.max(max_abs_diff(exact.matrix(), mc.matrix()));
    }
    check(
        "twirl against Haar Monte Carlo",
        worst < gate,
        format!("max entry deviation {worst:.2e} for d = 2..6, M = {M} (gate {gate:.3e})"),
    )
}

fn connection(r: &Run) -> Criterion {
    let dev = connection_cross_check(&r.p, &r.ev)
        .unwrap()
        .max_deviation()
        .expect("Landau-Zener spectrum is non-degenerate");
    check(
        "covariant-derivative work and heat",
        dev < 10.0 * r.tol,
        format!(
            "max |connection - ledger| = {dev:.2e} vs 10 x integration tolerance {:.2e}",
            10.0 * r.tol
        ),
    )
}

/// Random pair of states sharing a support of rank `rank`.
fn same_support_pair<R: Rng>(
    dim: usize,
    rank: usize,
    rng: &mut R,
) -> (DensityOperator, DensityOperator) {
    let v = haar_unitary(dim, rng);
    let embed = |block: &DensityOperator| {
        let mut m = CMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (rank, rank)).copy_from(block.matrix());
        DensityOperator::new(v.matrix() * m * v.matrix().adjoint()).unwrap()
    };
    (
        embed(&random_density(rank, rng)),
        embed(&random_density(rank, rng)),
    )
}

fn bures_bound() -> Criterion {
    let mut r = rng(31);
    let mut worst = f64::INFINITY;
    for i in 0..500 {
        let dim = 2 + i % 5;
        let rank = if i % 2 == 0 {
            dim
        } else {
            r.random_range(1..=dim)
        };
        let (rho, sigma) = same_support_pair(dim, rank, &mut r);
        let s = relative_entropy(&rho, &sigma).unwrap();
        let l = bures_angle(&rho, &sigma).unwrap();
        worst = worst.min(s - 8.0 / (PI * PI) * l * l);
    }
    check(
        "relative entropy above squared Bures angle",
        worst >= -1e-10,
        format!("min S(rho||sigma) - 8/pi^2 L^2 = {worst:.3e} over 500 same-support pairs (gate -1e-10)"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let lz = run(ModelSpec::landau_zener_reference().build().unwrap());
    let cw = run(ModelSpec::curie_weiss_reference().build().unwrap());
    let randoms: Vec<Run> = (0..FUZZ_CASES)
        .map(|i| run(fuzz_protocol(i as u64, i, 1001)))
        .collect();
    let mut thermal: Vec<&Run> = vec![&lz, &cw];
    thermal.extend(randoms.iter());
    let ensembles = fuzz_ensembles();

    let (slacks, balance) = clausius(&thermal);
    let criteria = vec![
        integral_ft(&ensembles, &[&lz, &cw]),
        detailed_relation(&ensembles),
        mean_sigma_consistency(&thermal),
        slacks,
        balance,
        landau_zener_qualitative(&lz),
        curie_weiss_qualitative(&cw),
        third_law(),
        gauge_invariance(),
        twirl_oracle_check(),
        connection(&lz),
        bures_bound(),
    ];

    let mut unexpected = 0;
    for c in &criteria {
        let tag = match (c.pass, c.known_failure) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("{tag:<12} {}: {}", c.name, c.detail);
    }
    let passed = criteria.iter().filter(|c| c.pass).count();
    println!(
        "{passed}/{} criteria passed, {unexpected} unexpected failures, {:.1}s",
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
