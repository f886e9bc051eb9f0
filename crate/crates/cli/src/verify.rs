//! `verify`: fuzz suites over random protocols. Case `i` is seeded with
//! `seed + i`, so `--seed <case seed> --cases 1` reproduces a single case.

use std::collections::BTreeMap;

use clap::ValueEnum;
use gauge_thermo::dynamics::{clausius_report, evolve, integration_tolerance, ledger, Protocol};
use gauge_thermo::fluctuation::{build_ensemble, thermal_ensemble, verify_ft};
use gauge_thermo::gauge::{twirl, twirl_oracle, ClusterConfig, DegeneracyStructure};
use gauge_thermo::linalg::{haar_unitary, max_abs_diff, random_density, HermitianOperator};
use gauge_thermo::models::random_protocol;
use gauge_thermo::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{gauge_deviation, random_levels, CROOKS_GATE, GAUGE_GATE, IFT_GATE};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Ft,
    Clausius,
    Gauge,
    TwirlOracle,
}

const CLAUSIUS_NODES: usize = 1001;
const FT_NODES: usize = 101;
const GAUGE_NODES: usize = 41;
const ORACLE_SAMPLES: usize = 20_000;

/// One measured quantity and the bound it must respect.
#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub value: f64,
    pub gate: f64,
    /// `value <= gate`, or `value >= gate` for lower bounds.
    pub lower_bound: bool,
}

impl Metric {
    fn upper(value: f64, gate: f64) -> Self {
        Self {
            value,
            gate,
            lower_bound: false,
        }
    }

    fn lower(value: f64, gate: f64) -> Self {
        Self {
            value,
            gate,
            lower_bound: true,
        }
    }

    fn ok(&self) -> bool {
        if self.lower_bound {
            self.value >= self.gate
        } else {
            self.value <= self.gate
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub case: usize,
    pub seed: u64,
    pub dim: usize,
    pub degenerate: bool,
    pub metrics: BTreeMap<&'static str, Metric>,
    pub error: Option<String>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub cases: usize,
    pub seed: u64,
    pub passed: usize,
    pub failed_cases: Vec<usize>,
    /// Worst value of each metric over all cases.
    pub worst: BTreeMap<&'static str, f64>,
    pub results: Vec<CaseResult>,
}

struct Case {
    rng: ChaCha8Rng,
    dim: usize,
    degenerate: bool,
}

impl Case {
    fn new(seed: u64, dims: std::ops::RangeInclusive<usize>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.random_range(dims);
        let degenerate = rng.random_bool(1.0 / 3.0);
        Self {
            rng,
            dim,
            degenerate,
        }
    }

    fn protocol(&mut self, nodes: usize) -> Result<Protocol> {
        random_protocol(self.dim, nodes, self.degenerate, &mut self.rng)
    }
}

type Metrics = BTreeMap<&'static str, Metric>;

fn ft_case(c: &mut Case) -> Result<Metrics> {
    let p = c.protocol(FT_NODES)?;
    let ev = evolve(&p, &random_density(p.dim(), &mut c.rng))?;
    let f = random_levels(&ev.structures[0], &mut c.rng)?;
    let g = random_levels(ev.structures.last().expect("non-empty"), &mut c.rng)?;
    let far = verify_ft(&build_ensemble(&p, f, g, &ev)?)?;
    let thermal = verify_ft(&thermal_ensemble(&p, &ev)?)?;
    let via_work = thermal.mean_sigma_via_work.expect("thermal endpoints");
    let spread = (thermal.mean_sigma - via_work)
        .abs()
        .max((thermal.mean_sigma - thermal.mean_sigma_via_entropy).abs());
    Ok([
        (
            "ift_error",
            Metric::upper(
                (far.ift_value - 1.0)
                    .abs()
                    .max((thermal.ift_value - 1.0).abs()),
                IFT_GATE,
            ),
        ),
        (
            "detailed_relation",
            Metric::upper(
                far.crooks_max_violation.max(thermal.crooks_max_violation),
                CROOKS_GATE,
            ),
        ),
        ("mean_sigma_spread", Metric::upper(spread, 1e-8)),
    ]
    .into())
}

fn clausius_case(c: &mut Case) -> Result<Metrics> {
    let p = c.protocol(CLAUSIUS_NODES)?;
    let ev = evolve(&p, &p.thermal_start()?)?;
    let tl = ledger(&p, &ev)?;
    let tol = integration_tolerance(&p, &ev)?
        .estimate
        .max(gauge_thermo::dynamics::DEFAULT_INTEGRATION_GATE);
    let cr = clausius_report(&p, &ev, &tl)?;
    let mins = cr.min_slacks();
    let closure = (0..tl.len()).fold(0.0f64, |a, j| {
        a.max((tl.w_u[j] - tl.w_inv[j] - tl.q_c[j]).abs())
    });
    Ok([
        ("slack_entropy", Metric::lower(mins[0], -tol)),
        ("slack_invariant", Metric::lower(mins[1], -tol)),
        ("slack_generalized", Metric::lower(mins[2], -tol)),
        ("slack_geometric", Metric::lower(mins[3], -tol)),
        (
            "balance_residual",
            Metric::upper(cr.max_balance_residual(), (p.beta * tol).max(1e-8)),
        ),
        ("closure", Metric::upper(closure, tol)),
    ]
    .into())
}

fn gauge_case(c: &mut Case) -> Result<Metrics> {
    let p = c.protocol(GAUGE_NODES)?;
    let ev = evolve(&p, &random_density(p.dim(), &mut c.rng))?;
    let f = random_levels(&ev.structures[0], &mut c.rng)?;
    let g = random_levels(ev.structures.last().expect("non-empty"), &mut c.rng)?;
    let dev = gauge_deviation(&p, &ev, f, g, &mut c.rng)?;
    Ok([
        ("twirl", Metric::upper(dev.twirl, GAUGE_GATE)),
        ("s_gt", Metric::upper(dev.s_gt, GAUGE_GATE)),
        ("w_inv_q_c", Metric::upper(dev.w_inv_q_c, GAUGE_GATE)),
        ("ft", Metric::upper(dev.ft, GAUGE_GATE)),
    ]
    .into())
}

/// Random Hamiltonian whose spectrum is grouped into levels of random
/// multiplicity, so the gauge group has nontrivial blocks.
fn oracle_case(c: &mut Case) -> Result<Metrics> {
    let mut energies = Vec::with_capacity(c.dim);
    let mut level = 0.0;
    while energies.len() < c.dim {
        let mult = c.rng.random_range(1..=(c.dim - energies.len()).min(3));
        energies.extend(std::iter::repeat_n(level, mult));
        level += c.rng.random_range(0.5..1.5);
    }
    let v = haar_unitary(c.dim, &mut c.rng);
    let h = HermitianOperator::from_real_diagonal(&energies).conjugate_by(&v);
    let ds = DegeneracyStructure::from_hamiltonian(&h, &ClusterConfig::default())?;
    let rho = random_density(c.dim, &mut c.rng);
    let exact = twirl(&rho, &ds)?;
    let mc = twirl_oracle(&rho, &ds, ORACLE_SAMPLES, &mut c.rng)?;
    let gate = 3.0 / (ORACLE_SAMPLES as f64).sqrt() + 1e-3;
    Ok([(
        "max_entry_deviation",
        Metric::upper(max_abs_diff(exact.matrix(), mc.matrix()), gate),
    )]
    .into())
}

pub fn run_case(suite: Suite, case: usize, seed: u64) -> CaseResult {
    let dims = match suite {
        Suite::TwirlOracle => 2..=6,
        _ => 2..=8,
    };
    let mut c = Case::new(seed, dims);
    let out = match suite {
        Suite::Ft => ft_case(&mut c),
        Suite::Clausius => clausius_case(&mut c),
        Suite::Gauge => gauge_case(&mut c),
        Suite::TwirlOracle => oracle_case(&mut c),
    };
    let (metrics, error) = match out {
        Ok(m) => (m, None),
        Err(e) => (BTreeMap::new(), Some(e.to_string())),
    };
    CaseResult {
        case,
        seed,
        dim: c.dim,
        degenerate: c.degenerate,
        pass: error.is_none() && metrics.values().all(Metric::ok),
        metrics,
        error,
    }
}

pub fn cmd_verify(suite: Suite, cases: usize, seed: u64) -> CliResult<VerifyReport> {
    if cases == 0 {
        return Err(CliError::Config("`--cases` must be positive".into()));
    }
    let results: Vec<CaseResult> = (0..cases)
        .into_par_iter()
        .map(|i| run_case(suite, i, seed.wrapping_add(i as u64)))
        .collect();
    let mut worst: BTreeMap<&'static str, f64> = BTreeMap::new();
    for r in &results {
        for (&k, m) in &r.metrics {
            let w = worst.entry(k).or_insert(m.value);
            *w = if m.lower_bound {
                w.min(m.value)
            } else {
                w.max(m.value)
            };
        }
    }
    let failed_cases: Vec<usize> = results.iter().filter(|r| !r.pass).map(|r| r.case).collect();
    Ok(VerifyReport {
        suite,
        cases,
        seed,
        passed: cases - failed_cases.len(),
        failed_cases,
        worst,
        results,
    })
}

/// One line per failing case, with what is needed to rerun it alone.
pub fn failure_lines(report: &VerifyReport) -> Vec<String> {
    report
        .results
        .iter()
        .filter(|r| !r.pass)
        .map(|r| {
            let what = match &r.error {
                Some(e) => e.clone(),
                None => r
                    .metrics
                    .iter()
                    .filter(|(_, m)| !m.ok())
                    .map(|(k, m)| format!("{k} = {:.3e} (gate {:.3e})", m.value, m.gate))
                    .collect::<Vec<_>>()
                    .join(", "),
            };
            format!(
                "case {} failed: {what}; reproduce with --seed {} --cases 1",
                r.case, r.seed
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cases_depend_only_on_their_seed() {
        let a = run_case(Suite::Gauge, 3, 42);
        let b = run_case(Suite::Gauge, 0, 42);
        assert_eq!((a.dim, a.degenerate), (b.dim, b.degenerate));
        assert_eq!(
            serde_json::to_string(&a.metrics).unwrap(),
            serde_json::to_string(&b.metrics).unwrap()
        );
    }

    #[test]
    fn small_suites_pass() {
        for suite in [Suite::Ft, Suite::Gauge, Suite::TwirlOracle] {
            let r = cmd_verify(suite, 4, 7).unwrap();
            assert!(r.failed_cases.is_empty(), "{:?}", failure_lines(&r));
            assert_eq!(
                r.results.iter().map(|c| c.case).collect::<Vec<_>>(),
                [0, 1, 2, 3]
            );
        }
    }

    #[test]
    fn zero_cases_is_a_config_error() {
        assert!(matches!(
            cmd_verify(Suite::Ft, 0, 1),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn failure_lines_name_the_seed() {
        let mut r = cmd_verify(Suite::TwirlOracle, 1, 5).unwrap();
        r.results[0].pass = false;
        r.results[0].error = Some("boom".into());
        assert_eq!(
            failure_lines(&r),
            ["case 0 failed: boom; reproduce with --seed 5 --cases 1"]
        );
    }
}
