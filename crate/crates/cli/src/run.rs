//! `run`: evolve one protocol from its thermal state, write the ledger and a
//! JSON report, and check every identity and bound along the way.

use std::fmt::Write as _;
use std::path::PathBuf;

use gauge_thermo::dynamics::{
    clausius_report, connection_cross_check, evolve, integration_tolerance, ledger, ClausiusNode,
    ConnectionCheck, IntegrationTolerance, ThermoLedger,
};
use gauge_thermo::entropy::LevelDistribution;
use gauge_thermo::fluctuation::{thermal_ensemble, verify_ft, FtReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checks::{gauge_deviation, GaugeDeviation, CROOKS_GATE, GAUGE_GATE, IFT_GATE};
use crate::config::{Emit, RunConfig};
use crate::error::{numerical, CliError, CliResult};
use crate::format::csv_row;
use crate::third_law::{self, ThirdLaw};

pub const LEDGER_HEADER: &str = "t,w_u,w_inv,q_c,q_u,s_gt,s_d,c_rel,s_gamma,f_eq,bound_generalized,bound_geometric,bures,rel_ent";

#[derive(Debug, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub protocol: ProtocolSummary,
    pub integration: Integration,
    #[serde(rename = "final")]
    pub final_values: FinalValues,
    pub identities: Identities,
    pub clausius: Clausius,
    pub connection: Connection,
    pub ft: Option<Ft>,
    pub third_law: Option<ThirdLaw>,
    pub gauge_check: Option<GaugeDeviation>,
    pub violations: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ProtocolSummary {
    pub label: String,
    pub dim: usize,
    pub nodes: usize,
    pub beta: f64,
}

#[derive(Debug, Serialize)]
pub struct Integration {
    #[serde(flatten)]
    pub estimate: IntegrationTolerance,
    pub gate: f64,
    pub within_gate: bool,
    /// `max(gate, estimate)`, the tolerance applied to the checks below.
    pub applied: f64,
}

#[derive(Debug, Serialize)]
pub struct FinalValues {
    pub t: f64,
    pub w_u: f64,
    pub w_inv: f64,
    pub q_c: f64,
    pub q_u: f64,
    pub u: f64,
    pub f_eq: f64,
    pub s_gt: f64,
    pub s_vn: f64,
    pub s_d: f64,
    pub c_rel: f64,
    pub s_gamma: f64,
    pub bures: f64,
    pub rel_ent: f64,
}

/// Largest absolute residual over all nodes.
#[derive(Debug, Serialize)]
pub struct Identities {
    /// `w_u - w_inv - q_c`.
    pub closure: f64,
    /// `q_u`, zero for closed dynamics.
    pub closed_heat: f64,
    /// `u - u_0 - w_u - q_u`.
    pub first_law: f64,
}

#[derive(Debug, Serialize)]
pub struct Clausius {
    pub min_slack_entropy: f64,
    pub min_slack_invariant: f64,
    pub min_slack_generalized: f64,
    pub min_slack_geometric: f64,
    /// Not checked; see the field of the same name on the final node.
    pub min_slack_invariant_opposite_sign: f64,
    pub max_balance_residual: f64,
    #[serde(rename = "final")]
    pub final_node: ClausiusNode,
}

#[derive(Debug, Serialize)]
pub struct Connection {
    pub completed: bool,
    pub max_deviation: Option<f64>,
    pub skipped_reason: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Ft {
    #[serde(flatten)]
    pub report: FtReport,
    /// `beta (W_u - dF_eq)` from the ledger.
    pub mean_sigma_via_ledger: f64,
}

pub struct RunOutput {
    pub report: Report,
    pub files: Vec<PathBuf>,
}

fn max_abs(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, |a, x| a.max(x.abs()))
}

fn final_values(tl: &ThermoLedger) -> FinalValues {
    let n = tl.last();
    FinalValues {
        t: tl.t[n],
        w_u: tl.w_u[n],
        w_inv: tl.w_inv[n],
        q_c: tl.q_c[n],
        q_u: tl.q_u[n],
        u: tl.u[n],
        f_eq: tl.f_eq[n],
        s_gt: tl.s_gt[n],
        s_vn: tl.s_vn[n],
        s_d: tl.s_d[n],
        c_rel: tl.c_rel[n],
        s_gamma: tl.s_gamma[n],
        bures: tl.bures[n],
        rel_ent: tl.rel_ent[n],
    }
}

pub fn ledger_csv(tl: &ThermoLedger, nodes: &[ClausiusNode]) -> String {
    let mut out = format!("{LEDGER_HEADER}\n");
    for (j, node) in nodes.iter().enumerate() {
        let row = [
            tl.t[j],
            tl.w_u[j],
            tl.w_inv[j],
            tl.q_c[j],
            tl.q_u[j],
            tl.s_gt[j],
            tl.s_d[j],
            tl.c_rel[j],
            tl.s_gamma[j],
            tl.f_eq[j],
            node.bound_generalized,
            node.bound_geometric,
            tl.bures[j],
            tl.rel_ent[j],
        ];
        let _ = writeln!(out, "{}", csv_row(&row));
    }
    out
}

/// Runs the configured protocol and writes the outputs. Files are written
/// before any validation failure is reported so that failures can be
/// inspected.
pub fn cmd_run(cfg: &RunConfig) -> CliResult<RunOutput> {
    let p = cfg
        .model
        .build()
        .map_err(|e| CliError::Config(format!("model: {e}")))?
        .with_clustering(cfg.tolerances.clustering);
    if p.coarsened().is_none() {
        return Err(CliError::Config(format!(
            "`model.nodes` must be odd so the grid can be halved for the error estimate, got {}",
            p.num_nodes()
        )));
    }
    let rho0 = p.thermal_start().map_err(numerical("thermal state"))?;
    let ev = evolve(&p, &rho0).map_err(numerical("evolution"))?;
    let tl = ledger(&p, &ev).map_err(numerical("ledger"))?;
    let tol = integration_tolerance(&p, &ev).map_err(numerical("integration tolerance"))?;
    let gate = cfg.tolerances.integration_gate;
    let applied = gate.max(tol.estimate);
    let mut violations = Vec::new();

    let identities = Identities {
        closure: max_abs((0..tl.len()).map(|j| tl.w_u[j] - tl.w_inv[j] - tl.q_c[j])),
        closed_heat: max_abs(tl.q_u.iter().copied()),
        first_law: max_abs((0..tl.len()).map(|j| tl.u[j] - tl.u[0] - tl.w_u[j] - tl.q_u[j])),
    };
    for (name, v) in [
        ("closure w_u = w_inv + q_c", identities.closure),
        ("closed dynamics q_u = 0", identities.closed_heat),
        ("first law u - u_0 = w_u + q_u", identities.first_law),
    ] {
        if v > applied {
            violations.push(format!("{name}: residual {v:.3e} exceeds {applied:.3e}"));
        }
    }

    let cr = clausius_report(&p, &ev, &tl).map_err(numerical("Clausius report"))?;
    if !cr.applicable {
        return Err(CliError::Numerical(format!(
            "Clausius report: {}",
            cr.reason.unwrap_or_default()
        )));
    }
    let mins = cr.min_slacks();
    let clausius = Clausius {
        min_slack_entropy: mins[0],
        min_slack_invariant: mins[1],
        min_slack_generalized: mins[2],
        min_slack_geometric: mins[3],
        min_slack_invariant_opposite_sign: cr
            .nodes
            .iter()
            .fold(f64::INFINITY, |a, n| a.min(n.slack_invariant_opposite_sign)),
        max_balance_residual: cr.max_balance_residual(),
        final_node: *cr.nodes.last().expect("non-empty"),
    };
    if cfg.emit.contains(&Emit::Clausius) {
        for (name, s) in ["entropy", "invariant", "generalized", "geometric"]
            .iter()
            .zip(mins)
        {
            if s < -applied {
                violations.push(format!(
                    "Clausius bound ({name}): slack {s:.3e} below -{applied:.3e}"
                ));
            }
        }
        let balance_gate = (p.beta * applied).max(1e-8);
        if clausius.max_balance_residual > balance_gate {
            violations.push(format!(
                "entropy balance: residual {:.3e} exceeds {balance_gate:.3e}",
                clausius.max_balance_residual
            ));
        }
    }

    let connection = match connection_cross_check(&p, &ev).map_err(numerical("connection"))? {
        ConnectionCheck::Skipped { node, reason } => Connection {
            completed: false,
            max_deviation: None,
            skipped_reason: Some(format!("node {node}: {reason}")),
        },
        c @ ConnectionCheck::Completed { .. } => Connection {
            completed: true,
            max_deviation: c.max_deviation(),
            skipped_reason: None,
        },
    };

    let ft = if cfg.emit.contains(&Emit::Ft) {
        let ens = thermal_ensemble(&p, &ev).map_err(numerical("two-point ensemble"))?;
        let report = verify_ft(&ens).map_err(numerical("fluctuation theorems"))?;
        let via_ledger = p.beta * (tl.w_u[tl.last()] - (tl.f_eq[tl.last()] - tl.f_eq[0]));
        if (report.ift_value - 1.0).abs() > IFT_GATE {
            violations.push(format!(
                "integral fluctuation theorem: <exp(-sigma)> = {}",
                report.ift_value
            ));
        }
        if report.crooks_max_violation > CROOKS_GATE {
            violations.push(format!(
                "detailed fluctuation relation: violation {:.3e}",
                report.crooks_max_violation
            ));
        }
        let sigma_gate = applied.max(1e-8);
        for (name, v) in [
            ("ledger work", via_ledger),
            ("entropy balance", report.mean_sigma_via_entropy),
        ] {
            if (v - report.mean_sigma).abs() > sigma_gate {
                violations.push(format!(
                    "mean entropy production via {name}: {v} differs from {} by more than {sigma_gate:.3e}",
                    report.mean_sigma
                ));
            }
        }
        Some(Ft {
            report,
            mean_sigma_via_ledger: via_ledger,
        })
    } else {
        None
    };

    let gauge_check = if cfg.emit.contains(&Emit::GaugeCheck) {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (d0, d1) = (&ev.structures[0], ev.structures.last().expect("non-empty"));
        let dev = gauge_deviation(
            &p,
            &ev,
            LevelDistribution::thermal(d0, p.beta).map_err(numerical("gauge check"))?,
            LevelDistribution::thermal(d1, p.beta).map_err(numerical("gauge check"))?,
            &mut rng,
        )
        .map_err(numerical("gauge check"))?;
        if dev.max() > GAUGE_GATE {
            violations.push(format!(
                "gauge invariance: change {:.3e} exceeds {GAUGE_GATE:e}",
                dev.max()
            ));
        }
        Some(dev)
    } else {
        None
    };

    let third = if cfg.emit.contains(&Emit::ThirdLaw) {
        let r = third_law::scan(&p.hamiltonians()[0], &cfg.tolerances.clustering)?;
        if !r.converged() {
            violations.push(format!("third law: |s_gt - ln n0| = {:.3e}", r.final_error));
        }
        Some(r)
    } else {
        None
    };

    let dir = &cfg.outputs;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    let mut write = |name: &str, body: String| -> CliResult<()> {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        files.push(path);
        Ok(())
    };
    if cfg.emit.contains(&Emit::Ledger) {
        write("ledger.csv", ledger_csv(&tl, &cr.nodes))?;
    }
    if let Some(r) = &third {
        write("third_law.csv", r.csv())?;
    }

    let report = Report {
        config: cfg.clone(),
        protocol: ProtocolSummary {
            label: p.label.clone(),
            dim: p.dim(),
            nodes: p.num_nodes(),
            beta: p.beta,
        },
        integration: Integration {
            estimate: tol,
            gate,
            within_gate: tol.estimate <= gate,
            applied,
        },
        final_values: final_values(&tl),
        identities,
        clausius,
        connection,
        ft,
        third_law: third,
        gauge_check,
        violations,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write("report.json", json + "\n")?;

    if !report.violations.is_empty() {
        return Err(CliError::Numerical(report.violations.join("; ")));
    }
    Ok(RunOutput { report, files })
}
