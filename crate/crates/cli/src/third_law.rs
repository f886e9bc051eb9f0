//! Low-temperature limit of the gauge-invariant entropy for a single
//! Hamiltonian, read from a matrix file or from a run config whose protocol
//! does not move.

use std::path::{Path, PathBuf};

use gauge_thermo::gauge::ClusterConfig;
use gauge_thermo::linalg::{max_abs_diff, CMatrix, HermitianOperator};
use gauge_thermo::models::{ground_level, third_law_scan_with};
use num_complex::Complex64;
use serde::Serialize;

use crate::checks::{third_law_betas, THIRD_LAW_GATE};
use crate::config::RunConfig;
use crate::error::{numerical, CliError, CliResult};
use crate::format::csv_row;

pub const HEADER: &str = "beta,s_gt,limit_ln_n0";

#[derive(Debug, Clone, Serialize)]
pub struct ThirdLaw {
    pub ground_multiplicity: usize,
    pub gap: Option<f64>,
    pub limit_ln_n0: f64,
    pub final_beta: f64,
    pub final_s_gt: f64,
    pub final_error: f64,
    #[serde(skip)]
    pub rows: Vec<(f64, f64)>,
}

impl ThirdLaw {
    pub fn converged(&self) -> bool {
        self.final_error < THIRD_LAW_GATE
    }

    pub fn csv(&self) -> String {
        let mut out = format!("{HEADER}\n");
        for &(beta, s) in &self.rows {
            out.push_str(&csv_row(&[beta, s, self.limit_ln_n0]));
            out.push('\n');
        }
        out
    }
}

/// Scans `beta` up to `1e6 / gap`. A single-level spectrum has no gap; the
/// energy scale is then taken as one.
pub fn scan(h: &HermitianOperator, cfg: &ClusterConfig) -> CliResult<ThirdLaw> {
    let (n0, gap) = ground_level(h, cfg).map_err(numerical("ground level"))?;
    let rows = third_law_scan_with(h, &third_law_betas(gap.unwrap_or(1.0)), cfg)
        .map_err(numerical("third-law scan"))?;
    let (final_beta, final_s_gt) = *rows.last().expect("non-empty grid");
    let limit = (n0 as f64).ln();
    Ok(ThirdLaw {
        ground_multiplicity: n0,
        gap,
        limit_ln_n0: limit,
        final_beta,
        final_s_gt,
        final_error: (final_s_gt - limit).abs(),
        rows,
    })
}

/// Plain-text matrix: first line `d`, then `d` lines of `d` complex entries
/// such as `1`, `-0.5i` or `0.3+2i`. Blank lines and `#` comments are skipped.
pub fn parse_matrix(text: &str) -> CliResult<HermitianOperator> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| CliError::Config("matrix file is empty".into()))?;
    let d: usize = first.parse().ok().filter(|&d| d > 0).ok_or_else(|| {
        CliError::Config(format!(
            "matrix dimension `{first}` is not a positive integer"
        ))
    })?;
    let mut m = CMatrix::zeros(d, d);
    for row in 0..d {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| CliError::Config(format!("matrix file has {row} rows, expected {d}")))?;
        let entries: Vec<&str> = line.split_whitespace().collect();
        if entries.len() != d {
            return Err(CliError::Config(format!(
                "line {lineno}: expected {d} entries, found {}",
                entries.len()
            )));
        }
        for (col, e) in entries.iter().enumerate() {
            m[(row, col)] = e.parse::<Complex64>().map_err(|_| {
                CliError::Config(format!("line {lineno}: `{e}` is not a complex number"))
            })?;
        }
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(CliError::Config(format!(
            "line {lineno}: unexpected content after {d} rows"
        )));
    }
    HermitianOperator::new(m).map_err(|e| CliError::Config(format!("matrix file: {e}")))
}

fn looks_like_matrix(text: &str) -> bool {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .find(|l| !l.is_empty())
        .is_some_and(|l| l.parse::<usize>().is_ok())
}

/// A config is accepted when every node of its protocol carries the same
/// Hamiltonian, e.g. Curie-Weiss with `b0 = b1 = 0`.
fn hamiltonian_from_config(cfg: &RunConfig) -> CliResult<HermitianOperator> {
    let p = cfg
        .model
        .build()
        .map_err(|e| CliError::Config(format!("model: {e}")))?;
    let h0 = &p.hamiltonians()[0];
    let scale = gauge_thermo::linalg::max_abs(h0.matrix()).max(1.0);
    if p.hamiltonians()
        .iter()
        .any(|h| max_abs_diff(h.matrix(), h0.matrix()) > 1e-12 * scale)
    {
        return Err(CliError::Config(
            "model: third-law scans need a time-independent Hamiltonian (check `model.params`)"
                .into(),
        ));
    }
    Ok(h0.clone())
}

pub fn cmd_third_law(config: &Path, out: Option<&Path>) -> CliResult<(PathBuf, ThirdLaw)> {
    let text = std::fs::read_to_string(config).map_err(|e| CliError::io(config, e))?;
    let (h, clustering, outputs) = if looks_like_matrix(&text) {
        let h = parse_matrix(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
        (h, ClusterConfig::default(), PathBuf::from("."))
    } else {
        let cfg = RunConfig::load(config)?;
        let h = hamiltonian_from_config(&cfg)?;
        (h, cfg.tolerances.clustering, cfg.outputs)
    };
    let dir = out.map(Path::to_path_buf).unwrap_or(outputs);
    let result = scan(&h, &clustering)?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let path = dir.join("third_law.csv");
    std::fs::write(&path, result.csv()).map_err(|e| CliError::io(&path, e))?;
    if !result.converged() {
        return Err(CliError::Numerical(format!(
            "third law: |s_gt - ln n0| = {:.3e} at beta = {:.3e} exceeds {THIRD_LAW_GATE:e}",
            result.final_error, result.final_beta
        )));
    }
    Ok((path, result))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_complex_entries() {
        let h = parse_matrix("# spin-1/2\n2\n1 0.5-0.25i\n0.5+0.25i -1\n").unwrap();
        assert_eq!(h.matrix()[(0, 1)], Complex64::new(0.5, -0.25));
        assert_eq!(h.matrix()[(1, 1)], Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn rejects_malformed_matrices() {
        for (text, needle) in [
            ("", "empty"),
            ("x\n", "dimension"),
            ("2\n1 0\n", "1 rows"),
            ("2\n1 0 0\n0 1\n", "line 2"),
            ("2\n1 q\n0 1\n", "`q`"),
            ("2\n1 1\n0 1\n", "Hermitian"),
            ("1\n1\n2\n", "line 3"),
        ] {
            match parse_matrix(text) {
                Err(CliError::Config(m)) => assert!(m.contains(needle), "{m}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn degenerate_ground_level_limit() {
        let h = HermitianOperator::from_real_diagonal(&[0.0, 0.0, 1.0]);
        let r = scan(&h, &ClusterConfig::default()).unwrap();
        assert_eq!(r.ground_multiplicity, 2);
        assert!(r.converged());
        assert!((r.limit_ln_n0 - 2f64.ln()).abs() < 1e-15);
        assert!(r.csv().starts_with("beta,s_gt,limit_ln_n0\n"));
    }
}
