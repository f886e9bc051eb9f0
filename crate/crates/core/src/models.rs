//! Protocol builders: Landau-Zener sweep, Curie-Weiss field ramp, random
//! ramps for fuzzing, and the low-temperature entropy scan.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Protocol;
use crate::entropy::{level_distribution, s_gauge};
use crate::error::{Error, Result};
use crate::gauge::{ClusterConfig, DegeneracyStructure};
use crate::linalg::{
    eigh, from_spectrum, gibbs_state, random_hermitian, CMatrix, HermitianOperator,
};

/// `(delta/2) sigma_x + (v t / 2) sigma_z`.
pub fn landau_zener(delta: f64, v: f64, t: f64) -> HermitianOperator {
    let c = |x: f64| Complex64::new(x, 0.0);
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[
            c(0.5 * v * t),
            c(0.5 * delta),
            c(0.5 * delta),
            c(-0.5 * v * t),
        ],
    );
    HermitianOperator::new(m).expect("real symmetric")
}

/// Collective Ising model in the maximal-spin sector:
/// `diag(-(J/N) m^2 - B m)` for `m = -N/2, ..., N/2`.
pub fn curie_weiss(coupling: f64, spins: usize, field: f64) -> Result<HermitianOperator> {
    if spins == 0 {
        return Err(Error::Domain(
            "Curie-Weiss model needs at least one spin".into(),
        ));
    }
    let n = spins as f64;
    let diag: Vec<f64> = (0..=spins)
        .map(|i| {
            let m = i as f64 - 0.5 * n;
            -(coupling / n) * m * m - field * m
        })
        .collect();
    Ok(HermitianOperator::from_real_diagonal(&diag))
}

/// Sweep `t in [0, t_final]` over `steps` intervals.
pub fn landau_zener_protocol(
    delta: f64,
    v: f64,
    beta: f64,
    t_final: f64,
    steps: usize,
) -> Result<Protocol> {
    Protocol::from_fn("landau_zener", t_final, steps, beta, |t| {
        landau_zener(delta, v, t)
    })
}

/// Linear field ramp `B: b_start -> b_end` over `[0, t_final]`.
pub fn curie_weiss_protocol(
    coupling: f64,
    spins: usize,
    b_start: f64,
    b_end: f64,
    beta: f64,
    t_final: f64,
    steps: usize,
) -> Result<Protocol> {
    curie_weiss(coupling, spins, b_start)?;
    Protocol::from_fn("curie_weiss", t_final, steps, beta, |t| {
        let b = b_start + (b_end - b_start) * t / t_final;
        curie_weiss(coupling, spins, b).expect("spin count checked")
    })
}

/// `H_j = H_a + (j/N) H_b` on `t in [0, 1]` at `beta = 1`, with Gaussian
/// Hermitian `H_a`, `H_b` scaled by `1/sqrt(dim)`. With `degenerate`, the two
/// lowest eigenvalues of both endpoint Hamiltonians are made exactly equal.
pub fn random_protocol<R: Rng + ?Sized>(
    dim: usize,
    nodes: usize,
    degenerate: bool,
    rng: &mut R,
) -> Result<Protocol> {
    if !(2..=8).contains(&dim) {
        return Err(Error::Domain(format!(
            "random protocols support dim 2..=8, got {dim}"
        )));
    }
    if nodes < 2 {
        return Err(Error::Protocol(
            "a protocol needs at least two nodes".into(),
        ));
    }
    let scale = 1.0 / (dim as f64).sqrt();
    let mut h_a = random_hermitian(dim, scale, rng);
    let mut h_b = random_hermitian(dim, scale, rng);
    if degenerate {
        let h_end = with_ground_doublet(&h_a.combine(1.0, &h_b, 1.0))?;
        h_a = with_ground_doublet(&h_a)?;
        h_b = h_end.combine(1.0, &h_a, -1.0);
    }
    let steps = nodes - 1;
    Protocol::from_fn("random", 1.0, steps, 1.0, |t| h_a.combine(1.0, &h_b, t))
}

/// Same eigenvectors, with the second eigenvalue replaced by the first.
fn with_ground_doublet(h: &HermitianOperator) -> Result<HermitianOperator> {
    let es = eigh(h)?;
    let mut vals = es.eigenvalues.clone();
    vals[1] = vals[0];
    let spec: Vec<Complex64> = vals.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    HermitianOperator::new(from_spectrum(es.eigenvectors.matrix(), &spec))
}

/// `S_GT` of the Gibbs state of `h` at each inverse temperature.
pub fn third_law_scan(h: &HermitianOperator, betas: &[f64]) -> Result<Vec<(f64, f64)>> {
    third_law_scan_with(h, betas, &ClusterConfig::default())
}

pub fn third_law_scan_with(
    h: &HermitianOperator,
    betas: &[f64],
    cfg: &ClusterConfig,
) -> Result<Vec<(f64, f64)>> {
    if betas.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain(
            "inverse temperatures must be ascending".into(),
        ));
    }
    let ds = DegeneracyStructure::from_hamiltonian(h, cfg)?;
    betas
        .iter()
        .map(|&beta| {
            let g = gibbs_state(h, beta)?;
            Ok((beta, s_gauge(&level_distribution(&g.state, &ds)?)))
        })
        .collect()
}

/// Ground-level multiplicity and the gap to the first excited level
/// (`None` when the spectrum is a single level).
pub fn ground_level(h: &HermitianOperator, cfg: &ClusterConfig) -> Result<(usize, Option<f64>)> {
    let ds = DegeneracyStructure::from_hamiltonian(h, cfg)?;
    let levels = ds.levels();
    let gap = levels.get(1).map(|l| l.energy - levels[0].energy);
    Ok((levels[0].multiplicity, gap))
}

/// Which protocol family a [`ModelSpec`] builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LandauZener,
    CurieWeiss,
    Random,
}

/// Declarative description of a protocol.
///
/// Parameters by model:
/// - `landau_zener`: `delta`, `v`
/// - `curie_weiss`: `j`, `n`, `b0`, optional `b1` (default 0)
/// - `random`: `dim`, optional `degenerate` (nonzero to force a degeneracy)
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: ModelKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Number of grid nodes (steps + 1).
    pub nodes: usize,
    pub t_final: f64,
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    fn allowed(&self) -> &'static [&'static str] {
        match self.name {
            ModelKind::LandauZener => &["delta", "v"],
            ModelKind::CurieWeiss => &["j", "n", "b0", "b1"],
            ModelKind::Random => &["dim", "degenerate"],
        }
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .copied()
            .ok_or_else(|| Error::Protocol(format!("missing model parameter `params.{key}`")))
    }

    fn count(&self, key: &str) -> Result<usize> {
        let x = self.required(key)?;
        if x < 1.0 || x.fract() != 0.0 || x > 1e6 {
            return Err(Error::Protocol(format!(
                "model parameter `params.{key}` must be a positive integer, got {x}"
            )));
        }
        Ok(x as usize)
    }

    /// Checks parameter names and grid values without building anything.
    pub fn validate(&self) -> Result<()> {
        let allowed = self.allowed();
        if let Some(k) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Protocol(format!(
                "unknown model parameter `params.{k}`"
            )));
        }
        if self.nodes < 2 {
            return Err(Error::Protocol("`nodes` must be at least 2".into()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Protocol("`t_final` must be positive".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Protocol("`beta` must be positive".into()));
        }
        match self.name {
            ModelKind::LandauZener => {
                self.required("delta")?;
                self.required("v")?;
            }
            ModelKind::CurieWeiss => {
                self.required("j")?;
                self.count("n")?;
                self.required("b0")?;
            }
            ModelKind::Random => {
                let d = self.count("dim")?;
                if !(2..=8).contains(&d) {
                    return Err(Error::Protocol(format!(
                        "`params.dim` must lie in 2..=8, got {d}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Protocol> {
        self.validate()?;
        let steps = self.nodes - 1;
        match self.name {
            ModelKind::LandauZener => landau_zener_protocol(
                self.required("delta")?,
                self.required("v")?,
                self.beta,
                self.t_final,
                steps,
            ),
            ModelKind::CurieWeiss => curie_weiss_protocol(
                self.required("j")?,
                self.count("n")?,
                self.required("b0")?,
                self.params.get("b1").copied().unwrap_or(0.0),
                self.beta,
                self.t_final,
                steps,
            ),
            ModelKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let degenerate = self.params.get("degenerate").is_some_and(|&x| x != 0.0);
                let base = random_protocol(self.count("dim")?, self.nodes, degenerate, &mut rng)?;
                let times: Vec<f64> = base.times().iter().map(|t| t * self.t_final).collect();
                Protocol::new("random", times, base.hamiltonians().to_vec(), self.beta)
            }
        }
    }

    pub fn landau_zener_reference() -> Self {
        Self {
            name: ModelKind::LandauZener,
            params: [("delta".to_string(), 2.0), ("v".to_string(), 1.0)].into(),
            nodes: 1001,
            t_final: 1.0,
            beta: 2.0,
            seed: 0,
        }
    }

    pub fn curie_weiss_reference() -> Self {
        Self {
            name: ModelKind::CurieWeiss,
            params: [
                ("j".to_string(), 1.0),
                ("n".to_string(), 50.0),
                ("b0".to_string(), 2.0),
                ("b1".to_string(), 0.0),
            ]
            .into(),
            nodes: 2001,
            t_final: 5.0,
            beta: 2.0,
            seed: 0,
        }
    }
}
