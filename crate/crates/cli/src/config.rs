//! Run configuration, read from TOML (or JSON, including a previous
//! `report.json`, whose `config` entry is the fully resolved configuration).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use gauge_thermo::dynamics::DEFAULT_INTEGRATION_GATE;
use gauge_thermo::gauge::ClusterConfig;
use gauge_thermo::models::ModelSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    Ledger,
    Ft,
    Clausius,
    ThirdLaw,
    GaugeCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default)]
    pub clustering: ClusterConfig,
    /// Floor for the integration tolerance used by the identity and
    /// inequality checks.
    #[serde(default = "default_gate")]
    pub integration_gate: f64,
}

fn default_gate() -> f64 {
    DEFAULT_INTEGRATION_GATE
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            clustering: ClusterConfig::default(),
            integration_gate: default_gate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    #[serde(default = "default_emit")]
    pub emit: BTreeSet<Emit>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}

fn default_emit() -> BTreeSet<Emit> {
    [Emit::Ledger, Emit::Ft, Emit::Clausius].into()
}

impl RunConfig {
    pub fn parse(text: &str, json: bool) -> CliResult<Self> {
        let cfg: RunConfig = if json {
            let mut v: serde_json::Value =
                serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
            if let Some(inner) = v.get_mut("config") {
                v = inner.take();
            }
            serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            toml::from_str(text)
                .map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let json = path.extension().is_some_and(|e| e == "json");
        Self::parse(&text, json).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        self.model
            .validate()
            .map_err(|e| CliError::Config(format!("model: {e}")))?;
        let t = &self.tolerances;
        if !(t.integration_gate > 0.0 && t.integration_gate.is_finite()) {
            return Err(CliError::Config(
                "`tolerances.integration_gate` must be positive".into(),
            ));
        }
        for (key, v) in [
            ("abs_scale", t.clustering.abs_scale),
            ("rel", t.clustering.rel),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!(
                    "`tolerances.clustering.{key}` must be nonnegative"
                )));
            }
        }
        if self.outputs.as_os_str().is_empty() {
            return Err(CliError::Config("`outputs` must not be empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LZ: &str = r#"
outputs = "out/lz"
seed = 3

[model]
name = "landau_zener"
nodes = 1001
t_final = 1.0
beta = 2.0
params = { delta = 2.0, v = 1 }
"#;

    fn err(text: &str) -> String {
        match RunConfig::parse(text, false) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = RunConfig::parse(LZ, false).unwrap();
        assert_eq!(cfg.model, ModelSpec::landau_zener_reference());
        assert_eq!(cfg.emit, default_emit());
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn resolved_json_round_trips() {
        let cfg = RunConfig::parse(LZ, false).unwrap();
        let report = serde_json::json!({ "config": cfg, "other": 1 }).to_string();
        assert_eq!(RunConfig::parse(&report, true).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_key() {
        assert!(err(&LZ.replace("seed = 3", "sed = 3")).contains("sed"));
        assert!(err(&LZ.replace("v = 1", "velocity = 1")).contains("params.velocity"));
        assert!(err(&LZ.replace(", v = 1", "")).contains("params.v"));
        assert!(err(&LZ.replace("nodes = 1001\n", "")).contains("nodes"));
        let gate = format!("{LZ}\n[tolerances]\nintegration_gate = -1\n");
        assert!(err(&gate).contains("tolerances.integration_gate"));
        let emit = LZ.replace("seed = 3", "seed = 3\nemit = [\"ledgr\"]");
        assert!(err(&emit).contains("ledgr"));
    }
}
