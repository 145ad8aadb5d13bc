//! Run configuration: JSON document, CLI overrides, canonical hash.

use std::fmt;

use grabi_core::lindblad::LindbladRates;
use grabi_core::model::{LambdaConvention, LambdaSchemeParams, RdParams};
use grabi_core::{c64, GrParams};
use serde::{Deserialize, Serialize};

/// Tagged model selector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelConfig {
    Gr(GrParams),
    Rd(RdParams),
    LambdaScheme {
        gt1: f64,
        gt2: f64,
        om1: c64,
        om2: c64,
        det1: f64,
        det2: f64,
        #[serde(default)]
        convention: LambdaConventionConfig,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum LambdaConventionConfig {
    #[default]
    Half,
    Full,
}

impl From<LambdaConventionConfig> for LambdaConvention {
    fn from(c: LambdaConventionConfig) -> Self {
        match c {
            LambdaConventionConfig::Half => LambdaConvention::Half,
            LambdaConventionConfig::Full => LambdaConvention::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TruncConfig {
    pub n_max: usize,
    #[serde(default)]
    pub interior_margin: usize,
}

impl Default for TruncConfig {
    fn default() -> Self {
        Self { n_max: 60, interior_margin: 12 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    /// One of omega, delta, g1, g2, lambda.
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeConfig {
    #[serde(default = "default_sites")]
    pub n_sites: usize,
    pub n_max_site: usize,
    #[serde(default)]
    pub j_values: Option<Vec<f64>>,
    #[serde(default)]
    pub j_sweep: Option<SweepRange>,
}

fn default_sites() -> usize {
    3
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_max: f64,
    pub steps: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { t_max: 1000.0, steps: 200 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialState {
    FockUp { n: usize },
    CoherentUp { alpha: c64 },
}

impl Default for InitialState {
    fn default() -> Self {
        Self::FockUp { n: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputFormat::Csv => write!(f, "csv"),
            OutputFormat::Json => write!(f, "json"),
        }
    }
}

/// The full run configuration; flags override fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub trunc: TruncConfig,
    #[serde(default)]
    pub rates: Option<LindbladRates>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub lattice: Option<LatticeConfig>,
    #[serde(default)]
    pub times: TimeGrid,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default = "default_k_levels")]
    pub k_levels: usize,
    #[serde(default = "default_svd_tol")]
    pub svd_tol: f64,
    /// Reference SUSY-line g1 for decay fits; when absent it is solved from
    /// g1 = sign(g1)·√(Δω + g2²).
    #[serde(default)]
    pub reference_g1: Option<f64>,
    #[serde(default)]
    pub output_path: Option<String>,
    #[serde(default)]
    pub output_format: OutputFormat,
}

fn default_k_levels() -> usize {
    6
}

fn default_svd_tol() -> f64 {
    1e-8
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::Gr(GrParams {
                omega: 1.0,
                delta: 2.0,
                g1: 1.5,
                g2: 0.5,
                lambda: 0.0,
            }),
            trunc: TruncConfig::default(),
            rates: None,
            sweep: None,
            lattice: None,
            times: TimeGrid::default(),
            initial: InitialState::default(),
            k_levels: default_k_levels(),
            svd_tol: default_svd_tol(),
            reference_g1: None,
            output_path: None,
            output_format: OutputFormat::default(),
        }
    }
}

impl RunConfig {
    /// Resolve the model section to generalized Rabi parameters.  The
    /// boolean reports Bloch–Siegert cancellation for the Λ-scheme route.
    pub fn gr_params(&self) -> Result<(GrParams, Option<bool>), String> {
        match &self.model {
            ModelConfig::Gr(p) => {
                p.validate().map_err(|e| e.to_string())?;
                Ok((*p, None))
            }
            ModelConfig::Rd(rd) => {
                let p = grabi_core::model::rd_to_gr(rd).map_err(|e| e.to_string())?;
                Ok((p, None))
            }
            ModelConfig::LambdaScheme { gt1, gt2, om1, om2, det1, det2, convention } => {
                let ls = LambdaSchemeParams {
                    gt1: *gt1,
                    gt2: *gt2,
                    om1: *om1,
                    om2: *om2,
                    det1: *det1,
                    det2: *det2,
                };
                let (p, cancelled) =
                    grabi_core::model::lambda_scheme_to_gr_with(&ls, (*convention).into())
                        .map_err(|e| e.to_string())?;
                Ok((p, Some(cancelled)))
            }
        }
    }

    /// Apply a `--set key=value` override.  Keys address generalized Rabi
    /// parameters (omega, delta, g1, g2, lambda), rates (kappa, gamma,
    /// gamma_phi0, n_levels), sweep and lattice knobs, and scalars like
    /// k_levels / svd_tol / reference_g1.
    pub fn apply_set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let parse_f64 =
            |v: &str| v.parse::<f64>().map_err(|e| format!("bad value for {key}: {e}"));
        let parse_usize =
            |v: &str| v.parse::<usize>().map_err(|e| format!("bad value for {key}: {e}"));
        match key {
            "omega" | "delta" | "g1" | "g2" | "lambda" => {
                let ModelConfig::Gr(ref mut p) = self.model else {
                    return Err(format!(
                        "--set {key} requires a generalized Rabi model section"
                    ));
                };
                let v = parse_f64(value)?;
                match key {
                    "omega" => p.omega = v,
                    "delta" => p.delta = v,
                    "g1" => p.g1 = v,
                    "g2" => p.g2 = v,
                    _ => p.lambda = v,
                }
                Ok(())
            }
            "kappa" | "gamma" | "gamma_phi0" => {
                let rates = self.rates.get_or_insert(LindbladRates {
                    kappa: 0.0,
                    gamma: 0.0,
                    gamma_phi0: 0.0,
                    n_levels: None,
                });
                let v = parse_f64(value)?;
                match key {
                    "kappa" => rates.kappa = v,
                    "gamma" => rates.gamma = v,
                    _ => rates.gamma_phi0 = v,
                }
                Ok(())
            }
            "n_levels" => {
                let rates = self.rates.get_or_insert(LindbladRates {
                    kappa: 0.0,
                    gamma: 0.0,
                    gamma_phi0: 0.0,
                    n_levels: None,
                });
                rates.n_levels = Some(parse_usize(value)?);
                Ok(())
            }
            "n_max" => {
                self.trunc.n_max = parse_usize(value)?;
                Ok(())
            }
            "interior_margin" => {
                self.trunc.interior_margin = parse_usize(value)?;
                Ok(())
            }
            "t_max" => {
                self.times.t_max = parse_f64(value)?;
                Ok(())
            }
            "steps" => {
                self.times.steps = parse_usize(value)?;
                Ok(())
            }
            "k_levels" => {
                self.k_levels = parse_usize(value)?;
                Ok(())
            }
            "svd_tol" => {
                self.svd_tol = parse_f64(value)?;
                Ok(())
            }
            "reference_g1" => {
                self.reference_g1 = Some(parse_f64(value)?);
                Ok(())
            }
            "hopping_j" => {
                let lat = self
                    .lattice
                    .as_mut()
                    .ok_or_else(|| "--set hopping_j requires a lattice section".to_string())?;
                lat.j_values = Some(vec![parse_f64(value)?]);
                Ok(())
            }
            "n_max_site" => {
                let lat = self
                    .lattice
                    .as_mut()
                    .ok_or_else(|| "--set n_max_site requires a lattice section".to_string())?;
                lat.n_max_site = parse_usize(value)?;
                Ok(())
            }
            "n_sites" => {
                let lat = self
                    .lattice
                    .as_mut()
                    .ok_or_else(|| "--set n_sites requires a lattice section".to_string())?;
                lat.n_sites = parse_usize(value)?;
                Ok(())
            }
            other => Err(format!("unknown --set key: {other}")),
        }
    }

    /// Canonical serialization used for the embedded hash.  The output
    /// destination and format are presentation choices, not part of the
    /// computation's identity, so they are stripped first.
    pub fn canonical_json(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_path = None;
        canonical.output_format = OutputFormat::default();
        serde_json::to_string(&canonical).expect("config serializes")
    }

    /// FNV-1a 64-bit hash of the canonical form.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.canonical_json().as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_config() {
        let json = r#"{
            "model": {"type": "gr", "omega": 1.0, "delta": 2.0, "g1": 1.5, "g2": 0.5, "lambda": 0.0}
        }"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        let (p, _) = cfg.gr_params().unwrap();
        assert_eq!(p.g1, 1.5);
        assert_eq!(cfg.trunc.n_max, 60);
    }

    #[test]
    fn set_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_set("g1", "1.4").unwrap();
        cfg.apply_set("kappa", "0.01").unwrap();
        cfg.apply_set("n_max", "40").unwrap();
        let (p, _) = cfg.gr_params().unwrap();
        assert_eq!(p.g1, 1.4);
        assert_eq!(cfg.rates.unwrap().kappa, 0.01);
        assert_eq!(cfg.trunc.n_max, 40);
        assert!(cfg.apply_set("bogus", "1").is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        b.apply_set("g1", "1.23").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), RunConfig::default().hash());
    }
}
