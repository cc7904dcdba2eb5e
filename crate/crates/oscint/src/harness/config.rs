//! JSON experiment configuration.
//!
//! The document mirrors the run parameters field-for-field; unknown keys are
//! rejected so typos fail loudly instead of silently running defaults.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::problems;
use crate::integrators::{build_symplectic_ei, MethodSpec, SolverConfig};
use crate::matrix::RVector;
use crate::system::{derive_oscillatory, ConservativeSystem, OscillatorySystem};

/// Hard cap on emitted records per run.
pub const MAX_SAMPLES: usize = 1_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub method: MethodConfig,
    pub h: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub coordinates: Coordinates,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", deny_unknown_fields)]
pub enum ProblemConfig {
    #[serde(rename = "wind")]
    Wind {
        r: f64,
        eps: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y0: Option<Vec<f64>>,
    },
    #[serde(rename = "harmonic")]
    Harmonic {
        omega: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y0: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MethodConfig {
    /// "EI-T" or "EI-O1".."EI-O5".
    Name(String),
    /// Classical symplectic RK coefficients lifted to an exponential
    /// integrator.
    Custom { custom_symplectic: RkCoefficients },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RkCoefficients {
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum SamplingConfig {
    /// Logarithmically spaced sample times over `[h, T]`.
    Log { samples: usize },
    /// Every `stride`-th step.
    Stride { stride: usize },
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig::Log { samples: 1000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinates {
    #[default]
    Original,
    Transformed,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::config(format!("h must be positive, got {}", self.h)));
        }
        if !(self.t_end >= self.h) || !self.t_end.is_finite() {
            return Err(Error::config(format!(
                "T must be at least h, got T={} h={}",
                self.t_end, self.h
            )));
        }
        self.solver.validate()?;
        match self.sampling {
            SamplingConfig::Log { samples } => {
                if !(2..=MAX_SAMPLES).contains(&samples) {
                    return Err(Error::config(format!(
                        "log sampling needs 2..={MAX_SAMPLES} samples, got {samples}"
                    )));
                }
            }
            SamplingConfig::Stride { stride } => {
                if stride == 0 {
                    return Err(Error::config("stride must be positive"));
                }
                let records = (self.t_end / self.h) as usize / stride + 2;
                if records > MAX_SAMPLES {
                    return Err(Error::config(format!(
                        "stride {stride} would emit ~{records} records (cap {MAX_SAMPLES})"
                    )));
                }
            }
        }
        match &self.problem {
            ProblemConfig::Wind { r, eps, y0 } => {
                if !(*r > 0.0) || !(*eps > 0.0) {
                    return Err(Error::config("wind problem needs r > 0 and eps > 0"));
                }
                if let Some(y0) = y0 {
                    if y0.len() != 2 {
                        return Err(Error::config("wind initial state must have length 2"));
                    }
                }
            }
            ProblemConfig::Harmonic { omega, y0 } => {
                if !(*omega > 0.0) {
                    return Err(Error::config("harmonic problem needs omega > 0"));
                }
                if let Some(y0) = y0 {
                    if y0.len() != 2 {
                        return Err(Error::config("harmonic initial state must have length 2"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<(ConservativeSystem, RVector)> {
        match &self.problem {
            ProblemConfig::Wind { r, eps, y0 } => {
                let sys = problems::wind_problem(*r, *eps)?;
                let y0 = y0
                    .as_ref()
                    .map(|v| RVector::from_row_slice(v))
                    .unwrap_or_else(|| problems::wind_initial_state(*eps));
                Ok((sys, y0))
            }
            ProblemConfig::Harmonic { omega, y0 } => {
                let sys = problems::harmonic_problem(*omega)?;
                let y0 = y0
                    .as_ref()
                    .map(|v| RVector::from_row_slice(v))
                    .unwrap_or_else(problems::harmonic_initial_state);
                Ok((sys, y0))
            }
        }
    }

    pub fn method_spec(&self, osc: &OscillatorySystem) -> Result<MethodSpec> {
        self.method.to_spec(osc)
    }

    pub fn problem_label(&self) -> &'static str {
        match self.problem {
            ProblemConfig::Wind { .. } => "wind",
            ProblemConfig::Harmonic { .. } => "harmonic",
        }
    }

    pub fn method_label(&self) -> String {
        match &self.method {
            MethodConfig::Name(n) => n.clone(),
            MethodConfig::Custom { custom_symplectic } => {
                format!("custom-{}-stage", custom_symplectic.c.len())
            }
        }
    }
}

impl MethodConfig {
    pub fn to_spec(&self, osc: &OscillatorySystem) -> Result<MethodSpec> {
        match self {
            MethodConfig::Name(name) => MethodSpec::by_name(name),
            MethodConfig::Custom { custom_symplectic } => {
                let tab = build_symplectic_ei(
                    &custom_symplectic.c,
                    &custom_symplectic.a,
                    &custom_symplectic.b,
                    osc.dec(),
                )?;
                Ok(MethodSpec::General(tab))
            }
        }
    }
}

/// Convenience used by studies and the CLI when only names are involved.
pub fn build_oscillatory(
    cfg: &ExperimentConfig,
) -> Result<(ConservativeSystem, OscillatorySystem, RVector)> {
    let (sys, y0) = cfg.build_problem()?;
    let osc = derive_oscillatory(&sys)?;
    Ok((sys, osc, y0))
}
