//! Serializable model selection.

use serde::{Deserialize, Serialize};

use crate::model::{ModelError, ModelSpec, RateFn};

/// One jump of a custom model with a tabulated rate function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedJump {
    pub size: f64,
    /// Strictly increasing densities.
    pub u: Vec<f64>,
    /// Rate values `F(u)`; interpolated by a monotone cubic.
    pub rate: Vec<f64>,
}

/// Model family and parameters, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    BirthDeath {
        lambda: f64,
        theta: f64,
        x: f64,
    },
    Sis {
        lambda: f64,
        theta: f64,
        x: f64,
    },
    PureBirth {
        lambda: f64,
        x: f64,
    },
    Custom {
        x: f64,
        #[serde(default)]
        label: Option<String>,
        /// `[lo, hi]`; defaults to `[0, ∞)`.
        #[serde(default)]
        domain: Option<[f64; 2]>,
        jumps: Vec<TabulatedJump>,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec<f64>, ModelError> {
        match self {
            ModelConfig::BirthDeath { lambda, theta, x } => ModelSpec::birth_death(*lambda, *theta, *x),
            ModelConfig::Sis { lambda, theta, x } => ModelSpec::sis(*lambda, *theta, *x),
            ModelConfig::PureBirth { lambda, x } => ModelSpec::pure_birth(*lambda, *x),
            ModelConfig::Custom {
                x,
                label,
                domain,
                jumps,
            } => {
                let mut b = ModelSpec::builder(label.clone().unwrap_or_else(|| "custom".into())).start(*x);
                if let Some([lo, hi]) = domain {
                    b = b.domain(*lo, *hi);
                }
                for j in jumps {
                    b = b.jump(j.size, RateFn::tabulated(j.u.clone(), j.rate.clone())?);
                }
                b.build()
            }
        }
    }

    /// Birth–death chain with `λ = 1.1`, `θ = 1`, `x = 1`.
    pub fn birth_death_example() -> Self {
        ModelConfig::BirthDeath {
            lambda: 1.1,
            theta: 1.0,
            x: 1.0,
        }
    }

    /// SIS epidemic with `λ = 3`, `θ = 1`, `x = 1/2`.
    pub fn sis_example() -> Self {
        ModelConfig::Sis {
            lambda: 3.0,
            theta: 1.0,
            x: 0.5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_roundtrip_through_json() {
        let c = ModelConfig::birth_death_example();
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"kind\":\"birth_death\""));
        let back: ModelConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.build().unwrap().x_infinity(), f64::INFINITY);
    }

    #[test]
    fn custom_tabulated_model() {
        let u: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let c = ModelConfig::Custom {
            x: 0.5,
            label: None,
            domain: Some([0.0, 1.0]),
            jumps: vec![
                TabulatedJump {
                    size: 1.0,
                    u: u.clone(),
                    rate: u.iter().map(|v| 3.0 * v * (1.0 - v)).collect(),
                },
                TabulatedJump {
                    size: -1.0,
                    u: u.clone(),
                    rate: u.clone(),
                },
            ],
        };
        let m = c.build().unwrap();
        assert!((m.x_infinity() - 2.0 / 3.0).abs() < 1e-3);
    }
}
