//! Built-in models addressable by name.
//!
//! | name            | drift `b∘`              | `a`        | jumps                      |
//! |-----------------|-------------------------|------------|----------------------------|
//! | `bm`            | 0                       | `σ²/2`     | none                       |
//! | `ou`            | `-r x`                  | `σ²/2`     | none                       |
//! | `ou-controlled` | `ζ - r x`               | `σ²/2`     | none                       |
//! | `ex1.1`         | `-κ |x|^(α-2) x`        | `a`        | `±η e_k`, total rate `λ_J` |

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Action, ActionSet, Atom, JumpKernel, LyapunovMode, LyapunovSpec, ModelSpec, Sense};
use crate::error::{Error, Result};

pub const MODEL_NAMES: [&str; 4] = ["bm", "ou", "ou-controlled", "ex1.1"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CostSpec {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `height · exp(-|x|² / width²)`
    Gaussian {
        height: f64,
        width: f64,
    },
    /// `coef · |x|²`
    Quadratic {
        coef: f64,
    },
}

impl CostSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match *self {
            CostSpec::Zero => 0.0,
            CostSpec::Constant { value } => value,
            CostSpec::Gaussian { height, width } => height * (-r2 / (width * width)).exp(),
            CostSpec::Quadratic { coef } => coef * r2,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            CostSpec::Zero => true,
            CostSpec::Constant { value } => value.is_finite(),
            CostSpec::Gaussian { height, width } => height.is_finite() && width.is_finite() && width > 0.0,
            CostSpec::Quadratic { coef } => coef.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid cost specification {self:?}")))
        }
    }
}

/// Parameters of the exponential Lyapunov candidate `exp(θ √(1 + |x|²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovParams {
    /// Defaults to the model's `theta` parameter, or 0.1.
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_c_hat")]
    pub c_hat: f64,
    #[serde(default)]
    pub k_radius: Option<f64>,
}

fn default_gamma() -> f64 {
    0.5
}

fn default_c_hat() -> f64 {
    1.0
}

impl Default for LyapunovParams {
    fn default() -> Self {
        Self { theta: None, gamma: default_gamma(), c_hat: default_c_hat(), k_radius: None }
    }
}

fn default_sense() -> Sense {
    Sense::Minimize
}

fn default_dim() -> usize {
    1
}

/// A catalog model reference as it appears in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogModel {
    pub name: String,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Scalar action payloads (`ou-controlled` only).
    #[serde(default)]
    pub actions: Option<Vec<f64>>,
    #[serde(default)]
    pub cost: CostSpec,
    #[serde(default = "default_sense")]
    pub sense: Sense,
    #[serde(default)]
    pub lyapunov: LyapunovParams,
}

impl CatalogModel {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            dim: 1,
            params: BTreeMap::new(),
            actions: None,
            cost: CostSpec::Zero,
            sense: Sense::Minimize,
            lyapunov: LyapunovParams::default(),
        }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }

    pub fn with_cost(mut self, cost: CostSpec) -> Self {
        self.cost = cost;
        self
    }

    fn allowed_params(&self) -> Result<&'static [&'static str]> {
        Ok(match self.name.as_str() {
            "bm" => &["sigma"],
            "ou" | "ou-controlled" => &["rate", "sigma"],
            "ex1.1" => &["kappa", "alpha", "eta", "theta", "a", "jump_rate"],
            other => return Err(Error::config(format!("unknown model {other:?}; known models: {MODEL_NAMES:?}"))),
        })
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    pub fn validate(&self) -> Result<()> {
        let allowed = self.allowed_params()?;
        if let Some(k) = self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::config(format!("unknown parameter {k:?} for model {:?} (allowed: {allowed:?})", self.name)));
        }
        if let Some((k, v)) = self.params.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::config(format!("parameter {k:?} = {v} is not finite")));
        }
        if self.actions.is_some() && self.name != "ou-controlled" {
            return Err(Error::config(format!("model {:?} does not take an action list", self.name)));
        }
        if !(1..=2).contains(&self.dim) {
            return Err(Error::config(format!("dimension {} not supported (1 or 2)", self.dim)));
        }
        self.cost.validate()
    }

    pub fn build(&self) -> Result<ModelSpec> {
        self.validate()?;
        let cost = self.cost.clone();
        let builder = ModelSpec::builder(self.dim).name(self.name.clone()).sense(self.sense).cost(move |x, _| cost.eval(x));
        let builder = match self.name.as_str() {
            "bm" => {
                let sigma = self.get("sigma", 1.0);
                builder.constant_diffusion(0.5 * sigma * sigma)
            }
            "ou" => {
                let (rate, sigma) = (self.get("rate", 1.0), self.get("sigma", 1.0));
                builder.constant_diffusion(0.5 * sigma * sigma).drift(move |x, _, out| {
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = -rate * xi;
                    }
                })
            }
            "ou-controlled" => {
                let (rate, sigma) = (self.get("rate", 1.0), self.get("sigma", 1.0));
                let values = self.actions.clone().unwrap_or_else(|| vec![-1.0, 1.0]);
                let actions = ActionSet::new(values.iter().map(|&v| Action::new(format!("{v}"), vec![v])).collect())?;
                builder.constant_diffusion(0.5 * sigma * sigma).actions(actions).drift(move |x, z, out| {
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = z[0] - rate * xi;
                    }
                })
            }
            "ex1.1" => {
                let kappa = self.get("kappa", 1.0);
                let alpha = self.get("alpha", 2.0);
                let eta = self.get("eta", 0.5);
                let a = self.get("a", 1.0);
                let rate = self.get("jump_rate", 1.0);
                if !(1.0..=2.0).contains(&alpha) {
                    return Err(Error::config(format!("ex1.1 requires alpha in [1, 2], got {alpha}")));
                }
                let d = self.dim;
                let mut atoms = Vec::with_capacity(2 * d);
                for k in 0..d {
                    for s in [1.0, -1.0] {
                        let mut mark = vec![0.0; d];
                        mark[k] = s * eta;
                        atoms.push(Atom { mark, weight: rate / (2 * d) as f64 });
                    }
                }
                builder.constant_diffusion(a).kernel(JumpKernel::translation(atoms)?).drift(move |x, _, out| {
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let scale = if r > 0.0 { kappa * r.powf(alpha - 2.0) } else { 0.0 };
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = -scale * xi;
                    }
                })
            }
            _ => unreachable!("validated above"),
        };
        builder.build()
    }

    /// The shipped Lyapunov candidate for this model, if any.
    pub fn lyapunov(&self) -> Result<LyapunovSpec> {
        self.validate()?;
        if self.name == "bm" {
            return Err(Error::config("model \"bm\" is not positive recurrent and ships no Lyapunov function"));
        }
        let p = &self.lyapunov;
        let theta = p.theta.unwrap_or_else(|| self.get("theta", 0.1));
        Ok(LyapunovSpec::exponential(theta, p.c_hat, p.k_radius, LyapunovMode::BoundedCost { gamma: p.gamma }))
    }
}

/// Convenience wrapper for scalar-valued closures used by tests and benches.
pub fn scalar_fn(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> super::ScalarFn {
    Arc::new(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_models_build() {
        for name in MODEL_NAMES {
            let m = CatalogModel::new(name).build().unwrap();
            assert_eq!(m.name(), name);
        }
        assert_eq!(CatalogModel::new("ou-controlled").build().unwrap().actions().len(), 2);
    }

    #[test]
    fn unknown_names_and_params_rejected() {
        assert!(CatalogModel::new("heston").build().is_err());
        assert!(CatalogModel::new("ou").param("kappa", 1.0).build().is_err());
        assert!(CatalogModel::new("bm").lyapunov().is_err());
    }

    #[test]
    fn ex11_drift_and_jumps() {
        let m = CatalogModel::new("ex1.1").param("kappa", 2.0).param("alpha", 1.0).build().unwrap();
        assert_eq!(m.effective_drift(&[3.0], 0).unwrap(), vec![-2.0]);
        assert_eq!(m.kernel().total_mass(), 1.0);
        assert_eq!(m.kernel().atoms().len(), 2);
    }

    #[test]
    fn cost_spec_parses_strictly() {
        let c: CostSpec = serde_json::from_str(r#"{"kind":"gaussian","height":1.0,"width":1.0}"#).unwrap();
        assert_eq!(c.eval(&[0.0]), 1.0);
        assert!(serde_json::from_str::<CostSpec>(r#"{"kind":"constant","value":1.0,"extra":2}"#).is_err());
    }
}
