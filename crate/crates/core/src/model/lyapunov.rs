//! Sample-based verification of the Foster–Lyapunov drift inequality
//! `A V(x, ζ) ≤ Ĉ 1_K(x) - γ V(x)` (bounded cost) or `≤ Ĉ 1_K(x) - ℓ(x) V(x)`
//! (unbounded cost), with `K` the closed ball of a given radius.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{ModelSpec, ScalarFn};
use crate::error::{Error, Result};

/// `(x, out)`: writes a vector- or matrix-valued function of `x` into `out`.
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
pub enum LyapunovMode {
    BoundedCost {
        gamma: f64,
    },
    /// `ell` must be supplied; `None` is rejected by the checker.
    UnboundedCost {
        ell: Option<ScalarFn>,
    },
}

impl fmt::Debug for LyapunovMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LyapunovMode::BoundedCost { gamma } => write!(f, "BoundedCost {{ gamma: {gamma} }}"),
            LyapunovMode::UnboundedCost { ell } => {
                write!(f, "UnboundedCost {{ ell: {} }}", if ell.is_some() { "Some(..)" } else { "None" })
            }
        }
    }
}

/// Lyapunov candidate `V ≥ 1` with user-supplied derivatives.
#[derive(Clone)]
pub struct LyapunovSpec {
    pub value: ScalarFn,
    pub gradient: VectorFn,
    /// Row-major `d × d`.
    pub hessian: VectorFn,
    pub c_hat: f64,
    /// Radius of the ball `K`; `None` is the empty set.
    pub compact_radius: Option<f64>,
    pub mode: LyapunovMode,
}

impl fmt::Debug for LyapunovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("c_hat", &self.c_hat)
            .field("compact_radius", &self.compact_radius)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

impl LyapunovSpec {
    /// `V(x) = exp(θ √(1 + |x|²))` with closed-form derivatives.
    pub fn exponential(theta: f64, c_hat: f64, compact_radius: Option<f64>, mode: LyapunovMode) -> Self {
        let value: ScalarFn = Arc::new(move |x: &[f64]| (theta * radial(x)).exp());
        let gradient = Arc::new(move |x: &[f64], out: &mut [f64]| {
            let r = radial(x);
            let v = (theta * r).exp();
            for (o, xi) in out.iter_mut().zip(x) {
                *o = theta * v * xi / r;
            }
        });
        let hessian = Arc::new(move |x: &[f64], out: &mut [f64]| {
            let d = x.len();
            let r = radial(x);
            let v = (theta * r).exp();
            for i in 0..d {
                for j in 0..d {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    let xx = x[i] * x[j];
                    out[i * d + j] = v * (theta * theta * xx / (r * r) + theta * (delta / r - xx / (r * r * r)));
                }
            }
        });
        Self { value, gradient, hessian, c_hat, compact_radius, mode }
    }

    fn in_compact(&self, x: &[f64]) -> bool {
        match self.compact_radius {
            Some(r) => x.iter().map(|v| v * v).sum::<f64>().sqrt() <= r,
            None => false,
        }
    }
}

fn radial(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftViolation {
    pub point: Vec<f64>,
    pub action: usize,
    pub violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    /// `max (A V - rhs)` over samples × actions; `≤ 0` means the inequality holds on the samples.
    pub max_violation: f64,
    pub violating_points: Vec<DriftViolation>,
    pub samples_checked: usize,
    /// Largest `|c|` seen on the samples, for comparison with `γ`.
    pub max_abs_cost: f64,
}

impl DriftReport {
    pub fn holds(&self) -> bool {
        self.max_violation <= 0.0
    }
}

pub fn check_lyapunov_drift(model: &ModelSpec, lyap: &LyapunovSpec, samples: &[Vec<f64>]) -> Result<DriftReport> {
    if samples.is_empty() {
        return Err(Error::config("Lyapunov check needs at least one sample point"));
    }
    let ell = match &lyap.mode {
        LyapunovMode::UnboundedCost { ell: None } => {
            return Err(Error::config("unbounded-cost Lyapunov mode requires the function ell"));
        }
        LyapunovMode::UnboundedCost { ell: Some(f) } => Some(f.clone()),
        LyapunovMode::BoundedCost { .. } => None,
    };

    let d = model.dim();
    let mut a = vec![0.0; d];
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut dest = vec![0.0; d];

    let mut max_violation = f64::NEG_INFINITY;
    let mut violating_points = Vec::new();
    let mut max_abs_cost: f64 = 0.0;

    for x in samples {
        if x.len() != d {
            return Err(Error::config(format!("sample {x:?} has wrong dimension (expected {d})")));
        }
        let v = (lyap.value)(x);
        if !(v.is_finite() && v >= 1.0) {
            return Err(Error::config(format!("Lyapunov function must be finite and >= 1, got {v} at {x:?}")));
        }
        (lyap.gradient)(x, &mut grad);
        (lyap.hessian)(x, &mut hess);
        model.diffusion(x, &mut a)?;
        let second_order: f64 = (0..d).map(|k| a[k] * hess[k * d + k]).sum();
        let indicator = if lyap.in_compact(x) { lyap.c_hat } else { 0.0 };
        let rhs = match (&lyap.mode, &ell) {
            (LyapunovMode::BoundedCost { gamma }, _) => indicator - gamma * v,
            (_, Some(ell)) => indicator - ell(x) * v,
            _ => unreachable!(),
        };

        for action in 0..model.actions().len() {
            let c = model.cost(x, action)?;
            max_abs_cost = max_abs_cost.max(c.abs());
            if let Some(ell) = &ell {
                if !(ell(x) - c).is_finite() {
                    return Err(Error::Evaluation { component: "ell - c", point: x.clone() });
                }
            }
            model.effective_drift_into(x, action, &mut b, &mut scratch)?;
            let mut jump = 0.0;
            for (j, atom) in model.kernel().atoms().iter().enumerate() {
                model.jump(x, action, j, &mut scratch)?;
                for k in 0..d {
                    dest[k] = x[k] + scratch[k];
                }
                let vd = (lyap.value)(&dest);
                if !vd.is_finite() {
                    return Err(Error::Evaluation { component: "Lyapunov function at jump destination", point: dest.clone() });
                }
                jump += atom.weight * (vd - v);
            }
            let transport: f64 = b.iter().zip(&grad).map(|(bi, gi)| bi * gi).sum();
            let lhs = second_order + jump + transport;
            let violation = lhs - rhs;
            max_violation = max_violation.max(violation);
            if violation > 0.0 {
                violating_points.push(DriftViolation { point: x.clone(), action, violation });
            }
        }
    }

    Ok(DriftReport { max_violation, violating_points, samples_checked: samples.len(), max_abs_cost })
}

/// `count` points with `r_min < |x| < r_max`: isotropic directions, radii uniform.
pub fn shell_samples(dim: usize, r_min: f64, r_max: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let r = r_min + (r_max - r_min) * rng.random::<f64>();
        if r > r_min {
            out.push(dir.iter().map(|v| v / norm * r).collect());
        }
    }
    out
}
