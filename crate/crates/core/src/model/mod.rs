//! Problem data for a controlled jump diffusion
//!
//! ```text
//! dX = b∘(X, Z) dt + σ(X) dW + ∫ g(X-, Z, ξ) Ñ(dt, dξ)
//! ```
//!
//! with a finite characteristic measure `Π = Σ_j w_j δ_{ξ_j}`. The generator of
//! the process under a fixed action is
//!
//! ```text
//! A u(x, ζ) = tr(a ∇²u) + Σ_j w_j (u(x + g(x, ζ, ξ_j)) - u(x)) + b(x, ζ)·∇u
//! ```
//!
//! where `a = ½σσᵀ` and `b = b∘ - Σ_j w_j g(x, ζ, ξ_j)` is the compensated
//! drift. Diffusion matrices are restricted to be diagonal.

pub mod catalog;
mod lyapunov;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use lyapunov::{check_lyapunov_drift, shell_samples, DriftReport, DriftViolation, LyapunovMode, LyapunovSpec, VectorFn};

/// `(x, action payload, out)`: writes `b∘(x, ζ)` into `out`.
pub type DriftFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(x, out)`: writes the diagonal of `a(x)` into `out`.
pub type DiffusionFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
/// `(x, action payload, mark, out)`: writes the displacement `g(x, ζ, ξ)` into `out`.
pub type JumpMapFn = Arc<dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync>;
/// `(x, action payload) -> c(x, ζ)`.
pub type CostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// Scalar function of the state.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A labelled control value. The payload is handed verbatim to the model closures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub label: String,
    pub payload: Vec<f64>,
}

impl Action {
    pub fn new(label: impl Into<String>, payload: Vec<f64>) -> Self {
        Self { label: label.into(), payload }
    }
}

/// Finite, ordered action set. Order matters: ties in the Hamiltonian are
/// broken towards the smallest index.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    actions: Vec<Action>,
}

impl ActionSet {
    pub fn new(actions: Vec<Action>) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::config("action set must not be empty"));
        }
        for (i, a) in actions.iter().enumerate() {
            if actions[..i].iter().any(|b| b.label == a.label) {
                return Err(Error::config(format!("duplicate action label {:?}", a.label)));
            }
        }
        Ok(Self { actions })
    }

    /// A single unlabelled action with an empty payload.
    pub fn single() -> Self {
        Self { actions: vec![Action::new("none", Vec::new())] }
    }

    /// One action per scalar payload, labelled by its value.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Action::new(format!("{v}"), vec![v])).collect())
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Action> {
        self.actions.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter()
    }

    pub(crate) fn payload(&self, index: usize) -> &[f64] {
        &self.actions[index].payload
    }
}

/// A point mass of the characteristic measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub mark: Vec<f64>,
    pub weight: f64,
}

/// Finite jump measure given as atoms, together with the jump map `g`.
#[derive(Clone)]
pub struct JumpKernel {
    atoms: Vec<Atom>,
    map: JumpMapFn,
    total_mass: f64,
}

impl JumpKernel {
    pub fn new(atoms: Vec<Atom>, map: JumpMapFn) -> Result<Self> {
        let mut total_mass = 0.0;
        for a in &atoms {
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(Error::config(format!("atom weight {} must be finite and nonnegative", a.weight)));
            }
            total_mass += a.weight;
        }
        Ok(Self { atoms, map, total_mass })
    }

    /// Kernel without atoms.
    pub fn none() -> Self {
        Self { atoms: Vec::new(), map: Arc::new(|_, _, _, out| out.fill(0.0)), total_mass: 0.0 }
    }

    /// Atoms whose mark is the displacement itself: `g(x, ζ, ξ) = ξ`.
    pub fn translation(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms, Arc::new(|_, _, mark, out| out.copy_from_slice(mark)))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `ν̄ = Σ_j w_j`, the constant jump intensity.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Same kernel with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let atoms = self.atoms.iter().map(|a| Atom { mark: a.mark.clone(), weight: a.weight * factor }).collect();
        Self::new(atoms, self.map.clone())
    }

    pub(crate) fn displacement(&self, x: &[f64], action: &[f64], atom: usize, out: &mut [f64]) -> Result<()> {
        (self.map)(x, action, &self.atoms[atom].mark, out);
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Evaluation { component: "jump map", point: x.to_vec() })
        }
    }
}

impl fmt::Debug for JumpKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpKernel").field("atoms", &self.atoms).field("total_mass", &self.total_mass).finish()
    }
}

/// The controlled jump-diffusion problem. Immutable once built; cloning is cheap.
#[derive(Clone)]
pub struct ModelSpec {
    name: String,
    dim: usize,
    drift: DriftFn,
    diffusion: DiffusionFn,
    kernel: JumpKernel,
    cost: CostFn,
    actions: ActionSet,
    sense: Sense,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("kernel", &self.kernel)
            .field("actions", &self.actions)
            .field("sense", &self.sense)
            .finish_non_exhaustive()
    }
}

/// Builder for [`ModelSpec`]. Defaults: zero drift, `a = ½ I`, no jumps,
/// zero cost, a single action, minimization.
pub struct ModelBuilder {
    spec: ModelSpec,
}

impl ModelBuilder {
    pub fn name(mut self, name: impl Into<String>) -> Self {
        self.spec.name = name.into();
        self
    }

    pub fn drift(mut self, f: impl Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.spec.drift = Arc::new(f);
        self
    }

    pub fn diffusion(mut self, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.spec.diffusion = Arc::new(f);
        self
    }

    /// Constant diagonal `a = value · I`.
    pub fn constant_diffusion(self, value: f64) -> Self {
        self.diffusion(move |_, out| out.fill(value))
    }

    pub fn kernel(mut self, kernel: JumpKernel) -> Self {
        self.spec.kernel = kernel;
        self
    }

    pub fn cost(mut self, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.spec.cost = Arc::new(f);
        self
    }

    pub fn actions(mut self, actions: ActionSet) -> Self {
        self.spec.actions = actions;
        self
    }

    pub fn sense(mut self, sense: Sense) -> Self {
        self.spec.sense = sense;
        self
    }

    pub fn build(self) -> Result<ModelSpec> {
        if !(1..=2).contains(&self.spec.dim) {
            return Err(Error::config(format!("dimension {} not supported (1 or 2)", self.spec.dim)));
        }
        Ok(self.spec)
    }
}

impl ModelSpec {
    pub fn builder(dim: usize) -> ModelBuilder {
        ModelBuilder {
            spec: ModelSpec {
                name: "custom".into(),
                dim,
                drift: Arc::new(|_, _, out| out.fill(0.0)),
                diffusion: Arc::new(|_, out| out.fill(0.5)),
                kernel: JumpKernel::none(),
                cost: Arc::new(|_, _| 0.0),
                actions: ActionSet::single(),
                sense: Sense::Minimize,
            },
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.kernel
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn with_sense(&self, sense: Sense) -> Self {
        Self { sense, ..self.clone() }
    }

    pub fn with_cost(&self, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { cost: Arc::new(f), ..self.clone() }
    }

    pub fn with_kernel(&self, kernel: JumpKernel) -> Self {
        Self { kernel, ..self.clone() }
    }

    /// Same model with `c + shift`.
    pub fn shifted_cost(&self, shift: f64) -> Self {
        let cost = self.cost.clone();
        self.with_cost(move |x, z| cost(x, z) + shift)
    }

    pub fn base_drift(&self, x: &[f64], action: usize, out: &mut [f64]) -> Result<()> {
        (self.drift)(x, self.actions.payload(action), out);
        finite_or(out, "drift", x)
    }

    /// Diagonal of `a(x)`; every entry must be strictly positive.
    pub fn diffusion(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.diffusion)(x, out);
        finite_or(out, "diffusion", x)?;
        if out.iter().any(|&v| v <= 0.0) {
            return Err(Error::config(format!("diffusion must be positive definite, got {out:?} at x = {x:?}")));
        }
        Ok(())
    }

    pub fn cost(&self, x: &[f64], action: usize) -> Result<f64> {
        let c = (self.cost)(x, self.actions.payload(action));
        if c.is_finite() {
            Ok(c)
        } else {
            Err(Error::Evaluation { component: "cost", point: x.to_vec() })
        }
    }

    pub(crate) fn jump(&self, x: &[f64], action: usize, atom: usize, out: &mut [f64]) -> Result<()> {
        self.kernel.displacement(x, self.actions.payload(action), atom, out)
    }

    /// Compensated drift `b(x, ζ) = b∘(x, ζ) - Σ_j w_j g(x, ζ, ξ_j)`.
    pub fn effective_drift(&self, x: &[f64], action: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        let mut scratch = vec![0.0; self.dim];
        self.effective_drift_into(x, action, &mut out, &mut scratch)?;
        Ok(out)
    }

    pub(crate) fn effective_drift_into(&self, x: &[f64], action: usize, out: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        self.base_drift(x, action, out)?;
        for (j, atom) in self.kernel.atoms.iter().enumerate() {
            self.jump(x, action, j, scratch)?;
            for (o, g) in out.iter_mut().zip(scratch.iter()) {
                *o -= atom.weight * g;
            }
        }
        Ok(())
    }

    pub(crate) fn check_action(&self, action: usize) -> Result<()> {
        if action < self.actions.len() {
            Ok(())
        } else {
            Err(Error::config(format!("action index {action} out of range ({} actions)", self.actions.len())))
        }
    }
}

fn finite_or(values: &[f64], component: &'static str, x: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Evaluation { component, point: x.to_vec() })
    }
}
