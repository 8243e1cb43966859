//! Single-path stepping: Euler steps of the compensated diffusion between the
//! epochs of a constant-rate exponential clock, with jumps applied at the epochs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use super::Control;
use crate::error::Result;
use crate::model::ModelSpec;
use crate::stats::CompensatedSum;

/// What the observer sees after every Euler substep and every jump.
pub(crate) struct Event<'a> {
    pub t: f64,
    pub x: &'a [f64],
    /// Action in force during the step (or at the pre-jump state).
    pub action: usize,
    pub is_jump: bool,
    /// Index of the checkpoint landed on exactly, if any.
    pub checkpoint: Option<usize>,
    pub cost_integral: f64,
}

pub(crate) enum Flow {
    Continue,
    Stop,
}

pub(crate) enum PathEnd {
    Completed,
    Stopped,
    BlowUp(f64),
}

pub(crate) struct Engine<'m> {
    model: &'m ModelSpec,
    control: &'m Control,
    b: Vec<f64>,
    g: Vec<f64>,
    a: Vec<f64>,
    noise: Vec<f64>,
}

impl<'m> Engine<'m> {
    pub fn new(model: &'m ModelSpec, control: &'m Control) -> Self {
        let d = model.dim();
        Self { model, control, b: vec![0.0; d], g: vec![0.0; d], a: vec![0.0; d], noise: vec![0.0; d] }
    }

    /// Runs from `x0` at time 0 up to `t_end`, landing exactly on every
    /// checkpoint (ascending, `≤ t_end`).
    pub fn run<F>(&mut self, x0: &[f64], dt: f64, t_end: f64, checkpoints: &[f64], rng: &mut ChaCha8Rng, mut observe: F) -> Result<PathEnd>
    where
        F: FnMut(Event<'_>) -> Flow,
    {
        let model = self.model;
        let d = model.dim();
        let rate = model.kernel().total_mass();
        let mut x = x0.to_vec();
        let mut t = 0.0;
        let mut cost = CompensatedSum::default();
        let mut next_jump = if rate > 0.0 { rng.sample::<f64, _>(Exp1) / rate } else { f64::INFINITY };
        let mut next_check = 0;

        while t < t_end {
            let action = self.control.action_at(&x);
            let mut target = (t + dt).min(t_end);
            let mut hits_check = None;
            if let Some(&c) = checkpoints.get(next_check) {
                if c <= target {
                    target = c;
                    hits_check = Some(next_check);
                }
            }
            let jumps = next_jump <= target;
            if jumps {
                if next_jump < target {
                    hits_check = None;
                }
                target = next_jump;
            }

            let h = target - t;
            if h > 0.0 {
                model.effective_drift_into(&x, action, &mut self.b, &mut self.g)?;
                model.diffusion(&x, &mut self.a)?;
                cost.add(model.cost(&x, action)? * h);
                let sqrt_h = h.sqrt();
                for k in 0..d {
                    self.noise[k] = rng.sample(StandardNormal);
                }
                for k in 0..d {
                    x[k] += self.b[k] * h + (2.0 * self.a[k]).sqrt() * sqrt_h * self.noise[k];
                }
            }
            t = target;
            if let Some(c) = hits_check {
                t = checkpoints[c];
                next_check += 1;
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Ok(PathEnd::BlowUp(t));
            }
            let flow = observe(Event { t, x: &x, action, is_jump: false, checkpoint: hits_check, cost_integral: cost.value() });
            if let Flow::Stop = flow {
                return Ok(PathEnd::Stopped);
            }

            if jumps {
                let pre_action = self.control.action_at(&x);
                let atom = pick_atom(model, rate, rng);
                model.jump(&x, pre_action, atom, &mut self.g)?;
                for k in 0..d {
                    x[k] += self.g[k];
                }
                next_jump = t + rng.sample::<f64, _>(Exp1) / rate;
                if !x.iter().all(|v| v.is_finite()) {
                    return Ok(PathEnd::BlowUp(t));
                }
                let flow = observe(Event { t, x: &x, action: pre_action, is_jump: true, checkpoint: None, cost_integral: cost.value() });
                if let Flow::Stop = flow {
                    return Ok(PathEnd::Stopped);
                }
            }
        }
        Ok(PathEnd::Completed)
    }
}

fn pick_atom(model: &ModelSpec, rate: f64, rng: &mut ChaCha8Rng) -> usize {
    let atoms = model.kernel().atoms();
    let u = rng.random::<f64>() * rate;
    let mut acc = 0.0;
    for (j, a) in atoms.iter().enumerate() {
        acc += a.weight;
        if u < acc {
            return j;
        }
    }
    // rounding at the top end: last atom with positive weight
    atoms.iter().rposition(|a| a.weight > 0.0).unwrap_or(0)
}
