//! Euler-Maruyama integration of the controlled system with first-hit
//! detection and `L_q` energy accounting.
//!
//! Stabilization integrates `dx = f(x) dt + u(x) dB`. Synchronization
//! co-integrates a drift-only leader `dx = f(x) dt` with a follower
//! `dy = f(y) dt + u(y - x) dB`. Drift-channel laws replace `dB` by `-dt`.

use serde::{Deserialize, Serialize};

use crate::controllers::{Channel, ControlLaw, ControllerSpec};
use crate::error::{Error, Result};
use crate::models::{Dynamics, Model};
use crate::noise::IncrementStream;
use crate::state::{norm, StateVector};

/// States with a norm above this abort the realization as a blowup.
pub const BLOWUP_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    pub eps_stop: f64,
    pub q: f64,
    pub seed: u64,
    #[serde(default)]
    pub realization_index: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 1e-5, t_max: 10.0, eps_stop: 1e-4, q: 0.5, seed: 0, realization_index: 0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: String| Err(Error::param(name, reason));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", format!("must be > 0, got {}", self.dt));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return bad("t_max", format!("must be > 0, got {}", self.t_max));
        }
        if self.dt >= self.t_max {
            return bad("dt", format!("must be < t_max ({}), got {}", self.t_max, self.dt));
        }
        if !(self.eps_stop > 0.0 && self.eps_stop < 1.0) {
            return bad("eps_stop", format!("must lie in (0, 1), got {}", self.eps_stop));
        }
        if !(self.q.is_finite() && self.q > 0.0) {
            return bad("q", format!("must be > 0, got {}", self.q));
        }
        Ok(())
    }

    /// Number of steps that fit in `[0, t_max]`.
    pub fn max_steps(&self) -> u64 {
        let n = self.t_max / self.dt;
        let r = n.round();
        if (n - r).abs() <= 1e-9 * r.max(1.0) {
            r as u64
        } else {
            n.floor() as u64
        }
    }

    pub fn for_realization(self, realization_index: u64) -> Self {
        SimConfig { realization_index, ..self }
    }
}

/// Result of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub hit: bool,
    /// First hitting step times `dt` when `hit`; elapsed time otherwise.
    pub tau: f64,
    pub energy_q: f64,
    pub ball_crossings: u64,
    pub censored: bool,
    pub steps: u64,
    /// Follower (or controlled) state when the run stopped.
    pub final_state: StateVector,
}

/// Snapshot handed to observers after every accepted step.
#[derive(Debug)]
pub struct StepRecord<'a> {
    pub step: u64,
    pub t: f64,
    /// Controlled state (`x` when stabilizing, the follower `y` when synchronizing).
    pub state: &'a [f64],
    pub leader: Option<&'a [f64]>,
    /// Norm of the quantity driven to zero (`‖x‖` or `‖y - x‖`).
    pub error_norm: f64,
    /// Brownian increment used for this step (0 for drift-channel laws).
    pub increment: f64,
    pub energy: f64,
}

/// `x + f·dt + u·dB`, with `dB` shared by every component.
pub fn em_step(
    x: &StateVector,
    f_val: &StateVector,
    u_val: &StateVector,
    dt: f64,
    d_b: f64,
    step: u64,
) -> Result<StateVector> {
    let mut out = x.clone();
    em_step_in_place(out.as_mut_slice(), f_val.as_slice(), u_val.as_slice(), dt, d_b);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Blowup { step })
    }
}

#[inline]
fn em_step_in_place(x: &mut [f64], f_val: &[f64], u_val: &[f64], dt: f64, d_b: f64) {
    for ((xi, fi), ui) in x.iter_mut().zip(f_val).zip(u_val) {
        *xi += fi * dt + ui * d_b;
    }
}

#[inline]
fn diverged(x: &[f64]) -> bool {
    let n = norm(x);
    !(n.is_finite() && n <= BLOWUP_NORM)
}

fn integrate<N, O>(
    dynamics: &dyn Dynamics,
    law: &dyn ControlLaw,
    start: &[f64],
    leader_start: Option<&[f64]>,
    cfg: &SimConfig,
    noise: &mut N,
    mut observer: O,
) -> Result<RunOutcome>
where
    N: Iterator<Item = f64>,
    O: FnMut(&StepRecord<'_>),
{
    let n = start.len();
    let dt = cfg.dt;
    let q = cfg.q;
    let n_max = cfg.max_steps();

    let mut y = start.to_vec();
    let mut leader = leader_start.map(<[f64]>::to_vec);
    let mut err = vec![0.0; n];
    let mut fy = vec![0.0; n];
    let mut fx = vec![0.0; n];
    let mut u = vec![0.0; n];

    let fill_error = |err: &mut [f64], y: &[f64], leader: &Option<Vec<f64>>| match leader {
        Some(x) => {
            for ((e, yi), xi) in err.iter_mut().zip(y).zip(x) {
                *e = yi - xi;
            }
        }
        None => err.copy_from_slice(y),
    };

    fill_error(&mut err, &y, &leader);
    let mut r = norm(&err);
    if r <= cfg.eps_stop {
        return Ok(RunOutcome {
            hit: true,
            tau: 0.0,
            energy_q: 0.0,
            ball_crossings: 0,
            censored: false,
            steps: 0,
            final_state: StateVector::from(y),
        });
    }

    let mut outside = r >= 1.0;
    let mut crossings = 0u64;
    let mut energy = 0.0;

    for step in 1..=n_max {
        law.eval_into(&err, &mut u);
        let u_norm = norm(&u);
        if u_norm > 0.0 {
            energy += u_norm.powf(q) * dt;
        }

        dynamics.eval_into(&y, &mut fy);
        let d_b = match law.channel() {
            Channel::Diffusion => noise.next().expect("noise stream exhausted"),
            Channel::Drift => -dt,
        };
        em_step_in_place(&mut y, &fy, &u, dt, d_b);
        if let Some(x) = leader.as_mut() {
            dynamics.eval_into(x, &mut fx);
            for (xi, fi) in x.iter_mut().zip(&fx) {
                *xi += fi * dt;
            }
            if diverged(x) {
                return Err(Error::Blowup { step });
            }
        }
        if diverged(&y) {
            return Err(Error::Blowup { step });
        }

        fill_error(&mut err, &y, &leader);
        r = norm(&err);
        if (outside && r < 1.0) || (!outside && r > 1.0) {
            outside = !outside;
            crossings += 1;
        }

        observer(&StepRecord {
            step,
            t: step as f64 * dt,
            state: &y,
            leader: leader.as_deref(),
            error_norm: r,
            increment: if law.channel() == Channel::Diffusion { d_b } else { 0.0 },
            energy,
        });

        if r <= cfg.eps_stop {
            return Ok(RunOutcome {
                hit: true,
                tau: (step as f64 * dt).min(cfg.t_max),
                energy_q: energy,
                ball_crossings: crossings,
                censored: false,
                steps: step,
                final_state: StateVector::from(y),
            });
        }
    }

    Ok(RunOutcome {
        hit: false,
        tau: n_max as f64 * dt,
        energy_q: energy,
        ball_crossings: crossings,
        censored: true,
        steps: n_max,
        final_state: StateVector::from(y),
    })
}

fn checked_law(ctrl: &ControllerSpec, cfg: &SimConfig) -> Result<std::sync::Arc<dyn ControlLaw>> {
    cfg.validate()?;
    ctrl.validate()?;
    ctrl.law()
}

/// Integrates one stabilization realization with an explicit noise source.
pub fn simulate_stabilization_with<N, O>(
    model: &Model,
    ctrl: &ControllerSpec,
    x0: &StateVector,
    cfg: &SimConfig,
    noise: &mut N,
    observer: O,
) -> Result<RunOutcome>
where
    N: Iterator<Item = f64>,
    O: FnMut(&StepRecord<'_>),
{
    let law = checked_law(ctrl, cfg)?;
    model.check_dim(x0)?;
    integrate(model.dynamics.as_ref(), law.as_ref(), x0.as_slice(), None, cfg, noise, observer)
}

pub fn simulate_stabilization(
    model: &Model,
    ctrl: &ControllerSpec,
    x0: &StateVector,
    cfg: &SimConfig,
) -> Result<RunOutcome> {
    let mut noise = IncrementStream::new(cfg.seed, cfg.realization_index, cfg.dt);
    simulate_stabilization_with(model, ctrl, x0, cfg, &mut noise, |_| {})
}

/// Integrates one synchronization realization with an explicit noise source.
pub fn simulate_synchronization_with<N, O>(
    model: &Model,
    ctrl: &ControllerSpec,
    x0: &StateVector,
    y0: &StateVector,
    cfg: &SimConfig,
    noise: &mut N,
    observer: O,
) -> Result<RunOutcome>
where
    N: Iterator<Item = f64>,
    O: FnMut(&StepRecord<'_>),
{
    let law = checked_law(ctrl, cfg)?;
    model.check_dim(x0)?;
    model.check_dim(y0)?;
    integrate(
        model.dynamics.as_ref(),
        law.as_ref(),
        y0.as_slice(),
        Some(x0.as_slice()),
        cfg,
        noise,
        observer,
    )
}

pub fn simulate_synchronization(
    model: &Model,
    ctrl: &ControllerSpec,
    x0: &StateVector,
    y0: &StateVector,
    cfg: &SimConfig,
) -> Result<RunOutcome> {
    let mut noise = IncrementStream::new(cfg.seed, cfg.realization_index, cfg.dt);
    simulate_synchronization_with(model, ctrl, x0, y0, cfg, &mut noise, |_| {})
}
