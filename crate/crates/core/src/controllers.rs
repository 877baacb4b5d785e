//! Feedback control laws.
//!
//! Three schemes share the [`ControlLaw`] trait:
//!
//! * `stochastic_norm`: `u(x) = kx` for `‖x‖ ≥ 1`, `k‖x‖^{α-1}x` inside the unit
//!   ball, injected through the Brownian channel (`u(x) dB`).
//! * `deterministic_norm`: the same `u(x)` applied as a drift, `-u(x) dt`.
//! * `deterministic_componentwise`: `v_i(x) = kx_i` for `‖x‖ > 1`,
//!   `k sgn(x_i)|x_i|^α` otherwise, applied as `-v(x) dt`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{norm, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    StochasticNorm,
    DeterministicNorm,
    DeterministicComponentwise,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::StochasticNorm,
        Scheme::DeterministicNorm,
        Scheme::DeterministicComponentwise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::StochasticNorm => "stochastic_norm",
            Scheme::DeterministicNorm => "deterministic_norm",
            Scheme::DeterministicComponentwise => "deterministic_componentwise",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Scheme::StochasticNorm)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic_norm" | "stochastic" => Ok(Scheme::StochasticNorm),
            "deterministic_norm" | "deterministic" => Ok(Scheme::DeterministicNorm),
            "deterministic_componentwise" => Ok(Scheme::DeterministicComponentwise),
            other => Err(Error::UnknownScheme(other.to_string())),
        }
    }
}

/// Scheme, coupling gain `k` and steepness exponent `α`.
///
/// `k = 0` is accepted and means "no control"; it is used for uncoupled
/// reference runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub scheme: Scheme,
    pub k: f64,
    pub alpha: f64,
}

impl ControllerSpec {
    pub fn new(scheme: Scheme, k: f64, alpha: f64) -> Result<Self> {
        let spec = ControllerSpec { scheme, k, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn stochastic(k: f64, alpha: f64) -> Result<Self> {
        Self::new(Scheme::StochasticNorm, k, alpha)
    }

    pub fn deterministic(k: f64, alpha: f64) -> Result<Self> {
        Self::new(Scheme::DeterministicNorm, k, alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::param("k", format!("must be finite and >= 0, got {}", self.k)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        Ok(())
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        ControllerSpec { scheme, ..self }
    }

    pub fn with_gain(self, k: f64) -> Self {
        ControllerSpec { k, ..self }
    }

    /// Builds the law through the default registry.
    pub fn law(&self) -> Result<Arc<dyn ControlLaw>> {
        ControllerRegistry::default().create(self.scheme.name(), self.k, self.alpha)
    }
}

/// How the control enters the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// `+ u(x) dB`
    Diffusion,
    /// `- u(x) dt`
    Drift,
}

pub trait ControlLaw: Send + Sync + fmt::Debug {
    fn scheme(&self) -> Scheme;

    fn channel(&self) -> Channel;

    fn gain(&self) -> f64;

    fn alpha(&self) -> f64;

    /// Writes the control vector for state `x` into `out`.
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    /// `‖u(x)‖` without materialising the vector where the law allows it.
    fn magnitude(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; x.len()];
        self.eval_into(x, &mut buf);
        norm(&buf)
    }
}

/// Radial factor `s(r)` with `u(x) = s(‖x‖)·x`.
#[inline]
fn radial_factor(k: f64, alpha: f64, r: f64) -> f64 {
    if r >= 1.0 {
        k
    } else if r > 0.0 {
        k * ((alpha - 1.0) * r.ln()).exp()
    } else {
        0.0
    }
}

#[inline]
fn radial_magnitude(k: f64, alpha: f64, r: f64) -> f64 {
    if r >= 1.0 {
        k * r
    } else if r > 0.0 {
        k * (alpha * r.ln()).exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct NormLaw {
    k: f64,
    alpha: f64,
    channel: Channel,
}

impl NormLaw {
    pub fn stochastic(k: f64, alpha: f64) -> Self {
        NormLaw { k, alpha, channel: Channel::Diffusion }
    }

    pub fn deterministic(k: f64, alpha: f64) -> Self {
        NormLaw { k, alpha, channel: Channel::Drift }
    }
}

impl ControlLaw for NormLaw {
    fn scheme(&self) -> Scheme {
        match self.channel {
            Channel::Diffusion => Scheme::StochasticNorm,
            Channel::Drift => Scheme::DeterministicNorm,
        }
    }

    fn channel(&self) -> Channel {
        self.channel
    }

    fn gain(&self) -> f64 {
        self.k
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let s = radial_factor(self.k, self.alpha, norm(x));
        for (o, xi) in out.iter_mut().zip(x) {
            *o = s * xi;
        }
    }

    fn magnitude(&self, x: &[f64]) -> f64 {
        radial_magnitude(self.k, self.alpha, norm(x))
    }
}

#[derive(Debug, Clone)]
pub struct ComponentwiseLaw {
    k: f64,
    alpha: f64,
}

impl ComponentwiseLaw {
    pub fn new(k: f64, alpha: f64) -> Self {
        ComponentwiseLaw { k, alpha }
    }
}

/// `sgn(0) = 0`.
#[inline]
fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl ControlLaw for ComponentwiseLaw {
    fn scheme(&self) -> Scheme {
        Scheme::DeterministicComponentwise
    }

    fn channel(&self) -> Channel {
        Channel::Drift
    }

    fn gain(&self) -> f64 {
        self.k
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        if norm(x) > 1.0 {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = self.k * xi;
            }
        } else {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = self.k * sgn(*xi) * xi.abs().powf(self.alpha);
            }
        }
    }
}

pub type ControllerFactory = fn(k: f64, alpha: f64) -> Arc<dyn ControlLaw>;

/// Name → factory table for control laws.
#[derive(Clone)]
pub struct ControllerRegistry {
    factories: BTreeMap<String, ControllerFactory>,
}

impl ControllerRegistry {
    pub fn empty() -> Self {
        ControllerRegistry { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &str, factory: ControllerFactory) -> &mut Self {
        self.factories.insert(name.to_string(), factory);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, name: &str, k: f64, alpha: f64) -> Result<Arc<dyn ControlLaw>> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| Error::UnknownScheme(name.to_string()))?;
        Ok(factory(k, alpha))
    }
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        let mut reg = ControllerRegistry::empty();
        reg.register(Scheme::StochasticNorm.name(), |k, a| Arc::new(NormLaw::stochastic(k, a)))
            .register(Scheme::DeterministicNorm.name(), |k, a| {
                Arc::new(NormLaw::deterministic(k, a))
            })
            .register(Scheme::DeterministicComponentwise.name(), |k, a| {
                Arc::new(ComponentwiseLaw::new(k, a))
            });
        reg
    }
}

impl fmt::Debug for ControllerRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

/// The norm-based controller `u(x)`.
///
/// Defined for the `stochastic_norm` and `deterministic_norm` schemes; the
/// scheme only decides how the vector is injected.
pub fn control_u(spec: &ControllerSpec, x: &StateVector) -> StateVector {
    let mut out = StateVector::zeros(x.dim());
    NormLaw::stochastic(spec.k, spec.alpha).eval_into(x.as_slice(), out.as_mut_slice());
    out
}

/// The componentwise controller `v(x)`.
pub fn control_v(spec: &ControllerSpec, x: &StateVector) -> StateVector {
    let mut out = StateVector::zeros(x.dim());
    ComponentwiseLaw::new(spec.k, spec.alpha).eval_into(x.as_slice(), out.as_mut_slice());
    out
}

/// `‖u(x)‖` for the spec's scheme.
pub fn control_norm(spec: &ControllerSpec, x: &StateVector) -> f64 {
    match spec.scheme {
        Scheme::DeterministicComponentwise => {
            ComponentwiseLaw::new(spec.k, spec.alpha).magnitude(x.as_slice())
        }
        _ => radial_magnitude(spec.k, spec.alpha, x.norm()),
    }
}
