//! Drift fields `f(x)` with their one-sided Lipschitz constants.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ecosystem::{draw_ecosystem, RandomEcosystemDraw};
use crate::error::{Error, Result};
use crate::state::{dot, StateVector};

/// The constant `L` in `⟨x, f(x)⟩ ≤ L‖x‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lipschitz {
    /// Holds for the state itself.
    OneSided(f64),
    /// Holds only for the synchronization error `z = y - x`, i.e.
    /// `⟨z, f(z + x) - f(x)⟩ ≤ L‖z‖²` for every `x`.
    SyncError(f64),
    Unavailable,
}

impl Lipschitz {
    pub fn value(self) -> Option<f64> {
        match self {
            Lipschitz::OneSided(l) | Lipschitz::SyncError(l) => Some(l),
            Lipschitz::Unavailable => None,
        }
    }
}

pub trait Dynamics: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// Writes `f(x)` into `out`; both slices have length [`Dynamics::dim`].
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn lipschitz(&self) -> Lipschitz;

    fn ecosystem(&self) -> Option<&RandomEcosystemDraw> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct Linear1d {
    pub l: f64,
}

impl Dynamics for Linear1d {
    fn name(&self) -> &'static str {
        "linear1d"
    }
    fn dim(&self) -> usize {
        1
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.l * x[0];
    }
    fn lipschitz(&self) -> Lipschitz {
        Lipschitz::OneSided(self.l)
    }
}

/// `f(x) = -Cx + A g(x)`, `g(x) = [tanh x₁, tanh 2x₂]`.
#[derive(Debug, Clone)]
pub struct Neural2d;

impl Dynamics for Neural2d {
    fn name(&self) -> &'static str {
        "neural2d"
    }
    fn dim(&self) -> usize {
        2
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let (x1, x2) = (x[0], x[1]);
        let (g1, g2) = (x1.tanh(), (2.0 * x2).tanh());
        out[0] = -(x1 + 2.0 * x2) + 3.0 * g1 + 3.0 * g2;
        out[1] = -(3.0 * x1 + 4.0 * x2) + g1 + 3.0 * g2;
    }
    fn lipschitz(&self) -> Lipschitz {
        Lipschitz::OneSided(8.0)
    }
}

/// `f(x) = Cx` for a random community matrix.
#[derive(Debug, Clone)]
pub struct MayEcosystem {
    pub draw: RandomEcosystemDraw,
}

impl Dynamics for MayEcosystem {
    fn name(&self) -> &'static str {
        "may_ecosystem"
    }
    fn dim(&self) -> usize {
        self.draw.n
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (row, o) in self.draw.matrix.chunks_exact(self.draw.n).zip(out.iter_mut()) {
            *o = dot(row, x);
        }
    }
    fn lipschitz(&self) -> Lipschitz {
        Lipschitz::OneSided(self.draw.eta_max_empirical)
    }
    fn ecosystem(&self) -> Option<&RandomEcosystemDraw> {
        Some(&self.draw)
    }
}

#[derive(Debug, Clone)]
pub struct HindmarshRose {
    pub epsilon: f64,
}

impl Dynamics for HindmarshRose {
    fn name(&self) -> &'static str {
        "hindmarsh_rose"
    }
    fn dim(&self) -> usize {
        3
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        let x1sq = x1 * x1;
        out[0] = x2 - x1sq * x1 + 3.0 * x1sq - x3 + 3.0;
        out[1] = 1.0 - 5.0 * x1sq - x2;
        out[2] = self.epsilon * (4.0 * x1 + 6.4 - x3);
    }
    fn lipschitz(&self) -> Lipschitz {
        // the error drift f(z + x) - f(x) is not one-sided Lipschitz in z
        Lipschitz::Unavailable
    }
}

#[derive(Debug, Clone)]
pub struct Lorenz {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Dynamics for Lorenz {
    fn name(&self) -> &'static str {
        "lorenz"
    }
    fn dim(&self) -> usize {
        3
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let (x1, x2, x3) = (x[0], x[1], x[2]);
        out[0] = self.sigma * (x2 - x1);
        out[1] = self.rho * x1 - x3 * x1 - x2;
        out[2] = x1 * x2 - self.beta * x3;
    }
    fn lipschitz(&self) -> Lipschitz {
        // ⟨x, f(x)⟩ = (σ+ρ)x₁x₂ - σx₁² - x₂² - βx₃² ≤ (σ+ρ)/2 ‖x‖²
        Lipschitz::OneSided(0.5 * (self.sigma + self.rho))
    }
}

/// `ẋ₁ = cos x₂`, `ẋ₂ = sin x₁`.
#[derive(Debug, Clone)]
pub struct Trig2d;

impl Dynamics for Trig2d {
    fn name(&self) -> &'static str {
        "trig2d"
    }
    fn dim(&self) -> usize {
        2
    }
    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[1].cos();
        out[1] = x[0].sin();
    }
    fn lipschitz(&self) -> Lipschitz {
        // cos and sin are 1-Lipschitz, so ‖f(z+x) - f(x)‖ ≤ ‖z‖
        Lipschitz::SyncError(1.0)
    }
}

/// Model family name plus parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// Seed for models that draw random structure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ModelSpec {
    pub fn new(name: &str) -> Self {
        ModelSpec { name: name.to_string(), params: BTreeMap::new(), seed: None }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn linear1d(l: f64) -> Self {
        Self::new("linear1d").with_param("L", l)
    }

    pub fn neural2d() -> Self {
        Self::new("neural2d")
    }

    pub fn may_ecosystem(n: usize, r: f64, p: f64, sigma: f64, seed: u64) -> Self {
        Self::new("may_ecosystem")
            .with_param("n", n as f64)
            .with_param("r", r)
            .with_param("p", p)
            .with_param("sigma", sigma)
            .with_seed(seed)
    }

    pub fn hindmarsh_rose(epsilon: f64) -> Self {
        Self::new("hindmarsh_rose").with_param("epsilon", epsilon)
    }

    pub fn lorenz(sigma: f64, rho: f64, beta: f64) -> Self {
        Self::new("lorenz")
            .with_param("sigma", sigma)
            .with_param("rho", rho)
            .with_param("beta", beta)
    }

    pub fn trig2d() -> Self {
        Self::new("trig2d")
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn build(&self) -> Result<Model> {
        ModelRegistry::default().build(self)
    }
}

/// A built model: the spec it came from plus its dynamics.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub dynamics: Arc<dyn Dynamics>,
}

impl Model {
    pub fn from_dynamics(spec: ModelSpec, dynamics: Arc<dyn Dynamics>) -> Self {
        Model { spec, dynamics }
    }

    pub fn from_ecosystem(draw: RandomEcosystemDraw) -> Self {
        let spec = ModelSpec::may_ecosystem(draw.n, draw.r, draw.p, draw.sigma, draw.seed);
        Model { spec, dynamics: Arc::new(MayEcosystem { draw }) }
    }

    pub fn dim(&self) -> usize {
        self.dynamics.dim()
    }

    pub fn name(&self) -> &'static str {
        self.dynamics.name()
    }

    pub fn lipschitz(&self) -> Lipschitz {
        self.dynamics.lipschitz()
    }

    pub fn check_dim(&self, x: &StateVector) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        Ok(())
    }
}

pub type ModelFactory = fn(&ModelSpec) -> Result<Arc<dyn Dynamics>>;

/// Name → factory table for drift fields.
#[derive(Clone)]
pub struct ModelRegistry {
    factories: BTreeMap<String, ModelFactory>,
}

impl fmt::Debug for ModelRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

struct Params<'a> {
    spec: &'a ModelSpec,
}

impl<'a> Params<'a> {
    fn allow(spec: &'a ModelSpec, known: &[&str]) -> Result<Self> {
        if let Some(k) = spec.params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::param(
                k,
                format!("not a parameter of `{}` (expected one of {known:?})", spec.name),
            ));
        }
        Ok(Params { spec })
    }

    fn get(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.spec.param(key).unwrap_or(default);
        if !v.is_finite() {
            return Err(Error::param(key, "must be finite"));
        }
        Ok(v)
    }

    fn required(&self, key: &str) -> Result<f64> {
        let v = self
            .spec
            .param(key)
            .ok_or_else(|| Error::param(key, format!("required by `{}`", self.spec.name)))?;
        if !v.is_finite() {
            return Err(Error::param(key, "must be finite"));
        }
        Ok(v)
    }
}

fn build_linear1d(spec: &ModelSpec) -> Result<Arc<dyn Dynamics>> {
    let p = Params::allow(spec, &["L"])?;
    Ok(Arc::new(Linear1d { l: p.get("L", 2.0)? }))
}

fn build_neural2d(spec: &ModelSpec) -> Result<Arc<dyn Dynamics>> {
    Params::allow(spec, &[])?;
    Ok(Arc::new(Neural2d))
}

fn build_may_ecosystem(spec: &ModelSpec) -> Result<Arc<dyn Dynamics>> {
    let p = Params::allow(spec, &["n", "r", "p", "sigma"])?;
    let n = p.required("n")?;
    if n.fract() != 0.0 || n < 2.0 {
        return Err(Error::param("n", format!("must be an integer >= 2, got {n}")));
    }
    let draw = draw_ecosystem(
        n as usize,
        p.get("r", 1.0)?,
        p.get("p", 1.0 / 3.0)?,
        p.get("sigma", 1.0)?,
        spec.seed.unwrap_or(0),
    )?;
    Ok(Arc::new(MayEcosystem { draw }))
}

fn build_hindmarsh_rose(spec: &ModelSpec) -> Result<Arc<dyn Dynamics>> {
    let p = Params::allow(spec, &["epsilon"])?;
    Ok(Arc::new(HindmarshRose { epsilon: p.get("epsilon", 0.005)? }))
}

fn build_lorenz(spec: &ModelSpec) -> Result<Arc<dyn Dynamics>> {
    let p = Params::allow(spec, &["sigma", "rho", "beta"])?;
    Ok(Arc::new(Lorenz {
        sigma: p.get("sigma", 6.0)?,
        rho: p.get("rho", 10.0)?,
        beta: p.get("beta", 3.0)?,
    }))
}

fn build_trig2d(spec: &ModelSpec) -> Result<Arc<dyn Dynamics>> {
    Params::allow(spec, &[])?;
    Ok(Arc::new(Trig2d))
}

impl ModelRegistry {
    pub fn empty() -> Self {
        ModelRegistry { factories: BTreeMap::new() }
    }

    pub fn register(&mut self, name: &str, factory: ModelFactory) -> &mut Self {
        self.factories.insert(name.to_string(), factory);
        self
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &ModelSpec) -> Result<Model> {
        let factory = self
            .factories
            .get(&spec.name)
            .ok_or_else(|| Error::UnknownModel(spec.name.clone()))?;
        Ok(Model { spec: spec.clone(), dynamics: factory(spec)? })
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut reg = ModelRegistry::empty();
        reg.register("linear1d", build_linear1d)
            .register("neural2d", build_neural2d)
            .register("may_ecosystem", build_may_ecosystem)
            .register("hindmarsh_rose", build_hindmarsh_rose)
            .register("lorenz", build_lorenz)
            .register("trig2d", build_trig2d);
        reg
    }
}

pub fn eval_f(model: &Model, x: &StateVector) -> Result<StateVector> {
    model.check_dim(x)?;
    let mut out = StateVector::zeros(model.dim());
    model.dynamics.eval_into(x.as_slice(), out.as_mut_slice());
    Ok(out)
}

pub fn lipschitz_l(model: &Model) -> Lipschitz {
    model.lipschitz()
}

/// `𝒢(x) = ⟨x, f(x)⟩`.
pub fn g_diagnostic(model: &Model, x: &StateVector) -> Result<f64> {
    let f = eval_f(model, x)?;
    Ok(dot(x.as_slice(), f.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f(spec: ModelSpec, x: &[f64]) -> Vec<f64> {
        eval_f(&spec.build().unwrap(), &StateVector::from(x)).unwrap().into_inner()
    }

    #[test]
    fn hand_evaluated_drifts() {
        assert_eq!(f(ModelSpec::lorenz(6.0, 10.0, 3.0), &[0.0, 0.0, 1.0]), vec![0.0, 0.0, -3.0]);
        assert_eq!(f(ModelSpec::neural2d(), &[0.0, 0.0]), vec![0.0, 0.0]);
        let hr = f(ModelSpec::hindmarsh_rose(0.005), &[0.0, 0.0, 0.0]);
        assert_eq!(hr[0], 3.0);
        assert_eq!(hr[1], 1.0);
        assert!((hr[2] - 0.032).abs() < 1e-15);
        assert_eq!(f(ModelSpec::trig2d(), &[0.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(f(ModelSpec::linear1d(2.0), &[3.0]), vec![6.0]);
    }

    #[test]
    fn lipschitz_constants() {
        let l = |s: ModelSpec| s.build().unwrap().lipschitz();
        assert_eq!(l(ModelSpec::linear1d(2.0)), Lipschitz::OneSided(2.0));
        assert_eq!(l(ModelSpec::neural2d()), Lipschitz::OneSided(8.0));
        assert_eq!(l(ModelSpec::lorenz(6.0, 10.0, 3.0)), Lipschitz::OneSided(8.0));
        assert_eq!(l(ModelSpec::hindmarsh_rose(0.005)), Lipschitz::Unavailable);
        assert_eq!(l(ModelSpec::trig2d()), Lipschitz::SyncError(1.0));
        let eco = ModelSpec::may_ecosystem(10, 1.0, 1.0 / 3.0, 1.0, 4).build().unwrap();
        let draw = eco.dynamics.ecosystem().unwrap();
        assert_eq!(eco.lipschitz().value(), Some(draw.eta_max_empirical));
    }

    #[test]
    fn g_diagnostic_examples() {
        let m = ModelSpec::linear1d(2.0).build().unwrap();
        assert_eq!(g_diagnostic(&m, &StateVector::from([3.0])).unwrap(), 18.0);
        let lor = ModelSpec::lorenz(6.0, 10.0, 3.0).build().unwrap();
        assert_eq!(g_diagnostic(&lor, &StateVector::from([1.0, 1.0, 1.0])).unwrap(), 6.0);
        for spec in [ModelSpec::neural2d(), ModelSpec::hindmarsh_rose(0.005), ModelSpec::trig2d()] {
            let m = spec.build().unwrap();
            assert_eq!(g_diagnostic(&m, &StateVector::zeros(m.dim())).unwrap(), 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = ModelSpec::lorenz(6.0, 10.0, 3.0).build().unwrap();
        assert_eq!(
            eval_f(&m, &StateVector::from([1.0, 2.0])),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        );
    }

    #[test]
    fn registry_rejects_unknown_names_and_params() {
        assert!(matches!(ModelSpec::new("duffing").build(), Err(Error::UnknownModel(_))));
        assert!(ModelSpec::lorenz(6.0, 10.0, 3.0).with_param("gamma", 1.0).build().is_err());
        assert!(ModelSpec::new("may_ecosystem").build().is_err());
        assert!(ModelSpec::may_ecosystem(3, 1.0, 0.5, 1.0, 0).with_param("n", 2.5).build().is_err());
    }

    #[test]
    fn origin_is_an_equilibrium() {
        for spec in [
            ModelSpec::linear1d(2.0),
            ModelSpec::neural2d(),
            ModelSpec::may_ecosystem(8, 1.0, 0.5, 1.0, 1),
            ModelSpec::lorenz(6.0, 10.0, 3.0),
        ] {
            let m = spec.build().unwrap();
            let out = eval_f(&m, &StateVector::zeros(m.dim())).unwrap();
            assert!(out.as_slice().iter().all(|&v| v == 0.0), "{}", m.name());
        }
        let hr = ModelSpec::hindmarsh_rose(0.005).build().unwrap();
        assert_ne!(eval_f(&hr, &StateVector::zeros(3)).unwrap(), StateVector::zeros(3));
    }

    fn random_ball_point(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-radius..radius)).collect();
            if crate::state::norm(&x) <= radius {
                // spread mass across scales
                let s: f64 = 10f64.powf(rng.random_range(-6.0..0.0));
                return x.iter().map(|v| v * s.max(rng.random::<f64>())).collect();
            }
        }
    }

    #[test]
    fn one_sided_condition_holds_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let specs = [
            ModelSpec::linear1d(2.0),
            ModelSpec::neural2d(),
            ModelSpec::lorenz(6.0, 10.0, 3.0),
            ModelSpec::may_ecosystem(10, 1.0, 1.0 / 3.0, 1.0, 17),
            ModelSpec::trig2d(),
        ];
        for spec in specs {
            let m = spec.build().unwrap();
            let n = m.dim();
            let mut fx = vec![0.0; n];
            let mut fy = vec![0.0; n];
            for _ in 0..100_000 {
                let z = random_ball_point(&mut rng, n, 100.0);
                let zz = crate::state::dot(&z, &z);
                match m.lipschitz() {
                    Lipschitz::OneSided(l) => {
                        m.dynamics.eval_into(&z, &mut fx);
                        assert!(dot(&z, &fx) <= l * zz + 1e-9, "{} at {z:?}", m.name());
                    }
                    Lipschitz::SyncError(l) => {
                        let x = random_ball_point(&mut rng, n, 100.0);
                        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
                        m.dynamics.eval_into(&x, &mut fx);
                        m.dynamics.eval_into(&y, &mut fy);
                        let diff: Vec<f64> = fy.iter().zip(&fx).map(|(a, b)| a - b).collect();
                        assert!(dot(&z, &diff) <= l * zz + 1e-9, "{} at {z:?}", m.name());
                    }
                    Lipschitz::Unavailable => unreachable!(),
                }
            }
        }
    }
}
