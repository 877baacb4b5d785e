//! Monte Carlo harness: realization ensembles, parameter sweeps and
//! stochastic-vs-deterministic comparisons.
//!
//! Realizations `0..n` run in parallel on the current rayon pool. Each one
//! draws from its own `(seed, index)` stream and results are collected in
//! index order, so every statistic is independent of scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_report, feasibility, BoundReport, InitialLaw};
use crate::controllers::{ControllerSpec, Scheme};
use crate::engine::{simulate_stabilization, simulate_synchronization, RunOutcome, SimConfig};
use crate::error::{Error, Result};
use crate::models::{Lipschitz, Model, ModelSpec};
use crate::state::StateVector;
use crate::stats::mean_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitialState {
    Stabilize { x0: StateVector },
    Synchronize { x0: StateVector, y0: StateVector },
}

impl InitialState {
    pub fn is_sync(&self) -> bool {
        matches!(self, InitialState::Synchronize { .. })
    }

    /// The initial value of the quantity driven to zero.
    pub fn error0(&self) -> StateVector {
        match self {
            InitialState::Stabilize { x0 } => x0.clone(),
            InitialState::Synchronize { x0, y0 } => StateVector::from(
                y0.as_slice().iter().zip(x0.as_slice()).map(|(y, x)| y - x).collect::<Vec<_>>(),
            ),
        }
    }

    fn check_dim(&self, model: &Model) -> Result<()> {
        match self {
            InitialState::Stabilize { x0 } => model.check_dim(x0),
            InitialState::Synchronize { x0, y0 } => {
                model.check_dim(x0)?;
                model.check_dim(y0)
            }
        }
    }

    /// Resizes constant initial vectors to dimension `n`.
    fn resized(&self, n: usize) -> Result<Self> {
        let resize = |v: &StateVector| -> Result<StateVector> {
            let first = v.as_slice().first().copied().unwrap_or(0.0);
            if v.as_slice().iter().any(|&c| c != first) {
                return Err(Error::InvalidConfig(
                    "sweeping N needs a constant initial vector (e.g. [1, 1, ..., 1])".into(),
                ));
            }
            Ok(StateVector::from(vec![first; n]))
        };
        Ok(match self {
            InitialState::Stabilize { x0 } => InitialState::Stabilize { x0: resize(x0)? },
            InitialState::Synchronize { x0, y0 } => {
                InitialState::Synchronize { x0: resize(x0)?, y0: resize(y0)? }
            }
        })
    }
}

/// Everything needed to run one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub model: ModelSpec,
    pub controller: ControllerSpec,
    /// When set, `k = gain_factor·√(2L)` with `L` taken from the built model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_factor: Option<f64>,
    pub initial: InitialState,
    pub sim: SimConfig,
    pub realizations: u64,
    /// Draw fresh random model structure for every realization.
    #[serde(default)]
    pub redraw_model: bool,
}

impl Experiment {
    pub fn stabilize(model: ModelSpec, controller: ControllerSpec, x0: impl Into<StateVector>, sim: SimConfig, realizations: u64) -> Self {
        Experiment {
            model,
            controller,
            gain_factor: None,
            initial: InitialState::Stabilize { x0: x0.into() },
            sim,
            realizations,
            redraw_model: false,
        }
    }

    pub fn synchronize(
        model: ModelSpec,
        controller: ControllerSpec,
        x0: impl Into<StateVector>,
        y0: impl Into<StateVector>,
        sim: SimConfig,
        realizations: u64,
    ) -> Self {
        Experiment {
            model,
            controller,
            gain_factor: None,
            initial: InitialState::Synchronize { x0: x0.into(), y0: y0.into() },
            sim,
            realizations,
            redraw_model: false,
        }
    }

    pub fn with_gain_factor(mut self, factor: f64) -> Self {
        self.gain_factor = Some(factor);
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.controller.scheme = scheme;
        self
    }

    pub fn with_gain(mut self, k: f64) -> Self {
        self.controller.k = k;
        self.gain_factor = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::param("realizations", "must be >= 1"));
        }
        if let Some(f) = self.gain_factor {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::param("gain_factor", format!("must be > 0, got {f}")));
            }
        }
        self.sim.validate()?;
        self.controller.validate()
    }
}

/// The Lipschitz constant that actually applies to the driven quantity.
pub fn applicable_lipschitz(model: &Model, sync: bool) -> Option<f64> {
    match (model.lipschitz(), sync) {
        (Lipschitz::OneSided(l), false) => Some(l),
        (Lipschitz::SyncError(l), true) => Some(l),
        _ => None,
    }
}

/// The controller actually run, with a `gain_factor` turned into `k`.
pub fn resolve_controller(exp: &Experiment, model: &Model) -> Result<ControllerSpec> {
    let Some(factor) = exp.gain_factor else {
        return Ok(exp.controller);
    };
    match applicable_lipschitz(model, exp.initial.is_sync()) {
        Some(l) if l > 0.0 => Ok(exp.controller.with_gain(factor * (2.0 * l).sqrt())),
        Some(l) => Err(Error::InvalidConfig(format!(
            "gain_factor needs L > 0 to derive k, model `{}` has L = {l}",
            model.name()
        ))),
        None => Err(Error::LipschitzUnavailable(model.name().to_string())),
    }
}

fn realization_model_spec(base: &ModelSpec, index: u64) -> ModelSpec {
    let seed = base.seed.unwrap_or(0) ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    base.clone().with_seed(seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub n_total: u64,
    pub n_hit: u64,
    pub n_censored: u64,
    pub n_blowup: u64,
    pub mean_tau: Option<f64>,
    pub std_tau: Option<f64>,
    pub mean_energy: Option<f64>,
    pub std_energy: Option<f64>,
    pub mean_crossings: Option<f64>,
    pub max_crossings: u64,
    /// `L` used for feasibility and bounds, when one applies.
    pub lipschitz: Option<f64>,
    /// Feasibility of the gain for the experiment's scheme; `None` without `L`.
    pub feasible: Option<bool>,
    /// Closed-form bounds (stochastic scheme with a known `L` only).
    pub bound_report: Option<BoundReport>,
    /// The experiment as run, with any derived gain resolved.
    pub params_echo: Experiment,
    /// Per-realization results in index order.
    pub runs: Vec<Result<RunOutcome>>,
}

impl EnsembleResult {
    pub fn censored_fraction(&self) -> f64 {
        self.n_censored as f64 / self.n_total as f64
    }

    pub fn hit_taus(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.as_ref().ok()).filter(|o| o.hit).map(|o| o.tau).collect()
    }

    pub fn t_f_sup(&self) -> Option<f64> {
        self.bound_report.as_ref().and_then(|b| b.t_f_sup)
    }

    pub fn e_q_sup(&self) -> Option<f64> {
        self.bound_report.as_ref().and_then(|b| b.e_q_sup)
    }

    fn aggregate(params_echo: Experiment, lipschitz: Option<f64>, runs: Vec<Result<RunOutcome>>) -> Result<Self> {
        let mut n_hit = 0;
        let mut n_censored = 0;
        let mut n_blowup = 0;
        let mut taus = Vec::new();
        let mut energies = Vec::new();
        let mut crossings = Vec::new();
        let mut max_crossings = 0;
        for run in &runs {
            match run {
                Ok(o) if o.hit => {
                    n_hit += 1;
                    taus.push(o.tau);
                    energies.push(o.energy_q);
                    crossings.push(o.ball_crossings as f64);
                    max_crossings = max_crossings.max(o.ball_crossings);
                }
                Ok(o) => {
                    n_censored += 1;
                    max_crossings = max_crossings.max(o.ball_crossings);
                }
                Err(Error::Blowup { .. }) => n_blowup += 1,
                Err(e) => return Err(e.clone()),
            }
        }
        let tau = mean_std(&taus);
        let energy = mean_std(&energies);
        let ctrl = params_echo.controller;
        let feasible = lipschitz.map(|l| feasibility(l, ctrl.k, ctrl.scheme));
        let bound_report = match lipschitz {
            Some(l) if ctrl.scheme.is_stochastic() && !params_echo.redraw_model => Some(bound_report(
                l,
                ctrl.k,
                ctrl.alpha,
                params_echo.sim.q,
                &InitialLaw::Point(params_echo.initial.error0()),
            )),
            _ => None,
        };
        Ok(EnsembleResult {
            n_total: runs.len() as u64,
            n_hit,
            n_censored,
            n_blowup,
            mean_tau: tau.map(|t| t.0),
            std_tau: tau.map(|t| t.1),
            mean_energy: energy.map(|e| e.0),
            std_energy: energy.map(|e| e.1),
            mean_crossings: mean_std(&crossings).map(|c| c.0),
            max_crossings,
            lipschitz,
            feasible,
            bound_report,
            params_echo,
            runs,
        })
    }
}

fn run_one(model: &Model, ctrl: &ControllerSpec, initial: &InitialState, sim: &SimConfig) -> Result<RunOutcome> {
    match initial {
        InitialState::Stabilize { x0 } => simulate_stabilization(model, ctrl, x0, sim),
        InitialState::Synchronize { x0, y0 } => simulate_synchronization(model, ctrl, x0, y0, sim),
    }
}

pub fn run_ensemble(exp: &Experiment) -> Result<EnsembleResult> {
    exp.validate()?;
    let model = exp.model.build()?;
    exp.initial.check_dim(&model)?;
    let sync = exp.initial.is_sync();

    if exp.redraw_model {
        // validate the derived gain once on the base draw
        resolve_controller(exp, &model)?;
        let runs: Vec<Result<RunOutcome>> = (0..exp.realizations)
            .into_par_iter()
            .map(|i| {
                let m = realization_model_spec(&exp.model, i).build()?;
                let ctrl = resolve_controller(exp, &m)?;
                run_one(&m, &ctrl, &exp.initial, &exp.sim.for_realization(i))
            })
            .collect();
        return EnsembleResult::aggregate(exp.clone(), None, runs);
    }

    let ctrl = resolve_controller(exp, &model)?;
    let runs: Vec<Result<RunOutcome>> = (0..exp.realizations)
        .into_par_iter()
        .map(|i| run_one(&model, &ctrl, &exp.initial, &exp.sim.for_realization(i)))
        .collect();
    let mut echo = exp.clone();
    echo.controller = ctrl;
    EnsembleResult::aggregate(echo, applicable_lipschitz(&model, sync), runs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    K,
    Alpha,
    N,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::Alpha => "alpha",
            SweepParam::N => "N",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(SweepParam::K),
            "alpha" => Ok(SweepParam::Alpha),
            "N" | "n" => Ok(SweepParam::N),
            other => Err(Error::InvalidConfig(format!("cannot sweep `{other}` (expected k, alpha or N)"))),
        }
    }

    /// The base experiment with this parameter set to `value`.
    pub fn apply(self, base: &Experiment, value: f64) -> Result<Experiment> {
        let mut exp = base.clone();
        match self {
            SweepParam::K => exp = exp.with_gain(value),
            SweepParam::Alpha => exp.controller.alpha = value,
            SweepParam::N => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::param("N", format!("must be a positive integer, got {value}")));
                }
                if exp.model.param("n").is_none() {
                    return Err(Error::InvalidConfig(format!("model `{}` has no size parameter N", exp.model.name)));
                }
                exp.model.params.insert("n".into(), value);
                exp.initial = exp.initial.resized(value as usize)?;
            }
        }
        Ok(exp)
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub swept_name: String,
    pub swept_value: f64,
    /// The experiment this row ran.
    pub experiment: Experiment,
    /// Per-row failures are kept in the row; the sweep carries on.
    pub ensemble: Result<EnsembleResult>,
}

pub fn sweep(param: SweepParam, values: &[f64], base: &Experiment) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep values must be non-empty".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted
        .into_iter()
        .map(|v| {
            let (experiment, ensemble) = match param.apply(base, v) {
                Ok(exp) => {
                    let ens = run_ensemble(&exp);
                    (exp, ens)
                }
                Err(e) => (base.clone(), Err(e)),
            };
            SweepRow { swept_name: param.name().to_string(), swept_value: v, experiment, ensemble }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct SchemePair {
    pub k: f64,
    pub stochastic: SweepRow,
    pub deterministic: SweepRow,
}

/// Runs the stochastic and the norm-based deterministic scheme on identical
/// model and initial data for every gain in `k_values`.
pub fn compare_schemes(base: &Experiment, k_values: &[f64]) -> Result<Vec<SchemePair>> {
    let stochastic = sweep(SweepParam::K, k_values, &base.clone().with_scheme(Scheme::StochasticNorm))?;
    let deterministic = sweep(SweepParam::K, k_values, &base.clone().with_scheme(Scheme::DeterministicNorm))?;
    Ok(stochastic
        .into_iter()
        .zip(deterministic)
        .map(|(s, d)| SchemePair { k: s.swept_value, stochastic: s, deterministic: d })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(n: u64) -> Experiment {
        Experiment::stabilize(
            ModelSpec::linear1d(2.0),
            ControllerSpec::stochastic(5.0, 0.5).unwrap(),
            [10.0],
            SimConfig { dt: 1e-4, t_max: 10.0, eps_stop: 1e-4, q: 0.5, seed: 99, realization_index: 0 },
            n,
        )
    }

    #[test]
    fn counts_add_up_and_bounds_attach() {
        let r = run_ensemble(&linear(40)).unwrap();
        assert_eq!(r.n_total, r.n_hit + r.n_censored + r.n_blowup);
        assert_eq!(r.n_hit, 40);
        let b = r.bound_report.as_ref().unwrap();
        assert!(b.feasible);
        assert!((b.t_f_sup.unwrap() - 0.6728).abs() < 1e-4);
        assert_eq!(r.feasible, Some(true));
        assert_eq!(r.runs.len(), 40);
    }

    #[test]
    fn single_realization_is_reproducible() {
        let a = run_ensemble(&linear(1)).unwrap();
        let b = run_ensemble(&linear(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.std_tau, Some(0.0));
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let exp = linear(16);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_ensemble(&exp)).unwrap();
        let b = four.install(|| run_ensemble(&exp)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_realizations_rejected() {
        assert!(run_ensemble(&linear(0)).is_err());
    }

    #[test]
    fn censoring_is_counted_not_fatal() {
        let mut exp = linear(20);
        exp.sim.t_max = 0.01;
        let r = run_ensemble(&exp).unwrap();
        assert_eq!(r.n_censored, 20);
        assert_eq!(r.mean_tau, None);
        assert_eq!(r.censored_fraction(), 1.0);
    }

    #[test]
    fn blowups_are_counted() {
        let exp = Experiment::stabilize(
            ModelSpec::linear1d(50.0),
            ControllerSpec::deterministic(0.5, 0.5).unwrap(),
            [1.0],
            SimConfig { dt: 1e-3, t_max: 5.0, ..SimConfig::default() },
            3,
        );
        let r = run_ensemble(&exp).unwrap();
        assert_eq!(r.n_blowup, 3);
        assert_eq!(r.feasible, Some(false));
        assert!(r.bound_report.is_none());
    }

    #[test]
    fn hindmarsh_rose_has_no_bounds() {
        let exp = Experiment::synchronize(
            ModelSpec::hindmarsh_rose(0.005),
            ControllerSpec::stochastic(6.0, 0.5).unwrap(),
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 2.0],
            SimConfig { dt: 1e-4, t_max: 20.0, q: 0.1, ..SimConfig::default() },
            2,
        );
        let r = run_ensemble(&exp).unwrap();
        assert_eq!(r.lipschitz, None);
        assert_eq!(r.feasible, None);
        assert!(r.bound_report.is_none());
    }

    #[test]
    fn derived_gain_uses_model_constant() {
        let exp = Experiment::stabilize(
            ModelSpec::neural2d(),
            ControllerSpec::stochastic(1.0, 0.5).unwrap(),
            [10.0, 10.0],
            SimConfig { dt: 1e-4, t_max: 10.0, ..SimConfig::default() },
            2,
        )
        .with_gain_factor(1.1);
        let r = run_ensemble(&exp).unwrap();
        assert!((r.params_echo.controller.k - 1.1 * 4.0).abs() < 1e-12);
        let hr = Experiment::synchronize(
            ModelSpec::hindmarsh_rose(0.005),
            ControllerSpec::stochastic(1.0, 0.5).unwrap(),
            [0.0, 0.0, 1.0],
            [0.0, 0.0, 2.0],
            SimConfig::default(),
            1,
        )
        .with_gain_factor(1.1);
        assert!(matches!(run_ensemble(&hr), Err(Error::LipschitzUnavailable(_))));
    }

    #[test]
    fn sweep_orders_rows_and_keeps_row_errors() {
        let rows = sweep(SweepParam::Alpha, &[0.7, 1.5, 0.3], &linear(4)).unwrap();
        let values: Vec<f64> = rows.iter().map(|r| r.swept_value).collect();
        assert_eq!(values, vec![0.3, 0.7, 1.5]);
        assert!(rows[0].ensemble.is_ok());
        assert!(rows[1].ensemble.is_ok());
        assert!(rows[2].ensemble.is_err());
        assert!(sweep(SweepParam::K, &[], &linear(4)).is_err());
    }

    #[test]
    fn n_sweep_redraws_and_resizes() {
        let base = Experiment::stabilize(
            ModelSpec::may_ecosystem(5, 1.0, 1.0 / 3.0, 1.0, 7),
            ControllerSpec::stochastic(1.0, 0.5).unwrap(),
            vec![1.0; 5],
            SimConfig { dt: 1e-4, t_max: 50.0, q: 0.1, ..SimConfig::default() },
            2,
        )
        .with_gain_factor(1.1);
        let rows = sweep(SweepParam::N, &[8.0, 12.0], &base).unwrap();
        for row in &rows {
            let n = row.swept_value as usize;
            match &row.experiment.initial {
                InitialState::Stabilize { x0 } => assert_eq!(x0.dim(), n),
                _ => unreachable!(),
            }
            if let Ok(ens) = &row.ensemble {
                let l = ens.lipschitz.unwrap();
                assert!((ens.params_echo.controller.k - 1.1 * (2.0 * l).sqrt()).abs() < 1e-12);
            }
        }
        assert!(sweep(SweepParam::N, &[4.0], &linear(1)).unwrap()[0].ensemble.is_err());
    }

    #[test]
    fn compare_pairs_schemes() {
        let pairs = compare_schemes(&linear(3), &[6.0, 3.0]).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].k, 3.0);
        let det = pairs[0].deterministic.ensemble.as_ref().unwrap();
        assert_eq!(det.params_echo.controller.scheme, Scheme::DeterministicNorm);
        assert_eq!(det.feasible, Some(true));
        assert!(det.bound_report.is_none());
        // noise-free: every realization is the same
        let taus = det.hit_taus();
        assert!(taus.iter().all(|&t| t == taus[0]));
        let sto = pairs[0].stochastic.ensemble.as_ref().unwrap();
        assert_eq!(sto.params_echo.controller.scheme, Scheme::StochasticNorm);
    }

    #[test]
    fn redraw_mode_varies_matrix() {
        let mut exp = Experiment::stabilize(
            ModelSpec::may_ecosystem(6, 1.0, 1.0 / 3.0, 1.0, 7),
            ControllerSpec::stochastic(4.0, 0.5).unwrap(),
            vec![1.0; 6],
            SimConfig { dt: 1e-4, t_max: 50.0, q: 0.1, ..SimConfig::default() },
            3,
        );
        exp.redraw_model = true;
        let r = run_ensemble(&exp).unwrap();
        assert!(r.bound_report.is_none());
        let a = realization_model_spec(&exp.model, 0).build().unwrap();
        let b = realization_model_spec(&exp.model, 1).build().unwrap();
        assert_ne!(a.dynamics.ecosystem().unwrap().matrix, b.dynamics.ecosystem().unwrap().matrix);
    }
}
