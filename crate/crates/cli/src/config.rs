//! Experiment configuration files.
//!
//! A config is a TOML document:
//!
//! ```toml
//! mode = "stabilize"            # or "synchronize"
//!
//! [model]
//! name = "linear1d"
//! params = { L = 2.0 }
//! # seed = 7                    # random model structure (may_ecosystem)
//!
//! [controller]
//! scheme = "stochastic_norm"    # deterministic_norm, deterministic_componentwise
//! k = 5.0                       # or gain_factor = 1.1 for k = 1.1*sqrt(2L)
//! alpha = 0.5
//!
//! [sim]
//! dt = 1e-5
//! t_max = 10.0
//! eps_stop = 1e-4
//! seed = 1
//! realizations = 1000
//!
//! [energy]
//! q = 0.5
//!
//! [initial]
//! x0 = [10.0]
//! # y0 = [...]                  # follower start, synchronize mode
//!
//! [sweep]                       # optional
//! param = "k"                   # k, alpha or N
//! values = [3.0, 4.0, 5.0]
//!
//! [output]
//! dir = "out"
//! prefix = "linear_k"
//! ```
//!
//! Run manifests use the same layout plus a `[run]` table, so a manifest can
//! be fed straight back in as a config.

use std::collections::BTreeMap;
use std::path::PathBuf;

use fintime_core::experiments::{Experiment, InitialState, SweepParam};
use fintime_core::{ControllerSpec, ModelSpec, Scheme, SimConfig, StateVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<RawModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub controller: Option<RawController>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<RawSim>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy: Option<RawEnergy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<RawInitial>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<RawOutput>,
    /// Written by manifests; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawController {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSim {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub redraw_model: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEnergy {
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub param: Option<String>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Stabilize,
    Synchronize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub experiment: Experiment,
    pub sweep: Option<SweepSpec>,
    pub output_dir: PathBuf,
    pub prefix: String,
}

/// Every problem found in a config, each tagged with its field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

pub const DEFAULT_DT: f64 = 1e-5;
pub const DEFAULT_T_MAX: f64 = 10.0;
pub const DEFAULT_EPS_STOP: f64 = 1e-4;
pub const DEFAULT_REALIZATIONS: u64 = 100;

pub fn parse(text: &str) -> Result<RawConfig, ConfigErrors> {
    toml::from_str(text).map_err(|e| ConfigErrors(vec![e.to_string()]))
}

impl RawConfig {
    /// Validates everything up front and collects all violations.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigErrors> {
        let mut errs = Vec::new();
        let mut missing = |path: &str| errs.push(format!("missing required field `{path}`"));

        let model = self.model.clone().unwrap_or_default();
        let ctrl = self.controller.clone().unwrap_or_default();
        let sim = self.sim.clone().unwrap_or_default();
        let energy = self.energy.clone().unwrap_or_default();
        let initial = self.initial.clone().unwrap_or_default();

        if model.name.is_none() {
            missing("model.name");
        }
        if ctrl.alpha.is_none() {
            missing("controller.alpha");
        }
        if ctrl.k.is_none() && ctrl.gain_factor.is_none() {
            missing("controller.k");
        }
        if energy.q.is_none() {
            missing("energy.q");
        }
        if initial.x0.is_none() {
            missing("initial.x0");
        }

        let mode = match self.mode.as_deref() {
            None | Some("stabilize") => Mode::Stabilize,
            Some("synchronize") => Mode::Synchronize,
            Some(other) => {
                errs.push(format!("mode: expected `stabilize` or `synchronize`, got `{other}`"));
                Mode::Stabilize
            }
        };
        if mode == Mode::Synchronize && initial.y0.is_none() {
            errs.push("missing required field `initial.y0` (synchronize mode)".into());
        }
        if ctrl.k.is_some() && ctrl.gain_factor.is_some() {
            errs.push("controller: set either `k` or `gain_factor`, not both".into());
        }

        let scheme = match ctrl.scheme.as_deref().unwrap_or("stochastic_norm").parse::<Scheme>() {
            Ok(s) => s,
            Err(e) => {
                errs.push(format!("controller.scheme: {e}"));
                Scheme::StochasticNorm
            }
        };

        if let Some(seed) = sim.seed.into_iter().chain(model.seed).find(|&s| s > i64::MAX as u64) {
            errs.push(format!("seed {seed} exceeds the TOML integer range"));
        }

        let sweep = match &self.sweep {
            None => None,
            Some(s) => {
                let param = match s.param.as_deref() {
                    None => {
                        errs.push("missing required field `sweep.param`".into());
                        None
                    }
                    Some(p) => SweepParam::parse(p).map_err(|e| errs.push(format!("sweep.param: {e}"))).ok(),
                };
                let values = match &s.values {
                    None => {
                        errs.push("missing required field `sweep.values`".into());
                        None
                    }
                    Some(v) if v.is_empty() => {
                        errs.push("sweep.values: must be non-empty".into());
                        None
                    }
                    Some(v) => Some(v.clone()),
                };
                param.zip(values).map(|(param, values)| SweepSpec { param, values })
            }
        };

        let output = self.output.clone().unwrap_or_default();
        let prefix = output.prefix.unwrap_or_else(|| "run".into());
        if prefix.is_empty() || prefix.contains(['/', '\\']) {
            errs.push(format!("output.prefix: `{prefix}` is not a plain file name prefix"));
        }

        if !errs.is_empty() {
            return Err(ConfigErrors(errs));
        }

        let model_spec = ModelSpec {
            name: model.name.clone().unwrap_or_default(),
            params: model.params.clone(),
            seed: model.seed,
        };
        let controller = ControllerSpec {
            scheme,
            k: ctrl.k.unwrap_or(0.0),
            alpha: ctrl.alpha.unwrap_or_default(),
        };
        let sim_cfg = SimConfig {
            dt: sim.dt.unwrap_or(DEFAULT_DT),
            t_max: sim.t_max.unwrap_or(DEFAULT_T_MAX),
            eps_stop: sim.eps_stop.unwrap_or(DEFAULT_EPS_STOP),
            q: energy.q.unwrap_or_default(),
            seed: sim.seed.unwrap_or(0),
            realization_index: 0,
        };
        let x0 = StateVector::from(initial.x0.clone().unwrap_or_default());
        let init = match mode {
            Mode::Stabilize => InitialState::Stabilize { x0 },
            Mode::Synchronize => InitialState::Synchronize {
                x0,
                y0: StateVector::from(initial.y0.clone().unwrap_or_default()),
            },
        };
        let experiment = Experiment {
            model: model_spec,
            controller,
            gain_factor: ctrl.gain_factor,
            initial: init,
            sim: sim_cfg,
            realizations: sim.realizations.unwrap_or(DEFAULT_REALIZATIONS),
            redraw_model: sim.redraw_model.unwrap_or(false),
        };

        let cfg = ExperimentConfig {
            mode,
            experiment,
            sweep,
            output_dir: output.dir.unwrap_or_else(|| PathBuf::from(".")),
            prefix,
        };
        let errs = cfg.preflight();
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigErrors(errs))
        }
    }
}

impl ExperimentConfig {
    /// Every experiment this config will run (one per sweep value, or the base).
    pub fn planned(&self) -> Vec<(Option<f64>, Result<Experiment, String>)> {
        match &self.sweep {
            None => vec![(None, Ok(self.experiment.clone()))],
            Some(s) => s
                .values
                .iter()
                .map(|&v| (Some(v), s.param.apply(&self.experiment, v).map_err(|e| e.to_string())))
                .collect(),
        }
    }

    /// Checks each planned experiment against the core preconditions,
    /// including model construction and any derived gain.
    fn preflight(&self) -> Vec<String> {
        let mut errs = Vec::new();
        for (value, planned) in self.planned() {
            let ctx = match (value, &self.sweep) {
                (Some(v), Some(s)) => format!("[{} = {v}] ", s.param.name()),
                _ => String::new(),
            };
            let exp = match planned {
                Ok(exp) => exp,
                Err(e) => {
                    errs.push(format!("{ctx}sweep: {e}"));
                    continue;
                }
            };
            if let Err(e) = exp.validate() {
                errs.push(format!("{ctx}{e}"));
            }
            match exp.model.build() {
                Err(e) => errs.push(format!("{ctx}model: {e}")),
                Ok(model) => {
                    let dims = match &exp.initial {
                        InitialState::Stabilize { x0 } => vec![("initial.x0", x0)],
                        InitialState::Synchronize { x0, y0 } => vec![("initial.x0", x0), ("initial.y0", y0)],
                    };
                    for (path, v) in dims {
                        if v.dim() != model.dim() {
                            errs.push(format!(
                                "{ctx}{path}: model `{}` needs {} entries, got {}",
                                model.name(),
                                model.dim(),
                                v.dim()
                            ));
                        }
                    }
                    if exp.gain_factor.is_some() {
                        if let Err(e) = fintime_core::experiments::resolve_controller(&exp, &model) {
                            errs.push(format!("{ctx}controller.gain_factor: {e}"));
                        }
                    }
                }
            }
        }
        errs.dedup();
        errs
    }

    /// The config as it was run, in config-file form.
    pub fn to_raw(&self, command: &str) -> RawConfig {
        let e = &self.experiment;
        let (x0, y0) = match &e.initial {
            InitialState::Stabilize { x0 } => (x0.clone(), None),
            InitialState::Synchronize { x0, y0 } => (x0.clone(), Some(y0.clone())),
        };
        RawConfig {
            mode: Some(match self.mode {
                Mode::Stabilize => "stabilize".into(),
                Mode::Synchronize => "synchronize".into(),
            }),
            model: Some(RawModel {
                name: Some(e.model.name.clone()),
                params: e.model.params.clone(),
                seed: e.model.seed,
            }),
            controller: Some(RawController {
                scheme: Some(e.controller.scheme.name().into()),
                k: if e.gain_factor.is_some() { None } else { Some(e.controller.k) },
                gain_factor: e.gain_factor,
                alpha: Some(e.controller.alpha),
            }),
            sim: Some(RawSim {
                dt: Some(e.sim.dt),
                t_max: Some(e.sim.t_max),
                eps_stop: Some(e.sim.eps_stop),
                seed: Some(e.sim.seed),
                realizations: Some(e.realizations),
                redraw_model: Some(e.redraw_model),
            }),
            energy: Some(RawEnergy { q: Some(e.sim.q) }),
            initial: Some(RawInitial {
                x0: Some(x0.into_inner()),
                y0: y0.map(StateVector::into_inner),
            }),
            sweep: self.sweep.as_ref().map(|s| RawSweep {
                param: Some(s.param.name().into()),
                values: Some(s.values.clone()),
            }),
            output: Some(RawOutput { dir: Some(self.output_dir.clone()), prefix: Some(self.prefix.clone()) }),
            run: Some(RunInfo { command: command.into(), tool_version: env!("CARGO_PKG_VERSION").into() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [model]
        name = "linear1d"
        params = { L = 2 }
        [controller]
        k = 5
        alpha = 0.5
        [sim]
        dt = 1e-4
        realizations = 10
        [energy]
        q = 0.5
        [initial]
        x0 = [10]
    "#;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = parse(BASE).unwrap().resolve().unwrap();
        assert_eq!(cfg.mode, Mode::Stabilize);
        assert_eq!(cfg.experiment.controller.scheme, Scheme::StochasticNorm);
        assert_eq!(cfg.experiment.sim.t_max, DEFAULT_T_MAX);
        assert_eq!(cfg.experiment.sim.eps_stop, DEFAULT_EPS_STOP);
        assert_eq!(cfg.prefix, "run");
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn reports_every_missing_field_with_path() {
        let err = parse("[model]\nname = \"lorenz\"\n").unwrap().resolve().unwrap_err();
        let text = err.to_string();
        for path in ["controller.alpha", "controller.k", "energy.q", "initial.x0"] {
            assert!(text.contains(path), "{text}");
        }
        assert_eq!(err.0.len(), 4);
    }

    #[test]
    fn reports_semantic_violations_together() {
        let text = BASE.replace("alpha = 0.5", "alpha = 1.5").replace("x0 = [10]", "x0 = [10, 1]");
        let err = parse(&text).unwrap().resolve().unwrap_err();
        assert!(err.0.iter().any(|e| e.contains("alpha")), "{err}");
        assert!(err.0.iter().any(|e| e.contains("initial.x0")), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse(&format!("{BASE}\n[extra]\nfoo = 1\n")).is_err());
        assert!(parse(&BASE.replace("k = 5", "gain = 5")).is_err());
    }

    #[test]
    fn sweep_values_are_preflighted() {
        let text = format!("{BASE}\n[sweep]\nparam = \"alpha\"\nvalues = [0.5, 2.0]\n");
        let err = parse(&text).unwrap().resolve().unwrap_err();
        assert!(err.0.iter().any(|e| e.starts_with("[alpha = 2]")), "{err}");
    }

    #[test]
    fn synchronize_requires_y0() {
        let text = format!("mode = \"synchronize\"\n{BASE}");
        let err = parse(&text).unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("initial.y0"));
    }

    #[test]
    fn raw_form_round_trips() {
        let cfg = parse(&format!("{BASE}\n[sweep]\nparam = \"k\"\nvalues = [3, 4]\n"))
            .unwrap()
            .resolve()
            .unwrap();
        let text = toml::to_string(&cfg.to_raw("sweep")).unwrap();
        let again = parse(&text).unwrap().resolve().unwrap();
        assert_eq!(again.experiment, cfg.experiment);
        assert_eq!(again.sweep, cfg.sweep);
        assert_eq!(toml::to_string(&again.to_raw("sweep")).unwrap(), text);
    }
}
