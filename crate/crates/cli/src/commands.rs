//! Subcommand bodies. Each returns the process exit code.

use std::path::PathBuf;

use fintime_core::bounds::{bound_report, AlphaCase};
use fintime_core::experiments::{applicable_lipschitz, compare_schemes, resolve_controller, run_ensemble, sweep};
use fintime_core::{BoundReport, EnsembleResult, Error, InitialLaw, SweepParam};
use serde::Serialize;

use crate::config::{ExperimentConfig, Mode};
use crate::output::{csv_document, ensure_writable, write_atomic, Swept};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum CommandKind {
    Bounds,
    Simulate,
    Sweep,
    Compare,
    Sync,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Bounds => "bounds",
            CommandKind::Simulate => "simulate",
            CommandKind::Sweep => "sweep",
            CommandKind::Compare => "compare",
            CommandKind::Sync => "sync",
        }
    }
}

pub struct Ctx {
    pub quiet: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            use std::io::Write;
            let _ = writeln!(std::io::stdout(), "{}", line.as_ref());
        }
    }
}

fn config_error(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_CONFIG
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_else(|| "undefined".into())
}

fn alpha_case_name(case: AlphaCase) -> &'static str {
    match case {
        AlphaCase::BelowThreshold => "below threshold (exponent p*)",
        AlphaCase::AtOrAbove => "at or above threshold (exponent 2 - 2 alpha)",
    }
}

#[derive(Serialize)]
struct BoundsEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    swept_name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    swept_value: Option<f64>,
    model: String,
    #[serde(flatten)]
    report: BoundReport,
}

#[derive(Serialize)]
struct BoundsFile {
    bounds: Vec<BoundsEntry>,
}

pub fn bounds(cfg: &ExperimentConfig, ctx: &Ctx) -> i32 {
    let sync = cfg.mode == Mode::Synchronize;
    let mut entries = Vec::new();
    for (value, planned) in cfg.planned() {
        let exp = match planned {
            Ok(e) => e,
            Err(e) => return config_error(e),
        };
        let model = match exp.model.build() {
            Ok(m) => m,
            Err(e) => return config_error(e),
        };
        let Some(l) = applicable_lipschitz(&model, sync) else {
            eprintln!("error: L unavailable for model `{}`; no closed-form bounds apply", model.name());
            return EXIT_INFEASIBLE;
        };
        let ctrl = match resolve_controller(&exp, &model) {
            Ok(c) => c,
            Err(e) => return config_error(e),
        };
        let report = bound_report(l, ctrl.k, ctrl.alpha, exp.sim.q, &InitialLaw::Point(exp.initial.error0()));
        let swept_name = value.and(cfg.sweep.as_ref()).map(|s| s.param.name().to_string());
        if let (Some(name), Some(v)) = (&swept_name, value) {
            ctx.say(format!("[{name} = {v}]"));
        }
        ctx.say(format!(
            "model {}  L = {}  k = {}  alpha = {}  q = {}",
            model.name(),
            report.lipschitz,
            report.k,
            report.alpha,
            report.q
        ));
        ctx.say(format!("  feasible   {} (needs k > sqrt(2L) = {})", report.feasible, (2.0 * l).sqrt()));
        ctx.say(format!("  alpha case {} (threshold {})", alpha_case_name(report.alpha_case), report.alpha_threshold));
        ctx.say(format!("  p*         {}", report.p_star));
        ctx.say(format!("  H2(q)      {} (q admissible: {})", report.h2_q, report.q_admissible));
        ctx.say(format!("  T_f^Sup    {}", opt(report.t_f_sup)));
        ctx.say(format!("  E_q^Sup    {}", opt(report.e_q_sup)));
        entries.push(BoundsEntry { swept_name, swept_value: value, model: model.name().into(), report });
    }

    let all_defined = entries.iter().all(|e| {
        let r = &e.report;
        r.feasible && r.q_admissible && r.t_f_sup.is_some() && r.e_q_sup.is_some()
    });
    let text = match toml::to_string(&BoundsFile { bounds: entries }) {
        Ok(t) => t,
        Err(e) => return config_error(e),
    };
    let path = cfg.output_dir.join(format!("{}_bounds.toml", cfg.prefix));
    if let Err(e) = ensure_writable(&cfg.output_dir).and_then(|_| write_atomic(&[(path.clone(), text.clone())])) {
        return config_error(format!("cannot write {}: {e}", path.display()));
    }
    if all_defined {
        EXIT_OK
    } else {
        eprintln!("infeasible or inadmissible parameters; undefined bounds left out of {}", path.display());
        EXIT_INFEASIBLE
    }
}

struct Row {
    swept: Option<(String, f64)>,
    ensemble: EnsembleResult,
}

/// Runs simulations for `simulate`, `sweep`, `compare` and `sync`.
pub fn simulate(cfg: &ExperimentConfig, kind: CommandKind, ctx: &Ctx) -> i32 {
    match (kind, cfg.mode, &cfg.sweep) {
        (CommandKind::Sweep, _, None) => return config_error("`sweep` needs a [sweep] table"),
        (CommandKind::Sync, Mode::Stabilize, _) => return config_error("`sync` needs mode = \"synchronize\""),
        (CommandKind::Compare, _, Some(s)) if s.param != SweepParam::K => {
            return config_error(format!("`compare` sweeps k; sweep.param is `{}`", s.param.name()))
        }
        _ => {}
    }
    if let Err(e) = ensure_writable(&cfg.output_dir) {
        return config_error(format!("output dir {} is not writable: {e}", cfg.output_dir.display()));
    }

    let rows = match collect_rows(cfg, kind) {
        Ok(rows) => rows,
        Err(e) => return config_error(e),
    };

    for row in &rows {
        let e = &row.ensemble;
        let label = row.swept.as_ref().map(|(n, v)| format!("{n} = {v}, ")).unwrap_or_default();
        ctx.say(format!(
            "{label}{}: {}/{} hit, mean tau {}, mean energy {}",
            e.params_echo.controller.scheme.name(),
            e.n_hit,
            e.n_total,
            opt(e.mean_tau),
            opt(e.mean_energy)
        ));
    }

    let csv = csv_document(rows.iter().map(|r| (r.swept.as_ref().map(|(n, v)| (n.as_str(), *v)) as Swept, &r.ensemble)));
    let manifest = match toml::to_string(&cfg.to_raw(kind.name())) {
        Ok(m) => m,
        Err(e) => return config_error(e),
    };
    let csv_path: PathBuf = cfg.output_dir.join(format!("{}_rows.csv", cfg.prefix));
    let manifest_path = cfg.output_dir.join(format!("{}_manifest", cfg.prefix));
    if let Err(e) = write_atomic(&[(csv_path.clone(), csv), (manifest_path, manifest)]) {
        return config_error(format!("cannot write results to {}: {e}", cfg.output_dir.display()));
    }
    ctx.say(format!("wrote {}", csv_path.display()));

    exit_code(kind, &rows)
}

fn exit_code(kind: CommandKind, rows: &[Row]) -> i32 {
    if rows.iter().any(|r| r.ensemble.n_total > 0 && r.ensemble.n_blowup == r.ensemble.n_total) {
        eprintln!("every realization blew up in at least one row");
        return EXIT_BLOWUP;
    }
    let infeasible = |r: &Row| r.ensemble.feasible == Some(false);
    let flagged = if kind == CommandKind::Compare {
        // rows come in stochastic/deterministic pairs per gain
        rows.chunks(2).any(|pair| pair.iter().all(infeasible))
    } else {
        rows.iter().any(infeasible)
    };
    if flagged {
        eprintln!("some gains are infeasible for the chosen scheme");
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    }
}

fn collect_rows(cfg: &ExperimentConfig, kind: CommandKind) -> Result<Vec<Row>, String> {
    let base = &cfg.experiment;
    let row_err = |name: &str, v: f64, e: Error| format!("[{name} = {v}] {e}");
    match (kind, &cfg.sweep) {
        (CommandKind::Simulate, _) | (CommandKind::Sync, None) => {
            let ensemble = run_ensemble(base).map_err(|e| e.to_string())?;
            Ok(vec![Row { swept: None, ensemble }])
        }
        (CommandKind::Compare, sweep_spec) => {
            let ks = match sweep_spec {
                Some(s) => s.values.clone(),
                None => vec![base.controller.k],
            };
            let pairs = compare_schemes(base, &ks).map_err(|e| e.to_string())?;
            let mut rows = Vec::new();
            for pair in pairs {
                for row in [pair.stochastic, pair.deterministic] {
                    let ensemble = row.ensemble.map_err(|e| row_err("k", row.swept_value, e))?;
                    rows.push(Row { swept: Some(("k".into(), row.swept_value)), ensemble });
                }
            }
            Ok(rows)
        }
        (_, Some(s)) => {
            let rows = sweep(s.param, &s.values, base).map_err(|e| e.to_string())?;
            rows.into_iter()
                .map(|row| {
                    let ensemble = row.ensemble.map_err(|e| row_err(&row.swept_name, row.swept_value, e))?;
                    Ok(Row { swept: Some((row.swept_name, row.swept_value)), ensemble })
                })
                .collect()
        }
        (CommandKind::Sweep | CommandKind::Bounds, None) => unreachable!("checked by the caller"),
    }
}
