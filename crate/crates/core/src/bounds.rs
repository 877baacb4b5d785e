//! Closed-form upper bounds on the expected hitting time and the expected
//! `L_q` control energy of the stochastic scheme.
//!
//! Everything hinges on the drift rate `H₂(p) = pL + p(p-1)k²/2`. On
//! `0 < p ≤ min{1, 2-2α}` it is minimised at `p* = 1/2 - L/k²` when
//! `α < 3/4 + L/(2k²)`, and at the boundary `p = 2 - 2α` otherwise; the
//! hitting-time bound is `1/(-H₂)` evaluated at that minimiser, with the
//! outside-ball transit time added on top.

use serde::{Deserialize, Serialize};

use crate::controllers::Scheme;
use crate::error::{Error, QViolation, Result};
use crate::state::StateVector;

/// Law of the initial state; expectations become point evaluations or
/// uniform sample means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialLaw {
    Point(StateVector),
    Sample(Vec<StateVector>),
}

impl InitialLaw {
    pub fn point(x0: impl Into<StateVector>) -> Self {
        InitialLaw::Point(x0.into())
    }

    pub fn sample(points: Vec<StateVector>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidConfig("initial sample must be non-empty".into()));
        };
        let dim = first.dim();
        if let Some(bad) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: bad.dim() });
        }
        Ok(InitialLaw::Sample(points))
    }

    fn norms(&self) -> Vec<f64> {
        match self {
            InitialLaw::Point(x) => vec![x.norm()],
            InitialLaw::Sample(xs) => xs.iter().map(StateVector::norm).collect(),
        }
    }

    /// `E[g(‖x₀‖)]`.
    fn expect(&self, g: impl Fn(f64) -> f64) -> f64 {
        let norms = self.norms();
        norms.iter().map(|&r| g(r)).sum::<f64>() / norms.len() as f64
    }

    fn outside_terms(&self) -> (f64, f64) {
        let log_out = self.expect(|r| if r > 1.0 { r.ln() } else { 0.0 });
        let p_out = self.expect(|r| if r > 1.0 { 1.0 } else { 0.0 });
        (log_out, p_out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaCase {
    BelowThreshold,
    AtOrAbove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lipschitz: f64,
    pub k: f64,
    pub alpha: f64,
    pub q: f64,
    pub feasible: bool,
    pub alpha_threshold: f64,
    pub alpha_case: AlphaCase,
    pub p_star: f64,
    /// `H₂` at the exponent selected by the case split.
    pub h2_at_choice: f64,
    pub t_f_sup: Option<f64>,
    pub q_admissible: bool,
    pub h2_q: f64,
    pub e_q_sup: Option<f64>,
}

pub fn h2(p: f64, l: f64, k: f64) -> f64 {
    p * l + p * (p - 1.0) * k * k / 2.0
}

pub fn p_star(l: f64, k: f64) -> f64 {
    0.5 - l / (k * k)
}

/// `3/4 + L/(2k²)`: the exponent at which the minimiser of `H₂` hits `2 - 2α`.
pub fn alpha_threshold(l: f64, k: f64) -> f64 {
    0.75 + l / (2.0 * k * k)
}

/// `J(α) = (1-α)[(2α-1)k² - 2L]`, equal to `-H₂(2 - 2α)`.
pub fn j_alpha(alpha: f64, l: f64, k: f64) -> f64 {
    (1.0 - alpha) * ((2.0 * alpha - 1.0) * k * k - 2.0 * l)
}

pub fn alpha_case(l: f64, k: f64, alpha: f64) -> AlphaCase {
    if alpha < alpha_threshold(l, k) {
        AlphaCase::BelowThreshold
    } else {
        AlphaCase::AtOrAbove
    }
}

/// `k > √(2L)` for the stochastic scheme, `k > L` for the deterministic ones.
pub fn feasibility(l: f64, k: f64, scheme: Scheme) -> bool {
    match scheme {
        Scheme::StochasticNorm => k * k > 2.0 * l && k > 0.0,
        Scheme::DeterministicNorm | Scheme::DeterministicComponentwise => k > l,
    }
}

/// Minimiser of `H₂` over `(0, min{1, 2-2α}]` by case analysis.
pub fn closed_form_min_h2(l: f64, k: f64, alpha: f64) -> (f64, f64) {
    match alpha_case(l, k, alpha) {
        AlphaCase::BelowThreshold => {
            let p = p_star(l, k);
            (p, -(k * p).powi(2) / 2.0)
        }
        AlphaCase::AtOrAbove => {
            let p = 2.0 - 2.0 * alpha;
            (p, h2(p, l, k))
        }
    }
}

/// Brute-force minimum of `H₂` over the uniform grid `{i·m/n : i = 1..=n}`
/// with `m = min{1, 2-2α}`.
pub fn oracle_min_h2(l: f64, k: f64, alpha: f64, grid_size: usize) -> (f64, f64) {
    assert!(grid_size >= 1000, "grid_size must be >= 1000");
    let upper = (2.0 - 2.0 * alpha).min(1.0);
    let mut best = (f64::NAN, f64::INFINITY);
    for i in 1..=grid_size {
        let p = upper * i as f64 / grid_size as f64;
        let v = h2(p, l, k);
        if v < best.1 {
            best = (p, v);
        }
    }
    best
}

fn check_feasible(l: f64, k: f64) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::param("L", format!("bounds need a finite L > 0, got {l}")));
    }
    if feasibility(l, k, Scheme::StochasticNorm) {
        Ok(())
    } else {
        Err(Error::Infeasible { k, lipschitz: l })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param("alpha", format!("must lie in (0, 1), got {alpha}")))
    }
}

/// Upper bound on `E τ`.
pub fn t_f_sup(l: f64, k: f64, alpha: f64, law: &InitialLaw) -> Result<f64> {
    check_feasible(l, k)?;
    check_alpha(alpha)?;
    let (log_out, p_out) = law.outside_terms();
    let transit = 2.0 * log_out / (k * k - 2.0 * l);
    let (exponent, rate) = closed_form_min_h2(l, k, alpha);
    // rate = -(k²-2L)²/(8k²) below the threshold and -J(α) at or above it
    let inside = law.expect(|r| if r <= 1.0 { r.powf(exponent) } else { 0.0 });
    Ok(transit + (p_out + inside) / (-rate))
}

pub fn q_admissibility(l: f64, k: f64, alpha: f64, q: f64) -> std::result::Result<(), QViolation> {
    if !(q > 0.0) {
        Err(QViolation::NonPositive)
    } else if !(q < 2.0 - 2.0 * alpha) {
        Err(QViolation::SteepnessLimit)
    } else if !(q < 1.0 - 2.0 * l / (k * k)) {
        Err(QViolation::NoiseLimit)
    } else {
        Ok(())
    }
}

/// Upper bound on `E E_q`.
pub fn e_q_sup(l: f64, k: f64, alpha: f64, q: f64, law: &InitialLaw) -> Result<f64> {
    check_feasible(l, k)?;
    check_alpha(alpha)?;
    q_admissibility(l, k, alpha, q).map_err(|violation| Error::InadmissibleQ { q, violation })?;
    let h = h2(q, l, k);
    let moment = law.expect(|r| r.powf(q));
    let (_, p_out) = law.outside_terms();
    let inside = law.expect(|r| if r <= 1.0 { r.powf(q) } else { 0.0 });
    Ok(-k.powf(q) / h * (moment + 2.0 * p_out + inside))
}

/// Every bound quantity for one parameter set. Undefined bounds are `None`.
pub fn bound_report(l: f64, k: f64, alpha: f64, q: f64, law: &InitialLaw) -> BoundReport {
    let feasible = feasibility(l, k, Scheme::StochasticNorm);
    let (_, h2_at_choice) = closed_form_min_h2(l, k, alpha);
    let q_admissible = q_admissibility(l, k, alpha, q).is_ok();
    BoundReport {
        lipschitz: l,
        k,
        alpha,
        q,
        feasible,
        alpha_threshold: alpha_threshold(l, k),
        alpha_case: alpha_case(l, k, alpha),
        p_star: p_star(l, k),
        h2_at_choice,
        t_f_sup: t_f_sup(l, k, alpha, law).ok(),
        q_admissible,
        h2_q: h2(q, l, k),
        e_q_sup: e_q_sup(l, k, alpha, q, law).ok(),
    }
}
