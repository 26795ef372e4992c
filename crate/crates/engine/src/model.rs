//! Model parameters, jump law, deterministic rate curve and drift functions.
//!
//! The log-price `X = ln S` follows
//! `dX = mu_X dt + sqrt(Y) (rho1 dZ^Y + rho2 dZ^r + rho3 dZ) + dJ`,
//! the variance `Y` is CIR and the short rate is `r_t = sigma_r R_t + phi_t`
//! with `R` a unit-volatility OU factor started at zero.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateCurve {
    /// `phi_t` is the given constant, no convexity adjustment.
    Constant { rate: f64 },
    /// Flat zero curve `P(0,T) = exp(-rate T)` fitted by the OU factor.
    Flat { rate: f64 },
    /// Piecewise-flat instantaneous forwards starting at `times[m]`, fitted by the OU factor.
    Fitted { times: Vec<f64>, forwards: Vec<f64> },
}

/// Zero-coupon discount curve sampled on increasing maturities starting at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroCurve {
    pub times: Vec<f64>,
    pub discounts: Vec<f64>,
}

impl ZeroCurve {
    pub fn flat(rate: f64, horizon: f64, points: usize) -> Self {
        let times: Vec<f64> = (0..=points)
            .map(|m| horizon * m as f64 / points as f64)
            .collect();
        let discounts = times.iter().map(|t| (-rate * t).exp()).collect();
        ZeroCurve { times, discounts }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub s0: f64,
    pub y0: f64,
    #[serde(default)]
    pub delta: f64,
    pub kappa_y: f64,
    pub theta_y: f64,
    pub sigma_y: f64,
    pub r0: f64,
    #[serde(default = "default_kappa_r")]
    pub kappa_r: f64,
    #[serde(default)]
    pub sigma_r: f64,
    #[serde(default)]
    pub rho1: f64,
    #[serde(default)]
    pub rho2: f64,
    /// Filled in by [`validate`].
    #[serde(default)]
    pub rho3: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub gamma_j: f64,
    #[serde(default = "default_eta")]
    pub eta_j: f64,
    /// `None` means `phi = r0` when `sigma_r = 0` and a flat `r0` curve fit otherwise.
    #[serde(default)]
    pub curve: Option<RateCurve>,
}

fn default_kappa_r() -> f64 {
    1.0
}

fn default_eta() -> f64 {
    0.1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExerciseStyle {
    European,
    American,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptionContract {
    pub strike: f64,
    pub maturity: f64,
    pub kind: OptionKind,
    pub style: ExerciseStyle,
}

impl OptionContract {
    pub fn new(strike: f64, maturity: f64, kind: OptionKind, style: ExerciseStyle) -> Self {
        OptionContract { strike, maturity, kind, style }
    }

    pub fn payoff(&self, s: f64) -> f64 {
        match self.kind {
            OptionKind::Call => (s - self.strike).max(0.0),
            OptionKind::Put => (self.strike - s).max(0.0),
        }
    }

    pub fn payoff_log(&self, x: f64) -> f64 {
        self.payoff(x.exp())
    }

    pub fn validate(&self) -> Result<OptionContract> {
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::Param(format!("strike must be > 0, got {}", self.strike)));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(Error::Param(format!("maturity must be > 0, got {}", self.maturity)));
        }
        Ok(*self)
    }
}

/// Any jump-size density of the log-price usable by the quadrature grid.
pub trait JumpDensity {
    fn intensity(&self) -> f64;
    fn density(&self, x: f64) -> f64;
}

/// Merton law: `nu(x) = lambda * N(gamma - eta^2/2, eta^2)(x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevyDensity {
    pub lambda: f64,
    pub mean: f64,
    pub std: f64,
}

impl LevyDensity {
    pub fn merton(lambda: f64, gamma: f64, eta: f64) -> Self {
        LevyDensity { lambda, mean: gamma - 0.5 * eta * eta, std: eta }
    }
}

impl JumpDensity for LevyDensity {
    fn intensity(&self) -> f64 {
        self.lambda
    }

    fn density(&self, x: f64) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let z = (x - self.mean) / self.std;
        self.lambda * (-0.5 * z * z).exp() / (self.std * (2.0 * PI).sqrt())
    }
}

pub fn validate(model: &MarketModel) -> Result<MarketModel> {
    let m = model;
    let finite = [
        ("s0", m.s0),
        ("y0", m.y0),
        ("delta", m.delta),
        ("kappa_y", m.kappa_y),
        ("theta_y", m.theta_y),
        ("sigma_y", m.sigma_y),
        ("r0", m.r0),
        ("kappa_r", m.kappa_r),
        ("sigma_r", m.sigma_r),
        ("rho1", m.rho1),
        ("rho2", m.rho2),
        ("lambda", m.lambda),
        ("gamma_j", m.gamma_j),
        ("eta_j", m.eta_j),
    ];
    for (name, v) in finite {
        if !v.is_finite() {
            return Err(Error::Param(format!("{name} is not finite")));
        }
    }
    if m.s0 <= 0.0 {
        return Err(Error::Param(format!("s0 must be > 0, got {}", m.s0)));
    }
    if m.y0 < 0.0 {
        return Err(Error::Param(format!("y0 must be >= 0, got {}", m.y0)));
    }
    for (name, v) in [("kappa_y", m.kappa_y), ("theta_y", m.theta_y), ("sigma_y", m.sigma_y)] {
        if v <= 0.0 {
            return Err(Error::Param(format!("{name} must be > 0, got {v}")));
        }
    }
    if m.sigma_r < 0.0 {
        return Err(Error::Param(format!("sigma_r must be >= 0, got {}", m.sigma_r)));
    }
    if m.kappa_r <= 0.0 {
        return Err(Error::Param(format!("kappa_r must be > 0, got {}", m.kappa_r)));
    }
    let norm = m.rho1 * m.rho1 + m.rho2 * m.rho2;
    if norm > 1.0 {
        return Err(Error::Param(format!(
            "correlation norm rho1^2 + rho2^2 = {norm} exceeds 1"
        )));
    }
    if m.lambda < 0.0 {
        return Err(Error::Param(format!("lambda must be >= 0, got {}", m.lambda)));
    }
    if m.lambda > 0.0 && m.eta_j <= 0.0 {
        return Err(Error::Param(format!("eta_j must be > 0 when lambda > 0, got {}", m.eta_j)));
    }
    if let Some(curve) = &m.curve {
        check_curve(curve)?;
    }
    let mut out = m.clone();
    out.rho3 = (1.0 - norm).max(0.0).sqrt();
    Ok(out)
}

fn check_curve(curve: &RateCurve) -> Result<()> {
    match curve {
        RateCurve::Constant { rate } | RateCurve::Flat { rate } => {
            if !rate.is_finite() {
                return Err(Error::Curve("rate is not finite".into()));
            }
        }
        RateCurve::Fitted { times, forwards } => {
            if times.is_empty() || times.len() != forwards.len() {
                return Err(Error::Curve("times and forwards must be non-empty and equal length".into()));
            }
            if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Curve("forward knots must start at 0 and increase".into()));
            }
            if forwards.iter().any(|f| !f.is_finite()) {
                return Err(Error::Curve("forward rate is not finite".into()));
            }
        }
    }
    Ok(())
}

impl MarketModel {
    /// Parameter set of the reference experiments (standard Bates, rho = -0.5).
    pub fn benchmark_bates() -> Self {
        MarketModel {
            s0: 100.0,
            y0: 0.04,
            delta: 0.05,
            kappa_y: 2.0,
            theta_y: 0.04,
            sigma_y: 0.4,
            r0: 0.03,
            kappa_r: 1.0,
            sigma_r: 0.0,
            rho1: -0.5,
            rho2: 0.0,
            rho3: 0.75f64.sqrt(),
            lambda: 5.0,
            gamma_j: 0.0,
            eta_j: 0.1,
            curve: None,
        }
    }

    /// Bates-Hull-White set: stochastic rate fitted to a flat 3% curve.
    pub fn benchmark_bates_hw(rho_sr: f64) -> Self {
        let mut m = MarketModel::benchmark_bates();
        m.sigma_r = 0.2;
        m.kappa_r = 1.0;
        m.rho2 = rho_sr;
        m.curve = Some(RateCurve::Flat { rate: 0.03 });
        validate(&m).expect("reference parameters are valid")
    }

    pub fn levy(&self) -> LevyDensity {
        LevyDensity::merton(self.lambda, self.gamma_j, self.eta_j)
    }

    pub fn levy_density(&self, x: f64) -> f64 {
        self.levy().density(x)
    }

    /// True when the rate factor can be dropped entirely.
    pub fn is_standard_bates(&self) -> bool {
        self.sigma_r == 0.0 && self.rho2 == 0.0
    }

    /// Deterministic part `phi_t` of the short rate.
    pub fn phi(&self, t: f64) -> f64 {
        let adj = hw_adjustment(self.kappa_r, self.sigma_r, t);
        match &self.curve {
            None if self.sigma_r == 0.0 => self.r0,
            None => self.r0 + adj,
            Some(RateCurve::Constant { rate }) => *rate,
            Some(RateCurve::Flat { rate }) => rate + adj,
            Some(RateCurve::Fitted { times, forwards }) => {
                let m = times.partition_point(|&s| s <= t).max(1) - 1;
                forwards[m] + adj
            }
        }
    }

    /// `int_0^t phi_s ds` by composite Simpson on a fine grid.
    pub fn phi_integral(&self, t: f64) -> f64 {
        let constant = match &self.curve {
            None | Some(RateCurve::Flat { .. }) => self.sigma_r == 0.0,
            Some(RateCurve::Constant { .. }) => true,
            Some(RateCurve::Fitted { .. }) => false,
        };
        if constant {
            return self.phi(0.0) * t;
        }
        let n = 2000;
        let h = t / n as f64;
        let mut s = self.phi(0.0) + self.phi(t);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * self.phi(i as f64 * h);
        }
        s * h / 3.0
    }

    pub fn mu_x(&self, y: f64, r: f64, t: f64) -> f64 {
        self.sigma_r * r + self.phi(t) - self.delta - 0.5 * y
    }

    /// Drift of `X` after removing the parts carried by the `Y` and `R` increments.
    pub fn mu_eff(&self, y: f64, r: f64, t: f64) -> f64 {
        self.mu_x(y, r, t) - self.rho1 / self.sigma_y * self.kappa_y * (self.theta_y - y)
            + self.rho2 * self.kappa_r * r * y.sqrt()
    }

    /// CIR drift `kappa_Y (theta_Y - y)`.
    pub fn mu_y(&self, y: f64) -> f64 {
        self.kappa_y * (self.theta_y - y)
    }

    /// OU drift of the unit-volatility rate factor.
    pub fn mu_r(&self, r: f64) -> f64 {
        -self.kappa_r * r
    }
}

pub fn mu_x(y: f64, r: f64, t: f64, model: &MarketModel) -> f64 {
    model.mu_x(y, r, t)
}

pub fn mu_eff(y: f64, r: f64, t: f64, model: &MarketModel) -> f64 {
    model.mu_eff(y, r, t)
}

pub fn levy_density(x: f64, model: &MarketModel) -> f64 {
    model.levy_density(x)
}

fn hw_adjustment(kappa: f64, sigma: f64, t: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let e = 1.0 - (-kappa * t).exp();
    sigma * sigma / (2.0 * kappa * kappa) * e * e
}

/// Fit `phi` so that the model's bond prices reproduce `curve`.
pub fn phi_from_curve(curve: &ZeroCurve, _model: &MarketModel) -> Result<RateCurve> {
    let (t, p) = (&curve.times, &curve.discounts);
    if t.len() < 2 || t.len() != p.len() {
        return Err(Error::Curve("need at least two (time, discount) points".into()));
    }
    if t[0] != 0.0 || (p[0] - 1.0).abs() > 1e-12 {
        return Err(Error::Curve("curve must start at P(0,0) = 1".into()));
    }
    if p.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Curve("discount factors must be positive".into()));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Curve("maturities must increase".into()));
    }
    if p.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Curve("discount factors must not increase".into()));
    }
    let forwards: Vec<f64> = (0..t.len() - 1)
        .map(|m| -(p[m + 1] / p[m]).ln() / (t[m + 1] - t[m]))
        .collect();
    Ok(RateCurve::Fitted { times: t[..t.len() - 1].to_vec(), forwards })
}
