//! Semi-closed-form references: the CIR Riccati transform, the Bates
//! characteristic function with Carr-Madan inversion, the Vasicek bond
//! factor, Black-Scholes implied volatility, the convergence ratio and the
//! early-exercise premium cross-check.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hybrid::{extract_exercise_boundary, price, ExerciseBoundary, NumericalConfig};
use crate::model::{ExerciseStyle, MarketModel, OptionContract, OptionKind};
use crate::montecarlo::{McConfig, McEstimate, PathRecord, PathSimulator};
use rayon::prelude::*;

/// `psi(t)` and `phi(t) = int_0^t psi` for `psi' = (sigma^2/2) psi^2 - kappa psi + w`, `psi(0) = z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiccatiSolution {
    pub psi: Complex64,
    pub phi: Complex64,
}

impl RiccatiSolution {
    /// `E[exp(z Y_t + w int_0^t Y)] = exp(y0 psi + theta kappa phi)`.
    pub fn transform(&self, y0: f64, theta: f64, kappa: f64) -> Complex64 {
        (self.psi * y0 + self.phi * (theta * kappa)).exp()
    }
}

pub fn riccati_solve(z: Complex64, w: Complex64, t: f64, kappa: f64, sigma: f64) -> Result<RiccatiSolution> {
    if z.re > 0.0 || w.re > 0.0 {
        return Err(Error::Domain(format!("need Re z <= 0 and Re w <= 0, got z={z}, w={w}")));
    }
    Ok(riccati_closed_form(z, w, t, kappa, sigma))
}

/// Closed form without the domain check; valid wherever the solution does not explode.
pub fn riccati_closed_form(z: Complex64, w: Complex64, t: f64, kappa: f64, sigma: f64) -> RiccatiSolution {
    let s2 = sigma * sigma;
    let mut d = (kappa * kappa - 2.0 * s2 * w).sqrt();
    if d.re < 0.0 {
        d = -d;
    }
    let x_minus = w * 2.0 / (kappa + d);
    let x_plus = (kappa + d) / s2;
    let den = z - x_plus;
    if den.norm() < 1e-14 * (1.0 + x_plus.norm()) {
        return RiccatiSolution { psi: z, phi: z * t };
    }
    let g = (z - x_minus) / den;
    let e = (-d * t).exp();
    let psi = (x_minus - x_plus * g * e) / (1.0 - g * e);
    let log_ratio = if g.norm() < 1.0 {
        ln_1p(-g * expm1(-d * t) / (1.0 - g))
    } else {
        unwrapped_log_ratio(g, d, t)
    };
    let phi = x_minus * t - log_ratio * (2.0 / s2);
    RiccatiSolution { psi, phi }
}

fn expm1(z: Complex64) -> Complex64 {
    let s = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * z.im.cos() - 2.0 * s * s, z.re.exp() * z.im.sin())
}

fn ln_1p(q: Complex64) -> Complex64 {
    Complex64::new(0.5 * (2.0 * q.re + q.norm_sqr()).ln_1p(), q.im.atan2(1.0 + q.re))
}

/// `log((1 - g e^{-d t}) / (1 - g))` continued along `s in [0, t]`.
///
/// Once `|g e^{-d s}| < 1` the curve stays in the disc around 1 and the
/// principal branch is exact; before that the path is followed in small steps.
fn unwrapped_log_ratio(g: Complex64, d: Complex64, t: f64) -> Complex64 {
    let s_star = if d.re > 0.0 { (g.norm().ln() / d.re).clamp(0.0, t) } else { t };
    let steps = 8 + (d.im.abs() * s_star * 4.0) as usize;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut prev = 1.0 - g;
    for m in 1..=steps {
        let s = s_star * m as f64 / steps as f64;
        let cur = 1.0 - g * (-d * s).exp();
        acc += (cur / prev).ln();
        prev = cur;
    }
    if s_star < t {
        acc += ((1.0 - g * (-d * t).exp()) / prev).ln();
    }
    acc
}

/// `E[exp(i u ln S_T)]` for deterministic rates.
pub fn bates_cf(u: f64, maturity: f64, model: &MarketModel) -> Result<Complex64> {
    if model.sigma_r != 0.0 {
        return Err(Error::Domain("characteristic function needs sigma_r = 0".into()));
    }
    Ok(bates_cf_complex(Complex64::new(u, 0.0), maturity, model))
}

/// Characteristic function at a complex argument (used with damping).
///
/// Writing `ln S_T = ln S_0 + c T + (rho/sigma)(Y_T - Y_0) + Z_T` with
/// `c = r - delta - rho kappa theta / sigma` isolates a pair `(Y_T, int Y)`
/// whose joint transform is the Riccati solution above.
pub fn bates_cf_complex(u: Complex64, maturity: f64, model: &MarketModel) -> Complex64 {
    let i = Complex64::i();
    let (kappa, theta, sigma) = (model.kappa_y, model.theta_y, model.sigma_y);
    let rho = model.rho1;
    let rate_int = model.phi_integral(maturity);
    let iu = i * u;
    let drift = model.s0.ln() + rate_int - model.delta * maturity - rho * kappa * theta / sigma * maturity;
    let z = iu * (rho / sigma);
    let w = iu * (rho * kappa / sigma - 0.5) + iu * iu * (0.5 * (1.0 - rho * rho));
    let sol = riccati_closed_form(z, w, maturity, kappa, sigma);
    let affine = (iu * drift + (sol.psi - z) * model.y0 + sol.phi * (kappa * theta)).exp();
    let m = model.gamma_j - 0.5 * model.eta_j * model.eta_j;
    let jump = (model.lambda * maturity * ((iu * m + iu * iu * (0.5 * model.eta_j * model.eta_j)).exp() - 1.0)).exp();
    affine * jump
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarrMadanConfig {
    pub alpha: f64,
    pub points: usize,
    /// Spacing of the integration grid in the transform variable.
    pub eta: f64,
}

impl Default for CarrMadanConfig {
    fn default() -> Self {
        CarrMadanConfig { alpha: 1.5, points: 1 << 14, eta: 0.25 }
    }
}

/// Calls on the log-strike grid `ln K + (m - N/2) lambda`, `lambda eta = 2 pi / N`.
pub fn carr_madan_calls(model: &MarketModel, strike: f64, maturity: f64, cfg: &CarrMadanConfig) -> Result<Vec<(f64, f64)>> {
    if model.sigma_r != 0.0 {
        return Err(Error::Domain("Carr-Madan pricer needs sigma_r = 0".into()));
    }
    let n = cfg.points;
    let (alpha, eta) = (cfg.alpha, cfg.eta);
    let lambda = 2.0 * PI / (n as f64 * eta);
    let b0 = strike.ln() - (n / 2) as f64 * lambda;
    let disc = (-model.phi_integral(maturity)).exp();
    let i = Complex64::i();
    let mut buf: Vec<Complex64> = (0..n)
        .map(|j| {
            let v = j as f64 * eta;
            let u = Complex64::new(v, -(alpha + 1.0));
            let cf = bates_cf_complex(u, maturity, model);
            let denom = Complex64::new(alpha * alpha + alpha - v * v, (2.0 * alpha + 1.0) * v);
            let psi = cf * disc / denom;
            let simpson = if j == 0 { 1.0 / 3.0 } else if j % 2 == 1 { 4.0 / 3.0 } else { 2.0 / 3.0 };
            (-i * v * b0).exp() * psi * eta * simpson
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(n);
    fft.process(&mut buf);
    let out = buf
        .iter()
        .enumerate()
        .map(|(m, z)| {
            let k = b0 + m as f64 * lambda;
            (k.exp(), (-alpha * k).exp() / PI * z.re)
        })
        .collect();
    Ok(out)
}

pub fn carr_madan_price(model: &MarketModel, strike: f64, maturity: f64, kind: OptionKind) -> Result<f64> {
    carr_madan_price_with(model, strike, maturity, kind, &CarrMadanConfig::default())
}

pub fn carr_madan_price_with(
    model: &MarketModel,
    strike: f64,
    maturity: f64,
    kind: OptionKind,
    cfg: &CarrMadanConfig,
) -> Result<f64> {
    let calls = carr_madan_calls(model, strike, maturity, cfg)?;
    let call = calls[cfg.points / 2].1;
    if !call.is_finite() {
        return Err(Error::Numerical("non-finite Carr-Madan price".into()));
    }
    Ok(match kind {
        OptionKind::Call => call,
        OptionKind::Put => {
            call - model.s0 * (-model.delta * maturity).exp() + strike * (-model.phi_integral(maturity)).exp()
        }
    })
}

/// Bond factor `G(t, r) = E[exp(-sigma_r int_t^T R)]` for the unit-volatility OU factor started at `r`.
pub fn vasicek_bond_factor(t: f64, r: f64, maturity: f64, kappa: f64, sigma: f64) -> f64 {
    let tau = maturity - t;
    let lam = (1.0 - (-kappa * tau).exp()) / kappa;
    (-r * sigma * lam - sigma * sigma / (2.0 * kappa * kappa) * (lam - tau) - sigma * sigma / (4.0 * kappa) * lam * lam).exp()
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Black-Scholes price with continuous dividend yield.
pub fn black_scholes(s0: f64, strike: f64, maturity: f64, r: f64, delta: f64, vol: f64, kind: OptionKind) -> f64 {
    let fwd_s = s0 * (-delta * maturity).exp();
    let fwd_k = strike * (-r * maturity).exp();
    if vol <= 0.0 || maturity <= 0.0 {
        return match kind {
            OptionKind::Call => (fwd_s - fwd_k).max(0.0),
            OptionKind::Put => (fwd_k - fwd_s).max(0.0),
        };
    }
    let sd = vol * maturity.sqrt();
    let d1 = (fwd_s / fwd_k).ln() / sd + 0.5 * sd;
    let d2 = d1 - sd;
    let n = std_normal();
    match kind {
        OptionKind::Call => fwd_s * n.cdf(d1) - fwd_k * n.cdf(d2),
        OptionKind::Put => fwd_k * n.cdf(-d2) - fwd_s * n.cdf(-d1),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpliedVol {
    pub vol: f64,
    /// Price sat on the lower no-arbitrage bound.
    pub at_bound: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn implied_vol(
    price: f64,
    s0: f64,
    strike: f64,
    maturity: f64,
    r: f64,
    delta: f64,
    kind: OptionKind,
) -> Result<ImpliedVol> {
    let fwd_s = s0 * (-delta * maturity).exp();
    let fwd_k = strike * (-r * maturity).exp();
    let (lower, upper) = match kind {
        OptionKind::Call => ((fwd_s - fwd_k).max(0.0), fwd_s),
        OptionKind::Put => ((fwd_k - fwd_s).max(0.0), fwd_k),
    };
    if !(price >= lower - 1e-12 && price < upper) {
        return Err(Error::Arb { price, lower, upper });
    }
    if price <= lower + 1e-14 {
        return Ok(ImpliedVol { vol: 0.0, at_bound: true });
    }
    let f = |v: f64| black_scholes(s0, strike, maturity, r, delta, v, kind) - price;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Numerical("implied volatility above 1000".into()));
        }
    }
    let n = std_normal();
    let mut v = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fv = f(v);
        if fv.abs() <= 1e-12 {
            break;
        }
        if fv > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let sd = v * maturity.sqrt();
        let d1 = (fwd_s / fwd_k).ln() / sd + 0.5 * sd;
        let vega = fwd_s * maturity.sqrt() * (-0.5 * d1 * d1).exp() / (2.0 * PI).sqrt();
        let newton = v - fv / vega;
        v = if vega > 1e-300 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 {
            break;
        }
        let _ = &n;
    }
    Ok(ImpliedVol { vol: v, at_bound: false })
}

/// `(P_{N/2} - P_{N/4}) / (P_N - P_{N/2})`.
pub fn convergence_ratio(p_n: f64, p_half: f64, p_quarter: f64) -> Result<f64> {
    let den = p_n - p_half;
    if den.abs() < 1e-14 {
        return Err(Error::Degenerate(den.abs()));
    }
    Ok((p_half - p_quarter) / den)
}

/// Outcome of the early-exercise premium cross-check.
#[derive(Clone, Debug, PartialEq)]
pub struct EepCheck {
    pub american: f64,
    pub european: f64,
    /// Monte Carlo estimate of the premium integral.
    pub premium: McEstimate,
    pub residual: f64,
}

/// `-int_0^T e^{-r s} E[(delta S_s - r K) 1{S_s <= b(s, Y_s)}] ds` by left-point sums along simulated paths.
pub fn eep_integral(
    model: &MarketModel,
    contract: &OptionContract,
    boundary: &ExerciseBoundary,
    mc: &McConfig,
) -> Result<McEstimate> {
    check_heston_put(model, contract)?;
    mc.validate()?;
    if boundary.values.len() != mc.steps + 1 {
        return Err(Error::Shape { expected: mc.steps + 1, got: boundary.values.len() });
    }
    let sim = PathSimulator::new(model, contract.maturity, mc.steps, mc.seed)?;
    let (r, delta, k) = (model.phi(0.0), model.delta, contract.strike);
    let h = sim.h;
    let values: Vec<f64> = (0..mc.paths)
        .into_par_iter()
        .map_init(
            || (PathRecord::default(), Vec::new()),
            |(rec, jumps), p| {
                sim.simulate(p, rec, jumps);
                let mut acc = 0.0;
                for n in 0..mc.steps {
                    let s = rec.x[n].exp();
                    if s <= boundary.values[n][rec.k[n]][rec.j[n]] {
                        acc -= (-rec.rate_integral[n]).exp() * (delta * s - r * k) * h;
                    }
                }
                acc
            },
        )
        .collect();
    Ok(McEstimate::from_values(&values, mc.seed))
}

fn check_heston_put(model: &MarketModel, contract: &OptionContract) -> Result<()> {
    if model.lambda != 0.0 || model.sigma_r != 0.0 || contract.kind != OptionKind::Put {
        return Err(Error::Scope("premium check needs a Heston put (lambda = 0, sigma_r = 0)".into()));
    }
    Ok(())
}

/// `(P_am - P_eu)` from the hybrid engine against the premium integral over its own exercise boundary.
pub fn early_exercise_premium_check(
    model: &MarketModel,
    contract: &OptionContract,
    config: &NumericalConfig,
    mc: &McConfig,
) -> Result<EepCheck> {
    check_heston_put(model, contract)?;
    let am_contract = OptionContract { style: ExerciseStyle::American, ..*contract };
    let eu_contract = OptionContract { style: ExerciseStyle::European, ..*contract };
    let cfg = NumericalConfig { retain_surfaces: true, ..config.clone() };
    let am = price(model, &am_contract, &cfg)?;
    let eu = price(model, &eu_contract, config)?;
    let boundary = extract_exercise_boundary(&am, &am_contract)?;
    let mc = McConfig { steps: config.steps, ..*mc };
    let premium = eep_integral(model, &am_contract, &boundary, &mc)?;
    Ok(EepCheck {
        american: am.price,
        european: eu.price,
        residual: am.price - eu.price - premium.mean,
        premium,
    })
}
