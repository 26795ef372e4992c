//! Invariant groups run by `bates validate`, sized to finish in seconds.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fd::{apply_b, apply_b_direct, build_levy_grid, solve_tridiag, JumpOperator, Scheme, TriDiag};
use crate::hybrid::{price, NumericalConfig};
use crate::lattice::{build_cir_tree, build_rate_tree, joint_transition, local_moments, TreeKind};
use crate::model::{validate, ExerciseStyle, JumpDensity, MarketModel, OptionContract, RateCurve};
use crate::montecarlo::{price_american_ls, price_european_mc, McConfig};
use crate::reference::{bates_cf_complex, black_scholes, carr_madan_price, implied_vol, vasicek_bond_factor};

pub const GROUPS: [&str; 6] = ["model", "lattice", "fd", "hybrid", "montecarlo", "reference"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub group: &'static str,
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

struct Recorder {
    group: &'static str,
    checks: Vec<Check>,
}

impl Recorder {
    /// Pass when `value <= limit`; an engine error counts as a failure with `value = NaN`.
    fn at_most(&mut self, name: &'static str, limit: f64, f: impl FnOnce() -> Result<f64>) {
        let value = f().unwrap_or(f64::NAN);
        self.checks.push(Check { group: self.group, name, value, limit, pass: value <= limit });
    }
}

/// Runs every group, or only `only`. Unknown group names are an input error.
pub fn run(
    model: &MarketModel,
    contract: &OptionContract,
    numerics: &NumericalConfig,
    mc: &McConfig,
    only: Option<&str>,
) -> Result<Vec<Check>> {
    if let Some(g) = only {
        if !GROUPS.contains(&g) {
            return Err(Error::Param(format!("unknown group '{g}', expected one of {}", GROUPS.join(", "))));
        }
    }
    let wanted = |g: &str| only.is_none_or(|o| o == g);
    let mut out = Vec::new();
    let checked = validate(model);
    if wanted("model") {
        out.extend(model_group(model, checked.as_ref().ok()));
    }
    let Ok(m) = checked else {
        if !wanted("model") {
            out.push(Check { group: "model", name: "validate", value: 1.0, limit: 0.0, pass: false });
        }
        return Ok(out);
    };
    let c = contract.validate()?;
    let coarse = NumericalConfig {
        steps: numerics.steps.min(50),
        dx: numerics.dx.max(0.01),
        ..numerics.clone()
    };
    if wanted("lattice") {
        out.extend(lattice_group(&m, &c, numerics.steps.min(200)));
    }
    if wanted("fd") {
        out.extend(fd_group(&m));
    }
    if wanted("hybrid") {
        out.extend(hybrid_group(&m, &c, &coarse));
    }
    if wanted("montecarlo") {
        out.extend(mc_group(&m, &c, &coarse, mc));
    }
    if wanted("reference") {
        out.extend(reference_group(&m, &c, &coarse));
    }
    Ok(out)
}

fn model_group(raw: &MarketModel, m: Option<&MarketModel>) -> Vec<Check> {
    let mut r = Recorder { group: "model", checks: Vec::new() };
    r.at_most("validate", 0.0, || Ok(if m.is_some() { 0.0 } else { 1.0 }));
    let Some(m) = m else { return r.checks };
    r.at_most("idempotent", 0.0, || Ok(if validate(m)? == *m { 0.0 } else { 1.0 }));
    r.at_most("correlation_norm", 1e-12, || {
        Ok((m.rho1 * m.rho1 + m.rho2 * m.rho2 + m.rho3 * m.rho3 - 1.0).abs())
    });
    r.at_most("levy_mass", 1e-8, || {
        let nu = m.levy();
        let (a, b, n) = (m.gamma_j - 12.0 * m.eta_j, m.gamma_j + 12.0 * m.eta_j, 20_000);
        let h = (b - a) / n as f64;
        let mut s = nu.density(a) + nu.density(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * nu.density(a + i as f64 * h);
        }
        Ok((s * h / 3.0 - nu.intensity()).abs() / nu.intensity().max(1.0))
    });
    let flat = match &raw.curve {
        None => Some(raw.r0),
        Some(RateCurve::Flat { rate }) => Some(*rate),
        _ => None,
    };
    if let (Some(rate), true) = (flat, m.sigma_r > 0.0) {
        r.at_most("bond_fit", 1e-8, || {
            let t = 1.0;
            let p = (-m.phi_integral(t)).exp() * vasicek_bond_factor(0.0, 0.0, t, m.kappa_r, m.sigma_r);
            Ok((p - (-rate * t).exp()).abs())
        });
    }
    r.checks
}

fn lattice_group(m: &MarketModel, c: &OptionContract, steps: usize) -> Vec<Check> {
    let mut r = Recorder { group: "lattice", checks: Vec::new() };
    let t = c.maturity;
    let cir = build_cir_tree(m, t, steps);
    let rates = build_rate_tree(m, t, steps);
    r.at_most("probabilities_in_unit_interval", 0.0, || {
        let bad = cir.pu.iter().chain(&rates.pu).flatten().filter(|p| !(0.0..=1.0).contains(*p)).count();
        Ok(bad as f64)
    });
    r.at_most("cir_local_mean", 1e-12, || {
        let mut worst: f64 = 0.0;
        for n in 0..steps {
            for k in 0..cir.width(n) {
                if cir.clamped[n][k] {
                    continue;
                }
                let m1 = local_moments(&cir, n, k, 1)?;
                worst = worst.max((m1 - m.mu_y(cir.values[n][k]) * cir.h).abs());
            }
        }
        Ok(worst)
    });
    r.at_most("terminal_mass", 1e-12, || Ok((cir.terminal_distribution().iter().sum::<f64>() - 1.0).abs()));
    r.at_most("cir_terminal_mean", 1e-3, || {
        let exact = m.theta_y + (m.y0 - m.theta_y) * (-m.kappa_y * t).exp();
        Ok((cir.expectation(|y| y) - exact).abs())
    });
    if rates.kind == TreeKind::Ou {
        r.at_most("ou_terminal_mean", 1e-12, || Ok(rates.expectation(|x| x).abs()));
        r.at_most("ou_terminal_variance", 2e-2, || {
            let exact = (1.0 - (-2.0 * m.kappa_r * t).exp()) / (2.0 * m.kappa_r);
            Ok((rates.expectation(|x| x * x) / exact - 1.0).abs())
        });
    }
    r.at_most("joint_rows", 1e-12, || {
        let mut worst: f64 = 0.0;
        for n in 0..steps {
            for k in 0..cir.width(n) {
                for j in 0..rates.width(n) {
                    worst = worst.max((joint_transition(&cir, &rates, n, k, j)?.total() - 1.0).abs());
                }
            }
        }
        Ok(worst)
    });
    r.checks
}

fn dense(a: &TriDiag, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match j as isize - i as isize {
        -1 => a.lower,
        0 => a.diag,
        1 => a.upper,
        _ => 0.0,
    })
}

fn fd_group(m: &MarketModel) -> Vec<Check> {
    let mut r = Recorder { group: "fd", checks: Vec::new() };
    let dx = 0.01;
    let h = 0.005;
    let levy = match build_levy_grid(&m.levy(), dx, 1e-10) {
        Ok(l) => l,
        Err(_) => {
            r.at_most("levy_grid", 0.0, || Ok(1.0));
            return r.checks;
        }
    };
    let n = 301;
    let v: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 101.0 - 0.5).collect();
    r.at_most("fft_vs_direct", 1e-10, || {
        let fast = apply_b(&v, &levy, h)?;
        let slow = apply_b_direct(&v, &levy, h);
        Ok(fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    });
    r.at_most("thomas_vs_dense", 1e-12, || {
        let mut worst: f64 = 0.0;
        for &(alpha, beta, scheme) in &[(0.4, 0.3, Scheme::Central), (-0.7, 1.2, Scheme::Upwind), (1.5, 0.1, Scheme::Central)] {
            let a = TriDiag::from_coeffs(alpha, beta, scheme);
            let x = solve_tridiag(&a, &v)?;
            let y = dense(&a, n).lu().solve(&nalgebra::DVector::from_column_slice(&v)).ok_or(Error::Singular { row: 0, pivot: 0.0 })?;
            let scale = y.amax().max(1e-300);
            worst = worst.max(x.iter().zip(y.iter()).map(|(a, b)| (a - b).abs() / scale).fold(0.0, f64::max));
        }
        Ok(worst)
    });
    r.at_most("upwind_row_sums", 1e-12, || {
        let pad = 200;
        let size = 61 + 2 * pad;
        let mut bm = DMatrix::identity(size, size);
        let l = levy.l as isize;
        for i in 0..size as isize {
            for k in -l..=l {
                if (0..size as isize).contains(&(i + k)) {
                    bm[(i as usize, (i + k) as usize)] += h * dx * levy.nu_at(k);
                }
            }
            bm[(i as usize, i as usize)] -= h * dx * levy.total;
        }
        let a = TriDiag::from_coeffs(0.4, 0.3, Scheme::Upwind);
        let pi = dense(&a, size).lu().solve(&bm).ok_or(Error::Singular { row: 0, pivot: 0.0 })?;
        Ok((pad..pad + 61).map(|i| (pi.row(i).sum() - 1.0).abs()).fold(0.0, f64::max))
    });
    let bound = 1.0 + 2.0 * levy.mass() * 1.01 * h;
    r.at_most("b_gain", bound, || {
        let op = JumpOperator::new(&levy, n);
        let mut x = v.clone();
        let mut gain = 0.0;
        for _ in 0..200 {
            let bx = op.apply(&x, h)?;
            let rev: Vec<f64> = bx.iter().rev().copied().collect();
            let btbx: Vec<f64> = op.apply(&rev, h)?.into_iter().rev().collect();
            let norm = btbx.iter().map(|a| a * a).sum::<f64>().sqrt();
            let xn = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            gain = (norm / xn).sqrt();
            x = btbx.iter().map(|a| a / norm).collect();
        }
        Ok(gain)
    });
    r.checks
}

fn styled(c: &OptionContract, style: ExerciseStyle) -> OptionContract {
    OptionContract { style, ..*c }
}

fn hybrid_group(m: &MarketModel, c: &OptionContract, cfg: &NumericalConfig) -> Vec<Check> {
    let mut r = Recorder { group: "hybrid", checks: Vec::new() };
    let eu = price(m, &styled(c, ExerciseStyle::European), cfg);
    let am_cfg = NumericalConfig { retain_surfaces: true, ..cfg.clone() };
    let am = price(m, &styled(c, ExerciseStyle::American), &am_cfg);
    r.at_most("european_nonnegative", 0.0, || Ok(-eu.as_ref().map_err(Clone::clone)?.price));
    r.at_most("american_minus_european", 1e-9, || {
        Ok(eu.as_ref().map_err(Clone::clone)?.price - am.as_ref().map_err(Clone::clone)?.price)
    });
    r.at_most("payoff_minus_american", 1e-9, || {
        let res = am.as_ref().map_err(Clone::clone)?;
        let s = &res.surfaces.as_ref().ok_or(Error::Style)?[0];
        let xs = res.node_grid(0, 0).points();
        Ok(xs.iter().zip(s.slice(0, 0)).map(|(&x, u)| c.payoff_log(x) - u).fold(f64::MIN, f64::max))
    });
    r.at_most("variance_monotone", 1e-6, || {
        let bumped = MarketModel { y0: m.y0 + 0.01, ..m.clone() };
        let up = price(&bumped, &styled(c, ExerciseStyle::European), cfg)?.price;
        Ok(eu.as_ref().map_err(Clone::clone)?.price - up)
    });
    if m.sigma_r > 0.0 {
        r.at_most("threshold_default_vs_10", 1e-6, || {
            let at = |v: f64| price(m, c, &NumericalConfig { threshold: Some(v), ..cfg.clone() }).map(|p| p.price);
            Ok((at(5.0)? - at(10.0)?).abs())
        });
    }
    r.checks
}

fn mc_group(m: &MarketModel, c: &OptionContract, cfg: &NumericalConfig, mc: &McConfig) -> Vec<Check> {
    let mut r = Recorder { group: "montecarlo", checks: Vec::new() };
    let small = McConfig { paths: mc.paths.min(20_000), steps: 50, exercise_dates: 10, ..mc.clone() };
    let eu = price_european_mc(m, &styled(c, ExerciseStyle::European), &small);
    r.at_most("european_vs_htfd_in_widths", 3.0, || {
        let e = eu.as_ref().map_err(Clone::clone)?;
        let h = price(m, &styled(c, ExerciseStyle::European), cfg)?.price;
        // 0.05 absorbs the time bias of the coarse runs
        Ok(((e.mean - h).abs() - 0.05).max(0.0) / e.half_width)
    });
    r.at_most("ls_above_european_in_widths", 2.0, || {
        let e = eu.as_ref().map_err(Clone::clone)?;
        let a = price_american_ls(m, &styled(c, ExerciseStyle::American), &small)?;
        Ok((e.mean - a.mean) / e.half_width.hypot(a.half_width))
    });
    r.at_most("seed_reproducible", 0.0, || {
        let tiny = McConfig { paths: 2000, ..small.clone() };
        let a = price_european_mc(m, &styled(c, ExerciseStyle::European), &tiny)?;
        let b = price_european_mc(m, &styled(c, ExerciseStyle::European), &tiny)?;
        Ok(if a.mean.to_bits() == b.mean.to_bits() { 0.0 } else { 1.0 })
    });
    r.checks
}

fn reference_group(m: &MarketModel, c: &OptionContract, cfg: &NumericalConfig) -> Vec<Check> {
    let mut r = Recorder { group: "reference", checks: Vec::new() };
    r.at_most("implied_vol_roundtrip", 1e-8, || {
        let t = c.maturity;
        let p = black_scholes(m.s0, c.strike, t, m.r0, m.delta, 0.23, c.kind);
        Ok((implied_vol(p, m.s0, c.strike, t, m.r0, m.delta, c.kind)?.vol - 0.23).abs())
    });
    if m.sigma_r == 0.0 {
        r.at_most("cf_martingale", 1e-10, || {
            let t = c.maturity;
            let fwd = m.s0 * (m.phi_integral(t) - m.delta * t).exp();
            Ok((bates_cf_complex(Complex64::new(0.0, -1.0), t, m) - fwd).norm() / fwd)
        });
        r.at_most("carr_madan_vs_htfd", 2e-2, || {
            let cm = carr_madan_price(m, c.strike, c.maturity, c.kind)?;
            let h = price(m, &styled(c, ExerciseStyle::European), cfg)?.price;
            Ok((cm - h).abs())
        });
    } else {
        r.at_most("bond_factor_vs_tree", 1e-3, || {
            // forward induction of the discount weight over the rate tree
            let t = c.maturity;
            let tree = build_rate_tree(m, t, 200);
            let mut w = vec![1.0];
            for n in 0..tree.steps {
                let mut next = vec![0.0; tree.width(n + 1)];
                for (j, &wj) in w.iter().enumerate() {
                    let d = wj * (-m.sigma_r * tree.values[n][j] * tree.h).exp();
                    next[tree.ku[n][j]] += tree.pu[n][j] * d;
                    next[tree.kd[n][j]] += (1.0 - tree.pu[n][j]) * d;
                }
                w = next;
            }
            let exact = vasicek_bond_factor(0.0, 0.0, t, m.kappa_r, m.sigma_r);
            Ok((w.iter().sum::<f64>() / exact - 1.0).abs())
        });
    }
    r.checks
}
