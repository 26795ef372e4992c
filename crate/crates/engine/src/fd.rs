//! Log-price grid, jump quadrature, the implicit tridiagonal operator `A`,
//! the explicit jump operator `B` and the boundary vector `d`.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{JumpDensity, MarketModel, OptionContract};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WidthPolicy {
    /// `[ln S0 - c_minus, ln S0 + c_plus]`, optionally scaled by `sqrt(T theta_Y / 0.02)`.
    Localized { c_minus: f64, c_plus: f64, scale: bool },
    Fixed { m: usize },
}

impl Default for WidthPolicy {
    fn default() -> Self {
        WidthPolicy::Localized { c_minus: 1.59, c_plus: 1.93, scale: true }
    }
}

/// Points `x_i = x0 + i dx` for `i` in `[-M, M]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceGrid {
    pub x0: f64,
    pub dx: f64,
    pub m: usize,
}

impl SpaceGrid {
    pub fn len(&self) -> usize {
        2 * self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: isize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    /// Storage offset of grid index `i`.
    pub fn pos(&self, i: isize) -> usize {
        (i + self.m as isize) as usize
    }

    pub fn points(&self) -> Vec<f64> {
        let m = self.m as isize;
        (-m..=m).map(|i| self.x(i)).collect()
    }

    pub fn check_levy(&self, levy: &LevyGrid) -> Result<()> {
        if self.m < levy.l + 2 {
            return Err(Error::Grid(format!(
                "half-width M={} must be at least L+2={}",
                self.m,
                levy.l + 2
            )));
        }
        Ok(())
    }
}

pub fn build_space_grid(
    model: &MarketModel,
    contract: &OptionContract,
    dx: f64,
    policy: WidthPolicy,
) -> Result<SpaceGrid> {
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::Grid(format!("dx must be > 0, got {dx}")));
    }
    let m = match policy {
        WidthPolicy::Fixed { m } => m,
        WidthPolicy::Localized { c_minus, c_plus, scale } => {
            let f = if scale {
                (contract.maturity * model.theta_y / (0.5 * 0.04)).sqrt()
            } else {
                1.0
            };
            let c = c_minus.max(c_plus) * f;
            (c / dx - 1e-9).ceil().max(1.0) as usize
        }
    };
    if m < 2 {
        return Err(Error::Grid(format!("half-width M={m} too small")));
    }
    Ok(SpaceGrid { x0: model.s0.ln(), dx, m })
}

/// `nu(l dx)` for `|l| <= L` and `Lambda = sum_l nu(l dx)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyGrid {
    pub l: usize,
    pub dx: f64,
    pub nu: Vec<f64>,
    pub total: f64,
}

impl LevyGrid {
    pub fn nu_at(&self, l: isize) -> f64 {
        self.nu[(l + self.l as isize) as usize]
    }

    /// Quadrature mass `sum_l nu(l dx) dx`, the discrete counterpart of `lambda`.
    pub fn mass(&self) -> f64 {
        self.total * self.dx
    }

    pub fn is_trivial(&self) -> bool {
        self.total == 0.0
    }
}

pub fn build_levy_grid(levy: &impl JumpDensity, dx: f64, tol: f64) -> Result<LevyGrid> {
    assert!(tol > 0.0 && dx > 0.0);
    let lambda = levy.intensity();
    if lambda == 0.0 {
        return Ok(LevyGrid { l: 0, dx, nu: vec![0.0], total: 0.0 });
    }
    let mut sum = levy.density(0.0) * dx;
    let mut l = 0usize;
    while (sum - lambda).abs() > tol {
        l += 1;
        let add = (levy.density(l as f64 * dx) + levy.density(-(l as f64) * dx)) * dx;
        sum += add;
        if (add < 1e-17 * lambda && l as f64 * dx > 1.0) || l > 10_000_000 {
            return Err(Error::Tol { tol, dx });
        }
    }
    let li = l as isize;
    let nu: Vec<f64> = (-li..=li).map(|k| levy.density(k as f64 * dx)).collect();
    let total = nu.iter().sum();
    Ok(LevyGrid { l, dx, nu, total })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Central,
    Upwind,
}

/// Constant-coefficient tridiagonal matrix, row `i`: `lower u_{i-1} + diag u_i + upper u_{i+1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TriDiag {
    pub alpha: f64,
    pub beta: f64,
    pub lower: f64,
    pub diag: f64,
    pub upper: f64,
    pub scheme: Scheme,
}

impl TriDiag {
    pub fn from_coeffs(alpha: f64, beta: f64, scheme: Scheme) -> Self {
        let (lower, diag, upper) = match scheme {
            Scheme::Central => (alpha - beta, 1.0 + 2.0 * beta, -(alpha + beta)),
            Scheme::Upwind => {
                let a = alpha.abs();
                let lo = -beta - if alpha < 0.0 { a } else { 0.0 };
                let up = -beta - if alpha > 0.0 { a } else { 0.0 };
                (lo, 1.0 + 2.0 * beta + a, up)
            }
        };
        TriDiag { alpha, beta, lower, diag, upper, scheme }
    }

    /// `A v` with zero values outside the grid.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag * v[i];
                if i > 0 {
                    s += self.lower * v[i - 1];
                }
                if i + 1 < n {
                    s += self.upper * v[i + 1];
                }
                s
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_a(
    model: &MarketModel,
    y: f64,
    r: f64,
    t: f64,
    h: f64,
    grid: &SpaceGrid,
    scheme: Scheme,
) -> TriDiag {
    let mu = model.mu_eff(y, r, t);
    let dx = grid.dx;
    let alpha = match scheme {
        Scheme::Central => h / (2.0 * dx) * mu,
        Scheme::Upwind => h / dx * mu,
    };
    let beta = h / (2.0 * dx * dx) * model.rho3 * model.rho3 * y;
    TriDiag::from_coeffs(alpha, beta, scheme)
}

/// Thomas elimination for a general tridiagonal system; `lower[0]` and `upper[n-1]` are ignored.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    for len in [lower.len(), diag.len(), upper.len()] {
        if len != n {
            return Err(Error::Shape { expected: n, got: len });
        }
    }
    let mut c = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut denom = diag[0];
    for i in 0..n {
        if i > 0 {
            denom = diag[i] - lower[i] * c[i - 1];
        }
        if denom.abs() < 1e-300 || !denom.is_finite() {
            return Err(Error::Singular { row: i, pivot: denom });
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        let prev = if i > 0 { lower[i] * out[i - 1] } else { 0.0 };
        out[i] = (rhs[i] - prev) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        out[i] -= c[i] * out[i + 1];
    }
    Ok(out)
}

pub fn solve_tridiag(a: &TriDiag, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; rhs.len()];
    let mut scratch = vec![0.0; rhs.len()];
    solve_tridiag_into(a, rhs, &mut out, &mut scratch)?;
    Ok(out)
}

/// Allocation-free variant of [`solve_tridiag`].
pub fn solve_tridiag_into(a: &TriDiag, rhs: &[f64], out: &mut [f64], c: &mut [f64]) -> Result<()> {
    let n = rhs.len();
    if out.len() != n || c.len() != n {
        return Err(Error::Shape { expected: n, got: out.len().min(c.len()) });
    }
    let mut denom = a.diag;
    for i in 0..n {
        if i > 0 {
            denom = a.diag - a.lower * c[i - 1];
        }
        if denom.abs() < 1e-300 || !denom.is_finite() {
            return Err(Error::Singular { row: i, pivot: denom });
        }
        c[i] = a.upper / denom;
        let prev = if i > 0 { a.lower * out[i - 1] } else { 0.0 };
        out[i] = (rhs[i] - prev) / denom;
    }
    for i in (0..n - 1).rev() {
        out[i] -= c[i] * out[i + 1];
    }
    Ok(())
}

/// `(B v)_i = v_i + h dx [sum_l nu(l dx) v_{i+l} - Lambda v_i]` with `v = 0` off the grid, by direct summation.
pub fn apply_b_direct(values: &[f64], levy: &LevyGrid, h: f64) -> Vec<f64> {
    let n = values.len() as isize;
    let l = levy.l as isize;
    let c = h * levy.dx;
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for k in -l..=l {
                let idx = i + k;
                if (0..n).contains(&idx) {
                    s += levy.nu_at(k) * values[idx as usize];
                }
            }
            values[i as usize] + c * (s - levy.total * values[i as usize])
        })
        .collect()
}

/// FFT-backed jump operator with the kernel transform precomputed.
#[derive(Clone)]
pub struct JumpOperator {
    pub levy: LevyGrid,
    pub n: usize,
    pub fft_len: usize,
    kernel_hat: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Per-worker buffers for [`JumpOperator::apply_into`].
pub struct JumpScratch {
    buf: Vec<Complex64>,
    work: Vec<Complex64>,
}

impl JumpOperator {
    pub fn new(levy: &LevyGrid, n: usize) -> Self {
        let l = levy.l;
        let fft_len = (n + 2 * l).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        // kernel g[t + L] = nu(-t dx), so (v * g)[i + L] = sum_l nu(l dx) v_{i+l}
        let mut kernel = vec![Complex64::new(0.0, 0.0); fft_len];
        for t in 0..=2 * l {
            kernel[t] = Complex64::new(levy.nu[2 * l - t], 0.0);
        }
        forward.process(&mut kernel);
        JumpOperator { levy: levy.clone(), n, fft_len, kernel_hat: kernel, forward, inverse }
    }

    pub fn scratch(&self) -> JumpScratch {
        let work_len = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        JumpScratch {
            buf: vec![Complex64::new(0.0, 0.0); self.fft_len],
            work: vec![Complex64::new(0.0, 0.0); work_len],
        }
    }

    pub fn apply(&self, values: &[f64], h: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; values.len()];
        self.apply_into(values, h, &mut out, &mut self.scratch())?;
        Ok(out)
    }

    pub fn apply_into(&self, values: &[f64], h: f64, out: &mut [f64], s: &mut JumpScratch) -> Result<()> {
        if values.len() != self.n || out.len() != self.n {
            return Err(Error::Shape { expected: self.n, got: values.len().min(out.len()) });
        }
        if self.levy.is_trivial() {
            out.copy_from_slice(values);
            return Ok(());
        }
        let zero = Complex64::new(0.0, 0.0);
        s.buf.iter_mut().for_each(|z| *z = zero);
        for (z, &v) in s.buf.iter_mut().zip(values) {
            z.re = v;
        }
        self.forward.process_with_scratch(&mut s.buf, &mut s.work);
        for (z, k) in s.buf.iter_mut().zip(&self.kernel_hat) {
            *z *= k;
        }
        self.inverse.process_with_scratch(&mut s.buf, &mut s.work);
        let scale = 1.0 / self.fft_len as f64;
        let c = h * self.levy.dx;
        let l = self.levy.l;
        for i in 0..self.n {
            let conv = s.buf[i + l].re * scale;
            out[i] = values[i] + c * (conv - self.levy.total * values[i]);
        }
        Ok(())
    }
}

pub fn apply_b(values: &[f64], levy: &LevyGrid, h: f64) -> Result<Vec<f64>> {
    JumpOperator::new(levy, values.len()).apply(values, h)
}

/// Index ranges of the jump overhang in the boundary vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverhangMode {
    /// Every row whose stencil leaves the grid on either side.
    #[default]
    Symmetric,
    /// Right-hand rows stop at `M-1`.
    Literal,
}

/// Jump part `a_b^{n+1}` of the boundary vector for boundary values `b(x)` at the later time.
pub fn jump_overhang(
    grid: &SpaceGrid,
    levy: &LevyGrid,
    h: f64,
    b_next: impl Fn(f64) -> f64,
    mode: OverhangMode,
) -> Vec<f64> {
    let m = grid.m as isize;
    let l = levy.l as isize;
    let mut d = vec![0.0; grid.len()];
    if levy.is_trivial() {
        return d;
    }
    let c = h * grid.dx;
    // b at x_{-M-L}, ..., x_{-M-1} and x_{M+1}, ..., x_{M+L}
    let left: Vec<f64> = (-m - l..=-m - 1).map(|i| b_next(grid.x(i))).collect();
    let right: Vec<f64> = (m + 1..=m + l).map(|i| b_next(grid.x(i))).collect();
    for i in -m..(-m + l).min(m + 1) {
        let s: f64 = (-l..=(-m - i - 1)).map(|k| levy.nu_at(k) * left[(i + k + m + l) as usize]).sum();
        d[grid.pos(i)] += c * s;
    }
    let right_end = match mode {
        OverhangMode::Symmetric => m,
        OverhangMode::Literal => m - 1,
    };
    for i in (m - l + 1).max(-m)..=right_end {
        let s: f64 = ((m - i + 1)..=l).map(|k| levy.nu_at(k) * right[(i + k - m - 1) as usize]).sum();
        d[grid.pos(i)] += c * s;
    }
    d
}

/// `d = a_b^n + a_b^{n+1}`: edge terms of `A` at `x_{-M-1}`, `x_{M+1}` plus the jump overhang.
pub fn boundary_vector(
    a: &TriDiag,
    grid: &SpaceGrid,
    levy: &LevyGrid,
    h: f64,
    b_now: impl Fn(f64) -> f64,
    b_next: impl Fn(f64) -> f64,
    mode: OverhangMode,
) -> Vec<f64> {
    let mut d = jump_overhang(grid, levy, h, b_next, mode);
    let m = grid.m as isize;
    d[0] += -a.lower * b_now(grid.x(-m - 1));
    let last = grid.len() - 1;
    d[last] += -a.upper * b_now(grid.x(m + 1));
    d
}

/// Default boundary function: the payoff itself.
pub fn payoff_boundary(contract: &OptionContract) -> impl Fn(f64) -> f64 + '_ {
    move |x| contract.payoff_log(x)
}
