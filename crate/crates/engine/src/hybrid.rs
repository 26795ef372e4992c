//! Backward tree/finite-difference engine.
//!
//! The variance and rate factors move on their binomial trees; for every
//! tree node the log-price direction is advanced by one implicit step of the
//! local PIDE with an explicit jump term. The correlation with the factors
//! enters through a deterministic shift of the log-price grid, resolved by
//! linear interpolation. By default each variance node carries its own grid,
//! offset by `(rho1/sigma_Y)(y - Y0)`, so the variance part of the shift maps
//! grid points onto grid points and only the rate part is interpolated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::fd::{
    assemble_a, build_levy_grid, build_space_grid, jump_overhang, solve_tridiag_into, JumpOperator,
    JumpScratch, LevyGrid, OverhangMode, Scheme, SpaceGrid, TriDiag, WidthPolicy,
};
use crate::lattice::{build_cir_tree, build_rate_tree, FactorTree, TreeKind};
use crate::model::{validate, ExerciseStyle, JumpDensity, MarketModel, OptionContract};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericalConfig {
    pub steps: usize,
    pub dx: f64,
    pub width: WidthPolicy,
    /// Truncation tolerance on the jump quadrature mass.
    pub levy_tol: f64,
    /// Overrides `levy_tol` with a fixed half-width `L`.
    pub levy_half_width: Option<usize>,
    pub scheme: Scheme,
    /// Discount floor `theta` on the rate factor; `None` disables it.
    pub threshold: Option<f64>,
    pub retain_surfaces: bool,
    pub overhang: OverhangMode,
    pub alignment: GridAlignment,
    /// Remove the variance added by linear interpolation from the implicit diffusion.
    pub variance_correction: bool,
}

/// Placement of the log-price grid across variance nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridAlignment {
    /// One grid centred at `ln S0` for every node.
    Common,
    /// Grid of node `y` centred at `ln S0 + (rho1/sigma_Y)(y - Y0)`.
    #[default]
    Variance,
}

impl Default for NumericalConfig {
    fn default() -> Self {
        NumericalConfig {
            steps: 100,
            dx: 0.0025,
            width: WidthPolicy::default(),
            levy_tol: 1e-8,
            levy_half_width: None,
            scheme: Scheme::Central,
            threshold: None,
            retain_surfaces: false,
            overhang: OverhangMode::Symmetric,
            alignment: GridAlignment::Variance,
            variance_correction: true,
        }
    }
}

impl NumericalConfig {
    pub fn with(steps: usize, dx: f64) -> Self {
        NumericalConfig { steps, dx, ..Default::default() }
    }

    /// Default threshold for a model: disabled for deterministic rates, 5 otherwise.
    pub fn default_threshold(model: &MarketModel) -> Option<f64> {
        if model.sigma_r == 0.0 {
            None
        } else {
            Some(5.0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::Param("steps must be >= 1".into()));
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::Param(format!("dx must be > 0, got {}", self.dx)));
        }
        if !(self.levy_tol > 0.0) {
            return Err(Error::Param("levy_tol must be > 0".into()));
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0) {
                return Err(Error::Param(format!("threshold must be > 0, got {t}")));
            }
        }
        Ok(())
    }
}

/// Option values `u[i][k][j]` at one time step, stored slice by slice.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSurface {
    pub n: usize,
    pub len: usize,
    pub nk: usize,
    pub nj: usize,
    pub values: Vec<f64>,
}

impl PriceSurface {
    pub fn zeros(n: usize, len: usize, nk: usize, nj: usize) -> Self {
        PriceSurface { n, len, nk, nj, values: vec![0.0; len * nk * nj] }
    }

    pub fn slice(&self, k: usize, j: usize) -> &[f64] {
        let o = (k * self.nj + j) * self.len;
        &self.values[o..o + self.len]
    }

    pub fn slice_mut(&mut self, k: usize, j: usize) -> &mut [f64] {
        let o = (k * self.nj + j) * self.len;
        &mut self.values[o..o + self.len]
    }
}

/// `out_i = (1-q) v_I + q v_{I+1}` with `x_i + zeta` in `[x_I, x_{I+1})`, clamped to the edge values.
pub fn interpolate_shift(values: &[f64], zeta: f64, grid: &SpaceGrid) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    accumulate_shift(values, zeta / grid.dx, 1.0, &mut out);
    out
}

/// `acc += weight * interpolate_shift(values, shift * dx)`.
fn accumulate_shift(values: &[f64], shift: f64, weight: f64, acc: &mut [f64]) {
    let len = values.len();
    let fl = shift.floor();
    let q = shift - fl;
    let off = fl as isize;
    let (lo, hi) = (values[0], values[len - 1]);
    for (p, a) in acc.iter_mut().enumerate() {
        let t = p as isize + off;
        let v = if t < 0 {
            lo
        } else if t >= len as isize - 1 {
            hi
        } else {
            let t = t as usize;
            (1.0 - q) * values[t] + q * values[t + 1]
        };
        *a += weight * v;
    }
}

/// Boundary function `b(t, x)` outside the grid.
pub type BoundaryFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

struct Edge {
    overhang: Vec<f64>,
    b_lo: f64,
    b_hi: f64,
}

struct Scratch {
    acc: Vec<f64>,
    rhs: Vec<f64>,
    c: Vec<f64>,
    jump: JumpScratch,
}

/// Prepared grids, trees and operators for one pricing problem.
pub struct HybridEngine {
    pub model: MarketModel,
    pub contract: OptionContract,
    pub config: NumericalConfig,
    pub grid: SpaceGrid,
    pub levy: LevyGrid,
    pub cir: FactorTree,
    pub rates: FactorTree,
    pub h: f64,
    /// Grid offset per variance node `[n][k]`.
    pub offsets: Vec<Vec<f64>>,
    jump: JumpOperator,
    payoff: Vec<f64>,
    boundary: BoundaryFn,
    american: bool,
}

#[derive(Clone, Debug)]
pub struct PricingResult {
    pub price: f64,
    pub surface: PriceSurface,
    /// Surfaces indexed by time step when retained.
    pub surfaces: Option<Vec<PriceSurface>>,
    pub elapsed: Duration,
    pub grid: SpaceGrid,
    pub offsets: Vec<Vec<f64>>,
    pub levy_half_width: usize,
}

impl PricingResult {
    /// Log-price grid of variance node `(n, k)`.
    pub fn node_grid(&self, n: usize, k: usize) -> SpaceGrid {
        SpaceGrid { x0: self.grid.x0 + self.offsets[n][k], ..self.grid }
    }
}

impl HybridEngine {
    pub fn new(model: &MarketModel, contract: &OptionContract, config: &NumericalConfig) -> Result<Self> {
        let model = validate(model)?;
        let contract = contract.validate()?;
        config.validate()?;
        let grid = build_space_grid(&model, &contract, config.dx, config.width)?;
        let levy = match config.levy_half_width {
            Some(l) => fixed_levy_grid(&model, config.dx, l),
            None => build_levy_grid(&model.levy(), config.dx, config.levy_tol)?,
        };
        grid.check_levy(&levy)?;
        let cir = build_cir_tree(&model, contract.maturity, config.steps);
        let rates = build_rate_tree(&model, contract.maturity, config.steps);
        let jump = JumpOperator::new(&levy, grid.len());
        let payoff = grid.points().iter().map(|&x| contract.payoff_log(x)).collect();
        let c_y = model.rho1 / model.sigma_y;
        let offsets = cir
            .values
            .iter()
            .map(|ys| match config.alignment {
                GridAlignment::Variance if c_y != 0.0 => ys.iter().map(|&y| c_y * (y - model.y0)).collect(),
                _ => vec![0.0; ys.len()],
            })
            .collect();
        let c = contract;
        let boundary: BoundaryFn = Arc::new(move |_t, x| c.payoff_log(x));
        Ok(HybridEngine {
            h: contract.maturity / config.steps as f64,
            american: contract.style == ExerciseStyle::American,
            model,
            contract,
            config: config.clone(),
            grid,
            levy,
            cir,
            rates,
            offsets,
            jump,
            payoff,
            boundary,
        })
    }

    /// Replace the default payoff boundary.
    pub fn with_boundary(mut self, b: BoundaryFn) -> Self {
        self.boundary = b;
        self
    }

    /// Payoff on the common grid.
    pub fn payoff(&self) -> &[f64] {
        &self.payoff
    }

    /// Log-price grid of variance node `(n, k)`.
    pub fn node_grid(&self, n: usize, k: usize) -> SpaceGrid {
        SpaceGrid { x0: self.grid.x0 + self.offsets[n][k], ..self.grid }
    }

    /// Payoff on the grid of variance node `(n, k)`.
    pub fn node_payoff(&self, n: usize, k: usize) -> Vec<f64> {
        self.node_grid(n, k).points().iter().map(|&x| self.contract.payoff_log(x)).collect()
    }

    fn aligned(&self) -> bool {
        self.offsets.iter().any(|o| o.iter().any(|&v| v != 0.0))
    }

    pub fn steps(&self) -> usize {
        self.config.steps
    }

    fn slice_dims(&self, n: usize) -> (usize, usize) {
        (self.cir.width(n), self.rates.width(n))
    }

    /// Payoff on every node of the last slice.
    pub fn terminal(&self) -> PriceSurface {
        let n = self.config.steps;
        let mut s = self.terminal_from(&self.payoff);
        if self.aligned() {
            for k in 0..s.nk {
                let g = self.node_grid(n, k);
                for j in 0..s.nj {
                    for (v, x) in s.slice_mut(k, j).iter_mut().zip(g.points()) {
                        *v = self.contract.payoff_log(x);
                    }
                }
            }
        }
        s
    }

    pub fn terminal_from(&self, f: &[f64]) -> PriceSurface {
        let n = self.config.steps;
        let (nk, nj) = self.slice_dims(n);
        let mut s = PriceSurface::zeros(n, self.grid.len(), nk, nj);
        for chunk in s.values.chunks_mut(self.grid.len()) {
            chunk.copy_from_slice(f);
        }
        s
    }

    fn scratch(&self) -> Scratch {
        let len = self.grid.len();
        Scratch {
            acc: vec![0.0; len],
            rhs: vec![0.0; len],
            c: vec![0.0; len],
            jump: self.jump.scratch(),
        }
    }

    /// Discount rate at node `(n, j)` with the threshold applied.
    pub fn discount_rate(&self, n: usize, j: usize) -> f64 {
        let r = self.rates.values[n][j];
        let kept = match self.config.threshold {
            Some(t) if r <= -t => 0.0,
            _ => r,
        };
        self.model.sigma_r * kept + self.model.phi(n as f64 * self.h)
    }

    /// Surface at step `n = next.n - 1`.
    pub fn backward_step(&self, next: &PriceSurface) -> Result<PriceSurface> {
        if next.n == 0 || next.n > self.config.steps {
            return Err(Error::Index(format!("cannot step back from n={}", next.n)));
        }
        let n = next.n - 1;
        let (nk1, nj1) = self.slice_dims(n + 1);
        let len = self.grid.len();
        if next.len != len || next.nk != nk1 || next.nj != nj1 {
            return Err(Error::Shape { expected: len * nk1 * nj1, got: next.values.len() });
        }
        let (nk, nj) = self.slice_dims(n);
        let h = self.h;
        let t_now = n as f64 * h;
        let t_next = t_now + h;
        // edge data depends on the node grid only through its offset
        let edges: Vec<Edge> = if self.aligned() {
            (0..nk).into_par_iter().map(|k| self.edge(n, k, t_now, t_next)).collect()
        } else {
            vec![self.edge(n, 0, t_now, t_next)]
        };

        let mut out = PriceSurface::zeros(n, len, nk, nj);
        out.values
            .par_chunks_mut(len)
            .enumerate()
            .try_for_each_init(
                || self.scratch(),
                |s, (idx, u)| -> Result<()> {
                    let (k, j) = (idx / nj, idx % nj);
                    let e = &edges[k.min(edges.len() - 1)];
                    self.node_step(n, k, j, next, e, s, u)
                },
            )?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn node_step(
        &self,
        n: usize,
        k: usize,
        j: usize,
        next: &PriceSurface,
        edge: &Edge,
        s: &mut Scratch,
        u: &mut [f64],
    ) -> Result<()> {
        let md = &self.model;
        let y = self.cir.values[n][k];
        let r = self.rates.values[n][j];
        let (py, pr) = (self.cir.pu[n][k], self.rates.pu[n][j]);
        let (ku, kd) = (self.cir.ku[n][k], self.cir.kd[n][k]);
        let (ju, jd) = (self.rates.ku[n][j], self.rates.kd[n][j]);
        let moves = [
            (ku, ju, py * pr),
            (ku, jd, py * (1.0 - pr)),
            (kd, ju, (1.0 - py) * pr),
            (kd, jd, (1.0 - py) * (1.0 - pr)),
        ];
        let yv = &self.cir.values[n + 1];
        let rv = &self.rates.values[n + 1];
        let c_y = md.rho1 / md.sigma_y;
        let c_r = md.rho2 * y.sqrt();
        let o_now = self.offsets[n][k];
        let o_next = &self.offsets[n + 1];
        s.acc.iter_mut().for_each(|a| *a = 0.0);
        let mut spread = 0.0;
        for (ka, jb, p) in moves {
            if p == 0.0 {
                continue;
            }
            let dy = c_y * (yv[ka] - y);
            let dr = c_r * (rv[jb] - r);
            let zeta = if o_next[ka] == 0.0 && o_now == 0.0 { dy + dr } else { dr + (dy - (o_next[ka] - o_now)) };
            let shift = zeta / self.grid.dx;
            let q = shift - shift.floor();
            spread += p * q * (1.0 - q);
            accumulate_shift(next.slice(ka, jb), shift, p, &mut s.acc);
        }
        self.jump.apply_into(&s.acc, self.h, &mut s.rhs, &mut s.jump)?;
        let mut a = assemble_a(md, y, r, n as f64 * self.h, self.h, &self.grid, self.config.scheme);
        if self.config.variance_correction && spread > 0.0 {
            // interpolation adds spread * dx^2 of variance; beta carries h rho3^2 y / (2 dx^2)
            a = TriDiag::from_coeffs(a.alpha, (a.beta - 0.5 * spread).max(0.0), self.config.scheme);
        }
        for (x, d) in s.rhs.iter_mut().zip(&edge.overhang) {
            *x += d;
        }
        let last = s.rhs.len() - 1;
        s.rhs[0] += -a.lower * edge.b_lo;
        s.rhs[last] += -a.upper * edge.b_hi;
        solve_tridiag_into(&a, &s.rhs, u, &mut s.c)?;
        let disc = (-self.discount_rate(n, j) * self.h).exp();
        if self.american {
            if o_now == 0.0 {
                for (v, &g) in u.iter_mut().zip(&self.payoff) {
                    *v = (*v * disc).max(g);
                }
            } else {
                let g = self.node_grid(n, k);
                for (i, v) in u.iter_mut().enumerate() {
                    let x = g.x(i as isize - g.m as isize);
                    *v = (*v * disc).max(self.contract.payoff_log(x));
                }
            }
        } else {
            for v in u.iter_mut() {
                *v = (*v * disc).max(0.0);
            }
        }
        if !u[self.grid.m].is_finite() {
            return Err(Error::Numerical(format!("non-finite value at node ({n}, {k}, {j})")));
        }
        Ok(())
    }

    fn edge(&self, n: usize, k: usize, t_now: f64, t_next: f64) -> Edge {
        let g = self.node_grid(n, k);
        let b = &self.boundary;
        let m = g.m as isize;
        Edge {
            overhang: jump_overhang(&g, &self.levy, self.h, |x| b(t_next, x), self.config.overhang),
            b_lo: b(t_now, g.x(-m - 1)),
            b_hi: b(t_now, g.x(m + 1)),
        }
    }

    pub fn run(&self) -> Result<PricingResult> {
        self.run_from(self.terminal())
    }

    /// Full backward induction from a given terminal surface.
    pub fn run_from(&self, terminal: PriceSurface) -> Result<PricingResult> {
        let start = Instant::now();
        let mut kept = Vec::new();
        let mut cur = terminal;
        for _ in 0..self.config.steps {
            let prev = self.backward_step(&cur)?;
            if self.config.retain_surfaces {
                kept.push(cur);
            }
            cur = prev;
        }
        let price = cur.slice(0, 0)[self.grid.m];
        let surfaces = if self.config.retain_surfaces {
            kept.push(cur.clone());
            kept.reverse();
            Some(kept)
        } else {
            None
        };
        Ok(PricingResult {
            price,
            surface: cur,
            surfaces,
            elapsed: start.elapsed(),
            grid: self.grid,
            offsets: self.offsets.clone(),
            levy_half_width: self.levy.l,
        })
    }
}

fn fixed_levy_grid(model: &MarketModel, dx: f64, l: usize) -> LevyGrid {
    let nu_fn = model.levy();
    let li = l as isize;
    let nu: Vec<f64> = (-li..=li).map(|k| nu_fn.density(k as f64 * dx)).collect();
    let total = nu.iter().sum();
    LevyGrid { l, dx, nu, total }
}

pub fn price(model: &MarketModel, contract: &OptionContract, config: &NumericalConfig) -> Result<PricingResult> {
    HybridEngine::new(model, contract, config)?.run()
}

/// Same algorithm with the rate tree collapsed to one deterministic node.
pub fn price_standard_bates(
    model: &MarketModel,
    contract: &OptionContract,
    config: &NumericalConfig,
) -> Result<f64> {
    if !model.is_standard_bates() {
        return Err(Error::Reduction);
    }
    let engine = HybridEngine::new(model, contract, config)?;
    debug_assert_eq!(engine.rates.kind, TreeKind::Point);
    Ok(engine.run()?.price)
}

/// Critical spot per `(n, k, j)`: largest grid spot where the option is exercised, 0 if none.
#[derive(Clone, Debug, PartialEq)]
pub struct ExerciseBoundary {
    pub values: Vec<Vec<Vec<f64>>>,
}

impl ExerciseBoundary {
    /// Boundary at `(n, k)` on the first rate node.
    pub fn at(&self, n: usize, k: usize) -> f64 {
        self.values[n][k][0]
    }
}

pub fn extract_exercise_boundary(
    result: &PricingResult,
    contract: &OptionContract,
) -> Result<ExerciseBoundary> {
    if contract.style != ExerciseStyle::American {
        return Err(Error::Style);
    }
    let surfaces = result.surfaces.as_ref().ok_or(Error::Style)?;
    let values = surfaces
        .iter()
        .map(|s| {
            (0..s.nk)
                .map(|k| {
                    let xs = result.node_grid(s.n, k).points();
                    let payoff: Vec<f64> = xs.iter().map(|&x| contract.payoff_log(x)).collect();
                    (0..s.nj)
                        .map(|j| {
                            let u = s.slice(k, j);
                            (0..u.len())
                                .rev()
                                .find(|&i| payoff[i] > 0.0 && u[i] - payoff[i] <= 1e-9)
                                .map_or(0.0, |i| xs[i].exp())
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(ExerciseBoundary { values })
}
