//! Hybrid Monte Carlo: the variance and rate factors follow their trees,
//! the log-price takes Gaussian and compound-Poisson increments.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{build_cir_tree, build_rate_tree, FactorTree, TreeKind};
use crate::model::{validate, ExerciseStyle, MarketModel, OptionContract};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub paths: usize,
    pub steps: usize,
    /// Exercise dates for American contracts, evenly spaced and ending at maturity.
    pub exercise_dates: usize,
    pub seed: u64,
    /// Total degree of the regression polynomial in `(S/K, Y, R)`.
    pub basis_degree: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { paths: 100_000, steps: 100, exercise_dates: 20, seed: 1, basis_degree: 2 }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::Param(format!("paths must be >= 2, got {}", self.paths)));
        }
        if self.steps < 1 {
            return Err(Error::Param("steps must be >= 1".into()));
        }
        if self.exercise_dates < 1 || self.steps % self.exercise_dates != 0 {
            return Err(Error::Param(format!(
                "exercise_dates ({}) must divide steps ({})",
                self.exercise_dates, self.steps
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// 1.96 sample standard deviations over sqrt(paths).
    pub half_width: f64,
    pub paths: usize,
    pub seed: u64,
    /// Exercise dates left out of the regression for lack of in-the-money paths.
    pub skipped_dates: Vec<usize>,
}

impl McEstimate {
    pub fn from_values(values: &[f64], seed: u64) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        McEstimate { mean, half_width: 1.96 * (var / n).sqrt(), paths: values.len(), seed, skipped_dates: vec![] }
    }

    pub fn covers(&self, x: f64, widths: f64) -> bool {
        (self.mean - x).abs() <= widths * self.half_width
    }
}

/// Log-price, variance and rate at one time step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McState {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

/// One step of the log-price given the factor moves, the Gaussian draw and the log jump sizes.
#[allow(clippy::too_many_arguments)]
pub fn simulate_increment(
    state: McState,
    y_next: f64,
    r_next: f64,
    t: f64,
    normal: f64,
    log_jumps: &[f64],
    model: &MarketModel,
    h: f64,
) -> f64 {
    let McState { x, y, r } = state;
    x + model.mu_eff(y, r, t) * h
        + model.rho3 * (h * y).sqrt() * normal
        + model.rho1 / model.sigma_y * (y_next - y)
        + model.rho2 * y.sqrt() * (r_next - r)
        + log_jumps.iter().sum::<f64>()
}

/// Trees and jump laws shared by all paths.
pub struct PathSimulator {
    pub model: MarketModel,
    pub cir: FactorTree,
    pub rates: FactorTree,
    pub h: f64,
    pub steps: usize,
    poisson: Option<Poisson<f64>>,
    jump: Normal<f64>,
    seed: u64,
}

/// A simulated path at every time step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathRecord {
    pub x: Vec<f64>,
    pub k: Vec<usize>,
    pub j: Vec<usize>,
    /// `sum_{m<n} (sigma_r R_m + phi(m h)) h`.
    pub rate_integral: Vec<f64>,
}

impl PathSimulator {
    pub fn new(model: &MarketModel, maturity: f64, steps: usize, seed: u64) -> Result<Self> {
        let model = validate(model)?;
        if !(maturity > 0.0) || steps == 0 {
            return Err(Error::Param("maturity and steps must be positive".into()));
        }
        let h = maturity / steps as f64;
        let poisson = if model.lambda > 0.0 {
            Some(Poisson::new(model.lambda * h).map_err(|e| Error::Param(e.to_string()))?)
        } else {
            None
        };
        let m = model.gamma_j - 0.5 * model.eta_j * model.eta_j;
        let jump = Normal::new(m, model.eta_j).map_err(|e| Error::Param(e.to_string()))?;
        Ok(PathSimulator {
            cir: build_cir_tree(&model, maturity, steps),
            rates: build_rate_tree(&model, maturity, steps),
            model,
            h,
            steps,
            poisson,
            jump,
            seed,
        })
    }

    /// Independent generator for path `index`.
    pub fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }

    pub fn simulate(&self, index: usize, rec: &mut PathRecord, jumps: &mut Vec<f64>) {
        let n_steps = self.steps;
        for v in [&mut rec.x, &mut rec.rate_integral] {
            v.clear();
            v.reserve(n_steps + 1);
        }
        rec.k.clear();
        rec.j.clear();
        let mut rng = self.rng(index);
        let md = &self.model;
        let (mut k, mut j) = (0usize, 0usize);
        let mut x = md.s0.ln();
        let mut integral = 0.0;
        rec.x.push(x);
        rec.k.push(k);
        rec.j.push(j);
        rec.rate_integral.push(0.0);
        let point = self.rates.kind == TreeKind::Point;
        for n in 0..n_steps {
            let t = n as f64 * self.h;
            let y = self.cir.values[n][k];
            let r = self.rates.values[n][j];
            let k1 = self.cir.step(n, k, rng.gen::<f64>());
            let j1 = if point { j } else { self.rates.step(n, j, rng.gen::<f64>()) };
            let normal: f64 = StandardNormal.sample(&mut rng);
            jumps.clear();
            if let Some(p) = &self.poisson {
                let count = p.sample(&mut rng) as usize;
                for _ in 0..count {
                    jumps.push(self.jump.sample(&mut rng));
                }
            }
            let state = McState { x, y, r };
            x = simulate_increment(state, self.cir.values[n + 1][k1], self.rates.values[n + 1][j1], t, normal, jumps, md, self.h);
            integral += (md.sigma_r * r + md.phi(t)) * self.h;
            k = k1;
            j = j1;
            rec.x.push(x);
            rec.k.push(k);
            rec.j.push(j);
            rec.rate_integral.push(integral);
        }
    }

    pub fn y(&self, n: usize, k: usize) -> f64 {
        self.cir.values[n][k]
    }

    pub fn r(&self, n: usize, j: usize) -> f64 {
        self.rates.values[n][j]
    }
}

pub fn price_european_mc(model: &MarketModel, contract: &OptionContract, config: &McConfig) -> Result<McEstimate> {
    let contract = contract.validate()?;
    price_european_payoff(model, contract.maturity, config, |x| contract.payoff_log(x))
}

/// European estimate for an arbitrary payoff of the terminal log-price.
pub fn price_european_payoff(
    model: &MarketModel,
    maturity: f64,
    config: &McConfig,
    payoff: impl Fn(f64) -> f64 + Sync,
) -> Result<McEstimate> {
    config.validate()?;
    let sim = PathSimulator::new(model, maturity, config.steps, config.seed)?;
    let values: Vec<f64> = (0..config.paths)
        .into_par_iter()
        .map_init(
            || (PathRecord::default(), Vec::new()),
            |(rec, jumps), p| {
                sim.simulate(p, rec, jumps);
                let n = config.steps;
                (-rec.rate_integral[n]).exp() * payoff(rec.x[n])
            },
        )
        .collect();
    Ok(McEstimate::from_values(&values, config.seed))
}

/// Exponents of all monomials of total degree at most `degree` in three variables.
fn monomials(degree: usize, with_rate: bool) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for d in 0..=degree {
        for a in (0..=d).rev() {
            for b in (0..=(d - a)).rev() {
                let c = d - a - b;
                if c > 0 && !with_rate {
                    continue;
                }
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Least-squares coefficients from the normal equations.
pub fn ls_regression(design: &DMatrix<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
    let (rows, cols) = design.shape();
    if rows < cols {
        return Err(Error::Regression { itm: rows, basis: cols });
    }
    let xtx = design.transpose() * design;
    let xty = design.transpose() * target;
    xtx.svd(true, true)
        .solve(&xty, 1e-12)
        .map_err(|e| Error::Numerical(format!("regression solve: {e}")))
}

pub fn price_american_ls(model: &MarketModel, contract: &OptionContract, config: &McConfig) -> Result<McEstimate> {
    config.validate()?;
    let contract = contract.validate()?;
    if contract.style != ExerciseStyle::American {
        return Err(Error::Style);
    }
    let sim = PathSimulator::new(model, contract.maturity, config.steps, config.seed)?;
    let dates = config.exercise_dates;
    let stride = config.steps / dates;
    // per path and date m = 1..=dates: (x, y, r, rate integral)
    let records: Vec<Vec<[f64; 4]>> = (0..config.paths)
        .into_par_iter()
        .map_init(
            || (PathRecord::default(), Vec::new()),
            |(rec, jumps), p| {
                sim.simulate(p, rec, jumps);
                (1..=dates)
                    .map(|m| {
                        let n = m * stride;
                        [rec.x[n], sim.y(n, rec.k[n]), sim.r(n, rec.j[n]), rec.rate_integral[n]]
                    })
                    .collect()
            },
        )
        .collect();
    let with_rate = sim.rates.kind != TreeKind::Point;
    let basis = monomials(config.basis_degree, with_rate);
    let strike = contract.strike;
    let features = |d: &[f64; 4]| -> Vec<f64> {
        let s = d[0].exp() / strike;
        let mut f: Vec<f64> = basis
            .iter()
            .map(|e| s.powi(e[0] as i32) * d[1].powi(e[1] as i32) * d[2].powi(e[2] as i32))
            .collect();
        f.push(contract.payoff_log(d[0]) / strike);
        f
    };
    let mut values: Vec<f64> = records
        .iter()
        .map(|r| {
            let last = &r[dates - 1];
            (-last[3]).exp() * contract.payoff_log(last[0])
        })
        .collect();
    let mut skipped = Vec::new();
    for m in (0..dates - 1).rev() {
        let itm: Vec<usize> = (0..config.paths).filter(|&p| contract.payoff_log(records[p][m][0]) > 0.0).collect();
        let cols = basis.len() + 1;
        let rows: Vec<Vec<f64>> = itm.iter().map(|&p| features(&records[p][m])).collect();
        let design = DMatrix::from_fn(itm.len(), cols, |row, col| rows[row][col]);
        let target = DVector::from_fn(itm.len(), |row, _| {
            let d = &records[itm[row]][m];
            values[itm[row]] * d[3].exp() / strike
        });
        let beta = match ls_regression(&design, &target) {
            Ok(b) => b,
            Err(Error::Regression { .. }) => {
                skipped.push(m + 1);
                continue;
            }
            Err(e) => return Err(e),
        };
        for (row, &p) in itm.iter().enumerate() {
            let d = &records[p][m];
            let exercise = contract.payoff_log(d[0]);
            let fitted = design.row(row).dot(&beta.transpose()) * strike;
            if exercise > fitted {
                values[p] = (-d[3]).exp() * exercise;
            }
        }
    }
    let mut est = McEstimate::from_values(&values, config.seed);
    let intrinsic = contract.payoff(sim.model.s0);
    if intrinsic > est.mean {
        est.mean = intrinsic;
        est.half_width = 0.0;
    }
    skipped.reverse();
    est.skipped_dates = skipped;
    Ok(est)
}
