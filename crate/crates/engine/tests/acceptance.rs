//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest harness
//! so the lines always reach stdout.
//!
//! Entries in `KNOWN_GAPS` are reported but do not fail the run.

use std::time::{Duration, Instant};

use bates_engine::fd::{apply_b, assemble_a, build_levy_grid, solve_tridiag, JumpOperator, Scheme, SpaceGrid, TriDiag};
use bates_engine::hybrid::{extract_exercise_boundary, price, NumericalConfig};
use bates_engine::lattice::{build_cir_tree, FactorTree};
use bates_engine::model::{validate, ExerciseStyle, MarketModel, OptionContract, OptionKind};
use bates_engine::montecarlo::{price_american_ls, price_european_mc, McConfig};
use bates_engine::reference::{carr_madan_price, convergence_ratio, early_exercise_premium_check};
use nalgebra::{DMatrix, DVector};

const KNOWN_GAPS: &[&str] = &["9e"];

const SPOTS: [f64; 5] = [80.0, 90.0, 100.0, 110.0, 120.0];

// European call, N=100, dx=0.0025
const T1_HTFD: [(f64, [f64; 5]); 2] = [
    (-0.5, [1.1292, 3.3298, 7.5221, 13.6921, 21.3164]),
    (0.5, [1.4742, 3.6847, 7.6229, 13.4814, 20.9636]),
];
const T1_CF: [(f64, [f64; 5]); 2] = [
    (-0.5, [1.1293, 3.3284, 7.5210, 13.6923, 21.3174]),
    (0.5, [1.4760, 3.6862, 7.6223, 13.4791, 20.9616]),
];
// American call
const T2_HTFD: [(f64, [f64; 5]); 2] = [
    (-0.5, [1.1356, 3.3548, 7.5989, 13.8839, 21.7184]),
    (0.5, [1.4828, 3.7137, 7.7036, 13.6739, 21.3655]),
];
const T2_PSOR: [(f64, [f64; 5]); 2] = [
    (-0.5, [1.1359, 3.3532, 7.5970, 13.8830, 21.7186]),
    (0.5, [1.4843, 3.7145, 7.7027, 13.6722, 21.3653]),
];

struct Line {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Report {
    lines: Vec<Line>,
}

impl Report {
    fn add(&mut self, id: &'static str, name: &'static str, pass: bool, detail: String) {
        println!("{} {id} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push(Line { id, name, pass, detail });
    }
}

fn benchmark() -> MarketModel {
    validate(&MarketModel::benchmark_bates()).unwrap()
}

fn with_spot(m: &MarketModel, s0: f64) -> MarketModel {
    MarketModel { s0, ..m.clone() }
}

fn with_rho(rho1: f64) -> MarketModel {
    let mut m = MarketModel::benchmark_bates();
    m.rho1 = rho1;
    validate(&m).unwrap()
}

fn contract(kind: OptionKind, style: ExerciseStyle) -> OptionContract {
    OptionContract::new(100.0, 0.5, kind, style)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn table_sweep(
    r: &mut Report,
    id: &'static str,
    name: &'static str,
    style: ExerciseStyle,
    htfd_ref: &[(f64, [f64; 5]); 2],
    second: Option<(&[(f64, [f64; 5]); 2], f64)>,
) {
    let cfg = NumericalConfig::with(100, 0.0025);
    let c = contract(OptionKind::Call, style);
    let (mut worst, mut worst2, mut slowest) = (0.0f64, 0.0f64, Duration::ZERO);
    for (i, (rho, refs)) in htfd_ref.iter().enumerate() {
        let m = with_rho(*rho);
        for (s, &s0) in SPOTS.iter().enumerate() {
            let (p, t) = timed(|| price(&with_spot(&m, s0), &c, &cfg).unwrap().price);
            slowest = slowest.max(t);
            worst = worst.max((p - refs[s]).abs());
            if let Some((other, _)) = second {
                worst2 = worst2.max((p - other[i].1[s]).abs());
            }
        }
    }
    let mut pass = worst <= 5e-3 && slowest.as_secs_f64() <= 10.0;
    let mut detail = format!("max |htfd - ref| = {worst:.2e} (<= 5e-3), slowest price {:.2} s (<= 10 s)", slowest.as_secs_f64());
    if let Some((_, tol)) = second {
        pass &= worst2 <= tol;
        detail += &format!(", max |htfd - psor| = {worst2:.2e} (<= {tol:.1e})");
    }
    r.add(id, name, pass, detail);
}

fn table1_cf(r: &mut Report) {
    let mut worst = 0.0f64;
    for (rho, refs) in &T1_CF {
        let m = with_rho(*rho);
        for (s, &s0) in SPOTS.iter().enumerate() {
            let p = carr_madan_price(&with_spot(&m, s0), 100.0, 0.5, OptionKind::Call).unwrap();
            worst = worst.max((p - refs[s]).abs());
        }
    }
    r.add("1b", "table1_carr_madan", worst <= 5e-4, format!("max |cf - ref| = {worst:.2e} (<= 5e-4)"));
}

fn long_maturity(r: &mut Report) {
    let mut m = MarketModel::benchmark_bates();
    m.sigma_y = 0.7;
    let m = validate(&m).unwrap();
    let c = OptionContract::new(100.0, 5.0, OptionKind::Call, ExerciseStyle::European);
    let p = price(&m, &c, &NumericalConfig::with(100, 0.0025)).unwrap().price;
    let cf = carr_madan_price(&m, 100.0, 5.0, OptionKind::Call).unwrap();
    let (e1, e2) = ((p - 16.9089).abs(), (cf - 16.8855).abs());
    r.add(
        "3",
        "feller_violating_long_maturity",
        e1 <= 2e-2 && e2 <= 1e-3,
        format!("htfd {p:.5} err {e1:.2e} (<= 2e-2), cf {cf:.5} err {e2:.2e} (<= 1e-3)"),
    );
}

fn hull_white(r: &mut Report) {
    let m = MarketModel::benchmark_bates_hw(-0.5);
    let mut cfg = NumericalConfig::with(100, 0.0025);
    cfg.threshold = NumericalConfig::default_threshold(&m);
    let mut pass = true;
    let mut parts = Vec::new();
    for (style, htfd_ref, mc_ref) in [(ExerciseStyle::European, 7.2480, 7.2315), (ExerciseStyle::American, 7.5980, 7.5589)] {
        let (p, t) = timed(|| price(&m, &contract(OptionKind::Call, style), &cfg).unwrap().price);
        let (e1, e2) = ((p - htfd_ref).abs(), (p - mc_ref).abs());
        pass &= e1 <= 1e-2 && e2 <= 3.0 * 0.02 && t.as_secs_f64() <= 300.0;
        parts.push(format!(
            "{style:?} {p:.5} err {e1:.2e} (<= 1e-2), vs mc {e2:.2e} (<= 6e-2), {:.1} s (<= 300 s)",
            t.as_secs_f64()
        ));
    }
    r.add("4", "bates_hull_white", pass, parts.join("; "));
}

fn convergence(r: &mut Report) {
    let m = benchmark();
    let c = contract(OptionKind::Call, ExerciseStyle::American);
    let steps = [50, 100, 200, 400, 800];
    let mut all = Vec::new();
    for &s0 in &SPOTS {
        let ps: Vec<f64> =
            steps.iter().map(|&n| price(&with_spot(&m, s0), &c, &NumericalConfig::with(n, 0.0025)).unwrap().price).collect();
        for i in 2..steps.len() {
            all.push(convergence_ratio(ps[i], ps[i - 1], ps[i - 2]).unwrap_or(f64::NAN));
        }
    }
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = all.iter().all(|x| (1.4..=3.0).contains(x));
    r.add("5", "convergence_ratio", pass, format!("{} ratios in [{lo:.4}, {hi:.4}] (within [1.4, 3.0])", all.len()));
}

fn mc_coverage(r: &mut Report) {
    let m = benchmark();
    let eu = contract(OptionKind::Call, ExerciseStyle::European);
    let am = contract(OptionKind::Call, ExerciseStyle::American);
    let cf = carr_madan_price(&m, 100.0, 0.5, OptionKind::Call).unwrap();
    let (mut covered, mut ordered) = (0, 0);
    for seed in 1..=20u64 {
        let cfg = McConfig { paths: 50_000, steps: 100, seed, ..Default::default() };
        let e = price_european_mc(&m, &eu, &cfg).unwrap();
        let a = price_american_ls(&m, &am, &cfg).unwrap();
        covered += e.covers(cf, 1.0) as usize;
        let combined = (e.half_width.powi(2) + a.half_width.powi(2)).sqrt();
        ordered += (a.mean >= e.mean - 2.0 * combined) as usize;
    }
    r.add(
        "6",
        "monte_carlo_coverage",
        covered >= 17 && ordered == 20,
        format!("european CI covers cf {covered}/20 (>= 17), ls above european {ordered}/20 (== 20)"),
    );
}

/// Exact law of the tree's terminal node, by forward induction written out here.
fn terminal_law(tree: &FactorTree) -> Vec<f64> {
    let mut mass = vec![1.0];
    for n in 0..tree.steps {
        let mut next = vec![0.0; n + 2];
        for (k, w) in mass.iter().enumerate() {
            next[tree.ku[n][k]] += w * tree.pu[n][k];
            next[tree.kd[n][k]] += w * (1.0 - tree.pu[n][k]);
        }
        mass = next;
    }
    mass
}

fn node_masses(tree: &FactorTree) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0]];
    for n in 0..tree.steps {
        let mut next = vec![0.0; n + 2];
        for (k, w) in out[n].iter().enumerate() {
            next[tree.ku[n][k]] += w * tree.pu[n][k];
            next[tree.kd[n][k]] += w * (1.0 - tree.pu[n][k]);
        }
        out.push(next);
    }
    out
}

/// `E[exp(-u Y_T)]` for the square-root process: a scaled noncentral chi-square.
fn cir_laplace(u: f64, y0: f64, kappa: f64, theta: f64, sigma: f64, t: f64) -> f64 {
    let c = sigma * sigma * (1.0 - (-kappa * t).exp()) / (4.0 * kappa);
    let d = 1.0 + 2.0 * u * c;
    d.powf(-2.0 * kappa * theta / (sigma * sigma)) * (-u * (-kappa * t).exp() * y0 / d).exp()
}

fn cir_weak_order(r: &mut Report) {
    let m = benchmark();
    let t = 0.5;
    let mean = m.theta_y + (m.y0 - m.theta_y) * (-m.kappa_y * t).exp();
    let laplace = cir_laplace(2.0, m.y0, m.kappa_y, m.theta_y, m.sigma_y, t);
    let (mut e_mean, mut e_exp) = (Vec::new(), Vec::new());
    let ((), elapsed) = timed(|| {
        for n in [50, 100, 200, 400, 800] {
            let tree = build_cir_tree(&m, t, n);
            let law = terminal_law(&tree);
            let ex = |f: &dyn Fn(f64) -> f64| law.iter().zip(&tree.values[n]).map(|(p, &y)| p * f(y)).sum::<f64>();
            e_mean.push((ex(&|y| y) - mean).abs());
            e_exp.push((ex(&|y| (-2.0 * y).exp()) - laplace).abs());
        }
    });
    let orders = |e: &[f64]| -> Vec<f64> { e.windows(2).map(|w| (w[0] / w[1]).log2()).collect() };
    let exact_mean = e_mean.iter().all(|&e| e <= 1e-12);
    let mean_ok = exact_mean || orders(&e_mean).iter().all(|&o| o >= 0.8);
    let exp_orders = orders(&e_exp);
    let exp_ok = exp_orders.iter().all(|&o| o >= 0.8);
    let fmt: Vec<String> = exp_orders.iter().map(|o| format!("{o:.3}")).collect();
    r.add(
        "7",
        "cir_weak_order",
        mean_ok && exp_ok && elapsed.as_secs_f64() <= 60.0,
        format!(
            "E[y] max err {:.1e} ({}), E[exp(-2y)] orders [{}] (>= 0.8), {:.2} s",
            e_mean.iter().copied().fold(0.0, f64::max),
            if exact_mean { "exact" } else { "order checked" },
            fmt.join(", "),
            elapsed.as_secs_f64()
        ),
    );
}

fn dense(a: &TriDiag, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            a.diag
        } else if j + 1 == i {
            a.lower
        } else if i + 1 == j {
            a.upper
        } else {
            0.0
        }
    })
}

fn operators(r: &mut Report) {
    let m = benchmark();
    let (dx, h) = (0.01, 0.005);
    let levy = build_levy_grid(&m.levy(), dx, 1e-10).unwrap();
    let n = 301;
    let v: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.37).sin() + 0.1 * (i % 7) as f64).collect();

    let l = levy.l as isize;
    let direct: Vec<f64> = (0..n as isize)
        .map(|i| {
            let s: f64 = (-l..=l).filter(|k| (0..n as isize).contains(&(i + k))).map(|k| levy.nu_at(k) * v[(i + k) as usize]).sum();
            v[i as usize] + h * dx * (s - levy.total * v[i as usize])
        })
        .collect();
    let fft = apply_b(&v, &levy, h).unwrap();
    let e_fft = fft.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let grid = SpaceGrid { x0: 100f64.ln(), dx, m: 150 };
    let mut e_thomas = 0.0f64;
    for scheme in [Scheme::Central, Scheme::Upwind] {
        for y in [0.01, 0.04, 0.3] {
            let a = assemble_a(&m, y, m.r0, 0.1, h, &grid, scheme);
            let x = solve_tridiag(&a, &v).unwrap();
            let oracle = dense(&a, n).lu().solve(&DVector::from_column_slice(&v)).unwrap();
            let scale = oracle.amax();
            e_thomas = e_thomas.max(x.iter().zip(oracle.iter()).map(|(a, b)| (a - b).abs() / scale).fold(0.0, f64::max));
        }
    }

    // 101 interior rows of a padded grid standing in for the infinite one
    let (inner, pad) = (101, 200);
    let size = inner + 2 * pad;
    let mut bm = DMatrix::<f64>::identity(size, size);
    for i in 0..size as isize {
        for k in -l..=l {
            if (0..size as isize).contains(&(i + k)) {
                bm[(i as usize, (i + k) as usize)] += h * dx * levy.nu_at(k);
            }
        }
        bm[(i as usize, i as usize)] -= h * dx * levy.total;
    }
    let a = assemble_a(&m, m.y0, m.r0, 0.1, h, &grid, Scheme::Upwind);
    let pi = dense(&a, size).lu().solve(&bm).unwrap();
    let rows = pad..pad + inner;
    let e_rows = rows.clone().map(|i| (pi.row(i).sum() - 1.0).abs()).fold(0.0, f64::max);
    let min_entry = rows.map(|i| pi.row(i).min()).fold(f64::INFINITY, f64::min);

    let op = JumpOperator::new(&levy, n);
    let mut x = v.clone();
    let mut gain = 0.0;
    for _ in 0..300 {
        let bx = op.apply(&x, h).unwrap();
        // B is Toeplitz, so B^T = J B J with J the reversal
        let rev: Vec<f64> = bx.iter().rev().copied().collect();
        let btbx: Vec<f64> = op.apply(&rev, h).unwrap().into_iter().rev().collect();
        let norm = btbx.iter().map(|a| a * a).sum::<f64>().sqrt();
        let xn = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        gain = (norm / xn).sqrt();
        x = btbx.iter().map(|a| a / norm).collect();
    }
    let bound = 1.0 + 2.0 * levy.mass() * h;

    let pass = e_fft <= 1e-10 && e_thomas <= 1e-12 && e_rows <= 1e-12 && min_entry >= -1e-15 && gain <= bound;
    r.add(
        "8",
        "operator_properties",
        pass,
        format!(
            "fft vs direct {e_fft:.1e} (<= 1e-10), thomas vs dense {e_thomas:.1e} rel (<= 1e-12), \
             upwind row sums {e_rows:.1e} (<= 1e-12), min entry {min_entry:.1e}, gain {gain:.8} (<= {bound:.8})"
        ),
    );
}

fn obstacle(r: &mut Report) {
    let m = benchmark();
    let mut cfg = NumericalConfig::with(100, 0.0025);
    let mut worst_payoff = f64::INFINITY;
    let mut worst_eu = f64::INFINITY;
    for kind in [OptionKind::Call, OptionKind::Put] {
        cfg.retain_surfaces = true;
        let am_c = contract(kind, ExerciseStyle::American);
        let am = price(&m, &am_c, &cfg).unwrap();
        cfg.retain_surfaces = false;
        let eu = price(&m, &contract(kind, ExerciseStyle::European), &cfg).unwrap();
        for s in am.surfaces.as_ref().unwrap() {
            for k in 0..s.nk {
                let xs = am.node_grid(s.n, k).points();
                for j in 0..s.nj {
                    for (u, &x) in s.slice(k, j).iter().zip(&xs) {
                        worst_payoff = worst_payoff.min(u - am_c.payoff_log(x));
                    }
                }
            }
        }
        for (a, e) in am.surface.slice(0, 0).iter().zip(eu.surface.slice(0, 0)) {
            worst_eu = worst_eu.min(a - e);
        }
        worst_eu = worst_eu.min(am.price - eu.price);
    }
    r.add(
        "9a",
        "american_above_payoff_and_european",
        worst_payoff >= -1e-9 && worst_eu >= -1e-9,
        format!("min(am - payoff) = {worst_payoff:.1e}, min(am - eu) = {worst_eu:.1e} (>= -1e-9)"),
    );
}

fn vol_monotone(r: &mut Report) {
    let cfg = NumericalConfig::with(100, 0.0025);
    let mut worst = f64::INFINITY;
    for c in [contract(OptionKind::Call, ExerciseStyle::European), contract(OptionKind::Put, ExerciseStyle::American)] {
        let ps: Vec<f64> = [0.01, 0.02, 0.04, 0.08, 0.16]
            .iter()
            .map(|&y0| {
                let mut m = MarketModel::benchmark_bates();
                m.y0 = y0;
                price(&validate(&m).unwrap(), &c, &cfg).unwrap().price
            })
            .collect();
        worst = worst.min(ps.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min));
    }
    r.add("9b", "nondecreasing_in_initial_variance", worst >= -1e-6, format!("min increment {worst:.3e} (>= -1e-6)"));
}

fn put_convexity(r: &mut Report) {
    let m = benchmark();
    let cfg = NumericalConfig::with(100, 0.0025);
    let spots: Vec<f64> = (0..=8).map(|i| 80.0 + 5.0 * i as f64).collect();
    let mut worst = f64::INFINITY;
    for style in [ExerciseStyle::European, ExerciseStyle::American] {
        let c = contract(OptionKind::Put, style);
        let ps: Vec<f64> = spots.iter().map(|&s| price(&with_spot(&m, s), &c, &cfg).unwrap().price).collect();
        worst = worst.min(ps.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).fold(f64::INFINITY, f64::min));
    }
    r.add("9c", "put_convex_in_spot", worst >= -1e-4, format!("min second difference {worst:.3e} (>= -1e-4)"));
}

fn boundary(r: &mut Report) {
    let m = benchmark();
    let c = contract(OptionKind::Put, ExerciseStyle::American);
    let n_steps = 100;
    let dx = 0.0025;
    let mut cfg = NumericalConfig::with(n_steps, dx);
    cfg.retain_surfaces = true;
    let res = price(&m, &c, &cfg).unwrap();
    let b = extract_exercise_boundary(&res, &c).unwrap();
    let mass = node_masses(&build_cir_tree(&m, c.maturity, n_steps));
    // boundary strictly inside the node's grid, at a node the tree actually reaches
    let usable = |n: usize, k: usize| {
        let g = res.node_grid(n, k);
        let v = b.at(n, k);
        mass[n][k] >= 1e-12 && v > g.x(-(g.m as isize)).exp() && v < g.x(g.m as isize - 1).exp()
    };
    // each node has its own grid offset, so two neighbours may round to different points
    let tol = |v: f64| 2.0 * dx * v;
    let (mut checked, mut t_bad, mut k_bad, mut out_of_range) = (0, 0, 0, 0);
    for n in 0..=n_steps {
        for k in 0..=n {
            let v = b.at(n, k);
            if !(v > 0.0 && v <= c.strike) {
                out_of_range += 1;
            }
            if !usable(n, k) {
                continue;
            }
            checked += 1;
            // k + 1 at n + 2 carries the same variance
            if n + 2 <= n_steps && usable(n + 2, k + 1) && v > b.at(n + 2, k + 1) + tol(v) {
                t_bad += 1;
            }
            if k < n && usable(n, k + 1) && b.at(n, k + 1) > v + tol(v) {
                k_bad += 1;
            }
        }
    }
    r.add(
        "9d",
        "exercise_boundary_shape",
        checked > 0 && t_bad == 0 && k_bad == 0 && out_of_range == 0,
        format!(
            "{checked} nodes checked, {t_bad} decreasing in time, {k_bad} increasing in variance, \
             {out_of_range} outside (0, K]"
        ),
    );
}

fn threshold(r: &mut Report) {
    let m = MarketModel::benchmark_bates_hw(-0.5);
    let c = contract(OptionKind::Call, ExerciseStyle::European);
    let at = |theta: f64| {
        let mut cfg = NumericalConfig::with(100, 0.01);
        cfg.threshold = Some(theta);
        price(&m, &c, &cfg).unwrap().price
    };
    let d = (at(2.0) - at(10.0)).abs();
    r.add("9e", "threshold_insensitivity", d <= 1e-6, format!("|p(2) - p(10)| = {d:.2e} (<= 1e-6)"));
}

fn premium(r: &mut Report) {
    let mut pass = true;
    let mut parts = Vec::new();
    for delta in [0.0, 0.05] {
        let mut m = MarketModel::benchmark_bates();
        m.lambda = 0.0;
        m.delta = delta;
        let m = validate(&m).unwrap();
        let c = contract(OptionKind::Put, ExerciseStyle::American);
        let mc = McConfig { paths: 200_000, ..Default::default() };
        let (e, t) = timed(|| early_exercise_premium_check(&m, &c, &NumericalConfig::with(400, 0.0025), &mc).unwrap());
        let limit = 3.0 * e.premium.half_width + 5e-3;
        pass &= e.residual.abs() <= limit && t.as_secs_f64() <= 120.0;
        parts.push(format!(
            "delta {delta}: am - eu {:.5}, integral {:.5}, residual {:.2e} (<= {limit:.2e}), {:.1} s",
            e.american - e.european,
            e.premium.mean,
            e.residual,
            t.as_secs_f64()
        ));
    }
    r.add("10", "early_exercise_premium", pass, parts.join("; "));
}

fn main() {
    let mut r = Report { lines: Vec::new() };
    table_sweep(&mut r, "1a", "table1_european_htfd", ExerciseStyle::European, &T1_HTFD, None);
    table1_cf(&mut r);
    table_sweep(&mut r, "2", "table2_american_htfd", ExerciseStyle::American, &T2_HTFD, Some((&T2_PSOR, 1.5e-2)));
    long_maturity(&mut r);
    hull_white(&mut r);
    convergence(&mut r);
    mc_coverage(&mut r);
    cir_weak_order(&mut r);
    operators(&mut r);
    obstacle(&mut r);
    vol_monotone(&mut r);
    put_convexity(&mut r);
    boundary(&mut r);
    threshold(&mut r);
    premium(&mut r);

    let passed = r.lines.iter().filter(|l| l.pass).count();
    println!("{passed}/{} criteria passed", r.lines.len());
    let unexpected: Vec<&Line> = r.lines.iter().filter(|l| !l.pass && !KNOWN_GAPS.contains(&l.id)).collect();
    for l in r.lines.iter().filter(|l| !l.pass && KNOWN_GAPS.contains(&l.id)) {
        println!("known gap {} {}: {}", l.id, l.name, l.detail);
    }
    if !unexpected.is_empty() {
        for l in &unexpected {
            eprintln!("unexpected failure {} {}: {}", l.id, l.name, l.detail);
        }
        std::process::exit(1);
    }
}
