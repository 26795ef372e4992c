//! Recombining multiple-jump binomial trees for the CIR variance and the OU rate factor.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::MarketModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TreeKind {
    Cir,
    Ou,
    /// Single deterministic node per slice, used when the rate factor is switched off.
    Point,
}

/// Node values for `n = 0..=N`, transitions for `n = 0..N`.
#[derive(Clone, Debug)]
pub struct FactorTree {
    pub kind: TreeKind,
    pub steps: usize,
    pub h: f64,
    pub values: Vec<Vec<f64>>,
    pub ku: Vec<Vec<usize>>,
    pub kd: Vec<Vec<usize>>,
    pub pu: Vec<Vec<f64>>,
    /// Raw probability fell outside `[0, 1]` and was clipped.
    pub clamped: Vec<Vec<bool>>,
    /// An empty-set convention was used for `ku` or `kd`.
    pub fallback: Vec<Vec<bool>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Successor {
    pub k: usize,
    pub j: usize,
    pub p: f64,
}

/// Successors ordered `uu, ud, du, dd` (first letter: variance move, second: rate move).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointTransition {
    pub moves: [Successor; 4],
}

impl JointTransition {
    pub fn total(&self) -> f64 {
        self.moves.iter().map(|m| m.p).sum()
    }
}

impl FactorTree {
    fn from_values(kind: TreeKind, h: f64, values: Vec<Vec<f64>>, drift: impl Fn(f64) -> f64) -> Self {
        let steps = values.len() - 1;
        let mut ku = Vec::with_capacity(steps);
        let mut kd = Vec::with_capacity(steps);
        let mut pu = Vec::with_capacity(steps);
        let mut clamped = Vec::with_capacity(steps);
        let mut fallback = Vec::with_capacity(steps);
        for n in 0..steps {
            let next = &values[n + 1];
            let (mut u_row, mut d_row, mut p_row, mut c_row, mut f_row) =
                (vec![0; n + 1], vec![0; n + 1], vec![0.0; n + 1], vec![false; n + 1], vec![false; n + 1]);
            for k in 0..=n {
                let v = values[n][k];
                let target = v + drift(v) * h;
                // smallest k* in [k+1, n+1] with target <= next[k*]
                let above = &next[k + 1..=n + 1];
                let iu = above.partition_point(|&w| w < target);
                let (k_up, fu) = if iu == above.len() { (n + 1, true) } else { (k + 1 + iu, false) };
                // largest k* in [0, k] with target >= next[k*]
                let below = &next[..=k];
                let id = below.partition_point(|&w| w <= target);
                let (k_dn, fd) = if id == 0 { (0, true) } else { (id - 1, false) };
                let span = next[k_up] - next[k_dn];
                let raw = if span > 0.0 {
                    (target - next[k_dn]) / span
                } else if target >= next[k_up] {
                    1.0
                } else {
                    0.0
                };
                u_row[k] = k_up;
                d_row[k] = k_dn;
                p_row[k] = raw.clamp(0.0, 1.0);
                c_row[k] = !(0.0..=1.0).contains(&raw);
                f_row[k] = fu || fd;
            }
            ku.push(u_row);
            kd.push(d_row);
            pu.push(p_row);
            clamped.push(c_row);
            fallback.push(f_row);
        }
        FactorTree { kind, steps, h, values, ku, kd, pu, clamped, fallback }
    }

    /// Degenerate tree with one node per slice.
    pub fn point(steps: usize, h: f64) -> Self {
        FactorTree {
            kind: TreeKind::Point,
            steps,
            h,
            values: vec![vec![0.0]; steps + 1],
            ku: vec![vec![0]; steps],
            kd: vec![vec![0]; steps],
            pu: vec![vec![1.0]; steps],
            clamped: vec![vec![false]; steps],
            fallback: vec![vec![false]; steps],
        }
    }

    pub fn width(&self, n: usize) -> usize {
        self.values[n].len()
    }

    /// Successor index for a uniform draw `u` in `[0, 1)`.
    pub fn step(&self, n: usize, k: usize, u: f64) -> usize {
        if u < self.pu[n][k] {
            self.ku[n][k]
        } else {
            self.kd[n][k]
        }
    }

    /// Exact law of the terminal node by forward induction.
    pub fn terminal_distribution(&self) -> Vec<f64> {
        let mut dist = vec![1.0];
        for n in 0..self.steps {
            let mut next = vec![0.0; self.width(n + 1)];
            for (k, &mass) in dist.iter().enumerate() {
                let p = self.pu[n][k];
                next[self.ku[n][k]] += mass * p;
                next[self.kd[n][k]] += mass * (1.0 - p);
            }
            dist = next;
        }
        dist
    }

    /// `E[f(V_N)]` computed exactly on the lattice.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.terminal_distribution()
            .iter()
            .zip(&self.values[self.steps])
            .map(|(p, &v)| p * f(v))
            .sum()
    }
}

pub fn build_cir_tree(model: &MarketModel, maturity: f64, steps: usize) -> FactorTree {
    assert!(steps >= 1, "at least one time step");
    let h = maturity / steps as f64;
    let root = model.y0.sqrt();
    let half_sigma = 0.5 * model.sigma_y;
    let values = (0..=steps)
        .map(|n| {
            (0..=n)
                .map(|k| {
                    if 2 * k == n {
                        return model.y0;
                    }
                    let s = root + half_sigma * (2.0 * k as f64 - n as f64) * h.sqrt();
                    if s > 0.0 {
                        s * s
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    FactorTree::from_values(TreeKind::Cir, h, values, |y| model.mu_y(y))
}

pub fn build_ou_tree(model: &MarketModel, maturity: f64, steps: usize) -> FactorTree {
    assert!(steps >= 1, "at least one time step");
    let h = maturity / steps as f64;
    let values = (0..=steps)
        .map(|n| (0..=n).map(|j| (2.0 * j as f64 - n as f64) * h.sqrt()).collect())
        .collect();
    FactorTree::from_values(TreeKind::Ou, h, values, |r| model.mu_r(r))
}

/// OU tree when the rate is stochastic, otherwise the collapsed single-node tree.
pub fn build_rate_tree(model: &MarketModel, maturity: f64, steps: usize) -> FactorTree {
    if model.is_standard_bates() {
        FactorTree::point(steps, maturity / steps as f64)
    } else {
        build_ou_tree(model, maturity, steps)
    }
}

pub fn joint_transition(
    cir: &FactorTree,
    ou: &FactorTree,
    n: usize,
    k: usize,
    j: usize,
) -> Result<JointTransition> {
    if n >= cir.steps || n >= ou.steps || k >= cir.width(n) || j >= ou.width(n) {
        return Err(Error::Index(format!("node (n={n}, k={k}, j={j})")));
    }
    let (py, pr) = (cir.pu[n][k], ou.pu[n][j]);
    let (ku, kd) = (cir.ku[n][k], cir.kd[n][k]);
    let (ju, jd) = (ou.ku[n][j], ou.kd[n][j]);
    Ok(JointTransition {
        moves: [
            Successor { k: ku, j: ju, p: py * pr },
            Successor { k: ku, j: jd, p: py * (1.0 - pr) },
            Successor { k: kd, j: ju, p: (1.0 - py) * pr },
            Successor { k: kd, j: jd, p: (1.0 - py) * (1.0 - pr) },
        ],
    })
}

/// Index path `(k_n, j_n)` for `n = 0..=N`. The rate tree consumes no draws when it is a point tree.
pub fn sample_joint_path<R: Rng + ?Sized>(
    cir: &FactorTree,
    ou: &FactorTree,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut path = Vec::with_capacity(cir.steps + 1);
    let (mut k, mut j) = (0, 0);
    path.push((k, j));
    for n in 0..cir.steps {
        k = cir.step(n, k, rng.gen::<f64>());
        if ou.kind != TreeKind::Point {
            j = ou.step(n, j, rng.gen::<f64>());
        }
        path.push((k, j));
    }
    path
}

/// `E[(V_{n+1} - V_n)^order | node]` from the two successors.
pub fn local_moments(tree: &FactorTree, n: usize, k: usize, order: u32) -> Result<f64> {
    if n >= tree.steps || k >= tree.width(n) || order == 0 || order > 3 {
        return Err(Error::Index(format!("node ({n}, {k}) order {order}")));
    }
    if tree.clamped[n][k] {
        return Err(Error::ClampActive { n, k });
    }
    let v = tree.values[n][k];
    let p = tree.pu[n][k];
    let up = tree.values[n + 1][tree.ku[n][k]] - v;
    let dn = tree.values[n + 1][tree.kd[n][k]] - v;
    Ok(p * up.powi(order as i32) + (1.0 - p) * dn.powi(order as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn benchmark() -> MarketModel {
        validate(&MarketModel::benchmark_bates()).unwrap()
    }

    #[test]
    fn cir_first_slice() {
        // h = 0.01
        let tree = build_cir_tree(&benchmark(), 0.01, 1);
        assert!((tree.values[1][1] - 0.0484).abs() < 1e-15);
        assert!((tree.values[1][0] - 0.0324).abs() < 1e-15);
        assert_eq!(tree.values[0][0], 0.04);
        assert_eq!((tree.ku[0][0], tree.kd[0][0]), (1, 0));
        assert!((tree.pu[0][0] - 0.475).abs() < 1e-12);
    }

    #[test]
    fn cir_indicator_truncation() {
        let mut m = benchmark();
        m.y0 = 0.0001;
        let tree = build_cir_tree(&m, 0.5, 1);
        assert_eq!(tree.values[1][0], 0.0);
    }

    #[test]
    fn ou_first_slice() {
        let m = benchmark();
        let tree = build_ou_tree(&m, 0.01, 1);
        assert!((tree.values[1][0] + 0.1).abs() < 1e-15);
        assert!((tree.values[1][1] - 0.1).abs() < 1e-15);
        assert_eq!((tree.ku[0][0], tree.kd[0][0]), (1, 0));
        assert_eq!(tree.pu[0][0], 0.5);
    }

    #[test]
    fn ou_zero_reversion_is_symmetric_walk() {
        let mut m = benchmark();
        m.kappa_r = 1e-300;
        let tree = build_ou_tree(&m, 1.0, 40);
        for row in &tree.pu {
            for &p in row {
                assert!((p - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn joint_products() {
        let m = benchmark();
        let cir = build_cir_tree(&m, 0.01, 1);
        let ou = build_ou_tree(&m, 0.01, 1);
        let t = joint_transition(&cir, &ou, 0, 0, 0).unwrap();
        let p: Vec<f64> = t.moves.iter().map(|s| s.p).collect();
        assert!((p[0] - 0.2375).abs() < 1e-12);
        assert!((p[1] - 0.2375).abs() < 1e-12);
        assert!((p[2] - 0.2625).abs() < 1e-12);
        assert!((p[3] - 0.2625).abs() < 1e-12);
        assert!((t.total() - 1.0).abs() < 1e-15);
        assert!(joint_transition(&cir, &ou, 1, 0, 0).is_err());
    }

    #[test]
    fn degenerate_marginal() {
        let m = benchmark();
        let mut cir = build_cir_tree(&m, 0.01, 1);
        cir.pu[0][0] = 1.0;
        let ou = build_ou_tree(&m, 0.01, 1);
        let t = joint_transition(&cir, &ou, 0, 0, 0).unwrap();
        assert_eq!(t.moves[2].p, 0.0);
        assert_eq!(t.moves[3].p, 0.0);
    }

    #[test]
    fn forced_up_path() {
        let m = benchmark();
        let mut cir = build_cir_tree(&m, 0.5, 20);
        for row in cir.pu.iter_mut() {
            row.iter_mut().for_each(|p| *p = 1.0);
        }
        for n in 0..20 {
            for k in 0..=n {
                cir.ku[n][k] = k + 1;
            }
        }
        let ou = FactorTree::point(20, 0.025);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = sample_joint_path(&cir, &ou, &mut rng);
        for (n, &(k, j)) in path.iter().enumerate() {
            assert_eq!((k, j), (n, 0));
        }
    }

    #[test]
    fn path_is_deterministic() {
        let m = MarketModel::benchmark_bates_hw(-0.5);
        let cir = build_cir_tree(&m, 0.5, 50);
        let ou = build_ou_tree(&m, 0.5, 50);
        let a = sample_joint_path(&cir, &ou, &mut ChaCha8Rng::seed_from_u64(11));
        let b = sample_joint_path(&cir, &ou, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn one_step_frequency_matches_probability() {
        let m = benchmark();
        let cir = build_cir_tree(&m, 0.01, 1);
        let ou = FactorTree::point(1, 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let ups = (0..draws)
            .filter(|_| sample_joint_path(&cir, &ou, &mut rng)[1].0 == 1)
            .count();
        let p = cir.pu[0][0];
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((ups as f64 / draws as f64 - p).abs() < 3.0 * sd);
    }

    #[test]
    fn first_moment_exact_and_second_bounded() {
        let m = benchmark();
        let tree = build_cir_tree(&m, 0.5, 200);
        let h = tree.h;
        let lo = (m.kappa_y * m.theta_y / m.sigma_y).powi(2) * h;
        let hi = m.sigma_y.powi(2) / (4.0 * m.kappa_y.powi(2)) / h;
        let s2 = m.sigma_y * m.sigma_y;
        for n in 0..200 {
            for k in 0..=n {
                let y = tree.values[n][k];
                if tree.clamped[n][k] {
                    assert!(matches!(local_moments(&tree, n, k, 1), Err(Error::ClampActive { .. })));
                    continue;
                }
                let m1 = local_moments(&tree, n, k, 1).unwrap();
                assert!((m1 - m.mu_y(y) * h).abs() <= 1e-14, "node ({n},{k})");
                if y >= lo && y <= hi {
                    let m2 = local_moments(&tree, n, k, 2).unwrap();
                    let c = 0.5 * s2 * (m.kappa_y * (m.theta_y + y) + s2 / 8.0);
                    assert!((m2 - s2 * y * h).abs() <= c * h * h + 1e-15, "node ({n},{k})");
                }
            }
        }
    }

    #[test]
    fn single_jumps_in_interior_band() {
        let m = benchmark();
        let tree = build_cir_tree(&m, 0.5, 200);
        let h = tree.h;
        let lo = (m.kappa_y * m.theta_y / m.sigma_y).powi(2) * h;
        let hi = m.sigma_y.powi(2) / (4.0 * m.kappa_y.powi(2)) / h;
        let mut checked = 0;
        for n in 0..200 {
            for k in 0..=n {
                let y = tree.values[n][k];
                if y > lo && y < hi {
                    assert_eq!((tree.ku[n][k], tree.kd[n][k]), (k + 1, k), "node ({n},{k})");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn zero_node_down_move_stays() {
        let mut m = benchmark();
        m.y0 = 0.0;
        let tree = build_cir_tree(&m, 0.5, 100);
        let mut seen = 0;
        for n in 0..100 {
            for k in 0..=n {
                if tree.values[n][k] == 0.0 {
                    assert_eq!(tree.kd[n][k], k);
                    seen += 1;
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn ou_mean_is_zero() {
        let m = MarketModel::benchmark_bates_hw(0.5);
        let tree = build_ou_tree(&m, 0.5, 100);
        assert!(tree.expectation(|r| r).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn tree_invariants(y0 in 0.0f64..0.2, sigma in 0.05f64..1.0, kappa in 0.1f64..5.0,
                           theta in 0.01f64..0.2, steps in 1usize..60) {
            let mut m = benchmark();
            m.y0 = y0;
            m.sigma_y = sigma;
            m.kappa_y = kappa;
            m.theta_y = theta;
            let tree = build_cir_tree(&m, 1.0, steps);
            for n in 0..steps {
                for k in 0..=n {
                    let (u, d, p) = (tree.ku[n][k], tree.kd[n][k], tree.pu[n][k]);
                    prop_assert!(d <= k && k < u && u <= n + 1);
                    prop_assert!((0.0..=1.0).contains(&p));
                    if !tree.fallback[n][k] {
                        let target = tree.values[n][k] + m.mu_y(tree.values[n][k]) * tree.h;
                        prop_assert!(tree.values[n + 1][d] <= target);
                        prop_assert!(target <= tree.values[n + 1][u]);
                    }
                }
                prop_assert!(tree.values[n + 1].windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }
}
