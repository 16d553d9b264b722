//! Finite-MDP certification of the region-aware backup operator.
//!
//! States are indices, actions are embedded on a 1-D grid in [-1, 1] so the
//! per-state hull of supported actions is an exact interval. The operator
//! applies the standard policy-evaluation backup on supported pairs,
//! averages the backup over the k nearest supported pairs inside the hull,
//! and pins everything outside the hull to `Q_min = r_min / (1 - gamma)`.
//! Random trials certify the sup-norm contraction factor and fixed-point
//! convergence numerically.

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// action index -> embedding on the 1-D grid in [-1, 1]
    pub action_embedding: Vec<f64>,
    /// transition probabilities, rows `[s * n_actions + a]` over next states
    pub transition: Array2<f64>,
    /// reward per (state, action)
    pub reward: Array2<f64>,
    pub gamma: f64,
    /// evaluation policy pi(a | s)
    pub policy: Array2<f64>,
}

impl TabularMdp {
    pub fn q_min(&self) -> f64 {
        let r_min = self.reward.iter().copied().fold(f64::INFINITY, f64::min);
        r_min / (1.0 - self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_states < 2 || self.n_actions < 2 {
            return Err(Error::InvalidArgument("need at least 2 states and 2 actions".into()));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument("gamma must lie in (0, 1)".into()));
        }
        for row in self.transition.rows() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::InvalidArgument("transition rows must be stochastic".into()));
            }
        }
        for row in self.policy.rows() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::InvalidArgument("policy rows must be stochastic".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Id,
    OodIn,
    OodOut,
}

/// Per-(s, a) region labels derived from a behavior support: supported pairs
/// are ID; unsupported pairs inside the per-state interval hull of supported
/// embeddings are OOD-in; the rest are OOD-out.
#[derive(Debug, Clone)]
pub struct RegionLabelsTabular {
    pub support: Array2<bool>,
    pub labels: Vec<Region>,
    n_actions: usize,
}

impl RegionLabelsTabular {
    pub fn from_support(support: Array2<bool>, embedding: &[f64]) -> RegionLabelsTabular {
        let (s_n, a_n) = support.dim();
        let mut labels = Vec::with_capacity(s_n * a_n);
        for s in 0..s_n {
            let supported: Vec<f64> = (0..a_n).filter(|&a| support[(s, a)]).map(|a| embedding[a]).collect();
            let lo = supported.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = supported.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for a in 0..a_n {
                let label = if support[(s, a)] {
                    Region::Id
                } else if embedding[a] >= lo && embedding[a] <= hi {
                    Region::OodIn
                } else {
                    Region::OodOut
                };
                labels.push(label);
            }
        }
        RegionLabelsTabular {
            support,
            labels,
            n_actions: a_n,
        }
    }

    pub fn label(&self, s: usize, a: usize) -> Region {
        self.labels[s * self.n_actions + a]
    }

    pub fn id_pairs(&self) -> Vec<(usize, usize)> {
        let (s_n, a_n) = self.support.dim();
        let mut out = Vec::new();
        for s in 0..s_n {
            for a in 0..a_n {
                if self.support[(s, a)] {
                    out.push((s, a));
                }
            }
        }
        out
    }
}

/// Random MDP plus labels: stochastic transitions, rewards in [0, 1], each
/// action supported with probability `support_density` and at least one
/// supported action per state.
pub fn build_random_mdp(
    n_states: usize,
    n_actions: usize,
    support_density: f64,
    seed: u64,
) -> Result<(TabularMdp, RegionLabelsTabular)> {
    if n_states < 2 || n_actions < 2 {
        return Err(Error::InvalidArgument("need at least 2 states and 2 actions".into()));
    }
    if !(support_density > 0.0 && support_density <= 1.0) {
        return Err(Error::InvalidArgument("support_density must lie in (0, 1]".into()));
    }
    let mut r = rng::stream(seed, "tabular_mdp");
    let action_embedding: Vec<f64> = (0..n_actions)
        .map(|a| -1.0 + 2.0 * a as f64 / (n_actions - 1) as f64)
        .collect();

    let sa = n_states * n_actions;
    let mut transition = Array2::zeros((sa, n_states));
    for mut row in transition.rows_mut() {
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = r.random::<f64>() + 1e-3;
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    let reward = Array2::from_shape_fn((n_states, n_actions), |_| r.random::<f64>());
    let mut policy = Array2::zeros((n_states, n_actions));
    for mut row in policy.rows_mut() {
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = r.random::<f64>() + 1e-3;
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }

    let mut support = Array2::from_elem((n_states, n_actions), false);
    for s in 0..n_states {
        let mut any = false;
        for a in 0..n_actions {
            if r.random::<f64>() < support_density {
                support[(s, a)] = true;
                any = true;
            }
        }
        if !any {
            let a = r.random_range(0..n_actions);
            support[(s, a)] = true;
        }
    }

    let mdp = TabularMdp {
        n_states,
        n_actions,
        action_embedding: action_embedding.clone(),
        transition,
        reward,
        gamma: 0.9,
        policy,
    };
    mdp.validate()?;
    let labels = RegionLabelsTabular::from_support(support, &action_embedding);
    Ok((mdp, labels))
}

/// Standard policy-evaluation backup
/// `(T Q)(s, a) = r(s, a) + gamma sum_s' P(s'|s,a) sum_a' pi(a'|s') Q(s', a')`.
pub fn bellman_backup(mdp: &TabularMdp, q: &Array2<f64>) -> Array2<f64> {
    // V(s') = sum_a' pi(a'|s') Q(s', a')
    let v: Array1<f64> = (&mdp.policy * q).sum_axis(ndarray::Axis(1));
    let pv = mdp.transition.dot(&v);
    Array2::from_shape_fn((mdp.n_states, mdp.n_actions), |(s, a)| {
        mdp.reward[(s, a)] + mdp.gamma * pv[s * mdp.n_actions + a]
    })
}

/// Distance between (s, a) pairs for the k-nearest-neighbor average: state
/// index distance plus action embedding distance, both weighted 1. Ties are
/// broken toward the lowest (state, action) index.
fn knn_ids(mdp: &TabularMdp, id_pairs: &[(usize, usize)], s: usize, a: usize, k: usize) -> Vec<(usize, usize)> {
    let mut scored: Vec<(f64, usize, usize)> = id_pairs
        .iter()
        .map(|&(si, ai)| {
            let d = (s as f64 - si as f64).abs()
                + (mdp.action_embedding[a] - mdp.action_embedding[ai]).abs();
            (d, si, ai)
        })
        .collect();
    scored.sort_by(|x, y| x.partial_cmp(y).expect("finite distances"));
    scored.into_iter().take(k).map(|(_, si, ai)| (si, ai)).collect()
}

/// The three-case operator: backup on ID pairs, kNN-averaged backup on
/// OOD-in pairs, `Q_min` on OOD-out pairs.
pub fn apply_t_pars(
    q: &Array2<f64>,
    mdp: &TabularMdp,
    labels: &RegionLabelsTabular,
    k: usize,
) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let backup = bellman_backup(mdp, q);
    let id_pairs = labels.id_pairs();
    let q_min = mdp.q_min();
    let mut out = Array2::zeros((mdp.n_states, mdp.n_actions));
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            out[(s, a)] = match labels.label(s, a) {
                Region::Id => backup[(s, a)],
                Region::OodIn => {
                    let nn = knn_ids(mdp, &id_pairs, s, a, k);
                    nn.iter().map(|&(si, ai)| backup[(si, ai)]).sum::<f64>() / nn.len() as f64
                }
                Region::OodOut => q_min,
            };
        }
    }
    Ok(out)
}

/// Max observed ratio `||T Q1 - T Q2||_inf / ||Q1 - Q2||_inf` over random
/// Q-pairs; identical pairs are skipped.
pub fn verify_contraction(
    mdp: &TabularMdp,
    labels: &RegionLabelsTabular,
    k: usize,
    trials: usize,
    q_range: f64,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let mut r = rng::stream(seed, "contraction_trials");
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let q1 = Array2::from_shape_fn((mdp.n_states, mdp.n_actions), |_| r.random_range(-q_range..q_range));
        let q2 = Array2::from_shape_fn((mdp.n_states, mdp.n_actions), |_| r.random_range(-q_range..q_range));
        let denom = (&q1 - &q2).iter().map(|v| v.abs()).fold(0.0, f64::max);
        if denom == 0.0 {
            continue;
        }
        let t1 = apply_t_pars(&q1, mdp, labels, k)?;
        let t2 = apply_t_pars(&q2, mdp, labels, k)?;
        let num = (&t1 - &t2).iter().map(|v| v.abs()).fold(0.0, f64::max);
        max_ratio = max_ratio.max(num / denom);
    }
    Ok(max_ratio)
}

/// Iterate from Q = 0 until the sup-norm residual drops below `tol`.
/// Returns the fixed point, the iteration count, and the residual sequence.
pub fn fixed_point_iterate(
    mdp: &TabularMdp,
    labels: &RegionLabelsTabular,
    k: usize,
    tol: f64,
) -> Result<(Array2<f64>, usize, Vec<f64>)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let mut q = Array2::zeros((mdp.n_states, mdp.n_actions));
    let mut residuals = Vec::new();
    for iter in 1..=100_000 {
        let next = apply_t_pars(&q, mdp, labels, k)?;
        let res = (&next - &q).iter().map(|v| v.abs()).fold(0.0, f64::max);
        residuals.push(res);
        q = next;
        if res < tol {
            return Ok((q, iter, residuals));
        }
    }
    Err(Error::InvalidArgument("fixed-point iteration did not converge".into()))
}

/// Dense policy-evaluation solve `(I - gamma P_pi) q = r` over (s, a) pairs,
/// used as the all-ID oracle. Plain Gaussian elimination with partial
/// pivoting; sizes here are tiny.
pub fn solve_policy_evaluation(mdp: &TabularMdp) -> Array2<f64> {
    let sa = mdp.n_states * mdp.n_actions;
    let mut m = vec![vec![0.0f64; sa + 1]; sa];
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let row = s * mdp.n_actions + a;
            m[row][row] = 1.0;
            for s2 in 0..mdp.n_states {
                for a2 in 0..mdp.n_actions {
                    let col = s2 * mdp.n_actions + a2;
                    m[row][col] -= mdp.gamma * mdp.transition[(row, s2)] * mdp.policy[(s2, a2)];
                }
            }
            m[row][sa] = mdp.reward[(s, a)];
        }
    }
    // forward elimination
    for col in 0..sa {
        let pivot = (col..sa)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).expect("finite"))
            .expect("non-empty");
        m.swap(col, pivot);
        let p = m[col][col];
        for row in (col + 1)..sa {
            let f = m[row][col] / p;
            if f == 0.0 {
                continue;
            }
            for c in col..=sa {
                m[row][c] -= f * m[col][c];
            }
        }
    }
    // back substitution
    let mut x = vec![0.0f64; sa];
    for row in (0..sa).rev() {
        let mut acc = m[row][sa];
        for c in (row + 1)..sa {
            acc -= m[row][c] * x[c];
        }
        x[row] = acc / m[row][row];
    }
    Array2::from_shape_fn((mdp.n_states, mdp.n_actions), |(s, a)| x[s * mdp.n_actions + a])
}
