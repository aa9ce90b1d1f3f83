//! Relative needs entropy: divergences between needs distributions and the
//! trust scores and groupings built on them. All quantities are in nats.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use libm::log;

use crate::AgentId;

/// Floor applied to the reference distribution of [`kl_divergence`].
pub const KL_FLOOR: f64 = 1e-9;

fn xlogy_ratio(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * log(p / q)
    }
}

/// `sum p_i ln(p_i / q_i)`; `q` is floored at [`KL_FLOOR`] and renormalized.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let floored: Vec<f64> = q.iter().map(|&v| v.max(KL_FLOOR)).collect();
    let total: f64 = floored.iter().sum();
    let kl: f64 = p.iter().zip(&floored).map(|(&pi, &qi)| xlogy_ratio(pi, qi / total)).sum();
    kl.max(0.0)
}

/// Jensen-Shannon divergence, bounded by ln 2.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    // Summed pairwise so that js(p, q) and js(q, p) perform identical operations.
    let js: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let m = 0.5 * (a + b);
            0.5 * xlogy_ratio(a, m) + 0.5 * xlogy_ratio(b, m)
        })
        .fold(0.0, |acc, v| acc + v);
    js.clamp(0.0, core::f64::consts::LN_2)
}

/// `1 - js(p, q) / ln 2`, in [0, 1].
pub fn trust(p: &[f64], q: &[f64]) -> f64 {
    (1.0 - js_divergence(p, q) / core::f64::consts::LN_2).clamp(0.0, 1.0)
}

/// Symmetric pairwise trust scores with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustMatrix {
    pub agents: Vec<AgentId>,
    pub values: Vec<Vec<f64>>,
}

impl TrustMatrix {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn is_valid(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| {
            self.values[i][i] == 1.0
                && (0..n).all(|j| self.values[i][j] == self.values[j][i] && (0.0..=1.0).contains(&self.values[i][j]))
        })
    }
}

/// Builds the trust matrix for agents `(id, distribution)`.
pub fn trust_matrix<D: AsRef<[f64]>>(agents: &[(AgentId, D)]) -> TrustMatrix {
    let n = agents.len();
    let mut values = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let t = trust(agents[i].1.as_ref(), agents[j].1.as_ref());
            values[i][j] = t;
            values[j][i] = t;
        }
    }
    TrustMatrix { agents: agents.iter().map(|(id, _)| *id).collect(), values }
}

/// Connected components of the graph with an edge wherever trust >= `tau`,
/// each sorted, listed by smallest member.
pub fn group_by_trust(tm: &TrustMatrix, tau: f64) -> Vec<Vec<AgentId>> {
    let n = tm.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if tm.get(i, j) >= tau {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<BTreeSet<AgentId>> = Vec::new();
    let mut root_index: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        let g = *root_index[r].get_or_insert_with(|| {
            groups.push(BTreeSet::new());
            groups.len() - 1
        });
        groups[g].insert(tm.agents[i]);
    }
    let mut groups: Vec<Vec<AgentId>> = groups.into_iter().map(|g| g.into_iter().collect()).collect();
    groups.sort_by_key(|g| g[0]);
    groups
}

/// Needs distribution of a group: the normalized mean of member distributions.
pub fn group_distribution<D: AsRef<[f64]>>(members: &[D]) -> Vec<f64> {
    let Some(first) = members.first() else {
        return Vec::new();
    };
    let mut mean = vec![0.0; first.as_ref().len()];
    for m in members {
        for (acc, &v) in mean.iter_mut().zip(m.as_ref()) {
            *acc += v;
        }
    }
    let total: f64 = mean.iter().sum();
    if total > 0.0 {
        for v in &mut mean {
            *v /= total;
        }
    }
    mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;
    use proptest::prelude::*;

    // Closed forms, written out term by term.
    #[test]
    fn kl_examples() {
        let p = [0.5, 0.5];
        assert_eq!(kl_divergence(&p, &p), 0.0);
        let expected = 0.5 * log(0.5 / 0.25) + 0.5 * log(0.5 / 0.75);
        assert!((kl_divergence(&p, &[0.25, 0.75]) - expected).abs() < 1e-9);
        assert!((kl_divergence(&p, &[0.25, 0.75]) - 0.1438).abs() < 1e-4);
        assert!((kl_divergence(&[1.0, 0.0], &p) - LN_2).abs() < 1e-12);
    }

    #[test]
    fn js_examples() {
        let p = [0.5, 0.5];
        assert_eq!(js_divergence(&p, &p), 0.0);
        assert!((js_divergence(&[1.0, 0.0], &[0.0, 1.0]) - LN_2).abs() < 1e-15);
        let m = [0.375, 0.625];
        let expected = 0.5 * (0.5 * log(0.5 / m[0]) + 0.5 * log(0.5 / m[1]))
            + 0.5 * (0.25 * log(0.25 / m[0]) + 0.75 * log(0.75 / m[1]));
        let js = js_divergence(&p, &[0.25, 0.75]);
        assert!((js - expected).abs() < 1e-12);
        assert!((js - 0.033822).abs() < 1e-6);
    }

    #[test]
    fn trust_examples() {
        let p = [0.5, 0.5];
        assert_eq!(trust(&p, &p), 1.0);
        assert!(trust(&[1.0, 0.0], &[0.0, 1.0]).abs() < 1e-12);
        assert!((trust(&p, &[0.25, 0.75]) - 0.951205).abs() < 1e-6);
    }

    #[test]
    fn trust_matrix_examples() {
        let one = trust_matrix(&[(7, [0.2, 0.8])]);
        assert_eq!(one.values, vec![vec![1.0]]);
        let same = trust_matrix(&[(0, [0.2, 0.8]), (1, [0.2, 0.8])]);
        assert_eq!(same.values, vec![vec![1.0; 2]; 2]);
        let block = trust_matrix(&[(0, [1.0, 0.0]), (1, [1.0, 0.0]), (2, [0.0, 1.0])]);
        assert_eq!(block.get(0, 1), 1.0);
        assert!(block.get(0, 2).abs() < 1e-12);
        assert!(block.get(1, 2).abs() < 1e-12);
        assert!(block.is_valid());
    }

    #[test]
    fn grouping_examples() {
        let tm = trust_matrix(&[(0, [0.9, 0.1]), (1, [0.1, 0.9]), (2, [0.5, 0.5])]);
        assert_eq!(group_by_trust(&tm, 0.0), vec![vec![0, 1, 2]]);
        assert_eq!(group_by_trust(&tm, 1.0), vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn group_distribution_is_normalized_mean() {
        let g = group_distribution(&[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(g, vec![0.5, 0.5]);
    }

    fn dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            if s == 0.0 {
                let n = v.len() as f64;
                v.iter().map(|_| 1.0 / n).collect()
            } else {
                v.iter().map(|x| x / s).collect()
            }
        })
    }

    proptest! {
        #[test]
        fn gibbs_inequality(p in dist(5), q in dist(5)) {
            prop_assert!(kl_divergence(&p, &q) >= -1e-12);
            prop_assert!(kl_divergence(&p, &p).abs() < 1e-6);
        }

        #[test]
        fn js_is_symmetric_and_bounded(p in dist(5), q in dist(5)) {
            let a = js_divergence(&p, &q);
            prop_assert_eq!(a, js_divergence(&q, &p));
            prop_assert!(a >= 0.0 && a <= LN_2 + 1e-12);
        }

        #[test]
        fn raising_tau_never_merges(ds in prop::collection::vec(dist(3), 1..6), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let agents: Vec<(AgentId, Vec<f64>)> = ds.into_iter().enumerate().map(|(i, d)| (i as AgentId, d)).collect();
            let tm = trust_matrix(&agents);
            prop_assert!(tm.is_valid());
            let coarse = group_by_trust(&tm, lo);
            let fine = group_by_trust(&tm, hi);
            // every fine group sits inside one coarse group
            for g in &fine {
                prop_assert!(coarse.iter().any(|c| g.iter().all(|m| c.contains(m))));
            }
        }
    }
}
