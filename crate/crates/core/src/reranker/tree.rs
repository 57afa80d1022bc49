//! Least-squares regression trees grown best-first, with Newton leaf values.

use serde::{Deserialize, Serialize};

use crate::features::NUM_FEATURES;

/// Added to every leaf's hessian sum so pure-gradient leaves stay finite.
pub const LEAF_DAMPING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        /// 0-based feature column.
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
    pub max_leaves: usize,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { value }],
            max_leaves: 1,
        }
    }

    pub fn predict(&self, x: &[f64; NUM_FEATURES]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Adds each split's gain to its feature's slot.
    pub fn accumulate_gain(&self, into: &mut [f64; NUM_FEATURES]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                into[*feature] += gain;
            }
        }
    }

    /// Children exist, every node is reachable exactly once, leaves within budget.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return false;
            }
            seen[i] = true;
            if let Node::Split { left, right, .. } = self.nodes[i] {
                stack.push(left);
                stack.push(right);
            }
        }
        seen.iter().all(|&s| s) && self.num_leaves() <= self.max_leaves.max(1)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_leaves: usize,
    pub min_rows_per_leaf: usize,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Candidate {
    node: usize,
    rows: Vec<usize>,
    split: Option<Split>,
}

fn best_split(
    rows: &[usize],
    x: &[[f64; NUM_FEATURES]],
    target: &[f64],
    min_rows: usize,
) -> Option<Split> {
    let n = rows.len();
    let min_rows = min_rows.max(1);
    if n < 2 * min_rows {
        return None;
    }
    let total: f64 = rows.iter().map(|&r| target[r]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<Split> = None;
    let mut sorted = rows.to_vec();
    for f in 0..NUM_FEATURES {
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += target[sorted[k]];
            let n_left = k + 1;
            let lo = x[sorted[k]][f];
            let hi = x[sorted[k + 1]][f];
            if lo == hi || n_left < min_rows || n - n_left < min_rows {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64
                + right_sum * right_sum / (n - n_left) as f64
                - parent;
            if gain > best.map_or(1e-12, |b| b.gain) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid >= lo && mid < hi { mid } else { lo };
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// Fits one tree to `target` (the lambdas) over `x`, using `hessian` for the
/// Newton leaf values `sum(target) / (sum(hessian) + damping)`.
pub fn fit_tree(
    x: &[[f64; NUM_FEATURES]],
    target: &[f64],
    hessian: &[f64],
    params: &TreeParams,
) -> RegressionTree {
    let max_leaves = params.max_leaves.max(1);
    let leaf_value = |rows: &[usize]| {
        let g: f64 = rows.iter().map(|&r| target[r]).sum();
        let h: f64 = rows.iter().map(|&r| hessian[r]).sum();
        g / (h + LEAF_DAMPING)
    };

    let all: Vec<usize> = (0..x.len()).collect();
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let split = best_split(&all, x, target, params.min_rows_per_leaf);
    let mut open = vec![Candidate {
        node: 0,
        rows: all,
        split,
    }];
    let mut leaves = 1;

    while leaves < max_leaves {
        // highest gain first; ties go to the earliest-created node
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.split.map(|s| (i, s.gain, c.node)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)));
        let Some((i, _, _)) = pick else { break };
        let cand = open.swap_remove(i);
        let s = cand.split.expect("picked candidates have a split");
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            cand.rows.iter().partition(|&&r| x[r][s.feature] <= s.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });
        nodes[cand.node] = Node::Split {
            feature: s.feature,
            threshold: s.threshold,
            left,
            right,
            gain: s.gain,
        };
        leaves += 1;
        for (node, rows) in [(left, left_rows), (right, right_rows)] {
            let split = best_split(&rows, x, target, params.min_rows_per_leaf);
            open.push(Candidate { node, rows, split });
        }
    }
    for c in open {
        nodes[c.node] = Node::Leaf {
            value: leaf_value(&c.rows),
        };
    }
    RegressionTree { nodes, max_leaves }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64, w: f64) -> [f64; NUM_FEATURES] {
        let mut r = [0.0; NUM_FEATURES];
        r[0] = v;
        r[3] = w;
        r
    }

    #[test]
    fn single_leaf_is_newton_step() {
        let x = vec![row(1.0, 0.0), row(2.0, 0.0)];
        let t = fit_tree(
            &x,
            &[1.0, 3.0],
            &[1.0, 1.0],
            &TreeParams {
                max_leaves: 1,
                min_rows_per_leaf: 1,
            },
        );
        assert_eq!(t.num_leaves(), 1);
        assert!((t.predict(&x[0]) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn splits_on_informative_feature() {
        let x: Vec<_> = (0..20).map(|i| row(i as f64, ((i * 7) % 5) as f64)).collect();
        let target: Vec<f64> = (0..20).map(|i| if i < 10 { -1.0 } else { 1.0 }).collect();
        let t = fit_tree(
            &x,
            &target,
            &vec![1.0; 20],
            &TreeParams {
                max_leaves: 4,
                min_rows_per_leaf: 1,
            },
        );
        assert!(t.is_well_formed());
        assert!(matches!(t.nodes[0], Node::Split { feature: 0, .. }));
        let mut gain = [0.0; NUM_FEATURES];
        t.accumulate_gain(&mut gain);
        assert!((gain[0] - 20.0).abs() < 1e-9);
        assert!(t.predict(&row(3.0, 0.0)) < 0.0 && t.predict(&row(15.0, 0.0)) > 0.0);
    }

    #[test]
    fn respects_min_rows_and_leaf_budget() {
        let x: Vec<_> = (0..10).map(|i| row(i as f64, 0.0)).collect();
        let target: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let t = fit_tree(
            &x,
            &target,
            &vec![1.0; 10],
            &TreeParams {
                max_leaves: 31,
                min_rows_per_leaf: 3,
            },
        );
        assert!(t.is_well_formed());
        assert!(t.num_leaves() <= 3);
    }

    #[test]
    fn constant_target_does_not_split() {
        let x: Vec<_> = (0..10).map(|i| row(i as f64, 0.0)).collect();
        let t = fit_tree(
            &x,
            &[0.0; 10],
            &[0.0; 10],
            &TreeParams {
                max_leaves: 8,
                min_rows_per_leaf: 1,
            },
        );
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict(&x[0]), 0.0);
    }
}
