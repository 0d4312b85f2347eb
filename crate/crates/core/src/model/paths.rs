use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lattice::ScenarioLattice;
use crate::error::{Result, SwingError};

/// Default bound on the number of paths enumerated in exhaustive mode.
pub const DEFAULT_EXHAUSTIVE_BOUND: usize = 1 << 16;

/// A weighted collection of lattice paths (one node index per time slice).
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub paths: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    pub exhaustive: bool,
}

impl PathEnsemble {
    /// Every root-to-terminal path with its exact probability.
    pub fn exhaustive(lattice: &ScenarioLattice, bound: usize) -> Result<Self> {
        let count = lattice.path_count();
        if count > bound as u128 {
            return Err(SwingError::TooManyPaths { count, bound });
        }
        let mut paths = Vec::with_capacity(count as usize);
        let mut weights = Vec::with_capacity(count as usize);
        let mut stack = vec![(vec![0usize], 1.0f64)];
        while let Some((path, w)) = stack.pop() {
            let k = path.len() - 1;
            if k == lattice.steps() {
                paths.push(path);
                weights.push(w);
                continue;
            }
            let node = *path.last().unwrap();
            for tr in lattice.transitions(k, node).iter().rev() {
                if tr.prob == 0.0 {
                    continue;
                }
                let mut next = path.clone();
                next.push(tr.child);
                stack.push((next, w * tr.prob));
            }
        }
        Ok(Self { paths, weights, exhaustive: true })
    }

    /// `n_paths` i.i.d. paths with uniform weights; deterministic in `seed`.
    pub fn sample(lattice: &ScenarioLattice, n_paths: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(SwingError::InvalidModel("n_paths must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let paths = (0..n_paths)
            .map(|_| {
                let mut path = Vec::with_capacity(lattice.steps() + 1);
                let mut node = 0usize;
                path.push(node);
                for k in 0..lattice.steps() {
                    let trs = lattice.transitions(k, node);
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut pick = trs.last().unwrap().child;
                    for tr in trs {
                        acc += tr.prob;
                        if u < acc {
                            pick = tr.child;
                            break;
                        }
                    }
                    node = pick;
                    path.push(node);
                }
                path
            })
            .collect();
        let w = 1.0 / n_paths as f64;
        Ok(Self { paths, weights: vec![w; n_paths], exhaustive: false })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Weighted mean of `f(path)`.
    pub fn mean<F: Fn(&[usize]) -> f64>(&self, f: F) -> f64 {
        self.paths
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    pub fn mean_cashflow(&self, lattice: &ScenarioLattice, k: usize) -> f64 {
        self.mean(|p| lattice.cashflow(k, p[k]))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryNode {
    pub time: usize,
    pub lattice_node: usize,
    pub parent: Option<usize>,
    /// `(history index, one-step probability)`.
    pub children: Vec<(usize, f64)>,
    /// Unconditional probability of this history.
    pub prob: f64,
}

/// The lattice unfolded into its tree of path prefixes.
///
/// Nodes of this tree are the atoms of the natural filtration of the lattice:
/// two paths share a history node at `t_k` iff they agree up to `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryTree {
    nodes: Vec<HistoryNode>,
    by_time: Vec<Vec<usize>>,
}

impl HistoryTree {
    pub fn from_lattice(lattice: &ScenarioLattice, bound: usize) -> Result<Self> {
        Self::from_node(lattice, 0, 0, bound)
    }

    /// Tree of continuations of lattice node `node` at `t_k0`; times stay absolute
    /// and `at_time(k)` is empty for `k < k0`.
    pub fn from_node(lattice: &ScenarioLattice, k0: usize, node: usize, bound: usize) -> Result<Self> {
        let k_max = lattice.steps();
        if k0 > k_max || node >= lattice.node_count(k0) {
            return Err(SwingError::InvalidModel(format!("no lattice node {node} at step {k0}")));
        }
        let mut nodes = vec![HistoryNode {
            time: k0,
            lattice_node: node,
            parent: None,
            children: Vec::new(),
            prob: 1.0,
        }];
        let mut by_time = vec![Vec::new(); k0];
        by_time.push(vec![0usize]);
        for k in k0..k_max {
            let mut next = Vec::new();
            for &h in &by_time[k] {
                let ln = nodes[h].lattice_node;
                let prob = nodes[h].prob;
                for tr in lattice.transitions(k, ln) {
                    if tr.prob == 0.0 {
                        continue;
                    }
                    let id = nodes.len();
                    nodes.push(HistoryNode {
                        time: k + 1,
                        lattice_node: tr.child,
                        parent: Some(h),
                        children: Vec::new(),
                        prob: prob * tr.prob,
                    });
                    nodes[h].children.push((id, tr.prob));
                    next.push(id);
                }
            }
            // every history has a child, so the last slice counts the paths
            if next.len() > bound {
                return Err(SwingError::TooManyPaths { count: lattice.path_count(), bound });
            }
            by_time.push(next);
        }
        Ok(Self { nodes, by_time })
    }

    pub fn node(&self, h: usize) -> &HistoryNode {
        &self.nodes[h]
    }

    pub fn nodes(&self) -> &[HistoryNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn at_time(&self, k: usize) -> &[usize] {
        &self.by_time[k]
    }

    pub fn steps(&self) -> usize {
        self.by_time.len() - 1
    }

    pub fn root_time(&self) -> usize {
        self.nodes[0].time
    }

    /// Conditional expectation of `f(child)` given history `h`.
    pub fn conditional<F: Fn(usize) -> f64>(&self, h: usize, f: F) -> f64 {
        self.nodes[h].children.iter().map(|&(c, p)| p * f(c)).sum()
    }

    /// History node at time `k` on the path ending in leaf `leaf`.
    pub fn ancestor(&self, mut h: usize, k: usize) -> usize {
        while self.nodes[h].time > k {
            h = self.nodes[h].parent.expect("k is not before the root");
        }
        h
    }

    /// Lattice path from the root to history node `h`.
    pub fn lattice_path(&self, mut h: usize) -> Vec<usize> {
        let mut out = vec![self.nodes[h].lattice_node];
        while let Some(p) = self.nodes[h].parent {
            out.push(self.nodes[p].lattice_node);
            h = p;
        }
        out.reverse();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builders::{binary_example, binomial, constant, BinomialSpec, DriftKind, StepRule};

    #[test]
    fn exhaustive_counts() {
        let b = PathEnsemble::exhaustive(&binary_example(6).unwrap(), 16).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b.weights, vec![0.5, 0.5]);
        let c = PathEnsemble::exhaustive(&constant(1.0, 3.0, 3).unwrap(), 16).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.weights, vec![1.0]);
        let spec = BinomialSpec::new(
            DriftKind::Martingale,
            1.0,
            2.0,
            2,
            StepRule::Additive { drift: 0.0, spread: 0.5 },
        )
        .non_recombining();
        let n = PathEnsemble::exhaustive(&binomial(&spec).unwrap(), 16).unwrap();
        assert_eq!(n.len(), 4);
        assert!(n.weights.iter().all(|&w| w == 0.25));
    }

    #[test]
    fn exhaustive_bound_is_enforced() {
        let spec = BinomialSpec::new(
            DriftKind::Martingale,
            1.0,
            10.0,
            10,
            StepRule::Additive { drift: 0.0, spread: 0.05 },
        );
        let l = binomial(&spec).unwrap();
        assert!(matches!(
            PathEnsemble::exhaustive(&l, 100),
            Err(SwingError::TooManyPaths { .. })
        ));
    }

    #[test]
    fn sampling_is_deterministic() {
        let l = binary_example(12).unwrap();
        let a = PathEnsemble::sample(&l, 50, 7).unwrap();
        let b = PathEnsemble::sample(&l, 50, 7).unwrap();
        assert_eq!(a, b);
        assert!(PathEnsemble::sample(&l, 0, 7).is_err());
    }

    #[test]
    fn history_tree_matches_paths() {
        let l = binary_example(6).unwrap();
        let t = HistoryTree::from_lattice(&l, 1000).unwrap();
        assert_eq!(t.at_time(6).len(), 2);
        let leaf = t.at_time(6)[1];
        assert_eq!(t.lattice_path(leaf), vec![0, 0, 1, 1, 1, 1, 1]);
        assert_eq!(t.ancestor(leaf, 0), 0);
    }
}
