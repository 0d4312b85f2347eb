use super::grid::TimeGrid;
use crate::error::{Result, SwingError};

/// Tolerance on the sum of one-step transition probabilities.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub child: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub cashflow: f64,
    pub transitions: Vec<Transition>,
}

impl Node {
    pub fn new(cashflow: f64, transitions: Vec<Transition>) -> Self {
        Self { cashflow, transitions }
    }

    pub fn terminal(cashflow: f64) -> Self {
        Self { cashflow, transitions: Vec::new() }
    }
}

/// Finite scenario tree for the cashflow process.
///
/// Slice `k` holds the nodes alive at `t_k`; each non-terminal node carries
/// its one-step transitions into slice `k + 1`. The cashflow is read as a
/// right-continuous step function, constant on `[t_k, t_{k+1})`. Slice 0 has
/// a single root, so the initial information is trivial.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioLattice {
    grid: TimeGrid,
    slices: Vec<Vec<Node>>,
    lce_declared: bool,
    p_exponent: f64,
}

impl ScenarioLattice {
    pub fn new(
        grid: TimeGrid,
        slices: Vec<Vec<Node>>,
        lce_declared: bool,
        p_exponent: f64,
    ) -> Result<Self> {
        let invalid = |m: String| Err(SwingError::InvalidModel(m));
        let k_max = grid.steps();
        if slices.len() != k_max + 1 {
            return invalid(format!(
                "expected {} time slices, got {}",
                k_max + 1,
                slices.len()
            ));
        }
        if slices[0].len() != 1 {
            return invalid(format!("slice 0 must hold one root node, got {}", slices[0].len()));
        }
        if !(p_exponent > 1.0) {
            return invalid(format!("integrability exponent must exceed 1, got {p_exponent}"));
        }
        for (k, slice) in slices.iter().enumerate() {
            if slice.is_empty() {
                return invalid(format!("slice {k} is empty"));
            }
            let mut reached = vec![false; slices.get(k + 1).map_or(0, Vec::len)];
            for (n, node) in slice.iter().enumerate() {
                if !(node.cashflow.is_finite() && node.cashflow >= 0.0) {
                    return invalid(format!(
                        "cashflow at (k={k}, node={n}) must be finite and nonnegative, got {}",
                        node.cashflow
                    ));
                }
                if k == k_max {
                    if !node.transitions.is_empty() {
                        return invalid(format!("terminal node {n} has transitions"));
                    }
                    continue;
                }
                if node.transitions.is_empty() {
                    return invalid(format!("node (k={k}, node={n}) has no transitions"));
                }
                let mut total = 0.0;
                for tr in &node.transitions {
                    if tr.child >= reached.len() {
                        return invalid(format!(
                            "node (k={k}, node={n}) points at missing child {}",
                            tr.child
                        ));
                    }
                    if !(tr.prob.is_finite() && tr.prob >= 0.0) {
                        return invalid(format!(
                            "negative or non-finite probability at (k={k}, node={n})"
                        ));
                    }
                    if tr.prob > 0.0 {
                        reached[tr.child] = true;
                    }
                    total += tr.prob;
                }
                if (total - 1.0).abs() > PROB_TOL {
                    return invalid(format!(
                        "transition probabilities at (k={k}, node={n}) sum to {total}"
                    ));
                }
            }
            if let Some(n) = reached.iter().position(|r| !r) {
                return invalid(format!("node {n} at slice {} is unreachable", k + 1));
            }
        }
        Ok(Self { grid, slices, lce_declared, p_exponent })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    pub fn lce_declared(&self) -> bool {
        self.lce_declared
    }

    pub fn p_exponent(&self) -> f64 {
        self.p_exponent
    }

    pub fn slice(&self, k: usize) -> &[Node] {
        &self.slices[k]
    }

    pub fn node(&self, k: usize, n: usize) -> &Node {
        &self.slices[k][n]
    }

    pub fn node_count(&self, k: usize) -> usize {
        self.slices[k].len()
    }

    pub fn total_nodes(&self) -> usize {
        self.slices.iter().map(Vec::len).sum()
    }

    pub fn cashflow(&self, k: usize, n: usize) -> f64 {
        self.slices[k][n].cashflow
    }

    pub fn transitions(&self, k: usize, n: usize) -> &[Transition] {
        &self.slices[k][n].transitions
    }

    /// One-step conditional expectation `E[f(child) | node]`.
    pub fn conditional<F: Fn(usize) -> f64>(&self, k: usize, n: usize, f: F) -> f64 {
        self.slices[k][n]
            .transitions
            .iter()
            .map(|tr| tr.prob * f(tr.child))
            .sum()
    }

    /// Unconditional probability of every node.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.slices.len());
        out.push(vec![1.0]);
        for k in 0..self.steps() {
            let mut next = vec![0.0; self.node_count(k + 1)];
            for (n, node) in self.slices[k].iter().enumerate() {
                for tr in &node.transitions {
                    next[tr.child] += out[k][n] * tr.prob;
                }
            }
            out.push(next);
        }
        out
    }

    /// Unconditional mean of the cashflow at `t_k`.
    pub fn mean_cashflow(&self, k: usize) -> f64 {
        let m = self.marginals();
        self.slices[k]
            .iter()
            .zip(&m[k])
            .map(|(node, p)| node.cashflow * p)
            .sum()
    }

    pub fn max_cashflow(&self) -> f64 {
        self.slices
            .iter()
            .flatten()
            .map(|n| n.cashflow)
            .fold(0.0, f64::max)
    }

    /// `S[k][n] = E[sum_{m=k}^{K-1} X(t_m) | node]`, the expected left-point sum of
    /// the remaining cashflows.
    pub fn remaining_sums(&self) -> Vec<Vec<f64>> {
        let k_max = self.steps();
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); k_max + 1];
        out[k_max] = vec![0.0; self.node_count(k_max)];
        for k in (0..k_max).rev() {
            let next = &out[k + 1];
            out[k] = (0..self.node_count(k))
                .map(|n| self.cashflow(k, n) + self.conditional(k, n, |c| next[c]))
                .collect();
        }
        out
    }

    /// Number of root-to-terminal paths, saturating at `u128::MAX`.
    pub fn path_count(&self) -> u128 {
        let k_max = self.steps();
        let mut counts = vec![1u128; self.node_count(k_max)];
        for k in (0..k_max).rev() {
            counts = self.slices[k]
                .iter()
                .map(|node| {
                    node.transitions
                        .iter()
                        .fold(0u128, |acc, tr| acc.saturating_add(counts[tr.child]))
                })
                .collect();
        }
        counts[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step() -> ScenarioLattice {
        let grid = TimeGrid::new(2.0, 2).unwrap();
        let half = |c| Transition { child: c, prob: 0.5 };
        ScenarioLattice::new(
            grid,
            vec![
                vec![Node::new(1.0, vec![half(0), half(1)])],
                vec![Node::new(2.0, vec![half(0), half(1)]), Node::new(0.0, vec![half(1), half(2)])],
                vec![Node::terminal(4.0), Node::terminal(1.0), Node::terminal(0.0)],
            ],
            true,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn marginals_and_sums() {
        let l = two_step();
        let m = l.marginals();
        assert_eq!(m[2], vec![0.25, 0.5, 0.25]);
        assert_eq!(l.path_count(), 4);
        assert_eq!(l.remaining_sums()[0][0], 2.0);
        assert_eq!(l.max_cashflow(), 4.0);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let bad = ScenarioLattice::new(
            grid,
            vec![
                vec![Node::new(1.0, vec![Transition { child: 0, prob: 0.7 }])],
                vec![Node::terminal(1.0)],
            ],
            true,
            2.0,
        );
        assert!(matches!(bad, Err(SwingError::InvalidModel(_))));
    }

    #[test]
    fn rejects_negative_cashflow_and_unreachable_nodes() {
        let grid = TimeGrid::new(1.0, 1).unwrap();
        let one = vec![Transition { child: 0, prob: 1.0 }];
        assert!(ScenarioLattice::new(
            grid,
            vec![vec![Node::new(-1.0, one.clone())], vec![Node::terminal(1.0)]],
            true,
            2.0
        )
        .is_err());
        assert!(ScenarioLattice::new(
            grid,
            vec![vec![Node::new(1.0, one)], vec![Node::terminal(1.0), Node::terminal(2.0)]],
            true,
            2.0
        )
        .is_err());
    }
}
