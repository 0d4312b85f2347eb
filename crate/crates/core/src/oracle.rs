//! Independent ground truth: exhaustive enumeration of bang-bang decision
//! tables on tiny lattices, and closed-form values for special cashflows.

use crate::error::{Result, SwingError};
use crate::model::ScenarioLattice;
use crate::value::VolumeGrid;

/// Default cap on the number of enumerated policies (as a power of two).
pub const DEFAULT_CAP_LOG2: u32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub best: f64,
    /// Optimal decision table: `(k, node, level, exercise)` per decision point.
    pub policy: Vec<(usize, usize, usize, bool)>,
    pub examined: u64,
}

struct State {
    k: usize,
    node: usize,
    level: usize,
    reward: f64,
    decision: Option<usize>,
    stay: Vec<(usize, f64)>,
    exercise: Vec<(usize, f64)>,
}

/// Maximises the expected reward over every adapted map
/// `(k, node, level) -> {0, L}` reachable from the start state.
pub fn brute_force_value(
    lattice: &ScenarioLattice,
    volume: &VolumeGrid,
    start: (usize, usize, usize),
    cap_log2: u32,
) -> Result<EnumerationResult> {
    let (k0, n0, i0) = start;
    let k_max = lattice.steps();
    let cap = volume.cap();
    let h = volume.pitch();
    if k0 > k_max || n0 >= lattice.node_count(k0) || i0 > cap {
        return Err(SwingError::InvalidModel("start state outside the lattice".into()));
    }
    // reachable (node, level) per time, indexed into `states`
    let mut index: Vec<Vec<Vec<Option<usize>>>> = (0..=k_max)
        .map(|k| vec![vec![None; cap + 1]; lattice.node_count(k)])
        .collect();
    let mut layers: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k_max + 1];
    layers[k0].push((n0, i0));
    let mut nodes_at = vec![n0];
    for k in k0..k_max {
        let mut next = vec![false; lattice.node_count(k + 1)];
        for &n in &nodes_at {
            for tr in lattice.transitions(k, n) {
                next[tr.child] = true;
            }
        }
        nodes_at = (0..next.len()).filter(|&c| next[c]).collect();
        let hi = (i0 + (k + 1 - k0)).min(cap);
        for &n in &nodes_at {
            for i in i0..=hi {
                layers[k + 1].push((n, i));
            }
        }
    }
    let mut states: Vec<State> = Vec::new();
    let mut decision_points = 0usize;
    for k in (k0..=k_max).rev() {
        for &(n, i) in &layers[k] {
            let id = states.len();
            index[k][n][i] = Some(id);
            let mut st = State {
                k,
                node: n,
                level: i,
                reward: h * lattice.cashflow(k, n),
                decision: None,
                stay: Vec::new(),
                exercise: Vec::new(),
            };
            if k < k_max {
                for tr in lattice.transitions(k, n) {
                    st.stay.push((index[k + 1][tr.child][i].expect("reachable"), tr.prob));
                    if i < cap {
                        st.exercise
                            .push((index[k + 1][tr.child][i + 1].expect("reachable"), tr.prob));
                    }
                }
                if i < cap {
                    st.decision = Some(decision_points);
                    decision_points += 1;
                }
            }
            states.push(st);
        }
    }
    if decision_points > cap_log2 as usize {
        return Err(SwingError::EnumerationCap { decision_points, cap_log2 });
    }
    let root = index[k0][n0][i0].expect("start is reachable");
    let mut value = vec![0.0; states.len()];
    let mut best = f64::NEG_INFINITY;
    let mut best_mask = 0u64;
    let total = 1u64 << decision_points;
    for mask in 0..total {
        // states are stored children-first, so one forward sweep evaluates the table
        for (id, st) in states.iter().enumerate() {
            value[id] = match st.decision {
                None if st.k == k_max => 0.0,
                None => st.stay.iter().map(|&(c, p)| p * value[c]).sum(),
                Some(bit) if mask >> bit & 1 == 1 => {
                    st.reward + st.exercise.iter().map(|&(c, p)| p * value[c]).sum::<f64>()
                }
                Some(_) => st.stay.iter().map(|&(c, p)| p * value[c]).sum(),
            };
        }
        if value[root] > best {
            best = value[root];
            best_mask = mask;
        }
    }
    let policy = states
        .iter()
        .filter_map(|st| {
            st.decision
                .map(|bit| (st.k, st.node, st.level, best_mask >> bit & 1 == 1))
        })
        .collect();
    Ok(EnumerationResult { best, policy, examined: total })
}

/// Closed-form values `J(t, y)` for special cashflow classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    /// `X == c`: `J = c * min(1 - y, L (T - t))`, clipped at zero volume.
    Constant { c: f64, rate: f64, horizon: f64 },
    /// The two-branch example: `J = 2 - (1 + y)^2 / 2` on `t, y in [0, 1]`.
    BinaryExample,
}

impl ClosedForm {
    pub fn value(&self, t: f64, y: f64) -> Result<f64> {
        match *self {
            ClosedForm::Constant { c, rate, horizon } => {
                if !(0.0..=horizon).contains(&t) || y > 1.0 {
                    return Err(SwingError::OutOfRegion(format!("(t={t}, y={y})")));
                }
                Ok(c * (1.0 - y).min(rate * (horizon - t)))
            }
            ClosedForm::BinaryExample => {
                if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&y) {
                    return Err(SwingError::OutOfRegion(format!("(t={t}, y={y})")));
                }
                Ok(2.0 - (1.0 + y) * (1.0 + y) / 2.0)
            }
        }
    }
}

/// Deterministic exercise window of a sub- or supermartingale cashflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Exercise at full rate on the last `(1 - y)/L` of the horizon (submartingales).
    Late,
    /// Exercise at full rate right away (supermartingales).
    Early,
}

impl Window {
    /// Exercised step range `[first, last)` from `(k, level)`.
    pub fn steps(&self, volume: &VolumeGrid, k_max: usize, k: usize, level: usize) -> (usize, usize) {
        let remaining = volume.cap() - level;
        match self {
            Window::Late => (k.max(k_max.saturating_sub(remaining)), k_max),
            Window::Early => (k, (k + remaining).min(k_max)),
        }
    }
}

/// Checks the sub- (`Late`) or super- (`Early`) martingale property node by node.
pub fn check_window_region(lattice: &ScenarioLattice, window: Window) -> Result<()> {
    for k in 0..lattice.steps() {
        for n in 0..lattice.node_count(k) {
            let drift = lattice.conditional(k, n, |c| lattice.cashflow(k + 1, c)) - lattice.cashflow(k, n);
            let ok = match window {
                Window::Late => drift >= -1e-12,
                Window::Early => drift <= 1e-12,
            };
            if !ok {
                return Err(SwingError::OutOfRegion(format!(
                    "{window:?} window needs a {} cashflow; drift {drift} at (k={k}, node={n})",
                    if window == Window::Late { "submartingale" } else { "supermartingale" }
                )));
            }
        }
    }
    Ok(())
}

/// `E[sum_{m in window} L dt X(t_m) | node]` by exact summation over the lattice.
pub fn window_value(
    lattice: &ScenarioLattice,
    volume: &VolumeGrid,
    window: Window,
    (k, n, level): (usize, usize, usize),
) -> Result<f64> {
    check_window_region(lattice, window)?;
    let (first, last) = window.steps(volume, lattice.steps(), k, level);
    let mut dist = vec![0.0; lattice.node_count(k)];
    dist[n] = 1.0;
    let mut total = 0.0;
    for m in k..last {
        if m >= first {
            total += dist
                .iter()
                .enumerate()
                .map(|(c, p)| p * lattice.cashflow(m, c))
                .sum::<f64>();
        }
        let mut next = vec![0.0; lattice.node_count(m + 1)];
        for (c, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for tr in lattice.transitions(m, c) {
                next[tr.child] += p * tr.prob;
            }
        }
        dist = next;
    }
    Ok(volume.pitch() * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{binomial, constant, BinomialSpec, DriftKind, StepRule};

    #[test]
    fn enumeration_on_tiny_models() {
        let mart = binomial(&BinomialSpec::new(
            DriftKind::Martingale,
            1.0,
            2.0,
            2,
            StepRule::Multiplicative { up: 2.0, down: 0.0, prob_up: 0.5 },
        ))
        .unwrap();
        let vol = VolumeGrid::new(mart.grid(), 1.0).unwrap();
        let r = brute_force_value(&mart, &vol, (0, 0, vol.index_of(0.0).unwrap()), 20).unwrap();
        assert_eq!(r.best, 1.0);
        assert_eq!(r.examined, 1 << r.policy.len());

        // E[X(t_1)] = 2 > X(0) = 1 and one step of volume: waiting wins
        let sub = binomial(&BinomialSpec::new(
            DriftKind::Submartingale,
            1.0,
            2.0,
            2,
            StepRule::Additive { drift: 1.0, spread: 0.5 },
        ))
        .unwrap();
        let vol = VolumeGrid::new(sub.grid(), 1.0).unwrap();
        let r = brute_force_value(&sub, &vol, (0, 0, vol.index_of(0.0).unwrap()), 20).unwrap();
        assert_eq!(r.best, 2.0);

        let c = constant(1.0, 3.0, 3).unwrap();
        let vol = VolumeGrid::new(c.grid(), 1.0 / 3.0).unwrap();
        let r = brute_force_value(&c, &vol, (0, 0, vol.index_of(0.0).unwrap()), 20).unwrap();
        assert!((r.best - 1.0).abs() < 1e-15);
    }

    #[test]
    fn enumeration_cap() {
        let c = constant(1.0, 12.0, 12).unwrap();
        let vol = VolumeGrid::new(c.grid(), 1.0 / 6.0).unwrap();
        let err = brute_force_value(&c, &vol, (0, 0, vol.index_of(0.0).unwrap()), 10);
        assert!(matches!(err, Err(SwingError::EnumerationCap { .. })));
    }

    #[test]
    fn closed_forms() {
        assert_eq!(ClosedForm::BinaryExample.value(0.0, 0.5).unwrap(), 0.875);
        assert_eq!(ClosedForm::BinaryExample.value(0.0, 1.0).unwrap(), 0.0);
        assert!(ClosedForm::BinaryExample.value(2.0, 0.5).is_err());
        let c = ClosedForm::Constant { c: 1.0, rate: 1.0, horizon: 3.0 };
        assert_eq!(c.value(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(c.value(2.5, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn window_region_is_checked() {
        let sup = binomial(&BinomialSpec::scaled(DriftKind::Supermartingale, 1.0, 3.0, 6, -0.2, 0.3)).unwrap();
        let vol = VolumeGrid::new(sup.grid(), 1.0).unwrap();
        assert!(window_value(&sup, &vol, Window::Late, (0, 0, 0)).is_err());
        assert!(window_value(&sup, &vol, Window::Early, (0, 0, 0)).is_ok());
    }
}
