//! Constructors for the shipped cashflow models.

use super::grid::TimeGrid;
use super::lattice::{Node, ScenarioLattice, Transition};
use crate::error::{Result, SwingError};

/// Default integrability exponent recorded on built-in models.
pub const DEFAULT_P_EXPONENT: f64 = 2.0;

/// Horizon of the binary example.
pub const BINARY_HORIZON: f64 = 3.0;

/// Node index of the `xi = +1` branch from `t = 1` on.
pub const BINARY_UP: usize = 0;
/// Node index of the `xi = -1` branch from `t = 1` on.
pub const BINARY_DOWN: usize = 1;

/// The two-branch example `X(t) = 1 + xi (2 - t) 1_[1,3](t)` on `[0, 3]` with a fair
/// coin `xi`, revealed at the grid node `t = 1`.
///
/// `steps` must be divisible by 6 so that `t = 1`, `1.5` and `2.5` are grid times.
pub fn binary_example(steps: usize) -> Result<ScenarioLattice> {
    if steps == 0 || !steps.is_multiple_of(6) {
        return Err(SwingError::InvalidModel(format!(
            "binary example needs a step count divisible by 6, got {steps}"
        )));
    }
    let grid = TimeGrid::new(BINARY_HORIZON, steps)?;
    let reveal = steps / 3;
    let mut slices = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = grid.time(k);
        let last = k == steps;
        if k < reveal {
            let transitions = if k + 1 == reveal {
                vec![
                    Transition { child: BINARY_UP, prob: 0.5 },
                    Transition { child: BINARY_DOWN, prob: 0.5 },
                ]
            } else {
                vec![Transition { child: 0, prob: 1.0 }]
            };
            slices.push(vec![Node::new(1.0, transitions)]);
        } else {
            let stay = |c| {
                if last {
                    Vec::new()
                } else {
                    vec![Transition { child: c, prob: 1.0 }]
                }
            };
            slices.push(vec![
                Node::new(1.0 + (2.0 - t), stay(BINARY_UP)),
                Node::new(1.0 - (2.0 - t), stay(BINARY_DOWN)),
            ]);
        }
    }
    ScenarioLattice::new(grid, slices, true, DEFAULT_P_EXPONENT)
}

/// Deterministic cashflow `X == c`.
pub fn constant(c: f64, horizon: f64, steps: usize) -> Result<ScenarioLattice> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(SwingError::InvalidModel(format!(
            "constant cashflow must be nonnegative, got {c}"
        )));
    }
    let grid = TimeGrid::new(horizon, steps)?;
    let slices = (0..=steps)
        .map(|k| {
            let tr = if k == steps {
                Vec::new()
            } else {
                vec![Transition { child: 0, prob: 1.0 }]
            };
            vec![Node::new(c, tr)]
        })
        .collect();
    ScenarioLattice::new(grid, slices, true, DEFAULT_P_EXPONENT)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftKind {
    Martingale,
    Submartingale,
    Supermartingale,
}

/// One-step move of a binomial model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `X -> X + drift +/- spread` with probability 1/2 each.
    Additive { drift: f64, spread: f64 },
    /// `X -> X * up` with probability `prob_up`, else `X * down`.
    Multiplicative { up: f64, down: f64, prob_up: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinomialSpec {
    pub kind: DriftKind,
    pub x0: f64,
    pub horizon: f64,
    pub steps: usize,
    pub step: StepRule,
    pub recombining: bool,
    pub lce_declared: bool,
}

impl BinomialSpec {
    pub fn new(kind: DriftKind, x0: f64, horizon: f64, steps: usize, step: StepRule) -> Self {
        Self { kind, x0, horizon, steps, step, recombining: true, lce_declared: true }
    }

    pub fn non_recombining(mut self) -> Self {
        self.recombining = false;
        self
    }

    /// Multiplicative step with `dt`-scaled drift `mu` and volatility `sigma`: factors
    /// `1 + mu dt +/- sigma sqrt(dt)` with equal probabilities.
    pub fn scaled(kind: DriftKind, x0: f64, horizon: f64, steps: usize, mu: f64, sigma: f64) -> Self {
        let dt = horizon / steps as f64;
        let base = 1.0 + mu * dt;
        let spread = sigma * dt.sqrt();
        Self::new(
            kind,
            x0,
            horizon,
            steps,
            StepRule::Multiplicative { up: base + spread, down: base - spread, prob_up: 0.5 },
        )
    }
}

/// Binomial lattice for a martingale, sub- or supermartingale cashflow.
///
/// The drift sign must match `kind`, and every node must carry a nonnegative
/// cashflow: parameterisations that would need clipping at zero are rejected.
pub fn binomial(spec: &BinomialSpec) -> Result<ScenarioLattice> {
    let invalid = |m: String| Err(SwingError::InvalidModel(m));
    if !(spec.x0.is_finite() && spec.x0 >= 0.0) {
        return invalid(format!("x0 must be nonnegative, got {}", spec.x0));
    }
    let (prob_up, mean_move) = match spec.step {
        StepRule::Additive { drift, spread } => {
            if !(spread.is_finite() && spread >= 0.0 && drift.is_finite()) {
                return invalid("additive spread must be nonnegative".into());
            }
            (0.5, drift)
        }
        StepRule::Multiplicative { up, down, prob_up } => {
            if !(up.is_finite() && down.is_finite() && up >= 0.0 && down >= 0.0) {
                return invalid("multiplicative factors must be nonnegative".into());
            }
            if !(prob_up > 0.0 && prob_up < 1.0) {
                return invalid(format!("prob_up must lie in (0,1), got {prob_up}"));
            }
            // sign of the drift of X relative to its current (nonnegative) level
            (prob_up, prob_up * up + (1.0 - prob_up) * down - 1.0)
        }
    };
    let drift_ok = match spec.kind {
        DriftKind::Martingale => mean_move.abs() <= 1e-12,
        DriftKind::Submartingale => mean_move > 0.0,
        DriftKind::Supermartingale => mean_move < 0.0,
    };
    if !drift_ok {
        return invalid(format!(
            "step rule drift {mean_move} is inconsistent with {:?}",
            spec.kind
        ));
    }
    let grid = TimeGrid::new(spec.horizon, spec.steps)?;
    let value = |k: usize, ups: usize| -> f64 {
        match spec.step {
            StepRule::Additive { drift, spread } => {
                spec.x0 + k as f64 * drift + (2.0 * ups as f64 - k as f64) * spread
            }
            StepRule::Multiplicative { up, down, .. } => {
                spec.x0 * up.powi(ups as i32) * down.powi((k - ups) as i32)
            }
        }
    };
    let k_max = spec.steps;
    let mut slices = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let width = if spec.recombining {
            k + 1
        } else {
            if k >= 63 {
                return invalid("non-recombining binomial limited to 62 steps".into());
            }
            1usize << k
        };
        let mut slice = Vec::with_capacity(width);
        for n in 0..width {
            // in the non-recombining tree the up move appends a set bit
            let ups = if spec.recombining { n } else { n.count_ones() as usize };
            let x = value(k, ups);
            if !(x >= 0.0) {
                return invalid(format!(
                    "parameters produce a negative cashflow {x} at (k={k}, node={n})"
                ));
            }
            let transitions = if k == k_max {
                Vec::new()
            } else if spec.recombining {
                vec![
                    Transition { child: n, prob: 1.0 - prob_up },
                    Transition { child: n + 1, prob: prob_up },
                ]
            } else {
                vec![
                    Transition { child: 2 * n, prob: 1.0 - prob_up },
                    Transition { child: 2 * n + 1, prob: prob_up },
                ]
            };
            slice.push(Node::new(x, transitions));
        }
        slices.push(slice);
    }
    ScenarioLattice::new(grid, slices, spec.lce_declared, DEFAULT_P_EXPONENT)
}
