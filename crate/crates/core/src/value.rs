//! Backward induction for the value field `J(t_k, node, y_j)` of the swing
//! problem and its one-sided volume derivatives.
//!
//! The volume grid has pitch `L * dt`, so one full-rate step moves the spent
//! volume by exactly one level. The one-step reward is linear in the rate,
//! hence the maximum over `[0, L]` is attained at `0` or `L` and the backward
//! recursion only compares "stay" with "exercise at full rate".

use crate::error::{Result, SwingError};
use crate::model::{ScenarioLattice, TimeGrid};
use crate::table::{fmt_num, Table};

/// Absolute tolerance for identities that hold exactly on the lattice.
pub const EXACT_TOL: f64 = 1e-10;

/// Volume levels `y_j = j * L * dt`, from `min(0, 1 - L T)` up to `1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeGrid {
    rate: f64,
    steps: usize,
    per_unit: usize,
    lowest: i64,
}

impl VolumeGrid {
    pub fn new(grid: &TimeGrid, rate: f64) -> Result<Self> {
        let per_unit = grid.volume_steps(rate)?;
        let lowest = (per_unit as i64 - grid.steps() as i64).min(0);
        Ok(Self { rate, steps: grid.steps(), per_unit, lowest })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Volume spent by one full-rate step, `L * dt = 1 / per_unit`.
    pub fn pitch(&self) -> f64 {
        1.0 / self.per_unit as f64
    }

    /// Number of full-rate steps in one unit of volume.
    pub fn per_unit(&self) -> usize {
        self.per_unit
    }

    pub fn len(&self) -> usize {
        (self.per_unit as i64 - self.lowest + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the level `y = 1`.
    pub fn cap(&self) -> usize {
        self.len() - 1
    }

    pub fn level(&self, i: usize) -> f64 {
        (i as i64 + self.lowest) as f64 / self.per_unit as f64
    }

    /// Index of the level `1 - L(T - t_k)`; at and below it exercising at full
    /// rate until maturity is feasible and optimal.
    pub fn boundary(&self, k: usize) -> usize {
        (self.per_unit as i64 - (self.steps - k) as i64 - self.lowest) as usize
    }

    pub fn index_of(&self, y: f64) -> Result<usize> {
        let x = y * self.per_unit as f64 - self.lowest as f64;
        let i = x.round();
        if !(i >= 0.0 && i <= self.cap() as f64) || (x - i).abs() > 1e-9 {
            return Err(SwingError::OffGrid { volume: y, pitch: self.pitch() });
        }
        Ok(i as usize)
    }

    /// Interior of the active band at `t_k`: strictly between the full-rate
    /// boundary and the cap.
    pub fn is_interior(&self, k: usize, i: usize) -> bool {
        i > self.boundary(k) && i < self.cap()
    }
}

/// Solved value field, indexed `[k][node][level]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueField {
    grid: TimeGrid,
    volume: VolumeGrid,
    values: Vec<Vec<Vec<f64>>>,
}

impl ValueField {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn volume(&self) -> &VolumeGrid {
        &self.volume
    }

    pub fn value(&self, k: usize, n: usize, i: usize) -> f64 {
        self.values[k][n][i]
    }

    pub fn levels(&self, k: usize, n: usize) -> &[f64] {
        &self.values[k][n]
    }

    /// `J(t, y)` at the root and grid point `(t, y)`; for `t > 0` the node must be given.
    pub fn at(&self, k: usize, n: usize, y: f64) -> Result<f64> {
        Ok(self.values[k][n][self.volume.index_of(y)?])
    }

    /// Checks terminal/cap boundary values, concavity, monotonicity and the
    /// Lipschitz bound. Returns the first violation found.
    pub fn check_invariants(&self, lattice: &ScenarioLattice) -> Result<()> {
        let cap = self.volume.cap();
        let lip = LipschitzDiagnostic::compute(lattice);
        let pitch = self.volume.pitch();
        let fail = |m: String| Err(SwingError::Invariant(m));
        for (k, slice) in self.values.iter().enumerate() {
            for (n, j) in slice.iter().enumerate() {
                if j[cap] != 0.0 {
                    return fail(format!("J(k={k}, node={n}, y=1) = {} != 0", j[cap]));
                }
                if k == self.grid.steps() && j.iter().any(|&v| v != 0.0) {
                    return fail(format!("terminal value at node {n} is not zero"));
                }
                for i in 0..cap {
                    let step = j[i + 1] - j[i];
                    if step > EXACT_TOL {
                        return fail(format!("J increases in y at (k={k}, node={n}, i={i})"));
                    }
                    if step.abs() > lip.z[k][n] * pitch + EXACT_TOL {
                        return fail(format!(
                            "Lipschitz bound fails at (k={k}, node={n}, i={i}): {} > {}",
                            step.abs() / pitch,
                            lip.z[k][n]
                        ));
                    }
                    if i > 0 && j[i + 1] - 2.0 * j[i] + j[i - 1] > EXACT_TOL {
                        return fail(format!("J not concave at (k={k}, node={n}, i={i})"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Tabular export: `t_k node y_j J Dminus Dplus`, one line per grid cell.
    pub fn export(&self, derivatives: &DerivativeField) -> Table {
        let mut t = Table::new(&VALUE_COLUMNS);
        for (k, slice) in self.values.iter().enumerate() {
            for (n, levels) in slice.iter().enumerate() {
                for (i, &v) in levels.iter().enumerate() {
                    t.push(vec![
                        fmt_num(self.grid.time(k)),
                        n.to_string(),
                        fmt_num(self.volume.level(i)),
                        fmt_num(v),
                        fmt_num(derivatives.dminus[k][n][i]),
                        fmt_num(derivatives.dplus[k][n][i]),
                    ]);
                }
            }
        }
        t
    }
}

pub const VALUE_COLUMNS: [&str; 6] = ["t_k", "node", "y_j", "J", "Dminus", "Dplus"];

/// Backward induction over `(time, node, volume level)`.
///
/// Ties between staying and exercising are resolved towards exercising,
/// which produces the saturating optimal control. Structural invariants are
/// checked before the field is returned.
pub fn solve(lattice: &ScenarioLattice, volume: &VolumeGrid) -> Result<ValueField> {
    let grid = *lattice.grid();
    if VolumeGrid::new(&grid, volume.rate())? != *volume {
        return Err(SwingError::InvalidModel(
            "volume grid was built for a different time grid".into(),
        ));
    }
    let k_max = grid.steps();
    let cap = volume.cap();
    let h = volume.pitch();
    let mut values: Vec<Vec<Vec<f64>>> = vec![Vec::new(); k_max + 1];
    values[k_max] = vec![vec![0.0; volume.len()]; lattice.node_count(k_max)];
    let mut cont = vec![0.0; volume.len()];
    for k in (0..k_max).rev() {
        let (head, tail) = values.split_at_mut(k + 1);
        let next = &tail[0];
        head[k] = (0..lattice.node_count(k))
            .map(|n| {
                cont.iter_mut().for_each(|c| *c = 0.0);
                for tr in lattice.transitions(k, n) {
                    for (c, v) in cont.iter_mut().zip(&next[tr.child]) {
                        *c += tr.prob * v;
                    }
                }
                let reward = h * lattice.cashflow(k, n);
                (0..volume.len())
                    .map(|i| {
                        if i == cap {
                            return cont[i];
                        }
                        let exercise = reward + cont[i + 1];
                        if exercise >= cont[i] {
                            exercise
                        } else {
                            cont[i]
                        }
                    })
                    .collect()
            })
            .collect();
    }
    let field = ValueField { grid, volume: *volume, values };
    field.check_invariants(lattice)?;
    Ok(field)
}

/// One-sided difference quotients of `J` in `y`.
///
/// Below the lowest level `J` is extended as a constant, so `Dminus = 0`
/// there; at `y = 1` the right quotient is undefined and `Dplus` repeats `Dminus`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeField {
    pub dminus: Vec<Vec<Vec<f64>>>,
    pub dplus: Vec<Vec<Vec<f64>>>,
}

impl DerivativeField {
    /// `Dminus - Dplus >= 0`, the discrete kink size.
    pub fn gap(&self, k: usize, n: usize, i: usize) -> f64 {
        self.dminus[k][n][i] - self.dplus[k][n][i]
    }

    /// Mean kink size over interior cells `k < K`, nodes weighted by their
    /// probability and levels uniformly.
    pub fn mean_interior_gap(&self, field: &ValueField, lattice: &ScenarioLattice) -> f64 {
        let vol = field.volume();
        let marginals = lattice.marginals();
        let (mut sum, mut weight) = (0.0, 0.0);
        for k in 0..field.grid().steps() {
            for (n, &p) in marginals[k].iter().enumerate() {
                for i in 0..vol.len() {
                    if vol.is_interior(k, i) {
                        sum += p * self.gap(k, n, i);
                        weight += p;
                    }
                }
            }
        }
        if weight == 0.0 {
            0.0
        } else {
            sum / weight
        }
    }
}

pub fn derivatives(field: &ValueField) -> DerivativeField {
    let h = field.volume.pitch();
    let cap = field.volume.cap();
    let mut dminus = Vec::with_capacity(field.values.len());
    let mut dplus = Vec::with_capacity(field.values.len());
    for slice in &field.values {
        let mut dm_slice = Vec::with_capacity(slice.len());
        let mut dp_slice = Vec::with_capacity(slice.len());
        for j in slice {
            let dm: Vec<f64> = (0..j.len())
                .map(|i| if i == 0 { 0.0 } else { (j[i] - j[i - 1]) / h })
                .collect();
            let dp: Vec<f64> = (0..j.len())
                .map(|i| if i == cap { dm[i] } else { (j[i + 1] - j[i]) / h })
                .collect();
            dm_slice.push(dm);
            dp_slice.push(dp);
        }
        dminus.push(dm_slice);
        dplus.push(dp_slice);
    }
    DerivativeField { dminus, dplus }
}

/// Which time slice supplies the derivative inside the positive part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeTiming {
    /// Derivative of the solved field at the same step `k`.
    #[default]
    Implicit,
    /// Conditional expectation of the step-`k+1` derivative.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTable {
    pub residual: Vec<Vec<Vec<f64>>>,
    /// Max |r| over `k < K`, excluding the full-rate boundary level.
    pub max_abs: f64,
}

/// One-step residual of the discrete BSPDE
/// `J = L dt (X + D_y^- J)_+ + E[J(t_{k+1}) | node]`.
pub fn bspde_residual(
    field: &ValueField,
    derivs: &DerivativeField,
    lattice: &ScenarioLattice,
    timing: DerivativeTiming,
) -> ResidualTable {
    let vol = field.volume;
    let h = vol.pitch();
    let k_max = field.grid.steps();
    let mut residual = vec![Vec::new(); k_max + 1];
    residual[k_max] = vec![vec![0.0; vol.len()]; lattice.node_count(k_max)];
    let mut max_abs = 0.0f64;
    for k in 0..k_max {
        let next = &field.values[k + 1];
        residual[k] = (0..lattice.node_count(k))
            .map(|n| {
                let x = lattice.cashflow(k, n);
                (0..vol.len())
                    .map(|i| {
                        let cont = lattice.conditional(k, n, |c| next[c][i]);
                        let d = match timing {
                            DerivativeTiming::Implicit => derivs.dminus[k][n][i],
                            DerivativeTiming::Explicit => {
                                lattice.conditional(k, n, |c| derivs.dminus[k + 1][c][i])
                            }
                        };
                        let r = field.values[k][n][i] - (h * (x + d).max(0.0) + cont);
                        if i != vol.boundary(k) {
                            max_abs = max_abs.max(r.abs());
                        }
                        r
                    })
                    .collect()
            })
            .collect();
    }
    ResidualTable { residual, max_abs }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryViolation {
    pub k: usize,
    pub node: usize,
    pub level: usize,
    pub expected: f64,
    pub got: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryReport {
    pub checked: usize,
    pub violations: Vec<BoundaryViolation>,
}

impl BoundaryReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `J = E[sum L dt X | node]` on and below the full-rate boundary and
/// `J = 0` at `y = 1`.
pub fn boundary_check(field: &ValueField, lattice: &ScenarioLattice) -> BoundaryReport {
    let vol = field.volume;
    let h = vol.pitch();
    let sums = lattice.remaining_sums();
    let mut report = BoundaryReport::default();
    for (k, slice) in field.values.iter().enumerate() {
        for (n, j) in slice.iter().enumerate() {
            let full = h * sums[k][n];
            for i in 0..=vol.boundary(k) {
                report.checked += 1;
                if (j[i] - full).abs() > EXACT_TOL {
                    report.violations.push(BoundaryViolation {
                        k,
                        node: n,
                        level: i,
                        expected: full,
                        got: j[i],
                    });
                }
            }
            report.checked += 1;
            if j[vol.cap()] != 0.0 {
                report.violations.push(BoundaryViolation {
                    k,
                    node: n,
                    level: vol.cap(),
                    expected: 0.0,
                    got: j[vol.cap()],
                });
            }
        }
    }
    report
}

/// Dominating field for the Lipschitz constant of `J` in `y`:
/// `Z[k][n] = max(X[k][n], E[Z[k+1] | n])` with `Z[K] = X[K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzDiagnostic {
    pub z: Vec<Vec<f64>>,
    /// `max_{k, n} Z[k][n]`.
    pub constant: f64,
}

impl LipschitzDiagnostic {
    pub fn compute(lattice: &ScenarioLattice) -> Self {
        let k_max = lattice.steps();
        let mut z: Vec<Vec<f64>> = vec![Vec::new(); k_max + 1];
        z[k_max] = lattice.slice(k_max).iter().map(|n| n.cashflow).collect();
        for k in (0..k_max).rev() {
            let next = &z[k + 1];
            z[k] = (0..lattice.node_count(k))
                .map(|n| lattice.cashflow(k, n).max(lattice.conditional(k, n, |c| next[c])))
                .collect();
        }
        let constant = z.iter().flatten().copied().fold(0.0, f64::max);
        Self { z, constant }
    }
}
