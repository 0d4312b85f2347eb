//! Optimal stopping on the lattice: Snell envelopes, the reachable exercise
//! sets of a policy, constrained predictable stopping searches and the
//! Doob-Meyer split of the envelopes.

use crate::error::{Result, SwingError};
use crate::model::{HistoryTree, ScenarioLattice};
use crate::policy::PolicyField;
use crate::table::{fmt_num, Table};
use crate::value::{DerivativeField, ValueField, EXACT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Sup,
    Inf,
}

impl Direction {
    fn pick(self, a: f64, b: f64) -> f64 {
        match self {
            Direction::Sup => a.max(b),
            Direction::Inf => a.min(b),
        }
    }

    /// `a` at least as good as `b`.
    fn prefers(self, a: f64, b: f64) -> bool {
        match self {
            Direction::Sup => a >= b,
            Direction::Inf => a <= b,
        }
    }
}

/// Upper (`ystar`) and lower (`ylow`) Snell envelopes of the cashflow.
#[derive(Debug, Clone, PartialEq)]
pub struct SnellField {
    pub ystar: Vec<Vec<f64>>,
    pub ylow: Vec<Vec<f64>>,
}

pub fn snell(lattice: &ScenarioLattice) -> SnellField {
    let k_max = lattice.steps();
    let terminal: Vec<f64> = (0..lattice.node_count(k_max)).map(|n| lattice.cashflow(k_max, n)).collect();
    let mut ystar = vec![terminal.clone()];
    let mut ylow = vec![terminal];
    for k in (0..k_max).rev() {
        let (up, lo) = (&ystar[0], &ylow[0]);
        let mut s = Vec::with_capacity(lattice.node_count(k));
        let mut l = Vec::with_capacity(lattice.node_count(k));
        for n in 0..lattice.node_count(k) {
            let x = lattice.cashflow(k, n);
            s.push(x.max(lattice.conditional(k, n, |c| up[c])));
            l.push(x.min(lattice.conditional(k, n, |c| lo[c])));
        }
        ystar.insert(0, s);
        ylow.insert(0, l);
    }
    SnellField { ystar, ylow }
}

impl SnellField {
    pub fn envelope(&self, dir: Direction) -> &[Vec<f64>] {
        match dir {
            Direction::Sup => &self.ystar,
            Direction::Inf => &self.ylow,
        }
    }

    /// Dominance, super/submartingale property and terminal identity, to 1e-12.
    pub fn check_invariants(&self, lattice: &ScenarioLattice) -> Result<()> {
        const TOL: f64 = 1e-12;
        let k_max = lattice.steps();
        for k in 0..=k_max {
            for n in 0..lattice.node_count(k) {
                let x = lattice.cashflow(k, n);
                let (s, l) = (self.ystar[k][n], self.ylow[k][n]);
                let mut ok = s >= x - TOL && l <= x + TOL;
                if k == k_max {
                    ok &= s == x && l == x;
                } else {
                    ok &= s >= lattice.conditional(k, n, |c| self.ystar[k + 1][c]) - TOL;
                    ok &= l <= lattice.conditional(k, n, |c| self.ylow[k + 1][c]) + TOL;
                }
                if !ok {
                    return Err(SwingError::Invariant(format!("Snell envelope fails at (k={k}, node={n})")));
                }
            }
        }
        Ok(())
    }
}

/// Martingale increments and compensator steps of an envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct DoobMeyerParts {
    pub direction: Direction,
    /// `Y_{k+1}(child) - E[Y_{k+1} | node]`, one entry per transition.
    pub increments: Vec<Vec<Vec<f64>>>,
    /// `Y_k(node) - E[Y_{k+1} | node]`: nonnegative for the upper envelope,
    /// nonpositive for the lower one.
    pub compensator: Vec<Vec<f64>>,
}

pub fn doob_meyer(snell: &SnellField, lattice: &ScenarioLattice, dir: Direction) -> DoobMeyerParts {
    let y = snell.envelope(dir);
    let mut increments = Vec::with_capacity(lattice.steps());
    let mut compensator = Vec::with_capacity(lattice.steps());
    for k in 0..lattice.steps() {
        let mut inc = Vec::with_capacity(lattice.node_count(k));
        let mut comp = Vec::with_capacity(lattice.node_count(k));
        for n in 0..lattice.node_count(k) {
            let mean = lattice.conditional(k, n, |c| y[k + 1][c]);
            inc.push(lattice.transitions(k, n).iter().map(|tr| y[k + 1][tr.child] - mean).collect());
            comp.push(y[k][n] - mean);
        }
        increments.push(inc);
        compensator.push(comp);
    }
    DoobMeyerParts { direction: dir, increments, compensator }
}

impl DoobMeyerParts {
    /// `M` along a lattice path given by its nodes from `t_0`, with `M(0) = 0`.
    pub fn martingale_along(&self, lattice: &ScenarioLattice, path: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0];
        for k in 0..path.len() - 1 {
            let t = lattice
                .transitions(k, path[k])
                .iter()
                .position(|tr| tr.child == path[k + 1])
                .expect("path follows the lattice");
            m.push(m[k] + self.increments[k][path[k]][t]);
        }
        m
    }

    /// One-step martingale property and the sign of the compensator.
    pub fn check(&self, lattice: &ScenarioLattice) -> Result<()> {
        for (k, slice) in self.increments.iter().enumerate() {
            for (n, inc) in slice.iter().enumerate() {
                let drift: f64 = lattice.transitions(k, n).iter().zip(inc).map(|(tr, d)| tr.prob * d).sum();
                let a = self.compensator[k][n];
                let sign_ok = match self.direction {
                    Direction::Sup => a >= -1e-12,
                    Direction::Inf => a <= 1e-12,
                };
                if drift.abs() > 1e-12 || !sign_ok {
                    return Err(SwingError::Invariant(format!(
                        "Doob-Meyer split fails at (k={k}, node={n}): drift {drift}, compensator {a}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Upper,
    Lower,
}

/// Discrete exercise sets of a policy started at `(t_k0, level)`, on the
/// history tree rooted at the start node.
///
/// `t_k` is in `A` iff the rate on `[t_{k-1}, t_k)` or on `[t_k, t_{k+1})` is
/// below `L`, and in `B` iff one of them is positive; the root time is in neither.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachableSets {
    pub levels: Vec<usize>,
    pub exercise: Vec<bool>,
    pub a_set: Vec<bool>,
    pub b_set: Vec<bool>,
    /// History nodes where the volume first leaves the band, tagged with the side.
    pub exit: Vec<Option<Exit>>,
    pub m_event: bool,
}

pub fn reachable_sets(policy: &PolicyField, tree: &HistoryTree, start_level: usize) -> ReachableSets {
    let volume = policy.volume();
    let k_max = tree.steps();
    let k0 = tree.root_time();
    let cap = volume.cap();
    let len = tree.len();
    let mut levels = vec![start_level; len];
    let mut exercise = vec![false; len];
    let m_event = volume.is_interior(k0, start_level);
    let mut exit = vec![None; len];
    let mut exited = vec![!m_event; len];
    for k in k0..=k_max {
        for &h in tree.at_time(k) {
            let node = tree.node(h);
            if let Some(p) = node.parent {
                levels[h] = levels[p] + exercise[p] as usize;
                exited[h] = exited[p] || exit[p].is_some();
            }
            if k < k_max {
                exercise[h] = policy.exercises(k, node.lattice_node, levels[h]);
            }
            if !exited[h] {
                if levels[h] >= cap {
                    exit[h] = Some(Exit::Upper);
                } else if levels[h] <= volume.boundary(k) {
                    exit[h] = Some(Exit::Lower);
                }
            }
        }
    }
    let mut a_set = vec![false; len];
    let mut b_set = vec![false; len];
    for h in 0..len {
        let node = tree.node(h);
        let Some(p) = node.parent else { continue };
        let mut below = !exercise[p];
        let mut positive = exercise[p];
        if node.time < k_max {
            below |= !exercise[h];
            positive |= exercise[h];
        }
        a_set[h] = below;
        b_set[h] = positive;
    }
    ReachableSets { levels, exercise, a_set, b_set, exit, m_event }
}

impl ReachableSets {
    /// History nodes at which the exit time is attained; leaves off the band event.
    pub fn sigma_nodes(&self, tree: &HistoryTree) -> Vec<usize> {
        if !self.m_event {
            return tree.at_time(tree.steps()).to_vec();
        }
        (0..tree.len()).filter(|&h| self.exit[h].is_some()).collect()
    }

    /// `E[X(σ)]` for the exit time of the band.
    pub fn expected_exit_value(&self, tree: &HistoryTree, lattice: &ScenarioLattice) -> f64 {
        self.sigma_nodes(tree)
            .into_iter()
            .map(|h| {
                let n = tree.node(h);
                n.prob * lattice.cashflow(n.time, n.lattice_node)
            })
            .sum()
    }

    /// The exit time lies in both sets on every path of the band event.
    pub fn check_sigma_membership(&self, tree: &HistoryTree) -> Result<()> {
        if !self.m_event {
            return Ok(());
        }
        for h in self.sigma_nodes(tree) {
            if !(self.a_set[h] && self.b_set[h]) {
                return Err(SwingError::Invariant(format!(
                    "exit time at t_{} is outside the reachable sets",
                    tree.node(h).time
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    A,
    B,
    None,
}

/// Stop flags per history node; a path stops at its first flagged node.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule {
    pub stop: Vec<bool>,
}

impl StoppingRule {
    /// Each path carries exactly one flag.
    pub fn check_stops_once(&self, tree: &HistoryTree) -> Result<()> {
        for &leaf in tree.at_time(tree.steps()) {
            let (mut h, mut count) = (leaf, self.stop[leaf] as usize);
            while let Some(p) = tree.node(h).parent {
                count += self.stop[p] as usize;
                h = p;
            }
            if count != 1 {
                return Err(SwingError::Invariant(format!("path to leaf {leaf} stops {count} times")));
            }
        }
        Ok(())
    }

    /// `{σ = t_k}` is known at `t_{k-1}`: siblings agree unless the parent
    /// path has stopped already.
    pub fn is_predictable(&self, tree: &HistoryTree) -> bool {
        let mut stopped = self.stop.clone();
        for k in tree.root_time()..=tree.steps() {
            for &h in tree.at_time(k) {
                if let Some(p) = tree.node(h).parent {
                    stopped[h] |= stopped[p];
                }
            }
        }
        tree.nodes().iter().enumerate().all(|(h, node)| {
            node.children.is_empty()
                || stopped[h]
                || node.children.iter().all(|&(c, _)| self.stop[c] == self.stop[node.children[0].0])
        })
    }

    pub fn evaluate(&self, tree: &HistoryTree, lattice: &ScenarioLattice) -> f64 {
        tree.nodes()
            .iter()
            .zip(&self.stop)
            .filter(|(_, &s)| s)
            .map(|(n, _)| n.prob * lattice.cashflow(n.time, n.lattice_node))
            .sum()
    }
}

fn combine(dir: Direction, a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(dir.pick(x, y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Best `E[X(σ)]` over stopping times in `(t_k0, T]` that lie in the
/// constrained set on the band event.
///
/// With `predictable`, `{σ = t_k}` is decided at `t_{k-1}`; otherwise the
/// search runs over all stopping times and, without a constraint, may also
/// stop at the start.
pub fn optimal_stop(
    lattice: &ScenarioLattice,
    tree: &HistoryTree,
    sets: &ReachableSets,
    constraint: Constraint,
    dir: Direction,
    predictable: bool,
) -> Result<(StoppingRule, f64)> {
    let k_max = tree.steps();
    let k0 = tree.root_time();
    let len = tree.len();
    let allowed = |h: usize| -> bool {
        let root = tree.node(h).parent.is_none();
        if root {
            return !predictable && constraint == Constraint::None;
        }
        match constraint {
            Constraint::None => true,
            Constraint::A => !sets.m_event || sets.a_set[h],
            Constraint::B => !sets.m_event || sets.b_set[h],
        }
    };
    let x = |h: usize| {
        let n = tree.node(h);
        lattice.cashflow(n.time, n.lattice_node)
    };
    // value[h]: best value given no stop before t_k (or at t_k, when predictable)
    let mut value: Vec<Option<f64>> = vec![None; len];
    let mut stop_here = vec![false; len];
    for k in (k0..=k_max).rev() {
        for &h in tree.at_time(k) {
            let node = tree.node(h);
            let cont = if node.children.is_empty() {
                None
            } else {
                node.children
                    .iter()
                    .map(|&(c, p)| value[c].map(|v| p * v))
                    .sum::<Option<f64>>()
            };
            let stop = if predictable {
                let ok = !node.children.is_empty() && node.children.iter().all(|&(c, _)| allowed(c));
                ok.then(|| tree.conditional(h, x))
            } else {
                allowed(h).then(|| x(h))
            };
            stop_here[h] = match (stop, cont) {
                (Some(s), Some(c)) => dir.prefers(s, c),
                (s, _) => s.is_some(),
            };
            value[h] = combine(dir, stop, cont);
        }
    }
    let best = value[0].ok_or(SwingError::InfeasibleStopping)?;
    let mut flags = vec![false; len];
    let mut frontier = vec![0usize];
    while let Some(h) = frontier.pop() {
        let children = &tree.node(h).children;
        if stop_here[h] {
            if predictable {
                children.iter().for_each(|&(c, _)| flags[c] = true);
            } else {
                flags[h] = true;
            }
        } else {
            frontier.extend(children.iter().map(|&(c, _)| c));
        }
    }
    Ok((StoppingRule { stop: flags }, best))
}

/// Predictable search, the main entry point.
pub fn optimal_predictable_stop(
    lattice: &ScenarioLattice,
    tree: &HistoryTree,
    sets: &ReachableSets,
    constraint: Constraint,
    dir: Direction,
) -> Result<(StoppingRule, f64)> {
    optimal_stop(lattice, tree, sets, constraint, dir, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartRegion {
    /// `L(T - t) > 1 - y > 0`
    Interior,
    /// `y < 1 - L(T - t)`
    BelowBoundary,
    /// `y = 1 - L(T - t)`
    OnBoundary,
    /// `y = 1`
    Full,
}

impl StartRegion {
    pub fn tag(self) -> &'static str {
        match self {
            StartRegion::Interior => "i",
            StartRegion::BelowBoundary => "ii",
            StartRegion::OnBoundary => "iii",
            StartRegion::Full => "iv",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalRow {
    pub t0: f64,
    pub y0: f64,
    pub node: usize,
    pub neg_dminus: f64,
    pub neg_dplus: f64,
    pub exit_value: f64,
    pub sup_a: Option<f64>,
    pub inf_b: Option<f64>,
    pub snell_sup: Option<f64>,
    pub snell_inf: Option<f64>,
    pub region: StartRegion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalValueReport {
    pub rows: Vec<MarginalRow>,
    pub tolerance: f64,
    pub violations: Vec<String>,
}

pub const MARGINAL_COLUMNS: [&str; 12] = [
    "t0", "y0", "node", "neg_Dminus", "neg_Dplus", "E_X_sigma", "sup_A", "inf_B", "snell_sup", "snell_inf",
    "region", "ok",
];

/// Marginal value at each start `(k0, y0)` and each lattice node at `t_k0`,
/// next to the stopping values it should equal in its region. Equalities are
/// checked to `3 dt max X`; the below-boundary zeros to `EXACT_TOL`.
pub fn marginal_value_report(
    field: &ValueField,
    derivatives: &DerivativeField,
    policy: &PolicyField,
    lattice: &ScenarioLattice,
    starts: &[(usize, f64)],
    tree_bound: usize,
) -> Result<MarginalValueReport> {
    let volume = field.volume();
    let envelopes = snell(lattice);
    let tol = 3.0 * lattice.dt() * lattice.max_cashflow();
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for &(k0, y0) in starts {
        let i0 = volume.index_of(y0)?;
        let region = if i0 == volume.cap() {
            StartRegion::Full
        } else if i0 == volume.boundary(k0) {
            StartRegion::OnBoundary
        } else if i0 < volume.boundary(k0) {
            StartRegion::BelowBoundary
        } else {
            StartRegion::Interior
        };
        for n in 0..lattice.node_count(k0) {
            let tree = HistoryTree::from_node(lattice, k0, n, tree_bound)?;
            let sets = reachable_sets(policy, &tree, i0);
            let interior = region == StartRegion::Interior;
            let search = |c, d| -> Result<Option<f64>> {
                if interior {
                    Ok(Some(optimal_predictable_stop(lattice, &tree, &sets, c, d)?.1))
                } else {
                    Ok(None)
                }
            };
            let row = MarginalRow {
                t0: field.grid().time(k0),
                y0,
                node: n,
                neg_dminus: -derivatives.dminus[k0][n][i0],
                neg_dplus: -derivatives.dplus[k0][n][i0],
                exit_value: sets.expected_exit_value(&tree, lattice),
                sup_a: search(Constraint::A, Direction::Sup)?,
                inf_b: search(Constraint::B, Direction::Inf)?,
                snell_sup: (region == StartRegion::Full).then(|| envelopes.ystar[k0][n]),
                snell_inf: (region == StartRegion::OnBoundary).then(|| envelopes.ylow[k0][n]),
                region,
            };
            let label = format!("start (t={}, y={y0}, node={n})", row.t0);
            for msg in check_row(&row, tol) {
                violations.push(format!("{label}: {msg}"));
            }
            rows.push(row);
        }
    }
    Ok(MarginalValueReport { rows, tolerance: tol, violations })
}

fn check_row(row: &MarginalRow, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    let mut near = |name: &str, a: f64, b: f64, eps: f64| {
        if (a - b).abs() > eps {
            out.push(format!("{name}: {a} vs {b}"));
        }
    };
    match row.region {
        StartRegion::Interior => {
            let (sa, ib) = (row.sup_a.unwrap_or(f64::NAN), row.inf_b.unwrap_or(f64::NAN));
            near("-D-J vs E[X(sigma)]", row.neg_dminus, row.exit_value, tol);
            near("-D+J vs E[X(sigma)]", row.neg_dplus, row.exit_value, tol);
            let chain = [row.neg_dminus, sa, row.exit_value, ib, row.neg_dplus];
            for w in chain.windows(2) {
                if !(w[0] >= w[1] - tol) {
                    out.push(format!("chain broken: {} < {}", w[0], w[1]));
                }
            }
        }
        StartRegion::BelowBoundary => {
            near("-D-J", row.neg_dminus, 0.0, EXACT_TOL);
            near("-D+J", row.neg_dplus, 0.0, EXACT_TOL);
        }
        StartRegion::OnBoundary => near("-D+J vs lower Snell", row.neg_dplus, row.snell_inf.unwrap_or(f64::NAN), tol),
        StartRegion::Full => near("-D-J vs upper Snell", row.neg_dminus, row.snell_sup.unwrap_or(f64::NAN), tol),
    }
    out
}

impl MarginalValueReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn table(&self) -> Table {
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), fmt_num);
        let mut table = Table::new(&MARGINAL_COLUMNS);
        for r in &self.rows {
            let ok = check_row(r, self.tolerance).is_empty();
            table.push(vec![
                fmt_num(r.t0),
                fmt_num(r.y0),
                r.node.to_string(),
                fmt_num(r.neg_dminus),
                fmt_num(r.neg_dplus),
                fmt_num(r.exit_value),
                opt(r.sup_a),
                opt(r.inf_b),
                opt(r.snell_sup),
                opt(r.snell_inf),
                r.region.tag().to_string(),
                (ok as u8).to_string(),
            ]);
        }
        table
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builders::BINARY_UP;
    use crate::model::{binary_example, binomial, constant, BinomialSpec, DriftKind, PathEnsemble, StepRule};
    use crate::policy::extract_policy;
    use crate::value::{derivatives, solve, VolumeGrid};

    struct Setup {
        lattice: ScenarioLattice,
        field: ValueField,
        derivs: DerivativeField,
        policy: PolicyField,
    }

    fn setup(lattice: ScenarioLattice, rate: f64) -> Setup {
        let vol = VolumeGrid::new(lattice.grid(), rate).unwrap();
        let field = solve(&lattice, &vol).unwrap();
        let derivs = derivatives(&field);
        let policy = extract_policy(&field, &derivs, &lattice);
        Setup { lattice, field, derivs, policy }
    }

    #[test]
    fn snell_examples() {
        let l = binary_example(96).unwrap();
        let s = snell(&l);
        s.check_invariants(&l).unwrap();
        assert_eq!(s.ystar[0][0], 2.0);
        assert_eq!(s.ylow[0][0], 0.0);
        let c = constant(0.7, 3.0, 6).unwrap();
        let s = snell(&c);
        assert!(s.ystar.iter().chain(&s.ylow).flatten().all(|&v| v == 0.7));
        let dm = doob_meyer(&s, &c, Direction::Sup);
        assert!(dm.increments.iter().flatten().flatten().all(|&d| d == 0.0));
    }

    #[test]
    fn doob_meyer_paths() {
        let l = binary_example(12).unwrap();
        let s = snell(&l);
        for dir in [Direction::Sup, Direction::Inf] {
            let dm = doob_meyer(&s, &l, dir);
            dm.check(&l).unwrap();
            let y = s.envelope(dir);
            for path in PathEnsemble::exhaustive(&l, 4).unwrap().paths {
                let m = dm.martingale_along(&l, &path);
                let a: Vec<f64> = (0..path.len()).map(|k| y[k][path[k]] - m[k]).collect();
                for w in a.windows(2) {
                    match dir {
                        Direction::Sup => assert!(w[1] <= w[0] + 1e-12),
                        Direction::Inf => assert!(w[1] >= w[0] - 1e-12),
                    }
                }
            }
        }
        let mart = binomial(&BinomialSpec::new(
            DriftKind::Martingale,
            1.0,
            1.0,
            1,
            StepRule::Additive { drift: 0.0, spread: 0.5 },
        ))
        .unwrap();
        let dm = doob_meyer(&snell(&mart), &mart, Direction::Sup);
        assert_eq!(dm.increments[0][0], vec![-0.5, 0.5]);
    }

    #[test]
    fn binary_sets_and_searches() {
        let s = setup(binary_example(96).unwrap(), 1.0);
        let vol = s.field.volume();
        let tree = HistoryTree::from_lattice(&s.lattice, 1 << 10).unwrap();
        let sets = reachable_sets(&s.policy, &tree, vol.index_of(0.5).unwrap());
        assert!(sets.m_event);
        sets.check_sigma_membership(&tree).unwrap();
        for &leaf in tree.at_time(96) {
            let up = tree.node(leaf).lattice_node == BINARY_UP;
            for k in 1..=96 {
                let h = tree.ancestor(leaf, k);
                let t = k as f64 / 32.0;
                let (a, b) = if up {
                    (t <= 1.0 || t >= 1.5, (1.0..=1.5).contains(&t))
                } else {
                    (t <= 2.5, t >= 2.5)
                };
                assert_eq!((sets.a_set[h], sets.b_set[h]), (a, b), "t={t} up={up}");
            }
        }
        assert_eq!(sets.expected_exit_value(&tree, &s.lattice), 1.5);
        let (rule, v) = optimal_predictable_stop(&s.lattice, &tree, &sets, Constraint::A, Direction::Sup).unwrap();
        assert_eq!(v, 1.5);
        assert!(rule.is_predictable(&tree));
        rule.check_stops_once(&tree).unwrap();
        assert_eq!(rule.evaluate(&tree, &s.lattice), 1.5);
        let (rule, v) = optimal_stop(&s.lattice, &tree, &sets, Constraint::A, Direction::Sup, false).unwrap();
        assert_eq!(v, 1.75);
        assert!(!rule.is_predictable(&tree));
        let (_, v) = optimal_predictable_stop(&s.lattice, &tree, &sets, Constraint::B, Direction::Inf).unwrap();
        assert_eq!(v, 1.5);
        let (_, v) = optimal_stop(&s.lattice, &tree, &sets, Constraint::None, Direction::Sup, false).unwrap();
        assert_eq!(v, snell(&s.lattice).ystar[0][0]);
    }

    #[test]
    fn constant_early_exercise_b_set() {
        let s = setup(constant(1.0, 3.0, 12).unwrap(), 1.0);
        let vol = s.field.volume();
        let early = PolicyField::early_exercise(&s.lattice, vol);
        let tree = HistoryTree::from_lattice(&s.lattice, 64).unwrap();
        let sets = reachable_sets(&early, &tree, vol.index_of(0.5).unwrap());
        // rate L on [0, 0.5): B = (0, 0.5]
        let b: Vec<bool> = (0..=12).map(|k| sets.b_set[tree.at_time(k)[0]]).collect();
        assert_eq!(b, (0..=12).map(|k| (1..=2).contains(&k)).collect::<Vec<_>>());
        let forced = reachable_sets(&early, &tree, vol.index_of(vol.level(vol.boundary(0))).unwrap());
        assert!(!forced.m_event);
        assert!((1..=12).all(|k| forced.b_set[tree.at_time(k)[0]]));
    }

    #[test]
    fn marginal_report_on_binary_example() {
        let s = setup(binary_example(96).unwrap(), 1.0);
        let starts = [(0, 0.5), (0, 1.0), (0, -2.0), (80, 0.0)];
        let rep = marginal_value_report(&s.field, &s.derivs, &s.policy, &s.lattice, &starts, 1 << 12).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations);
        let r = &rep.rows[0];
        assert_eq!(r.region, StartRegion::Interior);
        assert!((r.neg_dminus - 1.5).abs() < 0.05);
        assert!((rep.rows[1].neg_dminus - 2.0).abs() < 0.1);
        assert_eq!(rep.rows[2].region, StartRegion::OnBoundary);
        assert!(rep.rows[3..].iter().all(|r| r.region == StartRegion::BelowBoundary && r.neg_dminus == 0.0));
        let table = rep.table();
        assert_eq!(table.rows.len(), rep.rows.len());
    }
}
