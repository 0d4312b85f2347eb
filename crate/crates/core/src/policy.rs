//! Bang-bang exercise policies read off the value field, rollouts along
//! scenario paths, the exit time of the volume band and the mollified
//! approximation of the differential inclusion.

use crate::error::{Result, SwingError};
use crate::model::{PathEnsemble, ScenarioLattice, TimeGrid};
use crate::table::{fmt_num, Table};
use crate::value::{DerivativeField, ValueField, VolumeGrid};

/// Tolerance for `X + D_y J` to count as zero.
pub const TIE_TOL: f64 = 1e-9;

/// Exercise decisions `exercise[k][node][level]` for `k < K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyField {
    grid: TimeGrid,
    volume: VolumeGrid,
    exercise: Vec<Vec<Vec<bool>>>,
}

impl PolicyField {
    fn from_rule<F: Fn(usize, usize, usize) -> bool>(
        lattice: &ScenarioLattice,
        volume: &VolumeGrid,
        rule: F,
    ) -> Self {
        let cap = volume.cap();
        let exercise = (0..lattice.steps())
            .map(|k| {
                (0..lattice.node_count(k))
                    .map(|n| {
                        (0..volume.len())
                            .map(|i| i < cap && (i <= volume.boundary(k) || rule(k, n, i)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { grid: *lattice.grid(), volume: *volume, exercise }
    }

    /// Full rate only on the last `(1 - y)/L` of the horizon.
    pub fn late_exercise(lattice: &ScenarioLattice, volume: &VolumeGrid) -> Self {
        Self::from_rule(lattice, volume, |_, _, _| false)
    }

    /// Full rate until the volume is used up.
    pub fn early_exercise(lattice: &ScenarioLattice, volume: &VolumeGrid) -> Self {
        Self::from_rule(lattice, volume, |_, _, _| true)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn volume(&self) -> &VolumeGrid {
        &self.volume
    }

    pub fn exercises(&self, k: usize, n: usize, i: usize) -> bool {
        self.exercise[k][n][i]
    }

    /// Decision as a rate in `{0, L}`.
    pub fn rate(&self, k: usize, n: usize, i: usize) -> f64 {
        if self.exercises(k, n, i) {
            self.volume.rate()
        } else {
            0.0
        }
    }

    /// No exercise at the cap, full rate on or below the full-rate boundary.
    pub fn check_feasibility(&self) -> Result<()> {
        let cap = self.volume.cap();
        for (k, slice) in self.exercise.iter().enumerate() {
            for (n, row) in slice.iter().enumerate() {
                for (i, &ex) in row.iter().enumerate() {
                    let forced = i < cap && i <= self.volume.boundary(k);
                    if (i == cap && ex) || (forced && !ex) {
                        return Err(SwingError::Invariant(format!(
                            "infeasible decision at (k={k}, node={n}, level={i})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Exercises iff the forward marginal `X + D+ J` is nonnegative, which is the
/// argmax of the discrete Bellman step with ties resolved to exercise.
pub fn extract_policy(
    field: &ValueField,
    derivatives: &DerivativeField,
    lattice: &ScenarioLattice,
) -> PolicyField {
    PolicyField::from_rule(lattice, field.volume(), |k, n, i| {
        lattice.cashflow(k, n) + derivatives.dplus[k][n][i] >= -TIE_TOL
    })
}

/// One rolled-out path from the start time `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub path_id: usize,
    pub start: usize,
    pub weight: f64,
    /// Lattice nodes at `t_start..=t_K`.
    pub nodes: Vec<usize>,
    /// Volume level indices at `t_start..=t_K`.
    pub levels: Vec<usize>,
    /// Rates on `[t_k, t_{k+1})`.
    pub u: Vec<f64>,
    /// Cumulative volume at `t_start..=t_K`.
    pub y: Vec<f64>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub paths: Vec<ControlPath>,
    /// Weighted mean reward.
    pub mean: f64,
}

pub fn rollout(
    policy: &PolicyField,
    lattice: &ScenarioLattice,
    ensemble: &PathEnsemble,
    start: (usize, f64),
) -> Result<Rollout> {
    let (k0, y0) = start;
    let volume = policy.volume();
    let k_max = lattice.steps();
    if k0 > k_max {
        return Err(SwingError::OffTimeGrid { time: lattice.grid().time(k0), dt: lattice.dt() });
    }
    let i0 = volume.index_of(y0)?;
    let h = volume.pitch();
    let mut paths = Vec::with_capacity(ensemble.len());
    let mut mean = 0.0;
    let mut total_weight = 0.0;
    for (id, (path, &weight)) in ensemble.paths.iter().zip(&ensemble.weights).enumerate() {
        let mut i = i0;
        let mut levels = vec![i0];
        let mut u = Vec::with_capacity(k_max - k0);
        let mut reward = 0.0;
        for k in k0..k_max {
            let n = path[k];
            if policy.exercises(k, n, i) {
                reward += h * lattice.cashflow(k, n);
                u.push(volume.rate());
                i += 1;
            } else {
                u.push(0.0);
            }
            levels.push(i);
        }
        mean += weight * reward;
        total_weight += weight;
        paths.push(ControlPath {
            path_id: id,
            start: k0,
            weight,
            nodes: path[k0..].to_vec(),
            y: levels.iter().map(|&j| volume.level(j)).collect(),
            levels,
            u,
            reward,
        });
    }
    Ok(Rollout { paths, mean: mean / total_weight })
}

impl Rollout {
    /// `u = 0` only where `X + D- J <= tol`, `u = L` only where `X + D- J >= -tol`.
    pub fn check_inclusion(&self, lattice: &ScenarioLattice, derivatives: &DerivativeField) -> Result<()> {
        for p in &self.paths {
            for (s, &rate) in p.u.iter().enumerate() {
                let k = p.start + s;
                let (n, i) = (p.nodes[s], p.levels[s]);
                let m = lattice.cashflow(k, n) + derivatives.dminus[k][n][i];
                let ok = if rate > 0.0 { m >= -TIE_TOL } else { m <= TIE_TOL };
                if !ok {
                    return Err(SwingError::Invariant(format!(
                        "inclusion violated on path {} at k={k}: u={rate}, X+D-J={m}",
                        p.path_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Terminal volume is 1 whenever the start allows filling it.
    pub fn check_saturation(&self, volume: &VolumeGrid) -> Result<()> {
        for p in &self.paths {
            let i0 = p.levels[0];
            let y_end = *p.y.last().expect("nonempty path");
            if i0 <= volume.boundary(p.start) && (y_end - 1.0).abs() > 1e-12 {
                return Err(SwingError::Invariant(format!(
                    "path {} ends at volume {y_end} below the cap",
                    p.path_id
                )));
            }
        }
        Ok(())
    }

    pub fn export(&self, lattice: &ScenarioLattice) -> Table {
        let mut table = Table::new(&ROLLOUT_COLUMNS);
        let dt = lattice.dt();
        for p in &self.paths {
            for (s, &n) in p.nodes.iter().enumerate() {
                let k = p.start + s;
                let x = lattice.cashflow(k, n);
                let rate = p.u.get(s).copied().unwrap_or(0.0);
                table.push(vec![
                    p.path_id.to_string(),
                    fmt_num(lattice.grid().time(k)),
                    fmt_num(rate),
                    fmt_num(p.y[s]),
                    fmt_num(x),
                    fmt_num(rate * x * dt),
                ]);
            }
        }
        table
    }
}

pub const ROLLOUT_COLUMNS: [&str; 6] = ["path_id", "t", "u", "y", "X", "reward_increment"];
pub const BOUNDARY_COLUMNS: [&str; 4] = ["path_id", "sigma_U", "sigma_L", "sigma"];

/// Exit times of the cumulative volume from the band `(1 - L(T - t), 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExerciseBoundary {
    pub sigma_u: f64,
    pub sigma_l: f64,
    pub sigma: f64,
    /// Whether the start lies strictly inside the band.
    pub in_band: bool,
}

/// First grid times with `y >= 1` and `y <= 1 - L(T - t)`; `T` off the
/// band event, where all three times are set to the horizon.
pub fn exit_time(path: &ControlPath, volume: &VolumeGrid, grid: &TimeGrid) -> ExerciseBoundary {
    let horizon = grid.horizon();
    let cap = volume.cap();
    let in_band = volume.is_interior(path.start, path.levels[0]);
    if !in_band {
        return ExerciseBoundary { sigma_u: horizon, sigma_l: horizon, sigma: horizon, in_band };
    }
    let mut sigma_u = horizon;
    let mut sigma_l = horizon;
    for (s, &i) in path.levels.iter().enumerate() {
        let k = path.start + s;
        if i >= cap && sigma_u == horizon {
            sigma_u = grid.time(k);
        }
        if i <= volume.boundary(k) && sigma_l == horizon {
            sigma_l = grid.time(k);
        }
    }
    ExerciseBoundary { sigma_u, sigma_l, sigma: sigma_u.min(sigma_l), in_band }
}

pub fn boundary_table(rollout: &Rollout, volume: &VolumeGrid, grid: &TimeGrid) -> Table {
    let mut table = Table::new(&BOUNDARY_COLUMNS);
    for p in &rollout.paths {
        let b = exit_time(p, volume, grid);
        table.push(vec![
            p.path_id.to_string(),
            fmt_num(b.sigma_u),
            fmt_num(b.sigma_l),
            fmt_num(b.sigma),
        ]);
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `X + D- J > tol`
    Plus,
    /// `X + D- J < -tol`
    Minus,
    Zero,
}

/// Sign of `X + D- J` on the levels strictly above the full-rate boundary;
/// level `i` stands for the volume interval `(y_{i-1}, y_i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseRegions {
    volume: VolumeGrid,
    regions: Vec<Vec<Vec<Option<Region>>>>,
}

impl ExerciseRegions {
    pub fn compute(field: &ValueField, derivatives: &DerivativeField, lattice: &ScenarioLattice) -> Self {
        let volume = *field.volume();
        let regions = (0..lattice.steps())
            .map(|k| {
                (0..lattice.node_count(k))
                    .map(|n| {
                        (0..volume.len())
                            .map(|i| {
                                if i <= volume.boundary(k) {
                                    return None;
                                }
                                let m = lattice.cashflow(k, n) + derivatives.dminus[k][n][i];
                                Some(if m > TIE_TOL {
                                    Region::Plus
                                } else if m < -TIE_TOL {
                                    Region::Minus
                                } else {
                                    Region::Zero
                                })
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { volume, regions }
    }

    pub fn region(&self, k: usize, n: usize, i: usize) -> Option<Region> {
        self.regions[k][n][i]
    }

    pub fn volume(&self) -> &VolumeGrid {
        &self.volume
    }

    /// Maximal intervals `(a, b]` of `Γ+` in units of the volume pitch,
    /// measured from the lowest level.
    pub fn plus_intervals(&self, k: usize, n: usize) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, r) in self.regions[k][n].iter().enumerate() {
            if *r == Some(Region::Plus) {
                let (a, b) = ((i - 1) as f64, i as f64);
                match out.last_mut() {
                    Some(last) if last.1 == a => last.1 = b,
                    _ => out.push((a, b)),
                }
            }
        }
        out
    }
}

/// One iterate of the mollified construction along a single path.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedControl {
    pub n: u32,
    /// Window width in volume units.
    pub window: f64,
    /// `2^-n` was below one pitch and was raised to it.
    pub clamped: bool,
    /// Snapping made the window ratio to the previous iterate differ from 1/2 or 1.
    pub irregular: bool,
    pub y: Vec<f64>,
}

/// `F / L` at pitch-unit level `y`: the share of `(y - w, y)` whose forward
/// `w`-window lies inside `Γ+`.
fn mollified_share(intervals: &[(f64, f64)], y: f64, w: f64) -> f64 {
    intervals
        .iter()
        .map(|&(a, b)| (y.min(b - w) - (y - w).max(a)).max(0.0) / w)
        .sum::<f64>()
        .min(1.0)
}

/// Iterates `n = 1..=n_max` along the lattice path `nodes` (indexed from `t_0`).
/// Each Euler step is projected back above the full-rate boundary so the
/// trajectory rides at rate `L` once it reaches the lower band edge.
pub fn mollified_iterate(
    regions: &ExerciseRegions,
    nodes: &[usize],
    start: (usize, f64),
    n_max: u32,
) -> Result<Vec<MollifiedControl>> {
    let volume = regions.volume();
    let (k0, y0) = start;
    let i0 = volume.index_of(y0)?;
    let k_max = nodes.len() - 1;
    let cap = volume.cap() as f64;
    let h = volume.pitch();
    let mut out: Vec<MollifiedControl> = Vec::new();
    for n in 1..=n_max {
        let raw = (0.5f64).powi(n as i32) / h;
        let units = raw.floor().max(1.0);
        let clamped = raw < 1.0;
        let irregular = out.last().is_some_and(|prev| {
            let ratio = units / prev.window;
            ratio != 0.5 && ratio != 1.0
        });
        let mut y = i0 as f64;
        let mut traj = vec![volume.level(i0)];
        for k in k0..k_max {
            let floor = (y + 1.0).min(volume.boundary(k + 1) as f64);
            let share = if y >= cap {
                0.0
            } else {
                mollified_share(&regions.plus_intervals(k, nodes[k]), y, units)
            };
            y = (y + share).max(floor).min(cap);
            traj.push(lowest_level(volume) + y * h);
        }
        out.push(MollifiedControl { n, window: units, clamped, irregular, y: traj });
    }
    Ok(out)
}

fn lowest_level(volume: &VolumeGrid) -> f64 {
    volume.level(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{binary_example, binomial, constant, BinomialSpec, DriftKind};
    use crate::model::builders::BINARY_UP;
    use crate::value::{derivatives, solve};

    fn setup(lattice: &ScenarioLattice, rate: f64) -> (ValueField, DerivativeField, PolicyField) {
        let vol = VolumeGrid::new(lattice.grid(), rate).unwrap();
        let f = solve(lattice, &vol).unwrap();
        let d = derivatives(&f);
        let p = extract_policy(&f, &d, lattice);
        (f, d, p)
    }

    #[test]
    fn binary_policy_and_exit_times() {
        let l = binary_example(96).unwrap();
        let (f, d, p) = setup(&l, 1.0);
        p.check_feasibility().unwrap();
        let vol = f.volume();
        let cap = vol.cap();
        assert!(!p.exercises(0, 0, cap));
        let half = vol.index_of(0.5).unwrap();
        // after the reveal the high branch exercises right away
        assert!(p.exercises(32, BINARY_UP, half));
        let ens = PathEnsemble::exhaustive(&l, 1 << 10).unwrap();
        let r = rollout(&p, &l, &ens, (0, 0.5)).unwrap();
        assert!((r.mean - f.value(0, 0, half)).abs() < 1e-10);
        assert!((r.mean - 0.875).abs() < 0.05);
        r.check_inclusion(&l, &d).unwrap();
        r.check_saturation(vol).unwrap();
        for path in &r.paths {
            let b = exit_time(path, vol, l.grid());
            if path.nodes[l.steps()] == BINARY_UP {
                assert_eq!((b.sigma, b.sigma_u), (1.5, 1.5));
            } else {
                assert_eq!((b.sigma, b.sigma_l), (2.5, 2.5));
            }
        }
        let full = rollout(&p, &l, &ens, (0, 1.0)).unwrap();
        assert_eq!(exit_time(&full.paths[0], vol, l.grid()).sigma, 3.0);
    }

    #[test]
    fn constant_paths_collect_one() {
        let l = constant(1.0, 3.0, 6).unwrap();
        let (_, _, p) = setup(&l, 1.0);
        let ens = PathEnsemble::exhaustive(&l, 16).unwrap();
        let r = rollout(&p, &l, &ens, (0, 0.0)).unwrap();
        assert!(r.paths.iter().all(|c| (c.reward - 1.0).abs() < 1e-12));
        assert!(rollout(&p, &l, &ens, (0, 0.1)).is_err());
    }

    #[test]
    fn submartingale_matches_late_exercise() {
        let l = binomial(&BinomialSpec::scaled(DriftKind::Submartingale, 1.0, 3.0, 12, 0.3, 0.2)).unwrap();
        let (_, _, p) = setup(&l, 1.0);
        let late = PolicyField::late_exercise(&l, p.volume());
        let ens = PathEnsemble::exhaustive(&l, 1 << 13).unwrap();
        let a = rollout(&p, &l, &ens, (0, 0.0)).unwrap();
        let b = rollout(&late, &l, &ens, (0, 0.0)).unwrap();
        assert!((a.mean - b.mean).abs() < 1e-10);
        for (x, z) in a.paths.iter().zip(&b.paths) {
            assert_eq!(x.u, z.u);
        }
    }

    #[test]
    fn mollified_iterates_on_binary_example() {
        let l = binary_example(96).unwrap();
        let (f, d, p) = setup(&l, 1.0);
        let regions = ExerciseRegions::compute(&f, &d, &l);
        let ens = PathEnsemble::exhaustive(&l, 1 << 10).unwrap();
        let r = rollout(&p, &l, &ens, (0, 0.5)).unwrap();
        for path in &r.paths {
            let it = mollified_iterate(&regions, &path.nodes, (0, 0.5), 4).unwrap();
            for w in it.windows(2) {
                assert!(w[1].y.iter().zip(&w[0].y).all(|(a, b)| a >= b));
            }
            let dev = it[3].y.iter().zip(&path.y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dev <= 2.0 * l.dt(), "deviation {dev}");
        }
    }

    #[test]
    fn mollified_trivial_regions() {
        // constant X: every level above the boundary is in Γ+
        let l = constant(1.0, 3.0, 24).unwrap();
        let (f, d, _) = setup(&l, 1.0);
        let regions = ExerciseRegions::compute(&f, &d, &l);
        let nodes = vec![0; 25];
        let it = mollified_iterate(&regions, &nodes, (0, 0.0), 3).unwrap();
        assert!(it.iter().all(|m| m.y.last() == Some(&1.0)));
    }
}
