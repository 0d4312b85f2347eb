//! Config-driven experiment runners behind the `swing` binary.
//!
//! Config files are flat `key = value` lines; `#` starts a comment.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `model` | `binary`, `constant`, `martingale`, `submartingale`, `supermartingale`, `file` | `binary` |
//! | `lattice_file` | lattice path for `model = file` | |
//! | `steps` | time steps `K` | 96 |
//! | `horizon` | `T` (fixed at 3 for `binary`) | 3 |
//! | `rate` | local cap `L` | 1 |
//! | `c` | level of the constant cashflow | 1 |
//! | `x0`, `mu`, `sigma` | binomial start, drift and volatility | 1, 0, 0.2 |
//! | `recombining` | binomial node sharing | true |
//! | `starts` | `t:y` pairs separated by commas | `0:0` |
//! | `k_list` | step counts for the duality study | 48,96,192 |
//! | `seed`, `paths` | sampled ensemble when not exhaustive | 0, 1000 |
//! | `exhaustive` | force exact path enumeration | false |
//! | `path_bound` | largest exhaustive ensemble | 65536 |
//! | `oracle_steps` | `K` of the brute-force comparison lattice | 6 |
//! | `rollout_tol`, `oracle_tol`, `residual_tol` | check tolerances | 1e-10, 1e-12, 1e-10 |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::dual::{build_mbar, duality_gap_study};
use crate::error::{Result, SwingError};
use crate::model::{
    binary_example, binomial, constant, io::read_lattice, BinomialSpec, DriftKind, PathEnsemble, ScenarioLattice,
    DEFAULT_EXHAUSTIVE_BOUND,
};
use crate::oracle::{brute_force_value, DEFAULT_CAP_LOG2};
use crate::policy::{boundary_table, extract_policy, rollout, PolicyField, Rollout};
use crate::stopping::{doob_meyer, marginal_value_report, snell, Direction};
use crate::table::{fmt_num, Table};
use crate::value::{bspde_residual, boundary_check, derivatives, solve, DerivativeField, DerivativeTiming, ValueField, VolumeGrid};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Binary,
    Constant,
    Binomial(DriftKind),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub steps: usize,
    pub horizon: f64,
    pub rate: f64,
    pub c: f64,
    pub x0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub recombining: bool,
    pub starts: Vec<(f64, f64)>,
    pub k_list: Vec<usize>,
    pub seed: u64,
    pub paths: usize,
    pub exhaustive: bool,
    pub path_bound: usize,
    pub oracle_steps: usize,
    pub rollout_tol: f64,
    pub oracle_tol: f64,
    pub residual_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Binary,
            steps: 96,
            horizon: 3.0,
            rate: 1.0,
            c: 1.0,
            x0: 1.0,
            mu: 0.0,
            sigma: 0.2,
            recombining: true,
            starts: vec![(0.0, 0.0)],
            k_list: vec![48, 96, 192],
            seed: 0,
            paths: 1000,
            exhaustive: false,
            path_bound: DEFAULT_EXHAUSTIVE_BOUND,
            oracle_steps: 6,
            rollout_tol: 1e-10,
            oracle_tol: 1e-12,
            residual_tol: 1e-10,
        }
    }
}

fn bad(msg: impl Into<String>) -> SwingError {
    SwingError::Config(msg.into())
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| bad(format!("{key}: cannot parse {v:?}")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

impl RunConfig {
    /// Parses a config file; paths in it are relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SwingError::Parse { line: no + 1, msg: "expected key = value".into() })?;
            if seen.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(SwingError::Parse { line: no + 1, msg: format!("duplicate key {}", k.trim()) });
            }
        }
        let mut cfg = RunConfig::default();
        for (key, v) in &seen {
            let v = v.as_str();
            match key.as_str() {
                "model" => {
                    cfg.model = match v {
                        "binary" => ModelKind::Binary,
                        "constant" => ModelKind::Constant,
                        "martingale" => ModelKind::Binomial(DriftKind::Martingale),
                        "submartingale" => ModelKind::Binomial(DriftKind::Submartingale),
                        "supermartingale" => ModelKind::Binomial(DriftKind::Supermartingale),
                        "file" => ModelKind::File(PathBuf::new()),
                        other => return Err(bad(format!("unknown model {other:?}"))),
                    }
                }
                "lattice_file" => {}
                "steps" => cfg.steps = num(key, v)?,
                "horizon" => cfg.horizon = num(key, v)?,
                "rate" => cfg.rate = num(key, v)?,
                "c" => cfg.c = num(key, v)?,
                "x0" => cfg.x0 = num(key, v)?,
                "mu" => cfg.mu = num(key, v)?,
                "sigma" => cfg.sigma = num(key, v)?,
                "recombining" => cfg.recombining = num(key, v)?,
                "starts" => {
                    cfg.starts = v
                        .split(',')
                        .map(|pair| {
                            let (t, y) = pair
                                .split_once(':')
                                .ok_or_else(|| bad(format!("starts: expected t:y, got {pair:?}")))?;
                            Ok((num(key, t.trim())?, num(key, y.trim())?))
                        })
                        .collect::<Result<_>>()?
                }
                "k_list" => cfg.k_list = list(key, v)?,
                "seed" => cfg.seed = num(key, v)?,
                "paths" => cfg.paths = num(key, v)?,
                "exhaustive" => cfg.exhaustive = num(key, v)?,
                "path_bound" => cfg.path_bound = num(key, v)?,
                "oracle_steps" => cfg.oracle_steps = num(key, v)?,
                "rollout_tol" => cfg.rollout_tol = num(key, v)?,
                "oracle_tol" => cfg.oracle_tol = num(key, v)?,
                "residual_tol" => cfg.residual_tol = num(key, v)?,
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        if let ModelKind::File(path) = &mut cfg.model {
            let file = seen.get("lattice_file").ok_or_else(|| bad("model = file needs lattice_file"))?;
            *path = base.join(file);
        } else if seen.contains_key("lattice_file") {
            return Err(bad("lattice_file is only used with model = file"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| SwingError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Tolerances positive, starts nonempty and grids aligned for every run.
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("rollout_tol", self.rollout_tol), ("oracle_tol", self.oracle_tol), ("residual_tol", self.residual_tol)] {
            if !(t > 0.0) {
                return Err(bad(format!("{name} must be positive")));
            }
        }
        if self.starts.is_empty() {
            return Err(bad("starts is empty"));
        }
        if self.model == ModelKind::Binary && self.horizon != 3.0 {
            return Err(bad("the binary example has horizon 3"));
        }
        if !matches!(self.model, ModelKind::File(_)) {
            for &k in self.k_list.iter().chain([&self.steps]) {
                let lattice = self.lattice_at(k)?;
                VolumeGrid::new(lattice.grid(), self.rate)?;
            }
        }
        Ok(())
    }

    /// The configured model with `steps` time steps.
    pub fn lattice_at(&self, steps: usize) -> Result<ScenarioLattice> {
        match &self.model {
            ModelKind::Binary => binary_example(steps),
            ModelKind::Constant => constant(self.c, self.horizon, steps),
            ModelKind::Binomial(kind) => {
                let spec = BinomialSpec::scaled(*kind, self.x0, self.horizon, steps, self.mu, self.sigma);
                binomial(&if self.recombining { spec } else { spec.non_recombining() })
            }
            ModelKind::File(path) => {
                let (lattice, _) = self.read_file(path)?;
                if lattice.steps() != steps {
                    return Err(bad(format!("lattice file has {} steps, not {steps}", lattice.steps())));
                }
                Ok(lattice)
            }
        }
    }

    fn read_file(&self, path: &Path) -> Result<(ScenarioLattice, f64)> {
        let text = fs::read_to_string(path).map_err(|e| SwingError::Io(format!("{}: {e}", path.display())))?;
        read_lattice(&text)
    }

    /// Lattice and local cap of the main run; a lattice file carries its own.
    pub fn lattice(&self) -> Result<(ScenarioLattice, f64)> {
        match &self.model {
            ModelKind::File(path) => self.read_file(path),
            _ => Ok((self.lattice_at(self.steps)?, self.rate)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Price,
    Verify,
    Dual,
    Stopping,
    Example,
}

/// Files to write and text to print; `failed` marks invariant failures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub summary: String,
    pub failed: bool,
}

impl Outcome {
    fn file(&mut self, name: &str, table: &Table) {
        self.files.push((name.to_string(), table.render()));
    }

    /// Writes all files into `dir`, removing any already written on error.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut done: Vec<PathBuf> = Vec::new();
        for (name, body) in &self.files {
            let path = dir.join(name);
            let tmp = dir.join(format!(".{name}.tmp"));
            let res = fs::write(&tmp, body).and_then(|_| fs::rename(&tmp, &path));
            if let Err(e) = res {
                let _ = fs::remove_file(&tmp);
                for p in &done {
                    let _ = fs::remove_file(p);
                }
                return Err(e.into());
            }
            done.push(path);
        }
        Ok(())
    }
}

/// Process exit code for an error: 2 for invariant failures, 1 otherwise.
pub fn exit_code(err: &SwingError) -> i32 {
    match err {
        SwingError::Invariant(_) | SwingError::InfeasibleStopping => 2,
        _ => 1,
    }
}

struct Solved {
    lattice: ScenarioLattice,
    field: ValueField,
    derivs: DerivativeField,
    policy: PolicyField,
}

fn solved(cfg: &RunConfig) -> Result<Solved> {
    let (lattice, rate) = cfg.lattice()?;
    let volume = VolumeGrid::new(lattice.grid(), rate)?;
    let field = solve(&lattice, &volume)?;
    let derivs = derivatives(&field);
    let policy = extract_policy(&field, &derivs, &lattice);
    Ok(Solved { lattice, field, derivs, policy })
}

fn ensemble(cfg: &RunConfig, lattice: &ScenarioLattice) -> Result<PathEnsemble> {
    if cfg.exhaustive || lattice.path_count() <= cfg.path_bound as u128 {
        PathEnsemble::exhaustive(lattice, cfg.path_bound)
    } else {
        PathEnsemble::sample(lattice, cfg.paths, cfg.seed)
    }
}

fn start_indices(cfg: &RunConfig, s: &Solved) -> Result<Vec<(usize, f64)>> {
    cfg.starts
        .iter()
        .map(|&(t, y)| {
            let k = s.lattice.grid().index_of(t)?;
            s.field.volume().index_of(y)?;
            Ok((k, y))
        })
        .collect()
}

/// `E[J(t_k, ., y)]` over the nodes at `t_k`.
fn expected_value(s: &Solved, k: usize, y: f64) -> Result<f64> {
    let marginals = s.lattice.marginals();
    let i = s.field.volume().index_of(y)?;
    Ok(marginals[k].iter().enumerate().map(|(n, p)| p * s.field.value(k, n, i)).sum())
}

fn rollouts(cfg: &RunConfig, s: &Solved, starts: &[(usize, f64)]) -> Result<(PathEnsemble, Vec<Rollout>)> {
    let ens = ensemble(cfg, &s.lattice)?;
    let rolls = starts.iter().map(|&st| rollout(&s.policy, &s.lattice, &ens, st)).collect::<Result<_>>()?;
    Ok((ens, rolls))
}

fn price(cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let s = solved(cfg)?;
    let starts = start_indices(cfg, &s)?;
    out.file("value_field.txt", &s.field.export(&s.derivs));
    let (_, rolls) = rollouts(cfg, &s, &starts)?;
    for (idx, (&(k, y), r)) in starts.iter().zip(&rolls).enumerate() {
        let t = s.lattice.grid().time(k);
        let _ = writeln!(out.summary, "J({t},{y})={}", fmt_num(expected_value(&s, k, y)?));
        let _ = writeln!(out.summary, "rollout_mean({t},{y})={}", fmt_num(r.mean));
        out.file(&format!("rollout_{idx}.txt"), &r.export(&s.lattice));
        out.file(&format!("boundary_{idx}.txt"), &boundary_table(r, s.field.volume(), s.lattice.grid()));
    }
    out.files.push(("summary.txt".into(), out.summary.clone()));
    Ok(())
}

struct Checks {
    table: Table,
    failed: bool,
}

impl Checks {
    fn new() -> Self {
        Self { table: Table::new(&["check", "status", "detail"]), failed: false }
    }

    fn record(&mut self, name: &str, res: Result<String>) {
        let (status, detail) = match res {
            Ok(d) => ("pass", d),
            Err(e) => {
                self.failed = true;
                ("fail", e.to_string())
            }
        };
        self.table.push(vec![name.into(), status.into(), detail.replace(char::is_whitespace, "_")]);
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.table.push(vec![name.into(), "skip".into(), why.replace(char::is_whitespace, "_")]);
    }
}

fn fail(msg: String) -> SwingError {
    SwingError::Invariant(msg)
}

fn verify(cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let s = solved(cfg)?;
    let starts = start_indices(cfg, &s)?;
    let mut c = Checks::new();
    c.record("value_invariants", s.field.check_invariants(&s.lattice).map(|_| "ok".into()));
    let b = boundary_check(&s.field, &s.lattice);
    c.record(
        "boundary_identities",
        if b.passed() { Ok(format!("{} cells", b.checked)) } else { Err(fail(format!("{} violations", b.violations.len()))) },
    );
    let res = bspde_residual(&s.field, &s.derivs, &s.lattice, DerivativeTiming::Implicit);
    c.record(
        "bspde_residual",
        if res.max_abs <= cfg.residual_tol { Ok(format!("max {:e}", res.max_abs)) } else { Err(fail(format!("max {:e}", res.max_abs))) },
    );
    c.record("policy_feasibility", s.policy.check_feasibility().map(|_| "ok".into()));
    check_oracle(cfg, &mut c);
    match rollouts(cfg, &s, &starts) {
        Ok((ens, rolls)) => {
            for (&(k, y), r) in starts.iter().zip(&rolls) {
                let tag = format!("({},{y})", s.lattice.grid().time(k));
                c.record(&format!("inclusion{tag}"), r.check_inclusion(&s.lattice, &s.derivs).map(|_| "ok".into()));
                c.record(&format!("saturation{tag}"), r.check_saturation(s.field.volume()).map(|_| "ok".into()));
                if ens.exhaustive {
                    let j = expected_value(&s, k, y)?;
                    let d = (r.mean - j).abs();
                    c.record(
                        &format!("rollout_mean{tag}"),
                        if d <= cfg.rollout_tol { Ok(format!("diff {d:e}")) } else { Err(fail(format!("diff {d:e}"))) },
                    );
                }
            }
        }
        Err(e) => c.record("rollouts", Err(e)),
    }
    let env = snell(&s.lattice);
    c.record("snell_envelopes", env.check_invariants(&s.lattice).map(|_| "ok".into()));
    for dir in [Direction::Sup, Direction::Inf] {
        c.record(&format!("doob_meyer_{dir:?}").to_lowercase(), doob_meyer(&env, &s.lattice, dir).check(&s.lattice).map(|_| "ok".into()));
    }
    match marginal_value_report(&s.field, &s.derivs, &s.policy, &s.lattice, &starts, cfg.path_bound) {
        Ok(rep) => c.record(
            "marginal_value",
            if rep.passed() { Ok(format!("{} rows", rep.rows.len())) } else { Err(fail(rep.violations.join("; "))) },
        ),
        Err(SwingError::TooManyPaths { .. }) => c.skip("marginal_value", "history tree above path_bound"),
        Err(e) => c.record("marginal_value", Err(e)),
    }
    match build_mbar(&s.lattice, &s.field, &s.derivs, &s.policy) {
        Ok(m) => {
            let ok = m.report.gap >= -1e-10 && m.diagnostics.flags.is_empty();
            let detail = format!("gap {:e}", m.report.gap);
            c.record("duality", if ok { Ok(detail) } else { Err(fail(format!("{detail} {:?}", m.diagnostics.flags))) });
        }
        Err(SwingError::DualityHypothesis(lt)) => c.skip("duality", &format!("LT = {lt} <= 1")),
        Err(e) => c.record("duality", Err(e)),
    }
    out.failed = c.failed;
    let _ = writeln!(out.summary, "{}", if c.failed { "verify: FAIL" } else { "verify: PASS" });
    out.file("verify.txt", &c.table);
    Ok(())
}

fn check_oracle(cfg: &RunConfig, c: &mut Checks) {
    let small = match cfg.model {
        ModelKind::File(_) => cfg.lattice(),
        _ => cfg.lattice_at(cfg.oracle_steps).map(|l| (l, cfg.rate)),
    };
    let run = || -> Result<String> {
        let (lattice, rate) = small?;
        let volume = VolumeGrid::new(lattice.grid(), rate)?;
        let field = solve(&lattice, &volume)?;
        let i0 = volume.index_of(0.0)?;
        let brute = brute_force_value(&lattice, &volume, (0, 0, i0), DEFAULT_CAP_LOG2)?;
        let d = (brute.best - field.value(0, 0, i0)).abs();
        if d <= cfg.oracle_tol {
            Ok(format!("{} policies, diff {d:e}", brute.examined))
        } else {
            Err(fail(format!("solver off by {d:e}")))
        }
    };
    match run() {
        Err(SwingError::EnumerationCap { decision_points, .. }) => {
            c.skip("oracle", &format!("{decision_points} decision points above the cap"))
        }
        r => c.record("oracle", r),
    }
}

fn dual(cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let (_, rate) = cfg.lattice()?;
    let steps = match cfg.model {
        ModelKind::File(_) => vec![cfg.lattice()?.0.steps()],
        _ => cfg.k_list.clone(),
    };
    let study = duality_gap_study(|k| cfg.lattice_at(k), rate, &steps)?;
    out.file("gap_study.txt", &study.table());
    let s = solved(cfg)?;
    let m = build_mbar(&s.lattice, &s.field, &s.derivs, &s.policy)?;
    let mut trace = Table::new(&["t", "node", "y", "Mbar", "neg_Dminus"]);
    let vol = s.field.volume();
    for (k, slice) in m.pre_exit.iter().enumerate() {
        for (n, levels) in slice.iter().enumerate() {
            for (i, &g) in levels.iter().enumerate() {
                if g.is_finite() {
                    trace.push(vec![
                        fmt_num(s.lattice.grid().time(k)),
                        n.to_string(),
                        fmt_num(vol.level(i)),
                        fmt_num(g),
                        fmt_num(-s.derivs.dminus[k][n][i]),
                    ]);
                }
            }
        }
    }
    out.file("mbar_trace.txt", &trace);
    for r in &study.rows {
        let _ = writeln!(out.summary, "K={} primal={} dual={} gap={}", r.steps, fmt_num(r.primal), fmt_num(r.dual), fmt_num(r.gap));
    }
    for v in study.violations.iter().chain(&m.diagnostics.flags) {
        let _ = writeln!(out.summary, "violation: {v}");
    }
    out.failed = !study.passed() || !m.diagnostics.flags.is_empty();
    Ok(())
}

fn stopping(cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let s = solved(cfg)?;
    let starts = start_indices(cfg, &s)?;
    let rep = marginal_value_report(&s.field, &s.derivs, &s.policy, &s.lattice, &starts, cfg.path_bound)?;
    out.file("marginal_value.txt", &rep.table());
    for v in &rep.violations {
        let _ = writeln!(out.summary, "violation: {v}");
    }
    let _ = writeln!(out.summary, "{} rows, tolerance {}", rep.rows.len(), fmt_num(rep.tolerance));
    out.failed = !rep.passed();
    Ok(())
}

/// The binary-example regression bundle.
fn example(steps: usize, out: &mut Outcome) -> Result<()> {
    let cfg = RunConfig {
        model: ModelKind::Binary,
        steps,
        starts: vec![(0.0, 0.5), (0.0, 0.0), (0.0, 1.0)],
        k_list: vec![steps / 2, steps, steps * 2],
        ..RunConfig::default()
    };
    cfg.validate()?;
    price(&cfg, out)?;
    let mut rest = Outcome::default();
    stopping(&cfg, &mut rest)?;
    dual(&cfg, &mut rest)?;
    out.files.extend(rest.files);
    out.summary.push_str(&rest.summary);
    out.failed |= rest.failed;
    out.files.retain(|(name, _)| name != "summary.txt");
    out.files.push(("summary.txt".into(), out.summary.clone()));
    Ok(())
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::default();
    match command {
        Command::Price => price(cfg, &mut out)?,
        Command::Verify => verify(cfg, &mut out)?,
        Command::Dual => dual(cfg, &mut out)?,
        Command::Stopping => stopping(cfg, &mut out)?,
        Command::Example => example(cfg.steps, &mut out)?,
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_config() {
        let text = "# test\nmodel = constant\nsteps = 12\nstarts = 0:0, 1.5:0.25\nk_list = 12,24\n";
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.model, ModelKind::Constant);
        assert_eq!(cfg.starts, vec![(0.0, 0.0), (1.5, 0.25)]);
        assert!(RunConfig::parse("bogus = 1\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("steps = 1\nsteps = 2\n", Path::new(".")).is_err());
        assert!(RunConfig::parse("rollout_tol = 0\n", Path::new(".")).is_err());
        let err = RunConfig::parse("steps = 100\n", Path::new(".")).unwrap_err();
        assert_eq!(exit_code(&err), 1);
    }

    #[test]
    fn price_constant() {
        let cfg = RunConfig { model: ModelKind::Constant, steps: 12, ..RunConfig::default() };
        let out = run(Command::Price, &cfg).unwrap();
        assert!(out.summary.contains(&format!("J(0,0)={}", fmt_num(1.0))));
    }

    #[test]
    fn misaligned_grid_message() {
        let cfg = RunConfig { model: ModelKind::Constant, steps: 12, rate: 0.7, ..RunConfig::default() };
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, SwingError::MisalignedGrid { .. }));
    }
}
