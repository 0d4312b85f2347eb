//! Marginal value of volume next to the constrained stopping problems,
//! including the gap between predictable and unrestricted stopping.

use swing_core::model::{binary_example, HistoryTree};
use swing_core::policy::extract_policy;
use swing_core::stopping::{
    marginal_value_report, optimal_predictable_stop, optimal_stop, reachable_sets, Constraint, Direction,
};
use swing_core::value::{derivatives, solve, VolumeGrid};

fn main() -> swing_core::Result<()> {
    let lattice = binary_example(96)?;
    let volume = VolumeGrid::new(lattice.grid(), 1.0)?;
    let field = solve(&lattice, &volume)?;
    let d = derivatives(&field);
    let policy = extract_policy(&field, &d, &lattice);

    let tree = HistoryTree::from_lattice(&lattice, 1 << 10)?;
    let sets = reachable_sets(&policy, &tree, volume.index_of(0.5)?);
    let (_, sup_a) = optimal_predictable_stop(&lattice, &tree, &sets, Constraint::A, Direction::Sup)?;
    let (_, inf_b) = optimal_predictable_stop(&lattice, &tree, &sets, Constraint::B, Direction::Inf)?;
    let (rule, anytime) = optimal_stop(&lattice, &tree, &sets, Constraint::A, Direction::Sup, false)?;
    println!("predictable sup over A: {sup_a}");
    println!("predictable inf over B: {inf_b}");
    println!("unrestricted sup over A: {anytime} (predictable: {})", rule.is_predictable(&tree));
    println!("E[X(sigma)]: {}", sets.expected_exit_value(&tree, &lattice));

    let starts = [(0, 0.5), (0, 0.0), (0, 1.0), (0, -2.0), (80, 0.0)];
    let report = marginal_value_report(&field, &d, &policy, &lattice, &starts, 1 << 10)?;
    print!("{}", report.table().render());
    println!("violations: {}", report.violations.len());
    Ok(())
}
