//! Mollified approximation of the exercise rule and its convergence towards
//! the bang-bang rollout.

use swing_core::model::{binary_example, PathEnsemble};
use swing_core::policy::{extract_policy, mollified_iterate, rollout, ExerciseRegions};
use swing_core::value::{derivatives, solve, VolumeGrid};

fn main() -> swing_core::Result<()> {
    let lattice = binary_example(96)?;
    let volume = VolumeGrid::new(lattice.grid(), 1.0)?;
    let field = solve(&lattice, &volume)?;
    let d = derivatives(&field);
    let regions = ExerciseRegions::compute(&field, &d, &lattice);
    let policy = extract_policy(&field, &d, &lattice);
    let paths = PathEnsemble::exhaustive(&lattice, 16)?;
    let r = rollout(&policy, &lattice, &paths, (0, 0.5))?;
    for p in &r.paths {
        println!("path {}", p.path_id);
        for m in mollified_iterate(&regions, &p.nodes, (0, 0.5), 5)? {
            let dev = m.y.iter().zip(&p.y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            println!(
                "  n={} window={} pitches  clamped={}  y(1.5)={:.4}  y(3)={:.4}  sup deviation {:.4}",
                m.n, m.window, m.clamped, m.y[48], m.y[96], dev
            );
        }
    }
    println!("2 L dt = {}", 2.0 * lattice.dt());
    Ok(())
}
