//! The solver against brute-force enumeration of every bang-bang policy on
//! small random lattices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swing_core::model::{Node, ScenarioLattice, TimeGrid, Transition, DEFAULT_P_EXPONENT};
use swing_core::oracle::{brute_force_value, DEFAULT_CAP_LOG2};
use swing_core::value::{solve, VolumeGrid};

fn random_lattice(rng: &mut ChaCha8Rng, steps: usize) -> swing_core::Result<ScenarioLattice> {
    let mut slices = Vec::new();
    let mut width = 1;
    for k in 0..=steps {
        let next = if k == steps { 0 } else { rng.gen_range(1..=3) };
        let nodes = (0..width)
            .map(|n| {
                let x = rng.gen_range(0.0..3.0);
                if next == 0 {
                    return Node::terminal(x);
                }
                // each child is reached from some node
                let mut children: Vec<usize> = (0..next).filter(|c| c % width == n).collect();
                if children.is_empty() {
                    children.push(rng.gen_range(0..next));
                }
                let p = 1.0 / children.len() as f64;
                Node::new(x, children.into_iter().map(|child| Transition { child, prob: p }).collect())
            })
            .collect();
        slices.push(nodes);
        width = next;
    }
    ScenarioLattice::new(TimeGrid::new(1.0, steps)?, slices, true, DEFAULT_P_EXPONENT)
}

fn main() -> swing_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..5 {
        let lattice = random_lattice(&mut rng, 4)?;
        let volume = VolumeGrid::new(lattice.grid(), 2.0)?;
        let i0 = volume.index_of(0.0)?;
        let solver = solve(&lattice, &volume)?.value(0, 0, i0);
        let brute = brute_force_value(&lattice, &volume, (0, 0, i0), DEFAULT_CAP_LOG2)?;
        println!("trial {trial}: solver {solver:.15}  brute force {:.15}  ({} policies)", brute.best, brute.examined);
    }
    Ok(())
}
