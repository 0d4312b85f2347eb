//! Value, marginal value and exit times of the two-branch example.

use swing_core::model::{binary_example, PathEnsemble};
use swing_core::oracle::ClosedForm;
use swing_core::policy::{exit_time, extract_policy, rollout};
use swing_core::value::{derivatives, solve, VolumeGrid};

fn main() -> swing_core::Result<()> {
    for steps in [48, 96, 192] {
        let lattice = binary_example(steps)?;
        let volume = VolumeGrid::new(lattice.grid(), 1.0)?;
        let field = solve(&lattice, &volume)?;
        let d = derivatives(&field);
        let half = volume.index_of(0.5)?;
        println!(
            "K={steps:>3}  J(0,0.5)={:.6}  closed form {:.6}  -D-J={:.6}  -D+J={:.6}",
            field.value(0, 0, half),
            ClosedForm::BinaryExample.value(0.0, 0.5)?,
            -d.dminus[0][0][half],
            -d.dplus[0][0][half],
        );
    }

    let lattice = binary_example(96)?;
    let volume = VolumeGrid::new(lattice.grid(), 1.0)?;
    let field = solve(&lattice, &volume)?;
    let policy = extract_policy(&field, &derivatives(&field), &lattice);
    let paths = PathEnsemble::exhaustive(&lattice, 16)?;
    let r = rollout(&policy, &lattice, &paths, (0, 0.5))?;
    println!("rollout mean from (0, 0.5): {}", r.mean);
    for p in &r.paths {
        let b = exit_time(p, &volume, lattice.grid());
        println!(
            "  path {}: X(3)={:.1}  sigma_U={}  sigma_L={}  sigma={}  X(sigma)={}",
            p.path_id,
            lattice.cashflow(96, p.nodes[96]),
            b.sigma_u,
            b.sigma_l,
            b.sigma,
            lattice.cashflow(lattice.grid().index_of(b.sigma)?, p.nodes[lattice.grid().index_of(b.sigma)?]),
        );
    }
    Ok(())
}
