//! Martingale dual bounds: constant martingales, the optimal martingale and
//! a refinement study of the duality gap.

use swing_core::dual::{build_mbar, dual_value, duality_gap_study, MartingaleField};
use swing_core::model::{binary_example, binomial, BinomialSpec, DriftKind, HistoryTree};
use swing_core::policy::extract_policy;
use swing_core::value::{derivatives, solve, VolumeGrid};

fn main() -> swing_core::Result<()> {
    let lattice = binary_example(96)?;
    let volume = VolumeGrid::new(lattice.grid(), 1.0)?;
    let tree = HistoryTree::from_lattice(&lattice, 16)?;
    for c in [1.0, 1.5, 2.0] {
        let r = dual_value(&lattice, &volume, &tree, &MartingaleField::constant(&tree, c)?)?;
        println!("M = {c}: dual {:.6}  primal {:.6}", r.dual, r.primal);
    }

    let field = solve(&lattice, &volume)?;
    let d = derivatives(&field);
    let mbar = build_mbar(&lattice, &field, &d, &extract_policy(&field, &d, &lattice))?;
    println!("optimal martingale: M(0) = {}  dual {}  gap {:e}", mbar.pre_exit[0][0][volume.index_of(0.0)?], mbar.report.dual, mbar.report.gap);
    println!("diagnostics: {:?}", mbar.diagnostics);

    let study = duality_gap_study(binary_example, 1.0, &[48, 96, 192])?;
    print!("{}", study.table().render());
    let study = duality_gap_study(
        |k| binomial(&BinomialSpec::scaled(DriftKind::Submartingale, 1.0, 3.0, k, 0.3, 0.3)),
        1.0,
        &[24, 48, 96],
    )?;
    print!("{}", study.table().render());
    Ok(())
}
