//! Late exercise of a submartingale and early exercise of a supermartingale
//! against the solver and the window closed form.

use swing_core::model::{binomial, BinomialSpec, DriftKind, PathEnsemble};
use swing_core::oracle::{window_value, Window};
use swing_core::policy::{extract_policy, rollout, PolicyField};
use swing_core::value::{derivatives, solve, VolumeGrid};

fn main() -> swing_core::Result<()> {
    let cases = [
        (DriftKind::Submartingale, 0.3, Window::Late),
        (DriftKind::Supermartingale, -0.3, Window::Early),
    ];
    for (kind, mu, window) in cases {
        let spec = BinomialSpec::scaled(kind, 1.0, 3.0, 12, mu, 0.3).non_recombining();
        let lattice = binomial(&spec)?;
        let volume = VolumeGrid::new(lattice.grid(), 0.5)?;
        let field = solve(&lattice, &volume)?;
        let optimal = extract_policy(&field, &derivatives(&field), &lattice);
        let fixed = match window {
            Window::Late => PolicyField::late_exercise(&lattice, &volume),
            Window::Early => PolicyField::early_exercise(&lattice, &volume),
        };
        let paths = PathEnsemble::exhaustive(&lattice, 1 << 13)?;
        for y in [0.0, 0.5] {
            let i = volume.index_of(y)?;
            println!(
                "{kind:?} y={y}: solver {:.12}  {window:?} rollout {:.12}  optimal rollout {:.12}  window sum {:.12}",
                field.value(0, 0, i),
                rollout(&fixed, &lattice, &paths, (0, y))?.mean,
                rollout(&optimal, &lattice, &paths, (0, y))?.mean,
                window_value(&lattice, &volume, window, (0, 0, i))?,
            );
        }
    }
    Ok(())
}
