mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swing_core::dual::{dual_value, MartingaleField};
use swing_core::model::io::{read_lattice, write_lattice};
use swing_core::model::{HistoryTree, PathEnsemble, ScenarioLattice};
use swing_core::oracle::{brute_force_value, DEFAULT_CAP_LOG2};
use swing_core::policy::{extract_policy, rollout};
use swing_core::stopping::{doob_meyer, snell, Direction};
use swing_core::value::{derivatives, solve, VolumeGrid};
use swing_core::SwingError;

fn case(seed: u64, steps: usize, per_unit: usize) -> (ScenarioLattice, VolumeGrid) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice = common::random_lattice(&mut rng, 2.0, steps, 3);
    let rate = steps as f64 / (per_unit as f64 * 2.0);
    let volume = VolumeGrid::new(lattice.grid(), rate).unwrap();
    (lattice, volume)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn solver_matches_enumeration(seed in any::<u64>(), steps in 1usize..5, pu in 1usize..4) {
        let per_unit = pu.min(steps);
        let (lattice, volume) = case(seed, steps, per_unit);
        let field = solve(&lattice, &volume).unwrap();
        let i0 = volume.index_of(0.0).unwrap();
        match brute_force_value(&lattice, &volume, (0, 0, i0), DEFAULT_CAP_LOG2) {
            Ok(b) => prop_assert!((b.best - field.value(0, 0, i0)).abs() <= 1e-12),
            Err(SwingError::EnumerationCap { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn rollout_attains_the_value(seed in any::<u64>(), steps in 1usize..7, pu in 1usize..6) {
        let per_unit = pu.min(steps);
        let (lattice, volume) = case(seed, steps, per_unit);
        let field = solve(&lattice, &volume).unwrap();
        let d = derivatives(&field);
        let policy = extract_policy(&field, &d, &lattice);
        policy.check_feasibility().unwrap();
        let paths = PathEnsemble::exhaustive(&lattice, 1 << 14).unwrap();
        for y in [0.0, 0.5] {
            if let Ok(i) = volume.index_of(y) {
                let r = rollout(&policy, &lattice, &paths, (0, y)).unwrap();
                prop_assert!((r.mean - field.value(0, 0, i)).abs() <= 1e-10);
                r.check_inclusion(&lattice, &d).unwrap();
                r.check_saturation(&volume).unwrap();
            }
        }
    }

    #[test]
    fn weak_duality_on_random_martingales(seed in any::<u64>(), steps in 2usize..6, weights in prop::collection::vec(0.0f64..4.0, 64)) {
        // per_unit below steps keeps L T > 1
        let (lattice, volume) = case(seed, steps, steps - 1);
        let tree = HistoryTree::from_lattice(&lattice, 1 << 12).unwrap();
        let m = MartingaleField::from_terminal(&tree, |h| weights[h % weights.len()]).unwrap();
        let r = dual_value(&lattice, &volume, &tree, &m).unwrap();
        prop_assert!(r.gap >= -1e-10, "gap {}", r.gap);
    }

    #[test]
    fn snell_and_doob_meyer(seed in any::<u64>(), steps in 1usize..8) {
        let (lattice, _) = case(seed, steps, 1);
        let env = snell(&lattice);
        env.check_invariants(&lattice).unwrap();
        for dir in [Direction::Sup, Direction::Inf] {
            doob_meyer(&env, &lattice, dir).check(&lattice).unwrap();
        }
    }

    #[test]
    fn lattice_text_round_trip(seed in any::<u64>(), steps in 1usize..8) {
        let (lattice, volume) = case(seed, steps, 1);
        let text = write_lattice(&lattice, volume.rate());
        let (back, rate) = read_lattice(&text).unwrap();
        prop_assert_eq!(&back, &lattice);
        prop_assert_eq!(rate, volume.rate());
        prop_assert_eq!(write_lattice(&back, rate), text);
    }
}
