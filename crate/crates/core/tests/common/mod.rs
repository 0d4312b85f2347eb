#![allow(dead_code)]

use rand::Rng;
use swing_core::model::{Node, ScenarioLattice, TimeGrid, Transition, DEFAULT_P_EXPONENT};

/// Random lattice with 1 to `max_width` nodes per slice, random cashflows in
/// `[0, 3)` and random transition probabilities.
pub fn random_lattice<R: Rng>(rng: &mut R, horizon: f64, steps: usize, max_width: usize) -> ScenarioLattice {
    let mut slices = Vec::new();
    let mut width = 1;
    for k in 0..=steps {
        let next = if k == steps { 0 } else { rng.gen_range(1..=max_width) };
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); width];
        if next > 0 {
            for c in 0..next {
                children[rng.gen_range(0..width)].push(c);
            }
            for list in children.iter_mut().filter(|l| l.is_empty()) {
                list.push(rng.gen_range(0..next));
            }
        }
        let nodes = children
            .into_iter()
            .map(|list| {
                let x = (rng.gen_range(0.0..3.0f64) * 64.0).round() / 64.0;
                if list.is_empty() {
                    return Node::terminal(x);
                }
                let raw: Vec<f64> = list.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
                let head: f64 = probs[1..].iter().sum();
                probs[0] = 1.0 - head;
                Node::new(x, list.into_iter().zip(probs).map(|(child, prob)| Transition { child, prob }).collect())
            })
            .collect();
        slices.push(nodes);
        width = next;
    }
    ScenarioLattice::new(TimeGrid::new(horizon, steps).unwrap(), slices, true, DEFAULT_P_EXPONENT).unwrap()
}
