//! Writing a lattice to the text format, reading it back and pricing it.

use swing_core::model::io::{read_lattice, write_lattice};
use swing_core::model::{binomial, BinomialSpec, DriftKind};
use swing_core::value::{solve, VolumeGrid};

fn main() -> swing_core::Result<()> {
    let lattice = binomial(&BinomialSpec::scaled(DriftKind::Martingale, 1.0, 2.0, 4, 0.0, 0.5))?;
    let text = write_lattice(&lattice, 1.0);
    print!("{text}");
    let (back, rate) = read_lattice(&text)?;
    assert_eq!(back, lattice);
    let volume = VolumeGrid::new(back.grid(), rate)?;
    println!("J(0,0) = {}", solve(&back, &volume)?.value(0, 0, volume.index_of(0.0)?));
    Ok(())
}
