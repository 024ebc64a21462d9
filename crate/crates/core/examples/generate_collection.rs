//! Writes a seeded synthetic test collection with its ground truth.
//!
//!     cargo run --example generate_collection <out_dir> [seed]

use chromaloc::eval::{generate_collection, SynthSpec, GROUND_TRUTH_FILE};

fn main() -> chromaloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic".to_string());
    let seed = args
        .next()
        .map_or(42, |s| s.parse().expect("seed is an integer"));
    let spec = SynthSpec {
        seed,
        ..SynthSpec::default()
    };
    let gt = generate_collection(&spec, &out)?;
    let sizes = gt.group_sizes();
    println!(
        "{} images in {} groups written to {out}/",
        gt.len(),
        sizes.len()
    );
    println!("ground truth: {out}/{GROUND_TRUTH_FILE}");
    Ok(())
}
