//! Indexes a directory and ranks it against a probe image.
//!
//!     cargo run --example build_and_query [dir] [probe.png]
//!
//! Without arguments, a synthetic collection is written to a temporary
//! directory and its first image is used as the probe.

use std::path::PathBuf;

use chromaloc::eval::{generate_collection, SynthSpec};
use chromaloc::index::{build_index, load_image, load_index, query, save_index};
use chromaloc::matching::DistanceParams;
use chromaloc::signature::SignatureParams;

fn main() -> chromaloc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scratch = tempfile::tempdir().expect("temporary directory");
    let (dir, probe) = match args.as_slice() {
        [dir, probe, ..] => (PathBuf::from(dir), PathBuf::from(probe)),
        _ => {
            let dir = scratch.path().join("images");
            generate_collection(&SynthSpec::default(), &dir)?;
            let probe = dir.join("g00_v01.png");
            (dir, probe)
        }
    };

    let report = build_index(&dir, &SignatureParams::default())?;
    for s in &report.skipped {
        eprintln!("skipped {}: {}", s.path.display(), s.reason);
    }
    let path = scratch.path().join("collection.idx");
    save_index(&report.index, &path)?;
    let idx = load_index(&path)?;
    println!("{} images indexed, probe {}", idx.len(), probe.display());

    let img = load_image(&probe)?;
    for k in [0.5, 1.0] {
        println!("k = {k}");
        let result = query(&idx, &img, &DistanceParams::with_k(k), 8)?;
        for (rank, hit) in result.ranked.iter().enumerate() {
            println!("  {:2}  {:.6}  {}", rank + 1, hit.distance, hit.image_id);
        }
    }
    Ok(())
}
