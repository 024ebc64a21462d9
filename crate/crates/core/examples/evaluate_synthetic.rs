//! Scores retrieval on a synthetic collection with and without color locations.
//!
//!     cargo run --release --example evaluate_synthetic [seed] [top_k]

use chromaloc::eval::{evaluate, ground_truth, synthesize, SynthSpec};
use chromaloc::index::Index;
use chromaloc::matching::DistanceParams;
use chromaloc::signature::{extract_signature, SignatureParams};

fn main() -> chromaloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args
        .next()
        .map_or(42, |s| s.parse().expect("seed is an integer"));
    let top_k = args
        .next()
        .map_or(9, |s| s.parse().expect("top_k is an integer"));
    let spec = SynthSpec {
        seed,
        ..SynthSpec::default()
    };
    let images = synthesize(&spec)?;
    let params = SignatureParams::default();
    let sigs = images
        .iter()
        .map(|i| extract_signature(i.image_id.clone(), &i.image, &params))
        .collect::<chromaloc::Result<Vec<_>>>()?;
    let idx = Index::new(&params, sigs)?;
    let gt = ground_truth(&images)?;

    for k in [1.0, 0.5] {
        let report = evaluate(&idx, &gt, &DistanceParams::with_k(k), top_k)?;
        println!(
            "k = {k}: precision {:.4}, recall {:.4} over {} queries ({} distractors)",
            report.avg_precision,
            report.avg_recall,
            report.per_query.len(),
            report.singletons
        );
    }
    Ok(())
}
