//! Breaks the distance between two images into its histogram and location parts.
//!
//!     cargo run --example compare_images [a.png b.png] [k]
//!
//! Without image arguments, compares a synthetic card with its 90° rotation
//! and with a layout distractor that has identical color proportions.

use chromaloc::eval::{synthesize, SynthSpec};
use chromaloc::index::load_image;
use chromaloc::matching::{combined_distance, hist_distance, location_breakdown, DistanceParams};
use chromaloc::signature::{extract_signature, ImageBuffer, Signature, SignatureParams};

fn report(a: &Signature, b: &Signature, dp: &DistanceParams) -> chromaloc::Result<()> {
    let hist = hist_distance(&a.histogram, &b.histogram, dp.hist_metric)?;
    let loc = location_breakdown(a, b, dp);
    println!("{} vs {}", a.image_id, b.image_id);
    println!("  histogram distance {hist:.6}");
    if let Some(t) = loc.transform {
        println!(
            "  transform: scale {:.3}, rotation {:.1}°, shift ({:.3}, {:.3}){}",
            t.scale(),
            t.rotation().to_degrees(),
            t.tx,
            t.ty,
            if loc.degenerate_fallback {
                " (translation only)"
            } else {
                ""
            }
        );
    }
    for term in &loc.terms {
        println!(
            "  bin {:2}: point {:.4}  color {:.4}",
            term.query.bin.index(),
            term.point_term,
            term.color_term
        );
    }
    println!("  penalized locations {}", loc.penalized_locations);
    println!("  location distance {:.6}", loc.total);
    println!(
        "  combined (k = {}) {:.6}",
        dp.k,
        combined_distance(a, b, dp)?
    );
    Ok(())
}

fn main() -> chromaloc::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let params = SignatureParams::default();
    let sig = |id: &str, img: &ImageBuffer| extract_signature(id, img, &params);
    let k = args
        .get(2)
        .map_or(0.5, |k| k.parse().expect("k is a number"));
    let dp = DistanceParams::with_k(k);

    if args.len() >= 2 {
        let a = sig(&args[0], &load_image(&args[0])?)?;
        let b = sig(&args[1], &load_image(&args[1])?)?;
        return report(&a, &b, &dp);
    }

    let images = synthesize(&SynthSpec::default())?;
    let card = &images[0];
    let distractor = images
        .iter()
        .find(|i| i.source_group.as_deref() == Some(card.group.as_str()))
        .expect("every card has a distractor");
    let base = sig(&card.image_id, &card.image)?;
    report(
        &base,
        &sig("rotated 90°", &card.image.rotate_quarter_turns(1))?,
        &dp,
    )?;
    report(&base, &sig(&distractor.image_id, &distractor.image)?, &dp)?;
    Ok(())
}
