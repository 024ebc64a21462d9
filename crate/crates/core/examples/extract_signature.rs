//! Prints the histogram and color locations of an image.
//!
//!     cargo run --example extract_signature [image.png]
//!
//! Without an argument a small synthetic picture is used.

use chromaloc::colorspace::Rgb;
use chromaloc::index::load_image;
use chromaloc::signature::{extract_signature, ImageBuffer, SignatureParams};

fn demo_image() -> ImageBuffer {
    ImageBuffer::from_fn(120, 80, |x, y| {
        if x < 40 && y < 40 {
            Rgb::from_u8(210, 40, 40)
        } else if x > 80 && y > 30 {
            Rgb::from_u8(40, 80, 200)
        } else {
            Rgb::from_u8(245, 240, 230)
        }
    })
    .expect("non-empty image")
}

fn main() -> chromaloc::Result<()> {
    let (id, img) = match std::env::args().nth(1) {
        Some(path) => (path.clone(), load_image(&path)?),
        None => ("demo".to_string(), demo_image()),
    };
    let sig = extract_signature(id, &img, &SignatureParams::default())?;
    println!(
        "{} ({}x{})",
        sig.image_id, sig.source_dims.0, sig.source_dims.1
    );
    println!("histogram (non-zero bins):");
    for bin in sig.histogram.ranked_bins() {
        let w = sig.histogram.weight(bin);
        if w > 0.0 {
            println!("  bin {:2}  {:.4}", bin.index(), w);
        }
    }
    println!("locations:");
    for loc in &sig.locations {
        println!(
            "  bin {:2}  weight {:.4}  center ({:.3}, {:.3})  lab ({:.1}, {:.1}, {:.1})",
            loc.bin.index(),
            loc.weight,
            loc.center.x,
            loc.center.y,
            loc.mean_color.l,
            loc.mean_color.a,
            loc.mean_color.b
        );
    }
    Ok(())
}
