//! Maps a handful of colors to their histogram bins and Lab coordinates.
//!
//!     cargo run --example quantize_colors [r g b ...]
//!
//! Extra arguments are read as 0-255 RGB triples.

use chromaloc::colorspace::{delta_e, quantize_rgb, BinClass, Rgb};

fn describe(p: Rgb) -> String {
    let hsv = p.to_hsv();
    let lab = p.to_lab();
    let bin = quantize_rgb(p);
    let class = match bin.class() {
        BinClass::Black => "black".to_string(),
        BinClass::Grey => "grey".to_string(),
        BinClass::White => "white".to_string(),
        BinClass::Chromatic { sector, quadrant } => {
            format!("hue sector {sector}, quadrant {quadrant}")
        }
    };
    format!(
        "rgb {:?}  hsv ({:6.1}, {:.2}, {:.2})  lab ({:6.2}, {:7.2}, {:7.2})  bin {:2} ({class})",
        p.to_u8(),
        hsv.h,
        hsv.s,
        hsv.v,
        lab.l,
        lab.a,
        lab.b,
        bin.index()
    )
}

fn main() {
    let args: Vec<u8> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("RGB components are integers 0-255"))
        .collect();
    let colors: Vec<Rgb> = if args.is_empty() {
        vec![
            Rgb::from_u8(0, 0, 0),
            Rgb::from_u8(128, 128, 128),
            Rgb::from_u8(255, 255, 255),
            Rgb::from_u8(220, 30, 30),
            Rgb::from_u8(250, 200, 40),
            Rgb::from_u8(40, 160, 60),
            Rgb::from_u8(30, 60, 200),
        ]
    } else {
        assert!(args.len().is_multiple_of(3), "pass RGB triples");
        args.chunks(3)
            .map(|c| Rgb::from_u8(c[0], c[1], c[2]))
            .collect()
    };
    for &c in &colors {
        println!("{}", describe(c));
    }
    if colors.len() >= 2 {
        println!(
            "ΔE between the first two: {:.3}",
            delta_e(colors[0].to_lab(), colors[1].to_lab())
        );
    }
}
