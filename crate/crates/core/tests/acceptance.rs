//! Acceptance criteria. Runs as a plain binary (`harness = false`) and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use chromaloc::colorspace::{
    delta_e, hue_sector, quantize, rgb_to_lab, BinClass, Hsv, Lab, QuantBin, Rgb, HUE_BOUNDARIES,
};
use chromaloc::eval::{self, evaluate, precision, recall, synth, SynthImage, SynthSpec};
use chromaloc::index::{build_index, load_index, save_index, Index, QueryResult};
use chromaloc::matching::{
    combined_distance, hist_distance, location_breakdown, location_distance, DistanceParams,
    HistMetric,
};
use chromaloc::signature::{extract_signature, ImageBuffer, Signature, SignatureParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Independent cell membership: the 47 cells written as disjoint predicates.
fn cell_predicates(c: Hsv) -> Vec<usize> {
    let mut hits = Vec::new();
    if c.v < 0.2 {
        hits.push(0);
    }
    if c.v >= 0.2 && c.s < 0.2 && c.v < 0.85 {
        hits.push(1);
    }
    if c.v >= 0.85 && c.s < 0.2 {
        hits.push(2);
    }
    if c.v >= 0.2 && c.s >= 0.2 {
        let edges: Vec<(f64, f64)> = (0..11)
            .map(|i| {
                if i == 0 {
                    (335.0, 376.0)
                } else {
                    (HUE_BOUNDARIES[i - 1], HUE_BOUNDARIES[i])
                }
            })
            .collect();
        for (sector, (lo, hi)) in edges.iter().enumerate() {
            let h = if sector == 0 && c.h < 16.0 {
                c.h + 360.0
            } else {
                c.h
            };
            if h < *lo || h >= *hi {
                continue;
            }
            for (quadrant, (s_hi, v_hi)) in
                [(false, false), (false, true), (true, false), (true, true)]
                    .into_iter()
                    .enumerate()
            {
                if (c.s >= 0.65) == s_hi && (c.v >= 0.7) == v_hi {
                    hits.push(3 + sector * 4 + quadrant);
                }
            }
        }
    }
    hits
}

fn quantization_totality() -> Outcome {
    let start = Instant::now();
    let mut seen = BTreeSet::new();
    let mut points = 0usize;
    for i in 0..100 {
        let h = f64::from(i) * 3.6;
        for j in 0..100 {
            let s = f64::from(j) / 99.0;
            for l in 0..100 {
                let v = f64::from(l) / 99.0;
                let bin = quantize(Hsv::new(h, s, v));
                seen.insert(bin);
                points += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || {
        format!("sweep took {elapsed:?}")
    })?;
    ensure(seen.len() == 47, || format!("{} distinct bins", seen.len()))?;

    // Exactly one cell per grid point, and it is the quantizer's.
    for i in 0..100 {
        let h = f64::from(i) * 3.6;
        for j in 0..100 {
            let s = f64::from(j) / 99.0;
            for l in 0..100 {
                let c = Hsv::new(h, s, f64::from(l) / 99.0);
                let hits = cell_predicates(c);
                ensure(hits.len() == 1 && hits[0] == quantize(c).index(), || {
                    format!("{c:?}: cells {hits:?}, quantizer {}", quantize(c).index())
                })?;
            }
        }
    }

    let probes = [
        (Hsv::new(200.0, 0.9, 0.199), QuantBin::BLACK),
        (Hsv::new(10.0, 0.0, 0.0), QuantBin::BLACK),
        (Hsv::new(120.0, 1.0, 0.1999999), QuantBin::BLACK),
        (Hsv::new(30.0, 0.199, 0.5), QuantBin::GREY),
        (Hsv::new(300.0, 0.0, 0.2), QuantBin::GREY),
        (Hsv::new(90.0, 0.1999999, 0.849), QuantBin::GREY),
        (Hsv::new(45.0, 0.1, 0.85), QuantBin::WHITE),
        (Hsv::new(0.0, 0.0, 1.0), QuantBin::WHITE),
    ];
    for (c, want) in probes {
        ensure(quantize(c) == want, || {
            format!("{c:?} -> {:?}, want {want:?}", quantize(c))
        })?;
    }
    let chroma_probes = [Hsv::new(200.0, 0.2, 0.2), Hsv::new(10.0, 0.2, 0.9)];
    for c in chroma_probes {
        ensure(quantize(c).is_chromatic(), || {
            format!("{c:?} should be chromatic")
        })?;
    }
    ensure(
        matches!(
            quantize(Hsv::new(50.0, 0.9, 0.9)).class(),
            BinClass::Chromatic {
                sector: 3,
                quadrant: 3
            }
        ) && hue_sector(359.9) == hue_sector(0.1),
        || "chromatic layout".into(),
    )?;
    Ok(format!(
        "{points} points, 47 bins, 10 boundary probes, sweep {elapsed:.2?}"
    ))
}

fn delta_e_correctness() -> Outcome {
    let black = rgb_to_lab(Rgb::new(0.0, 0.0, 0.0));
    let white = rgb_to_lab(Rgb::new(1.0, 1.0, 1.0));
    ensure(delta_e(black, white) == 100.0, || {
        format!("ΔE(black, white) = {}", delta_e(black, white))
    })?;
    ensure(
        (white.l - 100.0).abs() <= 1e-6 && white.a.abs() <= 1e-6 && white.b.abs() <= 1e-6,
        || format!("white -> {white:?}"),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut lab = || {
        Lab::new(
            rng.random_range(0.0..100.0),
            rng.random_range(-128.0..127.0),
            rng.random_range(-128.0..127.0),
        )
    };
    for _ in 0..1000 {
        let (x, y, z) = (lab(), lab(), lab());
        let dxy = delta_e(x, y);
        ensure(dxy > 0.0 && delta_e(x, x) == 0.0, || "identity".into())?;
        ensure(dxy == delta_e(y, x), || "symmetry".into())?;
        ensure(dxy <= delta_e(x, z) + delta_e(z, y) + 1e-9, || {
            "triangle".into()
        })?;
    }
    Ok("ΔE(black, white) = 100, white = (100, 0, 0), 1000 triples".into())
}

fn default_images() -> Vec<SynthImage> {
    synth::synthesize(&SynthSpec::default()).expect("default collection")
}

fn histogram_normalization() -> Outcome {
    let images = default_images();
    let params = SignatureParams::default();
    let mut worst = 0.0f64;
    for img in &images {
        let sig = extract_signature(img.image_id.clone(), &img.image, &params)
            .map_err(|e| e.to_string())?;
        let err = (sig.histogram.total() - 1.0).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || {
            format!("{}: Σ = {}", img.image_id, sig.histogram.total())
        })?;
    }
    Ok(format!(
        "{} images, max |Σ - 1| = {worst:.1e}",
        images.len()
    ))
}

fn worked_precision_recall() -> Outcome {
    let p1 = precision(15, 0).map_err(|e| e.to_string())?;
    let r1 = recall(15, 1).map_err(|e| e.to_string())?;
    let p2 = precision(14, 1).map_err(|e| e.to_string())?;
    let r2 = recall(14, 3).map_err(|e| e.to_string())?;
    let shown = [p1, r1, p2, r2].map(|v| format!("{v:.2}"));
    ensure(p1 == 1.0, || format!("precision(15, 0) = {p1}"))?;
    ensure(shown == ["1.00", "0.94", "0.93", "0.82"], || {
        format!("{shown:?}")
    })?;
    Ok(format!(
        "P={} R={} / P={} R={}",
        shown[0], shown[1], shown[2], shown[3]
    ))
}

/// Base cards of a collection with enough groups for the invariance checks.
fn base_cards() -> Vec<SynthImage> {
    let spec = SynthSpec {
        seed: 42,
        groups: 24,
        variants_per_group: 2,
        ..SynthSpec::default()
    };
    synth::synthesize(&spec)
        .expect("collection")
        .into_iter()
        .filter(|i| i.applied.is_empty() && i.source_group.is_none())
        .collect()
}

fn index_of(images: &[SynthImage]) -> Index {
    let params = SignatureParams::default();
    let sigs: Vec<Signature> = images
        .iter()
        .map(|i| extract_signature(i.image_id.clone(), &i.image, &params).expect("signature"))
        .collect();
    Index::new(&params, sigs).expect("index")
}

fn to_8bit(img: &ImageBuffer) -> ImageBuffer {
    ImageBuffer::from_rgb8(&img.to_rgb8()).expect("8-bit copy")
}

fn scale_invariance() -> Outcome {
    let cards = base_cards();
    let idx = index_of(&cards);
    let dp = DistanceParams::with_k(0.5);
    let mut worst = 0.0f64;
    for card in &cards {
        let small = to_8bit(
            &card
                .image
                .resize_area(card.image.width() / 2, card.image.height() / 2)
                .map_err(|e| e.to_string())?,
        );
        let res = chromaloc::index::query(&idx, &small, &dp, 3).map_err(|e| e.to_string())?;
        let top = &res.ranked[0];
        worst = worst.max(top.distance);
        ensure(top.image_id == card.image_id, || {
            format!(
                "{}: rank 1 is {} ({})",
                card.image_id, top.image_id, top.distance
            )
        })?;
        ensure(top.distance < 0.05, || {
            format!("{}: distance {}", card.image_id, top.distance)
        })?;
    }
    ensure(cards.len() >= 20, || format!("only {} images", cards.len()))?;
    Ok(format!(
        "{} images, worst rank-1 distance {worst:.4}",
        cards.len()
    ))
}

fn rotation_invariance() -> Outcome {
    let cards = base_cards();
    let idx = index_of(&cards);
    let dp = DistanceParams::with_k(0.5);
    let mut worst_term = 0.0f64;
    let mut checked_terms = 0;
    for card in &cards {
        for turns in [1, 2] {
            let turned = card.image.rotate_quarter_turns(turns);
            let probe = idx
                .probe_signature("probe", &turned)
                .map_err(|e| e.to_string())?;
            let res = idx.rank(&probe, &dp, 1, None).map_err(|e| e.to_string())?;
            ensure(res.ranked[0].image_id == card.image_id, || {
                format!(
                    "{} rotated {}°: rank 1 is {}",
                    card.image_id,
                    90 * turns,
                    res.ranked[0].image_id
                )
            })?;
            let original = idx.get(&card.image_id).expect("indexed");
            let breakdown = location_breakdown(&probe, original, &dp);
            ensure(breakdown.penalized_locations == 0, || {
                format!("{}: unmatched locations", card.image_id)
            })?;
            for t in &breakdown.terms {
                worst_term = worst_term.max(t.point_term);
                checked_terms += 1;
                ensure(t.point_term < 0.02, || {
                    format!(
                        "{} rotated {}°: point term {}",
                        card.image_id,
                        90 * turns,
                        t.point_term
                    )
                })?;
            }
        }
    }
    Ok(format!(
        "{} images x 2 rotations, {checked_terms} point terms, worst {worst_term:.2e}",
        cards.len()
    ))
}

fn localization_discrimination() -> Outcome {
    let spec = SynthSpec {
        seed: 42,
        groups: 8,
        variants_per_group: 2,
        ..SynthSpec::default()
    };
    let images = synth::synthesize(&spec).map_err(|e| e.to_string())?;
    let params = SignatureParams::default();
    let half = DistanceParams::with_k(0.5);
    let hist_only = DistanceParams::with_k(1.0);
    let mut pairs = 0;
    let mut min_loc = f64::INFINITY;
    for d in images.iter().filter(|i| i.source_group.is_some()) {
        let source = images
            .iter()
            .find(|i| Some(&i.group) == d.source_group.as_ref() && i.applied.is_empty())
            .expect("source card");
        let pair = [source.clone(), d.clone()];
        let idx = index_of(&pair);
        let sa = idx.get(&source.image_id).expect("source");
        let sb = idx.get(&d.image_id).expect("distractor");
        let raw_a = extract_signature("a", &source.image, &params).map_err(|e| e.to_string())?;
        let raw_b = extract_signature("b", &d.image, &params).map_err(|e| e.to_string())?;
        let hd = hist_distance(&raw_a.histogram, &raw_b.histogram, HistMetric::Intersection)
            .map_err(|e| e.to_string())?;
        let ld = location_distance(sa, sb, &half);
        min_loc = min_loc.min(ld);
        ensure(hd < 1e-9, || format!("{}: hist distance {hd}", d.image_id))?;
        ensure(ld > 0.1, || {
            format!("{}: location distance {ld}", d.image_id)
        })?;

        let ranked_half = idx.rank(sa, &half, 2, None).map_err(|e| e.to_string())?;
        ensure(
            ranked_half.ranked[0].image_id == source.image_id
                && ranked_half.ranked[1].distance > ranked_half.ranked[0].distance,
            || format!("{}: k=0.5 does not separate", d.image_id),
        )?;
        let self_d = combined_distance(sa, sa, &hist_only).map_err(|e| e.to_string())?;
        let cross_d = combined_distance(sa, sb, &hist_only).map_err(|e| e.to_string())?;
        ensure((cross_d - self_d).abs() < 1e-9, || {
            format!("{}: k=1 separates ({self_d} vs {cross_d})", d.image_id)
        })?;
        pairs += 1;
    }
    ensure(pairs >= 5, || format!("only {pairs} pairs"))?;
    Ok(format!("{pairs} pairs, min location distance {min_loc:.3}"))
}

fn end_to_end_quality() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (with_loc, baseline, n_images) = pool.install(|| -> Result<_, String> {
        let gt = eval::generate_collection(&SynthSpec::default(), dir.path())
            .map_err(|e| e.to_string())?;
        let report =
            build_index(dir.path(), &SignatureParams::default()).map_err(|e| e.to_string())?;
        ensure(report.skipped.is_empty(), || {
            format!("skipped {:?}", report.skipped)
        })?;
        let idx = report.index;
        let with_loc =
            evaluate(&idx, &gt, &DistanceParams::with_k(0.5), 9).map_err(|e| e.to_string())?;
        let baseline =
            evaluate(&idx, &gt, &DistanceParams::with_k(1.0), 9).map_err(|e| e.to_string())?;
        Ok((with_loc, baseline, idx.len()))
    })?;
    let elapsed = start.elapsed();
    ensure(n_images == 66, || format!("{n_images} images indexed"))?;
    ensure(with_loc.avg_precision >= baseline.avg_precision, || {
        format!(
            "k=0.5 precision {:.4} < k=1 precision {:.4}",
            with_loc.avg_precision, baseline.avg_precision
        )
    })?;
    ensure(with_loc.avg_precision > 0.85, || {
        format!("k=0.5 precision {:.4}", with_loc.avg_precision)
    })?;
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "P@9 k=0.5 {:.4} (R {:.4}) vs k=1 {:.4} (R {:.4}), {n_images} images, {elapsed:.2?} single-threaded",
        with_loc.avg_precision, with_loc.avg_recall, baseline.avg_precision, baseline.avg_recall
    ))
}

fn all_rankings(idx: &Index) -> Vec<QueryResult> {
    let dp = DistanceParams::default();
    idx.records()
        .iter()
        .map(|r| idx.rank(r, &dp, idx.len(), None).expect("rank"))
        .collect()
}

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec {
        groups: 3,
        variants_per_group: 4,
        ..SynthSpec::default()
    };
    let images_dir = dir.path().join("images");
    eval::generate_collection(&spec, &images_dir).map_err(|e| e.to_string())?;
    let params = SignatureParams::default();
    let first = build_index(&images_dir, &params)
        .map_err(|e| e.to_string())?
        .index;
    let second = build_index(&images_dir, &params)
        .map_err(|e| e.to_string())?
        .index;
    let (p1, p2) = (dir.path().join("one.idx"), dir.path().join("two.idx"));
    save_index(&first, &p1).map_err(|e| e.to_string())?;
    save_index(&second, &p2).map_err(|e| e.to_string())?;
    let (b1, b2) = (
        std::fs::read(&p1).map_err(|e| e.to_string())?,
        std::fs::read(&p2).map_err(|e| e.to_string())?,
    );
    ensure(b1 == b2, || "rebuilt index files differ".into())?;

    let loaded = load_index(&p1).map_err(|e| e.to_string())?;
    ensure(loaded == first, || "loaded index differs".into())?;
    let before = all_rankings(&first);
    let after = all_rankings(&loaded);
    for (x, y) in before.iter().zip(&after) {
        for (hx, hy) in x.ranked.iter().zip(&y.ranked) {
            ensure(
                hx.image_id == hy.image_id && hx.distance.to_bits() == hy.distance.to_bits(),
                || format!("ranking changed: {hx:?} vs {hy:?}"),
            )?;
        }
    }
    Ok(format!(
        "{} records, {} bytes, {} rankings identical",
        first.len(),
        b1.len(),
        before.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("quantization totality and count", quantization_totality),
        ("delta E correctness", delta_e_correctness),
        ("histogram normalization", histogram_normalization),
        ("worked precision/recall", worked_precision_recall),
        ("scale invariance", scale_invariance),
        ("rotation invariance", rotation_invariance),
        ("localization discrimination", localization_discrimination),
        ("end-to-end retrieval quality", end_to_end_quality),
        ("persistence", persistence),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match run() {
            Ok(detail) => println!("PASS  [{}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  [{}] {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
