use chromaloc::colorspace::Rgb;
use chromaloc::index::{build_index, load_index, query, save_index};
use chromaloc::matching::DistanceParams;
use chromaloc::signature::{ImageBuffer, SignatureParams};
use chromaloc::Error;

fn write_png(path: &std::path::Path, img: &ImageBuffer) {
    img.to_rgb8().save(path).unwrap();
}

fn stripes(a: Rgb, b: Rgb) -> ImageBuffer {
    ImageBuffer::from_fn(64, 48, |x, _| if x < 32 { a } else { b }).unwrap()
}

#[test]
fn indexes_directory_and_skips_corrupt_files() {
    let dir = tempfile::tempdir().unwrap();
    write_png(
        &dir.path().join("red_blue.png"),
        &stripes(Rgb::from_u8(220, 20, 20), Rgb::from_u8(20, 20, 220)),
    );
    std::fs::create_dir(dir.path().join("sub")).unwrap();
    write_png(
        &dir.path().join("sub/green.png"),
        &stripes(Rgb::from_u8(20, 180, 40), Rgb::from_u8(240, 240, 240)),
    );
    std::fs::write(dir.path().join("broken.png"), b"not a png").unwrap();
    std::fs::write(dir.path().join("notes.txt"), b"ignored").unwrap();

    let report = build_index(dir.path(), &SignatureParams::default()).unwrap();
    assert_eq!(report.index.len(), 2);
    assert_eq!(report.skipped.len(), 1);
    assert!(report.skipped[0].path.ends_with("broken.png"));
    let ids: Vec<_> = report
        .index
        .records()
        .iter()
        .map(|r| r.image_id.as_str())
        .collect();
    assert_eq!(ids, ["red_blue.png", "sub/green.png"]);
}

#[test]
fn empty_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = build_index(dir.path(), &SignatureParams::default()).unwrap_err();
    assert!(matches!(err, Error::NoImages(_)), "{err}");
}

fn three_stripes(a: Rgb, b: Rgb, c: Rgb) -> ImageBuffer {
    ImageBuffer::from_fn(60, 40, |x, _| match x / 20 {
        0 => a,
        1 => b,
        _ => c,
    })
    .unwrap()
}

#[test]
fn saved_index_answers_queries_like_the_original() {
    let dir = tempfile::tempdir().unwrap();
    let (red, blue, green) = (
        Rgb::from_u8(220, 20, 20),
        Rgb::from_u8(20, 20, 220),
        Rgb::from_u8(20, 170, 40),
    );
    let images = [
        three_stripes(red, blue, green),
        three_stripes(blue, red, green),
        three_stripes(Rgb::from_u8(250, 210, 30), Rgb::from_u8(30, 30, 30), green),
    ];
    for (i, img) in images.iter().enumerate() {
        write_png(&dir.path().join(format!("img{i}.png")), img);
    }
    let idx = build_index(dir.path(), &SignatureParams::default())
        .unwrap()
        .index;
    let path = dir.path().join("out.idx");
    save_index(&idx, &path).unwrap();
    let loaded = load_index(&path).unwrap();
    assert_eq!(loaded, idx);

    let probe = images[0].clone();
    let dp = DistanceParams::default();
    let hits = query(&loaded, &probe, &dp, 3).unwrap();
    assert_eq!(hits.ranked[0].image_id, "img0.png");
    assert_eq!(hits.ranked[0].distance, 0.0);
    // Same colors, different layout: equal histograms, so only locations separate them.
    assert_eq!(hits.ranked[1].image_id, "img1.png");
    assert!(hits.ranked[1].distance > 0.0);
    assert_eq!(query(&idx, &probe, &dp, 3).unwrap(), hits);
}

#[test]
fn rejects_unknown_format_version() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("future.idx");
    std::fs::write(&path, "CHROMALOC 2 256 5\n").unwrap();
    assert!(matches!(
        load_index(&path).unwrap_err(),
        Error::UnsupportedVersion { found: 2, .. }
    ));
}
