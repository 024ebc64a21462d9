//! Command-line front end: `index`, `query`, `eval` and `synth`.
//!
//! [`run`] takes the argument list and output streams explicitly so the whole
//! surface can be exercised from tests.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use base64::Engine as _;
use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{self, synth, GroundTruth, Perturbation, SynthSpec};
use crate::index::{build_index, load_image, load_index, save_index, QueryResult};
use crate::matching::{DistanceParams, HistMetric};
use crate::signature::{
    preprocess, ImageBuffer, SignatureParams, DEFAULT_LOCATIONS, DEFAULT_MAX_SIDE,
};

const THUMBNAIL_SIDE: u32 = 160;

#[derive(Debug, Parser)]
#[command(name = "chromaloc", version, about = "Color-location image retrieval")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Index every PNG/JPEG image below a directory.
    Index {
        dir: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_SIDE)]
        max_side: u32,
        #[arg(long, default_value_t = DEFAULT_LOCATIONS)]
        locations: usize,
    },
    /// Rank indexed images by similarity to a probe image.
    Query {
        index: PathBuf,
        image: PathBuf,
        #[command(flatten)]
        distance: DistanceArgs,
        #[arg(long, default_value_t = eval::DEFAULT_TOP_K, value_parser = parse_top_k)]
        top_k: usize,
        #[arg(long, value_enum, default_value_t = QueryFormat::Text)]
        format: QueryFormat,
        /// Directory holding the indexed images, used for HTML thumbnails.
        /// Defaults to the directory containing the index file.
        #[arg(long)]
        root: Option<PathBuf>,
    },
    /// Score retrieval against a ground-truth CSV (`id,group`).
    Eval {
        index: PathBuf,
        groundtruth: PathBuf,
        #[command(flatten)]
        distance: DistanceArgs,
        #[arg(long, default_value_t = eval::DEFAULT_TOP_K, value_parser = parse_top_k)]
        top_k: usize,
        #[arg(long, value_enum, default_value_t = EvalFormat::Text)]
        format: EvalFormat,
    },
    /// Write a seeded synthetic collection with ground truth.
    Synth {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        groups: usize,
        #[arg(long, default_value_t = 10)]
        variants: usize,
        #[arg(long, default_value_t = 256)]
        size: u32,
        /// Comma-separated subset of scale, rotate90, brightness, layout-distractor.
        #[arg(long, value_delimiter = ',', value_parser = parse_perturbation)]
        perturbations: Option<Vec<Perturbation>>,
    },
}

#[derive(Debug, Clone, clap::Args)]
pub struct DistanceArgs {
    /// Histogram weight; 1.0 ranks by color histogram alone.
    #[arg(long, default_value_t = 0.5, value_parser = parse_k)]
    pub k: f64,
    #[arg(long, default_value = "intersection", value_parser = parse_metric)]
    pub metric: HistMetric,
    /// Color locations compared per image (defaults to all stored in the index).
    #[arg(long)]
    pub locations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QueryFormat {
    Text,
    JsonLines,
    Html,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalFormat {
    Text,
    JsonLines,
}

fn parse_k(s: &str) -> std::result::Result<f64, String> {
    let k: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&k) {
        Ok(k)
    } else {
        Err(format!("k must be within [0, 1], got {k}"))
    }
}

fn parse_top_k(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("top_k must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_metric(s: &str) -> std::result::Result<HistMetric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_perturbation(s: &str) -> std::result::Result<Perturbation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl DistanceArgs {
    fn params(&self, stored_locations: usize) -> DistanceParams {
        DistanceParams {
            k: self.k,
            hist_metric: self.metric,
            n_locations: self.locations.unwrap_or(stored_locations),
            ..DistanceParams::default()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{rendered}")
            } else {
                write!(stderr, "{rendered}")
            };
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<output>", e)
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match command {
        Command::Index {
            dir,
            out,
            max_side,
            locations,
        } => cmd_index(&dir, &out, max_side, locations, stderr),
        Command::Query {
            index,
            image,
            distance,
            top_k,
            format,
            root,
        } => cmd_query(
            &index,
            &image,
            &distance,
            top_k,
            format,
            root.as_deref(),
            stdout,
        ),
        Command::Eval {
            index,
            groundtruth,
            distance,
            top_k,
            format,
        } => cmd_eval(&index, &groundtruth, &distance, top_k, format, stdout),
        Command::Synth {
            out_dir,
            seed,
            groups,
            variants,
            size,
            perturbations,
        } => {
            let spec = SynthSpec {
                seed,
                groups,
                variants_per_group: variants,
                image_size: size,
                perturbations: match perturbations {
                    Some(list) => list.into_iter().collect(),
                    None => Perturbation::ALL.into_iter().collect::<BTreeSet<_>>(),
                },
            };
            cmd_synth(&spec, &out_dir, stderr)
        }
    }
}

fn cmd_index(
    dir: &Path,
    out: &Path,
    max_side: u32,
    locations: usize,
    stderr: &mut dyn Write,
) -> Result<()> {
    let params = SignatureParams {
        max_side,
        n_locations: locations,
    };
    let report = build_index(dir, &params)?;
    for skipped in &report.skipped {
        writeln!(
            stderr,
            "warning: skipped {}: {}",
            skipped.path.display(),
            skipped.reason
        )
        .map_err(io_out)?;
    }
    save_index(&report.index, out)?;
    writeln!(
        stderr,
        "indexed {} images into {}",
        report.index.len(),
        out.display()
    )
    .map_err(io_out)
}

fn cmd_query(
    index_path: &Path,
    image_path: &Path,
    distance: &DistanceArgs,
    top_k: usize,
    format: QueryFormat,
    root: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let idx = load_index(index_path)?;
    let probe = load_image(image_path)?;
    let dparams = distance.params(idx.fingerprint().n_locations);
    let result = crate::index::query(&idx, &probe, &dparams, top_k)?;
    match format {
        QueryFormat::Text => {
            for (rank, hit) in result.ranked.iter().enumerate() {
                writeln!(
                    stdout,
                    "{}\t{:.9}\t{}",
                    rank + 1,
                    hit.distance,
                    hit.image_id
                )
                .map_err(io_out)?;
            }
        }
        QueryFormat::JsonLines => {
            for (rank, hit) in result.ranked.iter().enumerate() {
                let line = serde_json::json!({
                    "rank": rank + 1,
                    "distance": hit.distance,
                    "image_id": hit.image_id,
                });
                writeln!(stdout, "{line}").map_err(io_out)?;
            }
        }
        QueryFormat::Html => {
            let root = match root {
                Some(r) => r.to_path_buf(),
                None => index_path
                    .parent()
                    .map(Path::to_path_buf)
                    .unwrap_or_default(),
            };
            let page = gallery_html(image_path, &probe, &result, &root, &dparams)?;
            stdout.write_all(page.as_bytes()).map_err(io_out)?;
        }
    }
    Ok(())
}

fn thumbnail_data_uri(img: &ImageBuffer) -> Result<String> {
    let small = preprocess(img, THUMBNAIL_SIDE)?;
    let mut png = Cursor::new(Vec::new());
    small
        .to_rgb8()
        .write_to(&mut png, image::ImageFormat::Png)
        .map_err(|e| Error::InvalidInput(format!("thumbnail encoding failed: {e}")))?;
    Ok(format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(png.into_inner())
    ))
}

fn escape_html(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tile(uri: Option<&str>, caption: &str, class: &str) -> String {
    let img = match uri {
        Some(uri) => format!("<img src=\"{uri}\" alt=\"{}\">", escape_html(caption)),
        None => "<div class=\"missing\">image not found</div>".to_string(),
    };
    format!(
        "<figure class=\"{class}\">{img}<figcaption>{}</figcaption></figure>\n",
        escape_html(caption)
    )
}

/// Self-contained results page: the query first, then hits by ascending distance.
pub fn gallery_html(
    query_path: &Path,
    probe: &ImageBuffer,
    result: &QueryResult,
    root: &Path,
    dparams: &DistanceParams,
) -> Result<String> {
    let mut tiles = tile(
        Some(&thumbnail_data_uri(probe)?),
        &format!("query: {}", query_path.display()),
        "query",
    );
    for (rank, hit) in result.ranked.iter().enumerate() {
        let uri = match load_image(root.join(&hit.image_id)) {
            Ok(img) => Some(thumbnail_data_uri(&img)?),
            Err(_) => None,
        };
        tiles.push_str(&tile(
            uri.as_deref(),
            &format!("{}. {} ({:.4})", rank + 1, hit.image_id, hit.distance),
            "hit",
        ));
    }
    Ok(format!(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>chromaloc results</title>\n<style>\n\
         body{{font-family:sans-serif;margin:1em}}\n\
         .grid{{display:grid;grid-template-columns:repeat(auto-fill,minmax({side}px,1fr));gap:8px}}\n\
         figure{{margin:0;padding:4px;border:1px solid #ccc;text-align:center}}\n\
         figure.query{{border:3px solid #c33}}\n\
         img{{max-width:{side}px;max-height:{side}px}}\n\
         .missing{{height:{side}px;line-height:{side}px;color:#999}}\n\
         figcaption{{font-size:small;word-break:break-all}}\n\
         </style></head><body>\n<p>k = {k}, metric = {metric:?}, {n} results</p>\n<div class=\"grid\">\n{tiles}</div>\n</body></html>\n",
        side = THUMBNAIL_SIDE,
        k = dparams.k,
        metric = dparams.hist_metric,
        n = result.ranked.len(),
    ))
}

fn cmd_eval(
    index_path: &Path,
    gt_path: &Path,
    distance: &DistanceArgs,
    top_k: usize,
    format: EvalFormat,
    stdout: &mut dyn Write,
) -> Result<()> {
    let idx = load_index(index_path)?;
    let gt = GroundTruth::load(gt_path)?;
    let dparams = distance.params(idx.fingerprint().n_locations);
    let report = eval::evaluate(&idx, &gt, &dparams, top_k)?;
    match format {
        EvalFormat::Text => {
            stdout
                .write_all(report.to_table().as_bytes())
                .map_err(io_out)?;
            if report.singletons > 0 {
                writeln!(
                    stdout,
                    "({} single-image groups ranked but not queried)",
                    report.singletons
                )
                .map_err(io_out)?;
            }
        }
        EvalFormat::JsonLines => {
            for q in &report.per_query {
                let line =
                    serde_json::to_string(q).map_err(|e| Error::InvalidInput(e.to_string()))?;
                writeln!(stdout, "{line}").map_err(io_out)?;
            }
            let summary = serde_json::json!({
                "average_precision": report.avg_precision,
                "average_recall": report.avg_recall,
                "queries": report.per_query.len(),
                "singletons": report.singletons,
            });
            writeln!(stdout, "{summary}").map_err(io_out)?;
        }
    }
    Ok(())
}

fn cmd_synth(spec: &SynthSpec, out_dir: &Path, stderr: &mut dyn Write) -> Result<()> {
    let gt = eval::generate_collection(spec, out_dir)?;
    writeln!(
        stderr,
        "wrote {} images and {}",
        gt.len(),
        out_dir.join(synth::GROUND_TRUTH_FILE).display()
    )
    .map_err(io_out)
}
