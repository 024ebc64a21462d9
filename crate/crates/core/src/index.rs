//! Signature index: image loading, batch extraction, the on-disk text format
//! and the ranked query engine.
//!
//! File layout: a header line `CHROMALOC <version> <max_side> <n_locations>`,
//! then one tab-separated line per record:
//!
//! ```text
//! image_id  width  height  w0 .. w46  count  (bin weight x y L a b) * count
//! ```
//!
//! Reals are written with 9 significant digits. Records are canonicalized to
//! that precision when they enter an [`Index`], so saving and loading an index
//! reproduces it exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::colorspace::{Lab, QuantBin, BIN_COUNT};
use crate::error::{Error, Result};
use crate::matching::{combined_distance, DistanceParams};
use crate::signature::{
    extract_signature, ColorHistogram, ColorLocation, ImageBuffer, Point, Signature,
    SignatureParams,
};

pub const FORMAT_MAGIC: &str = "CHROMALOC";
pub const FORMAT_VERSION: u32 = 1;
/// Version of the 47-bin quantizer layout. Format version 1 implies quantizer 1.
pub const QUANTIZER_VERSION: u32 = 1;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];
const LOCATION_FIELDS: usize = 7;

/// Formats a real with 9 significant digits, exactly as C's `%.9g`.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds to the value the index file will hold.
pub fn canonical_real(x: f64) -> f64 {
    format_real(x).parse().unwrap_or(x)
}

fn canonical_lab(c: Lab) -> Lab {
    Lab::new(
        canonical_real(c.l),
        canonical_real(c.a),
        canonical_real(c.b),
    )
}

/// Returns the signature rounded to index precision.
pub fn canonical_signature(sig: &Signature) -> Signature {
    Signature {
        image_id: sig.image_id.clone(),
        source_dims: sig.source_dims,
        histogram: sig.histogram.map_weights(canonical_real),
        locations: sig
            .locations
            .iter()
            .map(|l| ColorLocation {
                bin: l.bin,
                weight: canonical_real(l.weight),
                center: Point::new(canonical_real(l.center.x), canonical_real(l.center.y)),
                mean_color: canonical_lab(l.mean_color),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Fingerprint {
    pub max_side: u32,
    pub n_locations: usize,
    pub quantizer_version: u32,
}

impl Fingerprint {
    pub fn new(params: &SignatureParams) -> Self {
        Fingerprint {
            max_side: params.max_side,
            n_locations: params.n_locations,
            quantizer_version: QUANTIZER_VERSION,
        }
    }

    pub fn signature_params(&self) -> SignatureParams {
        SignatureParams {
            max_side: self.max_side,
            n_locations: self.n_locations,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Index {
    format_version: u32,
    fingerprint: Fingerprint,
    records: Vec<Signature>,
}

impl Index {
    /// Builds an index from extracted signatures. Records are canonicalized and
    /// sorted by image id; duplicate ids are rejected.
    pub fn new(params: &SignatureParams, records: Vec<Signature>) -> Result<Self> {
        params.validate()?;
        let mut records: Vec<Signature> = records.iter().map(canonical_signature).collect();
        records.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        for pair in records.windows(2) {
            if pair[0].image_id == pair[1].image_id {
                return Err(Error::InvalidInput(format!(
                    "duplicate image id {:?}",
                    pair[0].image_id
                )));
            }
        }
        for r in &records {
            check_image_id(&r.image_id)?;
            if r.locations.len() > params.n_locations {
                return Err(Error::InvalidInput(format!(
                    "{:?} has {} locations, index allows {}",
                    r.image_id,
                    r.locations.len(),
                    params.n_locations
                )));
            }
        }
        Ok(Index {
            format_version: FORMAT_VERSION,
            fingerprint: Fingerprint::new(params),
            records,
        })
    }

    pub fn format_version(&self) -> u32 {
        self.format_version
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn records(&self) -> &[Signature] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&Signature> {
        self.records
            .binary_search_by(|r| r.image_id.as_str().cmp(image_id))
            .ok()
            .map(|i| &self.records[i])
    }

    /// Fails unless signatures extracted with `params` are comparable with this index.
    pub fn check_params(&self, params: &SignatureParams) -> Result<()> {
        let fp = Fingerprint::new(params);
        if fp != self.fingerprint {
            return Err(Error::IncompatibleIndex(format!(
                "index was built with max_side {} and {} locations, probe uses max_side {} and {} locations",
                self.fingerprint.max_side,
                self.fingerprint.n_locations,
                fp.max_side,
                fp.n_locations
            )));
        }
        Ok(())
    }

    fn check_distance_params(&self, dparams: &DistanceParams) -> Result<()> {
        dparams.validate()?;
        if dparams.n_locations > self.fingerprint.n_locations {
            return Err(Error::IncompatibleIndex(format!(
                "query compares {} locations but the index stores only {}",
                dparams.n_locations, self.fingerprint.n_locations
            )));
        }
        Ok(())
    }

    /// Extracts the probe's signature with this index's parameters.
    pub fn probe_signature(&self, image_id: &str, probe: &ImageBuffer) -> Result<Signature> {
        let sig = extract_signature(image_id, probe, &self.fingerprint.signature_params())?;
        Ok(canonical_signature(&sig))
    }

    /// Ranks every record against `probe`, skipping the record named `exclude`.
    /// `probe` must have been extracted with this index's parameters.
    pub fn rank(
        &self,
        probe: &Signature,
        dparams: &DistanceParams,
        top_k: usize,
        exclude: Option<&str>,
    ) -> Result<QueryResult> {
        if top_k == 0 {
            return Err(Error::InvalidInput("top_k must be positive".into()));
        }
        self.check_distance_params(dparams)?;
        let mut ranked = self
            .records
            .par_iter()
            .filter(|r| exclude != Some(r.image_id.as_str()))
            .map(|r| {
                combined_distance(probe, r, dparams).map(|distance| Hit {
                    image_id: r.image_id.clone(),
                    distance,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ranked.sort_by(|a, b| {
            a.distance
                .total_cmp(&b.distance)
                .then_with(|| a.image_id.cmp(&b.image_id))
        });
        ranked.truncate(top_k);
        Ok(QueryResult { ranked })
    }

    pub fn write_to(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "{FORMAT_MAGIC} {} {} {}",
            self.format_version, self.fingerprint.max_side, self.fingerprint.n_locations
        )?;
        let mut fields: Vec<String> = Vec::new();
        for r in &self.records {
            fields.clear();
            fields.push(r.image_id.clone());
            fields.push(r.source_dims.0.to_string());
            fields.push(r.source_dims.1.to_string());
            fields.extend(r.histogram.weights().iter().map(|w| format_real(*w)));
            fields.push(r.locations.len().to_string());
            for l in &r.locations {
                fields.push(l.bin.index().to_string());
                for v in [
                    l.weight,
                    l.center.x,
                    l.center.y,
                    l.mean_color.l,
                    l.mean_color.a,
                    l.mean_color.b,
                ] {
                    fields.push(format_real(v));
                }
            }
            writeln!(out, "{}", fields.join("\t"))?;
        }
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Index> {
        let mut lines = input.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.map_err(|e| parse_err(1, e.to_string()))?,
            None => return Err(parse_err(1, "empty index file")),
        };
        let fingerprint = parse_header(&header)?;
        let n_max = fingerprint.n_locations;
        let mut records = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let record = parse_record(&line, lineno, n_max)?;
            if let Some(prev) = records.last().map(|r: &Signature| r.image_id.clone()) {
                if prev >= record.image_id {
                    return Err(parse_err(
                        lineno,
                        format!(
                            "records out of order or duplicated at {:?}",
                            record.image_id
                        ),
                    ));
                }
            }
            records.push(record);
        }
        Ok(Index {
            format_version: FORMAT_VERSION,
            fingerprint,
            records,
        })
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn check_image_id(id: &str) -> Result<()> {
    if id.is_empty() || id.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidInput(format!(
            "image id {id:?} must be non-empty and free of tabs and newlines"
        )));
    }
    Ok(())
}

fn parse_header(line: &str) -> Result<Fingerprint> {
    let tokens: Vec<&str> = line.split(' ').collect();
    if tokens.first() != Some(&FORMAT_MAGIC) {
        return Err(parse_err(1, format!("missing {FORMAT_MAGIC} header")));
    }
    let version: u32 = tokens
        .get(1)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(1, "missing format version"))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    if tokens.len() != 4 {
        return Err(parse_err(
            1,
            format!("header needs 4 fields, found {}", tokens.len()),
        ));
    }
    let max_side: u32 = tokens[2]
        .parse()
        .map_err(|_| parse_err(1, format!("bad max_side {:?}", tokens[2])))?;
    let n_locations: usize = tokens[3]
        .parse()
        .map_err(|_| parse_err(1, format!("bad location count {:?}", tokens[3])))?;
    let params = SignatureParams {
        max_side,
        n_locations,
    };
    params.validate().map_err(|e| parse_err(1, e.to_string()))?;
    Ok(Fingerprint::new(&params))
}

fn parse_record(line: &str, lineno: usize, n_max: usize) -> Result<Signature> {
    let fields: Vec<&str> = line.split('\t').collect();
    let fixed = 3 + BIN_COUNT + 1;
    if fields.len() < fixed {
        return Err(parse_err(
            lineno,
            format!("expected at least {fixed} fields, found {}", fields.len()),
        ));
    }
    let real = |i: usize| -> Result<f64> {
        fields[i]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                parse_err(
                    lineno,
                    format!("field {}: bad number {:?}", i + 1, fields[i]),
                )
            })
    };
    let int = |i: usize| -> Result<u64> {
        fields[i].parse::<u64>().map_err(|_| {
            parse_err(
                lineno,
                format!("field {}: bad integer {:?}", i + 1, fields[i]),
            )
        })
    };

    let image_id = fields[0].to_string();
    check_image_id(&image_id).map_err(|e| parse_err(lineno, e.to_string()))?;
    let width = u32::try_from(int(1)?).map_err(|_| parse_err(lineno, "width out of range"))?;
    let height = u32::try_from(int(2)?).map_err(|_| parse_err(lineno, "height out of range"))?;
    let weights = (3..3 + BIN_COUNT).map(real).collect::<Result<Vec<_>>>()?;
    let histogram =
        ColorHistogram::from_weights(weights).map_err(|e| parse_err(lineno, e.to_string()))?;

    let count = int(3 + BIN_COUNT)? as usize;
    if count > n_max {
        return Err(parse_err(
            lineno,
            format!("{count} locations exceed the header limit of {n_max}"),
        ));
    }
    let expected = fixed + count * LOCATION_FIELDS;
    if fields.len() != expected {
        return Err(parse_err(
            lineno,
            format!(
                "expected {expected} fields for {count} locations, found {}",
                fields.len()
            ),
        ));
    }
    let mut locations = Vec::with_capacity(count);
    for j in 0..count {
        let base = fixed + j * LOCATION_FIELDS;
        let bin = QuantBin::from_index(int(base)? as usize).ok_or_else(|| {
            parse_err(lineno, format!("bin index {:?} out of range", fields[base]))
        })?;
        locations.push(ColorLocation {
            bin,
            weight: real(base + 1)?,
            center: Point::new(real(base + 2)?, real(base + 3)?),
            mean_color: Lab::new(real(base + 4)?, real(base + 5)?, real(base + 6)?),
        });
    }
    Ok(Signature {
        image_id,
        source_dims: (width, height),
        histogram,
        locations,
    })
}

pub fn save_index(idx: &Index, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    idx.write_to(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_index(path: impl AsRef<Path>) -> Result<Index> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Index::read_from(BufReader::new(file))
}

/// A ranked candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    pub image_id: String,
    pub distance: f64,
}

/// Hits in ascending distance, ties by image id.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct QueryResult {
    pub ranked: Vec<Hit>,
}

impl QueryResult {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.ranked.iter().map(|h| h.image_id.as_str())
    }
}

/// Extracts the probe signature with the index's parameters and ranks the index.
pub fn query(
    idx: &Index,
    probe: &ImageBuffer,
    dparams: &DistanceParams,
    top_k: usize,
) -> Result<QueryResult> {
    if idx.is_empty() {
        return Err(Error::InvalidInput("index is empty".into()));
    }
    let sig = idx.probe_signature("<probe>", probe)?;
    idx.rank(&sig, dparams, top_k, None)
}

/// Decodes a PNG or JPEG file.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let decode_err = |message: String| Error::Decode {
        path: path.to_path_buf(),
        message,
    };
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    ImageBuffer::from_rgb8(&img.to_rgb8())
}

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Image id for a file under `root`: its relative path with `/` separators.
pub fn image_id_for(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    pub index: Index,
    pub skipped: Vec<SkippedFile>,
}

/// Indexes every PNG and JPEG file below `root`. Files that fail to decode are
/// skipped and listed in the report.
pub fn build_index(root: impl AsRef<Path>, params: &SignatureParams) -> Result<BuildReport> {
    let root = root.as_ref();
    params.validate()?;
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        ));
    }
    let mut paths = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() && is_image_path(entry.path()) {
            paths.push(entry.into_path());
        }
    }

    let outcomes: Vec<std::result::Result<Signature, SkippedFile>> = paths
        .par_iter()
        .map(|path| {
            let id = image_id_for(root, path);
            check_image_id(&id)
                .and_then(|_| load_image(path))
                .and_then(|img| extract_signature(id, &img, params))
                .map_err(|e| SkippedFile {
                    path: path.clone(),
                    reason: e.to_string(),
                })
        })
        .collect();

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(sig) => records.push(sig),
            Err(skip) => skipped.push(skip),
        }
    }
    if records.is_empty() {
        return Err(Error::NoImages(root.to_path_buf()));
    }
    Ok(BuildReport {
        index: Index::new(params, records)?,
        skipped,
    })
}
