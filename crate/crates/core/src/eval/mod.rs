//! Retrieval-quality evaluation over labeled image groups.
//!
//! Every image whose group has at least one other member is used once as a
//! query. The query itself is excluded from its own result list and from its
//! relevant set, so for a query from a group of size `g` retrieving `top_k` images:
//!
//! * `a` = retrieved images from the same group
//! * `b` = retrieved images from other groups
//! * `c` = `(g - 1) - a`, the group members that were not retrieved

pub mod synth;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::index::Index;
use crate::matching::DistanceParams;

pub use synth::{
    generate_collection, ground_truth, synthesize, Perturbation, SynthImage, SynthSpec,
    GROUND_TRUTH_FILE,
};

pub const DEFAULT_TOP_K: usize = 15;

/// `a / (a + b)`.
pub fn precision(a: usize, b: usize) -> Result<f64> {
    if a + b == 0 {
        return Err(Error::UndefinedPrecision);
    }
    Ok(a as f64 / (a + b) as f64)
}

/// `a / (a + c)`.
pub fn recall(a: usize, c: usize) -> Result<f64> {
    if a + c == 0 {
        return Err(Error::UndefinedRecall);
    }
    Ok(a as f64 / (a + c) as f64)
}

/// Image id to group label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    groups: BTreeMap<String, String>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, image_id: impl Into<String>, group: impl Into<String>) -> Result<()> {
        let (id, group) = (image_id.into(), group.into());
        if id.is_empty() || group.is_empty() {
            return Err(Error::GroundTruth(
                "ids and groups must be non-empty".into(),
            ));
        }
        if self.groups.insert(id.clone(), group).is_some() {
            return Err(Error::GroundTruth(format!("duplicate id {id:?}")));
        }
        Ok(())
    }

    pub fn group(&self, image_id: &str) -> Option<&str> {
        self.groups.get(image_id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn group_sizes(&self) -> BTreeMap<&str, usize> {
        let mut sizes = BTreeMap::new();
        for g in self.groups.values() {
            *sizes.entry(g.as_str()).or_insert(0) += 1;
        }
        sizes
    }

    /// Reads `id,group` CSV with a header line.
    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| Error::GroundTruth(e.to_string()))?
            .clone();
        if headers.len() != 2 || &headers[0] != "id" || &headers[1] != "group" {
            return Err(Error::GroundTruth(format!(
                "expected header \"id,group\", found {:?}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut gt = GroundTruth::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::GroundTruth(e.to_string()))?;
            if row.len() != 2 {
                let line = row.position().map_or(0, |p| p.line());
                return Err(Error::GroundTruth(format!(
                    "line {line}: expected 2 columns"
                )));
            }
            gt.insert(&row[0], &row[1])?;
        }
        Ok(gt)
    }

    pub fn write_csv(&self, output: impl Write) -> Result<()> {
        let mut writer = csv::Writer::from_writer(output);
        let csv_err = |e: csv::Error| Error::GroundTruth(e.to_string());
        writer.write_record(["id", "group"]).map_err(csv_err)?;
        for (id, group) in self.iter() {
            writer.write_record([id, group]).map_err(csv_err)?;
        }
        writer
            .flush()
            .map_err(|e| Error::GroundTruth(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryEval {
    pub image_id: String,
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub precision: f64,
    pub recall: f64,
}

impl QueryEval {
    pub fn from_counts(image_id: impl Into<String>, a: usize, b: usize, c: usize) -> Result<Self> {
        Ok(QueryEval {
            image_id: image_id.into(),
            a,
            b,
            c,
            precision: precision(a, b)?,
            recall: recall(a, c)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_query: Vec<QueryEval>,
    pub avg_precision: f64,
    pub avg_recall: f64,
    /// Images in single-member groups; they are ranked but never used as queries.
    pub singletons: usize,
}

impl EvalReport {
    pub fn from_queries(per_query: Vec<QueryEval>, singletons: usize) -> Self {
        let n = per_query.len().max(1) as f64;
        let avg_precision = per_query.iter().map(|q| q.precision).sum::<f64>() / n;
        let avg_recall = per_query.iter().map(|q| q.recall).sum::<f64>() / n;
        EvalReport {
            per_query,
            avg_precision,
            avg_recall,
            singletons,
        }
    }

    /// Aligned table with full-precision and two-decimal columns.
    pub fn to_table(&self) -> String {
        let id_width = self
            .per_query
            .iter()
            .map(|q| q.image_id.len())
            .chain(["average".len(), "image".len()])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<id_width$}  {:>4} {:>4} {:>4}  {:>11} {:>11}  {:>5} {:>5}",
            "image", "a", "b", "c", "precision", "recall", "P", "R"
        );
        for q in &self.per_query {
            let _ = writeln!(
                out,
                "{:<id_width$}  {:>4} {:>4} {:>4}  {:>11.9} {:>11.9}  {:>5.2} {:>5.2}",
                q.image_id, q.a, q.b, q.c, q.precision, q.recall, q.precision, q.recall
            );
        }
        let _ = writeln!(
            out,
            "{:<id_width$}  {:>4} {:>4} {:>4}  {:>11.9} {:>11.9}  {:>5.2} {:>5.2}",
            "average",
            "",
            "",
            "",
            self.avg_precision,
            self.avg_recall,
            self.avg_precision,
            self.avg_recall
        );
        out
    }

    /// One tab-separated line per query (`id a b c precision recall`), then
    /// `average <precision> <recall>`.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for q in &self.per_query {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                q.image_id, q.a, q.b, q.c, q.precision, q.recall
            );
        }
        let _ = writeln!(out, "average\t{}\t{}", self.avg_precision, self.avg_recall);
        out
    }
}

/// Runs every eligible ground-truth image as a query against `idx`.
pub fn evaluate(
    idx: &Index,
    gt: &GroundTruth,
    dparams: &DistanceParams,
    top_k: usize,
) -> Result<EvalReport> {
    if top_k == 0 {
        return Err(Error::InvalidInput("top_k must be positive".into()));
    }
    for (id, _) in gt.iter() {
        if idx.get(id).is_none() {
            return Err(Error::MissingId(id.to_string()));
        }
    }
    let sizes = gt.group_sizes();
    let queries: Vec<(&str, &str)> = gt.iter().filter(|(_, g)| sizes[g] >= 2).collect();
    let singletons = gt.len() - queries.len();

    let per_query = queries
        .par_iter()
        .map(|&(id, group)| {
            let probe = idx.get(id).expect("checked above");
            let result = idx.rank(probe, dparams, top_k, Some(id))?;
            let a = result.ids().filter(|r| gt.group(r) == Some(group)).count();
            let b = result.ranked.len() - a;
            let c = sizes[group] - 1 - a;
            QueryEval::from_counts(id, a, b, c)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_queries(per_query, singletons))
}
