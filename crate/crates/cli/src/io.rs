//! Corpus, label and CSV plumbing.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use spsn::{Circuit, DataTree, Schema};

/// Raw documents with their ids: line indices (from 0) for JSONL input,
/// file stems for a directory of `.json` files.
pub struct Corpus {
    pub ids: Vec<String>,
    pub texts: Vec<String>,
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let mut ids = Vec::new();
    let mut texts = Vec::new();
    if path.is_dir() {
        let mut files: Vec<_> = fs::read_dir(path)
            .with_context(|| format!("listing {}", path.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for f in files {
            texts.push(fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?);
            ids.push(f.file_stem().unwrap_or_default().to_string_lossy().into_owned());
        }
    } else {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            if !line.trim().is_empty() {
                ids.push(i.to_string());
                texts.push(line.to_string());
            }
        }
    }
    Ok(Corpus { ids, texts })
}

/// Parses every document against `schema`, in parallel, keeping order.
pub fn parse_corpus(corpus: &Corpus, schema: &Schema) -> Result<Vec<DataTree>> {
    corpus
        .texts
        .par_iter()
        .zip(&corpus.ids)
        .map(|(t, id)| spsn::parse_document(t, schema).with_context(|| format!("document {id}")))
        .collect()
}

/// Reads `doc_id,label` rows and aligns them with `ids`. Labels are class
/// indices below `n_c`.
pub fn read_labels(path: &Path, ids: &[String], n_c: usize) -> Result<Vec<usize>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut by_id = HashMap::new();
    for row in reader.records() {
        let row = row?;
        let (Some(id), Some(label)) = (row.get(0), row.get(1)) else {
            bail!("{}: expected doc_id,label rows", path.display());
        };
        let y: usize = label
            .trim()
            .parse()
            .with_context(|| format!("label `{label}` of document {id}"))?;
        if y >= n_c {
            bail!("label {y} of document {id} out of range for {n_c} classes");
        }
        by_id.insert(id.trim().to_string(), y);
    }
    ids.iter()
        .map(|id| by_id.get(id).copied().with_context(|| format!("no label for document {id}")))
        .collect()
}

/// File at `path`, or standard output when no path is given.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

pub fn csv_writer(path: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    Ok(csv::Writer::from_writer(output(path)?))
}

pub fn read_model(path: &Path) -> Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Circuit::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Shortest decimal that reads back to the same float.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
