//! Delimiter-separated dataset files.
//!
//! * data:   `domain_id,y,x_1,...,x_k`
//! * meta:   `domain_id,m_1,...,m_k`
//! * splits: `domain_id,split` with split one of `train`, `valid`, `test`
//! * adjacency (optional): one undirected edge `id_i id_j` per line

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DomainDataset, DomainId, Example, Split, TaskKind};
use crate::error::{Error, Result};
use crate::relations::{read_adjacency, write_adjacency};
use crate::util::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub data: PathBuf,
    pub meta: PathBuf,
    pub splits: PathBuf,
    pub adjacency: Option<PathBuf>,
}

impl DatasetPaths {
    /// Conventional file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        let adjacency = dir.join("adjacency.txt");
        Self {
            data: dir.join("data.csv"),
            meta: dir.join("meta.csv"),
            splits: dir.join("splits.csv"),
            adjacency: adjacency.exists().then_some(adjacency),
        }
    }
}

/// Assigns domains to splits when no split file is available: domains sorted
/// by id, the first `train` fraction go to training, the next `valid` fraction
/// to validation, the rest to test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub train: f64,
    pub valid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitSource {
    File(PathBuf),
    Rule(SplitRule),
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

fn check_header(path: &Path, headers: &csv::StringRecord, min: usize) -> Result<()> {
    if headers.len() < min || headers.get(0) != Some("domain_id") {
        return Err(Error::malformed(
            path,
            1,
            format!("expected header starting with domain_id and at least {min} columns"),
        ));
    }
    Ok(())
}

fn parse_id(path: &Path, line: u64, field: Option<&str>) -> Result<DomainId> {
    let raw = field.ok_or_else(|| Error::malformed(path, line, "missing domain_id"))?;
    raw.parse::<u32>()
        .map(DomainId)
        .map_err(|_| Error::malformed(path, line, format!("bad domain id {raw:?}")))
}

fn parse_reals<'a>(path: &Path, line: u64, fields: impl Iterator<Item = &'a str>) -> Result<Vec<f64>> {
    fields
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::malformed(path, line, format!("bad number {f:?}")))
        })
        .collect()
}

pub fn read_meta(path: &Path) -> Result<BTreeMap<DomainId, Vec<f64>>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    check_header(path, &headers, 2)?;
    let mut meta = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.len() != headers.len() {
            return Err(Error::malformed(path, line, format!("expected {} fields, got {}", headers.len(), rec.len())));
        }
        let id = parse_id(path, line, rec.get(0))?;
        let values = parse_reals(path, line, rec.iter().skip(1))?;
        if meta.insert(id, values).is_some() {
            return Err(Error::malformed(path, line, format!("duplicate meta-data for domain {id}")));
        }
    }
    Ok(meta)
}

pub fn read_splits(path: &Path) -> Result<BTreeMap<DomainId, Split>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    check_header(path, &headers, 2)?;
    let mut splits = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.len() != 2 {
            return Err(Error::malformed(path, line, "expected domain_id,split"));
        }
        let id = parse_id(path, line, rec.get(0))?;
        let split: Split = rec[1].parse().map_err(|e: String| Error::malformed(path, line, e))?;
        match splits.insert(id, split) {
            Some(prev) if prev != split => return Err(Error::OverlappingSplits(id)),
            _ => {}
        }
    }
    Ok(splits)
}

fn read_examples(path: &Path) -> Result<Vec<Example>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers()?.clone();
    check_header(path, &headers, 3)?;
    if headers.get(1) != Some("y") {
        return Err(Error::malformed(path, 1, "second column must be y"));
    }
    let mut examples = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        if rec.len() != headers.len() {
            return Err(Error::malformed(path, line, format!("expected {} fields, got {}", headers.len(), rec.len())));
        }
        let domain = parse_id(path, line, rec.get(0))?;
        let mut values = parse_reals(path, line, rec.iter().skip(1))?;
        let y = values.remove(0);
        examples.push(Example { domain, x: values, y });
    }
    Ok(examples)
}

fn apply_rule(rule: SplitRule, domains: impl Iterator<Item = DomainId>) -> Result<BTreeMap<DomainId, Split>> {
    if !(rule.train > 0.0 && rule.valid >= 0.0 && rule.train + rule.valid < 1.0) {
        return Err(Error::Config(format!("invalid split fractions {rule:?}")));
    }
    let ids: Vec<DomainId> = domains.collect();
    let n = ids.len() as f64;
    let n_train = ((rule.train * n).round() as usize).max(1);
    let n_valid = (rule.valid * n).round() as usize;
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let s = if i < n_train {
                Split::Train
            } else if i < n_train + n_valid {
                Split::Valid
            } else {
                Split::Test
            };
            (id, s)
        })
        .collect())
}

pub fn load_dataset(
    data: &Path,
    meta: &Path,
    splits: &SplitSource,
    adjacency: Option<&Path>,
    task: TaskKind,
) -> Result<DomainDataset> {
    let examples = read_examples(data)?;
    let meta = read_meta(meta)?;
    let splits = match splits {
        SplitSource::File(p) => read_splits(p)?,
        SplitSource::Rule(rule) => {
            let mut ids: Vec<DomainId> = examples.iter().map(|e| e.domain).collect();
            ids.sort();
            ids.dedup();
            apply_rule(*rule, ids.into_iter())?
        }
    };
    for ex in &examples {
        if !meta.contains_key(&ex.domain) {
            return Err(Error::MissingMeta(ex.domain));
        }
    }
    for id in splits.keys() {
        if !meta.contains_key(id) {
            return Err(Error::MissingMeta(*id));
        }
    }
    let ds = DomainDataset::new(task, examples, meta, splits)?;
    match adjacency {
        Some(p) => ds.with_adjacency(read_adjacency(p)?),
        None => Ok(ds),
    }
}

/// Writes the dataset into `dir` under the conventional file names.
pub fn write_dataset(ds: &DomainDataset, dir: &Path) -> Result<DatasetPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = DatasetPaths {
        data: dir.join("data.csv"),
        meta: dir.join("meta.csv"),
        splits: dir.join("splits.csv"),
        adjacency: ds.adjacency().map(|_| dir.join("adjacency.txt")),
    };

    let mut data = String::from("domain_id,y");
    for k in 1..=ds.feature_dim() {
        data.push_str(&format!(",x_{k}"));
    }
    data.push('\n');
    for ex in ds.examples() {
        data.push_str(&format!("{},{}", ex.domain, ex.y));
        for v in &ex.x {
            data.push_str(&format!(",{v}"));
        }
        data.push('\n');
    }
    write_atomic(&paths.data, data.as_bytes())?;

    let mut meta = String::from("domain_id");
    for k in 1..=ds.meta_dim() {
        meta.push_str(&format!(",m_{k}"));
    }
    meta.push('\n');
    for (id, m) in ds.meta_table() {
        meta.push_str(&id.to_string());
        for v in m {
            meta.push_str(&format!(",{v}"));
        }
        meta.push('\n');
    }
    write_atomic(&paths.meta, meta.as_bytes())?;

    let mut splits = String::from("domain_id,split\n");
    for (id, s) in ds.splits() {
        splits.push_str(&format!("{id},{s}\n"));
    }
    write_atomic(&paths.splits, splits.as_bytes())?;

    if let (Some(adj), Some(path)) = (ds.adjacency(), &paths.adjacency) {
        write_adjacency(adj, path)?;
    }
    Ok(paths)
}
