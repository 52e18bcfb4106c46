//! Persisted tables of zeroed singular-series values.
//!
//! One JSON object per line, fields `{q, set, value, prime_cutoff,
//! tail_bound}`, with `set` in translation-canonical form (first element 0)
//! and numeric values as decimal strings with 17 significant digits. Entries
//! are written in deterministic (depth-first lexicographic) order, so a
//! rebuild with identical parameters is byte-identical.

use super::{SeriesEvaluator, SeriesKind, SeriesProvider, SeriesValue, TupleSet};
use crate::error::{Error, Result};
use crate::real::Real;
use rayon::prelude::*;
use std::collections::HashMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct TableRecord {
    q: u32,
    set: Vec<u64>,
    value: String,
    prime_cutoff: u64,
    tail_bound: String,
}

/// Build provenance, persisted as a sidecar `.meta.json` file.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct TableMeta {
    pub q: u32,
    pub max_size: usize,
    pub max_elem: u64,
    pub cutoff_target: f64,
    /// RFC3339-ish build timestamp; not part of the table bytes.
    pub built_at: Option<String>,
}

/// In-memory table of canonical zeroed series values.
#[derive(Debug)]
pub struct SeriesTable<F> {
    pub q: u32,
    pub max_size: usize,
    pub max_elem: u64,
    pub meta: TableMeta,
    entries: HashMap<Vec<u64>, SeriesValue<F>>,
}

impl<F: Real> SeriesTable<F> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Looks up a set, translating to canonical form first.
    pub fn get(&self, set: &TupleSet) -> Option<&SeriesValue<F>> {
        self.entries.get(self.canonical_key(set).as_slice())
    }

    fn canonical_key(&self, set: &TupleSet) -> Vec<u64> {
        set.canonical().elements().to_vec()
    }
}

impl<F: Real> SeriesProvider<F> for SeriesTable<F> {
    fn q(&self) -> u32 {
        self.q
    }

    fn zeroed_value(&self, set: &TupleSet) -> Result<F> {
        self.get(set)
            .map(|v| v.value)
            .ok_or_else(|| Error::CacheMiss { q: self.q, set: self.canonical_key(set) })
    }
}

/// Canonical file name for a table build.
pub fn table_path(dir: &Path, q: u32, max_size: usize, max_elem: u64) -> PathBuf {
    dir.join(format!("series_q{q}_s{max_size}_e{max_elem}.jsonl"))
}

/// Enumerates canonical sets (min = 0, size <= max_size, max <= max_elem) in
/// depth-first lexicographic order: [], [0], [0,1], [0,1,2], ..., [0,2], ...
fn canonical_sets(max_size: usize, max_elem: u64) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    if max_size == 0 {
        return out;
    }
    let mut stack: Vec<Vec<u64>> = vec![vec![0]];
    while let Some(set) = stack.pop() {
        out.push(set.clone());
        if set.len() < max_size {
            let lo = set.last().unwrap() + 1;
            // push descending so the stack pops ascending
            for next in (lo..=max_elem).rev() {
                let mut s = set.clone();
                s.push(next);
                stack.push(s);
            }
        }
    }
    out
}

/// Computes and (optionally) persists all canonical zeroed values.
pub fn build_table<F: Real>(
    q: u32,
    max_size: usize,
    max_elem: u64,
    cutoff_target: f64,
    dir: Option<&Path>,
) -> Result<SeriesTable<F>> {
    if q == 0 {
        return Err(Error::invalid_parameter("modulus must be >= 1"));
    }
    if max_size > TupleSet::MAX_SIZE {
        return Err(Error::SetTooLarge { size: max_size, max: 7 });
    }
    let eval = SeriesEvaluator::<F>::new(q, cutoff_target, max_elem.max(1))?;
    let sets = canonical_sets(max_size, max_elem);

    let mut writer = match dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            let path = table_path(d, q, max_size, max_elem);
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            Some((BufWriter::new(file), path))
        }
        None => None,
    };

    let mut entries = HashMap::with_capacity(sets.len());
    for chunk in sets.chunks(8192) {
        let values: Vec<SeriesValue<F>> = chunk
            .par_iter()
            .map(|elems| {
                let set = TupleSet::new(elems.clone()).expect("canonical enumeration is valid");
                eval.zeroed(&set)
            })
            .collect::<Result<Vec<_>>>()?;
        for v in values {
            if let Some((w, path)) = writer.as_mut() {
                let record = TableRecord {
                    q,
                    set: v.set.elements().to_vec(),
                    value: crate::format_scalar(v.value),
                    prime_cutoff: v.prime_cutoff,
                    tail_bound: crate::format_scalar(v.tail_bound),
                };
                let line = serde_json::to_string(&record)
                    .map_err(|e| Error::Parse { path: path.clone(), message: e.to_string() })?;
                writeln!(w, "{line}").map_err(|e| Error::io(path.clone(), e))?;
            }
            entries.insert(v.set.elements().to_vec(), v);
        }
    }

    let meta = TableMeta {
        q,
        max_size,
        max_elem,
        cutoff_target,
        built_at: Some(now_stamp()),
    };
    if let Some((mut w, path)) = writer {
        w.flush().map_err(|e| Error::io(&path, e))?;
        let meta_path = path.with_extension("meta.json");
        let text = serde_json::to_string_pretty(&meta)
            .map_err(|e| Error::Parse { path: meta_path.clone(), message: e.to_string() })?;
        std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    }

    Ok(SeriesTable { q, max_size, max_elem, meta, entries })
}

fn now_stamp() -> String {
    use std::time::{SystemTime, UNIX_EPOCH};
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("unix:{secs}")
}

/// Loads a table from a JSONL file (meta sidecar optional).
pub fn load_table<F: Real>(path: &Path) -> Result<SeriesTable<F>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut entries = HashMap::new();
    let mut q: Option<u32> = None;
    let mut max_size = 0usize;
    let mut max_elem = 0u64;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TableRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", lineno + 1),
        })?;
        let parse_num = |s: &str| -> Result<F> {
            s.parse::<f64>().map(F::of).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("line {}: bad number {s}: {e}", lineno + 1),
            })
        };
        match q {
            None => q = Some(record.q),
            Some(expect) if expect != record.q => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("mixed moduli {expect} and {}", record.q),
                });
            }
            _ => {}
        }
        max_size = max_size.max(record.set.len());
        max_elem = max_elem.max(record.set.last().copied().unwrap_or(0));
        let set = TupleSet::new(record.set.clone()).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", lineno + 1),
        })?;
        let value = SeriesValue {
            value: parse_num(&record.value)?,
            tail_bound: parse_num(&record.tail_bound)?,
            prime_cutoff: record.prime_cutoff,
            q: record.q,
            kind: SeriesKind::Zeroed,
            set,
        };
        entries.insert(record.set, value);
    }
    let q = q.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        message: "empty table file".into(),
    })?;

    let meta_path = path.with_extension("meta.json");
    let meta = match std::fs::read_to_string(&meta_path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: meta_path.clone(),
            message: e.to_string(),
        })?,
        Err(_) => TableMeta {
            q,
            max_size,
            max_elem,
            cutoff_target: super::DEFAULT_CUTOFF_TARGET,
            built_at: None,
        },
    };

    Ok(SeriesTable { q, max_size: meta.max_size, max_elem: meta.max_elem, meta, entries })
}

/// Loads the table if present in `dir`, otherwise builds and persists it.
pub fn load_or_build_table<F: Real>(
    dir: &Path,
    q: u32,
    max_size: usize,
    max_elem: u64,
    cutoff_target: f64,
) -> Result<SeriesTable<F>> {
    let path = table_path(dir, q, max_size, max_elem);
    if path.exists() {
        load_table(&path)
    } else {
        build_table(q, max_size, max_elem, cutoff_target, Some(dir))
    }
}
