//! Sparse `label idx:val ...` text datasets with 1-based feature indices.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Dataset, Sample, StructuredLabel};

/// Parse libsvm text. Labels are kept as ordinal values; tasks convert them.
/// Missing features are zero; the dimension is the largest index seen.
pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    let mut parsed: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut dim = 0;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: ln + 1, msg };
        let mut fields = line.split_whitespace();
        let label_text = fields.next().expect("non-empty line");
        let label: f64 = label_text
            .parse()
            .map_err(|_| err(format!("bad label '{label_text}'")))?;
        if !label.is_finite() {
            return Err(err("non-finite label".into()));
        }
        let mut feats: Vec<(usize, f64)> = Vec::new();
        for tok in fields {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, got '{tok}'")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("bad index '{idx}'")))?;
            if idx == 0 {
                return Err(err("feature indices start at 1".into()));
            }
            let val: f64 = val.parse().map_err(|_| err(format!("bad value '{val}'")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value at index {idx}")));
            }
            if feats.iter().any(|(j, _)| *j == idx) {
                return Err(err(format!("duplicate index {idx}")));
            }
            dim = dim.max(idx);
            feats.push((idx, val));
        }
        parsed.push((label, feats));
    }
    let samples = parsed
        .into_iter()
        .enumerate()
        .map(|(id, (label, feats))| {
            let mut features = vec![0.0; dim];
            for (j, v) in feats {
                features[j - 1] = v;
            }
            Sample {
                id,
                features,
                label: StructuredLabel::OrdinalRank(label),
            }
        })
        .collect();
    let mut data = Dataset::new(samples)?;
    data.dim = dim;
    Ok(data)
}

pub fn parse_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_libsvm_str(&std::fs::read_to_string(path)?)
}

/// Zero-pad every sample to at least `dim` features.
pub fn pad_to(data: &mut Dataset, dim: usize) {
    if dim > data.dim {
        for s in &mut data.samples {
            s.features.resize(dim, 0.0);
        }
        data.dim = dim;
    }
}

fn label_text(label: &StructuredLabel) -> String {
    match label {
        StructuredLabel::Class(c) => c.to_string(),
        StructuredLabel::OrdinalRank(r) => r.to_string(),
        StructuredLabel::GridLabeling(_) => "0".to_string(),
    }
}

/// Shortest round-trip decimal for every value; zeros are omitted.
pub fn write_libsvm(data: &Dataset) -> String {
    let mut s = String::new();
    for sample in &data.samples {
        s.push_str(&label_text(&sample.label));
        for (j, v) in sample.features.iter().enumerate() {
            if *v != 0.0 {
                let _ = write!(s, " {}:{}", j + 1, v);
            }
        }
        s.push('\n');
    }
    s
}
