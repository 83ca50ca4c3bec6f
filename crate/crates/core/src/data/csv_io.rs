use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::Dataset;
use crate::error::{Result, SdgmError};

/// Which column holds the class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    First,
    #[default]
    Last,
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = SdgmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(LabelColumn::First),
            "last" => Ok(LabelColumn::Last),
            other => other.parse().map(LabelColumn::Index).map_err(|_| {
                SdgmError::Config(format!("label column `{other}` is not first|last|<index>"))
            }),
        }
    }
}

impl LabelColumn {
    fn resolve(self, width: usize) -> Result<usize> {
        match self {
            LabelColumn::First => Ok(0),
            LabelColumn::Last => Ok(width - 1),
            LabelColumn::Index(i) if i < width => Ok(i),
            LabelColumn::Index(i) => Err(SdgmError::Config(format!(
                "label column {i} but rows have {width} columns"
            ))),
        }
    }
}

struct RawTable {
    rows: Vec<(usize, Vec<f64>, String)>,
}

fn read_table(path: &Path, label: LabelColumn) -> Result<RawTable> {
    let text = fs::read_to_string(path).map_err(|e| {
        SdgmError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut width = None;
    let mut label_idx = 0;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SdgmError::Parse {
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(SdgmError::Parse {
                line,
                message: format!("expected {w} columns, found {}", record.len()),
            });
        }
        if w < 2 {
            return Err(SdgmError::Parse {
                line,
                message: "need at least one feature and a label".into(),
            });
        }
        if rows.is_empty() {
            label_idx = label.resolve(w)?;
            let is_header = record
                .iter()
                .enumerate()
                .any(|(j, cell)| j != label_idx && cell.parse::<f64>().is_err());
            if is_header && i == 0 {
                continue;
            }
        }
        let mut features = Vec::with_capacity(w - 1);
        for (j, cell) in record.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| SdgmError::Parse {
                line,
                message: format!("column {} is not numeric: `{cell}`", j + 1),
            })?;
            if !v.is_finite() {
                return Err(SdgmError::Parse {
                    line,
                    message: format!("column {} is not finite", j + 1),
                });
            }
            features.push(v);
        }
        rows.push((line, features, record[label_idx].to_string()));
    }
    if rows.is_empty() {
        return Err(SdgmError::Dataset(format!(
            "{} contains no samples",
            path.display()
        )));
    }
    Ok(RawTable { rows })
}

/// Numeric labels sort by value, anything else lexicographically.
fn label_order(labels: &BTreeSet<String>) -> Vec<String> {
    let mut names: Vec<String> = labels.iter().cloned().collect();
    let numeric: Option<Vec<f64>> = names.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        let mut paired: Vec<(f64, String)> = values.into_iter().zip(names).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        names = paired.into_iter().map(|(_, s)| s).collect();
    }
    names
}

/// Loads a CSV, mapping the distinct label values onto `0..C`.
pub fn load_csv(path: impl AsRef<Path>, label: LabelColumn) -> Result<Dataset> {
    load_csv_with_labels(path, label, None)
}

/// Loads a CSV against a fixed label vocabulary; labels outside it are errors.
pub fn load_csv_with_labels(
    path: impl AsRef<Path>,
    label: LabelColumn,
    label_names: Option<&[String]>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path, label)?;
    let names = match label_names {
        Some(names) => names.to_vec(),
        None => label_order(&table.rows.iter().map(|r| r.2.clone()).collect()),
    };
    let index: HashMap<&str, usize> = names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut rows = Vec::with_capacity(table.rows.len());
    let mut labels = Vec::with_capacity(table.rows.len());
    for (line, features, lab) in &table.rows {
        let l = *index.get(lab.as_str()).ok_or_else(|| SdgmError::Parse {
            line: *line,
            message: format!("unknown label `{lab}` (known: {})", names.join(", ")),
        })?;
        rows.push(features.clone());
        labels.push(l);
    }
    let mut ds = Dataset::with_label_names(rows, labels, names)?;
    ds.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    Ok(ds)
}

/// Writes `x1..xD,label` with shortest round-trip float formatting.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    let header: Vec<String> = (1..=ds.dim()).map(|i| format!("x{i}")).collect();
    out.push_str(&header.join(","));
    out.push_str(",label\n");
    for (row, &l) in ds.rows().zip(ds.labels()) {
        for v in row {
            out.push_str(&format!("{v:?},"));
        }
        out.push_str(&ds.label_names()[l]);
        out.push('\n');
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

fn split_files(dir: &Path) -> Result<Vec<(String, String, usize, PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(file) = path.file_name().and_then(|f| f.to_str()) else {
            continue;
        };
        let Some(stem) = file.strip_suffix(".csv") else {
            continue;
        };
        for kind in ["train", "test"] {
            let marker = format!("_{kind}_");
            if let Some(pos) = stem.rfind(&marker) {
                if let Ok(i) = stem[pos + marker.len()..].parse::<usize>() {
                    found.push((stem[..pos].to_string(), kind.to_string(), i, path.clone()));
                }
            }
        }
    }
    Ok(found)
}

/// Split indices that have both a train and a test file.
pub fn available_splits(dir: impl AsRef<Path>) -> Result<Vec<usize>> {
    let files = split_files(dir.as_ref())?;
    let train: BTreeSet<usize> = files
        .iter()
        .filter(|f| f.1 == "train")
        .map(|f| f.2)
        .collect();
    let test: BTreeSet<usize> = files
        .iter()
        .filter(|f| f.1 == "test")
        .map(|f| f.2)
        .collect();
    Ok(train.intersection(&test).copied().collect())
}

/// Loads `<name>_train_<i>.csv` / `<name>_test_<i>.csv` from `dir`. The test
/// set must use the train set's label vocabulary and dimension.
pub fn load_splits(
    dir: impl AsRef<Path>,
    index: usize,
    label: LabelColumn,
) -> Result<(Dataset, Dataset)> {
    let dir = dir.as_ref();
    let files = split_files(dir)?;
    let names: BTreeSet<&str> = files.iter().map(|f| f.0.as_str()).collect();
    if names.len() > 1 {
        return Err(SdgmError::Schema(format!(
            "{} holds splits for several datasets: {}",
            dir.display(),
            names.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    let find = |kind: &str| {
        files
            .iter()
            .find(|f| f.1 == kind && f.2 == index)
            .map(|f| f.3.clone())
    };
    let (Some(train_path), Some(test_path)) = (find("train"), find("test")) else {
        let avail = available_splits(dir)?;
        return Err(SdgmError::NotFound(format!(
            "split {index} in {} (available: {})",
            dir.display(),
            avail
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        )));
    };
    let train = load_csv(&train_path, label)?;
    let test = load_csv_with_labels(&test_path, label, Some(train.label_names()))?;
    if train.dim() != test.dim() {
        return Err(SdgmError::Schema(format!(
            "split {index}: train has {} features, test has {}",
            train.dim(),
            test.dim()
        )));
    }
    Ok((train, test))
}
