//! Dataset directory layout:
//!
//! | file | content |
//! |------|---------|
//! | `edges.tsv` | one undirected edge per line, two whitespace-separated node ids |
//! | `features.csv` | one comma-separated row of floats per node, no header |
//! | `labels.tsv` | `node_id class_id` per line, every node exactly once |
//! | `split.json` | optional, `{"train": [...], "test": [...]}` |
//!
//! Node ids are 0-based. Lines starting with `#` and blank lines are skipped
//! in the text files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::split::Split;
use super::{DataError, LabeledDataset};
use crate::error::Result;
use crate::graph::{DenseMatrix, SparseGraph};

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.tsv";
pub const SPLIT_FILE: &str = "split.json";

/// Non-fatal cleanups performed while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops_dropped: usize,
    pub duplicate_edges_merged: usize,
}

impl LoadReport {
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.self_loops_dropped > 0 {
            out.push(format!(
                "dropped {} self-loop(s) from {EDGES_FILE}",
                self.self_loops_dropped
            ));
        }
        if self.duplicate_edges_merged > 0 {
            out.push(format!(
                "merged {} duplicate edge(s) in {EDGES_FILE}",
                self.duplicate_edges_merged
            ));
        }
        out
    }
}

fn read(path: &Path) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(DataError::MissingFile(path.to_path_buf()).into())
        }
        Err(e) => Err(e.into()),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(file: &str, line: usize, detail: impl Into<String>) -> DataError {
    DataError::Parse {
        file: file.to_string(),
        line,
        detail: detail.into(),
    }
}

fn parse_features(text: &str) -> std::result::Result<DenseMatrix, DataError> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (line, content) in content_lines(text) {
        let start = data.len();
        for field in content.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(FEATURES_FILE, line, format!("'{}' is not a number", field.trim())))?;
            if !v.is_finite() {
                return Err(parse_err(FEATURES_FILE, line, "non-finite feature value"));
            }
            data.push(v);
        }
        let found = data.len() - start;
        match cols {
            None => cols = Some(found),
            Some(expected) if expected != found => {
                return Err(DataError::RaggedFeatures {
                    line,
                    expected,
                    found,
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| parse_err(FEATURES_FILE, 0, "no feature rows"))?;
    Ok(DenseMatrix::new(rows, cols, data).expect("row lengths checked above"))
}

fn parse_index(file: &str, line: usize, token: &str, n: usize) -> std::result::Result<usize, DataError> {
    let index: usize = token
        .parse()
        .map_err(|_| parse_err(file, line, format!("'{token}' is not a node id")))?;
    if index >= n {
        return Err(DataError::IndexOutOfRange {
            file: file.to_string(),
            line,
            index,
            n,
        });
    }
    Ok(index)
}

fn two_fields<'a>(
    file: &str,
    line: usize,
    content: &'a str,
) -> std::result::Result<(&'a str, &'a str), DataError> {
    let mut it = content.split_whitespace();
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(parse_err(file, line, "expected exactly two columns")),
    }
}

fn parse_edges(text: &str, n: usize) -> std::result::Result<Vec<(usize, usize)>, DataError> {
    content_lines(text)
        .map(|(line, content)| {
            let (a, b) = two_fields(EDGES_FILE, line, content)?;
            Ok((
                parse_index(EDGES_FILE, line, a, n)?,
                parse_index(EDGES_FILE, line, b, n)?,
            ))
        })
        .collect()
}

fn parse_labels(text: &str, n: usize) -> std::result::Result<(Vec<usize>, usize), DataError> {
    let mut labels: Vec<Option<usize>> = vec![None; n];
    for (line, content) in content_lines(text) {
        let (a, b) = two_fields(LABELS_FILE, line, content)?;
        let node = parse_index(LABELS_FILE, line, a, n)?;
        let class: usize = b
            .parse()
            .map_err(|_| parse_err(LABELS_FILE, line, format!("'{b}' is not a class id")))?;
        if labels[node].replace(class).is_some() {
            return Err(DataError::LabelCoverage(format!(
                "node {node} labeled twice (line {line})"
            )));
        }
    }
    let labels: Vec<usize> = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| DataError::LabelCoverage(format!("node {i} has no label"))))
        .collect::<std::result::Result<_, _>>()?;
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut seen = vec![false; classes];
    labels.iter().for_each(|&y| seen[y] = true);
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(DataError::LabelGap { classes, missing });
    }
    Ok((labels, classes))
}

fn parse_split(text: &str, n: usize) -> std::result::Result<Split, DataError> {
    let mut split: Split =
        serde_json::from_str(text).map_err(|e| parse_err(SPLIT_FILE, e.line(), e.to_string()))?;
    split.validate(n)?;
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<LabeledDataset> {
    load_dataset_with_report(dir).map(|(d, _)| d)
}

/// Loads and validates a dataset directory; the report lists dropped
/// self-loops and merged duplicates.
pub fn load_dataset_with_report(dir: impl AsRef<Path>) -> Result<(LabeledDataset, LoadReport)> {
    let dir = dir.as_ref();
    let path = |f: &str| -> PathBuf { dir.join(f) };
    let x = parse_features(&read(&path(FEATURES_FILE))?)?;
    let n = x.rows();
    let edges = parse_edges(&read(&path(EDGES_FILE))?, n)?;
    let (labels, num_classes) = parse_labels(&read(&path(LABELS_FILE))?, n)?;
    let split_path = path(SPLIT_FILE);
    let split = if split_path.exists() {
        parse_split(&read(&split_path)?, n)?
    } else {
        Split::default()
    };
    let (graph, cleanup) = SparseGraph::from_edges_counted(n, &edges)?;
    let dataset = LabeledDataset {
        graph,
        x,
        labels,
        num_classes,
        train_idx: split.train,
        test_idx: split.test,
    };
    let report = LoadReport {
        self_loops_dropped: cleanup.self_loops_dropped,
        duplicate_edges_merged: cleanup.duplicates_merged,
    };
    Ok((dataset, report))
}

/// Writes the four dataset files into `dir`, creating it if needed. Floats
/// use the shortest representation that parses back to the same value.
pub fn save_dataset(dataset: &LabeledDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let mut w = BufWriter::new(fs::File::create(dir.join(EDGES_FILE))?);
    for (i, j) in dataset.graph.edges() {
        writeln!(w, "{i}\t{j}")?;
    }
    w.flush()?;

    let mut w = BufWriter::new(fs::File::create(dir.join(FEATURES_FILE))?);
    for row in dataset.x.row_iter() {
        let mut first = true;
        for v in row {
            if !first {
                w.write_all(b",")?;
            }
            write!(w, "{v}")?;
            first = false;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;

    let mut w = BufWriter::new(fs::File::create(dir.join(LABELS_FILE))?);
    for (i, y) in dataset.labels.iter().enumerate() {
        writeln!(w, "{i}\t{y}")?;
    }
    w.flush()?;

    if dataset.has_split() {
        let split = Split {
            train: dataset.train_idx.clone(),
            test: dataset.test_idx.clone(),
        };
        let json = serde_json::to_string(&split).expect("split serializes");
        fs::write(dir.join(SPLIT_FILE), json + "\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_case2;
    use crate::Error;

    fn write_dir(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, body) in files {
            fs::write(dir.path().join(name), body).unwrap();
        }
        dir
    }

    fn code(r: Result<LabeledDataset>) -> &'static str {
        match r {
            Err(Error::Data(e)) => e.code(),
            other => panic!("expected a data error, got {other:?}"),
        }
    }

    const FEATS: &str = "1,0\n0,1\n1,1\n";
    const LABELS: &str = "0 0\n1 1\n2 0\n";

    #[test]
    fn round_trip() {
        let d = generate_case2(3);
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&d, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), d);
    }

    #[test]
    fn self_loops_and_duplicates_are_reported() {
        let dir = write_dir(&[
            (EDGES_FILE, "0 1\n1 0\n2 2\n# comment\n\n1\t2\n"),
            (FEATURES_FILE, FEATS),
            (LABELS_FILE, LABELS),
        ]);
        let (d, report) = load_dataset_with_report(dir.path()).unwrap();
        assert_eq!(d.graph.edge_count(), 2);
        assert_eq!(report.self_loops_dropped, 1);
        assert_eq!(report.duplicate_edges_merged, 1);
        assert_eq!(report.warnings().len(), 2);
        assert!(!d.has_split());
    }

    #[test]
    fn malformed_inputs_have_distinct_codes() {
        let ok_edges = (EDGES_FILE, "0 1\n");
        let cases: Vec<(Vec<(&str, &str)>, &str)> = vec![
            (
                vec![(FEATURES_FILE, FEATS), (LABELS_FILE, LABELS)],
                "missing-file",
            ),
            (
                vec![ok_edges, (FEATURES_FILE, "1,0\n0\n1,1\n"), (LABELS_FILE, LABELS)],
                "ragged-features",
            ),
            (
                vec![ok_edges, (FEATURES_FILE, FEATS), (LABELS_FILE, "0 0\n1 2\n2 0\n")],
                "label-gap",
            ),
            (
                vec![
                    (EDGES_FILE, "0 3\n"),
                    (FEATURES_FILE, FEATS),
                    (LABELS_FILE, LABELS),
                ],
                "index-out-of-range",
            ),
            (
                vec![ok_edges, (FEATURES_FILE, "1,x\n"), (LABELS_FILE, "0 0\n")],
                "parse",
            ),
            (
                vec![ok_edges, (FEATURES_FILE, FEATS), (LABELS_FILE, "0 0\n1 1\n")],
                "label-coverage",
            ),
            (
                vec![
                    ok_edges,
                    (FEATURES_FILE, FEATS),
                    (LABELS_FILE, LABELS),
                    (SPLIT_FILE, r#"{"train":[0],"test":[0]}"#),
                ],
                "split",
            ),
        ];
        for (files, expected) in cases {
            let dir = write_dir(&files);
            assert_eq!(code(load_dataset(dir.path())), expected, "{files:?}");
        }
    }
}
