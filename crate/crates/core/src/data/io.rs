use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{FeatureKind, FeatureMeta, MetadataTable, Scale, SparseDataset, Triplet};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Declares feature kinds and, optionally, the original-unit ranges used for
/// min-max normalisation. Features without a declared range are scaled by the
/// observed minimum and maximum.
#[derive(Clone, Debug)]
pub struct KindSpec {
    pub default: FeatureKind,
    pub range: Option<(f64, f64)>,
    pub overrides: HashMap<String, (FeatureKind, Option<(f64, f64)>)>,
    /// Row ids that take the first row indices, in this order; other ids
    /// follow in order of first appearance.
    pub row_order: Vec<String>,
    /// Same for feature ids.
    pub feature_order: Vec<String>,
}

impl KindSpec {
    pub fn all(kind: FeatureKind) -> Self {
        Self {
            default: kind,
            range: None,
            overrides: HashMap::new(),
            row_order: Vec::new(),
            feature_order: Vec::new(),
        }
    }

    pub fn with_order(mut self, rows: Vec<String>, features: Vec<String>) -> Self {
        self.row_order = rows;
        self.feature_order = features;
        self
    }

    pub fn with_range(mut self, min: f64, max: f64) -> Self {
        self.range = Some((min, max));
        self
    }

    pub fn with_feature(
        mut self,
        id: impl Into<String>,
        kind: FeatureKind,
        range: Option<(f64, f64)>,
    ) -> Self {
        self.overrides.insert(id.into(), (kind, range));
        self
    }

    fn resolve(&self, id: &str) -> (FeatureKind, Option<(f64, f64)>) {
        match self.overrides.get(id) {
            Some(&(k, r)) => (k, r.or(if k == self.default { self.range } else { None })),
            None => (self.default, self.range),
        }
    }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn location(path: &Path, line: u64) -> String {
    format!("{}:{line}", path.display())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::data(location(path, line), e.to_string())
}

/// Reads a `row,feature,value` triplet file. Ids are compacted to dense
/// indices, declared orders first and then in order of first appearance;
/// continuous values are min-max normalised per feature.
pub fn load_triplets(path: impl AsRef<Path>, kinds: &KindSpec) -> Result<SparseDataset> {
    let path = path.as_ref();
    let mut rdr = reader(path)?;
    let mut row_ids: Vec<String> = Vec::new();
    let mut feature_ids: Vec<String> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut feature_index: HashMap<String, usize> = HashMap::new();
    for id in &kinds.row_order {
        if row_index.insert(id.clone(), row_ids.len()).is_some() {
            return Err(Error::invalid(format!("row {id:?} is declared twice")));
        }
        row_ids.push(id.clone());
    }
    for id in &kinds.feature_order {
        if feature_index.insert(id.clone(), feature_ids.len()).is_some() {
            return Err(Error::invalid(format!("feature {id:?} is declared twice")));
        }
        feature_ids.push(id.clone());
    }
    let mut first_seen: HashMap<(usize, usize), u64> = HashMap::new();
    let mut raw: Vec<(usize, usize, f64, u64)> = Vec::new();

    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if i == 0 && rec.iter().eq(["row", "feature", "value"]) {
            continue;
        }
        if rec.len() != 3 {
            return Err(Error::data(
                location(path, line),
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        let value: f64 = rec[2].parse().map_err(|_| {
            Error::data(location(path, line), format!("unparseable value {:?}", &rec[2]))
        })?;
        if !value.is_finite() {
            return Err(Error::data(location(path, line), "non-finite value"));
        }
        let r = *row_index.entry(rec[0].to_string()).or_insert_with(|| {
            row_ids.push(rec[0].to_string());
            row_ids.len() - 1
        });
        let f = *feature_index.entry(rec[1].to_string()).or_insert_with(|| {
            feature_ids.push(rec[1].to_string());
            feature_ids.len() - 1
        });
        if let Some(prev) = first_seen.insert((r, f), line) {
            return Err(Error::data(
                location(path, line),
                format!(
                    "duplicate observation for row {:?}, feature {:?} (first at line {prev})",
                    &rec[0], &rec[1]
                ),
            ));
        }
        raw.push((r, f, value, line));
    }

    let resolved: Vec<_> = feature_ids.iter().map(|id| kinds.resolve(id)).collect();
    let mut lo = vec![f64::INFINITY; feature_ids.len()];
    let mut hi = vec![f64::NEG_INFINITY; feature_ids.len()];
    for &(_, f, v, line) in &raw {
        match resolved[f] {
            (FeatureKind::Binary, _) if v != 0.0 && v != 1.0 => {
                return Err(Error::data(
                    location(path, line),
                    format!("binary feature {:?} has value {v}", feature_ids[f]),
                ));
            }
            (FeatureKind::Continuous, Some((min, max))) if v < min || v > max => {
                return Err(Error::data(
                    location(path, line),
                    format!("value {v} outside declared range [{min}, {max}]"),
                ));
            }
            _ => {}
        }
        lo[f] = lo[f].min(v);
        hi[f] = hi[f].max(v);
    }
    let scales: Vec<Scale> = resolved
        .iter()
        .enumerate()
        .map(|(f, &(kind, range))| match (kind, range) {
            (FeatureKind::Binary, _) => Scale::UNIT,
            (FeatureKind::Continuous, Some((min, max))) => Scale { min, max },
            (FeatureKind::Continuous, None) if !lo[f].is_finite() => Scale::UNIT,
            // A constant column gets unit span so it normalises to 0.
            (FeatureKind::Continuous, None) if hi[f] > lo[f] => Scale {
                min: lo[f],
                max: hi[f],
            },
            (FeatureKind::Continuous, None) => Scale {
                min: lo[f],
                max: lo[f] + 1.0,
            },
        })
        .collect();
    for (f, s) in scales.iter().enumerate() {
        if !(s.span() > 0.0) {
            return Err(Error::data(
                path.display().to_string(),
                format!("feature {:?} has an empty declared range", feature_ids[f]),
            ));
        }
    }
    let triplets = raw
        .iter()
        .map(|&(row, feature, v, _)| Triplet {
            row,
            feature,
            value: scales[feature].normalize(v).clamp(0.0, 1.0),
        })
        .collect();
    let kinds = resolved.iter().map(|&(k, _)| k).collect();
    SparseDataset::with_scales(row_ids.len(), kinds, scales, triplets)?.with_ids(row_ids, feature_ids)
}

/// Writes triplets in original units, ordered by `(row, feature)`.
pub fn write_triplets(path: impl AsRef<Path>, ds: &SparseDataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("row,feature,value\n");
    for t in ds.triplets() {
        let v = ds.scale(t.feature).denormalize(t.value);
        out.push_str(&format!(
            "{},{},{}\n",
            ds.row_ids()[t.row],
            ds.feature_ids()[t.feature],
            v
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a `feature,tags,scalar` metadata file. Tags are `|`-separated and
/// must come from `vocab`; features the file does not mention get no tags.
pub fn load_metadata(
    path: impl AsRef<Path>,
    vocab: &[String],
    ds: &SparseDataset,
) -> Result<MetadataTable> {
    let path = path.as_ref();
    let tag_index: HashMap<&str, usize> =
        vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut entries: Vec<FeatureMeta> = (0..ds.n_features())
        .map(|feature| FeatureMeta {
            feature,
            tags: vec![false; vocab.len()],
            scalar: None,
        })
        .collect();
    let mut seen = HashSet::new();
    let mut rdr = reader(path)?;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if i == 0 && rec.get(0) == Some("feature") && rec.get(1) == Some("tags") {
            continue;
        }
        if rec.is_empty() || rec.len() > 3 {
            return Err(Error::data(
                location(path, line),
                format!("expected feature,tags,scalar but found {} fields", rec.len()),
            ));
        }
        let id = &rec[0];
        let feature = ds.feature_index(id).ok_or_else(|| {
            Error::data(location(path, line), format!("feature {id:?} is not in the dataset"))
        })?;
        if !seen.insert(feature) {
            return Err(Error::data(location(path, line), format!("feature {id:?} listed twice")));
        }
        let entry = &mut entries[feature];
        if let Some(tags) = rec.get(1).filter(|s| !s.is_empty()) {
            for tag in tags.split('|').map(str::trim).filter(|t| !t.is_empty()) {
                let j = tag_index.get(tag).ok_or_else(|| {
                    Error::data(location(path, line), format!("unknown tag {tag:?}"))
                })?;
                entry.tags[*j] = true;
            }
        }
        if let Some(s) = rec.get(2).filter(|s| !s.is_empty()) {
            let v: f64 = s.parse().map_err(|_| {
                Error::data(location(path, line), format!("unparseable scalar {s:?}"))
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::data(location(path, line), format!("scalar {v} outside [0,1]")));
            }
            entry.scalar = Some(v);
        }
    }
    MetadataTable::new(vocab.to_vec(), entries)
        .map_err(|e| Error::data(path.display().to_string(), e.to_string()))
}

pub fn write_metadata(path: impl AsRef<Path>, meta: &MetadataTable, ds: &SparseDataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("feature,tags,scalar\n");
    for m in meta.entries() {
        let tags: Vec<&str> = m
            .tags
            .iter()
            .zip(meta.vocab())
            .filter(|(on, _)| **on)
            .map(|(_, t)| t.as_str())
            .collect();
        let scalar = m.scalar.map(|s| s.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{}\n",
            ds.feature_ids()[m.feature],
            tags.join("|"),
            scalar
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One tag per line.
pub fn read_vocab(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Rows of space-separated floats.
pub fn write_factors(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_factors(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::data(location(path, i as u64 + 1), e.to_string()))?;
        if *cols.get_or_insert(vals.len()) != vals.len() {
            return Err(Error::data(location(path, i as u64 + 1), "ragged factor row"));
        }
        data.extend(vals);
        rows += 1;
    }
    Matrix::from_vec(rows, cols.unwrap_or(0), data)
}

/// File layout of a dataset directory.
#[derive(Clone, Debug)]
pub struct DataDir {
    pub root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn triplets(&self) -> PathBuf {
        self.root.join("triplets.csv")
    }

    pub fn metadata(&self) -> PathBuf {
        self.root.join("metadata.csv")
    }

    pub fn vocab(&self) -> PathBuf {
        self.root.join("vocab.txt")
    }

    /// `feature,original_id,kind,min,max`: compaction order and normalisation.
    pub fn features(&self) -> PathBuf {
        self.root.join("features.csv")
    }

    pub fn rows(&self) -> PathBuf {
        self.root.join("rows.txt")
    }

    pub fn row_factors(&self) -> PathBuf {
        self.root.join("row_factors.txt")
    }

    pub fn feature_factors(&self) -> PathBuf {
        self.root.join("feature_factors.txt")
    }
}

/// Writes triplets, the feature sidecar, and metadata/vocab when given.
pub fn save_data_dir(
    dir: &DataDir,
    ds: &SparseDataset,
    meta: Option<&MetadataTable>,
) -> Result<()> {
    fs::create_dir_all(&dir.root).map_err(|e| Error::io(&dir.root, e))?;
    write_triplets(dir.triplets(), ds)?;
    let path = dir.features();
    let mut out = String::from("feature,original_id,kind,min,max\n");
    for f in 0..ds.n_features() {
        let s = ds.scale(f);
        out.push_str(&format!(
            "{f},{},{},{},{}\n",
            ds.feature_ids()[f],
            ds.kind(f),
            s.min,
            s.max
        ));
    }
    fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    let path = dir.rows();
    let rows: String = ds.row_ids().iter().map(|id| format!("{id}\n")).collect();
    fs::write(&path, rows).map_err(|e| Error::io(&path, e))?;
    if let Some(meta) = meta {
        write_metadata(dir.metadata(), meta, ds)?;
        let path = dir.vocab();
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        for t in meta.vocab() {
            writeln!(f, "{t}").map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

/// Loads a dataset directory. Kinds, ranges and feature order come from the
/// feature sidecar when present, otherwise from `fallback`; row order comes
/// from the row list when present. Metadata is loaded when both the
/// metadata file and vocabulary exist.
pub fn load_data_dir(
    dir: &DataDir,
    fallback: &KindSpec,
) -> Result<(SparseDataset, Option<MetadataTable>)> {
    let mut spec = if dir.features().exists() {
        let path = dir.features();
        let mut spec = fallback.clone();
        spec.feature_order.clear();
        let mut rdr = reader(&path)?;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(&path, e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if i == 0 && rec.get(0) == Some("feature") {
                continue;
            }
            if rec.len() != 5 {
                return Err(Error::data(location(&path, line), "expected 5 fields"));
            }
            let kind: FeatureKind = rec[2]
                .parse()
                .map_err(|e: Error| Error::data(location(&path, line), e.to_string()))?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::data(location(&path, line), format!("bad bound {s:?}")))
            };
            let range = (parse(&rec[3])?, parse(&rec[4])?);
            spec = spec.with_feature(&rec[1], kind, Some(range));
            spec.feature_order.push(rec[1].to_string());
        }
        spec
    } else {
        fallback.clone()
    };
    if dir.rows().exists() {
        let path = dir.rows();
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        spec.row_order = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    }
    let ds = load_triplets(dir.triplets(), &spec)?;
    let meta = if dir.metadata().exists() && dir.vocab().exists() {
        let vocab = read_vocab(dir.vocab())?;
        Some(load_metadata(dir.metadata(), &vocab, &ds)?)
    } else {
        None
    };
    Ok((ds, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_and_normalises_declared_range() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "row,feature,value\n0,0,3\n0,1,5\n1,0,1\n");
        let ds = load_triplets(&p, &KindSpec::all(FeatureKind::Continuous).with_range(1.0, 5.0))
            .unwrap();
        assert_eq!((ds.n_rows(), ds.n_features()), (2, 2));
        assert_eq!(ds.value(0, 0), Some(0.5));
        assert_eq!(ds.value(0, 1), Some(1.0));
        assert_eq!(ds.value(1, 0), Some(0.0));
        assert_eq!(ds.scale(0), Scale { min: 1.0, max: 5.0 });
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "");
        let ds = load_triplets(&p, &KindSpec::all(FeatureKind::Binary)).unwrap();
        assert_eq!((ds.n_rows(), ds.n_features()), (0, 0));
    }

    #[test]
    fn duplicate_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "0,0,2\n1,0,3\n0,0,2\n");
        let err = load_triplets(&p, &KindSpec::all(FeatureKind::Continuous)).unwrap_err();
        match err {
            Error::Data { location, message } => {
                assert!(location.ends_with(":3"), "{location}");
                assert!(message.contains("duplicate") && message.contains("line 1"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_binary_value_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "0,0,1\n1,0,2\n");
        let err = load_triplets(&p, &KindSpec::all(FeatureKind::Binary)).unwrap_err();
        assert!(matches!(err, Error::Data { .. }));
    }

    #[test]
    fn sparse_ids_compact_in_first_appearance_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "u9,m70,1\nu3,m12,0\nu9,m12,1\n");
        let ds = load_triplets(&p, &KindSpec::all(FeatureKind::Binary)).unwrap();
        assert_eq!(ds.row_ids(), &["u9", "u3"]);
        assert_eq!(ds.feature_ids(), &["m70", "m12"]);
        assert_eq!(ds.value(0, 1), Some(1.0));
    }

    #[test]
    fn declared_order_comes_first() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "b,y,1\na,x,0\n");
        let spec = KindSpec::all(FeatureKind::Binary)
            .with_order(vec!["a".into(), "c".into()], vec!["x".into(), "z".into(), "y".into()]);
        let ds = load_triplets(&p, &spec).unwrap();
        assert_eq!(ds.row_ids(), ["a", "c", "b"]);
        assert_eq!(ds.feature_ids(), ["x", "z", "y"]);
        assert_eq!(ds.value(2, 2), Some(1.0));
        assert_eq!(ds.observed_count(1), 0);
        let twice = KindSpec::all(FeatureKind::Binary).with_order(vec![], vec!["x".into(), "x".into()]);
        assert!(load_triplets(&p, &twice).is_err());
    }

    fn vocab() -> Vec<String> {
        ["Action", "Comedy", "Drama"].iter().map(|s| s.to_string()).collect()
    }

    fn three_feature_ds() -> SparseDataset {
        SparseDataset::new(1, vec![FeatureKind::Binary; 3], vec![]).unwrap()
    }

    #[test]
    fn metadata_multi_hot() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "feature,tags,scalar\n0,Action|Comedy,0.5\n1,,0.1\n2,Drama,0.9\n");
        let meta = load_metadata(&p, &vocab(), &three_feature_ds()).unwrap();
        assert_eq!(meta.get(0).tags, vec![true, true, false]);
        assert_eq!(meta.get(0).scalar, Some(0.5));
        assert_eq!(meta.encode(0), vec![1.0, 1.0, 0.0, 0.5]);
        assert!(meta.get(1).tags.iter().all(|t| !t));
    }

    #[test]
    fn metadata_empty_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "1,,\n");
        let meta = load_metadata(&p, &vocab(), &three_feature_ds()).unwrap();
        assert_eq!(meta.get(1).tags, vec![false; 3]);
        assert_eq!(meta.get(1).scalar, None);
        assert!(!meta.has_scalar());
    }

    #[test]
    fn metadata_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "2,Horror,\n");
        assert!(matches!(
            load_metadata(&p, &vocab(), &three_feature_ds()),
            Err(Error::Data { .. })
        ));
        let p = write(&dir, "m2.csv", "7,Action,\n");
        assert!(load_metadata(&p, &vocab(), &three_feature_ds()).is_err());
        // scalar for some features only
        let p = write(&dir, "m3.csv", "0,Action,0.2\n1,Drama,\n");
        assert!(load_metadata(&p, &vocab(), &three_feature_ds()).is_err());
    }

    #[test]
    fn factors_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Matrix::from_vec(2, 3, vec![0.1, -2.5, 1e-17, 3.0, 0.3333333333333333, -0.0])
            .unwrap();
        let p = dir.path().join("f.txt");
        write_factors(&p, &m).unwrap();
        assert_eq!(read_factors(&p).unwrap(), m);
    }
}
