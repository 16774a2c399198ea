//! Dataset loading, binary-task transforms, unit normalization and stream order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{seq::index, RngExt, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::l2_norm;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Labelled instances stored row-major in one flat buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    k: usize,
    d: usize,
    pub name: String,
    /// Transforms applied so far, `+`-separated.
    pub transform: String,
    /// Original label text for each class index.
    pub class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from raw labels, remapping them to contiguous class
    /// indices in sorted order (numeric when every label parses as a number).
    pub fn from_raw_labels(
        name: &str,
        features: Vec<f64>,
        d: usize,
        raw_labels: Vec<String>,
    ) -> Result<Self> {
        let (labels, class_names) = remap_labels(&raw_labels);
        Self::new(name, features, d, labels, class_names)
    }

    pub fn new(
        name: &str,
        features: Vec<f64>,
        d: usize,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimensions("feature dimension is zero".into()));
        }
        if features.len() != labels.len() * d {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * d,
                got: features.len(),
            });
        }
        let k = class_names.len();
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(Error::Config(format!("label {bad} out of range for {k} classes")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features"));
        }
        Ok(Self {
            features,
            labels,
            k,
            d,
            name: name.to_string(),
            transform: "none".into(),
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn instance(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Keeps the listed rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut features = Vec::with_capacity(rows.len() * self.d);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            features.extend_from_slice(self.instance(i));
            labels.push(self.labels[i]);
        }
        Self {
            features,
            labels,
            k: self.k,
            d: self.d,
            name: self.name.clone(),
            transform: self.transform.clone(),
            class_names: self.class_names.clone(),
        }
    }

    fn push_transform(&mut self, tag: &str) {
        if self.transform == "none" {
            self.transform = tag.to_string();
        } else {
            self.transform = format!("{}+{tag}", self.transform);
        }
    }
}

fn remap_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    let mut names: Vec<String> = raw.to_vec();
    match &numeric {
        Some(_) => {
            names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
            names.dedup_by(|a, b| a.parse::<f64>().unwrap() == b.parse::<f64>().unwrap());
        }
        None => {
            names.sort();
            names.dedup();
        }
    }
    let labels = match numeric {
        Some(vals) => {
            let keys: Vec<f64> = names.iter().map(|s| s.parse().unwrap()).collect();
            vals.iter()
                .map(|v| keys.iter().position(|k| k == v).unwrap())
                .collect()
        }
        None => {
            let lookup: BTreeMap<&str, usize> =
                names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
            raw.iter().map(|s| lookup[s.as_str()]).collect()
        }
    };
    (labels, names)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Reads `label idx:val ...` lines with 1-based indices. The dimension is the
/// largest index seen; shorter rows are zero-padded.
pub fn load_libsvm(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(File::open(path)?);
    parse_libsvm(reader, &dataset_name(path))
}

pub fn parse_libsvm<R: BufRead>(reader: R, name: &str) -> Result<Dataset> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut d = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        let mut tokens = line.split_whitespace();
        let label = tokens.next().expect("non-empty line has a token");
        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("bad feature index {idx:?}")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(format!("feature index {idx} not increasing")));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("bad feature value {val:?}")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value {val}")));
            }
            last = idx;
            row.push((idx - 1, val));
        }
        d = d.max(last);
        rows.push(row);
        raw_labels.push(label.to_string());
    }
    if rows.is_empty() {
        return Err(Error::Format("no instances in libsvm input".into()));
    }
    let mut features = vec![0.0; rows.len() * d];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            features[i * d + j] = v;
        }
    }
    Dataset::from_raw_labels(name, features, d, raw_labels)
}

/// Writes the dataset in libsvm form using the original label text.
pub fn write_libsvm(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for i in 0..ds.len() {
        write!(w, "{}", ds.class_names[ds.label(i)])?;
        for (j, &v) in ds.instance(i).iter().enumerate() {
            if v != 0.0 {
                write!(w, " {}:{}", j + 1, v)?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn read_be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("truncated idx header".into()))
}

/// Reads an idx image file and its label file. Pixels are scaled by 1/255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let mut images = Vec::new();
    File::open(images_path)?.read_to_end(&mut images)?;
    let mut labels = Vec::new();
    File::open(labels_path)?.read_to_end(&mut labels)?;
    parse_idx(&images, &labels, &dataset_name(images_path))
}

pub fn parse_idx(images: &[u8], labels: &[u8], name: &str) -> Result<Dataset> {
    let magic = read_be_u32(images, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!("image file magic {magic:#010x}, expected 0x00000803")));
    }
    let magic = read_be_u32(labels, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!("label file magic {magic:#010x}, expected 0x00000801")));
    }
    let n = read_be_u32(images, 4)? as usize;
    let rows = read_be_u32(images, 8)? as usize;
    let cols = read_be_u32(images, 12)? as usize;
    let n_labels = read_be_u32(labels, 4)? as usize;
    if n != n_labels {
        return Err(Error::Format(format!("{n} images but {n_labels} labels")));
    }
    let d = rows * cols;
    let pixels = &images[16..];
    if pixels.len() != n * d {
        return Err(Error::Format(format!(
            "image payload has {} bytes, header implies {}",
            pixels.len(),
            n * d
        )));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != n {
        return Err(Error::Format(format!(
            "label payload has {} bytes, header implies {n}",
            label_bytes.len()
        )));
    }
    for (i, img) in pixels.chunks_exact(d.max(1)).enumerate() {
        if img.iter().all(|&p| p == 0) {
            return Err(Error::DegenerateInstance { index: i });
        }
    }
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let raw = label_bytes.iter().map(|b| b.to_string()).collect();
    Dataset::from_raw_labels(name, features, d, raw)
}

/// Reads a comma-separated file with a header row; the last column is the label.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut features = Vec::new();
    let mut raw = Vec::new();
    let mut d = None;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: "need at least one feature and a label".into(),
            });
        }
        let width = rec.len() - 1;
        if *d.get_or_insert(width) != width {
            return Err(Error::Parse {
                line,
                msg: format!("expected {} features, found {width}", d.unwrap()),
            });
        }
        for field in rec.iter().take(width) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad feature value {field:?}"),
            })?;
            features.push(v);
        }
        raw.push(rec[width].trim().to_string());
    }
    let d = d.ok_or_else(|| Error::Format("no rows in csv input".into()))?;
    Dataset::from_raw_labels(&dataset_name(path), features, d, raw)
}

/// Named two-class reductions of multi-class corpora.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinaryRule {
    /// Digits: odd is class 1, even is class 0.
    OddEven,
    /// Letters: first thirteen classes versus the last thirteen.
    FirstHalfLetters,
    /// Fashion items: keep T-shirt (0) and Trouser (1) only.
    TshirtTrouser,
    /// CIFAR-10: keep horse (7) and ship (8) only.
    HorseShip,
}

impl BinaryRule {
    pub fn tag(self) -> &'static str {
        match self {
            BinaryRule::OddEven => "odd-even",
            BinaryRule::FirstHalfLetters => "am-nz",
            BinaryRule::TshirtTrouser => "tshirt-trouser",
            BinaryRule::HorseShip => "horse-ship",
        }
    }
}

impl fmt::Display for BinaryRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BinaryRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odd-even" | "mnist" => Ok(BinaryRule::OddEven),
            "am-nz" | "letter" => Ok(BinaryRule::FirstHalfLetters),
            "tshirt-trouser" | "fashion" => Ok(BinaryRule::TshirtTrouser),
            "horse-ship" | "cifar" => Ok(BinaryRule::HorseShip),
            other => Err(Error::Config(format!("unknown transform {other:?}"))),
        }
    }
}

fn numeric_class_values(ds: &Dataset) -> Result<Vec<i64>> {
    ds.class_names
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0)
                .map(|v| v as i64)
                .ok_or_else(|| Error::Config(format!("class {s:?} is not an integer label")))
        })
        .collect()
}

fn keep_pair(ds: &Dataset, a: i64, b: i64, rule: BinaryRule) -> Result<Dataset> {
    let values = numeric_class_values(ds)?;
    let ia = values.iter().position(|&v| v == a);
    let ib = values.iter().position(|&v| v == b);
    let (Some(ia), Some(ib)) = (ia, ib) else {
        return Err(Error::Config(format!(
            "{rule} needs classes {a} and {b}, dataset has {:?}",
            ds.class_names
        )));
    };
    let rows: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.label(i) == ia || ds.label(i) == ib)
        .collect();
    let mut out = ds.select(&rows);
    out.labels = rows.iter().map(|&i| usize::from(ds.label(i) == ib)).collect();
    out.class_names = vec![ds.class_names[ia].clone(), ds.class_names[ib].clone()];
    out.k = 2;
    Ok(out)
}

pub fn binary_transform(ds: &Dataset, rule: BinaryRule) -> Result<Dataset> {
    let mut out = match rule {
        BinaryRule::OddEven => {
            let values = numeric_class_values(ds)?;
            if values.iter().any(|v| !(0..=9).contains(v)) {
                return Err(Error::Config(format!("{rule} expects digit labels 0-9")));
            }
            let mut out = ds.clone();
            out.labels = ds.labels.iter().map(|&y| (values[y] % 2) as usize).collect();
            out.class_names = vec!["even".into(), "odd".into()];
            out.k = 2;
            out
        }
        BinaryRule::FirstHalfLetters => {
            if ds.k != 26 {
                return Err(Error::Config(format!("{rule} expects 26 classes, got {}", ds.k)));
            }
            let mut out = ds.clone();
            out.labels = ds.labels.iter().map(|&y| usize::from(y >= 13)).collect();
            out.class_names = vec!["A-M".into(), "N-Z".into()];
            out.k = 2;
            out
        }
        BinaryRule::TshirtTrouser => keep_pair(ds, 0, 1, rule)?,
        BinaryRule::HorseShip => keep_pair(ds, 7, 8, rule)?,
    };
    out.push_transform(rule.tag());
    Ok(out)
}

/// Keeps a seeded random subset of at most `max` rows, preserving file order.
pub fn cap_samples(ds: &Dataset, max: usize, seed: u64) -> Dataset {
    if ds.len() <= max {
        return ds.clone();
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut rows = index::sample(&mut rng, ds.len(), max).into_vec();
    rows.sort_unstable();
    let mut out = ds.select(&rows);
    out.push_transform(&format!("cap{max}"));
    out
}

/// Divides every instance by its L2 norm. Zero rows cannot be normalized and
/// are dropped; their original indices are returned.
pub fn normalize_unit(ds: &Dataset) -> (Dataset, Vec<usize>) {
    let mut dropped = Vec::new();
    let mut keep = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        if l2_norm(ds.instance(i)) > 0.0 {
            keep.push(i);
        } else {
            dropped.push(i);
        }
    }
    if !dropped.is_empty() {
        log::warn!("{}: dropped {} all-zero instances", ds.name, dropped.len());
    }
    let mut out = ds.select(&keep);
    let d = out.d;
    for row in out.features.chunks_exact_mut(d) {
        let n = l2_norm(row);
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    out.push_transform("l2");
    (out, dropped)
}

/// A seeded permutation of the dataset rows.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamOrder {
    pub perm: Vec<usize>,
    pub seed: u64,
}

impl StreamOrder {
    /// Splits into the streamed prefix and the held-out suffix holding
    /// `round(test_frac · N)` rows.
    pub fn split(&self, test_frac: f64) -> Result<(&[usize], &[usize])> {
        if !(0.0..1.0).contains(&test_frac) {
            return Err(Error::Config(format!("test fraction {test_frac} outside [0,1)")));
        }
        let n_test = (test_frac * self.perm.len() as f64).round() as usize;
        Ok(self.perm.split_at(self.perm.len() - n_test))
    }
}

/// Fisher-Yates shuffle driven by a seeded PCG-64.
pub fn shuffle(n: usize, seed: u64) -> Result<StreamOrder> {
    if n == 0 {
        return Err(Error::Config("cannot shuffle an empty dataset".into()));
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    Ok(StreamOrder { perm, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_bytes(images: &[[u8; 4]], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
        let mut im = Vec::new();
        im.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        im.extend_from_slice(&(images.len() as u32).to_be_bytes());
        im.extend_from_slice(&2u32.to_be_bytes());
        im.extend_from_slice(&2u32.to_be_bytes());
        for img in images {
            im.extend_from_slice(img);
        }
        let mut lb = Vec::new();
        lb.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lb.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lb.extend_from_slice(labels);
        (im, lb)
    }

    #[test]
    fn libsvm_line_to_dense() {
        let ds = parse_libsvm("1 1:0.5 3:0.5\n-1 2:1\n".as_bytes(), "t").unwrap();
        assert_eq!(ds.d(), 3);
        assert_eq!(ds.instance(0), &[0.5, 0.0, 0.5]);
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.class_names, vec!["-1", "1"]);
    }

    #[test]
    fn libsvm_reports_line_numbers() {
        let err = parse_libsvm("1 1:0.5\n\n0 2:x\n".as_bytes(), "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_libsvm("1 0:1\n".as_bytes(), "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let ds = parse_libsvm("10 1:1\n2 1:1\n1 1:1\n".as_bytes(), "t").unwrap();
        assert_eq!(ds.class_names, vec!["1", "2", "10"]);
        assert_eq!(ds.labels(), &[2, 1, 0]);
    }

    #[test]
    fn libsvm_round_trip() {
        let src = "3 1:0.1 4:-2.5\n1 2:0.3333333333333333\n3 3:1e-7\n";
        let ds = parse_libsvm(src.as_bytes(), "t").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.svm");
        write_libsvm(&ds, &p).unwrap();
        let back = load_libsvm(&p).unwrap();
        assert_eq!(back.labels(), ds.labels());
        assert_eq!(back.class_names, ds.class_names);
        for i in 0..ds.len() {
            assert_eq!(back.instance(i), ds.instance(i));
        }
    }

    #[test]
    fn idx_scaling_and_labels() {
        let (im, lb) = idx_bytes(&[[255, 0, 0, 51], [0, 1, 0, 0]], &[7, 4]);
        let ds = parse_idx(&im, &lb, "digits").unwrap();
        assert_eq!(ds.d(), 4);
        assert_eq!(ds.instance(0), &[1.0, 0.0, 0.0, 0.2]);
        assert_eq!(ds.class_names, vec!["4", "7"]);
        let bin = binary_transform(&ds, BinaryRule::OddEven).unwrap();
        assert_eq!(bin.labels(), &[1, 0]);
    }

    #[test]
    fn idx_rejects_blank_image_and_bad_magic() {
        let (im, lb) = idx_bytes(&[[1, 0, 0, 0], [0, 0, 0, 0]], &[1, 2]);
        assert!(matches!(parse_idx(&im, &lb, "x"), Err(Error::DegenerateInstance { index: 1 })));
        let (mut im, lb) = idx_bytes(&[[1, 0, 0, 0]], &[1]);
        im[3] = 0x01;
        assert!(parse_idx(&im, &lb, "x").is_err());
        let (im, lb) = idx_bytes(&[[1, 0, 0, 0]], &[1, 2]);
        assert!(parse_idx(&im, &lb, "x").is_err());
    }

    #[test]
    fn letter_halves() {
        let raw: Vec<String> = (b'A'..=b'Z').map(|c| (c as char).to_string()).collect();
        let ds = Dataset::from_raw_labels("letter", vec![1.0; 26], 1, raw).unwrap();
        let bin = binary_transform(&ds, BinaryRule::FirstHalfLetters).unwrap();
        assert_eq!(bin.label(2), 0); // C
        assert_eq!(bin.label(12), 0); // M
        assert_eq!(bin.label(13), 1); // N
    }

    #[test]
    fn pair_rules_subset() {
        let raw: Vec<String> = (0..10).map(|v| v.to_string()).collect();
        let ds = Dataset::from_raw_labels("c", vec![1.0; 10], 1, raw).unwrap();
        let f = binary_transform(&ds, BinaryRule::TshirtTrouser).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f.labels(), &[0, 1]);
        let c = binary_transform(&ds, BinaryRule::HorseShip).unwrap();
        assert_eq!(c.labels(), &[0, 1]);
        assert_eq!(c.class_names, vec!["7", "8"]);
        assert_eq!(c.transform, "horse-ship");
    }

    #[test]
    fn transform_validates_class_space() {
        let ds = parse_libsvm("a 1:1\nb 1:1\n".as_bytes(), "t").unwrap();
        assert!(binary_transform(&ds, BinaryRule::OddEven).is_err());
        assert!(binary_transform(&ds, BinaryRule::FirstHalfLetters).is_err());
        assert!("bogus".parse::<BinaryRule>().is_err());
    }

    #[test]
    fn normalize_and_drop_zero_rows() {
        let ds = Dataset::new("t", vec![3.0, 4.0, 0.0, 0.0, 1.0, 0.0], 2, vec![0, 1, 0], vec!["a".into(), "b".into()])
            .unwrap();
        let (n, dropped) = normalize_unit(&ds);
        assert_eq!(dropped, vec![1]);
        assert_eq!(n.instance(0), &[0.6, 0.8]);
        assert_eq!(n.len(), 2);
        assert_eq!(n.labels(), &[0, 0]);
    }

    #[test]
    fn shuffle_is_seeded_permutation() {
        let a = shuffle(100, 42).unwrap();
        let b = shuffle(100, 42).unwrap();
        assert_eq!(a, b);
        let mut sorted = a.perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        assert_ne!(a.perm, shuffle(100, 43).unwrap().perm);
        let (train, test) = a.split(0.2).unwrap();
        assert_eq!((train.len(), test.len()), (80, 20));
        assert_eq!(test, &a.perm[80..]);
    }

    #[test]
    fn cap_is_seeded_and_ordered() {
        let raw: Vec<String> = (0..50).map(|v| (v % 2).to_string()).collect();
        let ds = Dataset::from_raw_labels("t", (0..50).map(f64::from).collect(), 1, raw).unwrap();
        let a = cap_samples(&ds, 10, 1);
        assert_eq!(a, cap_samples(&ds, 10, 1));
        assert_eq!(a.len(), 10);
        let vals: Vec<f64> = (0..10).map(|i| a.instance(i)[0]).collect();
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
    }
}
