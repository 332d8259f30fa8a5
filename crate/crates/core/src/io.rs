//! Dataset files, labels and the Result document.
//!
//! Datasets are CSV (one point per row, optional header) or a JSON array of
//! points. Result documents are JSON with a fixed field order and every float
//! written with 17 significant digits, so identical runs diff clean.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::ser::Serialize;
use serde::{Deserialize, Serialize as SerializeDerive};
use nalgebra::DVector;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::model::{DataPoint, FundamentalMatrix, Hypothesis, ModelKind};
use crate::pipeline::{EstimationResult, EstimatorConfig, IterationDiagnostics, Termination};

/// Reads a dataset of `dim`-column points. JSON is chosen by a `.json`
/// extension or a leading `[`; anything else is read as CSV.
pub fn read_dataset(path: &Path, dim: usize) -> Result<Vec<DataPoint>> {
    let text = fs::read_to_string(path)?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
        || text.trim_start().starts_with('[');
    if json {
        parse_json_dataset(&text, dim)
    } else {
        parse_csv_dataset(&text, dim)
    }
}

fn check_row(values: Vec<f64>, dim: usize, row: usize) -> Result<DataPoint> {
    if values.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: values.len(),
        });
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("row {row}: non-finite value {v}")));
    }
    Ok(DataPoint::new(values))
}

/// CSV text to points. A first row that does not parse as numbers is a header.
pub fn parse_csv_dataset(text: &str, dim: usize) -> Result<Vec<DataPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => points.push(check_row(values, dim, row + 1)?),
            Err(_) if row == 0 => {
                if record.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: record.len(),
                    });
                }
            }
            Err(e) => return Err(Error::InvalidInput(format!("row {}: {e}", row + 1))),
        }
    }
    Ok(points)
}

/// JSON array of `dim`-vectors to points.
pub fn parse_json_dataset(text: &str, dim: usize) -> Result<Vec<DataPoint>> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| check_row(r, dim, i + 1))
        .collect()
}

/// CSV text for a dataset, with an optional header row.
pub fn dataset_csv(points: &[DataPoint], header: Option<&[String]>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for p in points {
        w.write_record(p.y.iter().map(|v| v.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// One label per line, `-1` for outliers.
pub fn labels_csv(labels: &[i64]) -> Vec<u8> {
    let mut out = String::from("label\n");
    for l in labels {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    out.into_bytes()
}

/// Reads a labels file written by [`labels_csv`].
pub fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && *l != "label")
        .map(|l| l.parse().map_err(|e| Error::InvalidInput(format!("label {l:?}: {e}"))))
        .collect()
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Pretty JSON whose floats carry 17 significant digits.
struct FixedFloats(PrettyFormatter<'static>);

impl FixedFloats {
    fn new() -> Self {
        Self(PrettyFormatter::with_indent(b"  "))
    }
}

fn write_float<W: ?Sized + io::Write>(w: &mut W, v: f64) -> io::Result<()> {
    if v.is_finite() {
        write!(w, "{v:.16e}")
    } else {
        w.write_all(b"null")
    }
}

impl Formatter for FixedFloats {
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_float(w, v as f64)
    }
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_float(w, v)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with fixed float formatting.
pub fn to_fixed_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats::new());
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

/// Settings echoed at the top of a Result document.
#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
pub struct ConfigEcho {
    pub model: ModelKind,
    pub input: Option<String>,
    pub points: usize,
    pub estimator: EstimatorConfig,
}

/// One recovered structure, in original units.
#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
pub struct StructureRecord {
    /// 1-based position in the strength ordering.
    pub rank: usize,
    pub strength: f64,
    /// Refit scale `σ_tls`.
    pub scale: f64,
    pub n_in: usize,
    pub theta: Vec<f64>,
    pub alpha: f64,
    /// Scale estimate `σ̂` of the iteration that found the structure.
    pub sigma_hat: f64,
    pub iteration: usize,
    pub exact_fit: bool,
    pub weak: bool,
    pub inlier_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
pub struct ResultDocument {
    pub config: ConfigEcho,
    pub structures: Vec<StructureRecord>,
    pub unclassified: Vec<usize>,
    pub termination: Termination,
    pub diagnostics: Vec<IterationDiagnostics>,
    /// Seconds, present only when timing was requested.
    pub wall_clock: Option<f64>,
}

impl ResultDocument {
    pub fn new(config: ConfigEcho, result: &EstimationResult, wall_clock: Option<f64>) -> Self {
        let structures = result
            .structures
            .iter()
            .enumerate()
            .map(|(k, s)| StructureRecord {
                rank: k + 1,
                strength: s.strength,
                scale: s.sigma_tls,
                n_in: s.n_in(),
                theta: s.theta.iter().copied().collect(),
                alpha: s.alpha,
                sigma_hat: s.sigma_hat,
                iteration: s.iteration,
                exact_fit: s.exact_fit,
                weak: s.weak,
                inlier_indices: s.inliers.clone(),
            })
            .collect();
        Self {
            config,
            structures,
            unclassified: result.unclassified.clone(),
            termination: result.termination,
            diagnostics: result.diagnostics.clone(),
            wall_clock,
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        to_fixed_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Replaces every fundamental-matrix estimate by its closest rank-2
    /// matrix. Other models are left alone.
    pub fn project_rank2(&mut self) {
        if self.config.model != ModelKind::FundamentalMatrix {
            return;
        }
        for s in &mut self.structures {
            let Some(h) = Hypothesis::new(DVector::from_vec(s.theta.clone()), s.alpha) else {
                continue;
            };
            let f = FundamentalMatrix::rank2_projection(&FundamentalMatrix::to_matrix(&h));
            if let Some(p) = FundamentalMatrix::from_matrix(&f) {
                s.theta = p.theta.iter().copied().collect();
                s.alpha = p.alpha;
            }
        }
    }

    /// Checks the document against the dataset it claims to describe: ranks
    /// `1..K` with non-increasing strengths, `θ` of the model's length, and
    /// every point either in exactly one structure or unclassified.
    pub fn validate_against(&self, points: &[DataPoint]) -> Result<()> {
        let model = self.config.model.model();
        let fail = |msg: String| Err(Error::InvalidInput(msg));
        if self.config.points != points.len() {
            return fail(format!(
                "document describes {} points, dataset has {}",
                self.config.points,
                points.len()
            ));
        }
        if let Some(p) = points.iter().find(|p| p.dim() != model.input_dim()) {
            return fail(format!("point of dimension {} for {}", p.dim(), self.config.model));
        }
        let mut seen = vec![false; points.len()];
        let mut claim = |i: usize| -> Result<()> {
            match seen.get_mut(i) {
                None => fail(format!("index {i} out of range")),
                Some(true) => fail(format!("index {i} assigned twice")),
                Some(s) => {
                    *s = true;
                    Ok(())
                }
            }
        };
        for (k, s) in self.structures.iter().enumerate() {
            if s.rank != k + 1 {
                return fail(format!("structure {k} has rank {}", s.rank));
            }
            if k > 0 && s.strength > self.structures[k - 1].strength {
                return fail(format!("rank {} is stronger than rank {}", s.rank, k));
            }
            if s.theta.len() != model.carrier_dim() {
                return fail(format!("rank {}: theta of length {}", s.rank, s.theta.len()));
            }
            if s.n_in != s.inlier_indices.len() {
                return fail(format!("rank {}: n_in {} with {} indices", s.rank, s.n_in, s.inlier_indices.len()));
            }
            for &i in &s.inlier_indices {
                claim(i)?;
            }
        }
        for &i in &self.unclassified {
            claim(i)?;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return fail(format!("point {i} is neither an inlier nor unclassified"));
        }
        Ok(())
    }
}

/// Per-structure coordinates for external plotting: `run,rank,index,label,y…`
/// with rank 0 for unclassified points.
pub fn plot_rows(run: usize, points: &[DataPoint], labels: &[i64], result: &EstimationResult) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let mut push = |rank: usize, i: usize| {
        let mut row = vec![run.to_string(), rank.to_string(), i.to_string()];
        row.push(labels.get(i).map_or(String::new(), |l| l.to_string()));
        row.extend(points[i].y.iter().map(|v| v.to_string()));
        rows.push(row);
    };
    for (k, s) in result.structures.iter().enumerate() {
        for &i in &s.inliers {
            push(k + 1, i);
        }
    }
    for &i in &result.unclassified {
        push(0, i);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Line2D;
    use crate::pipeline::run;

    #[test]
    fn csv_with_header_and_comments() {
        let pts = parse_csv_dataset("x, y\n# note\n1, 2\n3.5,-4\n", 2).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1].y, vec![3.5, -4.0]);
    }

    #[test]
    fn rank2_export_is_singular() {
        let points: Vec<DataPoint> = (0..40)
            .map(|i| {
                let t = i as f64;
                DataPoint::new(vec![t.sin() * 50.0, t.cos() * 40.0, t * 3.0 - 60.0, (t * 0.7).sin() * 30.0])
            })
            .collect();
        let result = run(&points, &FundamentalMatrix, &EstimatorConfig { trials: 50, ..Default::default() }).unwrap();
        let echo = ConfigEcho {
            model: ModelKind::FundamentalMatrix,
            input: None,
            points: points.len(),
            estimator: EstimatorConfig::default(),
        };
        let mut doc = ResultDocument::new(echo, &result, None);
        doc.project_rank2();
        assert!(!doc.structures.is_empty());
        for s in &doc.structures {
            let h = Hypothesis::new(DVector::from_vec(s.theta.clone()), s.alpha).unwrap();
            let f = FundamentalMatrix::to_matrix(&h);
            let sv = f.svd(false, false).singular_values;
            assert!(sv.min() < 1e-9 * sv.max());
        }
    }

    #[test]
    fn csv_column_mismatch() {
        let err = parse_csv_dataset("1,2,3\n4,5,6\n", 2).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, actual: 3 }));
        let err = parse_csv_dataset("a,b,c\n1,2\n", 2).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn non_finite_and_garbage_rejected() {
        assert!(parse_csv_dataset("1,2\nnan,3\n", 2).is_err());
        assert!(parse_csv_dataset("1,2\ninf,3\n", 2).is_err());
        assert!(parse_csv_dataset("1,2\nfoo,3\n", 2).is_err());
    }

    #[test]
    fn json_dataset() {
        let pts = parse_json_dataset("[[1, 2], [3, 4]]", 2).unwrap();
        assert_eq!(pts[0].y, vec![1.0, 2.0]);
        assert!(parse_json_dataset("[[1, 2, 3]]", 2).is_err());
    }

    #[test]
    fn empty_csv_has_no_points() {
        assert!(parse_csv_dataset("", 2).unwrap().is_empty());
    }

    #[test]
    fn fixed_float_format() {
        let json = String::from_utf8(to_fixed_json(&vec![0.1, -2.5e-8, 3.0]).unwrap()).unwrap();
        assert!(json.contains("1.0000000000000001e-1"), "{json}");
        assert!(json.contains("-2.4999999999999999e-8"), "{json}");
        assert!(json.contains("3.0000000000000000e0"), "{json}");
        let back: Vec<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![0.1, -2.5e-8, 3.0]);
    }

    #[test]
    fn document_round_trip_and_validation() {
        let points: Vec<DataPoint> = (0..60)
            .map(|i| DataPoint::new(vec![i as f64, if i < 50 { 0.5 * i as f64 } else { 40.0 - i as f64 * 3.0 }]))
            .collect();
        let cfg = EstimatorConfig { trials: 50, ..Default::default() };
        let result = run(&points, &Line2D, &cfg).unwrap();
        let echo = ConfigEcho {
            model: ModelKind::Line2D,
            input: None,
            points: points.len(),
            estimator: cfg,
        };
        let doc = ResultDocument::new(echo, &result, None);
        let json = doc.to_json().unwrap();
        let back = ResultDocument::from_json(std::str::from_utf8(&json).unwrap()).unwrap();
        assert_eq!(back, doc);
        back.validate_against(&points).unwrap();
        assert!(back.validate_against(&points[..59]).is_err());

        let mut broken = back.clone();
        if let Some(s) = broken.structures.first_mut() {
            s.inlier_indices.push(s.inlier_indices[0]);
            s.n_in += 1;
        }
        assert!(broken.validate_against(&points).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        fs::write(&path, labels_csv(&[0, -1, 2])).unwrap();
        assert_eq!(read_labels(&path).unwrap(), vec![0, -1, 2]);
    }
}
