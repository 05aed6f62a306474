//! File formats: CSV matrices, point clouds, and measures; JSON space
//! descriptors; and wire schemas for results.
//!
//! All floating-point output uses 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64` bit-exactly, with `inf` / `-inf` tokens for
//! infinities (allowed in distance matrices, where they mean "nothing in
//! common"). Outputs are byte-deterministic: maps are ordered, formatting is
//! fixed, and no timestamps or environment data are embedded.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::asymptotics::ScalingProfile;
use crate::diversity::DiversityProfile;
use crate::error::{Error, Result};
use crate::maxdiv_exact::MaxDivResult;
use crate::spaces::{Measure, Metric, SimilaritySpace};

/// Formats a float at 17 significant digits; round-trips bit-exactly.
pub fn fmt_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Parses a float, accepting `inf` tokens but rejecting NaN.
pub fn parse_f64(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    if v.is_nan() {
        None
    } else {
        Some(v)
    }
}

fn parse_error(path: &Path, line: usize, detail: String) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        detail,
    }
}

fn read_float_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                parse_f64(field).ok_or_else(|| {
                    parse_error(path, idx + 1, format!("bad float {:?}", field.trim()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, "no data rows".into()));
    }
    Ok(rows)
}

/// Reads a headerless square matrix of comma-separated floats.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_float_rows(path)?;
    let n = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(parse_error(
                path,
                i + 1,
                format!("row has {} fields, expected {n}", row.len()),
            ));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

/// Writes a matrix as headerless CSV at full precision.
pub fn write_matrix_csv<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a point cloud: one point per row, coordinates comma-separated.
pub fn read_points_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    read_float_rows(path)
}

/// Reads a measure as `label,weight` rows against the space's labels.
/// Labels not mentioned get weight zero; unknown or repeated labels fail.
pub fn read_measure_csv(path: &Path, labels: &[String]) -> Result<Measure> {
    let index: BTreeMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let text = fs::read_to_string(path)?;
    let mut weights = vec![0.0; labels.len()];
    let mut seen = vec![false; labels.len()];
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let Some((label, weight)) = line.rsplit_once(',') else {
            return Err(parse_error(
                path,
                idx + 1,
                "expected label,weight".into(),
            ));
        };
        let label = label.trim();
        let &i = index.get(label).ok_or_else(|| Error::UnknownLabel {
            label: label.to_string(),
        })?;
        if seen[i] {
            return Err(Error::DuplicateLabel {
                label: label.to_string(),
            });
        }
        seen[i] = true;
        weights[i] = parse_f64(weight)
            .ok_or_else(|| parse_error(path, idx + 1, format!("bad weight {weight:?}")))?;
    }
    Measure::new(weights)
}

/// Writes weights as `label,weight` rows (the measure input format).
pub fn write_weights_csv<W: Write>(mut w: W, labels: &[String], weights: &[f64]) -> Result<()> {
    for (label, &weight) in labels.iter().zip(weights) {
        writeln!(w, "{label},{}", fmt_f64(weight))?;
    }
    Ok(())
}

/// What the data file of a [`SpaceDescriptor`] contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Kernel,
    Points,
    Distances,
}

/// Metric name in a descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    Euclidean,
    L1,
}

impl From<MetricName> for Metric {
    fn from(m: MetricName) -> Metric {
        match m {
            MetricName::Euclidean => Metric::Euclidean,
            MetricName::L1 => Metric::L1,
        }
    }
}

/// JSON description of where and how to load a space:
/// `{ "kind": "kernel"|"points"|"distances", "path": ..., "metric": ...,
/// "scale": t }`. `metric` applies to points (default Euclidean); `scale`
/// multiplies distances (points and distances kinds). The data path is
/// resolved relative to the descriptor file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDescriptor {
    pub kind: SpaceKind,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

/// Loads a space from a JSON descriptor file.
pub fn load_space(descriptor_path: &Path) -> Result<SimilaritySpace> {
    let text = fs::read_to_string(descriptor_path)?;
    let desc: SpaceDescriptor = serde_json::from_str(&text)?;
    let data = if desc.path.is_absolute() {
        desc.path.clone()
    } else {
        descriptor_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&desc.path)
    };
    match desc.kind {
        SpaceKind::Kernel => {
            if desc.scale.is_some() {
                return Err(Error::BadDescriptor {
                    detail: "scale applies to points or distances, not kernels".into(),
                });
            }
            if desc.metric.is_some() {
                return Err(Error::BadDescriptor {
                    detail: "metric applies to points".into(),
                });
            }
            SimilaritySpace::from_kernel(read_matrix_csv(&data)?, None)
        }
        SpaceKind::Points => {
            let pts = read_points_csv(&data)?;
            let metric = desc.metric.unwrap_or(MetricName::Euclidean).into();
            SimilaritySpace::from_points(&pts, metric, desc.scale.unwrap_or(1.0), None)
        }
        SpaceKind::Distances => {
            if desc.metric.is_some() {
                return Err(Error::BadDescriptor {
                    detail: "metric applies to points".into(),
                });
            }
            SimilaritySpace::from_distances(read_matrix_csv(&data)?, desc.scale.unwrap_or(1.0), None)
        }
    }
}

/// Builds the result wire object: value, entropy, labeled support and
/// measure, certificates, and solver metadata.
pub fn maxdiv_result_json(labels: &[String], r: &MaxDivResult) -> Result<serde_json::Value> {
    #[derive(Serialize)]
    struct Wire<'a> {
        value: f64,
        entropy: f64,
        support: Vec<&'a String>,
        measure: BTreeMap<&'a String, f64>,
        method: crate::maxdiv_exact::SolverMethod,
        local_only: bool,
        ill_conditioned: bool,
        condition_estimate: Option<f64>,
        certificates: &'a crate::maxdiv_exact::VerifyReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        telemetry: Option<&'a crate::maxdiv_exact::SolverTelemetry>,
    }
    let measure: BTreeMap<&String, f64> = labels
        .iter()
        .zip(r.measure.weights().iter().copied())
        .collect();
    let wire = Wire {
        value: r.value,
        entropy: r.entropy(),
        support: r.support.iter().map(|&i| &labels[i]).collect(),
        measure,
        method: r.method,
        local_only: r.local_only,
        ill_conditioned: r.ill_conditioned,
        condition_estimate: r.condition_estimate,
        certificates: &r.certificates,
        telemetry: r.telemetry.as_ref(),
    };
    Ok(serde_json::to_value(&wire)?)
}

/// Writes a diversity profile as CSV with header `q,diversity,entropy`.
pub fn write_profile_csv<W: Write>(mut w: W, profile: &DiversityProfile) -> Result<()> {
    writeln!(w, "q,diversity,entropy")?;
    for e in &profile.entries {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(e.order.value()),
            fmt_f64(e.diversity),
            fmt_f64(e.entropy)
        )?;
    }
    Ok(())
}

/// Writes a scaling profile as CSV with header `t,dmax,magnitude,tv_step`.
/// The magnitude field is empty when no weighting exists; the first row's
/// `tv_step` is empty (steps compare successive rows).
pub fn write_scaling_csv<W: Write>(mut w: W, profile: &ScalingProfile) -> Result<()> {
    writeln!(w, "t,dmax,magnitude,tv_step")?;
    let tvs = profile.tv_steps()?;
    for (i, p) in profile.points.iter().enumerate() {
        let mag = p.magnitude.map(fmt_f64).unwrap_or_default();
        let tv = if i == 0 {
            String::new()
        } else {
            fmt_f64(tvs[i - 1])
        };
        writeln!(w, "{},{},{mag},{tv}", fmt_f64(p.t), fmt_f64(p.dmax))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxdiv_exact::max_diversity_exact;

    fn write_temp(dir: &Path, name: &str, contents: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    #[test]
    fn float_format_round_trips_bit_exactly() {
        let values = [
            0.0,
            -0.0,
            1.0 / 3.0,
            2.0 / (1.0 + (-1.0f64).exp()),
            f64::MIN_POSITIVE,
            4.9e-324,
            1.7976931348623157e308,
            -123456.78901234567,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ];
        for v in values {
            let s = fmt_f64(v);
            let back = parse_f64(&s).unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s} -> {back}");
        }
        assert_eq!(parse_f64("nan"), None);
        assert_eq!(parse_f64("cheese"), None);
        assert_eq!(parse_f64(" 2.5 "), Some(2.5));
        assert_eq!(parse_f64("inf"), Some(f64::INFINITY));
    }

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let m = DMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                1.0
            } else {
                (-(1.0 + i as f64 * 0.37 + j as f64 * 0.11)).exp()
            }
        });
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m).unwrap();
        let p = write_temp(dir.path(), "m.csv", std::str::from_utf8(&buf).unwrap());
        let back = read_matrix_csv(&p).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn infinite_distances_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_temp(dir.path(), "d.csv", "0,inf\ninf,0\n");
        let d = read_matrix_csv(&p).unwrap();
        assert_eq!(d[(0, 1)], f64::INFINITY);
        let s = SimilaritySpace::from_distances(d, 1.0, None).unwrap();
        assert_eq!(s.kernel()[(0, 1)], 0.0);
    }

    #[test]
    fn malformed_matrices_are_reported_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = write_temp(dir.path(), "r.csv", "1,0\n0\n");
        match read_matrix_csv(&ragged) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("expected parse error on line 2, got {other:?}"),
        }
        let garbage = write_temp(dir.path(), "g.csv", "1,zero\n");
        assert!(matches!(
            read_matrix_csv(&garbage),
            Err(Error::Parse { line: 1, .. })
        ));
        let empty = write_temp(dir.path(), "e.csv", "\n\n");
        assert!(matches!(read_matrix_csv(&empty), Err(Error::Parse { .. })));
        let nan = write_temp(dir.path(), "n.csv", "1,nan\nnan,1\n");
        assert!(matches!(read_matrix_csv(&nan), Err(Error::Parse { .. })));
    }

    #[test]
    fn measure_csv_reads_partial_label_sets() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let p = write_temp(dir.path(), "mu.csv", "c,0.25\na,0.75\n");
        let mu = read_measure_csv(&p, &labels).unwrap();
        assert_eq!(mu.weights(), &[0.75, 0.0, 0.25]);

        let unknown = write_temp(dir.path(), "u.csv", "d,1.0\n");
        assert!(matches!(
            read_measure_csv(&unknown, &labels),
            Err(Error::UnknownLabel { .. })
        ));
        let dupe = write_temp(dir.path(), "dup.csv", "a,0.5\na,0.5\n");
        assert!(matches!(
            read_measure_csv(&dupe, &labels),
            Err(Error::DuplicateLabel { .. })
        ));
    }

    #[test]
    fn weights_csv_round_trips_as_a_measure() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
        let weights = [1.0 / 3.0, 2.0 / 3.0];
        let mut buf = Vec::new();
        write_weights_csv(&mut buf, &labels, &weights).unwrap();
        let p = write_temp(dir.path(), "w.csv", std::str::from_utf8(&buf).unwrap());
        let mu = read_measure_csv(&p, &labels).unwrap();
        assert_eq!(mu.weights()[0].to_bits(), weights[0].to_bits());
        assert_eq!(mu.weights()[1].to_bits(), weights[1].to_bits());
    }

    #[test]
    fn descriptors_load_each_kind() {
        let dir = tempfile::tempdir().unwrap();
        write_temp(dir.path(), "k.csv", "1,0.5\n0.5,1\n");
        write_temp(dir.path(), "p.csv", "0,0\n1,0\n0,2\n");
        write_temp(dir.path(), "d.csv", "0,1\n1,0\n");

        let kd = write_temp(
            dir.path(),
            "kernel.json",
            r#"{"kind":"kernel","path":"k.csv"}"#,
        );
        let s = load_space(&kd).unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(s.kernel()[(0, 1)], 0.5);
        assert!(!s.is_metric_origin());

        let pd = write_temp(
            dir.path(),
            "points.json",
            r#"{"kind":"points","path":"p.csv","metric":"l1","scale":2.0}"#,
        );
        let s = load_space(&pd).unwrap();
        assert_eq!(s.n(), 3);
        assert_eq!(s.distances().unwrap()[(0, 2)], 4.0);

        let dd = write_temp(
            dir.path(),
            "dist.json",
            r#"{"kind":"distances","path":"d.csv"}"#,
        );
        let s = load_space(&dd).unwrap();
        assert!(s.is_metric_origin());
        assert_eq!(s.kernel()[(0, 1)], (-1.0f64).exp());
    }

    #[test]
    fn descriptors_reject_misapplied_fields() {
        let dir = tempfile::tempdir().unwrap();
        write_temp(dir.path(), "k.csv", "1\n");
        let bad_scale = write_temp(
            dir.path(),
            "a.json",
            r#"{"kind":"kernel","path":"k.csv","scale":2.0}"#,
        );
        assert!(matches!(
            load_space(&bad_scale),
            Err(Error::BadDescriptor { .. })
        ));
        let bad_metric = write_temp(
            dir.path(),
            "b.json",
            r#"{"kind":"distances","path":"k.csv","metric":"l1"}"#,
        );
        assert!(matches!(
            load_space(&bad_metric),
            Err(Error::BadDescriptor { .. })
        ));
        let unknown_field = write_temp(
            dir.path(),
            "c.json",
            r#"{"kind":"kernel","path":"k.csv","wat":1}"#,
        );
        assert!(matches!(load_space(&unknown_field), Err(Error::Json(_))));
    }

    #[test]
    fn result_json_has_the_wire_shape() {
        let s = SimilaritySpace::from_kernel(DMatrix::identity(3, 3), None).unwrap();
        let r = max_diversity_exact(&s, None).unwrap();
        let v = maxdiv_result_json(s.labels(), &r).unwrap();
        assert_eq!(v["value"], 3.0);
        assert!((v["entropy"].as_f64().unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(v["support"].as_array().unwrap().len(), 3);
        assert!((v["measure"]["1"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(v["method"], "enumeration");
        assert_eq!(v["certificates"]["pass"], true);
        // Enumeration attaches no telemetry; the field is omitted entirely.
        assert!(v.get("telemetry").is_none());
    }

    #[test]
    fn profile_and_scaling_csv_have_pinned_headers() {
        use crate::asymptotics::{scaling_profile, MaxDivSolver};
        use crate::diversity::diversity_profile;
        use crate::means::Order;

        let s = SimilaritySpace::from_points(
            &[vec![0.0], vec![1.0]],
            Metric::Euclidean,
            1.0,
            None,
        )
        .unwrap();
        let mu = Measure::uniform(2).unwrap();
        let grid = [Order::ZERO, Order::ONE, Order::INFINITY];
        let profile = diversity_profile(&s, &mu, &grid).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &profile).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("q,diversity,entropy"));
        assert_eq!(lines.count(), 3);
        assert!(text.contains("\ninf,"));

        let sp = scaling_profile(&s, &[1.0, 2.0], &MaxDivSolver::default()).unwrap();
        let mut buf = Vec::new();
        write_scaling_csv(&mut buf, &sp).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,dmax,magnitude,tv_step"));
        let first = lines.next().unwrap();
        assert!(first.ends_with(','), "first row has empty tv_step: {first}");
        let second = lines.next().unwrap();
        let fields: Vec<&str> = second.split(',').collect();
        assert_eq!(fields.len(), 4);
        assert!(parse_f64(fields[3]).is_some());
    }
}
