use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::matrix::csv_error;
use super::{fmt_f64, load_matrix, read_all, save_matrix, schema, write_atomic, IoError};
use crate::cluster::{Dendrogram, Dissimilarity};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::tda::{BettiCurve, PersistenceDiagram, PersistencePoint};
use crate::trainer::{EpochLog, TrainingLog};

/// Pretty JSON with a trailing newline.
pub fn save_json<V: Serialize>(value: &V, path: &Path) -> Result<(), IoError> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn load_json<V: DeserializeOwned>(path: &Path) -> Result<V, IoError> {
    serde_json::from_slice(&read_all(path)?).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

fn rows(path: &Path, expected_header: &[&str]) -> Result<Vec<(u64, Vec<String>)>, IoError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().collect::<Vec<_>>() != expected_header {
        return Err(schema(path, format!("expected header {}", expected_header.join(","))));
    }
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| csv_error(path, e))?;
            Ok((r.position().map_or(0, |p| p.byte()), r.iter().map(str::to_owned).collect()))
        })
        .collect()
}

fn field<V: std::str::FromStr>(path: &Path, offset: u64, s: &str) -> Result<V, IoError> {
    s.trim().parse().map_err(|_| IoError::Format {
        path: path.to_path_buf(),
        offset,
        message: format!("bad field {s:?}"),
    })
}

/// Persistence diagrams as `dim,birth,death` rows (essential classes have death 0).
pub fn save_diagrams<T: Scalar>(diagrams: &[&PersistenceDiagram<T>], path: &Path) -> Result<(), IoError> {
    let mut out = String::from("dim,birth,death\n");
    for d in diagrams {
        for p in &d.points {
            out.push_str(&format!("{},{},{}\n", d.dimension, fmt_f64(p.birth.as_f64()), fmt_f64(p.death.as_f64())));
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Diagrams keyed by dimension. Dimensions 0 and 1 are always present.
pub fn load_diagrams<T: Scalar>(path: &Path) -> Result<BTreeMap<usize, PersistenceDiagram<T>>, IoError> {
    let mut points: BTreeMap<usize, Vec<PersistencePoint<T>>> = BTreeMap::from([(0, Vec::new()), (1, Vec::new())]);
    for (offset, r) in rows(path, &["dim", "birth", "death"])? {
        let dim: usize = field(path, offset, &r[0])?;
        let birth = T::lit(field(path, offset, &r[1])?);
        let death = T::lit(field(path, offset, &r[2])?);
        points.entry(dim).or_default().push(PersistencePoint { birth, death });
    }
    Ok(points.into_iter().map(|(d, p)| (d, PersistenceDiagram::new(d, p))).collect())
}

/// Betti curves as `dim,breakpoint,value` rows.
pub fn save_curves<T: Scalar>(curves: &[&BettiCurve<T>], path: &Path) -> Result<(), IoError> {
    let mut out = String::from("dim,breakpoint,value\n");
    for c in curves {
        for (b, v) in c.breakpoints.iter().zip(&c.values) {
            out.push_str(&format!("{},{},{}\n", c.dimension, fmt_f64(b.as_f64()), v));
        }
    }
    write_atomic(path, out.as_bytes())
}

pub fn load_curves<T: Scalar>(path: &Path) -> Result<BTreeMap<usize, BettiCurve<T>>, IoError> {
    let mut steps: BTreeMap<usize, (Vec<T>, Vec<usize>)> = BTreeMap::new();
    for (offset, r) in rows(path, &["dim", "breakpoint", "value"])? {
        let dim: usize = field(path, offset, &r[0])?;
        let entry = steps.entry(dim).or_default();
        entry.0.push(T::lit(field(path, offset, &r[1])?));
        entry.1.push(field(path, offset, &r[2])?);
    }
    steps
        .into_iter()
        .map(|(dim, (bp, vals))| {
            let valid = bp.first() == Some(&T::one())
                && bp.windows(2).all(|w| w[0] > w[1])
                && bp.iter().all(|&b| b >= T::zero());
            if !valid {
                return Err(schema(
                    path,
                    format!("dimension {dim}: breakpoints must start at 1 and strictly decrease"),
                ));
            }
            Ok((dim, BettiCurve::from_steps(dim, bp, vals)))
        })
        .collect()
}

/// Square distance matrix in the binary matrix format.
pub fn save_dissimilarity<T: Scalar>(d: &Dissimilarity<T>, path: &Path) -> Result<(), IoError> {
    let n = d.len();
    save_matrix(&Matrix::from_fn(n, n, |i, j| d.get(i, j)), path)
}

pub fn load_dissimilarity<T: Scalar>(path: &Path) -> Result<Dissimilarity<T>, IoError> {
    let m: Matrix<T> = load_matrix(path)?;
    if m.rows() != m.cols() {
        return Err(schema(path, "distance matrix must be square"));
    }
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if m[(i, j)] != m[(j, i)] || (i == j && m[(i, j)] != T::zero()) {
                return Err(schema(path, format!("distance matrix is not symmetric with zero diagonal at ({i}, {j})")));
            }
        }
    }
    Ok(Dissimilarity::from_fn(m.rows(), |i, j| m[(i, j)]))
}

/// Merge table `a,b,height,size`.
pub fn save_merge_table<T: Scalar>(d: &Dendrogram<T>, path: &Path) -> Result<(), IoError> {
    let mut out = String::from("a,b,height,size\n");
    for m in &d.merges {
        out.push_str(&format!("{},{},{},{}\n", m.a, m.b, fmt_f64(m.height.as_f64()), m.size));
    }
    write_atomic(path, out.as_bytes())
}

pub fn save_training_log(log: &TrainingLog, path: &Path) -> Result<(), IoError> {
    let mut out = String::from("epoch,loss,train_accuracy,eval_accuracy\n");
    for e in &log.epochs {
        out.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch,
            fmt_f64(e.loss),
            fmt_f64(e.train_accuracy),
            fmt_f64(e.eval_accuracy)
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn load_training_log(path: &Path) -> Result<TrainingLog, IoError> {
    let epochs = rows(path, &["epoch", "loss", "train_accuracy", "eval_accuracy"])?
        .into_iter()
        .map(|(offset, r)| {
            Ok(EpochLog {
                epoch: field(path, offset, &r[0])?,
                loss: field(path, offset, &r[1])?,
                train_accuracy: field(path, offset, &r[2])?,
                eval_accuracy: field(path, offset, &r[3])?,
            })
        })
        .collect::<Result<_, IoError>>()?;
    Ok(TrainingLog { epochs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{agglomerate, Linkage};

    #[test]
    fn curves_and_diagrams_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c0 = BettiCurve::from_steps(0, vec![1.0, 0.9, 0.8], vec![3, 2, 1]);
        let c1 = BettiCurve::zero(1);
        let p = dir.path().join("curves.csv");
        save_curves(&[&c0, &c1], &p).unwrap();
        let back = load_curves::<f64>(&p).unwrap();
        assert_eq!((back[&0].clone(), back[&1].clone()), (c0, c1));

        let d0 = PersistenceDiagram::new(
            0,
            [PersistencePoint { birth: 1.0, death: 0.9 }, PersistencePoint { birth: 1.0, death: 0.0 }],
        );
        let d1 = PersistenceDiagram::new(1, []);
        let p = dir.path().join("diagrams.csv");
        save_diagrams(&[&d0, &d1], &p).unwrap();
        let back = load_diagrams::<f64>(&p).unwrap();
        assert_eq!((back[&0].clone(), back[&1].clone()), (d0, d1));
    }

    #[test]
    fn dendrogram_json_and_distances() {
        let dir = tempfile::tempdir().unwrap();
        let d = Dissimilarity::from_condensed(vec![0.1, 1.0, 1.0 / 3.0]).unwrap();
        let p = dir.path().join("d.fnmx");
        save_dissimilarity(&d, &p).unwrap();
        assert_eq!(load_dissimilarity::<f64>(&p).unwrap(), d);
        let dend = agglomerate(&d, Linkage::Average).unwrap().with_labels(vec![0, 0, 1]).unwrap();
        let p = dir.path().join("dend.json");
        save_json(&dend, &p).unwrap();
        assert_eq!(load_json::<Dendrogram<f64>>(&p).unwrap(), dend);
        save_merge_table(&dend, &dir.path().join("merges.csv")).unwrap();
    }

    #[test]
    fn training_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let log =
            TrainingLog { epochs: vec![EpochLog { epoch: 1, loss: 0.693, train_accuracy: 0.5, eval_accuracy: 0.625 }] };
        let p = dir.path().join("log.csv");
        save_training_log(&log, &p).unwrap();
        assert_eq!(load_training_log(&p).unwrap(), log);
    }

    #[test]
    fn bad_curve_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        std::fs::write(&p, "dim,breakpoint,value\n0,0.5,1\n").unwrap();
        assert!(matches!(load_curves::<f64>(&p), Err(IoError::Schema { .. })));
        std::fs::write(&p, "dim,when,value\n").unwrap();
        assert!(matches!(load_curves::<f64>(&p), Err(IoError::Schema { .. })));
    }
}
