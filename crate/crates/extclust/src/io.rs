//! CSV formats. All files carry a header row except the variogram, which
//! is a bare d-by-d matrix. Floats are written with 17 significant digits
//! so every value round-trips exactly.

use crate::angle::{AngularSample, RawSample, SampleMeta, UnitAngle};
use crate::error::{Error, Result};
use crate::mat::SquareMatrix;
use crate::theory::DiscreteAngularLaw;
use std::fs;
use std::io::Write;
use std::path::Path;

/// 17 significant digits: exact round-trip for f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(path, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("not a number: {token:?}"),
    })
}

fn split_row(line: &str) -> Vec<&str> {
    line.split(',').collect()
}

/// Writes angles with header `x1,...,xd`.
pub fn write_angles_csv(path: &Path, angles: &[UnitAngle]) -> Result<()> {
    if angles.is_empty() {
        return Err(Error::InvalidInput("no angles to write".into()));
    }
    let d = angles[0].dim();
    let mut out = String::new();
    out.push_str(&header("x", d));
    out.push('\n');
    for a in angles {
        push_row(&mut out, a.entries());
    }
    write_file(path, &out)
}

fn header(prefix: &str, d: usize) -> String {
    (1..=d)
        .map(|i| format!("{prefix}{i}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn push_row(out: &mut String, row: &[f64]) {
    let mut first = true;
    for &v in row {
        if !first {
            out.push(',');
        }
        out.push_str(&fmt_f64(v));
        first = false;
    }
    out.push('\n');
}

/// Reads a `x1,...,xd` file of unit angles. Rows whose norm drifted more
/// than the construction slack are rejected with their line number.
pub fn read_angles_csv(path: &Path) -> Result<Vec<UnitAngle>> {
    let lines = read_lines(path)?;
    if lines.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        });
    }
    let mut angles = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = split_row(line)
            .iter()
            .map(|t| parse_f64(t, lineno))
            .collect::<Result<_>>()?;
        let angle = UnitAngle::new(row).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        angles.push(angle);
    }
    if angles.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Ok(angles)
}

/// Writes raw positive observations with header `y1,...,yd`.
pub fn write_raw_csv(path: &Path, sample: &RawSample) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header("y", sample.dim()));
    out.push('\n');
    for row in sample.rows() {
        push_row(&mut out, row);
    }
    write_file(path, &out)
}

pub fn read_raw_csv(path: &Path) -> Result<RawSample> {
    let lines = read_lines(path)?;
    if lines.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = split_row(line)
            .iter()
            .map(|t| parse_f64(t, lineno))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    RawSample::new(rows).map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })
}

/// Variogram: bare d-by-d matrix, no header.
pub fn write_variogram_csv(path: &Path, gamma: &SquareMatrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..gamma.dim() {
        push_row(&mut out, gamma.row(i));
    }
    write_file(path, &out)
}

pub fn read_variogram_csv(path: &Path) -> Result<SquareMatrix> {
    let lines = read_lines(path)?;
    let mut rows = Vec::new();
    for (idx, line) in lines.iter().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = split_row(line)
            .iter()
            .map(|t| parse_f64(t, lineno))
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    SquareMatrix::from_rows(&rows).map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })
}

/// Discrete law: header `weight,x1,...,xd`.
pub fn write_law_csv(path: &Path, law: &DiscreteAngularLaw) -> Result<()> {
    let d = law.dim();
    let mut out = String::from("weight,");
    out.push_str(&header("x", d));
    out.push('\n');
    for (a, &w) in law.atoms().iter().zip(law.weights()) {
        let mut row = Vec::with_capacity(d + 1);
        row.push(w);
        row.extend_from_slice(a.entries());
        push_row(&mut out, &row);
    }
    write_file(path, &out)
}

pub fn read_law_csv(path: &Path) -> Result<DiscreteAngularLaw> {
    let lines = read_lines(path)?;
    if lines.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        });
    }
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = split_row(line)
            .iter()
            .map(|t| parse_f64(t, lineno))
            .collect::<Result<_>>()?;
        if row.len() < 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: "need a weight and at least one coordinate".into(),
            });
        }
        weights.push(row[0]);
        let angle = UnitAngle::new(row[1..].to_vec()).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        atoms.push(angle);
    }
    DiscreteAngularLaw::new(atoms, weights).map_err(|e| match e {
        Error::InvalidInput(m) => Error::InvalidInput(m),
        other => other,
    })
}

/// Truth partition for face scoring: header `face,indices`, indices
/// semicolon-joined and 1-based.
pub fn read_partition_csv(path: &Path) -> Result<crate::angle::FacePartition> {
    let lines = read_lines(path)?;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (idx, line) in lines.iter().enumerate().skip(1) {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols = split_row(line);
        if cols.len() != 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: "expected two columns: face,indices".into(),
            });
        }
        let indices: Vec<usize> = cols[1]
            .split(';')
            .map(|t| {
                t.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("not an index: {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        groups.push(indices);
    }
    if groups.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no faces".into(),
        });
    }
    let d: usize = groups.iter().map(|g| g.len()).sum();
    let faces = groups
        .into_iter()
        .map(|g| crate::angle::FaceSet::new(g, d))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
    crate::angle::FacePartition::new(faces, None).map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })
}

pub fn write_partition_csv(path: &Path, partition: &crate::angle::FacePartition) -> Result<()> {
    let mut out = String::from("face,indices\n");
    for (i, f) in partition.faces().iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, f.join_semicolon()));
    }
    write_file(path, &out)
}

/// An extracted angular sample plus its provenance line.
pub fn write_angular_sample_csv(path: &Path, sample: &AngularSample) -> Result<()> {
    write_angles_csv(path, sample.angles())
}

pub fn read_angular_sample_csv(path: &Path) -> Result<AngularSample> {
    let angles = read_angles_csv(path)?;
    AngularSample::new(
        angles,
        SampleMeta {
            retained_fraction: 1.0,
            threshold_norm: None,
            seed: None,
        },
    )
}

/// Generic table writer: header plus preformatted rows.
pub fn write_table(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    write_file(path, &out)
}
