//! CSV and JSON emitters. Every emitter refuses non-finite numbers, so a
//! NaN never reaches disk.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::analysis::TruncationTable;
use crate::charflow::Trajectory;
use crate::error::{Error, Result};
use crate::field::SolutionField;

/// 17 significant digits: round-trips every `f64`.
fn num(out: &mut String, label: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::NonFinite(label.to_string()));
    }
    write!(out, "{v:.16e}").expect("write to String");
    Ok(())
}

fn row(out: &mut String, label: &str, values: &[f64]) -> Result<()> {
    for (k, &v) in values.iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        num(out, label, v)?;
    }
    out.push('\n');
    Ok(())
}

/// `tau,x,u,p`, one row per stored node.
pub fn trajectory_csv(traj: &Trajectory) -> Result<String> {
    let mut out = String::from("tau,x,u,p\n");
    for (t, s) in traj.times.iter().zip(&traj.states) {
        row(&mut out, "trajectory", &[*t, s.x, s.u, s.p])?;
    }
    Ok(out)
}

/// `x,t,u`, row-major by `t` then `x`.
pub fn field_csv(field: &SolutionField) -> Result<String> {
    let mut out = String::from("x,t,u\n");
    for (j, &t) in field.t_nodes.iter().enumerate() {
        for (i, &x) in field.x_nodes.iter().enumerate() {
            row(&mut out, "field", &[x, t, field.value(i, j)])?;
        }
    }
    Ok(out)
}

/// `query_x,query_t,R,value`, sorted by query then radius. Failed solves
/// below the measured bound leave the value empty.
pub fn truncation_csv(table: &TruncationTable) -> Result<String> {
    let mut rows: Vec<_> = table.rows.iter().collect();
    rows.sort_by(|a, b| {
        (a.query_x, a.query_t, a.r)
            .partial_cmp(&(b.query_x, b.query_t, b.r))
            .expect("finite keys")
    });
    let mut out = String::from("query_x,query_t,R,value\n");
    for r in rows {
        num(&mut out, "truncation", r.query_x)?;
        out.push(',');
        num(&mut out, "truncation", r.query_t)?;
        out.push(',');
        num(&mut out, "truncation", r.r)?;
        out.push(',');
        if let Some(v) = r.value {
            num(&mut out, "truncation", v)?;
        }
        out.push('\n');
    }
    Ok(out)
}

/// Pretty JSON. `serde_json` writes non-finite floats as `null`, and the
/// records handed to this function carry no optional fields, so any
/// `null` is rejected as a non-finite value.
pub fn json_string<T: Serialize>(label: &str, record: &T) -> Result<String> {
    let value = serde_json::to_value(record)?;
    if contains_null(&value) {
        return Err(Error::NonFinite(label.to_string()));
    }
    let mut s = serde_json::to_string_pretty(&value)?;
    s.push('\n');
    Ok(s)
}

fn contains_null(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Array(a) => a.iter().any(contains_null),
        Value::Object(o) => o.values().any(contains_null),
        _ => false,
    }
}

/// Writes `contents` to `dir/name`, creating `dir`.
pub fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charflow::flow_uniform;
    use crate::field::{GridSpec, Provenance};
    use crate::models::HamiltonianModel;
    use crate::PhasePoint;

    #[test]
    fn field_rows_and_format() {
        let grid = GridSpec::new(16, vec![0.5, 1.0]).unwrap();
        let mut f = SolutionField::unfilled(&grid, 1.0, Provenance::HopfLax);
        assert!(matches!(field_csv(&f), Err(Error::NonFinite(_))));
        for j in 0..2 {
            for i in 0..16 {
                f.set(i, j, 0.1 * i as f64);
            }
        }
        let csv = field_csv(&f).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 32);
        assert_eq!(lines[0], "x,t,u");
        assert_eq!(lines[2], "6.2500000000000000e-2,5.0000000000000000e-1,1.0000000000000001e-1");
        assert!(lines[17].contains(",1.0000000000000000e0,"));
    }

    #[test]
    fn trajectory_header() {
        let tr = flow_uniform(&HamiltonianModel::free(), PhasePoint::new(0.0, 0.0, 1.0), 1.0, 1e-10, 4).unwrap();
        let csv = trajectory_csv(&tr).unwrap();
        assert!(csv.starts_with("tau,x,u,p\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn json_rejects_nan() {
        #[derive(Serialize)]
        struct R {
            a: f64,
        }
        assert!(json_string("r", &R { a: 1.0 }).is_ok());
        assert!(matches!(json_string("r", &R { a: f64::NAN }), Err(Error::NonFinite(_))));
    }
}
