//! Output formatting shared by the experiment runners and the CLI: CSV and
//! JSON writers with a single float convention.

use crate::error::Result;
use crate::flows::Trajectory;
use crate::problems::Task;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Every float leaves the repository with 17 significant digits, enough to
/// round-trip an f64 exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // CSV keeps the debug spelling; JSON writers quote it themselves.
        format!("{v}")
    }
}

/// Minimal JSON builder. The experiment summaries are flat objects and
/// arrays of flat objects, which this covers without pulling in a
/// serialization stack while keeping the float convention above.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Array(Vec<Json>),
    Object(Vec<(String, Json)>),
}

impl Json {
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Json::Float(v) => {
                if v.is_finite() {
                    out.push_str(&fmt_f64(*v));
                } else {
                    let _ = write!(out, "\"{v}\"");
                }
            }
            Json::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        c if (c as u32) < 0x20 => {
                            let _ = write!(out, "\\u{:04x}", c as u32);
                        }
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Json::Array(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push_str("[\n");
                for (i, item) in items.iter().enumerate() {
                    pad(out, indent + 1);
                    item.write(out, indent + 1);
                    if i + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                pad(out, indent);
                out.push(']');
            }
            Json::Object(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push_str("{\n");
                for (i, (key, value)) in fields.iter().enumerate() {
                    pad(out, indent + 1);
                    let _ = write!(out, "\"{key}\": ");
                    value.write(out, indent + 1);
                    if i + 1 < fields.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                pad(out, indent);
                out.push('}');
            }
        }
    }
}

fn pad(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Trajectory CSV: `step,loss,l1_norm,linf_norm,gt_l1_distance,
/// max_balance_dev,grad_linf`.
pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mut out =
        String::from("step,loss,l1_norm,linf_norm,gt_l1_distance,max_balance_dev,grad_linf\n");
    for row in &trajectory.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.step,
            fmt_f64(row.loss),
            fmt_f64(row.l1_norm),
            fmt_f64(row.linf_norm),
            fmt_f64(row.gt_l1_distance),
            fmt_f64(row.max_balance_dev),
            fmt_f64(row.grad_linf),
        );
    }
    out
}

/// Task CSV in long format, one record per value:
/// `section,row,col,value` with sections `gt` (ground truth, col empty),
/// `target` (col empty) and `design`. Distances in downstream CSVs are L1.
pub fn task_csv(task: &Task) -> String {
    let mut out = String::from("section,row,col,value\n");
    for (j, v) in task.ground_truth().iter().enumerate() {
        let _ = writeln!(out, "gt,{j},,{}", fmt_f64(*v));
    }
    for (i, v) in task.targets().iter().enumerate() {
        let _ = writeln!(out, "target,{i},,{}", fmt_f64(*v));
    }
    for i in 0..task.samples() {
        for (j, v) in task.row(i).iter().enumerate() {
            let _ = writeln!(out, "design,{i},{j},{}", fmt_f64(*v));
        }
    }
    out
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_significant_digits() {
        let s = fmt_f64(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        let parsed: f64 = s.parse().unwrap();
        assert_eq!(parsed, std::f64::consts::PI);
    }

    #[test]
    fn json_renders_nested_objects() {
        let doc = Json::Object(vec![
            ("name".into(), Json::Str("quote \" here".into())),
            ("count".into(), Json::Int(3)),
            ("value".into(), Json::Float(0.5)),
            (
                "items".into(),
                Json::Array(vec![Json::Bool(true), Json::Null]),
            ),
        ]);
        let text = doc.render();
        assert!(text.contains("\"quote \\\" here\""));
        assert!(text.contains("5.0000000000000000e-1"));
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn task_csv_round_trips_values() {
        let task = crate::problems::gen_regression(3, 2, 1, 9).unwrap();
        let text = task_csv(&task);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("section,row,col,value"));
        let gt_line = lines.next().unwrap();
        assert!(gt_line.starts_with("gt,0,,"));
        let v: f64 = gt_line.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(v, task.ground_truth()[0]);
    }
}
