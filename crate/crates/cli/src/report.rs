//! Plain-text tables from the JSON artifacts of the other subcommands.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde_json::Value;

use crate::error::CliError;

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) => format!("{x:.6e}"),
        Some(x) => format!("{x}"),
        None if v.is_null() => "-".into(),
        None => v.to_string(),
    }
}

fn table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<String>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.iter().map(|h| h.to_string()).collect());
    out += &line(widths.iter().map(|w| "-".repeat(*w)).collect());
    for row in rows {
        out += &line(row);
    }
    out
}

fn render(v: &Value) -> Result<String, String> {
    let kind = v["kind"].as_str().ok_or("missing \"kind\" field")?;
    let items = |key: &str| v[key].as_array().cloned().unwrap_or_default();
    let mut out = String::new();
    match kind {
        "solve" => {
            let ch = &v["channel"];
            let _ = writeln!(out, "solve: kappa = {}, mass = {}, splitting = {}", ch["kappa"], ch["mass"], v["splitting"]);
            let refs = items("analytic_reference");
            let errs = items("abs_error");
            let rows = items("levels")
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    vec![
                        l["k"].to_string(),
                        num(&l["lambda"]),
                        num(&l["residual"]),
                        refs.get(i).map(num).unwrap_or("-".into()),
                        errs.get(i).map(num).unwrap_or("-".into()),
                    ]
                })
                .collect();
            out += &table(&["k", "lambda", "residual", "reference", "abs_error"], rows);
        }
        "matrix" => {
            let _ = writeln!(out, "matrix: dims {} + {}, gap constant {}", v["dim_plus"], v["dim_minus"], num(&v["gap_constant"]));
            let oracle = items("oracle");
            let rows = items("levels")
                .iter()
                .enumerate()
                .map(|(i, l)| vec![l["k"].to_string(), num(&l["lambda"]), oracle.get(i).map(num).unwrap_or("-".into())])
                .collect();
            out += &table(&["k", "lambda", "dense"], rows);
        }
        "sweep" => {
            let _ = writeln!(out, "sweep: kappa = {}, epsilon = {}", v["kappa"], v["epsilon"]);
            let rows = items("nodes")
                .iter()
                .map(|n| vec![num(&n["nu"]), num(&n["lambda1"]), num(&n["a_nu"]), n["hypothesis_pass"].to_string()])
                .collect();
            out += &table(&["nu", "lambda1", "a_nu", "pass"], rows);
        }
        "refine" => {
            let _ = writeln!(out, "refine: kappa = {}, nu = {}, monotone = {}", v["kappa"], v["nu"], v["monotone"]);
            let rows = items("records")
                .iter()
                .map(|r| vec![num(&r[0]), num(&r[1])])
                .collect();
            out += &table(&["epsilon", "lambda1"], rows);
        }
        "hardy" => {
            let _ = writeln!(out, "hardy: kappa = {}, nu = {}, mass = {}", v["kappa"], v["nu"], v["mass"]);
            let rows = items("summaries")
                .iter()
                .map(|s| {
                    vec![
                        s["tag"].as_str().unwrap_or("?").to_string(),
                        s["count"].to_string(),
                        num(&s["min_relative"]),
                        num(&s["tolerance"]),
                        s["passed"].to_string(),
                    ]
                })
                .collect();
            out += &table(&["inequality", "count", "min_relative", "tolerance", "pass"], rows);
        }
        "verify" => {
            let _ = writeln!(out, "verify: seed = {}, passed = {}", v["seed"], v["passed"]);
            let mut rows = Vec::new();
            if let Some(f) = v["fuzz"].as_object() {
                rows.push(vec![
                    "oracle fuzz".into(),
                    format!("{}/{}", f["agreements"], f["cases"]),
                    num(&f["max_abs_error"]),
                ]);
            }
            for key in ["properties", "channel_properties"] {
                let s = if key == "channel_properties" { &v[key]["summary"] } else { &v[key] };
                if s.is_object() {
                    rows.push(vec![key.into(), format!("{} violations", s["violations"]), num(&s["worst_relative"])]);
                }
            }
            if let Some(m) = v["matrix"].as_object() {
                rows.push(vec!["matrix".into(), m["passed"].to_string(), num(&m["max_abs_error"])]);
            }
            out += &table(&["suite", "result", "worst"], rows);
        }
        other => return Err(format!("unknown artifact kind {other:?}")),
    }
    Ok(out)
}

pub fn print(inputs: &[PathBuf]) -> Result<(), CliError> {
    for path in inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{} is not JSON: {e}", path.display())))?;
        let body = render(&value).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        println!("{body}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_table_lists_levels() {
        let v: Value = serde_json::from_str(
            r#"{"kind":"solve","channel":{"kappa":-1,"mass":1.0},"splitting":"talman",
                "levels":[{"k":1,"lambda":0.8660254037844386,"residual":1e-12}],
                "analytic_reference":[0.8660254037844386],"abs_error":[0.0]}"#,
        )
        .unwrap();
        let text = render(&v).unwrap();
        assert!(text.contains("0.866025403784"));
        assert!(text.lines().count() >= 4);
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(render(&serde_json::json!({"kind": "other"})).is_err());
        assert!(render(&serde_json::json!({})).is_err());
    }
}
