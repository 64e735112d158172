//! Report rendering. JSON output keeps struct field order and prints every
//! double through the library's 17-significant-digit formatter, so one
//! configuration always yields one byte sequence.

use std::path::Path;

use serde::Serialize;
use sol_lab::util::fmt_f64;

pub fn json_doc<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text
}

pub fn csv_doc(header: &str, rows: &[String]) -> String {
    let mut text = String::with_capacity(header.len() + 1 + rows.len() * 32);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    text
}

pub fn cell(x: f64) -> String {
    fmt_f64(x)
}

pub fn opt_cell(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_out(out: Option<&Path>, content: &str) -> Result<(), String> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => std::fs::write(path, content)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
    }
}
