use crate::error::Result;
use crate::model::{Field, SpatialGrid, TimeGrid};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

/// `t,x,value` rows, time-major, in 17-digit scientific notation.
pub fn field_csv(field: &Field, time: &TimeGrid, grid: &SpatialGrid) -> String {
    let mut out = String::with_capacity(64 * field.levels() * field.nodes() + 16);
    out.push_str("t,x,value\n");
    for n in 0..field.levels() {
        let t = time.t(n);
        for (i, v) in field.level(n).iter().enumerate() {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", t, grid.x(i), v);
        }
    }
    out
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

/// Pretty JSON with keys in declaration order for structs and sorted order for maps.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Config(e.to_string()))?;
    write_text(dir, name, &(text + "\n"))
}

/// Formats an optional value as a CSV cell.
pub(crate) fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.16e}"))
}
