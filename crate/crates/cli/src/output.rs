use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// 17 significant digits, fixed layout.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Blank for missing values.
pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Internal(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert_eq!(digits, 17, "{s}");
        }
        assert_eq!(opt_num(None), "");
    }
}
