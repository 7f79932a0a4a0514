//! CSV files with a `# key = value` metadata header.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Seventeen significant digits.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_table(
    path: &Path,
    metadata: &[(String, String)],
    columns: &[&str],
    rows: &[Vec<String>],
) -> std::io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (k, v) in metadata {
        writeln!(out, "# {k} = {v}")?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(columns)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
        assert_eq!(num(f64::NAN), "nan");
        let back: f64 = num(1.0 / 3.0).parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let meta = vec![("gamma".to_string(), "1e0".to_string())];
        write_table(&path, &meta, &["a", "b"], &[vec![num(1.0), "ok".into()]]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "# gamma = 1e0\na,b\n1.0000000000000000e0,ok\n");
    }
}
