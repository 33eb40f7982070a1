use std::collections::HashSet;
use std::io::{self, Write};

use super::ScmError;

/// Column-named numeric sample matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<String>,
    data: Vec<f64>,
    rows: usize,
    seed: Option<u64>,
}

impl Dataset {
    pub fn new(columns: Vec<String>, data: Vec<f64>, seed: Option<u64>) -> Result<Self, ScmError> {
        let mut seen = HashSet::new();
        if let Some(dup) = columns.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(ScmError::InvalidDataset(format!("duplicate column `{dup}`")));
        }
        let width = columns.len();
        if (width == 0 && !data.is_empty()) || (width > 0 && data.len() % width != 0) {
            return Err(ScmError::InvalidDataset(format!(
                "{} values do not fill rows of width {width}",
                data.len()
            )));
        }
        let rows = if width == 0 { 0 } else { data.len() / width };
        Ok(Self { columns, data, rows, seed })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let w = self.columns.len();
        &self.data[r * w..(r + 1) * w]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.columns.len() + c]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.column_index(name)?;
        Some((0..self.rows).map(|r| self.get(r, c)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    /// Comma-separated, header row first. Numbers use Rust's shortest
    /// round-trip formatting, so output is locale independent.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangular_and_unique() {
        assert!(Dataset::new(vec!["a".into(), "a".into()], vec![], None).is_err());
        assert!(Dataset::new(vec!["a".into(), "b".into()], vec![1.0], None).is_err());
        let d = Dataset::new(vec!["a".into(), "b".into()], vec![1.0, 2.0, 3.0, 4.0], Some(1)).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.column("b"), Some(vec![2.0, 4.0]));
    }

    #[test]
    fn csv_layout() {
        let d = Dataset::new(vec!["x".into(), "y".into()], vec![1.0, 0.5, -2.0, 3.25], None).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y\n1,0.5\n-2,3.25\n");
    }
}
