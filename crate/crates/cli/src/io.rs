//! CSV output and input.
//!
//! Numbers are written with 17 significant digits, which round-trips every
//! `f64`. Lines starting with `#` carry provenance and are skipped on input.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use spacefill::{Ensemble, IterationRecord, Point};

use crate::error::{CliError, CliResult};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Buffered CSV writer with a comment preamble.
pub struct CsvOut {
    out: BufWriter<File>,
    path: std::path::PathBuf,
    line: String,
}

impl CsvOut {
    pub fn create(path: &Path, comments: &[String], columns: &[String]) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = CsvOut {
            out: BufWriter::new(file),
            path: path.to_owned(),
            line: String::new(),
        };
        for c in comments {
            for l in c.lines() {
                w.raw(&format!("# {l}\n"))?;
            }
        }
        w.raw(&format!("{}\n", columns.join(",")))?;
        Ok(w)
    }

    fn raw(&mut self, s: &str) -> CliResult<()> {
        self.out
            .write_all(s.as_bytes())
            .map_err(|e| CliError::io(&self.path, e))
    }

    /// Writes one row: integer key columns, then floats. `None` is an empty cell.
    pub fn row(
        &mut self,
        keys: &[usize],
        values: impl IntoIterator<Item = Option<f64>>,
    ) -> CliResult<()> {
        self.line.clear();
        for (i, k) in keys.iter().enumerate() {
            if i > 0 {
                self.line.push(',');
            }
            write!(self.line, "{k}").expect("writing to a String");
        }
        let mut first = keys.is_empty();
        for v in values {
            if !first {
                self.line.push(',');
            }
            first = false;
            if let Some(v) = v {
                self.line.push_str(&fmt_f64(v));
            }
        }
        self.line.push('\n');
        let line = std::mem::take(&mut self.line);
        let res = self.raw(&line);
        self.line = line;
        res
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}

/// `prefix_1 .. prefix_count`.
pub fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}_{i}"))
}

pub fn sample_columns(m: usize, n: usize) -> Vec<String> {
    let mut cols = vec!["iteration".to_string(), "index".to_string()];
    cols.extend(numbered("x", m));
    cols.extend(numbered("y", n));
    cols.push("weight".into());
    cols
}

pub const DIAGNOSTIC_COLUMNS: [&str; 6] = [
    "iteration",
    "w1_successive",
    "ess",
    "min_weight",
    "max_weight",
    "f_evals",
];

pub fn write_ensemble_rows(
    out: &mut CsvOut,
    iteration: usize,
    ensemble: &Ensemble,
) -> CliResult<()> {
    for (i, ((x, y), w)) in ensemble
        .points()
        .iter()
        .zip(ensemble.images())
        .zip(ensemble.weights())
        .enumerate()
    {
        let values = x
            .iter()
            .chain(y)
            .chain(std::iter::once(w))
            .map(|v| Some(*v));
        out.row(&[iteration, i], values)?;
    }
    Ok(())
}

pub fn write_record(out: &mut CsvOut, r: &IterationRecord) -> CliResult<()> {
    let values = [
        r.w1_successive,
        Some(r.ess),
        Some(r.min_weight),
        Some(r.max_weight),
    ];
    out.line.clear();
    write!(out.line, "{}", r.iteration).expect("writing to a String");
    for v in values {
        out.line.push(',');
        if let Some(v) = v {
            out.line.push_str(&fmt_f64(v));
        }
    }
    writeln!(out.line, ",{}", r.f_evals).expect("writing to a String");
    let line = std::mem::take(&mut out.line);
    let res = out.raw(&line);
    out.line = line;
    res
}

/// A parsed numeric CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> CliResult<Self> {
        let file =
            File::open(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::from_reader(file).map_err(|e| match e {
            CliError::Config(msg) => CliError::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(reader);
        let columns: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::config(e.to_string()))?
            .iter()
            .map(|c| c.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::config(e.to_string()))?;
            let row = rec
                .iter()
                .map(|cell| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        Ok(f64::NAN)
                    } else {
                        cell.parse::<f64>().map_err(|_| {
                            CliError::config(format!("row {}: {cell:?} is not a number", line + 1))
                        })
                    }
                })
                .collect::<CliResult<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Indices of `prefix_1, prefix_2, ...` in order.
    pub fn numbered_columns(&self, prefix: &str) -> Vec<usize> {
        let mut out = Vec::new();
        for i in 1.. {
            match self.column(&format!("{prefix}_{i}")) {
                Some(c) => out.push(c),
                None => break,
            }
        }
        out
    }

    pub fn iterations(&self) -> Vec<usize> {
        let Some(c) = self.column("iteration") else {
            return Vec::new();
        };
        let mut its: Vec<usize> = self.rows.iter().map(|r| r[c] as usize).collect();
        its.dedup();
        its.sort_unstable();
        its.dedup();
        its
    }

    /// The `prefix_*` vectors of the rows belonging to `iteration`; every row
    /// when the file has no iteration column.
    pub fn points(&self, prefix: &str, iteration: Option<usize>) -> CliResult<Vec<Point>> {
        let cols = self.numbered_columns(prefix);
        if cols.is_empty() {
            return Err(CliError::config(format!("no {prefix}_1 column")));
        }
        let it_col = self.column("iteration");
        Ok(self
            .rows
            .iter()
            .filter(|r| match (iteration, it_col) {
                (Some(it), Some(c)) => r[c] as usize == it,
                _ => true,
            })
            .map(|r| cols.iter().map(|&c| r[c]).collect())
            .collect())
    }

    /// Image vectors of the last iteration present, or of every row.
    pub fn final_images(&self) -> CliResult<Vec<Point>> {
        self.points("y", self.iterations().last().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [
            0.1,
            1.0 / 3.0,
            std::f64::consts::PI,
            2.5e-300,
            -1e300,
            5e-324,
            0.0,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn table_reads_written_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut out = CsvOut::create(&path, &["one\ntwo".into()], &sample_columns(1, 2)).unwrap();
        out.row(&[0, 0], [0.25, 1.0 / 3.0, -2.0, 0.5].map(Some))
            .unwrap();
        out.row(&[1, 0], [0.75, 0.1, 7.0, 0.5].map(Some)).unwrap();
        out.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# one\n# two\niteration,index,x_1,y_1,y_2,weight\n"));
        let t = Table::read(&path).unwrap();
        assert_eq!(t.iterations(), vec![0, 1]);
        assert_eq!(t.points("y", Some(0)).unwrap(), vec![vec![1.0 / 3.0, -2.0]]);
        assert_eq!(t.final_images().unwrap(), vec![vec![0.1, 7.0]]);
        assert_eq!(t.points("x", None).unwrap(), vec![vec![0.25], vec![0.75]]);
    }

    #[test]
    fn bad_cells_are_config_errors() {
        let err = Table::from_reader("y_1\n1.0\nabc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("abc")));
        let t = Table::from_reader("a,b\n1,2\n".as_bytes()).unwrap();
        assert!(t.points("y", None).is_err());
    }

    #[test]
    fn empty_cells_read_as_nan() {
        let t = Table::from_reader("iteration,w1\n0,\n1,0.5\n".as_bytes()).unwrap();
        assert!(t.rows[0][1].is_nan());
        assert_eq!(t.rows[1][1], 0.5);
    }
}
