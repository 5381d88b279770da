use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{fmt_real, is_skippable};
use crate::error::{Error, Result};
use crate::numcore::Matrix;

pub fn write_graph_csv(path: impl AsRef<Path>, labels: &[String], matrix: &Matrix) -> Result<()> {
    if matrix.shape() != (labels.len(), labels.len()) {
        return Err(Error::Shape {
            op: "write_graph_csv",
            left: matrix.shape(),
            right: (labels.len(), labels.len()),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "label,{}", labels.join(","))?;
    for (i, label) in labels.iter().enumerate() {
        let row: Vec<String> = matrix.row(i).iter().map(|&v| fmt_real(v)).collect();
        writeln!(w, "{label},{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a square graph CSV. When `expected` is given, the header must list
/// exactly those labels in that order.
pub fn load_graph_csv(path: impl AsRef<Path>, expected: Option<&[String]>) -> Result<(Vec<String>, Matrix)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::load(path, 0, format!("cannot open graph: {e}")))?;
    let mut lines = BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(n, l)| l.map(|l| (n + 1, l)))
        .filter(|r| r.as_ref().map_or(true, |(_, l)| !is_skippable(l)));

    let (hline, header) = lines.next().ok_or_else(|| Error::load(path, 0, "empty graph file"))??;
    let mut cells = header.split(',').map(str::trim);
    cells.next();
    let labels: Vec<String> = cells.map(String::from).collect();
    if labels.is_empty() {
        return Err(Error::load(path, hline, "header lists no labels"));
    }
    if let Some(expected) = expected {
        if labels != expected {
            return Err(Error::load(
                path,
                hline,
                format!("graph labels {labels:?} do not match model labels {expected:?}"),
            ));
        }
    }

    let c = labels.len();
    let mut data = Vec::with_capacity(c * c);
    let mut rows = 0;
    for item in lines {
        let (lineno, line) = item?;
        let mut cells = line.split(',').map(str::trim);
        let name = cells.next().unwrap_or_default();
        if rows >= c {
            return Err(Error::load(path, lineno, "more rows than labels"));
        }
        if name != labels[rows] {
            return Err(Error::load(
                path,
                lineno,
                format!("row label '{name}' does not match header label '{}'", labels[rows]),
            ));
        }
        let mut count = 0;
        for tok in cells {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::load(path, lineno, format!("cannot parse '{tok}' as a real")))?;
            data.push(v);
            count += 1;
        }
        if count != c {
            return Err(Error::load(path, lineno, format!("expected {c} values, found {count}")));
        }
        rows += 1;
    }
    if rows != c {
        return Err(Error::load(path, 0, format!("expected {c} rows, found {rows}")));
    }
    Ok((labels, Matrix::from_vec(c, c, data)?))
}
