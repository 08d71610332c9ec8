//! CSV readers and writers for matrices, samples, returns and labeled data.

use std::io::{Read, Write};

use crate::baselines::{Centering, SampleSet};
use crate::classifier::LabeledSet;
use crate::error::{Error, Result};
use crate::spectral::SymMatrix;

/// Inputs whose asymmetry exceeds this multiple of `‖A‖_F` are rejected.
pub const SYMMETRY_TOL: f64 = 1e-8;

struct Table {
    header: Option<Vec<String>>,
    rows: Vec<Vec<String>>,
    /// File line of the first data row (1-based).
    first_line: usize,
}

fn read_records<R: Read>(reader: R) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(out)
}

fn is_numeric(cell: &str) -> bool {
    cell.parse::<f64>().is_ok()
}

/// Splits off a header row when the first row does not parse as numbers in
/// the columns that must be numeric (`skip` leading columns are ignored).
fn split_header(mut rows: Vec<Vec<String>>, skip: usize) -> Table {
    let has_header = rows
        .first()
        .map_or(false, |r| r.iter().skip(skip).any(|c| !is_numeric(c)));
    let header = if has_header { Some(rows.remove(0)) } else { None };
    Table {
        first_line: if has_header { 2 } else { 1 },
        header,
        rows,
    }
}

fn parse_cell(cell: &str, line: usize, column: usize) -> Result<f64> {
    let v: f64 = cell.parse().map_err(|_| Error::MalformedInput {
        row: line,
        column,
        detail: format!("'{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedInput {
            row: line,
            column,
            detail: format!("'{cell}' is not finite"),
        });
    }
    Ok(v)
}

fn numeric_rows(table: &Table, skip: usize, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(table.rows.len());
    for (k, row) in table.rows.iter().enumerate() {
        let line = table.first_line + k;
        if row.len() != skip + width {
            return Err(Error::MalformedInput {
                row: line,
                column: row.len().min(skip + width) + 1,
                detail: format!("expected {} fields, found {}", skip + width, row.len()),
            });
        }
        out.push(
            row.iter()
                .enumerate()
                .skip(skip)
                .map(|(j, c)| parse_cell(c, line, j + 1))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok(out)
}

/// Reads `p` rows of `p` numbers, with an optional header row. The matrix is
/// symmetrized after checking `|A − Aᵀ| ≤ 1e−8·‖A‖_F`.
pub fn read_square_matrix<R: Read>(reader: R) -> Result<SymMatrix> {
    let table = split_header(read_records(reader)?, 0);
    let p = table.rows.len();
    if p == 0 {
        return Err(Error::InsufficientData("matrix file has no data rows".into()));
    }
    let rows = numeric_rows(&table, 0, p)?;
    let entries: Vec<f64> = rows.concat();
    let asym = SymMatrix::max_asymmetry(p, &entries);
    let norm = entries.iter().map(|x| x * x).sum::<f64>().sqrt();
    if asym > SYMMETRY_TOL * norm {
        return Err(Error::NotSymmetric(asym));
    }
    SymMatrix::new(p, entries)
}

/// One observation per row, with an optional header row.
pub fn read_samples<R: Read>(reader: R, centering: Centering) -> Result<SampleSet> {
    let table = split_header(read_records(reader)?, 0);
    let p = table.header.as_ref().or(table.rows.first()).map_or(0, Vec::len);
    let rows = numeric_rows(&table, 0, p)?;
    SampleSet::from_rows(&rows, centering)
}

/// Asset returns: a required header, then rows of a date label followed by
/// one decimal return per asset. Row order is taken as time order.
#[derive(Debug, Clone)]
pub struct ReturnsTable {
    pub assets: Vec<String>,
    pub dates: Vec<String>,
    pub returns: SampleSet,
}

fn required_header(rows: &mut Vec<Vec<String>>, skip: usize, what: &str) -> Result<Vec<String>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::MalformedHeader(format!("{what} file is empty")))?;
    if first.iter().skip(skip).all(|c| is_numeric(c)) {
        return Err(Error::MalformedHeader(format!(
            "{what} file must start with a header row, found numeric row"
        )));
    }
    Ok(rows.remove(0))
}

pub fn read_returns<R: Read>(reader: R) -> Result<ReturnsTable> {
    let mut rows = read_records(reader)?;
    let header = required_header(&mut rows, 1, "returns")?;
    if header.len() < 2 {
        return Err(Error::MalformedHeader(
            "returns header needs a date column and at least one asset".into(),
        ));
    }
    let table = Table {
        header: Some(header.clone()),
        rows,
        first_line: 2,
    };
    let values = numeric_rows(&table, 1, header.len() - 1)?;
    Ok(ReturnsTable {
        assets: header[1..].to_vec(),
        dates: table.rows.iter().map(|r| r[0].clone()).collect(),
        returns: SampleSet::from_rows(&values, Centering::SampleMean)?,
    })
}

/// Features followed by an integer label in the last column, header required.
pub fn read_labeled<R: Read>(reader: R) -> Result<LabeledSet> {
    let mut rows = read_records(reader)?;
    let header = required_header(&mut rows, 0, "labeled data")?;
    let width = header.len();
    if width < 2 {
        return Err(Error::MalformedHeader(
            "labeled data needs at least one feature and a label column".into(),
        ));
    }
    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        let line = k + 2;
        if row.len() != width {
            return Err(Error::MalformedInput {
                row: line,
                column: row.len().min(width) + 1,
                detail: format!("expected {width} fields, found {}", row.len()),
            });
        }
        features.push(
            row[..width - 1]
                .iter()
                .enumerate()
                .map(|(j, c)| parse_cell(c, line, j + 1))
                .collect::<Result<Vec<f64>>>()?,
        );
        let cell = &row[width - 1];
        labels.push(cell.parse::<i64>().map_err(|_| Error::MalformedInput {
            row: line,
            column: width,
            detail: format!("label '{cell}' is not an integer"),
        })?);
    }
    LabeledSet::new(SampleSet::from_rows(&features, Centering::SampleMean)?, labels)
}

/// Writes a matrix as `p` rows of `p` numbers in shortest round-trip form.
pub fn write_matrix<W: Write>(writer: W, m: &SymMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for i in 0..m.order() {
        w.write_record(m.row(i).iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_returns<W: Write>(writer: W, table: &ReturnsTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string()];
    header.extend(table.assets.iter().cloned());
    w.write_record(&header)?;
    for (date, row) in table.dates.iter().zip(table.returns.rows()) {
        let mut rec = vec![date.clone()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labeled<W: Write>(writer: W, data: &LabeledSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.features.p()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, y) in data.features.rows().zip(&data.labels) {
        let mut rec: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_matrix_with_and_without_header() {
        let a = read_square_matrix("a,b\n2,1\n1,2\n".as_bytes()).unwrap();
        let b = read_square_matrix("2,1\n1,2\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.get(0, 1), 1.0);
        assert!(matches!(
            read_square_matrix("2,1\n1.5,2\n".as_bytes()),
            Err(Error::NotSymmetric(_))
        ));
        assert!(matches!(
            read_square_matrix("2,1,0\n1,2,0\n".as_bytes()),
            Err(Error::MalformedInput { .. })
        ));
        let mut out = Vec::new();
        write_matrix(&mut out, &a).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "2,1\n1,2\n");
    }

    #[test]
    fn returns_need_a_header() {
        let ok = read_returns("date,A,B\n2000-01,0.01,0.02\n2000-02,-0.01,0.00\n".as_bytes())
            .unwrap();
        assert_eq!(ok.assets, vec!["A", "B"]);
        assert_eq!(ok.dates[1], "2000-02");
        assert_eq!(ok.returns.row(1), &[-0.01, 0.0]);
        assert!(matches!(
            read_returns("2000-01,0.01,0.02\n".as_bytes()),
            Err(Error::MalformedHeader(_))
        ));
        match read_returns("date,A\n2000-01,abc\n".as_bytes()) {
            Err(Error::MalformedInput { row, column, .. }) => assert_eq!((row, column), (2, 2)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn labeled_round_trip() {
        let text = "x1,x2,label\n0.5,1,0\n-1,2,1\n";
        let d = read_labeled(text.as_bytes()).unwrap();
        assert_eq!(d.labels, vec![0, 1]);
        let mut out = Vec::new();
        write_labeled(&mut out, &d).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
        assert!(matches!(
            read_labeled("0.5,1,0\n".as_bytes()),
            Err(Error::MalformedHeader(_))
        ));
        assert!(matches!(
            read_labeled("a,label\n0.5,x\n".as_bytes()),
            Err(Error::MalformedInput { .. })
        ));
    }
}
