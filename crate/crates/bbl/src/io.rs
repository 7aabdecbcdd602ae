//! Delimited text input (`n,y,x1,...,xm`) and draw output.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use bbl_core::{Dataset, Error as CoreError, Group, PosteriorDraws};

use crate::error::{CliError, Result};

/// Column layout resolved from the header row.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    n: usize,
    y: usize,
    x: Vec<usize>,
}

fn layout(header: &csv::StringRecord) -> Result<Layout> {
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let missing = |name: &str| CliError::Parse { line: 1, message: format!("header has no '{name}' column") };
    let n = find("n").ok_or_else(|| missing("n"))?;
    let y = find("y").ok_or_else(|| missing("y"))?;
    let mut x: Vec<(usize, &str)> =
        header.iter().enumerate().filter(|(_, h)| h.starts_with(['x', 'X'])).map(|(i, h)| (i, &h[1..])).collect();
    if x.is_empty() {
        return Err(CliError::Parse { line: 1, message: "header has no covariate columns (x1, x2, ...)".into() });
    }
    // Numeric suffixes give the covariate order; anything else keeps header order.
    let suffixes: Option<Vec<u32>> = x.iter().map(|(_, s)| s.parse().ok()).collect();
    if let Some(mut nums) = suffixes {
        let mut keyed: Vec<(u32, usize)> = nums.iter().copied().zip(x.iter().map(|(i, _)| *i)).collect();
        keyed.sort_unstable();
        nums.sort_unstable();
        if nums.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Parse { line: 1, message: "duplicate covariate column".into() });
        }
        x = keyed.into_iter().map(|(_, i)| (i, "")).collect();
    }
    Ok(Layout { n, y, x: x.into_iter().map(|(i, _)| i).collect() })
}

fn field<'a>(record: &'a csv::StringRecord, idx: usize, line: u64) -> Result<&'a str> {
    record.get(idx).ok_or_else(|| CliError::Parse { line, message: format!("missing field {}", idx + 1) })
}

fn count(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<u32> {
    let raw = field(record, idx, line)?;
    raw.parse()
        .map_err(|_| CliError::Parse { line, message: format!("{name}: expected a non-negative integer, got '{raw}'") })
}

/// Parses a header-bearing table. Covariates are taken verbatim; no intercept is added.
pub fn read_dataset<R: Read>(input: R, delimiter: u8) -> Result<Dataset> {
    let mut reader =
        csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().all(str::is_empty) {
        return Err(CliError::Core(CoreError::NoGroups));
    }
    let cols = layout(&header)?;
    let mut groups = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let n = count(&record, cols.n, "n", line)?;
        let y = count(&record, cols.y, "y", line)?;
        let mut x = Vec::with_capacity(cols.x.len());
        for &i in &cols.x {
            let raw = field(&record, i, line)?;
            let v: f64 = raw.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| CliError::Parse {
                line,
                message: format!("{}: expected a finite number, got '{raw}'", &header[i]),
            })?;
            x.push(v);
        }
        let group = Group::new(n, y, x).map_err(|e| match e {
            CoreError::InvalidGroup { reason, .. } => CliError::Parse { line, message: reason.into() },
            other => CliError::Core(other),
        })?;
        groups.push(group);
    }
    Ok(Dataset::new(groups)?)
}

fn csv_error(e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::Parse { line, message: e.to_string() }
}

pub fn read_dataset_file(path: &Path, delimiter: u8) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    read_dataset(file, delimiter)
}

/// Writes `n,y,x1..xm` rows that [`read_dataset`] reads back unchanged.
pub fn write_dataset<W: Write>(out: W, data: &Dataset) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n".to_string(), "y".to_string()];
    header.extend((1..=data.m()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for g in data.groups() {
        let mut row = vec![g.n().to_string(), g.y().to_string()];
        row.extend(g.x().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per retained draw: `s, beta1..betam, p1..pk`.
pub fn write_draws<W: Write>(out: W, draws: &PosteriorDraws) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let m = draws.beta.first().map_or(0, Vec::len);
    let k = draws.group_sizes.len();
    let mut header = vec!["s".to_string()];
    header.extend((1..=m).map(|j| format!("beta{j}")));
    header.extend((1..=k).map(|j| format!("p{j}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(1 + m + k);
    for i in 0..draws.len() {
        row.clear();
        row.push(draws.s[i].to_string());
        row.extend(draws.beta[i].iter().map(f64::to_string));
        row.extend(draws.p[i].iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariates_follow_numeric_suffix() {
        let text = "x2,n,site,y,x1\n0.5,10,a,3,1\n";
        let d = read_dataset(text.as_bytes(), b',').unwrap();
        assert_eq!(d.m(), 2);
        assert_eq!(d.groups()[0].x(), &[1.0, 0.5]);
        assert_eq!(d.groups()[0].n(), 10);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "n,y,x1\n5,2,1\n5,7,1\n";
        match read_dataset(text.as_bytes(), b',') {
            Err(CliError::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let text = "n,y,x1\n5,2,1\n5,two,1\n";
        let err = read_dataset(text.as_bytes(), b',').unwrap_err().to_string();
        assert!(err.starts_with("line 3:"), "{err}");
        let text = "n,y,x1\n5,2,nan\n";
        assert!(matches!(read_dataset(text.as_bytes(), b','), Err(CliError::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_input_has_no_groups() {
        for text in ["", "n,y,x1\n"] {
            let err = read_dataset(text.as_bytes(), b',').unwrap_err();
            assert_eq!(err.to_string(), "no groups");
        }
    }

    #[test]
    fn tab_delimited_and_comments() {
        let text = "# hospitals\nn\ty\tx1\tx2\n54\t3\t1\t4.30\n";
        let d = read_dataset(text.as_bytes(), b'\t').unwrap();
        assert_eq!(d.groups()[0].x(), &[1.0, 4.30]);
    }

    #[test]
    fn dataset_round_trip() {
        let d =
            Dataset::new(vec![Group::new(54, 3, vec![1.0, 4.3]).unwrap(), Group::new(7, 0, vec![1.0, 0.1]).unwrap()])
                .unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        assert_eq!(read_dataset(buf.as_slice(), b',').unwrap(), d);
    }
}
