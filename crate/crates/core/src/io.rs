//! Text and binary file formats.
//!
//! Coordinate files hold one nonzero per line, 1-based indices followed by
//! the value, with an optional `#shape: n1 n2 ... nd` header. Every float
//! written as text uses 17 significant digits so reading it back is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{GcpError, Result};
use crate::optimizer::{EpochRecord, FitTrace};
use crate::tensor::{DenseTensor, KruskalModel, Matrix, Shape, SparseTensor};

const SHAPE_TAG: &str = "#shape:";
const TRACE_HEADER: &str = "epoch,loss_estimate,learning_rate,seconds,accepted";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| GcpError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| GcpError::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> GcpError {
    GcpError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_f64(path: &Path, line: usize, tok: &str) -> Result<f64> {
    tok.parse().map_err(|_| parse_err(path, line, format!("invalid number '{tok}'")))
}

fn parse_usize(path: &Path, line: usize, tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| parse_err(path, line, format!("invalid integer '{tok}'")))
}

/// Reads a `#shape:` header line into extents, or `None` for other lines.
fn parse_shape_header(path: &Path, line_no: usize, line: &str) -> Result<Option<Vec<usize>>> {
    let Some(rest) = line.trim().strip_prefix(SHAPE_TAG) else {
        return Ok(None);
    };
    let dims = rest
        .split_whitespace()
        .map(|t| parse_usize(path, line_no, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Some(dims))
}

fn shape_line(shape: &Shape) -> String {
    let dims: Vec<String> = shape.dims().iter().map(usize::to_string).collect();
    format!("{SHAPE_TAG} {}", dims.join(" "))
}

fn shape_from(path: &Path, line: usize, dims: Vec<usize>) -> Result<Shape> {
    Shape::new(dims).map_err(|e| parse_err(path, line, e.to_string()))
}

/// Reads a coordinate file into a sparse tensor.
///
/// Without a shape header the extents are the per-mode maxima. Duplicate
/// coordinates are summed and zeros dropped.
pub fn read_tns(path: impl AsRef<Path>) -> Result<SparseTensor> {
    let path = path.as_ref();
    let reader = open(path)?;
    let mut declared: Option<(usize, Shape)> = None;
    let mut ndims: Option<usize> = None;
    let mut coords: Vec<usize> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut lines: Vec<usize> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| GcpError::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            if let Some(dims) = parse_shape_header(path, line_no, trimmed)? {
                if declared.is_some() || ndims.is_some() {
                    return Err(parse_err(path, line_no, "shape header must precede all entries"));
                }
                let shape = shape_from(path, line_no, dims)?;
                ndims = Some(shape.ndims());
                declared = Some((line_no, shape));
            }
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let d = *ndims.get_or_insert(tokens.len().saturating_sub(1));
        if d == 0 || tokens.len() != d + 1 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {} tokens, found {}", d.max(1) + 1, tokens.len()),
            ));
        }
        for tok in &tokens[..d] {
            let idx = parse_usize(path, line_no, tok)?;
            if idx == 0 {
                return Err(parse_err(path, line_no, "indices are 1-based"));
            }
            coords.push(idx - 1);
        }
        values.push(parse_f64(path, line_no, tokens[d])?);
        lines.push(line_no);
    }

    let shape = match declared {
        Some((_, shape)) => shape,
        None => {
            let d = ndims.ok_or_else(|| parse_err(path, 0, "no entries and no shape header"))?;
            let mut dims = vec![0usize; d];
            for c in coords.chunks_exact(d) {
                for (m, &i) in dims.iter_mut().zip(c) {
                    *m = (*m).max(i + 1);
                }
            }
            shape_from(path, 0, dims)?
        }
    };

    let d = shape.ndims();
    let mut keyed = Vec::with_capacity(values.len());
    for ((c, &v), &line_no) in coords.chunks_exact(d).zip(&values).zip(&lines) {
        let key = shape.linear_index(c).map_err(|e| parse_err(path, line_no, e.to_string()))?;
        keyed.push((key, v));
    }
    Ok(SparseTensor::from_keyed(shape, keyed))
}

/// Writes a coordinate file with a shape header and 1-based indices.
pub fn write_tns(x: &SparseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = String::new();
    body.push_str(&shape_line(x.shape()));
    body.push('\n');
    for (c, v) in x.iter() {
        for &i in c {
            body.push_str(&(i + 1).to_string());
            body.push(' ');
        }
        body.push_str(&fmt_f64(v));
        body.push('\n');
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| GcpError::io(path, e))
}

/// Writes a model: a `d r` line, the extents, then each factor row by row.
pub fn write_model(model: &KruskalModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = format!("{} {}\n", model.ndims(), model.rank());
    let dims: Vec<String> = model.shape().dims().iter().map(usize::to_string).collect();
    body.push_str(&dims.join(" "));
    body.push('\n');
    for a in model.factors() {
        for i in 0..a.rows() {
            let row: Vec<String> = a.row(i).iter().map(|&v| fmt_f64(v)).collect();
            body.push_str(&row.join(" "));
            body.push('\n');
        }
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| GcpError::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based numbers.
fn content_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| GcpError::io(path, e))?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            out.push((i + 1, t.to_string()));
        }
    }
    Ok(out)
}

pub fn read_model(path: impl AsRef<Path>) -> Result<KruskalModel> {
    let path = path.as_ref();
    let lines = content_lines(path)?;
    let mut it = lines.iter();
    let end = |path: &Path| parse_err(path, 0, "unexpected end of file");

    let (ln, header) = it.next().ok_or_else(|| end(path))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| parse_usize(path, *ln, t))
        .collect::<Result<_>>()?;
    let [d, r] = head[..] else {
        return Err(parse_err(path, *ln, "expected 'd r'"));
    };
    let (ln, dims_line) = it.next().ok_or_else(|| end(path))?;
    let dims: Vec<usize> = dims_line
        .split_whitespace()
        .map(|t| parse_usize(path, *ln, t))
        .collect::<Result<_>>()?;
    if dims.len() != d {
        return Err(parse_err(path, *ln, format!("expected {d} extents, found {}", dims.len())));
    }
    let mut factors = Vec::with_capacity(d);
    for &n in &dims {
        let mut data = Vec::with_capacity(n * r);
        for _ in 0..n {
            let (ln, row) = it.next().ok_or_else(|| end(path))?;
            let vals: Vec<f64> = row.split_whitespace().map(|t| parse_f64(path, *ln, t)).collect::<Result<_>>()?;
            if vals.len() != r {
                return Err(parse_err(path, *ln, format!("expected {r} values, found {}", vals.len())));
            }
            data.extend(vals);
        }
        factors.push(Matrix::from_row_major(n, r, data));
    }
    if let Some((ln, _)) = it.next() {
        return Err(parse_err(path, *ln, "trailing data after last factor"));
    }
    KruskalModel::new(factors).map_err(|e| parse_err(path, 0, e.to_string()))
}

/// Writes a dense tensor as text: shape header, then one value per line in
/// linear (first-mode-fastest) order.
pub fn write_dense(x: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = shape_line(x.shape());
    body.push('\n');
    for &v in x.values() {
        body.push_str(&fmt_f64(v));
        body.push('\n');
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| GcpError::io(path, e))
}

pub fn read_dense(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let mut shape = None;
    let mut values = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| GcpError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with('#') {
            if let Some(dims) = parse_shape_header(path, line_no, t)? {
                shape = Some(shape_from(path, line_no, dims)?);
            }
            continue;
        }
        for tok in t.split_whitespace() {
            values.push(parse_f64(path, line_no, tok)?);
        }
    }
    let shape = shape.ok_or_else(|| parse_err(path, 0, "missing shape header"))?;
    DenseTensor::new(shape, values).map_err(|e| parse_err(path, 0, e.to_string()))
}

/// Path of the shape file that accompanies a dense binary file.
pub fn shape_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".shape");
    PathBuf::from(s)
}

/// Writes raw little-endian f64 values plus a `<path>.shape` text sidecar.
pub fn write_dense_binary(x: &DenseTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let bytes: Vec<u8> = x.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    w.write_all(&bytes).and_then(|_| w.flush()).map_err(|e| GcpError::io(path, e))?;

    let side = shape_sidecar(path);
    let mut s = create(&side)?;
    writeln!(s, "{}", shape_line(x.shape()))
        .and_then(|_| s.flush())
        .map_err(|e| GcpError::io(&side, e))
}

pub fn read_dense_binary(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let side = shape_sidecar(path);
    let mut shape = None;
    for (ln, line) in content_or_header_lines(&side)? {
        if let Some(dims) = parse_shape_header(&side, ln, &line)? {
            shape = Some(shape_from(&side, ln, dims)?);
        } else {
            let dims = line
                .split_whitespace()
                .map(|t| parse_usize(&side, ln, t))
                .collect::<Result<Vec<_>>>()?;
            shape = Some(shape_from(&side, ln, dims)?);
        }
    }
    let shape = shape.ok_or_else(|| parse_err(&side, 0, "missing shape"))?;

    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(|e| GcpError::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(parse_err(path, 0, format!("length {} is not a multiple of 8", bytes.len())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DenseTensor::new(shape, values).map_err(|e| parse_err(path, 0, e.to_string()))
}

fn content_or_header_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| GcpError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || (t.starts_with('#') && !t.starts_with(SHAPE_TAG)) {
            continue;
        }
        out.push((i + 1, t.to_string()));
    }
    Ok(out)
}

pub fn write_trace_csv(trace: &FitTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    let mut body = String::from(TRACE_HEADER);
    body.push('\n');
    for r in &trace.records {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch,
            fmt_f64(r.loss_estimate),
            fmt_f64(r.learning_rate),
            fmt_f64(r.seconds),
            r.accepted
        ));
    }
    w.write_all(body.as_bytes()).and_then(|_| w.flush()).map_err(|e| GcpError::io(path, e))
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<FitTrace> {
    let path = path.as_ref();
    let mut records = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| GcpError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if line_no == 1 {
            if t != TRACE_HEADER {
                return Err(parse_err(path, 1, format!("expected header '{TRACE_HEADER}'")));
            }
            continue;
        }
        let f: Vec<&str> = t.split(',').collect();
        let [epoch, loss, lr, secs, accepted] = f[..] else {
            return Err(parse_err(path, line_no, format!("expected 5 fields, found {}", f.len())));
        };
        records.push(EpochRecord {
            epoch: parse_usize(path, line_no, epoch)?,
            loss_estimate: parse_f64(path, line_no, loss)?,
            learning_rate: parse_f64(path, line_no, lr)?,
            seconds: parse_f64(path, line_no, secs)?,
            accepted: accepted
                .parse()
                .map_err(|_| parse_err(path, line_no, format!("invalid flag '{accepted}'")))?,
        });
    }
    Ok(FitTrace { records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::MultiIndex;
    use std::fs;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn single_entry_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.tns", "#shape: 2 2 2\n1 1 1 5.0\n");
        let x = read_tns(&p).unwrap();
        assert_eq!(x.shape().dims(), &[2, 2, 2]);
        assert_eq!(x.nnz(), 1);
        assert_eq!(x.lookup(&[0, 0, 0]), 5.0);
    }

    #[test]
    fn duplicates_are_summed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.tns", "1 1 1 2\n1 1 1 3\n");
        let x = read_tns(&p).unwrap();
        assert_eq!(x.nnz(), 1);
        assert_eq!(x.values(), &[5.0]);
        assert_eq!(x.shape().dims(), &[1, 1, 1]);
    }

    #[test]
    fn shape_inferred_from_maxima() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.tns", "# comment\n3 1 2 1.5\n1 4 1 -2\n");
        let x = read_tns(&p).unwrap();
        assert_eq!(x.shape().dims(), &[3, 4, 2]);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        for (text, line) in [
            ("1 1 1 2\n1 1 2\n", 2),
            ("#shape: 2 2\n1 1 1.0\n3 1 1.0\n", 3),
            ("1 1 x\n", 1),
            ("0 1 1.0\n", 1),
        ] {
            let p = write(&dir, "bad.tns", text);
            match read_tns(&p) {
                Err(GcpError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn empty_tensor_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.tns");
        let x = SparseTensor::empty(Shape::new(vec![3, 2]).unwrap());
        write_tns(&x, &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "#shape: 3 2\n");
        assert_eq!(read_tns(&p).unwrap(), x);
    }

    #[test]
    fn awkward_values_survive() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.tns");
        let shape = Shape::new(vec![4]).unwrap();
        let vals = [0.1 + 0.2, f64::MIN_POSITIVE, -1e300, 5e-324];
        let x = SparseTensor::from_entries(shape, vals.iter().enumerate().map(|(i, &v)| (MultiIndex(vec![i]), v))).unwrap();
        write_tns(&x, &p).unwrap();
        let y = read_tns(&p).unwrap();
        let bits = |t: &SparseTensor| t.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x), bits(&y));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = read_tns("/nonexistent/x.tns").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.tns"));
    }

    #[test]
    fn truncated_model_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.txt", "2 1\n2 2\n1.0\n2.0\n3.0\n");
        assert!(read_model(&p).is_err());
    }
}
