//! Grid dumps: one row per node in flat (row-major) order. The header names
//! the axes with their resolution, `x1@17,x2@17`, followed by value columns.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Patch;

/// Writes node coordinates and the given value columns.
pub fn write_grid<W: Write>(out: W, patch: &Patch, columns: &[(&str, &[f64])]) -> Result<()> {
    for (name, values) in columns {
        if values.len() != patch.len() {
            return Err(Error::DimensionMismatch(format!(
                "column `{name}` has {} values for {} nodes",
                values.len(),
                patch.len()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..patch.dim())
        .map(|a| format!("x{}@{}", a + 1, patch.resolution()[a]))
        .collect();
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    let mut point = vec![0.0; patch.dim()];
    let mut record = Vec::with_capacity(header.len());
    for k in 0..patch.len() {
        patch.point_into(k, &mut point);
        record.clear();
        record.extend(point.iter().map(|x| format!("{x:e}")));
        record.extend(columns.iter().map(|(_, v)| format!("{:e}", v[k])));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

/// A grid read back from CSV.
#[derive(Debug, Clone)]
pub struct GridData {
    pub patch: Arc<Patch>,
    pub names: Vec<String>,
    /// One vector per value column, in flat node order.
    pub columns: Vec<Vec<f64>>,
}

impl GridData {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }
}

fn axis_resolution(h: &str, axis: usize) -> Option<usize> {
    let (name, res) = h.split_once('@')?;
    (name == format!("x{}", axis + 1)).then_some(())?;
    res.parse().ok()
}

/// Reads a grid written by [`write_grid`]; bounds are taken from the first and
/// last coordinates along each axis.
pub fn read_grid<R: Read>(input: R) -> Result<GridData> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut resolution = Vec::new();
    while let Some(res) = header.get(resolution.len()).and_then(|h| axis_resolution(h, resolution.len())) {
        resolution.push(res);
    }
    let dim = resolution.len();
    if dim == 0 {
        return Err(Error::Csv("header lacks axis columns like `x1@17`".into()));
    }
    let names = header[dim..].to_vec();
    let mut coords = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Csv(format!("row with {} fields, header has {}", rec.len(), header.len())));
        }
        let mut vals = rec.iter().map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Csv(format!("bad number `{s}`: {e}")))
        });
        let mut p = Vec::with_capacity(dim);
        for _ in 0..dim {
            p.push(vals.next().expect("length checked")?);
        }
        coords.push(p);
        for c in columns.iter_mut() {
            c.push(vals.next().expect("length checked")?);
        }
    }
    let total: usize = resolution.iter().product();
    if coords.len() != total {
        return Err(Error::Csv(format!("{} rows for a grid of {total} nodes", coords.len())));
    }
    let last = coords.last().expect("nonempty");
    let bounds: Vec<(f64, f64)> = (0..dim).map(|a| (coords[0][a], last[a])).collect();
    let patch = Arc::new(Patch::new(bounds, resolution)?);
    for (k, p) in coords.iter().enumerate() {
        let expect = patch.point(k);
        let scale = patch.max_spacing();
        if p.iter().zip(&expect).any(|(a, b)| (a - b).abs() > 1e-6 * scale.max(1.0)) {
            return Err(Error::Csv(format!("row {} is not at node {:?}", k + 1, patch.multi_index(k))));
        }
    }
    Ok(GridData { patch, names, columns })
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Error {
        Error::Csv(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let p = Patch::cube(2, -1.0, 1.0, 5).unwrap();
        let u: Vec<f64> = (0..p.len()).map(|k| k as f64 * 0.1).collect();
        let mut buf = Vec::new();
        write_grid(&mut buf, &p, &[("u", &u)]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1@5,x2@5,u\n"));
        let g = read_grid(buf.as_slice()).unwrap();
        assert_eq!(*g.patch, p);
        assert_eq!(g.column("u").unwrap(), u.as_slice());
    }
}
