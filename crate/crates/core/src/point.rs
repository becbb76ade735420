use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite point in R^d, d >= 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("a point needs at least one coordinate"));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!(
                "coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(Point(coords))
    }

    pub fn zeros(d: usize) -> Result<Self> {
        Point::new(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

/// A population of points sharing one dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    dim: usize,
    data: Vec<f64>,
}

impl ParticleSet {
    /// Build from flat row-major storage.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("particle dimension must be >= 1"));
        }
        if data.is_empty() || data.len() % dim != 0 {
            return Err(Error::domain(format!(
                "flat storage of length {} does not hold a whole number of {dim}-dimensional points",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(
                "particle set holds a non-finite value".into(),
            ));
        }
        Ok(ParticleSet { dim, data })
    }

    pub fn from_points(points: &[Point]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::domain("particle set must hold at least one point"))?;
        let dim = first.dim();
        let mut data = Vec::with_capacity(points.len() * dim);
        for p in points {
            crate::error::check_dim(dim, p.dim())?;
            data.extend_from_slice(p);
        }
        Ok(ParticleSet { dim, data })
    }

    /// `n` copies of `x`.
    pub fn point_mass(x: &Point, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("particle set must hold at least one point"));
        }
        let mut data = Vec::with_capacity(n * x.dim());
        for _ in 0..n {
            data.extend_from_slice(x);
        }
        Ok(ParticleSet { dim: x.dim(), data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Rows `[start, end)` as a new set.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::domain(format!(
                "invalid row range {start}..{end} for {} points",
                self.len()
            )));
        }
        Ok(ParticleSet {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        })
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Population covariance (divides by n), row-major d x d.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let m = self.mean();
        let mut c = vec![0.0; d * d];
        for r in self.rows() {
            for i in 0..d {
                let di = r[i] - m[i];
                for j in 0..d {
                    c[i * d + j] += di * (r[j] - m[j]);
                }
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }
}

impl ParticleSet {
    /// CSV with header `x1,...,xd` and one row per point.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        wr.write_record((1..=self.dim).map(|i| format!("x{i}")))?;
        for r in self.rows() {
            wr.write_record(r.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let dim = rd.headers()?.len();
        let mut data = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: rec.len(),
                });
            }
            for field in rec.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad number {field:?}", line + 1)))?;
                data.push(v);
            }
        }
        ParticleSet::from_flat(dim, data)
    }

    pub fn write_csv_path(&self, path: &std::path::Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv_path(path: &std::path::Path) -> Result<Self> {
        ParticleSet::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert!(Point::new(vec![0.5]).is_ok());
    }

    #[test]
    fn particle_set_shape_checks() {
        assert!(ParticleSet::from_flat(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(ParticleSet::from_flat(0, vec![]).is_err());
        let p = Point::new(vec![1.0, 2.0]).unwrap();
        let q = Point::new(vec![1.0]).unwrap();
        assert!(ParticleSet::from_points(&[p.clone(), q]).is_err());
        let s = ParticleSet::point_mass(&p, 3).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.row(2), &[1.0, 2.0]);
    }

    #[test]
    fn mean_and_covariance() {
        let s = ParticleSet::from_flat(2, vec![0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.mean(), vec![1.0, 1.0]);
        assert_eq!(s.covariance(), vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn csv_round_trip() {
        let s = ParticleSet::from_flat(2, vec![0.1, -2.5, 1e-300, 3.0]).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("x1,x2\n"));
        assert_eq!(ParticleSet::read_csv(&buf[..]).unwrap(), s);
        assert!(ParticleSet::read_csv(&b"x1,x2\n1,2\n3\n"[..]).is_err());
        assert!(ParticleSet::read_csv(&b"x1\nfoo\n"[..]).is_err());
    }

    #[test]
    fn point_serde_validates() {
        let p: Point = serde_json::from_str("[1.0, 2.5]").unwrap();
        assert_eq!(&*p, &[1.0, 2.5]);
        assert!(serde_json::from_str::<Point>("[]").is_err());
    }
}
