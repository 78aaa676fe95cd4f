//! Target distributions in the hard box: the uniform distribution, the
//! Gaussian-smoothed ("heated") empirical distribution and the empirical
//! distribution itself.

use std::fmt;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// The ambient space `[low, high]^dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxDomain {
    low: f64,
    high: f64,
    dim: usize,
}

impl BoxDomain {
    pub fn new(low: f64, high: f64, dim: usize) -> Result<Self> {
        if !(low < high) || !low.is_finite() || !high.is_finite() {
            return Err(Error::Contract(format!(
                "box needs finite low < high, got [{low}, {high}]"
            )));
        }
        if dim == 0 {
            return Err(Error::Contract("box dimension must be positive".into()));
        }
        Ok(Self { low, high, dim })
    }

    /// `[-1, 1]^dim`.
    pub fn symmetric(dim: usize) -> Result<Self> {
        Self::new(-1.0, 1.0, dim)
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|&v| v >= self.low && v <= self.high)
    }

    /// Folds a coordinate back into `[low, high]` by repeated mirror
    /// reflection at the walls.
    pub fn reflect(&self, x: f64) -> f64 {
        if x >= self.low && x <= self.high {
            return x;
        }
        let w = self.width();
        let y = (x - self.low).rem_euclid(2.0 * w);
        let folded = if y > w { 2.0 * w - y } else { y };
        (self.low + folded).clamp(self.low, self.high)
    }
}

/// Inverse temperature of the target. `Uniform` is β = 0 and `Infinity` is
/// the empirical distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InverseTemperature {
    Uniform,
    Finite(f64),
    Infinity,
}

impl InverseTemperature {
    pub fn finite(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta.is_finite() {
            Ok(Self::Finite(beta))
        } else {
            Err(Error::Contract(format!(
                "finite inverse temperature must be positive, got {beta}"
            )))
        }
    }

    /// Numeric value: 0 for uniform, `f64::INFINITY` for the empirical target.
    pub fn value(&self) -> f64 {
        match *self {
            Self::Uniform => 0.0,
            Self::Finite(b) => b,
            Self::Infinity => f64::INFINITY,
        }
    }
}

impl fmt::Display for InverseTemperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => f.write_str("0"),
            Self::Finite(b) => write!(f, "{b}"),
            Self::Infinity => f.write_str("inf"),
        }
    }
}

/// Per-dimension affine map `box = raw · scale + offset` applied by
/// [`rescale_dataset`]. A zero scale marks a constant raw coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub scale: Vec<f64>,
    pub offset: Vec<f64>,
    /// Raw value of each constant coordinate, for the inverse map.
    pub raw_constant: Vec<f64>,
}

impl AffineMap {
    pub fn identity(dim: usize) -> Self {
        Self {
            scale: vec![1.0; dim],
            offset: vec![0.0; dim],
            raw_constant: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn is_identity(&self) -> bool {
        self.scale.iter().all(|&s| s == 1.0) && self.offset.iter().all(|&o| o == 0.0)
    }

    pub fn forward(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(&x, (&s, &o))| x * s + o)
            .collect()
    }

    pub fn inverse(&self, boxed: &[f64]) -> Vec<f64> {
        boxed
            .iter()
            .enumerate()
            .map(|(j, &y)| {
                if self.scale[j] == 0.0 {
                    self.raw_constant[j]
                } else {
                    (y - self.offset[j]) / self.scale[j]
                }
            })
            .collect()
    }

    /// Applies the inverse map row by row.
    pub fn inverse_rows(&self, samples: &Tensor) -> Tensor {
        let data = samples.row_iter().flat_map(|r| self.inverse(r)).collect();
        Tensor::matrix(samples.rows(), samples.cols(), data).expect("shape preserved")
    }
}

/// Atoms of the empirical distribution, all inside the box.
#[derive(Clone, Debug)]
pub struct Dataset {
    points: Tensor,
    domain: BoxDomain,
    transform: AffineMap,
}

impl Dataset {
    pub fn new(points: Tensor, domain: BoxDomain) -> Result<Self> {
        let dim = domain.dim();
        Self::with_transform(points, domain, AffineMap::identity(dim))
    }

    pub fn with_transform(points: Tensor, domain: BoxDomain, transform: AffineMap) -> Result<Self> {
        if points.shape().len() != 2 || points.cols() != domain.dim() {
            return Err(Error::dim("dataset", points.shape(), &[domain.dim()]));
        }
        if transform.dim() != domain.dim() {
            return Err(Error::dim("dataset transform", &[transform.dim()], &[domain.dim()]));
        }
        if let Some(i) = points.row_iter().position(|r| !domain.contains(r)) {
            return Err(Error::Contract(format!(
                "data point {i} {:?} lies outside the box [{}, {}]^{}",
                points.row(i),
                domain.low(),
                domain.high(),
                domain.dim()
            )));
        }
        Ok(Self {
            points,
            domain,
            transform,
        })
    }

    pub fn points(&self) -> &Tensor {
        &self.points
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn transform(&self) -> &AffineMap {
        &self.transform
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Reads a headerless CSV, one point per row. With `rescale` the points
    /// are mapped into the box; otherwise they must already lie inside it.
    pub fn load_csv(path: &Path, domain: BoxDomain, rescale: bool) -> Result<Self> {
        let raw = read_points_csv(path)?;
        if rescale {
            rescale_dataset(&raw, domain)
        } else {
            Self::new(raw, domain)
        }
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_points_csv(path, &self.points)
    }
}

/// Maps the per-coordinate raw min/max onto `[low, high]`; constant
/// coordinates land on the box midpoint.
pub fn rescale_dataset(raw: &Tensor, domain: BoxDomain) -> Result<Dataset> {
    if raw.is_empty() || raw.shape().len() != 2 {
        return Err(Error::Contract("rescale_dataset needs a non-empty N×d matrix".into()));
    }
    let d = raw.cols();
    if d != domain.dim() {
        return Err(Error::dim("rescale_dataset", raw.shape(), &[domain.dim()]));
    }
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in raw.row_iter() {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    let mut map = AffineMap::identity(d);
    for j in 0..d {
        if hi[j] > lo[j] {
            let s = domain.width() / (hi[j] - lo[j]);
            map.scale[j] = s;
            map.offset[j] = domain.low() - lo[j] * s;
        } else {
            map.scale[j] = 0.0;
            map.offset[j] = domain.midpoint();
            map.raw_constant[j] = lo[j];
        }
    }
    let data = raw
        .row_iter()
        .flat_map(|r| map.forward(r))
        .map(|v| v.clamp(domain.low(), domain.high()))
        .collect();
    Dataset::with_transform(Tensor::matrix(raw.rows(), d, data)?, domain, map)
}

/// `m` draws from the heated distribution: a uniformly chosen atom plus
/// isotropic Gaussian noise of variance `1/β`, folded back into the box by
/// mirror reflection. At `Infinity` the atoms are returned exactly.
pub fn sample_heated<R: Rng + ?Sized>(
    data: &Dataset,
    beta: InverseTemperature,
    m: usize,
    rng: &mut R,
) -> Result<Tensor> {
    let std = match beta {
        InverseTemperature::Uniform => {
            return Err(Error::Contract(
                "β = 0 is the uniform distribution; use sample_uniform".into(),
            ))
        }
        InverseTemperature::Finite(b) => {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Contract(format!("invalid inverse temperature {b}")));
            }
            Some(1.0 / b.sqrt())
        }
        InverseTemperature::Infinity => None,
    };
    if m == 0 {
        return Err(Error::Contract("sample count must be positive".into()));
    }
    let d = data.dim();
    let n = data.len();
    let mut out = Vec::with_capacity(m * d);
    for _ in 0..m {
        let atom = data.points.row(rng.random_range(0..n));
        match std {
            None => out.extend_from_slice(atom),
            Some(s) => out.extend(atom.iter().map(|&x| {
                let z: f64 = rng.sample(StandardNormal);
                data.domain.reflect(x + s * z)
            })),
        }
    }
    Tensor::matrix(m, d, out)
}

/// I.i.d. uniform draws on the box.
pub fn sample_uniform<R: Rng + ?Sized>(domain: &BoxDomain, m: usize, rng: &mut R) -> Result<Tensor> {
    if m == 0 {
        return Err(Error::Contract("sample count must be positive".into()));
    }
    let (lo, w) = (domain.low(), domain.width());
    let data = (0..m * domain.dim())
        .map(|_| lo + w * rng.random::<f64>())
        .collect();
    Tensor::matrix(m, domain.dim(), data)
}

/// Untruncated Gaussian-mixture density of the heated distribution at `x`.
pub fn heated_density(data: &Dataset, beta: f64, x: &[f64]) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Contract(format!("heated_density needs finite β > 0, got {beta}")));
    }
    if x.len() != data.dim() {
        return Err(Error::dim("heated_density", &[x.len()], &[data.dim()]));
    }
    let d = data.dim() as f64;
    let norm = (beta / (2.0 * std::f64::consts::PI)).powf(d / 2.0);
    let sum: f64 = data
        .points
        .row_iter()
        .map(|p| {
            let r2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            (-0.5 * beta * r2).exp()
        })
        .sum();
    Ok(norm * sum / data.len() as f64)
}

/// Reads a headerless numeric CSV into an `N×d` matrix.
pub fn read_points_csv(path: &Path) -> Result<Tensor> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(rows + 1, |p| p.line() as usize);
        if cols.is_some_and(|c| c != record.len()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} columns, found {}", cols.unwrap(), record.len()),
            });
        }
        cols = Some(record.len());
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("not a number: `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("non-finite value `{field}`"),
                });
            }
            data.push(v);
        }
        rows += 1;
    }
    match cols {
        Some(c) if rows > 0 => Tensor::matrix(rows, c, data),
        _ => Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no data rows".into(),
        }),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Writes one row per line using shortest round-trip float formatting.
pub fn write_points_csv(path: &Path, points: &Tensor) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut line = String::new();
    for row in points.row_iter() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
