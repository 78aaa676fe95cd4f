//! Toy datasets: Gaussian mixtures and two nested cubic wireframes.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::diagnostics::distance_to_segment;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Five well-separated 3D modes, drawn once from a fixed-seed uniform over
/// `[-0.8, 0.8]^3`.
pub const MOG5_CENTERS: [[f64; 3]; 5] = [
    [0.707, 0.056, 0.504],
    [-0.074, -0.729, 0.411],
    [-0.06, -0.275, -0.448],
    [0.123, 0.288, 0.702],
    [0.334, 0.694, 0.163],
];

/// Ten 3D modes drawn the same way.
pub const MOG10_CENTERS: [[f64; 3]; 10] = [
    [-0.02, -0.513, 0.657],
    [0.787, -0.578, -0.507],
    [0.728, 0.185, -0.393],
    [0.46, 0.343, 0.691],
    [-0.264, 0.277, -0.619],
    [-0.794, -0.571, 0.521],
    [0.733, -0.552, -0.028],
    [-0.57, 0.184, -0.147],
    [0.719, -0.604, 0.467],
    [0.224, -0.393, 0.133],
];

pub const DEFAULT_SIGMA: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSpec {
    pub centers: Vec<Vec<f64>>,
    pub sigma: f64,
    pub weights: Vec<f64>,
}

impl MixtureSpec {
    pub fn new(centers: Vec<Vec<f64>>, sigma: f64, weights: Vec<f64>) -> Result<Self> {
        let spec = Self {
            centers,
            sigma,
            weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn equal_weights(centers: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        let k = centers.len().max(1);
        Self::new(centers, sigma, vec![1.0 / k as f64; k])
    }

    pub fn mog5() -> Self {
        Self::equal_weights(MOG5_CENTERS.iter().map(|c| c.to_vec()).collect(), DEFAULT_SIGMA)
            .expect("fixture is valid")
    }

    pub fn mog10() -> Self {
        Self::equal_weights(MOG10_CENTERS.iter().map(|c| c.to_vec()).collect(), DEFAULT_SIGMA)
            .expect("fixture is valid")
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::Contract("mixture needs at least one component".into()));
        }
        let d = self.centers[0].len();
        if d == 0 || self.centers.iter().any(|c| c.len() != d) {
            return Err(Error::Contract("mixture centers must share a positive dimension".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Contract(format!("mixture sigma must be ≥ 0, got {}", self.sigma)));
        }
        if self.weights.len() != self.centers.len() {
            return Err(Error::dim("mixture weights", &[self.weights.len()], &[self.centers.len()]));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Contract("mixture weights must be non-negative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(())
    }

    /// `Σ w_k · center_k`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (c, w) in self.centers.iter().zip(&self.weights) {
            for (acc, v) in m.iter_mut().zip(c) {
                *acc += w * v;
            }
        }
        m
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }
}

/// `n` i.i.d. mixture draws: a component by weight, then its center plus
/// `sigma` times a standard normal vector.
pub fn sample_mog<R: Rng + ?Sized>(spec: &MixtureSpec, n: usize, rng: &mut R) -> Result<Tensor> {
    Ok(sample_mog_labeled(spec, n, rng)?.0)
}

/// As [`sample_mog`], also returning each draw's component.
pub fn sample_mog_labeled<R: Rng + ?Sized>(
    spec: &MixtureSpec,
    n: usize,
    rng: &mut R,
) -> Result<(Tensor, Vec<usize>)> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Contract("sample count must be positive".into()));
    }
    let d = spec.dim();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = spec.pick(rng);
        labels.push(k);
        for &c in &spec.centers[k] {
            let z: f64 = rng.sample(StandardNormal);
            data.push(c + spec.sigma * z);
        }
    }
    Ok((Tensor::matrix(n, d, data)?, labels))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubesSpec {
    pub outer_half_width: f64,
    pub inner_half_width: f64,
    pub edge_noise: f64,
}

impl Default for CubesSpec {
    fn default() -> Self {
        Self {
            outer_half_width: 0.9,
            inner_half_width: 0.45,
            edge_noise: 0.01,
        }
    }
}

/// A wireframe edge and the cube it belongs to (0 outer, 1 inner).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub cube: usize,
}

/// The 12 edges of the origin-centered cube of half-width `h`.
pub fn cube_edges(h: f64) -> Vec<([f64; 3], [f64; 3])> {
    let mut edges = Vec::with_capacity(12);
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for su in [-h, h] {
            for sv in [-h, h] {
                let mut a = [0.0; 3];
                a[u] = su;
                a[v] = sv;
                let mut b = a;
                a[axis] = -h;
                b[axis] = h;
                edges.push((a, b));
            }
        }
    }
    edges
}

impl CubesSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_half_width > 0.0 && self.inner_half_width < self.outer_half_width) {
            return Err(Error::Contract(format!(
                "inner cube half-width {} must lie in (0, {})",
                self.inner_half_width, self.outer_half_width
            )));
        }
        if !(self.edge_noise >= 0.0 && self.edge_noise.is_finite()) {
            return Err(Error::Contract("edge noise must be non-negative".into()));
        }
        Ok(())
    }

    /// All 24 edges; the first 12 belong to the outer cube.
    pub fn segments(&self) -> Vec<Segment> {
        [self.outer_half_width, self.inner_half_width]
            .iter()
            .enumerate()
            .flat_map(|(cube, &h)| {
                cube_edges(h)
                    .into_iter()
                    .map(move |(a, b)| Segment { a, b, cube })
            })
            .collect()
    }

    /// Distance to the union wireframe and the cube owning the closest edge.
    pub fn nearest(&self, p: &[f64]) -> (f64, usize) {
        self.segments()
            .iter()
            .map(|s| (distance_to_segment(p, &s.a, &s.b), s.cube))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("24 segments")
    }
}

/// `n` draws: a cube (50/50), one of its 12 edges, a uniform position along
/// it, then isotropic Gaussian jitter of std `edge_noise`.
pub fn sample_nested_cubes<R: Rng + ?Sized>(spec: &CubesSpec, n: usize, rng: &mut R) -> Result<Tensor> {
    Ok(sample_nested_cubes_labeled(spec, n, rng)?.0)
}

/// As [`sample_nested_cubes`], also returning each draw's edge index in
/// [`CubesSpec::segments`] order.
pub fn sample_nested_cubes_labeled<R: Rng + ?Sized>(
    spec: &CubesSpec,
    n: usize,
    rng: &mut R,
) -> Result<(Tensor, Vec<usize>)> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Contract("sample count must be positive".into()));
    }
    let segments = spec.segments();
    let mut data = Vec::with_capacity(3 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let cube = rng.random_range(0..2usize);
        let edge = 12 * cube + rng.random_range(0..12usize);
        let s = &segments[edge];
        let t: f64 = rng.random();
        for j in 0..3 {
            let z: f64 = rng.sample(StandardNormal);
            data.push(s.a[j] + t * (s.b[j] - s.a[j]) + spec.edge_noise * z);
        }
        labels.push(edge);
    }
    Ok((Tensor::matrix(n, 3, data)?, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sigma_single_component() {
        let spec = MixtureSpec::equal_weights(vec![vec![0.3, -0.2]], 0.0).unwrap();
        let s = sample_mog(&spec, 100, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(s.row_iter().all(|r| r == [0.3, -0.2]));
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(MixtureSpec::new(vec![vec![0.0], vec![1.0]], 0.1, vec![0.5, 0.6]).is_err());
        assert!(MixtureSpec::new(vec![], 0.1, vec![]).is_err());
    }

    #[test]
    fn component_frequencies_are_balanced() {
        let spec = MixtureSpec::mog5();
        let (_, labels) = sample_mog_labeled(&spec, 100_000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for k in 0..5 {
            let f = labels.iter().filter(|&&l| l == k).count() as f64 / 1e5;
            // std of a frequency is sqrt(0.16/1e5) ≈ 0.00126; 0.005 is ~4σ.
            assert!((f - 0.2).abs() < 0.005, "component {k}: {f}");
        }
    }

    #[test]
    fn per_component_covariance_is_isotropic() {
        let spec = MixtureSpec::mog5();
        let (s, labels) = sample_mog_labeled(&spec, 100_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let s2 = spec.sigma * spec.sigma;
        for k in 0..5 {
            let rows: Vec<&[f64]> = s.row_iter().zip(&labels).filter(|(_, &l)| l == k).map(|(r, _)| r).collect();
            let n = rows.len() as f64;
            let mean: Vec<f64> = (0..3).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
            for i in 0..3 {
                for j in 0..3 {
                    let c = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / n;
                    if i == j {
                        assert!((c - s2).abs() < 0.02 * s2, "var {c}");
                    } else {
                        assert!(c.abs() < 0.02 * s2, "cov {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn marginal_mean_converges() {
        let spec = MixtureSpec::new(
            vec![vec![-0.5, 0.2], vec![0.4, 0.4]],
            0.1,
            vec![0.3, 0.7],
        )
        .unwrap();
        let n = 50_000;
        let s = sample_mog(&spec, n, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let target = spec.mean();
        // Between-component spread dominates; bound it by the total std.
        for j in 0..2 {
            let m = s.row_iter().map(|r| r[j]).sum::<f64>() / n as f64;
            let var = s.row_iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n as f64;
            assert!((m - target[j]).abs() < 5.0 * var.sqrt() / (n as f64).sqrt(), "{m} vs {}", target[j]);
        }
    }

    #[test]
    fn noiseless_cubes_lie_on_wireframe() {
        let spec = CubesSpec {
            edge_noise: 0.0,
            ..CubesSpec::default()
        };
        let s = sample_nested_cubes(&spec, 2000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for r in s.row_iter() {
            assert!(spec.nearest(r).0 < 1e-12);
        }
    }

    #[test]
    fn per_edge_counts_are_uniform() {
        let spec = CubesSpec::default();
        let n = 48_000;
        let (_, labels) = sample_nested_cubes_labeled(&spec, n, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let bound = 4.0 * (n as f64).sqrt();
        for e in 0..24 {
            let c = labels.iter().filter(|&&l| l == e).count() as f64;
            assert!((c - n as f64 / 24.0).abs() < bound, "edge {e}: {c}");
        }
    }

    #[test]
    fn cubes_respect_geometry_bound() {
        let spec = CubesSpec::default();
        let s = sample_nested_cubes(&spec, 10_000, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let bound = spec.outer_half_width + 4.0 * spec.edge_noise;
        let inside = s.row_iter().filter(|r| r.iter().all(|v| v.abs() <= bound)).count();
        // 4σ per coordinate: a handful of the 30k coordinates may exceed it.
        assert!(inside as f64 >= 0.999 * 10_000.0);
    }

    #[test]
    fn inner_cube_must_be_smaller() {
        let spec = CubesSpec {
            inner_half_width: 1.0,
            ..CubesSpec::default()
        };
        assert!(sample_nested_cubes(&spec, 1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn twelve_distinct_edges_per_cube() {
        let edges = cube_edges(1.0);
        assert_eq!(edges.len(), 12);
        for (a, b) in &edges {
            let diff = a.iter().zip(b).filter(|(x, y)| x != y).count();
            assert_eq!(diff, 1);
        }
    }

    #[test]
    fn fixed_seed_reproducible() {
        let a = sample_mog(&MixtureSpec::mog10(), 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_mog(&MixtureSpec::mog10(), 50, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
