//! Evaluation instruments: mode coverage, uniformity, frozen-noise collapse
//! and the stability of the discriminator's training curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::synth::CubesSpec;
use crate::target::BoxDomain;
use crate::tensor::Tensor;
use crate::trainer::TrainingTrace;

/// Default coverage radius in units of the mixture's sigma.
pub const COVERAGE_RADIUS_SIGMAS: f64 = 3.0;
/// Default fraction of samples a mode needs to count as covered.
pub const COVERAGE_THRESHOLD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct ModeCoverageReport {
    pub fractions: Vec<f64>,
    pub covered_count: usize,
    pub total_modes: usize,
    pub threshold: f64,
}

impl ModeCoverageReport {
    pub fn all_covered(&self) -> bool {
        self.covered_count == self.total_modes
    }

    pub fn unassigned_fraction(&self) -> f64 {
        1.0 - self.fractions.iter().sum::<f64>()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Assigns each sample to its nearest center when within `radius`; a mode is
/// covered when its share of all samples reaches `coverage_threshold`.
pub fn mode_coverage<C: AsRef<[f64]>>(
    samples: &Tensor,
    centers: &[C],
    radius: f64,
    coverage_threshold: f64,
) -> Result<ModeCoverageReport> {
    if samples.is_empty() || samples.rows() == 0 {
        return Err(Error::Contract("mode_coverage needs samples".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Contract(format!("coverage radius must be positive, got {radius}")));
    }
    if centers.is_empty() {
        return Err(Error::Contract("mode_coverage needs at least one center".into()));
    }
    for c in centers {
        if c.as_ref().len() != samples.cols() {
            return Err(Error::dim("mode_coverage", &[c.as_ref().len()], &[samples.cols()]));
        }
    }
    let r2 = radius * radius;
    let mut counts = vec![0usize; centers.len()];
    for x in samples.row_iter() {
        let (best, d2) = centers
            .iter()
            .enumerate()
            .map(|(k, c)| (k, sq_dist(x, c.as_ref())))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty centers");
        if d2 <= r2 {
            counts[best] += 1;
        }
    }
    let n = samples.rows() as f64;
    let fractions: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let covered_count = fractions.iter().filter(|&&f| f >= coverage_threshold).count();
    Ok(ModeCoverageReport {
        fractions,
        covered_count,
        total_modes: centers.len(),
        threshold: coverage_threshold,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct UniformityReport {
    /// Kolmogorov–Smirnov distance of each marginal to the uniform CDF.
    pub ks: Vec<f64>,
    /// Largest absolute Pearson correlation between two coordinates; 1 when
    /// any coordinate has zero variance.
    pub max_abs_correlation: f64,
}

impl UniformityReport {
    pub fn max_ks(&self) -> f64 {
        self.ks.iter().copied().fold(0.0, f64::max)
    }

    pub fn passes(&self, ks_limit: f64, correlation_limit: f64) -> bool {
        self.max_ks() < ks_limit && self.max_abs_correlation < correlation_limit
    }
}

/// One-sample KS distance of `values` against the uniform CDF on `[low, high]`.
pub fn ks_uniform(values: &mut [f64], low: f64, high: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x - low) / (high - low)).clamp(0.0, 1.0);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn uniformity_score(samples: &Tensor, domain: &BoxDomain) -> Result<UniformityReport> {
    if samples.rows() < 100 {
        return Err(Error::Contract(format!(
            "uniformity_score needs at least 100 samples, got {}",
            samples.rows()
        )));
    }
    let d = samples.cols();
    if d != domain.dim() {
        return Err(Error::dim("uniformity_score", samples.shape(), &[domain.dim()]));
    }
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|j| samples.row_iter().map(|r| r[j]).collect())
        .collect();
    let ks = columns
        .iter()
        .map(|c| ks_uniform(&mut c.clone(), domain.low(), domain.high()))
        .collect();

    let n = samples.rows() as f64;
    let centered: Vec<(Vec<f64>, f64)> = columns
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n;
            let dev: Vec<f64> = c.iter().map(|v| v - mean).collect();
            let ss = dev.iter().map(|v| v * v).sum::<f64>();
            (dev, ss)
        })
        .collect();
    let mut max_abs_correlation: f64 = 0.0;
    for i in 0..d {
        for j in i + 1..d {
            let (ci, si) = &centered[i];
            let (cj, sj) = &centered[j];
            let r = if *si <= 0.0 || *sj <= 0.0 {
                1.0
            } else {
                let cov: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
                (cov / (si * sj).sqrt()).abs()
            };
            max_abs_correlation = max_abs_correlation.max(r);
        }
    }
    if d > 1 && centered.iter().any(|(_, s)| *s <= 0.0) {
        max_abs_correlation = 1.0;
    }
    Ok(UniformityReport {
        ks,
        max_abs_correlation,
    })
}

/// Mean Euclidean distance over all unordered pairs of rows.
pub fn mean_pairwise_distance(samples: &Tensor) -> f64 {
    let n = samples.rows();
    let mut total = 0.0;
    for i in 0..n {
        let a = samples.row(i);
        let mut row_sum = 0.0;
        for j in i + 1..n {
            row_sum += sq_dist(a, samples.row(j)).sqrt();
        }
        total += row_sum;
    }
    total / (n * (n - 1) / 2) as f64
}

/// Expected distance between two independent uniform points of the box.
/// Closed forms up to three dimensions, a fixed-seed Monte-Carlo estimate
/// beyond.
pub fn uniform_mean_distance(domain: &BoxDomain) -> f64 {
    let unit = match domain.dim() {
        1 => 1.0 / 3.0,
        2 => (2.0 + 2f64.sqrt() + 5.0 * (1.0 + 2f64.sqrt()).ln()) / 15.0,
        3 => {
            let (r2, r3, pi) = (2f64.sqrt(), 3f64.sqrt(), std::f64::consts::PI);
            (4.0 + 17.0 * r2 - 6.0 * r3 - 7.0 * pi) / 105.0
                + (1.0 + r2).ln() / 5.0
                + 2.0 * (2.0 + r3).ln() / 5.0
        }
        d => {
            const PAIRS: usize = 1_000_000;
            let mut rng = ChaCha8Rng::seed_from_u64(0x0bad_5eed ^ d as u64);
            let mut sum = 0.0;
            for _ in 0..PAIRS {
                let mut s = 0.0;
                for _ in 0..d {
                    let t = rng.random::<f64>() - rng.random::<f64>();
                    s += t * t;
                }
                sum += s.sqrt();
            }
            sum / PAIRS as f64
        }
    };
    unit * domain.width()
}

/// Mean pairwise distance of the batch relative to that of uniform samples
/// in the same box: about 1 for healthy noise, near 0 for collapse.
pub fn frozen_noise_score(samples: &Tensor, domain: &BoxDomain) -> Result<f64> {
    frozen_noise_score_with_reference(samples, uniform_mean_distance(domain))
}

/// As [`frozen_noise_score`] with a precomputed uniform reference distance.
pub fn frozen_noise_score_with_reference(samples: &Tensor, reference: f64) -> Result<f64> {
    if samples.rows() < 2 {
        return Err(Error::Contract("frozen_noise_score needs at least 2 samples".into()));
    }
    Ok(mean_pairwise_distance(samples) / reference)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    /// Rolling mean of `|d_real - d_fake|`, one entry per full window.
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    pub final_gap: f64,
    pub window: usize,
}

pub fn stability_report(trace: &TrainingTrace, window: usize) -> Result<StabilityReport> {
    let pairs: Vec<(f64, f64)> = trace.records().iter().map(|r| (r.d_real, r.d_fake)).collect();
    stability_from_curves(&pairs, window)
}

/// Rolling-window gap over `(d_real, d_fake)` pairs.
pub fn stability_from_curves(curves: &[(f64, f64)], window: usize) -> Result<StabilityReport> {
    if curves.is_empty() {
        return Err(Error::Contract("stability_report needs a non-empty trace".into()));
    }
    if window == 0 || window > curves.len() {
        return Err(Error::Contract(format!(
            "window {window} must be in 1..={}",
            curves.len()
        )));
    }
    let abs: Vec<f64> = curves.iter().map(|(r, f)| (r - f).abs()).collect();
    let mut gaps = Vec::with_capacity(abs.len() - window + 1);
    let mut sum: f64 = abs[..window].iter().sum();
    gaps.push(sum / window as f64);
    for i in window..abs.len() {
        sum += abs[i] - abs[i - window];
        gaps.push(sum / window as f64);
    }
    // Summation drift must not push a gap outside [0, 1].
    for g in &mut gaps {
        *g = g.clamp(0.0, 1.0);
    }
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    let final_gap = *gaps.last().expect("at least one window");
    Ok(StabilityReport {
        gaps,
        max_gap,
        final_gap,
        window,
    })
}

/// Default wireframe tolerance in units of the cubes' edge noise.
pub const WIREFRAME_TOLERANCE_NOISES: f64 = 5.0;

#[derive(Clone, Debug, PartialEq)]
pub struct WireframeReport {
    /// Share of samples within `tolerance` of some edge.
    pub near_fraction: f64,
    /// Share of samples whose nearest edge belongs to the outer / inner cube.
    pub cube_fractions: [f64; 2],
    pub tolerance: f64,
}

pub fn wireframe_report(samples: &Tensor, spec: &CubesSpec, tolerance: f64) -> Result<WireframeReport> {
    if samples.shape().len() != 2 || samples.cols() != 3 {
        return Err(Error::dim("wireframe samples", samples.shape(), &[samples.rows(), 3]));
    }
    if samples.rows() == 0 {
        return Err(Error::Contract("wireframe report needs at least one sample".into()));
    }
    let mut near = 0usize;
    let mut counts = [0usize; 2];
    for p in samples.row_iter() {
        let (d, cube) = spec.nearest(p);
        if d <= tolerance {
            near += 1;
        }
        counts[cube] += 1;
    }
    let n = samples.rows() as f64;
    Ok(WireframeReport {
        near_fraction: near as f64 / n,
        cube_fractions: [counts[0] as f64 / n, counts[1] as f64 / n],
        tolerance,
    })
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub fn distance_to_segment(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let ap: Vec<f64> = a.iter().zip(p).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 > 0.0 {
        (ab.iter().zip(&ap).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ap.iter()
        .zip(&ab)
        .map(|(v, u)| (v - t * u).powi(2))
        .sum::<f64>()
        .sqrt()
}
