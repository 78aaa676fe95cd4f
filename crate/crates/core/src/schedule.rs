//! Geometric cooling schedule for the inverse temperature.

use crate::error::{Error, Result};
use crate::target::InverseTemperature;

/// Training runs at `beta_1 · alpha^k` for `k = 0..K`, then finishes on the
/// empirical distribution. `beta_K` itself is never a training stage.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnealingSchedule {
    beta_1: f64,
    beta_k: f64,
    stages: usize,
    alpha: f64,
    visited: Vec<f64>,
}

pub fn make_schedule(beta_1: f64, beta_k: f64, stages: usize) -> Result<AnnealingSchedule> {
    AnnealingSchedule::new(beta_1, beta_k, stages)
}

impl AnnealingSchedule {
    pub fn new(beta_1: f64, beta_k: f64, stages: usize) -> Result<Self> {
        if !(beta_1 > 0.0 && beta_1.is_finite() && beta_k.is_finite()) {
            return Err(Error::Contract(format!(
                "schedule needs finite positive betas, got beta1={beta_1}, betaK={beta_k}"
            )));
        }
        if beta_1 > beta_k {
            return Err(Error::Contract(format!(
                "beta1 ({beta_1}) must not exceed betaK ({beta_k})"
            )));
        }
        if stages < 1 {
            return Err(Error::Contract("schedule needs at least one cooling stage".into()));
        }
        let alpha = (beta_k / beta_1).powf(1.0 / stages as f64);
        let visited = (0..stages).map(|k| beta_1 * alpha.powi(k as i32)).collect();
        Ok(Self {
            beta_1,
            beta_k,
            stages,
            alpha,
            visited,
        })
    }

    pub fn beta_1(&self) -> f64 {
        self.beta_1
    }

    pub fn beta_k(&self) -> f64 {
        self.beta_k
    }

    /// Number of finite stages `K`.
    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn visited(&self) -> &[f64] {
        &self.visited
    }

    /// Stage `index` in `0..=K`; index `K` is the empirical stage.
    pub fn stage(&self, index: usize) -> Result<InverseTemperature> {
        match index.cmp(&self.stages) {
            std::cmp::Ordering::Less => Ok(InverseTemperature::Finite(self.visited[index])),
            std::cmp::Ordering::Equal => Ok(InverseTemperature::Infinity),
            std::cmp::Ordering::Greater => Err(Error::Contract(format!(
                "stage {index} is past the end of a {}-stage schedule",
                self.stages
            ))),
        }
    }

    /// All `K + 1` stages in training order.
    pub fn all_stages(&self) -> impl Iterator<Item = InverseTemperature> + '_ {
        self.visited
            .iter()
            .map(|&b| InverseTemperature::Finite(b))
            .chain(std::iter::once(InverseTemperature::Infinity))
    }

    /// The stage after `current_index`. Advancing from the empirical stage
    /// is an error.
    pub fn advance(&self, current_index: usize) -> Result<InverseTemperature> {
        if current_index >= self.stages {
            return Err(Error::Contract(format!(
                "cannot advance past stage {current_index} of a {}-stage schedule",
                self.stages
            )));
        }
        self.stage(current_index + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn figure_schedule_alpha() {
        let s = make_schedule(0.1, 10.0, 20).unwrap();
        // 100^(1/20) to 25 digits: 1.258925411794167210423954
        assert!(rel(s.alpha(), 1.2589254117941673) <= 1e-12);
        assert!(rel(s.alpha().powi(20) * 0.1, 10.0) <= 1e-12);
        assert_eq!(s.visited().len(), 20);
    }

    #[test]
    fn degenerate_ratio_is_constant() {
        let s = make_schedule(1.0, 1.0, 5).unwrap();
        assert_eq!(s.alpha(), 1.0);
        assert!(s.visited().iter().all(|&b| b == 1.0));
    }

    #[test]
    fn single_stage() {
        let s = make_schedule(0.1, 10.0, 1).unwrap();
        assert!(rel(s.alpha(), 100.0) < 1e-12);
        assert_eq!(s.visited(), &[0.1]);
        assert_eq!(s.stage(1).unwrap(), InverseTemperature::Infinity);
        let all: Vec<_> = s.all_stages().collect();
        assert_eq!(all, vec![InverseTemperature::Finite(0.1), InverseTemperature::Infinity]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(make_schedule(10.0, 0.1, 20).is_err());
        assert!(make_schedule(0.1, 10.0, 0).is_err());
        assert!(make_schedule(0.0, 10.0, 3).is_err());
    }

    #[test]
    fn advance_walk() {
        let s = make_schedule(0.1, 10.0, 20).unwrap();
        assert_eq!(s.advance(0).unwrap(), InverseTemperature::Finite(0.1 * s.alpha()));
        assert_eq!(s.advance(19).unwrap(), InverseTemperature::Infinity);
        assert!(s.advance(20).is_err());

        let mut beta = s.beta_1();
        for k in 0..19 {
            match s.advance(k).unwrap() {
                InverseTemperature::Finite(b) => {
                    assert!(rel(b, beta * s.alpha()) < 1e-12);
                    beta = b;
                }
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(rel(beta, 10.0 / s.alpha()) <= 1e-12);
    }

    #[test]
    fn visited_strictly_increasing() {
        let s = make_schedule(0.3, 7.0, 9).unwrap();
        assert!(s.visited().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s, make_schedule(0.3, 7.0, 9).unwrap());
    }
}
