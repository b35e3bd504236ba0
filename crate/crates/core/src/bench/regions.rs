//! Parameter-space regions for the spin-chain benchmarks.

use alloc::boxed::Box;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::qsim::SpinModel;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// {(x, 0) : |x| ≤ b} ∪ {(0, y) : |y| ≤ b}.
    AxisLines { bound: f64 },
    Rect { x: (f64, f64), y: (f64, f64) },
    /// Points of `rect` outside `minus`.
    RectMinus { x: (f64, f64), y: (f64, f64), minus: Box<Region> },
}

const REJECTION_BUDGET: usize = 1000;

impl Region {
    pub fn contains(&self, p: (f64, f64)) -> bool {
        match self {
            Region::AxisLines { bound } => (p.1 == 0.0 && p.0.abs() <= *bound) || (p.0 == 0.0 && p.1.abs() <= *bound),
            Region::Rect { x, y } => x.0 <= p.0 && p.0 <= x.1 && y.0 <= p.1 && p.1 <= y.1,
            Region::RectMinus { x, y, minus } => Region::Rect { x: *x, y: *y }.contains(p) && !minus.contains(p),
        }
    }

    /// One uniform draw: uniform over total length for the lines, uniform
    /// area measure otherwise (with rejection for set differences).
    pub fn sample_one(&self, rng: &mut Rng) -> Result<(f64, f64), BenchError> {
        match self {
            Region::AxisLines { bound } => {
                let t = rng.random_range(-*bound..=*bound);
                Ok(if rng.random_bool(0.5) { (t, 0.0) } else { (0.0, t) })
            }
            Region::Rect { x, y } => Ok((rng.random_range(x.0..=x.1), rng.random_range(y.0..=y.1))),
            Region::RectMinus { x, y, .. } => {
                for _ in 0..REJECTION_BUDGET {
                    let p = (rng.random_range(x.0..=x.1), rng.random_range(y.0..=y.1));
                    if self.contains(p) {
                        return Ok(p);
                    }
                }
                Err(BenchError::RejectionBudget("region has negligible area"))
            }
        }
    }

    pub fn sample(&self, count: usize, rng: &mut Rng) -> Result<Vec<(f64, f64)>, BenchError> {
        (0..count).map(|_| self.sample_one(rng)).collect()
    }
}

/// Labeled-source region of each benchmark.
pub fn source_region(model: SpinModel) -> Region {
    match model {
        SpinModel::Cluster => Region::AxisLines { bound: 4.0 },
        SpinModel::Annni => Region::Rect { x: (0.0, 1.0), y: (0.0, 0.1) },
    }
}

/// Target region: the benchmark rectangle minus the source region.
pub fn target_region(model: SpinModel) -> Region {
    match model {
        SpinModel::Cluster => Region::RectMinus { x: (-4.0, 4.0), y: (-4.0, 4.0), minus: Box::new(source_region(model)) },
        SpinModel::Annni => Region::RectMinus { x: (0.0, 1.0), y: (0.0, 1.0), minus: Box::new(source_region(model)) },
    }
}
