use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureStack;

/// Maps 8-bit planes to `[0, 1]` network inputs.
pub fn normalize_stack(stack: &FeatureStack) -> Vec<f64> {
    stack
        .planes()
        .iter()
        .flat_map(|p| p.pixels().iter().map(|&v| v as f64 / 255.0))
        .collect()
}

/// Per-component standardization of model parameters, fitted on training labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(labels: &[Vec<f64>]) -> Result<Self> {
        let first = labels
            .first()
            .ok_or_else(|| Error::Config("cannot fit a standardizer on no labels".into()))?;
        let k = first.len();
        if labels.iter().any(|l| l.len() != k) {
            return Err(Error::Shape("labels have differing lengths".into()));
        }
        let n = labels.len() as f64;
        let mean: Vec<f64> = (0..k).map(|j| labels.iter().map(|l| l[j]).sum::<f64>() / n).collect();
        let std: Vec<f64> = (0..k)
            .map(|j| (labels.iter().map(|l| (l[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        if let Some(index) = std.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::DegenerateLabels { index });
        }
        Ok(Self { mean, std })
    }

    pub fn transform(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn inverse(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_variance_rejected() {
        let labels = vec![vec![1.0, 2.0], vec![1.0, 3.0]];
        assert!(matches!(Standardizer::fit(&labels), Err(Error::DegenerateLabels { index: 0 })));
        assert!(Standardizer::fit(&[]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(v in prop::collection::vec(-1e6f64..1e6, 3), seed in 0u64..1000) {
            let labels: Vec<Vec<f64>> = (0..5)
                .map(|i| (0..3).map(|j| ((seed + i * 7 + j * 13) % 17) as f64 - 8.0 + j as f64 * 100.0).collect())
                .collect();
            if let Ok(s) = Standardizer::fit(&labels) {
                let back = s.inverse(&s.transform(&v));
                for (a, b) in back.iter().zip(&v) {
                    prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
                }
            }
        }
    }
}
