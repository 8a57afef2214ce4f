//! Simulated measurement data: exact Born probabilities for the measured
//! effects, optionally perturbed by uniform noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::{Povm, SubsetPlan};
use crate::states::DensityMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyVector {
    pub values: Vec<f64>,
    pub noise_level: f64,
    /// Effect indices, aligned with `values`.
    pub indices: Vec<usize>,
}

impl FrequencyVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How a noise level is turned into a perturbation of `p`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// `p (1 + eps)`, `eps ~ U(-level, level)`.
    #[default]
    Relative,
    /// `p + eps`, `eps ~ U(-level, level)`.
    Absolute,
}

/// `tr(E_m rho)` for every measured index `m` of `plan`.
pub fn expectations(rho: &DensityMatrix, povm: &Povm, plan: &SubsetPlan) -> Result<FrequencyVector> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimMismatch {
            expected: povm.dim(),
            actual: rho.dim(),
        });
    }
    let values = plan
        .measured()
        .iter()
        .map(|&m| rho.expectation(povm.effect(m)))
        .collect();
    Ok(FrequencyVector {
        values,
        noise_level: 0.0,
        indices: plan.measured().to_vec(),
    })
}

/// Relative uniform noise: every value `p` becomes `p (1 + eps)` with
/// independent `eps ~ U(-level, level)`, clipped to `[0, 1]`.
pub fn add_uniform_noise(f: &FrequencyVector, level: f64, rng: &mut impl Rng) -> FrequencyVector {
    add_noise(f, level, NoiseModel::Relative, rng)
}

pub fn add_noise(
    f: &FrequencyVector,
    level: f64,
    model: NoiseModel,
    rng: &mut impl Rng,
) -> FrequencyVector {
    assert!((0.0..1.0).contains(&level), "noise level must lie in [0, 1)");
    let values = f
        .values
        .iter()
        .map(|&p| {
            if level == 0.0 {
                return p;
            }
            let eps = rng.random_range(-level..level);
            let noisy = match model {
                NoiseModel::Relative => p * (1.0 + eps),
                NoiseModel::Absolute => p + eps,
            };
            noisy.clamp(0.0, 1.0)
        })
        .collect();
    FrequencyVector {
        values,
        noise_level: level,
        indices: f.indices.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{qubit_sic, sic_product};
    use crate::rng::RngSeed;
    use approx::assert_abs_diff_eq;

    #[test]
    fn maximally_mixed_gives_trace_over_d() {
        let povm = sic_product(2).unwrap();
        let plan = SubsetPlan::prefix(16, 5).unwrap();
        let f = expectations(&DensityMatrix::maximally_mixed(4), &povm, &plan).unwrap();
        for (v, &m) in f.values.iter().zip(&f.indices) {
            assert_abs_diff_eq!(*v, povm.effect(m).trace().re / 4.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn full_plan_sums_to_one() {
        let povm = sic_product(3).unwrap();
        let rho = crate::states::haar_pure(3, &mut RngSeed(2).rng()).unwrap();
        let f = expectations(&rho, &povm, &SubsetPlan::prefix(64, 64).unwrap()).unwrap();
        assert_abs_diff_eq!(f.values.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn ket0_on_first_sic_effect() {
        let rho = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let f = expectations(&rho, &qubit_sic(), &SubsetPlan::prefix(4, 1).unwrap()).unwrap();
        assert_abs_diff_eq!(f.values[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn dim_mismatch() {
        let err = expectations(
            &DensityMatrix::maximally_mixed(4),
            &qubit_sic(),
            &SubsetPlan::prefix(4, 1).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimMismatch { .. }));
    }

    #[test]
    fn zero_level_is_identity_and_zero_stays_zero() {
        let f = FrequencyVector {
            values: vec![0.0, 0.3, 1.0],
            noise_level: 0.0,
            indices: vec![0, 1, 2],
        };
        let mut rng = RngSeed(4).rng();
        assert_eq!(add_uniform_noise(&f, 0.0, &mut rng).values, f.values);
        for _ in 0..100 {
            let g = add_uniform_noise(&f, 0.05, &mut rng);
            assert_eq!(g.values[0], 0.0);
            assert!(g.values.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn absolute_model_clips() {
        let f = FrequencyVector {
            values: vec![0.0; 50],
            noise_level: 0.0,
            indices: (0..50).collect(),
        };
        let g = add_noise(&f, 0.1, NoiseModel::Absolute, &mut RngSeed(1).rng());
        assert!(g.values.iter().all(|v| (0.0..=0.1).contains(v)));
        assert!(g.values.iter().any(|&v| v > 0.0));
    }
}
