//! The unmeasured-probability vector `u = (tr(rho E_j))_{j unmeasured}` and
//! its Kullback-Leibler divergence from the uniform distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::povm::{Povm, SubsetPlan};
use crate::states::DensityMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnmeasuredVector {
    pub values: Vec<f64>,
    pub total_mass: f64,
}

impl UnmeasuredVector {
    pub fn new(values: Vec<f64>) -> Self {
        let total_mass = values.iter().sum();
        UnmeasuredVector { values, total_mass }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Values follow `plan.unmeasured()` order.
pub fn unmeasured_vector(
    rho: &DensityMatrix,
    povm: &Povm,
    plan: &SubsetPlan,
) -> Result<UnmeasuredVector> {
    if plan.unmeasured().is_empty() {
        return Err(Error::EmptyUnmeasuredSet);
    }
    if rho.dim() != povm.dim() {
        return Err(Error::DimMismatch {
            expected: povm.dim(),
            actual: rho.dim(),
        });
    }
    Ok(UnmeasuredVector::new(
        plan.unmeasured()
            .iter()
            .map(|&j| rho.expectation(povm.effect(j)))
            .collect(),
    ))
}

/// `D(u_hat || uniform) = sum u_hat_k ln(u_hat_k M)` with `u_hat = u / sum(u)`
/// and `M = len(u)`. Negative entries (solver round-off) count as zero.
pub fn kl_from_uniform(u: &UnmeasuredVector) -> Result<f64> {
    let clipped: Vec<f64> = u.values.iter().map(|&v| v.max(0.0)).collect();
    let mass: f64 = clipped.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::ZeroMass);
    }
    let m = clipped.len() as f64;
    let kl: f64 = clipped
        .iter()
        .map(|&v| v / mass)
        .filter(|&p| p > 0.0)
        .map(|p| p * (p * m).ln())
        .sum();
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::sic_product;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kl_closed_forms() {
        let uniform = UnmeasuredVector::new(vec![0.1; 5]);
        assert_abs_diff_eq!(kl_from_uniform(&uniform).unwrap(), 0.0, epsilon = 1e-15);
        let point = UnmeasuredVector::new(vec![0.3, 0.0]);
        assert_abs_diff_eq!(kl_from_uniform(&point).unwrap(), 2f64.ln(), epsilon = 1e-15);
        let skew = UnmeasuredVector::new(vec![0.5, 0.25, 0.25]);
        let want = 0.5 * 1.5f64.ln() + 0.5 * 0.75f64.ln();
        assert_abs_diff_eq!(kl_from_uniform(&skew).unwrap(), want, epsilon = 1e-15);
        assert_abs_diff_eq!(want, 0.05889, epsilon = 1e-5);
    }

    #[test]
    fn zero_mass() {
        let z = UnmeasuredVector::new(vec![0.0, 0.0]);
        assert_eq!(kl_from_uniform(&z), Err(Error::ZeroMass));
    }

    #[test]
    fn single_unmeasured_effect_of_mixed_state() {
        let povm = sic_product(2).unwrap();
        let plan = SubsetPlan::prefix(16, 15).unwrap();
        let u = unmeasured_vector(&DensityMatrix::maximally_mixed(4), &povm, &plan).unwrap();
        assert_eq!(u.len(), 1);
        assert_abs_diff_eq!(u.values[0], povm.effect(15).trace().re / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_unmeasured() {
        let povm = sic_product(1).unwrap();
        let plan = SubsetPlan::prefix(4, 4).unwrap();
        assert_eq!(
            unmeasured_vector(&DensityMatrix::maximally_mixed(2), &povm, &plan),
            Err(Error::EmptyUnmeasuredSet)
        );
    }

    #[test]
    fn maximally_mixed_is_uniform_on_sic_product() {
        let povm = sic_product(3).unwrap();
        let plan = SubsetPlan::prefix(64, 10).unwrap();
        let u = unmeasured_vector(&DensityMatrix::maximally_mixed(8), &povm, &plan).unwrap();
        assert!(kl_from_uniform(&u).unwrap() < 1e-12);
    }
}
