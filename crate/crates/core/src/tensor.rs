//! The `p`-step truncated tensor algebra over the reals.

use serde::{Deserialize, Serialize};

use crate::error::{dim, param, Result};

/// Element `(1, a1, .., ap)` of the truncated tensor algebra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncTensor {
    levels: Vec<f64>,
}

impl TruncTensor {
    /// Builds an element from its levels `a0..=ap`; level 0 must equal 1.
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels[0] != 1.0 {
            return param("level 0 of a truncated tensor must equal 1");
        }
        Ok(Self { levels })
    }

    pub fn identity(p: usize) -> Self {
        let mut levels = vec![0.0; p + 1];
        levels[0] = 1.0;
        Self { levels }
    }

    /// Canonical lift `x^n / n!` of a scalar increment.
    pub fn exp(x: f64, p: usize) -> Self {
        let mut levels = Vec::with_capacity(p + 1);
        let mut term = 1.0;
        levels.push(term);
        for n in 1..=p {
            term *= x / n as f64;
            levels.push(term);
        }
        Self { levels }
    }

    pub fn level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// `(a ⊗ b)^(n) = Σ_k a^(n-k) b^(k)`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.level() != other.level() {
            return dim(format!(
                "tensor levels differ: {} vs {}",
                self.level(),
                other.level()
            ));
        }
        let levels = (0..=self.level())
            .map(|n| (0..=n).map(|k| self.levels[n - k] * other.levels[k]).sum())
            .collect();
        Ok(Self { levels })
    }
}

pub fn tensor_product(a: &TruncTensor, b: &TruncTensor) -> Result<TruncTensor> {
    a.product(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lifts_multiply_to_lift_of_sum() {
        let a = TruncTensor::new(vec![1.0, 2.0, 2.0]).unwrap();
        let b = TruncTensor::new(vec![1.0, 3.0, 4.5]).unwrap();
        assert_eq!(a.product(&b).unwrap().levels(), &[1.0, 5.0, 12.5]);
    }

    #[test]
    fn identity_is_neutral() {
        let a = TruncTensor::new(vec![1.0, -0.3, 0.7, 2.5]).unwrap();
        assert_eq!(a.product(&TruncTensor::identity(3)).unwrap(), a);
        assert_eq!(TruncTensor::identity(3).product(&a).unwrap(), a);
    }

    #[test]
    fn level_three_lift_by_hand() {
        // (1, .2, .02, .2^3/6) ⊗ (1, .3, .045, .0045):
        // level 2: .045 + .2*.3 + .02 = .125 = .5^2/2
        // level 3: .0045 + .2*.045 + .02*.3 + .008/6 = .0208333.. = .5^3/6
        let c = TruncTensor::exp(0.2, 3).product(&TruncTensor::exp(0.3, 3)).unwrap();
        let expected = [1.0, 0.5, 0.125, 0.125 / 6.0];
        for (x, y) in c.levels().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn mismatched_levels_rejected() {
        assert!(TruncTensor::identity(2).product(&TruncTensor::identity(3)).is_err());
        assert!(TruncTensor::new(vec![0.5, 1.0]).is_err());
    }

    fn tensor(p: usize) -> impl Strategy<Value = TruncTensor> {
        prop::collection::vec(-2.0f64..2.0, p).prop_map(|mut v| {
            v.insert(0, 1.0);
            TruncTensor::new(v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn product_is_associative(a in tensor(5), b in tensor(5), c in tensor(5)) {
            let left = a.product(&b).unwrap().product(&c).unwrap();
            let right = a.product(&b.product(&c).unwrap()).unwrap();
            for (x, y) in left.levels().iter().zip(right.levels()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
