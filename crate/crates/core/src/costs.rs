//! Execution-cost functions L and their Legendre transforms
//! H(z) = sup_v (v·z − L(v)).
//!
//! Both families are even, strictly convex, superlinear and vanish at 0.

use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CostSpec {
    /// L(v) = η v²
    Quadratic { eta: f64 },
    /// L(v) = η |v|^k, k > 1
    Power { eta: f64, k: f64 },
}

impl CostSpec {
    pub fn quadratic(eta: f64) -> Self {
        CostSpec::Quadratic { eta }
    }

    pub fn power(eta: f64, k: f64) -> Self {
        CostSpec::Power { eta, k }
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.eta();
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(HedgeError::domain(format!(
                "cost scale eta must be positive, got {eta}"
            )));
        }
        if let CostSpec::Power { k, .. } = self {
            if !(*k > 1.0) || !k.is_finite() {
                return Err(HedgeError::domain(format!(
                    "cost exponent k must exceed 1, got {k}"
                )));
            }
        }
        Ok(())
    }

    pub fn eta(&self) -> f64 {
        match *self {
            CostSpec::Quadratic { eta } | CostSpec::Power { eta, .. } => eta,
        }
    }

    pub fn is_quadratic(&self) -> bool {
        match *self {
            CostSpec::Quadratic { .. } => true,
            CostSpec::Power { k, .. } => k == 2.0,
        }
    }

    pub fn cost(&self, v: f64) -> f64 {
        match *self {
            CostSpec::Quadratic { eta } => eta * v * v,
            CostSpec::Power { eta, k } => eta * v.abs().powf(k),
        }
    }

    /// L′(v)
    pub fn marginal_cost(&self, v: f64) -> f64 {
        match *self {
            CostSpec::Quadratic { eta } => 2.0 * eta * v,
            CostSpec::Power { eta, k } => (k * eta * v.abs().powf(k - 1.0)).copysign(v),
        }
    }

    /// L″(v); infinite at 0 for power costs with k < 2.
    pub fn cost_curvature(&self, v: f64) -> f64 {
        match *self {
            CostSpec::Quadratic { eta } => 2.0 * eta,
            CostSpec::Power { eta, k } => k * (k - 1.0) * eta * v.abs().powf(k - 2.0),
        }
    }

    /// H(z)
    pub fn hamiltonian(&self, z: f64) -> f64 {
        match *self {
            CostSpec::Quadratic { eta } => z * z / (4.0 * eta),
            CostSpec::Power { eta, k } => {
                let r = 1.0 / (k - 1.0);
                (k - 1.0) * eta.powf(-r) * (z.abs() / k).powf(k * r)
            }
        }
    }

    /// H′(z): the trading rate that is optimal against costate z.
    pub fn hamiltonian_prime(&self, z: f64) -> f64 {
        match *self {
            CostSpec::Quadratic { eta } => z / (2.0 * eta),
            CostSpec::Power { eta, k } => {
                if z == 0.0 {
                    0.0
                } else {
                    z.signum() * (z.abs() / (k * eta)).powf(1.0 / (k - 1.0))
                }
            }
        }
    }

    /// H″(z) = 1 / L″(H′(z)).
    pub fn hamiltonian_curvature(&self, z: f64) -> f64 {
        match *self {
            CostSpec::Quadratic { eta } => 1.0 / (2.0 * eta),
            CostSpec::Power { eta, k } => {
                let r = 1.0 / (k - 1.0);
                r * (1.0 / (k * eta)).powf(r) * z.abs().powf(r - 1.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cost_examples() {
        assert_eq!(CostSpec::quadratic(2.0).cost(3.0), 18.0);
        assert_eq!(CostSpec::quadratic(2.0).cost(0.0), 0.0);
        assert_eq!(CostSpec::power(1.0, 1.5).cost(0.0), 0.0);
        assert!((CostSpec::power(1.0, 1.5).cost(4.0) - 8.0).abs() < 1e-15);
    }

    #[test]
    fn marginal_cost_examples() {
        assert_eq!(CostSpec::quadratic(1.0).marginal_cost(1.0), 2.0);
        assert_eq!(CostSpec::quadratic(1.0).marginal_cost(0.0), 0.0);
        assert_eq!(CostSpec::power(1.0, 1.5).marginal_cost(0.0), 0.0);
        assert!((CostSpec::power(1.0, 1.5).marginal_cost(4.0) - 3.0).abs() < 1e-15);
        assert!((CostSpec::power(1.0, 1.5).marginal_cost(-4.0) + 3.0).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(CostSpec::quadratic(1.0).hamiltonian(2.0), 1.0);
        assert_eq!(CostSpec::quadratic(1.0).hamiltonian(0.0), 0.0);
        assert_eq!(CostSpec::power(1.0, 1.5).hamiltonian(0.0), 0.0);
        assert!((CostSpec::power(1.0, 1.5).hamiltonian(1.5) - 0.5).abs() < 1e-15);
        assert_eq!(CostSpec::quadratic(1.0).hamiltonian_prime(2.0), 1.0);
        assert_eq!(CostSpec::power(1.0, 1.5).hamiltonian_prime(0.0), 0.0);
        assert!((CostSpec::power(1.0, 1.5).hamiltonian_prime(3.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn validation() {
        assert!(CostSpec::quadratic(0.0).validate().is_err());
        assert!(CostSpec::power(1.0, 1.0).validate().is_err());
        assert!(CostSpec::power(1.0, 3.0).validate().is_ok());
        assert!(CostSpec::power(1.0, 2.0).is_quadratic());
    }

    #[test]
    fn json_shape() {
        let q: CostSpec = serde_json::from_str(r#"{"type":"quadratic","eta":2.0}"#).unwrap();
        assert_eq!(q, CostSpec::quadratic(2.0));
        let p: CostSpec = serde_json::from_str(r#"{"type":"power","eta":1.0,"k":1.5}"#).unwrap();
        assert_eq!(p, CostSpec::power(1.0, 1.5));
        assert!(
            serde_json::from_str::<CostSpec>(r#"{"type":"quadratic","eta":2.0,"k":3}"#).is_err()
        );
    }

    fn families() -> impl Strategy<Value = CostSpec> {
        prop_oneof![
            (0.01f64..100.0).prop_map(CostSpec::quadratic),
            (0.01f64..100.0, 1.1f64..4.0).prop_map(|(e, k)| CostSpec::power(e, k)),
        ]
    }

    proptest! {
        #[test]
        fn fenchel_young_equality(c in families(), v in -50.0f64..50.0) {
            let z = c.marginal_cost(v);
            let lhs = c.hamiltonian(z) + c.cost(v);
            let rhs = v * z;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn legendre_inversion(c in families(), v in -50.0f64..50.0) {
            let back = c.hamiltonian_prime(c.marginal_cost(v));
            prop_assert!((back - v).abs() <= 1e-10 * (1.0 + v.abs()));
        }

        #[test]
        fn hamiltonian_even_and_convex(c in families(), z in -20.0f64..20.0, h in 0.01f64..5.0) {
            prop_assert!((c.hamiltonian(z) - c.hamiltonian(-z)).abs() <= 1e-12 * (1.0 + c.hamiltonian(z)));
            let mid = c.hamiltonian(z);
            let chord = 0.5 * (c.hamiltonian(z - h) + c.hamiltonian(z + h));
            prop_assert!(chord >= mid - 1e-12 * (1.0 + mid.abs()));
            prop_assert!(c.hamiltonian_prime(z + h) > c.hamiltonian_prime(z));
        }

        #[test]
        fn hamiltonian_curvature_is_reciprocal(c in families(), v in prop_oneof![-30.0f64..-0.01, 0.01f64..30.0]) {
            let z = c.marginal_cost(v);
            let prod = c.hamiltonian_curvature(z) * c.cost_curvature(v);
            prop_assert!((prod - 1.0).abs() < 1e-10);
        }
    }
}
