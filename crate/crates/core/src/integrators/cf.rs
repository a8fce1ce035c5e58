//! General commutator-free stage structure: each stage is a time-ordered
//! product of exponentials of linear combinations of earlier stage slopes.

use super::IntegrationError;
use crate::tableau::Tableau;

/// Consistency tolerance between the exponential coefficients and the
/// classical tableau they claim to realize.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-12;

/// Coefficient tensors `alpha_{l;ij}` and `beta_{l;i}`.
///
/// `stage_exponents[i][l]` is the coefficient vector (length `s`, indexed by
/// slope `j`) of the `l`-th exponential applied to `Y_t` when forming stage
/// `i`; `l = 0` acts first, i.e. sits rightmost in the product.
/// `output_exponents[l]` plays the same role for the step output. Every
/// vector is dense over all `s` slopes with explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct CfCoefficients {
    tableau: Tableau,
    stage_exponents: Vec<Vec<Vec<f64>>>,
    output_exponents: Vec<Vec<f64>>,
}

impl CfCoefficients {
    /// Validates the tensors against the classical tableau they realize:
    /// stage `i` may only use slopes `j < i`, and the exponent coefficients
    /// must sum to `a_ij` (stages) and `b_i` (output).
    pub fn new(
        tableau: Tableau,
        stage_exponents: Vec<Vec<Vec<f64>>>,
        output_exponents: Vec<Vec<f64>>,
    ) -> Result<Self, IntegrationError> {
        let s = tableau.stages();
        if stage_exponents.len() != s {
            return Err(IntegrationError::Configuration(format!(
                "expected exponent lists for {s} stages, got {}",
                stage_exponents.len()
            )));
        }
        let all_vectors = stage_exponents.iter().flatten().chain(&output_exponents);
        for v in all_vectors {
            if v.len() != s {
                return Err(IntegrationError::Configuration(format!(
                    "exponent coefficient vector has length {}, expected {s}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(IntegrationError::Configuration(
                    "non-finite exponent coefficient".into(),
                ));
            }
        }
        for (i, exps) in stage_exponents.iter().enumerate() {
            for v in exps {
                if let Some(j) = (i..s).find(|&j| v[j] != 0.0) {
                    return Err(IntegrationError::Configuration(format!(
                        "stage {} uses slope {} which is not yet available",
                        i + 1,
                        j + 1
                    )));
                }
            }
            for j in 0..s {
                let sum: f64 = exps.iter().map(|v| v[j]).sum();
                let residual = (sum - tableau.a(i, j)).abs();
                if residual > CONSISTENCY_TOLERANCE {
                    return Err(IntegrationError::Consistency {
                        what: format!("sum_l alpha_(l;{},{}) = a_{0}{1}", i + 1, j + 1),
                        residual,
                    });
                }
            }
        }
        for j in 0..s {
            let sum: f64 = output_exponents.iter().map(|v| v[j]).sum();
            let residual = (sum - tableau.b()[j]).abs();
            if residual > CONSISTENCY_TOLERANCE {
                return Err(IntegrationError::Consistency {
                    what: format!("sum_l beta_(l;{}) = b_{0}", j + 1),
                    residual,
                });
            }
        }
        Ok(Self {
            tableau,
            stage_exponents,
            output_exponents,
        })
    }

    /// Crouch-Grossman: one exponential per earlier slope,
    /// `alpha_{l;ij} = a_ij delta_lj`, `beta_{l;i} = b_i delta_li`.
    pub fn crouch_grossman(t: &Tableau) -> Self {
        let s = t.stages();
        let unit = |j: usize, x: f64| {
            let mut v = vec![0.0; s];
            v[j] = x;
            v
        };
        let stage_exponents = (0..s)
            .map(|i| (0..i).map(|j| unit(j, t.a(i, j))).collect())
            .collect();
        let output_exponents = (0..s).map(|j| unit(j, t.b()[j])).collect();
        Self {
            tableau: t.clone(),
            stage_exponents,
            output_exponents,
        }
    }

    /// The low-storage format: stage `i` reuses stage `i - 1` and adds one
    /// exponential holding every slope so far. The `l`-th exponential has
    /// coefficients `a_{l+1,j} - a_{l,j}`, the last output exponential
    /// `b_j - a_{s,j}`.
    pub fn low_storage(t: &Tableau) -> Self {
        let s = t.stages();
        let a = |i: usize, j: usize| if i < s { t.a(i, j) } else { t.b()[j] };
        let increments: Vec<Vec<f64>> = (0..s)
            .map(|l| (0..s).map(|j| if j <= l { a(l + 1, j) - a(l, j) } else { 0.0 }).collect())
            .collect();
        let stage_exponents = (0..s).map(|i| increments[..i].to_vec()).collect();
        Self {
            tableau: t.clone(),
            stage_exponents,
            output_exponents: increments,
        }
    }

    /// All-zero coefficients over the given tableau's nodes. Only consistent
    /// with a tableau whose `a` and `b` vanish.
    pub fn zeros(t: &Tableau) -> Self {
        let s = t.stages();
        Self {
            tableau: t.clone(),
            stage_exponents: (0..s).map(|i| vec![vec![0.0; s]; i]).collect(),
            output_exponents: vec![vec![0.0; s]; s],
        }
    }

    pub fn tableau(&self) -> &Tableau {
        &self.tableau
    }

    pub fn stage_exponents(&self) -> &[Vec<Vec<f64>>] {
        &self.stage_exponents
    }

    pub fn output_exponents(&self) -> &[Vec<f64>] {
        &self.output_exponents
    }

    /// Re-checks the consistency sums.
    pub fn validate(&self) -> Result<(), IntegrationError> {
        Self::new(
            self.tableau.clone(),
            self.stage_exponents.clone(),
            self.output_exponents.clone(),
        )
        .map(|_| ())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn luscher() -> Tableau {
        Tableau::new(
            "LUSCHER33",
            vec![vec![], vec![0.25], vec![-2.0 / 9.0, 8.0 / 9.0]],
            vec![0.25, 0.0, 0.75],
            3,
        )
        .unwrap()
    }

    #[test]
    fn low_storage_three_stage_coefficients() {
        let t = luscher();
        let cf = CfCoefficients::low_storage(&t);
        cf.validate().unwrap();
        let inc = cf.output_exponents();
        // alpha_{1;21} = a21, alpha_{2;31} = a31 - a21, alpha_{2;32} = a32,
        // beta_{3;j} = b_j - a_3j.
        assert_eq!(inc[0], vec![0.25, 0.0, 0.0]);
        assert_eq!(inc[1], vec![-2.0 / 9.0 - 0.25, 8.0 / 9.0, 0.0]);
        assert_eq!(inc[2], vec![0.25 + 2.0 / 9.0, -8.0 / 9.0, 0.75]);
        assert_eq!(cf.stage_exponents()[2].len(), 2);
    }

    #[test]
    fn crouch_grossman_is_consistent() {
        CfCoefficients::crouch_grossman(&luscher()).validate().unwrap();
    }

    #[test]
    fn consistency_violation_is_reported() {
        let t = luscher();
        let mut stages = CfCoefficients::crouch_grossman(&t).stage_exponents().to_vec();
        stages[2][0][0] += 1e-6;
        let out = CfCoefficients::crouch_grossman(&t).output_exponents().to_vec();
        assert!(matches!(
            CfCoefficients::new(t, stages, out),
            Err(IntegrationError::Consistency { .. })
        ));
    }

    #[test]
    fn implicit_use_is_rejected() {
        let t = luscher();
        let mut stages = CfCoefficients::crouch_grossman(&t).stage_exponents().to_vec();
        stages[1][0][1] = 0.5;
        let out = CfCoefficients::crouch_grossman(&t).output_exponents().to_vec();
        assert!(matches!(
            CfCoefficients::new(t, stages, out),
            Err(IntegrationError::Configuration(_))
        ));
    }
}
