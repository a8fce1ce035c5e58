//! Jacobi elliptic functions `sn`, `cn`, `dn` with parameter `m = k^2`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EllipticError {
    #[error("parameter m = {0} outside [0, 1)")]
    Domain(f64),
    #[error("argument u = {0} is not finite")]
    NonFiniteArgument(f64),
}

/// Values of the three Jacobi functions at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiValues {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

const MAX_LANDEN_STEPS: usize = 16;

/// `sn(u|m)`, `cn(u|m)`, `dn(u|m)` by the arithmetic-geometric mean.
///
/// The AGM sequence `a, b, c` is run forward until `c` drops below 1e-16,
/// then the amplitude is recovered by the backward recurrence
/// `phi_{n-1} = (phi_n + asin(c_n / a_n * sin phi_n)) / 2`.
/// `dn` is taken from `sqrt(1 - m sn^2)`, which is positive for `m < 1`.
pub fn jacobi_sn_cn_dn(u: f64, m: f64) -> Result<JacobiValues, EllipticError> {
    if !(0.0..1.0).contains(&m) {
        return Err(EllipticError::Domain(m));
    }
    if !u.is_finite() {
        return Err(EllipticError::NonFiniteArgument(u));
    }
    if m == 0.0 {
        let (s, c) = u.sin_cos();
        return Ok(JacobiValues {
            sn: s,
            cn: c,
            dn: 1.0,
        });
    }

    let mut a = [0.0f64; MAX_LANDEN_STEPS + 1];
    let mut c = [0.0f64; MAX_LANDEN_STEPS + 1];
    a[0] = 1.0;
    c[0] = m.sqrt();
    let mut b = (1.0 - m).sqrt();
    let mut n = 0;
    while c[n].abs() > 1e-16 && n < MAX_LANDEN_STEPS {
        let (an, bn) = (a[n], b);
        a[n + 1] = 0.5 * (an + bn);
        c[n + 1] = 0.5 * (an - bn);
        b = (an * bn).sqrt();
        n += 1;
    }

    let mut phi = (1u64 << n) as f64 * a[n] * u;
    for k in (1..=n).rev() {
        phi = 0.5 * (phi + (c[k] / a[k] * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    let dn = (1.0 - m * sn * sn).sqrt();
    Ok(JacobiValues { sn, cn, dn })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigonometric_limit() {
        for &u in &[-3.0, -0.4, 0.0, 1.0, 2.5, 9.0] {
            let v = jacobi_sn_cn_dn(u, 0.0).unwrap();
            assert_eq!(v.sn, f64::sin(u));
            assert_eq!(v.cn, f64::cos(u));
            assert_eq!(v.dn, 1.0);
        }
    }

    #[test]
    fn origin() {
        for &m in &[0.0, 0.3, 0.9, 0.99] {
            let v = jacobi_sn_cn_dn(0.0, m).unwrap();
            assert_eq!((v.sn, v.cn, v.dn), (0.0, 1.0, 1.0));
        }
    }

    #[test]
    fn domain_errors() {
        assert_eq!(jacobi_sn_cn_dn(1.0, 1.0), Err(EllipticError::Domain(1.0)));
        assert_eq!(jacobi_sn_cn_dn(1.0, -0.1), Err(EllipticError::Domain(-0.1)));
        assert!(jacobi_sn_cn_dn(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn near_unit_parameter_is_tanh_like() {
        // As m -> 1, sn -> tanh, cn and dn -> sech.
        let v = jacobi_sn_cn_dn(0.8, 1.0 - 1e-12).unwrap();
        assert!((v.sn - 0.8f64.tanh()).abs() < 1e-10);
        assert!((v.cn - 1.0 / 0.8f64.cosh()).abs() < 1e-10);
    }
}
