//! Closed-form bound calculators: the Lipschitz constant, the
//! Rademacher-complexity bound on full and restricted parameter domains,
//! the linear-model comparison, and the high-probability generalization
//! gap bound.
//!
//! The complexity bound is carried symbolically as
//! `raw = 18 sqrt(pi) * K * R * sqrt(L) / sqrt(M)` with `K = 2 sqrt(L)`
//! and the domain diameter `R = 2 pi sqrt(L)` (full box `[0, 2 pi]^L`) or
//! `R = 2 pi` (restricted box `[0, 2 pi / sqrt(L)]^L`). On the full
//! domain this composes to `72 pi^(3/2) L^(3/2) / sqrt(M)`; restricted it
//! is `72 pi^(3/2) L / sqrt(M)`. Since a Pauli expectation lies in
//! [-1, 1], the complexity itself never exceeds one, and the reported
//! bound is clamped there.

use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Parameter domain the bound is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamDomain {
    /// `theta in [0, 2 pi]^L`, diameter `2 pi sqrt(L)`.
    Full,
    /// `theta in [0, 2 pi / sqrt(L)]^L`, diameter `2 pi`.
    Restricted,
}

/// One evaluated complexity bound with its intermediate quantities, so the
/// constant bookkeeping stays visible.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundReport {
    pub l: usize,
    pub m: usize,
    pub domain: ParamDomain,
    /// Lipschitz constant `K = 2 sqrt(L)`.
    pub k: f64,
    /// Domain diameter `R`.
    pub r: f64,
    /// Unclamped `18 sqrt(pi) K R sqrt(L) / sqrt(M)`.
    pub raw: f64,
    /// `min(1, raw)`.
    pub clamped: f64,
}

/// Lipschitz bound `K = 2 sqrt(L)` on the gradient norm of f.
pub fn lipschitz_bound(l: usize) -> f64 {
    2.0 * (l as f64).sqrt()
}

/// Rademacher-complexity bound for L parameters and M samples.
pub fn rademacher_bound(l: usize, m: usize, domain: ParamDomain) -> Result<BoundReport> {
    if l < 1 || m < 1 {
        return Err(Error::InvalidArgument(format!(
            "bound needs L >= 1 and M >= 1, got L = {l}, M = {m}"
        )));
    }
    let lf = l as f64;
    let k = lipschitz_bound(l);
    let r = match domain {
        ParamDomain::Full => 2.0 * PI * lf.sqrt(),
        ParamDomain::Restricted => 2.0 * PI,
    };
    let raw = 18.0 * PI.sqrt() * k * r * lf.sqrt() / (m as f64).sqrt();
    Ok(BoundReport {
        l,
        m,
        domain,
        k,
        r,
        raw,
        clamped: raw.min(1.0),
    })
}

/// Scaling regime of the linear-model bound with respect to the parameter
/// count p. Informational metadata: a norm is treated as tracking p when
/// it numerically equals p.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LinearRegime {
    #[serde(rename = "1/sqrt(M)")]
    OrderOne,
    #[serde(rename = "p/sqrt(M)")]
    OrderP,
    #[serde(rename = "p^2/sqrt(M)")]
    OrderPSquared,
}

impl std::fmt::Display for LinearRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LinearRegime::OrderOne => write!(f, "1/sqrt(M)"),
            LinearRegime::OrderP => write!(f, "p/sqrt(M)"),
            LinearRegime::OrderPSquared => write!(f, "p^2/sqrt(M)"),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearModelBound {
    /// `D B / sqrt(M)` for inputs with `||x|| <= D` and weights `||w|| <= B`.
    pub value: f64,
    pub regime: LinearRegime,
}

/// Complexity bound `D B / sqrt(M)` of the bounded linear class, with the
/// regime label for how it scales in the parameter count p.
pub fn linear_model_bound(d: f64, b: f64, m: usize, p: usize) -> Result<LinearModelBound> {
    if !(d > 0.0) || !(b > 0.0) || m < 1 {
        return Err(Error::InvalidArgument(format!(
            "linear bound needs D > 0, B > 0, M >= 1, got D = {d}, B = {b}, M = {m}"
        )));
    }
    let value = d * b / (m as f64).sqrt();
    let pf = p as f64;
    let tracks_p = |v: f64| (v - pf).abs() <= 1e-12 * pf.max(1.0);
    let regime = if p <= 1 {
        LinearRegime::OrderOne
    } else {
        match (tracks_p(d), tracks_p(b)) {
            (true, true) => LinearRegime::OrderPSquared,
            (false, false) => LinearRegime::OrderOne,
            _ => LinearRegime::OrderP,
        }
    };
    Ok(LinearModelBound { value, regime })
}

/// High-probability generalization gap bound
/// `2 R_M + sqrt(ln(1/delta) / (2 M))`, holding with probability 1 - delta.
pub fn gap_bound(rademacher: f64, m: usize, delta: f64) -> Result<f64> {
    if !(rademacher >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rademacher term must be >= 0, got {rademacher}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    if m < 1 {
        return Err(Error::InvalidArgument(format!("M must be >= 1, got {m}")));
    }
    Ok(2.0 * rademacher + ((1.0 / delta).ln() / (2.0 * m as f64)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lipschitz_values() {
        assert_eq!(lipschitz_bound(0), 0.0);
        assert_eq!(lipschitz_bound(1), 2.0);
        assert_eq!(lipschitz_bound(4), 4.0);
        assert_abs_diff_eq!(lipschitz_bound(5), 4.47213595499958, epsilon = 1e-12);
    }

    #[test]
    fn full_bound_clamps_at_one() {
        let b = rademacher_bound(5, 100, ParamDomain::Full).unwrap();
        assert_abs_diff_eq!(
            b.raw,
            72.0 * PI.powf(1.5) * 5f64.powf(1.5) / 10.0,
            epsilon = 1e-9
        );
        assert!(b.raw > 400.0);
        assert_eq!(b.clamped, 1.0);
    }

    #[test]
    fn full_bound_small_regime_value() {
        let b = rademacher_bound(1, 100_000_000, ParamDomain::Full).unwrap();
        assert_abs_diff_eq!(b.raw, 72.0 * PI.powf(1.5) / 1e4, epsilon = 1e-12);
        assert_abs_diff_eq!(b.raw, 0.04009196, epsilon = 1e-8);
        assert_eq!(b.clamped, b.raw);
    }

    #[test]
    fn restricted_never_exceeds_full() {
        for l in [1, 2, 5, 9, 16, 40] {
            for m in [1, 10, 1000, 1_000_000] {
                let full = rademacher_bound(l, m, ParamDomain::Full).unwrap();
                let restr = rademacher_bound(l, m, ParamDomain::Restricted).unwrap();
                assert!(restr.raw <= full.raw);
                assert!(restr.clamped <= full.clamped);
            }
        }
    }

    #[test]
    fn raw_ratios_recover_the_exponents() {
        let m = 1_000_000;
        let full1 = rademacher_bound(1, m, ParamDomain::Full).unwrap().raw;
        let restr1 = rademacher_bound(1, m, ParamDomain::Restricted).unwrap().raw;
        for l in [2usize, 3, 5, 8, 13, 21] {
            let lf = l as f64;
            let full = rademacher_bound(l, m, ParamDomain::Full).unwrap().raw;
            let restr = rademacher_bound(l, m, ParamDomain::Restricted).unwrap().raw;
            assert_abs_diff_eq!(full / full1, lf.powf(1.5), epsilon = 1e-9);
            assert_abs_diff_eq!(restr / restr1, lf, epsilon = 1e-9);
        }
    }

    #[test]
    fn bound_monotone_in_l_and_m() {
        let mut prev = 0.0;
        for l in 1..20 {
            let b = rademacher_bound(l, 1 << 40, ParamDomain::Full).unwrap();
            assert!(b.clamped >= prev);
            prev = b.clamped;
        }
        let mut prev = f64::INFINITY;
        for m in [10, 100, 1000, 10_000] {
            let b = rademacher_bound(3, m, ParamDomain::Full).unwrap();
            assert!(b.clamped <= prev);
            prev = b.clamped;
        }
    }

    #[test]
    fn linear_model_values_and_regimes() {
        let b = linear_model_bound(1.0, 1.0, 100, 1).unwrap();
        assert_abs_diff_eq!(b.value, 0.1, epsilon = 1e-15);
        assert_eq!(b.regime, LinearRegime::OrderOne);

        let b = linear_model_bound(4.0, 4.0, 100, 4).unwrap();
        assert_abs_diff_eq!(b.value, 1.6, epsilon = 1e-15);
        assert_eq!(b.regime, LinearRegime::OrderPSquared);

        let b = linear_model_bound(1.0, 3.0, 9, 3).unwrap();
        assert_abs_diff_eq!(b.value, 1.0, epsilon = 1e-15);
        assert_eq!(b.regime, LinearRegime::OrderP);
    }

    #[test]
    fn gap_bound_reference_values() {
        let v = gap_bound(0.0, 2, 1.0 / std::f64::consts::E).unwrap();
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);

        let v = gap_bound(0.1, 100, 0.05).unwrap();
        assert_abs_diff_eq!(v, 0.2 + (20f64.ln() / 200.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.32238734, epsilon = 1e-8);
    }

    #[test]
    fn gap_bound_monotone_in_rademacher() {
        let mut prev = 0.0;
        for k in 0..20 {
            let v = gap_bound(k as f64 * 0.05, 50, 0.1).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn gap_bound_rejects_bad_delta() {
        assert!(gap_bound(0.1, 10, 0.0).is_err());
        assert!(gap_bound(0.1, 10, 1.0).is_err());
        assert!(gap_bound(0.1, 10, -0.3).is_err());
        assert!(gap_bound(-0.1, 10, 0.5).is_err());
    }
}
