//! How many chain steps the unrelaxed scheme needs, set against the
//! `n·2^n` operations of Ryser's formula.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params;

/// Seconds in a Julian year of 365.25 days.
pub const JULIAN_YEAR_SECONDS: u64 = 31_557_600;

/// Largest `n` examined by [`crossover`].
pub const CROSSOVER_SCAN_LIMIT: usize = 10_000;

/// Exact chain steps for all weight phases plus the final refinement, with
/// every component rounded up before multiplying.
pub fn total_steps(n: usize, epsilon: f64) -> Result<BigUint> {
    Ok(params::compute_params(n, epsilon)?.total_steps())
}

/// `n · 2^n`.
pub fn ryser_ops(n: usize) -> BigUint {
    BigUint::from(n) << n
}

/// Smallest `n >= 4` at which the chain needs fewer steps than Ryser needs
/// operations.
pub fn crossover(epsilon: f64) -> Result<usize> {
    for n in 4..=CROSSOVER_SCAN_LIMIT {
        if total_steps(n, epsilon)? < ryser_ops(n) {
            return Ok(n);
        }
    }
    Err(Error::NoCrossover {
        limit: CROSSOVER_SCAN_LIMIT,
    })
}

/// Years needed to take `steps` steps at `steps_per_second`.
pub fn projected_years(steps: &BigUint, steps_per_second: f64) -> Result<f64> {
    if !(steps_per_second > 0.0 && steps_per_second.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "rate must be positive, got {steps_per_second}"
        )));
    }
    let ln_years = ln_big(steps) - steps_per_second.ln() - (JULIAN_YEAR_SECONDS as f64).ln();
    Ok(ln_years.exp())
}

/// Natural log of a big integer without overflowing `f64` on the way.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit prefix");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// One row of the feasibility comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub schema_version: u32,
    pub n: usize,
    pub epsilon: f64,
    #[serde(with = "crate::serde_big")]
    pub total_steps: BigUint,
    #[serde(with = "crate::serde_big")]
    pub ryser_ops: BigUint,
    /// `total_steps / ryser_ops`.
    pub ratio: f64,
    pub steps_per_second: f64,
    pub projected_years: f64,
}

pub fn report(n: usize, epsilon: f64, steps_per_second: f64) -> Result<FeasibilityReport> {
    let steps = total_steps(n, epsilon)?;
    let ops = ryser_ops(n);
    Ok(FeasibilityReport {
        schema_version: crate::SCHEMA_VERSION,
        n,
        epsilon,
        ratio: (ln_big(&steps) - ln_big(&ops)).exp(),
        projected_years: projected_years(&steps, steps_per_second)?,
        steps_per_second,
        total_steps: steps,
        ryser_ops: ops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(s: &str) -> BigUint {
        s.replace(',', "").parse().unwrap()
    }

    #[test]
    fn reference_step_totals() {
        assert_eq!(total_steps(4, 0.5).unwrap(), big("3,932,754,162,118"));
        assert_eq!(
            total_steps(68, 0.5).unwrap(),
            big("13,285,251,197,747,730,326,655")
        );
    }

    #[test]
    fn hundred_step_total() {
        // Consistent with ≈2.64e23 and with 8,366,379 years at 1e9 steps/s.
        let steps = total_steps(100, 0.5).unwrap();
        assert_eq!(steps, big("264,022,847,298,779,435,144,166"));
    }

    #[test]
    fn ryser_examples() {
        assert_eq!(ryser_ops(1), BigUint::from(2u32));
        assert_eq!(ryser_ops(4), BigUint::from(64u32));
        assert_eq!(ryser_ops(10), BigUint::from(10_240u32));
    }

    #[test]
    fn crossover_at_half() {
        assert_eq!(crossover(0.5).unwrap(), 68);
        assert!(total_steps(67, 0.5).unwrap() >= ryser_ops(67));
        assert!(total_steps(68, 0.5).unwrap() < ryser_ops(68));
    }

    #[test]
    fn crossover_shrinks_with_looser_epsilon() {
        let grid: Vec<usize> = [0.25, 0.5, 1.0]
            .iter()
            .map(|&e| crossover(e).unwrap())
            .collect();
        assert!(grid.windows(2).all(|w| w[0] >= w[1]), "{grid:?}");
    }

    #[test]
    fn steps_grow_with_n() {
        let mut prev = total_steps(4, 0.5).unwrap();
        for n in 5..=200 {
            let next = total_steps(n, 0.5).unwrap();
            assert!(next > prev, "n = {n}");
            prev = next;
        }
    }

    #[test]
    fn projected_years_examples() {
        let one_year = BigUint::from(JULIAN_YEAR_SECONDS) * 1_000_000_000u64;
        assert!((projected_years(&one_year, 1e9).unwrap() - 1.0).abs() < 1e-12);
        let y68 = projected_years(&total_steps(68, 0.5).unwrap(), 1e9).unwrap();
        assert!(y68 > 420_984.0 && y68 < 420_985.0, "{y68}");
        let y100 = projected_years(&total_steps(100, 0.5).unwrap(), 1e9).unwrap();
        assert!(y100 > 8_366_379.0 && y100 < 8_366_380.0, "{y100}");
        assert!(projected_years(&one_year, 0.0).is_err());
    }

    #[test]
    fn ln_big_handles_huge_values() {
        let x = BigUint::from(3u32) << 5000;
        let want = 3f64.ln() + 5000.0 * std::f64::consts::LN_2;
        assert!((ln_big(&x) - want).abs() < 1e-9);
        assert_eq!(ln_big(&BigUint::from(1u32)), 0.0);
    }

    #[test]
    fn report_fields() {
        let r = report(4, 0.5, 1e9).unwrap();
        assert_eq!(r.ryser_ops, BigUint::from(64u32));
        let want = 3_932_754_162_118f64 / 64.0;
        assert!((r.ratio - want).abs() < 1e-6 * want);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["total_steps"], "3932754162118");
    }
}
