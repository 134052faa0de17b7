//! Standard normal distribution functions.
//!
//! The CDF goes through `libm::erfc`, a rational/continued-fraction
//! approximation accurate to a few ulps over the whole real line. The
//! quantile uses Wichura's AS 241 (PPND16) rational approximations.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Below this point `erfc` is close to underflow and the asymptotic series
/// is used for `log Φ`.
const LOG_CDF_TAIL: f64 = -37.0;

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn std_normal_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ(x). Saturates to 0 or 1 in the far tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// log Φ(x), finite for every finite `x`.
pub fn std_normal_log_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-std_normal_cdf(-x)).ln_1p()
    } else if x >= LOG_CDF_TAIL {
        std_normal_cdf(x).ln()
    } else {
        // Φ(x) = φ(x)/|x| · (1 - 1/x² + 3/x⁴ - 15/x⁶ + 105/x⁸ - ...)
        let inv2 = 1.0 / (x * x);
        let series = 1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 * (1.0 - 7.0 * inv2)));
        std_normal_log_pdf(x) - (-x).ln() + series.ln()
    }
}

/// Inverse Mills ratio φ(x)/Φ(x), stable in the lower tail.
pub fn inverse_mills(x: f64) -> f64 {
    if x >= LOG_CDF_TAIL {
        std_normal_pdf(x) / std_normal_cdf(x)
    } else {
        (std_normal_log_pdf(x) - std_normal_log_cdf(x)).exp()
    }
}

/// `(log Φ(t), φ(t)/Φ(t))` from a single `erfc` evaluation; the per-observation
/// kernel of the probit likelihood.
pub fn log_cdf_and_mills(t: f64) -> (f64, f64) {
    if t > 0.0 {
        let upper = std_normal_cdf(-t);
        (
            (-upper).ln_1p(),
            std_normal_pdf(t) / (1.0 - upper),
        )
    } else if t >= LOG_CDF_TAIL {
        let cdf = std_normal_cdf(t);
        (cdf.ln(), std_normal_pdf(t) / cdf)
    } else {
        let log_cdf = std_normal_log_cdf(t);
        (log_cdf, (std_normal_log_pdf(t) - log_cdf).exp())
    }
}

/// Evaluates `c[0] + c[1]·r + … + c[k]·r^k`.
fn horner(c: &[f64], r: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * r + ci)
}

const CENTRAL_NUM: [f64; 8] = [
    3.387_132_872_796_366_5,
    133.141_667_891_784_38,
    1971.590_950_306_551_4,
    13731.693_765_509_461,
    45921.953_931_549_87,
    67265.770_927_008_7,
    33430.575_583_588_13,
    2509.080_928_730_122_7,
];
const CENTRAL_DEN: [f64; 8] = [
    1.0,
    42.313_330_701_600_91,
    687.187_007_492_057_9,
    5394.196_021_424_751,
    21213.794_301_586_596,
    39307.895_800_092_71,
    28729.085_735_721_943,
    5226.495_278_852_546,
];
const NEAR_NUM: [f64; 8] = [
    1.423_437_110_749_683_5,
    4.630_337_846_156_545,
    5.769_497_221_460_691,
    3.647_848_324_763_204_5,
    1.270_458_252_452_368_4,
    0.241_780_725_177_450_6,
    0.022_723_844_989_269_184,
    7.745_450_142_783_414e-4,
];
const NEAR_DEN: [f64; 8] = [
    1.0,
    2.053_191_626_637_759,
    1.676_384_830_183_803_8,
    0.689_767_334_985_1,
    0.148_103_976_427_480_08,
    0.015_198_666_563_616_457,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_8e-9,
];
const FAR_NUM: [f64; 8] = [
    6.657_904_643_501_103,
    5.463_784_911_164_114,
    1.784_826_539_917_291_3,
    0.296_560_571_828_504_9,
    0.026_532_189_526_576_124,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const FAR_DEN: [f64; 8] = [
    1.0,
    0.599_832_206_555_888,
    0.136_929_880_922_735_8,
    0.014_875_361_290_850_615,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_8e-15,
];

/// Φ⁻¹(p) for `p` in the open unit interval.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs 0 < p < 1, got {p}")));
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return Ok(q * horner(&CENTRAL_NUM, r) / horner(&CENTRAL_DEN, r));
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        let r = r - 1.6;
        horner(&NEAR_NUM, r) / horner(&NEAR_DEN, r)
    } else {
        let r = r - 5.0;
        horner(&FAR_NUM, r) / horner(&FAR_DEN, r)
    };
    Ok(if q < 0.0 { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Φ via the Taylor series of erf, summed with enough terms that the
    /// truncation error is below 1e-16 on |x| ≤ 6.
    fn cdf_series(x: f64) -> f64 {
        let t = x * FRAC_1_SQRT_2;
        let mut term = t;
        let mut sum = t;
        let mut k = 0.0;
        while term.abs() > 1e-20 * sum.abs().max(1e-300) {
            k += 1.0;
            term *= -t * t / k;
            sum += term / (2.0 * k + 1.0);
            if k > 400.0 {
                break;
            }
        }
        0.5 + sum / PI.sqrt()
    }

    #[test]
    fn cdf_reference_points() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
        assert!((std_normal_cdf(-1.0) - 0.158655).abs() < 1e-6);
    }

    #[test]
    fn cdf_matches_series_oracle() {
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let oracle = cdf_series(x);
            assert!(
                (std_normal_cdf(x) - oracle).abs() < 1e-12,
                "x={x} got {} want {oracle}",
                std_normal_cdf(x)
            );
        }
    }

    #[test]
    fn cdf_symmetry_and_monotone() {
        let mut prev = 0.0;
        for i in -800..=800 {
            let x = i as f64 * 0.01;
            let c = std_normal_cdf(x);
            assert!((c + std_normal_cdf(-x) - 1.0).abs() <= 1e-14);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn pdf_values() {
        assert!((std_normal_pdf(0.0) - 0.3989423).abs() < 1e-7);
        assert!((std_normal_pdf(1.0) - 0.2419707).abs() < 1e-7);
        assert_eq!(std_normal_pdf(1.3), std_normal_pdf(-1.3));
        assert!((std_normal_pdf(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn quantile_values() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        assert!((std_normal_quantile(0.975).unwrap() - 1.959964).abs() < 1e-6);
        assert!((std_normal_quantile(0.158655).unwrap() + 1.0).abs() < 1e-5);
        assert!(matches!(std_normal_quantile(0.0), Err(Error::Domain(_))));
        assert!(matches!(std_normal_quantile(1.0), Err(Error::Domain(_))));
        assert!(std_normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_round_trip() {
        for i in 1..=999 {
            let p = i as f64 / 1000.0;
            let x = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() <= 1e-10, "p={p}");
        }
        for &p in &[1e-300, 1e-100, 1e-20, 1e-10, 1e-5] {
            let x = std_normal_quantile(p).unwrap();
            let rel = (std_normal_cdf(x) - p).abs() / p;
            assert!(rel < 1e-12, "p={p} rel={rel}");
        }
    }

    #[test]
    fn log_cdf_tail_is_stable() {
        assert!((std_normal_log_cdf(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!((std_normal_log_cdf(1.959964) - 0.975f64.ln()).abs() < 1e-7);
        // both sides of the switch to the asymptotic series, against 40-digit
        // reference values
        for &(x, want) in &[
            (-36.9, -685.332_883_165_350_6),
            (-37.0, -689.030_585_576_890_6),
            (-37.000_000_001, -689.030_585_613_917_5),
            (-38.0, -726.557_216_018_820_1),
        ] {
            let got = std_normal_log_cdf(x);
            assert!((got - want).abs() / want.abs() < 1e-13, "x={x} got {got}");
        }
        for &x in &[-40.0, -100.0, -1e3, -1e6] {
            let v = std_normal_log_cdf(x);
            assert!(v.is_finite());
            assert!(v < std_normal_log_cdf(x + 1.0));
        }
        assert!(std_normal_log_cdf(40.0) <= 0.0);
    }

    #[test]
    fn fused_kernel_agrees() {
        for i in -500..=100 {
            let t = i as f64 * 0.1;
            let (l, m) = log_cdf_and_mills(t);
            assert!((l - std_normal_log_cdf(t)).abs() <= 1e-14 * l.abs().max(1.0));
            assert!((m - inverse_mills(t)).abs() <= 1e-13 * m.max(1e-300));
        }
    }

    #[test]
    fn mills_ratio_tail() {
        // λ(x) ~ -x for very negative x
        let x = -60.0;
        assert!((inverse_mills(x) / -x - 1.0).abs() < 1e-3);
        assert!((inverse_mills(0.0) - 2.0 * std_normal_pdf(0.0)).abs() < 1e-15);
        assert!(inverse_mills(10.0) < 1e-20);
    }
}
