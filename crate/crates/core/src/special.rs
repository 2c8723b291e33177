//! Special functions: standard normal law, log-gamma, incomplete gamma,
//! chi-square quantiles and Gauss–Legendre rules.

use crate::scalar::Scalar;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
#[inline]
pub fn norm_pdf<T: Scalar>(x: T) -> T {
    T::c(FRAC_1_SQRT_2PI) * (-(x * x) * T::c(0.5)).exp()
}

#[inline]
pub fn norm_ln_pdf<T: Scalar>(x: T) -> T {
    -T::c(LN_SQRT_2PI) - x * x * T::c(0.5)
}

/// Standard normal CDF Φ(x) = erfc(−x/√2)/2, evaluated in double precision.
pub fn norm_cdf<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    T::c(0.5 * libm::erfc(-x.to_f64_lossy() * std::f64::consts::FRAC_1_SQRT_2))
}

/// Standard normal survival function 1 − Φ(x), accurate in the upper tail.
pub fn norm_sf<T: Scalar>(x: T) -> T {
    norm_cdf(-x)
}

/// Φ(a) − Φ(b) for a ≥ b, computed on whichever tail avoids cancellation.
pub fn norm_cdf_diff<T: Scalar>(a: T, b: T) -> T {
    if b > T::zero() {
        norm_sf(b) - norm_sf(a)
    } else {
        norm_cdf(a) - norm_cdf(b)
    }
}

#[inline]
fn poly<T: Scalar>(coef: &[f64], x: T) -> T {
    coef.iter().rev().fold(T::zero(), |acc, &c| acc * x + T::c(c))
}

// Wichura (1988), algorithm AS 241, PPND16.
const AS241_A: [f64; 8] = [
    3.387_132_872_796_366_608,
    1.331_416_678_917_843_774_5e2,
    1.971_590_950_306_551_442_7e3,
    1.373_169_376_550_946_112_5e4,
    4.592_195_393_154_987_145_7e4,
    6.726_577_092_700_870_085_3e4,
    3.343_057_558_358_812_810_5e4,
    2.509_080_928_730_122_672_7e3,
];
const AS241_B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091_125_2e1,
    6.871_870_074_920_579_083e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561e3,
];
const AS241_C: [f64; 8] = [
    1.423_437_110_749_683_577_34,
    4.630_337_846_156_545_295_9,
    5.769_497_221_460_691_405_5,
    3.647_848_324_763_204_605_04,
    1.270_458_252_452_368_382_58,
    2.417_807_251_774_506_117_7e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_4e-4,
];
const AS241_D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87,
    1.676_384_830_183_803_849_4,
    6.897_673_349_851_000_045_5e-1,
    1.481_039_764_274_800_745_9e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946e-4,
    1.050_750_071_644_416_843_24e-9,
];
const AS241_E: [f64; 8] = [
    6.657_904_643_501_103_777_2,
    5.463_784_911_164_114_369_9,
    1.784_826_539_917_291_335_8,
    2.965_605_718_285_048_912_3e-1,
    2.653_218_952_657_612_309_3e-2,
    1.242_660_947_388_078_438_6e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const AS241_F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_9e-1,
    1.369_298_809_227_358_053_1e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591e-4,
    1.846_318_317_510_054_681_8e-5,
    1.421_511_758_316_445_888_7e-7,
    2.044_263_103_389_939_785_64e-15,
];

/// Standard normal quantile Φ⁻¹(p) for p in (0, 1).
///
/// Rational approximation followed by one Halley refinement step. Returns
/// ∓∞ at p = 0 / 1 and NaN outside [0, 1].
pub fn norm_quantile<T: Scalar>(p: T) -> T {
    if p.is_nan() || p < T::zero() || p > T::one() {
        return T::nan();
    }
    if p == T::zero() {
        return T::neg_infinity();
    }
    if p == T::one() {
        return T::infinity();
    }
    let q = p - T::c(0.5);
    let mut x = if q.abs() <= T::c(0.425) {
        let r = T::c(0.180625) - q * q;
        q * poly(&AS241_A, r) / poly(&AS241_B, r)
    } else {
        let tail = if q < T::zero() { p } else { T::one() - p };
        let mut r = (-tail.ln()).sqrt();
        let v = if r <= T::c(5.0) {
            r -= T::c(1.6);
            poly(&AS241_C, r) / poly(&AS241_D, r)
        } else {
            r -= T::c(5.0);
            poly(&AS241_E, r) / poly(&AS241_F, r)
        };
        if q < T::zero() {
            -v
        } else {
            v
        }
    };
    // Halley step on whichever tail keeps the residual well conditioned.
    let resid = if p <= T::c(0.5) {
        norm_cdf(x) - p
    } else {
        (T::one() - p) - norm_sf(x)
    };
    let dens = norm_pdf(x);
    if dens > T::zero() && resid.is_finite() {
        let u = resid / dens;
        x = x - u / (T::one() + x * u * T::c(0.5));
    }
    x
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7), with reflection for x < 1/2.
pub fn ln_gamma<T: Scalar>(x: T) -> T {
    if x < T::c(0.5) {
        let pi = T::c(std::f64::consts::PI);
        return (pi / (pi * x).sin().abs()).ln() - ln_gamma(T::one() - x);
    }
    let x = x - T::one();
    let mut a = T::c(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += T::c(c) / (x + T::from_usize_lossy(i));
    }
    let t = x + T::c(LANCZOS_G + 0.5);
    T::c(LN_SQRT_2PI) + (x + T::c(0.5)) * t.ln() - t + a.ln()
}

/// ln(n!) with an exact table for small n.
pub fn ln_factorial<T: Scalar>(n: u64) -> T {
    if n < 2 {
        return T::zero();
    }
    if n <= 20 {
        let mut f: u64 = 1;
        for j in 2..=n {
            f *= j;
        }
        return T::c((f as f64).ln());
    }
    ln_gamma(T::c(n as f64 + 1.0))
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p<T: Scalar>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    if x < a + T::one() {
        gamma_series(a, x)
    } else {
        T::one() - gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn gamma_q<T: Scalar>(a: T, x: T) -> T {
    if x <= T::zero() {
        return T::one();
    }
    if x < a + T::one() {
        T::one() - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

fn gamma_prefactor<T: Scalar>(a: T, x: T) -> T {
    (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_series<T: Scalar>(a: T, x: T) -> T {
    let mut ap = a;
    let mut term = a.recip();
    let mut sum = term;
    for _ in 0..10_000 {
        ap += T::one();
        term = term * x / ap;
        sum += term;
        if term.abs() < sum.abs() * T::epsilon() {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

fn gamma_cf<T: Scalar>(a: T, x: T) -> T {
    let tiny = T::min_positive_value() * T::c(1e10);
    let mut b = x + T::one() - a;
    let mut c = tiny.recip();
    let mut d = b.recip();
    let mut h = d;
    for i in 1..10_000 {
        let fi = T::from_usize_lossy(i);
        let an = -fi * (fi - a);
        b += T::c(2.0);
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let del = d * c;
        h *= del;
        if (del - T::one()).abs() < T::epsilon() {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Chi-square CDF with `df` degrees of freedom.
pub fn chi2_cdf<T: Scalar>(x: T, df: T) -> T {
    gamma_p(df * T::c(0.5), x * T::c(0.5))
}

/// Chi-square quantile: inverts the regularized incomplete gamma with a
/// bracketed Newton iteration.
pub fn chi2_quantile<T: Scalar>(p: T, df: T) -> T {
    if p <= T::zero() {
        return T::zero();
    }
    if p >= T::one() {
        return T::infinity();
    }
    let a = df * T::c(0.5);
    // Bracket in the gamma variable g = x/2.
    let mut lo = T::zero();
    let mut hi = a.max(T::one());
    while gamma_p(a, hi) < p {
        lo = hi;
        hi *= T::c(2.0);
        if hi > T::c(1e300) {
            return T::infinity();
        }
    }
    let mut g = (lo + hi) * T::c(0.5);
    for _ in 0..200 {
        let f = gamma_p(a, g) - p;
        if f > T::zero() {
            hi = g;
        } else {
            lo = g;
        }
        let dens = gamma_prefactor(a, g) / g;
        let mut next = g - f / dens;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = (lo + hi) * T::c(0.5);
        }
        if (next - g).abs() <= T::epsilon() * T::c(4.0) * g.max(T::one()) {
            g = next;
            break;
        }
        g = next;
    }
    g * T::c(2.0)
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z_new = z - p1 / dp;
            let done = (z_new - z).abs() < 1e-15;
            z = z_new;
            if done {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (
        nodes.into_iter().map(T::c).collect(),
        weights.into_iter().map(T::c).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from high-precision evaluation.
    #[test]
    fn cdf_reference_points() {
        let cases = [
            (0.0f64, 0.5f64),
            (1.0, 0.841_344_746_068_542_9),
            (-1.96, 0.024_997_895_148_220_435),
            (2.5, 0.993_790_334_674_223_8),
            (-5.0, 2.866_515_718_791_939e-7),
            (-10.0, 7.619_853_024_160_527e-24),
        ];
        for (x, want) in cases {
            let got = norm_cdf(x);
            assert!(((got - want) / want).abs() < 1e-13, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn cdf_continuous_across_branch() {
        let below = norm_cdf(2.999_999_999_999f64);
        let above = norm_cdf(3.000_000_000_001f64);
        assert!((above - below).abs() < 1e-14);
        let below = norm_cdf(-2.999_999_999_999f64);
        let above = norm_cdf(-3.000_000_000_001f64);
        assert!((above - below).abs() < 1e-14);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-300f64, 1e-12, 1e-5, 0.02, 0.3, 0.5, 0.77, 0.975, 1.0 - 1e-9] {
            let x = norm_quantile(p);
            let back = if p < 0.5 { norm_cdf(x) } else { 1.0 - norm_sf(x) };
            assert!(((back - p) / p).abs() < 1e-12, "p={p}");
        }
        assert!((norm_quantile(0.975f64) - 1.959_963_984_540_054).abs() < 1e-13);
        assert_eq!(norm_quantile(0.5f64), 0.0);
        assert!(norm_quantile(0.0f64).is_infinite());
        assert!(norm_quantile(1.5f64).is_nan());
    }

    #[test]
    fn quantile_symmetry() {
        for &p in &[1e-8f64, 0.01, 0.2, 0.45] {
            let a = norm_quantile(p);
            let b = norm_quantile(1.0 - p);
            assert!((a + b).abs() < 1e-9);
        }
    }

    #[test]
    fn f32_path_is_usable() {
        let x = norm_quantile(0.9f32);
        assert!((norm_cdf(x) - 0.9).abs() < 1e-6);
    }

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut f = 1.0f64;
        for n in 1..30u64 {
            f *= n as f64;
            let lg: f64 = ln_gamma(n as f64 + 1.0);
            assert!((lg - f.ln()).abs() < 1e-12 * f.ln().max(1.0), "n={n}");
        }
        let half: f64 = ln_gamma(0.5);
        assert!((half - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn incomplete_gamma_exponential_case() {
        // P(1, x) = 1 − e^{−x}.
        for &x in &[0.1f64, 1.0, 2.5, 10.0] {
            assert!((gamma_p(1.0, x) - (1.0 - (-x).exp())).abs() < 1e-14);
            assert!((gamma_p(1.0, x) + gamma_q(1.0, x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn chi2_one_df_matches_normal() {
        for &x in &[0.01f64, 0.5, 2.0, 9.0] {
            let direct = 2.0 * norm_cdf(x.sqrt()) - 1.0;
            assert!((chi2_cdf(x, 1.0) - direct).abs() < 1e-13);
        }
        let q = chi2_quantile(0.95f64, 1.0);
        assert!((q - 3.841_458_820_694_124).abs() < 1e-9);
        let q2 = chi2_quantile(0.5f64, 2.0);
        assert!((q2 - 2.0 * 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre::<f64>(8);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        // Exact up to degree 15.
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((int - 2.0 / 15.0).abs() < 1e-14);
    }
}
