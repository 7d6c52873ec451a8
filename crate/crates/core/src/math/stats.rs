//! Small statistics helpers shared by the test oracles and the validation
//! command: a chi-square goodness-of-fit test with low-count pooling and the
//! regularized incomplete gamma function it needs.

/// Regularized upper incomplete gamma `Q(a, x) = Γ(a, x) / Γ(a)`.
///
/// Series expansion for `x < a + 1`, Lentz continued fraction otherwise.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        // P(a,x) by series, Q = 1 - P.
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = a;
        for _ in 0..500 {
            n += 1.0;
            term *= x / n;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        let ln_prefix = a * x.ln() - x - ln_gamma(a);
        1.0 - (sum * ln_prefix.exp()).clamp(0.0, 1.0)
    } else {
        // Q(a,x) by modified Lentz continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-15 {
                break;
            }
        }
        let ln_prefix = a * x.ln() - x - ln_gamma(a);
        (h * ln_prefix.exp()).clamp(0.0, 1.0)
    }
}

/// Lanczos approximation of `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_7e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000_000_000_190_015;
    for c in COEF {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

/// Outcome of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Number of cells after pooling low-expectation cells.
    pub cells: usize,
}

/// Pearson chi-square test of observed counts against expected counts.
///
/// Cells with expected count below 5 are pooled into a single cell before
/// computing the statistic, the usual validity fix for sparse tails. The
/// expected counts are rescaled so their sum matches the observed total.
pub fn chi_square_test(observed: &[u64], expected: &[f64]) -> ChiSquareResult {
    assert_eq!(observed.len(), expected.len());
    let total_obs: u64 = observed.iter().sum();
    let total_exp: f64 = expected.iter().sum();
    assert!(total_obs > 0 && total_exp > 0.0);
    let scale = total_obs as f64 / total_exp;

    const MIN_EXPECTED: f64 = 5.0;
    let mut statistic = 0.0;
    let mut cells = 0usize;
    let mut pooled_obs = 0.0;
    let mut pooled_exp = 0.0;
    for (&o, &e) in observed.iter().zip(expected) {
        let e = e * scale;
        if e < MIN_EXPECTED {
            pooled_obs += o as f64;
            pooled_exp += e;
        } else {
            let d = o as f64 - e;
            statistic += d * d / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        // Pool the sparse tail into one synthetic cell.
        let d = pooled_obs - pooled_exp;
        statistic += d * d / pooled_exp.max(MIN_EXPECTED);
        cells += 1;
    }
    let dof = cells.saturating_sub(1).max(1);
    let p_value = regularized_gamma_q(dof as f64 / 2.0, statistic / 2.0);
    ChiSquareResult {
        statistic,
        dof,
        p_value,
        cells,
    }
}

/// Sample mean and unbiased variance.
pub fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var)
}
