//! Small numeric helpers: log-factorials and Gauss-Legendre quadrature.

use once_cell::sync::Lazy;

const LN_FACT_TABLE_LEN: usize = 1024;

static LN_FACT: Lazy<Vec<f64>> = Lazy::new(|| {
    let mut t = Vec::with_capacity(LN_FACT_TABLE_LEN);
    t.push(0.0);
    for k in 1..LN_FACT_TABLE_LEN {
        t.push(t[k - 1] + (k as f64).ln());
    }
    t
});

/// ln(k!), table-backed for small k, Stirling series beyond.
pub fn ln_factorial(k: u64) -> f64 {
    if (k as usize) < LN_FACT_TABLE_LEN {
        return LN_FACT[k as usize];
    }
    let n = k as f64;
    // Stirling with correction terms; error < 1e-14 for k >= 1024.
    n * n.ln() - n + 0.5 * (2.0 * std::f64::consts::PI * n).ln() + 1.0 / (12.0 * n)
        - 1.0 / (360.0 * n.powi(3))
        + 1.0 / (1260.0 * n.powi(5))
}

/// Poisson pmf exp(k ln a - a - ln k!), evaluated in log-space.
pub fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_factorial(k)).exp()
}

/// 64-point Gauss-Legendre rule on [0, 1] as (node, weight) pairs.
pub fn gauss_legendre_64() -> &'static [(f64, f64); 64] {
    static RULE: Lazy<[(f64, f64); 64]> = Lazy::new(|| {
        let mut rule = [(0.0, 0.0); 64];
        let n = 64usize;
        for (i, slot) in rule.iter_mut().enumerate() {
            // Newton iteration from the Chebyshev-based initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_p(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map [-1, 1] -> [0, 1]
            *slot = (0.5 * (1.0 - x), 0.5 * w);
        }
        rule
    });
    &RULE
}

/// Legendre polynomial P_n(x) and its derivative.
fn legendre_p(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
