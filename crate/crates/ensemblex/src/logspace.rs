//! Log-space combinatorics. Counts of graphs grow super-exponentially, so
//! everything downstream works with logarithms of factorials and binomials.

use statrs::function::gamma::ln_gamma;

/// ln(k!)
pub fn ln_factorial(k: u64) -> f64 {
    // small values exactly, rest via log-gamma
    const TABLE: [f64; 2] = [0.0, 0.0];
    if (k as usize) < TABLE.len() {
        return TABLE[k as usize];
    }
    ln_gamma(k as f64 + 1.0)
}

/// ln C(n, k); -inf when k > n.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    // For small k avoid the cancellation of three large log-gammas:
    // C(n,k) = n(n-1)...(n-k+1) / k!
    let k = k.min(n - k);
    if k <= 64 {
        let mut s = 0.0;
        for i in 0..k {
            s += ((n - i) as f64).ln();
        }
        s - ln_factorial(k)
    } else {
        ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
    }
}

/// ln(1 - p), accurate for small p.
pub fn ln_one_minus(p: f64) -> f64 {
    (-p).ln_1p()
}
