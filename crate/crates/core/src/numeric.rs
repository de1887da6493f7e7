//! Shared numerical utilities: digamma, Gauss–Legendre quadrature, and
//! tabulated CDFs built from densities.

use crate::error::{Error, Result};

/// First-order bias of a discretely sampled running minimum of a standard
/// Brownian path: `E[min over grid] - E[min over path] = beta * sqrt(step)`
/// with `beta = -zeta(1/2) / sqrt(2 pi)`.
pub const DISCRETE_MIN_BIAS: f64 = 0.582_597_157_939_010_7;

/// Digamma function for `x > 0`, via upward recurrence into the asymptotic
/// regime. Absolute error below 1e-13 for all `x >= 1e-6`.
pub fn digamma(mut x: f64) -> f64 {
    assert!(x > 0.0, "digamma requires x > 0");
    let mut acc = 0.0;
    while x < 20.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Stirling series: ln x - 1/(2x) - sum B_{2n}/(2n x^{2n}).
    acc + x.ln() - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate `f` over `[a, b]` with Gauss–Legendre rules of doubling order
/// until two consecutive estimates differ by less than `tol` (absolute).
/// Returns the value and the final difference as an error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if !(b > a) {
        return Err(Error::Domain(format!("empty integration range [{a}, {b}]")));
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |n: usize| -> f64 {
        let (xs, ws) = gauss_legendre(n);
        let mut acc = 0.0;
        for (x, w) in xs.iter().zip(ws.iter()) {
            acc += w * f(mid + half * x);
        }
        acc * half
    };
    let mut prev = eval(32);
    for n in [64, 128, 256, 512, 1024, 2048] {
        let cur = eval(n);
        let diff = (cur - prev).abs();
        if diff <= tol {
            return Ok((cur, diff));
        }
        prev = cur;
    }
    Err(Error::Divergent(format!(
        "quadrature did not reach tolerance {tol:.1e} by order 2048"
    )))
}

/// Monotone piecewise-linear CDF table on `[a, b]`, built by integrating a
/// density with Simpson's rule per cell and normalizing the total mass.
pub struct CdfTable {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl CdfTable {
    pub fn from_density<F: Fn(f64) -> f64>(density: F, a: f64, b: f64, cells: usize) -> Self {
        assert!(cells >= 8 && b > a);
        let h = (b - a) / cells as f64;
        let mut xs = Vec::with_capacity(cells + 1);
        let mut fs = Vec::with_capacity(cells + 1);
        xs.push(a);
        fs.push(0.0);
        let mut acc = 0.0;
        let mut left = density(a);
        for i in 0..cells {
            let x0 = a + i as f64 * h;
            let x1 = x0 + h;
            let midv = density(0.5 * (x0 + x1));
            let right = density(x1);
            acc += h / 6.0 * (left + 4.0 * midv + right);
            xs.push(x1);
            fs.push(acc);
            left = right;
        }
        let total = acc;
        for v in fs.iter_mut() {
            *v /= total;
        }
        CdfTable { xs, fs }
    }

    /// Total mass before normalization is lost; the table stores the
    /// normalized CDF. Evaluate it at `x` (clamped to `[0, 1]` outside).
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let a = self.xs[0];
        let h = self.xs[1] - self.xs[0];
        let idx = (((x - a) / h) as usize).min(n - 2);
        let frac = ((x - self.xs[idx]) / h).clamp(0.0, 1.0);
        self.fs[idx] + frac * (self.fs[idx + 1] - self.fs[idx])
    }

    /// Quantile by bisection on the piecewise-linear table.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let mut lo = 0;
        let mut hi = self.fs.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.fs[mid] < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let span = self.fs[hi] - self.fs[lo];
        let frac = if span > 0.0 { (p - self.fs[lo]) / span } else { 0.5 };
        self.xs[lo] + frac * (self.xs[hi] - self.xs[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn digamma_reference_values() {
        // psi(1) = -Euler-Mascheroni, psi(1/2) = -gamma - 2 ln 2.
        let gamma = 0.577_215_664_901_532_9;
        assert_abs_diff_eq!(digamma(1.0), -gamma, epsilon = 1e-12);
        assert_abs_diff_eq!(digamma(0.5), -gamma - 2.0 * (2.0f64).ln(), epsilon = 1e-12);
        // Recurrence psi(x+1) = psi(x) + 1/x at an awkward point.
        assert_abs_diff_eq!(digamma(3.25), digamma(2.25) + 1.0 / 2.25, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_hits_known_integrals() {
        let (v, e) = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert!(e <= 1e-12);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
        let (v, _) = integrate(|x| (-x * x / 2.0).exp(), -8.0, 8.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn cdf_table_matches_uniform() {
        let t = CdfTable::from_density(|_| 1.0, 0.0, 2.0, 64);
        assert_abs_diff_eq!(t.eval(0.5), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(t.quantile(0.75), 1.5, epsilon = 1e-9);
    }
}
