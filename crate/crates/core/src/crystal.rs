//! Exact combinatorics and character evaluations: anti-lecture-hall
//! compositions, the string-coordinate crystal realization and its Boltzmann
//! statistics, q-series identities in exact big-integer arithmetic, and the
//! Weyl-Kac / Verma characters with their semiclassical ratio check.

use crate::error::{Error, Result};
use crate::laws::{theta_phi_auto, theta_phi_log_auto};
use crate::report::ExperimentReport;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use serde_json::json;
use std::f64::consts::PI;

/// Composition with `l_1/1 >= l_2/2 >= ... >= l_n/n > 0`; the empty
/// composition (weight 0) is allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlhComposition {
    pub parts: Vec<u64>,
}

impl AlhComposition {
    pub fn weight(&self) -> u64 {
        self.parts.iter().sum()
    }

    pub fn is_valid(&self) -> bool {
        for (j, w) in self.parts.windows(2).enumerate() {
            // l_{j+2} / (j+2) <= l_{j+1} / (j+1), integer form.
            if (j as u64 + 1) * w[1] > (j as u64 + 2) * w[0] {
                return false;
            }
        }
        self.parts.iter().all(|&p| p > 0)
    }
}

/// Exhaustive, duplicate-free enumeration of all compositions of weight at
/// most `max_weight` (ratio-constrained DFS; desk scale, `max_weight <= 40`).
pub fn enumerate_alhc(max_weight: u64) -> Result<Vec<AlhComposition>> {
    if max_weight > 40 {
        return Err(Error::OutOfRange(format!(
            "enumeration capped at weight 40, asked for {max_weight}"
        )));
    }
    let mut out = Vec::new();
    let mut parts: Vec<u64> = Vec::new();
    fn extend(parts: &mut Vec<u64>, weight: u64, max_weight: u64, out: &mut Vec<AlhComposition>) {
        out.push(AlhComposition { parts: parts.clone() });
        let budget = max_weight - weight;
        if budget == 0 {
            return;
        }
        let j = parts.len() as u64;
        let ratio_bound = if j == 0 { u64::MAX } else { (j + 1) * parts[j as usize - 1] / j };
        for next in 1..=ratio_bound.min(budget) {
            parts.push(next);
            extend(parts, weight + next, max_weight, out);
            parts.pop();
        }
    }
    extend(&mut parts, 0, max_weight, &mut out);
    Ok(out)
}

/// Counts by weight `0 ..= max_weight`.
pub fn alhc_counts(max_weight: u64) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; max_weight as usize + 1];
    for c in enumerate_alhc(max_weight)? {
        counts[c.weight() as usize] += 1;
    }
    Ok(counts)
}

/// Power series in `q` with exact integer coefficients, truncated at a fixed
/// order. Division by `(1 - q^a)` is multiplication by the geometric series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntSeries {
    coeffs: Vec<BigInt>,
}

impl IntSeries {
    pub fn one(order: usize) -> IntSeries {
        let mut coeffs = vec![BigInt::zero(); order + 1];
        coeffs[0] = BigInt::one();
        IntSeries { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &BigInt {
        &self.coeffs[k]
    }

    /// Multiply by `(1 + sign * q^a)` in place.
    pub fn mul_binomial(&mut self, a: usize, sign: i64) {
        if a == 0 {
            panic!("exponent must be positive");
        }
        let s = BigInt::from(sign);
        for i in (a..self.coeffs.len()).rev() {
            let add = &self.coeffs[i - a] * &s;
            self.coeffs[i] += add;
        }
    }

    /// Divide by `(1 - q^a)` in place (geometric expansion).
    pub fn div_one_minus(&mut self, a: usize) {
        assert!(a > 0);
        for i in a..self.coeffs.len() {
            let add = self.coeffs[i - a].clone();
            self.coeffs[i] += add;
        }
    }
}

/// Generating function of anti-lecture-hall compositions,
/// `prod (1 + q^n) / prod_{n>=2} (1 - q^n)`, to order `n_max`.
pub fn alhc_gf(n_max: usize) -> IntSeries {
    let mut s = IntSeries::one(n_max);
    for n in 1..=n_max {
        s.mul_binomial(n, 1);
    }
    for n in 2..=n_max {
        s.div_one_minus(n);
    }
    s
}

/// Generating function of compositions with first part at most `k`:
/// `prod(1+q^n) (q; q^{k+2}) (q^{k+1}; q^{k+2}) (q^{k+2}; q^{k+2}) / (q; q)`,
/// to order `n_max`.
pub fn alhc_gf_bounded(k: usize, n_max: usize) -> IntSeries {
    let mut s = IntSeries::one(n_max);
    for n in 1..=n_max {
        s.mul_binomial(n, 1);
    }
    let period = k + 2;
    for start in [1, k + 1, k + 2] {
        let mut e = start;
        while e <= n_max {
            if e > 0 {
                s.mul_binomial(e, -1);
            }
            e += period;
        }
    }
    for n in 1..=n_max {
        s.div_one_minus(n);
    }
    s
}

/// String-coordinate crystal element: `x_0` free, `(x_1, x_2, ...)` an
/// anti-lecture-hall composition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrystalElement {
    pub xs: Vec<u64>,
}

impl CrystalElement {
    /// `s(x) = sum x_k`.
    pub fn total(&self) -> u64 {
        self.xs.iter().sum()
    }

    /// Weight `sigma(x) = sum x_k alpha_k` in Cartan coordinates.
    pub fn sigma(&self) -> Weight {
        let mut even = 0u64;
        let mut odd = 0u64;
        for (k, &x) in self.xs.iter().enumerate() {
            if k % 2 == 0 {
                even += x;
            } else {
                odd += x;
            }
        }
        Weight {
            l0: 0.0,
            a1h: 2.0 * (odd as f64 - even as f64),
            dl: even as f64,
        }
    }
}

/// Enumerate all crystal elements with `s(x) <= cap`.
pub fn enumerate_crystal(cap: u64) -> Result<Vec<CrystalElement>> {
    let comps = enumerate_alhc(cap)?;
    let mut out = Vec::new();
    for x0 in 0..=cap {
        for c in comps.iter().filter(|c| c.weight() <= cap - x0) {
            let mut xs = Vec::with_capacity(c.parts.len() + 1);
            xs.push(x0);
            xs.extend_from_slice(&c.parts);
            out.push(CrystalElement { xs });
        }
    }
    Ok(out)
}

/// Element of the Cartan algebra in the basis `(c, coalpha_1, d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coweight {
    pub c: f64,
    pub a1: f64,
    pub d: f64,
}

/// Weight in the dual basis `(Lambda_0, alpha_1 / 2, delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    pub l0: f64,
    pub a1h: f64,
    pub dl: f64,
}

impl Weight {
    pub fn eval(&self, h: &Coweight) -> f64 {
        self.l0 * h.c + self.a1h * h.a1 + self.dl * h.d
    }
}

/// `rho~ = 2d + coalpha_1 / 2`; evaluates to `sum x_k` on crystal weights.
pub fn rho_tilde() -> Coweight {
    Coweight { c: 0.0, a1: 0.5, d: 2.0 }
}

/// Positive roots: `alpha_i + n delta` and `(n+1) delta` in weight coordinates.
fn positive_root(i: usize, n: usize) -> Weight {
    match i {
        0 => Weight { l0: 0.0, a1h: -2.0, dl: 1.0 + n as f64 },
        1 => Weight { l0: 0.0, a1h: 2.0, dl: n as f64 },
        _ => Weight { l0: 0.0, a1h: 0.0, dl: 1.0 + n as f64 },
    }
}

/// Log of the Verma character `prod_{beta in R_+} (1 - e^{-beta(h)})^{-1}`,
/// truncated at imaginary level `n_max`; converges only when `delta(h) > 0`.
pub fn char_verma_log(h: &Coweight, n_max: usize) -> Result<f64> {
    let delta_h = h.d;
    if delta_h <= 0.0 {
        return Err(Error::Divergent(format!(
            "Verma character diverges unless delta(h) > 0; got {delta_h}"
        )));
    }
    let mut log_acc = 0.0;
    for n in 0..=n_max {
        for i in 0..3 {
            let b = positive_root(i, n).eval(h);
            if b <= 0.0 {
                return Err(Error::Domain(format!(
                    "root value {b} <= 0 at level {n}: product factor undefined"
                )));
            }
            log_acc -= (-(-b).exp()).ln_1p();
        }
    }
    Ok(log_acc)
}

/// Verma character value; see [`char_verma_log`].
pub fn char_verma(h: &Coweight, n_max: usize) -> Result<f64> {
    Ok(char_verma_log(h, n_max)?.exp())
}

/// Highest-weight character of the level-`n` representation with finite
/// weight `m` (`0 <= m <= n`), evaluated at `a coalpha_1 + b d`: the ratio of
/// two alternating sinh/Gaussian sums.
///
/// Each sum is a theta function in disguise:
/// `sum_k sinh(ap + 2akq) e^{-b(kp + k^2 q)} = sin(pi alpha) e^{ap}
/// phi_alpha(bq/2, bp/2)` with `alpha = 2a/b`, so the character is evaluated
/// through the stable theta oracle
/// `e^{am} phi_alpha(b(n+2)/2, b(m+1)/2) / phi_alpha(b, b/2)`.
/// For small `b` the raw sinh sums cancel to below f64 resolution while the
/// dual theta series stays well conditioned; the theta route also covers
/// `a = 0` (where both raw sums vanish) without a separate limit.
pub fn char_affine(n: u32, m: u32, a: f64, b: f64) -> Result<f64> {
    let log = char_affine_log(n, m, a, b)?;
    if log > 700.0 {
        return Err(Error::Domain(format!(
            "character overflows f64 (log value {log:.1}); use char_affine_log"
        )));
    }
    Ok(log.exp())
}

/// Logarithm of [`char_affine`]; the character itself grows like
/// `e^{pi^2/(2b)}` as `b` shrinks, which overflows f64 long before the
/// semiclassical regime is reached.
pub fn char_affine_log(n: u32, m: u32, a: f64, b: f64) -> Result<f64> {
    if b <= 0.0 {
        return Err(Error::Domain(format!("character needs b > 0, got {b}")));
    }
    if m > n {
        return Err(Error::Domain(format!("need 0 <= m <= n, got m={m}, n={n}")));
    }
    let alpha = 2.0 * a / b;
    let num = theta_phi_log_auto(alpha, b * (n as f64 + 2.0) / 2.0, b * (m as f64 + 1.0) / 2.0)?;
    let den = theta_phi_log_auto(alpha, b, b / 2.0)?;
    Ok(a * m as f64 + num - den)
}

/// Direct evaluation of the same character through the raw sinh sums; only
/// usable when `b` is large enough that the alternating sums keep some
/// significant digits. Retained as an independent route for tests.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn char_affine_sinh(n: u32, m: u32, a: f64, b: f64) -> Result<f64> {
    if b <= 0.0 {
        return Err(Error::Domain(format!("character needs b > 0, got {b}")));
    }
    let num = char_sum(m as f64 + 1.0, n as f64 + 2.0, a, b)?;
    let den = char_sum(1.0, 2.0, a, b)?;
    Ok(num / den)
}

/// `sum_k sinh(a p + 2 a k q) e^{-b (k p + k^2 q)}` for `a != 0`, or its
/// derivative in `a` at `a = 0`.
fn char_sum(p: f64, q: f64, a: f64, b: f64) -> Result<f64> {
    let term = |k: f64| -> f64 {
        let damp = (-b * (k * p + k * k * q)).exp();
        if a == 0.0 {
            (p + 2.0 * k * q) * damp
        } else {
            (a * p + 2.0 * a * k * q).sinh() * damp
        }
    };
    let mut acc = term(0.0);
    let mut scale = acc.abs().max(1e-300);
    let mut k = 0usize;
    loop {
        k += 1;
        let kf = k as f64;
        let pair = term(kf) + term(-kf);
        acc += pair;
        scale = scale.max(acc.abs());
        // Envelope of the +-k pair: e^{(2|a|q + bp)k - b q k^2} up to the
        // polynomial factor; ratio below 1/2 forces a geometric tail.
        let growth = 2.0 * a.abs() * q + b * p;
        let mag = (p + 2.0 * (kf + 1.0) * q) * (growth * (kf + 1.0) - b * q * (kf + 1.0) * (kf + 1.0)).exp();
        let ratio = (growth - b * q * (2.0 * kf + 3.0)).exp();
        if ratio < 0.5 && mag <= 1e-15 * scale {
            break;
        }
        if k > 1_000_000 {
            return Err(Error::Divergent("character sum did not settle".into()));
        }
    }
    Ok(acc)
}

/// Numeric q-Pochhammer `(a; p)_infty = prod_{n>=0} (1 - a p^n)` for
/// `0 <= p < 1`.
fn qpochhammer(a: f64, p: f64) -> f64 {
    let mut acc = 1.0;
    let mut term = a;
    while term.abs() > 1e-18 {
        acc *= 1.0 - term;
        term *= p;
    }
    acc
}

/// Exact marginal CDF of the first crystal coordinate under the Boltzmann
/// law: the ratio of the bounded to the unbounded composition generating
/// functions, `P(X_1 <= k) =
/// (q; q^{k+2}) (q^{k+1}; q^{k+2}) (q^{k+2}; q^{k+2}) / (1 - q)` at
/// `q = e^{-1/r}` (the free coordinate cancels in the ratio).
pub fn x1_marginal_cdf(r: f64, k: u64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange(format!("r must be positive, got {r}")));
    }
    let q = (-1.0 / r).exp();
    let period = q.powi(k as i32 + 2);
    let value = qpochhammer(q, period) * qpochhammer(q.powi(k as i32 + 1), period)
        * qpochhammer(period, period)
        / (1.0 - q);
    Ok(value.clamp(0.0, 1.0))
}

/// Exact Boltzmann distribution on the crystal restricted to `s(x) <= cap`,
/// with the unaccounted mass reported against the full partition function
/// `char_verma(rho~ / r)`.
#[derive(Debug, Clone)]
pub struct BoltzmannDistribution {
    pub elements: Vec<CrystalElement>,
    pub probabilities: Vec<f64>,
    /// `1 - (mass within cap) / Z_r`.
    pub mass_deficit: f64,
    pub z_cap: f64,
    pub z_full: f64,
}

pub fn boltzmann_exact(r: f64, cap: u64) -> Result<BoltzmannDistribution> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange(format!("r must be positive, got {r}")));
    }
    if cap > 30 {
        return Err(Error::OutOfRange(format!(
            "exact enumeration capped at s(x) <= 30, asked for {cap}"
        )));
    }
    let elements = enumerate_crystal(cap)?;
    let weights: Vec<f64> = elements.iter().map(|x| (-(x.total() as f64) / r).exp()).collect();
    let z_cap: f64 = weights.iter().sum();
    let rho_r = Coweight { c: 0.0, a1: 0.5 / r, d: 2.0 / r };
    let n_max = (40.0 * r).max(400.0) as usize;
    let z_full = char_verma(&rho_r, n_max)?;
    let probabilities = weights.iter().map(|w| w / z_cap).collect();
    Ok(BoltzmannDistribution {
        elements,
        probabilities,
        mass_deficit: 1.0 - z_cap / z_full,
        z_cap,
        z_full,
    })
}

/// Sample the crystal weight `sigma(X^{(r)})` from its product-of-geometrics
/// representation: independent geometric counts on every positive root, with
/// parameters `e^{-beta(rho~)/r}`; levels above `n_max` are replaced by their
/// means.
pub fn sigma_weight_sampler(r: f64, n_max: usize, rng: &mut impl Rng) -> Result<Weight> {
    if !(r > 0.0) {
        return Err(Error::OutOfRange(format!("r must be positive, got {r}")));
    }
    let rho = rho_tilde();
    let mut acc = Weight { l0: 0.0, a1h: 0.0, dl: 0.0 };
    let mut add = |root: Weight, count: f64| {
        acc.l0 += count * root.l0;
        acc.a1h += count * root.a1h;
        acc.dl += count * root.dl;
    };
    for n in 0..=n_max {
        for i in 0..3 {
            let root = positive_root(i, n);
            let p = (-root.eval(&rho) / r).exp();
            let u: f64 = rng.gen::<f64>();
            // Geometric on {0, 1, ...} with success parameter 1 - p.
            let g = if p <= 0.0 { 0.0 } else { (u.ln() / p.ln()).floor() };
            add(root, g);
        }
    }
    // Mean tail compensation.
    let mut n = n_max + 1;
    loop {
        let mut level = 0.0;
        for i in 0..3 {
            let root = positive_root(i, n);
            let p = (-root.eval(&rho) / r).exp();
            let mean = p / (1.0 - p);
            add(root, mean);
            level += mean;
        }
        if level < 1e-14 || n > n_max + 10_000 {
            break;
        }
        n += 1;
    }
    Ok(acc)
}

/// Semiclassical character-ratio check: the finite-`r` highest-weight
/// character ratio at `lambda_r ~ r(t, x)` against its theta-function limit
/// (for `u = 0`) or the stated asymptotic (for `u > 0`).
pub fn dh_ratio_check(
    r: f64,
    t: f64,
    x: f64,
    mu: f64,
    tau: f64,
    u: f64,
    tol: f64,
) -> Result<ExperimentReport> {
    if !(x > 0.0 && x < t) {
        return Err(Error::Domain(format!("(t, x) = ({t}, {x}) not interior to the cone")));
    }
    if u < 0.0 {
        return Err(Error::Domain("u must be >= 0".into()));
    }
    let n = (r * t).round() as u32;
    let m = (r * x).round() as u32;
    let cfg = json!({"r": r, "t": t, "x": x, "mu": mu, "tau": tau, "u": u, "tol": tol,
                     "level_n": n, "weight_m": m});
    let mut report = ExperimentReport::new("dh-ratio", cfg);

    let finite = (char_affine_log(n, m, (tau + mu) / r, (u + 2.0) / r)?
        - char_affine_log(n, m, mu / r, 2.0 / r)?)
    .exp();

    // log of the asymptotic evaluation of char at ((tau' ) coalpha1 + (u'+2) d)/r.
    let log_asym = |tau_: f64, u_: f64| -> Result<f64> {
        let scale = 2.0 + u_;
        let alpha = 2.0 * (tau_ + mu) / scale;
        let phi = theta_phi_auto(alpha, scale * t / 2.0, scale * x / 2.0)?;
        Ok(0.5 * (2.0 * scale / (PI * r)).ln() + r * PI * PI / (2.0 * scale) + (tau_ + mu) * x
            + phi.ln())
    };
    let limit = if u == 0.0 {
        (tau * x).exp() * theta_phi_auto(tau + mu, t, x)? / theta_phi_auto(mu, t, x)?
    } else {
        (log_asym(tau, u)? - log_asym(0.0, 0.0)?).exp()
    };

    let rel_err = (finite - limit).abs() / limit.abs();
    report.stat("ratio_finite", finite);
    report.stat("ratio_limit", limit);
    report.check("rel_err", rel_err, rel_err <= tol);
    Ok(report)
}
