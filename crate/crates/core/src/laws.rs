//! Closed-form oracles: the theta-type space-time harmonic function, killed
//! and conditioned interval kernels, space-time cone kernels, Laplace
//! transforms and densities of the limit weight and first string parameter,
//! and the dihedral alternating sums.
//!
//! Every series evaluator truncates with a certified geometric tail bound and
//! reports it in [`KernelEval`].

use crate::error::{Error, Result};
use crate::numeric::{integrate, CdfTable};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

/// Relative truncation target for series summation.
const REL_TOL: f64 = 1e-15;

/// Value of a truncated series together with the number of terms used and a
/// bound on the discarded tail.
#[derive(Debug, Clone, Copy)]
pub struct KernelEval {
    pub value: f64,
    pub truncation_terms: usize,
    pub est_tail: f64,
}

/// Evaluation mode for [`theta_phi`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaMode {
    /// Alternating sinh series; fast for large `t`, rejects integer `alpha`.
    Direct,
    /// Dual (Poisson-resummed) series with the `sin(k pi alpha)/sin(pi alpha)`
    /// ratio evaluated as a Chebyshev polynomial of the second kind, which is
    /// smooth across integer `alpha`. Fast for small `t`.
    Poisson,
}

fn standard_heat_kernel(t: f64, a: f64, b: f64) -> f64 {
    (-(b - a) * (b - a) / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// The theta-type function
/// `phi_alpha(t, x) = e^{-alpha x}/sin(alpha pi) * sum_k sinh(alpha(2kt+x)) e^{-2(kx+k^2 t)}`,
/// extended continuously to integer `alpha` through the dual series. It is
/// space-time harmonic for the killed drifted motion in the cone `0 < x < t`
/// and vanishes on both walls.
pub fn theta_phi(alpha: f64, t: f64, x: f64, mode: ThetaMode) -> Result<KernelEval> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("theta requires t > 0, got {t}")));
    }
    match mode {
        ThetaMode::Direct => theta_direct(alpha, t, x),
        ThetaMode::Poisson => theta_poisson(alpha, t, x),
    }
}

/// Mode picked by the decay rates of the two series (`e^{-2t}` versus
/// `e^{-pi^2/(2t)}`), falling back to the dual series near integer `alpha`.
pub fn theta_phi_auto(alpha: f64, t: f64, x: f64) -> Result<f64> {
    let near_integer = (alpha - alpha.round()).abs() < 1e-8;
    let mode = if near_integer || t <= 1.2 {
        ThetaMode::Poisson
    } else {
        ThetaMode::Direct
    };
    Ok(theta_phi(alpha, t, x, mode)?.value)
}

fn theta_direct(alpha: f64, t: f64, x: f64) -> Result<KernelEval> {
    let s = (alpha * PI).sin();
    if (alpha - alpha.round()).abs() < 1e-9 {
        return Err(Error::Domain(
            "direct mode rejects integer alpha (sin(alpha pi) = 0); use the dual mode".into(),
        ));
    }
    let pref = (-alpha * x).exp() / s;
    let mut acc = (alpha * x).sinh();
    let mut scale = acc.abs().max(1e-300);
    let mut terms = 1usize;
    let tail;
    let mut k = 0usize;
    loop {
        k += 1;
        let kf = k as f64;
        let plus = (alpha * (2.0 * kf * t + x)).sinh() * (-2.0 * (kf * x + kf * kf * t)).exp();
        let minus = (alpha * (x - 2.0 * kf * t)).sinh() * (-2.0 * (-kf * x + kf * kf * t)).exp();
        acc += plus + minus;
        terms += 2;
        scale = scale.max(acc.abs());
        let pair_mag = plus.abs() + minus.abs();
        // Bound ratio of consecutive magnitude envelopes; once below 1/2 the
        // remaining tail is at most twice the next pair.
        let ratio = (2.0 * alpha.abs() * t + 2.0 * x.abs() - 2.0 * t * (2.0 * kf + 1.0)).exp();
        if ratio < 0.5 && pair_mag <= REL_TOL * scale {
            tail = 2.0 * pair_mag;
            break;
        }
        if k > 100_000 {
            return Err(Error::Divergent("theta direct series did not settle".into()));
        }
    }
    Ok(KernelEval {
        value: pref * acc,
        truncation_terms: terms,
        est_tail: (pref * tail).abs(),
    })
}

fn theta_poisson(alpha: f64, t: f64, x: f64) -> Result<KernelEval> {
    let pref = (2.0 * PI / t).sqrt() * ((x - alpha * t) * (x - alpha * t) / (2.0 * t)).exp();
    let c = (PI * alpha).cos();
    // Chebyshev recurrence for U_{k-1}(c) = sin(k pi alpha) / sin(pi alpha).
    let mut u_prev = 0.0; // U_{-1}
    let mut u = 1.0; // U_0
    let mut acc = 0.0f64;
    let mut scale = 1e-300f64;
    let mut terms = 0usize;
    let mut k = 0usize;
    let tail;
    loop {
        k += 1;
        let kf = k as f64;
        let damp = (-kf * kf * PI * PI / (2.0 * t)).exp();
        let term = u * (kf * PI * x / t).sin() * damp;
        acc += term;
        terms += 1;
        scale = scale.max(acc.abs());
        let bound = (kf + 1.0) * (-(kf + 1.0) * (kf + 1.0) * PI * PI / (2.0 * t)).exp();
        let ratio = ((kf + 2.0) / (kf + 1.0)) * (-(2.0 * kf + 3.0) * PI * PI / (2.0 * t)).exp();
        if ratio < 0.5 && bound <= REL_TOL * scale {
            tail = 2.0 * bound;
            break;
        }
        if k > 100_000 {
            return Err(Error::Divergent("theta dual series did not settle".into()));
        }
        let u_next = 2.0 * c * u - u_prev;
        u_prev = u;
        u = u_next;
    }
    Ok(KernelEval {
        value: pref * acc,
        truncation_terms: terms,
        est_tail: (pref * tail).abs(),
    })
}

/// Logarithm of the (positive) theta function at an interior cone point.
/// For very small `t` the value itself underflows f64 (it is of order
/// `e^{-pi^2/(2t)}`), so the dual series is evaluated with its leading
/// exponential factored out.
pub fn theta_phi_log_auto(alpha: f64, t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0 && x > 0.0 && x < t) {
        return Err(Error::Domain(format!(
            "log theta needs an interior cone point, got t={t}, x={x}"
        )));
    }
    if t > 0.2 {
        let v = theta_phi_auto(alpha, t, x)?;
        if !(v > 0.0) {
            return Err(Error::Domain(format!("theta not positive at ({t}, {x}): {v}")));
        }
        return Ok(v.ln());
    }
    // Dual series with e^{-pi^2/(2t)} factored out:
    // phi = pref * e^{-pi^2/(2t)} * sum_k U_{k-1}(cos pi alpha) sin(k pi x/t)
    //        e^{-(k^2-1) pi^2/(2t)}.
    let log_pref = 0.5 * (2.0 * PI / t).ln() + (x - alpha * t) * (x - alpha * t) / (2.0 * t);
    let c = (PI * alpha).cos();
    let mut u_prev = 0.0;
    let mut u = 1.0;
    let mut bracket = 0.0f64;
    for k in 1..400usize {
        let kf = k as f64;
        bracket += u * (kf * PI * x / t).sin() * (-(kf * kf - 1.0) * PI * PI / (2.0 * t)).exp();
        let u_next = 2.0 * c * u - u_prev;
        u_prev = u;
        u = u_next;
        if (kf * kf * PI * PI / (2.0 * t)) > 750.0 {
            break;
        }
    }
    if !(bracket > 0.0) {
        return Err(Error::Domain("dual series bracket not positive".into()));
    }
    Ok(log_pref - PI * PI / (2.0 * t) + bracket.ln())
}

/// Central finite-difference residual of the space-time harmonicity
/// `(d_t + 1/2 d_xx + alpha d_x) phi_alpha = 0` at an interior cone point.
pub fn harmonic_residual(alpha: f64, t: f64, x: f64, h: f64) -> Result<f64> {
    if !(x - h > 0.0 && x + h < t && h > 0.0) {
        return Err(Error::Domain(format!(
            "need 0 < x-h and x+h < t for the stencil, got t={t}, x={x}, h={h}"
        )));
    }
    let phi = |tt: f64, xx: f64| theta_phi_auto(alpha, tt, xx);
    let dt = (phi(t + h, x)? - phi(t - h, x)?) / (2.0 * h);
    let center = phi(t, x)?;
    let dxx = (phi(t, x + h)? - 2.0 * center + phi(t, x - h)?) / (h * h);
    let dx = (phi(t, x + h)? - phi(t, x - h)?) / (2.0 * h);
    Ok(dt + 0.5 * dxx + alpha * dx)
}

/// Evaluation mode for the killed interval kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    /// Method of images: `sum_k p_t(x+2k, y) - p_t(-x-2k, y)`.
    Reflection,
    /// Eigenfunction expansion: `2 sum_n sin(n pi x) sin(n pi y) e^{-pi^2 n^2 t / 2}`.
    Spectral,
}

/// Transition density of Brownian motion killed at 0 and 1.
pub fn killed_kernel(t: f64, x: f64, y: f64, mode: KernelMode) -> Result<KernelEval> {
    if !(t > 0.0) || !(0.0 < x && x < 1.0) || !(0.0 < y && y < 1.0) {
        return Err(Error::Domain(format!(
            "killed kernel needs t > 0 and x, y in (0,1); got t={t}, x={x}, y={y}"
        )));
    }
    match mode {
        KernelMode::Reflection => {
            let mut acc = standard_heat_kernel(t, x, y) - standard_heat_kernel(t, -x, y);
            let mut scale = acc.abs().max(1e-300);
            let mut terms = 2usize;
            let mut k = 0usize;
            let tail;
            loop {
                k += 1;
                let kf = k as f64;
                let quad = standard_heat_kernel(t, x + 2.0 * kf, y)
                    - standard_heat_kernel(t, -x - 2.0 * kf, y)
                    + standard_heat_kernel(t, x - 2.0 * kf, y)
                    - standard_heat_kernel(t, -x + 2.0 * kf, y);
                acc += quad;
                terms += 4;
                scale = scale.max(acc.abs());
                // Envelope e^{-(2k-1)^2/(2t)}; ratio below 1/2 once 2(2k)/t > ln 2.
                let mag = 4.0 * (-(2.0 * kf - 1.0) * (2.0 * kf - 1.0) / (2.0 * t)).exp()
                    / (2.0 * PI * t).sqrt();
                let ratio = (-(4.0 * kf) / t * 2.0).exp();
                if ratio < 0.5 && mag <= REL_TOL * scale {
                    tail = 2.0 * mag;
                    break;
                }
                if k > 100_000 {
                    return Err(Error::Divergent("image series did not settle".into()));
                }
            }
            Ok(KernelEval { value: acc, truncation_terms: terms, est_tail: tail })
        }
        KernelMode::Spectral => {
            let mut acc = 0.0f64;
            let mut scale = 1e-300f64;
            let mut terms = 0usize;
            let mut n = 0usize;
            let tail;
            loop {
                n += 1;
                let nf = n as f64;
                let term = 2.0
                    * (nf * PI * x).sin()
                    * (nf * PI * y).sin()
                    * (-PI * PI * nf * nf * t / 2.0).exp();
                acc += term;
                terms += 1;
                scale = scale.max(acc.abs());
                let bound = 2.0 * (-PI * PI * (nf + 1.0) * (nf + 1.0) * t / 2.0).exp();
                let ratio = (-PI * PI * (2.0 * nf + 3.0) * t / 2.0).exp();
                if ratio < 0.5 && bound <= REL_TOL * scale {
                    tail = 2.0 * bound;
                    break;
                }
                if n > 100_000 {
                    return Err(Error::Divergent("eigenfunction series did not settle".into()));
                }
            }
            Ok(KernelEval { value: acc, truncation_terms: terms, est_tail: tail })
        }
    }
}

/// Transition density of the conditioned motion:
/// `q_t(x, y) = (sin(pi y)/sin(pi x)) e^{pi^2 t/2} u_t(x, y)`, with `x = 0`
/// routed to the entrance law. Evaluated through whichever representation of
/// `u` converges faster, with the exponential prefactor folded into the
/// spectral exponents for stability at large `t`.
pub fn q_kernel(t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) || !(0.0 < y && y < 1.0) || !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "q kernel needs t > 0, x in [0,1), y in (0,1); got t={t}, x={x}, y={y}"
        )));
    }
    if x == 0.0 {
        return q_entrance(t, y);
    }
    if t < 0.25 {
        let u = killed_kernel(t, x, y, KernelMode::Reflection)?.value;
        Ok((PI * y).sin() / (PI * x).sin() * (PI * PI * t / 2.0).exp() * u)
    } else {
        let mut acc = 0.0f64;
        for n in 1..200 {
            let nf = n as f64;
            let term = 2.0
                * (nf * PI * x).sin()
                * (nf * PI * y).sin()
                * (-PI * PI * (nf * nf - 1.0) * t / 2.0).exp();
            acc += term;
            if term.abs() < REL_TOL * acc.abs().max(1e-300) && n > 2 {
                break;
            }
        }
        Ok((PI * y).sin() / (PI * x).sin() * acc)
    }
}

/// Entrance density of the conditioned motion from the boundary 0:
/// `q_t(0, y) = sin(pi y) * 2 sum_n n sin(n pi y) e^{-pi^2 (n^2-1) t/2}`.
/// Integrates to 1 exactly (only the `n = 1` mode survives).
pub fn q_entrance(t: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) || !(0.0 < y && y < 1.0) {
        return Err(Error::Domain(format!("entrance law needs t > 0, y in (0,1); got t={t}, y={y}")));
    }
    let mut acc = 0.0f64;
    let mut n = 0usize;
    loop {
        n += 1;
        let nf = n as f64;
        let term = 2.0 * nf * (nf * PI * y).sin() * (-PI * PI * (nf * nf - 1.0) * t / 2.0).exp();
        acc += term;
        let bound = 2.0 * (nf + 1.0) * (-PI * PI * ((nf + 1.0) * (nf + 1.0) - 1.0) * t / 2.0).exp();
        if bound <= REL_TOL * acc.abs().max(1e-300) {
            break;
        }
        if n > 100_000 {
            return Err(Error::Divergent("entrance series did not settle".into()));
        }
    }
    Ok((PI * y).sin() * acc)
}

/// CDF table of `y -> q_t(x0, y)` on `(0, 1)`; `x0 = 0` or `1` use the
/// entrance laws (the one at 1 by the symmetry `y -> 1 - y`).
pub fn q_cdf_table(t: f64, x0: f64, cells: usize) -> Result<CdfTable> {
    if !(0.0..=1.0).contains(&x0) {
        return Err(Error::Domain(format!("start point {x0} outside [0,1]")));
    }
    let density = move |y: f64| -> f64 {
        if y <= 0.0 || y >= 1.0 {
            return 0.0;
        }
        if x0 == 0.0 {
            q_entrance(t, y).unwrap_or(0.0)
        } else if x0 == 1.0 {
            q_entrance(t, 1.0 - y).unwrap_or(0.0)
        } else {
            q_kernel(t, x0, y).unwrap_or(0.0)
        }
    };
    Ok(CdfTable::from_density(density, 0.0, 1.0, cells))
}

/// Laplace transform `E e^{-tau D} = sin(pi mu) / sin(pi (mu + tau))` of the
/// limit weight coordinate; finite for `-mu < tau < 1 - mu`.
pub fn laplace_d(mu: f64, tau: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::OutOfRange(format!("mu must lie in (0,1), got {mu}")));
    }
    if !(tau > -mu && tau < 1.0 - mu) {
        return Err(Error::OutOfRange(format!(
            "tau {tau} outside the convergence strip ({}, {})",
            -mu,
            1.0 - mu
        )));
    }
    Ok((PI * mu).sin() / (PI * (mu + tau)).sin())
}

/// `E D = pi cot(pi mu)`.
pub fn mean_d(mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::OutOfRange(format!("mu must lie in (0,1), got {mu}")));
    }
    Ok(PI * (PI * mu).cos() / (PI * mu).sin())
}

/// Density of the limit weight coordinate at `mu = 1/2`:
/// `1 / (2 pi cosh(x/2))`. The scale is pinned by the series representation
/// (variance `pi^2`) and by the Laplace transform `1/cos(pi tau)`.
pub fn density_d_half(x: f64) -> f64 {
    1.0 / (2.0 * PI * (x / 2.0).cosh())
}

/// CDF of the limit weight coordinate at `mu = 1/2`:
/// `(2/pi) arctan(e^{x/2})`.
pub fn cdf_d_half(x: f64) -> f64 {
    2.0 / PI * (x / 2.0).exp().atan()
}

/// Laplace transform `E e^{-tau xi_1}` at `mu = 1/2` through the stable
/// product `prod (1 + 2 tau / (n(n+1)))^{-1}` with an analytic log tail;
/// branch-free and monotone for all `tau >= 0`.
pub fn xi1_laplace_half(tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::OutOfRange(format!("tau must be >= 0, got {tau}")));
    }
    let n_terms = 200_000usize;
    let mut log_acc = 0.0;
    for n in 1..=n_terms {
        let nf = n as f64;
        log_acc += (2.0 * tau / (nf * (nf + 1.0))).ln_1p();
    }
    // sum_{n>N} ln(1 + 2 tau/(n(n+1))) = 2 tau/(N+1) - O(tau^2/N^3).
    log_acc += 2.0 * tau / (n_terms as f64 + 1.0);
    Ok((-log_acc).exp())
}

/// Closed form of the same transform, `2 pi tau / cosh(pi sqrt(2 tau - 1/4))`
/// continued through the removable branch point at `tau = 1/8`.
pub fn xi1_laplace_half_closed(tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::OutOfRange("closed form needs tau > 0".into()));
    }
    let arg = 2.0 * tau - 0.25;
    let denom = if arg >= 0.0 {
        (PI * arg.sqrt()).cosh()
    } else {
        (PI * (-arg).sqrt()).cos()
    };
    Ok(2.0 * PI * tau / denom)
}

/// Density of `xi_1` at `mu = 1/2`:
/// `(1/2) sum_{n>=1} (-1)^{n+1} n(n+1)(2n+1) e^{-n(n+1)x/2}` for `x > 0`
/// (the derivative of the Jacobi-product CDF).
pub fn xi1_density_half(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::OutOfRange(format!("density needs x > 0, got {x}")));
    }
    let mut acc = 0.0f64;
    let mut n = 0usize;
    loop {
        n += 1;
        let nf = n as f64;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * nf * (nf + 1.0) * (2.0 * nf + 1.0) * (-nf * (nf + 1.0) * x / 2.0).exp();
        acc += term;
        let nb = nf + 1.0;
        let bound = nb * (nb + 1.0) * (2.0 * nb + 1.0) * (-nb * (nb + 1.0) * x / 2.0).exp();
        if bound <= REL_TOL * acc.abs().max(1e-300) || bound == 0.0 {
            break;
        }
        if n > 200_000 {
            return Err(Error::Divergent("xi1 density series did not settle".into()));
        }
    }
    Ok(0.5 * acc)
}

/// CDF of `xi_1` at `mu = 1/2`: the triple product `prod (1 - e^{-n x})^3`.
pub fn xi1_cdf_half(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::OutOfRange(format!("cdf needs x > 0, got {x}")));
    }
    let mut log_acc = 0.0;
    let mut n = 0usize;
    loop {
        n += 1;
        let e = (-(n as f64) * x).exp();
        if e >= 1.0 {
            return Ok(0.0);
        }
        log_acc += 3.0 * (-e).ln_1p();
        if e < 1e-18 || n > 10_000 {
            break;
        }
    }
    Ok(log_acc.exp())
}

/// Laplace transform `E e^{-tau xi_1}` at `mu = 1`:
/// `pi^2 (tau/2) / sinh^2(pi sqrt(tau/2))`, continuous at 0.
pub fn xi1_laplace_one(tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(Error::OutOfRange(format!("tau must be >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(1.0);
    }
    let z = PI * (tau / 2.0).sqrt();
    Ok(z * z / z.sinh().powi(2))
}

/// CDF of `xi_1` at `mu = 1`: `1 + 2 sum_{k>=1} (1 - 4k^2 x) e^{-2k^2 x}`.
pub fn xi1_cdf_one(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::OutOfRange(format!("cdf needs x > 0, got {x}")));
    }
    let mut acc = 1.0f64;
    let mut k = 0usize;
    loop {
        k += 1;
        let kf = k as f64;
        acc += 2.0 * (1.0 - 4.0 * kf * kf * x) * (-2.0 * kf * kf * x).exp();
        let kb = kf + 1.0;
        let bound = 2.0 * (1.0 + 4.0 * kb * kb * x) * (-2.0 * kb * kb * x).exp();
        if bound <= 1e-16 {
            break;
        }
        if k > 200_000 {
            return Err(Error::Divergent("cdf series did not settle".into()));
        }
    }
    Ok(acc.clamp(0.0, 1.0))
}

/// Density of `xi_1` at `mu = 1`: `2 sum_{k>=1} (8k^4 x - 6k^2) e^{-2k^2 x}`.
pub fn xi1_density_one(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::OutOfRange(format!("density needs x > 0, got {x}")));
    }
    let mut acc = 0.0f64;
    let mut k = 0usize;
    loop {
        k += 1;
        let kf = k as f64;
        acc += 2.0 * (8.0 * kf.powi(4) * x - 6.0 * kf * kf) * (-2.0 * kf * kf * x).exp();
        let kb = kf + 1.0;
        let bound = 2.0 * (8.0 * kb.powi(4) * x + 6.0 * kb * kb) * (-2.0 * kb * kb * x).exp();
        if bound <= 1e-16 {
            break;
        }
        if k > 200_000 {
            return Err(Error::Divergent("density series did not settle".into()));
        }
    }
    Ok(acc.max(0.0))
}

/// Killed space-time density in the cone from `(r, x)` to `(r + t, y)` with
/// drift `mu`: Cameron-Martin factor times the driftless image sum
/// `w^0 = sum_k e^{-2(kx + k^2 r)} (p_t(x + 2kr, y) - p_t(-x - 2kr, y))`.
pub fn spacetime_w(mu: f64, r: f64, x: f64, t: f64, y: f64) -> Result<KernelEval> {
    if !(r > 0.0 && t > 0.0) || !(0.0 < x && x < r) || !(0.0 < y && y < r + t) {
        return Err(Error::Domain(format!(
            "need 0 < x < r and 0 < y < r + t; got r={r}, x={x}, t={t}, y={y}"
        )));
    }
    let cm = (mu * (y - x) - t * mu * mu / 2.0).exp();
    let mut acc = standard_heat_kernel(t, x, y) - standard_heat_kernel(t, -x, y);
    let mut scale = acc.abs().max(1e-300);
    let mut terms = 2usize;
    let mut k = 0usize;
    let tail;
    loop {
        k += 1;
        let kf = k as f64;
        let mut quad = 0.0;
        for s in [kf, -kf] {
            let pref = (-2.0 * (s * x + s * s * r)).exp();
            quad += pref
                * (standard_heat_kernel(t, x + 2.0 * s * r, y)
                    - standard_heat_kernel(t, -x - 2.0 * s * r, y));
        }
        acc += quad;
        terms += 4;
        scale = scale.max(acc.abs());
        // Envelope: e^{-2k^2 r + 2k x} Gaussian; the x < r constraint makes
        // it summable with ratio < e^{-2r(2k+1) + 2x}.
        let mag = 2.0 * (-2.0 * kf * kf * r + 2.0 * kf * x).exp() / (2.0 * PI * t).sqrt();
        let ratio = (-2.0 * r * (2.0 * kf + 1.0) + 2.0 * x).exp();
        if ratio < 0.5 && mag <= REL_TOL * scale {
            tail = 2.0 * mag;
            break;
        }
        if k > 100_000 {
            return Err(Error::Divergent("space-time image series did not settle".into()));
        }
    }
    Ok(KernelEval {
        value: cm * acc,
        truncation_terms: terms,
        est_tail: (cm * tail).abs(),
    })
}

/// Transition density of the conditioned space-time motion:
/// `s^mu = (phi_mu(r+t, y) / phi_mu(r, x)) w^mu`. Integrates to 1 in `y`
/// because `phi_mu` is harmonic for the killed motion.
pub fn spacetime_s(mu: f64, r: f64, x: f64, t: f64, y: f64) -> Result<f64> {
    let w = spacetime_w(mu, r, x, t, y)?.value;
    let num = theta_phi_auto(mu, r + t, y)?;
    let den = theta_phi_auto(mu, r, x)?;
    if den <= 0.0 {
        return Err(Error::Domain("phi vanished at the source point".into()));
    }
    Ok(num / den * w)
}

fn entrance_norm_cache() -> &'static Mutex<HashMap<(u64, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Entrance density of the conditioned space-time motion from the corner:
/// proportional to `phi_mu(t, y) sin(pi y / t) e^{-(y - mu t)^2 / (2t)}`,
/// normalized by quadrature (the normalizing constant is cached per `(mu, t)`).
pub fn s_entrance(mu: f64, t: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) || !(0.0 < y && y < t) {
        return Err(Error::Domain(format!("need 0 < y < t; got t={t}, y={y}")));
    }
    let raw = |yy: f64| -> f64 {
        if yy <= 0.0 || yy >= t {
            return 0.0;
        }
        let phi = theta_phi_auto(mu, t, yy).unwrap_or(0.0);
        phi * (PI * yy / t).sin() * (-(yy - mu * t) * (yy - mu * t) / (2.0 * t)).exp()
    };
    let key = (mu.to_bits(), t.to_bits());
    let norm = {
        let cached = entrance_norm_cache().lock().unwrap().get(&key).copied();
        match cached {
            Some(z) => z,
            None => {
                let (z, _) = integrate(raw, 0.0, t, 1e-12)?;
                entrance_norm_cache().lock().unwrap().insert(key, z);
                z
            }
        }
    };
    Ok(raw(y) / norm)
}

/// Alternating dihedral sum
/// `psi_v(gamma) = sum_{w in I(m)} (-1)^{l(w)} e^{<w(gamma) - gamma, v>}`:
/// rotations by `2 pi k / m` count positively, reflections negatively.
pub fn psi_dihedral(m: usize, v: [f64; 2], gamma: [f64; 2]) -> f64 {
    let base = gamma[0] * v[0] + gamma[1] * v[1];
    let mut acc = 0.0;
    for k in 0..m {
        let ang = 2.0 * PI * k as f64 / m as f64;
        let (s, c) = ang.sin_cos();
        let rot = [c * gamma[0] - s * gamma[1], s * gamma[0] + c * gamma[1]];
        let refl = [c * gamma[0] + s * gamma[1], s * gamma[0] - c * gamma[1]];
        acc += ((rot[0] * v[0] + rot[1] * v[1]) - base).exp();
        acc -= ((refl[0] * v[0] + refl[1] * v[1]) - base).exp();
    }
    acc
}

/// Alternating polynomial of the dihedral group: `h_m(x, y) = Im((x+iy)^m)`.
pub fn h_dihedral(m: usize, v: [f64; 2]) -> f64 {
    let r = v[0].hypot(v[1]);
    let theta = v[1].atan2(v[0]);
    r.powi(m as i32) * (m as f64 * theta).sin()
}

/// `(pi/m)^m h_m(v)`, computed in log scale to avoid overflow for large `m`.
pub fn h_dihedral_scaled(m: usize, v: [f64; 2]) -> f64 {
    let r = v[0].hypot(v[1]);
    let theta = v[1].atan2(v[0]);
    let log_mag = m as f64 * (PI * r / m as f64).ln();
    log_mag.exp() * (m as f64 * theta).sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn theta_vanishes_on_the_walls() {
        for mu in [0.25, 0.5, 0.8] {
            for t in [0.4, 1.0, 3.0] {
                for mode in [ThetaMode::Direct, ThetaMode::Poisson] {
                    let at0 = theta_phi(mu, t, 0.0, mode).unwrap().value;
                    let att = theta_phi(mu, t, t, mode).unwrap().value;
                    assert!(at0.abs() <= 1e-10, "phi({mu},{t},0) = {at0} in {mode:?}");
                    assert!(att.abs() <= 1e-10, "phi({mu},{t},{t}) = {att} in {mode:?}");
                }
            }
        }
    }

    #[test]
    fn theta_symmetry_and_positivity() {
        // phi_alpha(t, x) = phi_{1-alpha}(t, t-x), and phi > 0 inside.
        for (alpha, t, x) in [(0.3, 1.0, 0.4), (0.7, 2.0, 1.1), (0.5, 0.6, 0.31)] {
            let a = theta_phi_auto(alpha, t, x).unwrap();
            let b = theta_phi_auto(1.0 - alpha, t, t - x).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-11 * a.abs().max(1.0));
            assert!(a > 0.0);
        }
    }

    #[test]
    fn theta_modes_agree() {
        let a = theta_phi(0.3, 1.0, 0.4, ThetaMode::Direct).unwrap();
        let b = theta_phi(0.3, 1.0, 0.4, ThetaMode::Poisson).unwrap();
        assert!((a.value - b.value).abs() <= 1e-10, "{} vs {}", a.value, b.value);
        assert!(a.est_tail <= 1e-12 && b.est_tail <= 1e-12);
        // Direct mode refuses integer alpha; dual mode is smooth there.
        assert!(theta_phi(1.0, 1.0, 0.4, ThetaMode::Direct).is_err());
        let c = theta_phi(1.0, 1.0, 0.4, ThetaMode::Poisson).unwrap();
        assert!(c.value.is_finite() && c.value > 0.0);
        // Continuity across the integer: alpha = 1 +- 1e-7 in direct mode.
        let lo = theta_phi(1.0 - 1e-7, 2.0, 0.9, ThetaMode::Direct).unwrap().value;
        let hi = theta_phi(1.0 + 1e-7, 2.0, 0.9, ThetaMode::Direct).unwrap().value;
        let mid = theta_phi(1.0, 2.0, 0.9, ThetaMode::Poisson).unwrap().value;
        assert!((lo - mid).abs() <= 1e-5 * mid.abs());
        assert!((hi - mid).abs() <= 1e-5 * mid.abs());
    }

    #[test]
    fn harmonic_residual_is_small_and_second_order() {
        let r1 = harmonic_residual(0.5, 1.0, 0.5, 1e-3).unwrap();
        assert!(r1.abs() <= 1e-4, "residual {r1}");
        let r2 = harmonic_residual(0.5, 1.0, 0.5, 5e-4).unwrap();
        let ratio = r1 / r2;
        assert!((3.5..=4.5).contains(&ratio), "Richardson ratio {ratio}");
        assert!(harmonic_residual(0.5, 1.0, 1.2, 1e-3).is_err());
    }

    #[test]
    fn killed_kernel_symmetry_domination_and_mode_agreement() {
        for (t, x, y) in [(0.5, 0.3, 0.7), (0.2, 0.5, 0.55), (1.5, 0.25, 0.6)] {
            let a = killed_kernel(t, x, y, KernelMode::Reflection).unwrap().value;
            let b = killed_kernel(t, y, x, KernelMode::Reflection).unwrap().value;
            let c = killed_kernel(t, x, y, KernelMode::Spectral).unwrap().value;
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            assert!((a - c).abs() <= 1e-10, "{a} vs {c}");
            assert!(a <= standard_heat_kernel(t, x, y) + 1e-15);
            assert!(a > 0.0);
        }
        assert!(killed_kernel(0.5, -0.1, 0.5, KernelMode::Spectral).is_err());
    }

    #[test]
    fn truncation_reporting_is_honest() {
        // Halving the tolerance target never moves the value by more than
        // the reported tail bound; here we compare against a much longer sum.
        let e = killed_kernel(0.37, 0.41, 0.59, KernelMode::Spectral).unwrap();
        let mut long = 0.0;
        for n in 1..400 {
            let nf = n as f64;
            long += 2.0
                * (nf * PI * 0.41).sin()
                * (nf * PI * 0.59).sin()
                * (-PI * PI * nf * nf * 0.37 / 2.0).exp();
        }
        assert!((e.value - long).abs() <= e.est_tail.max(1e-15));
    }

    #[test]
    fn q_kernel_routes_agree_and_integrate_to_one() {
        // Doob consistency q sin(pi x) = e^{pi^2 t/2} sin(pi y) u across both
        // u representations and both q routes.
        for (t, x, y) in [(0.1, 0.3, 0.6), (0.5, 0.3, 0.7), (2.0, 0.8, 0.2)] {
            let q = q_kernel(t, x, y).unwrap();
            let u = killed_kernel(t, x, y, KernelMode::Reflection).unwrap().value;
            let rhs = (PI * PI * t / 2.0).exp() * (PI * y).sin() * u;
            assert_abs_diff_eq!(q * (PI * x).sin(), rhs, epsilon = 1e-12 * rhs.abs().max(1.0));
        }
        let (mass, err) = integrate(|y| q_kernel(0.5, 0.3, y).unwrap_or(0.0), 0.0, 1.0, 1e-10).unwrap();
        assert!(err <= 1e-10);
        assert!((mass - 1.0).abs() <= 1e-8, "mass {mass}");
    }

    #[test]
    fn entrance_law_matches_interior_limit() {
        let t = 0.5;
        for y in [0.2, 0.5, 0.8] {
            let lim = q_kernel(t, 1e-4, y).unwrap();
            let ent = q_entrance(t, y).unwrap();
            assert!((lim - ent).abs() <= 1e-3 * ent.abs(), "y={y}: {lim} vs {ent}");
        }
        let (mass, _) = integrate(|y| q_entrance(0.3, y).unwrap_or(0.0), 0.0, 1.0, 1e-10).unwrap();
        assert!((mass - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn laplace_d_examples() {
        assert_abs_diff_eq!(laplace_d(0.37, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(laplace_d(0.5, 0.25).unwrap(), 2.0f64.sqrt(), epsilon = 1e-14);
        assert!(laplace_d(0.5, 0.6).is_err());
        assert_abs_diff_eq!(mean_d(0.5).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean_d(0.25).unwrap(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(cdf_d_half(0.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn d_half_density_is_consistent() {
        // Density integrates to 1, has variance pi^2, and matches the CDF.
        let (mass, _) = integrate(density_d_half, -60.0, 60.0, 1e-12).unwrap();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-10);
        let (var, _) = integrate(|x| x * x * density_d_half(x), -80.0, 80.0, 1e-10).unwrap();
        assert_abs_diff_eq!(var, PI * PI, epsilon = 1e-6);
        let (p, _) = integrate(density_d_half, -60.0, 1.3, 1e-12).unwrap();
        assert_abs_diff_eq!(p, cdf_d_half(1.3), epsilon = 1e-9);
        // And the Laplace transform of the density agrees with the closed form.
        let tau = 0.3;
        let (lap, _) = integrate(|x| (-tau * x).exp() * density_d_half(x), -120.0, 60.0, 1e-10).unwrap();
        assert_abs_diff_eq!(lap, laplace_d(0.5, tau).unwrap(), epsilon = 1e-7);
    }

    #[test]
    fn xi1_half_laws() {
        assert_abs_diff_eq!(xi1_laplace_half(0.0).unwrap(), 1.0, epsilon = 1e-12);
        // Product form against the cosh closed form away from the branch point.
        for tau in [0.2, 0.5, 1.0, 3.0] {
            let p = xi1_laplace_half(tau).unwrap();
            let c = xi1_laplace_half_closed(tau).unwrap();
            assert!((p - c).abs() <= 1e-9 * c, "tau={tau}: {p} vs {c}");
        }
        // And continuity through tau = 1/8.
        let below = xi1_laplace_half_closed(0.124999).unwrap();
        let above = xi1_laplace_half_closed(0.125001).unwrap();
        assert!((below - above).abs() < 1e-4);
        // CDF at ln 2 equals the cube of prod (1 - 2^{-n}); 60-term oracle.
        let mut oracle = 1.0;
        for n in 1..=60 {
            oracle *= 1.0 - 0.5f64.powi(n);
        }
        let oracle = oracle.powi(3);
        assert_abs_diff_eq!(xi1_cdf_half((2.0f64).ln()).unwrap(), oracle, epsilon = 1e-12);
        assert!((oracle - 0.024084).abs() < 5e-6);
        // Density integrates to 1 and differentiates the CDF.
        let (mass, _) = integrate(|x| xi1_density_half(x).unwrap_or(0.0), 1e-6, 60.0, 1e-10).unwrap();
        assert!((mass - 1.0).abs() <= 1e-8, "mass {mass}");
        let x = 0.9;
        let h = 1e-5;
        let fd = (xi1_cdf_half(x + h).unwrap() - xi1_cdf_half(x - h).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(fd, xi1_density_half(x).unwrap(), epsilon = 1e-8);
        assert!(xi1_cdf_half(40.0).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn xi1_one_laws() {
        assert_abs_diff_eq!(xi1_laplace_one(0.0).unwrap(), 1.0, epsilon = 1e-15);
        // Continuity at 0+.
        assert!((xi1_laplace_one(1e-10).unwrap() - 1.0).abs() < 1e-8);
        // CDF increases to 1; density matches finite differences of the CDF.
        assert!(xi1_cdf_one(30.0).unwrap() > 1.0 - 1e-12);
        let x = 1.2;
        let h = 1e-5;
        let fd = (xi1_cdf_one(x + h).unwrap() - xi1_cdf_one(x - h).unwrap()) / (2.0 * h);
        assert_abs_diff_eq!(fd, xi1_density_one(x).unwrap(), epsilon = 1e-7);
        let (mass, _) = integrate(|x| xi1_density_one(x).unwrap_or(0.0), 1e-6, 40.0, 1e-10).unwrap();
        assert!((mass - 1.0).abs() <= 1e-6, "mass {mass}");
        // Laplace transform of the density agrees with the closed form.
        let tau = 0.7;
        let (lap, _) = integrate(
            |x| (-tau * x).exp() * xi1_density_one(x).unwrap_or(0.0),
            1e-8,
            40.0,
            1e-11,
        )
        .unwrap();
        assert_abs_diff_eq!(lap, xi1_laplace_one(tau).unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn spacetime_kernel_factorizes_and_normalizes() {
        // Cameron-Martin factorization w^mu = e^{mu(y-x) - t mu^2/2} w^0.
        let (mu, r, x, t, y) = (0.4, 1.0, 0.6, 0.8, 1.1);
        let w_mu = spacetime_w(mu, r, x, t, y).unwrap().value;
        let w_0 = spacetime_w(0.0, r, x, t, y).unwrap().value;
        let factor = (mu * (y - x) - t * mu * mu / 2.0).exp();
        assert!((w_mu - factor * w_0).abs() <= 1e-12 * w_mu.abs().max(1e-12));
        // s integrates to 1 over the target fiber without extra normalization.
        let (mass, _) = integrate(
            |yy| spacetime_s(mu, r, x, t, yy).unwrap_or(0.0),
            0.0,
            r + t,
            1e-10,
        )
        .unwrap();
        assert!((mass - 1.0).abs() <= 1e-7, "mass {mass}");
        // Entrance law is a probability density as well.
        let (em, _) = integrate(|yy| s_entrance(0.5, 1.0, yy).unwrap_or(0.0), 0.0, 1.0, 1e-10).unwrap();
        assert!((em - 1.0).abs() <= 1e-8, "entrance mass {em}");
    }

    #[test]
    fn spacetime_w_vanishes_on_walls_and_recovers_heat_kernel() {
        let (r, x, t) = (1.0, 0.4, 0.7);
        let eps = 1e-9;
        let near0 = spacetime_w(0.0, r, x, t, eps).unwrap().value;
        let neart = spacetime_w(0.0, r, x, t, r + t - eps).unwrap().value;
        assert!(near0.abs() <= 1e-7);
        assert!(neart.abs() <= 1e-7);
        // Far from both walls at tiny time the kernel is the free one.
        let w = spacetime_w(0.0, 10.0, 5.0, 0.01, 5.02).unwrap().value;
        assert_abs_diff_eq!(w, standard_heat_kernel(0.01, 5.0, 5.02), epsilon = 1e-12);
    }

    #[test]
    fn conditioned_kernel_factorizes_through_theta() {
        // q_t(x, y) = c_t sin(pi y) e^{-(y-x)^2/(2t)} phi_x(1/t, y/t) with a
        // constant c_t depending on t only: the ratio is flat in (x, y).
        for t in [0.5, 1.0, 2.0] {
            let ratio = |x: f64, y: f64| -> f64 {
                let q = q_kernel(t, x, y).unwrap();
                let phi = theta_phi_auto(x, 1.0 / t, y / t).unwrap();
                q / ((PI * y).sin() * (-(y - x) * (y - x) / (2.0 * t)).exp() * phi)
            };
            let base = ratio(0.5, 0.5);
            for x in [0.2, 0.4, 0.7] {
                for y in [0.15, 0.5, 0.85] {
                    let r = ratio(x, y);
                    assert!(
                        (r / base - 1.0).abs() <= 1e-8,
                        "t={t}, x={x}, y={y}: {r} vs {base}"
                    );
                }
            }
        }
    }

    #[test]
    fn dihedral_sums_basics() {
        // h_m vanishes on the real axis; psi vanishes for gamma fixed by the
        // reflection (x, y) -> (x, -y).
        for m in [3usize, 6, 9] {
            assert_eq!(h_dihedral(m, [1.0, 0.0]), 0.0);
            let psi = psi_dihedral(m, [0.7, 0.3], [2.0, 0.0]);
            assert!(psi.abs() <= 1e-12, "psi {psi}");
        }
        // h_m of the cone bisector is positive.
        let m = 6;
        let th = PI / (2.0 * m as f64);
        assert!(h_dihedral(m, [th.cos(), th.sin()]) > 0.0);
    }

    #[test]
    fn dihedral_sums_approach_theta() {
        // With gamma_m = (m/pi, alpha) and v_m = (m t/pi, x):
        // (pi/m)^m h_m(gamma_m) -> sin(alpha pi) and
        // psi_{v_m}(gamma_m) -> 2 sin(alpha pi) phi_alpha(t, x).
        // (Grouping the 2m terms of psi into rotation/reflection pairs gives
        // 2 e^{-alpha x} sum_k sinh(alpha(2kt+x)) e^{-2(kx+k^2 t)} in the
        // limit, i.e. twice sin(alpha pi) phi_alpha.)
        let m = 64;
        let (alpha, t, x) = (0.3, 1.0, 0.4);
        let gamma_m = [m as f64 / PI, alpha];
        let v_m = [m as f64 * t / PI, x];
        let h_lim = (alpha * PI).sin();
        let h_val = h_dihedral_scaled(m, gamma_m);
        assert!((h_val - h_lim).abs() <= 0.02 * h_lim, "h {h_val} vs {h_lim}");
        let psi_lim = 2.0 * h_lim * theta_phi_auto(alpha, t, x).unwrap();
        let psi_val = psi_dihedral(m, v_m, gamma_m);
        assert!((psi_val - psi_lim).abs() <= 0.02 * psi_lim.abs(), "psi {psi_val} vs {psi_lim}");
        // The constant cancels in the conditional-law ratios: check that
        // psi(zeta + gamma)/psi(gamma) * h(gamma)/h(zeta + gamma) e^{<zeta,v>}
        // approaches e^{tau x} phi_{tau+alpha}/phi_alpha.
        let tau = 0.2;
        let zeta = [0.0, tau];
        let lhs = psi_dihedral(m, v_m, [gamma_m[0] + zeta[0], gamma_m[1] + zeta[1]])
            / psi_dihedral(m, v_m, gamma_m)
            * h_dihedral_scaled(m, gamma_m)
            / h_dihedral_scaled(m, [gamma_m[0] + zeta[0], gamma_m[1] + zeta[1]])
            * (zeta[0] * v_m[0] + zeta[1] * v_m[1]).exp();
        let rhs = (tau * x).exp() * theta_phi_auto(alpha + tau, t, x).unwrap()
            / theta_phi_auto(alpha, t, x).unwrap();
        assert!((lhs - rhs).abs() <= 0.03 * rhs.abs(), "ratio {lhs} vs {rhs}");
    }
}
