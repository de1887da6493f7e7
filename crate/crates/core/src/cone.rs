//! Affine and dihedral cone data: root systems for the two-wall geometry,
//! exact samplers for the limiting string-parameter laws, membership tests
//! for the string cone and its polytopes, and the planar (dihedral)
//! approximation machinery.

use crate::error::{Error, Result};
use crate::numeric::digamma;
use crate::path::{Grid, Wall};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Simple roots of the affine picture in plane coordinates `(t, x)`:
/// `alpha_0 = (0, -2)`, `alpha_1 = (0, 2)`.
pub fn affine_root(wall: Wall) -> [f64; 2] {
    [0.0, 2.0 * wall.root_sign()]
}

/// Coroot functionals: `coalpha_0(t, x) = t - x`, `coalpha_1(t, x) = x`.
pub fn affine_coroot(wall: Wall, p: [f64; 2]) -> f64 {
    match wall {
        Wall::Zero => p[0] - p[1],
        Wall::One => p[1],
    }
}

/// Cartan pairing `coalpha_i(alpha_j)`; equals `[[2,-2],[-2,2]]`.
pub fn affine_cartan() -> [[f64; 2]; 2] {
    let walls = [Wall::Zero, Wall::One];
    let mut m = [[0.0; 2]; 2];
    for (i, wi) in walls.iter().enumerate() {
        for (j, wj) in walls.iter().enumerate() {
            m[i][j] = affine_coroot(*wi, affine_root(*wj));
        }
    }
    m
}

/// Kind tag for a vector of string parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "m")]
pub enum StringKind {
    Affine,
    Dihedral(usize),
}

/// Finite prefix of string parameters with its cone metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringVector {
    pub xs: Vec<f64>,
    pub kind: StringKind,
}

impl StringVector {
    pub fn affine(xs: Vec<f64>) -> StringVector {
        StringVector { xs, kind: StringKind::Affine }
    }

    pub fn dihedral(xs: Vec<f64>, m: usize) -> StringVector {
        StringVector { xs, kind: StringKind::Dihedral(m) }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// FNV-1a hash of the kind tag and the value bit patterns; reports
    /// reference sample sets by this hash for reproducibility.
    pub fn content_hash(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |byte: u8| {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        match self.kind {
            StringKind::Affine => eat(0),
            StringKind::Dihedral(m) => {
                eat(1);
                for b in (m as u64).to_le_bytes() {
                    eat(b);
                }
            }
        }
        for v in &self.xs {
            for b in v.to_bits().to_le_bytes() {
                eat(b);
            }
        }
        h
    }
}

/// Plane point used for weights; the time coordinate of weight points in the
/// affine picture is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPoint {
    pub t: f64,
    pub x: f64,
}

/// Denominator of the limiting string-parameter series:
/// `d_n = n(n+1) + (1-2 mu) nu_n`, `nu_n = n` for even `n`, `-(n+1)` for odd.
fn series_denominator(n: usize, mu: f64) -> f64 {
    let nf = n as f64;
    let nu = if n % 2 == 0 { nf } else { -(nf + 1.0) };
    nf * (nf + 1.0) + (1.0 - 2.0 * mu) * nu
}

/// Mean of the dropped terms `sum_{n > tail_n} 2 / d_n`, in closed form via
/// digamma. Used as the deterministic tail compensation of the sampler.
pub fn series_tail_mean(tail_n: usize, mu: f64) -> f64 {
    // Even n = 2j with 2j >= tail_n + 1, odd n = 2j + 1 with the same bound;
    // both partial fractions telescope into digamma differences.
    let je = (tail_n + 2) / 2; // smallest j with 2j > tail_n
    let jo = tail_n.div_ceil(2); // smallest j with 2j + 1 > tail_n
    let c = 1.0 / (2.0 * (1.0 - mu));
    let even = c * (digamma(je as f64 + 1.0 - mu) - digamma(je as f64));
    let odd = c * (digamma(jo as f64 + 1.0) - digamma(jo as f64 + mu));
    even + odd
}

/// Exact mean of the k-th limiting string parameter, `k >= 1`:
/// `E xi_k = k * sum_{n >= k} 2 / d_n`.
pub fn xi_mean(k: usize, mu: f64) -> f64 {
    assert!(k >= 1);
    k as f64 * series_tail_mean(k - 1, mu)
}

/// Sample the limiting affine string parameters `xi_0 ..= xi_k` from their
/// exponential-series representation, truncated at `tail_n` with the mean of
/// the dropped terms added back. Requires `0 < mu < 1` and `tail_n >= k + 1`.
pub fn verma_sample_affine(
    mu: f64,
    k: usize,
    tail_n: usize,
    rng: &mut impl Rng,
) -> Result<StringVector> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::OutOfRange(format!("mu must lie in (0,1), got {mu}")));
    }
    if tail_n < k + 1 {
        return Err(Error::OutOfRange(format!("tail_n {tail_n} < k + 1 = {}", k + 1)));
    }
    let eps: Vec<f64> = (0..=tail_n).map(|_| rng.sample(Exp1)).collect();
    verma_from_exponentials(mu, k, &eps)
}

/// Deterministic core of [`verma_sample_affine`]: build the string vector
/// from explicit exponential variates (index 0 ..= tail_n).
pub fn verma_from_exponentials(mu: f64, k: usize, eps: &[f64]) -> Result<StringVector> {
    let tail_n = eps.len() - 1;
    if tail_n < k + 1 {
        return Err(Error::OutOfRange("not enough variates".into()));
    }
    let tail = series_tail_mean(tail_n, mu);
    // Suffix sums S_j = sum_{n=j}^{tail_n} 2 eps_n / d_n.
    let mut suffix = vec![0.0; tail_n + 2];
    for j in (1..=tail_n).rev() {
        suffix[j] = suffix[j + 1] + 2.0 * eps[j] / series_denominator(j, mu);
    }
    let mut xs = Vec::with_capacity(k + 1);
    xs.push(eps[0] / (2.0 * (1.0 - mu)));
    for j in 1..=k {
        xs.push(j as f64 * (suffix[j] + tail));
    }
    Ok(StringVector::affine(xs))
}

/// Sample the limit weight coordinate
/// `D = sum_n (eps_{2n+1}/(n+mu) - eps_{2n}/(n+1-mu))`, truncated at
/// `n_pairs` pairs with the deterministic mean of the tail added back.
pub fn verma_weight_sample(mu: f64, n_pairs: usize, rng: &mut impl Rng) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::OutOfRange(format!("mu must lie in (0,1), got {mu}")));
    }
    let mut acc = 0.0;
    for n in 0..n_pairs {
        let e_even: f64 = rng.sample(Exp1);
        let e_odd: f64 = rng.sample(Exp1);
        acc += e_odd / (n as f64 + mu) - e_even / (n as f64 + 1.0 - mu);
    }
    // Tail mean: sum_{n >= N} (1/(n+mu) - 1/(n+1-mu)) = psi(N+1-mu) - psi(N+mu).
    let nf = n_pairs as f64;
    Ok(acc + digamma(nf + 1.0 - mu) - digamma(nf + mu))
}

/// Half-corrected partial weight `M_k = sum_{n<k} x_n alpha_n + x_k alpha_k / 2`
/// of an affine string vector, as a plane point (its time coordinate is 0).
pub fn partial_weight(xs: &StringVector, k: usize) -> Result<WeightPoint> {
    if k >= xs.xs.len() {
        return Err(Error::OutOfRange(format!(
            "index {k} out of range for {} parameters",
            xs.xs.len()
        )));
    }
    let mut x = 0.0;
    for (n, &v) in xs.xs.iter().take(k).enumerate() {
        x += 2.0 * Wall::from_index(n).root_sign() * v;
    }
    x += Wall::from_index(k).root_sign() * xs.xs[k];
    Ok(WeightPoint { t: 0.0, x })
}

/// Membership in the string cone: `x_0 >= 0` and
/// `x_k / a_k >= x_{k+1} / a_{k+1} >= 0` with `a_k = k` in the affine case
/// and `a_k = sin(k pi / m)` in the dihedral case. Finite vectors are read
/// as finitely supported sequences, so the partial weights are eventually
/// constant and their convergence (Cauchy tolerance 1e-9) holds vacuously.
pub fn in_gamma(xs: &StringVector) -> bool {
    let v = &xs.xs;
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return false;
    }
    if v[0] < 0.0 {
        return false;
    }
    let ratio = |k: usize| -> f64 {
        match xs.kind {
            StringKind::Affine => v[k] / k as f64,
            StringKind::Dihedral(m) => v[k] / (k as f64 * PI / m as f64).sin(),
        }
    };
    if let StringKind::Dihedral(m) = xs.kind {
        if v.len() > m {
            return false;
        }
    }
    for k in 1..v.len() {
        if v[k] < 0.0 {
            return false;
        }
        if k + 1 < v.len() && ratio(k) < ratio(k + 1) - 1e-15 {
            return false;
        }
    }
    true
}

/// Membership in the string polytope of highest weight `lambda`:
/// for every `k <= k_max`,
/// `coalpha_k( lambda - sigma(x) + sum_{i<k} x_i alpha_i + x_k alpha_k / 2 ) >= 0`,
/// with `sigma(x)` read from the full prefix.
pub fn in_gamma_lambda(xs: &StringVector, lambda: WeightPoint, k_max: usize) -> Result<bool> {
    gamma_lambda_check(xs, lambda, k_max, 0.5)
}

/// Same check with an adjustable coefficient on the top string term; the
/// correct value is 1/2 and tests probe the sensitivity of the condition.
pub(crate) fn gamma_lambda_check(
    xs: &StringVector,
    lambda: WeightPoint,
    k_max: usize,
    top_coeff: f64,
) -> Result<bool> {
    if xs.kind != StringKind::Affine {
        return Err(Error::Domain("polytope membership is an affine-kind check".into()));
    }
    if xs.xs.is_empty() || k_max >= xs.xs.len() {
        return Err(Error::OutOfRange("k_max exceeds vector length".into()));
    }
    // sigma estimated by the half-corrected partial weight at the last index.
    let sigma = partial_weight(xs, xs.xs.len() - 1)?;
    let mut prefix = 0.0; // x-coordinate of sum_{i<k} x_i alpha_i
    for k in 0..=k_max {
        let wall = Wall::from_index(k);
        let mk = prefix + 2.0 * top_coeff * wall.root_sign() * xs.xs[k];
        let point = [lambda.t - sigma.t, lambda.x - sigma.x + mk];
        if affine_coroot(wall, point) < 0.0 {
            return Ok(false);
        }
        prefix += 2.0 * wall.root_sign() * xs.xs[k];
    }
    Ok(true)
}

/// Root data of the dihedral group of order `2m` acting on the plane, with
/// the wedge of angle `pi / m` as its fundamental cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DihedralConfig {
    m: usize,
}

impl DihedralConfig {
    pub fn new(m: usize) -> Result<DihedralConfig> {
        if m < 2 {
            return Err(Error::OutOfRange(format!("dihedral order parameter m={m} < 2")));
        }
        Ok(DihedralConfig { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `v_0 = (2 sin(pi/m), -2 cos(pi/m))`, `v_1 = (0, 2)`; indices mod 2.
    pub fn root(&self, k: usize) -> [f64; 2] {
        let a = PI / self.m as f64;
        if k % 2 == 0 {
            [2.0 * a.sin(), -2.0 * a.cos()]
        } else {
            [0.0, 2.0]
        }
    }

    /// Coroot functional `v~_k(p) = <v_k, p> / 2`.
    pub fn coroot(&self, k: usize, p: [f64; 2]) -> f64 {
        let v = self.root(k);
        0.5 * (v[0] * p[0] + v[1] * p[1])
    }

    /// Exponential rate attached to drift `gamma` at level `k`:
    /// `gamma_k = <gamma, v_k>`.
    pub fn gamma_coord(&self, gamma: [f64; 2], k: usize) -> f64 {
        let v = self.root(k);
        gamma[0] * v[0] + gamma[1] * v[1]
    }

    /// `a_k = sin(k pi / m)`.
    pub fn a(&self, k: usize) -> f64 {
        (k as f64 * PI / self.m as f64).sin()
    }

    /// Length of the longest word; also the number of string parameters.
    pub fn longest_word_len(&self) -> usize {
        self.m
    }

    /// Reflection `s_k(p) = p - v~_k(p) v_k`.
    pub fn reflection(&self, k: usize, p: [f64; 2]) -> [f64; 2] {
        let c = self.coroot(k, p);
        let v = self.root(k);
        [p[0] - c * v[0], p[1] - c * v[1]]
    }

    pub fn in_closed_cone(&self, p: [f64; 2]) -> bool {
        self.coroot(0, p) >= 0.0 && self.coroot(1, p) >= 0.0
    }

    /// Cartan pairing `v~_i(v_j)`.
    pub fn cartan(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = self.coroot(i, self.root(j));
            }
        }
        out
    }
}

/// The scaling `tau_m(t, x) = (pi t / m, x)` that carries dihedral data to
/// affine data as `m` grows.
pub fn tau_map(m: usize, p: [f64; 2]) -> [f64; 2] {
    [PI * p[0] / m as f64, p[1]]
}

/// Inverse scaling.
pub fn tau_map_inv(m: usize, p: [f64; 2]) -> [f64; 2] {
    [m as f64 * p[0] / PI, p[1]]
}

/// Planar path on a uniform grid, starting from the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPath {
    grid: Grid,
    points: Vec<[f64; 2]>,
}

impl PlanarPath {
    pub fn new(grid: Grid, points: Vec<[f64; 2]>) -> Result<PlanarPath> {
        if points.len() != grid.len() {
            return Err(Error::InvalidPath(format!(
                "expected {} points, got {}",
                grid.len(),
                points.len()
            )));
        }
        if points[0] != [0.0, 0.0] {
            return Err(Error::InvalidPath("planar path must start at the origin".into()));
        }
        Ok(PlanarPath { grid, points })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> [f64; 2]) -> Result<PlanarPath> {
        let points = (0..grid.len()).map(|j| f(grid.time(j))).collect();
        PlanarPath::new(grid, points)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn terminal(&self) -> [f64; 2] {
        *self.points.last().unwrap()
    }

    /// Planar Brownian motion with the given drift and identity covariance.
    pub fn brownian(drift: [f64; 2], grid: &Grid, rng: &mut impl Rng) -> PlanarPath {
        let sd = grid.step().sqrt();
        let mut points = Vec::with_capacity(grid.len());
        let mut cur = [0.0, 0.0];
        points.push(cur);
        for _ in 0..grid.count() {
            let z0: f64 = rng.sample(rand_distr::StandardNormal);
            let z1: f64 = rng.sample(rand_distr::StandardNormal);
            cur = [cur[0] + drift[0] * grid.step() + sd * z0, cur[1] + drift[1] * grid.step() + sd * z1];
            points.push(cur);
        }
        PlanarPath { grid: *grid, points }
    }
}

/// One dihedral Pitman transform:
/// `P_k eta(t) = eta(t) - inf_{s<=t} v~_k(eta(s)) v_k`, infima over nodes.
/// Returns the transformed path and the terminal string value `-inf`.
pub fn dihedral_pitman_traced(path: &PlanarPath, cfg: &DihedralConfig, k: usize) -> (PlanarPath, f64) {
    let v = cfg.root(k);
    let mut running = 0.0f64;
    let points = path
        .points
        .iter()
        .map(|p| {
            let c = cfg.coroot(k, *p);
            if c < running {
                running = c;
            }
            [p[0] - running * v[0], p[1] - running * v[1]]
        })
        .collect();
    (
        PlanarPath { grid: path.grid, points },
        -running,
    )
}

/// Dihedral Pitman transform at wall `k` (mod 2).
pub fn dihedral_pitman(path: &PlanarPath, cfg: &DihedralConfig, k: usize) -> PlanarPath {
    dihedral_pitman_traced(path, cfg, k).0
}

/// String parameters along the longest word `s_{m-1} ... s_1 s_0`: `m`
/// values, plus the fully transformed path (which lies in the closed cone).
pub fn dihedral_strings(path: &PlanarPath, cfg: &DihedralConfig) -> (StringVector, PlanarPath) {
    let mut xs = Vec::with_capacity(cfg.m);
    let mut cur = path.clone();
    for k in 0..cfg.m {
        let (next, x) = dihedral_pitman_traced(&cur, cfg, k);
        xs.push(x);
        cur = next;
    }
    (StringVector::dihedral(xs, cfg.m), cur)
}

/// Exact sampler of the limiting dihedral string parameters for a drift
/// strictly inside the cone: `x_0 = eps_0 / gamma_0` and
/// `x_k = a_k sum_{l=k}^{m-1} eps_l / (gamma_1 a_1 + ... + gamma_l a_l)`.
pub fn dihedral_verma_sample(
    gamma: [f64; 2],
    cfg: &DihedralConfig,
    rng: &mut impl Rng,
) -> Result<StringVector> {
    let eps: Vec<f64> = (0..cfg.m).map(|_| rng.sample(Exp1)).collect();
    dihedral_verma_from_exponentials(gamma, cfg, &eps)
}

/// Deterministic core of [`dihedral_verma_sample`].
pub fn dihedral_verma_from_exponentials(
    gamma: [f64; 2],
    cfg: &DihedralConfig,
    eps: &[f64],
) -> Result<StringVector> {
    if cfg.coroot(0, gamma) <= 0.0 || cfg.coroot(1, gamma) <= 0.0 {
        return Err(Error::Domain("drift must lie strictly inside the cone".into()));
    }
    if eps.len() < cfg.m {
        return Err(Error::OutOfRange("need m exponential variates".into()));
    }
    let m = cfg.m;
    // Partial sums gamma_1 a_1 + ... + gamma_l a_l.
    let mut denom = vec![0.0; m];
    let mut acc = 0.0;
    for l in 1..m {
        acc += cfg.gamma_coord(gamma, l) * cfg.a(l);
        denom[l] = acc;
    }
    let mut xs = vec![0.0; m];
    xs[0] = eps[0] / cfg.gamma_coord(gamma, 0);
    // Suffix sums of eps_l / denom_l.
    let mut suffix = 0.0;
    let mut suffixes = vec![0.0; m];
    for l in (1..m).rev() {
        suffix += eps[l] / denom[l];
        suffixes[l] = suffix;
    }
    for (k, xk) in xs.iter_mut().enumerate().skip(1) {
        *xk = cfg.a(k) * suffixes[k];
    }
    Ok(StringVector::dihedral(xs, m))
}
