//! SDE simulation: the conditioned diffusion in the unit interval and the
//! drifted three-dimensional Bessel supremum functional.

use crate::error::{Error, Result};
use crate::path::{Curve, Grid};
use rand::Rng;
use rand_distr::StandardNormal;

/// Euler-Maruyama simulation of `dZ = d beta + pi cot(pi Z) dt`, the
/// interval diffusion with entrance (non-exit) boundaries.
///
/// Near the walls the drift is capped so that one substep moves at most half
/// of the distance to the boundary, and the step is refined eightfold within
/// distance 0.01 of a wall; afterwards the state is clamped to
/// `[1e-9, 1 - 1e-9]`. Boundary starts are allowed.
pub fn simulate_z(z0: f64, grid: &Grid, rng: &mut impl Rng) -> Result<Curve> {
    if !(0.0..=1.0).contains(&z0) {
        return Err(Error::OutOfRange(format!("z0 must lie in [0,1], got {z0}")));
    }
    const DELTA: f64 = 1e-9;
    const REFINE_BAND: f64 = 0.01;
    let mut values = Vec::with_capacity(grid.len());
    values.push(z0);
    let mut z = z0.clamp(DELTA, 1.0 - DELTA);
    for _ in 0..grid.count() {
        let dist = z.min(1.0 - z);
        let substeps = if dist < REFINE_BAND { 8 } else { 1 };
        let h = grid.step() / substeps as f64;
        let sd = h.sqrt();
        for _ in 0..substeps {
            let zc = z.clamp(DELTA, 1.0 - DELTA);
            let d = zc.min(1.0 - zc);
            let cap = d / (2.0 * h);
            let drift = (std::f64::consts::PI * (std::f64::consts::PI * zc).cos()
                / (std::f64::consts::PI * zc).sin())
            .clamp(-cap, cap);
            let noise: f64 = rng.sample(StandardNormal);
            z = zc + drift * h + sd * noise;
        }
        z = z.clamp(DELTA, 1.0 - DELTA);
        values.push(z);
    }
    Ok(Curve { t0: 0.0, step: grid.step(), values })
}

/// One sample of `sup_t (rho_t - t)` where `rho` is the norm of a
/// three-dimensional Brownian motion with drift `(drift, 0, 0)`, simulated
/// exactly on the grid (Gaussian increments; the supremum is taken over the
/// nodes). Returns the supremum and whether the horizon-tail check
/// `rho_T - T < -5 sqrt(T)` held at the end.
pub fn bessel3_sup_sample(drift: f64, grid: &Grid, rng: &mut impl Rng) -> Result<(f64, bool)> {
    if drift < 0.0 {
        return Err(Error::OutOfRange(format!("drift must be >= 0, got {drift}")));
    }
    let sd = grid.step().sqrt();
    let mut w = [0.0f64; 3];
    let mut sup = 0.0f64; // value at t = 0
    let mut t = 0.0;
    for _ in 0..grid.count() {
        let n0: f64 = rng.sample(StandardNormal);
        let n1: f64 = rng.sample(StandardNormal);
        let n2: f64 = rng.sample(StandardNormal);
        w[0] += drift * grid.step() + sd * n0;
        w[1] += sd * n1;
        w[2] += sd * n2;
        t += grid.step();
        let rho = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        if rho - t > sup {
            sup = rho - t;
        }
    }
    let horizon = grid.horizon();
    let rho_end = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let tail_ok = rho_end - horizon < -5.0 * horizon.sqrt();
    Ok((sup, tail_ok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::q_cdf_table;
    use crate::mc::stats::ks_statistic;
    use crate::rng::substream;

    #[test]
    fn trajectories_stay_inside_the_open_interval() {
        let grid = Grid::new(1e-3, 1000).unwrap();
        for seed in 0..200u64 {
            let mut rng = substream(31, seed);
            let z0 = match seed % 4 {
                0 => 0.0,
                1 => 1.0,
                2 => 0.5,
                _ => 0.93,
            };
            let path = simulate_z(z0, &grid, &mut rng).unwrap();
            for (j, &v) in path.values.iter().enumerate() {
                if j > 0 {
                    assert!((1e-9..=1.0 - 1e-9).contains(&v), "seed {seed}, node {j}: {v}");
                }
            }
        }
        assert!(simulate_z(1.5, &grid, &mut substream(0, 0)).is_err());
    }

    #[test]
    fn long_run_histogram_matches_stationary_density() {
        // Stationary density of the cotangent drift is 2 sin^2(pi x); pool a
        // few independent chains of horizon 200 after burn-in.
        let grid = Grid::new(1e-3, 200_000).unwrap();
        let mut pooled = Vec::new();
        for chain in 0..4u64 {
            let mut rng = substream(77, chain);
            let path = simulate_z(0.5, &grid, &mut rng).unwrap();
            pooled.extend_from_slice(&path.values[10_000..]);
        }
        let cdf = |x: f64| -> f64 {
            // integral of 2 sin^2(pi y) on [0, x]
            let x = x.clamp(0.0, 1.0);
            x - (2.0 * std::f64::consts::PI * x).sin() / (2.0 * std::f64::consts::PI)
        };
        let d = ks_statistic(&pooled, cdf).unwrap();
        assert!(d <= 0.02, "stationary KS {d}");
    }

    #[test]
    fn marginal_matches_conditioned_kernel() {
        // Z_0 = 0.3, t = 0.5: terminal law against the conditioned kernel CDF.
        let grid = Grid::new(1e-3, 500).unwrap();
        let m = 10_000;
        let samples: Vec<f64> = (0..m)
            .map(|i| {
                let mut rng = substream(78, i);
                *simulate_z(0.3, &grid, &mut rng).unwrap().values.last().unwrap()
            })
            .collect();
        let table = q_cdf_table(0.5, 0.3, 2000).unwrap();
        let d = ks_statistic(&samples, |x| table.eval(x)).unwrap();
        assert!(d <= 0.02, "marginal KS {d}");
    }

    #[test]
    fn bessel_sup_is_nonnegative_and_reproducible() {
        let grid = Grid::new(1e-2, 1000).unwrap();
        let (a, _) = bessel3_sup_sample(0.5, &grid, &mut substream(5, 1)).unwrap();
        let (b, _) = bessel3_sup_sample(0.5, &grid, &mut substream(5, 1)).unwrap();
        assert_eq!(a, b);
        assert!(a >= 0.0);
        assert!(bessel3_sup_sample(-0.5, &grid, &mut substream(5, 2)).is_err());
    }
}
