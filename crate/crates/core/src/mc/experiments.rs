//! End-to-end experiments: the corrected transform pipeline against the
//! conditioned-diffusion kernels, the two string-parameter samplers against
//! each other and against their closed-form laws, the Bessel supremum
//! representation, the conditional Laplace identity, and the dihedral layer.
//!
//! Every experiment is a pure function of its configuration; paths use one
//! RNG substream per sample index, so reports are bit-reproducible.

use crate::cone::{dihedral_verma_sample, verma_sample_affine, xi_mean, DihedralConfig, StringVector};
use crate::error::{Error, Result};
use crate::laws::{
    h_dihedral_scaled, psi_dihedral, q_cdf_table, s_entrance, theta_phi_auto, xi1_cdf_half,
    xi1_cdf_one,
};
use crate::mc::stats::{ks_statistic, ks_two_sample, mean_and_se};
use crate::numeric::{CdfTable, DISCRETE_MIN_BIAS};
use crate::path::{brownian_with, wall_transform_in_place, Grid, Wall};
use crate::report::ExperimentReport;
use crate::rng::substream;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mu: f64,
    pub t_eval: f64,
    pub n_transforms: usize,
    pub n_paths: usize,
    pub step: f64,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mu: 0.5,
            t_eval: 1.0,
            n_transforms: 12,
            n_paths: 20_000,
            step: 1e-4,
            seed: 7,
            tolerance: 0.03,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::OutOfRange(format!("mu must lie in [0,1], got {}", self.mu)));
        }
        if !(self.step > 0.0) || !(self.t_eval > 0.0) {
            return Err(Error::OutOfRange("step and t_eval must be positive".into()));
        }
        if self.n_paths == 0 {
            return Err(Error::OutOfRange("need at least one path".into()));
        }
        Ok(())
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Distribution-level sqrt(step) Richardson: sort the fine- and coarse-grid
/// extractions (built from the same paths, stride-4 subsample) and
/// extrapolate matched order statistics. Removes the O(sqrt(step)) bias of
/// discrete running minima without the noise amplification of a pathwise
/// extrapolation.
fn quantile_extrapolate(mut fine: Vec<f64>, mut coarse: Vec<f64>) -> Vec<f64> {
    fine.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    coarse.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    fine.iter()
        .zip(&coarse)
        .map(|(f, c)| (2.0 * f - c).max(0.0))
        .collect()
}

/// Apply `levels` alternating Pitman transforms to the value buffer,
/// returning the terminal value after each level and the string parameters.
fn level_sweep(step: f64, values: &mut [f64], start: Wall, levels: usize) -> (Vec<f64>, Vec<f64>) {
    let mut terminals = Vec::with_capacity(levels);
    let mut xis = Vec::with_capacity(levels);
    for j in 0..levels {
        let xi = wall_transform_in_place(step, values, start.offset(j), 2.0);
        terminals.push(*values.last().unwrap());
        xis.push(xi);
    }
    (terminals, xis)
}

/// Representation check for the conditioned interval diffusion: simulate
/// drifted Brownian paths on horizon `1/t_eval`, apply the corrected
/// transform pipeline, scale by `t_eval`, and compare with the marginal of
/// the conditioned diffusion started at `mu`.
///
/// Also checks that the two start orders give indistinguishable samples and
/// that without the final correction consecutive iteration levels stay apart
/// by twice a string parameter whose mean is near 2.
pub fn run_main_theorem(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let horizon = 1.0 / cfg.t_eval;
    let count = (horizon / cfg.step).round().max(2.0) as usize;
    let grid = Grid::new(cfg.step, count)?;
    let t_used = 1.0 / grid.horizon();
    let n_max = cfg.n_transforms;
    let mut checkpoints: Vec<usize> = [4usize, 8, 12, 16, 20, 24]
        .into_iter()
        .filter(|&n| n < n_max)
        .chain(std::iter::once(n_max))
        .collect();
    checkpoints.dedup();

    struct PathOut {
        corrected0: Vec<f64>,
        corrected1: Vec<f64>,
        gap: f64,
    }

    let levels = n_max + 2;
    let outs: Vec<PathOut> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed, i);
            let base = brownian_with(cfg.mu, &grid, &mut rng);
            let mut per_start = Vec::with_capacity(2);
            let mut gap = 0.0;
            for start in [Wall::Zero, Wall::One] {
                let mut vals = base.values().to_vec();
                let (terms, xis) = level_sweep(cfg.step, &mut vals, start, levels);
                // The two pipelines share one wall-index sequence: the
                // start-1 chain at depth n applies walls 1..n, one transform
                // fewer, so its checkpoint for depth n is level n - 1. Both
                // then end with the same correction wall.
                let corrected: Vec<f64> = checkpoints
                    .iter()
                    .map(|&n| {
                        let lvl = if start == Wall::Zero { n } else { n - 1 };
                        t_used * (terms[lvl] + start.offset(lvl + 1).root_sign() * xis[lvl + 1])
                    })
                    .collect();
                if start == Wall::Zero {
                    gap = t_used * (terms[n_max + 1] - terms[n_max]).abs();
                }
                per_start.push(corrected);
            }
            let corrected1 = per_start.pop().unwrap();
            let corrected0 = per_start.pop().unwrap();
            PathOut { corrected0, corrected1, gap }
        })
        .collect();

    let mut report = ExperimentReport::new("main-theorem", cfg.to_json());
    report.note(format!("horizon {} ({} nodes), evaluation time {}", grid.horizon(), count, t_used));

    let table = q_cdf_table(cfg.t_eval, cfg.mu, 4000)?;
    let mut ks_by_checkpoint = Vec::new();
    for (ci, &n) in checkpoints.iter().enumerate() {
        let samples: Vec<f64> = outs.iter().map(|o| o.corrected0[ci]).collect();
        let d = ks_statistic(&samples, |x| table.eval(x))?;
        report.stat(format!("ks_n{n}"), d);
        ks_by_checkpoint.push(d);
    }
    let ks_final = *ks_by_checkpoint.last().unwrap();
    report.check("ks_final", ks_final, ks_final <= cfg.tolerance);
    // Convergence direction in n: non-increasing KS up to a noise slack that
    // scales with the Monte Carlo resolution.
    let slack = (1.0 / cfg.n_paths as f64).sqrt().max(0.005);
    let monotone = ks_by_checkpoint.windows(2).all(|w| w[1] <= w[0] + slack);
    report.check("ks_monotone_in_n", monotone as usize as f64, monotone);

    let final_ci = checkpoints.len() - 1;
    let s0: Vec<f64> = outs.iter().map(|o| o.corrected0[final_ci]).collect();
    let s1: Vec<f64> = outs.iter().map(|o| o.corrected1[final_ci]).collect();
    let mut d_start = 0.0;
    for (ci, &n) in checkpoints.iter().enumerate() {
        let a: Vec<f64> = outs.iter().map(|o| o.corrected0[ci]).collect();
        let b: Vec<f64> = outs.iter().map(|o| o.corrected1[ci]).collect();
        d_start = ks_two_sample(&a, &b)?;
        report.stat(format!("ks_two_sample_start_n{n}"), d_start);
    }
    // The 0.02 start-order tolerance is resolvable only when the two-sample
    // noise floor sits below it; smaller runs report the statistic without
    // gating on it.
    if 1.63 * (2.0 / cfg.n_paths as f64).sqrt() <= 0.02 {
        report.check("ks_two_sample_start", d_start, d_start <= 0.02);
    } else {
        report.stat("ks_two_sample_start", d_start);
        report.note("too few paths to resolve the 0.02 start-order tolerance");
    }

    // Without the final correction, consecutive levels differ by twice a
    // string parameter whose limit is 2; reported as an estimate of that
    // parameter. How close it gets to 2 depends on the grid resolution (deep
    // levels need fine grids), so the window check lives with the callers
    // that fix both.
    let gaps: Vec<f64> = outs.iter().map(|o| o.gap).collect();
    let (gap_mean, gap_se) = mean_and_se(&gaps)?;
    report.stat("uncorrected_gap_mean", gap_mean);
    report.stat("uncorrected_gap_se", gap_se);
    report.stat("uncorrected_gap_xi_estimate", gap_mean / (2.0 * cfg.t_eval));
    let (mean_final, se_final) = mean_and_se(&s0)?;
    report.stat("mean_final", mean_final);
    report.stat("se_final", se_final);
    report.attach_samples(format!("corrected_start0_n{n_max}"), s0);
    report.attach_samples(format!("corrected_start1_n{n_max}"), s1);
    Ok(report)
}

/// Compare the transform-based limiting string parameters (long horizon)
/// with the exponential-series sampler, coordinate by coordinate, and both
/// against the Jacobi-product law of the first parameter at `mu = 1/2`.
pub fn run_verma_consistency(
    cfg: &ExperimentConfig,
    horizon: f64,
    k_max: usize,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if !(cfg.mu > 0.0 && cfg.mu < 1.0) {
        return Err(Error::OutOfRange("limiting string parameters need mu in (0,1)".into()));
    }
    let count = 4 * (horizon / (4.0 * cfg.step)).round() as usize;
    let grid = Grid::new(cfg.step, count)?;

    // Transform pipeline, one path per sample. The discrete running minima
    // carry an O(sqrt(step)) bias that compounds through the levels, so each
    // path is also extracted on its own stride-4 subsample and the
    // per-coordinate laws are Richardson extrapolated at the quantile level.
    let coarse_grid = Grid::new(4.0 * cfg.step, count / 4)?;
    let both: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed, i);
            let base = brownian_with(cfg.mu, &grid, &mut rng);
            let mut fine = base.values().to_vec();
            let mut coarse: Vec<f64> = base.values().iter().step_by(4).copied().collect();
            let (_, xi_f) = level_sweep(cfg.step, &mut fine, Wall::Zero, k_max + 1);
            let (_, xi_c) = level_sweep(coarse_grid.step(), &mut coarse, Wall::Zero, k_max + 1);
            (xi_f, xi_c)
        })
        .collect();
    let transform: Vec<Vec<f64>> = (0..=k_max)
        .map(|k| {
            quantile_extrapolate(
                both.iter().map(|(f, _)| f[k]).collect(),
                both.iter().map(|(_, c)| c[k]).collect(),
            )
        })
        .collect();

    // Series sampler with an independent seed stream.
    let tail_n = 4000;
    let series_rows: Vec<Vec<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed ^ 0x5eed_5eed, i);
            verma_sample_affine(cfg.mu, k_max, tail_n, &mut rng).unwrap().xs
        })
        .collect();
    let series: Vec<Vec<f64>> = (0..=k_max)
        .map(|k| series_rows.iter().map(|r| r[k]).collect())
        .collect();

    let mut report = ExperimentReport::new("verma-consistency", cfg.to_json());
    report.note(format!(
        "horizon {horizon}, series tail at {tail_n}, quantile-level sqrt(step) extrapolation \
         of the transform minima between steps {} and {}",
        cfg.step,
        4.0 * cfg.step
    ));

    for k in 0..=k_max {
        let d = ks_two_sample(&transform[k], &series[k])?;
        report.check(format!("ks_two_sample_k{k}"), d, d <= cfg.tolerance);
    }

    // xi_0 is exponential with rate 2(1 - mu).
    let target = 1.0 / (2.0 * (1.0 - cfg.mu));
    for (name, data) in [("transform", &transform), ("series", &series)] {
        let (mean, se) = mean_and_se(&data[0])?;
        report.check(
            format!("xi0_mean_{name}"),
            mean,
            (mean - target).abs() <= 3.0 * se,
        );
    }

    // At mu = 1/2 the first parameter follows the triple Jacobi product.
    if (cfg.mu - 0.5).abs() < 1e-12 && k_max >= 1 {
        for (name, data) in [("transform", &transform), ("series", &series)] {
            let d = ks_statistic(&data[1], |x| xi1_cdf_half(x).unwrap_or(0.0))?;
            report.check(format!("ks_xi1_jacobi_{name}"), d, d <= cfg.tolerance);
        }
    }
    for (name, data) in [("transform", &transform), ("series", &series)] {
        for (k, xs) in data.iter().enumerate() {
            let hash = StringVector::affine(xs.clone()).content_hash();
            report.note(format!("{name} k{k} sample content hash {hash:016x}"));
        }
        report.attach_samples(format!("{name}_k1"), data[1].clone());
    }
    Ok(report)
}

/// String parameters approach 2: exact series means at large `k`, and
/// transform-based means at `t = t_eval` over growing `k`.
pub fn run_xi_limit(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if !(cfg.mu > 0.0 && cfg.mu < 1.0) {
        return Err(Error::OutOfRange("series means need mu in (0,1)".into()));
    }
    let mut report = ExperimentReport::new("xi-limit", cfg.to_json());

    // Deterministic series evaluation of E xi_k.
    let m50 = xi_mean(50, cfg.mu);
    report.check("series_mean_k50", m50, (m50 - 2.0).abs() <= 0.02);
    let m10 = xi_mean(10, cfg.mu);
    let m100 = xi_mean(100, cfg.mu);
    report.stat("series_mean_k10", m10);
    report.stat("series_mean_k100", m100);
    report.check(
        "series_gap_decreasing",
        ((m100 - 2.0).abs() < (m50 - 2.0).abs() && (m50 - 2.0).abs() < (m10 - 2.0).abs()) as usize
            as f64,
        (m100 - 2.0).abs() < (m50 - 2.0).abs(),
    );

    // Transform-based means at fixed time. The discrete running minimum at
    // level k carries an O(k sqrt(h)) bias (deep levels live on fine time
    // scales), so each level uses a step scaled like 1/k^2 and the remaining
    // bias is removed by sqrt(h)-Richardson extrapolation between h and 4h.
    let ks = [4usize, 8, 16];
    let mut gaps = Vec::new();
    let mut ses = Vec::new();
    for &k in &ks {
        let h = cfg.step * (8.0 / k as f64) * (8.0 / k as f64);
        let mean_at = |step: f64, seed: u64| -> Result<(f64, f64)> {
            let count = (cfg.t_eval / step).round() as usize;
            let grid = Grid::new(step, count)?;
            let xs: Vec<f64> = (0..cfg.n_paths as u64)
                .into_par_iter()
                .map(|i| {
                    let mut rng = substream(seed, i);
                    let base = brownian_with(cfg.mu, &grid, &mut rng);
                    let mut vals = base.values().to_vec();
                    let (_, xis) = level_sweep(step, &mut vals, Wall::Zero, k + 1);
                    xis[k]
                })
                .collect();
            mean_and_se(&xs)
        };
        let (coarse, se_c) = mean_at(4.0 * h, cfg.seed ^ 0xa5a5)?;
        let (fine, se_f) = mean_at(h, cfg.seed)?;
        let mean = 2.0 * fine - coarse;
        let se = (4.0 * se_f * se_f + se_c * se_c).sqrt();
        report.stat(format!("transform_mean_k{k}"), mean);
        report.stat(format!("transform_se_k{k}"), se);
        report.stat(format!("transform_raw_mean_k{k}"), fine);
        gaps.push((mean - 2.0).abs());
        ses.push(se);
    }
    report.note("transform means are sqrt(step)-Richardson extrapolated, step scaled by 64/k^2");
    // Gap to 2 shrinks monotonically within two combined standard errors.
    let mut monotone = true;
    for j in 1..gaps.len() {
        if gaps[j] > gaps[j - 1] + 2.0 * (ses[j] + ses[j - 1]) {
            monotone = false;
        }
    }
    report.check("transform_gap_monotone", monotone as usize as f64, monotone);
    Ok(report)
}

/// The first string parameter as a Bessel supremum: simulate
/// `sup_t(rho_t - t)` for the norm of a 3d Brownian motion with drift
/// `1 - mu` and compare with the closed-form law at `mu` (supported at
/// `mu = 1/2` and `mu = 1`).
pub fn run_bessel_sup(cfg: &ExperimentConfig, horizon: f64) -> Result<ExperimentReport> {
    cfg.validate()?;
    let drift = 1.0 - cfg.mu;
    let cdf: Box<dyn Fn(f64) -> f64 + Sync> = if (cfg.mu - 0.5).abs() < 1e-12 {
        Box::new(|x: f64| xi1_cdf_half(x).unwrap_or(0.0))
    } else if (cfg.mu - 1.0).abs() < 1e-12 {
        Box::new(|x: f64| xi1_cdf_one(x).unwrap_or(0.0))
    } else {
        return Err(Error::OutOfRange(
            "closed-form comparison law available at mu = 1/2 and mu = 1 only".into(),
        ));
    };
    let count = (horizon / cfg.step).round() as usize;
    let grid = Grid::new(cfg.step, count)?;
    let bias = DISCRETE_MIN_BIAS * cfg.step.sqrt();
    let results: Vec<(f64, bool)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed, i);
            let (sup, tail_ok) =
                crate::mc::sim::bessel3_sup_sample(drift, &grid, &mut rng).unwrap();
            (sup + bias, tail_ok)
        })
        .collect();
    let samples: Vec<f64> = results.iter().map(|r| r.0).collect();
    let tail_risk =
        results.iter().filter(|r| !r.1).count() as f64 / results.len() as f64;
    let mut report = ExperimentReport::new("bessel-sup", cfg.to_json());
    report.note(format!(
        "drift {drift}, horizon {horizon}, discrete-supremum bias compensation {bias:.2e}"
    ));
    let d = ks_statistic(&samples, |x| cdf(x))?;
    report.check("ks", d, d <= cfg.tolerance);
    // Fraction of paths where the end state does not certify a negligible
    // post-horizon supremum; reported, not failed.
    report.stat("tail_risk_fraction", tail_risk);
    let (mean, se) = mean_and_se(&samples)?;
    report.stat("sup_mean", mean);
    report.stat("sup_se", se);
    report.attach_samples("sup", samples);
    Ok(report)
}

/// Conditional Laplace identity: bin paths by the corrected-limit endpoint
/// (the highest-weight marginal), then compare in-bin empirical exponential
/// moments of the underlying Brownian endpoint against
/// `e^{tau lambda} phi_{tau+mu}(t, lambda) / phi_mu(t, lambda)`.
pub fn run_cond_laplace(cfg: &ExperimentConfig, taus: &[f64]) -> Result<ExperimentReport> {
    cfg.validate()?;
    let t = cfg.t_eval;
    let count = (t / cfg.step).round() as usize;
    let grid = Grid::new(cfg.step, count)?;
    let n_bins = 20usize;

    let pairs: Vec<(f64, f64)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed, i);
            let base = brownian_with(cfg.mu, &grid, &mut rng);
            let x_term = base.terminal();
            let mut vals = base.values().to_vec();
            let (terms, xis) =
                level_sweep(cfg.step, &mut vals, Wall::Zero, cfg.n_transforms + 2);
            let lambda = terms[cfg.n_transforms]
                + Wall::Zero.offset(cfg.n_transforms + 1).root_sign() * xis[cfg.n_transforms + 1];
            (x_term, lambda)
        })
        .collect();

    // Equal-probability bins of the theoretical highest-weight marginal.
    let marginal = CdfTable::from_density(
        |y| {
            if y <= 0.0 || y >= t {
                0.0
            } else {
                s_entrance(cfg.mu, t, y).unwrap_or(0.0)
            }
        },
        0.0,
        t,
        2000,
    );
    let edges: Vec<f64> = (0..=n_bins).map(|j| marginal.quantile(j as f64 / n_bins as f64)).collect();
    let centers: Vec<f64> =
        (0..n_bins).map(|j| marginal.quantile((j as f64 + 0.5) / n_bins as f64)).collect();

    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for &(x, lambda) in &pairs {
        let mut j = edges.partition_point(|&e| e < lambda);
        j = j.saturating_sub(1).min(n_bins - 1);
        bins[j].push(x);
    }

    let mut report = ExperimentReport::new("cond-laplace", cfg.to_json());
    report.note(format!("{n_bins} equal-probability bins of the highest-weight marginal"));
    let center_range = n_bins / 4..3 * n_bins / 4;
    let mut empty = 0usize;
    for (j, b) in bins.iter().enumerate() {
        if b.is_empty() {
            empty += 1;
        }
        report.stat(format!("bin{j:02}_count"), b.len() as f64);
    }
    report.stat("empty_bins", empty as f64);

    let formula = |tau: f64, lam: f64| -> Result<f64> {
        let lam = lam.clamp(1e-6, t - 1e-6);
        Ok((tau * lam).exp() * theta_phi_auto(tau + cfg.mu, t, lam)?
            / theta_phi_auto(cfg.mu, t, lam)?)
    };

    // tau = 0 sanity: ratio is identically 1 on every bin.
    report.stat("tau0_identity_gap", 0.0);

    let mut emp_by_tau: Vec<Vec<Option<f64>>> = Vec::new();
    let mut form_by_tau: Vec<Vec<f64>> = Vec::new();
    for &tau in taus {
        let mut emp_row = Vec::with_capacity(n_bins);
        let mut form_row = Vec::with_capacity(n_bins);
        let mut worst_center: f64 = 0.0;
        for j in 0..n_bins {
            let f = formula(tau, centers[j])?;
            form_row.push(f);
            if bins[j].len() >= 500 {
                let e = bins[j].iter().map(|&x| (tau * x).exp()).sum::<f64>()
                    / bins[j].len() as f64;
                emp_row.push(Some(e));
                if center_range.contains(&j) {
                    worst_center = worst_center.max((e / f - 1.0).abs());
                }
            } else {
                emp_row.push(None);
            }
        }
        report.stat(format!("center_agreement_tau{tau}"), worst_center);
        emp_by_tau.push(emp_row);
        form_by_tau.push(form_row);
    }

    // Trend consistency across tau for the center bins.
    let mut consistent = 0usize;
    let mut tested = 0usize;
    if taus.len() >= 2 {
        for j in center_range.clone() {
            let vals: Vec<f64> = (0..taus.len())
                .filter_map(|ti| emp_by_tau[ti][j])
                .collect();
            if vals.len() != taus.len() {
                continue;
            }
            tested += 1;
            let mut ok = true;
            for ti in 1..taus.len() {
                let emp_dir = vals[ti] - vals[ti - 1];
                let form_dir = form_by_tau[ti][j] - form_by_tau[ti - 1][j];
                if emp_dir * form_dir < 0.0 {
                    ok = false;
                }
            }
            if ok {
                consistent += 1;
            }
        }
    }
    let trend_ok = tested > 0 && consistent as f64 >= 0.8 * tested as f64;
    report.check("trend_consistent_bins", consistent as f64, trend_ok);
    report.stat("trend_tested_bins", tested as f64);
    report.attach_samples("endpoint", pairs.iter().map(|p| p.0).collect());
    report.attach_samples("highest_weight", pairs.iter().map(|p| p.1).collect());
    Ok(report)
}

/// Dihedral layer: the exact sampler against the transform-based string
/// parameters at small `m`, plus the large-`m` limits of the alternating
/// sums toward `sin(alpha pi)` and the theta function.
pub fn run_dihedral(cfg: &ExperimentConfig, m: usize, horizon: f64) -> Result<ExperimentReport> {
    cfg.validate()?;
    let dihedral = DihedralConfig::new(m)?;
    let gamma = [m as f64 / PI, cfg.mu];

    // The string extraction works on any node sequence (the wall functionals
    // are linear in the plane point, so node infima are exact for the
    // piecewise-linear interpolant regardless of spacing). The last
    // coordinates live on tiny scales driven by excursions near the origin
    // whose durations shrink quadratically, so the scan refines the first
    // unit of time 32-fold. All levels are folded into one streaming pass:
    // at each node the running minima are chained causally through the
    // walls, which is exactly the iterated transform evaluated pointwise.
    let split = horizon.min(1.0);
    let fine_step = cfg.step / 32.0;
    let n_fine = 4 * ((split / fine_step / 4.0).round() as usize).max(1);
    let n_coarse = 4 * (((horizon - split) / cfg.step / 4.0).round() as usize);
    let roots: Vec<[f64; 2]> = (0..m).map(|k| dihedral.root(k)).collect();
    struct Scan {
        mins: Vec<f64>,
    }
    impl Scan {
        fn push(&mut self, mut p: [f64; 2], roots: &[[f64; 2]]) {
            for (k, v) in roots.iter().enumerate() {
                let c = 0.5 * (v[0] * p[0] + v[1] * p[1]);
                if c < self.mins[k] {
                    self.mins[k] = c;
                }
                p[0] -= self.mins[k] * v[0];
                p[1] -= self.mins[k] * v[1];
            }
        }
    }
    let both: Vec<(Vec<f64>, Vec<f64>)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed, i);
            let mut fine = Scan { mins: vec![0.0; m] };
            let mut coarse = Scan { mins: vec![0.0; m] };
            let mut cur = [0.0f64, 0.0f64];
            let mut node = 0usize;
            for seg in [(n_fine, fine_step), (n_coarse, cfg.step)] {
                let sd = seg.1.sqrt();
                for _ in 0..seg.0 {
                    let z0: f64 = rng.sample(rand_distr::StandardNormal);
                    let z1: f64 = rng.sample(rand_distr::StandardNormal);
                    cur = [
                        cur[0] + gamma[0] * seg.1 + sd * z0,
                        cur[1] + gamma[1] * seg.1 + sd * z1,
                    ];
                    node += 1;
                    fine.push(cur, &roots);
                    if node % 4 == 0 {
                        coarse.push(cur, &roots);
                    }
                }
            }
            (
                fine.mins.iter().map(|&v| -v).collect(),
                coarse.mins.iter().map(|&v| -v).collect(),
            )
        })
        .collect();
    let transform: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            quantile_extrapolate(
                both.iter().map(|(f, _)| f[k]).collect(),
                both.iter().map(|(_, c)| c[k]).collect(),
            )
        })
        .collect();
    // The exact sampler is cheap; a larger reference sample lowers the
    // two-sample noise floor.
    let sampler: Vec<Vec<f64>> = (0..10 * cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(cfg.seed ^ 0xd1ed_d1ed, i);
            dihedral_verma_sample(gamma, &dihedral, &mut rng).unwrap().xs
        })
        .collect();

    let mut report = ExperimentReport::new("dihedral", cfg.to_json());
    report.note(format!(
        "m = {m}, drift ({:.4}, {}), horizon {horizon}; scan steps {:.1e} on [0, {split}] and \
         {:.1e} after, with quantile-level sqrt(step) extrapolation against the stride-4 \
         subsample; exact reference sample of size {}",
        gamma[0],
        gamma[1],
        fine_step,
        cfg.step,
        10 * cfg.n_paths
    ));
    for k in 0..m {
        let b: Vec<f64> = sampler.iter().map(|v| v[k]).collect();
        let d = ks_two_sample(&transform[k], &b)?;
        report.check(format!("ks_coordinate_{k}"), d, d <= cfg.tolerance);
        let hash = StringVector::dihedral(transform[k].clone(), m).content_hash();
        report.note(format!("transform k{k} sample content hash {hash:016x}"));
        report.attach_samples(format!("transform_k{k}"), transform[k].clone());
    }

    // Large-m limits of the alternating sums at the canonical evaluation
    // points gamma_M = (M/pi, alpha), v_M = (M t/pi, x).
    let big_m = 64usize;
    let alpha = if cfg.mu > 0.0 && cfg.mu < 1.0 { cfg.mu } else { 0.5 };
    let (t, x) = (1.0, 0.4);
    let gamma_m = [big_m as f64 / PI, alpha];
    let v_m = [big_m as f64 * t / PI, x];
    let h_limit = (alpha * PI).sin();
    let h_val = h_dihedral_scaled(big_m, gamma_m);
    let h_err = (h_val - h_limit).abs() / h_limit.abs();
    report.check("h_limit_rel_err", h_err, h_err <= 0.02);
    // Pairing the 2m alternating terms shows the limit of psi is
    // 2 sin(alpha pi) phi_alpha(t, x).
    let psi_limit = 2.0 * h_limit * theta_phi_auto(alpha, t, x)?;
    let psi_val = psi_dihedral(big_m, v_m, gamma_m);
    let psi_err = (psi_val - psi_limit).abs() / psi_limit.abs();
    report.check("psi_limit_rel_err", psi_err, psi_err <= 0.02);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::q_kernel;
    use crate::numeric::integrate;

    /// Short-time drift of the conditioned diffusion: the kernel first
    /// moments satisfy (E Z_t - mu)/t -> pi cot(pi mu).
    #[test]
    fn kernel_mean_slope_matches_cotangent_drift() {
        let mu = 0.3;
        let slope = |t: f64| -> f64 {
            let (mean, _) =
                integrate(|y| y * q_kernel(t, mu, y).unwrap_or(0.0), 0.0, 1.0, 1e-11).unwrap();
            (mean - mu) / t
        };
        let s_05 = slope(0.05);
        let s_02 = slope(0.02);
        let s_01 = slope(0.01);
        let target = PI * (PI * mu).cos() / (PI * mu).sin();
        // Richardson extrapolation in t from the two finest values.
        let extrapolated = 2.0 * s_01 - s_02;
        assert!(
            (extrapolated - target).abs() <= 0.02 * target.abs(),
            "slope {extrapolated} vs {target}"
        );
        // And the raw slopes approach the target monotonically.
        assert!((s_02 - target).abs() < (s_05 - target).abs());
    }

    #[test]
    fn main_theorem_small_smoke() {
        let cfg = ExperimentConfig {
            n_paths: 400,
            step: 1e-3,
            n_transforms: 8,
            tolerance: 0.2,
            ..Default::default()
        };
        let report = run_main_theorem(&cfg).unwrap();
        assert!(report.pass, "{}", report.to_json());
        // Bit-reproducibility of the whole report.
        let again = run_main_theorem(&cfg).unwrap();
        assert_eq!(report.to_json(), again.to_json());
    }

    #[test]
    fn xi_limit_small_smoke() {
        let cfg = ExperimentConfig {
            mu: 0.3,
            n_paths: 800,
            step: 1e-4,
            ..Default::default()
        };
        let report = run_xi_limit(&cfg).unwrap();
        assert!(report.pass, "{}", report.to_json());
    }

    /// Without the final correction, consecutive iteration levels stay
    /// separated by twice a string parameter whose mean tends to 2; the
    /// sqrt(step)-extrapolated estimate lands in the stated window.
    #[test]
    fn uncorrected_gap_is_twice_a_near_two_string_parameter() {
        let estimate = |step: f64| -> f64 {
            let cfg = ExperimentConfig {
                n_paths: 1500,
                step,
                n_transforms: 8,
                tolerance: 1.0,
                ..Default::default()
            };
            run_main_theorem(&cfg)
                .unwrap()
                .get("uncorrected_gap_xi_estimate")
                .unwrap()
        };
        let coarse = estimate(4e-4);
        let fine = estimate(1e-4);
        let extrapolated = 2.0 * fine - coarse;
        assert!(
            (1.8..=2.2).contains(&extrapolated),
            "xi estimate {extrapolated} (raw {fine} at 1e-4, {coarse} at 4e-4)"
        );
    }

    #[test]
    fn bessel_smoke() {
        let cfg = ExperimentConfig {
            mu: 0.5,
            n_paths: 500,
            step: 2e-3,
            tolerance: 0.12,
            seed: 11,
            ..Default::default()
        };
        let report = run_bessel_sup(&cfg, 60.0).unwrap();
        assert!(report.pass, "{}", report.to_json());
        assert!(run_bessel_sup(&ExperimentConfig { mu: 0.3, ..cfg }, 60.0).is_err());
    }
}
