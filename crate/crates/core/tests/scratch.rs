//! Temporary diagnostics (deleted before finalizing).

use alcove::crystal::*;

#[test]
#[ignore]
fn diag_counts() {
    for w in [10u64, 14, 18, 22, 26, 30, 34, 38, 40] {
        let c = alhc_counts(w).unwrap();
        let total: u64 = c.iter().sum();
        println!("alhc max_weight {w}: a({w}) = {}, cumulative {total}", c[w as usize]);
    }
}

#[test]
#[ignore]
fn diag_char() {
    let r: f64 = 400.0;
    let (t, x, mu, tau): (f64, f64, f64, f64) = (1.0, 0.5, 0.5, 0.2);
    let n = (r * t).round() as u32;
    let m = (r * x).round() as u32;
    let a1 = (tau + mu) / r;
    let b1 = 2.0 / r;
    let c_num = char_affine(n, m, a1, b1);
    let c_den = char_affine(n, m, mu / r, 2.0 / r);
    println!("num {c_num:?} den {c_den:?}");
    let rep = dh_ratio_check(r, t, x, mu, tau, 0.0, 1.0).unwrap();
    println!("dh stats: {:?}", rep.statistics);
    let rep0 = dh_ratio_check(r, t, x, mu, 0.0, 0.0, 1e-9).unwrap();
    println!("dh tau=0 stats: {:?}", rep0.statistics);
}

#[test]
#[ignore]
fn diag_boltzmann() {
    for (r, cap) in [(1.5f64, 20u64), (2.0, 24), (4.0, 30), (8.0, 30)] {
        let d = boltzmann_exact(r, cap).unwrap();
        println!(
            "r={r} cap={cap}: elements {}, deficit {:.4}, z_cap {:.3}, z_full {:.3}",
            d.elements.len(),
            d.mass_deficit,
            d.z_cap,
            d.z_full
        );
    }
}

#[test]
#[ignore]
fn diag_xi_means() {
    use alcove::mc::stats::mean_and_se;
    use alcove::path::*;
    use alcove::rng::substream;
    use rayon::prelude::*;
    for mu in [0.3f64, 0.5] {
        for step in [1e-3f64, 2.5e-4, 1e-4] {
            let count = (1.0 / step).round() as usize;
            let grid = Grid::new(step, count).unwrap();
            let m = 2000u64;
            let rows: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut rng = substream(4242, i);
                    let base = brownian_with(mu, &grid, &mut rng);
                    iterate(&base, 17, Wall::Zero).xi
                })
                .collect();
            let mut line = format!("mu={mu} step={step:.0e}:");
            for k in [4usize, 8, 13, 16] {
                let xs: Vec<f64> = rows.iter().map(|r| r[k]).collect();
                let (mean, se) = mean_and_se(&xs).unwrap();
                line += &format!("  k{k}: {mean:.3}+-{se:.3}");
            }
            println!("{line}");
        }
    }
}

#[test]
#[ignore]
fn diag_main_theorem_preview() {
    use alcove::mc::{run_main_theorem, ExperimentConfig};
    let cfg = ExperimentConfig {
        n_paths: 3000,
        ..Default::default()
    };
    let rep = run_main_theorem(&cfg).unwrap();
    println!("{}", rep.to_json());
}

#[test]
#[ignore]
fn diag_verma_full() {
    use alcove::mc::{run_verma_consistency, ExperimentConfig};
    let cfg = ExperimentConfig {
        mu: 0.5,
        n_paths: 5000,
        step: 1e-3,
        tolerance: 0.03,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let rep = run_verma_consistency(&cfg, 50.0, 5).unwrap();
    println!("elapsed {:?}\n{}", t0.elapsed(), rep.to_json());
    let cfg_fine = ExperimentConfig { step: 2.5e-4, ..cfg };
    let rep = run_verma_consistency(&cfg_fine, 50.0, 5).unwrap();
    println!("fine step:\n{}", rep.to_json());
}

#[test]
#[ignore]
fn diag_bessel_full() {
    use alcove::mc::{run_bessel_sup, ExperimentConfig};
    for mu in [0.5f64, 1.0] {
        let cfg = ExperimentConfig {
            mu,
            n_paths: 5000,
            step: 1e-3,
            tolerance: 0.05,
            seed: 7,
            ..Default::default()
        };
        let t0 = std::time::Instant::now();
        let rep = run_bessel_sup(&cfg, 100.0).unwrap();
        println!("mu={mu} elapsed {:?}\n{}", t0.elapsed(), rep.to_json());
    }
}

#[test]
#[ignore]
fn diag_dihedral_full() {
    use alcove::mc::{run_dihedral, ExperimentConfig};
    let cfg = ExperimentConfig {
        mu: 0.5,
        n_paths: 5000,
        step: 1.25e-4,
        tolerance: 0.03,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let rep = run_dihedral(&cfg, 6, 20.0).unwrap();
    println!("elapsed {:?}\n{}", t0.elapsed(), rep.to_json());
}

#[test]
#[ignore]
fn diag_cond_laplace_full() {
    use alcove::mc::{run_cond_laplace, ExperimentConfig};
    let cfg = ExperimentConfig {
        mu: 0.5,
        n_paths: 20000,
        step: 1e-3,
        n_transforms: 12,
        tolerance: 0.05,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let rep = run_cond_laplace(&cfg, &[0.1, 0.2, 0.3]).unwrap();
    println!("elapsed {:?}\n{}", t0.elapsed(), rep.to_json());
}

#[test]
#[ignore]
fn diag_main_theorem_full() {
    use alcove::mc::{run_main_theorem, ExperimentConfig};
    let start = std::time::Instant::now();
    let rep = run_main_theorem(&ExperimentConfig::default()).unwrap();
    println!("elapsed {:?}", start.elapsed());
    println!("{}", rep.to_json());
}

#[test]
#[ignore]
fn diag_oracle_consistency() {
    use alcove::laws::*;
    // A_1 from the corner should have the same law as Z_1 started at mu:
    // compare the entrance density with the conditioned kernel at t = 1.
    for mu in [0.3, 0.5] {
        for y in [0.2, 0.4, 0.6, 0.8] {
            let a = s_entrance(mu, 1.0, y).unwrap();
            let b = q_kernel(1.0, mu, y).unwrap();
            println!("mu={mu} y={y}: s_entrance {a:.6} q {b:.6} ratio {:.6}", a / b);
        }
    }
}

#[test]
#[ignore]
fn diag_n_sweep() {
    use alcove::laws::q_cdf_table;
    use alcove::mc::stats::ks_statistic;
    use alcove::path::*;
    use alcove::rng::substream;
    use rayon::prelude::*;
    let mu = 0.5;
    let table = q_cdf_table(1.0, mu, 4000).unwrap();
    for step in [1e-4f64, 2.5e-5] {
        let count = (1.0 / step).round() as usize;
        let grid = Grid::new(step, count).unwrap();
        let m: u64 = if step < 5e-5 { 2000 } else { 3000 };
        let levels = 26;
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(99, i);
                let base = brownian_with(mu, &grid, &mut rng);
                let mut vals = base.values().to_vec();
                let mut terms = Vec::new();
                let mut xis = Vec::new();
                for j in 0..levels {
                    let xi = alcove::path::pitman(
                        &Path::new(grid, vals.clone()).unwrap(),
                        Wall::Zero.offset(j),
                    );
                    let x = vals
                        .iter()
                        .enumerate()
                        .map(|(jj, &v)| match Wall::Zero.offset(j) {
                            Wall::One => v,
                            Wall::Zero => grid.time(jj) - v,
                        })
                        .fold(f64::INFINITY, f64::min)
                        .min(0.0);
                    vals = xi.values().to_vec();
                    terms.push(*vals.last().unwrap());
                    xis.push(-x);
                }
                (terms, xis)
            })
            .collect();
        for n in [4usize, 8, 12, 16, 20, 24] {
            let samples: Vec<f64> = rows
                .iter()
                .map(|(terms, xis)| {
                    terms[n] + Wall::Zero.offset(n + 1).root_sign() * xis[n + 1]
                })
                .collect();
            let d = ks_statistic(&samples, |x| table.eval(x)).unwrap();
            println!("step={step:.0e} n={n}: ks={d:.4}");
        }
    }
}

#[test]
#[ignore]
fn diag_dihedral_last_coordinate() {
    use alcove::cone::*;
    use alcove::mc::stats::{ks_statistic, ks_two_sample, mean_and_se};
    use alcove::path::Grid;
    use alcove::rng::substream;
    use rayon::prelude::*;
    use std::f64::consts::PI;
    let m = 6;
    let cfg = DihedralConfig::new(m).unwrap();
    let gamma = [m as f64 / PI, 0.5];
    let denom: f64 = (1..m).map(|l| cfg.gamma_coord(gamma, l) * cfg.a(l)).sum();
    let rate = denom / cfg.a(m - 1);
    println!("exact rate for x5: {rate}");
    let expcdf = move |x: f64| 1.0 - (-rate * x.max(0.0)).exp();
    for (step, horizon) in [(5e-4f64, 40.0f64), (5e-4, 80.0), (1.25e-4, 40.0)] {
        let count = (horizon / step).round() as usize;
        let grid = Grid::new(step, count).unwrap();
        let xs: Vec<f64> = (0..4000u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(7, i);
                let path = PlanarPath::brownian(gamma, &grid, &mut rng);
                let (s, _) = dihedral_strings(&path, &cfg);
                s.xs[m - 1]
            })
            .collect();
        let (mean, se) = mean_and_se(&xs).unwrap();
        let d = ks_statistic(&xs, expcdf).unwrap();
        println!(
            "step={step:.2e} T={horizon}: mean {mean:.4}+-{se:.4} (exact {:.4}), KS vs Exp {d:.4}",
            1.0 / rate
        );
    }
    // Rejection-sampled oracle for the joint law: independent exponentials
    // with rates gamma_k conditioned on the string cone.
    let mut rng = substream(99, 0);
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    let mut tries = 0u64;
    while accepted.len() < 20000 && tries < 60_000_000 {
        tries += 1;
        let cand: Vec<f64> = (0..m)
            .map(|k| {
                let e: f64 = rand::Rng::sample(&mut rng, rand_distr::Exp1);
                e / cfg.gamma_coord(gamma, k)
            })
            .collect();
        if in_gamma(&StringVector::dihedral(cand.clone(), m)) {
            accepted.push(cand);
        }
    }
    println!("rejection acceptance: {} of {tries}", accepted.len());
    let mut rng2 = substream(100, 0);
    for k in 0..m {
        let a: Vec<f64> = accepted.iter().map(|v| v[k]).collect();
        let b: Vec<f64> = (0..accepted.len())
            .map(|_| dihedral_verma_sample(gamma, &cfg, &mut rng2).unwrap().xs[k])
            .collect();
        let d = ks_two_sample(&a, &b).unwrap();
        println!("coordinate {k}: rejection vs series sampler KS {d:.4}");
    }
}

#[test]
#[ignore]
fn diag_coupling() {
    use alcove::cone::*;
    use alcove::path::*;
    use alcove::rng::substream;
    use std::f64::consts::PI;
    let m = 64;
    let cfg = DihedralConfig::new(m).unwrap();
    let grid = Grid::new(5e-4, 8000).unwrap();
    let mu = 0.5;
    for seed in 0..4u64 {
        let mut rng = substream(900, seed);
        let b = brownian_with(0.0, &grid, &mut rng);
        let beta = brownian_with(0.0, &grid, &mut rng);
        let scalar = Path::from_fn(grid, |t| {
            let j = (t / grid.step()).round() as usize;
            b.values()[j.min(grid.count())] + mu * t
        })
        .unwrap();
        let planar = PlanarPath::from_fn(grid, |t| {
            let j = ((t / grid.step()).round() as usize).min(grid.count());
            [beta.values()[j] + (m as f64) * t / PI, b.values()[j] + mu * t]
        })
        .unwrap();
        let affine = iterate(&scalar, 6, Wall::Zero);
        let (dihedral, _) = dihedral_strings(&planar, &cfg);
        println!(
            "seed {seed}: affine {:?}\n         dihedral {:?}",
            &affine.xi[..7],
            &dihedral.xs[..7]
        );
    }
}
