//! `alcove` — path transforms, closed-form law oracles, simulations,
//! experiments and exact combinatorics for Brownian motion conditioned to
//! the unit interval.
//!
//! Output is deterministic given the flags: reports are JSON with sorted
//! keys and no timestamps. Exit codes: 0 on success (and passing
//! experiments), 1 when an experiment reports failure, 2 on usage errors.

use alcove::cone::{dihedral_verma_sample, verma_sample_affine, DihedralConfig};
use alcove::crystal;
use alcove::laws;
use alcove::mc::{self, ExperimentConfig};
use alcove::path::{self, Curve, Grid, Path, Wall};
use alcove::report::ExperimentReport;
use alcove::rng::substream;
use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use std::io::Write;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "alcove", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Write the primary output here instead of stdout.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Dump raw samples as CSV (experiments only).
    #[arg(long)]
    samples_csv: Option<std::path::PathBuf>,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// Drift of the underlying Brownian motion, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// Evaluation time of the conditioned diffusion.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Iteration depth of the transform pipeline.
    #[arg(long, default_value_t = 12)]
    n: usize,
    /// Number of Monte Carlo paths.
    #[arg(long, default_value_t = 20_000)]
    paths: usize,
    /// Time step of the simulation grid.
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    /// Master seed; every path uses its own derived substream.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Pass/fail tolerance for the experiment's gated statistics.
    #[arg(long, default_value_t = 0.03)]
    tol: f64,
}

impl ExperimentArgs {
    fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            mu: self.mu,
            t_eval: self.t,
            n_transforms: self.n,
            n_paths: self.paths,
            step: self.step,
            seed: self.seed,
            tolerance: self.tol,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Apply a path transform to a CSV path (columns time,value).
    Transform {
        /// Input CSV file; `-` reads stdin.
        #[arg(long)]
        input: std::path::PathBuf,
        #[command(subcommand)]
        op: TransformOp,
    },
    /// Evaluate closed-form law oracles; emits CSV rows (inputs, value, tail bound).
    Laws {
        #[command(subcommand)]
        oracle: LawsOp,
    },
    /// Simulate the conditioned interval diffusion; emits a CSV trajectory.
    Simulate {
        /// Starting point in [0, 1] (boundaries allowed).
        #[arg(long, default_value_t = 0.5)]
        z0: f64,
        /// Horizon.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo experiments; JSON report on stdout, exit 0 iff pass.
    Experiment {
        #[command(subcommand)]
        which: ExperimentOp,
    },
    /// Exact combinatorics: enumeration, q-series, characters, Boltzmann laws.
    Crystal {
        #[command(subcommand)]
        which: CrystalOp,
    },
}

#[derive(Subcommand)]
enum TransformOp {
    /// Pitman transform at one wall.
    Pitman {
        #[arg(long, value_parser = parse_wall)]
        index: Wall,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Levy transform at one wall.
    Levy {
        #[arg(long, value_parser = parse_wall)]
        index: Wall,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Alternating Pitman iteration; prints the string parameters as JSON
    /// and writes the transformed path.
    Iterate {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0, value_parser = parse_wall_idx)]
        start: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Pitman iteration followed by the Levy correction.
    Corrected {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0, value_parser = parse_wall_idx)]
        start: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Time inversion t -> t f(1/t) on [t_min, 1/step].
    TimeInvert {
        #[arg(long)]
        t_min: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Smallest number of alternating transforms reaching the alcove.
    DominanceSteps {
        #[arg(long, default_value_t = 0, value_parser = parse_wall_idx)]
        start: usize,
    },
}

#[derive(Subcommand)]
enum LawsOp {
    /// Theta-type harmonic function phi_alpha(t, x).
    Theta {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x: f64,
        /// direct | poisson | both
        #[arg(long, default_value = "both")]
        mode: String,
    },
    /// Killed interval kernel u_t(x, y) in both representations.
    Killed {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
    },
    /// Conditioned kernel q_t(x, y); x = 0 uses the entrance law.
    Q {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        y: f64,
    },
    /// Laplace transform and mean of the limit weight coordinate.
    LimitWeight {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        tau: f64,
    },
    /// First string parameter laws at mu = 1/2 and mu = 1.
    Xi1 {
        /// 0.5 or 1.0
        #[arg(long)]
        mu: f64,
        /// laplace | density | cdf
        #[arg(long)]
        what: String,
        /// Evaluation point (tau for laplace, x otherwise).
        #[arg(long)]
        at: f64,
    },
    /// Space-time cone kernels w, s and the entrance density.
    Spacetime {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        x: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        y: f64,
    },
}

#[derive(Subcommand)]
enum ExperimentOp {
    /// Corrected transform pipeline against the conditioned marginal.
    MainTheorem {
        #[command(flatten)]
        args: ExperimentArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Transform-based limiting string parameters against the series sampler.
    Verma {
        #[command(flatten)]
        args: ExperimentArgs,
        #[arg(long, default_value_t = 50.0)]
        horizon: f64,
        #[arg(long, default_value_t = 5)]
        k_max: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// String parameters tend to 2: series means and transform means.
    XiLimit {
        #[command(flatten)]
        args: ExperimentArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Supremum of the drifted 3d Bessel against the first-parameter laws.
    BesselSup {
        #[command(flatten)]
        args: ExperimentArgs,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Conditional exponential moments given the highest-weight endpoint.
    CondLaplace {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Comma-separated exponents.
        #[arg(long, default_value = "0.1,0.2,0.3", value_delimiter = ',')]
        taus: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Dihedral strings against the exact conditioned-exponential sampler.
    Dihedral {
        #[command(flatten)]
        args: ExperimentArgs,
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Subcommand)]
enum CrystalOp {
    /// Enumerate ratio-constrained compositions up to a weight.
    Enumerate {
        #[arg(long, default_value_t = 10)]
        max_weight: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact check of the composition generating functions.
    GfCheck {
        #[arg(long, default_value_t = 18)]
        max_weight: usize,
    },
    /// Evaluate the highest-weight character at (a, b).
    Char {
        #[arg(long)]
        level: u32,
        #[arg(long)]
        weight: u32,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
    },
    /// Exact Boltzmann distribution on the capped crystal.
    Boltzmann {
        #[arg(long, default_value_t = 3.0)]
        r: f64,
        #[arg(long, default_value_t = 20)]
        cap: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Semiclassical character-ratio check.
    DhCheck {
        #[arg(long, default_value_t = 400.0)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 0.5)]
        x: f64,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 0.2)]
        tau: f64,
        #[arg(long, default_value_t = 0.0)]
        u: f64,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Sample string-parameter vectors from the exact limit laws.
    Sample {
        /// affine | dihedral
        #[arg(long, default_value = "affine")]
        kind: String,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
}

fn parse_wall(s: &str) -> Result<Wall, String> {
    match s {
        "0" => Ok(Wall::Zero),
        "1" => Ok(Wall::One),
        _ => Err("wall index must be 0 or 1".into()),
    }
}

fn parse_wall_idx(s: &str) -> Result<usize, String> {
    match s {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err("start index must be 0 or 1".into()),
    }
}

fn write_output(output: &OutputArgs, text: &str) -> std::io::Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().write_all(text.as_bytes()),
    }
}

fn finish_report(report: &ExperimentReport, output: &OutputArgs) -> Result<ExitCode, alcove::Error> {
    write_output(output, &(report.to_json() + "\n"))?;
    if let Some(path) = &output.samples_csv {
        std::fs::write(path, report.samples_csv())?;
    }
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn read_path(input: &std::path::Path) -> Result<Path, alcove::Error> {
    let text = if input.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin())?
    } else {
        std::fs::read_to_string(input)?
    };
    Path::from_csv(&text)
}

fn run() -> Result<ExitCode, alcove::Error> {
    let cli = Cli::parse();
    match cli.command {
        Command::Transform { input, op } => {
            let p = read_path(&input)?;
            match op {
                TransformOp::Pitman { index, output } => {
                    write_output(&output, &path::pitman(&p, index).to_csv())?;
                }
                TransformOp::Levy { index, output } => {
                    write_output(&output, &path::levy(&p, index).to_csv())?;
                }
                TransformOp::Iterate { n, start, output } => {
                    let trace = path::iterate(&p, n, Wall::from_index(start));
                    eprintln!(
                        "{}",
                        serde_json::json!({
                            "xi": trace.xi,
                            "start": start,
                            "in_alcove": trace.final_path.in_alcove(),
                        })
                    );
                    write_output(&output, &trace.final_path.to_csv())?;
                }
                TransformOp::Corrected { n, start, output } => {
                    let out = path::corrected_limit(&p, n, Wall::from_index(start));
                    write_output(&output, &out.to_csv())?;
                }
                TransformOp::TimeInvert { t_min, output } => {
                    let inv = path::time_invert(&Curve::from_path(&p), t_min)?;
                    let mut csv = String::from("time,value\n");
                    for (j, v) in inv.values.iter().enumerate() {
                        csv.push_str(&format!("{},{}\n", inv.t0 + j as f64 * inv.step, v));
                    }
                    write_output(&output, &csv)?;
                }
                TransformOp::DominanceSteps { start } => {
                    println!("{}", path::dominance_steps(&p, Wall::from_index(start))?);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Laws { oracle } => {
            let mut csv = String::from("oracle,inputs,value,tail_bound\n");
            match oracle {
                LawsOp::Theta { alpha, t, x, mode } => {
                    let modes: Vec<(&str, laws::ThetaMode)> = match mode.as_str() {
                        "direct" => vec![("direct", laws::ThetaMode::Direct)],
                        "poisson" => vec![("poisson", laws::ThetaMode::Poisson)],
                        "both" => vec![
                            ("direct", laws::ThetaMode::Direct),
                            ("poisson", laws::ThetaMode::Poisson),
                        ],
                        other => {
                            return Err(alcove::Error::Parse(format!("unknown mode {other}")))
                        }
                    };
                    for (name, m) in modes {
                        let e = laws::theta_phi(alpha, t, x, m)?;
                        csv.push_str(&format!(
                            "theta_{name},\"alpha={alpha} t={t} x={x}\",{},{}\n",
                            e.value, e.est_tail
                        ));
                    }
                }
                LawsOp::Killed { t, x, y } => {
                    for (name, m) in [
                        ("reflection", laws::KernelMode::Reflection),
                        ("spectral", laws::KernelMode::Spectral),
                    ] {
                        let e = laws::killed_kernel(t, x, y, m)?;
                        csv.push_str(&format!(
                            "killed_{name},\"t={t} x={x} y={y}\",{},{}\n",
                            e.value, e.est_tail
                        ));
                    }
                }
                LawsOp::Q { t, x, y } => {
                    let v = laws::q_kernel(t, x, y)?;
                    csv.push_str(&format!("q,\"t={t} x={x} y={y}\",{v},0\n"));
                }
                LawsOp::LimitWeight { mu, tau } => {
                    csv.push_str(&format!(
                        "laplace,\"mu={mu} tau={tau}\",{},0\n",
                        laws::laplace_d(mu, tau)?
                    ));
                    csv.push_str(&format!("mean,\"mu={mu}\",{},0\n", laws::mean_d(mu)?));
                    if (mu - 0.5).abs() < 1e-12 {
                        csv.push_str(&format!("cdf_at_0,\"mu=0.5 x=0\",{},0\n", laws::cdf_d_half(0.0)));
                    }
                }
                LawsOp::Xi1 { mu, what, at } => {
                    let half = (mu - 0.5).abs() < 1e-12;
                    let one = (mu - 1.0).abs() < 1e-12;
                    if !half && !one {
                        return Err(alcove::Error::OutOfRange(
                            "closed forms available at mu = 0.5 and mu = 1".into(),
                        ));
                    }
                    let v = match (what.as_str(), half) {
                        ("laplace", true) => laws::xi1_laplace_half(at)?,
                        ("density", true) => laws::xi1_density_half(at)?,
                        ("cdf", true) => laws::xi1_cdf_half(at)?,
                        ("laplace", false) => laws::xi1_laplace_one(at)?,
                        ("density", false) => laws::xi1_density_one(at)?,
                        ("cdf", false) => laws::xi1_cdf_one(at)?,
                        (other, _) => {
                            return Err(alcove::Error::Parse(format!("unknown quantity {other}")))
                        }
                    };
                    csv.push_str(&format!("xi1_{what},\"mu={mu} at={at}\",{v},0\n"));
                }
                LawsOp::Spacetime { mu, r, x, t, y } => {
                    let w = laws::spacetime_w(mu, r, x, t, y)?;
                    csv.push_str(&format!(
                        "w,\"mu={mu} r={r} x={x} t={t} y={y}\",{},{}\n",
                        w.value, w.est_tail
                    ));
                    let s = laws::spacetime_s(mu, r, x, t, y)?;
                    csv.push_str(&format!("s,\"mu={mu} r={r} x={x} t={t} y={y}\",{s},0\n"));
                    let e = laws::s_entrance(mu, r + t, y)?;
                    csv.push_str(&format!("s_entrance,\"mu={mu} t={} y={y}\",{e},0\n", r + t));
                }
            }
            print!("{csv}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { z0, t, step, seed, output } => {
            let count = (t / step).round().max(1.0) as usize;
            let grid = Grid::new(step, count)?;
            let mut rng = substream(seed, 0);
            let traj = mc::simulate_z(z0, &grid, &mut rng)?;
            let mut csv = String::from("time,value\n");
            for (j, v) in traj.values.iter().enumerate() {
                csv.push_str(&format!("{},{}\n", j as f64 * step, v));
            }
            write_output(&output, &csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Experiment { which } => {
            let (report, output) = match which {
                ExperimentOp::MainTheorem { args, output } => {
                    (mc::run_main_theorem(&args.to_config())?, output)
                }
                ExperimentOp::Verma { args, horizon, k_max, output } => {
                    (mc::run_verma_consistency(&args.to_config(), horizon, k_max)?, output)
                }
                ExperimentOp::XiLimit { args, output } => {
                    (mc::run_xi_limit(&args.to_config())?, output)
                }
                ExperimentOp::BesselSup { args, horizon, output } => {
                    (mc::run_bessel_sup(&args.to_config(), horizon)?, output)
                }
                ExperimentOp::CondLaplace { args, taus, output } => {
                    (mc::run_cond_laplace(&args.to_config(), &taus)?, output)
                }
                ExperimentOp::Dihedral { args, m, horizon, output } => {
                    (mc::run_dihedral(&args.to_config(), m, horizon)?, output)
                }
            };
            finish_report(&report, &output)
        }
        Command::Crystal { which } => match which {
            CrystalOp::Enumerate { max_weight, output } => {
                let all = crystal::enumerate_alhc(max_weight)?;
                let mut csv = String::from("weight,parts\n");
                for c in &all {
                    csv.push_str(&format!(
                        "{},\"{}\"\n",
                        c.weight(),
                        c.parts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" ")
                    ));
                }
                write_output(&output, &csv)?;
                Ok(ExitCode::SUCCESS)
            }
            CrystalOp::GfCheck { max_weight } => {
                let counts = crystal::alhc_counts(max_weight as u64)?;
                let gf = crystal::alhc_gf(max_weight);
                let mut all_match = true;
                for w in 0..=max_weight {
                    let c = gf.coeff(w).to_u64().unwrap_or(u64::MAX);
                    let ok = c == counts[w];
                    all_match &= ok;
                    println!("weight {w}: enumerated {}, series {c}, match {ok}", counts[w]);
                }
                println!("exact match up to weight {max_weight}: {all_match}");
                Ok(if all_match { ExitCode::SUCCESS } else { ExitCode::from(1) })
            }
            CrystalOp::Char { level, weight, a, b } => {
                println!("{}", crystal::char_affine(level, weight, a, b)?);
                Ok(ExitCode::SUCCESS)
            }
            CrystalOp::Boltzmann { r, cap, output } => {
                let dist = crystal::boltzmann_exact(r, cap)?;
                let mut csv = String::from("total,probability,coordinates\n");
                for (x, p) in dist.elements.iter().zip(&dist.probabilities) {
                    csv.push_str(&format!(
                        "{},{},\"{}\"\n",
                        x.total(),
                        p,
                        x.xs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
                    ));
                }
                write_output(&output, &csv)?;
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "elements": dist.elements.len(),
                        "mass_deficit": dist.mass_deficit,
                        "z_cap": dist.z_cap,
                        "z_full": dist.z_full,
                    })
                );
                Ok(ExitCode::SUCCESS)
            }
            CrystalOp::DhCheck { r, t, x, mu, tau, u, tol, output } => {
                let report = crystal::dh_ratio_check(r, t, x, mu, tau, u, tol)?;
                finish_report(&report, &output)
            }
            CrystalOp::Sample { kind, mu, m, k, seed, count } => {
                let mut rng = substream(seed, 0);
                for _ in 0..count {
                    let v = match kind.as_str() {
                        "affine" => verma_sample_affine(mu, k, 4000, &mut rng)?,
                        "dihedral" => {
                            let cfg = DihedralConfig::new(m)?;
                            dihedral_verma_sample([m as f64 / std::f64::consts::PI, mu], &cfg, &mut rng)?
                        }
                        other => {
                            return Err(alcove::Error::Parse(format!("unknown kind {other}")))
                        }
                    };
                    println!(
                        "{}",
                        serde_json::json!({
                            "vector": serde_json::to_value(&v).unwrap(),
                            "content_hash": format!("{:016x}", v.content_hash()),
                        })
                    );
                }
                Ok(ExitCode::SUCCESS)
            }
        },
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
