//! Discretized paths and the wall transforms.
//!
//! Paths are sampled on a uniform grid and carry piecewise-linear semantics:
//! every prefix infimum used by the transforms is attained at a grid node for
//! the linear interpolant (both `f` and `t - f` are piecewise linear), so all
//! transforms below are exact for that interpolant.
//!
//! The two walls of the alcove correspond to the functionals
//! `wall 1: f(t)` and `wall 0: t - f(t)`; a wall transform subtracts a
//! multiple of the running infimum of the corresponding functional. Factor 2
//! is the Pitman transform, factor 1 the Levy transform.

use crate::error::{Error, Result};
use crate::rng::substream;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Wall index of the alcove `{0 <= x <= t}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Wall {
    /// The slanted wall `x = t`; functional `t - f(t)`.
    Zero,
    /// The flat wall `x = 0`; functional `f(t)`.
    One,
}

impl Wall {
    pub fn from_index(i: usize) -> Wall {
        if i % 2 == 0 {
            Wall::Zero
        } else {
            Wall::One
        }
    }

    pub fn index(self) -> usize {
        match self {
            Wall::Zero => 0,
            Wall::One => 1,
        }
    }

    /// Wall reached after `k` alternation steps from `self`.
    pub fn offset(self, k: usize) -> Wall {
        Wall::from_index(self.index() + k)
    }

    /// Sign of the space coordinate of the root attached to this wall:
    /// the wall-0 root points down (-2), the wall-1 root up (+2).
    pub fn root_sign(self) -> f64 {
        match self {
            Wall::Zero => -1.0,
            Wall::One => 1.0,
        }
    }
}

/// Uniform time grid `t_j = j * step`, `j = 0..=count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    step: f64,
    count: usize,
}

impl Grid {
    pub fn new(step: f64, count: usize) -> Result<Grid> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if count == 0 {
            return Err(Error::InvalidGrid("count must be >= 1".into()));
        }
        Ok(Grid { step, count })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Number of nodes, `count + 1`.
    pub fn len(&self) -> usize {
        self.count + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.step
    }

    pub fn horizon(&self) -> f64 {
        self.count as f64 * self.step
    }
}

/// Real path sampled on a [`Grid`], with `f(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    grid: Grid,
    values: Vec<f64>,
}

impl Path {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Path> {
        if values.len() != grid.len() {
            return Err(Error::InvalidPath(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidPath(format!("f(0) must be 0, got {}", values[0])));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite value".into()));
        }
        Ok(Path { grid, values })
    }

    /// Sample `f` at the grid nodes; `f(0)` must vanish.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Path> {
        let values = (0..grid.len()).map(|j| f(grid.time(j))).collect();
        Path::new(grid, values)
    }

    /// The linear path `t -> slope * t`.
    pub fn linear(grid: Grid, slope: f64) -> Path {
        Path::from_fn(grid, |t| slope * t).expect("linear path is valid")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// True when `0 <= f(t_j) <= t_j` at every node.
    pub fn in_alcove(&self) -> bool {
        self.values
            .iter()
            .enumerate()
            .all(|(j, &v)| v >= 0.0 && v <= self.grid.time(j))
    }

    /// Largest `|f(t_{j+1}) - f(t_j)| / step`.
    pub fn max_slope(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / self.grid.step)
            .fold(0.0, f64::max)
    }

    /// Two-column CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,value\n");
        for (j, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.grid.time(j), v));
        }
        out
    }

    /// Parse the CSV produced by [`Path::to_csv`]; the time column must be a
    /// uniform grid starting at 0.
    pub fn from_csv(text: &str) -> Result<Path> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("time")) {
                continue;
            }
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", lineno + 1)))?;
            let t: f64 = t.trim().parse().map_err(|e| Error::Parse(format!("time: {e}")))?;
            let v: f64 = v.trim().parse().map_err(|e| Error::Parse(format!("value: {e}")))?;
            times.push(t);
            values.push(v);
        }
        if times.len() < 2 {
            return Err(Error::Parse("need at least two rows".into()));
        }
        let step = times[1] - times[0];
        let grid = Grid::new(step, times.len() - 1)?;
        for (j, &t) in times.iter().enumerate() {
            if (t - grid.time(j)).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(Error::Parse(format!("non-uniform grid at row {j}")));
            }
        }
        Path::new(grid, values)
    }
}

/// Apply one wall transform in place and return the string parameter
/// `xi = -inf` of the wall functional. `factor` is 2 for Pitman, 1 for Levy.
pub(crate) fn wall_transform_in_place(step: f64, values: &mut [f64], wall: Wall, factor: f64) -> f64 {
    let mut running = 0.0f64;
    match wall {
        Wall::One => {
            for v in values.iter_mut() {
                if *v < running {
                    running = *v;
                }
                *v -= factor * running;
            }
        }
        Wall::Zero => {
            for (j, v) in values.iter_mut().enumerate() {
                let g = j as f64 * step - *v;
                if g < running {
                    running = g;
                }
                *v += factor * running;
            }
        }
    }
    -running
}

/// Pitman transform at the given wall: subtract twice the running infimum of
/// the wall functional. Output values satisfy `f >= 0` after wall 1 and
/// `f <= t` after wall 0.
pub fn pitman(path: &Path, wall: Wall) -> Path {
    let mut values = path.values.clone();
    wall_transform_in_place(path.grid.step, &mut values, wall, 2.0);
    Path { grid: path.grid, values }
}

/// Levy transform: same infimum with factor 1.
pub fn levy(path: &Path, wall: Wall) -> Path {
    let mut values = path.values.clone();
    wall_transform_in_place(path.grid.step, &mut values, wall, 1.0);
    Path { grid: path.grid, values }
}

/// Result of an alternating Pitman iteration.
#[derive(Debug, Clone)]
pub struct TransformTrace {
    /// Path after applying walls `start, start+1, ..., start+n`.
    pub final_path: Path,
    /// Terminal string parameters `xi_0 ..= xi_n`, all nonnegative.
    pub xi: Vec<f64>,
    /// First wall applied.
    pub start: Wall,
}

impl TransformTrace {
    /// Exact reconstruction of the terminal value from the string parameters:
    /// `final(T) = path(T) + 2 * sum_k sign_k * xi_k` where `sign_k` is the
    /// root sign of the wall applied at level `k`.
    pub fn reconstruction_residual(&self, original: &Path) -> f64 {
        let mut acc = original.terminal();
        for (k, &x) in self.xi.iter().enumerate() {
            acc += 2.0 * self.start.offset(k).root_sign() * x;
        }
        self.final_path.terminal() - acc
    }
}

/// Apply the alternating Pitman transforms `P_{start+n} ... P_{start}`
/// (that is, `n + 1` transforms) and record the terminal string parameters.
pub fn iterate(path: &Path, n: usize, start: Wall) -> TransformTrace {
    let mut values = path.values.clone();
    let mut xi = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let x = wall_transform_in_place(path.grid.step, &mut values, start.offset(k), 2.0);
        xi.push(x);
    }
    TransformTrace {
        final_path: Path { grid: path.grid, values },
        xi,
        start,
    }
}

/// Pitman iteration followed by one Levy transform at the next wall:
/// `L_{start+n+1} P_{start+n} ... P_{start}`.
pub fn corrected_limit(path: &Path, n: usize, start: Wall) -> Path {
    let trace = iterate(path, n, start);
    levy(&trace.final_path, start.offset(n + 1))
}

/// Brownian motion with drift `mu` on the grid: independent Gaussian
/// increments of mean `mu * step` and variance `step`. Deterministic in the
/// seed.
pub fn sample_brownian(mu: f64, grid: &Grid, seed: u64) -> Path {
    let mut rng = substream(seed, 0);
    brownian_with(mu, grid, &mut rng)
}

/// As [`sample_brownian`] but drawing from a caller-provided stream.
pub fn brownian_with(mu: f64, grid: &Grid, rng: &mut impl Rng) -> Path {
    let mut values = Vec::with_capacity(grid.len());
    let sd = grid.step.sqrt();
    let mut acc = 0.0;
    values.push(0.0);
    for _ in 0..grid.count {
        let z: f64 = rng.sample(StandardNormal);
        acc += mu * grid.step + sd * z;
        values.push(acc);
    }
    Path { grid: *grid, values }
}

/// Smallest number of alternating Pitman transforms (starting at `start`)
/// after which the path lies in the alcove `{0 <= f(t) <= t}`. Finite for
/// piecewise-linear paths; the iteration cap `10 * (1 + max slope)` turns a
/// wilder input into an error instead of a long loop.
pub fn dominance_steps(path: &Path, start: Wall) -> Result<usize> {
    let cap = (10.0 * (1.0 + path.max_slope())).ceil() as usize;
    let mut values = path.values.clone();
    let mut wall = start;
    for n in 0..=cap {
        let in_alcove = values
            .iter()
            .enumerate()
            .all(|(j, &v)| v >= 0.0 && v <= path.grid.time(j));
        if in_alcove {
            return Ok(n);
        }
        wall_transform_in_place(path.grid.step, &mut values, wall, 2.0);
        wall = wall.offset(1);
    }
    Err(Error::IterationCap(format!(
        "path not dominant after {cap} transforms"
    )))
}

/// Uniformly sampled curve on `[t0, t0 + step * (len - 1)]`; unlike [`Path`]
/// it need not start at the origin. Used for time inversion output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub t0: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl Curve {
    pub fn from_path(path: &Path) -> Curve {
        Curve {
            t0: 0.0,
            step: path.grid.step,
            values: path.values.clone(),
        }
    }

    pub fn t_last(&self) -> f64 {
        self.t0 + self.step * (self.values.len() - 1) as f64
    }

    /// Linear interpolation, clamped to the domain.
    pub fn value_at(&self, t: f64) -> f64 {
        let pos = ((t - self.t0) / self.step).clamp(0.0, (self.values.len() - 1) as f64);
        let idx = (pos as usize).min(self.values.len() - 2);
        let frac = pos - idx as f64;
        self.values[idx] + frac * (self.values[idx + 1] - self.values[idx])
    }
}

/// Time inversion `t -> t * f(1/t)` evaluated on a uniform output grid over
/// `[t_min, 1/t_first]`, where `t_first` is the first positive time of the
/// input. The input horizon must reach `1/t_min`. The output keeps the input
/// node count, so its resolution in original time degrades quadratically
/// toward the upper end of the range.
pub fn time_invert(curve: &Curve, t_min: f64) -> Result<Curve> {
    if !(t_min > 0.0) {
        return Err(Error::OutOfRange(format!("t_min must be positive, got {t_min}")));
    }
    if curve.values.len() < 2 {
        return Err(Error::InvalidPath("curve needs at least two nodes".into()));
    }
    if curve.t_last() < 1.0 / t_min {
        return Err(Error::Horizon(format!(
            "horizon {} < 1/t_min = {}",
            curve.t_last(),
            1.0 / t_min
        )));
    }
    let t_first = if curve.t0 > 0.0 { curve.t0 } else { curve.t0 + curve.step };
    let upper = 1.0 / t_first;
    if upper <= t_min {
        return Err(Error::Horizon(format!(
            "output range [{t_min}, {upper}] is empty"
        )));
    }
    let count = curve.values.len() - 1;
    let step_out = (upper - t_min) / count as f64;
    let values = (0..=count)
        .map(|j| {
            let t = t_min + j as f64 * step_out;
            t * curve.value_at(1.0 / t)
        })
        .collect();
    Ok(Curve { t0: t_min, step: step_out, values })
}
