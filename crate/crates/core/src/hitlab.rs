//! Monte Carlo hitting probabilities for `B^H + f` on a time set `E` and
//! the experiment suites built on top of them.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Error, Result};
use crate::exec;
use crate::gauss::{freeze_drifts_at, mean_and_se, ProcessSpec, SimOptions, Simulator};
use crate::metric::MetricDescriptor;
use crate::potential::{capacity, hausdorff_upper, KernelSpec, RadialKernel};
use crate::quad::integrate;
use crate::rng::{path_stream, stream};
use crate::sets::{build_cantor_lambda, build_e_phi_at, graph_cloud, CantorTree, ScalingProfile};
use crate::svf::{IncrementVariance, SlowVarySpec};

/// Hit target `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Point { x: Vec<f64> },
    Ball { centre: Vec<f64>, radius: f64 },
    Cloud { points: Vec<Vec<f64>> },
    /// Product of `dim` copies of the `λ`-Cantor set at `depth` (leaf
    /// midpoints), scaled by `scale` and shifted to `origin`.
    CantorProduct { lambda: f64, depth: usize, origin: Vec<f64>, scale: f64 },
}

/// Time set `E ⊂ (0, 1]` as a union of closed segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeSetSpec {
    Interval { a: f64, b: f64 },
    Segments { segments: Vec<[f64; 2]> },
    Cantor { lambda: f64, depth: usize, origin: f64, scale: f64 },
    EPhi { profile: ScalingProfile, origin: f64, l0: f64, depth: usize },
}

/// Deterministic drift `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero,
    /// `f(t) = coef · t^exponent` in every component.
    Holder { coef: f64, exponent: f64 },
    /// Frozen `δ_θ` trajectory sampled exactly at the monitoring times;
    /// `index` selects the trajectory within the seed's family.
    FrozenDelta { alpha: f64, theta: SlowVarySpec, seed: u64, index: usize },
}

/// Resolved target.
#[derive(Debug, Clone)]
pub enum Target {
    Point(Vec<f64>),
    Ball(Vec<f64>, f64),
    /// Points sorted by first coordinate, row-major.
    Cloud { dim: usize, points: Vec<f64> },
}

impl Target {
    pub fn from_spec(spec: &TargetSpec, dim: usize) -> Result<Self> {
        let check = |x: &[f64]| {
            if x.len() != dim || x.iter().any(|v| !v.is_finite()) {
                Err(Error::Shape(format!("target point {x:?} does not have {dim} finite coordinates")))
            } else {
                Ok(())
            }
        };
        match spec {
            TargetSpec::Point { x } => {
                check(x)?;
                Ok(Self::Point(x.clone()))
            }
            TargetSpec::Ball { centre, radius } => {
                check(centre)?;
                if !(*radius >= 0.0) {
                    return Err(domain("ball radius must be non-negative"));
                }
                Ok(Self::Ball(centre.clone(), *radius))
            }
            TargetSpec::Cloud { points } => {
                if points.is_empty() {
                    return Err(domain("target cloud is empty"));
                }
                points.iter().try_for_each(|p| check(p))?;
                Ok(Self::cloud(dim, points.clone()))
            }
            TargetSpec::CantorProduct { lambda, depth, origin, scale } => {
                check(origin)?;
                let mids = build_cantor_lambda(*lambda, *depth)?.leaf_midpoints();
                let mut points = vec![Vec::new()];
                for c in 0..dim {
                    points = points
                        .into_iter()
                        .flat_map(|p| {
                            mids.iter().map(move |&m| {
                                let mut q = p.clone();
                                q.push(origin[c] + scale * m);
                                q
                            })
                        })
                        .collect();
                }
                Ok(Self::cloud(dim, points))
            }
        }
    }

    fn cloud(dim: usize, mut points: Vec<Vec<f64>>) -> Self {
        points.sort_by(|a, b| a[0].total_cmp(&b[0]));
        Self::Cloud { dim, points: points.concat() }
    }

    pub fn dist(&self, y: &[f64]) -> f64 {
        match self {
            Self::Point(x) => euclid(x, y),
            Self::Ball(c, r) => (euclid(c, y) - r).max(0.0),
            Self::Cloud { dim, points } => {
                let n = points.len() / dim;
                let x0 = |i: usize| points[i * dim];
                let start = points.chunks(*dim).position(|p| p[0] >= y[0]).unwrap_or(n);
                let mut best = f64::INFINITY;
                let mut i = start;
                while i < n && x0(i) - y[0] < best {
                    best = best.min(euclid(&points[i * dim..(i + 1) * dim], y));
                    i += 1;
                }
                let mut i = start;
                while i > 0 && y[0] - x0(i - 1) < best {
                    i -= 1;
                    best = best.min(euclid(&points[i * dim..(i + 1) * dim], y));
                }
                best
            }
        }
    }

    /// `[lo, hi]` for one-dimensional point and ball targets.
    fn interval(&self) -> Option<(f64, f64)> {
        match self {
            Self::Point(x) if x.len() == 1 => Some((x[0], x[0])),
            Self::Ball(c, r) if c.len() == 1 => Some((c[0] - r, c[0] + r)),
            _ => None,
        }
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl TimeSetSpec {
    /// Sorted disjoint segments inside `(0, 1]`.
    pub fn resolve(&self) -> Result<Vec<(f64, f64)>> {
        let segs = match self {
            Self::Interval { a, b } => vec![(*a, *b)],
            Self::Segments { segments } => segments.iter().map(|s| (s[0], s[1])).collect(),
            Self::Cantor { lambda, depth, origin, scale } => {
                tree_segments(&build_cantor_lambda(*lambda, *depth)?, *origin, *scale)
            }
            Self::EPhi { profile, origin, l0, depth } => {
                tree_segments(&build_e_phi_at(*profile, *origin, *l0, *depth)?, 0.0, 1.0)
            }
        };
        check_segments(&segs)?;
        Ok(segs)
    }
}

/// Leaf intervals of a tree, mapped by `x ↦ origin + scale·x`.
pub fn tree_segments(t: &CantorTree, origin: f64, scale: f64) -> Vec<(f64, f64)> {
    let l = t.leaf_length();
    t.leaves().iter().map(|&x| (origin + scale * x, origin + scale * (x + l))).collect()
}

fn check_segments(segs: &[(f64, f64)]) -> Result<()> {
    if segs.is_empty() {
        return Err(precondition("time set is empty"));
    }
    for &(a, b) in segs {
        if !(a > 0.0 && b >= a && b <= 1.0) {
            return Err(precondition(format!("segment [{a}, {b}] must lie in (0, 1]")));
        }
    }
    if segs.windows(2).any(|w| !(w[1].0 > w[0].1)) {
        return Err(precondition("segments must be sorted and disjoint"));
    }
    Ok(())
}

/// How paths are generated and where they are monitored.
#[derive(Debug, Clone)]
pub struct PathEngine {
    pub hurst: f64,
    pub dim: usize,
    /// Monitoring times, increasing.
    pub times: Vec<f64>,
    /// Index ranges of `times` forming continuous runs inside `E`.
    pub runs: Vec<(usize, usize)>,
    /// Largest spacing inside a run.
    pub max_step: f64,
    grid: Option<(Simulator, Vec<usize>)>,
}

impl PathEngine {
    /// For `H = 1/2`, Brownian motion is sampled exactly at `steps + 1`
    /// equally spaced times per segment. Otherwise fBm is sampled on the
    /// grid `i/steps` of `[0, 1]` (`steps` a power of two) and monitored at
    /// the grid times inside `E`.
    pub fn new(hurst: f64, dim: usize, segments: &[(f64, f64)], steps: usize) -> Result<Self> {
        check_segments(segments)?;
        if steps == 0 {
            return Err(precondition("steps must be positive"));
        }
        if hurst == 0.5 {
            let mut times = Vec::new();
            let mut runs = Vec::new();
            for &(a, b) in segments {
                let start = times.len();
                if b == a {
                    times.push(a);
                } else {
                    times.extend((0..=steps).map(|j| a + (b - a) * j as f64 / steps as f64));
                }
                runs.push((start, times.len()));
            }
            let max_step = segments.iter().map(|(a, b)| (b - a) / steps as f64).fold(0.0, f64::max);
            return Ok(Self { hurst, dim, times, runs, max_step, grid: None });
        }
        let sim = Simulator::new(ProcessSpec::fbm(hurst, dim), steps, &SimOptions::default())?;
        let tol = 1e-12;
        let mut idx = Vec::new();
        let mut runs = Vec::new();
        for &(a, b) in segments {
            let lo = ((a - tol) * steps as f64).ceil().max(0.0) as usize;
            let hi = (((b + tol) * steps as f64).floor() as usize).min(steps);
            if lo <= hi {
                let start = idx.len();
                idx.extend(lo..=hi);
                runs.push((start, idx.len()));
            }
        }
        if idx.is_empty() {
            return Err(precondition(format!("time set is empty after masking to the grid i/{steps}")));
        }
        let times = idx.iter().map(|&i| i as f64 / steps as f64).collect();
        Ok(Self { hurst, dim, times, runs, max_step: 1.0 / steps as f64, grid: Some((sim, idx)) })
    }

    /// Values of `B^H` at the monitoring times, `times.len() × dim`.
    pub fn sample(&self, seed: u64, path: usize) -> Vec<f64> {
        let d = self.dim;
        match &self.grid {
            Some((sim, idx)) => {
                let full = sim.sample_path(seed, path);
                idx.iter().flat_map(|&i| full[i * d..(i + 1) * d].to_vec()).collect()
            }
            None => {
                let mut out = vec![0.0; self.times.len() * d];
                for c in 0..d {
                    let mut rng = path_stream(seed, "brownian", path, c);
                    let (mut t, mut x) = (0.0, 0.0);
                    for (i, &ti) in self.times.iter().enumerate() {
                        let z: f64 = rng.sample(StandardNormal);
                        x += (ti - t).sqrt() * z;
                        t = ti;
                        out[i * d + c] = x;
                    }
                }
                out
            }
        }
    }

    /// Grid-induced tolerance floor `3 Δt^H √log(1/Δt)`.
    pub fn floor(&self) -> f64 {
        let dt = self.max_step;
        if dt <= 0.0 || dt >= 1.0 {
            return 0.0;
        }
        3.0 * dt.powf(self.hurst) * (1.0 / dt).ln().sqrt()
    }
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Holder { coef, exponent } => {
                if coef.is_finite() && *exponent > 0.0 {
                    Ok(())
                } else {
                    Err(domain("Hölder drift needs a finite coefficient and a positive exponent"))
                }
            }
            Self::FrozenDelta { alpha, theta, .. } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(domain(format!("drift alpha = {alpha} must lie in (0, 1)")));
                }
                theta.validate()
            }
        }
    }

    /// `f` at `times`, `times.len() × dim`.
    pub fn values(&self, times: &[f64], dim: usize) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            Self::Zero => Ok(vec![0.0; times.len() * dim]),
            Self::Holder { coef, exponent } => {
                Ok(times.iter().flat_map(|&t| vec![coef * t.powf(*exponent); dim]).collect())
            }
            Self::FrozenDelta { alpha, theta, seed, index } => {
                let table = IncrementVariance::build(*alpha, *theta, SimOptions::default().quadrature_tol)?;
                let mut drifts = freeze_drifts_at(&table, dim, times, *seed, index + 1)?;
                Ok(drifts.swap_remove(*index).values)
            }
        }
    }
}

/// Hitting experiment on `B^H + f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HittingExperiment {
    pub hurst: f64,
    pub dim: usize,
    pub drift: DriftSpec,
    pub time_set: TimeSetSpec,
    pub target: TargetSpec,
    /// Grid ladder: subdivisions per segment for `H = 1/2`, otherwise the
    /// grid size on `[0, 1]`.
    pub steps: Vec<usize>,
    /// Tolerance ladder, strictly decreasing.
    pub eps: Vec<f64>,
    pub n_paths: usize,
    /// Exact Brownian-bridge crossing correction (`H = 1/2`, `d = 1`,
    /// point or ball target).
    pub bridge: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub steps: usize,
    pub eps: f64,
    pub hits: usize,
    pub n_paths: usize,
    pub p_hat: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitEstimate {
    pub p_hat: f64,
    pub ci: (f64, f64),
    pub eps: f64,
    pub steps: usize,
    pub floor: f64,
    pub monitored: usize,
    pub rungs: Vec<Rung>,
}

impl HitEstimate {
    /// Finest-`steps` rungs in ladder order.
    pub fn eps_ladder(&self) -> Vec<&Rung> {
        self.rungs.iter().filter(|r| r.steps == self.steps).collect()
    }
}

/// Wilson 95% interval.
pub fn wilson(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let (n, p) = (n as f64, hits as f64 / n as f64);
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * ((p * (1.0 - p) + z * z / (4.0 * n)) / n).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

impl HittingExperiment {
    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(domain(format!("hurst = {} must lie in (0, 1)", self.hurst)));
        }
        if self.dim == 0 {
            return Err(domain("dim must be at least 1"));
        }
        if self.n_paths == 0 || self.steps.is_empty() || self.eps.is_empty() {
            return Err(precondition("n_paths, steps and eps must be non-empty"));
        }
        if self.eps.iter().any(|e| !(*e >= 0.0)) || self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(precondition("eps ladder must be non-negative and strictly decreasing"));
        }
        if self.bridge && !(self.hurst == 0.5 && self.dim == 1) {
            return Err(precondition("the bridge correction needs H = 1/2 and d = 1"));
        }
        let target = Target::from_spec(&self.target, self.dim)?;
        if self.bridge && target.interval().is_none() {
            return Err(precondition("the bridge correction needs a point or ball target"));
        }
        self.drift.validate()?;
        self.time_set.resolve().map(|_| ())
    }
}

/// Per path and tolerance: did `B^H + f` come within `ε` of `F` on `E`?
pub fn estimate_hitting(exp: &HittingExperiment) -> Result<HitEstimate> {
    exp.validate()?;
    let segments = exp.time_set.resolve()?;
    let target = Target::from_spec(&exp.target, exp.dim)?;
    let mut rungs = Vec::new();
    let mut last = None;
    for &steps in &exp.steps {
        let engine = PathEngine::new(exp.hurst, exp.dim, &segments, steps)?;
        let floor = engine.floor();
        if !exp.bridge {
            // ε = 0 against a one-dimensional interval target only counts
            // certified crossings, so no floor applies to it.
            let exact_zero = |e: f64| e == 0.0 && exp.dim == 1 && target.interval().is_some();
            if let Some(&e) = exp.eps.iter().find(|&&e| e < floor && !exact_zero(e)) {
                return Err(precondition(format!(
                    "eps = {e:.4e} is below the grid floor 3·Δt^H·√log(1/Δt) = {floor:.4e} (Δt = {:.3e})",
                    engine.max_step
                )));
            }
        }
        let drift = exp.drift.values(&engine.times, exp.dim)?;
        let hits = hit_counts(&engine, &drift, &target, &exp.eps, exp.bridge, exp.n_paths, exp.seed);
        for (e, h) in exp.eps.iter().zip(hits) {
            rungs.push(Rung {
                steps,
                eps: *e,
                hits: h,
                n_paths: exp.n_paths,
                p_hat: h as f64 / exp.n_paths as f64,
                ci: wilson(h, exp.n_paths),
            });
        }
        last = Some((steps, floor, engine.times.len()));
    }
    let (steps, floor, monitored) = last.expect("non-empty ladder");
    let fin = rungs.last().expect("non-empty ladder").clone();
    Ok(HitEstimate { p_hat: fin.p_hat, ci: fin.ci, eps: fin.eps, steps, floor, monitored, rungs })
}

/// Hit counts per tolerance for paths `0..n_paths` with a precomputed drift.
pub fn hit_counts(
    engine: &PathEngine,
    drift: &[f64],
    target: &Target,
    eps: &[f64],
    bridge: bool,
    n_paths: usize,
    seed: u64,
) -> Vec<usize> {
    let per_path = exec::map_indexed(n_paths, |p| {
        let mut y = engine.sample(seed, p);
        for (v, f) in y.iter_mut().zip(drift) {
            *v += f;
        }
        path_hits(engine, &y, target, eps, bridge, seed, p)
    });
    let mut counts = vec![0; eps.len()];
    for hits in per_path {
        for (c, h) in counts.iter_mut().zip(hits) {
            *c += h as usize;
        }
    }
    counts
}

fn straddles(engine: &PathEngine, y: &[f64], lo: f64, hi: f64) -> bool {
    engine.runs.iter().any(|&(s, t)| {
        (s..t.saturating_sub(1)).any(|i| (y[i] < lo && y[i + 1] > hi) || (y[i] > hi && y[i + 1] < lo))
    })
}

fn path_hits(engine: &PathEngine, y: &[f64], target: &Target, eps: &[f64], bridge: bool, seed: u64, p: usize) -> Vec<bool> {
    let d = engine.dim;
    let m = (0..engine.times.len()).map(|i| target.dist(&y[i * d..(i + 1) * d])).fold(f64::INFINITY, f64::min);
    if !bridge {
        // In d = 1 a sign change across the tube is a certain hit.
        return match target.interval().filter(|_| d == 1) {
            Some((lo, hi)) => eps.iter().map(|&e| m <= e || straddles(engine, y, lo - e, hi + e)).collect(),
            None => eps.iter().map(|&e| m <= e).collect(),
        };
    }
    let (lo, hi) = target.interval().expect("validated");
    let u: f64 = stream(seed, "bridge", p as u64).gen();
    eps.iter()
        .map(|&e| {
            if m <= e {
                return true;
            }
            let (lo, hi) = (lo - e, hi + e);
            let mut log_miss = 0.0;
            for &(s, t) in &engine.runs {
                for i in s..t.saturating_sub(1) {
                    let (a, b) = (y[i], y[i + 1]);
                    let dt = engine.times[i + 1] - engine.times[i];
                    let q = if a > hi && b > hi {
                        (-2.0 * (a - hi) * (b - hi) / dt).exp()
                    } else if a < lo && b < lo {
                        (-2.0 * (lo - a) * (lo - b) / dt).exp()
                    } else {
                        1.0
                    };
                    log_miss += (-q).ln_1p();
                }
            }
            u < -log_miss.exp_m1()
        })
        .collect()
}

/// Experiment thresholds. These are configuration, not theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Required `p̂(E2)/p̂(E1)` at the finest rung.
    pub separation: f64,
    /// Relative change allowed over the last two hitting rungs.
    pub hit_stability: f64,
    /// Largest `p̂(ε/2)/p̂(ε)` counted as decay.
    pub hit_decay: f64,
    /// Relative change allowed over the last two capacity rungs.
    pub capacity_stability: f64,
    /// Largest Hausdorff ratio between consecutive depth rungs counted as
    /// shrinking.
    pub hausdorff_shrink: f64,
    /// Shallowest tree depth whose hitting ladders are read as asymptotic.
    pub min_depth: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { separation: 5.0, hit_stability: 0.10, hit_decay: 0.7, capacity_stability: 0.10, hausdorff_shrink: 0.75, min_depth: 8 }
    }
}

/// Positive at the last rung and within `tol` of the rung before.
pub fn stable_positive(values: &[f64], tol: f64) -> bool {
    match values {
        [.., a, b] => *b > 0.0 && (b / a - 1.0).abs() <= tol,
        [b] => *b > 0.0,
        [] => false,
    }
}

/// Every consecutive ratio at most `ratio`.
pub fn decays(values: &[f64], ratio: f64) -> bool {
    values.len() >= 2 && values.windows(2).all(|w| w[1] <= ratio * w[0])
}

const FW_TOL: f64 = 1e-6;
const FW_ITER: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphHitReport {
    pub estimate: HitEstimate,
    pub graph_points: usize,
    pub resolution: f64,
    pub capacity: f64,
    pub capacity_converged: bool,
    /// `(δ, H^d_δ)` on the graph.
    pub hausdorff: Vec<(f64, f64)>,
}

/// Hitting estimate together with capacity and Hausdorff evidence for the
/// graph of `f` over `E` in the parabolic metric, at order `d`.
pub fn point_hitting_via_graph(exp: &HittingExperiment, graph_points: usize) -> Result<GraphHitReport> {
    if !matches!(exp.target, TargetSpec::Point { .. }) {
        return Err(precondition("graph evidence needs a point target"));
    }
    let estimate = estimate_hitting(exp)?;
    let segments = exp.time_set.resolve()?;
    let steps = *exp.steps.last().expect("validated");
    let engine = PathEngine::new(exp.hurst, exp.dim, &segments, steps)?;
    let drift = exp.drift.values(&engine.times, exp.dim)?;
    let n = engine.times.len();
    let stride = n.div_ceil(graph_points.max(1)).max(1);
    let keep: Vec<usize> = (0..n).step_by(stride).collect();
    let d = exp.dim;
    let times: Vec<f64> = keep.iter().map(|&i| engine.times[i]).collect();
    let values: Vec<f64> = keep.iter().flat_map(|&i| drift[i * d..(i + 1) * d].to_vec()).collect();
    let cloud = graph_cloud(&times, &values, exp.hurst)?;
    let k = RadialKernel::bessel_riesz(d as f64, cloud.resolution)?;
    let cap = capacity(&cloud, &k, FW_TOL, FW_ITER)?;
    let mut hausdorff = Vec::new();
    for m in [64.0, 16.0, 4.0, 1.0] {
        let delta = m * cloud.resolution;
        hausdorff.push((delta, hausdorff_upper(&cloud, d as f64, delta)?));
    }
    Ok(GraphHitReport {
        estimate,
        graph_points: cloud.len(),
        resolution: cloud.resolution,
        capacity: cap.capacity,
        capacity_converged: cap.converged,
        hausdorff,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomyConfig {
    pub hurst: f64,
    pub dim: usize,
    pub beta: f64,
    pub l0: f64,
    /// Left end of both sets.
    pub origin: f64,
    pub depth: usize,
    pub drift: DriftSpec,
    pub target: Vec<f64>,
    /// Subdivisions per leaf (`H = 1/2`) or grid size.
    pub steps: usize,
    pub eps: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    /// Depth ladder for the capacity and Hausdorff evidence.
    pub evidence_depths: Vec<usize>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthEvidence {
    pub depth: usize,
    pub capacity_e2: f64,
    pub hausdorff_e1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub alpha: f64,
    pub e1: HitEstimate,
    pub e2: HitEstimate,
    pub separated: bool,
    pub evidence: Vec<DepthEvidence>,
    pub capacity_stable: bool,
    pub hausdorff_shrinking: bool,
    pub diagnostics: Vec<String>,
}

fn nu_profiles(alpha: f64, beta: f64) -> (ScalingProfile, ScalingProfile) {
    (ScalingProfile::PowerLogPlus { alpha, beta }, ScalingProfile::PowerLogMinus { alpha, beta })
}

/// Hitting on the two critical sets of dimension `Hd`: the `log^{+β}` set
/// has zero `Hd`-Hausdorff measure, the `log^{-β}` set positive capacity.
fn check_hurst(hurst: f64, dim: usize) -> Result<()> {
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(domain(format!("hurst = {hurst} must lie in (0, 1)")));
    }
    if dim == 0 {
        return Err(domain("dim must be at least 1"));
    }
    Ok(())
}

impl DichotomyConfig {
    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst, self.dim)?;
        let alpha = self.hurst * self.dim as f64;
        if !(alpha < 1.0) {
            return Err(domain(format!("H·d = {alpha} must be below 1")));
        }
        if !(self.beta > 1.0) {
            return Err(domain(format!("beta = {} must exceed 1", self.beta)));
        }
        if self.target.len() != self.dim {
            return Err(Error::Shape(format!("target has {} coordinates, dim = {}", self.target.len(), self.dim)));
        }
        let (p1, p2) = nu_profiles(alpha, self.beta);
        p1.validate()?;
        p2.validate()?;
        self.drift.validate()
    }
}

pub fn polarity_dichotomy(cfg: &DichotomyConfig) -> Result<DichotomyReport> {
    cfg.validate()?;
    let alpha = cfg.hurst * cfg.dim as f64;
    let (p1, p2) = nu_profiles(alpha, cfg.beta);
    let bridge = cfg.hurst == 0.5 && cfg.dim == 1;
    let run = |profile: ScalingProfile| {
        estimate_hitting(&HittingExperiment {
            hurst: cfg.hurst,
            dim: cfg.dim,
            drift: cfg.drift.clone(),
            time_set: TimeSetSpec::EPhi { profile, origin: cfg.origin, l0: cfg.l0, depth: cfg.depth },
            target: TargetSpec::Point { x: cfg.target.clone() },
            steps: vec![cfg.steps],
            eps: cfg.eps.clone(),
            n_paths: cfg.n_paths,
            bridge,
            seed: cfg.seed,
        })
    };
    let (e1, e2) = (run(p1)?, run(p2)?);
    let th = cfg.thresholds;
    let deep_enough = cfg.depth >= th.min_depth;
    let separated = deep_enough && e2.p_hat > 0.0 && e2.p_hat >= th.separation * e1.p_hat;

    let mut evidence = Vec::new();
    for &k in &cfg.evidence_depths {
        let t1 = build_e_phi_at(p1, 0.0, cfg.l0, k)?;
        let t2 = build_e_phi_at(p2, 0.0, cfg.l0, k)?;
        let c1 = t1.leaf_cloud(MetricDescriptor::Euclidean)?;
        let c2 = t2.leaf_cloud(MetricDescriptor::Euclidean)?;
        let cap = capacity(&c2, &RadialKernel::bessel_riesz(alpha, c2.resolution)?, FW_TOL, FW_ITER)?;
        let h = hausdorff_upper(&c1, alpha, t1.leaf_length().max(c1.resolution))?;
        evidence.push(DepthEvidence { depth: k, capacity_e2: cap.capacity, hausdorff_e1: h });
    }
    let caps: Vec<f64> = evidence.iter().map(|e| e.capacity_e2).collect();
    let hs: Vec<f64> = evidence.iter().map(|e| e.hausdorff_e1).collect();
    let capacity_stable = stable_positive(&caps, th.capacity_stability);
    let hausdorff_shrinking = decays(&hs, th.hausdorff_shrink);
    let mut diagnostics = Vec::new();
    if !deep_enough {
        diagnostics.push(format!(
            "insufficient depth {} < {}: ladders not separated at this depth",
            cfg.depth, th.min_depth
        ));
    } else if !separated {
        diagnostics.push(format!(
            "ladders not separated at depth {}: p(E2) = {:.4}, p(E1) = {:.4}; increase depth",
            cfg.depth, e2.p_hat, e1.p_hat
        ));
    }
    if !capacity_stable {
        diagnostics.push("capacity of E2 not stable across the depth ladder".into());
    }
    if !hausdorff_shrinking {
        diagnostics.push("Hausdorff sums of E1 not shrinking across the depth ladder".into());
    }
    Ok(DichotomyReport { alpha, e1, e2, separated, evidence, capacity_stable, hausdorff_shrinking, diagnostics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpnessConfig {
    pub hurst: f64,
    pub dim: usize,
    /// Ahlfors exponent of the target, in `[0, d)`.
    pub gamma: f64,
    pub theta: SlowVarySpec,
    pub l0: f64,
    pub origin: f64,
    /// Depth ladder for the Hausdorff and capacity evidence; hitting runs
    /// at the deepest one.
    pub depths: Vec<usize>,
    pub target: TargetSpec,
    pub steps: usize,
    pub eps: Vec<f64>,
    pub n_paths: usize,
    /// Number of frozen drifts tried.
    pub n_drifts: usize,
    pub seed: u64,
    #[serde(default = "sharpness_thresholds")]
    pub thresholds: Thresholds,
}

pub fn sharpness_thresholds() -> Thresholds {
    Thresholds { capacity_stability: 0.15, hausdorff_shrink: 0.8, ..Thresholds::default() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRung {
    pub depth: usize,
    pub leaf_length: f64,
    pub hausdorff: f64,
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftHit {
    pub index: usize,
    pub estimate: HitEstimate,
    pub positive_stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub profile: ScalingProfile,
    pub hausdorff_order: f64,
    pub ladder: Vec<SharpnessRung>,
    pub hausdorff_decays: bool,
    pub capacity_stable: bool,
    pub drifts: Vec<DriftHit>,
    /// Fraction of frozen drifts with a positive, stable hitting ladder.
    pub fraction_with_property: f64,
    pub separated: bool,
}

/// Time set from the gauge `φ(r) = (r^H ℓ_θ(r))^{d−γ}`: its Hausdorff sums
/// at order `H(d−γ)`, its capacity under `1/φ`, and hitting of the target by
/// `B^H + f` for frozen `δ_θ` drifts `f`.
impl SharpnessConfig {
    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst, self.dim)?;
        let d = self.dim as f64;
        if !(self.gamma >= 0.0 && self.gamma < d) {
            return Err(domain(format!("gamma = {} must lie in [0, d)", self.gamma)));
        }
        if self.depths.is_empty() || self.n_drifts == 0 {
            return Err(precondition("depth ladder and drift count must be non-empty"));
        }
        self.theta.validate()
    }
}

pub fn sharpness_experiment(cfg: &SharpnessConfig) -> Result<SharpnessReport> {
    cfg.validate()?;
    let d = cfg.dim as f64;
    let profile = ScalingProfile::RegVarPower { hurst: cfg.hurst, theta: cfg.theta, exponent: d - cfg.gamma };
    let order = cfg.hurst * (d - cfg.gamma);
    let mut ladder = Vec::new();
    for &k in &cfg.depths {
        let t = build_e_phi_at(profile, 0.0, cfg.l0, k)?;
        let c = t.leaf_cloud(MetricDescriptor::Euclidean)?;
        let h = hausdorff_upper(&c, order, t.leaf_length().max(c.resolution))?;
        let kern = RadialKernel::new(KernelSpec::InverseGauge { profile }, c.resolution)?;
        let cap = capacity(&c, &kern, FW_TOL, FW_ITER)?;
        ladder.push(SharpnessRung { depth: k, leaf_length: t.leaf_length(), hausdorff: h, capacity: cap.capacity });
    }
    let th = cfg.thresholds;
    let hs: Vec<f64> = ladder.iter().map(|r| r.hausdorff).collect();
    let cs: Vec<f64> = ladder.iter().map(|r| r.capacity).collect();
    let hausdorff_decays = decays(&hs, th.hausdorff_shrink);
    let capacity_stable = stable_positive(&cs, th.capacity_stability);

    let depth = *cfg.depths.last().expect("non-empty");
    let time_set = TimeSetSpec::EPhi { profile, origin: cfg.origin, l0: cfg.l0, depth };
    let segments = time_set.resolve()?;
    let target = Target::from_spec(&cfg.target, cfg.dim)?;
    let bridge = cfg.hurst == 0.5 && cfg.dim == 1 && target.interval().is_some();
    let exp = HittingExperiment {
        hurst: cfg.hurst,
        dim: cfg.dim,
        drift: DriftSpec::Zero,
        time_set,
        target: cfg.target.clone(),
        steps: vec![cfg.steps],
        eps: cfg.eps.clone(),
        n_paths: cfg.n_paths,
        bridge,
        seed: cfg.seed,
    };
    exp.validate()?;
    let engine = PathEngine::new(cfg.hurst, cfg.dim, &segments, cfg.steps)?;
    if !bridge {
        if let Some(&e) = cfg.eps.iter().find(|&&e| e < engine.floor()) {
            return Err(precondition(format!("eps = {e:.4e} is below the grid floor {:.4e}", engine.floor())));
        }
    }
    let table = IncrementVariance::build(cfg.hurst, cfg.theta, SimOptions::default().quadrature_tol)?;
    let drift_seed = crate::rng::derive_seed(cfg.seed, "sharpness-drift");
    let frozen = freeze_drifts_at(&table, cfg.dim, &engine.times, drift_seed, cfg.n_drifts)?;
    let mut drifts = Vec::new();
    for (index, f) in frozen.iter().enumerate() {
        let hits = hit_counts(&engine, &f.values, &target, &cfg.eps, bridge, cfg.n_paths, cfg.seed);
        let rungs: Vec<Rung> = cfg
            .eps
            .iter()
            .zip(&hits)
            .map(|(&eps, &h)| Rung {
                steps: cfg.steps,
                eps,
                hits: h,
                n_paths: cfg.n_paths,
                p_hat: h as f64 / cfg.n_paths as f64,
                ci: wilson(h, cfg.n_paths),
            })
            .collect();
        let ps: Vec<f64> = rungs.iter().map(|r| r.p_hat).collect();
        let fin = rungs.last().expect("validated").clone();
        let estimate = HitEstimate {
            p_hat: fin.p_hat,
            ci: fin.ci,
            eps: fin.eps,
            steps: cfg.steps,
            floor: engine.floor(),
            monitored: engine.times.len(),
            rungs,
        };
        drifts.push(DriftHit { index, estimate, positive_stable: stable_positive(&ps, th.hit_stability) });
    }
    let good = drifts.iter().filter(|d| d.positive_stable).count();
    let fraction_with_property = good as f64 / drifts.len() as f64;
    Ok(SharpnessReport {
        profile,
        hausdorff_order: order,
        ladder,
        hausdorff_decays,
        capacity_stable,
        drifts,
        fraction_with_property,
        separated: hausdorff_decays && capacity_stable && good > 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelCheckConfig {
    pub hurst: f64,
    pub theta: SlowVarySpec,
    pub dim: usize,
    pub times: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_band")]
    pub band: f64,
}

fn default_band() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheckRow {
    pub t: f64,
    pub delta: f64,
    pub mc: f64,
    pub se: f64,
    pub quadrature: f64,
    pub phi: f64,
    pub ratio: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheckReport {
    pub rows: Vec<KernelCheckRow>,
    /// Fitted constant: largest `E/Φ` over the ladder.
    pub c3: f64,
    /// `max/min` of `E/Φ` over the ladder.
    pub band: f64,
    pub all_agree: bool,
    pub band_ok: bool,
}

/// `Γ(d/2)` for integer `d ≥ 1`.
fn half_gamma(d: usize) -> f64 {
    let mut g = if d.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    let mut x = if d.is_multiple_of(2) { 1.0 } else { 0.5 };
    while x < d as f64 / 2.0 {
        g *= x;
        x += 1.0;
    }
    g
}

/// `E[max{a, b‖N‖}^{-d}]` for standard normal `N` in `ℝ^d`, by quadrature
/// against the chi density.
pub fn max_norm_expectation(a: f64, b: f64, d: usize) -> Result<f64> {
    let norm = 2f64.powf(d as f64 / 2.0 - 1.0) * half_gamma(d);
    let chi = |r: f64| r.powi(d as i32 - 1) * (-0.5 * r * r).exp() / norm;
    let c = a / b;
    let inner = integrate(|r| chi(r) * a.powi(-(d as i32)), 0.0, c, 1e-13, 1e-11, 10_000)?;
    let outer = integrate(|r| chi(r) * (b * r).powi(-(d as i32)), c, c + 40.0, 1e-13, 1e-11, 10_000)?;
    Ok(inner.value + outer.value)
}

/// Monte Carlo `E[max{t^H, ‖B^δ(t)‖}^{-d}]` against quadrature and `Φ_{H,ℓ}`.
impl KernelCheckConfig {
    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst, self.dim)?;
        if self.times.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(domain("ladder times must lie in (0, 1)"));
        }
        if self.n_paths < 2 {
            return Err(precondition("need at least two paths"));
        }
        self.theta.validate()
    }
}

pub fn kernel_expectation_check(cfg: &KernelCheckConfig) -> Result<KernelCheckReport> {
    cfg.validate()?;
    let table = IncrementVariance::build(cfg.hurst, cfg.theta, SimOptions::default().quadrature_tol)?;
    let d = cfg.dim;
    let mut rows = Vec::new();
    for (k, &t) in cfg.times.iter().enumerate() {
        let delta = table.delta(t);
        let a = t.powf(cfg.hurst);
        let samples = exec::map_indexed(cfg.n_paths, |p| {
            let mut rng = path_stream(cfg.seed, "kernel-check", p, k);
            let r2: f64 = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum();
            a.max(delta * r2.sqrt()).powi(-(d as i32))
        });
        let (mc, se) = mean_and_se(&samples);
        let quadrature = max_norm_expectation(a, delta, d)?;
        let phi = crate::potential::eval_phi_hl(cfg.hurst, d, &cfg.theta, t)?;
        rows.push(KernelCheckRow {
            t,
            delta,
            mc,
            se,
            quadrature,
            phi,
            ratio: mc / phi,
            agrees: (mc - quadrature).abs() <= 3.0 * se,
        });
    }
    let c3 = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let lo = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let band = c3 / lo;
    Ok(KernelCheckReport {
        all_agree: rows.iter().all(|r| r.agrees),
        band_ok: band < cfg.band,
        rows,
        c3,
        band,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageConfig {
    pub hurst: f64,
    pub dim: usize,
    pub drift: DriftSpec,
    pub time_set: TimeSetSpec,
    pub steps: usize,
    pub n_paths: usize,
    /// Voxel widths, strictly decreasing.
    pub widths: Vec<f64>,
    /// Voxels are counted inside `[-bound, bound]^d`.
    pub bound: f64,
    /// Largest number of voxels per path and width.
    pub voxel_budget: usize,
    pub seed: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRung {
    pub width: f64,
    pub mean_volume: f64,
    pub se: f64,
    pub fraction_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub rungs: Vec<ImageRung>,
    /// Mean-volume ratios between consecutive widths.
    pub ratios: Vec<f64>,
    pub decays: bool,
    pub positive_stable: bool,
}

/// Volume of the voxels of width `w` met by the polyline through `y`
/// (`d ≤ 2`) over each run.
pub fn voxel_volume(y: &[f64], dim: usize, runs: &[(usize, usize)], w: f64, bound: f64, budget: usize) -> Result<f64> {
    let cell = |x: f64| (x / w).floor() as i64;
    let inside = |x: f64| x.abs() <= bound;
    match dim {
        1 => {
            let mut spans: Vec<(i64, i64)> = Vec::new();
            for &(s, t) in runs {
                let seg = &y[s..t];
                let lo = seg.iter().cloned().fold(f64::INFINITY, f64::min).max(-bound);
                let hi = seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max).min(bound);
                if lo <= hi {
                    spans.push((cell(lo), cell(hi)));
                }
            }
            spans.sort_unstable();
            let mut count: i64 = 0;
            let mut cur: Option<(i64, i64)> = None;
            for (a, b) in spans {
                cur = match cur {
                    Some((ca, cb)) if a <= cb + 1 => Some((ca, cb.max(b))),
                    Some((ca, cb)) => {
                        count += cb - ca + 1;
                        Some((a, b))
                    }
                    None => Some((a, b)),
                };
            }
            if let Some((ca, cb)) = cur {
                count += cb - ca + 1;
            }
            if count as usize > budget {
                return Err(Error::Budget(format!("{count} voxels exceed the budget {budget}")));
            }
            Ok(count as f64 * w)
        }
        2 => {
            let mut cells: HashSet<(i64, i64)> = HashSet::new();
            let mut mark = |x: f64, z: f64| -> Result<()> {
                if inside(x) && inside(z) {
                    cells.insert((cell(x), cell(z)));
                    if cells.len() > budget {
                        return Err(Error::Budget(format!("voxel count exceeds the budget {budget}")));
                    }
                }
                Ok(())
            };
            for &(s, t) in runs {
                mark(y[2 * s], y[2 * s + 1])?;
                for i in s + 1..t {
                    let (x0, z0, x1, z1) = (y[2 * i - 2], y[2 * i - 1], y[2 * i], y[2 * i + 1]);
                    let len = ((x1 - x0).powi(2) + (z1 - z0).powi(2)).sqrt();
                    // Sampling at a quarter voxel width.
                    let k = (4.0 * len / w).ceil().max(1.0) as usize;
                    for j in 1..=k {
                        let u = j as f64 / k as f64;
                        mark(x0 + u * (x1 - x0), z0 + u * (z1 - z0))?;
                    }
                }
            }
            Ok(cells.len() as f64 * w * w)
        }
        _ => Err(precondition("voxel counting supports d ≤ 2")),
    }
}

/// Voxel volume of the image `(B^H + f)(E)` over a width ladder.
impl ImageConfig {
    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst, self.dim)?;
        if self.dim > 2 {
            return Err(precondition("image measure needs d ∈ {1, 2}"));
        }
        if self.widths.is_empty() || self.widths.iter().any(|w| !(*w > 0.0)) || self.widths.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(precondition("voxel widths must be positive and strictly decreasing"));
        }
        if self.n_paths < 2 || !(self.bound > 0.0) {
            return Err(precondition("need at least two paths and a positive bound"));
        }
        self.drift.validate()?;
        self.time_set.resolve().map(|_| ())
    }
}

pub fn image_measure_estimate(cfg: &ImageConfig) -> Result<ImageReport> {
    cfg.validate()?;
    let segments = cfg.time_set.resolve()?;
    let engine = PathEngine::new(cfg.hurst, cfg.dim, &segments, cfg.steps)?;
    let drift = cfg.drift.values(&engine.times, cfg.dim)?;
    let per_path = exec::map_indexed(cfg.n_paths, |p| -> Result<Vec<f64>> {
        let mut y = engine.sample(cfg.seed, p);
        for (v, f) in y.iter_mut().zip(&drift) {
            *v += f;
        }
        cfg.widths
            .iter()
            .map(|&w| voxel_volume(&y, cfg.dim, &engine.runs, w, cfg.bound, cfg.voxel_budget))
            .collect()
    });
    let per_path: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<_>>()?;
    let mut rungs = Vec::new();
    for (k, &w) in cfg.widths.iter().enumerate() {
        let vols: Vec<f64> = per_path.iter().map(|v| v[k]).collect();
        let (mean_volume, se) = mean_and_se(&vols);
        let positive = vols.iter().filter(|&&v| v > 0.0).count();
        rungs.push(ImageRung { width: w, mean_volume, se, fraction_positive: positive as f64 / vols.len() as f64 });
    }
    let means: Vec<f64> = rungs.iter().map(|r| r.mean_volume).collect();
    let ratios = means.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(ImageReport {
        ratios,
        decays: decays(&means, cfg.thresholds.hit_decay),
        positive_stable: stable_positive(&means, cfg.thresholds.hit_stability),
        rungs,
    })
}
