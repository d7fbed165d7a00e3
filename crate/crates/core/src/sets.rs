//! Nested two-branch interval constructions with their mass-distribution
//! measures, graph clouds, and Ahlfors-David regularity checks.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Error, Result};
use crate::metric::{least_squares, MetricDescriptor, PointCloud};
use crate::svf::SlowVarySpec;

pub const MAX_DEPTH: usize = 24;

/// Gauge function `φ` driving the interval lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalingProfile {
    /// `r^α`
    Power { alpha: f64 },
    /// `r^α log^β(e/r)`
    PowerLogPlus { alpha: f64, beta: f64 },
    /// `r^α log^{-β}(e/r)`
    PowerLogMinus { alpha: f64, beta: f64 },
    /// `(r^H ℓ(r))^{exponent}` with `ℓ(r) = L(1/r)^{-1/2}`.
    RegVarPower { hurst: f64, theta: SlowVarySpec, exponent: f64 },
}

impl ScalingProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Power { alpha } => alpha > 0.0,
            Self::PowerLogPlus { alpha, beta } | Self::PowerLogMinus { alpha, beta } => alpha > 0.0 && beta >= 0.0,
            Self::RegVarPower { hurst, theta, exponent } => {
                theta.validate()?;
                hurst > 0.0 && hurst < 1.0 && exponent > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(domain(format!("invalid scaling profile {self:?}")))
        }
    }

    /// `φ(r)` for `r ≥ 0`, with `φ(0) = 0`.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match *self {
            Self::Power { alpha } => r.powf(alpha),
            Self::PowerLogPlus { alpha, beta } => r.powf(alpha) * (1.0 - r.ln()).powf(beta),
            Self::PowerLogMinus { alpha, beta } => r.powf(alpha) * (1.0 - r.ln()).powf(-beta),
            Self::RegVarPower { hurst, theta, exponent } => {
                let ell = theta.eval(1.0 / r).map(|l| l.powf(-0.5)).unwrap_or(f64::NAN);
                (r.powf(hurst) * ell).powf(exponent)
            }
        }
    }

    /// Checks `φ(2x) < 2φ(x)` on a geometric grid in `(0, x_max/2)`.
    pub fn check_doubling(&self, x_max: f64) -> Result<()> {
        let mut x = x_max / 2.0;
        while x > 1e-200 {
            if !(self.eval(2.0 * x) < 2.0 * self.eval(x)) {
                return Err(Error::Construction(format!("doubling condition fails at x = {x:.3e}")));
            }
            x /= 1.5;
        }
        Ok(())
    }

    /// Smallest `x` solving `φ(x) = y` in `(0, hi]`, by bisection.
    fn invert(&self, y: f64, hi: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0_f64, hi);
        if !(self.eval(hi) >= y) || !(y > 0.0) {
            return Err(Error::Construction(format!("no root of φ(x) = {y:.3e} below {hi:.3e}")));
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

/// Depth-`K` construction: level `k` holds `2^k` disjoint intervals of length
/// `l_k`, each carrying mass `2^{-k}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CantorTree {
    pub depth: usize,
    pub origin: f64,
    pub lengths: Vec<f64>,
    /// Left endpoints per level, sorted.
    pub levels: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ScalingProfile>,
}

impl CantorTree {
    fn from_lengths(origin: f64, lengths: Vec<f64>, profile: Option<ScalingProfile>) -> Result<Self> {
        let depth = lengths.len() - 1;
        for k in 0..depth {
            if 2.0 * lengths[k + 1] > lengths[k] {
                return Err(Error::Overlap(format!(
                    "level {}: 2 l_{} = {:.3e} exceeds l_{} = {:.3e}",
                    k + 1,
                    k + 1,
                    2.0 * lengths[k + 1],
                    k,
                    lengths[k]
                )));
            }
        }
        let mut levels = vec![vec![origin]];
        for k in 1..=depth {
            let offset = lengths[k - 1] - lengths[k];
            let prev = &levels[k - 1];
            let mut next = Vec::with_capacity(prev.len() * 2);
            for &x in prev {
                next.push(x);
                next.push(x + offset);
            }
            levels.push(next);
        }
        Ok(Self { depth, origin, lengths, levels, profile })
    }

    /// Mass of each level-`k` interval.
    pub fn weight(&self, k: usize) -> f64 {
        0.5f64.powi(k as i32)
    }

    pub fn leaf_length(&self) -> f64 {
        self.lengths[self.depth]
    }

    pub fn leaves(&self) -> &[f64] {
        &self.levels[self.depth]
    }

    pub fn leaf_midpoints(&self) -> Vec<f64> {
        let half = 0.5 * self.leaf_length();
        self.leaves().iter().map(|x| x + half).collect()
    }

    /// Depth-`K` midpoints in `metric`, at resolution `d(0, l_K)`.
    pub fn leaf_cloud(&self, metric: MetricDescriptor) -> Result<PointCloud> {
        let resolution = metric.dist(&[0.0], &[self.leaf_length()]);
        PointCloud::new(1, self.leaf_midpoints(), resolution, metric)
    }

    /// `ν([a - r, a + r])` as the total weight of leaves meeting the ball.
    pub fn ball_mass(&self, a: f64, r: f64) -> f64 {
        let leaves = self.leaves();
        let lk = self.leaf_length();
        // Leaves [x, x + l_K] with x + l_K ≥ a - r and x ≤ a + r.
        let first = leaves.partition_point(|&x| x + lk < a - r);
        let last = leaves.partition_point(|&x| x <= a + r);
        (last.saturating_sub(first)) as f64 * self.weight(self.depth)
    }

    /// Leaf rows `left,right,weight`.
    pub fn leaves_csv(&self) -> String {
        let mut out = String::from("left,right,weight\n");
        let (lk, w) = (self.leaf_length(), self.weight(self.depth));
        for &x in self.leaves() {
            let _ = writeln!(out, "{x:e},{:e},{w:e}", x + lk);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_depth(depth: usize) -> Result<()> {
    if depth > MAX_DEPTH {
        Err(domain(format!("depth {depth} exceeds {MAX_DEPTH}")))
    } else {
        Ok(())
    }
}

/// Middle-`(1-2λ)` Cantor set on `[0,1]`, `l_k = λ^k`.
pub fn build_cantor_lambda(lambda: f64, depth: usize) -> Result<CantorTree> {
    check_depth(depth)?;
    if !(lambda > 0.0) {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    if lambda >= 0.5 {
        return Err(Error::Overlap(format!("lambda = {lambda} ≥ 1/2 makes the children overlap")));
    }
    let lengths = (0..=depth).map(|k| lambda.powi(k as i32)).collect();
    CantorTree::from_lengths(0.0, lengths, None)
}

/// `E_φ` on `[origin, origin + l0]` with `φ(l_k) = φ(l0) 2^{-k}`.
pub fn build_e_phi(profile: ScalingProfile, l0: f64, depth: usize) -> Result<CantorTree> {
    build_e_phi_at(profile, 0.0, l0, depth)
}

pub fn build_e_phi_at(profile: ScalingProfile, origin: f64, l0: f64, depth: usize) -> Result<CantorTree> {
    check_depth(depth)?;
    profile.validate()?;
    if !(l0 > 0.0 && l0 < 1.0) {
        return Err(domain(format!("l0 must lie in (0,1), got {l0}")));
    }
    profile.check_doubling(l0)?;
    let top = profile.eval(l0);
    let mut lengths = vec![l0];
    for k in 1..=depth {
        let target = top * 0.5f64.powi(k as i32);
        lengths.push(profile.invert(target, lengths[k - 1])?);
    }
    CantorTree::from_lengths(origin, lengths, Some(profile))
}

/// `(E1, E2)` from `r^α log^{±β}(e/r)`.
pub fn build_nu_pair(alpha: f64, beta: f64, l0: f64, depth: usize) -> Result<(CantorTree, CantorTree)> {
    if !(beta > 1.0) {
        return Err(domain(format!("beta must exceed 1, got {beta}")));
    }
    let e1 = build_e_phi(ScalingProfile::PowerLogPlus { alpha, beta }, l0, depth)?;
    let e2 = build_e_phi(ScalingProfile::PowerLogMinus { alpha, beta }, l0, depth)?;
    Ok((e1, e2))
}

/// `{(t, f(t))}` under `max{|t-s|^H, ‖x-y‖}`. `f_values` holds one state row
/// of length `d` per time.
pub fn graph_cloud(times: &[f64], f_values: &[f64], hurst: f64) -> Result<PointCloud> {
    let n = times.len();
    if n == 0 || !f_values.len().is_multiple_of(n) || f_values.is_empty() {
        return Err(Error::Shape(format!("{} times but {} state values", n, f_values.len())));
    }
    let d = f_values.len() / n;
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(precondition("time grid must be strictly increasing"));
    }
    let metric = MetricDescriptor::parabolic(hurst)?;
    let mut coords = Vec::with_capacity(n * (d + 1));
    for i in 0..n {
        coords.push(times[i]);
        coords.extend_from_slice(&f_values[i * d..(i + 1) * d]);
    }
    let resolution = if n == 1 {
        1.0
    } else {
        let dt = times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let mut osc: Vec<f64> = (0..n - 1)
            .map(|i| {
                let (a, b) = (&f_values[i * d..(i + 1) * d], &f_values[(i + 1) * d..(i + 2) * d]);
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            })
            .collect();
        osc.sort_by(f64::total_cmp);
        dt.powf(hurst).max(osc[osc.len() / 2])
    };
    PointCloud::new(d + 1, coords, resolution, metric)
}

/// Anything with computable ball masses on the line.
pub trait BallMass {
    fn ball_mass(&self, a: f64, r: f64) -> f64;
    /// Points of the support used as ball centres.
    fn centres(&self) -> Vec<f64>;
}

impl BallMass for CantorTree {
    fn ball_mass(&self, a: f64, r: f64) -> f64 {
        CantorTree::ball_mass(self, a, r)
    }

    fn centres(&self) -> Vec<f64> {
        self.leaf_midpoints()
    }
}

/// Normalized Lebesgue measure on `[a, b]`, sampled at `n + 1` grid points.
#[derive(Debug, Clone, Copy)]
pub struct IntervalMeasure {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl BallMass for IntervalMeasure {
    fn ball_mass(&self, c: f64, r: f64) -> f64 {
        let lo = (c - r).max(self.a);
        let hi = (c + r).min(self.b);
        ((hi - lo) / (self.b - self.a)).max(0.0)
    }

    fn centres(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.a + (self.b - self.a) * i as f64 / self.n as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AhlforsReport {
    pub gamma: f64,
    /// Slope of `log mean ν(B(a,r))` against `log r`.
    pub gamma_est: f64,
    /// `(min, max)` of `ν(B(a,r)) / r^γ`.
    pub ratio_band: (f64, f64),
    /// Per radius: `(r, min ratio, max ratio)`.
    pub per_radius: Vec<(f64, f64, f64)>,
    pub band_limit: f64,
    pub pass: bool,
    pub samples: usize,
}

/// Samples `ν(B(a,r)) / r^γ` over up to `max_centres` support points and the
/// given radii; passes when the band ratio `max/min` is below `band_limit`.
pub fn certify_ahlfors<M: BallMass>(
    measure: &M,
    gamma: f64,
    radii: &[f64],
    band_limit: f64,
    max_centres: usize,
) -> Result<AhlforsReport> {
    let all = measure.centres();
    if all.is_empty() || radii.is_empty() || max_centres == 0 {
        return Err(Error::InsufficientData("no centres or radii to sample".into()));
    }
    let stride = all.len().div_ceil(max_centres);
    let centres: Vec<f64> = all.iter().copied().step_by(stride).collect();
    let mut per_radius = Vec::with_capacity(radii.len());
    let mut fit = Vec::with_capacity(radii.len());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for &r in radii {
        let masses: Vec<f64> = centres.iter().map(|&a| measure.ball_mass(a, r)).collect();
        let scale = r.powf(gamma);
        let rmin = masses.iter().fold(f64::INFINITY, |m, &x| m.min(x)) / scale;
        let rmax = masses.iter().fold(0.0_f64, |m, &x| m.max(x)) / scale;
        lo = lo.min(rmin);
        hi = hi.max(rmax);
        per_radius.push((r, rmin, rmax));
        let mean = masses.iter().sum::<f64>() / masses.len() as f64;
        fit.push((r.ln(), mean.ln()));
    }
    let gamma_est = if fit.len() > 1 { least_squares(&fit).0 } else { f64::NAN };
    let pass = lo > 0.0 && hi / lo < band_limit;
    Ok(AhlforsReport {
        gamma,
        gamma_est,
        ratio_band: (lo, hi),
        per_radius,
        band_limit,
        pass,
        samples: centres.len() * radii.len(),
    })
}
