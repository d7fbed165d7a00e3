//! Metrics on time, state and time × state, point clouds, covering and
//! packing numbers, and box-dimension regression.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Error, Result};
use crate::exec;
use crate::svf::{IncrementVariance, SlowVarySpec};

/// Serializable description of a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    Euclidean,
    PowerTime { hurst: f64 },
    RegVarTime { hurst: f64, theta: SlowVarySpec },
    ProductMax { time: Box<MetricSpec>, state: Box<MetricSpec> },
}

/// Canonical metric `δ_θ(|t-s|)` of a process with regularly varying
/// increment variance, restricted to lags inside its certified concavity
/// window.
#[derive(Debug)]
pub struct RegVarTime {
    pub hurst: f64,
    pub theta: SlowVarySpec,
    pub table: IncrementVariance,
    /// Largest lag on which `δ_θ` is certified increasing and concave.
    pub window: f64,
}

impl RegVarTime {
    pub fn build(hurst: f64, theta: SlowVarySpec) -> Result<Self> {
        let table = IncrementVariance::build(hurst, theta, 1e-9)?;
        let nodes: Vec<(f64, f64)> = table.table().map(|(h, v)| (h, v.sqrt())).collect();
        let mut window = None;
        let mut prev_slope = f64::INFINITY;
        for (i, w) in nodes.windows(2).enumerate() {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            if slope <= 0.0 || slope >= prev_slope {
                break;
            }
            prev_slope = slope;
            window = Some(nodes[i + 1].0);
        }
        let window = window.ok_or_else(|| {
            Error::Construction("increment standard deviation has no concavity window".into())
        })?;
        Ok(Self { hurst, theta, table, window })
    }

    pub fn delta(&self, lag: f64) -> f64 {
        self.table.delta(lag)
    }
}

/// Runtime metric. Points are flat coordinate slices; time metrics use
/// coordinate 0, `ProductMax` uses coordinate 0 for time and the rest for
/// state.
#[derive(Debug, Clone)]
pub enum MetricDescriptor {
    Euclidean,
    PowerTime(f64),
    RegVarTime(Arc<RegVarTime>),
    ProductMax(Box<MetricDescriptor>, Box<MetricDescriptor>),
}

impl MetricDescriptor {
    pub fn from_spec(spec: &MetricSpec) -> Result<Self> {
        Ok(match spec {
            MetricSpec::Euclidean => Self::Euclidean,
            MetricSpec::PowerTime { hurst } => Self::power_time(*hurst)?,
            MetricSpec::RegVarTime { hurst, theta } => {
                check_hurst(*hurst)?;
                Self::RegVarTime(Arc::new(RegVarTime::build(*hurst, *theta)?))
            }
            MetricSpec::ProductMax { time, state } => {
                let t = Self::from_spec(time)?;
                let s = Self::from_spec(state)?;
                Self::product_max(t, s)?
            }
        })
    }

    pub fn to_spec(&self) -> MetricSpec {
        match self {
            Self::Euclidean => MetricSpec::Euclidean,
            Self::PowerTime(h) => MetricSpec::PowerTime { hurst: *h },
            Self::RegVarTime(r) => MetricSpec::RegVarTime { hurst: r.hurst, theta: r.theta },
            Self::ProductMax(t, s) => {
                MetricSpec::ProductMax { time: Box::new(t.to_spec()), state: Box::new(s.to_spec()) }
            }
        }
    }

    pub fn power_time(hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(Self::PowerTime(hurst))
    }

    pub fn product_max(time: Self, state: Self) -> Result<Self> {
        if !time.is_time_metric() {
            return Err(domain("product metric needs a time metric as its first component"));
        }
        if !matches!(state, Self::Euclidean) {
            return Err(domain("product metric needs a Euclidean state component"));
        }
        Ok(Self::ProductMax(Box::new(time), Box::new(state)))
    }

    /// Parabolic metric `max{|t-s|^H, ‖x-y‖}`.
    pub fn parabolic(hurst: f64) -> Result<Self> {
        Self::product_max(Self::power_time(hurst)?, Self::Euclidean)
    }

    fn is_time_metric(&self) -> bool {
        matches!(self, Self::Euclidean | Self::PowerTime(_) | Self::RegVarTime(_))
    }

    /// Required coordinate count, `None` for any.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            Self::Euclidean | Self::ProductMax(..) => None,
            Self::PowerTime(_) | Self::RegVarTime(_) => Some(1),
        }
    }

    /// Lag window for time metrics with restricted validity.
    pub fn window(&self) -> Option<f64> {
        match self {
            Self::RegVarTime(r) => Some(r.window),
            Self::ProductMax(t, _) => t.window(),
            _ => None,
        }
    }

    fn time_dist(&self, lag: f64) -> f64 {
        match self {
            Self::Euclidean => lag,
            Self::PowerTime(h) => lag.powf(*h),
            Self::RegVarTime(r) => {
                if lag > r.window {
                    f64::INFINITY
                } else {
                    r.delta(lag)
                }
            }
            Self::ProductMax(..) => unreachable!("not a time metric"),
        }
    }

    /// Distance without shape checks. Pairs outside a `RegVarTime` window
    /// come back as `+∞`.
    pub fn dist(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            Self::Euclidean => euclid(u, v),
            Self::PowerTime(_) | Self::RegVarTime(_) => self.time_dist((u[0] - v[0]).abs()),
            Self::ProductMax(t, _) => {
                t.time_dist((u[0] - v[0]).abs()).max(euclid(&u[1..], &v[1..]))
            }
        }
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("Hurst index must lie in (0,1), got {h}")))
    }
}

fn euclid(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// `d(u, v)` with shape checks; `RegVarTime` refuses lags outside its window.
pub fn eval_metric(m: &MetricDescriptor, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("points of dimension {} and {}", u.len(), v.len())));
    }
    match m.dimension() {
        Some(d) if u.len() != d => {
            return Err(Error::Shape(format!("metric expects {d} coordinate(s), got {}", u.len())))
        }
        None if u.is_empty() => return Err(Error::Shape("empty point".into())),
        None if matches!(m, MetricDescriptor::ProductMax(..)) && u.len() < 2 => {
            return Err(Error::Shape("product points need a time and a state coordinate".into()))
        }
        _ => {}
    }
    if let Some(w) = m.window() {
        let lag = (u[0] - v[0]).abs();
        if lag > w {
            return Err(domain(format!("lag {lag} outside the certified window (0, {w}]")));
        }
    }
    Ok(m.dist(u, v))
}

/// Finite set of points standing in for a compact set at a given resolution.
#[derive(Debug, Clone)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    pub resolution: f64,
    pub metric: MetricDescriptor,
}

impl PointCloud {
    /// Validates distinctness and the `resolution / 4` separation.
    pub fn new(dim: usize, coords: Vec<f64>, resolution: f64, metric: MetricDescriptor) -> Result<Self> {
        let cloud = Self::new_unchecked(dim, coords, resolution, metric)?;
        let min = cloud.min_separation();
        if cloud.len() > 1 && !(min > 0.0) {
            return Err(precondition("point cloud contains duplicate points"));
        }
        if cloud.len() > 1 && min < resolution / 4.0 {
            return Err(precondition(format!(
                "minimum separation {min:.3e} below resolution/4 = {:.3e}",
                resolution / 4.0
            )));
        }
        Ok(cloud)
    }

    fn new_unchecked(dim: usize, coords: Vec<f64>, resolution: f64, metric: MetricDescriptor) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) || coords.is_empty() {
            return Err(Error::Shape(format!("{} coordinates do not form points of dimension {dim}", coords.len())));
        }
        if let Some(d) = metric.dimension() {
            if d != dim {
                return Err(Error::Shape(format!("metric expects dimension {d}, cloud has {dim}")));
            }
        }
        if matches!(metric, MetricDescriptor::ProductMax(..)) && dim < 2 {
            return Err(Error::Shape("product clouds need time and state coordinates".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(precondition(format!("resolution must be positive, got {resolution}")));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(domain("non-finite coordinate"));
        }
        Ok(Self { dim, coords, resolution, metric })
    }

    /// `n + 1` equispaced points on `[a, b]` with the resolution of the grid
    /// step measured in `metric`.
    pub fn interval_grid(a: f64, b: f64, n: usize, metric: MetricDescriptor) -> Result<Self> {
        if n == 0 || !(b > a) {
            return Err(domain("interval grid needs b > a and n ≥ 1"));
        }
        let coords: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let step = (b - a) / n as f64;
        let resolution = metric.dist(&[0.0], &[step]);
        Self::new(1, coords, resolution, metric)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn with_metric(&self, metric: MetricDescriptor, resolution: f64) -> Result<Self> {
        Self::new(self.dim, self.coords.clone(), resolution, metric)
    }

    fn d(&self, i: usize, j: usize) -> f64 {
        self.metric.dist(self.point(i), self.point(j))
    }

    /// Minimum distance over distinct pairs (`+∞` for a single point).
    pub fn min_separation(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return f64::INFINITY;
        }
        if self.dim == 1 {
            // Every supported metric is increasing in |t - s| on the line.
            let mut xs = self.coords.clone();
            xs.sort_by(f64::total_cmp);
            return xs
                .windows(2)
                .map(|w| self.metric.dist(&w[..1], &w[1..]))
                .fold(f64::INFINITY, f64::min);
        }
        let row_min = exec::map_indexed(n, |i| {
            ((i + 1)..n).map(|j| self.d(i, j)).fold(f64::INFINITY, f64::min)
        });
        row_min.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// One point per row, coordinates comma-separated, with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.len() {
            let row: Vec<String> = self.point(i).iter().map(|c| format!("{c:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, resolution: f64, metric: MetricDescriptor) -> Result<Self> {
        let mut dim = None;
        let mut coords = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            let row = match parsed {
                Ok(row) => row,
                Err(_) if coords.is_empty() && dim.is_none() => {
                    dim = Some(fields.len());
                    continue;
                }
                Err(e) => return Err(Error::Parse(format!("line {}: {e}", lineno + 1))),
            };
            match dim {
                Some(d) if d != row.len() => {
                    return Err(Error::Shape(format!("line {}: expected {d} fields", lineno + 1)))
                }
                _ => dim = Some(row.len()),
            }
            coords.extend(row);
        }
        Self::new(dim.unwrap_or(0), coords, resolution, metric)
    }
}

fn check_radius(cloud: &PointCloud, r: f64) -> Result<()> {
    if !(r >= cloud.resolution) {
        return Err(precondition(format!("radius {r:.3e} below cloud resolution {:.3e}", cloud.resolution)));
    }
    if let Some(w) = cloud.metric.window() {
        // Pairs beyond the window are treated as far apart, which needs the
        // ball radius to stay below the metric value at the window edge.
        let edge = cloud.metric.dist(&[0.0], &[w]);
        if r > edge {
            return Err(precondition(format!("radius {r:.3e} exceeds metric value {edge:.3e} at the window edge")));
        }
    }
    Ok(())
}

/// Number of open `r`-balls centred at cloud points in a greedy cover.
///
/// Two greedy passes are run and the smaller count returned: the standard
/// first-uncovered-point cover and a shifted variant that moves each centre to
/// the farthest uncovered point within `r` of the first uncovered one. The
/// standard pass coincides with greedy packing at `r/2`, so `N(2r) ≤ P(r)`.
pub fn covering_number(cloud: &PointCloud, r: f64) -> Result<usize> {
    check_radius(cloud, r)?;
    Ok(greedy_cover(cloud, r, false).min(greedy_cover(cloud, r, true)))
}

fn greedy_cover(cloud: &PointCloud, r: f64, shifted: bool) -> usize {
    let n = cloud.len();
    let mut covered = vec![false; n];
    let mut count = 0;
    let mut next = 0;
    while next < n {
        if covered[next] {
            next += 1;
            continue;
        }
        let mut centre = next;
        if shifted {
            let mut far = 0.0;
            for j in next..n {
                if !covered[j] {
                    let d = cloud.d(next, j);
                    if d < r && d > far {
                        far = d;
                        centre = j;
                    }
                }
            }
        }
        for j in next..n {
            if !covered[j] && cloud.d(centre, j) < r {
                covered[j] = true;
            }
        }
        covered[next] = true;
        count += 1;
    }
    count
}

/// Size of a greedy maximal set with pairwise distances `≥ 2r` (centres of
/// disjoint open `r`-balls).
pub fn packing_number(cloud: &PointCloud, r: f64) -> Result<usize> {
    check_radius(cloud, r)?;
    Ok(greedy_packing(cloud, r).len())
}

pub fn greedy_packing(cloud: &PointCloud, r: f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..cloud.len() {
        if chosen.iter().all(|&c| cloud.d(c, i) >= 2.0 * r) {
            chosen.push(i);
        }
    }
    chosen
}

/// Covering counts and the log-log regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoveringStats {
    /// Decreasing radii.
    pub radii: Vec<f64>,
    pub counts: Vec<usize>,
    /// Whether the radius entered the fit (count changed from the previous radius).
    pub used: Vec<bool>,
    pub slope: f64,
    pub intercept: f64,
    /// `log N - (intercept + slope log(1/r))` per radius.
    pub residuals: Vec<f64>,
}

impl CoveringStats {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,N,residual,used\n");
        for i in 0..self.radii.len() {
            let _ = writeln!(out, "{:e},{},{:e},{}", self.radii[i], self.counts[i], self.residuals[i], self.used[i]);
        }
        out
    }
}

/// Least-squares fit of `log N(r)` against `log(1/r)`.
pub fn box_dimension(cloud: &PointCloud, radii: &[f64]) -> Result<CoveringStats> {
    if radii.len() < 4 {
        return Err(Error::InsufficientData(format!("need at least 4 radii, got {}", radii.len())));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| b.total_cmp(a));
    let (rmax, rmin) = (radii[0], radii[radii.len() - 1]);
    if (rmax / rmin).log10() < 1.5 - 1e-9 {
        return Err(precondition(format!("radii span {:.2} decades, need 1.5", (rmax / rmin).log10())));
    }
    for &r in &radii {
        check_radius(cloud, r)?;
    }
    let counts = exec::map_indexed(radii.len(), |i| {
        greedy_cover(cloud, radii[i], false).min(greedy_cover(cloud, radii[i], true))
    });
    let used: Vec<bool> = (0..radii.len()).map(|i| i == 0 || counts[i] != counts[i - 1]).collect();
    let pts: Vec<(f64, f64)> = (0..radii.len())
        .filter(|&i| used[i])
        .map(|i| ((1.0 / radii[i]).ln(), (counts[i] as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData("covering counts did not change across radii".into()));
    }
    let (slope, intercept) = least_squares(&pts);
    let residuals = (0..radii.len())
        .map(|i| (counts[i] as f64).ln() - (intercept + slope * (1.0 / radii[i]).ln()))
        .collect();
    Ok(CoveringStats { radii, counts, used, slope, intercept, residuals })
}

/// `(slope, intercept)` of the ordinary least-squares line.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// `n` radii log-spaced from `r_max` down to `r_min`.
pub fn log_radii(r_max: f64, r_min: f64, n: usize) -> Vec<f64> {
    let (a, b) = (r_max.ln(), r_min.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp()).collect()
}
