//! Gaussian process simulation on `[0, 1]`: fractional Brownian motion by
//! circulant embedding, the `δ_θ` process by dense covariance
//! factorization, and their independent sum.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, precondition, Error, Result};
use crate::exec;
use crate::rng::{path_stream, StreamRng};
use crate::svf::{IncrementVariance, SlowVarySpec, ThetaModel};

/// Largest grid accepted by the dense factorization.
pub const MAX_DENSE: usize = 4096;
/// Jitter ceiling, relative to the largest variance.
pub const MAX_JITTER: f64 = 1e-10;

const FBM_LABEL: &str = "fbm";
const DELTA_LABEL: &str = "delta-theta";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessKind {
    Fbm { hurst: f64 },
    DeltaTheta { alpha: f64, theta: SlowVarySpec },
    Mixed { hurst: f64, alpha: f64, theta: SlowVarySpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    #[serde(flatten)]
    pub kind: ProcessKind,
    pub dim: usize,
}

impl ProcessSpec {
    pub fn fbm(hurst: f64, dim: usize) -> Self {
        Self { kind: ProcessKind::Fbm { hurst }, dim }
    }

    pub fn delta_theta(alpha: f64, theta: SlowVarySpec, dim: usize) -> Self {
        Self { kind: ProcessKind::DeltaTheta { alpha, theta }, dim }
    }

    pub fn mixed(hurst: f64, alpha: f64, theta: SlowVarySpec, dim: usize) -> Self {
        Self { kind: ProcessKind::Mixed { hurst, alpha, theta }, dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(domain("process dimension must be at least 1"));
        }
        let unit = |name: &str, x: f64| {
            if x > 0.0 && x < 1.0 {
                Ok(())
            } else {
                Err(domain(format!("{name} = {x} must lie in (0, 1)")))
            }
        };
        match self.kind {
            ProcessKind::Fbm { hurst } => unit("H", hurst),
            ProcessKind::DeltaTheta { alpha, theta } => {
                unit("alpha", alpha)?;
                theta.validate()
            }
            ProcessKind::Mixed { hurst, alpha, theta } => {
                unit("H", hurst)?;
                unit("alpha", alpha)?;
                theta.validate()
            }
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("spec serializes");
        Sha256::digest(json).into()
    }
}

/// Numerical settings shared by all generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimOptions {
    /// Tolerance for the `δ²` quadrature table.
    pub quadrature_tol: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { quadrature_tol: 1e-9 }
    }
}

fn normals(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Exact fBm sampler on the uniform grid `i/n`, `i = 0..=n`.
#[derive(Clone)]
pub struct CirculantFbm {
    pub hurst: f64,
    pub n: usize,
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CirculantFbm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CirculantFbm").field("hurst", &self.hurst).field("n", &self.n).finish()
    }
}

impl CirculantFbm {
    pub fn new(hurst: f64, n: usize) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(domain(format!("H = {hurst} must lie in (0, 1)")));
        }
        if n == 0 || !n.is_power_of_two() {
            return Err(precondition(format!("fBm grid size {n} must be a power of two")));
        }
        let m = 2 * n;
        let h2 = 2.0 * hurst;
        let scale = (n as f64).powf(-h2);
        let gamma = |k: usize| {
            let k = k as f64;
            0.5 * scale * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
        };
        let mut row: Vec<Complex<f64>> =
            (0..m).map(|j| Complex::new(gamma(if j <= n { j } else { m - j }), 0.0)).collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
        let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
        if min < -1e-12 * max {
            return Err(Error::Simulation {
                reason: "circulant embedding is not nonnegative definite".into(),
                min_eigen: min,
            });
        }
        let sqrt_eig = row.iter().map(|c| (c.re.max(0.0) / m as f64).sqrt()).collect();
        Ok(Self { hurst, n, sqrt_eig, fft })
    }

    /// One path `B(i/n)`, `i = 0..=n`.
    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        let m = 2 * self.n;
        let mut buf: Vec<Complex<f64>> = self
            .sqrt_eig
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(s * re, s * im)
            })
            .collect();
        debug_assert_eq!(buf.len(), m);
        self.fft.process(&mut buf);
        let mut out = Vec::with_capacity(self.n + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for c in &buf[..self.n] {
            acc += c.re;
            out.push(acc);
        }
        out
    }
}

/// Lower Cholesky factor of a stationary-increment covariance
/// `R(s,t) = ½(δ²(s) + δ²(t) − δ²(|t−s|))` at arbitrary times.
#[derive(Debug, Clone)]
pub struct CovarianceFactor {
    pub times: Vec<f64>,
    /// Diagonal jitter that was needed, relative to the largest variance.
    pub jitter: f64,
    /// Index of the first positive time; earlier entries are pinned to 0.
    first: usize,
    rows: Vec<Vec<f64>>,
}

impl CovarianceFactor {
    pub fn new(times: &[f64], delta_sq: impl Fn(f64) -> f64 + Sync) -> Result<Self> {
        if times.len() > MAX_DENSE + 1 {
            return Err(precondition(format!(
                "{} times exceed the dense factorization limit {MAX_DENSE}",
                times.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(precondition("times must be finite, nonnegative and strictly increasing"));
        }
        let first = times.iter().position(|&t| t > 0.0).unwrap_or(times.len());
        let ts = &times[first..];
        let var: Vec<f64> = ts.iter().map(|&t| delta_sq(t)).collect();
        let n = ts.len();
        let cov = |i: usize, j: usize| 0.5 * (var[i] + var[j] - delta_sq(ts[i] - ts[j]));
        let max_diag = var.iter().cloned().fold(0.0, f64::max);
        let mut min_pivot = f64::INFINITY;
        for rel in [0.0, 1e-14, 1e-13, 1e-12, 1e-11, MAX_JITTER] {
            match cholesky(n, &cov, rel * max_diag) {
                Ok(rows) => {
                    return Ok(Self { times: times.to_vec(), jitter: rel, first, rows });
                }
                Err(p) => min_pivot = min_pivot.min(p),
            }
        }
        Err(Error::Simulation {
            reason: format!("covariance not positive definite within jitter {MAX_JITTER:e}·max variance"),
            min_eigen: min_pivot,
        })
    }

    /// One sample at the factor's times.
    pub fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        let z = normals(rng, self.rows.len());
        let mut out = vec![0.0; self.first];
        out.extend(self.rows.iter().map(|row| row.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()));
        out
    }
}

/// Left-looking Cholesky; rows are stored packed (`rows[i].len() == i + 1`).
/// On failure returns the offending pivot.
fn cholesky(n: usize, cov: &(dyn Fn(usize, usize) -> f64 + Sync), jitter: f64) -> std::result::Result<Vec<Vec<f64>>, f64> {
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| Vec::with_capacity(i + 1)).collect();
    for j in 0..n {
        let (pivot_row, below) = rows[j..].split_at_mut(1);
        let rj = &mut pivot_row[0];
        let pivot = cov(j, j) + jitter - rj.iter().map(|x| x * x).sum::<f64>();
        if !(pivot > 0.0) {
            return Err(pivot);
        }
        let d = pivot.sqrt();
        let prefix: &[f64] = rj;
        exec::for_each_mut(below, |k, ri| {
            let dot: f64 = ri.iter().zip(prefix).map(|(a, b)| a * b).sum();
            ri.push((cov(j + 1 + k, j) - dot) / d);
        });
        rj.push(d);
    }
    Ok(rows)
}

/// Prepared generator for one process on the grid `i/n`.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub spec: ProcessSpec,
    pub n: usize,
    fbm: Option<CirculantFbm>,
    delta: Option<CovarianceFactor>,
    table: Option<Arc<IncrementVariance>>,
}

impl Simulator {
    pub fn new(spec: ProcessSpec, n: usize, opts: &SimOptions) -> Result<Self> {
        spec.validate()?;
        if n == 0 {
            return Err(precondition("grid size must be positive"));
        }
        let (hurst, delta) = match spec.kind {
            ProcessKind::Fbm { hurst } => (Some(hurst), None),
            ProcessKind::DeltaTheta { alpha, theta } => (None, Some((alpha, theta))),
            ProcessKind::Mixed { hurst, alpha, theta } => (Some(hurst), Some((alpha, theta))),
        };
        let fbm = hurst.map(|h| CirculantFbm::new(h, n)).transpose()?;
        let (delta, table) = match delta {
            None => (None, None),
            Some((alpha, theta)) => {
                if n > MAX_DENSE {
                    return Err(precondition(format!("grid size {n} exceeds {MAX_DENSE} for the δ process")));
                }
                let table = Arc::new(IncrementVariance::build(alpha, theta, opts.quadrature_tol)?);
                let times = uniform_grid(n);
                let t = Arc::clone(&table);
                (Some(CovarianceFactor::new(&times, move |h| t.delta_sq(h))?), Some(table))
            }
        };
        Ok(Self { spec, n, fbm, delta, table })
    }

    pub fn times(&self) -> Vec<f64> {
        uniform_grid(self.n)
    }

    /// The `δ²` table, when the process has a `δ_θ` part.
    pub fn increment_variance(&self) -> Option<&IncrementVariance> {
        self.table.as_deref()
    }

    /// Theoretical `E|X(t+h) − X(t)|²` of one component.
    pub fn increment_variance_at(&self, h: f64) -> f64 {
        let h = h.abs();
        let mut v = 0.0;
        if let Some(f) = &self.fbm {
            v += h.powf(2.0 * f.hurst);
        }
        if let Some(t) = &self.table {
            v += t.delta_sq(h);
        }
        v
    }

    /// Theoretical `Cov(X_c(s), X_c(t))`.
    pub fn covariance(&self, s: f64, t: f64) -> f64 {
        0.5 * (self.increment_variance_at(s) + self.increment_variance_at(t) - self.increment_variance_at(t - s))
    }

    /// Path `path` of the ensemble with master seed `seed`, laid out as
    /// `(n+1) × dim` row-major.
    pub fn sample_path(&self, seed: u64, path: usize) -> Vec<f64> {
        let d = self.spec.dim;
        let mut out = vec![0.0; (self.n + 1) * d];
        for c in 0..d {
            if let Some(f) = &self.fbm {
                let x = f.sample(&mut path_stream(seed, FBM_LABEL, path, c));
                for (i, v) in x.into_iter().enumerate() {
                    out[i * d + c] += v;
                }
            }
            if let Some(g) = &self.delta {
                let x = g.sample(&mut path_stream(seed, DELTA_LABEL, path, c));
                for (i, v) in x.into_iter().enumerate() {
                    out[i * d + c] += v;
                }
            }
        }
        out
    }
}

pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// `n_paths` sampled paths on the grid `i/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub spec: ProcessSpec,
    pub n: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub generator: String,
    /// `n_paths × (n+1) × dim`, row-major.
    pub values: Vec<f64>,
}

impl PathEnsemble {
    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn times(&self) -> Vec<f64> {
        uniform_grid(self.n)
    }

    pub fn value(&self, path: usize, i: usize, c: usize) -> f64 {
        self.values[(path * (self.n + 1) + i) * self.dim() + c]
    }

    /// Component `c` of one path.
    pub fn component(&self, path: usize, c: usize) -> Vec<f64> {
        (0..=self.n).map(|i| self.value(path, i, c)).collect()
    }

    /// Grid index of `t`, refusing off-grid times.
    pub fn grid_index(&self, t: f64) -> Result<usize> {
        let x = t * self.n as f64;
        let i = x.round();
        if !(0.0..=self.n as f64).contains(&i) || (x - i).abs() > 1e-9 {
            return Err(precondition(format!("t = {t} is not on the grid i/{}", self.n)));
        }
        Ok(i as usize)
    }

    /// Long-format CSV: `path,t,component,value`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "path,t,component,value")?;
        let times = self.times();
        for p in 0..self.n_paths {
            for (i, t) in times.iter().enumerate() {
                for c in 0..self.dim() {
                    writeln!(w, "{p},{t},{c},{}", self.value(p, i, c))?;
                }
            }
        }
        Ok(())
    }

    /// Binary cache: magic `HLPATHS\0`, `u32` version, 32-byte spec hash,
    /// `u64` seed, `u64` paths, `u64` grid size, `u64` dim, then the values
    /// as little-endian `f64`.
    pub fn write_cache(&self, mut w: impl Write) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.spec.hash())?;
        for x in [self.seed, self.n_paths as u64, self.n as u64, self.dim() as u64] {
            w.write_all(&x.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a cache written for `spec`; a hash mismatch is an error.
    pub fn read_cache(mut r: impl Read, spec: ProcessSpec) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Parse("not a path cache".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != CACHE_VERSION {
            return Err(Error::Parse(format!("unsupported cache version {}", u32::from_le_bytes(b4))));
        }
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash)?;
        if hash != spec.hash() {
            return Err(Error::Parse("cache was written for a different process spec".into()));
        }
        let mut b8 = [0u8; 8];
        let mut next = || -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let (seed, n_paths, n, dim) = (next()?, next()? as usize, next()? as usize, next()? as usize);
        if dim != spec.dim {
            return Err(Error::Parse(format!("cache dim {dim} does not match spec dim {}", spec.dim)));
        }
        let len = n_paths * (n + 1) * dim;
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut b8)?;
            values.push(f64::from_le_bytes(b8));
        }
        Ok(Self { spec, n, n_paths, seed, generator: generator_name(&spec), values })
    }
}

const CACHE_MAGIC: &[u8; 8] = b"HLPATHS\0";
const CACHE_VERSION: u32 = 1;

fn generator_name(spec: &ProcessSpec) -> String {
    match spec.kind {
        ProcessKind::Fbm { .. } => "circulant-embedding".into(),
        ProcessKind::DeltaTheta { .. } => "cholesky".into(),
        ProcessKind::Mixed { .. } => "circulant-embedding+cholesky".into(),
    }
}

pub fn simulate(spec: ProcessSpec, n: usize, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    simulate_with(spec, n, n_paths, seed, &SimOptions::default())
}

pub fn simulate_with(spec: ProcessSpec, n: usize, n_paths: usize, seed: u64, opts: &SimOptions) -> Result<PathEnsemble> {
    let sim = Simulator::new(spec, n, opts)?;
    let paths = exec::map_indexed(n_paths, |p| sim.sample_path(seed, p));
    Ok(PathEnsemble {
        spec,
        n,
        n_paths,
        seed,
        generator: generator_name(&spec),
        values: paths.concat(),
    })
}

/// One frozen trajectory of the `δ_θ` process, used as a deterministic drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenDrift {
    pub alpha: f64,
    pub theta: SlowVarySpec,
    pub dim: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    /// `times.len() × dim`, row-major.
    pub values: Vec<f64>,
}

impl FrozenDrift {
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `max |f(t) − f(s)| / |t − s|^e` over all grid pairs.
    pub fn holder_quotient(&self, exponent: f64) -> f64 {
        let n = self.times.len();
        exec::max_indexed(n, |i| {
            let mut best: f64 = 0.0;
            for j in 0..i {
                let d = dist(self.value(i), self.value(j));
                best = best.max(d / (self.times[i] - self.times[j]).powf(exponent));
            }
            best
        })
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,component,value")?;
        for (i, t) in self.times.iter().enumerate() {
            for (c, v) in self.value(i).iter().enumerate() {
                writeln!(w, "{t},{c},{v}")?;
            }
        }
        Ok(())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A single `δ_θ` path on the grid `i/n`, frozen as a drift.
pub fn freeze_drift(alpha: f64, theta: SlowVarySpec, dim: usize, n: usize, seed: u64) -> Result<FrozenDrift> {
    let sim = Simulator::new(ProcessSpec::delta_theta(alpha, theta, dim), n, &SimOptions::default())?;
    Ok(FrozenDrift { alpha, theta, dim, seed, times: sim.times(), values: sim.sample_path(seed, 0) })
}

/// Frozen drifts at arbitrary times sharing one factorization; drift `k`
/// uses path stream `k`.
pub fn freeze_drifts_at(
    table: &IncrementVariance,
    dim: usize,
    times: &[f64],
    seed: u64,
    count: usize,
) -> Result<Vec<FrozenDrift>> {
    let factor = CovarianceFactor::new(times, |h| table.delta_sq(h))?;
    Ok(exec::map_indexed(count, |k| {
        let mut values = vec![0.0; times.len() * dim];
        for c in 0..dim {
            let x = factor.sample(&mut path_stream(seed, DELTA_LABEL, k, c));
            for (i, v) in x.into_iter().enumerate() {
                values[i * dim + c] = v;
            }
        }
        FrozenDrift { alpha: table.alpha, theta: table.theta, dim, seed, times: times.to_vec(), values }
    }))
}

/// Normalizing modulus for [`validate_modulus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulus {
    /// `r^α ℓ(r) √log(1/r)`.
    Full,
    /// `r^α ℓ(r)`, without the logarithmic factor.
    NoLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusReport {
    pub radii: Vec<f64>,
    pub modulus: Modulus,
    /// Per path, `sup_r M(r)/w(r)`.
    pub sup_ratios: Vec<f64>,
    pub threshold: f64,
    pub fraction_above: f64,
}

impl ModulusReport {
    /// Empirical quantile of the sup ratios (nearest rank).
    pub fn quantile(&self, q: f64) -> f64 {
        quantile(&self.sup_ratios, q)
    }
}

pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

/// `M(r) = max_{|t−s| ≤ r} ‖X(t) − X(s)‖` for each of `lags` (in grid steps,
/// increasing).
pub fn oscillation(path: &[f64], dim: usize, lags: &[usize]) -> Vec<f64> {
    let n = path.len() / dim - 1;
    let point = |i: usize| &path[i * dim..(i + 1) * dim];
    let mut out = Vec::with_capacity(lags.len());
    let mut best: f64 = 0.0;
    let mut done = 0;
    for &m in lags {
        let m = m.min(n);
        if dim == 1 {
            best = best.max(window_range(path, m));
        } else {
            for lag in done + 1..=m {
                for i in lag..=n {
                    best = best.max(dist(point(i), point(i - lag)));
                }
            }
        }
        done = done.max(m);
        out.push(best);
    }
    out
}

/// Largest `max − min` over windows of `m + 1` consecutive samples.
fn window_range(x: &[f64], m: usize) -> f64 {
    use std::collections::VecDeque;
    if m == 0 {
        return 0.0;
    }
    let (mut hi, mut lo): (VecDeque<usize>, VecDeque<usize>) = (VecDeque::new(), VecDeque::new());
    let mut best: f64 = 0.0;
    for i in 0..x.len() {
        while hi.back().is_some_and(|&j| x[j] <= x[i]) {
            hi.pop_back();
        }
        while lo.back().is_some_and(|&j| x[j] >= x[i]) {
            lo.pop_back();
        }
        hi.push_back(i);
        lo.push_back(i);
        while hi[0] + m < i {
            hi.pop_front();
        }
        while lo[0] + m < i {
            lo.pop_front();
        }
        best = best.max(x[hi[0]] - x[lo[0]]);
    }
    best
}

/// Compare path oscillations with the modulus over dyadic radii
/// `2^{-k} ∈ [1/n, 1]`. The modulus is evaluated at `min(r, 1/2)` so that
/// the `r = 1` term of coarse grids stays finite.
pub fn validate_modulus(
    ens: &PathEnsemble,
    alpha: f64,
    theta: SlowVarySpec,
    modulus: Modulus,
    threshold: f64,
) -> Result<ModulusReport> {
    let model = ThetaModel::new(alpha, theta)?;
    let mut radii = Vec::new();
    let mut lags = Vec::new();
    let mut r = 1.0 / ens.n as f64;
    while r <= 1.0 {
        radii.push(r);
        lags.push((r * ens.n as f64).round() as usize);
        r *= 2.0;
    }
    let w: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let r = r.min(0.5);
            let base = r.powf(alpha) * model.ell(r);
            match modulus {
                Modulus::Full => base * (1.0 / r).ln().sqrt(),
                Modulus::NoLog => base,
            }
        })
        .collect();
    let d = ens.dim();
    let stride = (ens.n + 1) * d;
    let sup_ratios = exec::map_indexed(ens.n_paths, |p| {
        let m = oscillation(&ens.values[p * stride..(p + 1) * stride], d, &lags);
        m.iter().zip(&w).map(|(m, w)| m / w).fold(0.0, f64::max)
    });
    let above = sup_ratios.iter().filter(|&&x| x > threshold).count();
    let fraction_above = if sup_ratios.is_empty() { 0.0 } else { above as f64 / sup_ratios.len() as f64 };
    Ok(ModulusReport { radii, modulus, sup_ratios, threshold, fraction_above })
}

/// Monte Carlo `E[X_1(s) X_1(t)]` and its standard error.
pub fn empirical_covariance(ens: &PathEnsemble, s: f64, t: f64) -> Result<(f64, f64)> {
    cross_covariance(ens, s, t, 0, 0)
}

/// Monte Carlo `E[X_a(s) X_b(t)]` and its standard error.
pub fn cross_covariance(ens: &PathEnsemble, s: f64, t: f64, a: usize, b: usize) -> Result<(f64, f64)> {
    let (i, j) = (ens.grid_index(s)?, ens.grid_index(t)?);
    if a >= ens.dim() || b >= ens.dim() {
        return Err(precondition("component index out of range"));
    }
    if ens.n_paths < 2 {
        return Err(Error::InsufficientData("need at least two paths".into()));
    }
    let prods: Vec<f64> = (0..ens.n_paths).map(|p| ens.value(p, i, a) * ens.value(p, j, b)).collect();
    Ok(mean_and_se(&prods))
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    1.628 * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// Truncated spectral sampler of the `δ_θ` process: `X(t) = Σ_k √w_k
/// [(cos(t u_k) − 1) Z_k + sin(t u_k) Z'_k]` with frequencies drawn
/// uniformly inside log-spaced bins of `[u_min, u_max]`. Only used to
/// cross-check the factorization.
#[derive(Debug, Clone)]
pub struct SpectralOracle {
    pub alpha: f64,
    pub theta: SlowVarySpec,
    pub u_min: f64,
    pub u_max: f64,
    pub bins: usize,
}

impl SpectralOracle {
    pub fn new(alpha: f64, theta: SlowVarySpec) -> Self {
        Self { alpha, theta, u_min: 1e-4, u_max: 1e6, bins: 4000 }
    }

    fn density(&self, u: f64) -> f64 {
        let l = self.theta.eval(u).expect("validated spec");
        std::f64::consts::FRAC_2_PI * u.powf(-2.0 * self.alpha - 1.0) / l
    }

    pub fn sample(&self, times: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        let (lo, hi) = (self.u_min.ln(), self.u_max.ln());
        let step = (hi - lo) / self.bins as f64;
        let mut out = vec![0.0; times.len()];
        for k in 0..self.bins {
            let (a, b) = ((lo + k as f64 * step).exp(), (lo + (k + 1) as f64 * step).exp());
            let u = a + (b - a) * rng.gen::<f64>();
            let w = (0.5 * self.density(u) * (b - a)).sqrt();
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            for (x, &t) in out.iter_mut().zip(times) {
                let (s, c) = (t * u).sin_cos();
                *x += w * ((c - 1.0) * z1 + s * z2);
            }
        }
        out
    }
}
