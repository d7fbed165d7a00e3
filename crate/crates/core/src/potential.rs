//! Radial kernels, truncated energies, discrete capacities, Hausdorff upper
//! estimates and Frostman-type integrals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, precondition, Error, Result};
use crate::exec;
use crate::metric::{MetricDescriptor, PointCloud};
use crate::sets::ScalingProfile;
use crate::svf::{SlowVarySpec, ThetaModel};

/// Serializable kernel description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `ρ^{-α}` for `α > 0`, `log(e/(ρ ∧ 1))` for `α = 0`, `1` for `α < 0`.
    BesselRiesz { alpha: f64 },
    /// `r^{-Hd} ℓ^{-d}(r) (1 + log(1 ∨ ℓ(r)))` with `ℓ = ℓ_θ` at index `H`.
    PhiHl { hurst: f64, d: usize, theta: SlowVarySpec },
    /// `1/φ(ρ)` for a gauge profile.
    InverseGauge { profile: ScalingProfile },
}

#[derive(Debug, Clone, Copy)]
enum KernelKind {
    BesselRiesz(f64),
    PhiHl { model: ThetaModel, d: usize },
    InverseGauge(ScalingProfile),
}

/// Kernel with truncation: distances below `r0` are clamped to `r0`.
#[derive(Debug, Clone, Copy)]
pub struct RadialKernel {
    pub spec: KernelSpec,
    pub r0: f64,
    kind: KernelKind,
}

impl RadialKernel {
    pub fn new(spec: KernelSpec, r0: f64) -> Result<Self> {
        if !(r0 >= 0.0 && r0.is_finite()) {
            return Err(domain(format!("truncation r0 must be non-negative, got {r0}")));
        }
        let kind = match spec {
            KernelSpec::BesselRiesz { alpha } => KernelKind::BesselRiesz(alpha),
            KernelSpec::PhiHl { hurst, d, theta } => {
                if d == 0 {
                    return Err(domain("state dimension must be at least 1"));
                }
                KernelKind::PhiHl { model: ThetaModel::new(hurst, theta)?, d }
            }
            KernelSpec::InverseGauge { profile } => {
                profile.validate()?;
                KernelKind::InverseGauge(profile)
            }
        };
        Ok(Self { spec, r0, kind })
    }

    pub fn bessel_riesz(alpha: f64, r0: f64) -> Result<Self> {
        Self::new(KernelSpec::BesselRiesz { alpha }, r0)
    }

    pub fn with_r0(&self, r0: f64) -> Self {
        Self { r0, ..*self }
    }

    pub fn eval(&self, rho: f64) -> f64 {
        let r = rho.max(self.r0);
        match self.kind {
            KernelKind::BesselRiesz(alpha) => bessel_riesz(alpha, r),
            KernelKind::PhiHl { model, d } => phi_hl(&model, d, r),
            KernelKind::InverseGauge(p) => 1.0 / p.eval(r),
        }
    }
}

fn bessel_riesz(alpha: f64, r: f64) -> f64 {
    if alpha > 0.0 {
        r.powf(-alpha)
    } else if alpha == 0.0 {
        (1.0 - r.min(1.0).ln()).max(1.0)
    } else {
        1.0
    }
}

fn phi_hl(model: &ThetaModel, d: usize, r: f64) -> f64 {
    let ell = model.ell(r);
    let d = d as f64;
    r.powf(-model.alpha * d) * ell.powf(-d) * (1.0 + ell.max(1.0).ln())
}

pub fn eval_kernel(k: &RadialKernel, rho: f64) -> f64 {
    k.eval(rho)
}

/// `Φ_{H,ℓ}(r)` for `r ∈ (0,1)`.
pub fn eval_phi_hl(hurst: f64, d: usize, spec: &SlowVarySpec, r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(domain(format!("Φ is evaluated on (0,1), got {r}")));
    }
    if d == 0 {
        return Err(domain("state dimension must be at least 1"));
    }
    Ok(phi_hl(&ThetaModel::new(hurst, *spec)?, d, r))
}

/// Probability measure on a point cloud.
#[derive(Debug, Clone)]
pub struct WeightedMeasure {
    pub cloud: PointCloud,
    pub weights: Vec<f64>,
}

impl WeightedMeasure {
    pub fn new(cloud: PointCloud, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != cloud.len() {
            return Err(Error::Shape(format!("{} weights for {} points", weights.len(), cloud.len())));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(domain("weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self { cloud, weights })
    }

    pub fn uniform(cloud: PointCloud) -> Self {
        let n = cloud.len();
        Self { cloud, weights: vec![1.0 / n as f64; n] }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let dim = self.cloud.dim();
        let header: Vec<String> = (0..dim).map(|k| format!("x{k}")).collect();
        let _ = writeln!(out, "{},weight", header.join(","));
        for (i, w) in self.weights.iter().enumerate() {
            let row: Vec<String> = self.cloud.point(i).iter().map(|c| format!("{c:e}")).collect();
            let _ = writeln!(out, "{},{w:e}", row.join(","));
        }
        out
    }
}

fn check_truncation(cloud: &PointCloud, k: &RadialKernel) -> Result<()> {
    // Small relative slack: r0 is often computed from the same grid step.
    if k.r0 < cloud.resolution * (1.0 - 1e-12) {
        return Err(precondition(format!(
            "kernel truncation r0 = {:.3e} below cloud resolution {:.3e}",
            k.r0, cloud.resolution
        )));
    }
    Ok(())
}

/// `Σ_{i,j} w_i w_j k(ρ(p_i, p_j))`, diagonal at the clamped distance `r0`.
pub fn energy_of_measure(mu: &WeightedMeasure, k: &RadialKernel) -> Result<f64> {
    check_truncation(&mu.cloud, k)?;
    let c = &mu.cloud;
    let w = &mu.weights;
    Ok(exec::sum_indexed(c.len(), |i| {
        if w[i] == 0.0 {
            return 0.0;
        }
        let pi = c.point(i);
        let row: f64 = (0..c.len()).map(|j| w[j] * k.eval(c.metric.dist(pi, c.point(j)))).sum();
        w[i] * row
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityResult {
    pub capacity: f64,
    pub energy: f64,
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Frank-Wolfe gap `∇E(w)·(w - e_s)` at the returned point.
    pub duality_gap: f64,
    pub converged: bool,
    pub r0: f64,
    pub n_points: usize,
}

pub const DENSE_LIMIT: usize = 4096;

enum Gram<'a> {
    Dense { n: usize, m: Vec<f64> },
    Free { cloud: &'a PointCloud, k: &'a RadialKernel },
}

impl Gram<'_> {
    fn column(&self, j: usize, out: &mut [f64]) {
        match self {
            Gram::Dense { n, m } => out.copy_from_slice(&m[j * n..(j + 1) * n]),
            Gram::Free { cloud, k } => {
                let pj = cloud.point(j);
                for (i, o) in out.iter_mut().enumerate() {
                    *o = k.eval(cloud.metric.dist(cloud.point(i), pj));
                }
            }
        }
    }

    fn diag(&self, j: usize) -> f64 {
        match self {
            Gram::Dense { n, m } => m[j * n + j],
            Gram::Free { k, .. } => k.eval(0.0),
        }
    }
}

/// Minimizes the discrete energy over the probability simplex by Frank-Wolfe
/// with away steps and exact line search, starting from uniform weights.
/// Stops when the gap is at most `tol · energy` or after `max_iter` steps.
pub fn capacity(cloud: &PointCloud, k: &RadialKernel, tol: f64, max_iter: usize) -> Result<CapacityResult> {
    check_truncation(cloud, k)?;
    let n = cloud.len();
    let gram = if n <= DENSE_LIMIT {
        let rows = exec::map_indexed(n, |i| {
            let pi = cloud.point(i);
            (0..n).map(|j| k.eval(cloud.metric.dist(pi, cloud.point(j)))).collect::<Vec<f64>>()
        });
        Gram::Dense { n, m: rows.concat() }
    } else {
        Gram::Free { cloud, k }
    };
    let mut w = vec![1.0 / n as f64; n];
    // u = K w
    let mut u = match &gram {
        Gram::Dense { m, .. } => (0..n).map(|i| m[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect(),
        Gram::Free { .. } => exec::map_indexed(n, |i| {
            let pi = cloud.point(i);
            (0..n).map(|j| k.eval(cloud.metric.dist(pi, cloud.point(j)))).sum::<f64>() / n as f64
        }),
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut f = dot(&w, &u);
    let mut col = vec![0.0; n];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let s = argmin(&u);
        let a = (0..n).filter(|&i| w[i] > 0.0).max_by(|&x, &y| u[x].total_cmp(&u[y])).expect("support");
        gap = 2.0 * (f - u[s]);
        if gap <= tol * f {
            converged = true;
            break;
        }
        iterations += 1;
        let fw_gain = f - u[s];
        let away_gain = u[a] - f;
        if fw_gain >= away_gain || w[a] >= 1.0 {
            // d = e_s - w
            let lin = u[s] - f;
            let quad = gram.diag(s) - 2.0 * u[s] + f;
            let step = if quad > 0.0 { (-lin / quad).clamp(0.0, 1.0) } else { 1.0 };
            gram.column(s, &mut col);
            for i in 0..n {
                w[i] *= 1.0 - step;
                u[i] = (1.0 - step) * u[i] + step * col[i];
            }
            w[s] += step;
            f += 2.0 * step * lin + step * step * quad;
        } else {
            // d = w - e_a
            let max_step = w[a] / (1.0 - w[a]);
            let lin = f - u[a];
            let quad = f - 2.0 * u[a] + gram.diag(a);
            let step = if quad > 0.0 { (-lin / quad).clamp(0.0, max_step) } else { max_step };
            gram.column(a, &mut col);
            for i in 0..n {
                w[i] *= 1.0 + step;
                u[i] = (1.0 + step) * u[i] - step * col[i];
            }
            w[a] -= step;
            if step >= max_step {
                w[a] = 0.0;
            }
            f += 2.0 * step * lin + step * step * quad;
        }
        if iterations % 64 == 0 {
            // Clean up rounding drift in the running quantities.
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x = x.max(0.0) / total);
            f = dot(&w, &u);
        }
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x = x.max(0.0) / total);
    let measure = WeightedMeasure { cloud: cloud.clone(), weights: w };
    let energy = energy_of_measure(&measure, k)?;
    Ok(CapacityResult {
        capacity: 1.0 / energy,
        energy,
        weights: measure.weights,
        iterations,
        duality_gap: gap.max(0.0),
        converged,
        r0: k.r0,
        n_points: n,
    })
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// `Σ (2 r_n)^β` over a greedy cover with radii in `{δ, δ/2, δ/4}` (those not
/// below half the resolution), each ball chosen to minimize cost per newly
/// covered point.
pub fn hausdorff_upper(cloud: &PointCloud, beta: f64, delta: f64) -> Result<f64> {
    if !(delta >= cloud.resolution) {
        return Err(precondition(format!("scale {delta:.3e} below cloud resolution {:.3e}", cloud.resolution)));
    }
    let radii: Vec<f64> = [delta, delta / 2.0, delta / 4.0]
        .into_iter()
        .enumerate()
        .filter(|&(i, r)| i == 0 || r >= cloud.resolution / 2.0)
        .map(|(_, r)| r)
        .collect();
    let n = cloud.len();
    let d = |i: usize, j: usize| cloud.metric.dist(cloud.point(i), cloud.point(j));
    let mut covered = vec![false; n];
    let mut next = 0;
    let mut total = 0.0;
    while next < n {
        if covered[next] {
            next += 1;
            continue;
        }
        let mut best: Option<(f64, f64, usize)> = None;
        for &r in &radii {
            // Centre moved as far as possible from the first uncovered point.
            let mut centre = next;
            let mut far = 0.0;
            for j in next..n {
                if !covered[j] {
                    let dj = d(next, j);
                    if dj < r && dj > far {
                        far = dj;
                        centre = j;
                    }
                }
            }
            let gained = (next..n).filter(|&j| !covered[j] && d(centre, j) < r).count().max(1);
            let cost = (2.0 * r).powf(beta);
            let per = cost / gained as f64;
            if best.is_none_or(|b| per < b.0) {
                best = Some((per, r, centre));
            }
        }
        let (_, r, centre) = best.expect("at least one radius");
        for j in next..n {
            if !covered[j] && d(centre, j) < r {
                covered[j] = true;
            }
        }
        covered[next] = true;
        total += (2.0 * r).powf(beta);
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HausdorffLadder {
    pub beta: f64,
    /// `(δ, estimate)` in the given order.
    pub rungs: Vec<(f64, f64)>,
}

pub fn hausdorff_ladder(cloud: &PointCloud, beta: f64, deltas: &[f64]) -> Result<HausdorffLadder> {
    let values = exec::map_indexed(deltas.len(), |i| hausdorff_upper(cloud, beta, deltas[i]));
    let mut rungs = Vec::with_capacity(deltas.len());
    for (i, v) in values.into_iter().enumerate() {
        rungs.push((deltas[i], v?));
    }
    Ok(HausdorffLadder { beta, rungs })
}

/// `sup_v Σ_u w_u / max{ρ(u,v), r}^θ`.
pub fn frostman_integral(mu: &WeightedMeasure, theta: f64, r: f64) -> Result<f64> {
    if !(r >= mu.cloud.resolution) {
        return Err(precondition(format!("scale {r:.3e} below cloud resolution {:.3e}", mu.cloud.resolution)));
    }
    let c = &mu.cloud;
    let rows = exec::map_indexed(c.len(), |v| {
        let pv = c.point(v);
        (0..c.len())
            .map(|u| mu.weights[u] * c.metric.dist(c.point(u), pv).max(r).powf(-theta))
            .sum::<f64>()
    });
    Ok(rows.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductCapacityReport {
    pub alpha: f64,
    pub gamma: f64,
    pub r0: f64,
    /// `C^{α-γ}(G2)`.
    pub capacity_g2: f64,
    /// `C^α(G1 × G2)` from the Frank-Wolfe optimum.
    pub capacity_product: f64,
    /// `1 / E_α(μ ⊗ m)` with `m` optimal for `G2`.
    pub capacity_product_feasible: f64,
    /// `sup_r I(r) / φ_{α-γ}(r)` over the clamped pair distances of `G2`.
    pub c2: f64,
    pub feasible_energy: f64,
    pub bound_energy: f64,
    /// `C^{α-γ}(G2) / C^α(G1 × G2)`.
    pub ratio: f64,
    pub bounded: bool,
}

/// Lower capacity estimate for a product: with `μ` on `G1` and `m` optimal on
/// `G2`, `E_α(μ ⊗ m) ≤ C₂ E_{α-γ}(m)`, hence `C^{α-γ}(G2) ≤ C₂ C^α(G1 × G2)`.
pub fn verify_product_capacity(
    g1: &WeightedMeasure,
    gamma: f64,
    g2: &PointCloud,
    alpha: f64,
    tol: f64,
) -> Result<ProductCapacityReport> {
    if g1.cloud.dim() != 1 {
        return Err(Error::Shape("first factor must be one-dimensional".into()));
    }
    let r0 = g1.cloud.resolution.min(g2.resolution);
    let k_low = RadialKernel::bessel_riesz(alpha - gamma, r0)?;
    let k_high = RadialKernel::bessel_riesz(alpha, r0)?;
    let g2_low = g2.with_metric(g2.metric.clone(), r0)?;
    let cap2 = capacity(&g2_low, &k_low, tol, 20_000)?;

    let (n1, n2, dim2) = (g1.cloud.len(), g2.len(), g2.dim());
    let mut coords = Vec::with_capacity(n1 * n2 * (dim2 + 1));
    let mut weights = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            coords.push(g1.cloud.point(i)[0]);
            coords.extend_from_slice(g2.point(j));
            weights.push(g1.weights[i] * cap2.weights[j]);
        }
    }
    let metric = MetricDescriptor::product_max(g1.cloud.metric.clone(), g2.metric.clone())?;
    let product = PointCloud::new(dim2 + 1, coords, r0, metric)?;
    let mass: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= mass);
    let feasible = WeightedMeasure::new(product.clone(), weights)?;
    let feasible_energy = energy_of_measure(&feasible, &k_high)?;
    let cap_prod = capacity(&product, &k_high, tol, 20_000)?;

    // C₂ over every clamped distance that occurs in E_{α-γ}(m).
    let g1_at_r0 = WeightedMeasure { cloud: g1.cloud.with_metric(g1.cloud.metric.clone(), r0)?, weights: g1.weights.clone() };
    let mut dists: Vec<f64> = Vec::new();
    for i in 0..n2 {
        for j in i..n2 {
            dists.push(g2.metric.dist(g2.point(i), g2.point(j)).max(r0));
        }
    }
    dists.sort_by(f64::total_cmp);
    dists.dedup();
    let ratios = exec::map_indexed(dists.len(), |i| {
        frostman_integral(&g1_at_r0, alpha, dists[i]).map(|v| v / k_low.eval(dists[i]))
    });
    let mut c2 = 0.0_f64;
    for r in ratios {
        c2 = c2.max(r?);
    }
    let bound_energy = c2 * cap2.energy;
    let ratio = cap2.capacity / cap_prod.capacity;
    Ok(ProductCapacityReport {
        alpha,
        gamma,
        r0,
        capacity_g2: cap2.capacity,
        capacity_product: cap_prod.capacity,
        capacity_product_feasible: 1.0 / feasible_energy,
        c2,
        feasible_energy,
        bound_energy,
        ratio,
        bounded: feasible_energy <= bound_energy * (1.0 + 1e-9) && ratio <= c2 * (1.0 + tol),
    })
}
