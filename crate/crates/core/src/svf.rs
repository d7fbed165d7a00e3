//! Slowly and regularly varying functions.
//!
//! The inverse spectral density is `θ_α(x) = x^{2α+1} L(x)` with `L` from one
//! of three parametric families. From it we get:
//!
//! * the constant `c_α = (4/π) ∫_0^∞ sin²(s/2) s^{-2α-1} ds`,
//! * the increment variance `δ²(h) = (2/π) ∫_0^∞ (1 - cos(xh)) / θ_α(x) dx`,
//! * the slowly varying part at zero `ℓ_θ(h) = c_α^{1/2} L(1/h)^{-1/2}`,
//! * the drift modulus `w(r) = r^α ℓ_θ(r) log^{1/2}(1/r)`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad;

/// Parametric family of the slowly varying part `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `L(x) = c`.
    Constant,
    /// `L(x) = c · log^{-β}(x)`.
    LogPower { beta: f64 },
    /// `L(x) = c · exp(-log^γ(x))`, `γ ∈ (0,1)`.
    ExpLogPower { gamma: f64 },
}

/// A slowly varying function at infinity, constant below the cutoff `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "SpecRepr")]
pub struct SlowVarySpec {
    pub family: Family,
    /// Multiplicative constant (`c` in the JSON form).
    pub scale: f64,
    pub x0: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecRepr {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x0: Option<f64>,
}

impl TryFrom<SpecRepr> for SlowVarySpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        let family = match r.family.as_str() {
            "constant" => Family::Constant,
            "log_power" => Family::LogPower {
                beta: r.beta.ok_or_else(|| domain("log_power requires \"beta\""))?,
            },
            "exp_log_power" => Family::ExpLogPower {
                gamma: r.gamma.ok_or_else(|| domain("exp_log_power requires \"gamma\""))?,
            },
            other => return Err(domain(format!("unknown slowly varying family \"{other}\""))),
        };
        let x0 = r.x0.unwrap_or_else(|| default_x0(family));
        let spec = SlowVarySpec { family, scale: r.c.unwrap_or(1.0), x0 };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<SlowVarySpec> for SpecRepr {
    fn from(s: SlowVarySpec) -> Self {
        let (family, beta, gamma) = match s.family {
            Family::Constant => ("constant", None, None),
            Family::LogPower { beta } => ("log_power", Some(beta), None),
            Family::ExpLogPower { gamma } => ("exp_log_power", None, Some(gamma)),
        };
        SpecRepr { family: family.into(), beta, gamma, c: Some(s.scale), x0: Some(s.x0) }
    }
}

fn default_x0(family: Family) -> f64 {
    match family {
        Family::Constant => 1.0,
        // log(x) >= 1 on [e, ∞)
        Family::LogPower { .. } | Family::ExpLogPower { .. } => E,
    }
}

impl SlowVarySpec {
    pub fn constant(c: f64) -> Self {
        Self { family: Family::Constant, scale: c, x0: 1.0 }
    }

    pub fn log_power(beta: f64) -> Self {
        Self { family: Family::LogPower { beta }, scale: 1.0, x0: E }
    }

    pub fn exp_log_power(gamma: f64) -> Self {
        Self { family: Family::ExpLogPower { gamma }, scale: 1.0, x0: E }
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(domain(format!("scale c must be positive, got {}", self.scale)));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(domain(format!("x0 must be positive, got {}", self.x0)));
        }
        match self.family {
            Family::Constant => {}
            Family::LogPower { beta } => {
                if !(beta > 0.0) {
                    return Err(domain(format!("beta must be > 0, got {beta}")));
                }
                if self.x0 <= 1.0 {
                    return Err(domain("log_power needs x0 > 1 so that log(x0) > 0"));
                }
            }
            Family::ExpLogPower { gamma } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(domain(format!("gamma must lie in (0,1), got {gamma}")));
                }
                if self.x0 <= 1.0 {
                    return Err(domain("exp_log_power needs x0 > 1"));
                }
            }
        }
        Ok(())
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        let x = x.max(self.x0);
        self.scale
            * match self.family {
                Family::Constant => 1.0,
                Family::LogPower { beta } => x.ln().powf(-beta),
                Family::ExpLogPower { gamma } => (-x.ln().powf(gamma)).exp(),
            }
    }

    /// `L(x)`; values below `x0` are clamped to `L(x0)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(domain(format!("slowly varying function needs x > 0, got {x}")));
        }
        Ok(self.eval_unchecked(x))
    }

    /// `ε(x) = x L'(x) / L(x)` in closed form (zero below `x0`).
    pub fn epsilon(&self, x: f64) -> f64 {
        if x < self.x0 {
            return 0.0;
        }
        match self.family {
            Family::Constant => 0.0,
            Family::LogPower { beta } => -beta / x.ln(),
            Family::ExpLogPower { gamma } => -gamma * x.ln().powf(gamma - 1.0),
        }
    }

    /// `x ε'(x)` in closed form.
    pub fn x_epsilon_prime(&self, x: f64) -> f64 {
        if x < self.x0 {
            return 0.0;
        }
        match self.family {
            Family::Constant => 0.0,
            Family::LogPower { beta } => beta / x.ln().powi(2),
            Family::ExpLogPower { gamma } => gamma * (1.0 - gamma) * x.ln().powf(gamma - 2.0),
        }
    }
}

/// `L(x)` for the given family.
pub fn eval_slowly_varying(spec: &SlowVarySpec, x: f64) -> Result<f64> {
    spec.eval(x)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("index alpha must lie in (0,1), got {alpha}")))
    }
}

// Number of full periods integrated explicitly before the asymptotic tail.
const PERIODS: usize = 64;
const MAX_PANELS: usize = 2000;

/// `J = ∫_0^∞ (1 - cos s) s^{-p} g(s) ds` with `p = 2α+1`.
///
/// `g` must be constant (`g0`) on `[0, s_flat]`, smooth and slowly varying
/// beyond, with logarithmic derivative `s g'(s)/g(s) = dlog_g(s)`.
fn spectral_integral<G, D>(alpha: f64, g: G, g0: f64, s_flat: f64, dlog_g: D, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let p = 2.0 * alpha + 1.0;
    // 2 sin²(s/2) avoids the cancellation in 1 - cos(s) for small s.
    let integrand = |s: f64| 2.0 * (0.5 * s).sin().powi(2) * s.powf(-p) * g(s);
    let panel_tol = tol / 20.0;

    // [0, s_c]: termwise integration of the cosine series.
    let s_c = s_flat.min(1.0);
    let mut head = 0.0;
    let mut fact = 1.0;
    for k in 1..40 {
        let two_k = 2 * k;
        fact *= (two_k - 1) as f64 * two_k as f64;
        let e = two_k as f64 - p + 1.0;
        let term = s_c.powf(e) / (fact * e);
        head += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 * head.abs() {
            break;
        }
    }
    let mut total = g0 * head;

    // [s_c, 1]: dyadic panels.
    let mut hi = 1.0;
    let mut dyadic = Vec::new();
    while hi > s_c {
        let lo = (hi / 2.0).max(s_c);
        dyadic.push((lo, hi));
        hi = lo;
    }
    for (lo, hi) in dyadic {
        let floor = 1e-3 * panel_tol * total;
        total += quad::integrate(integrand, lo, hi, floor, panel_tol, MAX_PANELS)?.value;
    }

    // [1, A]: one panel per period.
    let two_pi = 2.0 * PI;
    let mut lo = 1.0;
    for k in 1..=PERIODS {
        let hi = two_pi * k as f64;
        let floor = 1e-3 * panel_tol * total;
        total += quad::integrate(integrand, lo, hi, floor, panel_tol, MAX_PANELS)?.value;
        lo = hi;
    }
    let a = lo;

    // [A, ∞), non-oscillatory part ∫ s^{-p} g(s) ds with s = A e^u.
    let smooth = |u: f64| {
        let s = a * u.exp();
        s * s.powf(-p) * g(s)
    };
    let mut u = 0.0;
    let mut tail = 0.0;
    let decay = (-2.0 * alpha).exp();
    loop {
        let floor = 1e-3 * panel_tol * total;
        let piece = quad::integrate(smooth, u, u + 1.0, floor, panel_tol, MAX_PANELS)?.value;
        tail += piece;
        u += 1.0;
        let remainder = piece * decay / (1.0 - decay);
        if u > 4.0 && remainder < 1e-3 * tol * (total + tail) {
            break;
        }
        if u > 4000.0 {
            return Err(Error::Quadrature { tol, achieved: remainder / (total + tail) });
        }
    }
    total += tail;

    // Oscillatory part -∫_A^∞ cos(s) G(s) ds, G = s^{-p} g, by repeated
    // integration by parts at a multiple of 2π: ∫ cos·G = -G'(A) + G'''(A) - ...
    let big_g = a.powf(-p) * g(a);
    let slope = -p + dlog_g(a);
    let g1 = big_g * slope / a;
    let g3 = big_g * slope * (slope - 1.0) * (slope - 2.0) / a.powi(3);
    total -= -g1 + g3;

    Ok(total)
}

/// `c_α = (4/π) ∫_0^∞ sin²(s/2) s^{-2α-1} ds` by quadrature.
pub fn compute_c_alpha(alpha: f64, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(tol > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    let j = spectral_integral(alpha, |_| 1.0, 1.0, 1.0, |_| 0.0, tol)?;
    Ok(2.0 / PI * j)
}

/// `δ²_θ(h) = (2/π) ∫_0^∞ (1 - cos(xh)) dx / θ_α(x)`.
pub fn delta_sq_quadrature(alpha: f64, theta: &SlowVarySpec, h: f64, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    theta.validate()?;
    if !(h > 0.0 && h <= 1.0) {
        return Err(domain(format!("h must lie in (0,1], got {h}")));
    }
    // Substituting s = xh gives (2/π) h^{2α} ∫ (1 - cos s) s^{-2α-1} / L(s/h) ds.
    let g = |s: f64| 1.0 / theta.eval_unchecked(s / h);
    let g0 = 1.0 / theta.eval_unchecked(theta.x0);
    let dlog = |s: f64| -theta.epsilon(s / h);
    let j = spectral_integral(alpha, g, g0, h * theta.x0, dlog, tol)?;
    Ok(2.0 / PI * h.powf(2.0 * alpha) * j)
}

/// `θ_α` together with its precomputed constant `c_α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaModel {
    pub alpha: f64,
    pub theta: SlowVarySpec,
    pub c_alpha: f64,
}

impl ThetaModel {
    pub fn new(alpha: f64, theta: SlowVarySpec) -> Result<Self> {
        theta.validate()?;
        let c_alpha = compute_c_alpha(alpha, 1e-10)?;
        Ok(Self { alpha, theta, c_alpha })
    }

    /// `ℓ_θ(h)` without range checks (`h > 0`).
    pub fn ell(&self, h: f64) -> f64 {
        (self.c_alpha / self.theta.eval_unchecked(1.0 / h)).sqrt()
    }

    /// `ε(h) = -h ℓ_θ'(h)/ℓ_θ(h)`.
    pub fn ell_epsilon(&self, h: f64) -> f64 {
        -0.5 * self.theta.epsilon(1.0 / h)
    }

    /// `r^α ℓ_θ(r) log^{1/2}(1/r)`.
    pub fn drift_modulus(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < 1.0) {
            return Err(domain(format!("modulus argument must lie in (0,1), got {r}")));
        }
        Ok(r.powf(self.alpha) * self.ell(r) * (1.0 / r).ln().sqrt())
    }
}

/// `ℓ_θ(h) = c_α^{1/2} L^{-1/2}(1/h)` for `h ∈ (0,1]`.
pub fn ell_theta(spec: &SlowVarySpec, alpha: f64, h: f64) -> Result<f64> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(domain(format!("h must lie in (0,1], got {h}")));
    }
    Ok(ThetaModel::new(alpha, *spec)?.ell(h))
}

/// `w_{α,ℓ}(r) = r^α ℓ_θ(r) log^{1/2}(1/r)`.
pub fn drift_modulus(alpha: f64, spec: &SlowVarySpec, r: f64) -> Result<f64> {
    ThetaModel::new(alpha, *spec)?.drift_modulus(r)
}

pub const TABLE_POINTS: usize = 512;
pub const TABLE_H_MIN: f64 = 1e-6;

/// Tabulated `δ²_θ` on a log grid over `[1e-6, 1]` with monotone cubic
/// interpolation of `log δ²` against `log h`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncrementVariance {
    pub alpha: f64,
    pub theta: SlowVarySpec,
    pub quadrature_tol: f64,
    pub c_alpha: f64,
    log_h: Vec<f64>,
    log_v: Vec<f64>,
    slopes: Vec<f64>,
}

impl IncrementVariance {
    pub fn build(alpha: f64, theta: SlowVarySpec, quadrature_tol: f64) -> Result<Self> {
        let model = ThetaModel::new(alpha, theta)?;
        let n = TABLE_POINTS;
        let (lo, hi) = (TABLE_H_MIN.ln(), 0.0_f64);
        let log_h: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let values = crate::exec::map_indexed(n, |i| {
            delta_sq_quadrature(alpha, &theta, log_h[i].exp().min(1.0), quadrature_tol)
        });
        let mut log_v = Vec::with_capacity(n);
        for v in values {
            log_v.push(v?.ln());
        }
        for w in log_v.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Construction(
                    "increment variance is not strictly increasing on the grid".into(),
                ));
            }
        }
        let slopes = pchip_slopes(&log_h, &log_v);
        Ok(Self { alpha, theta, quadrature_tol, c_alpha: model.c_alpha, log_h, log_v, slopes })
    }

    pub fn model(&self) -> ThetaModel {
        ThetaModel { alpha: self.alpha, theta: self.theta, c_alpha: self.c_alpha }
    }

    /// Grid nodes `(h, δ²(h))`.
    pub fn table(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.log_h.iter().zip(&self.log_v).map(|(h, v)| (h.exp(), v.exp()))
    }

    /// `δ²(h)` for `h ≥ 0`. Below the grid the regularly varying form
    /// `h^{2α} ℓ²_θ(h)` carries the first node down; above `h = 1` the last
    /// interpolation slope is extended.
    pub fn delta_sq(&self, h: f64) -> f64 {
        let h = h.abs();
        if h == 0.0 {
            return 0.0;
        }
        let x = h.ln();
        let n = self.log_h.len();
        if x <= self.log_h[0] {
            let m = self.model();
            let h0 = self.log_h[0].exp();
            let scale = (h / h0).powf(2.0 * self.alpha) * (m.ell(h) / m.ell(h0)).powi(2);
            return self.log_v[0].exp() * scale;
        }
        if x >= self.log_h[n - 1] {
            return (self.log_v[n - 1] + self.slopes[n - 1] * (x - self.log_h[n - 1])).exp();
        }
        let step = self.log_h[1] - self.log_h[0];
        let i = (((x - self.log_h[0]) / step) as usize).min(n - 2);
        hermite(&self.log_h, &self.log_v, &self.slopes, i, x).exp()
    }

    pub fn delta(&self, h: f64) -> f64 {
        self.delta_sq(h).sqrt()
    }

    /// `δ²(h) / (h^{2α} ℓ²_θ(h))` at the `k` smallest grid nodes.
    pub fn asymptotic_ratios(&self, k: usize) -> Vec<(f64, f64)> {
        let m = self.model();
        self.table()
            .take(k)
            .map(|(h, v)| (h, v / (h.powf(2.0 * self.alpha) * m.ell(h).powi(2))))
            .collect()
    }
}

/// Fritsch-Carlson slopes for a monotone piecewise cubic Hermite interpolant.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = d[0];
    m[n - 1] = d[n - 2];
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    m
}

fn hermite(x: &[f64], y: &[f64], m: &[f64], i: usize, t: f64) -> f64 {
    let h = x[i + 1] - x[i];
    let s = (t - x[i]) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y[i]
        + (s3 - 2.0 * s2 + s) * h * m[i]
        + (-2.0 * s3 + 3.0 * s2) * y[i + 1]
        + (s3 - s2) * h * m[i + 1]
}

/// Where a regularly varying function is anchored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AtZero,
    AtInfinity,
}

/// `v(x) = x^α ℓ(x)`.
///
/// At zero the slowly varying part is induced by the family as
/// `ℓ(x) = L(1/x)^{-1/2}`, the same map that turns `L_θ` into `ℓ_θ` (up to
/// the constant `c_α`). At infinity `ℓ = L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegVarSpec {
    pub alpha: f64,
    pub slow: SlowVarySpec,
    pub direction: Direction,
}

impl RegVarSpec {
    pub fn at_zero(alpha: f64, slow: SlowVarySpec) -> Self {
        Self { alpha, slow, direction: Direction::AtZero }
    }

    pub fn slow_part(&self, x: f64) -> f64 {
        match self.direction {
            Direction::AtZero => self.slow.eval_unchecked(1.0 / x).powf(-0.5),
            Direction::AtInfinity => self.slow.eval_unchecked(x),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        x.powf(self.alpha) * self.slow_part(x)
    }

    /// `ε(x) = -x ℓ'(x)/ℓ(x)` for the at-zero form.
    pub fn epsilon(&self, x: f64) -> f64 {
        -0.5 * self.slow.epsilon(1.0 / x)
    }

    /// `x ε'(x)` for the at-zero form.
    pub fn x_epsilon_prime(&self, x: f64) -> f64 {
        0.5 * self.slow.x_epsilon_prime(1.0 / x)
    }

    /// Analytic `v'(x) = x^{α-1} ℓ(x) (α - ε(x))`.
    pub fn derivative(&self, x: f64) -> f64 {
        x.powf(self.alpha - 1.0) * self.slow_part(x) * (self.alpha - self.epsilon(x))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcavityReport {
    /// Largest certified `x2`; `None` when no window exists on the grid.
    pub x2: Option<f64>,
    pub grid_min: f64,
    pub grid_max: f64,
    /// `(x, ε(x))` samples.
    pub epsilon: Vec<(f64, f64)>,
    /// `(x, x ε'(x))` samples near zero.
    pub x_epsilon_prime: Vec<(f64, f64)>,
    /// `x ε'(x)` at the smallest grid point (the liminf-at-zero condition).
    pub x_epsilon_prime_near_zero: f64,
    /// `x ε'_θ(x)` of the family at a large argument (the limsup-at-infinity condition).
    pub x_epsilon_prime_near_infinity: f64,
    pub diagnostics: String,
}

pub const CONCAVITY_GRID: usize = 2000;
pub const CONCAVITY_X_MIN: f64 = 1e-12;

fn concavity_grid() -> Vec<f64> {
    let (lo, hi) = (CONCAVITY_X_MIN.ln(), 0.0);
    (0..CONCAVITY_GRID)
        .map(|i| (lo + (hi - lo) * i as f64 / (CONCAVITY_GRID - 1) as f64).exp())
        .collect()
}

/// Largest `x2` on a geometric grid over `[1e-12, 1]` such that the first
/// differences of `v` are positive and the difference quotients strictly
/// decrease on `(0, x2]`.
pub fn check_concavity_window(v: &RegVarSpec) -> Result<ConcavityReport> {
    if v.direction != Direction::AtZero {
        return Err(domain("concavity window is defined for functions regularly varying at zero"));
    }
    check_alpha(v.alpha)?;
    v.slow.validate()?;
    let xs = concavity_grid();
    let vs: Vec<f64> = xs.iter().map(|&x| v.eval(x)).collect();
    let quotients: Vec<f64> =
        (0..xs.len() - 1).map(|i| (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i])).collect();

    // Index j certified when every quotient up to j is positive and every
    // consecutive pair up to j is decreasing.
    let mut last_ok: Option<usize> = None;
    let mut failure = String::new();
    for j in 0..quotients.len() {
        let positive = quotients[j] > 0.0;
        let decreasing = j == 0 || quotients[j] < quotients[j - 1];
        if positive && decreasing {
            last_ok = Some(j + 1);
        } else {
            failure = format!(
                "first violation at x = {:.4e} ({})",
                xs[j + 1],
                if positive { "difference quotient increases" } else { "non-positive increment" }
            );
            break;
        }
    }
    let x2 = match last_ok {
        // A window needs at least a few certified nodes.
        Some(j) if j >= 3 => Some(xs[j]),
        _ => None,
    };
    let diagnostics = if x2.is_none() {
        format!("no concavity window on the grid; {failure}")
    } else if failure.is_empty() {
        "concave on the whole grid".to_string()
    } else {
        failure
    };
    let stride = CONCAVITY_GRID / 40;
    let epsilon = xs.iter().step_by(stride).map(|&x| (x, v.epsilon(x))).collect();
    let x_epsilon_prime = xs.iter().step_by(stride).map(|&x| (x, v.x_epsilon_prime(x))).collect();
    Ok(ConcavityReport {
        x2,
        grid_min: xs[0],
        grid_max: *xs.last().expect("grid"),
        epsilon,
        x_epsilon_prime,
        x_epsilon_prime_near_zero: v.x_epsilon_prime(xs[0]),
        x_epsilon_prime_near_infinity: v.slow.x_epsilon_prime(1e300),
        diagnostics,
    })
}

/// For `x3` inside the concavity window, the largest grid radius `r0 < x3`
/// with `v'(x3)/v'(r0) ≤ c`. Below it, `v(t) - v(s) ≤ c v(t - s)` for
/// `x3 ≤ s < t` with `t - s < r0`.
pub fn subadditivity_radius(v: &RegVarSpec, x3: f64, c: f64) -> Option<f64> {
    let target = v.derivative(x3) / c;
    concavity_grid().into_iter().rfind(|&r| r < x3 && v.derivative(r) >= target)
}
