//! Quadrature on R^d charts and finite-difference derivatives.
//!
//! Infinite charts are covered by the per-axis substitution `x = c + s tan(u)`,
//! so polynomially decaying integrands are integrated without a cutoff. The
//! radial scheme pairs a Gauss-Legendre rule in `r = s tan(u)` with a
//! degree-5 spherical design, which is exact in the angular variables for
//! integrands of the form `radial(r) * polynomial(x/r)` of degree <= 5.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::algebra::{ComplexMatrix, C64};
use crate::error::{Error, Result};

pub const DEFAULT_RADIAL_NODES: usize = 200;
pub const DEFAULT_TENSOR_NODES: usize = 48;
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;
pub const MIN_NODES: usize = 8;

/// Relative finite-difference step, multiplied by the natural length scale.
pub const DEFAULT_RELATIVE_STEP: f64 = 1e-3;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Area of the unit sphere `S^{d-1}`.
pub fn sphere_volume(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma(d as f64 / 2.0)
}

/// Degree-5 design on `S^{d-1}`: the cross-polytope vertices with total
/// weight `2/(d+2)` and the cube vertices with total weight `d/(d+2)`.
/// Weights sum to one. For `d = 4` these are the 24 vertices of the 24-cell.
pub fn angular_design(d: usize) -> Vec<(Vec<f64>, f64)> {
    assert!((1..=10).contains(&d), "angular design supports 1 <= d <= 10");
    if d == 1 {
        return vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)];
    }
    let mut out = Vec::new();
    let w_cross = 2.0 / (d as f64 + 2.0) / (2 * d) as f64;
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[i] = s;
            out.push((v, w_cross));
        }
    }
    let corners = 1usize << d;
    let w_cube = d as f64 / (d as f64 + 2.0) / corners as f64;
    let a = 1.0 / (d as f64).sqrt();
    for mask in 0..corners {
        let v = (0..d)
            .map(|i| if mask >> i & 1 == 1 { -a } else { a })
            .collect();
        out.push((v, w_cube));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "radial")]
    Radial,
    #[serde(rename = "tensor")]
    Tensor,
    #[serde(rename = "mc")]
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Nodes {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

impl Nodes {
    fn along(&self, axis: usize) -> usize {
        match self {
            Nodes::Uniform(n) => *n,
            Nodes::PerAxis(v) => v[axis],
        }
    }

    fn min(&self) -> usize {
        match self {
            Nodes::Uniform(n) => *n,
            Nodes::PerAxis(v) => v.iter().copied().min().unwrap_or(0),
        }
    }
}

/// Integration domain: the box `[-L, L]^d` or all of `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chart {
    Box(f64),
    Infinite,
}

impl Chart {
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Chart::Box(l) => x.iter().all(|v| v.abs() <= l),
            Chart::Infinite => x.iter().all(|v| v.is_finite()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ChartRepr {
    Finite(f64),
    Named(String),
}

impl Serialize for Chart {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Chart::Box(l) => ChartRepr::Finite(l),
            Chart::Infinite => ChartRepr::Named("inf".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Chart {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ChartRepr::deserialize(d)? {
            ChartRepr::Finite(l) => Ok(Chart::Box(l)),
            ChartRepr::Named(s) if s == "inf" => Ok(Chart::Infinite),
            ChartRepr::Named(s) => Err(serde::de::Error::custom(format!(
                "chart extent must be a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Integration scheme descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub scheme: Scheme,
    pub nodes: Nodes,
    #[serde(rename = "L")]
    pub chart: Chart,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl QuadratureSpec {
    pub fn radial(nodes: usize) -> Self {
        QuadratureSpec {
            scheme: Scheme::Radial,
            nodes: Nodes::Uniform(nodes),
            chart: Chart::Infinite,
            seed: None,
        }
    }

    pub fn tensor(nodes: usize, chart: Chart) -> Self {
        QuadratureSpec {
            scheme: Scheme::Tensor,
            nodes: Nodes::Uniform(nodes),
            chart,
            seed: None,
        }
    }

    pub fn monte_carlo(samples: usize, chart: Chart, seed: u64) -> Self {
        QuadratureSpec {
            scheme: Scheme::MonteCarlo,
            nodes: Nodes::Uniform(samples),
            chart,
            seed: Some(seed),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if let Nodes::PerAxis(v) = &self.nodes {
            if self.scheme != Scheme::Tensor {
                return Err(Error::InvalidQuadrature(
                    "per-axis node counts only apply to the tensor scheme".into(),
                ));
            }
            if v.len() != d {
                return Err(Error::InvalidQuadrature(format!(
                    "{} per-axis node counts for a {d}-dimensional chart",
                    v.len()
                )));
            }
        }
        if self.nodes.min() < MIN_NODES {
            return Err(Error::InvalidQuadrature(format!(
                "node counts must be >= {MIN_NODES}"
            )));
        }
        if let Chart::Box(l) = self.chart {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidQuadrature(format!("chart half-width L = {l} must be positive")));
            }
        }
        match self.scheme {
            Scheme::Radial if self.chart != Chart::Infinite => Err(Error::InvalidQuadrature(
                "the radial scheme integrates over all of R^d (L = \"inf\")".into(),
            )),
            Scheme::MonteCarlo if self.seed.is_none() => Err(Error::InvalidQuadrature(
                "the monte-carlo scheme requires a seed".into(),
            )),
            _ => Ok(()),
        }
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::radial(DEFAULT_RADIAL_NODES)
    }
}

/// Centre and length scale used by the radial scheme and the tangent map.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub centre: Vec<f64>,
    pub scale: f64,
}

impl Placement {
    pub fn origin(d: usize) -> Self {
        Placement {
            centre: vec![0.0; d],
            scale: 1.0,
        }
    }
}

/// Result of a (possibly vector-valued) integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: Vec<f64>,
    /// Per-component standard error, Monte Carlo only.
    pub std_error: Option<Vec<f64>>,
    pub evaluations: usize,
}

/// Tail test: `r^d |f|` sampled at `R, 10R, 100R` must fall by at least half
/// over the two decades, otherwise the integral over `R^d` is declared divergent.
pub const TAIL_RADII: [f64; 3] = [1e2, 1e3, 1e4];
pub const TAIL_DECAY_RATIO: f64 = 0.5;

pub fn check_tail<F>(f: &F, k: usize, placement: &Placement) -> Result<()>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let d = placement.centre.len();
    let design = angular_design(d);
    let mut moments = [0.0_f64; 3];
    for (slot, &radius) in moments.iter_mut().zip(TAIL_RADII.iter()) {
        let r = radius * placement.scale;
        for (dir, _) in &design {
            let x: Vec<f64> = placement
                .centre
                .iter()
                .zip(dir)
                .map(|(c, u)| c + r * u)
                .collect();
            let v = f(&x)?;
            debug_assert_eq!(v.len(), k);
            let m = v.iter().fold(0.0_f64, |a, y| a.max(y.abs()));
            if !m.is_finite() {
                return Err(Error::Divergence(format!("integrand is infinite at |x| = {r:e}")));
            }
            *slot = slot.max(m * (r / placement.scale).powi(d as i32));
        }
    }
    let scale = moments.iter().fold(0.0_f64, |a, &b| a.max(b));
    if scale < 1e-250 {
        return Ok(());
    }
    if moments[2] > TAIL_DECAY_RATIO * moments[0] {
        return Err(Error::Divergence(format!(
            "r^{d}|f| does not decay at infinity (samples {:.3e}, {:.3e}, {:.3e} at r = 1e2, 1e3, 1e4)",
            moments[0], moments[1], moments[2]
        )));
    }
    Ok(())
}

fn finite_or_poisoned(v: Vec<f64>, x: &[f64]) -> Result<Vec<f64>> {
    if v.iter().all(|y| y.is_finite()) {
        Ok(v)
    } else {
        Err(Error::PoisonedEvaluation { location: x.to_vec() })
    }
}

fn accumulate(acc: &mut [f64], v: &[f64], w: f64) {
    for (a, y) in acc.iter_mut().zip(v) {
        *a += w * y;
    }
}

/// Integrate a `k`-component integrand over a `d`-dimensional chart.
///
/// Evaluations run in parallel; partial sums are combined in a fixed order so
/// identical inputs give bit-identical results.
pub fn integrate_chart_vec<F>(
    f: F,
    k: usize,
    d: usize,
    spec: &QuadratureSpec,
    placement: &Placement,
) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    spec.validate(d)?;
    if placement.centre.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: placement.centre.len(),
        });
    }
    if !(placement.scale > 0.0) {
        return Err(Error::InvalidQuadrature("placement scale must be positive".into()));
    }
    if spec.chart == Chart::Infinite {
        check_tail(&f, k, placement)?;
    }
    let eval = |x: &[f64]| -> Result<Vec<f64>> { finite_or_poisoned(f(x)?, x) };
    match spec.scheme {
        Scheme::Radial => radial_scheme(eval, k, d, spec.nodes.min(), placement),
        Scheme::Tensor => tensor_scheme(eval, k, d, spec, placement),
        Scheme::MonteCarlo => monte_carlo(eval, k, d, spec, placement),
    }
}

/// Scalar convenience wrapper around [`integrate_chart_vec`].
pub fn integrate_chart<F>(f: F, d: usize, spec: &QuadratureSpec, placement: &Placement) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    integrate_chart_vec(|x| Ok(vec![f(x)]), 1, d, spec, placement)
}

fn radial_scheme<F>(f: F, k: usize, d: usize, nodes: usize, placement: &Placement) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let (xi, wi) = gauss_legendre(nodes);
    let design = angular_design(d);
    let area = sphere_volume(d);
    let s = placement.scale;
    let shells: Vec<Vec<f64>> = xi
        .par_iter()
        .zip(wi.par_iter())
        .map(|(&t, &w)| -> Result<Vec<f64>> {
            let u = 0.25 * PI * (t + 1.0);
            let r = s * u.tan();
            let jac = 0.25 * PI * w * s / (u.cos() * u.cos()) * r.powi(d as i32 - 1) * area;
            let mut acc = vec![0.0; k];
            let mut x = vec![0.0; d];
            for (dir, wd) in &design {
                for i in 0..d {
                    x[i] = placement.centre[i] + r * dir[i];
                }
                let v = f(&x)?;
                accumulate(&mut acc, &v, jac * wd);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut value = vec![0.0; k];
    for shell in &shells {
        accumulate(&mut value, shell, 1.0);
    }
    Ok(Estimate {
        value,
        std_error: None,
        evaluations: nodes * design.len(),
    })
}

fn axis_rule(n: usize, chart: Chart, centre: f64, scale: f64) -> (Vec<f64>, Vec<f64>) {
    let (xi, wi) = gauss_legendre(n);
    match chart {
        Chart::Box(l) => (
            xi.iter().map(|t| l * t).collect(),
            wi.iter().map(|w| l * w).collect(),
        ),
        Chart::Infinite => {
            let mut xs = Vec::with_capacity(n);
            let mut ws = Vec::with_capacity(n);
            for (t, w) in xi.iter().zip(&wi) {
                let u = 0.5 * PI * t;
                let cu = u.cos();
                xs.push(centre + scale * u.tan());
                ws.push(0.5 * PI * w * scale / (cu * cu));
            }
            (xs, ws)
        }
    }
}

fn tensor_scheme<F>(f: F, k: usize, d: usize, spec: &QuadratureSpec, placement: &Placement) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
        .map(|a| axis_rule(spec.nodes.along(a), spec.chart, placement.centre[a], placement.scale))
        .collect();
    let inner: usize = rules.iter().skip(1).map(|r| r.0.len()).product();
    let first = rules[0].0.len();
    let slabs: Vec<Vec<f64>> = (0..first)
        .into_par_iter()
        .map(|i0| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; k];
            let mut x = vec![0.0; d];
            let mut idx = vec![0usize; d];
            idx[0] = i0;
            for flat in 0..inner {
                let mut rem = flat;
                for a in (1..d).rev() {
                    let n = rules[a].0.len();
                    idx[a] = rem % n;
                    rem /= n;
                }
                let mut w = 1.0;
                for a in 0..d {
                    x[a] = rules[a].0[idx[a]];
                    w *= rules[a].1[idx[a]];
                }
                let v = f(&x)?;
                accumulate(&mut acc, &v, w);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut value = vec![0.0; k];
    for slab in &slabs {
        accumulate(&mut value, slab, 1.0);
    }
    Ok(Estimate {
        value,
        std_error: None,
        evaluations: first * inner,
    })
}

const MC_BLOCK: usize = 4096;

fn monte_carlo<F>(f: F, k: usize, d: usize, spec: &QuadratureSpec, placement: &Placement) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let samples = spec.nodes.min();
    let seed = spec.seed.unwrap_or_default();
    let blocks = samples.div_ceil(MC_BLOCK);
    // One independent stream per block keeps the result independent of the
    // thread count.
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            let mut sum = vec![0.0; k];
            let mut sq = vec![0.0; k];
            let mut x = vec![0.0; d];
            for _ in 0..count {
                let mut w = 1.0;
                for a in 0..d {
                    match spec.chart {
                        Chart::Box(l) => {
                            x[a] = rng.gen_range(-l..l);
                            w *= 2.0 * l;
                        }
                        Chart::Infinite => {
                            let u: f64 = rng.gen_range(-0.5 * PI..0.5 * PI);
                            let cu = u.cos();
                            x[a] = placement.centre[a] + placement.scale * u.tan();
                            w *= PI * placement.scale / (cu * cu);
                        }
                    }
                }
                let v = f(&x)?;
                for j in 0..k {
                    let y = w * v[j];
                    sum[j] += y;
                    sq[j] += y * y;
                }
            }
            Ok((sum, sq))
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; k];
    let mut sq = vec![0.0; k];
    for (s, q) in &partial {
        accumulate(&mut sum, s, 1.0);
        accumulate(&mut sq, q, 1.0);
    }
    let n = samples as f64;
    let value: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = value
        .iter()
        .zip(&sq)
        .map(|(m, q)| ((q / n - m * m).max(0.0) / (n - 1.0).max(1.0)).sqrt())
        .collect();
    Ok(Estimate {
        value,
        std_error: Some(std_error),
        evaluations: samples,
    })
}

/// `Vol(S^{d-1}) * int_0^inf r^{d-1} profile(r) dr`, with `r = tan(u)` and
/// Gauss-Legendre in `u` on `(0, pi/2)`.
pub fn integrate_radial<F>(profile: F, d: usize, nodes: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if nodes < MIN_NODES {
        return Err(Error::InvalidQuadrature(format!("node counts must be >= {MIN_NODES}")));
    }
    let tail: Vec<f64> = TAIL_RADII
        .iter()
        .map(|&r| r.powi(d as i32) * profile(r).abs())
        .collect();
    if tail.iter().any(|t| !t.is_finite()) {
        return Err(Error::Divergence("profile is infinite in the tail".into()));
    }
    if tail[0] > 1e-250 && tail[2] > TAIL_DECAY_RATIO * tail[0] {
        return Err(Error::Divergence(format!(
            "r^{d}|f(r)| does not decay (samples {:.3e}, {:.3e}, {:.3e})",
            tail[0], tail[1], tail[2]
        )));
    }
    let (xi, wi) = gauss_legendre(nodes);
    let mut sum = 0.0;
    for (t, w) in xi.iter().zip(&wi) {
        let u = 0.25 * PI * (t + 1.0);
        let r = u.tan();
        let cu = u.cos();
        let v = profile(r);
        if !v.is_finite() {
            return Err(Error::PoisonedEvaluation { location: vec![r] });
        }
        sum += 0.25 * PI * w / (cu * cu) * r.powi(d as i32 - 1) * v;
    }
    Ok(sum * sphere_volume(d))
}

/// Values that finite differences can be taken of.
pub trait FieldValue: Clone {
    /// `a * self + b * other`.
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self;
}

impl FieldValue for f64 {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        a * self + b * other
    }
}

impl FieldValue for C64 {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        self * a + other * b
    }
}

impl FieldValue for ComplexMatrix {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        self.zip_map(other, |x, y| x * a + y * b)
    }
}

impl<T: FieldValue> FieldValue for Vec<T> {
    fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        self.iter().zip(other).map(|(x, y)| x.combine(a, y, b)).collect()
    }
}

/// Plain central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn central_difference<T, F>(f: F, x: f64, h: f64) -> T
where
    T: FieldValue,
    F: Fn(f64) -> T,
{
    f(x + h).combine(0.5 / h, &f(x - h), -0.5 / h)
}

/// Offsets (in units of `h`) and weights (in units of `1/h`) of the
/// Richardson-extrapolated central difference `(4 D(h/2) - D(h)) / 3`.
pub const RICHARDSON_STENCIL: [(f64, f64); 4] = [
    (1.0, -1.0 / 6.0),
    (-1.0, 1.0 / 6.0),
    (0.5, 4.0 / 3.0),
    (-0.5, -4.0 / 3.0),
];

/// Apply [`RICHARDSON_STENCIL`] to samples taken at `x + offset * h`.
pub fn richardson_combine<T: FieldValue>(samples: &[T; 4], h: f64) -> T {
    let mut acc = samples[0].combine(RICHARDSON_STENCIL[0].1 / h, &samples[1], RICHARDSON_STENCIL[1].1 / h);
    for j in 2..4 {
        acc = acc.combine(1.0, &samples[j], RICHARDSON_STENCIL[j].1 / h);
    }
    acc
}

/// Central difference with one Richardson extrapolation step; error `O(h^4)`.
pub fn richardson_derivative<T, F>(f: F, x: f64, h: f64) -> T
where
    T: FieldValue,
    F: Fn(f64) -> T,
{
    let samples = RICHARDSON_STENCIL.map(|(o, _)| f(x + o * h));
    richardson_combine(&samples, h)
}

/// Partial derivative along `direction` at `point`.
pub fn partial_derivative<T, F>(f: F, point: &[f64], direction: usize, h: f64) -> T
where
    T: FieldValue,
    F: Fn(&[f64]) -> T,
{
    richardson_derivative(
        |s| {
            let mut x = point.to_vec();
            x[direction] += s;
            f(&x)
        },
        0.0,
        h,
    )
}

/// [`partial_derivative`] restricted to a chart: every stencil point must lie
/// inside it.
pub fn partial_derivative_in<T, F>(f: F, point: &[f64], direction: usize, h: f64, chart: &Chart) -> Result<T>
where
    T: FieldValue,
    F: Fn(&[f64]) -> T,
{
    for s in [-h, h] {
        let mut x = point.to_vec();
        x[direction] += s;
        if !chart.contains(&x) {
            return Err(Error::OutOfChart { point: x });
        }
    }
    Ok(partial_derivative(|x: &[f64]| f(x), point, direction, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in [1, 2, 5, 8, 48, 200] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n = {n}");
            let deg = (2 * n - 1).min(30);
            let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - (deg as i32 % 2))).sum();
            let p = (deg - deg % 2) as f64;
            assert!((m - 2.0 / (p + 1.0)).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn design_integrates_degree_five() {
        for d in 2..=6 {
            let design = angular_design(d);
            let total: f64 = design.iter().map(|(_, w)| w).sum();
            assert!((total - 1.0).abs() < 1e-14);
            let df = d as f64;
            let m2: f64 = design.iter().map(|(v, w)| w * v[0] * v[0]).sum();
            let m4: f64 = design.iter().map(|(v, w)| w * v[0].powi(4)).sum();
            let m22: f64 = design.iter().map(|(v, w)| w * v[0] * v[0] * v[1] * v[1]).sum();
            assert!((m2 - 1.0 / df).abs() < 1e-14);
            assert!((m4 - 3.0 / (df * (df + 2.0))).abs() < 1e-14);
            assert!((m22 - 1.0 / (df * (df + 2.0))).abs() < 1e-14);
        }
    }

    #[test]
    fn radial_examples() {
        let pi2 = PI * PI;
        let v = integrate_radial(|r| (1.0 + r * r).powi(-4), 4, 200).unwrap();
        assert!((v / (pi2 / 6.0) - 1.0).abs() < 1e-10);
        let v = integrate_radial(|r| (1.0 + r * r).powi(-6), 4, 200).unwrap();
        assert!((v / (pi2 / 20.0) - 1.0).abs() < 1e-10);
        let v = integrate_radial(|r| (-r * r).exp(), 4, 200).unwrap();
        assert!((v / pi2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn radial_divergence_is_flagged() {
        let err = integrate_radial(|r| (1.0 + r * r).powi(-2), 4, 200).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    #[test]
    fn unit_box_volume() {
        let spec = QuadratureSpec::tensor(8, Chart::Box(1.0));
        let e = integrate_chart(|_| 1.0, 4, &spec, &Placement::origin(4)).unwrap();
        assert!((e.value[0] - 16.0).abs() < 1e-12);
    }

    #[test]
    fn poisoned_evaluation_reports_location() {
        let spec = QuadratureSpec::tensor(8, Chart::Box(1.0));
        let err = integrate_chart(|x| if x[0] > 0.9 { f64::NAN } else { 0.0 }, 2, &spec, &Placement::origin(2))
            .unwrap_err();
        match err {
            Error::PoisonedEvaluation { location } => assert!(location[0] > 0.9),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn tensor_and_radial_agree_on_invariant_integrand() {
        let f = |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (1.0 + r2).powi(-4)
        };
        let radial = integrate_chart(f, 4, &QuadratureSpec::radial(200), &Placement::origin(4)).unwrap();
        let tensor = integrate_chart(f, 4, &QuadratureSpec::tensor(32, Chart::Infinite), &Placement::origin(4)).unwrap();
        let exact = PI * PI / 6.0;
        assert!((radial.value[0] / exact - 1.0).abs() < 1e-10);
        assert!((tensor.value[0] / radial.value[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn monte_carlo_is_deterministic_and_consistent() {
        let f = |x: &[f64]| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            (-r2).exp()
        };
        let spec = QuadratureSpec::monte_carlo(200_000, Chart::Infinite, 42);
        let a = integrate_chart(f, 2, &spec, &Placement::origin(2)).unwrap();
        let b = integrate_chart(f, 2, &spec, &Placement::origin(2)).unwrap();
        assert_eq!(a, b);
        let se = a.std_error.as_ref().unwrap()[0];
        assert!((a.value[0] - PI).abs() < 5.0 * se, "{} +- {se}", a.value[0]);
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"scheme":"tensor","nodes":[8,9,10,11],"L":"inf","seed":3}"#;
        let spec: QuadratureSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.chart, Chart::Infinite);
        assert_eq!(spec.nodes, Nodes::PerAxis(vec![8, 9, 10, 11]));
        let back: QuadratureSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let spec: QuadratureSpec = serde_json::from_str(r#"{"scheme":"radial","nodes":200,"L":"inf"}"#).unwrap();
        assert!(spec.validate(4).is_ok());
        let bad: QuadratureSpec = serde_json::from_str(r#"{"scheme":"tensor","nodes":4,"L":2.0}"#).unwrap();
        assert!(bad.validate(4).is_err());
        assert!(serde_json::from_str::<QuadratureSpec>(r#"{"scheme":"tensor","nodes":9,"L":"big"}"#).is_err());
    }

    #[test]
    fn cubic_derivative() {
        let d: f64 = richardson_derivative(|t: f64| t * t * t, 2.0, 1e-3);
        assert!((d - 12.0).abs() < 1e-8);
    }

    #[test]
    fn central_difference_converges_at_second_order() {
        let f = |t: f64| t.sin() * t.exp();
        let exact = 1.0_f64.cos() * 1.0_f64.exp() + 1.0_f64.sin() * 1.0_f64.exp();
        let e1 = (central_difference(f, 1.0, 1e-2) - exact).abs();
        let e2 = (central_difference(f, 1.0, 5e-3) - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn richardson_order_is_at_least_three_and_a_half() {
        let f = |t: f64| (2.0 * t).sin() / (1.0 + t * t);
        let h1 = 0.1;
        let exact: f64 = {
            let t = 0.7_f64;
            2.0 * (2.0 * t).cos() / (1.0 + t * t) - (2.0 * t).sin() * 2.0 * t / (1.0 + t * t).powi(2)
        };
        let e1 = (richardson_derivative(f, 0.7, h1) - exact).abs();
        let e2 = (richardson_derivative(f, 0.7, h1 / 2.0) - exact).abs();
        let order = (e1 / e2).log2();
        assert!(order >= 3.5, "order {order}");
    }

    #[test]
    fn out_of_chart_derivative() {
        let err = partial_derivative_in(|x: &[f64]| x[0], &[0.9995], 0, 1e-3, &Chart::Box(1.0)).unwrap_err();
        assert!(matches!(err, Error::OutOfChart { .. }));
        let ok: f64 = partial_derivative_in(|x: &[f64]| x[0] * x[0], &[0.5], 0, 1e-3, &Chart::Box(1.0)).unwrap();
        assert!((ok - 1.0).abs() < 1e-10);
    }
}
