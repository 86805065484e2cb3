//! The `d x 1` universal matrix of a U(1) connection on `R^d` that is pure
//! gauge at infinity.
//!
//! With logistic profiles `r_i^2 = c_i / (e^{x_i} + 1)` (`i < d`),
//! `r_d^2 = 1 - sum r_i^2`, a real connection is written as
//! `A = -sum_i theta_i dr_i^2 + d theta_bar` and the frame
//!
//! ```text
//! U = (r_1 e^{-i(theta_1 + theta_d)}, ..., r_{d-1} e^{-i(theta_{d-1} + theta_d)}, r_d e^{-i theta_d})
//! ```
//!
//! with `theta_d = theta_bar - sum r_i^2 theta_i` satisfies `i U^dagger dU = A`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algebra::{c, ComplexMatrix, FrameMatrix, C64};
use crate::calculus::{gauss_legendre, partial_derivative, DEFAULT_RELATIVE_STEP};
use crate::error::{Error, Result};

/// `A` must vanish outside this fraction of the chart box.
pub const INNER_FRACTION: f64 = 0.8;

/// Absolute tolerance for "vanishes" on the margin.
pub const MARGIN_TOL: f64 = 1e-12;

/// Default total weight `sum c_i`.
pub const DEFAULT_PROFILE_WEIGHT: f64 = 0.9;

/// Line integrals use panels at most this wide.
const PANEL_WIDTH: f64 = 1.0 / 32.0;
const PANEL_NODES: usize = 16;

/// Step for derivatives of `theta_bar`; the line integral is accurate to
/// rounding, so a short step costs little.
pub const THETA_BAR_STEP: f64 = 2.5e-4;

/// Constants `c_1..c_{d-1}` of the logistic profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelianProfiles {
    c: Vec<f64>,
}

impl AbelianProfiles {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidProfiles("need d >= 2, i.e. at least one constant".into()));
        }
        if c.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidProfiles(format!("constants must be positive, got {c:?}")));
        }
        let total: f64 = c.iter().sum();
        if total >= 1.0 {
            return Err(Error::InvalidProfiles(format!("sum of constants is {total}, must be < 1")));
        }
        Ok(AbelianProfiles { c })
    }

    /// `c_i = 0.9/(d-1)`, leaving `r_d^2 >= 0.1`.
    pub fn default_for(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidProfiles(format!("dimension {dim} < 2")));
        }
        Self::new(vec![DEFAULT_PROFILE_WEIGHT / (dim - 1) as f64; dim - 1])
    }

    pub fn dim(&self) -> usize {
        self.c.len() + 1
    }

    pub fn constants(&self) -> &[f64] {
        &self.c
    }

    /// `r_i^2(x_i)`.
    pub fn r2(&self, i: usize, xi: f64) -> f64 {
        // c/(e^x + 1) without overflow for large x.
        self.c[i] * 0.5 * (1.0 - (0.5 * xi).tanh())
    }

    /// `d r_i^2 / dx_i`, strictly negative.
    pub fn dr2(&self, i: usize, xi: f64) -> f64 {
        let ch = (0.5 * xi).cosh();
        -self.c[i] * 0.25 / (ch * ch)
    }

    /// `r_d^2 = 1 - sum r_i^2`.
    pub fn rd2(&self, x: &[f64]) -> f64 {
        1.0 - (0..self.c.len()).map(|i| self.r2(i, x[i])).sum::<f64>()
    }
}

/// Pointwise frame from angles `theta_1..theta_{d-1}` and `theta_d`.
pub fn abelian_frame_at(profiles: &AbelianProfiles, x: &[f64], theta: &[f64], theta_d: f64) -> Result<ComplexMatrix> {
    let d = profiles.dim();
    if x.len() != d || theta.len() != d - 1 {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    let rd2 = profiles.rd2(x);
    if !(rd2 > 0.0) {
        return Err(Error::InvalidProfiles(format!("r_d^2 = {rd2} <= 0")));
    }
    let mut u = ComplexMatrix::zeros(d, 1);
    for i in 0..d - 1 {
        u[(i, 0)] = c(0.0, -(theta[i] + theta_d)).exp() * profiles.r2(i, x[i]).sqrt();
    }
    u[(d - 1, 0)] = c(0.0, -theta_d).exp() * rd2.sqrt();
    Ok(u)
}

/// C-infinity bump `exp(1 - 1/(1 - u^2))` on `|u| < 1`, peak value 1.
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

/// Derivative of [`bump`].
pub fn bump_derivative(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let w = 1.0 - u * u;
        bump(u) * (-2.0 * u / (w * w))
    }
}

/// Angles computed from a connection given as a function.
///
/// `theta_bar` is the line integral of `A_d` from the lower face `x_d = -L`.
pub struct AbelianAngles<A> {
    pub profiles: AbelianProfiles,
    pub field: A,
    pub half_width: f64,
}

/// Angles for `field` on `[-L, L]^d`.
pub fn abelian_angles<A>(field: A, profiles: AbelianProfiles, half_width: f64) -> AbelianAngles<A>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    AbelianAngles {
        profiles,
        field,
        half_width,
    }
}

impl<A: Fn(&[f64]) -> Vec<f64>> AbelianAngles<A> {
    fn dim(&self) -> usize {
        self.profiles.dim()
    }

    pub fn theta_bar(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        self.line_integral(x, |y| (self.field)(y)[d - 1])
    }

    /// Integral of `g` along `x_d` from the lower face to `x`.
    fn line_integral(&self, x: &[f64], g: impl Fn(&[f64]) -> f64) -> f64 {
        let d = self.dim();
        let lower = -self.half_width;
        let upper = x[d - 1];
        if upper <= lower {
            return 0.0;
        }
        let (nodes, weights) = gauss_legendre(PANEL_NODES);
        // Fixed panels anchored at the lower face, last one partial, so the
        // result varies smoothly with x_d.
        let mut y = x.to_vec();
        let mut total = 0.0;
        let mut a = lower;
        while a < upper {
            let b = (a + PANEL_WIDTH).min(upper);
            let w = b - a;
            for (t, wt) in nodes.iter().zip(&weights) {
                y[d - 1] = a + 0.5 * w * (t + 1.0);
                total += 0.5 * w * wt * g(&y);
            }
            a += PANEL_WIDTH;
        }
        total
    }

    /// Transverse derivatives are taken under the integral sign.
    fn grad_theta_bar(&self, x: &[f64], i: usize) -> f64 {
        let d = self.dim();
        if i == d - 1 {
            return (self.field)(x)[d - 1];
        }
        self.line_integral(x, |y| partial_derivative(|z: &[f64]| (self.field)(z)[d - 1], y, i, THETA_BAR_STEP))
    }

    /// `theta_i = -(A_i - d_i theta_bar) / d_i r_i^2` for `i < d`.
    pub fn theta(&self, x: &[f64]) -> Vec<f64> {
        let a = (self.field)(x);
        (0..self.dim() - 1)
            .map(|i| -(a[i] - self.grad_theta_bar(x, i)) / self.profiles.dr2(i, x[i]))
            .collect()
    }

    /// `theta_d = theta_bar - sum r_i^2 theta_i`.
    pub fn theta_d(&self, x: &[f64], theta: &[f64]) -> f64 {
        self.theta_bar(x) - theta.iter().enumerate().map(|(i, t)| self.profiles.r2(i, x[i]) * t).sum::<f64>()
    }

    pub fn frame(&self, x: &[f64]) -> Result<FrameMatrix> {
        let theta = self.theta(x);
        let td = self.theta_d(x, &theta);
        FrameMatrix::new(abelian_frame_at(&self.profiles, x, &theta, td)?)
    }

    /// `-sum_i theta_i d_mu r_i^2 + d_mu theta_bar`.
    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let theta = self.theta(x);
        (0..self.dim())
            .map(|mu| {
                let mut v = self.grad_theta_bar(x, mu);
                if mu < self.dim() - 1 {
                    v -= theta[mu] * self.profiles.dr2(mu, x[mu]);
                }
                v
            })
            .collect()
    }

    /// `i U^dagger d_mu U` by finite differences of the frame, after a
    /// constant phase `U -> U e^{-i gamma}` (applied to `U` and `dU` alike).
    pub fn connection_with_phase(&self, x: &[f64], gamma: f64) -> Result<Vec<f64>> {
        let phase = c(0.0, -gamma).exp();
        let frame = |y: &[f64]| -> ComplexMatrix {
            self.frame(y)
                .map(FrameMatrix::into_inner)
                .unwrap_or_else(|_| ComplexMatrix::from_element(self.dim(), 1, c(f64::NAN, 0.0)))
        };
        let u = frame(x).map(|z| z * phase);
        let out: Vec<f64> = (0..self.dim())
            .map(|mu| {
                let du: ComplexMatrix = partial_derivative(frame, x, mu, DEFAULT_RELATIVE_STEP);
                -(u.adjoint() * du.map(|z| z * phase))[(0, 0)].im
            })
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::PoisonedEvaluation { location: x.to_vec() });
        }
        Ok(out)
    }

    pub fn connection(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.connection_with_phase(x, 0.0)
    }
}

/// Uniform grid `{"min": [...], "max": [...], "points": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub points: Vec<usize>,
}

impl Grid {
    pub fn new(min: Vec<f64>, max: Vec<f64>, points: Vec<usize>) -> Result<Self> {
        let g = Grid { min, max, points };
        g.validate()?;
        Ok(g)
    }

    /// `[-L, L]^d` with `k` points per axis.
    pub fn cube(dim: usize, half_width: f64, k: usize) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim], vec![k; dim])
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.min.len();
        if d == 0 || self.max.len() != d || self.points.len() != d {
            return Err(Error::InvalidGrid("min, max and points must have equal, non-zero length".into()));
        }
        for mu in 0..d {
            if !(self.max[mu] > self.min[mu]) {
                return Err(Error::InvalidGrid(format!("axis {mu}: max must exceed min")));
            }
            if self.points[mu] < 3 {
                return Err(Error::InvalidGrid(format!("axis {mu}: need at least 3 points")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, mu: usize) -> f64 {
        (self.max[mu] - self.min[mu]) / (self.points[mu] - 1) as f64
    }

    pub fn coord(&self, mu: usize, k: usize) -> f64 {
        self.min[mu] + k as f64 * self.spacing(mu)
    }

    /// Row-major stride; axis 0 varies slowest.
    pub fn stride(&self, mu: usize) -> usize {
        self.points[mu + 1..].iter().product()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for mu in (0..self.dim()).rev() {
            idx[mu] = flat % self.points[mu];
            flat /= self.points[mu];
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(mu, &k)| self.coord(mu, k))
            .collect()
    }

    /// Every other point; all counts must be odd.
    pub fn coarsen(&self) -> Result<Grid> {
        if self.points.iter().any(|k| k % 2 == 0 || *k < 5) {
            return Err(Error::InvalidGrid("coarsening needs odd point counts >= 5".into()));
        }
        Grid::new(self.min.clone(), self.max.clone(), self.points.iter().map(|k| k.div_ceil(2)).collect())
    }

    /// Outside the inner box of [`INNER_FRACTION`].
    pub fn in_margin(&self, x: &[f64]) -> bool {
        (0..self.dim()).any(|mu| {
            let centre = 0.5 * (self.min[mu] + self.max[mu]);
            let half = 0.5 * (self.max[mu] - self.min[mu]);
            (x[mu] - centre).abs() > INNER_FRACTION * half
        })
    }
}

fn nest<T: Clone + Into<Value>>(values: &[T], dims: &[usize]) -> Value {
    if dims.len() == 1 {
        return Value::Array(values.iter().cloned().map(Into::into).collect());
    }
    let chunk = values.len() / dims[0];
    Value::Array(values.chunks(chunk).map(|c| nest(c, &dims[1..])).collect())
}

fn flatten(v: &Value, dims: &[usize], leaf: &mut dyn FnMut(&Value) -> Result<()>) -> Result<()> {
    if dims.is_empty() {
        return leaf(v);
    }
    let arr = v
        .as_array()
        .ok_or_else(|| Error::InvalidGrid("expected a nested array".into()))?;
    if arr.len() != dims[0] {
        return Err(Error::InvalidGrid(format!("expected {} entries, found {}", dims[0], arr.len())));
    }
    for item in arr {
        flatten(item, &dims[1..], leaf)?;
    }
    Ok(())
}

/// A real `d`-component connection sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    /// `components[mu][flat]`.
    pub components: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct GridFile {
    dim: usize,
    grid: Grid,
    components: Vec<Value>,
}

impl Serialize for GridField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GridFile {
            dim: self.grid.dim(),
            grid: self.grid.clone(),
            components: self.components.iter().map(|c| nest(c, &self.grid.points)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GridField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = GridFile::deserialize(d)?;
        GridField::from_file(f).map_err(serde::de::Error::custom)
    }
}

impl GridField {
    fn from_file(f: GridFile) -> Result<Self> {
        f.grid.validate()?;
        if f.grid.dim() != f.dim {
            return Err(Error::DimensionMismatch { expected: f.dim, got: f.grid.dim() });
        }
        if f.components.len() != f.dim {
            return Err(Error::DimensionMismatch { expected: f.dim, got: f.components.len() });
        }
        let mut components = Vec::with_capacity(f.dim);
        for v in &f.components {
            let mut out = Vec::with_capacity(f.grid.len());
            flatten(v, &f.grid.points, &mut |leaf| {
                let x = leaf
                    .as_f64()
                    .ok_or_else(|| Error::InvalidGrid("component entries must be numbers".into()))?;
                out.push(x);
                Ok(())
            })?;
            components.push(out);
        }
        Ok(GridField { grid: f.grid, components })
    }

    /// Samples `field` at every grid point.
    pub fn sample(grid: Grid, field: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        grid.validate()?;
        let d = grid.dim();
        let mut components = vec![Vec::with_capacity(grid.len()); d];
        for flat in 0..grid.len() {
            let a = field(&grid.point(flat));
            if a.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: a.len() });
            }
            for (comp, v) in components.iter_mut().zip(a) {
                comp.push(v);
            }
        }
        Ok(GridField { grid, components })
    }

    /// Rejects fields that do not vanish outside the inner box.
    pub fn check_margin(&self) -> Result<()> {
        let mut worst = 0.0_f64;
        for flat in 0..self.grid.len() {
            if self.grid.in_margin(&self.grid.point(flat)) {
                for comp in &self.components {
                    worst = worst.max(comp[flat].abs());
                }
            }
        }
        if worst > MARGIN_TOL {
            return Err(Error::DecayViolation { max_abs: worst });
        }
        Ok(())
    }

    /// Multilinear interpolation; points outside the grid are clamped.
    pub fn interpolate(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let d = g.dim();
        let mut base = 0;
        let mut frac = vec![0.0; d];
        for mu in 0..d {
            let s = ((x[mu] - g.min[mu]) / g.spacing(mu)).clamp(0.0, (g.points[mu] - 1) as f64);
            let k = (s.floor() as usize).min(g.points[mu] - 2);
            frac[mu] = s - k as f64;
            base += k * g.stride(mu);
        }
        let mut out = vec![0.0; d];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = base;
            for (mu, f) in frac.iter().enumerate() {
                if corner >> mu & 1 == 1 {
                    w *= f;
                    flat += g.stride(mu);
                } else {
                    w *= 1.0 - f;
                }
            }
            if w != 0.0 {
                for (o, comp) in out.iter_mut().zip(&self.components) {
                    *o += w * comp[flat];
                }
            }
        }
        out
    }
}

/// Second-order differences along axis `mu`, one-sided at the faces.
pub fn grid_derivative<T>(values: &[T], grid: &Grid, mu: usize) -> Vec<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let h = grid.spacing(mu);
    let s = grid.stride(mu);
    let k = grid.points[mu];
    (0..values.len())
        .map(|flat| {
            let i = (flat / s) % k;
            if i == 0 {
                (values[flat] * -3.0 + values[flat + s] * 4.0 - values[flat + 2 * s]) * (0.5 / h)
            } else if i == k - 1 {
                (values[flat] * 3.0 - values[flat - s] * 4.0 + values[flat - 2 * s]) * (0.5 / h)
            } else {
                (values[flat + s] - values[flat - s]) * (0.5 / h)
            }
        })
        .collect()
}

/// Angles on a grid: `theta_bar` by the trapezoid rule along the last axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAngles {
    pub grid: Grid,
    pub theta_bar: Vec<f64>,
    /// `theta[i][flat]`, `i < d - 1`.
    pub theta: Vec<Vec<f64>>,
    pub theta_d: Vec<f64>,
}

pub fn abelian_angles_grid(field: &GridField, profiles: &AbelianProfiles) -> Result<GridAngles> {
    let grid = &field.grid;
    let d = grid.dim();
    if profiles.dim() != d {
        return Err(Error::DimensionMismatch { expected: profiles.dim(), got: d });
    }
    field.check_margin()?;
    let ad = &field.components[d - 1];
    let h = grid.spacing(d - 1);
    let k = grid.points[d - 1];
    let mut theta_bar = vec![0.0; grid.len()];
    for line in (0..grid.len()).step_by(k) {
        for j in 1..k {
            theta_bar[line + j] = theta_bar[line + j - 1] + 0.5 * h * (ad[line + j - 1] + ad[line + j]);
        }
    }
    let mut theta = Vec::with_capacity(d - 1);
    for i in 0..d - 1 {
        let grad = grid_derivative(&theta_bar, grid, i);
        let ti: Vec<f64> = (0..grid.len())
            .map(|flat| {
                let xi = grid.coord(i, grid.multi_index(flat)[i]);
                -(field.components[i][flat] - grad[flat]) / profiles.dr2(i, xi)
            })
            .collect();
        if let Some(bad) = ti.iter().find(|v| !v.is_finite()) {
            return Err(Error::DecayViolation { max_abs: *bad });
        }
        theta.push(ti);
    }
    let theta_d = (0..grid.len())
        .map(|flat| {
            let x = grid.point(flat);
            theta_bar[flat] - (0..d - 1).map(|i| profiles.r2(i, x[i]) * theta[i][flat]).sum::<f64>()
        })
        .collect();
    Ok(GridAngles {
        grid: grid.clone(),
        theta_bar,
        theta,
        theta_d,
    })
}

/// A frame field on a grid: `rows[i][flat]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrid {
    pub grid: Grid,
    pub rows: Vec<Vec<C64>>,
}

impl Serialize for FrameGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs = |row: &Vec<C64>| -> Vec<Value> {
            row.iter().map(|z| Value::from(vec![z.re, z.im])).collect()
        };
        GridFile {
            dim: self.grid.dim(),
            grid: self.grid.clone(),
            components: self.rows.iter().map(|r| nest(&pairs(r), &self.grid.points)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FrameGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = GridFile::deserialize(d)?;
        let mut rows = Vec::with_capacity(f.components.len());
        for v in &f.components {
            let mut out = Vec::with_capacity(f.grid.len());
            flatten(v, &f.grid.points, &mut |leaf| {
                match leaf.as_array().map(|a| a.as_slice()) {
                    Some([re, im]) => match (re.as_f64(), im.as_f64()) {
                        (Some(re), Some(im)) => {
                            out.push(c(re, im));
                            Ok(())
                        }
                        _ => Err(Error::InvalidGrid("complex entries must be [re, im]".into())),
                    },
                    _ => Err(Error::InvalidGrid("complex entries must be [re, im]".into())),
                }
            })
            .map_err(serde::de::Error::custom)?;
            rows.push(out);
        }
        Ok(FrameGrid { grid: f.grid, rows })
    }
}

impl FrameGrid {
    pub fn frame(&self, flat: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows.len(), 1, |i, _| self.rows[i][flat])
    }

    /// `i U^dagger d_mu U = -Im(U^dagger d_mu U)` with grid differences.
    pub fn connection(&self) -> Vec<Vec<f64>> {
        let d = self.grid.dim();
        let derivs: Vec<Vec<Vec<C64>>> = self
            .rows
            .iter()
            .map(|row| (0..d).map(|mu| grid_derivative(row, &self.grid, mu)).collect())
            .collect();
        (0..d)
            .map(|mu| {
                (0..self.grid.len())
                    .map(|flat| {
                        let s: C64 = self
                            .rows
                            .iter()
                            .zip(&derivs)
                            .map(|(row, dr)| row[flat].conj() * dr[mu][flat])
                            .sum();
                        -s.im
                    })
                    .collect()
            })
            .collect()
    }

    /// `max |U^dagger U - 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        (0..self.grid.len())
            .map(|flat| (self.rows.iter().map(|r| r[flat].norm_sqr()).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn abelian_frame_grid(profiles: &AbelianProfiles, angles: &GridAngles) -> Result<FrameGrid> {
    let grid = &angles.grid;
    let d = grid.dim();
    let mut rows = vec![Vec::with_capacity(grid.len()); d];
    for flat in 0..grid.len() {
        let x = grid.point(flat);
        let theta: Vec<f64> = angles.theta.iter().map(|t| t[flat]).collect();
        let u = abelian_frame_at(profiles, &x, &theta, angles.theta_d[flat])?;
        for (i, row) in rows.iter_mut().enumerate() {
            row.push(u[(i, 0)]);
        }
    }
    Ok(FrameGrid { grid: grid.clone(), rows })
}

/// Frame and `max |i U^dagger dU - A|` over the grid.
pub fn reconstruct_grid(field: &GridField, profiles: &AbelianProfiles) -> Result<(FrameGrid, f64)> {
    let angles = abelian_angles_grid(field, profiles)?;
    let frame = abelian_frame_grid(profiles, &angles)?;
    let a = frame.connection();
    let err = a
        .iter()
        .zip(&field.components)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    Ok((frame, err))
}

/// Reconstruction errors at spacing `h` and `2h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub error_fine: f64,
    pub error_coarse: f64,
    /// `log2(error_coarse / error_fine)`.
    pub order: f64,
}

/// Compares the reconstruction on the grid with the one on every other point.
pub fn reconstruction_order(field: &GridField, profiles: &AbelianProfiles) -> Result<OrderEstimate> {
    let coarse_grid = field.grid.coarsen()?;
    let d = field.grid.dim();
    let components = (0..d)
        .map(|mu| {
            (0..coarse_grid.len())
                .map(|flat| {
                    let idx = coarse_grid.multi_index(flat);
                    let fine: usize = idx.iter().enumerate().map(|(nu, k)| 2 * k * field.grid.stride(nu)).sum();
                    field.components[mu][fine]
                })
                .collect()
        })
        .collect();
    let coarse = GridField {
        grid: coarse_grid,
        components,
    };
    let (_, error_fine) = reconstruct_grid(field, profiles)?;
    let (_, error_coarse) = reconstruct_grid(&coarse, profiles)?;
    Ok(OrderEstimate {
        error_fine,
        error_coarse,
        order: (error_coarse / error_fine).log2(),
    })
}

/// Bundled sample connections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    /// Products of C-infinity bumps.
    Bump,
    /// Products of `(1 - u^2)^4`.
    Polynomial,
}

/// Default peak size of the sample connections. Larger fields give steeper
/// angles and need finer grids before differencing reaches its asymptotic order.
pub const SAMPLE_AMPLITUDE: f64 = 0.1;

/// A non-exact connection supported in `[-0.7 L, 0.7 L]^d`.
pub fn sample_connection(dim: usize, kind: SampleKind, half_width: f64) -> impl Fn(&[f64]) -> Vec<f64> {
    SampleSpec {
        dim,
        kind,
        half_width,
        amplitude: SAMPLE_AMPLITUDE,
        last_component: true,
        points: 3,
    }
    .field()
}

/// Parameters of a generated sample connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub dim: usize,
    pub kind: SampleKind,
    #[serde(rename = "L")]
    pub half_width: f64,
    pub amplitude: f64,
    /// When false, `A_d = 0` and `theta_bar` vanishes.
    pub last_component: bool,
    /// Grid points per axis.
    pub points: usize,
}

impl SampleSpec {
    /// The shipped samples: `d = 2` on `129^2` with every component set,
    /// `d = 3` on `33^3` with `A_3 = 0`.
    pub fn bundled(dim: usize) -> Result<Self> {
        match dim {
            2 => Ok(SampleSpec {
                dim,
                kind: SampleKind::Polynomial,
                half_width: 2.0,
                amplitude: SAMPLE_AMPLITUDE,
                last_component: true,
                points: 129,
            }),
            3 => Ok(SampleSpec {
                dim,
                kind: SampleKind::Polynomial,
                half_width: 2.0,
                amplitude: 0.5 * SAMPLE_AMPLITUDE,
                last_component: false,
                points: 33,
            }),
            _ => Err(Error::InvalidGrid(format!("no bundled sample for d = {dim}"))),
        }
    }

    pub fn field(&self) -> impl Fn(&[f64]) -> Vec<f64> {
        let SampleSpec {
            dim,
            kind,
            half_width,
            amplitude,
            last_component,
            ..
        } = self.clone();
        let w = 0.7 * half_width;
        move |x: &[f64]| {
            let profile = |u: f64| match kind {
                SampleKind::Bump => bump(u),
                SampleKind::Polynomial => {
                    if u.abs() < 1.0 {
                        (1.0 - u * u).powi(4)
                    } else {
                        0.0
                    }
                }
            };
            let b: f64 = x.iter().map(|&v| profile(v / w)).product();
            (0..dim)
                .map(|mu| {
                    if mu == dim - 1 && !last_component {
                        0.0
                    } else {
                        amplitude * (mu + 1) as f64 / dim as f64 * (1.0 + 0.5 * x[(mu + 1) % dim] / w) * b
                    }
                })
                .collect()
        }
    }

    pub fn sample(&self) -> Result<GridField> {
        if self.dim < 2 {
            return Err(Error::InvalidGrid("samples need d >= 2".into()));
        }
        GridField::sample(Grid::cube(self.dim, self.half_width, self.points)?, self.field())
    }
}
