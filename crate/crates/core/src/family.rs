//! Parameterised families `(t, x) -> U(t, x)` of universal matrices and the
//! finite-difference jets every metric is assembled from.

use crate::algebra::{c, ComplexMatrix};
use crate::calculus::{richardson_combine, Placement, DEFAULT_RELATIVE_STEP, RICHARDSON_STENCIL};
use crate::error::Result;

/// A family of frames over a moduli chart.
///
/// Moduli derivatives and spatial derivatives both go through the same
/// Richardson-extrapolated central differences; the step sizes are the
/// family's natural length scales times [`DEFAULT_RELATIVE_STEP`].
pub trait ModuliFamily: Sync {
    /// Names of the moduli, in the order of the parameter vector `t`.
    fn labels(&self) -> Vec<String>;

    /// Dimension `d` of the base `R^d`.
    fn base_dim(&self) -> usize;

    /// `(m, n)`.
    fn frame_shape(&self) -> (usize, usize);

    /// The raw frame. Callers that need a checked frame wrap it in
    /// [`FrameMatrix`](crate::algebra::FrameMatrix).
    fn frame(&self, t: &[f64], x: &[f64]) -> ComplexMatrix;

    /// Rejects parameter vectors outside the family's domain.
    fn validate(&self, _t: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Where the integrand is concentrated, and its width.
    fn placement(&self, _t: &[f64]) -> Placement {
        Placement::origin(self.base_dim())
    }

    /// Step for spatial derivatives at `x`.
    fn spatial_step(&self, _t: &[f64], _x: &[f64]) -> f64 {
        DEFAULT_RELATIVE_STEP
    }

    /// Step for the derivative along modulus `i` at `x`.
    fn moduli_step(&self, _t: &[f64], _x: &[f64], _i: usize) -> f64 {
        DEFAULT_RELATIVE_STEP
    }
}

/// A frame together with derivatives of `U` and `P = U U^dagger` along a set
/// of directions.
#[derive(Debug, Clone)]
pub struct Jet {
    pub u: ComplexMatrix,
    pub du: Vec<ComplexMatrix>,
    pub dp: Vec<ComplexMatrix>,
}

impl Jet {
    /// `U^dagger dU` along each direction (anti-Hermitian).
    pub fn omega(&self) -> Vec<ComplexMatrix> {
        let ud = self.u.adjoint();
        self.du.iter().map(|d| &ud * d).collect()
    }

    /// Hermitian connection components `i U^dagger dU`.
    pub fn hermitian_connection(&self) -> Vec<ComplexMatrix> {
        self.omega()
            .into_iter()
            .map(|w| w.map(|z| z * c(0.0, 1.0)))
            .collect()
    }
}

fn directional(
    sample: impl Fn(f64) -> ComplexMatrix,
    h: f64,
) -> (ComplexMatrix, ComplexMatrix) {
    let us = RICHARDSON_STENCIL.map(|(o, _)| sample(o * h));
    let ps = us.clone().map(|u| &u * u.adjoint());
    (richardson_combine(&us, h), richardson_combine(&ps, h))
}

/// Derivatives along the moduli listed in `directions`.
pub fn moduli_jet<F: ModuliFamily + ?Sized>(family: &F, t: &[f64], x: &[f64], directions: &[usize]) -> Jet {
    let u = family.frame(t, x);
    let mut du = Vec::with_capacity(directions.len());
    let mut dp = Vec::with_capacity(directions.len());
    for &i in directions {
        let h = family.moduli_step(t, x, i);
        let (a, b) = directional(
            |s| {
                let mut tt = t.to_vec();
                tt[i] += s;
                family.frame(&tt, x)
            },
            h,
        );
        du.push(a);
        dp.push(b);
    }
    Jet { u, du, dp }
}

/// Derivatives along every spatial axis.
pub fn spatial_jet<F: ModuliFamily + ?Sized>(family: &F, t: &[f64], x: &[f64]) -> Jet {
    let u = family.frame(t, x);
    let h = family.spatial_step(t, x);
    let mut du = Vec::with_capacity(x.len());
    let mut dp = Vec::with_capacity(x.len());
    for mu in 0..x.len() {
        let (a, b) = directional(
            |s| {
                let mut xx = x.to_vec();
                xx[mu] += s;
                family.frame(t, &xx)
            },
            h,
        );
        du.push(a);
        dp.push(b);
    }
    Jet { u, du, dp }
}

/// Hermitian connection `A_mu = i U^dagger d_mu U` of the frame at `(t, x)`.
pub fn connection<F: ModuliFamily + ?Sized>(family: &F, t: &[f64], x: &[f64]) -> Vec<ComplexMatrix> {
    spatial_jet(family, t, x).hermitian_connection()
}

/// `M = (U; U; ...; U)/sqrt(N)`: same connection, same projector traces.
pub struct StackedFamily<F> {
    pub inner: F,
    pub copies: usize,
}

impl<F: ModuliFamily> ModuliFamily for StackedFamily<F> {
    fn labels(&self) -> Vec<String> {
        self.inner.labels()
    }
    fn base_dim(&self) -> usize {
        self.inner.base_dim()
    }
    fn frame_shape(&self) -> (usize, usize) {
        let (m, n) = self.inner.frame_shape();
        (m * self.copies, n)
    }
    fn frame(&self, t: &[f64], x: &[f64]) -> ComplexMatrix {
        crate::algebra::stack_frame(&self.inner.frame(t, x), self.copies)
    }
    fn validate(&self, t: &[f64]) -> Result<()> {
        self.inner.validate(t)
    }
    fn placement(&self, t: &[f64]) -> Placement {
        self.inner.placement(t)
    }
    fn spatial_step(&self, t: &[f64], x: &[f64]) -> f64 {
        self.inner.spatial_step(t, x)
    }
    fn moduli_step(&self, t: &[f64], x: &[f64], i: usize) -> f64 {
        self.inner.moduli_step(t, x, i)
    }
}

/// `U(t, x) = U_0(x) g(t, x)`: a pure gauge orbit of a fixed frame.
pub struct GaugeOrbitFamily<B, G> {
    pub base: B,
    pub gauge: G,
    pub labels: Vec<String>,
    pub dim: usize,
    pub shape: (usize, usize),
    pub placement: Placement,
}

impl<B, G> ModuliFamily for GaugeOrbitFamily<B, G>
where
    B: Fn(&[f64]) -> ComplexMatrix + Sync,
    G: Fn(&[f64], &[f64]) -> ComplexMatrix + Sync,
{
    fn labels(&self) -> Vec<String> {
        self.labels.clone()
    }
    fn base_dim(&self) -> usize {
        self.dim
    }
    fn frame_shape(&self) -> (usize, usize) {
        self.shape
    }
    fn frame(&self, t: &[f64], x: &[f64]) -> ComplexMatrix {
        (self.base)(x) * (self.gauge)(t, x)
    }
    fn placement(&self, _t: &[f64]) -> Placement {
        self.placement.clone()
    }
}

/// A frame field with no moduli dependence at all.
pub struct ConstantFamily {
    pub frame: ComplexMatrix,
    pub moduli: usize,
    pub dim: usize,
}

impl ModuliFamily for ConstantFamily {
    fn labels(&self) -> Vec<String> {
        (0..self.moduli).map(|i| format!("t{}", i + 1)).collect()
    }
    fn base_dim(&self) -> usize {
        self.dim
    }
    fn frame_shape(&self) -> (usize, usize) {
        self.frame.shape()
    }
    fn frame(&self, _t: &[f64], _x: &[f64]) -> ComplexMatrix {
        self.frame.clone()
    }
}
