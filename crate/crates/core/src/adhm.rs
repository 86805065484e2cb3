//! The charge-one SU(2) instanton on R^4: the 4x2 ADHM frame, the 't Hooft
//! form of its connection and the closed-form projector traces.
//!
//! Moduli are ordered `t = (a1, a2, a3, a4, rho)`. Closed forms are written
//! in terms of `y = x - a` and `s = |y|^2 + rho^2`.

use std::f64::consts::PI;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::algebra::{c, pauli, pauli_and_sigma, su2_exp, ComplexMatrix, EtaSymbol, FrameMatrix, C64};
use crate::calculus::{partial_derivative, Placement, DEFAULT_RELATIVE_STEP};
use crate::error::{Error, Result};
use crate::family::ModuliFamily;

/// Smallest admissible instanton scale.
pub const RHO_MIN: f64 = 1e-3;

/// Relation between the frame and the 't Hooft potential:
/// `A_mu = CONNECTION_SIGN * i U^dagger d_mu U` with [`EtaSymbol::self_dual`].
/// Fixed by the frame/connection cross-check in the tests.
pub const CONNECTION_SIGN: f64 = 1.0;

pub const ADHM_LABELS: [&str; 5] = ["a1", "a2", "a3", "a4", "rho"];

/// Centre `a` and scale `rho` of the instanton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliPoint {
    pub centre: [f64; 4],
    pub rho: f64,
}

impl ModuliPoint {
    pub fn new(centre: [f64; 4], rho: f64) -> Result<Self> {
        let p = ModuliPoint { centre, rho };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        if !(self.rho >= RHO_MIN) {
            return Err(Error::ScaleBelowMinimum {
                rho: self.rho,
                min: RHO_MIN,
            });
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let a = self.centre;
        vec![a[0], a[1], a[2], a[3], self.rho]
    }

    pub fn from_slice(t: &[f64]) -> Result<Self> {
        if t.len() < 5 {
            return Err(Error::DimensionMismatch { expected: 5, got: t.len() });
        }
        Self::new([t[0], t[1], t[2], t[3]], t[4])
    }
}

#[inline]
fn offset(x: &[f64], a: &[f64]) -> ([f64; 4], f64) {
    let y = [x[0] - a[0], x[1] - a[1], x[2] - a[2], x[3] - a[3]];
    let r2 = y.iter().map(|v| v * v).sum();
    (y, r2)
}

/// `y^mu sigma_bar_mu = y4 I - i y_a tau_a`, written out.
#[inline]
fn quaternion(y: &[f64; 4]) -> [[C64; 2]; 2] {
    [
        [c(y[3], -y[2]), c(-y[1], -y[0])],
        [c(y[1], -y[0]), c(y[3], y[2])],
    ]
}

/// Unchecked frame for `t = (a, rho)`, used on hot paths.
pub fn adhm_frame_raw(x: &[f64], t: &[f64]) -> ComplexMatrix {
    let (y, r2) = offset(x, t);
    let rho = t[4];
    let inv = 1.0 / (r2 + rho * rho).sqrt();
    let q = quaternion(&y);
    let mut u = ComplexMatrix::zeros(4, 2);
    for i in 0..2 {
        for j in 0..2 {
            u[(i, j)] = q[i][j] * inv;
        }
        u[(2 + i, i)] = c(-rho * inv, 0.0);
    }
    u
}

/// The ADHM frame: top block `(x-a).sigma_bar / sqrt(s)`, bottom block
/// `-rho I / sqrt(s)`.
pub fn adhm_frame(x: &[f64; 4], t: &ModuliPoint) -> Result<FrameMatrix> {
    t.check()?;
    FrameMatrix::new(adhm_frame_raw(x, &t.to_vec()))
}

/// Closed-form projector `P = U U^dagger`.
pub fn adhm_projector(x: &[f64; 4], t: &ModuliPoint) -> ComplexMatrix {
    let (y, r2) = offset(x, &t.centre);
    let rho = t.rho;
    let s = r2 + rho * rho;
    let q = quaternion(&y);
    let mut p = ComplexMatrix::zeros(4, 4);
    for i in 0..2 {
        p[(i, i)] = c(r2 / s, 0.0);
        p[(2 + i, 2 + i)] = c(rho * rho / s, 0.0);
        for j in 0..2 {
            p[(i, 2 + j)] = q[i][j] * (-rho / s);
            p[(2 + j, i)] = q[i][j].conj() * (-rho / s);
        }
    }
    p
}

/// Analytic derivative of the projector along modulus `k` (`0..4` for `a`,
/// `4` for `rho`).
pub fn adhm_projector_derivative(x: &[f64; 4], t: &ModuliPoint, k: usize) -> ComplexMatrix {
    assert!(k < 5);
    let (y, r2) = offset(x, &t.centre);
    let rho = t.rho;
    let s = r2 + rho * rho;
    let s2 = s * s;
    let q = quaternion(&y);
    let sigma_bar = pauli_and_sigma().sigma_bar;
    let (tl, br, tr): (f64, f64, [[C64; 2]; 2]) = if k == 4 {
        let f = -(r2 - rho * rho) / s2;
        (
            -2.0 * rho * r2 / s2,
            2.0 * rho * r2 / s2,
            [[q[0][0] * f, q[0][1] * f], [q[1][0] * f, q[1][1] * f]],
        )
    } else {
        let ym = y[k];
        let sb = &sigma_bar[k];
        let mut tr = [[c(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                tr[i][j] = sb[(i, j)] * (rho / s) - q[i][j] * (2.0 * rho * ym / s2);
            }
        }
        (-2.0 * ym * rho * rho / s2, 2.0 * rho * rho * ym / s2, tr)
    };
    let mut d = ComplexMatrix::zeros(4, 4);
    for i in 0..2 {
        d[(i, i)] = c(tl, 0.0);
        d[(2 + i, 2 + i)] = c(br, 0.0);
        for j in 0..2 {
            d[(i, 2 + j)] = tr[i][j];
            d[(2 + j, i)] = tr[i][j].conj();
        }
    }
    d
}

/// Analytic spatial derivative `d P / d x^mu = -d P / d a^mu`.
pub fn adhm_projector_spatial_derivative(x: &[f64; 4], t: &ModuliPoint, mu: usize) -> ComplexMatrix {
    -adhm_projector_derivative(x, t, mu)
}

/// 't Hooft potential `A_mu = eta^a_{mu nu} (x-a)_nu tau_a / s`.
pub fn thooft_connection(x: &[f64; 4], t: &ModuliPoint) -> Result<[ComplexMatrix; 4]> {
    thooft_connection_with(&EtaSymbol::self_dual(), x, t)
}

/// 't Hooft potential with an explicit symbol table.
pub fn thooft_connection_with(eta: &EtaSymbol, x: &[f64; 4], t: &ModuliPoint) -> Result<[ComplexMatrix; 4]> {
    t.check()?;
    let (y, r2) = offset(x, &t.centre);
    let s = r2 + t.rho * t.rho;
    let tau = pauli();
    Ok(std::array::from_fn(|mu| {
        let mut a = ComplexMatrix::zeros(2, 2);
        for (col, tau_a) in tau.iter().enumerate() {
            let coeff: f64 = (0..4).map(|nu| eta.get(col, mu, nu) as f64 * y[nu]).sum::<f64>() / s;
            if coeff != 0.0 {
                a += tau_a.map(|z| z * coeff);
            }
        }
        a
    }))
}

/// Closed-form `T_ij = Tr(d_i P d_j P)` in the moduli `(a1..a4, rho)`.
pub fn adhm_traces(x: &[f64; 4], t: &ModuliPoint) -> Result<SMatrix<f64, 5, 5>> {
    t.check()?;
    let (y, r2) = offset(x, &t.centre);
    let rho = t.rho;
    let s = r2 + rho * rho;
    let s2 = s * s;
    let mut out = SMatrix::<f64, 5, 5>::zeros();
    for mu in 0..4 {
        out[(mu, mu)] = 4.0 * rho * rho / s2;
        out[(4, mu)] = 4.0 * rho * y[mu] / s2;
        out[(mu, 4)] = out[(4, mu)];
    }
    out[(4, 4)] = 4.0 * r2 / s2;
    Ok(out)
}

/// `Phi(U) = 16 rho^2 / s^2`.
pub fn phi_adhm(x: &[f64; 4], t: &ModuliPoint) -> Result<f64> {
    t.check()?;
    let (_, r2) = offset(x, &t.centre);
    let s = r2 + t.rho * t.rho;
    Ok(16.0 * t.rho * t.rho / (s * s))
}

/// Coefficient of `da^2` in the damped metric at `rho = 1`:
/// `4^{2a+1} pi^2 (2a-1) Gamma(2a-1) / Gamma(2(a+1))`.
pub fn closed_form_a(alpha: f64) -> Result<f64> {
    convergent(alpha)?;
    Ok(4f64.powf(2.0 * alpha + 1.0) * PI * PI * (2.0 * alpha - 1.0) * gamma(2.0 * alpha - 1.0)
        / gamma(2.0 * (alpha + 1.0)))
}

/// Ratio `g_rhorho / g_aa = 2/(2 alpha - 1)`.
pub fn closed_form_b(alpha: f64) -> Result<f64> {
    convergent(alpha)?;
    Ok(2.0 / (2.0 * alpha - 1.0))
}

fn convergent(alpha: f64) -> Result<()> {
    if alpha > 0.5 {
        Ok(())
    } else {
        Err(Error::Divergence(format!(
            "the damped ADHM metric requires alpha > 1/2, got alpha = {alpha}"
        )))
    }
}

/// Field strength `F_{mu nu} = d_mu A_nu - d_nu A_mu - i [A_mu, A_nu]` of the
/// 't Hooft potential, by finite differences.
pub fn thooft_curvature(eta: &EtaSymbol, x: &[f64; 4], t: &ModuliPoint, h: f64) -> Result<[[ComplexMatrix; 4]; 4]> {
    let a = thooft_connection_with(eta, x, t)?;
    let potential = |p: &[f64]| -> Vec<ComplexMatrix> {
        let p = [p[0], p[1], p[2], p[3]];
        thooft_connection_with(eta, &p, t).expect("scale checked above").to_vec()
    };
    let da: Vec<Vec<ComplexMatrix>> = (0..4).map(|mu| partial_derivative(potential, x, mu, h)).collect();
    let i = c(0.0, 1.0);
    Ok(std::array::from_fn(|mu| {
        std::array::from_fn(|nu| {
            let comm = &a[mu] * &a[nu] - &a[nu] * &a[mu];
            &da[mu][nu] - &da[nu][mu] - comm.map(|z| z * i)
        })
    }))
}

/// `max |F - *F|` at `x`.
pub fn self_duality_defect(eta: &EtaSymbol, x: &[f64; 4], t: &ModuliPoint) -> Result<f64> {
    let f = thooft_curvature(eta, x, t, DEFAULT_RELATIVE_STEP * t.rho)?;
    let mut worst = 0.0_f64;
    for mu in 0..4 {
        for nu in 0..4 {
            let mut dual = ComplexMatrix::zeros(2, 2);
            for r in 0..4 {
                for s in 0..4 {
                    let e = crate::algebra::levi_civita4(mu, nu, r, s);
                    if e != 0 {
                        dual += f[r][s].map(|z| z * (0.5 * e as f64));
                    }
                }
            }
            worst = worst.max(crate::algebra::max_abs_diff(&f[mu][nu], &dual));
        }
    }
    Ok(worst)
}

/// The ADHM family over the moduli `(a1..a4, rho)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdhmFamily;

fn adhm_length_scale(x: &[f64], t: &[f64]) -> f64 {
    let (_, r2) = offset(x, t);
    (r2 + t[4] * t[4]).sqrt()
}

impl ModuliFamily for AdhmFamily {
    fn labels(&self) -> Vec<String> {
        ADHM_LABELS.iter().map(|s| s.to_string()).collect()
    }
    fn base_dim(&self) -> usize {
        4
    }
    fn frame_shape(&self) -> (usize, usize) {
        (4, 2)
    }
    fn frame(&self, t: &[f64], x: &[f64]) -> ComplexMatrix {
        adhm_frame_raw(x, t)
    }
    fn validate(&self, t: &[f64]) -> Result<()> {
        ModuliPoint::from_slice(t).map(|_| ())
    }
    fn placement(&self, t: &[f64]) -> Placement {
        Placement {
            centre: t[..4].to_vec(),
            scale: t[4],
        }
    }
    fn spatial_step(&self, t: &[f64], x: &[f64]) -> f64 {
        DEFAULT_RELATIVE_STEP * adhm_length_scale(x, t)
    }
    fn moduli_step(&self, t: &[f64], x: &[f64], _i: usize) -> f64 {
        DEFAULT_RELATIVE_STEP * adhm_length_scale(x, t)
    }
}

pub const RIGID_LABELS: [&str; 8] = ["a1", "a2", "a3", "a4", "rho", "s1", "s2", "s3"];

/// ADHM frame acted on by a rigid SU(2) rotation: `U = U_adhm(a, rho) exp(i s.tau/2)`,
/// moduli `(a1..a4, rho, s1, s2, s3)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RigidGaugeFamily;

impl ModuliFamily for RigidGaugeFamily {
    fn labels(&self) -> Vec<String> {
        RIGID_LABELS.iter().map(|s| s.to_string()).collect()
    }
    fn base_dim(&self) -> usize {
        4
    }
    fn frame_shape(&self) -> (usize, usize) {
        (4, 2)
    }
    fn frame(&self, t: &[f64], x: &[f64]) -> ComplexMatrix {
        adhm_frame_raw(x, t) * su2_exp([t[5], t[6], t[7]])
    }
    fn validate(&self, t: &[f64]) -> Result<()> {
        if t.len() != 8 {
            return Err(Error::DimensionMismatch { expected: 8, got: t.len() });
        }
        ModuliPoint::from_slice(t).map(|_| ())
    }
    fn placement(&self, t: &[f64]) -> Placement {
        AdhmFamily.placement(t)
    }
    fn spatial_step(&self, t: &[f64], x: &[f64]) -> f64 {
        DEFAULT_RELATIVE_STEP * adhm_length_scale(x, t)
    }
    fn moduli_step(&self, t: &[f64], x: &[f64], i: usize) -> f64 {
        if i >= 5 {
            DEFAULT_RELATIVE_STEP
        } else {
            DEFAULT_RELATIVE_STEP * adhm_length_scale(x, t)
        }
    }
}
