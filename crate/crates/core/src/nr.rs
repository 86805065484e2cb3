//! Narasimhan-Ramanan universal matrices.
//!
//! A connection `A = sum_{r,mu} lambda_{r,mu} f_r dx_mu` (Hermitian convention,
//! `f_r` a positive Hermitian basis with roots `g_r`) is pulled back from a
//! frame built out of `n x n` blocks
//!
//! ```text
//! p_{r,mu} e^{-i N x_mu} g_r,   q_{r,mu} e^{+i N x_mu} g_r,   h_r
//! ```
//!
//! with `N (p^2 - q^2) = lambda`, `q^2 = k` constant and
//! `h_r^2 = I/n^2 - sum_mu (p^2 + q^2) f_r`. Then `U^dagger U = I` and
//! `i U^dagger dU = A`. Because the shifts `k` and the phase scale `N` are
//! fixed over moduli, `U^dagger d_t U = 0` along any family.

use serde::{Deserialize, Serialize};

use crate::adhm::{thooft_connection, ModuliPoint, ADHM_LABELS, RHO_MIN};
use crate::algebra::{c, hermitian_sqrt, identity, max_abs, max_abs_diff, ComplexMatrix, FrameMatrix, HermitianBasis};
use crate::calculus::{partial_derivative, richardson_combine, Placement, DEFAULT_RELATIVE_STEP, RICHARDSON_STENCIL};
use crate::error::{Error, Result};
use crate::family::{moduli_jet, ModuliFamily};

/// Coefficients `lambda[r][mu]`.
pub type Lambda = Vec<Vec<f64>>;

/// Tolerance on `sum lambda f - A`.
pub const DECOMPOSITION_TOL: f64 = 1e-12;

/// Sampled sups are inflated by this factor before fitting `N`.
pub const FIT_MARGIN: f64 = 1.25;

/// Largest phase scale tried by [`NrSpec::fit`].
const MAX_PHASE_EXPONENT: i32 = 40;

/// `lambda_{r,mu}` with `sum_r lambda_{r,mu} f_r = A_mu` for a Hermitian `A_mu`.
pub fn lambda_at(a: &[ComplexMatrix], basis: &HermitianBasis) -> Result<Lambda> {
    let mut out = vec![vec![0.0; a.len()]; basis.len()];
    for (mu, a_mu) in a.iter().enumerate() {
        let coeffs = basis.decompose(a_mu)?;
        let residual = max_abs_diff(&basis.recompose(&coeffs), a_mu);
        if residual > DECOMPOSITION_TOL * (1.0 + max_abs(a_mu)) {
            return Err(Error::DecompositionResidual { residual });
        }
        for (r, l) in coeffs.into_iter().enumerate() {
            out[r][mu] = l;
        }
    }
    Ok(out)
}

/// `x -> lambda(x)` for a Hermitian connection field.
pub fn lambda_field<'a, A>(a: A, basis: &'a HermitianBasis) -> impl Fn(&[f64]) -> Result<Lambda> + 'a
where
    A: Fn(&[f64]) -> Vec<ComplexMatrix> + 'a,
{
    move |x| lambda_at(&a(x), basis)
}

/// Shifts, phase scale and chart of an NR construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "NrSpecFile", into = "NrSpecFile")]
pub struct NrSpec {
    basis: HermitianBasis,
    dim: usize,
    half_width: f64,
    phase_scale: f64,
    shifts: Lambda,
}

#[derive(Serialize, Deserialize)]
struct NrSpecFile {
    n: usize,
    basis: String,
    dim: usize,
    #[serde(rename = "L")]
    half_width: f64,
    #[serde(rename = "N")]
    phase_scale: f64,
    shifts: Lambda,
}

impl TryFrom<NrSpecFile> for NrSpec {
    type Error = Error;
    fn try_from(f: NrSpecFile) -> Result<Self> {
        if f.basis != "shifted-gell-mann" {
            return Err(Error::InvalidBasis(format!("unknown basis {:?}", f.basis)));
        }
        NrSpec::new(HermitianBasis::shifted_gell_mann(f.n)?, f.dim, f.half_width, f.phase_scale, f.shifts)
    }
}

impl From<NrSpec> for NrSpecFile {
    fn from(s: NrSpec) -> Self {
        NrSpecFile {
            n: s.basis.n(),
            basis: "shifted-gell-mann".into(),
            dim: s.dim,
            half_width: s.half_width,
            phase_scale: s.phase_scale,
            shifts: s.shifts,
        }
    }
}

impl NrSpec {
    pub fn new(basis: HermitianBasis, dim: usize, half_width: f64, phase_scale: f64, shifts: Lambda) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidQuadrature(format!("chart half-width must be > 0, got {half_width}")));
        }
        if !(phase_scale > 0.0) || !phase_scale.is_finite() {
            return Err(Error::InvalidQuadrature(format!("phase scale must be > 0, got {phase_scale}")));
        }
        if shifts.len() != basis.len() || shifts.iter().any(|row| row.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: basis.len() * dim,
                got: shifts.iter().map(Vec::len).sum(),
            });
        }
        if shifts.iter().flatten().any(|&k| !(k > 0.0)) {
            return Err(Error::InvalidQuadrature("NR shifts must be strictly positive".into()));
        }
        Ok(NrSpec {
            basis,
            dim,
            half_width,
            phase_scale,
            shifts,
        })
    }

    /// `epsilon = 1/(16 d n^4)`.
    pub fn epsilon(n: usize, dim: usize) -> f64 {
        1.0 / (16.0 * dim as f64 * (n as f64).powi(4))
    }

    /// `1/(2 n^2)`.
    pub fn limit(&self) -> f64 {
        positivity_limit(self.basis.n())
    }

    /// Smallest power-of-two `N` with shifts `k = max(0, sup(-lambda)/N) + epsilon`
    /// meeting the positivity bound for every sample.
    pub fn fit(basis: HermitianBasis, dim: usize, half_width: f64, samples: &[Lambda]) -> Result<Self> {
        let (sup_abs, sup_neg) = sups(basis.len(), dim, samples)?;
        let (phase_scale, shifts) = fit_constants(basis.n(), dim, &sup_abs, &sup_neg)?;
        Self::new(basis, dim, half_width, phase_scale, shifts)
    }

    /// [`fit`](Self::fit) on a uniform grid of `points_per_axis^d` points of the chart.
    pub fn fit_on_chart<L>(basis: HermitianBasis, dim: usize, half_width: f64, points_per_axis: usize, lambda: L) -> Result<Self>
    where
        L: Fn(&[f64]) -> Result<Lambda>,
    {
        let samples = chart_grid(dim, half_width, points_per_axis)
            .iter()
            .map(|x| lambda(x))
            .collect::<Result<Vec<_>>>()?;
        Self::fit(basis, dim, half_width, &samples)
    }

    pub fn basis(&self) -> &HermitianBasis {
        &self.basis
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn phase_scale(&self) -> f64 {
        self.phase_scale
    }
    pub fn shifts(&self) -> &Lambda {
        &self.shifts
    }

    /// `sum_{r,mu} (|lambda|/N + 2k)`.
    pub fn bound(&self, lambda: &Lambda) -> f64 {
        let mut total = 0.0;
        for (row, krow) in lambda.iter().zip(&self.shifts) {
            for (l, k) in row.iter().zip(krow) {
                total += l.abs() / self.phase_scale + 2.0 * k;
            }
        }
        total
    }

    /// Pointwise positivity check for `lambda`.
    pub fn check(&self, lambda: &Lambda) -> Result<()> {
        if lambda.len() != self.basis.len() || lambda.iter().any(|r| r.len() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.basis.len() * self.dim,
                got: lambda.iter().map(Vec::len).sum(),
            });
        }
        let bound = self.bound(lambda);
        let p_ok = lambda
            .iter()
            .zip(&self.shifts)
            .all(|(row, krow)| row.iter().zip(krow).all(|(l, k)| l / self.phase_scale + k > 0.0));
        if bound < self.limit() && p_ok {
            return Ok(());
        }
        let (sup_abs, sup_neg) = sups(self.basis.len(), self.dim, std::slice::from_ref(lambda))?;
        let suggested = fit_constants(self.basis.n(), self.dim, &sup_abs, &sup_neg)
            .map(|(n, _)| n.max(2.0 * self.phase_scale))
            .unwrap_or(f64::INFINITY);
        Err(Error::NrPositivity {
            bound,
            limit: self.limit(),
            suggested,
        })
    }
}

fn positivity_limit(n: usize) -> f64 {
    0.5 / (n * n) as f64
}

fn sups(len: usize, dim: usize, samples: &[Lambda]) -> Result<(Lambda, Lambda)> {
    let mut sup_abs = vec![vec![0.0_f64; dim]; len];
    let mut sup_neg = vec![vec![0.0_f64; dim]; len];
    for s in samples {
        if s.len() != len || s.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: len * dim,
                got: s.iter().map(Vec::len).sum(),
            });
        }
        for r in 0..len {
            for mu in 0..dim {
                let l = s[r][mu];
                if !l.is_finite() {
                    return Err(Error::PoisonedEvaluation { location: vec![] });
                }
                sup_abs[r][mu] = sup_abs[r][mu].max(l.abs());
                sup_neg[r][mu] = sup_neg[r][mu].max(-l);
            }
        }
    }
    Ok((sup_abs, sup_neg))
}

fn fit_constants(n: usize, dim: usize, sup_abs: &Lambda, sup_neg: &Lambda) -> Result<(f64, Lambda)> {
    let eps = NrSpec::epsilon(n, dim);
    let limit = positivity_limit(n);
    let mut last = 0.0;
    for e in 0..=MAX_PHASE_EXPONENT {
        let big_n = 2f64.powi(e);
        let shifts: Lambda = sup_neg
            .iter()
            .map(|row| row.iter().map(|s| FIT_MARGIN * s / big_n + eps).collect())
            .collect();
        let mut total = 0.0;
        for (arow, krow) in sup_abs.iter().zip(&shifts) {
            for (a, k) in arow.iter().zip(krow) {
                total += FIT_MARGIN * a / big_n + 2.0 * k;
            }
        }
        if total < limit {
            return Ok((big_n, shifts));
        }
        last = total;
    }
    Err(Error::NrPositivity {
        bound: last,
        limit,
        suggested: f64::INFINITY,
    })
}

/// Points of the uniform grid on `[-L, L]^d`.
pub fn chart_grid(dim: usize, half_width: f64, points_per_axis: usize) -> Vec<Vec<f64>> {
    let k = points_per_axis.max(2);
    let axis: Vec<f64> = (0..k).map(|i| -half_width + 2.0 * half_width * i as f64 / (k - 1) as f64).collect();
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// The `(p, q, h)` blocks at one point.
#[derive(Debug, Clone)]
pub struct NrBlocks {
    /// `p[r][mu]`.
    pub p: Lambda,
    /// `q[r][mu]`.
    pub q: Lambda,
    /// `h_r`.
    pub h: Vec<ComplexMatrix>,
}

impl NrBlocks {
    /// `max_r |sum_mu (p^2 + q^2) f_r + h_r^2 - I/n^2|`.
    pub fn real_part_defect(&self, basis: &HermitianBasis) -> f64 {
        let n = basis.n();
        let target = identity(n).map(|z| z / (n * n) as f64);
        (0..basis.len())
            .map(|r| {
                let s: f64 = self.p[r].iter().zip(&self.q[r]).map(|(p, q)| p * p + q * q).sum();
                let total = basis.element(r).map(|z| z * s) + &self.h[r] * &self.h[r];
                max_abs_diff(&total, &target)
            })
            .fold(0.0, f64::max)
    }
}

/// `p`, `q`, `h` for a given `lambda`.
pub fn nr_blocks(lambda: &Lambda, spec: &NrSpec) -> Result<NrBlocks> {
    spec.check(lambda)?;
    let basis = &spec.basis;
    let n = basis.n();
    let mut p = vec![vec![0.0; spec.dim]; basis.len()];
    let mut q = vec![vec![0.0; spec.dim]; basis.len()];
    let mut h = Vec::with_capacity(basis.len());
    for r in 0..basis.len() {
        let mut s = 0.0;
        for mu in 0..spec.dim {
            let k = spec.shifts[r][mu];
            let p2 = lambda[r][mu] / spec.phase_scale + k;
            p[r][mu] = p2.sqrt();
            q[r][mu] = k.sqrt();
            s += p2 + k;
        }
        let h2 = identity(n).map(|z| z / (n * n) as f64) - basis.element(r).map(|z| z * s);
        h.push(hermitian_sqrt(&h2)?);
    }
    Ok(NrBlocks { p, q, h })
}

/// The NR frame at `x`: rows are all `p` blocks, then all `q` blocks, then the `h_r`.
pub fn nr_frame_raw(lambda: &Lambda, x: &[f64], spec: &NrSpec) -> Result<ComplexMatrix> {
    if x.len() != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: x.len() });
    }
    let blocks = nr_blocks(lambda, spec)?;
    let basis = &spec.basis;
    let n = basis.n();
    let d = spec.dim;
    let count = basis.len();
    let mut u = ComplexMatrix::zeros((2 * d + 1) * count * n, n);
    for r in 0..count {
        let g = basis.root(r);
        for mu in 0..d {
            let phase = c(0.0, -spec.phase_scale * x[mu]).exp();
            let pb = g.map(|z| z * phase * blocks.p[r][mu]);
            let qb = g.map(|z| z * phase.conj() * blocks.q[r][mu]);
            u.view_mut(((r * d + mu) * n, 0), (n, n)).copy_from(&pb);
            u.view_mut((((count + r) * d + mu) * n, 0), (n, n)).copy_from(&qb);
        }
        u.view_mut(((2 * count * d + r) * n, 0), (n, n)).copy_from(&blocks.h[r]);
    }
    Ok(u)
}

/// Checked NR frame.
pub fn nr_frame(lambda: &Lambda, x: &[f64], spec: &NrSpec) -> Result<FrameMatrix> {
    FrameMatrix::new(nr_frame_raw(lambda, x, spec)?)
}

/// `x -> U(x)` for a lambda field.
pub struct NrFrameField<L> {
    pub lambda: L,
    pub spec: NrSpec,
}

impl<L: Fn(&[f64]) -> Result<Lambda>> NrFrameField<L> {
    pub fn frame(&self, x: &[f64]) -> Result<ComplexMatrix> {
        nr_frame_raw(&(self.lambda)(x)?, x, &self.spec)
    }

    /// Spatial step for derivatives of the phases.
    pub fn step(&self) -> f64 {
        DEFAULT_RELATIVE_STEP / self.spec.phase_scale
    }

    /// `i U^dagger d_mu U` by finite differences.
    pub fn connection(&self, x: &[f64]) -> Result<Vec<ComplexMatrix>> {
        let u = self.frame(x)?;
        let ud = u.adjoint();
        let h = self.step();
        (0..x.len())
            .map(|mu| {
                let mut samples = Vec::with_capacity(4);
                for (o, _) in RICHARDSON_STENCIL {
                    let mut y = x.to_vec();
                    y[mu] += o * h;
                    samples.push(self.frame(&y)?);
                }
                let samples: [ComplexMatrix; 4] = samples.try_into().expect("four stencil points");
                let du = richardson_combine(&samples, h);
                Ok((&ud * du).map(|z| z * c(0.0, 1.0)))
            })
            .collect()
    }

    /// `max_mu |i U^dagger d_mu U - sum_r lambda_{r,mu} f_r|` at `x`.
    pub fn reconstruction_error(&self, x: &[f64]) -> Result<f64> {
        let lambda = (self.lambda)(x)?;
        let a = self.connection(x)?;
        Ok(a.iter()
            .enumerate()
            .map(|(mu, a_mu)| {
                let coeffs: Vec<f64> = lambda.iter().map(|row| row[mu]).collect();
                max_abs_diff(a_mu, &self.spec.basis.recompose(&coeffs))
            })
            .fold(0.0, f64::max))
    }
}

/// `lambda` of the charge-one instanton `A_mu = eta^a_{mu nu} y_nu tau_a / s`.
pub fn instanton_lambda(x: &[f64], t: &[f64], basis: &HermitianBasis) -> Result<Lambda> {
    let point = ModuliPoint::from_slice(t)?;
    let x4: [f64; 4] = x
        .try_into()
        .map_err(|_| Error::DimensionMismatch { expected: 4, got: x.len() })?;
    lambda_at(&thooft_connection(&x4, &point)?, basis)
}

/// NR frames of the charge-one instanton over the moduli `(a1..a4, rho)`,
/// on a box chart with constants fitted over a range of scales.
pub struct NrInstantonFamily {
    pub spec: NrSpec,
}

impl NrInstantonFamily {
    /// Fits `N` and the shifts over `[-L, L]^4` for centres in `[-L/2, L/2]^4`
    /// and scales `rho >= rho_min`.
    pub fn fit(half_width: f64, rho_min: f64) -> Result<Self> {
        if rho_min < RHO_MIN {
            return Err(Error::ScaleBelowMinimum { rho: rho_min, min: RHO_MIN });
        }
        let basis = HermitianBasis::su2_instanton();
        // |lambda_{i,mu}| <= 4|y|/s <= 2/rho, attained at |y| = rho.
        let peak = 2.0 / rho_min;
        let mut samples = Vec::new();
        for i in 0..3 {
            for mu in 0..4 {
                for sign in [-1.0, 1.0] {
                    let mut l = vec![vec![0.0; 4]; 4];
                    for j in 0..3 {
                        for nu in 0..4 {
                            l[j][nu] = sign * if (j, nu) == (i, mu) { peak } else { 0.0 };
                        }
                    }
                    samples.push(l);
                }
            }
        }
        // lambda_4 = -(3/4) sum_i lambda_i, bounded by (3/4) sqrt(3) 2/rho.
        let mut l4 = vec![vec![peak; 4]; 4];
        l4[3] = vec![0.75 * 3f64.sqrt() * peak; 4];
        samples.push(l4.clone());
        l4[3].iter_mut().for_each(|v| *v = -*v);
        samples.push(l4);
        let spec = NrSpec::fit(basis, 4, half_width, &samples)?;
        Ok(NrInstantonFamily { spec })
    }
}

impl ModuliFamily for NrInstantonFamily {
    fn labels(&self) -> Vec<String> {
        ADHM_LABELS.iter().map(|s| s.to_string()).collect()
    }
    fn base_dim(&self) -> usize {
        4
    }
    fn frame_shape(&self) -> (usize, usize) {
        (9 * 4 * 2, 2)
    }
    fn frame(&self, t: &[f64], x: &[f64]) -> ComplexMatrix {
        instanton_lambda(x, t, &self.spec.basis)
            .and_then(|l| nr_frame_raw(&l, x, &self.spec))
            .unwrap_or_else(|_| ComplexMatrix::from_element(72, 2, c(f64::NAN, 0.0)))
    }
    fn validate(&self, t: &[f64]) -> Result<()> {
        ModuliPoint::from_slice(t).map(|_| ())
    }
    fn placement(&self, t: &[f64]) -> Placement {
        Placement {
            centre: vec![0.0; 4],
            scale: t[4],
        }
    }
    fn spatial_step(&self, _t: &[f64], _x: &[f64]) -> f64 {
        DEFAULT_RELATIVE_STEP / self.spec.phase_scale
    }
}

/// `max ||U^dagger d_i U||` over sample points and moduli directions.
pub fn check_isotropy<F: ModuliFamily + ?Sized>(family: &F, t: &[f64], points: &[Vec<f64>], directions: &[usize]) -> f64 {
    points
        .iter()
        .map(|x| {
            moduli_jet(family, t, x, directions)
                .omega()
                .iter()
                .map(max_abs)
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// `A^g = g^dagger A g + i g^dagger dg` for Hermitian `A`.
pub fn gauge_transform<A, G>(a: &A, g: &G, x: &[f64], h: f64) -> Vec<ComplexMatrix>
where
    A: Fn(&[f64]) -> Vec<ComplexMatrix>,
    G: Fn(&[f64]) -> ComplexMatrix,
{
    let gx = g(x);
    let gd = gx.adjoint();
    a(x).iter()
        .enumerate()
        .map(|(mu, a_mu)| {
            let dg: ComplexMatrix = partial_derivative(|y: &[f64]| g(y), x, mu, h);
            &gd * a_mu * &gx + (&gd * dg).map(|z| z * c(0.0, 1.0))
        })
        .collect()
}

/// `sup_x max |U(A^g)(x) - U(A)(x) g(x)|` over the sample points.
pub fn check_nonequivariance<A, G>(a: A, g: G, spec: &NrSpec, points: &[Vec<f64>]) -> Result<f64>
where
    A: Fn(&[f64]) -> Vec<ComplexMatrix>,
    G: Fn(&[f64]) -> ComplexMatrix,
{
    let mut worst = 0.0_f64;
    for x in points {
        let u = nr_frame_raw(&lambda_at(&a(x), &spec.basis)?, x, spec)?;
        let ag = gauge_transform(&a, &g, x, DEFAULT_RELATIVE_STEP);
        let ug = nr_frame_raw(&lambda_at(&ag, &spec.basis)?, x, spec)?;
        worst = worst.max(max_abs_diff(&ug, &(u * g(x))));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adhm::AdhmFamily;
    use crate::algebra::{orthonormality_defect, su2_exp};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_dim_spec(n_phase: f64, k: f64) -> NrSpec {
        NrSpec::new(HermitianBasis::shifted_gell_mann(1).unwrap(), 1, 5.0, n_phase, vec![vec![k]]).unwrap()
    }

    fn random_points(seed: u64, count: usize, half: f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| (0..4).map(|_| rng.gen_range(-half..half)).collect()).collect()
    }

    #[test]
    fn instanton_lambda_example() {
        let basis = HermitianBasis::su2_instanton();
        let l = instanton_lambda(&[0.0, 0.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 0.0, 1.0], &basis).unwrap();
        for i in 0..3 {
            for mu in 0..4 {
                let expected = if mu < 3 && i == mu { 2.0 } else { 0.0 };
                assert!((l[i][mu] - expected).abs() < 1e-12);
            }
        }
        for mu in 0..4 {
            let expected = if mu < 3 { -1.5 } else { 0.0 };
            assert!((l[3][mu] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_four_relation_and_reconstruction() {
        let basis = HermitianBasis::su2_instanton();
        let t = [0.2, -0.3, 0.1, 0.5, 0.8];
        for x in random_points(3, 100, 3.0) {
            let l = instanton_lambda(&x, &t, &basis).unwrap();
            let a = thooft_connection(&x.clone().try_into().unwrap(), &ModuliPoint::from_slice(&t).unwrap()).unwrap();
            for mu in 0..4 {
                let sum: f64 = (0..3).map(|i| l[i][mu]).sum();
                assert!((l[3][mu] + 0.75 * sum).abs() < 1e-12);
                let coeffs: Vec<f64> = l.iter().map(|row| row[mu]).collect();
                assert!(max_abs_diff(&basis.recompose(&coeffs), &a[mu]) < 1e-12);
            }
        }
        let zero = lambda_at(&vec![ComplexMatrix::zeros(2, 2); 4], &basis).unwrap();
        assert!(zero.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_non_hermitian_connection() {
        let basis = HermitianBasis::su2_instanton();
        let mut a = ComplexMatrix::zeros(2, 2);
        a[(0, 1)] = c(1.0, 0.0);
        assert!(lambda_at(&[a], &basis).is_err());
    }

    #[test]
    fn one_dimensional_example() {
        let spec = one_dim_spec(1.0, 0.05);
        let lambda = vec![vec![0.1]];
        let blocks = nr_blocks(&lambda, &spec).unwrap();
        assert!((blocks.p[0][0] - 0.15f64.sqrt()).abs() < 1e-15);
        assert!((blocks.q[0][0] - 0.05f64.sqrt()).abs() < 1e-15);
        assert!((blocks.h[0][(0, 0)].re - 0.8f64.sqrt()).abs() < 1e-15);
        let x = 0.7;
        let u = nr_frame(&lambda, &[x], &spec).unwrap();
        assert!(orthonormality_defect(u.matrix()) < 1e-15);
        let m = u.matrix();
        assert!((m[(0, 0)] - c(0.0, -x).exp() * 0.15f64.sqrt()).norm() < 1e-15);
        assert!((m[(1, 0)] - c(0.0, x).exp() * 0.05f64.sqrt()).norm() < 1e-15);
        let field = NrFrameField {
            lambda: |_: &[f64]| Ok(vec![vec![0.1]]),
            spec,
        };
        let a = field.connection(&[x]).unwrap();
        assert!((a[0][(0, 0)] - c(0.1, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn zero_connection_gives_pure_phases() {
        let spec = one_dim_spec(1.0, 0.05);
        let field = NrFrameField {
            lambda: |_: &[f64]| Ok(vec![vec![0.0]]),
            spec,
        };
        for x in [-2.0, 0.0, 1.3] {
            assert!(field.connection(&[x]).unwrap()[0].norm() < 1e-9);
            let u = field.frame(&[x]).unwrap();
            assert!((u[(0, 0)].norm() - u[(1, 0)].norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn positivity_violation_suggests_scale() {
        let spec = one_dim_spec(1.0, 0.05);
        match nr_blocks(&vec![vec![1.0]], &spec) {
            Err(Error::NrPositivity { suggested, .. }) => assert!(suggested > 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fitted_constants_are_powers_of_two() {
        let family = NrInstantonFamily::fit(5.0, 0.5).unwrap();
        let n = family.spec.phase_scale();
        assert_eq!(n.log2().fract(), 0.0);
        let eps = NrSpec::epsilon(2, 4);
        assert!(family.spec.shifts().iter().flatten().all(|&k| k >= eps));
        let json = serde_json::to_string(&family.spec).unwrap();
        let back: NrSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.phase_scale(), n);
        assert_eq!(back.shifts(), family.spec.shifts());
    }

    #[test]
    fn instanton_frames_unitarity_and_reconstruction() {
        let family = NrInstantonFamily::fit(5.0, 0.5).unwrap();
        let t = [0.0, 0.0, 0.0, 0.0, 1.0];
        let basis = family.spec.basis().clone();
        let field = NrFrameField {
            lambda: move |x: &[f64]| instanton_lambda(x, &t, &basis),
            spec: family.spec.clone(),
        };
        for x in random_points(5, 50, 5.0) {
            let u = field.frame(&x).unwrap();
            assert!(orthonormality_defect(&u) < 1e-12);
            assert!(field.reconstruction_error(&x).unwrap() < 1e-5);
            let blocks = nr_blocks(&(field.lambda)(&x).unwrap(), &field.spec).unwrap();
            assert!(blocks.real_part_defect(field.spec.basis()) < 1e-14);
        }
    }

    #[test]
    fn isotropy_on_instanton_family() {
        let family = NrInstantonFamily::fit(5.0, 0.5).unwrap();
        let t = [0.3, -0.2, 0.1, 0.0, 1.1];
        let defect = check_isotropy(&family, &t, &random_points(7, 50, 5.0), &[0, 4]);
        assert!(defect < 1e-8, "{defect}");
        let adhm = check_isotropy(&AdhmFamily, &t, &random_points(7, 50, 2.0), &[0]);
        assert!(adhm > 0.1, "{adhm}");
    }

    #[test]
    fn isotropy_for_scaled_constant_lambda() {
        struct Scaled(NrSpec);
        impl ModuliFamily for Scaled {
            fn labels(&self) -> Vec<String> {
                vec!["t".into()]
            }
            fn base_dim(&self) -> usize {
                1
            }
            fn frame_shape(&self) -> (usize, usize) {
                (3, 1)
            }
            fn frame(&self, t: &[f64], x: &[f64]) -> ComplexMatrix {
                nr_frame_raw(&vec![vec![t[0] * 0.1]], x, &self.0).unwrap()
            }
        }
        let fam = Scaled(one_dim_spec(1.0, 0.1));
        let points: Vec<Vec<f64>> = (0..20).map(|i| vec![-4.0 + 0.4 * i as f64]).collect();
        assert!(check_isotropy(&fam, &[0.5], &points, &[0]) < 1e-10);
    }

    #[test]
    fn nonequivariance() {
        let family = NrInstantonFamily::fit(5.0, 0.5).unwrap();
        let point = ModuliPoint::new([0.0; 4], 1.0).unwrap();
        let a = |x: &[f64]| thooft_connection(&x.try_into().unwrap(), &point).unwrap().to_vec();
        let g = |_: &[f64]| su2_exp([0.0, 0.0, 1.0]);
        let coarse = crate::nr::chart_grid(4, 2.0, 5);
        let fine = crate::nr::chart_grid(4, 2.0, 9);
        let d1 = check_nonequivariance(a, g, &family.spec, &coarse).unwrap();
        let d2 = check_nonequivariance(a, g, &family.spec, &fine).unwrap();
        assert!(d1 > 0.1, "{d1}");
        assert!((d1 - d2).abs() < 1e-3, "{d1} {d2}");
        let id = check_nonequivariance(a, |_: &[f64]| identity(2), &family.spec, &coarse).unwrap();
        assert!(id < 1e-12);
    }
}
