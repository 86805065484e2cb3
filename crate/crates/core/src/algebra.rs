//! Dense complex linear algebra for small matrices: Pauli and 't Hooft
//! structure constants, Hermitian bases, orthonormal frames and their
//! projectors.
//!
//! Index convention: every four-dimensional index runs over `0..4`, with
//! index `3` playing the role of the Euclidean time direction (the "4"
//! component, where `sigma_4 = sigma_bar_4 = I`). Colour indices `a` run
//! over `0..3`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Tolerance for constructive identities such as `U^dagger U = I` and `P^2 = P`.
pub const FRAME_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn dagger(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint()
}

pub fn trace(m: &ComplexMatrix) -> C64 {
    m.trace()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    max_abs_diff(m, &m.adjoint())
}

pub fn scale(m: &ComplexMatrix, s: f64) -> ComplexMatrix {
    m.map(|z| z * s)
}

/// Commutator `[A, B]`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are returned in
/// ascending order with the matching unit eigenvectors as columns.
pub fn hermitian_eigen(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let sym = (m + m.adjoint()).map(|z| z * 0.5);
    let eig = sym.symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Largest eigenvalue modulus of a Hermitian matrix.
pub fn operator_norm_hermitian(m: &ComplexMatrix) -> f64 {
    let (values, _) = hermitian_eigen(m);
    values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> C64) -> ComplexMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let diag = DVector::from_iterator(values.len(), values.iter().map(|&v| f(v)));
    &vectors * ComplexMatrix::from_diagonal(&diag) * vectors.adjoint()
}

/// Positive square root of a positive semi-definite Hermitian matrix.
pub fn hermitian_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let defect = hermiticity_defect(m);
    if defect > 1e-10 {
        return Err(Error::NonHermitian { defect });
    }
    let (values, _) = hermitian_eigen(m);
    let scale = values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    if values.iter().any(|&v| v < -1e-12 * scale) {
        return Err(Error::ConstraintViolation {
            what: "positive semi-definiteness",
            defect: -values[0],
            tolerance: 1e-12 * scale,
        });
    }
    Ok(hermitian_function(m, |v| c(v.max(0.0).sqrt(), 0.0)))
}

/// `exp(i H)` for Hermitian `H`.
pub fn unitary_exp(h: &ComplexMatrix) -> ComplexMatrix {
    hermitian_function(h, |v| c(v.cos(), v.sin()))
}

/// `exp(i v . tau / 2)` in closed form.
pub fn su2_exp(v: [f64; 3]) -> ComplexMatrix {
    let theta = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let half = 0.5 * theta;
    let (cos, sinc) = if theta < 1e-8 {
        (1.0 - half * half / 2.0, 0.5 * (1.0 - half * half / 6.0))
    } else {
        (half.cos(), half.sin() / theta)
    };
    let tau = pauli();
    let mut m = identity(2).map(|z| z * cos);
    for a in 0..3 {
        m += tau[a].map(|z| z * c(0.0, sinc * v[a]));
    }
    m
}

/// Pauli matrices `tau_1, tau_2, tau_3`.
pub fn pauli() -> [ComplexMatrix; 3] {
    let o = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        ComplexMatrix::from_row_slice(2, 2, &[o, one, one, o]),
        ComplexMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        ComplexMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
    ]
}

/// Quaternionic basis used by the ADHM frame.
#[derive(Debug, Clone)]
pub struct SigmaSet {
    pub tau: [ComplexMatrix; 3],
    /// `sigma_mu = (i tau_a, I)`.
    pub sigma: [ComplexMatrix; 4],
    /// `sigma_bar_mu = (-i tau_a, I)`.
    pub sigma_bar: [ComplexMatrix; 4],
}

pub fn pauli_and_sigma() -> SigmaSet {
    let tau = pauli();
    let i = c(0.0, 1.0);
    let sigma = [
        tau[0].map(|z| z * i),
        tau[1].map(|z| z * i),
        tau[2].map(|z| z * i),
        identity(2),
    ];
    let sigma_bar = [
        tau[0].map(|z| -z * i),
        tau[1].map(|z| -z * i),
        tau[2].map(|z| -z * i),
        identity(2),
    ];
    SigmaSet {
        tau,
        sigma,
        sigma_bar,
    }
}

pub fn levi_civita3(i: usize, j: usize, k: usize) -> i32 {
    permutation_sign(&[i, j, k])
}

pub fn levi_civita4(i: usize, j: usize, k: usize, l: usize) -> i32 {
    permutation_sign(&[i, j, k, l])
}

fn permutation_sign(idx: &[usize]) -> i32 {
    let n = idx.len();
    if idx.iter().any(|&i| i >= n) {
        return 0;
    }
    let mut sign = 1;
    for a in 0..n {
        for b in (a + 1)..n {
            match idx[a].cmp(&idx[b]) {
                std::cmp::Ordering::Equal => return 0,
                std::cmp::Ordering::Greater => sign = -sign,
                std::cmp::Ordering::Less => {}
            }
        }
    }
    sign
}

/// Table of 't Hooft symbols `eta^a_{mu nu}`.
///
/// The standard table is self-dual with respect to `epsilon_{0123} = 1`. The
/// anti-self-dual table exists so the verification suites can be run against
/// a deliberately wrong convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EtaSymbol {
    table: [[[i8; 4]; 4]; 3],
}

impl EtaSymbol {
    /// `eta^a_{ij} = epsilon_{aij}`, `eta^a_{i4} = delta_{ai}`, antisymmetric.
    pub fn self_dual() -> Self {
        Self::build(1)
    }

    /// The anti-self-dual `eta_bar` symbols (`eta_bar^a_{i4} = -delta_{ai}`).
    pub fn anti_self_dual() -> Self {
        Self::build(-1)
    }

    fn build(time_sign: i8) -> Self {
        let mut table = [[[0i8; 4]; 4]; 3];
        for (a, block) in table.iter_mut().enumerate() {
            for i in 0..3 {
                for j in 0..3 {
                    block[i][j] = levi_civita3(a, i, j) as i8;
                }
                if i == a {
                    block[i][3] = time_sign;
                    block[3][i] = -time_sign;
                }
            }
        }
        EtaSymbol { table }
    }

    #[inline]
    pub fn get(&self, a: usize, mu: usize, nu: usize) -> i32 {
        self.table[a][mu][nu] as i32
    }

    /// Largest violation of `eta = (1/2) epsilon eta` over all entries.
    pub fn self_duality_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..3 {
            for mu in 0..4 {
                for nu in 0..4 {
                    let mut dual = 0.0;
                    for rho in 0..4 {
                        for sigma in 0..4 {
                            dual += 0.5
                                * levi_civita4(mu, nu, rho, sigma) as f64
                                * self.get(a, rho, sigma) as f64;
                        }
                    }
                    worst = worst.max((dual - self.get(a, mu, nu) as f64).abs());
                }
            }
        }
        worst
    }
}

impl Default for EtaSymbol {
    fn default() -> Self {
        Self::self_dual()
    }
}

/// The fixed 't Hooft symbol, `a` in `0..3`, `mu, nu` in `0..4`.
pub fn thooft_eta(a: usize, mu: usize, nu: usize) -> i32 {
    assert!(a < 3 && mu < 4 && nu < 4, "'t Hooft index out of range");
    EtaSymbol::self_dual().get(a, mu, nu)
}

/// An `m x n` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix(ComplexMatrix);

impl FrameMatrix {
    /// Validates `U^dagger U = I` to [`FRAME_TOL`].
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, FRAME_TOL)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tolerance: f64) -> Result<Self> {
        if matrix.nrows() < matrix.ncols() {
            return Err(Error::ConstraintViolation {
                what: "frame shape m >= n",
                defect: (matrix.ncols() - matrix.nrows()) as f64,
                tolerance: 0.0,
            });
        }
        let defect = orthonormality_defect(&matrix);
        if !(defect <= tolerance) {
            return Err(Error::ConstraintViolation {
                what: "U^dagger U = I",
                defect,
                tolerance,
            });
        }
        Ok(FrameMatrix(matrix))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn projector(&self) -> ComplexMatrix {
        &self.0 * self.0.adjoint()
    }

    /// Right action of a constant `n x n` unitary.
    pub fn gauge(&self, g: &ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(&self.0 * g, 1e-10)
    }
}

/// `max |U^dagger U - I|`.
pub fn orthonormality_defect(u: &ComplexMatrix) -> f64 {
    let gram = u.adjoint() * u;
    max_abs_diff(&gram, &identity(u.ncols()))
}

/// `P = U U^dagger`, after checking the frame is orthonormal.
pub fn projector(u: &ComplexMatrix) -> Result<ComplexMatrix> {
    let frame = FrameMatrix::new(u.clone())?;
    Ok(frame.projector())
}

/// Diagnostics of a candidate projector: `(max|P^2 - P|, max|P - P^dagger|, Tr P)`.
pub fn projector_defects(p: &ComplexMatrix) -> (f64, f64, f64) {
    let idem = max_abs_diff(&(p * p), p);
    (idem, hermiticity_defect(p), p.trace().re)
}

/// Vertically stack `copies` copies of `u`, scaled by `1/sqrt(copies)`.
pub fn stack_frame(u: &ComplexMatrix, copies: usize) -> ComplexMatrix {
    let (m, n) = u.shape();
    let s = 1.0 / (copies as f64).sqrt();
    let mut out = ComplexMatrix::zeros(m * copies, n);
    for k in 0..copies {
        out.view_mut((k * m, 0), (m, n)).copy_from(&u.map(|z| z * s));
    }
    out
}

/// Random frame from the QR factorisation of a complex Gaussian matrix,
/// with the phase of `R`'s diagonal removed so the result is Haar distributed.
pub fn haar_frame<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> FrameMatrix {
    assert!(m >= n && n > 0);
    let g = ComplexMatrix::from_fn(m, n, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    FrameMatrix::with_tolerance(q, 1e-10).expect("QR factor is orthonormal")
}

/// Haar-random `n x n` unitary.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    haar_frame(n, n, rng).into_inner()
}

/// A real basis of the `n x n` Hermitian matrices made of positive definite
/// elements of unit operator norm.
#[derive(Debug, Clone)]
pub struct HermitianBasis {
    n: usize,
    elements: Vec<ComplexMatrix>,
    roots: Vec<ComplexMatrix>,
    gram: DMatrix<f64>,
    gram_inverse: DMatrix<f64>,
}

impl HermitianBasis {
    pub fn new(elements: Vec<ComplexMatrix>) -> Result<Self> {
        let n = elements
            .first()
            .map(|f| f.nrows())
            .ok_or_else(|| Error::InvalidBasis("empty basis".into()))?;
        if elements.len() != n * n {
            return Err(Error::InvalidBasis(format!(
                "need {} elements for {n}x{n} Hermitian matrices, got {}",
                n * n,
                elements.len()
            )));
        }
        let mut roots = Vec::with_capacity(elements.len());
        for (r, f) in elements.iter().enumerate() {
            if f.shape() != (n, n) {
                return Err(Error::InvalidBasis(format!("element {r} is not {n}x{n}")));
            }
            let defect = hermiticity_defect(f);
            if defect > 1e-12 {
                return Err(Error::NonHermitian { defect });
            }
            let (values, _) = hermitian_eigen(f);
            if values[0] <= 0.0 {
                return Err(Error::InvalidBasis(format!(
                    "element {r} is not positive definite (min eigenvalue {})",
                    values[0]
                )));
            }
            let norm = values[n - 1];
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidBasis(format!(
                    "element {r} has operator norm {norm}, expected 1"
                )));
            }
            roots.push(hermitian_sqrt(f)?);
        }
        let dim = elements.len();
        let gram = DMatrix::from_fn(dim, dim, |r, s| trace_product(&elements[r], &elements[s]).re);
        let gram_inverse = gram.clone().try_inverse().ok_or(Error::SingularGram)?;
        // Reject numerically singular systems too.
        let cond = gram.norm() * gram_inverse.norm();
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::SingularGram);
        }
        Ok(HermitianBasis {
            n,
            elements,
            roots,
            gram,
            gram_inverse,
        })
    }

    /// Shifted generalised Gell-Mann basis: `f_k = (T_k/|T_k| + 3I)` rescaled
    /// to unit norm for the `n^2 - 1` traceless generators, plus `f = I`.
    /// For `n = 2` this is `f_i = (tau_i + 3I)/4`, `f_4 = I`.
    pub fn shifted_gell_mann(n: usize) -> Result<Self> {
        let mut elements = Vec::with_capacity(n * n);
        for t in traceless_generators(n) {
            let g = scale(&t, 1.0 / operator_norm_hermitian(&t)) + identity(n).map(|z| z * 3.0);
            let norm = operator_norm_hermitian(&g);
            elements.push(scale(&g, 1.0 / norm));
        }
        elements.push(identity(n));
        Self::new(elements)
    }

    /// The SU(2) basis `f_i = (tau_i + 3 I)/4`, `f_4 = I`.
    pub fn su2_instanton() -> Self {
        Self::shifted_gell_mann(2).expect("SU(2) basis is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn element(&self, r: usize) -> &ComplexMatrix {
        &self.elements[r]
    }

    /// Positive square root `g_r` of `f_r`.
    pub fn root(&self, r: usize) -> &ComplexMatrix {
        &self.roots[r]
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Real coefficients `lambda` with `sum_r lambda_r f_r = H`.
    pub fn decompose(&self, h: &ComplexMatrix) -> Result<Vec<f64>> {
        if h.shape() != (self.n, self.n) {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: h.nrows(),
            });
        }
        let defect = hermiticity_defect(h);
        if defect > 1e-10 * (1.0 + max_abs(h)) {
            return Err(Error::NonHermitian { defect });
        }
        let rhs = DVector::from_iterator(
            self.len(),
            self.elements.iter().map(|f| trace_product(f, h).re),
        );
        let coeffs = &self.gram_inverse * rhs;
        Ok(coeffs.iter().copied().collect())
    }

    pub fn recompose(&self, coeffs: &[f64]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.n, self.n);
        for (f, &l) in self.elements.iter().zip(coeffs) {
            out += f.map(|z| z * l);
        }
        out
    }
}

/// Generalised Gell-Mann matrices (Hermitian, traceless), `n^2 - 1` of them.
pub fn traceless_generators(n: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::new();
    for j in 0..n {
        for k in (j + 1)..n {
            let mut s = ComplexMatrix::zeros(n, n);
            s[(j, k)] = c(1.0, 0.0);
            s[(k, j)] = c(1.0, 0.0);
            out.push(s);
            let mut a = ComplexMatrix::zeros(n, n);
            a[(j, k)] = c(0.0, -1.0);
            a[(k, j)] = c(0.0, 1.0);
            out.push(a);
        }
    }
    for l in 1..n {
        let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut d = ComplexMatrix::zeros(n, n);
        for j in 0..l {
            d[(j, j)] = c(norm, 0.0);
        }
        d[(l, l)] = c(-(l as f64) * norm, 0.0);
        out.push(d);
    }
    // Order the n = 2 case as tau_1, tau_2, tau_3.
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        max_abs_diff(a, b) < tol
    }

    #[test]
    fn canonical_frame_projector() {
        let mut u = ComplexMatrix::zeros(3, 1);
        u[(0, 0)] = c(1.0, 0.0);
        let p = projector(&u).unwrap();
        let mut expected = ComplexMatrix::zeros(3, 3);
        expected[(0, 0)] = c(1.0, 0.0);
        assert_eq!(p, expected);
    }

    #[test]
    fn projector_rejects_non_orthonormal() {
        let u = ComplexMatrix::from_element(3, 1, c(1.0, 0.0));
        match projector(&u) {
            Err(Error::ConstraintViolation { defect, .. }) => assert!((defect - 2.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn haar_projectors_are_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for k in 0..100 {
            let m = 2 + k % 6;
            let n = 1 + k % m;
            let u = haar_frame(m, n, &mut rng);
            let p = u.projector();
            let (idem, herm, tr) = projector_defects(&p);
            assert!(idem < 1e-12 && herm < 1e-12);
            assert!((tr - n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn projector_is_gauge_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = haar_frame(5, 2, &mut rng);
        let g = haar_unitary(2, &mut rng);
        let ug = u.gauge(&g).unwrap();
        assert!(close(&u.projector(), &ug.projector(), 1e-14));
    }

    #[test]
    fn pauli_algebra() {
        let s = pauli_and_sigma();
        let i = c(0.0, 1.0);
        assert!(close(&(&s.tau[0] * &s.tau[1]), &s.tau[2].map(|z| z * i), 0.0 + 1e-15));
        for a in 0..3 {
            assert!(hermiticity_defect(&s.tau[a]) == 0.0);
            assert_eq!(s.tau[a].trace(), c(0.0, 0.0));
            for b in 0..3 {
                let mut expected = if a == b { identity(2) } else { ComplexMatrix::zeros(2, 2) };
                for cc in 0..3 {
                    let e = levi_civita3(a, b, cc) as f64;
                    expected += s.tau[cc].map(|z| z * i * e);
                }
                assert!(close(&(&s.tau[a] * &s.tau[b]), &expected, 1e-15));
            }
        }
        assert_eq!(s.sigma_bar[3], identity(2));
        let mut sum = ComplexMatrix::zeros(2, 2);
        for mu in 0..4 {
            sum += &s.sigma_bar[mu] * &s.sigma[mu];
            assert!(close(&s.sigma_bar[mu], &s.sigma[mu].adjoint(), 1e-15));
            for nu in 0..4 {
                let anti = &s.sigma_bar[mu] * &s.sigma[nu] + &s.sigma_bar[nu] * &s.sigma[mu];
                let expected = if mu == nu { identity(2).map(|z| z * 2.0) } else { ComplexMatrix::zeros(2, 2) };
                assert!(close(&anti, &expected, 1e-15));
            }
        }
        assert!(close(&sum, &identity(2).map(|z| z * 4.0), 1e-15));
    }

    #[test]
    fn eta_values_and_self_duality() {
        // 1-based eta^1_{23} = 1 and eta^3_{34} = 1.
        assert_eq!(thooft_eta(0, 1, 2), 1);
        assert_eq!(thooft_eta(2, 2, 3), 1);
        let eta = EtaSymbol::self_dual();
        for a in 0..3 {
            for mu in 0..4 {
                for nu in 0..4 {
                    assert_eq!(eta.get(a, mu, nu), -eta.get(a, nu, mu));
                }
            }
        }
        assert_eq!(eta.self_duality_defect(), 0.0);
        assert!(EtaSymbol::anti_self_dual().self_duality_defect() >= 1.0);
    }

    #[test]
    fn instanton_basis() {
        let basis = HermitianBasis::su2_instanton();
        let tau = pauli();
        for i in 0..3 {
            let expected = (&tau[i] + identity(2).map(|z| z * 3.0)).map(|z| z * 0.25);
            assert!(close(basis.element(i), &expected, 1e-15));
            let (values, _) = hermitian_eigen(basis.element(i));
            assert!((values[0] - 0.5).abs() < 1e-14 && (values[1] - 1.0).abs() < 1e-14);
            let g = basis.root(i);
            assert!(close(&(g * g), basis.element(i), 1e-14));
        }
        assert_eq!(basis.element(3), &identity(2));
    }

    #[test]
    fn decompose_identity_and_tau1() {
        let basis = HermitianBasis::su2_instanton();
        let l = basis.decompose(&identity(2)).unwrap();
        let expected = [0.0, 0.0, 0.0, 1.0];
        for (a, b) in l.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        let l = basis.decompose(&pauli()[0]).unwrap();
        let expected = [4.0, 0.0, 0.0, -3.0];
        for (a, b) in l.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{l:?}");
        }
    }

    #[test]
    fn decompose_rejects_non_hermitian() {
        let basis = HermitianBasis::su2_instanton();
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(basis.decompose(&m), Err(Error::NonHermitian { .. })));
    }

    #[test]
    fn singular_basis_rejected() {
        let f = identity(2);
        let err = HermitianBasis::new(vec![f.clone(), f.clone(), f.clone(), f]).unwrap_err();
        assert_eq!(err, Error::SingularGram);
    }

    #[test]
    fn gell_mann_bases_are_valid() {
        for n in 1..=4 {
            let basis = HermitianBasis::shifted_gell_mann(n).unwrap();
            assert_eq!(basis.len(), n * n);
        }
    }

    #[test]
    fn su2_exp_matches_eigen_route() {
        let v = [0.3, -1.1, 0.7];
        let tau = pauli();
        let mut h = ComplexMatrix::zeros(2, 2);
        for a in 0..3 {
            h += tau[a].map(|z| z * (0.5 * v[a]));
        }
        assert!(close(&su2_exp(v), &unitary_exp(&h), 1e-14));
        assert!(close(&su2_exp([0.0; 3]), &identity(2), 0.0 + 1e-16));
    }

    #[test]
    fn stacked_frame_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = haar_frame(4, 2, &mut rng);
        let m = stack_frame(u.matrix(), 3);
        assert!(orthonormality_defect(&m) < 1e-14);
    }
}
