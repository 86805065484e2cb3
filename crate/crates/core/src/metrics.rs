//! Metrics built from a universal matrix:
//!
//! * `g0_ij = int Tr(d_i P d_j P)`, invariant under moduli-dependent gauge
//!   transformations;
//! * `g1_ij = -int Tr(A_i A_j)` with `A_i = U^dagger d_i U`;
//! * their damped versions, weighted by `Phi(U)^alpha` where
//!   `Phi(U) = sum_mu Tr(d_mu P d_mu P)` on flat R^d, or by products of
//!   `Tr phi^k` with `phi = sum_mu d_mu P d_mu P`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::{commutator, max_abs, max_abs_diff, trace_product, ComplexMatrix};
use crate::calculus::{integrate_chart_vec, richardson_combine, QuadratureSpec, RICHARDSON_STENCIL};
use crate::error::{Error, Result};
use crate::family::{moduli_jet, spatial_jet, ModuliFamily};

/// Relative eigenvalue threshold below which a direction counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Which quadratic form is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    G0,
    G1,
}

/// Positive integer exponents `alpha_1..alpha_k` of `Tr phi^alpha_1 ... Tr phi^alpha_k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DampingExponents(Vec<u32>);

impl DampingExponents {
    pub fn new(exponents: Vec<u32>) -> Result<Self> {
        if exponents.is_empty() || exponents.contains(&0) {
            return Err(Error::InvalidQuadrature(
                "damping exponents must be a non-empty list of positive integers".into(),
            ));
        }
        Ok(DampingExponents(exponents))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    fn total(&self) -> f64 {
        self.0.iter().map(|&a| a as f64).sum()
    }
}

/// Weight applied to the metric integrand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Damping {
    None,
    /// `Phi(U)^alpha`, `alpha >= 0` real.
    PhiPower { alpha: f64 },
    /// `Tr phi^a1 ... Tr phi^ak`.
    TracePowers { exponents: DampingExponents },
}

impl Damping {
    fn length_weight(&self) -> f64 {
        match self {
            Damping::None => 0.0,
            Damping::PhiPower { alpha } => *alpha,
            Damping::TracePowers { exponents } => exponents.total(),
        }
    }

    fn needs_spatial(&self) -> bool {
        !matches!(self, Damping::None)
    }
}

/// How a metric tensor was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<Damping>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub moduli_point: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
    /// `max |g - g^T|` before symmetrisation.
    #[serde(default)]
    pub asymmetry: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<(String, f64)>,
}

/// Symmetric matrix of moduli-space inner products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTensor {
    pub labels: Vec<String>,
    pub entries: Vec<Vec<f64>>,
    /// Length dimension of the entries when every modulus is a length.
    pub exponent: Option<f64>,
    pub provenance: Provenance,
}

impl MetricTensor {
    /// Symmetrises `raw` and records the asymmetry in the provenance.
    pub fn from_raw(labels: Vec<String>, raw: DMatrix<f64>, exponent: Option<f64>, mut provenance: Provenance) -> Result<Self> {
        let n = labels.len();
        if raw.shape() != (n, n) {
            return Err(Error::DimensionMismatch { expected: n, got: raw.nrows() });
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::PoisonedEvaluation { location: vec![] });
        }
        let asym = (&raw - raw.transpose()).abs().max();
        provenance.asymmetry = provenance.asymmetry.max(asym);
        let sym = (&raw + raw.transpose()) * 0.5;
        let entries = (0..n).map(|i| (0..n).map(|j| sym[(i, j)]).collect()).collect();
        Ok(MetricTensor {
            labels,
            entries,
            exponent,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Entry by label pair.
    pub fn entry(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.entries[self.index_of(a)?][self.index_of(b)?])
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.entries[i][j])
    }

    /// Sub-block on the given labels.
    pub fn restrict(&self, labels: &[&str]) -> Result<MetricTensor> {
        let idx: Vec<usize> = labels
            .iter()
            .map(|l| {
                self.index_of(l)
                    .ok_or_else(|| Error::IncompatibleLabels(format!("unknown label {l:?}")))
            })
            .collect::<Result<_>>()?;
        let entries = idx.iter().map(|&i| idx.iter().map(|&j| self.entries[i][j]).collect()).collect();
        Ok(MetricTensor {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            entries,
            exponent: self.exponent,
            provenance: self.provenance.clone(),
        })
    }

    /// CSV rows `i,j,label_i,label_j,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,label_i,label_j,value\n");
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                out.push_str(&format!(
                    "{i},{j},{},{},{:.17e}\n",
                    self.labels[i], self.labels[j], self.entries[i][j]
                ));
            }
        }
        out
    }

    pub fn definiteness(&self) -> DefinitenessReport {
        DefinitenessReport::of(self)
    }
}

/// Eigenvalue summary of a metric tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinitenessReport {
    pub eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub positive_definite: bool,
    pub degenerate_directions: Vec<DegenerateDirection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateDirection {
    pub eigenvalue: f64,
    pub vector: Vec<f64>,
    /// Labels carrying at least 10% of the direction.
    pub labels: Vec<String>,
}

impl DefinitenessReport {
    pub fn of(metric: &MetricTensor) -> Self {
        let eig = metric.matrix().symmetric_eigen();
        let n = metric.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let max = eigenvalues.last().copied().unwrap_or(0.0);
        let min = eigenvalues.first().copied().unwrap_or(0.0);
        let threshold = DEGENERACY_THRESHOLD * max.abs();
        let mut degenerate_directions = Vec::new();
        for &i in &order {
            let lambda = eig.eigenvalues[i];
            if lambda < threshold || max <= 0.0 {
                let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                let labels = v
                    .iter()
                    .zip(&metric.labels)
                    .filter(|(c, _)| c.abs() > 0.1)
                    .map(|(_, l)| l.clone())
                    .collect();
                degenerate_directions.push(DegenerateDirection {
                    eigenvalue: lambda,
                    vector: v,
                    labels,
                });
            }
        }
        DefinitenessReport {
            positive_definite: degenerate_directions.is_empty() && max > 0.0,
            eigenvalues,
            min_eigenvalue: min,
            max_eigenvalue: max,
            degenerate_directions,
        }
    }
}

/// `phi(x) = sum_mu d_mu P d_mu P` from spatial projector derivatives.
fn phi_matrix(dp: &[ComplexMatrix]) -> ComplexMatrix {
    let m = dp[0].nrows();
    let mut phi = ComplexMatrix::zeros(m, m);
    for d in dp {
        phi += d * d;
    }
    phi
}

fn trace_power(phi: &ComplexMatrix, k: u32) -> f64 {
    let mut acc = phi.clone();
    for _ in 1..k {
        acc = &acc * phi;
    }
    acc.trace().re.max(0.0)
}

fn damping_weight(damping: &Damping, spatial_dp: Option<&[ComplexMatrix]>) -> f64 {
    match damping {
        Damping::None => 1.0,
        Damping::PhiPower { alpha } => {
            let dp = spatial_dp.expect("spatial jet computed");
            let phi: f64 = dp.iter().map(|d| trace_product(d, d).re).sum::<f64>().max(0.0);
            if *alpha == 0.0 {
                1.0
            } else {
                phi.powf(*alpha)
            }
        }
        Damping::TracePowers { exponents } => {
            let phi = phi_matrix(spatial_dp.expect("spatial jet computed"));
            exponents.as_slice().iter().map(|&k| trace_power(&phi, k)).product()
        }
    }
}

/// Pointwise `Phi(U)(x) = sum_mu Tr(d_mu P d_mu P)` for the frame at `t`.
pub fn phi_at<F: ModuliFamily + ?Sized>(family: &F, t: &[f64], x: &[f64]) -> f64 {
    let jet = spatial_jet(family, t, x);
    jet.dp.iter().map(|d| trace_product(d, d).re).sum::<f64>()
}

/// `x -> Phi(U)(x)`.
pub fn phi_field<'a, F: ModuliFamily + ?Sized>(family: &'a F, t: &'a [f64]) -> impl Fn(&[f64]) -> f64 + 'a {
    move |x| phi_at(family, t, x)
}

/// `x -> Tr phi^a1 ... Tr phi^ak`.
pub fn damping_factor<'a, F: ModuliFamily + ?Sized>(
    family: &'a F,
    t: &'a [f64],
    exponents: &'a DampingExponents,
) -> impl Fn(&[f64]) -> f64 + 'a {
    move |x| {
        let jet = spatial_jet(family, t, x);
        let phi = phi_matrix(&jet.dp);
        exponents.as_slice().iter().map(|&k| trace_power(&phi, k)).product()
    }
}

/// One metric to be computed in a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRequest {
    pub kind: MetricKind,
    pub damping: Damping,
}

impl MetricRequest {
    pub fn new(kind: MetricKind, damping: Damping) -> Self {
        MetricRequest { kind, damping }
    }

    pub fn name(&self) -> &'static str {
        match (self.kind, &self.damping) {
            (MetricKind::G0, Damping::None) => "g0",
            (MetricKind::G1, Damping::None) => "g1",
            (MetricKind::G0, _) => "g0_alpha",
            (MetricKind::G1, _) => "g1_beta",
        }
    }
}

/// Compute several metrics in one pass over the quadrature nodes, sharing
/// the frame derivatives between them.
pub fn metric_batch<F: ModuliFamily + ?Sized>(
    family: &F,
    t: &[f64],
    requests: &[MetricRequest],
    spec: &QuadratureSpec,
) -> Result<Vec<MetricTensor>> {
    family.validate(t)?;
    let labels = family.labels();
    let n = labels.len();
    if t.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: t.len() });
    }
    let d = family.base_dim();
    let directions: Vec<usize> = (0..n).collect();
    let need_spatial = requests.iter().any(|r| r.damping.needs_spatial());
    let need_g0 = requests.iter().any(|r| r.kind == MetricKind::G0);
    let need_g1 = requests.iter().any(|r| r.kind == MetricKind::G1);
    let block = n * n;
    let integrand = |x: &[f64]| -> Result<Vec<f64>> {
        let jet = moduli_jet(family, t, x, &directions);
        let spatial = need_spatial.then(|| spatial_jet(family, t, x));
        let mut g0 = vec![0.0; if need_g0 { block } else { 0 }];
        let mut g1 = vec![0.0; if need_g1 { block } else { 0 }];
        if need_g0 {
            for i in 0..n {
                for j in 0..n {
                    g0[i * n + j] = trace_product(&jet.dp[i], &jet.dp[j]).re;
                }
            }
        }
        if need_g1 {
            let omega = jet.omega();
            for i in 0..n {
                for j in 0..n {
                    g1[i * n + j] = -trace_product(&omega[i], &omega[j]).re;
                }
            }
        }
        let mut out = Vec::with_capacity(block * requests.len());
        for r in requests {
            let w = damping_weight(&r.damping, spatial.as_ref().map(|j| j.dp.as_slice()));
            let src = match r.kind {
                MetricKind::G0 => &g0,
                MetricKind::G1 => &g1,
            };
            out.extend(src.iter().map(|v| w * v));
        }
        Ok(out)
    };
    let placement = family.placement(t);
    let estimate = integrate_chart_vec(integrand, block * requests.len(), d, spec, &placement)?;
    requests
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let raw = DMatrix::from_fn(n, n, |i, j| estimate.value[k * block + i * n + j]);
            let provenance = Provenance {
                metric: r.name().to_string(),
                damping: Some(r.damping.clone()),
                moduli_point: t.to_vec(),
                quadrature: Some(spec.clone()),
                asymmetry: 0.0,
                parts: vec![],
            };
            let exponent = Some(d as f64 - 2.0 - 2.0 * r.damping.length_weight());
            MetricTensor::from_raw(labels.clone(), raw, exponent, provenance)
        })
        .collect()
}

fn single<F: ModuliFamily + ?Sized>(family: &F, t: &[f64], request: MetricRequest, spec: &QuadratureSpec) -> Result<MetricTensor> {
    Ok(metric_batch(family, t, &[request], spec)?.remove(0))
}

/// `g0_ij = int Tr(d_i P d_j P)`.
pub fn g0<F: ModuliFamily + ?Sized>(family: &F, t: &[f64], spec: &QuadratureSpec) -> Result<MetricTensor> {
    single(family, t, MetricRequest::new(MetricKind::G0, Damping::None), spec)
}

/// `g1_ij = -int Tr(A_i A_j)`.
pub fn g1<F: ModuliFamily + ?Sized>(family: &F, t: &[f64], spec: &QuadratureSpec) -> Result<MetricTensor> {
    single(family, t, MetricRequest::new(MetricKind::G1, Damping::None), spec)
}

/// `g0,alpha_ij = int Phi^alpha Tr(d_i P d_j P)`.
pub fn g0_alpha<F: ModuliFamily + ?Sized>(family: &F, t: &[f64], alpha: f64, spec: &QuadratureSpec) -> Result<MetricTensor> {
    check_exponent(alpha)?;
    single(family, t, MetricRequest::new(MetricKind::G0, Damping::PhiPower { alpha }), spec)
}

/// `g1,beta_ij = -int Phi^beta Tr(A_i A_j)`.
pub fn g1_beta<F: ModuliFamily + ?Sized>(family: &F, t: &[f64], beta: f64, spec: &QuadratureSpec) -> Result<MetricTensor> {
    check_exponent(beta)?;
    single(family, t, MetricRequest::new(MetricKind::G1, Damping::PhiPower { alpha: beta }), spec)
}

/// `g0,alpha` for several exponents in one pass.
pub fn g0_alpha_sweep<F: ModuliFamily + ?Sized>(
    family: &F,
    t: &[f64],
    alphas: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<MetricTensor>> {
    for &a in alphas {
        check_exponent(a)?;
    }
    let requests: Vec<MetricRequest> = alphas
        .iter()
        .map(|&alpha| MetricRequest::new(MetricKind::G0, Damping::PhiPower { alpha }))
        .collect();
    metric_batch(family, t, &requests, spec)
}

fn check_exponent(a: f64) -> Result<()> {
    if a.is_finite() && a >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidQuadrature(format!("damping exponent must be >= 0, got {a}")))
    }
}

/// Weighted sum of metric tensors plus an eigenvalue report.
///
/// The first part fixes the moduli labels; later parts may cover any subset
/// of them and are embedded by label.
pub fn combine_metric(parts: &[(MetricTensor, f64)]) -> Result<(MetricTensor, DefinitenessReport)> {
    let (first, _) = parts
        .first()
        .ok_or_else(|| Error::IncompatibleLabels("no parts to combine".into()))?;
    let labels = first.labels.clone();
    let n = labels.len();
    let mut total = DMatrix::<f64>::zeros(n, n);
    let mut names = Vec::new();
    let mut asymmetry = 0.0_f64;
    for (metric, weight) in parts {
        let mut seen = std::collections::HashSet::new();
        let idx: Vec<usize> = metric
            .labels
            .iter()
            .map(|l| {
                if !seen.insert(l) {
                    return Err(Error::IncompatibleLabels(format!("duplicate label {l:?}")));
                }
                labels
                    .iter()
                    .position(|m| m == l)
                    .ok_or_else(|| Error::IncompatibleLabels(format!("label {l:?} not in {labels:?}")))
            })
            .collect::<Result<_>>()?;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                total[(i, j)] += weight * metric.entries[a][b];
            }
        }
        names.push((metric.provenance.metric.clone(), *weight));
        asymmetry = asymmetry.max(metric.provenance.asymmetry);
    }
    let exponent = first.exponent.filter(|e| parts.iter().all(|(m, _)| m.exponent == Some(*e)));
    let provenance = Provenance {
        metric: "combined".into(),
        damping: None,
        moduli_point: first.provenance.moduli_point.clone(),
        quadrature: first.provenance.quadrature.clone(),
        asymmetry,
        parts: names,
    };
    let metric = MetricTensor::from_raw(labels, total, exponent, provenance)?;
    let report = metric.definiteness();
    Ok((metric, report))
}

/// Defects of the projector lemma along a family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaDefects {
    /// `max |d_i P|`.
    pub projector: f64,
    /// `max |d_i A_mu - (d_mu A_i + [A_mu, A_i])|` in the anti-Hermitian convention.
    pub connection: f64,
}

/// Checks `d_i A = d_A A_i` at the sample points for the moduli `directions`.
pub fn check_projector_lemma<F: ModuliFamily + ?Sized>(
    family: &F,
    t: &[f64],
    points: &[Vec<f64>],
    directions: &[usize],
) -> LemmaDefects {
    let mut projector = 0.0_f64;
    let mut connection = 0.0_f64;
    for x in points {
        let jet = moduli_jet(family, t, x, directions);
        let omega_i = jet.omega();
        let omega_mu = spatial_jet(family, t, x).omega();
        for (k, &i) in directions.iter().enumerate() {
            projector = projector.max(max_abs(&jet.dp[k]));
            let ht = family.moduli_step(t, x, i);
            let hx = family.spatial_step(t, x);
            // d_i A_mu
            let samples = RICHARDSON_STENCIL.map(|(o, _)| {
                let mut tt = t.to_vec();
                tt[i] += o * ht;
                spatial_jet(family, &tt, x).omega()
            });
            let d_i_a: Vec<ComplexMatrix> = richardson_combine(&samples, ht);
            for mu in 0..x.len() {
                // d_mu A_i
                let samples = RICHARDSON_STENCIL.map(|(o, _)| {
                    let mut xx = x.clone();
                    xx[mu] += o * hx;
                    moduli_jet(family, t, &xx, &[i]).omega().remove(0)
                });
                let d_mu_ai = richardson_combine(&samples, hx);
                let covariant = d_mu_ai + commutator(&omega_mu[mu], &omega_i[k]);
                connection = connection.max(max_abs_diff(&d_i_a[mu], &covariant));
            }
        }
    }
    LemmaDefects { projector, connection }
}

/// Measured exponent `e` of `g_entry(rho) ~ rho^e` from two scales.
pub fn metric_scaling_exponent<F, T>(
    family: &F,
    moduli_at: T,
    entry: (usize, usize),
    alpha: f64,
    rho: (f64, f64),
    spec: &QuadratureSpec,
) -> Result<f64>
where
    F: ModuliFamily + ?Sized,
    T: Fn(f64) -> Vec<f64>,
{
    let (r1, r2) = rho;
    if r1 == r2 {
        return Err(Error::InvalidQuadrature("scaling exponent needs two distinct scales".into()));
    }
    let g1 = g0_alpha(family, &moduli_at(r1), alpha, spec)?;
    let g2 = g0_alpha(family, &moduli_at(r2), alpha, spec)?;
    Ok((g2.get(entry.0, entry.1) / g1.get(entry.0, entry.1)).ln() / (r2 / r1).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adhm::{closed_form_a, closed_form_b, AdhmFamily, RigidGaugeFamily};
    use crate::algebra::{c, haar_frame, su2_exp};
    use crate::calculus::{Chart, Placement};
    use crate::family::{ConstantFamily, GaugeOrbitFamily, StackedFamily};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const ADHM_T: [f64; 5] = [0.0, 0.0, 0.0, 0.0, 1.0];

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn undamped_adhm_metric_diverges() {
        let err = g0(&AdhmFamily, &ADHM_T, &QuadratureSpec::radial(200)).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)), "{err:?}");
    }

    #[test]
    fn alpha_two_adhm_metric() {
        let g = g0_alpha(&AdhmFamily, &ADHM_T, 2.0, &QuadratureSpec::radial(200)).unwrap();
        let expected = 256.0 * PI * PI / 5.0;
        for mu in 0..4 {
            assert!(rel(g.get(mu, mu), expected) < 1e-6);
            assert!(g.get(4, mu).abs() < 1e-8 * expected);
            for nu in 0..mu {
                assert!(g.get(mu, nu).abs() < 1e-8 * expected);
            }
        }
        assert!(rel(g.get(4, 4) / g.get(0, 0), 2.0 / 3.0) < 1e-6);
        assert_eq!(g.exponent, Some(-2.0));
    }

    #[test]
    fn alpha_one_is_proportional_to_flat_metric() {
        let g = g0_alpha(&AdhmFamily, &ADHM_T, 1.0, &QuadratureSpec::radial(200)).unwrap();
        assert!(rel(g.get(0, 0), closed_form_a(1.0).unwrap()) < 1e-6);
        assert!(rel(g.get(4, 4) / g.get(0, 0), closed_form_b(1.0).unwrap()) < 1e-6);
        let shifted = g0_alpha(&AdhmFamily, &[1.0, -2.0, 0.5, 3.0, 1.0], 1.0, &QuadratureSpec::radial(200)).unwrap();
        assert!(rel(shifted.get(0, 0), g.get(0, 0)) < 1e-9);
    }

    #[test]
    fn scaling_exponents() {
        let spec = QuadratureSpec::radial(200);
        for (alpha, expected) in [(2.0, -2.0), (1.0, 0.0), (3.0, -4.0)] {
            let e = metric_scaling_exponent(&AdhmFamily, |r| vec![0.0, 0.0, 0.0, 0.0, r], (0, 0), alpha, (1.0, 2.0), &spec)
                .unwrap();
            assert!((e - expected).abs() < 1e-3, "alpha {alpha}: {e}");
        }
    }

    #[test]
    fn phi_identity_via_frame_derivatives() {
        let t = [0.2, -0.1, 0.3, 0.0, 0.9];
        for x in [[0.5, 0.1, -0.4, 0.2], [1.5, -2.0, 0.3, 0.7], [0.0, 0.0, 0.0, 0.0]] {
            let jet = spatial_jet(&AdhmFamily, &t, &x);
            let omega = jet.omega();
            let via_frame: f64 = (0..4)
                .map(|mu| 2.0 * trace_product(&jet.du[mu].adjoint(), &jet.du[mu]).re + 2.0 * trace_product(&omega[mu], &omega[mu]).re)
                .sum();
            let phi = phi_at(&AdhmFamily, &t, &x);
            assert!((phi - via_frame).abs() < 1e-8);
            assert!(phi >= 0.0);
        }
        let phi = phi_field(&AdhmFamily, &ADHM_T);
        assert!((phi(&[0.0; 4]) - 16.0).abs() < 1e-8);
    }

    #[test]
    fn constant_frames_have_no_damping() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let family = ConstantFamily {
            frame: haar_frame(4, 2, &mut rng).into_inner(),
            moduli: 2,
            dim: 4,
        };
        let t = [0.0, 0.0];
        assert!(phi_field(&family, &t)(&[0.3, 0.2, 0.1, 0.0]).abs() < 1e-20);
        for e in [vec![1], vec![2, 3]] {
            let e = DampingExponents::new(e).unwrap();
            assert!(damping_factor(&family, &t, &e)(&[0.3, 0.2, 0.1, 0.0]).abs() < 1e-20);
        }
    }

    #[test]
    fn damping_factor_reduces_to_phi_and_obeys_trace_inequality() {
        let one = DampingExponents::new(vec![1]).unwrap();
        let two = DampingExponents::new(vec![2]).unwrap();
        let f1 = damping_factor(&AdhmFamily, &ADHM_T, &one);
        let f2 = damping_factor(&AdhmFamily, &ADHM_T, &two);
        assert!((f1(&[0.0; 4]) - 16.0).abs() < 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        use rand::Rng;
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let phi = phi_at(&AdhmFamily, &ADHM_T, &x);
            assert!((f1(&x) - phi).abs() < 1e-12 * phi.max(1.0));
            assert!(f2(&x) <= f1(&x).powi(2) * (1.0 + 1e-12));
            assert!(f2(&x) >= 0.0);
        }
        assert!(DampingExponents::new(vec![0, 1]).is_err());
    }

    #[test]
    fn gauge_orbit_has_vanishing_g0() {
        let t0 = ADHM_T;
        let family = GaugeOrbitFamily {
            base: move |x: &[f64]| crate::adhm::adhm_frame_raw(x, &t0),
            gauge: |t: &[f64], _x: &[f64]| su2_exp([0.0, 0.0, t[0]]),
            labels: vec!["s".into()],
            dim: 4,
            shape: (4, 2),
            placement: Placement::origin(4),
        };
        let g = g0(&family, &[0.3], &QuadratureSpec::tensor(8, Chart::Box(2.0))).unwrap();
        assert!(g.get(0, 0).abs() < 1e-12, "{}", g.get(0, 0));
        let g = g1(&family, &[0.3], &QuadratureSpec::tensor(8, Chart::Box(2.0))).unwrap();
        // -Tr((i tau3/2)^2) = 1/2 over a box of volume 256.
        assert!(rel(g.get(0, 0), 128.0) < 1e-9);
    }

    #[test]
    fn stacking_preserves_metrics() {
        let stacked = StackedFamily { inner: RigidGaugeFamily, copies: 3 };
        let t = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let spec = QuadratureSpec::radial(64);
        let requests = [
            MetricRequest::new(MetricKind::G0, Damping::PhiPower { alpha: 2.0 }),
            MetricRequest::new(MetricKind::G1, Damping::PhiPower { alpha: 2.0 }),
        ];
        let base = metric_batch(&RigidGaugeFamily, &t, &requests, &spec).unwrap();
        let big = metric_batch(&stacked, &t, &requests, &spec).unwrap();
        for (a, b) in base.iter().zip(&big) {
            let scale = a.matrix().abs().max();
            assert!((a.matrix() - b.matrix()).abs().max() < 1e-12 * scale);
        }
    }

    #[test]
    fn rigid_gauge_metric_and_combination() {
        let t = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let spec = QuadratureSpec::radial(200);
        let requests = [
            MetricRequest::new(MetricKind::G0, Damping::PhiPower { alpha: 2.0 }),
            MetricRequest::new(MetricKind::G1, Damping::PhiPower { alpha: 2.0 }),
        ];
        let out = metric_batch(&RigidGaugeFamily, &t, &requests, &spec).unwrap();
        let phi_sq = 128.0 * PI * PI / 3.0;
        for a in 5..8 {
            assert!(rel(out[1].get(a, a), 0.5 * phi_sq) < 1e-6);
            assert!(out[0].get(a, a).abs() < 1e-8);
            for b in 5..a {
                assert!(out[1].get(a, b).abs() < 1e-8 * phi_sq);
            }
        }
        let rigid = out[1].restrict(&["s1", "s2", "s3"]).unwrap();
        let (_, report) = combine_metric(&[(out[0].clone(), 1.0), (rigid.clone(), 1.0)]).unwrap();
        assert!(report.positive_definite && report.min_eigenvalue > 0.0);
        let (_, report) = combine_metric(&[(out[0].clone(), 1.0), (rigid, 0.0)]).unwrap();
        assert!(!report.positive_definite);
        let mut flagged: Vec<String> = report.degenerate_directions.iter().flat_map(|d| d.labels.clone()).collect();
        flagged.sort();
        flagged.dedup();
        assert_eq!(flagged, vec!["s1", "s2", "s3"]);
    }

    #[test]
    fn undamped_rigid_g1_diverges() {
        let t = [0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let err = g1(&RigidGaugeFamily, &t, &QuadratureSpec::radial(64)).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    #[test]
    fn combine_single_part_is_identity() {
        let g = g0_alpha(&AdhmFamily, &ADHM_T, 2.0, &QuadratureSpec::radial(64)).unwrap();
        let (sum, report) = combine_metric(&[(g.clone(), 1.0)]).unwrap();
        assert_eq!(sum.entries, g.entries);
        assert!(report.positive_definite);
        let other = MetricTensor {
            labels: vec!["zeta".into()],
            entries: vec![vec![1.0]],
            exponent: None,
            provenance: g.provenance.clone(),
        };
        assert!(matches!(combine_metric(&[(g, 1.0), (other, 1.0)]), Err(Error::IncompatibleLabels(_))));
    }

    #[test]
    fn projector_lemma_on_rigid_orbit() {
        let t0 = ADHM_T;
        let rigid = GaugeOrbitFamily {
            base: move |x: &[f64]| crate::adhm::adhm_frame_raw(x, &t0),
            gauge: |t: &[f64], _x: &[f64]| su2_exp([0.0, 0.0, t[0]]),
            labels: vec!["s".into()],
            dim: 4,
            shape: (4, 2),
            placement: Placement::origin(4),
        };
        let points = vec![vec![0.3, -0.2, 0.5, 0.1], vec![1.2, 0.4, -0.7, 0.9]];
        let d = check_projector_lemma(&rigid, &[0.4], &points, &[0]);
        assert!(d.projector < 1e-7 && d.connection < 1e-7, "{d:?}");
        let local = GaugeOrbitFamily {
            base: move |x: &[f64]| crate::adhm::adhm_frame_raw(x, &t0),
            gauge: |t: &[f64], x: &[f64]| {
                let f = (-(x[0] * x[0] + x[1] * x[1])).exp() * (1.0 + x[2]);
                su2_exp([0.0, 0.0, 2.0 * t[0] * f])
            },
            labels: vec!["s".into()],
            dim: 4,
            shape: (4, 2),
            placement: Placement::origin(4),
        };
        let d = check_projector_lemma(&local, &[0.4], &points, &[0]);
        assert!(d.projector < 1e-7 && d.connection < 1e-6, "{d:?}");
        let _ = c(0.0, 0.0);
    }

    #[test]
    fn metric_json_shape() {
        let g = g0_alpha(&AdhmFamily, &ADHM_T, 2.0, &QuadratureSpec::radial(16)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&g).unwrap();
        for key in ["labels", "entries", "exponent", "provenance"] {
            assert!(v.get(key).is_some());
        }
        let back: MetricTensor = serde_json::from_value(v).unwrap();
        assert_eq!(back, g);
        assert_eq!(g.to_csv().lines().count(), 26);
    }
}
