//! Named verification suites over the invariants of every module.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::abelian::{abelian_angles, bump, bump_derivative, reconstruction_order, AbelianProfiles, SampleSpec};
use crate::adhm::{
    adhm_frame_raw, adhm_traces, phi_adhm, self_duality_defect, thooft_connection, thooft_connection_with, AdhmFamily,
    ModuliPoint, RigidGaugeFamily,
};
use crate::algebra::{haar_frame, identity, max_abs_diff, orthonormality_defect, projector_defects, su2_exp, EtaSymbol};
use crate::calculus::{Chart, Placement, QuadratureSpec};
use crate::error::{Error, Result};
use crate::family::{moduli_jet, spatial_jet, GaugeOrbitFamily, StackedFamily};
use crate::metrics::{check_projector_lemma, metric_batch, metric_scaling_exponent, phi_at, Damping, MetricKind, MetricRequest};
use crate::nr::{chart_grid, check_isotropy, check_nonequivariance, instanton_lambda, nr_blocks, NrFrameField, NrInstantonFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Frames,
    AdhmConnection,
    NrIsotropy,
    NrNonequivariance,
    AbelianReconstruction,
    ProjectorLemma,
    Stacking,
    ScalingExponent,
    All,
}

impl Suite {
    pub const EACH: [Suite; 8] = [
        Suite::Frames,
        Suite::AdhmConnection,
        Suite::NrIsotropy,
        Suite::NrNonequivariance,
        Suite::AbelianReconstruction,
        Suite::ProjectorLemma,
        Suite::Stacking,
        Suite::ScalingExponent,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Frames => "frames",
            Suite::AdhmConnection => "adhm-connection",
            Suite::NrIsotropy => "nr-isotropy",
            Suite::NrNonequivariance => "nr-nonequivariance",
            Suite::AbelianReconstruction => "abelian-reconstruction",
            Suite::ProjectorLemma => "projector-lemma",
            Suite::Stacking => "stacking",
            Suite::ScalingExponent => "scaling-exponent",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .iter()
            .chain(std::iter::once(&Suite::All))
            .find(|x| x.name() == s)
            .copied()
            .ok_or_else(|| Error::InvalidQuadrature(format!("unknown suite {s:?}")))
    }
}

/// Direction of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

/// One measured invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub measured: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::Below => "<",
            Bound::Above => ">",
        };
        write!(
            f,
            "{} {}: {} = {:.3e} ({} {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.measured,
            op,
            self.tolerance
        )
    }
}

/// Settings shared by all suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Replaces every upper-bound tolerance when set.
    pub tol: Option<f64>,
    #[serde(skip)]
    pub eta: EtaSymbol,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 20240917,
            tol: None,
            eta: EtaSymbol::self_dual(),
        }
    }
}

struct Recorder<'a> {
    suite: Suite,
    opts: &'a VerifyOptions,
    out: Vec<Check>,
}

impl Recorder<'_> {
    fn below(&mut self, name: &str, measured: f64, tolerance: f64) {
        let tolerance = self.opts.tol.unwrap_or(tolerance);
        self.push(name, measured, Bound::Below, tolerance, measured < tolerance);
    }

    fn above(&mut self, name: &str, measured: f64, tolerance: f64) {
        self.push(name, measured, Bound::Above, tolerance, measured > tolerance);
    }

    fn push(&mut self, name: &str, measured: f64, bound: Bound, tolerance: f64, ok: bool) {
        self.out.push(Check {
            suite: self.suite,
            name: name.to_string(),
            measured,
            bound,
            tolerance,
            passed: ok && measured.is_finite(),
        });
    }
}

fn cloud(rng: &mut ChaCha8Rng, count: usize, half: f64) -> Vec<[f64; 4]> {
    (0..count).map(|_| std::array::from_fn(|_| rng.gen_range(-half..half))).collect()
}

/// Runs a suite (or all of them).
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<Check>> {
    if suite == Suite::All {
        let mut out = Vec::new();
        for s in Suite::EACH {
            out.extend(run_suite(s, opts)?);
        }
        return Ok(out);
    }
    let mut rec = Recorder {
        suite,
        opts,
        out: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ suite as u64);
    match suite {
        Suite::Frames => frames(&mut rec, &mut rng)?,
        Suite::AdhmConnection => adhm_connection(&mut rec, &mut rng)?,
        Suite::NrIsotropy => nr_isotropy(&mut rec, &mut rng)?,
        Suite::NrNonequivariance => nr_nonequivariance(&mut rec)?,
        Suite::AbelianReconstruction => abelian(&mut rec, &mut rng)?,
        Suite::ProjectorLemma => projector_lemma(&mut rec, &mut rng),
        Suite::Stacking => stacking(&mut rec)?,
        Suite::ScalingExponent => scaling(&mut rec)?,
        Suite::All => unreachable!(),
    }
    Ok(rec.out)
}

fn frames(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut ortho = 0.0_f64;
    let mut proj = 0.0_f64;
    for _ in 0..100 {
        let m = rng.gen_range(2..9);
        let n = rng.gen_range(1..=m);
        let u = haar_frame(m, n, rng);
        ortho = ortho.max(orthonormality_defect(u.matrix()));
        let (a, b, c) = projector_defects(&u.projector());
        proj = proj.max(a.max(b).max((c - n as f64).abs()));
    }
    rec.below("Haar frame U^dagger U - I", ortho, 1e-12);
    rec.below("Haar projector P^2 - P, P - P^dagger, Tr P - n", proj, 1e-12);
    let mut adhm = 0.0_f64;
    for x in cloud(rng, 1000, 3.0) {
        let t = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0, 0.5, rng.gen_range(0.3..2.0)];
        adhm = adhm.max(orthonormality_defect(&adhm_frame_raw(&x, &t)));
    }
    rec.below("ADHM frame U^dagger U - I", adhm, 1e-12);
    Ok(())
}

fn adhm_connection(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let eta = rec.opts.eta;
    let mut conn = 0.0_f64;
    let mut dual = 0.0_f64;
    let mut traces = 0.0_f64;
    let mut phi = 0.0_f64;
    for x in cloud(rng, 100, 3.0) {
        let t = ModuliPoint::new(
            [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
            rng.gen_range(0.5..2.0),
        )?;
        let tv = t.to_vec();
        let a = spatial_jet(&AdhmFamily, &tv, &x).hermitian_connection();
        let reference = thooft_connection_with(&eta, &x, &t)?;
        for mu in 0..4 {
            conn = conn.max(max_abs_diff(&a[mu], &reference[mu]));
        }
        dual = dual.max(self_duality_defect(&eta, &x, &t)?);
        let jet = moduli_jet(&AdhmFamily, &tv, &x, &[0, 1, 2, 3, 4]);
        let closed = adhm_traces(&x, &t)?;
        for i in 0..5 {
            for j in 0..5 {
                let fd = crate::algebra::trace_product(&jet.dp[i], &jet.dp[j]).re;
                traces = traces.max((fd - closed[(i, j)]).abs());
            }
        }
        phi = phi.max((phi_at(&AdhmFamily, &tv, &x) - phi_adhm(&x, &t)?).abs());
    }
    rec.below("max |i U^dagger dU - A('t Hooft)|", conn, 5e-7);
    rec.below("self-duality defect |F - *F|", dual, 1e-5);
    rec.below("closed-form Tr(d_i P d_j P) vs differences", traces, 1e-6);
    rec.below("closed-form Phi vs differences", phi, 1e-6);
    Ok(())
}

fn nr_isotropy(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    let family = NrInstantonFamily::fit(5.0, 0.5)?;
    let t = [0.3, -0.2, 0.1, 0.0, 1.1];
    let points: Vec<Vec<f64>> = cloud(rng, 50, 5.0).iter().map(|x| x.to_vec()).collect();
    rec.below("isotropy max |U^dagger d_i U| (a1, rho)", check_isotropy(&family, &t, &points, &[0, 4]), 1e-8);
    let basis = family.spec.basis().clone();
    let field = NrFrameField {
        lambda: move |x: &[f64]| instanton_lambda(x, &t, &basis),
        spec: family.spec.clone(),
    };
    let mut unit = 0.0_f64;
    let mut recon = 0.0_f64;
    let mut real = 0.0_f64;
    for x in &points {
        unit = unit.max(orthonormality_defect(&field.frame(x)?));
        recon = recon.max(field.reconstruction_error(x)?);
        real = real.max(nr_blocks(&(field.lambda)(x)?, &field.spec)?.real_part_defect(field.spec.basis()));
    }
    rec.below("NR frame U^dagger U - I", unit, 1e-12);
    rec.below("NR reconstruction |i U^dagger dU - sum lambda f|", recon, 1e-5);
    rec.below("real-part cancellation", real, 1e-14);
    Ok(())
}

fn nr_nonequivariance(rec: &mut Recorder) -> Result<()> {
    let family = NrInstantonFamily::fit(5.0, 0.5)?;
    let point = ModuliPoint::new([0.0; 4], 1.0)?;
    let a = |x: &[f64]| thooft_connection(&[x[0], x[1], x[2], x[3]], &point).expect("valid scale").to_vec();
    let g = |_: &[f64]| su2_exp([0.0, 0.0, 1.0]);
    let coarse = check_nonequivariance(a, g, &family.spec, &chart_grid(4, 2.0, 5))?;
    let fine = check_nonequivariance(a, g, &family.spec, &chart_grid(4, 2.0, 9))?;
    let trivial = check_nonequivariance(a, |_: &[f64]| identity(2), &family.spec, &chart_grid(4, 2.0, 5))?;
    rec.above("non-equivariance |U(A^g) - U(A) g|, g = exp(i tau3/2)", fine, 0.1);
    rec.below("refinement change of the defect", (fine - coarse).abs(), 1e-3);
    rec.below("defect for g = identity", trivial, 1e-12);
    Ok(())
}

fn abelian(rec: &mut Recorder, rng: &mut ChaCha8Rng) -> Result<()> {
    for dim in [2, 3] {
        let field = SampleSpec::bundled(dim)?.sample()?;
        let est = reconstruction_order(&field, &AbelianProfiles::default_for(dim)?)?;
        rec.below(&format!("d = {dim} convergence order |p - 2|"), (est.order - 2.0).abs(), 0.2);
    }
    let profiles = AbelianProfiles::default_for(3)?;
    let mut unit = 0.0_f64;
    for _ in 0..100_000 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let theta = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let u = crate::abelian::abelian_frame_at(&profiles, &x, &theta, rng.gen_range(-10.0..10.0))?;
        unit = unit.max(orthonormality_defect(&u));
    }
    rec.below("unit-norm defect", unit, 1e-14);
    let w = 1.5;
    let dchi = move |x: &[f64]| -> Vec<f64> {
        (0..3)
            .map(|mu| {
                (0..3)
                    .map(|nu| if nu == mu { bump_derivative(x[nu] / w) / w } else { bump(x[nu] / w) })
                    .product()
            })
            .collect()
    };
    let angles = abelian_angles(dchi, profiles, 2.5);
    let mut theta = 0.0_f64;
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        theta = angles.theta(&x).iter().fold(theta, |m, t| m.max(t.abs()));
    }
    rec.below("exact form: max |theta_i|", theta, 1e-10);
    Ok(())
}

fn projector_lemma(rec: &mut Recorder, rng: &mut ChaCha8Rng) {
    let t0 = [0.0, 0.0, 0.0, 0.0, 1.0];
    let points: Vec<Vec<f64>> = cloud(rng, 10, 2.0).iter().map(|x| x.to_vec()).collect();
    let rigid = GaugeOrbitFamily {
        base: move |x: &[f64]| adhm_frame_raw(x, &t0),
        gauge: |t: &[f64], _x: &[f64]| su2_exp([0.0, 0.0, t[0]]),
        labels: vec!["s".into()],
        dim: 4,
        shape: (4, 2),
        placement: Placement::origin(4),
    };
    let d = check_projector_lemma(&rigid, &[0.4], &points, &[0]);
    rec.below("rigid orbit max |d_i P|", d.projector, 1e-7);
    rec.below("rigid orbit max |d_i A - d_A A_i|", d.connection, 1e-7);
    let local = GaugeOrbitFamily {
        base: move |x: &[f64]| adhm_frame_raw(x, &t0),
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
    rec.below("x-dependent orbit max |d_i P|", d.projector, 1e-7);
    rec.below("x-dependent orbit max |d_i A - d_A A_i|", d.connection, 1e-6);
}

/// Largest relative entry difference between the four metrics of `U` and of
/// `(U; U; U)/sqrt(3)` on the rigid-gauge family.
pub fn stacking_defect(copies: usize) -> Result<f64> {
    let stacked = StackedFamily {
        inner: RigidGaugeFamily,
        copies,
    };
    let t = [0.1, 0.0, -0.2, 0.0, 1.0, 0.3, 0.0, 0.0];
    let damped = [
        MetricRequest::new(MetricKind::G0, Damping::PhiPower { alpha: 2.0 }),
        MetricRequest::new(MetricKind::G1, Damping::PhiPower { alpha: 2.0 }),
    ];
    let undamped = [
        MetricRequest::new(MetricKind::G0, Damping::None),
        MetricRequest::new(MetricKind::G1, Damping::None),
    ];
    let radial = QuadratureSpec::radial(64);
    let boxed = QuadratureSpec::tensor(8, Chart::Box(3.0));
    let mut worst = 0.0_f64;
    for (requests, spec) in [(&damped, &radial), (&undamped, &boxed)] {
        let base = metric_batch(&RigidGaugeFamily, &t, requests, spec)?;
        let big = metric_batch(&stacked, &t, requests, spec)?;
        for (a, b) in base.iter().zip(&big) {
            let scale = a.matrix().abs().max();
            worst = worst.max((a.matrix() - b.matrix()).abs().max() / scale);
        }
    }
    Ok(worst)
}

fn stacking(rec: &mut Recorder) -> Result<()> {
    rec.below("N = 3 stacked metrics, max relative difference", stacking_defect(3)?, 1e-12);
    Ok(())
}

fn scaling(rec: &mut Recorder) -> Result<()> {
    let spec = QuadratureSpec::radial(200);
    for alpha in [1.0, 2.0, 3.0] {
        let e = metric_scaling_exponent(&AdhmFamily, |r| vec![0.0, 0.0, 0.0, 0.0, r], (0, 0), alpha, (1.0, 2.0), &spec)?;
        rec.below(&format!("alpha = {alpha}: |e - (2 - 2 alpha)|"), (e - (2.0 - 2.0 * alpha)).abs(), 1e-3);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn adhm_suite_passes_and_broken_eta_fails() {
        let ok = run_suite(Suite::AdhmConnection, &VerifyOptions::default()).unwrap();
        assert!(ok.iter().all(|c| c.passed), "{ok:?}");
        let broken = VerifyOptions {
            eta: EtaSymbol::anti_self_dual(),
            ..VerifyOptions::default()
        };
        let bad = run_suite(Suite::AdhmConnection, &broken).unwrap();
        let dual = bad.iter().find(|c| c.name.contains("self-duality")).unwrap();
        assert!(!dual.passed && dual.measured > 0.1);
    }

    #[test]
    fn tolerance_override_applies_to_upper_bounds() {
        let opts = VerifyOptions {
            tol: Some(1e-30),
            ..VerifyOptions::default()
        };
        let out = run_suite(Suite::ScalingExponent, &opts).unwrap();
        assert!(out.iter().all(|c| c.tolerance == 1e-30 && c.passed == (c.measured < 1e-30)), "{out:?}");
    }
}
