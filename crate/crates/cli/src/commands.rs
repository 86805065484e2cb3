use std::fs;

use serde_json::{json, Map, Value};

use unimetric::abelian::{reconstruct_grid, reconstruction_order, AbelianProfiles, FrameGrid, GridField, SampleSpec};
use unimetric::adhm::{closed_form_a, closed_form_b, AdhmFamily, RigidGaugeFamily};
use unimetric::algebra::{orthonormality_defect, EtaSymbol, HermitianBasis};
use unimetric::calculus::QuadratureSpec;
use unimetric::family::ModuliFamily;
use unimetric::metrics::{metric_batch, Damping, MetricKind, MetricRequest, MetricTensor};
use unimetric::nr::{nr_frame_raw, NrFrameField, NrInstantonFamily, NrSpec};
use unimetric::verify::{run_suite, Check, Suite, VerifyOptions};
use unimetric::Error;

use crate::config::{Cli, CliError, Command, Eta, Family, MetricArgs, ReconstructArgs, Recipe, SampleArgs, VerifyArgs};
use crate::output::{emit, header, render, Cell, Table};

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.command.clone();
    match cli.command {
        Command::Metric(args) => metric(&args, &config),
        Command::Verify(args) => verify(&args, &config),
        Command::Reconstruct(args) => reconstruct(&args, &config),
        Command::Sample(args) => sample(&args, &config),
    }
}

fn requests(args: &MetricArgs) -> Vec<MetricRequest> {
    let g0 = args.alpha.iter().map(|&alpha| MetricRequest::new(MetricKind::G0, Damping::PhiPower { alpha }));
    let g1 = args.beta.iter().map(|&alpha| MetricRequest::new(MetricKind::G1, Damping::PhiPower { alpha }));
    g0.chain(g1).collect()
}

fn exponent(r: &MetricRequest) -> f64 {
    match r.damping {
        Damping::PhiPower { alpha } => alpha,
        _ => 0.0,
    }
}

/// Integrates, turning a divergence below the convergence threshold into
/// a message that names it.
fn batch<F: ModuliFamily>(family: &F, t: &[f64], reqs: &[MetricRequest], spec: &QuadratureSpec) -> Result<Vec<MetricTensor>, CliError> {
    metric_batch(family, t, reqs, spec).map_err(|e| match e {
        Error::Divergence(_) => match reqs.iter().map(exponent).find(|&a| a <= 0.5) {
            Some(a) => CliError::Numeric(format!("{e}; convergence requires exponents > 1/2, got {a}")),
            None => e.into(),
        },
        e => e.into(),
    })
}

fn metric(args: &MetricArgs, config: &Command) -> Result<(), CliError> {
    args.validate()?;
    let spec = args.quadrature()?;
    let centre = args.centre()?;
    let reqs = requests(args);
    let table = match args.family {
        Family::Adhm => adhm_table(args, &reqs, &spec, centre)?,
        Family::RigidGauge => {
            let t = |rho: f64| [centre.to_vec(), vec![rho, 0.0, 0.0, 0.0]].concat();
            tensor_table(&RigidGaugeFamily, args, &reqs, &spec, t)?
        }
        Family::Nr => {
            let l = args
                .half_width
                .ok_or_else(|| CliError::Config("the NR family needs a box chart; pass --L".into()))?;
            let rho_min = args.rho.iter().copied().fold(f64::INFINITY, f64::min);
            let family = NrInstantonFamily::fit(l, rho_min)?;
            tensor_table(&family, args, &reqs, &spec, |rho| [centre.to_vec(), vec![rho]].concat())?
        }
        Family::Abelian => unreachable!("rejected by validation"),
    };
    emit(&render(&table, args.format, config), args.out.as_deref())?;
    if let Some(tol) = args.tol {
        let bad = table
            .rows
            .iter()
            .flat_map(|r| [&r[7], &r[8]])
            .filter(|c| matches!(c, Cell::Num(v) if !(*v < tol)))
            .count();
        if bad > 0 {
            eprintln!("{bad} relative error(s) above {tol:e}");
            return Err(CliError::VerifyFailed(bad));
        }
    }
    Ok(())
}

fn adhm_table(args: &MetricArgs, reqs: &[MetricRequest], spec: &QuadratureSpec, centre: [f64; 4]) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for &rho in &args.rho {
        let t = |r: f64| [centre.to_vec(), vec![r]].concat();
        let here = batch(&AdhmFamily, &t(rho), reqs, spec)?;
        let twice = batch(&AdhmFamily, &t(2.0 * rho), reqs, spec)?;
        for ((req, g), g2) in reqs.iter().zip(&here).zip(&twice) {
            let alpha = exponent(req);
            let (g_aa, g_rr) = (g.get(0, 0), g.get(4, 4));
            let (a, b) = match req.kind {
                MetricKind::G0 if alpha > 0.5 => (closed_form_a(alpha)?, closed_form_b(alpha)?),
                _ => (f64::NAN, f64::NAN),
            };
            let expected = a * rho.powf(2.0 - 2.0 * alpha);
            rows.push(vec![
                Cell::Num(alpha),
                Cell::Num(rho),
                Cell::Num(g_aa),
                Cell::Num(g_rr),
                Cell::Num(a),
                Cell::Num(b),
                Cell::Num((g_aa - expected).abs() / expected),
                Cell::Num((g_rr / g_aa - b).abs() / b),
                Cell::Num((g2.get(0, 0) / g_aa).log2()),
                Cell::Text(req.name().to_string()),
            ]);
        }
    }
    Ok(Table {
        columns: vec![
            "alpha",
            "rho",
            "g_aa",
            "g_rhorho",
            "closedform_A",
            "closedform_B",
            "rel_err_A",
            "rel_err_B",
            "measured_exponent",
            "metric",
        ],
        rows,
    })
}

fn tensor_table<F: ModuliFamily>(
    family: &F,
    args: &MetricArgs,
    reqs: &[MetricRequest],
    spec: &QuadratureSpec,
    moduli: impl Fn(f64) -> Vec<f64>,
) -> Result<Table, CliError> {
    let mut rows = Vec::new();
    for &rho in &args.rho {
        for (req, g) in reqs.iter().zip(batch(family, &moduli(rho), reqs, spec)?) {
            for i in 0..g.dim() {
                for j in i..g.dim() {
                    rows.push(vec![
                        Cell::Num(exponent(req)),
                        Cell::Num(rho),
                        Cell::Text(g.labels[i].clone()),
                        Cell::Text(g.labels[j].clone()),
                        Cell::Num(g.get(i, j)),
                        Cell::Text(req.name().to_string()),
                    ]);
                }
            }
        }
    }
    Ok(Table {
        columns: vec!["alpha", "rho", "label_i", "label_j", "value", "metric"],
        rows,
    })
}

fn verify(args: &VerifyArgs, config: &Command) -> Result<(), CliError> {
    let suite: Suite = args.suite.parse().map_err(|e: Error| CliError::Config(e.to_string()))?;
    if let Some(t) = args.tol {
        if !(t > 0.0) {
            return Err(CliError::Config(format!("--tol must be positive, got {t}")));
        }
    }
    let opts = VerifyOptions {
        seed: args.seed,
        tol: args.tol,
        eta: match args.eta {
            Eta::SelfDual => EtaSymbol::self_dual(),
            Eta::AntiSelfDual => EtaSymbol::anti_self_dual(),
        },
    };
    let checks = run_suite(suite, &opts)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    let text = match args.format {
        None => {
            let mut s: String = checks.iter().map(|c| format!("{c}\n")).collect();
            s.push_str(&format!("{} of {} checks passed\n", checks.len() - failed, checks.len()));
            s
        }
        Some(format) => render(&check_table(&checks), format, config),
    };
    emit(&text, args.out.as_deref())?;
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}

fn check_table(checks: &[Check]) -> Table {
    Table {
        columns: vec!["suite", "name", "measured", "bound", "tolerance", "passed"],
        rows: checks
            .iter()
            .map(|c| {
                vec![
                    Cell::Text(c.suite.to_string()),
                    Cell::Text(c.name.replace(',', ";")),
                    Cell::Num(c.measured),
                    Cell::Text(serde_json::to_value(c.bound).unwrap().as_str().unwrap().to_string()),
                    Cell::Num(c.tolerance),
                    Cell::Text(c.passed.to_string()),
                ]
            })
            .collect(),
    }
}

fn read_field(args: &ReconstructArgs) -> Result<GridField, CliError> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.input.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{} does not match the grid schema: {e}", args.input.display())))
}

struct Summary {
    max_error: f64,
    order: Option<f64>,
    error_coarse: Option<f64>,
    unitarity: f64,
}

fn reconstruct(args: &ReconstructArgs, config: &Command) -> Result<(), CliError> {
    let field = read_field(args)?;
    field.check_margin()?;
    let (frame, summary) = match args.recipe {
        Recipe::Abelian => abelian_recipe(&field)?,
        Recipe::Nr => nr_recipe(&field)?,
    };
    let mut doc = header(config);
    doc.insert(
        "summary".into(),
        json!({
            "max_error": summary.max_error,
            "order": summary.order,
            "error_coarse": summary.error_coarse,
            "unitarity_defect": summary.unitarity,
        }),
    );
    merge(&mut doc, serde_json::to_value(&frame).expect("frame serializes"));
    let mut text = serde_json::to_string(&Value::Object(doc)).expect("json value serializes");
    text.push('\n');
    emit(&text, args.out.as_deref())?;
    let lines = format!(
        "max |iU^dagger dU - A| = {:e}\nconvergence order = {}\n",
        summary.max_error,
        summary.order.map_or("n/a".to_string(), |p| format!("{p:.4}"))
    );
    if args.out.is_some() {
        print!("{lines}");
    } else {
        eprint!("{lines}");
    }
    Ok(())
}

fn merge(doc: &mut Map<String, Value>, v: Value) {
    if let Value::Object(m) = v {
        doc.extend(m);
    }
}

fn abelian_recipe(field: &GridField) -> Result<(FrameGrid, Summary), CliError> {
    let profiles = AbelianProfiles::default_for(field.grid.dim())?;
    let (frame, max_error) = reconstruct_grid(field, &profiles)?;
    let (order, error_coarse) = match reconstruction_order(field, &profiles) {
        Ok(est) if est.order.is_finite() => (Some(est.order), Some(est.error_coarse)),
        Ok(est) => (None, Some(est.error_coarse)),
        Err(Error::InvalidGrid(_)) => (None, None),
        Err(e) => return Err(e.into()),
    };
    let unitarity = frame.unitarity_defect();
    Ok((
        frame,
        Summary {
            max_error,
            order,
            error_coarse,
            unitarity,
        },
    ))
}

/// NR construction with `n = 1`, basis `{1}`, `lambda_mu = A_mu`.
fn nr_recipe(field: &GridField) -> Result<(FrameGrid, Summary), CliError> {
    let grid = &field.grid;
    let d = grid.dim();
    let at_point = |flat: usize| -> Vec<Vec<f64>> { vec![field.components.iter().map(|c| c[flat]).collect()] };
    let samples: Vec<_> = (0..grid.len()).map(at_point).collect();
    let half_width = (0..d)
        .map(|mu| grid.coord(mu, 0).abs().max(grid.coord(mu, grid.points[mu] - 1).abs()))
        .fold(0.0, f64::max);
    let spec = NrSpec::fit(HermitianBasis::shifted_gell_mann(1)?, d, half_width, &samples)?;
    let m = 2 * d + 1;
    let mut rows = vec![Vec::with_capacity(grid.len()); m];
    let mut unitarity = 0.0_f64;
    for (flat, lambda) in samples.iter().enumerate() {
        let u = nr_frame_raw(lambda, &grid.point(flat), &spec)?;
        unitarity = unitarity.max(orthonormality_defect(&u));
        for (k, row) in rows.iter_mut().enumerate() {
            row.push(u[(k, 0)]);
        }
    }
    // The interpolant is smooth inside each cell, so the error is measured
    // at cell centres, on a subset of at most 16 cells per axis.
    let field_fn = NrFrameField {
        lambda: |x: &[f64]| Ok(vec![field.interpolate(x)]),
        spec,
    };
    let strides: Vec<usize> = grid.points.iter().map(|&k| ((k - 1) / 16).max(1)).collect();
    let counts: Vec<usize> = grid.points.iter().zip(&strides).map(|(&k, &s)| (k - 1).div_ceil(s)).collect();
    let total: usize = counts.iter().product();
    let mut max_error = 0.0_f64;
    for mut flat in 0..total {
        let mut x = vec![0.0; d];
        for mu in (0..d).rev() {
            let cell = (flat % counts[mu]) * strides[mu];
            flat /= counts[mu];
            x[mu] = grid.coord(mu, cell) + 0.5 * grid.spacing(mu);
        }
        max_error = max_error.max(field_fn.reconstruction_error(&x)?);
    }
    let frame = FrameGrid {
        grid: grid.clone(),
        rows,
    };
    Ok((
        frame,
        Summary {
            max_error,
            order: None,
            error_coarse: None,
            unitarity,
        },
    ))
}

fn sample(args: &SampleArgs, config: &Command) -> Result<(), CliError> {
    let spec = SampleSpec::bundled(args.dim)?;
    let field = spec.sample()?;
    let mut doc = header(config);
    doc.insert("sample".into(), serde_json::to_value(&spec).expect("spec serializes"));
    merge(&mut doc, serde_json::to_value(&field).expect("field serializes"));
    let mut text = serde_json::to_string(&Value::Object(doc)).expect("json value serializes");
    text.push('\n');
    emit(&text, args.out.as_deref())
}
