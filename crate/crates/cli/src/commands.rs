use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;

use qgraph_core::augmented::{augmented_convergence_experiment, AugmentedInput};
use qgraph_core::chain::{schedule_limit_check, BoundaryCondition, ChainSpec, Schedule};
use qgraph_core::convergence::{
    geometric_ds, rate_fit, resolvent_convergence_experiment, QuadratureSpec, RateFit, SweepRecord,
};
use qgraph_core::coupling::{validate, CouplingDescriptor, CouplingParams, OmegaAlphaBeta, VertexCoupling};
use qgraph_core::kernels::{write_kernel_csv, ApproxStarKernel, KernelEvaluator, LimitKernel, SpectralPoint};
use qgraph_core::serde_complex::{matrix_to_json, ExtendedReal};
use qgraph_core::{Complex64, Error, DEFAULT_TOL};
use serde_json::{json, Map, Value};

use crate::{CliError, Command, Options};

type CliResult<T> = std::result::Result<T, CliError>;

/// Parsed `--input` (or `--family`) document.
enum Input {
    Coupling(CouplingDescriptor),
    Chain(ChainSpec),
    Schedule(Schedule),
    Augmented(AugmentedInput),
}

struct Sweep {
    d_max: f64,
    d_min: f64,
    count: usize,
}

pub fn run(command: Command, opts: &Options) -> CliResult<()> {
    match command {
        Command::Validate => validate_cmd(opts),
        Command::Convert => convert_cmd(opts),
        Command::KernelDump => kernel_dump_cmd(opts),
        Command::BcSweep => bc_sweep_cmd(opts),
        Command::HsSweep => hs_sweep_cmd(opts),
        Command::AugmentedSweep => augmented_sweep_cmd(opts),
    }
}

fn parse_err(msg: impl Into<String>) -> CliError {
    CliError::Parse(msg.into())
}

fn family_document(family: &str, params: &[String]) -> CliResult<Value> {
    let mut n = None;
    let mut fields = Map::new();
    for p in params {
        let (key, raw) = p
            .split_once('=')
            .ok_or_else(|| parse_err(format!("--param expects key=value, got `{p}`")))?;
        // bare words such as `inf` are kept as strings
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        if key == "n" {
            n = Some(value);
        } else {
            fields.insert(key.to_string(), value);
        }
    }
    let n = n.ok_or_else(|| parse_err("--family needs --param n=<edges>"))?;
    Ok(json!({ "n": n, "family": family, "params": fields }))
}

/// The input document: `--input` file, else `--family`/`--param`, else `fallback`.
fn input_document(opts: &Options, fallback: Option<Value>) -> CliResult<Value> {
    match (&opts.input, &opts.family) {
        (Some(_), Some(_)) => Err(parse_err("--input and --family are mutually exclusive")),
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| parse_err(format!("cannot read {}: {e}", path.display())))?;
            Ok(serde_json::from_str(&text)?)
        }
        (None, Some(family)) => family_document(family, &opts.params),
        (None, None) => fallback.ok_or_else(|| parse_err("no input: pass --input or --family")),
    }
}

fn classify(doc: &Value) -> CliResult<Input> {
    let has = |k: &str| doc.get(k).is_some();
    let input = if has("schedule") {
        Input::Schedule(serde_json::from_value(doc.clone())?)
    } else if has("edges") {
        Input::Chain(serde_json::from_value(doc.clone())?)
    } else if has("D") {
        Input::Augmented(serde_json::from_value(doc.clone())?)
    } else {
        let desc: CouplingDescriptor = serde_json::from_value(doc.clone())
            .map_err(|e| parse_err(format!("not a coupling descriptor: {e}")))?;
        Input::Coupling(desc)
    };
    Ok(input)
}

fn expect_coupling(input: Input) -> CliResult<CouplingDescriptor> {
    match input {
        Input::Coupling(desc) => Ok(desc),
        _ => Err(parse_err("expected a coupling descriptor")),
    }
}

fn kappa(opts: &Options, default: f64) -> CliResult<SpectralPoint> {
    let z = match opts.kappa.as_deref() {
        None => Complex64::new(default, 0.0),
        Some([re]) => Complex64::new(*re, 0.0),
        Some([re, im]) => Complex64::new(*re, *im),
        Some(_) => return Err(parse_err("--kappa takes `re` or `re,im`")),
    };
    Ok(SpectralPoint::new(z)?)
}

fn reject_kappa(opts: &Options, command: &str) -> CliResult<()> {
    if opts.kappa.is_some() {
        return Err(parse_err(format!("{command} works at zero energy; --kappa does not apply")));
    }
    Ok(())
}

fn sweep_ds(opts: &Options, default: Sweep) -> CliResult<Vec<f64>> {
    let d_max = opts.d_max.unwrap_or(default.d_max);
    let d_min = opts.d_min.unwrap_or(default.d_min);
    let count = opts.count.unwrap_or(default.count);
    Ok(geometric_ds(d_max, d_min, count)?)
}

fn sweep_flags_given(opts: &Options) -> bool {
    opts.d_max.is_some() || opts.d_min.is_some() || opts.count.is_some()
}

fn emit(opts: &Options, body: &str) -> CliResult<()> {
    match &opts.output {
        Some(path) => fs::write(path, body)?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn emit_json(opts: &Options, value: &Value) -> CliResult<()> {
    emit(opts, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Sweep summaries go to `--summary`, or to stdout when the CSV went to a file.
fn emit_summary(opts: &Options, value: &Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match (&opts.summary, &opts.output) {
        (Some(path), _) => fs::write(path, text)?,
        (None, Some(_)) => std::io::stdout().write_all(text.as_bytes())?,
        (None, None) => {}
    }
    Ok(())
}

fn sweep_csv(column: &str, records: &[SweepRecord]) -> String {
    let mut out = format!("d,{column}\n");
    for r in records {
        writeln!(out, "{:.16e},{:.16e}", r.d, r.value).unwrap();
    }
    out
}

fn fit_fields(summary: &mut Map<String, Value>, fit: Option<&RateFit>) {
    let (c, p, residual) = match fit {
        Some(f) => (json!(f.c), json!(f.p), json!(f.residual)),
        None => (Value::Null, Value::Null, Value::Null),
    };
    summary.insert("C".into(), c);
    summary.insert("p".into(), p);
    summary.insert("residual".into(), residual);
}

fn kappa_json(k: SpectralPoint) -> Value {
    json!([k.kappa().re, k.kappa().im])
}

fn validate_cmd(opts: &Options) -> CliResult<()> {
    let doc = input_document(opts, None)?;
    let desc = expect_coupling(classify(&doc)?)?;
    let (a, b) = match desc.raw_matrices()? {
        Some(ab) => ab,
        None => {
            let coupling = desc.build()?;
            (coupling.a().clone(), coupling.b().clone())
        }
    };
    let report = validate(&a, &b, DEFAULT_TOL)?;
    let mut out = serde_json::to_value(&report)?;
    out["valid"] = json!(report.is_valid());
    out["config"] = json!({ "command": "validate", "input": doc, "tol": DEFAULT_TOL });
    emit_json(opts, &out)?;
    if !report.is_valid() {
        return Err(CliError::Core(Error::InvalidCoupling {
            rank_ok: report.rank_ok,
            hermitian_ok: report.hermitian_ok,
        }));
    }
    Ok(())
}

/// Equivalent parameters in the other real-symmetric parametrization.
fn equivalent(desc: &CouplingDescriptor) -> CliResult<Value> {
    let value = match desc {
        CouplingDescriptor::Family { params: CouplingParams::Generic2n(g), n } => {
            let oab = g.to_omega_alpha_beta()?;
            json!({ "n": n, "family": "omega_alpha_beta", "params": oab })
        }
        CouplingDescriptor::Family { params: CouplingParams::OmegaAlphaBeta(p), n } => {
            let g = p.to_generic2n()?;
            json!({ "n": n, "family": "generic_2n", "params": g })
        }
        _ => Value::Null,
    };
    Ok(value)
}

fn convert_cmd(opts: &Options) -> CliResult<()> {
    let doc = input_document(opts, None)?;
    let desc = expect_coupling(classify(&doc)?)?;
    let coupling = desc.build()?;
    let u = coupling.unitary()?;
    let out = json!({
        "n": coupling.n(),
        "U": matrix_to_json(&u),
        "A": matrix_to_json(coupling.a()),
        "B": matrix_to_json(coupling.b()),
        "real": coupling.is_real(DEFAULT_TOL),
        "equivalent": equivalent(&desc)?,
        "config": { "command": "convert", "input": doc },
    });
    emit_json(opts, &out)
}

fn schedule_for(desc: &CouplingDescriptor) -> CliResult<Schedule> {
    let CouplingDescriptor::Family { n, params } = desc else {
        return Err(Error::InvalidParams("raw (A, B) input has no approximating schedule".into()).into());
    };
    let oab = |p: &OmegaAlphaBeta| -> CliResult<Schedule> {
        if p.n() != *n {
            return Err(Error::DimensionMismatch(format!("parameters describe {} edges, n = {n}", p.n())).into());
        }
        Ok(Schedule::TwoDelta(OmegaAlphaBeta::new(p.omega, p.alpha.clone(), p.beta.clone())?))
    };
    match params {
        CouplingParams::OmegaAlphaBeta(p) => oab(p),
        CouplingParams::Generic2n(g) => oab(&g.to_omega_alpha_beta()?),
        CouplingParams::PermSymmetric { a, b } => Ok(Schedule::one_delta(*n, *a, *b)),
        CouplingParams::DeltaPrimeS { beta: ExtendedReal::Finite(beta) } => Ok(Schedule::delta_prime_s(*n, *beta)),
        _ => Err(Error::InvalidParams("this family has no approximating schedule".into()).into()),
    }
}

fn schedule_of(input: Input) -> CliResult<Schedule> {
    match input {
        Input::Schedule(s) => Ok(s),
        Input::Coupling(desc) => schedule_for(&desc),
        _ => Err(parse_err("expected a schedule or a coupling family")),
    }
}

fn linspace(end: f64, points: usize) -> CliResult<Vec<f64>> {
    if points < 2 || !(end > 0.0) || !end.is_finite() {
        return Err(parse_err("grid needs --points ≥ 2 and a positive finite --x-max"));
    }
    let step = end / (points - 1) as f64;
    Ok((0..points).map(|i| i as f64 * step).collect())
}

fn kernel_dump_cmd(opts: &Options) -> CliResult<()> {
    let doc = input_document(opts, None)?;
    let k = kappa(opts, 1.0)?;
    let grid = linspace(opts.x_max, opts.points)?;
    let kernel: Box<dyn KernelEvaluator> = match (classify(&doc)?, opts.d) {
        (Input::Chain(chain), _) => Box::new(ApproxStarKernel::from_chain(&chain, k)?),
        (Input::Augmented(_), _) => return Err(parse_err("kernel-dump does not take an augmented target")),
        (input, Some(d)) => {
            let chain = schedule_of(input)?.chain(d)?;
            Box::new(ApproxStarKernel::from_chain(&chain, k)?)
        }
        (Input::Schedule(s), None) => Box::new(LimitKernel::new(&s.target()?, k)?),
        (Input::Coupling(desc), None) => Box::new(LimitKernel::new(&desc.build()?, k)?),
    };
    let mut buf = Vec::new();
    write_kernel_csv(kernel.as_ref(), &grid, &grid, &mut buf)?;
    match &opts.output {
        Some(path) => fs::write(path, &buf)?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn target_json(target: &VertexCoupling) -> CliResult<Value> {
    let bc = BoundaryCondition::from(target).normalized();
    Ok(json!({ "U": matrix_to_json(&target.unitary()?), "bc": bc.to_json() }))
}

fn bc_sweep_cmd(opts: &Options) -> CliResult<()> {
    reject_kappa(opts, "bc-sweep")?;
    let doc = input_document(opts, None)?;
    let schedule = schedule_of(classify(&doc)?)?;
    let ds = sweep_ds(opts, Sweep { d_max: 1e-1, d_min: 1e-4, count: 7 })?;
    let target = schedule.target()?;
    let records = schedule_limit_check(&schedule, &BoundaryCondition::from(&target).normalized(), &ds)?;
    emit(opts, &sweep_csv("distance", &records))?;

    let positive: Vec<SweepRecord> = records.iter().copied().filter(|r| r.value > 0.0).collect();
    let fit = if positive.len() >= 4 { Some(rate_fit(&positive)?) } else { None };
    let mut summary = Map::new();
    fit_fields(&mut summary, fit.as_ref());
    let exact: Vec<f64> = records.iter().filter(|r| r.value == 0.0).map(|r| r.d).collect();
    summary.insert("excluded_ds".into(), json!(exact));
    summary.insert("max_distance".into(), json!(records.iter().map(|r| r.value).fold(0.0, f64::max)));
    summary.insert("target".into(), target_json(&target)?);
    summary.insert(
        "config".into(),
        json!({ "command": "bc-sweep", "input": doc, "schedule": schedule, "kappa": [0.0, 0.0], "ds": ds }),
    );
    emit_summary(opts, &Value::Object(summary))
}

fn default_hs_input() -> Value {
    json!({ "n": 2, "family": "omega_alpha_beta", "params": { "omega": 0.0, "alpha": [1.0, 1.0], "beta": [1.0, 1.0] } })
}

fn hs_sweep_cmd(opts: &Options) -> CliResult<()> {
    let doc = input_document(opts, Some(default_hs_input()))?;
    let params = match schedule_of(classify(&doc)?)? {
        Schedule::TwoDelta(p) => p,
        _ => return Err(Error::InvalidParams("hs-sweep needs (ω, α, β) parameters".into()).into()),
    };
    let k = kappa(opts, 1.0)?;
    let q = QuadratureSpec::for_kappa(k, opts.trunc_factor, opts.nodes)?;
    let ds = sweep_ds(opts, Sweep { d_max: 1e-1, d_min: 1e-3, count: 9 })?;
    let report = resolvent_convergence_experiment(&params, k, &ds, &q)?;

    let mut csv = String::from("d,hs_norm,hs_norm_outer\n");
    for (full, outer) in report.records.iter().zip(&report.outer_records) {
        writeln!(csv, "{:.16e},{:.16e},{:.16e}", full.d, full.value, outer.value).unwrap();
    }
    emit(opts, &csv)?;

    let mut summary = Map::new();
    fit_fields(&mut summary, report.fit.as_ref());
    summary.insert("excluded_ds".into(), json!(report.excluded_ds()));
    summary.insert("excluded".into(), serde_json::to_value(&report.excluded)?);
    summary.insert("outer_fit".into(), serde_json::to_value(report.outer_fit)?);
    summary.insert(
        "config".into(),
        json!({
            "command": "hs-sweep",
            "input": doc,
            "kappa": kappa_json(k),
            "ds": ds,
            "nodes": q.nodes,
            "trunc_factor": opts.trunc_factor,
            "radius": q.radius,
        }),
    );
    emit_summary(opts, &Value::Object(summary))
}

fn augmented_sweep_cmd(opts: &Options) -> CliResult<()> {
    reject_kappa(opts, "augmented-sweep")?;
    let doc = input_document(opts, None)?;
    let input = match classify(&doc)? {
        Input::Augmented(a) => a,
        _ => return Err(parse_err("augmented-sweep expects {\"D\": [...], \"S\": [[...]]}")),
    };
    let ds = if input.ds.is_empty() || sweep_flags_given(opts) {
        sweep_ds(opts, Sweep { d_max: 1e-2, d_min: 1e-4, count: 5 })?
    } else {
        input.ds.clone()
    };
    let report = augmented_convergence_experiment(&input.target(), &ds)?;
    emit(opts, &sweep_csv("distance", &report.records))?;

    let mut summary = Map::new();
    fit_fields(&mut summary, report.fit.as_ref());
    let exact: Vec<f64> = report.records.iter().filter(|r| r.value == 0.0).map(|r| r.d).collect();
    summary.insert("excluded_ds".into(), json!(exact));
    summary.insert(
        "config".into(),
        json!({ "command": "augmented-sweep", "input": doc, "kappa": [0.0, 0.0], "ds": ds }),
    );
    emit_summary(opts, &Value::Object(summary))
}
