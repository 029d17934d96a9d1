use std::io::Write;

use lossmodes::asymptotics::{
    asymptotic_spectrum, classify_overdamping, predict_eigenvalues, predict_q_factors, thresholds, track_modes,
    PredictedQ,
};
use lossmodes::canonical::build_canonical;
use lossmodes::dynamics::{characteristic_rate, eigenmode_state, energy_balance_residual, integrate, IntegrateOptions};
use lossmodes::examples::random_state;
use lossmodes::io::{trajectory_header, write_trajectory_csv, Versioned, SCHEMA_VERSION};
use lossmodes::linalg::match_multisets;
use lossmodes::model::{loss_fraction, validate_system};
use lossmodes::pencil::canonical_to_pencil;
use lossmodes::spectral::{check_symmetry, mode_set, Mode, ModeClass};
use lossmodes::{CVec, Error, State, System, Tolerances};
use nalgebra::Complex;
use serde_json::{json, Value};

use crate::{Common, Failure, Format, Outcome, SimulateArgs, EXIT_INTEGRATOR, EXIT_PARSE, EXIT_VALIDATION};

/// Shortest round-trip form, switching to exponent notation outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn class_name(c: Option<ModeClass>) -> &'static str {
    match c {
        Some(ModeClass::Sigma0) => "sigma0",
        Some(ModeClass::Sigma1) => "sigma1",
        None => "n/a",
    }
}

fn emit_json(c: &Common, body: Value) -> Outcome {
    let mut w = c.writer()?;
    let text = serde_json::to_string_pretty(&Versioned::new(body)).expect("json values serialize");
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

/// Loads, applies tolerance overrides and refuses invalid systems with exit 1.
fn checked(c: &Common) -> Result<(System, Tolerances), Failure> {
    let tol = c.tolerances()?;
    let (sys, _) = c.load()?;
    let report = validate_system(&sys, tol.validation);
    if !report.overall {
        let names: Vec<&str> = report.failures().map(|f| f.name.as_str()).collect();
        return Err(Failure::new(EXIT_VALIDATION, format!("system fails validation: {}", names.join(", "))));
    }
    Ok((sys, tol))
}

pub fn validate(c: &Common) -> Outcome {
    let tol = c.tolerances()?;
    let (sys, label) = c.load()?;
    let report = validate_system(&sys, tol.validation);
    match c.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(
            c,
            json!({ "label": label, "n": sys.n(), "beta": sys.beta, "report": report }),
        )?,
        Format::Csv => {
            let mut w = c.writer()?;
            writeln!(w, "check,passed,margin")?;
            for ch in &report.checks {
                writeln!(w, "{},{},{}", ch.name, ch.passed, num(ch.margin))?;
            }
            writeln!(w, "# overall={}", report.overall)?;
            w.flush()?;
        }
    }
    if report.overall {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|f| f.name.as_str()).collect();
        Err(Failure::new(EXIT_VALIDATION, format!("validation failed: {}", names.join(", "))))
    }
}

fn mode_json(k: usize, m: &Mode<f64>) -> Value {
    json!({
        "index": k + 1,
        "re_zeta": m.zeta.re,
        "im_zeta": m.zeta.im,
        "q": m.q_factor,
        "class": class_name(m.class),
        "overdamped": m.overdamped,
        "marginal": m.marginal,
        "defective": m.defective,
        "residual": m.residual,
    })
}

pub fn spectrum(c: &Common) -> Outcome {
    let (sys, tol) = checked(c)?;
    let beta = sys.beta;
    let can = build_canonical(&sys, tol.validation)?;
    let a = can.operator(beta);
    let ms = mode_set(&a, &tol)?;
    let sym = check_symmetry(&a, &ms, beta == 0.0, &tol);
    let lf = loss_fraction(&sys, tol.rank)?;
    // Thresholds are defined for θ = 0 only; gyroscopic systems report null.
    let thr = match thresholds(&sys, &can, &tol) {
        Ok(t) => Some(t),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };
    match c.format.unwrap_or(Format::Json) {
        Format::Json => {
            let modes: Vec<Value> = ms.modes.iter().enumerate().map(|(k, m)| mode_json(k, m)).collect();
            emit_json(
                c,
                json!({
                    "beta": beta,
                    "n": sys.n(),
                    "modes": modes,
                    "overdamped_count": ms.overdamped_count(),
                    "summary": {
                        "omega_max": thr.map(|t| t.omega_max),
                        "b_min": thr.map(|t| t.b_min),
                        "beta_star": thr.map(|t| t.beta_star),
                        "delta_r": lf.delta_r,
                        "n_r": lf.n_r,
                        "operator_norm": ms.a_norm,
                    },
                    "symmetry": sym,
                }),
            )
        }
        Format::Csv => {
            let mut w = c.writer()?;
            writeln!(w, "index,re_zeta,im_zeta,q,class,overdamped,marginal,defective,residual")?;
            for (k, m) in ms.modes.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    k + 1,
                    num(m.zeta.re),
                    num(m.zeta.im),
                    num(m.q_factor),
                    class_name(m.class),
                    m.overdamped,
                    m.marginal,
                    m.defective,
                    num(m.residual)
                )?;
            }
            let opt = |x: Option<f64>| x.map_or("n/a".to_string(), num);
            writeln!(w, "# beta={}", num(beta))?;
            writeln!(w, "# omega_max={}", opt(thr.map(|t| t.omega_max)))?;
            writeln!(w, "# b_min={}", opt(thr.map(|t| t.b_min)))?;
            writeln!(w, "# beta_star={}", opt(thr.map(|t| t.beta_star)))?;
            writeln!(w, "# delta_r={}", num(lf.delta_r))?;
            writeln!(w, "# mirror_gap={}", num(sym.mirror_gap))?;
            w.flush()?;
            Ok(())
        }
    }
}

/// Columns of the sweep table, in order.
pub const SWEEP_COLUMNS: [&str; 13] = [
    "beta",
    "track",
    "re_zeta",
    "im_zeta",
    "q",
    "overdamped",
    "overdamped_count",
    "tracked",
    "pred_kind",
    "pred_re",
    "pred_im",
    "pred_abs_err",
    "pred_q",
];

struct SweepRow {
    beta: f64,
    track: usize,
    zeta: Complex<f64>,
    q: f64,
    overdamped: bool,
    overdamped_count: usize,
    tracked: bool,
    pred: Option<(&'static str, Complex<f64>, Option<f64>)>,
}

/// Reorders `modes` so that entry `j` is the one nearest to `prev[j]`.
fn align(prev: &[Complex<f64>], modes: Vec<Mode<f64>>) -> Vec<Mode<f64>> {
    let vals: Vec<Complex<f64>> = modes.iter().map(|m| m.zeta).collect();
    let m = match_multisets(prev, &vals, f64::INFINITY);
    let mut slots: Vec<Option<Mode<f64>>> = modes.into_iter().map(Some).collect();
    let mut out: Vec<Option<Mode<f64>>> = vec![None; prev.len()];
    for &(i, j, _) in &m.pairs {
        out[i] = slots[j].take();
    }
    out.into_iter().map(|m| m.expect("square matching")).collect()
}

pub fn sweep(c: &Common) -> Outcome {
    let grid = c
        .beta_grid
        .ok_or_else(|| Failure::new(EXIT_PARSE, "sweep needs --beta-grid START:STOP:COUNT[:log]"))?;
    let (sys, tol) = checked(c)?;
    let can = build_canonical(&sys, tol.validation)?;
    let betas = grid.points();
    let asym = asymptotic_spectrum(&can, &tol)?;
    let omega_norm = can.omega_norm();

    // Continuation runs segment by segment so that a failed segment only flags its own rows.
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut carried: Vec<Mode<f64>> = mode_set(&can.operator(betas[0]), &tol)?.modes;
    for (k, &beta) in betas.iter().enumerate() {
        let mut tracked = true;
        if k > 0 {
            let prev: Vec<Complex<f64>> = carried.iter().map(|m| m.zeta).collect();
            carried = match track_modes(&can, &[betas[k - 1], beta], &tol) {
                Ok(tr) => {
                    let start = tr.mode_sets[0].values();
                    let next = tr.mode_sets[1].modes.clone();
                    // Track j starts at start[j]; carry it to the slot holding that value.
                    let by_start = match_multisets(&prev, &start, f64::INFINITY);
                    let mut out: Vec<Option<Mode<f64>>> = vec![None; prev.len()];
                    for &(i, j, _) in &by_start.pairs {
                        out[i] = Some(next[j].clone());
                    }
                    out.into_iter().map(|m| m.expect("square matching")).collect()
                }
                Err(Error::Tracking { beta: b, reason }) => {
                    tracked = false;
                    warnings.push(format!("tracking failed between beta = {} and {beta} near {b}: {reason}", betas[k - 1]));
                    align(&prev, mode_set(&can.operator(beta), &tol)?.modes)
                }
                Err(e) => return Err(e.into()),
            };
        }
        let vals: Vec<Complex<f64>> = carried.iter().map(|m| m.zeta).collect();
        let mut preds: Vec<Option<(&'static str, Complex<f64>, Option<f64>)>> = vec![None; vals.len()];
        if beta > 0.0 {
            let pz = predict_eigenvalues(&asym, beta);
            let pq = predict_q_factors(&asym, beta, omega_norm);
            let zs: Vec<Complex<f64>> = pz.iter().map(|p| p.zeta).collect();
            for (i, j, _) in match_multisets(&zs, &vals, f64::INFINITY).pairs {
                let kind = if pz[i].high_loss { "high" } else { "low" };
                let q = match pq[i] {
                    PredictedQ::Finite(q) => Some(q),
                    PredictedQ::Infinite => Some(f64::INFINITY),
                    PredictedQ::Zero => Some(0.0),
                };
                preds[j] = Some((kind, zs[i], q));
            }
        }
        let count = carried.iter().filter(|m| m.overdamped).count();
        for (j, m) in carried.iter().enumerate() {
            rows.push(SweepRow {
                beta,
                track: j + 1,
                zeta: m.zeta,
                q: m.q_factor,
                overdamped: m.overdamped,
                overdamped_count: count,
                tracked,
                pred: preds[j],
            });
        }
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut w = c.writer()?;
            writeln!(w, "{}", SWEEP_COLUMNS.join(","))?;
            for r in &rows {
                let (kind, pre, pim, err, pq) = match r.pred {
                    Some((kind, p, q)) => (
                        kind.to_string(),
                        num(p.re),
                        num(p.im),
                        num((p - r.zeta).norm()),
                        q.map_or(String::new(), num),
                    ),
                    None => ("none".into(), String::new(), String::new(), String::new(), String::new()),
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    num(r.beta),
                    r.track,
                    num(r.zeta.re),
                    num(r.zeta.im),
                    num(r.q),
                    r.overdamped,
                    r.overdamped_count,
                    r.tracked,
                    kind,
                    pre,
                    pim,
                    err,
                    pq
                )?;
            }
            writeln!(w, "# warnings={}", warnings.len())?;
            w.flush()?;
            Ok(())
        }
        Format::Json => {
            let rows: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "beta": r.beta,
                        "track": r.track,
                        "re_zeta": r.zeta.re,
                        "im_zeta": r.zeta.im,
                        "q": r.q,
                        "overdamped": r.overdamped,
                        "overdamped_count": r.overdamped_count,
                        "tracked": r.tracked,
                        "pred_kind": r.pred.map_or("none", |p| p.0),
                        "pred_re": r.pred.map(|p| p.1.re),
                        "pred_im": r.pred.map(|p| p.1.im),
                        "pred_abs_err": r.pred.map(|p| (p.1 - r.zeta).norm()),
                        "pred_q": r.pred.and_then(|p| p.2),
                    })
                })
                .collect();
            emit_json(
                c,
                json!({ "columns": SWEEP_COLUMNS, "rows": rows, "warning_count": warnings.len(), "warnings": warnings }),
            )
        }
    }
}

fn parse_reals(name: &str, text: &str, n: usize) -> Result<CVec, Failure> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::new(EXIT_PARSE, format!("--{name}: {e}")))?;
    if vals.len() != n || vals.iter().any(|v| !v.is_finite()) {
        return Err(Failure::new(EXIT_PARSE, format!("--{name} needs {n} finite comma-separated values")));
    }
    Ok(CVec::from_iterator(n, vals.into_iter().map(|v| Complex::new(v, 0.0))))
}

/// Sample budget of one simulation; explicit steps scale with the fastest rate.
const MAX_SAMPLES: f64 = 1e6;

pub fn simulate(a: &SimulateArgs) -> Outcome {
    let c = &a.common;
    let (sys, tol) = checked(c)?;
    let (n, beta) = (sys.n(), sys.beta);
    if !(a.t.is_finite() && a.t > 0.0) {
        return Err(Failure::new(EXIT_PARSE, format!("--t must be positive, got {}", a.t)));
    }
    let initial: State = match (&a.q0, &a.eigenmode) {
        (Some(q0), _) => {
            let q = parse_reals("q0", q0, n)?;
            let qdot = match &a.qdot0 {
                Some(v) => parse_reals("qdot0", v, n)?,
                None => CVec::zeros(n),
            };
            State::new(q, qdot)
        }
        (None, Some(sel)) => {
            let can = build_canonical(&sys, tol.validation)?;
            let ms = mode_set(&can.operator(beta), &tol)?;
            let j = match sel.as_str() {
                "hi" => 0,
                s => match s.parse::<usize>() {
                    Ok(j) if (1..=ms.modes.len()).contains(&j) => j - 1,
                    _ => {
                        return Err(Failure::new(
                            EXIT_PARSE,
                            format!("--eigenmode takes \"hi\" or an index in 1..={}", ms.modes.len()),
                        ))
                    }
                },
            };
            let m = &ms.modes[j];
            let pe = canonical_to_pencil(&sys, &can, m.zeta, &m.w, beta, tol.residual)?;
            let mut s = eigenmode_state(&pe);
            let peak = s.q.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if peak > 0.0 {
                s.q /= Complex::new(peak, 0.0);
                s.qdot /= Complex::new(peak, 0.0);
            }
            s
        }
        (None, None) => random_state(n, c.seed),
    };

    // Sampling keeps the energy-balance differences accurate: 128 samples per characteristic period.
    let rate = characteristic_rate(&sys, &tol)?;
    let per_period = 2.0 * std::f64::consts::PI / (128.0 * rate.max(f64::MIN_POSITIVE));
    let dt = per_period.min(a.t / 16.0);
    if a.t / dt > MAX_SAMPLES {
        return Err(Failure::new(
            EXIT_INTEGRATOR,
            format!(
                "stiff problem: the fastest rate is {rate:e}, so t = {} needs more than {MAX_SAMPLES:e} samples; retry with --t {:.3e} or less",
                a.t,
                MAX_SAMPLES * dt
            ),
        ));
    }
    let opts = IntegrateOptions::new(a.t, dt, &tol);
    let zero = CVec::zeros(n);
    let traj = integrate(&sys, beta, &initial, |_| zero.clone(), &opts).map_err(|e| match e {
        Error::Stiff { t, .. } => Failure::new(
            EXIT_INTEGRATOR,
            format!("{e}; the integration reached t = {t:e}, retry with --t {:.3e} or less", t.max(a.t * 1e-3)),
        ),
        e => e.into(),
    })?;
    let balance = energy_balance_residual(&sys, beta, &traj, |_| zero.clone(), &tol)?;

    match c.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut w = c.writer()?;
            let footer = [
                format!("energy_balance_max_residual={}", num(balance.max_residual)),
                format!("max_energy_increase={}", num(balance.max_energy_increase)),
                format!("beta={}", num(beta)),
                format!("schema_version={SCHEMA_VERSION}"),
            ];
            write_trajectory_csv(&mut w, &traj, &footer)?;
            w.flush()?;
            Ok(())
        }
        Format::Json => {
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &traj, &[])?;
            let text = String::from_utf8(buf).expect("csv is ascii");
            let rows: Vec<Vec<f64>> = text
                .lines()
                .skip(1)
                .map(|l| l.split(',').map(|x| x.parse().expect("written by us")).collect())
                .collect();
            emit_json(
                c,
                json!({
                    "beta": beta,
                    "columns": trajectory_header(n),
                    "rows": rows,
                    "energy_balance": balance,
                }),
            )
        }
    }
}

pub fn classify(c: &Common) -> Outcome {
    let (sys, tol) = checked(c)?;
    let can = build_canonical(&sys, tol.validation)?;
    let report = classify_overdamping(&sys, &can, sys.beta, &tol)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match c.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(c, serde_json::to_value(&report).expect("report serializes")),
        Format::Csv => {
            let mut w = c.writer()?;
            writeln!(w, "index,re_zeta,im_zeta,overdamped,marginal,class")?;
            for (k, m) in report.modes.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    k + 1,
                    num(m.zeta.re),
                    num(m.zeta.im),
                    m.overdamped,
                    m.marginal,
                    class_name(m.class)
                )?;
            }
            let regime = serde_json::to_value(report.regime).expect("enum serializes");
            writeln!(w, "# regime={}", regime.as_str().unwrap_or_default())?;
            writeln!(w, "# overdamped={}", report.overdamped)?;
            writeln!(w, "# oscillatory={}", report.oscillatory)?;
            writeln!(w, "# kappa={}", report.kappa)?;
            writeln!(w, "# nondegenerate={}", report.nondegenerate)?;
            w.flush()?;
            Ok(())
        }
    }
}
