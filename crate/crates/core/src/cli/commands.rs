//! The six commands.  Each returns what the binary prints on standard output
//! plus the exit code; files requested with `--out` are written here.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use num_complex::Complex64;
use serde_json::Value;

use crate::expr::Expression;
use crate::floquet::{
    classify_stability, dynamic_eigenpairs, exponent_maps, exponent_shift_residual, l_periodicity_residual,
    mode_repeat_residual, periodic_solution_homogeneous, periodic_solution_nonhomogeneous, sample_grid,
    shared_eigenvector_residual, spectral_mapping_residual, verify_decomposition, FloquetData, FloquetError,
    StabilityVerdict,
};
use crate::linalg::{frobenius, relative_distance, spectral_norm, vector_norm, CMatrix, CVector};
use crate::lyapunov::{transform_system, verify_lyapunov, LyapunovTransformation};
use crate::timescale::{PeriodicTimeScale, RunKind, TimePoint, DEFAULT_TOL};
use crate::transition::{variation_of_constants, Forcing, Fundamental};

use super::config::Problem;
use super::json::{self, complex, matrix, num, object, vector};
use super::{CliError, EXIT_NUMERIC, EXIT_OK, REPORT_SCHEMA};

type Result<T> = std::result::Result<T, CliError>;

/// Text for standard output and the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub stdout: String,
    pub exit_code: i32,
}

impl CommandOutput {
    fn ok(report: Value) -> Self {
        CommandOutput {
            stdout: json::to_string(&report),
            exit_code: EXIT_OK,
        }
    }
}

/// Distinct graininess values of the time scale, ascending.
pub fn graininess_values(ts: &PeriodicTimeScale) -> Vec<f64> {
    let mut mus = Vec::new();
    for run in ts.runs() {
        if matches!(run.kind, RunKind::Continuous { .. }) {
            mus.push(0.0);
        }
        if run.trailing_gap > 0.0 {
            mus.push(run.trailing_gap);
        }
    }
    mus.sort_by(f64::total_cmp);
    mus.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    mus
}

fn header(p: &Problem, command: &str) -> Vec<(&'static str, Value)> {
    let ts = p.sys.timescale();
    vec![
        ("schema", Value::from(REPORT_SCHEMA)),
        ("command", Value::from(command)),
        (
            "system",
            object([
                ("dimension", Value::from(p.sys.dimension())),
                ("period", num(ts.period())),
                ("t0", num(ts.time(&p.t0))),
                ("graininess", Value::Array(graininess_values(ts).into_iter().map(num).collect())),
            ]),
        ),
        (
            "options",
            object([
                ("h_max", num(p.opts.h_max)),
                ("rk_tol", num(p.opts.rk_tol)),
                ("pb_terms", Value::from(p.opts.pb_terms)),
                ("grid", Value::from(p.grid)),
            ]),
        ),
    ]
}

fn verdict_json(v: &StabilityVerdict) -> Value {
    object([
        ("class", Value::from(v.class.as_str())),
        ("marginal", Value::from(v.marginal)),
    ])
}

fn multipliers_json(v: &StabilityVerdict) -> Value {
    Value::Array(
        v.evidence
            .iter()
            .map(|e| {
                object([
                    ("value", complex(e.value)),
                    ("modulus", num(e.modulus)),
                    ("algebraic_multiplicity", Value::from(e.algebraic_multiplicity)),
                    ("geometric_multiplicity", Value::from(e.geometric_multiplicity)),
                    ("semisimple", Value::from(e.semisimple)),
                    ("unit_modulus", Value::from(e.unit_modulus)),
                ])
            })
            .collect(),
    )
}

fn floquet(p: &Problem) -> Result<FloquetData> {
    let start = Instant::now();
    let fd = FloquetData::new(&p.sys, &p.t0, &p.opts)?;
    debug!("monodromy in {:?}", start.elapsed());
    Ok(fd)
}

fn period_grid(p: &Problem, periods: f64, count: usize) -> Vec<TimePoint> {
    sample_grid(p.sys.timescale(), &p.t0, periods * p.sys.period(), count)
}

/// `analyze`: monodromy, multipliers, exponents and `R` at each graininess,
/// verdict, and the decomposition residuals on the default grid.
pub fn analyze(p: &Problem, timing: bool) -> Result<CommandOutput> {
    let start = Instant::now();
    let fd = floquet(p)?;
    let tol = &p.tolerances;
    let verdict = classify_stability(&fd, tol.unit);
    info!("verdict {}", verdict.class);
    let exponents: Vec<Value> = graininess_values(fd.timescale())
        .into_iter()
        .map(|mu| {
            object([
                ("mu", num(mu)),
                ("r", matrix(&fd.r_matrix_for(mu))),
                ("exponents", Value::Array(fd.exponents_for(mu).into_iter().map(complex).collect())),
            ])
        })
        .collect();
    let grid = period_grid(p, 1.0, p.grid);
    let dec = verify_decomposition(&fd, &grid)?;
    let residuals = object([
        (
            "decomposition",
            object([
                ("max_residual", num(dec.max_residual)),
                ("max_relative", num(dec.max_relative)),
                ("pairs", Value::from(dec.pairs)),
            ]),
        ),
        ("l_periodicity", num(l_periodicity_residual(&fd, &grid)?)),
        ("spectral_mapping", num(spectral_mapping_residual(&fd, &grid)?)),
    ]);
    let mut fields = header(p, "analyze");
    fields.extend([
        ("monodromy", matrix(fd.monodromy())),
        ("multipliers", multipliers_json(&verdict)),
        ("exponents", Value::Array(exponents)),
        ("verdict", verdict_json(&verdict)),
        ("residuals", residuals),
    ]);
    // wall-clock time breaks byte-identical reports, so it is opt-in
    if timing {
        fields.push(("timing", object([("seconds", num(start.elapsed().as_secs_f64()))])));
    }
    Ok(CommandOutput::ok(object(fields)))
}

fn column_names(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for i in 1..=n {
        for j in 1..=n {
            let name = if n < 10 { format!("m{i}{j}") } else { format!("m{i}_{j}") };
            cols.push(format!("{name}_re"));
            cols.push(format!("{name}_im"));
        }
    }
    cols
}

/// CSV with one row per time: `t` then the row-major entries, real and
/// imaginary parts, all printed with 17 significant digits.
pub fn matrix_csv(rows: &[(f64, CMatrix)]) -> String {
    let n = rows.first().map_or(0, |r| r.1.nrows());
    let mut out = column_names(n).join(",");
    out.push('\n');
    for (t, m) in rows {
        out.push_str(&json::float(*t));
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let _ = write!(out, ",{},{}", json::float(m[(i, j)].re), json::float(m[(i, j)].im));
            }
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`matrix_csv`].
pub fn parse_matrix_csv(text: &str) -> std::result::Result<Vec<(f64, CMatrix)>, String> {
    let mut lines = text.lines();
    let head = lines.next().ok_or("empty file")?;
    let width = head.split(',').count();
    let n = (((width - 1) / 2) as f64).sqrt().round() as usize;
    if width != 1 + 2 * n * n || head.split(',').next() != Some("t") {
        return Err(format!("unexpected header `{head}`"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let vals = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if vals.len() != width {
                return Err(format!("row has {} fields, expected {width}", vals.len()));
            }
            let m = CMatrix::from_fn(n, n, |i, j| {
                let k = 1 + 2 * (i * n + j);
                Complex64::new(vals[k], vals[k + 1])
            });
            Ok((vals[0], m))
        })
        .collect()
}

fn vector_csv(rows: &[(f64, CVector)]) -> String {
    let n = rows.first().map_or(0, |r| r.1.len());
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",x{i}_re,x{i}_im");
    }
    out.push('\n');
    for (t, x) in rows {
        out.push_str(&json::float(*t));
        for z in x.iter() {
            let _ = write!(out, ",{},{}", json::float(z.re), json::float(z.im));
        }
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// `decompose`: `L(t)`, `e_R(t, t0)` and `Φ(t, t0)` on `grid` points spread
/// over `periods` periods from `t0`, written to `L.csv`, `exp_r.csv`, `phi.csv`.
pub fn decompose(p: &Problem, grid: Option<usize>, periods: f64, out: &Path) -> Result<CommandOutput> {
    let count = grid.unwrap_or(p.grid);
    if count < 1 {
        return Err(CliError::Config("--grid must be positive".into()));
    }
    if !(periods.is_finite() && periods > 0.0) {
        return Err(CliError::Config(format!("--periods must be positive, got {periods}")));
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let fd = floquet(p)?;
    let ts = fd.timescale();
    let pts = period_grid(p, periods, count);
    let fund = fd.fundamental(&p.t0, pts.last().unwrap())?;
    let mut l_rows = Vec::with_capacity(pts.len());
    let mut e_rows = Vec::with_capacity(pts.len());
    let mut phi_rows = Vec::with_capacity(pts.len());
    for tp in &pts {
        let t = ts.time(tp);
        l_rows.push((t, fd.lyapunov_factor_with(&fund, tp)?));
        e_rows.push((t, fd.exp_r(tp, &p.t0)));
        phi_rows.push((t, fund.at(tp)?));
    }
    let files: Vec<(PathBuf, &[(f64, CMatrix)])> = vec![
        (out.join("L.csv"), &l_rows),
        (out.join("exp_r.csv"), &e_rows),
        (out.join("phi.csv"), &phi_rows),
    ];
    for (path, rows) in &files {
        write_file(path, &matrix_csv(rows))?;
    }
    let mut fields = header(p, "decompose");
    fields.extend([
        ("rows", Value::from(pts.len())),
        (
            "files",
            Value::Array(
                files
                    .iter()
                    .map(|(path, _)| Value::from(path.file_name().unwrap().to_string_lossy().into_owned()))
                    .collect(),
            ),
        ),
    ]);
    Ok(CommandOutput::ok(object(fields)))
}

fn parse_constant(s: &str, what: &str) -> Result<Complex64> {
    let e = Expression::parse(s.trim()).map_err(|e| CliError::Config(format!("{what}: {e}")))?;
    if !e.is_constant() {
        return Err(CliError::Config(format!("{what}: `{s}` depends on t")));
    }
    e.evaluate(0.0).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

/// Comma-separated constant expressions, e.g. `1,0` or `sqrt(2), 1 + 2*i`.
pub fn parse_state(s: &str, n: usize) -> Result<CVector> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != n {
        return Err(CliError::Config(format!("--x0 needs {n} entries, got {}", parts.len())));
    }
    let vals = parts
        .iter()
        .enumerate()
        .map(|(i, s)| parse_constant(s, &format!("--x0[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(CVector::from_vec(vals))
}

/// `simulate`: the solution from `x0` (default all ones) at `t0` up to
/// `t_end` (default `t0 + p`), forcing included when configured.  Returns the
/// CSV on standard output unless `out` is given.
pub fn simulate(
    p: &Problem,
    x0: Option<&str>,
    t_end: Option<&str>,
    samples: Option<usize>,
    out: Option<&Path>,
) -> Result<CommandOutput> {
    let ts = p.sys.timescale();
    let n = p.sys.dimension();
    let x0 = match x0 {
        Some(s) => parse_state(s, n)?,
        None => CVector::from_element(n, Complex64::new(1.0, 0.0)),
    };
    let start = ts.time(&p.t0);
    let end = match t_end {
        Some(s) => {
            let v = parse_constant(s, "--t-end")?;
            if v.im != 0.0 {
                return Err(CliError::Config("--t-end must be real".into()));
            }
            v.re
        }
        None => start + ts.period(),
    };
    if !(end >= start) {
        return Err(CliError::Config(format!("--t-end {end} precedes t0 = {start}")));
    }
    let end_point = ts
        .locate(end, DEFAULT_TOL)
        .ok_or_else(|| CliError::Config(format!("--t-end {end} is not in the time scale")))?;
    let span = end - start;
    let periods = (span / ts.period()).ceil().max(1.0);
    let count = samples.unwrap_or(16 * periods as usize + 1);
    let mut pts = sample_grid(ts, &p.t0, span, count.max(2));
    if pts.last().map_or(true, |l| l.cmp_position(&end_point) != std::cmp::Ordering::Equal) {
        pts.push(end_point);
    }
    let forcing = p.forcing.clone().unwrap_or_else(|| Forcing::zero(n));
    let mut rows = Vec::with_capacity(pts.len());
    let mut x = x0;
    rows.push((start, x.clone()));
    for w in pts.windows(2) {
        x = if p.forcing.is_some() {
            let (particular, phi) = variation_of_constants(&p.sys, &forcing, &w[0], &w[1], &p.opts)?;
            phi * x + particular
        } else {
            let m = CMatrix::from_column_slice(n, 1, x.as_slice());
            let y = p.sys.propagate(m, &w[0], &w[1], &p.opts)?;
            y.column(0).into_owned()
        };
        rows.push((ts.time(&w[1]), x.clone()));
    }
    let csv = vector_csv(&rows);
    match out {
        Some(path) => {
            write_file(path, &csv)?;
            let mut fields = header(p, "simulate");
            fields.extend([
                ("rows", Value::from(rows.len())),
                ("final_state", vector(&rows.last().unwrap().1)),
            ]);
            Ok(CommandOutput::ok(object(fields)))
        }
        None => Ok(CommandOutput {
            stdout: csv,
            exit_code: EXIT_OK,
        }),
    }
}

/// `periodic`: the initial state of a p-periodic solution, or `none` with the reason.
pub fn periodic(p: &Problem) -> Result<CommandOutput> {
    let mut fields = header(p, "periodic");
    let ts = p.sys.timescale();
    let end = ts.shift(&p.t0, 1);
    let found = |x0: &CVector, closure: f64, kind: &str| {
        object([
            ("status", Value::from("found")),
            ("kind", Value::from(kind)),
            ("x0", vector(x0)),
            ("closure", num(closure)),
        ])
    };
    let result = match &p.forcing {
        Some(f) => match periodic_solution_nonhomogeneous(&p.sys, f, &p.t0, &p.opts) {
            Ok(x0) => {
                let (particular, phi) = variation_of_constants(&p.sys, f, &p.t0, &end, &p.opts)?;
                let closure = vector_norm(&(phi * &x0 + particular - &x0));
                found(&x0, closure, "nonhomogeneous")
            }
            Err(FloquetError::HomogeneousPeriodic { multiplier }) => object([
                ("status", Value::from("none")),
                (
                    "reason",
                    Value::from("I - M is singular: the homogeneous system has a multiplier equal to 1"),
                ),
                ("multiplier", complex(multiplier)),
            ]),
            Err(e) => return Err(e.into()),
        },
        None => {
            let fd = floquet(p)?;
            match periodic_solution_homogeneous(&fd, p.tolerances.unit) {
                Some(sol) => {
                    let x1 = fd.monodromy() * &sol.x0;
                    let closure = vector_norm(&(x1 - &sol.x0));
                    let mut v = found(&sol.x0, closure, "homogeneous");
                    v["multiplier"] = complex(sol.multiplier);
                    v
                }
                None => object([
                    ("status", Value::from("none")),
                    ("reason", Value::from("no Floquet multiplier equals 1")),
                ]),
            }
        }
    };
    fields.push(("periodic_solution", result));
    Ok(CommandOutput::ok(object(fields)))
}

struct TransformOutcome {
    g: crate::transition::LinearDynamicSystem,
    fd_g: FloquetData,
    verdict: StabilityVerdict,
    verdict_g: StabilityVerdict,
    /// max over the grid of ‖Φ_G(t, t0) − e_R(t, t0)‖_F
    phi_g_vs_exp_r: f64,
    lyapunov: crate::lyapunov::LyapunovReport,
}

fn transform_outcome(p: &Problem, fd: &FloquetData, grid: &[TimePoint]) -> Result<TransformOutcome> {
    let ts = fd.timescale();
    let period = fd.period();
    let claim = LyapunovTransformation::from_floquet(fd, f64::INFINITY, 0.0)?;
    let lyapunov = verify_lyapunov(&claim, ts, &p.t0, period, period / p.grid as f64)?;
    let g = transform_system(&p.sys, &claim, &p.opts)?;
    let fd_g = FloquetData::new(&g, &p.t0, &p.opts)?;
    let fund = Fundamental::new(&g, &p.t0, grid.last().unwrap(), period / 16.0, &p.opts)?;
    let mut worst: f64 = 0.0;
    for tp in grid {
        worst = worst.max(frobenius(&(fund.at(tp)? - fd.exp_r(tp, &p.t0))));
    }
    Ok(TransformOutcome {
        verdict: classify_stability(fd, p.tolerances.unit),
        verdict_g: classify_stability(&fd_g, p.tolerances.unit),
        g,
        fd_g,
        phi_g_vs_exp_r: worst,
        lyapunov,
    })
}

/// `transform`: `G` built from the Floquet factor `L`, the verdicts of both
/// systems, and how closely `Φ_G` follows `e_R`.
pub fn transform(p: &Problem, grid: Option<usize>) -> Result<CommandOutput> {
    let fd = floquet(p)?;
    let pts = period_grid(p, 1.0, grid.unwrap_or(p.grid));
    let o = transform_outcome(p, &fd, &pts)?;
    let ts = fd.timescale();
    let samples = pts
        .iter()
        .map(|tp| {
            Ok(object([
                ("t", num(ts.time(tp))),
                ("g", matrix(&o.g.coefficient(tp)?)),
                ("r", matrix(&fd.r_matrix(tp))),
            ]))
        })
        .collect::<Result<Vec<_>>>()?;
    let l = &o.lyapunov;
    let mut fields = header(p, "transform");
    fields.extend([
        ("samples", Value::Array(samples)),
        ("verdict", verdict_json(&o.verdict)),
        ("verdict_transformed", verdict_json(&o.verdict_g)),
        ("verdict_preserved", Value::from(o.verdict.class == o.verdict_g.class)),
        ("monodromy_transformed", matrix(o.fd_g.monodromy())),
        ("phi_g_vs_exp_r", num(o.phi_g_vs_exp_r)),
        (
            "lyapunov",
            object([
                ("rho_observed", num(l.rho_observed)),
                ("eta_observed", num(l.eta_observed)),
                ("inverse_rho_observed", num(l.inverse_rho_observed)),
                ("inverse_bound_holds", Value::from(l.inverse_bound_holds)),
                ("samples", Value::from(l.samples)),
            ]),
        ),
    ]);
    Ok(CommandOutput::ok(object(fields)))
}

struct Check {
    name: &'static str,
    value: f64,
    tolerance: f64,
    /// reason when the check does not apply to this system
    skipped: Option<String>,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Check {
            name,
            value,
            tolerance,
            skipped: None,
        }
    }

    fn skip(name: &'static str, tolerance: f64, reason: impl Into<String>) -> Self {
        Check {
            name,
            value: 0.0,
            tolerance,
            skipped: Some(reason.into()),
        }
    }

    fn pass(&self) -> bool {
        self.skipped.is_some() || self.value <= self.tolerance
    }

    fn json(&self) -> Value {
        let mut v = object([
            ("name", Value::from(self.name)),
            ("tolerance", num(self.tolerance)),
            ("pass", Value::from(self.pass())),
        ]);
        match &self.skipped {
            Some(reason) => v["skipped"] = Value::from(reason.as_str()),
            None => v["value"] = num(self.value),
        }
        v
    }
}

/// `verify`: every invariant of the theory checked numerically on the
/// configured system.  Exit code 3 when any check fails.
pub fn verify(p: &Problem, grid: Option<usize>) -> Result<CommandOutput> {
    let fd = floquet(p)?;
    let tol = &p.tolerances;
    let ts = fd.timescale();
    let period = fd.period();
    let pts = period_grid(p, 1.0, grid.unwrap_or(p.grid));
    let mut checks = Vec::new();

    let m = fd.monodromy();
    let end = ts.shift(&p.t0, 1);
    checks.push(Check::new(
        "exp_r_over_one_period_is_monodromy",
        relative_distance(&fd.exp_r(&end, &p.t0), m),
        tol.exp_r_period,
    ));
    let dec = verify_decomposition(&fd, &pts)?;
    checks.push(Check::new("decomposition", dec.max_relative, tol.decomposition));
    checks.push(Check::new("l_periodicity", l_periodicity_residual(&fd, &pts)?, tol.periodicity));
    checks.push(Check::new(
        "spectral_mapping",
        spectral_mapping_residual(&fd, &pts)?,
        tol.spectral_mapping,
    ));
    checks.push(Check::new(
        "exponent_nonuniqueness",
        exponent_shift_residual(&fd, -2..=2)?,
        tol.nonuniqueness,
    ));
    checks.push(Check::new(
        "shared_eigenvectors",
        shared_eigenvector_residual(&fd, &pts),
        tol.eigenvector,
    ));
    checks.push(Check::new("mode_repeat", mode_repeat_residual(&fd, &pts)?, tol.mode));

    let pairs = dynamic_eigenpairs(&fd.r_system()?, exponent_maps(&fd), &p.t0, &p.opts)?;
    let mut worst: f64 = 0.0;
    for tp in &pts {
        worst = worst.max(relative_distance(&pairs.reconstruct(tp)?, &fd.exp_r(tp, &p.t0)));
    }
    checks.push(Check::new("mode_reconstruction", worst, tol.mode));

    // the truncated series is only trustworthy for small ‖A‖·p
    let mut budget: f64 = 0.0;
    for tp in &sample_grid(ts, &p.t0, period, 4 * p.grid) {
        budget = budget.max(spectral_norm(&p.sys.coefficient(tp)?) * period);
    }
    if budget <= 2.0 {
        let pb = p.sys.peano_baker_between(&end, &p.t0, &p.opts)?;
        checks.push(Check::new("peano_baker", frobenius(&(pb - m)), tol.peano_baker));
    } else {
        checks.push(Check::skip(
            "peano_baker",
            tol.peano_baker,
            format!("sup ||A||*p = {} exceeds 2", json::float(budget)),
        ));
    }

    match &p.forcing {
        Some(f) => match periodic_solution_nonhomogeneous(&p.sys, f, &p.t0, &p.opts) {
            Ok(x0) => {
                let (particular, phi) = variation_of_constants(&p.sys, f, &p.t0, &end, &p.opts)?;
                let closure = vector_norm(&(phi * &x0 + particular - &x0)) / vector_norm(&x0).max(f64::MIN_POSITIVE);
                checks.push(Check::new("periodic_closure", closure, tol.closure));
            }
            Err(FloquetError::HomogeneousPeriodic { .. }) => {
                checks.push(Check::skip("periodic_closure", tol.closure, "a multiplier equals 1"))
            }
            Err(e) => return Err(e.into()),
        },
        None => checks.push(Check::skip("periodic_closure", tol.closure, "no forcing configured")),
    }

    let o = transform_outcome(p, &fd, &pts)?;
    checks.push(Check::new("transformed_transition", o.phi_g_vs_exp_r, tol.transform));
    checks.push(Check::new(
        "verdict_preserved",
        if o.verdict.class == o.verdict_g.class { 0.0 } else { 1.0 },
        0.0,
    ));
    checks.push(Check::new(
        "lyapunov_inverse_bound",
        if o.lyapunov.inverse_bound_holds { 0.0 } else { 1.0 },
        0.0,
    ));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass()).map(|c| c.name).collect();
    for c in &checks {
        info!("{} {}", if c.pass() { "PASS" } else { "FAIL" }, c.name);
    }
    let mut fields = header(p, "verify");
    fields.extend([
        ("verdict", verdict_json(&o.verdict)),
        ("checks", Value::Array(checks.iter().map(Check::json).collect())),
        ("pass", Value::from(failed.is_empty())),
        ("failed", Value::Array(failed.iter().map(|s| Value::from(*s)).collect())),
    ]);
    Ok(CommandOutput {
        stdout: json::to_string(&object(fields)),
        exit_code: if failed.is_empty() { EXIT_OK } else { EXIT_NUMERIC },
    })
}
