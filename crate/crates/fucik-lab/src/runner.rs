//! Task orchestration: assemble (with cache), run the requested pipeline,
//! and emit deterministic CSV/SVG outputs.

use std::path::{Path, PathBuf};

use nalgebra::DVector;

use crate::assembly::{assemble, GalerkinPair};
use crate::cache;
use crate::config::{FKindConfig, RunConfig, TargetConfig, Task};
use crate::continuation::{trace_curve, trivial_lines_check, validate_curve, Curve, MethodTag};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Mesh};
use crate::minimax::{c_of_p, MinimaxOptions};
use crate::nonresonance::{
    solve_nonresonance, Classification, NonlinearityKind, NonlinearitySpec,
};
use crate::output::{curve_svg, fmt_f, metadata_comment, read_curve_csv, write_csv};
use crate::spectrum::{domain_monotonicity, lowest_eigenpairs};

/// Run-wide options that come from the command line rather than the config.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub use_cache: bool,
}

/// Summary of a completed run.
#[derive(Debug)]
pub struct RunReport {
    pub task: Task,
    /// Human-readable result lines, printed by the CLI.
    pub messages: Vec<String>,
    /// Number of failed validators; the process exits nonzero when > 0.
    pub failures: usize,
    /// Files written.
    pub outputs: Vec<PathBuf>,
}

fn assemble_cached(cfg: &RunConfig, opts: &RunOptions) -> Result<GalerkinPair<f64>> {
    let mesh = Mesh::uniform(cfg.domain.clone(), cfg.n)?;
    let path = cache::cache_path(&opts.out_dir, &mesh, &cfg.kernel);
    if opts.use_cache {
        if let Some(gp) = cache::load(&path, &mesh, &cfg.kernel) {
            log::info!("matrix cache hit: {}", path.display());
            return Ok(gp);
        }
    }
    let gp = assemble(&mesh, &cfg.kernel)?;
    if opts.use_cache {
        if let Err(err) = cache::store(&path, &gp) {
            log::warn!("could not write matrix cache {}: {err}", path.display());
        }
    }
    Ok(gp)
}

fn solution_rows(gp: &GalerkinPair<f64>, u: &DVector<f64>) -> Vec<Vec<String>> {
    let nodes = gp.mesh().nodes();
    (0..u.len())
        .map(|i| vec![fmt_f(nodes[i]), fmt_f(u[i])])
        .collect()
}

fn history_rows(history: &[(usize, f64, f64)]) -> Vec<Vec<String>> {
    history
        .iter()
        .map(|&(sweep, level, crit)| vec![sweep.to_string(), fmt_f(level), fmt_f(crit)])
        .collect()
}

/// Execute `task` on `cfg` and write outputs under `opts.out_dir`.
pub fn run(cfg: &RunConfig, task: Task, opts: &RunOptions) -> Result<RunReport> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let gp = assemble_cached(cfg, opts)?;
    let meta = metadata_comment(&gp);
    let mut report = RunReport {
        task,
        messages: Vec::new(),
        failures: 0,
        outputs: Vec::new(),
    };
    match task {
        Task::Spectrum => run_spectrum(cfg, &gp, &meta, opts, &mut report)?,
        Task::Minimax => run_minimax(cfg, &gp, &meta, opts, &mut report)?,
        Task::Curve => run_curve(cfg, &gp, &meta, opts, &mut report)?,
        Task::Nonres => run_nonres(cfg, &gp, &meta, opts, &mut report)?,
        Task::Validate => run_validate(cfg, &gp, &meta, opts, &mut report)?,
    }
    Ok(report)
}

fn run_spectrum(
    cfg: &RunConfig,
    gp: &GalerkinPair<f64>,
    meta: &str,
    opts: &RunOptions,
    report: &mut RunReport,
) -> Result<()> {
    let eig = lowest_eigenpairs(gp, cfg.spectrum_k, cfg.spectrum_tol)?;
    let rows: Vec<Vec<String>> = eig
        .iter()
        .map(|e| {
            vec![
                e.index.to_string(),
                fmt_f(e.value),
                fmt_f(e.residual),
            ]
        })
        .collect();
    let path = opts.out_dir.join("spectrum.csv");
    write_csv(&path, meta, &["index", "value", "residual"], &rows)?;
    report.outputs.push(path);

    let nodes = gp.mesh().nodes();
    let mut header: Vec<String> = vec!["x".into()];
    for e in &eig {
        header.push(format!("phi_{}", e.index));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let vec_rows: Vec<Vec<String>> = (0..gp.n_dofs())
        .map(|i| {
            let mut row = vec![fmt_f(nodes[i])];
            row.extend(eig.iter().map(|e| fmt_f(e.vector[i])));
            row
        })
        .collect();
    let path = opts.out_dir.join("eigenvectors.csv");
    write_csv(&path, meta, &header_refs, &vec_rows)?;
    report.outputs.push(path);

    for e in &eig {
        report.messages.push(format!(
            "lambda_{} = {:.12} (residual {:.3e})",
            e.index,
            e.value,
            e.residual
        ));
    }
    Ok(())
}

fn run_minimax(
    cfg: &RunConfig,
    gp: &GalerkinPair<f64>,
    meta: &str,
    opts: &RunOptions,
    report: &mut RunReport,
) -> Result<()> {
    let mm_opts = MinimaxOptions {
        n_path: cfg.minimax_n_path,
        crit_tol: cfg.minimax_crit_tol,
        polish_tol: cfg.minimax_polish_tol,
        ..MinimaxOptions::default()
    };
    let cp = c_of_p(gp, cfg.minimax_p, &mm_opts)?;

    let path = opts.out_dir.join("minimax.csv");
    write_csv(
        &path,
        meta,
        &[
            "p", "c", "alpha", "beta", "t", "criticality", "polished", "stalled", "sweeps",
        ],
        &[vec![
            fmt_f(cp.p),
            fmt_f(cp.value),
            fmt_f(cp.alpha()),
            fmt_f(cp.beta()),
            fmt_f(cp.t),
            fmt_f(cp.criticality),
            (cp.polished as u8).to_string(),
            (cp.stalled as u8).to_string(),
            cp.sweeps.to_string(),
        ]],
    )?;
    report.outputs.push(path);

    let path = opts.out_dir.join("minimax_history.csv");
    write_csv(
        &path,
        meta,
        &["sweep", "level", "criticality"],
        &history_rows(&cp.history),
    )?;
    report.outputs.push(path);

    let path = opts.out_dir.join("minimax_solution.csv");
    write_csv(&path, meta, &["x", "u"], &solution_rows(gp, &cp.u))?;
    report.outputs.push(path);

    report.messages.push(format!(
        "c({}) = {:.12} at (alpha, beta) = ({:.12}, {:.12}), criticality {:.3e}, {} sweeps{}{}",
        cp.p,
        cp.value,
        cp.alpha(),
        cp.beta(),
        cp.criticality,
        cp.sweeps,
        if cp.polished { ", polished" } else { "" },
        if cp.stalled { ", STALLED" } else { "" },
    ));
    if cp.stalled && !cp.polished {
        report.failures += 1;
    }
    Ok(())
}

fn curve_branch_rows(points: &[crate::continuation::FucikPoint<f64>], branch: &str) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|pt| {
            vec![
                fmt_f(pt.p),
                fmt_f(pt.alpha),
                fmt_f(pt.beta),
                fmt_f(pt.t),
                fmt_f(pt.residual),
                match pt.method {
                    MethodTag::Minimax => "minimax".into(),
                    MethodTag::Continuation => "continuation".into(),
                },
                branch.to_string(),
            ]
        })
        .collect()
}

fn write_curve_outputs(
    curve: &Curve<f64>,
    meta: &str,
    opts: &RunOptions,
    report: &mut RunReport,
) -> Result<()> {
    let mut rows = curve_branch_rows(&curve.points, "main");
    rows.extend(curve_branch_rows(&curve.mirror, "mirror"));
    let path = opts.out_dir.join("curve.csv");
    write_csv(
        &path,
        meta,
        &["p", "alpha", "beta", "t", "residual", "method", "branch"],
        &rows,
    )?;
    report.outputs.push(path);

    let main: Vec<(f64, f64)> = curve.points.iter().map(|pt| (pt.alpha, pt.beta)).collect();
    let mirror: Vec<(f64, f64)> = curve.mirror.iter().map(|pt| (pt.alpha, pt.beta)).collect();
    let svg = curve_svg(&main, &mirror, curve.lambda1, curve.lambda2);
    let path = opts.out_dir.join("curve.svg");
    std::fs::write(&path, svg)?;
    report.outputs.push(path);
    Ok(())
}

fn run_curve(
    cfg: &RunConfig,
    gp: &GalerkinPair<f64>,
    meta: &str,
    opts: &RunOptions,
    report: &mut RunReport,
) -> Result<()> {
    let curve = trace_curve(gp, cfg.curve_p_max, cfg.curve_dp, cfg.curve_tol)?;
    write_curve_outputs(&curve, meta, opts, report)?;

    report.messages.push(format!(
        "traced {} points (plus mirror branch), lambda_1 = {:.12}, lambda_2 = {:.12}{}",
        curve.points.len(),
        curve.lambda1,
        curve.lambda2,
        if curve.truncated { ", TRUNCATED" } else { "" },
    ));
    if curve.truncated {
        report.failures += 1;
    }

    let props = validate_curve(&curve)?;
    for (name, check) in [
        ("lipschitz", &props.lipschitz),
        ("strict-monotone", &props.strict_monotone),
        ("above-lambda1", &props.above_lambda1),
        ("approach-lambda1", &props.approach_lambda1),
    ] {
        report.messages.push(format!(
            "property {name}: {} ({})",
            if check.pass { "pass" } else { "FAIL" },
            check.detail
        ));
        if !check.pass {
            report.failures += 1;
        }
    }

    let trivial = trivial_lines_check(gp, &[0.0, curve.lambda1, 1e3])?;
    let ok = trivial.all_within();
    report.messages.push(format!(
        "trivial lines: {} (eigen residual {:.3e})",
        if ok { "pass" } else { "FAIL" },
        trivial.eigen_residual
    ));
    if !ok {
        report.failures += 1;
    }
    Ok(())
}

fn resolve_target(
    cfg: &RunConfig,
    lambda2: f64,
) -> Result<(f64, f64)> {
    match &cfg.f_target {
        None => Ok((lambda2, lambda2)),
        Some(TargetConfig::Explicit { alpha, beta }) => Ok((*alpha, *beta)),
        Some(TargetConfig::CurveCsv { path, p }) => {
            let rows = read_curve_csv(Path::new(path))?;
            let best = rows
                .iter()
                .min_by(|a, b| {
                    (a.0 - p).abs().partial_cmp(&(b.0 - p).abs()).unwrap()
                })
                .unwrap();
            Ok((best.1, best.2))
        }
    }
}

fn run_nonres(
    cfg: &RunConfig,
    gp: &GalerkinPair<f64>,
    meta: &str,
    opts: &RunOptions,
    report: &mut RunReport,
) -> Result<()> {
    let eig = lowest_eigenpairs(gp, 2, cfg.spectrum_tol)?;
    let (lambda1, lambda2) = (eig[0].value, eig[1].value);
    let mid = 0.5 * (lambda1 + lambda2);
    let kind = match cfg.f_kind.as_ref().ok_or_else(|| Error::Config {
        key: "f.kind".into(),
        msg: "required for the nonres task".into(),
    })? {
        FKindConfig::LinearShift { m, c } => NonlinearityKind::LinearShift {
            m: m.unwrap_or(mid),
            c: *c,
        },
        FKindConfig::PiecewiseAsymptotic {
            slope_pos,
            slope_neg,
        } => NonlinearityKind::PiecewiseAsymptotic {
            slope_pos: slope_pos.unwrap_or(0.6 * lambda1 + 0.4 * lambda2),
            slope_neg: slope_neg.unwrap_or(0.4 * lambda1 + 0.6 * lambda2),
        },
        FKindConfig::CustomTable {
            breaks,
            values,
            slope_neg,
            slope_pos,
        } => NonlinearityKind::CustomTable {
            breaks: breaks.clone(),
            values: values.clone(),
            slope_neg: *slope_neg,
            slope_pos: *slope_pos,
        },
    };
    let target = resolve_target(cfg, lambda2)?;
    let spec = NonlinearitySpec::gated(kind, target, gp)?;
    let sol = solve_nonresonance(gp, &spec, cfg.nonres_tol)?;

    let path = opts.out_dir.join("nonres_solution.csv");
    write_csv(&path, meta, &["x", "u"], &solution_rows(gp, &sol.u))?;
    report.outputs.push(path);

    let path = opts.out_dir.join("nonres_convergence.csv");
    write_csv(
        &path,
        meta,
        &["sweep", "level", "grad_norm"],
        &history_rows(&sol.history),
    )?;
    report.outputs.push(path);

    let class = match sol.classification {
        Classification::MountainPass => "mountain-pass",
        Classification::Minimizer => "minimizer",
        Classification::Unknown => "unknown",
    };
    report.messages.push(format!(
        "critical point: Psi = {:.12}, grad norm {:.3e}, classification {class}, R = {}, endpoints Psi(+R phi_1) = {:.6}, Psi(-R phi_1) = {:.6}",
        sol.value, sol.grad_norm, sol.r, sol.endpoints.0, sol.endpoints.1
    ));
    if sol.classification == Classification::Unknown {
        report.failures += 1;
    }
    Ok(())
}

fn run_validate(
    cfg: &RunConfig,
    gp: &GalerkinPair<f64>,
    meta: &str,
    opts: &RunOptions,
    report: &mut RunReport,
) -> Result<()> {
    let mut checks: Vec<(String, bool)> = Vec::new();

    // 1. Kernel admissibility report.
    let kc = gp.kernel().condition_report();
    checks.push((
        format!(
            "kernel conditions (integrability {:.6})",
            kc.integrability
        ),
        kc.all_ok(),
    ));

    // 2. Eigenpair residuals under tolerance.
    let eig = lowest_eigenpairs(gp, 2, cfg.spectrum_tol)?;
    let (lambda1, lambda2) = (eig[0].value, eig[1].value);
    checks.push((
        format!(
            "eigen residuals ({:.3e}, {:.3e}) <= {:.1e}",
            eig[0].residual, eig[1].residual, cfg.spectrum_tol
        ),
        eig.iter().all(|e| e.residual <= cfg.spectrum_tol),
    ));

    // 3. Energy decomposition identity on deterministic pseudo-random
    //    vectors: energy(u) = energy(u+) + energy(u-) + 4 cross(u+, u-).
    let n = gp.n_dofs();
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u = DVector::from_fn(n, |_, _| next());
        let up = u.map(|x| x.max(0.0));
        let un = u.map(|x| (-x).max(0.0));
        let lhs = gp.energy(&u)?;
        let rhs = gp.energy(&up)? + gp.energy(&un)? + 4.0 * gp.cross_term(&up, &un)?;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
        }
    checks.push((
        format!("energy decomposition identity (worst {worst:.3e})"),
        worst <= 1e-10,
    ));

    // 4. Trivial lines carried by the principal eigenfunction.
    let trivial = trivial_lines_check(gp, &[0.0, lambda1, 1e3])?;
    checks.push((
        format!("trivial lines (eigen residual {:.3e})", trivial.eigen_residual),
        trivial.all_within(),
    ));

    // 5. Domain monotonicity of the principal eigenvalue.
    let (a0, b0) = cfg.domain.intervals()[0];
    let mid = 0.5 * (a0 + b0);
    let quarter = 0.25 * (b0 - a0);
    let inner = Domain::interval(mid - quarter, mid + quarter)?;
    let outer = Domain::new(cfg.domain.intervals().to_vec())?;
    if cfg.domain.connected() {
        let (inner_l1, outer_l1) = domain_monotonicity(gp.kernel(), &inner, &outer, cfg.n.min(128))?;
        checks.push((
            format!("domain monotonicity ({inner_l1:.6} > {outer_l1:.6})"),
            inner_l1 > outer_l1,
        ));
    }

    // 6. Minimax at p = 0 agrees with lambda_2.
    let cp = c_of_p(gp, 0.0, &MinimaxOptions::default())?;
    let rel = (cp.value - lambda2).abs() / lambda2;
    checks.push((
        format!("minimax c(0) vs lambda_2 (relative {rel:.3e})"),
        rel <= 1e-4,
    ));

    // 7. Short continuation run satisfies the curve properties.
    let curve = trace_curve(gp, 1.0f64.min(cfg.curve_p_max), cfg.curve_dp.min(0.25), cfg.curve_tol)?;
    let props = validate_curve(&curve)?;
    checks.push((
        "curve properties on a short trace".to_string(),
        props.all_pass() && !curve.truncated,
    ));

    let passed = checks.iter().filter(|(_, ok)| *ok).count();
    for (name, ok) in &checks {
        report
            .messages
            .push(format!("{} {name}", if *ok { "pass" } else { "FAIL" }));
    }
    report
        .messages
        .push(format!("{passed}/{} checks passed", checks.len()));
    report.failures += checks.len() - passed;

    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|(name, ok)| vec![name.clone(), (*ok as u8).to_string()])
        .collect();
    let path = opts.out_dir.join("validate.csv");
    write_csv(&path, meta, &["check", "pass"], &rows)?;
    report.outputs.push(path);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn options(dir: &Path) -> RunOptions {
        RunOptions {
            out_dir: dir.to_path_buf(),
            use_cache: true,
        }
    }

    #[test]
    fn spectrum_task_writes_outputs_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("mesh.n = 24\n").unwrap();
        let opts = options(dir.path());
        let report = run(&cfg, Task::Spectrum, &opts).unwrap();
        assert_eq!(report.failures, 0);
        assert!(dir.path().join("spectrum.csv").is_file());
        assert!(dir.path().join("eigenvectors.csv").is_file());
        // Cache was populated and a re-run reproduces identical bytes.
        let cache_files: Vec<_> = std::fs::read_dir(dir.path().join("cache"))
            .unwrap()
            .collect();
        assert_eq!(cache_files.len(), 1);
        let first = std::fs::read(dir.path().join("spectrum.csv")).unwrap();
        run(&cfg, Task::Spectrum, &opts).unwrap();
        let second = std::fs::read(dir.path().join("spectrum.csv")).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn validate_task_passes_on_default_problem() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("mesh.n = 32\ncurve.dp = 0.25\ncurve.p_max = 0.5\n").unwrap();
        let report = run(&cfg, Task::Validate, &options(dir.path())).unwrap();
        assert_eq!(report.failures, 0, "{:#?}", report.messages);
    }
}
