use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use stablepoh::config::RunConfig;
use stablepoh::geometry::DomainGeometry;
use stablepoh::grid::GridFunction;
use stablepoh::pohozaev::{
    verify_dilation, verify_directional, verify_integration_by_parts, verify_semilinear,
    PohozaevReport,
};
use stablepoh::report::{
    fit_rows, render_report_table, trace_rows, write_csv, write_grid_dump, write_reports_json,
    RunManifest,
};
use stablepoh::solver::{
    assemble_energy, solve_linear, solve_semilinear, DirichletSolution, EnergyForm, OperatorSpec,
};
use stablepoh::spectral::{HalfKernelDensity, StableSymbol};
use stablepoh::traces::{
    boundary_quotient, fit_log_singularity, BoundaryTrace, FitOptions, FitTarget, TraceOptions,
};
use stablepoh::{Error, Result};

struct Workspace {
    cfg: RunConfig,
    config_text: String,
    domain: DomainGeometry,
    operator: OperatorSpec,
    s: f64,
    symbol: StableSymbol,
}

fn setup(config_path: &Path) -> Result<Workspace> {
    let cfg = RunConfig::load(config_path)?;
    let config_text = fs::read_to_string(config_path)?;
    let domain = cfg.build_domain()?;
    let operator = cfg.build_operator()?;
    let s = cfg.order()?;
    let symbol = operator.symbol(s)?;
    Ok(Workspace { cfg, config_text, domain, operator, s, symbol })
}

fn ensure_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn solve_at(ws: &Workspace, h: f64) -> Result<(EnergyForm, DirichletSolution)> {
    let opts = ws.cfg.solver_options();
    let form = assemble_energy(&ws.domain, &ws.operator, ws.s, h, &opts)?;
    let load_cfg = ws.cfg.load.clone();
    let sol = if load_cfg.is_semilinear() {
        solve_semilinear(&form, &move |x, u| load_cfg.eval(x, u), &opts)?
    } else {
        let f = GridFunction::from_fn(form.scaffold().clone(), |x| load_cfg.eval(x, 0.0))?;
        solve_linear(&form, &f, &opts)?
    };
    Ok((form, sol))
}

fn solution_rows(sol: &DirichletSolution) -> Vec<Vec<f64>> {
    let grid = sol.u.grid().clone();
    let mut rows = Vec::new();
    for j in 0..grid.nodes[1] {
        for i in 0..grid.nodes[0] {
            let p = grid.point(i, j);
            if grid.dim == 1 {
                rows.push(vec![p[0], sol.u.node_value(i, j)]);
            } else {
                rows.push(vec![p[0], p[1], sol.u.node_value(i, j)]);
            }
        }
    }
    rows
}

pub fn cmd_symbol(config: &Path, out: &Path) -> Result<ExitCode> {
    let ws = setup(config)?;
    ensure_out(out)?;
    let mut manifest = RunManifest::new(ws.config_text.clone(), 0);
    manifest.add_input(config)?;
    let t0 = Instant::now();

    let n = 256usize;
    let mut symbol_rows = Vec::with_capacity(n);
    for i in 0..n {
        let phi = 2.0 * PI * i as f64 / n as f64;
        let a = ws.symbol.sphere_value(phi);
        symbol_rows.push(vec![phi, a, a.sqrt()]);
    }
    let symbol_path = out.join("symbol.csv");
    write_csv(&symbol_path, "angle,A,B", &symbol_rows)?;
    manifest.add_artifact(&symbol_path)?;

    let kernel_path = out.join("half_kernel.csv");
    let b = HalfKernelDensity::from_symbol(&ws.symbol)?;
    let mut kernel_rows = Vec::with_capacity(n);
    for i in 0..n {
        let phi = 2.0 * PI * i as f64 / n as f64;
        kernel_rows.push(vec![phi, b.eval_angle(phi)]);
    }
    write_csv(&kernel_path, "angle,b", &kernel_rows)?;
    manifest.add_artifact(&kernel_path)?;

    // inversion residual summary: mode route plus an independent direct
    // quadrature of the sphere pairing at a few off-node angles
    let mut summary = format!(
        "half-kernel inversion residual (mode route): {:.3e}\n",
        b.max_residual
    );
    let mut direct_worst = 0.0_f64;
    for k in 0..8 {
        let nu = 0.1 + 2.0 * PI * k as f64 / 8.0;
        let fwd = b.forward_pairing(nu);
        let target = ws.symbol.sqrt_sphere(nu);
        direct_worst = direct_worst.max((fwd - target).abs());
    }
    summary.push_str(&format!(
        "half-kernel inversion residual (direct quadrature, 8 angles): {direct_worst:.3e}\n"
    ));
    let summary_path = out.join("symbol_residuals.txt");
    fs::write(&summary_path, &summary)?;
    manifest.add_artifact(&summary_path)?;

    manifest.add_stage("symbol", t0.elapsed().as_secs_f64());
    manifest.write(out)?;
    print!("{summary}");
    println!("symbol tables written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_solve(config: &Path, out: &Path, seed: Option<u64>) -> Result<ExitCode> {
    let ws = setup(config)?;
    ensure_out(out)?;
    let mut manifest = RunManifest::new(ws.config_text.clone(), seed.unwrap_or(0));
    manifest.add_input(config)?;

    let t0 = Instant::now();
    let (_form, sol) = solve_at(&ws, ws.cfg.solver.h)?;
    manifest.add_stage("solve", t0.elapsed().as_secs_f64());

    let csv_path = out.join("solution.csv");
    let header = if ws.domain.dim() == 1 { "x,u" } else { "x,y,u" };
    write_csv(&csv_path, header, &solution_rows(&sol))?;
    manifest.add_artifact(&csv_path)?;

    let dump_path = out.join("solution.grid");
    write_grid_dump(&dump_path, &sol.u)?;
    manifest.add_artifact(&dump_path)?;

    manifest.write(out)?;
    println!(
        "solved {} unknowns at h = {} (final CG residual {:.2e})",
        sol.u.values().iter().filter(|v| **v != 0.0).count(),
        sol.h,
        sol.residual_history.last().copied().unwrap_or(0.0)
    );
    println!("solution written to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn run_identities(
    ws: &Workspace,
    sol: &DirichletSolution,
    trace: &BoundaryTrace,
) -> Result<Vec<PohozaevReport>> {
    let mut reports = Vec::new();
    for identity in &ws.cfg.verify.identities {
        let report = match identity.as_str() {
            "dilation" => verify_dilation(sol, &ws.domain, trace, &ws.symbol)?,
            "directional-x" => {
                verify_directional(sol, &ws.domain, trace, &ws.symbol, [1.0, 0.0])?
            }
            "directional-y" => {
                verify_directional(sol, &ws.domain, trace, &ws.symbol, [0.0, 1.0])?
            }
            "semilinear" => {
                let load_cfg = ws.cfg.load.clone();
                if load_cfg.gradient != [0.0, 0.0] {
                    return Err(Error::Argument(
                        "the semilinear identity needs an x-independent nonlinearity".into(),
                    ));
                }
                verify_semilinear(
                    sol,
                    &ws.domain,
                    trace,
                    &ws.symbol,
                    &|u| load_cfg.eval([0.0, 0.0], u),
                    None,
                )?
            }
            "integration-by-parts" => verify_integration_by_parts(
                sol, sol, &ws.domain, trace, trace, &ws.symbol, 0,
            )?,
            other => {
                return Err(Error::Config(format!("unknown identity '{other}'")));
            }
        };
        reports.push(report);
    }
    Ok(reports)
}

pub fn cmd_verify(
    config: &Path,
    out: &Path,
    levels: Option<usize>,
    threshold: Option<f64>,
    seed: Option<u64>,
) -> Result<ExitCode> {
    let mut ws = setup(config)?;
    if let Some(l) = levels {
        ws.cfg.verify.levels = l;
    }
    if let Some(t) = threshold {
        ws.cfg.verify.threshold = t;
    }
    ensure_out(out)?;
    let mut manifest = RunManifest::new(ws.config_text.clone(), seed.unwrap_or(ws.cfg.verify.seed));
    manifest.add_input(config)?;

    let mut all_reports = Vec::new();
    let mut convergence = Vec::new();
    for level in (0..ws.cfg.verify.levels).rev() {
        let h = ws.cfg.solver.h * 2f64.powi(level as i32);
        let t0 = Instant::now();
        let (_form, sol) = solve_at(&ws, h)?;
        let trace = boundary_quotient(&sol.u, &ws.domain, ws.s, &TraceOptions::for_grid(h))?;
        let reports = run_identities(&ws, &sol, &trace)?;
        manifest.add_stage(&format!("level h={h}"), t0.elapsed().as_secs_f64());
        let worst = reports.iter().map(|r| r.rel_defect).fold(0.0, f64::max);
        // max |q₀|: the hypothesis of the unique-continuation statement
        // (a vanishing trace forces the trivial solution) as a data field
        let q0_max = trace.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        convergence.push(vec![h, worst, q0_max]);
        all_reports.extend(reports);
    }

    let reports_path = out.join("reports.json");
    write_reports_json(&reports_path, &all_reports)?;
    manifest.add_artifact(&reports_path)?;
    let conv_path = out.join("convergence.csv");
    write_csv(&conv_path, "h,worst_rel_defect,trace_q0_max", &convergence)?;
    manifest.add_artifact(&conv_path)?;
    let table = render_report_table(&all_reports);
    let table_path = out.join("reports.txt");
    fs::write(&table_path, &table)?;
    manifest.add_artifact(&table_path)?;
    manifest.write(out)?;
    print!("{table}");

    // informational: the sign condition distinguishing subcritical
    // nonlinearities, evaluated on the sampled range
    if ws.cfg.load.is_semilinear() {
        let load_cfg = ws.cfg.load.clone();
        let margin = stablepoh::pohozaev::subcritical_margin(
            &|t| load_cfg.eval([0.0, 0.0], t),
            ws.domain.dim(),
            ws.s,
            1.0,
            64,
        );
        println!(
            "subcriticality margin over (0, 1]: {margin:+.4e} ({})",
            if margin > 0.0 { "sign condition holds" } else { "sign condition fails" }
        );
    }

    let finest_worst = convergence.last().map(|row| row[1]).unwrap_or(f64::INFINITY);
    if finest_worst > ws.cfg.verify.threshold {
        eprintln!(
            "worst relative defect {finest_worst:.4} exceeds threshold {}",
            ws.cfg.verify.threshold
        );
        return Ok(ExitCode::from(2));
    }
    println!("worst relative defect {finest_worst:.4} within threshold");
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_trace(config: &Path, out: &Path) -> Result<ExitCode> {
    let ws = setup(config)?;
    ensure_out(out)?;
    let mut manifest = RunManifest::new(ws.config_text.clone(), 0);
    manifest.add_input(config)?;
    let t0 = Instant::now();
    let (_form, sol) = solve_at(&ws, ws.cfg.solver.h)?;
    let trace =
        boundary_quotient(&sol.u, &ws.domain, ws.s, &TraceOptions::for_grid(ws.cfg.solver.h))?;
    manifest.add_stage("trace", t0.elapsed().as_secs_f64());
    let path = out.join("trace.csv");
    write_csv(
        &path,
        "index,x,y,nu_x,nu_y,q0,residual",
        &trace_rows(&ws.domain, &trace),
    )?;
    manifest.add_artifact(&path)?;
    let boundary_path = out.join("boundary.csv");
    let boundary_rows: Vec<Vec<f64>> = ws
        .domain
        .boundary_nodes()
        .iter()
        .map(|bn| vec![bn.point[0], bn.point[1], bn.normal[0], bn.normal[1], bn.weight])
        .collect();
    write_csv(&boundary_path, "x,y,nu_x,nu_y,weight", &boundary_rows)?;
    manifest.add_artifact(&boundary_path)?;
    manifest.write(out)?;
    println!(
        "trace written to {} (max fit residual {:.3e})",
        out.display(),
        trace.max_residual()
    );
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_fit_singularity(
    config: &Path,
    out: &Path,
    indices: &[usize],
    use_solution: bool,
) -> Result<ExitCode> {
    let ws = setup(config)?;
    ensure_out(out)?;
    let b = HalfKernelDensity::from_symbol(&ws.symbol)?;
    let n_bdry = ws.domain.boundary_nodes().len();
    let indices: Vec<usize> = if indices.is_empty() {
        vec![0, n_bdry / 4]
    } else {
        indices.to_vec()
    };
    let h = ws.cfg.solver.h;
    let scheme = ws.cfg.quadrature_scheme();
    let sol_storage;
    let mut fits = Vec::new();
    let target = if use_solution {
        let (_form, sol) = solve_at(&ws, h)?;
        sol_storage = sol;
        FitTarget::Solution(&sol_storage.u)
    } else {
        FitTarget::DistancePower
    };
    let diam = ws.domain.diameter();
    let opts = if use_solution {
        FitOptions::for_scale(4.0 * h, 0.12 * diam, ws.s)
    } else {
        FitOptions::for_scale(2e-3 * diam, 0.04 * diam, ws.s)
    };
    for &idx in &indices {
        fits.push(fit_log_singularity(&target, &ws.domain, &b, idx, &scheme, &opts)?);
    }
    let path = out.join("singular_fits.csv");
    write_csv(&path, "x,y,c_log,c_jump,smooth,residual", &fit_rows(&fits))?;
    let mut manifest = RunManifest::new(ws.config_text.clone(), 0);
    manifest.add_input(config)?;
    manifest.add_artifact(&path)?;
    manifest.write(out)?;
    for fit in &fits {
        println!(
            "({:+.4}, {:+.4}): c_log = {:+.5}, c_jump = {:+.5}, residual = {:.2e}",
            fit.boundary_point[0], fit.boundary_point[1], fit.c_log, fit.c_jump, fit.residual
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_oned_lemma(a: f64, b: f64, delta: f64, richardson: usize) -> Result<ExitCode> {
    use stablepoh::pohozaev::{profile_scaling_derivative, ScalingDerivativeOptions};
    let opts = ScalingDerivativeOptions { delta, richardson, quad_tol: 1e-10 };
    let value = profile_scaling_derivative(a, b, None, &opts)?;
    let target = a * a * PI * PI + b * b;
    println!("estimate  = {value:.8}");
    println!("reference = {target:.8} (A²π² + B²)");
    println!("rel error = {:.3e}", (value - target).abs() / target.abs().max(1e-300));
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_report(out: &Path, check: bool) -> Result<ExitCode> {
    let reports_path = out.join("reports.json");
    if reports_path.exists() {
        let text = fs::read_to_string(&reports_path)?;
        let reports: Vec<PohozaevReport> = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("cannot parse reports.json: {e}")))?;
        print!("{}", render_report_table(&reports));
    }
    if check {
        let results = RunManifest::check(out)?;
        let mut ok = true;
        for (name, matched) in &results {
            println!("{}  {}", if *matched { "ok  " } else { "FAIL" }, name);
            ok &= matched;
        }
        if !ok {
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

