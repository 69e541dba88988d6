use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use gsp_core::gsp::{
    feasibility_check, minimal_slope, solve as solve_problem, GspSolution, HittingTimeTarget, Verdict,
};
use gsp_core::simulate::{sample_euler, sample_exact, EulerConfig, Method};
use gsp_core::skorohod::{
    minimal_wedge_slopes, sample_embedding, solve_embedding, Side, SignedTarget, SkorohodSolution, WedgeBoundary,
};
use gsp_core::verify::{
    ks_one_sample, oracle_table, oracle_time_grid, run_verification, shipped_cases, KsResult, VerificationReport,
    KS_MIN_SAMPLES,
};
use serde::Serialize;

use crate::config::{parse_side, parse_target, CaseConfig};
use crate::{
    EmbedArgs, MethodArg, OracleArgs, ProblemArgs, SamplingArgs, SimulateArgs, SolveArgs, VerificationFailed,
    VerifyArgs,
};

const DEFAULT_SEED: u64 = 0;
const DEFAULT_LANES: usize = 1;
const DEFAULT_ORACLE_POINTS: usize = 50;

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn sibling_json(explicit: Option<PathBuf>, output: Option<&Path>) -> Option<PathBuf> {
    explicit.or_else(|| output.map(|p| p.with_extension("json")))
}

fn resolve_target(problem: &ProblemArgs, cfg: &CaseConfig) -> Result<HittingTimeTarget> {
    match (&problem.target, &cfg.target) {
        (Some(spec), _) => parse_target(spec),
        (None, Some(t)) => Ok(t.clone()),
        (None, None) => bail!("a target law is required: pass --target or set `target` in --config"),
    }
}

fn default_slope(target: &HittingTimeTarget) -> Result<f64> {
    match target {
        HittingTimeTarget::Stable(_) => Ok(0.0),
        HittingTimeTarget::MomentsOnly { .. } => bail!("moments-only targets need an explicit --k"),
        _ => Ok(minimal_slope(target)?.value),
    }
}

/// Solution from `--solution`, the config's `solution`, or target + slope.
fn resolve_solution(problem: &ProblemArgs, solution: Option<&Path>, cfg: &CaseConfig) -> Result<GspSolution> {
    let loaded = match solution {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(
                serde_json::from_str::<GspSolution>(&text)
                    .with_context(|| format!("parsing solution {}", path.display()))?,
            )
        }
        None if problem.target.is_none() => cfg.solution.clone(),
        None => None,
    };
    if let Some(sol) = loaded {
        sol.validate()?;
        return Ok(sol);
    }
    let target = resolve_target(problem, cfg)?;
    let k = match problem.k.or(cfg.k) {
        Some(k) => k,
        None => default_slope(&target)?,
    };
    Ok(solve_problem(&target, k)?)
}

fn sampling(args: &SamplingArgs, cfg: &CaseConfig) -> Result<(usize, u64, usize)> {
    let n = args
        .n
        .or(cfg.n)
        .ok_or_else(|| anyhow!("a sample count is required: pass --n or set `n` in --config"))?;
    let lanes = args.lanes.or(cfg.lanes).unwrap_or(DEFAULT_LANES);
    if lanes == 0 {
        bail!("--lanes must be at least 1");
    }
    Ok((n, args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED), lanes))
}

pub fn solve(args: SolveArgs) -> Result<()> {
    let cfg = CaseConfig::load(args.problem.config.as_deref())?;
    let output = args.problem.output.clone().or(cfg.output.clone());
    let target = resolve_target(&args.problem, &cfg)?;
    if let HittingTimeTarget::MomentsOnly { mean, second_moment } = target {
        let k = args
            .problem
            .k
            .or(cfg.k)
            .ok_or_else(|| anyhow!("moments-only targets need an explicit --k"))?;
        let f = feasibility_check(mean, second_moment, k)?;
        write_json(output.as_deref(), &f)?;
        if f.verdict == Verdict::Infeasible {
            return Err(gsp_core::Error::InfeasibleSlope {
                k,
                k_star: f.bound,
                sharp: false,
                reason: "slope is below the moment bound sqrt(E[tau]) / sd(tau)".into(),
            }
            .into());
        }
        return Ok(());
    }
    let k = match args.problem.k.or(cfg.k) {
        Some(k) => k,
        None => default_slope(&target)?,
    };
    write_json(output.as_deref(), &solve_problem(&target, k)?)
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let cfg = CaseConfig::load(args.problem.config.as_deref())?;
    let solution = resolve_solution(&args.problem, args.solution.as_deref(), &cfg)?;
    let (n, seed, lanes) = sampling(&args.sampling, &cfg)?;
    let method = match args.method {
        Some(MethodArg::Exact) => Method::Exact,
        Some(MethodArg::Euler) => Method::Euler,
        None => cfg.method.unwrap_or(Method::Exact),
    };
    let batch = match method {
        Method::Exact => sample_exact(&solution, n, seed, lanes)?,
        Method::Euler => {
            let dt = args
                .dt
                .or(cfg.dt)
                .ok_or_else(|| anyhow!("--method euler requires --dt (Euler time step)"))?;
            let bridge = !args.no_bridge && cfg.bridge_correction.unwrap_or(true);
            let euler = match args.t_max.or(cfg.t_max) {
                Some(t_max) => EulerConfig::new(dt, t_max, bridge)?,
                None => EulerConfig::for_solution(&solution, dt, bridge)?,
            };
            sample_euler(&solution, n, &euler, seed, lanes)?
        }
    };
    if let Some(w) = &batch.warning {
        eprintln!("warning: {w}");
    }
    let output = args.problem.output.clone().or(cfg.output.clone());
    batch.write_csv(sink(output.as_deref())?)?;
    if let Some(path) = sibling_json(args.sidecar, output.as_deref()) {
        write_json(Some(&path), &batch.sidecar(&solution))?;
    }
    Ok(())
}

pub fn oracle(args: OracleArgs) -> Result<()> {
    let cfg = CaseConfig::load(args.problem.config.as_deref())?;
    let solution = resolve_solution(&args.problem, args.solution.as_deref(), &cfg)?;
    let times = match (args.t_grid, args.points) {
        (Some(ts), _) => ts,
        (None, Some(p)) => oracle_time_grid(&solution.target, p)?,
        (None, None) => match cfg.t_grid.clone() {
            Some(ts) => ts,
            None => oracle_time_grid(&solution.target, cfg.points.unwrap_or(DEFAULT_ORACLE_POINTS))?,
        },
    };
    let rows = oracle_table(&solution, &times)?;
    let output = args.problem.output.clone().or(cfg.output.clone());
    let mut out = sink(output.as_deref())?;
    writeln!(out, "t,oracle_cdf,target_cdf,abs_err")?;
    for r in &rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            r.t, r.oracle_cdf, r.target_cdf, r.abs_err
        )?;
    }
    out.flush()?;
    let worst = rows.iter().map(|r| r.abs_err).fold(0.0, f64::max);
    eprintln!("max abs_err = {worst:.3e} over {} points", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct EmbedReport {
    solution: SkorohodSolution,
    minimal_wedge_slopes: (f64, f64),
    n: usize,
    seed: u64,
    lanes: usize,
    empirical_p_plus: f64,
    ks: Option<KsResult>,
}

fn resolve_embedding(args: &EmbedArgs, cfg: &CaseConfig) -> Result<(SignedTarget, WedgeBoundary)> {
    let from_flags = args.p_plus.is_some() || args.plus.is_some() || args.minus.is_some();
    let target = if from_flags || cfg.signed_target.is_none() {
        let p_plus = args
            .p_plus
            .ok_or_else(|| anyhow!("--p-plus is required unless `signed_target` is set in --config"))?;
        SignedTarget::new(
            p_plus,
            args.plus.as_deref().map(parse_side).transpose()?,
            args.minus.as_deref().map(parse_side).transpose()?,
        )?
    } else {
        let t = cfg.signed_target.clone().expect("checked above");
        t.validate()?;
        t
    };
    let (k_plus, k_minus) = match (args.k_plus, args.k_minus, cfg.wedge) {
        (Some(p), Some(m), _) => (p, m),
        (p, m, Some(w)) => (p.unwrap_or(w.k_plus), m.unwrap_or(w.k_minus)),
        _ => {
            let (p, m) = minimal_wedge_slopes(&target);
            bail!("--k-plus and --k-minus are required (this target needs k_plus >= {p} and k_minus <= {m})")
        }
    };
    Ok((target, WedgeBoundary::new(k_plus, k_minus)?))
}

pub fn embed(args: EmbedArgs) -> Result<()> {
    let cfg = CaseConfig::load(args.config.as_deref())?;
    let (target, wedge) = resolve_embedding(&args, &cfg)?;
    let solution = solve_embedding(&target, &wedge)?;
    let (n, seed, lanes) = sampling(&args.sampling, &cfg)?;
    let draws = sample_embedding(&solution, n, seed, lanes)?;

    let output = args.output.clone().or(cfg.output.clone());
    let mut out = sink(output.as_deref())?;
    writeln!(out, "x_tau,side")?;
    for d in &draws {
        let side = match d.side {
            Side::Plus => "plus",
            Side::Minus => "minus",
        };
        writeln!(out, "{:.16e},{side}", d.x_tau)?;
    }
    out.flush()?;

    if let Some(path) = sibling_json(args.report.clone().or(cfg.report.clone()), output.as_deref()) {
        let x: Vec<f64> = draws.iter().map(|d| d.x_tau).collect();
        let plus = draws.iter().filter(|d| d.side == Side::Plus).count();
        let ks = if n >= KS_MIN_SAMPLES {
            Some(ks_one_sample(&x, |v| target.cdf(v))?)
        } else {
            None
        };
        let report = EmbedReport {
            minimal_wedge_slopes: minimal_wedge_slopes(&target),
            solution,
            n,
            seed,
            lanes,
            empirical_p_plus: if n == 0 { f64::NAN } else { plus as f64 / n as f64 },
            ks,
        };
        write_json(Some(&path), &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyOutput {
    verdict: &'static str,
    reports: Vec<VerificationReport>,
}

pub fn verify(args: VerifyArgs) -> Result<()> {
    let cfg = CaseConfig::load(args.config.as_deref())?;
    let mut cases = cfg.cases.clone().unwrap_or_else(shipped_cases);
    if !args.cases.is_empty() {
        for id in &args.cases {
            if !cases.iter().any(|c| &c.id == id) {
                bail!("unknown case `{id}`");
            }
        }
        cases.retain(|c| args.cases.contains(&c.id));
    }
    let lanes = args.lanes.or(cfg.lanes).unwrap_or(DEFAULT_LANES).max(1);
    let mut reports = Vec::with_capacity(cases.len());
    for case in &cases {
        let report = run_verification(case, lanes).with_context(|| format!("case `{}`", case.id))?;
        eprintln!("{}: {}", case.id, if report.passed() { "pass" } else { "FAIL" });
        reports.push(report);
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed()).map(|r| r.case.clone()).collect();
    let output = args.output.clone().or(cfg.output.clone());
    write_json(
        output.as_deref(),
        &VerifyOutput {
            verdict: if failed.is_empty() { "pass" } else { "fail" },
            reports,
        },
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(VerificationFailed(failed).into())
    }
}
