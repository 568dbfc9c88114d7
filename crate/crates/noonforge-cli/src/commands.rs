//! Implementations of the smatrix, evolve, herald, optimize, and sweep
//! subcommands.



use noonforge::device::build_smatrix;
use noonforge::fock::{evolve as fock_evolve, FockState, PermanentWorkspace};
use noonforge::herald::{run_experiment, HeraldReport, HeraldSpec};
use noonforge::optimize::{
    optimize_with, sweep_with, AxisGrid, Objective, ObjectiveMode, OptimizerConfig, ParamBounds,
    ParamGrid,
};
use noonforge::{DeviceParams64, HeraldReport64};
use serde::Serialize;

use crate::output::{fmt_opt_sig, fmt_sig, write_json, Sink};
use crate::{
    photon_cap, AxisSpec, CliError, CliResult, Format, ModeArg, OptimizeArgs, OutputArgs,
    ParamArgs, SweepArgs,
};

#[derive(Serialize)]
struct SmatrixOutput<'a> {
    params: &'a DeviceParams64,
    smatrix: &'a noonforge::ScatteringMatrix64,
    unitarity_residual: f64,
}

pub fn smatrix(params: &ParamArgs, output: &OutputArgs) -> CliResult<()> {
    let p = params.resolve()?;
    let s = build_smatrix(&p)?;
    let mut sink = Sink::new(output.out.as_deref())?;
    match output.format_or(Format::Json) {
        Format::Json => write_json(
            &mut sink,
            &SmatrixOutput {
                params: &p,
                smatrix: &s,
                unitarity_residual: s.unitarity_residual(),
            },
        )?,
        Format::Csv => {
            let w = sink.writer();
            writeln!(w, "row,col,re,im")?;
            for row in 0..3 {
                for col in 0..3 {
                    let e = s.entry(row, col);
                    writeln!(
                        w,
                        "{row},{col},{},{}",
                        fmt_sig(e.re, output.precision),
                        fmt_sig(e.im, output.precision)
                    )?;
                }
            }
        }
    }
    sink.finish()
}

pub fn evolve(input: &FockState, params: &ParamArgs, output: &OutputArgs) -> CliResult<()> {
    let p = params.resolve()?;
    let s = build_smatrix(&p)?;
    let mut ws = PermanentWorkspace::with_max_photons(photon_cap()?);
    let out_state = fock_evolve(s.matrix(), input, &mut ws)?;
    let mut sink = Sink::new(output.out.as_deref())?;
    match output.format_or(Format::Json) {
        Format::Json => write_json(&mut sink, &out_state)?,
        Format::Csv => {
            let w = sink.writer();
            writeln!(w, "na,nb,nc,re,im")?;
            for (state, amp) in out_state.iter() {
                let occ = state.occ();
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    occ[0],
                    occ[1],
                    occ[2],
                    fmt_sig(amp.re, output.precision),
                    fmt_sig(amp.im, output.precision)
                )?;
            }
        }
    }
    sink.finish()
}

fn infer_n_target(input: &FockState, herald_count: u32, n: Option<u32>) -> CliResult<u32> {
    match n {
        Some(n) => Ok(n),
        None => input.total().checked_sub(herald_count).ok_or_else(|| {
            CliError::Usage(format!(
                "herald count {herald_count} exceeds the {} input photons",
                input.total()
            ))
        }),
    }
}

/// The shared sweep-style CSV row for a heralded report.
fn report_csv_row(params: &DeviceParams64, report: Option<&HeraldReport64>, sig: usize) -> String {
    let (p_click, f_noon) = match report {
        Some(r) => (Some(r.p_click), r.f_noon),
        None => (None, None),
    };
    format!(
        "{},{},{},{},{},{}",
        fmt_sig(params.tau0(), sig),
        fmt_sig(params.tau1(), sig),
        fmt_sig(params.theta1(), sig),
        fmt_sig(params.theta2(), sig),
        fmt_opt_sig(p_click, sig),
        fmt_opt_sig(f_noon, sig)
    )
}

const SWEEP_HEADER: &str = "tau0,tau1,theta1,theta2,p_click,f_noon";

pub fn herald(
    input: &FockState,
    herald_count: u32,
    n: Option<u32>,
    params: &ParamArgs,
    output: &OutputArgs,
) -> CliResult<()> {
    let p = params.resolve()?;
    let n_target = infer_n_target(input, herald_count, n)?;
    let mut ws = PermanentWorkspace::with_max_photons(photon_cap()?);
    let report = run_experiment(
        &p,
        input,
        &HeraldSpec::on_central(herald_count),
        n_target,
        &mut ws,
    )?;
    let mut sink = Sink::new(output.out.as_deref())?;
    match output.format_or(Format::Json) {
        Format::Json => write_json(&mut sink, &report)?,
        Format::Csv => {
            let w = sink.writer();
            writeln!(w, "{SWEEP_HEADER}")?;
            writeln!(w, "{}", report_csv_row(&p, Some(&report), output.precision))?;
        }
    }
    sink.finish()
}

fn build_objective(
    input: &FockState,
    herald_count: u32,
    n_target: u32,
    mode: ModeArg,
    lambda: f64,
    untied_theta: bool,
) -> CliResult<Objective<f64>> {
    let mode = match mode {
        ModeArg::FidelityFirst => ObjectiveMode::FidelityFirst,
        ModeArg::Weighted => ObjectiveMode::WeightedSum(lambda),
    };
    let bounds = ParamBounds {
        tied_theta: !untied_theta,
        ..ParamBounds::default()
    };
    Ok(Objective::new(
        input.clone(),
        HeraldSpec::on_central(herald_count),
        n_target,
        mode,
        bounds,
    )?)
}

pub fn optimize(args: &OptimizeArgs) -> CliResult<u8> {
    let n_target = infer_n_target(&args.input, args.herald, args.n)?;
    let obj = build_objective(
        &args.input,
        args.herald,
        n_target,
        args.mode,
        args.lambda,
        args.untied_theta,
    )?;
    let mut cfg = OptimizerConfig::<f64> {
        restarts: args.restarts,
        max_evaluations: args.max_evals,
        max_photons: photon_cap()?,
        ..OptimizerConfig::default()
    };
    if let Some((g0, g1, gt)) = args.grid {
        cfg.grid_tau0 = g0;
        cfg.grid_tau1 = g1;
        cfg.grid_theta = gt;
    }
    if let Some(init) = args.init {
        cfg.extra_starts.push(init);
    }
    let result = optimize_with(&obj, args.seed, &cfg)?;

    if let Some(trace_path) = &args.trace {
        let mut trace = Sink::new(Some(trace_path))?;
        {
            let w = trace.writer();
            writeln!(
                w,
                "stage,index,objective_value,evaluations,iterations,converged,final_simplex_size"
            )?;
            for entry in &result.trace.restart_log {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    entry.stage,
                    entry.index,
                    fmt_sig(entry.objective_value, args.output.precision),
                    entry.evaluations,
                    entry.iterations,
                    entry.converged,
                    fmt_sig(entry.final_simplex_size, args.output.precision)
                )?;
            }
        }
        trace.finish()?;
    }

    let mut sink = Sink::new(args.output.out.as_deref())?;
    match args.output.format_or(Format::Json) {
        Format::Json => write_json(&mut sink, &result)?,
        Format::Csv => {
            let w = sink.writer();
            writeln!(w, "{SWEEP_HEADER}")?;
            writeln!(
                w,
                "{}",
                report_csv_row(&result.best, Some(&result.report), args.output.precision)
            )?;
        }
    }
    sink.finish()?;
    // A stalled search is still a result, not a process failure.
    Ok(0)
}

#[derive(Serialize)]
struct SweepJsonRow {
    tau0: f64,
    tau1: f64,
    theta1: f64,
    theta2: f64,
    p_click: Option<f64>,
    f_noon: Option<f64>,
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let n_target = infer_n_target(&args.input, args.herald, args.n)?;
    let axis = |a: &AxisSpec| AxisGrid::new(a.start, a.stop, a.count);
    let grid = ParamGrid {
        tau0: axis(&args.tau0),
        tau1: axis(&args.tau1),
        theta1: axis(&args.theta),
        theta2: args.theta2.as_ref().map(axis),
    };
    let herald = HeraldSpec::on_central(args.herald);
    let cap = photon_cap()?;
    let mut sink = Sink::new(args.output.out.as_deref())?;
    match args.output.format_or(Format::Csv) {
        Format::Csv => {
            writeln!(sink.writer(), "{SWEEP_HEADER}")?;
            let precision = args.output.precision;
            sweep_with(&grid, &args.input, &herald, n_target, cap, |_, p, report| {
                writeln!(sink.writer(), "{}", report_csv_row(p, report, precision))
                    .map_err(|e| noonforge::Error::Shape(format!("write failed: {e}")))
            })?;
        }
        Format::Json => {
            let mut rows: Vec<SweepJsonRow> = Vec::new();
            sweep_with(&grid, &args.input, &herald, n_target, cap, |_, p, report| {
                rows.push(SweepJsonRow {
                    tau0: p.tau0(),
                    tau1: p.tau1(),
                    theta1: p.theta1(),
                    theta2: p.theta2(),
                    p_click: report.map(|r| r.p_click),
                    f_noon: report.and_then(|r| r.f_noon),
                });
                Ok(())
            })?;
            write_json(&mut sink, &rows)?;
        }
    }
    sink.finish()
}

/// Evaluates a single heralded experiment; shared with the reproduction
/// harness.
pub fn evaluate_point(
    params: &DeviceParams64,
    input: &FockState,
    herald_count: u32,
    n_target: u32,
    cap: usize,
) -> CliResult<HeraldReport<f64>> {
    let mut ws = PermanentWorkspace::with_max_photons(cap);
    Ok(run_experiment(
        params,
        input,
        &HeraldSpec::on_central(herald_count),
        n_target,
        &mut ws,
    )?)
}
