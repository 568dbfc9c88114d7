//! The `reproduce` subcommand: re-derive the stored reference results,
//! emit a plot-ready CSV, and compare against the versioned targets.



use noonforge::device::{coupler2, DeviceParams};
use noonforge::fock::{evolve, FockState, PermanentWorkspace};
use noonforge::herald::{noon_fidelity, HeraldSpec};
use noonforge::optimize::{
    optimize_with, pareto_front, sweep_with, AxisGrid, Objective, ObjectiveMode, OptimStatus,
    OptimizerConfig, ParamBounds, ParamGrid,
};
use noonforge::DeviceParams64;
use serde::Deserialize;

use crate::commands::evaluate_point;
use crate::output::{fmt_opt_sig, fmt_sig, Sink};
use crate::{photon_cap, CliResult, ReproduceArgs};

#[derive(Deserialize)]
struct TargetsFile {
    figure: String,
    entries: Vec<TargetEntry>,
}

#[derive(Deserialize)]
struct TargetEntry {
    n: u32,
    kind: String,
    p_click: Option<f64>,
    f_noon: Option<f64>,
    #[serde(default)]
    tol_p: Option<f64>,
    #[serde(default)]
    tol_f: Option<f64>,
    #[serde(default)]
    theta: Option<f64>,
    #[serde(default)]
    tol_theta: Option<f64>,
    #[serde(default)]
    monotone_after: Option<u32>,
    #[serde(default)]
    operating_point: Option<OperatingPoint>,
    #[allow(dead_code)]
    note: String,
}

#[derive(Deserialize, Clone, Copy)]
struct OperatingPoint {
    tau0: f64,
    tau1: f64,
    theta: f64,
}

impl OperatingPoint {
    fn params(&self) -> CliResult<DeviceParams64> {
        Ok(DeviceParams::tied(self.tau0, self.tau1, self.theta)?)
    }
}

struct Row {
    n: u32,
    p_click: f64,
    f_noon: Option<f64>,
    params: Option<DeviceParams64>,
    label: String,
    checks: Vec<(String, bool)>,
}

impl Row {
    fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

fn weighted_objective(n: u32) -> CliResult<Objective<f64>> {
    Ok(Objective::new(
        FockState::new(vec![1, n + 1 - 2, 1]),
        noonforge::herald::HeraldSpec::on_central(1),
        n,
        ObjectiveMode::WeightedSum(0.5),
        ParamBounds::default(),
    )?)
}

pub fn run(args: &ReproduceArgs) -> CliResult<u8> {
    let targets: TargetsFile = serde_json::from_str(include_str!("../targets/fig2.json"))?;
    debug_assert_eq!(targets.figure, "fig2");
    let cap = photon_cap()?;
    let mut rows: Vec<Row> = Vec::new();
    let mut extended: Vec<String> = Vec::new();

    for entry in &targets.entries {
        let row = match entry.kind.as_str() {
            "beam_splitter_reference" => reference_row(entry)?,
            "optimized" => optimized_row(entry, args.seed, cap)?,
            "operating_point" => operating_point_row(entry, args, cap, &rows, &mut extended)?,
            other => {
                return Err(crate::CliError::Usage(format!(
                    "unknown target kind `{other}` in stored targets"
                )))
            }
        };
        rows.push(row);
    }

    // Plot-ready CSV.
    std::fs::create_dir_all(&args.out_dir)?;
    let csv_path = args.out_dir.join("fig2.csv");
    let mut sink = Sink::new(Some(&csv_path))?;
    {
        let w = sink.writer();
        writeln!(w, "N,p_click,f_noon,tau0,tau1,theta")?;
        for row in &rows {
            let (t0, t1, th) = match &row.params {
                Some(p) => (
                    fmt_sig(p.tau0(), args.precision),
                    fmt_sig(p.tau1(), args.precision),
                    fmt_sig(p.theta1(), args.precision),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                row.n,
                fmt_sig(row.p_click, args.precision),
                fmt_opt_sig(row.f_noon, args.precision),
                t0,
                t1,
                th
            )?;
        }
    }
    sink.finish()?;

    // Human-readable summary.
    println!("fig2 reproduction (seed {}); wrote {}", args.seed, csv_path.display());
    println!("{:<3} {:>12} {:>12}  {:<28} verdict", "N", "p_click", "f_noon", "label");
    let mut all_ok = true;
    for row in &rows {
        let verdict = if row.passed() { "PASS" } else { "FAIL" };
        all_ok &= row.passed();
        println!(
            "{:<3} {:>12.6} {:>12} {:<28} {}",
            row.n,
            row.p_click,
            row.f_noon.map_or_else(|| "-".into(), |f| format!("{f:.6}")),
            row.label,
            verdict
        );
        for (check, ok) in &row.checks {
            println!("      [{}] {}", if *ok { "ok" } else { "FAIL" }, check);
        }
    }
    for line in &extended {
        println!("{line}");
    }
    println!("overall: {}", if all_ok { "PASS" } else { "FAIL" });
    Ok(u8::from(!all_ok))
}

/// N = 2 never touches the ring device: two identical photons on a 50/50
/// beam splitter leave deterministically as a two-photon NOON state.
fn reference_row(entry: &TargetEntry) -> CliResult<Row> {
    let mut ws = PermanentWorkspace::new();
    let splitter = coupler2(std::f64::consts::FRAC_1_SQRT_2)?;
    let out = evolve(splitter.entries(), &FockState::from_slice(&[1, 1]), &mut ws)?;
    let f = noon_fidelity(&out, 2)?;
    let p = out.norm_sqr();
    let mut checks = Vec::new();
    if let (Some(pt), Some(tp)) = (entry.p_click, entry.tol_p) {
        checks.push((format!("|p - {pt}| <= {tp:.0e}"), (p - pt).abs() <= tp));
    }
    if let (Some(ft), Some(tf)) = (entry.f_noon, entry.tol_f) {
        checks.push((format!("|f - {ft}| <= {tf:.0e}"), (f - ft).abs() <= tf));
    }
    Ok(Row {
        n: entry.n,
        p_click: p,
        f_noon: Some(f),
        params: None,
        label: "beam splitter reference".into(),
        checks,
    })
}

/// N = 3: full fidelity-first optimization of the single-photon-herald
/// experiment.
fn optimized_row(entry: &TargetEntry, seed: u64, cap: usize) -> CliResult<Row> {
    let obj = Objective::<f64>::new(
        FockState::from_slice(&[1, 2, 1]),
        noonforge::herald::HeraldSpec::on_central(1),
        entry.n,
        ObjectiveMode::FidelityFirst,
        ParamBounds::default(),
    )?;
    let cfg = OptimizerConfig {
        max_photons: cap,
        ..OptimizerConfig::default()
    };
    let result = optimize_with(&obj, seed, &cfg)?;
    let p = result.report.p_click;
    let f = result.report.f_noon;
    let mut checks = Vec::new();
    if let (Some(pt), Some(tp)) = (entry.p_click, entry.tol_p) {
        checks.push((format!("|p - {pt:.10}| <= {tp:.0e}"), (p - pt).abs() <= tp));
    }
    if let (Some(ft), Some(tf)) = (entry.f_noon, entry.tol_f) {
        let ok = f.map_or(false, |f| f >= ft - tf);
        checks.push((format!("f >= {ft} - {tf:.0e}"), ok));
    }
    if let (Some(tt), Some(tol)) = (entry.theta, entry.tol_theta) {
        let ok = (result.best.theta1() - tt).abs() <= tol;
        checks.push((format!("|theta - pi| <= {tol}"), ok));
    }
    checks.push((
        "optimizer converged".into(),
        result.status == OptimStatus::Converged,
    ));
    Ok(Row {
        n: entry.n,
        p_click: p,
        f_noon: f,
        params: Some(result.best),
        label: "optimized, herald |1> on b".into(),
        checks,
    })
}

/// N = 4, 5: evaluate the pipeline at the published operating point (the
/// quoted values are a local solution, not the global weighted optimum;
/// the weighted optimum is reported alongside).
fn operating_point_row(
    entry: &TargetEntry,
    seed: u64,
    cap: usize,
    previous: &[Row],
    extended: &mut Vec<String>,
) -> CliResult<Row> {
    let point = entry
        .operating_point
        .ok_or_else(|| crate::CliError::Usage("operating-point target without point".into()))?;
    let params = point.params()?;
    let input = FockState::new(vec![1, entry.n - 1, 1]);
    let report = evaluate_point(&params, &input, 1, entry.n, cap)?;
    let p = report.p_click;
    let f = report.f_noon;

    let mut checks = Vec::new();
    if let (Some(pt), Some(tp)) = (entry.p_click, entry.tol_p) {
        checks.push((format!("|p - {pt}| <= {tp}"), (p - pt).abs() <= tp));
    }
    if let (Some(ft), Some(tf)) = (entry.f_noon, entry.tol_f) {
        let ok = f.map_or(false, |f| (f - ft).abs() <= tf);
        checks.push((format!("|f - {ft}| <= {tf}"), ok));
    }
    if let Some(after) = entry.monotone_after {
        if let Some(prev) = previous.iter().find(|r| r.n == after) {
            let ok_p = p <= prev.p_click + 1e-9;
            let ok_f = match (f, prev.f_noon) {
                (Some(a), Some(b)) => a <= b + 1e-9,
                _ => false,
            };
            checks.push((format!("p and f non-increasing after N={after}"), ok_p && ok_f));
        }
    }

    // The weighted search, seeded with the published point.
    let obj = weighted_objective(entry.n)?;
    let cfg = OptimizerConfig {
        max_photons: cap,
        extra_starts: vec![params],
        ..OptimizerConfig::default()
    };
    let optimum = optimize_with(&obj, seed, &cfg)?;
    checks.push((
        "weighted search converged from the published initialization".into(),
        optimum.status == OptimStatus::Converged,
    ));
    extended.push(format!(
        "  extended N={}: weighted(0.5) optimum p = {:.6}, f = {:.6} at (tau0 {:.4}, tau1 {:.4}, theta {:.4})",
        entry.n,
        optimum.report.p_click,
        optimum.report.f_noon.unwrap_or(f64::NAN),
        optimum.best.tau0(),
        optimum.best.tau1(),
        optimum.best.theta1(),
    ));

    Ok(Row {
        n: entry.n,
        p_click: p,
        f_noon: f,
        params: Some(params),
        label: "published operating point".into(),
        checks,
    })
}
