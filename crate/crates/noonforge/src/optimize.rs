//! Parameter search: reproduce and extend the device's optimal operating
//! points.
//!
//! The default objective is lexicographic: stage 1 maximizes the NOON
//! fidelity of the heralded state over a coarse parameter grid followed by
//! multi-start Nelder-Mead; stage 2 maximizes the click probability with a
//! penalty keeping the fidelity within [`FIDELITY_SLACK`] of unity. A
//! weighted-sum mode covers the regime where unit fidelity is unattainable.
//!
//! Everything is deterministic for a fixed seed: grids are evaluated in
//! index order, restarts are merged by (value, restart index), and all
//! randomness comes from a counter-seeded ChaCha stream.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::fock::{FockState, PermanentWorkspace, DEFAULT_MAX_PHOTONS};
use crate::float::Real;
use crate::herald::{run_experiment, HeraldReport, HeraldSpec};
use crate::nm::{minimize, NelderMeadOptions, NelderMeadResult};

/// Fidelity slack defining feasibility of the probability stage: a point
/// counts as fidelity-feasible when `f_noon >= 1 - FIDELITY_SLACK`.
pub const FIDELITY_SLACK: f64 = 1e-6;

/// Fidelity slack actually enforced by the stage-2 penalty. Tighter than
/// [`FIDELITY_SLACK`]: near the optimum the probability gains roughly the
/// square root of the allowed fidelity deficit, so parking on a 1e-6
/// boundary would inflate the reported probability by ~1e-4, spoiling it
/// as an estimate of the on-manifold maximum. The residual weight left in
/// accidental output components scales with this slack as well.
const STAGE2_SLACK: f64 = 1e-11;

/// Penalty weight on fidelity-constraint violation in stage 2.
const PENALTY_WEIGHT: f64 = 1e6;

/// How much click probability canonicalization may give back to move the
/// ring phases to their preferred operating point at pi.
const CANON_P_SLACK: f64 = 1e-5;

/// Objective value assigned to parameter points where the fidelity is
/// undefined (impossible herald); worse than any defined value.
const UNDEFINED_FIDELITY_VALUE: f64 = 2.0;

/// Hard cap on sweep grids.
pub const MAX_SWEEP_POINTS: usize = 10_000_000;

/// What to maximize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ObjectiveMode<T> {
    /// Fidelity first, then click probability on the near-unit-fidelity set.
    FidelityFirst,
    /// `lambda * f_noon + (1 - lambda) * p_click`.
    WeightedSum(T),
}

/// Box constraints for the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamBounds<T> {
    pub tau0: (T, T),
    pub tau1: (T, T),
    pub theta1: (T, T),
    pub theta2: (T, T),
    /// When set (the default), theta2 is tied to theta1 and the search has
    /// three free parameters.
    pub tied_theta: bool,
}

impl<T: Real> Default for ParamBounds<T> {
    fn default() -> Self {
        Self {
            tau0: (T::zero(), T::one()),
            tau1: (T::zero(), T::one()),
            theta1: (T::zero(), T::TAU()),
            theta2: (T::zero(), T::TAU()),
            tied_theta: true,
        }
    }
}

impl<T: Real> ParamBounds<T> {
    fn validate(&self) -> Result<()> {
        let unit = |name: &'static str, (lo, hi): (T, T)| -> Result<()> {
            if lo < T::zero() || hi > T::one() || lo > hi {
                return Err(Error::OutOfRange {
                    name,
                    value: lo.as_f64(),
                    min: 0.0,
                    max: 1.0,
                });
            }
            Ok(())
        };
        unit("bounds.tau0", self.tau0)?;
        unit("bounds.tau1", self.tau1)?;
        let angle = |name: &'static str, (lo, hi): (T, T)| -> Result<()> {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < T::zero() || hi > T::TAU() {
                return Err(Error::OutOfRange {
                    name,
                    value: lo.as_f64(),
                    min: 0.0,
                    max: std::f64::consts::TAU,
                });
            }
            Ok(())
        };
        angle("bounds.theta1", self.theta1)?;
        angle("bounds.theta2", self.theta2)?;
        Ok(())
    }

    /// Number of free parameters.
    pub fn dims(&self) -> usize {
        if self.tied_theta {
            3
        } else {
            4
        }
    }

    fn lo(&self) -> Vec<T> {
        let mut v = vec![self.tau0.0, self.tau1.0, self.theta1.0];
        if !self.tied_theta {
            v.push(self.theta2.0);
        }
        v
    }

    fn hi(&self) -> Vec<T> {
        let mut v = vec![self.tau0.1, self.tau1.1, self.theta1.1];
        if !self.tied_theta {
            v.push(self.theta2.1);
        }
        v
    }

    /// Which coordinates are periodic angles spanning the full circle.
    fn periodic(&self) -> Vec<bool> {
        let full = |(lo, hi): (T, T)| (hi - lo) >= T::TAU() - T::of(1e-12);
        let mut v = vec![false, false, full(self.theta1)];
        if !self.tied_theta {
            v.push(full(self.theta2));
        }
        v
    }

    fn params_from(&self, x: &[T]) -> DeviceParams<T> {
        let theta2 = if self.tied_theta { x[2] } else { x[3] };
        DeviceParams::new(x[0], x[1], x[2], theta2)
            .expect("search coordinates are clamped into the valid box")
    }

    fn coords_of(&self, p: &DeviceParams<T>) -> Vec<T> {
        let mut v = vec![p.tau0(), p.tau1(), p.theta1()];
        if !self.tied_theta {
            v.push(p.theta2());
        }
        v
    }
}

/// A fully specified optimization target.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective<T> {
    input: FockState,
    herald: HeraldSpec,
    n_target: u32,
    mode: ObjectiveMode<T>,
    bounds: ParamBounds<T>,
}

impl<T: Real> Objective<T> {
    pub fn new(
        input: FockState,
        herald: HeraldSpec,
        n_target: u32,
        mode: ObjectiveMode<T>,
        bounds: ParamBounds<T>,
    ) -> Result<Self> {
        if input.modes() != 3 {
            return Err(Error::Shape(format!(
                "device input needs 3 modes, got {}",
                input.modes()
            )));
        }
        if herald.mode >= 3 {
            return Err(Error::ModeIndex {
                mode: herald.mode,
                modes: 3,
            });
        }
        if n_target == 0 {
            return Err(Error::OutOfRange {
                name: "n_target",
                value: 0.0,
                min: 1.0,
                max: f64::INFINITY,
            });
        }
        let expected = (n_target + herald.count) as usize;
        if input.total() as usize != expected {
            return Err(Error::SectorMismatch {
                expected,
                actual: input.total() as usize,
            });
        }
        if let ObjectiveMode::WeightedSum(lambda) = mode {
            if lambda < T::zero() || lambda > T::one() {
                return Err(Error::OutOfRange {
                    name: "lambda",
                    value: lambda.as_f64(),
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
        bounds.validate()?;
        Ok(Self {
            input,
            herald,
            n_target,
            mode,
            bounds,
        })
    }

    pub fn input(&self) -> &FockState {
        &self.input
    }

    pub fn herald(&self) -> &HeraldSpec {
        &self.herald
    }

    pub fn n_target(&self) -> u32 {
        self.n_target
    }

    pub fn mode(&self) -> ObjectiveMode<T> {
        self.mode
    }

    pub fn bounds(&self) -> &ParamBounds<T> {
        &self.bounds
    }
}

/// Knobs of the search procedure. Defaults follow the module contract:
/// 21 x 21 x 25 coarse grid, 16 restarts, simplex tolerance 1e-9, at most
/// 2e4 evaluations per simplex search.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig<T> {
    pub restarts: usize,
    pub grid_tau0: usize,
    pub grid_tau1: usize,
    pub grid_theta: usize,
    pub max_evaluations: usize,
    pub simplex_tolerance: T,
    pub max_photons: usize,
    /// Additional user-supplied starting points, tried before grid seeds.
    pub extra_starts: Vec<DeviceParams<T>>,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            restarts: 16,
            grid_tau0: 21,
            grid_tau1: 21,
            grid_theta: 25,
            max_evaluations: 20_000,
            simplex_tolerance: T::of(1e-9),
            max_photons: DEFAULT_MAX_PHOTONS,
            extra_starts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimStatus {
    /// The winning simplex met the diameter tolerance.
    Converged,
    /// The evaluation budget ran out first.
    Stalled,
    /// Stage 1 could not reach `f_noon >= 1 - FIDELITY_SLACK` anywhere, so
    /// the probability stage had an empty feasible region; the best
    /// fidelity point is reported instead.
    InfeasibleFidelity,
}

/// Summary of one simplex restart, for convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RestartSummary<T> {
    /// 1 = fidelity stage, 2 = click-probability stage (or the single
    /// weighted stage), 3 = phase canonicalization.
    pub stage: u8,
    /// Restart index within its stage.
    pub index: usize,
    /// Final objective value (stage-dependent; lower is better).
    pub objective_value: T,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_simplex_size: T,
}

/// Convergence metadata of an [`optimize`] run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptTrace<T> {
    /// Total objective evaluations across grid and all simplex searches.
    pub evaluations: usize,
    /// Simplex iterations of the winning restart.
    pub iterations: usize,
    /// Number of simplex restarts run.
    pub restarts: usize,
    /// Simplex diameter of the winning restart at termination.
    pub final_simplex_size: T,
    /// Best fidelity seen after stage 1 (fidelity-first mode only).
    pub stage1_best_fidelity: Option<T>,
    /// Per-restart convergence log, in stage order.
    pub restart_log: Vec<RestartSummary<T>>,
}

/// Best parameters found, with the report recomputed from scratch at those
/// parameters (never a stale cached value).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct OptimizationResult<T> {
    pub best: DeviceParams<T>,
    pub report: HeraldReport<T>,
    pub trace: OptTrace<T>,
    pub status: OptimStatus,
}

/// Per-worker evaluation context.
struct Evaluator<'a, T> {
    obj: &'a Objective<T>,
    ws: PermanentWorkspace<T>,
}

impl<'a, T: Real> Evaluator<'a, T> {
    fn new(obj: &'a Objective<T>, max_photons: usize) -> Self {
        Self {
            obj,
            ws: PermanentWorkspace::with_max_photons(max_photons),
        }
    }

    /// (p_click, f_noon) at `x`; `None` when the device is degenerate there.
    fn measure(&mut self, x: &[T]) -> Option<(T, Option<T>)> {
        let params = self.obj.bounds.params_from(x);
        match run_experiment(
            &params,
            &self.obj.input,
            &self.obj.herald,
            self.obj.n_target,
            &mut self.ws,
        ) {
            Ok(report) => Some((report.p_click, report.f_noon)),
            Err(Error::DegenerateDevice { .. }) => None,
            Err(e) => unreachable!("objective validated up front: {e}"),
        }
    }

    /// Stage 1: minimize `1 - f_noon`.
    fn fidelity_deficit(&mut self, x: &[T]) -> T {
        match self.measure(x) {
            Some((_, Some(f))) => T::one() - f,
            Some((_, None)) => T::of(UNDEFINED_FIDELITY_VALUE),
            None => T::infinity(),
        }
    }

    /// Stage 2: minimize `-p_click` subject to the fidelity constraint,
    /// enforced by a linear penalty.
    fn penalized_neg_pclick(&mut self, x: &[T]) -> T {
        match self.measure(x) {
            Some((p, Some(f))) => {
                let shortfall = (T::one() - T::of(STAGE2_SLACK) - f).max(T::zero());
                -p + T::of(PENALTY_WEIGHT) * shortfall
            }
            Some((_, None)) => T::of(PENALTY_WEIGHT),
            None => T::infinity(),
        }
    }

    /// Weighted mode: minimize `-(lambda f + (1 - lambda) p)`.
    fn neg_weighted(&mut self, x: &[T], lambda: T) -> T {
        match self.measure(x) {
            Some((p, f)) => -(lambda * f.unwrap_or_else(T::zero) + (T::one() - lambda) * p),
            None => T::infinity(),
        }
    }

    fn stage_value(&mut self, stage: Stage<T>, x: &[T]) -> T {
        match stage {
            Stage::Fidelity => self.fidelity_deficit(x),
            Stage::PClick => self.penalized_neg_pclick(x),
            Stage::Weighted(lambda) => self.neg_weighted(x, lambda),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Stage<T> {
    Fidelity,
    PClick,
    Weighted(T),
}

/// Inclusive linspace; periodic axes leave out the upper endpoint (it is
/// the same physical point as the lower one).
fn linspace<T: Real>(lo: T, hi: T, count: usize, periodic: bool) -> Vec<T> {
    if count <= 1 {
        return vec![lo];
    }
    let denom = if periodic { count } else { count - 1 };
    let step = (hi - lo) / T::of(denom as f64);
    (0..count).map(|i| lo + step * T::of(i as f64)).collect()
}

/// Normalized, wrap-aware distance between two coordinate vectors.
fn normalized_distance<T: Real>(
    a: &[T],
    b: &[T],
    lo: &[T],
    hi: &[T],
    periodic: &[bool],
) -> T {
    let mut sum = T::zero();
    for i in 0..a.len() {
        let range = hi[i] - lo[i];
        if range <= T::zero() {
            continue;
        }
        let mut d = ((a[i] - b[i]) / range).abs();
        if periodic[i] && d > T::of(0.5) {
            d = T::one() - d;
        }
        sum += d * d;
    }
    sum.sqrt()
}

/// Distance between parameter vectors, with ring phases compared on the
/// circle.
pub fn param_distance<T: Real>(a: &DeviceParams<T>, b: &DeviceParams<T>) -> T {
    let wrap = |x: T, y: T| {
        let mut d = (x - y).abs();
        if d > T::PI() {
            d = T::TAU() - d;
        }
        d
    };
    let dt0 = a.tau0() - b.tau0();
    let dt1 = a.tau1() - b.tau1();
    let dh1 = wrap(a.theta1(), b.theta1());
    let dh2 = wrap(a.theta2(), b.theta2());
    (dt0 * dt0 + dt1 * dt1 + dh1 * dh1 + dh2 * dh2).sqrt()
}

struct GridScan<T> {
    axes: Vec<Vec<T>>,
}

impl<T: Real> GridScan<T> {
    fn total(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    fn point(&self, mut idx: usize) -> Vec<T> {
        let mut coords = vec![T::zero(); self.axes.len()];
        for (i, axis) in self.axes.iter().enumerate().rev() {
            coords[i] = axis[idx % axis.len()];
            idx /= axis.len();
        }
        coords
    }
}

/// Runs one simplex search per start in parallel, merged deterministically.
fn run_restarts<T: Real>(
    obj: &Objective<T>,
    stage: Stage<T>,
    starts: &[Vec<T>],
    lo: &[T],
    hi: &[T],
    nm_options: &NelderMeadOptions<T>,
    max_photons: usize,
) -> Vec<NelderMeadResult<T>> {
    starts
        .par_iter()
        .map_init(
            || Evaluator::new(obj, max_photons),
            |ev, start| {
                minimize(|x| ev.stage_value(stage, x), start, lo, hi, nm_options)
            },
        )
        .collect()
}

fn best_index<T: Real>(results: &[NelderMeadResult<T>]) -> usize {
    let mut best = 0usize;
    for i in 1..results.len() {
        if results[i].value < results[best].value {
            best = i;
        }
    }
    best
}

/// Optimizes with default configuration.
pub fn optimize<T: Real>(obj: &Objective<T>, seed: u64) -> Result<OptimizationResult<T>> {
    optimize_with(obj, seed, &OptimizerConfig::default())
}

/// Optimizes with explicit configuration.
pub fn optimize_with<T: Real>(
    obj: &Objective<T>,
    seed: u64,
    cfg: &OptimizerConfig<T>,
) -> Result<OptimizationResult<T>> {
    if obj.input.total() as usize > cfg.max_photons {
        return Err(Error::Capacity {
            requested: obj.input.total() as usize,
            max: cfg.max_photons,
        });
    }
    if cfg.restarts == 0 {
        return Err(Error::OutOfRange {
            name: "restarts",
            value: 0.0,
            min: 1.0,
            max: f64::INFINITY,
        });
    }

    let lo = obj.bounds.lo();
    let hi = obj.bounds.hi();
    let periodic = obj.bounds.periodic();
    let dims = obj.bounds.dims();

    let grid = {
        let mut axes = vec![
            linspace(lo[0], hi[0], cfg.grid_tau0, false),
            linspace(lo[1], hi[1], cfg.grid_tau1, false),
            linspace(lo[2], hi[2], cfg.grid_theta, periodic[2]),
        ];
        if dims == 4 {
            axes.push(linspace(lo[3], hi[3], cfg.grid_theta, periodic[3]));
        }
        GridScan { axes }
    };

    let first_stage = match obj.mode {
        ObjectiveMode::FidelityFirst => Stage::Fidelity,
        ObjectiveMode::WeightedSum(lambda) => Stage::Weighted(lambda),
    };

    // Coarse grid scan.
    let total = grid.total();
    let grid_values: Vec<T> = (0..total)
        .into_par_iter()
        .map_init(
            || Evaluator::new(obj, cfg.max_photons),
            |ev, idx| ev.stage_value(first_stage, &grid.point(idx)),
        )
        .collect();

    // Seed the restarts: user starts first, then the best grid points kept
    // pairwise-diverse, then uniform random fill.
    let mut starts: Vec<Vec<T>> = cfg
        .extra_starts
        .iter()
        .map(|p| {
            let mut x = obj.bounds.coords_of(p);
            for i in 0..dims {
                x[i] = x[i].max(lo[i]).min(hi[i]);
            }
            x
        })
        .collect();
    let want = cfg.restarts.max(starts.len());

    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| {
        grid_values[a]
            .partial_cmp(&grid_values[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let min_sep = T::of(0.1);
    for &idx in &order {
        if starts.len() >= want {
            break;
        }
        if !grid_values[idx].is_finite() {
            break;
        }
        let candidate = grid.point(idx);
        let diverse = starts
            .iter()
            .all(|s| normalized_distance(&candidate, s, &lo, &hi, &periodic) >= min_sep);
        if diverse {
            starts.push(candidate);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while starts.len() < want {
        let x: Vec<T> = (0..dims)
            .map(|i| {
                let u: f64 = rng.gen_range(0.0..1.0);
                lo[i] + (hi[i] - lo[i]) * T::of(u)
            })
            .collect();
        starts.push(x);
    }

    let nm_options = NelderMeadOptions {
        simplex_tolerance: cfg.simplex_tolerance,
        max_evaluations: cfg.max_evaluations,
        ..NelderMeadOptions::default()
    };

    let stage1 = run_restarts(obj, first_stage, &starts, &lo, &hi, &nm_options, cfg.max_photons);
    let mut evaluations = total + stage1.iter().map(|r| r.evaluations).sum::<usize>();
    let best1 = best_index(&stage1);

    let summarize = |stage: u8, index: usize, r: &NelderMeadResult<T>| RestartSummary {
        stage,
        index,
        objective_value: r.value,
        evaluations: r.evaluations,
        iterations: r.iterations,
        converged: r.converged,
        final_simplex_size: r.final_simplex_size,
    };
    let mut restart_log: Vec<RestartSummary<T>> = stage1
        .iter()
        .enumerate()
        .map(|(i, r)| summarize(1, i, r))
        .collect();

    let finish = |winner: &NelderMeadResult<T>,
                  status: OptimStatus,
                  evaluations: usize,
                  restarts: usize,
                  stage1_best_fidelity: Option<T>,
                  restart_log: Vec<RestartSummary<T>>|
     -> Result<OptimizationResult<T>> {
        let best = obj.bounds.params_from(&winner.x);
        let mut ws = PermanentWorkspace::with_max_photons(cfg.max_photons);
        let report = run_experiment(&best, &obj.input, &obj.herald, obj.n_target, &mut ws)?;
        Ok(OptimizationResult {
            best,
            report,
            trace: OptTrace {
                evaluations,
                iterations: winner.iterations,
                restarts,
                final_simplex_size: winner.final_simplex_size,
                stage1_best_fidelity,
                restart_log,
            },
            status,
        })
    };

    match obj.mode {
        ObjectiveMode::WeightedSum(_) => {
            let winner = &stage1[best1];
            let status = if winner.converged {
                OptimStatus::Converged
            } else {
                OptimStatus::Stalled
            };
            finish(winner, status, evaluations, starts.len(), None, restart_log)
        }
        ObjectiveMode::FidelityFirst => {
            let stage1_best_fidelity = Some((T::one() - stage1[best1].value).max(T::zero()));
            if stage1[best1].value > T::of(FIDELITY_SLACK) {
                return finish(
                    &stage1[best1],
                    OptimStatus::InfeasibleFidelity,
                    evaluations,
                    starts.len(),
                    stage1_best_fidelity,
                    restart_log,
                );
            }
            let feasible: Vec<Vec<T>> = stage1
                .iter()
                .filter(|r| r.value <= T::of(FIDELITY_SLACK))
                .map(|r| r.x.clone())
                .collect();
            let stage2 = run_restarts(
                obj,
                Stage::PClick,
                &feasible,
                &lo,
                &hi,
                &nm_options,
                cfg.max_photons,
            );
            evaluations += stage2.iter().map(|r| r.evaluations).sum::<usize>();
            restart_log.extend(stage2.iter().enumerate().map(|(i, r)| summarize(2, i, r)));
            let best2 = best_index(&stage2);
            let winner = &stage2[best2];
            let status = if winner.converged {
                OptimStatus::Converged
            } else {
                OptimStatus::Stalled
            };
            let restarts = starts.len() + feasible.len();

            // Stage 3: the optimum is a manifold; report its canonical
            // representative with the ring phases at pi when one exists.
            let mut ws = PermanentWorkspace::with_max_photons(cfg.max_photons);
            let best2_params = obj.bounds.params_from(&winner.x);
            let report2 =
                run_experiment(&best2_params, &obj.input, &obj.herald, obj.n_target, &mut ws)?;
            let p_floor = report2.p_click - T::of(CANON_P_SLACK);
            if let Some(canonical) = canonicalize_phase(
                obj,
                &winner.x,
                p_floor,
                &lo,
                &hi,
                &nm_options,
                cfg.max_photons,
                &mut evaluations,
            )? {
                restart_log.push(summarize(3, 0, &canonical));
                return finish(
                    &canonical,
                    status,
                    evaluations,
                    restarts,
                    stage1_best_fidelity,
                    restart_log,
                );
            }
            finish(
                winner,
                status,
                evaluations,
                restarts,
                stage1_best_fidelity,
                restart_log,
            )
        }
    }
}

/// Searches for an optimal point with every ring phase frozen at pi.
///
/// Runs 2-d fidelity and click-probability searches over `(tau0, tau1)`
/// only, from the stage-2 winner's couplings plus a coarse deterministic
/// seed set. Returns the frozen-phase optimum when it keeps the fidelity
/// within [`FIDELITY_SLACK`] of unity and gives up at most
/// [`CANON_P_SLACK`] of click probability; `None` when the optimum
/// manifold has no such point.
#[allow(clippy::too_many_arguments)]
fn canonicalize_phase<T: Real>(
    obj: &Objective<T>,
    best_x: &[T],
    p_floor: T,
    lo: &[T],
    hi: &[T],
    nm_options: &NelderMeadOptions<T>,
    max_photons: usize,
    evaluations: &mut usize,
) -> Result<Option<NelderMeadResult<T>>> {
    let dims = best_x.len();
    let pi = T::PI();
    let theta1 = pi.max(lo[2]).min(hi[2]);
    let theta2 = if dims == 4 {
        pi.max(lo[3]).min(hi[3])
    } else {
        theta1
    };

    let expand = |xy: &[T]| -> Vec<T> {
        let mut full = vec![xy[0], xy[1], theta1];
        if dims == 4 {
            full.push(theta2);
        }
        full
    };

    let tau_lo = [lo[0], lo[1]];
    let tau_hi = [hi[0], hi[1]];
    let clamp_tau = |v: T, i: usize| v.max(tau_lo[i]).min(tau_hi[i]);
    let mut seeds: Vec<[T; 2]> = vec![[best_x[0], best_x[1]]];
    for &a in &[0.25, 0.5, 0.75] {
        for &b in &[0.25, 0.5, 0.75] {
            seeds.push([clamp_tau(T::of(a), 0), clamp_tau(T::of(b), 1)]);
        }
    }

    let fidelity_runs: Vec<NelderMeadResult<T>> = seeds
        .par_iter()
        .map_init(
            || Evaluator::new(obj, max_photons),
            |ev, seed| {
                minimize(
                    |xy| ev.fidelity_deficit(&expand(xy)),
                    &seed[..],
                    &tau_lo,
                    &tau_hi,
                    nm_options,
                )
            },
        )
        .collect();
    *evaluations += fidelity_runs.iter().map(|r| r.evaluations).sum::<usize>();
    let best_f = best_index(&fidelity_runs);
    if fidelity_runs[best_f].value > T::of(FIDELITY_SLACK) {
        return Ok(None);
    }

    let feasible: Vec<Vec<T>> = fidelity_runs
        .iter()
        .filter(|r| r.value <= T::of(FIDELITY_SLACK))
        .map(|r| r.x.clone())
        .collect();
    let pclick_runs: Vec<NelderMeadResult<T>> = feasible
        .par_iter()
        .map_init(
            || Evaluator::new(obj, max_photons),
            |ev, seed| {
                minimize(
                    |xy| ev.penalized_neg_pclick(&expand(xy)),
                    seed,
                    &tau_lo,
                    &tau_hi,
                    nm_options,
                )
            },
        )
        .collect();
    *evaluations += pclick_runs.iter().map(|r| r.evaluations).sum::<usize>();
    let best_p = best_index(&pclick_runs);
    let chosen = &pclick_runs[best_p];

    let full = expand(&chosen.x);
    let params = obj.bounds.params_from(&full);
    let mut ws = PermanentWorkspace::with_max_photons(max_photons);
    let report = run_experiment(&params, &obj.input, &obj.herald, obj.n_target, &mut ws)?;
    let feasible_point = match report.f_noon {
        Some(f) => f >= T::one() - T::of(FIDELITY_SLACK) && report.p_click >= p_floor,
        None => false,
    };
    if !feasible_point {
        return Ok(None);
    }
    Ok(Some(NelderMeadResult {
        x: full,
        value: chosen.value,
        evaluations: chosen.evaluations,
        iterations: chosen.iterations,
        converged: chosen.converged,
        final_simplex_size: chosen.final_simplex_size,
    }))
}

/// One axis of a sweep grid: `count` evenly spaced values from `start` to
/// `stop` inclusive (a single value when `count == 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisGrid<T> {
    pub start: T,
    pub stop: T,
    pub count: usize,
}

impl<T: Real> AxisGrid<T> {
    pub fn fixed(value: T) -> Self {
        Self {
            start: value,
            stop: value,
            count: 1,
        }
    }

    pub fn new(start: T, stop: T, count: usize) -> Self {
        Self { start, stop, count }
    }

    fn validate(&self, name: &'static str, min: f64, max: f64) -> Result<()> {
        if self.start > self.stop {
            return Err(Error::Shape(format!("axis {name}: need start <= stop")));
        }
        if self.start.as_f64() < min || self.stop.as_f64() > max {
            return Err(Error::OutOfRange {
                name,
                value: self.start.as_f64(),
                min,
                max,
            });
        }
        Ok(())
    }

    pub fn value(&self, i: usize) -> T {
        if self.count <= 1 {
            self.start
        } else {
            self.start + (self.stop - self.start) * T::of(i as f64) / T::of((self.count - 1) as f64)
        }
    }
}

/// Cartesian sweep grid over the device parameters.
///
/// Iteration order is row-major with `tau0` slowest and the last phase axis
/// fastest; `theta2: None` ties the second ring phase to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid<T> {
    pub tau0: AxisGrid<T>,
    pub tau1: AxisGrid<T>,
    pub theta1: AxisGrid<T>,
    pub theta2: Option<AxisGrid<T>>,
}

impl<T: Real> ParamGrid<T> {
    pub fn validate(&self) -> Result<()> {
        self.tau0.validate("tau0", 0.0, 1.0)?;
        self.tau1.validate("tau1", 0.0, 1.0)?;
        self.theta1
            .validate("theta1", f64::NEG_INFINITY, f64::INFINITY)?;
        if let Some(t2) = &self.theta2 {
            t2.validate("theta2", f64::NEG_INFINITY, f64::INFINITY)?;
        }
        Ok(())
    }

    pub fn total_points(&self) -> usize {
        self.tau0.count
            * self.tau1.count
            * self.theta1.count
            * self.theta2.as_ref().map_or(1, |a| a.count)
    }

    /// Parameters at a flat grid index.
    pub fn params_at(&self, idx: usize) -> DeviceParams<T> {
        let n2 = self.theta2.as_ref().map_or(1, |a| a.count);
        let n1 = self.theta1.count;
        let nt1 = self.tau1.count;

        let i2 = idx % n2;
        let i1 = (idx / n2) % n1;
        let it1 = (idx / (n2 * n1)) % nt1;
        let it0 = idx / (n2 * n1 * nt1);

        let theta1 = self.theta1.value(i1);
        let theta2 = self.theta2.as_ref().map_or(theta1, |a| a.value(i2));
        DeviceParams::new(self.tau0.value(it0), self.tau1.value(it1), theta1, theta2)
            .expect("validated grid stays inside the parameter domain")
    }
}

/// Evaluates one heralded experiment per grid point, streaming reports to
/// `on_row` in grid order. Degenerate-device points yield `None`.
pub fn sweep<T: Real>(
    grid: &ParamGrid<T>,
    input: &FockState,
    herald: &HeraldSpec,
    n_target: u32,
    on_row: impl FnMut(usize, &DeviceParams<T>, Option<&HeraldReport<T>>) -> Result<()>,
) -> Result<()> {
    sweep_with(grid, input, herald, n_target, DEFAULT_MAX_PHOTONS, on_row)
}

/// [`sweep`] with an explicit photon cap.
pub fn sweep_with<T: Real>(
    grid: &ParamGrid<T>,
    input: &FockState,
    herald: &HeraldSpec,
    n_target: u32,
    max_photons: usize,
    mut on_row: impl FnMut(usize, &DeviceParams<T>, Option<&HeraldReport<T>>) -> Result<()>,
) -> Result<()> {
    grid.validate()?;
    let total = grid.total_points();
    if total > MAX_SWEEP_POINTS {
        return Err(Error::GridTooLarge {
            points: total,
            max: MAX_SWEEP_POINTS,
        });
    }
    if input.modes() != 3 {
        return Err(Error::Shape(format!(
            "device input needs 3 modes, got {}",
            input.modes()
        )));
    }
    if input.total() as usize > max_photons {
        return Err(Error::Capacity {
            requested: input.total() as usize,
            max: max_photons,
        });
    }
    let expected = (n_target + herald.count) as usize;
    if input.total() as usize != expected {
        return Err(Error::SectorMismatch {
            expected,
            actual: input.total() as usize,
        });
    }

    const CHUNK: usize = 8192;
    let mut start = 0usize;
    while start < total {
        let end = (start + CHUNK).min(total);
        let rows: Vec<(DeviceParams<T>, Option<HeraldReport<T>>)> = (start..end)
            .into_par_iter()
            .map_init(
                || PermanentWorkspace::with_max_photons(max_photons),
                |ws, idx| {
                    let params = grid.params_at(idx);
                    let report = match run_experiment(&params, input, herald, n_target, ws) {
                        Ok(r) => Some(r),
                        Err(Error::DegenerateDevice { .. }) => None,
                        Err(e) => unreachable!("sweep validated up front: {e}"),
                    };
                    (params, report)
                },
            )
            .collect();
        for (offset, (params, report)) in rows.iter().enumerate() {
            on_row(start + offset, params, report.as_ref())?;
        }
        start = end;
    }
    Ok(())
}

/// A point on the probability/fidelity trade-off frontier.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct ParetoPoint<T> {
    pub params: DeviceParams<T>,
    pub p_click: T,
    pub f_noon: T,
}

/// Non-dominated subset when maximizing both click probability and
/// fidelity. Input rows with equal (p, f) keep only their first occurrence.
pub fn pareto_front<T: Real>(rows: &[(DeviceParams<T>, T, T)]) -> Vec<ParetoPoint<T>> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, fa) = (rows[a].1, rows[a].2);
        let (pb, fb) = (rows[b].1, rows[b].2);
        pb.partial_cmp(&pa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(fb.partial_cmp(&fa).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.cmp(&b))
    });
    let mut front = Vec::new();
    let mut best_f = T::neg_infinity();
    for idx in order {
        let (params, p, f) = rows[idx];
        if f > best_f {
            best_f = f;
            front.push(ParetoPoint {
                params,
                p_click: p,
                f_noon: f,
            });
        }
    }
    front
}

/// Knobs for [`explore_manifold`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldConfig<T> {
    /// Accept points with `f_noon >= f_best - fidelity_slack`.
    pub fidelity_slack: T,
    /// Accept points with `p_click >= p_best - pclick_slack`.
    pub pclick_slack: T,
    /// Points closer than this (in [`param_distance`]) count as duplicates.
    pub min_separation: T,
    /// Central-difference step for the constraint-map Jacobian.
    pub fd_step: T,
    /// Continuation step along estimated tangent directions.
    pub continuation_step: T,
    /// Number of random restarts hunting for far-away optima.
    pub random_restarts: usize,
}

impl<T: Real> Default for ManifoldConfig<T> {
    fn default() -> Self {
        Self {
            fidelity_slack: T::of(FIDELITY_SLACK),
            pclick_slack: T::of(1e-4),
            min_separation: T::of(1e-4),
            fd_step: T::of(1e-5),
            continuation_step: T::of(0.02),
            random_restarts: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceSummary<T> {
    pub min: T,
    pub mean: T,
    pub max: T,
}

/// Distinct optimal parameter sets plus an estimate of the local dimension
/// of the optimum manifold.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real + Serialize"))]
pub struct ManifoldSample<T> {
    pub points: Vec<DeviceParams<T>>,
    pub reports: Vec<HeraldReport<T>>,
    /// Estimated dimension of the optimum manifold's tangent space at the
    /// best point (free parameters minus numerical rank of the constraint
    /// Jacobian); forced to 0 with `warning` when fewer than two distinct
    /// optima were found.
    pub tangent_dimension: usize,
    pub distances: Option<DistanceSummary<T>>,
    pub warning: bool,
}

/// Maps parameters to the residuals that vanish exactly on the optimum
/// manifold: real and imaginary parts of every accidental amplitude in the
/// heralded sector, plus the NOON balance `|c_N0| - |c_0N|`.
fn constraint_map<T: Real>(
    obj: &Objective<T>,
    params: &DeviceParams<T>,
    ws: &mut PermanentWorkspace<T>,
) -> Result<Vec<T>> {
    let s = crate::device::build_smatrix(params)?;
    let out = crate::fock::evolve(s.matrix(), &obj.input, ws)?;
    let n = obj.n_target;
    let mut residuals = Vec::new();
    let mut noon_n0 = T::zero();
    let mut noon_0n = T::zero();
    for (state, amp) in out.iter() {
        if state.occ()[obj.herald.mode] != obj.herald.count {
            continue;
        }
        let reduced = state.without_mode(obj.herald.mode);
        let occ = reduced.occ();
        if occ == &[n, 0][..] {
            noon_n0 = amp.norm();
        } else if occ == &[0, n][..] {
            noon_0n = amp.norm();
        } else {
            residuals.push(amp.re);
            residuals.push(amp.im);
        }
    }
    residuals.push(noon_n0 - noon_0n);
    Ok(residuals)
}

/// Numerical rank of the constraint Jacobian at `x`, via eigenvalues of
/// J^T J.
fn constraint_rank<T: Real>(
    obj: &Objective<T>,
    x: &[T],
    lo: &[T],
    hi: &[T],
    fd_step: T,
    max_photons: usize,
) -> Result<(usize, Vec<Vec<T>>)> {
    let dims = x.len();
    let mut ws = PermanentWorkspace::with_max_photons(max_photons);

    let mut columns: Vec<Vec<T>> = Vec::with_capacity(dims);
    for j in 0..dims {
        let h = fd_step;
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] = (xp[j] + h).min(hi[j]);
        xm[j] = (xm[j] - h).max(lo[j]);
        let span = xp[j] - xm[j];
        if span <= T::zero() {
            let g0 = constraint_map(obj, &obj.bounds.params_from(x), &mut ws)?;
            columns.push(vec![T::zero(); g0.len()]);
            continue;
        }
        let gp = constraint_map(obj, &obj.bounds.params_from(&xp), &mut ws)?;
        let gm = constraint_map(obj, &obj.bounds.params_from(&xm), &mut ws)?;
        let col: Vec<T> = gp
            .iter()
            .zip(&gm)
            .map(|(&a, &b)| (a - b) / span)
            .collect();
        columns.push(col);
    }

    // Gram matrix J^T J (dims x dims).
    let mut gram = vec![vec![T::zero(); dims]; dims];
    for i in 0..dims {
        for j in 0..dims {
            gram[i][j] = columns[i]
                .iter()
                .zip(&columns[j])
                .map(|(&a, &b)| a * b)
                .sum();
        }
    }
    let mut work = gram.clone();
    let (eigenvalues, eigenvectors) = jacobi_eigen(&mut work);

    let sigma_max = eigenvalues
        .iter()
        .fold(T::zero(), |m, &e| m.max(e.max(T::zero()).sqrt()));
    let tol = (sigma_max * T::of(1e-6)).max(T::of(1e-7));
    let mut rank = 0usize;
    let mut null_dirs = Vec::new();
    for (k, &e) in eigenvalues.iter().enumerate() {
        let sigma = e.max(T::zero()).sqrt();
        if sigma > tol {
            rank += 1;
        } else {
            null_dirs.push(eigenvectors[k].clone());
        }
    }
    Ok((rank, null_dirs))
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns (eigenvalues, eigenvectors-as-rows).
fn jacobi_eigen<T: Real>(a: &mut [Vec<T>]) -> (Vec<T>, Vec<Vec<T>>) {
    let n = a.len();
    let mut v = vec![vec![T::zero(); n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for _ in 0..100 {
        let mut off = T::zero();
        let (mut p, mut q) = (0usize, 1usize);
        for i in 0..n {
            for j in i + 1..n {
                if a[i][j].abs() > off {
                    off = a[i][j].abs();
                    p = i;
                    q = j;
                }
            }
        }
        if off < T::of(1e-300).max(T::epsilon() * T::epsilon()) || n < 2 {
            break;
        }
        let app = a[p][p];
        let aqq = a[q][q];
        let apq = a[p][q];
        let theta = (aqq - app) / (T::of(2.0) * apq);
        let t = {
            let sign = if theta >= T::zero() { T::one() } else { -T::one() };
            sign / (theta.abs() + (theta * theta + T::one()).sqrt())
        };
        let c = T::one() / (t * t + T::one()).sqrt();
        let s = t * c;
        for k in 0..n {
            let akp = a[k][p];
            let akq = a[k][q];
            a[k][p] = c * akp - s * akq;
            a[k][q] = s * akp + c * akq;
        }
        for k in 0..n {
            let apk = a[p][k];
            let aqk = a[q][k];
            a[p][k] = c * apk - s * aqk;
            a[q][k] = s * apk + c * aqk;
        }
        for k in 0..n {
            let vkp = v[p][k];
            let vkq = v[q][k];
            v[p][k] = c * vkp - s * vkq;
            v[q][k] = s * vkp + c * vkq;
        }
    }
    let eigenvalues: Vec<T> = (0..n).map(|i| a[i][i]).collect();
    (eigenvalues, v)
}

/// Explores the set of optimal parameter combinations around the optimum
/// found for `obj`: random-restart searches plus local continuation along
/// the estimated tangent directions.
pub fn explore_manifold<T: Real>(
    obj: &Objective<T>,
    n_samples: usize,
    seed: u64,
) -> Result<ManifoldSample<T>> {
    explore_manifold_with(
        obj,
        n_samples,
        seed,
        &ManifoldConfig::default(),
        &OptimizerConfig::default(),
    )
}

/// [`explore_manifold`] with explicit configuration.
pub fn explore_manifold_with<T: Real>(
    obj: &Objective<T>,
    n_samples: usize,
    seed: u64,
    mcfg: &ManifoldConfig<T>,
    ocfg: &OptimizerConfig<T>,
) -> Result<ManifoldSample<T>> {
    let base = optimize_with(obj, seed, ocfg)?;
    if base.status == OptimStatus::InfeasibleFidelity || base.report.f_noon.is_none() {
        return Ok(ManifoldSample {
            points: Vec::new(),
            reports: Vec::new(),
            tangent_dimension: 0,
            distances: None,
            warning: true,
        });
    }

    let f_best = base.report.f_noon.expect("checked above");
    let p_best = base.report.p_click;
    let f_min = f_best - mcfg.fidelity_slack;
    let p_min = p_best - mcfg.pclick_slack;

    let lo = obj.bounds.lo();
    let hi = obj.bounds.hi();
    let dims = obj.bounds.dims();
    let base_x = obj.bounds.coords_of(&base.best);

    let polish_options = NelderMeadOptions {
        simplex_tolerance: ocfg.simplex_tolerance,
        max_evaluations: ocfg.max_evaluations,
        initial_step: T::of(0.01),
    };
    let stage = match obj.mode {
        ObjectiveMode::FidelityFirst => Stage::PClick,
        ObjectiveMode::WeightedSum(lambda) => Stage::Weighted(lambda),
    };

    // Candidate starting points: random box samples plus tangent-direction
    // continuation from the best point.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d61_6e69_666f_6c64);
    let mut candidate_starts: Vec<Vec<T>> = Vec::new();
    for _ in 0..mcfg.random_restarts {
        let x: Vec<T> = (0..dims)
            .map(|i| {
                let u: f64 = rng.gen_range(0.0..1.0);
                lo[i] + (hi[i] - lo[i]) * T::of(u)
            })
            .collect();
        candidate_starts.push(x);
    }

    let (rank, null_dirs) =
        constraint_rank(obj, &base_x, &lo, &hi, mcfg.fd_step, ocfg.max_photons)?;
    for dir in &null_dirs {
        for sign in [T::one(), -T::one()] {
            for step in 1..=3 {
                let t = mcfg.continuation_step * T::of(step as f64) * sign;
                let x: Vec<T> = base_x
                    .iter()
                    .zip(dir)
                    .enumerate()
                    .map(|(i, (&b, &d))| (b + t * d).max(lo[i]).min(hi[i]))
                    .collect();
                candidate_starts.push(x);
            }
        }
    }

    // Random starts first run the fidelity stage, then the shared polish.
    let full_nm = NelderMeadOptions {
        simplex_tolerance: ocfg.simplex_tolerance,
        max_evaluations: ocfg.max_evaluations,
        ..NelderMeadOptions::default()
    };
    let endpoints: Vec<Vec<T>> = candidate_starts
        .par_iter()
        .map_init(
            || Evaluator::new(obj, ocfg.max_photons),
            |ev, start| {
                let pre = match obj.mode {
                    ObjectiveMode::FidelityFirst => {
                        minimize(|x| ev.fidelity_deficit(x), start, &lo, &hi, &full_nm).x
                    }
                    ObjectiveMode::WeightedSum(_) => start.clone(),
                };
                minimize(|x| ev.stage_value(stage, x), &pre, &lo, &hi, &polish_options).x
            },
        )
        .collect();

    // Verify every candidate from scratch, dedupe by distance.
    let mut ws = PermanentWorkspace::with_max_photons(ocfg.max_photons);
    let mut points: Vec<DeviceParams<T>> = Vec::new();
    let mut reports: Vec<HeraldReport<T>> = Vec::new();
    let consider = |params: DeviceParams<T>,
                        points: &mut Vec<DeviceParams<T>>,
                        reports: &mut Vec<HeraldReport<T>>,
                        ws: &mut PermanentWorkspace<T>|
     -> Result<()> {
        if points.len() >= n_samples {
            return Ok(());
        }
        if points
            .iter()
            .any(|q| param_distance(&params, q) <= mcfg.min_separation)
        {
            return Ok(());
        }
        let report = match run_experiment(&params, &obj.input, &obj.herald, obj.n_target, ws) {
            Ok(r) => r,
            Err(Error::DegenerateDevice { .. }) => return Ok(()),
            Err(e) => return Err(e),
        };
        let ok = match report.f_noon {
            Some(f) => f >= f_min && report.p_click >= p_min,
            None => false,
        };
        if ok {
            points.push(params);
            reports.push(report);
        }
        Ok(())
    };

    consider(base.best, &mut points, &mut reports, &mut ws)?;
    for x in &endpoints {
        consider(
            obj.bounds.params_from(x),
            &mut points,
            &mut reports,
            &mut ws,
        )?;
    }

    let warning = points.len() < 2;
    let tangent_dimension = if warning { 0 } else { dims - rank };

    let distances = if points.len() >= 2 {
        let mut min = T::infinity();
        let mut max = T::zero();
        let mut sum = T::zero();
        let mut count = 0usize;
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                let d = param_distance(&points[i], &points[j]);
                min = min.min(d);
                max = max.max(d);
                sum += d;
                count += 1;
            }
        }
        Some(DistanceSummary {
            min,
            mean: sum / T::of(count as f64),
            max,
        })
    } else {
        None
    };

    Ok(ManifoldSample {
        points,
        reports,
        tangent_dimension,
        distances,
        warning,
    })
}
