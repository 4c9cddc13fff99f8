//! Rate experiments for the stable-noise heat equation: coupled strong and
//! weak error sweeps against the jump-exact reference, temporal regularity
//! probes, and exact deterministic sweeps, reported with fitted log-log slopes.
//!
//! The strong metric follows `sup_t ‖X̃(t) − X(t)‖_{L^{α−}(Ω;H)}`: the α−-moment
//! is estimated per grid time across paths first, then the maximum over the
//! level's grid times is taken. Reference and every scheme level share one
//! event stream per path (the coupling contract), so level errors are
//! comonotone and the weak coupled estimator has variance of the order of the
//! squared strong error.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{fit_slope, FitError, MeanVar, SlopeFit};
use crate::levy::{self, LevyError, LevyModel};
use crate::report::IdentityReport;
use crate::rng::{self, Domain};
use crate::spde::{reference_solution, reference_time_integral, SpectralOperator};
use crate::vector::CoeffVector;

/// Schema tag stamped on every serialized rate report.
pub const RATE_SCHEMA: &str = "rate-report/v1";

/// Semigroup factors `e^{−λ_j γ}` below `e^{−DECAY_CUT}` are exact zeros at
/// double precision relative to the surviving terms; modes past this cut are
/// never materialized.
const DECAY_CUT: f64 = 60.0;

/// Arguments beyond this underflow `exp` to subnormal/zero; the state is
/// zeroed outright.
const EXP_FLOOR: f64 = 700.0;

/// Fixed path-batch size for the ordered Monte Carlo reduction. Batches are
/// evaluated in parallel but folded serially in path order, so reports are
/// byte-identical for every thread count.
const REDUCE_CHUNK: u64 = 64;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Levy(#[from] LevyError),
    #[error("bad experiment parameters: {0}")]
    BadParams(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

/// Time measure ζ appearing in test functionals `f(x) = φ(∫ x(t) ζ(dt))`.
/// `Uniform` carries density one on `[lo, hi]` (a window integral, not a
/// probability average).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeMeasure {
    PointMass { at: f64 },
    Uniform { lo: f64, hi: f64 },
    Atoms { times: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FunctionalKind {
    /// `f(x) = ⟨x, v⟩` — unbounded, weak error computable exactly mode-wise.
    Linear,
    /// `f(x) = √(1 + ⟨x, v⟩²) − 1` — globally bounded first and second
    /// derivatives.
    BoundedSmooth,
}

/// Test functional `f(x) = φ(⟨∫ x(t) ζ(dt), v⟩)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestFunctional {
    pub kind: FunctionalKind,
    pub v: CoeffVector,
    pub zeta: TimeMeasure,
}

impl TestFunctional {
    pub fn phi(&self, u: f64) -> f64 {
        match self.kind {
            FunctionalKind::Linear => u,
            FunctionalKind::BoundedSmooth => (1.0 + u * u).sqrt() - 1.0,
        }
    }
}

/// Fitted error sweep: one row per level, a log-log OLS slope over the varying
/// level parameter, and provenance (paths, seed). `wall_clock_s` is filled by
/// the CLI only, so library output stays byte-stable across machines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub schema: String,
    pub name: String,
    /// Which level parameter varies: "h", "k", or "gap".
    pub sweep: String,
    pub levels_h: Vec<f64>,
    pub levels_k: Vec<f64>,
    pub errors: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub n_paths: u64,
    pub seed: u64,
    pub slope: SlopeFit,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub heavy_tail_flag: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

impl RateReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        sweep: &str,
        levels_h: Vec<f64>,
        levels_k: Vec<f64>,
        errors: Vec<f64>,
        stderrs: Vec<f64>,
        n_paths: u64,
        seed: u64,
        heavy_tail_flag: bool,
    ) -> Result<Self, FitError> {
        let x = match sweep {
            "k" | "gap" => &levels_k,
            _ => &levels_h,
        };
        let slope = fit_slope(x, &errors)?;
        Ok(RateReport {
            schema: RATE_SCHEMA.to_string(),
            name: name.to_string(),
            sweep: sweep.to_string(),
            levels_h,
            levels_k,
            errors,
            stderrs,
            n_paths,
            seed,
            slope,
            heavy_tail_flag,
            wall_clock_s: None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rate report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level_h,level_k,error,stderr,n_paths,seed\n");
        for i in 0..self.errors.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.levels_h[i], self.levels_k[i], self.errors[i], self.stderrs[i], self.n_paths, self.seed
            ));
        }
        out
    }
}

/// Spatial mesh parameter of the N-mode Galerkin space, `h = λ_{N+1}^{−1/2}`.
pub fn mesh_h(n_modes: usize) -> f64 {
    1.0 / ((n_modes as f64 + 1.0) * PI)
}

/// Arrival data of one truncated jump event. Mark coefficients are derived
/// lazily from a per-event substream, so only the modes an experiment can see
/// are ever drawn; the first `m` coefficients are identical no matter how many
/// tail modes are materialized.
#[derive(Debug, Clone, Copy)]
pub struct EventCore {
    pub time: f64,
    /// Subordinator jump size, respectively impulse severity σ.
    pub sigma: f64,
    /// Spatial location ξ of an impulsive event (unused for subordinated noise).
    pub xi: f64,
}

/// Sample the arrival times and jump cores of one truncated path on `[0, t]`.
pub fn sample_event_cores<R: Rng>(model: &LevyModel, t: f64, rng: &mut R) -> Vec<EventCore> {
    let rate = model.event_rate();
    let mut cores = Vec::new();
    let mut s = 0.0;
    loop {
        let gap: f64 = Exp1.sample(rng);
        s += gap / rate;
        if s > t {
            break;
        }
        let core = match model {
            LevyModel::Subordinated(m) => {
                let u: f64 = rng.gen();
                EventCore { time: s, sigma: m.jump_threshold * u.powf(-2.0 / m.alpha), xi: 0.0 }
            }
            LevyModel::Impulsive(m) => {
                let u: f64 = rng.gen();
                let sigma = m.jump_threshold * u.powf(-1.0 / m.alpha);
                let xi: f64 = rng.gen();
                EventCore { time: s, sigma, xi }
            }
        };
        cores.push(core);
    }
    cores
}

/// First `n` spectral coefficients of an event's mark, drawn from `rng` for
/// the subordinated model (one standard normal per mode, in mode order) and
/// computed deterministically for the impulsive model.
pub fn mark_from_core<R: Rng>(model: &LevyModel, core: &EventCore, n: usize, rng: &mut R) -> Vec<f64> {
    match model {
        LevyModel::Subordinated(m) => (1..=n)
            .map(|j| {
                let g: f64 = StandardNormal.sample(rng);
                (core.sigma * m.q(j)).sqrt() * g
            })
            .collect(),
        LevyModel::Impulsive(_) => (1..=n)
            .map(|j| core.sigma * SpectralOperator::eigenfunction(j, core.xi))
            .collect(),
    }
}

fn event_mark(
    model: &LevyModel,
    core: &EventCore,
    n: usize,
    seed: u64,
    domain: Domain,
    path: u64,
    event_idx: u64,
) -> Vec<f64> {
    let mut rng = rng::substream(seed, domain, path, 1 + event_idx);
    mark_from_core(model, core, n, &mut rng)
}

/// Number of leading modes whose decay factor `e^{−λ_j gap}` still exceeds
/// `e^{−DECAY_CUT}` after a time gap; later modes contribute exact zeros at
/// working precision.
fn modes_alive(gap: f64, cap: usize) -> usize {
    if gap <= 0.0 {
        return cap;
    }
    let j = (DECAY_CUT / gap).sqrt() / PI;
    if j >= cap as f64 {
        cap
    } else {
        j as usize
    }
}

/// Jump-exact reference state with an active-mode watermark: coefficients at
/// and beyond `active` are exact zeros.
struct ReferenceState {
    coeffs: Vec<f64>,
    active: usize,
    cursor: f64,
}

impl ReferenceState {
    fn new(j_ref: usize, x0: &CoeffVector) -> Self {
        let mut coeffs = vec![0.0; j_ref];
        coeffs[..x0.dim()].copy_from_slice(&x0.0);
        let active = coeffs.iter().rposition(|v| *v != 0.0).map_or(0, |i| i + 1);
        ReferenceState { coeffs, active, cursor: 0.0 }
    }

    fn decay_to(&mut self, t: f64, lam: &[f64]) {
        let dt = t - self.cursor;
        if dt > 0.0 {
            for j in 0..self.active {
                let x = lam[j] * dt;
                if x > EXP_FLOOR {
                    for v in &mut self.coeffs[j..self.active] {
                        *v = 0.0;
                    }
                    self.active = j;
                    break;
                }
                self.coeffs[j] *= (-x).exp();
            }
        }
        self.cursor = t;
    }

    fn add_mark(&mut self, mark: &[f64]) {
        for (v, m) in self.coeffs.iter_mut().zip(mark) {
            *v += m;
        }
        if mark.len() > self.active {
            self.active = mark.len();
        }
    }
}

/// One scheme level of the sweep (shared across paths).
struct LevelDef {
    n: usize,
    steps: usize,
    k: f64,
    factors: Vec<f64>,
    /// `k · drift` per mode when the model has a nonzero compensator drift.
    drift_k: Option<Vec<f64>>,
    /// The level records its moment curve at eval ticks that are multiples of
    /// this stride.
    eval_every: usize,
    n_evals: usize,
    offset: usize,
}

/// Per-path mutable scheme state, advanced event-to-event by diagonal
/// skip-ahead; equals the step-by-step recursion exactly up to the closed-form
/// geometric drift sum.
struct LevelRun {
    state: Vec<f64>,
    applied_cell: usize,
    pending_cell: usize,
    pending: Vec<f64>,
}

impl LevelRun {
    fn new(def: &LevelDef, x0: &CoeffVector) -> Self {
        let mut state = vec![0.0; def.n];
        let m = x0.dim().min(def.n);
        state[..m].copy_from_slice(&x0.0[..m]);
        LevelRun { state, applied_cell: 0, pending_cell: 0, pending: vec![0.0; def.n] }
    }

    fn advance_decay(&mut self, def: &LevelDef, to_cell: usize) {
        if to_cell <= self.applied_cell {
            return;
        }
        let n_steps = (to_cell - self.applied_cell) as i32;
        match &def.drift_k {
            None => {
                for (s, f) in self.state.iter_mut().zip(&def.factors) {
                    *s *= f.powi(n_steps);
                }
            }
            Some(dk) => {
                for j in 0..def.n {
                    let f = def.factors[j];
                    let fpow = f.powi(n_steps);
                    // Σ_{i=1..n} f^i = f(1−f^n)/(1−f); factors are < 1 strictly.
                    let geom = f * (1.0 - fpow) / (1.0 - f);
                    self.state[j] = fpow * self.state[j] - geom * dk[j];
                }
            }
        }
        self.applied_cell = to_cell;
    }

    fn flush(&mut self, def: &LevelDef) {
        if self.pending_cell == 0 {
            return;
        }
        self.advance_decay(def, self.pending_cell - 1);
        match &def.drift_k {
            None => {
                for j in 0..def.n {
                    self.state[j] = def.factors[j] * (self.state[j] + self.pending[j]);
                }
            }
            Some(dk) => {
                for j in 0..def.n {
                    self.state[j] = def.factors[j] * (self.state[j] + self.pending[j] - dk[j]);
                }
            }
        }
        self.applied_cell = self.pending_cell;
        self.pending_cell = 0;
        self.pending.iter_mut().for_each(|p| *p = 0.0);
    }

    fn add_event(&mut self, def: &LevelDef, time: f64, mark: &[f64]) {
        let cell = ((time / def.k).ceil() as usize).clamp(1, def.steps);
        if self.pending_cell != cell {
            self.flush(def);
            self.pending_cell = cell;
        }
        for (p, m) in self.pending.iter_mut().zip(mark) {
            *p += m;
        }
    }

    /// State after cell `cell` has been applied (its boundary grid time).
    fn sync_to_cell(&mut self, def: &LevelDef, cell: usize) -> &[f64] {
        self.flush(def);
        self.advance_decay(def, cell);
        &self.state
    }
}

fn moment_from_powers(mv: &MeanVar, p: f64) -> (f64, f64) {
    let mean = mv.mean();
    if mean <= 0.0 {
        return (0.0, 0.0);
    }
    let m = mean.powf(1.0 / p);
    let se = mv.se() * m / (mean * p);
    (m, se)
}

/// Evaluate `per_path` for paths `0..n_paths` in fixed-size parallel batches
/// and fold the rows into per-slot accumulators serially in path order.
fn chunked_moments<F>(n_paths: u64, n_slots: usize, per_path: F) -> Vec<MeanVar>
where
    F: Fn(u64) -> Vec<f64> + Sync,
{
    let mut acc = vec![MeanVar::new(); n_slots];
    let mut start = 0u64;
    while start < n_paths {
        let end = (start + REDUCE_CHUNK).min(n_paths);
        let rows: Vec<Vec<f64>> = (start..end).into_par_iter().map(&per_path).collect();
        for row in rows {
            for (a, v) in acc.iter_mut().zip(row) {
                a.push(v);
            }
        }
        start = end;
    }
    acc
}

/// Parameters of the coupled strong-error experiment. The h-sweep runs the
/// mode counts in `h_modes` at the (fine) step count `h_steps`; the k-sweep
/// fixes `k_modes` and runs the step counts in `k_steps`. Moment curves are
/// sampled on the uniform grid of `eval_steps` times, which every `k_steps`
/// entry must divide and `h_steps` must be a multiple of.
#[derive(Debug, Clone)]
pub struct StrongParams {
    pub model: LevyModel,
    pub x0: CoeffVector,
    pub t: f64,
    pub j_ref: usize,
    pub h_modes: Vec<usize>,
    pub h_steps: usize,
    pub k_modes: usize,
    pub k_steps: Vec<usize>,
    pub eval_steps: usize,
    pub alpha_minus: f64,
    pub n_paths: u64,
    pub seed: u64,
}

fn model_alpha(model: &LevyModel) -> f64 {
    match model {
        LevyModel::Subordinated(m) => m.alpha,
        LevyModel::Impulsive(m) => m.alpha,
    }
}

/// Coupled strong-error sweeps. Per level the error is
/// `max_m (E ‖X̃(t_m) − X_ref(t_m)‖^{α−})^{1/α−}` over the level's sampled grid
/// times, with reference and schemes driven by the identical event stream.
/// Returns the (h-sweep, k-sweep) reports.
pub fn strong_error(p: &StrongParams) -> Result<(RateReport, RateReport), HarnessError> {
    p.model.validate()?;
    let alpha = model_alpha(&p.model);
    if !(1.0..alpha).contains(&p.alpha_minus) {
        return Err(HarnessError::BadParams(format!(
            "moment order {} outside [1, α = {})",
            p.alpha_minus, alpha
        )));
    }
    if p.h_steps % p.eval_steps != 0 {
        return Err(HarnessError::BadParams("h_steps must be a multiple of eval_steps".into()));
    }
    for &s in &p.k_steps {
        if s == 0 || p.eval_steps % s != 0 {
            return Err(HarnessError::BadParams("each k_steps entry must divide eval_steps".into()));
        }
    }
    for &n in p.h_modes.iter().chain(std::iter::once(&p.k_modes)) {
        if n == 0 || n > p.j_ref {
            return Err(HarnessError::BadParams("scheme modes must lie in [1, j_ref]".into()));
        }
    }
    if p.x0.dim() > p.j_ref {
        return Err(HarnessError::BadParams("X0 has more modes than the reference".into()));
    }

    let lam: Vec<f64> = (1..=p.j_ref).map(SpectralOperator::eigenvalue).collect();
    let drift = levy::compensator_drift(&p.model, p.j_ref);
    let drift_zero = drift.0.iter().all(|d| *d == 0.0);

    let mut defs: Vec<LevelDef> = Vec::new();
    let mut offset = 0usize;
    let push_def = |n: usize, steps: usize, eval_every: usize, offset: &mut usize| {
        let k = p.t / steps as f64;
        let factors: Vec<f64> = (0..n).map(|j| 1.0 / (1.0 + k * lam[j])).collect();
        let drift_k = if drift_zero { None } else { Some((0..n).map(|j| k * drift.0[j]).collect()) };
        let n_evals = p.eval_steps / eval_every;
        let def = LevelDef { n, steps, k, factors, drift_k, eval_every, n_evals, offset: *offset };
        *offset += n_evals;
        def
    };
    for &n in &p.h_modes {
        defs.push(push_def(n, p.h_steps, 1, &mut offset));
    }
    for &s in &p.k_steps {
        defs.push(push_def(p.k_modes, s, p.eval_steps / s, &mut offset));
    }
    let n_slots = offset;
    let n_max = defs.iter().map(|d| d.n).max().unwrap_or(1);

    // Distinct tail thresholds, descending, with each level's position.
    let mut thresholds: Vec<usize> = defs.iter().map(|d| d.n).collect();
    thresholds.sort_unstable_by(|a, b| b.cmp(a));
    thresholds.dedup();
    let thr_pos: Vec<usize> =
        defs.iter().map(|d| thresholds.iter().position(|t| *t == d.n).unwrap()).collect();

    let p_half = p.alpha_minus / 2.0;
    let tick = p.t / p.eval_steps as f64;

    let per_path = |path: u64| -> Vec<f64> {
        let mut out = vec![0.0; n_slots];
        let mut core_rng = rng::substream(p.seed, Domain::StrongPathH, path, 0);
        let cores = sample_event_cores(&p.model, p.t, &mut core_rng);
        let marks: Vec<Vec<f64>> = cores
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let next_tick = (c.time / tick).ceil() * tick;
                let gap = (next_tick - c.time).max(0.0);
                let need = modes_alive(gap, p.j_ref).max(n_max);
                event_mark(&p.model, c, need, p.seed, Domain::StrongPathH, path, i as u64)
            })
            .collect();

        let mut reference = ReferenceState::new(p.j_ref, &p.x0);
        let mut runs: Vec<LevelRun> = defs.iter().map(|d| LevelRun::new(d, &p.x0)).collect();
        let mut corrected = if drift_zero { Vec::new() } else { vec![0.0; p.j_ref] };
        let mut tails = vec![0.0; thresholds.len()];
        let mut ev = 0usize;

        for e in 1..=p.eval_steps {
            let t_e = e as f64 * tick;
            while ev < cores.len() && cores[ev].time <= t_e {
                let s = cores[ev].time;
                reference.decay_to(s, &lam);
                reference.add_mark(&marks[ev]);
                for (def, run) in defs.iter().zip(&mut runs) {
                    run.add_event(def, s, &marks[ev]);
                }
                ev += 1;
            }
            reference.decay_to(t_e, &lam);

            let ref_vals: &[f64] = if drift_zero {
                &reference.coeffs
            } else {
                corrected[..reference.active].copy_from_slice(&reference.coeffs[..reference.active]);
                for v in &mut corrected[reference.active..] {
                    *v = 0.0;
                }
                for (j, v) in corrected.iter_mut().enumerate() {
                    let x = lam[j] * t_e;
                    let decay = if x > EXP_FLOOR { 0.0 } else { (-x).exp() };
                    *v -= drift.0[j] * (1.0 - decay) / lam[j];
                }
                &corrected
            };
            let scan = if drift_zero { reference.active } else { p.j_ref };

            // Tail sums Σ_{j≥n} ref_j² at each distinct threshold.
            let mut run_sum = 0.0;
            let mut ti = 0;
            while ti < thresholds.len() && thresholds[ti] >= scan {
                tails[ti] = 0.0;
                ti += 1;
            }
            for j in (0..scan).rev() {
                run_sum += ref_vals[j] * ref_vals[j];
                if ti < thresholds.len() && j == thresholds[ti] {
                    tails[ti] = run_sum;
                    ti += 1;
                }
            }

            for (idx, def) in defs.iter().enumerate() {
                if e % def.eval_every != 0 {
                    continue;
                }
                let cell = def.steps * e / p.eval_steps;
                let state = runs[idx].sync_to_cell(def, cell);
                let mut err2 = tails[thr_pos[idx]];
                for j in 0..def.n {
                    let d = state[j] - ref_vals[j];
                    err2 += d * d;
                }
                out[def.offset + e / def.eval_every - 1] = err2.powf(p_half);
            }
        }
        out
    };

    let acc = chunked_moments(p.n_paths, n_slots, per_path);

    let mut level_error = vec![0.0; defs.len()];
    let mut level_se = vec![0.0; defs.len()];
    let mut level_flag = vec![false; defs.len()];
    for (idx, def) in defs.iter().enumerate() {
        let mut best = (0.0f64, 0.0f64);
        for i in 0..def.n_evals {
            let (m, se) = moment_from_powers(&acc[def.offset + i], p.alpha_minus);
            if m > best.0 {
                best = (m, se);
            }
        }
        level_error[idx] = best.0;
        level_se[idx] = best.1;
        level_flag[idx] = best.1 > 0.3 * best.0;
    }

    let nh = p.h_modes.len();
    let h_report = RateReport::new(
        "strong-h",
        "h",
        p.h_modes.iter().map(|&n| mesh_h(n)).collect(),
        vec![p.t / p.h_steps as f64; nh],
        level_error[..nh].to_vec(),
        level_se[..nh].to_vec(),
        p.n_paths,
        p.seed,
        level_flag[..nh].iter().any(|f| *f),
    )?;
    let k_report = RateReport::new(
        "strong-k",
        "k",
        vec![mesh_h(p.k_modes); p.k_steps.len()],
        p.k_steps.iter().map(|&s| p.t / s as f64).collect(),
        level_error[nh..].to_vec(),
        level_se[nh..].to_vec(),
        p.n_paths,
        p.seed,
        level_flag[nh..].iter().any(|f| *f),
    )?;
    Ok((h_report, k_report))
}

/// Exact (noise-free) strong-error sweep for a deterministic initial value:
/// `max_m ‖(S^m_{h,k} − S(t_m)) X0‖` computed mode-wise, tail truncated at
/// `mode_cap`. Levels pair `(n_modes, steps)`, so parabolic refinements
/// `steps ∝ n²` isolate the spatial order.
pub fn deterministic_strong_sweep(
    x0: &CoeffVector,
    t: f64,
    levels: &[(usize, usize)],
    mode_cap: usize,
) -> Result<RateReport, HarnessError> {
    let cap = mode_cap.max(x0.dim());
    let mut errors = Vec::with_capacity(levels.len());
    for &(n, steps) in levels {
        let k = t / steps as f64;
        let mut err2 = vec![0.0; steps];
        for j in 1..=cap {
            let x0j = x0.0.get(j - 1).copied().unwrap_or(0.0);
            if x0j == 0.0 {
                continue;
            }
            let lam = SpectralOperator::eigenvalue(j);
            let f = if j <= n { 1.0 / (1.0 + k * lam) } else { 0.0 };
            let e_step = (-lam * k).exp();
            let mut fpow = 1.0;
            let mut epow = 1.0;
            for m in 0..steps {
                fpow *= f;
                epow *= e_step;
                if fpow == 0.0 && epow == 0.0 {
                    break;
                }
                let d = (fpow - epow) * x0j;
                err2[m] += d * d;
            }
        }
        errors.push(err2.iter().fold(0.0f64, |a, b| a.max(*b)).sqrt());
    }
    RateReport::new(
        "deterministic-h",
        "h",
        levels.iter().map(|&(n, _)| mesh_h(n)).collect(),
        levels.iter().map(|&(_, s)| t / s as f64).collect(),
        errors,
        vec![0.0; levels.len()],
        1,
        0,
        false,
    )
    .map_err(HarnessError::from)
}

/// Parameters of the exact linear-functional weak sweeps with deterministic
/// initial value: `x0` and `v` are full-length coefficient vectors (their
/// common length is the truncation cap).
#[derive(Debug, Clone)]
pub struct WeakLinearParams {
    pub x0: CoeffVector,
    pub v: CoeffVector,
    pub t: f64,
    pub h_modes: Vec<usize>,
    pub h_steps: usize,
    pub k_modes: usize,
    pub k_steps: Vec<usize>,
}

/// Weak error of the linear functional `⟨·, v⟩` at terminal time, computed
/// exactly: `|⟨(S^M_{h,k} P_N − S(t)) X0, v⟩|` mode by mode — no Monte Carlo.
/// Returns the (h-sweep, k-sweep) reports.
pub fn weak_linear_rates(p: &WeakLinearParams) -> Result<(RateReport, RateReport), HarnessError> {
    let cap = p.x0.dim().min(p.v.dim());
    for &n in p.h_modes.iter().chain(std::iter::once(&p.k_modes)) {
        if n == 0 || n > cap {
            return Err(HarnessError::BadParams("scheme modes must lie in [1, cap]".into()));
        }
    }
    let weak = |n: usize, steps: usize| -> f64 {
        let k = p.t / steps as f64;
        let mut acc = 0.0;
        for j in 1..=cap {
            let lam = SpectralOperator::eigenvalue(j);
            let e = (-lam * p.t).exp();
            let w = p.x0.0[j - 1] * p.v.0[j - 1];
            if j <= n {
                let f = (1.0 / (1.0 + k * lam)).powi(steps as i32);
                acc += w * (f - e);
            } else {
                acc -= w * e;
            }
        }
        acc.abs()
    };
    let errs_h: Vec<f64> = p.h_modes.iter().map(|&n| weak(n, p.h_steps)).collect();
    let errs_k: Vec<f64> = p.k_steps.iter().map(|&s| weak(p.k_modes, s)).collect();
    let h_report = RateReport::new(
        "weak-linear-h",
        "h",
        p.h_modes.iter().map(|&n| mesh_h(n)).collect(),
        vec![p.t / p.h_steps as f64; p.h_modes.len()],
        errs_h,
        vec![0.0; p.h_modes.len()],
        1,
        0,
        false,
    )?;
    let k_report = RateReport::new(
        "weak-linear-k",
        "k",
        vec![mesh_h(p.k_modes); p.k_steps.len()],
        p.k_steps.iter().map(|&s| p.t / s as f64).collect(),
        errs_k,
        vec![0.0; p.k_steps.len()],
        1,
        0,
        false,
    )?;
    Ok((h_report, k_report))
}

/// Parameters of the coupled Monte Carlo weak-error h-sweep for a (bounded
/// smooth) test functional evaluated at the terminal time.
#[derive(Debug, Clone)]
pub struct WeakSmoothParams {
    pub model: LevyModel,
    pub x0: CoeffVector,
    pub t: f64,
    pub j_ref: usize,
    pub h_modes: Vec<usize>,
    pub steps: usize,
    pub functional: TestFunctional,
    pub n_paths: u64,
    pub seed: u64,
}

/// Per-level coupled means `E[f(X̃(T)) − f(X_ref(T))]` and their standard
/// errors; the building block behind [`weak_smooth_rate`], exposed separately
/// so degenerate cases (constant φ → exact zeros) remain observable.
fn weak_smooth_level_stats(p: &WeakSmoothParams) -> Result<(Vec<f64>, Vec<f64>), HarnessError> {
    p.model.validate()?;
    match p.functional.zeta {
        TimeMeasure::PointMass { at } if (at - p.t).abs() <= 1e-12 * p.t.max(1.0) => {}
        _ => {
            return Err(HarnessError::Unsupported(
                "coupled weak sweep evaluates ζ = point mass at the terminal time".into(),
            ))
        }
    }
    for &n in &p.h_modes {
        if n == 0 || n > p.j_ref {
            return Err(HarnessError::BadParams("scheme modes must lie in [1, j_ref]".into()));
        }
    }
    let n_max = p.h_modes.iter().copied().max().unwrap_or(1);
    let v = &p.functional.v.0;
    let cap = p.j_ref.min(v.len());
    let lam: Vec<f64> = (1..=cap.max(n_max)).map(SpectralOperator::eigenvalue).collect();
    let drift = levy::compensator_drift(&p.model, cap.max(n_max));
    let drift_zero = drift.0.iter().all(|d| *d == 0.0);

    // Deterministic contributions to u_ref = ⟨X_ref(T), v⟩.
    let mut u_ref0 = 0.0;
    for j in 0..cap {
        let m = p.x0.0.get(j).copied().unwrap_or(0.0);
        if m != 0.0 {
            let x = lam[j] * p.t;
            if x <= EXP_FLOOR {
                u_ref0 += m * (-x).exp() * v[j];
            }
        }
        if !drift_zero {
            let x = lam[j] * p.t;
            let decay = if x > EXP_FLOOR { 0.0 } else { (-x).exp() };
            u_ref0 -= drift.0[j] * (1.0 - decay) / lam[j] * v[j];
        }
    }

    let mut defs: Vec<LevelDef> = Vec::new();
    for (idx, &n) in p.h_modes.iter().enumerate() {
        let k = p.t / p.steps as f64;
        let factors: Vec<f64> = (0..n).map(|j| 1.0 / (1.0 + k * lam[j])).collect();
        let drift_k = if drift_zero { None } else { Some((0..n).map(|j| k * drift.0[j]).collect()) };
        defs.push(LevelDef {
            n,
            steps: p.steps,
            k,
            factors,
            drift_k,
            eval_every: 1,
            n_evals: 1,
            offset: idx,
        });
    }

    let per_path = |path: u64| -> Vec<f64> {
        let mut core_rng = rng::substream(p.seed, Domain::WeakPath, path, 0);
        let cores = sample_event_cores(&p.model, p.t, &mut core_rng);
        let mut runs: Vec<LevelRun> = defs.iter().map(|d| LevelRun::new(d, &p.x0)).collect();
        let mut u_ref = u_ref0;
        for (i, c) in cores.iter().enumerate() {
            let need = modes_alive(p.t - c.time, cap).max(n_max);
            let mark = event_mark(&p.model, c, need, p.seed, Domain::WeakPath, path, i as u64);
            for (def, run) in defs.iter().zip(&mut runs) {
                run.add_event(def, c.time, &mark);
            }
            let gap = p.t - c.time;
            for (j, m) in mark.iter().enumerate().take(cap) {
                let x = lam[j] * gap;
                if x > EXP_FLOOR {
                    break;
                }
                u_ref += m * (-x).exp() * v[j];
            }
        }
        defs.iter()
            .zip(&mut runs)
            .map(|(def, run)| {
                let state = run.sync_to_cell(def, def.steps);
                let u: f64 = state.iter().zip(v).map(|(s, vj)| s * vj).sum();
                p.functional.phi(u) - p.functional.phi(u_ref)
            })
            .collect()
    };

    let acc = chunked_moments(p.n_paths, defs.len(), per_path);
    Ok((acc.iter().map(|a| a.mean()).collect(), acc.iter().map(|a| a.se()).collect()))
}

/// Coupled Monte Carlo weak-error h-sweep: per level the error is
/// `|E[f(X̃(T)) − f(X_ref(T))]|` under the shared event stream.
pub fn weak_smooth_rate(p: &WeakSmoothParams) -> Result<RateReport, HarnessError> {
    let (means, ses) = weak_smooth_level_stats(p)?;
    let errors: Vec<f64> = means.iter().map(|m| m.abs()).collect();
    let heavy = errors.iter().zip(&ses).any(|(e, s)| *s > 0.3 * e);
    RateReport::new(
        "weak-smooth-h",
        "h",
        p.h_modes.iter().map(|&n| mesh_h(n)).collect(),
        vec![p.t / p.steps as f64; p.h_modes.len()],
        errors,
        ses,
        p.n_paths,
        p.seed,
        heavy,
    )
    .map_err(HarnessError::from)
}

/// Parameters of the temporal-regularity probe around an interior time `t0`.
#[derive(Debug, Clone)]
pub struct HolderParams {
    pub model: LevyModel,
    pub x0: CoeffVector,
    pub t0: f64,
    /// Ascending time gaps γ; the probe measures ‖X(t0+γ) − X(t0)‖.
    pub gaps: Vec<f64>,
    pub j_ref: usize,
    pub alpha_minus: f64,
    pub n_paths: u64,
    pub seed: u64,
}

/// Temporal Hölder probe: fits the slope of
/// `(E ‖X(t0+γ) − X(t0)‖^{α−})^{1/α−}` against the gap γ on the jump-exact
/// solution (no scheme involved).
pub fn holder_probe(p: &HolderParams) -> Result<RateReport, HarnessError> {
    p.model.validate()?;
    let alpha = model_alpha(&p.model);
    if !(1.0..alpha).contains(&p.alpha_minus) {
        return Err(HarnessError::BadParams(format!(
            "moment order {} outside [1, α = {})",
            p.alpha_minus, alpha
        )));
    }
    if p.gaps.len() < 2 || p.gaps.windows(2).any(|w| w[0] >= w[1]) || p.gaps[0] <= 0.0 {
        return Err(HarnessError::BadParams("gaps must be positive and ascending".into()));
    }
    if p.t0 <= 0.0 {
        return Err(HarnessError::BadParams("t0 must be positive".into()));
    }
    let mut eval_times = Vec::with_capacity(p.gaps.len() + 1);
    eval_times.push(p.t0);
    eval_times.extend(p.gaps.iter().map(|g| p.t0 + g));
    let t_end = *eval_times.last().unwrap();

    let lam: Vec<f64> = (1..=p.j_ref).map(SpectralOperator::eigenvalue).collect();
    let drift = levy::compensator_drift(&p.model, p.j_ref);
    let drift_zero = drift.0.iter().all(|d| *d == 0.0);
    let p_half = p.alpha_minus / 2.0;

    let per_path = |path: u64| -> Vec<f64> {
        let mut core_rng = rng::substream(p.seed, Domain::HolderPath, path, 0);
        let cores = sample_event_cores(&p.model, t_end, &mut core_rng);
        let marks: Vec<Vec<f64>> = cores
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let next = eval_times.partition_point(|t| *t < c.time);
                let gap = if next < eval_times.len() { eval_times[next] - c.time } else { 0.0 };
                let need = if next < eval_times.len() { modes_alive(gap, p.j_ref) } else { 0 };
                event_mark(&p.model, c, need, p.seed, Domain::HolderPath, path, i as u64)
            })
            .collect();

        let mut reference = ReferenceState::new(p.j_ref, &p.x0);
        let mut snapshot = vec![0.0; p.j_ref];
        let mut value = vec![0.0; p.j_ref];
        let mut out = Vec::with_capacity(p.gaps.len());
        let mut ev = 0usize;
        for (ti, &t_e) in eval_times.iter().enumerate() {
            while ev < cores.len() && cores[ev].time <= t_e {
                reference.decay_to(cores[ev].time, &lam);
                reference.add_mark(&marks[ev]);
                ev += 1;
            }
            reference.decay_to(t_e, &lam);
            let scan = if drift_zero {
                reference.active
            } else {
                value[..reference.active].copy_from_slice(&reference.coeffs[..reference.active]);
                for v in &mut value[reference.active..] {
                    *v = 0.0;
                }
                for (j, v) in value.iter_mut().enumerate() {
                    let x = lam[j] * t_e;
                    let decay = if x > EXP_FLOOR { 0.0 } else { (-x).exp() };
                    *v -= drift.0[j] * (1.0 - decay) / lam[j];
                }
                p.j_ref
            };
            let vals: &[f64] = if drift_zero { &reference.coeffs } else { &value };
            if ti == 0 {
                snapshot[..scan].copy_from_slice(&vals[..scan]);
                for s in &mut snapshot[scan..] {
                    *s = 0.0;
                }
            } else {
                let mut d2 = 0.0;
                for j in 0..p.j_ref {
                    let d = vals.get(j).copied().unwrap_or(0.0) - snapshot[j];
                    d2 += d * d;
                }
                out.push(d2.powf(p_half));
            }
        }
        out
    };

    let acc = chunked_moments(p.n_paths, p.gaps.len(), per_path);
    let mut errors = Vec::with_capacity(p.gaps.len());
    let mut ses = Vec::with_capacity(p.gaps.len());
    let mut heavy = false;
    for a in &acc {
        let (m, se) = moment_from_powers(a, p.alpha_minus);
        heavy |= se > 0.3 * m;
        errors.push(m);
        ses.push(se);
    }
    RateReport::new(
        "holder-gap",
        "gap",
        vec![0.0; p.gaps.len()],
        p.gaps.clone(),
        errors,
        ses,
        p.n_paths,
        p.seed,
        heavy,
    )
    .map_err(HarnessError::from)
}

/// Pathwise-exact check that the difference operator commutes with
/// ζ-integration of the solution path: adding one event `(s, x)` to the noise
/// changes `∫ X(t) ζ(dt)` by exactly `∫_{t ≥ s} S(t−s) x ζ(dt)`.
pub fn time_integral_derivative_check(
    model: &LevyModel,
    zeta: &TimeMeasure,
    horizon: f64,
    j_dim: usize,
    n_probes: u64,
    seed: u64,
) -> IdentityReport {
    if let TimeMeasure::Atoms { times, .. } = zeta {
        assert!(times.windows(2).all(|w| w[0] <= w[1]), "atom times must be sorted");
    }
    let zeros = CoeffVector::zeros(j_dim);
    let drift = levy::compensator_drift(model, j_dim);
    let integral = |events: &[(f64, CoeffVector)]| -> CoeffVector {
        match zeta {
            TimeMeasure::PointMass { at } => {
                reference_solution(&zeros, events, &drift, &[*at]).pop().unwrap()
            }
            TimeMeasure::Uniform { lo, hi } => reference_time_integral(&zeros, events, &drift, *lo, *hi),
            TimeMeasure::Atoms { times, weights } => {
                let values = reference_solution(&zeros, events, &drift, times);
                let mut acc = CoeffVector::zeros(j_dim);
                for (v, w) in values.iter().zip(weights) {
                    acc.axpy(*w, v);
                }
                acc
            }
        }
    };
    let expected = |s: f64, x: &[f64]| -> CoeffVector {
        let one = |t: f64| -> Vec<f64> {
            (1..=j_dim)
                .map(|j| {
                    if s > t {
                        return 0.0;
                    }
                    let arg = SpectralOperator::eigenvalue(j) * (t - s);
                    if arg > EXP_FLOOR {
                        0.0
                    } else {
                        (-arg).exp() * x[j - 1]
                    }
                })
                .collect()
        };
        match zeta {
            TimeMeasure::PointMass { at } => CoeffVector(one(*at)),
            TimeMeasure::Uniform { lo, hi } => CoeffVector(
                (1..=j_dim)
                    .map(|j| {
                        if s > *hi {
                            return 0.0;
                        }
                        let lamj = SpectralOperator::eigenvalue(j);
                        let from = s.max(*lo);
                        ((-lamj * (from - s)).exp() - (-lamj * (hi - s)).exp()) / lamj * x[j - 1]
                    })
                    .collect(),
            ),
            TimeMeasure::Atoms { times, weights } => {
                let mut acc = CoeffVector::zeros(j_dim);
                for (t, w) in times.iter().zip(weights) {
                    acc.axpy(*w, &CoeffVector(one(*t)));
                }
                acc
            }
        }
    };

    let mut probe_rng = rng::stream(seed, Domain::Probe, 0);
    let mut worst = (0.0f64, CoeffVector::zeros(j_dim), CoeffVector::zeros(j_dim));
    for i in 0..n_probes {
        let mut path_rng = rng::stream(seed, Domain::Probe, 1 + i);
        let stream = levy::sample_jump_events(model, horizon, j_dim, &mut path_rng);
        let events = stream.event_pairs();
        let s: f64 = probe_rng.gen::<f64>() * horizon;
        let core = sample_event_cores(model, f64::INFINITY, &mut probe_rng)
            .into_iter()
            .next()
            .map(|mut c| {
                c.time = s;
                c
            })
            .expect("unbounded horizon yields an event");
        let x = mark_from_core(model, &core, j_dim, &mut probe_rng);
        let base = integral(&events);
        let mut bumped = events.clone();
        let pos = bumped.partition_point(|e| e.0 <= s);
        bumped.insert(pos, (s, CoeffVector(x.clone())));
        let lhs = integral(&bumped).sub(&base);
        let rhs = expected(s, &x);
        let rel = lhs.rel_err(&rhs);
        if rel >= worst.0 {
            worst = (rel, lhs, rhs);
        }
    }
    IdentityReport::exact("time-integral-derivative", worst.1 .0, worst.2 .0, n_probes, worst.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::SubordinatedQWiener;

    fn light_model(threshold: f64) -> LevyModel {
        LevyModel::Subordinated(SubordinatedQWiener {
            alpha: 1.5,
            q_c: 1.0,
            q_r: 1.0,
            n_modes: 4096,
            jump_threshold: threshold,
        })
    }

    fn power_vector(n: usize, decay: f64) -> CoeffVector {
        CoeffVector((1..=n).map(|j| (j as f64).powf(-decay)).collect())
    }

    #[test]
    fn zero_noise_sweep_recovers_quadratic_spatial_order() {
        let x0 = power_vector(2048, 2.51);
        let levels = [(8, 64), (16, 256), (32, 1024), (64, 4096)];
        let report = deterministic_strong_sweep(&x0, 1.0, &levels, 2048).unwrap();
        println!("zero-noise h-slope = {:.4}", report.slope.slope);
        assert!((report.slope.slope - 2.0).abs() < 0.1);
    }

    #[test]
    fn linear_weak_sweeps_hit_alpha_beta_rates() {
        let params = WeakLinearParams {
            x0: power_vector(20000, 2.31),
            v: power_vector(20000, 0.51),
            t: 3e-7,
            h_modes: vec![8, 16, 32, 64, 128],
            h_steps: 1024,
            k_modes: 16384,
            k_steps: vec![4, 8, 16, 32, 64],
        };
        let (h, k) = weak_linear_rates(&params).unwrap();
        println!("weak-linear slopes: h = {:.4}, k = {:.4}", h.slope.slope, k.slope.slope);
        assert!((h.slope.slope - 1.8).abs() < 0.15);
        assert!((k.slope.slope - 0.9).abs() < 0.15);
    }

    #[test]
    fn event_core_arrival_rate_matches_model() {
        let model = light_model(1e-2);
        let rate = model.event_rate();
        let n = 2000u64;
        let mut mv = MeanVar::new();
        for i in 0..n {
            let mut rng = rng::substream(7, Domain::JumpStream, i, 0);
            mv.push(sample_event_cores(&model, 1.0, &mut rng).len() as f64);
        }
        let sigma = (rate / n as f64).sqrt();
        println!("event rate: sample {:.3} vs model {:.3} (σ = {:.3})", mv.mean(), rate, sigma);
        assert!((mv.mean() - rate).abs() < 3.0 * sigma + 3.0 * mv.se());
    }

    #[test]
    fn strong_error_with_negligible_noise_matches_exact_sweep() {
        // Threshold 1e6 ⇒ retained rate ≈ 9e−6 events per path: no path in this
        // run carries a jump, so the coupled sweep must reproduce the exact
        // deterministic error curves on the matching grids.
        let x0 = power_vector(512, 2.51);
        let p = StrongParams {
            model: light_model(1e6),
            x0: x0.clone(),
            t: 1.0,
            j_ref: 512,
            h_modes: vec![8, 16, 32, 64],
            h_steps: 256,
            k_modes: 64,
            k_steps: vec![64, 128, 256],
            eval_steps: 256,
            alpha_minus: 1.3,
            n_paths: 4,
            seed: 11,
        };
        let (h, k) = strong_error(&p).unwrap();
        let exact_h = deterministic_strong_sweep(
            &x0,
            1.0,
            &[(8, 256), (16, 256), (32, 256), (64, 256)],
            512,
        )
        .unwrap();
        let exact_k =
            deterministic_strong_sweep(&x0, 1.0, &[(64, 64), (64, 128), (64, 256)], 512).unwrap();
        for (got, want) in h.errors.iter().zip(&exact_h.errors) {
            assert!((got - want).abs() <= 1e-9 * want.max(1e-12), "h: {got} vs {want}");
        }
        for (got, want) in k.errors.iter().zip(&exact_k.errors) {
            assert!((got - want).abs() <= 1e-9 * want.max(1e-12), "k: {got} vs {want}");
        }
        println!("noise-free coupled sweep matches the exact oracle on all levels");
    }

    #[test]
    fn strong_error_reports_are_reproducible() {
        let p = StrongParams {
            model: light_model(1e-2),
            x0: CoeffVector::zeros(1),
            t: 1.0,
            j_ref: 64,
            h_modes: vec![2, 4, 8, 16],
            h_steps: 4096,
            k_modes: 16,
            k_steps: vec![16, 32, 64, 128],
            eval_steps: 128,
            alpha_minus: 1.3,
            n_paths: 16,
            seed: 3,
        };
        let (h1, k1) = strong_error(&p).unwrap();
        let (h2, k2) = strong_error(&p).unwrap();
        assert_eq!(h1.to_json(), h2.to_json());
        assert_eq!(k1.to_json(), k2.to_json());
        assert!(h1.errors.iter().all(|e| *e > 0.0));
        println!("strong sweep reproducible: {} h-levels, {} k-levels", h1.errors.len(), k1.errors.len());
    }

    #[test]
    fn constant_functional_has_zero_weak_error() {
        let p = WeakSmoothParams {
            model: light_model(1e-1),
            x0: CoeffVector::zeros(1),
            t: 1.0,
            j_ref: 64,
            h_modes: vec![2, 4, 8, 16],
            steps: 64,
            functional: TestFunctional {
                kind: FunctionalKind::BoundedSmooth,
                v: CoeffVector::zeros(64),
                zeta: TimeMeasure::PointMass { at: 1.0 },
            },
            n_paths: 32,
            seed: 5,
        };
        let (means, ses) = weak_smooth_level_stats(&p).unwrap();
        assert!(means.iter().all(|m| *m == 0.0));
        assert!(ses.iter().all(|s| *s == 0.0));
        println!("constant φ ⇒ coupled weak error exactly zero at every level");
    }

    #[test]
    fn time_integral_derivative_is_exact_for_all_measures() {
        let model = light_model(1e-2);
        let cases = [
            TimeMeasure::PointMass { at: 0.6 },
            TimeMeasure::Uniform { lo: 0.0, hi: 1.0 },
            TimeMeasure::Atoms { times: vec![0.25, 0.5, 0.9], weights: vec![0.5, 1.5, 0.25] },
        ];
        for zeta in &cases {
            let report = time_integral_derivative_check(&model, zeta, 1.0, 16, 300, 19);
            println!(
                "time-integral derivative {:?}: max rel err {:.2e}",
                zeta,
                report.max_rel_err.unwrap()
            );
            assert!(report.pass, "failed for {zeta:?}");
        }
    }

    #[test]
    fn bounded_smooth_functional_is_flat_at_zero() {
        let f = TestFunctional {
            kind: FunctionalKind::BoundedSmooth,
            v: CoeffVector::scalar(1.0),
            zeta: TimeMeasure::PointMass { at: 1.0 },
        };
        assert_eq!(f.phi(0.0), 0.0);
        assert!((f.phi(1e-8) - 5e-17).abs() < 1e-18);
        assert!(f.phi(1e6) < 1e6);
    }
}
