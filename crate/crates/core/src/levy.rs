//! α-stable noise models: the subordinated cylindrical Q-Wiener process and the
//! impulsive cylindrical process, simulated as finite space-time jump-event
//! streams with exact small-jump compensation, plus grid-increment sampling and
//! the bridge into point configurations.
//!
//! Both models drive the stochastic heat equation through spectral mark
//! coefficients. The subordinated model time-changes a Q-Wiener process by an
//! α/2-stable subordinator `Z` with `E e^{−rZ(t)} = exp(−t r^{α/2})`; its jump
//! intensity is `(α/2)/Γ(1−α/2) · s^{−1−α/2} ds`, so jumps of size `σ > ε`
//! arrive at rate `ε^{−α/2}/Γ(1−α/2)` and carry Gaussian marks of covariance
//! `σ·q_j`. The impulsive model throws Pareto-sized point impulses `σ·δ_ξ` at
//! uniform locations `ξ ∈ (0,1)` with size intensity `σ^{−1−α} dσ`; the retained
//! jumps are compensated by their exact mean drift.

use crate::fit::gamma;
use crate::measure::PointConfiguration;
use crate::report::IdentityReport;
use crate::rng::{self, Domain};
use crate::spde::SpectralOperator;
use crate::vector::CoeffVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LevyError {
    #[error("stability index must lie in (1,2), got {0}")]
    BadAlpha(f64),
    #[error("jump threshold must be positive (zero means infinite activity)")]
    ZeroThreshold,
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),
}

/// One positive α/2-stable increment over `dt`, exact in law:
/// `E e^{−r ΔZ} = exp(−dt · r^a)` for `a = alpha_half ∈ (0,1)`.
///
/// Kanter's representation of the positive stable law: with `U ~ U(0,π)` and
/// `W ~ Exp(1)`,
/// `S = (A(U)/W)^{(1−a)/a}`, `A(u) = sin(au)^{a/(1−a)} sin((1−a)u) / sin(u)^{1/(1−a)}`
/// has Laplace transform `exp(−r^a)`; scaling by `dt^{1/a}` gives the increment.
pub fn sample_stable_subordinator_increment<R: Rng>(alpha_half: f64, dt: f64, rng: &mut R) -> f64 {
    assert!(alpha_half > 0.0 && alpha_half < 1.0);
    assert!(dt > 0.0);
    let a = alpha_half;
    let u: f64 = std::f64::consts::PI * rng.gen::<f64>();
    let w: f64 = Exp1.sample(rng);
    let au = (a * u).sin().powf(a / (1.0 - a));
    let bu = ((1.0 - a) * u).sin();
    let su = u.sin().powf(1.0 / (1.0 - a));
    let big_a = au * bu / su;
    dt.powf(1.0 / a) * (big_a / w).powf((1.0 - a) / a)
}

/// Subordinated cylindrical Q-Wiener model: `L(t) = W(Z(t))` with covariance
/// eigenvalues `q_j = q_c · j^{−q_r}` and subordinator jumps truncated at
/// `jump_threshold`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SubordinatedQWiener {
    pub alpha: f64,
    pub q_c: f64,
    pub q_r: f64,
    pub n_modes: usize,
    pub jump_threshold: f64,
}

impl SubordinatedQWiener {
    pub fn validate(&self) -> Result<(), LevyError> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(LevyError::BadAlpha(self.alpha));
        }
        if !(self.jump_threshold > 0.0) {
            return Err(LevyError::ZeroThreshold);
        }
        if !(self.q_c > 0.0 && self.q_r > 0.0) {
            return Err(LevyError::Inadmissible("need q_c > 0 and q_r > 0".into()));
        }
        Ok(())
    }

    /// Noise-space admissibility for smoothness `beta`: `Σ λ_j^{β−2/α} q_j < ∞`,
    /// i.e. `q_r > 2β − 4/α + 1`.
    pub fn admissible_beta(&self, beta: f64) -> Result<(), LevyError> {
        self.validate()?;
        let needed = 2.0 * beta - 4.0 / self.alpha + 1.0;
        if self.q_r <= needed {
            return Err(LevyError::Inadmissible(format!(
                "q decay {} too slow for beta {}: need q_r > {:.4}",
                self.q_r, beta, needed
            )));
        }
        Ok(())
    }

    pub fn q(&self, j: usize) -> f64 {
        self.q_c * (j as f64).powf(-self.q_r)
    }

    /// Arrival rate of retained subordinator jumps (`σ > ε`):
    /// `∫_ε^∞ (a/Γ(1−a)) σ^{−1−a} dσ = ε^{−a}/Γ(1−a)`, `a = α/2`.
    pub fn event_rate(&self) -> f64 {
        let a = self.alpha / 2.0;
        self.jump_threshold.powf(-a) / gamma(1.0 - a)
    }
}

/// Impulsive cylindrical model: point impulses `σ·δ_ξ` with `ξ ~ U(0,1)` and
/// Pareto sizes above `jump_threshold` from the intensity `σ^{−1−α} dσ`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImpulsiveCylindrical {
    pub alpha: f64,
    pub n_modes: usize,
    pub jump_threshold: f64,
}

impl ImpulsiveCylindrical {
    pub fn validate(&self) -> Result<(), LevyError> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(LevyError::BadAlpha(self.alpha));
        }
        if !(self.jump_threshold > 0.0) {
            return Err(LevyError::ZeroThreshold);
        }
        Ok(())
    }

    /// Admissibility in dimension one: `β < 2/α − 1/2`.
    pub fn admissible_beta(&self, beta: f64) -> Result<(), LevyError> {
        self.validate()?;
        let cap = 2.0 / self.alpha - 0.5;
        if beta >= cap {
            return Err(LevyError::Inadmissible(format!(
                "beta {} out of range: impulsive model needs beta < {:.4}",
                beta, cap
            )));
        }
        Ok(())
    }

    /// Arrival rate of retained impulses: `|O| · ε^{−α}/α` with `|O| = 1`.
    pub fn event_rate(&self) -> f64 {
        self.jump_threshold.powf(-self.alpha) / self.alpha
    }

    /// Retained size mass per unit time, `∫_ε^∞ σ · σ^{−1−α} dσ = ε^{1−α}/(α−1)`.
    pub fn size_mass_rate(&self) -> f64 {
        self.jump_threshold.powf(1.0 - self.alpha) / (self.alpha - 1.0)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LevyModel {
    Subordinated(SubordinatedQWiener),
    Impulsive(ImpulsiveCylindrical),
}

impl LevyModel {
    pub fn validate(&self) -> Result<(), LevyError> {
        match self {
            LevyModel::Subordinated(m) => m.validate(),
            LevyModel::Impulsive(m) => m.validate(),
        }
    }

    pub fn admissible_beta(&self, beta: f64) -> Result<(), LevyError> {
        match self {
            LevyModel::Subordinated(m) => m.admissible_beta(beta),
            LevyModel::Impulsive(m) => m.admissible_beta(beta),
        }
    }

    pub fn n_modes(&self) -> usize {
        match self {
            LevyModel::Subordinated(m) => m.n_modes,
            LevyModel::Impulsive(m) => m.n_modes,
        }
    }

    pub fn event_rate(&self) -> f64 {
        match self {
            LevyModel::Subordinated(m) => m.event_rate(),
            LevyModel::Impulsive(m) => m.event_rate(),
        }
    }
}

/// One retained jump of the driving process: arrival time and spectral mark.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: CoeffVector,
}

/// Finite-activity event stream plus its compensator drift per unit time. The
/// compensated process `Σ_{s_i≤t} mark_i − t·drift` has mean zero.
#[derive(Debug, Clone)]
pub struct EventStream {
    pub events: Vec<JumpEvent>,
    pub drift: CoeffVector,
}

impl EventStream {
    pub fn event_pairs(&self) -> Vec<(f64, CoeffVector)> {
        self.events.iter().map(|e| (e.time, e.mark.clone())).collect()
    }
}

/// Sample the retained jump events on `[0, t]` with `j_dim` spectral mark
/// coefficients. Arrival gaps are exponential at the model's retained rate;
/// sizes use inverse-tail (Pareto) sampling; subordinated marks draw one
/// Gaussian per mode, impulsive marks evaluate the eigenbasis at the impulse
/// location. Draw order per event is fixed (size, then location/modes), so the
/// stream is a pure function of the RNG stream.
pub fn sample_jump_events<R: Rng>(model: &LevyModel, t: f64, j_dim: usize, rng: &mut R) -> EventStream {
    model.validate().expect("valid model");
    let rate = model.event_rate();
    let mut events = Vec::new();
    let mut s = 0.0;
    loop {
        let gap: f64 = Exp1.sample(rng);
        s += gap / rate;
        if s > t {
            break;
        }
        let mark = match model {
            LevyModel::Subordinated(m) => {
                let a = m.alpha / 2.0;
                let u: f64 = rng.gen();
                let sigma = m.jump_threshold * u.powf(-1.0 / a);
                CoeffVector(
                    (1..=j_dim)
                        .map(|j| {
                            let g: f64 = StandardNormal.sample(rng);
                            (sigma * m.q(j)).sqrt() * g
                        })
                        .collect(),
                )
            }
            LevyModel::Impulsive(m) => {
                let u: f64 = rng.gen();
                let sigma = m.jump_threshold * u.powf(-1.0 / m.alpha);
                let xi: f64 = rng.gen();
                CoeffVector(
                    (1..=j_dim)
                        .map(|j| sigma * SpectralOperator::eigenfunction(j, xi))
                        .collect(),
                )
            }
        };
        events.push(JumpEvent { time: s, mark });
    }
    let drift = compensator_drift(model, j_dim);
    EventStream { events, drift }
}

/// Compensator drift per unit time, `∫_{retained} x ν(dx)` in spectral
/// coordinates: zero for the subordinated model (conditionally centered
/// Gaussian marks); for the impulsive model the size mass rate times
/// `∫_0^1 e_j(ξ) dξ = √2 (1 − cos jπ)/(jπ)`.
pub fn compensator_drift(model: &LevyModel, j_dim: usize) -> CoeffVector {
    match model {
        LevyModel::Subordinated(_) => CoeffVector::zeros(j_dim),
        LevyModel::Impulsive(m) => {
            let mass = m.size_mass_rate();
            CoeffVector(
                (1..=j_dim)
                    .map(|j| {
                        let jpi = j as f64 * std::f64::consts::PI;
                        mass * std::f64::consts::SQRT_2 * (1.0 - jpi.cos().round()) / jpi
                    })
                    .collect(),
            )
        }
    }
}

/// Bucket an event stream into compensated grid increments over `steps` uniform
/// cells of `[0, t]`: each increment is the time-ordered sum of the marks in its
/// cell minus `k·drift` (first `j_dim` coordinates).
pub fn increments_from_events(stream: &EventStream, t: f64, steps: usize, j_dim: usize) -> Vec<CoeffVector> {
    let k = t / steps as f64;
    let mut incs = vec![CoeffVector::zeros(j_dim); steps];
    for ev in &stream.events {
        if ev.time > t {
            continue;
        }
        // Cell (t_{m-1}, t_m] contains the event; clamp t=0 edge into cell 0.
        let cell = ((ev.time / k).ceil() as usize).max(1).min(steps) - 1;
        for j in 0..j_dim {
            incs[cell].0[j] += ev.mark.0.get(j).copied().unwrap_or(0.0);
        }
    }
    for inc in &mut incs {
        for j in 0..j_dim {
            inc.0[j] -= k * stream.drift.0.get(j).copied().unwrap_or(0.0);
        }
    }
    incs
}

/// Sum consecutive runs of `factor` fine increments (in order). Coarse-grid
/// increments produced this way from a shared event stream are bit-exactly the
/// sums of the fine ones — the coupling contract used by nested-grid sweeps.
pub fn aggregate_increments(fine: &[CoeffVector], factor: usize) -> Vec<CoeffVector> {
    assert!(factor >= 1 && fine.len() % factor == 0);
    fine.chunks(factor)
        .map(|chunk| {
            let mut acc = chunk[0].clone();
            for c in &chunk[1..] {
                acc = acc.add(c);
            }
            acc
        })
        .collect()
}

/// Draw grid increments directly, exact in law. The subordinated model samples
/// `ΔZ_m` per step and then mode-wise `N(0, q_j·ΔZ_m)`; the impulsive model
/// buckets a fresh truncated event stream.
pub fn sample_increments<R: Rng>(model: &LevyModel, t: f64, steps: usize, j_dim: usize, rng: &mut R) -> Vec<CoeffVector> {
    match model {
        LevyModel::Subordinated(m) => {
            let k = t / steps as f64;
            (0..steps)
                .map(|_| {
                    let dz = sample_stable_subordinator_increment(m.alpha / 2.0, k, rng);
                    CoeffVector(
                        (1..=j_dim)
                            .map(|j| {
                                let g: f64 = StandardNormal.sample(rng);
                                (m.q(j) * dz).sqrt() * g
                            })
                            .collect(),
                    )
                })
                .collect()
        }
        LevyModel::Impulsive(_) => {
            let stream = sample_jump_events(model, t, j_dim, rng);
            increments_from_events(&stream, t, steps, j_dim)
        }
    }
}

/// Space-time point of the jump measure: arrival time and mark coefficients.
pub type JumpPoint = (f64, CoeffVector);

/// Bridge into the point-configuration representation: each retained jump
/// becomes one atom `(time, mark)`.
pub fn events_to_configuration(stream: &EventStream, window_id: u64) -> PointConfiguration<JumpPoint> {
    let points: Vec<JumpPoint> = stream.events.iter().map(|e| (e.time, e.mark.clone())).collect();
    PointConfiguration::from_points(window_id, &points)
}

/// Exact check of the Malliavin derivative of the driving process: with
/// `F_t(η) = Σ_{(s_i, x_i) ∈ η, s_i ≤ t} x_i`, injecting an extra event `(s, x)`
/// changes the value by `1_{s ≤ t} · x`, exactly.
pub fn levy_derivative_check(model: &LevyModel, t: f64, horizon: f64, n_probes: u64, seed: u64) -> IdentityReport {
    let j_dim = model.n_modes();
    let mut worst = 0.0f64;
    let mut rng = rng::stream(seed, Domain::LevyCheck, 0);
    for probe in 0..n_probes {
        let mut path_rng = rng::stream(seed, Domain::LevyCheck, probe + 1);
        let stream = sample_jump_events(model, horizon, j_dim, &mut path_rng);
        let eta = events_to_configuration(&stream, 0);
        let s: f64 = horizon * rng.gen::<f64>();
        // A probe mark drawn from the model's own mark distribution.
        let x = match model {
            LevyModel::Subordinated(m) => {
                let a = m.alpha / 2.0;
                let u: f64 = rng.gen();
                let sigma = m.jump_threshold * u.powf(-1.0 / a);
                CoeffVector(
                    (1..=j_dim)
                        .map(|j| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            (sigma * m.q(j)).sqrt() * g
                        })
                        .collect(),
                )
            }
            LevyModel::Impulsive(m) => {
                let u: f64 = rng.gen();
                let sigma = m.jump_threshold * u.powf(-1.0 / m.alpha);
                let xi: f64 = rng.gen();
                CoeffVector(
                    (1..=j_dim)
                        .map(|j| sigma * SpectralOperator::eigenfunction(j, xi))
                        .collect(),
                )
            }
        };
        let value = |cfg: &PointConfiguration<JumpPoint>| -> CoeffVector {
            let mut acc = CoeffVector::zeros(j_dim);
            for ((time, mark), mult) in cfg.atoms().iter().map(|(p, m)| (p, m)) {
                if *time <= t {
                    acc.axpy(*mult as f64, mark);
                }
            }
            acc
        };
        let lhs = value(&eta.add_atom(&(s, x.clone()))).sub(&value(&eta));
        let rhs = if s <= t { x } else { CoeffVector::zeros(j_dim) };
        worst = worst.max(lhs.rel_err(&rhs));
    }
    IdentityReport::exact("levy-derivative", vec![worst], vec![0.0], n_probes, worst)
}
