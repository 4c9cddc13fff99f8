//! Finite point configurations on a truncated intensity window.
//!
//! A `PointConfiguration` is the computational stand-in for a Poisson random
//! measure `N = Σ δ_{X_n}`: a finite multiset of atoms. Atom identity is exact
//! bit-equality of coordinates; repeated points are tracked through multiplicity
//! counts, which makes the remove-one-atom operator well defined even on ties.
//!
//! An `IntensityWindow` is a rectangle of the plane carrying a constant-density
//! intensity with finite total mass; it provides exact sub-rectangle masses for
//! closed-form compensator integrals and a uniform point sampler for the
//! one-extra-point estimator of μ-side integrals.
//!
//! The module also hosts the Monte-Carlo verifiers of the Mecke identity
//! `E ∫ f(N, x) N(dx) = E ∫ f(N + δ_x, x) μ(dx)` and of its bivariate analogue
//! over the second factorial measure.

use crate::fit::MeanVar;
use crate::report::IdentityReport;
use crate::rng::{self, Domain};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

/// Points of the ambient product space, `(time-like, space-like)` coordinates.
pub type Pt2 = [f64; 2];

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("window mass must be finite and nonnegative, got {0}")]
    BadMass(f64),
    #[error("degenerate window region")]
    BadRegion,
    #[error("point ({0}, {1}) lies outside the window region")]
    OutsideWindow(f64, f64),
}

/// Axis-aligned rectangle `[lo0, hi0] × [lo1, hi1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub lo: Pt2,
    pub hi: Pt2,
}

impl Rect {
    pub fn new(lo: Pt2, hi: Pt2) -> Self {
        Rect { lo, hi }
    }

    pub fn area(&self) -> f64 {
        (self.hi[0] - self.lo[0]).max(0.0) * (self.hi[1] - self.lo[1]).max(0.0)
    }

    pub fn contains(&self, p: &Pt2) -> bool {
        p[0] >= self.lo[0] && p[0] <= self.hi[0] && p[1] >= self.lo[1] && p[1] <= self.hi[1]
    }

    pub fn intersection_area(&self, other: &Rect) -> f64 {
        let w = (self.hi[0].min(other.hi[0]) - self.lo[0].max(other.lo[0])).max(0.0);
        let h = (self.hi[1].min(other.hi[1]) - self.lo[1].max(other.lo[1])).max(0.0);
        w * h
    }
}

/// Truncated intensity measure: a rectangle with constant density.
#[derive(Debug, Clone)]
pub struct IntensityWindow {
    pub id: u64,
    pub region: Rect,
    pub density: f64,
}

impl IntensityWindow {
    pub fn new(id: u64, region: Rect, density: f64) -> Result<Self, MeasureError> {
        let mass = region.area() * density;
        if !mass.is_finite() || mass < 0.0 || !density.is_finite() || density < 0.0 {
            return Err(MeasureError::BadMass(mass));
        }
        Ok(IntensityWindow { id, region, density })
    }

    /// μ(region).
    pub fn total_mass(&self) -> f64 {
        self.region.area() * self.density
    }

    /// μ(B ∩ region), exact for rectangles.
    pub fn measure_of(&self, b: &Rect) -> f64 {
        self.region.intersection_area(b) * self.density
    }

    /// One point with law μ|region / μ(region).
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Pt2 {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        [
            self.region.lo[0] + u * (self.region.hi[0] - self.region.lo[0]),
            self.region.lo[1] + v * (self.region.hi[1] - self.region.lo[1]),
        ]
    }

    /// Draw one Poisson configuration: count ~ Poisson(total mass), locations
    /// i.i.d. uniform over the region.
    pub fn sample_poisson<R: Rng>(&self, rng: &mut R) -> PointConfiguration<Pt2> {
        let mass = self.total_mass();
        let mut config = PointConfiguration::empty(self.id);
        if mass == 0.0 {
            return config;
        }
        let count = Poisson::new(mass).expect("positive mass").sample(rng) as u64;
        for _ in 0..count {
            let p = self.sample_point(rng);
            config = config.add_atom(&p);
        }
        config
    }
}

/// Finite multiset of atoms; value semantics throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration<P> {
    pub window_id: u64,
    atoms: Vec<(P, u32)>,
}

impl<P: Clone + PartialEq> PointConfiguration<P> {
    pub fn empty(window_id: u64) -> Self {
        PointConfiguration {
            window_id,
            atoms: Vec::new(),
        }
    }

    pub fn from_points(window_id: u64, points: &[P]) -> Self {
        let mut c = Self::empty(window_id);
        for p in points {
            c = c.add_atom(p);
        }
        c
    }

    /// Atom list as `(location, multiplicity)` pairs in insertion order.
    pub fn atoms(&self) -> &[(P, u32)] {
        &self.atoms
    }

    pub fn total_count(&self) -> u64 {
        self.atoms.iter().map(|(_, m)| *m as u64).sum()
    }

    pub fn multiplicity(&self, x: &P) -> u32 {
        self.atoms
            .iter()
            .find(|(p, _)| p == x)
            .map(|(_, m)| *m)
            .unwrap_or(0)
    }

    /// Number of atom units satisfying the predicate (counts multiplicity).
    pub fn count_where(&self, pred: impl Fn(&P) -> bool) -> u64 {
        self.atoms
            .iter()
            .filter(|(p, _)| pred(p))
            .map(|(_, m)| *m as u64)
            .sum()
    }

    /// `η + δ_x`: returns a new configuration with the multiplicity at `x`
    /// incremented.
    pub fn add_atom(&self, x: &P) -> Self {
        let mut next = self.clone();
        if let Some(entry) = next.atoms.iter_mut().find(|(p, _)| p == x) {
            entry.1 += 1;
        } else {
            next.atoms.push((x.clone(), 1));
        }
        next
    }

    /// `η ∖ δ_x`: decrements the multiplicity at `x` if `x` is an atom,
    /// otherwise returns `η` unchanged (total map).
    pub fn remove_atom(&self, x: &P) -> Self {
        let mut next = self.clone();
        if let Some(idx) = next.atoms.iter().position(|(p, _)| p == x) {
            if next.atoms[idx].1 > 1 {
                next.atoms[idx].1 -= 1;
            } else {
                next.atoms.remove(idx);
            }
        }
        next
    }

    /// Sub-configuration of the atoms satisfying the predicate, preserving
    /// insertion order and multiplicities.
    pub fn retain(&self, pred: impl Fn(&P) -> bool) -> Self {
        PointConfiguration {
            window_id: self.window_id,
            atoms: self.atoms.iter().filter(|(p, _)| pred(p)).cloned().collect(),
        }
    }

    /// Multiset equality regardless of internal atom order.
    pub fn same_multiset(&self, other: &Self) -> bool {
        self.total_count() == other.total_count()
            && self
                .atoms
                .iter()
                .all(|(p, m)| other.multiplicity(p) == *m)
    }

    /// Ordered pairs of distinct atom *units* (the second factorial measure):
    /// distinct atoms contribute multiplicity products, an atom of multiplicity
    /// `m` contributes `m(m−1)` self-pairs.
    pub fn factorial_pairs(&self) -> Vec<(P, P)> {
        let mut pairs = Vec::new();
        for (i, (p, m)) in self.atoms.iter().enumerate() {
            for (j, (q, l)) in self.atoms.iter().enumerate() {
                let weight = if i == j {
                    (*m as u64) * (*m as u64 - 1)
                } else {
                    (*m as u64) * (*l as u64)
                };
                for _ in 0..weight {
                    pairs.push((p.clone(), q.clone()));
                }
            }
        }
        pairs
    }
}

/// Integrand `f(η, x)` for the Mecke identity.
pub trait MeckeIntegrand: Sync {
    fn eval(&self, eta: &PointConfiguration<Pt2>, x: &Pt2) -> f64;

    /// Closed-form `∫ f(η + δ_x, x) μ(dx)` over the window, if available.
    fn mu_integral_added(&self, _eta: &PointConfiguration<Pt2>, _win: &IntensityWindow) -> Option<f64> {
        None
    }
}

/// Integrand `f(η, x₁, x₂)` for the bivariate Mecke identity.
pub trait MeckeIntegrand2: Sync {
    fn eval(&self, eta: &PointConfiguration<Pt2>, x1: &Pt2, x2: &Pt2) -> f64;

    /// Closed-form `∫∫ f(η, x₁, x₂) μ(dx₁) μ(dx₂)` over the window, if available.
    fn mu_integral(&self, _eta: &PointConfiguration<Pt2>, _win: &IntensityWindow) -> Option<f64> {
        None
    }
}

/// How the μ-side of a Mecke-type identity is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuEstimator {
    /// Use the integrand's closed form (falls back to `ExtraPoint` if absent).
    ClosedForm,
    /// Unbiased one-extra-point rule `∫ g dμ ≈ μ(E) · g(X)`, `X ~ μ/μ(E)`.
    ExtraPoint,
}

/// Monte-Carlo comparison of both sides of the Mecke identity.
///
/// Left side per sample: `Σ_atoms mult · f(η, x)`. Right side per sample: the
/// closed-form `∫ f(η+δ_x, x) μ(dx)` or the one-extra-point estimator.
pub fn mecke_check(
    name: &str,
    f: &dyn MeckeIntegrand,
    window: &IntensityWindow,
    n_samples: u64,
    seed: u64,
    estimator: MuEstimator,
    sigmas: f64,
) -> IdentityReport {
    let mass = window.total_mass();
    let mut lhs = MeanVar::new();
    let mut rhs = MeanVar::new();
    let mut rng = rng::stream(seed, Domain::MeckeSample, window.id);
    let mut extra = rng::stream(seed, Domain::MeckeExtra, window.id);
    for _ in 0..n_samples {
        let eta = window.sample_poisson(&mut rng);
        let mut sum = 0.0;
        for (p, m) in eta.atoms() {
            sum += *m as f64 * f.eval(&eta, p);
        }
        lhs.push(sum);
        let mu_side = match estimator {
            MuEstimator::ClosedForm => f.mu_integral_added(&eta, window),
            MuEstimator::ExtraPoint => None,
        };
        let mu_side = mu_side.unwrap_or_else(|| {
            if mass == 0.0 {
                0.0
            } else {
                let x = window.sample_point(&mut extra);
                mass * f.eval(&eta.add_atom(&x), &x)
            }
        });
        rhs.push(mu_side);
    }
    IdentityReport::monte_carlo(name, lhs.mean(), rhs.mean(), lhs.se(), rhs.se(), n_samples, sigmas)
}

/// Monte-Carlo comparison of the bivariate Mecke identity: expectation of the
/// sum of `f(η∖δ_{x₁}∖δ_{x₂}, x₁, x₂)` over ordered distinct atom pairs against
/// the expectation of the μ⊗μ integral of `f(η, ·, ·)`.
pub fn mecke_check_bivariate(
    name: &str,
    f: &dyn MeckeIntegrand2,
    window: &IntensityWindow,
    n_samples: u64,
    seed: u64,
    estimator: MuEstimator,
    sigmas: f64,
) -> IdentityReport {
    let mass = window.total_mass();
    let mut lhs = MeanVar::new();
    let mut rhs = MeanVar::new();
    let mut rng = rng::stream(seed, Domain::MeckeSample, window.id ^ 0x5ab5);
    let mut extra = rng::stream(seed, Domain::MeckeExtra, window.id ^ 0x5ab5);
    for _ in 0..n_samples {
        let eta = window.sample_poisson(&mut rng);
        let mut sum = 0.0;
        for (x1, x2) in eta.factorial_pairs() {
            let reduced = eta.remove_atom(&x1).remove_atom(&x2);
            sum += f.eval(&reduced, &x1, &x2);
        }
        lhs.push(sum);
        let mu_side = match estimator {
            MuEstimator::ClosedForm => f.mu_integral(&eta, window),
            MuEstimator::ExtraPoint => None,
        };
        let mu_side = mu_side.unwrap_or_else(|| {
            if mass == 0.0 {
                0.0
            } else {
                let x1 = window.sample_point(&mut extra);
                let x2 = window.sample_point(&mut extra);
                mass * mass * f.eval(&eta, &x1, &x2)
            }
        });
        rhs.push(mu_side);
    }
    IdentityReport::monte_carlo(name, lhs.mean(), rhs.mean(), lhs.se(), rhs.se(), n_samples, sigmas)
}

/// Catalog of integrands used by the verification suite.
pub mod catalog {
    use super::*;

    /// `f ≡ 1`; both sides equal the window mass.
    pub struct One;

    impl MeckeIntegrand for One {
        fn eval(&self, _eta: &PointConfiguration<Pt2>, _x: &Pt2) -> f64 {
            1.0
        }
        fn mu_integral_added(&self, _eta: &PointConfiguration<Pt2>, win: &IntensityWindow) -> Option<f64> {
            Some(win.total_mass())
        }
    }

    /// `f(η, x) = η(B) · 1_B(x)`; both sides equal `μ(B)² + μ(B)`.
    pub struct CountTimesIndicator {
        pub b: Rect,
    }

    impl MeckeIntegrand for CountTimesIndicator {
        fn eval(&self, eta: &PointConfiguration<Pt2>, x: &Pt2) -> f64 {
            if self.b.contains(x) {
                eta.count_where(|p| self.b.contains(p)) as f64
            } else {
                0.0
            }
        }
        fn mu_integral_added(&self, eta: &PointConfiguration<Pt2>, win: &IntensityWindow) -> Option<f64> {
            let nb = eta.count_where(|p| self.b.contains(p)) as f64;
            Some(win.measure_of(&self.b) * (nb + 1.0))
        }
    }

    /// `f(η, x) = η(B) · 1_C(x)` with `B ∩ C = ∅`; both sides equal `μ(B)·μ(C)`.
    pub struct DisjointCountIndicator {
        pub b: Rect,
        pub c: Rect,
    }

    impl MeckeIntegrand for DisjointCountIndicator {
        fn eval(&self, eta: &PointConfiguration<Pt2>, x: &Pt2) -> f64 {
            if self.c.contains(x) {
                eta.count_where(|p| self.b.contains(p)) as f64
            } else {
                0.0
            }
        }
        fn mu_integral_added(&self, eta: &PointConfiguration<Pt2>, win: &IntensityWindow) -> Option<f64> {
            // Adding an atom inside C does not change η(B) when B ∩ C = ∅.
            let nb = eta.count_where(|p| self.b.contains(p)) as f64;
            Some(win.measure_of(&self.c) * nb)
        }
    }

    /// Bivariate `f ≡ 1`; both sides equal `μ(E)²`.
    pub struct One2;

    impl MeckeIntegrand2 for One2 {
        fn eval(&self, _eta: &PointConfiguration<Pt2>, _x1: &Pt2, _x2: &Pt2) -> f64 {
            1.0
        }
        fn mu_integral(&self, _eta: &PointConfiguration<Pt2>, win: &IntensityWindow) -> Option<f64> {
            let m = win.total_mass();
            Some(m * m)
        }
    }

    /// Bivariate integrand depending only on the points: `1_B(x₁) · 1_C(x₂)`.
    pub struct ProductIndicator2 {
        pub b: Rect,
        pub c: Rect,
    }

    impl MeckeIntegrand2 for ProductIndicator2 {
        fn eval(&self, _eta: &PointConfiguration<Pt2>, x1: &Pt2, x2: &Pt2) -> f64 {
            if self.b.contains(x1) && self.c.contains(x2) {
                1.0
            } else {
                0.0
            }
        }
        fn mu_integral(&self, _eta: &PointConfiguration<Pt2>, win: &IntensityWindow) -> Option<f64> {
            Some(win.measure_of(&self.b) * win.measure_of(&self.c))
        }
    }
}
