//! Transition-aware phase design.
//!
//! The design problem: choose one RIS configuration per user, served in
//! cyclic order 1, 2, …, K, so that every user meets its SNR target while
//! the weighted squared phase changes between consecutive configurations
//! stay small. Rising changes are cheap (fast LC response) and falling
//! changes expensive, so each element's change is weighted by `c⁺` or `c⁻`
//! according to its sign.
//!
//! [`run_algorithm1`] relaxes the SNR constraint of each user with a
//! multiplier `λ_k` and minimises, one element at a time, the per-element
//! Lagrangian
//!
//! ```text
//! L_n(ω) = c_n²·(ω − ω_prev,n)² − 2λ·r_n·cos(ω − φ_n)
//! ```
//!
//! where `r_n e^{jφ_n}` is the n-th entry of `z = M s` at the current
//! iterate. A step that breaks the SNR target is discarded and `λ_k` grows
//! by `1/α`; an accepted step shrinks it by `α`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::lc_dynamics::{LcParams, PhaseVector};
use crate::precoder::{Beamformer, SnrQuadratic};

/// Default for `optimizer.lambda_scale`.
pub const DEFAULT_LAMBDA_SCALE: f64 = 1e-3;

/// Bisection tolerance for stationary points of `L_n`, radians.
const ROOT_TOL: f64 = 1e-10;

/// Per-direction weights on phase changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionWeights {
    pub c_plus: f64,
    pub c_minus: f64,
}

impl TransitionWeights {
    pub fn new(c_plus: f64, c_minus: f64) -> Result<Self> {
        if !(c_plus > 0.0 && c_minus > 0.0 && c_plus.is_finite() && c_minus.is_finite()) {
            return Err(Error::invalid(
                "weights",
                "c_plus and c_minus must be positive",
            ));
        }
        if c_minus <= c_plus {
            return Err(Error::invalid("weights", "c_minus must exceed c_plus"));
        }
        Ok(Self { c_plus, c_minus })
    }

    /// `c⁺ = √(τ⁺/τ⁻)`, `c⁻ = 1`.
    pub fn from_lc(lc: &LcParams) -> Result<Self> {
        Self::new((lc.tau_plus / lc.tau_minus).sqrt(), 1.0)
    }

    /// `c` for a change of sign `delta` (zero counts as rising).
    pub fn weight(&self, delta: f64) -> f64 {
        if delta >= 0.0 {
            self.c_plus
        } else {
            self.c_minus
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerParams {
    pub alpha: f64,
    pub i_max: usize,
    /// Search half-width per user, radians.
    pub delta: Vec<f64>,
    pub lambda_init: Vec<f64>,
    pub line_search_points: usize,
    /// Linear SNR targets per user.
    pub snr_thresholds: Vec<f64>,
}

impl OptimizerParams {
    pub fn n_users(&self) -> usize {
        self.snr_thresholds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_users();
        if k == 0 {
            return Err(Error::invalid("snr_thresholds", "need at least one user"));
        }
        if self.delta.len() != k || self.lambda_init.len() != k {
            return Err(Error::Shape(format!(
                "{k} thresholds but {} deltas and {} initial multipliers",
                self.delta.len(),
                self.lambda_init.len()
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::OutOfRange {
                name: "alpha",
                value: self.alpha,
                lo: 0.0,
                hi: 1.0,
            });
        }
        if self.i_max == 0 {
            return Err(Error::invalid("i_max", "must be at least 1"));
        }
        if self.line_search_points < 2 {
            return Err(Error::invalid("line_search_points", "must be at least 2"));
        }
        for &d in &self.delta {
            if !(d > 0.0 && d < std::f64::consts::PI) {
                return Err(Error::OutOfRange {
                    name: "delta",
                    value: d,
                    lo: 0.0,
                    hi: std::f64::consts::PI,
                });
            }
        }
        if self
            .lambda_init
            .iter()
            .any(|&l| !(l > 0.0 && l.is_finite()))
        {
            return Err(Error::invalid("lambda_init", "must be positive"));
        }
        if self
            .snr_thresholds
            .iter()
            .any(|&g| !(g >= 0.0 && g.is_finite()))
        {
            return Err(Error::invalid("snr_thresholds", "must be non-negative"));
        }
        Ok(())
    }
}

/// Initial multiplier `scale·N·δ²/SNR_max`, which puts the SNR term of `L_n`
/// at roughly `scale` times the largest cost term a single step can reach.
pub fn auto_lambda(quad: &SnrQuadratic, delta: f64, scale: f64) -> f64 {
    let max = quad.max_snr();
    if max > 0.0 {
        scale * quad.len() as f64 * delta * delta / max
    } else {
        scale
    }
}

/// One outer iteration of [`run_algorithm1`].
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub lambdas: Vec<f64>,
    /// Quadratic-form SNR of each user after the iteration.
    pub snrs: Vec<f64>,
    /// Whether each user's step was kept.
    pub accepted: Vec<bool>,
}

/// One configuration per user together with the shared beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlan {
    pub phases: Vec<PhaseVector>,
    pub beamformer: Beamformer,
    /// Re-evaluated on the direct channel path.
    pub achieved_snr: Vec<f64>,
    pub cost: f64,
    pub feasible: bool,
    pub iterations_run: usize,
    /// λ of each user after every outer iteration.
    pub lambda_trace: Vec<Vec<f64>>,
    pub history: Vec<IterationRecord>,
}

impl PhasePlan {
    pub fn n_users(&self) -> usize {
        self.phases.len()
    }

    /// Writes the per-iteration history as
    /// `iteration,cost,user,lambda,snr,accepted`.
    pub fn write_history_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,cost,user,lambda,snr,accepted")?;
        for rec in &self.history {
            for k in 0..rec.lambdas.len() {
                writeln!(
                    out,
                    "{},{:.17e},{},{:.17e},{:.17e},{}",
                    rec.iteration, rec.cost, k, rec.lambdas[k], rec.snrs[k], rec.accepted[k] as u8
                )?;
            }
        }
        Ok(())
    }
}

fn prev_index(k: usize, n_users: usize) -> usize {
    (k + n_users - 1) % n_users
}

/// `ω_k − ω_{k−1}`, with `ω_0 := ω_K`. Not wrapped modulo 2π.
pub fn cyclic_delta(phases: &[PhaseVector], k: usize) -> Vec<f64> {
    let prev = &phases[prev_index(k, phases.len())];
    phases[k]
        .iter()
        .zip(prev.iter())
        .map(|(a, b)| a - b)
        .collect()
}

/// `Σ_k Σ_n (c·Δω_{k,n})²`.
pub fn weighted_cost(phases: &[PhaseVector], weights: &TransitionWeights) -> f64 {
    (0..phases.len())
        .map(|k| {
            cyclic_delta(phases, k)
                .into_iter()
                .map(|d| {
                    let c = weights.weight(d);
                    c * c * d * d
                })
                .sum::<f64>()
        })
        .sum()
}

/// `w·(ω − ω_prev)² − 2λ·r·cos(ω − φ)`.
///
/// `weight` is the squared transition weight `c²` of the element.
pub fn element_lagrangian(
    omega: f64,
    omega_prev: f64,
    lambda: f64,
    r: f64,
    phi: f64,
    weight: f64,
) -> f64 {
    let d = omega - omega_prev;
    weight * d * d - 2.0 * lambda * r * (omega - phi).cos()
}

fn element_gradient(
    omega: f64,
    omega_prev: f64,
    lambda: f64,
    r: f64,
    phi: f64,
    weight: f64,
) -> f64 {
    2.0 * weight * (omega - omega_prev) - 2.0 * lambda * r * (phi - omega).sin()
}

/// Per-user Lagrangian `‖c∘Δω_k‖² + λ·(γ − SNR_k(ω_k))` on the full SNR.
pub fn user_lagrangian(
    phases: &[f64],
    prev: &[f64],
    lambda: f64,
    quad: &SnrQuadratic,
    threshold: f64,
    weights: &TransitionWeights,
) -> f64 {
    let cost: f64 = phases
        .iter()
        .zip(prev)
        .map(|(a, b)| {
            let d = a - b;
            let c = weights.weight(d);
            c * c * d * d
        })
        .sum();
    cost + lambda * (threshold - quad.snr(phases))
}

/// Gradient of [`user_lagrangian`]:
/// `2c²∘Δω − 2λ·r∘sin(φ − ω)` with `(r, φ)` taken from `z` at `phases`.
pub fn lagrangian_gradient(
    phases: &[f64],
    prev: &[f64],
    lambda: f64,
    quad: &SnrQuadratic,
    weights: &TransitionWeights,
) -> Vec<f64> {
    let (r, phi) = quad.r_phi(phases);
    phases
        .iter()
        .zip(prev)
        .enumerate()
        .map(|(n, (&w, &p))| {
            let c = weights.weight(w - p);
            element_gradient(w, p, lambda, r[n], phi[n], c * c)
        })
        .collect()
}

/// Minimises `L_n` over `[lo, hi]`. Candidates are the endpoints, the grid
/// points and every stationary point bracketed on a `points`-point grid.
/// Ties go to the smaller `|ω − ω_prev|`, then to the smaller `ω`.
#[allow(clippy::too_many_arguments)]
pub fn minimize_element(
    lo: f64,
    hi: f64,
    omega_prev: f64,
    lambda: f64,
    r: f64,
    phi: f64,
    weights: &TransitionWeights,
    points: usize,
) -> f64 {
    // The weight jumps at ω_prev, so the two sides are searched separately.
    let mut best = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut consider = |w: f64| {
        let d = w - omega_prev;
        let c = weights.weight(d);
        let l = element_lagrangian(w, omega_prev, lambda, r, phi, c * c);
        let key = (l, d.abs(), w);
        let tol = 1e-14 * (1.0 + l.abs());
        let better = key.0 < best.0 - tol
            || ((key.0 - best.0).abs() <= tol
                && (key.1 < best.1 || (key.1 == best.1 && key.2 < best.2)));
        if better {
            best = key;
        }
    };
    let mut pieces = Vec::with_capacity(2);
    if omega_prev > lo && omega_prev < hi {
        pieces.push((lo, omega_prev, weights.c_minus));
        pieces.push((omega_prev, hi, weights.c_plus));
        consider(omega_prev);
    } else {
        let c = if hi <= omega_prev {
            weights.c_minus
        } else {
            weights.c_plus
        };
        pieces.push((lo, hi, c));
    }
    consider(lo);
    consider(hi);
    for (a, b, c) in pieces {
        let w2 = c * c;
        let g = |w: f64| element_gradient(w, omega_prev, lambda, r, phi, w2);
        let step = (b - a) / (points - 1) as f64;
        let mut x0 = a;
        let mut g0 = g(x0);
        for i in 1..points {
            let x1 = if i == points - 1 {
                b
            } else {
                a + step * i as f64
            };
            let g1 = g(x1);
            consider(x1);
            if g0 < 0.0 && g1 >= 0.0 {
                consider(bisect(&g, x0, x1));
            }
            x0 = x1;
            g0 = g1;
        }
    }
    best.2
}

/// Root of `g` in `[a, b]` given `g(a) < 0 ≤ g(b)`.
fn bisect(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        if g(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// One line-search step for user k: every element moves to the minimiser of
/// `L_n` on `[ω_n − δ, ω_n + δ]` intersected with the clamp range, with
/// `z` frozen at `current`.
#[allow(clippy::too_many_arguments)]
pub fn line_search_step(
    current: &PhaseVector,
    prev: &PhaseVector,
    quad: &SnrQuadratic,
    lambda: f64,
    delta: f64,
    weights: &TransitionWeights,
    lc: &LcParams,
    points: usize,
) -> Result<PhaseVector> {
    if current.len() != quad.len() || prev.len() != quad.len() {
        return Err(Error::Shape(format!(
            "phase vectors of length {} and {} for {} elements",
            current.len(),
            prev.len(),
            quad.len()
        )));
    }
    if !(delta > 0.0 && delta < std::f64::consts::PI) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            lo: 0.0,
            hi: std::f64::consts::PI,
        });
    }
    let (r, phi) = quad.r_phi(current.as_slice());
    let (floor, ceil) = (lc.phase_floor(), lc.phase_ceiling());
    let out = current
        .iter()
        .enumerate()
        .map(|(n, &w)| {
            let lo = (w - delta).max(floor);
            let hi = (w + delta).min(ceil);
            minimize_element(
                lo,
                hi,
                prev[n],
                lambda,
                r[n],
                phi[n],
                weights,
                points.max(2),
            )
        })
        .collect();
    Ok(PhaseVector::new(out))
}

/// Number of common rotations tried by [`co_phased_in_range`].
const ROTATIONS: usize = 1024;

/// Co-phasing configuration clamped into the LC range. The SNR ignores a
/// common phase offset, so the rotation losing least to the clamp is used
/// (the first one on ties).
pub fn co_phased_in_range(quad: &SnrQuadratic, lc: &LcParams) -> PhaseVector {
    let base = quad.co_phased();
    let rotated = |j: usize| {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / ROTATIONS as f64;
        PhaseVector::new(
            base.iter()
                .map(|w| (w + theta).rem_euclid(2.0 * std::f64::consts::PI))
                .collect(),
        )
        .clamped(lc)
    };
    // a direct path pins the global phase
    if quad.offset.norm() > 0.0 {
        return rotated(0);
    }
    let snrs: Vec<f64> = (0..ROTATIONS)
        .map(|j| quad.snr(rotated(j).as_slice()))
        .collect();
    let best = snrs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let j = snrs
        .iter()
        .position(|&s| s >= best * (1.0 - 1e-12))
        .unwrap_or(0);
    rotated(j)
}

/// Transition-unaware benchmark: every user gets its co-phasing
/// configuration.
pub fn anomalous_reflection_plan(
    quads: &[SnrQuadratic],
    beamformer: &Beamformer,
    lc: &LcParams,
    weights: &TransitionWeights,
    snr_thresholds: &[f64],
) -> PhasePlan {
    let phases: Vec<PhaseVector> = quads.iter().map(|q| co_phased_in_range(q, lc)).collect();
    let achieved_snr: Vec<f64> = quads
        .iter()
        .zip(&phases)
        .map(|(q, p)| q.snr(p.as_slice()))
        .collect();
    let feasible = achieved_snr.iter().zip(snr_thresholds).all(|(s, g)| s >= g);
    PhasePlan {
        cost: weighted_cost(&phases, weights),
        phases,
        beamformer: beamformer.clone(),
        achieved_snr,
        feasible,
        iterations_run: 0,
        lambda_trace: Vec::new(),
        history: Vec::new(),
    }
}

/// Runs the multiplier / line-search loop from `init`.
///
/// `quads[k]` must describe user k's SNR under `init.beamformer`. The
/// returned plan is the lowest-cost accepted iterate; since every accepted
/// step keeps its user feasible and leaves the others untouched, all
/// iterates satisfy the targets. `achieved_snr` is the quadratic-form SNR;
/// callers holding the channels re-verify it on the direct path.
pub fn run_algorithm1(
    quads: &[SnrQuadratic],
    lc: &LcParams,
    weights: &TransitionWeights,
    params: &OptimizerParams,
    init: &PhasePlan,
) -> Result<PhasePlan> {
    params.validate()?;
    let k_users = params.n_users();
    if quads.len() != k_users || init.phases.len() != k_users {
        return Err(Error::Shape(format!(
            "{k_users} users in params, {} SNR models, {} initial configurations",
            quads.len(),
            init.phases.len()
        )));
    }
    let gamma = &params.snr_thresholds;

    let mut w: Vec<PhaseVector> = init.phases.iter().map(|p| p.clone().clamped(lc)).collect();
    let mut snr: Vec<f64> = quads
        .iter()
        .zip(&w)
        .map(|(q, p)| q.snr(p.as_slice()))
        .collect();
    if snr.iter().zip(gamma).any(|(s, g)| s < g) {
        let max_snr = quads
            .iter()
            .zip(&snr)
            .map(|(q, s)| q.max_snr().max(*s))
            .collect();
        return Err(Error::Infeasible { max_snr });
    }

    let mut lambda = params.lambda_init.clone();
    let mut best_cost = weighted_cost(&w, weights);
    let mut best = (w.clone(), snr.clone());
    let mut lambda_trace = Vec::with_capacity(params.i_max);
    let mut history = Vec::with_capacity(params.i_max);

    for i in 1..=params.i_max {
        let mut accepted = vec![false; k_users];
        for k in 0..k_users {
            let prev = w[prev_index(k, k_users)].clone();
            let cand = line_search_step(
                &w[k],
                &prev,
                &quads[k],
                lambda[k],
                params.delta[k],
                weights,
                lc,
                params.line_search_points,
            )?;
            let s = quads[k].snr(cand.as_slice());
            if s < gamma[k] {
                lambda[k] /= params.alpha;
            } else {
                w[k] = cand;
                snr[k] = s;
                lambda[k] *= params.alpha;
                accepted[k] = true;
            }
        }
        let cost = weighted_cost(&w, weights);
        if cost < best_cost {
            best_cost = cost;
            best = (w.clone(), snr.clone());
        }
        lambda_trace.push(lambda.clone());
        history.push(IterationRecord {
            iteration: i,
            cost,
            lambdas: lambda.clone(),
            snrs: snr.clone(),
            accepted,
        });
    }

    let (phases, achieved_snr) = best;
    Ok(PhasePlan {
        feasible: achieved_snr.iter().zip(gamma).all(|(s, g)| s >= g),
        cost: weighted_cost(&phases, weights),
        phases,
        beamformer: init.beamformer.clone(),
        achieved_snr,
        iterations_run: params.i_max,
        lambda_trace,
        history,
    })
}
