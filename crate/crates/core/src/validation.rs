//! Built-in oracle suites run by `lcris validate`.

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{build_scenario_channels, LinkParams, LOS_LIMIT_K};
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::lc_dynamics::{plan_switch, transition_phase, LcParams, PhaseVector};
use crate::optimizer::{
    anomalous_reflection_plan, lagrangian_gradient, user_lagrangian, TransitionWeights,
};
use crate::precoder::{los_beamformer, snr_direct, snr_quadratic_form, Beamformer, SnrQuadratic};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    /// Worst error seen, in the suite's own measure.
    pub worst: f64,
    pub tolerance: f64,
    pub cases: usize,
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<24} cases={:<5} worst={:.3e} tol={:.1e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.tolerance
        )
    }
}

fn report(name: &'static str, worst: f64, tolerance: f64, cases: usize) -> SuiteReport {
    SuiteReport {
        name,
        passed: worst <= tolerance,
        worst,
        tolerance,
        cases,
    }
}

/// Rank-one SNR model against the direct SNR on random pure-LOS, blocked
/// scenarios.
pub fn quadratic_equivalence(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut cfg = ScenarioConfig::default();
        cfg.ris_array.n_y = rng.random_range(1..=8);
        cfg.ris_array.n_z = rng.random_range(1..=4);
        cfg.bs_array.n_y = rng.random_range(1..=4);
        cfg.bs_array.n_z = rng.random_range(1..=4);
        cfg.links.bs_ris = LinkParams::new(LOS_LIMIT_K, 2.0);
        cfg.user_range_m = rng.random_range(2.0..40.0);
        let ch = build_scenario_channels(&cfg, seed ^ (i as u64).wrapping_mul(0x9e37_79b9))?;
        let q = los_beamformer(&cfg.bs_array, ch.bs_aod, cfg.tx_power())?;
        let noise = cfg.noise_power();
        for k in 0..ch.n_users() {
            let quad = snr_quadratic_form(&ch, k, &q, noise)?;
            let phases = PhaseVector::new(
                (0..ch.n_elements())
                    .map(|_| rng.random::<f64>() * 2.0 * PI)
                    .collect(),
            );
            let direct = snr_direct(&ch, k, &phases, &q, noise)?;
            let rel = (quad.snr(phases.as_slice()) - direct).abs() / direct;
            worst = worst.max(rel);
        }
    }
    Ok(report("quadratic-form", worst, 1e-10, instances))
}

/// Release times against bisection on the forced dynamics.
pub fn tuning_time_bisection(seed: u64, transitions: usize) -> Result<SuiteReport> {
    let lc = LcParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (lc.phase_floor(), lc.phase_ceiling());
    let mut worst = 0.0f64;
    for _ in 0..transitions {
        let w0 = rng.random_range(lo..hi);
        let mut wd = rng.random_range(lo..hi);
        if (wd - w0).abs() < 1e-3 {
            wd = if w0 > 1.0 { w0 - 0.5 } else { w0 + 0.5 };
        }
        let sched = plan_switch(
            &lc,
            &PhaseVector::new(vec![w0]),
            &PhaseVector::new(vec![wd]),
        )?;
        let e = &sched.elements[0];
        let rising = wd > w0;
        let target = e.forcing_target;
        let crossed = |t: f64| -> Result<bool> {
            let w = transition_phase(&lc, t, w0, target)?;
            Ok(if rising { w >= wd } else { w <= wd })
        };
        let (mut a, mut b) = (0.0, lc.tau_minus);
        while !crossed(b)? {
            b *= 2.0;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if crossed(m)? {
                b = m;
            } else {
                a = m;
            }
            if b - a <= 1e-15 * b {
                break;
            }
        }
        let oracle = 0.5 * (a + b);
        worst = worst.max((e.release_time - oracle).abs() / oracle);
    }
    Ok(report("tuning-time", worst, 1e-9, transitions))
}

/// Analytic Lagrangian gradient against central differences.
pub fn gradient_check(seed: u64, points: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = TransitionWeights::from_lc(&LcParams::default())?;
    let mut worst = 0.0f64;
    for _ in 0..points {
        let n = rng.random_range(1..=16);
        let quad = SnrQuadratic {
            m_vec: (0..n)
                .map(|_| {
                    Complex64::from_polar(rng.random_range(0.1..2.0), rng.random_range(-PI..PI))
                })
                .collect(),
            scale: rng.random_range(0.5..5.0),
            offset: Complex64::new(0.0, 0.0),
        };
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..6.0)).collect();
        // keep every element away from the kink at x = prev
        let prev: Vec<f64> = x
            .iter()
            .map(|v| {
                v + if rng.random::<bool>() { 1.0 } else { -1.0 } * rng.random_range(0.05..1.5)
            })
            .collect();
        let lambda = rng.random_range(0.0..3.0);
        let g = lagrangian_gradient(&x, &prev, lambda, &quad, &weights);
        let h = 1e-6;
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (user_lagrangian(&xp, &prev, lambda, &quad, 1.0, &weights)
                - user_lagrangian(&xm, &prev, lambda, &quad, 1.0, &weights))
                / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1.0));
        }
    }
    Ok(report("gradient", worst, 1e-6, points))
}

/// Exhaustive 64-level search never beats the co-phasing benchmark.
/// `worst` is the largest relative excess of the search over the benchmark.
pub fn benchmark_exhaustive(seed: u64, instances: usize) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lc = LcParams::default();
    let weights = TransitionWeights::from_lc(&lc)?;
    let q = Beamformer::new(Array1::from(vec![Complex64::new(1.0, 0.0)]), 1.0)?;
    let levels: Vec<f64> = (0..64).map(|l| l as f64 * 2.0 * PI / 64.0).collect();
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(1..=3);
        let quad = SnrQuadratic {
            m_vec: (0..n)
                .map(|_| {
                    Complex64::from_polar(rng.random_range(0.1..2.0), rng.random_range(-PI..PI))
                })
                .collect(),
            scale: 1.0,
            offset: Complex64::new(0.0, 0.0),
        };
        let bench =
            anomalous_reflection_plan(std::slice::from_ref(&quad), &q, &lc, &weights, &[0.0]);
        let b = bench.achieved_snr[0];
        let mut idx = vec![0usize; n];
        let mut phases = vec![0.0; n];
        loop {
            for (p, &i) in phases.iter_mut().zip(&idx) {
                *p = levels[i];
            }
            worst = worst.max((quad.snr(&phases) - b) / b);
            let mut d = 0;
            while d < n {
                idx[d] += 1;
                if idx[d] < levels.len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
    }
    Ok(report("benchmark-exhaustive", worst, 1e-12, instances))
}

/// Every suite with its default size.
pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        quadratic_equivalence(seed, 200)?,
        tuning_time_bisection(seed, 1000)?,
        gradient_check(seed, 100)?,
        benchmark_exhaustive(seed, 30)?,
    ])
}
