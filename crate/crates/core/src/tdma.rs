//! TDMA reconfiguration timeline.
//!
//! Users are served in turn; at each switch the RIS moves from the previous
//! user's configuration to the next one under over/undershoot control, and
//! the incoming user's SNR is sampled (with its own beamformer) until the
//! surface settles. `T_c` is the first sample at which the SNR meets the
//! target.

use std::io::Write;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::lc_dynamics::{plan_switch, switched_phase_at, LcParams, PhaseVector};
use crate::optimizer::PhasePlan;
use crate::precoder::{snr_direct, Beamformer};

/// Sampled SNR of one reconfiguration.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchTrace {
    pub time_grid: Vec<f64>,
    pub phase_samples: Vec<PhaseVector>,
    pub snr_samples: Vec<f64>,
    pub target_user: usize,
    pub threshold: f64,
    /// First grid time with `SNR ≥ threshold`, if any.
    pub t_c: Option<f64>,
    pub max_release_time: f64,
}

impl SwitchTrace {
    pub fn final_phases(&self) -> &PhaseVector {
        self.phase_samples
            .last()
            .expect("trace has at least one sample")
    }

    pub fn final_snr(&self) -> f64 {
        *self
            .snr_samples
            .last()
            .expect("trace has at least one sample")
    }
}

/// Everything fixed during a switch except the two configurations.
#[derive(Debug, Clone, Copy)]
pub struct SwitchContext<'a> {
    pub lc: &'a LcParams,
    pub channels: &'a ChannelSet,
    pub noise_power: f64,
    pub dt: f64,
    pub horizon: f64,
}

fn time_grid(dt: f64, horizon: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(horizon >= dt && horizon.is_finite()) {
        return Err(Error::invalid(
            "horizon",
            format!("must be finite and at least dt, got {horizon}"),
        ));
    }
    let steps = (horizon / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|i| i as f64 * dt).collect())
}

/// Simulates the switch `from → to` while serving `user_k` with `q`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_switch(
    from: &PhaseVector,
    to: &PhaseVector,
    ctx: &SwitchContext<'_>,
    user_k: usize,
    q: &Beamformer,
    threshold: f64,
) -> Result<SwitchTrace> {
    let time_grid = time_grid(ctx.dt, ctx.horizon)?;
    let schedule = plan_switch(ctx.lc, from, to)?;
    let mut phase_samples = Vec::with_capacity(time_grid.len());
    let mut snr_samples = Vec::with_capacity(time_grid.len());
    let mut t_c = None;
    for &t in &time_grid {
        let phases = switched_phase_at(&schedule, ctx.lc, t)?;
        let snr = snr_direct(ctx.channels, user_k, &phases, q, ctx.noise_power)?;
        if t_c.is_none() && snr >= threshold {
            t_c = Some(t);
        }
        phase_samples.push(phases);
        snr_samples.push(snr);
    }
    Ok(SwitchTrace {
        time_grid,
        phase_samples,
        snr_samples,
        target_user: user_k,
        threshold,
        t_c,
        max_release_time: schedule.max_release_time(),
    })
}

/// `max(T_s − T_c, 0)/T_s · log₂(1 + SNR_thr)` in bits/s/Hz.
pub fn effective_rate(t_c: f64, t_s: f64, snr_thr: f64) -> Result<f64> {
    if !(t_s > 0.0) {
        return Err(Error::invalid(
            "t_s",
            format!("must be positive, got {t_s}"),
        ));
    }
    if !(t_c >= 0.0) {
        return Err(Error::invalid(
            "t_c",
            format!("must be non-negative, got {t_c}"),
        ));
    }
    Ok((t_s - t_c).max(0.0) / t_s * (1.0 + snr_thr).log2())
}

/// `T_c` of every switch in the serving cycle 1 → 2 → … → K → 1, each
/// starting from the settled configuration of the previous user. The
/// observation window is stretched to cover every release time, so `None`
/// means the settled configuration itself misses the target.
pub fn cycle_switch_times(
    plan: &PhasePlan,
    ctx: &SwitchContext<'_>,
    thresholds: &[f64],
) -> Result<Vec<Option<f64>>> {
    let k_users = plan.n_users();
    if thresholds.len() != k_users {
        return Err(Error::Shape(format!(
            "{} thresholds for {k_users} users",
            thresholds.len()
        )));
    }
    (0..k_users)
        .map(|k| {
            let from = &plan.phases[(k + k_users - 1) % k_users];
            let to = &plan.phases[k];
            let release = plan_switch(ctx.lc, from, to)?.max_release_time();
            let horizon = ctx.horizon.max(release + ctx.dt);
            let local = SwitchContext { horizon, ..*ctx };
            Ok(simulate_switch(from, to, &local, k, &plan.beamformer, thresholds[k])?.t_c)
        })
        .collect()
}

/// Effective-rate curves against the slot length `T_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSweepResult {
    /// Seconds.
    pub ts_values: Vec<f64>,
    pub rate_proposed: Vec<f64>,
    pub rate_benchmark: Vec<f64>,
    pub n_seeds: usize,
}

/// Switching times of both plans for one channel realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSwitchTimes {
    pub seed: u64,
    pub proposed: Vec<Option<f64>>,
    pub benchmark: Vec<Option<f64>>,
}

fn mean_rate(times: &[Option<f64>], t_s: f64, snr_thr: f64) -> Result<f64> {
    let mut acc = 0.0;
    for t in times {
        acc += match t {
            Some(t_c) => effective_rate(*t_c, t_s, snr_thr)?,
            None => 0.0,
        };
    }
    Ok(acc / times.len() as f64)
}

/// Averages the effective rate over users and seeds at every `T_s`.
pub fn rate_sweep(
    times: &[SeedSwitchTimes],
    ts_grid: &[f64],
    snr_thr: f64,
) -> Result<RateSweepResult> {
    if times.is_empty() {
        return Err(Error::invalid("times", "need at least one seed"));
    }
    let mut rate_proposed = Vec::with_capacity(ts_grid.len());
    let mut rate_benchmark = Vec::with_capacity(ts_grid.len());
    for &t_s in ts_grid {
        let (mut p, mut b) = (0.0, 0.0);
        for s in times {
            p += mean_rate(&s.proposed, t_s, snr_thr)?;
            b += mean_rate(&s.benchmark, t_s, snr_thr)?;
        }
        rate_proposed.push(p / times.len() as f64);
        rate_benchmark.push(b / times.len() as f64);
    }
    Ok(RateSweepResult {
        ts_values: ts_grid.to_vec(),
        rate_proposed,
        rate_benchmark,
        n_seeds: times.len(),
    })
}

impl RateSweepResult {
    /// Writes `ts_ms,rate_proposed,rate_benchmark,n_seeds`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "ts_ms,rate_proposed,rate_benchmark,n_seeds")?;
        for i in 0..self.ts_values.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.ts_values[i] * 1e3,
                self.rate_proposed[i],
                self.rate_benchmark[i],
                self.n_seeds
            )?;
        }
        Ok(())
    }
}
