//! Seeded experiment drivers behind the CLI subcommands.
//!
//! Every seed is an independent channel realisation. Seeds run on the rayon
//! pool and results are gathered in seed-list order, so output files do not
//! depend on the thread count.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::channel::{build_scenario_channels, ChannelSet};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::lc_dynamics::LcParams;
use crate::optimizer::{
    anomalous_reflection_plan, auto_lambda, run_algorithm1, OptimizerParams, PhasePlan,
    TransitionWeights,
};
use crate::precoder::{
    cascade_quadratic_form, los_beamformer, snr_direct, Beamformer, SnrQuadratic,
};
use crate::tdma::{
    cycle_switch_times, rate_sweep, simulate_switch, RateSweepResult, SeedSwitchTimes,
    SwitchContext,
};

/// One designed channel realisation.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub channels: ChannelSet,
    pub beamformer: Beamformer,
    pub quads: Vec<SnrQuadratic>,
    /// Linear SNR targets.
    pub thresholds: Vec<f64>,
    pub weights: TransitionWeights,
    pub lc: LcParams,
    pub benchmark: PhasePlan,
    pub proposed: PhasePlan,
}

impl Instance {
    pub fn switch_context<'a>(&'a self, cfg: &ScenarioConfig) -> SwitchContext<'a> {
        SwitchContext {
            lc: &self.lc,
            channels: &self.channels,
            noise_power: cfg.noise_power(),
            dt: cfg.sim.dt_ms * 1e-3,
            horizon: cfg.sim.horizon_ms * 1e-3,
        }
    }
}

/// Design result of one seed.
#[derive(Debug, Clone)]
pub enum SeedOutcome {
    Designed(Box<Instance>),
    Infeasible { seed: u64, max_snr: Vec<f64> },
}

impl SeedOutcome {
    pub fn seed(&self) -> u64 {
        match self {
            SeedOutcome::Designed(i) => i.seed,
            SeedOutcome::Infeasible { seed, .. } => *seed,
        }
    }

    pub fn instance(&self) -> Option<&Instance> {
        match self {
            SeedOutcome::Designed(i) => Some(i),
            SeedOutcome::Infeasible { .. } => None,
        }
    }
}

/// Replaces `achieved_snr` and `feasible` with values from the direct
/// channel path.
fn reverify(
    plan: &mut PhasePlan,
    channels: &ChannelSet,
    noise_power: f64,
    thresholds: &[f64],
) -> Result<()> {
    plan.achieved_snr = plan
        .phases
        .iter()
        .enumerate()
        .map(|(k, p)| snr_direct(channels, k, p, &plan.beamformer, noise_power))
        .collect::<Result<_>>()?;
    plan.feasible = plan
        .achieved_snr
        .iter()
        .zip(thresholds)
        .all(|(s, g)| s >= g);
    Ok(())
}

pub fn optimizer_params(cfg: &ScenarioConfig, quads: &[SnrQuadratic]) -> OptimizerParams {
    let o = &cfg.optimizer;
    let k = quads.len();
    let design_target = cfg.snr_threshold() * 10f64.powf(o.snr_margin_db / 10.0);
    OptimizerParams {
        alpha: o.alpha,
        i_max: o.i_max,
        delta: vec![o.delta; k],
        lambda_init: quads
            .iter()
            .map(|q| {
                o.lambda_init
                    .unwrap_or_else(|| auto_lambda(q, o.delta, o.lambda_scale))
            })
            .collect(),
        line_search_points: o.line_search_points,
        snr_thresholds: vec![design_target; k],
    }
}

/// Builds the channels of `seed`, the co-phasing benchmark and the
/// transition-aware plan. Both plans use the LOS beamformer.
pub fn design_instance(cfg: &ScenarioConfig, seed: u64) -> Result<Instance> {
    let channels = build_scenario_channels(cfg, seed)?;
    let noise = cfg.noise_power();
    let beamformer = los_beamformer(&cfg.bs_array, channels.bs_aod, cfg.tx_power())?;
    let quads = (0..channels.n_users())
        .map(|k| cascade_quadratic_form(&channels, k, &beamformer, noise))
        .collect::<Result<Vec<_>>>()?;
    let lc = cfg.lc_params();
    let weights = TransitionWeights::from_lc(&lc)?;
    let thresholds = vec![cfg.snr_threshold(); quads.len()];
    let params = optimizer_params(cfg, &quads);

    let mut benchmark = anomalous_reflection_plan(&quads, &beamformer, &lc, &weights, &thresholds);
    reverify(&mut benchmark, &channels, noise, &thresholds)?;
    if !benchmark.feasible {
        return Err(Error::Infeasible {
            max_snr: benchmark.achieved_snr.clone(),
        });
    }
    let mut proposed = match run_algorithm1(&quads, &lc, &weights, &params, &benchmark) {
        Ok(p) => p,
        // the design margin cannot be met; fall back to the bare target
        Err(Error::Infeasible { .. }) => {
            let bare = OptimizerParams {
                snr_thresholds: thresholds.clone(),
                ..params
            };
            run_algorithm1(&quads, &lc, &weights, &bare, &benchmark)?
        }
        Err(e) => return Err(e),
    };
    reverify(&mut proposed, &channels, noise, &thresholds)?;
    Ok(Instance {
        seed,
        channels,
        beamformer,
        quads,
        thresholds,
        weights,
        lc,
        benchmark,
        proposed,
    })
}

/// Runs [`design_instance`] for every seed; infeasible seeds are reported,
/// other errors abort.
pub fn design_all(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<Vec<SeedOutcome>> {
    seeds
        .par_iter()
        .map(|&seed| match design_instance(cfg, seed) {
            Ok(i) => Ok(SeedOutcome::Designed(Box::new(i))),
            Err(Error::Infeasible { max_snr }) => Ok(SeedOutcome::Infeasible { seed, max_snr }),
            Err(e) => Err(e),
        })
        .collect()
}

/// Comment line placed at the top of every output file.
pub fn output_header(cfg: &ScenarioConfig, seeds: &[u64]) -> String {
    let list: Vec<String> = seeds.iter().map(u64::to_string).collect();
    format!(
        "# lcris config_hash={} seeds={}\n",
        cfg.hash(),
        list.join(",")
    )
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// `seed,user,element,phase` for one plan of every designed seed.
pub fn write_plans<W: Write>(
    mut out: W,
    outcomes: &[SeedOutcome],
    pick: impl Fn(&Instance) -> &PhasePlan,
) -> std::io::Result<()> {
    writeln!(out, "seed,user,element,phase")?;
    for inst in outcomes.iter().filter_map(SeedOutcome::instance) {
        for (k, p) in pick(inst).phases.iter().enumerate() {
            for (n, w) in p.iter().enumerate() {
                writeln!(out, "{},{k},{n},{w}", inst.seed)?;
            }
        }
    }
    Ok(())
}

pub fn design_summary(cfg: &ScenarioConfig, outcomes: &[SeedOutcome]) -> String {
    let mut s = String::new();
    let n = cfg.ris_array.len();
    let _ = writeln!(
        s,
        "RIS {}x{} ({n} cells), {} users, target {} dB, alpha {}, i_max {}, delta {}",
        cfg.ris_array.n_y,
        cfg.ris_array.n_z,
        cfg.n_users(),
        cfg.snr_threshold_db,
        cfg.optimizer.alpha,
        cfg.optimizer.i_max,
        cfg.optimizer.delta
    );
    let mut lower = 0;
    let mut designed = 0;
    for o in outcomes {
        match o {
            SeedOutcome::Infeasible { seed, max_snr } => {
                let best: Vec<String> = max_snr.iter().map(|x| format!("{:.2}", db(*x))).collect();
                let _ = writeln!(
                    s,
                    "seed {seed}: infeasible, best SNR [{}] dB",
                    best.join(", ")
                );
            }
            SeedOutcome::Designed(i) => {
                designed += 1;
                if i.proposed.cost < i.benchmark.cost {
                    lower += 1;
                }
                let fmt = |p: &PhasePlan| {
                    p.achieved_snr
                        .iter()
                        .map(|x| format!("{:.2}", db(*x)))
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                let _ = writeln!(
                    s,
                    "seed {}: cost proposed {:.6} benchmark {:.6}; SNR dB proposed [{}] benchmark [{}]; feasible {}/{}; iterations {}",
                    i.seed,
                    i.proposed.cost,
                    i.benchmark.cost,
                    fmt(&i.proposed),
                    fmt(&i.benchmark),
                    i.proposed.feasible,
                    i.benchmark.feasible,
                    i.proposed.iterations_run
                );
            }
        }
    }
    let _ = writeln!(
        s,
        "designed {designed}/{} seeds; proposed cost strictly lower on {lower}",
        outcomes.len()
    );
    s
}

/// One switch of the trace experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTrace {
    pub seed: u64,
    pub plan: &'static str,
    pub slot: usize,
    pub user: usize,
    /// Seconds since the start of the experiment.
    pub t: Vec<f64>,
    pub snr: Vec<f64>,
    pub t_c: Option<f64>,
}

/// Serves the users in turn for `sim.trace_slots` slots of `sim.slot_ms`,
/// starting from the last user's settled configuration. Each switch starts
/// from wherever the previous slot left the surface.
pub fn trace_instance(cfg: &ScenarioConfig, inst: &Instance) -> Result<Vec<SlotTrace>> {
    let slot = cfg.sim.slot_ms * 1e-3;
    let ctx = SwitchContext {
        horizon: slot,
        ..inst.switch_context(cfg)
    };
    let k_users = inst.thresholds.len();
    let mut out = Vec::new();
    for (name, plan) in [("proposed", &inst.proposed), ("benchmark", &inst.benchmark)] {
        let mut state = plan.phases[k_users - 1].clone();
        for j in 0..cfg.sim.trace_slots {
            let user = j % k_users;
            let tr = simulate_switch(
                &state,
                &plan.phases[user],
                &ctx,
                user,
                &plan.beamformer,
                inst.thresholds[user],
            )?;
            let keep = tr.time_grid.len() - 1;
            out.push(SlotTrace {
                seed: inst.seed,
                plan: name,
                slot: j,
                user,
                t: tr.time_grid[..keep]
                    .iter()
                    .map(|t| j as f64 * slot + t)
                    .collect(),
                snr: tr.snr_samples[..keep].to_vec(),
                t_c: tr.t_c.filter(|&t| t < slot),
            });
            state = tr.final_phases().clone();
        }
    }
    Ok(out)
}

/// `seed,plan,slot,t,snr_db,user`, with `t` in seconds.
pub fn write_traces<W: Write>(mut out: W, traces: &[SlotTrace]) -> std::io::Result<()> {
    writeln!(out, "seed,plan,slot,t,snr_db,user")?;
    for tr in traces {
        for (t, s) in tr.t.iter().zip(&tr.snr) {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                tr.seed,
                tr.plan,
                tr.slot,
                t,
                db(*s),
                tr.user
            )?;
        }
    }
    Ok(())
}

pub fn trace_summary(traces: &[SlotTrace]) -> String {
    let mut s = String::from("seed plan slot user t_c_ms\n");
    for tr in traces {
        let tc = tr
            .t_c
            .map_or("none".to_string(), |t| format!("{:.1}", t * 1e3));
        let _ = writeln!(s, "{} {} {} {} {tc}", tr.seed, tr.plan, tr.slot, tr.user);
    }
    s
}

/// Switching times of both plans over one full serving cycle.
pub fn switch_times(cfg: &ScenarioConfig, inst: &Instance) -> Result<SeedSwitchTimes> {
    let ctx = inst.switch_context(cfg);
    Ok(SeedSwitchTimes {
        seed: inst.seed,
        proposed: cycle_switch_times(&inst.proposed, &ctx, &inst.thresholds)?,
        benchmark: cycle_switch_times(&inst.benchmark, &ctx, &inst.thresholds)?,
    })
}

pub fn all_switch_times(
    cfg: &ScenarioConfig,
    outcomes: &[SeedOutcome],
) -> Result<Vec<SeedSwitchTimes>> {
    let designed: Vec<&Instance> = outcomes.iter().filter_map(SeedOutcome::instance).collect();
    designed.par_iter().map(|i| switch_times(cfg, i)).collect()
}

/// Mean of the switching times, `None` if any switch never reaches the
/// target.
pub fn mean_switch_time(times: &[Option<f64>]) -> Option<f64> {
    let sum: Option<f64> = times.iter().copied().sum();
    sum.map(|s| s / times.len() as f64)
}

pub fn sweep(
    cfg: &ScenarioConfig,
    outcomes: &[SeedOutcome],
    ts_grid: &[f64],
) -> Result<(RateSweepResult, Vec<SeedSwitchTimes>)> {
    let times = all_switch_times(cfg, outcomes)?;
    let result = rate_sweep(&times, ts_grid, cfg.snr_threshold())?;
    Ok((result, times))
}

/// Checks reported for a rate sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepChecks {
    pub monotone: bool,
    pub proposed_dominates: bool,
    /// Largest relative gap to `log₂(1 + SNR_thr)` for `T_s ≥ 500 ms`.
    pub asymptote_gap: Option<f64>,
}

pub fn sweep_checks(result: &RateSweepResult, snr_thr: f64) -> SweepChecks {
    let top = (1.0 + snr_thr).log2();
    let mono = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let gap = result
        .ts_values
        .iter()
        .enumerate()
        .filter(|(_, t)| **t >= 0.5 - 1e-12)
        .map(|(i, _)| {
            let p = (top - result.rate_proposed[i]) / top;
            let b = (top - result.rate_benchmark[i]) / top;
            p.max(b)
        })
        .fold(None, |acc: Option<f64>, g| {
            Some(acc.map_or(g, |a| a.max(g)))
        });
    SweepChecks {
        monotone: mono(&result.rate_proposed) && mono(&result.rate_benchmark),
        proposed_dominates: result
            .rate_proposed
            .iter()
            .zip(&result.rate_benchmark)
            .all(|(p, b)| *p >= *b - 1e-12),
        asymptote_gap: gap,
    }
}

pub fn sweep_summary(
    cfg: &ScenarioConfig,
    result: &RateSweepResult,
    times: &[SeedSwitchTimes],
) -> String {
    let mut s = String::new();
    let top = (1.0 + cfg.snr_threshold()).log2();
    let c = sweep_checks(result, cfg.snr_threshold());
    let _ = writeln!(
        s,
        "seeds {}; rate ceiling log2(1+SNR_thr) = {top:.6}",
        result.n_seeds
    );
    for t in times {
        let f = |v: &[Option<f64>]| {
            v.iter()
                .map(|x| x.map_or("none".into(), |t| format!("{:.1}", t * 1e3)))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(
            s,
            "seed {}: t_c ms proposed [{}] benchmark [{}]",
            t.seed,
            f(&t.proposed),
            f(&t.benchmark)
        );
    }
    let _ = writeln!(s, "curves nondecreasing: {}", c.monotone);
    let _ = writeln!(
        s,
        "proposed >= benchmark everywhere: {}",
        c.proposed_dominates
    );
    match c.asymptote_gap {
        Some(g) => {
            let verdict = if g <= 0.01 { "within" } else { "outside" };
            let _ = writeln!(
                s,
                "asymptote (T_s >= 500 ms): max relative gap {g:.4}, {verdict} 1%"
            );
        }
        None => {
            let _ = writeln!(s, "asymptote (T_s >= 500 ms): no grid point in range");
        }
    }
    s
}
