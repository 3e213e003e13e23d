//! Scenario configuration file.
//!
//! The file is TOML. Every key is optional; an empty file yields the
//! reference coverage-extension scenario (28 GHz, 20 MHz, 4×4 BS at
//! [30, 0, 10] m, RIS at [0, 50, 5] m, two users at (−10°, ±33°), 10 dB
//! SNR target). Unknown keys are rejected. Array tables may override any
//! subset of their fields; link tables need `k_factor` and
//! `pathloss_exponent`.
//!
//! The RIS-to-user range (`user_range_m`, 20 m) and the LC voltage-curve
//! breakpoints are assumptions, not measured values.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::LinkParams;
use crate::error::{Error, Result};
use crate::geometry::{AngleTuple, ArraySpec, Vec3};
use crate::lc_dynamics::{default_voltage_curve, CurvePoint, LcParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Hz.
    pub carrier_freq: f64,
    /// Hz.
    pub bandwidth: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub tx_power_dbm: f64,
    #[serde(deserialize_with = "bs_array_overrides")]
    pub bs_array: ArraySpec,
    #[serde(deserialize_with = "ris_array_overrides")]
    pub ris_array: ArraySpec,
    pub user_directions: Vec<UserDirection>,
    pub user_range_m: f64,
    pub snr_threshold_db: f64,
    /// Amplitude factor on the direct BS → user links; 0 means blocked.
    pub blockage: f64,
    pub seeds: Vec<u64>,
    pub links: LinkSet,
    pub lc: LcConfig,
    pub optimizer: OptimizerConfig,
    pub sim: SimConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            carrier_freq: 28e9,
            bandwidth: 20e6,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 6.0,
            tx_power_dbm: 47.0,
            bs_array: default_bs_array(),
            ris_array: default_ris_array(),
            user_directions: vec![
                UserDirection {
                    elevation_deg: -10.0,
                    azimuth_deg: 33.0,
                },
                UserDirection {
                    elevation_deg: -10.0,
                    azimuth_deg: -33.0,
                },
            ],
            user_range_m: 20.0,
            snr_threshold_db: 10.0,
            blockage: 0.0,
            seeds: (1..=10).collect(),
            links: LinkSet::default(),
            lc: LcConfig::default(),
            optimizer: OptimizerConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

pub fn default_bs_array() -> ArraySpec {
    // boresight horizontal, towards the RIS
    ArraySpec::new(4, 4, [30.0, 0.0, 10.0], [-30.0, 50.0, 0.0])
}

pub fn default_ris_array() -> ArraySpec {
    ArraySpec::new(16, 16, [0.0, 50.0, 5.0], [1.0, 0.0, 0.0])
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayOverrides {
    n_y: Option<usize>,
    n_z: Option<usize>,
    spacing: Option<f64>,
    position: Option<Vec3>,
    orientation: Option<Vec3>,
}

impl ArrayOverrides {
    fn apply(self, mut base: ArraySpec) -> ArraySpec {
        base.n_y = self.n_y.unwrap_or(base.n_y);
        base.n_z = self.n_z.unwrap_or(base.n_z);
        base.spacing = self.spacing.unwrap_or(base.spacing);
        base.position = self.position.unwrap_or(base.position);
        base.orientation = self.orientation.unwrap_or(base.orientation);
        base
    }
}

fn bs_array_overrides<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ArraySpec, D::Error> {
    Ok(ArrayOverrides::deserialize(d)?.apply(default_bs_array()))
}

fn ris_array_overrides<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<ArraySpec, D::Error> {
    Ok(ArrayOverrides::deserialize(d)?.apply(default_ris_array()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserDirection {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
}

impl UserDirection {
    pub fn angles(&self) -> AngleTuple {
        AngleTuple::from_degrees(self.elevation_deg, self.azimuth_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSet {
    pub bs_ue: LinkParams,
    pub bs_ris: LinkParams,
    pub ris_ue: LinkParams,
}

impl Default for LinkSet {
    fn default() -> Self {
        Self {
            bs_ue: LinkParams::new(0.0, 3.5),
            bs_ris: LinkParams::new(10.0, 2.0),
            ris_ue: LinkParams::new(10.0, 2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LcConfig {
    pub tau_plus_ms: f64,
    pub tau_minus_ms: f64,
    pub omega_max: f64,
    pub phase_clamp_eps: f64,
    /// Breakpoints of `f(v)`; defaults to a three-segment placeholder
    /// scaled to `omega_max`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub voltage_curve: Option<Vec<CurvePoint>>,
}

impl Default for LcConfig {
    fn default() -> Self {
        let p = LcParams::default();
        Self {
            tau_plus_ms: p.tau_plus * 1e3,
            tau_minus_ms: p.tau_minus * 1e3,
            omega_max: p.omega_max,
            phase_clamp_eps: p.phase_clamp_eps,
            voltage_curve: None,
        }
    }
}

impl LcConfig {
    pub fn params(&self) -> LcParams {
        LcParams {
            tau_plus: self.tau_plus_ms * 1e-3,
            tau_minus: self.tau_minus_ms * 1e-3,
            omega_max: self.omega_max,
            phase_clamp_eps: self.phase_clamp_eps,
            voltage_curve: self
                .voltage_curve
                .clone()
                .unwrap_or_else(|| default_voltage_curve(self.omega_max)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub alpha: f64,
    pub i_max: usize,
    /// Half-width of the per-iteration search interval, radians.
    pub delta: f64,
    /// Initial multiplier for every user; auto-scaled from the instance
    /// when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_init: Option<f64>,
    /// Factor applied to the instance scale when `lambda_init` is absent.
    pub lambda_scale: f64,
    pub line_search_points: usize,
    /// Extra SNR the optimizer keeps above `snr_threshold_db`, dB.
    pub snr_margin_db: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.985,
            i_max: 100,
            delta: PI / 8.0,
            lambda_init: None,
            lambda_scale: crate::optimizer::DEFAULT_LAMBDA_SCALE,
            line_search_points: 64,
            snr_margin_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Trace sampling step, ms.
    pub dt_ms: f64,
    /// Observation window after each switch, ms.
    pub horizon_ms: f64,
    /// TDMA slot length used by the trace experiment, ms.
    pub slot_ms: f64,
    /// Number of slots in the trace experiment.
    pub trace_slots: usize,
    /// `start:stop:step` in ms for the rate sweep.
    pub ts_grid_ms: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_ms: 0.1,
            horizon_ms: 300.0,
            slot_ms: 60.0,
            trace_slots: 6,
            ts_grid_ms: "5:1000:5".into(),
        }
    }
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ScenarioConfig {
    /// `W·N₀·N_f` in watts.
    pub fn noise_power(&self) -> f64 {
        db_to_linear(self.noise_psd_dbm_hz - 30.0)
            * self.bandwidth
            * db_to_linear(self.noise_figure_db)
    }

    /// Transmit power budget in watts.
    pub fn tx_power(&self) -> f64 {
        db_to_linear(self.tx_power_dbm - 30.0)
    }

    pub fn snr_threshold(&self) -> f64 {
        db_to_linear(self.snr_threshold_db)
    }

    pub fn n_users(&self) -> usize {
        self.user_directions.len()
    }

    pub fn lc_params(&self) -> LcParams {
        self.lc.params()
    }

    pub fn ts_grid(&self) -> Result<Vec<f64>> {
        parse_ts_grid(&self.sim.ts_grid_ms).map_err(|m| Error::config("sim.ts_grid_ms", m))
    }

    /// Checks every physical constraint, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        fn positive(path: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(
                    path,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        }
        fn finite(path: &str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(path, format!("must be finite, got {v}")))
            }
        }
        positive("carrier_freq", self.carrier_freq)?;
        positive("bandwidth", self.bandwidth)?;
        finite("noise_psd_dbm_hz", self.noise_psd_dbm_hz)?;
        finite("noise_figure_db", self.noise_figure_db)?;
        finite("tx_power_dbm", self.tx_power_dbm)?;
        finite("snr_threshold_db", self.snr_threshold_db)?;
        positive("user_range_m", self.user_range_m)?;
        for (name, arr) in [("bs_array", &self.bs_array), ("ris_array", &self.ris_array)] {
            arr.validate()
                .map_err(|e| Error::config(name, e.to_string()))?;
        }
        if self.user_directions.is_empty() {
            return Err(Error::config("user_directions", "need at least one user"));
        }
        for (k, u) in self.user_directions.iter().enumerate() {
            if !(-90.0..=90.0).contains(&u.elevation_deg) {
                return Err(Error::config(
                    format!("user_directions[{k}].elevation_deg"),
                    "must lie in [-90, 90]",
                ));
            }
            if !(u.azimuth_deg > -180.0 && u.azimuth_deg <= 180.0) {
                return Err(Error::config(
                    format!("user_directions[{k}].azimuth_deg"),
                    "must lie in (-180, 180]",
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.blockage) {
            return Err(Error::config("blockage", "must lie in [0, 1]"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        for (name, link) in [
            ("links.bs_ue", &self.links.bs_ue),
            ("links.bs_ris", &self.links.bs_ris),
            ("links.ris_ue", &self.links.ris_ue),
        ] {
            link.validate()
                .map_err(|e| Error::config(name, e.to_string()))?;
        }

        positive("lc.tau_plus_ms", self.lc.tau_plus_ms)?;
        positive("lc.tau_minus_ms", self.lc.tau_minus_ms)?;
        if self.lc.tau_minus_ms <= self.lc.tau_plus_ms {
            return Err(Error::config(
                "lc.tau_minus_ms",
                "must exceed lc.tau_plus_ms",
            ));
        }
        positive("lc.omega_max", self.lc.omega_max)?;
        self.lc_params()
            .validate()
            .map_err(|e| Error::config("lc", e.to_string()))?;

        let o = &self.optimizer;
        if !(o.alpha > 0.0 && o.alpha < 1.0) {
            return Err(Error::config(
                "optimizer.alpha",
                format!("must lie in (0, 1), got {}", o.alpha),
            ));
        }
        if o.i_max == 0 {
            return Err(Error::config("optimizer.i_max", "must be at least 1"));
        }
        if !(o.delta > 0.0 && o.delta < PI) {
            return Err(Error::config(
                "optimizer.delta",
                format!("must lie in (0, π), got {}", o.delta),
            ));
        }
        if let Some(l) = o.lambda_init {
            positive("optimizer.lambda_init", l)?;
        }
        positive("optimizer.lambda_scale", o.lambda_scale)?;
        if !(o.snr_margin_db >= 0.0 && o.snr_margin_db.is_finite()) {
            return Err(Error::config(
                "optimizer.snr_margin_db",
                "must be finite and non-negative",
            ));
        }
        if o.line_search_points < 2 {
            return Err(Error::config(
                "optimizer.line_search_points",
                "must be at least 2",
            ));
        }

        positive("sim.dt_ms", self.sim.dt_ms)?;
        if !(self.sim.horizon_ms >= self.sim.dt_ms && self.sim.horizon_ms.is_finite()) {
            return Err(Error::config(
                "sim.horizon_ms",
                "must be finite and at least sim.dt_ms",
            ));
        }
        if !(self.sim.slot_ms >= self.sim.dt_ms && self.sim.slot_ms.is_finite()) {
            return Err(Error::config(
                "sim.slot_ms",
                "must be finite and at least sim.dt_ms",
            ));
        }
        if self.sim.trace_slots == 0 {
            return Err(Error::config("sim.trace_slots", "must be at least 1"));
        }
        self.ts_grid()?;
        Ok(())
    }

    /// Canonical TOML rendering; `load` of this text gives back `self`.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::dump`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.dump().as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<root>", e.to_string()))?;
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::config(
            if path == "." { "<root>".into() } else { path },
            inner.message().to_string(),
        )
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Parses `start:stop:step` (all in ms) into an inclusive grid in seconds.
pub fn parse_ts_grid(spec: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected start:stop:step, got `{spec}`"));
    }
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(start > 0.0 && stop >= start && step > 0.0 && stop.is_finite()) {
        return Err(format!("need 0 < start <= stop and step > 0, got `{spec}`"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err("grid has more than 10^6 points".into());
    }
    Ok((0..count)
        .map(|i| (start + i as f64 * step) * 1e-3)
        .collect())
}
