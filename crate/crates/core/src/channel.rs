//! Seeded Rician channels for the BS → RIS → user cascade.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`) seeded through
//! `SeedableRng::seed_from_u64`, and Gaussian samples from `rand_distr`'s
//! `StandardNormal`. Both are portable, so a seed fixes a channel bit for
//! bit on every platform.

use std::io::Write;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::{
    angles_between, distance, position_from, steering_vector, AngleTuple, ArraySpec,
};

/// K-factors at or above this value are treated as a pure LOS link.
pub const LOS_LIMIT_K: f64 = 1e12;

/// Large-scale parameters of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub k_factor: f64,
    pub pathloss_exponent: f64,
    #[serde(default = "default_ref_gain_db")]
    pub ref_gain_db: f64,
    #[serde(default = "default_ref_distance")]
    pub ref_distance: f64,
}

fn default_ref_gain_db() -> f64 {
    -61.0
}

fn default_ref_distance() -> f64 {
    1.0
}

impl LinkParams {
    pub fn new(k_factor: f64, pathloss_exponent: f64) -> Self {
        Self {
            k_factor,
            pathloss_exponent,
            ref_gain_db: default_ref_gain_db(),
            ref_distance: default_ref_distance(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_factor >= 0.0) {
            return Err(Error::invalid("k_factor", "must be non-negative"));
        }
        if !(self.pathloss_exponent > 0.0 && self.pathloss_exponent.is_finite()) {
            return Err(Error::invalid("pathloss_exponent", "must be positive"));
        }
        if !self.ref_gain_db.is_finite() {
            return Err(Error::invalid("ref_gain_db", "must be finite"));
        }
        if !(self.ref_distance > 0.0 && self.ref_distance.is_finite()) {
            return Err(Error::invalid("ref_distance", "must be positive"));
        }
        Ok(())
    }

    pub fn is_pure_los(&self) -> bool {
        self.k_factor >= LOS_LIMIT_K
    }
}

/// Distance-based power gain `β·(d/d0)^-η`.
pub fn pathloss_gain(link: &LinkParams, distance: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::invalid(
            "distance",
            format!("must be positive, got {distance}"),
        ));
    }
    Ok(10f64.powf(link.ref_gain_db / 10.0)
        * (distance / link.ref_distance).powf(-link.pathloss_exponent))
}

/// Rician MIMO channel of shape `rx.len() × tx.len()`.
///
/// The LOS part is `c·a_rx·a_txᴴ` with `c² = pathloss_gain`, the scattered
/// part has i.i.d. `CN(0, pathloss_gain)` entries, and the two are mixed
/// with weights `√(K/(K+1))` and `√(1/(K+1))`.
pub fn rician_channel(
    rng_seed: u64,
    link: &LinkParams,
    tx: &ArraySpec,
    rx: &ArraySpec,
    aod: AngleTuple,
    aoa: AngleTuple,
    distance: f64,
) -> Result<Array2<Complex64>> {
    link.validate()?;
    tx.validate()?;
    rx.validate()?;
    let gain = pathloss_gain(link, distance)?;
    let c = gain.sqrt();
    let (w_los, w_nlos) = if link.is_pure_los() {
        (1.0, 0.0)
    } else {
        let k = link.k_factor;
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    };

    let a_tx = steering_vector(tx, aod);
    let a_rx = steering_vector(rx, aoa);
    let mut h = Array2::from_shape_fn((rx.len(), tx.len()), |(i, j)| {
        a_rx[i] * a_tx[j].conj() * (c * w_los)
    });

    if w_nlos > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let sigma = (gain / 2.0).sqrt() * w_nlos;
        for v in h.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *v += Complex64::new(re, im) * sigma;
        }
    }
    Ok(h)
}

/// All channels of one scenario realisation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS → user k, length `N_t` (`h_d,k`).
    pub h_direct: Vec<Array1<Complex64>>,
    /// BS → RIS, `N × N_t` (`H_t`).
    pub h_bs_ris: Array2<Complex64>,
    /// RIS → user k, length `N` (`h_r,k`).
    pub h_ris_user: Vec<Array1<Complex64>>,
    pub bs_aod: AngleTuple,
    pub ris_aoa: AngleTuple,
    pub ris_aod: Vec<AngleTuple>,
    pub bs_array: ArraySpec,
    pub ris_array: ArraySpec,
    /// LOS amplitude `c` of the BS → RIS link.
    pub bs_ris_amplitude: f64,
    pub bs_ris_pure_los: bool,
    /// Blockage factor applied to the direct links.
    pub blockage: f64,
}

impl ChannelSet {
    pub fn n_users(&self) -> usize {
        self.h_ris_user.len()
    }

    pub fn n_elements(&self) -> usize {
        self.h_bs_ris.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h_bs_ris.ncols()
    }

    pub fn direct_blocked(&self) -> bool {
        self.h_direct
            .iter()
            .all(|h| h.iter().all(|x| *x == Complex64::new(0.0, 0.0)))
    }

    /// Writes every channel coefficient as `link,user,row,col,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "link,user,row,col,re,im")?;
        for ((r, c), v) in self.h_bs_ris.indexed_iter() {
            writeln!(out, "bs_ris,,{r},{c},{:e},{:e}", v.re, v.im)?;
        }
        for (k, h) in self.h_ris_user.iter().enumerate() {
            for (r, v) in h.iter().enumerate() {
                writeln!(out, "ris_user,{k},{r},0,{:e},{:e}", v.re, v.im)?;
            }
        }
        for (k, h) in self.h_direct.iter().enumerate() {
            for (r, v) in h.iter().enumerate() {
                writeln!(out, "direct,{k},{r},0,{:e},{:e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Synthesises the channel set of `config` for one seed.
///
/// Sub-seeds are drawn from a master ChaCha8 stream in a fixed order:
/// BS → RIS first, then for each user RIS → user followed by BS → user.
pub fn build_scenario_channels(config: &ScenarioConfig, rng_seed: u64) -> Result<ChannelSet> {
    let bs = &config.bs_array;
    let ris = &config.ris_array;
    bs.validate()?;
    ris.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(rng_seed);

    let bs_aod = angles_between(bs.position, ris.position, bs.orientation)?;
    let ris_aoa = angles_between(ris.position, bs.position, ris.orientation)?;
    let d_bs_ris = distance(bs.position, ris.position);
    let links = &config.links;
    let h_bs_ris = rician_channel(
        master.next_u64(),
        &links.bs_ris,
        bs,
        ris,
        bs_aod,
        ris_aoa,
        d_bs_ris,
    )?;

    let mut h_ris_user = Vec::with_capacity(config.user_directions.len());
    let mut h_direct = Vec::with_capacity(config.user_directions.len());
    let mut ris_aod = Vec::with_capacity(config.user_directions.len());
    for (k, dir) in config.user_directions.iter().enumerate() {
        let ris_seed = master.next_u64();
        let direct_seed = master.next_u64();
        let pos = position_from(ris, dir.angles(), config.user_range_m)?;
        let user = ArraySpec::single(pos);
        let d_ru = distance(ris.position, pos);
        let d_bu = distance(bs.position, pos);
        if d_ru < 1e-9 || d_bu < 1e-9 {
            return Err(Error::DegenerateGeometry(format!(
                "user {k} coincides with the RIS or the BS"
            )));
        }
        let aod_k = angles_between(ris.position, pos, ris.orientation)?;
        // 1 × N row is h_r,kᴴ
        let row = rician_channel(
            ris_seed,
            &links.ris_ue,
            ris,
            &user,
            aod_k,
            AngleTuple::default(),
            d_ru,
        )?;
        h_ris_user.push(row.row(0).mapv(|x| x.conj()));
        ris_aod.push(aod_k);

        if config.blockage == 0.0 {
            h_direct.push(Array1::zeros(bs.len()));
        } else {
            let aod_d = angles_between(bs.position, pos, bs.orientation)?;
            let row = rician_channel(
                direct_seed,
                &links.bs_ue,
                bs,
                &user,
                aod_d,
                AngleTuple::default(),
                d_bu,
            )?;
            h_direct.push(row.row(0).mapv(|x| x.conj() * config.blockage));
        }
    }

    Ok(ChannelSet {
        h_direct,
        h_bs_ris,
        h_ris_user,
        bs_aod,
        ris_aoa,
        ris_aod,
        bs_array: bs.clone(),
        ris_array: ris.clone(),
        bs_ris_amplitude: pathloss_gain(&links.bs_ris, d_bs_ris)?.sqrt(),
        bs_ris_pure_los: links.bs_ris.is_pure_los(),
        blockage: config.blockage,
    })
}
