//! Beamformers and end-to-end SNR.
//!
//! With the beamformer fixed and the direct link blocked, the SNR of user k
//! is a rank-one quadratic form in `s = e^{jω}`:
//!
//! ```text
//! SNR(ω) = κ·|d + mᵀ s|²
//! ```
//!
//! where `d` is the (normally zero) direct-path term. In the pure-LOS
//! BS → RIS regime `m = diag(h_rᴴ)·a_RIS` and `κ = c²·|a_BSᴴ q|²/σ²`, which
//! for `q = q_LOS` is `c²·P_t·‖a_BS‖²/σ²`.

use ndarray::Array1;
use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::geometry::{steering_vector, AngleTuple, ArraySpec};
use crate::lc_dynamics::PhaseVector;

/// Transmit beamformer together with the power budget it must respect.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub weights: Array1<Complex64>,
    pub power_budget: f64,
}

impl Beamformer {
    pub fn new(weights: Array1<Complex64>, power_budget: f64) -> Result<Self> {
        if !(power_budget > 0.0 && power_budget.is_finite()) {
            return Err(Error::invalid("power_budget", "must be positive"));
        }
        let p = weights.iter().map(|w| w.norm_sqr()).sum::<f64>();
        if p > power_budget * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::invalid(
                "weights",
                format!("power {p} exceeds budget {power_budget}"),
            ));
        }
        Ok(Self {
            weights,
            power_budget,
        })
    }

    pub fn power(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum()
    }
}

fn norm(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum-ratio transmission towards `h_eff`.
pub fn matched_filter(h_eff: &Array1<Complex64>, p_t: f64) -> Result<Beamformer> {
    let n = norm(h_eff);
    if !(n > 0.0) {
        return Err(Error::DegenerateChannel("effective channel is zero".into()));
    }
    let s = p_t.sqrt() / n;
    Beamformer::new(h_eff.mapv(|x| x * s), p_t)
}

/// Beamformer matched to the LOS BS → RIS direction only; it does not depend
/// on the RIS phases.
pub fn los_beamformer(bs_array: &ArraySpec, bs_aod: AngleTuple, p_t: f64) -> Result<Beamformer> {
    let a = steering_vector(bs_array, bs_aod);
    let s = p_t.sqrt() / norm(&a);
    Beamformer::new(a.mapv(|x| x * s), p_t)
}

fn check_user(channels: &ChannelSet, user_k: usize) -> Result<()> {
    if user_k >= channels.n_users() {
        return Err(Error::Shape(format!(
            "user {user_k} out of range ({} users)",
            channels.n_users()
        )));
    }
    Ok(())
}

fn check_dims(channels: &ChannelSet, phases: Option<&PhaseVector>, q: &Beamformer) -> Result<()> {
    if q.weights.len() != channels.n_tx() {
        return Err(Error::Shape(format!(
            "beamformer has {} weights, BS has {} antennas",
            q.weights.len(),
            channels.n_tx()
        )));
    }
    if let Some(p) = phases {
        if p.len() != channels.n_elements() {
            return Err(Error::Shape(format!(
                "phase vector has {} entries, RIS has {} elements",
                p.len(),
                channels.n_elements()
            )));
        }
    }
    Ok(())
}

/// End-to-end channel `h_eff` with `h_effᴴ = h_dᴴ + h_rᴴ·diag(e^{jω})·H_t`.
pub fn effective_channel(
    channels: &ChannelSet,
    user_k: usize,
    phases: &PhaseVector,
) -> Result<Array1<Complex64>> {
    check_user(channels, user_k)?;
    if phases.len() != channels.n_elements() {
        return Err(Error::Shape(
            "phase vector length differs from RIS size".into(),
        ));
    }
    let h_r = &channels.h_ris_user[user_k];
    // row vector h_rᴴ diag(s) H_t, conjugated at the end
    let mut row = channels.h_direct[user_k].mapv(|x| x.conj());
    for (n, &w) in phases.iter().enumerate() {
        let g = h_r[n].conj() * Complex64::cis(w);
        for (acc, &h) in row.iter_mut().zip(channels.h_bs_ris.row(n).iter()) {
            *acc += g * h;
        }
    }
    Ok(row.mapv(|x| x.conj()))
}

/// SNR of user k for RIS phases `phases` and beamformer `q`.
pub fn snr_direct(
    channels: &ChannelSet,
    user_k: usize,
    phases: &PhaseVector,
    q: &Beamformer,
    noise_power: f64,
) -> Result<f64> {
    check_user(channels, user_k)?;
    check_dims(channels, Some(phases), q)?;
    let g = channels.h_bs_ris.dot(&q.weights);
    let h_r = &channels.h_ris_user[user_k];
    let mut y: Complex64 = channels.h_direct[user_k]
        .iter()
        .zip(q.weights.iter())
        .map(|(h, w)| h.conj() * w)
        .sum();
    for ((hr, gn), &w) in h_r.iter().zip(g.iter()).zip(phases.iter()) {
        y += hr.conj() * Complex64::cis(w) * gn;
    }
    Ok(y.norm_sqr() / noise_power)
}

/// Rank-one SNR model `κ·|d + mᵀ e^{jω}|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrQuadratic {
    pub m_vec: Array1<Complex64>,
    pub scale: f64,
    /// Direct-path contribution `d`; zero when the direct link is blocked.
    pub offset: Complex64,
}

impl SnrQuadratic {
    pub fn len(&self) -> usize {
        self.m_vec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m_vec.is_empty()
    }

    /// Complex amplitude `d + mᵀ s`.
    pub fn amplitude(&self, phases: &[f64]) -> Complex64 {
        self.offset
            + self
                .m_vec
                .iter()
                .zip(phases)
                .map(|(m, &w)| m * Complex64::cis(w))
                .sum::<Complex64>()
    }

    pub fn snr(&self, phases: &[f64]) -> f64 {
        self.scale * self.amplitude(phases).norm_sqr()
    }

    /// `z = M s = κ·conj(m)·(d + mᵀ s)`.
    pub fn z(&self, phases: &[f64]) -> Vec<Complex64> {
        let u = self.amplitude(phases) * self.scale;
        self.m_vec.iter().map(|m| m.conj() * u).collect()
    }

    /// Modulus and argument of every entry of `z`.
    pub fn r_phi(&self, phases: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.z(phases)
            .into_iter()
            .map(|z| (z.norm(), z.arg()))
            .unzip()
    }

    /// Co-phasing bound `κ·(|d| + Σ|m_n|)²`, reached by [`Self::co_phased`].
    pub fn max_snr(&self) -> f64 {
        let s = self.offset.norm() + self.m_vec.iter().map(|m| m.norm()).sum::<f64>();
        self.scale * s * s
    }

    /// Phases in `[0, 2π)` aligning every term with the direct path (or with
    /// the real axis when the direct path is blocked).
    pub fn co_phased(&self) -> Vec<f64> {
        let base = if self.offset.norm() > 0.0 {
            self.offset.arg()
        } else {
            0.0
        };
        self.m_vec
            .iter()
            .map(|m| (base - m.arg()).rem_euclid(2.0 * std::f64::consts::PI))
            .collect()
    }
}

/// Rank-one form in the pure-LOS / blocked-direct regime, with
/// `m = diag(h_rᴴ)·a_RIS(Ψ_RIS)`.
pub fn snr_quadratic_form(
    channels: &ChannelSet,
    user_k: usize,
    q_los: &Beamformer,
    noise_power: f64,
) -> Result<SnrQuadratic> {
    check_user(channels, user_k)?;
    check_dims(channels, None, q_los)?;
    if !channels.bs_ris_pure_los {
        return Err(Error::Precondition("BS-RIS link is not pure LOS".into()));
    }
    if !channels.direct_blocked() {
        return Err(Error::Precondition(
            "direct BS-user link is not blocked".into(),
        ));
    }
    let a_ris = steering_vector(&channels.ris_array, channels.ris_aoa);
    let a_bs = steering_vector(&channels.bs_array, channels.bs_aod);
    let m_vec = channels.h_ris_user[user_k]
        .iter()
        .zip(a_ris.iter())
        .map(|(h, a)| h.conj() * a)
        .collect();
    let bf: Complex64 = a_bs
        .iter()
        .zip(q_los.weights.iter())
        .map(|(a, q)| a.conj() * q)
        .sum();
    let c2 = channels.bs_ris_amplitude * channels.bs_ris_amplitude;
    Ok(SnrQuadratic {
        m_vec,
        scale: c2 * bf.norm_sqr() / noise_power,
        offset: Complex64::new(0.0, 0.0),
    })
}

/// Exact quadratic form for any BS → RIS channel and beamformer:
/// `m = diag(h_rᴴ)·H_t·q`, `d = h_dᴴ q`, `κ = 1/σ²`.
pub fn cascade_quadratic_form(
    channels: &ChannelSet,
    user_k: usize,
    q: &Beamformer,
    noise_power: f64,
) -> Result<SnrQuadratic> {
    check_user(channels, user_k)?;
    check_dims(channels, None, q)?;
    let g = channels.h_bs_ris.dot(&q.weights);
    let m_vec = channels.h_ris_user[user_k]
        .iter()
        .zip(g.iter())
        .map(|(h, g)| h.conj() * g)
        .collect();
    let offset = channels.h_direct[user_k]
        .iter()
        .zip(q.weights.iter())
        .map(|(h, w)| h.conj() * w)
        .sum();
    Ok(SnrQuadratic {
        m_vec,
        scale: 1.0 / noise_power,
        offset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_scenario_channels;
    use crate::config::ScenarioConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_channels() -> ChannelSet {
        let cfg = ScenarioConfig::default();
        let mut ch = build_scenario_channels(&cfg, 0).unwrap();
        ch.h_bs_ris = ndarray::arr2(&[[c(1.0, 0.0)]]);
        ch.h_ris_user = vec![ndarray::arr1(&[c(1.0, 0.0)])];
        ch.h_direct = vec![ndarray::arr1(&[c(0.0, 0.0)])];
        ch
    }

    #[test]
    fn matched_filter_basics() {
        let e1 = ndarray::arr1(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let q = matched_filter(&e1, 1.0).unwrap();
        assert_eq!(q.weights, e1);
        let h = ndarray::arr1(&[c(0.3, -2.0), c(1.5, 0.2)]);
        let q = matched_filter(&h, 4.0).unwrap();
        assert!((q.power() - 4.0).abs() < 1e-12);
        assert!(matched_filter(&ndarray::arr1(&[c(0.0, 0.0)]), 1.0).is_err());
    }

    #[test]
    fn matched_filter_beats_random_beamformers() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h: Array1<Complex64> = (0..6)
            .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let gain = |q: &Array1<Complex64>| {
            h.iter()
                .zip(q)
                .map(|(h, q)| h.conj() * q)
                .sum::<Complex64>()
                .norm_sqr()
        };
        let best = gain(&matched_filter(&h, 1.0).unwrap().weights);
        for _ in 0..1000 {
            let q: Array1<Complex64> = (0..6)
                .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let q = q.mapv(|x| x / norm(&q));
            assert!(gain(&q) <= best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn los_beamformer_shapes() {
        let single = ArraySpec::single([0.0; 3]);
        let q = los_beamformer(&single, AngleTuple::new(0.4, 0.1), 2.0).unwrap();
        assert!((q.weights[0] - c(2f64.sqrt(), 0.0)).norm() < 1e-15);
        let upa = ArraySpec::new(4, 4, [0.0; 3], [1.0, 0.0, 0.0]);
        let q = los_beamformer(&upa, AngleTuple::default(), 2.0).unwrap();
        assert!(q
            .weights
            .iter()
            .all(|w| (w - c((2.0f64 / 16.0).sqrt(), 0.0)).norm() < 1e-15));
    }

    #[test]
    fn scalar_snr_identity() {
        let ch = scalar_channels();
        let q = Beamformer::new(ndarray::arr1(&[c(1.0, 0.0)]), 1.0).unwrap();
        let snr = snr_direct(&ch, 0, &PhaseVector(vec![0.0]), &q, 1.0).unwrap();
        assert!((snr - 1.0).abs() < 1e-15);
        let q2 = Beamformer::new(ndarray::arr1(&[c(2.0, 0.0)]), 4.0).unwrap();
        let snr2 = snr_direct(&ch, 0, &PhaseVector(vec![0.0]), &q2, 1.0).unwrap();
        assert!((snr2 - 4.0).abs() < 1e-15);
    }

    #[test]
    fn snr_rejects_bad_shapes() {
        let ch = build_scenario_channels(&ScenarioConfig::default(), 0).unwrap();
        let q = los_beamformer(&ch.bs_array, ch.bs_aod, 1.0).unwrap();
        assert!(snr_direct(&ch, 0, &PhaseVector(vec![0.0; 3]), &q, 1.0).is_err());
        assert!(snr_direct(&ch, 5, &PhaseVector(vec![0.0; ch.n_elements()]), &q, 1.0).is_err());
        let short = Beamformer::new(ndarray::arr1(&[c(1.0, 0.0)]), 1.0).unwrap();
        assert!(snr_direct(
            &ch,
            0,
            &PhaseVector(vec![0.0; ch.n_elements()]),
            &short,
            1.0
        )
        .is_err());
    }

    #[test]
    fn effective_channel_reproduces_snr() {
        let ch = build_scenario_channels(&ScenarioConfig::default(), 4).unwrap();
        let q = los_beamformer(&ch.bs_array, ch.bs_aod, 50.0).unwrap();
        let w = PhaseVector(
            (0..ch.n_elements())
                .map(|n| 0.37 * n as f64 % 6.0)
                .collect(),
        );
        let h = effective_channel(&ch, 1, &w).unwrap();
        let y: Complex64 = h
            .iter()
            .zip(q.weights.iter())
            .map(|(h, q)| h.conj() * q)
            .sum();
        let snr = snr_direct(&ch, 1, &w, &q, 1e-12).unwrap();
        assert!((y.norm_sqr() / 1e-12 / snr - 1.0).abs() < 1e-10);
    }

    #[test]
    fn quadratic_form_requires_regime() {
        let ch = build_scenario_channels(&ScenarioConfig::default(), 0).unwrap();
        let q = los_beamformer(&ch.bs_array, ch.bs_aod, 1.0).unwrap();
        // default BS-RIS K-factor is 10, not pure LOS
        assert!(matches!(
            snr_quadratic_form(&ch, 0, &q, 1.0),
            Err(Error::Precondition(_))
        ));
        assert!(cascade_quadratic_form(&ch, 0, &q, 1.0).is_ok());
    }

    #[test]
    fn single_element_snr_is_phase_invariant() {
        let f = SnrQuadratic {
            m_vec: ndarray::arr1(&[c(0.3, -0.4)]),
            scale: 2.0,
            offset: c(0.0, 0.0),
        };
        for w in [0.0, 1.0, 4.0] {
            assert!((f.snr(&[w]) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn co_phasing_reaches_bound() {
        let f = SnrQuadratic {
            m_vec: ndarray::arr1(&[c(0.3, -0.4), c(-1.0, 0.2), c(0.0, 2.0)]),
            scale: 1.5,
            offset: c(0.0, 0.0),
        };
        let w = f.co_phased();
        assert!((f.snr(&w) / f.max_snr() - 1.0).abs() < 1e-12);
        let with_direct = SnrQuadratic {
            offset: c(-0.5, 0.5),
            ..f
        };
        let w = with_direct.co_phased();
        assert!((with_direct.snr(&w) / with_direct.max_snr() - 1.0).abs() < 1e-12);
    }
}
