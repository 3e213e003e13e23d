//! Uniform planar arrays, local angle frames and steering vectors.
//!
//! Every array lies in its local y'-z' plane and faces along its boresight
//! x'. The local frame is built from the boresight and the global z axis:
//! z' is global "up" projected orthogonally to the boresight, and
//! y' = z' × x'. Directions are reported as (elevation θ, azimuth φ) with
//! unit vector (cos θ cos φ, cos θ sin φ, sin θ) in that frame.
//!
//! Element (p, q), p along y' and q along z', sits at (0, p·d, q·d) in
//! wavelengths and gets the steering entry
//! `exp(j·2π·d·(p·sin φ·cos θ + q·sin θ))`. Its flat index is `p·n_z + q`.

use std::f64::consts::PI;

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// A uniform planar array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub n_y: usize,
    pub n_z: usize,
    /// Element spacing in wavelengths.
    #[serde(default = "half_wavelength")]
    pub spacing: f64,
    /// Array centre, metres.
    pub position: Vec3,
    /// Boresight direction; need not be normalised.
    pub orientation: Vec3,
}

fn half_wavelength() -> f64 {
    0.5
}

impl ArraySpec {
    pub fn new(n_y: usize, n_z: usize, position: Vec3, orientation: Vec3) -> Self {
        Self {
            n_y,
            n_z,
            spacing: 0.5,
            position,
            orientation,
        }
    }

    /// A lone isotropic antenna.
    pub fn single(position: Vec3) -> Self {
        Self::new(1, 1, position, [1.0, 0.0, 0.0])
    }

    pub fn len(&self) -> usize {
        self.n_y * self.n_z
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_y == 0 || self.n_z == 0 {
            return Err(Error::invalid(
                "n_y/n_z",
                "array needs at least one element per axis",
            ));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid("spacing", "must be positive"));
        }
        if self.position.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("position", "must be finite"));
        }
        LocalFrame::from_boresight(self.orientation).map(|_| ())
    }

    pub fn frame(&self) -> Result<LocalFrame> {
        LocalFrame::from_boresight(self.orientation)
    }
}

/// Elevation and azimuth in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AngleTuple {
    pub elevation: f64,
    pub azimuth: f64,
}

impl AngleTuple {
    pub fn new(elevation: f64, azimuth: f64) -> Self {
        Self { elevation, azimuth }
    }

    pub fn from_degrees(elevation_deg: f64, azimuth_deg: f64) -> Self {
        Self::new(elevation_deg.to_radians(), azimuth_deg.to_radians())
    }

    /// Unit direction in the array's local frame.
    pub fn local_direction(&self) -> Vec3 {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        [ce * ca, ce * sa, se]
    }
}

/// Orthonormal right-handed frame (x' = boresight, y', z').
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl LocalFrame {
    pub fn from_boresight(boresight: Vec3) -> Result<Self> {
        let x = normalize(boresight)
            .ok_or_else(|| Error::DegenerateGeometry("zero boresight vector".into()))?;
        // Global up, or global y when the boresight is vertical.
        let up = if cross([0.0, 0.0, 1.0], x).iter().map(|c| c * c).sum::<f64>() < 1e-18 {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let along = dot(up, x);
        let z = normalize(sub(up, scale(x, along))).expect("up is not parallel to boresight");
        let y = cross(z, x);
        Ok(Self { x, y, z })
    }

    pub fn to_local(&self, v: Vec3) -> Vec3 {
        [dot(v, self.x), dot(v, self.y), dot(v, self.z)]
    }

    pub fn to_global(&self, v: Vec3) -> Vec3 {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.x[i] * v[0] + self.y[i] * v[1] + self.z[i] * v[2];
        }
        out
    }
}

/// Array response of `array` towards `angles`.
pub fn steering_vector(array: &ArraySpec, angles: AngleTuple) -> Array1<Complex64> {
    let (se, ce) = angles.elevation.sin_cos();
    let sa = angles.azimuth.sin();
    let ky = 2.0 * PI * array.spacing * sa * ce;
    let kz = 2.0 * PI * array.spacing * se;
    let mut a = Array1::zeros(array.len());
    for p in 0..array.n_y {
        for q in 0..array.n_z {
            a[p * array.n_z + q] = Complex64::cis(ky * p as f64 + kz * q as f64);
        }
    }
    a
}

/// Direction from `from_pos` to `to_pos`, expressed in the frame of an array
/// at `from_pos` with boresight `orientation`.
pub fn angles_between(from_pos: Vec3, to_pos: Vec3, orientation: Vec3) -> Result<AngleTuple> {
    let d = sub(to_pos, from_pos);
    let u = normalize(d).ok_or_else(|| {
        Error::DegenerateGeometry(format!("coincident positions {from_pos:?} and {to_pos:?}"))
    })?;
    let local = LocalFrame::from_boresight(orientation)?.to_local(u);
    let elevation = local[2].clamp(-1.0, 1.0).asin();
    let mut azimuth = local[1].atan2(local[0]);
    if azimuth <= -PI {
        azimuth += 2.0 * PI;
    }
    Ok(AngleTuple { elevation, azimuth })
}

/// Point at `range` metres from `array` in the local direction `angles`.
pub fn position_from(array: &ArraySpec, angles: AngleTuple, range: f64) -> Result<Vec3> {
    let g = array.frame()?.to_global(angles.local_direction());
    Ok(add(array.position, scale(g, range)))
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(a: Vec3) -> Option<Vec3> {
    let n = norm(a);
    (n > 1e-12 && n.is_finite()).then(|| scale(a, 1.0 / n))
}
