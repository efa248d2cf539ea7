//! Distances, bearings and angle-of-incidence constructions in a local
//! east/north/up frame.
//!
//! Bearings are degrees clockwise from north in `[0, 360)`. All angle-of-incidence
//! constructions work in the horizontal plane; elevation enters only through
//! [`zenith_angle`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_COORD_M: f64 = 1.0e5;
const HORIZONTAL_EPS_M: f64 = 1.0e-9;

/// Point in a site-local tangent frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position3D {
    pub east: f64,
    pub north: f64,
    pub up: f64,
}

impl Position3D {
    pub const fn new(east: f64, north: f64, up: f64) -> Self {
        Self { east, north, up }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("east", self.east), ("north", self.north), ("up", self.up)] {
            if !v.is_finite() || v.abs() >= MAX_COORD_M {
                return Err(Error::invalid(format!(
                    "{name} coordinate {v} is not finite or exceeds {MAX_COORD_M} m"
                )));
            }
        }
        Ok(())
    }

    pub fn horizontal_distance(&self, other: &Position3D) -> f64 {
        (other.east - self.east).hypot(other.north - self.north)
    }
}

/// Building face used as a specular reflector. Only the horizontal projection matters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacadeLine {
    pub point_a: Position3D,
    pub point_b: Position3D,
}

impl FacadeLine {
    pub fn new(point_a: Position3D, point_b: Position3D) -> Result<Self> {
        let facade = Self { point_a, point_b };
        facade.validate()?;
        Ok(facade)
    }

    pub fn validate(&self) -> Result<()> {
        if self.point_a.horizontal_distance(&self.point_b) <= HORIZONTAL_EPS_M {
            return Err(Error::Degenerate(
                "facade endpoints coincide in the horizontal plane".into(),
            ));
        }
        Ok(())
    }

    /// Unit direction along the facade and its anchor point.
    fn frame(&self) -> ((f64, f64), (f64, f64)) {
        let de = self.point_b.east - self.point_a.east;
        let dn = self.point_b.north - self.point_a.north;
        let len = de.hypot(dn);
        ((self.point_a.east, self.point_a.north), (de / len, dn / len))
    }

    /// Orthogonal projection of `p` onto the (infinite) facade line.
    pub fn project(&self, p: &Position3D) -> Position3D {
        let ((ae, an), (ue, un)) = self.frame();
        let t = (p.east - ae) * ue + (p.north - an) * un;
        Position3D::new(ae + t * ue, an + t * un, p.up)
    }

    /// Mirror image of `p` across the facade line.
    pub fn mirror(&self, p: &Position3D) -> Position3D {
        let foot = self.project(p);
        Position3D::new(2.0 * foot.east - p.east, 2.0 * foot.north - p.north, p.up)
    }
}

/// Building corner used as the diffraction reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerPoint {
    pub pos: Position3D,
}

/// How the reflection point on a facade is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReflectionRule {
    /// Along-facade midpoint of the projections of Tx and Rx.
    #[default]
    Midpoint,
    /// Specular point of the image-source construction.
    ImageSource,
}

pub fn link_distance_3d(tx: &Position3D, rx: &Position3D) -> f64 {
    let de = rx.east - tx.east;
    let dn = rx.north - tx.north;
    let du = rx.up - tx.up;
    de.hypot(dn).hypot(du)
}

pub fn bearing(from: &Position3D, to: &Position3D) -> Result<f64> {
    let de = to.east - from.east;
    let dn = to.north - from.north;
    if de.hypot(dn) <= HORIZONTAL_EPS_M {
        return Err(Error::Degenerate(
            "bearing undefined for coincident horizontal positions".into(),
        ));
    }
    Ok(normalize_deg(de.atan2(dn).to_degrees()))
}

/// Elevation mismatch between the horizontal plane and the Tx-Rx ray, degrees in `[0, 90]`.
///
/// Symmetric in its arguments; 0 for co-elevated or coincident points.
pub fn zenith_angle(tx: &Position3D, rx: &Position3D) -> f64 {
    let horizontal = tx.horizontal_distance(rx);
    let vertical = (tx.up - rx.up).abs();
    if horizontal == 0.0 && vertical == 0.0 {
        return 0.0;
    }
    vertical.atan2(horizontal).to_degrees()
}

pub fn aoi_direct(tx: &Position3D, rx: &Position3D) -> Result<f64> {
    bearing(rx, tx)
}

pub fn aoi_reflection(tx: &Position3D, rx: &Position3D, facade: &FacadeLine) -> Result<f64> {
    aoi_reflection_with(tx, rx, facade, ReflectionRule::Midpoint)
}

pub fn aoi_reflection_with(
    tx: &Position3D,
    rx: &Position3D,
    facade: &FacadeLine,
    rule: ReflectionRule,
) -> Result<f64> {
    facade.validate()?;
    match rule {
        ReflectionRule::Midpoint => {
            let pt = facade.project(tx);
            let pr = facade.project(rx);
            let mid = Position3D::new(
                0.5 * (pt.east + pr.east),
                0.5 * (pt.north + pr.north),
                rx.up,
            );
            bearing(rx, &mid)
        }
        ReflectionRule::ImageSource => bearing(rx, &facade.mirror(tx)),
    }
}

pub fn aoi_diffraction(rx: &Position3D, corner: &CornerPoint) -> Result<f64> {
    bearing(rx, &corner.pos)
}

/// Smallest absolute difference between two bearings, degrees in `[0, 180]`.
pub fn angular_deviation(aoa: f64, aoi: f64) -> f64 {
    let d = (aoa - aoi).abs().rem_euclid(360.0);
    d.min(360.0 - d)
}

pub fn normalize_deg(angle: f64) -> f64 {
    let a = angle.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}
