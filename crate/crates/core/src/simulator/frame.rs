//! Inertial two-body states and the rotating LVLH frame.

use nalgebra::{Matrix3, Vector3};

use crate::dynamics::{solve_kepler, OrbitConfig, RelativeState};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Target and chaser positions and velocities in an Earth-centred inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertialState<T: Real> {
    pub r_target: Vector3<T>,
    pub v_target: Vector3<T>,
    pub r_chaser: Vector3<T>,
    pub v_chaser: Vector3<T>,
}

impl<T: Real> InertialState<T> {
    pub fn is_finite(&self) -> bool {
        [self.r_target, self.v_target, self.r_chaser, self.v_chaser]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Rotation whose columns are the LVLH axes (radial, along-track, orbit normal)
/// expressed in inertial coordinates, and the frame angular rate.
pub fn lvlh_frame<T: Real>(r: &Vector3<T>, v: &Vector3<T>) -> Result<(Matrix3<T>, T)> {
    let h = r.cross(v);
    let h_norm = h.norm();
    let r_norm = r.norm();
    if !(h_norm > T::zero()) || !(r_norm > T::zero()) {
        return Err(Error::DegenerateOrbit);
    }
    let x = r / r_norm;
    let z = h / h_norm;
    let y = z.cross(&x);
    Ok((Matrix3::from_columns(&[x, y, z]), h_norm / (r_norm * r_norm)))
}

/// Target position and velocity on the reference orbit at time `t`, in the
/// perifocal frame (periapsis along +X, angular momentum along +Z).
pub fn target_on_orbit<T: Real>(cfg: &OrbitConfig<T>, t: T) -> Result<(Vector3<T>, Vector3<T>)> {
    let e = cfg.e;
    let ecc_anomaly = solve_kepler(cfg.mean_anomaly(t), e)?;
    let (s, c) = ecc_anomaly.sin_cos();
    let root = (T::one() - e * e).sqrt();
    let r = Vector3::new(cfg.a * (c - e), cfg.a * root * s, T::zero());
    let rate = cfg.mean_motion() / (T::one() - e * c);
    let v = Vector3::new(-cfg.a * s * rate, cfg.a * root * c * rate, T::zero());
    Ok((r, v))
}

/// Places the target on the reference orbit at `t = 0` and the chaser so that
/// its LVLH relative state equals `x0`.
pub fn init_inertial<T: Real>(cfg: &OrbitConfig<T>, x0: &RelativeState<T>) -> Result<InertialState<T>> {
    let (r, v) = target_on_orbit(cfg, T::zero())?;
    let (dr, dv) = relative_to_inertial_offset(&r, &v, x0)?;
    Ok(InertialState { r_target: r, v_target: v, r_chaser: r + dr, v_chaser: v + dv })
}

/// Inertial offset `(r_c - r, v_c - v)` corresponding to an LVLH relative state.
pub fn relative_to_inertial_offset<T: Real>(
    r: &Vector3<T>,
    v: &Vector3<T>,
    x: &RelativeState<T>,
) -> Result<(Vector3<T>, Vector3<T>)> {
    let (rot, omega) = lvlh_frame(r, v)?;
    let rho = x.position();
    let w = Vector3::new(T::zero(), T::zero(), omega);
    let dr = rot * rho;
    let dv = rot * (x.velocity() + w.cross(&rho));
    Ok((dr, dv))
}

/// LVLH relative state from inertial offsets `dr = r_c - r`, `dv = v_c - v`.
pub fn relative_from_offset<T: Real>(
    r: &Vector3<T>,
    v: &Vector3<T>,
    dr: &Vector3<T>,
    dv: &Vector3<T>,
) -> Result<RelativeState<T>> {
    let (rot, omega) = lvlh_frame(r, v)?;
    let position = rot.transpose() * dr;
    let w = Vector3::new(T::zero(), T::zero(), omega);
    let velocity = rot.transpose() * dv - w.cross(&position);
    Ok(RelativeState::from_parts(&position, &velocity))
}

pub fn lvlh_relative_state<T: Real>(s: &InertialState<T>) -> Result<RelativeState<T>> {
    relative_from_offset(
        &s.r_target,
        &s.v_target,
        &(s.r_chaser - s.r_target),
        &(s.v_chaser - s.v_target),
    )
}

/// Point-mass gravitational acceleration.
pub fn gravity<T: Real>(mu: T, r: &Vector3<T>) -> Vector3<T> {
    let n = r.norm();
    r * (-mu / (n * n * n))
}

/// `gravity(r + d) - gravity(r)` evaluated without the cancellation of the
/// naive difference when `|d| << |r|`.
pub fn gravity_difference<T: Real>(mu: T, r: &Vector3<T>, d: &Vector3<T>) -> Vector3<T> {
    let r2 = r.norm_squared();
    let q = d.dot(&(r * lit::<T>(2.0) + d)) / r2;
    // 1 - (1 + q)^{3/2} without subtracting nearly equal numbers
    let s = (T::one() + q).sqrt();
    let s3 = s * s * s;
    let f = -q * (lit::<T>(3.0) + lit::<T>(3.0) * q + q * q) / (T::one() + s3);
    let rc = r + d;
    let rc_norm = rc.norm();
    (d + r * f) * (-mu / (rc_norm * rc_norm * rc_norm))
}

/// Time derivative of the inertial state with thrust `u` and z-axis
/// disturbance `w` given in the LVLH frame.
pub fn two_body_derivative<T: Real>(
    mu: T,
    s: &InertialState<T>,
    u: &Vector3<T>,
    w: T,
    m: T,
) -> Result<[Vector3<T>; 4]> {
    let (rot, _) = lvlh_frame(&s.r_target, &s.v_target)?;
    let force = Vector3::new(u.x, u.y, u.z + w);
    let a_target = gravity(mu, &s.r_target);
    let a_chaser = gravity(mu, &s.r_chaser) + rot * force / m;
    Ok([s.v_target, a_target, s.v_chaser, a_chaser])
}
