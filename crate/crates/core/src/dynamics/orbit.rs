use nalgebra::{Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Standard gravitational parameter of the Earth, m³/s².
pub const EARTH_MU: f64 = 3.986004418e14;

const MAX_ECCENTRICITY: f64 = 0.1;
const WARN_ECCENTRICITY: f64 = 0.05;

/// Reference (target) orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitConfig<T> {
    /// Gravitational parameter, m³/s².
    pub mu: T,
    /// Semimajor axis, m.
    pub a: T,
    /// Eccentricity.
    pub e: T,
    /// Time of periapsis passage, s.
    pub t_p: T,
}

impl<T: Real> OrbitConfig<T> {
    pub fn new(mu: T, a: T, e: T, t_p: T) -> Result<Self> {
        let cfg = Self { mu, a, e, t_p };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Earth-centred orbit with periapsis passage at `t = 0`.
    pub fn earth(a: T, e: T) -> Result<Self> {
        Self::new(lit(EARTH_MU), a, e, T::zero())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > T::zero() && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("mu must be positive, got {}", to_f64(self.mu))));
        }
        if !(self.a > T::zero() && self.a.is_finite()) {
            return Err(Error::InvalidConfig(format!("a must be positive, got {}", to_f64(self.a))));
        }
        if !(self.e >= T::zero() && self.e <= lit(MAX_ECCENTRICITY)) {
            return Err(Error::InvalidConfig(format!(
                "eccentricity {} outside the near-circular range [0, {MAX_ECCENTRICITY}]",
                to_f64(self.e)
            )));
        }
        if !self.t_p.is_finite() {
            return Err(Error::InvalidConfig("t_p must be finite".into()));
        }
        if self.e > lit(WARN_ECCENTRICITY) {
            log::warn!(
                "eccentricity {} exceeds {WARN_ECCENTRICITY}; order-e truncation error grows as e^2",
                to_f64(self.e)
            );
        }
        Ok(())
    }

    pub fn mean_motion(&self) -> T {
        mean_motion(self)
    }

    /// Orbital period `2π / n`, s.
    pub fn period(&self) -> T {
        T::two_pi() / self.mean_motion()
    }

    /// Mean anomaly `M = n (t - t_p)`.
    pub fn mean_anomaly(&self, t: T) -> T {
        self.mean_motion() * (t - self.t_p)
    }
}

/// Chase vehicle mass and per-axis thrust limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaserConfig<T> {
    /// Mass, kg.
    pub m: T,
    /// Radial thrust bound, N.
    pub u_px_max: T,
    /// Along-track thrust bound, N.
    pub u_py_max: T,
    /// Out-of-plane thrust bound, N.
    pub u_q_max: T,
}

impl<T: Real> ChaserConfig<T> {
    pub fn new(m: T, u_px_max: T, u_py_max: T, u_q_max: T) -> Result<Self> {
        let cfg = Self { m, u_px_max, u_py_max, u_q_max };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > T::zero() && self.m.is_finite()) {
            return Err(Error::InvalidConfig(format!("mass must be positive, got {}", to_f64(self.m))));
        }
        for (name, v) in [("u_px_max", self.u_px_max), ("u_py_max", self.u_py_max), ("u_q_max", self.u_q_max)] {
            if !(v > T::zero()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {}", to_f64(v))));
            }
        }
        Ok(())
    }

    pub fn thrust_bounds(&self) -> [T; 3] {
        [self.u_px_max, self.u_py_max, self.u_q_max]
    }
}

/// The four time-varying rate terms of the relative-motion system matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalTerms<T> {
    /// μ / r³, 1/s².
    pub mu_over_r3: T,
    /// Orbital angular rate ω, rad/s.
    pub omega: T,
    /// ω², rad²/s².
    pub omega_sq: T,
    /// Angular acceleration ω̇, rad/s².
    pub omega_dot: T,
}

/// Relative state in the target-centred rotating frame
/// (x radial, y along-track, z orbit normal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeState<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub vx: T,
    pub vy: T,
    pub vz: T,
}

impl<T: Real> RelativeState<T> {
    pub fn zero() -> Self {
        Self::from_vector(&Vector6::zeros())
    }

    pub fn from_vector(v: &Vector6<T>) -> Self {
        Self { x: v[0], y: v[1], z: v[2], vx: v[3], vy: v[4], vz: v[5] }
    }

    pub fn from_array(a: [T; 6]) -> Self {
        Self::from_vector(&Vector6::from(a))
    }

    pub fn to_vector(&self) -> Vector6<T> {
        Vector6::new(self.x, self.y, self.z, self.vx, self.vy, self.vz)
    }

    pub fn from_parts(position: &Vector3<T>, velocity: &Vector3<T>) -> Self {
        Self {
            x: position.x,
            y: position.y,
            z: position.z,
            vx: velocity.x,
            vy: velocity.y,
            vz: velocity.z,
        }
    }

    pub fn position(&self) -> Vector3<T> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn velocity(&self) -> Vector3<T> {
        Vector3::new(self.vx, self.vy, self.vz)
    }

    pub fn in_plane_distance(&self) -> T {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Mean motion `n = √(μ / a³)`.
pub fn mean_motion<T: Real>(cfg: &OrbitConfig<T>) -> T {
    (cfg.mu / (cfg.a * cfg.a * cfg.a)).sqrt()
}

/// Rate terms evaluated exactly at eccentric anomaly `ecc_anomaly`.
pub fn exact_orbital_terms<T: Real>(cfg: &OrbitConfig<T>, ecc_anomaly: T) -> OrbitalTerms<T> {
    let n = mean_motion(cfg);
    let k = T::one() / (T::one() - cfg.e * ecc_anomaly.cos());
    let k2 = k * k;
    let k4 = k2 * k2;
    OrbitalTerms {
        mu_over_r3: n * n * k2 * k,
        omega: n * k2,
        omega_sq: n * n * k4,
        omega_dot: -lit::<T>(2.0) * n * n * cfg.e * ecc_anomaly.sin() * k4,
    }
}

/// Rate terms expanded in `e` about the circular orbit and truncated to first order.
pub fn truncated_orbital_terms<T: Real>(cfg: &OrbitConfig<T>, mean_anomaly: T) -> OrbitalTerms<T> {
    let n = mean_motion(cfg);
    let e = cfg.e;
    let (s, c) = mean_anomaly.sin_cos();
    let n2 = n * n;
    OrbitalTerms {
        mu_over_r3: n2 * (T::one() + lit::<T>(3.0) * e * c),
        omega: n * (T::one() + lit::<T>(2.0) * e * c),
        omega_sq: n2 * (T::one() + lit::<T>(4.0) * e * c),
        omega_dot: -lit::<T>(2.0) * n2 * e * s,
    }
}

/// Un-truncated relative-motion system matrix built from the given rate terms.
pub fn nonlinear_system_matrix<T: Real>(terms: &OrbitalTerms<T>) -> Matrix6<T> {
    let two = lit::<T>(2.0);
    let mut a = Matrix6::zeros();
    a[(0, 3)] = T::one();
    a[(1, 4)] = T::one();
    a[(2, 5)] = T::one();
    a[(3, 0)] = two * terms.mu_over_r3 + terms.omega_sq;
    a[(3, 1)] = terms.omega_dot;
    a[(3, 4)] = two * terms.omega;
    a[(4, 0)] = -terms.omega_dot;
    a[(4, 1)] = -terms.mu_over_r3 + terms.omega_sq;
    a[(4, 3)] = -two * terms.omega;
    a[(5, 2)] = -terms.mu_over_r3;
    a
}
