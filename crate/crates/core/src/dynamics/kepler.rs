use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

const MAX_NEWTON_ITERATIONS: usize = 50;
const MAX_BISECTION_ITERATIONS: usize = 200;

/// Solves Kepler's equation `E = M + e sin E` for the eccentric anomaly.
///
/// Newton iteration seeded at `E = M`; if it stalls, falls back to bisection
/// on `[M - e, M + e]`, which always brackets the root because
/// `E - e sin E - M` is strictly increasing for `e < 1`.
pub fn solve_kepler<T: Real>(mean_anomaly: T, e: T) -> Result<T> {
    if !(e >= T::zero() && e < T::one()) {
        return Err(Error::InvalidConfig(format!(
            "eccentricity {} outside [0, 1)",
            to_f64(e)
        )));
    }
    let m = mean_anomaly;
    if e == T::zero() {
        return Ok(m);
    }
    let tol = residual_tolerance(m);
    let residual = |ea: T| ea - e * ea.sin() - m;

    let mut ea = m;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let f = residual(ea);
        if f.abs() < tol {
            return Ok(ea);
        }
        let step = f / (T::one() - e * ea.cos());
        ea -= step;
        if !ea.is_finite() {
            break;
        }
    }

    let (mut lo, mut hi) = (m - e, m + e);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = (lo + hi) * lit(0.5);
        let f = residual(mid);
        if f.abs() < tol {
            return Ok(mid);
        }
        if f > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::KeplerNonConvergence {
        mean_anomaly: to_f64(m),
        eccentricity: to_f64(e),
    })
}

/// 1e-13 in double precision, relaxed to a few ulps of `M` when `M` is large
/// or the scalar type is narrower.
fn residual_tolerance<T: Real>(m: T) -> T {
    let ulp_floor = T::default_epsilon() * lit(8.0) * (T::one() + m.abs());
    lit::<T>(1e-13).max(ulp_floor)
}
