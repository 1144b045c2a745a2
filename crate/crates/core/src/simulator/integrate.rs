//! Time steppers for `y' = f(t, y)` on dense vectors.
//!
//! The right-hand side may refuse a state (`Err`), which aborts the step.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{lit, Real};

/// Explicit classical fourth-order Runge-Kutta step.
pub fn rk4_step<T, E, F>(f: &mut F, t: T, y: &DVector<T>, h: T) -> Result<DVector<T>, E>
where
    T: Real,
    F: FnMut(T, &DVector<T>) -> Result<DVector<T>, E>,
{
    let half = lit::<T>(0.5);
    let k1 = f(t, y)?;
    let k2 = f(t + h * half, &(y + &k1 * (h * half)))?;
    let k3 = f(t + h * half, &(y + &k2 * (h * half)))?;
    let k4 = f(t + h, &(y + &k3 * h))?;
    Ok(y + (k1 + (k2 + k3) * lit::<T>(2.0) + k4) * (h / lit::<T>(6.0)))
}

/// Error weights `atol_i + rtol |y_i|`.
fn weights<T: Real>(y: &DVector<T>, atol: &DVector<T>, rtol: T) -> DVector<T> {
    DVector::from_fn(y.len(), |i, _| atol[i] + rtol * y[i].abs())
}

fn weighted_rms<T: Real>(v: &DVector<T>, w: &DVector<T>) -> T {
    let n = lit::<T>(v.len() as f64);
    let s = v.iter().zip(w.iter()).fold(T::zero(), |acc, (&a, &b)| acc + (a / b) * (a / b));
    (s / n).sqrt()
}

/// Adaptive Dormand-Prince 5(4) integrator.
#[derive(Debug, Clone)]
pub struct DormandPrince<T: Real> {
    pub rtol: T,
    pub atol: DVector<T>,
    /// Step size carried between calls.
    pub h: T,
    pub h_min: T,
    pub steps: usize,
}

impl<T: Real> DormandPrince<T> {
    pub fn new(rtol: T, atol: DVector<T>, h0: T) -> Self {
        Self { rtol, atol, h: h0, h_min: lit(1e-9), steps: 0 }
    }

    /// Integrates from `t0` to `t1`. `Ok(None)` signals that the step size collapsed.
    pub fn advance<E, F>(&mut self, f: &mut F, t0: T, t1: T, y0: &DVector<T>) -> Result<Option<DVector<T>>, E>
    where
        F: FnMut(T, &DVector<T>) -> Result<DVector<T>, E>,
    {
        let c = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0].map(lit::<T>);
        let a: [&[f64]; 7] = [
            &[],
            &[1.0 / 5.0],
            &[3.0 / 40.0, 9.0 / 40.0],
            &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
            &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
            &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
            &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        let err_w = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let mut t = t0;
        let mut y = y0.clone();
        let mut k0 = f(t, &y)?;
        while t < t1 {
            let last = t + self.h >= t1;
            let h = if last { t1 - t } else { self.h };
            let mut k: Vec<DVector<T>> = Vec::with_capacity(7);
            k.push(k0.clone());
            for s in 1..7 {
                let mut ys = y.clone();
                for (j, &aij) in a[s].iter().enumerate() {
                    if aij != 0.0 {
                        ys.axpy(h * lit::<T>(aij), &k[j], T::one());
                    }
                }
                k.push(f(t + c[s] * h, &ys)?);
            }
            let mut y_new = y.clone();
            for (j, &bj) in a[6].iter().enumerate() {
                if bj != 0.0 {
                    y_new.axpy(h * lit::<T>(bj), &k[j], T::one());
                }
            }
            let mut err = DVector::zeros(y.len());
            for (j, &ej) in err_w.iter().enumerate() {
                if ej != 0.0 {
                    err.axpy(h * lit::<T>(ej), &k[j], T::one());
                }
            }
            let w = DVector::from_fn(y.len(), |i, _| {
                self.atol[i] + self.rtol * y[i].abs().max(y_new[i].abs())
            });
            let e = weighted_rms(&err, &w);
            let factor = if e > T::zero() {
                (lit::<T>(0.9) * e.powf(lit(-0.2))).min(lit(5.0)).max(lit(0.2))
            } else {
                lit(5.0)
            };
            if e <= T::one() {
                t = if last { t1 } else { t + h };
                y = y_new;
                k0 = k[6].clone();
                self.steps += 1;
                if !last {
                    self.h = h * factor;
                }
            } else {
                self.h = h * factor.min(T::one());
                if self.h < self.h_min {
                    return Ok(None);
                }
            }
        }
        Ok(Some(y))
    }
}

/// Three-stage Radau IIA collocation (order 5, L-stable) with a simplified
/// Newton iteration on the stage increments.
#[derive(Debug, Clone)]
pub struct Radau5<T: Real> {
    a: [[T; 3]; 3],
    c: [T; 3],
    /// Per-component magnitude used for Newton convergence and finite differences.
    pub scale: DVector<T>,
    pub max_newton: usize,
    pub newton_iterations: usize,
}

/// Why a Radau step did not produce a state.
#[derive(Debug)]
pub enum StepFailure<E> {
    Rhs(E),
    Newton,
}

impl<T: Real> Radau5<T> {
    pub fn new(scale: DVector<T>) -> Self {
        let s6 = 6.0f64.sqrt();
        let a = [
            [(88.0 - 7.0 * s6) / 360.0, (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0],
            [(296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0, (-2.0 - 3.0 * s6) / 225.0],
            [(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0],
        ]
        .map(|row| row.map(lit::<T>));
        let c = [(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0].map(lit::<T>);
        Self { a, c, scale, max_newton: 12, newton_iterations: 0 }
    }

    fn jacobian<E, F>(&self, f: &mut F, t: T, y: &DVector<T>, f0: &DVector<T>) -> Result<DMatrix<T>, E>
    where
        F: FnMut(T, &DVector<T>) -> Result<DVector<T>, E>,
    {
        let n = y.len();
        let eps = lit::<T>(1.5e-8);
        let mut jac = DMatrix::zeros(n, n);
        let mut yp = y.clone();
        for k in 0..n {
            let d = eps * y[k].abs().max(self.scale[k]);
            yp[k] = y[k] + d;
            let fk = f(t, &yp)?;
            yp[k] = y[k];
            jac.set_column(k, &((fk - f0) / d));
        }
        Ok(jac)
    }

    /// One step of size `h`.
    pub fn step<E, F>(&mut self, f: &mut F, t: T, y: &DVector<T>, h: T) -> Result<DVector<T>, StepFailure<E>>
    where
        F: FnMut(T, &DVector<T>) -> Result<DVector<T>, E>,
    {
        let n = y.len();
        let f0 = f(t, y).map_err(StepFailure::Rhs)?;
        let jac = self.jacobian(f, t, y, &f0).map_err(StepFailure::Rhs)?;
        let mut m = DMatrix::<T>::identity(3 * n, 3 * n);
        for i in 0..3 {
            for j in 0..3 {
                let blk = &jac * (-h * self.a[i][j]);
                let mut view = m.view_mut((i * n, j * n), (n, n));
                view += blk;
            }
        }
        let lu = m.lu();
        let mut z: Vec<DVector<T>> = (0..3).map(|i| &f0 * (self.c[i] * h)).collect();
        let rel = (T::default_epsilon() * lit(100.0)).max(lit(1e-14));
        let tol_w = weights(y, &self.scale.map(|s| s * rel), rel);
        let mut prev = T::max_value().unwrap_or(lit(1e300));
        for it in 0..self.max_newton {
            let mut fs = Vec::with_capacity(3);
            for i in 0..3 {
                fs.push(f(t + self.c[i] * h, &(y + &z[i])).map_err(StepFailure::Rhs)?);
            }
            let mut rhs = DVector::zeros(3 * n);
            for i in 0..3 {
                let mut r = -&z[i];
                for j in 0..3 {
                    r.axpy(h * self.a[i][j], &fs[j], T::one());
                }
                rhs.rows_mut(i * n, n).copy_from(&r);
            }
            let dz = lu.solve(&rhs).ok_or(StepFailure::Newton)?;
            let mut norm = T::zero();
            for i in 0..3 {
                let d = dz.rows(i * n, n).into_owned();
                norm = norm.max(weighted_rms(&d, &tol_w));
                z[i] += d;
            }
            self.newton_iterations += 1;
            if !norm.is_finite() {
                return Err(StepFailure::Newton);
            }
            // converged, or stalled at rounding level
            if norm <= T::one() || (it >= 2 && norm >= prev && norm < lit(1e3)) {
                return Ok(y + &z[2]);
            }
            prev = norm;
        }
        Err(StepFailure::Newton)
    }
}
