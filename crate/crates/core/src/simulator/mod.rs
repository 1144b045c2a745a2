//! Closed-loop validation: two-body (or linear time-varying) propagation of a
//! chaser under saturated state feedback and an out-of-plane disturbance.

mod csv;
mod frame;
mod integrate;

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, Vector2, Vector3, Vector4, Vector6};

use crate::dynamics::{build_plant, ChaserConfig, OrbitConfig, PlantModel, RelativeState};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

pub use csv::{read_csv, write_csv, CSV_HEADER};
pub use frame::{
    gravity, gravity_difference, init_inertial, lvlh_frame, lvlh_relative_state, relative_from_offset,
    relative_to_inertial_offset, target_on_orbit, two_body_derivative, InertialState,
};
pub use integrate::{rk4_step, DormandPrince, Radau5, StepFailure};

/// Sum of sinusoids `Σ aᵢ sin(ωᵢ t + φᵢ)` acting along the LVLH z-axis, N.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisturbanceSpec<T> {
    pub terms: Vec<SineTerm<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineTerm<T> {
    /// N.
    pub amplitude: T,
    /// rad/s.
    pub omega: T,
    /// rad.
    pub phase: T,
}

impl<T: Real> DisturbanceSpec<T> {
    pub fn none() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        for term in &self.terms {
            if !(term.amplitude >= T::zero()) || !term.omega.is_finite() || !term.phase.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "disturbance term needs a non-negative amplitude and finite frequency/phase, got {:?}",
                    (to_f64(term.amplitude), to_f64(term.omega), to_f64(term.phase))
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: T) -> T {
        disturbance_eval(self, t)
    }
}

pub fn disturbance_eval<T: Real>(dist: &DisturbanceSpec<T>, t: T) -> T {
    dist.terms
        .iter()
        .fold(T::zero(), |acc, s| acc + s.amplitude * (s.omega * t + s.phase).sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    /// Classical fixed-step RK4.
    Rk4,
    /// Adaptive Dormand-Prince 5(4), output every `step`.
    Rk45,
    /// Fixed-step three-stage Radau IIA (implicit, L-stable).
    Radau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantMode {
    NonlinearTwoBody,
    LinearTimeVarying,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaturationMode {
    Clamp,
    /// Any commanded thrust beyond its bound aborts the run.
    Assert,
}

/// Quadratic cost weights for the in-plane and out-of-plane integrands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights<T: Real> {
    pub q_p: Matrix4<T>,
    pub r_p: Matrix2<T>,
    pub q_q: Matrix2<T>,
    pub r_q: T,
}

impl<T: Real> CostWeights<T> {
    pub fn identity() -> Self {
        Self { q_p: Matrix4::identity(), r_p: Matrix2::identity(), q_q: Matrix2::identity(), r_q: T::one() }
    }

    /// In-plane and out-of-plane integrands for relative state `x` and thrust `u`.
    pub fn integrands(&self, x: &Vector6<T>, u: &Vector3<T>) -> (T, T) {
        let p = Vector4::new(x[0], x[1], x[3], x[4]);
        let up = Vector2::new(u[0], u[1]);
        let q = Vector2::new(x[2], x[5]);
        let jp = p.dot(&(self.q_p * p)) + up.dot(&(self.r_p * up));
        let jq = q.dot(&(self.q_q * q)) + self.r_q * u[2] * u[2];
        (jp, jq)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T: Real> {
    /// s.
    pub duration: T,
    /// s.
    pub step: T,
    pub integrator: Integrator,
    pub plant_mode: PlantMode,
    pub saturation: SaturationMode,
    /// Sampling interval of the recorded trajectory, rounded to a whole number of steps.
    pub record_interval: T,
    pub x0: RelativeState<T>,
    pub weights: CostWeights<T>,
    /// Relative tolerance of the adaptive integrator.
    pub rtol: T,
}

impl<T: Real> SimConfig<T> {
    pub fn new(x0: RelativeState<T>, duration: T) -> Self {
        Self {
            duration,
            step: lit(0.1),
            integrator: Integrator::Radau,
            plant_mode: PlantMode::NonlinearTwoBody,
            saturation: SaturationMode::Clamp,
            record_interval: T::one(),
            x0,
            weights: CostWeights::identity(),
            rtol: lit(1e-10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > T::zero() && self.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!("duration must be positive, got {}", to_f64(self.duration))));
        }
        if !(self.step > T::zero() && self.step.is_finite()) {
            return Err(Error::InvalidConfig(format!("step must be positive, got {}", to_f64(self.step))));
        }
        if !(self.record_interval > T::zero()) {
            return Err(Error::InvalidConfig("record interval must be positive".into()));
        }
        if !(self.rtol > T::zero()) {
            return Err(Error::InvalidConfig("rtol must be positive".into()));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidConfig("initial state must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T: Real> {
    pub t: T,
    pub state: RelativeState<T>,
    /// Applied (post-saturation) thrust in LVLH, N.
    pub thrust: Vector3<T>,
    pub disturbance: T,
    pub jp: T,
    pub jq: T,
    pub j_total: T,
    /// `∫ w² dt`, the disturbance energy.
    pub w_energy: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub samples: Vec<Sample<T>>,
    pub saturation: SaturationMode,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> Option<&Sample<T>> {
        self.samples.last()
    }

    pub fn horizon(&self) -> T {
        self.samples.last().map_or(T::zero(), |s| s.t)
    }

    /// Last sample with `t <= time`.
    pub fn at(&self, time: T) -> Option<&Sample<T>> {
        let idx = self.samples.partition_point(|s| s.t <= time + lit(1e-9));
        idx.checked_sub(1).map(|i| &self.samples[i])
    }

    pub fn max_abs_z(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, s| m.max(s.state.z.abs()))
    }

    /// Largest recorded `|f_i|` per axis.
    pub fn max_thrust(&self) -> Vector3<T> {
        self.samples.iter().fold(Vector3::zeros(), |m, s| m.zip_map(&s.thrust, |a, b| a.max(b.abs())))
    }

    /// First recorded time at which the in-plane distance is below `threshold`
    /// and stays below it for the remainder of the run.
    pub fn settling_time(&self, threshold: T) -> Option<T> {
        let mut t = None;
        for s in self.samples.iter().rev() {
            if s.state.in_plane_distance() < threshold {
                t = Some(s.t);
            } else {
                break;
            }
        }
        t
    }

    /// `(∫ zᵀz dt / ∫ w² dt)^{1/2}` of the out-of-plane channel.
    pub fn attenuation_ratio(&self) -> Option<T> {
        let s = self.samples.last()?;
        (s.w_energy > T::zero()).then(|| (s.jq / s.w_energy).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimErrorKind {
    /// State blew up or became non-finite.
    Divergence,
    /// A commanded thrust exceeded its bound in assert mode.
    SaturationViolated { axis: usize, command: f64, bound: f64 },
    /// The implicit stage equations could not be solved even with substeps.
    StepFailure,
    /// The reference orbit degenerated.
    DegenerateOrbit,
}

/// A run that stopped early, with everything recorded up to that point.
#[derive(Debug, Clone)]
pub struct SimulationError<T: Real> {
    pub kind: SimErrorKind,
    pub t: f64,
    pub partial: Trajectory<T>,
}

impl<T: Real> fmt::Display for SimulationError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SimErrorKind::Divergence => write!(f, "simulation diverged at t = {} s", self.t),
            SimErrorKind::SaturationViolated { axis, command, bound } => write!(
                f,
                "thrust command {command} N on axis {axis} exceeds bound {bound} N at t = {} s",
                self.t
            ),
            SimErrorKind::StepFailure => write!(f, "implicit step failed at t = {} s", self.t),
            SimErrorKind::DegenerateOrbit => write!(f, "degenerate target orbit at t = {} s", self.t),
        }
    }
}

impl<T: Real> std::error::Error for SimulationError<T> {}

/// Run failure: either bad inputs or a run that stopped partway.
#[derive(Debug, Clone)]
pub enum RunError<T: Real> {
    Config(Error),
    Simulation(Box<SimulationError<T>>),
}

impl<T: Real> fmt::Display for RunError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Simulation(e) => e.fmt(f),
        }
    }
}

impl<T: Real> std::error::Error for RunError<T> {}

impl<T: Real> From<Error> for RunError<T> {
    fn from(e: Error) -> Self {
        RunError::Config(e)
    }
}

/// Position beyond which a relative state counts as diverged, m.
const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy)]
enum Fault {
    Saturation { axis: usize, command: f64, bound: f64 },
    Degenerate,
}

struct ClosedLoop<'a, T: Real> {
    orbit: OrbitConfig<T>,
    mass: T,
    bounds: [T; 3],
    k: &'a DMatrix<T>,
    dist: &'a DisturbanceSpec<T>,
    weights: CostWeights<T>,
    saturation: SaturationMode,
    mode: PlantMode,
    plant: PlantModel<T>,
}

impl<T: Real> ClosedLoop<'_, T> {
    fn dim(&self) -> usize {
        match self.mode {
            PlantMode::NonlinearTwoBody => 15,
            PlantMode::LinearTimeVarying => 9,
        }
    }

    fn control(&self, x: &Vector6<T>) -> std::result::Result<Vector3<T>, Fault> {
        let raw = -(self.k * DVector::from_column_slice(x.as_slice()));
        let mut u = Vector3::zeros();
        for i in 0..3 {
            let b = self.bounds[i];
            u[i] = match self.saturation {
                SaturationMode::Clamp => raw[i].max(-b).min(b),
                SaturationMode::Assert => {
                    if raw[i].abs() > b * (T::one() + lit(1e-9)) {
                        return Err(Fault::Saturation { axis: i, command: to_f64(raw[i]), bound: to_f64(b) });
                    }
                    raw[i]
                }
            };
        }
        Ok(u)
    }

    /// Relative state encoded in an augmented state vector.
    fn relative(&self, y: &DVector<T>) -> std::result::Result<Vector6<T>, Fault> {
        match self.mode {
            PlantMode::LinearTimeVarying => Ok(Vector6::from_column_slice(&y.as_slice()[..6])),
            PlantMode::NonlinearTwoBody => {
                let r = Vector3::new(y[0], y[1], y[2]);
                let v = Vector3::new(y[3], y[4], y[5]);
                let dr = Vector3::new(y[6], y[7], y[8]);
                let dv = Vector3::new(y[9], y[10], y[11]);
                relative_from_offset(&r, &v, &dr, &dv).map(|x| x.to_vector()).map_err(|_| Fault::Degenerate)
            }
        }
    }

    fn rhs(&self, t: T, y: &DVector<T>) -> std::result::Result<DVector<T>, Fault> {
        let n = self.dim();
        let mut dy = DVector::zeros(n);
        let w = self.dist.eval(t);
        let x = self.relative(y)?;
        let u = self.control(&x)?;
        match self.mode {
            PlantMode::LinearTimeVarying => {
                let a = self.plant.system_matrix(self.orbit.mean_anomaly(t));
                let force = Vector3::new(u.x, u.y, u.z + w);
                let dx = a * x + self.plant.b * force;
                dy.rows_mut(0, 6).copy_from(&dx);
            }
            PlantMode::NonlinearTwoBody => {
                let r = Vector3::new(y[0], y[1], y[2]);
                let v = Vector3::new(y[3], y[4], y[5]);
                let dr = Vector3::new(y[6], y[7], y[8]);
                let (rot, _) = lvlh_frame(&r, &v).map_err(|_| Fault::Degenerate)?;
                let force = Vector3::new(u.x, u.y, u.z + w);
                let a_target = gravity(self.orbit.mu, &r);
                let a_rel = gravity_difference(self.orbit.mu, &r, &dr) + rot * force / self.mass;
                dy.rows_mut(0, 3).copy_from(&v);
                dy.rows_mut(3, 3).copy_from(&a_target);
                dy.rows_mut(6, 3).copy_from(&y.rows(9, 3));
                dy.rows_mut(9, 3).copy_from(&a_rel);
            }
        }
        let (jp, jq) = self.weights.integrands(&x, &u);
        dy[n - 3] = jp;
        dy[n - 2] = jq;
        dy[n - 1] = w * w;
        Ok(dy)
    }

    fn sample(&self, t: T, y: &DVector<T>) -> std::result::Result<Sample<T>, Fault> {
        let n = self.dim();
        let x = self.relative(y)?;
        let thrust = self.control(&x)?;
        Ok(Sample {
            t,
            state: RelativeState::from_vector(&x),
            thrust,
            disturbance: self.dist.eval(t),
            jp: y[n - 3],
            jq: y[n - 2],
            j_total: y[n - 3] + y[n - 2],
            w_energy: y[n - 1],
        })
    }

    fn initial(&self, x0: &RelativeState<T>) -> Result<DVector<T>> {
        let mut y = DVector::zeros(self.dim());
        match self.mode {
            PlantMode::LinearTimeVarying => y.rows_mut(0, 6).copy_from(&x0.to_vector()),
            PlantMode::NonlinearTwoBody => {
                let (r, v) = target_on_orbit(&self.orbit, T::zero())?;
                let (dr, dv) = relative_to_inertial_offset(&r, &v, x0)?;
                for i in 0..3 {
                    y[i] = r[i];
                    y[3 + i] = v[i];
                    y[6 + i] = dr[i];
                    y[9 + i] = dv[i];
                }
            }
        }
        Ok(y)
    }

    /// Typical magnitudes of the state components.
    fn scale(&self) -> DVector<T> {
        let n = self.orbit.mean_motion();
        let mut s = DVector::from_element(self.dim(), T::one());
        if self.mode == PlantMode::NonlinearTwoBody {
            for i in 0..3 {
                s[i] = self.orbit.a;
                s[3 + i] = self.orbit.a * n;
                s[9 + i] = lit(1e-3);
            }
        } else {
            for i in 3..6 {
                s[i] = lit(1e-3);
            }
        }
        s
    }

    fn diverged(&self, y: &DVector<T>) -> bool {
        if y.iter().any(|v| !v.is_finite()) {
            return true;
        }
        match self.relative(y) {
            Ok(x) => x.iter().any(|v| v.abs() > lit(DIVERGENCE_LIMIT)),
            Err(_) => true,
        }
    }
}

fn fault_kind(f: Fault) -> SimErrorKind {
    match f {
        Fault::Saturation { axis, command, bound } => SimErrorKind::SaturationViolated { axis, command, bound },
        Fault::Degenerate => SimErrorKind::DegenerateOrbit,
    }
}

/// Maximum number of halvings tried when an implicit step fails.
const MAX_SUBSTEP_DEPTH: u32 = 6;

fn radau_advance<T: Real>(
    radau: &mut Radau5<T>,
    f: &mut impl FnMut(T, &DVector<T>) -> std::result::Result<DVector<T>, Fault>,
    t: T,
    y: &DVector<T>,
    h: T,
    depth: u32,
) -> std::result::Result<DVector<T>, StepFailure<Fault>> {
    match radau.step(f, t, y, h) {
        Err(StepFailure::Newton) if depth < MAX_SUBSTEP_DEPTH => {
            let half = h * lit(0.5);
            let mid = radau_advance(radau, f, t, y, half, depth + 1)?;
            radau_advance(radau, f, t + half, &mid, half, depth + 1)
        }
        other => other,
    }
}

/// Simulates the closed loop `u = -K x` from `sim.x0`.
pub fn run<T: Real>(
    cfg: &OrbitConfig<T>,
    chaser: &ChaserConfig<T>,
    k: &DMatrix<T>,
    dist: &DisturbanceSpec<T>,
    sim: &SimConfig<T>,
) -> std::result::Result<Trajectory<T>, RunError<T>> {
    cfg.validate()?;
    chaser.validate()?;
    dist.validate()?;
    sim.validate()?;
    if k.shape() != (3, 6) {
        return Err(Error::Dimension(format!("gain must be 3x6, got {}x{}", k.nrows(), k.ncols())).into());
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("gain has non-finite entries".into()).into());
    }
    let system = ClosedLoop {
        orbit: *cfg,
        mass: chaser.m,
        bounds: chaser.thrust_bounds(),
        k,
        dist,
        weights: sim.weights,
        saturation: sim.saturation,
        mode: sim.plant_mode,
        plant: build_plant(cfg, chaser),
    };
    let mut y = system.initial(&sim.x0)?;
    let mut traj = Trajectory { samples: Vec::new(), saturation: sim.saturation };
    let fail = |kind, t: T, traj: Trajectory<T>| {
        RunError::Simulation(Box::new(SimulationError { kind, t: to_f64(t), partial: traj }))
    };
    match system.sample(T::zero(), &y) {
        Ok(s) => traj.samples.push(s),
        Err(f) => return Err(fail(fault_kind(f), T::zero(), traj)),
    }

    let steps_f = (sim.duration / sim.step - lit(1e-9)).ceil();
    let steps = steps_f.to_usize().unwrap_or(usize::MAX).max(1);
    let every = (sim.record_interval / sim.step).round().to_usize().unwrap_or(1).max(1);
    let mut f = |t: T, y: &DVector<T>| system.rhs(t, y);
    let mut radau = Radau5::new(system.scale());
    let atol = system.scale().map(|s| s * lit(1e-3) * sim.rtol);
    let mut dp = DormandPrince::new(sim.rtol, atol, sim.step);

    let mut t = T::zero();
    for i in 1..=steps {
        let t_next = if i == steps { sim.duration } else { sim.step * lit(i as f64) };
        let h = t_next - t;
        let next = match sim.integrator {
            Integrator::Rk4 => rk4_step(&mut f, t, &y, h).map_err(fault_kind),
            Integrator::Radau => radau_advance(&mut radau, &mut f, t, &y, h, 0).map_err(|e| match e {
                StepFailure::Rhs(fault) => fault_kind(fault),
                StepFailure::Newton => SimErrorKind::StepFailure,
            }),
            Integrator::Rk45 => match dp.advance(&mut f, t, t_next, &y) {
                Ok(Some(v)) => Ok(v),
                Ok(None) => Err(SimErrorKind::StepFailure),
                Err(fault) => Err(fault_kind(fault)),
            },
        };
        let next = match next {
            Ok(v) => v,
            Err(kind) => {
                let kind = if system.diverged(&y) { SimErrorKind::Divergence } else { kind };
                return Err(fail(kind, t, traj));
            }
        };
        if system.diverged(&next) {
            return Err(fail(SimErrorKind::Divergence, t_next, traj));
        }
        y = next;
        t = t_next;
        if i % every == 0 || i == steps {
            match system.sample(t, &y) {
                Ok(s) => traj.samples.push(s),
                Err(fault) => return Err(fail(fault_kind(fault), t, traj)),
            }
        }
    }
    if sim.integrator == Integrator::Radau {
        log::debug!("radau: {} newton iterations over {steps} steps", radau.newton_iterations);
    }
    Ok(traj)
}

/// Which trajectory accumulated less total cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lower {
    A,
    B,
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<T> {
    /// `(t, J_total(a), J_total(b))` at the sample times of `a`.
    pub points: Vec<(T, T, T)>,
    pub terminal_a: T,
    pub terminal_b: T,
    pub lower: Lower,
}

fn interpolate_j_total<T: Real>(traj: &Trajectory<T>, t: T) -> T {
    let s = &traj.samples;
    let idx = s.partition_point(|x| x.t < t);
    if idx == 0 {
        return s[0].j_total;
    }
    if idx >= s.len() {
        return s[s.len() - 1].j_total;
    }
    let (a, b) = (&s[idx - 1], &s[idx]);
    let w = (t - a.t) / (b.t - a.t);
    a.j_total + (b.j_total - a.j_total) * w
}

/// Total-cost comparison of two runs over the same horizon.
pub fn compare<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<Comparison<T>> {
    let (ha, hb) = (a.horizon(), b.horizon());
    if a.samples.is_empty() || b.samples.is_empty() || (ha - hb).abs() > lit::<T>(1e-9) * ha.abs().max(T::one()) {
        return Err(Error::HorizonMismatch { a: to_f64(ha), b: to_f64(hb) });
    }
    let points = a.samples.iter().map(|s| (s.t, s.j_total, interpolate_j_total(b, s.t))).collect();
    let terminal_a = a.samples[a.samples.len() - 1].j_total;
    let terminal_b = b.samples[b.samples.len() - 1].j_total;
    let lower = if terminal_a < terminal_b {
        Lower::A
    } else if terminal_b < terminal_a {
        Lower::B
    } else {
        Lower::Equal
    };
    Ok(Comparison { points, terminal_a, terminal_b, lower })
}
