//! Controller synthesis: builds the LMI programs, solves them, recovers the
//! gains and checks the resulting certificates.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{InPlaneModel, OutOfPlaneModel, PlantModel, IN_PLANE_INDICES, OUT_OF_PLANE_INDICES};
use crate::error::{Error, Result};
use crate::lmi::{
    build_guaranteed_cost, build_hinf, max_eigenvalue, to_dyn, Assignment, GuaranteedCostData, HinfData, LmiProblem,
};
use crate::scalar::{lit, to_f64, Real};
use crate::sdp::{self, lower_with_margin, SdpStatus, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub solver: SolverOptions,
    /// Relative strictness margin applied when lowering `≺ 0`.
    pub strict_margin: f64,
    /// Lower bound on the inverse cost bound `θ = 1/ρ`; `None` keeps `θ > 0` only.
    pub min_inverse_cost: Option<f64>,
    /// Mean-anomaly samples per orbit for robustness sweeps.
    pub grid: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), strict_margin: sdp::STRICT_MARGIN, min_inverse_cost: Some(1e-12), grid: 360 }
    }
}

/// Certified bound returned by a synthesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound<T> {
    /// Guaranteed-cost bound `ρ` on `J`.
    Cost(T),
    /// H∞ level `γ`.
    Hinf(T),
}

impl<T: Real> Bound<T> {
    pub fn value(&self) -> T {
        match *self {
            Bound::Cost(v) | Bound::Hinf(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessCheck<T: Real> {
    /// Spectral abscissa of `A − BK`.
    pub nominal_abscissa: T,
    /// Largest spectral abscissa of `A + ΔA(M) − BK` over `grid`.
    pub worst_abscissa: T,
    pub grid: Vec<T>,
    /// `λmax` of every constraint of the physical-unit LMI program.
    pub lmi_residuals: Vec<(String, T)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisReport<T: Real> {
    pub k: DMatrix<T>,
    pub x: DMatrix<T>,
    pub y: DMatrix<T>,
    pub epsilon: T,
    pub bound: Bound<T>,
    pub status: SdpStatus,
    pub iterations: usize,
    /// `λmax` of the inequality the LMI was derived from, at `P = X⁻¹`.
    pub certificate_max_eigenvalue: T,
    pub verification: RobustnessCheck<T>,
}

/// Spectral abscissa (largest real part of the eigenvalues).
pub fn spectral_abscissa<T: Real>(m: &DMatrix<T>) -> T {
    m.complex_eigenvalues().iter().map(|c| c.re).fold(lit(-1e300), |a: T, b| a.max(b))
}

pub fn verify_gain<T: Real>(
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    delta_a: impl Fn(T) -> DMatrix<T>,
    k: &DMatrix<T>,
    grid_size: usize,
) -> RobustnessCheck<T> {
    let acl = a - b * k;
    let grid: Vec<T> = (0..grid_size).map(|i| T::two_pi() * lit::<T>(i as f64 / grid_size as f64)).collect();
    let worst = grid
        .iter()
        .map(|&m| spectral_abscissa(&(&acl + delta_a(m))))
        .fold(lit(-1e300), |x: T, y| x.max(y));
    RobustnessCheck { nominal_abscissa: spectral_abscissa(&acl), worst_abscissa: worst, grid, lmi_residuals: Vec::new() }
}

/// Change of units `p = D p̃`, `t = T0 τ`, `u = F ũ`, `J = C J̃` that brings
/// the guaranteed-cost data to order one.
#[derive(Debug, Clone, PartialEq)]
struct CostScaling<T: Real> {
    d: DVector<T>,
    f: DVector<T>,
    t0: T,
    c: T,
}

impl<T: Real> CostScaling<T> {
    fn new(data: &GuaranteedCostData<T>, n: T) -> Self {
        let ns = data.a.nrows();
        let half = ns / 2;
        let t0 = T::one() / n;
        let pos = data.x0.rows(0, half).norm();
        let l = if pos > T::zero() { pos } else { T::one() };
        let v = l / t0;
        let d = DVector::from_fn(ns, |i, _| if i < half { l } else { v });
        let bs = DMatrix::from_fn(ns, data.b.ncols(), |i, j| t0 * data.b[(i, j)] / d[i]);
        let f = DVector::from_fn(data.b.ncols(), |j, _| {
            let mx = bs.column(j).amax();
            if mx > T::zero() {
                T::one() / mx
            } else {
                T::one()
            }
        });
        let energy = (data.x0.transpose() * &data.q * &data.x0)[(0, 0)];
        let c = if energy > T::zero() { t0 * energy } else { t0 };
        Self { d, f, t0, c }
    }

    fn apply(&self, data: &GuaranteedCostData<T>) -> GuaranteedCostData<T> {
        let d = DMatrix::from_diagonal(&self.d);
        let d_inv = DMatrix::from_diagonal(&self.d.map(|v| T::one() / v));
        let f = DMatrix::from_diagonal(&self.f);
        GuaranteedCostData {
            a: &d_inv * &data.a * &d * self.t0,
            b: &d_inv * &data.b * &f * self.t0,
            e1: &d_inv * &data.e1 * self.t0,
            e2: &data.e2 * &d,
            q: &d * &data.q * &d * (self.t0 / self.c),
            r: &f * &data.r * &f * (self.t0 / self.c),
            x0: data.x0.component_div(&self.d),
            u_max: data.u_max.iter().zip(self.f.iter()).map(|(&u, &fj)| u / fj).collect(),
            theta_floor: data.theta_floor.map(|t| t * self.c),
        }
    }
}

/// Solution of the guaranteed-cost program mapped back to physical units.
struct CostSolution<T: Real> {
    x: DMatrix<T>,
    y: DMatrix<T>,
    eps: T,
    theta: T,
    sigma: T,
    status: SdpStatus,
    iterations: usize,
}

fn solve_guaranteed_cost<T: Real>(
    data: &GuaranteedCostData<T>,
    n: T,
    opts: &SynthesisOptions,
) -> Result<CostSolution<T>> {
    let scaling = CostScaling::new(data, n);
    let scaled = scaling.apply(data);
    let (problem, vars) = build_guaranteed_cost(&scaled)?;
    let (sdp, map) = lower_with_margin(&problem, lit(opts.strict_margin))?;
    let sol = sdp::solve(&sdp, &opts.solver);
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(Error::Infeasible { margin: sol.phase1_level.map(to_f64).unwrap_or(f64::NAN) })
        }
        s => return Err(Error::Solver(format!("guaranteed-cost program ended with status {s:?}"))),
    }
    let a = map.reconstruct(&sol.x)?;
    let d = DMatrix::from_diagonal(&scaling.d);
    let f = DMatrix::from_diagonal(&scaling.f);
    let c = scaling.c;
    Ok(CostSolution {
        x: &d * a.get(vars.x.id)? * &d / c,
        y: &f * a.get(vars.y.id)? * &d / c,
        eps: a.scalar(vars.eps.id)? * scaling.t0 / c,
        theta: a.scalar(vars.theta.id)? / c,
        sigma: a.scalar(vars.sigma.id)? * c,
        status: sol.status,
        iterations: sol.iterations,
    })
}

fn inverse<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Solver("certificate matrix X is singular".into()))
}

/// `λmax` of `sym(P(A−BK)) + Q + KᵀRK + εPE1E1ᵀP + ε⁻¹E2ᵀE2`.
pub fn guaranteed_cost_certificate<T: Real>(
    data: &GuaranteedCostData<T>,
    p: &DMatrix<T>,
    k: &DMatrix<T>,
    eps: T,
) -> T {
    let acl = &data.a - &data.b * k;
    let pa = p * acl;
    let pe = p * &data.e1;
    let m = &pa + pa.transpose() + &data.q + k.transpose() * &data.r * k + &pe * pe.transpose() * eps
        + data.e2.transpose() * &data.e2 / eps;
    max_eigenvalue(&m)
}

/// `λmax` of the augmented inequality
/// `[[sym(P(A−BK)) + Q + KᵀRK, PB], [*, −γ²I]] + εΔΔᵀ + ε⁻¹EᵀE`.
pub fn hinf_certificate<T: Real>(data: &HinfData<T>, p: &DMatrix<T>, k: &DMatrix<T>, eps: T, g: T) -> T {
    let n = data.a.nrows();
    let m = data.b.ncols();
    let kq = data.e1.ncols();
    let acl = &data.a - &data.b * k;
    let pa = p * acl;
    let mut psi = DMatrix::zeros(n + m, n + m);
    psi.view_mut((0, 0), (n, n))
        .copy_from(&(&pa + pa.transpose() + &data.q + k.transpose() * &data.r * k));
    let pb = p * &data.b;
    psi.view_mut((0, n), (n, m)).copy_from(&pb);
    psi.view_mut((n, 0), (m, n)).copy_from(&pb.transpose());
    psi.view_mut((n, n), (m, m)).copy_from(&(DMatrix::identity(m, m) * -g));
    let mut delta = DMatrix::zeros(n + m, kq + m);
    delta.view_mut((0, 0), (n, kq)).copy_from(&(p * &data.e1));
    let mut e = DMatrix::zeros(kq + m, n + m);
    e.view_mut((0, 0), (kq, n)).copy_from(&data.e2);
    max_eigenvalue(&(psi + &delta * delta.transpose() * eps + e.transpose() * e / eps))
}

fn physical_residuals<T: Real>(problem: &LmiProblem<T>, assignment: &Assignment<T>) -> Result<Vec<(String, T)>> {
    let eig = problem.max_eigenvalues(assignment)?;
    Ok(problem.constraints.iter().map(|c| c.name.clone()).zip(eig).collect())
}

fn guaranteed_cost_report<T: Real>(
    data: &GuaranteedCostData<T>,
    n: T,
    delta_a: impl Fn(T) -> DMatrix<T>,
    opts: &SynthesisOptions,
) -> Result<SynthesisReport<T>> {
    let sol = solve_guaranteed_cost(data, n, opts)?;
    let p = inverse(&sol.x)?;
    let k = &sol.y * &p;
    let certificate = guaranteed_cost_certificate(data, &p, &k, sol.eps);
    let rho = T::one() / sol.theta;

    let (raw, vars) = build_guaranteed_cost(data)?;
    let mut a = Assignment::zeros(&raw);
    a.set(vars.x.id, sol.x.clone());
    a.set(vars.y.id, sol.y.clone());
    a.set_scalar(vars.eps.id, sol.eps);
    a.set_scalar(vars.theta.id, sol.theta);
    a.set_scalar(vars.sigma.id, sol.sigma);
    let mut verification = verify_gain(&data.a, &data.b, delta_a, &k, opts.grid);
    verification.lmi_residuals = physical_residuals(&raw, &a)?;

    Ok(SynthesisReport {
        k,
        x: sol.x,
        y: sol.y,
        epsilon: sol.eps,
        bound: Bound::Cost(rho),
        status: sol.status,
        iterations: sol.iterations,
        certificate_max_eigenvalue: certificate,
        verification,
    })
}

pub fn in_plane_data<T: Real>(
    model: &InPlaneModel<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    p0: &DVector<T>,
    u_max: [T; 2],
    opts: &SynthesisOptions,
) -> GuaranteedCostData<T> {
    GuaranteedCostData {
        a: to_dyn(&model.a_p),
        b: to_dyn(&model.b_p),
        e1: to_dyn(&model.e_p1),
        e2: to_dyn(&model.e_p2),
        q: q.clone(),
        r: r.clone(),
        x0: p0.clone(),
        u_max: u_max.to_vec(),
        theta_floor: opts.min_inverse_cost.map(lit),
    }
}

/// In-plane guaranteed-cost controller with thrust limits.
pub fn synth_in_plane<T: Real>(
    model: &InPlaneModel<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    p0: &DVector<T>,
    u_max: [T; 2],
    opts: &SynthesisOptions,
) -> Result<SynthesisReport<T>> {
    let data = in_plane_data(model, q, r, p0, u_max, opts);
    guaranteed_cost_report(&data, model.n, |m| to_dyn(&model.delta_a_p(m)), opts)
}

/// Coupled 6-state guaranteed-cost controller.
pub fn synth_coupled<T: Real>(
    plant: &PlantModel<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    x0: &DVector<T>,
    u_max: [T; 3],
    opts: &SynthesisOptions,
) -> Result<SynthesisReport<T>> {
    let data = GuaranteedCostData {
        a: to_dyn(&plant.a),
        b: to_dyn(&plant.b),
        e1: to_dyn(&plant.e1()),
        e2: to_dyn(&plant.e2()),
        q: q.clone(),
        r: r.clone(),
        x0: x0.clone(),
        u_max: u_max.to_vec(),
        theta_floor: opts.min_inverse_cost.map(lit),
    };
    guaranteed_cost_report(&data, plant.n, |m| to_dyn(&plant.delta_a(m)), opts)
}

pub fn out_of_plane_data<T: Real>(model: &OutOfPlaneModel<T>, q: &DMatrix<T>, r: T) -> HinfData<T> {
    HinfData {
        a: to_dyn(&model.a_q),
        b: to_dyn(&model.b_q),
        e1: to_dyn(&model.e_q1),
        e2: to_dyn(&model.e_q2),
        q: q.clone(),
        r: DMatrix::from_element(1, 1, r),
    }
}

/// Out-of-plane robust H∞ controller.
pub fn synth_out_of_plane<T: Real>(
    model: &OutOfPlaneModel<T>,
    q: &DMatrix<T>,
    r: T,
    opts: &SynthesisOptions,
) -> Result<SynthesisReport<T>> {
    if !(r > T::zero()) {
        return Err(Error::InvalidConfig("R_q must be positive".into()));
    }
    let data = out_of_plane_data(model, q, r);
    let (problem, vars) = build_hinf(&data)?;
    let (sdp, map) = lower_with_margin(&problem, lit(opts.strict_margin))?;
    let sol = sdp::solve(&sdp, &opts.solver);
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible => {
            return Err(Error::Infeasible { margin: sol.phase1_level.map(to_f64).unwrap_or(f64::NAN) })
        }
        s => return Err(Error::Solver(format!("H-infinity program ended with status {s:?}"))),
    }
    let a = map.reconstruct(&sol.x)?;
    let x = a.get(vars.x.id)?.clone();
    let y = a.get(vars.y.id)?.clone();
    let eps = a.scalar(vars.eps.id)?;
    let g = a.scalar(vars.g.id)?;
    let p = inverse(&x)?;
    let k = &y * &p;
    let certificate = hinf_certificate(&data, &p, &k, eps, g);
    let mut verification = verify_gain(&data.a, &data.b, |m| to_dyn(&model.delta_a_q(m)), &k, opts.grid);
    verification.lmi_residuals = physical_residuals(&problem, &a)?;
    Ok(SynthesisReport {
        k,
        x,
        y,
        epsilon: eps,
        bound: Bound::Hinf(g.sqrt()),
        status: sol.status,
        iterations: sol.iterations,
        certificate_max_eigenvalue: certificate,
        verification,
    })
}

/// 3×6 gain combining an in-plane 2×4 and an out-of-plane 1×2 gain.
#[derive(Debug, Clone, PartialEq)]
pub struct PartiallyIndependentGain<T: Real> {
    pub k_pic: DMatrix<T>,
}

pub fn assemble_partially_independent<T: Real>(
    k_p: &DMatrix<T>,
    k_q: &DMatrix<T>,
) -> Result<PartiallyIndependentGain<T>> {
    if k_p.shape() != (2, 4) || k_q.shape() != (1, 2) {
        return Err(Error::Dimension(format!(
            "expected 2x4 and 1x2 gains, got {:?} and {:?}",
            k_p.shape(),
            k_q.shape()
        )));
    }
    let mut k = DMatrix::zeros(3, 6);
    for r in 0..2 {
        for (j, &c) in IN_PLANE_INDICES.iter().enumerate() {
            k[(r, c)] = k_p[(r, j)];
        }
    }
    for (j, &c) in OUT_OF_PLANE_INDICES.iter().enumerate() {
        k[(2, c)] = k_q[(0, j)];
    }
    Ok(PartiallyIndependentGain { k_pic: k })
}

/// Result of the minimum-thrust bisection.
#[derive(Debug, Clone, PartialEq)]
pub struct MinThrust {
    /// Smallest bound found feasible, N.
    pub thrust: f64,
    /// Every probe `(u_max, feasible)` in evaluation order.
    pub probes: Vec<(f64, bool)>,
    /// Whether the probes are consistent with a monotone predicate.
    pub monotone: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThrustSearch {
    pub lower: f64,
    pub upper: f64,
    pub resolution: f64,
}

impl Default for ThrustSearch {
    fn default() -> Self {
        Self { lower: 0.5, upper: 50.0, resolution: 0.05 }
    }
}

/// Whether the in-plane constraint set is strictly feasible at `u_max` on both axes.
pub fn in_plane_feasible<T: Real>(
    model: &InPlaneModel<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    p0: &DVector<T>,
    u_max: T,
    opts: &SynthesisOptions,
) -> Result<bool> {
    let data = in_plane_data(model, q, r, p0, [u_max, u_max], opts);
    let scaled = CostScaling::new(&data, model.n).apply(&data);
    let (problem, _) = build_guaranteed_cost(&scaled)?;
    let (sdp, _) = lower_with_margin(&problem, lit(opts.strict_margin))?;
    let f = sdp::feasibility(&sdp, &opts.solver);
    log::debug!("u_max {:.4} N: phase-1 level {:.3e}", to_f64(u_max), to_f64(f.level));
    Ok(f.feasible)
}

/// Bisects on a common in-plane thrust bound for feasibility.
pub fn min_feasible_thrust<T: Real>(
    model: &InPlaneModel<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    p0: &DVector<T>,
    search: ThrustSearch,
    opts: &SynthesisOptions,
) -> Result<MinThrust> {
    let mut probes = Vec::new();
    let mut probe = |u: f64| -> Result<bool> {
        let ok = in_plane_feasible(model, q, r, p0, lit(u), opts)?;
        probes.push((u, ok));
        Ok(ok)
    };
    if !probe(search.upper)? {
        return Err(Error::NoFeasibleBound { ceiling: search.upper });
    }
    let (mut lo, mut hi) = (search.lower, search.upper);
    if probe(lo)? {
        hi = lo;
    } else {
        while hi - lo > search.resolution {
            let mid = 0.5 * (lo + hi);
            if probe(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let min_feasible = probes.iter().filter(|p| p.1).map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_infeasible = probes.iter().filter(|p| !p.1).map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let monotone = max_infeasible < min_feasible;
    if !monotone {
        log::warn!("feasibility probes are not monotone in the thrust bound: {probes:?}");
    }
    Ok(MinThrust { thrust: hi, probes, monotone })
}

/// Printed gains of the reference example, used as regression references
/// and to simulate the coupled comparison without re-synthesis.
pub mod reference {
    pub const K_P: [[f64; 4]; 2] = [[0.0024, -0.0013, 0.7535, 0.0593], [0.0015, 0.0010, 0.2952, 1.3332]];
    pub const K_Q: [f64; 2] = [196.8030, 5.8353e4];
    pub const K_CC: [[f64; 6]; 3] = [
        [0.0024, -0.0014, 2.1542e-4, 0.8445, 0.0467, 0.1198],
        [0.0017, 7.487e-4, -4.3822e-4, 0.5689, 1.3525, 0.1901],
        [3.5306e-4, -2.0446e-4, 5.2548e-4, 0.1792, 0.0234, 0.7065],
    ];
    pub const GAMMA: f64 = 1.000778383;

    pub fn k_p() -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(2, 4, |i, j| K_P[i][j])
    }

    pub fn k_q() -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(1, 2, &K_Q)
    }

    pub fn k_cc() -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(3, 6, |i, j| K_CC[i][j])
    }
}
