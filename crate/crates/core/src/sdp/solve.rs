use nalgebra::{DMatrix, DVector};

use super::ipm::{solve_dual, DualForm, IpmStatus};
use super::{verify, SdpSolution, SdpStatus, SolverOptions, StandardSdp};
use crate::lmi::max_eigenvalue;
use crate::scalar::{lit, to_f64, Real};

/// Residual allowed on the rescaled blocks for a point to count as feasible.
const SCALED_FEASIBILITY_TOL: f64 = 1e-7;

/// Dual-form copy of a standard SDP after diagonal rescaling.
///
/// Block `k` holds `Dₖ(-F0 - diag(δ))Dₖ` and `Dₖ Fᵢ Dₖ sᵢ`; bounds become
/// `1×1` blocks. The original unknowns are `x = s ⊙ ỹ`.
struct Scaled<T: Real> {
    form: DualForm<T>,
    col_scale: DVector<T>,
}

impl<T: Real> Scaled<T> {
    fn new(sdp: &StandardSdp<T>) -> Self {
        let m = sdp.num_unknowns;
        let mut c = Vec::new();
        let mut a: Vec<Vec<Option<DMatrix<T>>>> = vec![Vec::new(); m];
        for block in &sdp.blocks {
            c.push(-&block.constant - DMatrix::from_diagonal(&block.margin));
            for (i, f) in block.coefficients.iter().enumerate() {
                a[i].push(f.clone());
            }
        }
        for &(idx, lb) in &sdp.bounds {
            c.push(DMatrix::from_element(1, 1, -lb));
            for (i, ai) in a.iter_mut().enumerate() {
                ai.push(if i == idx { Some(DMatrix::from_element(1, 1, -T::one())) } else { None });
            }
        }
        let mut form = DualForm { c, a, b: -&sdp.objective };
        let mut col_scale = DVector::from_element(m, T::one());

        for _ in 0..8 {
            // symmetric row/column balancing inside each block
            for k in 0..form.c.len() {
                let n = form.c[k].nrows();
                let mut row_max = DVector::<T>::zeros(n);
                let mut scan = |mat: &DMatrix<T>| {
                    for r in 0..n {
                        row_max[r] = row_max[r].max(mat.row(r).amax());
                    }
                };
                scan(&form.c[k]);
                for ai in &form.a {
                    if let Some(aik) = &ai[k] {
                        scan(aik);
                    }
                }
                let d = row_max.map(|v| if v > T::zero() { T::one() / v.sqrt() } else { T::one() });
                let apply = |mat: &mut DMatrix<T>| {
                    for r in 0..n {
                        for cc in 0..n {
                            mat[(r, cc)] *= d[r] * d[cc];
                        }
                    }
                };
                apply(&mut form.c[k]);
                for ai in form.a.iter_mut() {
                    if let Some(aik) = ai[k].as_mut() {
                        apply(aik);
                    }
                }
            }
            // unknown scaling
            for (i, ai) in form.a.iter_mut().enumerate() {
                let mx = ai.iter().flatten().fold(T::zero(), |s, mat| s.max(mat.amax()));
                if mx > T::zero() {
                    let f = T::one() / mx.sqrt();
                    for mat in ai.iter_mut().flatten() {
                        *mat *= f;
                    }
                    form.b[i] *= f;
                    col_scale[i] *= f;
                }
            }
        }
        let bmax = form.b.amax();
        if bmax > T::zero() {
            form.b /= bmax;
        }
        Self { form, col_scale }
    }

    fn unscale(&self, y: &DVector<T>) -> DVector<T> {
        y.component_mul(&self.col_scale)
    }

    /// `λmax(Σ ỹᵢÃᵢ − C̃)` per block.
    fn residuals(&self, y: &DVector<T>) -> Vec<T> {
        let ay = self.form.a_adjoint(y);
        ay.iter().zip(self.form.c.iter()).map(|(a, c)| max_eigenvalue(&(a - c))).collect()
    }

    fn phase1(&self, box_bound: T) -> DualForm<T> {
        let m = self.form.m();
        let nb = self.form.c.len();
        let mut c = self.form.c.clone();
        let mut a: Vec<Vec<Option<DMatrix<T>>>> = self.form.a.clone();
        let mut at: Vec<Option<DMatrix<T>>> = c.iter().map(|ck| Some(-DMatrix::identity(ck.nrows(), ck.ncols()))).collect();
        // t ≥ -1
        c.push(DMatrix::from_element(1, 1, T::one()));
        at.push(Some(DMatrix::from_element(1, 1, -T::one())));
        for ai in a.iter_mut() {
            ai.push(None);
        }
        // |ỹᵢ| ≤ M
        for i in 0..m {
            for sign in [T::one(), -T::one()] {
                c.push(DMatrix::from_element(1, 1, box_bound));
                for (j, aj) in a.iter_mut().enumerate() {
                    aj.push(if j == i { Some(DMatrix::from_element(1, 1, sign)) } else { None });
                }
                at.push(None);
            }
        }
        debug_assert_eq!(at.len(), nb + 1 + 2 * m);
        a.push(at);
        let mut b = DVector::zeros(m + 1);
        b[m] = -T::one();
        DualForm { c, a, b }
    }
}

/// Outcome of the phase-1 problem `min t  s.t.  F(x) + diag(δ) ⪯ tI`.
#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility<T: Real> {
    pub feasible: bool,
    /// Optimal `t` on the rescaled problem; negative means strictly feasible.
    pub level: T,
    pub x: DVector<T>,
    pub converged: bool,
}

fn run_phase1<T: Real>(scaled: &Scaled<T>, opts: &SolverOptions) -> Feasibility<T> {
    let form = scaled.phase1(lit(opts.phase1_box));
    let r = solve_dual(&form, lit(opts.tolerance), opts.max_iterations, opts.verbose);
    let m = scaled.form.m();
    let y = r.y.rows(0, m).into_owned();
    let level = r.y[m];
    let verified = scaled.residuals(&y).iter().all(|&v| v < T::zero());
    let converged = r.status == IpmStatus::Converged;
    let feasible = verified || (converged && level < T::zero() && verified);
    if opts.verbose {
        log::info!("phase-1 level {:.6e} converged {converged} verified {verified}", to_f64(level));
    }
    Feasibility { feasible, level, x: scaled.unscale(&y), converged }
}

/// Decides strict feasibility of the constraint set, ignoring the objective.
pub fn feasibility<T: Real>(sdp: &StandardSdp<T>, opts: &SolverOptions) -> Feasibility<T> {
    run_phase1(&Scaled::new(sdp), opts)
}

/// Minimizes the objective; reports infeasibility through a phase-1 problem
/// when the main iteration does not produce a verified optimum.
pub fn solve<T: Real>(sdp: &StandardSdp<T>, opts: &SolverOptions) -> SdpSolution<T> {
    let scaled = Scaled::new(sdp);
    let r = solve_dual(&scaled.form, lit(opts.tolerance), opts.max_iterations, opts.verbose);
    let tol = lit::<T>(SCALED_FEASIBILITY_TOL);
    let feasible = scaled.residuals(&r.y).iter().all(|&v| v <= tol);
    let x = scaled.unscale(&r.y);

    let (status, x, phase1_level) = match (r.status, feasible) {
        (IpmStatus::Converged, true) => (SdpStatus::Optimal, x, None),
        _ => {
            let f = run_phase1(&scaled, opts);
            if f.feasible {
                let status = match r.status {
                    IpmStatus::MaxIterations => SdpStatus::MaxIterations,
                    _ => SdpStatus::NumericalFailure,
                };
                (status, x, Some(f.level))
            } else {
                (SdpStatus::Infeasible, f.x, Some(f.level))
            }
        }
    };
    let v = verify(sdp, &x);
    SdpSolution { objective: v.objective, max_eigenvalues: v.max_eigenvalues, x, status, iterations: r.iterations, phase1_level }
}
