//! Infeasible-start primal-dual path following in dual form
//!
//! ```text
//! max bᵀy   s.t.   Σ yᵢAᵢ + S = C,  S ⪰ 0
//! min ⟨C,X⟩ s.t.   ⟨Aᵢ,X⟩ = bᵢ,     X ⪰ 0
//! ```
//!
//! with the HKM search direction and a Mehrotra predictor-corrector.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{lit, to_f64, Real};

/// Block-diagonal problem data; `a[i][b]` is `Aᵢ` restricted to block `b`.
#[derive(Debug, Clone)]
pub(crate) struct DualForm<T: Real> {
    pub c: Vec<DMatrix<T>>,
    pub a: Vec<Vec<Option<DMatrix<T>>>>,
    pub b: DVector<T>,
}

impl<T: Real> DualForm<T> {
    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.c.iter().map(|c| c.nrows()).collect()
    }

    /// `Σ yᵢAᵢ` per block.
    pub fn a_adjoint(&self, y: &DVector<T>) -> Vec<DMatrix<T>> {
        let mut out: Vec<DMatrix<T>> = self.c.iter().map(|c| DMatrix::zeros(c.nrows(), c.ncols())).collect();
        for (i, ai) in self.a.iter().enumerate() {
            if y[i] == T::zero() {
                continue;
            }
            for (o, aib) in out.iter_mut().zip(ai.iter()) {
                if let Some(aib) = aib {
                    *o += aib * y[i];
                }
            }
        }
        out
    }

    /// `(⟨Aᵢ, X⟩)ᵢ`.
    pub fn a_op(&self, x: &[DMatrix<T>]) -> DVector<T> {
        DVector::from_iterator(
            self.m(),
            self.a.iter().map(|ai| {
                ai.iter()
                    .zip(x.iter())
                    .filter_map(|(aib, xb)| aib.as_ref().map(|a| a.dot(xb)))
                    .fold(T::zero(), |s, v| s + v)
            }),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Converged,
    MaxIterations,
    /// Iterates blew up or a factorization failed.
    Failed,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult<T: Real> {
    pub y: DVector<T>,
    pub status: IpmStatus,
    pub iterations: usize,
    #[cfg_attr(not(test), allow(dead_code))]
    pub primal_objective: T,
    #[cfg_attr(not(test), allow(dead_code))]
    pub dual_objective: T,
}

fn sym<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * lit::<T>(0.5)
}

fn frob<T: Real>(blocks: &[DMatrix<T>]) -> T {
    blocks.iter().fold(T::zero(), |s, b| s + b.norm_squared()).sqrt()
}

fn inner<T: Real>(a: &[DMatrix<T>], b: &[DMatrix<T>]) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |s, (x, y)| s + x.dot(y))
}

/// Largest `α` with `X + αΔX ⪰ 0`, or `None` if `X` is not positive definite.
fn max_step<T: Real>(x: &[DMatrix<T>], dx: &[DMatrix<T>]) -> Option<T> {
    let mut alpha = lit::<T>(1e30);
    for (xb, dxb) in x.iter().zip(dx.iter()) {
        let l = xb.clone().cholesky()?.unpack();
        let t = l.solve_lower_triangular(dxb)?;
        let w = l.solve_lower_triangular(&t.transpose())?;
        let lmin = sym(&w).symmetric_eigenvalues().min();
        if lmin < T::zero() {
            alpha = alpha.min(-T::one() / lmin);
        }
    }
    Some(alpha)
}

struct Direction<T: Real> {
    dx: Vec<DMatrix<T>>,
    dy: DVector<T>,
    ds: Vec<DMatrix<T>>,
}

pub(crate) fn solve_dual<T: Real>(p: &DualForm<T>, tol: T, max_iter: usize, verbose: bool) -> IpmResult<T> {
    let m = p.m();
    let dims = p.dims();
    let n_total: usize = dims.iter().sum();
    let nt = lit::<T>(n_total as f64);
    let ten = lit::<T>(10.0);

    // starting point scaled to the data
    let mut x = Vec::with_capacity(dims.len());
    let mut s = Vec::with_capacity(dims.len());
    for (bi, &nb) in dims.iter().enumerate() {
        let nbt = lit::<T>(nb as f64);
        let mut xi = ten.max(nbt.sqrt());
        let mut eta = ten.max(nbt.sqrt()).max(p.c[bi].norm());
        for (i, ai) in p.a.iter().enumerate() {
            if let Some(aib) = &ai[bi] {
                let na = aib.norm();
                xi = xi.max(nbt * (T::one() + p.b[i].abs()) / (T::one() + na));
                eta = eta.max(na);
            }
        }
        x.push(DMatrix::identity(nb, nb) * xi);
        s.push(DMatrix::identity(nb, nb) * eta);
    }
    let mut y = DVector::zeros(m);

    let b_norm = p.b.norm();
    let c_norm = frob(&p.c);
    let mut status = IpmStatus::MaxIterations;
    let mut iterations = 0;
    let mut pobj = inner(&p.c, &x);
    let mut dobj = p.b.dot(&y);
    let mut warned = false;

    for iter in 0..max_iter {
        iterations = iter;
        let ay = p.a_adjoint(&y);
        let rp = &p.b - p.a_op(&x);
        let rd: Vec<DMatrix<T>> = (0..dims.len()).map(|k| &p.c[k] - &s[k] - &ay[k]).collect();
        let gap = inner(&x, &s);
        let mu = gap / nt;
        pobj = inner(&p.c, &x);
        dobj = p.b.dot(&y);
        let rel_gap = gap / (T::one() + pobj.abs() + dobj.abs());
        let pinf = rp.norm() / (T::one() + b_norm);
        let dinf = frob(&rd) / (T::one() + c_norm);
        if verbose {
            log::info!(
                "ipm {iter:3} pobj {:+.10e} dobj {:+.10e} gap {:.2e} pinf {:.2e} dinf {:.2e}",
                to_f64(pobj),
                to_f64(dobj),
                to_f64(rel_gap),
                to_f64(pinf),
                to_f64(dinf)
            );
        }
        if rel_gap < tol && pinf < tol && dinf < tol {
            status = IpmStatus::Converged;
            break;
        }
        let huge = lit::<T>(1e25);
        if !(frob(&x) < huge && y.norm() < huge && frob(&s) < huge) {
            status = IpmStatus::Failed;
            break;
        }

        let Some(s_inv) = s.iter().map(|sb| sb.clone().cholesky().map(|c| c.inverse())).collect::<Option<Vec<_>>>() else {
            status = IpmStatus::Failed;
            break;
        };

        // Schur complement Mᵢⱼ = ⟨Aⱼ, X Aᵢ S⁻¹⟩
        let mut g: Vec<Vec<Option<DMatrix<T>>>> = Vec::with_capacity(m);
        for ai in &p.a {
            g.push(
                ai.iter()
                    .enumerate()
                    .map(|(bk, aib)| aib.as_ref().map(|a| &x[bk] * a * &s_inv[bk]))
                    .collect(),
            );
        }
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut v = T::zero();
                for bk in 0..dims.len() {
                    if let (Some(gi), Some(aj)) = (&g[i][bk], &p.a[j][bk]) {
                        v += aj.dot(gi);
                    }
                }
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let diag_max = schur.diagonal().amax();
        let chol = match schur.clone().cholesky() {
            Some(c) => Some(c),
            None => {
                let mut reg = schur.clone();
                let eps = diag_max * lit::<T>(1e-13);
                for i in 0..m {
                    reg[(i, i)] += eps;
                }
                reg.cholesky()
            }
        };
        let Some(chol) = chol else {
            status = IpmStatus::Failed;
            break;
        };
        if !warned {
            let l = chol.l();
            let min_pivot = l.diagonal().iter().fold(lit::<T>(1e300), |a, &v| a.min(v * v));
            if min_pivot < lit::<T>(1e-12) * diag_max {
                log::debug!("Schur complement pivot {:.3e} below 1e-12 of its diagonal scale", to_f64(min_pivot / diag_max));
                warned = true;
            }
        }

        let direction = |sigma_mu: T, corr: Option<&[DMatrix<T>]>| -> Direction<T> {
            // H = σμS⁻¹ − X − X Rd S⁻¹ − corr
            let h: Vec<DMatrix<T>> = (0..dims.len())
                .map(|k| {
                    let mut h = &s_inv[k] * sigma_mu - &x[k] - &x[k] * &rd[k] * &s_inv[k];
                    if let Some(c) = corr {
                        h -= &c[k];
                    }
                    h
                })
                .collect();
            let rhs = &rp - p.a_op(&h);
            let dy = chol.solve(&rhs);
            let ady = p.a_adjoint(&dy);
            let ds: Vec<DMatrix<T>> = (0..dims.len()).map(|k| &rd[k] - &ady[k]).collect();
            let dx: Vec<DMatrix<T>> = (0..dims.len())
                .map(|k| {
                    let mut d = &s_inv[k] * sigma_mu - &x[k] - &x[k] * &ds[k] * &s_inv[k];
                    if let Some(c) = corr {
                        d -= &c[k];
                    }
                    sym(&d)
                })
                .collect();
            Direction { dx, dy, ds }
        };

        let pred = direction(T::zero(), None);
        let (Some(ap), Some(ad)) = (max_step(&x, &pred.dx), max_step(&s, &pred.ds)) else {
            status = IpmStatus::Failed;
            break;
        };
        let ap = ap.min(T::one());
        let ad = ad.min(T::one());
        let x_aff: Vec<_> = (0..dims.len()).map(|k| &x[k] + &pred.dx[k] * ap).collect();
        let s_aff: Vec<_> = (0..dims.len()).map(|k| &s[k] + &pred.ds[k] * ad).collect();
        let mu_aff = inner(&x_aff, &s_aff) / nt;
        let ratio = (mu_aff / mu).max(T::zero()).min(T::one());
        let sigma = ratio * ratio * ratio;

        let corr: Vec<DMatrix<T>> = (0..dims.len()).map(|k| &pred.dx[k] * &pred.ds[k] * &s_inv[k]).collect();
        let dir = direction(sigma * mu, Some(&corr));
        let (Some(ap), Some(ad)) = (max_step(&x, &dir.dx), max_step(&s, &dir.ds)) else {
            status = IpmStatus::Failed;
            break;
        };
        let gamma = lit::<T>(0.9) + lit::<T>(0.09) * ap.min(ad).min(T::one());
        let ap = (gamma * ap).min(T::one());
        let ad = (gamma * ad).min(T::one());
        if ap < lit::<T>(1e-12) && ad < lit::<T>(1e-12) {
            status = IpmStatus::Failed;
            break;
        }
        for k in 0..dims.len() {
            x[k] = sym(&(&x[k] + &dir.dx[k] * ap));
            s[k] = sym(&(&s[k] + &dir.ds[k] * ad));
        }
        y += &dir.dy * ad;
        iterations = iter + 1;
    }

    IpmResult { y, status, iterations, primal_objective: pobj, dual_objective: dobj }
}
