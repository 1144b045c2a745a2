use nalgebra::{DMatrix, DVector};

use super::StandardSdp;
use crate::error::{Error, Result};
use crate::lmi::{Assignment, LmiProblem, VarId, VarKind};
use crate::scalar::{lit, Real};

/// Relative strictness margin: `≺ 0` is enforced as `⪯ -diag(δ)` with
/// `δₖ = STRICT_MARGIN · |F0ₖₖ|`, or `STRICT_MARGIN` on rows whose constant
/// diagonal entry is zero. This is `W F W ⪯ -STRICT_MARGIN·I` for the diagonal
/// `W` that brings the constant's diagonal to unit size.
pub const STRICT_MARGIN: f64 = 1e-9;

/// Where a decision variable lives in the unknown vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarSlot {
    pub offset: usize,
    pub kind: VarKind,
}

/// Maps decision variables to and from the packed unknown vector.
///
/// Symmetric variables use `svec`: the upper triangle column by column with
/// off-diagonal entries multiplied by √2, so `⟨svec A, svec B⟩ = tr(AB)`.
/// Rectangular variables are packed column-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexMap {
    pub slots: Vec<VarSlot>,
    pub len: usize,
}

impl IndexMap {
    pub fn new<T: Real>(problem: &LmiProblem<T>) -> Self {
        let mut slots = Vec::with_capacity(problem.vars.len());
        let mut offset = 0;
        for v in &problem.vars {
            slots.push(VarSlot { offset, kind: v.kind });
            offset += v.kind.num_unknowns();
        }
        Self { slots, len: offset }
    }

    /// Basis matrices of a variable, one per unknown, in packing order.
    pub fn basis<T: Real>(kind: VarKind) -> Vec<DMatrix<T>> {
        match kind {
            VarKind::Scalar => vec![DMatrix::from_element(1, 1, T::one())],
            VarKind::Rectangular { rows, cols } => (0..cols)
                .flat_map(|j| {
                    (0..rows).map(move |i| {
                        let mut m = DMatrix::zeros(rows, cols);
                        m[(i, j)] = T::one();
                        m
                    })
                })
                .collect(),
            VarKind::Symmetric(n) => {
                let w = T::one() / T::sqrt(lit::<T>(2.0));
                let mut out = Vec::with_capacity(n * (n + 1) / 2);
                for j in 0..n {
                    for i in 0..=j {
                        let mut m = DMatrix::zeros(n, n);
                        if i == j {
                            m[(i, i)] = T::one();
                        } else {
                            m[(i, j)] = w;
                            m[(j, i)] = w;
                        }
                        out.push(m);
                    }
                }
                out
            }
        }
    }

    pub fn pack<T: Real>(&self, assignment: &Assignment<T>) -> Result<DVector<T>> {
        let mut x = DVector::zeros(self.len);
        let s2 = T::sqrt(lit::<T>(2.0));
        for (k, slot) in self.slots.iter().enumerate() {
            let v = assignment.get(VarId(k))?;
            if v.shape() != slot.kind.shape() {
                return Err(Error::Dimension(format!("assignment for variable {k} has shape {:?}", v.shape())));
            }
            let mut o = slot.offset;
            match slot.kind {
                VarKind::Scalar => x[o] = v[(0, 0)],
                VarKind::Rectangular { rows, cols } => {
                    for j in 0..cols {
                        for i in 0..rows {
                            x[o] = v[(i, j)];
                            o += 1;
                        }
                    }
                }
                VarKind::Symmetric(n) => {
                    for j in 0..n {
                        for i in 0..=j {
                            x[o] = if i == j { v[(i, i)] } else { (v[(i, j)] + v[(j, i)]) / s2 };
                            o += 1;
                        }
                    }
                }
            }
        }
        Ok(x)
    }

    pub fn reconstruct<T: Real>(&self, x: &DVector<T>) -> Result<Assignment<T>> {
        if x.len() != self.len {
            return Err(Error::Dimension(format!("expected {} unknowns, got {}", self.len, x.len())));
        }
        let s2 = T::sqrt(lit::<T>(2.0));
        let mut a = Assignment::new();
        for (k, slot) in self.slots.iter().enumerate() {
            let mut o = slot.offset;
            let m = match slot.kind {
                VarKind::Scalar => DMatrix::from_element(1, 1, x[o]),
                VarKind::Rectangular { rows, cols } => DMatrix::from_column_slice(rows, cols, &x.as_slice()[o..o + rows * cols]),
                VarKind::Symmetric(n) => {
                    let mut m = DMatrix::zeros(n, n);
                    for j in 0..n {
                        for i in 0..=j {
                            if i == j {
                                m[(i, i)] = x[o];
                            } else {
                                m[(i, j)] = x[o] / s2;
                                m[(j, i)] = x[o] / s2;
                            }
                            o += 1;
                        }
                    }
                    m
                }
            };
            a.set(VarId(k), m);
        }
        Ok(a)
    }
}

/// Lowers an LMI problem to standard form with the default strictness margin.
pub fn lower<T: Real>(problem: &LmiProblem<T>) -> Result<(StandardSdp<T>, IndexMap)> {
    lower_with_margin(problem, lit(STRICT_MARGIN))
}

pub fn lower_with_margin<T: Real>(problem: &LmiProblem<T>, rel_margin: T) -> Result<(StandardSdp<T>, IndexMap)> {
    let map = IndexMap::new(problem);
    let mut sdp = StandardSdp::new(map.len);

    for &(id, w) in &problem.objective {
        let slot = map.slots.get(id.0).ok_or(Error::UnknownVariable(id.0))?;
        for (k, b) in IndexMap::basis::<T>(slot.kind).iter().enumerate() {
            sdp.objective[slot.offset + k] += b.trace() * w;
        }
    }

    for c in &problem.constraints {
        let mut coefs = Vec::new();
        let mut used: Vec<VarId> = c.expr.vars().collect();
        used.sort();
        used.dedup();
        for id in used {
            let slot = map.slots[id.0];
            for (k, b) in IndexMap::basis::<T>(slot.kind).iter().enumerate() {
                let f = c.expr.var_contribution(id, b);
                if f.iter().any(|v| *v != T::zero()) {
                    coefs.push((slot.offset + k, (&f + f.transpose()) * lit::<T>(0.5)));
                }
            }
        }
        let margin = c.expr.constant().diagonal().map(|d| if d != T::zero() { rel_margin * d.abs() } else { rel_margin });
        sdp.add_block(&c.name, c.expr.constant().clone(), coefs, margin);
    }

    for (k, v) in problem.vars.iter().enumerate() {
        if let Some(lb) = v.lower_bound {
            sdp.bounds.push((map.slots[k].offset, lb));
        }
    }
    Ok((sdp, map))
}
