//! Dense semidefinite programming.
//!
//! Problems are stated as `minimize cᵀx` subject to
//! `F0 + Σ xᵢFᵢ ⪯ -diag(δ)` on every block and `xᵢ ≥ lᵢ` on bounded unknowns.
//! [`solve`] runs a primal-dual interior point method on a rescaled copy and
//! falls back to a phase-1 problem to tell infeasibility from failure.

mod ipm;
mod lower;
mod solve;

use nalgebra::{DMatrix, DVector};

use crate::lmi::max_eigenvalue;
use crate::scalar::{lit, Real};

pub use lower::{lower, lower_with_margin, IndexMap, VarSlot, STRICT_MARGIN};
pub use solve::{feasibility, solve, Feasibility};

/// One semidefinite block `constant + Σ xᵢ coefficients[i] ⪯ -diag(margin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpBlock<T: Real> {
    pub name: String,
    pub constant: DMatrix<T>,
    /// Coefficient per unknown, `None` where the unknown does not appear.
    pub coefficients: Vec<Option<DMatrix<T>>>,
    /// Per-row strictness margin.
    pub margin: DVector<T>,
}

impl<T: Real> SdpBlock<T> {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn evaluate(&self, x: &DVector<T>) -> DMatrix<T> {
        let mut m = self.constant.clone();
        for (xi, f) in x.iter().zip(self.coefficients.iter()) {
            if let Some(f) = f {
                m += f * *xi;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardSdp<T: Real> {
    pub num_unknowns: usize,
    pub objective: DVector<T>,
    pub blocks: Vec<SdpBlock<T>>,
    /// `(unknown index, lower bound)`.
    pub bounds: Vec<(usize, T)>,
}

impl<T: Real> StandardSdp<T> {
    pub fn new(num_unknowns: usize) -> Self {
        Self { num_unknowns, objective: DVector::zeros(num_unknowns), blocks: Vec::new(), bounds: Vec::new() }
    }

    /// Appends a block; `coefficients` lists `(unknown, Fᵢ)` pairs.
    pub fn add_block(&mut self, name: &str, constant: DMatrix<T>, coefficients: Vec<(usize, DMatrix<T>)>, margin: DVector<T>) {
        assert_eq!(margin.len(), constant.nrows(), "margin length mismatch");
        let mut coefs = vec![None; self.num_unknowns];
        for (i, f) in coefficients {
            assert!(i < self.num_unknowns, "unknown {i} out of range");
            assert_eq!(f.shape(), constant.shape(), "coefficient shape mismatch");
            coefs[i] = Some(f);
        }
        self.blocks.push(SdpBlock { name: name.to_string(), constant, coefficients: coefs, margin });
    }

    pub fn objective_value(&self, x: &DVector<T>) -> T {
        self.objective.dot(x)
    }

    /// Writes `block row col unknown value` lines for the upper triangle of
    /// every nonzero matrix; unknown 0 is the constant, `i + 1` is `xᵢ`.
    /// Bounds are emitted as `bound - - unknown value`.
    pub fn write_triplets<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# unknowns {}", self.num_unknowns)?;
        let c: Vec<String> = self.objective.iter().map(|v| format!("{:e}", crate::scalar::to_f64(*v))).collect();
        writeln!(w, "# objective {}", c.join(" "))?;
        for (b, block) in self.blocks.iter().enumerate() {
            writeln!(w, "# block {} {} dim {} margin {:e}", b + 1, block.name, block.dim(), crate::scalar::to_f64(block.margin.max()))?;
            let mats = std::iter::once((0usize, &block.constant))
                .chain(block.coefficients.iter().enumerate().filter_map(|(i, f)| f.as_ref().map(|f| (i + 1, f))));
            for (k, m) in mats {
                for j in 0..m.ncols() {
                    for i in 0..=j {
                        let v = crate::scalar::to_f64(m[(i, j)]);
                        if v != 0.0 {
                            writeln!(w, "{} {} {} {} {:.17e}", b + 1, i + 1, j + 1, k, v)?;
                        }
                    }
                }
            }
        }
        for &(i, lb) in &self.bounds {
            writeln!(w, "bound - - {} {:.17e}", i + 1, crate::scalar::to_f64(lb))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution<T: Real> {
    pub x: DVector<T>,
    pub status: SdpStatus,
    pub objective: T,
    /// `λmax(F0 + Σ xᵢFᵢ)` per block, recomputed by [`verify`].
    pub max_eigenvalues: Vec<T>,
    pub iterations: usize,
    /// Optimal phase-1 level when the phase-1 problem was run.
    pub phase1_level: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub verbose: bool,
    /// Box `|x̃ᵢ| ≤ M` on the rescaled unknowns in the phase-1 problem.
    pub phase1_box: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 200, verbose: false, phase1_box: 1e7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification<T: Real> {
    pub max_eigenvalues: Vec<T>,
    /// `lᵢ - xᵢ` per bound; nonpositive when satisfied.
    pub bound_residuals: Vec<T>,
    pub objective: T,
}

impl<T: Real> Verification<T> {
    /// Largest block eigenvalue or bound violation.
    pub fn worst(&self) -> T {
        self.max_eigenvalues
            .iter()
            .chain(self.bound_residuals.iter())
            .fold(T::min_value().unwrap_or(lit(-1e300)), |a, &b| a.max(b))
    }
}

/// Recomputes block eigenvalues, bound residuals and the objective at `x`
/// from the problem data alone.
pub fn verify<T: Real>(sdp: &StandardSdp<T>, x: &DVector<T>) -> Verification<T> {
    Verification {
        max_eigenvalues: sdp.blocks.iter().map(|b| max_eigenvalue(&b.evaluate(x))).collect(),
        bound_residuals: sdp.bounds.iter().map(|&(i, lb)| lb - x[i]).collect(),
        objective: sdp.objective_value(x),
    }
}
