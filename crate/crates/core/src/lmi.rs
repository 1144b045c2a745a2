//! Modeling layer for linear matrix inequalities.
//!
//! Decision variables are symmetric matrices, rectangular matrices or
//! scalars. A constraint is a symmetric block matrix that is affine in the
//! variables and is required to be negative definite. Only the upper block
//! triangle is stored; the lower triangle is filled in by symmetry.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Symmetric(usize),
    Rectangular { rows: usize, cols: usize },
    Scalar,
}

impl VarKind {
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VarKind::Symmetric(n) => (n, n),
            VarKind::Rectangular { rows, cols } => (rows, cols),
            VarKind::Scalar => (1, 1),
        }
    }

    /// Number of scalar unknowns the variable contributes.
    pub fn num_unknowns(&self) -> usize {
        match *self {
            VarKind::Symmetric(n) => n * (n + 1) / 2,
            VarKind::Rectangular { rows, cols } => rows * cols,
            VarKind::Scalar => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVar<T> {
    pub name: String,
    pub kind: VarKind,
    /// Lower bound, only meaningful for scalar variables.
    pub lower_bound: Option<T>,
}

/// Lightweight handle returned by [`LmiProblem::add_var`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarRef {
    pub id: VarId,
    pub kind: VarKind,
}

/// One term `left · op(V) · right` placed in block `(row, col)`, where
/// `op` is the identity or transpose and a scalar `V = s` stands for `s·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term<T: Real> {
    pub left: DMatrix<T>,
    pub var: VarRef,
    pub right: DMatrix<T>,
    pub transpose: bool,
    pub block: (usize, usize),
}

impl<T: Real> Term<T> {
    fn contribution(&self, value: &DMatrix<T>) -> DMatrix<T> {
        match self.var.kind {
            VarKind::Scalar => (&self.left * &self.right) * value[(0, 0)],
            _ if self.transpose => &self.left * value.transpose() * &self.right,
            _ => &self.left * value * &self.right,
        }
    }
}

/// Values for decision variables, indexed by [`VarId`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment<T: Real> {
    values: Vec<Option<DMatrix<T>>>,
}

impl<T: Real> Assignment<T> {
    pub fn new() -> Self {
        Self { values: Vec::new() }
    }

    /// All variables of `problem` set to zero.
    pub fn zeros(problem: &LmiProblem<T>) -> Self {
        let mut a = Self::new();
        for (i, v) in problem.vars.iter().enumerate() {
            let (r, c) = v.kind.shape();
            a.set(VarId(i), DMatrix::zeros(r, c));
        }
        a
    }

    pub fn set(&mut self, id: VarId, value: DMatrix<T>) {
        if self.values.len() <= id.0 {
            self.values.resize(id.0 + 1, None);
        }
        self.values[id.0] = Some(value);
    }

    pub fn set_scalar(&mut self, id: VarId, value: T) {
        self.set(id, DMatrix::from_element(1, 1, value));
    }

    pub fn get(&self, id: VarId) -> Result<&DMatrix<T>> {
        self.values
            .get(id.0)
            .and_then(|v| v.as_ref())
            .ok_or(Error::MissingAssignment(id.0))
    }

    pub fn scalar(&self, id: VarId) -> Result<T> {
        Ok(self.get(id)?[(0, 0)])
    }

    /// Entry-wise `self + other` over the variables present in both.
    pub fn add(&self, other: &Self) -> Self {
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            })
            .collect();
        Self { values }
    }

    pub fn scale(&self, t: T) -> Self {
        Self { values: self.values.iter().map(|v| v.as_ref().map(|m| m * t)).collect() }
    }
}

/// Symmetric block matrix affine in the decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBlockExpr<T: Real> {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    terms: Vec<Term<T>>,
    constant: DMatrix<T>,
}

impl<T: Real> AffineBlockExpr<T> {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Dimension(format!("invalid block layout {sizes:?}")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(Self { sizes: sizes.to_vec(), offsets, terms: Vec::new(), constant: DMatrix::zeros(acc, acc) })
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn terms(&self) -> &[Term<T>] {
        &self.terms
    }

    pub fn constant(&self) -> &DMatrix<T> {
        &self.constant
    }

    fn check_block(&self, bi: usize, bj: usize) -> Result<(usize, usize)> {
        match (self.sizes.get(bi), self.sizes.get(bj)) {
            (Some(&r), Some(&c)) => Ok((r, c)),
            _ => Err(Error::Dimension(format!("block ({bi},{bj}) outside a {}-block layout", self.sizes.len()))),
        }
    }

    /// Adds `left · op(var) · right` to block `(bi, bj)`; the mirrored block
    /// receives the transpose automatically.
    pub fn add_term(
        &mut self,
        bi: usize,
        bj: usize,
        left: DMatrix<T>,
        var: VarRef,
        right: DMatrix<T>,
        transpose: bool,
    ) -> Result<()> {
        let (br, bc) = self.check_block(bi, bj)?;
        let (vr, vc) = match (var.kind, transpose) {
            (VarKind::Scalar, _) => (left.ncols(), right.nrows()),
            (k, false) => k.shape(),
            (k, true) => (k.shape().1, k.shape().0),
        };
        if left.nrows() != br || left.ncols() != vr || right.nrows() != vc || right.ncols() != bc {
            return Err(Error::Dimension(format!(
                "term {}x{} * [{vr}x{vc}] * {}x{} does not fit block ({bi},{bj}) of size {br}x{bc}",
                left.nrows(),
                left.ncols(),
                right.nrows(),
                right.ncols()
            )));
        }
        if matches!(var.kind, VarKind::Scalar) && vr != vc {
            return Err(Error::Dimension("scalar term needs a square identity".into()));
        }
        let term = if bi <= bj {
            Term { left, var, right, transpose, block: (bi, bj) }
        } else {
            // (L op(V) R)ᵀ = Rᵀ op(V)ᵀ Lᵀ
            Term { left: right.transpose(), var, right: left.transpose(), transpose: !transpose, block: (bj, bi) }
        };
        self.terms.push(term);
        Ok(())
    }

    /// Adds `sym(left · var · right) = M + Mᵀ` to diagonal block `bi`.
    pub fn add_sym_term(&mut self, bi: usize, left: DMatrix<T>, var: VarRef, right: DMatrix<T>) -> Result<()> {
        self.add_term(bi, bi, left.clone(), var, right.clone(), false)?;
        self.add_term(bi, bi, right.transpose(), var, left.transpose(), true)
    }

    /// `var · I` (scalar var) or `var` itself (matrix var) times `coef`.
    pub fn add_scaled(&mut self, bi: usize, bj: usize, var: VarRef, coef: T) -> Result<()> {
        let (br, bc) = self.check_block(bi, bj)?;
        let (vr, vc) = match var.kind {
            VarKind::Scalar => (br, bc),
            k => k.shape(),
        };
        if (vr, vc) != (br, bc) {
            return Err(Error::Dimension(format!(
                "variable of shape {vr}x{vc} placed in block ({bi},{bj}) of size {br}x{bc}"
            )));
        }
        let left = DMatrix::identity(br, vr) * coef;
        let right = DMatrix::identity(vc, bc);
        self.add_term(bi, bj, left, var, right, false)
    }

    /// Sets block `(bi, bj)` (and its mirror) of the constant part.
    pub fn set_constant(&mut self, bi: usize, bj: usize, value: DMatrix<T>) -> Result<()> {
        let (br, bc) = self.check_block(bi, bj)?;
        if value.shape() != (br, bc) {
            return Err(Error::Dimension(format!(
                "constant {:?} does not fit block ({bi},{bj}) of size {br}x{bc}",
                value.shape()
            )));
        }
        let (oi, oj) = (self.offsets[bi], self.offsets[bj]);
        self.constant.view_mut((oi, oj), (br, bc)).copy_from(&value);
        if bi != bj {
            self.constant.view_mut((oj, oi), (bc, br)).copy_from(&value.transpose());
        }
        Ok(())
    }

    fn place(&self, out: &mut DMatrix<T>, block: (usize, usize), m: &DMatrix<T>) {
        let (bi, bj) = block;
        let (oi, oj) = (self.offsets[bi], self.offsets[bj]);
        let mut v = out.view_mut((oi, oj), m.shape());
        v += m;
        if bi != bj {
            let mut v = out.view_mut((oj, oi), (m.ncols(), m.nrows()));
            v += m.transpose();
        }
    }

    /// Dense value of the expression without its constant part.
    pub fn linear_part(&self, assignment: &Assignment<T>) -> Result<DMatrix<T>> {
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for term in &self.terms {
            let value = assignment.get(term.var.id)?;
            self.place(&mut out, term.block, &term.contribution(value));
        }
        Ok(out)
    }

    /// Contribution of a single variable set to `value`, all others zero.
    pub fn var_contribution(&self, var: VarId, value: &DMatrix<T>) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for term in self.terms.iter().filter(|t| t.var.id == var) {
            self.place(&mut out, term.block, &term.contribution(value));
        }
        out
    }

    pub fn evaluate(&self, assignment: &Assignment<T>) -> Result<DMatrix<T>> {
        Ok(self.linear_part(assignment)? + &self.constant)
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().map(|t| t.var.id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T: Real> {
    pub name: String,
    pub expr: AffineBlockExpr<T>,
}

/// Minimize a linear objective subject to `expr ≺ 0` for every constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem<T: Real> {
    pub vars: Vec<DecisionVar<T>>,
    pub constraints: Vec<Constraint<T>>,
    /// `(var, weight)`: scalar value or trace of a square matrix variable.
    pub objective: Vec<(VarId, T)>,
}

impl<T: Real> Default for LmiProblem<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> LmiProblem<T> {
    pub fn new() -> Self {
        Self { vars: Vec::new(), constraints: Vec::new(), objective: Vec::new() }
    }

    pub fn add_var(&mut self, name: &str, kind: VarKind, lower_bound: Option<T>) -> Result<VarRef> {
        let (r, c) = kind.shape();
        if r == 0 || c == 0 {
            return Err(Error::Dimension(format!("variable {name} has an empty shape")));
        }
        if self.vars.iter().any(|v| v.name == name) {
            return Err(Error::DuplicateVariable(name.to_string()));
        }
        if lower_bound.is_some() && kind != VarKind::Scalar {
            return Err(Error::InvalidConfig(format!("lower bound on non-scalar variable {name}")));
        }
        self.vars.push(DecisionVar { name: name.to_string(), kind, lower_bound });
        Ok(VarRef { id: VarId(self.vars.len() - 1), kind })
    }

    pub fn var(&self, id: VarId) -> Result<&DecisionVar<T>> {
        self.vars.get(id.0).ok_or(Error::UnknownVariable(id.0))
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarRef> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .map(|i| VarRef { id: VarId(i), kind: self.vars[i].kind })
    }

    /// Total number of scalar unknowns.
    pub fn num_unknowns(&self) -> usize {
        self.vars.iter().map(|v| v.kind.num_unknowns()).sum()
    }

    /// Adds `expr ≺ 0` after checking that its variables exist and that it
    /// assembles to a symmetric matrix on a spread of test assignments.
    pub fn add_constraint(&mut self, name: &str, expr: AffineBlockExpr<T>) -> Result<()> {
        for id in expr.vars() {
            let declared = self.var(id)?;
            if let Some(term) = expr.terms.iter().find(|t| t.var.id == id) {
                if term.var.kind != declared.kind {
                    return Err(Error::Dimension(format!("variable {} used with a different shape", declared.name)));
                }
            }
        }
        for probe in 0..3 {
            let a = self.probe_assignment(probe);
            let m = expr.evaluate(&a)?;
            let asym = (&m - m.transpose()).amax();
            let scale = m.amax().max(T::one());
            if asym > lit::<T>(1e-12) * scale {
                return Err(Error::Dimension(format!("constraint {name} is not symmetric (residual {asym})")));
            }
        }
        self.constraints.push(Constraint { name: name.to_string(), expr });
        Ok(())
    }

    /// Deterministic, non-degenerate values for every variable.
    pub fn probe_assignment(&self, seed: usize) -> Assignment<T> {
        let mut a = Assignment::new();
        let mut k = seed * 7919 + 1;
        for (i, v) in self.vars.iter().enumerate() {
            let (r, c) = v.kind.shape();
            let mut m = DMatrix::from_fn(r, c, |_, _| {
                k += 1;
                lit::<T>(((k as f64) * 12.9898).sin() * 2.0)
            });
            if let VarKind::Symmetric(_) = v.kind {
                m = (&m + m.transpose()) * lit::<T>(0.5);
            }
            a.set(VarId(i), m);
        }
        a
    }

    pub fn set_objective(&mut self, terms: Vec<(VarRef, T)>) -> Result<()> {
        for (v, _) in &terms {
            let declared = self.var(v.id)?;
            if let VarKind::Rectangular { rows, cols } = declared.kind {
                if rows != cols {
                    return Err(Error::Dimension(format!("trace of non-square variable {}", declared.name)));
                }
            }
        }
        self.objective = terms.into_iter().map(|(v, w)| (v.id, w)).collect();
        Ok(())
    }

    pub fn objective_value(&self, assignment: &Assignment<T>) -> Result<T> {
        let mut acc = T::zero();
        for &(id, w) in &self.objective {
            acc += assignment.get(id)?.trace() * w;
        }
        Ok(acc)
    }

    /// Largest eigenvalue of each constraint at `assignment`.
    pub fn max_eigenvalues(&self, assignment: &Assignment<T>) -> Result<Vec<T>> {
        self.constraints
            .iter()
            .map(|c| Ok(max_eigenvalue(&c.expr.evaluate(assignment)?)))
            .collect()
    }
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    let s = (m + m.transpose()) * lit::<T>(0.5);
    s.symmetric_eigenvalues().max()
}

fn inverse_pd<T: Real>(m: &DMatrix<T>, what: &str) -> Result<DMatrix<T>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::InvalidConfig(format!("{what} must be positive definite")))
}

/// Variables of the guaranteed-cost program (in-plane or coupled).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GuaranteedCostVars {
    pub x: VarRef,
    pub y: VarRef,
    pub eps: VarRef,
    /// Inverse cost bound `θ = 1/ρ`.
    pub theta: VarRef,
    pub sigma: VarRef,
}

/// Variables of the H∞ program.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HinfVars {
    pub x: VarRef,
    pub y: VarRef,
    pub eps: VarRef,
    /// `g = γ²`.
    pub g: VarRef,
}

/// Data of a guaranteed-cost program with input saturation, in any dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteedCostData<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub e1: DMatrix<T>,
    pub e2: DMatrix<T>,
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
    pub x0: DVector<T>,
    pub u_max: Vec<T>,
    /// Lower bound on `θ`; `None` keeps only `θ > 0`.
    pub theta_floor: Option<T>,
}

/// Builds the robust guaranteed-cost program:
///
/// ```text
/// [ sym(AX − BY) + εE1E1ᵀ   XE2ᵀ   Yᵀ     X    ]
/// [ *                      −εI    0      0    ]  ≺ 0
/// [ *                       *    −R⁻¹    0    ]
/// [ *                       *     *     −Q⁻¹  ]
///
/// [ −θ  θx0ᵀ ]  ≺ 0        [ −θI  UᵢY   ]  ≺ 0  for each input axis i
/// [ θx0  −X  ]             [  *  −uᵢ²X  ]
///
/// [ −σ  1 ]  ≺ 0,   −X ≺ 0,   minimize σ
/// [  1 −θ ]
/// ```
pub fn build_guaranteed_cost<T: Real>(data: &GuaranteedCostData<T>) -> Result<(LmiProblem<T>, GuaranteedCostVars)> {
    let n = data.a.nrows();
    let m = data.b.ncols();
    let ke = data.e1.ncols();
    let ke2 = data.e2.nrows();
    if data.a.ncols() != n
        || data.b.nrows() != n
        || data.e1.nrows() != n
        || data.e2.ncols() != n
        || ke != ke2
        || data.q.shape() != (n, n)
        || data.r.shape() != (m, m)
        || data.x0.len() != n
        || data.u_max.len() != m
    {
        return Err(Error::Dimension(format!(
            "guaranteed-cost data: A {:?}, B {:?}, E1 {:?}, E2 {:?}, Q {:?}, R {:?}, x0 {}, u_max {}",
            data.a.shape(),
            data.b.shape(),
            data.e1.shape(),
            data.e2.shape(),
            data.q.shape(),
            data.r.shape(),
            data.x0.len(),
            data.u_max.len()
        )));
    }
    if data.u_max.iter().any(|&u| !(u > T::zero())) {
        return Err(Error::InvalidConfig("thrust bounds must be positive".into()));
    }
    let q_inv = inverse_pd(&data.q, "Q")?;
    let r_inv = inverse_pd(&data.r, "R")?;

    let mut p = LmiProblem::new();
    let x = p.add_var("X", VarKind::Symmetric(n), None)?;
    let y = p.add_var("Y", VarKind::Rectangular { rows: m, cols: n }, None)?;
    let eps = p.add_var("eps", VarKind::Scalar, Some(T::zero()))?;
    let theta = p.add_var("theta", VarKind::Scalar, Some(data.theta_floor.unwrap_or(T::zero())))?;
    let sigma = p.add_var("sigma", VarKind::Scalar, None)?;
    let id = |k: usize| DMatrix::<T>::identity(k, k);

    let mut main = AffineBlockExpr::new(&[n, ke, m, n])?;
    main.add_sym_term(0, data.a.clone(), x, id(n))?;
    main.add_sym_term(0, -data.b.clone(), y, id(n))?;
    main.add_term(0, 0, data.e1.clone(), eps, data.e1.transpose(), false)?;
    main.add_term(0, 1, id(n), x, data.e2.transpose(), false)?;
    main.add_term(0, 2, id(n), y, id(m), true)?;
    main.add_scaled(0, 3, x, T::one())?;
    main.add_scaled(1, 1, eps, -T::one())?;
    main.set_constant(2, 2, -r_inv)?;
    main.set_constant(3, 3, -q_inv)?;
    p.add_constraint("cost", main)?;

    let mut init = AffineBlockExpr::new(&[1, n])?;
    init.add_scaled(0, 0, theta, -T::one())?;
    init.add_term(0, 1, id(1), theta, DMatrix::from_row_slice(1, n, data.x0.as_slice()), false)?;
    init.add_scaled(1, 1, x, -T::one())?;
    p.add_constraint("initial", init)?;

    for (i, &u) in data.u_max.iter().enumerate() {
        let mut sel = DMatrix::zeros(m, m);
        sel[(i, i)] = T::one();
        let mut sat = AffineBlockExpr::new(&[m, n])?;
        sat.add_scaled(0, 0, theta, -T::one())?;
        sat.add_term(0, 1, sel, y, id(n), false)?;
        sat.add_scaled(1, 1, x, -(u * u))?;
        p.add_constraint(&format!("saturation{i}"), sat)?;
    }

    let mut bound = AffineBlockExpr::new(&[1, 1])?;
    bound.add_scaled(0, 0, sigma, -T::one())?;
    bound.add_scaled(1, 1, theta, -T::one())?;
    bound.set_constant(0, 1, DMatrix::from_element(1, 1, T::one()))?;
    p.add_constraint("bound", bound)?;

    let mut pos = AffineBlockExpr::new(&[n])?;
    pos.add_scaled(0, 0, x, -T::one())?;
    p.add_constraint("positivity", pos)?;

    p.set_objective(vec![(sigma, T::one())])?;
    Ok((p, GuaranteedCostVars { x, y, eps, theta, sigma }))
}

/// Builds the in-plane program from the split model.
pub fn build_theorem1<T: Real>(
    model: &crate::dynamics::InPlaneModel<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    p0: &DVector<T>,
    u_max: [T; 2],
    theta_floor: Option<T>,
) -> Result<(LmiProblem<T>, GuaranteedCostVars)> {
    build_guaranteed_cost(&GuaranteedCostData {
        a: to_dyn(&model.a_p),
        b: to_dyn(&model.b_p),
        e1: to_dyn(&model.e_p1),
        e2: to_dyn(&model.e_p2),
        q: q.clone(),
        r: r.clone(),
        x0: p0.clone(),
        u_max: u_max.to_vec(),
        theta_floor,
    })
}

/// Builds the coupled 6-state program using the block factorization of ΔA.
pub fn build_coupled<T: Real>(
    plant: &crate::dynamics::PlantModel<T>,
    q: &DMatrix<T>,
    r: &DMatrix<T>,
    x0: &DVector<T>,
    u_max: [T; 3],
    theta_floor: Option<T>,
) -> Result<(LmiProblem<T>, GuaranteedCostVars)> {
    build_guaranteed_cost(&GuaranteedCostData {
        a: to_dyn(&plant.a),
        b: to_dyn(&plant.b),
        e1: to_dyn(&plant.e1()),
        e2: to_dyn(&plant.e2()),
        q: q.clone(),
        r: r.clone(),
        x0: x0.clone(),
        u_max: u_max.to_vec(),
        theta_floor,
    })
}

/// Data of the H∞ program.
#[derive(Debug, Clone, PartialEq)]
pub struct HinfData<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub e1: DMatrix<T>,
    pub e2: DMatrix<T>,
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
}

/// Builds the robust H∞ program with blocks sized `[n, m, k, k, m, n]`:
///
/// ```text
/// [ sym(AX − BY) + εE1E1ᵀ   B    XE2ᵀ   0     Yᵀ    X    ]
/// [ *                      −gI   0      0     0     0    ]
/// [ *                       *   −εI     0     0     0    ]  ≺ 0,  −X ≺ 0,  minimize g
/// [ *                       *    *     −εI    0     0    ]
/// [ *                       *    *      *    −R⁻¹   0    ]
/// [ *                       *    *      *     *    −Q⁻¹  ]
/// ```
pub fn build_hinf<T: Real>(data: &HinfData<T>) -> Result<(LmiProblem<T>, HinfVars)> {
    let n = data.a.nrows();
    let m = data.b.ncols();
    let k = data.e1.ncols();
    if data.a.ncols() != n
        || data.b.nrows() != n
        || data.e1.nrows() != n
        || data.e2.shape() != (k, n)
        || data.q.shape() != (n, n)
        || data.r.shape() != (m, m)
    {
        return Err(Error::Dimension("H-infinity data shapes are inconsistent".into()));
    }
    let q_inv = inverse_pd(&data.q, "Q")?;
    let r_inv = inverse_pd(&data.r, "R")?;

    let mut p = LmiProblem::new();
    let x = p.add_var("X", VarKind::Symmetric(n), None)?;
    let y = p.add_var("Y", VarKind::Rectangular { rows: m, cols: n }, None)?;
    let eps = p.add_var("eps", VarKind::Scalar, Some(T::zero()))?;
    let g = p.add_var("g", VarKind::Scalar, Some(T::zero()))?;
    let id = |k: usize| DMatrix::<T>::identity(k, k);

    let mut main = AffineBlockExpr::new(&[n, m, k, k, m, n])?;
    main.add_sym_term(0, data.a.clone(), x, id(n))?;
    main.add_sym_term(0, -data.b.clone(), y, id(n))?;
    main.add_term(0, 0, data.e1.clone(), eps, data.e1.transpose(), false)?;
    main.set_constant(0, 1, data.b.clone())?;
    main.add_term(0, 2, id(n), x, data.e2.transpose(), false)?;
    main.add_term(0, 4, id(n), y, id(m), true)?;
    main.add_scaled(0, 5, x, T::one())?;
    main.add_scaled(1, 1, g, -T::one())?;
    main.add_scaled(2, 2, eps, -T::one())?;
    main.add_scaled(3, 3, eps, -T::one())?;
    main.set_constant(4, 4, -r_inv)?;
    main.set_constant(5, 5, -q_inv)?;
    p.add_constraint("hinf", main)?;

    let mut pos = AffineBlockExpr::new(&[n])?;
    pos.add_scaled(0, 0, x, -T::one())?;
    p.add_constraint("positivity", pos)?;

    p.set_objective(vec![(g, T::one())])?;
    Ok((p, HinfVars { x, y, eps, g }))
}

/// Builds the out-of-plane program from the split model.
pub fn build_theorem2<T: Real>(
    model: &crate::dynamics::OutOfPlaneModel<T>,
    q: &DMatrix<T>,
    r: T,
) -> Result<(LmiProblem<T>, HinfVars)> {
    if !(r > T::zero()) {
        return Err(Error::InvalidConfig("R_q must be positive".into()));
    }
    build_hinf(&HinfData {
        a: to_dyn(&model.a_q),
        b: to_dyn(&model.b_q),
        e1: to_dyn(&model.e_q1),
        e2: to_dyn(&model.e_q2),
        q: q.clone(),
        r: DMatrix::from_element(1, 1, r),
    })
}

pub fn to_dyn<T: Real, R: nalgebra::Dim, C: nalgebra::Dim, S>(m: &nalgebra::Matrix<T, R, C, S>) -> DMatrix<T>
where
    S: nalgebra::RawStorage<T, R, C>,
{
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_plant, split_in_plane, split_out_of_plane, ChaserConfig, OrbitConfig};

    fn models(e: f64) -> (crate::dynamics::PlantModel<f64>, crate::dynamics::InPlaneModel<f64>, crate::dynamics::OutOfPlaneModel<f64>) {
        let o = OrbitConfig::earth(7082.253e3, e).unwrap();
        let c = ChaserConfig::new(500.0, 15.0, 15.0, 5.0).unwrap();
        let p = build_plant(&o, &c);
        let ip = split_in_plane(&p);
        let q = split_out_of_plane(&p);
        (p, ip, q)
    }

    fn p0() -> DVector<f64> {
        DVector::from_vec(vec![-5000.0, 5000.0, 5.0, -5.0])
    }

    fn theorem1(e: f64) -> (LmiProblem<f64>, GuaranteedCostVars, crate::dynamics::InPlaneModel<f64>) {
        let (_, ip, _) = models(e);
        let (p, v) = build_theorem1(&ip, &DMatrix::identity(4, 4), &DMatrix::identity(2, 2), &p0(), [15.0, 15.0], None).unwrap();
        (p, v, ip)
    }

    #[test]
    fn unknown_counts() {
        let (p, _, _) = theorem1(0.05);
        assert_eq!(p.num_unknowns(), 21);
        assert_eq!(p.constraints.len(), 6);
        assert_eq!(p.constraints[0].expr.dim(), 14);
        assert_eq!(p.constraints[1].expr.dim(), 5);
        assert_eq!(p.constraints[2].expr.dim(), 6);
        let (_, _, q) = models(0.05);
        let (p2, _) = build_theorem2(&q, &DMatrix::identity(2, 2), 1.0).unwrap();
        assert_eq!(p2.num_unknowns(), 7);
        assert_eq!(p2.constraints[0].expr.dim(), 10);
        let (pl, _, _) = models(0.05);
        let (pc, _) =
            build_coupled(&pl, &DMatrix::identity(6, 6), &DMatrix::identity(3, 3), &DVector::zeros(6), [15.0, 15.0, 5.0], None)
                .unwrap();
        assert_eq!(pc.num_unknowns(), 42);
        assert_eq!(pc.constraints[0].expr.dim(), 21);
    }

    #[test]
    fn duplicate_and_dimension_errors() {
        let mut p = LmiProblem::<f64>::new();
        p.add_var("X", VarKind::Symmetric(2), None).unwrap();
        assert_eq!(p.add_var("X", VarKind::Scalar, None), Err(Error::DuplicateVariable("X".into())));
        assert!(p.add_var("Z", VarKind::Symmetric(0), None).is_err());
        let x = p.var_by_name("X").unwrap();
        let mut e = AffineBlockExpr::new(&[3]).unwrap();
        assert!(e.add_scaled(0, 0, x, 1.0).is_err());
        assert!(e.set_constant(0, 0, DMatrix::zeros(2, 2)).is_err());
        assert!(e.add_scaled(1, 0, x, 1.0).is_err());
    }

    #[test]
    fn zero_assignment_gives_constant() {
        let (p, _, _) = theorem1(0.05);
        let z = Assignment::zeros(&p);
        for c in &p.constraints {
            assert_eq!(c.expr.evaluate(&z).unwrap(), *c.expr.constant());
        }
    }

    #[test]
    fn missing_assignment_is_reported() {
        let (p, _, _) = theorem1(0.05);
        let a = Assignment::new();
        assert_eq!(p.constraints[0].expr.evaluate(&a), Err(Error::MissingAssignment(0)));
    }

    #[test]
    fn cost_block_layout() {
        let (p, v, ip) = theorem1(0.05);
        let mut a = Assignment::zeros(&p);
        let y = DMatrix::from_fn(2, 4, |i, j| (i * 4 + j) as f64 + 1.0);
        a.set(v.y.id, y.clone());
        let m = p.constraints[0].expr.evaluate(&a).unwrap();
        // block (1,3) is Yᵀ
        assert_eq!(m.view((0, 8), (4, 2)).into_owned(), y.transpose());
        let bp = to_dyn(&ip.b_p);
        let expect = -(&bp * &y) - (&bp * &y).transpose();
        assert!((m.view((0, 0), (4, 4)).into_owned() - expect).amax() < 1e-15);
    }

    #[test]
    fn hand_assembled_cost_lmi() {
        // X = I, Y = 0, ε = 1 assembled independently
        let (p, v, ip) = theorem1(0.05);
        let mut a = Assignment::zeros(&p);
        a.set(v.x.id, DMatrix::identity(4, 4));
        a.set_scalar(v.eps.id, 1.0);
        let m = p.constraints[0].expr.evaluate(&a).unwrap();
        let ap = to_dyn(&ip.a_p);
        let e1 = to_dyn(&ip.e_p1);
        let e2 = to_dyn(&ip.e_p2);
        let mut h = DMatrix::<f64>::zeros(14, 14);
        let b11 = &ap + ap.transpose() + &e1 * e1.transpose();
        h.view_mut((0, 0), (4, 4)).copy_from(&b11);
        h.view_mut((0, 4), (4, 4)).copy_from(&e2.transpose());
        h.view_mut((4, 0), (4, 4)).copy_from(&e2);
        h.view_mut((0, 10), (4, 4)).copy_from(&DMatrix::identity(4, 4));
        h.view_mut((10, 0), (4, 4)).copy_from(&DMatrix::identity(4, 4));
        for i in 4..14 {
            h[(i, i)] = -1.0;
        }
        assert!((m - h).amax() < 1e-15);
    }

    #[test]
    fn circular_orbit_drops_uncertainty() {
        let (p, v, ip) = theorem1(0.0);
        let mut a = Assignment::zeros(&p);
        a.set_scalar(v.eps.id, 3.0);
        a.set(v.x.id, DMatrix::identity(4, 4));
        let m = p.constraints[0].expr.evaluate(&a).unwrap();
        let ap = to_dyn(&ip.a_p);
        assert!((m.view((0, 0), (4, 4)).into_owned() - (&ap + ap.transpose())).amax() < 1e-18);
    }

    #[test]
    fn hinf_layout() {
        let (_, _, q) = models(0.05);
        let (p, v) = build_theorem2(&q, &DMatrix::identity(2, 2), 1.0).unwrap();
        let z = Assignment::zeros(&p);
        let m = p.constraints[0].expr.evaluate(&z).unwrap();
        assert_eq!(m[(1, 2)], 0.002);
        assert_eq!(m[(7, 7)], -1.0);
        let mut a = Assignment::zeros(&p);
        a.set_scalar(v.eps.id, 2.0);
        a.set_scalar(v.g.id, 5.0);
        let m = p.constraints[0].expr.evaluate(&a).unwrap();
        assert_eq!(m[(2, 2)], -5.0);
        for i in 3..7 {
            assert_eq!(m[(i, i)], -2.0);
        }
    }

    #[test]
    fn bounded_real_reduction() {
        // E = 0: the LMI is the bounded-real lemma for (A − BK, B, [Q½; R½K]).
        let (_, _, q) = models(0.0);
        let (p, v) = build_theorem2(&q, &DMatrix::identity(2, 2), 1.0).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
        let k = DMatrix::from_row_slice(1, 2, &[2.0, 3.0]);
        let y = &k * &x;
        let mut a = Assignment::zeros(&p);
        a.set(v.x.id, x.clone());
        a.set(v.y.id, y);
        a.set_scalar(v.eps.id, 1.0);
        a.set_scalar(v.g.id, 1e6);
        let lmi = p.constraints[0].expr.evaluate(&a).unwrap();
        // textbook form on P = X⁻¹
        let aq = to_dyn(&q.a_q);
        let bq = to_dyn(&q.b_q);
        let pm = x.clone().try_inverse().unwrap();
        let acl = &aq - &bq * &k;
        let brl = &pm * &acl + acl.transpose() * &pm + DMatrix::identity(2, 2) + k.transpose() * &k
            + (&pm * &bq) * (&pm * &bq).transpose() / 1e6;
        let lmi_ok = max_eigenvalue(&lmi) < 0.0;
        let brl_ok = max_eigenvalue(&brl) < 0.0;
        assert_eq!(lmi_ok, brl_ok);
    }

    #[test]
    fn affine_in_variables() {
        let (p, _, _) = theorem1(0.05);
        let a = p.probe_assignment(1);
        let b = p.probe_assignment(2);
        let z = Assignment::zeros(&p);
        for c in &p.constraints {
            let lhs = c.expr.evaluate(&a.add(&b)).unwrap() + c.expr.evaluate(&z).unwrap();
            let rhs = c.expr.evaluate(&a).unwrap() + c.expr.evaluate(&b).unwrap();
            assert!((&lhs - &rhs).amax() <= 1e-12 * rhs.amax().max(1.0));
            let lin = c.expr.linear_part(&a).unwrap() * 3.0;
            assert!((c.expr.linear_part(&a.scale(3.0)).unwrap() - lin).amax() <= 1e-12 * c.expr.linear_part(&a).unwrap().amax().max(1.0) * 3.0);
        }
    }

    #[test]
    fn coupled_contains_in_plane_block() {
        let (pl, ip, _) = models(0.05);
        let (pc, vc) =
            build_coupled(&pl, &DMatrix::identity(6, 6), &DMatrix::identity(3, 3), &DVector::zeros(6), [15.0, 15.0, 5.0], None)
                .unwrap();
        let (pp, vp) = build_theorem1(&ip, &DMatrix::identity(4, 4), &DMatrix::identity(2, 2), &p0(), [15.0, 15.0], None).unwrap();
        let xp = DMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 } else { 0.1 });
        let yp = DMatrix::from_fn(2, 4, |i, j| 0.3 * i as f64 - 0.2 * j as f64);
        let idx = crate::dynamics::IN_PLANE_INDICES;
        let mut x6 = DMatrix::identity(6, 6);
        let mut y6 = DMatrix::zeros(3, 6);
        for (i, &ri) in idx.iter().enumerate() {
            for (j, &cj) in idx.iter().enumerate() {
                x6[(ri, cj)] = xp[(i, j)];
            }
            for r in 0..2 {
                y6[(r, ri)] = yp[(r, i)];
            }
        }
        let mut ac = Assignment::zeros(&pc);
        ac.set(vc.x.id, x6);
        ac.set(vc.y.id, y6);
        ac.set_scalar(vc.eps.id, 0.7);
        let mut ap = Assignment::zeros(&pp);
        ap.set(vp.x.id, xp);
        ap.set(vp.y.id, yp);
        ap.set_scalar(vp.eps.id, 0.7);
        let mc = pc.constraints[0].expr.evaluate(&ac).unwrap();
        let mp = pp.constraints[0].expr.evaluate(&ap).unwrap();
        for (i, &ri) in idx.iter().enumerate() {
            for (j, &cj) in idx.iter().enumerate() {
                assert!((mc[(ri, cj)] - mp[(i, j)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn initial_condition_meaning() {
        // feasible (X, θ) for the initial-state LMI gives p0ᵀX⁻¹p0 ≤ 1/θ
        let (p, v, _) = theorem1(0.05);
        let x0 = p0();
        let x = &x0 * x0.transpose() + DMatrix::identity(4, 4) * 10.0;
        let mut a = Assignment::zeros(&p);
        a.set(v.x.id, x.clone());
        for &theta in &[0.5, 0.99, 1.01, 2.0] {
            a.set_scalar(v.theta.id, theta);
            let feasible = max_eigenvalue(&p.constraints[1].expr.evaluate(&a).unwrap()) < 0.0;
            let v0 = (x0.transpose() * x.clone().try_inverse().unwrap() * &x0)[(0, 0)];
            assert_eq!(feasible, v0 < 1.0 / theta, "θ = {theta}");
        }
    }
}
