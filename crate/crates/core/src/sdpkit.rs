//! Semidefinite feasibility/optimization layer shared by the phase and gain
//! modules.
//!
//! Problems are affine in a vector of real scalar variables; Hermitian matrix
//! variables are parameterized by `d^2` real coordinates against a fixed
//! Hermitian basis, so matrix certificates can be read back exactly. Complex
//! Hermitian LMI data is passed to the real backend (Clarabel) through the
//! doubling embedding `M -> [[Re M, -Im M], [Im M, Re M]]`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{self, NonnegativeConeT, PSDTriangleConeT},
};
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::matnum::{lambda_max, lambda_min, ComplexMatrix};
use crate::{Error, Result};

/// Default feasibility tolerance used when classifying solutions.
pub const FEAS_TOL: f64 = 1e-8;

/// Index of a scalar decision variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarId(pub(crate) usize);

/// Constraint sense of a Hermitian LMI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmiSense {
    /// `F(x)` negative semidefinite.
    NegSemidef,
    /// `F(x)` positive semidefinite.
    PosSemidef,
}

/// One affine Hermitian matrix inequality
/// `constant + sum_i x_i * coefficient_i  (<= or >=) 0`.
#[derive(Clone, Debug)]
pub struct HermitianLmiTerm {
    pub coefficients: Vec<(VarId, ComplexMatrix)>,
    pub constant: ComplexMatrix,
    pub sense: LmiSense,
}

impl HermitianLmiTerm {
    pub fn new(constant: ComplexMatrix, sense: LmiSense) -> Self {
        HermitianLmiTerm {
            coefficients: Vec::new(),
            constant,
            sense,
        }
    }

    pub fn with(mut self, var: VarId, coefficient: ComplexMatrix) -> Self {
        self.coefficients.push((var, coefficient));
        self
    }

    fn dim(&self) -> usize {
        self.constant.nrows()
    }

    /// Evaluates `constant + sum x_i coefficient_i` at `x`.
    fn evaluate(&self, x: &[f64]) -> ComplexMatrix {
        let mut m = self.constant.clone();
        for (var, coeff) in &self.coefficients {
            m += coeff.map(|z| z * x[var.0]);
        }
        m
    }

    fn validate(&self, num_vars: usize) -> Result<()> {
        let d = self.dim();
        check_hermitian(&self.constant)?;
        for (var, coeff) in &self.coefficients {
            if var.0 >= num_vars {
                return Err(Error::Dimension(format!(
                    "LMI references undeclared variable {}",
                    var.0
                )));
            }
            if coeff.nrows() != d || coeff.ncols() != d {
                return Err(Error::Dimension(format!(
                    "LMI coefficient is {}x{}, expected {}x{}",
                    coeff.nrows(),
                    coeff.ncols(),
                    d,
                    d
                )));
            }
            check_hermitian(coeff)?;
        }
        Ok(())
    }
}

fn hermitian_defect(m: &ComplexMatrix) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "Hermitian matrix must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = 1.0 + m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if hermitian_defect(m) > 1e-12 * scale {
        return Err(Error::Domain("matrix is not Hermitian".into()));
    }
    Ok(())
}

/// Embeds a Hermitian matrix as the real symmetric `[[Re, -Im], [Im, Re]]`.
///
/// The embedding preserves definiteness; every eigenvalue of the input
/// appears in the output with doubled multiplicity.
pub fn embed_hermitian_to_real(m: &ComplexMatrix) -> Result<DMatrix<f64>> {
    check_hermitian(m)?;
    let d = m.nrows();
    let mut out = DMatrix::<f64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + d, j + d)] = z.re;
            out[(i, j + d)] = -z.im;
            out[(i + d, j)] = z.im;
        }
    }
    Ok(out)
}

/// Handle to a Hermitian matrix variable: `dim^2` scalar coordinates.
///
/// Coordinate layout: the `dim` diagonal entries first, then for each
/// upper-triangle position (column-major) the real and imaginary parts.
#[derive(Clone, Debug)]
pub struct HermitianVar {
    pub dim: usize,
    first: usize,
}

impl HermitianVar {
    pub fn num_coordinates(dim: usize) -> usize {
        dim * dim
    }

    pub fn coordinate_ids(&self) -> Vec<VarId> {
        (0..Self::num_coordinates(self.dim))
            .map(|k| VarId(self.first + k))
            .collect()
    }

    /// Basis matrix multiplying coordinate `k`.
    pub fn basis(&self, k: usize) -> ComplexMatrix {
        let d = self.dim;
        let mut m = ComplexMatrix::zeros(d, d);
        if k < d {
            m[(k, k)] = Complex64::new(1.0, 0.0);
            return m;
        }
        let mut idx = k - d;
        for col in 1..d {
            for row in 0..col {
                if idx == 0 {
                    m[(row, col)] = Complex64::new(1.0, 0.0);
                    m[(col, row)] = Complex64::new(1.0, 0.0);
                    return m;
                }
                idx -= 1;
                if idx == 0 {
                    m[(row, col)] = Complex64::new(0.0, 1.0);
                    m[(col, row)] = Complex64::new(0.0, -1.0);
                    return m;
                }
                idx -= 1;
            }
        }
        unreachable!("coordinate index out of range");
    }

    /// Reconstructs the Hermitian matrix from solved coordinate values.
    pub fn value(&self, values: &[f64]) -> ComplexMatrix {
        let d = self.dim;
        let mut m = ComplexMatrix::zeros(d, d);
        for k in 0..Self::num_coordinates(d) {
            m += self.basis(k).map(|z| z * values[self.first + k]);
        }
        m
    }
}

/// Linear objective or pure feasibility.
#[derive(Clone, Debug)]
pub enum Objective {
    Feasibility,
    Minimize(Vec<(VarId, f64)>),
    Maximize(Vec<(VarId, f64)>),
}

/// Solution status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

/// Solver outcome.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub objective_value: f64,
    pub values: Vec<f64>,
    pub max_constraint_violation: f64,
}

impl SdpSolution {
    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }
}

/// An SDP: scalar variables (optionally sign-constrained), Hermitian matrix
/// variables, affine Hermitian LMI constraints, linear objective.
#[derive(Clone, Debug, Default)]
pub struct SdpProblem {
    num_vars: usize,
    nonneg: Vec<usize>,
    constraints: Vec<HermitianLmiTerm>,
    objective: Option<Objective>,
}

impl SdpProblem {
    pub fn new() -> Self {
        SdpProblem::default()
    }

    pub fn scalar(&mut self) -> VarId {
        let id = VarId(self.num_vars);
        self.num_vars += 1;
        id
    }

    pub fn nonneg_scalar(&mut self) -> VarId {
        let id = self.scalar();
        self.nonneg.push(id.0);
        id
    }

    /// Declares a Hermitian matrix variable; with `psd` the constraint
    /// `variable >= 0` is added automatically.
    pub fn hermitian(&mut self, dim: usize, psd: bool) -> HermitianVar {
        let first = self.num_vars;
        self.num_vars += HermitianVar::num_coordinates(dim);
        let var = HermitianVar { dim, first };
        if psd {
            let mut term =
                HermitianLmiTerm::new(ComplexMatrix::zeros(dim, dim), LmiSense::PosSemidef);
            for (k, id) in var.coordinate_ids().into_iter().enumerate() {
                term = term.with(id, var.basis(k));
            }
            self.constraints.push(term);
        }
        var
    }

    pub fn add_lmi(&mut self, term: HermitianLmiTerm) -> Result<()> {
        term.validate(self.num_vars)?;
        self.constraints.push(term);
        Ok(())
    }

    pub fn set_objective(&mut self, objective: Objective) {
        self.objective = Some(objective);
    }

    fn objective_coeffs(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.num_vars];
        match self.objective.as_ref().unwrap_or(&Objective::Feasibility) {
            Objective::Feasibility => {}
            Objective::Minimize(terms) => {
                for (var, c) in terms {
                    q[var.0] += c;
                }
            }
            Objective::Maximize(terms) => {
                for (var, c) in terms {
                    q[var.0] -= c;
                }
            }
        }
        q
    }

    /// Solves the problem. Backend failures surface as `NumericalTrouble`,
    /// never as a panic or `Err`.
    pub fn solve(&self) -> SdpSolution {
        self.solve_inner().unwrap_or(SdpSolution {
            status: SdpStatus::NumericalTrouble,
            objective_value: f64::NAN,
            values: vec![0.0; self.num_vars],
            max_constraint_violation: f64::NAN,
        })
    }

    fn solve_inner(&self) -> Result<SdpSolution> {
        let n = self.num_vars;
        if n == 0 {
            return Err(Error::Domain("SDP has no variables".into()));
        }

        // Row blocks: one nonnegative cone for sign constraints, then one PSD
        // triangle cone per LMI (real-embedded when data is complex).
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut b: Vec<f64> = Vec::new();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut row = 0usize;

        if !self.nonneg.is_empty() {
            cones.push(NonnegativeConeT(self.nonneg.len()));
            for &var in &self.nonneg {
                cols[var].push((row, -1.0));
                b.push(0.0);
                row += 1;
            }
        }

        for term in &self.constraints {
            let complex = is_complex(&term.constant)
                || term.coefficients.iter().any(|(_, m)| is_complex(m));
            let sign = match term.sense {
                LmiSense::NegSemidef => -1.0,
                LmiSense::PosSemidef => 1.0,
            };
            let constant = realize(&term.constant, complex);
            let d = constant.nrows();
            cones.push(PSDTriangleConeT(d));
            let svec_len = d * (d + 1) / 2;
            let sconst = svec(&constant);
            for v in sconst {
                b.push(sign * v);
            }
            for (var, coeff) in &term.coefficients {
                let sc = svec(&realize(coeff, complex));
                for (k, v) in sc.into_iter().enumerate() {
                    if v != 0.0 {
                        cols[var.0].push((row + k, -sign * v));
                    }
                }
            }
            row += svec_len;
        }

        let a = csc_from_columns(row, n, cols);
        let p = CscMatrix::<f64>::zeros((n, n));
        let q = self.objective_coeffs();

        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_gap_abs(1e-9)
            .tol_gap_rel(1e-9)
            .tol_feas(1e-9)
            .max_iter(200)
            .build()
            .map_err(|e| Error::SdpUnknown(format!("settings: {e}")))?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, settings)
            .map_err(|e| Error::SdpUnknown(format!("setup: {e:?}")))?;
        solver.solve();

        let x = solver.solution.x.clone();
        let status = match solver.solution.status {
            SolverStatus::Solved => SdpStatus::Optimal,
            SolverStatus::PrimalInfeasible => SdpStatus::Infeasible,
            SolverStatus::DualInfeasible => SdpStatus::Unbounded,
            SolverStatus::AlmostSolved => {
                if self.violation(&x) <= FEAS_TOL {
                    SdpStatus::Optimal
                } else {
                    SdpStatus::NumericalTrouble
                }
            }
            _ => SdpStatus::NumericalTrouble,
        };
        let violation = if matches!(status, SdpStatus::Optimal) {
            self.violation(&x)
        } else {
            f64::NAN
        };
        let status = if matches!(status, SdpStatus::Optimal) && violation > 10.0 * FEAS_TOL {
            SdpStatus::NumericalTrouble
        } else {
            status
        };
        let objective_value = match self.objective.as_ref().unwrap_or(&Objective::Feasibility) {
            Objective::Feasibility => 0.0,
            Objective::Minimize(terms) => terms.iter().map(|(v, c)| c * x[v.0]).sum(),
            Objective::Maximize(terms) => terms.iter().map(|(v, c)| c * x[v.0]).sum(),
        };
        Ok(SdpSolution {
            status,
            objective_value,
            values: x,
            max_constraint_violation: violation,
        })
    }

    /// Worst constraint violation of a candidate point.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for &var in &self.nonneg {
            worst = worst.max(-x[var]);
        }
        for term in &self.constraints {
            let value = term.evaluate(x);
            let v = match term.sense {
                LmiSense::NegSemidef => lambda_max(&value),
                LmiSense::PosSemidef => -lambda_min(&value),
            };
            worst = worst.max(v);
        }
        worst
    }
}

fn is_complex(m: &ComplexMatrix) -> bool {
    m.iter().any(|z| z.im.abs() > 1e-14)
}

/// Returns the real symmetric matrix fed to the backend: either the real part
/// (for real data) or the doubling embedding.
fn realize(m: &ComplexMatrix, complex: bool) -> DMatrix<f64> {
    if complex {
        embed_hermitian_to_real(m).expect("validated Hermitian")
    } else {
        m.map(|z| z.re)
    }
}

/// Scaled upper-triangle column-major vectorization used by the PSD cone.
fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * (d + 1) / 2);
    let root2 = std::f64::consts::SQRT_2;
    for col in 0..d {
        for row in 0..=col {
            if row == col {
                v.push(m[(row, col)]);
            } else {
                v.push(root2 * 0.5 * (m[(row, col)] + m[(col, row)]));
            }
        }
    }
    v
}

fn csc_from_columns(rows: usize, ncols: usize, cols: Vec<Vec<(usize, f64)>>) -> CscMatrix<f64> {
    let mut colptr = Vec::with_capacity(ncols + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for mut col in cols {
        col.sort_by_key(|&(r, _)| r);
        for (r, v) in col {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    CscMatrix::new(rows, ncols, colptr, rowval, nzval)
}
