//! Symbolic container for small dense semidefinite programs.
//!
//! A problem owns a flat vector of scalar decision variables, grouped
//! into named matrix variables (symmetric or rectangular). Constraints
//! and the objective are affine expressions over those scalars, built
//! with [`MatExpr`] so the synthesis code reads like the block algebra
//! it implements.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use super::programs::DecodeInfo;
use crate::linalg;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("constraint block must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("constraint block is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
}

/// Shape of a matrix variable. Symmetric variables store only the upper
/// triangle (column-wise), rectangular ones every entry (column-major).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarShape {
    Sym(usize),
    Full(usize, usize),
}

impl VarShape {
    pub fn num_scalars(self) -> usize {
        match self {
            VarShape::Sym(d) => d * (d + 1) / 2,
            VarShape::Full(r, c) => r * c,
        }
    }

    pub fn dims(self) -> (usize, usize) {
        match self {
            VarShape::Sym(d) => (d, d),
            VarShape::Full(r, c) => (r, c),
        }
    }
}

/// Handle to a declared matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(usize);

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub shape: VarShape,
    /// Index of this variable's first scalar in the flat decision vector.
    pub offset: usize,
}

/// Affine scalar expression: a sparse linear form plus a constant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    terms: BTreeMap<usize, f64>,
    constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn variable(idx: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(idx, 1.0);
        Self {
            terms,
            constant: 0.0,
        }
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.terms.iter().map(|(&i, &c)| (i, c))
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) {
        if scale == 0.0 {
            return;
        }
        self.constant += scale * other.constant;
        for (&idx, &c) in &other.terms {
            let slot = self.terms.entry(idx).or_insert(0.0);
            *slot += scale * c;
            if *slot == 0.0 {
                self.terms.remove(&idx);
            }
        }
    }

    pub fn scaled(&self, scale: f64) -> LinExpr {
        let mut out = LinExpr::default();
        out.add_scaled(self, scale);
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(&i, &c)| c * x[i])
                .sum::<f64>()
    }

    /// Sum of absolute term magnitudes at `x` (constant included): the
    /// natural scale against which a residual of `eval` should be
    /// judged.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        self.constant.abs()
            + self
                .terms
                .iter()
                .map(|(&i, &c)| (c * x[i]).abs())
                .sum::<f64>()
    }

    /// Largest coefficient magnitude (constant included); used to scale
    /// symmetry tolerances.
    fn max_abs(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.abs())
            .fold(self.constant.abs(), f64::max)
    }

    fn gap(&self, other: &LinExpr) -> f64 {
        let mut diff = self.clone();
        diff.add_scaled(other, -1.0);
        diff.max_abs()
    }

    /// Average of two expressions, used to symmetrize constraint blocks.
    fn mean(&self, other: &LinExpr) -> LinExpr {
        let mut out = self.scaled(0.5);
        out.add_scaled(other, 0.5);
        out
    }
}

/// Affine matrix expression: a grid of [`LinExpr`] entries.
#[derive(Debug, Clone)]
pub struct MatExpr {
    rows: usize,
    cols: usize,
    entries: Vec<LinExpr>, // column-major
}

impl MatExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![LinExpr::default(); rows * cols],
        }
    }

    pub fn constant(m: &DMatrix<f64>) -> Self {
        let mut e = Self::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                e.entry_mut(i, j).constant = m[(i, j)];
            }
        }
        e
    }

    pub fn identity(d: usize) -> Self {
        Self::constant(&DMatrix::identity(d, d))
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinExpr {
        &self.entries[j * self.rows + i]
    }

    fn entry_mut(&mut self, i: usize, j: usize) -> &mut LinExpr {
        &mut self.entries[j * self.rows + i]
    }

    pub fn add(&self, other: &MatExpr) -> MatExpr {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (e, o) in out.entries.iter_mut().zip(&other.entries) {
            e.add_scaled(o, 1.0);
        }
        out
    }

    pub fn sub(&self, other: &MatExpr) -> MatExpr {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (e, o) in out.entries.iter_mut().zip(&other.entries) {
            e.add_scaled(o, -1.0);
        }
        out
    }

    pub fn neg(&self) -> MatExpr {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> MatExpr {
        let mut out = MatExpr::zeros(self.rows, self.cols);
        for (o, e) in out.entries.iter_mut().zip(&self.entries) {
            o.add_scaled(e, s);
        }
        out
    }

    /// `self + c` for a constant matrix `c`.
    pub fn shift(&self, c: &DMatrix<f64>) -> MatExpr {
        self.add(&MatExpr::constant(c))
    }

    pub fn transpose(&self) -> MatExpr {
        let mut out = MatExpr::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                *out.entry_mut(j, i) = self.entry(i, j).clone();
            }
        }
        out
    }

    /// `c * self` for a constant matrix `c`.
    pub fn left_mul(&self, c: &DMatrix<f64>) -> MatExpr {
        assert_eq!(c.ncols(), self.rows, "left factor width must match rows");
        let mut out = MatExpr::zeros(c.nrows(), self.cols);
        for j in 0..self.cols {
            for i in 0..c.nrows() {
                let slot = out.entry_mut(i, j);
                for k in 0..self.rows {
                    slot.add_scaled(self.entry(k, j), c[(i, k)]);
                }
            }
        }
        out
    }

    /// `self * c` for a constant matrix `c`.
    pub fn right_mul(&self, c: &DMatrix<f64>) -> MatExpr {
        assert_eq!(self.cols, c.nrows(), "right factor height must match cols");
        let mut out = MatExpr::zeros(self.rows, c.ncols());
        for j in 0..c.ncols() {
            for i in 0..self.rows {
                let slot = out.entry_mut(i, j);
                for k in 0..self.cols {
                    slot.add_scaled(self.entry(i, k), c[(k, j)]);
                }
            }
        }
        out
    }

    pub fn trace(&self) -> LinExpr {
        assert_eq!(self.rows, self.cols, "trace needs a square expression");
        let mut out = LinExpr::default();
        for i in 0..self.rows {
            out.add_scaled(self.entry(i, i), 1.0);
        }
        out
    }

    /// Assembles a block matrix from a grid of expressions. Row heights
    /// and column widths must be consistent across the grid.
    pub fn from_blocks(grid: &[Vec<MatExpr>]) -> MatExpr {
        assert!(!grid.is_empty() && !grid[0].is_empty(), "empty block grid");
        let block_cols = grid[0].len();
        let row_heights: Vec<usize> = grid.iter().map(|r| r[0].nrows()).collect();
        let col_widths: Vec<usize> = grid[0].iter().map(|e| e.ncols()).collect();
        for row in grid {
            assert_eq!(row.len(), block_cols, "ragged block grid");
            for (e, &w) in row.iter().zip(&col_widths) {
                assert_eq!(e.ncols(), w, "inconsistent block widths");
            }
        }
        for (row, &h) in grid.iter().zip(&row_heights) {
            for e in row {
                assert_eq!(e.nrows(), h, "inconsistent block heights");
            }
        }
        let total_rows: usize = row_heights.iter().sum();
        let total_cols: usize = col_widths.iter().sum();
        let mut out = MatExpr::zeros(total_rows, total_cols);
        let mut row_off = 0;
        for (bi, row) in grid.iter().enumerate() {
            let mut col_off = 0;
            for (bj, e) in row.iter().enumerate() {
                for j in 0..col_widths[bj] {
                    for i in 0..row_heights[bi] {
                        *out.entry_mut(row_off + i, col_off + j) = e.entry(i, j).clone();
                    }
                }
                col_off += col_widths[bj];
            }
            row_off += row_heights[bi];
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entry(i, j).eval(x))
    }
}

/// A semidefinite program: minimize a linear objective over matrix
/// variables subject to affine PSD block constraints and affine
/// equality constraints.
#[derive(Debug, Default)]
pub struct SdpProblem {
    vars: Vec<VarInfo>,
    num_scalars: usize,
    psd_constraints: Vec<MatExpr>,
    equality_constraints: Vec<MatExpr>,
    objective: LinExpr,
    /// Decoding recipe attached by the synthesis builders; hand-built
    /// problems leave it empty and decode nothing beyond the objective.
    pub metadata: Option<DecodeInfo>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    fn add_var(&mut self, name: &str, shape: VarShape) -> Result<VarId, ProblemError> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(ProblemError::DuplicateName(name.to_string()));
        }
        let id = VarId(self.vars.len());
        self.vars.push(VarInfo {
            name: name.to_string(),
            shape,
            offset: self.num_scalars,
        });
        self.num_scalars += shape.num_scalars();
        Ok(id)
    }

    /// Declares a symmetric `d x d` variable.
    pub fn add_sym_var(&mut self, name: &str, d: usize) -> Result<VarId, ProblemError> {
        self.add_var(name, VarShape::Sym(d))
    }

    /// Declares a rectangular `rows x cols` variable.
    pub fn add_full_var(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
    ) -> Result<VarId, ProblemError> {
        self.add_var(name, VarShape::Full(rows, cols))
    }

    pub fn var(&self, id: VarId) -> &VarInfo {
        &self.vars[id.0]
    }

    pub fn variables(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn num_scalars(&self) -> usize {
        self.num_scalars
    }

    /// Scalar index of entry `(i, j)` of a variable.
    fn scalar_index(&self, id: VarId, i: usize, j: usize) -> usize {
        let info = &self.vars[id.0];
        match info.shape {
            VarShape::Sym(_) => {
                let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
                info.offset + hi * (hi + 1) / 2 + lo
            }
            VarShape::Full(r, _) => info.offset + j * r + i,
        }
    }

    /// The variable itself as a matrix expression.
    pub fn var_expr(&self, id: VarId) -> MatExpr {
        let (r, c) = self.vars[id.0].shape.dims();
        let mut e = MatExpr::zeros(r, c);
        for j in 0..c {
            for i in 0..r {
                *e.entry_mut(i, j) = LinExpr::variable(self.scalar_index(id, i, j));
            }
        }
        e
    }

    /// Adds the constraint `expr ⪰ 0`. The block must be square and
    /// symmetric as an expression (entry-wise, up to round-off); it is
    /// stored with its upper and lower triangles averaged.
    pub fn add_psd(&mut self, expr: MatExpr) -> Result<(), ProblemError> {
        if expr.nrows() != expr.ncols() {
            return Err(ProblemError::NotSquare(expr.nrows(), expr.ncols()));
        }
        let d = expr.nrows();
        let mut scale = 1.0_f64;
        for e in &expr.entries {
            scale = scale.max(e.max_abs());
        }
        let mut sym = expr.clone();
        for j in 0..d {
            for i in 0..j {
                let gap = expr.entry(i, j).gap(expr.entry(j, i));
                if gap > 1e-9 * scale {
                    return Err(ProblemError::NotSymmetric(gap));
                }
                let avg = expr.entry(i, j).mean(expr.entry(j, i));
                *sym.entry_mut(i, j) = avg.clone();
                *sym.entry_mut(j, i) = avg;
            }
        }
        self.psd_constraints.push(sym);
        Ok(())
    }

    /// Adds the constraint `expr = 0`, entry-wise.
    pub fn add_equality(&mut self, expr: MatExpr) {
        self.equality_constraints.push(expr);
    }

    /// Sets the linear objective to minimize.
    pub fn set_objective(&mut self, obj: LinExpr) {
        self.objective = obj;
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn psd_constraints(&self) -> &[MatExpr] {
        &self.psd_constraints
    }

    pub fn equality_constraints(&self) -> &[MatExpr] {
        &self.equality_constraints
    }

    /// Reconstructs a variable's matrix value from a flat assignment.
    pub fn value_of(&self, id: VarId, x: &[f64]) -> DMatrix<f64> {
        let (r, c) = self.vars[id.0].shape.dims();
        DMatrix::from_fn(r, c, |i, j| x[self.scalar_index(id, i, j)])
    }

    /// Writes a matrix value into a flat assignment (symmetric variables
    /// read the upper triangle).
    pub fn pack_value(&self, id: VarId, value: &DMatrix<f64>, x: &mut [f64]) {
        let (r, c) = self.vars[id.0].shape.dims();
        assert_eq!((value.nrows(), value.ncols()), (r, c));
        for j in 0..c {
            for i in 0..r {
                if let VarShape::Sym(_) = self.vars[id.0].shape {
                    if i > j {
                        continue;
                    }
                }
                x[self.scalar_index(id, i, j)] = value[(i, j)];
            }
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest absolute violation over all equality constraints.
    pub fn max_equality_violation(&self, x: &[f64]) -> f64 {
        self.equality_constraints
            .iter()
            .map(|e| e.eval(x).abs().max())
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all PSD blocks (non-negative at a
    /// feasible point). Returns `+inf` when there are no PSD blocks.
    pub fn min_psd_eigenvalue(&self, x: &[f64]) -> f64 {
        self.psd_constraints
            .iter()
            .map(|e| linalg::eig_min_sym(&linalg::symmetrize(&e.eval(x))))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest equality violation measured relative to the magnitude of
    /// the terms that produced it: `|r| / (1 + sum |c_j x_j|)` per
    /// entry. A residual of `k` machine epsilons stays `O(k * eps)`
    /// here no matter how large the data entering the constraint is,
    /// which is what a floating-point feasibility check has to measure.
    pub fn max_equality_backward_error(&self, x: &[f64]) -> f64 {
        self.equality_constraints
            .iter()
            .flat_map(|e| e.entries.iter())
            .map(|le| le.eval(x).abs() / (1.0 + le.magnitude(x)))
            .fold(0.0, f64::max)
    }

    /// Smallest PSD-block eigenvalue scaled by the block's spectral
    /// norm: `lambda_min(E) / (1 + ||E||_2)` per block. See
    /// [`max_equality_backward_error`](Self::max_equality_backward_error)
    /// for why the check is relative.
    pub fn min_scaled_psd_eigenvalue(&self, x: &[f64]) -> f64 {
        self.psd_constraints
            .iter()
            .map(|e| {
                let m = linalg::symmetrize(&e.eval(x));
                let eigs = m.symmetric_eigenvalues();
                let lo = eigs.iter().copied().fold(f64::INFINITY, f64::min);
                let norm = eigs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                lo / (1.0 + norm)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Serializes the problem to a line-oriented sparse text format:
    ///
    /// ```text
    /// sdp-problem v1
    /// scalars <count>
    /// var <name> sym <d> offset <k>         | var <name> full <r> <c> offset <k>
    /// objective constant <value>
    /// objective term <scalar-index> <coefficient>
    /// equality <id> dims <rows> <cols>
    /// equality <id> entry <i> <j> constant <value>
    /// equality <id> entry <i> <j> term <scalar-index> <coefficient>
    /// psd <id> dim <d>
    /// psd <id> entry <i> <j> constant <value>
    /// psd <id> entry <i> <j> term <scalar-index> <coefficient>
    /// ```
    ///
    /// PSD entries list only the upper triangle (the stored block is
    /// symmetric). Zero constants and empty entries are omitted; floats
    /// use shortest round-trip formatting, so identical problems always
    /// serialize identically.
    pub fn to_sparse_text(&self) -> String {
        let mut out = String::from("sdp-problem v1\n");
        let _ = writeln!(out, "scalars {}", self.num_scalars);
        for v in &self.vars {
            match v.shape {
                VarShape::Sym(d) => {
                    let _ = writeln!(out, "var {} sym {} offset {}", v.name, d, v.offset);
                }
                VarShape::Full(r, c) => {
                    let _ = writeln!(out, "var {} full {} {} offset {}", v.name, r, c, v.offset);
                }
            }
        }
        let write_lin = |out: &mut String, prefix: &str, e: &LinExpr| {
            if e.constant != 0.0 {
                let _ = writeln!(out, "{prefix} constant {}", e.constant);
            }
            for (idx, c) in e.terms() {
                let _ = writeln!(out, "{prefix} term {idx} {c}");
            }
        };
        write_lin(&mut out, "objective", &self.objective);
        for (id, e) in self.equality_constraints.iter().enumerate() {
            let _ = writeln!(out, "equality {id} dims {} {}", e.nrows(), e.ncols());
            for j in 0..e.ncols() {
                for i in 0..e.nrows() {
                    write_lin(&mut out, &format!("equality {id} entry {i} {j}"), e.entry(i, j));
                }
            }
        }
        for (id, e) in self.psd_constraints.iter().enumerate() {
            let _ = writeln!(out, "psd {id} dim {}", e.nrows());
            for j in 0..e.ncols() {
                for i in 0..=j {
                    write_lin(&mut out, &format!("psd {id} entry {i} {j}"), e.entry(i, j));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sym_variable_round_trip() {
        let mut p = SdpProblem::new();
        let id = p.add_sym_var("P", 3).unwrap();
        assert_eq!(p.num_scalars(), 6);
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.5, -1.0, 0.5, 3.0, 0.25, -1.0, 0.25, 4.0],
        );
        let mut x = vec![0.0; p.num_scalars()];
        p.pack_value(id, &m, &mut x);
        assert_relative_eq!((p.value_of(id, &x) - &m).norm(), 0.0, epsilon = 1e-15);
        // Off-diagonal entries share a scalar.
        let e = p.var_expr(id);
        assert_eq!(e.entry(0, 2), e.entry(2, 0));
    }

    #[test]
    fn expression_algebra_matches_dense_arithmetic() {
        let mut p = SdpProblem::new();
        let q = p.add_full_var("Q", 3, 2).unwrap();
        let c = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0]);
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, -1.0]);
        let e = p.var_expr(q).left_mul(&c).right_mul(&r); // C * Q * R

        let qv = DMatrix::from_row_slice(3, 2, &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        let mut x = vec![0.0; p.num_scalars()];
        p.pack_value(q, &qv, &mut x);
        let expected = &c * &qv * &r;
        assert_relative_eq!((e.eval(&x) - &expected).norm(), 0.0, epsilon = 1e-12);

        let tr = e.right_mul(&DMatrix::identity(2, 2)).trace();
        assert_relative_eq!(tr.eval(&x), expected.trace(), epsilon = 1e-12);

        let neg = e.neg().add(&e);
        assert_relative_eq!(neg.eval(&x).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn block_assembly_places_entries() {
        let mut p = SdpProblem::new();
        let a = p.add_sym_var("A", 2).unwrap();
        let ea = p.var_expr(a);
        let block = MatExpr::from_blocks(&[
            vec![ea.clone(), MatExpr::zeros(2, 1)],
            vec![MatExpr::zeros(1, 2), MatExpr::identity(1)],
        ]);
        assert_eq!((block.nrows(), block.ncols()), (3, 3));
        let av = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0]);
        let mut x = vec![0.0; p.num_scalars()];
        p.pack_value(a, &av, &mut x);
        let v = block.eval(&x);
        assert_relative_eq!(v[(0, 1)], 2.0);
        assert_relative_eq!(v[(2, 2)], 1.0);
        assert_relative_eq!(v[(2, 0)], 0.0);
    }

    #[test]
    fn asymmetric_psd_block_is_rejected() {
        let mut p = SdpProblem::new();
        let q = p.add_full_var("Q", 2, 2).unwrap();
        let err = p.add_psd(p.var_expr(q)).unwrap_err();
        assert!(matches!(err, ProblemError::NotSymmetric(_)));
        // A symmetric variable block is accepted.
        let s = p.add_sym_var("S", 2).unwrap();
        p.add_psd(p.var_expr(s)).unwrap();
    }

    #[test]
    fn feasibility_helpers() {
        let mut p = SdpProblem::new();
        let s = p.add_sym_var("S", 2).unwrap();
        let es = p.var_expr(s);
        p.add_psd(es.sub(&MatExpr::identity(2))).unwrap(); // S - I >= 0
        p.add_equality(es.sub(&MatExpr::constant(&DMatrix::from_row_slice(
            2,
            2,
            &[2.0, 0.0, 0.0, 2.0],
        ))));
        let mut x = vec![0.0; p.num_scalars()];
        p.pack_value(s, &(DMatrix::identity(2, 2) * 2.0), &mut x);
        assert!(p.max_equality_violation(&x) <= 1e-15);
        assert_relative_eq!(p.min_psd_eigenvalue(&x), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn serialization_is_deterministic_and_structured() {
        let build = || {
            let mut p = SdpProblem::new();
            let s = p.add_sym_var("P", 2).unwrap();
            let q = p.add_full_var("Q", 2, 2).unwrap();
            let es = p.var_expr(s);
            p.add_psd(es.sub(&MatExpr::identity(2))).unwrap();
            p.add_equality(p.var_expr(q).sub(&es));
            p.set_objective(es.trace());
            p.to_sparse_text()
        };
        let a = build();
        let b = build();
        assert_eq!(a, b);
        assert!(a.starts_with("sdp-problem v1\nscalars 7\n"));
        assert!(a.contains("var P sym 2 offset 0"));
        assert!(a.contains("var Q full 2 2 offset 3"));
        assert!(a.contains("psd 0 dim 2"));
        assert!(a.contains("objective term 0 1"));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let mut p = SdpProblem::new();
        p.add_sym_var("P", 2).unwrap();
        assert!(matches!(
            p.add_full_var("P", 1, 1).unwrap_err(),
            ProblemError::DuplicateName(_)
        ));
    }
}
