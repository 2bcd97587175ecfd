//! Multilevel hierarchies, cycles and the Krylov wrappers around them.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::coarsening::{
    mwm_aggregate, path_cover, path_cover_aggregate, prolongation, reweight_capped, shorten_cover,
};
use crate::error::{Error, Result};
use crate::sparse::{
    axpy, dot, galerkin_product, gauss_seidel, norm2, project_out_constant_in_place, SparseMatrix, SweepDirection,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleParams {
    /// Forward Gauss–Seidel sweeps before restriction.
    pub pre_sweeps: usize,
    /// Backward Gauss–Seidel sweeps after prolongation.
    pub post_sweeps: usize,
    /// Coarsening stops once a level has at most this many rows.
    pub coarse_size: usize,
    pub max_levels: usize,
    /// Optional per-row cap on the A² pattern used by path-cover setup.
    pub a2_row_cap: Option<usize>,
}

impl Default for CycleParams {
    fn default() -> Self {
        CycleParams {
            pre_sweeps: 1,
            post_sweeps: 1,
            coarse_size: 100,
            max_levels: 30,
            a2_row_cap: None,
        }
    }
}

impl CycleParams {
    pub fn validate(&self) -> Result<()> {
        if self.pre_sweeps == 0 || self.post_sweeps == 0 {
            return Err(Error::InvalidArgument("need at least one pre- and post-sweep".into()));
        }
        if self.coarse_size < 2 || self.max_levels == 0 {
            return Err(Error::InvalidArgument(
                "coarse_size must be >= 2 and max_levels >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Dense direct solver for the coarsest operator.
#[derive(Debug, Clone)]
pub enum CoarseSolver {
    /// Laplacian: vertex 0 grounded, Cholesky of the result, answer projected
    /// onto the complement of the constant vector.
    Grounded(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    /// Anything else: spectral pseudo-inverse.
    PseudoInverse(DMatrix<f64>),
}

const PINV_CUTOFF: f64 = 1e-10;

fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let n = a.n_rows();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            m[(i, j)] = v;
        }
    }
    m
}

/// Zero row sums relative to the largest absolute row sum of the matrix.
pub fn has_zero_row_sums(a: &SparseMatrix, rel: f64) -> bool {
    let abs_sum = |i: usize| a.row(i).1.iter().map(|v| v.abs()).sum::<f64>();
    let scale = (0..a.n_rows()).map(abs_sum).fold(0.0f64, f64::max);
    (0..a.n_rows()).all(|i| a.row(i).1.iter().sum::<f64>().abs() <= rel * scale)
}

impl CoarseSolver {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                op: "coarse solver",
                expected: a.n_rows(),
                got: a.n_cols(),
            });
        }
        if a.n_rows() > 0 && has_zero_row_sums(a, 1e-10) {
            Self::grounded(a)
        } else {
            Ok(Self::pseudo_inverse(a))
        }
    }

    pub fn grounded(a: &SparseMatrix) -> Result<Self> {
        let mut m = dense(a);
        let n = m.nrows();
        if n == 0 {
            return Err(Error::SingularCoarse);
        }
        m.row_mut(0).fill(0.0);
        m.column_mut(0).fill(0.0);
        m[(0, 0)] = 1.0;
        nalgebra::Cholesky::new(m)
            .map(CoarseSolver::Grounded)
            .ok_or(Error::SingularCoarse)
    }

    pub fn pseudo_inverse(a: &SparseMatrix) -> Self {
        let eig = nalgebra::SymmetricEigen::new(dense(a));
        let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let inv = eig
            .eigenvalues
            .map(|l| if l.abs() > PINV_CUTOFF * max { 1.0 / l } else { 0.0 });
        let v = &eig.eigenvectors;
        CoarseSolver::PseudoInverse(v * DMatrix::from_diagonal(&inv) * v.transpose())
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            CoarseSolver::Grounded(chol) => {
                let mut rhs = DVector::from_column_slice(b);
                rhs[0] = 0.0;
                let mut x: Vec<f64> = chol.solve(&rhs).as_slice().to_vec();
                project_out_constant_in_place(&mut x);
                x
            }
            CoarseSolver::PseudoInverse(m) => (m * DVector::from_column_slice(b)).as_slice().to_vec(),
        }
    }
}

/// Direct solve of a connected-graph Laplacian system with `b ⊥ 1`.
pub fn coarse_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            op: "coarse_solve",
            expected: a.n_rows(),
            got: b.len(),
        });
    }
    Ok(CoarseSolver::grounded(a)?.solve(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetupKind {
    Matching,
    PathCover,
}

/// Operators `A_1 … A_L`, prolongations `P_1 … P_{L-1}` and the coarsest solver.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    operators: Vec<Arc<SparseMatrix>>,
    prolongations: Vec<SparseMatrix>,
    coarse: CoarseSolver,
    kind: SetupKind,
}

impl Hierarchy {
    fn assemble(operators: Vec<Arc<SparseMatrix>>, prolongations: Vec<SparseMatrix>, kind: SetupKind) -> Result<Self> {
        let last = operators.last().expect("at least one level");
        // Only the e-weighted levels of a path-cover hierarchy leave the
        // Laplacian class.
        let coarse = if kind == SetupKind::Matching || operators.len() == 1 {
            CoarseSolver::grounded(last)?
        } else {
            CoarseSolver::pseudo_inverse(last)
        };
        log::debug!(
            "{kind:?} hierarchy: sizes {:?}",
            operators.iter().map(|a| a.n_rows()).collect::<Vec<_>>()
        );
        Ok(Hierarchy {
            operators,
            prolongations,
            coarse,
            kind,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.operators.len()
    }

    pub fn operator(&self, level: usize) -> &SparseMatrix {
        &self.operators[level]
    }

    pub fn fine_operator(&self) -> &Arc<SparseMatrix> {
        &self.operators[0]
    }

    pub fn prolongation(&self, level: usize) -> &SparseMatrix {
        &self.prolongations[level]
    }

    pub fn kind(&self) -> SetupKind {
        self.kind
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.operators.iter().map(|a| a.n_rows()).collect()
    }

    /// Σ nnz(A_ℓ) / nnz(A_1).
    pub fn operator_complexity(&self) -> f64 {
        let total: usize = self.operators.iter().map(|a| a.nnz()).sum();
        total as f64 / self.operators[0].nnz().max(1) as f64
    }

    /// Largest relative deviation between a stored coarse operator and the
    /// Galerkin product recomputed from the level above.
    pub fn galerkin_defect(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (l, p) in self.prolongations.iter().enumerate() {
            let again = galerkin_product(p, &self.operators[l])?;
            let stored = &self.operators[l + 1];
            let scale = stored
                .values()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()))
                .max(f64::MIN_POSITIVE);
            for i in 0..stored.n_rows() {
                let (cols, vals) = again.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    worst = worst.max((stored.get(i, j).unwrap_or(0.0) - v).abs() / scale);
                }
                let (cols, vals) = stored.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    worst = worst.max((again.get(i, j).unwrap_or(0.0) - v).abs() / scale);
                }
            }
        }
        Ok(worst)
    }

    fn cycle(&self, level: usize, b: &[f64], x: &mut [f64], params: &CycleParams, gamma: usize) -> Result<()> {
        if level + 1 == self.operators.len() {
            x.copy_from_slice(&self.coarse.solve(b));
            return Ok(());
        }
        let a = &self.operators[level];
        let p = &self.prolongations[level];
        for _ in 0..params.pre_sweeps {
            gauss_seidel(a, b, x, SweepDirection::Forward)?;
        }
        let r = a.residual(b, x)?;
        let bc = p.spmv_transpose(&r)?;
        let mut xc = vec![0.0; p.n_cols()];
        for _ in 0..gamma {
            self.cycle(level + 1, &bc, &mut xc, params, gamma)?;
        }
        let correction = p.spmv(&xc)?;
        axpy(1.0, &correction, x);
        for _ in 0..params.post_sweeps {
            gauss_seidel(a, b, x, SweepDirection::Backward)?;
        }
        Ok(())
    }

    fn check_len(&self, b: &[f64], x: &[f64]) -> Result<()> {
        let n = self.operators[0].n_rows();
        for len in [b.len(), x.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    op: "cycle",
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(())
    }
}

fn operator_weights(a: &SparseMatrix) -> SparseMatrix {
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i && v < 0.0 {
                t.push((i, j, -v));
            }
        }
    }
    SparseMatrix::from_triplets(a.n_rows(), a.n_cols(), &t).expect("indices come from a valid matrix")
}

/// Unsmoothed-aggregation hierarchy from repeated greedy matching.
pub fn mwm_setup(a: Arc<SparseMatrix>, params: &CycleParams) -> Result<Hierarchy> {
    params.validate()?;
    let mut operators = vec![a];
    let mut prolongations = Vec::new();
    loop {
        let a = operators.last().unwrap();
        let n = a.n_rows();
        if n <= params.coarse_size || operators.len() >= params.max_levels {
            break;
        }
        let agg = mwm_aggregate(&operator_weights(a));
        if agg.num_agg < 2 {
            break;
        }
        if agg.num_agg >= n {
            return Err(Error::Stagnation {
                level: operators.len(),
                n,
            });
        }
        let p = prolongation(&agg, None);
        let coarse = galerkin_product(&p, a)?;
        prolongations.push(p);
        operators.push(Arc::new(coarse));
    }
    Hierarchy::assemble(operators, prolongations, SetupKind::Matching)
}

/// Hierarchy whose aggregates follow the level sets of `e`.
///
/// The A² pattern is reweighted by `e`, a path cover of it is aggregated
/// level by level (shortening the cover each time), and the first
/// prolongation carries the entries of `e` so that `e = P_1 · 1`.
pub fn pc_setup(a: Arc<SparseMatrix>, e: &[f64], params: &CycleParams) -> Result<Hierarchy> {
    params.validate()?;
    if e.len() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            op: "pc_setup",
            expected: a.n_rows(),
            got: e.len(),
        });
    }
    if e.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("smooth error is identically zero".into()));
    }
    let mut weights = reweight_capped(&a, e, params.a2_row_cap)?;
    let mut cover = path_cover(&weights);
    let mut operators = vec![a];
    let mut prolongations = Vec::new();
    loop {
        let a = operators.last().unwrap();
        let n = a.n_rows();
        if n <= params.coarse_size || operators.len() >= params.max_levels {
            break;
        }
        let level = operators.len();
        let (agg, p) = path_cover_aggregate(&cover, &weights, level, (level == 1).then_some(e))?;
        if agg.num_agg < 2 {
            break;
        }
        if agg.num_agg >= n {
            return Err(Error::Stagnation { level, n });
        }
        weights = galerkin_product(&p, &weights)?.to_adjacency();
        cover = shorten_cover(&cover, &agg);
        let coarse = galerkin_product(&p, a)?;
        prolongations.push(p);
        operators.push(Arc::new(coarse));
    }
    Hierarchy::assemble(operators, prolongations, SetupKind::PathCover)
}

/// One V-cycle on `A x = b`, updating `x` in place.
pub fn v_cycle(h: &Hierarchy, b: &[f64], x: &mut [f64], params: &CycleParams) -> Result<()> {
    h.check_len(b, x)?;
    h.cycle(0, b, x, params, 1)
}

/// One W-cycle (two coarse corrections per level).
pub fn w_cycle(h: &Hierarchy, b: &[f64], x: &mut [f64], params: &CycleParams) -> Result<()> {
    h.check_len(b, x)?;
    h.cycle(0, b, x, params, 2)
}

/// Σ nnz over all levels divided by nnz of the finest level.
pub fn operator_complexity(h: &Hierarchy) -> f64 {
    h.operator_complexity()
}

/// Action of an approximate inverse.
pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>>;
}

impl<F> Preconditioner for F
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(self(r))
    }
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

/// One cycle from a zero initial guess.
pub struct CyclePreconditioner<'a> {
    pub hierarchy: &'a Hierarchy,
    pub params: CycleParams,
    /// 1 for a V-cycle, 2 for a W-cycle.
    pub gamma: usize,
}

impl Preconditioner for CyclePreconditioner<'_> {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut z = vec![0.0; r.len()];
        self.hierarchy.check_len(r, &z)?;
        self.hierarchy.cycle(0, r, &mut z, &self.params, self.gamma)?;
        Ok(z)
    }
}

/// Symmetric product of V-cycle error propagators over several hierarchies.
pub struct CompositePreconditioner<'a> {
    pub hierarchies: &'a [Hierarchy],
    pub params: CycleParams,
}

impl Preconditioner for CompositePreconditioner<'_> {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        composite_apply(self.hierarchies, r, &self.params)
    }
}

/// `B r` where `I − B A = (I − B_1 A)…(I − B_m A)(I − B_m A)…(I − B_1 A)`,
/// each `B_j` one V-cycle on hierarchy `j`.
pub fn composite_apply(hierarchies: &[Hierarchy], r: &[f64], params: &CycleParams) -> Result<Vec<f64>> {
    if hierarchies.is_empty() {
        return Err(Error::EmptyHierarchyList);
    }
    let mut e = vec![0.0; r.len()];
    let m = hierarchies.len();
    for j in (0..m).chain((0..m).rev()) {
        v_cycle(&hierarchies[j], r, &mut e, params)?;
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullSpace {
    None,
    /// Keep iterates orthogonal to the constant vector.
    Constant,
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub breakdown: bool,
}

/// Runs `iters` steps of preconditioned conjugate gradients.
///
/// With [`NullSpace::Constant`] the iterate, residual and preconditioned
/// residual are projected onto 1⊥ after every update. A non-positive
/// curvature `pᵀAp` or a vanishing `rᵀz` stops early with `breakdown` set.
pub fn mg_pcg(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    iters: usize,
    null_space: NullSpace,
) -> Result<PcgOutcome> {
    let project = |v: &mut [f64]| {
        if null_space == NullSpace::Constant {
            project_out_constant_in_place(v);
        }
    };
    if x0.len() != a.n_cols() {
        return Err(Error::DimensionMismatch {
            op: "mg_pcg",
            expected: a.n_cols(),
            got: x0.len(),
        });
    }
    let mut x = x0.to_vec();
    project(&mut x);
    let mut r = a.residual(b, &x)?;
    project(&mut r);
    let mut z = precond.apply(&r)?;
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; x.len()];
    for k in 0..iters {
        if norm2(&r) == 0.0 {
            return Ok(PcgOutcome {
                x,
                iterations: k,
                breakdown: false,
            });
        }
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap.is_nan() || pap <= 0.0 || rz == 0.0 || !rz.is_finite() {
            return Ok(PcgOutcome {
                x,
                iterations: k,
                breakdown: true,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        project(&mut x);
        project(&mut r);
        z = precond.apply(&r)?;
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(PcgOutcome {
        x,
        iterations: iters,
        breakdown: false,
    })
}
