use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::problem::{Block, BlockValue, Problem};
use crate::ConicError;

#[derive(Debug, Clone)]
pub struct Settings {
    pub max_iter: usize,
    /// Relative duality gap tolerance.
    pub gap_tol: f64,
    /// Relative primal/dual/equality residual tolerance.
    pub feas_tol: f64,
    /// Looser tolerance accepted when the method stalls.
    pub inaccurate_tol: f64,
    pub verbose: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self { max_iter: 100, gap_tol: 1e-8, feas_tol: 1e-8, inaccurate_tol: 1e-5, verbose: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// Stopped early; residuals and gap are below `inaccurate_tol`.
    Inaccurate,
    MaxIterations,
    NumericalError,
}

impl Status {
    pub fn is_usable(self) -> bool {
        matches!(self, Status::Optimal | Status::Inaccurate)
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Inaccurate => "inaccurate",
            Status::MaxIterations => "max_iterations",
            Status::NumericalError => "numerical_error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub y: DVector<f64>,
    /// Slack blocks `S_j` (equal to `C_j + Σ y_i A_{j,i}` up to the LMI residual).
    pub slack: Vec<BlockValue>,
    /// Dual blocks, the Lagrange multipliers of the cone constraints.
    pub dual: Vec<BlockValue>,
    pub multipliers: DVector<f64>,
    /// `cᵀy`.
    pub objective: f64,
    pub dual_objective: f64,
    pub relative_gap: f64,
    pub lmi_residual: f64,
    pub dual_residual: f64,
    pub equality_residual: f64,
    pub iterations: usize,
}

impl Solution {
    fn worst_error(&self) -> f64 {
        self.relative_gap.max(self.lmi_residual).max(self.dual_residual).max(self.equality_residual)
    }
}

struct Iterate {
    y: DVector<f64>,
    lambda: DVector<f64>,
    x: Vec<BlockValue>,
    s: Vec<BlockValue>,
}

struct Direction {
    dy: DVector<f64>,
    dlambda: DVector<f64>,
    dx: Vec<BlockValue>,
    ds: Vec<BlockValue>,
}

fn sym(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

fn inverse_pd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    Cholesky::new(a.clone()).map(|c| c.inverse())
}

/// Largest `α ≥ 0` keeping `x + α·dx` in the cone (may be infinite).
fn max_step(x: &BlockValue, dx: &BlockValue) -> f64 {
    match (x, dx) {
        (BlockValue::Vector(x), BlockValue::Vector(dx)) => x
            .iter()
            .zip(dx.iter())
            .filter(|(_, d)| **d < 0.0)
            .map(|(xi, di)| -xi / di)
            .fold(f64::INFINITY, f64::min),
        (BlockValue::Matrix(x), BlockValue::Matrix(dx)) => {
            let lambda_min = match Cholesky::new(x.clone()) {
                Some(chol) => {
                    let l = chol.l();
                    let t = l.solve_lower_triangular(dx).unwrap_or_else(|| dx.clone());
                    let t = l.solve_lower_triangular(&t.transpose()).unwrap_or(t);
                    SymmetricEigen::new(sym(t)).eigenvalues.min()
                }
                None => {
                    // Not numerically PD: fall back to a conservative bound.
                    let ex = SymmetricEigen::new(x.clone()).eigenvalues.min().max(0.0);
                    let ed = SymmetricEigen::new(dx.clone()).eigenvalues.min();
                    return if ed >= 0.0 { f64::INFINITY } else { ex / -ed };
                }
            };
            if lambda_min >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / lambda_min
            }
        }
        _ => unreachable!(),
    }
}

struct Workspace<'a> {
    prob: &'a Problem,
    dims: Vec<usize>,
    nu: f64,
    neq: usize,
}

impl<'a> Workspace<'a> {
    fn apply_linear(&self, y: &DVector<f64>) -> Vec<BlockValue> {
        (0..self.prob.blocks.len()).map(|j| self.prob.apply_linear(j, y)).collect()
    }

    fn adjoint(&self, x: &[BlockValue]) -> DVector<f64> {
        let mut out = DVector::zeros(self.prob.num_vars);
        for (j, xj) in x.iter().enumerate() {
            self.prob.adjoint_into(j, xj, &mut out);
        }
        out
    }

    fn inner(&self, a: &[BlockValue], b: &[BlockValue]) -> f64 {
        a.iter().zip(b).map(|(a, b)| a.dot(b)).sum()
    }

    /// HKM Schur complement `M_ij = ⟨A_i, X A_j S⁻¹⟩`.
    ///
    /// With Cholesky factors `X = L_x L_xᵀ`, `S = L_s L_sᵀ` the block terms
    /// are formed as the Gram matrix of `L_s⁻¹ A_i L_x`, which keeps them
    /// positive semidefinite in floating point.
    fn schur(&self, x: &[BlockValue], s_inv: &[BlockValue], chol: &[Option<CholPair>]) -> DMatrix<f64> {
        let prob = self.prob;
        let m = prob.num_vars;
        let mut mat = DMatrix::zeros(m, m);
        let mut map_acc: Vec<Option<DMatrix<f64>>> = vec![None; prob.maps.len()];
        let mut map_factors: Vec<Vec<(DMatrix<f64>, usize, Vec<usize>)>> = vec![Vec::new(); prob.maps.len()];
        for (j, block) in prob.blocks.iter().enumerate() {
            match block {
                Block::Nonneg(b) => {
                    let (x, si) = (x[j].as_vector(), s_inv[j].as_vector());
                    for (r, row) in b.rows.iter().enumerate() {
                        let w = x[r] * si[r];
                        for &(i, vi) in row {
                            for &(k, vk) in row {
                                mat[(i, k)] += w * vi * vk;
                            }
                        }
                    }
                }
                Block::Dense(b) => {
                    let (x, si) = (x[j].as_matrix(), s_inv[j].as_matrix());
                    let basis: Vec<&DMatrix<f64>> = b.coeffs.iter().chain(b.direct.iter().map(|(_, a)| a)).collect();
                    let nb = basis.len();
                    let d = b.coeffs.len();
                    let directs: Vec<usize> = b.direct.iter().map(|(v, _)| *v).collect();
                    if let Some(factor) = chol[j].as_ref().and_then(|pair| gram_factor(pair, &basis)) {
                        match b.map {
                            Some(mi) => map_factors[mi].push((factor, d, directs)),
                            None => {
                                for (a, &va) in directs.iter().enumerate() {
                                    for (c, &vc) in directs.iter().enumerate() {
                                        mat[(va, vc)] += factor.column(d + a).dot(&factor.column(d + c));
                                    }
                                }
                            }
                        }
                        continue;
                    }
                    let products: Vec<DMatrix<f64>> = basis.iter().map(|a| x * *a * si).collect();
                    let mut k = DMatrix::zeros(nb, nb);
                    for a in 0..nb {
                        for c in a..nb {
                            let v = 0.5 * (basis[a].dot(&products[c]) + basis[c].dot(&products[a]));
                            k[(a, c)] = v;
                            k[(c, a)] = v;
                        }
                    }
                    if let Some(mi) = b.map {
                        let kmm = k.view((0, 0), (d, d)).into_owned();
                        match &mut map_acc[mi] {
                            Some(acc) => *acc += kmm,
                            slot @ None => *slot = Some(kmm),
                        }
                        let map = &prob.maps[mi];
                        for (a, (var, _)) in b.direct.iter().enumerate() {
                            let cross = k.view((d + a, 0), (1, d)) * map;
                            for col in 0..m {
                                mat[(*var, col)] += cross[col];
                                mat[(col, *var)] += cross[col];
                            }
                        }
                    }
                    for (a, (va, _)) in b.direct.iter().enumerate() {
                        for (c, (vc, _)) in b.direct.iter().enumerate() {
                            mat[(*va, *vc)] += k[(d + a, d + c)];
                        }
                    }
                }
                Block::Sparse(b) => {
                    let (x, si) = (x[j].as_matrix(), s_inv[j].as_matrix());
                    let terms = &b.terms;
                    for t1 in 0..terms.len() {
                        let (v1, e1) = &terms[t1];
                        for t2 in t1..terms.len() {
                            let (v2, e2) = &terms[t2];
                            let mut acc = 0.0;
                            for &(r, c, a) in e1 {
                                for &(r2, c2, w) in e2 {
                                    acc += a * w * x[(c, r2)] * si[(c2, r)];
                                }
                            }
                            if t1 == t2 {
                                mat[(*v1, *v1)] += acc;
                            } else {
                                mat[(*v1, *v2)] += acc;
                                mat[(*v2, *v1)] += acc;
                            }
                        }
                    }
                }
            }
        }
        for (mi, parts) in map_factors.into_iter().enumerate() {
            if parts.is_empty() {
                continue;
            }
            let map = &prob.maps[mi];
            let nc = map.nrows();
            let mut vars: Vec<usize> = parts.iter().flat_map(|(_, _, v)| v.iter().copied()).collect();
            vars.sort_unstable();
            vars.dedup();
            let rows: usize = parts.iter().map(|(f, _, _)| f.nrows()).sum();
            let mut stacked = DMatrix::zeros(rows, nc + vars.len());
            let mut r0 = 0;
            for (f, d, directs) in &parts {
                stacked.view_mut((r0, 0), (f.nrows(), *d)).copy_from(&f.columns(0, *d));
                for (a, v) in directs.iter().enumerate() {
                    let col = nc + vars.binary_search(v).expect("variable listed");
                    stacked.view_mut((r0, col), (f.nrows(), 1)).copy_from(&f.column(d + a));
                }
                r0 += f.nrows();
            }
            let r = if stacked.nrows() > stacked.ncols() { stacked.qr().r() } else { stacked };
            let mut g = r.columns(0, nc) * map;
            for (c, &v) in vars.iter().enumerate() {
                let mut col = g.column_mut(v);
                col += r.column(nc + c);
            }
            mat.gemm_tr(1.0, &g, &g, 1.0);
        }
        for (mi, acc) in map_acc.into_iter().enumerate() {
            if let Some(k) = acc {
                let map = &prob.maps[mi];
                let km = &k * map;
                mat.gemm_tr(1.0, map, &km, 1.0);
            }
        }
        mat
    }
}

/// Lower Cholesky factors of a primal/slack pair.
struct CholPair {
    lx: DMatrix<f64>,
    ls: DMatrix<f64>,
}

impl CholPair {
    fn new(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Self> {
        Some(Self { lx: Cholesky::new(x.clone())?.l(), ls: Cholesky::new(s.clone())?.l() })
    }

    /// `L_s⁻¹ m`.
    fn whiten(&self, m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.ls.solve_lower_triangular(m)
    }
}

/// Columns `vec(L_s⁻¹ A_a L_x)`, so that `⟨A_a, X A_c S⁻¹⟩` is the Gram matrix.
fn gram_factor(pair: &CholPair, basis: &[&DMatrix<f64>]) -> Option<DMatrix<f64>> {
    let n = pair.lx.nrows();
    let mut out = DMatrix::zeros(n * n, basis.len());
    for (a, m) in basis.iter().enumerate() {
        let w = pair.whiten(&(*m * &pair.lx))?;
        out.column_mut(a).copy_from_slice(w.as_slice());
    }
    Some(out)
}

struct Factor {
    /// Cholesky factor of `D M D` with `D = diag(M)^{-1/2}`.
    chol: Cholesky<f64, Dyn>,
    d: DVector<f64>,
    /// `M⁻¹ Eᵀ` and the Cholesky factor of `E M⁻¹ Eᵀ`.
    eq: Option<(DMatrix<f64>, Cholesky<f64, Dyn>)>,
}

impl Factor {
    fn solve_m(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut v = b.component_mul(&self.d);
        self.chol.solve_mut(&mut v);
        v.component_mul(&self.d)
    }

    fn solve_m_cols(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b.clone();
        for mut col in out.column_iter_mut() {
            let v = self.solve_m(&col.clone_owned());
            col.copy_from(&v);
        }
        out
    }
}

fn factor(mut mat: DMatrix<f64>, eq: Option<&DMatrix<f64>>, iteration: usize) -> Result<Factor, ConicError> {
    let peak = mat.diagonal().amax().max(1e-300);
    let d = mat.diagonal().map(|v| 1.0 / v.max(1e-30 * peak).sqrt());
    for c in 0..mat.ncols() {
        for r in 0..mat.nrows() {
            mat[(r, c)] *= d[r] * d[c];
        }
    }
    let mut chol = Cholesky::new(mat.clone());
    let mut reg = 1e-14;
    while chol.is_none() && reg < 1.0 {
        let mut regularized = mat.clone();
        for i in 0..regularized.nrows() {
            regularized[(i, i)] += reg;
        }
        chol = Cholesky::new(regularized);
        reg *= 100.0;
    }
    let chol = chol.ok_or_else(|| ConicError::Numerical { iteration, reason: "Schur complement not positive definite".into() })?;
    let mut fac = Factor { chol, d, eq: None };
    if let Some(e) = eq {
        let q = fac.solve_m_cols(&e.transpose());
        let eqm = e * &q;
        let ec = Cholesky::new(eqm).ok_or_else(|| ConicError::Numerical {
            iteration,
            reason: "equality constraints are linearly dependent".into(),
        })?;
        fac.eq = Some((q, ec));
    }
    Ok(fac)
}

pub fn solve(prob: &Problem, settings: &Settings) -> Result<Solution, ConicError> {
    prob.validate()?;
    let dims: Vec<usize> = prob.blocks.iter().map(Block::dim).collect();
    let nu = dims.iter().sum::<usize>().max(1) as f64;
    let (e_mat, h_vec) = match &prob.equalities {
        Some((e, h)) => (Some(e.clone()), h.clone()),
        None => (None, DVector::zeros(0)),
    };
    let neq = h_vec.len();
    let ws = Workspace { prob, dims, nu, neq };

    let c = &prob.objective;
    let constants: Vec<BlockValue> = (0..prob.blocks.len()).map(|j| prob.constant(j)).collect();
    let c_norm = c.norm();
    let const_norm = constants.iter().map(BlockValue::norm_squared).sum::<f64>().sqrt();
    let h_norm = h_vec.norm();

    let mut it = initial_point(&ws, &constants);
    let mut last: Option<Solution> = None;

    for iteration in 0..=settings.max_iter {
        let lin = ws.apply_linear(&it.y);
        let r_b: Vec<BlockValue> = lin
            .iter()
            .zip(&constants)
            .zip(&it.s)
            .map(|((l, cj), sj)| {
                let mut v = l.clone();
                v.axpy(1.0, cj);
                v.axpy(-1.0, sj);
                v
            })
            .collect();
        let mut r_a = c - ws.adjoint(&it.x);
        if let Some(e) = &e_mat {
            r_a.gemv_tr(-1.0, e, &it.lambda, 1.0);
        }
        let r_c = match &e_mat {
            Some(e) => &h_vec - e * &it.y,
            None => DVector::zeros(0),
        };

        let pobj = c.dot(&it.y);
        let dobj = -ws.inner(&constants, &it.x) + h_vec.dot(&it.lambda);
        let complementarity = ws.inner(&it.x, &it.s);
        let mu = complementarity / ws.nu;
        let denom = 1.0 + pobj.abs() + dobj.abs();
        let rel_gap = ((pobj - dobj).abs()).max(complementarity.abs()) / denom;
        let lmi_res = r_b.iter().map(BlockValue::norm_squared).sum::<f64>().sqrt() / (1.0 + const_norm);
        let dual_res = r_a.norm() / (1.0 + c_norm);
        let eq_res = r_c.norm() / (1.0 + h_norm);

        let snapshot = Solution {
            status: Status::MaxIterations,
            y: it.y.clone(),
            slack: it.s.clone(),
            dual: it.x.clone(),
            multipliers: it.lambda.clone(),
            objective: pobj,
            dual_objective: dobj,
            relative_gap: rel_gap,
            lmi_residual: lmi_res,
            dual_residual: dual_res,
            equality_residual: eq_res,
            iterations: iteration,
        };
        if settings.verbose {
            eprintln!(
                "it {iteration:3} pobj {pobj:+.8e} dobj {dobj:+.8e} gap {rel_gap:.2e} lmi {lmi_res:.2e} dual {dual_res:.2e} eq {eq_res:.2e} mu {mu:.2e}"
            );
        }
        if rel_gap < settings.gap_tol && lmi_res.max(dual_res).max(eq_res) < settings.feas_tol {
            return Ok(Solution { status: Status::Optimal, ..snapshot });
        }
        let keep = match &last {
            Some(prev) => snapshot.worst_error() <= prev.worst_error(),
            None => true,
        };
        if keep {
            last = Some(snapshot);
        }
        if iteration == settings.max_iter {
            break;
        }

        let step = newton_step(&ws, &it, &r_a, &r_b, &r_c, mu, e_mat.as_ref(), iteration);
        let (dir, alpha_p, alpha_d) = match step {
            Ok(v) => v,
            Err(e) => {
                if settings.verbose {
                    eprintln!("stop: {e}");
                }
                return Ok(finish_early(last, settings));
            }
        };
        if alpha_p.max(alpha_d) < 1e-10 {
            return Ok(finish_early(last, settings));
        }
        it.y.axpy(alpha_d, &dir.dy, 1.0);
        for (sj, dsj) in it.s.iter_mut().zip(&dir.ds) {
            sj.axpy(alpha_d, dsj);
        }
        for (xj, dxj) in it.x.iter_mut().zip(&dir.dx) {
            xj.axpy(alpha_p, dxj);
        }
        if ws.neq > 0 {
            it.lambda.axpy(alpha_p, &dir.dlambda, 1.0);
        }
    }
    Ok(finish_early(last, settings))
}

fn finish_early(last: Option<Solution>, settings: &Settings) -> Solution {
    let mut sol = last.expect("at least one iterate evaluated");
    sol.status = if sol.worst_error() < settings.inaccurate_tol {
        Status::Inaccurate
    } else if sol.iterations >= settings.max_iter {
        Status::MaxIterations
    } else {
        Status::NumericalError
    };
    sol
}

fn initial_point(ws: &Workspace, constants: &[BlockValue]) -> Iterate {
    let prob = ws.prob;
    let c = &prob.objective;
    let mut x = Vec::with_capacity(prob.blocks.len());
    let mut s = Vec::with_capacity(prob.blocks.len());
    for (j, block) in prob.blocks.iter().enumerate() {
        let n = ws.dims[j] as f64;
        let norms = prob.coefficient_norms(j);
        let mut xi = 10.0_f64.max(n.sqrt());
        let mut eta = 10.0_f64.max(n.sqrt()).max(constants[j].norm_squared().sqrt());
        for (i, &a) in norms.iter().enumerate() {
            if a > 0.0 {
                xi = xi.max(n.sqrt() * (1.0 + c[i].abs()) / (1.0 + a));
                eta = eta.max(a);
            }
        }
        let dim = ws.dims[j];
        if block.is_psd() {
            x.push(BlockValue::Matrix(DMatrix::identity(dim, dim) * xi));
            s.push(BlockValue::Matrix(DMatrix::identity(dim, dim) * eta));
        } else {
            x.push(BlockValue::Vector(DVector::from_element(dim, xi)));
            s.push(BlockValue::Vector(DVector::from_element(dim, eta)));
        }
    }
    Iterate { y: DVector::zeros(prob.num_vars), lambda: DVector::zeros(ws.neq), x, s }
}

#[allow(clippy::too_many_arguments)]
fn newton_step(
    ws: &Workspace,
    it: &Iterate,
    r_a: &DVector<f64>,
    r_b: &[BlockValue],
    r_c: &DVector<f64>,
    mu: f64,
    e_mat: Option<&DMatrix<f64>>,
    iteration: usize,
) -> Result<(Direction, f64, f64), ConicError> {
    let mut s_inv = Vec::with_capacity(it.s.len());
    for sj in &it.s {
        s_inv.push(match sj {
            BlockValue::Matrix(s) => BlockValue::Matrix(
                inverse_pd(s).ok_or_else(|| ConicError::Numerical { iteration, reason: "slack lost definiteness".into() })?,
            ),
            BlockValue::Vector(s) => {
                if s.iter().any(|v| *v <= 0.0) {
                    return Err(ConicError::Numerical { iteration, reason: "slack lost positivity".into() });
                }
                BlockValue::Vector(s.map(|v| 1.0 / v))
            }
        });
    }
    let pairs: Vec<Option<CholPair>> = it
        .x
        .iter()
        .zip(&it.s)
        .map(|(x, s)| match (x, s) {
            (BlockValue::Matrix(x), BlockValue::Matrix(s)) => CholPair::new(x, s),
            _ => None,
        })
        .collect();
    let schur = ws.schur(&it.x, &s_inv, &pairs);
    let fac = factor(schur, e_mat, iteration)?;

    // Predictor: affine-scaling direction.
    let g_aff: Vec<BlockValue> = it
        .x
        .iter()
        .map(|x| {
            let mut g = x.clone();
            match &mut g {
                BlockValue::Matrix(a) => *a *= -1.0,
                BlockValue::Vector(a) => *a *= -1.0,
            }
            g
        })
        .collect();
    let pred = direction(ws, it, &fac, &g_aff, r_a, r_b, r_c, &s_inv, e_mat);
    let ap = step_length(&it.x, &pred.dx, 1.0);
    let ad = step_length(&it.s, &pred.ds, 1.0);
    let mut x_aff = it.x.clone();
    let mut s_aff = it.s.clone();
    for j in 0..x_aff.len() {
        x_aff[j].axpy(ap, &pred.dx[j]);
        s_aff[j].axpy(ad, &pred.ds[j]);
    }
    let mu_aff = ws.inner(&x_aff, &s_aff) / ws.nu;
    let ratio = (mu_aff / mu).clamp(0.0, 1.0);
    let exponent = if ap.min(ad) > 0.2 { 3.0 } else { 2.0 };
    let sigma = ratio.powf(exponent).clamp(0.0, 1.0);

    // Corrector with second-order term.
    let g_cor: Vec<BlockValue> = (0..it.x.len())
        .map(|j| match (&it.x[j], &s_inv[j], &pred.dx[j], &pred.ds[j]) {
            (BlockValue::Matrix(x), BlockValue::Matrix(si), BlockValue::Matrix(dx), BlockValue::Matrix(ds)) => {
                let corr = sym(dx * ds * si);
                BlockValue::Matrix(si * (sigma * mu) - x - corr)
            }
            (BlockValue::Vector(x), BlockValue::Vector(si), BlockValue::Vector(dx), BlockValue::Vector(ds)) => {
                BlockValue::Vector(DVector::from_fn(x.len(), |r, _| sigma * mu * si[r] - x[r] - dx[r] * ds[r] * si[r]))
            }
            _ => unreachable!(),
        })
        .collect();
    let dir = direction(ws, it, &fac, &g_cor, r_a, r_b, r_c, &s_inv, e_mat);
    let ap_max = step_length(&it.x, &dir.dx, f64::INFINITY);
    let ad_max = step_length(&it.s, &dir.ds, f64::INFINITY);
    let fraction = 0.9 + 0.08 * ap.min(ad);
    let alpha_p = (fraction * ap_max).min(1.0);
    let alpha_d = (fraction * ad_max).min(1.0);
    Ok((dir, alpha_p, alpha_d))
}

const REFINEMENT_STEPS: usize = 8;

/// Solves `M dy − Eᵀ dλ = −rhs`, `E dy = r_c`.
fn solve_reduced(ws: &Workspace, fac: &Factor, rhs: &DVector<f64>, r_c: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let w = fac.solve_m(rhs);
    match &fac.eq {
        Some((q, ec)) => {
            let e = ws.prob.equalities.as_ref().map(|(e, _)| e).expect("equalities present");
            let dl = ec.solve(&(r_c + e * &w));
            (q * &dl - &w, dl)
        }
        None => (-w, DVector::zeros(0)),
    }
}

/// `dx += α·sym(X A(dy) S⁻¹)` blockwise.
fn add_scaled_x(dx: &mut [BlockValue], ws: &Workspace, it: &Iterate, dy: &DVector<f64>, s_inv: &[BlockValue], alpha: f64) {
    let lin = ws.apply_linear(dy);
    for j in 0..dx.len() {
        match (&mut dx[j], &it.x[j], &lin[j], &s_inv[j]) {
            (BlockValue::Matrix(d), BlockValue::Matrix(x), BlockValue::Matrix(l), BlockValue::Matrix(si)) => {
                *d += sym(x * l * si) * alpha;
            }
            (BlockValue::Vector(d), BlockValue::Vector(x), BlockValue::Vector(l), BlockValue::Vector(si)) => {
                for r in 0..d.len() {
                    d[r] += alpha * x[r] * l[r] * si[r];
                }
            }
            _ => unreachable!(),
        }
    }
}

fn step_length(x: &[BlockValue], dx: &[BlockValue], cap: f64) -> f64 {
    x.iter().zip(dx).map(|(x, d)| max_step(x, d)).fold(cap, f64::min)
}

#[allow(clippy::too_many_arguments)]
fn direction(
    ws: &Workspace,
    it: &Iterate,
    fac: &Factor,
    g: &[BlockValue],
    r_a: &DVector<f64>,
    r_b: &[BlockValue],
    r_c: &DVector<f64>,
    s_inv: &[BlockValue],
    _e: Option<&DMatrix<f64>>,
) -> Direction {
    // t = G − sym(X R_b S⁻¹)
    let t: Vec<BlockValue> = (0..g.len())
        .map(|j| match (&g[j], &it.x[j], &r_b[j], &s_inv[j]) {
            (BlockValue::Matrix(g), BlockValue::Matrix(x), BlockValue::Matrix(rb), BlockValue::Matrix(si)) => {
                BlockValue::Matrix(g - sym(x * rb * si))
            }
            (BlockValue::Vector(g), BlockValue::Vector(x), BlockValue::Vector(rb), BlockValue::Vector(si)) => {
                BlockValue::Vector(DVector::from_fn(g.len(), |r, _| g[r] - x[r] * rb[r] * si[r]))
            }
            _ => unreachable!(),
        })
        .collect();
    let rhs = r_a - ws.adjoint(&t);
    let (mut dy, mut dlambda) = solve_reduced(ws, fac, &rhs, r_c);
    let mut dx = t;
    add_scaled_x(&mut dx, ws, it, &dy, s_inv, -1.0);
    // iterative refinement against the unfactored operator
    for _ in 0..REFINEMENT_STEPS {
        let mut r1 = r_a - ws.adjoint(&dx);
        let mut r2 = r_c.clone();
        if let (Some(e), true) = (ws.prob.equalities.as_ref().map(|(e, _)| e), ws.neq > 0) {
            r1.gemv_tr(-1.0, e, &dlambda, 1.0);
            r2 -= e * &dy;
        }
        if r1.amax() <= 1e-15 * (1.0 + r_a.amax()) && r2.amax() <= 1e-15 * (1.0 + r_c.amax()) {
            break;
        }
        let (cy, cl) = solve_reduced(ws, fac, &r1, &r2);
        dy += &cy;
        if ws.neq > 0 {
            dlambda += &cl;
        }
        add_scaled_x(&mut dx, ws, it, &cy, s_inv, -1.0);
    }
    let lin = ws.apply_linear(&dy);
    let ds: Vec<BlockValue> = (0..g.len())
        .map(|j| {
            let mut dsj = r_b[j].clone();
            dsj.axpy(1.0, &lin[j]);
            dsj
        })
        .collect();
    Direction { dy, dlambda, dx, ds }
}
