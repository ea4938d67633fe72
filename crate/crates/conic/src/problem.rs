use nalgebra::{DMatrix, DVector};

use crate::ConicError;

/// Nonnegative orthant: `s_r = offset_r + Σ_(i,v) v·y_i ≥ 0`.
#[derive(Debug, Clone)]
pub struct NonnegBlock {
    pub offset: DVector<f64>,
    /// One sparse row `(variable, coefficient)` per component.
    pub rows: Vec<Vec<(usize, f64)>>,
}

/// Dense PSD block `S = C + Σ_k (L y)_k Ψ_k + Σ_a y_{var_a} Φ_a`.
///
/// `map` indexes [`Problem::maps`]; blocks sharing a map share the Schur
/// complement product.
#[derive(Debug, Clone)]
pub struct DenseBlock {
    pub constant: DMatrix<f64>,
    pub map: Option<usize>,
    pub coeffs: Vec<DMatrix<f64>>,
    pub direct: Vec<(usize, DMatrix<f64>)>,
}

/// PSD block whose coefficient matrices are sparse.
///
/// Each term lists the nonzero entries of a symmetric matrix `A_i`; both
/// triangles must be listed for off-diagonal entries.
#[derive(Debug, Clone)]
pub struct SparseBlock {
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, Vec<(usize, usize, f64)>)>,
}

#[derive(Debug, Clone)]
pub enum Block {
    Nonneg(NonnegBlock),
    Dense(DenseBlock),
    Sparse(SparseBlock),
}

impl Block {
    pub fn dim(&self) -> usize {
        match self {
            Block::Nonneg(b) => b.offset.len(),
            Block::Dense(b) => b.constant.nrows(),
            Block::Sparse(b) => b.constant.nrows(),
        }
    }

    pub(crate) fn is_psd(&self) -> bool {
        !matches!(self, Block::Nonneg(_))
    }
}

#[derive(Debug, Clone)]
pub struct Problem {
    pub num_vars: usize,
    pub objective: DVector<f64>,
    pub maps: Vec<DMatrix<f64>>,
    /// Equality constraints `E y = h`.
    pub equalities: Option<(DMatrix<f64>, DVector<f64>)>,
    pub blocks: Vec<Block>,
}

impl Problem {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: DVector::zeros(num_vars),
            maps: Vec::new(),
            equalities: None,
            blocks: Vec::new(),
        }
    }

    /// Registers a coordinate map and returns its index.
    pub fn add_map(&mut self, map: DMatrix<f64>) -> usize {
        self.maps.push(map);
        self.maps.len() - 1
    }

    pub fn add_block(&mut self, block: Block) {
        self.blocks.push(block);
    }

    pub fn add_equality(&mut self, row: DVector<f64>, rhs: f64) {
        let (e, h) = match self.equalities.take() {
            None => (DMatrix::from_row_slice(1, row.len(), row.as_slice()), DVector::from_element(1, rhs)),
            Some((e, h)) => {
                let p = e.nrows();
                let mut e2 = e.insert_row(p, 0.0);
                e2.row_mut(p).copy_from(&row.transpose());
                let h2 = h.push(rhs);
                (e2, h2)
            }
        };
        self.equalities = Some((e, h));
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let m = self.num_vars;
        let bad = |s: String| Err(ConicError::Malformed(s));
        if self.objective.len() != m {
            return bad(format!("objective has {} entries, expected {m}", self.objective.len()));
        }
        for (k, map) in self.maps.iter().enumerate() {
            if map.ncols() != m {
                return bad(format!("map {k} has {} columns, expected {m}", map.ncols()));
            }
        }
        if let Some((e, h)) = &self.equalities {
            if e.ncols() != m || e.nrows() != h.len() {
                return bad("equality shape mismatch".into());
            }
        }
        for (j, block) in self.blocks.iter().enumerate() {
            match block {
                Block::Nonneg(b) => {
                    if b.rows.len() != b.offset.len() {
                        return bad(format!("block {j}: row count mismatch"));
                    }
                    if b.rows.iter().flatten().any(|&(i, _)| i >= m) {
                        return bad(format!("block {j}: variable index out of range"));
                    }
                }
                Block::Dense(b) => {
                    let n = b.constant.nrows();
                    if b.constant.ncols() != n {
                        return bad(format!("block {j}: constant not square"));
                    }
                    match b.map {
                        Some(k) => {
                            let Some(map) = self.maps.get(k) else {
                                return bad(format!("block {j}: unknown map {k}"));
                            };
                            if map.nrows() != b.coeffs.len() {
                                return bad(format!("block {j}: map rows != coefficient count"));
                            }
                        }
                        None if !b.coeffs.is_empty() => {
                            return bad(format!("block {j}: coefficients without a map"));
                        }
                        None => {}
                    }
                    let shapes_ok = b.coeffs.iter().chain(b.direct.iter().map(|(_, a)| a)).all(|a| a.shape() == (n, n));
                    if !shapes_ok {
                        return bad(format!("block {j}: coefficient shape mismatch"));
                    }
                    if b.direct.iter().any(|&(i, _)| i >= m) {
                        return bad(format!("block {j}: variable index out of range"));
                    }
                }
                Block::Sparse(b) => {
                    let n = b.constant.nrows();
                    for (i, entries) in &b.terms {
                        if *i >= m {
                            return bad(format!("block {j}: variable index out of range"));
                        }
                        if entries.iter().any(|&(r, c, _)| r >= n || c >= n) {
                            return bad(format!("block {j}: entry out of range"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluates the linear part `Σ_i y_i A_{j,i}` of block `j`.
    pub(crate) fn apply_linear(&self, j: usize, y: &DVector<f64>) -> BlockValue {
        match &self.blocks[j] {
            Block::Nonneg(b) => BlockValue::Vector(DVector::from_iterator(
                b.rows.len(),
                b.rows.iter().map(|row| row.iter().map(|&(i, v)| v * y[i]).sum()),
            )),
            Block::Dense(b) => {
                let n = b.constant.nrows();
                let mut s = DMatrix::zeros(n, n);
                if let Some(k) = b.map {
                    let z = &self.maps[k] * y;
                    for (zk, psi) in z.iter().zip(&b.coeffs) {
                        if *zk != 0.0 {
                            add_scaled(&mut s, *zk, psi);
                        }
                    }
                }
                for (i, phi) in &b.direct {
                    add_scaled(&mut s, y[*i], phi);
                }
                BlockValue::Matrix(s)
            }
            Block::Sparse(b) => {
                let n = b.constant.nrows();
                let mut s = DMatrix::zeros(n, n);
                for (i, entries) in &b.terms {
                    let yi = y[*i];
                    for &(r, c, v) in entries {
                        s[(r, c)] += v * yi;
                    }
                }
                BlockValue::Matrix(s)
            }
        }
    }

    /// Accumulates `out_i += ⟨A_{j,i}, x⟩`.
    pub(crate) fn adjoint_into(&self, j: usize, x: &BlockValue, out: &mut DVector<f64>) {
        match (&self.blocks[j], x) {
            (Block::Nonneg(b), BlockValue::Vector(x)) => {
                for (row, xr) in b.rows.iter().zip(x.iter()) {
                    for &(i, v) in row {
                        out[i] += v * xr;
                    }
                }
            }
            (Block::Dense(b), BlockValue::Matrix(x)) => {
                if let Some(k) = b.map {
                    let w = DVector::from_iterator(b.coeffs.len(), b.coeffs.iter().map(|psi| psi.dot(x)));
                    out.gemv_tr(1.0, &self.maps[k], &w, 1.0);
                }
                for (i, phi) in &b.direct {
                    out[*i] += phi.dot(x);
                }
            }
            (Block::Sparse(b), BlockValue::Matrix(x)) => {
                for (i, entries) in &b.terms {
                    out[*i] += entries.iter().map(|&(r, c, v)| v * x[(r, c)]).sum::<f64>();
                }
            }
            _ => unreachable!("block/value kind mismatch"),
        }
    }

    pub(crate) fn constant(&self, j: usize) -> BlockValue {
        match &self.blocks[j] {
            Block::Nonneg(b) => BlockValue::Vector(b.offset.clone()),
            Block::Dense(b) => BlockValue::Matrix(b.constant.clone()),
            Block::Sparse(b) => BlockValue::Matrix(b.constant.clone()),
        }
    }

    /// Upper bound on the Frobenius norm of each coefficient matrix of block `j`.
    pub(crate) fn coefficient_norms(&self, j: usize) -> DVector<f64> {
        let mut norms = DVector::zeros(self.num_vars);
        match &self.blocks[j] {
            Block::Nonneg(b) => {
                for row in &b.rows {
                    for &(i, v) in row {
                        norms[i] += v * v;
                    }
                }
                norms.apply(|v: &mut f64| *v = v.sqrt());
            }
            Block::Dense(b) => {
                if let Some(k) = b.map {
                    let map = &self.maps[k];
                    for (row, psi) in map.row_iter().zip(&b.coeffs) {
                        let pn = psi.norm();
                        for (i, v) in row.iter().enumerate() {
                            norms[i] += v.abs() * pn;
                        }
                    }
                }
                for (i, phi) in &b.direct {
                    norms[*i] += phi.norm();
                }
            }
            Block::Sparse(b) => {
                for (i, entries) in &b.terms {
                    norms[*i] += entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
                }
            }
        }
        norms
    }
}

pub(crate) fn add_scaled(a: &mut DMatrix<f64>, alpha: f64, b: &DMatrix<f64>) {
    a.zip_apply(b, |x, y| *x += alpha * y);
}

/// Per-block value: a symmetric matrix for PSD blocks, a vector for orthants.
#[derive(Debug, Clone)]
pub enum BlockValue {
    Matrix(DMatrix<f64>),
    Vector(DVector<f64>),
}

impl BlockValue {
    pub fn dot(&self, other: &BlockValue) -> f64 {
        match (self, other) {
            (BlockValue::Matrix(a), BlockValue::Matrix(b)) => a.dot(b),
            (BlockValue::Vector(a), BlockValue::Vector(b)) => a.dot(b),
            _ => unreachable!("block value kind mismatch"),
        }
    }

    pub fn norm_squared(&self) -> f64 {
        match self {
            BlockValue::Matrix(a) => a.norm_squared(),
            BlockValue::Vector(a) => a.norm_squared(),
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &BlockValue) {
        match (self, other) {
            (BlockValue::Matrix(a), BlockValue::Matrix(b)) => add_scaled(a, alpha, b),
            (BlockValue::Vector(a), BlockValue::Vector(b)) => a.axpy(alpha, b, 1.0),
            _ => unreachable!("block value kind mismatch"),
        }
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        match self {
            BlockValue::Matrix(a) => a,
            BlockValue::Vector(_) => panic!("expected matrix block value"),
        }
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        match self {
            BlockValue::Vector(a) => a,
            BlockValue::Matrix(_) => panic!("expected vector block value"),
        }
    }
}
