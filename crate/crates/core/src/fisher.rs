//! Fisher information of the channel and position parameters, and the PEB.
//!
//! Every channel derivative has the form `∂H_k/∂η_i = c_{k,i} u_i v_iᵀ`
//! with `u_i ∈ {a_rx, ȧ_rx}` and `v_i ∈ {a_tx(θ_g), ȧ_tx(θ_g)}`. The FIM
//! therefore depends on the precoder covariance only through the `2G×2G`
//! Hermitian matrix `Γ = Vᵀ X V̄`, `V = [a_tx(θ_0) … ȧ_tx(θ_0) …]`, and
//! [`FimModel`] stores the position-domain FIM as a linear function of the
//! `(2G)²` real coordinates of `Γ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector2};

use crate::hermitian;
use crate::{arrays, geometry};
use crate::{Arrays, ChannelParams, Error, OfdmConfig, PositionParams, Result, Scenario, C64, SPEED_OF_LIGHT};

/// Condition-number bound beyond which the FIM is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Gaussian clock-bias prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockPrior {
    /// Prior information on `Δt` in 1/s².
    pub j_clk: f64,
}

impl ClockPrior {
    pub fn none() -> Self {
        Self { j_clk: 0.0 }
    }

    /// Prior with standard deviation `sigma_m` meters (i.e. `sigma_m / c` seconds).
    pub fn from_std_m(sigma_m: f64) -> Result<Self> {
        if !(sigma_m > 0.0) || !sigma_m.is_finite() {
            return Err(Error::InvalidInput(format!(
                "clock-bias standard deviation must be positive and finite, got {sigma_m}"
            )));
        }
        let s = sigma_m / SPEED_OF_LIGHT;
        Ok(Self { j_clk: 1.0 / (s * s) })
    }

    /// Standard deviation in meters, infinite without a prior.
    pub fn sigma_m(&self) -> f64 {
        if self.j_clk > 0.0 {
            SPEED_OF_LIGHT / self.j_clk.sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// Hermitian PSD precoder covariance `X = L F Fᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderCovariance {
    pub x: DMatrix<C64>,
    /// Trace target `P_tot / K` in mW.
    pub power_budget: f64,
}

impl PrecoderCovariance {
    pub fn new(x: DMatrix<C64>, power_budget: f64) -> Result<Self> {
        if !x.is_square() {
            return Err(Error::DimensionMismatch("precoder covariance must be square".into()));
        }
        let scale = x.norm().max(f64::MIN_POSITIVE);
        if (&x - x.adjoint()).norm() > 1e-9 * scale {
            return Err(Error::InvalidInput("precoder covariance is not Hermitian".into()));
        }
        let trace = x.trace().re;
        let (vals, _) = hermitian::eigh(&x);
        if !vals.is_empty() && vals[0] < -1e-9 * trace.abs().max(scale) {
            return Err(Error::InvalidInput(format!("precoder covariance is not PSD (λ_min = {:.3e})", vals[0])));
        }
        Ok(Self { x: hermitian::hermitian_part(&x), power_budget })
    }

    /// `(budget / n) I`.
    pub fn uniform(n: usize, power_budget: f64) -> Self {
        Self {
            x: DMatrix::identity(n, n) * C64::new(power_budget / n as f64, 0.0),
            power_budget,
        }
    }

    /// `X = L F Fᴴ`.
    pub fn from_precoder(f: &DMatrix<C64>, symbols_per_beam: usize, power_budget: f64) -> Self {
        let x = f * f.adjoint() * C64::new(symbols_per_beam as f64, 0.0);
        Self { x: hermitian::hermitian_part(&x), power_budget }
    }

    pub fn trace(&self) -> f64 {
        self.x.trace().re
    }

    /// Rescales `X` so that its trace equals the budget.
    pub fn finalized(mut self) -> Self {
        let t = self.trace();
        if t > 0.0 {
            self.x *= C64::new(self.power_budget / t, 0.0);
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimChannel {
    pub j: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FimPosition {
    pub j: DMatrix<f64>,
}

/// A PEB value, `+∞` when the FIM is singular or too ill-conditioned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peb {
    pub value: f64,
    pub singular: bool,
}

impl Peb {
    pub fn singular() -> Self {
        Self { value: f64::INFINITY, singular: true }
    }

    pub fn squared(&self) -> f64 {
        self.value * self.value
    }
}

fn check_combiner(w: &DMatrix<C64>, arrays: &Arrays) -> Result<()> {
    if w.nrows() != arrays.rx.num_elements {
        return Err(Error::DimensionMismatch(format!(
            "combiner has {} rows, UE array has {} elements",
            w.nrows(),
            arrays.rx.num_elements
        )));
    }
    Ok(())
}

/// `J_ij = (2/σ²) Σ_k Re tr(X ∂H_kᴴ/∂η_i W Wᴴ ∂H_k/∂η_j)`, evaluated from
/// the explicit channel derivatives.
pub fn fim_channel(
    x: &PrecoderCovariance,
    params: &ChannelParams,
    arrays: &Arrays,
    cfg: &OfdmConfig,
    combiner: &DMatrix<C64>,
) -> Result<FimChannel> {
    check_combiner(combiner, arrays)?;
    if x.x.nrows() != arrays.tx.num_elements {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}×{}, BS array has {} elements",
            x.x.nrows(),
            x.x.ncols(),
            arrays.tx.num_elements
        )));
    }
    let p = 5 * params.num_paths();
    let wwh = combiner * combiner.adjoint();
    let mut j = DMatrix::zeros(p, p);
    for k in 0..cfg.num_subcarriers {
        let d = geometry::channel_derivatives(k, params, arrays, cfg)?;
        // left_i = X ∂H_iᴴ, right_j = W Wᴴ ∂H_j
        let left: Vec<_> = d.iter().map(|h| &x.x * h.adjoint()).collect();
        let right: Vec<_> = d.iter().map(|h| &wwh * h).collect();
        for a in 0..p {
            for b in a..p {
                let v = left[a].iter().zip(right[b].transpose().iter()).map(|(l, r)| l * r).sum::<C64>().re;
                j[(a, b)] += v;
            }
        }
    }
    let scale = 2.0 / cfg.noise_variance();
    for a in 0..p {
        for b in a..p {
            let v = j[(a, b)] * scale;
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    Ok(FimChannel { j })
}

/// `T_ij = ∂η_i / ∂η̃_j`.
pub fn jacobian_t(pos: &PositionParams, bs: &Vector2<f64>) -> Result<DMatrix<f64>> {
    let g_count = pos.num_paths();
    if pos.incidence_points.len() + 1 != g_count {
        return Err(Error::DimensionMismatch("incidence points do not match the path count".into()));
    }
    let c = SPEED_OF_LIGHT;
    let p = pos.ue_position;
    let q = *bs;
    let mut t = DMatrix::zeros(5 * g_count, 4 * g_count + 2);
    let (th, ph, ar, ai, ta) = (0, g_count, 2 * g_count, 3 * g_count, 4 * g_count);
    let col_r = |g: usize| 3 + 2 * (g - 1);
    let col_ar = 3 + 2 * (g_count - 1);
    let col_ai = col_ar + g_count;
    let col_dt = 4 * g_count + 1;

    let d = p - q;
    let dn2 = d.norm_squared();
    if dn2 <= 0.0 {
        return Err(Error::DegenerateGeometry("UE coincides with BS".into()));
    }
    let dn = dn2.sqrt();
    // LOS
    t[(th, 0)] = -d.y / dn2;
    t[(th, 1)] = d.x / dn2;
    t[(ph, 0)] = -d.y / dn2;
    t[(ph, 1)] = d.x / dn2;
    t[(ph, 2)] = -1.0;
    t[(ta, 0)] = d.x / (c * dn);
    t[(ta, 1)] = d.y / (c * dn);
    t[(ta, col_dt)] = 1.0;
    for g in 1..g_count {
        let r = pos.incidence_points[g - 1];
        let rq = r - q;
        let e = p - r;
        let (rq2, e2) = (rq.norm_squared(), e.norm_squared());
        if rq2 <= 0.0 || e2 <= 0.0 {
            return Err(Error::DegenerateGeometry(format!("incidence point {} coincides with BS or UE", g - 1)));
        }
        let cr = col_r(g);
        t[(th + g, cr)] = -rq.y / rq2;
        t[(th + g, cr + 1)] = rq.x / rq2;
        t[(ph + g, 0)] = -e.y / e2;
        t[(ph + g, 1)] = e.x / e2;
        t[(ph + g, cr)] = e.y / e2;
        t[(ph + g, cr + 1)] = -e.x / e2;
        t[(ph + g, 2)] = -1.0;
        let (rqn, en) = (rq2.sqrt(), e2.sqrt());
        t[(ta + g, 0)] = e.x / (c * en);
        t[(ta + g, 1)] = e.y / (c * en);
        t[(ta + g, cr)] = (rq.x / rqn - e.x / en) / c;
        t[(ta + g, cr + 1)] = (rq.y / rqn - e.y / en) / c;
        t[(ta + g, col_dt)] = 1.0;
    }
    for g in 0..g_count {
        t[(ar + g, col_ar + g)] = 1.0;
        t[(ai + g, col_ai + g)] = 1.0;
    }
    Ok(t)
}

fn prior_matrix(dim: usize, prior: ClockPrior) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    m[(dim - 1, dim - 1)] = prior.j_clk;
    m
}

/// `J̃ = TᵀJT + J^prior`.
pub fn fim_position(j: &FimChannel, t: &DMatrix<f64>, prior: ClockPrior) -> Result<FimPosition> {
    if t.nrows() != j.j.nrows() || !j.j.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "T is {}×{}, J is {}×{}",
            t.nrows(),
            t.ncols(),
            j.j.nrows(),
            j.j.ncols()
        )));
    }
    let mut out = t.transpose() * &j.j * t + prior_matrix(t.ncols(), prior);
    symmetrize(&mut out);
    Ok(FimPosition { j: out })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for a in 0..n {
        for b in a + 1..n {
            let v = 0.5 * (m[(a, b)] + m[(b, a)]);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
}

pub fn peb(j: &FimPosition) -> Peb {
    peb_of_matrix(&j.j)
}

/// PEB of a position-domain FIM whose first two parameters are the position.
///
/// Parameters whose row is identically zero carry no information and do not
/// couple to the position, so they are removed before inversion. The rest is
/// Jacobi-equilibrated, checked against [`MAX_CONDITION`] and factorised.
pub fn peb_of_matrix(j: &DMatrix<f64>) -> Peb {
    if j.nrows() < 2 {
        return Peb::singular();
    }
    peb_with_selector(j, &position_selector(j.nrows()))
}

/// `[e_0 e_1]` in `dim` coordinates.
pub fn position_selector(dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, 2, |i, b| if i == b { 1.0 } else { 0.0 })
}

/// `√(Σ_b s_bᵀ J⁻¹ s_b)` for the columns `s_b` of `selector`, which map the
/// coordinates of `J` to the two position components.
pub fn peb_with_selector(j: &DMatrix<f64>, selector: &DMatrix<f64>) -> Peb {
    let n = j.nrows();
    if n < 2 || !j.is_square() || selector.nrows() != n || j.iter().any(|v| !v.is_finite()) {
        return Peb::singular();
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| selector.row(i).iter().any(|&v| v != 0.0) || j.row(i).iter().any(|&v| v != 0.0))
        .collect();
    let sub = j.select_rows(&keep).select_columns(&keep);
    let d: Vec<f64> = (0..keep.len()).map(|i| sub[(i, i)]).collect();
    if d.iter().any(|&v| !(v > 0.0)) {
        return Peb::singular();
    }
    let s: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut a = DMatrix::from_fn(keep.len(), keep.len(), |r, c| sub[(r, c)] * s[r] * s[c]);
    symmetrize(&mut a);
    let eig = SymmetricEigen::new(a.clone());
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.max();
    if !(lmin > 0.0) || lmax / lmin > MAX_CONDITION {
        return Peb::singular();
    }
    let Some(chol) = a.cholesky() else {
        return Peb::singular();
    };
    let mut total = 0.0;
    for b in 0..selector.ncols() {
        let e = DVector::from_iterator(keep.len(), keep.iter().zip(&s).map(|(&i, si)| selector[(i, b)] * si));
        total += e.dot(&chol.solve(&e));
    }
    if !(total > 0.0) || !total.is_finite() {
        return Peb::singular();
    }
    Peb { value: total.sqrt(), singular: false }
}

/// FIM → PEB pipeline for a scenario with the identity combiner.
pub fn peb_of_precoder(
    x: &PrecoderCovariance,
    scn: &Scenario,
    arrays: &Arrays,
    cfg: &OfdmConfig,
    prior: ClockPrior,
) -> Result<Peb> {
    let (params, pos) = geometry::params_from_scenario(scn, cfg)?;
    let w = DMatrix::identity(arrays.rx.num_elements, arrays.rx.num_elements);
    let j = fim_channel(x, &params, arrays, cfg, &w)?;
    let t = jacobian_t(&pos, &scn.bs_position)?;
    Ok(peb(&fim_position(&j, &t, prior)?))
}

/// Position-domain FIM as a linear function of `Γ = Vᵀ X V̄`.
#[derive(Debug, Clone)]
pub struct FimModel {
    num_paths: usize,
    /// `V = [a_tx(θ_g)…, ȧ_tx(θ_g)…]`, `N_tx × 2G`.
    tx_vectors: DMatrix<C64>,
    channel_basis: Vec<DMatrix<f64>>,
    position_basis: Vec<DMatrix<f64>>,
    prior: DMatrix<f64>,
    /// Maps model coordinates to the two position components.
    selector: DMatrix<f64>,
    active: Vec<usize>,
}

/// Channel-parameter index of `θ_0`.
pub const LOS_AOD: usize = 0;

/// Channel-parameter index of `τ_0` for `g` paths.
pub fn los_delay_index(num_paths: usize) -> usize {
    4 * num_paths
}

impl FimModel {
    /// Model of a scenario with the identity combiner.
    pub fn from_scenario(scn: &Scenario, arrays: &Arrays, cfg: &OfdmConfig, prior: ClockPrior) -> Result<Self> {
        let (params, pos) = geometry::params_from_scenario(scn, cfg)?;
        Self::new(&params, &pos, &scn.bs_position, arrays, cfg, None, prior, &[])
    }

    /// General constructor. Channel parameters listed in `known` are treated
    /// as perfectly known, i.e. as carrying unbounded information: the
    /// position-domain model is restricted to the null space of their rows
    /// of `T`, and the position components are read through
    /// [`FimModel::selector`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &ChannelParams,
        pos: &PositionParams,
        bs: &Vector2<f64>,
        arrays: &Arrays,
        cfg: &OfdmConfig,
        combiner: Option<&DMatrix<C64>>,
        prior: ClockPrior,
        known: &[usize],
    ) -> Result<Self> {
        let g_count = params.num_paths();
        let p = 5 * g_count;
        if let Some(w) = combiner {
            check_combiner(w, arrays)?;
        }
        let lambda = cfg.wavelength();
        let n_tx = arrays.tx.num_elements;
        let mut v = DMatrix::zeros(n_tx, 2 * g_count);
        let mut rx = Vec::with_capacity(2 * g_count);
        for g in 0..g_count {
            v.set_column(g, &arrays::ula_steering(params.aod[g], &arrays.tx)?);
            v.set_column(g_count + g, &arrays::ula_derivative(params.aod[g], &arrays.tx)?);
        }
        for g in 0..g_count {
            rx.push(arrays::uca_steering(params.aoa[g], &arrays.rx, lambda)?);
        }
        for g in 0..g_count {
            rx.push(arrays::uca_derivative(params.aoa[g], &arrays.rx, lambda)?);
        }

        // per parameter: tx slot, rx vector index, coefficient sequence
        let kk = cfg.num_subcarriers;
        let mut slot = vec![0usize; p];
        let mut rx_of = vec![0usize; p];
        let mut coef = vec![vec![C64::new(0.0, 0.0); kk]; p];
        for g in 0..g_count {
            let alpha = params.gain[g];
            for k in 0..kk {
                let w = -2.0 * std::f64::consts::PI * k as f64 * cfg.subcarrier_spacing_hz;
                let e = C64::from_polar(1.0, w * params.delay[g]);
                coef[g][k] = alpha * e;
                coef[g_count + g][k] = alpha * e;
                coef[2 * g_count + g][k] = e;
                coef[3 * g_count + g][k] = C64::new(0.0, 1.0) * e;
                coef[4 * g_count + g][k] = C64::new(0.0, w) * alpha * e;
            }
            slot[g] = g_count + g;
            rx_of[g] = g;
            slot[g_count + g] = g;
            rx_of[g_count + g] = g_count + g;
            for blk in 2..5 {
                slot[blk * g_count + g] = g;
                rx_of[blk * g_count + g] = g;
            }
        }
        let rx_gram = DMatrix::from_fn(2 * g_count, 2 * g_count, |a, b| match combiner {
            None => rx[a].dotc(&rx[b]),
            Some(w) => (w.adjoint() * &rx[a]).dotc(&(w.adjoint() * &rx[b])),
        });
        let scale = 2.0 / cfg.noise_variance();
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let kappa: C64 = coef[i].iter().zip(&coef[j]).map(|(a, b)| a.conj() * b).sum();
                m[(i, j)] = kappa * rx_gram[(rx_of[i], rx_of[j])] * scale;
            }
        }
        let dim = 2 * g_count;
        let coords = hermitian::coords(dim);
        let mut channel_basis = Vec::with_capacity(coords.len());
        for q in 0..coords.len() {
            let mut z = vec![0.0; coords.len()];
            z[q] = 1.0;
            let e = hermitian::from_coords(dim, &z);
            let mut psi = DMatrix::from_fn(p, p, |i, j| (m[(i, j)] * e[(slot[j], slot[i])]).re);
            symmetrize(&mut psi);
            channel_basis.push(psi);
        }
        let t = jacobian_t(pos, bs)?;
        let position_basis: Vec<_> = channel_basis
            .iter()
            .map(|psi| {
                let mut b = t.transpose() * psi * &t;
                symmetrize(&mut b);
                b
            })
            .collect();
        let dim_pos = 4 * g_count + 2;
        let prior_m = prior_matrix(dim_pos, prior);
        let informative = |basis: &[DMatrix<f64>], prior: &DMatrix<f64>, selector: &DMatrix<f64>| -> Vec<usize> {
            (0..prior.nrows())
                .filter(|&i| {
                    selector.row(i).iter().any(|&v| v != 0.0)
                        || prior.row(i).iter().any(|&v| v != 0.0)
                        || basis.iter().any(|b| b.row(i).iter().any(|&v| v != 0.0))
                })
                .collect()
        };
        let selector = position_selector(dim_pos);
        let active = informative(&position_basis, &prior_m, &selector);
        let model = Self {
            num_paths: g_count,
            tx_vectors: v,
            channel_basis,
            position_basis,
            prior: prior_m,
            selector,
            active,
        };
        if known.is_empty() {
            return Ok(model);
        }
        if let Some(&bad) = known.iter().find(|&&k| k >= p) {
            return Err(Error::InvalidInput(format!("known parameter {bad} out of range for {p} channel parameters")));
        }
        let u = constraint_null_space(&t.select_rows(known).select_columns(&model.active))?;
        let restrict = |m: &DMatrix<f64>| {
            let sub = m.select_rows(&model.active).select_columns(&model.active);
            let mut out = u.transpose() * sub * &u;
            symmetrize(&mut out);
            out
        };
        let position_basis: Vec<_> = model.position_basis.iter().map(restrict).collect();
        let prior_r = restrict(&model.prior);
        let selector = u.transpose() * model.selector.select_rows(&model.active);
        let active = informative(&position_basis, &prior_r, &selector);
        Ok(Self { position_basis, prior: prior_r, selector, active, ..model })
    }

    pub fn num_paths(&self) -> usize {
        self.num_paths
    }

    pub fn tx_vectors(&self) -> &DMatrix<C64> {
        &self.tx_vectors
    }

    /// `B_q` such that `J̃ = Σ_q γ_q B_q + J^prior`.
    pub fn position_basis(&self) -> &[DMatrix<f64>] {
        &self.position_basis
    }

    pub fn channel_basis(&self) -> &[DMatrix<f64>] {
        &self.channel_basis
    }

    pub fn prior(&self) -> &DMatrix<f64> {
        &self.prior
    }

    /// `D × 2` map from model coordinates to the position components.
    pub fn selector(&self) -> &DMatrix<f64> {
        &self.selector
    }

    /// Model coordinates that are not structurally unidentifiable.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Real coordinates of `Γ = Vᵀ X V̄`.
    pub fn gamma(&self, x: &DMatrix<C64>) -> DVector<f64> {
        let vt = self.tx_vectors.transpose();
        let gamma = &vt * x * vt.adjoint();
        hermitian::to_coords(&hermitian::hermitian_part(&gamma))
    }

    pub fn channel_fim(&self, x: &DMatrix<C64>) -> DMatrix<f64> {
        combine(&self.channel_basis, &self.gamma(x), None)
    }

    pub fn position_fim_from_gamma(&self, gamma: &DVector<f64>) -> DMatrix<f64> {
        combine(&self.position_basis, gamma, Some(&self.prior))
    }

    pub fn position_fim(&self, x: &DMatrix<C64>) -> DMatrix<f64> {
        self.position_fim_from_gamma(&self.gamma(x))
    }

    pub fn peb(&self, x: &DMatrix<C64>) -> Peb {
        peb_with_selector(&self.position_fim(x), &self.selector)
    }
}

/// Basis of `{v : C v = 0}` with columns of `C` equilibrated first, so that
/// parameters with very different units are resolved alike.
fn constraint_null_space(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = c.ncols();
    let scale: Vec<f64> = (0..n)
        .map(|j| {
            let m = c.column(j).amax();
            if m > 0.0 { 1.0 / m } else { 1.0 }
        })
        .collect();
    let mut cs = DMatrix::from_fn(c.nrows(), n, |i, j| c[(i, j)] * scale[j]);
    for mut row in cs.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let eig = SymmetricEigen::new(cs.transpose() * &cs);
    let lmax = eig.eigenvalues.max();
    let null: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-10 * lmax.max(1e-300)).collect();
    if n - null.len() != c.nrows() {
        return Err(Error::DegenerateGeometry("known parameters are not independent functions of the position".into()));
    }
    Ok(DMatrix::from_fn(n, null.len(), |i, k| scale[i] * eig.eigenvectors[(i, null[k])]))
}

fn combine(basis: &[DMatrix<f64>], z: &DVector<f64>, offset: Option<&DMatrix<f64>>) -> DMatrix<f64> {
    let n = basis[0].nrows();
    let mut out = offset.cloned().unwrap_or_else(|| DMatrix::zeros(n, n));
    for (b, &zq) in basis.iter().zip(z.iter()) {
        if zq != 0.0 {
            out.zip_apply(b, |o, v| *o += zq * v);
        }
    }
    out
}
