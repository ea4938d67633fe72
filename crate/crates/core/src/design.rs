//! Semidefinite precoder design.
//!
//! All designs share one worst-case epigraph formulation over a set of FIM
//! models (a single model is the perfect-knowledge case):
//!
//! ```text
//! minimize    t
//! subject to  [D J̃_n(X) D  D s_b; s_bᵀ D u_{n,b}] ⪰ 0     b = 0, 1, every n
//!             t ≥ Σ_b D_{n,b}² u_{n,b}
//!             tr X = P_tot/K,  X ⪰ 0
//! ```
//!
//! `s_b` selects the position components (`e_b` unless parameters are
//! constrained as known). `D_n` is a diagonal equilibration of `J̃_n` at a
//! reference covariance and removes parameters with no information. `X` is expressed in one of three
//! [`Parameterization`]s: the full Hermitian matrix, a Hermitian matrix in a
//! subspace `X = U Λ Uᴴ`, or nonnegative powers on fixed beams.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use conic::{Block, DenseBlock, NonnegBlock, Problem, Settings, SparseBlock, Status};

use crate::arrays;
use crate::fisher::{ClockPrior, FimModel, Peb, PrecoderCovariance};
use crate::geometry::{self, seeded_phases};
use crate::hermitian;
use crate::{Arrays, ChannelParams, Error, OfdmConfig, PositionParams, Result, Scenario, UlaConfig, C64};

/// One point of an uncertainty region.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub scenario: Scenario,
    pub channel: ChannelParams,
    pub position: PositionParams,
}

/// Discretised uncertainty region.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyGrid {
    pub points: Vec<GridPoint>,
    /// Side of the square UE box in meters.
    pub ue_extent_m: f64,
    /// Side of the square incidence-point box in meters.
    pub incidence_extent_m: f64,
}

fn linspace(center: f64, extent: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![center];
    }
    (0..count)
        .map(|i| center - extent / 2.0 + extent * i as f64 / (count - 1) as f64)
        .collect()
}

impl UncertaintyGrid {
    pub fn single(scn: &Scenario, cfg: &OfdmConfig) -> Result<Self> {
        Self::from_boxes(scn, cfg, 0.0, 1, 0.0, 1)
    }

    /// Product grid of `ue_per_axis²` UE positions and `inc_per_axis²`
    /// incidence positions (for every NLOS path), each uniformly spaced over
    /// a square box (edges included) centred on the nominal location.
    pub fn from_boxes(
        scn: &Scenario,
        cfg: &OfdmConfig,
        ue_extent_m: f64,
        ue_per_axis: usize,
        incidence_extent_m: f64,
        inc_per_axis: usize,
    ) -> Result<Self> {
        if ue_per_axis == 0 || inc_per_axis == 0 {
            return Err(Error::InvalidInput("grid needs at least one point per axis".into()));
        }
        scn.validate()?;
        let ue_offsets: Vec<(f64, f64)> = {
            let xs = linspace(0.0, ue_extent_m, ue_per_axis);
            xs.iter().flat_map(|&x| xs.iter().map(move |&y| (x, y))).collect()
        };
        let inc_offsets: Vec<(f64, f64)> = {
            let xs = linspace(0.0, incidence_extent_m, inc_per_axis);
            xs.iter().flat_map(|&x| xs.iter().map(move |&y| (x, y))).collect()
        };
        let mut points = Vec::with_capacity(ue_offsets.len() * inc_offsets.len());
        for &(ix, iy) in &inc_offsets {
            for &(ux, uy) in &ue_offsets {
                let mut s = scn.clone();
                s.ue_position.x += ux;
                s.ue_position.y += uy;
                for r in &mut s.incidence_points {
                    r.x += ix;
                    r.y += iy;
                }
                let (channel, position) = geometry::params_from_scenario(&s, cfg)?;
                points.push(GridPoint { scenario: s, channel, position });
            }
        }
        Ok(Self { points, ue_extent_m, incidence_extent_m })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// FIM model of every point with the identity combiner.
    pub fn models(&self, arrays: &Arrays, cfg: &OfdmConfig, prior: ClockPrior, known: &[usize]) -> Result<Vec<FimModel>> {
        self.points
            .iter()
            .map(|pt| {
                FimModel::new(&pt.channel, &pt.position, &pt.scenario.bs_position, arrays, cfg, None, prior, known)
            })
            .collect()
    }
}

/// `U_tx = [A_tx Ȧ_tx]*` for a set of AODs.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    pub u_tx: DMatrix<C64>,
    /// AODs after merging near-duplicates.
    pub angles: Vec<f64>,
}

impl SubspaceBasis {
    pub fn new(aods: &[f64], cfg: &UlaConfig) -> Result<Self> {
        let mut angles: Vec<f64> = Vec::new();
        for &a in aods {
            if angles.iter().all(|&b| (a - b).abs() >= 1e-6) {
                angles.push(a);
            }
        }
        if angles.is_empty() {
            return Err(Error::DegenerateBasis("no AODs given".into()));
        }
        let g = angles.len();
        let mut u = DMatrix::zeros(cfg.num_elements, 2 * g);
        for (i, &a) in angles.iter().enumerate() {
            u.set_column(i, &arrays::ula_steering(a, cfg)?.conjugate());
            u.set_column(g + i, &arrays::ula_derivative(a, cfg)?.conjugate());
        }
        let sv = u.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > 1e-8 * smax) {
            return Err(Error::DegenerateBasis(format!("U_tx is rank deficient (σ_min/σ_max = {:.2e})", smin / smax)));
        }
        Ok(Self { u_tx: u, angles })
    }

    /// `I − U(UᴴU)⁻¹Uᴴ`, formed from the left singular vectors of `U`.
    pub fn orthogonal_projector(&self) -> DMatrix<C64> {
        let u = &self.u_tx;
        let svd = u.clone().svd(true, false);
        let w = svd.u.expect("left singular vectors requested");
        DMatrix::identity(u.nrows(), u.nrows()) - &w * w.adjoint()
    }
}

/// How the normalised covariance `X̂ = X / (P_tot/K)` is parameterised.
#[derive(Debug, Clone, PartialEq)]
pub enum Parameterization {
    /// All `n²` real coordinates of an `n×n` Hermitian matrix.
    Full { n: usize },
    /// `X̂ = U Λ Uᴴ` with Hermitian PSD `Λ`.
    Subspace { basis: DMatrix<C64> },
    /// `X̂ = Σ_m ρ_m f_m f_mᴴ` with `ρ ≥ 0` and unit-norm `f_m`.
    Beams { beams: Vec<DVector<C64>> },
}

impl Parameterization {
    pub fn dim(&self) -> usize {
        match self {
            Parameterization::Full { n } => n * n,
            Parameterization::Subspace { basis } => basis.ncols() * basis.ncols(),
            Parameterization::Beams { beams } => beams.len(),
        }
    }

    fn inner_dim(&self) -> usize {
        match self {
            Parameterization::Full { n } => *n,
            Parameterization::Subspace { basis } => basis.ncols(),
            Parameterization::Beams { beams } => beams.len(),
        }
    }

    /// `X̂` for given coordinates.
    pub fn covariance(&self, z: &[f64]) -> DMatrix<C64> {
        match self {
            Parameterization::Full { n } => hermitian::from_coords(*n, z),
            Parameterization::Subspace { basis } => {
                let lam = hermitian::from_coords(basis.ncols(), z);
                basis * lam * basis.adjoint()
            }
            Parameterization::Beams { beams } => {
                let n = beams[0].len();
                let mut x = DMatrix::zeros(n, n);
                for (f, &r) in beams.iter().zip(z) {
                    x += f * f.adjoint() * C64::new(r, 0.0);
                }
                x
            }
        }
    }

    /// Coordinates of a reference point with unit trace.
    fn reference(&self) -> Vec<f64> {
        match self {
            Parameterization::Full { n } => {
                let mut z = vec![0.0; n * n];
                z[..*n].iter_mut().for_each(|v| *v = 1.0 / *n as f64);
                z
            }
            Parameterization::Subspace { basis } => {
                let r = basis.ncols();
                let gram = basis.adjoint() * basis;
                let tr = gram.trace().re;
                let mut z = vec![0.0; r * r];
                z[..r].iter_mut().for_each(|v| *v = 1.0 / tr);
                z
            }
            Parameterization::Beams { beams } => vec![1.0 / beams.len() as f64; beams.len()],
        }
    }

    /// `tr X̂` as a linear functional of the coordinates.
    fn trace_row(&self) -> DVector<f64> {
        match self {
            Parameterization::Full { n } => {
                DVector::from_iterator(n * n, (0..n * n).map(|i| if i < *n { 1.0 } else { 0.0 }))
            }
            Parameterization::Subspace { basis } => {
                let gram = basis.adjoint() * basis;
                let coords = hermitian::coords(basis.ncols());
                DVector::from_iterator(coords.len(), coords.into_iter().map(|c| hermitian::trace_with(&gram, c)))
            }
            Parameterization::Beams { beams } => DVector::from_iterator(beams.len(), beams.iter().map(|f| f.norm_squared())),
        }
    }

    /// Matrix mapping the coordinates to the `Γ` coordinates of a model.
    fn gamma_map(&self, model: &FimModel) -> DMatrix<f64> {
        let vt = model.tx_vectors().transpose();
        let dim = vt.nrows();
        match self {
            Parameterization::Full { .. } | Parameterization::Subspace { .. } => {
                let q = match self {
                    Parameterization::Subspace { basis } => &vt * basis,
                    _ => vt.clone(),
                };
                let coords = hermitian::coords(self.inner_dim());
                let mut map = DMatrix::zeros(dim * dim, coords.len());
                for (p, c) in coords.into_iter().enumerate() {
                    let g = hermitian::sandwich_basis(&q, c);
                    map.set_column(p, &hermitian::to_coords(&g));
                }
                map
            }
            Parameterization::Beams { beams } => {
                let mut map = DMatrix::zeros(dim * dim, beams.len());
                for (p, f) in beams.iter().enumerate() {
                    let w = &vt * f;
                    map.set_column(p, &hermitian::to_coords(&(&w * w.adjoint())));
                }
                map
            }
        }
    }

    fn cone_block(&self) -> Block {
        match self {
            Parameterization::Beams { beams } => Block::Nonneg(NonnegBlock {
                offset: DVector::zeros(beams.len()),
                rows: (0..beams.len()).map(|i| vec![(i, 1.0)]).collect(),
            }),
            _ => {
                let r = self.inner_dim();
                let terms = hermitian::coords(r)
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| (i, hermitian::embedded_basis_entries(r, c)))
                    .collect();
                Block::Sparse(SparseBlock { constant: DMatrix::zeros(2 * r, 2 * r), terms })
            }
        }
    }
}

/// Result of a worst-case design.
#[derive(Debug, Clone)]
pub struct DesignSolution {
    /// Covariance with trace `P_tot / K`.
    pub x: PrecoderCovariance,
    /// Optimal coordinates scaled to the power budget (`Λ` coordinates,
    /// beam powers, or covariance coordinates).
    pub coords: DVector<f64>,
    /// Largest PEB over the models, re-evaluated from `x`.
    pub worst_peb: f64,
    /// `√t` reported by the solver.
    pub bound_peb: f64,
    /// PEB at every model.
    pub pebs: Vec<Peb>,
    /// `u_{n,b}` mapped back to `[J̃_n⁻¹]_bb`.
    pub epigraph: Vec<[f64; 2]>,
    pub status: Status,
    pub iterations: usize,
}

struct PointScaling {
    active: Vec<usize>,
    /// Congruence `W` with `W J̃_ref Wᵀ ≈ I` on the active block.
    w: DMatrix<f64>,
    /// `W s_b` for the two position selectors `s_b`.
    columns: [DVector<f64>; 2],
    /// `√(s_bᵀ J̃_ref⁻¹ s_b)` proxies, the norms of `columns`.
    scale: [f64; 2],
}

fn point_scaling(model: &FimModel, gamma_ref: &DVector<f64>, budget: f64, whiten: bool) -> Result<PointScaling> {
    let jref = model.position_fim_from_gamma(&(gamma_ref * budget));
    let active: Vec<usize> = model.active().to_vec();
    let d = active.len();
    let mut diag = Vec::with_capacity(d);
    for &i in &active {
        let v = jref[(i, i)];
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidInput(format!(
                "parameter {i} has no information at the reference covariance"
            )));
        }
        diag.push(1.0 / v.sqrt());
    }
    let w = if whiten {
        let equilibrated = DMatrix::from_fn(d, d, |a, b| diag[a] * jref[(active[a], active[b])] * diag[b]);
        let eig = equilibrated.symmetric_eigen();
        let floor = 1e-12 * eig.eigenvalues.max();
        let mut w = eig.eigenvectors.transpose();
        for r in 0..d {
            let inv = 1.0 / eig.eigenvalues[r].max(floor).sqrt();
            for c in 0..d {
                w[(r, c)] *= inv * diag[c];
            }
        }
        w
    } else {
        DMatrix::from_diagonal(&DVector::from_vec(diag))
    };
    let sel = model.selector().select_rows(&active);
    let columns = [&w * sel.column(0), &w * sel.column(1)];
    let scale = [columns[0].norm(), columns[1].norm()];
    if !(scale[0] > 0.0 && scale[1] > 0.0) {
        return Err(Error::InvalidInput("position components are not observable".into()));
    }
    Ok(PointScaling { active, w, columns, scale })
}

/// Minimises the largest PEB over `models` with total covariance trace
/// `budget`.
///
/// Each point's LMIs are whitened by the FIM at a reference covariance; if
/// the solver fails the problem is retried with diagonal scaling only.
pub fn solve_worst_case(
    models: &[FimModel],
    param: &Parameterization,
    budget: f64,
    settings: &Settings,
) -> Result<DesignSolution> {
    match solve_scaled(models, param, budget, settings, true) {
        Err(Error::Solver { .. }) => solve_scaled(models, param, budget, settings, false),
        other => other,
    }
}

fn solve_scaled(
    models: &[FimModel],
    param: &Parameterization,
    budget: f64,
    settings: &Settings,
    whiten: bool,
) -> Result<DesignSolution> {
    if models.is_empty() {
        return Err(Error::InvalidInput("at least one model is required".into()));
    }
    if !(budget > 0.0) {
        return Err(Error::InvalidInput("power budget must be positive".into()));
    }
    if param.dim() == 0 {
        return Err(Error::InvalidInput("empty parameterisation".into()));
    }
    let nx = param.dim();
    let npts = models.len();
    let u_index = |n: usize, b: usize| nx + 2 * n + b;
    let t_index = nx + 2 * npts;
    let num_vars = t_index + 1;

    let z_ref = param.reference();
    let x_ref = param.covariance(&z_ref);

    let maps: Vec<DMatrix<f64>> = models.iter().map(|m| param.gamma_map(m)).collect();
    let scalings: Vec<PointScaling> = models
        .iter()
        .map(|m| point_scaling(m, &m.gamma(&x_ref), budget, whiten))
        .collect::<Result<_>>()?;

    // objective normalisation: the worst reference PEB², or a diagonal proxy
    let ref_pebs: Vec<f64> = models
        .iter()
        .map(|m| m.peb(&(&x_ref * C64::new(budget, 0.0))).squared())
        .collect();
    let proxy = scalings
        .iter()
        .map(|s| s.scale[0].powi(2) + s.scale[1].powi(2))
        .fold(0.0, f64::max);
    let finite_ref = ref_pebs.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let norm = if finite_ref > 0.0 { finite_ref } else { proxy };

    let mut prob = Problem::new(num_vars);
    prob.objective[t_index] = 1.0;
    prob.add_block(param.cone_block());
    let mut trace_row = DVector::zeros(num_vars);
    trace_row.rows_mut(0, nx).copy_from(&param.trace_row());
    prob.add_equality(trace_row, 1.0);

    let mut lp_rows = Vec::with_capacity(npts);
    for (n, model) in models.iter().enumerate() {
        let sc = &scalings[n];
        let d = sc.active.len();
        let mut full_map = DMatrix::zeros(maps[n].nrows(), num_vars);
        full_map.columns_mut(0, nx).copy_from(&maps[n]);
        let map_id = prob.add_map(full_map);
        let reduce = |m: &DMatrix<f64>, factor: f64| {
            let sub = DMatrix::from_fn(d, d, |a, b| factor * m[(sc.active[a], sc.active[b])]);
            let mut out = DMatrix::zeros(d + 1, d + 1);
            out.view_mut((0, 0), (d, d)).copy_from(&(&sc.w * sub * sc.w.transpose()));
            out
        };
        let coeffs: Vec<DMatrix<f64>> = model.position_basis().iter().map(|b| reduce(b, budget)).collect();
        let prior = reduce(model.prior(), 1.0);
        let mut corner = DMatrix::zeros(d + 1, d + 1);
        corner[(d, d)] = 1.0;
        for b in 0..2 {
            let mut constant = prior.clone();
            for a in 0..d {
                let v = sc.columns[b][a] / sc.scale[b];
                constant[(a, d)] = v;
                constant[(d, a)] = v;
            }
            prob.add_block(Block::Dense(DenseBlock {
                constant,
                map: Some(map_id),
                coeffs: coeffs.clone(),
                direct: vec![(u_index(n, b), corner.clone())],
            }));
        }
        lp_rows.push(vec![
            (t_index, 1.0),
            (u_index(n, 0), -sc.scale[0].powi(2) / norm),
            (u_index(n, 1), -sc.scale[1].powi(2) / norm),
        ]);
    }
    prob.add_block(Block::Nonneg(NonnegBlock { offset: DVector::zeros(npts), rows: lp_rows }));

    let sol = conic::solve(&prob, settings)?;
    if !sol.status.is_usable() {
        return Err(Error::Solver {
            status: sol.status.label().into(),
            reason: format!(
                "gap {:.2e}, residuals {:.2e}/{:.2e}/{:.2e} after {} iterations",
                sol.relative_gap, sol.lmi_residual, sol.dual_residual, sol.equality_residual, sol.iterations
            ),
        });
    }
    let mut z: Vec<f64> = sol.y.rows(0, nx).iter().copied().collect();
    if let Parameterization::Beams { .. } = param {
        z.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    let xhat = hermitian::hermitian_part(&param.covariance(&z));
    let x = PrecoderCovariance { x: xhat * C64::new(budget, 0.0), power_budget: budget }.finalized();
    let pebs: Vec<Peb> = models.iter().map(|m| m.peb(&x.x)).collect();
    let worst_peb = pebs.iter().map(|p| p.value).fold(0.0, f64::max);
    let epigraph = (0..npts)
        .map(|n| {
            let s = &scalings[n].scale;
            [s[0].powi(2) * sol.y[u_index(n, 0)], s[1].powi(2) * sol.y[u_index(n, 1)]]
        })
        .collect();
    let coords = DVector::from_iterator(nx, z.iter().map(|v| v * budget));
    Ok(DesignSolution {
        x,
        coords,
        worst_peb,
        bound_peb: (sol.y[t_index].max(0.0) * norm).sqrt(),
        pebs,
        epigraph,
        status: sol.status,
        iterations: sol.iterations,
    })
}

/// Optimal covariance under perfect knowledge of the scenario.
pub fn solve_perfect(scn: &Scenario, arrays: &Arrays, cfg: &OfdmConfig, prior: ClockPrior) -> Result<DesignSolution> {
    let model = FimModel::from_scenario(scn, arrays, cfg, prior)?;
    let param = Parameterization::Full { n: arrays.tx.num_elements };
    solve_worst_case(&[model], &param, cfg.trace_budget(), &Settings::default())
}

/// Solution of the design restricted to `X = U_tx Λ U_txᴴ`.
#[derive(Debug, Clone)]
pub struct ReducedSolution {
    /// `Λ` scaled to the power budget.
    pub lambda: DMatrix<C64>,
    pub basis: SubspaceBasis,
    pub design: DesignSolution,
}

pub fn solve_reduced(scn: &Scenario, arrays: &Arrays, cfg: &OfdmConfig, prior: ClockPrior) -> Result<ReducedSolution> {
    let model = FimModel::from_scenario(scn, arrays, cfg, prior)?;
    let (aods, _) = geometry::path_angles(scn)?;
    let basis = SubspaceBasis::new(&aods, &arrays.tx)?;
    // optimise over an orthonormal basis Q of span(U_tx), U_tx = Q R
    let qr = basis.u_tx.clone().qr();
    let (q, r_factor) = (qr.q(), qr.r());
    let param = Parameterization::Subspace { basis: q.clone() };
    let design = solve_worst_case(&[model], &param, cfg.trace_budget(), &Settings::default())?;
    let r = basis.u_tx.ncols();
    let lam_q = hermitian::from_coords(r, design.coords.as_slice());
    let raw_trace = (&q * &lam_q * q.adjoint()).trace().re;
    let lam_q = if raw_trace > 0.0 { lam_q * C64::new(design.x.power_budget / raw_trace, 0.0) } else { lam_q };
    let r_inv = r_factor
        .try_inverse()
        .ok_or_else(|| Error::DegenerateBasis("U_tx has a singular triangular factor".into()))?;
    let lambda = &r_inv * lam_q * r_inv.adjoint();
    Ok(ReducedSolution { lambda, basis, design })
}

/// Worst-case design over an uncertainty grid.
pub fn solve_robust(grid: &UncertaintyGrid, arrays: &Arrays, cfg: &OfdmConfig, prior: ClockPrior) -> Result<DesignSolution> {
    let models = grid.models(arrays, cfg, prior, &[])?;
    let param = Parameterization::Full { n: arrays.tx.num_elements };
    solve_worst_case(&models, &param, cfg.trace_budget(), &Settings::default())
}

/// Precoder recovered from a covariance.
#[derive(Debug, Clone)]
pub struct Recovery {
    /// `N_tx × M` precoder with `L F Fᴴ` of trace equal to the budget.
    pub f: DMatrix<C64>,
    pub peb: f64,
    /// Whether the winner is the eigen-factorisation.
    pub from_eigen: bool,
}

fn precoder_with_budget(f: DMatrix<C64>, symbols_per_beam: usize, budget: f64) -> DMatrix<C64> {
    let tr = f.norm_squared() * symbols_per_beam as f64;
    if tr > 0.0 {
        f * C64::new((budget / tr).sqrt(), 0.0)
    } else {
        f
    }
}

/// Recovers an `N_tx × M` precoder from `X` as the best (by `eval`) of the
/// top-`M` eigen-factorisation and `trials` randomisations
/// `X^{1/2} Q_M` with `Q` a random unitary matrix.
pub fn recover_precoder<E>(
    x: &PrecoderCovariance,
    num_beams: usize,
    symbols_per_beam: usize,
    trials: usize,
    seed: u64,
    eval: E,
) -> Result<Recovery>
where
    E: Fn(&PrecoderCovariance) -> f64,
{
    if num_beams == 0 || symbols_per_beam == 0 {
        return Err(Error::InvalidInput("M and L must be at least 1".into()));
    }
    let n = x.x.nrows();
    let l = symbols_per_beam as f64;
    let (vals, vecs) = hermitian::eigh(&x.x);
    let mut f = DMatrix::zeros(n, num_beams);
    for j in 0..num_beams.min(n) {
        let idx = n - 1 - j;
        let lam = vals[idx].max(0.0);
        f.set_column(j, &(vecs.column(idx) * C64::new((lam / l).sqrt(), 0.0)));
    }
    let f = precoder_with_budget(f, symbols_per_beam, x.power_budget);
    let score = |f: &DMatrix<C64>| eval(&PrecoderCovariance::from_precoder(f, symbols_per_beam, x.power_budget));
    let mut best = Recovery { peb: score(&f), f, from_eigen: true };

    let sqrt_x = {
        let d = DMatrix::from_diagonal(&vals.map(|v| C64::new(v.max(0.0).sqrt(), 0.0)));
        &vecs * d * vecs.adjoint()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let g = DMatrix::from_fn(n, n, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            C64::new(re, im)
        });
        let q = g.qr().q();
        let cols = num_beams.min(n);
        let mut fr = DMatrix::zeros(n, num_beams);
        fr.columns_mut(0, cols).copy_from(&(&sqrt_x * q.columns(0, cols)));
        let fr = precoder_with_budget(fr, symbols_per_beam, x.power_budget);
        let p = score(&fr);
        if p < best.peb {
            best = Recovery { f: fr, peb: p, from_eigen: false };
        }
    }
    Ok(best)
}

/// Scenario with gain phases drawn from `seed`.
pub fn with_seeded_phases(mut scn: Scenario, seed: u64) -> Scenario {
    scn.gain_phases = seeded_phases(scn.num_paths(), seed);
    scn
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_includes_edges() {
        let v = linspace(1.0, 4.0, 3);
        assert_eq!(v, vec![-1.0, 1.0, 3.0]);
        assert_eq!(linspace(2.0, 4.0, 1), vec![2.0]);
    }

    #[test]
    fn full_reference_has_unit_trace() {
        let p = Parameterization::Full { n: 4 };
        let z = p.reference();
        assert!((p.covariance(&z).trace().re - 1.0).abs() < 1e-15);
        assert!((p.trace_row().dot(&DVector::from_vec(z)) - 1.0).abs() < 1e-15);
    }
}
