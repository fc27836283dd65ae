//! Per-cell HHO operators: gradient and symmetric-gradient reconstructions,
//! least-squares stabilization, and the HHO / H+ interpolation operators.
//!
//! Conventions used throughout (and mirrored by `assembly`):
//! - vector-valued coefficient blocks are component-major: all x-component
//!   scalar modes first, then all y-component modes;
//! - symmetric-tensor coefficients use the orthonormal frame
//!   (e_xx, e_yy, e_xy) with e_xy = [[0, 1/√2], [1/√2, 0]], so a tensor
//!   [[a, c], [c, b]] has coordinates (a, b, √2·c) and the Frobenius Gram
//!   matrix is the identity per scalar mode;
//! - face unknowns of a cell are ordered by the cell's local face order,
//!   each face contributing k+1 scalar (resp. 2(k+1) component-major
//!   vector) coefficients.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mesh::{Mesh, Point2, Subdomain};
use crate::polybasis::{
    cell_quadrature, cell_space_dim, default_cell_exactness, default_face_exactness,
    face_quadrature, BasisError, CellBasis, FaceBasis, QuadratureRule,
};

/// Equal-order (k′ = k) or mixed-order (k′ = k+1) cell unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderMode {
    Equal,
    Mixed,
}

/// Which solid wave speed enters the stabilization scaling ζ^s = ρ^s c^s.
/// The shear speed is the default: it is the choice under which the
/// reference weights actually minimize the spectral radius at w = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolidStabSpeed {
    PWave,
    SWave,
}

#[derive(Debug, Error)]
pub enum SettingError {
    #[error("face degree k must be at least 1 (got {0})")]
    FaceDegreeTooLow(usize),
    #[error("stabilization exponent alpha must be 0 or 1 (got {0})")]
    InvalidAlpha(u32),
    #[error("stabilization weights must be positive (got eta_f = {0}, eta_s = {1})")]
    NonPositiveWeight(f64, f64),
}

/// Reference stabilization weights (η^f_⋆, η^s_⋆) minimizing the spectral
/// radius: (0.88, 1.54) equal-order, (0.80, 1.38) mixed-order.
pub fn optimal_weights(order: OrderMode) -> (f64, f64) {
    match order {
        OrderMode::Equal => (0.88, 1.54),
        OrderMode::Mixed => (0.80, 1.38),
    }
}

/// Discretization choices shared by all cells.
#[derive(Debug, Clone, Copy)]
pub struct DiscretizationSetting {
    /// Face polynomial degree k ≥ 1 (also the dG degree of m and s).
    pub k: usize,
    pub order: OrderMode,
    /// Stabilization exponent α ∈ {0, 1}: τ = η ζ h̃_T^{−α}.
    pub alpha: u32,
    pub eta_f: f64,
    pub eta_s: f64,
    pub solid_stab_speed: SolidStabSpeed,
}

impl DiscretizationSetting {
    /// Setting with the reference weights for the given order mode.
    pub fn new(k: usize, order: OrderMode, alpha: u32) -> Result<Self, SettingError> {
        let (eta_f, eta_s) = optimal_weights(order);
        Self::with_weights(k, order, alpha, eta_f, eta_s)
    }

    pub fn with_weights(
        k: usize,
        order: OrderMode,
        alpha: u32,
        eta_f: f64,
        eta_s: f64,
    ) -> Result<Self, SettingError> {
        if k < 1 {
            return Err(SettingError::FaceDegreeTooLow(k));
        }
        if alpha > 1 {
            return Err(SettingError::InvalidAlpha(alpha));
        }
        if eta_f <= 0.0 || eta_s <= 0.0 {
            return Err(SettingError::NonPositiveWeight(eta_f, eta_s));
        }
        Ok(Self {
            k,
            order,
            alpha,
            eta_f,
            eta_s,
            solid_stab_speed: SolidStabSpeed::SWave,
        })
    }

    /// Cell degree k′.
    pub fn k_cell(&self) -> usize {
        match self.order {
            OrderMode::Equal => self.k,
            OrderMode::Mixed => self.k + 1,
        }
    }

    /// Stabilization parameter τ = η ζ h̃_T^{−α} on the given side.
    pub fn tau(&self, side: Subdomain, zeta: f64, h_tilde: f64) -> f64 {
        let eta = match side {
            Subdomain::Fluid => self.eta_f,
            Subdomain::Solid => self.eta_s,
        };
        eta * zeta * h_tilde.powi(-(self.alpha as i32))
    }
}

/// Per-face precomputed data within a cell context.
pub struct FaceCtx {
    /// Global face id.
    pub face: usize,
    /// Unit normal pointing out of the context cell.
    pub normal: Point2,
    pub quad: QuadratureRule,
    /// Degree-k face basis ψ.
    pub basis: FaceBasis,
    /// ψ values at face quadrature points, (k+1) × nq.
    pub psi: DMatrix<f64>,
    /// Degree-k′ cell basis traces at face quadrature points.
    pub cell_trace: DMatrix<f64>,
    /// Degree-k cell basis traces at face quadrature points.
    pub dual_trace: DMatrix<f64>,
    /// Face mass matrix M_F and its factorization.
    pub mass: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl FaceCtx {
    /// Solves M_F x = b (projection onto the face space).
    pub fn mass_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }
}

/// All per-cell precomputed bases, quadrature and mass factorizations used
/// by the local operators.
pub struct CellContext {
    pub cell: usize,
    pub subdomain: Subdomain,
    pub k: usize,
    pub k_cell: usize,
    pub h_tilde: f64,
    /// Degree-k′ cell basis (HHO cell unknowns).
    pub cell_basis: CellBasis,
    /// Degree-k cell basis (dG unknowns and reconstruction targets).
    pub dual_basis: CellBasis,
    pub quad: QuadratureRule,
    /// φ′ values at cell quadrature, n_c × nq.
    pub cell_table: DMatrix<f64>,
    /// φ′ gradients at cell quadrature.
    pub cell_gx: DMatrix<f64>,
    pub cell_gy: DMatrix<f64>,
    /// φ (degree k) values at cell quadrature, n_d × nq.
    pub dual_table: DMatrix<f64>,
    /// Scalar mass matrices and factorizations.
    pub mass_cell: DMatrix<f64>,
    pub mass_dual: DMatrix<f64>,
    chol_cell: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    chol_dual: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    pub faces: Vec<FaceCtx>,
}

/// Weighted moment matrix A W Bᵀ with A: na × nq, B: nb × nq.
pub fn moments(a: &DMatrix<f64>, b: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let mut aw = a.clone();
    for (q, &w) in weights.iter().enumerate() {
        aw.column_mut(q).scale_mut(w);
    }
    aw * b.transpose()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl CellContext {
    pub fn new(mesh: &Mesh, cell: usize, setting: &DiscretizationSetting) -> Result<Self, BasisError> {
        Self::with_exactness(
            mesh,
            cell,
            setting,
            default_cell_exactness(setting.k),
            default_face_exactness(setting.k),
        )
    }

    pub fn with_exactness(
        mesh: &Mesh,
        cell: usize,
        setting: &DiscretizationSetting,
        cell_exactness: usize,
        face_exactness: usize,
    ) -> Result<Self, BasisError> {
        let k = setting.k;
        let k_cell = setting.k_cell();
        let cell_basis = CellBasis::for_cell(mesh, cell, k_cell);
        let dual_basis = CellBasis::for_cell(mesh, cell, k);
        let quad = cell_quadrature(mesh, cell, cell_exactness)?;
        let cell_table = cell_basis.eval_table(&quad);
        let (cell_gx, cell_gy) = cell_basis.grad_tables(&quad);
        let dual_table = dual_basis.eval_table(&quad);
        let mut mass_cell = moments(&cell_table, &cell_table, &quad.weights);
        symmetrize(&mut mass_cell);
        let mut mass_dual = moments(&dual_table, &dual_table, &quad.weights);
        symmetrize(&mut mass_dual);
        let chol_cell = mass_cell.clone().cholesky().ok_or(BasisError::SingularMass)?;
        let chol_dual = mass_dual.clone().cholesky().ok_or(BasisError::SingularMass)?;

        let mut faces = Vec::with_capacity(mesh.cells[cell].face_ids.len());
        for &fid in &mesh.cells[cell].face_ids {
            let (_, _, normal) = mesh
                .face_geometry(fid, cell)
                .expect("face belongs to its cell");
            let fquad = face_quadrature(mesh, fid, face_exactness)?;
            let basis = FaceBasis::for_face(mesh, fid).degree(k);
            let psi = basis.eval_table(&fquad);
            let cell_trace = cell_basis.eval_table(&fquad);
            let dual_trace = dual_basis.eval_table(&fquad);
            let mut mass = moments(&psi, &psi, &fquad.weights);
            symmetrize(&mut mass);
            let chol = mass.clone().cholesky().ok_or(BasisError::SingularMass)?;
            faces.push(FaceCtx {
                face: fid,
                normal,
                quad: fquad,
                basis,
                psi,
                cell_trace,
                dual_trace,
                mass,
                chol,
            });
        }

        Ok(Self {
            cell,
            subdomain: mesh.cells[cell].subdomain,
            k,
            k_cell,
            h_tilde: mesh.h_tilde(cell),
            cell_basis,
            dual_basis,
            quad,
            cell_table,
            cell_gx,
            cell_gy,
            dual_table,
            mass_cell,
            mass_dual,
            chol_cell,
            chol_dual,
            faces,
        })
    }

    /// dim P^{k′}(T) (scalar cell modes).
    pub fn n_cell(&self) -> usize {
        self.cell_table.nrows()
    }

    /// dim P^k(T) (scalar dual modes).
    pub fn n_dual(&self) -> usize {
        self.dual_table.nrows()
    }

    /// Scalar face modes per face (k+1).
    pub fn n_face(&self) -> usize {
        self.k + 1
    }

    /// Total scalar face modes over all faces of the cell.
    pub fn n_faces_total(&self) -> usize {
        self.faces.len() * self.n_face()
    }

    /// Solves M_{k′} x = b.
    pub fn cell_mass_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol_cell.solve(b)
    }

    /// Solves (I_c ⊗ M_k) X = B blockwise, B having c·n_d rows.
    fn dual_mass_solve_blocks(&self, b: &DMatrix<f64>, blocks: usize) -> DMatrix<f64> {
        let nd = self.n_dual();
        let mut x = b.clone();
        for c in 0..blocks {
            let solved = self.chol_dual.solve(&b.rows(c * nd, nd).into_owned());
            x.rows_mut(c * nd, nd).copy_from(&solved);
        }
        x
    }
}

/// Gradient reconstruction matrices (G_T, G_TF): coefficients (in the
/// component-major degree-k vector basis) of g_T applied to cell and face
/// unknowns. Defined by
/// (g_T(p̂), r)_T = (∇p_T, r)_T − (p_T − p_∂T, r·n_T)_∂T for all r.
pub fn grad_reconstruction(ctx: &CellContext) -> (DMatrix<f64>, DMatrix<f64>) {
    let nd = ctx.n_dual();
    let nc = ctx.n_cell();
    let nf = ctx.n_face();
    let mut b_cell = DMatrix::zeros(2 * nd, nc);
    let mut b_face = DMatrix::zeros(2 * nd, ctx.n_faces_total());

    b_cell
        .rows_mut(0, nd)
        .copy_from(&moments(&ctx.dual_table, &ctx.cell_gx, &ctx.quad.weights));
    b_cell
        .rows_mut(nd, nd)
        .copy_from(&moments(&ctx.dual_table, &ctx.cell_gy, &ctx.quad.weights));

    for (fi, f) in ctx.faces.iter().enumerate() {
        let m_dc = moments(&f.dual_trace, &f.cell_trace, &f.quad.weights);
        let m_dp = moments(&f.dual_trace, &f.psi, &f.quad.weights);
        for (comp, n_comp) in [(0, f.normal.x), (1, f.normal.y)] {
            let mut rows = b_cell.rows_mut(comp * nd, nd);
            rows -= n_comp * &m_dc;
            let mut cols = b_face.view_mut((comp * nd, fi * nf), (nd, nf));
            cols += n_comp * &m_dp;
        }
    }

    (
        ctx.dual_mass_solve_blocks(&b_cell, 2),
        ctx.dual_mass_solve_blocks(&b_face, 2),
    )
}

/// Symmetric-gradient reconstruction matrices (E_T, E_TF) in the tensor
/// frame (e_xx, e_yy, e_xy/√2-normalized); columns are component-major
/// vector cell/face unknowns.
pub fn sym_grad_reconstruction(ctx: &CellContext) -> (DMatrix<f64>, DMatrix<f64>) {
    let nd = ctx.n_dual();
    let nc = ctx.n_cell();
    let nf = ctx.n_face();
    let s2 = std::f64::consts::SQRT_2;
    let mut b_cell = DMatrix::zeros(3 * nd, 2 * nc);
    let mut b_face = DMatrix::zeros(3 * nd, 2 * ctx.n_faces_total());

    let vol_x = moments(&ctx.dual_table, &ctx.cell_gx, &ctx.quad.weights);
    let vol_y = moments(&ctx.dual_table, &ctx.cell_gy, &ctx.quad.weights);
    // (∇_sym(φ′ e_x)) coords: (∂x φ′, 0, ∂y φ′/√2);
    // (∇_sym(φ′ e_y)) coords: (0, ∂y φ′, ∂x φ′/√2).
    b_cell.view_mut((0, 0), (nd, nc)).copy_from(&vol_x);
    b_cell.view_mut((2 * nd, 0), (nd, nc)).copy_from(&(&vol_y / s2));
    b_cell.view_mut((nd, nc), (nd, nc)).copy_from(&vol_y);
    b_cell.view_mut((2 * nd, nc), (nd, nc)).copy_from(&(&vol_x / s2));

    for (fi, f) in ctx.faces.iter().enumerate() {
        let m_dc = moments(&f.dual_trace, &f.cell_trace, &f.quad.weights);
        let m_dp = moments(&f.dual_trace, &f.psi, &f.quad.weights);
        let (nx, ny) = (f.normal.x, f.normal.y);
        // (e_t φ)·n per frame element: e_xx → (n_x, 0) φ; e_yy → (0, n_y) φ;
        // e_xy → (n_y, n_x) φ/√2. Row block t, column block = component c.
        let pattern = [
            (0, 0, nx),
            (nd, nc, ny),
            (2 * nd, 0, ny / s2),
            (2 * nd, nc, nx / s2),
        ];
        for &(row0, col0, factor) in &pattern {
            let mut cell_block = b_cell.view_mut((row0, col0), (nd, nc));
            cell_block -= factor * &m_dc;
            let col_face = if col0 == 0 { 0 } else { nf };
            let mut face_block = b_face.view_mut((row0, 2 * fi * nf + col_face), (nd, nf));
            face_block += factor * &m_dp;
        }
    }

    (
        ctx.dual_mass_solve_blocks(&b_cell, 3),
        ctx.dual_mass_solve_blocks(&b_face, 3),
    )
}

/// Stabilization blocks of one cell. The quadratic form
/// τ Σ_F ‖Π_F(trace − face unknown)‖²_{L²(F)} expands into
/// [[S_TT, S_TF], [S_TFᵀ, diag(S_FF)]] on (cell, face) unknowns.
pub struct StabBlocks {
    pub s_tt: DMatrix<f64>,
    /// Cell-to-face coupling, columns concatenated per face.
    pub s_tf: DMatrix<f64>,
    /// Per-face diagonal blocks (τ M_F, scalar or component-major vector).
    pub s_ff: Vec<DMatrix<f64>>,
    pub tau: f64,
}

/// Scalar (acoustic) stabilization blocks with the given τ.
pub fn stabilization_scalar(ctx: &CellContext, tau: f64) -> StabBlocks {
    let nc = ctx.n_cell();
    let nf = ctx.n_face();
    let mut s_tt = DMatrix::zeros(nc, nc);
    let mut s_tf = DMatrix::zeros(nc, ctx.n_faces_total());
    let mut s_ff = Vec::with_capacity(ctx.faces.len());
    for (fi, f) in ctx.faces.iter().enumerate() {
        // C[m, j] = (φ′_j, ψ_m)_F; Π_F(φ′_j|F) has coefficients M_F⁻¹ C.
        let c = moments(&f.psi, &f.cell_trace, &f.quad.weights);
        let mut d = c.clone();
        for j in 0..d.ncols() {
            let col = f.chol.solve(&d.column(j).into_owned());
            d.set_column(j, &col);
        }
        let mut tt = tau * c.transpose() * &d;
        symmetrize(&mut tt);
        s_tt += tt;
        s_tf
            .view_mut((0, fi * nf), (nc, nf))
            .copy_from(&(-tau * c.transpose()));
        s_ff.push(tau * &f.mass);
    }
    StabBlocks { s_tt, s_tf, s_ff, tau }
}

/// Vector (elastic) stabilization blocks: the scalar blocks applied
/// componentwise in the component-major layout.
pub fn stabilization_vector(ctx: &CellContext, tau: f64) -> StabBlocks {
    let scalar = stabilization_scalar(ctx, tau);
    let nc = ctx.n_cell();
    let nf = ctx.n_face();
    let mut s_tt = DMatrix::zeros(2 * nc, 2 * nc);
    let mut s_tf = DMatrix::zeros(2 * nc, 2 * ctx.n_faces_total());
    for comp in 0..2 {
        s_tt.view_mut((comp * nc, comp * nc), (nc, nc))
            .copy_from(&scalar.s_tt);
        for fi in 0..ctx.faces.len() {
            s_tf
                .view_mut((comp * nc, 2 * fi * nf + comp * nf), (nc, nf))
                .copy_from(&scalar.s_tf.view((0, fi * nf), (nc, nf)));
        }
    }
    let s_ff = scalar
        .s_ff
        .iter()
        .map(|m| {
            let mut b = DMatrix::zeros(2 * nf, 2 * nf);
            b.view_mut((0, 0), (nf, nf)).copy_from(m);
            b.view_mut((nf, nf), (nf, nf)).copy_from(m);
            b
        })
        .collect();
    StabBlocks {
        s_tt,
        s_tf,
        s_ff,
        tau,
    }
}

/// HHO interpolate of a scalar field: cell L² projection onto P^{k′} and
/// per-face projections onto P^k.
pub fn hho_interpolate_scalar(
    ctx: &CellContext,
    f: impl Fn(Point2) -> f64,
) -> (DVector<f64>, Vec<DVector<f64>>) {
    let mut b = DVector::zeros(ctx.n_cell());
    for (q, &p) in ctx.quad.points.iter().enumerate() {
        b.axpy(
            ctx.quad.weights[q] * f(p),
            &ctx.cell_table.column(q).into_owned(),
            1.0,
        );
    }
    let cell = ctx.chol_cell.solve(&b);
    let faces = ctx
        .faces
        .iter()
        .map(|fc| {
            let mut bf = DVector::zeros(ctx.n_face());
            for (q, &p) in fc.quad.points.iter().enumerate() {
                bf.axpy(fc.quad.weights[q] * f(p), &fc.psi.column(q).into_owned(), 1.0);
            }
            fc.mass_solve(&bf)
        })
        .collect();
    (cell, faces)
}

/// HHO interpolate of a vector field, component-major.
pub fn hho_interpolate_vector(
    ctx: &CellContext,
    f: impl Fn(Point2) -> (f64, f64),
) -> (DVector<f64>, Vec<DVector<f64>>) {
    let (cx, fx) = hho_interpolate_scalar(ctx, |p| f(p).0);
    let (cy, fy) = hho_interpolate_scalar(ctx, |p| f(p).1);
    let mut cell = DVector::zeros(2 * ctx.n_cell());
    cell.rows_mut(0, ctx.n_cell()).copy_from(&cx);
    cell.rows_mut(ctx.n_cell(), ctx.n_cell()).copy_from(&cy);
    let faces = fx
        .iter()
        .zip(&fy)
        .map(|(a, b)| {
            let mut v = DVector::zeros(2 * ctx.n_face());
            v.rows_mut(0, ctx.n_face()).copy_from(a);
            v.rows_mut(ctx.n_face(), ctx.n_face()).copy_from(b);
            v
        })
        .collect();
    (cell, faces)
}

/// L² projection of a scalar field onto the dG space P^k(T).
pub fn project_dual_scalar(ctx: &CellContext, f: impl Fn(Point2) -> f64) -> DVector<f64> {
    let mut b = DVector::zeros(ctx.n_dual());
    for (q, &p) in ctx.quad.points.iter().enumerate() {
        b.axpy(
            ctx.quad.weights[q] * f(p),
            &ctx.dual_table.column(q).into_owned(),
            1.0,
        );
    }
    ctx.chol_dual.solve(&b)
}

/// L² projection of a vector field onto P^k(T)², component-major.
pub fn project_dual_vector(ctx: &CellContext, f: impl Fn(Point2) -> (f64, f64)) -> DVector<f64> {
    let nd = ctx.n_dual();
    let cx = project_dual_scalar(ctx, |p| f(p).0);
    let cy = project_dual_scalar(ctx, |p| f(p).1);
    let mut out = DVector::zeros(2 * nd);
    out.rows_mut(0, nd).copy_from(&cx);
    out.rows_mut(nd, nd).copy_from(&cy);
    out
}

/// L² projection of a symmetric tensor field (given as (s_xx, s_yy, s_xy))
/// onto the symmetric tensor dG space, in the orthonormal frame.
pub fn project_dual_tensor(
    ctx: &CellContext,
    f: impl Fn(Point2) -> (f64, f64, f64),
) -> DVector<f64> {
    let nd = ctx.n_dual();
    let s2 = std::f64::consts::SQRT_2;
    let c0 = project_dual_scalar(ctx, |p| f(p).0);
    let c1 = project_dual_scalar(ctx, |p| f(p).1);
    let c2 = project_dual_scalar(ctx, |p| s2 * f(p).2);
    let mut out = DVector::zeros(3 * nd);
    out.rows_mut(0, nd).copy_from(&c0);
    out.rows_mut(nd, nd).copy_from(&c1);
    out.rows_mut(2 * nd, nd).copy_from(&c2);
    out
}

/// Coefficients, within the degree-k scaled monomial family, of the partial
/// derivatives of the degree-(k+1) monomial with exponents (a, b).
fn mono_derivative_coeffs(
    dual: &CellBasis,
    a: u32,
    b: u32,
) -> (DVector<f64>, DVector<f64>) {
    let nd = dual.dim();
    let mut dx = DVector::zeros(nd);
    let mut dy = DVector::zeros(nd);
    let idx = |aa: u32, bb: u32| -> usize {
        dual.exponents()
            .iter()
            .position(|&(x, y)| x == aa && y == bb)
            .expect("derivative exponent within dual basis range")
    };
    if a > 0 {
        dx[idx(a - 1, b)] = a as f64 / dual.scale;
    }
    if b > 0 {
        dy[idx(a, b - 1)] = b as f64 / dual.scale;
    }
    (dx, dy)
}

/// Shared solve for the H+ interpolation: x = M⁻¹b + D y with
/// (DᵀMD) y = g solved in the least-squares sense (rank tolerance 1e−10
/// relative, absorbing the rigid-rotation kernel in the elastic case).
fn hplus_solve(
    ctx: &CellContext,
    blocks: usize,
    d: &DMatrix<f64>,
    b: &DVector<f64>,
    g: &DVector<f64>,
) -> DVector<f64> {
    let nd = ctx.n_dual();
    // M D with M = I_blocks ⊗ M_dual.
    let mut md = DMatrix::zeros(blocks * nd, d.ncols());
    for c in 0..blocks {
        md.rows_mut(c * nd, nd)
            .copy_from(&(&ctx.mass_dual * d.rows(c * nd, nd)));
    }
    let mut a = d.transpose() * &md;
    symmetrize(&mut a);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let y = svd
        .solve(g, 1e-10 * smax.max(f64::MIN_POSITIVE))
        .expect("SVD solve of the H+ normal system");
    let minv_b = ctx.dual_mass_solve_blocks(&DMatrix::from_column_slice(blocks * nd, 1, b.as_slice()), blocks);
    DVector::from_column_slice(minv_b.as_slice()) + d * y
}

/// H+ interpolate of a vector field m onto P^k(T)²: L²-orthogonal to the
/// complement of ∇P^{k+1}_*(T), with the gradient-moment condition
/// (I(m) − m, ∇q)_T = (Π^k_∂T(m·n) − m·n, q)_∂T for q ∈ P^{k+1}_*(T).
pub fn hplus_interpolate_acoustic(
    ctx: &CellContext,
    m: impl Fn(Point2) -> (f64, f64),
) -> DVector<f64> {
    let nd = ctx.n_dual();
    let plus = CellBasis::new(ctx.k + 1, ctx.dual_basis.center, ctx.dual_basis.scale);
    let np = cell_space_dim(ctx.k + 1);
    // Columns: coefficients of ∇q_j in the component-major dual vector
    // basis, for the non-constant monomials q_j of degree ≤ k+1.
    let mut d = DMatrix::zeros(2 * nd, np - 1);
    for (j, &(a, b)) in plus.exponents().iter().enumerate().skip(1) {
        let (dx, dy) = mono_derivative_coeffs(&ctx.dual_basis, a, b);
        d.view_mut((0, j - 1), (nd, 1)).copy_from(&dx);
        d.view_mut((nd, j - 1), (nd, 1)).copy_from(&dy);
    }

    // Moments of m against the dual vector basis.
    let mut b = DVector::zeros(2 * nd);
    for (q, &p) in ctx.quad.points.iter().enumerate() {
        let w = ctx.quad.weights[q];
        let (mx, my) = m(p);
        let phi = ctx.dual_table.column(q);
        for i in 0..nd {
            b[i] += w * mx * phi[i];
            b[nd + i] += w * my * phi[i];
        }
    }

    // Boundary moments g_j = Σ_F (Π_F(m·n) − m·n, q_j)_F.
    let mut g = DVector::zeros(np - 1);
    for f in &ctx.faces {
        let nq = f.quad.len();
        let mdotn: Vec<f64> = f
            .quad
            .points
            .iter()
            .map(|&p| {
                let (mx, my) = m(p);
                mx * f.normal.x + my * f.normal.y
            })
            .collect();
        let mut bf = DVector::zeros(ctx.n_face());
        for q in 0..nq {
            bf.axpy(f.quad.weights[q] * mdotn[q], &f.psi.column(q).into_owned(), 1.0);
        }
        let proj = f.mass_solve(&bf);
        let plus_trace = plus.eval_table(&f.quad);
        for q in 0..nq {
            let diff = (f.psi.column(q).dot(&proj)) - mdotn[q];
            let wdiff = f.quad.weights[q] * diff;
            for j in 1..np {
                g[j - 1] += wdiff * plus_trace[(j, q)];
            }
        }
    }

    hplus_solve(ctx, 2, &d, &b, &g)
}

/// H+ interpolate of a symmetric tensor field s (given as (s_xx, s_yy,
/// s_xy)) onto the symmetric tensor dG space, in the orthonormal frame. The
/// test space is ∇_sym applied to (P^{k+1}_*(T))², with boundary condition
/// (Π^k_∂T(s·n) − s·n, q)_∂T.
pub fn hplus_interpolate_elastic(
    ctx: &CellContext,
    s: impl Fn(Point2) -> (f64, f64, f64),
) -> DVector<f64> {
    let nd = ctx.n_dual();
    let s2 = std::f64::consts::SQRT_2;
    let plus = CellBasis::new(ctx.k + 1, ctx.dual_basis.center, ctx.dual_basis.scale);
    let np = cell_space_dim(ctx.k + 1);
    // Columns indexed by (component c, non-constant monomial j): coordinates
    // of ∇_sym(q_j e_c) in the tensor frame.
    let mut d = DMatrix::zeros(3 * nd, 2 * (np - 1));
    for (j, &(a, b)) in plus.exponents().iter().enumerate().skip(1) {
        let (dx, dy) = mono_derivative_coeffs(&ctx.dual_basis, a, b);
        let col_x = j - 1;
        let col_y = (np - 1) + (j - 1);
        d.view_mut((0, col_x), (nd, 1)).copy_from(&dx);
        d.view_mut((2 * nd, col_x), (nd, 1)).copy_from(&(&dy / s2));
        d.view_mut((nd, col_y), (nd, 1)).copy_from(&dy);
        d.view_mut((2 * nd, col_y), (nd, 1)).copy_from(&(&dx / s2));
    }

    // Moments of s (in frame coordinates) against the tensor dual basis.
    let mut b = DVector::zeros(3 * nd);
    for (q, &p) in ctx.quad.points.iter().enumerate() {
        let w = ctx.quad.weights[q];
        let (sxx, syy, sxy) = s(p);
        let coords = [sxx, syy, s2 * sxy];
        let phi = ctx.dual_table.column(q);
        for (t, &ct) in coords.iter().enumerate() {
            for i in 0..nd {
                b[t * nd + i] += w * ct * phi[i];
            }
        }
    }

    // Boundary moments: traction s·n, projected facewise componentwise.
    let mut g = DVector::zeros(2 * (np - 1));
    for f in &ctx.faces {
        let nq = f.quad.len();
        let traction: Vec<(f64, f64)> = f
            .quad
            .points
            .iter()
            .map(|&p| {
                let (sxx, syy, sxy) = s(p);
                (
                    sxx * f.normal.x + sxy * f.normal.y,
                    sxy * f.normal.x + syy * f.normal.y,
                )
            })
            .collect();
        let plus_trace = plus.eval_table(&f.quad);
        for comp in 0..2 {
            let mut bf = DVector::zeros(ctx.n_face());
            for q in 0..nq {
                let val = if comp == 0 { traction[q].0 } else { traction[q].1 };
                bf.axpy(f.quad.weights[q] * val, &f.psi.column(q).into_owned(), 1.0);
            }
            let proj = f.mass_solve(&bf);
            for q in 0..nq {
                let exact = if comp == 0 { traction[q].0 } else { traction[q].1 };
                let diff = f.psi.column(q).dot(&proj) - exact;
                let wdiff = f.quad.weights[q] * diff;
                for j in 1..np {
                    g[comp * (np - 1) + (j - 1)] += wdiff * plus_trace[(j, q)];
                }
            }
        }
    }

    hplus_solve(ctx, 3, &d, &b, &g)
}
