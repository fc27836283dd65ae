//! Global block system: weighted mass matrices, stiffness blocks in the
//! cell-then-face unknown ordering, interface coupling, Dirichlet lifts,
//! Schur complement, and static-condensation factorizations.
//!
//! Global cell unknowns are grouped field-major: all fluid m coefficients,
//! then fluid cell p, then solid stress s, then solid cell v. Global face
//! unknowns are all fluid face p (interior fluid + interface), then all
//! solid face v (interior solid + interface). Outer-boundary faces are
//! Dirichlet and carry no unknowns; their prescribed values enter the
//! right-hand side through the stored cell-to-face blocks.
//!
//! The stiffness K splits as K = (skew reconstruction/coupling part) +
//! (symmetric PSD stabilization), i.e. K + Kᵀ = 2S; K_FF is block-diagonal
//! per face, which makes the face constraint cheap to eliminate.

use std::collections::HashMap;
use std::ops::Range;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector, Matrix3};
use thiserror::Error;

use crate::hho_local::{
    grad_reconstruction, stabilization_scalar, stabilization_vector, sym_grad_reconstruction,
    CellContext, DiscretizationSetting, SolidStabSpeed,
};
use crate::mesh::{FaceClass, Mesh, Point2, Subdomain};
use crate::physics::Materials;
use crate::polybasis::{BasisError, CellBasis, FaceBasis, QuadratureRule};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("mesh has no cells")]
    EmptyMesh,
    #[error("singular cell block in static condensation (cell {0})")]
    SingularCellBlock(usize),
    #[error("singular face block (face {0}); check stabilization weights")]
    SingularFaceBlock(usize),
    #[error("condensed face system factorization failed")]
    FaceSystemSingular,
}

/// Relative pivot-ratio singularity test for a dense LU factorization
/// (a determinant test would under/overflow at moderate block sizes).
fn lu_is_singular(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> bool {
    let u = lu.u();
    let n = u.nrows().min(u.ncols());
    let mut min_p = f64::INFINITY;
    let mut max_p: f64 = 0.0;
    for i in 0..n {
        let d = u[(i, i)].abs();
        min_p = min_p.min(d);
        max_p = max_p.max(d);
    }
    !(min_p > 1e-14 * max_p && max_p.is_finite() && max_p > 0.0)
}

/// Plane-strain Hooke tensor ℂe = λ tr(e) 𝕀 + 2μ e.
#[derive(Debug, Clone, Copy)]
pub struct HookeTensor {
    pub lambda: f64,
    pub mu: f64,
}

impl HookeTensor {
    /// Action on a symmetric tensor given as (e_xx, e_yy, e_xy).
    pub fn apply(&self, e: (f64, f64, f64)) -> (f64, f64, f64) {
        let tr = e.0 + e.1;
        (
            self.lambda * tr + 2.0 * self.mu * e.0,
            self.lambda * tr + 2.0 * self.mu * e.1,
            2.0 * self.mu * e.2,
        )
    }

    /// Matrix of ℂ in the orthonormal frame (e_xx, e_yy, e_xy/√2-scaled).
    pub fn coord_matrix(&self) -> Matrix3<f64> {
        let (l, m) = (self.lambda, self.mu);
        Matrix3::new(
            l + 2.0 * m, l, 0.0,
            l, l + 2.0 * m, 0.0,
            0.0, 0.0, 2.0 * m,
        )
    }

    /// Matrix of ℂ⁻¹ in the orthonormal frame.
    pub fn inverse_coord_matrix(&self) -> Matrix3<f64> {
        self.coord_matrix()
            .try_inverse()
            .expect("Hooke tensor is invertible for mu > 0, lambda > -mu")
    }
}

/// Index ranges of the six unknown blocks and per-entity dof ranges.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub k: usize,
    pub k_cell: usize,
    pub n_cell_dofs: usize,
    pub n_face_dofs: usize,
    /// Start offsets of the four cell blocks (m, p, s, v) in cell-dof space.
    pub cell_block_offsets: [usize; 4],
    /// Start offset of the solid face block in face-dof space.
    pub face_solid_offset: usize,
    /// Per-cell ranges (None when the cell lies in the other subdomain).
    pub cell_m: Vec<Option<Range<usize>>>,
    pub cell_p: Vec<Option<Range<usize>>>,
    pub cell_s: Vec<Option<Range<usize>>>,
    pub cell_v: Vec<Option<Range<usize>>>,
    /// Per-face unknown ranges (None when Dirichlet or side absent).
    pub face_p: Vec<Option<Range<usize>>>,
    pub face_v: Vec<Option<Range<usize>>>,
}

impl DofMap {
    pub fn new(mesh: &Mesh, setting: &DiscretizationSetting) -> Self {
        let k = setting.k;
        let k_cell = setting.k_cell();
        let nd = crate::polybasis::cell_space_dim(k);
        let nc = crate::polybasis::cell_space_dim(k_cell);
        let nf = k + 1;
        let n = mesh.n_cells();

        let mut cell_m = vec![None; n];
        let mut cell_p = vec![None; n];
        let mut cell_s = vec![None; n];
        let mut cell_v = vec![None; n];

        let mut off = 0usize;
        let m0 = off;
        for (c, cell) in mesh.cells.iter().enumerate() {
            if cell.subdomain == Subdomain::Fluid {
                cell_m[c] = Some(off..off + 2 * nd);
                off += 2 * nd;
            }
        }
        let p0 = off;
        for (c, cell) in mesh.cells.iter().enumerate() {
            if cell.subdomain == Subdomain::Fluid {
                cell_p[c] = Some(off..off + nc);
                off += nc;
            }
        }
        let s0 = off;
        for (c, cell) in mesh.cells.iter().enumerate() {
            if cell.subdomain == Subdomain::Solid {
                cell_s[c] = Some(off..off + 3 * nd);
                off += 3 * nd;
            }
        }
        let v0 = off;
        for (c, cell) in mesh.cells.iter().enumerate() {
            if cell.subdomain == Subdomain::Solid {
                cell_v[c] = Some(off..off + 2 * nc);
                off += 2 * nc;
            }
        }
        let n_cell_dofs = off;

        let mut face_p = vec![None; mesh.n_faces()];
        let mut face_v = vec![None; mesh.n_faces()];
        let mut foff = 0usize;
        for (f, face) in mesh.faces.iter().enumerate() {
            if !face.class.is_boundary() && face.class.has_fluid_side() {
                face_p[f] = Some(foff..foff + nf);
                foff += nf;
            }
        }
        let face_solid_offset = foff;
        for (f, face) in mesh.faces.iter().enumerate() {
            if !face.class.is_boundary() && face.class.has_solid_side() {
                face_v[f] = Some(foff..foff + 2 * nf);
                foff += 2 * nf;
            }
        }

        DofMap {
            k,
            k_cell,
            n_cell_dofs,
            n_face_dofs: foff,
            cell_block_offsets: [m0, p0, s0, v0],
            face_solid_offset,
            cell_m,
            cell_p,
            cell_s,
            cell_v,
            face_p,
            face_v,
        }
    }
}

/// Per-local-face stiffness and stabilization pieces of one cell.
pub struct LocalFaceBlocks {
    /// Global face id.
    pub face: usize,
    /// Cell rows × face columns (this cell's side of the face).
    pub k_tf: DMatrix<f64>,
    /// Face rows × cell columns.
    pub k_ft: DMatrix<f64>,
    /// Stabilization part of `k_tf` (same shape; zero on dual rows).
    pub stab_tf: DMatrix<f64>,
    /// This cell's stabilization contribution to the face diagonal block.
    pub stab_ff: DMatrix<f64>,
}

/// One cell's dense blocks plus gather/scatter indices.
pub struct CellBlockData {
    pub cell: usize,
    pub subdomain: Subdomain,
    /// Local dof count (dual block + primal block).
    pub n: usize,
    /// Weighted mass block and its factorization.
    pub mass: DMatrix<f64>,
    mass_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    pub k_tt: DMatrix<f64>,
    pub stab_tt: DMatrix<f64>,
    pub faces: Vec<LocalFaceBlocks>,
    /// Local → global cell-dof indices.
    pub global: Vec<usize>,
    /// Local offset of the primal (p or v) rows, where loads act.
    pub primal_offset: usize,
    /// Cell quadrature and primal-basis table (for loads and errors).
    pub quad: QuadratureRule,
    pub primal_table: DMatrix<f64>,
    /// Dual-basis (degree k) table at the same quadrature points.
    pub dual_table: DMatrix<f64>,
    /// Primal cell basis (for point evaluation by sensors).
    pub primal_basis: CellBasis,
    /// Dual cell basis.
    pub dual_basis: CellBasis,
}

impl CellBlockData {
    pub fn mass_solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.mass_chol.solve(b)
    }
}

/// One interior/interface face's diagonal block.
pub struct FaceBlockData {
    pub face: usize,
    /// Local layout: fluid scalar dofs (if any), then solid vector dofs.
    pub k_ff: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Local → global face-dof indices.
    pub global: Vec<usize>,
    pub fluid_off: Option<usize>,
    pub solid_off: Option<usize>,
}

impl FaceBlockData {
    /// Local offset and width of the dofs seen from a cell of subdomain `sd`.
    pub fn side(&self, sd: Subdomain, k: usize) -> (usize, usize) {
        match sd {
            Subdomain::Fluid => (self.fluid_off.expect("fluid side"), k + 1),
            Subdomain::Solid => (self.solid_off.expect("solid side"), 2 * (k + 1)),
        }
    }
}

/// Prescribed-value machinery of one Dirichlet (outer boundary) face.
pub struct DirichletFaceData {
    pub face: usize,
    pub subdomain: Subdomain,
    basis: FaceBasis,
    quad: QuadratureRule,
    psi: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl DirichletFaceData {
    /// Coefficients (k+1 scalar, or 2(k+1) component-major vector) of the
    /// boundary datum at time `t`.
    pub fn project(&self, bc: &BoundaryValues, t: f64) -> DVector<f64> {
        let nf = self.basis.dim();
        match self.subdomain {
            Subdomain::Fluid => {
                let mut b = DVector::zeros(nf);
                for (q, &p) in self.quad.points.iter().enumerate() {
                    b.axpy(
                        self.quad.weights[q] * (bc.fluid)(p, t),
                        &self.psi.column(q).into_owned(),
                        1.0,
                    );
                }
                self.chol.solve(&b)
            }
            Subdomain::Solid => {
                let mut bx = DVector::zeros(nf);
                let mut by = DVector::zeros(nf);
                for (q, &p) in self.quad.points.iter().enumerate() {
                    let (gx, gy) = (bc.solid)(p, t);
                    let col = self.psi.column(q).into_owned();
                    bx.axpy(self.quad.weights[q] * gx, &col, 1.0);
                    by.axpy(self.quad.weights[q] * gy, &col, 1.0);
                }
                let cx = self.chol.solve(&bx);
                let cy = self.chol.solve(&by);
                let mut out = DVector::zeros(2 * nf);
                out.rows_mut(0, nf).copy_from(&cx);
                out.rows_mut(nf, nf).copy_from(&cy);
                out
            }
        }
    }
}

/// Volume source terms f^f (scalar) and f^s (vector).
pub struct Sources {
    pub fluid: Box<dyn Fn(Point2, f64) -> f64 + Sync>,
    pub solid: Box<dyn Fn(Point2, f64) -> (f64, f64) + Sync>,
}

impl Sources {
    pub fn zero() -> Self {
        Self {
            fluid: Box::new(|_, _| 0.0),
            solid: Box::new(|_, _| (0.0, 0.0)),
        }
    }
}

/// Dirichlet boundary data: pressure on the fluid boundary, velocity on the
/// solid boundary.
pub struct BoundaryValues {
    pub fluid: Box<dyn Fn(Point2, f64) -> f64 + Sync>,
    pub solid: Box<dyn Fn(Point2, f64) -> (f64, f64) + Sync>,
}

impl BoundaryValues {
    pub fn zero() -> Self {
        Self {
            fluid: Box::new(|_, _| 0.0),
            solid: Box::new(|_, _| (0.0, 0.0)),
        }
    }
}

/// The assembled semi-discrete system M du/dt + K u = F.
pub struct BlockSystem {
    pub dofs: DofMap,
    pub setting: DiscretizationSetting,
    pub materials: Materials,
    pub cells: Vec<CellBlockData>,
    /// One entry per mesh face; None for Dirichlet (boundary) faces.
    pub faces: Vec<Option<FaceBlockData>>,
    pub dirichlet: Vec<Option<DirichletFaceData>>,
    pub subdomains: Vec<Subdomain>,
}

/// Assembles the global block system for the given mesh, discretization
/// setting and material properties.
pub fn assemble(
    mesh: &Mesh,
    setting: &DiscretizationSetting,
    materials: &Materials,
) -> Result<BlockSystem, AssemblyError> {
    if mesh.n_cells() == 0 {
        return Err(AssemblyError::EmptyMesh);
    }
    let dofs = DofMap::new(mesh, setting);
    let k = setting.k;
    let nf = k + 1;
    let hooke = HookeTensor {
        lambda: materials.lambda,
        mu: materials.mu,
    };
    let c_inv = hooke.inverse_coord_matrix();

    let zeta_f = 1.0 / (materials.rho_f * materials.c_p_fluid());
    let zeta_s = materials.rho_s
        * match setting.solid_stab_speed {
            SolidStabSpeed::PWave => materials.c_p_solid(),
            SolidStabSpeed::SWave => materials.c_s_solid(),
        };

    // Per-face accumulated diagonal blocks, filled during the cell loop.
    let mut face_acc: Vec<Option<DMatrix<f64>>> = vec![None; mesh.n_faces()];
    for (f, face) in mesh.faces.iter().enumerate() {
        if !face.class.is_boundary() {
            let nloc = usize::from(face.class.has_fluid_side()) * nf
                + usize::from(face.class.has_solid_side()) * 2 * nf;
            face_acc[f] = Some(DMatrix::zeros(nloc, nloc));
        }
    }
    let face_local_offsets = |class: FaceClass| -> (Option<usize>, Option<usize>) {
        match class {
            FaceClass::InteriorFluid => (Some(0), None),
            FaceClass::InteriorSolid => (None, Some(0)),
            FaceClass::Interface => (Some(0), Some(nf)),
            _ => (None, None),
        }
    };

    let mut cells = Vec::with_capacity(mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let ctx = CellContext::new(mesh, c, setting)?;
        let nd = ctx.n_dual();
        let nc = ctx.n_cell();
        let sd = ctx.subdomain;
        let tau = setting.tau(
            sd,
            match sd {
                Subdomain::Fluid => zeta_f,
                Subdomain::Solid => zeta_s,
            },
            ctx.h_tilde,
        );

        let (n, dual_size, primal_size) = match sd {
            Subdomain::Fluid => (2 * nd + nc, 2 * nd, nc),
            Subdomain::Solid => (3 * nd + 2 * nc, 3 * nd, 2 * nc),
        };

        // Weighted mass: fluid diag(ρ^f I₂⊗M_k, κ⁻¹ M_{k'});
        // solid diag(ℂ⁻¹ ⊗ M_k, ρ^s I₂⊗M_{k'}).
        let mut mass = DMatrix::zeros(n, n);
        match sd {
            Subdomain::Fluid => {
                for comp in 0..2 {
                    mass.view_mut((comp * nd, comp * nd), (nd, nd))
                        .copy_from(&(materials.rho_f * &ctx.mass_dual));
                }
                mass.view_mut((2 * nd, 2 * nd), (nc, nc))
                    .copy_from(&(&ctx.mass_cell / materials.kappa));
            }
            Subdomain::Solid => {
                for ti in 0..3 {
                    for tj in 0..3 {
                        if c_inv[(ti, tj)] != 0.0 {
                            mass.view_mut((ti * nd, tj * nd), (nd, nd))
                                .copy_from(&(c_inv[(ti, tj)] * &ctx.mass_dual));
                        }
                    }
                }
                for comp in 0..2 {
                    mass.view_mut(
                        (3 * nd + comp * nc, 3 * nd + comp * nc),
                        (nc, nc),
                    )
                    .copy_from(&(materials.rho_s * &ctx.mass_cell));
                }
            }
        }
        let mass_chol = mass
            .clone()
            .cholesky()
            .ok_or(AssemblyError::SingularCellBlock(c))?;

        // Reconstruction and stabilization blocks. The reconstructions return
        // coefficient operators; the weak form needs their dual moments, so
        // left-multiply blockwise by the dual mass.
        let (g_t, g_tf, stab) = match sd {
            Subdomain::Fluid => {
                let (g_t, g_tf) = grad_reconstruction(&ctx);
                (g_t, g_tf, stabilization_scalar(&ctx, tau))
            }
            Subdomain::Solid => {
                let (e_t, e_tf) = sym_grad_reconstruction(&ctx);
                (e_t, e_tf, stabilization_vector(&ctx, tau))
            }
        };
        let to_moments = |m: &DMatrix<f64>| -> DMatrix<f64> {
            let mut out = m.clone();
            let blocks = m.nrows() / nd;
            for bi in 0..blocks {
                out.rows_mut(bi * nd, nd)
                    .copy_from(&(&ctx.mass_dual * m.rows(bi * nd, nd)));
            }
            out
        };
        let g_t = to_moments(&g_t);
        let g_tf = to_moments(&g_tf);

        // K_TT: dual rows get −G_T, primal rows get +G_Tᵀ + S_TT.
        let mut k_tt = DMatrix::zeros(n, n);
        k_tt.view_mut((0, dual_size), (dual_size, primal_size))
            .copy_from(&(-&g_t));
        k_tt.view_mut((dual_size, 0), (primal_size, dual_size))
            .copy_from(&g_t.transpose());
        let mut stab_tt = DMatrix::zeros(n, n);
        stab_tt
            .view_mut((dual_size, dual_size), (primal_size, primal_size))
            .copy_from(&stab.s_tt);
        k_tt.view_mut((dual_size, dual_size), (primal_size, primal_size))
            .copy_from(&stab.s_tt);

        // Global indices: dual block then primal block.
        let mut global = Vec::with_capacity(n);
        match sd {
            Subdomain::Fluid => {
                global.extend(dofs.cell_m[c].clone().unwrap());
                global.extend(dofs.cell_p[c].clone().unwrap());
            }
            Subdomain::Solid => {
                global.extend(dofs.cell_s[c].clone().unwrap());
                global.extend(dofs.cell_v[c].clone().unwrap());
            }
        }

        // Per-face blocks.
        let fdofs = match sd {
            Subdomain::Fluid => nf,
            Subdomain::Solid => 2 * nf,
        };
        let mut local_faces = Vec::with_capacity(ctx.faces.len());
        for (fi, fc) in ctx.faces.iter().enumerate() {
            let gtf_f = g_tf.columns(fi * fdofs, fdofs).into_owned();
            let stf_f = stab.s_tf.columns(fi * fdofs, fdofs).into_owned();
            let mut k_tf = DMatrix::zeros(n, fdofs);
            k_tf.view_mut((0, 0), (dual_size, fdofs)).copy_from(&(-&gtf_f));
            k_tf.view_mut((dual_size, 0), (primal_size, fdofs))
                .copy_from(&stf_f);
            let mut k_ft = DMatrix::zeros(fdofs, n);
            k_ft.view_mut((0, 0), (fdofs, dual_size))
                .copy_from(&gtf_f.transpose());
            k_ft.view_mut((0, dual_size), (fdofs, primal_size))
                .copy_from(&stf_f.transpose());
            let mut stab_tf = DMatrix::zeros(n, fdofs);
            stab_tf
                .view_mut((dual_size, 0), (primal_size, fdofs))
                .copy_from(&stf_f);

            // Accumulate this cell's stabilization into the face diagonal.
            let face = fc.face;
            if let Some(acc) = face_acc[face].as_mut() {
                let (f_off, s_off) = face_local_offsets(mesh.faces[face].class);
                let off = match sd {
                    Subdomain::Fluid => f_off.expect("fluid side offset"),
                    Subdomain::Solid => s_off.expect("solid side offset"),
                };
                let mut view = acc.view_mut((off, off), (fdofs, fdofs));
                view += &stab.s_ff[fi];
            }

            local_faces.push(LocalFaceBlocks {
                face,
                k_tf,
                k_ft,
                stab_tf,
                stab_ff: stab.s_ff[fi].clone(),
            });
        }

        cells.push(CellBlockData {
            cell: c,
            subdomain: sd,
            n,
            mass,
            mass_chol,
            k_tt,
            stab_tt,
            faces: local_faces,
            global,
            primal_offset: dual_size,
            quad: ctx.quad.clone(),
            primal_table: ctx.cell_table.clone(),
            dual_table: ctx.dual_table.clone(),
            primal_basis: ctx.cell_basis.clone(),
            dual_basis: ctx.dual_basis.clone(),
        });
    }

    // Face diagonal blocks: stabilization plus interface coupling
    // +Q on the fluid row block, −Qᵀ on the solid row block, with
    // Q[i, (c, m)] = n_Γ,c (ψ_m, ψ_i)_F.
    let mut faces = Vec::with_capacity(mesh.n_faces());
    let mut dirichlet = Vec::with_capacity(mesh.n_faces());
    for (f, face) in mesh.faces.iter().enumerate() {
        if face.class.is_boundary() {
            let owner = face.cells[0].expect("boundary face has owner");
            let quad = crate::polybasis::face_quadrature(
                mesh,
                f,
                crate::polybasis::default_face_exactness(k),
            )?;
            let basis = FaceBasis::for_face(mesh, f).degree(k);
            let psi = basis.eval_table(&quad);
            let mass = crate::polybasis::mass_matrix(&psi, &quad.weights);
            let chol = mass.cholesky().ok_or(AssemblyError::SingularFaceBlock(f))?;
            dirichlet.push(Some(DirichletFaceData {
                face: f,
                subdomain: mesh.cells[owner].subdomain,
                basis,
                quad,
                psi,
                chol,
            }));
            faces.push(None);
            continue;
        }
        dirichlet.push(None);
        let mut k_ff = face_acc[f].take().expect("interior face accumulated");
        let (fluid_off, solid_off) = face_local_offsets(face.class);
        if face.class == FaceClass::Interface {
            // n_Γ is the stored normal (owner is the solid cell).
            let n_gamma = face.normal;
            let quad = crate::polybasis::face_quadrature(
                mesh,
                f,
                crate::polybasis::default_face_exactness(k),
            )?;
            let basis = FaceBasis::for_face(mesh, f).degree(k);
            let psi = basis.eval_table(&quad);
            let m_f = crate::polybasis::mass_matrix(&psi, &quad.weights);
            for (comp, n_comp) in [(0usize, n_gamma.x), (1usize, n_gamma.y)] {
                let mut top = k_ff.view_mut((0, nf + comp * nf), (nf, nf));
                top += n_comp * &m_f;
                let mut bottom = k_ff.view_mut((nf + comp * nf, 0), (nf, nf));
                bottom -= n_comp * m_f.transpose();
            }
        }
        let mut global = Vec::new();
        if let Some(r) = &dofs.face_p[f] {
            global.extend(r.clone());
        }
        if let Some(r) = &dofs.face_v[f] {
            global.extend(r.clone());
        }
        let lu = k_ff.clone().lu();
        if lu_is_singular(&lu) {
            return Err(AssemblyError::SingularFaceBlock(f));
        }
        faces.push(Some(FaceBlockData {
            face: f,
            k_ff,
            lu,
            global,
            fluid_off,
            solid_off,
        }));
    }

    Ok(BlockSystem {
        dofs,
        setting: *setting,
        materials: *materials,
        cells,
        faces,
        dirichlet,
        subdomains: mesh.cells.iter().map(|c| c.subdomain).collect(),
    })
}

impl BlockSystem {
    pub fn n_cell_dofs(&self) -> usize {
        self.dofs.n_cell_dofs
    }

    pub fn n_face_dofs(&self) -> usize {
        self.dofs.n_face_dofs
    }

    fn gather(u: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
        DVector::from_iterator(idx.len(), idx.iter().map(|&i| u[i]))
    }

    fn scatter_add(y: &mut DVector<f64>, idx: &[usize], v: &DVector<f64>) {
        for (loc, &g) in idx.iter().enumerate() {
            y[g] += v[loc];
        }
    }

    /// Face dof indices (into the face unknown vector) seen from a cell's
    /// side of face block `fb`.
    fn side_indices<'a>(&self, fb: &'a FaceBlockData, sd: Subdomain) -> &'a [usize] {
        let (off, width) = fb.side(sd, self.dofs.k);
        &fb.global[off..off + width]
    }

    /// y_T = M u_T (weighted mass).
    pub fn mass_apply(&self, u_t: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n_cell_dofs());
        for cb in &self.cells {
            let local = Self::gather(u_t, &cb.global);
            Self::scatter_add(&mut y, &cb.global, &(&cb.mass * local));
        }
        y
    }

    /// x_T = M⁻¹ b_T (per-cell Cholesky).
    pub fn mass_solve(&self, b_t: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_cell_dofs());
        for cb in &self.cells {
            let local = Self::gather(b_t, &cb.global);
            let sol = cb.mass_solve(&local);
            for (loc, &g) in cb.global.iter().enumerate() {
                x[g] = sol[loc];
            }
        }
        x
    }

    /// (y_T, y_F) = K (u_T, u_F), homogeneous part (no Dirichlet columns).
    pub fn stiffness_apply(
        &self,
        u_t: &DVector<f64>,
        u_f: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let mut y_t = DVector::zeros(self.n_cell_dofs());
        let mut y_f = DVector::zeros(self.n_face_dofs());
        for cb in &self.cells {
            let local = Self::gather(u_t, &cb.global);
            Self::scatter_add(&mut y_t, &cb.global, &(&cb.k_tt * &local));
            for lf in &cb.faces {
                if let Some(fb) = &self.faces[lf.face] {
                    let idx = self.side_indices(fb, cb.subdomain);
                    let uf_local = Self::gather(u_f, idx);
                    Self::scatter_add(&mut y_t, &cb.global, &(&lf.k_tf * uf_local));
                    let contrib = &lf.k_ft * &local;
                    for (loc, &g) in idx.iter().enumerate() {
                        y_f[g] += contrib[loc];
                    }
                }
            }
        }
        for fb in self.faces.iter().flatten() {
            let local = Self::gather(u_f, &fb.global);
            Self::scatter_add(&mut y_f, &fb.global, &(&fb.k_ff * local));
        }
        (y_t, y_f)
    }

    /// Load vector over cell dofs at time `t` (face rows carry no load).
    pub fn load(&self, t: f64, sources: &Sources) -> DVector<f64> {
        let mut f_t = DVector::zeros(self.n_cell_dofs());
        for cb in &self.cells {
            let npr = cb.primal_table.nrows();
            match cb.subdomain {
                Subdomain::Fluid => {
                    let mut b = DVector::zeros(npr);
                    for (q, &p) in cb.quad.points.iter().enumerate() {
                        b.axpy(
                            cb.quad.weights[q] * (sources.fluid)(p, t),
                            &cb.primal_table.column(q).into_owned(),
                            1.0,
                        );
                    }
                    for i in 0..npr {
                        f_t[cb.global[cb.primal_offset + i]] += b[i];
                    }
                }
                Subdomain::Solid => {
                    let mut bx = DVector::zeros(npr);
                    let mut by = DVector::zeros(npr);
                    for (q, &p) in cb.quad.points.iter().enumerate() {
                        let (fx, fy) = (sources.solid)(p, t);
                        let col = cb.primal_table.column(q).into_owned();
                        bx.axpy(cb.quad.weights[q] * fx, &col, 1.0);
                        by.axpy(cb.quad.weights[q] * fy, &col, 1.0);
                    }
                    for i in 0..npr {
                        f_t[cb.global[cb.primal_offset + i]] += bx[i];
                        f_t[cb.global[cb.primal_offset + npr + i]] += by[i];
                    }
                }
            }
        }
        f_t
    }

    /// Dirichlet lift at time `t`: −Σ K_TD g_D(t) over cell rows (face rows
    /// of unknown faces receive no boundary contribution).
    pub fn dirichlet_lift(&self, t: f64, bc: &BoundaryValues) -> DVector<f64> {
        let mut lift = DVector::zeros(self.n_cell_dofs());
        for cb in &self.cells {
            for lf in &cb.faces {
                if let Some(df) = &self.dirichlet[lf.face] {
                    let g = df.project(bc, t);
                    let contrib = &lf.k_tf * g;
                    for (loc, &gi) in cb.global.iter().enumerate() {
                        lift[gi] -= contrib[loc];
                    }
                }
            }
        }
        lift
    }

    /// F_T(t) + lift(t): the complete cell-row right-hand side.
    pub fn rhs_cells(&self, t: f64, sources: &Sources, bc: &BoundaryValues) -> DVector<f64> {
        self.load(t, sources) + self.dirichlet_lift(t, bc)
    }

    /// Solves the block-diagonal face system K_FF x_F = b_F.
    pub fn face_solve(&self, b_f: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_face_dofs());
        for fb in self.faces.iter().flatten() {
            let local = Self::gather(b_f, &fb.global);
            let sol = fb.lu.solve(&local).expect("face block is invertible");
            for (loc, &g) in fb.global.iter().enumerate() {
                x[g] = sol[loc];
            }
        }
        x
    }

    /// y_F = K_FT u_T.
    pub fn k_ft_apply(&self, u_t: &DVector<f64>) -> DVector<f64> {
        let mut y_f = DVector::zeros(self.n_face_dofs());
        for cb in &self.cells {
            let local = Self::gather(u_t, &cb.global);
            for lf in &cb.faces {
                if let Some(fb) = &self.faces[lf.face] {
                    let idx = self.side_indices(fb, cb.subdomain);
                    let contrib = &lf.k_ft * &local;
                    for (loc, &g) in idx.iter().enumerate() {
                        y_f[g] += contrib[loc];
                    }
                }
            }
        }
        y_f
    }

    /// y_T = K_TF u_F.
    pub fn k_tf_apply(&self, u_f: &DVector<f64>) -> DVector<f64> {
        let mut y_t = DVector::zeros(self.n_cell_dofs());
        for cb in &self.cells {
            for lf in &cb.faces {
                if let Some(fb) = &self.faces[lf.face] {
                    let idx = self.side_indices(fb, cb.subdomain);
                    let uf_local = Self::gather(u_f, idx);
                    Self::scatter_add(&mut y_t, &cb.global, &(&lf.k_tf * uf_local));
                }
            }
        }
        y_t
    }

    /// Consistent face values for given cell values: K_FF u_F = −K_FT u_T.
    pub fn consistent_faces(&self, u_t: &DVector<f64>) -> DVector<f64> {
        self.face_solve(&(-self.k_ft_apply(u_t)))
    }

    /// Dense stiffness over all (cell + face) unknowns, cell dofs first.
    /// Oracle/diagnostic use on small meshes only.
    pub fn stiffness_dense(&self) -> DMatrix<f64> {
        let nt = self.n_cell_dofs();
        let nf = self.n_face_dofs();
        let mut k = DMatrix::zeros(nt + nf, nt + nf);
        for cb in &self.cells {
            for (li, &gi) in cb.global.iter().enumerate() {
                for (lj, &gj) in cb.global.iter().enumerate() {
                    k[(gi, gj)] += cb.k_tt[(li, lj)];
                }
            }
            for lf in &cb.faces {
                if let Some(fb) = &self.faces[lf.face] {
                    let idx = self.side_indices(fb, cb.subdomain);
                    for (li, &gi) in cb.global.iter().enumerate() {
                        for (lj, &gj) in idx.iter().enumerate() {
                            k[(gi, nt + gj)] += lf.k_tf[(li, lj)];
                            k[(nt + gj, gi)] += lf.k_ft[(lj, li)];
                        }
                    }
                }
            }
        }
        for fb in self.faces.iter().flatten() {
            for (li, &gi) in fb.global.iter().enumerate() {
                for (lj, &gj) in fb.global.iter().enumerate() {
                    k[(nt + gi, nt + gj)] += fb.k_ff[(li, lj)];
                }
            }
        }
        k
    }

    /// Dense assembled stabilization over all unknowns, built from the
    /// independently stored stabilization blocks.
    pub fn stabilization_dense(&self) -> DMatrix<f64> {
        let nt = self.n_cell_dofs();
        let nfd = self.n_face_dofs();
        let mut s = DMatrix::zeros(nt + nfd, nt + nfd);
        for cb in &self.cells {
            for (li, &gi) in cb.global.iter().enumerate() {
                for (lj, &gj) in cb.global.iter().enumerate() {
                    s[(gi, gj)] += cb.stab_tt[(li, lj)];
                }
            }
            for lf in &cb.faces {
                if let Some(fb) = &self.faces[lf.face] {
                    let idx = self.side_indices(fb, cb.subdomain);
                    for (li, &gi) in cb.global.iter().enumerate() {
                        for (lj, &gj) in idx.iter().enumerate() {
                            s[(gi, nt + gj)] += lf.stab_tf[(li, lj)];
                            s[(nt + gj, gi)] += lf.stab_tf[(li, lj)];
                        }
                    }
                    for (li, &gi) in idx.iter().enumerate() {
                        for (lj, &gj) in idx.iter().enumerate() {
                            s[(nt + gi, nt + gj)] += lf.stab_ff[(li, lj)];
                        }
                    }
                }
            }
        }
        s
    }

    /// Dense weighted mass over cell unknowns.
    pub fn mass_dense(&self) -> DMatrix<f64> {
        let nt = self.n_cell_dofs();
        let mut m = DMatrix::zeros(nt, nt);
        for cb in &self.cells {
            for (li, &gi) in cb.global.iter().enumerate() {
                for (lj, &gj) in cb.global.iter().enumerate() {
                    m[(gi, gj)] += cb.mass[(li, lj)];
                }
            }
        }
        m
    }

    /// Sparse triplets of the Schur complement
    /// K_schur = K_TT − K_TF K_FF⁻¹ K_FT over cell unknowns, computed by
    /// per-face block solves.
    pub fn schur_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut trips = Vec::new();
        for cb in &self.cells {
            for (li, &gi) in cb.global.iter().enumerate() {
                for (lj, &gj) in cb.global.iter().enumerate() {
                    let v = cb.k_tt[(li, lj)];
                    if v != 0.0 {
                        trips.push((gi, gj, v));
                    }
                }
            }
        }
        // For each face: gather the stacked K_FT rows (over adjacent cells),
        // solve K_FF X = K_FT, and subtract K_TF X.
        for fb in self.faces.iter().flatten() {
            // Adjacent (cell block, local face) pairs.
            let adj: Vec<(&CellBlockData, &LocalFaceBlocks)> = self
                .cells
                .iter()
                .flat_map(|cb| {
                    cb.faces
                        .iter()
                        .filter(|lf| lf.face == fb.face)
                        .map(move |lf| (cb, lf))
                })
                .collect();
            let nloc = fb.global.len();
            let ncols: usize = adj.iter().map(|(cb, _)| cb.n).sum();
            let mut k_ft = DMatrix::zeros(nloc, ncols);
            let mut k_tf = DMatrix::zeros(ncols, nloc);
            let mut col0 = 0;
            for (cb, lf) in &adj {
                let (off, width) = fb.side(cb.subdomain, self.dofs.k);
                k_ft.view_mut((off, col0), (width, cb.n)).copy_from(&lf.k_ft);
                k_tf.view_mut((col0, off), (cb.n, width)).copy_from(&lf.k_tf);
                col0 += cb.n;
            }
            let x = fb.lu.solve(&k_ft).expect("face block is invertible");
            let correction = k_tf * x; // ncols × ncols
            let mut row0 = 0;
            for (cb_i, _) in &adj {
                let mut col0 = 0;
                for (cb_j, _) in &adj {
                    for li in 0..cb_i.n {
                        for lj in 0..cb_j.n {
                            let v = correction[(row0 + li, col0 + lj)];
                            if v != 0.0 {
                                trips.push((cb_i.global[li], cb_j.global[lj], -v));
                            }
                        }
                    }
                    col0 += cb_j.n;
                }
                row0 += cb_i.n;
            }
        }
        trips
    }

    /// Dense Schur complement (small systems / oracle use).
    pub fn schur_dense(&self) -> DMatrix<f64> {
        let nt = self.n_cell_dofs();
        let mut k = DMatrix::zeros(nt, nt);
        for (i, j, v) in self.schur_triplets() {
            k[(i, j)] += v;
        }
        k
    }

    /// Prepares the reusable static-condensation factorization of
    /// (M + σK) for the given σ = aΔt > 0.
    pub fn condensed_stage_factorization(
        &self,
        sigma: f64,
    ) -> Result<CondensedFactorization, AssemblyError> {
        assert!(sigma > 0.0, "condensation requires sigma > 0");
        let mut cell_lus = Vec::with_capacity(self.cells.len());
        for cb in &self.cells {
            let c = &cb.mass + sigma * &cb.k_tt;
            let lu = c.lu();
            if lu_is_singular(&lu) {
                return Err(AssemblyError::SingularCellBlock(cb.cell));
            }
            cell_lus.push(lu);
        }

        // Face system A = σ K_FF − σ² K_FT C⁻¹ K_TF, assembled sparsely.
        let mut entries: HashMap<(usize, usize), f64> = HashMap::new();
        for fb in self.faces.iter().flatten() {
            for (li, &gi) in fb.global.iter().enumerate() {
                for (lj, &gj) in fb.global.iter().enumerate() {
                    let v = sigma * fb.k_ff[(li, lj)];
                    if v != 0.0 {
                        *entries.entry((gi, gj)).or_insert(0.0) += v;
                    }
                }
            }
        }
        for (c, cb) in self.cells.iter().enumerate() {
            // Stack the unknown-face blocks of this cell.
            let active: Vec<&LocalFaceBlocks> = cb
                .faces
                .iter()
                .filter(|lf| self.faces[lf.face].is_some())
                .collect();
            if active.is_empty() {
                continue;
            }
            let widths: Vec<usize> = active
                .iter()
                .map(|lf| {
                    let fb = self.faces[lf.face].as_ref().unwrap();
                    fb.side(cb.subdomain, self.dofs.k).1
                })
                .collect();
            let total: usize = widths.iter().sum();
            let mut k_tf = DMatrix::zeros(cb.n, total);
            let mut k_ft = DMatrix::zeros(total, cb.n);
            let mut indices = Vec::with_capacity(total);
            let mut off = 0;
            for (lf, &w) in active.iter().zip(&widths) {
                let fb = self.faces[lf.face].as_ref().unwrap();
                k_tf.view_mut((0, off), (cb.n, w)).copy_from(&lf.k_tf);
                k_ft.view_mut((off, 0), (w, cb.n)).copy_from(&lf.k_ft);
                indices.extend_from_slice(self.side_indices(fb, cb.subdomain));
                off += w;
            }
            let x = cell_lus[c].solve(&k_tf).expect("cell block invertible");
            let correction = k_ft * x; // total × total
            let s2 = sigma * sigma;
            for (li, &gi) in indices.iter().enumerate() {
                for (lj, &gj) in indices.iter().enumerate() {
                    let v = -s2 * correction[(li, lj)];
                    if v != 0.0 {
                        *entries.entry((gi, gj)).or_insert(0.0) += v;
                    }
                }
            }
        }

        let nfd = self.n_face_dofs();
        let face_lu = if nfd > 0 {
            let trips: Vec<Triplet<usize, usize, f64>> = entries
                .iter()
                .map(|(&(i, j), &v)| Triplet::new(i, j, v))
                .collect();
            let a: SparseColMat<usize, f64> =
                SparseColMat::try_new_from_triplets(nfd, nfd, &trips)
                    .map_err(|_| AssemblyError::FaceSystemSingular)?;
            Some(
                a.sp_lu()
                    .map_err(|_| AssemblyError::FaceSystemSingular)?,
            )
        } else {
            None
        };

        Ok(CondensedFactorization {
            sigma,
            cell_lus,
            face_lu,
        })
    }
}

/// Reusable factorization of (M + σK) by static condensation of the cell
/// unknowns onto a global sparse face system.
pub struct CondensedFactorization {
    pub sigma: f64,
    cell_lus: Vec<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    face_lu: Option<faer::sparse::linalg::solvers::Lu<usize, f64>>,
}

impl CondensedFactorization {
    /// Solves [[M+σK_TT, σK_TF], [σK_FT, σK_FF]] (x_T, x_F) = (b_T, b_F).
    pub fn solve(
        &self,
        sys: &BlockSystem,
        b_t: &DVector<f64>,
        b_f: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let sigma = self.sigma;
        // z = C⁻¹ b_T.
        let mut z = DVector::zeros(sys.n_cell_dofs());
        for (c, cb) in sys.cells.iter().enumerate() {
            let local = BlockSystem::gather(b_t, &cb.global);
            let sol = self.cell_lus[c].solve(&local).expect("cell block invertible");
            for (loc, &g) in cb.global.iter().enumerate() {
                z[g] = sol[loc];
            }
        }
        // Face RHS: b_F − σ K_FT z.
        let rhs_f = b_f - sigma * sys.k_ft_apply(&z);
        let x_f = match &self.face_lu {
            Some(lu) => {
                let rhs = Mat::from_fn(rhs_f.len(), 1, |i, _| rhs_f[i]);
                let sol = lu.solve(&rhs);
                DVector::from_fn(rhs_f.len(), |i, _| sol[(i, 0)])
            }
            None => DVector::zeros(0),
        };
        // Back substitution: x_T = C⁻¹ (b_T − σ K_TF x_F).
        let rhs_t = b_t - sigma * sys.k_tf_apply(&x_f);
        let mut x_t = DVector::zeros(sys.n_cell_dofs());
        for (c, cb) in sys.cells.iter().enumerate() {
            let local = BlockSystem::gather(&rhs_t, &cb.global);
            let sol = self.cell_lus[c].solve(&local).expect("cell block invertible");
            for (loc, &g) in cb.global.iter().enumerate() {
                x_t[g] = sol[loc];
            }
        }
        (x_t, x_f)
    }
}

impl BlockSystem {
    fn gather_pub(u: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
        Self::gather(u, idx)
    }

    /// Gathers a cell's local coefficient vector from the global one.
    pub fn cell_local(&self, u_t: &DVector<f64>, cell: usize) -> DVector<f64> {
        Self::gather_pub(u_t, &self.cells[cell].global)
    }
}
