//! Spectral radius of the condensed spatial operator and stabilization
//! weight sweeps.
//!
//! After eliminating the face unknowns, the semi-discrete system reads
//! du_T/dt = −M⁻¹K_schur u_T with K_schur = K_TT − K_TF K_FF⁻¹ K_FT. The
//! explicit CFL limit is governed by the spectral radius of M⁻¹K_schur,
//! measured here through the generalized singular problem
//! K_schurᵀ M⁻¹ K_schur x = γ M x; the reported radius is
//! √γ_max / √(#cells), which is insensitive to the mesh refinement level
//! on quasi-uniform meshes.

use nalgebra::DVector;
use thiserror::Error;

use crate::assembly::{assemble, AssemblyError, BlockSystem};
use crate::hho_local::{optimal_weights, DiscretizationSetting, OrderMode, SettingError};
use crate::mesh::{build_cartesian_single, CoupledRectangles, MeshError, Subdomain};
use crate::physics::Materials;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Setting(#[from] SettingError),
    #[error("power iteration failed to converge after {0} iterations")]
    NoConvergence(usize),
}

/// Cell-dof count above which the dense eigensolve is replaced by power
/// iteration on the sparse Schur operator.
pub const DENSE_LIMIT: usize = 5000;

/// Outcome of one spectral-radius computation.
#[derive(Debug, Clone, Copy)]
pub struct SpectralRadius {
    /// Largest generalized eigenvalue γ_max.
    pub raw_gamma: f64,
    /// √γ_max / √(#cells).
    pub normalized_radius: f64,
    pub cells: usize,
    pub cell_dofs: usize,
    /// Whether the dense path was used.
    pub dense: bool,
}

/// Computes the spectral radius of the condensed operator of `sys`.
pub fn spectral_radius(sys: &BlockSystem) -> Result<SpectralRadius, SpectralError> {
    let nt = sys.n_cell_dofs();
    let cells = sys.cells.len();
    let (raw_gamma, dense) = if nt <= DENSE_LIMIT {
        (dense_gamma(sys), true)
    } else {
        (power_gamma(sys)?, false)
    };
    Ok(SpectralRadius {
        raw_gamma,
        normalized_radius: raw_gamma.max(0.0).sqrt() / (cells as f64).sqrt(),
        cells,
        cell_dofs: nt,
        dense,
    })
}

/// Dense path: γ_max = λ_max(CᵀC) with C = L⁻¹ K_schur L⁻ᵀ, M = LLᵀ.
fn dense_gamma(sys: &BlockSystem) -> f64 {
    let k_s = sys.schur_dense();
    let m = sys.mass_dense();
    let chol = m.cholesky().expect("mass matrix is SPD");
    let l = chol.l();
    let mut t1 = k_s;
    l.solve_lower_triangular_mut(&mut t1);
    let mut t2 = t1.transpose();
    l.solve_lower_triangular_mut(&mut t2);
    let c = t2.transpose();
    let sym = c.transpose() * &c;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
}

/// Power iteration on M⁻¹K_schurᵀM⁻¹K_schur with M-norm normalization.
fn power_gamma(sys: &BlockSystem) -> Result<f64, SpectralError> {
    const TOL: f64 = 1e-8;
    const MAX_IT: usize = 10_000;
    let nt = sys.n_cell_dofs();
    let trips = sys.schur_triplets();
    let apply = |x: &DVector<f64>, transpose: bool| -> DVector<f64> {
        let mut y = DVector::zeros(nt);
        for &(i, j, v) in &trips {
            if transpose {
                y[j] += v * x[i];
            } else {
                y[i] += v * x[j];
            }
        }
        y
    };
    // Deterministic full-spectrum seed.
    let mut x = DVector::from_fn(nt, |i, _| ((i + 1) as f64).sin());
    let mnorm = |v: &DVector<f64>, sys: &BlockSystem| -> f64 {
        v.dot(&sys.mass_apply(v)).max(0.0).sqrt()
    };
    let n0 = mnorm(&x, sys);
    x /= n0;
    let mut gamma_prev = 0.0;
    for it in 0..MAX_IT {
        let y = apply(&x, false);
        let z = sys.mass_solve(&y);
        let gamma = y.dot(&z); // x is M-normalized
        let mut next = sys.mass_solve(&apply(&z, true));
        let nn = mnorm(&next, sys);
        if nn == 0.0 {
            return Ok(0.0);
        }
        next /= nn;
        x = next;
        if it > 0 && (gamma - gamma_prev).abs() <= TOL * gamma.abs() {
            return Ok(gamma);
        }
        gamma_prev = gamma;
    }
    Err(SpectralError::NoConvergence(MAX_IT))
}

/// Which variant of the model problem a sweep entry refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMode {
    /// Both subdomains with interface coupling.
    Coupled,
    /// Fluid-only problem on the fluid rectangle.
    Acoustic,
    /// Solid-only problem on the solid rectangle.
    Elastic,
}

impl SpectralMode {
    pub fn label(&self) -> &'static str {
        match self {
            SpectralMode::Coupled => "coupled",
            SpectralMode::Acoustic => "acoustic",
            SpectralMode::Elastic => "elastic",
        }
    }
}

/// One row of a weight sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub mode: SpectralMode,
    pub k: usize,
    pub w: i32,
    pub eta_f: f64,
    pub eta_s: f64,
    pub geometry: String,
    pub cells: usize,
    pub raw_gamma: f64,
    pub normalized_radius: f64,
}

/// Sweeps the stabilization weights η = η*·2^w around the reference values
/// for each polynomial degree in `ks` and each exponent in `ws`, for every
/// requested mode, on the Cartesian unit-squares geometry at the given
/// refinement level.
pub fn weight_sweep(
    level: u32,
    order: OrderMode,
    alpha: u32,
    ks: &[usize],
    ws: &[i32],
    modes: &[SpectralMode],
    materials: &Materials,
) -> Result<Vec<SweepEntry>, SpectralError> {
    let geom = CoupledRectangles::unit_squares();
    let geometry = format!("cartesian-l{level}");
    let (eta_f_ref, eta_s_ref) = optimal_weights(order);
    let mut entries = Vec::new();
    for &mode in modes {
        let mesh = match mode {
            SpectralMode::Coupled => crate::mesh::build_cartesian_mesh(level, &geom)?,
            SpectralMode::Acoustic => {
                build_cartesian_single(level, geom.fluid, Subdomain::Fluid)?
            }
            SpectralMode::Elastic => {
                build_cartesian_single(level, geom.solid, Subdomain::Solid)?
            }
        };
        for &k in ks {
            for &w in ws {
                let scale = 2.0f64.powi(w);
                let setting = DiscretizationSetting::with_weights(
                    k,
                    order,
                    alpha,
                    eta_f_ref * scale,
                    eta_s_ref * scale,
                )?;
                let sys = assemble(&mesh, &setting, materials)?;
                let rad = spectral_radius(&sys)?;
                entries.push(SweepEntry {
                    mode,
                    k,
                    w,
                    eta_f: eta_f_ref * scale,
                    eta_s: eta_s_ref * scale,
                    geometry: geometry.clone(),
                    cells: rad.cells,
                    raw_gamma: rad.raw_gamma,
                    normalized_radius: rad.normalized_radius,
                });
            }
        }
    }
    Ok(entries)
}
