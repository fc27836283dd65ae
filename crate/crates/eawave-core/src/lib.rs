//! Coupled elasto-acoustic wave propagation in 2D.
//!
//! The spatial discretization is a hybrid high-order (HHO) method for the
//! primal variables (acoustic pressure `p`, elastic velocity `v`) combined
//! with a discontinuous Galerkin treatment of the dual variables (fluid
//! velocity `m`, elastic stress `s`), written in first-order form. Cell
//! unknowns live in `P^{k'}` with `k' ∈ {k, k+1}` and face unknowns in
//! `P^k`, glued by a local gradient (resp. symmetric-gradient)
//! reconstruction plus a least-squares stabilization on face traces.
//!
//! Time integration uses explicit or singly diagonally implicit Runge-Kutta
//! schemes; the face unknowns are massless (index-1 algebraic constraints)
//! and are eliminated per stage, either by per-face block solves (explicit)
//! or by static condensation of the cell unknowns (implicit).
//!
//! Module layout:
//! - [`mesh`]: polytopal meshes fitting the fluid/solid partition;
//! - [`polybasis`]: scaled monomial bases and quadrature;
//! - [`hho_local`]: per-cell reconstructions, stabilization, interpolation;
//! - [`assembly`]: global block system, Dirichlet lifts, condensation;
//! - [`timeint`]: Butcher tableaux, ERK/SDIRK steppers, simulation driver;
//! - [`spectral`]: spectral radius of the condensed operator, weight sweeps;
//! - [`physics`]: materials, manufactured solutions, Ricker pulse, energy,
//!   sensors.

pub mod assembly;
pub mod hho_local;
pub mod mesh;
pub mod physics;
pub mod polybasis;
pub mod spectral;
pub mod timeint;
