//! Runge-Kutta time integration of the semi-discrete system
//! M du_T/dt + K_TT u_T + K_TF u_F = F_T, with the massless face constraint
//! K_FT u_T + K_FF u_F = 0 eliminated per stage.
//!
//! Explicit schemes solve the block-diagonal face system at every stage;
//! singly diagonally implicit schemes reuse one static-condensation
//! factorization of (M + aΔtK) across all stages.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::assembly::{AssemblyError, BlockSystem, BoundaryValues, CondensedFactorization, Sources};

#[derive(Debug, Error)]
pub enum TimeError {
    #[error("unknown tableau '{0}'")]
    UnknownTableau(String),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("solution diverged (non-finite values) at t = {t}")]
    Diverged { t: f64 },
    #[error("time step must be positive")]
    NonPositiveStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableauKind {
    Explicit,
    DiagonallyImplicit,
}

/// A Butcher tableau (A, b, c).
#[derive(Debug, Clone)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub kind: TableauKind,
    pub order: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// The common diagonal coefficient of an SDIRK tableau.
    pub fn diagonal(&self) -> f64 {
        self.a[(0, 0)]
    }
}

/// Builds one of the supported tableaux: `erk2`, `erk3`, `erk4`,
/// `sdirk23`, `sdirk34`.
pub fn make_tableau(name: &str) -> Result<ButcherTableau, TimeError> {
    let t = match name {
        // Explicit midpoint rule.
        "erk2" => ButcherTableau {
            name: "erk2",
            kind: TableauKind::Explicit,
            order: 2,
            a: DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.5, 0.0]),
            b: DVector::from_row_slice(&[0.0, 1.0]),
            c: DVector::from_row_slice(&[0.0, 0.5]),
        },
        // Kutta's third-order rule.
        "erk3" => ButcherTableau {
            name: "erk3",
            kind: TableauKind::Explicit,
            order: 3,
            a: DMatrix::from_row_slice(3, 3, &[
                0.0, 0.0, 0.0,
                0.5, 0.0, 0.0,
                -1.0, 2.0, 0.0,
            ]),
            b: DVector::from_row_slice(&[1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]),
            c: DVector::from_row_slice(&[0.0, 0.5, 1.0]),
        },
        // The classical fourth-order rule.
        "erk4" => ButcherTableau {
            name: "erk4",
            kind: TableauKind::Explicit,
            order: 4,
            a: DMatrix::from_row_slice(4, 4, &[
                0.0, 0.0, 0.0, 0.0,
                0.5, 0.0, 0.0, 0.0,
                0.0, 0.5, 0.0, 0.0,
                0.0, 0.0, 1.0, 0.0,
            ]),
            b: DVector::from_row_slice(&[
                1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0,
            ]),
            c: DVector::from_row_slice(&[0.0, 0.5, 0.5, 1.0]),
        },
        // Two-stage, third-order, A-stable SDIRK (Crouzeix).
        "sdirk23" => {
            let gamma = 0.5 + 3.0_f64.sqrt() / 6.0;
            ButcherTableau {
                name: "sdirk23",
                kind: TableauKind::DiagonallyImplicit,
                order: 3,
                a: DMatrix::from_row_slice(2, 2, &[gamma, 0.0, 1.0 - 2.0 * gamma, gamma]),
                b: DVector::from_row_slice(&[0.5, 0.5]),
                c: DVector::from_row_slice(&[gamma, 1.0 - gamma]),
            }
        }
        // Three-stage, fourth-order, A-stable SDIRK (Crouzeix).
        "sdirk34" => {
            let theta = (std::f64::consts::PI / 18.0).cos() / 3.0_f64.sqrt() + 0.5;
            let xi = 1.0 / (6.0 * (2.0 * theta - 1.0).powi(2));
            ButcherTableau {
                name: "sdirk34",
                kind: TableauKind::DiagonallyImplicit,
                order: 4,
                a: DMatrix::from_row_slice(3, 3, &[
                    theta, 0.0, 0.0,
                    0.5 - theta, theta, 0.0,
                    2.0 * theta, 1.0 - 4.0 * theta, theta,
                ]),
                b: DVector::from_row_slice(&[xi, 1.0 - 2.0 * xi, xi]),
                c: DVector::from_row_slice(&[theta, 0.5, 1.0 - theta]),
            }
        }
        other => return Err(TimeError::UnknownTableau(other.to_string())),
    };
    Ok(t)
}

/// The discrete state at one time instant: cell coefficients, face
/// coefficients (consistent with the constraint), and the time.
#[derive(Debug, Clone)]
pub struct State {
    pub u_cells: DVector<f64>,
    pub u_faces: DVector<f64>,
    pub t: f64,
}

impl State {
    /// Builds a state from cell coefficients, solving for consistent faces.
    pub fn from_cells(sys: &BlockSystem, u_cells: DVector<f64>, t: f64) -> Self {
        let u_faces = sys.consistent_faces(&u_cells);
        State { u_cells, u_faces, t }
    }

    fn is_finite(&self) -> bool {
        self.u_cells.iter().all(|v| v.is_finite())
    }
}

/// One explicit Runge-Kutta step; face unknowns are re-solved at every
/// stage from the algebraic constraint.
pub fn erk_step(
    sys: &BlockSystem,
    tableau: &ButcherTableau,
    state: &State,
    dt: f64,
    sources: &Sources,
    bc: &BoundaryValues,
) -> State {
    debug_assert_eq!(tableau.kind, TableauKind::Explicit);
    let s = tableau.stages();
    let mut slopes: Vec<DVector<f64>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut w = state.u_cells.clone();
        for (j, kj) in slopes.iter().enumerate() {
            let aij = tableau.a[(i, j)];
            if aij != 0.0 {
                w.axpy(dt * aij, kj, 1.0);
            }
        }
        let ti = state.t + tableau.c[i] * dt;
        let u_f = sys.consistent_faces(&w);
        let (kt, _) = sys.stiffness_apply(&w, &u_f);
        let rhs = sys.rhs_cells(ti, sources, bc) - kt;
        slopes.push(sys.mass_solve(&rhs));
    }
    let mut u_next = state.u_cells.clone();
    for (i, ki) in slopes.iter().enumerate() {
        u_next.axpy(dt * tableau.b[i], ki, 1.0);
    }
    State::from_cells(sys, u_next, state.t + dt)
}

/// One SDIRK step using a precomputed condensation factorization of
/// (M + σK) with σ = aΔt.
pub fn sdirk_step(
    sys: &BlockSystem,
    tableau: &ButcherTableau,
    fact: &CondensedFactorization,
    state: &State,
    dt: f64,
    sources: &Sources,
    bc: &BoundaryValues,
) -> State {
    debug_assert_eq!(tableau.kind, TableauKind::DiagonallyImplicit);
    let s = tableau.stages();
    let sigma = fact.sigma;
    debug_assert!((sigma - tableau.diagonal() * dt).abs() <= 1e-14 * sigma.abs());
    let zero_f = DVector::zeros(sys.n_face_dofs());
    let mut slopes: Vec<DVector<f64>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut w = state.u_cells.clone();
        for (j, kj) in slopes.iter().enumerate() {
            let aij = tableau.a[(i, j)];
            if aij != 0.0 {
                w.axpy(dt * aij, kj, 1.0);
            }
        }
        let ti = state.t + tableau.c[i] * dt;
        // Stage system: (M + σK)(x_T, x_F) with b_T = M w + σ(F_T + lift).
        let b_t = sys.mass_apply(&w) + sigma * sys.rhs_cells(ti, sources, bc);
        let (x_t, _) = fact.solve(sys, &b_t, &zero_f);
        slopes.push((x_t - w) / sigma);
    }
    let mut u_next = state.u_cells.clone();
    for (i, ki) in slopes.iter().enumerate() {
        u_next.axpy(dt * tableau.b[i], ki, 1.0);
    }
    State::from_cells(sys, u_next, state.t + dt)
}

/// Parameters of a fixed-step simulation run.
pub struct SimulationSetup<'a> {
    pub system: &'a BlockSystem,
    pub tableau: &'a ButcherTableau,
    pub dt: f64,
    pub t_final: f64,
    pub sources: &'a Sources,
    pub bc: &'a BoundaryValues,
}

/// Runs from `initial` to `t_final` with a fixed step, invoking `observer`
/// after every accepted step (and once on the initial state with step 0).
/// Aborts with an error as soon as non-finite values appear.
pub fn run_simulation(
    setup: &SimulationSetup<'_>,
    initial: State,
    observer: &mut dyn FnMut(usize, &State),
) -> Result<State, TimeError> {
    if setup.dt <= 0.0 {
        return Err(TimeError::NonPositiveStep);
    }
    let sys = setup.system;
    let n_steps = (setup.t_final / setup.dt - 1e-9).ceil().max(0.0) as usize;
    let fact = match setup.tableau.kind {
        TableauKind::DiagonallyImplicit => Some(
            sys.condensed_stage_factorization(setup.tableau.diagonal() * setup.dt)?,
        ),
        TableauKind::Explicit => None,
    };
    let mut state = initial;
    observer(0, &state);
    for step in 1..=n_steps {
        state = match &fact {
            Some(f) => sdirk_step(sys, setup.tableau, f, &state, setup.dt, setup.sources, setup.bc),
            None => erk_step(sys, setup.tableau, &state, setup.dt, setup.sources, setup.bc),
        };
        if !state.is_finite() {
            return Err(TimeError::Diverged { t: state.t });
        }
        observer(step, &state);
    }
    Ok(state)
}
