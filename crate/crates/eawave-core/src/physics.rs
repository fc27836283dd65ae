//! Material data, manufactured solutions, Ricker initial data, discrete
//! energy, and point sensors.
//!
//! Manufactured solutions are built from separable scalar potentials
//! u(x, y, t) = X(x)Y(y)T(t): the fluid fields are p = ∂ₜu, m = ∇u and the
//! solid fields are v = ∂ₜ𝐮, 𝕤 = ℂ∇ₛ𝐮. With unit fluid density and unit
//! solid density the dual equations are satisfied identically, so only the
//! primal equations carry volume sources. Both built-in cases vanish
//! together with their normal derivatives on the interface x = 0 and vanish
//! on the outer boundary, hence they satisfy the transmission conditions
//! and homogeneous Dirichlet data exactly.

use nalgebra::DVector;
use thiserror::Error;

use crate::assembly::{BlockSystem, BoundaryValues, HookeTensor, Sources};
use crate::mesh::{Mesh, Point2, Subdomain};
use crate::polybasis::mass_matrix;

#[derive(Debug, Error)]
pub enum PhysicsError {
    #[error("unknown material set '{0}'")]
    UnknownMaterial(String),
    #[error("unknown manufactured case '{0}'")]
    UnknownCase(String),
    #[error("sensor location {0} is outside the mesh")]
    SensorOutsideMesh(Point2),
}

/// Constant material data of the coupled fluid/solid medium.
#[derive(Debug, Clone, Copy)]
pub struct Materials {
    pub rho_f: f64,
    pub kappa: f64,
    pub rho_s: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Materials {
    /// Builds material data from densities and wave speeds.
    pub fn from_speeds(rho_f: f64, c_p_f: f64, rho_s: f64, c_p_s: f64, c_s_s: f64) -> Self {
        Materials {
            rho_f,
            kappa: rho_f * c_p_f * c_p_f,
            rho_s,
            lambda: rho_s * (c_p_s * c_p_s - 2.0 * c_s_s * c_s_s),
            mu: rho_s * c_s_s * c_s_s,
        }
    }

    pub fn c_p_fluid(&self) -> f64 {
        (self.kappa / self.rho_f).sqrt()
    }

    pub fn c_p_solid(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.rho_s).sqrt()
    }

    pub fn c_s_solid(&self) -> f64 {
        (self.mu / self.rho_s).sqrt()
    }

    pub fn hooke(&self) -> HookeTensor {
        HookeTensor {
            lambda: self.lambda,
            mu: self.mu,
        }
    }
}

/// Named built-in material sets.
pub fn builtin_materials(name: &str) -> Result<Materials, PhysicsError> {
    match name {
        "academic" => Ok(Materials::from_speeds(1.0, 1.0, 1.0, 3.0_f64.sqrt(), 1.0)),
        "granite-water" => Ok(Materials::from_speeds(0.5, 0.5, 1.3, 2.0, 1.0)),
        "granite-air" => Ok(Materials::from_speeds(
            800.0 / 2200.0,
            6.36 / 17.5,
            800.0,
            6.36,
            3.27,
        )),
        "real-granite-water" => Ok(Materials::from_speeds(
            1025.0, 1500.0, 2690.0, 6000.0, 3000.0,
        )),
        other => Err(PhysicsError::UnknownMaterial(other.to_string())),
    }
}

/// Built-in manufactured solutions on the two coupled unit squares
/// (fluid (0,1)², solid (−1,0)×(0,1)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedCase {
    /// u^f = (1−x)x²(1−y)y sin(√2πt), u^s_x = u^s_y = (1+x)x²(1−y)y sin(√2πt).
    PolyInSpace,
    /// u^f = u^s_x = u^s_y = x sin(πx) sin(πy) t².
    PolyInTime,
}

/// Parses a manufactured-case name.
pub fn manufactured_case(name: &str) -> Result<ManufacturedCase, PhysicsError> {
    match name {
        "poly-in-space" => Ok(ManufacturedCase::PolyInSpace),
        "poly-in-time" => Ok(ManufacturedCase::PolyInTime),
        other => Err(PhysicsError::UnknownCase(other.to_string())),
    }
}

/// Value and first two derivatives of a 1D factor.
type Axis = (f64, f64, f64);

impl ManufacturedCase {
    fn fluid_x(self, x: f64) -> Axis {
        match self {
            // (1−x)x² = x² − x³
            ManufacturedCase::PolyInSpace => (
                x * x - x * x * x,
                2.0 * x - 3.0 * x * x,
                2.0 - 6.0 * x,
            ),
            ManufacturedCase::PolyInTime => Self::x_sin_pi_x(x),
        }
    }

    fn solid_x(self, x: f64) -> Axis {
        match self {
            // (1+x)x² = x² + x³
            ManufacturedCase::PolyInSpace => (
                x * x + x * x * x,
                2.0 * x + 3.0 * x * x,
                2.0 + 6.0 * x,
            ),
            ManufacturedCase::PolyInTime => Self::x_sin_pi_x(x),
        }
    }

    fn axis_y(self, y: f64) -> Axis {
        match self {
            // (1−y)y = y − y²
            ManufacturedCase::PolyInSpace => (y - y * y, 1.0 - 2.0 * y, -2.0),
            ManufacturedCase::PolyInTime => {
                let pi = std::f64::consts::PI;
                let (s, c) = (pi * y).sin_cos();
                (s, pi * c, -pi * pi * s)
            }
        }
    }

    fn axis_t(self, t: f64) -> Axis {
        match self {
            ManufacturedCase::PolyInSpace => {
                let w = std::f64::consts::SQRT_2 * std::f64::consts::PI;
                let (s, c) = (w * t).sin_cos();
                (s, w * c, -w * w * s)
            }
            ManufacturedCase::PolyInTime => (t * t, 2.0 * t, 2.0),
        }
    }

    fn x_sin_pi_x(x: f64) -> Axis {
        let pi = std::f64::consts::PI;
        let (s, c) = (pi * x).sin_cos();
        (
            x * s,
            s + pi * x * c,
            2.0 * pi * c - pi * pi * x * s,
        )
    }

    /// Fluid scalar potential u^f.
    pub fn fluid_potential(self, p: Point2, t: f64) -> f64 {
        self.fluid_x(p.x).0 * self.axis_y(p.y).0 * self.axis_t(t).0
    }

    /// Solid displacement potential 𝐮^s (both components share one factor).
    pub fn solid_displacement(self, p: Point2, t: f64) -> (f64, f64) {
        let u = self.solid_x(p.x).0 * self.axis_y(p.y).0 * self.axis_t(t).0;
        (u, u)
    }

    /// Exact pressure p = ∂ₜu^f.
    pub fn pressure(self, p: Point2, t: f64) -> f64 {
        self.fluid_x(p.x).0 * self.axis_y(p.y).0 * self.axis_t(t).1
    }

    /// Exact fluid dual field m = ∇u^f.
    pub fn m_field(self, p: Point2, t: f64) -> (f64, f64) {
        let x = self.fluid_x(p.x);
        let y = self.axis_y(p.y);
        let tt = self.axis_t(t).0;
        (x.1 * y.0 * tt, x.0 * y.1 * tt)
    }

    /// Exact solid velocity v = ∂ₜ𝐮^s.
    pub fn velocity(self, p: Point2, t: f64) -> (f64, f64) {
        let v = self.solid_x(p.x).0 * self.axis_y(p.y).0 * self.axis_t(t).1;
        (v, v)
    }

    /// Exact stress 𝕤 = ℂ∇ₛ𝐮^s as (s_xx, s_yy, s_xy).
    pub fn stress(self, mats: &Materials, p: Point2, t: f64) -> (f64, f64, f64) {
        let x = self.solid_x(p.x);
        let y = self.axis_y(p.y);
        let tt = self.axis_t(t).0;
        let e_xx = x.1 * y.0 * tt;
        let e_yy = x.0 * y.1 * tt;
        let e_xy = 0.5 * (x.0 * y.1 + x.1 * y.0) * tt;
        mats.hooke().apply((e_xx, e_yy, e_xy))
    }

    /// ∂ₜp (for semi-discrete residual checks).
    pub fn pressure_dt(self, p: Point2, t: f64) -> f64 {
        self.fluid_x(p.x).0 * self.axis_y(p.y).0 * self.axis_t(t).2
    }

    /// ∂ₜm.
    pub fn m_field_dt(self, p: Point2, t: f64) -> (f64, f64) {
        let x = self.fluid_x(p.x);
        let y = self.axis_y(p.y);
        let dt = self.axis_t(t).1;
        (x.1 * y.0 * dt, x.0 * y.1 * dt)
    }

    /// ∂ₜv.
    pub fn velocity_dt(self, p: Point2, t: f64) -> (f64, f64) {
        let a = self.solid_x(p.x).0 * self.axis_y(p.y).0 * self.axis_t(t).2;
        (a, a)
    }

    /// ∂ₜ𝕤.
    pub fn stress_dt(self, mats: &Materials, p: Point2, t: f64) -> (f64, f64, f64) {
        let x = self.solid_x(p.x);
        let y = self.axis_y(p.y);
        let dt = self.axis_t(t).1;
        let e_xx = x.1 * y.0 * dt;
        let e_yy = x.0 * y.1 * dt;
        let e_xy = 0.5 * (x.0 * y.1 + x.1 * y.0) * dt;
        mats.hooke().apply((e_xx, e_yy, e_xy))
    }

    /// Fluid volume source f^f = κ⁻¹∂ₜp − ∇·m.
    pub fn source_fluid(self, mats: &Materials, p: Point2, t: f64) -> f64 {
        let x = self.fluid_x(p.x);
        let y = self.axis_y(p.y);
        let tt = self.axis_t(t);
        x.0 * y.0 * tt.2 / mats.kappa - (x.2 * y.0 + x.0 * y.2) * tt.0
    }

    /// Solid volume source 𝐟^s = ρ^s∂ₜ𝐯 − ∇·𝕤.
    pub fn source_solid(self, mats: &Materials, p: Point2, t: f64) -> (f64, f64) {
        let x = self.solid_x(p.x);
        let y = self.axis_y(p.y);
        let tt = self.axis_t(t);
        let (l, m) = (mats.lambda, mats.mu);
        let inertial = mats.rho_s * x.0 * y.0 * tt.2;
        // With u_x = u_y = X(x)Y(y)T(t):
        // (∇·𝕤)_x = (λ+2μ)X''Y T + (λ+μ)X'Y' T + μXY'' T, and symmetrically.
        let div_x = ((l + 2.0 * m) * x.2 * y.0 + (l + m) * x.1 * y.1 + m * x.0 * y.2) * tt.0;
        let div_y = ((l + 2.0 * m) * x.0 * y.2 + (l + m) * x.1 * y.1 + m * x.2 * y.0) * tt.0;
        (inertial - div_x, inertial - div_y)
    }

    /// Volume sources in the form consumed by the assembler.
    pub fn sources(self, mats: &Materials) -> Sources {
        let m = *mats;
        Sources {
            fluid: Box::new(move |p, t| self.source_fluid(&m, p, t)),
            solid: Box::new(move |p, t| self.source_solid(&m, p, t)),
        }
    }

    /// Dirichlet data: exact pressure / exact velocity traces.
    pub fn boundary_values(self) -> BoundaryValues {
        BoundaryValues {
            fluid: Box::new(move |p, t| self.pressure(p, t)),
            solid: Box::new(move |p, t| self.velocity(p, t)),
        }
    }
}

/// Ricker-type localized initial datum for the fluid dual field.
#[derive(Debug, Clone, Copy)]
pub struct RickerConfig {
    pub theta: f64,
    pub f_c: f64,
    pub center: Point2,
    /// Spatial width Λ; defaults to c_p^f / f_c when None.
    pub lambda_override: Option<f64>,
}

impl RickerConfig {
    pub fn new(center: Point2) -> Self {
        RickerConfig {
            theta: 10.0,
            f_c: 10.0,
            center,
            lambda_override: None,
        }
    }

    pub fn width(&self, mats: &Materials) -> f64 {
        self.lambda_override.unwrap_or(mats.c_p_fluid() / self.f_c)
    }

    /// m₀(x) = θ exp(−π²r²/Λ²) (x − x_c).
    pub fn m0(&self, mats: &Materials, p: Point2) -> (f64, f64) {
        let lam = self.width(mats);
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let r2 = dx * dx + dy * dy;
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let a = self.theta * (-pi2 * r2 / (lam * lam)).exp();
        (a * dx, a * dy)
    }
}

/// Cell-dof vector obtained by L²-projecting the Ricker m₀ onto the fluid
/// dual space; all other fields start from rest.
pub fn ricker_initial(sys: &BlockSystem, cfg: &RickerConfig) -> DVector<f64> {
    let mats = sys.materials;
    project_fields(
        sys,
        &|p| {
            let m = cfg.m0(&mats, p);
            ExactFields {
                p: 0.0,
                m,
                v: (0.0, 0.0),
                s: (0.0, 0.0, 0.0),
            }
        },
    )
}

/// Pointwise exact fields used for projection and error measurement.
pub struct ExactFields {
    pub p: f64,
    pub m: (f64, f64),
    pub v: (f64, f64),
    pub s: (f64, f64, f64),
}

/// L²-projects exact fields cellwise onto the discrete spaces (dual fields
/// onto P^k, primal fields onto the cell space P^{k'}).
pub fn project_fields(
    sys: &BlockSystem,
    fields: &dyn Fn(Point2) -> ExactFields,
) -> DVector<f64> {
    let mut u = DVector::zeros(sys.n_cell_dofs());
    for cb in &sys.cells {
        let nd = cb.dual_table.nrows();
        let nc = cb.primal_table.nrows();
        let md = mass_matrix(&cb.dual_table, &cb.quad.weights)
            .cholesky()
            .expect("dual mass is SPD");
        let mc = mass_matrix(&cb.primal_table, &cb.quad.weights)
            .cholesky()
            .expect("cell mass is SPD");
        let vals: Vec<ExactFields> = cb.quad.points.iter().map(|&p| fields(p)).collect();
        let dual_moment = |extract: &dyn Fn(&ExactFields) -> f64| -> DVector<f64> {
            let mut b = DVector::zeros(nd);
            for (q, v) in vals.iter().enumerate() {
                b.axpy(
                    cb.quad.weights[q] * extract(v),
                    &cb.dual_table.column(q).into_owned(),
                    1.0,
                );
            }
            md.solve(&b)
        };
        let primal_moment = |extract: &dyn Fn(&ExactFields) -> f64| -> DVector<f64> {
            let mut b = DVector::zeros(nc);
            for (q, v) in vals.iter().enumerate() {
                b.axpy(
                    cb.quad.weights[q] * extract(v),
                    &cb.primal_table.column(q).into_owned(),
                    1.0,
                );
            }
            mc.solve(&b)
        };
        match cb.subdomain {
            Subdomain::Fluid => {
                let mx = dual_moment(&|v| v.m.0);
                let my = dual_moment(&|v| v.m.1);
                let pp = primal_moment(&|v| v.p);
                for i in 0..nd {
                    u[cb.global[i]] = mx[i];
                    u[cb.global[nd + i]] = my[i];
                }
                for i in 0..nc {
                    u[cb.global[2 * nd + i]] = pp[i];
                }
            }
            Subdomain::Solid => {
                let sq2 = std::f64::consts::SQRT_2;
                let sxx = dual_moment(&|v| v.s.0);
                let syy = dual_moment(&|v| v.s.1);
                let sxy = dual_moment(&|v| sq2 * v.s.2);
                let vx = primal_moment(&|v| v.v.0);
                let vy = primal_moment(&|v| v.v.1);
                for i in 0..nd {
                    u[cb.global[i]] = sxx[i];
                    u[cb.global[nd + i]] = syy[i];
                    u[cb.global[2 * nd + i]] = sxy[i];
                }
                for i in 0..nc {
                    u[cb.global[3 * nd + i]] = vx[i];
                    u[cb.global[3 * nd + nc + i]] = vy[i];
                }
            }
        }
    }
    u
}

/// Projects the exact manufactured state at time `t` onto the cell dofs.
pub fn exact_state(sys: &BlockSystem, case: ManufacturedCase, t: f64) -> DVector<f64> {
    let mats = sys.materials;
    project_fields(sys, &|p| ExactFields {
        p: case.pressure(p, t),
        m: case.m_field(p, t),
        v: case.velocity(p, t),
        s: case.stress(&mats, p, t),
    })
}

/// Projects the time derivative of the exact manufactured state at time `t`.
pub fn exact_state_dt(sys: &BlockSystem, case: ManufacturedCase, t: f64) -> DVector<f64> {
    let mats = sys.materials;
    project_fields(sys, &|p| ExactFields {
        p: case.pressure_dt(p, t),
        m: case.m_field_dt(p, t),
        v: case.velocity_dt(p, t),
        s: case.stress_dt(&mats, p, t),
    })
}

/// Projects the exact pressure/velocity traces onto the unknown face dofs.
pub fn exact_faces(
    mesh: &Mesh,
    sys: &BlockSystem,
    case: ManufacturedCase,
    t: f64,
) -> DVector<f64> {
    let k = sys.setting.k;
    let nf = k + 1;
    let mut u_f = DVector::zeros(sys.n_face_dofs());
    for f in 0..mesh.n_faces() {
        let has_p = sys.dofs.face_p[f].is_some();
        let has_v = sys.dofs.face_v[f].is_some();
        if !has_p && !has_v {
            continue;
        }
        let quad = crate::polybasis::face_quadrature(
            mesh,
            f,
            crate::polybasis::default_face_exactness(k),
        )
        .expect("face quadrature");
        let basis = crate::polybasis::FaceBasis::for_face(mesh, f).degree(k);
        let table = basis.eval_table(&quad);
        if let Some(r) = &sys.dofs.face_p[f] {
            let coeffs =
                crate::polybasis::l2_project(|p| case.pressure(p, t), &table, &quad).unwrap();
            for i in 0..nf {
                u_f[r.start + i] = coeffs[i];
            }
        }
        if let Some(r) = &sys.dofs.face_v[f] {
            let cx =
                crate::polybasis::l2_project(|p| case.velocity(p, t).0, &table, &quad).unwrap();
            let cy =
                crate::polybasis::l2_project(|p| case.velocity(p, t).1, &table, &quad).unwrap();
            for i in 0..nf {
                u_f[r.start + i] = cx[i];
                u_f[r.start + nf + i] = cy[i];
            }
        }
    }
    u_f
}

/// L² errors of the discrete cell fields against the exact solution.
#[derive(Debug, Clone, Copy)]
pub struct FieldErrors {
    pub p: f64,
    pub m: f64,
    pub v: f64,
    pub s: f64,
}

impl FieldErrors {
    /// Euclidean combination of all four field errors.
    pub fn total(&self) -> f64 {
        (self.p * self.p + self.m * self.m + self.v * self.v + self.s * self.s).sqrt()
    }
}

/// Measures L² errors of the cell unknowns at time `t`.
pub fn l2_errors(
    sys: &BlockSystem,
    u_t: &DVector<f64>,
    case: ManufacturedCase,
    t: f64,
) -> FieldErrors {
    let mats = sys.materials;
    let sq2 = std::f64::consts::SQRT_2;
    let (mut ep, mut em, mut ev, mut es) = (0.0, 0.0, 0.0, 0.0);
    for cb in &sys.cells {
        let nd = cb.dual_table.nrows();
        let nc = cb.primal_table.nrows();
        let local = sys.cell_local(u_t, cb.cell);
        for (q, &p) in cb.quad.points.iter().enumerate() {
            let w = cb.quad.weights[q];
            let dual_col = cb.dual_table.column(q);
            let primal_col = cb.primal_table.column(q);
            match cb.subdomain {
                Subdomain::Fluid => {
                    let mut mh = (0.0, 0.0);
                    let mut ph = 0.0;
                    for i in 0..nd {
                        mh.0 += local[i] * dual_col[i];
                        mh.1 += local[nd + i] * dual_col[i];
                    }
                    for i in 0..nc {
                        ph += local[2 * nd + i] * primal_col[i];
                    }
                    let me = case.m_field(p, t);
                    let pe = case.pressure(p, t);
                    em += w * ((mh.0 - me.0).powi(2) + (mh.1 - me.1).powi(2));
                    ep += w * (ph - pe).powi(2);
                }
                Subdomain::Solid => {
                    let mut sh = (0.0, 0.0, 0.0);
                    let mut vh = (0.0, 0.0);
                    for i in 0..nd {
                        sh.0 += local[i] * dual_col[i];
                        sh.1 += local[nd + i] * dual_col[i];
                        sh.2 += local[2 * nd + i] * dual_col[i];
                    }
                    for i in 0..nc {
                        vh.0 += local[3 * nd + i] * primal_col[i];
                        vh.1 += local[3 * nd + nc + i] * primal_col[i];
                    }
                    let se = case.stress(&mats, p, t);
                    let ve = case.velocity(p, t);
                    // The third stored coordinate is √2·s_xy.
                    es += w
                        * ((sh.0 - se.0).powi(2)
                            + (sh.1 - se.1).powi(2)
                            + (sh.2 - sq2 * se.2).powi(2));
                    ev += w * ((vh.0 - ve.0).powi(2) + (vh.1 - ve.1).powi(2));
                }
            }
        }
    }
    FieldErrors {
        p: ep.sqrt(),
        m: em.sqrt(),
        v: ev.sqrt(),
        s: es.sqrt(),
    }
}

/// Discrete energies (E_fluid, E_solid): ½‖m‖²_ρf + ½‖p‖²_{κ⁻¹} and
/// ½‖v‖²_ρs + ½‖𝕤‖²_{ℂ⁻¹}, computed from the weighted mass blocks.
pub fn discrete_energy(sys: &BlockSystem, u_t: &DVector<f64>) -> (f64, f64) {
    let mut e_f = 0.0;
    let mut e_s = 0.0;
    for cb in &sys.cells {
        let local = sys.cell_local(u_t, cb.cell);
        let e = 0.5 * local.dot(&(&cb.mass * &local));
        match cb.subdomain {
            Subdomain::Fluid => e_f += e,
            Subdomain::Solid => e_s += e,
        }
    }
    (e_f, e_s)
}

/// A point probe attached to the cell containing it.
#[derive(Debug, Clone, Copy)]
pub struct Sensor {
    pub location: Point2,
    pub cell: usize,
    pub subdomain: Subdomain,
}

impl Sensor {
    pub fn locate(
        mesh: &Mesh,
        location: Point2,
        subdomain: Subdomain,
    ) -> Result<Self, PhysicsError> {
        let cell = mesh
            .locate(location, subdomain)
            .ok_or(PhysicsError::SensorOutsideMesh(location))?;
        Ok(Sensor {
            location,
            cell,
            subdomain,
        })
    }
}

/// A sensor reading: pressure in the fluid, velocity in the solid.
#[derive(Debug, Clone, Copy)]
pub enum SensorSample {
    Pressure(f64),
    Velocity(f64, f64),
}

/// Evaluates the primal cell polynomial of the sensor's cell at its location.
pub fn sample_sensor(sys: &BlockSystem, u_t: &DVector<f64>, sensor: &Sensor) -> SensorSample {
    let cb = &sys.cells[sensor.cell];
    let local = sys.cell_local(u_t, sensor.cell);
    let basis = cb.primal_basis.eval(sensor.location);
    let nd = cb.dual_table.nrows();
    let nc = cb.primal_table.nrows();
    match cb.subdomain {
        Subdomain::Fluid => {
            let mut p = 0.0;
            for i in 0..nc {
                p += local[2 * nd + i] * basis[i];
            }
            SensorSample::Pressure(p)
        }
        Subdomain::Solid => {
            let (mut vx, mut vy) = (0.0, 0.0);
            for i in 0..nc {
                vx += local[3 * nd + i] * basis[i];
                vy += local[3 * nd + nc + i] * basis[i];
            }
            SensorSample::Velocity(vx, vy)
        }
    }
}
