//! Scaled monomial bases on cells and faces, quadrature rules, and local
//! mass matrices / L² projections.
//!
//! Cell bases are bivariate monomials ((x−x_c)/h_T)^a ((y−y_c)/h_T)^b with
//! a+b ≤ ℓ in graded lexicographic order; face bases are univariate
//! monomials (s/half_length)^j in the arclength coordinate centered at the
//! face midpoint. Polygon quadrature fans the cell into triangles from its
//! barycenter and applies a collapsed (Duffy) tensor Gauss rule on each.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::mesh::{Mesh, Point2};

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("cell is not star-shaped with respect to its barycenter (fan triangle {triangle} has non-positive area)")]
    NotStarShaped { triangle: usize },
    #[error("degenerate face (zero length)")]
    DegenerateFace,
    #[error("singular mass matrix (degenerate geometry)")]
    SingularMass,
}

/// Gauss–Legendre nodes and weights on [−1, 1], computed by Newton iteration
/// on the Legendre polynomial P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-based initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n and P_n' by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = (n as f64) * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// A quadrature rule over a cell (2D points) or a face (points on the
/// segment). Weights carry the measure of the entity.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Quadrature of a scalar function.
    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Quadrature on the triangle (a, b, c), exact for bivariate polynomials up
/// to `exactness` degree, via the collapsed tensor Gauss rule.
pub fn triangle_quadrature(a: Point2, b: Point2, c: Point2, exactness: usize) -> QuadratureRule {
    // On the reference triangle {x,y ≥ 0, x+y ≤ 1} with the Duffy map
    // x = u, y = v(1−u), a degree-d integrand times the Jacobian (1−u) has
    // degree ≤ d+1 in u and ≤ d in v.
    let nu = (exactness + 2).div_ceil(2);
    let nv = (exactness + 1).div_ceil(2);
    let (un, uw) = gauss_legendre(nu);
    let (vn, vw) = gauss_legendre(nv);
    let twice_area = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (iu, &xu) in un.iter().enumerate() {
        let u = 0.5 * (xu + 1.0);
        for (iv, &xv) in vn.iter().enumerate() {
            let v = 0.5 * (xv + 1.0);
            let x = u;
            let y = v * (1.0 - u);
            points.push(Point2::new(
                a.x + x * (b.x - a.x) + y * (c.x - a.x),
                a.y + x * (b.y - a.y) + y * (c.y - a.y),
            ));
            // 0.25: the two [−1,1] → [0,1] rescalings; (1−u): Duffy Jacobian.
            weights.push(0.25 * uw[iu] * vw[iv] * (1.0 - u) * twice_area);
        }
    }
    QuadratureRule { points, weights }
}

/// Quadrature over a polygon, exact up to `exactness` degree: fan
/// triangulation from the barycenter, collapsed Gauss per triangle. Fails if
/// the polygon is not star-shaped with respect to its barycenter.
pub fn polygon_quadrature(
    vertices: &[Point2],
    barycenter: Point2,
    exactness: usize,
) -> Result<QuadratureRule, BasisError> {
    let n = vertices.len();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        let twice_area = (a.x - barycenter.x) * (b.y - barycenter.y)
            - (b.x - barycenter.x) * (a.y - barycenter.y);
        if twice_area == 0.0 {
            // Collinear fan triangle (hanging node aligned with the
            // barycenter ray): contributes no area, skip it.
            continue;
        }
        if twice_area < 0.0 {
            return Err(BasisError::NotStarShaped { triangle: i });
        }
        let rule = triangle_quadrature(barycenter, a, b, exactness);
        points.extend(rule.points);
        weights.extend(rule.weights);
    }
    Ok(QuadratureRule { points, weights })
}

/// Quadrature over cell `cell` of `mesh`, exact up to `exactness` degree.
pub fn cell_quadrature(mesh: &Mesh, cell: usize, exactness: usize) -> Result<QuadratureRule, BasisError> {
    polygon_quadrature(&mesh.cell_vertices(cell), mesh.barycenters[cell], exactness)
}

/// Gauss–Legendre quadrature on the segment (a, b), exact for univariate
/// polynomials up to `exactness` degree (⌈(deg+1)/2⌉ points).
pub fn segment_quadrature(a: Point2, b: Point2, exactness: usize) -> Result<QuadratureRule, BasisError> {
    let len = a.dist(b);
    if len <= 0.0 {
        return Err(BasisError::DegenerateFace);
    }
    let n = (exactness + 1).div_ceil(2);
    let (nodes, ws) = gauss_legendre(n);
    let points = nodes
        .iter()
        .map(|&t| {
            let s = 0.5 * (t + 1.0);
            Point2::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y))
        })
        .collect();
    let weights = ws.iter().map(|&w| 0.5 * w * len).collect();
    Ok(QuadratureRule { points, weights })
}

/// Quadrature over face `face` of `mesh`, exact up to `exactness` degree.
pub fn face_quadrature(mesh: &Mesh, face: usize, exactness: usize) -> Result<QuadratureRule, BasisError> {
    let (a, b) = mesh.face_endpoints(face);
    segment_quadrature(a, b, exactness)
}

/// Scaled monomial basis of P^ℓ on a cell: ((x−x_c)/h)^a ((y−y_c)/h)^b,
/// a+b ≤ ℓ, in graded lexicographic order (within a grade, a decreasing).
#[derive(Debug, Clone)]
pub struct CellBasis {
    pub degree: usize,
    pub center: Point2,
    pub scale: f64,
    exponents: Vec<(u32, u32)>,
}

/// dim P^ℓ(T) = (ℓ+1)(ℓ+2)/2.
pub fn cell_space_dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

impl CellBasis {
    pub fn new(degree: usize, center: Point2, scale: f64) -> Self {
        let mut exponents = Vec::with_capacity(cell_space_dim(degree));
        for g in 0..=degree as u32 {
            for a in (0..=g).rev() {
                exponents.push((a, g - a));
            }
        }
        Self {
            degree,
            center,
            scale,
            exponents,
        }
    }

    /// Basis for cell `cell` of `mesh` (barycenter-centered, h_T-scaled).
    pub fn for_cell(mesh: &Mesh, cell: usize, degree: usize) -> Self {
        Self::new(degree, mesh.barycenters[cell], mesh.h_cells[cell])
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exponents
    }

    /// Values of all basis functions at `p`.
    pub fn eval(&self, p: Point2) -> DVector<f64> {
        let xi = (p.x - self.center.x) / self.scale;
        let eta = (p.y - self.center.y) / self.scale;
        DVector::from_iterator(
            self.dim(),
            self.exponents
                .iter()
                .map(|&(a, b)| xi.powi(a as i32) * eta.powi(b as i32)),
        )
    }

    /// Gradients (∂x, ∂y) of all basis functions at `p`.
    pub fn eval_grad(&self, p: Point2) -> (DVector<f64>, DVector<f64>) {
        let xi = (p.x - self.center.x) / self.scale;
        let eta = (p.y - self.center.y) / self.scale;
        let mut gx = DVector::zeros(self.dim());
        let mut gy = DVector::zeros(self.dim());
        for (i, &(a, b)) in self.exponents.iter().enumerate() {
            if a > 0 {
                gx[i] = a as f64 / self.scale * xi.powi(a as i32 - 1) * eta.powi(b as i32);
            }
            if b > 0 {
                gy[i] = b as f64 / self.scale * xi.powi(a as i32) * eta.powi(b as i32 - 1);
            }
        }
        (gx, gy)
    }

    /// Value table Φ with Φ[(i, q)] = φ_i(x_q) over a quadrature rule.
    pub fn eval_table(&self, quad: &QuadratureRule) -> DMatrix<f64> {
        let mut table = DMatrix::zeros(self.dim(), quad.len());
        for (q, &p) in quad.points.iter().enumerate() {
            table.set_column(q, &self.eval(p));
        }
        table
    }

    /// Gradient tables (∂x table, ∂y table) over a quadrature rule.
    pub fn grad_tables(&self, quad: &QuadratureRule) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut tx = DMatrix::zeros(self.dim(), quad.len());
        let mut ty = DMatrix::zeros(self.dim(), quad.len());
        for (q, &p) in quad.points.iter().enumerate() {
            let (gx, gy) = self.eval_grad(p);
            tx.set_column(q, &gx);
            ty.set_column(q, &gy);
        }
        (tx, ty)
    }
}

/// Scaled monomial basis of P^k on a face: (s/half_length)^j where s is the
/// signed arclength coordinate centered at the midpoint.
#[derive(Debug, Clone)]
pub struct FaceBasis {
    pub degree: usize,
    pub midpoint: Point2,
    pub half_length: f64,
    pub tangent: Point2,
}

impl FaceBasis {
    /// Basis for face `face` of `mesh`.
    pub fn for_face(mesh: &Mesh, face: usize) -> FaceBasisBuilder {
        let f = &mesh.faces[face];
        FaceBasisBuilder {
            midpoint: f.midpoint,
            half_length: 0.5 * f.length,
            tangent: f.tangent(),
        }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    /// Values of all basis functions at the 2D point `p` (assumed on the
    /// face line).
    pub fn eval(&self, p: Point2) -> DVector<f64> {
        let s = ((p.x - self.midpoint.x) * self.tangent.x
            + (p.y - self.midpoint.y) * self.tangent.y)
            / self.half_length;
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|j| s.powi(j as i32)))
    }

    /// Value table over a quadrature rule on the face.
    pub fn eval_table(&self, quad: &QuadratureRule) -> DMatrix<f64> {
        let mut table = DMatrix::zeros(self.dim(), quad.len());
        for (q, &p) in quad.points.iter().enumerate() {
            table.set_column(q, &self.eval(p));
        }
        table
    }
}

/// Geometry-only handle used to make face bases of several degrees.
pub struct FaceBasisBuilder {
    midpoint: Point2,
    half_length: f64,
    tangent: Point2,
}

impl FaceBasisBuilder {
    pub fn degree(&self, degree: usize) -> FaceBasis {
        FaceBasis {
            degree,
            midpoint: self.midpoint,
            half_length: self.half_length,
            tangent: self.tangent,
        }
    }
}

/// Gram (mass) matrix of a basis value table under the quadrature weights:
/// M_ij = Σ_q w_q φ_i(x_q) φ_j(x_q).
pub fn mass_matrix(table: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let n = table.nrows();
    let mut weighted = table.clone();
    for (q, &w) in weights.iter().enumerate() {
        weighted.column_mut(q).scale_mut(w);
    }
    let mut m = &weighted * table.transpose();
    // Symmetrize against roundoff.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// L² projection of a sampled field onto the span of a basis value table:
/// solves M c = b with b_i = Σ_q w_q f(x_q) φ_i(x_q).
pub fn l2_project(
    f: impl Fn(Point2) -> f64,
    table: &DMatrix<f64>,
    quad: &QuadratureRule,
) -> Result<DVector<f64>, BasisError> {
    let m = mass_matrix(table, &quad.weights);
    let mut b = DVector::zeros(table.nrows());
    for (q, &p) in quad.points.iter().enumerate() {
        b.axpy(quad.weights[q] * f(p), &table.column(q).into_owned(), 1.0);
    }
    m.cholesky()
        .map(|ch| ch.solve(&b))
        .ok_or(BasisError::SingularMass)
}

/// Default cell quadrature exactness for face degree k: 2(k+1)+2.
pub fn default_cell_exactness(k: usize) -> usize {
    2 * (k + 1) + 2
}

/// Default face quadrature exactness for face degree k: 2k+2.
pub fn default_face_exactness(k: usize) -> usize {
    2 * k + 2
}
