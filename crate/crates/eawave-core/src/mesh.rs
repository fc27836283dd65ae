//! Polytopal 2D meshes fitting the fluid/solid partition.
//!
//! Cells are simple polygons stored as counterclockwise vertex loops and
//! tagged with the subdomain they belong to; faces are straight segments
//! derived from the cell loops and classified as interior (fluid or solid),
//! interface, or boundary (fluid or solid). Interface faces store their unit
//! normal pointing from the solid into the fluid subdomain.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// A point (or free vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Self) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Subdomain a cell belongs to: acoustic fluid or elastic solid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subdomain {
    Fluid,
    Solid,
}

/// Classification of a mesh face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceClass {
    /// Shared by two fluid cells.
    InteriorFluid,
    /// Shared by two solid cells.
    InteriorSolid,
    /// Shared by one fluid and one solid cell (lies on Γ).
    Interface,
    /// Outer boundary of the fluid subdomain.
    BoundaryFluid,
    /// Outer boundary of the solid subdomain.
    BoundarySolid,
}

impl FaceClass {
    /// True for outer-boundary faces (Dirichlet in all experiments).
    pub fn is_boundary(self) -> bool {
        matches!(self, FaceClass::BoundaryFluid | FaceClass::BoundarySolid)
    }

    /// True when the face carries a scalar fluid unknown (fluid side exists).
    pub fn has_fluid_side(self) -> bool {
        !matches!(self, FaceClass::InteriorSolid | FaceClass::BoundarySolid)
    }

    /// True when the face carries a vector solid unknown (solid side exists).
    pub fn has_solid_side(self) -> bool {
        !matches!(self, FaceClass::InteriorFluid | FaceClass::BoundaryFluid)
    }
}

/// A polygonal cell: CCW vertex loop, subdomain tag, incident faces.
///
/// `face_ids[i]` is the face joining `vertex_ids[i]` to `vertex_ids[i+1]`
/// (cyclically).
#[derive(Debug, Clone)]
pub struct Cell {
    pub vertex_ids: Vec<usize>,
    pub subdomain: Subdomain,
    pub face_ids: Vec<usize>,
}

/// A straight face between two vertices.
///
/// `cells[0]` is the owner; the stored `normal` points out of the owner. For
/// interface faces the owner is always the solid cell, so `normal` equals
/// n_Γ (pointing solid → fluid). Boundary faces have `cells[1] = None`.
#[derive(Debug, Clone)]
pub struct Face {
    pub vertex_ids: [usize; 2],
    pub class: FaceClass,
    pub cells: [Option<usize>; 2],
    pub midpoint: Point2,
    pub length: f64,
    pub normal: Point2,
}

impl Face {
    /// Unit tangent along the face (from vertex 0 to vertex 1 of the face,
    /// i.e. the stored normal rotated by +90°).
    pub fn tangent(&self) -> Point2 {
        Point2::new(-self.normal.y, self.normal.x)
    }
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh has no cells")]
    Empty,
    #[error("cell {0} is degenerate (fewer than 3 vertices or zero area)")]
    DegenerateCell(usize),
    #[error("cell {0} is not counterclockwise")]
    NotCounterClockwise(usize),
    #[error("cell {cell} references invalid vertex {vertex}")]
    InvalidVertex { cell: usize, vertex: usize },
    #[error("edge ({0}, {1}) is shared by more than two cells")]
    NonManifoldEdge(usize, usize),
    #[error("edge ({0}, {1}) is traversed in the same direction by both cells (inconsistent orientation)")]
    InconsistentOrientation(usize, usize),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("subdomain rectangles do not share exactly one full edge")]
    NotAdjacent,
    #[error("rectangle extent {extent} is not an integer multiple of h = {h}")]
    ExtentNotDivisible { extent: f64, h: f64 },
    #[error("mesh parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("face {face} is not adjacent to cell {cell}")]
    FaceNotAdjacent { face: usize, cell: usize },
    #[error("mesh has an empty {0:?} subdomain")]
    EmptySubdomain(Subdomain),
}

/// An axis-aligned rectangle, used to describe the two subdomains.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
}

/// The coupled two-rectangle geometry: a fluid rectangle and a solid
/// rectangle sharing one full edge (the interface Γ, vertical or horizontal).
#[derive(Debug, Clone, Copy)]
pub struct CoupledRectangles {
    pub fluid: Rect,
    pub solid: Rect,
}

impl CoupledRectangles {
    /// The manufactured-solution geometry: Ω^f = (0,1)², Ω^s = (−1,0)×(0,1),
    /// vertical interface at x = 0.
    pub fn unit_squares() -> Self {
        Self {
            fluid: Rect::new(0.0, 1.0, 0.0, 1.0),
            solid: Rect::new(-1.0, 0.0, 0.0, 1.0),
        }
    }

    /// The wavelet geometry: fluid layer on top of a solid layer, horizontal
    /// interface at y = 0; each layer is `width × depth`.
    pub fn layered(width: f64, fluid_depth: f64, solid_depth: f64) -> Self {
        Self {
            fluid: Rect::new(0.0, width, 0.0, fluid_depth),
            solid: Rect::new(0.0, width, -solid_depth, 0.0),
        }
    }
}

/// Which full edge the two rectangles share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InterfaceOrientation {
    /// Γ is vertical (rectangles side by side).
    Vertical,
    /// Γ is horizontal (rectangles stacked).
    Horizontal,
}

const GEOM_TOL: f64 = 1e-12;

fn detect_interface(geom: &CoupledRectangles) -> Result<InterfaceOrientation, MeshError> {
    let f = &geom.fluid;
    let s = &geom.solid;
    let same = |a: f64, b: f64| (a - b).abs() <= GEOM_TOL * (1.0 + a.abs().max(b.abs()));
    let vertical = (same(f.x0, s.x1) || same(f.x1, s.x0)) && same(f.y0, s.y0) && same(f.y1, s.y1);
    let horizontal = (same(f.y0, s.y1) || same(f.y1, s.y0)) && same(f.x0, s.x0) && same(f.x1, s.x1);
    match (vertical, horizontal) {
        (true, false) => Ok(InterfaceOrientation::Vertical),
        (false, true) => Ok(InterfaceOrientation::Horizontal),
        _ => Err(MeshError::NotAdjacent),
    }
}

/// A conforming polytopal mesh of the coupled fluid/solid domain.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub points: Vec<Point2>,
    pub cells: Vec<Cell>,
    pub faces: Vec<Face>,
    /// ℓ_Ω: diameter of the bounding box of the whole domain.
    pub domain_diameter: f64,
    /// Per-cell diameter h_T (max pairwise vertex distance).
    pub h_cells: Vec<f64>,
    /// Per-cell barycenter (area centroid).
    pub barycenters: Vec<Point2>,
    /// Per-cell area (shoelace).
    pub areas: Vec<f64>,
}

impl Mesh {
    /// Builds a mesh from a point list and per-cell (subdomain, CCW vertex
    /// loop) specifications. Faces are derived and classified.
    pub fn from_cells(
        points: Vec<Point2>,
        cell_specs: Vec<(Subdomain, Vec<usize>)>,
    ) -> Result<Self, MeshError> {
        if cell_specs.is_empty() {
            return Err(MeshError::Empty);
        }
        for (ci, (_, loop_ids)) in cell_specs.iter().enumerate() {
            if loop_ids.len() < 3 {
                return Err(MeshError::DegenerateCell(ci));
            }
            for &v in loop_ids {
                if v >= points.len() {
                    return Err(MeshError::InvalidVertex { cell: ci, vertex: v });
                }
            }
        }

        // Signed areas and centroids; reject degenerate or clockwise loops.
        let mut areas = Vec::with_capacity(cell_specs.len());
        let mut barycenters = Vec::with_capacity(cell_specs.len());
        let mut h_cells = Vec::with_capacity(cell_specs.len());
        for (ci, (_, loop_ids)) in cell_specs.iter().enumerate() {
            let n = loop_ids.len();
            let mut twice_area = 0.0;
            let mut cx = 0.0;
            let mut cy = 0.0;
            for i in 0..n {
                let a = points[loop_ids[i]];
                let b = points[loop_ids[(i + 1) % n]];
                let cross = a.x * b.y - b.x * a.y;
                twice_area += cross;
                cx += (a.x + b.x) * cross;
                cy += (a.y + b.y) * cross;
            }
            let area = 0.5 * twice_area;
            let mut h = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    h = h.max(points[loop_ids[i]].dist(points[loop_ids[j]]));
                }
            }
            if area.abs() <= 1e-14 * h * h || h == 0.0 {
                return Err(MeshError::DegenerateCell(ci));
            }
            if area < 0.0 {
                return Err(MeshError::NotCounterClockwise(ci));
            }
            areas.push(area);
            barycenters.push(Point2::new(cx / (6.0 * area), cy / (6.0 * area)));
            h_cells.push(h);
        }

        // Derive faces from cell edges. Key: sorted vertex pair.
        // For manifold conformity each edge appears in at most two cells and,
        // when shared, is traversed in opposite directions.
        struct EdgeUse {
            cell: usize,
            local: usize,
            forward: bool, // traversed from min-vertex to max-vertex
        }
        let mut edge_map: HashMap<(usize, usize), Vec<EdgeUse>> = HashMap::new();
        let mut edge_order: Vec<(usize, usize)> = Vec::new();
        for (ci, (_, loop_ids)) in cell_specs.iter().enumerate() {
            let n = loop_ids.len();
            for i in 0..n {
                let a = loop_ids[i];
                let b = loop_ids[(i + 1) % n];
                if a == b {
                    return Err(MeshError::DegenerateCell(ci));
                }
                let key = (a.min(b), a.max(b));
                let entry = edge_map.entry(key).or_insert_with(|| {
                    edge_order.push(key);
                    Vec::new()
                });
                entry.push(EdgeUse { cell: ci, local: i, forward: a < b });
            }
        }

        let mut cells: Vec<Cell> = cell_specs
            .iter()
            .map(|(sd, loop_ids)| Cell {
                vertex_ids: loop_ids.clone(),
                subdomain: *sd,
                face_ids: vec![usize::MAX; loop_ids.len()],
            })
            .collect();

        let mut faces = Vec::with_capacity(edge_order.len());
        for key in &edge_order {
            let uses = &edge_map[key];
            if uses.len() > 2 {
                return Err(MeshError::NonManifoldEdge(key.0, key.1));
            }
            if uses.len() == 2 && uses[0].forward == uses[1].forward {
                return Err(MeshError::InconsistentOrientation(key.0, key.1));
            }
            let (class, owner, other) = match uses.len() {
                1 => {
                    let c = uses[0].cell;
                    let class = match cell_specs[c].0 {
                        Subdomain::Fluid => FaceClass::BoundaryFluid,
                        Subdomain::Solid => FaceClass::BoundarySolid,
                    };
                    (class, c, None)
                }
                _ => {
                    let (c0, c1) = (uses[0].cell, uses[1].cell);
                    match (cell_specs[c0].0, cell_specs[c1].0) {
                        (Subdomain::Fluid, Subdomain::Fluid) => {
                            (FaceClass::InteriorFluid, c0.min(c1), Some(c0.max(c1)))
                        }
                        (Subdomain::Solid, Subdomain::Solid) => {
                            (FaceClass::InteriorSolid, c0.min(c1), Some(c0.max(c1)))
                        }
                        (Subdomain::Solid, Subdomain::Fluid) => {
                            (FaceClass::Interface, c0, Some(c1))
                        }
                        (Subdomain::Fluid, Subdomain::Solid) => {
                            (FaceClass::Interface, c1, Some(c0))
                        }
                    }
                }
            };
            // Orient the face so its stored normal points out of the owner:
            // take the owner's traversal direction (a→b CCW in the owner) and
            // rotate by −90° to get the outward normal.
            let owner_use = uses.iter().find(|u| u.cell == owner).expect("owner use");
            let loop_ids = &cell_specs[owner].1;
            let n_loop = loop_ids.len();
            let va = loop_ids[owner_use.local];
            let vb = loop_ids[(owner_use.local + 1) % n_loop];
            let pa = points[va];
            let pb = points[vb];
            let len = pa.dist(pb);
            if len <= 0.0 {
                return Err(MeshError::DegenerateCell(owner));
            }
            let normal = Point2::new((pb.y - pa.y) / len, -(pb.x - pa.x) / len);
            let face_id = faces.len();
            faces.push(Face {
                vertex_ids: [va, vb],
                class,
                cells: [Some(owner), other],
                midpoint: Point2::new(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)),
                length: len,
                normal,
            });
            for u in uses {
                cells[u.cell].face_ids[u.local] = face_id;
            }
        }

        // Bounding-box diameter of the whole domain.
        let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in &cells {
            for &v in &c.vertex_ids {
                xmin = xmin.min(points[v].x);
                xmax = xmax.max(points[v].x);
                ymin = ymin.min(points[v].y);
                ymax = ymax.max(points[v].y);
            }
        }
        let domain_diameter = ((xmax - xmin).powi(2) + (ymax - ymin).powi(2)).sqrt();

        Ok(Mesh {
            points,
            cells,
            faces,
            domain_diameter,
            h_cells,
            barycenters,
            areas,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Normalized cell diameter h̃_T = h_T / ℓ_Ω.
    pub fn h_tilde(&self, cell: usize) -> f64 {
        self.h_cells[cell] / self.domain_diameter
    }

    /// Largest cell diameter (the mesh size h).
    pub fn h_max(&self) -> f64 {
        self.h_cells.iter().cloned().fold(0.0, f64::max)
    }

    /// Face midpoint, length and the unit normal pointing out of `cell`.
    pub fn face_geometry(&self, face: usize, cell: usize) -> Result<(Point2, f64, Point2), MeshError> {
        let f = &self.faces[face];
        let n = if f.cells[0] == Some(cell) {
            f.normal
        } else if f.cells[1] == Some(cell) {
            Point2::new(-f.normal.x, -f.normal.y)
        } else {
            return Err(MeshError::FaceNotAdjacent { face, cell });
        };
        Ok((f.midpoint, f.length, n))
    }

    /// The two endpoints of a face.
    pub fn face_endpoints(&self, face: usize) -> (Point2, Point2) {
        let f = &self.faces[face];
        (self.points[f.vertex_ids[0]], self.points[f.vertex_ids[1]])
    }

    /// Vertices of a cell as points, in CCW order.
    pub fn cell_vertices(&self, cell: usize) -> Vec<Point2> {
        self.cells[cell]
            .vertex_ids
            .iter()
            .map(|&v| self.points[v])
            .collect()
    }

    /// Whether point `p` lies inside (or on the boundary of) cell `c`.
    pub fn cell_contains(&self, cell: usize, p: Point2) -> bool {
        // Ray casting with an on-boundary tolerance: points within 1e-12·h of
        // an edge count as inside.
        let verts = &self.cells[cell].vertex_ids;
        let n = verts.len();
        let tol = 1e-12 * self.h_cells[cell];
        let mut inside = false;
        for i in 0..n {
            let a = self.points[verts[i]];
            let b = self.points[verts[(i + 1) % n]];
            // Distance from p to segment ab.
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len2 = dx * dx + dy * dy;
            let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
            let proj = Point2::new(a.x + t * dx, a.y + t * dy);
            if p.dist(proj) <= tol {
                return true;
            }
            if (a.y > p.y) != (b.y > p.y) {
                let x_int = a.x + (p.y - a.y) * dx / dy;
                if p.x < x_int {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Finds the lowest-id cell of the given subdomain containing `p`.
    pub fn locate(&self, p: Point2, subdomain: Subdomain) -> Option<usize> {
        (0..self.n_cells())
            .find(|&c| self.cells[c].subdomain == subdomain && self.cell_contains(c, p))
    }

    /// Number of cells in each subdomain (fluid, solid).
    pub fn subdomain_counts(&self) -> (usize, usize) {
        let nf = self
            .cells
            .iter()
            .filter(|c| c.subdomain == Subdomain::Fluid)
            .count();
        (nf, self.cells.len() - nf)
    }
}

/// Grid of points over one rectangle; coordinates computed parametrically so
/// that shared-edge coordinates match bit-for-bit between the two rectangles.
struct RectGrid {
    nx: usize,
    ny: usize,
    rect: Rect,
}

impl RectGrid {
    fn coord(&self, i: usize, j: usize) -> Point2 {
        let tx = i as f64 / self.nx as f64;
        let ty = j as f64 / self.ny as f64;
        Point2::new(
            self.rect.x0 * (1.0 - tx) + self.rect.x1 * tx,
            self.rect.y0 * (1.0 - ty) + self.rect.y1 * ty,
        )
    }
}

fn subdivisions(extent: f64, h: f64) -> Result<usize, MeshError> {
    if extent <= 0.0 {
        return Err(MeshError::DegenerateGeometry(format!(
            "non-positive rectangle extent {extent}"
        )));
    }
    let n = (extent / h).round();
    if n < 1.0 || ((n * h - extent).abs() > 1e-9 * extent) {
        return Err(MeshError::ExtentNotDivisible { extent, h });
    }
    Ok(n as usize)
}

/// Quantized coordinate key for exact-ish vertex deduplication.
fn vertex_key(p: Point2) -> (i64, i64) {
    ((p.x * 1e12).round() as i64, (p.y * 1e12).round() as i64)
}

struct VertexPool {
    points: Vec<Point2>,
    index: HashMap<(i64, i64), usize>,
}

impl VertexPool {
    fn new() -> Self {
        Self {
            points: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn insert(&mut self, p: Point2) -> usize {
        *self.index.entry(vertex_key(p)).or_insert_with(|| {
            self.points.push(p);
            self.points.len() - 1
        })
    }
}

fn grid_sizes(geom: &CoupledRectangles, level: u32) -> Result<(RectGrid, RectGrid), MeshError> {
    detect_interface(geom)?;
    let h = 0.5f64.powi(level as i32);
    let make = |rect: Rect| -> Result<RectGrid, MeshError> {
        Ok(RectGrid {
            nx: subdivisions(rect.width(), h)?,
            ny: subdivisions(rect.height(), h)?,
            rect,
        })
    };
    Ok((make(geom.fluid)?, make(geom.solid)?))
}

/// Builds a uniform quadrilateral mesh with h = 2^{−level} on the coupled
/// two-rectangle geometry. Both rectangle extents must be integer multiples
/// of h.
pub fn build_cartesian_mesh(level: u32, geom: &CoupledRectangles) -> Result<Mesh, MeshError> {
    let (fg, sg) = grid_sizes(geom, level)?;
    let mut pool = VertexPool::new();
    let mut cell_specs = Vec::new();
    for (grid, sd) in [(&fg, Subdomain::Fluid), (&sg, Subdomain::Solid)] {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let loop_ids = vec![
                    pool.insert(grid.coord(i, j)),
                    pool.insert(grid.coord(i + 1, j)),
                    pool.insert(grid.coord(i + 1, j + 1)),
                    pool.insert(grid.coord(i, j + 1)),
                ];
                cell_specs.push((sd, loop_ids));
            }
        }
    }
    Mesh::from_cells(pool.points, cell_specs)
}

/// Builds a uniform quadrilateral mesh with h = 2^{−level} over a single
/// rectangle with one material tag (used by the pure acoustic / pure elastic
/// spectral sweeps).
pub fn build_cartesian_single(level: u32, rect: Rect, sd: Subdomain) -> Result<Mesh, MeshError> {
    let h = 0.5f64.powi(level as i32);
    let grid = RectGrid {
        nx: subdivisions(rect.width(), h)?,
        ny: subdivisions(rect.height(), h)?,
        rect,
    };
    let mut pool = VertexPool::new();
    let mut cell_specs = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let loop_ids = vec![
                pool.insert(grid.coord(i, j)),
                pool.insert(grid.coord(i + 1, j)),
                pool.insert(grid.coord(i + 1, j + 1)),
                pool.insert(grid.coord(i, j + 1)),
            ];
            cell_specs.push((sd, loop_ids));
        }
    }
    Mesh::from_cells(pool.points, cell_specs)
}

/// Builds a triangulated mesh: the Cartesian grid with every quadrilateral
/// split along the diagonal from its lower-left to upper-right corner.
pub fn build_triangulated_mesh(level: u32, geom: &CoupledRectangles) -> Result<Mesh, MeshError> {
    let (fg, sg) = grid_sizes(geom, level)?;
    let mut pool = VertexPool::new();
    let mut cell_specs = Vec::new();
    for (grid, sd) in [(&fg, Subdomain::Fluid), (&sg, Subdomain::Solid)] {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let p00 = pool.insert(grid.coord(i, j));
                let p10 = pool.insert(grid.coord(i + 1, j));
                let p11 = pool.insert(grid.coord(i + 1, j + 1));
                let p01 = pool.insert(grid.coord(i, j + 1));
                cell_specs.push((sd, vec![p00, p10, p11]));
                cell_specs.push((sd, vec![p00, p11, p01]));
            }
        }
    }
    Mesh::from_cells(pool.points, cell_specs)
}

/// Builds a staggered-brick ("polygonal") mesh: rows of 2h × h bricks offset
/// by h on alternate rows. Every brick's vertex loop visits all fine-grid
/// points on its boundary, so hanging nodes turn the bricks into conforming
/// pentagons/hexagons.
pub fn build_brick_mesh(level: u32, geom: &CoupledRectangles) -> Result<Mesh, MeshError> {
    let (fg, sg) = grid_sizes(geom, level)?;
    let mut pool = VertexPool::new();
    let mut cell_specs = Vec::new();
    for (grid, sd) in [(&fg, Subdomain::Fluid), (&sg, Subdomain::Solid)] {
        for j in 0..grid.ny {
            // Brick start columns for this row: offset odd rows by one fine
            // cell, clipping at both ends.
            let mut starts: Vec<(usize, usize)> = Vec::new(); // (i_begin, width)
            let mut i = 0usize;
            if j % 2 == 1 && grid.nx > 1 {
                starts.push((0, 1));
                i = 1;
            }
            while i < grid.nx {
                let w = 2.min(grid.nx - i);
                starts.push((i, w));
                i += w;
            }
            for (i0, w) in starts {
                let mut loop_ids = Vec::with_capacity(2 * (w + 1));
                for di in 0..=w {
                    loop_ids.push(pool.insert(grid.coord(i0 + di, j)));
                }
                for di in (0..=w).rev() {
                    loop_ids.push(pool.insert(grid.coord(i0 + di, j + 1)));
                }
                cell_specs.push((sd, loop_ids));
            }
        }
    }
    Mesh::from_cells(pool.points, cell_specs)
}

/// Reads a mesh from the `POLYMESH2D 1` text format:
///
/// ```text
/// POLYMESH2D 1
/// POINTS n
/// x y            (n lines)
/// CELLS m
/// tag v0 v1 ...  (m lines, tag ∈ {F, S}, vertices CCW)
/// ```
pub fn read_polygonal_mesh(text: &str) -> Result<Mesh, MeshError> {
    let err = |line: usize, message: &str| MeshError::Parse {
        line,
        message: message.to_string(),
    };
    // Non-empty, non-comment lines with their 1-based line numbers.
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
    if header != "POLYMESH2D 1" {
        return Err(err(ln, "expected header `POLYMESH2D 1`"));
    }

    let (ln, pts_hdr) = lines.next().ok_or_else(|| err(ln, "missing POINTS section"))?;
    let n_points: usize = pts_hdr
        .strip_prefix("POINTS")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(ln, "expected `POINTS n`"))?;
    let mut points = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let (ln, line) = lines.next().ok_or_else(|| err(ln, "unexpected end of POINTS"))?;
        let mut it = line.split_whitespace();
        let x: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(ln, "expected `x y`"))?;
        let y: f64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(ln, "expected `x y`"))?;
        if it.next().is_some() {
            return Err(err(ln, "trailing tokens after point coordinates"));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(err(ln, "non-finite coordinate"));
        }
        points.push(Point2::new(x, y));
    }

    let (ln, cells_hdr) = lines.next().ok_or_else(|| err(ln, "missing CELLS section"))?;
    let n_cells: usize = cells_hdr
        .strip_prefix("CELLS")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(ln, "expected `CELLS m`"))?;
    let mut cell_specs = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (ln, line) = lines.next().ok_or_else(|| err(ln, "unexpected end of CELLS"))?;
        let mut it = line.split_whitespace();
        let tag = it.next().ok_or_else(|| err(ln, "expected `tag v0 v1 ...`"))?;
        let sd = match tag {
            "F" => Subdomain::Fluid,
            "S" => Subdomain::Solid,
            _ => return Err(err(ln, "cell tag must be F or S")),
        };
        let mut loop_ids = Vec::new();
        for tok in it {
            let v: usize = tok
                .parse()
                .map_err(|_| err(ln, "vertex indices must be non-negative integers"))?;
            loop_ids.push(v);
        }
        if loop_ids.len() < 3 {
            return Err(err(ln, "cell needs at least 3 vertices"));
        }
        cell_specs.push((sd, loop_ids));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing content after CELLS section"));
    }
    Mesh::from_cells(points, cell_specs)
}
