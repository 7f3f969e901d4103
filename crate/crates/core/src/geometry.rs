//! Bounded C^{1,1} domains in 1-D and 2-D: distance function, boundary
//! nodes with outward normals and arc-length weights, star-shapedness
//! checks and the interior grid scaffold.
//!
//! The distance `d` is the true distance to the complement: positive
//! inside, identically zero outside.

use std::f64::consts::PI;

use crate::grid::{Grid, GridScaffold};
use crate::{Error, Result};

/// Default number of boundary nodes for curved boundaries.
pub const DEFAULT_BOUNDARY_NODES: usize = 512;

/// Default interior-grid node budget.
pub const DEFAULT_NODE_BUDGET: usize = 200_000;

#[derive(Debug, Clone)]
pub enum DomainKind {
    /// Open interval `(a, b)` on the line.
    Interval { a: f64, b: f64 },
    Ball { center: [f64; 2], radius: f64 },
    Ellipse { center: [f64; 2], semi_axes: [f64; 2] },
    /// Boundary given in polar form `r(φ) = c₀ + Σ (c_k cos kφ + s_k sin kφ)`
    /// around `center`; `cos_coeffs[0]` is `c₀`, `sin_coeffs[k-1]` is `s_k`.
    Polar { center: [f64; 2], cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64> },
}

/// One boundary quadrature node.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryNode {
    pub point: [f64; 2],
    pub normal: [f64; 2],
    pub weight: f64,
}

/// Result of a distance query.
#[derive(Debug, Clone, Copy)]
pub struct DistanceInfo {
    /// Unsigned distance to the boundary.
    pub boundary_dist: f64,
    pub inside: bool,
    /// Distance to the complement: `boundary_dist` inside, `0` outside.
    pub d: f64,
    pub nearest: [f64; 2],
    /// Outward unit normal at the nearest boundary point.
    pub normal: [f64; 2],
    /// False when the Newton projection fell back to a dense scan.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct StarShapeCertificate {
    pub center: [f64; 2],
    /// `min over boundary nodes of (x − z₀)·ν(x)`.
    pub min_alignment: f64,
    pub strictly_star_shaped: bool,
}

#[derive(Debug, Clone)]
pub struct DomainGeometry {
    kind: DomainKind,
    dim: usize,
    bbox: ([f64; 2], [f64; 2]),
    boundary: Vec<BoundaryNode>,
}

impl DomainGeometry {
    pub fn new(kind: DomainKind) -> Result<Self> {
        Self::with_boundary_nodes(kind, DEFAULT_BOUNDARY_NODES)
    }

    pub fn with_boundary_nodes(kind: DomainKind, n_bdry: usize) -> Result<Self> {
        let (dim, bbox) = match &kind {
            DomainKind::Interval { a, b } => {
                if !(a < b) {
                    return Err(Error::Validation(format!("empty interval ({a}, {b})")));
                }
                (1, ([*a, 0.0], [*b, 0.0]))
            }
            DomainKind::Ball { center, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::Validation("ball radius must be positive".into()));
                }
                (2, (
                    [center[0] - radius, center[1] - radius],
                    [center[0] + radius, center[1] + radius],
                ))
            }
            DomainKind::Ellipse { center, semi_axes } => {
                if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) {
                    return Err(Error::Validation("ellipse semiaxes must be positive".into()));
                }
                (2, (
                    [center[0] - semi_axes[0], center[1] - semi_axes[1]],
                    [center[0] + semi_axes[0], center[1] + semi_axes[1]],
                ))
            }
            DomainKind::Polar { center, cos_coeffs, sin_coeffs } => {
                if cos_coeffs.is_empty() {
                    return Err(Error::Validation("polar domain needs r(φ) coefficients".into()));
                }
                let radius = |phi: f64| polar_radius(cos_coeffs, sin_coeffs, phi, 0);
                let mut r_min = f64::INFINITY;
                let mut r_max: f64 = 0.0;
                let mut d2_max: f64 = 0.0;
                for i in 0..2048 {
                    let phi = 2.0 * PI * i as f64 / 2048.0;
                    r_min = r_min.min(radius(phi));
                    r_max = r_max.max(radius(phi));
                    d2_max = d2_max.max(polar_radius(cos_coeffs, sin_coeffs, phi, 2).abs());
                }
                if r_min <= 0.0 {
                    return Err(Error::Validation(format!(
                        "polar boundary must stay positive (min r = {r_min:.3e})"
                    )));
                }
                if d2_max > 1e6 * r_max {
                    return Err(Error::Validation(
                        "polar boundary curvature is out of the C^{1,1} range".into(),
                    ));
                }
                (2, (
                    [center[0] - r_max, center[1] - r_max],
                    [center[0] + r_max, center[1] + r_max],
                ))
            }
        };

        let mut geom = Self { kind, dim, bbox, boundary: Vec::new() };
        geom.boundary = geom.build_boundary(n_bdry)?;
        Ok(geom)
    }

    fn build_boundary(&self, n_bdry: usize) -> Result<Vec<BoundaryNode>> {
        let nodes = match &self.kind {
            DomainKind::Interval { a, b } => vec![
                BoundaryNode { point: [*a, 0.0], normal: [-1.0, 0.0], weight: 1.0 },
                BoundaryNode { point: [*b, 0.0], normal: [1.0, 0.0], weight: 1.0 },
            ],
            _ => {
                let mut out = Vec::with_capacity(n_bdry);
                for i in 0..n_bdry {
                    let phi = 2.0 * PI * i as f64 / n_bdry as f64;
                    let (point, tangent) = self.curve(phi);
                    let speed = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
                    // outward normal: tangent rotated by −π/2 (CCW parametrization)
                    let normal = [tangent[1] / speed, -tangent[0] / speed];
                    out.push(BoundaryNode {
                        point,
                        normal,
                        weight: speed * 2.0 * PI / n_bdry as f64,
                    });
                }
                out
            }
        };
        for node in &nodes {
            let eps = 1e-7 * self.diameter();
            let probe_out = [
                node.point[0] + eps * node.normal[0],
                node.point[1] + eps * node.normal[1],
            ];
            let probe_in = [
                node.point[0] - eps * node.normal[0],
                node.point[1] - eps * node.normal[1],
            ];
            if self.contains(probe_out) || !self.contains(probe_in) {
                return Err(Error::Validation(format!(
                    "boundary normal at ({:.4}, {:.4}) is not outward",
                    node.point[0], node.point[1]
                )));
            }
        }
        Ok(nodes)
    }

    /// Boundary parametrization and tangent at angle `φ` (curved kinds).
    fn curve(&self, phi: f64) -> ([f64; 2], [f64; 2]) {
        match &self.kind {
            DomainKind::Ball { center, radius } => (
                [center[0] + radius * phi.cos(), center[1] + radius * phi.sin()],
                [-radius * phi.sin(), radius * phi.cos()],
            ),
            DomainKind::Ellipse { center, semi_axes } => (
                [center[0] + semi_axes[0] * phi.cos(), center[1] + semi_axes[1] * phi.sin()],
                [-semi_axes[0] * phi.sin(), semi_axes[1] * phi.cos()],
            ),
            DomainKind::Polar { center, cos_coeffs, sin_coeffs } => {
                let r = polar_radius(cos_coeffs, sin_coeffs, phi, 0);
                let dr = polar_radius(cos_coeffs, sin_coeffs, phi, 1);
                (
                    [center[0] + r * phi.cos(), center[1] + r * phi.sin()],
                    [
                        dr * phi.cos() - r * phi.sin(),
                        dr * phi.sin() + r * phi.cos(),
                    ],
                )
            }
            DomainKind::Interval { .. } => unreachable!("interval boundary is two points"),
        }
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        self.bbox
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox;
        match self.dim {
            1 => hi[0] - lo[0],
            _ => ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt(),
        }
    }

    pub fn perimeter(&self) -> f64 {
        self.boundary.iter().map(|n| n.weight).sum()
    }

    /// Strict interior test.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        match &self.kind {
            DomainKind::Interval { a, b } => x[0] > *a && x[0] < *b,
            DomainKind::Ball { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                dx * dx + dy * dy < radius * radius
            }
            DomainKind::Ellipse { center, semi_axes } => {
                let dx = (x[0] - center[0]) / semi_axes[0];
                let dy = (x[1] - center[1]) / semi_axes[1];
                dx * dx + dy * dy < 1.0
            }
            DomainKind::Polar { center, cos_coeffs, sin_coeffs } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                let rho = (dx * dx + dy * dy).sqrt();
                rho < polar_radius(cos_coeffs, sin_coeffs, dy.atan2(dx), 0)
            }
        }
    }

    /// Distance query with nearest boundary point and outward normal.
    pub fn distance(&self, x: [f64; 2]) -> DistanceInfo {
        match &self.kind {
            DomainKind::Interval { a, b } => {
                let (da, db) = ((x[0] - a).abs(), (x[0] - b).abs());
                let (nearest, normal) = if da <= db {
                    ([*a, 0.0], [-1.0, 0.0])
                } else {
                    ([*b, 0.0], [1.0, 0.0])
                };
                let inside = self.contains(x);
                let bd = da.min(db);
                DistanceInfo {
                    boundary_dist: bd,
                    inside,
                    d: if inside { bd } else { 0.0 },
                    nearest,
                    normal,
                    converged: true,
                }
            }
            DomainKind::Ball { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                let rho = (dx * dx + dy * dy).sqrt();
                let dir = if rho > 1e-14 { [dx / rho, dy / rho] } else { [1.0, 0.0] };
                let nearest = [center[0] + radius * dir[0], center[1] + radius * dir[1]];
                let inside = rho < *radius;
                let bd = (rho - radius).abs();
                DistanceInfo {
                    boundary_dist: bd,
                    inside,
                    d: if inside { bd } else { 0.0 },
                    nearest,
                    normal: dir,
                    converged: true,
                }
            }
            _ => self.project_curved(x),
        }
    }

    /// Newton projection on the boundary parameter, seeded at the nearest
    /// boundary node; falls back to a dense node scan when Newton stalls.
    fn project_curved(&self, x: [f64; 2]) -> DistanceInfo {
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (i, node) in self.boundary.iter().enumerate() {
            let dx = x[0] - node.point[0];
            let dy = x[1] - node.point[1];
            let d2 = dx * dx + dy * dy;
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        let mut phi = 2.0 * PI * best as f64 / self.boundary.len() as f64;
        let mut converged = false;
        for _ in 0..60 {
            let (q, t) = self.curve(phi);
            let qpp = self.curve_second(phi);
            let rx = q[0] - x[0];
            let ry = q[1] - x[1];
            let f = rx * t[0] + ry * t[1];
            let fp = t[0] * t[0] + t[1] * t[1] + rx * qpp[0] + ry * qpp[1];
            if fp.abs() < 1e-300 {
                break;
            }
            let step = f / fp;
            phi -= step;
            if step.abs() < 1e-13 {
                converged = true;
                break;
            }
        }
        if !converged {
            // dense fallback on a refined scan
            let n = 8 * self.boundary.len();
            let mut best_phi = phi;
            let mut best_d2 = f64::INFINITY;
            for i in 0..n {
                let cand = 2.0 * PI * i as f64 / n as f64;
                let (q, _) = self.curve(cand);
                let d2 = (q[0] - x[0]).powi(2) + (q[1] - x[1]).powi(2);
                if d2 < best_d2 {
                    best_d2 = d2;
                    best_phi = cand;
                }
            }
            phi = best_phi;
        }
        let (q, t) = self.curve(phi);
        let speed = (t[0] * t[0] + t[1] * t[1]).sqrt();
        let normal = [t[1] / speed, -t[0] / speed];
        let bd = ((q[0] - x[0]).powi(2) + (q[1] - x[1]).powi(2)).sqrt();
        let inside = self.contains(x);
        DistanceInfo {
            boundary_dist: bd,
            inside,
            d: if inside { bd } else { 0.0 },
            nearest: q,
            normal,
            converged,
        }
    }

    fn curve_second(&self, phi: f64) -> [f64; 2] {
        match &self.kind {
            DomainKind::Ball { radius, .. } => {
                [-radius * phi.cos(), -radius * phi.sin()]
            }
            DomainKind::Ellipse { semi_axes, .. } => {
                [-semi_axes[0] * phi.cos(), -semi_axes[1] * phi.sin()]
            }
            DomainKind::Polar { cos_coeffs, sin_coeffs, .. } => {
                let r = polar_radius(cos_coeffs, sin_coeffs, phi, 0);
                let dr = polar_radius(cos_coeffs, sin_coeffs, phi, 1);
                let d2r = polar_radius(cos_coeffs, sin_coeffs, phi, 2);
                [
                    (d2r - r) * phi.cos() - 2.0 * dr * phi.sin(),
                    (d2r - r) * phi.sin() + 2.0 * dr * phi.cos(),
                ]
            }
            DomainKind::Interval { .. } => unreachable!(),
        }
    }

    /// Trapezoidal arc-length quadrature of boundary samples (two-point sum
    /// for the interval).
    pub fn boundary_integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.boundary.len(), "one value per boundary node");
        values
            .iter()
            .zip(&self.boundary)
            .map(|(v, node)| v * node.weight)
            .sum()
    }

    pub fn star_shape_check(&self, z0: [f64; 2]) -> Result<StarShapeCertificate> {
        if !self.contains(z0) {
            return Err(Error::Argument(format!(
                "star-shape center ({}, {}) lies outside the domain",
                z0[0], z0[1]
            )));
        }
        let min_alignment = self
            .boundary
            .iter()
            .map(|n| (n.point[0] - z0[0]) * n.normal[0] + (n.point[1] - z0[1]) * n.normal[1])
            .fold(f64::INFINITY, f64::min);
        Ok(StarShapeCertificate {
            center: z0,
            min_alignment,
            strictly_star_shaped: min_alignment > 0.0,
        })
    }

    /// Convexity flag: minimum signed curvature over the boundary scan.
    pub fn is_convex(&self) -> bool {
        match &self.kind {
            DomainKind::Interval { .. } | DomainKind::Ball { .. } | DomainKind::Ellipse { .. } => {
                true
            }
            DomainKind::Polar { cos_coeffs, sin_coeffs, .. } => {
                (0..2048).all(|i| {
                    let phi = 2.0 * PI * i as f64 / 2048.0;
                    let r = polar_radius(cos_coeffs, sin_coeffs, phi, 0);
                    let dr = polar_radius(cos_coeffs, sin_coeffs, phi, 1);
                    let d2r = polar_radius(cos_coeffs, sin_coeffs, phi, 2);
                    r * r + 2.0 * dr * dr - r * d2r >= -1e-12
                })
            }
        }
    }

    /// Uniform grid on the bounding box (expanded to whole cells) with the
    /// inside mask and distance per node.
    pub fn interior_scaffold(&self, h: f64, budget: usize) -> Result<GridScaffold> {
        if !(h > 0.0) {
            return Err(Error::Domain("grid spacing must be positive".into()));
        }
        let (lo, hi) = self.bbox;
        let snap = |extent: f64| -> usize { (extent / h - 1e-9).ceil().max(1.0) as usize };
        let (ncx, lox) = {
            let cells = snap(hi[0] - lo[0]);
            let mid = 0.5 * (lo[0] + hi[0]);
            (cells, mid - 0.5 * cells as f64 * h)
        };
        let (ncy, loy) = if self.dim == 1 {
            (0usize, 0.0)
        } else {
            let cells = snap(hi[1] - lo[1]);
            let mid = 0.5 * (lo[1] + hi[1]);
            (cells, mid - 0.5 * cells as f64 * h)
        };
        let nodes = [(ncx + 1), if self.dim == 1 { 1 } else { ncy + 1 }];
        let total = nodes[0] * nodes[1];
        if total > budget {
            return Err(Error::Resource(format!(
                "grid would need {total} nodes, budget is {budget}"
            )));
        }
        let grid = Grid { dim: self.dim, lo: [lox, loy], h, nodes };
        let mut inside = vec![false; total];
        let mut dist = vec![0.0; total];
        for j in 0..nodes[1] {
            for i in 0..nodes[0] {
                let idx = grid.index(i, j);
                let p = grid.point(i, j);
                let info = self.distance(p);
                inside[idx] = info.inside && info.d > 1e-12;
                dist[idx] = info.d;
            }
        }
        let n_interior = inside.iter().filter(|&&b| b).count();
        Ok(GridScaffold { grid, inside, dist, n_interior })
    }

    /// The same domain translated by `z` (grids and solutions translate
    /// with it; distances and normals are invariant).
    pub fn translate(&self, z: [f64; 2]) -> Result<Self> {
        let kind = match self.kind.clone() {
            DomainKind::Interval { a, b } => DomainKind::Interval { a: a + z[0], b: b + z[0] },
            DomainKind::Ball { center, radius } => DomainKind::Ball {
                center: [center[0] + z[0], center[1] + z[1]],
                radius,
            },
            DomainKind::Ellipse { center, semi_axes } => DomainKind::Ellipse {
                center: [center[0] + z[0], center[1] + z[1]],
                semi_axes,
            },
            DomainKind::Polar { center, cos_coeffs, sin_coeffs } => DomainKind::Polar {
                center: [center[0] + z[0], center[1] + z[1]],
                cos_coeffs,
                sin_coeffs,
            },
        };
        Self::with_boundary_nodes(kind, self.boundary.len().max(2))
    }

    /// Short descriptor for reports.
    pub fn describe(&self) -> String {
        match &self.kind {
            DomainKind::Interval { a, b } => format!("interval({a}, {b})"),
            DomainKind::Ball { center, radius } => {
                format!("ball(({}, {}), {})", center[0], center[1], radius)
            }
            DomainKind::Ellipse { center, semi_axes } => format!(
                "ellipse(({}, {}), ({}, {}))",
                center[0], center[1], semi_axes[0], semi_axes[1]
            ),
            DomainKind::Polar { center, cos_coeffs, .. } => format!(
                "polar(({}, {}), {} cos modes)",
                center[0],
                center[1],
                cos_coeffs.len()
            ),
        }
    }
}

fn polar_radius(cos_coeffs: &[f64], sin_coeffs: &[f64], phi: f64, deriv: usize) -> f64 {
    let mut acc = if deriv == 0 { cos_coeffs[0] } else { 0.0 };
    for (k, &c) in cos_coeffs.iter().enumerate().skip(1) {
        let kf = k as f64;
        acc += match deriv {
            0 => c * (kf * phi).cos(),
            1 => -c * kf * (kf * phi).sin(),
            _ => -c * kf * kf * (kf * phi).cos(),
        };
    }
    for (i, &s) in sin_coeffs.iter().enumerate() {
        let kf = (i + 1) as f64;
        acc += match deriv {
            0 => s * (kf * phi).sin(),
            1 => s * kf * (kf * phi).cos(),
            _ => -s * kf * kf * (kf * phi).sin(),
        };
    }
    acc
}
