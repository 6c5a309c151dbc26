//! Closed oriented triangle meshes with per-vertex tangent frames, cotangent
//! weights and barycentric vertex areas.
//!
//! Halfedges are implicit: halfedge `3 * f + c` runs from corner `c` of
//! face `f` to corner `(c + 1) % 3`. Undirected edges are stored once with
//! their endpoints in increasing order.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::MeshError;
use crate::linalg::CsrMatrix;

pub type Point = Vector3<f64>;

/// Orthonormal tangent frame with `e1 x e2 = normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e1: Point,
    pub e2: Point,
    pub normal: Point,
}

impl Frame {
    /// Angle of the tangential projection of `v` measured from `e1` towards `e2`.
    pub fn angle_of(&self, v: &Point) -> f64 {
        v.dot(&self.e2).atan2(v.dot(&self.e1))
    }

    /// Tangent vector at `angle` from `e1`.
    pub fn direction(&self, angle: f64) -> Point {
        self.e1 * angle.cos() + self.e2 * angle.sin()
    }

    /// The same frame rotated by `beta` about its normal.
    pub fn rotated(&self, beta: f64) -> Frame {
        let (s, c) = beta.sin_cos();
        Frame {
            e1: self.e1 * c + self.e2 * s,
            e2: -self.e1 * s + self.e2 * c,
            normal: self.normal,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    positions: Vec<Point>,
    faces: Vec<[usize; 3]>,
    twin: Vec<usize>,
    halfedge_edge: Vec<usize>,
    edges: Vec<[usize; 2]>,
    edge_halfedge: Vec<usize>,
    vertex_halfedge: Vec<usize>,
    frames: Vec<Frame>,
    cotan_weights: Vec<f64>,
    vertex_areas: Vec<f64>,
    face_areas: Vec<f64>,
    corner_angles: Vec<f64>,
    genus: usize,
}

impl SurfaceMesh {
    /// Validate topology and geometry and compute all derived quantities.
    pub fn new(positions: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::Empty);
        }
        let nv = positions.len();
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                if v >= nv {
                    return Err(MeshError::IndexOutOfRange {
                        face: f,
                        vertex: v,
                        count: nv,
                    });
                }
            }
            if face[0] == face[1] || face[1] == face[2] || face[2] == face[0] {
                return Err(MeshError::DegenerateFace { face: f });
            }
        }

        let nh = 3 * faces.len();
        let tail = |h: usize| faces[h / 3][h % 3];
        let head = |h: usize| faces[h / 3][(h + 1) % 3];

        // directed halfedges and undirected edge incidence
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(nh);
        let mut undirected: HashMap<(usize, usize), Vec<usize>> = HashMap::with_capacity(nh / 2);
        for h in 0..nh {
            let (a, b) = (tail(h), head(h));
            undirected.entry((a.min(b), a.max(b))).or_default().push(h);
        }
        // report problems deterministically in face order
        for h in 0..nh {
            let (a, b) = (tail(h), head(h));
            let key = (a.min(b), a.max(b));
            let inc = &undirected[&key];
            match inc.len() {
                1 => return Err(MeshError::BoundaryEdge(key.0, key.1)),
                2 => {}
                _ => return Err(MeshError::NonManifoldEdge(key.0, key.1)),
            }
            if directed.insert((a, b), h).is_some() {
                return Err(MeshError::InconsistentOrientation(key.0, key.1));
            }
        }

        let twin: Vec<usize> = (0..nh).map(|h| directed[&(head(h), tail(h))]).collect();

        let mut edges = Vec::with_capacity(nh / 2);
        let mut edge_halfedge = Vec::with_capacity(nh / 2);
        let mut halfedge_edge = vec![usize::MAX; nh];
        for h in 0..nh {
            if halfedge_edge[h] != usize::MAX {
                continue;
            }
            let (a, b) = (tail(h), head(h));
            let e = edges.len();
            let canonical = if a < b { h } else { twin[h] };
            edges.push([a.min(b), a.max(b)]);
            edge_halfedge.push(canonical);
            halfedge_edge[h] = e;
            halfedge_edge[twin[h]] = e;
        }

        let mut vertex_halfedge = vec![usize::MAX; nv];
        let mut out_degree = vec![0usize; nv];
        for h in 0..nh {
            let v = tail(h);
            out_degree[v] += 1;
            if vertex_halfedge[v] == usize::MAX {
                vertex_halfedge[v] = h;
            }
        }
        for v in 0..nv {
            if vertex_halfedge[v] == usize::MAX {
                return Err(MeshError::IsolatedVertex(v));
            }
            // a manifold vertex star is one cycle through all outgoing halfedges
            let start = vertex_halfedge[v];
            let mut h = start;
            let mut count = 0;
            loop {
                count += 1;
                h = twin[prev_in_face(h)];
                if h == start || count > out_degree[v] {
                    break;
                }
            }
            if count != out_degree[v] {
                return Err(MeshError::NonManifoldVertex(v));
            }
        }

        let components = count_components(nv, &edges);
        if components != 1 {
            return Err(MeshError::Disconnected(components));
        }

        let chi = nv as i64 - edges.len() as i64 + faces.len() as i64;
        let genus = ((2 - chi) / 2).max(0) as usize;

        let mut mesh = SurfaceMesh {
            positions,
            faces,
            twin,
            halfedge_edge,
            edges,
            edge_halfedge,
            vertex_halfedge,
            frames: Vec::new(),
            cotan_weights: Vec::new(),
            vertex_areas: Vec::new(),
            face_areas: Vec::new(),
            corner_angles: Vec::new(),
            genus,
        };
        mesh.compute_geometry()?;
        Ok(mesh)
    }

    fn compute_geometry(&mut self) -> Result<(), MeshError> {
        let nf = self.faces.len();
        let nv = self.positions.len();
        self.face_areas = Vec::with_capacity(nf);
        self.corner_angles = vec![0.0; 3 * nf];
        self.cotan_weights = vec![0.0; self.edges.len()];
        self.vertex_areas = vec![0.0; nv];
        let mut normals = vec![Point::zeros(); nv];

        for f in 0..nf {
            let [a, b, c] = self.faces[f];
            let (pa, pb, pc) = (self.positions[a], self.positions[b], self.positions[c]);
            let cross = (pb - pa).cross(&(pc - pa));
            let area = 0.5 * cross.norm();
            if !(area >= 1e-14) {
                return Err(MeshError::DegenerateTriangle { face: f, area });
            }
            self.face_areas.push(area);
            for v in [a, b, c] {
                self.vertex_areas[v] += area / 3.0;
                // area-weighted normal: |cross| = 2 * area
                normals[v] += cross;
            }
            for corner in 0..3 {
                let p = self.positions[self.faces[f][corner]];
                let q = self.positions[self.faces[f][(corner + 1) % 3]];
                let r = self.positions[self.faces[f][(corner + 2) % 3]];
                let (u, w) = (q - p, r - p);
                self.corner_angles[3 * f + corner] = u.cross(&w).norm().atan2(u.dot(&w));
                // the corner is opposite the halfedge q -> r
                let cot = u.dot(&w) / u.cross(&w).norm();
                let h = 3 * f + (corner + 1) % 3;
                self.cotan_weights[self.halfedge_edge[h]] += 0.5 * cot;
            }
        }

        self.frames = (0..nv)
            .map(|v| {
                let normal = normals[v].normalize();
                let h = self.vertex_halfedge[v];
                let edge = self.positions[self.head(h)] - self.positions[v];
                let e1 = (edge - normal * edge.dot(&normal)).normalize();
                let e2 = normal.cross(&e1);
                Frame { e1, e2, normal }
            })
            .collect();
        Ok(())
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_halfedges(&self) -> usize {
        3 * self.faces.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, v: usize) -> Point {
        self.positions[v]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }

    /// Undirected edges `[lo, hi]`.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, v: usize) -> &Frame {
        &self.frames[v]
    }

    pub fn cotan_weights(&self) -> &[f64] {
        &self.cotan_weights
    }

    pub fn cotan_weight(&self, e: usize) -> f64 {
        self.cotan_weights[e]
    }

    pub fn vertex_areas(&self) -> &[f64] {
        &self.vertex_areas
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// Interior angle at `corner` of face `f`.
    pub fn corner_angle(&self, f: usize, corner: usize) -> f64 {
        self.corner_angles[3 * f + corner]
    }

    pub fn tail(&self, h: usize) -> usize {
        self.faces[h / 3][h % 3]
    }

    pub fn head(&self, h: usize) -> usize {
        self.faces[h / 3][(h + 1) % 3]
    }

    pub fn twin(&self, h: usize) -> usize {
        self.twin[h]
    }

    pub fn halfedge_face(&self, h: usize) -> usize {
        h / 3
    }

    pub fn halfedge_edge(&self, h: usize) -> usize {
        self.halfedge_edge[h]
    }

    /// The halfedge of edge `e` running from its lower to its higher vertex.
    pub fn edge_halfedge(&self, e: usize) -> usize {
        self.edge_halfedge[e]
    }

    /// `+1` when `h` runs along the canonical (low to high) direction of its edge.
    pub fn halfedge_sign(&self, h: usize) -> f64 {
        if self.tail(h) < self.head(h) {
            1.0
        } else {
            -1.0
        }
    }

    /// Faces on either side of edge `e`: (left of lo->hi, right of lo->hi).
    pub fn edge_faces(&self, e: usize) -> (usize, usize) {
        let h = self.edge_halfedge[e];
        (h / 3, self.twin[h] / 3)
    }

    /// Halfedge from `a` to `b`, if the edge exists.
    pub fn find_halfedge(&self, a: usize, b: usize) -> Option<usize> {
        self.outgoing(a).find(|&h| self.head(h) == b)
    }

    /// Outgoing halfedges of `v` in counter-clockwise order, starting from
    /// the halfedge that defines the vertex frame.
    pub fn outgoing(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let start = self.vertex_halfedge[v];
        let mut current = Some(start);
        std::iter::from_fn(move || {
            let h = current?;
            let next = self.twin[prev_in_face(h)];
            current = if next == start { None } else { Some(next) };
            Some(h)
        })
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.outgoing(v).map(|h| self.head(h))
    }

    pub fn vertex_faces(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.outgoing(v).map(|h| h / 3)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.outgoing(v).count()
    }

    /// `2 pi` minus the sum of incident corner angles.
    pub fn angle_defect(&self, v: usize) -> f64 {
        let total: f64 = self.outgoing(v).map(|h| self.corner_angles[h]).sum();
        2.0 * PI - total
    }

    pub fn angle_defects(&self) -> Vec<f64> {
        (0..self.num_vertices()).map(|v| self.angle_defect(v)).collect()
    }

    pub fn mean_edge_length(&self) -> f64 {
        let total: f64 = self
            .edges
            .iter()
            .map(|&[a, b]| (self.positions[a] - self.positions[b]).norm())
            .sum();
        total / self.edges.len() as f64
    }

    pub fn centroid(&self) -> Point {
        self.positions.iter().sum::<Point>() / self.positions.len() as f64
    }

    /// Largest distance of a vertex from the vertex centroid.
    pub fn circumradius(&self) -> f64 {
        let c = self.centroid();
        self.positions.iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        (self.positions[a] + self.positions[b]) * 0.5
    }

    pub fn face_barycenter(&self, f: usize) -> Point {
        let [a, b, c] = self.faces[f];
        (self.positions[a] + self.positions[b] + self.positions[c]) / 3.0
    }

    /// Vertex closest (Euclidean) to `p`.
    pub fn nearest_vertex(&self, p: &Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (v, q) in self.positions.iter().enumerate() {
            let d = (q - p).norm_squared();
            if d < best.0 {
                best = (d, v);
            }
        }
        best.1
    }

    /// The same mesh with each vertex frame rotated by `betas[v]` about its normal.
    pub fn with_rotated_frames(&self, betas: &[f64]) -> SurfaceMesh {
        assert_eq!(betas.len(), self.num_vertices());
        let mut mesh = self.clone();
        for (frame, &beta) in mesh.frames.iter_mut().zip(betas) {
            *frame = frame.rotated(beta);
        }
        mesh
    }

    /// Move every vertex through `f`, keeping the connectivity.
    pub fn map_positions(&self, f: impl Fn(&Point) -> Point) -> Result<SurfaceMesh, MeshError> {
        SurfaceMesh::new(self.positions.iter().map(f).collect(), self.faces.clone())
    }

    /// Breadth-first rings around `v`: `rings[n]` holds the vertices at
    /// combinatorial distance `n` (`rings[0] == [v]`).
    pub fn vertex_rings(&self, v: usize, count: usize) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.num_vertices()];
        seen[v] = true;
        let mut rings = vec![vec![v]];
        for _ in 0..count {
            let mut next = Vec::new();
            for &u in rings.last().unwrap() {
                for w in self.neighbors(u) {
                    if !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            rings.push(next);
        }
        rings
    }
}

fn prev_in_face(h: usize) -> usize {
    3 * (h / 3) + (h + 2) % 3
}

fn count_components(nv: usize, edges: &[[usize; 2]]) -> usize {
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &[a, b] in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
        }
    }
    (0..nv).filter(|&v| find(&mut parent, v) == v).count()
}

/// Stiffness matrix `L` of the cotangent Laplacian: `(L f)_i = sum_j w_ij (f_i - f_j)`.
///
/// `L` approximates the integrated `-Delta`; it is symmetric positive
/// semidefinite with zero row sums.
pub fn cotan_laplacian(mesh: &SurfaceMesh) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(4 * mesh.num_edges());
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let w = mesh.cotan_weight(e);
        triplets.push((a, b, -w));
        triplets.push((b, a, -w));
        triplets.push((a, a, w));
        triplets.push((b, b, w));
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), &triplets)
}

const MAX_SUBDIVISIONS: u32 = 8;

/// Icosahedron refined `subdivisions` times by midpoint splitting, with all
/// vertices projected to the unit sphere.
pub fn build_icosphere(subdivisions: u32) -> Result<SurfaceMesh, MeshError> {
    if subdivisions > MAX_SUBDIVISIONS {
        return Err(MeshError::SubdivisionLimit(subdivisions));
    }
    let (mut positions, mut faces) = icosahedron();
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(4 * faces.len());
        for &[a, b, c] in &faces {
            let mut mid = |i: usize, j: usize| -> usize {
                *midpoint.entry((i.min(j), i.max(j))).or_insert_with(|| {
                    positions.push(((positions[i] + positions[j]) * 0.5).normalize());
                    positions.len() - 1
                })
            };
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    SurfaceMesh::new(positions, faces)
}

/// Unit-circumradius icosahedron with outward-oriented faces.
pub fn icosahedron() -> (Vec<Point>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let positions = raw
        .iter()
        .map(|p| Point::new(p[0], p[1], p[2]).normalize())
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (positions, faces)
}

/// Torus of revolution about the z axis with `nu` vertices around the
/// central circle and `nv` rings around the tube. Consecutive rings are
/// staggered by half a step so the triangles are close to equilateral and
/// all cotangent weights stay positive; `nv` must be even.
pub fn build_torus(major: f64, minor: f64, nu: usize, nv: usize) -> crate::Result<SurfaceMesh> {
    if nu < 3 || nv < 4 || !nv.is_multiple_of(2) {
        return Err(crate::Error::Domain(format!(
            "torus needs nu >= 3 and an even nv >= 4, got {nu} x {nv}"
        )));
    }
    if !(major > minor && minor > 0.0) {
        return Err(crate::Error::Domain(format!(
            "torus radii must satisfy major > minor > 0, got {major}, {minor}"
        )));
    }
    let mut positions = Vec::with_capacity(nu * nv);
    for j in 0..nv {
        let v = 2.0 * PI * j as f64 / nv as f64;
        for i in 0..nu {
            let u = 2.0 * PI * (i as f64 + 0.5 * j as f64) / nu as f64;
            let r = major + minor * v.cos();
            positions.push(Point::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    // ring nv coincides with ring 0 shifted by nv / 2 steps
    let idx = |i: usize, j: usize| {
        if j == nv {
            (i + nv / 2) % nu
        } else {
            j * nu + i % nu
        }
    };
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for j in 0..nv {
        for i in 0..nu {
            faces.push([idx(i, j), idx(i + 1, j), idx(i, j + 1)]);
            faces.push([idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Ok(SurfaceMesh::new(positions, faces)?)
}
