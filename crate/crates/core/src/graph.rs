//! b-quad-graphs: bipartite quadrilateral cell complexes with white vertices
//! carrying circles and black vertices carrying intersection points, plus the
//! derived white graph `G` and black graph `G*`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::{EdgeId, FaceId, VertexId};

/// Absolute tolerance on the angle sum at interior black vertices.
/// Labellings are produced analytically, so only rounding noise is expected.
pub const ADMISSIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("vertex {0} appears in both white and black face positions")]
    NonBipartite(VertexId),
    #[error("edge ({0}, {1}) is incident to more than two faces")]
    NonManifoldEdge(VertexId, VertexId),
    #[error("faces {0} and {1} traverse a shared edge in the same direction")]
    InconsistentOrientation(FaceId, FaceId),
    #[error("faces {0} and {1} share more than one edge")]
    StronglyIrregular(FaceId, FaceId),
    #[error("faces around vertex {0} do not form a single fan")]
    NonManifoldVertex(VertexId),
    #[error("face {0} has a repeated vertex")]
    DegenerateFace(FaceId),
    #[error("labelling covers {got} faces, graph has {want}")]
    MissingLabel { got: usize, want: usize },
    #[error("label {value} on face {face} lies outside (0, pi)")]
    LabelOutOfRange { face: FaceId, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Color {
    White,
    Black,
}

/// Ordered faces and edges around one vertex.
///
/// `faces[i]` lies counterclockwise between `edges[i]` and `edges[i + 1]`
/// (indices mod `faces.len()` when the fan is closed). Closed fans have as
/// many edges as faces and start at an arbitrary but fixed edge; open fans
/// have one edge more, and their first and last edges are boundary edges.
#[derive(Debug, Clone)]
pub struct Fan {
    pub faces: Vec<FaceId>,
    pub edges: Vec<EdgeId>,
    pub closed: bool,
}

/// Bipartite quad cell complex. Immutable after construction.
#[derive(Debug, Clone)]
pub struct BQuadGraph {
    colors: Vec<Color>,
    /// Canonical face quadruples `(z-, v-, z+, v+)`, counterclockwise,
    /// rotated so the smaller white id comes first.
    faces: Vec<[VertexId; 4]>,
    /// Undirected edges as `(white, black)` pairs.
    edges: Vec<(VertexId, VertexId)>,
    /// Edge ids of the four sides of each face, in cycle order.
    face_edges: Vec<[EdgeId; 4]>,
    /// Faces incident to each edge (one or two).
    edge_faces: Vec<Vec<FaceId>>,
    fans: Vec<Fan>,
    boundary_vertex: Vec<bool>,
}

impl BQuadGraph {
    pub fn vertex_count(&self) -> usize {
        self.colors.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn color(&self, v: VertexId) -> Color {
        self.colors[v]
    }

    pub fn is_white(&self, v: VertexId) -> bool {
        self.colors[v] == Color::White
    }

    pub fn white_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.colors.len()).filter(|&v| self.colors[v] == Color::White)
    }

    pub fn black_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.colors.len()).filter(|&v| self.colors[v] == Color::Black)
    }

    pub fn faces(&self) -> &[[VertexId; 4]] {
        &self.faces
    }

    pub fn face(&self, f: FaceId) -> [VertexId; 4] {
        self.faces[f]
    }

    pub fn edges(&self) -> &[(VertexId, VertexId)] {
        &self.edges
    }

    pub fn face_edges(&self, f: FaceId) -> [EdgeId; 4] {
        self.face_edges[f]
    }

    pub fn edge_faces(&self, e: EdgeId) -> &[FaceId] {
        &self.edge_faces[e]
    }

    pub fn fan(&self, v: VertexId) -> &Fan {
        &self.fans[v]
    }

    pub fn is_boundary_vertex(&self, v: VertexId) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_interior_vertex(&self, v: VertexId) -> bool {
        !self.boundary_vertex[v]
    }

    pub fn is_boundary_edge(&self, e: EdgeId) -> bool {
        self.edge_faces[e].len() == 1
    }

    /// Directed boundary edges `(white, black)` in no particular order.
    pub fn boundary_edges(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        (0..self.edges.len())
            .filter(|&e| self.is_boundary_edge(e))
            .map(|e| self.edges[e])
    }

    /// Whether the 1-skeleton is connected.
    pub fn is_connected(&self) -> bool {
        if self.colors.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.vertex_count()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &e in &self.fans[v].edges {
                let (w, b) = self.edges[e];
                let o = if w == v { b } else { w };
                if !seen[o] {
                    seen[o] = true;
                    stack.push(o);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Intersection-angle labelling: one angle in `(0, pi)` per face.
#[derive(Debug, Clone)]
pub struct Labelling {
    alpha: Vec<f64>,
}

impl Labelling {
    pub fn new(alpha: Vec<f64>, bq: &BQuadGraph) -> Result<Self, GraphError> {
        if alpha.len() != bq.face_count() {
            return Err(GraphError::MissingLabel {
                got: alpha.len(),
                want: bq.face_count(),
            });
        }
        for (face, &a) in alpha.iter().enumerate() {
            if !(a > 0.0 && a < std::f64::consts::PI) {
                return Err(GraphError::LabelOutOfRange { face, value: a });
            }
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self, f: FaceId) -> f64 {
        self.alpha[f]
    }

    pub fn values(&self) -> &[f64] {
        &self.alpha
    }
}

/// White graph `G` and black graph `G*`, one edge each per face of the
/// underlying b-quad-graph.
#[derive(Debug, Clone)]
pub struct PrimalDualView {
    /// Per face: its white endpoints `(z-, z+)`.
    g_edges: Vec<(VertexId, VertexId)>,
    /// Per face: its black endpoints `(v-, v+)`.
    gstar_edges: Vec<(VertexId, VertexId)>,
    /// Per white vertex: `(face, opposite white)` in fan order.
    g_adj: Vec<Vec<(FaceId, VertexId)>>,
    /// Per black vertex: `(face, opposite black)` in fan order.
    gstar_adj: Vec<Vec<(FaceId, VertexId)>>,
}

impl PrimalDualView {
    pub fn g_edge(&self, f: FaceId) -> (VertexId, VertexId) {
        self.g_edges[f]
    }

    pub fn gstar_edge(&self, f: FaceId) -> (VertexId, VertexId) {
        self.gstar_edges[f]
    }

    pub fn g_edge_count(&self) -> usize {
        self.g_edges.len()
    }

    /// Neighbors of a white vertex in `G`, with the face realizing each edge,
    /// in fan (counterclockwise) order.
    pub fn white_star(&self, z: VertexId) -> &[(FaceId, VertexId)] {
        &self.g_adj[z]
    }

    /// Neighbors of a black vertex in `G*`, with faces, in fan order.
    pub fn black_star(&self, v: VertexId) -> &[(FaceId, VertexId)] {
        &self.gstar_adj[v]
    }
}

/// Build a b-quad-graph from ordered vertex quadruples `(z-, v-, z+, v+)`
/// (white/black alternating, counterclockwise). Vertex ids must be dense or
/// at least small nonnegative integers; ids not mentioned by any face are
/// rejected implicitly by the fan check.
pub fn build_bquad(quads: &[[VertexId; 4]]) -> Result<BQuadGraph, GraphError> {
    let n = quads
        .iter()
        .flat_map(|q| q.iter().copied())
        .max()
        .map_or(0, |m| m + 1);

    // colors from quadruple positions; conflicts mean the skeleton is not bipartite
    let mut colors: Vec<Option<Color>> = vec![None; n];
    for q in quads {
        for (i, &v) in q.iter().enumerate() {
            let c = if i % 2 == 0 { Color::White } else { Color::Black };
            match colors[v] {
                None => colors[v] = Some(c),
                Some(prev) if prev != c => return Err(GraphError::NonBipartite(v)),
                _ => {}
            }
        }
    }

    for (fi, q) in quads.iter().enumerate() {
        for i in 0..4 {
            for j in (i + 1)..4 {
                if q[i] == q[j] {
                    return Err(GraphError::DegenerateFace(fi));
                }
            }
        }
    }

    // canonical rotation: smaller white id first
    let faces: Vec<[VertexId; 4]> = quads
        .iter()
        .map(|&[a, b, c, d]| if c < a { [c, d, a, b] } else { [a, b, c, d] })
        .collect();

    // undirected edges (white, black) and incidences
    let mut edge_ids: BTreeMap<(VertexId, VertexId), EdgeId> = BTreeMap::new();
    let mut edges: Vec<(VertexId, VertexId)> = Vec::new();
    let mut edge_faces: Vec<Vec<FaceId>> = Vec::new();
    let mut face_edges: Vec<[EdgeId; 4]> = Vec::with_capacity(faces.len());
    let mut directed_seen: BTreeMap<(VertexId, VertexId), FaceId> = BTreeMap::new();

    for (fi, q) in faces.iter().enumerate() {
        let mut fe = [0usize; 4];
        for i in 0..4 {
            let (a, b) = (q[i], q[(i + 1) % 4]);
            let key = if colors[a] == Some(Color::White) { (a, b) } else { (b, a) };
            let id = *edge_ids.entry(key).or_insert_with(|| {
                edges.push(key);
                edge_faces.push(Vec::new());
                edges.len() - 1
            });
            if edge_faces[id].len() == 2 {
                return Err(GraphError::NonManifoldEdge(key.0, key.1));
            }
            if let Some(&other) = directed_seen.get(&(a, b)) {
                return Err(GraphError::InconsistentOrientation(other, fi));
            }
            directed_seen.insert((a, b), fi);
            if !edge_faces[id].contains(&fi) {
                edge_faces[id].push(fi);
            }
            fe[i] = id;
        }
        face_edges.push(fe);
    }

    // strong regularity: two faces share at most one edge
    let mut pair_count: BTreeMap<(FaceId, FaceId), EdgeId> = BTreeMap::new();
    for fs in &edge_faces {
        if fs.len() == 2 {
            let key = (fs[0].min(fs[1]), fs[0].max(fs[1]));
            if pair_count.contains_key(&key) {
                return Err(GraphError::StronglyIrregular(key.0, key.1));
            }
            pair_count.insert(key, 0);
        }
    }

    let colors: Vec<Color> = colors
        .into_iter()
        .map(|c| c.unwrap_or(Color::White))
        .collect();

    // Fan construction. Within face (z-, v-, z+, v+) the counterclockwise
    // order of the two edges at each corner is:
    //   z-: [z-,v-] then [z-,v+]     v-: [v-,z+] then [v-,z-]
    //   z+: [z+,v+] then [z+,v-]     v+: [v+,z-] then [v+,z+]
    let mut first_second: Vec<Vec<(EdgeId, EdgeId, FaceId)>> = vec![Vec::new(); n];
    for (fi, q) in faces.iter().enumerate() {
        let fe = face_edges[fi];
        // fe[i] joins q[i] and q[i+1]
        let pairs = [
            (q[0], fe[0], fe[3]),
            (q[1], fe[1], fe[0]),
            (q[2], fe[2], fe[1]),
            (q[3], fe[3], fe[2]),
        ];
        for &(v, first, second) in &pairs {
            first_second[v].push((first, second, fi));
        }
    }

    let mut fans: Vec<Fan> = Vec::with_capacity(n);
    let mut boundary_vertex = vec![false; n];
    for v in 0..n {
        let items = &first_second[v];
        if items.is_empty() {
            return Err(GraphError::NonManifoldVertex(v));
        }
        let by_first: BTreeMap<EdgeId, (EdgeId, FaceId)> = items
            .iter()
            .map(|&(first, second, f)| (first, (second, f)))
            .collect();
        if by_first.len() != items.len() {
            return Err(GraphError::NonManifoldVertex(v));
        }
        let seconds: Vec<EdgeId> = items.iter().map(|&(_, s, _)| s).collect();
        // an open fan starts at the unique first edge that is nobody's second
        let start = items
            .iter()
            .map(|&(first, _, _)| first)
            .find(|first| !seconds.contains(first));
        let (mut edge, closed) = match start {
            Some(e) => (e, false),
            None => (items[0].0, true),
        };
        let mut fan_faces = Vec::with_capacity(items.len());
        let mut fan_edges = vec![edge];
        loop {
            let Some(&(second, f)) = by_first.get(&edge) else {
                break;
            };
            fan_faces.push(f);
            if closed && second == fan_edges[0] {
                break;
            }
            fan_edges.push(second);
            edge = second;
            if fan_faces.len() > items.len() {
                return Err(GraphError::NonManifoldVertex(v));
            }
        }
        if fan_faces.len() != items.len() {
            return Err(GraphError::NonManifoldVertex(v));
        }
        boundary_vertex[v] = !closed;
        fans.push(Fan {
            faces: fan_faces,
            edges: fan_edges,
            closed,
        });
    }

    Ok(BQuadGraph {
        colors,
        faces,
        edges,
        face_edges,
        edge_faces,
        fans,
        boundary_vertex,
    })
}

/// Derive the white graph `G` and black graph `G*`: one edge of each per face.
pub fn derive_views(bq: &BQuadGraph) -> PrimalDualView {
    let n = bq.vertex_count();
    let mut g_edges = Vec::with_capacity(bq.face_count());
    let mut gstar_edges = Vec::with_capacity(bq.face_count());
    for q in bq.faces() {
        g_edges.push((q[0], q[2]));
        gstar_edges.push((q[1], q[3]));
    }
    let mut g_adj: Vec<Vec<(FaceId, VertexId)>> = vec![Vec::new(); n];
    let mut gstar_adj: Vec<Vec<(FaceId, VertexId)>> = vec![Vec::new(); n];
    for v in 0..n {
        let fan = bq.fan(v);
        for &f in &fan.faces {
            let q = bq.face(f);
            match bq.color(v) {
                Color::White => {
                    let other = if q[0] == v { q[2] } else { q[0] };
                    g_adj[v].push((f, other));
                }
                Color::Black => {
                    let other = if q[1] == v { q[3] } else { q[1] };
                    gstar_adj[v].push((f, other));
                }
            }
        }
    }
    PrimalDualView {
        g_edges,
        gstar_edges,
        g_adj,
        gstar_adj,
    }
}

/// Interior black vertices where the labelling violates the admissibility
/// condition `sum of alpha over incident faces = 2*pi`. Empty means admissible.
///
/// The condition is only defined at interior black vertices; boundary black
/// vertices are unconstrained.
pub fn check_admissible(bq: &BQuadGraph, alpha: &Labelling) -> Result<Vec<VertexId>, GraphError> {
    if alpha.values().len() != bq.face_count() {
        return Err(GraphError::MissingLabel {
            got: alpha.values().len(),
            want: bq.face_count(),
        });
    }
    let mut bad = Vec::new();
    for v in bq.black_vertices() {
        if bq.is_boundary_vertex(v) {
            continue;
        }
        let sum: f64 = bq.fan(v).faces.iter().map(|&f| alpha.alpha(f)).sum();
        if (sum - 2.0 * std::f64::consts::PI).abs() > ADMISSIBILITY_TOL {
            bad.push(v);
        }
    }
    Ok(bad)
}

/// Per-vertex boundary flags: a vertex is boundary iff one of its incident
/// edges lies on the topological boundary of the face complex.
pub fn classify_boundary(bq: &BQuadGraph) -> Vec<bool> {
    (0..bq.vertex_count())
        .map(|v| bq.is_boundary_vertex(v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_face() {
        let bq = build_bquad(&[[0, 1, 2, 3]]).unwrap();
        assert_eq!(bq.white_vertices().count(), 2);
        assert_eq!(bq.black_vertices().count(), 2);
        assert_eq!(bq.edge_count(), 4);
        assert_eq!(bq.face_count(), 1);
        assert!((0..4).all(|v| bq.is_boundary_vertex(v)));
        let view = derive_views(&bq);
        assert_eq!(view.g_edge(0), (0, 2));
        assert_eq!(view.gstar_edge(0), (1, 3));
    }

    /// n x n block of square-grid cells, vertices (i,j) -> (n+1)*i + j.
    fn square_block(n: usize) -> Vec<[VertexId; 4]> {
        let id = |i: usize, j: usize| (n + 1) * i + j;
        let mut quads = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let cycle = [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)];
                // rotate so a white (even-parity) vertex is first
                let q = if (i + j) % 2 == 0 {
                    cycle
                } else {
                    [cycle[1], cycle[2], cycle[3], cycle[0]]
                };
                quads.push(q);
            }
        }
        quads
    }

    #[test]
    fn two_by_two_block_counts() {
        let bq = build_bquad(&square_block(2)).unwrap();
        // brute enumeration: 9 vertices, parity-even ones are white (5 of them)
        assert_eq!(bq.vertex_count(), 9);
        assert_eq!(bq.white_vertices().count(), 5);
        assert_eq!(bq.black_vertices().count(), 4);
        assert_eq!(bq.face_count(), 4);
        assert_eq!(bq.edge_count(), 12);
        // only the center vertex (1,1) = 4 is interior (and it is white)
        for v in 0..9 {
            assert_eq!(bq.is_interior_vertex(v), v == 4, "vertex {v}");
        }
        let view = derive_views(&bq);
        assert_eq!(view.g_edge_count(), 4);
        // the interior white vertex has a closed fan of all four faces
        assert!(bq.fan(4).closed);
        assert_eq!(bq.fan(4).faces.len(), 4);
        assert_eq!(view.white_star(4).len(), 4);
    }

    #[test]
    fn three_by_three_interior_classification() {
        // 3x3 block of faces: interior vertices are (1,1),(1,2),(2,1),(2,2)
        let bq = build_bquad(&square_block(3)).unwrap();
        let interior: Vec<_> = (0..bq.vertex_count())
            .filter(|&v| bq.is_interior_vertex(v))
            .collect();
        assert_eq!(interior, vec![5, 6, 9, 10]);
        // exactly one interior white vertex ((1,1) and (2,2) are white; with
        // 16 vertices both diagonal interior ones are white, so count whites:
        let interior_white: Vec<_> = interior
            .iter()
            .copied()
            .filter(|&v| bq.is_white(v))
            .collect();
        assert_eq!(interior_white, vec![5, 10]);
    }

    #[test]
    fn non_bipartite_detected() {
        // second face lists vertex 1 (black per face 0) in a white slot
        let err = build_bquad(&[[0, 1, 2, 3], [1, 2, 4, 5]]).unwrap_err();
        assert!(matches!(err, GraphError::NonBipartite(_)));
    }

    #[test]
    fn non_manifold_edge_detected() {
        // edge (0,1) in three faces (orientations alternate so the edge
        // count trips before the directed-side check)
        let err = build_bquad(&[[0, 1, 2, 3], [6, 1, 0, 7], [0, 1, 8, 9]]).unwrap_err();
        assert!(matches!(err, GraphError::NonManifoldEdge(0, 1)));
    }

    #[test]
    fn inconsistent_orientation_detected() {
        // both faces traverse 0 -> 1
        let err = build_bquad(&[[0, 1, 2, 3], [0, 1, 4, 5]]).unwrap_err();
        assert!(matches!(err, GraphError::InconsistentOrientation(0, 1)));
    }

    #[test]
    fn admissibility_on_square_block() {
        let bq = build_bquad(&square_block(3)).unwrap();
        let pi = std::f64::consts::PI;
        let alpha = Labelling::new(vec![pi / 2.0; 9], &bq).unwrap();
        assert!(check_admissible(&bq, &alpha).unwrap().is_empty());
        // relabel the center face: both interior black vertices incident to
        // it are reported
        let center_face = bq
            .faces()
            .iter()
            .position(|q| q.contains(&6) && q.contains(&9))
            .unwrap();
        let mut vals = vec![pi / 2.0; 9];
        vals[center_face] = pi / 3.0;
        let alpha = Labelling::new(vals, &bq).unwrap();
        assert_eq!(check_admissible(&bq, &alpha).unwrap(), vec![6, 9]);
    }

    #[test]
    fn determinism() {
        let a = build_bquad(&square_block(2)).unwrap();
        let b = build_bquad(&square_block(2)).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.faces(), b.faces());
    }
}
