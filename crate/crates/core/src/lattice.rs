//! Finite graphs: boxes in Z^d, their wired quotients, edge contractions and
//! induced subgraphs.
//!
//! Every graph remembers the "root" graph it was derived from. Vertices are
//! classes of root vertices, ordered by their smallest root id, so vertex 0
//! always contains root vertex 0. Edges keep their root [`EdgeId`] and their
//! position through every quotient; contracted edges survive as self-loops.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Schema version of [`GraphListing`].
pub const GRAPH_LISTING_VERSION: u32 = 1;

/// Edge label, stable across quotients and subgraphs of the same root graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

/// An oriented edge. For box edges the tail is the coordinatewise smaller
/// endpoint `x` and the head is `x + e_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub tail: usize,
    pub head: usize,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.tail == self.head
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Box { dim: usize, radius: usize },
    Fixture { name: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Derivation {
    WireBoundary,
    Contract { edges: Vec<EdgeId> },
    Induce { root_vertices: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    origin: Origin,
    history: Vec<Derivation>,
    /// Root vertex ids making up each vertex, sorted ascending.
    classes: Vec<Vec<usize>>,
    root_to_vertex: Vec<Option<usize>>,
    edges: Vec<Edge>,
    /// Root endpoints `(tail, head)` of each edge.
    root_ends: Vec<(usize, usize)>,
    edge_pos: HashMap<EdgeId, usize>,
}

fn box_side(radius: usize) -> usize {
    2 * radius + 1
}

impl Graph {
    fn from_parts(
        origin: Origin,
        history: Vec<Derivation>,
        classes: Vec<Vec<usize>>,
        root_count: usize,
        edges: Vec<Edge>,
        root_ends: Vec<(usize, usize)>,
    ) -> Self {
        let mut root_to_vertex = vec![None; root_count];
        for (v, class) in classes.iter().enumerate() {
            for &r in class {
                root_to_vertex[r] = Some(v);
            }
        }
        let edge_pos = edges.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        Graph {
            origin,
            history,
            classes,
            root_to_vertex,
            edges,
            root_ends,
            edge_pos,
        }
    }

    /// Fixture graph on `n` vertices with the given oriented edges.
    pub fn from_edges(name: &str, n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut edges = Vec::with_capacity(pairs.len());
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if a >= n {
                return Err(Error::VertexOutOfRange(a));
            }
            if b >= n {
                return Err(Error::VertexOutOfRange(b));
            }
            edges.push(Edge {
                id: EdgeId(i),
                tail: a,
                head: b,
            });
        }
        let classes = (0..n).map(|v| vec![v]).collect();
        let root_ends = pairs.to_vec();
        Ok(Self::from_parts(
            Origin::Fixture {
                name: name.to_string(),
            },
            Vec::new(),
            classes,
            n,
            edges,
            root_ends,
        ))
    }

    /// Complete graph K_n.
    pub fn complete(n: usize) -> Self {
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                pairs.push((a, b));
            }
        }
        Self::from_edges(&format!("K{n}"), n, &pairs).expect("valid fixture")
    }

    /// Path with `n` vertices.
    pub fn path(n: usize) -> Self {
        let pairs: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(&format!("P{n}"), n, &pairs).expect("valid fixture")
    }

    /// Cycle with `n` vertices; edge `i` joins `i` and `i + 1 mod n`.
    pub fn cycle(n: usize) -> Self {
        let pairs: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(&format!("C{n}"), n, &pairs).expect("valid fixture")
    }

    /// The box `[-n, n]^d` with nearest-neighbour edges.
    pub fn build_box(dim: usize, radius: usize) -> Self {
        let side = box_side(radius);
        let count = side.pow(dim as u32);
        let mut edges = Vec::new();
        let mut coords = vec![0usize; dim];
        for root in 0..count {
            let mut r = root;
            for c in coords.iter_mut() {
                *c = r % side;
                r /= side;
            }
            let mut stride = 1;
            for c in &coords {
                if c + 1 < side {
                    edges.push(Edge {
                        id: EdgeId(edges.len()),
                        tail: root,
                        head: root + stride,
                    });
                }
                stride *= side;
            }
        }
        let classes = (0..count).map(|v| vec![v]).collect();
        let root_ends = edges.iter().map(|e| (e.tail, e.head)).collect();
        Self::from_parts(
            Origin::Box { dim, radius },
            Vec::new(),
            classes,
            count,
            edges,
            root_ends,
        )
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn history(&self) -> &[Derivation] {
        &self.history
    }

    /// `(dim, radius)` when the root graph is a box.
    pub fn box_shape(&self) -> Option<(usize, usize)> {
        match self.origin {
            Origin::Box { dim, radius } => Some((dim, radius)),
            Origin::Fixture { .. } => None,
        }
    }

    /// True for an untouched box (no quotient or restriction applied).
    pub fn is_plain_box(&self) -> bool {
        self.box_shape().is_some() && self.history.is_empty()
    }

    pub fn is_wired_box(&self) -> bool {
        self.box_shape().is_some() && self.history == [Derivation::WireBoundary]
    }

    /// Short human-readable identifier used in reports.
    pub fn label(&self) -> String {
        let mut s = match &self.origin {
            Origin::Box { dim, radius } => format!("box(d={dim},n={radius})"),
            Origin::Fixture { name } => name.clone(),
        };
        for step in &self.history {
            match step {
                Derivation::WireBoundary => s.push_str("/wired"),
                Derivation::Contract { edges } => s.push_str(&format!("/contract{}", edges.len())),
                Derivation::Induce { root_vertices } => {
                    s.push_str(&format!("[induced{}]", root_vertices.len()))
                }
            }
        }
        s
    }

    pub fn num_vertices(&self) -> usize {
        self.classes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, pos: usize) -> &Edge {
        &self.edges[pos]
    }

    pub fn edge_position(&self, id: EdgeId) -> Option<usize> {
        self.edge_pos.get(&id).copied()
    }

    pub fn num_loops(&self) -> usize {
        self.edges.iter().filter(|e| e.is_loop()).count()
    }

    /// Positions of the edges that are not self-loops.
    pub fn non_loop_positions(&self) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&i| !self.edges[i].is_loop())
            .collect()
    }

    /// Root vertex ids collapsed into vertex `v`.
    pub fn vertex_class(&self, v: usize) -> &[usize] {
        &self.classes[v]
    }

    pub fn root_vertex_count(&self) -> usize {
        self.root_to_vertex.len()
    }

    pub fn vertex_of_root(&self, root: usize) -> Option<usize> {
        self.root_to_vertex.get(root).copied().flatten()
    }

    /// Lattice coordinates of a root vertex of a box.
    pub fn root_coords(&self, root: usize) -> Option<Vec<i64>> {
        let (dim, radius) = self.box_shape()?;
        let side = box_side(radius);
        let mut r = root;
        let mut out = Vec::with_capacity(dim);
        for _ in 0..dim {
            out.push((r % side) as i64 - radius as i64);
            r /= side;
        }
        (r == 0).then_some(out)
    }

    /// Root id of a lattice point, if it lies in the root box.
    pub fn root_at(&self, coords: &[i64]) -> Option<usize> {
        let (dim, radius) = self.box_shape()?;
        if coords.len() != dim {
            return None;
        }
        let side = box_side(radius);
        let mut root = 0;
        let mut stride = 1;
        for &c in coords {
            let shifted = c + radius as i64;
            if shifted < 0 || shifted >= side as i64 {
                return None;
            }
            root += shifted as usize * stride;
            stride *= side;
        }
        Some(root)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.num_vertices();
        if n == 0 {
            return false;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }

    /// Neighbour lists (multi-edges repeated, loops skipped).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices()];
        for e in &self.edges {
            if !e.is_loop() {
                adj[e.tail].push(e.head);
                adj[e.head].push(e.tail);
            }
        }
        adj
    }

    /// Inner boundary of a plain box: vertices with a lattice neighbour outside.
    pub fn boundary_vertices(&self) -> Result<Vec<usize>> {
        if !self.is_plain_box() {
            return Err(Error::NotABox(self.label()));
        }
        let (_, radius) = self.box_shape().expect("box");
        let r = radius as i64;
        Ok((0..self.num_vertices())
            .filter(|&v| {
                let c = self.root_coords(v).expect("box vertex");
                c.iter().any(|&x| x.abs() == r)
            })
            .collect())
    }

    /// Positions of box edges whose endpoints both lie on the boundary.
    pub fn boundary_boundary_edges(&self) -> Result<Vec<usize>> {
        let boundary: BTreeSet<usize> = self.boundary_vertices()?.into_iter().collect();
        Ok((0..self.num_edges())
            .filter(|&i| {
                let e = &self.edges[i];
                boundary.contains(&e.tail) && boundary.contains(&e.head)
            })
            .collect())
    }

    /// `Λ^w = Λ/∂Λ`: identify all boundary vertices of a box.
    pub fn wire_boundary(&self) -> Result<Graph> {
        let boundary = self.boundary_vertices()?;
        let mut uf = UnionFind::new(self.num_vertices());
        for w in boundary.windows(2) {
            uf.union(w[0], w[1]);
        }
        Ok(self.quotient(uf, Derivation::WireBoundary))
    }

    /// `G/F`: identify the endpoints of every edge in `F`.
    pub fn contract_edges(&self, edges: &[EdgeId]) -> Result<Graph> {
        let mut uf = UnionFind::new(self.num_vertices());
        for id in edges {
            let pos = self.edge_position(*id).ok_or(Error::EdgeOutOfRange(id.0))?;
            let e = self.edges[pos];
            uf.union(e.tail, e.head);
        }
        Ok(self.quotient(
            uf,
            Derivation::Contract {
                edges: edges.to_vec(),
            },
        ))
    }

    fn quotient(&self, mut uf: UnionFind, step: Derivation) -> Graph {
        let n = self.num_vertices();
        // Old vertices are ordered by smallest root id, so ordering the new
        // classes by their smallest old member keeps the global convention.
        let mut rep_index: HashMap<usize, usize> = HashMap::new();
        let mut new_of_old = vec![0; n];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for (v, slot) in new_of_old.iter_mut().enumerate() {
            let rep = uf.find(v);
            let idx = *rep_index.entry(rep).or_insert_with(|| {
                classes.push(Vec::new());
                classes.len() - 1
            });
            *slot = idx;
            classes[idx].extend_from_slice(&self.classes[v]);
        }
        for c in classes.iter_mut() {
            c.sort_unstable();
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                id: e.id,
                tail: new_of_old[e.tail],
                head: new_of_old[e.head],
            })
            .collect();
        let mut history = self.history.clone();
        history.push(step);
        Self::from_parts(
            self.origin.clone(),
            history,
            classes,
            self.root_vertex_count(),
            edges,
            self.root_ends.clone(),
        )
    }

    /// Subgraph induced by the given vertices (indices into this graph).
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Result<Graph> {
        let mut keep: Vec<usize> = vertices.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut new_of_old = vec![None; self.num_vertices()];
        for (i, &v) in keep.iter().enumerate() {
            if v >= self.num_vertices() {
                return Err(Error::VertexOutOfRange(v));
            }
            new_of_old[v] = Some(i);
        }
        let (edges, root_ends): (Vec<Edge>, Vec<(usize, usize)>) = self
            .edges
            .iter()
            .zip(&self.root_ends)
            .filter_map(|(e, &re)| {
                let kept = Edge {
                    id: e.id,
                    tail: new_of_old[e.tail]?,
                    head: new_of_old[e.head]?,
                };
                Some((kept, re))
            })
            .unzip();
        let classes: Vec<Vec<usize>> = keep.iter().map(|&v| self.classes[v].clone()).collect();
        let roots: Vec<usize> = classes.iter().flatten().copied().collect();
        let mut history = self.history.clone();
        history.push(Derivation::Induce {
            root_vertices: roots,
        });
        let g = Self::from_parts(
            self.origin.clone(),
            history,
            classes,
            self.root_vertex_count(),
            edges,
            root_ends,
        );
        if !g.is_connected() {
            return Err(Error::Disconnected(g.num_vertices()));
        }
        Ok(g)
    }

    /// Partition of the root vertices induced by this graph's vertex classes.
    pub fn root_partition(&self) -> BTreeSet<Vec<usize>> {
        self.classes.iter().cloned().collect()
    }

    /// Edge position of the lattice edge from the origin to `+e_1`.
    pub fn central_edge(&self) -> Option<usize> {
        let (dim, _) = self.box_shape()?;
        let origin = vec![0i64; dim];
        let mut next = origin.clone();
        next[0] = 1;
        let id = self.root_edge_id(self.root_at(&origin)?, self.root_at(&next)?)?;
        self.edge_position(id)
    }

    /// Id of the root box edge joining root vertices `tail` and `head`.
    fn root_edge_id(&self, tail: usize, head: usize) -> Option<EdgeId> {
        let (dim, radius) = self.box_shape()?;
        let side = box_side(radius);
        // build_box emits, for each root in order, one edge per forward direction
        let mut id = 0;
        let mut stride = 1;
        let mut dir = None;
        for i in 0..dim {
            if head == tail + stride {
                dir = Some(i);
            }
            stride *= side;
        }
        let dir = dir?;
        let tc = self.root_coords(tail)?;
        if tc[dir] >= radius as i64 {
            return None;
        }
        let forward_count = |root: usize| -> usize {
            let c = self.root_coords(root).expect("root in box");
            c.iter().filter(|&&x| x < radius as i64).count()
        };
        for r in 0..tail {
            id += forward_count(r);
        }
        id += tc[..dir].iter().filter(|&&x| x < radius as i64).count();
        Some(EdgeId(id))
    }

    /// Elementary faces of a box-derived graph. Each entry lists four edge
    /// positions with the sign under which the oriented gradients sum to zero.
    pub fn plaquettes(&self) -> Vec<[(usize, f64); 4]> {
        let Some((dim, radius)) = self.box_shape() else {
            return Vec::new();
        };
        let side = box_side(radius);
        let strides: Vec<usize> = (0..dim).map(|i| side.pow(i as u32)).collect();
        let pos_of = |a: usize, b: usize| -> Option<usize> {
            self.root_edge_id(a, b).and_then(|id| self.edge_position(id))
        };
        let mut out = Vec::new();
        for root in 0..side.pow(dim as u32) {
            let c = self.root_coords(root).expect("root in box");
            for i in 0..dim {
                for j in i + 1..dim {
                    if c[i] >= radius as i64 || c[j] >= radius as i64 {
                        continue;
                    }
                    let (xi, xj) = (root + strides[i], root + strides[j]);
                    let xij = xi + strides[j];
                    let face = (|| {
                        Some([
                            (pos_of(root, xi)?, 1.0),
                            (pos_of(xi, xij)?, 1.0),
                            (pos_of(xj, xij)?, -1.0),
                            (pos_of(root, xj)?, -1.0),
                        ])
                    })();
                    out.extend(face);
                }
            }
        }
        out
    }

    /// Root endpoints of the edge at `pos`.
    pub fn root_ends(&self, pos: usize) -> (usize, usize) {
        self.root_ends[pos]
    }

    /// Edge permutation induced by a map on root vertices: entry `i` is the
    /// position of the image of edge `i`. Orientation is ignored. Returns
    /// `None` when the map does not carry edges onto edges bijectively.
    pub fn edge_image(&self, root_map: impl Fn(usize) -> usize) -> Option<Vec<usize>> {
        let mut by_ends: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (i, &(a, b)) in self.root_ends.iter().enumerate() {
            by_ends.entry((a.min(b), a.max(b))).or_default().push(i);
        }
        let mut used = vec![false; self.edges.len()];
        let mut out = Vec::with_capacity(self.edges.len());
        for &(a, b) in &self.root_ends {
            let (x, y) = (root_map(a), root_map(b));
            let candidates = by_ends.get(&(x.min(y), x.max(y)))?;
            let j = *candidates.iter().find(|&&j| !used[j])?;
            used[j] = true;
            out.push(j);
        }
        Some(out)
    }

    pub fn to_listing(&self) -> GraphListing {
        GraphListing {
            version: GRAPH_LISTING_VERSION,
            label: self.label(),
            origin: self.origin.clone(),
            history: self.history.clone(),
            vertex_classes: self.classes.clone(),
            edges: self
                .edges
                .iter()
                .zip(&self.root_ends)
                .map(|(e, &(rt, rh))| ListedEdge {
                    id: e.id.0,
                    tail: e.tail,
                    head: e.head,
                    is_loop: e.is_loop(),
                    root_tail: rt,
                    root_head: rh,
                })
                .collect(),
        }
    }

    pub fn from_listing(listing: &GraphListing) -> Result<Graph> {
        if listing.version != GRAPH_LISTING_VERSION {
            return Err(Error::VersionMismatch {
                expected: GRAPH_LISTING_VERSION,
                found: listing.version,
            });
        }
        let root_count = listing
            .vertex_classes
            .iter()
            .flatten()
            .max()
            .map_or(0, |m| m + 1);
        let edges = listing
            .edges
            .iter()
            .map(|e| Edge {
                id: EdgeId(e.id),
                tail: e.tail,
                head: e.head,
            })
            .collect();
        let root_ends = listing.edges.iter().map(|e| (e.root_tail, e.root_head)).collect();
        Ok(Self::from_parts(
            listing.origin.clone(),
            listing.history.clone(),
            listing.vertex_classes.clone(),
            root_count,
            edges,
            root_ends,
        ))
    }
}

/// Versioned adjacency listing embedded in run manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphListing {
    pub version: u32,
    pub label: String,
    pub origin: Origin,
    pub history: Vec<Derivation>,
    pub vertex_classes: Vec<Vec<usize>>,
    pub edges: Vec<ListedEdge>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ListedEdge {
    pub id: usize,
    pub tail: usize,
    pub head: usize,
    #[serde(rename = "loop")]
    pub is_loop: bool,
    pub root_tail: usize,
    pub root_head: usize,
}

/// Disjoint-set forest with path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // smaller root wins so representatives stay deterministic
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge_root_pairs(g: &Graph) -> BTreeSet<(Vec<i64>, Vec<i64>)> {
        g.edges()
            .iter()
            .map(|e| {
                let t = g.root_coords(g.vertex_class(e.tail)[0]).unwrap();
                let h = g.root_coords(g.vertex_class(e.head)[0]).unwrap();
                (t, h)
            })
            .collect()
    }

    #[test]
    fn box_counts() {
        let g = Graph::build_box(2, 1);
        assert_eq!((g.num_vertices(), g.num_edges()), (9, 12));
        let g = Graph::build_box(1, 2);
        assert_eq!((g.num_vertices(), g.num_edges()), (5, 4));
        let g = Graph::build_box(2, 3);
        assert_eq!((g.num_vertices(), g.num_edges()), (49, 84));
    }

    #[test]
    fn box_edge_count_matches_enumeration() {
        // brute force: all pairs of lattice points at l1 distance one
        for (d, n) in [(1, 3), (2, 2), (2, 3), (3, 1), (3, 2)] {
            let g = Graph::build_box(d, n);
            let pts: Vec<Vec<i64>> = (0..g.num_vertices())
                .map(|v| g.root_coords(v).unwrap())
                .collect();
            let mut count = 0;
            for a in &pts {
                for b in &pts {
                    let dist: i64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                    if dist == 1 && a < b {
                        count += 1;
                    }
                }
            }
            assert_eq!(g.num_edges(), count, "d={d} n={n}");
            let side = 2 * n + 1;
            assert_eq!(g.num_edges(), d * side.pow(d as u32 - 1) * (side - 1));
        }
    }

    #[test]
    fn edges_are_oriented_coordinatewise() {
        let g = Graph::build_box(3, 1);
        for e in g.edges() {
            let t = g.root_coords(e.tail).unwrap();
            let h = g.root_coords(e.head).unwrap();
            assert!(t.iter().zip(&h).all(|(a, b)| a <= b));
        }
    }

    #[test]
    fn boundary_sizes() {
        let g = Graph::build_box(2, 1);
        let b = g.boundary_vertices().unwrap();
        assert_eq!(b.len(), 8);
        assert!(!b.contains(&g.root_at(&[0, 0]).unwrap()));

        let g = Graph::build_box(1, 2);
        let b = g.boundary_vertices().unwrap();
        let coords: Vec<_> = b.iter().map(|&v| g.root_coords(v).unwrap()[0]).collect();
        assert_eq!(coords, vec![-2, 2]);

        let g = Graph::build_box(2, 2);
        assert_eq!(g.boundary_vertices().unwrap().len(), 25 - 9);
    }

    #[test]
    fn boundary_requires_plain_box() {
        assert!(matches!(
            Graph::complete(3).boundary_vertices(),
            Err(Error::NotABox(_))
        ));
        let w = Graph::build_box(2, 1).wire_boundary().unwrap();
        assert!(w.boundary_vertices().is_err());
    }

    #[test]
    fn wired_box_counts() {
        let w = Graph::build_box(2, 1).wire_boundary().unwrap();
        assert_eq!(w.num_vertices(), 2);
        assert_eq!(w.num_loops(), 8);
        assert_eq!(w.num_edges() - w.num_loops(), 4);

        let w = Graph::build_box(1, 1).wire_boundary().unwrap();
        assert_eq!(w.num_vertices(), 2);
        assert_eq!(w.num_loops(), 0);
        assert_eq!(w.num_edges(), 2);

        for (d, n) in [(2, 2), (2, 3), (3, 2), (1, 4)] {
            let g = Graph::build_box(d, n);
            let b = g.boundary_vertices().unwrap().len();
            let w = g.wire_boundary().unwrap();
            assert_eq!(w.num_vertices(), g.num_vertices() - b + 1);
            assert!(w.is_connected());
        }
        let w = Graph::build_box(2, 2).wire_boundary().unwrap();
        assert_eq!(w.num_vertices(), 10);
    }

    #[test]
    fn wired_boundary_class_is_ground() {
        let w = Graph::build_box(2, 3).wire_boundary().unwrap();
        assert_eq!(w.vertex_class(0).len(), 24);
        assert!(w.vertex_class(0).contains(&0));
    }

    #[test]
    fn quotients_preserve_edge_ids() {
        let g = Graph::build_box(2, 2);
        let w = g.wire_boundary().unwrap();
        let ids: Vec<_> = g.edges().iter().map(|e| e.id).collect();
        let wids: Vec<_> = w.edges().iter().map(|e| e.id).collect();
        assert_eq!(ids, wids);
        let c = g.contract_edges(&[EdgeId(0), EdgeId(5)]).unwrap();
        assert_eq!(c.num_edges(), g.num_edges());
    }

    #[test]
    fn contract_triangle_edge() {
        let k3 = Graph::complete(3);
        let c = k3.contract_edges(&[EdgeId(0)]).unwrap();
        assert_eq!(c.num_vertices(), 2);
        assert_eq!(c.num_loops(), 1);
        let parallel: Vec<_> = c.edges().iter().filter(|e| !e.is_loop()).collect();
        assert_eq!(parallel.len(), 2);
        assert_ne!(parallel[0].id, parallel[1].id);
    }

    #[test]
    fn contract_nothing_is_identity() {
        let g = Graph::build_box(2, 1);
        let c = g.contract_edges(&[]).unwrap();
        assert_eq!(c.edges(), g.edges());
        assert_eq!(c.root_partition(), g.root_partition());
    }

    #[test]
    fn contracting_boundary_edges_equals_wiring() {
        for (d, n) in [(2, 1), (2, 2), (3, 1)] {
            let g = Graph::build_box(d, n);
            let bb: Vec<EdgeId> = g
                .boundary_boundary_edges()
                .unwrap()
                .into_iter()
                .map(|p| g.edge(p).id)
                .collect();
            if d == 2 && n == 1 {
                assert_eq!(bb.len(), 8);
            }
            let c = g.contract_edges(&bb).unwrap();
            let w = g.wire_boundary().unwrap();
            assert_eq!(c.root_partition(), w.root_partition());
            assert_eq!(c.edges(), w.edges());
        }
    }

    #[test]
    fn contract_spanning_subset_then_wire() {
        // contracting only part of the boundary cycle and identifying the rest
        let g = Graph::build_box(2, 2);
        let bb = g.boundary_boundary_edges().unwrap();
        let half: Vec<EdgeId> = bb.iter().step_by(2).map(|&p| g.edge(p).id).collect();
        let c = g.contract_edges(&half).unwrap();
        let boundary_roots: BTreeSet<usize> = g.boundary_vertices().unwrap().into_iter().collect();
        let mut uf = UnionFind::new(c.num_vertices());
        let bverts: Vec<usize> = (0..c.num_vertices())
            .filter(|&v| c.vertex_class(v).iter().any(|r| boundary_roots.contains(r)))
            .collect();
        for w in bverts.windows(2) {
            uf.union(w[0], w[1]);
        }
        let q = c.quotient(uf, Derivation::WireBoundary);
        assert_eq!(q.root_partition(), g.wire_boundary().unwrap().root_partition());
    }

    #[test]
    fn induced_subgraph_cases() {
        let big = Graph::build_box(2, 2);
        let inner: Vec<usize> = (0..big.num_vertices())
            .filter(|&v| big.root_coords(v).unwrap().iter().all(|c| c.abs() <= 1))
            .collect();
        let sub = big.induced_subgraph(&inner).unwrap();
        let small = Graph::build_box(2, 1);
        assert_eq!(sub.num_vertices(), 9);
        assert_eq!(edge_root_pairs(&sub), edge_root_pairs(&small));

        let p = Graph::path(5).induced_subgraph(&[1, 2, 3]).unwrap();
        assert_eq!((p.num_vertices(), p.num_edges()), (3, 2));

        let corner = big.root_at(&[2, 2]).unwrap();
        let rest: Vec<usize> = (0..25).filter(|&v| v != corner).collect();
        let s = big.induced_subgraph(&rest).unwrap();
        assert_eq!((s.num_vertices(), s.num_edges()), (24, 38));

        let big = Graph::build_box(2, 3);
        let corner = big.root_at(&[3, 3]).unwrap();
        let rest: Vec<usize> = (0..49).filter(|&v| v != corner).collect();
        let s = big.induced_subgraph(&rest).unwrap();
        assert_eq!((s.num_vertices(), s.num_edges()), (48, 82));
    }

    #[test]
    fn induced_subgraph_rejects_disconnected() {
        let err = Graph::path(5).induced_subgraph(&[0, 1, 3, 4]).unwrap_err();
        assert!(matches!(err, Error::Disconnected(4)));
    }

    #[test]
    fn plaquette_count() {
        assert_eq!(Graph::build_box(2, 1).plaquettes().len(), 4);
        assert_eq!(Graph::build_box(2, 3).plaquettes().len(), 36);
        assert_eq!(Graph::build_box(3, 1).plaquettes().len(), 3 * 4 * 3);
        assert!(Graph::build_box(1, 3).plaquettes().is_empty());
        let w = Graph::build_box(2, 2).wire_boundary().unwrap();
        assert_eq!(w.plaquettes().len(), 16);
    }

    #[test]
    fn central_edge_found() {
        let g = Graph::build_box(2, 3);
        let e = g.edge(g.central_edge().unwrap());
        assert_eq!(g.root_coords(e.tail).unwrap(), vec![0, 0]);
        assert_eq!(g.root_coords(e.head).unwrap(), vec![1, 0]);
        let w = g.wire_boundary().unwrap();
        assert_eq!(w.central_edge(), g.central_edge());
    }

    #[test]
    fn listing_round_trip() {
        let w = Graph::build_box(2, 2).wire_boundary().unwrap();
        let listing = w.to_listing();
        let json = serde_json::to_string(&listing).unwrap();
        let back: GraphListing = serde_json::from_str(&json).unwrap();
        assert_eq!(Graph::from_listing(&back).unwrap(), w);
        let mut bad = listing;
        bad.version = 99;
        assert!(Graph::from_listing(&bad).is_err());
    }
}
