//! Structured P1 triangulation of the unit square with tagged boundary edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary-condition tag of an edge, as seen by the environmental field.
/// The swarm density is no-flux on every edge regardless of tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    DirichletSource,
    DirichletZero,
    NoFluxOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }
}

/// Location of the source segment: a sub-interval `[start, end]` of one side,
/// parametrized by the free coordinate (`y` on left/right, `x` on top/bottom).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    side: Side,
    start: f64,
    end: f64,
}

impl BoundarySpec {
    pub fn new(side: Side, start: f64, end: f64) -> Result<Self> {
        if !(0.0 <= start && start < end && end <= 1.0) {
            return Err(Error::invalid(format!(
                "source segment [{start}, {end}] must satisfy 0 <= a < b <= 1"
            )));
        }
        Ok(Self { side, start, end })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    fn contains(&self, side: Side, mid: [f64; 2]) -> bool {
        if side != self.side {
            return false;
        }
        let s = match side {
            Side::Left | Side::Right => mid[1],
            Side::Top | Side::Bottom => mid[0],
        };
        self.start <= s && s <= self.end
    }
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self {
            side: Side::Left,
            start: 0.25,
            end: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: Side,
    pub tag: EdgeTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    tagged: bool,
}

/// Result of [`Mesh::tag_boundary`]; carries a warning when the segment
/// matched no edge.
#[derive(Debug, Clone)]
pub struct Tagged {
    pub mesh: Mesh,
    pub source_edges: usize,
    pub warning: Option<String>,
}

impl Mesh {
    /// `(nx+1)(ny+1)` nodes numbered row-major by `(y, x)`; each cell is split
    /// along its lower-left to upper-right diagonal.
    pub fn unit_square(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::invalid(format!(
                "subdivision counts must be >= 1 (got {nx} x {ny})"
            )));
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([i as f64 / nx as f64, j as f64 / ny as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
        let mut edge = |a, b, side| {
            boundary_edges.push(BoundaryEdge {
                nodes: [a, b],
                side,
                tag: EdgeTag::NoFluxOnly,
            })
        };
        for i in 0..nx {
            edge(id(i, 0), id(i + 1, 0), Side::Bottom);
        }
        for j in 0..ny {
            edge(id(nx, j), id(nx, j + 1), Side::Right);
        }
        for i in (0..nx).rev() {
            edge(id(i + 1, ny), id(i, ny), Side::Top);
        }
        for j in (0..ny).rev() {
            edge(id(0, j + 1), id(0, j), Side::Left);
        }
        Ok(Self {
            nx,
            ny,
            nodes,
            triangles,
            boundary_edges,
            tagged: false,
        })
    }

    /// Tags edges whose midpoint lies on the segment as Dirichlet sources and
    /// every other boundary edge as homogeneous Dirichlet. Idempotent.
    pub fn tag_boundary(&self, spec: &BoundarySpec) -> Tagged {
        let mut mesh = self.clone();
        let mut count = 0;
        for e in &mut mesh.boundary_edges {
            let [a, b] = e.nodes;
            let mid = [
                0.5 * (self.nodes[a][0] + self.nodes[b][0]),
                0.5 * (self.nodes[a][1] + self.nodes[b][1]),
            ];
            e.tag = if spec.contains(e.side, mid) {
                count += 1;
                EdgeTag::DirichletSource
            } else {
                EdgeTag::DirichletZero
            };
        }
        mesh.tagged = true;
        let warning = (count == 0).then(|| {
            format!(
                "source segment {:?} [{}, {}] contains no boundary edge midpoint",
                spec.side, spec.start, spec.end
            )
        });
        Tagged {
            mesh,
            source_edges: count,
            warning,
        }
    }

    /// Homogeneous Dirichlet on the whole boundary (no source segment).
    pub fn tag_homogeneous(&self) -> Mesh {
        let mut mesh = self.clone();
        for e in &mut mesh.boundary_edges {
            e.tag = EdgeTag::DirichletZero;
        }
        mesh.tagged = true;
        mesh
    }

    pub fn subdivisions(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn is_tagged(&self) -> bool {
        self.tagged
    }

    pub fn vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices(t))
    }

    /// Nodes that are endpoints of at least one boundary edge, sorted.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut on = vec![false; self.n_nodes()];
        for e in &self.boundary_edges {
            on[e.nodes[0]] = true;
            on[e.nodes[1]] = true;
        }
        (0..self.n_nodes()).filter(|&i| on[i]).collect()
    }

    /// Outward normal of every boundary node, averaged over adjacent edges
    /// (corners get the diagonal).
    pub fn boundary_normals(&self) -> Vec<(usize, [f64; 2])> {
        let mut acc = vec![[0.0; 2]; self.n_nodes()];
        let mut hit = vec![false; self.n_nodes()];
        for e in &self.boundary_edges {
            let n = e.side.normal();
            for &v in &e.nodes {
                if !hit[v] || acc[v] != n {
                    acc[v][0] += n[0];
                    acc[v][1] += n[1];
                }
                hit[v] = true;
            }
        }
        (0..self.n_nodes())
            .filter(|&i| hit[i])
            .map(|i| {
                let [x, y] = acc[i];
                let len = (x * x + y * y).sqrt();
                (i, [x / len, y / len])
            })
            .collect()
    }
}

pub fn signed_area(v: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
}
