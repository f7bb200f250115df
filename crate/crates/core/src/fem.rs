//! P1 finite-element operators.
//!
//! Conventions (`φ_i` the nodal hat functions):
//!
//! * mass `M_ij = ∫ φ_i φ_j`
//! * stiffness `A_ij = D ∫ ∇φ_i·∇φ_j`
//! * advection `B_F,ij = ∫ (F·∇φ_j) φ_i` with `F` interpolated in P1
//! * transport tensors `Bx_ijk = ∫ ∂_x φ_j φ_i φ_k`, `By_ijk` likewise
//! * reaction tensor `C_ijk = ∫ φ_i φ_j φ_k`
//!
//! All element integrals are evaluated in closed form, so they are exact for
//! the polynomial degrees involved (at most cubic).

use crate::error::{check_len, Error, Result};
use crate::mesh::{EdgeTag, Mesh};
use crate::sparse::SparseMatrix;

/// Constant gradients of the three barycentric hat functions.
pub fn p1_gradients(v: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let twice_area =
        (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) / twice_area, (b[0] - a[0]) / twice_area];
    }
    g
}

pub fn element_mass(v: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let a = crate::mesh::signed_area(v).abs();
    let mut m = [[a / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = a / 6.0;
    }
    m
}

pub fn element_stiffness(v: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let a = crate::mesh::signed_area(v).abs();
    let g = p1_gradients(v);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = a * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    k
}

/// `∫ φ_i φ_j φ_k` on one element: `2|T| a!b!c!/(a+b+c+2)!` for the
/// multiplicities of each vertex.
pub fn element_triple(v: &[[f64; 2]; 3]) -> [[[f64; 3]; 3]; 3] {
    let a = crate::mesh::signed_area(v).abs();
    let mut c = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                c[i][j][k] = if i == j && j == k {
                    a / 10.0
                } else if i == j || j == k || i == k {
                    a / 30.0
                } else {
                    a / 60.0
                };
            }
        }
    }
    c
}

/// `∫ ∂_d φ_j φ_i φ_k` on one element, indexed `[i][j][k]`.
pub fn element_transport(v: &[[f64; 2]; 3], dir: usize) -> [[[f64; 3]; 3]; 3] {
    let m = element_mass(v);
    let g = p1_gradients(v);
    let mut b = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                b[i][j][k] = g[j][dir] * m[i][k];
            }
        }
    }
    b
}

fn assemble_matrix<F>(mesh: &Mesh, mut local: F) -> SparseMatrix
where
    F: FnMut(usize, &[[f64; 2]; 3]) -> [[f64; 3]; 3],
{
    let n = mesh.n_nodes();
    let mut t = Vec::with_capacity(9 * mesh.triangles().len());
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let lm = local(e, &mesh.vertices(e));
        for a in 0..3 {
            for b in 0..3 {
                t.push((tri[a], tri[b], lm[a][b]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, t)
}

pub fn assemble_mass(mesh: &Mesh) -> SparseMatrix {
    assemble_matrix(mesh, |_, v| element_mass(v))
}

pub fn assemble_stiffness(mesh: &Mesh, diffusion: f64) -> Result<SparseMatrix> {
    if !(diffusion > 0.0) || !diffusion.is_finite() {
        return Err(Error::invalid(format!(
            "diffusion coefficient must be positive, got {diffusion}"
        )));
    }
    Ok(assemble_matrix(mesh, |_, v| {
        let mut k = element_stiffness(v);
        k.iter_mut().flatten().for_each(|x| *x *= diffusion);
        k
    }))
}

/// `B_F,ij = ∫ (F·∇φ_j) φ_i` for a nodal velocity field `F`.
pub fn assemble_advection(mesh: &Mesh, flow: &[[f64; 2]]) -> Result<SparseMatrix> {
    check_len("advection velocity field", mesh.n_nodes(), flow.len())?;
    Ok(assemble_matrix(mesh, |e, v| {
        let tri = mesh.triangles()[e];
        let m = element_mass(v);
        let g = p1_gradients(v);
        let mut b = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i][j] = (0..3)
                    .map(|k| {
                        let f = flow[tri[k]];
                        (f[0] * g[j][0] + f[1] * g[j][1]) * m[i][k]
                    })
                    .sum();
            }
        }
        b
    }))
}

/// Sparse rank-3 tensor `T_ijk` (test index `i`, trial index `j`, control
/// index `k`) stored as a sorted coordinate list.
///
/// Each entry also records its slot in the `(i, j)` pattern matrix so that
/// contraction with a control field is a single pass over the entries.
#[derive(Debug, Clone)]
pub struct Rank3Tensor {
    n: usize,
    index: Vec<[usize; 3]>,
    values: Vec<f64>,
    pattern: SparseMatrix,
    slots: Vec<usize>,
}

impl Rank3Tensor {
    pub fn from_entries(n: usize, mut entries: Vec<([usize; 3], f64)>) -> Self {
        entries.sort_by_key(|a| a.0);
        let mut index: Vec<[usize; 3]> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        for (ijk, v) in entries {
            assert!(ijk.iter().all(|&x| x < n), "tensor index {ijk:?} out of range");
            if index.last() == Some(&ijk) {
                *values.last_mut().unwrap() += v;
            } else {
                index.push(ijk);
                values.push(v);
            }
        }
        let pattern = SparseMatrix::from_triplets(n, n, index.iter().map(|&[i, j, _]| (i, j, 0.0)));
        let slots = index
            .iter()
            .map(|&[i, j, _]| pattern.slot(i, j).expect("pattern built from entries"))
            .collect();
        Self {
            n,
            index,
            values,
            pattern,
            slots,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = ([usize; 3], f64)> + '_ {
        self.index.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.index
            .binary_search(&[i, j, k])
            .map_or(0.0, |p| self.values[p])
    }

    /// Zero matrix with the `(i, j)` sparsity of the tensor.
    pub fn pattern(&self) -> &SparseMatrix {
        &self.pattern
    }

    /// `(T c)_ij = Σ_k T_ijk c_k`.
    pub fn contract(&self, c: &[f64]) -> Result<SparseMatrix> {
        check_len("tensor contraction", self.n, c.len())?;
        let mut out = self.pattern.clone();
        let vals = out.values_mut();
        for ((&[_, _, k], &v), &s) in self.index.iter().zip(&self.values).zip(&self.slots) {
            vals[s] += v * c[k];
        }
        Ok(out)
    }

    /// `g_k = Σ_ij a_i T_ijk b_j`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        check_len("tensor bilinear form (test side)", self.n, a.len())?;
        check_len("tensor bilinear form (trial side)", self.n, b.len())?;
        let mut g = vec![0.0; self.n];
        for (&[i, j, k], &v) in self.index.iter().zip(&self.values) {
            g[k] += a[i] * v * b[j];
        }
        Ok(g)
    }

    /// The tensor with test and trial indices exchanged, so that
    /// `swap_test_trial().contract(c) == contract(c)ᵀ`.
    pub fn swap_test_trial(&self) -> Self {
        Self::from_entries(
            self.n,
            self.entries().map(|([i, j, k], v)| ([j, i, k], v)).collect(),
        )
    }

    /// Sums out one index (0 = test, 1 = trial, 2 = control); the two
    /// remaining indices keep their order.
    pub fn sum_over(&self, axis: usize) -> SparseMatrix {
        assert!(axis < 3);
        let keep = match axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        SparseMatrix::from_triplets(
            self.n,
            self.n,
            self.entries()
                .map(|(ijk, v)| (ijk[keep[0]], ijk[keep[1]], v))
                .collect::<Vec<_>>(),
        )
    }
}

fn assemble_tensor<F>(mesh: &Mesh, local: F) -> Rank3Tensor
where
    F: Fn(&[[f64; 2]; 3]) -> [[[f64; 3]; 3]; 3],
{
    let mut entries = Vec::with_capacity(27 * mesh.triangles().len());
    for (e, tri) in mesh.triangles().iter().enumerate() {
        let lt = local(&mesh.vertices(e));
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    entries.push(([tri[a], tri[b], tri[c]], lt[a][b][c]));
                }
            }
        }
    }
    Rank3Tensor::from_entries(mesh.n_nodes(), entries)
}

/// `(Bx, By)` with `Bd_ijk = ∫ ∂_d φ_j φ_i φ_k`.
pub fn assemble_transport_tensors(mesh: &Mesh) -> (Rank3Tensor, Rank3Tensor) {
    (
        assemble_tensor(mesh, |v| element_transport(v, 0)),
        assemble_tensor(mesh, |v| element_transport(v, 1)),
    )
}

pub fn assemble_reaction_tensor(mesh: &Mesh) -> Rank3Tensor {
    assemble_tensor(mesh, element_triple)
}

/// Dirichlet data of the environmental field: constrained nodes with
/// prescribed values, and the complementary free nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMap {
    constrained: Vec<usize>,
    free: Vec<usize>,
    prescribed: Vec<f64>,
    is_constrained: Vec<bool>,
}

impl DirichletMap {
    /// Nodes touching a source edge get `source_value`, other boundary nodes
    /// get zero. A node shared by a source and a zero edge takes the source
    /// value.
    pub fn build(mesh: &Mesh, source_value: f64) -> Result<Self> {
        if !mesh.is_tagged() {
            return Err(Error::InvalidState(
                "mesh boundary has not been tagged for the field problem".into(),
            ));
        }
        if !source_value.is_finite() {
            return Err(Error::invalid(format!("source value must be finite, got {source_value}")));
        }
        let n = mesh.n_nodes();
        let mut is_constrained = vec![false; n];
        let mut prescribed = vec![0.0; n];
        for e in mesh.boundary_edges() {
            if e.tag == EdgeTag::NoFluxOnly {
                continue;
            }
            for &v in &e.nodes {
                is_constrained[v] = true;
                if e.tag == EdgeTag::DirichletSource {
                    prescribed[v] = source_value;
                }
            }
        }
        let constrained = (0..n).filter(|&i| is_constrained[i]).collect();
        let free = (0..n).filter(|&i| !is_constrained[i]).collect();
        Ok(Self {
            constrained,
            free,
            prescribed,
            is_constrained,
        })
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Full-length nodal vector: prescribed values on constrained nodes, zero
    /// on free nodes.
    pub fn prescribed(&self) -> &[f64] {
        &self.prescribed
    }

    pub fn is_constrained(&self, node: usize) -> bool {
        self.is_constrained[node]
    }

    pub fn n_nodes(&self) -> usize {
        self.is_constrained.len()
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Scatters free-node values into a full vector whose constrained
    /// entries take `constrained_values` (e.g. the prescribed data, or zeros
    /// for homogeneous problems).
    pub fn extend(&self, free_values: &[f64], constrained_values: &[f64]) -> Vec<f64> {
        let mut full = constrained_values.to_vec();
        for (&i, &v) in self.free.iter().zip(free_values) {
            full[i] = v;
        }
        full
    }

    /// Zeroes constrained entries in place.
    pub fn zero_constrained(&self, v: &mut [f64]) {
        for &i in &self.constrained {
            v[i] = 0.0;
        }
    }

    /// Largest deviation of `field` from the prescribed values on
    /// constrained nodes.
    pub fn mismatch(&self, field: &[f64]) -> f64 {
        self.constrained
            .iter()
            .map(|&i| (field[i] - self.prescribed[i]).abs())
            .fold(0.0, f64::max)
    }
}

/// Physical parameters feeding the operator assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    pub diffusion_q: f64,
    pub diffusion_s: f64,
    pub source_value: f64,
}

/// Every operator the state and adjoint solves need, assembled once per
/// scenario and shared read-only afterwards.
///
/// One mass matrix serves the density, the field and the controls.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    pub mass: SparseMatrix,
    pub stiffness_q: SparseMatrix,
    pub stiffness_s: SparseMatrix,
    pub advection: SparseMatrix,
    pub transport_x: Rank3Tensor,
    pub transport_y: Rank3Tensor,
    /// `Bx` and `By` with test/trial swapped: contraction yields `(Bd u)ᵀ`.
    pub transport_x_t: Rank3Tensor,
    pub transport_y_t: Rank3Tensor,
    pub reaction: Rank3Tensor,
    pub dirichlet: DirichletMap,
}

impl AssembledOperators {
    pub fn assemble(mesh: &Mesh, physics: &Physics, flow: &[[f64; 2]]) -> Result<Self> {
        let mass = assemble_mass(mesh);
        let stiffness_q = assemble_stiffness(mesh, physics.diffusion_q)?;
        let stiffness_s = assemble_stiffness(mesh, physics.diffusion_s)?;
        let advection = assemble_advection(mesh, flow)?;
        let (transport_x, transport_y) = assemble_transport_tensors(mesh);
        let transport_x_t = transport_x.swap_test_trial();
        let transport_y_t = transport_y.swap_test_trial();
        let reaction = assemble_reaction_tensor(mesh);
        let dirichlet = DirichletMap::build(mesh, physics.source_value)?;
        Ok(Self {
            mass,
            stiffness_q,
            stiffness_s,
            advection,
            transport_x,
            transport_y,
            transport_x_t,
            transport_y_t,
            reaction,
            dirichlet,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.mass.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundarySpec, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const RIGHT: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    #[test]
    fn right_triangle_mass() {
        let m = element_mass(&RIGHT);
        let s = 0.5 / 12.0;
        let expected = [[2.0 * s, s, s], [s, 2.0 * s, s], [s, s, 2.0 * s]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - expected[i][j]).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn right_triangle_stiffness() {
        let k = element_stiffness(&RIGHT);
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn right_triangle_triple_products() {
        let c = element_triple(&RIGHT);
        assert!((c[0][0][0] - 0.05).abs() < 1e-16);
        assert!((c[0][0][1] - 0.5 / 30.0).abs() < 1e-16);
        assert!((c[0][1][2] - 0.5 / 60.0).abs() < 1e-16);
    }

    #[test]
    fn orientation_does_not_matter() {
        let ccw = [[0.1, 0.2], [0.9, 0.3], [0.4, 0.8]];
        let cw = [ccw[0], ccw[2], ccw[1]];
        let perm = [0, 2, 1];
        let (m1, m2) = (element_mass(&ccw), element_mass(&cw));
        let (k1, k2) = (element_stiffness(&ccw), element_stiffness(&cw));
        let (b1, b2) = (element_transport(&ccw, 1), element_transport(&cw, 1));
        for i in 0..3 {
            for j in 0..3 {
                assert!((m1[perm[i]][perm[j]] - m2[i][j]).abs() < 1e-15);
                assert!((k1[perm[i]][perm[j]] - k2[i][j]).abs() < 1e-14);
                for k in 0..3 {
                    assert!((b1[perm[i]][perm[j]][perm[k]] - b2[i][j][k]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn mass_sums_to_area() {
        for (nx, ny) in [(1, 1), (3, 2), (7, 7)] {
            let m = assemble_mass(&Mesh::unit_square(nx, ny).unwrap());
            let total: f64 = m.values().iter().sum();
            assert!((total - 1.0).abs() < 1e-13);
            assert!(m.row_sums().iter().all(|&r| r > 0.0));
            assert!(m.asymmetry() <= 1e-15);
        }
    }

    #[test]
    fn stiffness_kills_constants_and_scales() {
        let mesh = Mesh::unit_square(4, 3).unwrap();
        let a1 = assemble_stiffness(&mesh, 1.0).unwrap();
        let a2 = assemble_stiffness(&mesh, 2.0).unwrap();
        let c = vec![3.7; mesh.n_nodes()];
        assert!(a1.mul_vec(&c).unwrap().iter().all(|v| v.abs() < 1e-14));
        assert!(a2.max_abs_diff(&a1.scaled(2.0)) == 0.0);
        assert!(a1.asymmetry() <= 1e-15);
    }

    #[test]
    fn nonpositive_diffusion_rejected() {
        let mesh = Mesh::unit_square(2, 2).unwrap();
        assert!(matches!(assemble_stiffness(&mesh, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(assemble_stiffness(&mesh, -1.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn advection_zero_flow_and_constant_trial() {
        let mesh = Mesh::unit_square(3, 3).unwrap();
        let zero = assemble_advection(&mesh, &vec![[0.0; 2]; mesh.n_nodes()]).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let flow: Vec<[f64; 2]> = (0..mesh.n_nodes())
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let b = assemble_advection(&mesh, &flow).unwrap();
        // Constant trial field has zero gradient.
        let ones = vec![1.0; mesh.n_nodes()];
        assert!(b.mul_vec(&ones).unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn advection_dimension_mismatch() {
        let mesh = Mesh::unit_square(2, 2).unwrap();
        assert!(matches!(
            assemble_advection(&mesh, &[[0.0; 2]; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn advection_unit_flow_single_cell() {
        // Dense evaluation of ∫ ∂_x φ_j φ_i on the (1,1) mesh from the element
        // gradients and mass matrices, node by node.
        let mesh = Mesh::unit_square(1, 1).unwrap();
        let b = assemble_advection(&mesh, &[[1.0, 0.0]; 4]).unwrap();
        let mut dense = [[0.0; 4]; 4];
        for (e, tri) in mesh.triangles().iter().enumerate() {
            let v = mesh.vertices(e);
            let area = crate::mesh::signed_area(&v);
            let g = p1_gradients(&v);
            for a in 0..3 {
                for c in 0..3 {
                    // ∫ φ_a = area / 3
                    dense[tri[a]][tri[c]] += g[c][0] * area / 3.0;
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                assert!((b.get(i, j) - dense[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn contraction_is_linear_and_matches_mass() {
        let mesh = Mesh::unit_square(2, 2).unwrap();
        let c = assemble_reaction_tensor(&mesh);
        let m = assemble_mass(&mesh);
        let n = mesh.n_nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        assert_eq!(c.contract(&vec![0.0; n]).unwrap().max_abs(), 0.0);

        let combo: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let lhs = c.contract(&combo).unwrap();
        let rhs = c.contract(&c1).unwrap().lin_comb(2.0, &c.contract(&c2).unwrap(), -0.5).unwrap();
        assert!(lhs.max_abs_diff(&rhs) <= 1e-13);

        // Σ_j C_ijk 1_j c_k = (M c)_i, by dense triple loop.
        let ones = vec![1.0; n];
        let applied = c.contract(&c1).unwrap().mul_vec(&ones).unwrap();
        let mut dense = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    dense[i] += c.get(i, j, k) * c1[k];
                }
            }
        }
        let mc = m.mul_vec(&c1).unwrap();
        for i in 0..n {
            assert!((applied[i] - dense[i]).abs() < 1e-15);
            assert!((applied[i] - mc[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn swapped_tensor_contracts_to_transpose() {
        let mesh = Mesh::unit_square(3, 2).unwrap();
        let (bx, _) = assemble_transport_tensors(&mesh);
        let u: Vec<f64> = (0..mesh.n_nodes()).map(|i| (i as f64).cos()).collect();
        let a = bx.contract(&u).unwrap().transpose();
        let b = bx.swap_test_trial().contract(&u).unwrap();
        assert!(a.max_abs_diff(&b) == 0.0);
    }

    #[test]
    fn tensor_bilinear_matches_contraction() {
        let mesh = Mesh::unit_square(3, 3).unwrap();
        let (_, by) = assemble_transport_tensors(&mesh);
        let n = mesh.n_nodes();
        let a: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).cos()).collect();
        let c: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let g = by.bilinear(&a, &b).unwrap();
        let via_contract = by.contract(&c).unwrap().bilinear(&a, &b).unwrap();
        let via_g: f64 = g.iter().zip(&c).map(|(x, y)| x * y).sum();
        assert!((via_contract - via_g).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_full_left_side() {
        let mesh = Mesh::unit_square(2, 2).unwrap();
        let tagged = mesh.tag_boundary(&BoundarySpec::new(Side::Left, 0.0, 1.0).unwrap()).mesh;
        let d = DirichletMap::build(&tagged, 10.0).unwrap();
        let tens: Vec<usize> = d.constrained().iter().copied().filter(|&i| d.prescribed()[i] == 10.0).collect();
        assert_eq!(tens, vec![0, 3, 6]);
        assert_eq!(d.constrained().len(), 8);
        assert_eq!(d.free(), &[4]);
        // Corner nodes on the junction take the source value.
        assert_eq!(d.prescribed()[0], 10.0);
        assert_eq!(d.prescribed()[2], 0.0);
    }

    #[test]
    fn dirichlet_homogeneous() {
        let mesh = Mesh::unit_square(4, 4).unwrap().tag_homogeneous();
        let d = DirichletMap::build(&mesh, 10.0).unwrap();
        assert!(d.prescribed().iter().all(|&v| v == 0.0));
        assert_eq!(d.free().len(), mesh.n_nodes() - mesh.boundary_nodes().len());
        assert_eq!(d.constrained(), mesh.boundary_nodes().as_slice());
    }

    #[test]
    fn dirichlet_requires_tagging() {
        let mesh = Mesh::unit_square(2, 2).unwrap();
        assert!(matches!(DirichletMap::build(&mesh, 1.0), Err(Error::InvalidState(_))));
    }

    #[test]
    fn restrict_extend_round_trip() {
        let mesh = Mesh::unit_square(3, 3).unwrap().tag_homogeneous();
        let d = DirichletMap::build(&mesh, 0.0).unwrap();
        let full: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let back = d.extend(&d.restrict(&full), &full);
        assert_eq!(back, full);
    }
}
