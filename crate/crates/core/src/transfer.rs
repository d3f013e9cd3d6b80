//! Global field layout and the interface transfer operator.
//!
//! The transfer operator is the only place where one subdomain reads another
//! subdomain's values: for every interface set `G_ij` it evaluates the
//! interpolant of `u_j` at the nodes of `G_ij`. All other rows are zero.

use std::ops::Range;
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::pde::PdeProblem;
use crate::sparse::CsrMatrix;

/// Offsets of the concatenated per-subdomain blocks. Within block `i`,
/// component `c` of node `k` sits at `c * n_i + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    ncomp: usize,
    nodes: Vec<usize>,
    offsets: Vec<usize>,
}

impl Layout {
    pub fn new(ncomp: usize, nodes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(nodes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &n in &nodes {
            acc += n * ncomp;
            offsets.push(acc);
        }
        Self {
            ncomp,
            nodes,
            offsets,
        }
    }

    pub fn for_decomposition(dec: &Decomposition, ncomp: usize) -> Self {
        Self::new(ncomp, dec.subdomains().iter().map(|s| s.n_nodes()).collect())
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn n_blocks(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self, i: usize) -> usize {
        self.nodes[i]
    }

    pub fn block_len(&self, i: usize) -> usize {
        self.nodes[i] * self.ncomp
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block_range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn index(&self, i: usize, c: usize, node: usize) -> usize {
        self.offsets[i] + c * self.nodes[i] + node
    }

    pub fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::LayoutMismatch {
                expected: self.len(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    pub fn block<'a>(&self, v: &'a [f64], i: usize) -> &'a [f64] {
        &v[self.block_range(i)]
    }

    /// Concatenates per-subdomain blocks.
    pub fn concat(&self, blocks: Vec<Vec<f64>>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (i, b) in blocks.into_iter().enumerate() {
            debug_assert_eq!(b.len(), self.block_len(i));
            out.extend(b);
        }
        out
    }
}

/// A global state or residual vector `cat⟨u_i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    layout: Arc<Layout>,
    data: Vec<f64>,
}

impl FieldVector {
    pub fn new(layout: Arc<Layout>, data: Vec<f64>) -> Result<Self> {
        layout.check(&data)?;
        Ok(Self { layout, data })
    }

    pub fn zeros(layout: Arc<Layout>) -> Self {
        let data = vec![0.0; layout.len()];
        Self { layout, data }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, i: usize) -> &[f64] {
        self.layout.block(&self.data, i)
    }

    pub fn split(&self) -> Vec<Vec<f64>> {
        (0..self.layout.n_blocks()).map(|i| self.block(i).to_vec()).collect()
    }

    pub fn merge(layout: Arc<Layout>, blocks: Vec<Vec<f64>>) -> Result<Self> {
        if blocks.len() != layout.n_blocks() {
            return Err(Error::InvalidArgument(format!(
                "expected {} blocks, got {}",
                layout.n_blocks(),
                blocks.len()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.len() != layout.block_len(i) {
                return Err(Error::LayoutMismatch {
                    expected: layout.block_len(i),
                    actual: b.len(),
                });
            }
        }
        let data = layout.concat(blocks);
        Ok(Self { layout, data })
    }
}

/// Interpolation from source subdomain `source` onto the nodes of one
/// interface set of the target subdomain.
#[derive(Debug, Clone)]
pub struct InterfaceBlock {
    pub source: usize,
    /// Local node indices (in the target subdomain) of `G_ij`.
    pub nodes: Vec<usize>,
    /// `|G_ij| x n_j` interpolation weights, shared by all components.
    pub weights: CsrMatrix,
}

#[derive(Debug, Clone)]
pub struct TransferOperator {
    layout: Arc<Layout>,
    targets: Vec<Vec<InterfaceBlock>>,
}

pub fn build_transfer(dec: &Decomposition, problem: &dyn PdeProblem) -> Result<TransferOperator> {
    TransferOperator::build(dec, problem.ncomp())
}

impl TransferOperator {
    pub fn build(dec: &Decomposition, ncomp: usize) -> Result<Self> {
        let layout = Arc::new(Layout::for_decomposition(dec, ncomp));
        let tol = dec.tolerance();
        let mut targets = Vec::with_capacity(dec.len());
        for sub in dec.subdomains() {
            let mut blocks = Vec::new();
            for (&j, nodes) in sub.interface_groups() {
                let src = dec.subdomain(j);
                let pts: Vec<(f64, f64)> = nodes.iter().map(|&k| sub.grid.point(k)).collect();
                if let Some(&(x, y)) = pts.iter().find(|&&(x, y)| !src.rect.strictly_contains(x, y, tol)) {
                    return Err(Error::Construction(format!(
                        "interface point ({x}, {y}) of subdomain {} lies outside source subdomain {j}",
                        sub.id
                    )));
                }
                blocks.push(InterfaceBlock {
                    source: j,
                    nodes: nodes.clone(),
                    weights: crate::chebyshev::tensor_interp_matrix(&src.grid, &pts),
                });
            }
            targets.push(blocks);
        }
        Ok(Self { layout, targets })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn blocks(&self, target: usize) -> &[InterfaceBlock] {
        &self.targets[target]
    }

    /// `T_i u`: block `i` of the transferred field.
    pub fn apply_block(&self, i: usize, u: &[f64]) -> Vec<f64> {
        let l = &self.layout;
        let ni = l.nodes(i);
        let mut out = vec![0.0; l.block_len(i)];
        for blk in &self.targets[i] {
            let nj = l.nodes(blk.source);
            let uj = l.block(u, blk.source);
            for c in 0..l.ncomp() {
                let src = &uj[c * nj..(c + 1) * nj];
                for (r, &node) in blk.nodes.iter().enumerate() {
                    out[c * ni + node] = blk.weights.row_dot(r, src);
                }
            }
        }
        out
    }

    /// `T u`, computed independently per target subdomain.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.layout.check(u)?;
        let blocks: Vec<Vec<f64>> = (0..self.layout.n_blocks())
            .into_par_iter()
            .map(|i| self.apply_block(i, u))
            .collect();
        Ok(self.layout.concat(blocks))
    }

    pub fn apply_field(&self, u: &FieldVector) -> Result<FieldVector> {
        if u.layout().as_ref() != self.layout.as_ref() {
            return Err(Error::InvalidArgument("field layout does not match transfer operator".into()));
        }
        FieldVector::new(self.layout.clone(), self.apply(u.as_slice())?)
    }

    /// Dense assembly, for small verification cases.
    pub fn to_dense(&self) -> Mat<f64> {
        let l = &self.layout;
        let mut m = Mat::zeros(l.len(), l.len());
        for (i, blocks) in self.targets.iter().enumerate() {
            for blk in blocks {
                for c in 0..l.ncomp() {
                    for (r, &node) in blk.nodes.iter().enumerate() {
                        for (k, w) in blk.weights.row(r) {
                            m[(l.index(i, c, node), l.index(blk.source, c, k))] += w;
                        }
                    }
                }
            }
        }
        m
    }
}

/// Apply the transfer operator to a typed field vector.
pub fn apply_transfer(t: &TransferOperator, u: &FieldVector) -> Result<FieldVector> {
    t.apply_field(u)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::decomposition::{NodeKind, Rect};
    use crate::pde::poisson_problem;

    fn sample(dec: &Decomposition, layout: &Layout, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut u = vec![0.0; layout.len()];
        for s in dec.subdomains() {
            for k in 0..s.n_nodes() {
                let (x, y) = s.grid.point(k);
                for c in 0..layout.ncomp() {
                    u[layout.index(s.id, c, k)] = (c + 1) as f64 * f(x, y);
                }
            }
        }
        u
    }

    #[test]
    fn single_subdomain_transfer_is_zero() {
        let dec = Decomposition::build_uniform(Rect::unit_square(), 1, 1, 0.2, 9, 9).unwrap();
        let t = build_transfer(&dec, poisson_problem(|_, _| 0.0).as_ref()).unwrap();
        let u: Vec<f64> = (0..81).map(|k| k as f64).collect();
        assert!(t.apply(&u).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn polynomial_field_is_transferred_exactly() {
        let dec = Decomposition::build_uniform(Rect::unit_square(), 2, 1, 0.25, 9, 9).unwrap();
        let t = TransferOperator::build(&dec, 2).unwrap();
        let p = |x: f64, y: f64| x * x + y;
        let u = sample(&dec, t.layout(), p);
        let tu = t.apply(&u).unwrap();
        for s in dec.subdomains() {
            for k in 0..s.n_nodes() {
                let (x, y) = s.grid.point(k);
                for c in 0..2 {
                    let v = tu[t.layout().index(s.id, c, k)];
                    match s.kind(k) {
                        NodeKind::Interface(_) => {
                            assert!((v - (c + 1) as f64 * p(x, y)).abs() < 1e-12)
                        }
                        _ => assert_eq!(v, 0.0),
                    }
                }
            }
        }
    }

    #[test]
    fn coinciding_node_gives_one_hot_row() {
        // With overlap 1/3 the right edge of box 0 (x = 2/3) is the midpoint
        // of box 1 = [1/3, 1], a Chebyshev node for odd n.
        let dec = Decomposition::build_uniform(Rect::unit_square(), 2, 1, 1.0 / 3.0, 9, 9).unwrap();
        let t = TransferOperator::build(&dec, 1).unwrap();
        let blk = &t.blocks(0)[0];
        for r in 0..blk.weights.nrows() {
            let row: Vec<_> = blk.weights.row(r).collect();
            assert_eq!(row.len(), 1);
            assert_eq!(row[0].1, 1.0);
        }
    }

    #[test]
    fn dense_assembly_matches_apply() {
        let dec = Decomposition::build_uniform(Rect::unit_square(), 2, 2, 0.25, 7, 7).unwrap();
        let t = TransferOperator::build(&dec, 3).unwrap();
        let u: Vec<f64> = (0..t.layout().len()).map(|k| ((k * 37) % 101) as f64 / 50.0 - 1.0).collect();
        let dense = crate::linalg::matvec(&t.to_dense(), &u);
        let applied = t.apply(&u).unwrap();
        for (a, b) in dense.iter().zip(&applied) {
            assert!((a - b).abs() <= 1e-15 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn non_neighbors_do_not_influence() {
        let dec = Decomposition::build_uniform(Rect::unit_square(), 3, 1, 0.25, 7, 7).unwrap();
        let t = TransferOperator::build(&dec, 1).unwrap();
        let l = t.layout().clone();
        let u: Vec<f64> = (0..l.len()).map(|k| (k as f64).sin()).collect();
        let mut w = u.clone();
        for k in l.block_range(2) {
            w[k] += 10.0;
        }
        assert_eq!(t.apply_block(0, &u), t.apply_block(0, &w));
        assert_ne!(t.apply_block(1, &u), t.apply_block(1, &w));
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let dec = Decomposition::build_uniform(Rect::unit_square(), 2, 1, 0.25, 5, 5).unwrap();
        let t = TransferOperator::build(&dec, 1).unwrap();
        assert!(matches!(t.apply(&[0.0; 3]), Err(Error::LayoutMismatch { .. })));
        assert!(FieldVector::new(t.layout().clone(), vec![0.0; 7]).is_err());
    }

    proptest! {
        #[test]
        fn split_merge_round_trip(data in prop::collection::vec(-1e3f64..1e3, 2 * (25 + 9 + 16))) {
            let layout = Arc::new(Layout::new(2, vec![25, 9, 16]));
            let f = FieldVector::new(layout.clone(), data.clone()).unwrap();
            let g = FieldVector::merge(layout, f.split()).unwrap();
            prop_assert_eq!(g.as_slice(), &data[..]);
        }

        #[test]
        fn transfer_is_linear(alpha in -5.0f64..5.0, beta in -5.0f64..5.0, seed in 0u64..1000) {
            let dec = Decomposition::build_uniform(Rect::unit_square(), 2, 2, 0.25, 7, 7).unwrap();
            let t = TransferOperator::build(&dec, 1).unwrap();
            let n = t.layout().len();
            let u: Vec<f64> = (0..n).map(|k| ((k as u64 * 31 + seed) % 97) as f64 / 97.0).collect();
            let v: Vec<f64> = (0..n).map(|k| ((k as u64 * 17 + 3 * seed) % 89) as f64 / 89.0 - 0.5).collect();
            let comb: Vec<f64> = u.iter().zip(&v).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = t.apply(&comb).unwrap();
            let tu = t.apply(&u).unwrap();
            let tv = t.apply(&v).unwrap();
            for k in 0..n {
                let rhs = alpha * tu[k] + beta * tv[k];
                prop_assert!((lhs[k] - rhs).abs() <= 1e-13 * (1.0 + rhs.abs()));
            }
        }
    }
}
