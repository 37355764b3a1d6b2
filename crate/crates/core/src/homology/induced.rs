//! Maps induced on relative homology by an acyclic combinatorial enclosure.
//!
//! Every cell `σ` of `|P1|` gets the carrier `K(σ) = ⋂ |ℱ(Q)|` over the
//! squares `Q ∋ σ` of `P1`; a chain selector picks a vertex in `K(v)` and a
//! lattice path in `K(e)` joining the images of the endpoints of `e`. The
//! selector maps `(P1, P0)` into `(Q1, Q0) = (P1 ∪ ℱ(P0), P0 ∪ ℱ(P0))`, and
//! the result is pulled back through the inclusion, which must be an
//! isomorphism.

use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::BigInt;
use serde::Serialize;

use super::cubical::{closure_of, dim, is_acyclic_cells, Cell, Chain, CubicalPair, Lattice, RelHomology};
use super::matrix::IntMatrix;
use crate::combinat::CellBlock;
use crate::error::{Error, Result};

/// Matrices of the induced map on H₀ and H₁ in the computed bases, with each
/// generator tagged by its component of `P1 ∖ P0`.
#[derive(Clone, Debug, Serialize)]
pub struct GradedIntMatrix {
    pub m0: IntMatrix,
    pub m1: IntMatrix,
    pub betti: [usize; 3],
    pub h0_tags: Vec<usize>,
    pub h1_tags: Vec<usize>,
    pub n_components: usize,
}

impl GradedIntMatrix {
    /// Matrix of degree `k` (0 or 1).
    pub fn degree(&self, k: usize) -> &IntMatrix {
        if k == 0 {
            &self.m0
        } else {
            &self.m1
        }
    }

    pub fn tags(&self, k: usize) -> &[usize] {
        if k == 0 {
            &self.h0_tags
        } else {
            &self.h1_tags
        }
    }

    /// Generators of degree `k` belonging to component `c`.
    pub fn gens_of(&self, k: usize, c: usize) -> Vec<usize> {
        self.tags(k).iter().enumerate().filter(|(_, &t)| t == c).map(|(g, _)| g).collect()
    }
}

/// Component of `P1 ∖ P0` for each relative group.
fn group_tags(pair: &CubicalPair, h: &RelHomology) -> Result<(Vec<usize>, usize)> {
    let (core, comp, n) = pair.core_components();
    let pos: HashMap<(i64, i64), usize> = core.iter().enumerate().map(|(k, &b)| (b, k)).collect();
    let tags = (0..h.n_groups())
        .map(|g| {
            let rep = h.group_rep(g);
            pair.lattice
                .boxes_containing(rep)
                .into_iter()
                .find_map(|b| pos.get(&b).map(|&k| comp[k]))
                .ok_or_else(|| Error::Homology(format!("relative cell {rep:?} lies in no core square")))
        })
        .collect::<Result<Vec<usize>>>()?;
    Ok((tags, n))
}

struct Selector<'a> {
    lattice: Lattice,
    pair: &'a CubicalPair,
    images: Vec<HashSet<Cell>>,
    vertex: HashMap<Cell, Cell>,
}

impl Selector<'_> {
    fn carrier(&self, c: Cell) -> Result<HashSet<Cell>> {
        let mut idx = self.pair.lattice.boxes_containing(c).into_iter().filter_map(|b| self.pair.index_of(b));
        let first = idx.next().ok_or_else(|| Error::Homology(format!("cell {c:?} is not in P1")))?;
        let mut k = self.images[first].clone();
        for i in idx {
            k.retain(|x| self.images[i].contains(x));
        }
        Ok(k)
    }

    fn boxes_at(&self, c: Cell) -> Vec<usize> {
        let pair = self.pair;
        pair.lattice.boxes_containing(c).into_iter().filter_map(|b| pair.index_of(b)).map(|i| pair.ids()[i]).collect()
    }

    fn phi0(&mut self, v: Cell) -> Result<Cell> {
        if let Some(&w) = self.vertex.get(&v) {
            return Ok(w);
        }
        let k = self.carrier(v)?;
        let w = k.iter().copied().filter(|&c| dim(c) == 0).min().ok_or_else(|| Error::NotAcyclic(self.boxes_at(v)))?;
        self.vertex.insert(v, w);
        Ok(w)
    }

    /// Shortest lattice path inside `K(e)` between the images of the ends.
    fn phi1(&mut self, e: Cell) -> Result<Chain> {
        let (t, h) = self.lattice.endpoints(e);
        let (a, b) = (self.phi0(t)?, self.phi0(h)?);
        if a == b {
            return Ok(Vec::new());
        }
        let k = self.carrier(e)?;
        let mut prev: HashMap<Cell, (Cell, Cell)> = HashMap::new();
        let mut q = VecDeque::from([a]);
        let mut seen = HashSet::from([a]);
        while let Some(v) = q.pop_front() {
            if v == b {
                break;
            }
            for ed in self.lattice.edges_at(v) {
                if !k.contains(&ed) {
                    continue;
                }
                let (x, y) = self.lattice.endpoints(ed);
                let w = if x == v { y } else { x };
                if seen.insert(w) {
                    prev.insert(w, (v, ed));
                    q.push_back(w);
                }
            }
        }
        if !seen.contains(&b) {
            return Err(Error::NotAcyclic(self.boxes_at(e)));
        }
        let mut out = Vec::new();
        let mut v = b;
        while v != a {
            let (u, ed) = prev[&v];
            let (x, _) = self.lattice.endpoints(ed);
            out.push((ed, if x == u { 1 } else { -1 }));
            v = u;
        }
        Ok(out)
    }

    fn push_chain(&mut self, chain: &[(Cell, i64)]) -> Result<Chain> {
        let mut acc: HashMap<Cell, i64> = HashMap::new();
        for &(e, c) in chain {
            for (f, s) in self.phi1(e)? {
                *acc.entry(f).or_default() += c * s;
            }
        }
        let mut out: Chain = acc.into_iter().filter(|&(_, v)| v != 0).collect();
        out.sort_unstable();
        Ok(out)
    }
}

fn columns_to_matrix(rows: usize, cols: &[Vec<BigInt>]) -> IntMatrix {
    let mut m = IntMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            m.set(i, j, v.clone());
        }
    }
    m
}

/// The map induced on `H_*(P1, P0)` by an enclosure given as image blocks
/// for every square of `P1` (in [`CubicalPair::p1`] order).
pub fn induced_map(pair: &CubicalPair, images: &[Vec<CellBlock>]) -> Result<GradedIntMatrix> {
    let (m, _) = induced_map_with_homology(pair, images)?;
    Ok(m)
}

pub fn induced_map_with_homology(pair: &CubicalPair, images: &[Vec<CellBlock>]) -> Result<(GradedIntMatrix, RelHomology)> {
    let lattice = pair.lattice;
    if images.len() != pair.p1().len() {
        return Err(Error::Homology(format!("{} images for {} squares", images.len(), pair.p1().len())));
    }
    let image_boxes: Vec<Vec<(i64, i64)>> = images
        .iter()
        .map(|bl| {
            let mut v: Vec<(i64, i64)> = bl.iter().flat_map(|b| b.cells()).map(|c| lattice.norm_box(c)).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let image_cells: Vec<HashSet<Cell>> = image_boxes.iter().map(|v| closure_of(&lattice, v)).collect();

    let bad: Vec<usize> =
        (0..pair.p1().len()).filter(|&k| !is_acyclic_cells(&lattice, &image_cells[k])).map(|k| pair.ids()[k]).collect();
    if !bad.is_empty() {
        return Err(Error::NotAcyclic(bad));
    }

    let core: HashSet<(i64, i64)> = pair.core().into_iter().collect();
    let mut q1: Vec<(i64, i64)> = pair.p1().to_vec();
    let mut q0: Vec<(i64, i64)> = pair.p0().to_vec();
    for (k, &b) in pair.p1().iter().enumerate() {
        if pair.in_p0(b) {
            if let Some(c) = image_boxes[k].iter().find(|c| core.contains(c)) {
                return Err(Error::Homology(format!("exit square {b:?} maps into the core at {c:?}")));
            }
            q1.extend_from_slice(&image_boxes[k]);
            q0.extend_from_slice(&image_boxes[k]);
        } else if let Some(c) = image_boxes[k].iter().find(|c| pair.index_of(**c).is_none()) {
            return Err(Error::Homology(format!("image of core square {b:?} leaves P1 at {c:?}")));
        }
    }

    let mut sel = Selector { lattice, pair, images: image_cells, vertex: HashMap::new() };
    // every carrier must be acyclic
    let mut bad = HashSet::new();
    let mut cells: Vec<Cell> = pair.p1_cells().into_iter().collect();
    cells.sort_unstable();
    for &c in &cells {
        if dim(c) < 2 && !is_acyclic_cells(&lattice, &sel.carrier(c)?) {
            bad.extend(sel.boxes_at(c));
        }
    }
    if !bad.is_empty() {
        let mut bad: Vec<usize> = bad.into_iter().collect();
        bad.sort_unstable();
        return Err(Error::NotAcyclic(bad));
    }

    let src = RelHomology::of_cells(lattice, pair.p1_cells(), pair.p0_cells())?;
    let tq = CubicalPair::new(lattice, &q1, &q0)?;
    let dst = RelHomology::of_cells(lattice, tq.p1_cells(), tq.p0_cells())?;
    if dst.betti[0] != src.betti[0] || dst.betti[1] != src.betti[1] {
        return Err(Error::Homology(format!(
            "inclusion into the target pair changes Betti numbers {:?} → {:?}",
            src.betti, dst.betti
        )));
    }

    let mut phi0 = Vec::new();
    let mut inc0 = Vec::new();
    for &(v, _) in &src.h0_gens {
        inc0.push(dst.h0_coords(v)?);
        let w = sel.phi0(v)?;
        phi0.push(dst.h0_coords(w)?);
    }
    let mut phi1 = Vec::new();
    let mut inc1 = Vec::new();
    for g in &src.h1_gens {
        inc1.push(dst.h1_coords(&g.chain)?);
        let img = sel.push_chain(&g.chain)?;
        phi1.push(dst.h1_coords(&img)?);
    }
    let pull = |inc: &[Vec<BigInt>], phi: &[Vec<BigInt>], n: usize, k: usize| -> Result<IntMatrix> {
        let i = columns_to_matrix(n, inc);
        let inv = i
            .inverse_unimodular()
            .ok_or_else(|| Error::Homology(format!("inclusion into the target pair is not an isomorphism on H{k}")))?;
        Ok(inv.mul(&columns_to_matrix(n, phi)))
    };
    let m0 = pull(&inc0, &phi0, src.betti[0], 0)?;
    let m1 = pull(&inc1, &phi1, src.betti[1], 1)?;

    let (tags, n_components) = group_tags(pair, &src)?;
    let h0_tags = src.h0_gens.iter().map(|&(_, g)| tags[g]).collect();
    let h1_tags = src.h1_gens.iter().map(|g| tags[g.group]).collect();
    Ok((GradedIntMatrix { m0, m1, betti: src.betti, h0_tags, h1_tags, n_components }, src))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    fn block(i0: i64, j0: i64, ni: u32, nj: u32) -> CellBlock {
        CellBlock { i0, j0, ni, nj }
    }

    fn ring(n: i64) -> Vec<(i64, i64)> {
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i == 0 || j == 0 || i == n - 1 || j == n - 1).collect()
    }

    /// ℱ(b) = o(b) ∩ P1 as unit blocks.
    fn onebox_in(pair: &CubicalPair) -> Vec<Vec<CellBlock>> {
        pair.p1()
            .iter()
            .map(|&b| {
                pair.lattice.box_neighbors(b).filter(|&c| pair.index_of(c).is_some()).map(|(i, j)| block(i, j, 1, 1)).collect()
            })
            .collect()
    }

    #[test]
    fn identity_enclosure_on_annulus() {
        let l = Lattice::new(8, false).unwrap();
        let pair = CubicalPair::new(l, &ring(5), &[]).unwrap();
        let m = induced_map(&pair, &onebox_in(&pair)).unwrap();
        assert_eq!(m.betti, [1, 1, 0]);
        assert_eq!(m.m1, IntMatrix::identity(1));
        assert_eq!(m.m0, IntMatrix::identity(1));
    }

    #[test]
    fn identity_enclosure_on_strip_pair() {
        let l = Lattice::new(10, false).unwrap();
        let strip: Vec<(i64, i64)> = (0..8).map(|i| (i, 3)).collect();
        let pair = CubicalPair::new(l, &strip, &[(0, 3), (7, 3)]).unwrap();
        let imgs: Vec<Vec<CellBlock>> = pair.p1().iter().map(|&(i, j)| vec![block(i, j, 1, 1)]).collect();
        let m = induced_map(&pair, &imgs).unwrap();
        assert_eq!(m.m1, IntMatrix::identity(1));
        assert_eq!(m.m0.rows(), 0);
    }

    #[test]
    fn doubling_on_a_torus_ring() {
        let l = Lattice::new(8, true).unwrap();
        let row: Vec<(i64, i64)> = (0..8).map(|i| (i, 3)).collect();
        let pair = CubicalPair::new(l, &row, &[]).unwrap();
        // [i/8, (i+1)/8] ↦ [2i/8, (2i+2)/8] meets cells 2i−1 … 2i+2
        let imgs: Vec<Vec<CellBlock>> = pair.p1().iter().map(|&(i, _)| vec![block((2 * i - 1).rem_euclid(8), 3, 4, 1)]).collect();
        let m = induced_map(&pair, &imgs).unwrap();
        assert_eq!(m.betti, [1, 1, 0]);
        assert_eq!(m.m1.get(0, 0).abs(), BigInt::from(2));
        assert_eq!(m.m0, IntMatrix::identity(1));
    }

    #[test]
    fn wide_image_is_rejected() {
        let l = Lattice::new(8, true).unwrap();
        let row: Vec<(i64, i64)> = (0..8).map(|i| (i, 3)).collect();
        let pair = CubicalPair::new(l, &row, &[]).unwrap();
        let mut imgs: Vec<Vec<CellBlock>> = pair.p1().iter().map(|&(i, j)| vec![block(i, j, 1, 1)]).collect();
        imgs[2] = vec![block(0, 3, 8, 1)];
        match induced_map(&pair, &imgs) {
            Err(Error::NotAcyclic(b)) => assert_eq!(b, vec![2]),
            other => panic!("{other:?}"),
        }
        // two separate blocks are not acyclic either
        imgs[2] = vec![block(0, 3, 1, 1), block(4, 3, 1, 1)];
        assert!(matches!(induced_map(&pair, &imgs), Err(Error::NotAcyclic(_))));
    }
}
