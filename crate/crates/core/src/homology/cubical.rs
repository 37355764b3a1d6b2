//! Relative cubical homology of unions of lattice squares.
//!
//! Cells live in doubled coordinates: the lattice square `(i, j)` is the
//! cell `(2i+1, 2j+1)`, its edges have one odd coordinate and its corners
//! none. On the torus both coordinates are taken mod `2·side`.
//!
//! `H₁(X, A)` is computed per relative group (a connected piece of the
//! relative cells). Inside a group, `A` is collapsed to a base node and a
//! spanning tree of the resulting graph is chosen; the non-tree edges then
//! index a basis of relative 1-cycles, square boundaries give the
//! relations, and the presentation is reduced by unit pivots before an
//! exact Smith normal form of what is left.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::matrix::IntMatrix;
use super::snf::Smith;
use crate::boxtree::{BoxId, BoxTree};
use crate::combinat::IndexPair;
use crate::dynamics::Domain;
use crate::error::{Error, Result};

/// A cell in doubled coordinates.
pub type Cell = (i64, i64);

/// A chain: cells with integer coefficients.
pub type Chain = Vec<(Cell, i64)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Lattice {
    pub side: i64,
    pub torus: bool,
}

impl Lattice {
    pub fn new(side: i64, torus: bool) -> Result<Self> {
        if side < 1 || (torus && side < 2) {
            return Err(Error::InvalidComplex(format!("lattice side {side} too small")));
        }
        Ok(Lattice { side, torus })
    }

    pub fn of_tree(tree: &BoxTree, domain: &Domain) -> Result<Self> {
        Self::new(tree.side() as i64, domain.is_torus())
    }

    pub fn norm(&self, c: Cell) -> Cell {
        if self.torus {
            let m = 2 * self.side;
            (c.0.rem_euclid(m), c.1.rem_euclid(m))
        } else {
            c
        }
    }

    /// Lattice square index normalised (wrapped on the torus).
    pub fn norm_box(&self, b: (i64, i64)) -> (i64, i64) {
        if self.torus {
            (b.0.rem_euclid(self.side), b.1.rem_euclid(self.side))
        } else {
            b
        }
    }

    pub fn square(&self, b: (i64, i64)) -> Cell {
        self.norm((2 * b.0 + 1, 2 * b.1 + 1))
    }

    /// The nine cells of a closed lattice square.
    pub fn closure(&self, b: (i64, i64)) -> impl Iterator<Item = Cell> + '_ {
        let (x, y) = (2 * b.0, 2 * b.1);
        (0..3).flat_map(move |a| (0..3).map(move |c| self.norm((x + a, y + c))))
    }

    /// Boxes whose closure contains the cell.
    pub fn boxes_containing(&self, c: Cell) -> Vec<(i64, i64)> {
        let axis = |v: i64| if v & 1 == 1 { vec![(v - 1) / 2] } else { vec![v / 2 - 1, v / 2] };
        let mut out: Vec<(i64, i64)> =
            axis(c.0).into_iter().flat_map(|i| axis(c.1).into_iter().map(move |j| (i, j))).map(|b| self.norm_box(b)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Boundary of a cell (normalised), with orientation signs.
    pub fn boundary(&self, c: Cell) -> Vec<(Cell, i64)> {
        let (x, y) = c;
        match (x & 1, y & 1) {
            (0, 0) => vec![],
            (1, 0) => vec![(self.norm((x + 1, y)), 1), (self.norm((x - 1, y)), -1)],
            (0, _) => vec![(self.norm((x, y + 1)), 1), (self.norm((x, y - 1)), -1)],
            _ => vec![
                (self.norm((x, y - 1)), 1),
                (self.norm((x + 1, y)), 1),
                (self.norm((x, y + 1)), -1),
                (self.norm((x - 1, y)), -1),
            ],
        }
    }

    /// Endpoints `(tail, head)` of an edge.
    pub fn endpoints(&self, e: Cell) -> (Cell, Cell) {
        let b = self.boundary(e);
        (b[1].0, b[0].0)
    }

    /// Up to four edges at a vertex.
    pub fn edges_at(&self, v: Cell) -> [Cell; 4] {
        let (x, y) = v;
        [self.norm((x + 1, y)), self.norm((x - 1, y)), self.norm((x, y + 1)), self.norm((x, y - 1))]
    }

    /// Lattice squares touching a square under closed adjacency.
    pub fn box_neighbors(&self, b: (i64, i64)) -> impl Iterator<Item = (i64, i64)> + '_ {
        (-1..=1).flat_map(move |a| (-1..=1).map(move |c| self.norm_box((b.0 + a, b.1 + c))))
    }
}

pub fn dim(c: Cell) -> usize {
    ((c.0 & 1) + (c.1 & 1)) as usize
}

/// Closed cell set of a union of lattice squares.
pub fn closure_of(lattice: &Lattice, boxes: &[(i64, i64)]) -> HashSet<Cell> {
    boxes.iter().flat_map(|&b| lattice.closure(b)).collect()
}

/// A pair of square sets `(P1, P0)` with `P0 ⊆ P1`; the subcomplex of
/// `|P0|` is automatically closed.
#[derive(Clone, Debug)]
pub struct CubicalPair {
    pub lattice: Lattice,
    p1: Vec<(i64, i64)>,
    p0: Vec<(i64, i64)>,
    /// External id per P1 square, in the order of [`CubicalPair::p1`].
    ids: Vec<usize>,
}

impl CubicalPair {
    pub fn new(lattice: Lattice, p1: &[(i64, i64)], p0: &[(i64, i64)]) -> Result<Self> {
        let norm = |v: &[(i64, i64)]| {
            let mut v: Vec<(i64, i64)> = v.iter().map(|&b| lattice.norm_box(b)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let (p1, p0) = (norm(p1), norm(p0));
        if let Some(b) = p0.iter().find(|b| p1.binary_search(b).is_err()) {
            return Err(Error::InvalidComplex(format!("P0 square {b:?} is not in P1")));
        }
        let ids = (0..p1.len()).collect();
        Ok(CubicalPair { lattice, p1, p0, ids })
    }

    /// The pair of an index pair on a tree; ids are box ids.
    pub fn from_index_pair(tree: &BoxTree, domain: &Domain, pair: &IndexPair) -> Result<Self> {
        let lattice = Lattice::of_tree(tree, domain)?;
        let cell = |b: &BoxId| {
            let (i, j) = tree.cell(*b);
            (i as i64, j as i64)
        };
        let p1: Vec<(i64, i64)> = pair.p1.iter().map(cell).collect();
        let p0: Vec<(i64, i64)> = pair.p0.iter().map(cell).collect();
        let mut out = Self::new(lattice, &p1, &p0)?;
        out.ids = out.p1.iter().map(|&(i, j)| tree.id_of(i as u32, j as u32).expect("live")).collect();
        Ok(out)
    }

    pub fn p1(&self) -> &[(i64, i64)] {
        &self.p1
    }

    pub fn p0(&self) -> &[(i64, i64)] {
        &self.p0
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn index_of(&self, b: (i64, i64)) -> Option<usize> {
        self.p1.binary_search(&self.lattice.norm_box(b)).ok()
    }

    pub fn in_p0(&self, b: (i64, i64)) -> bool {
        self.p0.binary_search(&self.lattice.norm_box(b)).is_ok()
    }

    /// Squares of `P1 ∖ P0`.
    pub fn core(&self) -> Vec<(i64, i64)> {
        self.p1.iter().copied().filter(|b| self.p0.binary_search(b).is_err()).collect()
    }

    pub fn p1_cells(&self) -> HashSet<Cell> {
        closure_of(&self.lattice, &self.p1)
    }

    pub fn p0_cells(&self) -> HashSet<Cell> {
        closure_of(&self.lattice, &self.p0)
    }

    /// Components of `P1 ∖ P0` under closed adjacency; returns the component
    /// index of every core square (in [`CubicalPair::core`] order) and the
    /// count. Components are numbered by their smallest square.
    pub fn core_components(&self) -> (Vec<(i64, i64)>, Vec<usize>, usize) {
        let core = self.core();
        let pos: HashMap<(i64, i64), usize> = core.iter().enumerate().map(|(k, &b)| (b, k)).collect();
        let mut comp = vec![usize::MAX; core.len()];
        let mut n = 0;
        for s in 0..core.len() {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = n;
            let mut stack = vec![s];
            while let Some(k) = stack.pop() {
                for nb in self.lattice.box_neighbors(core[k]) {
                    if let Some(&m) = pos.get(&nb) {
                        if comp[m] == usize::MAX {
                            comp[m] = n;
                            stack.push(m);
                        }
                    }
                }
            }
            n += 1;
        }
        (core, comp, n)
    }
}

/// One unit pivot of the presentation reduction: generator `row` was
/// eliminated using relation `col` whose `row` entry is `unit`.
#[derive(Clone, Debug)]
struct Pivot {
    row: usize,
    unit: i64,
    col: Vec<(usize, i64)>,
}

#[derive(Clone, Debug)]
struct Group {
    touches: bool,
    rep: Cell,
    vertex0: Option<Cell>,
    /// `(cell, tail node, head node)`
    edges: Vec<(Cell, usize, usize)>,
    edge_idx: HashMap<Cell, usize>,
    /// Per node: tree edge to the parent and `+1` if it points away from it.
    parent: Vec<Option<(usize, i64)>>,
    depth: Vec<usize>,
    row_of_edge: Vec<Option<usize>>,
    edge_of_row: Vec<usize>,
    pivots: Vec<Pivot>,
    rest: Vec<usize>,
    smith: Smith,
    squares: usize,
    /// Offset of this group's free generators in the global H₁ basis.
    h1_offset: usize,
}

impl Group {
    fn rank2(&self) -> usize {
        self.pivots.len() + self.smith.rank()
    }

    /// Tree path from node `a` up to the common ancestor with `b` and down
    /// to `b`, as edge coefficients.
    fn tree_path(&self, mut a: usize, mut b: usize, out: &mut BTreeMap<usize, i64>) {
        let mut down = Vec::new();
        while a != b {
            if self.depth[a] >= self.depth[b] {
                let (e, o) = self.parent[a].expect("non-root");
                *out.entry(e).or_default() -= o;
                a = self.other_end(e, a);
            } else {
                let (e, o) = self.parent[b].expect("non-root");
                down.push((e, o));
                b = self.other_end(e, b);
            }
        }
        for (e, o) in down {
            *out.entry(e).or_default() += o;
        }
    }

    fn other_end(&self, e: usize, n: usize) -> usize {
        let (_, t, h) = self.edges[e];
        if t == n {
            h
        } else {
            t
        }
    }

    /// The relative cycle of a non-tree edge closed up through the tree.
    fn fundamental_cycle(&self, row: usize, coef: i64, out: &mut BTreeMap<usize, i64>) {
        let e = self.edge_of_row[row];
        let (_, t, h) = self.edges[e];
        let mut tmp = BTreeMap::new();
        tmp.insert(e, 1);
        self.tree_path(h, t, &mut tmp);
        for (k, v) in tmp {
            *out.entry(k).or_default() += coef * v;
        }
    }

    /// Free coordinates of a relative cycle given by its edge coefficients.
    fn coords(&self, chain: &BTreeMap<usize, i64>) -> Result<Vec<BigInt>> {
        let mut v: HashMap<usize, i64> = HashMap::new();
        for (&e, &c) in chain {
            if let Some(r) = self.row_of_edge[e] {
                if c != 0 {
                    v.insert(r, c);
                }
            }
        }
        let overflow = || Error::Homology("coefficient overflow in cycle reduction".into());
        for p in &self.pivots {
            let Some(c) = v.get(&p.row).copied() else { continue };
            if c == 0 {
                continue;
            }
            let f = c.checked_mul(p.unit).ok_or_else(overflow)?;
            for &(r, a) in &p.col {
                let cur = v.get(&r).copied().unwrap_or(0);
                let nv = cur.checked_sub(f.checked_mul(a).ok_or_else(overflow)?).ok_or_else(overflow)?;
                if nv == 0 {
                    v.remove(&r);
                } else {
                    v.insert(r, nv);
                }
            }
        }
        let w: Vec<BigInt> = self.rest.iter().map(|r| BigInt::from(v.get(r).copied().unwrap_or(0))).collect();
        let y = self.smith.u.mul_vec(&w);
        Ok(y[self.smith.rank()..].to_vec())
    }
}

/// A relative 1-cycle representing a free H₁ generator.
#[derive(Clone, Debug, Serialize)]
pub struct Generator {
    pub group: usize,
    pub chain: Chain,
}

/// Homology of a pair of closed cell sets.
#[derive(Clone, Debug)]
pub struct RelHomology {
    pub lattice: Lattice,
    pub betti: [usize; 3],
    /// Torsion coefficients of H₁ (all > 1).
    pub torsion: Vec<BigInt>,
    /// One vertex per free H₀ generator, with its group.
    pub h0_gens: Vec<(Cell, usize)>,
    pub h1_gens: Vec<Generator>,
    groups: Vec<Group>,
    group_of: HashMap<Cell, usize>,
    x: HashSet<Cell>,
    a: HashSet<Cell>,
    h0_of_group: Vec<Option<usize>>,
}

/// `H_*(P1, P0)` with explicit H₁ generator cycles.
pub fn relative_homology(pair: &CubicalPair) -> Result<RelHomology> {
    RelHomology::of_cells(pair.lattice, pair.p1_cells(), pair.p0_cells())
}

/// True iff the union of the squares is nonempty, connected and acyclic.
pub fn acyclicity_check(lattice: &Lattice, boxes: &[(i64, i64)]) -> bool {
    if boxes.is_empty() {
        return false;
    }
    match RelHomology::of_cells(*lattice, closure_of(lattice, boxes), HashSet::new()) {
        Ok(h) => h.betti == [1, 0, 0] && h.torsion.is_empty(),
        Err(_) => false,
    }
}

/// Acyclicity of a closed cell set via connectivity and Euler
/// characteristic. In a 2-dimensional subcomplex of the plane or of a
/// proper part of the torus H₂ vanishes and H₁ is free, so a connected set
/// with χ = 1 is acyclic.
pub fn is_acyclic_cells(lattice: &Lattice, cells: &HashSet<Cell>) -> bool {
    if cells.is_empty() {
        return false;
    }
    let mut chi = [0i64; 3];
    for &c in cells {
        chi[dim(c)] += 1;
    }
    if lattice.torus && chi[2] >= lattice.side * lattice.side {
        return false;
    }
    if chi[0] - chi[1] + chi[2] != 1 {
        return false;
    }
    // connectivity through edges
    let start = *cells.iter().filter(|c| dim(**c) == 0).min().expect("closed nonempty set has a vertex");
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for e in lattice.edges_at(v) {
            if cells.contains(&e) {
                let (t, h) = lattice.endpoints(e);
                let w = if t == v { h } else { t };
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
    }
    seen.len() as i64 == chi[0]
}

struct Uf(Vec<usize>);

impl Uf {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            self.0[hi] = lo;
        }
    }
}

impl RelHomology {
    /// Homology of `(X, A)` for closed cell sets `A ⊆ X`.
    pub fn of_cells(lattice: Lattice, x: HashSet<Cell>, a: HashSet<Cell>) -> Result<Self> {
        let x: HashSet<Cell> = x.into_iter().map(|c| lattice.norm(c)).collect();
        let a: HashSet<Cell> = a.into_iter().map(|c| lattice.norm(c)).collect();
        for (set, name) in [(&x, "X"), (&a, "A")] {
            for &c in set {
                if let Some((f, _)) = lattice.boundary(c).into_iter().find(|(f, _)| !set.contains(f)) {
                    return Err(Error::InvalidComplex(format!("{name} is not closed: face {f:?} of {c:?} missing")));
                }
            }
        }
        if let Some(c) = a.iter().find(|c| !x.contains(c)) {
            return Err(Error::InvalidComplex(format!("cell {c:?} of A is not in X")));
        }

        let mut rel: Vec<Cell> = x.iter().copied().filter(|c| !a.contains(c)).collect();
        rel.sort_unstable();
        let idx: HashMap<Cell, usize> = rel.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let mut uf = Uf((0..rel.len()).collect());
        for (k, &c) in rel.iter().enumerate() {
            for (f, _) in lattice.boundary(c) {
                if let Some(&m) = idx.get(&f) {
                    uf.union(k, m);
                }
            }
        }
        let mut group_id: HashMap<usize, usize> = HashMap::new();
        let mut members: Vec<Vec<Cell>> = Vec::new();
        let mut group_of = HashMap::with_capacity(rel.len());
        for (k, &c) in rel.iter().enumerate() {
            let r = uf.find(k);
            let g = *group_id.entry(r).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            members[g].push(c);
            group_of.insert(c, g);
        }

        let mut groups = Vec::with_capacity(members.len());
        for cells in &members {
            groups.push(build_group(&lattice, cells, &a)?);
        }

        let mut betti = [0usize; 3];
        let mut torsion = Vec::new();
        let mut h0_gens = Vec::new();
        let mut h0_of_group = vec![None; groups.len()];
        let mut h1_gens = Vec::new();
        for (g, grp) in groups.iter_mut().enumerate() {
            if !grp.touches {
                h0_of_group[g] = Some(h0_gens.len());
                h0_gens.push((grp.vertex0.expect("untouched group has a vertex"), g));
            }
            betti[2] += grp.squares - grp.rank2();
            torsion.extend(grp.smith.diag.iter().filter(|d| !d.is_one()).cloned());
            grp.h1_offset = h1_gens.len();
            for f in grp.smith.rank()..grp.rest.len() {
                let mut acc = BTreeMap::new();
                for (k, &r) in grp.rest.iter().enumerate() {
                    let w = grp.smith.u_inv.get(k, f);
                    if w.is_zero() {
                        continue;
                    }
                    let w = w.to_i64().ok_or_else(|| Error::Homology("generator coefficient overflow".into()))?;
                    grp.fundamental_cycle(r, w, &mut acc);
                }
                let chain: Chain = acc.into_iter().filter(|&(_, v)| v != 0).map(|(e, v)| (grp.edges[e].0, v)).collect();
                h1_gens.push(Generator { group: g, chain });
            }
        }
        betti[0] = h0_gens.len();
        betti[1] = h1_gens.len();
        Ok(RelHomology { lattice, betti, torsion, h0_gens, h1_gens, groups, group_of, x, a, h0_of_group })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// A relative cell of the group (its smallest in sorted order).
    pub fn group_rep(&self, g: usize) -> Cell {
        self.groups[g].rep
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.x.contains(&self.lattice.norm(c))
    }

    pub fn in_subcomplex(&self, c: Cell) -> bool {
        self.a.contains(&self.lattice.norm(c))
    }

    /// Free H₁ coordinates of a relative 1-cycle. Edges in `A` are ignored;
    /// edges outside `X` or a nonzero relative boundary are errors.
    pub fn h1_coords(&self, chain: &[(Cell, i64)]) -> Result<Vec<BigInt>> {
        let mut per: BTreeMap<usize, BTreeMap<usize, i64>> = BTreeMap::new();
        let mut bd: HashMap<Cell, i64> = HashMap::new();
        for &(c, v) in chain {
            let c = self.lattice.norm(c);
            if dim(c) != 1 {
                return Err(Error::Homology(format!("cell {c:?} is not an edge")));
            }
            if !self.x.contains(&c) {
                return Err(Error::Homology(format!("edge {c:?} is not in the complex")));
            }
            if self.a.contains(&c) || v == 0 {
                continue;
            }
            let g = self.group_of[&c];
            *per.entry(g).or_default().entry(self.groups[g].edge_idx[&c]).or_default() += v;
            for (f, s) in self.lattice.boundary(c) {
                if !self.a.contains(&f) {
                    *bd.entry(f).or_default() += s * v;
                }
            }
        }
        if let Some((f, _)) = bd.iter().find(|(_, v)| **v != 0) {
            return Err(Error::Homology(format!("chain is not a relative cycle at {f:?}")));
        }
        let mut out = vec![BigInt::zero(); self.betti[1]];
        for (g, ch) in per {
            let grp = &self.groups[g];
            for (k, y) in grp.coords(&ch)?.into_iter().enumerate() {
                out[grp.h1_offset + k] = y;
            }
        }
        Ok(out)
    }

    /// Free H₀ coordinates of a vertex.
    pub fn h0_coords(&self, v: Cell) -> Result<Vec<BigInt>> {
        let v = self.lattice.norm(v);
        let mut out = vec![BigInt::zero(); self.betti[0]];
        if !self.x.contains(&v) {
            return Err(Error::Homology(format!("vertex {v:?} is not in the complex")));
        }
        if !self.a.contains(&v) {
            if let Some(k) = self.h0_of_group[self.group_of[&v]] {
                out[k] = BigInt::one();
            }
        }
        Ok(out)
    }
}

fn build_group(lattice: &Lattice, cells: &[Cell], a: &HashSet<Cell>) -> Result<Group> {
    let mut verts: Vec<Cell> = cells.iter().copied().filter(|&c| dim(c) == 0).collect();
    verts.sort_unstable();
    let edge_cells: Vec<Cell> = cells.iter().copied().filter(|&c| dim(c) == 1).collect();
    let squares: Vec<Cell> = cells.iter().copied().filter(|&c| dim(c) == 2).collect();
    let touches = cells.iter().any(|&c| lattice.boundary(c).iter().any(|(f, _)| a.contains(f)));
    let base = usize::from(touches);
    let node_of: HashMap<Cell, usize> = verts.iter().enumerate().map(|(k, &v)| (v, k + base)).collect();
    let n_nodes = verts.len() + base;
    let node = |v: Cell| if a.contains(&v) { 0 } else { node_of[&v] };
    let edges: Vec<(Cell, usize, usize)> = edge_cells
        .iter()
        .map(|&e| {
            let (t, h) = lattice.endpoints(e);
            (e, node(t), node(h))
        })
        .collect();
    let edge_idx: HashMap<Cell, usize> = edges.iter().enumerate().map(|(k, e)| (e.0, k)).collect();

    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_nodes];
    for (k, &(_, t, h)) in edges.iter().enumerate() {
        adj[t].push((h, k));
        adj[h].push((t, k));
    }
    let mut parent: Vec<Option<(usize, i64)>> = vec![None; n_nodes];
    let mut depth = vec![usize::MAX; n_nodes];
    let mut tree_edge = vec![false; edges.len()];
    if n_nodes > 0 {
        depth[0] = 0;
        let mut q = VecDeque::from([0]);
        while let Some(u) = q.pop_front() {
            for &(w, k) in &adj[u] {
                if depth[w] == usize::MAX {
                    depth[w] = depth[u] + 1;
                    let orient = if edges[k].1 == u { 1 } else { -1 };
                    parent[w] = Some((k, orient));
                    tree_edge[k] = true;
                    q.push_back(w);
                }
            }
        }
        if depth.iter().any(|&d| d == usize::MAX) {
            return Err(Error::Homology("relative group graph is disconnected".into()));
        }
    }
    let mut row_of_edge = vec![None; edges.len()];
    let mut edge_of_row = Vec::new();
    for k in 0..edges.len() {
        if !tree_edge[k] {
            row_of_edge[k] = Some(edge_of_row.len());
            edge_of_row.push(k);
        }
    }
    let mut cols: Vec<BTreeMap<usize, i64>> = Vec::with_capacity(squares.len());
    for &s in &squares {
        let mut col = BTreeMap::new();
        for (f, sign) in lattice.boundary(s) {
            if let Some(&k) = edge_idx.get(&f) {
                if let Some(r) = row_of_edge[k] {
                    *col.entry(r).or_insert(0) += sign;
                }
            }
        }
        col.retain(|_, v| *v != 0);
        cols.push(col);
    }
    let (pivots, rest, dense) = eliminate(edge_of_row.len(), cols)?;
    let smith = Smith::compute(&dense);
    Ok(Group {
        touches,
        rep: *cells.iter().min().expect("nonempty group"),
        vertex0: verts.first().copied(),
        edges,
        edge_idx,
        parent,
        depth,
        row_of_edge,
        edge_of_row,
        pivots,
        rest,
        smith,
        squares: squares.len(),
        h1_offset: 0,
    })
}

/// Reduces the presentation `ℤ^rows / ⟨cols⟩` by unit pivots, collapses
/// first. Returns the pivots, surviving rows and the dense remainder.
fn eliminate(nrows: usize, mut cols: Vec<BTreeMap<usize, i64>>) -> Result<(Vec<Pivot>, Vec<usize>, IntMatrix)> {
    let mut row_cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nrows];
    for (c, col) in cols.iter().enumerate() {
        for &r in col.keys() {
            row_cols[r].insert(c);
        }
    }
    let mut row_alive = vec![true; nrows];
    let mut col_alive: Vec<bool> = cols.iter().map(|c| !c.is_empty()).collect();
    let mut queue: VecDeque<usize> = (0..nrows).filter(|&r| row_cols[r].len() == 1).collect();
    let mut pivots = Vec::new();
    let overflow = || Error::Homology("coefficient overflow in presentation reduction".into());

    let pivot = |r: usize,
                 c: usize,
                 cols: &mut Vec<BTreeMap<usize, i64>>,
                 row_cols: &mut Vec<BTreeSet<usize>>,
                 queue: &mut VecDeque<usize>,
                 pivots: &mut Vec<Pivot>| {
        let col = std::mem::take(&mut cols[c]);
        for &rr in col.keys() {
            row_cols[rr].remove(&c);
            if rr != r && row_cols[rr].len() == 1 {
                queue.push_back(rr);
            }
        }
        pivots.push(Pivot { row: r, unit: col[&r], col: col.into_iter().collect() });
    };

    loop {
        while let Some(r) = queue.pop_front() {
            if !row_alive[r] || row_cols[r].len() != 1 {
                continue;
            }
            let c = *row_cols[r].iter().next().expect("one column");
            if cols[c][&r].abs() != 1 {
                continue;
            }
            pivot(r, c, &mut cols, &mut row_cols, &mut queue, &mut pivots);
            row_alive[r] = false;
            col_alive[c] = false;
        }
        // cheapest unit entry elsewhere
        let mut best: Option<(usize, usize, usize)> = None;
        for c in 0..cols.len() {
            if !col_alive[c] {
                continue;
            }
            for (&r, &v) in &cols[c] {
                if v.abs() == 1 {
                    let cost = (cols[c].len() - 1) * (row_cols[r].len() - 1);
                    if best.is_none_or(|b| cost < b.0) {
                        best = Some((cost, r, c));
                    }
                }
            }
        }
        let Some((_, r, c)) = best else { break };
        let u = cols[c][&r];
        let pc: Vec<(usize, i64)> = cols[c].iter().map(|(&k, &v)| (k, v)).collect();
        let others: Vec<usize> = row_cols[r].iter().copied().filter(|&k| k != c).collect();
        for c2 in others {
            let f = cols[c2][&r].checked_mul(u).ok_or_else(overflow)?;
            for &(rr, v) in &pc {
                let cur = cols[c2].get(&rr).copied().unwrap_or(0);
                let nv = cur.checked_sub(f.checked_mul(v).ok_or_else(overflow)?).ok_or_else(overflow)?;
                if nv == 0 {
                    cols[c2].remove(&rr);
                    row_cols[rr].remove(&c2);
                    if row_cols[rr].len() == 1 {
                        queue.push_back(rr);
                    }
                } else {
                    if cur == 0 {
                        row_cols[rr].insert(c2);
                    }
                    cols[c2].insert(rr, nv);
                }
            }
            if cols[c2].is_empty() {
                col_alive[c2] = false;
            }
        }
        pivot(r, c, &mut cols, &mut row_cols, &mut queue, &mut pivots);
        row_alive[r] = false;
        col_alive[c] = false;
    }
    let rest: Vec<usize> = (0..nrows).filter(|&r| row_alive[r]).collect();
    let live: Vec<usize> = (0..cols.len()).filter(|&c| col_alive[c] && !cols[c].is_empty()).collect();
    let pos: HashMap<usize, usize> = rest.iter().enumerate().map(|(k, &r)| (r, k)).collect();
    let mut dense = IntMatrix::zeros(rest.len(), live.len());
    for (j, &c) in live.iter().enumerate() {
        for (&r, &v) in &cols[c] {
            dense.set(pos[&r], j, BigInt::from(v));
        }
    }
    Ok((pivots, rest, dense))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;

    fn plane(side: i64) -> Lattice {
        Lattice::new(side, false).unwrap()
    }

    fn h(l: Lattice, p1: &[(i64, i64)], p0: &[(i64, i64)]) -> RelHomology {
        relative_homology(&CubicalPair::new(l, p1, p0).unwrap()).unwrap()
    }

    fn ring(n: i64) -> Vec<(i64, i64)> {
        let mut v = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                    v.push((i, j));
                }
            }
        }
        v
    }

    /// ∂ of a chain, dropping cells of a subcomplex.
    fn boundary(l: &Lattice, ch: &[(Cell, i64)], skip: &HashSet<Cell>) -> HashMap<Cell, i64> {
        let mut out = HashMap::new();
        for &(c, v) in ch {
            for (f, s) in l.boundary(c) {
                if !skip.contains(&f) {
                    *out.entry(f).or_insert(0) += s * v;
                }
            }
        }
        out.retain(|_, v| *v != 0);
        out
    }

    #[test]
    fn boundary_squares_to_zero() {
        let l = Lattice::new(4, true).unwrap();
        for x in 0..8 {
            for y in 0..8 {
                let bb = boundary(&l, &l.boundary((x, y)).iter().map(|&(c, s)| (c, s)).collect::<Vec<_>>(), &HashSet::new());
                assert!(bb.is_empty());
            }
        }
    }

    #[test]
    fn single_box_and_annulus() {
        let r = h(plane(8), &[(3, 3)], &[]);
        assert_eq!(r.betti, [1, 0, 0]);
        let r = h(plane(8), &ring(4), &[]);
        assert_eq!(r.betti, [1, 1, 0]);
        let g = &r.h1_gens[0];
        assert!(boundary(&r.lattice, &g.chain, &HashSet::new()).is_empty());
        assert_eq!(r.h1_coords(&g.chain).unwrap(), vec![BigInt::one()]);
        // the same loop pushed around the ring is homologous to it
        let outer: Chain = ring_loop(0, 4);
        let c = r.h1_coords(&outer).unwrap();
        assert_eq!(c[0].abs(), BigInt::one());
    }

    /// Counter-clockwise boundary loop of the square `[a, b]²` (lattice units).
    fn ring_loop(a: i64, b: i64) -> Chain {
        let (a, b) = (2 * a, 2 * b);
        let mut ch = Vec::new();
        for x in (a..b).step_by(2) {
            ch.push(((x + 1, a), 1));
            ch.push(((x + 1, b), -1));
        }
        for y in (a..b).step_by(2) {
            ch.push(((b, y + 1), 1));
            ch.push(((a, y + 1), -1));
        }
        ch
    }

    #[test]
    fn strip_relative_to_its_ends() {
        let strip: Vec<(i64, i64)> = (0..6).map(|i| (i, 2)).collect();
        let r = h(plane(8), &strip, &[(0, 2), (5, 2)]);
        assert_eq!(r.betti, [0, 1, 0]);
        assert!(r.torsion.is_empty());
        let g = &r.h1_gens[0];
        assert!(boundary(&r.lattice, &g.chain, &closure_of(&r.lattice, &[(0, 2), (5, 2)])).is_empty());
        // strip with one end only is contractible relative to it
        let r = h(plane(8), &strip, &[(0, 2)]);
        assert_eq!(r.betti, [0, 0, 0]);
    }

    #[test]
    fn blobs_and_torus() {
        let r = h(plane(16), &[(0, 0), (1, 0), (5, 5), (5, 6), (9, 9)], &[]);
        assert_eq!(r.betti, [3, 0, 0]);
        // diagonal touch is connected
        let r = h(plane(8), &[(1, 1), (2, 2)], &[]);
        assert_eq!(r.betti, [1, 0, 0]);
        // a full row of the torus is an annulus, the whole torus is a torus
        let t = Lattice::new(4, true).unwrap();
        let row: Vec<(i64, i64)> = (0..4).map(|i| (i, 1)).collect();
        assert_eq!(h(t, &row, &[]).betti, [1, 1, 0]);
        let all: Vec<(i64, i64)> = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
        assert_eq!(h(t, &all, &[]).betti, [1, 2, 1]);
        assert_eq!(h(t, &all, &all).betti, [0, 0, 0]);
    }

    #[test]
    fn acyclicity_examples() {
        let l = plane(8);
        assert!(acyclicity_check(&l, &[(2, 2)]));
        assert!(acyclicity_check(&l, &[(2, 2), (3, 3)]));
        assert!(!acyclicity_check(&l, &ring(3)));
        assert!(!acyclicity_check(&l, &[(0, 0), (4, 4)]));
        assert!(!acyclicity_check(&l, &[]));
    }

    #[test]
    fn fast_acyclicity_agrees_with_homology() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for torus in [false, true] {
            let l = Lattice::new(5, torus).unwrap();
            for _ in 0..300 {
                let n = rng.gen_range(1..12);
                let boxes: Vec<(i64, i64)> = (0..n).map(|_| (rng.gen_range(0..5), rng.gen_range(0..5))).collect();
                let cells = closure_of(&l, &boxes);
                assert_eq!(is_acyclic_cells(&l, &cells), acyclicity_check(&l, &boxes), "{boxes:?} torus={torus}");
            }
        }
    }

    #[test]
    fn euler_characteristic_matches_betti() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for torus in [false, true] {
            let l = Lattice::new(6, torus).unwrap();
            for _ in 0..200 {
                let p1: Vec<(i64, i64)> = (0..rng.gen_range(1..30)).map(|_| (rng.gen_range(0..6), rng.gen_range(0..6))).collect();
                let p0: Vec<(i64, i64)> = p1.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
                let pair = CubicalPair::new(l, &p1, &p0).unwrap();
                let x = pair.p1_cells();
                let a = pair.p0_cells();
                let mut chi = 0i64;
                for c in x.difference(&a) {
                    chi += if dim(*c) == 1 { -1 } else { 1 };
                }
                let r = relative_homology(&pair).unwrap();
                assert_eq!(chi, r.betti[0] as i64 - r.betti[1] as i64 + r.betti[2] as i64);
                assert!(r.torsion.is_empty());
                for g in &r.h1_gens {
                    assert!(boundary(&l, &g.chain, &a).is_empty());
                }
                // generators are independent: coordinates form the identity
                for (k, g) in r.h1_gens.iter().enumerate() {
                    let c = r.h1_coords(&g.chain).unwrap();
                    for (m, v) in c.iter().enumerate() {
                        assert_eq!(*v, BigInt::from(i64::from(m == k)));
                    }
                }
            }
        }
    }

    #[test]
    fn validation_errors() {
        let l = plane(4);
        assert!(matches!(CubicalPair::new(l, &[(0, 0)], &[(1, 1)]), Err(Error::InvalidComplex(_))));
        let open: HashSet<Cell> = [(1, 1)].into_iter().collect();
        assert!(matches!(RelHomology::of_cells(l, open, HashSet::new()), Err(Error::InvalidComplex(_))));
        assert!(Lattice::new(1, true).is_err());
        let r = h(plane(8), &ring(4), &[]);
        assert!(r.h1_coords(&[((1, 0), 1)]).is_err());
        assert!(r.h1_coords(&[((21, 0), 1)]).is_err());
    }
}
