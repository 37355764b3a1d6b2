//! Combinatorial index pairs.

use serde::Serialize;

use super::{invariant_set, is_isolating, lattice_onebox_keys, CombEnclosure};
use crate::boxtree::{BoxId, BoxTree};
use crate::dynamics::Domain;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexPair {
    pub p1: Vec<BoxId>,
    pub p0: Vec<BoxId>,
}

impl IndexPair {
    /// `P1 ∖ P0`.
    pub fn core(&self) -> Vec<BoxId> {
        self.p1.iter().copied().filter(|b| self.p0.binary_search(b).is_err()).collect()
    }
}

/// `P1 = S ∪ ℱ(S)`, `P0 = ℱ(S) ∖ S` for an isolating neighbourhood `S`.
pub fn build_index_pair(tree: &BoxTree, domain: &Domain, s: &[BoxId], t: &CombEnclosure) -> Result<IndexPair> {
    let mut s = s.to_vec();
    s.sort_unstable();
    s.dedup();
    if !is_isolating(tree, domain, &s, t)? {
        return Err(Error::NotIsolating("o(Inv(S)) is not contained in S".into()));
    }
    if let Some(&b) = s.iter().find(|&&b| t.escaped(b)) {
        return Err(Error::Coverage(format!("image of box {b} leaves the domain")));
    }
    let img = t.image_of(&s)?;
    let p0: Vec<BoxId> = img.iter().copied().filter(|b| s.binary_search(b).is_err()).collect();
    let mut p1 = s;
    p1.extend_from_slice(&p0);
    p1.sort_unstable();
    Ok(IndexPair { p1, p0 })
}

struct CoreNeighbors {
    /// Sorted live boxes of `o(core) ∖ core`.
    live: Vec<BoxId>,
    dead: usize,
}

fn core_neighbors(tree: &BoxTree, domain: &Domain, core: &[BoxId]) -> CoreNeighbors {
    let mut out = CoreNeighbors { live: Vec::new(), dead: 0 };
    for k in lattice_onebox_keys(tree, domain, core) {
        match tree.id_of_key(k) {
            Some(id) if core.binary_search(&id).is_err() => out.live.push(id),
            Some(_) => {}
            None => out.dead += 1,
        }
    }
    out.live.sort_unstable();
    out
}

/// Pairs `(b, e)` with `b ∈ P0`, `e ∈ ℱ(b)` touching the core and `e ∉ P0`.
fn touching_exits(pair: &IndexPair, t: &CombEnclosure, near: &[BoxId]) -> Vec<(BoxId, BoxId)> {
    let mut out = Vec::new();
    for &b in &pair.p0 {
        for &e in t.column(b).unwrap_or(&[]) {
            if near.binary_search(&e).is_ok() && pair.p0.binary_search(&e).is_err() {
                out.push((b, e));
            }
        }
    }
    out
}

/// Boxes that must join P0 so that no exit box maps onto the boundary of the
/// core outside P0: images of P0 touching the core and not yet in P0. Empty
/// once the exit set is closed.
pub fn exit_closure_step(pair: &IndexPair, t: &CombEnclosure, tree: &BoxTree, domain: &Domain) -> Vec<BoxId> {
    let core = pair.core();
    let near = core_neighbors(tree, domain, &core);
    let mut add: Vec<BoxId> = touching_exits(pair, t, &near.live).into_iter().map(|(_, e)| e).collect();
    add.sort_unstable();
    add.dedup();
    add
}

impl IndexPair {
    /// Adds boxes outside the core to P0 (and P1).
    pub fn extend_exit(&mut self, add: &[BoxId]) {
        for v in [&mut self.p0, &mut self.p1] {
            v.extend_from_slice(add);
            v.sort_unstable();
            v.dedup();
        }
    }
}

/// Outcome of the four combinatorial checks; each list names violating boxes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PairReport {
    /// (a) boxes of P0 not in P1.
    pub p0_not_in_p1: Vec<BoxId>,
    /// (b) boxes of P1∖P0 whose image leaves P1 (or is unknown).
    pub core_escapes: Vec<BoxId>,
    /// (c) boxes of P0 whose image meets P1∖P0 (or is unknown).
    pub exit_returns: Vec<BoxId>,
    /// Boxes of P0 whose image meets `o(P1∖P0)` outside P0; the induced map on
    /// the quotient is then not well defined.
    pub exit_touches: Vec<BoxId>,
    /// Lattice neighbours of P1∖P0 that are not live.
    pub dead_core_neighbors: usize,
    /// (d) boxes of o(Inv(P1∖P0)) outside P1∖P0.
    pub not_isolated: Vec<BoxId>,
    /// Lattice neighbours of Inv(P1∖P0) that are not live.
    pub missing_neighbors: usize,
}

impl PairReport {
    pub fn ok(&self) -> bool {
        self.p0_not_in_p1.is_empty()
            && self.core_escapes.is_empty()
            && self.exit_returns.is_empty()
            && self.exit_touches.is_empty()
            && self.dead_core_neighbors == 0
            && self.not_isolated.is_empty()
            && self.missing_neighbors == 0
    }
}

/// Checks a pair; 𝒯 must have columns on all of P1.
pub fn verify_index_pair(pair: &IndexPair, t: &CombEnclosure, tree: &BoxTree, domain: &Domain) -> PairReport {
    let in_p1 = |b: &BoxId| pair.p1.binary_search(b).is_ok();
    let in_p0 = |b: &BoxId| pair.p0.binary_search(b).is_ok();
    let core = pair.core();
    let mut rep = PairReport { p0_not_in_p1: pair.p0.iter().copied().filter(|b| !in_p1(b)).collect(), ..Default::default() };
    for &b in &core {
        match t.column(b) {
            Some(col) if !t.escaped(b) && col.iter().all(in_p1) => {}
            _ => rep.core_escapes.push(b),
        }
    }
    for &b in &pair.p0 {
        match t.column(b) {
            Some(col) if col.iter().all(|c| !in_p1(c) || in_p0(c)) => {}
            _ => rep.exit_returns.push(b),
        }
    }
    let near = core_neighbors(tree, domain, &core);
    rep.dead_core_neighbors = near.dead;
    rep.exit_touches = touching_exits(pair, t, &near.live).into_iter().map(|(b, _)| b).collect();
    rep.exit_touches.dedup();
    match invariant_set(&core, t) {
        Ok(inv) => {
            let keys = lattice_onebox_keys(tree, domain, &inv);
            for k in keys {
                match tree.id_of_key(k) {
                    Some(id) if core.binary_search(&id).is_ok() => {}
                    Some(id) => rep.not_isolated.push(id),
                    None => rep.missing_neighbors += 1,
                }
            }
        }
        Err(_) => rep.not_isolated = core.clone(),
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Full 4×4 grid on the unit square (plane domain).
    fn grid4() -> (BoxTree, Domain) {
        let mut t = BoxTree::new([0.5, 0.5], [0.5, 0.5], 2).unwrap();
        t.fill();
        let d = Domain::Plane { root: t.root() };
        (t, d)
    }

    fn ids(t: &BoxTree, cells: &[(u32, u32)]) -> Vec<BoxId> {
        let mut v: Vec<BoxId> = cells.iter().map(|&(i, j)| t.id_of(i, j).unwrap()).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn attracting_set_has_empty_exit() {
        let (t, d) = grid4();
        let a = t.id_of(0, 0).unwrap();
        let e = CombEnclosure::from_columns((0..t.len()).map(|_| Some(vec![a])).collect());
        let s = ids(&t, &[(0, 0), (1, 0), (0, 1), (1, 1)]);
        let pair = build_index_pair(&t, &d, &s, &e).unwrap();
        assert!(pair.p0.is_empty());
        assert_eq!(pair.p1, s);
        assert!(verify_index_pair(&pair, &e, &t, &d).ok());
    }

    #[test]
    fn exit_box_and_broken_pair() {
        let (t, d) = grid4();
        let a = t.id_of(0, 0).unwrap();
        let c = t.id_of(3, 3).unwrap();
        let far = t.id_of(3, 0).unwrap();
        let s = ids(&t, &[(0, 0), (1, 0), (0, 1), (1, 1)]);
        let mut cols: Vec<Option<Vec<BoxId>>> = (0..t.len()).map(|_| Some(vec![far])).collect();
        for &b in &s {
            cols[b] = Some(vec![c]);
        }
        cols[a] = Some(vec![a, c]);
        let e = CombEnclosure::from_columns(cols);
        let pair = build_index_pair(&t, &d, &s, &e).unwrap();
        assert_eq!(pair.p0, vec![c]);
        assert_eq!(pair.core(), s);
        assert!(verify_index_pair(&pair, &e, &t, &d).ok());

        let bad = IndexPair { p1: s.clone(), p0: vec![] };
        let rep = verify_index_pair(&bad, &e, &t, &d);
        assert_eq!(rep.core_escapes, s);
        assert!(!rep.ok());

        // an exit box that maps back into the core violates (c)
        let back = CombEnclosure::from_columns(
            (0..t.len()).map(|b| if b == c { Some(vec![a]) } else { e.column(b).map(|x| x.to_vec()) }).collect(),
        );
        let rep = verify_index_pair(&pair, &back, &t, &d);
        assert_eq!(rep.exit_returns, vec![c]);
    }

    #[test]
    fn rejects_non_isolating() {
        let (t, d) = grid4();
        let e = CombEnclosure::from_columns((0..t.len()).map(|i| Some(vec![i])).collect());
        let s = ids(&t, &[(1, 1)]);
        assert!(matches!(build_index_pair(&t, &d, &s, &e), Err(Error::NotIsolating(_))));
    }
}
