//! Combinatorial dynamics on the box grid: adjacency, transition matrices,
//! one-box neighbourhoods, invariant sets, neighbourhood growth and index
//! pairs.
//!
//! Box sets are passed around as sorted `Vec<BoxId>`. Anything that has to
//! survive a tree mutation is kept as lattice keys instead (see
//! [`crate::boxtree::morton`]).

mod enclosure;
mod graph;
mod grow;
mod pair;

pub use enclosure::{transition_matrix, CacheKey, CellBlock, CellImage, CombEnclosure, Grid, ImageCache};
pub use graph::{cycle_nodes, invariant_set, scc};
pub use grow::{grow_insert, grow_insert_from, grow_insert_keeping, grow_isolating, is_isolating, GrowLimits, GrowReport};
pub use pair::{build_index_pair, exit_closure_step, verify_index_pair, IndexPair, PairReport};

use crate::boxtree::{BoxId, BoxTree, RenumberMap};
use crate::dynamics::{Domain, PlanarMap};

/// Symmetric 0/1 adjacency of live boxes (closed cells, wrapping on the
/// torus), stored as sorted neighbour lists that include the box itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjMatrix {
    nbrs: Vec<Vec<BoxId>>,
}

impl AdjMatrix {
    pub fn len(&self) -> usize {
        self.nbrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nbrs.is_empty()
    }

    pub fn neighbors(&self, i: BoxId) -> &[BoxId] {
        &self.nbrs[i]
    }

    pub fn adjacent(&self, i: BoxId, j: BoxId) -> bool {
        self.nbrs[i].binary_search(&j).is_ok()
    }
}

pub fn adjacency_matrix(tree: &BoxTree, domain: &Domain) -> AdjMatrix {
    let grid = Grid::new(tree, domain);
    let nbrs = (0..tree.len())
        .map(|id| {
            let (i, j) = tree.cell(id);
            let mut v: Vec<BoxId> = grid.neighbors(i, j).filter_map(|k| tree.id_of_key(k)).collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    AdjMatrix { nbrs }
}

/// `o(S)`: `S` together with every live box touching it.
pub fn onebox(s: &[BoxId], adj: &AdjMatrix) -> Vec<BoxId> {
    let mut out: Vec<BoxId> = s.iter().flat_map(|&b| adj.neighbors(b).iter().copied()).collect();
    out.extend_from_slice(s);
    out.sort_unstable();
    out.dedup();
    out
}

/// Lattice keys of the full (not just live) one-box neighbourhood.
pub fn lattice_onebox_keys(tree: &BoxTree, domain: &Domain, s: &[BoxId]) -> Vec<u64> {
    let grid = Grid::new(tree, domain);
    let mut keys: Vec<u64> = s
        .iter()
        .flat_map(|&b| {
            let (i, j) = tree.cell(b);
            grid.neighbors(i, j).collect::<Vec<_>>()
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys
}

/// Adds every lattice neighbour of `S` to the tree.
pub fn insert_onebox(tree: &mut BoxTree, domain: &Domain, s: &[BoxId]) -> RenumberMap {
    let keys = lattice_onebox_keys(tree, domain, s);
    let add: Vec<u64> = keys.into_iter().filter(|k| tree.id_of_key(*k).is_none()).collect();
    tree.insert_keys(add)
}

/// Evaluates the images of `S` (through the cache) and makes every in-grid
/// cell they meet live.
pub fn insert_image(tree: &mut BoxTree, sys: &dyn PlanarMap, cache: &mut ImageCache, s: &[BoxId]) -> RenumberMap {
    let grid = Grid::new(tree, &sys.domain());
    let keys: Vec<u64> = s.iter().map(|&b| tree.keys()[b]).collect();
    cache.ensure(&grid, tree, sys, &keys);
    let mut add: Vec<u64> = keys
        .iter()
        .flat_map(|k| cache.get(&(grid.depth, *k)).expect("ensured").keys(&grid))
        .filter(|k| tree.id_of_key(*k).is_none())
        .collect();
    add.sort_unstable();
    add.dedup();
    tree.insert_keys(add)
}

/// Box ids of sorted lattice keys that are live (dead keys are dropped).
pub fn ids_of_keys(tree: &BoxTree, keys: &[u64]) -> Vec<BoxId> {
    let mut v: Vec<BoxId> = keys.iter().filter_map(|&k| tree.id_of_key(k)).collect();
    v.sort_unstable();
    v
}

pub fn keys_of_ids(tree: &BoxTree, ids: &[BoxId]) -> Vec<u64> {
    let mut v: Vec<u64> = ids.iter().map(|&b| tree.keys()[b]).collect();
    v.sort_unstable();
    v
}

/// Lattice components of a box set under closed-cell adjacency.
pub fn components(s: &[BoxId], adj: &AdjMatrix) -> Vec<Vec<BoxId>> {
    let inside: std::collections::HashSet<BoxId> = s.iter().copied().collect();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for &b in s {
        if !seen.insert(b) {
            continue;
        }
        let mut comp = vec![b];
        let mut k = 0;
        while k < comp.len() {
            let v = comp[k];
            k += 1;
            for &w in adj.neighbors(v) {
                if inside.contains(&w) && seen.insert(w) {
                    comp.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::{IvRect, IvScalar};
    use rand::{Rng, SeedableRng};

    fn torus_tree(depth: u32) -> BoxTree {
        BoxTree::new([0.5, 0.5], [0.5, 0.5], depth).unwrap()
    }

    fn closed_meet(a: &IvRect, b: &IvRect) -> bool {
        a.x.lo() <= b.x.hi() && b.x.lo() <= a.x.hi() && a.y.lo() <= b.y.hi() && b.y.lo() <= a.y.hi()
    }

    fn shifted(r: &IvRect, dx: f64, dy: f64) -> IvRect {
        IvRect::new(
            IvScalar::new(r.x.lo() + dx, r.x.hi() + dx).unwrap(),
            IvScalar::new(r.y.lo() + dy, r.y.hi() + dy).unwrap(),
        )
    }

    #[test]
    fn adjacency_matches_pairwise_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for torus in [true, false] {
            let domain = if torus { Domain::Torus } else { Domain::Plane { root: torus_tree(0).root() } };
            for _ in 0..20 {
                let mut t = torus_tree(4);
                let cs: Vec<(u32, u32)> = (0..60).map(|_| (rng.gen_range(0..16), rng.gen_range(0..16))).collect();
                t.insert_cells(&cs);
                let adj = adjacency_matrix(&t, &domain);
                for a in 0..t.len() {
                    for b in 0..t.len() {
                        let (ra, rb) = (t.rect(a), t.rect(b));
                        let meet = if torus {
                            [-1.0, 0.0, 1.0].iter().any(|&dx| [-1.0, 0.0, 1.0].iter().any(|&dy| closed_meet(&ra, &shifted(&rb, dx, dy))))
                        } else {
                            closed_meet(&ra, &rb)
                        };
                        assert_eq!(adj.adjacent(a, b), meet);
                    }
                }
            }
        }
    }

    #[test]
    fn wraparound_and_onebox() {
        let mut t = torus_tree(3);
        t.fill();
        let adj = adjacency_matrix(&t, &Domain::Torus);
        let a = t.id_of(0, 3).unwrap();
        let b = t.id_of(7, 3).unwrap();
        assert!(adj.adjacent(a, b));
        let c = t.id_of(4, 4).unwrap();
        assert_eq!(onebox(&[c], &adj).len(), 9);
        let mut u = torus_tree(3);
        u.insert_cells(&[(2, 2)]);
        let adj = adjacency_matrix(&u, &Domain::Torus);
        assert_eq!(onebox(&[0], &adj), vec![0]);
    }

    #[test]
    fn onebox_is_monotone() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut t = torus_tree(4);
        let cs: Vec<(u32, u32)> = (0..120).map(|_| (rng.gen_range(0..16), rng.gen_range(0..16))).collect();
        t.insert_cells(&cs);
        let adj = adjacency_matrix(&t, &Domain::Torus);
        for _ in 0..50 {
            let s: Vec<BoxId> = (0..t.len()).filter(|_| rng.gen_bool(0.1)).collect();
            let o1 = onebox(&s, &adj);
            let o2 = onebox(&o1, &adj);
            assert!(s.iter().all(|b| o1.contains(b)));
            assert!(o1.iter().all(|b| o2.contains(b)));
        }
    }

    #[test]
    fn insert_onebox_block_and_idempotence() {
        let mut t = torus_tree(4);
        t.insert_cells(&[(5, 5)]);
        let m = insert_onebox(&mut t, &Domain::Torus, &[0]);
        assert_eq!(t.len(), 9);
        assert_eq!(m.new_len(), 9);
        let id = t.id_of(5, 5).unwrap();
        let m = insert_onebox(&mut t, &Domain::Torus, &[id]);
        assert!(m.is_identity());
    }

    #[test]
    fn insert_image_covers_samples_and_is_idempotent() {
        use crate::dynamics::{Point2, SystemSpec};
        let sys = SystemSpec::standard(IvScalar::point(2.0)).unwrap();
        let mut t = torus_tree(6);
        t.insert_cells(&[(10, 20), (0, 0)]);
        let mut cache = ImageCache::new();
        let rects = [t.cell_rect(0, 0), t.cell_rect(10, 20)];
        insert_image(&mut t, &sys, &mut cache, &[0, 1]);
        assert!(t.id_of(0, 0).is_some());
        let ids: Vec<BoxId> = [(0, 0), (10, 20)].iter().map(|&(i, j)| t.id_of(i, j).unwrap()).collect();
        let m = insert_image(&mut t, &sys, &mut cache, &ids);
        assert!(m.is_identity());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for r in rects {
            for _ in 0..100 {
                let p = Point2::new(rng.gen_range(r.x.lo()..r.x.hi()), rng.gen_range(r.y.lo()..r.y.hi()));
                assert!(t.find(&[sys.eval_point(p)])[0].is_some());
            }
        }
    }
}
