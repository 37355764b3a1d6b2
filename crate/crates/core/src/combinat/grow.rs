//! Isolating neighbourhoods: top-down growth on a fixed tree and bottom-up
//! growth by lazy insertion.

use std::collections::BTreeSet;

use log::{debug, info};

use super::{
    ids_of_keys, insert_image, insert_onebox, invariant_set, keys_of_ids, lattice_onebox_keys, onebox, transition_matrix,
    AdjMatrix, CacheKey, CombEnclosure, ImageCache,
};
use crate::boxtree::{BoxId, BoxTree};
use crate::dynamics::{Domain, PlanarMap};
use crate::error::{Error, Result};

/// True iff `o(Inv(N)) ⊆ N` where `o` uses full lattice neighbours (so a
/// dead neighbour counts as a violation).
pub fn is_isolating(tree: &BoxTree, domain: &Domain, n: &[BoxId], t: &CombEnclosure) -> Result<bool> {
    let inv = invariant_set(n, t)?;
    let keys = lattice_onebox_keys(tree, domain, &inv);
    Ok(keys.iter().all(|&k| tree.id_of_key(k).is_some_and(|id| n.binary_search(&id).is_ok())))
}

/// Alternates invariant set and one-box neighbourhood until stable. Returns
/// the neighbourhood `o(I)` and the invariant set `I`.
pub fn grow_isolating(
    s: &[BoxId],
    t: &CombEnclosure,
    adj: &AdjMatrix,
    tree: &BoxTree,
    domain: &Domain,
) -> Result<(Vec<BoxId>, Vec<BoxId>)> {
    let mut s = s.to_vec();
    s.sort_unstable();
    s.dedup();
    loop {
        let inv = invariant_set(&s, t).map_err(|e| match e {
            Error::IncompleteMap(b) => Error::Coverage(format!("box {b} has no image column")),
            e => e,
        })?;
        let oi = onebox(&inv, adj);
        let lattice = lattice_onebox_keys(tree, domain, &inv);
        if lattice.len() != oi.len() {
            return Err(Error::Coverage(format!(
                "one-box neighbourhood of {} invariant boxes is not contained in the tree",
                inv.len()
            )));
        }
        if oi.iter().all(|b| s.binary_search(b).is_ok()) {
            return Ok((oi, inv));
        }
        s = oi;
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GrowLimits {
    pub max_iterations: usize,
    pub max_boxes: usize,
}

impl Default for GrowLimits {
    fn default() -> Self {
        GrowLimits { max_iterations: 10_000, max_boxes: 4_000_000 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GrowReport {
    /// The isolating neighbourhood `o(I)`, as ids of the final tree.
    pub s: Vec<BoxId>,
    /// The invariant set `I`.
    pub inv: Vec<BoxId>,
    pub iterations: usize,
    /// Every box that was a member of `S` at some iteration.
    pub ever_in_s: BTreeSet<CacheKey>,
    /// Cache keys created while growing.
    pub created: BTreeSet<CacheKey>,
    pub evaluations: usize,
}

impl GrowReport {
    /// Images were evaluated exactly for the boxes that were in `S` at some
    /// iteration. Only meaningful when growth started from a cold cache.
    pub fn lazy_property(&self, cache: &ImageCache) -> bool {
        self.created == self.ever_in_s && self.ever_in_s.iter().all(|k| cache.contains(k))
    }
}

/// Bottom-up growth starting from every box currently in the tree.
pub fn grow_insert(tree: &mut BoxTree, sys: &dyn PlanarMap, cache: &mut ImageCache, limits: GrowLimits) -> Result<GrowReport> {
    let seed = tree.keys().to_vec();
    grow_insert_from(tree, sys, cache, &seed, limits)
}

/// Bottom-up growth with `S` initialised to the given lattice keys (which
/// must be live). Only boxes that enter `S` get their images computed.
pub fn grow_insert_from(
    tree: &mut BoxTree,
    sys: &dyn PlanarMap,
    cache: &mut ImageCache,
    seed: &[u64],
    limits: GrowLimits,
) -> Result<GrowReport> {
    grow_insert_keeping(tree, sys, cache, seed, &[], limits)
}

/// As [`grow_insert_from`], but every iteration sets `S = o(I) ∪ keep`, so
/// the kept boxes never drop out of the neighbourhood.
pub fn grow_insert_keeping(
    tree: &mut BoxTree,
    sys: &dyn PlanarMap,
    cache: &mut ImageCache,
    seed: &[u64],
    keep: &[u64],
    limits: GrowLimits,
) -> Result<GrowReport> {
    let domain = sys.domain();
    let depth = tree.depth();
    let evals0 = cache.evaluations();
    cache.start_journal();
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let mut s_keys: Vec<u64> = seed.iter().chain(&keep).copied().collect();
    s_keys.sort_unstable();
    s_keys.dedup();
    let mut report = GrowReport::default();
    let mut final_inv: Vec<u64> = Vec::new();
    report.ever_in_s.extend(s_keys.iter().map(|&k| (depth, k)));
    let result = loop {
        report.iterations += 1;
        if report.iterations > limits.max_iterations {
            break Err(Error::NotIsolating(format!("no isolation after {} iterations", limits.max_iterations)));
        }
        let s_ids = ids_of_keys(tree, &s_keys);
        let t = transition_matrix(tree, sys, cache, Some(&s_ids));
        let inv = invariant_set(&s_ids, &t)?;
        let mut oi_keys: Vec<u64> =
            lattice_onebox_keys(tree, &domain, &inv).into_iter().filter(|&k| tree.id_of_key(k).is_some()).collect();
        let achieved = oi_keys.iter().all(|k| s_keys.binary_search(k).is_ok());
        if !keep.is_empty() {
            oi_keys.extend_from_slice(&keep);
            oi_keys.sort_unstable();
            oi_keys.dedup();
        }
        let inv_keys = keys_of_ids(tree, &inv);
        s_keys = oi_keys;
        report.ever_in_s.extend(s_keys.iter().map(|&k| (depth, k)));
        let before = tree.len();
        let inv_ids = ids_of_keys(tree, &inv_keys);
        insert_onebox(tree, &domain, &inv_ids);
        let oi_ids = ids_of_keys(tree, &s_keys);
        insert_image(tree, sys, cache, &oi_ids);
        let added = tree.len() - before;
        debug!(
            "grow iteration {}: |S|={} |I|={} tree={} added={} isolated={}",
            report.iterations,
            s_keys.len(),
            inv_keys.len(),
            tree.len(),
            added,
            achieved
        );
        if report.iterations % 10 == 0 {
            info!("grow: iteration {} |S|={} tree={}", report.iterations, s_keys.len(), tree.len());
        }
        if achieved && added == 0 {
            final_inv = inv_keys;
            break Ok(());
        }
        if tree.len() > limits.max_boxes {
            break Err(Error::NotIsolating(format!("tree exceeded {} boxes", limits.max_boxes)));
        }
    };
    report.created = cache.take_journal().into_iter().collect();
    report.evaluations = cache.evaluations() - evals0;
    result?;
    report.inv = ids_of_keys(tree, &final_inv);
    report.s = ids_of_keys(tree, &s_keys);
    info!("grow: isolated after {} iterations, |S|={} |I|={}", report.iterations, report.s.len(), report.inv.len());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinat::adjacency_matrix;
    use crate::dynamics::{Point2, SystemSpec};
    use crate::interval::{IvRect, IvScalar};

    /// Linear saddle `(x, y) ↦ (4x, y/4)` around the centre of the plane box.
    struct Saddle;

    impl PlanarMap for Saddle {
        fn domain(&self) -> Domain {
            Domain::Plane { root: IvRect::new(IvScalar::new(-1.0, 1.0).unwrap(), IvScalar::new(-1.0, 1.0).unwrap()) }
        }
        fn eval_point(&self, p: Point2) -> Point2 {
            Point2::new(4.0 * p.x, p.y / 4.0)
        }
        fn enclose(&self, r: &IvRect) -> Vec<IvRect> {
            vec![IvRect::new(r.x.scale(4.0), r.y.scale(0.25))]
        }
    }

    fn plane_tree(depth: u32) -> BoxTree {
        BoxTree::new([0.0, 0.0], [1.0, 1.0], depth).unwrap()
    }

    #[test]
    fn saddle_seed_grows_to_minimal_block() {
        let mut tree = plane_tree(6);
        tree.insert(&[Point2::new(0.01, 0.01)]);
        let mut cache = ImageCache::new();
        let r = grow_insert(&mut tree, &Saddle, &mut cache, GrowLimits::default()).unwrap();
        assert!(r.lazy_property(&cache));
        let t = transition_matrix(&tree, &Saddle, &mut cache, Some(&r.s));
        assert!(is_isolating(&tree, &Saddle.domain(), &r.s, &t).unwrap());
        assert!(r.inv.iter().all(|b| r.s.contains(b)));
    }

    #[test]
    fn empty_invariant_set_is_trivially_isolating() {
        let mut tree = plane_tree(4);
        tree.fill();
        let mut cache = ImageCache::new();
        let sys = Saddle;
        let t = transition_matrix(&tree, &sys, &mut cache, None);
        let adj = adjacency_matrix(&tree, &sys.domain());
        // boxes at the far right all map off the grid
        let s: Vec<BoxId> = (0..tree.len()).filter(|&b| tree.cell(b).0 == 15).collect();
        let (n, i) = grow_isolating(&s, &t, &adj, &tree, &sys.domain()).unwrap();
        assert!(n.is_empty() && i.is_empty());
    }

    #[test]
    fn top_down_matches_bottom_up_on_horseshoe() {
        let sys = SystemSpec::horseshoe();
        let domain = sys.domain;
        let mut full = BoxTree::from_root(&domain.root(), 5).unwrap();
        full.fill();
        let mut cache = ImageCache::new();
        let t = transition_matrix(&full, &sys, &mut cache, None);
        let adj = adjacency_matrix(&full, &domain);
        let interior: Vec<BoxId> = (0..full.len())
            .filter(|&b| {
                let (i, j) = full.cell(b);
                (1..31).contains(&i) && (1..31).contains(&j)
            })
            .collect();
        let (n, inv) = grow_isolating(&interior, &t, &adj, &full, &domain).unwrap();
        assert!(is_isolating(&full, &domain, &n, &t).unwrap());

        let mut tree = BoxTree::from_root(&domain.root(), 5).unwrap();
        tree.insert(&[Point2::new(0.0, 0.0), Point2::new(0.75, 0.75)]);
        let mut c2 = ImageCache::new();
        let r = grow_insert(&mut tree, &sys, &mut c2, GrowLimits::default()).unwrap();
        assert!(r.lazy_property(&c2));
        let bottom: BTreeSet<(u32, u32)> = r.inv.iter().map(|&b| tree.cell(b)).collect();
        let top: BTreeSet<(u32, u32)> = inv.iter().map(|&b| full.cell(b)).collect();
        assert!(bottom.is_subset(&top));
        assert!(!bottom.is_empty());
    }
}
