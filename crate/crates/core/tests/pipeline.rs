use std::collections::BTreeSet;

use indexpair::boxtree::{BoxId, BoxTree};
use indexpair::combinat::{transition_matrix, CombEnclosure, ImageCache};
use indexpair::dynamics::{PlanarMap, Point2};
use indexpair::pipeline::{cmd_run, Mode, RunConfig};
use rand::{Rng, SeedableRng};

/// Boxes with a bi-infinite path inside `s`, by repeated pruning of boxes
/// without a successor or predecessor in the set.
fn invariant_by_pruning(s: &[BoxId], t: &CombEnclosure) -> BTreeSet<BoxId> {
    let mut live: BTreeSet<BoxId> = s.iter().copied().collect();
    loop {
        let hit: BTreeSet<BoxId> = live.iter().flat_map(|&a| t.column(a).unwrap().iter().copied()).collect();
        let keep: BTreeSet<BoxId> =
            live.iter().copied().filter(|&b| hit.contains(&b) && t.column(b).unwrap().iter().any(|c| live.contains(c))).collect();
        if keep.len() == live.len() {
            return keep;
        }
        live = keep;
    }
}

/// Live boxes whose closed cells meet box `b` (uniform depth).
fn touching(tree: &BoxTree, b: BoxId, torus: bool) -> Vec<BoxId> {
    let side = 1i64 << tree.depth();
    let (i, j) = tree.cell(b);
    let mut out = Vec::new();
    for di in -1..=1 {
        for dj in -1..=1 {
            let (mut x, mut y) = (i as i64 + di, j as i64 + dj);
            if torus {
                x = x.rem_euclid(side);
                y = y.rem_euclid(side);
            } else if x < 0 || y < 0 || x >= side || y >= side {
                continue;
            }
            out.extend(tree.id_of(x as u32, y as u32));
        }
    }
    out
}

/// Re-derives the pair conditions from a fresh cache and brute-force set
/// operations, then samples points of the core.
fn recheck(cfg: &RunConfig) {
    let run = cmd_run(cfg).unwrap();
    assert!(run.result.ok, "{:?}", run.result.failure);
    let art = &run.artifacts;
    let tree = art.tree.as_ref().unwrap();
    let pair = art.pair.as_ref().unwrap();
    let sys = art.system.as_ref().unwrap();
    let torus = matches!(sys.domain(), indexpair::dynamics::Domain::Torus);

    let mut cache = ImageCache::new();
    let t = transition_matrix(tree, sys, &mut cache, Some(&pair.p1));
    let p1: BTreeSet<BoxId> = pair.p1.iter().copied().collect();
    let p0: BTreeSet<BoxId> = pair.p0.iter().copied().collect();
    let core: Vec<BoxId> = pair.p1.iter().copied().filter(|b| !p0.contains(b)).collect();
    let core_set: BTreeSet<BoxId> = core.iter().copied().collect();
    assert!(p0.is_subset(&p1));
    assert_eq!(core.len(), run.result.p1_boxes - run.result.p0_boxes);
    for &b in &core {
        assert!(!t.escaped(b));
        assert!(t.column(b).unwrap().iter().all(|c| p1.contains(c)), "core box {b} leaves P1");
    }
    for &e in &p0 {
        assert!(t.column(e).unwrap().iter().all(|c| !core_set.contains(c)), "exit box {e} returns");
    }

    let inv = invariant_by_pruning(&core, &t);
    assert!(!inv.is_empty());
    for &b in &inv {
        for c in touching(tree, b, torus) {
            assert!(core_set.contains(&c), "o(Inv) leaves the core at {c}");
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for &b in core.iter().step_by(core.len() / 200 + 1) {
        let r = tree.rect(b);
        for _ in 0..20 {
            let p = Point2::new(rng.gen_range(r.x.lo()..r.x.hi()), rng.gen_range(r.y.lo()..r.y.hi()));
            let q = sys.eval_point(p);
            let hit = tree.find(&[q])[0];
            assert!(hit.is_some_and(|h| p1.contains(&h)), "image of {p:?} in box {b} is outside P1");
        }
    }

    // lazy evaluation and accounting
    assert_eq!(art.created, art.ever_in_s);
    assert_eq!(run.result.image_evaluations, run.result.cache_insertions);
    assert!(run.result.image_evaluations >= art.created.len());
    assert!(run.result.image_evaluations <= art.ever_in_s.len() + tree.len());
    assert!(run.result.lazy_ok && run.result.pair_ok);
}

#[test]
fn horseshoe_pair_rechecks() {
    recheck(&RunConfig::horseshoe(6));
}

#[test]
fn standard_map_pair_rechecks() {
    let cfg = RunConfig { d_start: 4, d_end: 7, mode: Mode::Periodic, max_period: 2, ..Default::default() };
    recheck(&cfg);
}

#[test]
fn identical_configs_give_identical_results() {
    let a = cmd_run(&RunConfig::horseshoe(5)).unwrap();
    let b = cmd_run(&RunConfig::horseshoe(5)).unwrap();
    assert_eq!(a.artifacts.tree.as_ref().unwrap().keys(), b.artifacts.tree.as_ref().unwrap().keys());
    assert_eq!(a.artifacts.pair, b.artifacts.pair);
    assert_eq!(a.result.entropy_lb_str, b.result.entropy_lb_str);
}
