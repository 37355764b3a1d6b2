//! Connection insertion across depths: shortest paths in 𝒯 between seed
//! boxes, grown by one-box neighbourhoods and refined by subdivision.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::io::Write;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxtree::{BoxId, BoxTree};
use crate::combinat::{insert_onebox, transition_matrix, CombEnclosure, ImageCache};
use crate::dynamics::{Domain, PlanarMap, Point2, SystemSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonPair {
    pub src: Point2,
    pub dst: Point2,
    pub label: String,
}

/// Box ids along a path in 𝒯; empty means "no path".
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BoxPath(pub Vec<BoxId>);

impl BoxPath {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Every consecutive pair is an edge of `t`.
    pub fn is_valid(&self, t: &CombEnclosure) -> bool {
        self.0.windows(2).all(|w| t.entry(w[1], w[0]))
    }
}

/// Edge weights `K + h(xᵢ, xⱼ)` from box centres, for the standard map.
#[derive(Clone, Debug)]
pub struct ActionWeights {
    sys: SystemSpec,
    k: f64,
}

impl ActionWeights {
    /// Errors unless `K > K*`.
    pub fn new(sys: &SystemSpec, k: f64) -> Result<Self> {
        let kstar = sys.action_bound()?;
        if !(k > kstar) {
            return Err(Error::InvalidWeight(format!("K = {k} must exceed K* = {kstar}")));
        }
        Ok(ActionWeights { sys: sys.clone(), k })
    }

    /// `K* + 1`.
    pub fn default_for(sys: &SystemSpec) -> Result<Self> {
        Self::new(sys, sys.action_bound()? + 1.0)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn weight(&self, tree: &BoxTree, i: BoxId, j: BoxId) -> f64 {
        let (a, b) = (tree.box_center(i), tree.box_center(j));
        self.k + self.sys.action_h(a.x, b.x).expect("validated as standard map")
    }
}

/// Weight of every edge of 𝒯 (over the columns present).
pub fn action_weights(tree: &BoxTree, t: &CombEnclosure, sys: &SystemSpec, k: f64) -> Result<HashMap<(BoxId, BoxId), f64>> {
    let w = ActionWeights::new(sys, k)?;
    let mut out = HashMap::new();
    for i in 0..t.len() {
        if let Some(col) = t.column(i) {
            for &j in col {
                out.insert((i, j), w.weight(tree, i, j));
            }
        }
    }
    Ok(out)
}

fn unwind(parent: &[usize], src: BoxId, dst: BoxId) -> BoxPath {
    let mut path = vec![dst];
    let mut v = dst;
    while v != src {
        v = parent[v];
        path.push(v);
    }
    path.reverse();
    BoxPath(path)
}

#[derive(PartialEq)]
struct Dist(f64);

impl Eq for Dist {}

impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Shortest path from `src` to `dst` along 𝒯. Without weights this is BFS
/// (fewest edges); with weights, Dijkstra on nonnegative weights. Ties go to
/// the smaller predecessor id, so results are reproducible.
pub fn shortest_path(t: &CombEnclosure, src: BoxId, dst: BoxId, weights: Option<&dyn Fn(BoxId, BoxId) -> f64>) -> BoxPath {
    let n = t.len();
    if src >= n || dst >= n {
        return BoxPath::default();
    }
    if src == dst {
        return BoxPath(vec![src]);
    }
    let mut parent = vec![usize::MAX; n];
    match weights {
        None => {
            let mut queue = VecDeque::from([src]);
            parent[src] = src;
            while let Some(v) = queue.pop_front() {
                for &w in t.column(v).unwrap_or(&[]) {
                    if parent[w] == usize::MAX {
                        parent[w] = v;
                        if w == dst {
                            return unwind(&parent, src, dst);
                        }
                        queue.push_back(w);
                    }
                }
            }
            BoxPath::default()
        }
        Some(wf) => {
            let mut dist = vec![f64::INFINITY; n];
            let mut done = vec![false; n];
            dist[src] = 0.0;
            parent[src] = src;
            let mut heap = BinaryHeap::from([Reverse((Dist(0.0), src))]);
            while let Some(Reverse((Dist(d), v))) = heap.pop() {
                if done[v] {
                    continue;
                }
                done[v] = true;
                if v == dst {
                    return unwind(&parent, src, dst);
                }
                for &w in t.column(v).unwrap_or(&[]) {
                    if done[w] {
                        continue;
                    }
                    let nd = d + wf(v, w);
                    if nd < dist[w] || (nd == dist[w] && v < parent[w]) {
                        dist[w] = nd;
                        parent[w] = v;
                        heap.push(Reverse((Dist(nd), w)));
                    }
                }
            }
            BoxPath::default()
        }
    }
}

/// One line of the connection report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionRecord {
    pub label: String,
    pub depth: u32,
    pub path_length: usize,
    /// Enclosure evaluations spent at this depth (shared by all pairs).
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct ConnectOptions {
    pub d_start: u32,
    pub d_end: u32,
    /// One-box expansions allowed per depth before giving up.
    pub max_expansions: usize,
}

impl ConnectOptions {
    pub fn new(d_start: u32, d_end: u32) -> Self {
        ConnectOptions { d_start, d_end, max_expansions: 64 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Connections {
    /// Paths in the final tree, one per pair.
    pub paths: Vec<BoxPath>,
    pub records: Vec<ConnectionRecord>,
    pub evaluations: usize,
    /// Most boxes alive at any point.
    pub peak_boxes: usize,
}

impl Connections {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

fn seed_boxes(tree: &BoxTree, pairs: &[SkeletonPair]) -> Result<Vec<(BoxId, BoxId)>> {
    pairs
        .iter()
        .map(|p| {
            let f = tree.find(&[p.src, p.dst]);
            match (f[0], f[1]) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(Error::Seeding(format!("pair {} has a point outside the domain", p.label))),
            }
        })
        .collect()
}

fn search_all(tree: &BoxTree, t: &CombEnclosure, ends: &[(BoxId, BoxId)], weights: Option<&ActionWeights>) -> Vec<BoxPath> {
    ends.par_iter()
        .map(|&(a, b)| match weights {
            Some(w) => shortest_path(t, a, b, Some(&|i, j| w.weight(tree, i, j))),
            None => shortest_path(t, a, b, None),
        })
        .collect()
}

/// Inserts boxes until every pair is connected in 𝒯 at each depth from
/// `d_start` to `d_end`, keeping only path boxes between depths. The tree
/// must be at depth `d_start`; on return it is at `d_end` and holds exactly
/// the boxes of the returned paths.
pub fn find_connections(
    tree: &mut BoxTree,
    sys: &dyn PlanarMap,
    cache: &mut ImageCache,
    pairs: &[SkeletonPair],
    opts: ConnectOptions,
    weights: Option<&ActionWeights>,
) -> Result<Connections> {
    if opts.d_start > opts.d_end {
        return Err(Error::Config(format!("d_start {} exceeds d_end {}", opts.d_start, opts.d_end)));
    }
    if tree.depth() != opts.d_start {
        return Err(Error::Config(format!("tree is at depth {}, expected {}", tree.depth(), opts.d_start)));
    }
    let domain: Domain = sys.domain();
    let evals0 = cache.evaluations();
    let mut out = Connections::default();
    for depth in opts.d_start..=opts.d_end {
        let evals_depth = cache.evaluations();
        let pts: Vec<Point2> = pairs.iter().flat_map(|p| [p.src, p.dst]).collect();
        tree.insert(&pts);
        let mut t = transition_matrix(tree, sys, cache, None);
        let mut expansions = 0;
        let paths = loop {
            let ends = seed_boxes(tree, pairs)?;
            let paths = search_all(tree, &t, &ends, weights);
            out.peak_boxes = out.peak_boxes.max(tree.len());
            if let Some(k) = paths.iter().position(|p| p.is_empty()) {
                if expansions == opts.max_expansions {
                    return Err(Error::NoConnection { label: pairs[k].label.clone(), depth });
                }
                expansions += 1;
                let all = tree.boxnums();
                insert_onebox(tree, &domain, &all);
                t = transition_matrix(tree, sys, cache, None);
                debug!("connect depth {depth}: expansion {expansions}, {} boxes", tree.len());
                continue;
            }
            break paths;
        };
        let spent = cache.evaluations() - evals_depth;
        for (p, path) in pairs.iter().zip(&paths) {
            out.records.push(ConnectionRecord { label: p.label.clone(), depth, path_length: path.len(), evaluations: spent });
        }
        info!("connect depth {depth}: all {} pairs found after {expansions} expansions, {spent} evaluations", pairs.len());
        let mut keep: Vec<BoxId> = paths.iter().flat_map(|p| p.0.iter().copied()).collect();
        keep.sort_unstable();
        keep.dedup();
        let map = tree.retain(&keep)?;
        if depth < opts.d_end {
            tree.subdivide()?;
        } else {
            out.paths = paths.iter().map(|p| BoxPath(p.0.iter().map(|&b| map.get(b).expect("kept")).collect())).collect();
        }
    }
    out.evaluations = cache.evaluations() - evals0;
    Ok(out)
}
