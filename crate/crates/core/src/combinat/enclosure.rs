//! Box images: lattice geometry, the persistent image cache and the
//! transition matrix 𝒯.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::boxtree::{morton, unmorton, BoxId, BoxTree};
use crate::dynamics::{Domain, PlanarMap};
use crate::error::{Error, Result};
use crate::interval::{IvRect, IvScalar};

/// Lattice geometry of a tree over a domain: maps rectangles to the cells
/// they meet and knows whether indices wrap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub depth: u32,
    pub side: u32,
    pub torus: bool,
    root: IvRect,
}

/// A rectangular block of lattice cells, `ni × nj` cells starting at
/// `(i0, j0)`. On the torus indices are taken mod `side` (`i0, j0` are
/// reduced); on the plane the block may stick out of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellBlock {
    pub i0: i64,
    pub j0: i64,
    pub ni: u32,
    pub nj: u32,
}

impl Grid {
    pub fn new(tree: &BoxTree, domain: &Domain) -> Self {
        Grid { depth: tree.depth(), side: tree.side(), torus: domain.is_torus(), root: tree.root() }
    }

    /// Closed-meeting index range `[k0, k1]` of an interval along one axis.
    fn axis_range(&self, v: IvScalar, lo: f64, width: f64) -> (i64, i64) {
        let n = self.side as f64;
        let scale = IvScalar::point(n).checked_div(IvScalar::point(width)).expect("positive width");
        let a = (IvScalar::point(v.lo()) - IvScalar::point(lo)) * scale;
        let b = (IvScalar::point(v.hi()) - IvScalar::point(lo)) * scale;
        let k0 = a.lo().ceil() - 1.0;
        let k1 = b.hi().floor();
        let clamp = |t: f64| t.clamp(-4.0 * n - 8.0, 8.0 * n + 8.0) as i64;
        (clamp(k0), clamp(k1))
    }

    /// Cells meeting the closed rectangle `r` (given in unwrapped
    /// coordinates). Returns the block and whether the block was clipped.
    pub fn block_of(&self, r: &IvRect) -> (CellBlock, bool) {
        let n = self.side as i64;
        let (i0, i1) = self.axis_range(r.x, self.root.x.lo(), self.root.x.width());
        let (j0, j1) = self.axis_range(r.y, self.root.y.lo(), self.root.y.width());
        if self.torus {
            let wrap = |k0: i64, k1: i64| -> (i64, u32) {
                let len = k1 - k0 + 1;
                if len >= n {
                    (0, n as u32)
                } else {
                    (k0.rem_euclid(n), len as u32)
                }
            };
            let (a, ni) = wrap(i0, i1);
            let (b, nj) = wrap(j0, j1);
            (CellBlock { i0: a, j0: b, ni, nj }, false)
        } else {
            // keep at most one grid width of overhang on each side
            let lo = -n;
            let hi = 2 * n - 1;
            let clip = i0 < lo || i1 > hi || j0 < lo || j1 > hi;
            // a block entirely past the margin shrinks to an edge strip
            let (i0, i1) = (i0.clamp(lo, hi), i1.clamp(lo, hi));
            let (j0, j1) = (j0.clamp(lo, hi), j1.clamp(lo, hi));
            (CellBlock { i0, j0, ni: (i1 - i0 + 1) as u32, nj: (j1 - j0 + 1) as u32 }, clip)
        }
    }

    pub fn in_grid(&self, i: i64, j: i64) -> bool {
        let n = self.side as i64;
        (0..n).contains(&i) && (0..n).contains(&j)
    }

    pub fn wrap(&self, i: i64, j: i64) -> (i64, i64) {
        if self.torus {
            let n = self.side as i64;
            (i.rem_euclid(n), j.rem_euclid(n))
        } else {
            (i, j)
        }
    }

    /// Lattice key of an in-grid cell.
    pub fn key(&self, i: i64, j: i64) -> Option<u64> {
        let (i, j) = self.wrap(i, j);
        self.in_grid(i, j).then(|| morton(i as u32, j as u32))
    }

    /// The (up to) 8 lattice neighbours of a cell plus the cell itself.
    pub fn neighbors(&self, i: u32, j: u32) -> impl Iterator<Item = u64> + '_ {
        let (i, j) = (i as i64, j as i64);
        (-1..=1).flat_map(move |di| (-1..=1).map(move |dj| (di, dj))).filter_map(move |(di, dj)| self.key(i + di, j + dj))
    }
}

impl CellBlock {
    pub fn len(&self) -> usize {
        self.ni as usize * self.nj as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in unwrapped coordinates.
    pub fn cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.ni as i64).flat_map(move |a| (0..self.nj as i64).map(move |b| (self.i0 + a, self.j0 + b)))
    }
}

/// Cached image of one box: the lattice blocks meeting its enclosure.
#[derive(Clone, Debug, PartialEq)]
pub struct CellImage {
    pub blocks: Vec<CellBlock>,
    /// Some cell lies outside the grid (plane domains only).
    pub escaped: bool,
    /// The enclosure was clipped; the image is not a faithful enclosure.
    pub truncated: bool,
}

impl CellImage {
    pub fn compute(grid: &Grid, sys: &dyn PlanarMap, rect: &IvRect) -> CellImage {
        let mut blocks = Vec::new();
        let mut truncated = false;
        for r in sys.enclose(rect) {
            let (b, clip) = grid.block_of(&r);
            truncated |= clip;
            if !blocks.contains(&b) {
                blocks.push(b);
            }
        }
        let escaped = blocks.iter().any(|b| b.cells().any(|(i, j)| {
            let (i, j) = grid.wrap(i, j);
            !grid.in_grid(i, j)
        }));
        CellImage { blocks, escaped, truncated }
    }

    /// In-grid lattice keys of the image, sorted and deduplicated.
    pub fn keys(&self, grid: &Grid) -> Vec<u64> {
        let mut out: Vec<u64> = self.blocks.iter().flat_map(|b| b.cells()).filter_map(|(i, j)| grid.key(i, j)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Depth-qualified lattice key, stable under renumbering.
pub type CacheKey = (u32, u64);

/// Persistent box-image cache. Entries are immutable once written, so the
/// cache survives renumbering and can be shared across runs.
#[derive(Debug, Default)]
pub struct ImageCache {
    map: HashMap<CacheKey, Arc<CellImage>>,
    evaluations: usize,
    journal: Option<Vec<CacheKey>>,
    /// Read-through layer: entries found here are copied up on demand
    /// without an evaluation.
    base: Option<Box<ImageCache>>,
}

impl ImageCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        let below = self.base.as_ref().map_or(0, |b| b.map.keys().filter(|k| !self.map.contains_key(k)).count());
        self.map.len() + below
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// An empty cache that reads through to `base`. Keys copied up from the
    /// base count as created (journal) but not as evaluated.
    pub fn layered_over(base: ImageCache) -> Self {
        ImageCache { base: Some(Box::new(base)), ..Self::default() }
    }

    /// Merges the top layer back into its base.
    pub fn flatten(mut self) -> ImageCache {
        match self.base.take() {
            Some(mut b) => {
                b.evaluations += self.evaluations;
                for (k, v) in self.map {
                    b.map.entry(k).or_insert(v);
                }
                *b
            }
            None => self,
        }
    }

    /// Number of enclosure evaluations performed through this cache.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn get(&self, key: &CacheKey) -> Option<&Arc<CellImage>> {
        self.map.get(key).or_else(|| self.base.as_ref().and_then(|b| b.get(key)))
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.get(key).is_some()
    }

    pub fn keys(&self) -> impl Iterator<Item = &CacheKey> {
        self.map.keys()
    }

    /// Starts recording newly created keys.
    pub fn start_journal(&mut self) {
        self.journal = Some(Vec::new());
    }

    /// Stops recording and returns the keys created since `start_journal`.
    pub fn take_journal(&mut self) -> Vec<CacheKey> {
        self.journal.take().unwrap_or_default()
    }

    /// Makes sure images of the given cells exist. Missing images are
    /// evaluated in parallel and inserted afterwards.
    pub fn ensure(&mut self, grid: &Grid, tree: &BoxTree, sys: &dyn PlanarMap, keys: &[u64]) {
        let depth = grid.depth;
        let mut missing: Vec<u64> = keys.iter().copied().filter(|k| !self.map.contains_key(&(depth, *k))).collect();
        missing.sort_unstable();
        missing.dedup();
        if let Some(b) = &self.base {
            let mut rest = Vec::with_capacity(missing.len());
            for k in missing {
                match b.get(&(depth, k)) {
                    Some(img) => {
                        if let Some(j) = self.journal.as_mut() {
                            j.push((depth, k));
                        }
                        self.map.insert((depth, k), img.clone());
                    }
                    None => rest.push(k),
                }
            }
            missing = rest;
        }
        if missing.is_empty() {
            return;
        }
        let imgs: Vec<(u64, CellImage)> = missing
            .par_iter()
            .map(|&k| {
                let (i, j) = unmorton(k);
                (k, CellImage::compute(grid, sys, &tree.cell_rect(i, j)))
            })
            .collect();
        self.evaluations += imgs.len();
        for (k, img) in imgs {
            if let Some(j) = self.journal.as_mut() {
                j.push((depth, k));
            }
            self.map.insert((depth, k), Arc::new(img));
        }
    }

    pub fn image(&self, depth: u32, key: u64) -> Option<Arc<CellImage>> {
        self.get(&(depth, key)).cloned()
    }

    pub fn save(&self, grid_of_depth: impl Fn(u32) -> Grid, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut keys: Vec<&CacheKey> = self.map.keys().collect();
        keys.sort_unstable();
        for key in keys {
            let img = &self.map[key];
            if img.truncated {
                continue;
            }
            let grid = grid_of_depth(key.0);
            let (i, j) = unmorton(key.1);
            write!(f, "img {} {} {} :", key.0, i, j)?;
            let mut cells: Vec<(i64, i64)> =
                img.blocks.iter().flat_map(|b| b.cells()).map(|(a, b)| grid.wrap(a, b)).collect();
            cells.sort_unstable();
            cells.dedup();
            for (a, b) in cells {
                write!(f, " {a} {b}")?;
            }
            writeln!(f)?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn load(grid_of_depth: impl Fn(u32) -> Grid, path: &Path) -> Result<Self> {
        Self::read(grid_of_depth, std::fs::File::open(path)?)
    }

    pub fn read<R: Read>(grid_of_depth: impl Fn(u32) -> Grid, r: R) -> Result<Self> {
        let mut cache = ImageCache::new();
        for (n, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let perr = |msg: &str| Error::Parse { line: n + 1, msg: msg.to_owned() };
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.is_empty() {
                continue;
            }
            if t.len() < 5 || t[0] != "img" || t[4] != ":" {
                return Err(perr("expected `img <depth> <i> <j> : <cells>`"));
            }
            let int = |s: &str| s.parse::<i64>().map_err(|_| perr("bad integer"));
            let depth = int(t[1])? as u32;
            let (i, j) = (int(t[2])?, int(t[3])?);
            let grid = grid_of_depth(depth);
            if !grid.in_grid(i, j) {
                return Err(perr("key outside grid"));
            }
            let rest = &t[5..];
            if rest.len() % 2 != 0 {
                return Err(perr("odd number of cell coordinates"));
            }
            let mut cells = Vec::with_capacity(rest.len() / 2);
            for c in rest.chunks(2) {
                cells.push((int(c[0])?, int(c[1])?));
            }
            let key = (depth, morton(i as u32, j as u32));
            if cache.map.contains_key(&key) {
                return Err(perr("duplicate cache entry"));
            }
            cache.map.insert(key, Arc::new(blocks_from_cells(&grid, &cells)));
        }
        Ok(cache)
    }
}

/// Regroups a cell list into rectangular blocks, one per connected component
/// when the component is a full rectangle, single cells otherwise.
fn blocks_from_cells(grid: &Grid, cells: &[(i64, i64)]) -> CellImage {
    let n = grid.side as i64;
    let set: HashSet<(i64, i64)> = cells.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut blocks = Vec::new();
    let mut sorted: Vec<(i64, i64)> = set.iter().copied().collect();
    sorted.sort_unstable();
    for &start in &sorted {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = vec![start];
        seen.insert(start);
        let mut k = 0;
        while k < comp.len() {
            let (a, b) = comp[k];
            k += 1;
            for da in -1..=1 {
                for db in -1..=1 {
                    let c = grid.wrap(a + da, b + db);
                    if set.contains(&c) && seen.insert(c) {
                        comp.push(c);
                    }
                }
            }
        }
        let axis = |vals: Vec<i64>| -> (i64, u32) {
            let mut v = vals;
            v.sort_unstable();
            v.dedup();
            if !grid.torus {
                return (v[0], (v[v.len() - 1] - v[0] + 1) as u32);
            }
            if v.len() as i64 == n {
                return (0, n as u32);
            }
            // start after the largest cyclic gap
            let mut best = (v[0] + n - v[v.len() - 1], 0usize);
            for w in 1..v.len() {
                best = best.max((v[w] - v[w - 1], w));
            }
            let s = v[best.1];
            let end = if best.1 == 0 { v[v.len() - 1] } else { v[best.1 - 1] };
            (s, ((end - s).rem_euclid(n) + 1) as u32)
        };
        let (i0, ni) = axis(comp.iter().map(|c| c.0).collect());
        let (j0, nj) = axis(comp.iter().map(|c| c.1).collect());
        let block = CellBlock { i0, j0, ni, nj };
        if block.len() == comp.len() {
            blocks.push(block);
        } else {
            comp.sort_unstable();
            blocks.extend(comp.iter().map(|&(a, b)| CellBlock { i0: a, j0: b, ni: 1, nj: 1 }));
        }
    }
    let escaped = cells.iter().any(|&(i, j)| !grid.in_grid(i, j));
    CellImage { blocks, escaped, truncated: false }
}

/// The sparse transition matrix 𝒯 over current box ids: column `i` lists
/// the live boxes of ℱ(bᵢ). Columns are present only for boxes whose images
/// were requested.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CombEnclosure {
    cols: Vec<Option<Vec<BoxId>>>,
    escaped: Vec<bool>,
}

impl CombEnclosure {
    pub fn empty(n: usize) -> Self {
        CombEnclosure { cols: vec![None; n], escaped: vec![false; n] }
    }

    /// Builds 𝒯 directly from explicit columns (for tests and models).
    pub fn from_columns(cols: Vec<Option<Vec<BoxId>>>) -> Self {
        let n = cols.len();
        let cols = cols
            .into_iter()
            .map(|c| {
                c.map(|mut v| {
                    v.sort_unstable();
                    v.dedup();
                    v
                })
            })
            .collect();
        CombEnclosure { cols, escaped: vec![false; n] }
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn column(&self, i: BoxId) -> Option<&[BoxId]> {
        self.cols.get(i).and_then(|c| c.as_deref())
    }

    pub fn has_column(&self, i: BoxId) -> bool {
        self.column(i).is_some()
    }

    /// 𝒯[j][i].
    pub fn entry(&self, j: BoxId, i: BoxId) -> bool {
        self.column(i).is_some_and(|c| c.binary_search(&j).is_ok())
    }

    /// The image meets a cell that is not live: off the grid, dead, or cut
    /// off by clipping. Such a column under-reports ℱ(bᵢ).
    pub fn escaped(&self, i: BoxId) -> bool {
        self.escaped.get(i).copied().unwrap_or(false)
    }

    /// ℱ(S) over live boxes; errors on a missing column.
    pub fn image_of(&self, s: &[BoxId]) -> Result<Vec<BoxId>> {
        let mut out = Vec::new();
        for &i in s {
            out.extend_from_slice(self.column(i).ok_or(Error::IncompleteMap(i))?);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// Fills 𝒯 columns for `subset` (all live boxes when `None`), consulting the
/// cache first.
pub fn transition_matrix(
    tree: &BoxTree,
    sys: &dyn PlanarMap,
    cache: &mut ImageCache,
    subset: Option<&[BoxId]>,
) -> CombEnclosure {
    let grid = Grid::new(tree, &sys.domain());
    let ids: Vec<BoxId> = match subset {
        Some(s) => s.to_vec(),
        None => tree.boxnums(),
    };
    let keys: Vec<u64> = ids.iter().map(|&id| tree.keys()[id]).collect();
    cache.ensure(&grid, tree, sys, &keys);
    let mut t = CombEnclosure::empty(tree.len());
    let cols: Vec<(BoxId, bool, Vec<BoxId>)> = ids
        .par_iter()
        .map(|&id| {
            let img = cache.get(&(grid.depth, tree.keys()[id])).expect("ensured");
            let keys = img.keys(&grid);
            let col: Vec<BoxId> = keys.iter().filter_map(|&k| tree.id_of_key(k)).collect();
            (id, img.escaped || img.truncated || col.len() < keys.len(), col)
        })
        .collect();
    for (id, esc, col) in cols {
        t.cols[id] = Some(col);
        t.escaped[id] = esc;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Point2, SystemSpec};
    use rand::{Rng, SeedableRng};

    fn torus_tree(depth: u32) -> BoxTree {
        BoxTree::new([0.5, 0.5], [0.5, 0.5], depth).unwrap()
    }

    #[test]
    fn block_ranges_on_torus() {
        let t = torus_tree(3);
        let g = Grid::new(&t, &Domain::Torus);
        let r = IvRect::new(IvScalar::new(0.26, 0.3).unwrap(), IvScalar::new(0.95, 1.1).unwrap());
        let (b, clip) = g.block_of(&r);
        assert!(!clip);
        assert_eq!((b.i0, b.ni), (2, 1));
        assert_eq!((b.j0, b.nj), (7, 2));
        // closed meeting: a grid line touches both neighbours
        let r = IvRect::new(IvScalar::point(0.25), IvScalar::point(0.5));
        let (b, _) = g.block_of(&r);
        assert_eq!((b.i0, b.ni, b.j0, b.nj), (1, 2, 3, 2));
    }

    #[test]
    fn far_plane_block_is_clipped_and_escapes() {
        let t = torus_tree(3);
        let g = Grid::new(&t, &Domain::Plane { root: t.root() });
        let r = IvRect::new(IvScalar::new(40.0, 41.0).unwrap(), IvScalar::new(-9.0, -8.0).unwrap());
        let (b, clip) = g.block_of(&r);
        assert!(clip);
        assert_eq!((b.i0, b.ni, b.j0, b.nj), (15, 1, -8, 1));
    }

    #[test]
    fn fixed_point_box_maps_to_itself() {
        let sys = SystemSpec::standard(IvScalar::point(2.0)).unwrap();
        let mut t = torus_tree(5);
        t.fill();
        let mut cache = ImageCache::new();
        let id = t.id_of(0, 0).unwrap();
        let m = transition_matrix(&t, &sys, &mut cache, Some(&[id]));
        assert!(m.entry(id, id));
        let before = cache.evaluations();
        transition_matrix(&t, &sys, &mut cache, Some(&[id]));
        assert_eq!(cache.evaluations(), before);
    }

    #[test]
    fn sampled_points_land_in_columns() {
        let sys = SystemSpec::standard(IvScalar::new(1.995, 2.0).unwrap()).unwrap();
        let mut t = torus_tree(6);
        t.fill();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let ids: Vec<BoxId> = (0..50).map(|_| rng.gen_range(0..t.len())).collect();
        let mut cache = ImageCache::new();
        let m = transition_matrix(&t, &sys, &mut cache, Some(&ids));
        for &id in &ids {
            let r = t.rect(id);
            for _ in 0..20 {
                let p = Point2::new(rng.gen_range(r.x.lo()..r.x.hi()), rng.gen_range(r.y.lo()..r.y.hi()));
                let q = sys.eval_point(p);
                let hit = t.find(&[q])[0].unwrap();
                assert!(m.entry(hit, id));
            }
        }
    }

    #[test]
    fn cache_file_roundtrip() {
        let sys = SystemSpec::standard(IvScalar::point(2.0)).unwrap();
        let mut t = torus_tree(5);
        t.fill();
        let mut cache = ImageCache::new();
        let grid = Grid::new(&t, &Domain::Torus);
        cache.ensure(&grid, &t, &sys, &t.keys().to_vec());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.txt");
        cache.save(|_| grid, &path).unwrap();
        let back = ImageCache::load(|_| grid, &path).unwrap();
        assert_eq!(back.len(), cache.len());
        for (k, v) in &cache.map {
            let w = back.get(k).unwrap();
            assert_eq!(w.keys(&grid), v.keys(&grid));
            let cells = |c: &CellImage| {
                let mut x: Vec<(i64, i64)> = c.blocks.iter().flat_map(|b| b.cells()).map(|(a, b)| grid.wrap(a, b)).collect();
                x.sort_unstable();
                x.dedup();
                x
            };
            assert_eq!(cells(w), cells(v), "key {k:?}");
        }
    }

    #[test]
    fn journal_records_new_keys_only() {
        let sys = SystemSpec::standard(IvScalar::point(1.0)).unwrap();
        let mut t = torus_tree(4);
        t.fill();
        let grid = Grid::new(&t, &Domain::Torus);
        let mut cache = ImageCache::new();
        cache.ensure(&grid, &t, &sys, &t.keys()[..5].to_vec());
        cache.start_journal();
        cache.ensure(&grid, &t, &sys, &t.keys()[..8].to_vec());
        let j = cache.take_journal();
        assert_eq!(j.len(), 3);
    }
}
