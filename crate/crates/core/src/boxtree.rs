//! Dyadic box grid with deterministic depth-first numbering.
//!
//! The tree is stored linearized: live boxes are kept as a sorted vector of
//! Morton keys (x bit above y bit at every level), which is exactly the leaf
//! order of a depth-first traversal with lexicographic `(x, y)` child order.
//! Box ids are positions in that vector, so every mutation is a merge or a
//! filter and the old-to-new id map falls out in linear time.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::dynamics::Point2;
use crate::error::{Error, Result};
use crate::interval::{IvRect, IvScalar};

pub type BoxId = usize;

/// Largest supported depth (so that lattice indices fit in `u32` and keys
/// in `u64`).
pub const MAX_DEPTH: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoxCoord {
    pub depth: u32,
    pub i: u32,
    pub j: u32,
}

/// Interleaves `i` (x) and `j` (y) bits, x first at every level.
pub fn morton(i: u32, j: u32) -> u64 {
    spread(i) << 1 | spread(j)
}

pub fn unmorton(k: u64) -> (u32, u32) {
    (compact(k >> 1), compact(k))
}

fn spread(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | x << 16) & 0x0000_FFFF_0000_FFFF;
    x = (x | x << 8) & 0x00FF_00FF_00FF_00FF;
    x = (x | x << 4) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | x << 2) & 0x3333_3333_3333_3333;
    x = (x | x << 1) & 0x5555_5555_5555_5555;
    x
}

fn compact(k: u64) -> u32 {
    let mut x = k & 0x5555_5555_5555_5555;
    x = (x | x >> 1) & 0x3333_3333_3333_3333;
    x = (x | x >> 2) & 0x0F0F_0F0F_0F0F_0F0F;
    x = (x | x >> 4) & 0x00FF_00FF_00FF_00FF;
    x = (x | x >> 8) & 0x0000_FFFF_0000_FFFF;
    x = (x | x >> 16) & 0x0000_0000_FFFF_FFFF;
    x as u32
}

/// Old-id to new-id map produced by a tree mutation.
///
/// After [`BoxTree::subdivide`] every old id maps to the first of its four
/// children, which occupy `new..new + 4`; `fan` records this.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenumberMap {
    map: Vec<Option<BoxId>>,
    fan: usize,
    new_len: usize,
}

impl RenumberMap {
    pub fn identity(n: usize) -> Self {
        RenumberMap { map: (0..n).map(Some).collect(), fan: 1, new_len: n }
    }

    pub fn is_identity(&self) -> bool {
        self.fan == 1 && self.new_len == self.map.len() && self.map.iter().enumerate().all(|(i, m)| *m == Some(i))
    }

    pub fn get(&self, old: BoxId) -> Option<BoxId> {
        self.map.get(old).copied().flatten()
    }

    pub fn old_len(&self) -> usize {
        self.map.len()
    }

    pub fn new_len(&self) -> usize {
        self.new_len
    }

    pub fn fan(&self) -> usize {
        self.fan
    }

    /// Maps an id set, dropping deleted boxes and expanding subdivided ones.
    pub fn apply(&self, ids: &[BoxId]) -> Vec<BoxId> {
        let mut out = Vec::with_capacity(ids.len() * self.fan);
        for &id in ids {
            if let Some(n) = self.get(id) {
                out.extend(n..n + self.fan);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// A dyadic grid of boxes over a root rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxTree {
    center: [f64; 2],
    radius: [f64; 2],
    depth: u32,
    keys: Vec<u64>,
}

impl BoxTree {
    pub fn new(center: [f64; 2], radius: [f64; 2], depth: u32) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::Config(format!("depth {depth} exceeds {MAX_DEPTH}")));
        }
        if !(radius[0] > 0.0 && radius[1] > 0.0) || !center.iter().chain(&radius).all(|v| v.is_finite()) {
            return Err(Error::Config("root needs finite center and positive radius".into()));
        }
        Ok(BoxTree { center, radius, depth, keys: Vec::new() })
    }

    pub fn from_root(root: &IvRect, depth: u32) -> Result<Self> {
        let c = [0.5 * (root.x.lo() + root.x.hi()), 0.5 * (root.y.lo() + root.y.hi())];
        let r = [0.5 * (root.x.hi() - root.x.lo()), 0.5 * (root.y.hi() - root.y.lo())];
        let t = BoxTree::new(c, r, depth)?;
        if t.root() != *root {
            return Err(Error::Config("root rectangle is not exactly representable by center/radius".into()));
        }
        Ok(t)
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn radius(&self) -> [f64; 2] {
        self.radius
    }

    pub fn root(&self) -> IvRect {
        IvRect::new(
            IvScalar::from_bounds_unchecked(self.center[0] - self.radius[0], self.center[0] + self.radius[0]),
            IvScalar::from_bounds_unchecked(self.center[1] - self.radius[1], self.center[1] + self.radius[1]),
        )
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of lattice cells per side, `2^depth`.
    pub fn side(&self) -> u32 {
        1u32 << self.depth
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn boxnums(&self) -> Vec<BoxId> {
        (0..self.keys.len()).collect()
    }

    pub fn coord(&self, id: BoxId) -> BoxCoord {
        let (i, j) = unmorton(self.keys[id]);
        BoxCoord { depth: self.depth, i, j }
    }

    pub fn cell(&self, id: BoxId) -> (u32, u32) {
        unmorton(self.keys[id])
    }

    pub fn id_of_key(&self, key: u64) -> Option<BoxId> {
        self.keys.binary_search(&key).ok()
    }

    pub fn id_of(&self, i: u32, j: u32) -> Option<BoxId> {
        self.id_of_key(morton(i, j))
    }

    /// Closed realization of lattice cell `(i, j)` at the current depth.
    pub fn cell_rect(&self, i: u32, j: u32) -> IvRect {
        let root = self.root();
        let n = self.side() as f64;
        let wx = 2.0 * self.radius[0] / n;
        let wy = 2.0 * self.radius[1] / n;
        let x = IvScalar::point(root.x.lo()) + IvScalar::point(i as f64) * IvScalar::point(wx);
        let y = IvScalar::point(root.y.lo()) + IvScalar::point(j as f64) * IvScalar::point(wy);
        IvRect::new(
            x.hull(&(x + IvScalar::point(wx))),
            y.hull(&(y + IvScalar::point(wy))),
        )
    }

    pub fn rect(&self, id: BoxId) -> IvRect {
        let (i, j) = self.cell(id);
        self.cell_rect(i, j)
    }

    pub fn cell_center(&self, i: u32, j: u32) -> Point2 {
        let n = self.side() as f64;
        let root = self.root();
        Point2::new(
            root.x.lo() + (i as f64 + 0.5) * 2.0 * self.radius[0] / n,
            root.y.lo() + (j as f64 + 0.5) * 2.0 * self.radius[1] / n,
        )
    }

    pub fn box_center(&self, id: BoxId) -> Point2 {
        let (i, j) = self.cell(id);
        self.cell_center(i, j)
    }

    /// Half-open lattice cell containing `p`, or `None` outside the root.
    /// The far edge of the root belongs to the last cell.
    pub fn locate(&self, p: Point2) -> Option<(u32, u32)> {
        let n = self.side();
        let axis = |v: f64, c: f64, r: f64| -> Option<u32> {
            let lo = c - r;
            let hi = c + r;
            if !(v >= lo && v <= hi) {
                return None;
            }
            let t = ((v - lo) / (2.0 * r) * n as f64).floor();
            Some((t.max(0.0) as u64).min(n as u64 - 1) as u32)
        };
        Some((axis(p.x, self.center[0], self.radius[0])?, axis(p.y, self.center[1], self.radius[1])?))
    }

    pub fn find(&self, points: &[Point2]) -> Vec<Option<BoxId>> {
        points.iter().map(|&p| self.locate(p).and_then(|(i, j)| self.id_of(i, j))).collect()
    }

    pub fn insert(&mut self, points: &[Point2]) -> RenumberMap {
        let cells: Vec<(u32, u32)> = points.iter().filter_map(|&p| self.locate(p)).collect();
        self.insert_cells(&cells)
    }

    /// Makes the given lattice cells live.
    pub fn insert_cells(&mut self, cells: &[(u32, u32)]) -> RenumberMap {
        let mut add: Vec<u64> = cells.iter().map(|&(i, j)| morton(i, j)).collect();
        add.sort_unstable();
        add.dedup();
        self.insert_keys(add)
    }

    /// Merges sorted, deduplicated keys into the live set.
    pub fn insert_keys(&mut self, add: Vec<u64>) -> RenumberMap {
        let old = std::mem::take(&mut self.keys);
        let mut merged = Vec::with_capacity(old.len() + add.len());
        let mut map = Vec::with_capacity(old.len());
        let (mut a, mut b) = (0, 0);
        while a < old.len() || b < add.len() {
            if b >= add.len() || (a < old.len() && old[a] <= add[b]) {
                if b < add.len() && old[a] == add[b] {
                    b += 1;
                }
                map.push(Some(merged.len()));
                merged.push(old[a]);
                a += 1;
            } else {
                merged.push(add[b]);
                b += 1;
            }
        }
        self.keys = merged;
        RenumberMap { map, fan: 1, new_len: self.keys.len() }
    }

    pub fn delete(&mut self, ids: &[BoxId]) -> Result<RenumberMap> {
        let mut drop = vec![false; self.keys.len()];
        for &id in ids {
            if id >= self.keys.len() {
                return Err(Error::UnknownBox(id));
            }
            drop[id] = true;
        }
        let mut map = Vec::with_capacity(self.keys.len());
        let mut kept = Vec::with_capacity(self.keys.len());
        for (k, d) in self.keys.iter().zip(&drop) {
            if *d {
                map.push(None);
            } else {
                map.push(Some(kept.len()));
                kept.push(*k);
            }
        }
        self.keys = kept;
        Ok(RenumberMap { map, fan: 1, new_len: self.keys.len() })
    }

    /// Keeps only the listed boxes.
    pub fn retain(&mut self, ids: &[BoxId]) -> Result<RenumberMap> {
        let mut keep = vec![false; self.keys.len()];
        for &id in ids {
            if id >= self.keys.len() {
                return Err(Error::UnknownBox(id));
            }
            keep[id] = true;
        }
        let drop: Vec<BoxId> = (0..self.keys.len()).filter(|&i| !keep[i]).collect();
        self.delete(&drop)
    }

    pub fn subdivide(&mut self) -> Result<RenumberMap> {
        if self.depth >= MAX_DEPTH {
            return Err(Error::Config(format!("cannot subdivide beyond depth {MAX_DEPTH}")));
        }
        let old = std::mem::take(&mut self.keys);
        self.keys = Vec::with_capacity(old.len() * 4);
        for k in &old {
            for c in 0..4u64 {
                self.keys.push(k << 2 | c);
            }
        }
        self.depth += 1;
        Ok(RenumberMap { map: (0..old.len()).map(|i| Some(4 * i)).collect(), fan: 4, new_len: self.keys.len() })
    }

    /// Fills the whole grid at the current depth.
    pub fn fill(&mut self) {
        let n = self.side() as u64;
        self.keys = (0..n * n).collect();
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(16 * self.keys.len() + 64);
        s.push_str("CIPT 1\ndim 2\n");
        let _ = writeln!(s, "depth {}", self.depth);
        let _ = writeln!(s, "root {} {} {} {}", self.center[0], self.center[1], self.radius[0], self.radius[1]);
        for &k in &self.keys {
            let (i, j) = unmorton(k);
            let _ = writeln!(s, "box {i} {j}");
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_text().as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines().enumerate();
        let mut next = |want: &str| -> Result<(usize, Vec<String>)> {
            let (n, line) = lines.next().ok_or(Error::Parse { line: 0, msg: format!("missing {want} line") })?;
            let line = line?;
            Ok((n + 1, line.split_whitespace().map(str::to_owned).collect()))
        };
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_owned() };
        let (n, h) = next("header")?;
        if h != ["CIPT", "1"] {
            return Err(perr(n, "expected `CIPT 1`"));
        }
        let (n, d) = next("dim")?;
        if d != ["dim", "2"] {
            return Err(perr(n, "expected `dim 2`"));
        }
        let (n, d) = next("depth")?;
        let depth: u32 = match d.as_slice() {
            [k, v] if k == "depth" => v.parse().map_err(|_| perr(n, "bad depth"))?,
            _ => return Err(perr(n, "expected `depth <d>`")),
        };
        let (n, r) = next("root")?;
        if r.len() != 5 || r[0] != "root" {
            return Err(perr(n, "expected `root <cx> <cy> <rx> <ry>`"));
        }
        let mut v = [0.0f64; 4];
        for (slot, s) in v.iter_mut().zip(&r[1..]) {
            *slot = s.parse().map_err(|_| perr(n, "bad root coordinate"))?;
        }
        let mut tree = BoxTree::new([v[0], v[1]], [v[2], v[3]], depth).map_err(|e| perr(n, &e.to_string()))?;
        let side = tree.side();
        let mut keys = Vec::new();
        let mut line_no = n;
        for (idx, line) in lines {
            line_no = idx + 1;
            let line = line?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.is_empty() {
                continue;
            }
            let (i, j) = match t.as_slice() {
                ["box", i, j] => (
                    i.parse::<u32>().map_err(|_| perr(line_no, "bad box index"))?,
                    j.parse::<u32>().map_err(|_| perr(line_no, "bad box index"))?,
                ),
                _ => return Err(perr(line_no, "expected `box <i> <j>`")),
            };
            if i >= side || j >= side {
                return Err(perr(line_no, "box index outside grid"));
            }
            let k = morton(i, j);
            match keys.last() {
                Some(&last) if last == k => return Err(perr(line_no, "duplicate box")),
                Some(&last) if last > k => return Err(perr(line_no, "box out of DFS order")),
                _ => {}
            }
            keys.push(k);
        }
        let _ = line_no;
        tree.keys = keys;
        Ok(tree)
    }
}
