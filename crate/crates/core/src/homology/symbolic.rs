//! From induced matrices to certified subshifts of finite type.

use std::collections::{BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::induced::GradedIntMatrix;
use super::matrix::IntMatrix;
use crate::combinat::scc;
use crate::error::{Error, Result};
use crate::interval::div_down;

/// Restriction `r` and inclusion `s` exhibiting a shift equivalence of lag
/// `lag` between `M` and the reduced matrix `ψ`.
#[derive(Clone, Debug, Serialize)]
pub struct ShiftEquivalence {
    pub kept: Vec<usize>,
    pub r: IntMatrix,
    pub s: IntMatrix,
    pub lag: usize,
}

impl ShiftEquivalence {
    /// `r·M = ψ·r`, `s·ψ = M·s`, `r·s = ψ^lag`, `s·r = M^lag`, exactly.
    pub fn verify(&self, m: &IntMatrix, psi: &IntMatrix) -> bool {
        self.r.mul(m) == psi.mul(&self.r)
            && self.s.mul(psi) == m.mul(&self.s)
            && self.r.mul(&self.s) == psi.pow(self.lag)
            && self.s.mul(&self.r) == m.pow(self.lag)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Reduced {
    pub m: GradedIntMatrix,
    pub equiv: [ShiftEquivalence; 2],
}

fn successors(m: &IntMatrix, g: usize) -> Vec<usize> {
    (0..m.rows()).filter(|&h| !m.get(h, g).is_zero()).collect()
}

/// Nodes on the longest path of a DAG restricted to `set`.
fn longest_chain(m: &IntMatrix, set: &[bool]) -> usize {
    let n = set.len();
    let mut memo = vec![0usize; n];
    let mut order: Vec<usize> = Vec::new();
    // iterative DFS post-order
    let mut state = vec![0u8; n];
    for s in 0..n {
        if !set[s] || state[s] != 0 {
            continue;
        }
        let mut stack = vec![(s, 0usize)];
        state[s] = 1;
        while let Some(&mut (v, ref mut k)) = stack.last_mut() {
            let succ = successors(m, v);
            if let Some(&w) = succ.get(*k) {
                *k += 1;
                if set[w] && state[w] == 0 {
                    state[w] = 1;
                    stack.push((w, 0));
                }
            } else {
                state[v] = 2;
                order.push(v);
                stack.pop();
            }
        }
    }
    for &v in &order {
        memo[v] = 1 + successors(m, v).into_iter().filter(|&w| set[w]).map(|w| memo[w]).max().unwrap_or(0);
    }
    memo.into_iter().max().unwrap_or(0)
}

/// Drops generators that cannot reach a cycle of the transition graph or
/// cannot be reached from one. The kept block is shift equivalent to `M`.
fn reduce_degree(m: &IntMatrix) -> (Vec<usize>, ShiftEquivalence, IntMatrix) {
    let n = m.rows();
    let (comp, ncomp) = scc(n, &|g| successors(m, g));
    let mut size = vec![0usize; ncomp];
    for &c in &comp {
        size[c] += 1;
    }
    let on_cycle: Vec<bool> = (0..n).map(|g| size[comp[g]] > 1 || !m.get(g, g).is_zero()).collect();
    let bfs = |forward: bool| {
        let mut seen = on_cycle.clone();
        let mut q: VecDeque<usize> = (0..n).filter(|&g| on_cycle[g]).collect();
        while let Some(g) = q.pop_front() {
            for h in 0..n {
                let e = if forward { m.get(h, g) } else { m.get(g, h) };
                if !e.is_zero() && !seen[h] {
                    seen[h] = true;
                    q.push_back(h);
                }
            }
        }
        seen
    };
    let from_cycle = bfs(true);
    let to_cycle = bfs(false);
    let kept: Vec<usize> = (0..n).filter(|&g| from_cycle[g] && to_cycle[g]).collect();
    let upstream: Vec<bool> = (0..n).map(|g| to_cycle[g] && !from_cycle[g]).collect();
    let downstream: Vec<bool> = (0..n).map(|g| !to_cycle[g]).collect();
    let a = longest_chain(m, &upstream);
    let b = longest_chain(m, &downstream);
    let psi = m.submatrix(&kept, &kept);
    let all: Vec<usize> = (0..n).collect();
    let r = m.pow(a).submatrix(&kept, &all);
    let s = m.pow(b).submatrix(&all, &kept);
    (kept.clone(), ShiftEquivalence { kept, r, s, lag: a + b }, psi)
}

/// Integer column echelon of `M[:, idx]` by column operations inside the
/// component. Returns `(V, V⁻¹)` on the component and the echelon rank.
fn column_echelon(m: &IntMatrix, idx: &[usize]) -> (IntMatrix, IntMatrix, usize) {
    let k = idx.len();
    let all: Vec<usize> = (0..m.rows()).collect();
    let mut c = m.submatrix(&all, idx);
    let mut v = IntMatrix::identity(k);
    let mut vi = IntMatrix::identity(k);
    let mut p = 0;
    for row in 0..m.rows() {
        if p == k {
            break;
        }
        loop {
            let best = (p..k).filter(|&j| !c.get(row, j).is_zero()).min_by_key(|&j| c.get(row, j).abs());
            let Some(j) = best else { break };
            c.swap_cols(p, j);
            v.swap_cols(p, j);
            vi.swap_rows(p, j);
            let mut clean = true;
            for j2 in p + 1..k {
                if c.get(row, j2).is_zero() {
                    continue;
                }
                let q = c.get(row, j2).div_floor(c.get(row, p));
                c.add_col(j2, p, &-&q);
                v.add_col(j2, p, &-&q);
                vi.add_row(p, j2, &q);
                clean &= c.get(row, j2).is_zero();
            }
            if clean {
                p += 1;
                break;
            }
        }
    }
    (v, vi, p)
}

/// Block-diagonal change of basis that turns every rank-deficient column
/// block of a component into echelon form, exposing kernel generators as
/// zero columns. `None` when every block already has full column rank.
fn split_kernels(m: &IntMatrix, tags: &[usize]) -> Option<(IntMatrix, IntMatrix)> {
    let n = m.rows();
    let mut v = IntMatrix::identity(n);
    let mut vi = IntMatrix::identity(n);
    let mut changed = false;
    let comps: BTreeSet<usize> = tags.iter().copied().collect();
    for c in comps {
        let idx: Vec<usize> = (0..n).filter(|&g| tags[g] == c).collect();
        let (bv, bvi, rank) = column_echelon(m, &idx);
        if rank == idx.len() {
            continue;
        }
        changed = true;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                v.set(i, j, bv.get(a, b).clone());
                vi.set(i, j, bvi.get(a, b).clone());
            }
        }
    }
    changed.then_some((v, vi))
}

/// Alternates the recurrent restriction with per-component kernel
/// splitting; the composite is one shift equivalence.
fn reduce_tagged(m: &IntMatrix, tags: &[usize]) -> (Vec<usize>, ShiftEquivalence, IntMatrix) {
    let n = m.rows();
    let mut total = ShiftEquivalence { kept: (0..n).collect(), r: IntMatrix::identity(n), s: IntMatrix::identity(n), lag: 0 };
    let mut cur = m.clone();
    let mut tags = tags.to_vec();
    loop {
        let (kept, e, psi) = reduce_degree(&cur);
        total.r = e.r.mul(&total.r);
        total.s = total.s.mul(&e.s);
        total.lag += e.lag;
        total.kept = kept.iter().map(|&k| total.kept[k]).collect();
        tags = kept.iter().map(|&k| tags[k]).collect();
        cur = psi;
        match split_kernels(&cur, &tags) {
            Some((v, vi)) => {
                cur = vi.mul(&cur).mul(&v);
                total.r = vi.mul(&total.r);
                total.s = total.s.mul(&v);
            }
            None => break,
        }
    }
    (total.kept.clone(), total, cur)
}

/// Restriction of each degree to its recurrent generators, after splitting
/// off generators whose images vanish within their component. Generators
/// keep their component; `kept` names the generator each one descends from.
pub fn reduce_recurrent(m: &GradedIntMatrix) -> Reduced {
    let (k0, e0, m0) = reduce_tagged(&m.m0, &m.h0_tags);
    let (k1, e1, m1) = reduce_tagged(&m.m1, &m.h1_tags);
    let red = GradedIntMatrix {
        m0,
        m1,
        betti: [k0.len(), k1.len(), m.betti[2]],
        h0_tags: k0.iter().map(|&g| m.h0_tags[g]).collect(),
        h1_tags: k1.iter().map(|&g| m.h1_tags[g]).collect(),
        n_components: m.n_components,
    };
    Reduced { m: red, equiv: [e0, e1] }
}

#[derive(Clone, Debug, Serialize)]
pub struct EdgeCert {
    pub from: usize,
    pub to: usize,
    /// `M₁[σ(to), σ(from)]` as a decimal string.
    pub entry: String,
}

/// Symbols are components of `P1 ∖ P0`; `a[j][i] = 1` encodes `i → j`.
#[derive(Clone, Debug, Serialize)]
pub struct SymbolSystem {
    pub symbols: Vec<usize>,
    pub gens: Vec<Vec<usize>>,
    pub a: Vec<Vec<u8>>,
    /// Selected H₁ generator per symbol (global index), once certified.
    pub selection: Vec<usize>,
    pub edges: Vec<EdgeCert>,
    pub certified: bool,
    pub symbols_before: usize,
    pub candidate_edges: usize,
}

impl SymbolSystem {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn n_edges(&self) -> usize {
        self.a.iter().flatten().filter(|&&x| x != 0).count()
    }

    pub fn position(&self, component: usize) -> Option<usize> {
        self.symbols.iter().position(|&c| c == component)
    }
}

fn block_nonzero(m: &IntMatrix, rows: &[usize], cols: &[usize]) -> bool {
    rows.iter().any(|&r| cols.iter().any(|&c| !m.get(r, c).is_zero()))
}

/// Candidate transitions: `i → j` iff the H₁ block from `i` to `j` is nonzero.
pub fn build_symbol_system(m: &GradedIntMatrix) -> SymbolSystem {
    let symbols: Vec<usize> = (0..m.n_components).filter(|&c| !m.gens_of(1, c).is_empty()).collect();
    let gens: Vec<Vec<usize>> = symbols.iter().map(|&c| m.gens_of(1, c)).collect();
    let n = symbols.len();
    let mut a = vec![vec![0u8; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[j][i] = u8::from(block_nonzero(&m.m1, &gens[j], &gens[i]));
        }
    }
    let candidate_edges = a.iter().flatten().filter(|&&x| x != 0).count();
    SymbolSystem {
        symbols,
        gens,
        a,
        selection: Vec::new(),
        edges: Vec::new(),
        certified: false,
        symbols_before: n,
        candidate_edges,
    }
}

/// Edge `i → j` survives selection `(gi, gj)` iff `M[gj, gi] ≠ 0` and row
/// `gj` of the block vanishes on the other generators of `i`.
fn edge_ok(m: &IntMatrix, gens_i: &[usize], gi: usize, gj: usize) -> bool {
    !m.get(gj, gi).is_zero() && gens_i.iter().all(|&g| g == gi || m.get(gj, g).is_zero())
}

fn score(sys: &SymbolSystem, m: &IntMatrix, sel: &[usize]) -> usize {
    let n = sys.len();
    let mut s = 0;
    for i in 0..n {
        for j in 0..n {
            if sys.a[j][i] != 0 && edge_ok(m, &sys.gens[i], sel[i], sel[j]) {
                s += 1;
            }
        }
    }
    s
}

/// Selects one generator per symbol and keeps only the transitions whose
/// block products stay non-nilpotent along every cycle; then drops symbols
/// left without certified edges.
pub fn verify_sft(sys: &SymbolSystem, m: &GradedIntMatrix) -> SymbolSystem {
    let mm = &m.m1;
    let n = sys.len();
    let mut sel: Vec<usize> = sys.gens.iter().map(|g| g[0]).collect();
    let combos: f64 = sys.gens.iter().map(|g| g.len() as f64).product();
    if n > 0 && combos <= 4096.0 {
        let mut best = (score(sys, mm, &sel), sel.clone());
        let mut idx = vec![0usize; n];
        loop {
            let mut k = 0;
            while k < n {
                idx[k] += 1;
                if idx[k] < sys.gens[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
            let cand: Vec<usize> = (0..n).map(|c| sys.gens[c][idx[c]]).collect();
            let s = score(sys, mm, &cand);
            if s > best.0 {
                best = (s, cand);
            }
        }
        sel = best.1;
    } else {
        // coordinate ascent, each coordinate searched exhaustively
        let mut cur = score(sys, mm, &sel);
        for _ in 0..64 {
            let mut improved = false;
            for c in 0..n {
                for &g in &sys.gens[c] {
                    let old = sel[c];
                    sel[c] = g;
                    let s = score(sys, mm, &sel);
                    if s > cur {
                        cur = s;
                        improved = true;
                    } else {
                        sel[c] = old;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }

    let mut a = vec![vec![0u8; n]; n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if sys.a[j][i] != 0 && edge_ok(mm, &sys.gens[i], sel[i], sel[j]) {
                a[j][i] = 1;
                edges.push((i, j));
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&c| (0..n).any(|d| a[c][d] != 0 || a[d][c] != 0)).collect();
    let pos = |c: usize| keep.binary_search(&c).expect("kept");
    let a2: Vec<Vec<u8>> = keep.iter().map(|&j| keep.iter().map(|&i| a[j][i]).collect()).collect();
    let edges = edges
        .into_iter()
        .map(|(i, j)| EdgeCert { from: pos(i), to: pos(j), entry: mm.get(sel[j], sel[i]).to_string() })
        .collect();
    SymbolSystem {
        symbols: keep.iter().map(|&c| sys.symbols[c]).collect(),
        gens: keep.iter().map(|&c| sys.gens[c].clone()).collect(),
        a: a2,
        selection: keep.iter().map(|&c| sel[c]).collect(),
        edges,
        certified: true,
        symbols_before: sys.symbols_before,
        candidate_edges: sys.candidate_edges,
    }
}

/// Product of the degree-`k` blocks along the closed word `c₀ c₁ … c_{m−1}`
/// (symbols given as component ids), applied in word order.
pub fn block_product(m: &GradedIntMatrix, k: usize, word: &[usize]) -> IntMatrix {
    let mat = m.degree(k);
    let first = m.gens_of(k, word[0]);
    let mut p = IntMatrix::identity(first.len());
    for t in 0..word.len() {
        let from = m.gens_of(k, word[t]);
        let to = m.gens_of(k, word[(t + 1) % word.len()]);
        p = mat.submatrix(&to, &from).mul(&p);
    }
    p
}

/// Lefschetz number of the block composition along a closed word whose
/// transitions are candidate edges of `sys`.
pub fn lefschetz(m: &GradedIntMatrix, sys: &SymbolSystem, word: &[usize]) -> Result<BigInt> {
    if word.is_empty() {
        return Err(Error::Homology("empty word".into()));
    }
    if m.betti[2] > 0 {
        return Err(Error::Homology("H₂ is nonzero; its induced map is not computed".into()));
    }
    for t in 0..word.len() {
        let (c, d) = (word[t], word[(t + 1) % word.len()]);
        let (Some(i), Some(j)) = (sys.position(c), sys.position(d)) else {
            return Err(Error::Homology(format!("symbol {c} or {d} is not in the system")));
        };
        if sys.a[j][i] == 0 {
            return Err(Error::Homology(format!("no block for transition {c} → {d}")));
        }
    }
    Ok(block_product(m, 0, word).trace() - block_product(m, 1, word).trace())
}

/// Rigorous lower bound for `ln(p / q)` with `p, q > 0`. For `p ≥ q` the
/// result is within one ulp of the true value.
pub fn ln_ratio_lower(p: &BigInt, q: &BigInt) -> f64 {
    if p >= q {
        return ln_ratio_fixed(p, q);
    }
    let bits = p.bits().max(q.bits());
    let sh = bits.saturating_sub(62);
    let pp = (p >> sh).to_u64().expect("fits");
    let qq = (q >> sh).to_u64().expect("fits") + u64::from(sh > 0);
    let down = |v: u64| {
        let f = v as f64;
        if f as u128 > v as u128 {
            f.next_down()
        } else {
            f
        }
    };
    let up = |v: u64| {
        let f = v as f64;
        if (f as u128) < v as u128 {
            f.next_up()
        } else {
            f
        }
    };
    let r = div_down(down(pp), up(qq));
    // two ulps cover the error of the library logarithm
    r.ln().next_down().next_down()
}

const FIX: u64 = 128;

/// `⌊2^FIX · atanh(n/d)⌋` from below, for `0 ≤ n/d < 1/2`. Every term is
/// truncated downward, so the sum never exceeds the true value.
fn atanh_fixed(n: &BigInt, d: &BigInt) -> BigInt {
    let one = BigInt::one() << FIX;
    let z = (n << FIX) / d;
    let z2 = (&z * &z) >> FIX;
    let mut pow = z;
    let mut sum = BigInt::zero();
    let mut k = 1u32;
    while !pow.is_zero() {
        sum += &pow / BigInt::from(k);
        pow = (&pow * &z2) >> FIX;
        k += 2;
    }
    debug_assert!(sum < one);
    sum
}

/// `ln(p/q)` for `p ≥ q` as `k ln 2 + 2 atanh(z)`, evaluated in fixed point
/// and rounded down to a double.
fn ln_ratio_fixed(p: &BigInt, q: &BigInt) -> f64 {
    let mut k = p.bits() as i64 - q.bits() as i64;
    let scaled = |k: i64| if k >= 0 { q << k as usize } else { q >> (-k) as usize };
    while k > 0 && &scaled(k) > p {
        k -= 1;
    }
    while &scaled(k + 1) <= p {
        k += 1;
    }
    let qk = scaled(k);
    let ln2 = atanh_fixed(&BigInt::one(), &BigInt::from(3)) * 2;
    let r: BigInt = ln2 * k + atanh_fixed(&(p - &qk), &(p + &qk)) * 2;
    if !r.is_positive() {
        return 0.0;
    }
    let sh = r.bits().saturating_sub(53);
    let m = (&r >> sh).to_u64().expect("53 bits");
    // m·2^sh ≤ r, and m is exact in a double
    m as f64 * 2f64.powi(sh as i32 - FIX as i32)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EntropyBound {
    pub value: f64,
    /// Power `k` at which the bound was reached.
    pub power: usize,
    /// Size of the strongly connected block that reached it.
    pub block: usize,
    pub no_cycle: bool,
}

impl EntropyBound {
    /// The bound as a decimal string rounded down to 12 places.
    pub fn decimal(&self) -> String {
        format_down(self.value)
    }
}

pub fn format_down(v: f64) -> String {
    if v <= 0.0 {
        return "0.000000000000".into();
    }
    format!("{:.12}", (v - 1e-12).max(0.0))
}

/// Lower bound for `log sp(A)`: for every irreducible block and
/// `1 ≤ k ≤ maxpow`, `min_j (A^k 1)_j / (A^{k−1} 1)_j ≤ sp(A)`.
pub fn entropy_lower_bound(a: &[Vec<u8>], maxpow: usize) -> EntropyBound {
    let n = a.len();
    let succ = |i: usize| (0..n).filter(|&j| a[j][i] != 0).collect::<Vec<_>>();
    let (comp, ncomp) = scc(n, &succ);
    let mut best = EntropyBound { value: 0.0, power: 0, block: 0, no_cycle: true };
    for c in 0..ncomp {
        let nodes: Vec<usize> = (0..n).filter(|&i| comp[i] == c).collect();
        if nodes.len() == 1 && a[nodes[0]][nodes[0]] == 0 {
            continue;
        }
        best.no_cycle = false;
        let mut x: Vec<BigInt> = vec![BigInt::one(); nodes.len()];
        for k in 1..=maxpow.max(1) {
            let y: Vec<BigInt> = nodes
                .iter()
                .map(|&j| nodes.iter().enumerate().filter(|(_, &i)| a[j][i] != 0).map(|(t, _)| x[t].clone()).sum())
                .collect();
            // minimise y_j / x_j by cross-multiplication
            let mut m = 0;
            for t in 1..nodes.len() {
                if &y[t] * &x[m] < &y[m] * &x[t] {
                    m = t;
                }
            }
            let v = ln_ratio_lower(&y[m], &x[m]);
            if v > best.value || (best.power == 0 && v >= best.value) {
                best.value = v.max(0.0);
                best.power = k;
                best.block = nodes.len();
            }
            x = y;
        }
        // one more certificate from an approximate Perron vector
        let sub: Vec<Vec<u8>> = nodes.iter().map(|&j| nodes.iter().map(|&i| a[j][i]).collect()).collect();
        if let Some(v) = perron_ratio_lower(&sub) {
            if v > best.value {
                best.value = v;
                best.power = 1;
                best.block = nodes.len();
            }
        }
    }
    best
}

/// `log min_j (Ax)_j / x_j` for an integer vector `x > 0` rounded from power
/// iteration on `A + I` (which is primitive when `A` is irreducible).
fn perron_ratio_lower(a: &[Vec<u8>]) -> Option<f64> {
    let n = a.len();
    let mut v = vec![1.0f64; n];
    for _ in 0..2000 {
        let mut w: Vec<f64> = (0..n).map(|j| v[j] + (0..n).filter(|&i| a[j][i] != 0).map(|i| v[i]).sum::<f64>()).collect();
        let m = w.iter().cloned().fold(0.0, f64::max);
        if m <= 0.0 || !m.is_finite() {
            return None;
        }
        w.iter_mut().for_each(|t| *t /= m);
        v = w;
    }
    let scale = 2f64.powi(40);
    let x: Vec<BigInt> = v.iter().map(|&t| BigInt::from(((t * scale).round() as i64).max(1))).collect();
    let y: Vec<BigInt> =
        (0..n).map(|j| (0..n).filter(|&i| a[j][i] != 0).map(|i| x[i].clone()).sum()).collect();
    let mut m = 0;
    for t in 1..n {
        if &y[t] * &x[m] < &y[m] * &x[t] {
            m = t;
        }
    }
    if y[m].is_zero() {
        return None;
    }
    Some(ln_ratio_lower(&y[m], &x[m]).max(0.0))
}

/// Machine-readable summary of a certification.
#[derive(Clone, Debug, Serialize)]
pub struct CertificationReport {
    pub betti: [usize; 3],
    pub reduced_betti: [usize; 2],
    pub gens_per_component: Vec<usize>,
    pub symbols_before: usize,
    pub symbols_after: usize,
    pub candidate_edges: usize,
    pub certified_edges: usize,
    pub symbols: Vec<usize>,
    pub selection: Vec<usize>,
    pub a: Vec<Vec<u8>>,
    pub edges: Vec<EdgeCert>,
    pub shift_equivalence_verified: bool,
    pub entropy_power: usize,
    pub entropy_lb: String,
    pub no_cycle: bool,
}

impl CertificationReport {
    pub fn new(full: &GradedIntMatrix, red: &Reduced, sys: &SymbolSystem, h: &EntropyBound, se_ok: bool) -> Self {
        let gens_per_component = (0..full.n_components).map(|c| full.gens_of(1, c).len()).collect();
        CertificationReport {
            betti: full.betti,
            reduced_betti: [red.m.betti[0], red.m.betti[1]],
            gens_per_component,
            symbols_before: sys.symbols_before,
            symbols_after: sys.len(),
            candidate_edges: sys.candidate_edges,
            certified_edges: sys.n_edges(),
            symbols: sys.symbols.clone(),
            selection: sys.selection.clone(),
            a: sys.a.clone(),
            edges: sys.edges.clone(),
            shift_equivalence_verified: se_ok,
            entropy_power: h.power,
            entropy_lb: h.decimal(),
            no_cycle: h.no_cycle,
        }
    }
}

/// Distinct symbols visited by certified edges.
pub fn used_symbols(sys: &SymbolSystem) -> BTreeSet<usize> {
    sys.edges.iter().flat_map(|e| [e.from, e.to]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn graded(m1: IntMatrix, tags: Vec<usize>, ncomp: usize) -> GradedIntMatrix {
        let n = m1.rows();
        GradedIntMatrix {
            m0: IntMatrix::zeros(0, 0),
            m1,
            betti: [0, n, 0],
            h0_tags: vec![],
            h1_tags: tags,
            n_components: ncomp,
        }
    }

    fn mat(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_rows(rows.first().map_or(0, |r| r.len()), rows)
    }

    #[test]
    fn reduction_examples() {
        let nil = graded(mat(&[vec![0, 1], vec![0, 0]]), vec![0, 0], 1);
        let r = reduce_recurrent(&nil);
        assert_eq!(r.m.m1.rows(), 0);
        assert!(r.equiv[1].verify(&nil.m1, &r.m.m1));

        let inv = graded(mat(&[vec![2, 1], vec![1, 1]]), vec![0, 0], 1);
        let r = reduce_recurrent(&inv);
        assert_eq!(r.m.m1, inv.m1);
        assert!(r.equiv[1].verify(&inv.m1, &r.m.m1));

        let tail = graded(mat(&[vec![1, 1], vec![0, 0]]), vec![0, 0], 1);
        let r = reduce_recurrent(&tail);
        assert_eq!(r.m.m1, mat(&[vec![1]]));
        assert!(r.equiv[1].verify(&tail.m1, &r.m.m1));
    }

    #[test]
    fn reduction_verifies_on_random_matrices() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let n = rng.gen_range(1..9);
            let rows: Vec<Vec<i64>> =
                (0..n).map(|_| (0..n).map(|_| if rng.gen_bool(0.25) { rng.gen_range(-2..=2) } else { 0 }).collect()).collect();
            let m = graded(mat(&rows), vec![0; n], 1);
            let r = reduce_recurrent(&m);
            assert!(r.equiv[1].verify(&m.m1, &r.m.m1), "{rows:?}");
            // the trace of every power survives reduction
            for k in 1..5 {
                assert_eq!(m.m1.pow(k).trace(), r.m.m1.pow(k).trace());
            }
        }
    }

    #[test]
    fn horseshoe_blocks_certify_full_shift() {
        let m = graded(mat(&[vec![1, -1], vec![1, 1]]), vec![0, 1], 2);
        let cand = build_symbol_system(&m);
        assert_eq!(cand.a, vec![vec![1, 1], vec![1, 1]]);
        let sys = verify_sft(&cand, &m);
        assert_eq!(sys.a, vec![vec![1, 1], vec![1, 1]]);
        let h = entropy_lower_bound(&sys.a, 8);
        assert!((h.value - 2f64.ln()).abs() < 1e-12 && h.value <= 2f64.ln());
        let l = lefschetz(&m, &sys, &[0, 1]).unwrap();
        assert_eq!(l, BigInt::from(1));
        assert!(!l.is_zero());
    }

    /// Folded horseshoe on four components: the full matrix is nilpotent,
    /// yet the blocks form the two-block presentation of the 2-shift.
    #[test]
    fn duplicate_generators_are_split_off() {
        let m1 = mat(&[
            vec![1, 1, 0, 0, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 1, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, -1, -1, -1, -1],
            vec![0, 0, 0, 0, 0, 0, 0, 1, 1],
            vec![1, 1, 0, 0, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 1, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 0, -1, -1],
            vec![0, 0, 0, 0, 0, -1, -1, 0, 0],
        ]);
        assert!(m1.pow(9).is_zero());
        let m = graded(m1, vec![0, 0, 0, 1, 1, 2, 2, 3, 3], 4);
        let red = reduce_recurrent(&m);
        assert!(red.equiv[1].verify(&m.m1, &red.m.m1));
        assert_eq!(red.m.h1_tags, vec![0, 1, 2, 3]);
        let sys = verify_sft(&build_symbol_system(&red.m), &red.m);
        assert_eq!(sys.n_edges(), 8);
        let h = entropy_lower_bound(&sys.a, 4);
        assert!(h.value <= 2f64.ln() && h.value > 2f64.ln() - 1e-12);
        // without the split every edge out of component 0 is contaminated
        let plain = verify_sft(&build_symbol_system(&m), &m);
        assert!(plain.n_edges() < 8);
    }

    #[test]
    fn single_component_examples() {
        let m = graded(mat(&[vec![1]]), vec![0], 1);
        let sys = verify_sft(&build_symbol_system(&m), &m);
        assert_eq!(sys.a, vec![vec![1]]);
        assert_eq!(lefschetz(&m, &sys, &[0]).unwrap(), BigInt::from(-1));
        let z = graded(mat(&[vec![0, 1], vec![0, 0]]), vec![0, 0], 1);
        let zs = build_symbol_system(&z);
        assert_eq!(lefschetz(&z, &zs, &[0]).unwrap(), BigInt::zero());
        assert!(lefschetz(&z, &zs, &[3]).is_err());
    }

    #[test]
    fn contaminated_row_forces_other_selection() {
        // components: 0 ↦ gens {0, 1}, 1 ↦ gens {2, 3}
        // row 2 sees both gens of component 0, row 3 only gen 1
        let m = graded(
            mat(&[vec![0, 0, 0, 0], vec![0, 0, 0, 1], vec![1, 1, 0, 0], vec![0, 1, 0, 0]]),
            vec![0, 0, 1, 1],
            2,
        );
        let cand = build_symbol_system(&m);
        assert_eq!(cand.n_edges(), 2);
        let first = vec![0, 2];
        assert_eq!(score(&cand, &m.m1, &first), 0);
        let sys = verify_sft(&cand, &m);
        assert_eq!(sys.selection, vec![1, 3]);
        assert_eq!(sys.n_edges(), 2);
        // with both rows contaminated the edge 0 → 1 cannot be certified
        let m = graded(
            mat(&[vec![0, 0, 0, 0], vec![0, 0, 0, 1], vec![1, 1, 0, 0], vec![1, 1, 0, 0]]),
            vec![0, 0, 1, 1],
            2,
        );
        let sys = verify_sft(&build_symbol_system(&m), &m);
        assert!(sys.n_edges() < 2);
        assert_eq!(entropy_lower_bound(&sys.a, 10).value, 0.0);
    }

    #[test]
    fn certified_cycles_are_not_nilpotent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..150 {
            let ncomp = rng.gen_range(1..5);
            let tags: Vec<usize> = (0..rng.gen_range(ncomp..ncomp + 5)).map(|g| if g < ncomp { g } else { rng.gen_range(0..ncomp) }).collect();
            let n = tags.len();
            let rows: Vec<Vec<i64>> =
                (0..n).map(|_| (0..n).map(|_| if rng.gen_bool(0.35) { rng.gen_range(-2..=2) } else { 0 }).collect()).collect();
            let m = graded(mat(&rows), tags, ncomp);
            let sys = verify_sft(&build_symbol_system(&m), &m);
            // enumerate closed walks of length ≤ 6 in the certified graph
            let k = sys.len();
            let mut stack: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
            while let Some(w) = stack.pop() {
                let last = *w.last().unwrap();
                if sys.a[w[0]][last] != 0 {
                    let word: Vec<usize> = w.iter().map(|&i| sys.symbols[i]).collect();
                    let p = block_product(&m, 1, &word);
                    assert!(!p.pow(p.rows()).is_zero(), "nilpotent certified cycle {word:?}");
                }
                if w.len() < 6 {
                    for j in 0..k {
                        if sys.a[j][last] != 0 {
                            let mut v = w.clone();
                            v.push(j);
                            stack.push(v);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn entropy_examples() {
        let ones = vec![vec![1, 1], vec![1, 1]];
        let h = entropy_lower_bound(&ones, 1);
        assert!(h.value <= 2f64.ln() && 2f64.ln() - h.value < 1e-12);
        let golden = vec![vec![1, 1], vec![1, 0]];
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let h = entropy_lower_bound(&golden, 24);
        assert!(h.value >= 0.4812 && h.value <= phi.ln() + 1e-12, "{}", h.value);
        let none = entropy_lower_bound(&[vec![0, 1], vec![0, 0]], 10);
        assert!(none.no_cycle && none.value == 0.0);
        // identity: one fixed symbol per block, entropy 0
        let id = entropy_lower_bound(&[vec![1, 0], vec![0, 1]], 10);
        assert!(!id.no_cycle && id.value <= 1e-15);
    }

    #[test]
    fn entropy_is_monotone_and_below_row_sums() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.gen_range(1..7);
            let a: Vec<Vec<u8>> = (0..n).map(|_| (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect()).collect();
            let mut last = 0.0;
            for p in 1..12 {
                let h = entropy_lower_bound(&a, p).value;
                assert!(h >= last);
                last = h;
            }
            let max_row = a.iter().map(|r| r.iter().map(|&x| x as u32).sum::<u32>()).max().unwrap();
            if max_row > 0 {
                assert!(last <= (max_row as f64).ln() + 1e-12);
            }
        }
    }

    #[test]
    fn ln_ratio_is_a_lower_bound() {
        let two = BigInt::from(2);
        let big = num_traits::pow(BigInt::from(3), 400);
        let v = ln_ratio_lower(&(&big * 2), &big);
        assert!(v <= 2f64.ln() && 2f64.ln() - v < 1e-12);
        assert!(ln_ratio_lower(&two, &two) <= 0.0);
        assert_eq!(format_down(0.5), "0.499999999999");
    }

    #[test]
    fn ln_ratio_is_within_an_ulp() {
        // 40-digit values of ln 2, ln 3, ln 10 and ln(7/5)
        let cases = [
            (2, 1, "0.6931471805599453094172321214581765680755"),
            (3, 1, "1.098612288668109691395245236922525704647"),
            (10, 1, "2.302585092994045684017991454684364207601"),
            (7, 5, "0.3364722366212129305131602463555176760890"),
        ];
        for (p, q, exact) in cases {
            let v = ln_ratio_lower(&BigInt::from(p), &BigInt::from(q));
            assert!(crate::hp::Dyadic::from_f64(v).lt_decimal(exact), "{p}/{q}: {v}");
            assert!(crate::hp::Dyadic::from_f64(v.next_up().next_up()).gt_decimal(exact), "{p}/{q}: {v}");
        }
    }
}
