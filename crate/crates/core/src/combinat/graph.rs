//! Digraph utilities over box ids: strongly connected components and the
//! combinatorial invariant set.

use crate::boxtree::BoxId;
use crate::combinat::CombEnclosure;
use crate::error::{Error, Result};

/// Iterative Tarjan. Returns the component index of every node; components
/// are numbered in reverse topological order (sinks first).
pub fn scc(n: usize, succ: &dyn Fn(usize) -> Vec<usize>) -> (Vec<usize>, usize) {
    const UNSEEN: usize = usize::MAX;
    let adj: Vec<Vec<usize>> = (0..n).map(succ).collect();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut ncomp = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, 0));
        while let Some(&(v, pos)) = call.last() {
            if pos < adj[v].len() {
                call.last_mut().expect("frame").1 += 1;
                let w = adj[v][pos];
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(p, _)) = call.last() {
                low[p] = low[p].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = ncomp;
                    if w == v {
                        break;
                    }
                }
                ncomp += 1;
            }
        }
    }
    (comp, ncomp)
}

/// Nodes lying on a cycle (nontrivial SCC or self-loop).
pub fn cycle_nodes(n: usize, succ: &dyn Fn(usize) -> Vec<usize>) -> Vec<bool> {
    let (comp, ncomp) = scc(n, succ);
    let mut size = vec![0usize; ncomp];
    for &c in &comp {
        size[c] += 1;
    }
    (0..n).map(|v| size[comp[v]] > 1 || succ(v).contains(&v)).collect()
}

fn reach(n: usize, adj: &[Vec<usize>], start: &[bool]) -> Vec<bool> {
    let mut seen = start.to_vec();
    let mut queue: Vec<usize> = (0..n).filter(|&v| seen[v]).collect();
    while let Some(v) = queue.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push(w);
            }
        }
    }
    seen
}

/// Invariant part of `n_set` under 𝒯: boxes through which a bi-infinite
/// path stays inside the set. Input and output are sorted id lists.
pub fn invariant_set(n_set: &[BoxId], t: &CombEnclosure) -> Result<Vec<BoxId>> {
    let local: std::collections::HashMap<BoxId, usize> = n_set.iter().enumerate().map(|(k, &b)| (b, k)).collect();
    let m = n_set.len();
    let mut fwd = vec![Vec::new(); m];
    let mut bwd = vec![Vec::new(); m];
    for (k, &b) in n_set.iter().enumerate() {
        let col = t.column(b).ok_or(Error::IncompleteMap(b))?;
        for j in col {
            if let Some(&l) = local.get(j) {
                fwd[k].push(l);
                bwd[l].push(k);
            }
        }
    }
    let on_cycle = cycle_nodes(m, &|v| fwd[v].clone());
    let from_cycle = reach(m, &fwd, &on_cycle);
    let to_cycle = reach(m, &bwd, &on_cycle);
    Ok((0..m).filter(|&k| from_cycle[k] && to_cycle[k]).map(|k| n_set[k]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn enc(n: usize, edges: &[(usize, usize)]) -> CombEnclosure {
        let mut cols = vec![Vec::new(); n];
        for &(a, b) in edges {
            cols[a].push(b);
        }
        CombEnclosure::from_columns(cols.into_iter().map(Some).collect())
    }

    #[test]
    fn fixed_box_and_transients() {
        let t = enc(1, &[(0, 0)]);
        assert_eq!(invariant_set(&[0], &t).unwrap(), vec![0]);
        let t = enc(3, &[(0, 0), (0, 1), (1, 2)]);
        assert_eq!(invariant_set(&[0, 1, 2], &t).unwrap(), vec![0]);
        let t = CombEnclosure::from_columns(vec![Some(vec![0]), None]);
        assert!(matches!(invariant_set(&[0, 1], &t), Err(Error::IncompleteMap(1))));
    }

    #[test]
    fn scc_on_two_cycles() {
        let adj = [vec![1], vec![0, 2], vec![3], vec![2]];
        let (comp, n) = scc(4, &|v| adj[v].clone());
        assert_eq!(n, 2);
        assert_eq!(comp[0], comp[1]);
        assert_eq!(comp[2], comp[3]);
        // sink component numbered first
        assert!(comp[2] < comp[0]);
    }

    /// v is invariant iff some length-2m path ends at v and some length-2m
    /// path starts at v (enumerated by boolean matrix powers).
    fn brute(n: usize, edges: &[(usize, usize)], subset: &[usize]) -> Vec<usize> {
        let inside: Vec<bool> = (0..n).map(|v| subset.contains(&v)).collect();
        let mut a = vec![vec![false; n]; n];
        for &(x, y) in edges {
            if inside[x] && inside[y] {
                a[x][y] = true;
            }
        }
        let len = 2 * subset.len().max(1);
        let step = |cur: &Vec<bool>, forward: bool| -> Vec<bool> {
            (0..n)
                .map(|w| (0..n).any(|v| cur[v] && if forward { a[v][w] } else { a[w][v] }))
                .collect()
        };
        subset
            .iter()
            .copied()
            .filter(|&v| {
                let mut f = vec![false; n];
                f[v] = true;
                let mut b = f.clone();
                for _ in 0..len {
                    f = step(&f, true);
                    b = step(&b, false);
                }
                f.iter().any(|&x| x) && b.iter().any(|&x| x)
            })
            .collect()
    }

    #[test]
    fn random_digraphs_match_path_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
        for _ in 0..500 {
            let n = rng.gen_range(1..=12);
            let p = rng.gen_range(0.05..0.4);
            let edges: Vec<(usize, usize)> =
                (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).filter(|_| rng.gen_bool(p)).collect();
            let subset: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.8)).collect();
            let t = enc(n, &edges);
            assert_eq!(invariant_set(&subset, &t).unwrap(), brute(n, &edges, &subset));
        }
    }
}
