//! Structural (graph) checks on the support of a transition kernel.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::Mat;

fn successors(kernel: &Mat) -> Vec<Vec<usize>> {
    let n = kernel.nrows();
    (0..n)
        .map(|i| (0..n).filter(|&j| kernel[(i, j)] > 0.0).collect())
        .collect()
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    level[start] = Some(0);
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        let next = level[u].map(|l| l + 1);
        for &v in &adj[u] {
            if level[v].is_none() {
                level[v] = next;
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// True when every state reaches every other state through positive-probability moves.
pub fn is_irreducible(kernel: &Mat) -> bool {
    let n = kernel.nrows();
    if n == 0 {
        return false;
    }
    let fwd = successors(kernel);
    let mut rev = vec![Vec::new(); n];
    for (u, outs) in fwd.iter().enumerate() {
        for &v in outs {
            rev[v].push(u);
        }
    }
    bfs_levels(&fwd, 0).iter().all(Option::is_some) && bfs_levels(&rev, 0).iter().all(Option::is_some)
}

/// Period of an irreducible chain: gcd of `level(u) + 1 - level(v)` over all edges.
pub fn period(kernel: &Mat) -> usize {
    let adj = successors(kernel);
    let level = bfs_levels(&adj, 0);
    let mut g = 0;
    for (u, outs) in adj.iter().enumerate() {
        let Some(lu) = level[u] else { continue };
        for &v in outs {
            if let Some(lv) = level[v] {
                g = gcd(g, (lu + 1).abs_diff(lv));
            }
        }
    }
    g
}

pub fn check_ergodic(kernel: &Mat) -> Result<()> {
    if !is_irreducible(kernel) {
        return Err(Error::NotIrreducible);
    }
    match period(kernel) {
        1 => Ok(()),
        p => Err(Error::Periodic { period: p }),
    }
}
