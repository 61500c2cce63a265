//! Agent interaction networks.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Undirected simple graph over `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adj: Vec<Vec<usize>>,
    /// Original node label for each dense index, when the graph was relabeled.
    labels: Option<Vec<u64>>,
}

impl Topology {
    /// Builds a graph from an edge list, dropping self-loops and duplicates.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut sets = vec![BTreeSet::new(); n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::invalid(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a != b {
                sets[a].insert(b);
                sets[b].insert(a);
            }
        }
        Ok(Topology {
            adj: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            labels: None,
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("complete graph needs at least 2 nodes"));
        }
        Ok(Topology {
            adj: (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect(),
            labels: None,
        })
    }

    pub fn empty() -> Self {
        Topology {
            adj: vec![],
            labels: Some(vec![]),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn min_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    /// Original labels of the dense node indices, if the graph was relabeled.
    pub fn labels(&self) -> Option<&[u64]> {
        self.labels.as_deref()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (i, ns) in self.adj.iter().enumerate() {
            out.extend(ns.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// Local clustering coefficient of one node; 0 for degree < 2.
    pub fn local_clustering(&self, i: usize) -> f64 {
        let ns = &self.adj[i];
        let d = ns.len();
        if d < 2 {
            return 0.0;
        }
        let mut links = 0usize;
        for (a, &u) in ns.iter().enumerate() {
            for &w in &ns[a + 1..] {
                if self.has_edge(u, w) {
                    links += 1;
                }
            }
        }
        links as f64 / (d * (d - 1) / 2) as f64
    }

    pub fn mean_clustering(&self) -> f64 {
        let n = self.n_nodes();
        if n == 0 {
            return 0.0;
        }
        (0..n).map(|i| self.local_clustering(i)).sum::<f64>() / n as f64
    }

    /// Removes nodes of degree < k until none remain; survivors are relabeled
    /// densely in increasing original order.
    pub fn k_core(&self, k: usize) -> Topology {
        let n = self.n_nodes();
        let mut deg: Vec<usize> = self.adj.iter().map(Vec::len).collect();
        let mut removed = vec![false; n];
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| deg[i] < k).collect();
        for &i in &queue {
            removed[i] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if !removed[v] {
                    deg[v] -= 1;
                    if deg[v] < k {
                        removed[v] = true;
                        queue.push_back(v);
                    }
                }
            }
        }
        self.induced(&removed)
    }

    fn induced(&self, removed: &[bool]) -> Topology {
        let keep: Vec<usize> = (0..self.n_nodes()).filter(|&i| !removed[i]).collect();
        let mut new_index = vec![usize::MAX; self.n_nodes()];
        for (new, &old) in keep.iter().enumerate() {
            new_index[old] = new;
        }
        let adj = keep
            .iter()
            .map(|&old| {
                self.adj[old]
                    .iter()
                    .filter(|&&v| !removed[v])
                    .map(|&v| new_index[v])
                    .collect()
            })
            .collect();
        let labels = keep
            .iter()
            .map(|&old| self.labels.as_ref().map_or(old as u64, |l| l[old]))
            .collect();
        Topology {
            adj,
            labels: Some(labels),
        }
    }

    /// Reads a whitespace-separated integer edge list; `#` lines are comments.
    pub fn load_edge_list(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut raw = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let mut it = line.split_whitespace();
            let a: u64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err("expected two integer node ids"))?;
            let b: u64 = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err("expected two integer node ids"))?;
            if it.next().is_some() {
                return Err(parse_err("trailing tokens after edge"));
            }
            if a != b {
                raw.push((a, b));
            }
        }
        if raw.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let labels: Vec<u64> = raw
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<u64, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let mut topo =
            Topology::from_edges(labels.len(), raw.iter().map(|(a, b)| (index[a], index[b])))?;
        topo.labels = Some(labels);
        Ok(topo)
    }

    /// Writes the edge list using original labels when present.
    pub fn save_edge_list(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (a, b) in self.edges() {
            let _ = writeln!(out, "{} {}", self.label(a), self.label(b));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Writes the dense-index to original-label map, one `dense original` pair per line.
    pub fn save_label_map(&self, path: &Path) -> Result<()> {
        let mut out = String::from("# dense original\n");
        for i in 0..self.n_nodes() {
            let _ = writeln!(out, "{i} {}", self.label(i));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    fn label(&self, i: usize) -> u64 {
        self.labels.as_ref().map_or(i as u64, |l| l[i])
    }

    /// Seeded random `degree`-regular connected graph.
    ///
    /// Starts from a circulant lattice and applies random degree-preserving
    /// switches (10 per edge) until the result is connected.
    pub fn random_regular(n: usize, degree: usize, seed: u64) -> Result<Self> {
        check_regular(n, degree)?;
        let mut g = BitGraph::circulant(n, degree);
        let mut rng = rng::stream(seed, &[rng::tag::TOPOLOGY]);
        let mut edges = g.edge_list();
        let rounds = 10 * edges.len();
        loop {
            for _ in 0..rounds {
                if let Some(sw) = propose_swap(&g, &edges, &mut rng) {
                    g.apply(&sw, &mut edges);
                }
            }
            let t = g.to_topology();
            if t.is_connected() {
                return Ok(t);
            }
        }
    }

    /// Greedy clustering maximization over degree-preserving double-edge swaps.
    ///
    /// A proposal is kept only if it strictly increases mean clustering and
    /// the graph stays connected. `swap_budget` counts proposals.
    pub fn max_mean_clustering(n: usize, degree: usize, swap_budget: usize, seed: u64) -> Result<Self> {
        let start = Self::random_regular(n, degree, seed)?;
        Ok(start.rewire_for_clustering(swap_budget, seed))
    }

    /// Hill-climbs mean clustering from this graph (see [`Topology::max_mean_clustering`]).
    pub fn rewire_for_clustering(&self, swap_budget: usize, seed: u64) -> Topology {
        let mut g = BitGraph::from_topology(self);
        let mut edges = g.edge_list();
        let weight: Vec<f64> = (0..g.n)
            .map(|i| {
                let d = self.degree(i);
                if d < 2 {
                    0.0
                } else {
                    2.0 / (d * (d - 1)) as f64
                }
            })
            .collect();
        let mut rng = rng::stream(seed, &[rng::tag::TOPOLOGY, 1]);
        for _ in 0..swap_budget {
            let Some(sw) = propose_swap(&g, &edges, &mut rng) else {
                continue;
            };
            let gain = g.apply_with_gain(&sw, &weight, &mut edges);
            if gain > 1e-12 && g.is_connected() {
                continue;
            }
            g.apply(&sw.inverse(), &mut edges);
        }
        let mut t = g.to_topology();
        t.labels = self.labels.clone();
        t
    }
}

fn check_regular(n: usize, degree: usize) -> Result<()> {
    if degree == 0 || degree >= n {
        return Err(Error::InfeasibleGraph(format!("degree {degree} with {n} nodes")));
    }
    if (n * degree) % 2 != 0 {
        return Err(Error::InfeasibleGraph(format!("n * degree = {} is odd", n * degree)));
    }
    if degree == 1 && n > 2 {
        return Err(Error::InfeasibleGraph("a 1-regular graph on more than 2 nodes is disconnected".into()));
    }
    Ok(())
}

/// Replace edges `(a,b)` and `(c,d)` with `(a,d)` and `(c,b)`.
#[derive(Debug, Clone, Copy)]
struct Swap {
    slot_ab: usize,
    slot_cd: usize,
    a: usize,
    b: usize,
    c: usize,
    d: usize,
}

impl Swap {
    fn inverse(&self) -> Swap {
        // (a,d),(c,b) -> (a,b),(c,d)
        Swap {
            slot_ab: self.slot_ab,
            slot_cd: self.slot_cd,
            a: self.a,
            b: self.d,
            c: self.c,
            d: self.b,
        }
    }
}

fn propose_swap<R: Rng>(g: &BitGraph, edges: &[(usize, usize)], rng: &mut R) -> Option<Swap> {
    let m = edges.len();
    if m < 2 {
        return None;
    }
    let i = rng.gen_range(0..m);
    let j = rng.gen_range(0..m);
    if i == j {
        return None;
    }
    let (a, b) = edges[i];
    let (mut c, mut d) = edges[j];
    if rng.gen::<bool>() {
        std::mem::swap(&mut c, &mut d);
    }
    if a == c || a == d || b == c || b == d {
        return None;
    }
    if g.has(a, d) || g.has(c, b) {
        return None;
    }
    Some(Swap {
        slot_ab: i,
        slot_cd: j,
        a,
        b,
        c,
        d,
    })
}

/// Bitset adjacency used by the rewiring loops.
struct BitGraph {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitGraph {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        BitGraph {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    fn from_topology(t: &Topology) -> Self {
        let mut g = BitGraph::new(t.n_nodes());
        for (a, b) in t.edges() {
            g.set(a, b, true);
        }
        g
    }

    fn circulant(n: usize, degree: usize) -> Self {
        let mut g = BitGraph::new(n);
        for i in 0..n {
            for off in 1..=degree / 2 {
                g.set(i, (i + off) % n, true);
            }
            if degree % 2 == 1 {
                g.set(i, (i + n / 2) % n, true);
            }
        }
        g
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    #[inline]
    fn has(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    fn set(&mut self, a: usize, b: usize, on: bool) {
        for (x, y) in [(a, b), (b, a)] {
            let w = &mut self.bits[x * self.words + y / 64];
            if on {
                *w |= 1 << (y % 64);
            } else {
                *w &= !(1 << (y % 64));
            }
        }
    }

    /// Sum of node weights over triangles through edge (a,b), with a and b counted once each per triangle.
    fn triangle_weight(&self, a: usize, b: usize, weight: &[f64]) -> f64 {
        let mut total = 0.0;
        for (w, (x, y)) in self.row(a).iter().zip(self.row(b)).enumerate() {
            let mut common = x & y;
            while common != 0 {
                let t = w * 64 + common.trailing_zeros() as usize;
                total += weight[a] + weight[b] + weight[t];
                common &= common - 1;
            }
        }
        total
    }

    fn apply(&mut self, sw: &Swap, edges: &mut [(usize, usize)]) {
        self.set(sw.a, sw.b, false);
        self.set(sw.c, sw.d, false);
        self.set(sw.a, sw.d, true);
        self.set(sw.c, sw.b, true);
        edges[sw.slot_ab] = (sw.a, sw.d);
        edges[sw.slot_cd] = (sw.c, sw.b);
    }

    /// Applies the swap and returns the change in summed local clustering.
    fn apply_with_gain(&mut self, sw: &Swap, weight: &[f64], edges: &mut [(usize, usize)]) -> f64 {
        let mut gain = 0.0;
        gain -= self.triangle_weight(sw.a, sw.b, weight);
        self.set(sw.a, sw.b, false);
        gain -= self.triangle_weight(sw.c, sw.d, weight);
        self.set(sw.c, sw.d, false);
        gain += self.triangle_weight(sw.a, sw.d, weight);
        self.set(sw.a, sw.d, true);
        gain += self.triangle_weight(sw.c, sw.b, weight);
        self.set(sw.c, sw.b, true);
        edges[sw.slot_ab] = (sw.a, sw.d);
        edges[sw.slot_cd] = (sw.c, sw.b);
        gain
    }

    fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = vec![];
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.has(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![0u64; self.words];
        let mut stack = vec![0usize];
        seen[0] |= 1;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for (w, &bits) in self.row(u).iter().enumerate() {
                let mut fresh = bits & !seen[w];
                seen[w] |= fresh;
                while fresh != 0 {
                    stack.push(w * 64 + fresh.trailing_zeros() as usize);
                    count += 1;
                    fresh &= fresh - 1;
                }
            }
        }
        count == self.n
    }

    fn to_topology(&self) -> Topology {
        let adj = (0..self.n)
            .map(|a| (0..self.n).filter(|&b| self.has(a, b)).collect())
            .collect();
        Topology { adj, labels: None }
    }
}

/// Outcome of screening a real network after 3-core decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkReport {
    pub removed_fraction: f64,
    pub connected: bool,
    pub n_core: usize,
    pub min_degree: usize,
    pub accepted: bool,
    pub reasons: Vec<String>,
}

pub const MAX_REMOVED_FRACTION: f64 = 0.05;
pub const REQUIRED_CORE_DEGREE: usize = 3;

/// Screens a decomposed network: fewer than 5% of nodes removed, connected,
/// at most `max_nodes` nodes, and minimum degree at least 3.
pub fn validate_real_network(original: &Topology, core: &Topology, max_nodes: usize) -> NetworkReport {
    let n0 = original.n_nodes().max(1);
    let removed_fraction = (original.n_nodes() - core.n_nodes().min(original.n_nodes())) as f64 / n0 as f64;
    let connected = core.is_connected();
    let n_core = core.n_nodes();
    let min_degree = core.min_degree();
    let mut reasons = vec![];
    if removed_fraction >= MAX_REMOVED_FRACTION {
        reasons.push("removal fraction".to_string());
    }
    if !connected {
        reasons.push("disconnected".to_string());
    }
    if n_core > max_nodes {
        reasons.push("too many nodes".to_string());
    }
    if min_degree < REQUIRED_CORE_DEGREE {
        reasons.push("minimum degree".to_string());
    }
    NetworkReport {
        removed_fraction,
        connected,
        n_core,
        min_degree,
        accepted: reasons.is_empty(),
        reasons,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn path3() -> Topology {
        Topology::from_edges(3, [(0, 1), (1, 2)]).unwrap()
    }

    /// O(n^3) triangle counting over a dense adjacency matrix.
    fn oracle_clustering(t: &Topology) -> f64 {
        let n = t.n_nodes();
        let mut m = vec![vec![false; n]; n];
        for (a, b) in t.edges() {
            m[a][b] = true;
            m[b][a] = true;
        }
        let mut total = 0.0;
        for i in 0..n {
            let d = (0..n).filter(|&j| m[i][j]).count();
            if d < 2 {
                continue;
            }
            let mut tri = 0;
            for j in 0..n {
                for k in j + 1..n {
                    if m[i][j] && m[i][k] && m[j][k] {
                        tri += 1;
                    }
                }
            }
            total += tri as f64 / (d * (d - 1) / 2) as f64;
        }
        total / n as f64
    }

    /// Repeatedly scans for any low-degree node until none is left.
    fn oracle_k_core(t: &Topology, k: usize) -> BTreeSet<usize> {
        let mut alive: BTreeSet<usize> = (0..t.n_nodes()).collect();
        loop {
            let victim = alive
                .iter()
                .copied()
                .find(|&i| t.neighbors(i).iter().filter(|j| alive.contains(j)).count() < k);
            match victim {
                Some(v) => {
                    alive.remove(&v);
                }
                None => return alive,
            }
        }
    }

    fn random_graph(n: usize, p: f64, seed: u64) -> Topology {
        let mut r = rng::stream(seed, &[]);
        let mut edges = vec![];
        for a in 0..n {
            for b in a + 1..n {
                if r.gen::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        Topology::from_edges(n, edges).unwrap()
    }

    #[test]
    fn complete_graph() {
        let t = Topology::complete(3).unwrap();
        assert!((0..3).all(|i| t.degree(i) == 2));
        let t = Topology::complete(100).unwrap();
        assert_eq!(t.n_edges(), 4950);
        for (a, b) in t.edges() {
            assert!(t.has_edge(b, a));
        }
        assert!(Topology::complete(1).is_err());
    }

    #[test]
    fn clustering_basics() {
        assert_eq!(Topology::complete(5).unwrap().mean_clustering(), 1.0);
        assert_eq!(path3().mean_clustering(), 0.0);
    }

    #[test]
    fn clustering_matches_triangle_oracle_on_regular_graph() {
        let t = Topology::random_regular(100, 19, 42).unwrap();
        assert!((0..100).all(|i| t.degree(i) == 19));
        assert!(t.is_connected());
        let a = t.mean_clustering();
        let b = oracle_clustering(&t);
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn maxmc_preserves_degree_and_improves() {
        let start = Topology::random_regular(40, 6, 3).unwrap();
        let out = Topology::max_mean_clustering(40, 6, 20_000, 3).unwrap();
        assert!((0..40).all(|i| out.degree(i) == 6));
        assert!(out.is_connected());
        assert!(out.mean_clustering() > start.mean_clustering());
        assert!((out.mean_clustering() - oracle_clustering(&out)).abs() < 1e-12);
        let zero = Topology::max_mean_clustering(40, 6, 0, 3).unwrap();
        assert_eq!(zero, start);
    }

    #[test]
    fn infeasible_regular() {
        assert!(Topology::random_regular(5, 3, 0).is_err());
        assert!(Topology::random_regular(5, 5, 0).is_err());
        assert!(Topology::random_regular(6, 0, 0).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        std::fs::write(&p, "# comment\n0 1\n1 2\n").unwrap();
        let t = Topology::load_edge_list(&p).unwrap();
        assert_eq!((t.n_nodes(), t.n_edges()), (3, 2));

        std::fs::write(&p, "0 1\n1 0\n").unwrap();
        assert_eq!(Topology::load_edge_list(&p).unwrap().n_edges(), 1);

        std::fs::write(&p, "5 5\n").unwrap();
        assert!(matches!(Topology::load_edge_list(&p), Err(Error::EmptyGraph)));

        std::fs::write(&p, "0 1\nx 2\n").unwrap();
        assert!(matches!(
            Topology::load_edge_list(&p),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn edge_list_relabels_densely() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        std::fs::write(&p, "10 30\n30 20\n").unwrap();
        let t = Topology::load_edge_list(&p).unwrap();
        assert_eq!(t.labels().unwrap(), &[10, 20, 30]);
        assert!(t.has_edge(0, 2) && t.has_edge(1, 2));
        let q = dir.path().join("out.txt");
        t.save_edge_list(&q).unwrap();
        let back = Topology::load_edge_list(&q).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn k_core_examples() {
        let k5 = Topology::complete(5).unwrap();
        assert_eq!(k5.k_core(3).n_nodes(), 5);
        let star = Topology::from_edges(7, (1..7).map(|i| (0, i))).unwrap();
        assert_eq!(star.k_core(2).n_nodes(), 0);
    }

    #[test]
    fn k_core_matches_peeling_oracle() {
        for seed in 0..20 {
            let t = random_graph(40, 0.1, seed);
            for k in 1..5 {
                let core = t.k_core(k);
                let expect = oracle_k_core(&t, k);
                let got: BTreeSet<usize> =
                    core.labels().unwrap().iter().map(|&l| l as usize).collect();
                assert_eq!(got, expect);
                assert!(core.n_nodes() == 0 || core.min_degree() >= k);
                assert_eq!(core.k_core(k).n_nodes(), core.n_nodes());
            }
        }
    }

    #[test]
    fn validation_reports() {
        let k100 = Topology::complete(100).unwrap();
        let r = validate_real_network(&k100, &k100.k_core(3), 500);
        assert!(r.accepted, "{r:?}");
        assert_eq!(r.removed_fraction, 0.0);

        // a 20-clique plus two pendant nodes loses 2/22 ~ 9% at k = 3
        let mut edges: Vec<_> = (0..20).flat_map(|a| (a + 1..20).map(move |b| (a, b))).collect();
        edges.extend([(0, 20), (1, 21)]);
        let g = Topology::from_edges(22, edges).unwrap();
        let r = validate_real_network(&g, &g.k_core(3), 500);
        assert!(!r.accepted);
        assert_eq!(r.reasons, vec!["removal fraction".to_string()]);

        let r = validate_real_network(&k100, &k100.k_core(3), 50);
        assert_eq!(r.reasons, vec!["too many nodes".to_string()]);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["removed_fraction", "connected", "n_core", "accepted", "reasons"] {
            assert!(json.get(key).is_some());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn rewiring_keeps_degrees_and_connectivity(seed in any::<u64>(), budget in 0usize..2000) {
            let start = Topology::random_regular(30, 4, seed).unwrap();
            let out = start.rewire_for_clustering(budget, seed);
            prop_assert!((0..30).all(|i| out.degree(i) == 4));
            prop_assert!(out.is_connected());
            prop_assert!(out.mean_clustering() >= start.mean_clustering() - 1e-12);
        }
    }
}
