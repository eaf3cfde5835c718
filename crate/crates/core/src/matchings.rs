//! Perfect matchings on `[n]`, their joint multigraph, and independence
//! certification.
//!
//! Nodes are 1-based in every public type and in the text format; internal
//! bookkeeping (adjacency lists, XOR construction) uses 0-based indices.
//!
//! A family is *independent* when its joint graph has no cycle whose edges
//! come from pairwise-distinct matchings. Cycles of every length `2..=k` are
//! excluded, not only length `k`: a shorter distinct-label cycle already
//! makes one parity constraint redundant for some joint answer.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::gf2;

/// Largest `n` accepted by [`enumerate_matchings`].
pub const MAX_ENUMERATION_N: usize = 10;
/// Largest family size handled by the labeled cycle search.
pub const MAX_LABELS: usize = 64;
/// Largest `k` accepted by the canonical and sextet constructions.
pub const MAX_CONSTRUCTION_K: usize = 12;

/// A perfect matching of `[n]` into `n/2` disjoint pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Matching {
    n: usize,
    /// 1-based pairs, each with `i < j`, sorted by first node.
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::OddNodeCount(n));
        }
        let mut seen = vec![false; n];
        let mut out = Vec::with_capacity(n / 2);
        for (a, b) in pairs {
            if a == b {
                return Err(Error::InvalidMatching(format!("self-pair ({a},{b})")));
            }
            for v in [a, b] {
                if v == 0 || v > n {
                    return Err(Error::InvalidMatching(format!("node {v} outside 1..={n}")));
                }
                if seen[v - 1] {
                    return Err(Error::InvalidMatching(format!("node {v} appears twice")));
                }
                seen[v - 1] = true;
            }
            out.push((a.min(b), a.max(b)));
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidMatching(format!("node {} is unmatched", missing + 1)));
        }
        out.sort_unstable();
        Ok(Self { n, pairs: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Pairs as 1-based `(i, j)` with `i < j`, ordered by `i`.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.pairs.binary_search(&key).is_ok()
    }

    /// Index of the pair containing the edge `(i, j)`.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.pairs.binary_search(&key).ok()
    }
}

impl fmt::Display for Matching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, j) in &self.pairs {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{i}-{j}")?;
            first = false;
        }
        Ok(())
    }
}

/// An ordered family of matchings on a common node set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Family {
    n: usize,
    matchings: Vec<Matching>,
}

impl Family {
    pub fn new(n: usize, matchings: Vec<Matching>) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::OddNodeCount(n));
        }
        if let Some(m) = matchings.iter().find(|m| m.n() != n) {
            return Err(Error::MismatchedNodeCount(n, m.n()));
        }
        Ok(Self { n, matchings })
    }

    /// Builds a family from a nonempty list, taking `n` from its members.
    pub fn from_matchings(matchings: Vec<Matching>) -> Result<Self> {
        let n = matchings.first().ok_or(Error::EmptyFamily)?.n();
        Self::new(n, matchings)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.matchings.len()
    }

    pub fn matchings(&self) -> &[Matching] {
        &self.matchings
    }

    /// Serializes to the plain-text family format: a header line `n k`
    /// followed by one line of `i-j` pairs per matching.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.k());
        for m in &self.matchings {
            s.push_str(&m.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header `n k`".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line,
                msg: format!("expected an integer, found `{s}`"),
            })
        };
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: hline,
                msg: "header must be `n k`".into(),
            });
        }
        let n = parse_usize(fields[0], hline)?;
        let k = parse_usize(fields[1], hline)?;
        let mut matchings = Vec::with_capacity(k);
        for (line, body) in lines.by_ref().take(k) {
            let mut pairs = Vec::new();
            for tok in body.split_whitespace() {
                let (a, b) = tok.split_once('-').ok_or(Error::Parse {
                    line,
                    msg: format!("pair `{tok}` is not of the form i-j"),
                })?;
                pairs.push((parse_usize(a, line)?, parse_usize(b, line)?));
            }
            let m = Matching::new(n, pairs).map_err(|e| Error::Parse {
                line,
                msg: e.to_string(),
            })?;
            matchings.push(m);
        }
        if matchings.len() != k {
            return Err(Error::Parse {
                line: hline,
                msg: format!("header declares {k} matchings, found {}", matchings.len()),
            });
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse {
                line,
                msg: "unexpected trailing content".into(),
            });
        }
        Self::new(n, matchings)
    }
}

/// All perfect matchings of `[n]`, in lexicographic order of their sorted
/// pair lists.
pub fn enumerate_matchings(n: usize) -> Result<Vec<Matching>> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::OddNodeCount(n));
    }
    if n > MAX_ENUMERATION_N {
        return Err(Error::NodeCountOutOfRange {
            n,
            max: MAX_ENUMERATION_N,
        });
    }
    fn recurse(
        n: usize,
        used: &mut [bool],
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Matching>,
    ) {
        let Some(first) = used.iter().position(|u| !u) else {
            out.push(Matching {
                n,
                pairs: current.clone(),
            });
            return;
        };
        used[first] = true;
        for other in first + 1..n {
            if used[other] {
                continue;
            }
            used[other] = true;
            current.push((first + 1, other + 1));
            recurse(n, used, current, out);
            current.pop();
            used[other] = false;
        }
        used[first] = false;
    }
    let mut out = Vec::new();
    recurse(n, &mut vec![false; n], &mut Vec::new(), &mut out);
    Ok(out)
}

/// An edge of the joint graph, labeled by the index of its source matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledEdge {
    pub i: usize,
    pub j: usize,
    pub label: usize,
}

/// Multigraph union of a family of matchings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointGraph {
    n: usize,
    labels: usize,
    edges: Vec<LabeledEdge>,
}

impl JointGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct labels (the family size).
    pub fn label_count(&self) -> usize {
        self.labels
    }

    pub fn edges(&self) -> &[LabeledEdge] {
        &self.edges
    }

    /// Whether an edge `(i, j)` with the given label exists.
    pub fn has_edge(&self, i: usize, j: usize, label: usize) -> bool {
        self.edges
            .iter()
            .any(|e| e.label == label && ((e.i, e.j) == (i, j) || (e.i, e.j) == (j, i)))
    }

    /// 0-based adjacency: `(neighbour, label)` in edge order.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.i - 1].push((e.j - 1, e.label));
            adj[e.j - 1].push((e.i - 1, e.label));
        }
        adj
    }
}

pub fn join(family: &[Matching]) -> Result<JointGraph> {
    let n = family.first().ok_or(Error::EmptyFamily)?.n();
    if let Some(m) = family.iter().find(|m| m.n() != n) {
        return Err(Error::MismatchedNodeCount(n, m.n()));
    }
    if family.len() > MAX_LABELS {
        return Err(Error::Unsupported {
            name: "family size",
            value: family.len(),
            min: 1,
            max: MAX_LABELS,
        });
    }
    let edges = family
        .iter()
        .enumerate()
        .flat_map(|(label, m)| m.pairs().iter().map(move |&(i, j)| LabeledEdge { i, j, label }))
        .collect();
    Ok(JointGraph {
        n,
        labels: family.len(),
        edges,
    })
}

/// A closed walk whose edges carry pairwise-distinct matching labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleWitness {
    /// 1-based nodes; the first equals the last.
    pub nodes: Vec<usize>,
    /// `labels[t]` is the 0-based matching index of the edge
    /// `nodes[t] - nodes[t + 1]`.
    pub labels: Vec<usize>,
}

impl CycleWitness {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Replays the walk against `g`.
    pub fn verify(&self, g: &JointGraph) -> bool {
        if self.nodes.len() != self.labels.len() + 1 || self.labels.len() < 2 {
            return false;
        }
        if self.nodes.first() != self.nodes.last() {
            return false;
        }
        let distinct: HashSet<_> = self.labels.iter().collect();
        if distinct.len() != self.labels.len() {
            return false;
        }
        self.nodes
            .windows(2)
            .zip(&self.labels)
            .all(|(w, &l)| g.has_edge(w[0], w[1], l))
    }
}

impl fmt::Display for CycleWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nodes[0])?;
        for (node, label) in self.nodes[1..].iter().zip(&self.labels) {
            write!(f, " -[M{}]- {node}", label + 1)?;
        }
        Ok(())
    }
}

/// Exhaustive search for a cycle with pairwise-distinct labels.
///
/// Any closed trail with distinct labels contains such a simple cycle, so
/// the search runs over trails and memoizes dead `(node, used labels)`
/// states. Cycles are rooted at an endpoint of their smallest-label edge,
/// which is traversed first.
pub fn find_distinct_label_cycle(g: &JointGraph) -> Option<CycleWitness> {
    let adj = g.adjacency();
    for start in 0..g.n {
        let mut dead: HashSet<(usize, u64)> = HashSet::new();
        for &(next, l0) in &adj[start] {
            let mut trail = vec![(start, l0), (next, usize::MAX)];
            if trail_search(&adj, start, next, 1u64 << l0, &mut trail, &mut dead) {
                return Some(simple_cycle(&trail));
            }
        }
    }
    None
}

/// Extends `trail` (ending at `node`) back to `start`; on success the last
/// trail entry is `start`.
fn trail_search(
    adj: &[Vec<(usize, usize)>],
    start: usize,
    node: usize,
    used: u64,
    trail: &mut Vec<(usize, usize)>,
    dead: &mut HashSet<(usize, u64)>,
) -> bool {
    if dead.contains(&(node, used)) {
        return false;
    }
    // labels below the lowest used one are reserved for other roots
    let lowest = used.trailing_zeros() as usize;
    for &(next, label) in &adj[node] {
        if label <= lowest || used & (1u64 << label) != 0 {
            continue;
        }
        trail.last_mut().unwrap().1 = label;
        if next == start {
            trail.push((start, usize::MAX));
            return true;
        }
        trail.push((next, usize::MAX));
        if trail_search(adj, start, next, used | (1u64 << label), trail, dead) {
            return true;
        }
        trail.pop();
    }
    dead.insert((node, used));
    false
}

/// Cuts the first simple cycle out of a closed trail of `(node, out_label)`.
fn simple_cycle(trail: &[(usize, usize)]) -> CycleWitness {
    let mut first_seen = vec![usize::MAX; trail.iter().map(|t| t.0).max().unwrap_or(0) + 1];
    for (pos, &(node, _)) in trail.iter().enumerate() {
        let prev = first_seen[node];
        if prev != usize::MAX {
            let segment = &trail[prev..=pos];
            return CycleWitness {
                nodes: segment.iter().map(|t| t.0 + 1).collect(),
                labels: segment[..segment.len() - 1].iter().map(|t| t.1).collect(),
            };
        }
        first_seen[node] = pos;
    }
    unreachable!("closed trail always repeats a node")
}

/// Outcome of an independence check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Independence {
    pub independent: bool,
    pub witness: Option<CycleWitness>,
}

/// Certifies (in)dependence of a family. For `n <= 8` and `k <= 3` the
/// verdict is cross-checked against the GF(2) rank of the parity
/// constraints of every joint answer.
pub fn is_independent(family: &[Matching]) -> Result<Independence> {
    if family.len() <= 1 {
        return Ok(Independence {
            independent: true,
            witness: None,
        });
    }
    let g = join(family)?;
    let witness = find_distinct_label_cycle(&g);
    let independent = witness.is_none();
    if g.n() <= 8 && family.len() <= 3 && parity_rank_full(family) != independent {
        return Err(Error::CrossCheckFailed);
    }
    Ok(Independence {
        independent,
        witness,
    })
}

/// Whether every joint answer's parity constraints have full rank `k`.
fn parity_rank_full(family: &[Matching]) -> bool {
    let k = family.len();
    let sizes: Vec<usize> = family.iter().map(|m| m.pairs().len()).collect();
    let mut choice = vec![0usize; k];
    loop {
        let rows: Vec<u64> = family
            .iter()
            .zip(&choice)
            .map(|(m, &c)| {
                let (i, j) = m.pairs()[c];
                gf2::edge_row(i - 1, j - 1)
            })
            .collect();
        if gf2::rank(&rows) != k {
            return false;
        }
        // odometer, last matching fastest
        let mut pos = k;
        loop {
            if pos == 0 {
                return true;
            }
            pos -= 1;
            choice[pos] += 1;
            if choice[pos] < sizes[pos] {
                break;
            }
            choice[pos] = 0;
        }
    }
}

/// Doubles an independent family: each matching is copied onto nodes
/// `n+1..=2n` and the matching `{(i, i+n)}` is appended.
pub fn double(family: &Family) -> Result<Family> {
    if family.k() == 0 {
        return Err(Error::EmptyFamily);
    }
    let check = is_independent(family.matchings())?;
    if let Some(w) = check.witness {
        return Err(Error::DependentFamily(format!("cycle {w}")));
    }
    Ok(double_unchecked(family))
}

fn double_unchecked(family: &Family) -> Family {
    let n = family.n();
    let mut out: Vec<Matching> = family
        .matchings()
        .iter()
        .map(|m| {
            let mut pairs = m.pairs().to_vec();
            pairs.extend(m.pairs().iter().map(|&(i, j)| (i + n, j + n)));
            pairs.sort_unstable();
            Matching { n: 2 * n, pairs }
        })
        .collect();
    out.push(Matching {
        n: 2 * n,
        pairs: (1..=n).map(|i| (i, i + n)).collect(),
    });
    Family {
        n: 2 * n,
        matchings: out,
    }
}

fn check_k(k: usize, min: usize) -> Result<()> {
    if k < min || k > MAX_CONSTRUCTION_K {
        return Err(Error::Unsupported {
            name: "k",
            value: k,
            min,
            max: MAX_CONSTRUCTION_K,
        });
    }
    Ok(())
}

/// `k` independent matchings on `n = 2^k` nodes; matching `j` pairs each
/// node with the node at distance `2^(j-1)`.
pub fn canonical_family(k: usize) -> Result<Family> {
    check_k(k, 1)?;
    let n = 1usize << k;
    let matchings = (0..k)
        .map(|j| {
            let bit = 1usize << j;
            let pairs = (0..n).filter(|i| i & bit == 0).map(|i| (i + 1, (i ^ bit) + 1)).collect();
            Matching { n, pairs }
        })
        .collect();
    Ok(Family { n, matchings })
}

/// The three-matching base family on six nodes.
pub fn sextet_base() -> Family {
    let m = |pairs: [(usize, usize); 3]| Matching::new(6, pairs).expect("static matching");
    Family {
        n: 6,
        matchings: vec![
            m([(1, 2), (3, 4), (5, 6)]),
            m([(1, 6), (2, 3), (4, 5)]),
            m([(1, 4), (2, 5), (3, 6)]),
        ],
    }
}

/// `k` independent matchings on `n = 3 * 2^(k-2)` nodes, grown from
/// [`sextet_base`] by repeated doubling.
pub fn sextet_family(k: usize) -> Result<Family> {
    check_k(k, 3)?;
    let mut family = sextet_base();
    for _ in 3..k {
        family = double_unchecked(&family);
    }
    Ok(family)
}
