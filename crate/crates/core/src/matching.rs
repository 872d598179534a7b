//! Backtracking subgraph isomorphism in the VF2 style.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Pattern edges must map to target edges.
    Monomorphism,
    /// Additionally, pattern non-edges must map to target non-edges.
    Induced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    pub mode: MatchMode,
    pub respect_labels: bool,
    /// Compare edge labels when both graphs carry them.
    pub edge_labels: bool,
    pub timeout: Option<Duration>,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            mode: MatchMode::Monomorphism,
            respect_labels: true,
            edge_labels: true,
            timeout: Some(Duration::from_secs(10)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchOutcome {
    Yes,
    No,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedOut;

/// Pattern visiting order: at each step the node with the most links to
/// already-ordered nodes, then the highest degree, then the smallest index.
fn pattern_order(p: &Graph) -> Vec<usize> {
    let n = p.num_nodes();
    let mut placed = vec![false; n];
    let mut links = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let next = (0..n)
            .filter(|&v| !placed[v])
            .max_by(|&a, &b| {
                links[a]
                    .cmp(&links[b])
                    .then(p.degree(a).cmp(&p.degree(b)))
                    .then(b.cmp(&a))
            })
            .expect("unplaced node remains");
        placed[next] = true;
        order.push(next);
        for w in p.neighbors(next) {
            links[w] += 1;
        }
    }
    order
}

struct Matcher<'a> {
    p: &'a Graph,
    t: &'a Graph,
    opts: MatchOptions,
    order: Vec<usize>,
    /// pattern node -> target node
    map: Vec<usize>,
    used: Vec<bool>,
    target_by_degree: Vec<usize>,
    use_edge_labels: bool,
    deadline: Option<Instant>,
    steps: u64,
}

const UNMAPPED: usize = usize::MAX;

impl<'a> Matcher<'a> {
    fn new(p: &'a Graph, t: &'a Graph, opts: MatchOptions) -> Self {
        let mut target_by_degree: Vec<usize> = (0..t.num_nodes()).collect();
        target_by_degree.sort_by(|&a, &b| t.degree(b).cmp(&t.degree(a)).then(a.cmp(&b)));
        Matcher {
            p,
            t,
            opts,
            order: pattern_order(p),
            map: vec![UNMAPPED; p.num_nodes()],
            used: vec![false; t.num_nodes()],
            target_by_degree,
            use_edge_labels: opts.respect_labels
                && opts.edge_labels
                && p.edge_labels().is_some()
                && t.edge_labels().is_some(),
            deadline: opts.timeout.map(|d| Instant::now() + d),
            steps: 0,
        }
    }

    fn feasible(&self, u: usize, x: usize) -> bool {
        if self.used[x] || self.t.degree(x) < self.p.degree(u) {
            return false;
        }
        if self.opts.respect_labels
            && self.p.node_labels().is_some()
            && self.p.node_label(u) != self.t.node_label(x)
        {
            return false;
        }
        for &(w, e) in self.p.incident(u) {
            let y = self.map[w];
            if y == UNMAPPED {
                continue;
            }
            match self.t.edge_between(x, y) {
                None => return false,
                Some(f) => {
                    if self.use_edge_labels && self.p.edge_label(e) != self.t.edge_label(f) {
                        return false;
                    }
                }
            }
        }
        if self.opts.mode == MatchMode::Induced {
            for &(y, _) in self.t.incident(x) {
                if let Some(w) = self.map.iter().position(|&m| m == y) {
                    if !self.p.has_edge(u, w) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn candidates(&self, u: usize) -> Vec<usize> {
        let anchor = self
            .p
            .neighbors(u)
            .filter(|&w| self.map[w] != UNMAPPED)
            .min_by_key(|&w| self.t.degree(self.map[w]));
        match anchor {
            Some(w) => {
                let mut c: Vec<usize> = self.t.neighbors(self.map[w]).collect();
                c.sort_by(|&a, &b| self.t.degree(b).cmp(&self.t.degree(a)).then(a.cmp(&b)));
                c
            }
            None => self.target_by_degree.clone(),
        }
    }

    fn tick(&mut self) -> Result<(), TimedOut> {
        self.steps += 1;
        if self.steps % 256 == 1 {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    return Err(TimedOut);
                }
            }
        }
        Ok(())
    }

    /// Depth-first extension; `visit` returns `true` to stop the search.
    fn extend(
        &mut self,
        depth: usize,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> Result<bool, TimedOut> {
        if depth == self.order.len() {
            return Ok(visit(&self.map));
        }
        let u = self.order[depth];
        for x in self.candidates(u) {
            self.tick()?;
            if !self.feasible(u, x) {
                continue;
            }
            self.map[u] = x;
            self.used[x] = true;
            let stop = self.extend(depth + 1, visit)?;
            self.map[u] = UNMAPPED;
            self.used[x] = false;
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

pub fn subgraph_isomorphic(pattern: &Graph, target: &Graph, opts: &MatchOptions) -> MatchOutcome {
    if pattern.num_nodes() > target.num_nodes() || pattern.num_edges() > target.num_edges() {
        return MatchOutcome::No;
    }
    let mut m = Matcher::new(pattern, target, *opts);
    match m.extend(0, &mut |_| true) {
        Ok(true) => MatchOutcome::Yes,
        Ok(false) => MatchOutcome::No,
        Err(TimedOut) => MatchOutcome::Timeout,
    }
}

/// Every embedding of `pattern` into `target` as (anchor image, node map),
/// keeping one map per distinct (anchor image, image set).
pub fn find_anchored_matches(
    pattern: &Graph,
    anchor: usize,
    target: &Graph,
    opts: &MatchOptions,
) -> Result<Vec<(usize, Vec<usize>)>, TimedOut> {
    if pattern.num_nodes() > target.num_nodes() {
        return Ok(Vec::new());
    }
    let mut m = Matcher::new(pattern, target, *opts);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    m.extend(0, &mut |map| {
        let mut image = map.to_vec();
        image.sort_unstable();
        if seen.insert((map[anchor], image)) {
            out.push((map[anchor], map.to_vec()));
        }
        false
    })?;
    out.sort();
    Ok(out)
}
