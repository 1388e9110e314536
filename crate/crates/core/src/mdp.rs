//! Layered deterministic transition graphs whose rooted paths encode arms.
//!
//! An edge labelled with atom `a` means "take action `a`"; the arm of a
//! root-to-sink path is the set of its edge atoms.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Arm;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub state: usize,
    pub stage: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub atom: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionGraph {
    pub nodes: Vec<Node>,
    pub root: usize,
    pub edges: Vec<Edge>,
}

/// Maximum node count accepted for a graph over `d` atoms.
pub fn node_bound(d: usize) -> usize {
    d * d + 2
}

/// Cap on the number of near-optimal paths re-evaluated during tie-breaking.
const TIE_ENUMERATION_CAP: usize = 100_000;

impl TransitionGraph {
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.from].push((e.to, e.atom));
        }
        for out in &mut adj {
            out.sort_by_key(|&(_, a)| a);
        }
        adj
    }

    /// Nodes reachable from the root, in non-decreasing stage order.
    fn reachable_by_stage(&self, adj: &[Vec<(usize, usize)>]) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        let mut out = Vec::new();
        while let Some(u) = stack.pop() {
            out.push(u);
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        out.sort_by_key(|&u| (self.nodes[u].stage, u));
        out
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(Error::InvalidGraph("no nodes".into()));
        }
        if self.root >= n {
            return Err(Error::InvalidGraph(format!("root {} out of range", self.root)));
        }
        if self.nodes[self.root].stage != 0 {
            return Err(Error::InvalidGraph("root must be at stage 0".into()));
        }
        if n > node_bound(d) {
            return Err(Error::InvalidGraph(format!(
                "{n} nodes exceeds the bound d^2 + 2 = {}",
                node_bound(d)
            )));
        }
        let mut labels = HashMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some(j) = labels.insert(*node, i) {
                return Err(Error::InvalidGraph(format!(
                    "nodes {j} and {i} share (state {}, stage {})",
                    node.state, node.stage
                )));
            }
        }
        let mut seen = HashMap::new();
        for e in &self.edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidGraph(format!("edge {e:?} references a missing node")));
            }
            if e.atom >= d {
                return Err(Error::InvalidGraph(format!("edge atom {} >= d = {d}", e.atom)));
            }
            if self.nodes[e.to].stage != self.nodes[e.from].stage + 1 {
                return Err(Error::InvalidGraph(format!(
                    "edge {e:?} does not advance exactly one stage"
                )));
            }
            if seen.insert((e.from, e.atom), e.to).is_some() {
                return Err(Error::InvalidGraph(format!(
                    "node {} has two edges for atom {}",
                    e.from, e.atom
                )));
            }
        }
        let adj = self.adjacency();
        if adj[self.root].is_empty() {
            return Err(Error::InvalidGraph("root has no outgoing edges".into()));
        }
        // No atom may repeat along a rooted path: propagate the set of atom
        // masks that can reach each node.
        let order = self.reachable_by_stage(&adj);
        let mut masks: Vec<Vec<u64>> = vec![Vec::new(); n];
        masks[self.root].push(0);
        for &u in &order {
            let mut here = std::mem::take(&mut masks[u]);
            here.sort_unstable();
            here.dedup();
            for &(v, a) in &adj[u] {
                for &m in &here {
                    if m & (1 << a) != 0 {
                        return Err(Error::InvalidGraph(format!(
                            "atom {a} repeats on a rooted path"
                        )));
                    }
                    masks[v].push(m | (1 << a));
                }
            }
            if masks.iter().map(Vec::len).sum::<usize>() > 10_000_000 {
                return Err(Error::BudgetExceeded {
                    needed: 10_000_001,
                    budget: 10_000_000,
                });
            }
            masks[u] = here;
        }
        Ok(())
    }

    /// Number of root-to-sink paths (saturating).
    pub fn path_count(&self) -> u128 {
        let adj = self.adjacency();
        self.path_counts(&adj)[self.root]
    }

    fn path_counts(&self, adj: &[Vec<(usize, usize)>]) -> Vec<u128> {
        let order = self.reachable_by_stage(adj);
        let mut count = vec![0u128; self.nodes.len()];
        for &u in order.iter().rev() {
            count[u] = if adj[u].is_empty() {
                1
            } else {
                adj[u]
                    .iter()
                    .fold(0u128, |acc, &(v, _)| acc.saturating_add(count[v]))
            };
        }
        count
    }

    /// Arms of all root-to-sink paths, in path-enumeration order.
    pub fn paths(&self, budget: u128) -> Result<Vec<Arm>> {
        let total = self.path_count();
        if total > budget {
            return Err(Error::BudgetExceeded {
                needed: total,
                budget,
            });
        }
        let adj = self.adjacency();
        let mut out = Vec::with_capacity(total as usize);
        let mut stack = vec![(self.root, Arm::empty())];
        while let Some((u, arm)) = stack.pop() {
            if adj[u].is_empty() {
                out.push(arm);
                continue;
            }
            for &(v, a) in adj[u].iter().rev() {
                stack.push((v, arm.with(a)));
            }
        }
        Ok(out)
    }

    pub fn has_path_with_atoms(&self, arm: Arm) -> bool {
        let adj = self.adjacency();
        let mut stack = vec![(self.root, Arm::empty())];
        while let Some((u, used)) = stack.pop() {
            if adj[u].is_empty() {
                if used == arm {
                    return true;
                }
                continue;
            }
            for &(v, a) in &adj[u] {
                if arm.contains(a) && !used.contains(a) {
                    stack.push((v, used.with(a)));
                }
            }
        }
        false
    }

    pub fn atoms_on_paths(&self) -> Arm {
        let adj = self.adjacency();
        self.reachable_by_stage(&adj)
            .into_iter()
            .flat_map(|u| adj[u].iter().map(|&(_, a)| a).collect::<Vec<_>>())
            .fold(Arm::empty(), Arm::with)
    }

    /// Uniformly random root-to-sink path.
    pub fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R) -> Arm {
        let adj = self.adjacency();
        let count = self.path_counts(&adj);
        let mut u = self.root;
        let mut arm = Arm::empty();
        while !adj[u].is_empty() {
            let total = count[u] as f64;
            let mut x = rng.random::<f64>() * total;
            let mut next = *adj[u].last().unwrap();
            for &(v, a) in &adj[u] {
                let c = count[v] as f64;
                if x < c {
                    next = (v, a);
                    break;
                }
                x -= c;
            }
            arm = arm.with(next.1);
            u = next.0;
        }
        arm
    }

    /// Number of stages (the longest rooted path length).
    pub fn horizon(&self) -> usize {
        let adj = self.adjacency();
        self.reachable_by_stage(&adj)
            .into_iter()
            .map(|u| self.nodes[u].stage)
            .max()
            .unwrap_or(0)
    }

    /// Number of distinct state labels among reachable nodes.
    pub fn num_states(&self) -> usize {
        let adj = self.adjacency();
        let mut states: Vec<usize> = self
            .reachable_by_stage(&adj)
            .into_iter()
            .map(|u| self.nodes[u].state)
            .collect();
        states.sort_unstable();
        states.dedup();
        states.len()
    }

    /// Maximum-weight root-to-sink path, where an edge weighs the mean of
    /// its atom. Ties go to the lexicographically smallest arm; candidate
    /// ties are re-summed in ascending atom order so that the result agrees
    /// with a linear scan over all arms.
    pub fn best_path<T: Scalar>(&self, means: &[T]) -> Arm {
        let adj = self.adjacency();
        let order = self.reachable_by_stage(&adj);
        let mut value: Vec<Option<T>> = vec![None; self.nodes.len()];
        for &u in order.iter().rev() {
            let mut best: Option<T> = None;
            if adj[u].is_empty() {
                best = Some(T::zero());
            }
            for &(v, a) in &adj[u] {
                let cand = means[a].clone() + value[v].clone().expect("child evaluated");
                if best.as_ref().is_none_or(|b| cand > *b) {
                    best = Some(cand);
                }
            }
            value[u] = best;
        }
        let opt = value[self.root].clone().expect("root evaluated");
        let slack = T::tie_slack(&opt);
        let threshold = opt.clone() - slack.clone() - slack;

        // Branch and bound over paths whose value can reach the threshold.
        let mut candidates = Vec::new();
        let mut stack = vec![(self.root, Arm::empty(), T::zero())];
        while let Some((u, arm, acc)) = stack.pop() {
            if adj[u].is_empty() {
                candidates.push(arm);
                if candidates.len() >= TIE_ENUMERATION_CAP {
                    break;
                }
                continue;
            }
            for &(v, a) in &adj[u] {
                let acc2 = acc.clone() + means[a].clone();
                let bound = acc2.clone() + value[v].clone().unwrap();
                if bound >= threshold {
                    stack.push((v, arm.with(a), acc2));
                }
            }
        }
        let mut best: Option<(T, Arm)> = None;
        for arm in candidates {
            let s = arm
                .atoms()
                .fold(T::zero(), |acc, a| acc + means[a].clone());
            let better = match &best {
                None => true,
                Some((bv, barm)) => s > *bv || (s == *bv && arm < *barm),
            };
            if better {
                best = Some((s, arm));
            }
        }
        best.expect("at least one path").1
    }

    /// Same graph with atom `a` renamed to `new_index[a]`.
    pub fn relabeled(&self, new_index: &[usize]) -> Self {
        Self {
            nodes: self.nodes.clone(),
            root: self.root,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    atom: new_index[e.atom],
                    ..*e
                })
                .collect(),
        }
    }
}

/// Graph whose paths are exactly the `m`-subsets of `0..d`. The state of a
/// node is the largest atom included so far (`d` at the root); at stage `i`
/// only atoms that still leave room for the remaining `m - i` picks are
/// offered.
pub fn encode_m_subsets(d: usize, m: usize) -> Result<TransitionGraph> {
    if m == 0 || m > d {
        return Err(Error::BadM { m, d });
    }
    let mut nodes = vec![Node { state: d, stage: 0 }];
    let mut index = HashMap::new();
    let width = d - m + 1;
    for stage in 1..=m {
        for a in (stage - 1)..(stage - 1 + width) {
            index.insert((a, stage), nodes.len());
            nodes.push(Node { state: a, stage });
        }
    }
    let mut edges = Vec::new();
    for a in 0..width {
        edges.push(Edge {
            from: 0,
            to: index[&(a, 1)],
            atom: a,
        });
    }
    for stage in 1..m {
        for a in (stage - 1)..(stage - 1 + width) {
            for b in (a + 1)..(stage + width) {
                edges.push(Edge {
                    from: index[&(a, stage)],
                    to: index[&(b, stage + 1)],
                    atom: b,
                });
            }
        }
    }
    Ok(TransitionGraph {
        nodes,
        root: 0,
        edges,
    })
}

/// Encode an explicit family as a layered graph: build the trie of the
/// arms' ascending atom lists, then merge nodes at the same depth whose
/// sets of completions coincide.
pub fn encode_explicit(d: usize, arms: &[Arm]) -> Result<TransitionGraph> {
    if arms.is_empty() {
        return Err(Error::EmptyFamily);
    }
    // trie
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
    let mut depth = vec![0usize];
    for arm in arms {
        let mut u = 0;
        for a in arm.atoms() {
            u = match children[u].iter().find(|&&(x, _)| x == a) {
                Some(&(_, v)) => v,
                None => {
                    let v = children.len();
                    children.push(Vec::new());
                    depth.push(depth[u] + 1);
                    children[u].push((a, v));
                    v
                }
            };
        }
    }
    // canonical ids bottom-up
    let mut order: Vec<usize> = (0..children.len()).collect();
    order.sort_by_key(|&u| std::cmp::Reverse(depth[u]));
    let mut canon = vec![0usize; children.len()];
    let mut ids: HashMap<(usize, Vec<(usize, usize)>), usize> = HashMap::new();
    let mut merged: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    for &u in &order {
        let mut sig: Vec<(usize, usize)> = children[u].iter().map(|&(a, v)| (a, canon[v])).collect();
        sig.sort_unstable();
        let key = (depth[u], sig);
        canon[u] = *ids.entry(key.clone()).or_insert_with(|| {
            merged.push(key);
            merged.len() - 1
        });
    }
    if merged.len() > node_bound(d) {
        return Err(Error::NotEncodable {
            bound: node_bound(d),
        });
    }
    // renumber so that the root is node 0 and stages ascend
    let mut by_depth: Vec<usize> = (0..merged.len()).collect();
    by_depth.sort_by_key(|&i| (merged[i].0, i));
    let root_id = canon[0];
    let pos = by_depth.iter().position(|&i| i == root_id).unwrap();
    by_depth.swap(0, pos);
    let mut new_id = vec![0usize; merged.len()];
    for (k, &i) in by_depth.iter().enumerate() {
        new_id[i] = k;
    }
    let nodes = by_depth
        .iter()
        .enumerate()
        .map(|(k, &i)| Node {
            state: k,
            stage: merged[i].0,
        })
        .collect();
    let mut edges = Vec::new();
    for &i in &by_depth {
        for &(a, c) in &merged[i].1 {
            edges.push(Edge {
                from: new_id[i],
                to: new_id[c],
                atom: a,
            });
        }
    }
    let g = TransitionGraph {
        nodes,
        root: 0,
        edges,
    };
    g.validate(d)?;
    Ok(g)
}

/// Where an action leads in the augmented graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Node(usize),
    Good,
    Bad,
}

/// A transition graph made total over all atoms: infeasible actions route to
/// an absorbing BAD state (reward 0 forever), and completing a feasible path
/// moves to GOOD, which pays `H + 1` once.
#[derive(Debug, Clone)]
pub struct AugmentedGraph {
    base: TransitionGraph,
    d: usize,
    horizon: usize,
    adj: Vec<Vec<(usize, usize)>>,
}

pub fn augment_feasibility(g: &TransitionGraph, d: usize) -> Result<AugmentedGraph> {
    g.validate(d)?;
    Ok(AugmentedGraph {
        base: g.clone(),
        d,
        horizon: g.horizon(),
        adj: g.adjacency(),
    })
}

impl AugmentedGraph {
    pub fn base(&self) -> &TransitionGraph {
        &self.base
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn good_reward(&self) -> f64 {
        self.horizon as f64 + 1.0
    }

    /// Number of (node, atom) pairs routed to BAD.
    pub fn infeasible_pairs(&self) -> usize {
        let order = self.base.reachable_by_stage(&self.adj);
        order
            .iter()
            .filter(|&&u| !self.adj[u].is_empty())
            .map(|&u| self.d - self.adj[u].len())
            .sum()
    }

    pub fn step(&self, u: usize, atom: usize) -> Step {
        if self.adj[u].is_empty() {
            return Step::Good;
        }
        match self.adj[u].iter().find(|&&(_, a)| a == atom) {
            Some(&(v, _)) => Step::Node(v),
            None => Step::Bad,
        }
    }

    /// Total reward of an action sequence (one atom per stage). Returns the
    /// value and the arm if the sequence is a feasible path.
    pub fn policy_value(&self, actions: &[usize], means: &[f64]) -> (f64, Option<Arm>) {
        let mut u = self.base.root;
        let mut total = 0.0;
        let mut arm = Arm::empty();
        for &a in actions {
            match self.step(u, a) {
                Step::Node(v) => {
                    total += means[a];
                    arm = arm.with(a);
                    u = v;
                }
                Step::Bad => return (total, None),
                Step::Good => break,
            }
        }
        if self.adj[u].is_empty() {
            (total + self.good_reward(), Some(arm))
        } else {
            (total, None)
        }
    }

    /// Best policy over the augmented graph. Infeasible actions are never
    /// optimal, so this coincides with the best feasible path.
    pub fn best_policy(&self, means: &[f64]) -> Arm {
        self.base.best_path(means)
    }

    /// Every action sequence of length `H` together with its value.
    pub fn enumerate_policies(&self, means: &[f64]) -> Vec<(Vec<usize>, f64, Option<Arm>)> {
        let h = self.horizon as u32;
        let total = (self.d as u64).pow(h);
        (0..total)
            .map(|mut code| {
                let mut actions = Vec::with_capacity(h as usize);
                for _ in 0..h {
                    actions.push((code % self.d as u64) as usize);
                    code /= self.d as u64;
                }
                let (v, arm) = self.policy_value(&actions, means);
                (actions, v, arm)
            })
            .collect()
    }
}
