//! Group graph of assist relations and the system utility built on it.

use super::assignment::{Assignment, Order};
use super::reward::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Pending,
    Completed,
    Failed,
    SelfLoop,
}

/// Directed graph with an edge from every non-waiting agent to its target.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupGraph {
    edges: Vec<Option<(usize, EdgeKind)>>,
}

impl GroupGraph {
    pub fn new(edges: Vec<Option<(usize, EdgeKind)>>) -> Self {
        Self { edges }
    }

    pub fn from_assignment(assignment: &Assignment, outcomes: &[Outcome]) -> Self {
        let edges = (0..assignment.agents())
            .map(|i| match assignment.order(i) {
                Order::Wait => None,
                Order::Independent => Some((i, EdgeKind::SelfLoop)),
                Order::Assist(k) => Some((
                    k,
                    match outcomes.get(i) {
                        Some(Outcome::Successful) => EdgeKind::Completed,
                        Some(Outcome::Fail) => EdgeKind::Failed,
                        _ => EdgeKind::Pending,
                    },
                )),
            })
            .collect();
        Self { edges }
    }

    pub fn nodes(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, node: usize) -> Option<(usize, EdgeKind)> {
        self.edges[node]
    }

    /// Weakly connected components, each sorted, ordered by smallest member.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let n = self.edges.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut root = x;
            while parent[root] != root {
                root = parent[root];
            }
            let mut cur = x;
            while parent[cur] != root {
                let next = parent[cur];
                parent[cur] = root;
                cur = next;
            }
            root
        }
        for (a, e) in self.edges.iter().enumerate() {
            if let Some((b, _)) = e {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, *b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut index_of_root = vec![usize::MAX; n];
        for x in 0..n {
            let r = find(&mut parent, x);
            if index_of_root[r] == usize::MAX {
                index_of_root[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[index_of_root[r]].push(x);
        }
        groups
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityReport {
    /// `(members, U(g))` per group.
    pub groups: Vec<(Vec<usize>, f64)>,
    /// `sum_g U(g) / |X|`.
    pub expected: f64,
}

/// `U(g) = sum_{x in g} (u(x) + c(x, x'))` with `u(x) = -loss(x)`;
/// `contributions[x]` is `c(x, x')`, the loss reduction x delivered to its
/// target this tick (0 without a completed assist).
pub fn utility_report(graph: &GroupGraph, losses: &[f64], contributions: &[f64]) -> UtilityReport {
    let groups: Vec<(Vec<usize>, f64)> = graph
        .groups()
        .into_iter()
        .map(|g| {
            let u = g.iter().map(|x| -losses[*x] + contributions[*x]).sum();
            (g, u)
        })
        .collect();
    let total: f64 = groups.iter().map(|(_, u)| u).sum();
    UtilityReport {
        expected: total / graph.nodes().max(1) as f64,
        groups,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_collaboration_is_mean_negative_loss() {
        let g = GroupGraph::from_assignment(&Assignment::independent(2), &[Outcome::Independent; 2]);
        let r = utility_report(&g, &[0.1, 0.3], &[0.0, 0.0]);
        assert!((r.expected + 0.2).abs() < 1e-15);
        assert_eq!(r.groups.len(), 2);
    }

    #[test]
    fn components_are_weak() {
        // 0 -> 1, 2 -> 1, 3 waits.
        let a = Assignment::new(vec![2, 2, 2, 0]).unwrap();
        let g = GroupGraph::from_assignment(&a, &[Outcome::Approaching, Outcome::Independent, Outcome::Successful, Outcome::Waiting]);
        assert_eq!(g.groups(), vec![vec![0, 1, 2], vec![3]]);
        assert_eq!(g.edge(2), Some((1, EdgeKind::Completed)));
        assert_eq!(g.edge(3), None);
    }
}
