//! Variable dependence graph and its condensation.
//!
//! Depth is measured from the *top*: an SCC that no other SCC depends on has
//! depth 0, and the depth of S is the length of the longest path from a top
//! SCC down to S. Bottom SCCs therefore have the largest depth, and the
//! decomposed Newton schedule walks depths from `height` down to 0.

use std::collections::BTreeSet;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::msp::Msp;

/// Edge `X_i -> X_k` iff some monomial of `f_i` contains `X_k`.
///
/// With positive coefficients this is exactly "the partial derivative of f_i
/// by X_k is not the zero polynomial".
pub fn dependence_graph(f: &Msp) -> DiGraph<usize, ()> {
    let mut g = DiGraph::with_capacity(f.dim(), 0);
    let nodes: Vec<NodeIndex> = (0..f.dim()).map(|i| g.add_node(i)).collect();
    for (i, p) in f.equations().iter().enumerate() {
        let targets: BTreeSet<usize> = p.terms().iter().flat_map(|m| m.exps.iter().map(|&(v, _)| v)).collect();
        for k in targets {
            g.add_edge(nodes[i], nodes[k], ());
        }
    }
    g
}

/// Condensation of the dependence graph with depths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SccDag {
    /// Sorted variable sets, ordered by smallest member.
    pub sccs: Vec<Vec<usize>>,
    /// SCC index of every variable.
    pub scc_of: Vec<usize>,
    /// Depth per SCC.
    pub depth: Vec<usize>,
    /// `(s, t)`: some variable of SCC s depends directly on one of SCC t.
    pub edges: BTreeSet<(usize, usize)>,
    pub height: usize,
    pub width: usize,
}

impl SccDag {
    pub fn build(f: &Msp) -> SccDag {
        let g = dependence_graph(f);
        let mut sccs: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut vars: Vec<usize> = c.into_iter().map(|n| g[n]).collect();
                vars.sort_unstable();
                vars
            })
            .collect();
        sccs.sort_by_key(|c| c[0]);

        let mut scc_of = vec![0; f.dim()];
        for (s, vars) in sccs.iter().enumerate() {
            for &v in vars {
                scc_of[v] = s;
            }
        }
        let mut edges = BTreeSet::new();
        for e in g.raw_edges() {
            let (a, b) = (scc_of[g[e.source()]], scc_of[g[e.target()]]);
            if a != b {
                edges.insert((a, b));
            }
        }

        // Longest path from the top: relax in a topological order.
        let k = sccs.len();
        let mut indegree = vec![0usize; k];
        for &(_, t) in &edges {
            indegree[t] += 1;
        }
        let mut depth = vec![0usize; k];
        let mut ready: Vec<usize> = (0..k).filter(|&s| indegree[s] == 0).collect();
        while let Some(s) = ready.pop() {
            for &(_, t) in edges.range((s, 0)..(s + 1, 0)) {
                depth[t] = depth[t].max(depth[s] + 1);
                indegree[t] -= 1;
                if indegree[t] == 0 {
                    ready.push(t);
                }
            }
        }
        let height = depth.iter().copied().max().unwrap_or(0);
        let width = (0..=height)
            .map(|t| depth.iter().filter(|&&d| d == t).count())
            .max()
            .unwrap_or(0);
        SccDag {
            sccs,
            scc_of,
            depth,
            edges,
            height,
            width,
        }
    }

    /// SCC indices at depth `t`, in SCC order.
    pub fn comp(&self, t: usize) -> Vec<usize> {
        (0..self.sccs.len()).filter(|&s| self.depth[s] == t).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_mspe;

    #[test]
    fn self_loop() {
        let f = parse_mspe("X = 1/2*X*X + 1/2;").unwrap();
        let g = dependence_graph(&f);
        assert_eq!(g.edge_count(), 1);
        let dag = f.scc_dag();
        assert_eq!((dag.sccs.len(), dag.height, dag.width), (1, 0, 1));
    }

    #[test]
    fn worked_example_is_strongly_connected() {
        let f = parse_mspe("X1 = 0.4*X2*X1 + 0.6; X2 = 0.3*X1*X2 + 0.4*X3*X2 + 0.3; X3 = 0.3*X1*X3 + 0.7;").unwrap();
        let g = dependence_graph(&f);
        let mut edges: Vec<(usize, usize)> = g.raw_edges().iter().map(|e| (g[e.source()], g[e.target()])).collect();
        edges.sort();
        assert_eq!(edges, vec![(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 0), (2, 2)]);
        assert!(f.is_strongly_connected());
    }

    #[test]
    fn single_edge_two_sccs() {
        let f = parse_mspe("X1 = X2 + 1/2; X2 = 1/3;").unwrap();
        assert_eq!(dependence_graph(&f).edge_count(), 1);
        let dag = f.scc_dag();
        assert_eq!(dag.sccs, vec![vec![0], vec![1]]);
        assert_eq!(dag.depth, vec![0, 1]);
    }

    #[test]
    fn chain_depths() {
        let f = parse_mspe("X1 = 1/2*X2 + 1/2*X1*X1; X2 = 1/2*X3 + 1/2*X2*X2; X3 = 1/2*X3*X3 + 1/2;").unwrap();
        let dag = f.scc_dag();
        assert_eq!(dag.depth, vec![0, 1, 2]);
        assert_eq!((dag.height, dag.width), (2, 1));
        assert_eq!(dag.comp(2), vec![2]);
    }

    #[test]
    fn diamond_depths() {
        let f = parse_mspe("X1 = 1/4*X2 + 1/4*X3 + 1/2; X2 = 1/2*X4 + 1/2; X3 = 1/2*X4 + 1/2; X4 = 1/2;").unwrap();
        let dag = f.scc_dag();
        assert_eq!(dag.depth, vec![0, 1, 1, 2]);
        assert_eq!((dag.height, dag.width), (2, 2));
    }

    #[test]
    fn longest_path_not_shortest() {
        // X1 -> X3 directly and via X2: depth of X3 is 2.
        let f = parse_mspe("X1 = 1/4*X2 + 1/4*X3 + 1/2; X2 = 1/2*X3 + 1/2; X3 = 1/2;").unwrap();
        assert_eq!(f.scc_dag().depth, vec![0, 1, 2]);
    }
}
