use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::collections::BTreeSet;

/// Undirected adjacency between strata (0-based ids).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyGraph {
    strata: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl AdjacencyGraph {
    pub fn new(strata: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::Domain(format!("self-loop on stratum {u}")));
            }
            if u >= strata || v >= strata {
                return Err(Error::Index(format!("edge ({u}, {v}) references a stratum >= {strata}")));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(Self { strata, edges: set })
    }

    pub fn strata(&self) -> usize {
        self.strata
    }

    /// Edges as ordered pairs `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn with_edges(&self, extra: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(self.strata, self.edges.iter().copied().chain(extra))
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.strata).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(u, v) in &self.edges {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                parent[ru.max(rv)] = ru.min(rv);
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for x in 0..self.strata {
            let root = find(&mut parent, x);
            groups.entry(root).or_default().push(x);
        }
        groups.into_values().collect()
    }

    pub fn component_count(&self) -> usize {
        self.components().len()
    }
}

/// ICAR precision `Q = D - W`.
pub fn icar_precision(graph: &AdjacencyGraph) -> DMatrix<f64> {
    let n = graph.strata();
    let mut q = DMatrix::zeros(n, n);
    for (u, v) in graph.edges() {
        q[(u, v)] -= 1.0;
        q[(v, u)] -= 1.0;
        q[(u, u)] += 1.0;
        q[(v, v)] += 1.0;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_and_triangle() {
        let path = AdjacencyGraph::new(2, [(0, 1)]).unwrap();
        assert_eq!(icar_precision(&path), DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));

        let tri = AdjacencyGraph::new(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let q = icar_precision(&tri);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(q[(i, j)], if i == j { 2.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn rows_sum_to_zero() {
        let g = AdjacencyGraph::new(5, [(0, 1), (1, 2), (3, 4), (0, 2)]).unwrap();
        let q = icar_precision(&g);
        for r in 0..5 {
            assert_eq!(q.row(r).sum(), 0.0);
        }
    }

    #[test]
    fn components_are_counted() {
        let g = AdjacencyGraph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(g.components(), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(g.with_edges([(1, 2)]).unwrap().component_count(), 1);
    }

    #[test]
    fn rejects_self_loops_and_unknown_ids() {
        assert!(AdjacencyGraph::new(3, [(1, 1)]).is_err());
        assert!(AdjacencyGraph::new(3, [(1, 3)]).is_err());
    }

    #[test]
    fn duplicate_and_reversed_edges_collapse() {
        let g = AdjacencyGraph::new(3, [(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
    }
}
