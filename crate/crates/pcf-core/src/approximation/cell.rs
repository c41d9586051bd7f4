use std::collections::BTreeMap;

use serde::Serialize;

use super::vertex::VertexApprox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CellEdge {
    /// Lexicographically smaller cell.
    pub a: usize,
    pub b: usize,
    /// A vertex shared by both cells.
    pub shared: usize,
    /// Both cells lie in a common parent cell.
    pub refined: bool,
}

/// Cell graph of Λ_m: cells are adjacent when they share a vertex.
#[derive(Clone, Debug)]
pub struct CellApprox {
    pub level: usize,
    pub edges: Vec<CellEdge>,
    /// Index into Λ_{m-1} of each cell's parent.
    pub parent: Vec<usize>,
    /// Largest number of cells meeting at one vertex.
    pub overlap: usize,
}

impl CellApprox {
    pub(crate) fn build(level: usize, vertex: &VertexApprox, parent: Vec<usize>) -> Self {
        let inc = vertex.incidence();
        let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (v, cells) in inc.iter().enumerate() {
            for (i, &(a, _)) in cells.iter().enumerate() {
                for &(b, _) in &cells[i + 1..] {
                    if a != b {
                        pairs.entry((a.min(b), a.max(b))).or_insert(v);
                    }
                }
            }
        }
        let edges = pairs
            .into_iter()
            .map(|((a, b), shared)| CellEdge { a, b, shared, refined: parent[a] == parent[b] })
            .collect();
        let overlap = inc.iter().map(|cells| cells.len()).max().unwrap_or(0);
        CellApprox { level, edges, parent, overlap }
    }

    pub fn refined_edges(&self) -> impl Iterator<Item = &CellEdge> {
        self.edges.iter().filter(|e| e.refined)
    }
}
