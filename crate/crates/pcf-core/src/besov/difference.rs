use serde::{Deserialize, Serialize};

use crate::approximation::{Fractal, Function};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffKind {
    /// D_m on all edges of the cell graph.
    Cell,
    /// D̃_m on edges joining cells with a common parent.
    RefinedCell,
    /// ∇_m on the edges of the vertex graph.
    Vertex,
}

/// Differences across edges, oriented from the smaller index to the
/// larger: A_a − A_b or f(x) − f(y).
#[derive(Clone, Debug, Serialize)]
pub struct DifferenceField {
    pub kind: DiffKind,
    pub level: usize,
    pub edges: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

impl DifferenceField {
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

pub fn difference_field(fr: &Fractal, f: &Function, m: usize, kind: DiffKind) -> Result<DifferenceField> {
    let edges: Vec<(usize, usize)>;
    let values: Vec<f64>;
    match kind {
        DiffKind::Cell | DiffKind::RefinedCell => {
            if m > f.level() {
                return Err(Error::arg(format!("cell differences at level {m} need a function of level >= {m}")));
            }
            let cells = fr.cell_approx(m)?;
            let a = f.averages(fr, m)?;
            edges = cells
                .edges
                .iter()
                .filter(|e| kind == DiffKind::Cell || e.refined)
                .map(|e| (e.a, e.b))
                .collect();
            values = edges.iter().map(|&(x, y)| a[x] - a[y]).collect();
        }
        DiffKind::Vertex => {
            let v = f.as_vertex().ok_or_else(|| Error::arg("vertex differences need vertex values"))?;
            let g = if v.level >= m { fr.restrict(v, m)? } else { fr.extend(v, m)? };
            let approx = fr.try_vertex_approx(m)?;
            edges = approx.edges.iter().map(|&(x, y, _)| (x, y)).collect();
            values = edges.iter().map(|&(x, y)| g.values[x] - g.values[y]).collect();
        }
    }
    Ok(DifferenceField { kind, level: m, edges, values })
}
