//! Control and its primitives tabulated on a grid fine enough for a given oscillation frequency.

use crate::quadrature::CellGrid;
use crate::signals::{ControlSignal, CELL_ORDER};

#[derive(Debug, Clone)]
pub struct SampledControl {
    pub grid: CellGrid,
    /// `prim[n][i]` is u_n at node i (u_0 = u).
    pub prim: [Vec<f64>; 4],
    /// `edge_prim[n][e]` is u_n at edge e, n ≥ 1; row 0 holds u at the edges.
    pub edge_prim: [Vec<f64>; 4],
}

impl SampledControl {
    /// Refines the control's own grid so no cell is wider than `h_max` and every point of
    /// `extra` is an edge.
    pub fn new(u: &ControlSignal, h_max: f64, extra: &[f64]) -> Self {
        let mut cuts: Vec<f64> = u.edges().to_vec();
        cuts.extend(extra.iter().copied().filter(|&t| t > 0.0 && t < u.horizon));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let mut edges = vec![cuts[0]];
        for w in cuts.windows(2) {
            let n = ((w[1] - w[0]) / h_max).ceil().max(1.0) as usize;
            for i in 1..=n {
                edges.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
            }
        }
        let grid = CellGrid::new(edges, CELL_ORDER);
        let u0: Vec<f64> = grid.nodes.iter().map(|&t| u.eval(t)).collect();
        let e0: Vec<f64> = grid.edges.iter().map(|&t| u.eval(t)).collect();
        let mut prim: [Vec<f64>; 4] = Default::default();
        let mut edge_prim: [Vec<f64>; 4] = Default::default();
        prim[0] = u0;
        edge_prim[0] = e0;
        for n in 1..4 {
            let (run, at) = grid.running_integral(&prim[n - 1], 0.0);
            prim[n] = run;
            edge_prim[n] = std::iter::once(0.0).chain(at).collect();
        }
        Self {
            grid,
            prim,
            edge_prim,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.grid.nodes
    }

    pub fn len(&self) -> usize {
        self.grid.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.nodes.is_empty()
    }

    /// Index of the edge closest to t.
    pub fn edge_index(&self, t: f64) -> usize {
        let e = &self.grid.edges;
        let i = e.partition_point(|&x| x < t);
        if i == 0 {
            0
        } else if i == e.len() || (t - e[i - 1]).abs() <= (e[i] - t).abs() {
            i - 1
        } else {
            i
        }
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.edges.last().unwrap()
    }
}
