//! Gauss–Legendre rules, composite rules on [a, b] and cumulative integration on cells.

use gauss_quad::legendre::GaussLegendre;
use std::num::NonZeroUsize;

/// Gauss–Legendre nodes and weights on [-1, 1], nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).unwrap();
        let rule = GaussLegendre::new(order);
        let mut pairs: Vec<(f64, f64)> = rule.iter().map(|&(x, w)| (x, w)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Matrix `W[i][k] = ∫_{-1}^{x_i} ℓ_k(s) ds` where ℓ_k is the Lagrange basis on the nodes.
    pub fn cumulative_matrix(&self) -> Vec<Vec<f64>> {
        let m = self.order();
        let legendre = |x: f64| -> Vec<f64> {
            let mut p = vec![0.0; m + 1];
            p[0] = 1.0;
            if m >= 1 {
                p[1] = x;
            }
            for n in 1..m {
                p[n + 1] = ((2 * n + 1) as f64 * x * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64;
            }
            p
        };
        let at_nodes: Vec<Vec<f64>> = self.nodes.iter().map(|&x| legendre(x)).collect();
        let mut w = vec![vec![0.0; m]; m];
        for i in 0..m {
            let xi = self.nodes[i];
            let pi = &at_nodes[i];
            for k in 0..m {
                let pk = &at_nodes[k];
                let mut s = 0.5 * (xi + 1.0);
                for n in 1..m {
                    s += 0.5 * pk[n] * (pi[n + 1] - pi[n - 1]);
                }
                w[i][k] = self.weights[k] * s;
            }
        }
        w
    }
}

/// Composite rule on an interval, panels split at given breakpoints.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    /// `panels` equal panels on [a, b], each with `order` nodes.
    pub fn uniform(a: f64, b: f64, order: usize, panels: usize) -> Self {
        let edges: Vec<f64> = (0..=panels)
            .map(|k| a + (b - a) * k as f64 / panels as f64)
            .collect();
        Self::from_edges(&edges, order)
    }

    /// Uniform panels refined so that every extra breakpoint is a panel edge and
    /// every segment between breakpoints carries at least `min_panels` panels.
    pub fn with_breakpoints(
        a: f64,
        b: f64,
        order: usize,
        panels: usize,
        breakpoints: &[f64],
        min_panels: usize,
    ) -> Self {
        let mut cuts: Vec<f64> = vec![a, b];
        cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        let target = (b - a) / panels as f64;
        let mut edges = vec![cuts[0]];
        for win in cuts.windows(2) {
            let len = win[1] - win[0];
            let n = ((len / target).ceil() as usize).max(min_panels).max(1);
            for k in 1..=n {
                edges.push(win[0] + len * k as f64 / n as f64);
            }
        }
        Self::from_edges(&edges, order)
    }

    pub fn from_edges(edges: &[f64], order: usize) -> Self {
        let rule = GaussRule::new(order);
        let mut nodes = Vec::with_capacity(order * edges.len());
        let mut weights = Vec::with_capacity(order * edges.len());
        for win in edges.windows(2) {
            let half = 0.5 * (win[1] - win[0]);
            let mid = 0.5 * (win[1] + win[0]);
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(mid + half * x);
                weights.push(w * half);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Cells with Gauss nodes supporting running integrals evaluated at every node.
#[derive(Debug, Clone)]
pub struct CellGrid {
    pub edges: Vec<f64>,
    pub rule: GaussRule,
    cumulative: Vec<Vec<f64>>,
    /// All nodes, cell by cell.
    pub nodes: Vec<f64>,
    /// Quadrature weights matching `nodes`.
    pub weights: Vec<f64>,
}

impl CellGrid {
    pub fn new(edges: Vec<f64>, order: usize) -> Self {
        let rule = GaussRule::new(order);
        let cumulative = rule.cumulative_matrix();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for win in edges.windows(2) {
            let half = 0.5 * (win[1] - win[0]);
            let mid = 0.5 * (win[1] + win[0]);
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(mid + half * x);
                weights.push(w * half);
            }
        }
        Self {
            edges,
            rule,
            cumulative,
            nodes,
            weights,
        }
    }

    pub fn uniform(a: f64, b: f64, cells: usize, order: usize) -> Self {
        let edges = (0..=cells)
            .map(|k| a + (b - a) * k as f64 / cells as f64)
            .collect();
        Self::new(edges, order)
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn cells(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn integral<T>(&self, values: &[T]) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::iter::Sum<T>,
    {
        values.iter().zip(&self.weights).map(|(&v, &w)| v * w).sum()
    }

    /// Running integral `∫_{a}^{t_i} f` at every node, plus the value at each right cell edge.
    pub fn running_integral<T>(&self, values: &[T], zero: T) -> (Vec<T>, Vec<T>)
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let m = self.order();
        let mut out = Vec::with_capacity(values.len());
        let mut at_edges = Vec::with_capacity(self.cells());
        let mut acc = zero;
        for (c, win) in self.edges.windows(2).enumerate() {
            let half = 0.5 * (win[1] - win[0]);
            let block = &values[c * m..(c + 1) * m];
            for i in 0..m {
                let mut s = zero;
                for k in 0..m {
                    s = s + block[k] * (self.cumulative[i][k] * half);
                }
                out.push(acc + s);
            }
            let mut total = zero;
            for k in 0..m {
                total = total + block[k] * (self.rule.weights[k] * half);
            }
            acc = acc + total;
            at_edges.push(acc);
        }
        (out, at_edges)
    }
}
