use super::term::Term;
use crate::quadrature::{CellGrid, GaussRule};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Nodes per cell of the primitive grid.
pub const CELL_ORDER: usize = 16;
/// Default number of cells per unit time (16 nodes each, so 4096 nodes per unit time).
pub const CELLS_PER_UNIT: usize = 256;
/// Highest iterated primitive that is cached.
pub const MAX_PRIMITIVE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    Zero,
    Constant { value: f64 },
    /// `amplitude · cos(ω t + phase)` in absolute time.
    Cosine { amplitude: f64, omega: f64, phase: f64 },
    Smooth { terms: Vec<Term> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub piece: Piece,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    BumpFamily {
        family: String,
        b: f64,
        amplitude_exponent: f64,
        time_exponent: f64,
    },
    MomentSolution,
    Concatenation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SignalSpec {
    horizon: f64,
    segments: Vec<Segment>,
    provenance: Provenance,
}

/// Real control on [0, T] built from analytic pieces, with cached iterated primitives.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "SignalSpec", into = "SignalSpec")]
pub struct ControlSignal {
    pub horizon: f64,
    pub segments: Vec<Segment>,
    pub provenance: Provenance,
    grid: CellGrid,
    /// `[u, u_1, .., u_4]` at every grid node.
    node_table: Vec<[f64; MAX_PRIMITIVE + 1]>,
    /// `[u_1, .., u_4]` at every cell edge (index 0 is t = 0).
    edge_table: Vec<[f64; MAX_PRIMITIVE]>,
}

impl From<SignalSpec> for ControlSignal {
    fn from(s: SignalSpec) -> Self {
        ControlSignal::from_segments(s.horizon, s.segments, s.provenance)
    }
}

impl From<ControlSignal> for SignalSpec {
    fn from(c: ControlSignal) -> Self {
        SignalSpec {
            horizon: c.horizon,
            segments: c.segments,
            provenance: c.provenance,
        }
    }
}

impl PartialEq for ControlSignal {
    fn eq(&self, other: &Self) -> bool {
        self.horizon == other.horizon && self.segments == other.segments
    }
}

fn cell_rule() -> &'static GaussRule {
    static R: OnceLock<GaussRule> = OnceLock::new();
    R.get_or_init(|| GaussRule::new(CELL_ORDER))
}

fn piece_deriv(piece: &Piece, t: f64, k: usize) -> f64 {
    match piece {
        Piece::Zero => 0.0,
        Piece::Constant { value } => {
            if k == 0 {
                *value
            } else {
                0.0
            }
        }
        Piece::Cosine {
            amplitude,
            omega,
            phase,
        } => {
            amplitude
                * omega.powi(k as i32)
                * (omega * t + phase + k as f64 * std::f64::consts::FRAC_PI_2).cos()
        }
        Piece::Smooth { terms } => terms.iter().map(|tm| tm.deriv(t, k)).sum(),
    }
}

fn build_edges(horizon: f64, segments: &[Segment]) -> Vec<f64> {
    let base = 1.0 / CELLS_PER_UNIT as f64;
    let mut edges = vec![0.0];
    for seg in segments {
        let mut cuts = vec![seg.start, seg.end];
        let mut fine = base;
        let mut supports = Vec::new();
        if let Piece::Smooth { terms } = &seg.piece {
            for tm in terms {
                let (l, r) = tm.support();
                for x in [l, r, tm.envelope.center] {
                    if x > seg.start && x < seg.end {
                        cuts.push(x);
                    }
                }
                let wmax = tm.trig.iter().fold(0.0f64, |m, tr| m.max(tr.omega.abs()));
                if wmax > 0.0 {
                    fine = fine.min(2.0 * std::f64::consts::PI / wmax);
                }
                supports.push((l, r, tm.envelope.half_width / 8.0));
            }
        }
        if let Piece::Cosine { omega, .. } = &seg.piece {
            if *omega != 0.0 {
                fine = fine.min(2.0 * std::f64::consts::PI / omega.abs());
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let mut h = fine;
            for &(l, r, hs) in &supports {
                if mid > l && mid < r {
                    h = h.min(hs);
                }
            }
            let n = (((b - a) / h).ceil() as usize).max(2);
            for i in 1..=n {
                edges.push(a + (b - a) * i as f64 / n as f64);
            }
        }
    }
    if let Some(last) = edges.last_mut() {
        *last = horizon;
    }
    edges
}

impl ControlSignal {
    pub fn from_segments(horizon: f64, segments: Vec<Segment>, provenance: Provenance) -> Self {
        assert!(horizon > 0.0, "control horizon must be positive");
        let segments = if segments.is_empty() {
            vec![Segment {
                start: 0.0,
                end: horizon,
                piece: Piece::Zero,
            }]
        } else {
            segments
        };
        let edges = build_edges(horizon, &segments);
        let grid = CellGrid::new(edges, CELL_ORDER);
        let mut sig = ControlSignal {
            horizon,
            segments,
            provenance,
            grid,
            node_table: Vec::new(),
            edge_table: Vec::new(),
        };
        sig.build_tables();
        sig
    }

    fn build_tables(&mut self) {
        let n = self.grid.nodes.len();
        let mut node_table = vec![[0.0; MAX_PRIMITIVE + 1]; n];
        let mut edge_table = vec![[0.0; MAX_PRIMITIVE]; self.grid.cells() + 1];
        let mut current: Vec<f64> = self.grid.nodes.iter().map(|&t| self.eval(t)).collect();
        for (row, v) in node_table.iter_mut().zip(&current) {
            row[0] = *v;
        }
        for order in 1..=MAX_PRIMITIVE {
            let (run, at_edges) = self.grid.running_integral(&current, 0.0);
            for (row, v) in node_table.iter_mut().zip(&run) {
                row[order] = *v;
            }
            for (e, v) in at_edges.iter().enumerate() {
                edge_table[e + 1][order - 1] = *v;
            }
            current = run;
        }
        self.node_table = node_table;
        self.edge_table = edge_table;
    }

    pub fn zero(horizon: f64) -> Self {
        Self::from_segments(horizon, Vec::new(), Provenance::Analytic)
    }

    pub fn constant(horizon: f64, value: f64) -> Self {
        Self::single(horizon, Piece::Constant { value })
    }

    pub fn cosine(horizon: f64, amplitude: f64, omega: f64, phase: f64) -> Self {
        Self::single(
            horizon,
            Piece::Cosine {
                amplitude,
                omega,
                phase,
            },
        )
    }

    pub fn from_terms(horizon: f64, terms: Vec<Term>, provenance: Provenance) -> Self {
        Self::from_segments(
            horizon,
            vec![Segment {
                start: 0.0,
                end: horizon,
                piece: Piece::Smooth { terms },
            }],
            provenance,
        )
    }

    fn single(horizon: f64, piece: Piece) -> Self {
        Self::from_segments(
            horizon,
            vec![Segment {
                start: 0.0,
                end: horizon,
                piece,
            }],
            Provenance::Analytic,
        )
    }

    fn segment_at(&self, t: f64) -> Option<&Segment> {
        if t < 0.0 || t > self.horizon {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.end <= t);
        self.segments.get(idx.min(self.segments.len() - 1))
    }

    /// u(t); zero outside [0, T].
    pub fn eval(&self, t: f64) -> f64 {
        self.deriv(t, 0)
    }

    /// k-th derivative of u at t.
    pub fn deriv(&self, t: f64, k: usize) -> f64 {
        match self.segment_at(t) {
            Some(seg) => piece_deriv(&seg.piece, t, k),
            None => 0.0,
        }
    }

    /// Iterated primitive u_n(t) (u_0 = u), exact up to Gauss quadrature on one cell.
    pub fn primitive_at(&self, n: usize, t: f64) -> f64 {
        assert!(n <= MAX_PRIMITIVE);
        if n == 0 {
            return self.eval(t);
        }
        let t = t.clamp(0.0, self.horizon);
        let edges = &self.grid.edges;
        let k = edges.partition_point(|&e| e <= t).saturating_sub(1).min(edges.len() - 2);
        let tk = edges[k];
        let dt = t - tk;
        let mut acc = 0.0;
        let mut fact = 1.0;
        let mut pw = 1.0;
        for m in 0..n {
            if m > 0 {
                fact *= m as f64;
                pw *= dt;
            }
            acc += self.edge_table[k][n - m - 1] * pw / fact;
        }
        if dt > 0.0 {
            let nf: f64 = (1..n).map(|i| i as f64).product();
            acc += cell_rule().integrate(tk, t, |s| (t - s).powi(n as i32 - 1) / nf * self.eval(s));
        }
        acc
    }

    /// u_n(T).
    pub fn primitive_end(&self, n: usize) -> f64 {
        if n == 0 {
            return self.eval(self.horizon);
        }
        self.edge_table.last().unwrap()[n - 1]
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    /// `[u, u_1, .., u_4]` at the grid nodes.
    pub fn node_table(&self) -> &[[f64; MAX_PRIMITIVE + 1]] {
        &self.node_table
    }

    /// ∫_0^T f(t, [u, u_1..u_4]) dt on the primitive grid.
    pub fn integrate<F: Fn(f64, &[f64; MAX_PRIMITIVE + 1]) -> f64>(&self, f: F) -> f64 {
        self.grid
            .nodes
            .iter()
            .zip(&self.grid.weights)
            .zip(&self.node_table)
            .map(|((&t, &w), row)| w * f(t, row))
            .sum()
    }

    /// Breakpoints between segments, plus 0 and T.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.segments.iter().map(|s| s.end));
        b
    }

    pub fn scaled(&self, s: f64) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|seg| Segment {
                start: seg.start,
                end: seg.end,
                piece: match &seg.piece {
                    Piece::Zero => Piece::Zero,
                    Piece::Constant { value } => Piece::Constant { value: value * s },
                    Piece::Cosine {
                        amplitude,
                        omega,
                        phase,
                    } => Piece::Cosine {
                        amplitude: amplitude * s,
                        omega: *omega,
                        phase: *phase,
                    },
                    Piece::Smooth { terms } => Piece::Smooth {
                        terms: terms
                            .iter()
                            .map(|t| {
                                let mut t = t.clone();
                                t.amplitude *= s;
                                t
                            })
                            .collect(),
                    },
                },
            })
            .collect();
        Self::from_segments(self.horizon, segments, self.provenance.clone())
    }

    /// `u # v`: u on (0, T_u), v shifted to (T_u, T_u + T_v).
    pub fn concatenate(&self, v: &ControlSignal) -> Self {
        let shift = self.horizon;
        let mut segments = self.segments.clone();
        for seg in &v.segments {
            let piece = match &seg.piece {
                Piece::Cosine {
                    amplitude,
                    omega,
                    phase,
                } => Piece::Cosine {
                    amplitude: *amplitude,
                    omega: *omega,
                    phase: phase - omega * shift,
                },
                Piece::Smooth { terms } => Piece::Smooth {
                    terms: terms.iter().map(|t| t.shifted(shift)).collect(),
                },
                other => other.clone(),
            };
            segments.push(Segment {
                start: seg.start + shift,
                end: seg.end + shift,
                piece,
            });
        }
        Self::from_segments(shift + v.horizon, segments, Provenance::Concatenation)
    }

    /// Segment breaks plus every term's support ends and centre, sorted; integrators restart here
    /// so adaptive steps never jump over a bump.
    pub fn feature_points(&self) -> Vec<f64> {
        let mut pts = self.breakpoints();
        for seg in &self.segments {
            if let Piece::Smooth { terms } = &seg.piece {
                for tm in terms {
                    let (l, r) = tm.support();
                    pts.extend([l, r, tm.envelope.center]);
                }
            }
        }
        pts.retain(|&t| (0.0..=self.horizon).contains(&t));
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        pts
    }

    /// Cell edges of the primitive grid.
    pub fn edges(&self) -> &[f64] {
        &self.grid.edges
    }

    /// Rows `(t, u, u_1, u_2, u_3)` on a uniform grid with `per_unit` steps per unit time.
    pub fn samples(&self, per_unit: usize) -> Vec<[f64; 5]> {
        let m = ((self.horizon * per_unit as f64).round() as usize).max(1);
        (0..=m)
            .map(|i| {
                let t = self.horizon * i as f64 / m as f64;
                [
                    t,
                    self.eval(t),
                    self.primitive_at(1, t),
                    self.primitive_at(2, t),
                    self.primitive_at(3, t),
                ]
            })
            .collect()
    }

    pub fn to_csv(&self, per_unit: usize) -> String {
        let mut s = String::from("t,u,u1,u2,u3\n");
        for r in self.samples(per_unit) {
            s.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", r[0], r[1], r[2], r[3], r[4]));
        }
        s
    }
}
