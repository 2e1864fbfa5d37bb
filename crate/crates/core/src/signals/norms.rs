use super::control::ControlSignal;

impl ControlSignal {
    fn lp_of<F: Fn(usize, f64) -> f64>(&self, f: F, p: f64) -> f64 {
        let grid = self.grid();
        if p.is_infinite() {
            let mut best = 0.0f64;
            let mut best_t = 0.0;
            for (i, &t) in grid.nodes.iter().enumerate() {
                let v = f(i, t).abs();
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
            // golden-section polish around the best node
            let h = (grid.edges[grid.edges.len() - 1] - grid.edges[0]) / grid.nodes.len() as f64;
            let (mut a, mut b) = ((best_t - 2.0 * h).max(0.0), (best_t + 2.0 * h).min(self.horizon));
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if f(usize::MAX, c).abs() > f(usize::MAX, d).abs() {
                    b = d;
                } else {
                    a = c;
                }
            }
            return best.max(f(usize::MAX, 0.5 * (a + b)).abs());
        }
        let s: f64 = grid
            .nodes
            .iter()
            .zip(&grid.weights)
            .enumerate()
            .map(|(i, (&t, &w))| w * f(i, t).abs().powf(p))
            .sum();
        s.powf(1.0 / p)
    }

    /// `‖u^(k)‖_{L^p(0,T)}`.
    pub fn derivative_lp_norm(&self, k: usize, p: f64) -> f64 {
        self.lp_of(|_, t| self.deriv(t, k), p)
    }

    /// `‖u_n‖_{L^p(0,T)}` for the n-th iterated primitive.
    pub fn primitive_lp_norm(&self, n: usize, p: f64) -> f64 {
        let table = self.node_table();
        self.lp_of(
            |i, t| {
                if i == usize::MAX {
                    self.primitive_at(n, t)
                } else {
                    table[i][n]
                }
            },
            p,
        )
    }

    /// `|u_1(T)| + ‖u_k‖_{L²}`.
    pub fn weak_norm(&self, k: usize) -> f64 {
        self.primitive_end(1).abs() + self.primitive_lp_norm(k, 2.0)
    }

    /// `(Σ_{i≤m} ‖u^(i)‖²_{L²})^{1/2}` for m ≥ 0 and the weak norm of order |m| for m < 0.
    pub fn sobolev_norm(&self, m: i32) -> f64 {
        if m < 0 {
            return self.weak_norm(m.unsigned_abs() as usize);
        }
        (0..=m as usize)
            .map(|i| self.derivative_lp_norm(i, 2.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `‖u‖_{L^∞} + ‖u'‖_{L^∞}`.
    pub fn w1_inf_norm(&self) -> f64 {
        self.derivative_lp_norm(0, f64::INFINITY) + self.derivative_lp_norm(1, f64::INFINITY)
    }
}
