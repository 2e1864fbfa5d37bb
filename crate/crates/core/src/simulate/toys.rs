use crate::error::{Error, Result};
use crate::ode::{integrate_real_piecewise, OdeOptions};
use crate::signals::ControlSignal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyModel {
    /// `x1' = u, x2' = x1² + x1³`.
    Tm1,
    /// `x1' = u, x2' = x1, x3' = x2² + x1³`.
    Sussmann,
    /// `x1' = u, x2' = x1, x3' = x2, x4' = x3² + x1² x2, x5' = x4`.
    Tm3,
}

impl ToyModel {
    pub fn dim(self) -> usize {
        match self {
            ToyModel::Tm1 => 2,
            ToyModel::Sussmann => 3,
            ToyModel::Tm3 => 5,
        }
    }

    fn rhs(self, u: f64, x: &[f64], dx: &mut [f64]) {
        match self {
            ToyModel::Tm1 => {
                dx[0] = u;
                dx[1] = x[0] * x[0] + x[0] * x[0] * x[0];
            }
            ToyModel::Sussmann => {
                dx[0] = u;
                dx[1] = x[0];
                dx[2] = x[1] * x[1] + x[0] * x[0] * x[0];
            }
            ToyModel::Tm3 => {
                dx[0] = u;
                dx[1] = x[0];
                dx[2] = x[1];
                dx[3] = x[2] * x[2] + x[0] * x[0] * x[1];
                dx[4] = x[3];
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToyOutcome {
    pub model: ToyModel,
    pub horizon: f64,
    /// x(T) from rest.
    pub state: Vec<f64>,
    /// For TM3: `(x4(T), x5(T))` from the primitive formulas.
    pub closed_form: Option<[f64; 2]>,
    pub closed_form_gap: f64,
}

/// Integrates a polynomial toy model from 0; for TM3 the fourth and fifth components are also
/// evaluated from the primitives of u and must agree with the integrator.
pub fn simulate_toy(model: ToyModel, u: &ControlSignal, opts: &OdeOptions) -> Result<ToyOutcome> {
    let mut knots = u.feature_points();
    if knots.first() != Some(&0.0) {
        knots.insert(0, 0.0);
    }
    let state = integrate_real_piecewise(
        |t, x, dx| model.rhs(u.eval(t), x, dx),
        &knots,
        &vec![0.0; model.dim()],
        opts,
    )?;
    let (closed_form, gap) = if model == ToyModel::Tm3 {
        let horizon = u.horizon;
        let x4 = u.integrate(|_, r| r[3] * r[3] + r[1] * r[1] * r[2]);
        let x5 = u.integrate(|t, r| (horizon - t) * (r[3] * r[3] + r[1] * r[1] * r[2]));
        let gap = (x4 - state[3]).abs().max((x5 - state[4]).abs());
        let scale = 1.0 + x4.abs() + x5.abs();
        let tol = (1e3 * opts.rtol).max(1e-10) * scale;
        if gap > tol {
            return Err(Error::Inconsistency {
                what: "TM3 closed form vs integrator".into(),
                discrepancy: gap,
                tolerance: tol,
            });
        }
        (Some([x4, x5]), gap)
    } else {
        (None, 0.0)
    };
    Ok(ToyOutcome {
        model,
        horizon: u.horizon,
        state,
        closed_form,
        closed_form_gap: gap,
    })
}
