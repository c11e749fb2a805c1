//! Deterministic skeleton of the chain.
//!
//! Per patch, `d rho / dt = (mu - gamma - d) rho + (lambda / 2) rho^2 - (tau / 6) rho^3`.
//! The coupled pair adds the dispersal exchange `d (rho_j - rho_i)` on top of
//! the per-patch drift.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::reaction_network::{Patch, StochasticRates};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanFieldModel {
    pub linear_coef: [f64; 2],
    pub quad_coef: f64,
    pub cubic_coef: f64,
    pub dispersal: f64,
    /// `(k1, k2)` per patch, `None` when the roots are complex.
    pub roots: [Option<(f64, f64)>; 2],
}

impl MeanFieldModel {
    pub fn from_rates(rates: &StochasticRates) -> Self {
        let linear = |mu: f64| mu - rates.gamma - rates.d;
        let linear_coef = [linear(rates.mu1), linear(rates.mu2)];
        let roots = linear_coef.map(|lin| nontrivial_roots(rates.lambda, rates.tau, lin));
        MeanFieldModel {
            linear_coef,
            quad_coef: rates.lambda / 2.0,
            cubic_coef: rates.tau / 6.0,
            dispersal: rates.d,
            roots,
        }
    }

    fn drift_unchecked(&self, rho: f64, patch: Patch) -> f64 {
        let a = self.linear_coef[patch.index()];
        rho * (a + rho * (self.quad_coef - self.cubic_coef * rho))
    }

    fn drift_slope(&self, rho: f64, patch: Patch) -> f64 {
        let a = self.linear_coef[patch.index()];
        a + 2.0 * self.quad_coef * rho - 3.0 * self.cubic_coef * rho * rho
    }

    fn coupled(&self, rho: [f64; 2]) -> [f64; 2] {
        [
            self.drift_unchecked(rho[0], Patch::One) + self.dispersal * (rho[1] - rho[0]),
            self.drift_unchecked(rho[1], Patch::Two) + self.dispersal * (rho[0] - rho[1]),
        ]
    }
}

/// Roots of `lin + (lambda/2) rho - (tau/6) rho^2 = 0`, ordered `k1 <= k2`.
fn nontrivial_roots(lambda: f64, tau: f64, lin: f64) -> Option<(f64, f64)> {
    if tau == 0.0 {
        return None;
    }
    let disc = lambda * lambda + 8.0 * tau * lin / 3.0;
    if disc < 0.0 {
        return None;
    }
    let scale = 3.0 / (2.0 * tau);
    let s = disc.sqrt();
    Some((scale * (lambda - s), scale * (lambda + s)))
}

pub fn drift(rho: f64, patch: Patch, model: &MeanFieldModel) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("mean abundance must be non-negative, got {rho}")));
    }
    Ok(model.drift_unchecked(rho, patch))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stability {
    Stable,
    Unstable,
    /// Zero slope: saddle-node or transcritical coincidence.
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Equilibrium {
    pub rho: f64,
    pub stability: Stability,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Equilibria {
    /// Non-negative equilibria in increasing order, extinction first.
    pub points: Vec<Equilibrium>,
    pub no_real_roots: bool,
}

impl Equilibria {
    pub fn rhos(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rho).collect()
    }
}

pub fn equilibria(model: &MeanFieldModel, patch: Patch) -> Equilibria {
    let label = |rho: f64| {
        let slope = model.drift_slope(rho, patch);
        if slope.abs() <= 1e-12 {
            Stability::Marginal
        } else if slope < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    };
    let mut points = vec![Equilibrium {
        rho: 0.0,
        stability: label(0.0),
    }];
    let roots = model.roots[patch.index()];
    if let Some((k1, k2)) = roots {
        // negative roots have no population meaning; k1 = 0 is kept as the transcritical boundary
        for k in [k1, k2] {
            if k >= -1e-15 {
                let rho = k.max(0.0);
                points.push(Equilibrium {
                    rho,
                    stability: label(rho),
                });
            }
        }
    }
    Equilibria {
        points,
        no_real_roots: roots.is_none(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    /// Set when a step produced a negative component that was clamped to zero.
    pub clamped: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> [f64; 2] {
        *self.states.last().expect("trajectory holds at least the initial state")
    }
}

/// Classical fixed-step RK4 of the coupled pair.
pub fn integrate(rho0: [f64; 2], rates: &StochasticRates, t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::validation("dt", format!("must be positive, got {dt}")));
    }
    if !(t_end >= 0.0) {
        return Err(Error::validation("t_end", format!("must be non-negative, got {t_end}")));
    }
    if !(rho0[0] >= 0.0 && rho0[1] >= 0.0) {
        return Err(Error::validation("rho0", format!("components must be non-negative, got {rho0:?}")));
    }
    let model = MeanFieldModel::from_rates(rates);
    let steps = (t_end / dt).round() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut clamped = false;
    let mut y = rho0;
    times.push(0.0);
    states.push(y);
    let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
    for step in 1..=steps {
        let k1 = model.coupled(y);
        let k2 = model.coupled(add(y, k1, dt / 2.0));
        let k3 = model.coupled(add(y, k2, dt / 2.0));
        let k4 = model.coupled(add(y, k3, dt));
        for i in 0..2 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if y[i] < 0.0 {
                y[i] = 0.0;
                clamped = true;
            }
        }
        times.push(step as f64 * dt);
        states.push(y);
    }
    Ok(Trajectory { times, states, clamped })
}
