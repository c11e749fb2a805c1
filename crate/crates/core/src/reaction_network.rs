//! The single-step two-patch reaction scheme.
//!
//! Each patch carries a linear birth (`mu`), a binary cooperative birth
//! (`lambda`), a linear death (`gamma`) and a ternary competition death
//! (`tau`). Individuals move between the patches at the symmetric dispersal
//! rate `d`. Dispersal conserves the total population: one individual leaves
//! patch `i` and arrives in patch `j`.
//!
//! The state space is truncated at `n_max` individuals per patch. A move whose
//! target falls outside `[0, n_max]^2` is dropped, so births and inbound
//! dispersal are blocked at the boundary.

use serde::Serialize;

use crate::error::{Error, Result};

/// Binary birth rate under the matching scheme.
pub const MATCHED_LAMBDA: f64 = 4.0;
/// Linear death rate under the matching scheme.
pub const MATCHED_GAMMA: f64 = 1.0;
/// Ternary competition rate under the matching scheme.
pub const MATCHED_TAU: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Patch {
    One,
    Two,
}

impl Patch {
    pub const BOTH: [Patch; 2] = [Patch::One, Patch::Two];

    pub fn index(self) -> usize {
        match self {
            Patch::One => 0,
            Patch::Two => 1,
        }
    }

    pub fn other(self) -> Patch {
        match self {
            Patch::One => Patch::Two,
            Patch::Two => Patch::One,
        }
    }
}

/// Microscopic rates of the two-patch chain plus its truncation size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StochasticRates {
    pub mu1: f64,
    pub mu2: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub tau: f64,
    pub d: f64,
    pub n_max: usize,
}

impl StochasticRates {
    pub fn new(
        mu1: f64,
        mu2: f64,
        lambda: f64,
        gamma: f64,
        tau: f64,
        d: f64,
        n_max: usize,
    ) -> Result<Self> {
        for (field, value) in [
            ("mu1", mu1),
            ("mu2", mu2),
            ("lambda", lambda),
            ("gamma", gamma),
            ("tau", tau),
            ("d", d),
        ] {
            check_rate(field, value)?;
        }
        if n_max < 1 {
            return Err(Error::validation("n_max", "must be at least 1"));
        }
        Ok(StochasticRates {
            mu1,
            mu2,
            lambda,
            gamma,
            tau,
            d,
            n_max,
        })
    }

    pub fn mu(&self, patch: Patch) -> f64 {
        match patch {
            Patch::One => self.mu1,
            Patch::Two => self.mu2,
        }
    }

    /// Rates with the two patches exchanged.
    pub fn swapped(&self) -> Self {
        StochasticRates {
            mu1: self.mu2,
            mu2: self.mu1,
            ..*self
        }
    }

    /// Recovered habitabilities `(beta1, beta2)` under the matching scheme.
    pub fn betas(&self) -> (f64, f64) {
        (self.mu1, self.mu2)
    }
}

fn check_rate(field: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::validation(field, format!("must be finite, got {value}")));
    }
    if value < 0.0 {
        return Err(Error::validation(field, format!("must be non-negative, got {value}")));
    }
    Ok(())
}

/// Maps habitabilities and dispersal onto the microscopic rates
/// (`mu_i = beta_i`, `lambda = 4`, `gamma = 1`, `tau = 6`, `d = D`).
pub fn build_rates(beta1: f64, beta2: f64, dispersal: f64, n_max: usize) -> Result<StochasticRates> {
    check_rate("beta1", beta1)?;
    check_rate("beta2", beta2)?;
    check_rate("D", dispersal)?;
    StochasticRates::new(
        beta1,
        beta2,
        MATCHED_LAMBDA,
        MATCHED_GAMMA,
        MATCHED_TAU,
        dispersal,
        n_max,
    )
}

/// Dimensionless description of the rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MacroParams {
    /// Typical population scale before extinction.
    pub n_tilde: f64,
    pub delta_sq_1: f64,
    pub delta_sq_2: f64,
    pub r0_1: f64,
    pub r0_2: f64,
}

impl MacroParams {
    pub fn delta_sq(&self, patch: Patch) -> f64 {
        match patch {
            Patch::One => self.delta_sq_1,
            Patch::Two => self.delta_sq_2,
        }
    }

    pub fn r0(&self, patch: Patch) -> f64 {
        match patch {
            Patch::One => self.r0_1,
            Patch::Two => self.r0_2,
        }
    }
}

pub fn macro_params(rates: &StochasticRates) -> Result<MacroParams> {
    if rates.lambda == 0.0 {
        return Err(Error::Domain("lambda = 0: n_tilde and delta are undefined".into()));
    }
    if rates.tau == 0.0 {
        return Err(Error::Domain("tau = 0: n_tilde is undefined".into()));
    }
    let loss = rates.gamma + rates.d;
    if loss == 0.0 {
        return Err(Error::Domain("gamma + d = 0: R0 is undefined".into()));
    }
    let delta_sq = |mu: f64| 1.0 + 8.0 * rates.tau * (mu - loss) / (3.0 * rates.lambda * rates.lambda);
    Ok(MacroParams {
        n_tilde: 3.0 * rates.lambda / (2.0 * rates.tau),
        delta_sq_1: delta_sq(rates.mu1),
        delta_sq_2: delta_sq(rates.mu2),
        r0_1: rates.mu1 / loss,
        r0_2: rates.mu2 / loss,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AlleeKind {
    WeakAllee,
    StrongAllee,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PatchRegime {
    pub kind: AlleeKind,
    /// `D < beta < D + 1`, the window in which the mean field is bistable.
    pub bistable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Regime {
    pub patches: [PatchRegime; 2],
}

impl Regime {
    pub fn patch(&self, patch: Patch) -> PatchRegime {
        self.patches[patch.index()]
    }

    pub fn all_bistable(&self) -> bool {
        self.patches.iter().all(|p| p.bistable)
    }
}

pub fn classify_regime(rates: &StochasticRates) -> Regime {
    let loss = rates.gamma + rates.d;
    let classify = |mu: f64| {
        let kind = if mu > loss {
            AlleeKind::WeakAllee
        } else if mu < loss {
            AlleeKind::StrongAllee
        } else {
            AlleeKind::Degenerate
        };
        PatchRegime {
            kind,
            bistable: rates.d < mu && mu < rates.d + 1.0,
        }
    };
    Regime {
        patches: [classify(rates.mu1), classify(rates.mu2)],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum MoveKind {
    Birth(Patch),
    Death(Patch),
    /// Dispersal out of the given patch into the other one.
    Dispersal(Patch),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Move {
    pub kind: MoveKind,
    pub delta: (i32, i32),
    pub rate: f64,
}

impl Move {
    /// Applies the increment to `state`; the caller guarantees the result is in range.
    pub fn apply(&self, state: (usize, usize)) -> (usize, usize) {
        (
            (state.0 as i64 + self.delta.0 as i64) as usize,
            (state.1 as i64 + self.delta.1 as i64) as usize,
        )
    }
}

fn unit(patch: Patch, sign: i32) -> (i32, i32) {
    match patch {
        Patch::One => (sign, 0),
        Patch::Two => (0, sign),
    }
}

/// Birth propensity, linear plus binary: `mu n + (lambda / 2) n (n - 1)`.
pub fn birth_rate(mu: f64, lambda: f64, n: usize) -> f64 {
    let n = n as f64;
    mu * n + 0.5 * lambda * n * (n - 1.0)
}

/// Death propensity, linear plus ternary: `gamma n + (tau / 6) n (n - 1) (n - 2)`.
pub fn death_rate(gamma: f64, tau: f64, n: usize) -> f64 {
    let n = n as f64;
    gamma * n + tau / 6.0 * n * (n - 1.0) * (n - 2.0)
}

/// Visits every non-zero move out of `state` without allocating. The state is
/// assumed in range.
pub(crate) fn for_each_move(state: (usize, usize), rates: &StochasticRates, mut f: impl FnMut(Move)) {
    let n_max = rates.n_max;
    let counts = [state.0, state.1];
    for patch in Patch::BOTH {
        let n = counts[patch.index()];
        let target_n = counts[patch.other().index()];
        if n < n_max {
            let rate = birth_rate(rates.mu(patch), rates.lambda, n);
            if rate > 0.0 {
                f(Move {
                    kind: MoveKind::Birth(patch),
                    delta: unit(patch, 1),
                    rate,
                });
            }
        }
        if n > 0 {
            let rate = death_rate(rates.gamma, rates.tau, n);
            if rate > 0.0 {
                f(Move {
                    kind: MoveKind::Death(patch),
                    delta: unit(patch, -1),
                    rate,
                });
            }
        }
        if n > 0 && target_n < n_max {
            let rate = rates.d * n as f64;
            if rate > 0.0 {
                let out = unit(patch, -1);
                let inn = unit(patch.other(), 1);
                f(Move {
                    kind: MoveKind::Dispersal(patch),
                    delta: (out.0 + inn.0, out.1 + inn.1),
                    rate,
                });
            }
        }
    }
}

/// All moves with positive propensity out of `state`.
pub fn propensities(state: (usize, usize), rates: &StochasticRates) -> Result<Vec<Move>> {
    if state.0 > rates.n_max || state.1 > rates.n_max {
        return Err(Error::Bounds {
            what: "state",
            detail: format!("{state:?} outside [0, {}]^2", rates.n_max),
        });
    }
    let mut moves = Vec::with_capacity(6);
    for_each_move(state, rates, |m| moves.push(m));
    Ok(moves)
}

/// Sum of all propensities out of `state`.
pub fn total_exit_rate(state: (usize, usize), rates: &StochasticRates) -> f64 {
    let mut total = 0.0;
    for_each_move(state, rates, |m| total += m.rate);
    total
}
