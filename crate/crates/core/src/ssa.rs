//! Gillespie direct-method sampling of first-passage times.
//!
//! Sample `i` draws from its own ChaCha stream (`seed`, stream `i`), so the
//! sample sequence is the same however the samples are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ctmc::build_generator;
use crate::error::{Error, Result};
use crate::fpt::{mfpt, FptProblem, TrapSpec};
use crate::reaction_network::{for_each_move, Move, StochasticRates};

pub const DEFAULT_CAP: f64 = 1e6;
/// Disagreement threshold in standard errors.
pub const Z_LIMIT: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SsaRun {
    pub seed: u64,
    /// Maximum simulated time per sample.
    pub cap: f64,
    pub samples: usize,
}

impl SsaRun {
    pub fn new(seed: u64, cap: f64, samples: usize) -> Result<Self> {
        if !(cap > 0.0) {
            return Err(Error::validation("cap", format!("must be positive, got {cap}")));
        }
        if samples < 1 {
            return Err(Error::validation("samples", "must be at least 1"));
        }
        Ok(SsaRun { seed, cap, samples })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Outcome {
    Hit(f64),
    Censored,
    Stuck,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FptSampleSet {
    pub hits: Vec<f64>,
    /// Samples that ran past the cap or got stuck outside the trap set.
    pub censored: usize,
    /// Subset of `censored` with zero total propensity.
    pub stuck: usize,
    pub mean: Option<f64>,
    /// `None` with fewer than two hits.
    pub std_error: Option<f64>,
}

impl FptSampleSet {
    fn from_outcomes(outcomes: &[Outcome]) -> Self {
        let hits: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| match o {
                Outcome::Hit(t) => Some(*t),
                _ => None,
            })
            .collect();
        let stuck = outcomes.iter().filter(|o| matches!(o, Outcome::Stuck)).count();
        let censored = outcomes.len() - hits.len();
        let n = hits.len() as f64;
        let mean = (!hits.is_empty()).then(|| hits.iter().sum::<f64>() / n);
        let std_error = match mean {
            Some(m) if hits.len() >= 2 => {
                let var = hits.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / (n - 1.0);
                Some((var / n).sqrt())
            }
            _ => None,
        };
        FptSampleSet {
            hits,
            censored,
            stuck,
            mean,
            std_error,
        }
    }

    pub fn total(&self) -> usize {
        self.hits.len() + self.censored
    }
}

fn simulate(
    rates: &StochasticRates,
    source: (usize, usize),
    traps: &TrapSpec,
    cap: f64,
    rng: &mut ChaCha8Rng,
    mut visit: impl FnMut(f64, (usize, usize)),
) -> Outcome {
    let mut state = source;
    let mut t = 0.0;
    let mut moves: [Option<Move>; 6] = [None; 6];
    loop {
        visit(t, state);
        if traps.contains(state) {
            return Outcome::Hit(t);
        }
        let mut count = 0;
        let mut total = 0.0;
        for_each_move(state, rates, |m| {
            moves[count] = Some(m);
            count += 1;
            total += m.rate;
        });
        if count == 0 {
            return Outcome::Stuck;
        }
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / total;
        if t > cap {
            return Outcome::Censored;
        }
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = moves[count - 1].expect("filled");
        for m in moves[..count].iter().flatten() {
            if pick < m.rate {
                chosen = *m;
                break;
            }
            pick -= m.rate;
        }
        state = chosen.apply(state);
    }
}

pub fn sample_fpt(
    rates: &StochasticRates,
    source: (usize, usize),
    traps: &TrapSpec,
    run: &SsaRun,
) -> Result<FptSampleSet> {
    if source.0 > rates.n_max || source.1 > rates.n_max {
        return Err(Error::Bounds {
            what: "source",
            detail: format!("{source:?} outside [0, {}]^2", rates.n_max),
        });
    }
    if traps.contains(source) {
        return Err(Error::validation("source", format!("source {source:?} lies in the trap set")));
    }
    let outcomes: Vec<Outcome> = (0..run.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
            rng.set_stream(i as u64);
            simulate(rates, source, traps, run.cap, &mut rng, |_, _| {})
        })
        .collect();
    Ok(FptSampleSet::from_outcomes(&outcomes))
}

/// Jump times and visited states of sample `index` of `run`, ending at the
/// first trap state, the cap or a stuck state.
pub fn sample_path(
    rates: &StochasticRates,
    source: (usize, usize),
    traps: &TrapSpec,
    run: &SsaRun,
    index: u64,
) -> Vec<(f64, (usize, usize))> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    rng.set_stream(index);
    let mut path = Vec::new();
    simulate(rates, source, traps, run.cap, &mut rng, |t, s| path.push((t, s)));
    path
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgreementReport {
    pub solver_mfpt: f64,
    pub solver_cond: f64,
    pub solver_gated: bool,
    pub samples: usize,
    pub hits: usize,
    pub censored: usize,
    pub stuck: usize,
    pub censored_fraction: f64,
    pub ssa_mean: Option<f64>,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    /// More than half the samples censored, or too few hits for a z-score.
    pub inconclusive: bool,
    /// `|z| > 3`.
    pub disagrees: bool,
}

pub fn compare_with_solver(
    rates: &StochasticRates,
    source: (usize, usize),
    traps: &TrapSpec,
    run: &SsaRun,
) -> Result<AgreementReport> {
    let q = build_generator(rates)?;
    let space = q.space();
    let solved = mfpt(&FptProblem::new(&q, traps.clone(), space.index(source.0, source.1)?)?)?;
    let set = sample_fpt(rates, source, traps, run)?;
    let censored_fraction = set.censored as f64 / set.total() as f64;
    let z = match (set.mean, set.std_error) {
        (Some(m), Some(se)) if censored_fraction <= 0.5 => {
            if se > 0.0 {
                Some((m - solved.mfpt) / se)
            } else {
                Some(if m == solved.mfpt { 0.0 } else { f64::INFINITY })
            }
        }
        _ => None,
    };
    Ok(AgreementReport {
        solver_mfpt: solved.mfpt,
        solver_cond: solved.cond,
        solver_gated: solved.gated,
        samples: set.total(),
        hits: set.hits.len(),
        censored: set.censored,
        stuck: set.stuck,
        censored_fraction,
        ssa_mean: set.mean,
        std_error: set.std_error,
        inconclusive: z.is_none(),
        disagrees: z.is_some_and(|z| z.abs() > Z_LIMIT),
        z,
    })
}
