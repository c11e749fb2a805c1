//! Four-state meta-model over the macrostates `HH`, `HL`, `LH`, `LL`.
//!
//! Each arc rate is the inverse MFPT of the full chain from the source
//! macrostate to the target macrostate (with extinction always absorbing).

use rayon::prelude::*;
use serde::Serialize;

use crate::ctmc::{build_generator, GeneratorMatrix};
use crate::error::{Error, Result};
use crate::fpt::{
    mfpt, region_traps, splitting_probability, Conventions, FptProblem, FptResult, InitialDistribution, Macrostate,
    SourceMode, Thresholds, TrapSpec, DEFAULT_COND_GATE,
};
use crate::reaction_network::StochasticRates;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StateLabel {
    Macro(Macrostate),
    Mixed,
}

pub fn macrostate_of(state: (usize, usize), thresholds: &Thresholds) -> StateLabel {
    Macrostate::ALL
        .into_iter()
        .find(|&m| thresholds.contains(m, state))
        .map_or(StateLabel::Mixed, StateLabel::Macro)
}

/// One directed arc of the meta-model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Arc {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
}

impl Arc {
    pub const ALL: [Arc; 8] = [Arc::R1, Arc::R2, Arc::R3, Arc::R4, Arc::R5, Arc::R6, Arc::R7, Arc::R8];
    /// Arcs of the reduced chain over `(HH, LH, LL)`.
    pub const REDUCED: [Arc; 4] = [Arc::R3, Arc::R4, Arc::R5, Arc::R6];

    pub fn endpoints(self) -> (Macrostate, Macrostate) {
        use Macrostate::*;
        match self {
            Arc::R1 => (HH, HL),
            Arc::R2 => (HL, LL),
            Arc::R3 => (LL, LH),
            Arc::R4 => (LH, HH),
            Arc::R5 => (HH, LH),
            Arc::R6 => (LH, LL),
            Arc::R7 => (LL, HL),
            Arc::R8 => (HL, HH),
        }
    }

    /// Arc obtained by exchanging the patch labels.
    pub fn mirrored(self) -> Arc {
        match self {
            Arc::R1 => Arc::R5,
            Arc::R5 => Arc::R1,
            Arc::R2 => Arc::R6,
            Arc::R6 => Arc::R2,
            Arc::R8 => Arc::R4,
            Arc::R4 => Arc::R8,
            Arc::R7 => Arc::R3,
            Arc::R3 => Arc::R7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Arc::R1 => "r1",
            Arc::R2 => "r2",
            Arc::R3 => "r3",
            Arc::R4 => "r4",
            Arc::R5 => "r5",
            Arc::R6 => "r6",
            Arc::R7 => "r7",
            Arc::R8 => "r8",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArcSolve {
    pub arc: Arc,
    pub result: FptResult,
}

impl ArcSolve {
    pub fn rate(&self) -> f64 {
        1.0 / self.result.mfpt
    }
}

/// Solves the MFPT behind one arc.
pub fn solve_arc(
    q: &GeneratorMatrix,
    arc: Arc,
    thresholds: &Thresholds,
    conventions: Conventions,
    cond_gate: f64,
) -> Result<ArcSolve> {
    let (from, to) = arc.endpoints();
    let space = q.space();
    let traps = region_traps(to, thresholds, space, conventions.trap)?;
    let p0 = match conventions.source {
        SourceMode::Point => InitialDistribution::point(space, thresholds.representative(from))?,
        SourceMode::RegionUniform => InitialDistribution::uniform(
            space,
            space
                .states()
                .filter(|&s| thresholds.contains(from, s) && !traps.contains(s)),
        )?,
    };
    let problem = FptProblem::with_distribution(q, traps, p0)
        .map_err(|e| arc_error(arc, e))?
        .gate(cond_gate);
    let result = mfpt(&problem).map_err(|e| arc_error(arc, e))?;
    Ok(ArcSolve { arc, result })
}

fn arc_error(arc: Arc, e: Error) -> Error {
    match e {
        Error::Singular { context, states } => Error::Singular {
            context: format!("arc {} ({}): {context}", arc.name(), fmt_arc(arc)),
            states,
        },
        other => other,
    }
}

fn fmt_arc(arc: Arc) -> String {
    let (a, b) = arc.endpoints();
    format!("{a}->{b}")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EmulatorRates {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
    pub r7: f64,
    pub r8: f64,
    pub cond_max: f64,
    pub gated: bool,
}

impl EmulatorRates {
    pub fn from_array(rates: [f64; 8]) -> Self {
        EmulatorRates {
            r1: rates[0],
            r2: rates[1],
            r3: rates[2],
            r4: rates[3],
            r5: rates[4],
            r6: rates[5],
            r7: rates[6],
            r8: rates[7],
            cond_max: 0.0,
            gated: false,
        }
    }

    pub fn get(&self, arc: Arc) -> f64 {
        match arc {
            Arc::R1 => self.r1,
            Arc::R2 => self.r2,
            Arc::R3 => self.r3,
            Arc::R4 => self.r4,
            Arc::R5 => self.r5,
            Arc::R6 => self.r6,
            Arc::R7 => self.r7,
            Arc::R8 => self.r8,
        }
    }
}

/// All eight arc rates at one parameter point.
pub fn emulator_rates(rates: &StochasticRates, high: usize, low: usize) -> Result<EmulatorRates> {
    emulator_rates_with(rates, &Thresholds::new(high, low, rates.n_max)?, Conventions::default(), DEFAULT_COND_GATE)
}

pub fn emulator_rates_with(
    rates: &StochasticRates,
    thresholds: &Thresholds,
    conventions: Conventions,
    cond_gate: f64,
) -> Result<EmulatorRates> {
    let q = build_generator(rates)?;
    let solves: Vec<ArcSolve> = Arc::ALL
        .par_iter()
        .map(|&arc| solve_arc(&q, arc, thresholds, conventions, cond_gate))
        .collect::<Result<_>>()?;
    let mut values = [0.0; 8];
    let mut cond_max: f64 = 0.0;
    let mut gated = false;
    for s in &solves {
        values[s.arc.slot()] = s.rate();
        cond_max = cond_max.max(s.result.cond);
        gated |= s.result.gated;
    }
    Ok(EmulatorRates {
        cond_max,
        gated,
        ..EmulatorRates::from_array(values)
    })
}

/// Exact probability of reaching `HH` before `LL` from the `LH` representative.
/// Logged beside the race estimate `r4 / (r4 + r6)`; never used in its place.
pub fn recovery_committor(q: &GeneratorMatrix, thresholds: &Thresholds) -> Result<f64> {
    let space = q.space();
    let region = |m: Macrostate| TrapSpec::exact(space, space.states().filter(|&s| thresholds.contains(m, s)));
    let hh = region(Macrostate::HH)?;
    let ll = region(Macrostate::LL)?;
    let (x, y) = thresholds.representative(Macrostate::LH);
    splitting_probability(q, &hh, &ll, space.index(x, y)?)
}

pub type Generator4 = [[f64; 4]; 4];
pub type Generator3 = [[f64; 3]; 3];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetaChain {
    pub rates: EmulatorRates,
    /// Rows and columns ordered `(HH, HL, LH, LL)`.
    pub s: Generator4,
    /// Rows and columns ordered `(HH, LH, LL)`.
    pub s_reduced: Generator3,
    /// Recovery probability `r4 / (r4 + r6)`.
    pub r: f64,
    pub odds: f64,
}

pub fn meta_chain(rates: &EmulatorRates) -> Result<MetaChain> {
    for arc in Arc::ALL {
        let v = rates.get(arc);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::validation("emulator rate", format!("{} = {v} must be positive and finite", arc.name())));
        }
    }
    let EmulatorRates {
        r1,
        r2,
        r3,
        r4,
        r5,
        r6,
        r7,
        r8,
        ..
    } = *rates;
    let s = [
        [-r1 - r5, r1, r5, 0.0],
        [r8, -r2 - r8, 0.0, r2],
        [r4, 0.0, -r4 - r6, r6],
        [0.0, r7, r3, -r3 - r7],
    ];
    let s_reduced = [[-r5, r5, 0.0], [r4, -r4 - r6, r6], [0.0, r3, -r3]];
    let r = r4 / (r4 + r6);
    Ok(MetaChain {
        rates: *rates,
        s,
        s_reduced,
        r,
        odds: odds(r),
    })
}

pub fn odds(r: f64) -> f64 {
    r / (1.0 - r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComposedTransitions {
    pub p_hh_lh: f64,
    pub mfpt_hh_lh: f64,
    pub p_hh_ll: f64,
    pub mfpt_hh_ll: f64,
    pub p_hh_hh: f64,
    pub mfpt_hh_hh: f64,
}

/// Two-step outcomes of the reduced chain started in `HH`.
pub fn composed_transitions(chain: &MetaChain) -> ComposedTransitions {
    let EmulatorRates { r4, r5, r6, .. } = chain.rates;
    ComposedTransitions {
        p_hh_lh: 1.0,
        mfpt_hh_lh: 1.0 / r5,
        p_hh_ll: r6 / (r4 + r6),
        mfpt_hh_ll: 1.0 / r5 + 1.0 / r6,
        p_hh_hh: r4 / (r4 + r6),
        mfpt_hh_hh: 1.0 / r5 + 1.0 / r4,
    }
}

/// `sum_{k=1}^{n} r^k`, whose limit is the odds `r / (1 - r)`.
pub fn cascade_partial_sums(r: f64, n_terms: usize) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("r must lie in (0, 1), got {r}")));
    }
    if n_terms < 1 {
        return Err(Error::validation("n_terms", "must be at least 1"));
    }
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..n_terms {
        term *= r;
        sum += term;
    }
    Ok(sum)
}
