//! First-passage machinery.
//!
//! A trap set is made absorbing by deleting its rows and columns from the
//! generator. On the remaining transient block `Q~`, the mean first passage
//! time from a (possibly spread) initial distribution `p0` is
//! `p0^T (-Q~)^{-1} 1`, obtained here from the single solve `-Q~ v = 1`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ctmc::{GeneratorMatrix, StateSpace};
use crate::error::{Error, Result};

/// Solves whose transient block has a 1-norm condition number above this are flagged.
pub const DEFAULT_COND_GATE: f64 = 1e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Macrostate {
    HH,
    HL,
    LH,
    LL,
}

impl Macrostate {
    pub const ALL: [Macrostate; 4] = [Macrostate::HH, Macrostate::HL, Macrostate::LH, Macrostate::LL];

    /// `(high in patch 1, high in patch 2)`.
    pub fn levels(self) -> (bool, bool) {
        match self {
            Macrostate::HH => (true, true),
            Macrostate::HL => (true, false),
            Macrostate::LH => (false, true),
            Macrostate::LL => (false, false),
        }
    }

    /// Same macrostate with the patch labels exchanged.
    pub fn mirrored(self) -> Macrostate {
        match self {
            Macrostate::HL => Macrostate::LH,
            Macrostate::LH => Macrostate::HL,
            m => m,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Macrostate::HH => "HH",
            Macrostate::HL => "HL",
            Macrostate::LH => "LH",
            Macrostate::LL => "LL",
        }
    }
}

impl fmt::Display for Macrostate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Macrostate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "HH" => Ok(Macrostate::HH),
            "HL" => Ok(Macrostate::HL),
            "LH" => Ok(Macrostate::LH),
            "LL" => Ok(Macrostate::LL),
            _ => Err(Error::validation("macrostate", format!("expected HH, HL, LH or LL, got {s:?}"))),
        }
    }
}

/// High and low abundance thresholds shared by both patches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Thresholds {
    pub high: usize,
    pub low: usize,
}

impl Thresholds {
    pub fn new(high: usize, low: usize, n_max: usize) -> Result<Self> {
        if high < 2 || high > n_max {
            return Err(Error::validation("H", format!("need 2 <= H <= N = {n_max}, got {high}")));
        }
        if low < 1 || low >= high {
            return Err(Error::validation("L", format!("need 1 <= L <= H - 1 = {}, got {low}", high - 1)));
        }
        Ok(Thresholds { high, low })
    }

    /// All `(H, L)` pairs with `2 <= H <= N` and `1 <= L < H`, ordered by `H` then `L`.
    pub fn grid(n_max: usize) -> Vec<Thresholds> {
        (2..=n_max)
            .flat_map(|high| (1..high).map(move |low| Thresholds { high, low }))
            .collect()
    }

    pub fn contains(&self, macrostate: Macrostate, state: (usize, usize)) -> bool {
        let level = |n: usize, high: bool| if high { n >= self.high } else { n <= self.low };
        let (h1, h2) = macrostate.levels();
        level(state.0, h1) && level(state.1, h2)
    }

    /// Componentwise `H` for high, `L` for low.
    pub fn representative(&self, macrostate: Macrostate) -> (usize, usize) {
        let pick = |high: bool| if high { self.high } else { self.low };
        let (h1, h2) = macrostate.levels();
        (pick(h1), pick(h2))
    }
}

/// Which states of a target macrostate are made absorbing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrapMode {
    /// Every state of the threshold region.
    #[default]
    Region,
    /// Only the representative state.
    Representative,
}

/// Support of the initial distribution `p0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceMode {
    /// Point mass on the source representative.
    #[default]
    Point,
    /// Uniform over the source region, minus any trap states.
    RegionUniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conventions {
    pub trap: TrapMode,
    pub source: SourceMode,
}

/// Absorbing states, stored as 0-based offsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrapSpec {
    space: StateSpace,
    targets: BTreeSet<usize>,
    extinction_added: bool,
}

impl TrapSpec {
    /// Exactly the given states.
    pub fn exact(space: StateSpace, states: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut targets = BTreeSet::new();
        for (x, y) in states {
            targets.insert(space.index(x, y)? - 1);
        }
        if targets.is_empty() {
            return Err(Error::validation("traps", "trap set is empty"));
        }
        Ok(TrapSpec {
            space,
            targets,
            extinction_added: false,
        })
    }

    /// The given states plus extinction `(0, 0)`.
    pub fn with_extinction(space: StateSpace, states: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut targets = BTreeSet::new();
        for (x, y) in states {
            targets.insert(space.index(x, y)? - 1);
        }
        let extinction_added = targets.insert(0);
        Ok(TrapSpec {
            space,
            targets,
            extinction_added,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn extinction_added(&self) -> bool {
        self.extinction_added
    }

    pub fn contains(&self, state: (usize, usize)) -> bool {
        state.0 <= self.space.n_max
            && state.1 <= self.space.n_max
            && self.targets.contains(&self.space.offset(state.0, state.1))
    }

    pub(crate) fn contains_offset(&self, offset: usize) -> bool {
        self.targets.contains(&offset)
    }

    /// 1-based flattened indices.
    pub fn indices(&self) -> Vec<usize> {
        self.targets.iter().map(|&o| o + 1).collect()
    }

    pub fn states(&self) -> Vec<(usize, usize)> {
        self.targets.iter().map(|&o| self.space.state_at(o)).collect()
    }

    pub fn union(&self, other: &TrapSpec) -> TrapSpec {
        TrapSpec {
            space: self.space,
            targets: self.targets.union(&other.targets).copied().collect(),
            extinction_added: self.extinction_added || other.extinction_added,
        }
    }
}

/// The threshold region of `macrostate`, with extinction appended.
pub fn trap_states(macrostate: Macrostate, high: usize, low: usize, n_max: usize) -> Result<TrapSpec> {
    let thresholds = Thresholds::new(high, low, n_max)?;
    region_traps(macrostate, &thresholds, StateSpace::new(n_max)?, TrapMode::Region)
}

pub fn region_traps(
    macrostate: Macrostate,
    thresholds: &Thresholds,
    space: StateSpace,
    mode: TrapMode,
) -> Result<TrapSpec> {
    match mode {
        TrapMode::Region => TrapSpec::with_extinction(
            space,
            space.states().filter(|&s| thresholds.contains(macrostate, s)),
        ),
        TrapMode::Representative => TrapSpec::with_extinction(space, [thresholds.representative(macrostate)]),
    }
}

/// Initial distribution as `(0-based offset, weight)` pairs summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDistribution {
    weights: Vec<(usize, f64)>,
}

impl InitialDistribution {
    pub fn point(space: StateSpace, state: (usize, usize)) -> Result<Self> {
        Ok(InitialDistribution {
            weights: vec![(space.index(state.0, state.1)? - 1, 1.0)],
        })
    }

    pub fn uniform(space: StateSpace, states: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut offsets = BTreeSet::new();
        for (x, y) in states {
            offsets.insert(space.index(x, y)? - 1);
        }
        if offsets.is_empty() {
            return Err(Error::validation("p0", "initial distribution has empty support"));
        }
        let w = 1.0 / offsets.len() as f64;
        Ok(InitialDistribution {
            weights: offsets.into_iter().map(|o| (o, w)).collect(),
        })
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights.iter().map(|&(o, _)| o)
    }
}

#[derive(Clone, Debug)]
pub struct FptProblem<'a> {
    pub q: &'a GeneratorMatrix,
    pub traps: TrapSpec,
    pub p0: InitialDistribution,
    pub cond_gate: f64,
}

impl<'a> FptProblem<'a> {
    /// Point-mass source at the 1-based flattened `source` index.
    pub fn new(q: &'a GeneratorMatrix, traps: TrapSpec, source: usize) -> Result<Self> {
        let state = q.space().state(source)?;
        let p0 = InitialDistribution::point(q.space(), state)?;
        Self::with_distribution(q, traps, p0)
    }

    pub fn with_distribution(q: &'a GeneratorMatrix, traps: TrapSpec, p0: InitialDistribution) -> Result<Self> {
        if traps.space != q.space() {
            return Err(Error::validation("traps", "trap set built for a different state space"));
        }
        if traps.is_empty() {
            return Err(Error::validation("traps", "trap set is empty"));
        }
        if let Some(o) = p0.support().find(|&o| traps.contains_offset(o)) {
            return Err(Error::validation(
                "source",
                format!("source state {:?} lies in the trap set", q.space().state_at(o)),
            ));
        }
        Ok(FptProblem {
            q,
            traps,
            p0,
            cond_gate: DEFAULT_COND_GATE,
        })
    }

    pub fn gate(mut self, cond_gate: f64) -> Self {
        self.cond_gate = cond_gate;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FptResult {
    pub mfpt: f64,
    /// 1-norm condition number of the transient block.
    pub cond: f64,
    pub gated: bool,
    pub transient_count: usize,
}

/// Offsets outside `absorbing`, in increasing order.
fn transient_offsets(dim: usize, absorbing: impl Fn(usize) -> bool) -> Vec<usize> {
    (0..dim).filter(|&o| !absorbing(o)).collect()
}

/// States that have no path into `absorbing`.
fn stranded(q: &GeneratorMatrix, absorbing: impl Fn(usize) -> bool) -> Vec<(usize, usize)> {
    let dim = q.dim();
    let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for t in q.triplets() {
        if t.row != t.col && t.value > 0.0 {
            predecessors[t.col].push(t.row);
        }
    }
    let mut reaches = vec![false; dim];
    let mut queue = VecDeque::new();
    for o in 0..dim {
        if absorbing(o) {
            reaches[o] = true;
            queue.push_back(o);
        }
    }
    while let Some(o) = queue.pop_front() {
        for &p in &predecessors[o] {
            if !reaches[p] {
                reaches[p] = true;
                queue.push_back(p);
            }
        }
    }
    let space = q.space();
    (0..dim).filter(|&o| !reaches[o]).map(|o| space.state_at(o)).collect()
}

/// `-Q` restricted to `keep`.
fn negated_block(q: &GeneratorMatrix, keep: &[usize]) -> DMatrix<f64> {
    let mut position = vec![usize::MAX; q.dim()];
    for (i, &o) in keep.iter().enumerate() {
        position[o] = i;
    }
    let mut a = DMatrix::zeros(keep.len(), keep.len());
    for (i, &o) in keep.iter().enumerate() {
        for t in q.row(o) {
            let j = position[t.col];
            if j != usize::MAX {
                a[(i, j)] = -t.value;
            }
        }
    }
    a
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn mfpt(problem: &FptProblem<'_>) -> Result<FptResult> {
    let q = problem.q;
    let traps = &problem.traps;
    let stuck = stranded(q, |o| traps.contains_offset(o));
    if !stuck.is_empty() {
        return Err(Error::Singular {
            context: "transient states cannot reach the trap set".into(),
            states: stuck,
        });
    }
    let keep = transient_offsets(q.dim(), |o| traps.contains_offset(o));
    let a = negated_block(q, &keep);
    let lu = a.clone().lu();
    let ones = DVector::from_element(keep.len(), 1.0);
    let singular = || Error::Singular {
        context: "truncated generator is numerically singular".into(),
        states: Vec::new(),
    };
    let v = lu.solve(&ones).ok_or_else(singular)?;
    let inverse = lu.try_inverse().ok_or_else(singular)?;
    let cond = norm1(&a) * norm1(&inverse);

    let mut position = vec![usize::MAX; q.dim()];
    for (i, &o) in keep.iter().enumerate() {
        position[o] = i;
    }
    let mfpt = problem.p0.weights.iter().map(|&(o, w)| w * v[position[o]]).sum();
    Ok(FptResult {
        mfpt,
        cond,
        gated: !(cond <= problem.cond_gate),
        transient_count: keep.len(),
    })
}

/// Probability of reaching `trap_a` before `trap_b` from the 1-based `source`.
pub fn splitting_probability(
    q: &GeneratorMatrix,
    trap_a: &TrapSpec,
    trap_b: &TrapSpec,
    source: usize,
) -> Result<f64> {
    let space = q.space();
    let src = space.state(source)?;
    if trap_a.space != space || trap_b.space != space {
        return Err(Error::validation("traps", "trap set built for a different state space"));
    }
    if let Some(&o) = trap_a.targets.intersection(&trap_b.targets).next() {
        return Err(Error::validation(
            "traps",
            format!("trap sets overlap at {:?}", space.state_at(o)),
        ));
    }
    if trap_a.contains(src) || trap_b.contains(src) {
        return Err(Error::validation("source", format!("source {src:?} lies in a trap set")));
    }
    let absorbing = |o: usize| trap_a.contains_offset(o) || trap_b.contains_offset(o);
    let stuck = stranded(q, absorbing);
    if !stuck.is_empty() {
        return Err(Error::Singular {
            context: "transient states reach neither trap set".into(),
            states: stuck,
        });
    }
    let keep = transient_offsets(q.dim(), absorbing);
    let a = negated_block(q, &keep);
    let b = DVector::from_iterator(
        keep.len(),
        keep.iter().map(|&o| {
            q.row(o)
                .iter()
                .filter(|t| trap_a.contains_offset(t.col))
                .map(|t| t.value)
                .sum::<f64>()
        }),
    );
    let h = a.lu().solve(&b).ok_or_else(|| Error::Singular {
        context: "committor system is numerically singular".into(),
        states: Vec::new(),
    })?;
    let i = keep.binary_search(&(source - 1)).expect("source is transient");
    Ok(h[i].clamp(0.0, 1.0))
}
