//! Two-patch Allee-effect birth-death chain and the four-state tipping emulator
//! built from its mean first passage times.
//!
//! The pipeline runs from [`reaction_network`] (rates and propensities) through
//! [`ctmc`] (generator matrix), [`fpt`] (first-passage solves), [`emulator`]
//! (macro-transition rates and recovery odds) to [`sweep`] (parameter grid).
//! [`ssa`] and the committor solve in [`fpt`] are independent oracles.

pub mod ctmc;
pub mod emulator;
pub mod error;
pub mod format;
pub mod fpt;
pub mod mean_field;
pub mod reaction_network;
pub mod ssa;
pub mod sweep;

pub use ctmc::{build_generator, validate_generator, GeneratorMatrix, StateSpace, ValidationReport};
pub use emulator::{
    cascade_partial_sums, composed_transitions, emulator_rates, macrostate_of, meta_chain, ComposedTransitions,
    EmulatorRates, MetaChain, StateLabel,
};
pub use error::{Error, Result};
pub use fpt::{
    mfpt, splitting_probability, trap_states, Conventions, FptProblem, FptResult, Macrostate, SourceMode, Thresholds,
    TrapMode, TrapSpec,
};
pub use mean_field::{drift, equilibria, integrate, MeanFieldModel};
pub use reaction_network::{build_rates, classify_regime, macro_params, propensities, MacroParams, Patch, Regime, StochasticRates};
pub use ssa::{compare_with_solver, sample_fpt, sample_path, AgreementReport, FptSampleSet, SsaRun};
pub use sweep::{aggregate_nu, emit, run_sweep, NuCell, SweepConfig, SweepOutput, SweepRecord};
