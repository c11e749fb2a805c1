//! Shared fixtures for the pipeline benchmarks.

use cascade_core::{build_generator, build_rates, GeneratorMatrix, StochasticRates, SweepConfig};

/// High-dispersal, high-habitability point used across the benchmarks.
pub fn reference_rates(n: usize) -> StochasticRates {
    build_rates(1.98, 1.98, 0.99, n).expect("reference parameters are valid")
}

pub fn reference_generator(n: usize) -> GeneratorMatrix {
    build_generator(&reference_rates(n)).expect("reference generator builds")
}

/// One dispersal value and one habitability offset over the default thresholds.
pub fn single_cell_sweep() -> SweepConfig {
    SweepConfig {
        d_values: vec![0.99],
        beta_offsets: vec![0.99],
        ..SweepConfig::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_consistent() {
        assert_eq!(reference_generator(10).nonzeros(), 738);
        assert_eq!(single_cell_sweep().point_count(), 45);
    }
}
