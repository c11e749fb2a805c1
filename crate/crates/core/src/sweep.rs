//! Parameter-space sweep over `(D, beta1, beta2, H, L)`.
//!
//! Every grid point yields the reduced-chain rates `r3..r6`, the recovery
//! probability `r = r4 / (r4 + r6)` and its odds. Records are aggregated into
//! `nu`, the fraction of threshold pairs with `r > eta`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctmc::build_generator;
use crate::emulator::{odds, recovery_committor, solve_arc, Arc};
use crate::error::{Error, Result};
use crate::format::decimal;
use crate::fpt::{Conventions, Thresholds, DEFAULT_COND_GATE};
use crate::reaction_network::build_rates;

pub const RECORDS_HEADER: &str =
    "D,beta1,beta2,H,L,r3,r4,r5,r6,mfpt_hh_lh,mfpt_lh_hh,mfpt_lh_ll,mfpt_ll_lh,r,odds,cond_max,gated";
pub const NU_HEADER: &str = "D,beta1,beta2,eta,nu";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Truncation `N`; thresholds run over `2 <= H <= N`, `1 <= L < H`.
    pub n: usize,
    pub d_values: Vec<f64>,
    /// `beta_i = D + offset`.
    pub beta_offsets: Vec<f64>,
    pub eta_values: Vec<f64>,
    pub cond_gate: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n: 10,
            d_values: vec![0.01, 0.5, 0.99],
            beta_offsets: vec![0.01, 0.5, 0.99],
            eta_values: vec![0.9, 0.95, 0.99],
            cond_gate: DEFAULT_COND_GATE,
        }
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: SweepConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::validation("n", format!("need N >= 2 for any threshold pair, got {}", self.n)));
        }
        let open_unit = |field: &'static str, values: &[f64]| -> Result<()> {
            if values.is_empty() {
                return Err(Error::validation(field, "must not be empty"));
            }
            if let Some(v) = values.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                return Err(Error::validation(field, format!("values must lie in (0, 1), got {v}")));
            }
            let mut sorted = values.to_vec();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::validation(field, "values must be distinct"));
            }
            Ok(())
        };
        open_unit("d_values", &self.d_values)?;
        open_unit("beta_offsets", &self.beta_offsets)?;
        open_unit("eta_values", &self.eta_values)?;
        if !(self.cond_gate > 0.0) {
            return Err(Error::validation("cond_gate", format!("must be positive, got {}", self.cond_gate)));
        }
        Ok(())
    }

    pub fn thresholds(&self) -> Vec<Thresholds> {
        Thresholds::grid(self.n)
    }

    /// `(D, beta1, beta2)` cells in lexicographic order.
    pub fn cells(&self) -> Vec<(f64, f64, f64)> {
        let mut ds = self.d_values.clone();
        ds.sort_by(f64::total_cmp);
        let mut offs = self.beta_offsets.clone();
        offs.sort_by(f64::total_cmp);
        let mut cells = Vec::new();
        for &d in &ds {
            for &o1 in &offs {
                for &o2 in &offs {
                    cells.push((d, d + o1, d + o2));
                }
            }
        }
        cells
    }

    pub fn point_count(&self) -> usize {
        self.d_values.len() * self.beta_offsets.len().pow(2) * self.thresholds().len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub high: usize,
    pub low: usize,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    pub r6: f64,
    pub mfpt_hh_lh: f64,
    pub mfpt_lh_hh: f64,
    pub mfpt_lh_ll: f64,
    pub mfpt_ll_lh: f64,
    pub r: f64,
    pub odds: f64,
    pub cond_max: f64,
    pub gated: bool,
    /// Exact probability of reaching `HH` before `LL` from the `LH` source.
    pub committor: f64,
}

impl SweepRecord {
    pub fn cell(&self) -> (f64, f64, f64) {
        (self.d, self.beta1, self.beta2)
    }

    pub fn csv_row(&self) -> String {
        let nums = [
            self.d,
            self.beta1,
            self.beta2,
            self.high as f64,
            self.low as f64,
            self.r3,
            self.r4,
            self.r5,
            self.r6,
            self.mfpt_hh_lh,
            self.mfpt_lh_hh,
            self.mfpt_lh_ll,
            self.mfpt_ll_lh,
            self.r,
            self.odds,
            self.cond_max,
        ];
        let mut row: Vec<String> = nums.iter().map(|&v| decimal(v)).collect();
        row.push(self.gated.to_string());
        row.join(",")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepFailure {
    pub d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub high: usize,
    pub low: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
}

impl SweepOutput {
    pub fn cond_max(&self) -> f64 {
        self.records.iter().map(|r| r.cond_max).fold(0.0, f64::max)
    }

    pub fn find(&self, d: f64, beta1: f64, beta2: f64, high: usize, low: usize) -> Option<&SweepRecord> {
        self.records
            .iter()
            .find(|r| r.d == d && r.beta1 == beta1 && r.beta2 == beta2 && r.high == high && r.low == low)
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput> {
    run_sweep_with(config, Conventions::default())
}

pub fn run_sweep_with(config: &SweepConfig, conventions: Conventions) -> Result<SweepOutput> {
    config.validate()?;
    let thresholds = config.thresholds();
    let outcomes: Vec<Vec<std::result::Result<SweepRecord, SweepFailure>>> = config
        .cells()
        .into_par_iter()
        .map(|(d, beta1, beta2)| {
            let fail = |th: &Thresholds, e: &Error| SweepFailure {
                d,
                beta1,
                beta2,
                high: th.high,
                low: th.low,
                message: e.to_string(),
            };
            let q = match build_rates(beta1, beta2, d, config.n).and_then(|r| build_generator(&r)) {
                Ok(q) => q,
                Err(e) => return thresholds.iter().map(|th| Err(fail(th, &e))).collect(),
            };
            thresholds
                .par_iter()
                .map(|th| {
                    let solve = |arc| solve_arc(&q, arc, th, conventions, config.cond_gate);
                    let point = || -> Result<SweepRecord> {
                        let [s3, s4, s5, s6] = Arc::REDUCED.map(solve);
                        let (s3, s4, s5, s6) = (s3?, s4?, s5?, s6?);
                        let (r4, r6) = (s4.rate(), s6.rate());
                        let r = r4 / (r4 + r6);
                        let solves = [s3, s4, s5, s6];
                        Ok(SweepRecord {
                            d,
                            beta1,
                            beta2,
                            high: th.high,
                            low: th.low,
                            r3: s3.rate(),
                            r4,
                            r5: s5.rate(),
                            r6,
                            mfpt_hh_lh: s5.result.mfpt,
                            mfpt_lh_hh: s4.result.mfpt,
                            mfpt_lh_ll: s6.result.mfpt,
                            mfpt_ll_lh: s3.result.mfpt,
                            r,
                            odds: odds(r),
                            cond_max: solves.iter().map(|s| s.result.cond).fold(0.0, f64::max),
                            gated: solves.iter().any(|s| s.result.gated),
                            committor: recovery_committor(&q, th)?,
                        })
                    };
                    point().map_err(|e| fail(th, &e))
                })
                .collect()
        })
        .collect();
    let mut records = Vec::with_capacity(config.point_count());
    let mut failures = Vec::new();
    for outcome in outcomes.into_iter().flatten() {
        match outcome {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    sort_records(&mut records);
    Ok(SweepOutput { records, failures })
}

fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| {
        a.d.total_cmp(&b.d)
            .then(a.beta1.total_cmp(&b.beta1))
            .then(a.beta2.total_cmp(&b.beta2))
            .then(a.high.cmp(&b.high))
            .then(a.low.cmp(&b.low))
    });
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NuCell {
    pub d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eta: f64,
    /// Fraction of non-gated threshold pairs with `r > eta`; NaN when every pair gated.
    pub nu: f64,
}

impl NuCell {
    pub fn csv_row(&self) -> String {
        [self.d, self.beta1, self.beta2, self.eta, self.nu]
            .map(decimal)
            .join(",")
    }
}

/// Expects `records` in the sorted order produced by [`run_sweep`].
pub fn aggregate_nu(records: &[SweepRecord], eta_values: &[f64]) -> Vec<NuCell> {
    let mut etas = eta_values.to_vec();
    etas.sort_by(f64::total_cmp);
    let mut cells = Vec::new();
    for group in records.chunk_by(|a, b| a.cell() == b.cell()) {
        let (d, beta1, beta2) = group[0].cell();
        let usable: Vec<&SweepRecord> = group.iter().filter(|r| !r.gated).collect();
        for &eta in &etas {
            let above = usable.iter().filter(|r| r.r > eta).count();
            let nu = if usable.is_empty() {
                f64::NAN
            } else {
                above as f64 / usable.len() as f64
            };
            cells.push(NuCell {
                d,
                beta1,
                beta2,
                eta,
                nu,
            });
        }
    }
    cells
}

pub fn records_path(prefix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_records.csv"))
}

pub fn nu_path(prefix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}_nu.csv"))
}

fn write_csv<'a>(path: &Path, header: &str, rows: impl Iterator<Item = String> + 'a) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{header}").map_err(io)?;
    for row in rows {
        writeln!(out, "{row}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes `<prefix>_records.csv` and `<prefix>_nu.csv`.
pub fn emit(records: &[SweepRecord], nu_cells: &[NuCell], prefix: &str) -> Result<(PathBuf, PathBuf)> {
    let rp = records_path(prefix);
    let np = nu_path(prefix);
    write_csv(&rp, RECORDS_HEADER, records.iter().map(SweepRecord::csv_row))?;
    write_csv(&np, NU_HEADER, nu_cells.iter().map(NuCell::csv_row))?;
    Ok((rp, np))
}

// Reference values for the default grid.
pub const REFERENCE_MIN_R: f64 = 0.275;
pub const REFERENCE_MIN_R_TOLERANCE: f64 = 0.05;
pub const REFERENCE_MAX_R_FLOOR: f64 = 0.999;
pub const REFERENCE_PEAK_NU: f64 = 0.78;
pub const REFERENCE_PEAK_NU_TOLERANCE: f64 = 0.05;
pub const REFERENCE_PEAK_ODDS: f64 = 50_000.0;
pub const REFERENCE_PEAK_ODDS_FACTOR: f64 = 5.0;
pub const REFERENCE_COND_RANGE: (f64, f64) = (1e5, 1e7);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// `None` when the grid does not contain the points this check needs.
    pub observed: Option<f64>,
    pub expected: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConventionSummary {
    pub trap: String,
    pub source: String,
    pub extinction_always_absorbing: bool,
    pub arc_rates: &'static str,
    pub recovery: &'static str,
}

impl ConventionSummary {
    pub fn describe(conventions: Conventions) -> Self {
        use crate::fpt::{SourceMode, TrapMode};
        ConventionSummary {
            trap: match conventions.trap {
                TrapMode::Region => "whole threshold region of the target macrostate".into(),
                TrapMode::Representative => "representative state of the target macrostate only".into(),
            },
            source: match conventions.source {
                SourceMode::Point => "point mass at (H|L, H|L) of the source macrostate".into(),
                SourceMode::RegionUniform => "uniform over the source region outside the traps".into(),
            },
            extinction_always_absorbing: true,
            arc_rates: "r_i = 1 / MFPT with only the arc's own target (plus extinction) absorbing",
            recovery: "r = r4 / (r4 + r6)",
        }
    }
}

/// Band and structural checks of a sweep, with the conventions it ran under.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReproductionReport {
    pub conventions: ConventionSummary,
    pub records: usize,
    pub failures: usize,
    pub bands: Vec<Check>,
    pub structure: Vec<Check>,
}

impl ReproductionReport {
    pub fn bands_passed(&self) -> bool {
        self.bands.iter().all(|c| c.passed)
    }

    pub fn structure_passed(&self) -> bool {
        self.structure.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.bands.iter().chain(&self.structure).find(|c| c.name == name)
    }
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn nu_at(nu: &[NuCell], d: f64, beta1: f64, beta2: f64, eta: f64) -> Option<f64> {
    nu.iter()
        .find(|c| approx_eq(c.d, d) && approx_eq(c.beta1, beta1) && approx_eq(c.beta2, beta2) && approx_eq(c.eta, eta))
        .map(|c| c.nu)
}

fn boolean(name: &'static str, expected: &str, outcome: Option<bool>) -> Check {
    Check {
        name,
        observed: outcome.map(|b| f64::from(u8::from(b))),
        expected: expected.into(),
        passed: outcome.unwrap_or(false),
    }
}

pub fn reproduction_report(
    config: &SweepConfig,
    conventions: Conventions,
    output: &SweepOutput,
    nu: &[NuCell],
) -> ReproductionReport {
    let records = &output.records;
    let r_values = || records.iter().map(|r| r.r);
    let min_r = r_values().reduce(f64::min);
    let max_r = r_values().reduce(f64::max);
    let (d_hi, off_hi) = (0.99, 0.99);
    let beta_hi = d_hi + off_hi;
    let peak_nu = nu_at(nu, d_hi, beta_hi, beta_hi, 0.9);
    let low_d_nu = {
        let cells: Vec<f64> = nu
            .iter()
            .filter(|c| approx_eq(c.d, 0.01) && c.eta >= 0.9 - 1e-12)
            .map(|c| c.nu)
            .collect();
        (!cells.is_empty()).then(|| cells.into_iter().fold(0.0, f64::max))
    };
    let peak_odds = records
        .iter()
        .find(|r| approx_eq(r.d, d_hi) && approx_eq(r.beta1, beta_hi) && approx_eq(r.beta2, beta_hi) && r.high == 10 && r.low == 1)
        .map(|r| r.odds);

    let bands = vec![
        Check {
            name: "min_r",
            observed: min_r,
            expected: format!("{REFERENCE_MIN_R} +/- {REFERENCE_MIN_R_TOLERANCE}"),
            passed: min_r.is_some_and(|v| (v - REFERENCE_MIN_R).abs() <= REFERENCE_MIN_R_TOLERANCE),
        },
        Check {
            name: "max_r",
            observed: max_r,
            expected: format!(">= {REFERENCE_MAX_R_FLOOR}"),
            passed: max_r.is_some_and(|v| v >= REFERENCE_MAX_R_FLOOR),
        },
        Check {
            name: "peak_nu",
            observed: peak_nu,
            expected: format!("{REFERENCE_PEAK_NU} +/- {REFERENCE_PEAK_NU_TOLERANCE} at D=0.99, eta=0.9, beta=D+0.99"),
            passed: peak_nu.is_some_and(|v| (v - REFERENCE_PEAK_NU).abs() <= REFERENCE_PEAK_NU_TOLERANCE),
        },
        Check {
            name: "low_dispersal_nu",
            observed: low_d_nu,
            expected: "0 for D=0.01, eta >= 0.9".into(),
            passed: low_d_nu == Some(0.0),
        },
        Check {
            name: "peak_odds",
            observed: peak_odds,
            expected: format!(
                "within a factor {REFERENCE_PEAK_ODDS_FACTOR} of {REFERENCE_PEAK_ODDS} at D=0.99, H=10, L=1, beta=D+0.99"
            ),
            passed: peak_odds.is_some_and(|v| {
                v >= REFERENCE_PEAK_ODDS / REFERENCE_PEAK_ODDS_FACTOR && v <= REFERENCE_PEAK_ODDS * REFERENCE_PEAK_ODDS_FACTOR
            }),
        },
    ];

    let cond_max = output.cond_max();
    let structure = vec![
        boolean("nu_non_increasing_in_eta", "true", Some(nu_monotone_in_eta(nu))),
        boolean("r_non_decreasing_in_h", "true", Some(r_monotone_in_h(records))),
        boolean("h2_l1_minimizes_r_at_high_dispersal", "true", minimizer_21(records, d_hi)),
        boolean("nu_peaks_at_highest_betas", "true", nu_peaks_at_top(config, nu)),
        boolean(
            "all_points_below_gate",
            "true",
            Some(!records.is_empty() && records.iter().all(|r| !r.gated && r.cond_max < config.cond_gate)),
        ),
        Check {
            name: "cond_max_in_range",
            observed: Some(cond_max),
            expected: format!("[{:e}, {:e}]", REFERENCE_COND_RANGE.0, REFERENCE_COND_RANGE.1),
            passed: cond_max >= REFERENCE_COND_RANGE.0 && cond_max <= REFERENCE_COND_RANGE.1,
        },
    ];

    ReproductionReport {
        conventions: ConventionSummary::describe(conventions),
        records: records.len(),
        failures: output.failures.len(),
        bands,
        structure,
    }
}

fn nu_monotone_in_eta(nu: &[NuCell]) -> bool {
    nu.chunk_by(|a, b| (a.d, a.beta1, a.beta2) == (b.d, b.beta1, b.beta2))
        .all(|cell| cell.windows(2).all(|w| w[0].eta <= w[1].eta && w[1].nu <= w[0].nu))
}

fn r_monotone_in_h(records: &[SweepRecord]) -> bool {
    records.chunk_by(|a, b| a.cell() == b.cell()).all(|cell| {
        let max_low = cell.iter().map(|r| r.low).max().unwrap_or(0);
        (1..=max_low).all(|low| {
            let mut by_h: Vec<&SweepRecord> = cell.iter().filter(|r| r.low == low).collect();
            by_h.sort_by_key(|r| r.high);
            by_h.windows(2).all(|w| w[1].r >= w[0].r)
        })
    })
}

fn minimizer_21(records: &[SweepRecord], d: f64) -> Option<bool> {
    let cells: Vec<&[SweepRecord]> = records
        .chunk_by(|a, b| a.cell() == b.cell())
        .filter(|c| approx_eq(c[0].d, d))
        .collect();
    if cells.is_empty() {
        return None;
    }
    Some(cells.iter().all(|cell| {
        let min = cell.iter().map(|r| r.r).fold(f64::INFINITY, f64::min);
        cell.iter().any(|r| r.high == 2 && r.low == 1 && r.r <= min)
    }))
}

/// `nu` at `beta1 = beta2 = D + max offset` is at least every other cell's, per `(D, eta)`.
fn nu_peaks_at_top(config: &SweepConfig, nu: &[NuCell]) -> Option<bool> {
    let top = config.beta_offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut any = false;
    for &d in &config.d_values {
        for &eta in &config.eta_values {
            let panel: Vec<&NuCell> = nu.iter().filter(|c| c.d == d && c.eta == eta).collect();
            let peak = nu_at(nu, d, d + top, d + top, eta)?;
            any = true;
            if panel.iter().any(|c| c.nu > peak) {
                return Some(false);
            }
        }
    }
    any.then_some(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        SweepConfig {
            n: 4,
            d_values: vec![0.5, 0.2],
            beta_offsets: vec![0.3, 0.9],
            eta_values: vec![0.5, 0.1],
            cond_gate: DEFAULT_COND_GATE,
        }
    }

    #[test]
    fn config_json() {
        let c = SweepConfig::from_json(
            r#"{"n": 10, "d_values": [0.01, 0.5, 0.99], "beta_offsets": [0.01, 0.5, 0.99],
                "eta_values": [0.9, 0.95, 0.99], "cond_gate": 1e7}"#,
        )
        .unwrap();
        assert_eq!(c, SweepConfig::default());
        assert_eq!(c.point_count(), 1215);
        assert_eq!(c.thresholds().len(), 45);

        let err = SweepConfig::from_json(r#"{"n": 10, "extra": 1}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(SweepConfig::from_json(r#"{"d_values": [1.5]}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"beta_offsets": [0.0]}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"n": 1}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"cond_gate": -1}"#).is_err());
        // missing keys fall back to defaults
        assert_eq!(SweepConfig::from_json(r#"{"n": 6}"#).unwrap().n, 6);
    }

    #[test]
    fn small_sweep_is_sorted_and_complete() {
        let config = small();
        let out = run_sweep(&config).unwrap();
        assert!(out.failures.is_empty());
        assert_eq!(out.records.len(), config.point_count());
        assert_eq!(out.records[0].d, 0.2);
        for w in out.records.windows(2) {
            let key = |r: &SweepRecord| (r.d, r.beta1, r.beta2, r.high as f64, r.low as f64);
            assert!(key(&w[0]) < key(&w[1]));
        }
        for r in &out.records {
            assert!((0.0..=1.0).contains(&r.r));
            assert!((r.odds - r.r / (1.0 - r.r)).abs() <= 1e-12 * r.odds.max(1.0));
            assert!((0.0..=1.0).contains(&r.committor));
            assert_eq!(r.r4, 1.0 / r.mfpt_lh_hh);
        }
    }

    #[test]
    fn nu_counts() {
        let config = small();
        let out = run_sweep(&config).unwrap();
        let nu = aggregate_nu(&out.records, &config.eta_values);
        assert_eq!(nu.len(), 2 * 4 * 2);
        assert_eq!(nu[0].eta, 0.1);
        let per = config.thresholds().len() as f64;
        for c in &nu {
            let k = (c.nu * per).round();
            assert!((c.nu * per - k).abs() < 1e-12);
        }
        assert!(nu_monotone_in_eta(&nu));
    }

    #[test]
    fn gated_points_leave_the_denominator() {
        let config = small();
        let mut out = run_sweep(&config).unwrap();
        let cell = out.records[0].cell();
        let n_cell = out.records.iter().filter(|r| r.cell() == cell).count();
        for r in out.records.iter_mut().filter(|r| r.cell() == cell).take(2) {
            r.gated = true;
            r.r = 1.0;
        }
        let usable: Vec<_> = out.records.iter().filter(|r| r.cell() == cell && !r.gated).collect();
        let nu = aggregate_nu(&out.records, &[0.1]);
        let expected = usable.iter().filter(|r| r.r > 0.1).count() as f64 / (n_cell - 2) as f64;
        assert_eq!(nu[0].nu, expected);
    }

    #[test]
    fn emitted_files_are_stable() {
        let config = small();
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str| {
            let out = run_sweep(&config).unwrap();
            let nu = aggregate_nu(&out.records, &config.eta_values);
            let prefix = dir.path().join(name).to_string_lossy().into_owned();
            let (rp, np) = emit(&out.records, &nu, &prefix).unwrap();
            (std::fs::read(rp).unwrap(), std::fs::read(np).unwrap())
        };
        let a = write("a");
        let b = write("b");
        assert_eq!(a, b);
        let text = String::from_utf8(a.0).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(RECORDS_HEADER));
        assert_eq!(lines.count(), config.point_count());
        let nu_text = String::from_utf8(a.1).unwrap();
        assert_eq!(nu_text.lines().next(), Some(NU_HEADER));
        assert_eq!(nu_text.lines().count(), 1 + 16);
    }

    #[test]
    fn emit_reports_path_on_failure() {
        let err = emit(&[], &[], "/nonexistent-dir/x").unwrap_err();
        match err {
            Error::Io { path, .. } => assert!(path.ends_with("x_records.csv")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_row_format() {
        let r = SweepRecord {
            d: 0.99,
            beta1: 1.98,
            beta2: 1.49,
            high: 10,
            low: 1,
            r3: 1.0 / 3.0,
            r4: 2.0,
            r5: 0.5,
            r6: 1e-7,
            mfpt_hh_lh: 2.0,
            mfpt_lh_hh: 0.5,
            mfpt_lh_ll: 1e7,
            mfpt_ll_lh: 3.0,
            r: 0.99999995,
            odds: 19999999.0,
            cond_max: 254871.1094299853,
            gated: false,
            committor: 0.5,
        };
        assert_eq!(
            r.csv_row(),
            "0.99,1.98,1.49,10,1,0.333333333333,2,0.5,1e-07,2,0.5,10000000,3,0.99999995,19999999,254871.10943,false"
        );
    }
}
