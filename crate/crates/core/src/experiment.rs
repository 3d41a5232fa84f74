//! Batch runs over generated topologies: every trial solves each
//! (setting, objective) combination, schedules the result and validates the
//! schedule. Results are written as wide CSVs with one row per trial.

use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulations::{min_radio_chains, solve_objective, Objective, SettingLabel};
use crate::generator::{configure_for_setting, generate, GeneratorConfig, GeneratorError};
use crate::model::NetworkTopology;
use crate::scheduler::schedule;
use crate::validator::{jain_index, validate_schedule};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("experiment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("writing {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub settings: Vec<SettingLabel>,
    pub objectives: Vec<Objective>,
    pub num_trials: usize,
    pub generator: GeneratorConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            settings: SettingLabel::standard_six(),
            objectives: Objective::ALL.to_vec(),
            num_trials: 50,
            generator: GeneratorConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn check(&self) -> Result<(), ExperimentError> {
        if self.settings.is_empty() || self.objectives.is_empty() {
            return Err(ExperimentError::InvalidSpec("settings and objectives must be non-empty".into()));
        }
        self.generator.check()?;
        Ok(())
    }

    /// Seed of trial `t`: consecutive seeds from the generator's seed.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.generator.seed.wrapping_add(trial as u64)
    }
}

/// Outcome of one (setting, objective) solve inside a trial. Fields are
/// `None` when the LP had no optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub setting: SettingLabel,
    pub objective: Objective,
    pub d_b_gbps: Option<f64>,
    pub aggregate_gbps: Option<f64>,
    pub jain: Option<f64>,
    pub macro_min_chains: Option<u32>,
    pub small_min_chains: Option<u32>,
    pub scheduled: bool,
    pub violations: usize,
    pub realized_d_b: Option<f64>,
    pub error: Option<String>,
}

impl CaseResult {
    /// Scheduled and validated without findings.
    pub fn realizable(&self) -> bool {
        self.scheduled && self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub cases: Vec<CaseResult>,
}

impl TrialResult {
    pub fn case(&self, setting: SettingLabel, objective: Objective) -> Option<&CaseResult> {
        self.cases.iter().find(|c| c.setting == setting && c.objective == objective)
    }
}

pub fn run_case(base: &NetworkTopology, setting: SettingLabel, objective: Objective) -> CaseResult {
    let topology = configure_for_setting(base, setting);
    let mut out = CaseResult {
        setting,
        objective,
        d_b_gbps: None,
        aggregate_gbps: None,
        jain: None,
        macro_min_chains: None,
        small_min_chains: None,
        scheduled: false,
        violations: 0,
        realized_d_b: None,
        error: None,
    };
    let solution = match solve_objective(&topology, setting.setting, objective) {
        Ok(s) => s,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.d_b_gbps = solution.d_b_gbps;
    out.aggregate_gbps = Some(solution.per_bs_demand.aggregate);
    out.jain = jain_index(&solution.per_bs_demand).ok();
    if let Ok(chains) = min_radio_chains(&topology, &solution.p_first) {
        out.macro_min_chains = topology.macro_id().and_then(|m| chains.get(&m).copied());
        out.small_min_chains = topology.small_cells().iter().filter_map(|b| chains.get(b).copied()).max();
    }
    match schedule(&topology, &solution.p_first) {
        Ok(sched) => {
            let report = validate_schedule(&topology, &solution.p_first, &solution.per_bs_demand, &sched);
            out.scheduled = true;
            out.violations = report.violations.len();
            out.realized_d_b = Some(report.realized_d_b);
        }
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

pub fn run_trial(spec: &ExperimentSpec, trial: usize) -> Result<TrialResult, ExperimentError> {
    let seed = spec.trial_seed(trial);
    let base = generate(&GeneratorConfig { seed, ..spec.generator.clone() })?;
    let cases = spec
        .settings
        .iter()
        .flat_map(|&s| spec.objectives.iter().map(move |&o| (s, o)))
        .map(|(s, o)| run_case(&base, s, o))
        .collect();
    Ok(TrialResult { trial, seed, cases })
}

/// Runs all trials in parallel; results come back in trial order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<TrialResult>, ExperimentError> {
    spec.check()?;
    (0..spec.num_trials).into_par_iter().map(|t| run_trial(spec, t)).collect()
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn write(&self, path: &Path) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })?;
        Ok(())
    }
}

fn per_trial_table(
    trials: &[TrialResult],
    columns: &[(String, SettingLabel, Objective)],
    value: impl Fn(&CaseResult) -> Option<String>,
) -> Table {
    let mut header = vec!["trial".to_string(), "seed".to_string()];
    header.extend(columns.iter().map(|(name, _, _)| name.clone()));
    let rows = trials
        .iter()
        .map(|t| {
            let mut row = vec![t.trial.to_string(), t.seed.to_string()];
            row.extend(columns.iter().map(|(_, s, o)| t.case(*s, *o).and_then(&value).unwrap_or_default()));
            row
        })
        .collect();
    Table { header, rows }
}

/// Writes the per-trial CSVs and `summary.csv` into `dir`.
pub fn write_results(spec: &ExperimentSpec, trials: &[TrialResult], dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io { path: dir.display().to_string(), source })?;
    let combos: Vec<(String, SettingLabel, Objective)> =
        spec.settings.iter().flat_map(|&s| spec.objectives.iter().map(move |&o| (format!("{s}/{o}"), s, o))).collect();
    // D_B only exists for the equal-demand objective
    let by_setting: Vec<(String, SettingLabel, Objective)> =
        spec.settings.iter().map(|&s| (s.to_string(), s, Objective::EqualDemand)).collect();

    let mut tables: Vec<(&str, Table)> = Vec::new();
    let demand = per_trial_table(trials, &by_setting, |c| c.d_b_gbps.map(|v| v.to_string()));
    tables.push(("max_demand_by_setting.csv", demand));
    tables.push((
        "aggregate_by_objective.csv",
        per_trial_table(trials, &combos, |c| c.aggregate_gbps.map(|v| v.to_string())),
    ));
    tables.push(("jain_by_objective.csv", per_trial_table(trials, &combos, |c| c.jain.map(|v| v.to_string()))));

    let mut chain_cols = Vec::new();
    for &s in &spec.settings {
        chain_cols.push((format!("{s}/macro"), s, Objective::EqualDemand, true));
        chain_cols.push((format!("{s}/small_max"), s, Objective::EqualDemand, false));
    }
    let mut header = vec!["trial".to_string(), "seed".to_string()];
    header.extend(chain_cols.iter().map(|c| c.0.clone()));
    let rows = trials
        .iter()
        .map(|t| {
            let mut row = vec![t.trial.to_string(), t.seed.to_string()];
            row.extend(chain_cols.iter().map(|(_, s, o, is_macro)| {
                let c = t.case(*s, *o);
                cell(c.and_then(|c| if *is_macro { c.macro_min_chains } else { c.small_min_chains }))
            }));
            row
        })
        .collect();
    tables.push(("min_radio_chains_hist.csv", Table { header, rows }));

    for (name, table) in &tables {
        table.write(&dir.join(name))?;
    }
    summary_table(spec, trials, &tables).write(&dir.join("summary.csv"))
}

fn summary_table(spec: &ExperimentSpec, trials: &[TrialResult], tables: &[(&str, Table)]) -> Table {
    let header = ["file", "column", "count", "mean", "min", "max"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for (name, table) in tables {
        for (col, title) in table.header.iter().enumerate().skip(2) {
            let values: Vec<f64> = table.rows.iter().filter_map(|r| r[col].parse().ok()).collect();
            rows.push(stats_row(name, title, &values));
        }
    }
    let mut realizable_all = Vec::new();
    for &s in &spec.settings {
        let flags: Vec<f64> = trials
            .iter()
            .flat_map(|t| t.cases.iter().filter(|c| c.setting == s))
            .filter(|c| c.error.is_none() || c.scheduled)
            .map(|c| if c.realizable() { 1.0 } else { 0.0 })
            .collect();
        realizable_all.extend_from_slice(&flags);
        rows.push(stats_row("realizability", &s.to_string(), &flags));
    }
    rows.push(stats_row("realizability", "all", &realizable_all));
    Table { header, rows }
}

fn stats_row(file: &str, column: &str, values: &[f64]) -> Vec<String> {
    let n = values.len();
    let (mean, min, max) = if n == 0 {
        (None, None, None)
    } else {
        (
            Some(values.iter().sum::<f64>() / n as f64),
            values.iter().copied().reduce(f64::min),
            values.iter().copied().reduce(f64::max),
        )
    };
    vec![file.to_string(), column.to_string(), n.to_string(), cell(mean), cell(min), cell(max)]
}
