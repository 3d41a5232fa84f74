//! Linear programs for the maximum supportable traffic demand.
//!
//! The per-link min over first/last-hop time is eliminated by tying both
//! endpoint fractions to the same ratio, `p_l / P_l = p_f / P_f`, so each
//! link carries a single time variable `p_f`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpError, LpStatus, Relation};
use crate::model::{BsId, LinkId, NetworkTopology, TrafficDemand};

/// Slack absorbed inside `ceil` when counting radio chains.
const CHAIN_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum FormulationError {
    #[error("invalid topology: {}", .0.join("; "))]
    InvalidTopology(Vec<String>),
    #[error("interference-minimal setting but {0} interference pair(s) present")]
    InterferenceNotMinimal(usize),
    #[error("base station {bs} has {have} radio chain(s) but {need} attached link(s)")]
    InsufficientRadioChains { bs: BsId, have: u32, need: usize },
    #[error("network has no small-cell base station")]
    EmptyNetwork,
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("demand floor {0} Gbps cannot be met")]
    InfeasibleFloor(f64),
    #[error("demand floor must be non-negative, got {0}")]
    NegativeFloor(f64),
    #[error("no time fraction given for link {0}")]
    MissingLink(LinkId),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceRegime {
    Minimal,
    Limited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadioRegime {
    Enough,
    Limited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Setting {
    pub interference: InterferenceRegime,
    pub radio_chains: RadioRegime,
}

impl Setting {
    pub const MI_ER: Setting = Setting { interference: InterferenceRegime::Minimal, radio_chains: RadioRegime::Enough };
    pub const MI_LR: Setting =
        Setting { interference: InterferenceRegime::Minimal, radio_chains: RadioRegime::Limited };
    pub const LI_ER: Setting = Setting { interference: InterferenceRegime::Limited, radio_chains: RadioRegime::Enough };
    pub const LI_LR: Setting =
        Setting { interference: InterferenceRegime::Limited, radio_chains: RadioRegime::Limited };

    /// Interference-minimal with enough radio chains: only capacity binds and
    /// no time variables are needed.
    fn is_capacity_only(&self) -> bool {
        *self == Self::MI_ER
    }
}

/// A setting as named in experiment specs: `MI-ER`, `LI-LR(2)`, ... For
/// limited-radio labels the number is the macro cell's chain count (small
/// cells get one chain); without a number the topology's own counts are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SettingLabel {
    pub setting: Setting,
    pub macro_chains: Option<u32>,
}

impl SettingLabel {
    pub const fn new(setting: Setting, macro_chains: Option<u32>) -> Self {
        Self { setting, macro_chains }
    }

    /// The six settings of the reference experiment.
    pub fn standard_six() -> Vec<SettingLabel> {
        vec![
            Self::new(Setting::MI_ER, None),
            Self::new(Setting::MI_LR, Some(1)),
            Self::new(Setting::MI_LR, Some(2)),
            Self::new(Setting::LI_ER, None),
            Self::new(Setting::LI_LR, Some(1)),
            Self::new(Setting::LI_LR, Some(2)),
        ]
    }
}

impl fmt::Display for SettingLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = match self.setting.interference {
            InterferenceRegime::Minimal => "MI",
            InterferenceRegime::Limited => "LI",
        };
        let r = match self.setting.radio_chains {
            RadioRegime::Enough => "ER",
            RadioRegime::Limited => "LR",
        };
        write!(f, "{i}-{r}")?;
        if let Some(k) = self.macro_chains {
            write!(f, "({k})")?;
        }
        Ok(())
    }
}

impl FromStr for SettingLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("unrecognized setting {s:?}; expected e.g. MI-ER, LI-LR(2)");
        let upper = s.trim().to_ascii_uppercase();
        let (head, count) = match upper.split_once('(') {
            Some((h, rest)) => {
                let n = rest.strip_suffix(')').ok_or_else(bad)?;
                (h.to_string(), Some(n.trim().parse::<u32>().map_err(|_| bad())?))
            }
            None => (upper.clone(), None),
        };
        let (i, r) = head.split_once('-').ok_or_else(bad)?;
        let interference = match i {
            "MI" => InterferenceRegime::Minimal,
            "LI" => InterferenceRegime::Limited,
            _ => return Err(bad()),
        };
        let radio_chains = match r {
            "ER" => RadioRegime::Enough,
            "LR" => RadioRegime::Limited,
            _ => return Err(bad()),
        };
        if radio_chains == RadioRegime::Enough && count.is_some() {
            return Err(bad());
        }
        if count == Some(0) {
            return Err(bad());
        }
        Ok(Self::new(Setting { interference, radio_chains }, count))
    }
}

impl TryFrom<String> for SettingLabel {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SettingLabel> for String {
    fn from(l: SettingLabel) -> Self {
        l.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize the common demand `D_B` of every small cell.
    EqualDemand,
    /// Maximize the aggregate `D_M = sum D_i`.
    Aggregate,
    /// Maximize `D_M` with every `D_i` at least the equal-demand optimum.
    AggregateFair,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::EqualDemand, Objective::Aggregate, Objective::AggregateFair];

    pub fn as_str(&self) -> &'static str {
        match self {
            Objective::EqualDemand => "equal_demand",
            Objective::Aggregate => "aggregate",
            Objective::AggregateFair => "aggregate_fair",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|o| o.as_str() == s.trim()).ok_or_else(|| format!("unrecognized objective {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum DemandVars {
    Equal(usize),
    PerBs(BTreeMap<BsId, usize>),
}

/// An LP together with the mapping from its columns back to demands and
/// per-link time fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct Formulation {
    pub lp: LinearProgram,
    pub objective: Objective,
    demand_vars: DemandVars,
    /// Empty when the setting needs no time variables.
    time_vars: BTreeMap<LinkId, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandSolution {
    pub objective: Objective,
    /// The common demand for equal-demand runs, the enforced floor for fair
    /// runs, `None` for plain aggregate runs.
    pub d_b_gbps: Option<f64>,
    pub per_bs_demand: TrafficDemand,
    /// First-hop active fraction per link, the least time that carries the
    /// link's subtree demand.
    pub p_first: BTreeMap<LinkId, f64>,
    pub p_last: BTreeMap<LinkId, f64>,
    pub lp_objective: f64,
}

fn check_inputs(topology: &NetworkTopology, setting: Setting) -> Result<(), FormulationError> {
    let mut problems: Vec<String> = topology.validate_tree().iter().map(|v| v.to_string()).collect();
    problems.extend(topology.validate_interference_model().iter().map(|v| v.to_string()));
    if !problems.is_empty() {
        return Err(FormulationError::InvalidTopology(problems));
    }
    if topology.num_small_cells() == 0 {
        return Err(FormulationError::EmptyNetwork);
    }
    if setting.interference == InterferenceRegime::Minimal && !topology.interference.is_empty() {
        return Err(FormulationError::InterferenceNotMinimal(topology.interference.len()));
    }
    if setting.radio_chains == RadioRegime::Enough {
        for s in &topology.stations {
            let need = topology.attached_links(s.id).map(|l| l.len()).unwrap_or(0);
            if (s.radio_chains as usize) < need {
                return Err(FormulationError::InsufficientRadioChains { bs: s.id, have: s.radio_chains, need });
            }
        }
    }
    Ok(())
}

fn build(
    topology: &NetworkTopology,
    setting: Setting,
    objective: Objective,
    floor: f64,
) -> Result<Formulation, FormulationError> {
    check_inputs(topology, setting)?;
    let small = topology.small_cells();
    let with_time = !setting.is_capacity_only();

    let demand_count = match objective {
        Objective::EqualDemand => 1,
        _ => small.len(),
    };
    let time_count = if with_time { topology.links.len() } else { 0 };
    let mut lp = LinearProgram::new(demand_count + time_count);

    let demand_vars = match objective {
        Objective::EqualDemand => {
            lp.set_name(0, "D_B");
            lp.set_objective_coeff(0, 1.0);
            DemandVars::Equal(0)
        }
        _ => {
            let mut map = BTreeMap::new();
            for (k, &bs) in small.iter().enumerate() {
                lp.set_name(k, format!("D[{bs}]"));
                lp.set_objective_coeff(k, 1.0);
                if objective == Objective::AggregateFair {
                    lp.set_bounds(k, floor, f64::INFINITY);
                }
                map.insert(bs, k);
            }
            DemandVars::PerBs(map)
        }
    };
    let mut time_vars = BTreeMap::new();
    if with_time {
        for (k, link) in topology.links.iter().enumerate() {
            let var = demand_count + k;
            lp.set_name(var, format!("p_f[{}]", link.id));
            lp.set_bounds(var, 0.0, link.p_first_max);
            time_vars.insert(link.id, var);
        }
    }

    // Capacity: the inbound link of B_i carries the demand of its subtree.
    for link in &topology.links {
        let subtree =
            topology.subtree_bs_set(link.child).map_err(|e| FormulationError::InvalidTopology(vec![e.to_string()]))?;
        let mut terms: Vec<(usize, f64)> = match &demand_vars {
            DemandVars::Equal(v) => vec![(*v, -(subtree.len() as f64))],
            DemandVars::PerBs(map) => subtree.iter().map(|bs| (map[bs], -1.0)).collect(),
        };
        let name = format!("cap[{}]", link.id);
        match time_vars.get(&link.id) {
            Some(&p) => {
                terms.push((p, link.rate_per_first_hop_time()));
                lp.add_terms(name, &terms, Relation::Ge, 0.0);
            }
            None => {
                terms.iter_mut().for_each(|t| t.1 = -t.1);
                lp.add_terms(name, &terms, Relation::Le, link.capacity_gbps);
            }
        }
    }

    if setting.interference == InterferenceRegime::Limited {
        for pair in &topology.interference {
            let (a, b) = (topology.link(pair.lo()).unwrap(), topology.link(pair.hi()).unwrap());
            lp.add_terms(
                format!("intf[{},{}]", a.id, b.id),
                &[(time_vars[&a.id], 1.0 / a.p_first_max), (time_vars[&b.id], 1.0 / b.p_first_max)],
                Relation::Le,
                1.0,
            );
        }
    }

    if setting.radio_chains == RadioRegime::Limited {
        for s in &topology.stations {
            let mut terms: Vec<(usize, f64)> = topology.child_links(s.id).map(|l| (time_vars[&l.id], 1.0)).collect();
            if let Some(inbound) = topology.inbound_link(s.id) {
                terms.push((time_vars[&inbound.id], inbound.last_to_first_ratio()));
            }
            if !terms.is_empty() {
                lp.add_terms(format!("radio[{}]", s.id), &terms, Relation::Le, s.radio_chains as f64);
            }
        }
    }

    Ok(Formulation { lp, objective, demand_vars, time_vars })
}

/// Maximize the common per-small-cell demand `D_B`.
pub fn build_equal_demand_lp(topology: &NetworkTopology, setting: Setting) -> Result<Formulation, FormulationError> {
    build(topology, setting, Objective::EqualDemand, 0.0)
}

/// Maximize the aggregate demand at the macro cell.
pub fn build_aggregate_lp(topology: &NetworkTopology, setting: Setting) -> Result<Formulation, FormulationError> {
    build(topology, setting, Objective::Aggregate, 0.0)
}

/// Maximize the aggregate demand while every small cell keeps at least
/// `d_b_floor`, normally the equal-demand optimum on the same inputs.
pub fn build_fair_aggregate_lp(
    topology: &NetworkTopology,
    setting: Setting,
    d_b_floor: f64,
) -> Result<Formulation, FormulationError> {
    if !(d_b_floor >= 0.0) {
        return Err(FormulationError::NegativeFloor(d_b_floor));
    }
    build(topology, setting, Objective::AggregateFair, d_b_floor)
}

impl Formulation {
    pub fn solve(&self, topology: &NetworkTopology) -> Result<DemandSolution, FormulationError> {
        let sol = lp::solve(&self.lp)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(FormulationError::Infeasible),
            LpStatus::Unbounded => return Err(FormulationError::Unbounded),
        }
        let x = &sol.assignment;
        let (d_b, per_bs) = match &self.demand_vars {
            DemandVars::Equal(v) => {
                let d = x[*v].max(0.0);
                (Some(d), TrafficDemand::uniform(topology.small_cells(), d))
            }
            DemandVars::PerBs(map) => {
                let demand = TrafficDemand::new(map.iter().map(|(&bs, &v)| (bs, x[v].max(0.0))).collect());
                let floor = match self.objective {
                    Objective::AggregateFair => map.values().next().map(|&v| self.lp.bounds[v].lower),
                    _ => None,
                };
                (floor, demand)
            }
        };
        let p_first = tight_time_fractions(topology, &per_bs_loads(topology, &per_bs));
        let p_last =
            p_first.iter().map(|(&id, &p)| (id, p * topology.link(id).unwrap().last_to_first_ratio())).collect();
        Ok(DemandSolution {
            objective: self.objective,
            d_b_gbps: d_b,
            per_bs_demand: per_bs,
            p_first,
            p_last,
            lp_objective: sol.objective_value,
        })
    }

    /// Column index of link `id`'s time fraction, if the setting uses one.
    pub fn time_var(&self, id: LinkId) -> Option<usize> {
        self.time_vars.get(&id).copied()
    }
}

/// Total demand carried by each link: the sum over its child's subtree.
pub fn per_bs_loads(topology: &NetworkTopology, demand: &TrafficDemand) -> BTreeMap<LinkId, f64> {
    topology
        .links
        .iter()
        .map(|l| {
            let load =
                topology.subtree_bs_set(l.child).map(|s| s.iter().map(|&bs| demand.get(bs)).sum()).unwrap_or(0.0);
            (l.id, load)
        })
        .collect()
}

/// Least first-hop fraction that lets each link carry its load, capped at
/// `P_f`. Lowering a time variable to this value never violates the
/// interference or radio-chain rows, which only bound time from above.
fn tight_time_fractions(topology: &NetworkTopology, loads: &BTreeMap<LinkId, f64>) -> BTreeMap<LinkId, f64> {
    topology
        .links
        .iter()
        .map(|l| {
            let p = loads[&l.id] / l.rate_per_first_hop_time();
            (l.id, p.clamp(0.0, l.p_first_max))
        })
        .collect()
}

pub fn solve_equal_demand(topology: &NetworkTopology, setting: Setting) -> Result<DemandSolution, FormulationError> {
    build_equal_demand_lp(topology, setting)?.solve(topology)
}

pub fn solve_aggregate(topology: &NetworkTopology, setting: Setting) -> Result<DemandSolution, FormulationError> {
    build_aggregate_lp(topology, setting)?.solve(topology)
}

pub fn solve_fair_aggregate(
    topology: &NetworkTopology,
    setting: Setting,
    d_b_floor: f64,
) -> Result<DemandSolution, FormulationError> {
    match build_fair_aggregate_lp(topology, setting, d_b_floor)?.solve(topology) {
        Err(FormulationError::Infeasible) => Err(FormulationError::InfeasibleFloor(d_b_floor)),
        other => other,
    }
}

/// Solves for `objective`; the fair variant first solves the equal-demand LP
/// and uses its optimum as the floor.
pub fn solve_objective(
    topology: &NetworkTopology,
    setting: Setting,
    objective: Objective,
) -> Result<DemandSolution, FormulationError> {
    match objective {
        Objective::EqualDemand => solve_equal_demand(topology, setting),
        Objective::Aggregate => solve_aggregate(topology, setting),
        Objective::AggregateFair => {
            let floor = solve_equal_demand(topology, setting)?.d_b_gbps.unwrap_or(0.0);
            solve_fair_aggregate(topology, setting, floor)
        }
    }
}

/// Radio chains each base station needs to carry `p_first`: the ceiling of
/// its summed endpoint active time, at least one.
pub fn min_radio_chains(
    topology: &NetworkTopology,
    p_first: &BTreeMap<LinkId, f64>,
) -> Result<BTreeMap<BsId, u32>, FormulationError> {
    let fraction = |id: LinkId| p_first.get(&id).copied().ok_or(FormulationError::MissingLink(id));
    let mut out = BTreeMap::new();
    for s in &topology.stations {
        let mut busy = 0.0;
        for l in topology.child_links(s.id) {
            busy += fraction(l.id)?;
        }
        if let Some(inbound) = topology.inbound_link(s.id) {
            busy += inbound.last_to_first_ratio() * fraction(inbound.id)?;
        }
        let chains = (busy - CHAIN_EPS).ceil().max(1.0) as u32;
        out.insert(s.id, chains);
    }
    Ok(out)
}

/// On-disk form of a solved instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub objective: Objective,
    pub setting: SettingLabel,
    pub d_b_gbps: Option<f64>,
    pub aggregate_gbps: f64,
    pub per_bs: BTreeMap<BsId, f64>,
    pub p_first: BTreeMap<LinkId, f64>,
    pub p_last: BTreeMap<LinkId, f64>,
    pub jain_index: Option<f64>,
    pub min_radio_chains: BTreeMap<BsId, u32>,
}

impl SolutionRecord {
    pub fn new(
        solution: &DemandSolution,
        setting: SettingLabel,
        topology: &NetworkTopology,
    ) -> Result<Self, FormulationError> {
        Ok(Self {
            objective: solution.objective,
            setting,
            d_b_gbps: solution.d_b_gbps,
            aggregate_gbps: solution.per_bs_demand.aggregate,
            per_bs: solution.per_bs_demand.per_bs.clone(),
            p_first: solution.p_first.clone(),
            p_last: solution.p_last.clone(),
            jain_index: crate::validator::jain_index(&solution.per_bs_demand).ok(),
            min_radio_chains: min_radio_chains(topology, &solution.p_first)?,
        })
    }

    pub fn demand(&self) -> TrafficDemand {
        TrafficDemand::new(self.per_bs.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::DEFAULT_PHY_RATE_GBPS as PHY;
    use crate::model::fixtures::{chain, tree};
    use crate::model::LinkPair;
    use crate::model::{BaseStation, LogicalLink};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    /// Star of single-hop links at 13.3 Gbps with the given macro chain count.
    fn star(n: usize, macro_chains: u32) -> NetworkTopology {
        let mut stations = vec![BaseStation::macro_cell(0, macro_chains)];
        let mut links = Vec::new();
        for c in 1..=n {
            stations.push(BaseStation::small_cell(c, 1));
            links.push(LogicalLink::derived(c, 0, c, 1, 13.3).unwrap());
        }
        NetworkTopology::new(stations, links, [])
    }

    fn chain_at(rate: f64) -> NetworkTopology {
        let mut t = chain();
        for l in &mut t.links {
            *l = LogicalLink::derived(l.id, l.parent, l.child, 2, rate).unwrap();
        }
        t
    }

    #[test]
    fn setting_labels_parse_and_print() {
        for label in SettingLabel::standard_six() {
            assert_eq!(label.to_string().parse::<SettingLabel>().unwrap(), label);
        }
        assert_eq!("li-lr".parse::<SettingLabel>().unwrap(), SettingLabel::new(Setting::LI_LR, None));
        assert!("MI-ER(2)".parse::<SettingLabel>().is_err());
        assert!("MI-LR(0)".parse::<SettingLabel>().is_err());
        assert!("XX-ER".parse::<SettingLabel>().is_err());
        assert_eq!(serde_json::to_string(&SettingLabel::new(Setting::MI_LR, Some(2))).unwrap(), "\"MI-LR(2)\"");
        assert_eq!("aggregate_fair".parse::<Objective>().unwrap(), Objective::AggregateFair);
    }

    #[test]
    fn chain_equal_demand_case_one() {
        let t = chain_at(13.3);
        let f = build_equal_demand_lp(&t, Setting::MI_ER).unwrap();
        assert_eq!(f.lp.num_vars, 1);
        let s = f.solve(&t).unwrap();
        assert!(close(s.d_b_gbps.unwrap(), 3.325));
        // 6.65 >= 2 D on L1 binds, so L1 runs its endpoint hop for the full half frame
        assert!(close(s.p_first[&1], 0.5));
        assert!(close(s.p_first[&2], 0.25));
    }

    #[test]
    fn star_limited_macro_chain_splits_time() {
        let t = star(2, 1);
        let s = solve_equal_demand(&t, Setting::MI_LR).unwrap();
        assert!(close(s.d_b_gbps.unwrap(), 6.65));
        assert!(close(s.p_first[&1], 0.5) && close(s.p_first[&2], 0.5));
    }

    #[test]
    fn single_link_full_capacity() {
        let t = star(1, 1);
        let s = solve_equal_demand(&t, Setting::MI_ER).unwrap();
        assert!(close(s.d_b_gbps.unwrap(), 13.3));
    }

    #[test]
    fn aggregate_examples() {
        let t = chain_at(13.3);
        let s = solve_aggregate(&t, Setting::MI_ER).unwrap();
        assert!(close(s.per_bs_demand.aggregate, 6.65));
        assert!(s.per_bs_demand.get(2) <= 6.65 + 1e-9);

        assert!(close(solve_aggregate(&star(1, 1), Setting::MI_ER).unwrap().per_bs_demand.aggregate, 13.3));
        assert!(close(solve_aggregate(&star(2, 1), Setting::MI_LR).unwrap().per_bs_demand.aggregate, 13.3));
    }

    #[test]
    fn fair_aggregate_examples() {
        let t = chain_at(13.3);
        let s = solve_fair_aggregate(&t, Setting::MI_ER, 3.325).unwrap();
        assert!(close(s.per_bs_demand.aggregate, 6.65));
        assert!(close(s.per_bs_demand.get(1), 3.325) && close(s.per_bs_demand.get(2), 3.325));
        assert_eq!(s.d_b_gbps, Some(3.325));

        let zero = solve_fair_aggregate(&t, Setting::MI_ER, 0.0).unwrap();
        let plain = solve_aggregate(&t, Setting::MI_ER).unwrap();
        assert!(close(zero.per_bs_demand.aggregate, plain.per_bs_demand.aggregate));

        let mut s2 = star(2, 2);
        s2.stations[0].radio_chains = 2;
        let s = solve_fair_aggregate(&s2, Setting::MI_ER, 13.3).unwrap();
        assert!(close(s.per_bs_demand.aggregate, 26.6));

        assert_eq!(solve_fair_aggregate(&t, Setting::MI_ER, 3.4), Err(FormulationError::InfeasibleFloor(3.4)));
        assert_eq!(
            build_fair_aggregate_lp(&t, Setting::MI_ER, -1.0).unwrap_err(),
            FormulationError::NegativeFloor(-1.0)
        );
    }

    #[test]
    fn fair_objective_runs_step_one() {
        let t = chain_at(13.3);
        let s = solve_objective(&t, Setting::MI_ER, Objective::AggregateFair).unwrap();
        assert!(close(s.d_b_gbps.unwrap(), 3.325));
        assert!(close(s.per_bs_demand.aggregate, 6.65));
    }

    #[test]
    fn precondition_errors() {
        let mut t = star(3, 3);
        t.interference.insert(LinkPair::new(1, 2));
        assert_eq!(build_equal_demand_lp(&t, Setting::MI_ER).unwrap_err(), FormulationError::InterferenceNotMinimal(1));
        assert!(build_equal_demand_lp(&t, Setting::LI_ER).is_ok());

        let few = star(3, 2);
        assert_eq!(
            build_equal_demand_lp(&few, Setting::MI_ER).unwrap_err(),
            FormulationError::InsufficientRadioChains { bs: 0, have: 2, need: 3 }
        );

        let mut bad = star(2, 2);
        bad.stations.push(BaseStation::macro_cell(9, 1));
        assert!(matches!(build_aggregate_lp(&bad, Setting::MI_ER), Err(FormulationError::InvalidTopology(_))));

        let empty = NetworkTopology::new(vec![BaseStation::macro_cell(0, 1)], vec![], []);
        assert_eq!(solve_equal_demand(&empty, Setting::MI_ER).unwrap_err(), FormulationError::EmptyNetwork);
    }

    #[test]
    fn interference_row_shape() {
        let mut t = star(2, 2);
        t.interference.insert(LinkPair::new(1, 2));
        let f = build_equal_demand_lp(&t, Setting::LI_ER).unwrap();
        let row = f.lp.constraints.iter().find(|c| c.name == "intf[1,2]").unwrap();
        assert_eq!(row.relation, Relation::Le);
        assert_eq!(row.rhs, 1.0);
        assert_eq!(row.coeffs[f.time_var(1).unwrap()], 1.0);
        // two interfering single-hop links share the frame
        let s = f.solve(&t).unwrap();
        assert!(close(s.d_b_gbps.unwrap(), 6.65));
    }

    #[test]
    fn radio_rows_weight_inbound_by_fraction_ratio() {
        let mut t = tree(&[(1, 0, 2), (2, 1, 2)], 1);
        t.links[0].p_last_max = 0.25;
        let f = build_equal_demand_lp(&t, Setting::MI_LR).unwrap();
        let row = f.lp.constraints.iter().find(|c| c.name == "radio[1]").unwrap();
        assert_eq!(row.coeffs[f.time_var(1).unwrap()], 0.5);
        assert_eq!(row.coeffs[f.time_var(2).unwrap()], 1.0);
        assert_eq!(row.rhs, 1.0);
        let text = f.lp.to_lp_string();
        assert!(text.contains("p_f[1]") && text.contains("D_B"));
    }

    #[test]
    fn equal_ratio_identity_holds() {
        let mut t = tree(&[(1, 0, 3), (2, 1, 1), (3, 0, 2)], 2);
        t.links[2].p_last_max = 0.3;
        let s = solve_equal_demand(&t, Setting::MI_LR).unwrap();
        for l in &t.links {
            let lhs = s.p_last[&l.id] / l.p_last_max;
            let rhs = s.p_first[&l.id] / l.p_first_max;
            assert!(close(lhs, rhs));
            assert!(s.p_first[&l.id] <= l.p_first_max + 1e-12);
        }
    }

    #[test]
    fn radio_chain_counts() {
        // macro with 8 multi-hop children, each at 0.25
        let edges: Vec<_> = (1..=8).map(|c| (c, 0, 2)).collect();
        let t = tree(&edges, 8);
        let p: BTreeMap<_, _> = (1..=8).map(|c| (c, 0.25)).collect();
        let chains = min_radio_chains(&t, &p).unwrap();
        assert_eq!(chains[&0], 2);
        assert!((1..=8).all(|c| chains[&c] == 1));

        // inbound last-hop 0.5 plus one child at 0.6
        let t = tree(&[(1, 0, 2), (2, 1, 1)], 2);
        let p = BTreeMap::from([(1, 0.5), (2, 0.6)]);
        assert_eq!(min_radio_chains(&t, &p).unwrap()[&1], 2);

        assert_eq!(min_radio_chains(&t, &BTreeMap::from([(1, 0.5)])), Err(FormulationError::MissingLink(2)));
    }

    #[test]
    fn zero_time_still_needs_one_chain() {
        let t = tree(&[(1, 0, 2)], 1);
        let chains = min_radio_chains(&t, &BTreeMap::from([(1, 0.0)])).unwrap();
        assert_eq!(chains[&0], 1);
        assert_eq!(chains[&1], 1);
    }

    #[test]
    fn capacity_only_matches_closed_form() {
        let t = tree(&[(1, 0, 2), (2, 1, 1), (3, 1, 3), (4, 0, 1), (5, 4, 2)], 3);
        let s = solve_equal_demand(&t, Setting::MI_ER).unwrap();
        let sizes = t.subtree_sizes();
        let oracle = t.links.iter().map(|l| l.capacity_gbps / sizes[&l.child] as f64).fold(f64::INFINITY, f64::min);
        assert!(close(s.d_b_gbps.unwrap(), oracle));
        assert!(close(oracle, PHY / 2.0 / 3.0));
    }

    #[test]
    fn solution_record_json() {
        let t = chain_at(13.3);
        let s = solve_equal_demand(&t, Setting::MI_ER).unwrap();
        let rec = SolutionRecord::new(&s, SettingLabel::new(Setting::MI_ER, None), &t).unwrap();
        let v: serde_json::Value = serde_json::to_value(&rec).unwrap();
        assert_eq!(v["objective"], "equal_demand");
        assert_eq!(v["setting"], "MI-ER");
        assert_eq!(v["jain_index"], 1.0);
        assert!(v["per_bs"]["1"].is_number());
        let back: SolutionRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, rec);
    }
}
