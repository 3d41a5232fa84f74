//! Backhaul network model: base stations, logical links and the
//! limited-interference relation between links that share a base station.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{self, CapacityError};

pub type BsId = usize;
pub type LinkId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown base station {0}")]
    UnknownBs(BsId),
    #[error("base station {0} is the macro cell, expected a small cell")]
    NotSmallCell(BsId),
    #[error("unknown logical link {0}")]
    UnknownLink(LinkId),
    #[error("link {link}: {source}")]
    Capacity {
        link: LinkId,
        #[source]
        source: CapacityError,
    },
    #[error("malformed topology JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BsKind {
    Macro,
    Small,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseStation {
    pub id: BsId,
    pub kind: BsKind,
    /// Number of half-duplex radio chains.
    pub radio_chains: u32,
}

impl BaseStation {
    pub fn macro_cell(id: BsId, radio_chains: u32) -> Self {
        Self { id, kind: BsKind::Macro, radio_chains }
    }

    pub fn small_cell(id: BsId, radio_chains: u32) -> Self {
        Self { id, kind: BsKind::Small, radio_chains }
    }

    pub fn is_macro(&self) -> bool {
        self.kind == BsKind::Macro
    }
}

/// Directed end-to-end connection from `parent` to `child`, either a single
/// line-of-sight hop or a relay path. The link id equals the child's BS id.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicalLink {
    pub id: LinkId,
    pub parent: BsId,
    pub child: BsId,
    pub hop_count: u32,
    pub phy_rate_gbps: f64,
    /// Maximum end-to-end capacity under the optimal intra-path schedule.
    pub capacity_gbps: f64,
    /// Fraction of the frame the first physical link is active at full capacity.
    pub p_first_max: f64,
    /// Fraction of the frame the last physical link is active at full capacity.
    pub p_last_max: f64,
}

impl LogicalLink {
    /// Builds a link whose capacity and endpoint fractions are derived from
    /// its hop count and physical rate.
    pub fn derived(
        id: LinkId,
        parent: BsId,
        child: BsId,
        hop_count: u32,
        phy_rate_gbps: f64,
    ) -> Result<Self, ModelError> {
        let profile = capacity::link_profile(hop_count, phy_rate_gbps)
            .map_err(|source| ModelError::Capacity { link: id, source })?;
        Ok(Self {
            id,
            parent,
            child,
            hop_count,
            phy_rate_gbps,
            capacity_gbps: profile.capacity_gbps,
            p_first_max: profile.p_first_max,
            p_last_max: profile.p_last_max,
        })
    }

    pub fn is_multi_hop(&self) -> bool {
        self.hop_count >= 2
    }

    /// Capacity delivered per unit of first-hop active time, `C_i / P_i^f`.
    pub fn rate_per_first_hop_time(&self) -> f64 {
        self.capacity_gbps / self.p_first_max
    }

    /// `P_i^l / P_i^f`, the factor mapping first-hop time to last-hop time.
    pub fn last_to_first_ratio(&self) -> f64 {
        self.p_last_max / self.p_first_max
    }
}

/// Unordered pair of mutually interfering links, stored with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkPair {
    lo: LinkId,
    hi: LinkId,
}

impl LinkPair {
    pub fn new(a: LinkId, b: LinkId) -> Self {
        Self { lo: a.min(b), hi: a.max(b) }
    }

    pub fn lo(&self) -> LinkId {
        self.lo
    }

    pub fn hi(&self) -> LinkId {
        self.hi
    }

    pub fn contains(&self, link: LinkId) -> bool {
        self.lo == link || self.hi == link
    }

    pub fn other(&self, link: LinkId) -> Option<LinkId> {
        if self.lo == link {
            Some(self.hi)
        } else if self.hi == link {
            Some(self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for LinkPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeViolation {
    NoMacro,
    DuplicateMacro(BsId),
    DuplicateStation(BsId),
    ZeroRadioChains(BsId),
    UnknownEndpoint {
        link: LinkId,
        bs: BsId,
    },
    LinkIdMismatch {
        link: LinkId,
        child: BsId,
    },
    InboundToMacro(LinkId),
    /// A base station with more than one inbound link.
    NotATree(BsId),
    /// A small cell with no path from the macro cell.
    Unreachable(BsId),
    InvalidLinkParameters(LinkId),
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoMacro => write!(f, "no macro-cell base station"),
            Self::DuplicateMacro(id) => write!(f, "second macro-cell base station {id}"),
            Self::DuplicateStation(id) => write!(f, "base station id {id} used twice"),
            Self::ZeroRadioChains(id) => write!(f, "base station {id} has no radio chain"),
            Self::UnknownEndpoint { link, bs } => {
                write!(f, "link {link} references unknown base station {bs}")
            }
            Self::LinkIdMismatch { link, child } => {
                write!(f, "link {link} must carry the id of its child {child}")
            }
            Self::InboundToMacro(link) => write!(f, "link {link} points into the macro cell"),
            Self::NotATree(id) => write!(f, "base station {id} has more than one inbound link"),
            Self::Unreachable(id) => write!(f, "base station {id} is not reachable from the macro cell"),
            Self::InvalidLinkParameters(link) => {
                write!(f, "link {link} has invalid capacity or schedule fractions")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterferenceViolation {
    SelfPair(LinkId),
    UnknownLink(LinkId),
    NoSharedEndpoint(LinkPair),
    TooManyPartnersAtBs { bs: BsId, link: LinkId },
}

impl fmt::Display for InterferenceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SelfPair(l) => write!(f, "link {l} listed as interfering with itself"),
            Self::UnknownLink(l) => write!(f, "interference pair names unknown link {l}"),
            Self::NoSharedEndpoint(p) => write!(f, "links {p} share no base station"),
            Self::TooManyPartnersAtBs { bs, link } => {
                write!(f, "link {link} has more than one interference partner at base station {bs}")
            }
        }
    }
}

/// Per-small-cell traffic demand and its aggregate at the macro cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficDemand {
    pub per_bs: BTreeMap<BsId, f64>,
    pub aggregate: f64,
}

impl TrafficDemand {
    pub fn new(per_bs: BTreeMap<BsId, f64>) -> Self {
        let aggregate = per_bs.values().sum();
        Self { per_bs, aggregate }
    }

    pub fn uniform(ids: impl IntoIterator<Item = BsId>, demand: f64) -> Self {
        Self::new(ids.into_iter().map(|id| (id, demand)).collect())
    }

    pub fn get(&self, bs: BsId) -> f64 {
        self.per_bs.get(&bs).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyFile", into = "TopologyFile")]
pub struct NetworkTopology {
    pub stations: Vec<BaseStation>,
    pub links: Vec<LogicalLink>,
    pub interference: BTreeSet<LinkPair>,
}

impl NetworkTopology {
    pub fn new(
        stations: Vec<BaseStation>,
        mut links: Vec<LogicalLink>,
        interference: impl IntoIterator<Item = LinkPair>,
    ) -> Self {
        links.sort_by_key(|l| l.id);
        Self { stations, links, interference: interference.into_iter().collect() }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: TopologyFile = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        Self::try_from(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology serializes")
    }

    pub fn macro_station(&self) -> Option<&BaseStation> {
        self.stations.iter().find(|s| s.is_macro())
    }

    pub fn macro_id(&self) -> Option<BsId> {
        self.macro_station().map(|s| s.id)
    }

    pub fn station(&self, id: BsId) -> Option<&BaseStation> {
        self.stations.iter().find(|s| s.id == id)
    }

    pub fn link(&self, id: LinkId) -> Option<&LogicalLink> {
        self.links.iter().find(|l| l.id == id)
    }

    /// Small-cell ids in ascending order.
    pub fn small_cells(&self) -> Vec<BsId> {
        let mut ids: Vec<BsId> = self.stations.iter().filter(|s| !s.is_macro()).map(|s| s.id).collect();
        ids.sort_unstable();
        ids
    }

    pub fn num_small_cells(&self) -> usize {
        self.stations.iter().filter(|s| !s.is_macro()).count()
    }

    pub fn inbound_link(&self, bs: BsId) -> Option<&LogicalLink> {
        self.links.iter().find(|l| l.child == bs)
    }

    /// Outbound links of `bs`, ascending by link id.
    pub fn child_links(&self, bs: BsId) -> impl Iterator<Item = &LogicalLink> {
        self.links.iter().filter(move |l| l.parent == bs)
    }

    pub fn interferes(&self, a: LinkId, b: LinkId) -> bool {
        self.interference.contains(&LinkPair::new(a, b))
    }

    /// The base station both links attach to, if any.
    pub fn shared_station(&self, a: LinkId, b: LinkId) -> Option<BsId> {
        let (la, lb) = (self.link(a)?, self.link(b)?);
        [la.parent, la.child].into_iter().find(|&bs| bs == lb.parent || bs == lb.child)
    }

    /// The link interfering with `link` at base station `bs`, if any.
    pub fn partner_at(&self, link: LinkId, bs: BsId) -> Option<LinkId> {
        self.interference
            .iter()
            .filter_map(|p| p.other(link))
            .find(|&other| self.shared_station(link, other) == Some(bs))
    }

    /// Same network with every interference pair removed.
    pub fn without_interference(&self) -> Self {
        Self { interference: BTreeSet::new(), ..self.clone() }
    }

    /// Small cells in the subtree rooted at `bs`, including `bs` itself.
    pub fn subtree_bs_set(&self, bs: BsId) -> Result<BTreeSet<BsId>, ModelError> {
        let station = self.station(bs).ok_or(ModelError::UnknownBs(bs))?;
        if station.is_macro() {
            return Err(ModelError::NotSmallCell(bs));
        }
        let mut set = BTreeSet::new();
        let mut stack = vec![bs];
        while let Some(cur) = stack.pop() {
            if !set.insert(cur) {
                continue;
            }
            stack.extend(self.child_links(cur).map(|l| l.child));
        }
        Ok(set)
    }

    /// Subtree sizes `|B_i|` for every small cell.
    pub fn subtree_sizes(&self) -> BTreeMap<BsId, usize> {
        self.small_cells().into_iter().map(|id| (id, self.subtree_bs_set(id).map(|s| s.len()).unwrap_or(0))).collect()
    }

    /// Links attached to `bs`: the inbound link (small cells only) plus all
    /// outbound links.
    pub fn attached_links(&self, bs: BsId) -> Result<BTreeSet<LinkId>, ModelError> {
        if self.station(bs).is_none() {
            return Err(ModelError::UnknownBs(bs));
        }
        Ok(self.links.iter().filter(|l| l.parent == bs || l.child == bs).map(|l| l.id).collect())
    }

    /// Structural check: one macro cell, and links forming a tree rooted there
    /// that spans every small cell. An empty result means valid.
    pub fn validate_tree(&self) -> Vec<TreeViolation> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut macro_seen = false;
        for s in &self.stations {
            if !seen.insert(s.id) {
                out.push(TreeViolation::DuplicateStation(s.id));
            }
            if s.is_macro() {
                if macro_seen {
                    out.push(TreeViolation::DuplicateMacro(s.id));
                }
                macro_seen = true;
            }
            if s.radio_chains == 0 {
                out.push(TreeViolation::ZeroRadioChains(s.id));
            }
        }
        if !macro_seen {
            out.push(TreeViolation::NoMacro);
        }

        let mut inbound: BTreeMap<BsId, usize> = BTreeMap::new();
        for l in &self.links {
            for bs in [l.parent, l.child] {
                if !seen.contains(&bs) {
                    out.push(TreeViolation::UnknownEndpoint { link: l.id, bs });
                }
            }
            if l.id != l.child {
                out.push(TreeViolation::LinkIdMismatch { link: l.id, child: l.child });
            }
            if self.station(l.child).is_some_and(|s| s.is_macro()) {
                out.push(TreeViolation::InboundToMacro(l.id));
            }
            if !link_parameters_valid(l) {
                out.push(TreeViolation::InvalidLinkParameters(l.id));
            }
            *inbound.entry(l.child).or_default() += 1;
        }
        for (&bs, &count) in &inbound {
            if count > 1 {
                out.push(TreeViolation::NotATree(bs));
            }
        }

        if let Some(root) = self.macro_id() {
            let mut reached = BTreeSet::from([root]);
            let mut queue = VecDeque::from([root]);
            while let Some(cur) = queue.pop_front() {
                for l in self.child_links(cur) {
                    if reached.insert(l.child) {
                        queue.push_back(l.child);
                    }
                }
            }
            let mut unreachable: BTreeSet<BsId> = BTreeSet::new();
            for s in &self.stations {
                if !s.is_macro() && !reached.contains(&s.id) {
                    unreachable.insert(s.id);
                }
            }
            out.extend(unreachable.into_iter().map(TreeViolation::Unreachable));
        }
        out
    }

    /// Checks the limited-interference model: interfering links share a base
    /// station, and at each base station a link has at most one partner.
    pub fn validate_interference_model(&self) -> Vec<InterferenceViolation> {
        let mut out = Vec::new();
        // (bs, link) -> number of partners at bs
        let mut partners: BTreeMap<(BsId, LinkId), usize> = BTreeMap::new();
        for pair in &self.interference {
            if pair.lo == pair.hi {
                out.push(InterferenceViolation::SelfPair(pair.lo));
                continue;
            }
            let mut known = true;
            for id in [pair.lo, pair.hi] {
                if self.link(id).is_none() {
                    out.push(InterferenceViolation::UnknownLink(id));
                    known = false;
                }
            }
            if !known {
                continue;
            }
            match self.shared_station(pair.lo, pair.hi) {
                None => out.push(InterferenceViolation::NoSharedEndpoint(*pair)),
                Some(bs) => {
                    *partners.entry((bs, pair.lo)).or_default() += 1;
                    *partners.entry((bs, pair.hi)).or_default() += 1;
                }
            }
        }
        for ((bs, link), n) in partners {
            if n > 1 {
                out.push(InterferenceViolation::TooManyPartnersAtBs { bs, link });
            }
        }
        out
    }

    /// Both validators passed.
    pub fn is_valid(&self) -> bool {
        self.validate_tree().is_empty() && self.validate_interference_model().is_empty()
    }
}

fn link_parameters_valid(l: &LogicalLink) -> bool {
    let in_unit = |p: f64| p > 0.0 && p <= 1.0;
    let fractions_ok = in_unit(l.p_first_max) && in_unit(l.p_last_max);
    let single_hop_ok = l.hop_count != 1 || (l.p_first_max == 1.0 && l.p_last_max == 1.0);
    l.hop_count >= 1 && l.capacity_gbps > 0.0 && l.capacity_gbps.is_finite() && fractions_ok && single_hop_ok
}

/// On-disk form of a topology. Capacities and schedule fractions are derived
/// from `hops` and `phy_rate_gbps` unless explicitly overridden.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopologyFile {
    pub stations: Vec<BaseStation>,
    pub links: Vec<LinkRecord>,
    #[serde(default)]
    pub interference: Vec<[LinkId; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkRecord {
    pub id: LinkId,
    pub parent: BsId,
    pub child: BsId,
    pub hops: u32,
    pub phy_rate_gbps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_gbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_first_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_last_max: Option<f64>,
}

impl TryFrom<TopologyFile> for NetworkTopology {
    type Error = ModelError;

    fn try_from(file: TopologyFile) -> Result<Self, Self::Error> {
        let links = file
            .links
            .into_iter()
            .map(|r| {
                let mut link = LogicalLink::derived(r.id, r.parent, r.child, r.hops, r.phy_rate_gbps)?;
                if let Some(c) = r.capacity_gbps {
                    link.capacity_gbps = c;
                }
                if let Some(p) = r.p_first_max {
                    link.p_first_max = p;
                }
                if let Some(p) = r.p_last_max {
                    link.p_last_max = p;
                }
                Ok(link)
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let pairs = file.interference.into_iter().map(|[a, b]| LinkPair::new(a, b));
        Ok(NetworkTopology::new(file.stations, links, pairs))
    }
}

impl From<NetworkTopology> for TopologyFile {
    fn from(t: NetworkTopology) -> Self {
        let links = t
            .links
            .into_iter()
            .map(|l| {
                let derived = capacity::link_profile(l.hop_count, l.phy_rate_gbps).ok();
                let differs = |a: f64, b: Option<f64>| b.map_or(true, |b| a != b);
                LinkRecord {
                    id: l.id,
                    parent: l.parent,
                    child: l.child,
                    hops: l.hop_count,
                    phy_rate_gbps: l.phy_rate_gbps,
                    capacity_gbps: differs(l.capacity_gbps, derived.map(|d| d.capacity_gbps))
                        .then_some(l.capacity_gbps),
                    p_first_max: differs(l.p_first_max, derived.map(|d| d.p_first_max)).then_some(l.p_first_max),
                    p_last_max: differs(l.p_last_max, derived.map(|d| d.p_last_max)).then_some(l.p_last_max),
                }
            })
            .collect();
        TopologyFile {
            stations: t.stations,
            links,
            interference: t.interference.into_iter().map(|p| [p.lo, p.hi]).collect(),
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::capacity::DEFAULT_PHY_RATE_GBPS;

    pub fn link(id: LinkId, parent: BsId, hops: u32) -> LogicalLink {
        LogicalLink::derived(id, parent, id, hops, DEFAULT_PHY_RATE_GBPS).unwrap()
    }

    /// Macro 0 with children listed as (child, parent, hops); every BS gets
    /// `chains` radio chains.
    pub fn tree(edges: &[(BsId, BsId, u32)], chains: u32) -> NetworkTopology {
        let mut stations = vec![BaseStation::macro_cell(0, chains)];
        stations.extend(edges.iter().map(|&(c, _, _)| BaseStation::small_cell(c, chains)));
        let links = edges.iter().map(|&(c, p, h)| link(c, p, h)).collect();
        NetworkTopology::new(stations, links, [])
    }

    /// Chain M -> B1 -> B2, both multi-hop.
    pub fn chain() -> NetworkTopology {
        tree(&[(1, 0, 2), (2, 1, 2)], 2)
    }

    /// Star M -> {B1, B2, B3}, single hop.
    pub fn star3() -> NetworkTopology {
        tree(&[(1, 0, 1), (2, 0, 1), (3, 0, 1)], 3)
    }
}
