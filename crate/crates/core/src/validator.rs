//! Independent schedule checker. Everything is recomputed from the interval
//! lists of a [`Schedule`] and the topology; the schedule's own bookkeeping
//! (endpoint ids, per-chain timelines, deviation notes) is ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BsId, LinkId, NetworkTopology, TrafficDemand};
use crate::scheduler::Schedule;

/// Tolerance on interval arithmetic.
pub const INTERVAL_TOLERANCE: f64 = 1e-9;
/// Tolerance on rate and demand comparisons.
pub const RATE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationKind {
    ChainOverlap,
    InterferenceOverlap,
    FootprintMismatch,
    ActiveOutsideFootprint,
    RatioMismatch,
    EndpointOverlap,
    CapacityShortfall,
    /// Intervals that are not finite, reversed, outside the frame, or on a
    /// chain the base station does not have.
    MalformedSchedule,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Smallest per-BS demand the schedule supports: `min_i c_i / |B_i|`.
    pub realized_d_b: f64,
    pub realized_rates: BTreeMap<LinkId, f64>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

type Span = (f64, f64);

/// Sorts and merges spans; touching spans are joined.
fn normalize(mut spans: Vec<Span>) -> Vec<Span> {
    spans.retain(|(s, e)| e > s);
    spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<Span> = Vec::with_capacity(spans.len());
    for (s, e) in spans {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn length(spans: &[Span]) -> f64 {
    normalize(spans.to_vec()).iter().map(|(s, e)| e - s).sum()
}

fn overlap(a: &[Span], b: &[Span]) -> f64 {
    let (a, b) = (normalize(a.to_vec()), normalize(b.to_vec()));
    let mut total = 0.0;
    for &(s0, e0) in &a {
        for &(s1, e1) in &b {
            total += (e0.min(e1) - s0.max(s1)).max(0.0);
        }
    }
    total
}

/// Measure of `a` not covered by `b`.
fn uncovered(a: &[Span], b: &[Span]) -> f64 {
    length(a) - overlap(a, b)
}

struct Findings(BTreeSet<Violation>);

impl Findings {
    fn add(&mut self, kind: ViolationKind, detail: String) {
        self.0.insert(Violation { kind, detail });
    }
}

/// Checks `sched` against every constraint family of the most general
/// (limited interference, limited radio chains) setting.
pub fn validate_schedule(
    topology: &NetworkTopology,
    p_first: &BTreeMap<LinkId, f64>,
    demands: &TrafficDemand,
    sched: &Schedule,
) -> ValidationReport {
    use ViolationKind::*;
    let mut found = Findings(BTreeSet::new());

    // (bs, chain) -> [(link, span)]
    let mut per_chain: BTreeMap<(BsId, usize), Vec<(LinkId, Span)>> = BTreeMap::new();
    // (link, bs) -> chain spans, for self-overlap across chains
    let mut per_end: BTreeMap<(LinkId, BsId), Vec<(usize, Span)>> = BTreeMap::new();
    let mut parent_spans: BTreeMap<LinkId, Vec<Span>> = BTreeMap::new();
    let mut child_spans: BTreeMap<LinkId, Vec<Span>> = BTreeMap::new();
    let mut footprints: BTreeMap<LinkId, Vec<Span>> = BTreeMap::new();
    let mut seen = BTreeSet::new();

    let well_formed = |s: f64, e: f64| {
        s.is_finite() && e.is_finite() && s >= -INTERVAL_TOLERANCE && e <= 1.0 + INTERVAL_TOLERANCE && s <= e
    };

    for ls in &sched.links {
        let id = ls.link_id;
        let Some(link) = topology.link(id) else {
            found.add(FootprintMismatch, format!("schedule has unknown link {id}"));
            continue;
        };
        if !seen.insert(id) {
            found.add(MalformedSchedule, format!("link {id} is scheduled more than once"));
            continue;
        }
        for iv in &ls.footprint {
            if !well_formed(iv.start, iv.end) {
                found.add(MalformedSchedule, format!("link {id} has a malformed footprint interval"));
                continue;
            }
            footprints.entry(id).or_default().push((iv.start, iv.end));
        }
        for (side, bs, store) in
            [(&ls.parent_side, link.parent, &mut parent_spans), (&ls.child_side, link.child, &mut child_spans)]
        {
            let chains = topology.station(bs).map_or(0, |s| s.radio_chains as usize);
            for ci in side {
                if !well_formed(ci.start, ci.end) {
                    found.add(MalformedSchedule, format!("link {id} has a malformed interval at base station {bs}"));
                    continue;
                }
                if ci.chain == 0 || ci.chain > chains {
                    found.add(
                        MalformedSchedule,
                        format!("link {id} uses chain {} of base station {bs}, which has {chains}", ci.chain),
                    );
                    continue;
                }
                per_chain.entry((bs, ci.chain)).or_default().push((id, (ci.start, ci.end)));
                per_end.entry((id, bs)).or_default().push((ci.chain, (ci.start, ci.end)));
                store.entry(id).or_default().push((ci.start, ci.end));
            }
        }
    }

    // one chain serves one link at a time
    for ((bs, chain), entries) in &per_chain {
        for (i, (la, a)) in entries.iter().enumerate() {
            for (lb, b) in &entries[i + 1..] {
                if a.1.min(b.1) - a.0.max(b.0) > INTERVAL_TOLERANCE {
                    let (x, y) = ((*la).min(*lb), (*la).max(*lb));
                    let who =
                        if x == y { format!("link {x} overlaps itself") } else { format!("links {x} and {y} overlap") };
                    found.add(ChainOverlap, format!("{who} on chain {chain} of base station {bs}"));
                }
            }
        }
    }
    // one link end is never on two chains at once
    for ((link, bs), entries) in &per_end {
        for (i, (ca, a)) in entries.iter().enumerate() {
            for (cb, b) in &entries[i + 1..] {
                if ca != cb && a.1.min(b.1) - a.0.max(b.0) > INTERVAL_TOLERANCE {
                    found.add(ChainOverlap, format!("link {link} is on two chains of base station {bs} at once"));
                }
            }
        }
    }

    let empty: Vec<Span> = Vec::new();
    for pair in &topology.interference {
        let fa = footprints.get(&pair.lo()).unwrap_or(&empty);
        let fb = footprints.get(&pair.hi()).unwrap_or(&empty);
        if overlap(fa, fb) > INTERVAL_TOLERANCE {
            found.add(
                InterferenceOverlap,
                format!("footprints of interfering links {} and {} overlap", pair.lo(), pair.hi()),
            );
        }
    }

    for link in &topology.links {
        let id = link.id;
        let footprint = footprints.get(&id).unwrap_or(&empty);
        let parent = parent_spans.get(&id).unwrap_or(&empty);
        let child = child_spans.get(&id).unwrap_or(&empty);
        let Some(&p) = p_first.get(&id) else {
            found.add(FootprintMismatch, format!("no time fraction given for link {id}"));
            continue;
        };
        if !seen.contains(&id) && p > INTERVAL_TOLERANCE {
            found.add(FootprintMismatch, format!("link {id} is missing from the schedule"));
            continue;
        }

        let want_footprint = p / link.p_first_max;
        if (length(footprint) - want_footprint).abs() > INTERVAL_TOLERANCE {
            found.add(
                FootprintMismatch,
                format!("link {id} footprint is {} of the frame, expected {want_footprint}", length(footprint)),
            );
        }
        if uncovered(parent, footprint) > INTERVAL_TOLERANCE || uncovered(child, footprint) > INTERVAL_TOLERANCE {
            found.add(ActiveOutsideFootprint, format!("link {id} is active outside its footprint"));
        }
        if (length(parent) - p).abs() > INTERVAL_TOLERANCE {
            found.add(
                RatioMismatch,
                format!("link {id} first hop is active {} of the frame, expected {p}", length(parent)),
            );
        }
        let want_last = p * link.last_to_first_ratio();
        if (length(child) - want_last).abs() > INTERVAL_TOLERANCE {
            found.add(
                RatioMismatch,
                format!("link {id} last hop is active {} of the frame, expected {want_last}", length(child)),
            );
        }
        if link.is_multi_hop() {
            if overlap(parent, child) > INTERVAL_TOLERANCE {
                found.add(EndpointOverlap, format!("first and last hop of link {id} overlap"));
            }
        } else if uncovered(parent, child) > INTERVAL_TOLERANCE || uncovered(child, parent) > INTERVAL_TOLERANCE {
            found.add(EndpointOverlap, format!("single-hop link {id} has different activity at its two ends"));
        }
    }

    let realized_rates: BTreeMap<LinkId, f64> = topology
        .links
        .iter()
        .map(|link| {
            let first = length(parent_spans.get(&link.id).unwrap_or(&empty));
            let last = length(child_spans.get(&link.id).unwrap_or(&empty));
            (link.id, (first / link.p_first_max).min(last / link.p_last_max) * link.capacity_gbps)
        })
        .collect();

    let mut realized_d_b = f64::INFINITY;
    for link in &topology.links {
        let Ok(subtree) = topology.subtree_bs_set(link.child) else { continue };
        let rate = realized_rates[&link.id];
        let load: f64 = subtree.iter().map(|&bs| demands.get(bs)).sum();
        if rate < load - RATE_TOLERANCE {
            found.add(CapacityShortfall, format!("link {} carries {rate} Gbps but its subtree needs {load}", link.id));
        }
        realized_d_b = realized_d_b.min(rate / subtree.len() as f64);
    }
    if !realized_d_b.is_finite() {
        realized_d_b = 0.0;
    }

    ValidationReport { violations: found.0.into_iter().collect(), realized_d_b, realized_rates }
}

#[derive(Debug, Error, PartialEq)]
pub enum FairnessError {
    #[error("no base stations to compare")]
    Empty,
    #[error("all demands are zero")]
    AllZeroDemands,
    #[error("demand {0} is negative or not finite")]
    InvalidDemand(f64),
}

/// Jain's fairness index `(sum D)^2 / (n * sum D^2)` over the per-BS demands.
/// Exactly 1.0 when every demand is the same.
pub fn jain_index(demands: &TrafficDemand) -> Result<f64, FairnessError> {
    let values: Vec<f64> = demands.per_bs.values().copied().collect();
    if values.is_empty() {
        return Err(FairnessError::Empty);
    }
    if let Some(&bad) = values.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return Err(FairnessError::InvalidDemand(bad));
    }
    if values.iter().all(|&d| d == 0.0) {
        return Err(FairnessError::AllZeroDemands);
    }
    if values.iter().all(|&d| d == values[0]) {
        return Ok(1.0);
    }
    let sum: f64 = values.iter().sum();
    let squares: f64 = values.iter().map(|d| d * d).sum();
    Ok((sum * sum / (values.len() as f64 * squares)).min(1.0))
}
