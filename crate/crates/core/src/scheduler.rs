//! Depth-first construction of per-radio-chain schedules that realize a set
//! of first-hop time fractions `{p_f}`.
//!
//! Starting at the macro cell, each base station inherits the schedule of
//! its inbound link from its parent and decides the schedules of its child
//! links, in this order:
//!
//! 1. the inbound link's last-hop activity goes on the first chain;
//! 2. a child link interfering with the inbound link is placed on the first chain,
//!    outside the inbound link's footprint;
//! 3. child links without an interfering sibling are packed onto chains in
//!    order, spilling to the next chain without overlapping themselves;
//! 4. interfering sibling pairs are packed the same way, then each gets
//!    pause time disjoint from its partner.
//!
//! A link's footprint is its first-hop active time plus its pause time, the
//! period during which relay hops not attached to the parent run. Pause time
//! is drawn first from periods where other links at the same base station
//! are active.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BsId, LinkId, NetworkTopology};
use crate::timeline::{to_fraction, to_ticks, IntervalSet};

/// Placement shortfall tolerated as solver round-off (1e-10 of the frame).
const SLACK_TICKS: i64 = 100;

#[derive(Debug, Error, PartialEq)]
pub enum SchedulerError {
    #[error("invalid topology: {}", .0.join("; "))]
    InvalidTopology(Vec<String>),
    #[error("no time fraction given for link {0}")]
    MissingLink(LinkId),
    #[error("link {link}: {detail}")]
    InconsistentInput { link: LinkId, detail: String },
    #[error("could not place link {link} at base station {bs}: {missing} of the frame left over")]
    PlacementFailure { link: LinkId, bs: BsId, missing: f64 },
    #[error("link {0} was reached before its parent scheduled it")]
    OrderViolation(LinkId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    /// The first hop is active at the parent base station.
    Active,
    /// Only hops away from the parent base station are active.
    Pause,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub start: f64,
    pub end: f64,
    pub kind: IntervalKind,
}

/// Activity of one link end on a radio chain of the base station at that
/// end. Chains are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainInterval {
    pub chain: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSchedule {
    pub link_id: LinkId,
    pub parent: BsId,
    pub child: BsId,
    pub footprint: Vec<TimeInterval>,
    /// First-hop activity at the parent.
    pub parent_side: Vec<ChainInterval>,
    /// Last-hop activity at the child.
    pub child_side: Vec<ChainInterval>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSlot {
    pub link: LinkId,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTimeline {
    pub bs: BsId,
    pub chain: usize,
    pub slots: Vec<ChainSlot>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub links: Vec<LinkSchedule>,
    /// Active periods per (base station, chain), sorted by start.
    pub chains: Vec<ChainTimeline>,
    /// Places where the construction had to leave the preferred chain.
    #[serde(default)]
    pub deviations: Vec<String>,
}

impl Schedule {
    pub fn link(&self, id: LinkId) -> Option<&LinkSchedule> {
        self.links.iter().find(|l| l.link_id == id)
    }

    pub fn link_mut(&mut self, id: LinkId) -> Option<&mut LinkSchedule> {
        self.links.iter_mut().find(|l| l.link_id == id)
    }
}

#[derive(Debug, Clone)]
struct Placement {
    /// First-hop activity per chain at the parent.
    active: Vec<(usize, IntervalSet)>,
    footprint: IntervalSet,
    child_side: IntervalSet,
}

impl Placement {
    fn active_union(&self) -> IntervalSet {
        self.active.iter().fold(IntervalSet::new(), |acc, (_, s)| acc.union(s))
    }
}

struct Builder<'a> {
    topology: &'a NetworkTopology,
    p_first: BTreeMap<LinkId, f64>,
    occupied: BTreeMap<BsId, Vec<IntervalSet>>,
    placed: BTreeMap<LinkId, Placement>,
    deviations: Vec<String>,
}

/// Builds a schedule realizing `p_first` on `topology`'s radio chains.
pub fn schedule(topology: &NetworkTopology, p_first: &BTreeMap<LinkId, f64>) -> Result<Schedule, SchedulerError> {
    let mut problems: Vec<String> = topology.validate_tree().iter().map(|v| v.to_string()).collect();
    problems.extend(topology.validate_interference_model().iter().map(|v| v.to_string()));
    if !problems.is_empty() {
        return Err(SchedulerError::InvalidTopology(problems));
    }
    for link in &topology.links {
        let p = *p_first.get(&link.id).ok_or(SchedulerError::MissingLink(link.id))?;
        let bad = |detail: String| Err(SchedulerError::InconsistentInput { link: link.id, detail });
        if !p.is_finite() || p < -1e-12 {
            return bad(format!("time fraction {p} is not a non-negative number"));
        }
        if p > link.p_first_max + 1e-9 {
            return bad(format!("time fraction {p} exceeds its maximum {}", link.p_first_max));
        }
        if link.is_multi_hop() && link.p_first_max + link.p_last_max > 1.0 + 1e-12 {
            return bad("endpoint hops cannot be kept apart when P_f + P_l > 1".to_string());
        }
    }
    let Some(root) = topology.macro_id() else {
        return Ok(Schedule::default());
    };

    let mut b = Builder {
        topology,
        p_first: p_first.iter().map(|(&k, &v)| (k, v.max(0.0))).collect(),
        occupied: topology.stations.iter().map(|s| (s.id, vec![IntervalSet::new(); s.radio_chains as usize])).collect(),
        placed: BTreeMap::new(),
        deviations: Vec::new(),
    };

    let mut stack = vec![root];
    while let Some(current) = stack.pop() {
        stack.extend(topology.child_links(current).map(|l| l.child));
        b.schedule_station(current)?;
    }
    Ok(b.finish())
}

impl Builder<'_> {
    fn schedule_station(&mut self, bs: BsId) -> Result<(), SchedulerError> {
        let topology = self.topology;
        let mut pending: Vec<LinkId> = topology.child_links(bs).map(|l| l.id).collect();

        if let Some(inbound) = topology.inbound_link(bs) {
            let parent_plan = self.placed.get(&inbound.id).ok_or(SchedulerError::OrderViolation(inbound.id))?;
            let inbound_footprint = parent_plan.footprint.clone();
            let last_hop = parent_plan.child_side.clone();
            self.occupied.get_mut(&bs).unwrap()[0] = last_hop;

            if let Some(partner) = topology.partner_at(inbound.id, bs).filter(|p| pending.contains(p)) {
                let active = self.pack(bs, partner, &inbound_footprint)?;
                if active.iter().any(|(chain, _)| *chain != 0) {
                    self.deviations.push(format!(
                        "link {partner} interferes with inbound link {} at base station {bs} and did not fit on its first chain",
                        inbound.id
                    ));
                }
                self.finish_link(bs, partner, active, &inbound_footprint)?;
                pending.retain(|&l| l != partner);
            }
        }

        let (lonely, paired): (Vec<LinkId>, Vec<LinkId>) =
            pending.into_iter().partition(|&l| topology.partner_at(l, bs).is_none());
        for link in lonely {
            let active = self.pack(bs, link, &IntervalSet::new())?;
            self.finish_link(bs, link, active, &IntervalSet::new())?;
        }

        for &first in &paired {
            if self.placed.contains_key(&first) {
                continue;
            }
            let second = topology.partner_at(first, bs).expect("paired link has a partner");
            let first_active = self.pack(bs, first, &IntervalSet::new())?;
            let first_union = union_of(&first_active);
            let second_active = self.pack(bs, second, &first_union)?;
            let second_union = union_of(&second_active);
            self.finish_link(bs, first, first_active, &second_union)?;
            let first_footprint = self.placed[&first].footprint.clone();
            self.finish_link(bs, second, second_active, &first_footprint)?;
        }
        Ok(())
    }

    /// First-hop activity for `link`: free time on the lowest chains first,
    /// never overlapping `forbidden` or the link's own time on other chains.
    fn pack(
        &mut self,
        bs: BsId,
        link: LinkId,
        forbidden: &IntervalSet,
    ) -> Result<Vec<(usize, IntervalSet)>, SchedulerError> {
        let mut left = to_ticks(self.p_first[&link]);
        let mut own = IntervalSet::new();
        let mut out = Vec::new();
        for (chain, busy) in self.occupied.get_mut(&bs).unwrap().iter_mut().enumerate() {
            if left <= 0 {
                break;
            }
            let taken = busy.complement().difference(forbidden).difference(&own).take_first(left);
            if taken.is_empty() {
                continue;
            }
            *busy = busy.union(&taken);
            own = own.union(&taken);
            left -= taken.measure();
            out.push((chain, taken));
        }
        if left > SLACK_TICKS {
            return Err(SchedulerError::PlacementFailure { link, bs, missing: to_fraction(left) });
        }
        Ok(out)
    }

    /// Completes the footprint with pause time outside `avoid` and derives
    /// the last-hop activity at the child.
    fn finish_link(
        &mut self,
        bs: BsId,
        link_id: LinkId,
        active: Vec<(usize, IntervalSet)>,
        avoid: &IntervalSet,
    ) -> Result<(), SchedulerError> {
        let link = self.topology.link(link_id).unwrap();
        let p = self.p_first[&link_id];
        let active_union = union_of(&active);

        let (footprint, child_side) = if link.is_multi_hop() {
            let pause_len = to_ticks(p / link.p_first_max) - to_ticks(p);
            let allowed = active_union.union(avoid).complement();
            let others_busy =
                self.occupied[&bs].iter().fold(IntervalSet::new(), |acc, s| acc.union(s)).difference(&active_union);
            let reused = allowed.intersect(&others_busy).take_first(pause_len);
            let rest = allowed.difference(&others_busy).take_first(pause_len - reused.measure());
            let pause = reused.union(&rest);
            let missing = pause_len - pause.measure();
            if missing > SLACK_TICKS {
                return Err(SchedulerError::PlacementFailure { link: link_id, bs, missing: to_fraction(missing) });
            }
            let child_side = pause.take_first(to_ticks(p * link.last_to_first_ratio()));
            (active_union.union(&pause), child_side)
        } else {
            (active_union.clone(), active_union)
        };
        self.placed.insert(link_id, Placement { active, footprint, child_side });
        Ok(())
    }

    fn finish(self) -> Schedule {
        let mut links = Vec::new();
        let mut timelines: BTreeMap<(BsId, usize), Vec<ChainSlot>> = BTreeMap::new();
        for (&id, plan) in &self.placed {
            let link = self.topology.link(id).unwrap();
            let active = plan.active_union();
            let mut footprint: Vec<TimeInterval> = active
                .spans()
                .iter()
                .map(|&(s, e)| (s, e, IntervalKind::Active))
                .chain(plan.footprint.difference(&active).spans().iter().map(|&(s, e)| (s, e, IntervalKind::Pause)))
                .map(|(s, e, kind)| TimeInterval { start: to_fraction(s), end: to_fraction(e), kind })
                .collect();
            footprint.sort_by(|a, b| a.start.total_cmp(&b.start));

            let parent_side: Vec<ChainInterval> = plan
                .active
                .iter()
                .flat_map(|(chain, set)| {
                    set.spans().iter().map(move |&(s, e)| ChainInterval {
                        chain: chain + 1,
                        start: to_fraction(s),
                        end: to_fraction(e),
                    })
                })
                .collect();
            let child_side: Vec<ChainInterval> = plan
                .child_side
                .spans()
                .iter()
                .map(|&(s, e)| ChainInterval { chain: 1, start: to_fraction(s), end: to_fraction(e) })
                .collect();

            for ci in &parent_side {
                timelines.entry((link.parent, ci.chain)).or_default().push(ChainSlot {
                    link: id,
                    start: ci.start,
                    end: ci.end,
                });
            }
            for ci in &child_side {
                timelines.entry((link.child, ci.chain)).or_default().push(ChainSlot {
                    link: id,
                    start: ci.start,
                    end: ci.end,
                });
            }
            links.push(LinkSchedule {
                link_id: id,
                parent: link.parent,
                child: link.child,
                footprint,
                parent_side,
                child_side,
            });
        }
        let chains = timelines
            .into_iter()
            .map(|((bs, chain), mut slots)| {
                slots.sort_by(|a, b| a.start.total_cmp(&b.start));
                ChainTimeline { bs, chain, slots }
            })
            .collect();
        Schedule { links, chains, deviations: self.deviations }
    }
}

fn union_of(parts: &[(usize, IntervalSet)]) -> IntervalSet {
    parts.iter().fold(IntervalSet::new(), |acc, (_, s)| acc.union(s))
}

/// Total length of a list of possibly overlapping intervals.
fn covered_length(mut spans: Vec<(f64, f64)>) -> f64 {
    spans.retain(|(s, e)| e > s);
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (s, e) in spans {
        match current {
            Some((cs, ce)) if s <= ce => current = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                current = Some((s, e));
            }
            None => current = Some((s, e)),
        }
    }
    total + current.map_or(0.0, |(s, e)| e - s)
}

/// Average end-to-end rate each link achieves under `sched`:
/// `min(p_f / P_f, p_l / P_l) * C` with both fractions measured from the
/// schedule's intervals. Links absent from the schedule get zero.
pub fn achieved_rates(topology: &NetworkTopology, sched: &Schedule) -> BTreeMap<LinkId, f64> {
    topology
        .links
        .iter()
        .map(|link| {
            let rate = sched.link(link.id).map_or(0.0, |ls| {
                let first = covered_length(ls.parent_side.iter().map(|c| (c.start, c.end)).collect());
                let last = covered_length(ls.child_side.iter().map(|c| (c.start, c.end)).collect());
                (first / link.p_first_max).min(last / link.p_last_max) * link.capacity_gbps
            });
            (link.id, rate)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::tree;
    use crate::model::{BaseStation, LinkPair, LogicalLink};

    fn star(hops: u32, n: usize, macro_chains: u32) -> NetworkTopology {
        let mut stations = vec![BaseStation::macro_cell(0, macro_chains)];
        let mut links = Vec::new();
        for c in 1..=n {
            stations.push(BaseStation::small_cell(c, 1));
            links.push(LogicalLink::derived(c, 0, c, hops, 13.3).unwrap());
        }
        NetworkTopology::new(stations, links, [])
    }

    fn spans(v: &[ChainInterval]) -> Vec<(usize, f64, f64)> {
        v.iter().map(|c| (c.chain, c.start, c.end)).collect()
    }

    #[test]
    fn two_link_star_on_one_chain() {
        let t = star(1, 2, 1);
        let s = schedule(&t, &BTreeMap::from([(1, 0.5), (2, 0.5)])).unwrap();
        assert_eq!(spans(&s.link(1).unwrap().parent_side), vec![(1, 0.0, 0.5)]);
        assert_eq!(spans(&s.link(2).unwrap().parent_side), vec![(1, 0.5, 1.0)]);
        assert_eq!(s.link(1).unwrap().parent_side, s.link(1).unwrap().child_side);
        let macro_chain = s.chains.iter().find(|c| c.bs == 0 && c.chain == 1).unwrap();
        assert_eq!(macro_chain.slots.iter().map(|x| x.link).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn single_multi_hop_link_full_frame() {
        let t = star(3, 1, 1);
        let s = schedule(&t, &BTreeMap::from([(1, 0.5)])).unwrap();
        let ls = s.link(1).unwrap();
        assert_eq!(
            ls.footprint,
            vec![
                TimeInterval { start: 0.0, end: 0.5, kind: IntervalKind::Active },
                TimeInterval { start: 0.5, end: 1.0, kind: IntervalKind::Pause },
            ]
        );
        assert_eq!(spans(&ls.parent_side), vec![(1, 0.0, 0.5)]);
        assert_eq!(spans(&ls.child_side), vec![(1, 0.5, 1.0)]);
    }

    #[test]
    fn macro_only_gives_empty_schedule() {
        let t = NetworkTopology::new(vec![BaseStation::macro_cell(0, 1)], vec![], []);
        let s = schedule(&t, &BTreeMap::new()).unwrap();
        assert!(s.links.is_empty() && s.chains.is_empty());
    }

    #[test]
    fn input_errors() {
        let t = star(2, 2, 1);
        assert_eq!(schedule(&t, &BTreeMap::from([(1, 0.3)])), Err(SchedulerError::MissingLink(2)));
        assert!(matches!(
            schedule(&t, &BTreeMap::from([(1, 0.6), (2, 0.1)])),
            Err(SchedulerError::InconsistentInput { link: 1, .. })
        ));
        // both multi-hop links want 0.5 of a single chain plus pause: fine;
        // three of them cannot share one chain
        let t3 = star(2, 3, 1);
        assert!(matches!(
            schedule(&t3, &BTreeMap::from([(1, 0.5), (2, 0.5), (3, 0.5)])),
            Err(SchedulerError::PlacementFailure { link: 3, bs: 0, .. })
        ));
    }

    #[test]
    fn spill_to_next_chain_without_self_overlap() {
        let t = star(1, 3, 2);
        let s = schedule(&t, &BTreeMap::from([(1, 0.7), (2, 0.6), (3, 0.5)])).unwrap();
        let l2 = s.link(2).unwrap();
        assert_eq!(spans(&l2.parent_side), vec![(1, 0.7, 1.0), (2, 0.0, 0.3)]);
        let l3 = s.link(3).unwrap();
        assert_eq!(spans(&l3.parent_side), vec![(2, 0.3, 0.8)]);
    }

    #[test]
    fn interfering_children_get_disjoint_footprints() {
        let mut t = star(2, 2, 2);
        t.interference.insert(LinkPair::new(1, 2));
        let s = schedule(&t, &BTreeMap::from([(1, 0.25), (2, 0.25)])).unwrap();
        let f1 = &s.link(1).unwrap().footprint;
        let f2 = &s.link(2).unwrap().footprint;
        for a in f1 {
            for b in f2 {
                assert!(a.end <= b.start || b.end <= a.start, "{a:?} overlaps {b:?}");
            }
        }
        assert_eq!(covered_length(f1.iter().map(|i| (i.start, i.end)).collect()), 0.5);
    }

    #[test]
    fn child_interfering_with_inbound_avoids_its_footprint() {
        let mut t = tree(&[(1, 0, 2), (2, 1, 2), (3, 1, 1)], 1);
        t.interference.insert(LinkPair::new(1, 2));
        let p = BTreeMap::from([(1, 0.25), (2, 0.25), (3, 0.25)]);
        let s = schedule(&t, &p).unwrap();
        let f1 = &s.link(1).unwrap().footprint;
        let f2 = &s.link(2).unwrap().footprint;
        for a in f1 {
            for b in f2 {
                assert!(a.end <= b.start || b.end <= a.start);
            }
        }
        assert!(s.link(2).unwrap().parent_side.iter().all(|c| c.chain == 1));
        assert!(s.deviations.is_empty());
    }

    #[test]
    fn achieved_rate_examples() {
        let t = star(3, 1, 1);
        let full = schedule(&t, &BTreeMap::from([(1, 0.5)])).unwrap();
        assert!((achieved_rates(&t, &full)[&1] - 6.65).abs() < 1e-12);
        let quarter = schedule(&t, &BTreeMap::from([(1, 0.25)])).unwrap();
        assert!((achieved_rates(&t, &quarter)[&1] - 3.325).abs() < 1e-12);
        let none = schedule(&t, &BTreeMap::from([(1, 0.0)])).unwrap();
        assert_eq!(achieved_rates(&t, &none)[&1], 0.0);
        assert_eq!(achieved_rates(&t, &Schedule::default())[&1], 0.0);
    }

    #[test]
    fn pause_prefers_other_links_active_time() {
        // link 1 single hop on [0, 0.4); link 2 multi-hop pause should sit on it
        let mut t = star(1, 2, 1);
        t.links[1] = LogicalLink::derived(2, 0, 2, 2, 13.3).unwrap();
        let s = schedule(&t, &BTreeMap::from([(1, 0.4), (2, 0.3)])).unwrap();
        let pause: Vec<_> =
            s.link(2).unwrap().footprint.iter().filter(|i| i.kind == IntervalKind::Pause).copied().collect();
        assert_eq!(pause.len(), 1);
        assert_eq!((pause[0].start, pause[0].end), (0.0, 0.3));
    }
}
