//! Seeded random tree topologies: a macro cell with several children, small
//! cells with few children, and mostly multi-hop logical links.
//!
//! The draw order is fixed so a seed reproduces the same topology on every
//! platform: hop counts per link, then parents for the small cells beyond the
//! macro's degree, then interference pairs. The PRNG is ChaCha8.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::DEFAULT_PHY_RATE_GBPS;
use crate::formulations::{InterferenceRegime, RadioRegime, SettingLabel};
use crate::model::{BaseStation, BsId, LinkId, LinkPair, LogicalLink, NetworkTopology};

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("infeasible generator configuration: {0}")]
    InfeasibleConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub num_small_bs: usize,
    pub macro_degree: usize,
    pub max_small_children: usize,
    /// Relative weights of hop counts 1, 2 and 3.
    pub hop_weights: [f64; 3],
    pub interference_pair_budget: usize,
    pub phy_rate_gbps: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            num_small_bs: 20,
            macro_degree: 8,
            max_small_children: 2,
            hop_weights: [0.2, 0.4, 0.4],
            interference_pair_budget: 3,
            phy_rate_gbps: DEFAULT_PHY_RATE_GBPS,
        }
    }
}

impl GeneratorConfig {
    pub fn check(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::InfeasibleConfig(m));
        if self.macro_degree > self.num_small_bs {
            return bad(format!("macro degree {} exceeds the {} small cells", self.macro_degree, self.num_small_bs));
        }
        if self.num_small_bs > 0 && self.macro_degree == 0 {
            return bad("small cells cannot reach a macro cell of degree 0".into());
        }
        if self.num_small_bs > self.macro_degree && self.max_small_children == 0 {
            return bad("small cells beyond the macro degree need max_small_children >= 1".into());
        }
        if self.hop_weights.iter().any(|w| !w.is_finite() || *w < 0.0) || self.hop_weights.iter().sum::<f64>() <= 0.0 {
            return bad(format!("hop weights {:?} are not a distribution", self.hop_weights));
        }
        if !(self.phy_rate_gbps.is_finite() && self.phy_rate_gbps > 0.0) {
            return bad(format!("physical rate {} must be positive", self.phy_rate_gbps));
        }
        Ok(())
    }
}

/// Draws a topology. Every base station gets as many radio chains as it has
/// attached links.
pub fn generate(config: &GeneratorConfig) -> Result<NetworkTopology, GeneratorError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.num_small_bs;
    let hops = WeightedIndex::new(config.hop_weights).expect("weights checked");
    let hop_counts: Vec<u32> = (0..n).map(|_| hops.sample(&mut rng) as u32 + 1).collect();

    let mut parent: BTreeMap<BsId, BsId> = BTreeMap::new();
    let mut children: BTreeMap<BsId, usize> = BTreeMap::new();
    for bs in 1..=n {
        let p = if bs <= config.macro_degree {
            0
        } else {
            let eligible: Vec<BsId> =
                (1..bs).filter(|c| children.get(c).copied().unwrap_or(0) < config.max_small_children).collect();
            *eligible.choose(&mut rng).expect("a small cell with room always exists")
        };
        parent.insert(bs, p);
        *children.entry(p).or_default() += 1;
    }

    let mut links = Vec::with_capacity(n);
    for (&child, &p) in &parent {
        let link = LogicalLink::derived(child, p, child, hop_counts[child - 1], config.phy_rate_gbps)
            .map_err(|e| GeneratorError::InfeasibleConfig(e.to_string()))?;
        links.push(link);
    }

    let attached = |bs: BsId| children.get(&bs).copied().unwrap_or(0) + usize::from(bs != 0);
    let mut stations = vec![BaseStation::macro_cell(0, attached(0).max(1) as u32)];
    stations.extend((1..=n).map(|bs| BaseStation::small_cell(bs, attached(bs) as u32)));

    let pairs = draw_pairs(&links, config.interference_pair_budget, &mut rng);
    Ok(NetworkTopology::new(stations, links, pairs))
}

/// Picks up to `budget` interference pairs uniformly among the pairs still
/// legal: both links attached to one base station and neither already
/// paired there.
fn draw_pairs(links: &[LogicalLink], budget: usize, rng: &mut ChaCha8Rng) -> Vec<LinkPair> {
    let mut attached: BTreeMap<BsId, Vec<LinkId>> = BTreeMap::new();
    for l in links {
        attached.entry(l.parent).or_default().push(l.id);
        attached.entry(l.child).or_default().push(l.id);
    }
    let mut paired: BTreeSet<(BsId, LinkId)> = BTreeSet::new();
    let mut chosen = Vec::new();
    for _ in 0..budget {
        let mut legal = Vec::new();
        for (&bs, ids) in &attached {
            for (i, &a) in ids.iter().enumerate() {
                for &b in &ids[i + 1..] {
                    if !paired.contains(&(bs, a)) && !paired.contains(&(bs, b)) {
                        legal.push((bs, a, b));
                    }
                }
            }
        }
        let Some(&(bs, a, b)) = legal.choose(rng) else { break };
        paired.insert((bs, a));
        paired.insert((bs, b));
        chosen.push(LinkPair::new(a, b));
    }
    chosen
}

/// Adapts a topology to a setting: the minimal-interference regime drops all
/// pairs; enough radio chains means one per attached link; limited radio
/// chains gives small cells one chain and the macro the label's count (left
/// as is when the label has none).
pub fn configure_for_setting(topology: &NetworkTopology, label: SettingLabel) -> NetworkTopology {
    let mut out = match label.setting.interference {
        InterferenceRegime::Minimal => topology.without_interference(),
        InterferenceRegime::Limited => topology.clone(),
    };
    let degree = |bs: BsId| topology.attached_links(bs).map_or(0, |s| s.len()) as u32;
    for s in &mut out.stations {
        s.radio_chains = match label.setting.radio_chains {
            RadioRegime::Enough => degree(s.id).max(1),
            RadioRegime::Limited if s.is_macro() => label.macro_chains.unwrap_or(s.radio_chains),
            RadioRegime::Limited => 1,
        };
    }
    out
}
