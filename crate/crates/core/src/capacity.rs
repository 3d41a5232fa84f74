//! Physical-link rates and the end-to-end profile of a logical link.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// OFDM slot length in microseconds used for the default rate.
pub const DEFAULT_SLOT_US: f64 = 4.16;
pub const DEFAULT_SUBCARRIERS: u32 = 6912;
/// 256-QAM.
pub const DEFAULT_BITS_PER_SYMBOL: u32 = 8;

/// Raw physical rate of the default frame structure, about 13.29 Gbps.
pub const DEFAULT_PHY_RATE_GBPS: f64 =
    DEFAULT_SUBCARRIERS as f64 * DEFAULT_BITS_PER_SYMBOL as f64 / DEFAULT_SLOT_US / 1000.0;

#[derive(Debug, Error, PartialEq, Clone)]
pub enum CapacityError {
    #[error("{name} must be positive, got {value}")]
    NonPositiveInput { name: &'static str, value: f64 },
    #[error("hop count must be at least 1, got {0}")]
    InvalidHopCount(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkCapacityProfile {
    pub capacity_gbps: f64,
    pub p_first_max: f64,
    pub p_last_max: f64,
}

/// Raw rate in Gbps of one physical link carrying `subcarriers` symbols of
/// `bits_per_symbol` bits every `slot_us` microseconds. Channel coding is not
/// accounted for.
pub fn physical_rate(slot_us: f64, subcarriers: u32, bits_per_symbol: u32) -> Result<f64, CapacityError> {
    if !(slot_us > 0.0) {
        return Err(CapacityError::NonPositiveInput { name: "slot_us", value: slot_us });
    }
    if subcarriers == 0 {
        return Err(CapacityError::NonPositiveInput { name: "subcarriers", value: 0.0 });
    }
    if bits_per_symbol == 0 {
        return Err(CapacityError::NonPositiveInput { name: "bits_per_symbol", value: 0.0 });
    }
    Ok(subcarriers as f64 * bits_per_symbol as f64 / slot_us / 1000.0)
}

/// Capacity and endpoint fractions of a logical link with uniform hop rate.
///
/// A single hop runs at the physical rate for the whole frame. A relay path
/// alternates odd and even hops, so each endpoint hop is active for half the
/// frame and the path delivers half the physical rate.
pub fn link_profile(hop_count: u32, phy_rate_gbps: f64) -> Result<LinkCapacityProfile, CapacityError> {
    if hop_count == 0 {
        return Err(CapacityError::InvalidHopCount(hop_count));
    }
    if !(phy_rate_gbps > 0.0) || !phy_rate_gbps.is_finite() {
        return Err(CapacityError::NonPositiveInput { name: "phy_rate_gbps", value: phy_rate_gbps });
    }
    let fraction = if hop_count == 1 { 1.0 } else { 0.5 };
    Ok(LinkCapacityProfile { capacity_gbps: phy_rate_gbps * fraction, p_first_max: fraction, p_last_max: fraction })
}
