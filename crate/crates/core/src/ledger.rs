//! Communication bit accounting.
//!
//! A full-precision scalar costs 32 bits on the wire regardless of the
//! in-memory precision; see [`crate::compress::CompressedMessage::bit_size`].

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Worker to server.
    Up,
    /// Server to workers.
    Down,
}

/// How a server broadcast is charged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownlinkCounting {
    /// One broadcast costs its message size once.
    #[default]
    PerBroadcast,
    /// One broadcast costs its message size once per receiving worker.
    PerWorker,
}

impl DownlinkCounting {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per_broadcast" => Some(DownlinkCounting::PerBroadcast),
            "per_worker" => Some(DownlinkCounting::PerWorker),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DownlinkCounting::PerBroadcast => "per_broadcast",
            DownlinkCounting::PerWorker => "per_worker",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitLedger {
    pub uplink_bits: u64,
    pub downlink_bits: u64,
}

impl BitLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_message(&mut self, direction: Direction, bits: u64) {
        match direction {
            Direction::Up => self.uplink_bits += bits,
            Direction::Down => self.downlink_bits += bits,
        }
    }

    /// Charges one server broadcast of `bits` to `n_workers` receivers.
    pub fn record_broadcast(&mut self, bits: u64, n_workers: usize, counting: DownlinkCounting) {
        let copies = match counting {
            DownlinkCounting::PerBroadcast => 1,
            DownlinkCounting::PerWorker => n_workers as u64,
        };
        self.record_message(Direction::Down, bits * copies);
    }

    pub fn total_bits(&self) -> u64 {
        self.uplink_bits + self.downlink_bits
    }
}
