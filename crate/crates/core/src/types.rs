use std::fmt;

use serde::{Deserialize, Serialize};

/// Opaque participant identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(pub u32);

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:04x}", self.0)
    }
}

/// A quantity of wei. All contract arithmetic on amounts is checked.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Amount(pub u128);

impl Amount {
    pub const ZERO: Amount = Amount(0);
    pub const MAX: Amount = Amount(u128::MAX);

    pub const fn wei(value: u128) -> Self {
        Amount(value)
    }

    pub const fn get(self) -> u128 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl From<u128> for Amount {
    fn from(value: u128) -> Self {
        Amount(value)
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} wei", self.0)
    }
}

/// Logical execution context of one transaction: the block timestamp and the
/// caller.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockContext {
    pub now: u64,
    pub sender: Address,
}

impl BlockContext {
    pub fn new(now: u64, sender: Address) -> Self {
        Self { now, sender }
    }
}

/// Monotone logical clock used by scenario drivers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Clock {
    now: u64,
}

impl Clock {
    pub fn starting_at(now: u64) -> Self {
        Self { now }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Moves the clock forward to `t`. Earlier targets leave it unchanged.
    pub fn advance_to(&mut self, t: u64) -> u64 {
        self.now = self.now.max(t);
        self.now
    }

    pub fn advance_by(&mut self, secs: u64) -> u64 {
        self.now = self.now.saturating_add(secs);
        self.now
    }

    pub fn ctx(&self, sender: Address) -> BlockContext {
        BlockContext::new(self.now, sender)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_renders_as_hex_label() {
        assert_eq!(Address(0x1a).to_string(), "0x001a");
    }

    #[test]
    fn clock_never_moves_backwards() {
        let mut clock = Clock::starting_at(50);
        assert_eq!(clock.advance_to(40), 50);
        assert_eq!(clock.advance_to(70), 70);
        assert_eq!(clock.advance_by(u64::MAX), u64::MAX);
    }
}
