//! Acceptance checks and benchmark fixtures for phaseforge.
//!
//! The checks themselves live in `tests/acceptance.rs`; this crate holds
//! what they share with the benches.

use std::fmt;
use std::time::Duration;

use phaseforge_core::Field;

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub id: u32,
    pub name: &'static str,
    /// Whether the measured quantities met their thresholds.
    pub met: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Verdict {
    pub fn pass(&self) -> bool {
        self.met && self.elapsed <= self.budget
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} {} {}: {} [{:.1}s / budget {}s]",
            self.id,
            if self.pass() { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs()
        )
    }
}

/// A fixed unit-modulus scalar other than 1: `-1` for reals, `e^{0.7i}` for complex.
pub fn unit_phase<T: Field>() -> T {
    T::from_parts(0.7f64.cos(), 0.7f64.sin()).unwrap_or(-T::one())
}

/// Seeds of the 20-trial suites.
pub fn suite_seeds() -> std::ops::Range<u64> {
    0..20
}
