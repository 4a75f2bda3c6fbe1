//! Simulated wall-clock units. Timestamps are signed seconds since genesis.

/// Seconds since genesis; negative values describe history before genesis.
pub type Timestamp = i64;

pub const SECONDS_PER_HOUR: i64 = 3_600;
pub const SECONDS_PER_DAY: i64 = 86_400;
pub const SECONDS_PER_WEEK: i64 = 7 * SECONDS_PER_DAY;
/// Mean Gregorian month, 30.44 days.
pub const SECONDS_PER_MONTH: i64 = 2_630_016;
/// Twelve mean months.
pub const SECONDS_PER_YEAR: i64 = 12 * SECONDS_PER_MONTH;
/// Half a mean month, the unit of blacklist periods.
pub const SECONDS_PER_HALF_MONTH: i64 = SECONDS_PER_MONTH / 2;

/// Default slot length, in seconds.
pub const DEFAULT_SLOT_SECONDS: i64 = 6;
