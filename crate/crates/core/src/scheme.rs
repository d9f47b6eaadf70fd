//! Write-policy deciders.
//!
//! Every scheme answers one question: when a cache writes a block it holds in
//! O, S or I, should the other copies be invalidated or updated? The deciders
//! are stateless. The engine owns the per-line counters and the sharer
//! directory and hands their values over in a [`WriteContext`].

use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;
use crate::types::CoherenceState;

pub const DEFAULT_COUNTER_CEILING: u8 = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    InvalidateOnly,
    UpdateOnly,
    /// Update iff the writer's line counter is at least `threshold`.
    Threshold { threshold: u32 },
    /// Update iff the writer holds the line in O.
    AdaptedMoesi,
    /// Update iff at least `min_sharers` other caches hold a valid copy.
    NumSharers { min_sharers: u32 },
}

impl Scheme {
    /// Short name used in reports (`inv`, `upd`, `threshold`, `adapted`, `sharers`).
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::InvalidateOnly => "inv",
            Scheme::UpdateOnly => "upd",
            Scheme::Threshold { .. } => "threshold",
            Scheme::AdaptedMoesi => "adapted",
            Scheme::NumSharers { .. } => "sharers",
        }
    }

    pub fn param(&self) -> Option<u32> {
        match *self {
            Scheme::Threshold { threshold } => Some(threshold),
            Scheme::NumSharers { min_sharers } => Some(min_sharers),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.param() {
            Some(p) => write!(f, "{}:{}", self.name(), p),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for Scheme {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ConfigError::Scheme {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let parse_param = |p: Option<&str>| -> Result<u32, ConfigError> {
            match p {
                None => Err(err("missing parameter after `:`")),
                Some("") => Err(err("missing parameter after `:`")),
                Some(p) if !p.bytes().all(|b| b.is_ascii_digit()) => {
                    Err(err("parameter must be a non-negative decimal integer"))
                }
                Some(p) => p.parse().map_err(|_| err("parameter out of range")),
            }
        };
        match name {
            "inv" | "upd" | "adapted" if param.is_some() => {
                Err(err("this scheme takes no parameter"))
            }
            "inv" => Ok(Scheme::InvalidateOnly),
            "upd" => Ok(Scheme::UpdateOnly),
            "adapted" => Ok(Scheme::AdaptedMoesi),
            "threshold" => Ok(Scheme::Threshold {
                threshold: parse_param(param)?,
            }),
            "sharers" => Ok(Scheme::NumSharers {
                min_sharers: parse_param(param)?,
            }),
            _ => Err(err(
                "expected one of inv, upd, threshold:<T>, adapted, sharers:<K>",
            )),
        }
    }
}

/// Active policy plus the engine-side knobs it depends on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Saturation point of the per-line counter.
    pub counter_ceiling: u8,
    /// Also bump a line's counter on the owning core's own read hits.
    /// Off by default: only reads observed on the bus count.
    pub count_local_reads: bool,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme) -> Self {
        SchemeConfig {
            scheme,
            counter_ceiling: DEFAULT_COUNTER_CEILING,
            count_local_reads: false,
        }
    }

    pub fn with_counter_ceiling(mut self, ceiling: u8) -> Result<Self, ConfigError> {
        if ceiling == 0 {
            return Err(ConfigError::Scheme {
                input: self.scheme.to_string(),
                reason: "counter ceiling must be positive".into(),
            });
        }
        self.counter_ceiling = ceiling;
        Ok(self)
    }
}

impl From<Scheme> for SchemeConfig {
    fn from(scheme: Scheme) -> Self {
        SchemeConfig::new(scheme)
    }
}

/// What the writer knows at the moment of a write to an O, S or I line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WriteContext {
    /// State of the writer's line, `I` when absent.
    pub writer_state: CoherenceState,
    /// Writer's line counter, 0 when absent.
    pub counter: u8,
    /// Valid copies held by other caches.
    pub remote_sharers: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyDecision {
    Invalidate,
    Update,
}

pub fn decide(scheme: Scheme, ctx: WriteContext) -> PolicyDecision {
    let update = match scheme {
        Scheme::InvalidateOnly => false,
        Scheme::UpdateOnly => true,
        Scheme::Threshold { threshold } => u32::from(ctx.counter) >= threshold,
        Scheme::AdaptedMoesi => ctx.writer_state == CoherenceState::O,
        Scheme::NumSharers { min_sharers } => ctx.remote_sharers >= min_sharers,
    };
    if update {
        PolicyDecision::Update
    } else {
        PolicyDecision::Invalidate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use CoherenceState::*;

    fn ctx(writer_state: CoherenceState, counter: u8, remote_sharers: u32) -> WriteContext {
        WriteContext { writer_state, counter, remote_sharers }
    }

    #[test]
    fn threshold_is_inclusive() {
        let t1 = Scheme::Threshold { threshold: 1 };
        assert_eq!(decide(t1, ctx(S, 1, 1)), PolicyDecision::Update);
        assert_eq!(decide(t1, ctx(S, 0, 1)), PolicyDecision::Invalidate);
    }

    #[test]
    fn adapted_updates_only_from_owned() {
        assert_eq!(decide(Scheme::AdaptedMoesi, ctx(S, 9, 3)), PolicyDecision::Invalidate);
        assert_eq!(decide(Scheme::AdaptedMoesi, ctx(I, 9, 3)), PolicyDecision::Invalidate);
        assert_eq!(decide(Scheme::AdaptedMoesi, ctx(O, 0, 0)), PolicyDecision::Update);
    }

    #[test]
    fn sharers_is_inclusive() {
        let k4 = Scheme::NumSharers { min_sharers: 4 };
        assert_eq!(decide(k4, ctx(S, 0, 4)), PolicyDecision::Update);
        assert_eq!(decide(k4, ctx(S, 0, 3)), PolicyDecision::Invalidate);
    }

    #[test]
    fn pure_schemes() {
        for s in [O, S, I] {
            assert_eq!(decide(Scheme::InvalidateOnly, ctx(s, 15, 15)), PolicyDecision::Invalidate);
            assert_eq!(decide(Scheme::UpdateOnly, ctx(s, 0, 0)), PolicyDecision::Update);
        }
    }

    #[test]
    fn grammar() {
        assert_eq!("inv".parse::<Scheme>().unwrap(), Scheme::InvalidateOnly);
        assert_eq!("upd".parse::<Scheme>().unwrap(), Scheme::UpdateOnly);
        assert_eq!("adapted".parse::<Scheme>().unwrap(), Scheme::AdaptedMoesi);
        assert_eq!(
            "threshold:3".parse::<Scheme>().unwrap(),
            Scheme::Threshold { threshold: 3 }
        );
        assert_eq!(
            "sharers:0".parse::<Scheme>().unwrap(),
            Scheme::NumSharers { min_sharers: 0 }
        );
        for bad in ["threshold:", "threshold", "sharers:-1", "sharers:x", "inv:2", "mesi", "", "threshold:+1"] {
            assert!(bad.parse::<Scheme>().is_err(), "{bad} should be rejected");
        }
        for s in ["inv", "upd", "adapted", "threshold:16", "sharers:4"] {
            assert_eq!(s.parse::<Scheme>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn zero_ceiling_rejected() {
        assert!(SchemeConfig::new(Scheme::UpdateOnly).with_counter_ceiling(0).is_err());
    }

    fn state() -> impl Strategy<Value = CoherenceState> {
        prop_oneof![Just(O), Just(S), Just(I)]
    }

    proptest! {
        #[test]
        fn threshold_monotone(t in 0u32..20, c in 0u8..16, bump in 1u8..16, st in state()) {
            let s = Scheme::Threshold { threshold: t };
            if decide(s, ctx(st, c, 0)) == PolicyDecision::Update {
                prop_assert_eq!(decide(s, ctx(st, c.saturating_add(bump), 0)), PolicyDecision::Update);
            }
        }

        #[test]
        fn sharers_monotone(k in 0u32..17, n in 0u32..16, bump in 1u32..16, st in state()) {
            let s = Scheme::NumSharers { min_sharers: k };
            if decide(s, ctx(st, 0, n)) == PolicyDecision::Update {
                prop_assert_eq!(decide(s, ctx(st, 0, n + bump)), PolicyDecision::Update);
            }
        }

        #[test]
        fn adapted_never_updates_outside_owned(c in any::<u8>(), n in 0u32..16, st in prop_oneof![Just(S), Just(I)]) {
            prop_assert_eq!(decide(Scheme::AdaptedMoesi, ctx(st, c, n)), PolicyDecision::Invalidate);
        }
    }
}
