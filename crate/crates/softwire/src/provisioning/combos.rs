//! Address-scope combination tables: which endpoint-address and
//! delegated-prefix scope pairings are sensible per family.
//!
//! Six IPv6 cells and four IPv4 cells; everything is possible, a few
//! pairings earn a "not recommended" with the reason attached.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// IPv6 endpoint address scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum V6Scope {
    LinkLocal,
    Ula,
    Global,
}

/// IPv6 delegated prefix scope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum V6PrefixScope {
    Global,
    Ula,
}

/// IPv4 scope, for both endpoints and delegated prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum V4Scope {
    Private,
    Public,
}

/// One cell coordinate in the tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combo {
    V6 {
        endpoint: V6Scope,
        delegated: V6PrefixScope,
    },
    V4 {
        endpoint: V4Scope,
        delegated: V4Scope,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Possible,
    PossibleNotRecommended,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Possible => write!(f, "Possible"),
            Verdict::PossibleNotRecommended => write!(f, "Possible, but Not Recommended"),
        }
    }
}

/// Verdict plus the reason when there is one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComboVerdict {
    pub verdict: Verdict,
    pub note: &'static str,
}

impl fmt::Display for ComboVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.note.is_empty() {
            write!(f, "{}", self.verdict)
        } else {
            write!(f, "{} ({})", self.verdict, self.note)
        }
    }
}

const POSSIBLE: ComboVerdict = ComboVerdict {
    verdict: Verdict::Possible,
    note: "",
};

/// Look up one cell. Total over all ten combinations.
pub fn validate_combo(combo: Combo) -> ComboVerdict {
    match combo {
        Combo::V6 {
            endpoint: V6Scope::Global,
            delegated: V6PrefixScope::Ula,
        } => ComboVerdict {
            verdict: Verdict::PossibleNotRecommended,
            note: "unique-local delegation behind globally addressed endpoints",
        },
        Combo::V6 { .. } => POSSIBLE,
        Combo::V4 {
            endpoint: V4Scope::Private,
            delegated: V4Scope::Private,
        } => ComboVerdict {
            verdict: Verdict::PossibleNotRecommended,
            note: "can lead to a nested-NAT situation",
        },
        Combo::V4 {
            endpoint: V4Scope::Public,
            delegated: V4Scope::Private,
        } => ComboVerdict {
            verdict: Verdict::PossibleNotRecommended,
            note: "NAT usage is recommended for the private prefix",
        },
        Combo::V4 { .. } => POSSIBLE,
    }
}

impl FromStr for V6Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<V6Scope, String> {
        match s.to_ascii_lowercase().as_str() {
            "link-local" | "linklocal" | "ll" => Ok(V6Scope::LinkLocal),
            "ula" => Ok(V6Scope::Ula),
            "global" => Ok(V6Scope::Global),
            other => Err(format!("unknown IPv6 endpoint scope '{other}'")),
        }
    }
}

impl FromStr for V6PrefixScope {
    type Err = String;

    fn from_str(s: &str) -> Result<V6PrefixScope, String> {
        match s.to_ascii_lowercase().as_str() {
            "ula" => Ok(V6PrefixScope::Ula),
            "global" => Ok(V6PrefixScope::Global),
            other => Err(format!("unknown IPv6 prefix scope '{other}'")),
        }
    }
}

impl FromStr for V4Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<V4Scope, String> {
        match s.to_ascii_lowercase().as_str() {
            "private" => Ok(V4Scope::Private),
            "public" => Ok(V4Scope::Public),
            other => Err(format!("unknown IPv4 scope '{other}'")),
        }
    }
}
