use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Parameter blocks of the canonical vector, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Baseline,
    Age,
    Period,
    Cohort,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::Baseline, Block::Age, Block::Period, Block::Cohort];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Block::Baseline => "0",
            Block::Age => "alpha",
            Block::Period => "beta",
            Block::Cohort => "gamma",
        }
    }
}

/// Which blocks are common to all strata (models M1 to M6).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SharingPattern {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
}

impl SharingPattern {
    pub const ALL: [SharingPattern; 6] = [
        SharingPattern::M1,
        SharingPattern::M2,
        SharingPattern::M3,
        SharingPattern::M4,
        SharingPattern::M5,
        SharingPattern::M6,
    ];

    pub fn is_shared(self, block: Block) -> bool {
        use Block::*;
        use SharingPattern::*;
        match (self, block) {
            (M1, _) => true,
            (M2, Baseline | Age | Period) => true,
            (M3, Baseline | Age | Cohort) => true,
            (M4, Baseline | Age) => true,
            (M5, Baseline) => true,
            _ => false,
        }
    }

    /// True when at least one block varies by stratum.
    pub fn has_varying_block(self) -> bool {
        Block::ALL.iter().any(|&b| !self.is_shared(b))
    }

    pub fn label(self) -> &'static str {
        match self {
            SharingPattern::M1 => "M1",
            SharingPattern::M2 => "M2",
            SharingPattern::M3 => "M3",
            SharingPattern::M4 => "M4",
            SharingPattern::M5 => "M5",
            SharingPattern::M6 => "M6",
        }
    }
}

impl fmt::Display for SharingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for SharingPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SharingPattern::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Domain(format!("unknown sharing pattern '{s}' (expected M1..M6)")))
    }
}
