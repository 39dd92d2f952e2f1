use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bias {
    Bullish,
    Bearish,
    Neutral,
}

impl Bias {
    pub fn sign(self) -> f64 {
        match self {
            Bias::Bullish => 1.0,
            Bias::Bearish => -1.0,
            Bias::Neutral => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Bias::Bullish => "bullish",
            Bias::Bearish => "bearish",
            Bias::Neutral => "neutral",
        }
    }
}

/// The chart formations of the pattern library, in library order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternKind {
    InverseHeadAndShoulders,
    DoubleBottom,
    RoundedBottom,
    HiddenBase,
    FallingWedge,
    RisingWedge,
    AscendingTriangle,
    DescendingTriangle,
    BullishFlag,
    BearishFlag,
    Rectangle,
    IslandReversal,
    VShapedReversal,
    RoundedTop,
    ExpandingTriangle,
    SymmetricalTriangle,
}

impl PatternKind {
    pub const ALL: [PatternKind; 16] = [
        PatternKind::InverseHeadAndShoulders,
        PatternKind::DoubleBottom,
        PatternKind::RoundedBottom,
        PatternKind::HiddenBase,
        PatternKind::FallingWedge,
        PatternKind::RisingWedge,
        PatternKind::AscendingTriangle,
        PatternKind::DescendingTriangle,
        PatternKind::BullishFlag,
        PatternKind::BearishFlag,
        PatternKind::Rectangle,
        PatternKind::IslandReversal,
        PatternKind::VShapedReversal,
        PatternKind::RoundedTop,
        PatternKind::ExpandingTriangle,
        PatternKind::SymmetricalTriangle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::InverseHeadAndShoulders => "Inverse Head and Shoulders",
            PatternKind::DoubleBottom => "Double Bottom",
            PatternKind::RoundedBottom => "Rounded Bottom",
            PatternKind::HiddenBase => "Hidden Base",
            PatternKind::FallingWedge => "Falling Wedge",
            PatternKind::RisingWedge => "Rising Wedge",
            PatternKind::AscendingTriangle => "Ascending Triangle",
            PatternKind::DescendingTriangle => "Descending Triangle",
            PatternKind::BullishFlag => "Bullish Flag",
            PatternKind::BearishFlag => "Bearish Flag",
            PatternKind::Rectangle => "Rectangle",
            PatternKind::IslandReversal => "Island Reversal",
            PatternKind::VShapedReversal => "V-shaped Reversal",
            PatternKind::RoundedTop => "Rounded Top / Bottom",
            PatternKind::ExpandingTriangle => "Expanding Triangle",
            PatternKind::SymmetricalTriangle => "Symmetrical Triangle",
        }
    }

    /// Library description, as given to the LLM backend.
    pub fn description(self) -> &'static str {
        match self {
            PatternKind::InverseHeadAndShoulders => {
                "Three lows with the middle one being the lowest; symmetrical structure, typically precedes an upward trend."
            }
            PatternKind::DoubleBottom => "Two similar lows with a rebound in between, forming a \u{201c}W\u{201d}.",
            PatternKind::RoundedBottom => {
                "Gradual decline followed by a gradual rise (\u{201c}U\u{201d}\u{2011}shape)."
            }
            PatternKind::HiddenBase => "Horizontal consolidation followed by a sudden up\u{2011}break.",
            PatternKind::FallingWedge => "Range narrows downward, often resolves upward.",
            PatternKind::RisingWedge => "Range narrows upward, often resolves downward.",
            PatternKind::AscendingTriangle => "Rising support, flat resistance; breakout usually up.",
            PatternKind::DescendingTriangle => "Falling resistance, flat support; breakout usually down.",
            PatternKind::BullishFlag => "Sharp rise then brief downward channel before continuation.",
            PatternKind::BearishFlag => "Sharp drop then brief upward channel before continuation.",
            PatternKind::Rectangle => "Sideways range between horizontal support/resistance.",
            PatternKind::IslandReversal => {
                "Two gaps in opposite directions forming an \u{201c}island\u{201d}."
            }
            PatternKind::VShapedReversal => {
                "Sharp decline followed by sharp recovery (or vice versa)."
            }
            PatternKind::RoundedTop => "Gradual peaking or bottoming, arc\u{2011}shaped.",
            PatternKind::ExpandingTriangle => "Highs and lows spread wider, volatile swings.",
            PatternKind::SymmetricalTriangle => "Highs and lows converge; breakout after apex.",
        }
    }

    /// Default directional bias. V-shaped reversals resolve per match.
    pub fn bias(self) -> Bias {
        match self {
            PatternKind::InverseHeadAndShoulders
            | PatternKind::DoubleBottom
            | PatternKind::RoundedBottom
            | PatternKind::HiddenBase
            | PatternKind::FallingWedge
            | PatternKind::AscendingTriangle
            | PatternKind::BullishFlag => Bias::Bullish,
            PatternKind::RisingWedge
            | PatternKind::DescendingTriangle
            | PatternKind::BearishFlag
            | PatternKind::RoundedTop => Bias::Bearish,
            PatternKind::Rectangle
            | PatternKind::IslandReversal
            | PatternKind::VShapedReversal
            | PatternKind::ExpandingTriangle
            | PatternKind::SymmetricalTriangle => Bias::Neutral,
        }
    }

    /// The kind a price-mirrored formation shows, if the library has one.
    pub fn mirrored(self) -> Option<PatternKind> {
        match self {
            PatternKind::InverseHeadAndShoulders
            | PatternKind::DoubleBottom
            | PatternKind::HiddenBase => None,
            PatternKind::RoundedBottom | PatternKind::RoundedTop => Some(PatternKind::RoundedTop),
            PatternKind::FallingWedge => Some(PatternKind::RisingWedge),
            PatternKind::RisingWedge => Some(PatternKind::FallingWedge),
            PatternKind::AscendingTriangle => Some(PatternKind::DescendingTriangle),
            PatternKind::DescendingTriangle => Some(PatternKind::AscendingTriangle),
            PatternKind::BullishFlag => Some(PatternKind::BearishFlag),
            PatternKind::BearishFlag => Some(PatternKind::BullishFlag),
            PatternKind::Rectangle
            | PatternKind::IslandReversal
            | PatternKind::VShapedReversal
            | PatternKind::ExpandingTriangle
            | PatternKind::SymmetricalTriangle => Some(self),
        }
    }

    /// Descriptor-only kinds have no geometric detector.
    pub fn has_detector(self) -> bool {
        !matches!(
            self,
            PatternKind::RoundedBottom
                | PatternKind::HiddenBase
                | PatternKind::IslandReversal
                | PatternKind::RoundedTop
        )
    }

    /// The numbered library text used in prompts.
    pub fn library_text() -> String {
        PatternKind::ALL
            .iter()
            .enumerate()
            .map(|(i, k)| format!("{}. {}: {}\n", i + 1, k.name(), k.description()))
            .collect()
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
