use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Traffic state label. Class index order (Neutral, Clumping, Unclumping) is
/// fixed and shared by the softmax head, the confusion matrix, and the
/// tensor-file label byte.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Neutral,
    Clumping,
    Unclumping,
}

pub const NUM_CLASSES: usize = 3;

impl Label {
    pub const ALL: [Label; 3] = [Label::Neutral, Label::Clumping, Label::Unclumping];

    pub fn index(self) -> usize {
        match self {
            Label::Neutral => 0,
            Label::Clumping => 1,
            Label::Unclumping => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Neutral => "neutral",
            Label::Clumping => "clumping",
            Label::Unclumping => "unclumping",
        }
    }

    /// Single-letter state code used in region files (`c`, `n`, `u`).
    pub fn code(self) -> char {
        match self {
            Label::Neutral => 'n',
            Label::Clumping => 'c',
            Label::Unclumping => 'u',
        }
    }

    pub fn parse(s: &str) -> Result<Label> {
        match s.trim() {
            "neutral" | "n" => Ok(Label::Neutral),
            "clumping" | "c" => Ok(Label::Clumping),
            "unclumping" | "u" => Ok(Label::Unclumping),
            other => Err(Error::data(format!("unknown label `{other}`"))),
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
