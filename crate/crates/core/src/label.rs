//! Sample labels and provenance tags shared by both modalities.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Normal,
    Abnormal,
}

impl Label {
    pub fn tag(self) -> u8 {
        match self {
            Label::Normal => 0,
            Label::Abnormal => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Label::Normal),
            1 => Some(Label::Abnormal),
            _ => None,
        }
    }

    pub fn is_abnormal(self) -> bool {
        self == Label::Abnormal
    }
}

/// Where a stored sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Real,
    CutPaste,
    Mixup,
    NngMix,
}

impl Provenance {
    pub fn tag(self) -> u8 {
        match self {
            Provenance::Real => 0,
            Provenance::CutPaste => 1,
            Provenance::Mixup => 2,
            Provenance::NngMix => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Provenance::Real),
            1 => Some(Provenance::CutPaste),
            2 => Some(Provenance::Mixup),
            3 => Some(Provenance::NngMix),
            _ => None,
        }
    }
}
