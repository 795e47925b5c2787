//! Binary valence labels from the MDMQ self-report.
//!
//! The label averages the "good mood vs bad mood" and "happy vs sad" items.
//! Averages at or above [`NEGATIVE_THRESHOLD`] are negative (0), everything
//! below is positive (1).
//!
//! Polarity: each item runs from 1 (strongly at the positive pole) to 6
//! (strongly at the negative pole). The questionnaire's own anchors are
//! symmetric ("very much ... very much"), so the direction is fixed by the
//! threshold rule sending high averages to the negative class.

use serde::{Deserialize, Serialize};

use crate::data::MdmqItems;
use crate::error::{Error, Result};

pub const NEGATIVE_THRESHOLD: f64 = 3.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Valence {
    Negative = 0,
    Positive = 1,
}

impl Valence {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Valence> {
        match v {
            0 => Some(Valence::Negative),
            1 => Some(Valence::Positive),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValenceLabel {
    pub value: Valence,
    pub averaged_score: f64,
}

impl ValenceLabel {
    pub fn is_negative(&self) -> bool {
        self.value == Valence::Negative
    }

    pub fn is_positive(&self) -> bool {
        self.value == Valence::Positive
    }

    pub fn as_u8(&self) -> u8 {
        self.value.as_u8()
    }
}

/// Maps a raw item pair to its label. Both items must lie in 1..=6.
pub fn label_from_items(good_bad: i64, happy_sad: i64) -> Result<ValenceLabel> {
    for (item, value) in [("good_bad", good_bad), ("happy_sad", happy_sad)] {
        if !(1..=6).contains(&value) {
            return Err(Error::OutOfRangeItem { item, value });
        }
    }
    let averaged_score = (good_bad + happy_sad) as f64 / 2.0;
    let value = if averaged_score >= NEGATIVE_THRESHOLD {
        Valence::Negative
    } else {
        Valence::Positive
    };
    Ok(ValenceLabel {
        value,
        averaged_score,
    })
}

pub fn compute_valence_label(mdmq: &MdmqItems) -> Result<ValenceLabel> {
    label_from_items(mdmq.good_bad().into(), mdmq.happy_sad().into())
}
