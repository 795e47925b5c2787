//! Early fusion within a partner and across the dyad.
//!
//! Layout of a fused row: own linguistic, own paralinguistic, then the
//! selected partner blocks, linguistic before paralinguistic. Values are
//! copied unchanged; scaling happens later, per training fold.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{BlockKind, Corpus, FeatureVector, PartnerRecord, Role, LINGUISTIC_DIM, PARALINGUISTIC_DIM};
use crate::error::{Error, Result};
use crate::labeling::Valence;

pub const MULTIMODAL_DIM: usize = LINGUISTIC_DIM + PARALINGUISTIC_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Baseline,
    WithPartnerLinguistic,
    WithPartnerParalinguistic,
    WithPartnerBoth,
}

impl FusionMode {
    pub const ALL: [FusionMode; 4] = [
        FusionMode::Baseline,
        FusionMode::WithPartnerLinguistic,
        FusionMode::WithPartnerParalinguistic,
        FusionMode::WithPartnerBoth,
    ];

    /// Row order of the results table.
    pub const TABLE_ORDER: [FusionMode; 4] = [
        FusionMode::Baseline,
        FusionMode::WithPartnerBoth,
        FusionMode::WithPartnerLinguistic,
        FusionMode::WithPartnerParalinguistic,
    ];

    pub fn partner_blocks(self) -> &'static [BlockKind] {
        match self {
            FusionMode::Baseline => &[],
            FusionMode::WithPartnerLinguistic => &[BlockKind::Linguistic],
            FusionMode::WithPartnerParalinguistic => &[BlockKind::Paralinguistic],
            FusionMode::WithPartnerBoth => &[BlockKind::Linguistic, BlockKind::Paralinguistic],
        }
    }

    pub fn needs_partner(self) -> bool {
        self != FusionMode::Baseline
    }

    pub fn dim(self) -> usize {
        MULTIMODAL_DIM + self.partner_blocks().iter().map(|b| b.dim()).sum::<usize>()
    }

    pub fn key(self) -> &'static str {
        match self {
            FusionMode::Baseline => "baseline",
            FusionMode::WithPartnerLinguistic => "with_partner_linguistic",
            FusionMode::WithPartnerParalinguistic => "with_partner_paralinguistic",
            FusionMode::WithPartnerBoth => "with_partner_both",
        }
    }

    pub fn from_key(key: &str) -> Option<FusionMode> {
        FusionMode::ALL.into_iter().find(|m| m.key() == key)
    }

    pub fn title(self) -> &'static str {
        match self {
            FusionMode::Baseline => "Multimodal fusion (baseline)",
            FusionMode::WithPartnerLinguistic => "Multimodal + Dyadic (partner linguistic)",
            FusionMode::WithPartnerParalinguistic => "Multimodal + Dyadic (partner paralinguistic)",
            FusionMode::WithPartnerBoth => "Multimodal + Dyadic (partner combined)",
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedSample {
    pub features: Vec<f64>,
    pub label: Valence,
    pub couple_id: String,
    pub role: Role,
}

fn concat_blocks(blocks: &[&[f64]]) -> Vec<f64> {
    let mut out = Vec::with_capacity(blocks.iter().map(|b| b.len()).sum());
    for b in blocks {
        out.extend_from_slice(b);
    }
    out
}

pub fn fuse_multimodal(linguistic: &FeatureVector, paralinguistic: &FeatureVector) -> Result<Vec<f64>> {
    if linguistic.len() != LINGUISTIC_DIM {
        return Err(Error::DimensionMismatch {
            expected: LINGUISTIC_DIM,
            actual: linguistic.len(),
        });
    }
    if paralinguistic.len() != PARALINGUISTIC_DIM {
        return Err(Error::DimensionMismatch {
            expected: PARALINGUISTIC_DIM,
            actual: paralinguistic.len(),
        });
    }
    Ok(concat_blocks(&[linguistic.as_slice(), paralinguistic.as_slice()]))
}

pub fn fuse_dyadic(
    own: &PartnerRecord,
    partner: Option<&PartnerRecord>,
    mode: FusionMode,
) -> Result<FusedSample> {
    let mut features = fuse_multimodal(own.linguistic(), own.paralinguistic())?;
    if mode.needs_partner() {
        let partner = partner.ok_or_else(|| Error::MissingPartner {
            couple_id: own.couple_id().to_string(),
        })?;
        if partner.role() == own.role() {
            return Err(Error::RoleConflict(own.role()));
        }
        if partner.couple_id() != own.couple_id() {
            return Err(Error::CoupleMismatch {
                own: own.couple_id().to_string(),
                partner: partner.couple_id().to_string(),
            });
        }
        features.reserve(mode.dim() - MULTIMODAL_DIM);
        for &kind in mode.partner_blocks() {
            features.extend_from_slice(partner.block(kind).as_slice());
        }
    }
    debug_assert_eq!(features.len(), mode.dim());
    Ok(FusedSample {
        features,
        label: own.label().value,
        couple_id: own.couple_id().to_string(),
        role: own.role(),
    })
}

/// Fused samples for one role, sorted by couple id. Dyads without the
/// partner record are skipped for partner-aware modes.
pub fn build_design_matrix(corpus: &Corpus, role: Role, mode: FusionMode) -> Result<Vec<FusedSample>> {
    let mut samples = corpus
        .dyads()
        .iter()
        .filter_map(|d| {
            let own = d.get(role)?;
            let partner = d.get(role.partner());
            if mode.needs_partner() && partner.is_none() {
                return None;
            }
            Some(fuse_dyadic(own, partner, mode))
        })
        .collect::<Result<Vec<_>>>()?;
    if samples.is_empty() {
        return Err(Error::EmptyDesignMatrix { role, mode });
    }
    samples.sort_by(|a, b| a.couple_id.cmp(&b.couple_id));
    Ok(samples)
}

/// Dense view of a design: one row per sample plus labels and group keys.
#[derive(Clone, Debug)]
pub struct Design {
    pub role: Role,
    pub mode: FusionMode,
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub groups: Vec<String>,
    /// Records of `role` dropped because the partner record was absent.
    pub excluded: usize,
}

impl Design {
    pub fn build(corpus: &Corpus, role: Role, mode: FusionMode) -> Result<Self> {
        let samples = build_design_matrix(corpus, role, mode)?;
        let available = corpus.partners(role).count();
        let mut design = Self::from_samples(role, mode, &samples);
        design.excluded = available - samples.len();
        Ok(design)
    }

    pub fn from_samples(role: Role, mode: FusionMode, samples: &[FusedSample]) -> Self {
        let d = samples.first().map_or(mode.dim(), |s| s.features.len());
        let mut x = Array2::zeros((samples.len(), d));
        for (mut row, s) in x.rows_mut().into_iter().zip(samples) {
            row.assign(&ndarray::ArrayView1::from(&s.features[..]));
        }
        Self {
            role,
            mode,
            x,
            y: samples.iter().map(|s| s.label.as_u8()).collect(),
            groups: samples.iter().map(|s| s.couple_id.clone()).collect(),
            excluded: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn width(&self) -> usize {
        self.x.ncols()
    }
}
