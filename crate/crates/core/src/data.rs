//! Dyadic records and the JSON-Lines feature file.
//!
//! A feature file holds one partner per line:
//!
//! ```text
//! {"couple_id":"c001","role":"m","linguistic":[...768...],"paralinguistic":[...176...],
//!  "mdmq":{"good_bad":2,"happy_sad":3,"relaxed_angry":4}}
//! ```
//!
//! Lines are validated independently so every schema error carries the
//! 1-based line it came from. Labels are never stored in the file; they are
//! derived from the MDMQ items on load.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{compute_valence_label, ValenceLabel};

/// Sentence-embedding width of the linguistic block.
pub const LINGUISTIC_DIM: usize = 768;
/// 88 acoustic functionals for each of the two audio channels.
pub const PARALINGUISTIC_DIM: usize = 176;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "m")]
    Male,
    #[serde(rename = "f")]
    Female,
}

impl Role {
    pub const ALL: [Role; 2] = [Role::Male, Role::Female];

    pub fn partner(self) -> Role {
        match self {
            Role::Male => Role::Female,
            Role::Female => Role::Male,
        }
    }

    /// Wire code used in feature files.
    pub fn code(self) -> &'static str {
        match self {
            Role::Male => "m",
            Role::Female => "f",
        }
    }

    pub fn from_code(code: &str) -> Option<Role> {
        match code {
            "m" => Some(Role::Male),
            "f" => Some(Role::Female),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Male => "male",
            Role::Female => "female",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    Linguistic,
    Paralinguistic,
}

impl BlockKind {
    pub fn dim(self) -> usize {
        match self {
            BlockKind::Linguistic => LINGUISTIC_DIM,
            BlockKind::Paralinguistic => PARALINGUISTIC_DIM,
        }
    }
}

/// A feature block of fixed width with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    kind: BlockKind,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(kind: BlockKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != kind.dim() {
            return Err(Error::DimensionMismatch {
                expected: kind.dim(),
                actual: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "{kind:?} entry {i} is not finite"
            )));
        }
        Ok(Self { kind, values })
    }

    pub fn zeros(kind: BlockKind) -> Self {
        Self {
            kind,
            values: vec![0.0; kind.dim()],
        }
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Multidimensional Mood Questionnaire items on the 1..=6 bipolar scale.
///
/// Low numbers sit at the positive pole ("good mood", "happy"), high numbers
/// at the negative pole. The two arousal-flavoured items are carried through
/// the file format but never used for labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdmqItems {
    good_bad: u8,
    happy_sad: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relaxed_angry: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    calm_stressed: Option<u8>,
}

fn check_item(item: &'static str, value: i64) -> Result<u8> {
    if (1..=6).contains(&value) {
        Ok(value as u8)
    } else {
        Err(Error::OutOfRangeItem { item, value })
    }
}

impl MdmqItems {
    pub fn new(good_bad: i64, happy_sad: i64) -> Result<Self> {
        Ok(Self {
            good_bad: check_item("good_bad", good_bad)?,
            happy_sad: check_item("happy_sad", happy_sad)?,
            relaxed_angry: None,
            calm_stressed: None,
        })
    }

    pub fn with_arousal_items(
        mut self,
        relaxed_angry: Option<i64>,
        calm_stressed: Option<i64>,
    ) -> Result<Self> {
        self.relaxed_angry = relaxed_angry
            .map(|v| check_item("relaxed_angry", v))
            .transpose()?;
        self.calm_stressed = calm_stressed
            .map(|v| check_item("calm_stressed", v))
            .transpose()?;
        Ok(self)
    }

    pub fn good_bad(&self) -> u8 {
        self.good_bad
    }

    pub fn happy_sad(&self) -> u8 {
        self.happy_sad
    }

    pub fn relaxed_angry(&self) -> Option<u8> {
        self.relaxed_angry
    }

    pub fn calm_stressed(&self) -> Option<u8> {
        self.calm_stressed
    }
}

/// One partner's features and self-report; the label is always derived
/// from the MDMQ items.
#[derive(Clone, Debug, PartialEq)]
pub struct PartnerRecord {
    couple_id: String,
    role: Role,
    linguistic: FeatureVector,
    paralinguistic: FeatureVector,
    mdmq: MdmqItems,
    label: ValenceLabel,
}

impl PartnerRecord {
    pub fn new(
        couple_id: impl Into<String>,
        role: Role,
        linguistic: FeatureVector,
        paralinguistic: FeatureVector,
        mdmq: MdmqItems,
    ) -> Result<Self> {
        for (block, kind) in [
            (&linguistic, BlockKind::Linguistic),
            (&paralinguistic, BlockKind::Paralinguistic),
        ] {
            if block.kind() != kind {
                return Err(Error::InvalidParams(format!(
                    "expected a {kind:?} block, got {:?}",
                    block.kind()
                )));
            }
        }
        let label = compute_valence_label(&mdmq)?;
        Ok(Self {
            couple_id: couple_id.into(),
            role,
            linguistic,
            paralinguistic,
            mdmq,
            label,
        })
    }

    pub fn couple_id(&self) -> &str {
        &self.couple_id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn linguistic(&self) -> &FeatureVector {
        &self.linguistic
    }

    pub fn paralinguistic(&self) -> &FeatureVector {
        &self.paralinguistic
    }

    pub fn block(&self, kind: BlockKind) -> &FeatureVector {
        match kind {
            BlockKind::Linguistic => &self.linguistic,
            BlockKind::Paralinguistic => &self.paralinguistic,
        }
    }

    pub fn mdmq(&self) -> &MdmqItems {
        &self.mdmq
    }

    pub fn label(&self) -> ValenceLabel {
        self.label
    }

    /// Replaces the questionnaire answers, re-deriving the label.
    pub fn with_mdmq(mut self, mdmq: MdmqItems) -> Result<Self> {
        self.label = compute_valence_label(&mdmq)?;
        self.mdmq = mdmq;
        Ok(self)
    }

    pub fn with_blocks(mut self, linguistic: FeatureVector, paralinguistic: FeatureVector) -> Result<Self> {
        if linguistic.kind() != BlockKind::Linguistic
            || paralinguistic.kind() != BlockKind::Paralinguistic
        {
            return Err(Error::InvalidParams("block kinds swapped".into()));
        }
        self.linguistic = linguistic;
        self.paralinguistic = paralinguistic;
        Ok(self)
    }
}

/// A couple. Either partner may be missing when their record was unusable.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadRecord {
    couple_id: String,
    male: Option<PartnerRecord>,
    female: Option<PartnerRecord>,
}

impl DyadRecord {
    pub fn new(
        couple_id: impl Into<String>,
        male: Option<PartnerRecord>,
        female: Option<PartnerRecord>,
    ) -> Result<Self> {
        let couple_id = couple_id.into();
        if male.is_none() && female.is_none() {
            return Err(Error::InvalidParams(format!(
                "dyad `{couple_id}` has no partner records"
            )));
        }
        for (slot, role) in [(&male, Role::Male), (&female, Role::Female)] {
            if let Some(rec) = slot {
                if rec.role() != role {
                    return Err(Error::RoleConflict(rec.role()));
                }
                if rec.couple_id() != couple_id {
                    return Err(Error::CoupleMismatch {
                        own: couple_id,
                        partner: rec.couple_id().to_string(),
                    });
                }
            }
        }
        Ok(Self {
            couple_id,
            male,
            female,
        })
    }

    pub fn couple_id(&self) -> &str {
        &self.couple_id
    }

    pub fn get(&self, role: Role) -> Option<&PartnerRecord> {
        match role {
            Role::Male => self.male.as_ref(),
            Role::Female => self.female.as_ref(),
        }
    }

    pub fn partners(&self) -> impl Iterator<Item = &PartnerRecord> {
        self.male.iter().chain(self.female.iter())
    }

    pub(crate) fn slot_mut(&mut self, role: Role) -> &mut Option<PartnerRecord> {
        match role {
            Role::Male => &mut self.male,
            Role::Female => &mut self.female,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ingested,
    Synthetic,
}

/// Immutable collection of dyads with unique couple identifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    dyads: Vec<DyadRecord>,
    provenance: Provenance,
    seed: Option<u64>,
}

impl Corpus {
    pub fn new(dyads: Vec<DyadRecord>, provenance: Provenance, seed: Option<u64>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(dyads.len());
        for (i, dyad) in dyads.iter().enumerate() {
            if let Some(prev) = seen.insert(dyad.couple_id(), i) {
                return Err(Error::InvalidParams(format!(
                    "couple_id `{}` used by dyads {prev} and {i}",
                    dyad.couple_id()
                )));
            }
        }
        Ok(Self {
            dyads,
            provenance,
            seed,
        })
    }

    pub fn dyads(&self) -> &[DyadRecord] {
        &self.dyads
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Partner records of one role, in dyad order.
    pub fn partners(&self, role: Role) -> impl Iterator<Item = &PartnerRecord> {
        self.dyads.iter().filter_map(move |d| d.get(role))
    }

    pub fn n_records(&self) -> usize {
        self.dyads.iter().map(|d| d.partners().count()).sum()
    }

    pub(crate) fn into_dyads(self) -> Vec<DyadRecord> {
        self.dyads
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMdmq {
    good_bad: i64,
    happy_sad: i64,
    #[serde(default)]
    relaxed_angry: Option<i64>,
    #[serde(default)]
    calm_stressed: Option<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    couple_id: String,
    role: String,
    linguistic: Vec<f64>,
    paralinguistic: Vec<f64>,
    mdmq: RawMdmq,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    couple_id: &'a str,
    role: &'static str,
    linguistic: &'a [f64],
    paralinguistic: &'a [f64],
    mdmq: &'a MdmqItems,
}

fn parse_record(line_no: usize, line: &str) -> Result<PartnerRecord> {
    let raw: RawRecord =
        serde_json::from_str(line).map_err(|e| Error::schema(line_no, e.to_string()))?;
    let role = Role::from_code(&raw.role).ok_or_else(|| {
        Error::schema(
            line_no,
            format!("role must be \"m\" or \"f\", got {:?}", raw.role),
        )
    })?;
    let block = |kind: BlockKind, values: Vec<f64>| {
        FeatureVector::new(kind, values).map_err(|e| match e {
            Error::DimensionMismatch { expected, actual } => Error::schema(
                line_no,
                format!("{kind:?} block has {actual} entries, expected length {expected}"),
            ),
            other => Error::schema(line_no, other.to_string()),
        })
    };
    let linguistic = block(BlockKind::Linguistic, raw.linguistic)?;
    let paralinguistic = block(BlockKind::Paralinguistic, raw.paralinguistic)?;
    let mdmq = MdmqItems::new(raw.mdmq.good_bad, raw.mdmq.happy_sad)
        .and_then(|m| m.with_arousal_items(raw.mdmq.relaxed_angry, raw.mdmq.calm_stressed))
        .map_err(|e| Error::schema(line_no, e.to_string()))?;
    PartnerRecord::new(raw.couple_id, role, linguistic, paralinguistic, mdmq)
        .map_err(|e| Error::schema(line_no, e.to_string()))
}

/// Parses a JSONL feature stream. Blank lines are ignored.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut dyads: Vec<DyadRecord> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut first_seen: HashMap<(String, Role), usize> = HashMap::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::schema(line_no, format!("unreadable line: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(line_no, &line)?;
        let key = (record.couple_id().to_string(), record.role());
        if let Some(prev) = first_seen.get(&key) {
            return Err(Error::schema(
                line_no,
                format!(
                    "duplicate identity couple_id={:?} role={:?} (first seen on line {prev})",
                    key.0,
                    key.1.code()
                ),
            ));
        }
        first_seen.insert(key, line_no);

        let slot = match index.get(record.couple_id()) {
            Some(&k) => k,
            None => {
                index.insert(record.couple_id().to_string(), dyads.len());
                dyads.push(DyadRecord {
                    couple_id: record.couple_id().to_string(),
                    male: None,
                    female: None,
                });
                dyads.len() - 1
            }
        };
        let role = record.role();
        *dyads[slot].slot_mut(role) = Some(record);
    }
    Corpus::new(dyads, Provenance::Ingested, None)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file))
}

/// Writes one line per partner record, male before female within a dyad.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut writer: W) -> Result<()> {
    for rec in corpus.dyads().iter().flat_map(|d| d.partners()) {
        let out = RecordOut {
            couple_id: rec.couple_id(),
            role: rec.role().code(),
            linguistic: rec.linguistic().as_slice(),
            paralinguistic: rec.paralinguistic().as_slice(),
            mdmq: rec.mdmq(),
        };
        serde_json::to_writer(&mut writer, &out)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_corpus(corpus, &mut writer)?;
    writer.flush().map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RoleStats {
    pub samples: usize,
    pub negatives: usize,
    pub positives: usize,
    /// Negatives over samples; zero when the role is absent.
    pub negative_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub dyads: usize,
    pub complete_dyads: usize,
    pub male: RoleStats,
    pub female: RoleStats,
}

impl CorpusStats {
    pub fn role(&self, role: Role) -> &RoleStats {
        match role {
            Role::Male => &self.male,
            Role::Female => &self.female,
        }
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "dyads: {} ({} with both partners)",
            self.dyads, self.complete_dyads
        )?;
        for role in Role::ALL {
            let s = self.role(role);
            writeln!(
                f,
                "{role:>6}: {} samples, {} negative, {} positive (negative ratio {:.3})",
                s.samples, s.negatives, s.positives, s.negative_ratio
            )?;
        }
        Ok(())
    }
}

pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats> {
    if corpus.n_records() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let role_stats = |role: Role| {
        let mut s = RoleStats::default();
        for rec in corpus.partners(role) {
            s.samples += 1;
            if rec.label().is_negative() {
                s.negatives += 1;
            } else {
                s.positives += 1;
            }
        }
        if s.samples > 0 {
            s.negative_ratio = s.negatives as f64 / s.samples as f64;
        }
        s
    };
    Ok(CorpusStats {
        dyads: corpus.dyads().len(),
        complete_dyads: corpus
            .dyads()
            .iter()
            .filter(|d| d.get(Role::Male).is_some() && d.get(Role::Female).is_some())
            .count(),
        male: role_stats(Role::Male),
        female: role_stats(Role::Female),
    })
}
