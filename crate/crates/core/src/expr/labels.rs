use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bitvec::{BitVec, MAX_WIDTH};

/// Concrete values for symbols, keyed by name.
pub type Assignment = BTreeMap<String, BitVec>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SymbolKind {
    Secret,
    Mask,
    Share { secret: String, index: u32 },
    Public,
}

impl SymbolKind {
    /// Secrets and shares both carry sensitive information.
    pub fn is_sensitive(&self) -> bool {
        matches!(self, SymbolKind::Secret | SymbolKind::Share { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolInfo {
    pub width: u32,
    pub kind: SymbolKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LabelError {
    #[error("malformed labels document: {0}")]
    Malformed(String),
    #[error("symbol `{0}` declared twice")]
    Duplicate(String),
    #[error("symbol `{name}` has invalid width {width}")]
    BadWidth { name: String, width: u32 },
    #[error("share `{name}` needs both `secret` and `index`")]
    IncompleteShare { name: String },
    #[error("secret `{secret}` has two shares with index {index}")]
    DuplicateShareIndex { secret: String, index: u32 },
    #[error("shares of `{secret}` disagree on width")]
    ShareWidthMismatch { secret: String },
    #[error("unknown symbol kind `{0}`")]
    UnknownKind(String),
}

/// Labels for every symbol that may appear in simulated expressions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: BTreeMap<String, SymbolInfo>,
}

#[derive(Serialize, Deserialize)]
struct LabelsDoc {
    symbols: Vec<LabelEntry>,
}

#[derive(Serialize, Deserialize)]
struct LabelEntry {
    name: String,
    width: u32,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    secret: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    index: Option<u32>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, width: u32, kind: SymbolKind) -> Result<(), LabelError> {
        if !(1..=MAX_WIDTH).contains(&width) {
            return Err(LabelError::BadWidth {
                name: name.to_string(),
                width,
            });
        }
        if self.symbols.contains_key(name) {
            return Err(LabelError::Duplicate(name.to_string()));
        }
        if let SymbolKind::Share { secret, index } = &kind {
            for info in self.symbols.values() {
                if let SymbolKind::Share {
                    secret: s2,
                    index: i2,
                } = &info.kind
                {
                    if s2 == secret && i2 == index {
                        return Err(LabelError::DuplicateShareIndex {
                            secret: secret.clone(),
                            index: *index,
                        });
                    }
                    if s2 == secret && info.width != width {
                        return Err(LabelError::ShareWidthMismatch {
                            secret: secret.clone(),
                        });
                    }
                }
            }
        }
        self.symbols
            .insert(name.to_string(), SymbolInfo { width, kind });
        Ok(())
    }

    /// Builder-style variant of [`declare`](Self::declare) for fixtures.
    pub fn with(mut self, name: &str, width: u32, kind: SymbolKind) -> Self {
        self.declare(name, width, kind).expect("valid label");
        self
    }

    pub fn get(&self, name: &str) -> Option<&SymbolInfo> {
        self.symbols.get(name)
    }

    pub fn width_of(&self, name: &str) -> Option<u32> {
        self.symbols.get(name).map(|i| i.width)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SymbolInfo)> {
        self.symbols.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Shares of `secret` as `(index, symbol name)`, sorted by index.
    pub fn shares_of(&self, secret: &str) -> Vec<(u32, &str)> {
        let mut out: Vec<(u32, &str)> = self
            .symbols
            .iter()
            .filter_map(|(name, info)| match &info.kind {
                SymbolKind::Share { secret: s, index } if s == secret => Some((*index, name.as_str())),
                _ => None,
            })
            .collect();
        out.sort();
        out
    }

    /// Width of a secret, either declared directly or inferred from its shares.
    pub fn secret_width(&self, secret: &str) -> Option<u32> {
        if let Some(info) = self.symbols.get(secret) {
            return Some(info.width);
        }
        self.shares_of(secret)
            .first()
            .and_then(|(_, n)| self.width_of(n))
    }

    pub fn from_json(text: &str) -> Result<Self, LabelError> {
        let doc: LabelsDoc =
            serde_json::from_str(text).map_err(|e| LabelError::Malformed(e.to_string()))?;
        let mut table = SymbolTable::new();
        for entry in doc.symbols {
            let kind = match entry.kind.as_str() {
                "secret" => SymbolKind::Secret,
                "mask" => SymbolKind::Mask,
                "public" => SymbolKind::Public,
                "share" => match (entry.secret, entry.index) {
                    (Some(secret), Some(index)) => SymbolKind::Share { secret, index },
                    _ => return Err(LabelError::IncompleteShare { name: entry.name }),
                },
                other => return Err(LabelError::UnknownKind(other.to_string())),
            };
            table.declare(&entry.name, entry.width, kind)?;
        }
        Ok(table)
    }

    pub fn to_json(&self) -> String {
        let symbols = self
            .symbols
            .iter()
            .map(|(name, info)| {
                let (kind, secret, index) = match &info.kind {
                    SymbolKind::Secret => ("secret", None, None),
                    SymbolKind::Mask => ("mask", None, None),
                    SymbolKind::Public => ("public", None, None),
                    SymbolKind::Share { secret, index } => {
                        ("share", Some(secret.clone()), Some(*index))
                    }
                };
                LabelEntry {
                    name: name.clone(),
                    width: info.width,
                    kind: kind.to_string(),
                    secret,
                    index,
                }
            })
            .collect();
        serde_json::to_string_pretty(&LabelsDoc { symbols }).expect("labels serialize")
    }
}

/// Parses a `{symbol: "0b.."}` map.
pub fn assignment_from_literals<'a>(
    pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<Assignment, crate::bitvec::BitVecError> {
    pairs
        .into_iter()
        .map(|(k, v)| Ok((k.to_string(), BitVec::parse_literal(v)?)))
        .collect()
}
