use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Investigation context supplied by the examiner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseContext {
    pub case_id: String,
    #[serde(default)]
    pub background: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub extra_instructions: Option<String>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("case id must not be empty")]
pub struct EmptyCaseId;

/// Lowercase, trim, drop empties and duplicates; first occurrence wins.
pub fn normalize_keywords<S: AsRef<str>>(raw: &[S]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for k in raw {
        let k = k.as_ref().trim().to_lowercase();
        if !k.is_empty() && !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

impl CaseContext {
    pub fn new(
        case_id: &str,
        background: &str,
        keywords: &[impl AsRef<str>],
        extra_instructions: Option<&str>,
    ) -> Result<Self, EmptyCaseId> {
        let case_id = case_id.trim();
        if case_id.is_empty() {
            return Err(EmptyCaseId);
        }
        Ok(Self {
            case_id: case_id.to_string(),
            background: background.trim().to_string(),
            keywords: normalize_keywords(keywords),
            extra_instructions: extra_instructions.map(str::trim).filter(|s| !s.is_empty()).map(String::from),
        })
    }

    /// Re-apply the invariants to a deserialized value.
    pub fn normalized(self) -> Result<Self, EmptyCaseId> {
        Self::new(&self.case_id, &self.background, &self.keywords, self.extra_instructions.as_deref())
    }
}
