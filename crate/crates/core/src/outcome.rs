use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;

use crate::error::FsmError;

/// Label a state returns on completion. Outcomes are the only branching
/// mechanism of the engine.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Outcome(String);

/// Reserved outcome every machine can return, and every state may return
/// without declaring it.
pub const CANCELED: &str = "canceled";
pub const SUCCEEDED: &str = "succeeded";
pub const ABORTED: &str = "aborted";

impl Outcome {
    pub fn new(label: impl Into<String>) -> Result<Self, FsmError> {
        let label = label.into();
        if label.trim().is_empty() {
            return Err(FsmError::InvalidOutcome(label));
        }
        Ok(Self(label))
    }

    /// Builds an outcome from a literal.
    ///
    /// Panics if `label` is empty or whitespace-only.
    pub fn from_static(label: &'static str) -> Self {
        assert!(!label.trim().is_empty(), "outcome label must not be blank");
        Self(label.to_owned())
    }

    pub fn canceled() -> Self {
        Self(CANCELED.to_owned())
    }

    pub fn is_canceled(&self) -> bool {
        self.0 == CANCELED
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Outcome {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Outcome {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl PartialEq<str> for Outcome {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for Outcome {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

/// Converts a list of labels into a validated outcome set.
pub fn outcome_set<I, S>(labels: I) -> Result<BTreeSet<Outcome>, FsmError>
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    labels.into_iter().map(Outcome::new).collect()
}
