//! The single type every verifier reports through.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diff::DiffFinding;
use crate::frontends::{Severity, SyntaxDiagnostic, Vendor};
use crate::policy::PolicyViolation;
use crate::sim::GlobalViolation;
use crate::topology::TopologyFinding;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    Syntax {
        vendor: Vendor,
        diagnostic: SyntaxDiagnostic,
    },
    Diff(DiffFinding),
    Topology(TopologyFinding),
    SemanticPolicy(PolicyViolation),
    Global(GlobalViolation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    SyntaxError,
    SyntaxWarning,
    Structural,
    Topology,
    Attribute,
    PolicyBehavior,
    SemanticPolicy,
    Global,
}

impl Finding {
    /// Kinds sort in the order the loop must address them.
    pub fn kind(&self) -> FindingKind {
        match self {
            Finding::Syntax { diagnostic, .. } => match diagnostic.severity {
                Severity::Error => FindingKind::SyntaxError,
                Severity::Warning => FindingKind::SyntaxWarning,
            },
            Finding::Diff(DiffFinding::Structural(_)) => FindingKind::Structural,
            Finding::Diff(DiffFinding::Attribute(_)) => FindingKind::Attribute,
            Finding::Diff(DiffFinding::PolicyBehavior(_)) => FindingKind::PolicyBehavior,
            Finding::Topology(_) => FindingKind::Topology,
            Finding::SemanticPolicy(_) => FindingKind::SemanticPolicy,
            Finding::Global(_) => FindingKind::Global,
        }
    }

    pub fn is_syntax(&self) -> bool {
        matches!(self, Finding::Syntax { .. })
    }
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FindingKind::SyntaxError => "syntax error",
            FindingKind::SyntaxWarning => "syntax warning",
            FindingKind::Structural => "structural mismatch",
            FindingKind::Topology => "topology error",
            FindingKind::Attribute => "attribute difference",
            FindingKind::PolicyBehavior => "policy behavior difference",
            FindingKind::SemanticPolicy => "semantic error",
            FindingKind::Global => "global policy violation",
        })
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::humanize::humanize(self).text)
    }
}
