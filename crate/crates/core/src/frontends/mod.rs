//! Config text frontends: IOS-style and Junos-style parsers and printers.
//!
//! Parsers never fail. They return a best-effort [`RouterConfig`] built from
//! the lines they understood, plus a [`SyntaxDiagnostic`] for everything else.

mod cisco;
mod juniper;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ir::RouterConfig;

pub use cisco::{parse_cisco, print_cisco};
pub use juniper::{parse_juniper, print_juniper};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Vendor {
    Cisco,
    Juniper,
}

impl fmt::Display for Vendor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Vendor::Cisco => "cisco",
            Vendor::Juniper => "juniper",
        })
    }
}

/// A problem tied to one input line.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SyntaxDiagnostic {
    /// 1-based.
    pub line_number: usize,
    /// The input line, verbatim.
    pub line_text: String,
    pub message: String,
    pub severity: Severity,
    /// Hierarchy-flattened statement (Junos only), e.g.
    /// `policy-options prefix-list our-networks 1.2.3.0/24-32`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statement: Option<String>,
}

impl SyntaxDiagnostic {
    /// The statement as it should be quoted back to a user.
    pub fn quoted(&self) -> &str {
        self.statement.as_deref().unwrap_or_else(|| self.line_text.trim())
    }
}

impl fmt::Display for SyntaxDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: '{}'", self.line_number, self.message, self.line_text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseResult {
    pub config: RouterConfig,
    pub diagnostics: Vec<SyntaxDiagnostic>,
}

impl ParseResult {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(|d| d.severity == Severity::Error)
    }
}

pub fn parse(vendor: Vendor, text: &str) -> ParseResult {
    match vendor {
        Vendor::Cisco => parse_cisco(text),
        Vendor::Juniper => parse_juniper(text),
    }
}

/// Junos text is the one whose statements end in braces or semicolons.
pub fn detect_vendor(text: &str) -> Vendor {
    let junos = text
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.trim_start().starts_with('#') && !l.trim_start().starts_with('!'))
        .any(|l| l.ends_with('{') || l.ends_with(';'));
    if junos {
        Vendor::Juniper
    } else {
        Vendor::Cisco
    }
}

pub fn print(vendor: Vendor, config: &RouterConfig) -> String {
    match vendor {
        Vendor::Cisco => print_cisco(config),
        Vendor::Juniper => print_juniper(config),
    }
}

/// Lines the harness owns and the model is told not to write.
pub fn preamble(vendor: Vendor, hostname: &str) -> String {
    match vendor {
        Vendor::Cisco => format!("hostname {hostname}\n!\n"),
        Vendor::Juniper => format!("system {{\n    host-name {hostname};\n}}\n"),
    }
}

/// Puts the vendor preamble in front of `text` unless it is already there.
pub fn prepend_preamble(text: &str, vendor: Vendor, hostname: &str) -> String {
    let pre = preamble(vendor, hostname);
    if text.starts_with(&pre) {
        text.to_string()
    } else {
        format!("{pre}{text}")
    }
}

pub(crate) fn diag(
    line_number: usize,
    line_text: &str,
    severity: Severity,
    message: impl Into<String>,
) -> SyntaxDiagnostic {
    SyntaxDiagnostic {
        line_number,
        line_text: line_text.to_string(),
        message: message.into(),
        severity,
        statement: None,
    }
}
