//! Renders findings as correction prompts from fixed text templates.
//!
//! Templates live in `templates/*.txt` and use `{name}` placeholders. A
//! directory of same-named files can replace any of them at run time.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{DiffFinding, Effect, PolicyBehaviorDiff, Side};
use crate::finding::{Finding, FindingKind};
use crate::frontends::{Severity, SyntaxDiagnostic, Vendor};
use crate::ir::Protocol;
use crate::policy::{format_communities, Direction, PolicyViolation, RouteAnnouncement};
use crate::sim::GlobalViolation;
use crate::topology::TopologyFinding;

const BUILTIN: &[(&str, &str)] = &[
    (
        "juniper_syntax_error",
        include_str!("../templates/juniper_syntax_error.txt"),
    ),
    (
        "juniper_syntax_warning",
        include_str!("../templates/juniper_syntax_warning.txt"),
    ),
    (
        "cisco_syntax_error",
        include_str!("../templates/cisco_syntax_error.txt"),
    ),
    (
        "cisco_syntax_warning",
        include_str!("../templates/cisco_syntax_warning.txt"),
    ),
    (
        "structural_original",
        include_str!("../templates/structural_original.txt"),
    ),
    (
        "structural_translation",
        include_str!("../templates/structural_translation.txt"),
    ),
    ("attribute", include_str!("../templates/attribute.txt")),
    ("policy_behavior", include_str!("../templates/policy_behavior.txt")),
    (
        "topology_interface",
        include_str!("../templates/topology_interface.txt"),
    ),
    ("topology_local_as", include_str!("../templates/topology_local_as.txt")),
    (
        "topology_router_id",
        include_str!("../templates/topology_router_id.txt"),
    ),
    (
        "topology_missing_neighbor",
        include_str!("../templates/topology_missing_neighbor.txt"),
    ),
    (
        "topology_missing_network",
        include_str!("../templates/topology_missing_network.txt"),
    ),
    (
        "topology_extra_network",
        include_str!("../templates/topology_extra_network.txt"),
    ),
    (
        "topology_extra_neighbor",
        include_str!("../templates/topology_extra_neighbor.txt"),
    ),
    ("semantic_permits", include_str!("../templates/semantic_permits.txt")),
    ("semantic_denies", include_str!("../templates/semantic_denies.txt")),
    (
        "semantic_missing_tag",
        include_str!("../templates/semantic_missing_tag.txt"),
    ),
    (
        "semantic_unfiltered",
        include_str!("../templates/semantic_unfiltered.txt"),
    ),
    ("semantic_untagged", include_str!("../templates/semantic_untagged.txt")),
    ("global", include_str!("../templates/global.txt")),
];

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template '{0}' is not one of the known templates")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    by_name: BTreeMap<String, String>,
}

impl Templates {
    pub fn builtin() -> &'static Templates {
        static BUILT: OnceLock<Templates> = OnceLock::new();
        BUILT.get_or_init(|| Templates {
            by_name: BUILTIN
                .iter()
                .map(|(k, v)| (k.to_string(), v.trim_end_matches('\n').to_string()))
                .collect(),
        })
    }

    /// Builtin templates with every `<name>.txt` in `dir` replacing its
    /// namesake.
    pub fn with_overrides(dir: &Path) -> Result<Templates, TemplateError> {
        let io = |source| TemplateError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut out = Templates::builtin().clone();
        let mut entries: Vec<_> = fs::read_dir(dir).map_err(io)?.collect::<Result<_, _>>().map_err(io)?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let path = e.path();
            if path.extension().is_none_or(|x| x != "txt") {
                continue;
            }
            let name = path.file_stem().unwrap_or_default().to_string_lossy().to_string();
            if !out.by_name.contains_key(&name) {
                return Err(TemplateError::Unknown(name));
            }
            let text = fs::read_to_string(&path).map_err(|source| TemplateError::Io {
                path: path.display().to_string(),
                source,
            })?;
            out.by_name.insert(name, text.trim_end_matches('\n').to_string());
        }
        Ok(out)
    }

    /// Fills `{key}` placeholders in one pass; substituted values are not
    /// rescanned. Unknown placeholders are left verbatim.
    pub fn render(&self, name: &str, fields: &[(&str, String)]) -> String {
        let template = self
            .by_name
            .get(name)
            .unwrap_or_else(|| panic!("no template named {name}"));
        let mut out = String::with_capacity(template.len() + 64);
        let mut rest = template.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            match after.find('}').map(|close| (&after[..close], close)) {
                Some((key, close)) if fields.iter().any(|(k, _)| *k == key) => {
                    let value = &fields.iter().find(|(k, _)| *k == key).expect("checked").1;
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                _ => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }
}

/// A rendered correction prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptText {
    pub text: String,
    pub finding_kind: FindingKind,
}

pub fn humanize(f: &Finding) -> PromptText {
    humanize_with(Templates::builtin(), f)
}

pub fn humanize_with(t: &Templates, f: &Finding) -> PromptText {
    let text = match f {
        Finding::Syntax { vendor, diagnostic } => syntax(t, *vendor, diagnostic),
        Finding::Diff(d) => diff(t, d),
        Finding::Topology(tf) => topology(t, tf),
        Finding::SemanticPolicy(v) => semantic(t, v),
        Finding::Global(g) => global(t, g),
    };
    PromptText {
        text,
        finding_kind: f.kind(),
    }
}

pub fn humanize_topology(f: &TopologyFinding) -> PromptText {
    PromptText {
        text: topology(Templates::builtin(), f),
        finding_kind: FindingKind::Topology,
    }
}

pub fn humanize_diff(d: &DiffFinding) -> PromptText {
    humanize(&Finding::Diff(d.clone()))
}

fn syntax(t: &Templates, vendor: Vendor, d: &SyntaxDiagnostic) -> String {
    let quoted = d.quoted().to_string();
    match (vendor, d.severity) {
        (Vendor::Juniper, Severity::Error) => t.render("juniper_syntax_error", &[("statement", quoted)]),
        (Vendor::Juniper, Severity::Warning) => t.render(
            "juniper_syntax_warning",
            &[("statement", quoted), ("message", d.message.clone())],
        ),
        (Vendor::Cisco, Severity::Error) => t.render("cisco_syntax_error", &[("line", quoted)]),
        (Vendor::Cisco, Severity::Warning) => t.render(
            "cisco_syntax_warning",
            &[("line", quoted), ("message", d.message.clone())],
        ),
    }
}

/// "the prefix 1.2.3.0/25", plus any attribute that differs from a plain
/// BGP route.
pub fn describe_route(r: &RouteAnnouncement) -> String {
    let mut extras = Vec::new();
    if !r.communities.is_empty() {
        extras.push(format!("communities {}", format_communities(&r.communities)));
    }
    if r.med != 0 {
        extras.push(format!("MED {}", r.med));
    }
    if r.origin_protocol != Protocol::Bgp {
        extras.push(format!("origin protocol {}", r.origin_protocol));
    }
    if extras.is_empty() {
        format!("the prefix {}", r.prefix)
    } else {
        format!("the prefix {} with {}", r.prefix, extras.join(", "))
    }
}

/// Action keywords; when both sides accept, each names the attributes on
/// which they disagree.
fn actions(p: &PolicyBehaviorDiff) -> (String, String) {
    match (&p.left, &p.right) {
        (
            Effect::Accept {
                med: lm,
                communities: lc,
                local_pref: ll,
            },
            Effect::Accept {
                med: rm,
                communities: rc,
                local_pref: rl,
            },
        ) => {
            let mut l = Vec::new();
            let mut r = Vec::new();
            if lm != rm {
                l.push(format!("MED {lm}"));
                r.push(format!("MED {rm}"));
            }
            if lc != rc {
                l.push(format!("communities {}", format_communities(lc)));
                r.push(format!("communities {}", format_communities(rc)));
            }
            if ll != rl {
                let lp = |v: &Option<u32>| v.map_or("unset".to_string(), |x| x.to_string());
                l.push(format!("local preference {}", lp(ll)));
                r.push(format!("local preference {}", lp(rl)));
            }
            (
                format!("ACCEPT with {}", l.join(", ")),
                format!("ACCEPT with {}", r.join(", ")),
            )
        }
        (l, r) => (l.keyword().to_string(), r.keyword().to_string()),
    }
}

fn diff(t: &Templates, d: &DiffFinding) -> String {
    match d {
        DiffFinding::Structural(s) => {
            let name = match s.side {
                Side::Original => "structural_original",
                Side::Translation => "structural_translation",
            };
            t.render(name, &[("item", s.item.clone()), ("kind", s.kind.clone())])
        }
        DiffFinding::Attribute(a) => t.render(
            "attribute",
            &[
                ("left_component", a.left_component.clone()),
                ("right_component", a.right_component.clone()),
                ("attribute", a.attribute.clone()),
                ("left", a.left.clone()),
                ("right", a.right.clone()),
            ],
        ),
        DiffFinding::PolicyBehavior(p) => {
            let (la, ra) = actions(p);
            t.render(
                "policy_behavior",
                &[
                    ("route", describe_route(&p.example)),
                    ("left_policy", p.left_policy.clone()),
                    ("right_policy", p.right_policy.clone()),
                    ("left_action", la),
                    ("right_action", ra),
                ],
            )
        }
    }
}

fn topology(t: &Templates, f: &TopologyFinding) -> String {
    match f {
        TopologyFinding::InterfaceAddressMismatch {
            interface,
            expected,
            found,
        } => t.render(
            "topology_interface",
            &[
                ("interface", interface.clone()),
                ("expected", expected.clone()),
                ("found", found.clone()),
            ],
        ),
        TopologyFinding::LocalAsMismatch { expected, found } => t.render(
            "topology_local_as",
            &[("expected", expected.to_string()), ("found", found.to_string())],
        ),
        TopologyFinding::RouterIdMismatch { expected, found } => t.render(
            "topology_router_id",
            &[("expected", expected.to_string()), ("found", found.to_string())],
        ),
        TopologyFinding::MissingNeighbor {
            peer_address,
            remote_as,
        } => t.render(
            "topology_missing_neighbor",
            &[("address", peer_address.to_string()), ("asn", remote_as.to_string())],
        ),
        TopologyFinding::MissingNetwork { network } => {
            t.render("topology_missing_network", &[("network", network.to_string())])
        }
        TopologyFinding::ExtraNetwork { network, router } => t.render(
            "topology_extra_network",
            &[("network", network.to_string()), ("router", router.clone())],
        ),
        TopologyFinding::ExtraNeighbor {
            peer_address,
            remote_as,
        } => t.render(
            "topology_extra_neighbor",
            &[("address", peer_address.to_string()), ("asn", remote_as.to_string())],
        ),
    }
}

fn semantic(t: &Templates, v: &PolicyViolation) -> String {
    let described = v.constraint.describe();
    let routes = if !described.is_empty() {
        described
    } else {
        match v.direction {
            Direction::Import => format!("received from the neighbor {}", v.neighbor),
            Direction::Export => format!("sent to the neighbor {}", v.neighbor),
        }
    };
    let cex = &v.counterexample;
    match (&v.policy, cex.missing_community) {
        (Some(policy), Some(tag)) => t.render(
            "semantic_missing_tag",
            &[
                ("policy", policy.clone()),
                ("community", tag.to_string()),
                ("routes", routes),
            ],
        ),
        (Some(policy), None) => {
            let name = if cex.actual == crate::ir::Action::Permit {
                "semantic_permits"
            } else {
                "semantic_denies"
            };
            t.render(name, &[("policy", policy.clone()), ("routes", routes)])
        }
        (None, Some(tag)) => t.render(
            "semantic_untagged",
            &[
                ("direction", v.direction.to_string()),
                ("neighbor", v.neighbor.to_string()),
                ("routes", routes),
                ("community", tag.to_string()),
            ],
        ),
        (None, None) => t.render(
            "semantic_unfiltered",
            &[
                ("direction", v.direction.to_string()),
                ("neighbor", v.neighbor.to_string()),
                ("routes", routes),
            ],
        ),
    }
}

fn global(t: &Templates, g: &GlobalViolation) -> String {
    t.render("global", &[("violation", g.to_string())])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_single_pass() {
        let t = Templates::builtin();
        let s = t.render("topology_missing_network", &[("network", "{network}".into())]);
        assert_eq!(s, "Network {network} not declared");
    }

    #[test]
    fn route_description() {
        let p = "1.2.3.0/25".parse().unwrap();
        assert_eq!(
            describe_route(&RouteAnnouncement::new(p, Protocol::Bgp)),
            "the prefix 1.2.3.0/25"
        );
        let mut r = RouteAnnouncement::new(p, Protocol::Connected);
        r.med = 7;
        assert_eq!(
            describe_route(&r),
            "the prefix 1.2.3.0/25 with MED 7, origin protocol connected"
        );
    }

    #[test]
    fn overrides_replace_namesakes() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("global.txt"), "Global: {violation}\n").unwrap();
        let t = Templates::with_overrides(dir.path()).unwrap();
        let g = GlobalViolation::CustomerUnreachable { from: "R2".into() };
        assert_eq!(global(&t, &g), "Global: R2 cannot reach the customer network");
        fs::write(dir.path().join("bogus.txt"), "x").unwrap();
        assert!(matches!(Templates::with_overrides(dir.path()), Err(TemplateError::Unknown(n)) if n == "bogus"));
    }
}
