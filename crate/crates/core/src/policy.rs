//! Executable route-policy semantics over concrete announcements, plus the
//! finite test space and the counterexample search built on top of it.
//!
//! Search is exhaustive over [`build_test_space`]. The space is built from
//! the prefixes, lengths, communities and MED values a policy environment
//! mentions, so one concrete counterexample is always reproducible and
//! cheap to render into a prompt.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{
    mask_bits, Action, CommunityValue, Ipv4Prefix, MatchCond, PolicyClause, PrefixListEntry, Protocol, RoutePolicy,
    RouterConfig, SetAction,
};

/// Announcements beyond this many are dropped from a test space.
pub const TEST_SPACE_CAP: usize = 100_000;

/// Prefix used to probe behavior outside every list.
pub const PROBE_PREFIX: Ipv4Prefix = Ipv4Prefix::from_octets([203, 0, 113, 0], 24);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("policy '{policy}' references undefined {kind} '{name}'")]
    Dangling {
        policy: String,
        kind: &'static str,
        name: String,
    },
    #[error("undefined policy '{0}'")]
    UndefinedPolicy(String),
    #[error("constraint is unsatisfiable over the test space")]
    Unsatisfiable,
}

/// A concrete BGP route as seen by a policy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RouteAnnouncement {
    pub prefix: Ipv4Prefix,
    #[serde(default)]
    pub communities: BTreeSet<CommunityValue>,
    #[serde(default)]
    pub med: u32,
    pub origin_protocol: Protocol,
    #[serde(default)]
    pub as_path: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_pref: Option<u32>,
}

impl RouteAnnouncement {
    pub fn new(prefix: Ipv4Prefix, origin_protocol: Protocol) -> Self {
        RouteAnnouncement {
            prefix,
            communities: BTreeSet::new(),
            med: 0,
            origin_protocol,
            as_path: Vec::new(),
            local_pref: None,
        }
    }

    pub fn with_communities(mut self, cs: impl IntoIterator<Item = CommunityValue>) -> Self {
        self.communities.extend(cs);
        self
    }
}

pub fn format_communities(cs: &BTreeSet<CommunityValue>) -> String {
    let inner: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
    format!("{{{}}}", inner.join(", "))
}

impl fmt::Display for RouteAnnouncement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "prefix {}, communities {}, med {}, protocol {}",
            self.prefix,
            format_communities(&self.communities),
            self.med,
            self.origin_protocol
        )
    }
}

/// Which clause decided an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseRef {
    Seq(u32),
    Default,
}

impl fmt::Display for ClauseRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClauseRef::Seq(s) => write!(f, "clause {s}"),
            ClauseRef::Default => f.write_str("the default action"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyOutcome {
    Accepted { route: RouteAnnouncement, at: ClauseRef },
    Denied { at: ClauseRef },
}

impl PolicyOutcome {
    pub fn action(&self) -> Action {
        match self {
            PolicyOutcome::Accepted { .. } => Action::Permit,
            PolicyOutcome::Denied { .. } => Action::Deny,
        }
    }

    pub fn at(&self) -> ClauseRef {
        match self {
            PolicyOutcome::Accepted { at, .. } | PolicyOutcome::Denied { at } => *at,
        }
    }

    pub fn route(&self) -> Option<&RouteAnnouncement> {
        match self {
            PolicyOutcome::Accepted { route, .. } => Some(route),
            PolicyOutcome::Denied { .. } => None,
        }
    }
}

/// Prefix lists and community lists that policies resolve names against,
/// plus the extra values the test space should cover.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ListEnv {
    pub prefix_lists: BTreeMap<String, Vec<PrefixListEntry>>,
    pub community_lists: BTreeMap<String, Vec<CommunityValue>>,
    /// Exact prefixes worth probing even though no list names them.
    pub extra_prefixes: BTreeSet<Ipv4Prefix>,
    pub extra_communities: BTreeSet<CommunityValue>,
    pub meds: BTreeSet<u32>,
}

impl ListEnv {
    /// Everything a config's policies can mention, including its announced
    /// networks and interface subnets.
    pub fn from_config(config: &RouterConfig) -> Self {
        let mut env = ListEnv {
            prefix_lists: config.prefix_lists.clone(),
            community_lists: config.community_lists.clone(),
            ..Default::default()
        };
        env.extra_prefixes.extend(config.bgp_networks.iter().copied());
        env.extra_prefixes.extend(config.interfaces.iter().map(|i| i.subnet()));
        for policy in config.policies.values() {
            env.note_policy(policy);
        }
        env
    }

    pub fn note_policy(&mut self, policy: &RoutePolicy) {
        for clause in &policy.clauses {
            for set in &clause.sets {
                match set {
                    SetAction::Med(m) => {
                        self.meds.insert(*m);
                    }
                    SetAction::Community { values, .. } => self.extra_communities.extend(values.iter().copied()),
                    SetAction::LocalPref(_) => {}
                }
            }
        }
    }

    /// Union of two environments. Same-named lists have their entries
    /// concatenated; that only matters for test-space coverage.
    pub fn union(&self, other: &ListEnv) -> ListEnv {
        let mut out = self.clone();
        for (name, entries) in &other.prefix_lists {
            out.prefix_lists
                .entry(name.clone())
                .or_default()
                .extend(entries.iter().cloned());
        }
        for (name, values) in &other.community_lists {
            out.community_lists
                .entry(name.clone())
                .or_default()
                .extend(values.iter().copied());
        }
        out.extra_prefixes.extend(other.extra_prefixes.iter().copied());
        out.extra_communities.extend(other.extra_communities.iter().copied());
        out.meds.extend(other.meds.iter().copied());
        out
    }

    fn mentioned_communities(&self) -> BTreeSet<CommunityValue> {
        let mut all: BTreeSet<CommunityValue> = self.community_lists.values().flatten().copied().collect();
        all.extend(self.extra_communities.iter().copied());
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixListVerdict {
    Permit,
    Deny,
    NoMatch,
}

/// First entry (by seq) whose range covers `q` decides.
pub fn match_prefix_list(entries: &[PrefixListEntry], q: &Ipv4Prefix) -> PrefixListVerdict {
    let mut ordered: Vec<&PrefixListEntry> = entries.iter().collect();
    ordered.sort_by_key(|e| e.seq);
    match ordered.into_iter().find(|e| e.covers(q)) {
        Some(e) if e.action == Action::Permit => PrefixListVerdict::Permit,
        Some(_) => PrefixListVerdict::Deny,
        None => PrefixListVerdict::NoMatch,
    }
}

fn cond_holds(policy: &str, cond: &MatchCond, env: &ListEnv, ann: &RouteAnnouncement) -> Result<bool, PolicyError> {
    match cond {
        MatchCond::PrefixList(name) => {
            let entries = env.prefix_lists.get(name).ok_or_else(|| PolicyError::Dangling {
                policy: policy.to_string(),
                kind: "prefix-list",
                name: name.clone(),
            })?;
            Ok(match_prefix_list(entries, &ann.prefix) == PrefixListVerdict::Permit)
        }
        MatchCond::CommunityList(name) => {
            let values = env.community_lists.get(name).ok_or_else(|| PolicyError::Dangling {
                policy: policy.to_string(),
                kind: "community-list",
                name: name.clone(),
            })?;
            Ok(values.iter().any(|v| ann.communities.contains(v)))
        }
        MatchCond::Protocol(p) => Ok(ann.origin_protocol == *p),
    }
}

/// Whether every match condition of `clause` holds for `ann`.
pub fn clause_applies(
    policy: &str,
    clause: &PolicyClause,
    env: &ListEnv,
    ann: &RouteAnnouncement,
) -> Result<bool, PolicyError> {
    for cond in &clause.matches {
        if !cond_holds(policy, cond, env, ann)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn apply_sets(sets: &[SetAction], ann: &RouteAnnouncement) -> RouteAnnouncement {
    let mut out = ann.clone();
    for set in sets {
        match set {
            SetAction::Med(m) => out.med = *m,
            SetAction::Community { values, additive: true } => out.communities.extend(values.iter().copied()),
            SetAction::Community {
                values,
                additive: false,
            } => out.communities = values.clone(),
            SetAction::LocalPref(lp) => out.local_pref = Some(*lp),
        }
    }
    out
}

/// Runs `ann` through the policy: clauses in seq order, the first one whose
/// matches all hold decides, otherwise the default action applies.
pub fn eval_policy(policy: &RoutePolicy, env: &ListEnv, ann: &RouteAnnouncement) -> Result<PolicyOutcome, PolicyError> {
    let mut clauses: Vec<&PolicyClause> = policy.clauses.iter().collect();
    clauses.sort_by_key(|c| c.seq);
    for clause in clauses {
        if clause_applies(&policy.name, clause, env, ann)? {
            let at = ClauseRef::Seq(clause.seq);
            return Ok(match clause.action {
                Action::Deny => PolicyOutcome::Denied { at },
                Action::Permit => PolicyOutcome::Accepted {
                    route: apply_sets(&clause.sets, ann),
                    at,
                },
            });
        }
    }
    Ok(match policy.default_action {
        Action::Deny => PolicyOutcome::Denied { at: ClauseRef::Default },
        Action::Permit => PolicyOutcome::Accepted {
            route: ann.clone(),
            at: ClauseRef::Default,
        },
    })
}

/// Prefixes inside `prefix` whose length lies in `min_len..=max_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixRange {
    pub prefix: Ipv4Prefix,
    pub min_len: u8,
    pub max_len: u8,
}

impl PrefixRange {
    pub fn exact(prefix: Ipv4Prefix) -> Self {
        PrefixRange {
            prefix,
            min_len: prefix.len(),
            max_len: prefix.len(),
        }
    }

    pub fn covers(&self, q: &Ipv4Prefix) -> bool {
        self.prefix.contains(q) && self.min_len <= q.len() && q.len() <= self.max_len
    }
}

/// Restricts the announcements a search or assertion ranges over.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteConstraint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix_range: Option<PrefixRange>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub must_have: BTreeSet<CommunityValue>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub must_not_have: BTreeSet<CommunityValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<Protocol>,
}

impl RouteConstraint {
    pub fn has_community(c: CommunityValue) -> Self {
        RouteConstraint {
            must_have: [c].into(),
            ..Default::default()
        }
    }

    pub fn exact_prefix(p: Ipv4Prefix) -> Self {
        RouteConstraint {
            prefix_range: Some(PrefixRange::exact(p)),
            ..Default::default()
        }
    }

    pub fn admits(&self, ann: &RouteAnnouncement) -> bool {
        self.prefix_range.as_ref().is_none_or(|r| r.covers(&ann.prefix))
            && self.must_have.iter().all(|c| ann.communities.contains(c))
            && !self.must_not_have.iter().any(|c| ann.communities.contains(c))
            && self.protocol.is_none_or(|p| p == ann.origin_protocol)
    }

    /// Plain-English description used in prompts, e.g.
    /// "that have the community 100:1".
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        if let Some(r) = &self.prefix_range {
            if r.min_len == r.prefix.len() && r.max_len == r.prefix.len() {
                parts.push(format!("for the prefix {}", r.prefix));
            } else {
                parts.push(format!(
                    "for prefixes within {} with length {} to {}",
                    r.prefix, r.min_len, r.max_len
                ));
            }
        }
        let list = |cs: &BTreeSet<CommunityValue>| cs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
        match self.must_have.len() {
            0 => {}
            1 => parts.push(format!("that have the community {}", list(&self.must_have))),
            _ => parts.push(format!("that have the communities {}", list(&self.must_have))),
        }
        if !self.must_not_have.is_empty() {
            parts.push(format!(
                "that do not have the communities {}",
                list(&self.must_not_have)
            ));
        }
        if let Some(p) = self.protocol {
            parts.push(format!("from protocol {p}"));
        }
        parts.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSpace {
    pub announcements: Vec<RouteAnnouncement>,
    pub truncated: bool,
}

struct Atom {
    prefix: Ipv4Prefix,
    ge: u8,
    le: u8,
}

fn atoms(envs: &[&ListEnv], constraint: Option<&RouteConstraint>) -> Vec<Atom> {
    let mut out = Vec::new();
    for env in envs {
        for entry in env.prefix_lists.values().flatten() {
            let (ge, le) = entry.length_range();
            out.push(Atom {
                prefix: entry.prefix,
                ge,
                le,
            });
        }
        for p in &env.extra_prefixes {
            out.push(Atom {
                prefix: *p,
                ge: p.len(),
                le: p.len(),
            });
        }
    }
    if let Some(r) = constraint.and_then(|c| c.prefix_range.as_ref()) {
        out.push(Atom {
            prefix: r.prefix,
            ge: r.min_len,
            le: r.max_len,
        });
    }
    out
}

/// Finds some `len`-bit prefix inside `node` that avoids every prefix in
/// `avoid`, preferring zero bits. `None` when the avoided prefixes cover
/// all of `node` at that length.
fn avoiding_representative(node: Ipv4Prefix, len: u8, avoid: &[Ipv4Prefix]) -> Option<Ipv4Prefix> {
    fn walk(bits: u32, depth: u8, len: u8, avoid: &[Ipv4Prefix]) -> Option<u32> {
        let here = Ipv4Prefix::new(bits.into(), depth);
        if avoid.iter().any(|d| d.len() == depth && d.bits() == here.bits()) {
            return None;
        }
        // Only avoided prefixes still compatible with this branch can block it.
        let live: Vec<Ipv4Prefix> = avoid
            .iter()
            .filter(|d| d.len() > depth && here.contains(d))
            .copied()
            .collect();
        if depth == len || live.is_empty() {
            return Some(bits);
        }
        let bit = 1u32 << (31 - u32::from(depth));
        walk(bits, depth + 1, len, &live).or_else(|| walk(bits | bit, depth + 1, len, &live))
    }
    let relevant: Vec<Ipv4Prefix> = avoid.iter().filter(|d| d.len() <= len).copied().collect();
    walk(node.bits(), node.len(), len, &relevant).map(|b| Ipv4Prefix::new(b.into(), len))
}

fn candidate_prefixes(atoms: &[Atom]) -> Vec<Ipv4Prefix> {
    let mut set = BTreeSet::new();
    set.insert(PROBE_PREFIX);
    let mut lengths = BTreeSet::new();
    for a in atoms {
        let probe_lengths = [
            a.prefix.len(),
            a.ge,
            a.le,
            a.le.saturating_add(1).min(32),
            a.ge.saturating_sub(1),
        ];
        for len in probe_lengths {
            set.insert(a.prefix.with_len(len));
            lengths.insert(len);
        }
    }
    // One representative per (deepest containing list prefix, length) class,
    // so regions not covered by any more specific entry are probed too.
    let mut nodes: BTreeSet<Ipv4Prefix> = atoms.iter().map(|a| a.prefix).collect();
    let all_nodes: Vec<Ipv4Prefix> = nodes.iter().copied().collect();
    if !atoms.is_empty() {
        nodes.insert(Ipv4Prefix::new(Ipv4Addr::UNSPECIFIED, 0));
    }
    for node in &nodes {
        let is_atom = all_nodes.contains(node);
        let deeper: Vec<Ipv4Prefix> = all_nodes
            .iter()
            .filter(|d| {
                if is_atom {
                    d.len() > node.len() && node.contains(d)
                } else {
                    true
                }
            })
            .copied()
            .collect();
        for &len in lengths.iter().filter(|&&l| l >= node.len()) {
            if let Some(rep) = avoiding_representative(*node, len, &deeper) {
                set.insert(rep);
            }
        }
    }
    set.into_iter().collect()
}

fn candidate_community_sets(mentioned: &BTreeSet<CommunityValue>) -> Vec<BTreeSet<CommunityValue>> {
    let mut out: Vec<BTreeSet<CommunityValue>> = vec![BTreeSet::new()];
    let all: Vec<CommunityValue> = mentioned.iter().copied().collect();
    for c in &all {
        out.push([*c].into());
    }
    out.push(mentioned.clone());
    if all.len() <= 6 {
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                out.push([all[i], all[j]].into());
            }
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|s| seen.insert(s.clone()));
    out
}

/// Deterministic finite set of announcements covering the atomic predicates
/// of the given environments: prefixes × community sets × MEDs × protocols,
/// filtered by `constraint` and capped at [`TEST_SPACE_CAP`].
pub fn build_test_space(envs: &[&ListEnv], constraint: Option<&RouteConstraint>) -> TestSpace {
    let prefixes = candidate_prefixes(&atoms(envs, constraint));
    let mut mentioned = BTreeSet::new();
    let mut meds: BTreeSet<u32> = [0].into();
    for env in envs {
        mentioned.extend(env.mentioned_communities());
        meds.extend(env.meds.iter().copied());
    }
    if let Some(c) = constraint {
        mentioned.extend(c.must_have.iter().copied());
        mentioned.extend(c.must_not_have.iter().copied());
    }
    // A rewrite is only observable on input values it does not itself
    // produce, so rewriting environments also get one unmentioned value.
    if envs.iter().any(|e| !e.meds.is_empty()) {
        let fresh = meds.iter().next_back().map_or(1, |m| m.saturating_add(1));
        meds.insert(fresh);
    }
    if envs.iter().any(|e| !e.extra_communities.is_empty()) {
        if let Some(fresh) = (0..=u16::MAX)
            .rev()
            .map(|l| CommunityValue::new(u16::MAX, l))
            .find(|c| !mentioned.contains(c))
        {
            mentioned.insert(fresh);
        }
    }
    let community_sets = candidate_community_sets(&mentioned);

    // Each axis is already duplicate-free, so filtering per axis keeps the
    // product duplicate-free and in the same order.
    let admit = constraint.cloned().unwrap_or_default();
    let prefixes: Vec<&Ipv4Prefix> = prefixes
        .iter()
        .filter(|p| admit.prefix_range.as_ref().is_none_or(|r| r.covers(p)))
        .collect();
    let community_sets: Vec<&BTreeSet<CommunityValue>> = community_sets
        .iter()
        .filter(|cs| admit.must_have.is_subset(cs) && admit.must_not_have.is_disjoint(cs))
        .collect();
    let protocols: Vec<Protocol> = Protocol::ALL
        .into_iter()
        .filter(|p| admit.protocol.is_none_or(|q| q == *p))
        .collect();

    let mut announcements = Vec::new();
    let mut truncated = false;
    'outer: for prefix in prefixes {
        for cs in &community_sets {
            for med in &meds {
                for proto in &protocols {
                    if announcements.len() == TEST_SPACE_CAP {
                        truncated = true;
                        break 'outer;
                    }
                    announcements.push(RouteAnnouncement {
                        prefix: *prefix,
                        communities: (*cs).clone(),
                        med: *med,
                        origin_protocol: *proto,
                        as_path: Vec::new(),
                        local_pref: None,
                    });
                }
            }
        }
    }
    TestSpace {
        announcements,
        truncated,
    }
}

/// A concrete announcement on which a policy disagrees with what was expected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub announcement: RouteAnnouncement,
    pub actual: Action,
    pub expected: Action,
    pub at_clause: ClauseRef,
    /// Set when the route was permitted but lacked a community it should carry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_community: Option<CommunityValue>,
}

/// Looks for an announcement admitted by `constraint` whose outcome differs
/// from `expected`. Returns the first one in test-space order.
pub fn search_policy(
    policy: &RoutePolicy,
    env: &ListEnv,
    constraint: &RouteConstraint,
    expected: Action,
) -> Result<Option<Counterexample>, PolicyError> {
    search(policy, env, constraint, |outcome| {
        (outcome.action() != expected).then_some((expected, None))
    })
}

/// Looks for an announcement admitted by `constraint` that the policy denies
/// or permits without attaching `tag`.
pub fn search_tagging(
    policy: &RoutePolicy,
    env: &ListEnv,
    constraint: &RouteConstraint,
    tag: CommunityValue,
) -> Result<Option<Counterexample>, PolicyError> {
    search(policy, env, constraint, |outcome| match outcome {
        PolicyOutcome::Denied { .. } => Some((Action::Permit, None)),
        PolicyOutcome::Accepted { route, .. } if !route.communities.contains(&tag) => Some((Action::Permit, Some(tag))),
        PolicyOutcome::Accepted { .. } => None,
    })
}

fn search(
    policy: &RoutePolicy,
    env: &ListEnv,
    constraint: &RouteConstraint,
    violates: impl Fn(&PolicyOutcome) -> Option<(Action, Option<CommunityValue>)>,
) -> Result<Option<Counterexample>, PolicyError> {
    let mut scoped = env.clone();
    scoped.note_policy(policy);
    let space = build_test_space(&[&scoped], Some(constraint));
    if space.announcements.is_empty() {
        return Err(PolicyError::Unsatisfiable);
    }
    for ann in space.announcements {
        let outcome = eval_policy(policy, env, &ann)?;
        if let Some((expected, missing_community)) = violates(&outcome) {
            return Ok(Some(Counterexample {
                actual: outcome.action(),
                at_clause: outcome.at(),
                announcement: ann,
                expected,
                missing_community,
            }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Import,
    Export,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Import => "import",
            Direction::Export => "export",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Permit,
    Deny,
    /// Permit, and the result must carry this community.
    Tag(CommunityValue),
}

/// One local-policy obligation on the policy attached to a BGP session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyAssertion {
    pub neighbor: Ipv4Addr,
    pub direction: Direction,
    pub constraint: RouteConstraint,
    pub expect: Expectation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyViolation {
    pub neighbor: Ipv4Addr,
    pub direction: Direction,
    /// Name of the attached policy; `None` when the session has none.
    pub policy: Option<String>,
    pub constraint: RouteConstraint,
    pub counterexample: Counterexample,
}

/// Policy that stands in for "no policy attached": permit everything.
pub fn permit_all(name: &str) -> RoutePolicy {
    RoutePolicy::new(name).with_clause(PolicyClause::new(10, Action::Permit))
}

/// Checks each assertion against `config`. Assertions about sessions the
/// config does not declare are skipped; the topology check reports those.
pub fn verify_local_policy(
    config: &RouterConfig,
    assertions: &[PolicyAssertion],
) -> Result<Vec<PolicyViolation>, PolicyError> {
    let env = ListEnv::from_config(config);
    let mut out = Vec::new();
    for assertion in assertions {
        let Some(neighbor) = config.neighbor(assertion.neighbor) else {
            continue;
        };
        let attached = match assertion.direction {
            Direction::Import => &neighbor.import_policy,
            Direction::Export => &neighbor.export_policy,
        };
        let implicit;
        let policy = match attached {
            Some(name) => config
                .policies
                .get(name)
                .ok_or_else(|| PolicyError::UndefinedPolicy(name.clone()))?,
            None => {
                implicit = permit_all("");
                &implicit
            }
        };
        let cex = match assertion.expect {
            Expectation::Permit => search_policy(policy, &env, &assertion.constraint, Action::Permit)?,
            Expectation::Deny => search_policy(policy, &env, &assertion.constraint, Action::Deny)?,
            Expectation::Tag(tag) => search_tagging(policy, &env, &assertion.constraint, tag)?,
        };
        if let Some(counterexample) = cex {
            out.push(PolicyViolation {
                neighbor: assertion.neighbor,
                direction: assertion.direction,
                policy: attached.clone(),
                constraint: assertion.constraint.clone(),
                counterexample,
            });
        }
    }
    Ok(out)
}

/// Bits helper shared with tests: the `len`-bit prefix of `addr`.
pub fn prefix_of(addr: u32, len: u8) -> Ipv4Prefix {
    Ipv4Prefix::new((addr & mask_bits(len)).into(), len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontends::parse_cisco;

    fn p(s: &str) -> Ipv4Prefix {
        s.parse().unwrap()
    }

    fn c(s: &str) -> CommunityValue {
        s.parse().unwrap()
    }

    const AND_FILTER: &str = "\
ip community-list 1 permit 100:1
ip community-list 2 permit 101:1
ip community-list 3 permit 102:1
ip community-list 4 permit 103:1
ip community-list 5 permit 104:1

route-map FILTER_COMM_OUT_R2 deny 10
 match community 2
 match community 3
 match community 4
 match community 5
route-map FILTER_COMM_OUT_R2 permit 20
";

    fn and_filter() -> (RoutePolicy, ListEnv) {
        let parsed = parse_cisco(AND_FILTER);
        assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
        let env = ListEnv::from_config(&parsed.config);
        (parsed.config.policies["FILTER_COMM_OUT_R2"].clone(), env)
    }

    #[test]
    fn prefix_list_ge_matches_longer() {
        let entries = vec![PrefixListEntry::new(5, Action::Permit, p("1.2.3.0/24")).ge(24)];
        assert_eq!(match_prefix_list(&entries, &p("1.2.3.0/25")), PrefixListVerdict::Permit);
        assert_eq!(
            match_prefix_list(&entries, &p("1.2.0.0/16")),
            PrefixListVerdict::NoMatch
        );
    }

    #[test]
    fn prefix_list_exact_only_matches_its_length() {
        let entries = vec![PrefixListEntry::new(5, Action::Permit, p("1.2.3.0/24"))];
        let matching: Vec<u8> = (0..=32)
            .filter(|&m| match_prefix_list(&entries, &p("1.2.3.0/24").with_len(m)) == PrefixListVerdict::Permit)
            .collect();
        assert_eq!(matching, vec![24]);
        assert_eq!(
            match_prefix_list(&entries, &p("1.2.3.0/25")),
            PrefixListVerdict::NoMatch
        );
    }

    #[test]
    fn prefix_list_first_match_wins() {
        let entries = vec![
            PrefixListEntry::new(10, Action::Permit, p("10.0.0.0/8")).le(32),
            PrefixListEntry::new(5, Action::Deny, p("10.1.0.0/16")).le(32),
        ];
        assert_eq!(match_prefix_list(&entries, &p("10.1.2.0/24")), PrefixListVerdict::Deny);
        assert_eq!(
            match_prefix_list(&entries, &p("10.2.0.0/24")),
            PrefixListVerdict::Permit
        );
    }

    #[test]
    fn and_semantics_accepts_single_tag() {
        let (policy, env) = and_filter();
        let ann = RouteAnnouncement::new(PROBE_PREFIX, Protocol::Bgp).with_communities([c("101:1")]);
        let out = eval_policy(&policy, &env, &ann).unwrap();
        assert_eq!(out.action(), Action::Permit);
        assert_eq!(out.at(), ClauseRef::Seq(20));

        let all = ann.with_communities([c("102:1"), c("103:1"), c("104:1")]);
        assert_eq!(
            eval_policy(&policy, &env, &all).unwrap(),
            PolicyOutcome::Denied { at: ClauseRef::Seq(10) }
        );
    }

    #[test]
    fn community_set_additive_vs_replace() {
        let mut env = ListEnv::default();
        env.extra_communities.insert(c("100:1"));
        let set = |additive| {
            RoutePolicy::new("ADD").with_clause(PolicyClause::new(10, Action::Permit).with_set(SetAction::Community {
                values: [c("100:1")].into(),
                additive,
            }))
        };
        let ann = RouteAnnouncement::new(PROBE_PREFIX, Protocol::Bgp).with_communities([c("55:5")]);
        let added = eval_policy(&set(true), &env, &ann).unwrap();
        assert_eq!(added.route().unwrap().communities, [c("55:5"), c("100:1")].into());
        let replaced = eval_policy(&set(false), &env, &ann).unwrap();
        assert_eq!(replaced.route().unwrap().communities, [c("100:1")].into());
    }

    #[test]
    fn search_finds_and_counterexample() {
        let (policy, env) = and_filter();
        let cex = search_policy(&policy, &env, &RouteConstraint::has_community(c("101:1")), Action::Deny)
            .unwrap()
            .expect("AND semantics leaks routes tagged 101:1");
        assert_eq!(cex.actual, Action::Permit);
        assert!(cex.announcement.communities.contains(&c("101:1")));
        assert_eq!(cex.announcement.communities.len(), 1);
        assert_eq!(cex.at_clause, ClauseRef::Seq(20));
    }

    #[test]
    fn search_per_clause_rewrite_is_clean() {
        let (_, env) = and_filter();
        let mut policy = RoutePolicy::new("FILTER_COMM_OUT_R2");
        for (i, list) in ["2", "3", "4", "5"].iter().enumerate() {
            policy.clauses.push(
                PolicyClause::new(10 * (i as u32 + 1), Action::Deny)
                    .with_match(MatchCond::CommunityList(list.to_string())),
            );
        }
        policy.clauses.push(PolicyClause::new(100, Action::Permit));
        for tag in ["101:1", "102:1", "103:1", "104:1"] {
            let r = search_policy(&policy, &env, &RouteConstraint::has_community(c(tag)), Action::Deny).unwrap();
            assert_eq!(r, None, "{tag}");
        }
    }

    #[test]
    fn search_empty_default_deny_policy() {
        let policy = RoutePolicy::new("EMPTY");
        let r = search_policy(&policy, &ListEnv::default(), &RouteConstraint::default(), Action::Deny).unwrap();
        assert_eq!(r, None);
    }

    #[test]
    fn search_reports_unsatisfiable() {
        let constraint = RouteConstraint {
            must_have: [c("1:1")].into(),
            must_not_have: [c("1:1")].into(),
            ..Default::default()
        };
        let r = search_policy(&permit_all("X"), &ListEnv::default(), &constraint, Action::Deny);
        assert_eq!(r, Err(PolicyError::Unsatisfiable));
    }

    #[test]
    fn tagging_search() {
        let tagged =
            RoutePolicy::new("TAG").with_clause(PolicyClause::new(10, Action::Permit).with_set(SetAction::Community {
                values: [c("100:1")].into(),
                additive: true,
            }));
        let env = ListEnv::default();
        assert_eq!(
            search_tagging(&tagged, &env, &RouteConstraint::default(), c("100:1")).unwrap(),
            None
        );
        let cex = search_tagging(&permit_all("X"), &env, &RouteConstraint::default(), c("100:1"))
            .unwrap()
            .unwrap();
        assert_eq!(cex.missing_community, Some(c("100:1")));
    }

    #[test]
    fn space_covers_ge_boundaries() {
        let mut env = ListEnv::default();
        env.prefix_lists.insert(
            "our-networks".into(),
            vec![PrefixListEntry::new(5, Action::Permit, p("1.2.3.0/24")).ge(24)],
        );
        let space = build_test_space(&[&env], None);
        let prefixes: BTreeSet<Ipv4Prefix> = space.announcements.iter().map(|a| a.prefix).collect();
        for want in ["1.2.3.0/24", "1.2.3.0/32", "1.2.2.0/23", "203.0.113.0/24"] {
            assert!(prefixes.contains(&p(want)), "{want} missing");
        }
        assert!(!space.truncated);
    }

    #[test]
    fn space_community_candidates_for_five_tags() {
        let (_, env) = and_filter();
        let space = build_test_space(&[&env], None);
        let sets: BTreeSet<BTreeSet<CommunityValue>> =
            space.announcements.iter().map(|a| a.communities.clone()).collect();
        assert_eq!(sets.len(), 17);
        assert!(sets.contains(&BTreeSet::new()));
        assert!(sets.contains(&[c("100:1"), c("101:1"), c("102:1"), c("103:1"), c("104:1")].into()));
    }

    #[test]
    fn space_for_empty_env() {
        let space = build_test_space(&[&ListEnv::default()], None);
        assert_eq!(space.announcements.len(), 4);
        assert!(space
            .announcements
            .iter()
            .all(|a| a.prefix == PROBE_PREFIX && a.communities.is_empty() && a.med == 0));
        let protos: Vec<Protocol> = space.announcements.iter().map(|a| a.origin_protocol).collect();
        assert_eq!(protos, Protocol::ALL.to_vec());
    }

    #[test]
    fn space_probes_uncovered_sibling() {
        // 10.0.0.0/9 is denied first; only the 10.128.0.0/9 half reaches the permit.
        let mut env = ListEnv::default();
        env.prefix_lists.insert(
            "a".into(),
            vec![PrefixListEntry::new(5, Action::Permit, p("10.0.0.0/9")).le(32)],
        );
        env.prefix_lists.insert(
            "b".into(),
            vec![PrefixListEntry::new(5, Action::Permit, p("10.0.0.0/8")).ge(9).le(32)],
        );
        let space = build_test_space(&[&env], None);
        assert!(space.announcements.iter().any(|a| a.prefix == p("10.128.0.0/9")));
    }

    #[test]
    fn constraint_description() {
        assert_eq!(
            RouteConstraint::has_community(c("100:1")).describe(),
            "that have the community 100:1"
        );
        assert_eq!(
            RouteConstraint::exact_prefix(p("100.0.0.0/24")).describe(),
            "for the prefix 100.0.0.0/24"
        );
    }
}
