//! Vendor-neutral intermediate representation of a single router.
//!
//! Both frontends parse into [`RouterConfig`], and the differ, policy engine
//! and simulator only ever look at this representation. [`canonicalize`]
//! produces the normal form used for equality checks; [`validate_ir`] reports
//! broken invariants as data.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseValueError {
    #[error("invalid IPv4 prefix '{0}'")]
    Prefix(String),
    #[error("prefix '{0}' has bits set beyond its length")]
    HostBits(String),
    #[error("invalid community '{0}'")]
    Community(String),
    #[error("unknown protocol '{0}'")]
    Protocol(String),
}

/// An IPv4 prefix whose address bits beyond `len` are always zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ipv4Prefix {
    addr: Ipv4Addr,
    len: u8,
}

pub fn mask_bits(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - u32::from(len.min(32)))
    }
}

impl Ipv4Prefix {
    /// Builds a prefix, clearing any bits beyond `len`. Lengths above 32 are clamped.
    pub fn new(addr: Ipv4Addr, len: u8) -> Self {
        let len = len.min(32);
        Ipv4Prefix {
            addr: Ipv4Addr::from(u32::from(addr) & mask_bits(len)),
            len,
        }
    }

    pub const fn from_octets(octets: [u8; 4], len: u8) -> Self {
        Ipv4Prefix {
            addr: Ipv4Addr::new(octets[0], octets[1], octets[2], octets[3]),
            len,
        }
    }

    pub fn addr(&self) -> Ipv4Addr {
        self.addr
    }

    /// Prefix length in bits.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn bits(&self) -> u32 {
        u32::from(self.addr)
    }

    /// True when `other` lies inside (or equals) this prefix.
    pub fn contains(&self, other: &Ipv4Prefix) -> bool {
        other.len >= self.len && (other.bits() & mask_bits(self.len)) == self.bits()
    }

    pub fn contains_addr(&self, addr: Ipv4Addr) -> bool {
        (u32::from(addr) & mask_bits(self.len)) == self.bits()
    }

    /// The same address re-cut at a different length.
    pub fn with_len(&self, len: u8) -> Ipv4Prefix {
        Ipv4Prefix::new(self.addr, len)
    }

    /// Dotted-quad netmask, e.g. `255.255.255.0` for a /24.
    pub fn netmask(&self) -> Ipv4Addr {
        Ipv4Addr::from(mask_bits(self.len))
    }

    /// Parses `a.b.c.d/n`, silently clearing host bits.
    pub fn parse_truncating(s: &str) -> Result<Self, ParseValueError> {
        let (addr, len) = split_prefix(s)?;
        Ok(Ipv4Prefix::new(addr, len))
    }
}

fn split_prefix(s: &str) -> Result<(Ipv4Addr, u8), ParseValueError> {
    let err = || ParseValueError::Prefix(s.to_string());
    let (addr, len) = s.split_once('/').ok_or_else(err)?;
    let addr: Ipv4Addr = addr.parse().map_err(|_| err())?;
    if len.is_empty() || !len.bytes().all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let len: u8 = len.parse().map_err(|_| err())?;
    if len > 32 {
        return Err(err());
    }
    Ok((addr, len))
}

/// Converts a dotted netmask such as `255.255.255.0` into a prefix length.
pub fn netmask_to_len(mask: Ipv4Addr) -> Option<u8> {
    let bits = u32::from(mask);
    let len = bits.leading_ones();
    (bits.checked_shl(len).unwrap_or(0) == 0).then_some(len as u8)
}

impl FromStr for Ipv4Prefix {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (addr, len) = split_prefix(s)?;
        let prefix = Ipv4Prefix::new(addr, len);
        if prefix.addr != addr {
            return Err(ParseValueError::HostBits(s.to_string()));
        }
        Ok(prefix)
    }
}

impl fmt::Display for Ipv4Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

impl Serialize for Ipv4Prefix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ipv4Prefix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A standard BGP community, written `high:low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CommunityValue {
    pub high: u16,
    pub low: u16,
}

impl CommunityValue {
    pub const fn new(high: u16, low: u16) -> Self {
        CommunityValue { high, low }
    }
}

impl FromStr for CommunityValue {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseValueError::Community(s.to_string());
        let (h, l) = s.split_once(':').ok_or_else(err)?;
        let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
        if !digits(h) || !digits(l) {
            return Err(err());
        }
        Ok(CommunityValue {
            high: h.parse().map_err(|_| err())?,
            low: l.parse().map_err(|_| err())?,
        })
    }
}

impl fmt::Display for CommunityValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.high, self.low)
    }
}

impl Serialize for CommunityValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CommunityValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Permit,
    Deny,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Permit => "permit",
            Action::Deny => "deny",
        })
    }
}

/// Protocol a route was learned from. Declaration order is the order used
/// when enumerating announcements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Bgp,
    Connected,
    Static,
    Ospf,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::Bgp, Protocol::Connected, Protocol::Static, Protocol::Ospf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Bgp => "bgp",
            Protocol::Connected => "connected",
            Protocol::Static => "static",
            Protocol::Ospf => "ospf",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bgp" => Ok(Protocol::Bgp),
            "ospf" => Ok(Protocol::Ospf),
            "connected" | "direct" => Ok(Protocol::Connected),
            "static" => Ok(Protocol::Static),
            other => Err(ParseValueError::Protocol(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interface {
    pub name: String,
    pub address: Ipv4Addr,
    pub mask_length: u8,
}

impl Interface {
    pub fn new(name: impl Into<String>, address: Ipv4Addr, mask_length: u8) -> Self {
        Interface {
            name: name.into(),
            address,
            mask_length,
        }
    }

    /// The connected subnet of this interface.
    pub fn subnet(&self) -> Ipv4Prefix {
        Ipv4Prefix::new(self.address, self.mask_length)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BgpNeighbor {
    pub peer_address: Ipv4Addr,
    pub remote_as: u32,
    pub local_as: u32,
    #[serde(default)]
    pub import_policy: Option<String>,
    #[serde(default)]
    pub export_policy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Redistribution {
    pub protocol: Protocol,
    #[serde(default)]
    pub policy: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OspfLink {
    pub interface_name: String,
    pub cost: u32,
    pub passive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchCond {
    PrefixList(String),
    CommunityList(String),
    Protocol(Protocol),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetAction {
    Med(u32),
    Community {
        values: BTreeSet<CommunityValue>,
        additive: bool,
    },
    LocalPref(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyClause {
    pub seq: u32,
    pub action: Action,
    #[serde(default)]
    pub matches: Vec<MatchCond>,
    #[serde(default)]
    pub sets: Vec<SetAction>,
}

impl PolicyClause {
    pub fn new(seq: u32, action: Action) -> Self {
        PolicyClause {
            seq,
            action,
            matches: Vec::new(),
            sets: Vec::new(),
        }
    }

    pub fn with_match(mut self, m: MatchCond) -> Self {
        self.matches.push(m);
        self
    }

    pub fn with_set(mut self, s: SetAction) -> Self {
        self.sets.push(s);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutePolicy {
    pub name: String,
    pub clauses: Vec<PolicyClause>,
    pub default_action: Action,
}

impl RoutePolicy {
    pub fn new(name: impl Into<String>) -> Self {
        RoutePolicy {
            name: name.into(),
            clauses: Vec::new(),
            default_action: Action::Deny,
        }
    }

    pub fn with_clause(mut self, clause: PolicyClause) -> Self {
        self.clauses.push(clause);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixListEntry {
    pub seq: u32,
    pub action: Action,
    pub prefix: Ipv4Prefix,
    #[serde(default)]
    pub ge: Option<u8>,
    #[serde(default)]
    pub le: Option<u8>,
}

impl PrefixListEntry {
    pub fn new(seq: u32, action: Action, prefix: Ipv4Prefix) -> Self {
        PrefixListEntry {
            seq,
            action,
            prefix,
            ge: None,
            le: None,
        }
    }

    pub fn ge(mut self, ge: u8) -> Self {
        self.ge = Some(ge);
        self
    }

    pub fn le(mut self, le: u8) -> Self {
        self.le = Some(le);
        self
    }

    /// Effective inclusive length range. An absent `ge` means the prefix
    /// length; an absent `le` means 32 when `ge` is given (IOS semantics)
    /// and the prefix length otherwise.
    pub fn length_range(&self) -> (u8, u8) {
        let len = self.prefix.len();
        match (self.ge, self.le) {
            (None, None) => (len, len),
            (Some(ge), None) => (ge, 32),
            (None, Some(le)) => (len, le),
            (Some(ge), Some(le)) => (ge, le),
        }
    }

    /// Whether the entry's prefix range covers `q`.
    pub fn covers(&self, q: &Ipv4Prefix) -> bool {
        let (ge, le) = self.length_range();
        self.prefix.contains_addr(q.addr()) && q.len() >= self.prefix.len() && ge <= q.len() && q.len() <= le
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterConfig {
    pub name: String,
    pub asn: u32,
    pub router_id: Ipv4Addr,
    #[serde(default)]
    pub interfaces: Vec<Interface>,
    #[serde(default)]
    pub bgp_neighbors: Vec<BgpNeighbor>,
    #[serde(default)]
    pub bgp_networks: Vec<Ipv4Prefix>,
    #[serde(default)]
    pub redistributions: Vec<Redistribution>,
    #[serde(default)]
    pub ospf: Vec<OspfLink>,
    #[serde(default)]
    pub policies: BTreeMap<String, RoutePolicy>,
    #[serde(default)]
    pub prefix_lists: BTreeMap<String, Vec<PrefixListEntry>>,
    #[serde(default)]
    pub community_lists: BTreeMap<String, Vec<CommunityValue>>,
}

impl RouterConfig {
    pub fn new(name: impl Into<String>, asn: u32, router_id: Ipv4Addr) -> Self {
        RouterConfig {
            name: name.into(),
            asn,
            router_id,
            interfaces: Vec::new(),
            bgp_neighbors: Vec::new(),
            bgp_networks: Vec::new(),
            redistributions: Vec::new(),
            ospf: Vec::new(),
            policies: BTreeMap::new(),
            prefix_lists: BTreeMap::new(),
            community_lists: BTreeMap::new(),
        }
    }

    pub fn interface(&self, name: &str) -> Option<&Interface> {
        self.interfaces.iter().find(|i| i.name == name)
    }

    pub fn neighbor(&self, peer: Ipv4Addr) -> Option<&BgpNeighbor> {
        self.bgp_neighbors.iter().find(|n| n.peer_address == peer)
    }

    pub fn neighbor_mut(&mut self, peer: Ipv4Addr) -> Option<&mut BgpNeighbor> {
        self.bgp_neighbors.iter_mut().find(|n| n.peer_address == peer)
    }

    pub fn ospf_link(&self, interface: &str) -> Option<&OspfLink> {
        self.ospf.iter().find(|l| l.interface_name == interface)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("IR always serializes")
    }
}

/// A broken IR invariant; `field` locates it, `rule` says what is wrong.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrViolation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for IrViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Seq step used when renumbering prefix-list entries.
pub const PREFIX_LIST_SEQ_STEP: u32 = 5;

/// Returns the normal form of a valid config.
///
/// Clauses and list entries are ordered by seq, collections by name or
/// address, `ge`/`le` are made explicit, prefix-list entries are renumbered
/// 5, 10, 15, ... (only their order carries meaning), and a policy whose
/// default is Permit gets that default spelled out as a trailing catch-all
/// permit clause so the default itself is always Deny.
pub fn canonicalize(config: &RouterConfig) -> RouterConfig {
    let mut c = config.clone();

    c.interfaces.sort_by(|a, b| a.name.cmp(&b.name));
    c.bgp_neighbors.sort_by_key(|n| n.peer_address);
    c.bgp_networks.sort();
    c.bgp_networks.dedup();
    c.redistributions.sort();
    c.redistributions.dedup();
    c.ospf.sort_by(|a, b| a.interface_name.cmp(&b.interface_name));

    for policy in c.policies.values_mut() {
        policy.clauses.sort_by_key(|cl| cl.seq);
        for clause in &mut policy.clauses {
            clause.matches.sort();
            clause.matches.dedup();
            clause
                .sets
                .retain(|s| !matches!(s, SetAction::Community { values, additive: true } if values.is_empty()));
        }
        if policy.default_action == Action::Permit {
            let seq = policy.clauses.last().map_or(10, |cl| cl.seq + 10);
            policy.clauses.push(PolicyClause::new(seq, Action::Permit));
            policy.default_action = Action::Deny;
        }
    }

    for entries in c.prefix_lists.values_mut() {
        entries.sort_by_key(|e| e.seq);
        for (i, entry) in entries.iter_mut().enumerate() {
            let (ge, le) = entry.length_range();
            entry.ge = Some(ge);
            entry.le = Some(le);
            entry.seq = (i as u32 + 1) * PREFIX_LIST_SEQ_STEP;
        }
    }

    for values in c.community_lists.values_mut() {
        values.sort();
        values.dedup();
    }

    c
}

fn violation(field: impl Into<String>, rule: impl Into<String>) -> IrViolation {
    IrViolation {
        field: field.into(),
        rule: rule.into(),
    }
}

/// Checks every IR invariant. An empty result means the config is well formed
/// and every name it references resolves.
pub fn validate_ir(config: &RouterConfig) -> Vec<IrViolation> {
    let mut out = Vec::new();

    if config.asn == 0 {
        out.push(violation("asn", "must be positive"));
    }

    let mut seen = BTreeSet::new();
    for iface in &config.interfaces {
        if !seen.insert(iface.name.as_str()) {
            out.push(violation(
                format!("interfaces.{}", iface.name),
                "duplicate interface name",
            ));
        }
        if iface.mask_length > 32 {
            out.push(violation(
                format!("interfaces.{}.mask_length", iface.name),
                "mask_length > 32",
            ));
        }
    }

    let policy_ref = |out: &mut Vec<IrViolation>, field: String, name: &Option<String>| {
        if let Some(name) = name {
            if !config.policies.contains_key(name) {
                out.push(violation(field, format!("undefined policy '{name}'")));
            }
        }
    };

    let mut peers = BTreeSet::new();
    for n in &config.bgp_neighbors {
        let field = format!("bgp_neighbors.{}", n.peer_address);
        if !peers.insert(n.peer_address) {
            out.push(violation(&field, "duplicate peer_address"));
        }
        if n.remote_as == 0 {
            out.push(violation(format!("{field}.remote_as"), "must be positive"));
        }
        if n.local_as == 0 {
            out.push(violation(format!("{field}.local_as"), "must be positive"));
        }
        policy_ref(&mut out, format!("{field}.import_policy"), &n.import_policy);
        policy_ref(&mut out, format!("{field}.export_policy"), &n.export_policy);
    }

    for r in &config.redistributions {
        policy_ref(&mut out, format!("redistributions.{}", r.protocol), &r.policy);
    }

    let mut ospf_seen = BTreeSet::new();
    for link in &config.ospf {
        let field = format!("ospf.{}", link.interface_name);
        if config.interface(&link.interface_name).is_none() {
            out.push(violation(
                &field,
                format!("undefined interface '{}'", link.interface_name),
            ));
        }
        if !ospf_seen.insert(link.interface_name.as_str()) {
            out.push(violation(&field, "duplicate OSPF link"));
        }
    }

    for (key, policy) in &config.policies {
        let field = format!("policies.{key}");
        if policy.name != *key {
            out.push(violation(&field, format!("name '{}' does not match key", policy.name)));
        }
        let mut prev: Option<u32> = None;
        for clause in &policy.clauses {
            if clause.seq == 0 {
                out.push(violation(format!("{field}.{}", clause.seq), "seq must be positive"));
            }
            if prev.is_some_and(|p| clause.seq <= p) {
                out.push(violation(
                    format!("{field}.{}", clause.seq),
                    "clause seq not strictly increasing",
                ));
            }
            prev = Some(clause.seq);
            for m in &clause.matches {
                match m {
                    MatchCond::PrefixList(name) if !config.prefix_lists.contains_key(name) => out.push(violation(
                        format!("{field}.{}", clause.seq),
                        format!("undefined prefix-list '{name}'"),
                    )),
                    MatchCond::CommunityList(name) if !config.community_lists.contains_key(name) => {
                        out.push(violation(
                            format!("{field}.{}", clause.seq),
                            format!("undefined community-list '{name}'"),
                        ))
                    }
                    _ => {}
                }
            }
        }
    }

    for (name, values) in &config.community_lists {
        if values.is_empty() {
            out.push(violation(format!("community_lists.{name}"), "empty community list"));
        }
    }

    for (name, entries) in &config.prefix_lists {
        if entries.is_empty() {
            out.push(violation(format!("prefix_lists.{name}"), "empty prefix list"));
        }
        let mut seqs = BTreeSet::new();
        for e in entries {
            let field = format!("prefix_lists.{name}.{}", e.seq);
            if e.seq == 0 {
                out.push(violation(&field, "seq must be positive"));
            }
            if !seqs.insert(e.seq) {
                out.push(violation(&field, "duplicate seq"));
            }
            let len = e.prefix.len();
            if let Some(ge) = e.ge {
                if ge < len {
                    out.push(violation(&field, "ge < prefix_length"));
                }
                if ge > 32 {
                    out.push(violation(&field, "ge > 32"));
                }
            }
            if let Some(le) = e.le {
                if le > 32 {
                    out.push(violation(&field, "le > 32"));
                }
                if le < len {
                    out.push(violation(&field, "le < prefix_length"));
                }
                if e.ge.is_some_and(|ge| le < ge) {
                    out.push(violation(&field, "le < ge"));
                }
            }
        }
    }

    out
}
