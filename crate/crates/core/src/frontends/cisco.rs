//! IOS-style configuration subset.
//!
//! Stanzas are recognized by keyword, not by indentation: a block opened by
//! `interface`, `router` or `route-map` extends until the next top-level
//! keyword. `!` is a comment and does not close a block.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::net::Ipv4Addr;

use super::{diag, ParseResult, Severity, SyntaxDiagnostic};
use crate::ir::{
    netmask_to_len, Action, BgpNeighbor, CommunityValue, Interface, Ipv4Prefix, MatchCond, OspfLink, PolicyClause,
    PrefixListEntry, Protocol, Redistribution, RoutePolicy, RouterConfig, SetAction,
};

const DEFAULT_OSPF_COST: u32 = 1;
const DEFAULT_ROUTE_MAP_SEQ: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Block {
    Top,
    Interface(String),
    Bgp,
    Ospf,
    RouteMap(String, u32),
}

#[derive(Default)]
struct IfaceDraft {
    address: Option<(Ipv4Addr, u8)>,
    ospf_cost: Option<u32>,
    ospf_area: bool,
}

struct NeighborDraft {
    line: usize,
    remote_as: Option<u32>,
    local_as: Option<u32>,
    import: Option<(String, usize)>,
    export: Option<(String, usize)>,
}

/// Where a name was referenced, for undefined-reference warnings.
struct Reference {
    line: usize,
    kind: &'static str,
    name: String,
}

struct Parser<'a> {
    lines: Vec<&'a str>,
    diags: Vec<SyntaxDiagnostic>,
    block: Block,
    hostname: String,
    iface_order: Vec<String>,
    ifaces: BTreeMap<String, IfaceDraft>,
    asn: Option<u32>,
    bgp_router_id: Option<Ipv4Addr>,
    neighbor_order: Vec<Ipv4Addr>,
    neighbors: BTreeMap<Ipv4Addr, NeighborDraft>,
    networks: Vec<Ipv4Prefix>,
    redistributions: Vec<(Redistribution, usize)>,
    ospf_networks: Vec<Ipv4Prefix>,
    passive: BTreeSet<String>,
    policies: BTreeMap<String, RoutePolicy>,
    prefix_lists: BTreeMap<String, Vec<PrefixListEntry>>,
    community_lists: BTreeMap<String, Vec<CommunityValue>>,
    references: Vec<Reference>,
}

pub fn parse_cisco(text: &str) -> ParseResult {
    let mut p = Parser {
        lines: text.lines().collect(),
        diags: Vec::new(),
        block: Block::Top,
        hostname: String::new(),
        iface_order: Vec::new(),
        ifaces: BTreeMap::new(),
        asn: None,
        bgp_router_id: None,
        neighbor_order: Vec::new(),
        neighbors: BTreeMap::new(),
        networks: Vec::new(),
        redistributions: Vec::new(),
        ospf_networks: Vec::new(),
        passive: BTreeSet::new(),
        policies: BTreeMap::new(),
        prefix_lists: BTreeMap::new(),
        community_lists: BTreeMap::new(),
        references: Vec::new(),
    };
    for idx in 0..p.lines.len() {
        let raw = p.lines[idx];
        let words: Vec<&str> = raw.split_whitespace().collect();
        if words.is_empty() || words[0].starts_with('!') {
            continue;
        }
        if let Err(message) = p.line(idx + 1, &words) {
            p.push(idx + 1, Severity::Error, message);
        }
    }
    p.finish()
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("invalid {what} '{s}'"))
}

fn addr(s: &str) -> Result<Ipv4Addr, String> {
    s.parse().map_err(|_| format!("invalid IPv4 address '{s}'"))
}

fn mask(s: &str) -> Result<u8, String> {
    netmask_to_len(addr(s)?).ok_or_else(|| format!("invalid netmask '{s}'"))
}

fn classful_len(a: Ipv4Addr) -> u8 {
    match a.octets()[0] {
        0..=127 => 8,
        128..=191 => 16,
        _ => 24,
    }
}

fn community(s: &str) -> Result<CommunityValue, String> {
    s.parse()
        .map_err(|_| format!("'{s}' is not a community value of the form AS:NN"))
}

fn expect_len(words: &[&str], n: usize) -> Result<(), String> {
    if words.len() == n {
        Ok(())
    } else {
        Err("wrong number of arguments".into())
    }
}

impl Parser<'_> {
    fn push(&mut self, line: usize, severity: Severity, message: impl Into<String>) {
        let text = self.lines[line - 1];
        self.diags.push(diag(line, text, severity, message));
    }

    fn line(&mut self, n: usize, w: &[&str]) -> Result<(), String> {
        match (w[0], w.get(1).copied()) {
            ("hostname", _) => {
                expect_len(w, 2)?;
                self.block = Block::Top;
                self.hostname = w[1].to_string();
            }
            ("interface", _) => {
                expect_len(w, 2)?;
                let name = w[1].to_string();
                if !self.ifaces.contains_key(&name) {
                    self.iface_order.push(name.clone());
                    self.ifaces.insert(name.clone(), IfaceDraft::default());
                }
                self.block = Block::Interface(name);
            }
            ("router", Some("bgp")) => {
                expect_len(w, 3)?;
                let asn: u32 = num(w[2], "AS number")?;
                if self.asn.is_some_and(|a| a != asn) {
                    return Err(format!("a second BGP process with AS {asn}"));
                }
                self.asn = Some(asn);
                self.block = Block::Bgp;
            }
            ("router", Some("ospf")) => {
                expect_len(w, 3)?;
                num::<u32>(w[2], "OSPF process id")?;
                self.block = Block::Ospf;
            }
            ("route-map", _) => self.route_map_header(w)?,
            ("ip", Some("prefix-list")) => {
                self.block = Block::Top;
                self.prefix_list(w)?;
            }
            ("ip", Some("community-list")) => {
                self.block = Block::Top;
                self.community_list(w)?;
            }
            ("ip", Some("routing" | "cef" | "classless")) if w.len() == 2 => self.block = Block::Top,
            ("no", Some("ip")) if w.get(2) == Some(&"domain-lookup") => self.block = Block::Top,
            ("end" | "exit", None) => self.block = Block::Top,
            ("configure", _) | ("conf", _) | ("write", _) | ("copy", _) => {
                return Err("exec-mode command in a configuration file".into());
            }
            ("neighbor", _) if self.block != Block::Bgp => return self.stray(n, w),
            ("network" | "redistribute", _) if !matches!(self.block, Block::Bgp | Block::Ospf) => {
                return self.stray(n, w)
            }
            _ => match self.block.clone() {
                Block::Interface(name) => self.interface_line(&name, w)?,
                Block::Bgp => self.bgp_line(n, w)?,
                Block::Ospf => self.ospf_line(w)?,
                Block::RouteMap(name, seq) => self.route_map_line(n, &name, seq, w)?,
                Block::Top => return self.stray(n, w),
            },
        }
        Ok(())
    }

    fn stray(&mut self, n: usize, w: &[&str]) -> Result<(), String> {
        match w[0] {
            "neighbor" | "network" | "redistribute" | "bgp" => {
                self.push(
                    n,
                    Severity::Warning,
                    format!("'{}' statement outside of a router bgp block", w[0]),
                );
                Ok(())
            }
            "match" | "set" => Err(format!("'{}' statement outside of a route-map", w[0])),
            _ => Err("unrecognized statement".into()),
        }
    }

    fn interface_line(&mut self, name: &str, w: &[&str]) -> Result<(), String> {
        let draft = self.ifaces.get_mut(name).expect("block opened with draft");
        match (w[0], w.get(1).copied()) {
            ("ip", Some("address")) => {
                let a = addr(w.get(2).ok_or("missing address")?)?;
                let len = match w.get(3) {
                    Some(m) => mask(m)?,
                    None => return Err("missing netmask".into()),
                };
                if w.len() > 4 {
                    return Err("unsupported ip address option".into());
                }
                draft.address = Some((a, len));
            }
            ("ip", Some("ospf")) => match w.get(2).copied() {
                Some("cost") => {
                    expect_len(w, 4)?;
                    draft.ospf_cost = Some(num(w[3], "OSPF cost")?);
                }
                Some(pid) if w.get(3) == Some(&"area") && w.len() == 5 => {
                    num::<u32>(pid, "OSPF process id")?;
                    draft.ospf_area = true;
                }
                _ => return Err("unsupported ip ospf statement".into()),
            },
            ("no", Some("shutdown")) | ("shutdown", None) | ("description", _) | ("no", Some("ip")) => {}
            ("duplex" | "speed" | "mtu", _) => {}
            _ => return Err("unrecognized interface statement".into()),
        }
        Ok(())
    }

    fn neighbor(&mut self, n: usize, a: Ipv4Addr) -> &mut NeighborDraft {
        if !self.neighbors.contains_key(&a) {
            self.neighbor_order.push(a);
        }
        self.neighbors.entry(a).or_insert(NeighborDraft {
            line: n,
            remote_as: None,
            local_as: None,
            import: None,
            export: None,
        })
    }

    fn bgp_line(&mut self, n: usize, w: &[&str]) -> Result<(), String> {
        match w[0] {
            "bgp" => match w.get(1).copied() {
                Some("router-id") => {
                    expect_len(w, 3)?;
                    self.bgp_router_id = Some(addr(w[2])?);
                }
                Some("log-neighbor-changes") => {}
                _ => return Err("unsupported bgp statement".into()),
            },
            "no" if matches!(w.get(1).copied(), Some("synchronization" | "auto-summary")) => {}
            "neighbor" => {
                let a = addr(w.get(1).ok_or("missing neighbor address")?)?;
                let kw = w.get(2).copied().ok_or("missing neighbor option")?;
                match kw {
                    "remote-as" => {
                        expect_len(w, 4)?;
                        let asn = num(w[3], "AS number")?;
                        self.neighbor(n, a).remote_as = Some(asn);
                    }
                    "local-as" => {
                        if w.len() < 4 {
                            return Err("missing local AS".into());
                        }
                        let asn = num(w[3], "AS number")?;
                        self.neighbor(n, a).local_as = Some(asn);
                    }
                    "route-map" => {
                        expect_len(w, 5)?;
                        let name = w[3].to_string();
                        let slot = match w[4] {
                            "in" => &mut self.neighbor(n, a).import,
                            "out" => &mut self.neighbor(n, a).export,
                            other => return Err(format!("route-map direction must be in or out, not '{other}'")),
                        };
                        *slot = Some((name.clone(), n));
                        self.references.push(Reference {
                            line: n,
                            kind: "route-map",
                            name,
                        });
                    }
                    "send-community"
                    | "description"
                    | "activate"
                    | "next-hop-self"
                    | "update-source"
                    | "ebgp-multihop"
                    | "soft-reconfiguration" => {
                        self.neighbor(n, a);
                    }
                    other => return Err(format!("unsupported neighbor option '{other}'")),
                }
            }
            "network" => {
                let a = addr(w.get(1).ok_or("missing network address")?)?;
                let len = match w.get(2).copied() {
                    None => classful_len(a),
                    Some("mask") => {
                        expect_len(w, 4)?;
                        mask(w[3])?
                    }
                    Some(_) => return Err("expected 'mask'".into()),
                };
                let prefix = Ipv4Prefix::new(a, len);
                if prefix.addr() != a {
                    return Err(format!("network {a} has host bits set for mask /{len}"));
                }
                self.networks.push(prefix);
            }
            "redistribute" => {
                let proto = match w.get(1).copied() {
                    Some("connected") => Protocol::Connected,
                    Some("static") => Protocol::Static,
                    Some("ospf") => Protocol::Ospf,
                    _ => return Err("unsupported redistribute source".into()),
                };
                let mut rest = &w[2..];
                if proto == Protocol::Ospf {
                    let pid = rest.first().ok_or("missing OSPF process id")?;
                    num::<u32>(pid, "OSPF process id")?;
                    rest = &rest[1..];
                }
                let mut policy = None;
                while let Some(kw) = rest.first() {
                    match *kw {
                        "route-map" => {
                            let name = rest.get(1).ok_or("missing route-map name")?.to_string();
                            self.references.push(Reference {
                                line: n,
                                kind: "route-map",
                                name: name.clone(),
                            });
                            policy = Some(name);
                            rest = &rest[2..];
                        }
                        "subnets" => rest = &rest[1..],
                        other => return Err(format!("unsupported redistribute option '{other}'")),
                    }
                }
                self.redistributions.push((
                    Redistribution {
                        protocol: proto,
                        policy,
                    },
                    n,
                ));
            }
            _ => return Err("unrecognized router bgp statement".into()),
        }
        Ok(())
    }

    fn ospf_line(&mut self, w: &[&str]) -> Result<(), String> {
        match w[0] {
            "network" => {
                if w.len() != 5 || w[3] != "area" {
                    return Err("expected 'network ADDRESS WILDCARD area AREA'".into());
                }
                let a = addr(w[1])?;
                let wildcard = u32::from(addr(w[2])?);
                let len = netmask_to_len(Ipv4Addr::from(!wildcard)).ok_or("invalid wildcard mask")?;
                self.ospf_networks.push(Ipv4Prefix::new(a, len));
            }
            "passive-interface" => {
                expect_len(w, 2)?;
                self.passive.insert(w[1].to_string());
            }
            "router-id" | "log-adjacency-changes" => {}
            _ => return Err("unrecognized router ospf statement".into()),
        }
        Ok(())
    }

    fn route_map_header(&mut self, w: &[&str]) -> Result<(), String> {
        if w.len() < 3 || w.len() > 4 {
            return Err("expected 'route-map NAME permit|deny SEQ'".into());
        }
        let action = match w[2] {
            "permit" => Action::Permit,
            "deny" => Action::Deny,
            other => return Err(format!("route-map action must be permit or deny, not '{other}'")),
        };
        let seq = match w.get(3) {
            Some(s) => num(s, "sequence number")?,
            None => DEFAULT_ROUTE_MAP_SEQ,
        };
        if seq == 0 {
            return Err("sequence number must be positive".into());
        }
        let name = w[1].to_string();
        let policy = self
            .policies
            .entry(name.clone())
            .or_insert_with(|| RoutePolicy::new(name.clone()));
        match policy.clauses.iter_mut().find(|c| c.seq == seq) {
            Some(existing) => existing.action = action,
            None => policy.clauses.push(PolicyClause::new(seq, action)),
        }
        self.block = Block::RouteMap(name, seq);
        Ok(())
    }

    fn route_map_line(&mut self, n: usize, name: &str, seq: u32, w: &[&str]) -> Result<(), String> {
        let mut matches = Vec::new();
        let mut sets = Vec::new();
        match (w[0], w.get(1).copied()) {
            ("match", Some("ip")) => {
                if w.get(2) != Some(&"address") || w.get(3) != Some(&"prefix-list") {
                    return Err("expected 'match ip address prefix-list NAME'".into());
                }
                if w.len() != 5 {
                    return Err("exactly one prefix-list per match statement is supported".into());
                }
                self.references.push(Reference {
                    line: n,
                    kind: "prefix-list",
                    name: w[4].to_string(),
                });
                matches.push(MatchCond::PrefixList(w[4].to_string()));
            }
            ("match", Some("community")) => {
                if w.len() != 3 {
                    return Err("exactly one community-list per match statement is supported".into());
                }
                if w[2].parse::<CommunityValue>().is_ok() {
                    return Err("match community takes a community-list name, not a community value".into());
                }
                self.references.push(Reference {
                    line: n,
                    kind: "community-list",
                    name: w[2].to_string(),
                });
                matches.push(MatchCond::CommunityList(w[2].to_string()));
            }
            ("match", Some("source-protocol" | "protocol")) => {
                expect_len(w, 3)?;
                let proto = w[2].parse().map_err(|_| format!("unknown protocol '{}'", w[2]))?;
                matches.push(MatchCond::Protocol(proto));
            }
            ("set", Some("metric" | "med")) => {
                expect_len(w, 3)?;
                sets.push(SetAction::Med(num(w[2], "metric")?));
            }
            ("set", Some("local-preference")) => {
                expect_len(w, 3)?;
                sets.push(SetAction::LocalPref(num(w[2], "local preference")?));
            }
            ("set", Some("community")) => {
                let mut args = &w[2..];
                let additive = args.last() == Some(&"additive");
                if additive {
                    args = &args[..args.len() - 1];
                }
                let values = if args == ["none"] && !additive {
                    BTreeSet::new()
                } else if args.is_empty() {
                    return Err("missing community values".into());
                } else {
                    args.iter().map(|a| community(a)).collect::<Result<BTreeSet<_>, _>>()?
                };
                sets.push(SetAction::Community { values, additive });
            }
            ("description", _) => {}
            _ => return Err("unrecognized route-map statement".into()),
        }
        let clause = self
            .policies
            .get_mut(name)
            .and_then(|p| p.clauses.iter_mut().find(|c| c.seq == seq))
            .expect("block opened with clause");
        clause.matches.extend(matches);
        clause.sets.extend(sets);
        Ok(())
    }

    fn prefix_list(&mut self, w: &[&str]) -> Result<(), String> {
        let name = w.get(2).ok_or("missing prefix-list name")?.to_string();
        let mut rest = &w[3..];
        if rest.first() == Some(&"description") {
            return Ok(());
        }
        let entries = self.prefix_lists.entry(name).or_default();
        let seq = if rest.first() == Some(&"seq") {
            let s: u32 = num(rest.get(1).ok_or("missing sequence number")?, "sequence number")?;
            rest = &rest[2..];
            s
        } else {
            entries.iter().map(|e| e.seq).max().unwrap_or(0) + 5
        };
        let action = match rest.first().copied() {
            Some("permit") => Action::Permit,
            Some("deny") => Action::Deny,
            _ => return Err("expected permit or deny".into()),
        };
        let prefix_text = rest.get(1).ok_or("missing prefix")?;
        let prefix: Ipv4Prefix = prefix_text.parse().map_err(|e| format!("{e}"))?;
        let mut entry = PrefixListEntry::new(seq, action, prefix);
        let mut opts = &rest[2..];
        while let Some(kw) = opts.first() {
            let value: u8 = num(opts.get(1).ok_or("missing length")?, "prefix length")?;
            match *kw {
                "ge" if entry.ge.is_none() => entry.ge = Some(value),
                "le" if entry.le.is_none() => entry.le = Some(value),
                other => return Err(format!("unexpected '{other}'")),
            }
            opts = &opts[2..];
        }
        let len = prefix.len();
        let (ge, le) = entry.length_range();
        if ge < len || le < ge || ge > 32 || le > 32 {
            return Err(format!("invalid length range ge {ge} le {le} for a /{len}"));
        }
        if entries.iter().any(|e| e.seq == seq) {
            return Err(format!("duplicate sequence number {seq}"));
        }
        entries.push(entry);
        Ok(())
    }

    fn community_list(&mut self, w: &[&str]) -> Result<(), String> {
        let (name, rest) = match w.get(2).copied() {
            Some("standard") => (
                w.get(3).ok_or("missing community-list name")?.to_string(),
                &w[4.min(w.len())..],
            ),
            Some("expanded") => return Err("expanded community-lists are not supported".into()),
            Some(id) => {
                let n: u32 = num(id, "community-list number")?;
                if !(1..=99).contains(&n) {
                    return Err("numbered standard community-lists are 1 to 99".into());
                }
                (id.to_string(), &w[3..])
            }
            None => return Err("missing community-list name".into()),
        };
        match rest.first().copied() {
            Some("permit") => {}
            Some("deny") => return Err("deny entries in community-lists are not supported".into()),
            _ => return Err("expected permit".into()),
        }
        if rest.len() < 2 {
            return Err("missing community values".into());
        }
        let values = rest[1..].iter().map(|a| community(a)).collect::<Result<Vec<_>, _>>()?;
        self.community_lists.entry(name).or_default().extend(values);
        Ok(())
    }

    fn finish(mut self) -> ParseResult {
        let asn = self.asn.unwrap_or(0);
        let mut interfaces = Vec::new();
        let mut ospf = Vec::new();
        for name in &self.iface_order {
            let draft = &self.ifaces[name];
            let Some((address, len)) = draft.address else { continue };
            let iface = Interface::new(name.clone(), address, len);
            let in_ospf = draft.ospf_area || self.ospf_networks.iter().any(|p| p.contains_addr(address));
            if in_ospf {
                ospf.push(OspfLink {
                    interface_name: name.clone(),
                    cost: draft.ospf_cost.unwrap_or(DEFAULT_OSPF_COST),
                    passive: self.passive.contains(name),
                });
            }
            interfaces.push(iface);
        }

        let router_id = self.bgp_router_id.unwrap_or_else(|| {
            let loopbacks = interfaces
                .iter()
                .filter(|i| i.name.to_ascii_lowercase().starts_with("loopback"));
            loopbacks
                .map(|i| i.address)
                .max()
                .or_else(|| interfaces.iter().map(|i| i.address).max())
                .unwrap_or(Ipv4Addr::UNSPECIFIED)
        });

        let mut config = RouterConfig::new(self.hostname.clone(), asn, router_id);
        config.interfaces = interfaces;
        config.ospf = ospf;

        let mut late = Vec::new();
        for a in &self.neighbor_order {
            let d = &self.neighbors[a];
            let Some(remote_as) = d.remote_as else {
                late.push((d.line, format!("neighbor {a} has no remote-as")));
                continue;
            };
            config.bgp_neighbors.push(BgpNeighbor {
                peer_address: *a,
                remote_as,
                local_as: d.local_as.unwrap_or(asn),
                import_policy: d.import.as_ref().map(|(n, _)| n.clone()),
                export_policy: d.export.as_ref().map(|(n, _)| n.clone()),
            });
        }
        for (line, msg) in late {
            self.push(line, Severity::Error, msg);
        }

        config.bgp_networks = self.networks.clone();
        config.redistributions = self.redistributions.iter().map(|(r, _)| r.clone()).collect();
        config.policies = std::mem::take(&mut self.policies);
        config.prefix_lists = std::mem::take(&mut self.prefix_lists);
        config.community_lists = std::mem::take(&mut self.community_lists);

        let refs = std::mem::take(&mut self.references);
        for r in refs {
            let defined = match r.kind {
                "route-map" => config.policies.contains_key(&r.name),
                "prefix-list" => config.prefix_lists.contains_key(&r.name),
                _ => config.community_lists.contains_key(&r.name),
            };
            if !defined {
                self.push(r.line, Severity::Warning, format!("undefined {} '{}'", r.kind, r.name));
            }
        }

        self.diags.sort_by_key(|d| d.line_number);
        ParseResult {
            config,
            diagnostics: self.diags,
        }
    }
}

fn community_list_header(name: &str) -> String {
    match name.parse::<u32>() {
        Ok(n) if (1..=99).contains(&n) => format!("ip community-list {name}"),
        _ => format!("ip community-list standard {name}"),
    }
}

fn join_communities<'a>(values: impl IntoIterator<Item = &'a CommunityValue>) -> String {
    values.into_iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

/// Deterministic IOS rendering; `parse_cisco(print_cisco(c))` yields `c`
/// up to canonical form.
pub fn print_cisco(config: &RouterConfig) -> String {
    let mut out = String::new();
    if !config.name.is_empty() {
        let _ = writeln!(out, "hostname {}\n!", config.name);
    }
    for iface in &config.interfaces {
        let _ = writeln!(out, "interface {}", iface.name);
        let _ = writeln!(out, " ip address {} {}", iface.address, iface.subnet().netmask());
        if let Some(link) = config.ospf_link(&iface.name) {
            let _ = writeln!(out, " ip ospf 1 area 0");
            let _ = writeln!(out, " ip ospf cost {}", link.cost);
        }
        out.push_str("!\n");
    }
    if !config.ospf.is_empty() {
        out.push_str("router ospf 1\n");
        for link in config.ospf.iter().filter(|l| l.passive) {
            let _ = writeln!(out, " passive-interface {}", link.interface_name);
        }
        out.push_str("!\n");
    }
    let _ = writeln!(out, "router bgp {}", config.asn);
    let _ = writeln!(out, " bgp router-id {}", config.router_id);
    for net in &config.bgp_networks {
        let _ = writeln!(out, " network {} mask {}", net.addr(), net.netmask());
    }
    for r in &config.redistributions {
        let source = match r.protocol {
            Protocol::Ospf => "ospf 1".to_string(),
            p => p.to_string(),
        };
        match &r.policy {
            Some(p) => {
                let _ = writeln!(out, " redistribute {source} route-map {p}");
            }
            None => {
                let _ = writeln!(out, " redistribute {source}");
            }
        }
    }
    for n in &config.bgp_neighbors {
        let _ = writeln!(out, " neighbor {} remote-as {}", n.peer_address, n.remote_as);
        if n.local_as != config.asn {
            let _ = writeln!(out, " neighbor {} local-as {}", n.peer_address, n.local_as);
        }
        if let Some(p) = &n.import_policy {
            let _ = writeln!(out, " neighbor {} route-map {p} in", n.peer_address);
        }
        if let Some(p) = &n.export_policy {
            let _ = writeln!(out, " neighbor {} route-map {p} out", n.peer_address);
        }
    }
    out.push_str("!\n");
    for (name, entries) in &config.prefix_lists {
        for e in entries {
            let _ = write!(out, "ip prefix-list {name} seq {} {} {}", e.seq, e.action, e.prefix);
            let len = e.prefix.len();
            let (ge, le) = e.length_range();
            if ge != len {
                let _ = write!(out, " ge {ge}");
                if le != 32 {
                    let _ = write!(out, " le {le}");
                }
            } else if le != len {
                let _ = write!(out, " le {le}");
            }
            out.push('\n');
        }
    }
    for (name, values) in &config.community_lists {
        let _ = writeln!(
            out,
            "{} permit {}",
            community_list_header(name),
            join_communities(values)
        );
    }
    if !config.prefix_lists.is_empty() || !config.community_lists.is_empty() {
        out.push_str("!\n");
    }
    for (name, policy) in &config.policies {
        for clause in &policy.clauses {
            let _ = writeln!(out, "route-map {name} {} {}", clause.action, clause.seq);
            for m in &clause.matches {
                let _ = match m {
                    MatchCond::PrefixList(l) => writeln!(out, " match ip address prefix-list {l}"),
                    MatchCond::CommunityList(l) => writeln!(out, " match community {l}"),
                    MatchCond::Protocol(p) => writeln!(out, " match source-protocol {p}"),
                };
            }
            for s in &clause.sets {
                let _ = match s {
                    SetAction::Med(m) => writeln!(out, " set metric {m}"),
                    SetAction::LocalPref(lp) => writeln!(out, " set local-preference {lp}"),
                    SetAction::Community {
                        values,
                        additive: false,
                    } if values.is_empty() => {
                        writeln!(out, " set community none")
                    }
                    SetAction::Community { values, additive } => writeln!(
                        out,
                        " set community {}{}",
                        join_communities(values),
                        if *additive { " additive" } else { "" }
                    ),
                };
            }
            out.push_str("!\n");
        }
        if policy.default_action == Action::Permit {
            let seq = policy.clauses.last().map_or(10, |c| c.seq + 10);
            let _ = writeln!(out, "route-map {name} permit {seq}\n!");
        }
    }
    out
}
