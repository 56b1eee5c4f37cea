//! Junos curly-brace configuration subset.
//!
//! Text is tokenized into a statement tree first; interpretation walks the
//! tree. Every diagnostic carries the statement flattened with its enclosing
//! hierarchy, which is how Junos itself reports errors.
//!
//! Subset notes:
//! - `prefix-list` entries are exact permits; `route-filter-list` entries carry
//!   a match modifier and an optional `reject`.
//! - `from prefix-list-filter L mod` and `from route-filter P mod` become
//!   derived prefix lists.
//! - `community NAME members [..]` matches a route carrying any member.
//! - BGP export sees connected, static and OSPF routes, so those three
//!   redistributions are always present and `bgp_networks` is always empty.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::net::Ipv4Addr;

use super::{ParseResult, Severity, SyntaxDiagnostic};
use crate::ir::{
    Action, BgpNeighbor, CommunityValue, Interface, Ipv4Prefix, MatchCond, OspfLink, PolicyClause, PrefixListEntry,
    Protocol, Redistribution, RoutePolicy, RouterConfig, SetAction,
};

const TERM_SEQ_STEP: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Word {
    Atom(String),
    List(Vec<String>),
}

impl Word {
    fn atom(&self) -> Option<&str> {
        match self {
            Word::Atom(s) => Some(s),
            Word::List(_) => None,
        }
    }

    /// A bare word or the members of a bracket list.
    fn values(&self) -> Vec<&str> {
        match self {
            Word::Atom(s) => vec![s.as_str()],
            Word::List(v) => v.iter().map(String::as_str).collect(),
        }
    }

    fn render(&self) -> String {
        match self {
            Word::Atom(s) => s.clone(),
            Word::List(v) => format!("[ {} ]", v.join(" ")),
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    words: Vec<Word>,
    line: usize,
    /// Flattened path including this statement.
    path: String,
    children: Option<Vec<Node>>,
}

impl Node {
    fn keyword(&self) -> &str {
        self.words.first().and_then(Word::atom).unwrap_or("")
    }

    fn arg(&self, i: usize) -> Option<&str> {
        self.words.get(i).and_then(Word::atom)
    }

    fn kids(&self) -> &[Node] {
        self.children.as_deref().unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Open,
    Close,
    Semi,
    LBracket,
    RBracket,
}

struct Ctx<'a> {
    lines: Vec<&'a str>,
    diags: Vec<SyntaxDiagnostic>,
}

impl Ctx<'_> {
    fn at(&mut self, line: usize, statement: Option<String>, severity: Severity, message: impl Into<String>) {
        let line_text = self
            .lines
            .get(line.saturating_sub(1))
            .copied()
            .unwrap_or("")
            .to_string();
        self.diags.push(SyntaxDiagnostic {
            line_number: line,
            line_text,
            message: message.into(),
            severity,
            statement,
        });
    }

    fn error(&mut self, node: &Node, message: impl Into<String>) {
        self.at(node.line, Some(node.path.clone()), Severity::Error, message);
    }

    fn warn(&mut self, node: &Node, message: impl Into<String>) {
        self.at(node.line, Some(node.path.clone()), Severity::Warning, message);
    }
}

fn tokenize(text: &str, ctx: &mut Ctx) -> Vec<(Tok, usize)> {
    let mut toks = Vec::new();
    let mut in_block_comment = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let mut chars = line.char_indices().peekable();
        while let Some((pos, ch)) = chars.next() {
            if in_block_comment {
                if ch == '*' && chars.peek().map(|&(_, c)| c) == Some('/') {
                    chars.next();
                    in_block_comment = false;
                }
                continue;
            }
            match ch {
                c if c.is_whitespace() => {}
                '#' => break,
                '/' if chars.peek().map(|&(_, c)| c) == Some('*') => {
                    chars.next();
                    in_block_comment = true;
                }
                '{' => toks.push((Tok::Open, n)),
                '}' => toks.push((Tok::Close, n)),
                ';' => toks.push((Tok::Semi, n)),
                '[' => toks.push((Tok::LBracket, n)),
                ']' => toks.push((Tok::RBracket, n)),
                '"' => {
                    let mut s = String::new();
                    let mut closed = false;
                    for (_, c) in chars.by_ref() {
                        if c == '"' {
                            closed = true;
                            break;
                        }
                        s.push(c);
                    }
                    if !closed {
                        ctx.at(n, None, Severity::Error, "unterminated string");
                    }
                    toks.push((Tok::Word(s), n));
                }
                _ => {
                    let start = pos;
                    let mut end = pos + ch.len_utf8();
                    while let Some(&(p, c)) = chars.peek() {
                        if c.is_whitespace() || "{};[]\"#".contains(c) {
                            break;
                        }
                        end = p + c.len_utf8();
                        chars.next();
                    }
                    toks.push((Tok::Word(line[start..end].to_string()), n));
                }
            }
        }
    }
    toks
}

fn render_words(words: &[Word]) -> String {
    words.iter().map(Word::render).collect::<Vec<_>>().join(" ")
}

fn join_path(prefix: &str, words: &[Word]) -> String {
    let own = render_words(words);
    if prefix.is_empty() {
        own
    } else {
        format!("{prefix} {own}")
    }
}

/// Builds the statement tree. Returns the nodes at this level and whether a
/// closing brace ended it.
fn build(toks: &[(Tok, usize)], pos: &mut usize, prefix: &str, depth: usize, ctx: &mut Ctx) -> (Vec<Node>, bool) {
    let mut nodes = Vec::new();
    let mut words: Vec<Word> = Vec::new();
    let mut first_line = 0;
    while *pos < toks.len() {
        let (tok, line) = toks[*pos].clone();
        *pos += 1;
        if words.is_empty() {
            first_line = line;
        }
        match tok {
            Tok::Word(w) => words.push(Word::Atom(w)),
            Tok::LBracket => {
                let mut items = Vec::new();
                let mut closed = false;
                while *pos < toks.len() {
                    let (t, _) = toks[*pos].clone();
                    *pos += 1;
                    match t {
                        Tok::Word(w) => items.push(w),
                        Tok::RBracket => {
                            closed = true;
                            break;
                        }
                        _ => {
                            *pos -= 1;
                            break;
                        }
                    }
                }
                if !closed {
                    ctx.at(line, Some(join_path(prefix, &words)), Severity::Error, "missing ']'");
                }
                words.push(Word::List(items));
            }
            Tok::RBracket => ctx.at(line, Some(join_path(prefix, &words)), Severity::Error, "unexpected ']'"),
            Tok::Semi => {
                if words.is_empty() {
                    ctx.at(line, None, Severity::Error, "empty statement");
                    continue;
                }
                let path = join_path(prefix, &words);
                nodes.push(Node {
                    words: std::mem::take(&mut words),
                    line: first_line,
                    path,
                    children: None,
                });
            }
            Tok::Open => {
                if words.is_empty() {
                    ctx.at(line, Some(prefix.to_string()), Severity::Error, "block without a name");
                }
                let path = join_path(prefix, &words);
                let (children, closed) = build(toks, pos, &path, depth + 1, ctx);
                if !closed {
                    ctx.at(first_line, Some(path.clone()), Severity::Error, "missing '}'");
                }
                nodes.push(Node {
                    words: std::mem::take(&mut words),
                    line: first_line,
                    path,
                    children: Some(children),
                });
            }
            Tok::Close => {
                if !words.is_empty() {
                    let path = join_path(prefix, &words);
                    ctx.at(first_line, Some(path), Severity::Error, "missing ';'");
                    words.clear();
                }
                if depth == 0 {
                    ctx.at(line, None, Severity::Error, "unexpected '}'");
                    continue;
                }
                return (nodes, true);
            }
        }
    }
    if !words.is_empty() {
        ctx.at(
            first_line,
            Some(join_path(prefix, &words)),
            Severity::Error,
            "missing ';'",
        );
    }
    (nodes, false)
}

/// How a prefix is matched by a route-filter style modifier.
fn modifier_range(prefix: Ipv4Prefix, words: &[&str]) -> Result<((u8, u8), usize), String> {
    let len = prefix.len();
    let slash = |s: &str| -> Result<u8, String> {
        let v = s.strip_prefix('/').unwrap_or(s);
        match v.parse::<u8>() {
            Ok(n) if n <= 32 => Ok(n),
            _ => Err(format!("invalid prefix length '{s}'")),
        }
    };
    let range = match words.first().copied() {
        None => return Err("missing match modifier".into()),
        Some("exact") => ((len, len), 1),
        Some("orlonger") => ((len, 32), 1),
        Some("longer") if len < 32 => ((len + 1, 32), 1),
        Some("upto") => ((len, slash(words.get(1).ok_or("missing length after upto")?)?), 2),
        Some("prefix-length-range") => {
            let spec = words.get(1).ok_or("missing range after prefix-length-range")?;
            let (a, b) = spec.split_once('-').ok_or_else(|| format!("invalid range '{spec}'"))?;
            ((slash(a)?, slash(b)?), 2)
        }
        Some(other) => return Err(format!("unknown match modifier '{other}'")),
    };
    let ((ge, le), used) = range;
    if ge < len || le < ge {
        return Err(format!("length range /{ge}-/{le} does not fit a /{len}"));
    }
    Ok(((ge, le), used))
}

fn modifier_suffix(words: &[&str]) -> String {
    words.join("-").replace('/', "")
}

fn parse_prefix(s: &str) -> Result<Ipv4Prefix, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_u32(s: Option<&str>, what: &str) -> Result<u32, String> {
    s.and_then(|v| v.parse().ok()).ok_or_else(|| format!("invalid {what}"))
}

#[derive(Default)]
struct BgpSettings {
    peer_as: Option<u32>,
    local_as: Option<u32>,
    import: Option<String>,
    export: Option<String>,
}

#[derive(Default)]
struct Interp {
    hostname: String,
    router_id: Option<Ipv4Addr>,
    asn: Option<u32>,
    interfaces: Vec<Interface>,
    ospf: Vec<OspfLink>,
    neighbors: Vec<BgpNeighbor>,
    prefix_lists: BTreeMap<String, Vec<PrefixListEntry>>,
    /// Lists with at least one rejected entry; references to them stay quiet.
    broken_lists: BTreeSet<String>,
    communities: BTreeMap<String, (Vec<CommunityValue>, usize, String)>,
    policy_nodes: Vec<Node>,
    policies: BTreeMap<String, RoutePolicy>,
    from_communities: BTreeSet<String>,
    then_communities: BTreeSet<String>,
    policy_refs: Vec<(String, Node)>,
    neighbor_nodes: Vec<(Ipv4Addr, Node, bool)>,
}

pub fn parse_juniper(text: &str) -> ParseResult {
    let mut ctx = Ctx {
        lines: text.lines().collect(),
        diags: Vec::new(),
    };
    let toks = tokenize(text, &mut ctx);
    let mut pos = 0;
    let (tree, _) = build(&toks, &mut pos, "", 0, &mut ctx);

    let mut it = Interp::default();
    for node in &tree {
        match node.keyword() {
            "system" => it.system(node, &mut ctx),
            "interfaces" => it.interfaces(node, &mut ctx),
            "routing-options" => it.routing_options(node, &mut ctx),
            "protocols" => it.protocols(node, &mut ctx),
            "policy-options" => it.policy_options(node, &mut ctx),
            _ => ctx.error(node, "unrecognized statement"),
        }
    }
    for node in std::mem::take(&mut it.policy_nodes) {
        it.policy(&node, &mut ctx);
    }
    let config = it.finish(&mut ctx);
    ctx.diags.sort_by_key(|d| d.line_number);
    ParseResult {
        config,
        diagnostics: ctx.diags,
    }
}

impl Interp {
    fn system(&mut self, node: &Node, ctx: &mut Ctx) {
        for k in node.kids() {
            match (k.keyword(), k.arg(1), k.words.len()) {
                ("host-name", Some(name), 2) => self.hostname = name.to_string(),
                _ => ctx.error(k, "unrecognized statement"),
            }
        }
    }

    fn interfaces(&mut self, node: &Node, ctx: &mut Ctx) {
        for ifd in node.kids() {
            if ifd.words.len() != 1 || ifd.children.is_none() {
                ctx.error(ifd, "expected an interface block");
                continue;
            }
            let ifd_name = ifd.keyword().to_string();
            for k in ifd.kids() {
                match k.keyword() {
                    "description" => {}
                    "unit" => {
                        let Some(unit) = k.arg(1).filter(|u| u.parse::<u32>().is_ok()) else {
                            ctx.error(k, "invalid unit number");
                            continue;
                        };
                        let name = format!("{ifd_name}.{unit}");
                        self.unit(&name, k, ctx);
                    }
                    _ => ctx.error(k, "unrecognized statement"),
                }
            }
        }
    }

    fn unit(&mut self, name: &str, node: &Node, ctx: &mut Ctx) {
        for k in node.kids() {
            match (k.keyword(), k.arg(1)) {
                ("description", _) => {}
                ("family", Some("inet")) => {
                    for a in k.kids() {
                        if a.keyword() != "address" || a.words.len() != 2 {
                            ctx.error(a, "unrecognized statement");
                            continue;
                        }
                        let text = a.arg(1).unwrap_or("");
                        let parsed = text
                            .split_once('/')
                            .and_then(|(ad, l)| Some((ad.parse::<Ipv4Addr>().ok()?, l.parse::<u8>().ok()?)))
                            .filter(|&(_, l)| l <= 32);
                        match parsed {
                            Some((ad, l)) if self.interfaces.iter().all(|i| i.name != name) => {
                                self.interfaces.push(Interface::new(name, ad, l))
                            }
                            Some(_) => ctx.error(a, "only one address per unit is supported"),
                            None => ctx.error(a, format!("invalid interface address '{text}'")),
                        }
                    }
                }
                _ => ctx.error(k, "unrecognized statement"),
            }
        }
    }

    fn routing_options(&mut self, node: &Node, ctx: &mut Ctx) {
        for k in node.kids() {
            match (k.keyword(), k.words.len()) {
                ("router-id", 2) => match k.arg(1).and_then(|s| s.parse().ok()) {
                    Some(a) => self.router_id = Some(a),
                    None => ctx.error(k, "invalid router-id"),
                },
                ("autonomous-system", 2) => match k.arg(1).and_then(|s| s.parse().ok()) {
                    Some(a) => self.asn = Some(a),
                    None => ctx.error(k, "invalid autonomous-system"),
                },
                _ => ctx.error(k, "unrecognized statement"),
            }
        }
    }

    fn protocols(&mut self, node: &Node, ctx: &mut Ctx) {
        for k in node.kids() {
            match k.keyword() {
                "bgp" => {
                    for g in k.kids() {
                        if g.keyword() == "group" && g.arg(1).is_some() && g.children.is_some() {
                            self.bgp_group(g, ctx);
                        } else {
                            ctx.error(g, "unrecognized statement");
                        }
                    }
                }
                "ospf" => {
                    for area in k.kids() {
                        if area.keyword() == "area" && area.arg(1).is_some() && area.children.is_some() {
                            self.ospf_area(area, ctx);
                        } else {
                            ctx.error(area, "unrecognized statement");
                        }
                    }
                }
                _ => ctx.error(k, "unrecognized statement"),
            }
        }
    }

    fn bgp_setting(&mut self, s: &mut BgpSettings, k: &Node, ctx: &mut Ctx) -> bool {
        match k.keyword() {
            "peer-as" => match parse_u32(k.arg(1), "peer-as") {
                Ok(v) => s.peer_as = Some(v),
                Err(e) => ctx.error(k, e),
            },
            "local-as" => match parse_u32(k.arg(1), "local-as") {
                Ok(v) => s.local_as = Some(v),
                Err(e) => ctx.error(k, e),
            },
            "import" | "export" => {
                let Some(name) = k.arg(1).filter(|_| k.words.len() == 2) else {
                    ctx.error(k, "expected exactly one policy name");
                    return true;
                };
                self.policy_refs.push((name.to_string(), k.clone()));
                if k.keyword() == "import" {
                    s.import = Some(name.to_string());
                } else {
                    s.export = Some(name.to_string());
                }
            }
            "type" | "description" | "multihop" | "local-address" => {}
            _ => return false,
        }
        true
    }

    fn bgp_group(&mut self, group: &Node, ctx: &mut Ctx) {
        let mut shared = BgpSettings::default();
        let mut members = Vec::new();
        for k in group.kids() {
            if k.keyword() == "neighbor" {
                members.push(k);
            } else if !self.bgp_setting(&mut shared, k, ctx) {
                ctx.error(k, "unrecognized statement");
            }
        }
        for k in members {
            let Some(peer) = k.arg(1).and_then(|a| a.parse::<Ipv4Addr>().ok()) else {
                ctx.error(k, "invalid neighbor address");
                continue;
            };
            let mut own = BgpSettings::default();
            for s in k.kids() {
                if !self.bgp_setting(&mut own, s, ctx) {
                    ctx.error(s, "unrecognized statement");
                }
            }
            let Some(remote_as) = own.peer_as.or(shared.peer_as) else {
                ctx.error(k, "Missing BGP peer-as attribute");
                continue;
            };
            let explicit_local = own.local_as.or(shared.local_as);
            if self.neighbors.iter().any(|n| n.peer_address == peer) {
                ctx.error(k, "duplicate neighbor");
                continue;
            }
            self.neighbor_nodes.push((peer, k.clone(), explicit_local.is_some()));
            self.neighbors.push(BgpNeighbor {
                peer_address: peer,
                remote_as,
                local_as: explicit_local.unwrap_or(0),
                import_policy: own.import.or_else(|| shared.import.clone()),
                export_policy: own.export.or_else(|| shared.export.clone()),
            });
        }
    }

    fn ospf_area(&mut self, area: &Node, ctx: &mut Ctx) {
        for k in area.kids() {
            let Some(name) = k.arg(1).filter(|_| k.keyword() == "interface" && k.words.len() == 2) else {
                ctx.error(k, "unrecognized statement");
                continue;
            };
            let mut link = OspfLink {
                interface_name: name.to_string(),
                cost: if name.starts_with("lo") { 0 } else { 1 },
                passive: false,
            };
            for s in k.kids() {
                match (s.keyword(), s.words.len()) {
                    ("passive", 1) => link.passive = true,
                    ("metric", 2) => match parse_u32(s.arg(1), "metric") {
                        Ok(v) => link.cost = v,
                        Err(e) => ctx.error(s, e),
                    },
                    _ => ctx.error(s, "unrecognized statement"),
                }
            }
            if self.ospf.iter().any(|l| l.interface_name == link.interface_name) {
                ctx.error(k, "duplicate OSPF interface");
                continue;
            }
            self.ospf.push(link);
        }
    }

    fn policy_options(&mut self, node: &Node, ctx: &mut Ctx) {
        for k in node.kids() {
            let Some(name) = k.arg(1).map(str::to_string) else {
                ctx.error(k, "missing name");
                continue;
            };
            match k.keyword() {
                "prefix-list" if k.words.len() == 2 => {
                    let mut entries = Vec::new();
                    for e in k.kids() {
                        if e.words.len() != 1 || e.children.is_some() {
                            ctx.error(e, "expected a single prefix");
                            continue;
                        }
                        match parse_prefix(e.keyword()) {
                            Ok(p) => entries.push(PrefixListEntry::new(0, Action::Permit, p)),
                            Err(msg) => {
                                ctx.error(e, msg);
                                self.broken_lists.insert(name.clone());
                            }
                        }
                    }
                    self.define_list(name, entries, k, ctx);
                }
                "route-filter-list" if k.words.len() == 2 => {
                    let mut entries = Vec::new();
                    for e in k.kids() {
                        match route_filter_entry(&e.words) {
                            Ok(entry) => entries.push(entry),
                            Err(msg) => {
                                ctx.error(e, msg);
                                self.broken_lists.insert(name.clone());
                            }
                        }
                    }
                    self.define_list(name, entries, k, ctx);
                }
                "community" => {
                    if k.arg(2) != Some("members") || k.words.len() != 4 {
                        ctx.error(k, "expected 'community NAME members VALUES'");
                        continue;
                    }
                    let values: Result<Vec<CommunityValue>, _> = k.words[3]
                        .values()
                        .iter()
                        .map(|v| v.parse::<CommunityValue>())
                        .collect();
                    match values {
                        Ok(v) if !v.is_empty() => {
                            self.communities.insert(name, (v, k.line, k.path.clone()));
                        }
                        Ok(_) => ctx.error(k, "empty community"),
                        Err(e) => ctx.error(k, format!("{e}")),
                    }
                }
                "policy-statement" if k.words.len() == 2 && k.children.is_some() => self.policy_nodes.push(k.clone()),
                _ => ctx.error(k, "unrecognized statement"),
            }
        }
    }

    fn define_list(&mut self, name: String, mut entries: Vec<PrefixListEntry>, node: &Node, ctx: &mut Ctx) {
        if entries.is_empty() {
            if !self.broken_lists.contains(&name) {
                ctx.warn(node, "empty list");
            }
            return;
        }
        if self.prefix_lists.contains_key(&name) {
            ctx.error(node, "duplicate list name");
            return;
        }
        for (i, e) in entries.iter_mut().enumerate() {
            e.seq = (i as u32 + 1) * 5;
        }
        self.prefix_lists.insert(name, entries);
    }

    fn policy(&mut self, node: &Node, ctx: &mut Ctx) {
        let name = node.arg(1).unwrap_or_default().to_string();
        let mut policy = RoutePolicy::new(name.clone());
        let mut prev_seq = 0;
        for k in node.kids() {
            match k.keyword() {
                "term" if k.arg(1).is_some() && k.words.len() == 2 => {
                    let term = k.arg(1).unwrap_or_default();
                    let seq = match term.parse::<u32>() {
                        Ok(n) if n > prev_seq => n,
                        _ => prev_seq + TERM_SEQ_STEP,
                    };
                    prev_seq = seq;
                    if let Some(clause) = self.term(&name, term, seq, k, ctx) {
                        policy.clauses.push(clause);
                    }
                }
                "then" => match terminal_action(k) {
                    Some(a) => policy.default_action = a,
                    None => ctx.error(k, "only accept or reject may follow a policy-level then"),
                },
                _ => ctx.error(k, "unrecognized statement"),
            }
        }
        self.policies.insert(name, policy);
    }

    fn term(&mut self, policy: &str, term: &str, seq: u32, node: &Node, ctx: &mut Ctx) -> Option<PolicyClause> {
        let mut clause = PolicyClause::new(seq, Action::Permit);
        let mut action = None;
        let mut route_filters = Vec::new();
        let mut route_filter_node = None;
        for k in node.kids() {
            let stmts: Vec<Node> = match &k.children {
                Some(kids) => kids.clone(),
                None => {
                    let mut inner = k.clone();
                    inner.words.remove(0);
                    vec![inner]
                }
            };
            match k.keyword() {
                "from" => {
                    for s in &stmts {
                        match self.from(s, &mut clause, ctx) {
                            Ok(Some(entry)) => {
                                route_filters.push(entry);
                                route_filter_node.get_or_insert_with(|| s.clone());
                            }
                            Ok(None) => {}
                            Err(msg) => ctx.error(s, msg),
                        }
                    }
                }
                "then" => {
                    for s in &stmts {
                        match self.then(s, &mut clause) {
                            Ok(Some(a)) => action = Some(a),
                            Ok(None) => {}
                            Err(msg) => ctx.error(s, msg),
                        }
                    }
                }
                _ => ctx.error(k, "unrecognized statement"),
            }
        }
        if !route_filters.is_empty() {
            let list = format!("{policy}-{term}-route-filter");
            for (i, e) in route_filters.iter_mut().enumerate() {
                e.seq = (i as u32 + 1) * 5;
            }
            self.prefix_lists.insert(list.clone(), route_filters);
            clause.matches.push(MatchCond::PrefixList(list));
        }
        match action {
            Some(a) => clause.action = a,
            None => ctx.warn(node, "term has no accept or reject action"),
        }
        Some(clause)
    }

    /// Returns a route-filter entry when the statement is a `route-filter`.
    fn from(&mut self, s: &Node, clause: &mut PolicyClause, ctx: &mut Ctx) -> Result<Option<PrefixListEntry>, String> {
        let one = |s: &Node| -> Result<String, String> {
            match (s.words.len(), s.arg(1)) {
                (2, Some(v)) => Ok(v.to_string()),
                _ => Err(format!("expected exactly one value after {}", s.keyword())),
            }
        };
        match s.keyword() {
            "protocol" => {
                let p: Protocol = one(s)?.parse().map_err(|e| format!("{e}"))?;
                clause.matches.push(MatchCond::Protocol(p));
            }
            "prefix-list" | "route-filter-list" => {
                let name = one(s)?;
                if !self.prefix_lists.contains_key(&name) && !self.broken_lists.contains(&name) {
                    ctx.warn(s, format!("undefined {} '{name}'", s.keyword()));
                }
                clause.matches.push(MatchCond::PrefixList(name));
            }
            "prefix-list-filter" => {
                let name = s.arg(1).ok_or("missing list name")?.to_string();
                let mods: Vec<&str> = s.words[2..].iter().filter_map(Word::atom).collect();
                let Some(base) = self.prefix_lists.get(&name).cloned() else {
                    if self.broken_lists.contains(&name) {
                        return Ok(None);
                    }
                    return Err(format!("undefined prefix-list '{name}'"));
                };
                let derived = format!("{name}-{}", modifier_suffix(&mods));
                let mut entries = Vec::new();
                for e in &base {
                    let ((ge, le), used) = modifier_range(e.prefix, &mods)?;
                    if used != mods.len() {
                        return Err("unexpected words after the match modifier".into());
                    }
                    entries.push(PrefixListEntry::new(e.seq, e.action, e.prefix).ge(ge).le(le));
                }
                self.prefix_lists.insert(derived.clone(), entries);
                clause.matches.push(MatchCond::PrefixList(derived));
            }
            "route-filter" => return route_filter_entry(&s.words[1..]).map(Some),
            "community" => {
                let name = one(s)?;
                self.from_communities.insert(name.clone());
                if !self.communities.contains_key(&name) {
                    ctx.warn(s, format!("undefined community '{name}'"));
                }
                clause.matches.push(MatchCond::CommunityList(name));
            }
            _ => return Err("unrecognized match condition".into()),
        }
        Ok(None)
    }

    fn then(&mut self, s: &Node, clause: &mut PolicyClause) -> Result<Option<Action>, String> {
        match (s.keyword(), s.words.len()) {
            ("accept", 1) => return Ok(Some(Action::Permit)),
            ("reject", 1) => return Ok(Some(Action::Deny)),
            ("metric", 2) => clause.sets.push(SetAction::Med(parse_u32(s.arg(1), "metric")?)),
            ("local-preference", 2) => clause
                .sets
                .push(SetAction::LocalPref(parse_u32(s.arg(1), "local-preference")?)),
            ("community", 3) => {
                let additive = match s.arg(1) {
                    Some("add") => true,
                    Some("set") => false,
                    _ => return Err("only community add and community set are supported".into()),
                };
                let name = s.arg(2).ok_or("missing community name")?.to_string();
                let values = self
                    .communities
                    .get(&name)
                    .map(|(v, _, _)| v.iter().copied().collect())
                    .ok_or_else(|| format!("undefined community '{name}'"))?;
                self.then_communities.insert(name);
                clause.sets.push(SetAction::Community { values, additive });
            }
            _ => return Err("unrecognized action".into()),
        }
        Ok(None)
    }

    fn finish(mut self, ctx: &mut Ctx) -> RouterConfig {
        let asn = self.asn.unwrap_or(0);
        for (peer, node, explicit) in &self.neighbor_nodes {
            if !explicit {
                ctx.warn(node, "Missing BGP local-as attribute");
                if let Some(n) = self.neighbors.iter_mut().find(|n| n.peer_address == *peer) {
                    n.local_as = asn;
                }
            }
        }
        for (name, node) in &self.policy_refs {
            if !self.policies.contains_key(name) {
                ctx.warn(node, format!("undefined policy '{name}'"));
            }
        }
        let router_id = self.router_id.unwrap_or_else(|| {
            let lo = self
                .interfaces
                .iter()
                .filter(|i| i.name.starts_with("lo"))
                .map(|i| i.address)
                .max();
            lo.or_else(|| self.interfaces.iter().map(|i| i.address).max())
                .unwrap_or(Ipv4Addr::UNSPECIFIED)
        });
        let mut c = RouterConfig::new(self.hostname, asn, router_id);
        c.interfaces = self.interfaces;
        c.ospf = self.ospf;
        c.bgp_neighbors = self.neighbors;
        c.redistributions = [Protocol::Connected, Protocol::Static, Protocol::Ospf]
            .into_iter()
            .map(|protocol| Redistribution { protocol, policy: None })
            .collect();
        c.policies = self.policies;
        c.prefix_lists = self.prefix_lists;
        for (name, (values, _, _)) in self.communities {
            if self.from_communities.contains(&name) || !self.then_communities.contains(&name) {
                c.community_lists.insert(name, values);
            }
        }
        c
    }
}

fn terminal_action(node: &Node) -> Option<Action> {
    let word = match &node.children {
        Some(kids) if kids.len() == 1 && kids[0].words.len() == 1 => kids[0].keyword().to_string(),
        None if node.words.len() == 2 => node.arg(1)?.to_string(),
        _ => return None,
    };
    match word.as_str() {
        "accept" => Some(Action::Permit),
        "reject" => Some(Action::Deny),
        _ => None,
    }
}

fn route_filter_entry(words: &[Word]) -> Result<PrefixListEntry, String> {
    let atoms: Vec<&str> = words.iter().filter_map(Word::atom).collect();
    if atoms.len() != words.len() || atoms.is_empty() {
        return Err("expected 'PREFIX MODIFIER [accept|reject]'".into());
    }
    let prefix = parse_prefix(atoms[0])?;
    let ((ge, le), used) = modifier_range(prefix, &atoms[1..])?;
    let rest = &atoms[1 + used..];
    let action = match rest {
        [] | ["accept"] => Action::Permit,
        ["reject"] => Action::Deny,
        _ => return Err("unexpected words after the match modifier".into()),
    };
    Ok(PrefixListEntry::new(0, action, prefix).ge(ge).le(le))
}

fn is_plain_prefix_list(entries: &[PrefixListEntry]) -> bool {
    entries.iter().all(|e| {
        let len = e.prefix.len();
        e.action == Action::Permit && e.length_range() == (len, len)
    })
}

fn filter_modifier(e: &PrefixListEntry) -> String {
    let len = e.prefix.len();
    match e.length_range() {
        (ge, le) if ge == len && le == len => "exact".into(),
        (ge, 32) if ge == len => "orlonger".into(),
        (ge, 32) if ge == len + 1 => "longer".into(),
        (ge, le) if ge == len => format!("upto /{le}"),
        (ge, le) => format!("prefix-length-range /{ge}-/{le}"),
    }
}

fn members(values: &[CommunityValue]) -> String {
    match values {
        [one] => one.to_string(),
        many => format!(
            "[ {} ]",
            many.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
        ),
    }
}

/// Splits `ge-0/0/0.0` into `("ge-0/0/0", "0")`; names without a unit get unit 0.
fn split_unit(name: &str) -> (&str, &str) {
    match name.rsplit_once('.') {
        Some((ifd, unit)) if !unit.is_empty() && unit.bytes().all(|b| b.is_ascii_digit()) => (ifd, unit),
        _ => (name, "0"),
    }
}

/// Deterministic Junos rendering. Redistributions and `bgp_networks` are not
/// rendered; export policies decide what BGP sends.
pub fn print_juniper(config: &RouterConfig) -> String {
    let mut out = String::new();
    if !config.name.is_empty() {
        let _ = writeln!(out, "system {{\n    host-name {};\n}}", config.name);
    }

    if !config.interfaces.is_empty() {
        out.push_str("interfaces {\n");
        let mut by_ifd: BTreeMap<&str, Vec<(&str, &Interface)>> = BTreeMap::new();
        for iface in &config.interfaces {
            let (ifd, unit) = split_unit(&iface.name);
            by_ifd.entry(ifd).or_default().push((unit, iface));
        }
        for (ifd, units) in by_ifd {
            let _ = writeln!(out, "    {ifd} {{");
            for (unit, iface) in units {
                let _ = writeln!(out, "        unit {unit} {{");
                let _ = writeln!(out, "            family inet {{");
                let _ = writeln!(out, "                address {}/{};", iface.address, iface.mask_length);
                out.push_str("            }\n        }\n");
            }
            out.push_str("    }\n");
        }
        out.push_str("}\n");
    }

    let _ = writeln!(
        out,
        "routing-options {{\n    router-id {};\n    autonomous-system {};\n}}",
        config.router_id, config.asn
    );

    if !config.bgp_neighbors.is_empty() || !config.ospf.is_empty() {
        out.push_str("protocols {\n");
        if !config.bgp_neighbors.is_empty() {
            out.push_str("    bgp {\n        group ebgp {\n            type external;\n");
            for n in &config.bgp_neighbors {
                let _ = writeln!(out, "            neighbor {} {{", n.peer_address);
                let _ = writeln!(out, "                peer-as {};", n.remote_as);
                let _ = writeln!(out, "                local-as {};", n.local_as);
                if let Some(p) = &n.import_policy {
                    let _ = writeln!(out, "                import {p};");
                }
                if let Some(p) = &n.export_policy {
                    let _ = writeln!(out, "                export {p};");
                }
                out.push_str("            }\n");
            }
            out.push_str("        }\n    }\n");
        }
        if !config.ospf.is_empty() {
            out.push_str("    ospf {\n        area 0.0.0.0 {\n");
            for link in &config.ospf {
                let _ = writeln!(out, "            interface {} {{", link.interface_name);
                if link.passive {
                    out.push_str("                passive;\n");
                }
                let _ = writeln!(out, "                metric {};", link.cost);
                out.push_str("            }\n");
            }
            out.push_str("        }\n    }\n");
        }
        out.push_str("}\n");
    }

    let mut set_communities: Vec<(String, &BTreeSet<CommunityValue>)> = Vec::new();
    let mut terms = String::new();
    for (name, policy) in &config.policies {
        let _ = writeln!(terms, "    policy-statement {name} {{");
        for clause in &policy.clauses {
            let _ = writeln!(terms, "        term {} {{", clause.seq);
            if !clause.matches.is_empty() {
                terms.push_str("            from {\n");
                for m in &clause.matches {
                    let _ = match m {
                        MatchCond::Protocol(p) => {
                            let p = if *p == Protocol::Connected {
                                "direct"
                            } else {
                                p.as_str()
                            };
                            writeln!(terms, "                protocol {p};")
                        }
                        MatchCond::PrefixList(l) => {
                            let kind = match config.prefix_lists.get(l) {
                                Some(e) if !is_plain_prefix_list(e) => "route-filter-list",
                                _ => "prefix-list",
                            };
                            writeln!(terms, "                {kind} {l};")
                        }
                        MatchCond::CommunityList(l) => writeln!(terms, "                community {l};"),
                    };
                }
                terms.push_str("            }\n");
            }
            terms.push_str("            then {\n");
            for (i, s) in clause.sets.iter().enumerate() {
                let _ = match s {
                    SetAction::Med(m) => writeln!(terms, "                metric {m};"),
                    SetAction::LocalPref(lp) => writeln!(terms, "                local-preference {lp};"),
                    SetAction::Community { values, additive } => {
                        let cname = format!("{name}-{}-set{}", clause.seq, i + 1);
                        let verb = if *additive { "add" } else { "set" };
                        let line = writeln!(terms, "                community {verb} {cname};");
                        set_communities.push((cname, values));
                        line
                    }
                };
            }
            let verb = if clause.action == Action::Permit {
                "accept"
            } else {
                "reject"
            };
            let _ = writeln!(terms, "                {verb};\n            }}\n        }}");
        }
        let default = if policy.default_action == Action::Permit {
            "accept"
        } else {
            "reject"
        };
        let _ = writeln!(terms, "        then {default};\n    }}");
    }

    let has_policy_options =
        !config.prefix_lists.is_empty() || !config.community_lists.is_empty() || !config.policies.is_empty();
    if has_policy_options {
        out.push_str("policy-options {\n");
        for (name, entries) in &config.prefix_lists {
            if is_plain_prefix_list(entries) {
                let _ = writeln!(out, "    prefix-list {name} {{");
                for e in entries {
                    let _ = writeln!(out, "        {};", e.prefix);
                }
            } else {
                let _ = writeln!(out, "    route-filter-list {name} {{");
                for e in entries {
                    let reject = if e.action == Action::Deny { " reject" } else { "" };
                    let _ = writeln!(out, "        {} {}{reject};", e.prefix, filter_modifier(e));
                }
            }
            out.push_str("    }\n");
        }
        for (name, values) in &config.community_lists {
            let _ = writeln!(out, "    community {name} members {};", members(values));
        }
        for (name, values) in &set_communities {
            let v: Vec<CommunityValue> = values.iter().copied().collect();
            let _ = writeln!(out, "    community {name} members {};", members(&v));
        }
        out.push_str(&terms);
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::canonicalize;

    const SAMPLE: &str = r#"
system {
    host-name border1;
}
interfaces {
    lo0 {
        unit 0 {
            family inet {
                address 1.1.1.1/32;
            }
        }
    }
    ge-0/0/0 {
        unit 0 {
            family inet {
                address 2.3.4.1/24;
            }
        }
    }
}
routing-options {
    router-id 1.1.1.1;
    autonomous-system 65001;
}
protocols {
    bgp {
        group provider {
            type external;
            local-as 65001;
            neighbor 2.3.4.5 {
                peer-as 65100;
                export to_provider;
            }
        }
    }
    ospf {
        area 0.0.0.0 {
            interface lo0.0 {
                passive;
            }
            interface ge-0/0/0.0 {
                metric 10;
            }
        }
    }
}
policy-options {
    prefix-list our-networks {
        1.2.3.0/24;
    }
    community tag members 100:1;
    policy-statement to_provider {
        term 10 {
            from {
                protocol bgp;
                prefix-list-filter our-networks orlonger;
            }
            then {
                metric 50;
                community add tag;
                accept;
            }
        }
        then reject;
    }
}
"#;

    #[test]
    fn parses_sample() {
        let r = parse_juniper(SAMPLE);
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
        let c = r.config;
        assert_eq!(c.name, "border1");
        assert_eq!(c.asn, 65001);
        assert_eq!(c.interfaces[0].name, "lo0.0");
        assert_eq!(c.ospf_link("lo0.0").unwrap().cost, 0);
        assert!(c.ospf_link("lo0.0").unwrap().passive);
        assert_eq!(c.ospf_link("ge-0/0/0.0").unwrap().cost, 10);
        assert_eq!(c.bgp_neighbors[0].local_as, 65001);
        let clause = &c.policies["to_provider"].clauses[0];
        assert_eq!(clause.seq, 10);
        assert!(clause
            .matches
            .contains(&MatchCond::PrefixList("our-networks-orlonger".into())));
        assert!(clause.matches.contains(&MatchCond::Protocol(Protocol::Bgp)));
        assert_eq!(c.prefix_lists["our-networks-orlonger"][0].length_range(), (24, 32));
        assert!(c.community_lists.is_empty());
        assert_eq!(c.redistributions.len(), 3);
    }

    #[test]
    fn round_trip_sample() {
        let c = parse_juniper(SAMPLE).config;
        let printed = print_juniper(&c);
        let back = parse_juniper(&printed);
        assert!(back.diagnostics.is_empty(), "{:?}\n{printed}", back.diagnostics);
        assert_eq!(canonicalize(&back.config), canonicalize(&c));
    }

    #[test]
    fn missing_local_as_warns_on_neighbor_line() {
        let text = SAMPLE.replace("            local-as 65001;\n", "");
        let r = parse_juniper(&text);
        assert_eq!(r.diagnostics.len(), 1, "{:?}", r.diagnostics);
        let d = &r.diagnostics[0];
        assert_eq!(d.message, "Missing BGP local-as attribute");
        assert_eq!(d.severity, Severity::Warning);
        assert_eq!(d.line_text.trim(), "neighbor 2.3.4.5 {");
        assert_eq!(r.config.bgp_neighbors[0].local_as, 65001);
    }

    #[test]
    fn range_inside_prefix_list_is_flattened() {
        let text = SAMPLE.replace("        1.2.3.0/24;\n", "        1.2.3.0/24-32;\n");
        let r = parse_juniper(&text);
        assert_eq!(r.diagnostics.len(), 1, "{:?}", r.diagnostics);
        let d = &r.diagnostics[0];
        assert_eq!(d.severity, Severity::Error);
        assert_eq!(
            d.statement.as_deref(),
            Some("policy-options prefix-list our-networks 1.2.3.0/24-32")
        );
    }

    #[test]
    fn route_filter_modifiers() {
        let p: Ipv4Prefix = "10.0.0.0/8".parse().unwrap();
        assert_eq!(modifier_range(p, &["exact"]).unwrap().0, (8, 8));
        assert_eq!(modifier_range(p, &["orlonger"]).unwrap().0, (8, 32));
        assert_eq!(modifier_range(p, &["longer"]).unwrap().0, (9, 32));
        assert_eq!(modifier_range(p, &["upto", "/16"]).unwrap().0, (8, 16));
        assert_eq!(
            modifier_range(p, &["prefix-length-range", "/12-/14"]).unwrap().0,
            (12, 14)
        );
        assert!(modifier_range(p, &["prefix-length-range", "/4-/14"]).is_err());
    }

    #[test]
    fn unbalanced_braces() {
        let r = parse_juniper("system {\n    host-name R1;\n");
        assert!(r.has_errors());
        let r = parse_juniper("system {\n    host-name R1\n}\n");
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.diagnostics[0].message, "missing ';'");
    }

    #[test]
    fn term_without_action_warns() {
        let text = SAMPLE.replace("                accept;\n", "");
        let r = parse_juniper(&text);
        assert_eq!(r.diagnostics.len(), 1);
        assert!(r.diagnostics[0].message.contains("no accept or reject"));
    }
}
