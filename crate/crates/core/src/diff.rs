//! Differencing an original config against its translation: structural
//! mismatches, attribute differences, then policy behavior differences.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::ir::{Protocol, RouterConfig};
use crate::policy::{
    build_test_space, eval_policy, permit_all, Direction, ListEnv, PolicyError, PolicyOutcome, RouteAnnouncement,
    RouteConstraint,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Present only in the original.
    Original,
    /// Present only in the translation.
    Translation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralMismatch {
    /// The unmatched element, e.g. "an import route map for bgp neighbor 2.3.4.5".
    pub item: String,
    /// What the other side lacks, e.g. "route map".
    pub kind: String,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDiff {
    pub left_component: String,
    pub right_component: String,
    pub attribute: String,
    pub left: String,
    pub right: String,
}

/// What a policy does to one announcement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Effect {
    Reject,
    Accept {
        med: u32,
        communities: BTreeSet<crate::ir::CommunityValue>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        local_pref: Option<u32>,
    },
}

impl Effect {
    fn of(outcome: &PolicyOutcome) -> Effect {
        match outcome {
            PolicyOutcome::Denied { .. } => Effect::Reject,
            PolicyOutcome::Accepted { route, .. } => Effect::Accept {
                med: route.med,
                communities: route.communities.clone(),
                local_pref: route.local_pref,
            },
        }
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            Effect::Reject => "REJECT",
            Effect::Accept { .. } => "ACCEPT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyBehaviorDiff {
    pub left_policy: String,
    pub right_policy: String,
    pub neighbor: Ipv4Addr,
    pub direction: Direction,
    pub example: RouteAnnouncement,
    pub left: Effect,
    pub right: Effect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffFinding {
    Structural(StructuralMismatch),
    Attribute(AttributeDiff),
    PolicyBehavior(PolicyBehaviorDiff),
}

impl fmt::Display for DiffFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::humanize::humanize_diff(self).text)
    }
}

/// Policies attached at one session and direction on both sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyPair {
    pub neighbor: Ipv4Addr,
    pub direction: Direction,
    pub left: Option<String>,
    pub right: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrespondenceMap {
    pub neighbors: Vec<Ipv4Addr>,
    /// (original interface, translated interface).
    pub interfaces: Vec<(String, String)>,
    pub policies: Vec<PolicyPair>,
}

/// Explicit interface pairings that take precedence over the default rules,
/// keyed by original name.
pub type InterfaceOverrides = BTreeMap<String, String>;

/// `LoopbackN` on one side pairs with `lo0.N` on the other.
fn loopback_unit(name: &str) -> Option<&str> {
    name.strip_prefix("Loopback").or_else(|| name.strip_prefix("lo0."))
}

/// Decides whether two interfaces correspond.
type PairingRule<'a> = &'a dyn Fn(&crate::ir::Interface, &crate::ir::Interface) -> bool;

fn pair_interfaces(a: &RouterConfig, b: &RouterConfig, overrides: &InterfaceOverrides) -> Vec<(String, String)> {
    let mut pairs = Vec::new();
    let mut taken: BTreeSet<&str> = BTreeSet::new();
    let rules: [PairingRule; 4] = [
        &|x, y| overrides.get(&x.name) == Some(&y.name),
        &|x, y| x.name == y.name,
        &|x, y| loopback_unit(&x.name).is_some() && loopback_unit(&x.name) == loopback_unit(&y.name),
        &|x, y| x.subnet() == y.subnet(),
    ];
    let mut matched: BTreeSet<&str> = BTreeSet::new();
    for rule in rules {
        for x in &a.interfaces {
            if matched.contains(x.name.as_str()) {
                continue;
            }
            if let Some(y) = b
                .interfaces
                .iter()
                .find(|y| !taken.contains(y.name.as_str()) && rule(x, y))
            {
                matched.insert(&x.name);
                taken.insert(&y.name);
                pairs.push((x.name.clone(), y.name.clone()));
            }
        }
    }
    // Report in original declaration order.
    let order: BTreeMap<&str, usize> = a
        .interfaces
        .iter()
        .enumerate()
        .map(|(i, x)| (x.name.as_str(), i))
        .collect();
    pairs.sort_by_key(|(x, _)| order[x.as_str()]);
    pairs
}

fn structural(item: String, kind: &str, side: Side) -> StructuralMismatch {
    StructuralMismatch {
        item,
        kind: kind.to_string(),
        side,
    }
}

/// Pairs up interfaces, neighbors and attached policies. Everything left
/// over is a structural mismatch.
pub fn correspond(
    a: &RouterConfig,
    b: &RouterConfig,
    overrides: &InterfaceOverrides,
) -> (CorrespondenceMap, Vec<StructuralMismatch>) {
    let mut map = CorrespondenceMap::default();
    let mut out = Vec::new();

    map.interfaces = pair_interfaces(a, b, overrides);
    for x in &a.interfaces {
        if !map.interfaces.iter().any(|(l, _)| *l == x.name) {
            out.push(structural(
                format!("an interface {}", x.name),
                "interface",
                Side::Original,
            ));
        }
    }
    for y in &b.interfaces {
        if !map.interfaces.iter().any(|(_, r)| *r == y.name) {
            out.push(structural(
                format!("an interface {}", y.name),
                "interface",
                Side::Translation,
            ));
        }
    }

    let left: BTreeSet<Ipv4Addr> = a.bgp_neighbors.iter().map(|n| n.peer_address).collect();
    let right: BTreeSet<Ipv4Addr> = b.bgp_neighbors.iter().map(|n| n.peer_address).collect();
    for addr in left.union(&right) {
        match (a.neighbor(*addr), b.neighbor(*addr)) {
            (Some(x), Some(y)) => {
                map.neighbors.push(*addr);
                for (direction, l, r) in [
                    (Direction::Import, &x.import_policy, &y.import_policy),
                    (Direction::Export, &x.export_policy, &y.export_policy),
                ] {
                    let item = format!("an {direction} route map for bgp neighbor {addr}");
                    match (l, r) {
                        (Some(_), None) => out.push(structural(item, "route map", Side::Original)),
                        (None, Some(_)) => out.push(structural(item, "route map", Side::Translation)),
                        _ => map.policies.push(PolicyPair {
                            neighbor: *addr,
                            direction,
                            left: l.clone(),
                            right: r.clone(),
                        }),
                    }
                }
            }
            (Some(_), None) => out.push(structural(
                format!("a bgp neighbor {addr}"),
                "bgp neighbor",
                Side::Original,
            )),
            (None, Some(_)) => out.push(structural(
                format!("a bgp neighbor {addr}"),
                "bgp neighbor",
                Side::Translation,
            )),
            (None, None) => unreachable!("address came from one of the sides"),
        }
    }

    for link in &a.ospf {
        let partner = map
            .interfaces
            .iter()
            .find(|(l, _)| *l == link.interface_name)
            .map(|(_, r)| r);
        if partner.and_then(|r| b.ospf_link(r)).is_none() {
            out.push(structural(
                format!("an OSPF link for {}", link.interface_name),
                "OSPF link",
                Side::Original,
            ));
        }
    }
    for link in &b.ospf {
        let partner = map
            .interfaces
            .iter()
            .find(|(_, r)| *r == link.interface_name)
            .map(|(l, _)| l);
        if partner.and_then(|l| a.ospf_link(l)).is_none() {
            out.push(structural(
                format!("an OSPF link for {}", link.interface_name),
                "OSPF link",
                Side::Translation,
            ));
        }
    }
    (map, out)
}

fn attr(
    left_component: String,
    right_component: String,
    attribute: &str,
    l: impl ToString,
    r: impl ToString,
) -> AttributeDiff {
    AttributeDiff {
        left_component,
        right_component,
        attribute: attribute.to_string(),
        left: l.to_string(),
        right: r.to_string(),
    }
}

/// Compares OSPF cost and passive flag, then neighbor AS numbers, across
/// corresponding components.
pub fn diff_attributes(a: &RouterConfig, b: &RouterConfig, map: &CorrespondenceMap) -> Vec<AttributeDiff> {
    let mut out = Vec::new();
    for (l, r) in &map.interfaces {
        let (Some(x), Some(y)) = (a.ospf_link(l), b.ospf_link(r)) else {
            continue;
        };
        let (lc, rc) = (format!("the OSPF link for {l}"), format!("link to {r}"));
        if x.cost != y.cost {
            out.push(attr(lc.clone(), rc.clone(), "cost", x.cost, y.cost));
        }
        if x.passive != y.passive {
            out.push(attr(lc, rc, "passive", x.passive, y.passive));
        }
    }
    for addr in &map.neighbors {
        let (Some(x), Some(y)) = (a.neighbor(*addr), b.neighbor(*addr)) else {
            continue;
        };
        let (lc, rc) = (format!("the bgp neighbor {addr}"), format!("bgp neighbor {addr}"));
        if x.local_as != y.local_as {
            out.push(attr(lc.clone(), rc.clone(), "local-as", x.local_as, y.local_as));
        }
        if x.remote_as != y.remote_as {
            out.push(attr(lc, rc, "remote-as", x.remote_as, y.remote_as));
        }
    }
    out
}

/// What `config` does with `ann` at the given session and direction,
/// including whether a non-BGP route is originated into BGP at all.
pub fn effective_outcome(
    config: &RouterConfig,
    env: &ListEnv,
    neighbor: Ipv4Addr,
    direction: Direction,
    ann: &RouteAnnouncement,
) -> Result<Effect, PolicyError> {
    let run = |name: &Option<String>, ann: &RouteAnnouncement| -> Result<PolicyOutcome, PolicyError> {
        match name {
            Some(n) => {
                let policy = config
                    .policies
                    .get(n)
                    .ok_or_else(|| PolicyError::UndefinedPolicy(n.clone()))?;
                eval_policy(policy, env, ann)
            }
            None => eval_policy(&permit_all(""), env, ann),
        }
    };
    let Some(n) = config.neighbor(neighbor) else {
        return Ok(Effect::Reject);
    };
    match direction {
        Direction::Import => Ok(Effect::of(&run(&n.import_policy, ann)?)),
        Direction::Export => {
            let mut route = ann.clone();
            if ann.origin_protocol != Protocol::Bgp && !config.bgp_networks.contains(&ann.prefix) {
                let Some(redist) = config
                    .redistributions
                    .iter()
                    .find(|r| r.protocol == ann.origin_protocol)
                else {
                    return Ok(Effect::Reject);
                };
                match run(&redist.policy, ann)? {
                    PolicyOutcome::Denied { .. } => return Ok(Effect::Reject),
                    PolicyOutcome::Accepted { route: r, .. } => route = r,
                }
            }
            Ok(Effect::of(&run(&n.export_policy, &route)?))
        }
    }
}

fn policy_label(name: &Option<String>, direction: Direction) -> String {
    match name {
        Some(n) => format!("BGP {direction} policy {n}"),
        None => format!("default BGP {direction} policy"),
    }
}

/// First announcement per policy pair on which the two sides differ, over
/// the test space of both configs' lists.
pub fn diff_policies(
    a: &RouterConfig,
    b: &RouterConfig,
    map: &CorrespondenceMap,
) -> Result<Vec<PolicyBehaviorDiff>, PolicyError> {
    let (env_a, env_b) = (ListEnv::from_config(a), ListEnv::from_config(b));
    let union = env_a.union(&env_b);
    let import_only = RouteConstraint {
        protocol: Some(Protocol::Bgp),
        ..Default::default()
    };
    let import_space = build_test_space(&[&union], Some(&import_only));
    let export_space = build_test_space(&[&union], None);
    let mut out = Vec::new();
    for pair in &map.policies {
        let space = match pair.direction {
            Direction::Import => &import_space,
            Direction::Export => &export_space,
        };
        for ann in &space.announcements {
            let l = effective_outcome(a, &env_a, pair.neighbor, pair.direction, ann)?;
            let r = effective_outcome(b, &env_b, pair.neighbor, pair.direction, ann)?;
            if l != r {
                out.push(PolicyBehaviorDiff {
                    left_policy: format!(
                        "{} for BGP neighbor {}",
                        policy_label(&pair.left, pair.direction),
                        pair.neighbor
                    ),
                    right_policy: policy_label(&pair.right, pair.direction),
                    neighbor: pair.neighbor,
                    direction: pair.direction,
                    example: ann.clone(),
                    left: l,
                    right: r,
                });
                break;
            }
        }
    }
    Ok(out)
}

/// All findings in order structural, attribute, policy behavior.
pub fn diff_all(a: &RouterConfig, b: &RouterConfig) -> Result<Vec<DiffFinding>, PolicyError> {
    diff_all_with(a, b, &InterfaceOverrides::new())
}

pub fn diff_all_with(
    a: &RouterConfig,
    b: &RouterConfig,
    overrides: &InterfaceOverrides,
) -> Result<Vec<DiffFinding>, PolicyError> {
    let (map, structural) = correspond(a, b, overrides);
    let mut out: Vec<DiffFinding> = structural.into_iter().map(DiffFinding::Structural).collect();
    out.extend(diff_attributes(a, b, &map).into_iter().map(DiffFinding::Attribute));
    out.extend(diff_policies(a, b, &map)?.into_iter().map(DiffFinding::PolicyBehavior));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontends::parse_cisco;

    const BASE: &str = "\
hostname A
interface Loopback0
 ip address 1.2.3.1 255.255.255.0
 ip ospf 1 area 0
router ospf 1
 passive-interface Loopback0
router bgp 65001
 network 1.2.3.0 mask 255.255.255.0
 neighbor 2.3.4.5 remote-as 65002
 neighbor 2.3.4.5 route-map out_map out
ip prefix-list ours seq 5 permit 1.2.3.0/24 ge 24
route-map out_map permit 10
 match ip address prefix-list ours
";

    fn cfg(text: &str) -> RouterConfig {
        let r = parse_cisco(text);
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
        r.config
    }

    #[test]
    fn self_diff_is_empty() {
        let a = cfg(BASE);
        assert!(diff_all(&a, &a).unwrap().is_empty());
    }

    #[test]
    fn missing_policy_is_structural_only() {
        let a = cfg(BASE);
        let mut b = a.clone();
        b.bgp_neighbors[0].export_policy = None;
        let d = diff_all(&a, &b).unwrap();
        assert_eq!(
            d,
            vec![DiffFinding::Structural(StructuralMismatch {
                item: "an export route map for bgp neighbor 2.3.4.5".into(),
                kind: "route map".into(),
                side: Side::Original
            })]
        );
        let rev = diff_all(&b, &a).unwrap();
        assert!(matches!(&rev[0], DiffFinding::Structural(s) if s.side == Side::Translation));
    }

    #[test]
    fn extra_neighbor_on_translation_side() {
        let a = cfg(BASE);
        let mut b = a.clone();
        let mut extra = b.bgp_neighbors[0].clone();
        extra.peer_address = "9.9.9.9".parse().unwrap();
        b.bgp_neighbors.push(extra);
        let d = diff_all(&a, &b).unwrap();
        assert_eq!(d.len(), 1);
        assert!(matches!(&d[0], DiffFinding::Structural(s) if s.side == Side::Translation && s.kind == "bgp neighbor"));
    }

    #[test]
    fn loopback_pairs_with_lo0_unit() {
        let a = cfg(BASE);
        let mut b = a.clone();
        b.interfaces[0].name = "lo0.0".into();
        b.interfaces[0].address = "9.9.9.9".parse().unwrap();
        b.ospf[0].interface_name = "lo0.0".into();
        b.ospf[0].cost = 0;
        let d = diff_all(&a, &b).unwrap();
        assert_eq!(
            d,
            vec![DiffFinding::Attribute(AttributeDiff {
                left_component: "the OSPF link for Loopback0".into(),
                right_component: "link to lo0.0".into(),
                attribute: "cost".into(),
                left: "1".into(),
                right: "0".into()
            })]
        );
    }

    #[test]
    fn narrower_prefix_list_is_a_behavior_diff() {
        let a = cfg(BASE);
        let b = cfg(&BASE.replace(" ge 24", ""));
        let d = diff_all(&a, &b).unwrap();
        assert_eq!(d.len(), 1);
        let DiffFinding::PolicyBehavior(p) = &d[0] else {
            panic!("{d:?}")
        };
        assert_eq!(p.example.prefix.to_string(), "1.2.3.0/25");
        assert_eq!((p.left.keyword(), p.right.keyword()), ("ACCEPT", "REJECT"));
        assert_eq!(p.left_policy, "BGP export policy out_map for BGP neighbor 2.3.4.5");
    }
}
