//! Independent checks used by the property tests and the acceptance gate.

use std::collections::BTreeSet;
use std::net::Ipv4Addr;

use cosynth::diff::{diff_all, DiffFinding, Effect};
use cosynth::frontends::{parse, print, Vendor};
use cosynth::ir::{canonicalize, validate_ir, Action, CommunityValue, Ipv4Prefix, Protocol, RoutePolicy, RouterConfig};
use cosynth::policy::{
    eval_policy, search_policy, Direction, ListEnv, PolicyOutcome, RouteAnnouncement, RouteConstraint,
};

use super::strategies::ORACLE_COMMUNITIES;

/// print then parse gives back the same canonical IR with no diagnostics.
pub fn round_trip(vendor: Vendor, config: &RouterConfig) -> Result<(), String> {
    let violations = validate_ir(config);
    if !violations.is_empty() {
        return Err(format!("generator produced an invalid IR: {violations:?}"));
    }
    let text = print(vendor, config);
    let back = parse(vendor, &text);
    if !back.diagnostics.is_empty() {
        return Err(format!("diagnostics {:?} on\n{text}", back.diagnostics));
    }
    if canonicalize(&back.config) != canonicalize(config) {
        return Err(format!(
            "round trip changed the IR\nprinted:\n{text}\nbefore: {}\nafter: {}",
            canonicalize(config).to_json(),
            canonicalize(&back.config).to_json()
        ));
    }
    Ok(())
}

/// Every prefix of 10.0.0.0/8 with length 8..=16.
pub fn oracle_prefixes() -> Vec<Ipv4Prefix> {
    let mut out = Vec::new();
    for len in 8u8..=16 {
        let extra = len - 8;
        for i in 0u32..(1 << extra) {
            let addr = (10u32 << 24) | (i << (24 - extra));
            out.push(Ipv4Prefix::new(Ipv4Addr::from(addr), len));
        }
    }
    out
}

pub fn community_subsets() -> Vec<BTreeSet<CommunityValue>> {
    (0u8..8)
        .map(|mask| {
            ORACLE_COMMUNITIES
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, c)| *c)
                .collect()
        })
        .collect()
}

/// All announcements of the brute-force space.
pub fn oracle_space() -> Vec<RouteAnnouncement> {
    let mut out = Vec::new();
    for p in oracle_prefixes() {
        for cs in community_subsets() {
            for proto in Protocol::ALL {
                out.push(RouteAnnouncement::new(p, proto).with_communities(cs.iter().copied()));
            }
        }
    }
    out
}

pub fn oracle_range() -> RouteConstraint {
    RouteConstraint {
        prefix_range: Some(cosynth::policy::PrefixRange {
            prefix: "10.0.0.0/8".parse().unwrap(),
            min_len: 8,
            max_len: 16,
        }),
        ..Default::default()
    }
}

/// search_policy finds a counterexample exactly when enumeration does, and
/// any counterexample it returns reproduces under eval_policy.
pub fn search_matches_enumeration(
    config: &RouterConfig,
    must_have: Option<CommunityValue>,
    expected: Action,
) -> Result<(), String> {
    let policy = &config.policies["P"];
    let env = ListEnv::from_config(config);
    let mut constraint = oracle_range();
    constraint.must_have.extend(must_have);
    let brute = oracle_space()
        .into_iter()
        .find(|ann| constraint.admits(ann) && eval_policy(policy, &env, ann).unwrap().action() != expected);
    let found = search_policy(policy, &env, &constraint, expected).map_err(|e| e.to_string())?;
    if let Some(cex) = &found {
        let actual = eval_policy(policy, &env, &cex.announcement).unwrap().action();
        if actual == expected || actual != cex.actual || !constraint.admits(&cex.announcement) {
            return Err(format!("counterexample does not reproduce: {cex:?}"));
        }
    }
    if found.is_some() != brute.is_some() {
        return Err(format!(
            "search {:?} vs enumeration {:?}\n{}",
            found.map(|c| c.announcement.to_string()),
            brute.map(|a| a.to_string()),
            config.to_json()
        ));
    }
    Ok(())
}

fn effect(policy: Option<&RoutePolicy>, env: &ListEnv, ann: &RouteAnnouncement) -> Effect {
    let outcome = match policy {
        Some(p) => eval_policy(p, env, ann).unwrap(),
        None => PolicyOutcome::Accepted {
            route: ann.clone(),
            at: cosynth::policy::ClauseRef::Default,
        },
    };
    match outcome {
        PolicyOutcome::Denied { .. } => Effect::Reject,
        PolicyOutcome::Accepted { route, .. } => Effect::Accept {
            med: route.med,
            communities: route.communities,
            local_pref: route.local_pref,
        },
    }
}

/// Session outcome computed straight from eval_policy: an exported non-BGP
/// route must first be originated by a network statement or a
/// redistribution whose policy accepts it.
pub fn session_effect(
    config: &RouterConfig,
    neighbor: Ipv4Addr,
    direction: Direction,
    ann: &RouteAnnouncement,
) -> Effect {
    let env = ListEnv::from_config(config);
    let Some(n) = config.neighbor(neighbor) else {
        return Effect::Reject;
    };
    let lookup = |name: &Option<String>| name.as_ref().map(|n| &config.policies[n]);
    match direction {
        Direction::Import => effect(lookup(&n.import_policy), &env, ann),
        Direction::Export => {
            let mut route = ann.clone();
            if ann.origin_protocol != Protocol::Bgp && !config.bgp_networks.contains(&ann.prefix) {
                let Some(r) = config
                    .redistributions
                    .iter()
                    .find(|r| r.protocol == ann.origin_protocol)
                else {
                    return Effect::Reject;
                };
                match effect(lookup(&r.policy), &env, ann) {
                    Effect::Reject => return Effect::Reject,
                    Effect::Accept {
                        med,
                        communities,
                        local_pref,
                    } => {
                        route.med = med;
                        route.communities = communities;
                        route.local_pref = local_pref;
                    }
                }
            }
            effect(lookup(&n.export_policy), &env, &route)
        }
    }
}

/// Each reported behavior difference reproduces on both sides.
pub fn diff_self_validates(a: &RouterConfig, b: &RouterConfig) -> Result<(), String> {
    for f in diff_all(a, b).map_err(|e| e.to_string())? {
        if let DiffFinding::PolicyBehavior(d) = f {
            let l = session_effect(a, d.neighbor, d.direction, &d.example);
            let r = session_effect(b, d.neighbor, d.direction, &d.example);
            if l != d.left || r != d.right || l == r {
                return Err(format!("finding does not reproduce: {d:?}, got {l:?} / {r:?}"));
            }
        }
    }
    Ok(())
}

/// When enumeration finds a session on which the two configs differ, the
/// diff reports a behavior difference for that session.
pub fn diff_complete(a: &RouterConfig, b: &RouterConfig) -> Result<(), String> {
    let reported: BTreeSet<(Ipv4Addr, Direction)> = diff_all(a, b)
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter_map(|f| match f {
            DiffFinding::PolicyBehavior(d) => Some((d.neighbor, d.direction)),
            _ => None,
        })
        .collect();
    let space = oracle_space();
    for n in &a.bgp_neighbors {
        for dir in [Direction::Import, Direction::Export] {
            let witness = space.iter().find(|ann| {
                (dir == Direction::Export || ann.origin_protocol == Protocol::Bgp)
                    && session_effect(a, n.peer_address, dir, ann) != session_effect(b, n.peer_address, dir, ann)
            });
            if let Some(w) = witness {
                if !reported.contains(&(n.peer_address, dir)) {
                    return Err(format!("missed difference at {} {dir} on {w}", n.peer_address));
                }
            }
        }
    }
    Ok(())
}
