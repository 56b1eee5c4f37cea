//! Generators for valid IRs and small route policies.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use cosynth::frontends::Vendor;
use cosynth::ir::{
    Action, BgpNeighbor, CommunityValue, Interface, Ipv4Prefix, MatchCond, OspfLink, PolicyClause, PrefixListEntry,
    Protocol, Redistribution, RoutePolicy, RouterConfig, SetAction,
};
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use proptest::sample::subsequence;

pub fn action() -> impl Strategy<Value = Action> {
    prop_oneof![Just(Action::Permit), Just(Action::Deny)]
}

pub fn community() -> impl Strategy<Value = CommunityValue> {
    (1u16..200, 1u16..5).prop_map(|(high, low)| CommunityValue { high, low })
}

pub fn prefix() -> impl Strategy<Value = Ipv4Prefix> {
    (any::<u32>(), 8u8..=30).prop_map(|(a, len)| Ipv4Prefix::new(Ipv4Addr::from(a), len))
}

/// Entry whose explicit bounds are consistent with the prefix length.
pub fn prefix_entry() -> impl Strategy<Value = PrefixListEntry> {
    (prefix(), action(), 0u8..4, any::<u8>(), any::<u8>()).prop_map(|(p, act, shape, x, y)| {
        let len = p.len();
        let ge = len + x % (33 - len);
        let le = ge + y % (33 - ge);
        let e = PrefixListEntry::new(0, act, p);
        match shape {
            0 => e,
            1 => e.ge(ge),
            2 => e.le(le.max(len)),
            _ => e.ge(ge).le(le),
        }
    })
}

fn numbered(mut entries: Vec<PrefixListEntry>) -> Vec<PrefixListEntry> {
    for (i, e) in entries.iter_mut().enumerate() {
        e.seq = (i as u32 + 1) * 5;
    }
    entries
}

pub fn set_action() -> impl Strategy<Value = SetAction> {
    prop_oneof![
        (0u32..500).prop_map(SetAction::Med),
        (1u32..300).prop_map(SetAction::LocalPref),
        (btree_set(community(), 1..3), any::<bool>())
            .prop_map(|(values, additive)| SetAction::Community { values, additive }),
    ]
}

/// A clause drawing its matches from the given list names.
fn clause(prefix_lists: Vec<String>, community_lists: Vec<String>) -> impl Strategy<Value = PolicyClause> {
    let mut pool: Vec<MatchCond> = prefix_lists.into_iter().map(MatchCond::PrefixList).collect();
    pool.extend(community_lists.into_iter().map(MatchCond::CommunityList));
    pool.extend([Protocol::Bgp, Protocol::Connected].map(MatchCond::Protocol));
    let n = pool.len();
    (action(), subsequence(pool, 0..=n.min(3)), vec(set_action(), 0..3)).prop_map(|(act, matches, sets)| {
        let mut c = PolicyClause::new(0, act);
        c.matches = matches;
        // One set of each kind per clause; a later one would shadow the earlier.
        let mut seen = std::collections::HashSet::new();
        c.sets = sets
            .into_iter()
            .filter(|s| seen.insert(std::mem::discriminant(s)))
            .collect();
        c
    })
}

pub fn policy(
    name: String,
    prefix_lists: Vec<String>,
    community_lists: Vec<String>,
) -> impl Strategy<Value = RoutePolicy> {
    (vec(clause(prefix_lists, community_lists), 1..4), action()).prop_map(move |(clauses, default_action)| {
        let mut p = RoutePolicy::new(name.clone());
        p.default_action = default_action;
        for (i, mut c) in clauses.into_iter().enumerate() {
            c.seq = (i as u32 + 1) * 10;
            p.clauses.push(c);
        }
        p
    })
}

fn interface_name(vendor: Vendor, i: usize) -> String {
    match (vendor, i) {
        (Vendor::Cisco, 0) => "Loopback0".into(),
        (Vendor::Cisco, i) => format!("GigabitEthernet0/{}", i - 1),
        (Vendor::Juniper, 0) => "lo0.0".into(),
        (Vendor::Juniper, i) => format!("ge-0/0/{}.0", i - 1),
    }
}

/// A config that validates and that the vendor's subset can express.
pub fn router_config(vendor: Vendor) -> impl Strategy<Value = RouterConfig> {
    let lists = (
        vec(vec(prefix_entry(), 1..4), 0..3),
        vec(btree_set(community(), 1..4), 0..3),
    );
    lists
        .prop_flat_map(move |(pls, cls)| {
            let pl_names: Vec<String> = (0..pls.len()).map(|i| format!("pl{i}")).collect();
            let cl_names: Vec<String> = (0..cls.len()).map(|i| format!("cl{i}")).collect();
            let policies = vec(Just(()), 0..3).prop_flat_map({
                let (pl, cl) = (pl_names.clone(), cl_names.clone());
                move |slots| {
                    slots
                        .iter()
                        .enumerate()
                        .map(|(i, _)| policy(format!("policy{i}"), pl.clone(), cl.clone()))
                        .collect::<Vec<_>>()
                }
            });
            (Just(pls), Just(cls), policies)
        })
        .prop_flat_map(move |(pls, cls, policies)| {
            let policy_names: Vec<Option<String>> = std::iter::once(None)
                .chain(policies.iter().map(|p| Some(p.name.clone())))
                .collect();
            let pick = proptest::sample::select(policy_names);
            let neighbor = (any::<u32>(), 1u32..65000, pick.clone(), pick.clone());
            let ospf = vec((1u32..100, any::<bool>(), any::<bool>()), 1..4);
            let redist = vec((any::<bool>(), pick), 3);
            (
                "[a-z][a-z0-9]{0,6}",
                1u32..65000,
                any::<u32>(),
                vec((any::<u32>(), 8u8..=32), 1..4),
                vec(neighbor, 0..3),
                vec(prefix(), 0..3),
                redist,
                ospf,
                Just((pls, cls, policies)),
            )
        })
        .prop_map(
            move |(name, asn, rid, ifaces, neighbors, networks, redist, ospf, (pls, cls, policies))| {
                let mut c = RouterConfig::new(name, asn, Ipv4Addr::from(rid));
                for (i, (addr, len)) in ifaces.iter().enumerate() {
                    c.interfaces
                        .push(Interface::new(interface_name(vendor, i), Ipv4Addr::from(*addr), *len));
                }
                let mut peers = BTreeSet::new();
                for (addr, remote_as, import, export) in neighbors {
                    if peers.insert(addr) {
                        c.bgp_neighbors.push(BgpNeighbor {
                            peer_address: Ipv4Addr::from(addr),
                            remote_as,
                            local_as: asn,
                            import_policy: import,
                            export_policy: export,
                        });
                    }
                }
                for (i, (cost, passive, on)) in ospf.into_iter().enumerate() {
                    if on && i < c.interfaces.len() {
                        c.ospf.push(OspfLink {
                            interface_name: c.interfaces[i].name.clone(),
                            cost,
                            passive,
                        });
                    }
                }
                let protocols = [Protocol::Connected, Protocol::Static, Protocol::Ospf];
                match vendor {
                    Vendor::Cisco => {
                        c.bgp_networks = networks;
                        for (p, (on, policy)) in protocols.into_iter().zip(redist) {
                            if on {
                                c.redistributions.push(Redistribution { protocol: p, policy });
                            }
                        }
                    }
                    Vendor::Juniper => {
                        c.redistributions = protocols
                            .map(|protocol| Redistribution { protocol, policy: None })
                            .to_vec();
                    }
                }
                c.prefix_lists = pls
                    .into_iter()
                    .enumerate()
                    .map(|(i, e)| (format!("pl{i}"), numbered(e)))
                    .collect();
                c.community_lists = cls
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| (format!("cl{i}"), v.into_iter().collect()))
                    .collect::<BTreeMap<_, _>>();
                c.policies = policies.into_iter().map(|p| (p.name.clone(), p)).collect();
                c
            },
        )
}

/// Entry inside 10.0.0.0/8 whose range stays within lengths 8..=16.
fn oracle_entry() -> impl Strategy<Value = PrefixListEntry> {
    (any::<u8>(), 8u8..=12, action(), 0u8..4, any::<u8>(), any::<u8>()).prop_map(|(b, len, act, shape, x, y)| {
        let p = Ipv4Prefix::new(Ipv4Addr::new(10, b, 0, 0), len);
        let ge = len + x % (17 - len);
        let le = ge + y % (17 - ge);
        let e = PrefixListEntry::new(0, act, p);
        match shape {
            0 => e,
            1 => e.le(le),
            2 => e.ge(ge).le(16),
            _ => e.ge(ge).le(le),
        }
    })
}

pub const ORACLE_COMMUNITIES: [CommunityValue; 3] = [
    CommunityValue { high: 100, low: 1 },
    CommunityValue { high: 101, low: 1 },
    CommunityValue { high: 102, low: 1 },
];

/// A policy named "P" over at most two prefix-list entries inside
/// 10.0.0.0/8 and at most three distinct communities.
pub fn small_policy() -> impl Strategy<Value = RouterConfig> {
    (
        vec(oracle_entry(), 1..=2),
        subsequence(ORACLE_COMMUNITIES.to_vec(), 1..=3),
        subsequence(ORACLE_COMMUNITIES.to_vec(), 1..=2),
    )
        .prop_flat_map(|(entries, cl0, cl1)| {
            (
                Just((entries, cl0, cl1)),
                policy("P".into(), vec!["pl0".into()], vec!["cl0".into(), "cl1".into()]),
            )
        })
        .prop_map(|((entries, cl0, cl1), p)| {
            let mut c = RouterConfig::new("oracle", 1, Ipv4Addr::new(1, 1, 1, 1));
            c.prefix_lists.insert("pl0".into(), numbered(entries));
            c.community_lists.insert("cl0".into(), cl0);
            c.community_lists.insert("cl1".into(), cl1);
            c.policies.insert("P".into(), p);
            c
        })
}

fn with_session(mut c: RouterConfig, originate: (bool, bool)) -> RouterConfig {
    c.interfaces
        .push(Interface::new("GigabitEthernet0/0", Ipv4Addr::new(1, 0, 0, 1), 24));
    c.bgp_neighbors.push(BgpNeighbor {
        peer_address: Ipv4Addr::new(1, 0, 0, 2),
        remote_as: 2,
        local_as: 1,
        import_policy: Some("P".into()),
        export_policy: Some("P".into()),
    });
    if originate.0 {
        c.redistributions.push(Redistribution {
            protocol: Protocol::Connected,
            policy: None,
        });
    }
    if originate.1 {
        c.bgp_networks.push(Ipv4Prefix::new(Ipv4Addr::new(10, 0, 0, 0), 9));
    }
    c
}

/// Two structurally identical one-session configs whose policy "P" and
/// origination may differ.
pub fn session_pair() -> impl Strategy<Value = (RouterConfig, RouterConfig)> {
    (
        small_policy(),
        small_policy(),
        any::<(bool, bool)>(),
        any::<(bool, bool)>(),
        any::<bool>(),
    )
        .prop_map(|(a, b, oa, ob, same)| {
            let b = if same { a.clone() } else { b };
            (with_session(a, oa), with_session(b, ob))
        })
}
