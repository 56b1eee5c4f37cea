//! eBGP propagation to a fixpoint and the global no-transit check.

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{Ipv4Prefix, Protocol, RouterConfig};
use crate::policy::{eval_policy, ListEnv, PolicyError, PolicyOutcome, RouteAnnouncement};
use crate::topology::{Role, Topology, TopologyError};

/// Rounds after which propagation is declared non-convergent.
pub const ROUND_LIMIT: usize = 1000;

pub const DEFAULT_LOCAL_PREF: u32 = 100;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no configuration for router '{0}'")]
    MissingConfig(String),
    #[error("propagation did not converge within {0} rounds")]
    NoFixpoint(usize),
    #[error("router {router}: {source}")]
    Policy {
        router: String,
        #[source]
        source: PolicyError,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnedFrom {
    Local,
    Peer(Ipv4Addr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RibEntry {
    pub route: RouteAnnouncement,
    pub from: LearnedFrom,
}

/// Best route per prefix at one router.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rib {
    pub routes: BTreeMap<Ipv4Prefix, RibEntry>,
}

impl Rib {
    pub fn contains(&self, prefix: &Ipv4Prefix) -> bool {
        self.routes.contains_key(prefix)
    }
}

pub type Ribs = BTreeMap<String, Rib>;

/// An established eBGP session, seen from `local`.
#[derive(Debug, Clone)]
struct Session {
    local: String,
    /// Address `local` configured for the peer.
    peer_address: Ipv4Addr,
    remote: String,
    /// Address `remote` configured for `local`.
    back_address: Ipv4Addr,
}

/// Sessions come up only when both ends name each other's interface address
/// and AS.
fn sessions(configs: &BTreeMap<String, &RouterConfig>) -> Vec<Session> {
    let mut owner: BTreeMap<Ipv4Addr, &str> = BTreeMap::new();
    for (name, c) in configs {
        for i in &c.interfaces {
            owner.entry(i.address).or_insert(name.as_str());
        }
    }
    let mut out = Vec::new();
    for (name, c) in configs {
        for n in &c.bgp_neighbors {
            let Some(&remote) = owner.get(&n.peer_address) else {
                continue;
            };
            let rc = configs[remote];
            if remote == name || rc.asn != n.remote_as {
                continue;
            }
            let back = rc
                .bgp_neighbors
                .iter()
                .find(|m| m.remote_as == c.asn && owner.get(&m.peer_address) == Some(&name.as_str()));
            if let Some(back) = back {
                out.push(Session {
                    local: name.clone(),
                    peer_address: n.peer_address,
                    remote: remote.to_string(),
                    back_address: back.peer_address,
                });
            }
        }
    }
    out
}

/// Runs a named policy. An attachment naming an undefined policy denies
/// everything; no attachment permits everything.
fn run_policy(
    config: &RouterConfig,
    env: &ListEnv,
    name: Option<&String>,
    ann: RouteAnnouncement,
) -> Result<Option<RouteAnnouncement>, SimError> {
    let Some(name) = name else {
        return Ok(Some(ann));
    };
    let Some(policy) = config.policies.get(name) else {
        return Ok(None);
    };
    match eval_policy(policy, env, &ann).map_err(|source| SimError::Policy {
        router: config.name.clone(),
        source,
    })? {
        PolicyOutcome::Accepted { route, .. } => Ok(Some(route)),
        PolicyOutcome::Denied { .. } => Ok(None),
    }
}

fn originate(config: &RouterConfig, env: &ListEnv) -> Result<BTreeMap<Ipv4Prefix, RouteAnnouncement>, SimError> {
    let mut out = BTreeMap::new();
    for n in &config.bgp_networks {
        out.insert(*n, RouteAnnouncement::new(*n, Protocol::Connected));
    }
    for r in config
        .redistributions
        .iter()
        .filter(|r| r.protocol == Protocol::Connected)
    {
        for i in &config.interfaces {
            let subnet = i.subnet();
            if out.contains_key(&subnet) {
                continue;
            }
            if let Some(route) = run_policy(
                config,
                env,
                r.policy.as_ref(),
                RouteAnnouncement::new(subnet, Protocol::Connected),
            )? {
                out.insert(subnet, route);
            }
        }
    }
    Ok(out)
}

fn better(a: &RibEntry, b: &RibEntry) -> bool {
    let key = |e: &RibEntry| {
        (
            e.from != LearnedFrom::Local,
            std::cmp::Reverse(e.route.local_pref.unwrap_or(DEFAULT_LOCAL_PREF)),
            e.route.as_path.len(),
            e.from,
        )
    };
    key(a) < key(b)
}

/// Propagates routes over every established session until no Adj-RIB-In
/// changes. Routers of `t` without a config are an error.
pub fn simulate(t: &Topology, configs: &BTreeMap<String, RouterConfig>) -> Result<Ribs, SimError> {
    let mut used: BTreeMap<String, &RouterConfig> = BTreeMap::new();
    for r in &t.routers {
        let c = configs
            .get(&r.name)
            .ok_or_else(|| SimError::MissingConfig(r.name.clone()))?;
        used.insert(r.name.clone(), c);
    }
    let envs: BTreeMap<&str, ListEnv> = used
        .iter()
        .map(|(n, c)| (n.as_str(), ListEnv::from_config(c)))
        .collect();
    let mut local: BTreeMap<&str, BTreeMap<Ipv4Prefix, RouteAnnouncement>> = BTreeMap::new();
    for (n, c) in &used {
        local.insert(n.as_str(), originate(c, &envs[n.as_str()])?);
    }
    let sessions = sessions(&used);

    let select = |adj: &BTreeMap<String, BTreeMap<(Ipv4Prefix, Ipv4Addr), RouteAnnouncement>>| {
        let mut ribs = Ribs::new();
        for name in used.keys() {
            let mut rib = Rib::default();
            for (p, route) in &local[name.as_str()] {
                rib.routes.insert(
                    *p,
                    RibEntry {
                        route: route.clone(),
                        from: LearnedFrom::Local,
                    },
                );
            }
            for (&(p, from), route) in adj.get(name).into_iter().flatten() {
                let cand = RibEntry {
                    route: route.clone(),
                    from: LearnedFrom::Peer(from),
                };
                match rib.routes.get(&p) {
                    Some(cur) if !better(&cand, cur) => {}
                    _ => {
                        rib.routes.insert(p, cand);
                    }
                }
            }
            ribs.insert(name.clone(), rib);
        }
        ribs
    };

    let mut adj: BTreeMap<String, BTreeMap<(Ipv4Prefix, Ipv4Addr), RouteAnnouncement>> = BTreeMap::new();
    let mut ribs = select(&adj);
    for _ in 0..ROUND_LIMIT {
        let mut next: BTreeMap<String, BTreeMap<(Ipv4Prefix, Ipv4Addr), RouteAnnouncement>> = BTreeMap::new();
        for s in &sessions {
            let sender = used[&s.local];
            let receiver = used[&s.remote];
            let s_neighbor = sender
                .neighbor(s.peer_address)
                .expect("session built from this neighbor");
            let r_neighbor = receiver
                .neighbor(s.back_address)
                .expect("session built from this neighbor");
            for (p, entry) in &ribs[&s.local].routes {
                if entry.from == LearnedFrom::Peer(s.peer_address) {
                    continue;
                }
                let Some(mut route) = run_policy(
                    sender,
                    &envs[s.local.as_str()],
                    s_neighbor.export_policy.as_ref(),
                    entry.route.clone(),
                )?
                else {
                    continue;
                };
                route.as_path.insert(0, sender.asn);
                route.local_pref = None;
                route.origin_protocol = Protocol::Bgp;
                if route.as_path.contains(&receiver.asn) {
                    continue;
                }
                let Some(route) = run_policy(
                    receiver,
                    &envs[s.remote.as_str()],
                    r_neighbor.import_policy.as_ref(),
                    route,
                )?
                else {
                    continue;
                };
                next.entry(s.remote.clone())
                    .or_default()
                    .insert((*p, s.back_address), route);
            }
        }
        if next == adj {
            return Ok(ribs);
        }
        adj = next;
        ribs = select(&adj);
    }
    Err(SimError::NoFixpoint(ROUND_LIMIT))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GlobalViolation {
    IspReachesIsp {
        at: String,
        prefix: Ipv4Prefix,
        owner: String,
    },
    CustomerUnreachable {
        from: String,
    },
    IspUnreachableFromCustomer {
        isp: String,
    },
}

impl fmt::Display for GlobalViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GlobalViolation::IspReachesIsp { at, prefix, owner } => {
                write!(f, "{at} can reach {prefix}, the network of ISP router {owner}")
            }
            GlobalViolation::CustomerUnreachable { from } => write!(f, "{from} cannot reach the customer network"),
            GlobalViolation::IspUnreachableFromCustomer { isp } => {
                write!(f, "the customer cannot reach the network of {isp}")
            }
        }
    }
}

/// ISPs must not learn each other's networks; the customer and every ISP must
/// learn each other's.
pub fn check_no_transit(ribs: &Ribs, t: &Topology) -> Result<Vec<GlobalViolation>, SimError> {
    let hub = t.validate_star()?;
    let empty = Rib::default();
    let rib_of = |name: &str| ribs.get(name).unwrap_or(&empty);
    let isps: Vec<_> = t.routers.iter().filter(|r| r.role == Role::Isp).collect();
    let mut out = Vec::new();
    for isp in &isps {
        let rib = rib_of(&isp.name);
        for other in isps.iter().filter(|o| o.name != isp.name) {
            for p in &other.attached_networks {
                if rib.contains(p) {
                    out.push(GlobalViolation::IspReachesIsp {
                        at: isp.name.clone(),
                        prefix: *p,
                        owner: other.name.clone(),
                    });
                }
            }
        }
        if !hub.attached_networks.iter().all(|p| rib.contains(p)) {
            out.push(GlobalViolation::CustomerUnreachable { from: isp.name.clone() });
        }
    }
    let hub_rib = rib_of(&hub.name);
    for isp in &isps {
        if !isp.attached_networks.iter().all(|p| hub_rib.contains(p)) {
            out.push(GlobalViolation::IspUnreachableFromCustomer { isp: isp.name.clone() });
        }
    }
    Ok(out)
}

/// Plain-text RIB dump, one route per line.
pub fn render_ribs(ribs: &Ribs) -> String {
    let mut out = String::new();
    for (router, rib) in ribs {
        out.push_str(&format!("{router}:\n"));
        for (p, e) in &rib.routes {
            let from = match e.from {
                LearnedFrom::Local => "local".to_string(),
                LearnedFrom::Peer(a) => format!("via {a}"),
            };
            let path: Vec<String> = e.route.as_path.iter().map(|a| a.to_string()).collect();
            out.push_str(&format!("  {p} {from} as-path [{}]\n", path.join(" ")));
        }
    }
    out
}
