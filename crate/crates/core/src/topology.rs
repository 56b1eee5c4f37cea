//! Network model, star generator, prompt describer, per-router verifier and
//! snapshot composer.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontends::{prepend_preamble, Vendor};
use crate::ir::{CommunityValue, Interface, Ipv4Prefix, RouterConfig};
use crate::policy::{Direction, Expectation, PolicyAssertion, PrefixRange, RouteConstraint};

/// Network attached to the hub on behalf of the customer.
pub const CUSTOMER_NETWORK: Ipv4Prefix = Ipv4Prefix::from_octets([100, 0, 0, 0], 24);

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("a star needs at least 2 routers, got {0}")]
    TooSmall(usize),
    #[error("star with {0} routers exceeds the addressing scheme")]
    TooLarge(usize),
    #[error("unknown router '{0}'")]
    UnknownRouter(String),
    #[error("invalid topology: {0}")]
    Invalid(String),
    #[error("topology is not a star: {0}")]
    NotStar(String),
    #[error("no configuration for router '{0}'")]
    MissingConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("topology JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Hub,
    Isp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterSpec {
    pub name: String,
    pub asn: u32,
    pub router_id: Ipv4Addr,
    pub role: Role,
    pub interfaces: Vec<Interface>,
    #[serde(default)]
    pub attached_networks: Vec<Ipv4Prefix>,
}

impl RouterSpec {
    pub fn interface(&self, name: &str) -> Option<&Interface> {
        self.interfaces.iter().find(|i| i.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Endpoint {
    pub router: String,
    pub interface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub a: Endpoint,
    pub b: Endpoint,
}

/// An expected eBGP session, seen from one side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpectedNeighbor {
    pub peer_address: Ipv4Addr,
    pub remote_as: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub routers: Vec<RouterSpec>,
    pub links: Vec<Link>,
}

impl Topology {
    pub fn router(&self, name: &str) -> Result<&RouterSpec, TopologyError> {
        self.routers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| TopologyError::UnknownRouter(name.to_string()))
    }

    pub fn hub(&self) -> Result<&RouterSpec, TopologyError> {
        let mut hubs = self.routers.iter().filter(|r| r.role == Role::Hub);
        match (hubs.next(), hubs.next()) {
            (Some(h), None) => Ok(h),
            _ => Err(TopologyError::NotStar("exactly one hub required".into())),
        }
    }

    fn endpoint_iface(&self, e: &Endpoint) -> Result<&Interface, TopologyError> {
        let r = self.router(&e.router)?;
        r.interface(&e.interface)
            .ok_or_else(|| TopologyError::Invalid(format!("{} has no interface {}", e.router, e.interface)))
    }

    /// Checks names, link endpoints and shared subnets.
    pub fn validate(&self) -> Result<(), TopologyError> {
        let mut names = BTreeSet::new();
        for r in &self.routers {
            if !names.insert(r.name.as_str()) {
                return Err(TopologyError::Invalid(format!("duplicate router {}", r.name)));
            }
        }
        for l in &self.links {
            let a = self.endpoint_iface(&l.a)?;
            let b = self.endpoint_iface(&l.b)?;
            if a.subnet() != b.subnet() {
                return Err(TopologyError::Invalid(format!(
                    "{} {} and {} {} are not on one subnet",
                    l.a.router, l.a.interface, l.b.router, l.b.interface
                )));
            }
        }
        Ok(())
    }

    /// Star shape: one hub, and every link joins the hub to an ISP.
    pub fn validate_star(&self) -> Result<&RouterSpec, TopologyError> {
        self.validate()?;
        let hub = self.hub()?;
        for l in &self.links {
            let isp = match (l.a.router == hub.name, l.b.router == hub.name) {
                (true, false) => &l.b.router,
                (false, true) => &l.a.router,
                _ => return Err(TopologyError::NotStar(format!("link {} - {}", l.a.router, l.b.router))),
            };
            if self.router(isp)?.role != Role::Isp {
                return Err(TopologyError::NotStar(format!("{isp} is not an ISP")));
            }
        }
        Ok(hub)
    }

    /// Links touching `router`, as (local end, remote end).
    pub fn links_of<'a>(&'a self, router: &'a str) -> impl Iterator<Item = (&'a Endpoint, &'a Endpoint)> + 'a {
        self.links.iter().filter_map(move |l| {
            if l.a.router == router {
                Some((&l.a, &l.b))
            } else if l.b.router == router {
                Some((&l.b, &l.a))
            } else {
                None
            }
        })
    }

    /// eBGP sessions `router` must declare: one per link, to the far address.
    pub fn expected_neighbors(&self, router: &str) -> Result<Vec<ExpectedNeighbor>, TopologyError> {
        let mut out = Vec::new();
        for (_, far) in self.links_of(router) {
            let iface = self.endpoint_iface(far)?;
            out.push(ExpectedNeighbor {
                peer_address: iface.address,
                remote_as: self.router(&far.router)?.asn,
            });
        }
        Ok(out)
    }

    /// Networks `router` must announce: its link subnets, then attached networks.
    pub fn expected_networks(&self, router: &str) -> Result<Vec<Ipv4Prefix>, TopologyError> {
        let spec = self.router(router)?;
        let mut out = Vec::new();
        for (near, _) in self.links_of(router) {
            let subnet = self.endpoint_iface(near)?.subnet();
            if !out.contains(&subnet) {
                out.push(subnet);
            }
        }
        for n in &spec.attached_networks {
            if !out.contains(n) {
                out.push(*n);
            }
        }
        Ok(out)
    }

    /// Owner of an attached network.
    pub fn owner_of(&self, prefix: &Ipv4Prefix) -> Option<&RouterSpec> {
        self.routers.iter().find(|r| r.attached_networks.contains(prefix))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topology always serializes")
    }

    pub fn from_json(text: &str) -> Result<Topology, TopologyError> {
        let t: Topology = serde_json::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Topology, TopologyError> {
        let text = fs::read_to_string(path).map_err(|source| TopologyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Topology::from_json(&text)
    }
}

fn octets(a: u8, b: u8, c: u8, d: u8) -> Ipv4Addr {
    Ipv4Addr::new(a, b, c, d)
}

/// Star with hub R1 and ISPs R2..Rn. Link j uses j.0.0.0/24 (hub .1, ISP .2);
/// ISP R(j+1) owns the stub (n-1+j).0.0.0/24; the hub owns the customer network.
pub fn generate_star(n: usize) -> Result<Topology, TopologyError> {
    if n < 2 {
        return Err(TopologyError::TooSmall(n));
    }
    // Stub octets run up to 2n-2 and must stay clear of the customer octet.
    if 2 * n - 2 >= usize::from(CUSTOMER_NETWORK.addr().octets()[0]) {
        return Err(TopologyError::TooLarge(n));
    }
    let mut hub = RouterSpec {
        name: "R1".into(),
        asn: 1,
        router_id: octets(1, 0, 0, 1),
        role: Role::Hub,
        interfaces: Vec::new(),
        attached_networks: vec![CUSTOMER_NETWORK],
    };
    let mut isps = Vec::new();
    let mut links = Vec::new();
    for j in 1..n {
        let o = j as u8;
        let hub_if = format!("eth0/{}", j - 1);
        hub.interfaces
            .push(Interface::new(hub_if.clone(), octets(o, 0, 0, 1), 24));
        let name = format!("R{}", j + 1);
        isps.push(RouterSpec {
            name: name.clone(),
            asn: j as u32 + 1,
            router_id: octets(o, 0, 0, 2),
            role: Role::Isp,
            interfaces: vec![Interface::new("eth0/0", octets(o, 0, 0, 2), 24)],
            attached_networks: vec![Ipv4Prefix::new(octets((n - 1 + j) as u8, 0, 0, 0), 24)],
        });
        links.push(Link {
            a: Endpoint {
                router: "R1".into(),
                interface: hub_if,
            },
            b: Endpoint {
                router: name,
                interface: "eth0/0".into(),
            },
        });
    }
    let mut routers = vec![hub];
    routers.extend(isps);
    Ok(Topology { routers, links })
}

/// English description of the network for a model prompt.
pub fn describe_topology(t: &Topology) -> String {
    let mut out = String::new();
    let names: Vec<&str> = t.routers.iter().map(|r| r.name.as_str()).collect();
    out.push_str(&format!(
        "The network has {} routers: {}.\n",
        names.len(),
        names.join(", ")
    ));
    for r in &t.routers {
        let role = match r.role {
            Role::Hub => "the hub router, which connects the CUSTOMER to every ISP",
            Role::Isp => "an ISP router",
        };
        out.push_str(&format!(
            "{} is {role}. It has AS number {} and router ID {}.\n",
            r.name, r.asn, r.router_id
        ));
    }
    for l in &t.links {
        let ia = t.endpoint_iface(&l.a).ok();
        let ib = t.endpoint_iface(&l.b).ok();
        let addr = |i: Option<&Interface>| {
            i.map(|i| format!("{}/{}", i.address, i.mask_length))
                .unwrap_or_default()
        };
        out.push_str(&format!(
            "{} is connected to {} via interface {} at {} ({}) and {} at {} ({}).\n",
            l.a.router,
            l.b.router,
            l.a.interface,
            l.a.router,
            addr(ia),
            l.b.interface,
            l.b.router,
            addr(ib)
        ));
    }
    for r in &t.routers {
        for n in &r.attached_networks {
            let label = if r.role == Role::Hub {
                " (the CUSTOMER network)"
            } else {
                ""
            };
            out.push_str(&format!("Network {n}{label} is attached to {}.\n", r.name));
        }
    }
    out.push_str("Every router runs eBGP with each directly connected router and announces its link subnets and attached networks.\n");
    out
}

/// Local obligations for one router.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalPolicySpec {
    pub router: String,
    /// Community to add to every route received from each neighbor.
    pub ingress_tags: BTreeMap<Ipv4Addr, CommunityValue>,
    /// Communities any one of which must cause denial toward each neighbor.
    pub egress_denies: BTreeMap<Ipv4Addr, BTreeSet<CommunityValue>>,
    pub assertions: Vec<PolicyAssertion>,
}

impl LocalPolicySpec {
    fn empty(router: &str) -> Self {
        LocalPolicySpec {
            router: router.to_string(),
            ingress_tags: BTreeMap::new(),
            egress_denies: BTreeMap::new(),
            assertions: Vec::new(),
        }
    }

    /// The spec as instructions for a model prompt.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (peer, tag) in &self.ingress_tags {
            out.push_str(&format!(
                "On {}, add the community {tag} to every route received from the neighbor {peer}.\n",
                self.router
            ));
        }
        for (peer, denies) in &self.egress_denies {
            if denies.is_empty() {
                continue;
            }
            let list: Vec<String> = denies.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!(
                "On {}, deny every route sent to the neighbor {peer} that has any one of the communities {}.\n",
                self.router,
                list.join(", ")
            ));
        }
        for a in &self.assertions {
            if a.expect == Expectation::Permit && a.direction == Direction::Export {
                if let Some(r) = &a.constraint.prefix_range {
                    out.push_str(&format!(
                        "On {}, the network {} must be announced to the neighbor {}.\n",
                        self.router, r.prefix, a.neighbor
                    ));
                }
            }
        }
        if out.is_empty() {
            out.push_str(&format!("{} has no local filtering policy.\n", self.router));
        }
        out
    }
}

/// Community the hub attaches to routes learned over link `j` (1-based).
pub fn isp_tag(j: usize) -> CommunityValue {
    CommunityValue::new(99 + j as u16, 1)
}

/// Per-router local policies that together give no-transit on a star.
pub fn local_policy_specs(t: &Topology) -> Result<BTreeMap<String, LocalPolicySpec>, TopologyError> {
    let hub = t.validate_star()?;
    let mut specs: BTreeMap<String, LocalPolicySpec> = t
        .routers
        .iter()
        .map(|r| (r.name.clone(), LocalPolicySpec::empty(&r.name)))
        .collect();

    // ISP peers of the hub in link order, with their tags.
    let mut peers: Vec<(Ipv4Addr, CommunityValue, &RouterSpec)> = Vec::new();
    for (j, (_, far)) in t.links_of(&hub.name).enumerate() {
        let addr = t.endpoint_iface(far)?.address;
        peers.push((addr, isp_tag(j + 1), t.router(&far.router)?));
    }
    let all_tags: BTreeSet<CommunityValue> = peers.iter().map(|(_, c, _)| *c).collect();

    let hub_spec = specs.get_mut(&hub.name).expect("hub listed");
    for (addr, tag, _) in &peers {
        hub_spec.ingress_tags.insert(*addr, *tag);
        hub_spec.assertions.push(PolicyAssertion {
            neighbor: *addr,
            direction: Direction::Import,
            constraint: RouteConstraint::default(),
            expect: Expectation::Tag(*tag),
        });
    }
    for (addr, tag, _) in &peers {
        let denies: BTreeSet<CommunityValue> = all_tags.iter().filter(|c| *c != tag).copied().collect();
        for c in &denies {
            hub_spec.assertions.push(PolicyAssertion {
                neighbor: *addr,
                direction: Direction::Export,
                constraint: RouteConstraint::has_community(*c),
                expect: Expectation::Deny,
            });
        }
        for n in &hub.attached_networks {
            hub_spec.assertions.push(PolicyAssertion {
                neighbor: *addr,
                direction: Direction::Export,
                constraint: RouteConstraint {
                    prefix_range: Some(PrefixRange::exact(*n)),
                    must_not_have: all_tags.clone(),
                    ..Default::default()
                },
                expect: Expectation::Permit,
            });
        }
        hub_spec.egress_denies.insert(*addr, denies);
    }

    for (_, _, isp) in &peers {
        let hub_addr = t
            .expected_neighbors(&isp.name)?
            .into_iter()
            .find(|n| n.remote_as == hub.asn)
            .map(|n| n.peer_address)
            .ok_or_else(|| TopologyError::NotStar(format!("{} has no session to the hub", isp.name)))?;
        let spec = specs.get_mut(&isp.name).expect("isp listed");
        for n in &isp.attached_networks {
            spec.assertions.push(PolicyAssertion {
                neighbor: hub_addr,
                direction: Direction::Export,
                constraint: RouteConstraint {
                    prefix_range: Some(PrefixRange::exact(*n)),
                    ..Default::default()
                },
                expect: Expectation::Permit,
            });
        }
    }
    Ok(specs)
}

/// Where a config disagrees with the topology it was written for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyFinding {
    InterfaceAddressMismatch {
        interface: String,
        expected: String,
        found: String,
    },
    LocalAsMismatch {
        expected: u32,
        found: u32,
    },
    RouterIdMismatch {
        expected: Ipv4Addr,
        found: Ipv4Addr,
    },
    MissingNeighbor {
        peer_address: Ipv4Addr,
        remote_as: u32,
    },
    MissingNetwork {
        network: Ipv4Prefix,
    },
    ExtraNetwork {
        network: Ipv4Prefix,
        router: String,
    },
    ExtraNeighbor {
        peer_address: Ipv4Addr,
        remote_as: u32,
    },
}

impl fmt::Display for TopologyFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::humanize::humanize_topology(self).text)
    }
}

/// Compares one router's config with the topology. Findings come in the
/// order interface, AS, router ID, missing neighbor, missing network, extra
/// network, extra neighbor.
pub fn verify_topology(
    config: &RouterConfig,
    t: &Topology,
    router: &str,
) -> Result<Vec<TopologyFinding>, TopologyError> {
    let spec = t.router(router)?;
    let mut out = Vec::new();

    for want in &spec.interfaces {
        let got = config.interface(&want.name);
        if got.is_some_and(|g| g.address == want.address && g.mask_length == want.mask_length) {
            continue;
        }
        let (expected, found) = match got {
            Some(g) if g.mask_length != want.mask_length => (
                format!("{}/{}", want.address, want.mask_length),
                format!("{}/{}", g.address, g.mask_length),
            ),
            Some(g) => (want.address.to_string(), g.address.to_string()),
            None => (want.address.to_string(), "no such interface".to_string()),
        };
        out.push(TopologyFinding::InterfaceAddressMismatch {
            interface: want.name.clone(),
            expected,
            found,
        });
    }

    if config.asn != spec.asn {
        out.push(TopologyFinding::LocalAsMismatch {
            expected: spec.asn,
            found: config.asn,
        });
    }
    if config.router_id != spec.router_id {
        out.push(TopologyFinding::RouterIdMismatch {
            expected: spec.router_id,
            found: config.router_id,
        });
    }

    let expected_neighbors: BTreeSet<(Ipv4Addr, u32)> = t
        .expected_neighbors(router)?
        .into_iter()
        .map(|n| (n.peer_address, n.remote_as))
        .collect();
    let declared: BTreeSet<(Ipv4Addr, u32)> = config
        .bgp_neighbors
        .iter()
        .map(|n| (n.peer_address, n.remote_as))
        .collect();
    for &(peer_address, remote_as) in expected_neighbors.difference(&declared) {
        out.push(TopologyFinding::MissingNeighbor {
            peer_address,
            remote_as,
        });
    }

    let expected_networks = t.expected_networks(router)?;
    for n in &expected_networks {
        if !config.bgp_networks.contains(n) {
            out.push(TopologyFinding::MissingNetwork { network: *n });
        }
    }
    let mut extra_seen = BTreeSet::new();
    for n in &config.bgp_networks {
        if !expected_networks.contains(n) && extra_seen.insert(*n) {
            out.push(TopologyFinding::ExtraNetwork {
                network: *n,
                router: router.to_string(),
            });
        }
    }

    for &(peer_address, remote_as) in declared.difference(&expected_neighbors) {
        out.push(TopologyFinding::ExtraNeighbor {
            peer_address,
            remote_as,
        });
    }
    Ok(out)
}

/// Writes `<dir>/configs/<router>.cfg` for every router in `t`, each with the
/// vendor preamble in front. Returns the written paths in router order.
pub fn compose_snapshot(
    configs: &BTreeMap<String, String>,
    t: &Topology,
    vendor: Vendor,
    dir: &Path,
) -> Result<Vec<PathBuf>, TopologyError> {
    for r in &t.routers {
        if !configs.contains_key(&r.name) {
            return Err(TopologyError::MissingConfig(r.name.clone()));
        }
    }
    let config_dir = dir.join("configs");
    fs::create_dir_all(&config_dir).map_err(|source| TopologyError::Io {
        path: config_dir.clone(),
        source,
    })?;
    let mut written = Vec::new();
    for r in &t.routers {
        let path = config_dir.join(format!("{}.cfg", r.name));
        let body = prepend_preamble(&configs[&r.name], vendor, &r.name);
        fs::write(&path, body).map_err(|source| TopologyError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

/// Reads every `<router>.cfg` under `<dir>/configs` for the routers of `t`.
pub fn load_snapshot(t: &Topology, dir: &Path) -> Result<BTreeMap<String, String>, TopologyError> {
    let mut out = BTreeMap::new();
    for r in &t.routers {
        let path = dir.join("configs").join(format!("{}.cfg", r.name));
        let text = fs::read_to_string(&path).map_err(|source| TopologyError::Io { path, source })?;
        out.insert(r.name.clone(), text);
    }
    Ok(out)
}
