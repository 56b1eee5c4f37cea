use std::collections::BTreeMap;

use cosynth::frontends::{parse_cisco, prepend_preamble, Vendor};
use cosynth::ir::RouterConfig;
use cosynth::orchestrator::synthesis_findings;
use cosynth::sim::{check_no_transit, simulate, GlobalViolation};
use cosynth::topology::{generate_star, local_policy_specs};

fn reference(name: &str) -> String {
    std::fs::read_to_string(format!("{}/fixtures/star6/{name}.cfg", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn parsed(name: &str, text: &str) -> RouterConfig {
    let p = parse_cisco(&prepend_preamble(text, Vendor::Cisco, name));
    assert!(p.diagnostics.is_empty(), "{name}: {:?}", p.diagnostics);
    p.config
}

#[test]
fn reference_configs_pass_every_local_check() {
    let t = generate_star(6).unwrap();
    let specs = local_policy_specs(&t).unwrap();
    for r in &t.routers {
        let findings = synthesis_findings(&reference(&r.name), &t, &r.name, &specs[&r.name]).unwrap();
        assert!(findings.is_empty(), "{}: {:?}", r.name, findings);
    }
}

#[test]
fn reference_configs_enforce_no_transit() {
    let t = generate_star(6).unwrap();
    let configs: BTreeMap<String, RouterConfig> = t
        .routers
        .iter()
        .map(|r| (r.name.clone(), parsed(&r.name, &reference(&r.name))))
        .collect();
    let ribs = simulate(&t, &configs).unwrap();
    assert_eq!(check_no_transit(&ribs, &t).unwrap(), vec![]);
}

#[test]
fn dropping_one_export_filter_leaks_transit_routes() {
    let t = generate_star(6).unwrap();
    let mut configs: BTreeMap<String, RouterConfig> = t
        .routers
        .iter()
        .map(|r| (r.name.clone(), parsed(&r.name, &reference(&r.name))))
        .collect();
    let hub = configs.get_mut("R1").unwrap();
    for n in &mut hub.bgp_neighbors {
        if n.export_policy.as_deref() == Some("FILTER_COMM_OUT_R2") {
            n.export_policy = None;
        }
    }
    let violations = check_no_transit(&simulate(&t, &configs).unwrap(), &t).unwrap();
    assert!(!violations.is_empty());
    assert!(violations
        .iter()
        .all(|v| matches!(v, GlobalViolation::IspReachesIsp { at, .. } if at == "R2")));
}
