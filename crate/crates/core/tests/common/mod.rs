//! Scripted model and human turns for the two reference workflows, and the
//! fixture paths they are recorded to.
#![allow(dead_code)]

pub mod oracles;
pub mod strategies;

use std::path::PathBuf;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap()
}

fn junos_reply(cfg: &str) -> String {
    format!("Here is the translated configuration.\n\n```\n{cfg}```\n")
}

fn cisco_reply(router: &str, cfg: &str) -> String {
    format!("{router}.cfg:\n```\n{cfg}```\n")
}

const JUNOS_FRAGMENT: &str = "Add the local AS to the provider group:\n\n```\nprotocols {\n    bgp {\n        group provider {\n            local-as 65001;\n        }\n    }\n}\n```\n";

pub const TRANSLATION_HUMAN_FIX: &str = "In to_provider and to_customer, the term that matches our-networks with orlonger must also require from protocol bgp; without it, connected subnets of 1.2.3.0/24 are exported.";

pub const SYNTHESIS_HUMAN_FIX: &str = "In FILTER_COMM_OUT_R2, several match community lines in one stanza must all hold at once. Use one deny stanza per community list instead, followed by a final permit stanza.";

/// Model replies for the translation run, in order, and the prompts the
/// human gives when the loop punts.
pub fn translation_script() -> (Vec<String>, Vec<String>) {
    let fault = |name: &str| junos_reply(&read(&format!("translation/faults/{name}.junos")));
    let correct = read("translation/correct.junos");
    let unbalanced = junos_reply(correct.trim_end().strip_suffix('}').unwrap());
    let mut replies = vec![
        fault("local_as"),
        JUNOS_FRAGMENT.to_string(),
        fault("missing_policy"),
        fault("ospf_cost"),
        fault("ospf_passive"),
        fault("med"),
        fault("prefix_length"),
        fault("prefix_list_syntax"),
        fault("prefix_list_syntax"),
    ];
    replies.extend(std::iter::repeat_n(fault("redistribution"), 6));
    replies.extend([
        fault("local_as"),
        JUNOS_FRAGMENT.to_string(),
        fault("ospf_passive"),
        fault("med"),
        fault("ospf_cost"),
        unbalanced,
        junos_reply(&correct),
    ]);
    (replies, vec![TRANSLATION_HUMAN_FIX.to_string()])
}

/// R1 with the single FILTER_COMM_OUT_R2 stanza that ANDs every match.
pub fn hub_with_and_filter() -> String {
    let r1 = read("star6/R1.cfg");
    let start = r1.find("route-map FILTER_COMM_OUT_R2 deny 10").unwrap();
    let end = start + r1[start..].find("!\n").unwrap();
    let listing = read("filter_comm_out_r2.cfg");
    let and_block = &listing[listing.find("route-map").unwrap()..];
    format!("{}{}{}", &r1[..start], and_block, &r1[end..])
}

/// Model replies for the six-router synthesis run, in order, and the human
/// prompts.
pub fn synthesis_script() -> (Vec<String>, Vec<String>) {
    let r1 = read("star6/R1.cfg");
    let r2 = read("star6/R2.cfg");
    let bad_list = r1.replace(
        "ip community-list 1 permit 100:1\n",
        "ip community-list standard COMM_LIST_R2_OUT permit .+\nip community-list 1 permit 100:1\n",
    );
    let bad_address = r1.replace(" ip address 2.0.0.1 ", " ip address 2.0.0.2 ");
    let bad_as = r1.replace("router bgp 1\n", "router bgp 3\n");
    let extra_network = r1.replace(
        " network 100.0.0.0 mask 255.255.255.0\n",
        " network 100.0.0.0 mask 255.255.255.0\n network 7.0.0.0 mask 255.255.255.0\n",
    );
    let and_filter = hub_with_and_filter();
    let mut replies = vec![
        cisco_reply("R1", &bad_list),
        cisco_reply("R1", &bad_address),
        cisco_reply("R1", &bad_as),
        cisco_reply("R1", &extra_network),
    ];
    replies.extend(std::iter::repeat_n(cisco_reply("R1", &and_filter), 6));
    replies.push(cisco_reply("R1", &r1));
    replies.extend([
        cisco_reply("R2", &r2.replace("bgp router-id 1.0.0.2", "bgp router-id 1.0.0.1")),
        cisco_reply("R2", &r2.replace(" neighbor 1.0.0.1 remote-as 1\n", "")),
        cisco_reply("R2", &r2.replace(" network 1.0.0.0 mask 255.255.255.0\n", "")),
        cisco_reply("R2", &r2),
    ]);
    for r in ["R3", "R4", "R5", "R6"] {
        replies.push(cisco_reply(r, &read(&format!("star6/{r}.cfg"))));
    }
    (replies, vec![SYNTHESIS_HUMAN_FIX.to_string()])
}
