//! The correction loop. Each round verifies the latest reply and sends back
//! one humanized finding; a stalled loop is handed to a human.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::{BufRead, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::diff_all;
use crate::finding::Finding;
use crate::frontends::{parse_cisco, parse_juniper, prepend_preamble, ParseResult, SyntaxDiagnostic, Vendor};
use crate::humanize::humanize;
use crate::ir::RouterConfig;
use crate::llm::{
    config_for, extract_configs, iips_for, GatewayError, InstructionPrompt, Message, Origin, Provider, Role, Session,
    Workflow,
};
use crate::policy::{verify_local_policy, PolicyError};
use crate::sim::{check_no_transit, simulate, GlobalViolation, SimError};
use crate::topology::{
    compose_snapshot, describe_topology, local_policy_specs, verify_topology, LocalPolicySpec, Topology, TopologyError,
};

pub const TRANSLATION_TASK: &str = "Convert the following Cisco IOS configuration into a Junos configuration with the same behavior. Reply with the complete configuration in one code block.";

pub const SYNTHESIS_TASK: &str = "Write router configurations for the network described below so that it enforces a no-transit policy: no ISP may reach another ISP through our routers, while the customer and every ISP can reach each other.";

pub const FULL_CONFIG_REQUEST: &str =
    "Reply with the complete configuration in one code block, not only the lines you changed.";

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("source configuration has syntax errors: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    SourceSyntax(Vec<SyntaxDiagnostic>),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Consecutive syntax prompts before punting.
    pub max_syntax_retries: u32,
    /// Consecutive prompts for one unchanged non-syntax finding before punting.
    pub max_semantic_retries: u32,
    /// Automated prompts across the whole workflow.
    pub max_total_automated: u32,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_syntax_retries: 5,
            max_semantic_retries: 5,
            max_total_automated: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PuntReason {
    SyntaxRetries,
    SemanticRetries,
    AutomationBudget,
    GlobalViolation,
}

impl fmt::Display for PuntReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PuntReason::SyntaxRetries => "too many syntax correction attempts",
            PuntReason::SemanticRetries => "the same finding persists after repeated corrections",
            PuntReason::AutomationBudget => "the automated prompt budget is spent",
            PuntReason::GlobalViolation => "the global policy does not hold",
        })
    }
}

/// What the human is shown when the loop gives up.
#[derive(Debug, Clone)]
pub struct PuntContext<'a> {
    pub reason: PuntReason,
    pub router: Option<&'a str>,
    pub findings: &'a [Finding],
    pub latest_config: Option<&'a str>,
}

/// The person the loop falls back to. `None` means give up.
pub trait HumanHook {
    fn intervene(&mut self, ctx: &PuntContext<'_>) -> Option<String>;
}

/// Never intervenes.
pub struct NoHuman;

impl HumanHook for NoHuman {
    fn intervene(&mut self, _ctx: &PuntContext<'_>) -> Option<String> {
        None
    }
}

/// Answers punts with prepared prompts in order.
#[derive(Debug, Clone, Default)]
pub struct ScriptedHuman {
    prompts: VecDeque<String>,
}

impl ScriptedHuman {
    pub fn new(prompts: impl IntoIterator<Item = String>) -> Self {
        ScriptedHuman {
            prompts: prompts.into_iter().collect(),
        }
    }

    /// The recorded human prompts of a transcript, minus the opening task.
    pub fn from_transcript(messages: &[Message]) -> Self {
        Self::new(
            messages
                .iter()
                .filter(|m| m.role == Role::User && m.origin == Origin::Human)
                .skip(1)
                .map(|m| m.text.clone()),
        )
    }
}

impl HumanHook for ScriptedHuman {
    fn intervene(&mut self, _ctx: &PuntContext<'_>) -> Option<String> {
        self.prompts.pop_front()
    }
}

/// Shows the punt on stderr and reads a prompt from stdin; an empty line
/// gives up.
pub struct InteractiveHuman;

impl HumanHook for InteractiveHuman {
    fn intervene(&mut self, ctx: &PuntContext<'_>) -> Option<String> {
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "--- punted: {}", ctx.reason);
        if let Some(r) = ctx.router {
            let _ = writeln!(err, "router: {r}");
        }
        for f in ctx.findings {
            let _ = writeln!(err, "finding: {f}");
        }
        let _ = write!(err, "your prompt (empty line to stop): ");
        let _ = err.flush();
        let mut line = String::new();
        std::io::stdin().lock().read_line(&mut line).ok()?;
        let line = line.trim();
        (!line.is_empty()).then(|| line.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leverage {
    /// Reduced automated/human ratio.
    Ratio {
        automated: u64,
        human: u64,
    },
    Unbounded,
}

impl Leverage {
    pub fn value(&self) -> Option<f64> {
        match self {
            Leverage::Ratio { automated, human } => Some(*automated as f64 / *human as f64),
            Leverage::Unbounded => None,
        }
    }
}

impl fmt::Display for Leverage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Leverage::Ratio { automated, human: 1 } => write!(f, "{automated}"),
            Leverage::Ratio { automated, human } => write!(f, "{automated}/{human}"),
            Leverage::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeverageReport {
    pub automated_count: u64,
    pub human_count: u64,
    pub leverage: Leverage,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Automated prompts over human prompts. Instruction prompts count as
/// neither; the opening task counts as human.
pub fn compute_leverage(messages: &[Message]) -> LeverageReport {
    let count = |o: Origin| {
        messages
            .iter()
            .filter(|m| m.role == Role::User && m.origin == o)
            .count() as u64
    };
    let (automated_count, human_count) = (count(Origin::Automated), count(Origin::Human));
    let leverage = if human_count == 0 {
        Leverage::Unbounded
    } else {
        let g = gcd(automated_count, human_count);
        Leverage::Ratio {
            automated: automated_count / g,
            human: human_count / g,
        }
    };
    LeverageReport {
        automated_count,
        human_count,
        leverage,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Verified,
    PuntedUnresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowOutcome {
    pub status: Status,
    /// Final config text per router (one entry, keyed by hostname, for translation).
    pub artifacts: BTreeMap<String, String>,
    pub transcript: Vec<Message>,
    pub leverage: LeverageReport,
    /// Every finding of every verification round, tagged with the round.
    pub findings_history: Vec<(u32, Finding)>,
    pub violations: Vec<GlobalViolation>,
}

/// Result of checking one model reply.
enum Check {
    /// No usable full config in the reply.
    Partial,
    Checked {
        config: String,
        findings: Vec<Finding>,
    },
}

fn syntax_findings(vendor: Vendor, parsed: &ParseResult) -> Vec<Finding> {
    parsed
        .diagnostics
        .iter()
        .map(|d| Finding::Syntax {
            vendor,
            diagnostic: d.clone(),
        })
        .collect()
}

/// Syntax findings for a Junos translation or, when there are none, its
/// differences from the source.
pub fn translation_findings(source: &RouterConfig, junos: &str) -> Result<Vec<Finding>, PolicyError> {
    let parsed = parse_juniper(junos);
    let syntax = syntax_findings(Vendor::Juniper, &parsed);
    if !syntax.is_empty() {
        return Ok(syntax);
    }
    Ok(diff_all(source, &parsed.config)?
        .into_iter()
        .map(Finding::Diff)
        .collect())
}

/// Stage-ordered findings for one synthesized router: syntax, else topology,
/// else local policy.
pub fn synthesis_findings(
    text: &str,
    t: &Topology,
    router: &str,
    spec: &LocalPolicySpec,
) -> Result<Vec<Finding>, OrchestratorError> {
    let parsed = parse_cisco(&prepend_preamble(text, Vendor::Cisco, router));
    let syntax = syntax_findings(Vendor::Cisco, &parsed);
    if !syntax.is_empty() {
        return Ok(syntax);
    }
    let topo = verify_topology(&parsed.config, t, router)?;
    if !topo.is_empty() {
        return Ok(topo.into_iter().map(Finding::Topology).collect());
    }
    Ok(verify_local_policy(&parsed.config, &spec.assertions)?
        .into_iter()
        .map(Finding::SemanticPolicy)
        .collect())
}

/// State shared by every session of one workflow.
struct Run<'a> {
    provider: &'a mut dyn Provider,
    human: &'a mut dyn HumanHook,
    limits: Limits,
    log: Vec<Message>,
    automated: u32,
    round: u32,
    history: Vec<(u32, Finding)>,
}

enum Drive {
    Verified(String),
    Punted(Option<String>),
}

impl Run<'_> {
    fn send(&mut self, session: &mut Session, text: String, origin: Origin) -> Result<String, OrchestratorError> {
        let before = session.messages.len();
        let reply = session.send(self.provider, text, origin)?;
        self.log.extend(session.messages[before..].iter().cloned());
        if origin == Origin::Automated {
            self.automated += 1;
        }
        Ok(reply.text)
    }

    fn open(&mut self, iips: &[InstructionPrompt], label: Option<String>) -> Session {
        let s = Session::open(self.provider, iips, label);
        self.log.extend(s.messages.iter().cloned());
        s
    }

    /// Checks `reply` and keeps correcting until the checks pass or the
    /// human declines to help.
    fn drive(
        &mut self,
        session: &mut Session,
        router: Option<&str>,
        mut reply: String,
        check: &mut dyn FnMut(&str) -> Result<Check, OrchestratorError>,
    ) -> Result<Drive, OrchestratorError> {
        let mut syntax_streak = 0u32;
        let mut semantic_streak = 0u32;
        let mut last_prompt: Option<String> = None;
        let mut latest: Option<String> = None;
        loop {
            let (prompt, findings, reason) = match check(&reply)? {
                Check::Partial => {
                    if self.automated < self.limits.max_total_automated {
                        reply = self.send(session, FULL_CONFIG_REQUEST.to_string(), Origin::Automated)?;
                        continue;
                    }
                    (None, Vec::new(), Some(PuntReason::AutomationBudget))
                }
                Check::Checked { config, findings } => {
                    latest = Some(config);
                    let Some(first) = findings.first() else {
                        return Ok(Drive::Verified(latest.expect("just set")));
                    };
                    self.round += 1;
                    self.history.extend(findings.iter().map(|f| (self.round, f.clone())));
                    let prompt = humanize(first).text;
                    let mut reason = None;
                    if first.is_syntax() {
                        syntax_streak += 1;
                        if syntax_streak > self.limits.max_syntax_retries {
                            reason = Some(PuntReason::SyntaxRetries);
                        }
                    } else {
                        syntax_streak = 0;
                        semantic_streak = if last_prompt.as_deref() == Some(prompt.as_str()) {
                            semantic_streak + 1
                        } else {
                            1
                        };
                        if semantic_streak > self.limits.max_semantic_retries {
                            reason = Some(PuntReason::SemanticRetries);
                        }
                    }
                    if reason.is_none() && self.automated >= self.limits.max_total_automated {
                        reason = Some(PuntReason::AutomationBudget);
                    }
                    (Some(prompt), findings, reason)
                }
            };
            match reason {
                None => {
                    let prompt = prompt.expect("set whenever no punt is due");
                    last_prompt = Some(prompt.clone());
                    reply = self.send(session, prompt, Origin::Automated)?;
                }
                Some(reason) => {
                    let ctx = PuntContext {
                        reason,
                        router,
                        findings: &findings,
                        latest_config: latest.as_deref(),
                    };
                    let Some(text) = self.human.intervene(&ctx) else {
                        return Ok(Drive::Punted(latest));
                    };
                    syntax_streak = 0;
                    semantic_streak = 0;
                    last_prompt = None;
                    reply = self.send(session, text, Origin::Human)?;
                }
            }
        }
    }

    fn finish(
        self,
        status: Status,
        artifacts: BTreeMap<String, String>,
        violations: Vec<GlobalViolation>,
    ) -> WorkflowOutcome {
        WorkflowOutcome {
            status,
            artifacts,
            leverage: compute_leverage(&self.log),
            transcript: self.log,
            findings_history: self.history,
            violations,
        }
    }
}

/// A reply holds a full config when one can be extracted and it declares at
/// least one interface.
fn full_config(reply: &str, router: Option<&str>, vendor: Vendor) -> Option<String> {
    let configs = extract_configs(reply).ok()?;
    let picked = match router {
        Some(r) => config_for(&configs, r)?,
        None => configs.first()?,
    };
    let parsed = match vendor {
        Vendor::Cisco => parse_cisco(&picked.text),
        Vendor::Juniper => parse_juniper(&picked.text),
    };
    (!parsed.config.interfaces.is_empty()).then(|| picked.text.clone())
}

/// Translates a Cisco config to Junos under verification.
pub fn run_translation(
    source: &str,
    provider: &mut dyn Provider,
    iips: &[InstructionPrompt],
    limits: Limits,
    human: &mut dyn HumanHook,
) -> Result<WorkflowOutcome, OrchestratorError> {
    let parsed = parse_cisco(source);
    if parsed.has_errors() {
        return Err(OrchestratorError::SourceSyntax(parsed.diagnostics));
    }
    let source_ir = parsed.config;
    let mut run = Run {
        provider,
        human,
        limits,
        log: Vec::new(),
        automated: 0,
        round: 0,
        history: Vec::new(),
    };
    let mut session = run.open(&iips_for(iips, Workflow::Translation), None);
    let task = format!("{TRANSLATION_TASK}\n\n```\n{}```", source);
    let reply = run.send(&mut session, task, Origin::Human)?;
    let mut check = |reply: &str| -> Result<Check, OrchestratorError> {
        let Some(config) = full_config(reply, None, Vendor::Juniper) else {
            return Ok(Check::Partial);
        };
        let findings = translation_findings(&source_ir, &config)?;
        Ok(Check::Checked { config, findings })
    };
    let result = run.drive(&mut session, None, reply, &mut check)?;
    let name = source_ir.name.clone();
    let (status, artifact) = match result {
        Drive::Verified(c) => (Status::Verified, Some(c)),
        Drive::Punted(c) => (Status::PuntedUnresolved, c),
    };
    let artifacts = artifact.map(|c| BTreeMap::from([(name, c)])).unwrap_or_default();
    Ok(run.finish(status, artifacts, Vec::new()))
}

/// The per-router prompt the modularizer produces.
pub fn router_prompt(t: &Topology, spec: &LocalPolicySpec) -> String {
    format!(
        "{}\nLocal policy for {}:\n{}\nWrite the configuration file {}.cfg for router {}.",
        describe_topology(t),
        spec.router,
        spec.describe(),
        spec.router,
        spec.router
    )
}

/// Synthesizes every router of a star, one session per router, then checks
/// the global no-transit policy by simulation.
pub fn run_local_synthesis(
    t: &Topology,
    provider: &mut dyn Provider,
    iips: &[InstructionPrompt],
    limits: Limits,
    human: &mut dyn HumanHook,
    out_dir: Option<&Path>,
) -> Result<WorkflowOutcome, OrchestratorError> {
    let specs = local_policy_specs(t)?;
    let hub = t.validate_star()?.name.clone();
    let iips = iips_for(iips, Workflow::Synthesis);
    let mut run = Run {
        provider,
        human,
        limits,
        log: Vec::new(),
        automated: 0,
        round: 0,
        history: Vec::new(),
    };
    let mut task = Session::open(run.provider, &[], Some("task".into()));
    task.record(SYNTHESIS_TASK, Origin::Human)?;
    run.log.extend(task.messages.iter().cloned());

    let mut sessions: BTreeMap<String, Session> = BTreeMap::new();
    let mut artifacts: BTreeMap<String, String> = BTreeMap::new();
    let mut punted = false;
    for r in &t.routers {
        let spec = &specs[&r.name];
        let mut session = run.open(&iips, Some(r.name.clone()));
        let reply = run.send(&mut session, router_prompt(t, spec), Origin::Iip)?;
        let result = drive_router(&mut run, &mut session, t, spec, reply)?;
        sessions.insert(r.name.clone(), session);
        match result {
            Drive::Verified(c) => {
                artifacts.insert(r.name.clone(), c);
            }
            Drive::Punted(c) => {
                if let Some(c) = c {
                    artifacts.insert(r.name.clone(), c);
                }
                punted = true;
                break;
            }
        }
    }

    let mut violations = Vec::new();
    if !punted {
        loop {
            let configs: BTreeMap<String, RouterConfig> = artifacts
                .iter()
                .map(|(n, c)| (n.clone(), parse_cisco(&prepend_preamble(c, Vendor::Cisco, n)).config))
                .collect();
            violations = check_no_transit(&simulate(t, &configs)?, t)?;
            if violations.is_empty() {
                break;
            }
            run.round += 1;
            let findings: Vec<Finding> = violations.iter().cloned().map(Finding::Global).collect();
            run.history.extend(findings.iter().map(|f| (run.round, f.clone())));
            let ctx = PuntContext {
                reason: PuntReason::GlobalViolation,
                router: Some(&hub),
                findings: &findings,
                latest_config: artifacts.get(&hub).map(String::as_str),
            };
            let Some(text) = run.human.intervene(&ctx) else {
                punted = true;
                break;
            };
            let session = sessions.get_mut(&hub).expect("hub session opened");
            let reply = run.send(session, text, Origin::Human)?;
            match drive_router(&mut run, session, t, &specs[&hub], reply)? {
                Drive::Verified(c) => {
                    artifacts.insert(hub.clone(), c);
                }
                Drive::Punted(c) => {
                    if let Some(c) = c {
                        artifacts.insert(hub.clone(), c);
                    }
                    punted = true;
                    break;
                }
            }
        }
    }

    if let Some(dir) = out_dir {
        if artifacts.len() == t.routers.len() {
            compose_snapshot(&artifacts, t, Vendor::Cisco, dir)?;
        }
    }
    let status = if punted {
        Status::PuntedUnresolved
    } else {
        Status::Verified
    };
    Ok(run.finish(status, artifacts, violations))
}

fn drive_router(
    run: &mut Run<'_>,
    session: &mut Session,
    t: &Topology,
    spec: &LocalPolicySpec,
    reply: String,
) -> Result<Drive, OrchestratorError> {
    let router = spec.router.clone();
    let mut check = |reply: &str| -> Result<Check, OrchestratorError> {
        let Some(config) = full_config(reply, Some(&router), Vendor::Cisco) else {
            return Ok(Check::Partial);
        };
        let findings = synthesis_findings(&config, t, &router, spec)?;
        Ok(Check::Checked { config, findings })
    };
    run.drive(session, Some(&spec.router), reply, &mut check)
}
