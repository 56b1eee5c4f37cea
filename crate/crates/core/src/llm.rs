//! Chat sessions against pluggable model providers, instruction prompts,
//! JSONL transcripts and config extraction from replies.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    BadTranscript {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: scripted replies must be a JSON array of strings: {source}")]
    BadScript {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate instruction prompt '{0}'")]
    DuplicateIip(String),
    #[error("replay exhausted after {0} replies")]
    ReplayExhausted(usize),
    #[error("replay mismatch at reply {index}: outgoing prompt digest {actual} differs from recorded {expected}")]
    DigestMismatch {
        index: usize,
        expected: String,
        actual: String,
    },
    #[error("scripted provider has no reply left after {0}")]
    ScriptExhausted(usize),
    #[error("missing environment variable {0}")]
    MissingEnv(&'static str),
    #[error("model request failed after {attempts} attempts: {last}")]
    Http { attempts: u32, last: String },
    #[error("no configuration found")]
    NoConfig,
    #[error("message origin {origin} cannot have role {role}")]
    BadMessage { role: Role, origin: Origin },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Iip,
    Automated,
    Human,
    Model,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        })
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Iip => "iip",
            Origin::Automated => "automated",
            Origin::Human => "human",
            Origin::Model => "model",
        })
    }
}

/// One transcript line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub seq: u32,
    pub role: Role,
    pub origin: Origin,
    pub text: String,
    /// Which session the message belongs to when a workflow runs several.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

impl Message {
    fn check(role: Role, origin: Origin) -> Result<(), GatewayError> {
        let ok = match origin {
            Origin::Model => role == Role::Assistant,
            _ => role != Role::Assistant,
        };
        if ok {
            Ok(())
        } else {
            Err(GatewayError::BadMessage { role, origin })
        }
    }
}

pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Produces the assistant's next reply for a conversation.
pub trait Provider {
    fn id(&self) -> String;
    fn complete(&mut self, history: &[Message]) -> Result<String, GatewayError>;
}

/// Replays the assistant messages of a recorded transcript in file order.
#[derive(Debug, Clone)]
pub struct ReplayProvider {
    source: String,
    /// (prompt that preceded the reply, reply).
    replies: VecDeque<(Option<String>, String)>,
    served: usize,
    strict: bool,
}

impl ReplayProvider {
    pub fn from_messages(source: impl Into<String>, messages: &[Message], strict: bool) -> Self {
        let mut replies = VecDeque::new();
        let mut last_user: Option<&str> = None;
        for m in messages {
            match m.role {
                Role::Assistant => replies.push_back((last_user.take().map(str::to_string), m.text.clone())),
                Role::User => last_user = Some(&m.text),
                Role::System => {}
            }
        }
        ReplayProvider {
            source: source.into(),
            replies,
            served: 0,
            strict,
        }
    }

    pub fn load(path: &Path, strict: bool) -> Result<Self, GatewayError> {
        let messages = read_transcript(path)?;
        Ok(Self::from_messages(path.display().to_string(), &messages, strict))
    }

    pub fn remaining(&self) -> usize {
        self.replies.len()
    }
}

impl Provider for ReplayProvider {
    fn id(&self) -> String {
        format!("replay:{}", self.source)
    }

    fn complete(&mut self, history: &[Message]) -> Result<String, GatewayError> {
        let (recorded_prompt, reply) = self
            .replies
            .pop_front()
            .ok_or(GatewayError::ReplayExhausted(self.served))?;
        self.served += 1;
        if self.strict {
            let outgoing = history
                .iter()
                .rev()
                .find(|m| m.role == Role::User)
                .map(|m| m.text.as_str())
                .unwrap_or("");
            let expected = digest(recorded_prompt.as_deref().unwrap_or(""));
            let actual = digest(outgoing);
            if expected != actual {
                return Err(GatewayError::DigestMismatch {
                    index: self.served,
                    expected,
                    actual,
                });
            }
        }
        Ok(reply)
    }
}

/// Returns programmed replies in order, optionally cycling.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    replies: Vec<String>,
    next: usize,
    cycle: bool,
}

impl ScriptedProvider {
    pub fn new(replies: Vec<String>) -> Self {
        ScriptedProvider {
            replies,
            next: 0,
            cycle: false,
        }
    }

    pub fn cycling(replies: Vec<String>) -> Self {
        ScriptedProvider {
            cycle: true,
            ..Self::new(replies)
        }
    }

    /// Reads a JSON array of reply strings.
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = fs::read_to_string(path).map_err(|source| GatewayError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let replies: Vec<String> = serde_json::from_str(&text).map_err(|source| GatewayError::BadScript {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::new(replies))
    }
}

impl Provider for ScriptedProvider {
    fn id(&self) -> String {
        "scripted".to_string()
    }

    fn complete(&mut self, _history: &[Message]) -> Result<String, GatewayError> {
        if self.next >= self.replies.len() {
            if !self.cycle || self.replies.is_empty() {
                return Err(GatewayError::ScriptExhausted(self.next));
            }
            self.next = 0;
        }
        self.next += 1;
        Ok(self.replies[self.next - 1].clone())
    }
}

/// Settings for an OpenAI-style chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct LiveConfig {
    /// Full URL of the chat-completions endpoint.
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub retries: u32,
    pub max_in_flight: usize,
}

impl LiveConfig {
    /// Reads `COSYNTH_LLM_URL`, `COSYNTH_LLM_MODEL` and optional `COSYNTH_LLM_KEY`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let var = |k: &'static str| std::env::var(k).map_err(|_| GatewayError::MissingEnv(k));
        Ok(LiveConfig {
            url: var("COSYNTH_LLM_URL")?,
            model: var("COSYNTH_LLM_MODEL")?,
            api_key: std::env::var("COSYNTH_LLM_KEY").ok(),
            timeout: Duration::from_secs(120),
            retries: 3,
            max_in_flight: 4,
        })
    }
}

/// Process-wide cap on concurrent live requests.
static IN_FLIGHT: (Mutex<usize>, Condvar) = (Mutex::new(0), Condvar::new());

struct InFlightGuard;

impl InFlightGuard {
    fn acquire(max: usize) -> InFlightGuard {
        let (lock, cv) = &IN_FLIGHT;
        let mut n = lock.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= max.max(1) {
            n = cv.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        InFlightGuard
    }
}

impl Drop for InFlightGuard {
    fn drop(&mut self) {
        let (lock, cv) = &IN_FLIGHT;
        *lock.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        cv.notify_one();
    }
}

pub struct LiveProvider {
    config: LiveConfig,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireReply,
}

#[derive(Deserialize)]
struct WireReply {
    content: String,
}

impl LiveProvider {
    pub fn new(config: LiveConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Http {
                attempts: 0,
                last: e.to_string(),
            })?;
        Ok(LiveProvider { config, client })
    }

    fn attempt(&self, body: &WireRequest<'_>) -> Result<String, String> {
        let mut req = self.client.post(&self.config.url).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        let parsed: WireResponse = resp.json().map_err(|e| e.to_string())?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| "response has no choices".to_string())
    }
}

impl Provider for LiveProvider {
    fn id(&self) -> String {
        format!("live:{}", self.config.model)
    }

    fn complete(&mut self, history: &[Message]) -> Result<String, GatewayError> {
        let body = WireRequest {
            model: &self.config.model,
            messages: history
                .iter()
                .map(|m| WireMessage {
                    role: match m.role {
                        Role::System => "system",
                        Role::User => "user",
                        Role::Assistant => "assistant",
                    },
                    content: &m.text,
                })
                .collect(),
        };
        let _slot = InFlightGuard::acquire(self.config.max_in_flight);
        let attempts = self.config.retries + 1;
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(250 << attempt.min(6)));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(e) => last = e,
            }
        }
        Err(GatewayError::Http { attempts, last })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Workflow {
    Translation,
    Synthesis,
    Both,
}

impl Workflow {
    pub fn covers(self, other: Workflow) -> bool {
        self == Workflow::Both || self == other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionPrompt {
    pub name: String,
    pub text: String,
    pub workflow: Workflow,
}

/// Splits `name.workflow` file stems; stems without a known suffix apply to
/// both workflows.
fn iip_from_file(stem: &str, text: String) -> InstructionPrompt {
    let (name, workflow) = match stem.rsplit_once('.') {
        Some((n, "translation")) => (n, Workflow::Translation),
        Some((n, "synthesis")) => (n, Workflow::Synthesis),
        Some((n, "both")) => (n, Workflow::Both),
        _ => (stem, Workflow::Both),
    };
    InstructionPrompt {
        name: name.to_string(),
        text: text.trim_end().to_string(),
        workflow,
    }
}

fn check_unique(iips: &[InstructionPrompt]) -> Result<(), GatewayError> {
    let mut seen = std::collections::BTreeSet::new();
    for p in iips {
        if !seen.insert(p.name.as_str()) {
            return Err(GatewayError::DuplicateIip(p.name.clone()));
        }
    }
    Ok(())
}

/// Every `*.txt` file in `dir`, in name order.
pub fn load_iip(dir: &Path) -> Result<Vec<InstructionPrompt>, GatewayError> {
    let io = |source| GatewayError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io)?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "txt"));
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|source| GatewayError::Io {
            path: p.clone(),
            source,
        })?;
        let stem = p.file_stem().unwrap_or_default().to_string_lossy().to_string();
        out.push(iip_from_file(&stem, text));
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    check_unique(&out)?;
    Ok(out)
}

const DEFAULT_IIPS: &[(&str, &str)] = &[
    (
        "additive-communities.synthesis",
        include_str!("../iip/additive-communities.synthesis.txt"),
    ),
    (
        "community-list-matching.synthesis",
        include_str!("../iip/community-list-matching.synthesis.txt"),
    ),
    (
        "emit-config-files.synthesis",
        include_str!("../iip/emit-config-files.synthesis.txt"),
    ),
    (
        "forbidden-keywords.synthesis",
        include_str!("../iip/forbidden-keywords.synthesis.txt"),
    ),
];

/// The shipped instruction prompts.
pub fn default_iips() -> Vec<InstructionPrompt> {
    DEFAULT_IIPS
        .iter()
        .map(|(stem, text)| iip_from_file(stem, text.to_string()))
        .collect()
}

pub fn iips_for(iips: &[InstructionPrompt], workflow: Workflow) -> Vec<InstructionPrompt> {
    iips.iter().filter(|p| p.workflow.covers(workflow)).cloned().collect()
}

/// One conversation. Messages are numbered from 1 within the session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub provider_id: String,
    pub label: Option<String>,
    pub messages: Vec<Message>,
}

impl Session {
    /// Starts a session whose first messages are the instruction prompts.
    pub fn open(provider: &dyn Provider, iips: &[InstructionPrompt], label: Option<String>) -> Session {
        let mut s = Session {
            provider_id: provider.id(),
            label,
            messages: Vec::new(),
        };
        for p in iips {
            s.push(Role::System, Origin::Iip, p.text.clone());
        }
        s
    }

    fn push(&mut self, role: Role, origin: Origin, text: String) -> &Message {
        let seq = self.messages.last().map_or(1, |m| m.seq + 1);
        self.messages.push(Message {
            seq,
            role,
            origin,
            text,
            session: self.label.clone(),
        });
        self.messages.last().expect("just pushed")
    }

    /// Appends a user message without asking for a reply.
    pub fn record(&mut self, text: impl Into<String>, origin: Origin) -> Result<(), GatewayError> {
        Message::check(Role::User, origin)?;
        self.push(Role::User, origin, text.into());
        Ok(())
    }

    /// Appends a user message and the provider's reply.
    pub fn send(
        &mut self,
        provider: &mut dyn Provider,
        text: impl Into<String>,
        origin: Origin,
    ) -> Result<Message, GatewayError> {
        self.record(text, origin)?;
        let reply = provider.complete(&self.messages)?;
        Ok(self.push(Role::Assistant, Origin::Model, reply).clone())
    }
}

pub fn write_transcript(path: &Path, messages: &[Message]) -> Result<(), GatewayError> {
    let io = |source| GatewayError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for m in messages {
        let line = serde_json::to_string(m).expect("message always serializes");
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}

pub fn read_transcript(path: &Path) -> Result<Vec<Message>, GatewayError> {
    let text = fs::read_to_string(path).map_err(|source| GatewayError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| GatewayError::BadTranscript {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let m: Message = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        Message::check(m.role, m.origin).map_err(|e| bad(e.to_string()))?;
        out.push(m);
    }
    Ok(out)
}

/// A config lifted out of a model reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedConfig {
    /// Router name from a preceding "R1.cfg"-style header.
    pub name: Option<String>,
    pub text: String,
}

/// Router name in a header line such as "R1.cfg:" or "**R2.cfg**".
fn header_name(line: &str) -> Option<String> {
    line.split(|c: char| !(c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-'))
        .find_map(|w| w.strip_suffix(".cfg").filter(|n| !n.is_empty()).map(str::to_string))
}

/// Removes device prompts such as "R1#" or "R1(config-router)#".
fn strip_cli_prompt(line: &str) -> &str {
    let trimmed = line.trim_start();
    if let Some(hash) = trimmed.find('#') {
        let head = &trimmed[..hash];
        let is_prompt = !head.is_empty()
            && !head.contains(' ')
            && head.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
            && head.chars().all(|c| c.is_ascii_alphanumeric() || "()-_/".contains(c));
        if is_prompt {
            return trimmed[hash + 1..].trim_start();
        }
    }
    line
}

const CONFIG_STARTS: &[&str] = &[
    "interface",
    "router ",
    "route-map",
    "ip ",
    "hostname",
    "system",
    "interfaces",
    "protocols",
    "policy-options",
    "routing-options",
    "neighbor",
    "network",
];

fn looks_like_config(line: &str) -> bool {
    let t = line.trim_start();
    CONFIG_STARTS.iter().any(|k| t.starts_with(k))
}

fn clean(lines: &[&str]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(strip_cli_prompt(l));
        out.push('\n');
    }
    out
}

/// Configs in a reply: every fenced block in order, each named by a header
/// on the nearest preceding non-blank line. Without fences, the span from
/// the first to the last config-like line.
pub fn extract_configs(reply: &str) -> Result<Vec<ExtractedConfig>, GatewayError> {
    let lines: Vec<&str> = reply.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim_start().starts_with("```") {
            let name = lines[..i]
                .iter()
                .rev()
                .find(|l| !l.trim().is_empty())
                .and_then(|l| header_name(l));
            let start = i + 1;
            let mut end = start;
            while end < lines.len() && !lines[end].trim_start().starts_with("```") {
                end += 1;
            }
            let body = &lines[start..end];
            if body.iter().any(|l| !l.trim().is_empty()) {
                out.push(ExtractedConfig {
                    name,
                    text: clean(body),
                });
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    if out.is_empty() {
        let first = lines.iter().position(|l| looks_like_config(strip_cli_prompt(l)));
        let last = lines.iter().rposition(|l| {
            let t = strip_cli_prompt(l).trim();
            looks_like_config(t) || t == "}" || t.starts_with(' ') || l.starts_with(' ') || t == "!"
        });
        if let (Some(f), Some(l)) = (first, last) {
            let name = lines[..f]
                .iter()
                .rev()
                .find(|l| !l.trim().is_empty())
                .and_then(|l| header_name(l));
            out.push(ExtractedConfig {
                name,
                text: clean(&lines[f..=l.max(f)]),
            });
        }
    }
    if out.is_empty() {
        Err(GatewayError::NoConfig)
    } else {
        Ok(out)
    }
}

/// The config for `router`: the block named after it, else the only block.
pub fn config_for<'a>(configs: &'a [ExtractedConfig], router: &str) -> Option<&'a ExtractedConfig> {
    configs
        .iter()
        .find(|c| c.name.as_deref() == Some(router))
        .or_else(|| (configs.len() == 1).then(|| &configs[0]))
}

/// Groups a transcript's messages by session label, keeping first-seen order.
pub fn sessions_of(messages: &[Message]) -> Vec<(Option<String>, Vec<Message>)> {
    let mut order: Vec<Option<String>> = Vec::new();
    let mut by: BTreeMap<Option<String>, Vec<Message>> = BTreeMap::new();
    for m in messages {
        if !by.contains_key(&m.session) {
            order.push(m.session.clone());
        }
        by.entry(m.session.clone()).or_default().push(m.clone());
    }
    order
        .into_iter()
        .map(|k| {
            let v = by.remove(&k).unwrap_or_default();
            (k, v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(seq: u32, role: Role, origin: Origin, text: &str) -> Message {
        Message {
            seq,
            role,
            origin,
            text: text.into(),
            session: None,
        }
    }

    #[test]
    fn shipped_iips() {
        let all = default_iips();
        let synth = iips_for(&all, Workflow::Synthesis);
        assert_eq!(synth.len(), 4);
        assert!(synth.iter().any(|p| p.text.contains("additive")));
        assert!(iips_for(&all, Workflow::Translation).is_empty());
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("iip");
        assert_eq!(load_iip(&dir).unwrap(), all);
    }

    #[test]
    fn iip_directory_rules() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_iip(dir.path()).unwrap().is_empty());
        fs::write(dir.path().join("rule.synthesis.txt"), "a").unwrap();
        fs::write(dir.path().join("rule.both.txt"), "b").unwrap();
        assert!(matches!(load_iip(dir.path()), Err(GatewayError::DuplicateIip(n)) if n == "rule"));
        assert!(load_iip(&dir.path().join("missing")).is_err());
    }

    #[test]
    fn session_numbering_and_origins() {
        let mut p = ScriptedProvider::new(vec!["bad".into(), "good".into()]);
        let mut s = Session::open(&p, &default_iips(), None);
        assert_eq!(s.messages.len(), 4);
        assert!(s.messages.iter().all(|m| m.origin == Origin::Iip));
        assert_eq!(s.send(&mut p, "one", Origin::Human).unwrap().text, "bad");
        assert_eq!(s.send(&mut p, "two", Origin::Automated).unwrap().text, "good");
        let seqs: Vec<u32> = s.messages.iter().map(|m| m.seq).collect();
        assert_eq!(seqs, (1..=8).collect::<Vec<_>>());
        assert!(s.send(&mut p, "three", Origin::Automated).is_err());
        assert!(s.record("x", Origin::Model).is_err());
    }

    #[test]
    fn transcript_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let msgs = vec![
            msg(1, Role::System, Origin::Iip, "rules"),
            msg(2, Role::User, Origin::Human, "line one\n\"quoted\"\n"),
            msg(3, Role::Assistant, Origin::Model, "```\nx\n```"),
        ];
        write_transcript(&path, &msgs).unwrap();
        assert_eq!(read_transcript(&path).unwrap(), msgs);
        fs::write(
            &path,
            "{\"seq\":1,\"role\":\"assistant\",\"origin\":\"human\",\"text\":\"\"}\n",
        )
        .unwrap();
        assert!(matches!(
            read_transcript(&path),
            Err(GatewayError::BadTranscript { line: 1, .. })
        ));
    }

    #[test]
    fn replay_serves_recorded_replies() {
        let mut msgs = Vec::new();
        for k in 1..=11u32 {
            msgs.push(msg(2 * k - 1, Role::User, Origin::Automated, &format!("p{k}")));
            msgs.push(msg(2 * k, Role::Assistant, Origin::Model, &format!("r{k}")));
        }
        let mut r = ReplayProvider::from_messages("t", &msgs, false);
        for k in 1..=10 {
            assert_eq!(r.complete(&[]).unwrap(), format!("r{k}"));
        }
        assert_eq!(r.complete(&[]).unwrap(), "r11");
        assert!(matches!(r.complete(&[]), Err(GatewayError::ReplayExhausted(11))));

        let mut strict = ReplayProvider::from_messages("t", &msgs, true);
        let ok = [msg(1, Role::User, Origin::Automated, "p1")];
        assert_eq!(strict.complete(&ok).unwrap(), "r1");
        let wrong = [msg(1, Role::User, Origin::Automated, "different")];
        assert!(matches!(
            strict.complete(&wrong),
            Err(GatewayError::DigestMismatch { index: 2, .. })
        ));
    }

    #[test]
    fn live_provider_gives_up_after_retries() {
        let mut p = LiveProvider::new(LiveConfig {
            url: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            api_key: None,
            timeout: Duration::from_millis(200),
            retries: 1,
            max_in_flight: 1,
        })
        .unwrap();
        let err = p.complete(&[msg(1, Role::User, Origin::Human, "hi")]).unwrap_err();
        assert!(matches!(err, GatewayError::Http { attempts: 2, .. }));
    }

    #[test]
    fn extraction() {
        let one = "Here you go:\n```\ninterfaces {\n}\n```\nThanks";
        let got = extract_configs(one).unwrap();
        assert_eq!(
            got,
            vec![ExtractedConfig {
                name: None,
                text: "interfaces {\n}\n".into()
            }]
        );

        let named = "R1.cfg\n```cisco\nrouter bgp 1\n```\n\n**R2.cfg**\n```\nrouter bgp 2\n```\n";
        let got = extract_configs(named).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].name.as_deref(), Some("R1"));
        assert_eq!(config_for(&got, "R2").unwrap().text, "router bgp 2\n");

        assert!(matches!(
            extract_configs("I cannot help with that."),
            Err(GatewayError::NoConfig)
        ));

        let cli = "Enter these:\nR1(config)# router bgp 1\nR1(config-router)#  neighbor 1.0.0.2 remote-as 2\n";
        let got = extract_configs(cli).unwrap();
        assert_eq!(got[0].text, "router bgp 1\nneighbor 1.0.0.2 remote-as 2\n");
    }
}
