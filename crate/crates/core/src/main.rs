use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cosynth::diff::diff_all;
use cosynth::finding::Finding;
use cosynth::frontends::{detect_vendor, parse, parse_cisco, prepend_preamble, Vendor};
use cosynth::ir::{Action, CommunityValue, Ipv4Prefix, RouterConfig};
use cosynth::llm::{
    default_iips, load_iip, read_transcript, write_transcript, LiveConfig, LiveProvider, Provider, ReplayProvider,
    ScriptedProvider,
};
use cosynth::orchestrator::{
    compute_leverage, run_local_synthesis, run_translation, HumanHook, InteractiveHuman, Limits, NoHuman,
    ScriptedHuman, Status, WorkflowOutcome,
};
use cosynth::policy::{search_policy, ListEnv, RouteConstraint};
use cosynth::sim::{check_no_transit, render_ribs, simulate};
use cosynth::topology::{describe_topology, generate_star, load_snapshot, verify_topology, Topology};

const EXIT_FINDINGS: u8 = 1;
const EXIT_PUNTED: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cosynth",
    version,
    about = "Verifier-in-the-loop router configuration translation and synthesis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate a Cisco IOS config to Junos under verification.
    Translate {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Where to write the final Junos config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize configs for a star topology under verification.
    Synthesize {
        #[arg(long, conflicts_with = "routers")]
        topology: Option<PathBuf>,
        #[arg(long)]
        routers: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
        /// Snapshot directory; configs land in `<dir>/configs`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Compare a config with its translation.
    Diff {
        original: PathBuf,
        translation: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check one router config against its place in a topology.
    VerifyTopology {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        router: String,
    },
    /// Look for a route on which a route map does not act as expected.
    SearchPolicy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        policy: String,
        /// Restrict to routes carrying this community; repeatable.
        #[arg(long = "has-community")]
        has_community: Vec<CommunityValue>,
        /// Restrict to exactly this prefix.
        #[arg(long)]
        prefix: Option<Ipv4Prefix>,
        #[arg(long, value_enum)]
        expect: Expect,
    },
    /// Propagate routes through a snapshot and check the global policy.
    Simulate {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        topology: PathBuf,
        #[arg(long, value_enum)]
        check: Option<Check>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Write an n-router star topology.
    GenTopology {
        #[arg(long)]
        routers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print the prose description given to the model.
        #[arg(long)]
        describe: bool,
    },
    /// Count automated and human prompts in a transcript.
    Leverage {
        #[arg(long)]
        transcript: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `live`, `replay:<transcript.jsonl>` or `scripted:<replies.json>`.
    #[arg(long)]
    provider: String,
    /// Where to write the session transcript.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Ask on the terminal when the loop punts.
    #[arg(long)]
    interactive: bool,
    /// JSON array of prompts to answer punts with.
    #[arg(long, conflicts_with = "interactive")]
    human_script: Option<PathBuf>,
    /// Directory of `<name>.<workflow>.txt` instruction prompts.
    #[arg(long)]
    iip_dir: Option<PathBuf>,
    #[arg(long, default_value_t = Limits::default().max_syntax_retries)]
    max_syntax_retries: u32,
    #[arg(long, default_value_t = Limits::default().max_semantic_retries)]
    max_semantic_retries: u32,
    #[arg(long, default_value_t = Limits::default().max_total_automated)]
    max_total_automated: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Expect {
    Permit,
    Deny,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    NoTransit,
}

/// A failure that maps to the usage/provider exit code.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Fatal> {
    fs::read_to_string(path).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Fatal> {
    fs::write(path, text).map_err(|e| Fatal(format!("{}: {e}", path.display())))
}

struct Harness {
    provider: Box<dyn Provider>,
    human: Box<dyn HumanHook>,
    limits: Limits,
    iips: Vec<cosynth::llm::InstructionPrompt>,
}

impl RunArgs {
    fn harness(&self) -> Result<Harness, Fatal> {
        let limits = Limits {
            max_syntax_retries: self.max_syntax_retries,
            max_semantic_retries: self.max_semantic_retries,
            max_total_automated: self.max_total_automated,
        };
        if limits.max_syntax_retries == 0 || limits.max_semantic_retries == 0 || limits.max_total_automated == 0 {
            return Err(Fatal("limits must be positive".into()));
        }
        let mut human: Box<dyn HumanHook> = match (&self.human_script, self.interactive) {
            (Some(p), _) => Box::new(ScriptedHuman::new(serde_json::from_str::<Vec<String>>(&read(p)?)?)),
            (None, true) => Box::new(InteractiveHuman),
            (None, false) => Box::new(NoHuman),
        };
        let provider: Box<dyn Provider> = match self.provider.split_once(':') {
            None if self.provider == "live" => Box::new(LiveProvider::new(LiveConfig::from_env()?)?),
            Some(("replay", path)) => {
                let path = Path::new(path);
                if self.human_script.is_none() && !self.interactive {
                    human = Box::new(ScriptedHuman::from_transcript(&read_transcript(path)?));
                }
                Box::new(ReplayProvider::load(path, true)?)
            }
            Some(("scripted", path)) => Box::new(ScriptedProvider::load(Path::new(path))?),
            _ => return Err(Fatal(format!("unknown provider '{}'", self.provider))),
        };
        let iips = match &self.iip_dir {
            Some(dir) => load_iip(dir)?,
            None => default_iips(),
        };
        Ok(Harness {
            provider,
            human,
            limits,
            iips,
        })
    }

    fn report(&self, outcome: &WorkflowOutcome) -> Result<u8, Fatal> {
        if let Some(path) = &self.transcript {
            write_transcript(path, &outcome.transcript)?;
        }
        let mut round = 0;
        for (r, f) in &outcome.findings_history {
            if *r != round {
                round = *r;
                eprintln!("round {r}: [{}] {f}", f.kind());
            }
        }
        let l = &outcome.leverage;
        println!(
            "status: {}",
            match outcome.status {
                Status::Verified => "verified",
                Status::PuntedUnresolved => "punted",
            }
        );
        println!("automated prompts: {}", l.automated_count);
        println!("human prompts: {}", l.human_count);
        println!("leverage: {}", l.leverage);
        Ok(match outcome.status {
            Status::Verified => 0,
            Status::PuntedUnresolved => EXIT_PUNTED,
        })
    }
}

fn load_topology(topology: Option<&Path>, routers: Option<usize>) -> Result<Topology, Fatal> {
    match (topology, routers) {
        (Some(p), _) => Ok(Topology::load(p)?),
        (None, Some(n)) => Ok(generate_star(n)?),
        (None, None) => Err(Fatal("either --topology or --routers is required".into())),
    }
}

fn parsed(text: &str, vendor: Vendor) -> Result<RouterConfig, Fatal> {
    let p = parse(vendor, text);
    if p.has_errors() {
        let msgs: Vec<String> = p.diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(Fatal(msgs.join("\n")));
    }
    Ok(p.config)
}

fn run(cli: Cli) -> Result<u8, Fatal> {
    match cli.command {
        Command::Translate { input, run, out } => {
            let mut h = run.harness()?;
            let outcome = run_translation(&read(&input)?, h.provider.as_mut(), &h.iips, h.limits, h.human.as_mut())?;
            if let (Some(path), Some(cfg)) = (&out, outcome.artifacts.values().next()) {
                write(path, cfg)?;
            }
            run.report(&outcome)
        }
        Command::Synthesize {
            topology,
            routers,
            run,
            out_dir,
        } => {
            let t = load_topology(topology.as_deref(), routers)?;
            let mut h = run.harness()?;
            let outcome = run_local_synthesis(
                &t,
                h.provider.as_mut(),
                &h.iips,
                h.limits,
                h.human.as_mut(),
                out_dir.as_deref(),
            )?;
            for v in &outcome.violations {
                eprintln!("violation: {v}");
            }
            run.report(&outcome)
        }
        Command::Diff {
            original,
            translation,
            format,
        } => {
            let (a, b) = (read(&original)?, read(&translation)?);
            let a = parsed(&a, detect_vendor(&a))?;
            let b = parsed(&b, detect_vendor(&b))?;
            let findings = diff_all(&a, &b)?;
            match format {
                Format::Text => findings.iter().for_each(|f| println!("{f}")),
                Format::Json => println!("{}", serde_json::to_string_pretty(&findings)?),
            }
            Ok(if findings.is_empty() { 0 } else { EXIT_FINDINGS })
        }
        Command::VerifyTopology {
            config,
            topology,
            router,
        } => {
            let t = Topology::load(&topology)?;
            let p = parse_cisco(&prepend_preamble(&read(&config)?, Vendor::Cisco, &router));
            let mut findings: Vec<Finding> = p
                .diagnostics
                .iter()
                .map(|d| Finding::Syntax {
                    vendor: Vendor::Cisco,
                    diagnostic: d.clone(),
                })
                .collect();
            if !p.has_errors() {
                findings.extend(
                    verify_topology(&p.config, &t, &router)?
                        .into_iter()
                        .map(Finding::Topology),
                );
            }
            findings.iter().for_each(|f| println!("{f}"));
            Ok(if findings.is_empty() { 0 } else { EXIT_FINDINGS })
        }
        Command::SearchPolicy {
            config,
            policy,
            has_community,
            prefix,
            expect,
        } => {
            let cfg = parsed(&read(&config)?, Vendor::Cisco)?;
            let route_map = cfg
                .policies
                .get(&policy)
                .ok_or_else(|| Fatal(format!("no route map named '{policy}'")))?;
            let constraint = RouteConstraint {
                prefix_range: prefix.map(cosynth::policy::PrefixRange::exact),
                must_have: has_community.into_iter().collect(),
                ..Default::default()
            };
            let expected = match expect {
                Expect::Permit => Action::Permit,
                Expect::Deny => Action::Deny,
            };
            match search_policy(route_map, &ListEnv::from_config(&cfg), &constraint, expected)? {
                Some(cex) => {
                    println!("{}", cex.announcement);
                    println!("expected {}, got {} at {}", cex.expected, cex.actual, cex.at_clause);
                    Ok(EXIT_FINDINGS)
                }
                None => {
                    println!("no counterexample");
                    Ok(0)
                }
            }
        }
        Command::Simulate {
            snapshot,
            topology,
            check,
            format,
        } => {
            let t = Topology::load(&topology)?;
            let configs = load_snapshot(&t, &snapshot)?
                .into_iter()
                .map(|(name, text)| Ok((name, parsed(&text, Vendor::Cisco)?)))
                .collect::<Result<BTreeMap<_, _>, Fatal>>()?;
            let ribs = simulate(&t, &configs)?;
            let violations = match check {
                Some(Check::NoTransit) => check_no_transit(&ribs, &t)?,
                None => Vec::new(),
            };
            match format {
                Format::Text => {
                    print!("{}", render_ribs(&ribs));
                    violations.iter().for_each(|v| println!("violation: {v}"));
                }
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({ "ribs": ribs, "violations": violations }))?
                ),
            }
            Ok(if violations.is_empty() { 0 } else { EXIT_FINDINGS })
        }
        Command::GenTopology { routers, out, describe } => {
            let t = generate_star(routers)?;
            match &out {
                Some(path) => write(path, &t.to_json())?,
                None => println!("{}", t.to_json()),
            }
            if describe {
                println!("{}", describe_topology(&t));
            }
            Ok(0)
        }
        Command::Leverage { transcript } => {
            let r = compute_leverage(&read_transcript(&transcript)?);
            println!("automated prompts: {}", r.automated_count);
            println!("human prompts: {}", r.human_count);
            println!("leverage: {}", r.leverage);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
