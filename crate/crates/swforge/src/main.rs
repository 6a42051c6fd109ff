//! swforge: run softwire hub-and-spoke deployment scenarios on the
//! simulated network and inspect the results.
//!
//! Exit codes: 0 success, 1 protocol/scenario failure (the failing step is
//! named in the output), 2 usage error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use softwire::netsim::Filtering;
use softwire::provisioning::{validate_combo, Combo, V4Scope, V6PrefixScope, V6Scope};
use softwire::scenario::{Runner, ScReplySource, ScenarioConfig};
use softwire::trace::{ev, Trace, TraceEvent};
use softwire::Af;

/// The scenario files shipped with the tool, embedded at build time.
const SCENARIO_FILES: [(&str, &str); 8] = [
    ("3.1.1", include_str!("../scenarios/3_1_1.toml")),
    ("3.1.2", include_str!("../scenarios/3_1_2.toml")),
    ("3.1.3", include_str!("../scenarios/3_1_3.toml")),
    ("3.1.4", include_str!("../scenarios/3_1_4.toml")),
    ("3.2.1", include_str!("../scenarios/3_2_1.toml")),
    ("3.2.2", include_str!("../scenarios/3_2_2.toml")),
    ("3.2.3", include_str!("../scenarios/3_2_3.toml")),
    ("3.2.4", include_str!("../scenarios/3_2_4.toml")),
];

#[derive(Parser)]
#[command(
    name = "swforge",
    version,
    about = "softwire hub-and-spoke scenario simulator (L2TPv2 + PPP over a virtual network)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a deployment scenario end to end and write its trace
    Run {
        /// Built-in scenario id (see `swforge scenarios`) or a TOML file
        scenario: String,
        /// Override the scenario seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the NAT on the path: none, eif, adf or apdf
        #[arg(long)]
        nat: Option<String>,
        /// Concentrator reply source (test-only): original,
        /// alternate-port or alternate-address-port
        #[arg(long)]
        sc_reply: Option<String>,
        /// Trace output path (JSON lines); accounting goes to PATH.acct
        #[arg(long, default_value = "swforge-trace.jsonl")]
        trace: PathBuf,
        /// Print only the verdict
        #[arg(long)]
        quiet: bool,
    },
    /// Check an address-scope combination against the provisioning tables
    Validate {
        /// Address family: v4 or v6
        af: String,
        /// Endpoint scope: link-local, ula, global (v6) or private, public (v4)
        endpoint_scope: String,
        /// Delegated prefix scope: global, ula (v6) or public, private (v4)
        delegated_scope: String,
    },
    /// Summarize traffic counters and tunnel events from a trace
    Stats {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Reconstruct the final routing tables from a trace
    Routes {
        #[arg(long)]
        trace: PathBuf,
    },
    /// List the built-in scenarios
    Scenarios,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            seed,
            nat,
            sc_reply,
            trace,
            quiet,
        } => run(scenario, seed, nat, sc_reply, trace, quiet),
        Command::Validate {
            af,
            endpoint_scope,
            delegated_scope,
        } => validate(&af, &endpoint_scope, &delegated_scope),
        Command::Stats { trace } => stats(&trace),
        Command::Routes { trace } => routes(&trace),
        Command::Scenarios => {
            for (id, text) in SCENARIO_FILES {
                let config: ScenarioConfig = toml::from_str(text).expect("embedded scenario");
                println!("{id}  {}", config.name);
            }
            ExitCode::SUCCESS
        }
    }
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(2)
}

fn load_scenario(name: &str) -> Result<ScenarioConfig, String> {
    if let Some((_, text)) = SCENARIO_FILES.iter().find(|(id, _)| *id == name) {
        return toml::from_str(text).map_err(|e| format!("embedded scenario {name}: {e}"));
    }
    let path = PathBuf::from(name);
    if !path.exists() {
        return Err(format!(
            "unknown scenario '{name}' (not a built-in id or a file; try `swforge scenarios`)"
        ));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(
    scenario: String,
    seed: Option<u64>,
    nat: Option<String>,
    sc_reply: Option<String>,
    trace_path: PathBuf,
    quiet: bool,
) -> ExitCode {
    let mut config = match load_scenario(&scenario) {
        Ok(c) => c,
        Err(e) => return usage_error(&e),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(nat) = nat {
        match nat.as_str() {
            "none" => config.set_nat(None),
            "eif" => config.set_nat(Some(Filtering::EndpointIndependent)),
            "adf" => config.set_nat(Some(Filtering::AddressDependent)),
            "apdf" => config.set_nat(Some(Filtering::AddressAndPortDependent)),
            other => return usage_error(&format!("unknown NAT mode '{other}'")),
        }
    }
    if let Some(reply) = sc_reply {
        config.sc.reply_source = match reply.as_str() {
            "original" => ScReplySource::Original,
            "alternate-port" => ScReplySource::AlternatePort,
            "alternate-address-port" => ScReplySource::AlternateAddressPort,
            other => return usage_error(&format!("unknown reply source '{other}'")),
        };
    }

    let report = Runner::new(config.clone()).run();

    if let Err(e) = std::fs::write(&trace_path, report.trace.to_jsonl()) {
        eprintln!("error: writing {}: {e}", trace_path.display());
        return ExitCode::from(1);
    }
    let acct_path = trace_path.with_extension("jsonl.acct");
    if let Err(e) = std::fs::write(&acct_path, report.accounting_jsonl()) {
        eprintln!("error: writing {}: {e}", acct_path.display());
        return ExitCode::from(1);
    }

    if !quiet {
        println!("scenario {} ({})", config.id, config.name);
        println!(
            "  {} payload over {} transport, initiator is a {}",
            config.payload_af,
            config.transport_af,
            match config.si_role {
                softwire::scenario::SiRole::Host => "host",
                softwire::scenario::SiRole::Router => "router",
            }
        );
        for step in &report.steps {
            println!("  step {step}: ok");
        }
        let record = &report.si_record;
        if let Some(addr) = record.endpoint_v6 {
            println!("  endpoint  {addr}");
        }
        if let Some(addr) = record.endpoint_v4 {
            println!("  endpoint  {addr}");
        }
        if let Some(prefix) = record.delegated_v6 {
            println!("  delegated {prefix}");
        }
        if let Some(prefix) = record.delegated_v4 {
            println!("  delegated {prefix}");
        }
        println!(
            "  traffic   v6 in/out {}/{} B, v4 in/out {}/{} B (concentrator view)",
            report.sc_stats.v6.rx_octets,
            report.sc_stats.v6.tx_octets,
            report.sc_stats.v4.rx_octets,
            report.sc_stats.v4.tx_octets,
        );
        println!("  trace     {}", trace_path.display());
        println!("  account   {}", acct_path.display());
    }
    match &report.failed_step {
        None => {
            println!("result: success");
            ExitCode::SUCCESS
        }
        Some(step) => {
            println!("result: FAILED at {step}");
            ExitCode::from(1)
        }
    }
}

fn validate(af: &str, endpoint_scope: &str, delegated_scope: &str) -> ExitCode {
    let combo = match af.to_ascii_lowercase().as_str() {
        "v6" | "6" | "ipv6" => {
            let endpoint = match endpoint_scope.parse::<V6Scope>() {
                Ok(s) => s,
                Err(e) => return usage_error(&e),
            };
            let delegated = match delegated_scope.parse::<V6PrefixScope>() {
                Ok(s) => s,
                Err(e) => return usage_error(&e),
            };
            Combo::V6 {
                endpoint,
                delegated,
            }
        }
        "v4" | "4" | "ipv4" => {
            let endpoint = match endpoint_scope.parse::<V4Scope>() {
                Ok(s) => s,
                Err(e) => return usage_error(&e),
            };
            let delegated = match delegated_scope.parse::<V4Scope>() {
                Ok(s) => s,
                Err(e) => return usage_error(&e),
            };
            Combo::V4 {
                endpoint,
                delegated,
            }
        }
        other => return usage_error(&format!("unknown address family '{other}'")),
    };
    let verdict = validate_combo(combo);
    println!("{}", verdict.verdict);
    if !verdict.note.is_empty() {
        println!("note: {}", verdict.note);
    }
    ExitCode::SUCCESS
}

fn read_trace(path: &PathBuf) -> Result<Vec<TraceEvent>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Trace::parse_jsonl(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn stats(path: &PathBuf) -> ExitCode {
    let events = match read_trace(path) {
        Ok(e) => e,
        Err(e) => return usage_error(&e),
    };
    #[derive(Default)]
    struct Counter {
        packets: u64,
        octets: u64,
    }
    // (endpoint, direction, family) -> counters, summed from the trace.
    let mut table: BTreeMap<(String, &'static str, String), Counter> = BTreeMap::new();
    for event in &events {
        let (endpoint, direction) = match event.event.as_str() {
            e if e == ev::DATA_TX => (event.from.clone(), "out"),
            e if e == ev::DATA_RX => (event.to.clone(), "in"),
            e if e == ev::SESSION_UP => {
                println!("session up   t={:>8}ms {}", event.time, event.summary);
                continue;
            }
            e if e == ev::TUNNEL_DOWN => {
                println!(
                    "tunnel down  t={:>8}ms {} ({})",
                    event.time, event.from, event.summary
                );
                continue;
            }
            _ => continue,
        };
        if let (Some(af), Some(len)) = (event.af, event.len) {
            let af = match af {
                Af::V4 => "v4".to_string(),
                Af::V6 => "v6".to_string(),
            };
            let counter = table.entry((endpoint, direction, af)).or_default();
            counter.packets += 1;
            counter.octets += len;
        }
    }
    println!(
        "{:<4} {:<4} {:<3} {:>9} {:>12}",
        "node", "dir", "af", "packets", "octets"
    );
    for ((endpoint, direction, af), counter) in &table {
        println!(
            "{:<4} {:<4} {:<3} {:>9} {:>12}",
            endpoint, direction, af, counter.packets, counter.octets
        );
    }
    ExitCode::SUCCESS
}

fn routes(path: &PathBuf) -> ExitCode {
    let events = match read_trace(path) {
        Ok(e) => e,
        Err(e) => return usage_error(&e),
    };
    // Replay route churn up to teardown; what remains is the RIB each
    // endpoint held while the softwire was in service.
    let mut ribs: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for event in &events {
        if event.event == ev::STEP && event.summary == "teardown" {
            break;
        }
        if event.event == ev::ROUTE_ADD {
            if let (Some(prefix), Some(next_hop)) = (&event.prefix, &event.next_hop) {
                ribs.entry(event.from.clone())
                    .or_default()
                    .insert(prefix.clone(), next_hop.clone());
            }
        } else if event.event == ev::ROUTE_DEL {
            if let Some(prefix) = &event.prefix {
                if let Some(rib) = ribs.get_mut(&event.from) {
                    rib.remove(prefix);
                }
            }
        }
    }
    for (endpoint, rib) in &ribs {
        println!("{endpoint}:");
        if rib.is_empty() {
            println!("  (empty)");
        }
        for (prefix, next_hop) in rib {
            println!("  {prefix} via {next_hop}");
        }
    }
    if ribs.is_empty() {
        println!("no route events in trace");
    }
    ExitCode::SUCCESS
}
