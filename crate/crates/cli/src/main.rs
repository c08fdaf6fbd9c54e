//! `wayward`: batch front end for the participatory simulation pipeline.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage, 3 I/O, 4 network.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};
use wayward_core::env::{compile_mdp, generate_network, reduce_network, ActivityKind, Gender, IncomeBand, MdpCompilation};
use wayward_core::io::{
    append_to_log, ingest_gps, load_network, load_scenario, read_gps_csv, read_log, save_network, save_scenario,
    write_log, IoError,
};
use wayward_core::irl::{estimate_policy, recover_reward, validate_recovery, IrlConfig};
use wayward_core::sim::{
    init_world, Event, ProfileGroup, ProfileTemplate, Scenario, DEFAULT_DISCOUNT, DEFAULT_SCHEDULE_LENGTH,
    DEFAULT_SLIP,
};
use wayward_core::trajectory::{Source, TrajectoryLog};
use wayward_server::{Server, DEFAULT_TICK_INTERVAL_MS};

#[derive(Parser)]
#[command(name = "wayward", version, about = "Participatory agent-based street simulation with reward recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random street network and a default scenario.
    Gen {
        /// Number of street corners (at least 2).
        #[arg(long, value_parser = clap::value_parser!(u32).range(2..))]
        nodes: u32,
        /// Number of buildings placed on distinct corners.
        #[arg(long, default_value_t = 0)]
        buildings: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory; receives network.json and scenario.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a scenario headless and write its trajectory log.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Ticks to run; defaults to the scenario's own tick count.
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a reward function from a trajectory log.
    Irl {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Sparsity weight on the L1 norm of the reward.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Bound on every reward entry.
        #[arg(long, default_value_t = 1.0)]
        rmax: f64,
        /// Output directory; receives reward.json and validation.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Snap a GPS trace onto the network and append it to a log.
    Ingest {
        /// CSV with header `timestamp,x,y`.
        #[arg(long)]
        gps: PathBuf,
        #[arg(long)]
        network: PathBuf,
        /// Supplies slip probability, discount and the seed of a new log.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Log to append to; created when missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Contract degree-2 corners that hold no building.
    Reduce {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the removed-node mapping as JSON.
        #[arg(long)]
        mapping: Option<PathBuf>,
    },
    /// Host participatory sessions over WebSocket until interrupted.
    Serve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Milliseconds per tick; 0 advances only on the step endpoint.
        #[arg(long, default_value_t = DEFAULT_TICK_INTERVAL_MS)]
        tick_interval: u64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn domain(e: impl Display) -> Self {
        Failure { code: 1, message: e.to_string() }
    }

    /// Prefixes the message with the error's variant name, e.g. `EmptyLog`.
    fn named(e: impl Display + std::fmt::Debug) -> Self {
        let debug = format!("{e:?}");
        let name = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default();
        Failure { code: 1, message: format!("{name}: {e}") }
    }

    fn io(e: impl Display) -> Self {
        Failure { code: 3, message: e.to_string() }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io { .. } => Failure::io(e),
            other => Failure::named(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen { nodes, buildings, seed, out } => gen(nodes, buildings, seed, &out),
        Command::Simulate { scenario, ticks, out } => simulate(&scenario, ticks, &out),
        Command::Irl { log, scenario, lambda, rmax, out } => irl(&log, &scenario, lambda, rmax, &out),
        Command::Ingest { gps, network, scenario, out } => ingest(&gps, &network, scenario.as_deref(), &out),
        Command::Reduce { network, out, mapping } => reduce(&network, &out, mapping.as_deref()),
        Command::Serve { scenario, host, port, tick_interval } => serve(&scenario, &host, port, tick_interval),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn compile(scenario: &Scenario) -> Result<MdpCompilation, Failure> {
    compile_mdp(&scenario.network, scenario.slip_probability, scenario.discount).map_err(Failure::domain)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("values serialize");
    std::fs::write(path, text + "\n").map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(format!("{}: {e}", dir.display())))
}

/// Three rule-based groups, one per activity, with schedules sampled by
/// building attractiveness.
fn default_scenario(network: Arc<wayward_core::env::StreetNetwork>, seed: u64) -> Scenario {
    let groups = [
        (ActivityKind::Working, IncomeBand::Mid, Gender::Female),
        (ActivityKind::Shopping, IncomeBand::Low, Gender::Male),
        (ActivityKind::Leisure, IncomeBand::High, Gender::Other),
    ];
    let total_time = (network.len() as u32 * 4).max(200);
    Scenario {
        network,
        network_path: "network.json".into(),
        profiles: groups
            .into_iter()
            .map(|(activity, income_band, gender)| ProfileGroup {
                profile: ProfileTemplate {
                    income_band,
                    gender,
                    activity,
                    speed: 1,
                    visual_range: 2,
                    fixation: 0.7,
                    total_time,
                    schedule: None,
                    schedule_length: DEFAULT_SCHEDULE_LENGTH,
                },
                count: 10,
            })
            .collect(),
        human_slots: 4,
        exit_node: 0,
        ticks: 500,
        seed,
        slip_probability: DEFAULT_SLIP,
        discount: DEFAULT_DISCOUNT,
    }
}

fn gen(nodes: u32, buildings: u32, seed: u64, out: &Path) -> Result<(), Failure> {
    create_dir(out)?;
    let network = Arc::new(generate_network(nodes as usize, buildings as usize, seed));
    save_network(&network, out.join("network.json"))?;
    save_scenario(&default_scenario(network, seed), out.join("scenario.json"))?;
    println!("wrote {} and {}", out.join("network.json").display(), out.join("scenario.json").display());
    Ok(())
}

fn simulate(scenario_path: &Path, ticks: Option<u64>, out: &Path) -> Result<(), Failure> {
    let scenario = load_scenario(scenario_path)?;
    let compilation = compile(&scenario)?;
    let mut world = init_world(&scenario).map_err(Failure::domain)?;
    let ticks = ticks.unwrap_or(scenario.ticks);
    let (mut deviations, mut arrivals, mut exits) = (0usize, 0usize, 0usize);
    for _ in 0..ticks {
        if world.active_count() == 0 {
            break;
        }
        for event in world.step(&compilation).map_err(Failure::domain)? {
            match event {
                Event::Deviated { .. } => deviations += 1,
                Event::Arrived { .. } => arrivals += 1,
                Event::Deactivated { reason, .. } => {
                    exits += usize::from(reason == wayward_core::sim::DeactivationReason::Exited)
                }
            }
        }
    }
    write_log(world.log(), out)?;
    let virtual_agents = world.agents().iter().filter(|a| a.source == Source::Virtual).count();
    println!("agents: {virtual_agents}");
    println!("ticks: {}", world.tick());
    println!("log entries: {}", world.log().len());
    println!("deviations: {deviations}");
    println!("arrivals: {arrivals}");
    println!("exited: {exits}");
    println!("still active: {}", world.active_count());
    Ok(())
}

fn irl(log_path: &Path, scenario_path: &Path, lambda: f64, rmax: f64, out: &Path) -> Result<(), Failure> {
    let scenario = load_scenario(scenario_path)?;
    let log = read_log(log_path)?;
    let compilation = compile(&scenario)?;
    let mdp = &compilation.dynamics;
    let config = IrlConfig { sparsity_weight: lambda, reward_bound: rmax };
    let observed = estimate_policy(&log, mdp.n_states(), mdp.n_actions()).map_err(Failure::named)?;
    let reward = recover_reward(mdp, &observed, &config).map_err(Failure::named)?;
    let report = validate_recovery(mdp, &reward, &observed).map_err(Failure::named)?;
    create_dir(out)?;
    write_json(&out.join("reward.json"), &reward)?;
    write_json(&out.join("validation.json"), &report)?;
    println!("agreement: {}", report.agreement);
    Ok(())
}

fn ingest(gps: &Path, network_path: &Path, scenario: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let network = load_network(network_path)?;
    let (slip, discount, seed) = match scenario {
        Some(p) => {
            let s = load_scenario(p)?;
            (s.slip_probability, s.discount, s.seed)
        }
        None => (DEFAULT_SLIP, DEFAULT_DISCOUNT, 0),
    };
    let compilation = compile_mdp(&network, slip, discount).map_err(Failure::domain)?;
    let trace = read_gps_csv(gps)?;
    let trajectory = ingest_gps(&trace, &network, &compilation)?;
    let mut log = if out.exists() { read_log(out)? } else { TrajectoryLog::new(seed) };
    let agent_id = append_to_log(&mut log, &trajectory);
    write_log(&log, out)?;
    println!("appended {} steps as agent {agent_id}", trajectory.actions.len());
    Ok(())
}

fn reduce(network_path: &Path, out: &Path, mapping_path: Option<&Path>) -> Result<(), Failure> {
    let network = load_network(network_path)?;
    let (reduced, mapping) = reduce_network(&network);
    save_network(&reduced, out)?;
    if let Some(p) = mapping_path {
        write_json(p, &mapping)?;
    }
    println!("nodes: {} -> {}", network.len(), reduced.len());
    println!("edges: {} -> {}", network.edges().len(), reduced.edges().len());
    Ok(())
}

fn serve(scenario_path: &Path, host: &str, port: u16, tick_interval: u64) -> Result<(), Failure> {
    let scenario = load_scenario(scenario_path)?;
    let dir = scenario_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::io)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| Failure { code: 4, message: format!("cannot bind {host}:{port}: {e}") })?;
        let addr = listener.local_addr().map_err(|e| Failure { code: 4, message: e.to_string() })?;
        let server = Server::new(scenario, Duration::from_millis(tick_interval));
        let first = server.create_session(None).map_err(Failure::domain)?;
        println!("listening on http://{addr}");
        println!("session {first}: ws://{addr}/sessions/{first}/ws");
        std::io::stdout().flush().map_err(Failure::io)?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        let logs = server.serve(listener, shutdown).await.map_err(|e| Failure { code: 4, message: e.to_string() })?;
        for (id, log) in logs {
            let path = dir.join(format!("session-{id}.log"));
            write_log(&log, &path)?;
            println!("wrote {}", path.display());
        }
        Ok(())
    })
}
