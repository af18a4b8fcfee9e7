//! `otbridge`: protocol mocks, MCP stdio adapters, and the benchmark
//! pipeline behind one binary so the harness can spawn everything from a
//! single artifact.
//!
//! Exit codes: 0 success, 1 benchmark verification failure, 2 setup error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use otbridge_bench::harness::{run_benchmark, Config};
use otbridge_bench::plan::Suite;
use otbridge_bench::report::generate_report;
use otbridge_bench::verify::verify_dir;

#[derive(Parser)]
#[command(name = "otbridge", version, about = "Industrial protocol adapters with MCP tool surfaces, deterministic mocks, and a benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a deterministic mock endpoint until interrupted.
    Mock {
        #[command(subcommand)]
        which: MockCommand,
    },
    /// Run an MCP adapter as a stdio server until stdin closes.
    Adapter {
        #[command(subcommand)]
        which: AdapterCommand,
    },
    /// Run, report on, or verify the benchmark.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
}

#[derive(Args)]
struct MockArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    port: Option<u16>,
    /// Simulation ticks per second.
    #[arg(long, default_value_t = 1.0)]
    tick_hz: f64,
    /// Freeze the plant dynamics (byte-exact codec testing).
    #[arg(long)]
    no_sim: bool,
}

#[derive(Subcommand)]
enum MockCommand {
    /// Modbus TCP device mock (default port 1502).
    Modbus {
        #[command(flatten)]
        common: MockArgs,
        /// Append the function code of every received frame to this file.
        #[arg(long)]
        frame_log: Option<PathBuf>,
    },
    /// MQTT broker mock with Sparkplug edge-node simulator (default 1883).
    Mqtt {
        #[command(flatten)]
        common: MockArgs,
    },
    /// Node-model plant server mock (default port 4840).
    Ua {
        #[command(flatten)]
        common: MockArgs,
    },
}

#[derive(Subcommand)]
enum AdapterCommand {
    /// 20-tool Modbus adapter (MODBUS_HOST / MODBUS_PORT / MODBUS_WRITES_ENABLED).
    Modbus,
    /// 15-tool MQTT + Sparkplug adapter (MQTT_HOST / MQTT_PORT / MQTT_RECONNECT_INITIAL_S).
    Mqtt,
    /// 7-tool node-model adapter (UA_HOST / UA_PORT or UA_ENDPOINT).
    Ua,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Normal,
    Fault,
    Stress,
    Recovery,
    All,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Execute the benchmark suites and write JSON artifacts.
    Run {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        /// Free-form note recorded in the manifest.
        #[arg(long)]
        seed_note: Option<String>,
        /// Comma-separated task ids to run (e.g. S11,M3).
        #[arg(long)]
        only: Option<String>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 1502)]
        modbus_port: u16,
        #[arg(long, default_value_t = 1883)]
        mqtt_port: u16,
        #[arg(long, default_value_t = 4840)]
        ua_port: u16,
        /// Binary to spawn for mocks and adapters; defaults to this one.
        #[arg(long)]
        binary: Option<PathBuf>,
        /// Ask the Modbus mock to log received function codes here.
        #[arg(long)]
        frame_log: Option<PathBuf>,
    },
    /// Regenerate the Markdown/CSV tables from stored artifacts.
    Report {
        #[arg(long = "in")]
        in_dir: PathBuf,
        #[arg(long = "out")]
        out_dir: PathBuf,
    },
    /// Check a completed run against the pinned structural criteria.
    Verify {
        #[arg(long = "in")]
        in_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Mock { which } => run_mock(which),
        Command::Adapter { which } => run_adapter(which),
        Command::Bench { which } => run_bench(which),
    }
}

fn park_forever() -> ExitCode {
    loop {
        thread::sleep(Duration::from_secs(3600));
    }
}

fn run_mock(which: MockCommand) -> ExitCode {
    match which {
        MockCommand::Modbus { common, frame_log } => {
            let port = common.port.unwrap_or(1502);
            let options = otbridge_modbus::mock::MockOptions {
                sim: !common.no_sim,
                tick_hz: common.tick_hz,
                frame_log,
            };
            match otbridge_modbus::mock::start(&common.host, port, options) {
                Ok(handle) => {
                    eprintln!("modbus mock listening on {}", handle.addr);
                    std::mem::forget(handle);
                    park_forever()
                }
                Err(e) => {
                    eprintln!("failed to start modbus mock: {e}");
                    ExitCode::from(2)
                }
            }
        }
        MockCommand::Mqtt { common } => {
            let port = common.port.unwrap_or(1883);
            match otbridge_mqtt::broker::start(&common.host, port) {
                Ok(handle) => {
                    eprintln!("mqtt broker listening on {}", handle.addr);
                    if !common.no_sim {
                        let sim = otbridge_mqtt::simulator::start(
                            &common.host,
                            handle.addr.port(),
                            otbridge_mqtt::simulator::default_devices(),
                            common.tick_hz,
                        );
                        std::mem::forget(sim);
                    }
                    std::mem::forget(handle);
                    park_forever()
                }
                Err(e) => {
                    eprintln!("failed to start mqtt broker: {e}");
                    ExitCode::from(2)
                }
            }
        }
        MockCommand::Ua { common } => {
            let port = common.port.unwrap_or(4840);
            let options = otbridge_ua::mock::MockOptions { sim: !common.no_sim, tick_hz: common.tick_hz };
            match otbridge_ua::mock::start(&common.host, port, options) {
                Ok(handle) => {
                    eprintln!("ua mock listening on {}", handle.addr);
                    std::mem::forget(handle);
                    park_forever()
                }
                Err(e) => {
                    eprintln!("failed to start ua mock: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

fn run_adapter(which: AdapterCommand) -> ExitCode {
    let result = match which {
        AdapterCommand::Modbus => {
            otbridge_modbus::adapter::serve_stdio(&otbridge_modbus::adapter::AdapterConfig::from_env())
        }
        AdapterCommand::Mqtt => {
            otbridge_mqtt::adapter::serve_stdio(&otbridge_mqtt::adapter::AdapterConfig::from_env())
        }
        AdapterCommand::Ua => otbridge_ua::adapter::serve_stdio(&otbridge_ua::adapter::AdapterConfig::from_env()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adapter terminated: {e}");
            ExitCode::from(2)
        }
    }
}

fn run_bench(which: BenchCommand) -> ExitCode {
    match which {
        BenchCommand::Run {
            suite,
            out,
            seed_note,
            only,
            host,
            modbus_port,
            mqtt_port,
            ua_port,
            binary,
            frame_log,
        } => {
            let binary = binary
                .or_else(|| std::env::current_exe().ok())
                .expect("cannot determine the benchmark binary");
            let mut config = Config::new(binary, out.clone());
            config.host = host;
            config.modbus_port = modbus_port;
            config.mqtt_port = mqtt_port;
            config.ua_port = ua_port;
            config.seed_note = seed_note;
            config.modbus_frame_log = frame_log;
            config.only_tasks =
                only.map(|ids| ids.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect());
            let full_run = suite == SuiteArg::All && config.only_tasks.is_none();
            config.suites = match suite {
                SuiteArg::Normal => vec![Suite::Normal],
                SuiteArg::Fault => vec![Suite::Fault],
                SuiteArg::Stress => vec![Suite::Stress],
                SuiteArg::Recovery => vec![Suite::Recovery],
                SuiteArg::All => Suite::ALL.to_vec(),
            };

            match run_benchmark(&config) {
                Ok(summary) => {
                    println!(
                        "benchmark complete: {} runs recorded into {}",
                        summary.total_runs,
                        summary.out_dir.display()
                    );
                    if full_run {
                        print_verification(&out)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("benchmark setup failed: {e}");
                    ExitCode::from(2)
                }
            }
        }
        BenchCommand::Report { in_dir, out_dir } => match generate_report(&in_dir, &out_dir) {
            Ok(written) => {
                for path in written {
                    println!("wrote {}", path.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("report generation failed: {e}");
                ExitCode::from(2)
            }
        },
        BenchCommand::Verify { in_dir } => print_verification(&in_dir),
    }
}

fn print_verification(dir: &std::path::Path) -> ExitCode {
    match verify_dir(dir) {
        Ok(results) => {
            let mut all_pass = true;
            for result in &results {
                let tag = if result.pass { "PASS" } else { "FAIL" };
                println!("{tag} - {}: {}", result.id, result.detail);
                all_pass &= result.pass;
            }
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("verification could not read artifacts: {e}");
            ExitCode::from(2)
        }
    }
}
