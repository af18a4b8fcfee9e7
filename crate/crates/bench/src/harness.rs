//! Orchestration: launches the three mocks and four adapter sessions as
//! child processes, executes the suites in fixed order, and writes the
//! JSON artifacts.

use std::collections::BTreeMap;
use std::net::TcpStream;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::Barrier;
use std::thread;
use std::time::{Duration, Instant};

use otbridge_core::mcp::{open_session, LaunchSpec, Session};
use serde_json::json;

use crate::artifact::{
    epoch_ms, suite_file_name, write_json, CallRecord, EventRecord, Manifest, RecoveryArtifact,
    RecoveryRecord, RunRecord, SuiteArtifact,
};
use crate::oracle;
use crate::plan::{load_plan, substitute, CallStep, Family, SessionKey, Step, Suite, TaskSpec};

pub const DEFAULT_CALL_TIMEOUT_MS: u64 = 10_000;
const READINESS_TIMEOUT_MS: u64 = 5_000;
const RECOVERY_DOWNTIME_MS: u64 = 200;
const RECOVERY_WINDOW_MS: u64 = 3_000;
const RECOVERY_POLL_MS: u64 = 250;

#[derive(Debug, Clone)]
pub struct Config {
    /// The multiplexed binary that provides `mock ...` and `adapter ...`.
    pub binary: PathBuf,
    pub out_dir: PathBuf,
    pub host: String,
    pub modbus_port: u16,
    pub mqtt_port: u16,
    pub ua_port: u16,
    pub suites: Vec<Suite>,
    /// Restrict execution to these task ids (debugging and focused checks).
    pub only_tasks: Option<Vec<String>>,
    pub call_timeout_ms: u64,
    pub seed_note: Option<String>,
    /// Extra environment for the MQTT adapter (reconnect tuning).
    pub mqtt_adapter_env: Vec<(String, String)>,
    /// When set, the Modbus mock logs received function codes to this file.
    pub modbus_frame_log: Option<PathBuf>,
}

impl Config {
    pub fn new(binary: PathBuf, out_dir: PathBuf) -> Config {
        Config {
            binary,
            out_dir,
            host: "127.0.0.1".to_string(),
            modbus_port: 1502,
            mqtt_port: 1883,
            ua_port: 4840,
            suites: Suite::ALL.to_vec(),
            only_tasks: None,
            call_timeout_ms: DEFAULT_CALL_TIMEOUT_MS,
            seed_note: None,
            mqtt_adapter_env: Vec::new(),
            modbus_frame_log: None,
        }
    }

    fn port_of(&self, family: Family) -> u16 {
        match family {
            Family::Modbus => self.modbus_port,
            Family::Mqtt => self.mqtt_port,
            Family::Ua => self.ua_port,
            Family::Cross => unreachable!("cross has no endpoint"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("failed to launch {what}: {detail}")]
    Launch { what: String, detail: String },
    #[error("endpoint {endpoint} did not become ready within {timeout_ms} ms")]
    Readiness { endpoint: String, timeout_ms: u64 },
    #[error("artifact write failed: {0}")]
    Artifact(#[from] crate::artifact::ArtifactError),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

struct MockManager<'a> {
    config: &'a Config,
    children: BTreeMap<&'static str, Child>,
}

impl<'a> MockManager<'a> {
    fn new(config: &'a Config) -> MockManager<'a> {
        MockManager { config, children: BTreeMap::new() }
    }

    fn mock_name(family: Family) -> &'static str {
        match family {
            Family::Modbus => "modbus",
            Family::Mqtt => "mqtt",
            Family::Ua => "ua",
            Family::Cross => unreachable!(),
        }
    }

    fn start(&mut self, family: Family) -> Result<(), SetupError> {
        let name = Self::mock_name(family);
        let port = self.config.port_of(family);
        let mut command = Command::new(&self.config.binary);
        command
            .arg("mock")
            .arg(name)
            .arg("--host")
            .arg(&self.config.host)
            .arg("--port")
            .arg(port.to_string())
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::inherit());
        if family == Family::Modbus {
            if let Some(path) = &self.config.modbus_frame_log {
                command.arg("--frame-log").arg(path);
            }
        }
        let child = command.spawn().map_err(|e| SetupError::Launch {
            what: format!("{name} mock"),
            detail: e.to_string(),
        })?;
        self.children.insert(name, child);
        self.wait_ready(family)
    }

    fn wait_ready(&self, family: Family) -> Result<(), SetupError> {
        let endpoint = format!("{}:{}", self.config.host, self.config.port_of(family));
        let deadline = Instant::now() + Duration::from_millis(READINESS_TIMEOUT_MS);
        loop {
            match TcpStream::connect(&endpoint) {
                Ok(_) => return Ok(()),
                Err(_) if Instant::now() < deadline => thread::sleep(Duration::from_millis(25)),
                Err(_) => {
                    return Err(SetupError::Readiness { endpoint, timeout_ms: READINESS_TIMEOUT_MS })
                }
            }
        }
    }

    /// Kills the mock process; the kernel closes its sockets immediately,
    /// so the port refuses connections right away.
    fn stop(&mut self, family: Family) {
        if let Some(mut child) = self.children.remove(Self::mock_name(family)) {
            let _ = child.kill();
            let _ = child.wait();
        }
    }

    fn stop_all(&mut self) {
        for family in [Family::Modbus, Family::Mqtt, Family::Ua] {
            self.stop(family);
        }
    }
}

impl Drop for MockManager<'_> {
    fn drop(&mut self) {
        self.stop_all();
    }
}

struct Sessions {
    modbus_rw: Session,
    modbus_ro: Session,
    mqtt: Session,
    ua: Session,
    specs: BTreeMap<&'static str, LaunchSpec>,
}

impl Sessions {
    fn launch_spec(config: &Config, key: SessionKey) -> LaunchSpec {
        let binary = config.binary.to_string_lossy().to_string();
        match key {
            SessionKey::ModbusRw => LaunchSpec::new(&binary, &["adapter", "modbus"], "modbus")
                .env("MODBUS_HOST", &config.host)
                .env("MODBUS_PORT", &config.modbus_port.to_string()),
            SessionKey::ModbusRo => LaunchSpec::new(&binary, &["adapter", "modbus"], "modbus")
                .env("MODBUS_HOST", &config.host)
                .env("MODBUS_PORT", &config.modbus_port.to_string())
                .env("MODBUS_WRITES_ENABLED", "false"),
            SessionKey::Mqtt => {
                let mut spec = LaunchSpec::new(&binary, &["adapter", "mqtt"], "mqtt")
                    .env("MQTT_HOST", &config.host)
                    .env("MQTT_PORT", &config.mqtt_port.to_string());
                for (key, value) in &config.mqtt_adapter_env {
                    spec = spec.env(key, value);
                }
                spec
            }
            SessionKey::Ua => LaunchSpec::new(&binary, &["adapter", "ua"], "ua")
                .env("UA_HOST", &config.host)
                .env("UA_PORT", &config.ua_port.to_string()),
        }
    }

    fn open(config: &Config) -> Result<Sessions, SetupError> {
        let open_one = |key: SessionKey, what: &str| {
            open_session(&Self::launch_spec(config, key)).map_err(|e| SetupError::Launch {
                what: what.to_string(),
                detail: e.to_string(),
            })
        };
        let mut specs = BTreeMap::new();
        specs.insert("modbus_rw", Self::launch_spec(config, SessionKey::ModbusRw));
        specs.insert("modbus_ro", Self::launch_spec(config, SessionKey::ModbusRo));
        specs.insert("mqtt", Self::launch_spec(config, SessionKey::Mqtt));
        specs.insert("ua", Self::launch_spec(config, SessionKey::Ua));
        Ok(Sessions {
            modbus_rw: open_one(SessionKey::ModbusRw, "modbus read-write adapter")?,
            modbus_ro: open_one(SessionKey::ModbusRo, "modbus read-only adapter")?,
            mqtt: open_one(SessionKey::Mqtt, "mqtt adapter")?,
            ua: open_one(SessionKey::Ua, "ua adapter")?,
            specs,
        })
    }

    fn get(&self, key: SessionKey) -> &Session {
        match key {
            SessionKey::ModbusRw => &self.modbus_rw,
            SessionKey::ModbusRo => &self.modbus_ro,
            SessionKey::Mqtt => &self.mqtt,
            SessionKey::Ua => &self.ua,
        }
    }

    fn fresh_spec(&self, key: SessionKey) -> &LaunchSpec {
        match key {
            SessionKey::ModbusRw => &self.specs["modbus_rw"],
            SessionKey::ModbusRo => &self.specs["modbus_ro"],
            SessionKey::Mqtt => &self.specs["mqtt"],
            SessionKey::Ua => &self.specs["ua"],
        }
    }

    fn close_all(&self) {
        self.modbus_rw.close();
        self.modbus_ro.close();
        self.mqtt.close();
        self.ua.close();
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Issues one planned call and records what came back. Session-level
/// failures become internal-class envelopes so the oracle judges them as
/// run failures rather than aborting the suite.
fn execute_call(
    sessions: &Sessions,
    call: &CallStep,
    repetition: u32,
    timeout_ms: u64,
    run_start: Instant,
    parallel_group: Option<u32>,
) -> CallRecord {
    let args = substitute(&call.args, repetition);
    let session = sessions.get(call.session);
    let started_offset_ms = elapsed_ms(run_start);
    let (envelope, harness_latency_ms) = match session.call(&call.tool, &args, timeout_ms) {
        Ok(outcome) => (
            serde_json::to_value(&outcome.envelope).expect("envelope serializes"),
            outcome.harness_latency_ms,
        ),
        Err(e) => (
            json!({
                "success": false,
                "data": null,
                "error": {"class": "internal", "message": format!("session failure: {e}")},
                "meta": {"latency_ms": 0.0, "endpoint": "stdio", "attempts": 1, "protocol": session.protocol()},
            }),
            elapsed_ms(run_start) - started_offset_ms,
        ),
    };
    CallRecord {
        session: call.session,
        tool: call.tool.clone(),
        args,
        envelope,
        harness_latency_ms,
        started_offset_ms,
        ended_offset_ms: elapsed_ms(run_start),
        parallel_group,
        expected_outcome_met: false,
    }
}

fn run_task_once(
    config: &Config,
    sessions: &Sessions,
    mocks: &mut MockManager,
    task: &TaskSpec,
    repetition: u32,
) -> Result<RunRecord, SetupError> {
    let run_start = Instant::now();
    let started_at_epoch_ms = epoch_ms();
    let mut calls: Vec<CallRecord> = Vec::new();
    let mut events: Vec<EventRecord> = Vec::new();
    let mut task_latency_ms = 0.0;
    let mut parallel_group_counter = 0u32;

    for step in &task.steps {
        match step {
            Step::Call(call) => {
                let record = execute_call(sessions, call, repetition, config.call_timeout_ms, run_start, None);
                task_latency_ms += record.harness_latency_ms;
                calls.push(record);
            }
            Step::Parallel(parallel_calls) => {
                let group = parallel_group_counter;
                parallel_group_counter += 1;
                let barrier = Barrier::new(parallel_calls.len());
                let mut results: Vec<Option<CallRecord>> = Vec::new();
                results.resize_with(parallel_calls.len(), || None);
                thread::scope(|scope| {
                    let mut handles = Vec::new();
                    for call in parallel_calls.iter() {
                        let barrier = &barrier;
                        handles.push(scope.spawn(move || {
                            barrier.wait();
                            execute_call(sessions, call, repetition, config.call_timeout_ms, run_start, Some(group))
                        }));
                    }
                    for (slot, handle) in results.iter_mut().zip(handles) {
                        *slot = Some(handle.join().expect("parallel call thread"));
                    }
                });
                let group_records: Vec<CallRecord> = results.into_iter().flatten().collect();
                let group_max = group_records
                    .iter()
                    .map(|r| r.harness_latency_ms)
                    .fold(0.0f64, f64::max);
                task_latency_ms += group_max;
                calls.extend(group_records);
            }
            Step::StopMock(family) => {
                mocks.stop(*family);
                events.push(EventRecord { kind: format!("stop_mock_{}", family.as_str()), at_offset_ms: elapsed_ms(run_start) });
            }
            Step::RestartMock(family) => {
                mocks.start(*family)?;
                events.push(EventRecord {
                    kind: format!("restart_mock_{}", family.as_str()),
                    at_offset_ms: elapsed_ms(run_start),
                });
            }
            Step::WaitMs(ms) => {
                thread::sleep(Duration::from_millis(*ms));
                events.push(EventRecord { kind: format!("wait_{ms}ms"), at_offset_ms: elapsed_ms(run_start) });
            }
        }
    }

    let mut record = RunRecord {
        task_id: task.id.clone(),
        suite: task.suite,
        family: task.family,
        repetition,
        started_at_epoch_ms,
        calls,
        events,
        task_latency_ms,
        pass: false,
        failure_reason: None,
    };
    let verdict = oracle::evaluate(task, &record);
    for (call, met) in record.calls.iter_mut().zip(&verdict.per_call) {
        call.expected_outcome_met = *met;
    }
    record.pass = verdict.pass;
    record.failure_reason = verdict.failure_reason;
    Ok(record)
}

fn run_recovery_trial(
    config: &Config,
    sessions: &Sessions,
    mocks: &mut MockManager,
    task: &TaskSpec,
    trial: u32,
) -> Result<RecoveryRecord, SetupError> {
    let call = match &task.steps[0] {
        Step::Call(call) => call,
        _ => unreachable!("recovery tasks are single calls"),
    };
    let session = sessions.get(call.session);
    let args = substitute(&call.args, trial);
    let trial_start = Instant::now();
    let mut phases: BTreeMap<String, f64> = BTreeMap::new();

    // phase 1: baseline must succeed
    let baseline = session.call(&call.tool, &args, config.call_timeout_ms);
    let baseline_ok = baseline.as_ref().map(|o| o.envelope.success).unwrap_or(false);
    phases.insert("baseline_ms".to_string(), elapsed_ms(trial_start));

    // phase 2: stop the endpoint, probe must fail; its latency is the
    // detection latency
    mocks.stop(task.family);
    phases.insert("stopped_ms".to_string(), elapsed_ms(trial_start));
    let probe = session.call(&call.tool, &args, config.call_timeout_ms);
    let detect_latency_ms = probe.as_ref().map(|o| o.harness_latency_ms).unwrap_or(0.0);
    phases.insert("detected_ms".to_string(), elapsed_ms(trial_start));

    // phase 3: restart after a short hold, then readiness-poll
    thread::sleep(Duration::from_millis(RECOVERY_DOWNTIME_MS));
    mocks.start(task.family)?;
    phases.insert("restarted_ms".to_string(), elapsed_ms(trial_start));

    // phase 4: same-session polling inside the post-restart window
    let mut same_session_recovered = false;
    let mut same_session_latency_ms = None;
    let window_deadline = Instant::now() + Duration::from_millis(RECOVERY_WINDOW_MS);
    loop {
        match session.call(&call.tool, &args, config.call_timeout_ms) {
            Ok(outcome) if outcome.envelope.success => {
                same_session_recovered = true;
                same_session_latency_ms = Some(outcome.harness_latency_ms);
                phases.insert("same_session_ok_ms".to_string(), elapsed_ms(trial_start));
                break;
            }
            _ => {
                if Instant::now() >= window_deadline {
                    break;
                }
                thread::sleep(Duration::from_millis(RECOVERY_POLL_MS));
            }
        }
    }

    // phase 5: fresh-session check, measured every trial
    let fresh_session_recovered = match open_session(sessions.fresh_spec(call.session)) {
        Ok(fresh) => {
            let ok = fresh
                .call(&call.tool, &args, config.call_timeout_ms)
                .map(|o| o.envelope.success)
                .unwrap_or(false);
            fresh.close();
            ok
        }
        Err(_) => false,
    };
    phases.insert("fresh_checked_ms".to_string(), elapsed_ms(trial_start));

    Ok(RecoveryRecord {
        task_id: task.id.clone(),
        family: task.family,
        trial,
        baseline_ok,
        detect_latency_ms,
        same_session_recovered,
        same_session_latency_ms,
        fresh_session_recovered,
        phases,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RunSummary {
    pub total_runs: usize,
    pub passed: usize,
    pub failed_tasks: Vec<String>,
    pub out_dir: PathBuf,
}

/// Runs the configured suites in fixed order and writes one artifact per
/// suite plus the manifest. A setup failure aborts before anything is
/// written.
pub fn run_benchmark(config: &Config) -> Result<RunSummary, SetupError> {
    std::fs::create_dir_all(&config.out_dir)?;
    let plan = load_plan();
    let selected = |task: &&TaskSpec| -> bool {
        config
            .only_tasks
            .as_ref()
            .map(|only| only.iter().any(|id| id == &task.id))
            .unwrap_or(true)
    };

    let mut mocks = MockManager::new(config);
    mocks.start(Family::Modbus)?;
    mocks.start(Family::Mqtt)?;
    mocks.start(Family::Ua)?;
    let sessions = Sessions::open(config)?;
    // the MQTT adapter connects in the background; give the broker link a
    // moment so the first broker_info reflects a settled connection
    thread::sleep(Duration::from_millis(300));

    let mut suite_records: BTreeMap<Suite, Vec<RunRecord>> = BTreeMap::new();
    let mut recovery_records: Vec<RecoveryRecord> = Vec::new();

    for suite in Suite::ALL {
        if !config.suites.contains(&suite) {
            continue;
        }
        let tasks: Vec<&TaskSpec> = plan.iter().filter(|t| t.suite == suite).filter(selected).collect();
        for task in tasks {
            for repetition in 0..task.repetitions {
                if suite == Suite::Recovery {
                    let record = run_recovery_trial(config, &sessions, &mut mocks, task, repetition)?;
                    recovery_records.push(record);
                } else {
                    let record = run_task_once(config, &sessions, &mut mocks, task, repetition)?;
                    suite_records.entry(suite).or_default().push(record);
                }
            }
        }
    }

    sessions.close_all();
    mocks.stop_all();

    // write artifacts only after a complete run
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total_runs = 0usize;
    let mut passed = 0usize;
    let mut failed_tasks: Vec<String> = Vec::new();
    for (suite, records) in &suite_records {
        counts.insert(suite.as_str().to_string(), records.len());
        total_runs += records.len();
        passed += records.iter().filter(|r| r.pass).count();
        for record in records.iter().filter(|r| !r.pass) {
            if !failed_tasks.contains(&record.task_id) {
                failed_tasks.push(record.task_id.clone());
            }
        }
        write_json(
            &config.out_dir.join(suite_file_name(*suite)),
            &SuiteArtifact { suite: *suite, records: records.clone() },
        )?;
    }
    if config.suites.contains(&Suite::Recovery) {
        counts.insert(Suite::Recovery.as_str().to_string(), recovery_records.len());
        total_runs += recovery_records.len();
        passed += recovery_records
            .iter()
            .filter(|r| r.baseline_ok && r.fresh_session_recovered)
            .count();
        write_json(
            &config.out_dir.join(suite_file_name(Suite::Recovery)),
            &RecoveryArtifact { suite: Suite::Recovery, records: recovery_records },
        )?;
    }

    let manifest = Manifest {
        created_at_epoch_ms: epoch_ms(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: json!({
            "host": config.host,
            "modbus_port": config.modbus_port,
            "mqtt_port": config.mqtt_port,
            "ua_port": config.ua_port,
            "suites": config.suites.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            "only_tasks": config.only_tasks,
            "seed_note": config.seed_note,
        }),
        counts,
        total_runs,
    };
    write_json(&config.out_dir.join("manifest.json"), &manifest)?;

    Ok(RunSummary { total_runs, passed, failed_tasks, out_dir: config.out_dir.clone() })
}
