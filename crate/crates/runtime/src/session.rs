//! Session lifecycle: build the bus, start one thread per worker, run the
//! orchestrator (or the workflow controller) on the calling thread, then
//! close the bus and join.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use infoflow_core::prompts::{default_prompt_text, ORCHESTRATOR_FORMAT_NOTE, WORKER_FORMAT_NOTE};
use infoflow_core::script::DEFAULT_SEGMENT_BUDGET;
use infoflow_core::trace::{EventKind, Mode, Payload, TraceEvent};
use infoflow_core::workflow::DEFAULT_MAX_REPLANS;
use infoflow_core::{
    lookup_toolkit, AgentId, AgentRoster, History, Role, Session, SubmissionRecord, ToolSet, TopologyPolicy,
};

use crate::backend::{Backend, RemoteBackend, RemoteConfig, ScriptedBackend};
use crate::bus::Bus;
use crate::error::RunError;
use crate::orchestrator::{orchestrate, OrchestratorConfig};
use crate::scenario::Scenario;
use crate::tools::{StubTools, ToolBox};
use crate::trace::{JsonlSink, Tracer};
use crate::worker::{run_worker, ViewMode, WorkerConfig};
use crate::workflow::{run_workflow, WorkflowConfig};

const CUSTOM_PROMPT: &str = "You are a helpful assistant agent.";

#[derive(Clone, Debug)]
pub struct Settings {
    pub mode: Mode,
    pub seed: u64,
    pub budget: Duration,
    /// Longest single wait of the orchestrator or workflow controller.
    pub wait_timeout: Duration,
    pub worker_poll: Duration,
    pub view: ViewMode,
    pub segment_budget: usize,
    pub max_replans: u32,
    /// Live runs stamp wall-clock offsets and give models the format notes.
    pub live: bool,
    pub trace_path: Option<PathBuf>,
    /// Prompt overrides by role; missing roles use the packaged defaults.
    pub prompts: BTreeMap<Role, String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            mode: Mode::A2a,
            seed: 0,
            budget: Session::DEFAULT_BUDGET,
            wait_timeout: Duration::from_secs(1),
            worker_poll: Duration::from_millis(250),
            view: ViewMode::PerAgent,
            segment_budget: DEFAULT_SEGMENT_BUDGET,
            max_replans: DEFAULT_MAX_REPLANS,
            live: false,
            trace_path: None,
            prompts: BTreeMap::new(),
        }
    }
}

impl Settings {
    pub fn prompt_for(&self, role: Role) -> String {
        self.prompts
            .get(&role)
            .cloned()
            .or_else(|| default_prompt_text(role).map(str::to_string))
            .unwrap_or_else(|| CUSTOM_PROMPT.to_string())
    }
}

/// What a session is about.
#[derive(Clone, Debug)]
pub struct SessionInput {
    pub id: String,
    pub scenario: String,
    pub query: String,
    pub roster: AgentRoster,
    pub expected_answer: Option<String>,
}

impl SessionInput {
    pub fn from_scenario(s: &Scenario, mode: Mode, seed: u64) -> Self {
        Self {
            id: format!("{}-{}-{}", s.name, mode, seed),
            scenario: s.name.clone(),
            query: s.query.clone(),
            roster: s.roster.clone(),
            expected_answer: Some(s.expected_answer.clone()),
        }
    }
}

/// Supplies each agent's decision backend and tool stubs.
pub trait AgentFactory {
    fn backend(&mut self, agent: &AgentId, role: Role, bus: &Bus) -> Result<Box<dyn Backend>, RunError>;
    fn tools(&mut self, agent: &AgentId, role: Role) -> Box<dyn ToolBox>;
}

/// Scripted policies and fixtures from a scenario.
pub struct ScriptedFactory<'a> {
    pub scenario: &'a Scenario,
}

impl AgentFactory for ScriptedFactory<'_> {
    fn backend(&mut self, _agent: &AgentId, role: Role, _bus: &Bus) -> Result<Box<dyn Backend>, RunError> {
        let script = match role {
            Role::Orchestrator => self.scenario.orchestrator.clone(),
            r => self.scenario.script_for(r),
        };
        Ok(Box::new(ScriptedBackend::new(script)))
    }

    fn tools(&mut self, _agent: &AgentId, _role: Role) -> Box<dyn ToolBox> {
        Box::new(StubTools::new(self.scenario.fixtures.clone()))
    }
}

/// A chat-completion endpoint for every agent, with the scenario's fixtures
/// behind the tools.
pub struct RemoteFactory<'a> {
    pub config: RemoteConfig,
    pub scenario: &'a Scenario,
}

impl AgentFactory for RemoteFactory<'_> {
    fn backend(&mut self, _agent: &AgentId, _role: Role, _bus: &Bus) -> Result<Box<dyn Backend>, RunError> {
        Ok(Box::new(RemoteBackend::new(self.config.clone())))
    }

    fn tools(&mut self, _agent: &AgentId, _role: Role) -> Box<dyn ToolBox> {
        Box::new(StubTools::new(self.scenario.fixtures.clone()))
    }
}

#[derive(Clone, Debug)]
pub struct SessionOutcome {
    pub record: SubmissionRecord,
    pub events: Vec<TraceEvent>,
    pub history: History,
    pub elapsed: Duration,
}

fn toolset_for(role: Role) -> ToolSet {
    lookup_toolkit(role).unwrap_or_else(|_| ToolSet { role, tools: Default::default() })
}

fn start_payload(input: &SessionInput, s: &Settings) -> Payload {
    Payload {
        query: Some(input.query.clone()),
        roster: input.roster.entries().to_vec(),
        scenario: Some(input.scenario.clone()),
        seed: Some(s.seed),
        budget_ms: Some(s.budget.as_millis() as u64),
        wait_timeout_ms: Some(s.wait_timeout.as_millis() as u64),
        view: Some(s.view.as_str().to_string()),
        segment_budget: Some(s.segment_budget),
        max_replans: Some(s.max_replans),
        expected_answer: input.expected_answer.clone(),
        ..Payload::default()
    }
}

pub fn run_session(
    input: &SessionInput,
    settings: &Settings,
    factory: &mut dyn AgentFactory,
) -> Result<SessionOutcome, RunError> {
    let mut tracer = Tracer::new(input.id.clone(), settings.mode);
    if settings.live {
        tracer = tracer.live();
    }
    if let Some(path) = &settings.trace_path {
        let sink = JsonlSink::create(path).map_err(|e| RunError::Trace(e.to_string()))?;
        tracer = tracer.with_sink(sink);
    }
    tracer.emit(EventKind::Start, start_payload(input, settings), 0);

    let started = Instant::now();
    let session = Session::new(input.id.clone(), input.query.clone(), input.roster.clone(), settings.budget, Duration::ZERO)
        .map_err(|e| RunError::Setup(e.to_string()))?;
    let orch_id = input.roster.orchestrator().clone();
    let bus = Bus::new(session, TopologyPolicy::star(orch_id.clone()), tracer.clone());

    let orch_handle = bus.register(&orch_id)?;
    let mut workers = Vec::new();
    for entry in input.roster.workers() {
        let handle = bus.register(&entry.name)?;
        let backend = factory.backend(&entry.name, entry.role, &bus)?;
        let tools = factory.tools(&entry.name, entry.role);
        let mut cfg = WorkerConfig::new(entry.role, settings.prompt_for(entry.role), toolset_for(entry.role));
        cfg.view = settings.view;
        cfg.poll = settings.worker_poll;
        cfg.segment_budget = settings.segment_budget;
        if settings.live {
            cfg.format_note = Some(WORKER_FORMAT_NOTE.to_string());
        }
        workers.push((handle, backend, tools, cfg));
    }
    let mut orch_backend = match settings.mode {
        Mode::A2a => Some(factory.backend(&orch_id, Role::Orchestrator, &bus)?),
        Mode::Workflow => None,
    };

    let result = thread::scope(|scope| {
        let joins: Vec<_> = workers
            .into_iter()
            .map(|(handle, mut backend, mut tools, cfg)| {
                let name = handle.agent().to_string();
                let join = scope.spawn(move || run_worker(&handle, backend.as_mut(), tools.as_mut(), &cfg));
                (name, join)
            })
            .collect();

        let outcome = match orch_backend.as_mut() {
            Some(backend) => {
                let mut cfg =
                    OrchestratorConfig::new(settings.prompt_for(Role::Orchestrator), settings.budget, settings.wait_timeout);
                cfg.segment_budget = settings.segment_budget;
                if settings.live {
                    cfg.format_note = Some(ORCHESTRATOR_FORMAT_NOTE.to_string());
                }
                orchestrate(&orch_handle, backend.as_mut(), &cfg, started)
            }
            None => {
                let cfg = WorkflowConfig {
                    budget: settings.budget,
                    wait_slice: settings.wait_timeout,
                    max_replans: settings.max_replans,
                };
                run_workflow(&orch_handle, &cfg, started)
            }
        };
        bus.close();

        let mut worker_error = None;
        for (name, join) in joins {
            let err = match join.join() {
                Ok(Ok(())) => None,
                Ok(Err(e)) => Some(RunError::Worker { agent: name, message: e.to_string() }),
                Err(_) => Some(RunError::Worker { agent: name, message: "thread panicked".into() }),
            };
            if worker_error.is_none() {
                worker_error = err;
            }
        }
        match (outcome, worker_error) {
            (Err(e), _) => Err(e),
            (Ok(_), Some(e)) => Err(e),
            (Ok(r), None) => Ok(r),
        }
    });
    let elapsed = started.elapsed();

    tracer.close().map_err(|e| RunError::Trace(e.to_string()))?;
    if let Some(f) = tracer.failure() {
        return Err(RunError::Trace(f));
    }
    let record = result?;
    Ok(SessionOutcome { record, events: tracer.events(), history: bus.history(), elapsed })
}
