//! The sandboxed policy language: a small block-structured language with one
//! `init` block and one `schedule(failures, pipelines)` block.
//!
//! Programs are parsed, statically validated, and run by a tree-walking
//! interpreter with a per-invocation step budget. The interpreter can only
//! read the executor view it is handed and emit `assign`/`suspend` decisions;
//! it has no access to files, network, clocks, or randomness.

pub mod ast;
mod fifo;
mod interp;
mod lexer;
mod parser;
mod printer;
mod validate;
mod value;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{ExecutorView, FailureNotice, PipelineSpec, Policy, ScheduleResult};

pub use fifo::{native_fifo, FifoState, NativeFifo};
pub use validate::{builtin, Builtin, BUILTINS};
pub use value::Value;

use ast::{Program, Span};
use interp::Interp;

/// Default step budget for one `init` or `schedule` invocation.
pub const DEFAULT_MAX_STEPS: u64 = 200_000;

/// Source of the shipped FIFO baseline.
pub const FIFO_SOURCE: &str = include_str!("../../policies/fifo.pol");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Parse,
    Static,
    Runtime,
    Budget,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Parse => "parse",
            ErrorKind::Static => "static",
            ErrorKind::Runtime => "runtime",
            ErrorKind::Budget => "budget",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
pub struct InterpError {
    pub kind: ErrorKind,
    pub message: String,
    pub line: Option<u32>,
    pub column: Option<u32>,
    pub hint: String,
}

impl fmt::Display for InterpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error", self.kind)?;
        if let (Some(line), Some(column)) = (self.line, self.column) {
            write!(f, " at line {line}, column {column}")?;
        }
        write!(f, ": {}", self.message)?;
        if !self.hint.is_empty() {
            write!(f, " (hint: {})", self.hint)?;
        }
        Ok(())
    }
}

impl InterpError {
    fn new(kind: ErrorKind, span: Span, message: impl Into<String>, hint: impl Into<String>) -> Self {
        InterpError {
            kind,
            message: message.into(),
            line: Some(span.line),
            column: Some(span.column),
            hint: hint.into(),
        }
    }

    pub fn parse(span: Span, message: impl Into<String>, hint: impl Into<String>) -> Self {
        Self::new(ErrorKind::Parse, span, message, hint)
    }

    pub fn static_(span: Span, message: impl Into<String>, hint: impl Into<String>) -> Self {
        Self::new(ErrorKind::Static, span, message, hint)
    }

    pub fn runtime(span: Span, message: impl Into<String>, hint: impl Into<String>) -> Self {
        Self::new(ErrorKind::Runtime, span, message, hint)
    }

    pub fn budget(span: Span, message: impl Into<String>, hint: impl Into<String>) -> Self {
        Self::new(ErrorKind::Budget, span, message, hint)
    }
}

/// A parsed policy together with the text it came from.
#[derive(Clone, Debug)]
pub struct PolicyProgram {
    pub source: String,
    pub ast: Program,
}

impl PolicyProgram {
    pub fn parse(source: &str) -> Result<Self, InterpError> {
        Ok(PolicyProgram {
            source: source.to_string(),
            ast: parser::parse_program(source)?,
        })
    }

    pub fn validate(&self) -> Result<(), InterpError> {
        validate::validate_program(&self.ast)
    }

    /// Parse then validate.
    pub fn load(source: &str) -> Result<Self, InterpError> {
        let program = Self::parse(source)?;
        program.validate()?;
        Ok(program)
    }

    /// The FIFO baseline shipped with the crate.
    pub fn fifo() -> Self {
        Self::load(FIFO_SOURCE).expect("shipped FIFO policy is valid")
    }

    /// Canonical source text for the AST.
    pub fn pretty(&self) -> String {
        self.ast.to_string()
    }
}

pub fn parse(source: &str) -> Result<PolicyProgram, InterpError> {
    PolicyProgram::parse(source)
}

pub fn validate_program(program: &PolicyProgram) -> Result<(), InterpError> {
    program.validate()
}

/// Persistent `state` record of a policy, carried across ticks.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PolicyState {
    slots: Arc<BTreeMap<String, Value>>,
}

impl PolicyState {
    pub(crate) fn from_record(slots: Arc<BTreeMap<String, Value>>) -> Self {
        PolicyState { slots }
    }

    pub(crate) fn into_record(self) -> Arc<BTreeMap<String, Value>> {
        self.slots
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.slots.get(name)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.keys().map(String::as_str)
    }
}

/// Runs the `init` block once, yielding the starting state.
pub fn run_init(program: &PolicyProgram, max_steps: u64) -> Result<PolicyState, InterpError> {
    let mut interp = Interp::new(PolicyState::default(), max_steps, None);
    interp.run_block(&program.ast.init, Vec::new())?;
    Ok(interp.finish().1)
}

/// Runs the `schedule` block for one tick.
pub fn run_schedule(
    program: &PolicyProgram,
    state: PolicyState,
    failures: &[FailureNotice],
    new_pipelines: &[&PipelineSpec],
    view: &ExecutorView<'_>,
    max_steps: u64,
) -> Result<(ScheduleResult, PolicyState), InterpError> {
    let failures = Value::list(failures.iter().map(interp::failure_value).collect());
    let pipelines = Value::list(new_pipelines.iter().map(|p| interp::pipeline_value(view, p)).collect());
    let mut interp = Interp::new(state, max_steps, Some(view));
    interp.run_block(
        &program.ast.schedule,
        vec![("failures".to_string(), failures), ("pipelines".to_string(), pipelines)],
    )?;
    Ok(interp.finish())
}

/// An interpreted policy bound to its persistent state, usable as a [`Policy`].
#[derive(Clone, Debug)]
pub struct PolicyInstance {
    program: Arc<PolicyProgram>,
    state: PolicyState,
    max_steps: u64,
}

impl PolicyInstance {
    /// Runs `init` and returns a policy ready for tick 0.
    pub fn new(program: Arc<PolicyProgram>, max_steps: u64) -> Result<Self, InterpError> {
        let state = run_init(&program, max_steps)?;
        Ok(PolicyInstance {
            program,
            state,
            max_steps,
        })
    }

    pub fn state(&self) -> &PolicyState {
        &self.state
    }
}

impl Policy for PolicyInstance {
    fn schedule(
        &mut self,
        failures: &[FailureNotice],
        arrived: &[&PipelineSpec],
        view: &ExecutorView<'_>,
    ) -> Result<ScheduleResult, InterpError> {
        let state = std::mem::take(&mut self.state);
        let (result, state) = run_schedule(&self.program, state, failures, arrived, view, self.max_steps)?;
        self.state = state;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{init_sim, OpSpec, SimConfig, WorkloadClass};

    fn program(init: &str, schedule: &str) -> PolicyProgram {
        PolicyProgram::load(&format!(
            "init {{\n{init}\n}}\nschedule(failures, pipelines) {{\n{schedule}\n}}\n"
        ))
        .unwrap()
    }

    fn single_op_trace() -> Vec<PipelineSpec> {
        vec![PipelineSpec {
            pipeline_id: 0,
            arrival_tick: 0,
            workload_class: WorkloadClass::Interactive,
            ops: vec![OpSpec {
                op_id: 0,
                pipeline_id: 0,
                cpu_req: 2,
                mem_req: 100,
                duration: 3,
                deps: vec![],
            }],
            timeout: 10,
        }]
    }

    #[test]
    fn fifo_init_creates_waiting_queue() {
        let state = run_init(&PolicyProgram::fifo(), DEFAULT_MAX_STEPS).unwrap();
        assert_eq!(state.len(), 1);
        assert_eq!(state.get("waiting_queue"), Some(&Value::list(vec![])));
    }

    #[test]
    fn empty_init_gives_empty_state() {
        let state = run_init(&program("", ""), DEFAULT_MAX_STEPS).unwrap();
        assert!(state.is_empty());
    }

    #[test]
    fn runaway_init_hits_budget() {
        let p = program(
            "for i in range(100) { for j in range(100) { for k in range(100) { let x = 1; } } }",
            "",
        );
        let err = run_init(&p, DEFAULT_MAX_STEPS).unwrap_err();
        assert_eq!(err.kind, ErrorKind::Budget);
    }

    #[test]
    fn huge_range_is_charged_before_allocation() {
        let p = program("let xs = range(1000000000000);", "");
        assert_eq!(run_init(&p, DEFAULT_MAX_STEPS).unwrap_err().kind, ErrorKind::Budget);
    }

    #[test]
    fn fifo_program_assigns_the_ready_op() {
        let trace = single_op_trace();
        let config = SimConfig::uniform(1, 4, 1000, 100, 10);
        let mut sim = init_sim(&trace, config).unwrap();
        // deliver tick 0 through the simulator, then call the program directly
        struct Capture(Option<ScheduleResult>, PolicyState);
        impl Policy for Capture {
            fn schedule(
                &mut self,
                failures: &[FailureNotice],
                arrived: &[&PipelineSpec],
                view: &ExecutorView<'_>,
            ) -> Result<ScheduleResult, InterpError> {
                let fifo = PolicyProgram::fifo();
                let (r, s) = run_schedule(&fifo, self.1.clone(), failures, arrived, view, DEFAULT_MAX_STEPS)?;
                self.0 = Some(r.clone());
                self.1 = s;
                Ok(r)
            }
        }
        let mut cap = Capture(None, run_init(&PolicyProgram::fifo(), DEFAULT_MAX_STEPS).unwrap());
        sim.step(&mut cap).unwrap();
        let result = cap.0.unwrap();
        assert!(result.suspensions.is_empty());
        assert_eq!(
            result.assignments,
            vec![crate::sim::Assignment { op_id: 0, pool_id: 0 }]
        );
    }

    #[test]
    fn no_pipelines_no_capacity_gives_nothing() {
        let trace: Vec<PipelineSpec> = vec![];
        let sim = init_sim(&trace, SimConfig::uniform(1, 4, 1000, 100, 10)).unwrap();
        let fifo = PolicyProgram::fifo();
        let state = run_init(&fifo, DEFAULT_MAX_STEPS).unwrap();
        let (r, s) = run_schedule(&fifo, state.clone(), &[], &[], &sim.view(), DEFAULT_MAX_STEPS).unwrap();
        assert_eq!(r, ScheduleResult::default());
        assert_eq!(s, state);
    }

    #[test]
    fn out_of_range_index_reports_span() {
        let p = program("", "let xs = [1, 2];\nlet y = xs[5];");
        let trace: Vec<PipelineSpec> = vec![];
        let sim = init_sim(&trace, SimConfig::uniform(1, 4, 1000, 100, 10)).unwrap();
        let err = run_schedule(&p, PolicyState::default(), &[], &[], &sim.view(), DEFAULT_MAX_STEPS).unwrap_err();
        assert_eq!(err.kind, ErrorKind::Runtime);
        assert_eq!(err.line, Some(6));
        assert!(err.message.contains("out of range"));
    }

    #[test]
    fn runtime_semantics() {
        let p = program(
            "state.xs = [3, 1, 2];\n\
             state.r = { a: 1 };\n\
             state.r.b = state.r.a + 1;\n\
             append(state.xs, 7);\n\
             let first = remove_at(state.xs, 0);\n\
             state.first = first;\n\
             state.sorted = sort_by([{k: 2, n: \"x\"}, {k: 1, n: \"y\"}, {k: 2, n: \"z\"}], \"k\", false);\n\
             state.flags = [1 < 2, \"a\" < \"b\", not (1 == 2), 7 % 4 == 3, floor(2.5) == 2, ceil(2.1) == 3, min(1, 2) == 1, max(1, 2) == 2];\n\
             if len(state.xs) == 3 and state.xs[2] == 7 { state.ok = true; } else { state.ok = false; }",
            "",
        );
        let state = run_init(&p, DEFAULT_MAX_STEPS).unwrap();
        let num = Value::Number;
        assert_eq!(state.get("xs"), Some(&Value::list(vec![num(1.0), num(2.0), num(7.0)])));
        assert_eq!(state.get("first"), Some(&num(3.0)));
        assert_eq!(state.get("r").unwrap().field("b"), Some(&num(2.0)));
        assert_eq!(state.get("ok"), Some(&Value::Bool(true)));
        let Value::List(flags) = state.get("flags").unwrap() else {
            panic!()
        };
        assert!(flags.iter().all(|f| *f == Value::Bool(true)));
        let Value::List(sorted) = state.get("sorted").unwrap() else {
            panic!()
        };
        let names: Vec<_> = sorted.iter().map(|r| r.field("n").unwrap().to_string()).collect();
        assert_eq!(names, ["\"x\"", "\"z\"", "\"y\""]);
    }

    #[test]
    fn values_are_copied_not_aliased() {
        let p = program("state.a = [1];\nlet b = state.a;\nappend(b, 2);\nstate.b = b;", "");
        let state = run_init(&p, DEFAULT_MAX_STEPS).unwrap();
        assert_eq!(state.get("a"), Some(&Value::list(vec![Value::Number(1.0)])));
        assert_eq!(
            state.get("b").map(|v| match v {
                Value::List(l) => l.len(),
                _ => 0,
            }),
            Some(2)
        );
    }

    #[test]
    fn runtime_type_errors() {
        for body in [
            "let x = 1 + \"a\";",
            "let x = 1 == \"a\";",
            "let x = [1] < [2];",
            "let x = 1 / 0;",
            "if 1 { }",
            "let r = {}; let y = r.missing;",
            "for x in 3 { }",
        ] {
            let p = program(body, "");
            let err = run_init(&p, DEFAULT_MAX_STEPS).unwrap_err();
            assert_eq!(err.kind, ErrorKind::Runtime, "{body}");
            assert!(err.line.is_some());
        }
    }

    #[test]
    fn error_display_includes_position_and_hint() {
        let err = PolicyProgram::parse("init {").unwrap_err();
        let text = err.to_string();
        assert!(text.starts_with("parse error at line 1, column 7"), "{text}");
        assert!(text.contains("hint:"));
    }
}
