use std::collections::HashSet;

use super::ast::*;
use super::InterpError;

pub struct Builtin {
    pub name: &'static str,
    pub arity: usize,
    /// Needs the executor or emits decisions, so only callable inside `schedule`.
    pub schedule_only: bool,
    /// First argument is a place that the call mutates.
    pub mutates_first: bool,
    pub signature: &'static str,
    pub doc: &'static str,
}

pub const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "len",
        arity: 1,
        schedule_only: false,
        mutates_first: false,
        signature: "len(x)",
        doc: "number of elements of a list or record, or characters of a string",
    },
    Builtin {
        name: "append",
        arity: 2,
        schedule_only: false,
        mutates_first: true,
        signature: "append(list, v)",
        doc: "appends v to the list stored at the given variable/field/element",
    },
    Builtin {
        name: "remove_at",
        arity: 2,
        schedule_only: false,
        mutates_first: true,
        signature: "remove_at(list, i)",
        doc: "removes and returns element i of the list stored at the given place",
    },
    Builtin {
        name: "sort_by",
        arity: 3,
        schedule_only: false,
        mutates_first: false,
        signature: "sort_by(list, field_name, ascending)",
        doc: "returns a stably sorted copy of a list of records, keyed by a number or string field",
    },
    Builtin {
        name: "range",
        arity: 1,
        schedule_only: false,
        mutates_first: false,
        signature: "range(n)",
        doc: "the list [0, 1, ..., n-1]",
    },
    Builtin {
        name: "min",
        arity: 2,
        schedule_only: false,
        mutates_first: false,
        signature: "min(a, b)",
        doc: "smaller of two numbers",
    },
    Builtin {
        name: "max",
        arity: 2,
        schedule_only: false,
        mutates_first: false,
        signature: "max(a, b)",
        doc: "larger of two numbers",
    },
    Builtin {
        name: "floor",
        arity: 1,
        schedule_only: false,
        mutates_first: false,
        signature: "floor(x)",
        doc: "round down",
    },
    Builtin {
        name: "ceil",
        arity: 1,
        schedule_only: false,
        mutates_first: false,
        signature: "ceil(x)",
        doc: "round up",
    },
    Builtin {
        name: "num_pools",
        arity: 0,
        schedule_only: true,
        mutates_first: false,
        signature: "num_pools()",
        doc: "number of resource pools",
    },
    Builtin {
        name: "pool",
        arity: 1,
        schedule_only: true,
        mutates_first: false,
        signature: "pool(pool_id)",
        doc: "{ pool_id, cpu_capacity, mem_capacity, cpu_free, mem_free } as of the start of this tick",
    },
    Builtin {
        name: "running",
        arity: 1,
        schedule_only: true,
        mutates_first: false,
        signature: "running(pool_id)",
        doc: "list of { op_id, pipeline_id, pool_id, workload_class, cpu_req, mem_req, duration_hint, elapsed } running on the pool",
    },
    Builtin {
        name: "ready_ops",
        arity: 1,
        schedule_only: true,
        mutates_first: false,
        signature: "ready_ops(pipeline)",
        doc: "current ready ops of a pipeline (view record or pipeline_id); empty once the pipeline completed or failed",
    },
    Builtin {
        name: "pipeline_status",
        arity: 1,
        schedule_only: true,
        mutates_first: false,
        signature: "pipeline_status(pipeline_id)",
        doc: "\"in_flight\", \"completed\" or \"failed\"",
    },
    Builtin {
        name: "assign",
        arity: 2,
        schedule_only: true,
        mutates_first: false,
        signature: "assign(op_id, pool_id)",
        doc: "requests placing a ready op on a pool",
    },
    Builtin {
        name: "suspend",
        arity: 1,
        schedule_only: true,
        mutates_first: false,
        signature: "suspend(op_id)",
        doc: "requests preempting a running op; it restarts from zero when reassigned",
    },
];

pub fn builtin(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

fn builtin_names() -> String {
    BUILTINS.iter().map(|b| b.name).collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Init,
    Schedule,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Init => "init",
            Section::Schedule => "schedule",
        }
    }
}

struct Checker {
    section: Section,
    scopes: Vec<HashSet<String>>,
}

pub fn validate_program(program: &Program) -> Result<(), InterpError> {
    let mut init = Checker {
        section: Section::Init,
        scopes: vec![HashSet::from(["state".to_string()])],
    };
    init.block(&program.init)?;
    let mut schedule = Checker {
        section: Section::Schedule,
        scopes: vec![HashSet::from([
            "state".to_string(),
            "failures".to_string(),
            "pipelines".to_string(),
        ])],
    };
    schedule.block(&program.schedule)
}

impl Checker {
    fn defined(&self, name: &str) -> bool {
        self.scopes.iter().rev().any(|s| s.contains(name))
    }

    fn undefined(&self, name: &str, span: Span) -> InterpError {
        let hint = if self.section == Section::Init && (name == "failures" || name == "pipelines") {
            format!("`{name}` is only available inside schedule")
        } else {
            format!("declare it first with `let {name} = ...;` in this block or an enclosing one")
        };
        InterpError::static_(span, format!("variable `{name}` is not defined here"), hint)
    }

    fn block(&mut self, block: &Block) -> Result<(), InterpError> {
        self.scopes.push(HashSet::new());
        for stmt in &block.stmts {
            self.stmt(stmt)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), InterpError> {
        match &stmt.kind {
            StmtKind::Let { name, value } => {
                self.expr(value)?;
                self.scopes.last_mut().expect("scope").insert(name.clone());
            }
            StmtKind::Assign { target, value } => {
                self.place(target, stmt.span)?;
                if target.root == "state" && target.path.is_empty() {
                    return Err(InterpError::static_(
                        stmt.span,
                        "`state` itself cannot be replaced",
                        "assign to a field instead, e.g. `state.queue = [];`",
                    ));
                }
                self.expr(value)?;
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expr(cond)?;
                self.block(then_block)?;
                if let Some(b) = else_block {
                    self.block(b)?;
                }
            }
            StmtKind::For { var, iter, body } => {
                self.expr(iter)?;
                self.scopes.push(HashSet::from([var.clone()]));
                let result = self.block(body);
                self.scopes.pop();
                result?;
            }
            StmtKind::Expr(e) => self.expr(e)?,
        }
        Ok(())
    }

    fn place(&mut self, place: &Place, span: Span) -> Result<(), InterpError> {
        if !self.defined(&place.root) {
            return Err(self.undefined(&place.root, span));
        }
        for acc in &place.path {
            if let Accessor::Index(i) = acc {
                self.expr(i)?;
            }
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Result<(), InterpError> {
        match &e.kind {
            ExprKind::Number(_) | ExprKind::Bool(_) | ExprKind::Str(_) => Ok(()),
            ExprKind::Var(name) => {
                if self.defined(name) {
                    Ok(())
                } else {
                    Err(self.undefined(name, e.span))
                }
            }
            ExprKind::List(items) => items.iter().try_for_each(|i| self.expr(i)),
            ExprKind::Record(fields) => fields.iter().try_for_each(|(_, v)| self.expr(v)),
            ExprKind::Field(base, _) => self.expr(base),
            ExprKind::Index(base, index) => {
                self.expr(base)?;
                self.expr(index)
            }
            ExprKind::Unary(_, operand) => self.expr(operand),
            ExprKind::Binary(_, lhs, rhs) => {
                self.expr(lhs)?;
                self.expr(rhs)
            }
            ExprKind::Call(name, args) => {
                let Some(b) = builtin(name) else {
                    return Err(InterpError::static_(
                        e.span,
                        format!("unknown function `{name}`"),
                        format!(
                            "user-defined functions are not supported; the builtins are: {}",
                            builtin_names()
                        ),
                    ));
                };
                if args.len() != b.arity {
                    return Err(InterpError::static_(
                        e.span,
                        format!("`{name}` takes {} argument(s), got {}", b.arity, args.len()),
                        format!("call it as `{}`", b.signature),
                    ));
                }
                if b.schedule_only && self.section == Section::Init {
                    return Err(InterpError::static_(
                        e.span,
                        format!("{name} is schedule-only"),
                        format!(
                            "`{name}` cannot be used in {}; move it into the schedule block",
                            self.section.name()
                        ),
                    ));
                }
                if b.mutates_first && args[0].to_place().is_none() {
                    return Err(InterpError::static_(
                        args[0].span,
                        format!("first argument of `{name}` must be a variable, field, or element"),
                        format!("`{name}` modifies its list in place, e.g. `{name}(state.queue, ...)`"),
                    ));
                }
                args.iter().try_for_each(|a| self.expr(a))
            }
        }
    }
}
