use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::ast::*;
use super::value::Value;
use super::{InterpError, PolicyState};
use crate::sim::{
    Assignment, ExecutorView, FailureNotice, FailureReason, OpView, PipelineSpec, RunningHandle, ScheduleResult,
    Suspension,
};

/// Largest magnitude at which every integer is exactly representable.
const MAX_EXACT_INT: f64 = 9_007_199_254_740_992.0;

pub(crate) struct Interp<'v, 'a> {
    state: Value,
    scopes: Vec<Vec<(String, Value)>>,
    steps: u64,
    max_steps: u64,
    view: Option<&'v ExecutorView<'a>>,
    out: ScheduleResult,
}

enum Key {
    Field(String),
    Index(usize),
}

type R<T> = Result<T, InterpError>;

fn rt(span: Span, message: impl Into<String>, hint: impl Into<String>) -> InterpError {
    InterpError::runtime(span, message, hint)
}

impl<'v, 'a> Interp<'v, 'a> {
    pub(crate) fn new(state: PolicyState, max_steps: u64, view: Option<&'v ExecutorView<'a>>) -> Self {
        Interp {
            state: Value::Record(state.into_record()),
            scopes: Vec::new(),
            steps: 0,
            max_steps,
            view,
            out: ScheduleResult::default(),
        }
    }

    pub(crate) fn run_block(&mut self, block: &Block, bindings: Vec<(String, Value)>) -> R<()> {
        self.scopes.push(bindings);
        let result = self.block_body(block);
        self.scopes.pop();
        result
    }

    pub(crate) fn finish(self) -> (ScheduleResult, PolicyState) {
        let record = match self.state {
            Value::Record(r) => r,
            _ => unreachable!("state is always a record"),
        };
        (self.out, PolicyState::from_record(record))
    }

    fn step(&mut self, span: Span) -> R<()> {
        self.charge(1, span)
    }

    fn charge(&mut self, n: u64, span: Span) -> R<()> {
        self.steps += n;
        if self.steps > self.max_steps {
            return Err(InterpError::budget(
                span,
                format!("step budget of {} exceeded", self.max_steps),
                "each tick's invocation must finish within the budget; avoid nested loops over large lists and prune finished work from state",
            ));
        }
        Ok(())
    }

    fn block(&mut self, block: &Block) -> R<()> {
        self.run_block(block, Vec::new())
    }

    fn block_body(&mut self, block: &Block) -> R<()> {
        for stmt in &block.stmts {
            self.stmt(stmt)?;
        }
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> R<()> {
        self.step(stmt.span)?;
        match &stmt.kind {
            StmtKind::Let { name, value } => {
                let v = self.eval(value)?;
                self.scopes.last_mut().expect("scope").push((name.clone(), v));
            }
            StmtKind::Assign { target, value } => {
                let v = self.eval(value)?;
                let keys = self.place_keys(target)?;
                let (last, prefix) = keys.split_last().map_or((None, &[][..]), |(l, p)| (Some(l), p));
                let root = self.root_mut(&target.root, stmt.span)?;
                let slot = navigate(root, prefix, stmt.span)?;
                match last {
                    None => *slot = v,
                    Some(key) => set_child(slot, key, v, stmt.span)?,
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.truthy(cond)? {
                    self.block(then_block)?;
                } else if let Some(b) = else_block {
                    self.block(b)?;
                }
            }
            StmtKind::For { var, iter, body } => {
                let items = match self.eval(iter)? {
                    Value::List(items) => items,
                    other => {
                        return Err(rt(
                            iter.span,
                            format!("`for` needs a list, got a {}", other.type_name()),
                            "iterate over lists only; use range(n) to count",
                        ))
                    }
                };
                for item in items.iter() {
                    self.step(stmt.span)?;
                    self.run_block(body, vec![(var.clone(), item.clone())])?;
                }
            }
            StmtKind::Expr(e) => {
                self.eval(e)?;
            }
        }
        Ok(())
    }

    fn truthy(&mut self, e: &Expr) -> R<bool> {
        match self.eval(e)? {
            Value::Bool(b) => Ok(b),
            other => Err(rt(
                e.span,
                format!("condition must be a boolean, got a {}", other.type_name()),
                "compare explicitly, e.g. `len(xs) > 0`",
            )),
        }
    }

    fn lookup(&self, name: &str, span: Span) -> R<Value> {
        if name == "state" {
            return Ok(self.state.clone());
        }
        for scope in self.scopes.iter().rev() {
            if let Some((_, v)) = scope.iter().rev().find(|(n, _)| n == name) {
                return Ok(v.clone());
            }
        }
        Err(rt(
            span,
            format!("variable `{name}` is not defined"),
            "declare it with `let` first",
        ))
    }

    fn root_mut(&mut self, name: &str, span: Span) -> R<&mut Value> {
        if name == "state" {
            return Ok(&mut self.state);
        }
        for scope in self.scopes.iter_mut().rev() {
            if let Some((_, v)) = scope.iter_mut().rev().find(|(n, _)| n == name) {
                return Ok(v);
            }
        }
        Err(rt(
            span,
            format!("variable `{name}` is not defined"),
            "declare it with `let` first",
        ))
    }

    fn place_keys(&mut self, place: &Place) -> R<Vec<Key>> {
        let mut keys = Vec::with_capacity(place.path.len());
        for acc in &place.path {
            keys.push(match acc {
                Accessor::Field(name) => Key::Field(name.clone()),
                Accessor::Index(e) => match self.eval(e)? {
                    Value::Number(n) => Key::Index(as_index(n, e.span)?),
                    Value::Str(s) => Key::Field(s.to_string()),
                    other => {
                        return Err(rt(
                            e.span,
                            format!("index must be a number or string, got a {}", other.type_name()),
                            "lists take numeric indices, records take string keys",
                        ))
                    }
                },
            });
        }
        Ok(keys)
    }

    fn list_place(&mut self, arg: &Expr, fname: &str) -> R<&mut Vec<Value>> {
        let place = arg.to_place().expect("validated place argument");
        let keys = self.place_keys(&place)?;
        let root = self.root_mut(&place.root, arg.span)?;
        let slot = navigate(root, &keys, arg.span)?;
        match slot {
            Value::List(items) => Ok(Arc::make_mut(items)),
            other => Err(rt(
                arg.span,
                format!("`{fname}` needs a list, got a {}", other.type_name()),
                "initialize it first, e.g. `state.queue = [];`",
            )),
        }
    }

    pub(crate) fn eval(&mut self, e: &Expr) -> R<Value> {
        self.step(e.span)?;
        Ok(match &e.kind {
            ExprKind::Number(n) => Value::Number(*n),
            ExprKind::Bool(b) => Value::Bool(*b),
            ExprKind::Str(s) => Value::str(s),
            ExprKind::Var(name) => self.lookup(name, e.span)?,
            ExprKind::List(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(item)?);
                }
                Value::list(out)
            }
            ExprKind::Record(fields) => {
                let mut out = BTreeMap::new();
                for (k, v) in fields {
                    let value = self.eval(v)?;
                    out.insert(k.clone(), value);
                }
                Value::Record(Arc::new(out))
            }
            ExprKind::Field(base, name) => {
                let b = self.eval(base)?;
                read_field(&b, name, e.span)?
            }
            ExprKind::Index(base, index) => {
                let b = self.eval(base)?;
                let i = self.eval(index)?;
                read_index(&b, &i, e.span)?
            }
            ExprKind::Unary(UnOp::Neg, operand) => match self.eval(operand)? {
                Value::Number(n) => Value::Number(-n),
                other => return Err(type_error(e.span, "-", &other)),
            },
            ExprKind::Unary(UnOp::Not, operand) => match self.eval(operand)? {
                Value::Bool(b) => Value::Bool(!b),
                other => return Err(type_error(e.span, "not", &other)),
            },
            ExprKind::Binary(op, lhs, rhs) => self.binary(*op, lhs, rhs, e.span)?,
            ExprKind::Call(name, args) => self.call(name, args, e.span)?,
        })
    }

    fn binary(&mut self, op: BinOp, lhs: &Expr, rhs: &Expr, span: Span) -> R<Value> {
        match op {
            BinOp::And => return Ok(Value::Bool(self.truthy(lhs)? && self.truthy(rhs)?)),
            BinOp::Or => return Ok(Value::Bool(self.truthy(lhs)? || self.truthy(rhs)?)),
            _ => {}
        }
        let a = self.eval(lhs)?;
        let b = self.eval(rhs)?;
        match op {
            BinOp::Eq | BinOp::Ne => {
                if std::mem::discriminant(&a) != std::mem::discriminant(&b) {
                    return Err(rt(
                        span,
                        format!("cannot compare a {} with a {}", a.type_name(), b.type_name()),
                        "comparisons need both sides of the same type",
                    ));
                }
                Ok(Value::Bool((a == b) == (op == BinOp::Eq)))
            }
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let ord = order(&a, &b, span)?;
                Ok(Value::Bool(match op {
                    BinOp::Lt => ord == Ordering::Less,
                    BinOp::Le => ord != Ordering::Greater,
                    BinOp::Gt => ord == Ordering::Greater,
                    _ => ord != Ordering::Less,
                }))
            }
            _ => {
                let (Value::Number(x), Value::Number(y)) = (&a, &b) else {
                    let bad = if matches!(a, Value::Number(_)) { &b } else { &a };
                    return Err(type_error(span, op.symbol(), bad));
                };
                let (x, y) = (*x, *y);
                Ok(Value::Number(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div | BinOp::Rem => {
                        if y == 0.0 {
                            return Err(rt(
                                span,
                                "division by zero",
                                "guard the divisor, e.g. `if d > 0 { ... }`",
                            ));
                        }
                        if op == BinOp::Div {
                            x / y
                        } else {
                            x % y
                        }
                    }
                    _ => unreachable!(),
                }))
            }
        }
    }

    fn view(&self, name: &str, span: Span) -> R<&'v ExecutorView<'a>> {
        self.view.ok_or_else(|| {
            rt(
                span,
                format!("`{name}` is only available inside schedule"),
                "move the call into schedule",
            )
        })
    }

    fn args(&mut self, args: &[Expr]) -> R<Vec<Value>> {
        args.iter().map(|a| self.eval(a)).collect()
    }

    fn call(&mut self, name: &str, args: &[Expr], span: Span) -> R<Value> {
        match name {
            "append" => {
                let v = self.eval(&args[1])?;
                self.list_place(&args[0], name)?.push(v);
                Ok(Value::Unit)
            }
            "remove_at" => {
                let i = self.eval(&args[1])?;
                let i = as_index(number(&i, args[1].span, "remove_at index")?, args[1].span)?;
                let list = self.list_place(&args[0], name)?;
                if i >= list.len() {
                    return Err(rt(
                        span,
                        format!(
                            "remove_at index {i} is out of range for a list of length {}",
                            list.len()
                        ),
                        "check `len(list)` first",
                    ));
                }
                Ok(list.remove(i))
            }
            "len" => {
                let v = self.eval(&args[0])?;
                Ok(Value::Number(match &v {
                    Value::List(items) => items.len() as f64,
                    Value::Record(fields) => fields.len() as f64,
                    Value::Str(s) => s.chars().count() as f64,
                    other => return Err(type_error(span, "len", other)),
                }))
            }
            "sort_by" => {
                let a = self.args(args)?;
                self.sort_by(&a, span)
            }
            "range" => {
                let n = self.eval(&args[0])?;
                let n = as_index(number(&n, span, "range")?, span)?;
                self.charge(n as u64, span)?;
                Ok(Value::list((0..n).map(Value::from).collect()))
            }
            "min" | "max" | "floor" | "ceil" => {
                let a = self.args(args)?;
                let xs = a
                    .iter()
                    .zip(args)
                    .map(|(v, e)| number(v, e.span, name))
                    .collect::<R<Vec<f64>>>()?;
                Ok(Value::Number(match name {
                    "min" => xs[0].min(xs[1]),
                    "max" => xs[0].max(xs[1]),
                    "floor" => xs[0].floor(),
                    _ => xs[0].ceil(),
                }))
            }
            "num_pools" => Ok(Value::from(self.view(name, span)?.num_pools())),
            "pool" => {
                let view = self.view(name, span)?;
                let id = self.eval(&args[0])?;
                let id = as_id(&id, args[0].span, "pool_id")?;
                let p = view.pool(id as usize).ok_or_else(|| {
                    rt(
                        span,
                        format!("pool {id} does not exist (num_pools = {})", view.num_pools()),
                        "pool ids run from 0 to num_pools() - 1",
                    )
                })?;
                Ok(Value::record([
                    ("pool_id", Value::from(p.pool_id)),
                    ("cpu_capacity", Value::from(p.cpu_capacity)),
                    ("mem_capacity", Value::from(p.mem_capacity)),
                    ("cpu_free", Value::from(p.cpu_free)),
                    ("mem_free", Value::from(p.mem_free)),
                ]))
            }
            "running" => {
                let view = self.view(name, span)?;
                let id = self.eval(&args[0])?;
                let id = as_id(&id, args[0].span, "pool_id")? as usize;
                if id >= view.num_pools() {
                    return Err(rt(
                        span,
                        format!("pool {id} does not exist (num_pools = {})", view.num_pools()),
                        "pool ids run from 0 to num_pools() - 1",
                    ));
                }
                Ok(Value::list(view.running(id).iter().map(running_value).collect()))
            }
            "ready_ops" => {
                let view = self.view(name, span)?;
                let arg = self.eval(&args[0])?;
                let id = match &arg {
                    Value::Record(_) => match arg.field("pipeline_id") {
                        Some(v) => as_id(v, args[0].span, "pipeline_id")?,
                        None => {
                            return Err(rt(
                                args[0].span,
                                "ready_ops needs a pipeline record with a `pipeline_id` field",
                                "pass an element of `pipelines` or a pipeline_id",
                            ))
                        }
                    },
                    other => as_id(other, args[0].span, "pipeline_id")?,
                };
                Ok(Value::list(view.ready_ops(id).iter().map(op_value).collect()))
            }
            "pipeline_status" => {
                let view = self.view(name, span)?;
                let id = self.eval(&args[0])?;
                let id = as_id(&id, args[0].span, "pipeline_id")?;
                let status = view.pipeline_status(id).ok_or_else(|| {
                    rt(
                        span,
                        format!("pipeline {id} has not arrived"),
                        "only ask about pipelines you have been given",
                    )
                })?;
                Ok(Value::str(status.as_str()))
            }
            "assign" => {
                self.view(name, span)?;
                let a = self.args(args)?;
                let op_id = as_id(&a[0], args[0].span, "op_id")?;
                let pool_id = as_id(&a[1], args[1].span, "pool_id")?;
                self.out.assignments.push(Assignment {
                    op_id,
                    pool_id: pool_id as usize,
                });
                Ok(Value::Unit)
            }
            "suspend" => {
                self.view(name, span)?;
                let v = self.eval(&args[0])?;
                let op_id = as_id(&v, args[0].span, "op_id")?;
                self.out.suspensions.push(Suspension { op_id });
                Ok(Value::Unit)
            }
            other => Err(InterpError::static_(
                span,
                format!("unknown function `{other}`"),
                "use only the listed builtins",
            )),
        }
    }

    fn sort_by(&mut self, a: &[Value], span: Span) -> R<Value> {
        let Value::List(items) = &a[0] else {
            return Err(rt(
                span,
                format!("sort_by needs a list, got a {}", a[0].type_name()),
                "sort_by(list, \"field\", true)",
            ));
        };
        let Value::Str(field) = &a[1] else {
            return Err(rt(
                span,
                "sort_by field name must be a string",
                "write the field in quotes, e.g. \"duration_hint\"",
            ));
        };
        let Value::Bool(ascending) = a[2] else {
            return Err(rt(
                span,
                "sort_by's third argument must be true or false",
                "true sorts ascending",
            ));
        };
        self.charge(items.len() as u64, span)?;
        let mut keyed = Vec::with_capacity(items.len());
        for item in items.iter() {
            let key = item.field(field).ok_or_else(|| {
                rt(
                    span,
                    format!("sort_by: element has no field `{field}`"),
                    "every element must be a record with that field",
                )
            })?;
            keyed.push((key.clone(), item.clone()));
        }
        let mut failure = None;
        keyed.sort_by(|(x, _), (y, _)| {
            let ord = match order(x, y, span) {
                Ok(o) => o,
                Err(e) => {
                    failure.get_or_insert(e);
                    Ordering::Equal
                }
            };
            if ascending {
                ord
            } else {
                ord.reverse()
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(Value::list(keyed.into_iter().map(|(_, v)| v).collect()))
    }
}

fn navigate<'x>(mut cur: &'x mut Value, keys: &[Key], span: Span) -> R<&'x mut Value> {
    for key in keys {
        cur = child_mut(cur, key, span)?;
    }
    Ok(cur)
}

fn child_mut<'x>(cur: &'x mut Value, key: &Key, span: Span) -> R<&'x mut Value> {
    match (cur, key) {
        (Value::Record(fields), Key::Field(name)) => {
            let len_hint = fields.keys().cloned().collect::<Vec<_>>().join(", ");
            Arc::make_mut(fields).get_mut(name).ok_or_else(|| {
                rt(
                    span,
                    format!("record has no field `{name}`"),
                    format!("available fields: {len_hint}"),
                )
            })
        }
        (Value::List(items), Key::Index(i)) => {
            let len = items.len();
            Arc::make_mut(items).get_mut(*i).ok_or_else(|| {
                rt(
                    span,
                    format!("index {i} is out of range for a list of length {len}"),
                    "check `len(list)` first",
                )
            })
        }
        (other, Key::Field(name)) => Err(rt(
            span,
            format!("cannot access field `{name}` of a {}", other.type_name()),
            "only records have fields",
        )),
        (other, Key::Index(_)) => Err(rt(
            span,
            format!("cannot index into a {}", other.type_name()),
            "only lists take numeric indices",
        )),
    }
}

fn set_child(slot: &mut Value, key: &Key, v: Value, span: Span) -> R<()> {
    match (slot, key) {
        (Value::Record(fields), Key::Field(name)) => {
            Arc::make_mut(fields).insert(name.clone(), v);
            Ok(())
        }
        (slot, key) => {
            *child_mut(slot, key, span)? = v;
            Ok(())
        }
    }
}

fn read_field(v: &Value, name: &str, span: Span) -> R<Value> {
    match v {
        Value::Record(fields) => fields.get(name).cloned().ok_or_else(|| {
            rt(
                span,
                format!("record has no field `{name}`"),
                format!(
                    "available fields: {}",
                    fields.keys().cloned().collect::<Vec<_>>().join(", ")
                ),
            )
        }),
        other => Err(rt(
            span,
            format!("cannot read field `{name}` of a {}", other.type_name()),
            "only records have fields",
        )),
    }
}

fn read_index(base: &Value, index: &Value, span: Span) -> R<Value> {
    match (base, index) {
        (Value::List(items), Value::Number(n)) => {
            let i = as_index(*n, span)?;
            items.get(i).cloned().ok_or_else(|| {
                rt(
                    span,
                    format!("index {i} is out of range for a list of length {}", items.len()),
                    "check `len(list)` before indexing",
                )
            })
        }
        (Value::Record(_), Value::Str(key)) => read_field(base, key, span),
        (b, i) => Err(rt(
            span,
            format!("cannot index a {} with a {}", b.type_name(), i.type_name()),
            "lists take numeric indices, records take string keys",
        )),
    }
}

fn order(a: &Value, b: &Value, span: Span) -> R<Ordering> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x
            .partial_cmp(y)
            .ok_or_else(|| rt(span, "cannot order NaN", "avoid 0/0-like arithmetic")),
        (Value::Str(x), Value::Str(y)) => Ok(x.cmp(y)),
        _ => Err(rt(
            span,
            format!("cannot order a {} and a {}", a.type_name(), b.type_name()),
            "ordering comparisons need two numbers or two strings",
        )),
    }
}

fn type_error(span: Span, op: &str, v: &Value) -> InterpError {
    rt(
        span,
        format!("`{op}` cannot be applied to a {}", v.type_name()),
        "check the operand types",
    )
}

fn number(v: &Value, span: Span, what: &str) -> R<f64> {
    match v {
        Value::Number(n) => Ok(*n),
        other => Err(rt(
            span,
            format!("{what} expects a number, got a {}", other.type_name()),
            "pass a number",
        )),
    }
}

fn as_index(n: f64, span: Span) -> R<usize> {
    if n < 0.0 || n.fract() != 0.0 || n > MAX_EXACT_INT {
        return Err(rt(
            span,
            format!("{n} is not a valid index"),
            "indices are non-negative integers",
        ));
    }
    Ok(n as usize)
}

fn as_id(v: &Value, span: Span, what: &str) -> R<u64> {
    let n = number(v, span, what)?;
    if n < 0.0 || n.fract() != 0.0 || n > MAX_EXACT_INT {
        return Err(rt(
            span,
            format!("{what} must be a non-negative integer, got {n}"),
            format!("use the `{what}` field of a view record"),
        ));
    }
    Ok(n as u64)
}

pub(crate) fn op_value(op: &OpView) -> Value {
    Value::record([
        ("op_id", Value::from(op.op_id)),
        ("pipeline_id", Value::from(op.pipeline_id)),
        ("workload_class", Value::str(op.workload_class.as_str())),
        ("cpu_req", Value::from(op.cpu_req)),
        ("mem_req", Value::from(op.mem_req)),
        ("duration_hint", Value::from(op.duration_hint)),
        ("deps", Value::list(op.deps.iter().map(|&d| Value::from(d)).collect())),
        ("status", Value::str(op.status.as_str())),
    ])
}

fn running_value(r: &RunningHandle) -> Value {
    Value::record([
        ("op_id", Value::from(r.op_id)),
        ("pipeline_id", Value::from(r.pipeline_id)),
        ("pool_id", Value::from(r.pool_id)),
        ("workload_class", Value::str(r.workload_class.as_str())),
        ("cpu_req", Value::from(r.cpu_req)),
        ("mem_req", Value::from(r.mem_req)),
        ("duration_hint", Value::from(r.duration_hint)),
        ("elapsed", Value::from(r.elapsed)),
    ])
}

pub(crate) fn pipeline_value(view: &ExecutorView<'_>, spec: &PipelineSpec) -> Value {
    let p = view.pipeline_view(spec);
    Value::record([
        ("pipeline_id", Value::from(p.pipeline_id)),
        ("workload_class", Value::str(p.workload_class.as_str())),
        ("arrival_tick", Value::from(p.arrival_tick)),
        ("timeout", Value::from(p.timeout)),
        ("ops", Value::list(p.ops.iter().map(op_value).collect())),
    ])
}

pub(crate) fn failure_value(f: &FailureNotice) -> Value {
    Value::record([
        ("pipeline_id", Value::from(f.pipeline_id)),
        (
            "reason",
            Value::str(match f.reason {
                FailureReason::Timeout => "timeout",
            }),
        ),
        ("tick", Value::from(f.tick)),
    ])
}
