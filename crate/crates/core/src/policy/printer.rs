// Pretty-printer producing canonical source; parenthesizes only where
// precedence requires it.

use std::fmt::{self, Write};

use super::ast::*;

const INDENT: &str = "    ";

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        out.push_str("init ");
        block(&mut out, &self.init, 0);
        out.push_str("\n\nschedule(failures, pipelines) ");
        block(&mut out, &self.schedule, 0);
        out.push('\n');
        f.write_str(&out)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        expr(&mut out, self, 0);
        f.write_str(&out)
    }
}

fn block(out: &mut String, b: &Block, depth: usize) {
    if b.stmts.is_empty() {
        out.push_str("{\n");
        indent(out, depth);
        out.push('}');
        return;
    }
    out.push_str("{\n");
    for s in &b.stmts {
        indent(out, depth + 1);
        stmt(out, s, depth + 1);
        out.push('\n');
    }
    indent(out, depth);
    out.push('}');
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::Let { name, value } => {
            let _ = write!(out, "let {name} = ");
            expr(out, value, 0);
            out.push(';');
        }
        StmtKind::Assign { target, value } => {
            place(out, target);
            out.push_str(" = ");
            expr(out, value, 0);
            out.push(';');
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            out.push_str("if ");
            expr(out, cond, 0);
            out.push(' ');
            block(out, then_block, depth);
            if let Some(e) = else_block {
                out.push_str(" else ");
                block(out, e, depth);
            }
        }
        StmtKind::For { var, iter, body } => {
            let _ = write!(out, "for {var} in ");
            expr(out, iter, 0);
            out.push(' ');
            block(out, body, depth);
        }
        StmtKind::Expr(e) => {
            expr(out, e, 0);
            out.push(';');
        }
    }
}

fn place(out: &mut String, p: &Place) {
    out.push_str(&p.root);
    for acc in &p.path {
        match acc {
            Accessor::Field(name) => {
                out.push('.');
                out.push_str(name);
            }
            Accessor::Index(i) => {
                out.push('[');
                expr(out, i, 0);
                out.push(']');
            }
        }
    }
}

fn string_literal(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out.push('"');
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(
            s,
            "init" | "schedule" | "let" | "if" | "else" | "for" | "in" | "and" | "or" | "not" | "true" | "false"
        )
}

/// Writes `e`, parenthesized when its precedence is below `min`.
fn expr(out: &mut String, e: &Expr, min: u8) {
    let prec = e.kind.precedence();
    let wrap = prec < min;
    if wrap {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Number(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Str(s) => string_literal(out, s),
        ExprKind::Var(name) => out.push_str(name),
        ExprKind::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, item, 0);
            }
            out.push(']');
        }
        ExprKind::Record(fields) => {
            if fields.is_empty() {
                out.push_str("{}");
            } else {
                out.push_str("{ ");
                for (i, (k, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    if is_ident(k) {
                        out.push_str(k);
                    } else {
                        string_literal(out, k);
                    }
                    out.push_str(": ");
                    expr(out, v, 0);
                }
                out.push_str(" }");
            }
        }
        ExprKind::Field(base, name) => {
            expr(out, base, PREC_POSTFIX);
            out.push('.');
            out.push_str(name);
        }
        ExprKind::Index(base, index) => {
            expr(out, base, PREC_POSTFIX);
            out.push('[');
            expr(out, index, 0);
            out.push(']');
        }
        ExprKind::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, a, 0);
            }
            out.push(')');
        }
        ExprKind::Unary(UnOp::Neg, operand) => {
            out.push('-');
            expr(out, operand, PREC_NEG);
        }
        ExprKind::Unary(UnOp::Not, operand) => {
            out.push_str("not ");
            expr(out, operand, PREC_NOT);
        }
        ExprKind::Binary(op, lhs, rhs) => {
            let p = op.precedence();
            expr(out, lhs, p);
            let _ = write!(out, " {} ", op.symbol());
            expr(out, rhs, p + 1);
        }
    }
    if wrap {
        out.push(')');
    }
}
