// Recursive-descent parser over the token stream from `lexer`. Stops at the
// first error; policy feedback only ever reports one.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::InterpError;

const PROGRAM_SHAPE: &str = "a policy is `init { ... }` followed by `schedule(failures, pipelines) { ... }`";

pub fn parse_program(source: &str) -> Result<Program, InterpError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    parser.program()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, InterpError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_tok(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        if token.tok != Tok::Eof {
            self.pos += 1;
        }
        token
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek_tok() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, wanted: &str, hint: &str) -> InterpError {
        let token = self.peek();
        InterpError::parse(
            token.span,
            format!("expected {wanted}, found {}", token.tok.describe()),
            hint,
        )
    }

    fn expect(&mut self, tok: Tok, hint: &str) -> PResult<Token> {
        if self.peek_tok() == &tok {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&format!("`{}`", tok.symbol()), hint))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        let token = self.peek().clone();
        match token.tok {
            Tok::Ident(name) => {
                self.advance();
                Ok((name, token.span))
            }
            _ => Err(self.unexpected(what, "names start with a letter or `_`")),
        }
    }

    fn program(&mut self) -> PResult<Program> {
        if self.peek_tok() == &Tok::Schedule {
            return Err(InterpError::parse(
                self.peek().span,
                "missing `init` block before `schedule`",
                PROGRAM_SHAPE,
            ));
        }
        if self.peek_tok() != &Tok::Init {
            return Err(self.unexpected("`init`", PROGRAM_SHAPE));
        }
        self.advance();
        let init = self.block()?;
        if self.peek_tok() == &Tok::Eof {
            return Err(InterpError::parse(
                self.peek().span,
                "missing `schedule(failures, pipelines)` block",
                PROGRAM_SHAPE,
            ));
        }
        self.expect(Tok::Schedule, PROGRAM_SHAPE)?;
        self.expect(
            Tok::LParen,
            "the schedule header is exactly `schedule(failures, pipelines)`",
        )?;
        for (i, expected) in ["failures", "pipelines"].iter().enumerate() {
            let token = self.peek().clone();
            match &token.tok {
                Tok::Ident(name) if name == expected => {
                    self.advance();
                }
                _ => {
                    return Err(InterpError::parse(
                        token.span,
                        format!("expected parameter `{expected}`, found {}", token.tok.describe()),
                        "the schedule header is exactly `schedule(failures, pipelines)`",
                    ))
                }
            }
            if i == 0 {
                self.expect(
                    Tok::Comma,
                    "the schedule header is exactly `schedule(failures, pipelines)`",
                )?;
            }
        }
        self.expect(
            Tok::RParen,
            "the schedule header is exactly `schedule(failures, pipelines)`",
        )?;
        let schedule = self.block()?;
        if self.peek_tok() != &Tok::Eof {
            return Err(self.unexpected("end of program", "nothing may follow the schedule block"));
        }
        Ok(Program { init, schedule })
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect(Tok::LBrace, "blocks are wrapped in `{ ... }`")?;
        let mut stmts = Vec::new();
        loop {
            match self.peek_tok() {
                Tok::RBrace => {
                    self.advance();
                    return Ok(Block { stmts });
                }
                Tok::Eof => {
                    return Err(self.unexpected("`}`", "every `{` needs a matching `}`"));
                }
                _ => stmts.push(self.statement()?),
            }
        }
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        self.expect(Tok::Semi, "statements end with `;`").map(|_| ())
    }

    fn statement(&mut self) -> PResult<Stmt> {
        let span = self.peek().span;
        let kind = match self.peek_tok() {
            Tok::Let => {
                self.advance();
                let (name, _) = self.ident("a variable name after `let`")?;
                self.expect(Tok::Assign, "write `let name = value;`")?;
                let value = self.expr()?;
                self.end_of_statement()?;
                StmtKind::Let { name, value }
            }
            Tok::If => {
                self.advance();
                self.if_rest()?
            }
            Tok::For => {
                self.advance();
                let (var, _) = self.ident("a loop variable after `for`")?;
                self.expect(Tok::In, "write `for item in list { ... }`")?;
                let iter = self.expr()?;
                let body = self.block()?;
                StmtKind::For { var, iter, body }
            }
            _ => {
                let expr = self.expr()?;
                if self.peek_tok() == &Tok::Assign {
                    let eq_span = self.advance().span;
                    let target = expr.to_place().ok_or_else(|| {
                        InterpError::parse(
                            eq_span,
                            "left side of `=` is not assignable",
                            "assign to a variable, a field (`a.b`), or an element (`a[i]`)",
                        )
                    })?;
                    let value = self.expr()?;
                    self.end_of_statement()?;
                    StmtKind::Assign { target, value }
                } else {
                    self.end_of_statement()?;
                    StmtKind::Expr(expr)
                }
            }
        };
        Ok(Stmt { kind, span })
    }

    fn if_rest(&mut self) -> PResult<StmtKind> {
        let cond = self.expr()?;
        let then_block = self.block()?;
        let else_block = if self.eat(&Tok::Else) {
            if self.peek_tok() == &Tok::If {
                let span = self.advance().span;
                let nested = self.if_rest()?;
                Some(Block {
                    stmts: vec![Stmt { kind: nested, span }],
                })
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(StmtKind::If {
            cond,
            then_block,
            else_block,
        })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.peek_tok() == &Tok::Or {
            let span = self.advance().span;
            let rhs = self.and_expr()?;
            lhs = Expr::new(ExprKind::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while self.peek_tok() == &Tok::And {
            let span = self.advance().span;
            let rhs = self.not_expr()?;
            lhs = Expr::new(ExprKind::Binary(BinOp::And, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.peek_tok() == &Tok::Not {
            let span = self.advance().span;
            let operand = self.not_expr()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(operand)), span));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let mut lhs = self.additive()?;
        loop {
            let op = match self.peek_tok() {
                Tok::Eq => BinOp::Eq,
                Tok::Ne => BinOp::Ne,
                Tok::Lt => BinOp::Lt,
                Tok::Le => BinOp::Le,
                Tok::Gt => BinOp::Gt,
                Tok::Ge => BinOp::Ge,
                _ => return Ok(lhs),
            };
            let span = self.advance().span;
            let rhs = self.additive()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.multiplicative()?;
        loop {
            let op = match self.peek_tok() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let span = self.advance().span;
            let rhs = self.multiplicative()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_tok() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => return Ok(lhs),
            };
            let span = self.advance().span;
            let rhs = self.unary()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.peek_tok() == &Tok::Minus {
            let span = self.advance().span;
            let operand = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(operand)), span));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut expr = self.primary()?;
        loop {
            match self.peek_tok() {
                Tok::Dot => {
                    let span = self.advance().span;
                    let (field, _) = self.ident("a field name after `.`")?;
                    expr = Expr::new(ExprKind::Field(Box::new(expr), field), span);
                }
                Tok::LBracket => {
                    let span = self.advance().span;
                    let index = self.expr()?;
                    self.expect(Tok::RBracket, "close the index with `]`")?;
                    expr = Expr::new(ExprKind::Index(Box::new(expr), Box::new(index)), span);
                }
                _ => return Ok(expr),
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let token = self.peek().clone();
        let span = token.span;
        let kind = match token.tok {
            Tok::Number(n) => {
                self.advance();
                ExprKind::Number(n)
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Str(s)
            }
            Tok::True => {
                self.advance();
                ExprKind::Bool(true)
            }
            Tok::False => {
                self.advance();
                ExprKind::Bool(false)
            }
            Tok::Ident(name) => {
                self.advance();
                if self.eat(&Tok::LParen) {
                    let args = self.comma_list(Tok::RParen, |p| p.expr())?;
                    ExprKind::Call(name, args)
                } else {
                    ExprKind::Var(name)
                }
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "close the parenthesis with `)`")?;
                return Ok(inner);
            }
            Tok::LBracket => {
                self.advance();
                ExprKind::List(self.comma_list(Tok::RBracket, |p| p.expr())?)
            }
            Tok::LBrace => {
                self.advance();
                ExprKind::Record(self.comma_list(Tok::RBrace, |p| {
                    let key = match p.peek_tok().clone() {
                        Tok::Ident(name) | Tok::Str(name) => {
                            p.advance();
                            name
                        }
                        _ => return Err(p.unexpected("a record key", "records are written `{ key: value, ... }`")),
                    };
                    p.expect(Tok::Colon, "records are written `{ key: value, ... }`")?;
                    Ok((key, p.expr()?))
                })?)
            }
            _ => return Err(self.unexpected("an expression", "expressions are literals, names, calls, or operators")),
        };
        Ok(Expr::new(kind, span))
    }

    fn comma_list<T>(&mut self, close: Tok, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut items = Vec::new();
        if self.eat(&close) {
            return Ok(items);
        }
        loop {
            items.push(item(self)?);
            if self.eat(&close) {
                return Ok(items);
            }
            self.expect(
                Tok::Comma,
                &format!("separate items with `,` and close with `{}`", close.symbol()),
            )?;
            // trailing comma
            if self.eat(&close) {
                return Ok(items);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(body: &str) -> String {
        format!("init {{ }}\nschedule(failures, pipelines) {{\n{body}\n}}\n")
    }

    #[test]
    fn precedence() {
        let p = parse_program(&sched("let x = 1 + 2 * 3 < 10 and not false;")).unwrap();
        let StmtKind::Let { value, .. } = &p.schedule.stmts[0].kind else {
            panic!()
        };
        let ExprKind::Binary(BinOp::And, lhs, rhs) = &value.kind else {
            panic!("{value:?}")
        };
        assert!(matches!(lhs.kind, ExprKind::Binary(BinOp::Lt, _, _)));
        assert!(matches!(rhs.kind, ExprKind::Unary(UnOp::Not, _)));
    }

    #[test]
    fn assignment_targets() {
        let p = parse_program(&sched("state.q[0].x = 1;")).unwrap();
        let StmtKind::Assign { target, .. } = &p.schedule.stmts[0].kind else {
            panic!()
        };
        assert_eq!(target.root, "state");
        assert_eq!(target.path.len(), 3);
        let err = parse_program(&sched("f(x) = 1;")).unwrap_err();
        assert!(err.message.contains("not assignable"));
    }

    #[test]
    fn else_if_chains() {
        let p = parse_program(&sched("if a { } else if b { } else { }")).unwrap();
        let StmtKind::If {
            else_block: Some(b), ..
        } = &p.schedule.stmts[0].kind
        else {
            panic!()
        };
        assert!(matches!(
            b.stmts[0].kind,
            StmtKind::If {
                else_block: Some(_),
                ..
            }
        ));
    }

    #[test]
    fn missing_schedule_block() {
        let err = parse_program("init {\n  state.q = [];\n}\n").unwrap_err();
        assert!(err.message.contains("schedule"), "{err}");
        assert_eq!(err.line, Some(4));
    }

    #[test]
    fn missing_init_block() {
        let err = parse_program("schedule(failures, pipelines) { }").unwrap_err();
        assert!(err.message.contains("init"));
    }

    #[test]
    fn unbalanced_brace_position() {
        let src = "init {\n}\nschedule(failures, pipelines) {\n  if true {\n    let x = 1;\n}\n";
        let err = parse_program(src).unwrap_err();
        assert_eq!((err.line, err.column), (Some(7), Some(1)));
        assert!(err.hint.contains('}'));
    }

    #[test]
    fn missing_semicolon() {
        let err = parse_program(&sched("let x = 1\nlet y = 2;")).unwrap_err();
        assert_eq!(err.line, Some(4));
        assert!(err.hint.contains(';'));
    }

    #[test]
    fn records_and_trailing_commas() {
        let p = parse_program(&sched("let r = { a: 1, \"b\": [1, 2,], };")).unwrap();
        let StmtKind::Let { value, .. } = &p.schedule.stmts[0].kind else {
            panic!()
        };
        let ExprKind::Record(fields) = &value.kind else {
            panic!()
        };
        assert_eq!(fields.len(), 2);
    }

    #[test]
    fn wrong_schedule_parameters() {
        let err = parse_program("init {} schedule(s, failures, pipelines) {}").unwrap_err();
        assert!(err.message.contains("failures"));
    }
}
