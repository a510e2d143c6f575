//! Syntax tree for policy programs. Equality on nodes ignores source positions.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub init: Block,
    pub schedule: Block,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
}

#[derive(Clone, Debug)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Let {
        name: String,
        value: Expr,
    },
    Assign {
        target: Place,
        value: Expr,
    },
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    For {
        var: String,
        iter: Expr,
        body: Block,
    },
    Expr(Expr),
}

/// An assignable location: a variable followed by field and index accessors.
#[derive(Clone, Debug, PartialEq)]
pub struct Place {
    pub root: String,
    pub path: Vec<Accessor>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Accessor {
    Field(String),
    Index(Expr),
}

#[derive(Clone, Debug)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Converts a variable/field/index chain into a [`Place`].
    pub fn to_place(&self) -> Option<Place> {
        match &self.kind {
            ExprKind::Var(name) => Some(Place {
                root: name.clone(),
                path: Vec::new(),
            }),
            ExprKind::Field(base, field) => {
                let mut place = base.to_place()?;
                place.path.push(Accessor::Field(field.clone()));
                Some(place)
            }
            ExprKind::Index(base, index) => {
                let mut place = base.to_place()?;
                place.path.push(Accessor::Index((**index).clone()));
                Some(place)
            }
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Number(f64),
    Bool(bool),
    Str(String),
    List(Vec<Expr>),
    Record(Vec<(String, Expr)>),
    Var(String),
    Field(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "or",
            BinOp::And => "and",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }
}

pub const PREC_NOT: u8 = 3;
pub const PREC_NEG: u8 = 7;
pub const PREC_POSTFIX: u8 = 8;
pub const PREC_ATOM: u8 = 9;

impl ExprKind {
    pub fn precedence(&self) -> u8 {
        match self {
            ExprKind::Binary(op, _, _) => op.precedence(),
            ExprKind::Unary(UnOp::Not, _) => PREC_NOT,
            ExprKind::Unary(UnOp::Neg, _) => PREC_NEG,
            ExprKind::Field(..) | ExprKind::Index(..) | ExprKind::Call(..) => PREC_POSTFIX,
            _ => PREC_ATOM,
        }
    }
}
