//! Lexer and recursive-descent parser for `.ctm` program text.
//!
//! ```text
//! program := decl* stmt* ;
//! decl    := "param" IDENT ";" | "array" IDENT "[" aexpr "]" ";" ;
//! stmt    := "for" IDENT "in" aexpr ".." aexpr "{" stmt* "}"
//!          | "if" cond "{" stmt* "}" ("else" "{" stmt* "}")?
//!          | IDENT "[" aexpr "]" ("=" rhs)? ";" ;
//! cond    := aexpr relop aexpr | "*" ;
//! rhs     := term (("+"|"-") term)* ;   term := INT | IDENT "[" aexpr "]" ;
//! ```
//!
//! The parser is deliberately a little more permissive than the fragment:
//! it accepts array reads inside expressions and scalar assignments `x = e;`
//! so that validation can reject them with a precise fragment error code.
//! Products without a constant factor are rejected here.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ir::{Int, RelOp, Sign};
use crate::span::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ast {
    pub decls: Vec<Decl>,
    pub body: Vec<AstStmt>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decl {
    Param { name: String, span: SourceSpan },
    Array { name: String, length: Expr, span: SourceSpan },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstSubscript {
    pub array: String,
    pub index: Expr,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AstRhsTerm {
    Literal(Int),
    Read(AstSubscript),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cond {
    Compare {
        lhs: Expr,
        op: RelOp,
        rhs: Expr,
        span: SourceSpan,
    },
    Havoc {
        span: SourceSpan,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AstStmt {
    For {
        counter: String,
        counter_span: SourceSpan,
        lo: Expr,
        hi: Expr,
        body: Vec<AstStmt>,
        span: SourceSpan,
    },
    If {
        cond: Cond,
        then_body: Vec<AstStmt>,
        else_body: Vec<AstStmt>,
        span: SourceSpan,
    },
    Access {
        target: AstSubscript,
        rhs: Option<Vec<(Sign, AstRhsTerm)>>,
        span: SourceSpan,
    },
    /// `x = e;`, never valid in the fragment, kept for diagnostics.
    ScalarAssign {
        name: String,
        value: Expr,
        span: SourceSpan,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Int(Int),
    Name(String),
    Read(Box<AstSubscript>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

impl Expr {
    /// True when the expression contains no names and no array reads.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            ExprKind::Int(_) => true,
            ExprKind::Name(_) | ExprKind::Read(_) => false,
            ExprKind::Neg(e) => e.is_constant(),
            ExprKind::Add(a, b) | ExprKind::Sub(a, b) | ExprKind::Mul(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParseErrorCode {
    UnexpectedToken,
    UnexpectedCharacter,
    IntegerTooLarge,
    NonAffineExpression,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub struct ParseError {
    pub code: ParseErrorCode,
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.code {
            ParseErrorCode::NonAffineExpression => {
                write!(f, "non-affine product `{}`: one factor must be a literal", self.found)
            }
            ParseErrorCode::IntegerTooLarge => write!(f, "integer literal `{}` is too large", self.found),
            ParseErrorCode::UnexpectedCharacter => write!(f, "unexpected character `{}`", self.found),
            ParseErrorCode::UnexpectedToken => {
                if self.expected.len() == 1 {
                    write!(f, "expected {}, found {}", self.expected[0], self.found)
                } else {
                    write!(f, "expected one of {}, found {}", self.expected.join(", "), self.found)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(Int),
    Param,
    Array,
    For,
    In,
    If,
    Else,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    DotDot,
    Plus,
    Minus,
    Star,
    Assign,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(k) => format!("integer `{k}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::Param => "param",
            Tok::Array => "array",
            Tok::For => "for",
            Tok::In => "in",
            Tok::If => "if",
            Tok::Else => "else",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Semi => ";",
            Tok::DotDot => "..",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Assign => "=",
            Tok::EqEq => "==",
            Tok::NotEq => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
    last: (u32, u32),
}

fn lex(text: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let mut lx = Lexer {
        chars: text.chars().peekable(),
        line: 1,
        col: 1,
        last: (1, 1),
    };
    let mut out = Vec::new();
    loop {
        lx.skip_trivia();
        let (line, col) = (lx.line, lx.col);
        let Some(c) = lx.bump() else {
            // EOF is reported at the last character so spans stay in the text.
            let (l, c) = lx.last;
            out.push((Tok::Eof, SourceSpan::new(l, c, l, c + 1)));
            return Ok(out);
        };
        let tok = match c {
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ';' => Tok::Semi,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '.' if lx.eat('.') => Tok::DotDot,
            '=' if lx.eat('=') => Tok::EqEq,
            '=' => Tok::Assign,
            '!' if lx.eat('=') => Tok::NotEq,
            '<' if lx.eat('=') => Tok::Le,
            '<' => Tok::Lt,
            '>' if lx.eat('=') => Tok::Ge,
            '>' => Tok::Gt,
            c if c.is_ascii_digit() => {
                let mut s = c.to_string();
                while let Some(&d) = lx.chars.peek() {
                    if !d.is_ascii_digit() {
                        break;
                    }
                    s.push(d);
                    lx.bump();
                }
                match s.parse::<Int>() {
                    Ok(k) => Tok::Int(k),
                    Err(_) => {
                        return Err(ParseError {
                            code: ParseErrorCode::IntegerTooLarge,
                            span: SourceSpan::new(line, col, lx.line, lx.col),
                            expected: vec![],
                            found: s,
                        })
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = c.to_string();
                while let Some(&d) = lx.chars.peek() {
                    if !(d.is_ascii_alphanumeric() || d == '_') {
                        break;
                    }
                    s.push(d);
                    lx.bump();
                }
                match s.as_str() {
                    "param" => Tok::Param,
                    "array" => Tok::Array,
                    "for" => Tok::For,
                    "in" => Tok::In,
                    "if" => Tok::If,
                    "else" => Tok::Else,
                    _ => Tok::Ident(s),
                }
            }
            other => {
                return Err(ParseError {
                    code: ParseErrorCode::UnexpectedCharacter,
                    span: SourceSpan::new(line, col, lx.line, lx.col),
                    expected: vec![],
                    found: other.to_string(),
                })
            }
        };
        out.push((tok, SourceSpan::new(line, col, lx.line, lx.col)));
    }
}

impl Lexer<'_> {
    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        self.last = (self.line, self.col);
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn eat(&mut self, want: char) -> bool {
        if self.chars.peek() == Some(&want) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.chars.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') => {
                    let mut ahead = self.chars.clone();
                    ahead.next();
                    if ahead.peek() != Some(&'/') {
                        return;
                    }
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                _ => return,
            }
        }
    }
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

/// Parses a whole program.
pub fn parse(text: &str) -> Result<Ast, Vec<ParseError>> {
    let toks = lex(text).map_err(|e| vec![e])?;
    let mut p = Parser { toks, pos: 0 };
    p.program().map_err(|e| vec![e])
}

/// Parses a standalone affine expression such as `2*i + n - 1`.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    p.expect(Tok::Eof, "end of input")?;
    Ok(e)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn advance(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        ParseError {
            code: ParseErrorCode::UnexpectedToken,
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.advance().1)
        } else {
            Err(self.error(&[what]))
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.advance().1;
                Ok((s, span))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn program(&mut self) -> PResult<Ast> {
        let mut decls = Vec::new();
        loop {
            match self.peek() {
                Tok::Param => {
                    let start = self.advance().1;
                    let (name, _) = self.ident()?;
                    let end = self.expect(Tok::Semi, "`;`")?;
                    decls.push(Decl::Param {
                        name,
                        span: start.join(end),
                    });
                }
                Tok::Array => {
                    let start = self.advance().1;
                    let (name, _) = self.ident()?;
                    self.expect(Tok::LBracket, "`[`")?;
                    let length = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    let end = self.expect(Tok::Semi, "`;`")?;
                    decls.push(Decl::Array {
                        name,
                        length,
                        span: start.join(end),
                    });
                }
                _ => break,
            }
        }
        let mut body = Vec::new();
        while *self.peek() != Tok::Eof {
            body.push(self.stmt(true)?);
        }
        Ok(Ast { decls, body })
    }

    fn block(&mut self) -> PResult<(Vec<AstStmt>, SourceSpan)> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut body = Vec::new();
        while *self.peek() != Tok::RBrace {
            body.push(self.stmt(false)?);
        }
        let end = self.advance().1;
        Ok((body, end))
    }

    fn stmt(&mut self, top_level: bool) -> PResult<AstStmt> {
        match self.peek().clone() {
            Tok::For => {
                let start = self.advance().1;
                let (counter, counter_span) = self.ident()?;
                self.expect(Tok::In, "`in`")?;
                let lo = self.expr()?;
                self.expect(Tok::DotDot, "`..`")?;
                let hi = self.expr()?;
                let (body, end) = self.block()?;
                Ok(AstStmt::For {
                    counter,
                    counter_span,
                    lo,
                    hi,
                    body,
                    span: start.join(end),
                })
            }
            Tok::If => {
                let start = self.advance().1;
                let cond = self.cond()?;
                let (then_body, mut end) = self.block()?;
                let mut else_body = Vec::new();
                if *self.peek() == Tok::Else {
                    self.advance();
                    let (b, e) = self.block()?;
                    else_body = b;
                    end = e;
                }
                Ok(AstStmt::If {
                    cond,
                    then_body,
                    else_body,
                    span: start.join(end),
                })
            }
            Tok::Ident(name) => {
                let start = self.advance().1;
                match self.peek() {
                    Tok::LBracket => {
                        let target = self.subscript_tail(name, start)?;
                        let rhs = if *self.peek() == Tok::Assign {
                            self.advance();
                            Some(self.rhs()?)
                        } else {
                            None
                        };
                        let end = self.expect(Tok::Semi, "`;`")?;
                        Ok(AstStmt::Access {
                            target,
                            rhs,
                            span: start.join(end),
                        })
                    }
                    Tok::Assign => {
                        self.advance();
                        let value = self.expr()?;
                        let end = self.expect(Tok::Semi, "`;`")?;
                        Ok(AstStmt::ScalarAssign {
                            name,
                            value,
                            span: start.join(end),
                        })
                    }
                    _ => Err(self.error(&["`[`", "`=`"])),
                }
            }
            _ if top_level => Err(self.error(&["`for`", "`if`", "identifier", "end of input"])),
            _ => Err(self.error(&["`for`", "`if`", "identifier", "`}`"])),
        }
    }

    fn subscript_tail(&mut self, array: String, start: SourceSpan) -> PResult<AstSubscript> {
        self.expect(Tok::LBracket, "`[`")?;
        let index = self.expr()?;
        let end = self.expect(Tok::RBracket, "`]`")?;
        Ok(AstSubscript {
            array,
            index,
            span: start.join(end),
        })
    }

    fn rhs(&mut self) -> PResult<Vec<(Sign, AstRhsTerm)>> {
        let mut terms = Vec::new();
        let mut sign = Sign::Plus;
        if *self.peek() == Tok::Minus {
            self.advance();
            sign = Sign::Minus;
        }
        loop {
            let term = match self.peek().clone() {
                Tok::Int(k) => {
                    self.advance();
                    AstRhsTerm::Literal(k)
                }
                Tok::Ident(name) => {
                    let start = self.advance().1;
                    AstRhsTerm::Read(self.subscript_tail(name, start)?)
                }
                _ => return Err(self.error(&["integer", "array read"])),
            };
            terms.push((sign, term));
            sign = match self.peek() {
                Tok::Plus => Sign::Plus,
                Tok::Minus => Sign::Minus,
                _ => return Ok(terms),
            };
            self.advance();
        }
    }

    fn cond(&mut self) -> PResult<Cond> {
        if *self.peek() == Tok::Star {
            let span = self.advance().1;
            return Ok(Cond::Havoc { span });
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::EqEq => RelOp::Eq,
            Tok::NotEq => RelOp::Ne,
            Tok::Lt => RelOp::Lt,
            Tok::Le => RelOp::Le,
            Tok::Gt => RelOp::Gt,
            Tok::Ge => RelOp::Ge,
            _ => return Err(self.error(&["`==`", "`!=`", "`<`", "`<=`", "`>`", "`>=`"])),
        };
        self.advance();
        let rhs = self.expr()?;
        let span = lhs.span.join(rhs.span);
        Ok(Cond::Compare { lhs, op, rhs, span })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.product()?;
        loop {
            let add = match self.peek() {
                Tok::Plus => true,
                Tok::Minus => false,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.product()?;
            let span = lhs.span.join(rhs.span);
            let kind = if add {
                ExprKind::Add(Box::new(lhs), Box::new(rhs))
            } else {
                ExprKind::Sub(Box::new(lhs), Box::new(rhs))
            };
            lhs = Expr { kind, span };
        }
    }

    fn product(&mut self) -> PResult<Expr> {
        let mut lhs = self.factor()?;
        while *self.peek() == Tok::Star {
            self.advance();
            let rhs = self.factor()?;
            let span = lhs.span.join(rhs.span);
            if !lhs.is_constant() && !rhs.is_constant() {
                return Err(ParseError {
                    code: ParseErrorCode::NonAffineExpression,
                    span,
                    expected: vec![],
                    found: format!("{} * {}", render(&lhs), render(&rhs)),
                });
            }
            lhs = Expr {
                kind: ExprKind::Mul(Box::new(lhs), Box::new(rhs)),
                span,
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(k) => {
                let span = self.advance().1;
                Ok(Expr {
                    kind: ExprKind::Int(k),
                    span,
                })
            }
            Tok::Ident(name) => {
                let start = self.advance().1;
                if *self.peek() == Tok::LBracket {
                    let sub = self.subscript_tail(name, start)?;
                    let span = sub.span;
                    Ok(Expr {
                        kind: ExprKind::Read(Box::new(sub)),
                        span,
                    })
                } else {
                    Ok(Expr {
                        kind: ExprKind::Name(name),
                        span: start,
                    })
                }
            }
            Tok::Minus => {
                let start = self.advance().1;
                let inner = self.factor()?;
                let span = start.join(inner.span);
                Ok(Expr {
                    kind: ExprKind::Neg(Box::new(inner)),
                    span,
                })
            }
            Tok::LParen => {
                let start = self.advance().1;
                let mut inner = self.expr()?;
                let end = self.expect(Tok::RParen, "`)`")?;
                inner.span = start.join(end);
                Ok(inner)
            }
            _ => Err(self.error(&["integer", "identifier", "`(`", "`-`"])),
        }
    }
}

fn render(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(k) => k.to_string(),
        ExprKind::Name(n) => n.clone(),
        ExprKind::Read(s) => format!("{}[{}]", s.array, render(&s.index)),
        ExprKind::Neg(a) => format!("-{}", render(a)),
        ExprKind::Add(a, b) => format!("({} + {})", render(a), render(b)),
        ExprKind::Sub(a, b) => format!("({} - {})", render(a), render(b)),
        ExprKind::Mul(a, b) => format!("{} * {}", render(a), render(b)),
    }
}
