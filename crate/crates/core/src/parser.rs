//! The `.omq` text format.
//!
//! ```text
//! % comments run to the end of the line
//! schema { P/1, R/2, T/1 }
//! data { P, T }
//! tgds t {
//!   P(x) -> exists y . R(x,y).
//!   R(x,y) -> P(y).
//!   T(x) -> P(x).
//! }
//! query q(x) :- R(x,y), P(y).
//! database d { P(a). T(b). }
//! ```
//!
//! Inside rules and queries a term is a variable when it starts with an
//! uppercase letter, with `?`, or is one of the letters `u`..`z` optionally
//! followed by digits, underscores or primes (`x`, `y2`, `z'`). Everything
//! else is a constant; double quotes force a constant (`"x"`). Inside a
//! `database` block every term is a constant.
//!
//! `data { ... }` names the data schema; without it every declared
//! predicate is a data predicate. Predicates that are used without being
//! declared are added to the schema with the arity of their first use.
//!
//! Repeated `query` clauses with the same name form a union. A query name
//! may be qualified with a tgd block, `query t/q(x) :- ...`, to pair it with
//! that block only; an unqualified query is paired with all tgd blocks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::model::{
    Atom, Constant, Cq, Database, ModelError, NullId, Omq, Predicate, Schema, Term, Tgd, Ucq,
    Variable, FROZEN_PREFIX,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Arity,
    Safety,
    ReservedName,
    UnknownName,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept constants in the reserved `$frz` namespace, as printed in
    /// counterexamples.
    pub allow_frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedQuery {
    pub name: String,
    /// The tgd block the query is paired with; `None` means all blocks.
    pub tgds: Option<String>,
    pub query: Ucq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProgramError {
    UnknownQuery(String),
    UnknownDatabase(String),
    UnknownTgds(String),
    Model(ModelError),
}

impl fmt::Display for ProgramError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProgramError::UnknownQuery(n) => write!(f, "no query named {n}"),
            ProgramError::UnknownDatabase(n) => write!(f, "no database named {n}"),
            ProgramError::UnknownTgds(n) => write!(f, "no tgd block named {n}"),
            ProgramError::Model(e) => e.fmt(f),
        }
    }
}

impl std::error::Error for ProgramError {}

/// A parsed program.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub schema: Schema,
    /// Names of the data predicates, when declared explicitly.
    pub data: Option<BTreeSet<String>>,
    pub tgd_blocks: Vec<(String, Vec<Tgd>)>,
    pub queries: Vec<NamedQuery>,
    pub databases: Vec<(String, Database)>,
}

impl Program {
    pub fn data_schema(&self) -> Schema {
        match &self.data {
            None => self.schema.clone(),
            Some(names) => {
                let mut s = Schema::new();
                for p in self.schema.predicates() {
                    if names.contains(p.name()) {
                        s.insert(&p).expect("subset of a schema");
                    }
                }
                s
            }
        }
    }

    /// Every tgd of every block, in program order.
    pub fn tgds(&self) -> Vec<Tgd> {
        self.tgd_blocks
            .iter()
            .flat_map(|(_, ts)| ts.iter().cloned())
            .collect()
    }

    pub fn tgd_block(&self, name: &str) -> Option<&[Tgd]> {
        self.tgd_blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, ts)| ts.as_slice())
    }

    pub fn query(&self, name: &str) -> Option<&NamedQuery> {
        self.queries.iter().find(|q| q.name == name)
    }

    pub fn database(&self, name: &str) -> Option<&Database> {
        self.databases
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, d)| d)
    }

    /// The OMQ `(S, Σ, q)` for the named query.
    pub fn omq(&self, query: &str) -> Result<Omq, ProgramError> {
        let nq = self
            .query(query)
            .ok_or_else(|| ProgramError::UnknownQuery(query.to_string()))?;
        let tgds = match &nq.tgds {
            None => self.tgds(),
            Some(block) => self
                .tgd_block(block)
                .ok_or_else(|| ProgramError::UnknownTgds(block.clone()))?
                .to_vec(),
        };
        Omq::new(self.data_schema(), tgds, nq.query.clone()).map_err(ProgramError::Model)
    }
}

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parse_program_with(text, ParseOptions::default())
}

pub fn parse_program_with(text: &str, options: ParseOptions) -> Result<Program, ParseError> {
    let tokens = lex(text)?;
    Parser::new(tokens, options).program()
}

/// Parses a rule list such as `P(x) -> R(x). R(x,y) -> P(y).` (no block
/// wrapper). Arities are inferred.
pub fn parse_tgds(text: &str) -> Result<Vec<Tgd>, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser::new(tokens, ParseOptions::default());
    let mut out = Vec::new();
    while !p.at_end() {
        out.push(p.tgd()?);
    }
    Ok(out)
}

/// Parses a single conjunctive query `q(x) :- R(x,y)` (trailing `.`
/// optional).
pub fn parse_cq(text: &str) -> Result<Cq, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser::new(tokens, ParseOptions::default());
    let (_, cq) = p.query_clause()?;
    p.eat_if(&Tok::Dot);
    p.expect_end()?;
    Ok(cq)
}

/// Parses a union `q(x) :- A(x) | q(x) :- B(x)` written as clauses
/// separated by `|` or by `.`.
pub fn parse_ucq(text: &str) -> Result<Ucq, ParseError> {
    let mut out = Vec::new();
    for part in text.split(['|', '\n']).map(str::trim).filter(|s| !s.is_empty()) {
        for clause in split_clauses(part) {
            out.push(parse_cq(&clause)?);
        }
    }
    Ucq::new(out).map_err(|e| ParseError {
        kind: ParseErrorKind::Syntax,
        line: 1,
        column: 1,
        message: e.to_string(),
    })
}

fn split_clauses(text: &str) -> Vec<String> {
    // clauses end with '.' followed by whitespace or end of text
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &ch) in chars.iter().enumerate() {
        if ch == '.' && chars.get(i + 1).map_or(true, |c| c.is_whitespace()) {
            if !cur.trim().is_empty() {
                out.push(cur.trim().to_string());
            }
            cur.clear();
        } else {
            cur.push(ch);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// Parses ground atoms `P(a). R(a,b).` into a database.
pub fn parse_database(text: &str) -> Result<Database, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser::new(tokens, ParseOptions::default());
    let mut atoms = Vec::new();
    while !p.at_end() {
        atoms.push(p.atom(Context::Data)?);
        p.expect(&Tok::Dot)?;
    }
    Database::new(atoms).map_err(|e| p.model_error(e))
}

// ---------------------------------------------------------------------------
// lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    QVar(String),
    Quoted(String),
    Null(String),
    Arrow,
    Turnstile,
    Dot,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Slash,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::QVar(s) => write!(f, "`?{s}`"),
            Tok::Quoted(s) => write!(f, "\"{s}\""),
            Tok::Null(s) => write!(f, "`_:{s}`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Turnstile => f.write_str("`:-`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Slash => f.write_str("`/`"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$' || c == '\''
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError {
        kind: ParseErrorKind::Syntax,
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                advance(1, &mut i);
            }
            continue;
        }
        let simple = match c {
            '.' => Some(Tok::Dot),
            ',' => Some(Tok::Comma),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '/' => Some(Tok::Slash),
            _ => None,
        };
        let tok = if let Some(t) = simple {
            advance(1, &mut i);
            t
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            advance(2, &mut i);
            Tok::Arrow
        } else if c == ':' && chars.get(i + 1) == Some(&'-') {
            advance(2, &mut i);
            Tok::Turnstile
        } else if c == '_' && chars.get(i + 1) == Some(&':') {
            advance(2, &mut i);
            let s = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(1, &mut i);
            }
            Tok::Null(chars[s..i].iter().collect())
        } else if c == '"' {
            advance(1, &mut i);
            let s = i;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                advance(1, &mut i);
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(err(start_line, start_col, "unterminated string".into()));
            }
            let body: String = chars[s..i].iter().collect();
            advance(1, &mut i);
            Tok::Quoted(body)
        } else if c == '?' {
            advance(1, &mut i);
            let s = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                advance(1, &mut i);
            }
            if s == i {
                return Err(err(start_line, start_col, "expected a name after `?`".into()));
            }
            Tok::QVar(chars[s..i].iter().collect())
        } else if is_ident_char(c) {
            let s = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                advance(1, &mut i);
            }
            Tok::Ident(chars[s..i].iter().collect())
        } else {
            return Err(err(start_line, start_col, format!("unexpected character `{c}`")));
        };
        out.push(Spanned {
            tok,
            line: start_line,
            column: start_col,
        });
    }
    Ok(out)
}

/// Whether a bare identifier denotes a variable inside rules and queries.
pub fn is_variable_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_uppercase() => true,
        Some('u'..='z') => chars.all(|c| c.is_ascii_digit() || c == '_' || c == '\''),
        _ => false,
    }
}

fn is_bare_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_ident_char) && !s.starts_with("_:")
}

const KEYWORDS: [&str; 7] = ["schema", "data", "tgds", "query", "database", "exists", "true"];

// ---------------------------------------------------------------------------
// parser

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Context {
    Rule,
    Data,
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    options: ParseOptions,
    schema: Schema,
    declared: BTreeSet<String>,
}

impl Parser {
    fn new(tokens: Vec<Spanned>, options: ParseOptions) -> Self {
        Parser {
            tokens,
            pos: 0,
            options,
            schema: Schema::new(),
            declared: BTreeSet::new(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|s| &s.tok)
    }

    fn location(&self) -> (usize, usize) {
        match self.tokens.get(self.pos).or_else(|| self.tokens.last()) {
            Some(s) => (s.line, s.column),
            None => (1, 1),
        }
    }

    fn error(&self, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        let (line, column) = self.location();
        ParseError {
            kind,
            line,
            column,
            message: message.into(),
        }
    }

    fn error_at(&self, at: usize, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        let s = &self.tokens[at.min(self.tokens.len().saturating_sub(1))];
        ParseError {
            kind,
            line: s.line,
            column: s.column,
            message: message.into(),
        }
    }

    fn model_error(&self, e: ModelError) -> ParseError {
        let kind = match e {
            ModelError::ArityMismatch { .. } | ModelError::SchemaConflict { .. } => {
                ParseErrorKind::Arity
            }
            ModelError::UnsafeAnswerVariable(_) => ParseErrorKind::Safety,
            _ => ParseErrorKind::Syntax,
        };
        self.error(kind, e.to_string())
    }

    fn next(&mut self) -> Result<Tok, ParseError> {
        match self.tokens.get(self.pos) {
            Some(s) => {
                self.pos += 1;
                Ok(s.tok.clone())
            }
            None => Err(self.error(ParseErrorKind::Syntax, "unexpected end of input")),
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t == tok => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(self.error(
                ParseErrorKind::Syntax,
                format!("expected {tok}, found {t}"),
            )),
            None => Err(self.error(
                ParseErrorKind::Syntax,
                format!("expected {tok}, found end of input"),
            )),
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(self.error(ParseErrorKind::Syntax, format!("unexpected {t}"))),
        }
    }

    fn eat_if(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            t => {
                self.pos -= 1;
                Err(self.error(ParseErrorKind::Syntax, format!("expected a name, found {t}")))
            }
        }
    }

    fn number(&mut self) -> Result<usize, ParseError> {
        let at = self.pos;
        let s = self.name()?;
        s.parse()
            .map_err(|_| self.error_at(at, ParseErrorKind::Syntax, format!("expected an arity, found `{s}`")))
    }

    fn program(mut self) -> Result<Program, ParseError> {
        let mut program = Program::default();
        let mut data_names: Option<(usize, BTreeSet<String>)> = None;
        let mut query_order: Vec<String> = Vec::new();
        let mut queries: BTreeMap<String, (Option<String>, Vec<Cq>, usize)> = BTreeMap::new();
        while !self.at_end() {
            let at = self.pos;
            let kw = self.name()?;
            match kw.as_str() {
                "schema" => {
                    self.expect(&Tok::LBrace)?;
                    if !self.eat_if(&Tok::RBrace) {
                        loop {
                            let at = self.pos;
                            let name = self.name()?;
                            self.expect(&Tok::Slash)?;
                            let arity = self.number()?;
                            if self.declared.contains(&name)
                                && self.schema.arity_of(&name) != Some(arity)
                            {
                                return Err(self.error_at(
                                    at,
                                    ParseErrorKind::Arity,
                                    format!("predicate {name} declared twice with different arities"),
                                ));
                            }
                            self.declare(at, &Predicate::new(&name, arity))?;
                            self.declared.insert(name);
                            if self.eat_if(&Tok::RBrace) {
                                break;
                            }
                            self.expect(&Tok::Comma)?;
                        }
                    }
                }
                "data" => {
                    self.expect(&Tok::LBrace)?;
                    let mut names = data_names.take().map(|(_, n)| n).unwrap_or_default();
                    if !self.eat_if(&Tok::RBrace) {
                        loop {
                            names.insert(self.name()?);
                            if self.eat_if(&Tok::RBrace) {
                                break;
                            }
                            self.expect(&Tok::Comma)?;
                        }
                    }
                    data_names = Some((at, names));
                }
                "tgds" => {
                    let name = self.name()?;
                    self.expect(&Tok::LBrace)?;
                    let mut tgds = Vec::new();
                    while !self.eat_if(&Tok::RBrace) {
                        tgds.push(self.tgd()?);
                    }
                    match program.tgd_blocks.iter_mut().find(|(n, _)| *n == name) {
                        Some((_, existing)) => existing.extend(tgds),
                        None => program.tgd_blocks.push((name, tgds)),
                    }
                }
                "query" => {
                    let (name, block, cq) = self.qualified_query_clause()?;
                    self.expect(&Tok::Dot)?;
                    match queries.get_mut(&name) {
                        Some((existing_block, disjuncts, first_at)) => {
                            if *existing_block != block {
                                return Err(self.error_at(
                                    at,
                                    ParseErrorKind::Syntax,
                                    format!("clauses of query {name} are paired with different tgd blocks"),
                                ));
                            }
                            if disjuncts[0].arity() != cq.arity() {
                                let _ = first_at;
                                return Err(self.error_at(
                                    at,
                                    ParseErrorKind::Arity,
                                    format!("clauses of query {name} have different answer arities"),
                                ));
                            }
                            disjuncts.push(cq);
                        }
                        None => {
                            query_order.push(name.clone());
                            queries.insert(name, (block, vec![cq], at));
                        }
                    }
                }
                "database" => {
                    let name = self.name()?;
                    self.expect(&Tok::LBrace)?;
                    let mut atoms = Vec::new();
                    while !self.eat_if(&Tok::RBrace) {
                        atoms.push(self.atom(Context::Data)?);
                        self.expect(&Tok::Dot)?;
                    }
                    let db = Database::new(atoms).map_err(|e| self.model_error(e))?;
                    program.databases.push((name, db));
                }
                other => {
                    return Err(self.error_at(
                        at,
                        ParseErrorKind::Syntax,
                        format!("expected schema, data, tgds, query or database, found `{other}`"),
                    ))
                }
            }
        }
        for name in query_order {
            let (block, disjuncts, at) = queries.remove(&name).expect("recorded");
            if let Some(b) = &block {
                if !program.tgd_blocks.iter().any(|(n, _)| n == b) {
                    return Err(self.error_at(
                        at,
                        ParseErrorKind::UnknownName,
                        format!("query {name} refers to unknown tgd block {b}"),
                    ));
                }
            }
            let query = Ucq::new(disjuncts).map_err(|e| self.error_at(at, ParseErrorKind::Arity, e.to_string()))?;
            program.queries.push(NamedQuery {
                name,
                tgds: block,
                query,
            });
        }
        if let Some((at, names)) = data_names {
            if let Some(missing) = names.iter().find(|n| !self.schema.contains_name(n)) {
                return Err(self.error_at(
                    at,
                    ParseErrorKind::UnknownName,
                    format!("data predicate {missing} is not in the schema"),
                ));
            }
            program.data = Some(names);
        }
        program.schema = self.schema;
        Ok(program)
    }

    fn declare(&mut self, at: usize, p: &Predicate) -> Result<(), ParseError> {
        self.schema.insert(p).map_err(|_| {
            let declared = self.schema.arity_of(p.name()).unwrap_or(0);
            self.error_at(
                at,
                ParseErrorKind::Arity,
                format!(
                    "predicate {} has arity {declared} but is used with {} arguments",
                    p.name(),
                    p.arity()
                ),
            )
        })
    }

    fn tgd(&mut self) -> Result<Tgd, ParseError> {
        let start = self.pos;
        let body = if self.eat_keyword("true") {
            Vec::new()
        } else {
            self.atoms(Context::Rule)?
        };
        self.expect(&Tok::Arrow)?;
        let mut declared_exists = BTreeSet::new();
        if self.eat_keyword("exists") {
            loop {
                let at = self.pos;
                match self.term(Context::Rule)? {
                    Term::Variable(v) => {
                        declared_exists.insert(v);
                    }
                    t => {
                        return Err(self.error_at(
                            at,
                            ParseErrorKind::Syntax,
                            format!("`{t}` after exists is not a variable"),
                        ))
                    }
                }
                if !self.eat_if(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::Dot)?;
        }
        let head = self.atoms(Context::Rule)?;
        self.expect(&Tok::Dot)?;
        let tgd = Tgd::new(body, head).map_err(|e| self.error_at(start, ParseErrorKind::Syntax, e.to_string()))?;
        let body_vars = tgd.body_variables();
        if let Some(v) = declared_exists.iter().find(|v| body_vars.contains(v)) {
            return Err(self.error_at(
                start,
                ParseErrorKind::Safety,
                format!("existential variable {v} also occurs in the body"),
            ));
        }
        if let Some(v) = tgd
            .existentials()
            .into_iter()
            .find(|v| !declared_exists.contains(v))
        {
            return Err(self.error_at(
                start,
                ParseErrorKind::Safety,
                format!("head variable {v} neither occurs in the body nor is existentially quantified"),
            ));
        }
        Ok(tgd)
    }

    fn qualified_query_clause(&mut self) -> Result<(String, Option<String>, Cq), ParseError> {
        let first = self.name()?;
        let (block, name) = if self.eat_if(&Tok::Slash) {
            (Some(first), self.name()?)
        } else {
            (None, first)
        };
        let cq = self.query_rest()?;
        Ok((name, block, cq))
    }

    fn query_clause(&mut self) -> Result<(String, Cq), ParseError> {
        let name = self.name()?;
        let cq = self.query_rest()?;
        Ok((name, cq))
    }

    fn query_rest(&mut self) -> Result<Cq, ParseError> {
        let at = self.pos;
        self.expect(&Tok::LParen)?;
        let mut answer = Vec::new();
        if !self.eat_if(&Tok::RParen) {
            loop {
                answer.push(self.term(Context::Rule)?);
                if self.eat_if(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        self.expect(&Tok::Turnstile)?;
        let body = if self.eat_keyword("true") {
            Vec::new()
        } else {
            self.atoms(Context::Rule)?
        };
        Cq::new(answer, body).map_err(|e| {
            let kind = match e {
                ModelError::UnsafeAnswerVariable(_) => ParseErrorKind::Safety,
                _ => ParseErrorKind::Syntax,
            };
            self.error_at(at, kind, e.to_string())
        })
    }

    fn atoms(&mut self, ctx: Context) -> Result<Vec<Atom>, ParseError> {
        let mut out = vec![self.atom(ctx)?];
        while self.eat_if(&Tok::Comma) {
            out.push(self.atom(ctx)?);
        }
        Ok(out)
    }

    fn atom(&mut self, ctx: Context) -> Result<Atom, ParseError> {
        let at = self.pos;
        let name = self.name()?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(self.error_at(
                at,
                ParseErrorKind::Syntax,
                format!("keyword `{name}` cannot be a predicate"),
            ));
        }
        let mut args = Vec::new();
        if self.eat_if(&Tok::LParen) && !self.eat_if(&Tok::RParen) {
            loop {
                args.push(self.term(ctx)?);
                if self.eat_if(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        let p = Predicate::new(&name, args.len());
        self.declare(at, &p)?;
        Atom::new(p, args).map_err(|e| self.error_at(at, ParseErrorKind::Arity, e.to_string()))
    }

    fn term(&mut self, ctx: Context) -> Result<Term, ParseError> {
        let at = self.pos;
        let tok = self.next()?;
        let term = match tok {
            Tok::Ident(s) => {
                if ctx == Context::Rule && is_variable_name(&s) {
                    Term::Variable(Variable::new(s))
                } else {
                    Term::Constant(Constant::new(s))
                }
            }
            Tok::Quoted(s) => Term::Constant(Constant::new(s)),
            Tok::QVar(s) => {
                if ctx == Context::Data {
                    return Err(self.error_at(
                        at,
                        ParseErrorKind::Syntax,
                        format!("variable ?{s} in a database"),
                    ));
                }
                Term::Variable(Variable::new(s))
            }
            Tok::Null(s) => {
                return Err(self.error_at(
                    at,
                    ParseErrorKind::ReservedName,
                    format!("labeled null _:{s} cannot appear in input"),
                ))
            }
            t => {
                return Err(self.error_at(at, ParseErrorKind::Syntax, format!("expected a term, found {t}")))
            }
        };
        if let Term::Constant(c) = &term {
            if c.name().starts_with(FROZEN_PREFIX) && !self.options.allow_frozen {
                return Err(self.error_at(
                    at,
                    ParseErrorKind::ReservedName,
                    format!("constant {c} uses the reserved {FROZEN_PREFIX} prefix"),
                ));
            }
        }
        Ok(term)
    }
}

// ---------------------------------------------------------------------------
// serialization

pub fn format_term(t: &Term) -> String {
    match t {
        Term::Variable(v) => {
            if is_variable_name(v.name()) {
                v.name().to_string()
            } else {
                format!("?{}", v.name())
            }
        }
        Term::Constant(c) => format_constant(c),
        Term::Null(NullId(n)) => format!("_:{n}"),
    }
}

pub fn format_constant(c: &Constant) -> String {
    let name = c.name();
    if is_bare_identifier(name) && !is_variable_name(name) {
        name.to_string()
    } else {
        format!("\"{name}\"")
    }
}

pub fn format_atom(a: &Atom) -> String {
    let args: Vec<String> = a.args().iter().map(format_term).collect();
    format!("{}({})", a.predicate().name(), args.join(","))
}

fn format_atoms(atoms: &[&Atom]) -> String {
    atoms
        .iter()
        .map(|a| format_atom(a))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn format_tgd(t: &Tgd) -> String {
    let mut s = String::new();
    if t.is_fact() {
        s.push_str("true");
    } else {
        s.push_str(&format_atoms(&t.body().iter().collect::<Vec<_>>()));
    }
    s.push_str(" -> ");
    let ex = t.existentials();
    if !ex.is_empty() {
        let names: Vec<String> = ex
            .iter()
            .map(|v| format_term(&Term::Variable(v.clone())))
            .collect();
        let _ = write!(s, "exists {} . ", names.join(", "));
    }
    s.push_str(&format_atoms(&t.head().iter().collect::<Vec<_>>()));
    s.push('.');
    s
}

/// `name(x̄) :- body.`
pub fn format_cq(name: &str, q: &Cq) -> String {
    let answer: Vec<String> = q.answer().iter().map(format_term).collect();
    let body = if q.is_truth() {
        "true".to_string()
    } else {
        format_atoms(&q.body().iter().collect::<Vec<_>>())
    };
    format!("{name}({}) :- {body}.", answer.join(","))
}

/// Ground atoms as `P(a). R(a,_:1).`; also used for chase results.
pub fn format_facts<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> String {
    atoms
        .into_iter()
        .map(|a| format!("{}.", format_atom(a)))
        .collect::<Vec<_>>()
        .join(" ")
}

/// `database name { ... }`
pub fn format_database_block<'a>(name: &str, atoms: impl IntoIterator<Item = &'a Atom>) -> String {
    let facts = format_facts(atoms);
    if facts.is_empty() {
        format!("database {name} {{ }}")
    } else {
        format!("database {name} {{ {facts} }}")
    }
}

pub fn serialize_program(p: &Program) -> String {
    let mut out = String::new();
    let preds: Vec<String> = p.schema.predicates().map(|p| p.to_string()).collect();
    let _ = writeln!(out, "schema {{ {} }}", preds.join(", "));
    if let Some(data) = &p.data {
        let names: Vec<&str> = data.iter().map(String::as_str).collect();
        let _ = writeln!(out, "data {{ {} }}", names.join(", "));
    }
    for (name, tgds) in &p.tgd_blocks {
        if tgds.is_empty() {
            let _ = writeln!(out, "tgds {name} {{ }}");
            continue;
        }
        let _ = writeln!(out, "tgds {name} {{");
        for t in tgds {
            let _ = writeln!(out, "  {}", format_tgd(t));
        }
        let _ = writeln!(out, "}}");
    }
    for q in &p.queries {
        let name = match &q.tgds {
            Some(block) => format!("{block}/{}", q.name),
            None => q.name.clone(),
        };
        for d in q.query.disjuncts() {
            let _ = writeln!(out, "query {}", format_cq(&name, d));
        }
    }
    for (name, db) in &p.databases {
        let _ = writeln!(out, "{}", format_database_block(name, db.iter()));
    }
    out
}

/// Serializes an OMQ as a self-contained program with a single tgd block
/// `t` and query `q`.
pub fn serialize_omq(omq: &Omq) -> String {
    let program = Program {
        schema: omq.full_schema(),
        data: Some(
            omq.data_schema()
                .predicates()
                .map(|p| p.name().to_string())
                .collect(),
        ),
        tgd_blocks: vec![("t".to_string(), omq.tgds().to_vec())],
        queries: vec![NamedQuery {
            name: "q".to_string(),
            tgds: None,
            query: omq.query().clone(),
        }],
        databases: Vec::new(),
    };
    serialize_program(&program)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "schema { P/1, R/2, T/1 } tgds t { P(x) -> exists y . R(x,y). R(x,y) -> P(y). T(x) -> P(x). } query q(x) :- R(x,y), P(y).";

    #[test]
    fn parses_the_running_example() {
        let p = parse_program(EXAMPLE).unwrap();
        assert_eq!(p.schema.len(), 3);
        assert_eq!(p.tgds().len(), 3);
        let t0 = &p.tgds()[0];
        assert_eq!(t0.existentials().len(), 1);
        let q = &p.query("q").unwrap().query;
        assert_eq!(q.len(), 1);
        assert_eq!(q.disjuncts()[0].len(), 2);
        assert_eq!(q.arity(), 1);
    }

    #[test]
    fn boolean_query_with_constant() {
        let p = parse_program("schema { P/1 } query q() :- P(a).").unwrap();
        let q = &p.query("q").unwrap().query.disjuncts()[0];
        assert!(q.is_boolean());
        assert_eq!(q.body().iter().next().unwrap().args()[0], Term::constant("a"));
    }

    #[test]
    fn arity_conflict_is_reported_with_location() {
        let e = parse_program("schema { P/1 } tgds t { P(x,y) -> P(x). }").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Arity);
        assert_eq!((e.line, e.column), (1, 25));
    }

    #[test]
    fn safety_errors() {
        let e = parse_program("query q(x) :- P(y).").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Safety);
        let e = parse_program("tgds t { P(x) -> R(x,y). }").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Safety);
        let e = parse_program("tgds t { P(x) -> exists x . R(x). }").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Safety);
    }

    #[test]
    fn reserved_names() {
        let e = parse_program("database d { P($frz0). }").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::ReservedName);
        let e = parse_program("database d { P(_:1). }").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::ReservedName);
        let ok = parse_program_with(
            "database d { P($frz0). }",
            ParseOptions { allow_frozen: true },
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn syntax_error_location_on_second_line() {
        let e = parse_program("schema { P/1 }\nquery q(x) :- P(x)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert_eq!(e.line, 2);
    }

    #[test]
    fn fact_tgds_and_unions() {
        let p = parse_program(
            "tgds t { true -> exists z . P(z). }\nquery q(x) :- P(x).\nquery q(x) :- T(x).",
        )
        .unwrap();
        assert!(p.tgds()[0].is_fact());
        assert_eq!(p.query("q").unwrap().query.len(), 2);
    }

    #[test]
    fn qualified_queries_select_their_block() {
        let p = parse_program(
            "tgds t { T(x) -> P(x). } tgds none { } query t/q1(x) :- P(x). query none/q2(x) :- P(x).",
        )
        .unwrap();
        assert_eq!(p.omq("q1").unwrap().tgds().len(), 1);
        assert!(p.omq("q2").unwrap().tgds().is_empty());
        assert!(parse_program("query nope/q(x) :- P(x).").is_err());
    }

    #[test]
    fn data_schema_block() {
        let p = parse_program(&format!("{EXAMPLE} data {{ P, T }}")).unwrap();
        let s = p.data_schema();
        assert_eq!(s.len(), 2);
        assert!(!s.contains_name("R"));
        assert!(parse_program("schema { P/1 } data { Q }").is_err());
    }

    #[test]
    fn variable_naming_rule() {
        for v in ["x", "y2", "z'", "u_1", "X", "Foo"] {
            assert!(is_variable_name(v), "{v}");
        }
        for c in ["a", "b", "c1", "0", "1", "xa", "alice"] {
            assert!(!is_variable_name(c), "{c}");
        }
    }

    #[test]
    fn serialization_examples() {
        let p = parse_program("tgds t { }").unwrap();
        assert!(serialize_program(&p).contains("tgds t { }"));
        let p = parse_program("schema { P/1 } database d { P(a). }").unwrap();
        assert!(serialize_program(&p).contains("database d { P(a). }"));
    }

    #[test]
    fn round_trip_of_the_running_example() {
        let p = parse_program(&format!("{EXAMPLE} data {{ P, T }} database d {{ P(a). T(\"x\"). }}")).unwrap();
        let text = serialize_program(&p);
        let again = parse_program(&text).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn odd_names_survive_round_trip() {
        let q = Cq::new(
            vec![Term::variable("a")],
            [Atom::from_name(
                "R",
                vec![Term::variable("a"), Term::constant("X y")],
            )],
        )
        .unwrap();
        let text = format_cq("q", &q);
        assert_eq!(parse_cq(&text).unwrap(), q);
    }
}
