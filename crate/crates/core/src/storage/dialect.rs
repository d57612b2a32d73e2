//! Parser for the statement dialect emitted by the query builder.
//!
//! Only the clause shapes the builder produces are understood, plus explicit
//! column projections and `*` for hand-written requests. Anything else is
//! rejected as malformed.

use crate::query::{CompareOp, Direction};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Projection {
    All,
    Columns(Vec<String>),
}

/// Condition tree; `param` is the index of the placeholder in text order.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Cond {
    Const(bool),
    Compare { field: String, op: CompareOp, param: usize },
    IsNull { field: String, negated: bool },
    And(Vec<Cond>),
    Or(Vec<Cond>),
    Not(Box<Cond>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Command {
    Select {
        table: String,
        projection: Projection,
        filter: Option<Cond>,
        order: Vec<(String, Direction)>,
        limit: Option<usize>,
        offset: Option<usize>,
    },
    Insert {
        table: String,
        columns: Vec<String>,
        params: Vec<usize>,
    },
    Update {
        table: String,
        sets: Vec<(String, usize)>,
        filter: Option<Cond>,
    },
    Delete {
        table: String,
        filter: Option<Cond>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Number(i64),
    Sym(&'static str),
}

fn tokenize(text: &str) -> Result<Vec<Token>, String> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token::Word(text[start..i].to_owned()));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n = text[start..i].parse().map_err(|_| "numeric literal out of range")?;
            out.push(Token::Number(n));
        } else {
            let two = text.get(i..i + 2);
            let sym = match (two, c) {
                (Some("<="), _) => "<=",
                (Some(">="), _) => ">=",
                (Some("<>"), _) => "<>",
                (_, '(') => "(",
                (_, ')') => ")",
                (_, ',') => ",",
                (_, '?') => "?",
                (_, '=') => "=",
                (_, '<') => "<",
                (_, '>') => ">",
                (_, '*') => "*",
                _ => return Err(format!("unexpected character {c:?}")),
            };
            i += sym.len();
            out.push(Token::Sym(sym));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_param: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Token::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_keyword(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), String> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(format!("expected {kw}"))
        }
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Token::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sym(&mut self, sym: &str) -> Result<(), String> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(format!("expected {sym:?}"))
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        match self.peek() {
            Some(Token::Word(w)) if !is_keyword(w) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err("expected identifier".into()),
        }
    }

    fn placeholder(&mut self) -> Result<usize, String> {
        self.sym("?")?;
        let idx = self.next_param;
        self.next_param += 1;
        Ok(idx)
    }

    fn ident_list(&mut self) -> Result<Vec<String>, String> {
        let mut items = vec![self.ident()?];
        while self.eat_sym(",") {
            items.push(self.ident()?);
        }
        Ok(items)
    }

    fn where_clause(&mut self) -> Result<Option<Cond>, String> {
        if self.eat_keyword("WHERE") {
            Ok(Some(self.or_expr()?))
        } else {
            Ok(None)
        }
    }

    fn or_expr(&mut self) -> Result<Cond, String> {
        let mut items = vec![self.and_expr()?];
        while self.eat_keyword("OR") {
            items.push(self.and_expr()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Cond::Or(items)
        })
    }

    fn and_expr(&mut self) -> Result<Cond, String> {
        let mut items = vec![self.unary()?];
        while self.eat_keyword("AND") {
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Cond::And(items)
        })
    }

    fn unary(&mut self) -> Result<Cond, String> {
        if self.eat_keyword("NOT") {
            return Ok(Cond::Not(Box::new(self.unary()?)));
        }
        if self.eat_sym("(") {
            let inner = self.or_expr()?;
            self.sym(")")?;
            return Ok(inner);
        }
        if let Some(Token::Number(a)) = self.peek().cloned() {
            self.pos += 1;
            self.sym("=")?;
            return match self.peek().cloned() {
                Some(Token::Number(b)) => {
                    self.pos += 1;
                    Ok(Cond::Const(a == b))
                }
                _ => Err("expected numeric literal".into()),
            };
        }
        let field = self.ident()?;
        if self.eat_keyword("IS") {
            let negated = self.eat_keyword("NOT");
            self.keyword("NULL")?;
            return Ok(Cond::IsNull { field, negated });
        }
        let op = if self.eat_keyword("LIKE") {
            CompareOp::Like
        } else {
            let op = match self.peek() {
                Some(Token::Sym("=")) => CompareOp::Eq,
                Some(Token::Sym("<>")) => CompareOp::Neq,
                Some(Token::Sym("<")) => CompareOp::Lt,
                Some(Token::Sym("<=")) => CompareOp::Le,
                Some(Token::Sym(">")) => CompareOp::Gt,
                Some(Token::Sym(">=")) => CompareOp::Ge,
                _ => return Err(format!("expected comparison after {field}")),
            };
            self.pos += 1;
            op
        };
        let param = self.placeholder()?;
        Ok(Cond::Compare { field, op, param })
    }

    fn select(&mut self) -> Result<Command, String> {
        let projection = if self.eat_sym("*") {
            Projection::All
        } else {
            Projection::Columns(self.ident_list()?)
        };
        self.keyword("FROM")?;
        let table = self.ident()?;
        let filter = self.where_clause()?;
        let mut order = Vec::new();
        if self.eat_keyword("ORDER") {
            self.keyword("BY")?;
            loop {
                let field = self.ident()?;
                let dir = if self.eat_keyword("DESC") {
                    Direction::Desc
                } else {
                    self.eat_keyword("ASC");
                    Direction::Asc
                };
                order.push((field, dir));
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_keyword("LIMIT") {
            Some(self.placeholder()?)
        } else {
            None
        };
        let offset = if self.eat_keyword("OFFSET") {
            Some(self.placeholder()?)
        } else {
            None
        };
        Ok(Command::Select {
            table,
            projection,
            filter,
            order,
            limit,
            offset,
        })
    }

    fn insert(&mut self) -> Result<Command, String> {
        self.keyword("INTO")?;
        let table = self.ident()?;
        self.sym("(")?;
        let columns = self.ident_list()?;
        self.sym(")")?;
        self.keyword("VALUES")?;
        self.sym("(")?;
        let mut params = vec![self.placeholder()?];
        while self.eat_sym(",") {
            params.push(self.placeholder()?);
        }
        self.sym(")")?;
        if params.len() != columns.len() {
            return Err("column and value counts differ".into());
        }
        Ok(Command::Insert {
            table,
            columns,
            params,
        })
    }

    fn update(&mut self) -> Result<Command, String> {
        let table = self.ident()?;
        self.keyword("SET")?;
        let mut sets = Vec::new();
        loop {
            let field = self.ident()?;
            self.sym("=")?;
            sets.push((field, self.placeholder()?));
            if !self.eat_sym(",") {
                break;
            }
        }
        let filter = self.where_clause()?;
        Ok(Command::Update { table, sets, filter })
    }

    fn delete(&mut self) -> Result<Command, String> {
        self.keyword("FROM")?;
        let table = self.ident()?;
        let filter = self.where_clause()?;
        Ok(Command::Delete { table, filter })
    }
}

fn is_keyword(word: &str) -> bool {
    crate::schema::KEYWORDS
        .iter()
        .any(|k| k.eq_ignore_ascii_case(word))
}

/// Parses statement text; returns the command and the number of
/// placeholders it contains.
pub(crate) fn parse(text: &str) -> Result<(Command, usize), String> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        next_param: 0,
    };
    let command = if p.eat_keyword("SELECT") {
        p.select()?
    } else if p.eat_keyword("INSERT") {
        p.insert()?
    } else if p.eat_keyword("UPDATE") {
        p.update()?
    } else if p.eat_keyword("DELETE") {
        p.delete()?
    } else {
        return Err("expected SELECT, INSERT, UPDATE or DELETE".into());
    };
    if p.pos != p.tokens.len() {
        return Err(format!("unexpected trailing input at token {}", p.pos));
    }
    Ok((command, p.next_param))
}
