//! Parser and binder for single-aggregate SQL over equi-joins.
//!
//! ```text
//! query     := SELECT agg '(' ( column | '*' ) ')' FROM relation ( ',' relation )*
//!              [ WHERE condition ( AND condition )* ] [ ';' ]
//! agg       := COUNT | SUM | AVG | MIN | MAX
//! relation  := name [ [AS] alias ]
//! condition := column '=' column
//!            | column op literal
//!            | column BETWEEN literal AND literal
//! op        := '=' | '<' | '<=' | '>' | '>='
//! column    := [ qualifier '.' ] name
//! literal   := number | 'single-quoted text'
//! ```
//!
//! Keywords are case-insensitive. Dates are written as `'dd.mm.yyyy'`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::catalog::{parse_date, AttributeKind, Catalog, Dictionary, Key};
use crate::error::{Error, Result};
use crate::inference::{PredicateRegion, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggregate {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl Aggregate {
    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Count => "COUNT",
            Aggregate::Sum => "SUM",
            Aggregate::Avg => "AVG",
            Aggregate::Min => "MIN",
            Aggregate::Max => "MAX",
        }
    }

    fn from_keyword(word: &str) -> Option<Self> {
        Some(match word.to_ascii_uppercase().as_str() {
            "COUNT" => Aggregate::Count,
            "SUM" => Aggregate::Sum,
            "AVG" => Aggregate::Avg,
            "MIN" => Aggregate::Min,
            "MAX" => Aggregate::Max,
            _ => return None,
        })
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnRef {
    pub qualifier: Option<String>,
    pub name: String,
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.qualifier {
            Some(q) => write!(f, "{q}.{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Literal {
    Number(String),
    Text(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => f.write_str(n),
            Literal::Text(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompareOp::Eq => "=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition {
    Join(ColumnRef, ColumnRef),
    Compare(ColumnRef, CompareOp, Literal),
    Between(ColumnRef, Literal, Literal),
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Join(a, b) => write!(f, "{a} = {b}"),
            Condition::Compare(c, op, l) => write!(f, "{c} {op} {l}"),
            Condition::Between(c, lo, hi) => write!(f, "{c} BETWEEN {lo} AND {hi}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationRef {
    pub name: String,
    pub alias: Option<String>,
}

/// Parsed, unbound query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub aggregate: Aggregate,
    /// `None` for `COUNT(*)`.
    pub argument: Option<ColumnRef>,
    pub relations: Vec<RelationRef>,
    pub conditions: Vec<Condition>,
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SELECT {}(", self.aggregate)?;
        match &self.argument {
            Some(c) => write!(f, "{c}")?,
            None => f.write_str("*")?,
        }
        f.write_str(") FROM ")?;
        for (i, r) in self.relations.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(&r.name)?;
            if let Some(a) = &r.alias {
                write!(f, " {a}")?;
            }
        }
        for (i, c) in self.conditions.iter().enumerate() {
            f.write_str(if i == 0 { " WHERE " } else { " AND " })?;
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Text(String),
    Sym(&'static str),
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    /// 1-based character position.
    pos: usize,
}

fn syntax(pos: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        position: pos,
        message: message.into(),
    }
}

fn tokenize(sql: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = sql.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.'))
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
        if starts_number {
            let start = i;
            i += 1;
            let mut seen_dot = c == '.';
            while i < chars.len() && (chars[i].is_ascii_digit() || (chars[i] == '.' && !seen_dot)) {
                seen_dot |= chars[i] == '.';
                i += 1;
            }
            out.push(Token {
                tok: Tok::Number(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        if c == '\'' {
            let mut text = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err(syntax(pos, "unterminated string literal")),
                    Some('\'') if chars.get(i + 1) == Some(&'\'') => {
                        text.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        text.push(ch);
                        i += 1;
                    }
                }
            }
            out.push(Token {
                tok: Tok::Text(text),
                pos,
            });
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let sym = match two.as_str() {
            "<=" => Some("<="),
            ">=" => Some(">="),
            "<>" => Some("<>"),
            "!=" => Some("!="),
            _ => None,
        };
        if let Some(s) = sym {
            out.push(Token { tok: Tok::Sym(s), pos });
            i += 2;
            continue;
        }
        let sym = match c {
            '(' => "(",
            ')' => ")",
            ',' => ",",
            '.' => ".",
            '*' => "*",
            '=' => "=",
            '<' => "<",
            '>' => ">",
            ';' => ";",
            _ => return Err(syntax(pos, format!("unexpected character `{c}`"))),
        };
        out.push(Token {
            tok: Tok::Sym(sym),
            pos,
        });
        i += 1;
    }
    out.push(Token {
        tok: Tok::End,
        pos: chars.len() + 1,
    });
    Ok(out)
}

const RESERVED: &[&str] = &["SELECT", "FROM", "WHERE", "AND", "BETWEEN", "AS"];
const UNSUPPORTED: &[(&str, &str)] = &[
    ("GROUP", "GROUP BY"),
    ("ORDER", "ORDER BY"),
    ("HAVING", "HAVING"),
    ("OR", "OR"),
    ("NOT", "NOT"),
    ("IN", "IN"),
    ("LIKE", "LIKE"),
    ("JOIN", "explicit JOIN"),
    ("LIMIT", "LIMIT"),
    ("UNION", "UNION"),
    ("DISTINCT", "DISTINCT"),
    ("IS", "IS NULL"),
];

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn check_unsupported(&self) -> Result<()> {
        let t = self.peek();
        match &t.tok {
            Tok::Ident(w) => {
                let upper = w.to_ascii_uppercase();
                if let Some((_, name)) = UNSUPPORTED.iter().find(|(k, _)| *k == upper) {
                    return Err(Error::Unsupported(format!("{name} (position {})", t.pos)));
                }
                if upper == "SELECT" {
                    return Err(Error::Unsupported(format!("subquery (position {})", t.pos)));
                }
                Ok(())
            }
            Tok::Sym("<>" | "!=") => Err(Error::Unsupported(format!("inequality `<>` (position {})", t.pos))),
            _ => Ok(()),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(w) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<()> {
        if self.is_keyword(kw) {
            self.next();
            return Ok(());
        }
        self.check_unsupported()?;
        Err(syntax(self.peek().pos, format!("expected {kw}")))
    }

    fn symbol(&mut self, sym: &str) -> Result<()> {
        if self.peek().tok
            == Tok::Sym(match sym {
                "(" => "(",
                ")" => ")",
                "." => ".",
                _ => unreachable!("unexpected symbol"),
            })
        {
            self.next();
            return Ok(());
        }
        if self.is_keyword("SELECT") {
            self.check_unsupported()?;
        }
        Err(syntax(self.peek().pos, format!("expected `{sym}`")))
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        self.check_unsupported()?;
        let t = self.next();
        match t.tok {
            Tok::Ident(w) if !RESERVED.iter().any(|r| w.eq_ignore_ascii_case(r)) => Ok(w),
            _ => Err(syntax(t.pos, format!("expected {what}"))),
        }
    }

    fn column(&mut self) -> Result<ColumnRef> {
        let first = self.ident("column name")?;
        if self.peek().tok == Tok::Sym(".") {
            self.next();
            let name = self.ident("column name")?;
            return Ok(ColumnRef {
                qualifier: Some(first),
                name,
            });
        }
        Ok(ColumnRef {
            qualifier: None,
            name: first,
        })
    }

    fn literal(&mut self) -> Result<Literal> {
        if self.peek().tok == Tok::Sym("(")
            && matches!(&self.tokens[self.at + 1].tok, Tok::Ident(w) if w.eq_ignore_ascii_case("SELECT"))
        {
            return Err(Error::Unsupported(format!("subquery (position {})", self.peek().pos)));
        }
        let t = self.next();
        match t.tok {
            Tok::Number(n) => Ok(Literal::Number(n)),
            Tok::Text(s) => Ok(Literal::Text(s)),
            _ => Err(syntax(t.pos, "expected a literal")),
        }
    }

    fn condition(&mut self) -> Result<Condition> {
        if self.peek().tok == Tok::Sym("(") {
            if matches!(&self.tokens[self.at + 1].tok, Tok::Ident(w) if w.eq_ignore_ascii_case("SELECT")) {
                return Err(Error::Unsupported(format!("subquery (position {})", self.peek().pos)));
            }
            return Err(syntax(self.peek().pos, "parenthesized conditions are not supported"));
        }
        let column = self.column()?;
        if self.is_keyword("BETWEEN") {
            self.next();
            let lo = self.literal()?;
            self.keyword("AND")?;
            let hi = self.literal()?;
            return Ok(Condition::Between(column, lo, hi));
        }
        self.check_unsupported()?;
        let t = self.next();
        let op = match t.tok {
            Tok::Sym("=") => CompareOp::Eq,
            Tok::Sym("<") => CompareOp::Lt,
            Tok::Sym("<=") => CompareOp::Le,
            Tok::Sym(">") => CompareOp::Gt,
            Tok::Sym(">=") => CompareOp::Ge,
            _ => return Err(syntax(t.pos, "expected a comparison operator")),
        };
        if matches!(self.peek().tok, Tok::Ident(_)) {
            let right = self.column()?;
            if op != CompareOp::Eq {
                return Err(Error::Unsupported(format!(
                    "non-equality join condition `{column} {op} {right}`"
                )));
            }
            return Ok(Condition::Join(column, right));
        }
        Ok(Condition::Compare(column, op, self.literal()?))
    }

    fn query(&mut self) -> Result<Query> {
        self.keyword("SELECT")?;
        let t = self.next();
        let aggregate = match &t.tok {
            Tok::Ident(w) => Aggregate::from_keyword(w),
            _ => None,
        }
        .ok_or_else(|| syntax(t.pos, "expected an aggregate (COUNT, SUM, AVG, MIN, MAX)"))?;
        self.symbol("(")?;
        let argument = if self.peek().tok == Tok::Sym("*") {
            let star = self.next();
            if aggregate != Aggregate::Count {
                return Err(syntax(star.pos, format!("{aggregate}(*) is not allowed")));
            }
            None
        } else {
            Some(self.column()?)
        };
        self.symbol(")")?;
        if self.peek().tok == Tok::Sym(",") {
            return Err(Error::Unsupported(format!(
                "more than one select item (position {})",
                self.peek().pos
            )));
        }
        self.keyword("FROM")?;
        let mut relations = Vec::new();
        loop {
            if self.peek().tok == Tok::Sym("(") {
                return Err(Error::Unsupported(format!("subquery (position {})", self.peek().pos)));
            }
            let name = self.ident("relation name")?;
            let alias = if self.is_keyword("AS") {
                self.next();
                Some(self.ident("alias")?)
            } else if matches!(&self.peek().tok, Tok::Ident(w) if !RESERVED.iter().any(|r| w.eq_ignore_ascii_case(r))) {
                Some(self.ident("alias")?)
            } else {
                None
            };
            relations.push(RelationRef { name, alias });
            if self.peek().tok == Tok::Sym(",") {
                self.next();
            } else {
                break;
            }
        }
        let mut conditions = Vec::new();
        if self.is_keyword("WHERE") {
            self.next();
            loop {
                conditions.push(self.condition()?);
                if self.is_keyword("AND") {
                    self.next();
                } else {
                    break;
                }
            }
        }
        if self.peek().tok == Tok::Sym(";") {
            self.next();
        }
        if self.peek().tok != Tok::End {
            self.check_unsupported()?;
            return Err(syntax(self.peek().pos, "unexpected trailing input"));
        }
        Ok(Query {
            aggregate,
            argument,
            relations,
            conditions,
        })
    }
}

pub fn parse(sql: &str) -> Result<Query> {
    Parser {
        tokens: tokenize(sql)?,
        at: 0,
    }
    .query()
}

/// Join condition matched to a declared FK edge; attributes are qualified
/// (`relation.attribute`), `referencing` on the FK side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundJoin {
    pub edge: usize,
    pub referencing: String,
    pub referenced: String,
}

/// Query with names resolved against a catalog and literals encoded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundQuery {
    pub aggregate: Aggregate,
    /// Qualified aggregation attribute; `None` for `COUNT`.
    pub target: Option<String>,
    /// Relations in FROM order.
    pub relations: Vec<String>,
    pub joins: Vec<BoundJoin>,
    /// At most one region per attribute, ordered by attribute name.
    pub predicates: Vec<PredicateRegion>,
}

impl BoundQuery {
    pub fn predicates_on<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = &'a PredicateRegion> + 'a {
        self.predicates
            .iter()
            .filter(move |p| relation_of(&p.attribute) == relation)
    }

    /// Relation owning the aggregation attribute, else the first relation.
    pub fn anchor_relation(&self) -> &str {
        self.target.as_deref().map_or(self.relations[0].as_str(), relation_of)
    }
}

/// Relation part of a qualified attribute name.
pub fn relation_of(qualified: &str) -> &str {
    qualified.split_once('.').map_or(qualified, |(r, _)| r)
}

struct Scope<'a> {
    catalog: &'a Catalog,
    names: BTreeMap<String, String>,
    relations: Vec<String>,
}

impl Scope<'_> {
    fn resolve(&self, column: &ColumnRef) -> Result<(String, AttributeKind)> {
        let relation = match &column.qualifier {
            Some(q) => self
                .names
                .get(q)
                .cloned()
                .ok_or_else(|| Error::UnknownRelation(q.clone()))?,
            None => {
                let owners: Vec<&String> = self
                    .relations
                    .iter()
                    .filter(|r| self.catalog.relations[*r].schema.position(&column.name).is_some())
                    .collect();
                match owners.as_slice() {
                    [one] => (*one).clone(),
                    [] => return Err(Error::UnknownAttribute(column.name.clone())),
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "column `{}` is ambiguous; qualify it",
                            column.name
                        )))
                    }
                }
            }
        };
        let kind = self.catalog.relations[&relation]
            .schema
            .attribute(&column.name)
            .ok_or_else(|| Error::UnknownAttribute(format!("{relation}.{}", column.name)))?
            .kind;
        Ok((format!("{relation}.{}", column.name), kind))
    }
}

fn literal_key<'a>(literal: &'a Literal, kind: AttributeKind, attribute: &str) -> Result<Key<'a>> {
    let mismatch = || Error::TypeMismatch(format!("literal {literal} does not fit {kind} attribute `{attribute}`"));
    match (kind, literal) {
        (AttributeKind::Integer | AttributeKind::Float, Literal::Number(n)) => {
            n.parse::<f64>().map(Key::Num).map_err(|_| mismatch())
        }
        (AttributeKind::Date, Literal::Text(s)) => parse_date(s).map(|d| Key::Num(d as f64)).ok_or_else(mismatch),
        (AttributeKind::Categorical, Literal::Text(s)) => Ok(Key::Text(s)),
        _ => Err(mismatch()),
    }
}

fn interval(lo: u32, hi_exclusive: u32) -> Region {
    if hi_exclusive == 0 || lo >= hi_exclusive {
        Region::empty()
    } else {
        Region::Interval {
            lo,
            hi: hi_exclusive - 1,
        }
    }
}

fn compare_region(dict: &Dictionary, op: CompareOp, key: Key<'_>) -> Region {
    let n = dict.len() as u32;
    match op {
        CompareOp::Eq => dict.find(key).map_or_else(Region::empty, Region::point),
        CompareOp::Lt => interval(0, dict.lower_bound(key)),
        CompareOp::Le => interval(0, dict.upper_bound(key)),
        CompareOp::Gt => interval(dict.upper_bound(key), n),
        CompareOp::Ge => interval(dict.lower_bound(key), n),
    }
}

pub fn bind(query: &Query, catalog: &Catalog) -> Result<BoundQuery> {
    let mut names = BTreeMap::new();
    let mut relations = Vec::new();
    for r in &query.relations {
        catalog.relation(&r.name)?;
        if relations.contains(&r.name) {
            return Err(Error::Unsupported(format!(
                "relation `{}` appears twice (self-join)",
                r.name
            )));
        }
        relations.push(r.name.clone());
        for name in std::iter::once(&r.name).chain(&r.alias) {
            if names
                .insert(name.clone(), r.name.clone())
                .is_some_and(|prev| prev != r.name)
            {
                return Err(Error::InvalidArgument(format!("name `{name}` is bound twice in FROM")));
            }
        }
    }
    let scope = Scope {
        catalog,
        names,
        relations: relations.clone(),
    };

    let target = match &query.argument {
        None => None,
        Some(c) => {
            let (q, kind) = scope.resolve(c)?;
            if query.aggregate != Aggregate::Count && !kind.is_numeric() {
                return Err(Error::TypeMismatch(format!(
                    "{}({q}) needs a numeric attribute, `{q}` is {kind}",
                    query.aggregate
                )));
            }
            Some(q)
        }
    };

    let mut joins = Vec::new();
    let mut regions: BTreeMap<String, Region> = BTreeMap::new();
    let mut add_region = |attribute: String, region: Region| {
        let merged = match regions.remove(&attribute) {
            Some(r) => r.intersect(&region),
            None => region,
        };
        regions.insert(attribute, merged);
    };

    for cond in &query.conditions {
        match cond {
            Condition::Join(a, b) => {
                let (qa, ka) = scope.resolve(a)?;
                let (qb, kb) = scope.resolve(b)?;
                if ka != kb {
                    return Err(Error::TypeMismatch(format!(
                        "join `{qa} = {qb}` compares {ka} with {kb}"
                    )));
                }
                let (ra, xa) = qa.split_once('.').expect("qualified");
                let (rb, xb) = qb.split_once('.').expect("qualified");
                if ra == rb {
                    return Err(Error::Unsupported(format!("join `{qa} = {qb}` within one relation")));
                }
                let edge = catalog.fk_graph.edge_for(ra, xa, rb, xb).ok_or_else(|| {
                    Error::Unsupported(format!("join `{qa} = {qb}` does not follow a declared foreign key"))
                })?;
                let (referencing, referenced) = if catalog.fk_graph.edges[edge].from == ra {
                    (qa.clone(), qb.clone())
                } else {
                    (qb.clone(), qa.clone())
                };
                if joins.iter().any(|j: &BoundJoin| j.edge == edge) {
                    continue;
                }
                joins.push(BoundJoin {
                    edge,
                    referencing,
                    referenced,
                });
            }
            Condition::Compare(c, op, lit) => {
                let (q, kind) = scope.resolve(c)?;
                let (rel, attr) = q.split_once('.').expect("qualified");
                let dict = catalog.dictionary(rel, attr)?;
                let key = literal_key(lit, kind, &q)?;
                add_region(q.clone(), compare_region(dict, *op, key));
            }
            Condition::Between(c, lo, hi) => {
                let (q, kind) = scope.resolve(c)?;
                let (rel, attr) = q.split_once('.').expect("qualified");
                let dict = catalog.dictionary(rel, attr)?;
                let lo = dict.lower_bound(literal_key(lo, kind, &q)?);
                let hi = dict.upper_bound(literal_key(hi, kind, &q)?);
                add_region(q.clone(), interval(lo, hi));
            }
        }
    }

    // Aggregates over an attribute skip its NULLs.
    if let Some(q) = &target {
        let (rel, attr) = q.split_once('.').expect("qualified");
        let dict = catalog.dictionary(rel, attr)?;
        if dict.has_null() {
            add_region(q.clone(), interval(0, dict.len() as u32));
        }
    }

    check_join_tree(&relations, &joins, catalog)?;
    Ok(BoundQuery {
        aggregate: query.aggregate,
        target: if query.aggregate == Aggregate::Count {
            None
        } else {
            target
        },
        relations,
        joins,
        predicates: regions
            .into_iter()
            .map(|(attribute, region)| PredicateRegion { attribute, region })
            .collect(),
    })
}

fn check_join_tree(relations: &[String], joins: &[BoundJoin], catalog: &Catalog) -> Result<()> {
    if joins.len() >= relations.len() {
        return Err(Error::Unsupported("cyclic join graph".into()));
    }
    let mut reached: BTreeSet<&str> = BTreeSet::from([relations[0].as_str()]);
    let mut grew = true;
    while grew {
        grew = false;
        for j in joins {
            let e = &catalog.fk_graph.edges[j.edge];
            let (a, b) = (e.from.as_str(), e.to.as_str());
            if reached.contains(a) != reached.contains(b) {
                reached.insert(a);
                reached.insert(b);
                grew = true;
            }
        }
    }
    if reached.len() != relations.len() {
        let missing: Vec<&str> = relations
            .iter()
            .map(String::as_str)
            .filter(|r| !reached.contains(r))
            .collect();
        return Err(Error::Unanswerable(format!(
            "relations {} are not joined to {}",
            missing.join(", "),
            relations[0]
        )));
    }
    Ok(())
}

pub fn parse_and_bind(sql: &str, catalog: &Catalog) -> Result<BoundQuery> {
    bind(&parse(sql)?, catalog)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG: &str =
        "SELECT SUM(price) FROM Orders o, Customer c WHERE o.c_key=c.c_key AND c.name='C4' AND o.date>='02.03.2022'";

    #[test]
    fn parses_join_query() {
        let q = parse(FIG).unwrap();
        assert_eq!(q.aggregate, Aggregate::Sum);
        let joins = q.conditions.iter().filter(|c| matches!(c, Condition::Join(..))).count();
        assert_eq!(joins, 1);
        assert_eq!(q.conditions.len() - joins, 2);
    }

    #[test]
    fn parses_count_star() {
        let q = parse("select count(*) from T").unwrap();
        assert_eq!(q.argument, None);
        assert!(q.conditions.is_empty());
    }

    #[test]
    fn rejects_out_of_scope_constructs() {
        for sql in [
            "SELECT SUM(x) FROM T GROUP BY y",
            "SELECT SUM(x) FROM T WHERE a = 1 OR b = 2",
            "SELECT SUM(x) FROM T WHERE a <> 1",
            "SELECT SUM(x) FROM T WHERE a = (SELECT 1)",
            "SELECT SUM(x) FROM T ORDER BY x",
            "SELECT SUM(x) FROM T, U WHERE T.a < U.b",
        ] {
            assert!(matches!(parse(sql), Err(Error::Unsupported(_))), "{sql}");
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("SELECT SUM(x FROM T") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn printing_round_trips() {
        let q = parse(FIG).unwrap();
        assert_eq!(parse(&q.to_string()).unwrap(), q);
        let q = parse("SELECT AVG(t.x) FROM T AS t WHERE t.x BETWEEN -1.5 AND 'it''s'").unwrap();
        assert_eq!(parse(&q.to_string()).unwrap(), q);
    }
}
