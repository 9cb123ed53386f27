//! Relations, typed dictionary-encoded columns and the foreign-key graph.
//!
//! Every column is stored as dense `u32` codes into a per-attribute
//! [`Dictionary`] whose order follows the natural order of the values, so
//! range predicates translate into contiguous code intervals. An empty CSV
//! cell becomes the reserved NULL code, which is always the last code of the
//! dictionary and never matches a predicate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of decimal places kept for float attributes.
pub const MAX_FLOAT_DECIMALS: u32 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical,
    Integer,
    Float,
    /// Stored as days since 1970-01-01; written as `dd.mm.yyyy`.
    Date,
}

impl AttributeKind {
    pub fn is_numeric(self) -> bool {
        !matches!(self, AttributeKind::Categorical)
    }

    pub fn name(self) -> &'static str {
        match self {
            AttributeKind::Categorical => "categorical",
            AttributeKind::Integer => "integer",
            AttributeKind::Float => "float",
            AttributeKind::Date => "date",
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttributeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "categorical" | "string" | "text" => Ok(AttributeKind::Categorical),
            "integer" | "int" => Ok(AttributeKind::Integer),
            "float" | "double" | "numeric" => Ok(AttributeKind::Float),
            "date" => Ok(AttributeKind::Date),
            other => Err(Error::Config(format!("unknown attribute type `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub attribute: String,
    pub references: String,
    pub referenced_attribute: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub relation: String,
    pub attributes: Vec<Attribute>,
    pub primary_key: Option<String>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl Schema {
    pub fn new(relation: impl Into<String>, attributes: Vec<Attribute>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for attr in &attributes {
            if !seen.insert(attr.name.as_str()) {
                return Err(Error::DuplicateColumn(attr.name.clone()));
            }
        }
        Ok(Self {
            relation: relation.into(),
            attributes,
            primary_key: None,
            foreign_keys: Vec::new(),
        })
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn with_primary_key(mut self, attribute: &str) -> Result<Self> {
        self.require(attribute)?;
        self.primary_key = Some(attribute.to_string());
        Ok(self)
    }

    pub fn with_foreign_key(mut self, attribute: &str, references: &str, referenced_attribute: &str) -> Result<Self> {
        self.require(attribute)?;
        self.foreign_keys.push(ForeignKey {
            attribute: attribute.to_string(),
            references: references.to_string(),
            referenced_attribute: referenced_attribute.to_string(),
        });
        Ok(self)
    }

    pub fn set_kind(&mut self, attribute: &str, kind: AttributeKind) -> Result<()> {
        let pos = self.require(attribute)?;
        self.attributes[pos].kind = kind;
        Ok(())
    }

    fn require(&self, attribute: &str) -> Result<usize> {
        self.position(attribute)
            .ok_or_else(|| Error::UnknownAttribute(format!("{}.{}", self.relation, attribute)))
    }
}

/// A decoded attribute value.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Date(i64),
    Str(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) | Value::Date(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            Value::Null | Value::Str(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Date(d) => f.write_str(&format_date(*d)),
            Value::Str(s) => f.write_str(s),
        }
    }
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

/// Parses `dd.mm.yyyy` into days since 1970-01-01.
pub fn parse_date(text: &str) -> Option<i64> {
    let mut parts = text.trim().split('.');
    let (d, m, y) = (parts.next()?, parts.next()?, parts.next()?);
    if parts.next().is_some() || d.len() != 2 || m.len() != 2 || y.len() != 4 {
        return None;
    }
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !(all_digits(d) && all_digits(m) && all_digits(y)) {
        return None;
    }
    let date = NaiveDate::from_ymd_opt(y.parse().ok()?, m.parse().ok()?, d.parse().ok()?)?;
    Some(date.signed_duration_since(epoch()).num_days())
}

pub fn format_date(days: i64) -> String {
    let date = epoch() + chrono::Duration::days(days);
    date.format("%d.%m.%Y").to_string()
}

/// Lookup key for range and equality searches in a dictionary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Key<'a> {
    Num(f64),
    Text(&'a str),
}

#[derive(Clone, Debug, PartialEq)]
pub enum DictValues {
    Numbers(Vec<i64>),
    Strings(Vec<String>),
}

/// Sorted value dictionary of one attribute.
///
/// Numbers hold integers, days, or floats scaled by `10^scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "StoredDictionary", from = "StoredDictionary")]
pub struct Dictionary {
    kind: AttributeKind,
    scale: u32,
    values: DictValues,
    has_null: bool,
}

impl Dictionary {
    pub fn kind(&self) -> AttributeKind {
        self.kind
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    /// Number of distinct non-NULL values.
    pub fn len(&self) -> usize {
        match &self.values {
            DictValues::Numbers(v) => v.len(),
            DictValues::Strings(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of codes in use, NULL included.
    pub fn cardinality(&self) -> usize {
        self.len() + usize::from(self.has_null)
    }

    pub fn has_null(&self) -> bool {
        self.has_null
    }

    pub fn null_code(&self) -> Option<u32> {
        self.has_null.then(|| self.len() as u32)
    }

    pub fn is_null(&self, code: u32) -> bool {
        code as usize >= self.len()
    }

    pub fn decode(&self, code: u32) -> Value {
        let i = code as usize;
        match &self.values {
            _ if i >= self.len() => Value::Null,
            DictValues::Strings(v) => Value::Str(v[i].clone()),
            DictValues::Numbers(v) => match self.kind {
                AttributeKind::Float => Value::Float(v[i] as f64 / 10f64.powi(self.scale as i32)),
                AttributeKind::Date => Value::Date(v[i]),
                _ => Value::Int(v[i]),
            },
        }
    }

    /// Numeric value of a code; `None` for NULL and categorical codes.
    pub fn numeric(&self, code: u32) -> Option<f64> {
        match &self.values {
            DictValues::Numbers(v) => v.get(code as usize).map(|&x| self.unscale(x)),
            DictValues::Strings(_) => None,
        }
    }

    fn unscale(&self, x: i64) -> f64 {
        if self.kind == AttributeKind::Float {
            x as f64 / 10f64.powi(self.scale as i32)
        } else {
            x as f64
        }
    }

    fn raw_of(&self, value: &Value) -> Option<RawValue> {
        match (value, &self.values) {
            (Value::Str(s), DictValues::Strings(_)) => Some(RawValue::Text(s.clone())),
            (Value::Int(v) | Value::Date(v), DictValues::Numbers(_)) if self.kind != AttributeKind::Float => {
                Some(RawValue::Number(*v))
            }
            (Value::Float(f), DictValues::Numbers(_)) if self.kind == AttributeKind::Float => {
                Some(RawValue::Number(quantize(*f, self.scale)))
            }
            (Value::Int(v), DictValues::Numbers(_)) if self.kind == AttributeKind::Float => {
                Some(RawValue::Number(quantize(*v as f64, self.scale)))
            }
            _ => None,
        }
    }

    /// Exact code of a value, if present.
    pub fn encode(&self, value: &Value) -> Option<u32> {
        if matches!(value, Value::Null) {
            return self.null_code();
        }
        match (self.raw_of(value)?, &self.values) {
            (RawValue::Number(x), DictValues::Numbers(v)) => v.binary_search(&x).ok().map(|i| i as u32),
            (RawValue::Text(s), DictValues::Strings(v)) => v.binary_search(&s).ok().map(|i| i as u32),
            _ => None,
        }
    }

    /// Number of non-NULL values strictly below `key`.
    pub fn lower_bound(&self, key: Key<'_>) -> u32 {
        self.partition(key, |ord| ord == std::cmp::Ordering::Less)
    }

    /// Number of non-NULL values less than or equal to `key`.
    pub fn upper_bound(&self, key: Key<'_>) -> u32 {
        self.partition(key, |ord| ord != std::cmp::Ordering::Greater)
    }

    /// Code of the value equal to `key`.
    pub fn find(&self, key: Key<'_>) -> Option<u32> {
        let lb = self.lower_bound(key);
        (self.upper_bound(key) > lb).then_some(lb)
    }

    fn partition(&self, key: Key<'_>, pred: impl Fn(std::cmp::Ordering) -> bool) -> u32 {
        let idx = match (&self.values, key) {
            (DictValues::Numbers(v), Key::Num(k)) => {
                v.partition_point(|&x| pred(self.unscale(x).partial_cmp(&k).unwrap_or(std::cmp::Ordering::Less)))
            }
            (DictValues::Strings(v), Key::Text(k)) => v.partition_point(|x| pred(x.as_str().cmp(k))),
            // mismatched keys never match; callers type-check first
            _ => 0,
        };
        idx as u32
    }

    fn from_raw(kind: AttributeKind, scale: u32, cells: &[Option<RawValue>]) -> (Dictionary, Vec<u32>) {
        let has_null = cells.iter().any(Option::is_none);
        let (values, codes) = match kind {
            AttributeKind::Categorical => {
                let distinct: BTreeSet<&str> = cells
                    .iter()
                    .flatten()
                    .map(|r| match r {
                        RawValue::Text(s) => s.as_str(),
                        RawValue::Number(_) => unreachable!("categorical cells are text"),
                    })
                    .collect();
                let sorted: Vec<String> = distinct.into_iter().map(str::to_string).collect();
                let null = sorted.len() as u32;
                let codes = cells
                    .iter()
                    .map(|c| match c {
                        Some(RawValue::Text(s)) => sorted.binary_search(s).expect("value present") as u32,
                        _ => null,
                    })
                    .collect();
                (DictValues::Strings(sorted), codes)
            }
            _ => {
                let distinct: BTreeSet<i64> = cells
                    .iter()
                    .flatten()
                    .map(|r| match r {
                        RawValue::Number(x) => *x,
                        RawValue::Text(_) => unreachable!("numeric cells are numbers"),
                    })
                    .collect();
                let sorted: Vec<i64> = distinct.into_iter().collect();
                let null = sorted.len() as u32;
                let codes = cells
                    .iter()
                    .map(|c| match c {
                        Some(RawValue::Number(x)) => sorted.binary_search(x).expect("value present") as u32,
                        _ => null,
                    })
                    .collect();
                (DictValues::Numbers(sorted), codes)
            }
        };
        (
            Dictionary {
                kind,
                scale,
                values,
                has_null,
            },
            codes,
        )
    }

    /// Builds a dictionary over the union of several dictionaries of the same
    /// kind. Returns the merged dictionary and, per input, an old-code to
    /// new-code map.
    pub fn union(dicts: &[&Dictionary]) -> Result<(Dictionary, Vec<Vec<u32>>)> {
        let first = dicts
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty dictionary union".into()))?;
        let kind = first.kind;
        if let Some(other) = dicts.iter().find(|d| d.kind != kind) {
            return Err(Error::TypeMismatch(format!(
                "cannot unify {} with {}",
                kind, other.kind
            )));
        }
        let scale = dicts.iter().map(|d| d.scale).max().unwrap_or(0);
        let widen = |d: &Dictionary, x: i64| x * 10i64.pow(scale - d.scale);
        let cells: Vec<Option<RawValue>> = dicts
            .iter()
            .flat_map(|d| {
                (0..d.cardinality() as u32).map(move |c| match &d.values {
                    _ if d.is_null(c) => None,
                    DictValues::Numbers(v) => Some(RawValue::Number(widen(d, v[c as usize]))),
                    DictValues::Strings(v) => Some(RawValue::Text(v[c as usize].clone())),
                })
            })
            .collect();
        let (mut merged, codes) = Dictionary::from_raw(kind, scale, &cells);
        // NULL moves to the end of the merged dictionary
        merged.has_null = dicts.iter().any(|d| d.has_null);
        let null = merged.len() as u32;
        let mut maps = Vec::with_capacity(dicts.len());
        let mut offset = 0;
        for d in dicts {
            let n = d.cardinality();
            maps.push(
                (0..n)
                    .map(|i| if d.is_null(i as u32) { null } else { codes[offset + i] })
                    .collect(),
            );
            offset += n;
        }
        Ok((merged, maps))
    }
}

fn quantize(value: f64, scale: u32) -> i64 {
    (value * 10f64.powi(scale as i32)).round() as i64
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum RawValue {
    Number(i64),
    Text(String),
}

/// On-disk dictionary form: numeric dictionaries are run-length encoded as
/// `(start, length)` runs of consecutive values.
#[derive(Clone, Serialize, Deserialize)]
struct StoredDictionary {
    kind: AttributeKind,
    scale: u32,
    has_null: bool,
    runs: Vec<(i64, u32)>,
    strings: Vec<String>,
}

impl From<Dictionary> for StoredDictionary {
    fn from(d: Dictionary) -> Self {
        let mut runs: Vec<(i64, u32)> = Vec::new();
        let mut strings = Vec::new();
        match d.values {
            DictValues::Numbers(v) => {
                for x in v {
                    match runs.last_mut() {
                        Some((start, len)) if *start + *len as i64 == x => *len += 1,
                        _ => runs.push((x, 1)),
                    }
                }
            }
            DictValues::Strings(v) => strings = v,
        }
        StoredDictionary {
            kind: d.kind,
            scale: d.scale,
            has_null: d.has_null,
            runs,
            strings,
        }
    }
}

impl From<StoredDictionary> for Dictionary {
    fn from(s: StoredDictionary) -> Self {
        let values = if s.kind == AttributeKind::Categorical {
            DictValues::Strings(s.strings)
        } else {
            DictValues::Numbers(
                s.runs
                    .iter()
                    .flat_map(|&(start, len)| (0..len as i64).map(move |i| start + i))
                    .collect(),
            )
        };
        Dictionary {
            kind: s.kind,
            scale: s.scale,
            values,
            has_null: s.has_null,
        }
    }
}

/// A dictionary-encoded relation.
#[derive(Clone, Debug)]
pub struct Table {
    schema: Schema,
    columns: Vec<Vec<u32>>,
    dictionaries: Vec<Arc<Dictionary>>,
    n_rows: usize,
}

impl Table {
    pub fn new(schema: Schema, columns: Vec<Vec<u32>>, dictionaries: Vec<Arc<Dictionary>>) -> Result<Self> {
        if columns.len() != schema.attributes.len() || dictionaries.len() != schema.attributes.len() {
            return Err(Error::InvalidArgument(format!(
                "relation `{}` has {} attributes but {} columns",
                schema.relation,
                schema.attributes.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::InvalidArgument(format!(
                "columns of `{}` differ in length",
                schema.relation
            )));
        }
        Ok(Self {
            schema,
            columns,
            dictionaries,
            n_rows,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn name(&self) -> &str {
        &self.schema.relation
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Vec<u32>] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &[u32] {
        &self.columns[index]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&[u32]> {
        self.schema.position(name).map(|i| self.columns[i].as_slice())
    }

    pub fn dictionaries(&self) -> &[Arc<Dictionary>] {
        &self.dictionaries
    }

    pub fn dictionary(&self, index: usize) -> &Arc<Dictionary> {
        &self.dictionaries[index]
    }

    pub fn value(&self, row: usize, column: usize) -> Value {
        self.dictionaries[column].decode(self.columns[column][row])
    }

    /// Contiguous row range sharing this table's dictionaries.
    pub fn slice(&self, rows: Range<usize>) -> Table {
        Table {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c[rows.clone()].to_vec()).collect(),
            dictionaries: self.dictionaries.clone(),
            n_rows: rows.len(),
        }
    }

    pub(crate) fn with_schema(mut self, schema: Schema) -> Table {
        debug_assert_eq!(schema.attributes.len(), self.columns.len());
        self.schema = schema;
        self
    }

    fn remap_column(&mut self, index: usize, dictionary: Arc<Dictionary>, map: &[u32]) {
        for code in &mut self.columns[index] {
            *code = map[*code as usize];
        }
        self.dictionaries[index] = dictionary;
    }
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn read_header<R: Read>(reader: &mut csv::Reader<R>) -> Result<Vec<String>> {
    let header = reader
        .headers()
        .map_err(|e| Error::InvalidArgument(format!("malformed CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::EmptyInput);
    }
    Ok(header)
}

fn looks_integer(s: &str) -> bool {
    s.parse::<i64>().is_ok()
}

fn looks_float(s: &str) -> bool {
    s.parse::<f64>().map(f64::is_finite).unwrap_or(false)
}

/// Infers a schema from CSV text (header plus sample rows). Each column gets
/// the narrowest of integer, float, date, categorical that fits every
/// non-empty sampled cell.
pub fn infer_schema(relation: &str, text: &str) -> Result<Schema> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut reader = csv_reader(text.as_bytes());
    let header = read_header(&mut reader)?;
    let mut candidates = vec![[true; 3]; header.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::InvalidArgument(format!("malformed CSV: {e}")))?;
        for (i, cell) in record.iter().enumerate().take(header.len()) {
            if cell.is_empty() {
                continue;
            }
            let c = &mut candidates[i];
            c[0] &= looks_integer(cell);
            c[1] &= looks_float(cell);
            c[2] &= parse_date(cell).is_some();
        }
    }
    let attributes = header
        .into_iter()
        .zip(candidates)
        .map(|(name, [int, float, date])| {
            let kind = if int {
                AttributeKind::Integer
            } else if float {
                AttributeKind::Float
            } else if date {
                AttributeKind::Date
            } else {
                AttributeKind::Categorical
            };
            Attribute { name, kind }
        })
        .collect();
    Schema::new(relation, attributes)
}

/// Infers a schema from the first `sample_rows` data rows of a CSV file.
pub fn infer_schema_from_path(relation: &str, path: &Path, sample_rows: usize) -> Result<Schema> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sample: String = text.lines().take(sample_rows + 1).flat_map(|l| [l, "\n"]).collect();
    infer_schema(relation, &sample)
}

pub fn load_table(path: &Path, schema: Schema) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_table(std::io::BufReader::new(file), schema)
}

fn decimals_of(s: &str) -> u32 {
    if s.contains(['e', 'E']) {
        return MAX_FLOAT_DECIMALS;
    }
    s.split_once('.')
        .map_or(0, |(_, frac)| frac.len() as u32)
        .min(MAX_FLOAT_DECIMALS)
}

/// Parses CSV from any reader against a declared schema.
pub fn parse_table<R: Read>(input: R, schema: Schema) -> Result<Table> {
    let mut reader = csv_reader(input);
    let header = read_header(&mut reader)?;
    let expected: Vec<&str> = schema.attributes.iter().map(|a| a.name.as_str()).collect();
    if header.iter().map(String::as_str).ne(expected.iter().copied()) {
        return Err(Error::Header {
            relation: schema.relation.clone(),
            message: format!("expected columns {expected:?}, found {header:?}"),
        });
    }
    let width = expected.len();
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); width];
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::InvalidArgument(format!("row {row}: {e}")))?;
        if record.len() == 1 && record.get(0) == Some("") && width > 1 {
            continue;
        }
        if record.len() != width {
            return Err(Error::Arity {
                row,
                expected: width,
                found: record.len(),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            raw[col].push(cell.to_string());
        }
    }

    let mut columns = Vec::with_capacity(width);
    let mut dictionaries = Vec::with_capacity(width);
    for (attr, cells) in schema.attributes.iter().zip(raw) {
        let scale = if attr.kind == AttributeKind::Float {
            cells.iter().map(|c| decimals_of(c)).max().unwrap_or(0)
        } else {
            0
        };
        let parsed = cells
            .iter()
            .enumerate()
            .map(|(i, cell)| parse_cell(attr, scale, cell, i + 1))
            .collect::<Result<Vec<_>>>()?;
        let (dict, codes) = Dictionary::from_raw(attr.kind, scale, &parsed);
        columns.push(codes);
        dictionaries.push(Arc::new(dict));
    }
    Table::new(schema, columns, dictionaries)
}

fn parse_cell(attr: &Attribute, scale: u32, cell: &str, row: usize) -> Result<Option<RawValue>> {
    if cell.is_empty() {
        return Ok(None);
    }
    let fail = || Error::Parse {
        row,
        column: attr.name.clone(),
        value: cell.to_string(),
        kind: attr.kind.name(),
    };
    let raw = match attr.kind {
        AttributeKind::Categorical => RawValue::Text(cell.to_string()),
        AttributeKind::Integer => RawValue::Number(cell.parse().map_err(|_| fail())?),
        AttributeKind::Float => {
            let v: f64 = cell.parse().map_err(|_| fail())?;
            if !v.is_finite() {
                return Err(fail());
            }
            RawValue::Number(quantize(v, scale))
        }
        AttributeKind::Date => RawValue::Number(parse_date(cell).ok_or_else(fail)?),
    };
    Ok(Some(raw))
}

/// Directed PK-FK edge from the referencing relation to the referenced one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FkEdge {
    pub from: String,
    pub attribute: String,
    pub to: String,
    pub to_attribute: String,
}

impl fmt::Display for FkEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{} -> {}.{}",
            self.from, self.attribute, self.to, self.to_attribute
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FkGraph {
    pub relations: Vec<String>,
    pub edges: Vec<FkEdge>,
}

impl FkGraph {
    /// Index of the edge joining `a.x = b.y`, in either direction.
    pub fn edge_for(&self, a: &str, x: &str, b: &str, y: &str) -> Option<usize> {
        self.edges.iter().position(|e| {
            (e.from == a && e.attribute == x && e.to == b && e.to_attribute == y)
                || (e.from == b && e.attribute == y && e.to == a && e.to_attribute == x)
        })
    }

    /// Relations adjacent to `relation`, ignoring edge direction.
    pub fn neighbors<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = (usize, &'a str)> + 'a {
        self.edges.iter().enumerate().filter_map(move |(i, e)| {
            if e.from == relation {
                Some((i, e.to.as_str()))
            } else if e.to == relation {
                Some((i, e.from.as_str()))
            } else {
                None
            }
        })
    }
}

pub fn declare_fk_graph(schemas: &[Schema]) -> Result<FkGraph> {
    let by_name: BTreeMap<&str, &Schema> = schemas.iter().map(|s| (s.relation.as_str(), s)).collect();
    let mut edges = Vec::new();
    for schema in schemas {
        for fk in &schema.foreign_keys {
            let from = format!("{}.{}", schema.relation, fk.attribute);
            let target = by_name
                .get(fk.references.as_str())
                .ok_or_else(|| Error::DanglingForeignKey {
                    from: from.clone(),
                    target: fk.references.clone(),
                })?;
            if schema.position(&fk.attribute).is_none() {
                return Err(Error::UnknownAttribute(from));
            }
            if target.position(&fk.referenced_attribute).is_none() {
                return Err(Error::DanglingForeignKey {
                    from,
                    target: format!("{}.{}", fk.references, fk.referenced_attribute),
                });
            }
            edges.push(FkEdge {
                from: schema.relation.clone(),
                attribute: fk.attribute.clone(),
                to: fk.references.clone(),
                to_attribute: fk.referenced_attribute.clone(),
            });
        }
    }
    let mut relations: Vec<String> = schemas.iter().map(|s| s.relation.clone()).collect();
    relations.sort();
    Ok(FkGraph { relations, edges })
}

/// Schema, dictionaries and size of one relation, without its rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationInfo {
    pub schema: Schema,
    pub dictionaries: Vec<Arc<Dictionary>>,
    pub rows: usize,
}

impl RelationInfo {
    pub fn dictionary(&self, attribute: &str) -> Option<&Arc<Dictionary>> {
        self.schema.position(attribute).map(|i| &self.dictionaries[i])
    }
}

/// Metadata view of a database: everything needed to bind queries and
/// decode estimates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Catalog {
    pub relations: BTreeMap<String, RelationInfo>,
    pub fk_graph: FkGraph,
}

impl Catalog {
    pub fn relation(&self, name: &str) -> Result<&RelationInfo> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn dictionary(&self, relation: &str, attribute: &str) -> Result<&Arc<Dictionary>> {
        self.relation(relation)?
            .dictionary(attribute)
            .ok_or_else(|| Error::UnknownAttribute(format!("{relation}.{attribute}")))
    }
}

/// A set of loaded tables plus their FK graph.
///
/// Join attributes connected by foreign keys share one dictionary, so their
/// codes are directly comparable across relations.
#[derive(Clone, Debug)]
pub struct Database {
    tables: BTreeMap<String, Table>,
    fk_graph: FkGraph,
}

impl Database {
    pub fn new(tables: Vec<Table>) -> Result<Self> {
        let schemas: Vec<Schema> = tables.iter().map(|t| t.schema.clone()).collect();
        let fk_graph = declare_fk_graph(&schemas)?;
        let mut by_name = BTreeMap::new();
        for table in tables {
            let name = table.name().to_string();
            if by_name.insert(name.clone(), table).is_some() {
                return Err(Error::InvalidArgument(format!("relation `{name}` loaded twice")));
            }
        }
        let mut db = Database {
            tables: by_name,
            fk_graph,
        };
        db.unify_key_domains()?;
        Ok(db)
    }

    pub fn tables(&self) -> impl Iterator<Item = &Table> {
        self.tables.values()
    }

    pub fn table(&self, name: &str) -> Result<&Table> {
        self.tables
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn fk_graph(&self) -> &FkGraph {
        &self.fk_graph
    }

    pub fn catalog(&self) -> Catalog {
        Catalog {
            relations: self
                .tables
                .iter()
                .map(|(name, t)| {
                    (
                        name.clone(),
                        RelationInfo {
                            schema: t.schema.clone(),
                            dictionaries: t.dictionaries.clone(),
                            rows: t.n_rows,
                        },
                    )
                })
                .collect(),
            fk_graph: self.fk_graph.clone(),
        }
    }

    fn unify_key_domains(&mut self) -> Result<()> {
        // union-find over (relation, attribute) pairs linked by foreign keys
        let mut nodes: Vec<(String, String)> = Vec::new();
        let mut index = BTreeMap::new();
        let mut parent: Vec<usize> = Vec::new();
        let mut id = |rel: &str, attr: &str, nodes: &mut Vec<(String, String)>, parent: &mut Vec<usize>| {
            *index.entry((rel.to_string(), attr.to_string())).or_insert_with(|| {
                nodes.push((rel.to_string(), attr.to_string()));
                parent.push(parent.len());
                parent.len() - 1
            })
        };
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for edge in &self.fk_graph.edges {
            let a = id(&edge.from, &edge.attribute, &mut nodes, &mut parent);
            let b = id(&edge.to, &edge.to_attribute, &mut nodes, &mut parent);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..nodes.len() {
            groups.entry(find(&mut parent, i)).or_default().push(i);
        }
        for members in groups.values() {
            let dicts: Vec<&Dictionary> = members
                .iter()
                .map(|&m| {
                    let (rel, attr) = &nodes[m];
                    let t = &self.tables[rel];
                    t.dictionaries[t.schema.position(attr).expect("validated by fk graph")].as_ref()
                })
                .collect();
            let (merged, maps) = Dictionary::union(&dicts).map_err(|e| match e {
                Error::TypeMismatch(msg) => {
                    let names: Vec<String> = members
                        .iter()
                        .map(|&m| format!("{}.{}", nodes[m].0, nodes[m].1))
                        .collect();
                    Error::TypeMismatch(format!("foreign-key attributes {}: {msg}", names.join(", ")))
                }
                other => other,
            })?;
            let merged = Arc::new(merged);
            for (&m, map) in members.iter().zip(maps) {
                let (rel, attr) = &nodes[m];
                let table = self.tables.get_mut(rel).expect("relation exists");
                let pos = table.schema.position(attr).expect("attribute exists");
                table.remap_column(pos, merged.clone(), &map);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(name: &str, text: &str) -> Table {
        parse_table(text.as_bytes(), infer_schema(name, text).unwrap()).unwrap()
    }

    #[test]
    fn infers_narrowest_types() {
        let schema = infer_schema(
            "T",
            "a,b,c,d\n1,02.03.2022,C1,1.5\n2,01.01.2021,C4,2\n3,01.01.2021,C4,3\n",
        )
        .unwrap();
        let kinds: Vec<_> = schema.attributes.iter().map(|a| a.kind).collect();
        assert_eq!(
            kinds,
            [
                AttributeKind::Integer,
                AttributeKind::Date,
                AttributeKind::Categorical,
                AttributeKind::Float
            ]
        );
    }

    #[test]
    fn infer_rejects_empty_and_duplicates() {
        assert!(matches!(infer_schema("T", ""), Err(Error::EmptyInput)));
        assert!(matches!(
            infer_schema("T", "a,a\n1,2\n"),
            Err(Error::DuplicateColumn(_))
        ));
    }

    #[test]
    fn dictionary_encoding_by_sorted_order() {
        let t = table("T", "x\n5\n5\n7\n");
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.column(0), &[0, 0, 1]);
        assert_eq!(t.dictionary(0).decode(0), Value::Int(5));
        assert_eq!(t.dictionary(0).decode(1), Value::Int(7));
    }

    #[test]
    fn empty_data_section() {
        let schema = Schema::new(
            "T",
            vec![Attribute {
                name: "x".into(),
                kind: AttributeKind::Integer,
            }],
        )
        .unwrap();
        let t = parse_table("x\n".as_bytes(), schema).unwrap();
        assert_eq!(t.n_rows(), 0);
        assert!(t.dictionary(0).is_empty());
    }

    #[test]
    fn reports_row_of_bad_cells() {
        let schema = infer_schema("T", "a,b\n1,2\n").unwrap();
        let err = parse_table("a,b\n1,2\n3,x\n".as_bytes(), schema.clone()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
        let err = parse_table("a,b\n1,2\n3\n".as_bytes(), schema).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Arity {
                    row: 2,
                    expected: 2,
                    found: 1
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn dates_are_consecutive_days() {
        let a = parse_date("02.03.2022").unwrap();
        let b = parse_date("01.03.2022").unwrap();
        assert_eq!(a - b, 1);
        assert_eq!(format_date(a), "02.03.2022");
        assert!(parse_date("2022-03-02").is_none());
        assert!(parse_date("31.02.2022").is_none());
    }

    #[test]
    fn floats_are_quantized() {
        let t = table("T", "x\n1.25\n0.5\n3\n");
        let d = t.dictionary(0);
        assert_eq!(d.scale(), 2);
        assert_eq!(t.column(0), &[1, 0, 2]);
        assert_eq!(d.decode(0), Value::Float(0.5));
        assert_eq!(d.numeric(1), Some(1.25));
    }

    #[test]
    fn nulls_take_the_last_code() {
        let t = table("T", "x,y\n3,a\n,b\n1,\n");
        let d = t.dictionary(0);
        assert_eq!(d.null_code(), Some(2));
        assert_eq!(t.column(0), &[1, 2, 0]);
        assert_eq!(t.value(1, 0), Value::Null);
        assert_eq!(t.column(1), &[0, 1, 2]);
    }

    #[test]
    fn range_bounds() {
        let t = table("T", "x\n10\n20\n30\n");
        let d = t.dictionary(0);
        assert_eq!(d.lower_bound(Key::Num(20.0)), 1);
        assert_eq!(d.upper_bound(Key::Num(20.0)), 2);
        assert_eq!(d.lower_bound(Key::Num(25.0)), 2);
        assert_eq!(d.find(Key::Num(30.0)), Some(2));
        assert_eq!(d.find(Key::Num(31.0)), None);
    }

    #[test]
    fn fk_graph_edges_and_errors() {
        let customer = infer_schema("Customer", "c_key,name\n1,C1\n").unwrap();
        let orders = infer_schema("Orders", "o_key,c_key\n1,1\n")
            .unwrap()
            .with_foreign_key("c_key", "Customer", "c_key")
            .unwrap();
        let g = declare_fk_graph(&[orders.clone(), customer.clone()]).unwrap();
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].from, "Orders");
        assert_eq!(g.edges[0].to, "Customer");
        assert!(declare_fk_graph(&[customer.clone()]).unwrap().edges.is_empty());
        let dangling = orders.clone().with_foreign_key("c_key", "Nation", "n_key").unwrap();
        assert!(matches!(
            declare_fk_graph(&[dangling, customer]),
            Err(Error::DanglingForeignKey { .. })
        ));
    }

    #[test]
    fn key_domains_are_unified() {
        let customer = table("Customer", "c_key,name\n1,C1\n4,C4\n5,C5\n");
        let text = "o_key,c_key\n1,4\n2,9\n";
        let schema = infer_schema("Orders", text)
            .unwrap()
            .with_foreign_key("c_key", "Customer", "c_key")
            .unwrap();
        let orders = parse_table(text.as_bytes(), schema).unwrap();
        let db = Database::new(vec![customer, orders]).unwrap();
        let c = db.table("Customer").unwrap();
        let o = db.table("Orders").unwrap();
        assert!(Arc::ptr_eq(c.dictionary(0), o.dictionary(1)));
        assert_eq!(c.column(0), &[0, 1, 2]);
        assert_eq!(o.column(1), &[1, 3]);
        assert_eq!(o.value(1, 1), Value::Int(9));
    }

    #[test]
    fn stored_dictionary_is_run_length_encoded() {
        let t = table("T", "x\n1\n2\n3\n7\n8\n");
        let stored = StoredDictionary::from(t.dictionary(0).as_ref().clone());
        assert_eq!(stored.runs, vec![(1, 3), (7, 2)]);
        assert_eq!(Dictionary::from(stored), *t.dictionary(0).as_ref());
    }
}
