//! Stream schema, instances and dataset ingestion.
//!
//! A dataset is a headerless CSV file plus a sidecar schema file. The schema
//! is a line-oriented key/value document:
//!
//! ```text
//! # comment
//! attribute=age,numeric
//! attribute=sex,nominal:Female|Male
//! attribute=income,nominal:<=50K|>50K
//! class=income
//! positive=>50K
//! sensitive=sex
//! deprived=Female
//! exclude=sex
//! ```
//!
//! `attribute` lines are given in data-file column order. The class column is
//! one of them; it must be nominal with exactly two labels. `exclude` (optional,
//! repeatable) keeps an attribute out of the candidate set of every learner
//! while still loading it.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use thiserror::Error;

use crate::fairness::GroupCounts;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot open {path}: {source}")]
    Open { path: PathBuf, source: io::Error },
    #[error("read error at line {line}: {source}")]
    Read { line: usize, source: io::Error },
    #[error("schema line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: class label {label:?} is not one of the declared pair")]
    UnknownClass { line: usize, label: String },
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("attribute {0:?} is numeric; ordering needs a nominal attribute")]
    NumericAttribute(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeKind {
    Nominal(Vec<String>),
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    /// Excluded attributes are loaded but never offered as split candidates.
    pub excluded: bool,
}

impl AttributeSpec {
    pub fn nominal<S: Into<String>>(name: S, values: &[&str]) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::Nominal(values.iter().map(|v| v.to_string()).collect()),
            excluded: false,
        }
    }

    pub fn numeric<S: Into<String>>(name: S) -> Self {
        AttributeSpec {
            name: name.into(),
            kind: AttributeKind::Numeric,
            excluded: false,
        }
    }

    pub fn excluded(mut self) -> Self {
        self.excluded = true;
        self
    }

    pub fn is_nominal(&self) -> bool {
        matches!(self.kind, AttributeKind::Nominal(_))
    }

    /// Domain size for nominal attributes, 0 for numeric ones.
    pub fn arity(&self) -> usize {
        match &self.kind {
            AttributeKind::Nominal(values) => values.len(),
            AttributeKind::Numeric => 0,
        }
    }

    fn value_index(&self, cell: &str) -> Option<usize> {
        match &self.kind {
            AttributeKind::Nominal(values) => values.iter().position(|v| v == cell),
            AttributeKind::Numeric => None,
        }
    }
}

/// Binary class attribute with a designated positive ("granted") label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    pub name: String,
    pub labels: [String; 2],
    pub positive: usize,
    /// Position of the class column in the data file.
    pub column: usize,
}

impl ClassSpec {
    pub fn negative(&self) -> usize {
        1 - self.positive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitiveSpec {
    /// Index into `Schema::attributes`.
    pub attribute: usize,
    /// Value index of the deprived community `s`.
    pub deprived: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub attributes: Vec<AttributeSpec>,
    pub class: ClassSpec,
    pub sensitive: SensitiveSpec,
}

impl Schema {
    /// Builds and validates a schema. `class_column` is the position of the
    /// class column among the data-file columns (attributes plus class).
    pub fn new(
        attributes: Vec<AttributeSpec>,
        class_name: &str,
        labels: [&str; 2],
        positive: &str,
        class_column: usize,
        sensitive: &str,
        deprived: &str,
    ) -> Result<Self, LoadError> {
        let mut seen = HashSet::new();
        for a in &attributes {
            if !seen.insert(a.name.as_str()) || a.name == class_name {
                return Err(LoadError::InvalidSchema(format!(
                    "duplicate attribute name {:?}",
                    a.name
                )));
            }
            if let AttributeKind::Nominal(values) = &a.kind {
                if values.is_empty() {
                    return Err(LoadError::InvalidSchema(format!(
                        "nominal attribute {:?} has an empty domain",
                        a.name
                    )));
                }
                let distinct: HashSet<_> = values.iter().collect();
                if distinct.len() != values.len() {
                    return Err(LoadError::InvalidSchema(format!(
                        "nominal attribute {:?} lists a value twice",
                        a.name
                    )));
                }
            }
        }
        if labels[0] == labels[1] {
            return Err(LoadError::InvalidSchema("class labels must differ".into()));
        }
        let positive = labels
            .iter()
            .position(|l| *l == positive)
            .ok_or_else(|| {
                LoadError::InvalidSchema(format!("positive label {positive:?} is not a class label"))
            })?;
        if class_column > attributes.len() {
            return Err(LoadError::InvalidSchema("class column out of range".into()));
        }
        let s_index = attributes
            .iter()
            .position(|a| a.name == sensitive)
            .ok_or_else(|| LoadError::InvalidSchema(format!("unknown sensitive attribute {sensitive:?}")))?;
        let s_attr = &attributes[s_index];
        if s_attr.arity() != 2 {
            return Err(LoadError::InvalidSchema(format!(
                "sensitive attribute {sensitive:?} must be nominal with exactly two values"
            )));
        }
        let deprived = s_attr.value_index(deprived).ok_or_else(|| {
            LoadError::InvalidSchema(format!("deprived value {deprived:?} not in {sensitive:?}"))
        })?;
        Ok(Schema {
            attributes,
            class: ClassSpec {
                name: class_name.to_string(),
                labels: [labels[0].to_string(), labels[1].to_string()],
                positive,
                column: class_column,
            },
            sensitive: SensitiveSpec {
                attribute: s_index,
                deprived,
            },
        })
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// `Some(true)` for the deprived community, `None` when S is missing.
    pub fn is_deprived(&self, instance: &Instance) -> Option<bool> {
        instance.values[self.sensitive.attribute]
            .nominal()
            .map(|v| v == self.sensitive.deprived)
    }

    pub fn is_positive(&self, label: usize) -> bool {
        label == self.class.positive
    }

    /// Community counts of the true labels; instances with a missing
    /// sensitive value are skipped.
    pub fn label_groups(&self, instances: &[Instance]) -> GroupCounts {
        let mut counts = GroupCounts::default();
        for inst in instances {
            if let Some(d) = self.is_deprived(inst) {
                counts.update(d, self.is_positive(inst.label));
            }
        }
        counts
    }

    pub fn column_count(&self) -> usize {
        self.attributes.len() + 1
    }

    /// Largest nominal domain, at least 1.
    pub fn max_arity(&self) -> usize {
        self.attributes.iter().map(|a| a.arity()).max().unwrap_or(0).max(1)
    }

    pub fn predictive_count(&self) -> usize {
        self.attributes.iter().filter(|a| !a.excluded).count()
    }

    /// Checks arity and nominal ranges of an instance.
    pub fn conforms(&self, instance: &Instance) -> bool {
        if instance.values.len() != self.attributes.len() || instance.label > 1 {
            return false;
        }
        instance
            .values
            .iter()
            .zip(&self.attributes)
            .all(|(v, a)| match (v, &a.kind) {
                (Value::Missing, _) => true,
                (Value::Nominal(i), AttributeKind::Nominal(d)) => (*i as usize) < d.len(),
                (Value::Numeric(x), AttributeKind::Numeric) => x.is_finite(),
                _ => false,
            })
    }

    pub fn parse(text: &str) -> Result<Schema, LoadError> {
        let mut attributes = Vec::new();
        let mut class_name = None;
        let mut positive = None;
        let mut sensitive = None;
        let mut deprived = None;
        let mut exclude = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| LoadError::Schema {
                line: line_no,
                message: message.to_string(),
            };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key=value"))?;
            let value = value.trim();
            match key.trim() {
                "attribute" => {
                    let (name, kind) = value
                        .split_once(',')
                        .ok_or_else(|| err("expected attribute=<name>,<kind>"))?;
                    let name = name.trim().to_string();
                    let kind = kind.trim();
                    let kind = if kind == "numeric" {
                        AttributeKind::Numeric
                    } else if let Some(values) = kind.strip_prefix("nominal:") {
                        AttributeKind::Nominal(values.split('|').map(|v| v.trim().to_string()).collect())
                    } else {
                        return Err(err("kind must be `numeric` or `nominal:<v1|v2|...>`"));
                    };
                    attributes.push(AttributeSpec {
                        name,
                        kind,
                        excluded: false,
                    });
                }
                "class" => class_name = Some(value.to_string()),
                "positive" => positive = Some(value.to_string()),
                "sensitive" => sensitive = Some(value.to_string()),
                "deprived" => deprived = Some(value.to_string()),
                "exclude" => exclude.push(value.to_string()),
                other => return Err(err(&format!("unknown key {other:?}"))),
            }
        }

        let missing = |k: &str| LoadError::InvalidSchema(format!("missing `{k}=` entry"));
        let class_name = class_name.ok_or_else(|| missing("class"))?;
        let positive = positive.ok_or_else(|| missing("positive"))?;
        let sensitive = sensitive.ok_or_else(|| missing("sensitive"))?;
        let deprived = deprived.ok_or_else(|| missing("deprived"))?;

        let class_column = attributes
            .iter()
            .position(|a| a.name == class_name)
            .ok_or_else(|| LoadError::InvalidSchema(format!("class attribute {class_name:?} not declared")))?;
        let class_attr = attributes.remove(class_column);
        let labels = match &class_attr.kind {
            AttributeKind::Nominal(v) if v.len() == 2 => [v[0].clone(), v[1].clone()],
            _ => {
                return Err(LoadError::InvalidSchema(
                    "class attribute must be nominal with exactly two labels".into(),
                ))
            }
        };
        for name in &exclude {
            let a = attributes
                .iter_mut()
                .find(|a| &a.name == name)
                .ok_or_else(|| LoadError::InvalidSchema(format!("cannot exclude unknown attribute {name:?}")))?;
            a.excluded = true;
        }
        Schema::new(
            attributes,
            &class_name,
            [&labels[0], &labels[1]],
            &positive,
            class_column,
            &sensitive,
            &deprived,
        )
    }

    /// Renders the schema back into the sidecar format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut attr_line = |name: &str, kind: &AttributeKind| {
            let kind = match kind {
                AttributeKind::Numeric => "numeric".to_string(),
                AttributeKind::Nominal(v) => format!("nominal:{}", v.join("|")),
            };
            out.push_str(&format!("attribute={name},{kind}\n"));
        };
        let class_kind = AttributeKind::Nominal(self.class.labels.to_vec());
        for col in 0..self.column_count() {
            if col == self.class.column {
                attr_line(&self.class.name, &class_kind);
            } else {
                let a = &self.attributes[self.attribute_of_column(col)];
                attr_line(&a.name, &a.kind);
            }
        }
        out.push_str(&format!("class={}\n", self.class.name));
        out.push_str(&format!("positive={}\n", self.class.labels[self.class.positive]));
        let s = &self.attributes[self.sensitive.attribute];
        out.push_str(&format!("sensitive={}\n", s.name));
        if let AttributeKind::Nominal(v) = &s.kind {
            out.push_str(&format!("deprived={}\n", v[self.sensitive.deprived]));
        }
        for a in self.attributes.iter().filter(|a| a.excluded) {
            out.push_str(&format!("exclude={}\n", a.name));
        }
        out
    }

    fn attribute_of_column(&self, col: usize) -> usize {
        if col < self.class.column {
            col
        } else {
            col - 1
        }
    }

    /// Parses one CSV record. `line` is only used for error reporting.
    pub fn parse_record(&self, record: &str, line: usize, arrival_index: u64) -> Result<Instance, LoadError> {
        let cells: Vec<&str> = record.split(',').map(str::trim).collect();
        if cells.len() != self.column_count() {
            return Err(LoadError::ColumnCount {
                line,
                expected: self.column_count(),
                found: cells.len(),
            });
        }
        let mut values = Vec::with_capacity(self.attributes.len());
        let mut label = None;
        for (col, cell) in cells.iter().enumerate() {
            if col == self.class.column {
                label = self.class.labels.iter().position(|l| l == cell);
                if label.is_none() {
                    return Err(LoadError::UnknownClass {
                        line,
                        label: cell.to_string(),
                    });
                }
                continue;
            }
            let attr = &self.attributes[self.attribute_of_column(col)];
            let value = match &attr.kind {
                AttributeKind::Nominal(_) => attr
                    .value_index(cell)
                    .map(|i| Value::Nominal(i as u32))
                    .unwrap_or(Value::Missing),
                AttributeKind::Numeric => match cell.parse::<f64>() {
                    Ok(x) if x.is_finite() => Value::Numeric(x),
                    _ => Value::Missing,
                },
            };
            values.push(value);
        }
        Ok(Instance {
            values,
            label: label.expect("class column visited"),
            arrival_index,
        })
    }

    /// Formats an instance as a CSV record (no trailing newline).
    pub fn format_record(&self, instance: &Instance) -> String {
        let mut cells = Vec::with_capacity(self.column_count());
        for col in 0..self.column_count() {
            if col == self.class.column {
                cells.push(self.class.labels[instance.label].clone());
                continue;
            }
            let a = self.attribute_of_column(col);
            cells.push(match (&instance.values[a], &self.attributes[a].kind) {
                (Value::Nominal(i), AttributeKind::Nominal(d)) => d[*i as usize].clone(),
                (Value::Numeric(x), _) => format!("{x}"),
                _ => "?".to_string(),
            });
        }
        cells.join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Nominal(u32),
    Numeric(f64),
    Missing,
}

impl Value {
    pub fn nominal(self) -> Option<usize> {
        match self {
            Value::Nominal(i) => Some(i as usize),
            _ => None,
        }
    }

    pub fn numeric(self) -> Option<f64> {
        match self {
            Value::Numeric(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_missing(self) -> bool {
        matches!(self, Value::Missing)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// One value per schema attribute (class excluded).
    pub values: Vec<Value>,
    /// Index into `ClassSpec::labels`.
    pub label: usize,
    pub arrival_index: u64,
}

impl Instance {
    pub fn new(values: Vec<Value>, label: usize) -> Self {
        Instance {
            values,
            label,
            arrival_index: 0,
        }
    }
}

/// Lazily parses a data file, one instance per non-blank line.
pub struct InstanceReader {
    schema: Schema,
    lines: io::Lines<Box<dyn BufRead>>,
    line: usize,
    next_index: u64,
    skipped_blank: usize,
}

impl InstanceReader {
    pub fn new<R: Read + 'static>(schema: Schema, reader: R) -> Self {
        let buffered: Box<dyn BufRead> = Box::new(BufReader::new(reader));
        InstanceReader {
            schema,
            lines: buffered.lines(),
            line: 0,
            next_index: 0,
            skipped_blank: 0,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Blank lines skipped so far; every other line yields an instance or an
    /// error.
    pub fn skipped_blank(&self) -> usize {
        self.skipped_blank
    }
}

impl Iterator for InstanceReader {
    type Item = Result<Instance, LoadError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line += 1;
            let line = match line {
                Ok(l) => l,
                Err(source) => {
                    return Some(Err(LoadError::Read {
                        line: self.line,
                        source,
                    }))
                }
            };
            if line.trim().is_empty() {
                self.skipped_blank += 1;
                continue;
            }
            let parsed = self.schema.parse_record(&line, self.line, self.next_index);
            if parsed.is_ok() {
                self.next_index += 1;
            }
            return Some(parsed);
        }
    }
}

fn open(path: &Path) -> Result<Box<dyn Read>, LoadError> {
    let file = File::open(path).map_err(|source| LoadError::Open {
        path: path.to_path_buf(),
        source,
    })?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(file)))
    } else {
        Ok(Box::new(file))
    }
}

pub fn load_schema(path: &Path) -> Result<Schema, LoadError> {
    let mut text = String::new();
    open(path)?
        .read_to_string(&mut text)
        .map_err(|source| LoadError::Read { line: 0, source })?;
    Schema::parse(&text)
}

/// Opens a dataset. Files ending in `.gz` are decompressed on the fly.
pub fn load_dataset(data_path: &Path, schema_path: &Path) -> Result<(Schema, InstanceReader), LoadError> {
    let schema = load_schema(schema_path)?;
    let reader = InstanceReader::new(schema.clone(), open(data_path)?);
    Ok((schema, reader))
}

/// Loads a whole dataset into memory, failing on the first bad line.
pub fn read_all(data_path: &Path, schema_path: &Path) -> Result<(Schema, Vec<Instance>), LoadError> {
    let (schema, reader) = load_dataset(data_path, schema_path)?;
    let instances = reader.collect::<Result<Vec<_>, _>>()?;
    Ok((schema, instances))
}

pub fn write_dataset<W: Write>(schema: &Schema, instances: &[Instance], mut out: W) -> io::Result<()> {
    for inst in instances {
        writeln!(out, "{}", schema.format_record(inst))?;
    }
    out.flush()
}

/// Stable sort by the value index of a nominal attribute, missing values last.
/// Arrival indices are reassigned to the new order.
pub fn order_by_attribute(
    schema: &Schema,
    mut instances: Vec<Instance>,
    attribute: &str,
) -> Result<Vec<Instance>, LoadError> {
    let index = schema
        .attribute_index(attribute)
        .ok_or_else(|| LoadError::UnknownAttribute(attribute.to_string()))?;
    if !schema.attributes[index].is_nominal() {
        return Err(LoadError::NumericAttribute(attribute.to_string()));
    }
    instances.sort_by_key(|inst| inst.values[index].nominal().unwrap_or(usize::MAX));
    for (i, inst) in instances.iter_mut().enumerate() {
        inst.arrival_index = i as u64;
    }
    Ok(instances)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = "\
# toy
attribute=age,numeric
attribute=sex,nominal:Female|Male
attribute=income,nominal:low|high
attribute=race,nominal:A|B|C
class=income
positive=high
sensitive=sex
deprived=Female
";

    fn schema() -> Schema {
        Schema::parse(SCHEMA).unwrap()
    }

    #[test]
    fn label_groups_count_true_labels() {
        let s = schema();
        let data = "30,Female,high,A\n40,Male,low,B\n50,?,high,C\n20,Male,high,A\n";
        let instances: Vec<Instance> = data
            .lines()
            .enumerate()
            .map(|(i, l)| s.parse_record(l, i + 1, i as u64).unwrap())
            .collect();
        let g = s.label_groups(&instances);
        assert_eq!(g, GroupCounts::new(1.0, 0.0, 1.0, 1.0));
        assert_eq!(g.discrimination(), 0.5 - 1.0);
    }

    #[test]
    fn parses_schema_and_class_column() {
        let s = schema();
        assert_eq!(s.attributes.len(), 3);
        assert_eq!(s.class.column, 2);
        assert_eq!(s.class.positive, 1);
        assert_eq!(s.sensitive.attribute, 1);
        assert_eq!(s.sensitive.deprived, 0);
        assert_eq!(Schema::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn parses_records_with_missing_markers() {
        let s = schema();
        let inst = s.parse_record("?,Male,high,Z", 1, 0).unwrap();
        assert_eq!(inst.values, vec![Value::Missing, Value::Nominal(1), Value::Missing]);
        assert_eq!(inst.label, 1);
        let inst = s.parse_record(" 41 , Female , low ,B", 2, 1).unwrap();
        assert_eq!(inst.values[0], Value::Numeric(41.0));
        assert_eq!(inst.values[2], Value::Nominal(1));
        assert!(s.parse_record(",Female,low,B", 3, 2).unwrap().values[0].is_missing());
    }

    #[test]
    fn rejects_bad_records() {
        let s = schema();
        assert!(matches!(
            s.parse_record("1,Male,high", 7, 0),
            Err(LoadError::ColumnCount { line: 7, expected: 4, found: 3 })
        ));
        assert!(matches!(
            s.parse_record("1,Male,medium,A", 8, 0),
            Err(LoadError::UnknownClass { line: 8, .. })
        ));
    }

    #[test]
    fn schema_invariants_are_enforced() {
        let bad_sensitive = SCHEMA.replace("sensitive=sex", "sensitive=race");
        assert!(Schema::parse(&bad_sensitive).is_err());
        let bad_deprived = SCHEMA.replace("deprived=Female", "deprived=Other");
        assert!(Schema::parse(&bad_deprived).is_err());
        let three_labels = SCHEMA.replace("nominal:low|high", "nominal:low|mid|high");
        assert!(Schema::parse(&three_labels).is_err());
        let dup = format!("{SCHEMA}attribute=age,numeric\n");
        assert!(Schema::parse(&dup).is_err());
        let dup_value = SCHEMA.replace("A|B|C", "A|B|A");
        assert!(Schema::parse(&dup_value).is_err());
        assert!(Schema::parse(&SCHEMA.replace("class=income\n", "")).is_err());
    }

    #[test]
    fn reader_assigns_arrival_indices_and_skips_blank_lines() {
        let s = schema();
        let data = "30,Male,high,A\n\n25,Female,low,C\n";
        let mut reader = InstanceReader::new(s, io::Cursor::new(data.to_string().into_bytes()));
        let all: Vec<_> = reader.by_ref().collect::<Result<_, _>>().unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[1].arrival_index, 1);
        assert_eq!(reader.skipped_blank(), 1);
    }

    #[test]
    fn empty_file_is_an_empty_stream() {
        let reader = InstanceReader::new(schema(), io::empty());
        assert_eq!(reader.count(), 0);
    }

    #[test]
    fn missing_schema_file_is_an_error() {
        let err = load_dataset(Path::new("/nonexistent/x.csv"), Path::new("/nonexistent/x.schema"));
        assert!(matches!(err, Err(LoadError::Open { .. })));
    }

    #[test]
    fn ordering_is_stable_and_puts_missing_last() {
        let s = schema();
        let rows = ["1,Male,high,C", "2,Male,low,?", "3,Female,low,A", "4,Male,low,C", "5,Female,high,A"];
        let instances: Vec<_> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| s.parse_record(r, i + 1, i as u64).unwrap())
            .collect();
        let ordered = order_by_attribute(&s, instances, "race").unwrap();
        let ages: Vec<f64> = ordered.iter().map(|i| i.values[0].numeric().unwrap()).collect();
        assert_eq!(ages, vec![3.0, 5.0, 1.0, 4.0, 2.0]);
        assert!(ordered.iter().enumerate().all(|(i, x)| x.arrival_index == i as u64));
        assert!(matches!(
            order_by_attribute(&s, vec![], "age"),
            Err(LoadError::NumericAttribute(_))
        ));
        assert!(matches!(
            order_by_attribute(&s, vec![], "zip"),
            Err(LoadError::UnknownAttribute(_))
        ));
    }
}
