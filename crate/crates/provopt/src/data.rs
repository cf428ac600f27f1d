//! Loading relations from a directory of CSV files with schema sidecars.
//!
//! Relation `R` is read from `R.csv`, whose header names the attributes,
//! and `R.schema`, which lists one `attr:type` per line (types `int`,
//! `float`, `string`, `bool`) in the same order, plus any number of
//! `key: a, b` lines. `#` starts a comment. Empty CSV fields are nulls.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use provopt_core::algebra::{Schema, Tuple, Value, ValueType};
use provopt_core::executor::{BagRelation, Database};
use provopt_core::properties::{BaseKeys, Key};

use crate::plan::Catalog;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}:{line}: {msg}")]
    Sidecar { path: PathBuf, line: usize, msg: String },
    #[error("{path}:{line}:{col}: {msg}")]
    Value { path: PathBuf, line: u64, col: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    pub schema: Schema,
    pub types: Vec<ValueType>,
    pub keys: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub db: Database,
    pub tables: BTreeMap<String, TableSchema>,
}

impl Dataset {
    pub fn catalog(&self) -> Catalog {
        self.tables.iter().map(|(n, t)| (n.clone(), t.schema.clone())).collect()
    }

    pub fn base_keys(&self) -> BaseKeys {
        self.tables
            .iter()
            .map(|(n, t)| (n.clone(), t.keys.iter().map(|k| k.iter().cloned().collect::<Key>()).collect()))
            .collect()
    }

    /// Rows of `relation` with duplicates repeated.
    pub fn rows(&self, relation: &str) -> Vec<Tuple> {
        self.db.get(relation).map_or_else(Vec::new, |r| {
            r.iter().flat_map(|(t, m)| std::iter::repeat_n(t.clone(), *m as usize)).collect()
        })
    }
}

fn type_name(t: &str) -> Option<ValueType> {
    Some(match t {
        "int" => ValueType::Int,
        "float" => ValueType::Float,
        "string" => ValueType::Str,
        "bool" => ValueType::Bool,
        _ => return None,
    })
}

pub fn parse_sidecar(text: &str, path: &Path) -> Result<TableSchema, DataError> {
    let err = |line: usize, msg: String| DataError::Sidecar { path: path.to_path_buf(), line, msg };
    let mut names = Vec::new();
    let mut types = Vec::new();
    let mut keys = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (lhs, rhs) = line.split_once(':').ok_or_else(|| err(i + 1, format!("expected `attr:type`, got `{line}`")))?;
        let (lhs, rhs) = (lhs.trim(), rhs.trim());
        if lhs == "key" {
            keys.push(rhs.split(',').map(|a| a.trim().to_string()).filter(|a| !a.is_empty()).collect::<Vec<_>>());
        } else {
            let t = type_name(rhs).ok_or_else(|| err(i + 1, format!("unknown type `{rhs}`")))?;
            names.push(lhs.to_string());
            types.push(t);
        }
    }
    let schema = Schema::new(names).map_err(|e| err(0, e.to_string()))?;
    for k in keys.iter().flatten() {
        if !schema.contains(k) {
            return Err(err(0, format!("key attribute `{k}` is not declared")));
        }
    }
    Ok(TableSchema { schema, types, keys })
}

pub fn parse_value(field: &str, t: ValueType) -> Result<Value, String> {
    if field.is_empty() {
        return Ok(Value::Null);
    }
    match t {
        ValueType::Int => field.trim().parse().map(Value::Int).map_err(|_| format!("`{field}` is not an int")),
        ValueType::Float => field.trim().parse().map(Value::Float).map_err(|_| format!("`{field}` is not a float")),
        ValueType::Bool => match field.trim() {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("`{field}` is not a bool")),
        },
        ValueType::Str => Ok(Value::Str(field.to_string())),
    }
}

/// Read one relation from its CSV file and sidecar.
pub fn load_table(csv_path: &Path, sidecar_path: &Path) -> Result<(TableSchema, BagRelation), DataError> {
    let text = fs::read_to_string(sidecar_path).map_err(|source| DataError::Io { path: sidecar_path.to_path_buf(), source })?;
    let table = parse_sidecar(&text, sidecar_path)?;
    let csv_err = |source| DataError::Csv { path: csv_path.to_path_buf(), source };
    let mut reader = csv::Reader::from_path(csv_path).map_err(csv_err)?;
    let header: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(|h| h.trim().to_string()).collect();
    if header != table.schema.names() {
        return Err(DataError::Value {
            path: csv_path.to_path_buf(),
            line: 1,
            col: 1,
            msg: format!("header {:?} does not match the sidecar {:?}", header, table.schema.names()),
        });
    }
    let mut rel = BagRelation::new(table.schema.clone());
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut tuple = Vec::with_capacity(table.types.len());
        for (i, (field, t)) in rec.iter().zip(&table.types).enumerate() {
            let v = parse_value(field, *t)
                .map_err(|msg| DataError::Value { path: csv_path.to_path_buf(), line, col: i + 1, msg })?;
            tuple.push(v);
        }
        rel.insert(tuple, 1);
    }
    Ok((table, rel))
}

/// Load every `*.csv` with a matching `*.schema` in `dir`.
pub fn load_dir(dir: &Path) -> Result<Dataset, DataError> {
    let entries = fs::read_dir(dir).map_err(|source| DataError::Io { path: dir.to_path_buf(), source })?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    let mut ds = Dataset::default();
    for p in paths.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")) {
        let sidecar = p.with_extension("schema");
        if !sidecar.exists() {
            continue;
        }
        let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let (table, rel) = load_table(p, &sidecar)?;
        ds.db.insert(name.clone(), rel);
        ds.tables.insert(name, table);
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_with_keys_and_comments() {
        let t = parse_sidecar("# shop\nname:string\nnumEmpl:int  # staff\nkey: name\n", Path::new("shop.schema")).unwrap();
        assert_eq!(t.schema.names(), &["name", "numEmpl"]);
        assert_eq!(t.types, vec![ValueType::Str, ValueType::Int]);
        assert_eq!(t.keys, vec![vec!["name".to_string()]]);
        assert!(parse_sidecar("a:decimal", Path::new("x")).is_err());
        assert!(parse_sidecar("a:int\nkey: b", Path::new("x")).is_err());
    }

    #[test]
    fn values_by_type() {
        assert_eq!(parse_value("", ValueType::Int), Ok(Value::Null));
        assert_eq!(parse_value("-4", ValueType::Int), Ok(Value::Int(-4)));
        assert_eq!(parse_value("2.5", ValueType::Float), Ok(Value::Float(2.5)));
        assert_eq!(parse_value("x y", ValueType::Str), Ok(Value::from("x y")));
        assert!(parse_value("yes", ValueType::Bool).is_err());
    }
}
