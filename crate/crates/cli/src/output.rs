//! CSV tables with a configuration echo, optional JSON mirrors, and flat
//! key/value reports.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            // non-finite values have no JSON number; keep their text form
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(v) => json!(v.to_string()),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// Ordered key/value summary printed on stdout.
#[derive(Default)]
pub struct Report(Vec<(String, Cell)>);

impl Report {
    pub fn add(&mut self, key: &str, value: impl Into<Cell>) {
        self.0.push((key.to_string(), value.into()));
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.0.iter().map(|(k, v)| (k.clone(), v.to_json())).collect::<Map<_, _>>())
    }
}

pub struct Output {
    pub dir: PathBuf,
    pub json: bool,
    /// Comment block written at the top of every CSV.
    pub echo: String,
    pub config: Value,
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl Output {
    pub fn new(dir: &Path, json: bool, echo: String, config: Value) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            json,
            echo,
            config,
        })
    }

    pub fn table(&self, table: &Table) -> Result<PathBuf, CliError> {
        let mut text: String = self.echo.lines().map(|l| format!("# {l}\n")).collect();
        text.push_str(&table.columns.join(","));
        text.push('\n');
        for row in &table.rows {
            let line: Vec<String> = row.iter().map(Cell::to_string).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        let path = self.dir.join(format!("{}.csv", table.name));
        write(&path, &text)?;
        if self.json {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
                .collect();
            let doc = json!({ "config": self.config, "columns": table.columns, "rows": rows });
            self.document(table.name, &doc)?;
        }
        Ok(path)
    }

    pub fn document(&self, name: &str, doc: &Value) -> Result<PathBuf, CliError> {
        let path = self.dir.join(format!("{name}.json"));
        let text = serde_json::to_string_pretty(doc).expect("JSON values serialize");
        write(&path, &(text + "\n"))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_echo_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let out = Output::new(dir.path(), true, "a = 1\nb = 2".into(), json!({"a": 1})).unwrap();
        let t = Table {
            name: "t",
            columns: vec!["x", "y"],
            rows: vec![vec![0.5.into(), 3u64.into()], vec![f64::INFINITY.into(), "s".into()]],
        };
        let path = out.table(&t).unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(text, "# a = 1\n# b = 2\nx,y\n0.5,3\ninf,s\n");
        let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
        assert_eq!(doc["rows"][0], json!([0.5, 3]));
        assert_eq!(doc["rows"][1][0], json!("inf"));
    }

    #[test]
    fn report_text_and_json_agree() {
        let mut r = Report::default();
        r.add("lambda", 0.25);
        r.add("count", 4u64);
        assert_eq!(r.to_text(), "lambda = 0.25\ncount = 4\n");
        assert_eq!(r.to_json(), json!({"lambda": 0.25, "count": 4}));
    }
}
