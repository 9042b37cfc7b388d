//! Plain-text key-value documents used to persist fitted models.
//!
//! Each line is `key = value`. Nested models are enclosed in `begin` / `end`
//! lines. Keys may repeat (one line per support vector, tree node, ...), and
//! floating-point values are written with Rust's shortest round-trip
//! formatting, so every `f64` reads back bit-exactly.
//!
//! ```text
//! kind = cost
//! cost = 0 1 5 0
//! begin
//! kind = nb
//! prior = 0.87 0.13
//! end
//! ```

use crate::error::{Error, Result};
use std::fmt::Write as _;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    fields: Vec<(String, String)>,
    children: Vec<Document>,
}

impl Document {
    pub fn new(kind: &str) -> Self {
        let mut doc = Document::default();
        doc.push("kind", kind);
        doc
    }

    pub fn kind(&self) -> Result<&str> {
        self.get("kind")
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        debug_assert!(!key.contains('=') && !value.contains('\n'));
        self.fields.push((key.to_string(), value));
    }

    pub fn push_floats(&mut self, key: &str, values: &[f64]) {
        self.push(key, join_floats(values));
    }

    pub fn push_child(&mut self, child: Document) {
        self.children.push(child);
    }

    pub fn children(&self) -> &[Document] {
        &self.children
    }

    pub fn child(&self, index: usize) -> Result<&Document> {
        self.children
            .get(index)
            .ok_or_else(|| Error::Document(format!("missing nested document #{}", index)))
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Document(format!("missing key '{}'", key)))
    }

    pub fn get_opt(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.fields
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| Error::Document(format!("bad value '{}' for key '{}'", raw, key)))
    }

    pub fn floats(&self, key: &str) -> Result<Vec<f64>> {
        parse_floats(self.get(key)?)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        let found = self.kind()?;
        if found != kind {
            return Err(Error::Document(format!(
                "expected a '{}' document, found '{}'",
                kind, found
            )));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write_into(&mut out);
        out
    }

    fn write_into(&self, out: &mut String) {
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{} = {}", k, v);
        }
        for child in &self.children {
            out.push_str("begin\n");
            child.write_into(out);
            out.push_str("end\n");
        }
    }

    pub fn from_text(text: &str) -> Result<Document> {
        let mut stack = vec![Document::default()];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "begin" => stack.push(Document::default()),
                "end" => {
                    let done = stack.pop().expect("stack never empty");
                    match stack.last_mut() {
                        Some(parent) => parent.children.push(done),
                        None => {
                            return Err(Error::Document(format!(
                                "unbalanced 'end' on line {}",
                                lineno + 1
                            )))
                        }
                    }
                }
                _ => {
                    let (k, v) = line.split_once('=').ok_or_else(|| {
                        Error::Document(format!("line {} is not 'key = value'", lineno + 1))
                    })?;
                    stack
                        .last_mut()
                        .expect("stack never empty")
                        .fields
                        .push((k.trim().to_string(), v.trim().to_string()));
                }
            }
        }
        if stack.len() != 1 {
            return Err(Error::Document("unterminated 'begin' block".into()));
        }
        Ok(stack.pop().unwrap())
    }
}

pub fn join_floats(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{}", v);
    }
    s
}

pub fn parse_floats(raw: &str) -> Result<Vec<f64>> {
    raw.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Document(format!("bad number '{}'", t)))
        })
        .collect()
}
