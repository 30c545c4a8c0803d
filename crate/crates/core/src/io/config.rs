//! Plain-text configuration files.
//!
//! ```text
//! document = { line } ;
//! line     = ws ( comment | section | entry | "" ) ws newline ;
//! comment  = ( "#" | ";" ) { any } ;
//! section  = "[" ws name ws "]" ;
//! entry    = key ws "=" ws value [ ws comment ] ;
//! name     = letter { letter | digit | "_" | "-" | "." } ;
//! key      = name ;
//! value    = item { ws "," ws item } ;
//! item     = { any - ( "," | "#" ) } ;
//! ```
//!
//! Entries before the first section header belong to the unnamed section
//! `""`. Keys may repeat (e.g. one `point = ...` line per scatterer).

use std::fs;
use std::path::Path;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    /// 1-based column where the value starts.
    pub column: usize,
    pub key_column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub source: String,
    pub sections: Vec<Section>,
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl Document {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, column: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            column,
            message,
        };
        let mut sections = vec![Section { name: String::new(), line: 0, entries: Vec::new() }];
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let indent = raw.len() - raw.trim_start().len();
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') || body.starts_with(';') {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let Some(close) = rest.find(']') else {
                    return Err(err(line_no, indent + 1, "unterminated section header".into()));
                };
                let trailing = rest[close + 1..].trim();
                if !(trailing.is_empty() || trailing.starts_with('#')) {
                    return Err(err(
                        line_no,
                        indent + close + 3,
                        format!("unexpected text after section header: '{trailing}'"),
                    ));
                }
                let name = rest[..close].trim();
                if !is_name(name) {
                    return Err(err(line_no, indent + 2, format!("invalid section name '{name}'")));
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(err(line_no, indent + 2, format!("duplicate section [{name}]")));
                }
                sections.push(Section { name: name.to_string(), line: line_no, entries: Vec::new() });
                continue;
            }
            let Some(eq) = body.find('=') else {
                return Err(err(line_no, indent + 1, "expected 'key = value' or '[section]'".into()));
            };
            let key = body[..eq].trim();
            if !is_name(key) {
                return Err(err(line_no, indent + 1, format!("invalid key '{key}'")));
            }
            let after = &body[eq + 1..];
            let value_start = after.len() - after.trim_start().len();
            let mut value = after.trim_start();
            if let Some(hash) = value.find('#') {
                value = &value[..hash];
            }
            let value = value.trim_end();
            let column = indent + eq + 1 + value_start + 1;
            if value.is_empty() {
                return Err(err(line_no, column, format!("missing value for '{key}'")));
            }
            sections.last_mut().expect("root section").entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: line_no,
                column,
                key_column: indent + 1,
            });
        }
        Ok(Self { source: source.to_string(), sections })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn section(&self, name: &str) -> Option<SectionView<'_>> {
        self.sections.iter().find(|s| s.name == name).map(|section| SectionView { doc: self, section })
    }

    pub fn require(&self, name: &str) -> Result<SectionView<'_>> {
        self.section(name).ok_or_else(|| Error::Parse {
            path: self.source.clone(),
            line: 1,
            column: 1,
            message: format!("missing section [{name}]"),
        })
    }
}

/// Typed accessors over one section; errors carry the entry's position.
#[derive(Clone, Copy)]
pub struct SectionView<'a> {
    doc: &'a Document,
    pub section: &'a Section,
}

impl<'a> SectionView<'a> {
    pub fn error(&self, entry: &Entry, message: impl Into<String>) -> Error {
        Error::Parse { path: self.doc.source.clone(), line: entry.line, column: entry.column, message: message.into() }
    }

    fn missing(&self, key: &str) -> Error {
        Error::Parse {
            path: self.doc.source.clone(),
            line: self.section.line.max(1),
            column: 1,
            message: format!("missing key '{key}' in [{}]", self.section.name),
        }
    }

    pub fn entry(&self, key: &str) -> Option<&'a Entry> {
        self.section.entries.iter().rev().find(|e| e.key == key)
    }

    pub fn all(&self, key: &str) -> impl Iterator<Item = &'a Entry> + 'a {
        let key = key.to_string();
        self.section.entries.iter().filter(move |e| e.key == key)
    }

    /// Rejects keys outside `known`.
    pub fn only(&self, known: &[&str]) -> Result<()> {
        match self.section.entries.iter().find(|e| !known.contains(&e.key.as_str())) {
            Some(e) => Err(Error::Parse {
                path: self.doc.source.clone(),
                line: e.line,
                column: e.key_column,
                message: format!("unknown key '{}' in [{}]", e.key, self.section.name),
            }),
            None => Ok(()),
        }
    }

    pub fn string(&self, key: &str) -> Option<&'a str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    pub fn parse_entry<T: std::str::FromStr>(&self, entry: &Entry) -> Result<T> {
        entry
            .value
            .parse()
            .map_err(|_| self.error(entry, format!("cannot parse '{}' for '{}'", entry.value, entry.key)))
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entry(key).map(|e| self.parse_entry(e)).transpose()
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn list_entry(&self, entry: &Entry) -> Result<Vec<f64>> {
        entry
            .value
            .split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<f64>().map_err(|_| self.error(entry, format!("cannot parse '{item}' as a number")))
            })
            .collect()
    }

    pub fn vec3(&self, key: &str) -> Result<Option<[f64; 3]>> {
        let Some(entry) = self.entry(key) else {
            return Ok(None);
        };
        let v = self.list_entry(entry)?;
        match v.as_slice() {
            [x, y, z] => Ok(Some([*x, *y, *z])),
            _ => Err(self.error(entry, format!("'{key}' needs 3 comma-separated numbers"))),
        }
    }
}
