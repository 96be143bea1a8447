//! CSV and JSON writers. CSV is comma-separated with a header row and LF endings;
//! floats use the shortest round-trip form, switching to exponent notation for
//! very small or very large magnitudes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// A value that can appear in a CSV cell.
pub trait Field {
    fn render(&self, out: &mut String);
}

impl Field for f64 {
    fn render(&self, out: &mut String) {
        write!(out, "{self:?}").expect("writing to a String");
    }
}

macro_rules! display_field {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn render(&self, out: &mut String) {
                write!(out, "{self}").expect("writing to a String");
            }
        }
    )*};
}

display_field!(usize, u64, i64, bool, str, String);

impl<T: Field + ?Sized> Field for &T {
    fn render(&self, out: &mut String) {
        (**self).render(out)
    }
}

#[derive(Debug, Clone)]
pub struct Csv {
    columns: usize,
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            columns: header.len(),
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, fields: &[&dyn Field]) {
        assert_eq!(fields.len(), self.columns, "row width differs from header");
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            f.render(&mut self.text);
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_text(path, &self.text)
    }
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &to_json(value))
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> CliResult<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("serializable record"));
        text.push('\n');
    }
    write_text(path, &text)
}
