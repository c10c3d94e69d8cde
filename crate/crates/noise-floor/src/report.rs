//! JSON and CSV report emission.
//!
//! Floats are written with 17 significant digits so that re-reading a
//! report reproduces every value bit for bit. Non-finite floats become
//! `null` in JSON.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Pretty JSON with round-trip-exact floats.
pub struct ExactFloatFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Default for ExactFloatFormatter<'_> {
    fn default() -> Self {
        Self { inner: PrettyFormatter::with_indent(b"  ") }
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl Formatter for ExactFloatFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, writer: impl Write) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, ExactFloatFormatter::default());
    value.serialize(&mut ser).map_err(|e| Error::Serialize(e.to_string()))
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    write_json(value, &mut buf)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Row view of a report for CSV output.
pub trait Tabular {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

pub fn write_csv<T: Tabular + ?Sized>(value: &T, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Serialize(e.to_string());
    w.write_record(value.header()).map_err(err)?;
    for row in value.rows() {
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Serialize(e.to_string()))
}

pub fn write_report<T: Serialize + Tabular>(value: &T, path: &Path, format: Format) -> Result<()> {
    let io_err = |source| Error::Io { path: path.to_path_buf(), source };
    let mut file = io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    match format {
        Format::Json => {
            file.write_all(to_json_string(value)?.as_bytes()).map_err(io_err)?;
        }
        Format::Csv => write_csv(value, &mut file)?,
    }
    file.flush().map_err(io_err)
}
