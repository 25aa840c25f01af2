//! Report serialization with fixed 17-significant-digit floats, so identical
//! inputs give byte-identical files.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use waylab_core::BoundReport;

/// `PrettyFormatter` layout with floats written as `d.dddddddddddddddde±x`.
pub struct FixedFormatter {
    pretty: PrettyFormatter<'static>,
}

impl Default for FixedFormatter {
    fn default() -> Self {
        Self {
            pretty: PrettyFormatter::with_indent(b"  "),
        }
    }
}

/// A float with 17 significant digits in scientific notation.
pub fn fixed17(v: f64) -> String {
    format!("{v:.16e}")
}

impl Formatter for FixedFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fixed17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, writer: &mut W, first: bool) -> io::Result<()> {
        self.pretty.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.pretty.end_object_value(writer)
    }
}

/// Pretty JSON with fixed-format floats and a trailing newline. Non-finite
/// floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFormatter::default());
    value.serialize(&mut ser).expect("report types serialize infallibly");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// One CSV row per bound report, tagged with the index of the task that
/// produced it.
pub fn bounds_csv(rows: &[(usize, &BoundReport)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "task",
        "bound",
        "outcome",
        "lhs",
        "rhs",
        "slack",
        "satisfied",
        "hypotheses_hold",
        "inputs_digest",
    ])
    .expect("in-memory CSV");
    for (task, r) in rows {
        w.write_record([
            task.to_string(),
            r.bound.as_str().to_string(),
            r.outcome.clone(),
            fixed17(r.lhs),
            fixed17(r.rhs),
            fixed17(r.slack),
            r.satisfied.to_string(),
            r.hypotheses_hold.to_string(),
            r.inputs_digest.clone(),
        ])
        .expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV fields are UTF-8")
}
