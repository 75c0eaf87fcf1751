//! Canonical textual form shared by manifests, KB archives, catalog files and
//! API bodies.
//!
//! The rules: JSON, object keys sorted by byte order, two-space indentation,
//! LF newlines, UTF-8 without BOM, no trailing whitespace, decimals with the
//! shortest round-tripping digits and never an exponent, and a final newline.
//! Equal documents always produce equal bytes.

use std::io;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Errors raised while reading or writing canonical documents.
#[derive(Debug, thiserror::Error)]
pub enum CanonError {
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("document is not valid UTF-8")]
    Utf8,
    #[error("non-finite decimal cannot be serialized")]
    NonFinite,
}

/// Pretty formatter that renders floats without exponents.
struct CanonicalFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl CanonicalFormatter<'_> {
    fn new() -> Self {
        Self {
            inner: PrettyFormatter::with_indent(b"  "),
        }
    }
}

impl Formatter for CanonicalFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if !value.is_finite() {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "non-finite decimal"));
        }
        writer.write_all(format_decimal(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Shortest round-tripping decimal rendering without an exponent.
///
/// Rust's `Display` for `f64` already has both properties; negative zero is
/// folded into zero.
pub fn format_decimal(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    format!("{value}")
}

/// Serializes `value` into canonical bytes.
pub fn to_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CanonError> {
    // Round-tripping through `serde_json::Value` sorts every object's keys,
    // since its map is a BTreeMap.
    let tree = serde_json::to_value(value)?;
    value_to_bytes(&tree)
}

/// Canonical bytes of an already-built JSON tree.
pub fn value_to_bytes(tree: &serde_json::Value) -> Result<Vec<u8>, CanonError> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter::new());
    tree.serialize(&mut ser).map_err(|e| {
        if e.is_io() {
            CanonError::NonFinite
        } else {
            CanonError::Json(e)
        }
    })?;
    out.push(b'\n');
    Ok(out)
}

/// Canonical form as a `String`.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String, CanonError> {
    let bytes = to_bytes(value)?;
    String::from_utf8(bytes).map_err(|_| CanonError::Utf8)
}

/// Single-line canonical form (sorted keys, no whitespace). Used where a
/// compact, order-stable key is needed, e.g. bindings digests.
pub fn to_compact_string<T: Serialize + ?Sized>(value: &T) -> Result<String, CanonError> {
    let tree = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CompactDecimalFormatter);
    tree.serialize(&mut ser).map_err(|_| CanonError::NonFinite)?;
    String::from_utf8(out).map_err(|_| CanonError::Utf8)
}

struct CompactDecimalFormatter;

impl Formatter for CompactDecimalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_decimal(value).as_bytes())
    }
}

/// Parses a canonical (or any valid JSON) document.
pub fn from_slice<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CanonError> {
    let text = std::str::from_utf8(bytes).map_err(|_| CanonError::Utf8)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_two_space_indent() {
        let doc = json!({"b": 1, "a": {"z": [1, 2], "y": []}});
        let text = to_string(&doc).unwrap();
        assert_eq!(
            text,
            "{\n  \"a\": {\n    \"y\": [],\n    \"z\": [\n      1,\n      2\n    ]\n  },\n  \"b\": 1\n}\n"
        );
    }

    #[test]
    fn decimals_have_no_exponent() {
        assert_eq!(format_decimal(1e-7), "0.0000001");
        assert_eq!(format_decimal(1e21), "1000000000000000000000");
        assert_eq!(format_decimal(0.1), "0.1");
        assert_eq!(format_decimal(-0.0), "0");
        let text = to_string(&json!({"x": 2.5e-8})).unwrap();
        assert_eq!(text, "{\n  \"x\": 0.000000025\n}\n");
    }

    #[test]
    fn no_trailing_whitespace() {
        let doc = json!({"k": [{"a": null}, "s p"], "e": {}});
        let text = to_string(&doc).unwrap();
        assert!(text.lines().all(|l| !l.ends_with(' ')));
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn key_order_is_byte_order() {
        let doc = json!({"a": 1, "B": 2, "_": 3});
        let text = to_compact_string(&doc).unwrap();
        assert_eq!(text, r#"{"B":2,"_":3,"a":1}"#);
    }
}
