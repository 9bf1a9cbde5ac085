//! JSON report files.
//!
//! ```json
//! {
//!   "crash_id": "optional, defaults to the file stem",
//!   "stacktrace": ["#0  0x... in foo () at a.c:1", "..."],
//!   "mappings": [{"start": "0x7f00", "end": "0x8000", "offset": "0", "path": "/lib/libc.so.6"}]
//! }
//! ```
use std::path::Path;

use serde_json::{Map, Value};

use super::gdb::parse_gdb_backtrace;
use crate::error::{Error, Result};
use crate::model::{CrashReport, Mapping};

pub fn parse_report_file(bytes: &[u8], path: &Path) -> Result<CrashReport> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::schema("$", format!("not UTF-8: {e}")))?;
    let root: Value = serde_json::from_str(text).map_err(|e| Error::schema("$", e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::schema("$", "expected an object"))?;

    let id = match obj.get("crash_id") {
        None | Some(Value::Null) => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(Error::schema("crash_id", "expected a string")),
    };

    let lines = obj
        .get("stacktrace")
        .ok_or_else(|| Error::schema("stacktrace", "missing required field"))?
        .as_array()
        .ok_or_else(|| Error::schema("stacktrace", "expected an array of strings"))?;
    if lines.is_empty() {
        return Err(Error::EmptyStack);
    }
    let mut text = String::new();
    for (i, line) in lines.iter().enumerate() {
        let line = line
            .as_str()
            .ok_or_else(|| Error::schema(format!("stacktrace[{i}]"), "expected a string"))?;
        text.push_str(line);
        text.push('\n');
    }
    let stack = parse_gdb_backtrace(&text)?;

    let mappings = match obj.get("mappings") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, item)| parse_mapping(item, &format!("mappings[{i}]")))
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(Error::schema("mappings", "expected an array")),
    };

    Ok(CrashReport::new(id, stack, mappings, path))
}

fn parse_mapping(item: &Value, field: &str) -> Result<Mapping> {
    let obj = item
        .as_object()
        .ok_or_else(|| Error::schema(field, "expected an object"))?;
    let start = required_number(obj, field, "start")?;
    let end = required_number(obj, field, "end")?;
    let offset = match obj.get("offset") {
        None => 0,
        Some(v) => parse_number(v).ok_or_else(|| bad_number(field, "offset"))?,
    };
    let path = obj
        .get("path")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::schema(format!("{field}.path"), "expected a string"))?;
    Mapping::new(start, end, offset, path)
        .map_err(|_| Error::schema(field, "start must be below end"))
}

fn required_number(obj: &Map<String, Value>, field: &str, key: &str) -> Result<u64> {
    obj.get(key)
        .and_then(parse_number)
        .ok_or_else(|| bad_number(field, key))
}

fn bad_number(field: &str, key: &str) -> Error {
    Error::schema(
        format!("{field}.{key}"),
        "expected a hex (0x...) or decimal number",
    )
}

/// Accepts JSON unsigned integers and strings holding hex (`0x` prefix) or
/// decimal values.
fn parse_number(v: &Value) -> Option<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => parse_u64_str(s),
        _ => None,
    }
}

fn parse_u64_str(s: &str) -> Option<u64> {
    let s = s.trim();
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok(),
        None => s.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<CrashReport> {
        parse_report_file(json.as_bytes(), Path::new("/reports/crash-01.json"))
    }

    fn schema_field(r: Result<CrashReport>) -> String {
        match r {
            Err(Error::Schema { field, .. }) => field,
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_report() {
        let r = parse(r##"{"stacktrace": ["#0  0x10 in foo ()"]}"##).unwrap();
        assert_eq!(r.id, "crash-01");
        assert_eq!(r.stack.len(), 1);
        assert!(r.mappings.is_empty());
        assert_eq!(r.source_path, Path::new("/reports/crash-01.json"));
    }

    #[test]
    fn missing_stacktrace() {
        assert_eq!(schema_field(parse(r##"{"crash_id": "x"}"##)), "stacktrace");
    }

    #[test]
    fn empty_stacktrace() {
        assert!(matches!(parse(r##"{"stacktrace": []}"##), Err(Error::EmptyStack)));
    }

    #[test]
    fn delegates_to_gdb_parser() {
        let lines = [
            "#0  0x00007ffff7a42e87 in __GI_raise (sig=sig@entry=6) at ../sysdeps/unix/sysv/linux/raise.c:51",
            "#1  0x00007ffff7a447f1 in __GI_abort () at abort.c:79",
            "#2  0x0000555555555131 in main () at t.c:3",
        ];
        let json = serde_json::json!({ "stacktrace": lines }).to_string();
        let r = parse(&json).unwrap();
        assert_eq!(r.stack, parse_gdb_backtrace(&lines.join("\n")).unwrap());
    }

    #[test]
    fn explicit_id_and_mappings() {
        let r = parse(
            r##"{"crash_id": "abc", "stacktrace": ["#0  0x7f10 in f ()"],
                "mappings": [{"start": "0x7f00", "end": 32768, "offset": "16", "path": "/lib/libc.so.6"}]}"##,
        )
        .unwrap();
        assert_eq!(r.id, "abc");
        assert_eq!(r.mappings, vec![Mapping::new(0x7f00, 0x8000, 16, "/lib/libc.so.6").unwrap()]);
    }

    #[test]
    fn schema_field_paths() {
        assert_eq!(schema_field(parse("[1]")), "$");
        assert_eq!(schema_field(parse("{")), "$");
        assert_eq!(schema_field(parse(r##"{"stacktrace": "x"}"##)), "stacktrace");
        assert_eq!(schema_field(parse(r##"{"stacktrace": ["#0 f ()", 3]}"##)), "stacktrace[1]");
        assert_eq!(schema_field(parse(r##"{"crash_id": 3, "stacktrace": ["#0 f ()"]}"##)), "crash_id");
        assert_eq!(
            schema_field(parse(r##"{"stacktrace": ["#0 f ()"], "mappings": [{"start": "zz", "end": "1", "path": "p"}]}"##)),
            "mappings[0].start"
        );
        assert_eq!(
            schema_field(parse(r##"{"stacktrace": ["#0 f ()"], "mappings": [{}, {}]}"##)),
            "mappings[0].start"
        );
        assert_eq!(
            schema_field(parse(r##"{"stacktrace": ["#0 f ()"], "mappings": [{"start": 1, "end": 2}]}"##)),
            "mappings[0].path"
        );
        assert_eq!(
            schema_field(parse(r##"{"stacktrace": ["#0 f ()"], "mappings": [{"start": 5, "end": 2, "path": "p"}]}"##)),
            "mappings[0]"
        );
        let bad_utf8 = parse_report_file(&[0xff, 0xfe], Path::new("x.json"));
        assert_eq!(schema_field(bad_utf8), "$");
    }

    #[test]
    fn numbers() {
        assert_eq!(parse_u64_str("0x10"), Some(16));
        assert_eq!(parse_u64_str("0XfF"), Some(255));
        assert_eq!(parse_u64_str("42"), Some(42));
        assert_eq!(parse_u64_str("-1"), None);
        assert_eq!(parse_u64_str("0x"), None);
    }
}
