//! Parser for GDB `bt` output.
//!
//! Recognized frame shapes (one per `#k` line, continuation lines joined):
//!
//! ```text
//! #0  0x0000555555555131 in foo (x=1) at src/foo.c:10
//! #1  0x00007ffff7df2083 in __libc_start_main () from /lib/x86_64-linux-gnu/libc.so.6
//! #2  main () at main.c:4
//! #3  0x0000000000401136 in ?? ()
//! #4  <signal handler called>
//! ```
use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;

use crate::error::{Error, Result};
use crate::model::{CallStack, Frame};

static FRAME_HEADER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^#(\d+)\s*(.*)$").unwrap());
static FROM_SUFFIX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+from\s+(\S+)$").unwrap());
static AT_SUFFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\s+at\s+(\S+):(\d+)$").unwrap());

/// Parses GDB backtrace text into a call stack.
///
/// Lines before the first `#<digit>` line are ignored; lines after it are
/// treated as continuations of the preceding frame.
pub fn parse_gdb_backtrace(text: &str) -> Result<CallStack> {
    let mut entries: Vec<(usize, String)> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with("(More stack frames") {
            continue;
        }
        if is_frame_header(line) {
            let caps = FRAME_HEADER.captures(line).unwrap();
            let index = caps[1]
                .parse::<usize>()
                .map_err(|_| Error::malformed(line, "frame number out of range"))?;
            entries.push((index, caps[2].trim().to_string()));
        } else if let Some((_, body)) = entries.last_mut() {
            body.push(' ');
            body.push_str(line);
        }
    }
    if entries.is_empty() {
        return Err(Error::NoFramesFound);
    }
    let frames = entries
        .iter()
        .map(|(index, body)| parse_frame_body(*index, body))
        .collect::<Result<Vec<_>>>()?;
    CallStack::new(frames)
}

fn is_frame_header(line: &str) -> bool {
    let mut chars = line.chars();
    chars.next() == Some('#') && chars.next().is_some_and(|c| c.is_ascii_digit())
}

fn parse_frame_body(index: usize, body: &str) -> Result<Frame> {
    let line = format!("#{index}  {body}");
    let mut builder = Frame::builder(index);
    let mut rest = body;

    if let Some(hex) = rest.strip_prefix("0x") {
        let end = hex
            .find(|c: char| !c.is_ascii_hexdigit())
            .unwrap_or(hex.len());
        let address = u64::from_str_radix(&hex[..end], 16)
            .map_err(|_| Error::malformed(&line, "bad frame address"))?;
        builder = builder.address(address);
        rest = hex[end..].trim_start();
        if !rest.is_empty() {
            rest = rest
                .strip_prefix("in ")
                .ok_or_else(|| Error::malformed(&line, "expected `in` after address"))?
                .trim_start();
        }
    }

    let mut module = None;
    if let Some(caps) = FROM_SUFFIX.captures(rest) {
        module = Some(caps[1].to_string());
        rest = &rest[..caps.get(0).unwrap().start()];
    }
    let mut source = None;
    if let Some(caps) = AT_SUFFIX.captures(rest) {
        let line_no = caps[2]
            .parse::<u32>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::malformed(&line, "bad source line number"))?;
        source = Some((caps[1].to_string(), line_no));
        rest = &rest[..caps.get(0).unwrap().start()];
    }

    let function = function_name(rest.trim()).ok_or_else(|| Error::malformed(&line, "unbalanced argument list"))?;
    if let Some(name) = function {
        builder = builder.function(name);
    }
    if let Some(path) = module {
        builder = builder.module(path, None);
    }
    if let Some((file, line_no)) = source {
        builder = builder.source(file, Some(line_no));
    }
    builder
        .build()
        .map_err(|_| Error::malformed(&line, "frame has no address or function name"))
}

/// Splits `name (args)` and returns the name. `??` and empty names yield
/// `Some(None)`; an unbalanced argument list yields `None`.
fn function_name(text: &str) -> Option<Option<String>> {
    if text.matches('(').count() != text.matches(')').count() {
        return None;
    }
    let name = if text.ends_with(')') {
        let mut depth = 0usize;
        let mut open = None;
        for (pos, c) in text.char_indices().rev() {
            match c {
                ')' => depth += 1,
                '(' => {
                    depth = depth.checked_sub(1)?;
                    if depth == 0 {
                        open = Some(pos);
                        break;
                    }
                }
                _ => {}
            }
        }
        text[..open?].trim_end()
    } else {
        text
    };
    if name.is_empty() || name == "??" {
        Some(None)
    } else {
        Some(Some(name.to_string()))
    }
}

/// Renders a stack in the GDB shape accepted by [`parse_gdb_backtrace`].
///
/// Module offsets are not representable and are dropped.
pub fn render_gdb_backtrace(stack: &CallStack) -> String {
    let mut out = String::new();
    for frame in stack.frames() {
        let _ = write!(out, "#{:<2} ", frame.index());
        if let Some(addr) = frame.address() {
            let _ = write!(out, "0x{addr:016x} in ");
        }
        out.push_str(frame.function_name().unwrap_or("??"));
        out.push_str(" ()");
        if let (Some(file), Some(line)) = (frame.source_file(), frame.source_line()) {
            let _ = write!(out, " at {file}:{line}");
        }
        if let Some(path) = frame.module_path() {
            let _ = write!(out, " from {path}");
        }
        out.push('\n');
    }
    out
}
