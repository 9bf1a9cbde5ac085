//! Frame identities and libc abort-chain trimming.
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::model::{CallStack, Frame, SimilarityConfig};

/// Identity of a frame used for matching and hashing.
///
/// Absolute addresses change between runs under ASLR, so the module basename
/// plus the offset inside the module is preferred whenever it is known.
/// Keys of different variants never compare equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameKey<'a> {
    ModuleOffset {
        module: &'a str,
        offset: u64,
    },
    SymbolLine {
        function: &'a str,
        file: Option<&'a str>,
        line: Option<u32>,
    },
    RawAddress(u64),
}

pub fn frame_key(frame: &Frame) -> FrameKey<'_> {
    if let (Some(module), Some(offset)) = (frame.module_basename(), frame.module_offset()) {
        return FrameKey::ModuleOffset { module, offset };
    }
    if let Some(function) = frame.function_name() {
        return FrameKey::SymbolLine {
            function,
            file: frame.source_file(),
            line: frame.source_line(),
        };
    }
    match frame.address() {
        Some(address) => FrameKey::RawAddress(address),
        None => unreachable!("frame invariant: some identity is present"),
    }
}

/// Rules for recognizing libc frames and abort chains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LibcPolicy {
    module_pattern: String,
    trigger_functions: BTreeSet<String>,
    keep_last_libc: bool,
}

pub const DEFAULT_LIBC_MODULE: &str = "libc";

pub const DEFAULT_TRIGGER_FUNCTIONS: &[&str] = &[
    "__GI_raise",
    "raise",
    "gsignal",
    "abort",
    "__GI_abort",
    "__assert_fail",
    "__libc_message",
    "__stack_chk_fail",
    "__fortify_fail",
];

impl LibcPolicy {
    pub fn new<I, S>(module_pattern: impl Into<String>, trigger_functions: I) -> Result<LibcPolicy>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let trigger_functions: BTreeSet<String> = trigger_functions
            .into_iter()
            .map(Into::into)
            .filter(|s| !s.is_empty())
            .collect();
        if trigger_functions.is_empty() {
            return Err(Error::InvalidConfig(
                "libc trigger function list is empty".to_string(),
            ));
        }
        Ok(LibcPolicy {
            module_pattern: module_pattern.into(),
            trigger_functions,
            keep_last_libc: true,
        })
    }

    /// When false, the whole libc chain is removed instead of keeping its
    /// last frame (a single frame always survives).
    pub fn with_keep_last_libc(mut self, keep: bool) -> LibcPolicy {
        self.keep_last_libc = keep;
        self
    }

    pub fn module_pattern(&self) -> &str {
        &self.module_pattern
    }

    pub fn trigger_functions(&self) -> &BTreeSet<String> {
        &self.trigger_functions
    }

    pub fn keep_last_libc(&self) -> bool {
        self.keep_last_libc
    }

    fn is_trigger(&self, frame: &Frame) -> bool {
        frame
            .function_name()
            .is_some_and(|f| self.trigger_functions.contains(f))
    }
}

impl Default for LibcPolicy {
    fn default() -> Self {
        LibcPolicy::new(DEFAULT_LIBC_MODULE, DEFAULT_TRIGGER_FUNCTIONS.iter().copied())
            .expect("default trigger list is non-empty")
    }
}

pub fn is_libc_frame(frame: &Frame, policy: &LibcPolicy) -> bool {
    let module_match = !policy.module_pattern.is_empty()
        && frame
            .module_basename()
            .is_some_and(|m| m.contains(policy.module_pattern.as_str()));
    module_match
        || policy.is_trigger(frame)
        || frame.function_name().is_some_and(|f| f.starts_with("__GI_"))
}

/// Number of top frames removed by [`trim_abort_chain`].
pub fn abort_chain_len(frames: &[Frame], policy: &LibcPolicy) -> usize {
    let Some(top) = frames.first() else {
        return 0;
    };
    let prefix = frames
        .iter()
        .take_while(|f| is_libc_frame(f, policy))
        .count();
    if prefix == 0 || !policy.is_trigger(top) {
        return 0;
    }
    if prefix == frames.len() {
        return prefix - 1;
    }
    if policy.keep_last_libc {
        prefix - 1
    } else {
        prefix
    }
}

/// Removes a libc abort chain (raise/abort and the libc calls leading to it)
/// from the top of the stack, keeping the last libc frame before user code.
pub fn trim_abort_chain(stack: &CallStack, policy: &LibcPolicy) -> CallStack {
    let drop = abort_chain_len(stack.frames(), policy);
    if drop == 0 {
        return stack.clone();
    }
    CallStack::renumbered(stack.frames()[drop..].iter().cloned())
        .expect("trimming keeps at least one frame")
}

/// Frames that take part in comparison under `config`.
pub fn comparable_frames<'a>(
    stack: &'a CallStack,
    policy: &LibcPolicy,
    config: &SimilarityConfig,
) -> &'a [Frame] {
    let frames = stack.frames();
    if config.trim_enabled() {
        &frames[abort_chain_len(frames, policy)..]
    } else {
        frames
    }
}
