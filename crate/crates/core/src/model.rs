//! Core data types: frames, call stacks, memory mappings and crash reports.
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One call site of a call stack.
///
/// A frame always carries some identity: an absolute address, a module path
/// with an offset inside it, or a function name.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Frame {
    index: usize,
    address: Option<u64>,
    function_name: Option<String>,
    module_path: Option<String>,
    module_offset: Option<u64>,
    source_file: Option<String>,
    source_line: Option<u32>,
}

impl Frame {
    pub fn builder(index: usize) -> FrameBuilder {
        FrameBuilder {
            frame: Frame {
                index,
                address: None,
                function_name: None,
                module_path: None,
                module_offset: None,
                source_file: None,
                source_line: None,
            },
        }
    }

    /// Position from the top of the stack, 0 for the crash site.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn address(&self) -> Option<u64> {
        self.address
    }

    pub fn function_name(&self) -> Option<&str> {
        self.function_name.as_deref()
    }

    pub fn module_path(&self) -> Option<&str> {
        self.module_path.as_deref()
    }

    pub fn module_offset(&self) -> Option<u64> {
        self.module_offset
    }

    pub fn source_file(&self) -> Option<&str> {
        self.source_file.as_deref()
    }

    pub fn source_line(&self) -> Option<u32> {
        self.source_line
    }

    /// Basename of the module path, if any.
    pub fn module_basename(&self) -> Option<&str> {
        self.module_path
            .as_deref()
            .map(|p| p.rsplit('/').next().unwrap_or(p))
    }

    pub(crate) fn with_index(mut self, index: usize) -> Frame {
        self.index = index;
        self
    }

    pub(crate) fn with_module(mut self, path: &str, offset: u64) -> Frame {
        self.module_path = Some(path.to_string());
        self.module_offset = Some(offset);
        self
    }
}

#[derive(Clone, Debug)]
pub struct FrameBuilder {
    frame: Frame,
}

impl FrameBuilder {
    pub fn address(mut self, address: u64) -> Self {
        self.frame.address = Some(address);
        self
    }

    pub fn function(mut self, name: impl Into<String>) -> Self {
        self.frame.function_name = Some(name.into());
        self
    }

    pub fn module(mut self, path: impl Into<String>, offset: Option<u64>) -> Self {
        self.frame.module_path = Some(path.into());
        self.frame.module_offset = offset;
        self
    }

    pub fn source(mut self, file: impl Into<String>, line: Option<u32>) -> Self {
        self.frame.source_file = Some(file.into());
        self.frame.source_line = line;
        self
    }

    pub fn build(self) -> Result<Frame> {
        let f = self.frame;
        let has_module_offset = f.module_path.is_some() && f.module_offset.is_some();
        if f.address.is_none() && !has_module_offset && f.function_name.is_none() {
            return Err(Error::InvalidFrame(format!(
                "frame #{} has no address, module offset or function name",
                f.index
            )));
        }
        if f.source_line == Some(0) {
            return Err(Error::InvalidFrame(format!(
                "frame #{} has source line 0",
                f.index
            )));
        }
        Ok(f)
    }
}

/// Ordered frames, index 0 is the innermost call site.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CallStack {
    frames: Vec<Frame>,
}

impl CallStack {
    pub fn new(frames: Vec<Frame>) -> Result<CallStack> {
        if frames.is_empty() {
            return Err(Error::EmptyStack);
        }
        for (expected, frame) in frames.iter().enumerate() {
            if frame.index != expected {
                return Err(Error::NonConsecutiveIndices {
                    expected,
                    found: frame.index,
                });
            }
        }
        Ok(CallStack { frames })
    }

    /// Builds a stack from frames in top-first order, rewriting their indices.
    pub(crate) fn renumbered(frames: impl IntoIterator<Item = Frame>) -> Result<CallStack> {
        let frames: Vec<Frame> = frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| f.with_index(i))
            .collect();
        CallStack::new(frames)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn top(&self) -> &Frame {
        &self.frames[0]
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }
}

/// A mapped object from the crashed process address space.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mapping {
    start: u64,
    end: u64,
    file_offset: u64,
    path: String,
}

impl Mapping {
    pub fn new(start: u64, end: u64, file_offset: u64, path: impl Into<String>) -> Result<Mapping> {
        if start >= end {
            return Err(Error::InvalidFrame(format!(
                "mapping start {start:#x} is not below end {end:#x}"
            )));
        }
        Ok(Mapping {
            start,
            end,
            file_offset,
            path: path.into(),
        })
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    pub fn end(&self) -> u64 {
        self.end
    }

    pub fn file_offset(&self) -> u64 {
        self.file_offset
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn contains(&self, address: u64) -> bool {
        self.start <= address && address < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrashReport {
    pub id: String,
    pub stack: CallStack,
    pub mappings: Vec<Mapping>,
    pub source_path: PathBuf,
}

impl CrashReport {
    pub fn new(
        id: impl Into<String>,
        stack: CallStack,
        mappings: Vec<Mapping>,
        source_path: impl AsRef<Path>,
    ) -> CrashReport {
        CrashReport {
            id: id.into(),
            stack,
            mappings,
            source_path: source_path.as_ref().to_path_buf(),
        }
    }

    /// File name of the report on disk.
    pub fn file_name(&self) -> &std::ffi::OsStr {
        self.source_path
            .file_name()
            .unwrap_or(self.source_path.as_os_str())
    }
}

/// Coefficients of the stack similarity metric and the clustering cut.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityConfig {
    a: f64,
    r: f64,
    d: f64,
    trim_enabled: bool,
}

impl SimilarityConfig {
    pub const DEFAULT_TOP_COEF: f64 = 0.04;
    pub const DEFAULT_REL_COEF: f64 = 0.13;
    pub const DEFAULT_THRESHOLD: f64 = 0.3;

    /// `a` weighs the distance to the top of the stacks, `r` the distance
    /// between the matched frames, `d` is the clustering threshold.
    pub fn new(a: f64, r: f64, d: f64) -> Result<SimilarityConfig> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::InvalidConfig(format!("coefficient a = {a} must be >= 0")));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidConfig(format!("coefficient r = {r} must be >= 0")));
        }
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::InvalidConfig(format!("threshold d = {d} must be in [0, 1]")));
        }
        Ok(SimilarityConfig {
            a,
            r,
            d,
            trim_enabled: true,
        })
    }

    pub fn with_trim(mut self, enabled: bool) -> SimilarityConfig {
        self.trim_enabled = enabled;
        self
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn trim_enabled(&self) -> bool {
        self.trim_enabled
    }
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        SimilarityConfig {
            a: Self::DEFAULT_TOP_COEF,
            r: Self::DEFAULT_REL_COEF,
            d: Self::DEFAULT_THRESHOLD,
            trim_enabled: true,
        }
    }
}
