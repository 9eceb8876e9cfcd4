//! Plain-text parameter checkpoints.
//!
//! ```text
//! usvmec-checkpoint 1
//! meta <one line of JSON>
//! tensors <count>
//! tensor <name> <rank> <dim_0> ... <dim_{rank-1}>
//! <f64 bit patterns as 16 hex digits, up to 8 per line>
//! ...
//! end
//! ```
//!
//! Values are stored as raw IEEE-754 bit patterns, so a save/load round trip
//! is bit-exact, including signed zeros and NaN payloads.

use std::fmt::Write as _;
use std::path::Path;

use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &str = "usvmec-checkpoint 1";
const PER_LINE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: String,
    pub tensors: Vec<(String, Tensor)>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn to_text(&self) -> Result<String> {
        if self.meta.contains('\n') {
            return Err(bad("meta must be a single line"));
        }
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "meta {}", self.meta).unwrap();
        writeln!(out, "tensors {}", self.tensors.len()).unwrap();
        for (name, t) in &self.tensors {
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(bad(format!("invalid tensor name {name:?}")));
            }
            write!(out, "tensor {name} {}", t.shape().len()).unwrap();
            for d in t.shape() {
                write!(out, " {d}").unwrap();
            }
            out.push('\n');
            for chunk in t.data().chunks(PER_LINE) {
                let words: Vec<String> = chunk.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
                writeln!(out, "{}", words.join(" ")).unwrap();
            }
        }
        writeln!(out, "end").unwrap();
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("missing header"));
        }
        let meta = lines
            .next()
            .and_then(|l| l.strip_prefix("meta "))
            .ok_or_else(|| bad("missing meta line"))?
            .to_string();
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("tensors "))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad("missing tensor count"))?;

        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let head = lines.next().ok_or_else(|| bad("truncated"))?;
            let mut parts = head.split_whitespace();
            if parts.next() != Some("tensor") {
                return Err(bad(format!("expected tensor header, got {head:?}")));
            }
            let name = parts.next().ok_or_else(|| bad("missing name"))?.to_string();
            let rank: usize = parts.next().and_then(|r| r.parse().ok()).ok_or_else(|| bad("bad rank"))?;
            let shape = parts
                .map(|d| d.parse::<usize>().map_err(|_| bad(format!("bad dim in {head:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if shape.len() != rank {
                return Err(bad(format!("rank {rank} but {} dims for {name}", shape.len())));
            }
            let n: usize = shape.iter().product();
            let mut data = Vec::with_capacity(n);
            while data.len() < n {
                let line = lines.next().ok_or_else(|| bad(format!("truncated data for {name}")))?;
                for w in line.split_whitespace() {
                    let bits = u64::from_str_radix(w, 16).map_err(|_| bad(format!("bad word {w:?}")))?;
                    data.push(f64::from_bits(bits));
                }
            }
            if data.len() != n {
                return Err(bad(format!("{name}: expected {n} values, got {}", data.len())));
            }
            tensors.push((name, Tensor::new(shape, data)?));
        }
        if lines.next() != Some("end") {
            return Err(bad("missing end marker"));
        }
        Ok(Self { meta, tensors })
    }

    /// Write to `path`, creating parent directories.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_text()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
