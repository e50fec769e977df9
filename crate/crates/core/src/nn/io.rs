//! Line-oriented text format for parameter vectors.
//!
//! ```text
//! emaml-parameters 1
//! layers 4 32 32 1
//! activation tanh
//! head sigmoid-bernoulli
//! count 1217
//! values
//! -1.2345678901234567e-1
//! ...
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! finite `f64` exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::network::{NetworkSpec, OutputHead, ParameterVector};
use crate::error::{Error, Result};

const MAGIC: &str = "emaml-parameters 1";

impl ParameterVector {
    pub fn to_text(&self) -> String {
        let spec = self.spec();
        let sizes: Vec<String> = spec.layer_sizes().iter().map(|n| n.to_string()).collect();
        let mut out = String::with_capacity(32 + 25 * self.len());
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str(&format!("layers {}\n", sizes.join(" ")));
        out.push_str("activation tanh\n");
        out.push_str(&format!("head {}\n", spec.output_head().as_str()));
        out.push_str(&format!("count {}\n", self.len()));
        out.push_str("values\n");
        for v in self.values() {
            out.push_str(&format!("{:.16e}\n", v));
        }
        out
    }

    /// Parses [`to_text`](Self::to_text) output. `origin` is only used in
    /// error messages.
    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let err = |field: &str, message: String| Error::Parse {
            path: origin.to_path_buf(),
            field: field.to_string(),
            message,
        };
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<&str> {
            let line = lines.next().ok_or_else(|| err(key, "unexpected end of file".into()))?;
            if key == "magic" {
                return Ok(line);
            }
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' ').or(if rest.is_empty() { Some("") } else { None }))
                .ok_or_else(|| err(key, format!("expected `{key}` line, found `{line}`")))
        };

        let magic = header("magic")?;
        if magic != MAGIC {
            return Err(err("magic", format!("unsupported header `{magic}`")));
        }
        let sizes = header("layers")?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| err("layers", format!("`{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let activation = header("activation")?;
        if activation != "tanh" {
            return Err(err("activation", format!("unsupported activation `{activation}`")));
        }
        let head_text = header("head")?;
        let head = OutputHead::parse(head_text).ok_or_else(|| err("head", format!("unknown head `{head_text}`")))?;
        let count_text = header("count")?;
        let count: usize = count_text
            .parse()
            .map_err(|e| err("count", format!("`{count_text}`: {e}")))?;
        header("values")?;

        let spec = NetworkSpec::new(sizes, head).map_err(|e| err("layers", e.to_string()))?;
        if spec.param_count() != count {
            return Err(err(
                "count",
                format!("{count} does not match {} parameters implied by layers", spec.param_count()),
            ));
        }
        let mut values = Vec::with_capacity(count);
        for (i, line) in lines.enumerate() {
            let field = format!("values[{i}]");
            if i >= count {
                return Err(err(&field, "more values than `count`".into()));
            }
            let v: f64 = line.trim().parse().map_err(|e| err(&field, format!("`{line}`: {e}")))?;
            if !v.is_finite() {
                return Err(err(&field, format!("non-finite value `{line}`")));
            }
            values.push(v);
        }
        if values.len() != count {
            return Err(err(
                &format!("values[{}]", values.len()),
                format!("expected {count} values, found {}", values.len()),
            ));
        }
        ParameterVector::from_values(spec, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// Writes to a sibling temporary file, syncs it, then renames over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Store(format!("{} has no file name", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp-{}", std::process::id()));
    let tmp: PathBuf = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
