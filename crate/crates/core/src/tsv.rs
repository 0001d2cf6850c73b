//! Line-oriented TSV helpers shared by the ingestion readers.

use std::io::BufRead;

/// A TSV record failed to parse. `line` is 1-based.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl LineError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

/// Iterate over the non-blank lines of `reader`, yielding `(line_no, fields)`.
///
/// A trailing `\r` is stripped so files written on Windows parse the same.
pub fn records<R: BufRead>(
    reader: R,
) -> impl Iterator<Item = Result<(usize, Vec<String>), LineError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(|(idx, line)| {
            let line_no = idx + 1;
            match line {
                Err(e) => Some(Err(LineError::new(line_no, format!("unreadable: {e}")))),
                Ok(line) => {
                    let line = line.strip_suffix('\r').unwrap_or(&line);
                    if line.trim().is_empty() {
                        None
                    } else {
                        Some(Ok((line_no, line.split('\t').map(str::to_owned).collect())))
                    }
                }
            }
        })
}

/// Replace characters that would break a TSV cell.
pub fn sanitize_cell(value: &str) -> String {
    value
        .chars()
        .map(|c| if matches!(c, '\t' | '\n' | '\r') { ' ' } else { c })
        .collect()
}
