use std::io::{self, BufRead, Write};

use super::SearchResult;
use crate::tsv::{records, sanitize_cell, LineError};

/// Read `rank <TAB> url <TAB> title <TAB> snippet` lines. Title and snippet
/// may be empty.
pub fn parse_results_tsv<R: BufRead>(reader: R) -> Result<Vec<SearchResult>, LineError> {
    let mut out = Vec::new();
    for row in records(reader) {
        let (line, f) = row?;
        if !(2..=4).contains(&f.len()) {
            return Err(LineError::new(
                line,
                format!("expected rank, url, title, snippet; found {} fields", f.len()),
            ));
        }
        let rank = f[0]
            .trim()
            .parse()
            .map_err(|e| LineError::new(line, format!("bad rank {:?}: {e}", f[0])))?;
        out.push(SearchResult {
            rank,
            url: f[1].trim().to_owned(),
            title: f.get(2).cloned().unwrap_or_default(),
            snippet: f.get(3).cloned().unwrap_or_default(),
        });
    }
    Ok(out)
}

pub fn write_results_tsv<W: Write>(mut out: W, results: &[SearchResult]) -> io::Result<()> {
    for r in results {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.rank,
            sanitize_cell(&r.url),
            sanitize_cell(&r.title),
            sanitize_cell(&r.snippet)
        )?;
    }
    Ok(())
}
