use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use chrono::NaiveDate;

use super::{EntityId, EntityRecord, PageViewLedger};
use crate::tsv::{records, sanitize_cell, LineError};

/// Parse the entity file:
/// `entity_id \t language \t canonical_title \t redirects(|-separated) \t category`.
/// The last two columns may be empty or missing.
pub fn parse_entities<R: BufRead>(reader: R) -> Result<Vec<EntityRecord>, LineError> {
    let mut out = Vec::new();
    for row in records(reader) {
        let (line, fields) = row?;
        if !(3..=5).contains(&fields.len()) {
            return Err(LineError::new(
                line,
                format!("expected 3 to 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        let id = fields[0].trim();
        let language = fields[1].trim();
        let title = fields[2].trim();
        if id.is_empty() || title.is_empty() {
            return Err(LineError::new(line, "entity id and title must be non-empty"));
        }
        if language.len() != 2 || !language.chars().all(|c| c.is_ascii_lowercase()) {
            return Err(LineError::new(
                line,
                format!("language {language:?} is not a two-letter code"),
            ));
        }
        let redirects: Vec<String> = fields
            .get(3)
            .map(|r| {
                r.split('|')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_owned)
                    .collect()
            })
            .unwrap_or_default();
        if redirects.iter().any(|r| r == title) {
            return Err(LineError::new(line, "redirect equals the canonical title"));
        }
        let category = fields
            .get(4)
            .map(|c| c.trim())
            .filter(|c| !c.is_empty())
            .map(str::to_owned);
        out.push(EntityRecord {
            entity_id: EntityId::new(id),
            canonical_title: title.to_owned(),
            language: language.to_owned(),
            redirect_titles: redirects,
            cumulative_views: 0,
            category,
        });
    }
    Ok(out)
}

/// Write records in the format [`parse_entities`] reads.
pub fn write_entities<W: Write>(mut out: W, records: &[EntityRecord]) -> io::Result<()> {
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            sanitize_cell(r.entity_id.as_str()),
            r.language,
            sanitize_cell(&r.canonical_title),
            sanitize_cell(&r.redirect_titles.join("|")),
            sanitize_cell(r.category.as_deref().unwrap_or(""))
        )?;
    }
    Ok(())
}

/// Parse `title \t YYYY-MM-DD \t count` lines into `ledger`.
pub fn parse_page_views<R: BufRead>(
    reader: R,
    ledger: &mut PageViewLedger,
) -> Result<usize, LineError> {
    let mut n = 0;
    for row in records(reader) {
        let (line, fields) = row?;
        if fields.len() != 3 {
            return Err(LineError::new(
                line,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(fields[1].trim(), "%Y-%m-%d")
            .map_err(|e| LineError::new(line, format!("bad date {:?}: {e}", fields[1])))?;
        let count: u64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| LineError::new(line, format!("bad count {:?}: {e}", fields[2])))?;
        ledger.record(&fields[0], date, count);
        n += 1;
    }
    Ok(n)
}

/// Parse the staged `entity_id \t cumulative_views` file.
pub fn parse_view_totals<R: BufRead>(reader: R) -> Result<BTreeMap<EntityId, u64>, LineError> {
    let mut out = BTreeMap::new();
    for row in records(reader) {
        let (line, fields) = row?;
        if fields.len() != 2 {
            return Err(LineError::new(line, "expected entity_id and views"));
        }
        let views = fields[1]
            .trim()
            .parse()
            .map_err(|e| LineError::new(line, format!("bad view count: {e}")))?;
        out.insert(EntityId::new(fields[0].trim()), views);
    }
    Ok(out)
}

pub fn write_view_totals<W: Write>(mut out: W, views: &BTreeMap<EntityId, u64>) -> io::Result<()> {
    for (id, v) in views {
        writeln!(out, "{id}\t{v}")?;
    }
    Ok(())
}
