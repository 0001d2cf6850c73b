use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead, Write};

use super::{
    format_half_up, AnnotationRecord, CoverageReport, Label, OverlapReport, RelevanceDistribution,
    MIN_LABELS,
};
use crate::search_gateway::normalize_url;
use crate::tsv::{records, sanitize_cell, LineError};

/// First line of every report.
pub const ROUNDING_NOTE: &str = "# rounding=half-up";

/// Archived flags keyed by normalized URL.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ArchivedFlags {
    flags: HashMap<String, bool>,
}

impl ArchivedFlags {
    pub fn insert(&mut self, url: &str, archived: bool) {
        self.flags.insert(normalize_url(url).unwrap_or_else(|_| url.to_owned()), archived);
    }

    pub fn get(&self, url: &str) -> Option<bool> {
        match normalize_url(url) {
            Ok(n) => self.flags.get(&n).copied(),
            Err(_) => self.flags.get(url).copied(),
        }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }
}

/// `url <TAB> 0|1` per line. A URL listed twice with different flags is an
/// error.
pub fn parse_archived_flags<R: BufRead>(reader: R) -> Result<ArchivedFlags, LineError> {
    let mut out = ArchivedFlags::default();
    for rec in records(reader) {
        let (line, fields) = rec?;
        if fields.len() != 2 {
            return Err(LineError::new(line, format!("expected 2 fields, found {}", fields.len())));
        }
        let flag = match fields[1].trim() {
            "0" => false,
            "1" => true,
            other => return Err(LineError::new(line, format!("flag must be 0 or 1, found {other:?}"))),
        };
        let url = fields[0].trim();
        normalize_url(url).map_err(|e| LineError::new(line, e.to_string()))?;
        if out.get(url).is_some_and(|f| f != flag) {
            return Err(LineError::new(line, format!("conflicting flags for {url}")));
        }
        out.insert(url, flag);
    }
    Ok(out)
}

/// `query <TAB> url <TAB> label,label,...` per line.
pub fn parse_annotations<R: BufRead>(reader: R) -> Result<Vec<AnnotationRecord>, LineError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for rec in records(reader) {
        let (line, fields) = rec?;
        if fields.len() != 3 {
            return Err(LineError::new(line, format!("expected 3 fields, found {}", fields.len())));
        }
        let query = fields[0].trim().to_owned();
        let url = fields[1].trim().to_owned();
        if query.is_empty() || url.is_empty() {
            return Err(LineError::new(line, "empty query or url"));
        }
        let labels = fields[2]
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<Label>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| LineError::new(line, e))?;
        if labels.len() < MIN_LABELS {
            return Err(LineError::new(
                line,
                format!("{} labels for {url}, at least {MIN_LABELS} required", labels.len()),
            ));
        }
        if !seen.insert((query.clone(), url.clone())) {
            return Err(LineError::new(line, format!("duplicate annotation for {query} / {url}")));
        }
        out.push(AnnotationRecord { query, url, labels });
    }
    Ok(out)
}

/// Whole-percent table, one row per bucket and one column per cutoff.
pub fn write_coverage_tsv<W: Write>(mut out: W, report: &CoverageReport) -> io::Result<()> {
    writeln!(out, "{ROUNDING_NOTE}")?;
    write!(out, "bucket")?;
    for k in &report.cutoffs {
        write!(out, "\ttop-{k}")?;
    }
    writeln!(out)?;
    for row in &report.rows {
        write!(out, "{}", row.label)?;
        for s in &row.stats {
            match &s.percent {
                Some(p) => write!(out, "\t{}", format_half_up(p, 0))?,
                None => write!(out, "\tNA")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One line per bucket and cutoff with the exact fraction and exclusion
/// counts.
pub fn write_coverage_full_tsv<W: Write>(mut out: W, report: &CoverageReport) -> io::Result<()> {
    writeln!(out, "{ROUNDING_NOTE}")?;
    writeln!(out, "bucket\tstart_rank\tend_rank\tcutoff\tentities\texcluded\tpercent\tpercent_exact")?;
    for row in &report.rows {
        for s in &row.stats {
            let (dec, exact) = match &s.percent {
                Some(p) => (format_half_up(p, 6), p.to_string()),
                None => ("NA".to_owned(), "NA".to_owned()),
            };
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{dec}\t{exact}",
                row.label, row.start_rank, row.end_rank, s.cutoff, s.entities, s.excluded
            )?;
        }
    }
    Ok(())
}

pub fn write_overlap_tsv<W: Write>(mut out: W, report: &OverlapReport) -> io::Result<()> {
    writeln!(out, "{ROUNDING_NOTE}")?;
    writeln!(out, "category\tperiod_a\tperiod_b\tk\tentities\toverlap\toverlap_exact")?;
    for r in &report.rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            sanitize_cell(&r.category),
            r.pair.first,
            r.pair.second,
            r.k,
            r.entities,
            format_half_up(&r.mean, 2),
            r.mean
        )?;
    }
    for w in &report.warnings {
        writeln!(
            out,
            "# warning: category {} has no entity with snapshots in both {} and {}",
            sanitize_cell(&w.category),
            w.pair.first,
            w.pair.second
        )?;
    }
    Ok(())
}

pub fn write_annotations_tsv<W: Write>(mut out: W, rows: &[RelevanceDistribution]) -> io::Result<()> {
    writeln!(out, "{ROUNDING_NOTE}")?;
    writeln!(out, "query\tlong_term\tshort_term\tdecided\tundecided")?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            sanitize_cell(&r.query),
            format_half_up(&r.long_term, 2),
            format_half_up(&r.short_term, 2),
            r.decided,
            r.undecided
        )?;
    }
    Ok(())
}
