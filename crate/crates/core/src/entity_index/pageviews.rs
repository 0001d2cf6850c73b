use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{EntityId, EntityRecord};

/// A closed date range `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    start: NaiveDate,
    end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, PageViewError> {
        if start > end {
            return Err(PageViewError::EmptyWindow { start, end });
        }
        Ok(Self { start, end })
    }

    /// Four calendar years, 2011-01-01 through 2014-12-31.
    pub fn four_years() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2011, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2014, 12, 31).expect("valid date"),
        }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

impl Default for DateWindow {
    fn default() -> Self {
        Self::four_years()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PageViewError {
    #[error("empty date window {start}..={end}")]
    EmptyWindow { start: NaiveDate, end: NaiveDate },
    #[error("redirect {from:?} points to {to:?}, which is itself a redirect")]
    RedirectChain { from: String, to: String },
    #[error("title {0:?} is both a redirect and a canonical title")]
    AmbiguousTitle(String),
}

/// Wikipedia titles appear with underscores in dumps and with spaces in the
/// entity file; both forms compare equal.
fn title_key(title: &str) -> String {
    title.trim().replace('_', " ")
}

/// Daily view counts per title plus the redirect map used to fold them onto
/// canonical entities.
#[derive(Debug, Clone, Default)]
pub struct PageViewLedger {
    counts: BTreeMap<String, BTreeMap<NaiveDate, u64>>,
    redirects: BTreeMap<String, String>,
    window: DateWindow,
}

impl PageViewLedger {
    pub fn new(window: DateWindow) -> Self {
        Self {
            window,
            ..Self::default()
        }
    }

    pub fn window(&self) -> DateWindow {
        self.window
    }

    /// Add a daily count. Repeated `(title, date)` entries accumulate.
    pub fn record(&mut self, title: &str, date: NaiveDate, count: u64) {
        *self
            .counts
            .entry(title_key(title))
            .or_default()
            .entry(date)
            .or_default() += count;
    }

    pub fn add_redirect(&mut self, redirect: &str, canonical: &str) {
        self.redirects
            .insert(title_key(redirect), title_key(canonical));
    }

    /// Register every record's redirect titles.
    pub fn add_redirects_from(&mut self, records: &[EntityRecord]) {
        for r in records {
            for redirect in &r.redirect_titles {
                self.add_redirect(redirect, &r.canonical_title);
            }
        }
    }

    /// Sum of all counts that fall inside the window.
    pub fn in_window_total(&self) -> u64 {
        self.counts
            .values()
            .flat_map(|days| days.iter())
            .filter(|(d, _)| self.window.contains(**d))
            .map(|(_, c)| c)
            .sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageViewTotals {
    pub views: BTreeMap<EntityId, u64>,
    /// In-window counts whose title (or redirect target) matched no entity.
    pub orphans: BTreeMap<String, u64>,
}

impl PageViewTotals {
    pub fn orphan_total(&self) -> u64 {
        self.orphans.values().sum()
    }

    /// Copy the totals onto `records`; entities without views get 0.
    pub fn apply(&self, records: &mut [EntityRecord]) {
        for r in records {
            r.cumulative_views = self.views.get(&r.entity_id).copied().unwrap_or(0);
        }
    }
}

/// Cumulative in-window views per entity: its own daily counts plus those of
/// every title redirecting to it.
pub fn aggregate_page_views(
    ledger: &PageViewLedger,
    records: &[EntityRecord],
) -> Result<PageViewTotals, PageViewError> {
    let canonical: HashMap<String, &EntityId> = records
        .iter()
        .map(|r| (title_key(&r.canonical_title), &r.entity_id))
        .collect();

    for (from, to) in &ledger.redirects {
        if ledger.redirects.contains_key(to) {
            return Err(PageViewError::RedirectChain {
                from: from.clone(),
                to: to.clone(),
            });
        }
        if canonical.contains_key(from) {
            return Err(PageViewError::AmbiguousTitle(from.clone()));
        }
    }

    let mut totals = PageViewTotals {
        views: records.iter().map(|r| (r.entity_id.clone(), 0)).collect(),
        orphans: BTreeMap::new(),
    };

    for (title, days) in &ledger.counts {
        let sum: u64 = days
            .iter()
            .filter(|(d, _)| ledger.window.contains(**d))
            .map(|(_, c)| c)
            .sum();
        if sum == 0 {
            continue;
        }
        let target = ledger.redirects.get(title).unwrap_or(title);
        match canonical.get(target) {
            Some(id) => *totals.views.get_mut(*id).expect("seeded above") += sum,
            None => *totals.orphans.entry(title.clone()).or_default() += sum,
        }
    }
    Ok(totals)
}
