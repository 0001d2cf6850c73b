use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::{DateTime, NaiveDate, Utc};
use num_rational::BigRational;
use num_traits::Zero;

use super::{hundred, ratio, AnalyticsError};
use crate::result_cache::{CachedResultSet, QueryKey};
use crate::search_gateway::normalize_url;

pub const UNCATEGORIZED: &str = "uncategorized";

fn top_k_set(urls: &[String], k: usize) -> HashSet<String> {
    urls.iter()
        .take(k)
        .map(|u| normalize_url(u).unwrap_or_else(|_| u.clone()))
        .collect()
}

/// `100 · |A ∩ B| / min(|A|, |B|)` over the first `k` URLs of each list,
/// compared after URL normalization. Zero when either side is empty.
pub fn overlap(a: &[String], b: &[String], k: usize) -> BigRational {
    let a = top_k_set(a, k);
    let b = top_k_set(b, k);
    let smaller = a.len().min(b.len());
    if smaller == 0 {
        return BigRational::zero();
    }
    let shared = a.intersection(&b).count();
    ratio(shared, smaller) * hundred()
}

/// `YYYY-MM` of a timestamp.
pub fn period_of(at: &DateTime<Utc>) -> String {
    at.format("%Y-%m").to_string()
}

fn check_period(p: &str) -> Result<(), AnalyticsError> {
    let valid = p.len() == 7 && NaiveDate::parse_from_str(&format!("{p}-01"), "%Y-%m-%d").is_ok();
    if valid {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidPeriod(p.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PeriodPair {
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapRow {
    pub category: String,
    pub pair: PeriodPair,
    pub k: usize,
    pub entities: usize,
    pub mean: BigRational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapWarning {
    pub category: String,
    pub pair: PeriodPair,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OverlapReport {
    pub rows: Vec<OverlapRow>,
    pub warnings: Vec<OverlapWarning>,
}

/// Mean per-entity overlap for every category, every pair of `periods`
/// (in the given order) and every `k`.
///
/// An entity's result list for a period is its latest snapshot retrieved in
/// that calendar month. Entities missing from `categories` are grouped
/// under `uncategorized`.
pub fn category_overlap(
    snapshots: &[CachedResultSet],
    categories: &BTreeMap<QueryKey, String>,
    periods: &[String],
    ks: &[usize],
) -> Result<OverlapReport, AnalyticsError> {
    for p in periods {
        check_period(p)?;
    }
    let distinct: BTreeSet<&String> = periods.iter().collect();
    if distinct.len() < 2 || distinct.len() != periods.len() {
        return Err(AnalyticsError::InvalidArgument(
            "need at least two distinct periods".into(),
        ));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(AnalyticsError::InvalidArgument("k values must be positive".into()));
    }

    // (entity, period) -> latest snapshot in that period
    let mut latest: BTreeMap<(&QueryKey, String), &CachedResultSet> = BTreeMap::new();
    for s in snapshots {
        let slot = latest.entry((&s.query_key, period_of(&s.retrieved_at))).or_insert(s);
        if s.retrieved_at > slot.retrieved_at {
            *slot = s;
        }
    }
    let mut members: BTreeMap<&str, BTreeSet<&QueryKey>> = BTreeMap::new();
    for s in snapshots {
        let category = categories
            .get(&s.query_key)
            .map_or(UNCATEGORIZED, String::as_str);
        members.entry(category).or_default().insert(&s.query_key);
    }

    let mut report = OverlapReport::default();
    for (category, keys) in &members {
        for i in 0..periods.len() {
            for j in i + 1..periods.len() {
                let pair = PeriodPair {
                    first: periods[i].clone(),
                    second: periods[j].clone(),
                };
                let both: Vec<(&CachedResultSet, &CachedResultSet)> = keys
                    .iter()
                    .filter_map(|key| {
                        let a = latest.get(&(*key, pair.first.clone()))?;
                        let b = latest.get(&(*key, pair.second.clone()))?;
                        Some((*a, *b))
                    })
                    .collect();
                if both.is_empty() {
                    report.warnings.push(OverlapWarning {
                        category: category.to_string(),
                        pair,
                    });
                    continue;
                }
                for &k in ks {
                    let mut sum = BigRational::zero();
                    for (a, b) in &both {
                        let ua: Vec<String> = a.results.iter().map(|r| r.url.clone()).collect();
                        let ub: Vec<String> = b.results.iter().map(|r| r.url.clone()).collect();
                        sum += overlap(&ua, &ub, k);
                    }
                    report.rows.push(OverlapRow {
                        category: category.to_string(),
                        pair: pair.clone(),
                        k,
                        entities: both.len(),
                        mean: sum / ratio(both.len(), 1),
                    });
                }
            }
        }
    }
    Ok(report)
}
