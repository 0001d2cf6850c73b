use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::Zero;

use super::{hundred, ratio, AnalyticsError, PopularityBucket};
use crate::entity_index::EntityId;

pub const DEFAULT_CUTOFFS: [usize; 5] = [10, 20, 30, 40, 50];

#[derive(Debug, Clone, PartialEq)]
pub struct CutoffStat {
    pub cutoff: usize,
    /// Mean archived percentage over contributing entities; `None` when no
    /// entity in the bucket had any results.
    pub percent: Option<BigRational>,
    pub entities: usize,
    /// Entities left out because they had no results.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRow {
    pub label: String,
    pub start_rank: usize,
    pub end_rank: usize,
    pub stats: Vec<CutoffStat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub cutoffs: Vec<usize>,
    pub rows: Vec<CoverageRow>,
}

fn check_cutoffs(cutoffs: &[usize]) -> Result<(), AnalyticsError> {
    if cutoffs.is_empty() {
        return Err(AnalyticsError::InvalidCutoffs("no cutoffs given".into()));
    }
    if cutoffs[0] == 0 || cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnalyticsError::InvalidCutoffs(format!(
            "{cutoffs:?} must be positive and strictly increasing"
        )));
    }
    Ok(())
}

/// For every bucket and cutoff k: the share of archived URLs among each
/// entity's first k results, averaged over the bucket's entities.
///
/// `results` maps an entity to its result URLs in rank order; a missing
/// entity counts as having no results. Entities shorter than k contribute
/// the fraction over their actual length.
pub fn coverage(
    buckets: &[PopularityBucket],
    results: &HashMap<EntityId, Vec<String>>,
    archived: &dyn Fn(&str) -> Option<bool>,
    cutoffs: &[usize],
) -> Result<CoverageReport, AnalyticsError> {
    check_cutoffs(cutoffs)?;
    let empty = Vec::new();
    let mut rows = Vec::with_capacity(buckets.len());
    for bucket in buckets {
        // flags per entity, looked up once
        let mut flags = Vec::with_capacity(bucket.entity_ids.len());
        for id in &bucket.entity_ids {
            let urls = results.get(id).unwrap_or(&empty);
            let limit = urls.len().min(*cutoffs.last().unwrap());
            let mut row = Vec::with_capacity(limit);
            for url in &urls[..limit] {
                let flag = archived(url).ok_or_else(|| AnalyticsError::MissingFlag {
                    entity: id.clone(),
                    url: url.clone(),
                })?;
                row.push(flag);
            }
            flags.push(row);
        }
        let stats = cutoffs
            .iter()
            .map(|&k| {
                let mut sum = BigRational::zero();
                let mut entities = 0;
                let mut excluded = 0;
                for row in &flags {
                    let n = row.len().min(k);
                    if n == 0 {
                        excluded += 1;
                        continue;
                    }
                    let hits = row[..n].iter().filter(|&&a| a).count();
                    sum += ratio(hits, n);
                    entities += 1;
                }
                let percent = (entities > 0).then(|| sum * hundred() / ratio(entities, 1));
                CutoffStat {
                    cutoff: k,
                    percent,
                    entities,
                    excluded,
                }
            })
            .collect();
        rows.push(CoverageRow {
            label: bucket.label.clone(),
            start_rank: bucket.start_rank,
            end_rank: bucket.end_rank,
            stats,
        });
    }
    Ok(CoverageReport {
        cutoffs: cutoffs.to_vec(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{bucket_entities, format_half_up, to_f64};
    use proptest::prelude::*;

    type Setup = (Vec<PopularityBucket>, HashMap<EntityId, Vec<String>>, HashMap<String, bool>);

    fn setup(sets: Vec<Vec<bool>>) -> Setup {
        let ids: Vec<EntityId> = (0..sets.len()).map(|i| EntityId::new(format!("E{i}"))).collect();
        let mut results = HashMap::new();
        let mut flags = HashMap::new();
        for (i, set) in sets.iter().enumerate() {
            let urls: Vec<String> = (0..set.len()).map(|j| format!("http://e{i}.example/{j}")).collect();
            for (u, &a) in urls.iter().zip(set) {
                flags.insert(u.clone(), a);
            }
            results.insert(ids[i].clone(), urls);
        }
        let buckets = bucket_entities(&ids, &[1], ids.len()).unwrap();
        (buckets, results, flags)
    }

    #[test]
    fn nine_of_ten() {
        let mut set = vec![true; 10];
        set[4] = false;
        let (b, r, f) = setup(vec![set]);
        let report = coverage(&b, &r, &|u| f.get(u).copied(), &[10]).unwrap();
        assert_eq!(format_half_up(report.rows[0].stats[0].percent.as_ref().unwrap(), 0), "90");
    }

    #[test]
    fn all_archived_is_hundred_everywhere() {
        let (b, r, f) = setup(vec![vec![true; 50], vec![true; 50]]);
        let report = coverage(&b, &r, &|u| f.get(u).copied(), &DEFAULT_CUTOFFS).unwrap();
        for s in &report.rows[0].stats {
            assert_eq!(s.percent, Some(hundred()));
        }
    }

    #[test]
    fn per_entity_fractions_are_averaged() {
        // 1/1 and 0/10: pooled counts would give 1/11, the mean is 1/2.
        let (b, r, f) = setup(vec![vec![true], vec![false; 10]]);
        let report = coverage(&b, &r, &|u| f.get(u).copied(), &[10]).unwrap();
        assert_eq!(report.rows[0].stats[0].percent, Some(ratio(50, 1)));
    }

    #[test]
    fn zero_result_entities_are_excluded_and_counted() {
        let (b, r, f) = setup(vec![vec![true, false], vec![]]);
        let report = coverage(&b, &r, &|u| f.get(u).copied(), &[10, 20]).unwrap();
        let s = &report.rows[0].stats[0];
        assert_eq!((s.entities, s.excluded), (1, 1));
        assert_eq!(s.percent, Some(ratio(50, 1)));
        let (b, r, f) = setup(vec![vec![]]);
        let report = coverage(&b, &r, &|u| f.get(u).copied(), &[10]).unwrap();
        assert_eq!(report.rows[0].stats[0].percent, None);
    }

    #[test]
    fn missing_flag_and_bad_cutoffs_are_errors() {
        let (b, r, _) = setup(vec![vec![true]]);
        assert!(matches!(
            coverage(&b, &r, &|_| None, &[10]),
            Err(AnalyticsError::MissingFlag { .. })
        ));
        assert!(coverage(&b, &r, &|_| Some(true), &[]).is_err());
        assert!(coverage(&b, &r, &|_| Some(true), &[20, 10]).is_err());
        assert!(coverage(&b, &r, &|_| Some(true), &[0, 10]).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            sets in prop::collection::vec(prop::collection::vec(any::<bool>(), 0..60), 1..12),
        ) {
            let (b, r, f) = setup(sets.clone());
            let report = coverage(&b, &r, &|u| f.get(u).copied(), &DEFAULT_CUTOFFS).unwrap();
            for (ci, &k) in DEFAULT_CUTOFFS.iter().enumerate() {
                let fractions: Vec<f64> = sets
                    .iter()
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        let n = s.len().min(k);
                        s[..n].iter().filter(|&&a| a).count() as f64 / n as f64
                    })
                    .collect();
                let stat = &report.rows[0].stats[ci];
                prop_assert_eq!(stat.excluded, sets.len() - fractions.len());
                match &stat.percent {
                    None => prop_assert!(fractions.is_empty()),
                    Some(p) => {
                        let expected = 100.0 * fractions.iter().sum::<f64>() / fractions.len() as f64;
                        prop_assert!((to_f64(p) - expected).abs() < 1e-9);
                        prop_assert!((0.0..=100.0).contains(&to_f64(p)));
                    }
                }
            }
        }
    }
}
