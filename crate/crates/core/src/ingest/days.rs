use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{IngestError, Validation};
use crate::calendar::{Calendar, DayClass};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayFilterReport {
    pub day: NaiveDate,
    pub day_class: DayClass,
    pub validation_count: usize,
    pub class_median: f64,
    pub kept: bool,
    pub reason: String,
}

/// Validations per local calendar day.
pub fn day_counts(validations: &[Validation]) -> BTreeMap<NaiveDate, usize> {
    let mut counts = BTreeMap::new();
    for v in validations {
        *counts.entry(v.timestamp.local_date()).or_insert(0) += 1;
    }
    counts
}

fn median(values: &mut [usize]) -> f64 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] as f64 + values[n / 2] as f64) / 2.0
    }
}

/// Decides which days to keep from their counts alone.
///
/// A day is dropped when its count falls below `low_factor` times the median of
/// its day class, or above `high_factor` times it.
pub fn decide_days(
    counts: &BTreeMap<NaiveDate, usize>,
    low_factor: f64,
    high_factor: f64,
    calendar: &Calendar,
) -> Result<Vec<DayFilterReport>, IngestError> {
    if counts.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    if counts.len() < 3 {
        return Err(IngestError::TooFewDays(counts.len()));
    }
    if !(low_factor > 0.0 && low_factor < 1.0 && high_factor > 1.0) {
        return Err(IngestError::InvalidFactors {
            low: low_factor,
            high: high_factor,
        });
    }

    let mut by_class: BTreeMap<DayClass, Vec<usize>> = BTreeMap::new();
    for (day, &c) in counts {
        by_class.entry(calendar.day_class(*day)).or_default().push(c);
    }
    let medians: BTreeMap<DayClass, f64> = by_class
        .into_iter()
        .map(|(class, mut v)| (class, median(&mut v)))
        .collect();

    let reports: Vec<DayFilterReport> = counts
        .iter()
        .map(|(&day, &count)| {
            let day_class = calendar.day_class(day);
            let m = medians[&day_class];
            let c = count as f64;
            let (kept, reason) = if c < low_factor * m {
                (false, format!("count below {low_factor} x {day_class} median {m}"))
            } else if c > high_factor * m {
                (false, format!("count above {high_factor} x {day_class} median {m}"))
            } else {
                (true, "within day-class band".to_string())
            };
            DayFilterReport {
                day,
                day_class,
                validation_count: count,
                class_median: m,
                kept,
                reason,
            }
        })
        .collect();

    if reports.iter().all(|r| !r.kept) {
        return Err(IngestError::AllDaysDropped);
    }
    Ok(reports)
}

/// Drops validations on anomalous days and reports the decision for every day.
pub fn filter_anomalous_days(
    validations: Vec<Validation>,
    low_factor: f64,
    high_factor: f64,
    calendar: &Calendar,
) -> Result<(Vec<Validation>, Vec<DayFilterReport>), IngestError> {
    let reports = decide_days(&day_counts(&validations), low_factor, high_factor, calendar)?;
    let dropped: Vec<NaiveDate> = reports.iter().filter(|r| !r.kept).map(|r| r.day).collect();
    let kept = if dropped.is_empty() {
        validations
    } else {
        validations
            .into_iter()
            .filter(|v| !dropped.contains(&v.timestamp.local_date()))
            .collect()
    };
    Ok((kept, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Timestamp;
    use proptest::prelude::*;

    fn d(day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2015, 3, day).unwrap()
    }

    #[test]
    fn march_anomalies_are_dropped() {
        // Weekdays Mon 2 .. Fri 6 with the 5th and 6th corrupted.
        let counts: BTreeMap<_, _> = [
            (d(2), 1_100_000),
            (d(3), 1_100_000),
            (d(4), 1_100_000),
            (d(5), 2_300_000),
            (d(6), 838),
        ]
        .into_iter()
        .collect();
        let reports = decide_days(&counts, 0.5, 2.0, &Calendar::default()).unwrap();
        let dropped: Vec<_> = reports.iter().filter(|r| !r.kept).map(|r| r.day).collect();
        assert_eq!(dropped, vec![d(5), d(6)]);
    }

    #[test]
    fn equal_days_all_kept() {
        let counts: BTreeMap<_, _> = (9..=15).map(|day| (d(day), 500)).collect();
        let reports = decide_days(&counts, 0.5, 2.0, &Calendar::default()).unwrap();
        assert!(reports.iter().all(|r| r.kept));
    }

    #[test]
    fn lone_weekday_is_its_own_median() {
        // Fri 13, Sat 14, Sun 15: each class has one day.
        let counts: BTreeMap<_, _> = [(d(13), 1_000_000), (d(14), 600_000), (d(15), 300_000)]
            .into_iter()
            .collect();
        let reports = decide_days(&counts, 0.5, 2.0, &Calendar::default()).unwrap();
        assert!(reports.iter().all(|r| r.kept));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            decide_days(&BTreeMap::new(), 0.5, 2.0, &Calendar::default()),
            Err(IngestError::EmptyInput)
        ));
        let two: BTreeMap<_, _> = [(d(2), 1), (d(3), 1)].into_iter().collect();
        assert!(matches!(
            decide_days(&two, 0.5, 2.0, &Calendar::default()),
            Err(IngestError::TooFewDays(2))
        ));
        let three: BTreeMap<_, _> = [(d(2), 1), (d(3), 1), (d(4), 1)].into_iter().collect();
        assert!(matches!(
            decide_days(&three, 1.5, 2.0, &Calendar::default()),
            Err(IngestError::InvalidFactors { .. })
        ));
    }

    #[test]
    fn filter_removes_validations_of_dropped_days() {
        let mk = |day: u32, n: usize| {
            (0..n).map(move |i| Validation {
                user_id: format!("u{i}").into(),
                timestamp: format!("2015-03-{day:02}T10:00:00-03:00").parse::<Timestamp>().unwrap(),
                route_id: None,
                vehicle_id: Some("V".into()),
                terminal_id: None,
            })
        };
        let vs: Vec<_> = mk(2, 10).chain(mk(3, 10)).chain(mk(4, 10)).chain(mk(5, 40)).collect();
        let (kept, reports) = filter_anomalous_days(vs, 0.5, 2.0, &Calendar::default()).unwrap();
        assert_eq!(kept.len(), 30);
        assert_eq!(reports.len(), 4);
        assert!(!reports[3].kept);
    }

    proptest! {
        #[test]
        fn median_day_never_dropped(counts in prop::collection::vec(1usize..10_000, 3..20),
                                    low in 0.05f64..0.95, high in 1.05f64..5.0) {
            // All days on weekdays so they share one class.
            let weekdays: Vec<NaiveDate> = (1..=31).map(d).filter(|x| Calendar::default().day_class(*x) == DayClass::Weekday).collect();
            let map: BTreeMap<_, _> = weekdays.iter().copied().zip(counts.iter().copied()).collect();
            let reports = match decide_days(&map, low, high, &Calendar::default()) {
                Ok(r) => r,
                // Possible only with an even count whose middle values are far apart.
                Err(IngestError::AllDaysDropped) => return Ok(()),
                Err(e) => panic!("{e}"),
            };
            for r in &reports {
                if r.validation_count as f64 == r.class_median {
                    prop_assert!(r.kept);
                }
            }
        }
    }
}
