//! Geographic distance and the prediction/truth matching rules.

use crate::kg::{GeoCoordinate, Granularity};

/// Mean Earth radius, kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Tolerance under which two predicted coordinates count as the same place.
pub const DEDUP_TOLERANCE_KM: f64 = 0.001;

/// Haversine great-circle distance in kilometres.
pub fn geo_distance(a: GeoCoordinate, b: GeoCoordinate) -> f64 {
    let lat1 = a.lat().to_radians();
    let lat2 = b.lat().to_radians();
    let dlat = (b.lat() - a.lat()).to_radians() / 2.0;
    let dlon = (b.lon() - a.lon()).to_radians() / 2.0;
    let h = dlat.sin().powi(2) + lat1.cos() * lat2.cos() * dlon.sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl MatchCounts {
    pub fn add(&mut self, other: MatchCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

/// Greedy one-to-one matching for one document: repeatedly pair the closest
/// (prediction, truth) pair with distance below `threshold_km`, remove
/// both. Matched pairs are true positives, leftover predictions false
/// positives, leftover truths false negatives. With `granularity_aware`, a
/// pair additionally requires equal granularity levels. Ties in distance
/// break by prediction index, then truth index.
///
/// Returns the counts and the matched index pairs `(prediction, truth)`.
pub fn match_document(
    predictions: &[(GeoCoordinate, Granularity)],
    truths: &[(GeoCoordinate, Granularity)],
    threshold_km: f64,
    granularity_aware: bool,
) -> (MatchCounts, Vec<(usize, usize)>) {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, (pc, pg)) in predictions.iter().enumerate() {
        for (ti, (tc, tg)) in truths.iter().enumerate() {
            if granularity_aware && pg != tg {
                continue;
            }
            let d = geo_distance(*pc, *tc);
            if d < threshold_km {
                pairs.push((d, pi, ti));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_pred = vec![false; predictions.len()];
    let mut used_truth = vec![false; truths.len()];
    let mut matched = Vec::new();
    for (_, pi, ti) in pairs {
        if !used_pred[pi] && !used_truth[ti] {
            used_pred[pi] = true;
            used_truth[ti] = true;
            matched.push((pi, ti));
        }
    }
    let tp = matched.len() as u64;
    let counts = MatchCounts {
        tp,
        fp: predictions.len() as u64 - tp,
        fn_: truths.len() as u64 - tp,
    };
    (counts, matched)
}

/// Drops items whose coordinate coincides (within `tol_km`) with an
/// already-kept higher-scored item. Input order is restored on output.
pub fn dedup_nearby<T>(
    items: Vec<T>,
    coord: impl Fn(&T) -> GeoCoordinate,
    score: impl Fn(&T) -> f64,
    tol_km: f64,
) -> Vec<T> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| score(&items[b]).total_cmp(&score(&items[a])).then(a.cmp(&b)));
    let mut keep = vec![false; items.len()];
    let mut kept_coords: Vec<GeoCoordinate> = Vec::new();
    for idx in order {
        let c = coord(&items[idx]);
        if kept_coords.iter().all(|k| geo_distance(*k, c) >= tol_km) {
            keep[idx] = true;
            kept_coords.push(c);
        }
    }
    items
        .into_iter()
        .zip(keep)
        .filter_map(|(item, k)| k.then_some(item))
        .collect()
}

pub fn precision(tp: u64, fp: u64) -> f64 {
    if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    }
}

pub fn recall(tp: u64, fn_: u64) -> f64 {
    if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    }
}

pub fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let p = precision(tp, fp);
    let r = recall(tp, fn_);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(lat: f64, lon: f64) -> GeoCoordinate {
        GeoCoordinate::new(lat, lon).unwrap()
    }

    #[test]
    fn identical_points_have_zero_distance() {
        assert_eq!(geo_distance(c(51.5, -0.12), c(51.5, -0.12)), 0.0);
    }

    #[test]
    fn half_circumference() {
        let d = geo_distance(c(0.0, 0.0), c(0.0, 180.0));
        let want = std::f64::consts::PI * EARTH_RADIUS_KM;
        assert!((d - want).abs() / want < 1e-12);
    }

    #[test]
    fn london_to_paris() {
        // Computed independently at high precision for R = 6371.0088 km.
        let d = geo_distance(c(51.5007, -0.1246), c(48.8584, 2.2945));
        assert!((d - 340.5394).abs() < 0.5, "got {d}");
    }

    #[test]
    fn one_to_one_matching_never_double_counts() {
        // Two predictions cluster near a single truth: only one matches.
        let truths = vec![(c(0.0, 0.0), Granularity::Unknown)];
        let preds = vec![
            (c(0.01, 0.0), Granularity::Unknown),
            (c(0.02, 0.0), Granularity::Unknown),
        ];
        let (counts, matched) = match_document(&preds, &truths, 50.0, false);
        assert_eq!((counts.tp, counts.fp, counts.fn_), (1, 1, 0));
        assert_eq!(matched, vec![(0, 0)]);
    }

    #[test]
    fn granularity_aware_requires_equal_levels() {
        let truths = vec![(c(0.0, 0.0), Granularity::City)];
        let preds = vec![(c(0.01, 0.0), Granularity::Country)];
        let (plain, _) = match_document(&preds, &truths, 50.0, false);
        assert_eq!(plain.tp, 1);
        let (aware, _) = match_document(&preds, &truths, 50.0, true);
        assert_eq!((aware.tp, aware.fp, aware.fn_), (0, 1, 1));
    }

    #[test]
    fn dedup_keeps_higher_score() {
        let items = vec![(c(10.0, 10.0), 0.4), (c(10.0, 10.0), 0.9), (c(20.0, 20.0), 0.1)];
        let kept = dedup_nearby(items, |i| i.0, |i| i.1, DEDUP_TOLERANCE_KM);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].1, 0.9);
        assert_eq!(kept[1].1, 0.1);
    }

    proptest! {
        #[test]
        fn distance_is_symmetric_and_nonnegative(
            lat1 in -90.0f64..90.0, lon1 in -180.0f64..180.0,
            lat2 in -90.0f64..90.0, lon2 in -180.0f64..180.0,
        ) {
            let a = c(lat1, lon1);
            let b = c(lat2, lon2);
            let d1 = geo_distance(a, b);
            let d2 = geo_distance(b, a);
            prop_assert!(d1 >= 0.0);
            prop_assert!((d1 - d2).abs() < 1e-9);
            prop_assert!(d1 <= std::f64::consts::PI * EARTH_RADIUS_KM + 1e-9);
        }

        #[test]
        fn triangle_inequality(
            lat1 in -90.0f64..90.0, lon1 in -180.0f64..180.0,
            lat2 in -90.0f64..90.0, lon2 in -180.0f64..180.0,
            lat3 in -90.0f64..90.0, lon3 in -180.0f64..180.0,
        ) {
            let a = c(lat1, lon1);
            let b = c(lat2, lon2);
            let m = c(lat3, lon3);
            prop_assert!(geo_distance(a, b) <= geo_distance(a, m) + geo_distance(m, b) + 1e-6);
        }
    }
}
