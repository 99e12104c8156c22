//! Windowed-statistic aggregation of time series into flat features.
//!
//! For each variable we compute 6 statistics (mean, std, min, max,
//! skewness, count) over 7 windows (full series plus the first and last
//! 10%, 25%, 50%), giving 42 features per time-dependent variable. Window
//! boundaries round up (ceil of fraction times length, at least one
//! element). Feature order is variable-major, then window, then statistic.

use crate::data::schema::{Statistic, Window};

/// Slice of the series covered by a window. Series must be time-ordered.
pub fn window_slice<'a>(series: &'a [f64], window: Window) -> &'a [f64] {
    let n = series.len();
    if n == 0 {
        return series;
    }
    let take = |frac: f64| -> usize { ((frac * n as f64).ceil() as usize).clamp(1, n) };
    match window {
        Window::Full => series,
        Window::First10 => &series[..take(0.10)],
        Window::First25 => &series[..take(0.25)],
        Window::First50 => &series[..take(0.50)],
        Window::Last10 => &series[n - take(0.10)..],
        Window::Last25 => &series[n - take(0.25)..],
        Window::Last50 => &series[n - take(0.50)..],
    }
}

/// One statistic of a window. Degenerate windows: std of fewer than two
/// points is 0, skewness of fewer than three points (or zero variance) is 0.
pub fn statistic(values: &[f64], stat: Statistic) -> f64 {
    let n = values.len();
    match stat {
        Statistic::Count => n as f64,
        Statistic::Mean => values.iter().sum::<f64>() / n as f64,
        Statistic::Min => values.iter().cloned().fold(f64::INFINITY, f64::min),
        Statistic::Max => values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        Statistic::Std => {
            if n < 2 {
                return 0.0;
            }
            let mean = values.iter().sum::<f64>() / n as f64;
            let m2 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            m2.sqrt()
        }
        Statistic::Skewness => {
            if n < 3 {
                return 0.0;
            }
            let mean = values.iter().sum::<f64>() / n as f64;
            let m2 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            if m2 <= 0.0 {
                return 0.0;
            }
            let m3 = values
                .iter()
                .map(|v| {
                    let c = v - mean;
                    c * c * c
                })
                .sum::<f64>()
                / n as f64;
            m3 / m2.powf(1.5)
        }
    }
}

/// All 42 window-statistic features of one variable's series, in the
/// canonical (window, statistic) order. Returns None for an empty series:
/// the caller decides whether to drop or impute the row.
pub fn aggregate_series(series: &[f64]) -> Option<Vec<f64>> {
    if series.is_empty() {
        return None;
    }
    let mut out = Vec::with_capacity(Window::ALL.len() * Statistic::ALL.len());
    for window in Window::ALL {
        let slice = window_slice(series, window);
        for stat in Statistic::ALL {
            out.push(statistic(slice, stat));
        }
    }
    Some(out)
}

/// Number of features emitted per time-dependent variable.
pub const FEATURES_PER_VARIABLE: usize = Window::ALL.len() * Statistic::ALL.len();

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_window_hand_arithmetic() {
        let series: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let slice = window_slice(&series, Window::Full);
        assert_eq!(statistic(slice, Statistic::Mean), 5.5);
        assert_eq!(statistic(slice, Statistic::Min), 1.0);
        assert_eq!(statistic(slice, Statistic::Max), 10.0);
        assert_eq!(statistic(slice, Statistic::Count), 10.0);
    }

    #[test]
    fn first_half_of_four_elements() {
        let series = [1.0, 2.0, 3.0, 4.0];
        let slice = window_slice(&series, Window::First50);
        assert_eq!(slice, &[1.0, 2.0]);
        assert_eq!(statistic(slice, Statistic::Mean), 1.5);
        assert_eq!(statistic(slice, Statistic::Count), 2.0);
    }

    #[test]
    fn last_windows_take_from_the_end() {
        let series = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(window_slice(&series, Window::Last50), &[3.0, 4.0]);
        // ceil(0.1 * 4) = 1
        assert_eq!(window_slice(&series, Window::Last10), &[4.0]);
        assert_eq!(window_slice(&series, Window::First10), &[1.0]);
    }

    #[test]
    fn symmetric_series_has_zero_skew() {
        assert_eq!(statistic(&[1.0, 2.0, 3.0], Statistic::Skewness), 0.0);
    }

    #[test]
    fn degenerate_windows() {
        assert_eq!(statistic(&[7.0], Statistic::Std), 0.0);
        assert_eq!(statistic(&[7.0, 8.0], Statistic::Skewness), 0.0);
        // zero variance also yields zero skew, not NaN
        assert_eq!(statistic(&[3.0, 3.0, 3.0], Statistic::Skewness), 0.0);
    }

    #[test]
    fn aggregate_emits_42_features() {
        let series: Vec<f64> = (0..17).map(|v| v as f64).collect();
        let feats = aggregate_series(&series).unwrap();
        assert_eq!(feats.len(), FEATURES_PER_VARIABLE);
        assert_eq!(feats.len(), 42);
        assert!(feats.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn empty_series_is_missing() {
        assert!(aggregate_series(&[]).is_none());
    }

    #[test]
    fn single_element_series_works_everywhere() {
        let feats = aggregate_series(&[2.5]).unwrap();
        assert_eq!(feats.len(), 42);
        // every window collapses to the single point
        for chunk in feats.chunks(6) {
            assert_eq!(chunk[0], 2.5); // mean
            assert_eq!(chunk[1], 0.0); // std
            assert_eq!(chunk[2], 2.5); // min
            assert_eq!(chunk[3], 2.5); // max
            assert_eq!(chunk[4], 0.0); // skew
            assert_eq!(chunk[5], 1.0); // count
        }
    }
}
