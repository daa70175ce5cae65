//! Mechanical firing-regime labels for spike trains.
//!
//! A window with no spikes is resting. Otherwise the inter-spike intervals
//! (ISIs) decide: a coefficient of variation at or below `tonic_cv` means
//! tonic spiking; a jump of at least `burst_gap_ratio` between two
//! consecutive sorted ISIs means the intervals split into intra-burst and
//! inter-burst groups, i.e. bursting.

use serde::{Deserialize, Serialize};

use crate::neuron::{NeuronError, SpikeTrain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Resting,
    TonicSpiking,
    Bursting,
    Other,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Resting => "resting",
            Regime::TonicSpiking => "tonic-spiking",
            Regime::Bursting => "bursting",
            Regime::Other => "other",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub burst_gap_ratio: f64,
    pub tonic_cv: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            burst_gap_ratio: 3.0,
            tonic_cv: 0.2,
        }
    }
}

/// Labels the spikes of `train` whose step index lies in `window`.
pub fn classify_regime(
    train: &SpikeTrain,
    window: std::ops::Range<usize>,
    thresholds: RegimeThresholds,
) -> Result<Regime, NeuronError> {
    if window.end > train.n_steps || window.start > window.end {
        return Err(NeuronError::WindowOutOfRange {
            start: window.start,
            end: window.end,
            len: train.n_steps,
        });
    }
    classify_spikes(train.spikes_in(window), thresholds)
}

/// Same as [`classify_regime`] on a bare, ordered list of spike steps.
pub fn classify_spikes(spikes: &[usize], thresholds: RegimeThresholds) -> Result<Regime, NeuronError> {
    if spikes.is_empty() {
        return Ok(Regime::Resting);
    }
    if spikes.len() < 3 {
        return Err(NeuronError::WindowTooShort { spikes: spikes.len() });
    }
    let isi: Vec<f64> = spikes.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    Ok(classify_intervals(&isi, thresholds))
}

pub fn classify_intervals(isi: &[f64], thresholds: RegimeThresholds) -> Regime {
    let n = isi.len() as f64;
    let mean = isi.iter().sum::<f64>() / n;
    let var = isi.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if var.sqrt() <= thresholds.tonic_cv * mean {
        return Regime::TonicSpiking;
    }
    let mut sorted = isi.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max_gap = sorted
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(1.0, f64::max);
    if max_gap >= thresholds.burst_gap_ratio {
        Regime::Bursting
    } else {
        Regime::Other
    }
}

/// Labels each segment of a staircase run from the spikes in its second
/// half, so the onset transient after each current step is ignored. A half
/// segment with one or two spikes is `Other`.
pub fn classify_staircase(
    train: &SpikeTrain,
    n_segments: usize,
    segment_steps: usize,
    thresholds: RegimeThresholds,
) -> Result<Vec<Regime>, NeuronError> {
    (0..n_segments)
        .map(|i| {
            let end = ((i + 1) * segment_steps).min(train.n_steps);
            let start = (i * segment_steps + segment_steps / 2).min(end);
            match classify_regime(train, start..end, thresholds) {
                Err(NeuronError::WindowTooShort { .. }) => Ok(Regime::Other),
                r => r,
            }
        })
        .collect()
}

/// Collapses runs of equal labels: `[R, B, B, T]` becomes `[R, B, T]`.
pub fn collapse_runs(labels: &[Regime]) -> Vec<Regime> {
    let mut out: Vec<Regime> = Vec::with_capacity(labels.len());
    for &l in labels {
        if out.last() != Some(&l) {
            out.push(l);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spikes_from_isi(isi: &[usize]) -> Vec<usize> {
        let mut t = 0;
        let mut out = vec![0];
        for &d in isi {
            t += d;
            out.push(t);
        }
        out
    }

    #[test]
    fn empty_is_resting() {
        assert_eq!(
            classify_spikes(&[], RegimeThresholds::default()).unwrap(),
            Regime::Resting
        );
    }

    #[test]
    fn regular_is_tonic() {
        let s = spikes_from_isi(&[10, 10, 10, 10]);
        assert_eq!(
            classify_spikes(&s, RegimeThresholds::default()).unwrap(),
            Regime::TonicSpiking
        );
    }

    #[test]
    fn clustered_is_bursting() {
        // Largest jump between sorted intervals is 80 / 5 = 16 >= 3.
        let s = spikes_from_isi(&[5, 5, 5, 80, 5, 5, 5, 80]);
        assert_eq!(
            classify_spikes(&s, RegimeThresholds::default()).unwrap(),
            Regime::Bursting
        );
    }

    #[test]
    fn irregular_is_other() {
        let s = spikes_from_isi(&[10, 14, 18, 12, 16, 20]);
        assert_eq!(classify_spikes(&s, RegimeThresholds::default()).unwrap(), Regime::Other);
    }

    #[test]
    fn too_few_spikes() {
        assert!(matches!(
            classify_spikes(&[3, 40], RegimeThresholds::default()),
            Err(NeuronError::WindowTooShort { spikes: 2 })
        ));
    }

    #[test]
    fn window_bounds_checked() {
        let train = SpikeTrain {
            spike_steps: vec![1, 5, 9, 13],
            dt: 1.0,
            n_steps: 20,
            trace: None,
        };
        assert!(classify_regime(&train, 0..21, RegimeThresholds::default()).is_err());
        assert_eq!(
            classify_regime(&train, 0..20, RegimeThresholds::default()).unwrap(),
            Regime::TonicSpiking
        );
        assert_eq!(
            classify_regime(&train, 14..20, RegimeThresholds::default()).unwrap(),
            Regime::Resting
        );
    }

    #[test]
    fn staircase_uses_second_halves() {
        // Segment 0: a transient spike then silence; segment 1: regular.
        let train = SpikeTrain {
            spike_steps: vec![2, 24, 28, 31, 34, 37],
            dt: 1.0,
            n_steps: 40,
            trace: None,
        };
        let labels = classify_staircase(&train, 2, 20, RegimeThresholds::default()).unwrap();
        assert_eq!(labels, vec![Regime::Resting, Regime::TonicSpiking]);
    }

    #[test]
    fn collapse() {
        use Regime::*;
        assert_eq!(
            collapse_runs(&[Resting, Bursting, Bursting, TonicSpiking]),
            vec![Resting, Bursting, TonicSpiking]
        );
    }
}
