//! Time-varying input currents.

use serde::{Deserialize, Serialize};

/// A current protocol `I(t)` with `t` in ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Stimulus {
    Constant(f64),
    /// `before` until `onset_ms`, `after` from then on.
    Step {
        onset_ms: f64,
        before: f64,
        after: f64,
    },
    /// Each level held for `segment_ms`; the last level persists.
    Staircase {
        levels: Vec<f64>,
        segment_ms: f64,
    },
    /// `base` until `onset_ms`, then `base + slope · (t - onset_ms)`.
    Ramp {
        onset_ms: f64,
        base: f64,
        slope: f64,
    },
    /// `base` plus `amplitude` during each `[start, start + width)`.
    Pulses {
        base: f64,
        pulses: Vec<Pulse>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub start_ms: f64,
    pub width_ms: f64,
    pub amplitude: f64,
}

impl Pulse {
    pub const fn new(start_ms: f64, width_ms: f64, amplitude: f64) -> Self {
        Pulse {
            start_ms,
            width_ms,
            amplitude,
        }
    }
}

impl Stimulus {
    pub fn current_at(&self, t: f64) -> f64 {
        match self {
            Stimulus::Constant(i) => *i,
            Stimulus::Step {
                onset_ms,
                before,
                after,
            } => {
                if t < *onset_ms {
                    *before
                } else {
                    *after
                }
            }
            Stimulus::Staircase { levels, segment_ms } => {
                if levels.is_empty() {
                    return 0.0;
                }
                let idx = (t / segment_ms).floor().max(0.0) as usize;
                levels[idx.min(levels.len() - 1)]
            }
            Stimulus::Ramp { onset_ms, base, slope } => {
                if t < *onset_ms {
                    *base
                } else {
                    base + slope * (t - onset_ms)
                }
            }
            Stimulus::Pulses { base, pulses } => {
                base + pulses
                    .iter()
                    .filter(|p| t >= p.start_ms && t < p.start_ms + p.width_ms)
                    .map(|p| p.amplitude)
                    .sum::<f64>()
            }
        }
    }

    /// Copy of this protocol delayed by `delay_ms`; the current before the
    /// delay equals the protocol's value at `t = 0`.
    pub fn delayed(&self, delay_ms: f64) -> Stimulus {
        match self.clone() {
            Stimulus::Constant(i) => Stimulus::Constant(i),
            Stimulus::Step {
                onset_ms,
                before,
                after,
            } => Stimulus::Step {
                onset_ms: onset_ms + delay_ms,
                before,
                after,
            },
            Stimulus::Staircase { levels, segment_ms } => {
                // Padding with the first level keeps staircases piecewise constant.
                let pad = (delay_ms / segment_ms).round() as usize;
                let first = levels.first().copied().unwrap_or(0.0);
                let mut lv = vec![first; pad];
                lv.extend(levels);
                Stimulus::Staircase { levels: lv, segment_ms }
            }
            Stimulus::Ramp { onset_ms, base, slope } => Stimulus::Ramp {
                onset_ms: onset_ms + delay_ms,
                base,
                slope,
            },
            Stimulus::Pulses { base, pulses } => Stimulus::Pulses {
                base,
                pulses: pulses
                    .into_iter()
                    .map(|p| Pulse::new(p.start_ms + delay_ms, p.width_ms, p.amplitude))
                    .collect(),
            },
        }
    }

    /// Adds a constant offset to every level.
    pub fn offset(&self, delta: f64) -> Stimulus {
        match self.clone() {
            Stimulus::Constant(i) => Stimulus::Constant(i + delta),
            Stimulus::Step {
                onset_ms,
                before,
                after,
            } => Stimulus::Step {
                onset_ms,
                before: before + delta,
                after: after + delta,
            },
            Stimulus::Staircase { levels, segment_ms } => Stimulus::Staircase {
                levels: levels.into_iter().map(|l| l + delta).collect(),
                segment_ms,
            },
            Stimulus::Ramp { onset_ms, base, slope } => Stimulus::Ramp {
                onset_ms,
                base: base + delta,
                slope,
            },
            Stimulus::Pulses { base, pulses } => Stimulus::Pulses {
                base: base + delta,
                pulses,
            },
        }
    }

    /// Parses `a,b,c` into a staircase with `segment_ms` per level.
    pub fn parse_staircase(spec: &str, segment_ms: f64) -> Result<Stimulus, String> {
        let levels = spec
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad level `{s}`: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        if levels.is_empty() {
            return Err("empty staircase".into());
        }
        Ok(Stimulus::Staircase { levels, segment_ms })
    }
}
