//! Per-agent SLAM feature vectors and the flattened multi-frame observation
//! fed to the Q-network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slam::SlamState;

/// Summary of one agent's SLAM health at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbFeatureVector {
    pub map_points: u32,
    pub kf_new: u32,
    pub kf_culled: u32,
    pub loop_interval: u32,
    /// Path distances (m) to every other agent in ascending id order;
    /// unreachable peers carry the sentinel.
    pub distances: Vec<f64>,
}

impl OrbFeatureVector {
    pub const SCALAR_FIELDS: usize = 4;

    pub fn width(m: usize) -> usize {
        Self::SCALAR_FIELDS + m - 1
    }

    /// Fixed-scale normalisation clipped to `[0, scales.clip]`.
    pub fn normalized(&self, scales: &NormalizationScales) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::SCALAR_FIELDS + self.distances.len());
        out.push(self.map_points as f64 / scales.map_points);
        out.push(self.kf_new as f64 / scales.keyframes);
        out.push(self.kf_culled as f64 / scales.keyframes);
        out.push(self.loop_interval as f64 / scales.loop_interval);
        out.extend(self.distances.iter().map(|d| d / scales.distance));
        for v in &mut out {
            *v = if v.is_finite() { v.clamp(0.0, scales.clip) } else { scales.clip };
        }
        out
    }
}

/// Divisors applied to raw feature fields before they reach the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationScales {
    pub map_points: f64,
    pub keyframes: f64,
    pub loop_interval: f64,
    /// Usually the world diagonal.
    pub distance: f64,
    pub clip: f64,
}

impl NormalizationScales {
    pub fn for_diagonal(diagonal: f64) -> Self {
        Self {
            distance: diagonal,
            ..Self::default()
        }
    }
}

impl Default for NormalizationScales {
    fn default() -> Self {
        Self {
            map_points: 500.0,
            keyframes: 10.0,
            loop_interval: 200.0,
            distance: 1.0,
            clip: 2.0,
        }
    }
}

/// Sample one agent's feature vector, consuming its keyframe counters.
/// `distances` are to the other agents in ascending id order, `None` when
/// unreachable.
pub fn sample_feature_vector(state: &mut SlamState, distances: &[Option<f64>], unreachable: f64) -> OrbFeatureVector {
    let counts = state.take_keyframe_counts();
    OrbFeatureVector {
        map_points: state.map_points_current(),
        kf_new: counts.created,
        kf_culled: counts.culled,
        loop_interval: state.ticks_since_loop(),
        distances: distances.iter().map(|d| d.unwrap_or(unreachable)).collect(),
    }
}

/// Normalised feature vectors of all agents, one frame per tick.
#[derive(Debug, Clone)]
pub struct FeatureHistory {
    m: usize,
    scales: NormalizationScales,
    frames: Vec<Vec<Vec<f64>>>,
    raw: Vec<Vec<OrbFeatureVector>>,
}

impl FeatureHistory {
    pub fn new(m: usize, scales: NormalizationScales) -> Self {
        Self {
            m,
            scales,
            frames: Vec::new(),
            raw: Vec::new(),
        }
    }

    pub fn agents(&self) -> usize {
        self.m
    }

    /// Number of recorded ticks.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, frame: Vec<OrbFeatureVector>) -> Result<()> {
        if frame.len() != self.m {
            return Err(Error::InvalidArgument(format!("frame has {} agents, expected {}", frame.len(), self.m)));
        }
        let width = OrbFeatureVector::width(self.m);
        if let Some(bad) = frame.iter().position(|f| f.distances.len() != self.m - 1) {
            return Err(Error::InvalidArgument(format!("agent {} has {} distances", bad + 1, frame[bad].distances.len())));
        }
        let normalized: Vec<Vec<f64>> = frame.iter().map(|f| f.normalized(&self.scales)).collect();
        debug_assert!(normalized.iter().all(|v| v.len() == width));
        self.frames.push(normalized);
        self.raw.push(frame);
        Ok(())
    }

    /// Raw vector of agent `j` at tick `t` (both 1-based).
    pub fn raw(&self, t: usize, j: usize) -> Option<&OrbFeatureVector> {
        self.raw.get(t.checked_sub(1)?)?.get(j.checked_sub(1)?)
    }

    /// Normalised vector of agent `j` at tick `t` (both 1-based).
    pub fn normalized(&self, t: usize, j: usize) -> Option<&[f64]> {
        self.frames.get(t.checked_sub(1)?)?.get(j.checked_sub(1)?).map(Vec::as_slice)
    }
}

/// Network input: `n` frames of `m` feature vectors, newest frame first.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector(pub Vec<f64>);

impl ObservationVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn width(n: usize, m: usize) -> usize {
        n * m * (m + 3)
    }
}

/// Concatenate frames `t, t-1, ..., t-n+1` (agent-major inside each frame);
/// frames before tick 1 are padded with tick 1.
pub fn observation(history: &FeatureHistory, t: usize, n: usize) -> Result<ObservationVector> {
    if t < 1 {
        return Err(Error::InvalidArgument("observation needs t >= 1".into()));
    }
    if t > history.len() {
        return Err(Error::InvalidArgument(format!("history has {} ticks, asked for {t}", history.len())));
    }
    let m = history.agents();
    let mut x = Vec::with_capacity(ObservationVector::width(n, m));
    for i in 1..=n {
        let frame = if t + 1 > i { t + 1 - i } else { 1 };
        for j in 1..=m {
            x.extend_from_slice(history.normalized(frame, j).expect("frame recorded"));
        }
    }
    Ok(ObservationVector(x))
}
