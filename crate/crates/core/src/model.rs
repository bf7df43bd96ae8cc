//! Observation model `Y_k = eps + Delta_k + X_k` with bounded interference.
//!
//! Randomness is counter based: every (seed, trial, purpose) triple owns an
//! independent ChaCha stream keyed by a hash of the triple, so rows can be
//! produced in any order or in parallel and still come out bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Interference bounds live in `[0, 1/2)`.
pub const Q_MAX: f64 = 0.5;

pub(crate) fn check_q(q: f64) -> Result<()> {
    if !(0.0..Q_MAX).contains(&q) {
        return param(format!(
            "interference bound q must lie in [0, 1/2), got {q}"
        ));
    }
    Ok(())
}

/// Law of the interference samples `Delta_k`, always supported on `[-q, q]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterferenceModel {
    None,
    Constant {
        c: f64,
        q: f64,
    },
    Uniform {
        q: f64,
    },
    Rademacher {
        q: f64,
    },
    /// `clamp(s * Z, -q, q)` with `Z` standard normal.
    ClippedGaussian {
        q: f64,
        s: f64,
    },
}

impl InterferenceModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InterferenceModel::None => Ok(()),
            InterferenceModel::Constant { c, q } => {
                check_q(q)?;
                if !(c.abs() <= q) {
                    return param(format!("constant interference {c} exceeds bound {q}"));
                }
                Ok(())
            }
            InterferenceModel::Uniform { q } | InterferenceModel::Rademacher { q } => check_q(q),
            InterferenceModel::ClippedGaussian { q, s } => {
                check_q(q)?;
                if !(s > 0.0 && s.is_finite()) {
                    return param(format!("clipped gaussian scale must be positive, got {s}"));
                }
                Ok(())
            }
        }
    }

    pub fn q(&self) -> f64 {
        match *self {
            InterferenceModel::None => 0.0,
            InterferenceModel::Constant { q, .. }
            | InterferenceModel::Uniform { q }
            | InterferenceModel::Rademacher { q }
            | InterferenceModel::ClippedGaussian { q, .. } => q,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            InterferenceModel::None => "none".to_string(),
            InterferenceModel::Constant { c, .. } => format!("constant({c})"),
            InterferenceModel::Uniform { .. } => "uniform".to_string(),
            InterferenceModel::Rademacher { .. } => "rademacher".to_string(),
            InterferenceModel::ClippedGaussian { s, .. } => format!("clipped_gaussian(s={s})"),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            InterferenceModel::None => 0.0,
            InterferenceModel::Constant { c, .. } => c,
            InterferenceModel::Uniform { q } => q * (2.0 * rng.random::<f64>() - 1.0),
            InterferenceModel::Rademacher { q } => {
                if rng.random::<bool>() {
                    q
                } else {
                    -q
                }
            }
            InterferenceModel::ClippedGaussian { q, s } => {
                let z: f64 = rng.sample(StandardNormal);
                (s * z).clamp(-q, q)
            }
        }
    }
}

/// The interference that maximizes the false alarm rate of both implemented
/// statistics at bound `q`: a constant positive shift of size `q`.
pub fn worst_case_interference(q: f64) -> Result<InterferenceModel> {
    check_q(q)?;
    Ok(InterferenceModel::Constant { c: q, q })
}

/// A family of interference laws indexed by the bound `q`, as used in stress
/// suites and configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StressKind {
    ConstantPlus,
    ConstantMinus,
    Uniform,
    Rademacher,
    ClippedGaussian { s: f64 },
}

impl StressKind {
    pub fn at(&self, q: f64) -> Result<InterferenceModel> {
        let model = match *self {
            StressKind::ConstantPlus => InterferenceModel::Constant { c: q, q },
            StressKind::ConstantMinus => InterferenceModel::Constant { c: -q, q },
            StressKind::Uniform => InterferenceModel::Uniform { q },
            StressKind::Rademacher => InterferenceModel::Rademacher { q },
            StressKind::ClippedGaussian { s } => InterferenceModel::ClippedGaussian { q, s },
        };
        model.validate()?;
        Ok(model)
    }

    pub fn label(&self) -> String {
        match *self {
            StressKind::ConstantPlus => "constant+".to_string(),
            StressKind::ConstantMinus => "constant-".to_string(),
            StressKind::Uniform => "uniform".to_string(),
            StressKind::Rademacher => "rademacher".to_string(),
            StressKind::ClippedGaussian { s } => format!("clipped_gaussian(s={s})"),
        }
    }

    /// Constant(+q) plus the four other shapes.
    pub fn default_suite() -> Vec<StressKind> {
        vec![
            StressKind::ConstantPlus,
            StressKind::ConstantMinus,
            StressKind::Uniform,
            StressKind::Rademacher,
            StressKind::ClippedGaussian { s: 0.2 },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalScenario {
    pub n: usize,
    pub epsilon: u8,
    pub interference: InterferenceModel,
}

impl SignalScenario {
    pub fn new(n: usize, epsilon: u8, interference: InterferenceModel) -> Result<Self> {
        let scenario = Self {
            n,
            epsilon,
            interference,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return param("sample count n must be at least 1");
        }
        if self.epsilon > 1 {
            return param(format!("epsilon must be 0 or 1, got {}", self.epsilon));
        }
        self.interference.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBatch {
    pub trials: usize,
    pub n: usize,
    /// Row-major, `trials * n` values.
    pub data: Vec<f64>,
    pub seed: u64,
}

impl ObservationBatch {
    pub fn row(&self, trial: usize) -> &[f64] {
        &self.data[trial * self.n..(trial + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Noise = 0x6e6f6973,
    Interference = 0x696e7466,
    Aux = 0x61757821,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for one (seed, trial, purpose) triple.
pub fn substream(seed: u64, trial: u64, tag: StreamTag) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ tag as u64);
    ChaCha8Rng::seed_from_u64(key)
}

/// Fills `out` with trial `trial` of the scenario. `out.len()` must equal `n`.
pub(crate) fn fill_row(scenario: &SignalScenario, seed: u64, trial: u64, out: &mut [f64]) {
    let eps = f64::from(scenario.epsilon);
    let mut noise = substream(seed, trial, StreamTag::Noise);
    match scenario.interference {
        InterferenceModel::None => {
            for y in out.iter_mut() {
                let x: f64 = noise.sample(StandardNormal);
                *y = eps + x;
            }
        }
        interference => {
            let mut dist = substream(seed, trial, StreamTag::Interference);
            for y in out.iter_mut() {
                let delta = interference.sample(&mut dist);
                let x: f64 = noise.sample(StandardNormal);
                *y = eps + delta + x;
            }
        }
    }
}

/// The interference samples of one trial alone, as drawn by [`generate`].
pub fn interference_row(scenario: &SignalScenario, seed: u64, trial: u64) -> Vec<f64> {
    let mut dist = substream(seed, trial, StreamTag::Interference);
    (0..scenario.n)
        .map(|_| scenario.interference.sample(&mut dist))
        .collect()
}

/// Draws `trials` independent observation vectors.
pub fn generate(scenario: &SignalScenario, trials: usize, seed: u64) -> Result<ObservationBatch> {
    scenario.validate()?;
    if trials == 0 {
        return param("trials must be at least 1");
    }
    let n = scenario.n;
    let mut data = vec![0.0; trials * n];
    data.par_chunks_mut(n)
        .enumerate()
        .for_each(|(t, row)| fill_row(scenario, seed, t as u64, row));
    Ok(ObservationBatch {
        trials,
        n,
        data,
        seed,
    })
}
