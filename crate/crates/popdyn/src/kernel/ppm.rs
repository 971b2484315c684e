//! Homogeneous marked Poisson point measures on `[0, horizon] x marks`.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{invalid, Result};

/// Finite mark intensity: total mass plus a sampler for the normalized law.
pub struct MarkIntensity<M, S>
where
    S: Fn(&mut dyn rand::RngCore) -> M,
{
    pub total: f64,
    pub sampler: S,
}

impl<M, S> MarkIntensity<M, S>
where
    S: Fn(&mut dyn rand::RngCore) -> M,
{
    pub fn new(total: f64, sampler: S) -> Result<Self> {
        if !total.is_finite() || total < 0.0 {
            return Err(invalid("intensity", format!("total mass {total} is not finite and non-negative")));
        }
        Ok(Self { total, sampler })
    }
}

/// One realization of the point measure.
#[derive(Debug, Clone, PartialEq)]
pub struct PpmSample<M> {
    pub times: Vec<f64>,
    pub marks: Vec<M>,
    pub horizon: f64,
    pub total_intensity: f64,
}

impl<M> PpmSample<M> {
    #[must_use]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of points with time in `(a, b]` and mark in `pred`.
    pub fn count(&self, a: f64, b: f64, pred: impl Fn(&M) -> bool) -> usize {
        self.times
            .iter()
            .zip(&self.marks)
            .filter(|(t, m)| **t > a && **t <= b && pred(m))
            .count()
    }
}

/// Sample all points on `[0, horizon] x marks` by successive exponential gaps.
pub fn sample_ppm<M, S, R>(intensity: &MarkIntensity<M, S>, horizon: f64, rng: &mut R) -> Result<PpmSample<M>>
where
    S: Fn(&mut dyn rand::RngCore) -> M,
    R: Rng,
{
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(invalid("horizon", "must be finite and non-negative"));
    }
    let mut times = Vec::new();
    let mut marks = Vec::new();
    if intensity.total > 0.0 {
        let gap = Exp::new(intensity.total).map_err(|e| invalid("intensity", e.to_string()))?;
        let mut t = gap.sample(rng);
        while t <= horizon {
            times.push(t);
            marks.push((intensity.sampler)(rng));
            t += gap.sample(rng);
        }
    }
    Ok(PpmSample {
        times,
        marks,
        horizon,
        total_intensity: intensity.total,
    })
}

/// Keep each point independently with probability `p`.
pub fn thin<M: Clone, R: Rng>(sample: &PpmSample<M>, p: f64, rng: &mut R) -> PpmSample<M> {
    let mut out = PpmSample {
        times: Vec::new(),
        marks: Vec::new(),
        horizon: sample.horizon,
        total_intensity: sample.total_intensity * p,
    };
    for (t, m) in sample.times.iter().zip(&sample.marks) {
        if rng.random::<f64>() < p {
            out.times.push(*t);
            out.marks.push(m.clone());
        }
    }
    out
}
