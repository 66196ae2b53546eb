//! Black-box threshold search with a PPO2-style update of a truncated-normal
//! sampling distribution.
//!
//! Each step draws `M` parameter vectors, scores them with the objective
//! (concurrently), standardises the scores into advantages and moves the
//! distribution mean along the gradient of the clipped surrogate. The
//! standard deviation stays fixed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub rounds: usize,
    pub steps_per_round: usize,
    pub samples_per_step: usize,
    pub init_mean: Vec<f64>,
    pub std: f64,
    pub bounds: Vec<(f64, f64)>,
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    /// Gradient steps on the surrogate per batch of samples.
    pub epochs: usize,
    pub seed: u64,
}

impl SearchConfig {
    /// Defaults for a `dims`-dimensional search over the unit cube.
    pub fn new(dims: usize) -> Self {
        SearchConfig {
            rounds: 5,
            steps_per_round: 4,
            samples_per_step: 8,
            init_mean: vec![0.5; dims],
            std: 0.2,
            bounds: vec![(0.0, 1.0); dims],
            clip_epsilon: 0.2,
            learning_rate: 0.1,
            epochs: 1,
            seed: 0,
        }
    }

    pub fn dims(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.steps_per_round == 0 || self.samples_per_step == 0 || self.epochs == 0 {
            return Err(Error::invalid("rounds, steps_per_round, samples_per_step and epochs must be >= 1"));
        }
        if !(self.std > 0.0 && self.std.is_finite()) {
            return Err(Error::invalid("search std must be positive"));
        }
        if self.bounds.is_empty() {
            return Err(Error::invalid("search needs at least one dimension"));
        }
        if self.init_mean.len() != self.bounds.len() {
            return Err(Error::invalid(format!(
                "init_mean has {} entries for {} bounds",
                self.init_mean.len(),
                self.bounds.len()
            )));
        }
        for (&m, &(lo, hi)) in self.init_mean.iter().zip(&self.bounds) {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::invalid(format!("bounds [{lo}, {hi}] are not well ordered")));
            }
            if !(lo..=hi).contains(&m) {
                return Err(Error::invalid(format!("init_mean {m} outside [{lo}, {hi}]")));
            }
        }
        if !(self.clip_epsilon > 0.0 && self.learning_rate > 0.0) {
            return Err(Error::invalid("clip_epsilon and learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Independent truncated normals, one per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDistribution {
    pub mean: Vec<f64>,
    pub std: f64,
    pub bounds: Vec<(f64, f64)>,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

impl SearchDistribution {
    pub fn from_config(cfg: &SearchConfig) -> Self {
        SearchDistribution {
            mean: cfg.init_mean.clone(),
            std: cfg.std,
            bounds: cfg.bounds.clone(),
        }
    }

    /// Standardised bounds and normalising mass of dimension `k` at mean `mu`.
    fn window(&self, k: usize, mu: f64) -> (f64, f64, f64) {
        let n = std_normal();
        let (lo, hi) = self.bounds[k];
        let alpha = (lo - mu) / self.std;
        let beta = (hi - mu) / self.std;
        (alpha, beta, (n.cdf(beta) - n.cdf(alpha)).max(f64::MIN_POSITIVE))
    }

    /// Log-density of `x` under the distribution with its mean replaced by `mu`.
    pub fn log_pdf_at(&self, mu: &[f64], x: &[f64]) -> f64 {
        let n = std_normal();
        (0..x.len())
            .map(|k| {
                let (_, _, z) = self.window(k, mu[k]);
                n.ln_pdf((x[k] - mu[k]) / self.std) - self.std.ln() - z.ln()
            })
            .sum()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf_at(&self.mean, x)
    }

    /// Gradient of `log_pdf_at(mu, x)` with respect to `mu`.
    fn grad_log_pdf(&self, mu: &[f64], x: &[f64]) -> Vec<f64> {
        let n = std_normal();
        let s2 = self.std * self.std;
        (0..x.len())
            .map(|k| {
                let (alpha, beta, z) = self.window(k, mu[k]);
                (x[k] - mu[k]) / s2 - (n.pdf(alpha) - n.pdf(beta)) / (self.std * z)
            })
            .collect()
    }

    fn sample_one<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let n = std_normal();
        (0..self.mean.len())
            .map(|k| {
                let (alpha, beta, _) = self.window(k, self.mean[k]);
                let (pa, pb) = (n.cdf(alpha), n.cdf(beta));
                let u: f64 = rng.random();
                let x = self.mean[k] + self.std * n.inverse_cdf(pa + u * (pb - pa));
                let (lo, hi) = self.bounds[k];
                x.clamp(lo, hi)
            })
            .collect()
    }
}

/// Draw `m` vectors by inverse-CDF sampling inside the bounds.
pub fn sample_truncated_normal<R: Rng>(d: &SearchDistribution, m: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..m).map(|_| d.sample_one(rng)).collect()
}

fn advantages(rewards: &[f64]) -> Option<Vec<f64>> {
    let first = rewards[0];
    if rewards.iter().all(|&r| r == first) {
        return None;
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    Some(rewards.iter().map(|r| (r - mean) / (sd + 1e-8)).collect())
}

/// One PPO2 update of the mean from scored samples.
pub fn ppo2_update(
    d: &SearchDistribution,
    samples: &[Vec<f64>],
    rewards: &[f64],
    cfg: &SearchConfig,
) -> Result<SearchDistribution> {
    if samples.len() != rewards.len() || samples.len() < 2 {
        return Err(Error::invalid("ppo2_update needs at least two samples with one reward each"));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::Numerical("non-finite reward".into()));
    }
    let Some(adv) = advantages(rewards) else {
        return Ok(d.clone());
    };
    let old_logp: Vec<f64> = samples.iter().map(|x| d.log_pdf(x)).collect();
    let (lo_clip, hi_clip) = (1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
    let mut mu = d.mean.clone();
    for _ in 0..cfg.epochs {
        let mut grad = vec![0.0; mu.len()];
        for ((x, &a), &lp) in samples.iter().zip(&adv).zip(&old_logp) {
            let ratio = (d.log_pdf_at(&mu, x) - lp).exp();
            // the clipped branch is flat in mu and is the minimum exactly when
            // the ratio has already moved past the trust region in A's direction
            let clipped = (a > 0.0 && ratio > hi_clip) || (a < 0.0 && ratio < lo_clip);
            if clipped {
                continue;
            }
            for (g, gl) in grad.iter_mut().zip(d.grad_log_pdf(&mu, x)) {
                *g += a * ratio * gl;
            }
        }
        let n = samples.len() as f64;
        for (k, m) in mu.iter_mut().enumerate() {
            let (lo, hi) = d.bounds[k];
            *m = (*m + cfg.learning_rate * grad[k] / n).clamp(lo, hi);
        }
    }
    Ok(SearchDistribution {
        mean: mu,
        std: d.std,
        bounds: d.bounds.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub round: usize,
    pub step: usize,
    pub params: Vec<f64>,
    pub score: f64,
    /// Best score seen up to and including this evaluation.
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_params: Vec<f64>,
    pub best_score: f64,
    pub history: Vec<Evaluation>,
    /// Distribution mean before the first step and after every update.
    pub means: Vec<Vec<f64>>,
}

/// Maximise `objective` over the configured box.
///
/// Evaluations within a step run in parallel; results are consumed in
/// sample order, so the outcome depends only on the seed and the objective.
pub fn search<F>(objective: F, cfg: &SearchConfig) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> std::result::Result<f64, String> + Sync,
{
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dist = SearchDistribution::from_config(cfg);
    let mut history = Vec::new();
    let mut means = vec![dist.mean.clone()];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for round in 0..cfg.rounds {
        for step in 0..cfg.steps_per_round {
            let samples = sample_truncated_normal(&dist, cfg.samples_per_step, &mut rng);
            let scores: Vec<std::result::Result<f64, String>> =
                samples.par_iter().map(|x| objective(x)).collect();
            let mut rewards = Vec::with_capacity(samples.len());
            for (x, s) in samples.iter().zip(scores) {
                let score = match s {
                    Ok(v) if v.is_finite() => v,
                    Ok(v) => return Err(Error::Numerical(format!("objective returned {v} at params {x:?}"))),
                    Err(message) => {
                        return Err(Error::Objective {
                            params: x.clone(),
                            message,
                        })
                    }
                };
                if best.as_ref().is_none_or(|(_, b)| score > *b) {
                    best = Some((x.clone(), score));
                }
                history.push(Evaluation {
                    round,
                    step,
                    params: x.clone(),
                    score,
                    best_score: best.as_ref().map_or(score, |b| b.1),
                });
                rewards.push(score);
            }
            if rewards.len() >= 2 {
                dist = ppo2_update(&dist, &samples, &rewards, cfg)?;
            }
            log::debug!("search round {round} step {step}: mean {:?}", dist.mean);
            means.push(dist.mean.clone());
        }
    }
    let (best_params, best_score) = best.expect("at least one evaluation");
    Ok(SearchResult {
        best_params,
        best_score,
        history,
        means,
    })
}
