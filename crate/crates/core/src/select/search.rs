//! Randomized hyperparameter search with document-level cross-validation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::select::{document_folds, rmse, train, Algorithm, Hyperparameters, LabeledInstance};

#[derive(Debug, Clone, Copy)]
pub enum IntDist {
    Fixed(usize),
    /// Inclusive uniform range.
    Uniform(usize, usize),
}

impl IntDist {
    fn validate(&self, name: &str) -> Result<()> {
        if let IntDist::Uniform(lo, hi) = self {
            if lo > hi {
                return Err(Error::invalid(format!("{name}: empty range {lo}..={hi}")));
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> usize {
        match self {
            IntDist::Fixed(v) => *v,
            IntDist::Uniform(lo, hi) => rng.gen_range(*lo..=*hi),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FloatDist {
    Fixed(f64),
    Uniform(f64, f64),
    /// Uniform in log space; bounds must be positive.
    LogUniform(f64, f64),
}

impl FloatDist {
    fn validate(&self, name: &str) -> Result<()> {
        match self {
            FloatDist::Fixed(_) => Ok(()),
            FloatDist::Uniform(lo, hi) => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::invalid(format!("{name}: bad range [{lo}, {hi}]")));
                }
                Ok(())
            }
            FloatDist::LogUniform(lo, hi) => {
                if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo <= hi) {
                    return Err(Error::invalid(format!(
                        "{name}: log-uniform needs 0 < lo ≤ hi, got [{lo}, {hi}]"
                    )));
                }
                Ok(())
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            FloatDist::Fixed(v) => *v,
            FloatDist::Uniform(lo, hi) => {
                if lo == hi {
                    *lo
                } else {
                    rng.gen_range(*lo..*hi)
                }
            }
            FloatDist::LogUniform(lo, hi) => {
                if lo == hi {
                    *lo
                } else {
                    let (a, b) = (lo.ln(), hi.ln());
                    rng.gen_range(a..b).exp()
                }
            }
        }
    }
}

/// Per-hyperparameter sampling distributions.
#[derive(Debug, Clone, Copy)]
pub struct ParamDistributions {
    pub num_trees: IntDist,
    pub max_leaves: IntDist,
    pub max_depth: IntDist,
    pub learning_rate: FloatDist,
    pub min_samples_leaf: IntDist,
    pub feature_subsample: FloatDist,
    pub row_subsample: FloatDist,
    pub dart_drop_rate: FloatDist,
}

impl Default for ParamDistributions {
    fn default() -> Self {
        ParamDistributions {
            num_trees: IntDist::Uniform(50, 300),
            max_leaves: IntDist::Uniform(8, 64),
            max_depth: IntDist::Uniform(3, 10),
            learning_rate: FloatDist::LogUniform(0.02, 0.3),
            min_samples_leaf: IntDist::Uniform(1, 20),
            feature_subsample: FloatDist::Uniform(0.5, 1.0),
            row_subsample: FloatDist::Uniform(0.5, 1.0),
            dart_drop_rate: FloatDist::Uniform(0.05, 0.3),
        }
    }
}

impl ParamDistributions {
    pub fn validate(&self) -> Result<()> {
        self.num_trees.validate("num_trees")?;
        self.max_leaves.validate("max_leaves")?;
        self.max_depth.validate("max_depth")?;
        self.learning_rate.validate("learning_rate")?;
        self.min_samples_leaf.validate("min_samples_leaf")?;
        self.feature_subsample.validate("feature_subsample")?;
        self.row_subsample.validate("row_subsample")?;
        self.dart_drop_rate.validate("dart_drop_rate")?;
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha12Rng) -> Hyperparameters {
        Hyperparameters {
            num_trees: self.num_trees.sample(rng),
            max_leaves: self.max_leaves.sample(rng).max(2),
            max_depth: self.max_depth.sample(rng),
            learning_rate: self.learning_rate.sample(rng),
            min_samples_leaf: self.min_samples_leaf.sample(rng).max(1),
            feature_subsample: self.feature_subsample.sample(rng),
            row_subsample: self.row_subsample.sample(rng),
            dart_drop_rate: self.dart_drop_rate.sample(rng),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Hyperparameters,
    /// Mean cross-validated RMSE of the winning draw.
    pub best_cv_rmse: f64,
    /// RMSE on the held-out validation set (when one was supplied), for
    /// reporting only — it never influences the choice.
    pub validation_rmse: Option<f64>,
    pub evaluated: usize,
}

/// Samples `n_iter` hyperparameter draws, scores each by mean k-fold
/// cross-validated RMSE (folds partition documents, never instances) and
/// returns the argmin. Deterministic given the seed; earlier draws win
/// exact ties.
pub fn random_search(
    train_set: &[LabeledInstance],
    validation_set: Option<&[LabeledInstance]>,
    algorithm: Algorithm,
    distributions: &ParamDistributions,
    n_iter: usize,
    k_folds: usize,
    seed: u64,
) -> Result<SearchOutcome> {
    if n_iter == 0 {
        return Err(Error::invalid("n_iter must be at least 1"));
    }
    if k_folds < 2 {
        return Err(Error::invalid("k_folds must be at least 2"));
    }
    if train_set.is_empty() {
        return Err(Error::invalid("cannot search on an empty training set"));
    }
    distributions.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let folds = document_folds(train_set, k_folds, &mut rng);
    let mut best: Option<(Hyperparameters, f64)> = None;
    for _ in 0..n_iter {
        let params = distributions.sample(&mut rng);
        let fit_seed = rng.gen::<u64>();
        let mut fold_rmse = Vec::with_capacity(k_folds);
        for fold in 0..k_folds {
            let train_part: Vec<LabeledInstance> = train_set
                .iter()
                .zip(&folds)
                .filter(|(_, f)| **f != fold)
                .map(|(i, _)| i.clone())
                .collect();
            let held: Vec<LabeledInstance> = train_set
                .iter()
                .zip(&folds)
                .filter(|(_, f)| **f == fold)
                .map(|(i, _)| i.clone())
                .collect();
            if train_part.is_empty() || held.is_empty() {
                continue;
            }
            let model = train(&train_part, algorithm, &params, fit_seed)?;
            fold_rmse.push(rmse(&model, &held));
        }
        if fold_rmse.is_empty() {
            continue;
        }
        let score = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
        let improves = best.as_ref().map(|(_, b)| score < *b).unwrap_or(true);
        if improves {
            best = Some((params, score));
        }
    }
    let (best_params, best_cv_rmse) =
        best.ok_or_else(|| Error::invalid("no draw could be evaluated (too few documents for the fold count)"))?;
    let validation_rmse = match validation_set {
        Some(v) if !v.is_empty() => {
            let model = train(train_set, algorithm, &best_params, seed)?;
            Some(rmse(&model, v))
        }
        _ => None,
    };
    Ok(SearchOutcome {
        best: best_params,
        best_cv_rmse,
        validation_rmse,
        evaluated: n_iter,
    })
}
