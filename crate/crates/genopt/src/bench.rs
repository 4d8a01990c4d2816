//! Experiment harness: flat `key = value` config files, fold-repeated runs
//! with deterministic per-fold seeds, regret tables, and the CSV contract
//! shared with the `opt-bench` binary.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baselines::{cmaes_run, multistart_lbfgs, nes_run, LbfgsConfig, NesConfig};
use crate::bo::{run_bo, BoConfig, InnerMaximizer};
use crate::generator::GeneratorConfig;
use crate::gennes::{run_gennes, GennesConfig};
use crate::objectives::{
    make_objective, sample_shift, Alpine1Variant, BudgetMeter, Objective, ObjectiveKind,
};
use crate::run::RunRecord;

pub const CSV_HEADER: &str = "algorithm,function,dim,fold,seed,evals,best_value,regret,wall_ms";
pub const BO_CSV_HEADER: &str = "inner_method,fold,step,objective_evals,acq_queries,incumbent";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: unknown key \"{key}\"")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: cannot parse \"{value}\" for key \"{key}\"")]
    BadValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("empty trace")]
    EmptyTrace,
    #[error("malformed csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Gennes,
    Lbfgs,
    Cmaes,
    Nes,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Gennes,
        Algorithm::Lbfgs,
        Algorithm::Cmaes,
        Algorithm::Nes,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Gennes => "gennes",
            Algorithm::Lbfgs => "lbfgs",
            Algorithm::Cmaes => "cmaes",
            Algorithm::Nes => "nes",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|a| a.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct GennesSettings {
    pub population: usize,
    pub learning_rate: f64,
    pub anneal_alpha: f64,
}

impl Default for GennesSettings {
    fn default() -> Self {
        GennesSettings {
            population: 20,
            learning_rate: 3e-4,
            anneal_alpha: 0.99,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CmaesSettings {
    pub population: usize,
    /// Initial step size as a fraction of the domain width.
    pub sigma_frac: f64,
}

impl Default for CmaesSettings {
    fn default() -> Self {
        CmaesSettings {
            population: 20,
            sigma_frac: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NesSettings {
    pub population: usize,
    pub lr_mean: f64,
    pub lr_logstd: f64,
    /// Initial standard deviation as a fraction of the domain width.
    pub std_frac: f64,
}

impl Default for NesSettings {
    fn default() -> Self {
        NesSettings {
            population: 20,
            lr_mean: 0.5,
            lr_logstd: 0.1,
            std_frac: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub objective: ObjectiveKind,
    pub dim: usize,
    pub algorithms: Vec<Algorithm>,
    pub folds: u64,
    /// Report budgets, strictly increasing; the run uses the last one.
    pub budgets: Vec<u64>,
    pub seed: u64,
    /// Shrinks the shift-sampling box away from the boundary.
    pub shift_margin: f64,
    pub alpine1_variant: Alpine1Variant,
    pub gennes: GennesSettings,
    pub cmaes: CmaesSettings,
    pub nes: NesSettings,
    pub lbfgs: LbfgsConfig,
    pub bo: BoConfig,
}

impl ExperimentConfig {
    pub fn new(objective: ObjectiveKind, dim: usize) -> Self {
        ExperimentConfig {
            objective,
            dim,
            algorithms: Algorithm::ALL.to_vec(),
            folds: 10,
            budgets: vec![100, 1_000, 10_000, 100_000],
            seed: 0,
            shift_margin: 0.0,
            alpine1_variant: Alpine1Variant::default(),
            gennes: GennesSettings::default(),
            cmaes: CmaesSettings::default(),
            nes: NesSettings::default(),
            lbfgs: LbfgsConfig::default(),
            bo: BoConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.dim == 0 {
            return Err(BenchError::Validation("dim must be >= 1".into()));
        }
        if self.folds == 0 {
            return Err(BenchError::Validation("folds must be >= 1".into()));
        }
        if self.budgets.is_empty() {
            return Err(BenchError::Validation("budgets must be non-empty".into()));
        }
        if self.budgets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BenchError::Validation(
                "budgets must be strictly increasing".into(),
            ));
        }
        if self.algorithms.is_empty() {
            return Err(BenchError::Validation("algorithms must be non-empty".into()));
        }
        let max = *self.budgets.last().unwrap();
        let need = (self.gennes.population.max(self.cmaes.population).max(self.nes.population))
            as u64;
        if max < need {
            return Err(BenchError::Validation(format!(
                "max budget {max} smaller than one population ({need})"
            )));
        }
        if self.shift_margin < 0.0 {
            return Err(BenchError::Validation("shift_margin must be >= 0".into()));
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, BenchError> {
    parse_config(&std::fs::read_to_string(path)?)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, BenchError> {
    let mut objective: Option<ObjectiveKind> = None;
    let mut dim: Option<usize> = None;
    let mut cfg = ExperimentConfig::new(ObjectiveKind::Sphere, 1);

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(BenchError::UnknownKey {
                line,
                key: trimmed.to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        let bad = || BenchError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
        };
        match key {
            "objective" => objective = Some(ObjectiveKind::parse(value).ok_or_else(bad)?),
            "dim" => dim = Some(value.parse().map_err(|_| bad())?),
            "folds" => cfg.folds = value.parse().map_err(|_| bad())?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
            "shift_margin" => cfg.shift_margin = value.parse().map_err(|_| bad())?,
            "alpine1_variant" => {
                cfg.alpine1_variant = Alpine1Variant::parse(value).ok_or_else(bad)?
            }
            "algorithms" => {
                cfg.algorithms = value
                    .split(',')
                    .map(|s| Algorithm::parse(s.trim()).ok_or_else(bad))
                    .collect::<Result<_, _>>()?;
            }
            "budgets" => {
                cfg.budgets = value
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?;
            }
            "gennes.population" => cfg.gennes.population = value.parse().map_err(|_| bad())?,
            "gennes.learning_rate" => {
                cfg.gennes.learning_rate = value.parse().map_err(|_| bad())?
            }
            "gennes.anneal_alpha" => cfg.gennes.anneal_alpha = value.parse().map_err(|_| bad())?,
            "cmaes.population" => cfg.cmaes.population = value.parse().map_err(|_| bad())?,
            "cmaes.sigma_frac" => cfg.cmaes.sigma_frac = value.parse().map_err(|_| bad())?,
            "nes.population" => cfg.nes.population = value.parse().map_err(|_| bad())?,
            "nes.lr_mean" => cfg.nes.lr_mean = value.parse().map_err(|_| bad())?,
            "nes.lr_logstd" => cfg.nes.lr_logstd = value.parse().map_err(|_| bad())?,
            "nes.std_frac" => cfg.nes.std_frac = value.parse().map_err(|_| bad())?,
            "lbfgs.memory" => cfg.lbfgs.memory = value.parse().map_err(|_| bad())?,
            "lbfgs.max_iters" => cfg.lbfgs.max_iters = value.parse().map_err(|_| bad())?,
            "bo.init_points" => cfg.bo.init_points = value.parse().map_err(|_| bad())?,
            "bo.outer_iterations" => {
                cfg.bo.outer_iterations = value.parse().map_err(|_| bad())?
            }
            "bo.inner_budget" => cfg.bo.inner_budget = value.parse().map_err(|_| bad())?,
            "bo.gennes_population" => {
                cfg.bo.gennes_population = value.parse().map_err(|_| bad())?
            }
            "bo.gennes_iterations" => {
                cfg.bo.gennes_iterations = value.parse().map_err(|_| bad())?
            }
            "bo.lbfgs_starts" => cfg.bo.lbfgs_starts = value.parse().map_err(|_| bad())?,
            "bo.refit_every" => cfg.bo.refit_every = value.parse().map_err(|_| bad())?,
            _ => {
                return Err(BenchError::UnknownKey {
                    line,
                    key: key.to_string(),
                })
            }
        }
    }

    cfg.objective = objective
        .ok_or_else(|| BenchError::Validation("missing required key \"objective\"".into()))?;
    cfg.dim = dim.ok_or_else(|| BenchError::Validation("missing required key \"dim\"".into()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// FNV-1a over (master seed, fold index, stream name); every run in an
/// experiment gets its own deterministic stream.
pub fn fold_seed(master: u64, fold: u64, stream: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    mix(&master.to_le_bytes());
    mix(&fold.to_le_bytes());
    mix(stream.as_bytes());
    h
}

/// Best value of the last trace entry at or before `budget` minus `f_star`.
/// If the trace starts after the budget, returns the first entry's value and
/// flags it.
pub fn regret_at(trace: &[(u64, f64)], budget: u64, f_star: f64) -> Result<(f64, bool), BenchError> {
    if trace.is_empty() {
        return Err(BenchError::EmptyTrace);
    }
    match trace.iter().rev().find(|(evals, _)| *evals <= budget) {
        Some((_, best)) => Ok((best - f_star, false)),
        None => Ok((trace[0].1 - f_star, true)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub algorithm: String,
    pub budget: u64,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub folds: usize,
}

/// Mean and std of regret over folds, keyed by (algorithm, budget).
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTable {
    pub rows: Vec<TableRow>,
}

impl RegretTable {
    pub fn get(&self, algorithm: &str, budget: u64) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.budget == budget)
    }

    fn from_samples(samples: &[(String, u64, f64)]) -> RegretTable {
        let mut keys: Vec<(String, u64)> = Vec::new();
        for (a, b, _) in samples {
            if !keys.iter().any(|(ka, kb)| ka == a && kb == b) {
                keys.push((a.clone(), *b));
            }
        }
        let rows = keys
            .into_iter()
            .map(|(a, b)| {
                let vals: Vec<f64> = samples
                    .iter()
                    .filter(|(sa, sb, _)| *sa == a && *sb == b)
                    .map(|(_, _, v)| *v)
                    .collect();
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                TableRow {
                    algorithm: a,
                    budget: b,
                    mean_regret: mean,
                    std_regret: var.sqrt(),
                    folds: vals.len(),
                }
            })
            .collect();
        RegretTable { rows }
    }
}

impl fmt::Display for RegretTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>12} {:>16} {:>16} {:>6}",
            "algorithm", "evals", "mean_regret", "std_regret", "folds"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<12} {:>12} {:>16.6} {:>16.6} {:>6}",
                r.algorithm, r.budget, r.mean_regret, r.std_regret, r.folds
            )?;
        }
        Ok(())
    }
}

fn fold_shift(cfg: &ExperimentConfig, fold: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fold_seed(cfg.seed, fold, "shift"));
    sample_shift(&mut rng, cfg.objective, cfg.dim, cfg.shift_margin)
}

fn fold_objective(cfg: &ExperimentConfig, fold: u64) -> Result<Objective, BenchError> {
    let shift = fold_shift(cfg, fold);
    make_objective(cfg.objective, cfg.dim, shift)
        .map(|o| o.with_alpine1_variant(cfg.alpine1_variant))
        .map_err(|e| BenchError::Validation(format!("fold {fold}: {e}")))
}

fn run_algorithm(alg: Algorithm, obj: &Objective, cfg: &ExperimentConfig, seed: u64) -> RunRecord {
    let budget = *cfg.budgets.last().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut meter = BudgetMeter::new(budget);
    match alg {
        Algorithm::Gennes => {
            let mut gen = GeneratorConfig::for_domain(&obj.domain);
            gen.anneal_alpha = cfg.gennes.anneal_alpha;
            let mut gc = GennesConfig::new(gen, seed);
            gc.population = cfg.gennes.population;
            gc.learning_rate = cfg.gennes.learning_rate;
            run_gennes(obj, &gc, &mut meter, &mut rng)
        }
        Algorithm::Lbfgs => multistart_lbfgs(obj, &mut meter, &cfg.lbfgs, &mut rng, seed),
        Algorithm::Cmaes => {
            let mean = obj.domain.sample_uniform(&mut rng);
            let sigma = cfg.cmaes.sigma_frac * obj.domain.width(0);
            cmaes_run(obj, cfg.cmaes.population, &mut meter, mean, sigma, &mut rng, seed)
        }
        Algorithm::Nes => {
            let mean = obj.domain.sample_uniform(&mut rng);
            let std = vec![cfg.nes.std_frac * obj.domain.width(0); obj.dim];
            let nc = NesConfig {
                population: cfg.nes.population,
                lr_mean: cfg.nes.lr_mean,
                lr_logstd: cfg.nes.lr_logstd,
            };
            nes_run(obj, &nc, &mut meter, mean, std, &mut rng, seed)
        }
    }
}

/// Runs every (algorithm, fold) pair to the maximum budget, streams per-fold
/// CSV rows in deterministic order, and returns the aggregated table.
pub fn run_experiment<W: Write>(
    cfg: &ExperimentConfig,
    out: &mut W,
) -> Result<RegretTable, BenchError> {
    cfg.validate()?;
    writeln!(out, "{CSV_HEADER}")?;
    let mut samples: Vec<(String, u64, f64)> = Vec::new();
    for &alg in &cfg.algorithms {
        for fold in 0..cfg.folds {
            let obj = fold_objective(cfg, fold)?;
            let seed = fold_seed(cfg.seed, fold, alg.name());
            let t0 = Instant::now();
            let rec = run_algorithm(alg, &obj, cfg, seed);
            let wall_ms = t0.elapsed().as_millis();
            for &budget in &cfg.budgets {
                let (regret, _) = regret_at(&rec.trace, budget, obj.f_star)?;
                let best_value = regret + obj.f_star;
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    alg.name(),
                    cfg.objective.name(),
                    cfg.dim,
                    fold,
                    seed,
                    budget,
                    best_value,
                    regret,
                    wall_ms
                )?;
                samples.push((alg.name().to_string(), budget, regret));
            }
            out.flush()?;
        }
    }
    Ok(RegretTable::from_samples(&samples))
}

/// Rebuilds the aggregated table from an emitted CSV file alone.
pub fn table_from_csv(text: &str) -> Result<RegretTable, BenchError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(BenchError::Csv(format!(
                "expected header \"{CSV_HEADER}\", got {other:?}"
            )))
        }
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(BenchError::Csv(format!("row {}: {} columns", i + 2, cols.len())));
        }
        let budget: u64 = cols[5]
            .parse()
            .map_err(|_| BenchError::Csv(format!("row {}: bad evals {:?}", i + 2, cols[5])))?;
        let regret: f64 = cols[7]
            .parse()
            .map_err(|_| BenchError::Csv(format!("row {}: bad regret {:?}", i + 2, cols[7])))?;
        samples.push((cols[0].to_string(), budget, regret));
    }
    if samples.is_empty() {
        return Err(BenchError::Csv("no data rows".into()));
    }
    Ok(RegretTable::from_samples(&samples))
}

/// Runs the Bayesian-optimization comparison (both inner maximizers over all
/// folds) and streams the BO CSV.
pub fn run_bo_experiment<W: Write>(cfg: &ExperimentConfig, out: &mut W) -> Result<(), BenchError> {
    cfg.validate()?;
    writeln!(out, "{BO_CSV_HEADER}")?;
    for inner in [InnerMaximizer::Gennes, InnerMaximizer::MultistartLbfgs] {
        for fold in 0..cfg.folds {
            let obj = fold_objective(cfg, fold)?;
            // One stream for both inner methods: identical initial designs,
            // so the comparison isolates the acquisition maximizer.
            let seed = fold_seed(cfg.seed, fold, "bo");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut bo_cfg = cfg.bo.clone();
            bo_cfg.inner_maximizer = inner;
            let rec = run_bo(&obj, &bo_cfg, &mut rng);
            for (step, row) in rec.steps.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    inner.name(),
                    fold,
                    step,
                    row.objective_evals,
                    row.acq_queries,
                    row.incumbent
                )?;
            }
            out.flush()?;
        }
    }
    Ok(())
}
