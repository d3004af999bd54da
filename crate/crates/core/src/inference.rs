//! Permutation inference for switchback experiments.
//!
//! Arm labels are reshuffled within each market, keeping the per-market arm
//! counts, and the statistic is recomputed on every relabeling. Small designs
//! are enumerated exhaustively; larger ones are sampled with one RNG stream per
//! replicate so results do not depend on thread scheduling.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::efficiency::{self, Arm, ArmSamples, IndexPair};
use crate::error::{Error, Result};

/// Designs with at most this many label arrangements are enumerated exactly.
pub const EXHAUSTIVE_LIMIT: u64 = 10_000;
pub const DEFAULT_PERMUTATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct MarketPeriods {
    pub market: String,
    /// `(period id, arm)` in time order.
    pub periods: Vec<(i64, Arm)>,
}

impl MarketPeriods {
    pub fn count(&self, arm: Arm) -> usize {
        self.periods.iter().filter(|(_, a)| *a == arm).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDesign {
    pub markets: Vec<MarketPeriods>,
    /// Period duration in minutes.
    pub period_length: f64,
    pub seed: u64,
}

impl ExperimentDesign {
    pub fn new(markets: Vec<MarketPeriods>, period_length: f64, seed: u64) -> Result<Self> {
        let d = ExperimentDesign { markets, period_length, seed };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period_length > 0.0 && self.period_length.is_finite()) {
            return Err(Error::invalid(format!("period length must be positive, got {}", self.period_length)));
        }
        let mut names = HashSet::new();
        for m in &self.markets {
            if !names.insert(m.market.as_str()) {
                return Err(Error::invalid(format!("market {} listed twice", m.market)));
            }
            let mut ids = HashSet::new();
            for (p, _) in &m.periods {
                if !ids.insert(*p) {
                    return Err(Error::invalid(format!("period {p} repeated in market {}", m.market)));
                }
            }
        }
        Ok(())
    }

    /// Alternating switchback design: market `k` starts with treatment when `k` is even.
    pub fn alternating(n_markets: usize, n_periods: usize, period_length: f64, seed: u64) -> Result<Self> {
        let markets = (0..n_markets)
            .map(|k| MarketPeriods {
                market: format!("m{k}"),
                periods: (0..n_periods)
                    .map(|p| {
                        let arm = if (p + k) % 2 == 0 { Arm::Treatment } else { Arm::Control };
                        (p as i64, arm)
                    })
                    .collect(),
            })
            .collect();
        Self::new(markets, period_length, seed)
    }

    /// Balanced design with arms shuffled independently in every market.
    pub fn randomized(n_markets: usize, n_periods: usize, period_length: f64, seed: u64) -> Result<Self> {
        let base = Self::alternating(n_markets, n_periods, period_length, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(permute_design(&base, &mut rng))
    }

    pub fn n_periods(&self) -> usize {
        self.markets.iter().map(|m| m.periods.len()).sum()
    }

    /// Number of distinct count-preserving relabelings, saturating at `u64::MAX`.
    pub fn arrangements(&self) -> u64 {
        self.markets.iter().fold(1u64, |acc, m| {
            let c = binomial(m.periods.len() as u64, m.count(Arm::Treatment) as u64);
            acc.saturating_mul(c)
        })
    }

    /// Arm of every period, markets in order.
    pub fn labels(&self) -> Vec<Arm> {
        self.markets
            .iter()
            .flat_map(|m| m.periods.iter().map(|(_, a)| *a))
            .collect()
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * u128::from(n - i) / u128::from(i + 1);
        if c > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    c as u64
}

/// Shuffles arm labels within every market.
pub fn permute_design<R: Rng + ?Sized>(design: &ExperimentDesign, rng: &mut R) -> ExperimentDesign {
    let mut out = design.clone();
    for m in &mut out.markets {
        let mut arms: Vec<Arm> = m.periods.iter().map(|(_, a)| *a).collect();
        arms.shuffle(rng);
        for ((_, a), b) in m.periods.iter_mut().zip(arms) {
            *a = b;
        }
    }
    out
}

/// Measurements of one (market, period).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodIndex {
    pub market: String,
    pub period: i64,
    pub a_d: f64,
    pub a_s: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndexTable {
    pub rows: Vec<PeriodIndex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    Rho,
    DemandIndex,
    SupplyIndex,
    /// Per-period L¹ difference.
    Tau1,
    /// L¹ difference of the arm means.
    Tau1Means,
    Tau2,
    TauTotal,
    TauVol,
    TauDist,
}

impl Statistic {
    /// Reporting order of the standard battery.
    pub const BATTERY: [Statistic; 7] = [
        Statistic::Rho,
        Statistic::DemandIndex,
        Statistic::SupplyIndex,
        Statistic::Tau1,
        Statistic::TauTotal,
        Statistic::TauVol,
        Statistic::TauDist,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Rho => "rho",
            Statistic::DemandIndex => "A_d",
            Statistic::SupplyIndex => "A_s",
            Statistic::Tau1 => "tau1",
            Statistic::Tau1Means => "tau1_means",
            Statistic::Tau2 => "tau2",
            Statistic::TauTotal => "tau_total",
            Statistic::TauVol => "tau_vol",
            Statistic::TauDist => "tau_dist",
        }
    }

    /// `τ_total` is a norm, so only large values are extreme.
    pub fn natural_sidedness(&self) -> Sidedness {
        match self {
            Statistic::TauTotal => Sidedness::OneSided,
            _ => Sidedness::TwoSided,
        }
    }

    fn compute(&self, data: &Aligned, labels: &[Arm]) -> Result<f64> {
        let arm_mean = |values: &[f64], arm: Arm| {
            let (sum, n) = values
                .iter()
                .zip(labels)
                .filter(|(_, a)| **a == arm)
                .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
            sum / n as f64
        };
        let diff = |values: &[f64]| arm_mean(values, Arm::Treatment) - arm_mean(values, Arm::Control);
        match self {
            Statistic::Rho => Ok(diff(&data.rho)),
            Statistic::DemandIndex => Ok(diff(&data.a_d)),
            Statistic::SupplyIndex => Ok(diff(&data.a_s)),
            _ => {
                let samples = |arm: Arm| {
                    let obs = (0..labels.len())
                        .filter(|&k| labels[k] == arm)
                        .map(|k| IndexPair::new(data.a_d[k], data.a_s[k]))
                        .collect();
                    ArmSamples::new(arm, obs)
                };
                let (t, c) = (samples(Arm::Treatment)?, samples(Arm::Control)?);
                match self {
                    Statistic::Tau1 => efficiency::tau1_hat(&t, &c),
                    Statistic::Tau1Means => efficiency::tau1_of_means(&t, &c),
                    Statistic::Tau2 => efficiency::tau2_hat(&t, &c),
                    Statistic::TauTotal => Ok(efficiency::shift_decomposition(&t, &c)?.tau_total),
                    Statistic::TauVol => Ok(efficiency::shift_decomposition(&t, &c)?.tau_vol),
                    Statistic::TauDist => Ok(efficiency::shift_decomposition(&t, &c)?.tau_dist),
                    _ => unreachable!(),
                }
            }
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sidedness {
    OneSided,
    TwoSided,
}

impl Sidedness {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sidedness::OneSided => "one-sided",
            Sidedness::TwoSided => "two-sided",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "one-sided" => Some(Sidedness::OneSided),
            "two-sided" => Some(Sidedness::TwoSided),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermutationMode {
    /// Exhaustive when the design has at most [`EXHAUSTIVE_LIMIT`] arrangements.
    Auto,
    Sampled,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub statistic: Statistic,
    pub estimate: f64,
    pub standard_error: f64,
    pub p_value: f64,
    pub sidedness: Sidedness,
    pub n_permutations: usize,
    pub exhaustive: bool,
    pub null_distribution: Vec<f64>,
}

/// Table values laid out in design order.
struct Aligned {
    a_d: Vec<f64>,
    a_s: Vec<f64>,
    rho: Vec<f64>,
}

fn align(design: &ExperimentDesign, table: &IndexTable) -> Result<Aligned> {
    let mut lookup: HashMap<(&str, i64), &PeriodIndex> = HashMap::new();
    for row in &table.rows {
        if lookup.insert((row.market.as_str(), row.period), row).is_some() {
            return Err(Error::invalid(format!(
                "index table repeats market {} period {}",
                row.market, row.period
            )));
        }
    }
    let mut out = Aligned { a_d: Vec::new(), a_s: Vec::new(), rho: Vec::new() };
    for m in &design.markets {
        for (p, _) in &m.periods {
            let row = lookup.get(&(m.market.as_str(), *p)).ok_or_else(|| {
                Error::invalid(format!("no indices for market {} period {p}", m.market))
            })?;
            if !(row.a_d.is_finite() && row.a_s.is_finite() && row.rho.is_finite()) {
                return Err(Error::UndefinedIndex(format!(
                    "market {} period {p} has undefined indices",
                    m.market
                )));
            }
            out.a_d.push(row.a_d);
            out.a_s.push(row.a_s);
            out.rho.push(row.rho);
        }
    }
    Ok(out)
}

fn check_arms(design: &ExperimentDesign) -> Result<()> {
    for arm in [Arm::Treatment, Arm::Control] {
        if design.markets.iter().all(|m| m.count(arm) == 0) {
            return Err(Error::invalid(format!("degenerate design: no {arm} periods in any market")));
        }
    }
    Ok(())
}

/// All count-preserving labelings of one market, in lexicographic order of treated positions.
fn market_arrangements(m: &MarketPeriods) -> Vec<Vec<Arm>> {
    let n = m.periods.len();
    let k = m.count(Arm::Treatment);
    let mut out = Vec::new();
    let mut chosen: Vec<usize> = (0..k).collect();
    loop {
        let mut labels = vec![Arm::Control; n];
        for &c in &chosen {
            labels[c] = Arm::Treatment;
        }
        out.push(labels);
        // next combination
        let Some(pos) = (0..k).rev().find(|&i| chosen[i] != i + n - k) else { break };
        chosen[pos] += 1;
        for i in pos + 1..k {
            chosen[i] = chosen[i - 1] + 1;
        }
    }
    out
}

fn all_arrangements(design: &ExperimentDesign) -> Vec<Vec<Arm>> {
    let per_market: Vec<Vec<Vec<Arm>>> = design.markets.iter().map(market_arrangements).collect();
    let total: usize = per_market.iter().map(Vec::len).product();
    (0..total)
        .map(|mut code| {
            let mut labels = Vec::with_capacity(design.n_periods());
            for options in &per_market {
                labels.extend_from_slice(&options[code % options.len()]);
                code /= options.len();
            }
            labels
        })
        .collect()
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

fn shuffled_labels(design: &ExperimentDesign, rng: &mut ChaCha8Rng) -> Vec<Arm> {
    permute_design(design, rng).labels()
}

/// Runs one permutation test. `n_permutations` is ignored in exhaustive mode.
pub fn permutation_test(
    design: &ExperimentDesign,
    table: &IndexTable,
    statistic: Statistic,
    n_permutations: usize,
    sidedness: Sidedness,
    mode: PermutationMode,
    seed: u64,
) -> Result<InferenceResult> {
    design.validate()?;
    check_arms(design)?;
    let data = align(design, table)?;
    let observed_labels = design.labels();
    let estimate = statistic.compute(&data, &observed_labels)?;

    let exhaustive = match mode {
        PermutationMode::Exhaustive => {
            if design.arrangements() > EXHAUSTIVE_LIMIT {
                return Err(Error::invalid(format!(
                    "design has {} arrangements; exhaustive mode allows at most {EXHAUSTIVE_LIMIT}",
                    design.arrangements()
                )));
            }
            true
        }
        PermutationMode::Auto => design.arrangements() <= EXHAUSTIVE_LIMIT,
        PermutationMode::Sampled => false,
    };
    if !exhaustive && n_permutations == 0 {
        return Err(Error::invalid("n_permutations must be at least 1"));
    }

    let null: Vec<f64> = if exhaustive {
        all_arrangements(design)
            .par_iter()
            .map(|labels| statistic.compute(&data, labels))
            .collect::<Result<_>>()?
    } else {
        (0..n_permutations)
            .into_par_iter()
            .map(|r| {
                let labels = shuffled_labels(design, &mut replicate_rng(seed, r));
                statistic.compute(&data, &labels)
            })
            .collect::<Result<_>>()?
    };

    let extreme = |x: f64| match sidedness {
        Sidedness::OneSided => x,
        Sidedness::TwoSided => x.abs(),
    };
    let obs = extreme(estimate);
    let tol = 1e-12 * obs.abs().max(1.0);
    let hits = null.iter().filter(|&&x| extreme(x) >= obs - tol).count();
    let p_value = if exhaustive {
        hits as f64 / null.len() as f64
    } else {
        (1 + hits) as f64 / (1 + null.len()) as f64
    };

    let n = null.len() as f64;
    let mean = null.iter().sum::<f64>() / n;
    let var = null.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;

    Ok(InferenceResult {
        statistic,
        estimate,
        standard_error: var.sqrt(),
        p_value,
        sidedness,
        n_permutations: null.len(),
        exhaustive,
        null_distribution: null,
    })
}

/// ρ, A_d, A_s, τ₁, τ_total, τ_vol and τ_dist, in that order.
pub fn run_standard_battery(
    design: &ExperimentDesign,
    table: &IndexTable,
    n_permutations: usize,
    seed: u64,
) -> Result<Vec<InferenceResult>> {
    Statistic::BATTERY
        .iter()
        .map(|&s| {
            permutation_test(
                design,
                table,
                s,
                n_permutations,
                s.natural_sidedness(),
                PermutationMode::Auto,
                seed,
            )
        })
        .collect()
}

/// Treatment-minus-control movement of one market's mean indices.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketShift {
    pub market: String,
    pub control_mean: IndexPair,
    pub treatment_mean: IndexPair,
    pub delta_a_d: f64,
    pub delta_a_s: f64,
}


/// Pooled index pairs of one arm across every market, in design order.
pub fn arm_samples(design: &ExperimentDesign, table: &IndexTable, arm: Arm) -> Result<ArmSamples> {
    design.validate()?;
    let data = align(design, table)?;
    let obs = design
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, a)| **a == arm)
        .map(|(k, _)| IndexPair::new(data.a_d[k], data.a_s[k]))
        .collect();
    ArmSamples::new(arm, obs)
}

pub fn shift_by_market(design: &ExperimentDesign, table: &IndexTable) -> Result<Vec<MarketShift>> {
    design.validate()?;
    let data = align(design, table)?;
    let mut offset = 0;
    let mut out = Vec::new();
    for m in &design.markets {
        let pick = |arm: Arm| -> Result<ArmSamples> {
            let obs = m
                .periods
                .iter()
                .enumerate()
                .filter(|(_, (_, a))| *a == arm)
                .map(|(k, _)| IndexPair::new(data.a_d[offset + k], data.a_s[offset + k]))
                .collect();
            ArmSamples::new(arm, obs)
        };
        if let (Ok(t), Ok(c)) = (pick(Arm::Treatment), pick(Arm::Control)) {
            let (tm, cm) = (t.mean(), c.mean());
            out.push(MarketShift {
                market: m.market.clone(),
                control_mean: cm,
                treatment_mean: tm,
                delta_a_d: tm.a_d - cm.a_d,
                delta_a_s: tm.a_s - cm.a_s,
            });
        }
        offset += m.periods.len();
    }
    Ok(out)
}
