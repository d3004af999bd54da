//! Efficiency estimands for two-arm experiments on the `(A_d, A_s)` plane.
//!
//! The origin is the perfectly efficient state. `τ₁`/`τ₂` difference the L¹/L²
//! distance to the origin between arms; `τ_total`, `τ_vol` and `τ_dist` split the
//! shift between arm means into a component along the unit-gradient (volume)
//! direction `(1, 1)/√2` and the orthogonal distributional component.

use std::f64::consts::SQRT_2;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Treatment,
    Control,
}

impl Arm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arm::Treatment => "treatment",
            Arm::Control => "control",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "treatment" | "t" => Some(Arm::Treatment),
            "control" | "c" => Some(Arm::Control),
            _ => None,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A point `(A_d, A_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IndexPair {
    pub a_d: f64,
    pub a_s: f64,
}

impl IndexPair {
    pub fn new(a_d: f64, a_s: f64) -> Self {
        IndexPair { a_d, a_s }
    }

    pub fn l1(&self) -> f64 {
        self.a_d.abs() + self.a_s.abs()
    }

    pub fn l2(&self) -> f64 {
        self.a_d.hypot(self.a_s)
    }
}

/// Per-period index observations of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSamples {
    pub arm: Arm,
    pub observations: Vec<IndexPair>,
}

impl ArmSamples {
    pub fn new(arm: Arm, observations: Vec<IndexPair>) -> Result<Self> {
        let s = ArmSamples { arm, observations };
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<()> {
        if self.observations.is_empty() {
            return Err(Error::invalid(format!("{} arm has no observations", self.arm)));
        }
        if self.observations.iter().any(|p| !p.a_d.is_finite() || !p.a_s.is_finite()) {
            return Err(Error::invalid(format!("{} arm has non-finite indices", self.arm)));
        }
        Ok(())
    }

    pub fn mean(&self) -> IndexPair {
        let n = self.observations.len() as f64;
        let (d, s) = self
            .observations
            .iter()
            .fold((0.0, 0.0), |(d, s), p| (d + p.a_d, s + p.a_s));
        IndexPair::new(d / n, s / n)
    }
}

fn mean_of(samples: &ArmSamples, f: impl Fn(&IndexPair) -> f64) -> f64 {
    samples.observations.iter().map(f).sum::<f64>() / samples.observations.len() as f64
}

/// Per-period L¹ estimator: mean `|A_d| + |A_s|` under treatment minus control.
pub fn tau1_hat(treatment: &ArmSamples, control: &ArmSamples) -> Result<f64> {
    treatment.check()?;
    control.check()?;
    Ok(mean_of(treatment, IndexPair::l1) - mean_of(control, IndexPair::l1))
}

/// L¹ distance-to-origin difference of the arm means.
pub fn tau1_of_means(treatment: &ArmSamples, control: &ArmSamples) -> Result<f64> {
    treatment.check()?;
    control.check()?;
    Ok(treatment.mean().l1() - control.mean().l1())
}

/// Per-period L² estimator.
pub fn tau2_hat(treatment: &ArmSamples, control: &ArmSamples) -> Result<f64> {
    treatment.check()?;
    control.check()?;
    Ok(mean_of(treatment, IndexPair::l2) - mean_of(control, IndexPair::l2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftDecomposition {
    pub tau_total: f64,
    pub tau_vol: f64,
    pub tau_dist: f64,
}

/// Decomposition of the shift between two points.
pub fn decompose_shift(treatment: IndexPair, control: IndexPair) -> ShiftDecomposition {
    let dd = treatment.a_d - control.a_d;
    let ds = treatment.a_s - control.a_s;
    ShiftDecomposition {
        tau_total: dd.hypot(ds),
        tau_vol: (ds + dd) / SQRT_2,
        tau_dist: (ds - dd) / SQRT_2,
    }
}

pub fn shift_decomposition(treatment: &ArmSamples, control: &ArmSamples) -> Result<ShiftDecomposition> {
    treatment.check()?;
    control.check()?;
    Ok(decompose_shift(treatment.mean(), control.mean()))
}

/// Open quadrant of the `(A_d, A_s)` plane. Points on an axis have none.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrant {
    /// `A_d > 0, A_s > 0`: global over-supply.
    First,
    /// `A_d < 0, A_s > 0`: SD misalignment.
    Second,
    /// `A_d < 0, A_s < 0`: global under-supply.
    Third,
    /// `A_d > 0, A_s < 0`: unreachable for solved markets.
    Fourth,
}

impl Quadrant {
    pub fn of(p: IndexPair) -> Option<Quadrant> {
        match (p.a_d, p.a_s) {
            (d, s) if d > 0.0 && s > 0.0 => Some(Quadrant::First),
            (d, s) if d < 0.0 && s > 0.0 => Some(Quadrant::Second),
            (d, s) if d < 0.0 && s < 0.0 => Some(Quadrant::Third),
            (d, s) if d > 0.0 && s < 0.0 => Some(Quadrant::Fourth),
            _ => None,
        }
    }

    pub fn number(&self) -> u8 {
        match self {
            Quadrant::First => 1,
            Quadrant::Second => 2,
            Quadrant::Third => 3,
            Quadrant::Fourth => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectReport {
    pub tau1_hat: f64,
    pub tau1_of_means: f64,
    pub tau2_hat: f64,
    pub tau_total_hat: f64,
    pub tau_vol_hat: f64,
    pub tau_dist_hat: f64,
    pub treatment_mean: IndexPair,
    pub control_mean: IndexPair,
    pub treatment_quadrant: Option<Quadrant>,
    pub control_quadrant: Option<Quadrant>,
}

pub fn effect_report(treatment: &ArmSamples, control: &ArmSamples) -> Result<EffectReport> {
    let shift = shift_decomposition(treatment, control)?;
    let (tm, cm) = (treatment.mean(), control.mean());
    Ok(EffectReport {
        tau1_hat: tau1_hat(treatment, control)?,
        tau1_of_means: tau1_of_means(treatment, control)?,
        tau2_hat: tau2_hat(treatment, control)?,
        tau_total_hat: shift.tau_total,
        tau_vol_hat: shift.tau_vol,
        tau_dist_hat: shift.tau_dist,
        treatment_mean: tm,
        control_mean: cm,
        treatment_quadrant: Quadrant::of(tm),
        control_quadrant: Quadrant::of(cm),
    })
}

impl EffectReport {
    /// `(statistic, estimate)` rows for the effect CSV.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("tau1", self.tau1_hat),
            ("tau1_means", self.tau1_of_means),
            ("tau2", self.tau2_hat),
            ("tau_total", self.tau_total_hat),
            ("tau_vol", self.tau_vol_hat),
            ("tau_dist", self.tau_dist_hat),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Gain,
    Loss,
    NoChange,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Gain => "gain",
            Verdict::Loss => "loss",
            Verdict::NoChange => "no change",
        }
    }
}

/// Which shift component carries the L¹ effect in a quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    /// `τ₁ = √2·τ_vol` (quadrant 1).
    Volume,
    /// `τ₁ = √2·τ_dist` (quadrant 2).
    Distribution,
    /// `τ₁ = −√2·τ_vol` (quadrant 3).
    NegatedVolume,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interpretation {
    SameQuadrant {
        quadrant: Quadrant,
        verdict: Verdict,
        driver: Driver,
        tau1: f64,
        tau_vol: f64,
        tau_dist: f64,
    },
    /// Arms in different quadrants, on an axis, or in the fourth quadrant.
    CrossQuadrant,
}

/// Reads the gain/loss verdict off the quadrant shared by both arm means.
pub fn quadrant_interpretation(report: &EffectReport) -> Interpretation {
    let (Some(qt), Some(qc)) = (report.treatment_quadrant, report.control_quadrant) else {
        return Interpretation::CrossQuadrant;
    };
    if qt != qc {
        return Interpretation::CrossQuadrant;
    }
    let driver = match qt {
        Quadrant::First => Driver::Volume,
        Quadrant::Second => Driver::Distribution,
        Quadrant::Third => Driver::NegatedVolume,
        Quadrant::Fourth => return Interpretation::CrossQuadrant,
    };
    let tau1 = report.tau1_of_means;
    let verdict = if tau1 < 0.0 {
        Verdict::Gain
    } else if tau1 > 0.0 {
        Verdict::Loss
    } else {
        Verdict::NoChange
    };
    Interpretation::SameQuadrant {
        quadrant: qt,
        verdict,
        driver,
        tau1,
        tau_vol: report.tau_vol_hat,
        tau_dist: report.tau_dist_hat,
    }
}
