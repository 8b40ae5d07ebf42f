use serde::{Deserialize, Serialize};

use super::card::{sigmoid, ModelCard, Term};
use super::ModelError;

/// Number of linear-predictor samples in the total-points table.
pub const TOTAL_POINTS_SAMPLES: usize = 256;

/// Points per unit of linear predictor for a card.
///
/// The widest term (largest |β|·span) spans exactly 0..100 points; every other
/// term is scaled by the same factor so total points stay affine in η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointScale {
    points_per_eta: f64,
}

impl PointScale {
    pub fn for_card(card: &ModelCard) -> PointScale {
        let widest = max_contribution_span(card);
        let points_per_eta = if widest > 0.0 { 100.0 / widest } else { 0.0 };
        PointScale { points_per_eta }
    }

    pub fn points_per_eta(&self) -> f64 {
        self.points_per_eta
    }

    /// Points for `value` on this term's axis, measured from the reference code.
    pub fn points(&self, term: &Term, value: f64) -> f64 {
        term.coefficient * (value - term.reference_code() as f64) * self.points_per_eta
    }
}

fn max_contribution_span(card: &ModelCard) -> f64 {
    card.terms
        .iter()
        .map(|t| t.coefficient.abs() * t.span())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisTick {
    pub code: i64,
    pub points: f64,
}

/// Point scale for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NomogramAxis {
    pub variable: String,
    pub coefficient: f64,
    pub min_code: i64,
    pub max_code: i64,
    pub reference_code: i64,
    pub max_points: f64,
    pub ticks: Vec<AxisTick>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalPointsRow {
    pub total_points: f64,
    pub eta: f64,
    pub p_retained: f64,
    pub p_ed: f64,
}

/// Nomogram for a card: per-variable point axes and the total-points map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NomogramTable {
    pub model: String,
    /// Points per unit of linear predictor.
    pub points_per_eta: f64,
    /// Linear predictor when every term sits at its reference code.
    pub base_eta: f64,
    pub axes: Vec<NomogramAxis>,
    pub total_points: Vec<TotalPointsRow>,
}

impl NomogramTable {
    /// η corresponding to a total-points value.
    pub fn eta_for_points(&self, total_points: f64) -> f64 {
        self.base_eta + total_points / self.points_per_eta
    }

    pub fn p_retained_for_points(&self, total_points: f64) -> f64 {
        sigmoid(self.eta_for_points(total_points))
    }

    pub fn axis(&self, variable: &str) -> Option<&NomogramAxis> {
        self.axes.iter().find(|a| a.variable == variable)
    }
}

/// Builds the nomogram point scales for `card`.
pub fn nomogram(card: &ModelCard) -> Result<NomogramTable, ModelError> {
    let scale = PointScale::for_card(card);
    if scale.points_per_eta == 0.0 {
        return Err(ModelError::DegenerateCard(card.name.clone()));
    }

    let axes: Vec<NomogramAxis> = card
        .terms
        .iter()
        .map(|term| {
            let ticks = (term.min_code..=term.max_code)
                .map(|code| AxisTick { code, points: scale.points(term, code as f64) })
                .collect();
            NomogramAxis {
                variable: term.variable.clone(),
                coefficient: term.coefficient,
                min_code: term.min_code,
                max_code: term.max_code,
                reference_code: term.reference_code(),
                max_points: term.coefficient.abs() * term.span() * scale.points_per_eta,
                ticks,
            }
        })
        .collect();

    let base_eta = card.intercept
        + card.calibration_offset
        + card
            .terms
            .iter()
            .map(|t| t.coefficient * t.reference_code() as f64)
            .sum::<f64>();
    let max_total: f64 = axes.iter().map(|a| a.max_points).sum();

    let last = (TOTAL_POINTS_SAMPLES - 1) as f64;
    let total_points = (0..TOTAL_POINTS_SAMPLES)
        .map(|i| {
            let pts = max_total * i as f64 / last;
            let eta = base_eta + pts / scale.points_per_eta;
            let p_retained = sigmoid(eta);
            TotalPointsRow { total_points: pts, eta, p_retained, p_ed: 1.0 - p_retained }
        })
        .collect();

    Ok(NomogramTable {
        model: card.name.clone(),
        points_per_eta: scale.points_per_eta,
        base_eta,
        axes,
        total_points,
    })
}
