//! Itemized energy values and export helpers.

use serde::{Deserialize, Serialize};

/// Weights in front of the fidelity and coupling terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityWeights {
    /// Weight on the color (full-image residual) dual-norm term.
    pub lambda_v: f64,
    /// Weight on the brightness residual dual-norm term.
    pub lambda_b: f64,
    /// Weight on the quadratic chromaticity tie-down.
    pub lambda_c: f64,
}

impl Default for FidelityWeights {
    fn default() -> Self {
        FidelityWeights {
            lambda_v: 1.0,
            lambda_b: 1.0,
            lambda_c: 1.0,
        }
    }
}

/// One row of an energy trace: every term evaluated at a single iterate.
///
/// All fields are plain numbers so the struct serializes flat; the column
/// order of [`EnergyBreakdown::csv_header`] and [`EnergyBreakdown::to_csv_row`]
/// is stable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// Total variation of the brightness channel.
    pub tv_brightness: f64,
    /// Edge-weighted chromaticity variation.
    pub weighted_chroma: f64,
    /// Total variation of the recomposed color field.
    pub tv_product: f64,
    /// Regularizer: sum of the three terms above.
    pub regularizer: f64,
    /// Dual norm of the mean-free color residual.
    pub gnorm_color: f64,
    /// Dual norm of the mean-free brightness residual.
    pub gnorm_brightness: f64,
    /// Mean penalty for the color residual (`|integral| / eps`).
    pub mean_penalty_color: f64,
    /// Mean penalty for the brightness residual.
    pub mean_penalty_brightness: f64,
    /// Quadratic chromaticity tie-down.
    pub l2_chroma: f64,
    /// Weighted fidelity: the five terms above combined.
    pub fidelity: f64,
    /// Regularizer plus weighted fidelity.
    pub total: f64,
}

impl EnergyBreakdown {
    pub const CSV_COLUMNS: [&'static str; 11] = [
        "tv_brightness",
        "weighted_chroma",
        "tv_product",
        "regularizer",
        "gnorm_color",
        "gnorm_brightness",
        "mean_penalty_color",
        "mean_penalty_brightness",
        "l2_chroma",
        "fidelity",
        "total",
    ];

    pub fn csv_header() -> String {
        Self::CSV_COLUMNS.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        [
            self.tv_brightness,
            self.weighted_chroma,
            self.tv_product,
            self.regularizer,
            self.gnorm_color,
            self.gnorm_brightness,
            self.mean_penalty_color,
            self.mean_penalty_brightness,
            self.l2_chroma,
            self.fidelity,
            self.total,
        ]
        .map(|v| format!("{v:.17e}"))
        .join(",")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("flat struct serializes")
    }
}
