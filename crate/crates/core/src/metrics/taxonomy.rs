use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Correctness crossed with grounding strength.
///
/// |              | correct          | incorrect         |
/// |--------------|------------------|-------------------|
/// | grounded     | EvidenceBased    | GroundedError     |
/// | weak         | WeaklySupported  | UnsupportedError  |
/// | contradicted | LuckyGuess       | Hallucination     |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaxonomyLabel {
    EvidenceBased,
    GroundedError,
    WeaklySupported,
    UnsupportedError,
    LuckyGuess,
    Hallucination,
}

impl TaxonomyLabel {
    pub const ALL: [TaxonomyLabel; 6] = [
        TaxonomyLabel::EvidenceBased,
        TaxonomyLabel::GroundedError,
        TaxonomyLabel::WeaklySupported,
        TaxonomyLabel::UnsupportedError,
        TaxonomyLabel::LuckyGuess,
        TaxonomyLabel::Hallucination,
    ];
}

/// Grounded is `g > grounded`, contradicted is `g < contradicted`, and
/// the closed interval between them is weak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaxonomyThresholds {
    pub grounded: f64,
    pub contradicted: f64,
}

impl Default for TaxonomyThresholds {
    fn default() -> Self {
        Self {
            grounded: 0.5,
            contradicted: -0.5,
        }
    }
}

impl TaxonomyThresholds {
    pub fn validate(&self) -> Result<()> {
        if self.contradicted.partial_cmp(&self.grounded).is_none_or(|o| o.is_gt()) {
            return Err(Error::invalid("taxonomy thresholds must satisfy contradicted <= grounded"));
        }
        Ok(())
    }
}

pub fn classify(correct: bool, g_max: f64) -> Result<TaxonomyLabel> {
    classify_with(correct, g_max, &TaxonomyThresholds::default())
}

pub fn classify_with(correct: bool, g_max: f64, t: &TaxonomyThresholds) -> Result<TaxonomyLabel> {
    if !(-1.0..=1.0).contains(&g_max) {
        return Err(Error::invalid(format!("g_max must be in [-1, 1], got {g_max}")));
    }
    use TaxonomyLabel::*;
    Ok(match (g_max > t.grounded, g_max < t.contradicted, correct) {
        (true, _, true) => EvidenceBased,
        (true, _, false) => GroundedError,
        (_, true, true) => LuckyGuess,
        (_, true, false) => Hallucination,
        (false, false, true) => WeaklySupported,
        (false, false, false) => UnsupportedError,
    })
}

/// EB / (EB + WS + LG); `None` when there are no correct predictions in
/// those cells.
pub fn faithfulness(eb: usize, ws: usize, lg: usize) -> Option<f64> {
    let denom = eb + ws + lg;
    (denom > 0).then(|| eb as f64 / denom as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyCounts {
    pub evidence_based: usize,
    pub grounded_error: usize,
    pub weakly_supported: usize,
    pub unsupported_error: usize,
    pub lucky_guess: usize,
    pub hallucination: usize,
}

impl TaxonomyCounts {
    pub fn add(&mut self, label: TaxonomyLabel) {
        *self.slot(label) += 1;
    }

    fn slot(&mut self, label: TaxonomyLabel) -> &mut usize {
        match label {
            TaxonomyLabel::EvidenceBased => &mut self.evidence_based,
            TaxonomyLabel::GroundedError => &mut self.grounded_error,
            TaxonomyLabel::WeaklySupported => &mut self.weakly_supported,
            TaxonomyLabel::UnsupportedError => &mut self.unsupported_error,
            TaxonomyLabel::LuckyGuess => &mut self.lucky_guess,
            TaxonomyLabel::Hallucination => &mut self.hallucination,
        }
    }

    pub fn get(&self, label: TaxonomyLabel) -> usize {
        let mut c = *self;
        *c.slot(label)
    }

    pub fn total(&self) -> usize {
        TaxonomyLabel::ALL.iter().map(|l| self.get(*l)).sum()
    }

    pub fn faithfulness(&self) -> Option<f64> {
        faithfulness(self.evidence_based, self.weakly_supported, self.lucky_guess)
    }

    pub fn rates(&self) -> Option<TaxonomyRates> {
        let n = self.total();
        if n == 0 {
            return None;
        }
        let pct = |c: usize| 100.0 * c as f64 / n as f64;
        Some(TaxonomyRates {
            evidence_based: pct(self.evidence_based),
            grounded_error: pct(self.grounded_error),
            weakly_supported: pct(self.weakly_supported),
            unsupported_error: pct(self.unsupported_error),
            lucky_guess: pct(self.lucky_guess),
            hallucination: pct(self.hallucination),
            weak: pct(self.weakly_supported + self.unsupported_error),
        })
    }
}

/// Per-cell percentages, plus `weak` = weakly supported + unsupported
/// error as reported in a single W column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyRates {
    pub evidence_based: f64,
    pub grounded_error: f64,
    pub weakly_supported: f64,
    pub unsupported_error: f64,
    pub lucky_guess: f64,
    pub hallucination: f64,
    pub weak: f64,
}
