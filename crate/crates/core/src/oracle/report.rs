use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stable identifiers of every check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BoundId {
    #[serde(rename = "K_lower")]
    KLower,
    #[serde(rename = "K_upper_neg")]
    KUpperNeg,
    #[serde(rename = "K_upper_pos")]
    KUpperPos,
    #[serde(rename = "K_upper_zero")]
    KUpperZero,
    #[serde(rename = "AB_estimate")]
    AbEstimate,
    #[serde(rename = "u_lower_hyp")]
    ULowerHyp,
    #[serde(rename = "u_upper_hyp")]
    UUpperHyp,
    #[serde(rename = "u_vs_u0_neg")]
    UVsU0Neg,
    #[serde(rename = "u_vs_u0_pos")]
    UVsU0Pos,
    #[serde(rename = "u_vs_u0_zero")]
    UVsU0Zero,
    #[serde(rename = "u_lower_cusp")]
    ULowerCusp,
    #[serde(rename = "vol_law")]
    VolLaw,
    #[serde(rename = "eigen_barrier")]
    EigenBarrier,
    #[serde(rename = "comparison")]
    Comparison,
    #[serde(rename = "scaling_symmetry")]
    ScalingSymmetry,
}

impl BoundId {
    /// Registry order.
    pub const ALL: [BoundId; 15] = [
        BoundId::KLower,
        BoundId::KUpperNeg,
        BoundId::KUpperPos,
        BoundId::KUpperZero,
        BoundId::AbEstimate,
        BoundId::ULowerHyp,
        BoundId::UUpperHyp,
        BoundId::UVsU0Neg,
        BoundId::UVsU0Pos,
        BoundId::UVsU0Zero,
        BoundId::ULowerCusp,
        BoundId::VolLaw,
        BoundId::EigenBarrier,
        BoundId::Comparison,
        BoundId::ScalingSymmetry,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundId::KLower => "K_lower",
            BoundId::KUpperNeg => "K_upper_neg",
            BoundId::KUpperPos => "K_upper_pos",
            BoundId::KUpperZero => "K_upper_zero",
            BoundId::AbEstimate => "AB_estimate",
            BoundId::ULowerHyp => "u_lower_hyp",
            BoundId::UUpperHyp => "u_upper_hyp",
            BoundId::UVsU0Neg => "u_vs_u0_neg",
            BoundId::UVsU0Pos => "u_vs_u0_pos",
            BoundId::UVsU0Zero => "u_vs_u0_zero",
            BoundId::ULowerCusp => "u_lower_cusp",
            BoundId::VolLaw => "vol_law",
            BoundId::EigenBarrier => "eigen_barrier",
            BoundId::Comparison => "comparison",
            BoundId::ScalingSymmetry => "scaling_symmetry",
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for BoundId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown bound id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skipped => "skipped",
        })
    }
}

/// Where the worst slack was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub node: usize,
    pub radius: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub id: BoundId,
    /// Label of the trajectory (or ladder) that was checked.
    pub subject: String,
    pub verdict: Verdict,
    /// Positive means satisfied with margin. `None` when skipped.
    pub worst_slack: Option<f64>,
    pub location: Option<Location>,
    pub tol: f64,
    /// Nodes left out of the check (boundary layer or outside the
    /// barrier's domain), counted once per snapshot.
    pub excluded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
}

impl BoundReport {
    pub fn measured(id: BoundId, subject: &str, slack: Slack, tol: f64, excluded: usize) -> Self {
        let (worst_slack, location, verdict) = match slack.worst {
            Some((s, loc)) => (Some(s), Some(loc), if s >= -tol { Verdict::Pass } else { Verdict::Fail }),
            None => (None, None, Verdict::Skipped),
        };
        let note = (verdict == Verdict::Skipped).then(|| "no node or time was in scope".to_string());
        Self {
            id,
            subject: subject.to_string(),
            verdict,
            worst_slack,
            location,
            tol,
            excluded,
            note,
            extras: BTreeMap::new(),
        }
    }

    pub fn skipped(id: BoundId, subject: &str, tol: f64, reason: impl Into<String>) -> Self {
        Self {
            id,
            subject: subject.to_string(),
            verdict: Verdict::Skipped,
            worst_slack: None,
            location: None,
            tol,
            excluded: 0,
            note: Some(reason.into()),
            extras: BTreeMap::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: f64) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

/// Running minimum of a slack with its location. Ties keep the first hit,
/// so results do not depend on anything but visiting order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Slack {
    pub worst: Option<(f64, Location)>,
}

impl Slack {
    pub fn push(&mut self, s: f64, node: usize, radius: f64, t: f64) {
        if self.worst.map_or(true, |(w, _)| s < w) {
            self.worst = Some((s, Location { node, radius, t }));
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.worst.map(|w| w.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in BoundId::ALL {
            assert_eq!(id.as_str().parse::<BoundId>().unwrap(), id);
            let j = serde_json::to_string(&id).unwrap();
            assert_eq!(j, format!("\"{id}\""));
        }
        assert!("K_middle".parse::<BoundId>().is_err());
    }

    #[test]
    fn verdict_follows_tolerance() {
        let mut s = Slack::default();
        s.push(-1e-3, 0, 0.0, 1.0);
        assert_eq!(BoundReport::measured(BoundId::KLower, "x", s, 1e-3, 0).verdict, Verdict::Pass);
        assert_eq!(BoundReport::measured(BoundId::KLower, "x", s, 5e-4, 0).verdict, Verdict::Fail);
        let empty = BoundReport::measured(BoundId::KLower, "x", Slack::default(), 1.0, 0);
        assert_eq!(empty.verdict, Verdict::Skipped);
    }
}
