use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{Bump, GridKind, InitialData, InitialForm};
use crate::oracle::BoundId;
use crate::stepper::{BoundaryForm, StepPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub t_end: f64,
    /// Registry ids, or `["all"]`.
    #[serde(default = "all_checks")]
    pub checks: Vec<String>,
    /// Only used to place a bump without an explicit centre.
    #[serde(default)]
    pub seed: u64,
    /// Default output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub initial: InitialSpec,
    pub domain: DomainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryForm>,
    #[serde(default)]
    pub ladder: LadderSpec,
    pub stepping: SteppingSpec,
    #[serde(default)]
    pub oracle: OracleSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSpec>,
}

fn all_checks() -> Vec<String> {
    vec!["all".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    #[serde(flatten)]
    pub form: InitialForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<BumpSpec>,
}

/// A bump with either a fixed `center` or one placed at distance `offset`
/// from the origin in a direction drawn from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub amplitude: f64,
    pub width: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: GridKind,
    /// Disk radius for runs without a ladder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LadderSpec {
    /// One run with the `[boundary]` data.
    #[default]
    None,
    /// Ramps on the disk of radius `1 - 1/k`.
    M { k: f64, m_list: Vec<f64> },
    /// Exhaustion at one ramp.
    K { k_list: Vec<f64>, m_final: f64 },
    /// Ramps at the largest `k`, then exhaustion at the largest `m`.
    Mk { k_list: Vec<f64>, m_list: Vec<f64> },
    /// Plane truncations with the `[boundary]` data.
    Plane { r_list: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingSpec {
    /// Nodes per radius of the largest domain; exclusive with `h`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt0: Option<f64>,
    #[serde(default = "dt_min")]
    pub dt_min: f64,
    #[serde(default = "dt_max")]
    pub dt_max: f64,
    #[serde(default = "newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "budget")]
    pub budget: usize,
    #[serde(default = "snapshot_every")]
    pub snapshot_every: f64,
}

fn dt_min() -> f64 {
    StepPolicy::default().dt_min
}
fn dt_max() -> f64 {
    StepPolicy::default().dt_max
}
fn newton_tol() -> f64 {
    StepPolicy::default().newton_tol
}
fn budget() -> usize {
    StepPolicy::default().budget
}
fn snapshot_every() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    /// Start of the time window of the completeness barrier.
    #[serde(default)]
    pub completeness_t_min: f64,
    /// Inner radius of the cusp lower bound.
    #[serde(default = "cusp_r0")]
    pub cusp_r0: f64,
}

fn cusp_r0() -> f64 {
    2.0
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            completeness_t_min: 0.0,
            cusp_r0: cusp_r0(),
        }
    }
}

/// Rescaling `(x, t) -> (alpha x, alpha^2 t)` and a refinement study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub alpha: f64,
    /// Nodes per radius of the refinement runs; each doubles the last.
    pub n_list: Vec<usize>,
    /// Refinement runs use `dt_max = dt_factor * h^2`.
    pub dt_factor: f64,
    /// Horizon of the refinement runs.
    pub t_end: f64,
}

/// Resolved, checked form of a [`Scenario`].
#[derive(Debug, Clone)]
pub struct Validated {
    pub scenario: Scenario,
    pub initial: InitialData,
    pub checks: Vec<BoundId>,
    pub h: f64,
    pub policy: StepPolicy,
    pub outputs: Vec<f64>,
    pub fingerprint: String,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive and finite, got {x}")))
    }
}

fn increasing(name: &str, xs: &[f64]) -> Result<()> {
    if xs.len() < 3 {
        return Err(bad(format!("{name} needs at least 3 values")));
    }
    if xs.iter().any(|x| !x.is_finite()) || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(bad(format!("{name} must be finite and strictly increasing")));
    }
    Ok(())
}

impl Scenario {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// Radius of the largest domain the scenario integrates on.
    pub fn largest_radius(&self) -> Result<f64> {
        let r = match &self.ladder {
            LadderSpec::None => self
                .domain
                .radius
                .ok_or_else(|| bad("[domain] radius is required without a ladder"))?,
            LadderSpec::M { k, .. } => 1.0 - 1.0 / k,
            LadderSpec::K { k_list, .. } | LadderSpec::Mk { k_list, .. } => {
                1.0 - 1.0 / k_list.last().copied().unwrap_or(2.0)
            }
            LadderSpec::Plane { r_list } => r_list.last().copied().unwrap_or(0.0),
        };
        Ok(r)
    }

    pub fn validate(&self) -> Result<Validated> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(bad(format!("name `{}` must be non-empty [A-Za-z0-9_-]", self.name)));
        }
        positive("t_end", self.t_end)?;

        let mut checks = BTreeSet::new();
        for c in &self.checks {
            if c == "all" {
                checks.extend(BoundId::ALL);
            } else {
                checks.insert(c.parse::<BoundId>()?);
            }
        }
        if checks.is_empty() {
            return Err(bad("no checks requested"));
        }

        match &self.ladder {
            LadderSpec::None => {
                if self.boundary.is_none() {
                    return Err(bad("[boundary] is required without a ladder"));
                }
            }
            LadderSpec::M { k, m_list } => {
                increasing("m_list", m_list)?;
                if !(*k >= 2.0) {
                    return Err(bad(format!("k must be >= 2, got {k}")));
                }
            }
            LadderSpec::K { k_list, m_final } => {
                increasing("k_list", k_list)?;
                positive("m_final", *m_final)?;
            }
            LadderSpec::Mk { k_list, m_list } => {
                increasing("k_list", k_list)?;
                increasing("m_list", m_list)?;
            }
            LadderSpec::Plane { r_list } => {
                increasing("r_list", r_list)?;
                if self.boundary.is_none() {
                    return Err(bad("plane ladders need [boundary] data"));
                }
            }
        }
        if let LadderSpec::K { k_list, .. } | LadderSpec::Mk { k_list, .. } = &self.ladder {
            if k_list[0] < 2.0 {
                return Err(bad("k values must be >= 2"));
            }
        }
        if let Some(b) = &self.boundary {
            b.validate().map_err(|e| bad(e.to_string()))?;
            if !matches!(self.ladder, LadderSpec::None | LadderSpec::Plane { .. }) {
                return Err(bad("[boundary] applies only without a ladder or on plane ladders"));
            }
        }

        let radius = self.largest_radius()?;
        positive("domain radius", radius)?;
        let s = &self.stepping;
        let h = match (s.n, s.h) {
            (Some(n), None) if n > 0 => radius / n as f64,
            (None, Some(h)) => {
                positive("h", h)?;
                h
            }
            _ => return Err(bad("[stepping] needs exactly one of n (> 0) and h")),
        };
        if let Some(d) = s.dt0 {
            positive("dt0", d)?;
        }
        positive("dt_min", s.dt_min)?;
        positive("dt_max", s.dt_max)?;
        positive("newton_tol", s.newton_tol)?;
        positive("snapshot_every", s.snapshot_every)?;
        if s.budget == 0 {
            return Err(bad("budget must be positive"));
        }
        let policy = StepPolicy {
            dt0: s.dt0,
            dt_min: s.dt_min,
            dt_max: s.dt_max,
            newton_tol: s.newton_tol,
            budget: s.budget,
        };
        policy.validate().map_err(|e| bad(e.to_string()))?;

        if !(self.oracle.completeness_t_min >= 0.0) || !(self.oracle.cusp_r0 > 1.0) {
            return Err(bad("completeness_t_min must be >= 0 and cusp_r0 > 1"));
        }
        if let Some(sc) = &self.scaling {
            if !(sc.alpha > 0.0 && sc.alpha < 1.0) {
                return Err(bad(format!("scaling alpha must be in (0, 1), got {}", sc.alpha)));
            }
            if sc.n_list.len() < 3 || sc.n_list.windows(2).any(|w| w[1] != 2 * w[0]) {
                return Err(bad("scaling n_list needs >= 3 entries, each double the last"));
            }
            positive("dt_factor", sc.dt_factor)?;
            positive("scaling t_end", sc.t_end)?;
            if !matches!(self.ladder, LadderSpec::None)
                || !matches!(self.boundary, Some(BoundaryForm::HyperbolicGrowth { .. }))
                || !matches!(self.initial.form, InitialForm::HyperbolicDisk)
                || self.initial.bump.is_some()
            {
                return Err(bad(
                    "scaling studies need hyperbolic-disk data with hyperbolic-growth boundary and no ladder",
                ));
            }
        }

        let initial = self.resolve_initial(radius)?;
        initial.validate().map_err(|e| bad(e.to_string()))?;
        if self.domain.kind == GridKind::Radial1d && !initial.is_radial() {
            return Err(bad("an off-centre bump needs a cartesian-masked-disk domain"));
        }

        let n_out = (self.t_end / s.snapshot_every + 1e-9).floor() as usize;
        let mut outputs: Vec<f64> = (1..=n_out).map(|i| i as f64 * s.snapshot_every).filter(|&t| t < self.t_end).collect();
        outputs.push(self.t_end);

        let mut canonical = self.clone();
        canonical.output = None;
        let json = serde_json::to_string(&canonical).map_err(|e| bad(e.to_string()))?;
        Ok(Validated {
            scenario: self.clone(),
            initial,
            checks: checks.into_iter().collect(),
            h,
            policy,
            outputs,
            fingerprint: sha256_hex(json.as_bytes()),
        })
    }

    fn resolve_initial(&self, radius: f64) -> Result<InitialData> {
        let bump = match self.initial.bump {
            None => None,
            Some(b) => {
                let center = match (b.center, b.offset) {
                    (Some(c), None) => c,
                    (None, Some(off)) => {
                        if !(off >= 0.0 && off < radius) {
                            return Err(bad(format!("bump offset must lie in [0, {radius})")));
                        }
                        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                        let a: f64 = rng.gen_range(0.0..2.0 * PI);
                        [off * a.cos(), off * a.sin()]
                    }
                    (None, None) => [0.0, 0.0],
                    (Some(_), Some(_)) => return Err(bad("give a bump either center or offset, not both")),
                };
                Some(Bump {
                    amplitude: b.amplitude,
                    width: b.width,
                    center,
                })
            }
        };
        Ok(InitialData {
            form: self.initial.form,
            bump,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
t_end = 1.0
[initial]
form = "hyperbolic-disk"
[domain]
kind = "radial-1d"
radius = 0.9
[boundary]
form = "hyperbolic-growth"
[stepping]
n = 64
"#;

    fn parse(text: &str) -> Result<Scenario> {
        Scenario::from_toml(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_scenario() {
        let v = parse(BASE).unwrap().validate().unwrap();
        assert_eq!(v.checks.len(), BoundId::ALL.len());
        assert!((v.h - 0.9 / 64.0).abs() < 1e-15);
        assert_eq!(v.outputs.len(), 20);
        assert_eq!(*v.outputs.last().unwrap(), 1.0);
        assert_eq!(v.fingerprint.len(), 64);
    }

    #[test]
    fn unknown_bound_id() {
        let s = parse(&BASE.replace("t_end = 1.0", "t_end = 1.0\nchecks = [\"K_sideways\"]")).unwrap();
        assert!(matches!(s.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_key_is_a_parse_error() {
        assert!(matches!(parse(&format!("colour = 1\n{BASE}")), Err(Error::Parse { .. })));
    }

    #[test]
    fn fingerprint_ignores_output_only() {
        let a = parse(BASE).unwrap();
        let mut b = a.clone();
        b.output = Some("elsewhere".into());
        assert_eq!(a.validate().unwrap().fingerprint, b.validate().unwrap().fingerprint);
        b.t_end = 0.5;
        assert_ne!(a.validate().unwrap().fingerprint, b.validate().unwrap().fingerprint);
    }

    #[test]
    fn seeded_bump_placement() {
        let text = BASE
            .replace("radial-1d", "cartesian-masked-disk")
            .replace("form = \"hyperbolic-disk\"", "form = \"constant\"\nvalue = 0.0\n[initial.bump]\namplitude = 0.3\nwidth = 0.2\noffset = 0.25");
        let s = parse(&text).unwrap();
        let a = s.validate().unwrap().initial.bump.unwrap().center;
        assert!((a[0].hypot(a[1]) - 0.25).abs() < 1e-12);
        assert_eq!(a, s.validate().unwrap().initial.bump.unwrap().center);
        let mut s2 = s.clone();
        s2.seed = 7;
        assert_ne!(a, s2.validate().unwrap().initial.bump.unwrap().center);
        let radial = parse(&text.replace("cartesian-masked-disk", "radial-1d")).unwrap();
        assert!(radial.validate().is_err());
    }

    #[test]
    fn ladder_lists_are_checked() {
        let text = BASE.replace("[boundary]\nform = \"hyperbolic-growth\"\n", "[ladder]\naxis = \"m\"\nk = 8\nm_list = [0, 16, 4]\n");
        assert!(parse(&text).unwrap().validate().is_err());
        let ok = text.replace("[0, 16, 4]", "[0, 4, 16]").replace("n = 64", "h = 0.0078125");
        let v = parse(&ok).unwrap().validate().unwrap();
        assert_eq!(v.h, 0.0078125);
    }
}
