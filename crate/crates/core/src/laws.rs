//! Positive label laws, their fractional moments and the moment matrix input.
//!
//! Four families with closed-form moments are shipped. A new family has to
//! provide the same four pieces every routine downstream relies on: the
//! moment `E[xi^s]` (and its logarithm), the tilted log-mean
//! `E[xi^s log xi] / E[xi^s]`, a sampler for `log xi` under both the plain
//! and the exponentially tilted law, and its moment domain.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use crate::rng::RandomStream;

/// Largest deviation of a probability vector's sum from 1 that is silently
/// renormalised.
pub const PROB_RENORMALISE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Family {
    Atomic,
    LogNormal,
    LogUniform,
    Deterministic,
}

/// Interval of `s` with `E[xi^s] < infinity`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentDomain {
    pub lower: f64,
    pub upper: f64,
}

impl MomentDomain {
    pub const REAL_LINE: MomentDomain = MomentDomain {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn contains(&self, s: f64) -> bool {
        s.is_finite() && self.lower <= s && s <= self.upper
    }

    pub fn interior_contains(&self, s: f64) -> bool {
        s.is_finite() && self.lower < s && s < self.upper
    }

    pub fn intersect(&self, other: &MomentDomain) -> MomentDomain {
        MomentDomain {
            lower: self.lower.max(other.lower),
            upper: self.upper.min(other.upper),
        }
    }

    /// `0` is an interior point.
    pub fn zero_interior(&self) -> bool {
        self.lower < 0.0 && 0.0 < self.upper
    }

    /// `[0, 1]` is contained in the domain.
    pub fn contains_unit_interval(&self) -> bool {
        self.lower <= 0.0 && 1.0 <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Atomic {
        atoms: Vec<f64>,
        logs: Vec<f64>,
        probs: Vec<f64>,
        cumulative: Vec<f64>,
    },
    LogNormal {
        location: f64,
        scale: f64,
    },
    LogUniform {
        lower: f64,
        upper: f64,
    },
    Deterministic {
        value: f64,
        log: f64,
    },
}

/// Borrowed view of a law's parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawParams<'a> {
    Atomic { atoms: &'a [f64], probs: &'a [f64] },
    LogNormal { location: f64, scale: f64 },
    LogUniform { lower: f64, upper: f64 },
    Deterministic { value: f64 },
}

/// Law of a strictly positive edge label. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelLaw {
    repr: Repr,
}

fn check_probs(probs: &[f64]) -> Result<Vec<f64>> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidLaw(String::from(
            "probabilities must be finite and nonnegative",
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_RENORMALISE_TOL {
        return Err(Error::InvalidLaw(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(probs.iter().map(|p| p / total).collect())
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// `log(expm1(x) / x)`, finite for every real `x`.
fn log_expm1_ratio(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        0.5 * x
    } else if x > 0.0 {
        x + (-(-x).exp_m1()).ln() - x.ln()
    } else {
        (-x.exp_m1()).ln() - (-x).ln()
    }
}

/// Mean of `V` on `[0, 1]` with density proportional to `exp(x v)`:
/// `1 / (1 - exp(-x)) - 1 / x`.
fn trunc_exp_mean(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        0.5 + x / 12.0 - x * x * x / 720.0
    } else if x > 0.0 {
        1.0 / (-(-x).exp_m1()) - 1.0 / x
    } else {
        1.0 - trunc_exp_mean(-x)
    }
}

impl LabelLaw {
    /// Finitely many positive atoms with the given probabilities.
    pub fn atomic(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(Error::InvalidLaw(String::from(
                "atomic law needs matching, non-empty atoms and probs",
            )));
        }
        if atoms.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidLaw(String::from(
                "atoms must be strictly positive and finite",
            )));
        }
        let probs = check_probs(&probs)?;
        let logs = atoms.iter().map(|a| a.ln()).collect();
        let cumulative = cumulative(&probs);
        Ok(Self {
            repr: Repr::Atomic {
                atoms,
                logs,
                probs,
                cumulative,
            },
        })
    }

    /// Atomic law given by the logarithms of its atoms; the logs are kept
    /// verbatim so that `sample_log` reproduces them exactly.
    pub fn atomic_from_logs(logs: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if logs.is_empty() || logs.len() != probs.len() {
            return Err(Error::InvalidLaw(String::from(
                "atomic law needs matching, non-empty atoms and probs",
            )));
        }
        let atoms: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        if logs.iter().any(|l| !l.is_finite()) || atoms.iter().any(|a| !(a.is_finite() && *a > 0.0))
        {
            return Err(Error::InvalidLaw(String::from(
                "atoms must be strictly positive and finite",
            )));
        }
        let probs = check_probs(&probs)?;
        let cumulative = cumulative(&probs);
        Ok(Self {
            repr: Repr::Atomic {
                atoms,
                logs,
                probs,
                cumulative,
            },
        })
    }

    /// `xi = exp(location + scale * N(0, 1))`.
    pub fn lognormal(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() || !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidLaw(format!(
                "lognormal needs finite location and scale > 0 (got {location}, {scale})"
            )));
        }
        Ok(Self {
            repr: Repr::LogNormal { location, scale },
        })
    }

    /// `log xi` uniform on `[lower, upper]`.
    pub fn loguniform(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::InvalidLaw(format!(
                "loguniform needs finite lower < upper (got {lower}, {upper})"
            )));
        }
        Ok(Self {
            repr: Repr::LogUniform { lower, upper },
        })
    }

    /// Point mass at `value > 0`. Degenerate: admitted for spectral tests.
    pub fn deterministic(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidLaw(format!(
                "deterministic value must be positive and finite (got {value})"
            )));
        }
        Ok(Self {
            repr: Repr::Deterministic {
                value,
                log: value.ln(),
            },
        })
    }

    /// Point mass at `exp(log)`, with `log` kept verbatim.
    pub fn deterministic_from_log(log: f64) -> Result<Self> {
        let value = log.exp();
        if !(log.is_finite() && value.is_finite() && value > 0.0) {
            return Err(Error::InvalidLaw(format!(
                "deterministic log-value {log} does not give a positive finite label"
            )));
        }
        Ok(Self {
            repr: Repr::Deterministic { value, log },
        })
    }

    pub fn family(&self) -> Family {
        match self.repr {
            Repr::Atomic { .. } => Family::Atomic,
            Repr::LogNormal { .. } => Family::LogNormal,
            Repr::LogUniform { .. } => Family::LogUniform,
            Repr::Deterministic { .. } => Family::Deterministic,
        }
    }

    pub fn params(&self) -> LawParams<'_> {
        match &self.repr {
            Repr::Atomic { atoms, probs, .. } => LawParams::Atomic { atoms, probs },
            Repr::LogNormal { location, scale } => LawParams::LogNormal {
                location: *location,
                scale: *scale,
            },
            Repr::LogUniform { lower, upper } => LawParams::LogUniform {
                lower: *lower,
                upper: *upper,
            },
            Repr::Deterministic { value, .. } => LawParams::Deterministic { value: *value },
        }
    }

    /// All shipped families have finite moments of every real order.
    pub fn domain(&self) -> MomentDomain {
        MomentDomain::REAL_LINE
    }

    /// A point mass, or an atomic law with a single charged atom.
    pub fn is_degenerate(&self) -> bool {
        match &self.repr {
            Repr::Deterministic { .. } => true,
            Repr::Atomic { probs, logs, .. } => {
                let mut charged = logs.iter().zip(probs).filter(|(_, p)| **p > 0.0);
                match charged.next() {
                    None => true,
                    Some((first, _)) => charged.all(|(l, _)| l == first),
                }
            }
            _ => false,
        }
    }

    /// `ess sup log xi`, or `None` when the support is unbounded above.
    pub fn log_support_max(&self) -> Option<f64> {
        match &self.repr {
            Repr::Atomic { logs, probs, .. } => Some(
                logs.iter()
                    .zip(probs)
                    .filter(|(_, p)| **p > 0.0)
                    .fold(f64::NEG_INFINITY, |m, (l, _)| m.max(*l)),
            ),
            Repr::LogNormal { .. } => None,
            Repr::LogUniform { upper, .. } => Some(*upper),
            Repr::Deterministic { log, .. } => Some(*log),
        }
    }

    /// Every realisation is `<= 1`, so running products along a path can
    /// only shrink.
    pub fn certified_at_most_one(&self) -> bool {
        matches!(self.log_support_max(), Some(m) if m <= 0.0)
    }

    /// Logs of the atoms and their probabilities for lattice-valued laws
    /// (atomic and deterministic).
    pub fn lattice_atoms(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.repr {
            Repr::Atomic { logs, probs, .. } => Some((logs.clone(), probs.clone())),
            Repr::Deterministic { log, .. } => Some((alloc::vec![*log], alloc::vec![1.0])),
            _ => None,
        }
    }

    fn check(&self, s: f64) -> Result<()> {
        if self.domain().contains(s) {
            Ok(())
        } else {
            Err(Error::Domain { s })
        }
    }

    /// `E[xi^s]`.
    pub fn moment(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        if s == 0.0 {
            return Ok(1.0);
        }
        Ok(match &self.repr {
            Repr::Atomic { atoms, probs, .. } => {
                atoms.iter().zip(probs).map(|(x, p)| p * x.powf(s)).sum()
            }
            Repr::LogNormal { location, scale } => {
                (location * s + 0.5 * scale * scale * s * s).exp()
            }
            Repr::LogUniform { lower, upper } => {
                let x = s * (upper - lower);
                (lower * s).exp() * x.exp_m1() / x
            }
            Repr::Deterministic { value, .. } => value.powf(s),
        })
    }

    /// `log E[xi^s]`, computed without forming `E[xi^s]`.
    pub fn log_moment(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        Ok(match &self.repr {
            Repr::Atomic { logs, probs, .. } => {
                log_sum_exp(logs.iter().zip(probs).map(|(l, p)| (*p, s * l)))
            }
            Repr::LogNormal { location, scale } => location * s + 0.5 * scale * scale * s * s,
            Repr::LogUniform { lower, upper } => lower * s + log_expm1_ratio(s * (upper - lower)),
            Repr::Deterministic { log, .. } => s * log,
        })
    }

    /// `E[xi^s log xi] / E[xi^s]`: mean of `log xi` under the tilt by `xi^s`.
    /// This is the derivative of `log_moment` in `s`.
    pub fn tilted_log_mean(&self, s: f64) -> Result<f64> {
        if !self.domain().interior_contains(s) {
            return Err(Error::Domain { s });
        }
        Ok(match &self.repr {
            Repr::Atomic { logs, probs, .. } => {
                let top = logs
                    .iter()
                    .zip(probs)
                    .filter(|(_, p)| **p > 0.0)
                    .fold(f64::NEG_INFINITY, |m, (l, _)| m.max(s * l));
                let (mut num, mut den) = (0.0, 0.0);
                for (l, p) in logs.iter().zip(probs) {
                    if *p > 0.0 {
                        let w = p * (s * l - top).exp();
                        num += w * l;
                        den += w;
                    }
                }
                num / den
            }
            Repr::LogNormal { location, scale } => location + scale * scale * s,
            Repr::LogUniform { lower, upper } => {
                let width = upper - lower;
                lower + width * trunc_exp_mean(s * width)
            }
            Repr::Deterministic { log, .. } => *log,
        })
    }

    /// `E[xi^s log xi]`, the derivative of the moment function.
    pub fn moment_logweighted(&self, s: f64) -> Result<f64> {
        Ok(self.moment(s)? * self.tilted_log_mean(s)?)
    }

    /// `E[log xi]`.
    pub fn log_mean(&self) -> f64 {
        self.tilted_log_mean(0.0)
            .expect("0 is interior for shipped families")
    }

    /// One draw of `log xi`.
    pub fn sample_log(&self, rng: &mut RandomStream) -> f64 {
        match &self.repr {
            Repr::Atomic {
                logs, cumulative, ..
            } => {
                let u = rng.uniform();
                let k = cumulative.partition_point(|c| *c <= u).min(logs.len() - 1);
                logs[k]
            }
            Repr::LogNormal { location, scale } => location + scale * rng.standard_normal(),
            Repr::LogUniform { lower, upper } => lower + (upper - lower) * rng.uniform(),
            Repr::Deterministic { log, .. } => *log,
        }
    }

    /// One draw of `xi`.
    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        match &self.repr {
            Repr::Deterministic { value, .. } => *value,
            _ => self.sample_log(rng).exp(),
        }
    }

    /// The law of `log xi` under the change of measure `xi^s / E[xi^s]`.
    pub fn tilt(&self, s: f64) -> Result<TiltedLaw> {
        self.check(s)?;
        Ok(match &self.repr {
            Repr::Atomic { logs, probs, .. } => {
                let top = logs
                    .iter()
                    .zip(probs)
                    .filter(|(_, p)| **p > 0.0)
                    .fold(f64::NEG_INFINITY, |m, (l, _)| m.max(s * l));
                let w: Vec<f64> = logs
                    .iter()
                    .zip(probs)
                    .map(|(l, p)| {
                        if *p > 0.0 {
                            p * (s * l - top).exp()
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let total: f64 = w.iter().sum();
                let probs: Vec<f64> = w.iter().map(|x| x / total).collect();
                TiltedLaw::Atomic {
                    logs: logs.clone(),
                    cumulative: cumulative(&probs),
                }
            }
            Repr::LogNormal { location, scale } => TiltedLaw::Normal {
                mean: location + scale * scale * s,
                sd: *scale,
            },
            Repr::LogUniform { lower, upper } => TiltedLaw::TruncatedExponential {
                lower: *lower,
                upper: *upper,
                rate: s,
            },
            Repr::Deterministic { log, .. } => TiltedLaw::Point { log: *log },
        })
    }
}

/// Sampler for `log xi` under an exponential tilt.
#[derive(Debug, Clone, PartialEq)]
pub enum TiltedLaw {
    Atomic {
        logs: Vec<f64>,
        cumulative: Vec<f64>,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Density proportional to `exp(rate * y)` on `[lower, upper]`.
    TruncatedExponential {
        lower: f64,
        upper: f64,
        rate: f64,
    },
    Point {
        log: f64,
    },
}

impl TiltedLaw {
    pub fn sample_log(&self, rng: &mut RandomStream) -> f64 {
        match self {
            TiltedLaw::Atomic { logs, cumulative } => {
                let u = rng.uniform();
                let k = cumulative.partition_point(|c| *c <= u).min(logs.len() - 1);
                logs[k]
            }
            TiltedLaw::Normal { mean, sd } => mean + sd * rng.standard_normal(),
            TiltedLaw::TruncatedExponential { lower, upper, rate } => {
                let u = rng.uniform();
                let width = upper - lower;
                let y = if *rate == 0.0 {
                    lower + width * u
                } else if *rate > 0.0 {
                    upper + (u + (1.0 - u) * (-rate * width).exp()).ln() / rate
                } else {
                    lower + (1.0 - u + u * (rate * width).exp()).ln() / rate
                };
                y.clamp(*lower, *upper)
            }
            TiltedLaw::Point { log } => *log,
        }
    }
}

/// Law of a real-valued passage time or jump `tau`; its push-forward
/// `xi = exp(-tau)` is a [`LabelLaw`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "family", content = "params", rename_all = "lowercase")
)]
pub enum PassageLaw {
    Normal { mean: f64, sd: f64 },
    Atomic { values: Vec<f64>, probs: Vec<f64> },
    Uniform { lower: f64, upper: f64 },
    Constant { value: f64 },
}

/// `d x d` matrix of label laws; entry `(i, j)` governs edges from a parent
/// of colour `i` to a child of colour `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    d: usize,
    laws: Vec<LabelLaw>,
}

impl ModelSpec {
    pub fn new(rows: Vec<Vec<LabelLaw>>) -> Result<Self> {
        let d = rows.len();
        if d < 2 {
            return Err(Error::InvalidModel(format!(
                "d must be at least 2 (got {d})"
            )));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::InvalidModel(format!(
                "matrix shape: row {i} has {} entries, expected {d}",
                row.len()
            )));
        }
        Ok(Self {
            d,
            laws: rows.into_iter().flatten().collect(),
        })
    }

    /// Every entry carries the same law.
    pub fn iid(d: usize, law: LabelLaw) -> Result<Self> {
        Self::new(alloc::vec![alloc::vec![law; d]; d])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn law(&self, parent: usize, child: usize) -> &LabelLaw {
        &self.laws[parent * self.d + child]
    }

    pub fn laws(&self) -> impl Iterator<Item = ((usize, usize), &LabelLaw)> {
        let d = self.d;
        self.laws
            .iter()
            .enumerate()
            .map(move |(k, l)| ((k / d, k % d), l))
    }

    pub fn rows(&self) -> Vec<Vec<LabelLaw>> {
        self.laws.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    pub fn is_iid(&self) -> bool {
        self.laws.iter().all(|l| *l == self.laws[0])
    }

    /// Intersection of all entries' moment domains.
    pub fn domain(&self) -> MomentDomain {
        self.laws
            .iter()
            .fold(MomentDomain::REAL_LINE, |acc, l| acc.intersect(&l.domain()))
    }

    /// Every label is a.s. `<= 1`.
    pub fn certified_at_most_one(&self) -> bool {
        self.laws.iter().all(LabelLaw::certified_at_most_one)
    }

    /// All laws are point masses at one common value.
    pub fn all_deterministic_equal(&self) -> bool {
        match self.laws[0].repr {
            Repr::Deterministic { log, .. } => self
                .laws
                .iter()
                .all(|l| matches!(l.repr, Repr::Deterministic { log: other, .. } if other == log)),
            _ => false,
        }
    }

    /// Shift every log-label by `shift` (multiply every label by `exp(shift)`).
    pub fn scaled(&self, shift: f64) -> Result<Self> {
        let laws = self
            .laws
            .iter()
            .map(|l| match &l.repr {
                Repr::Atomic { logs, probs, .. } => LabelLaw::atomic_from_logs(
                    logs.iter().map(|x| x + shift).collect(),
                    probs.clone(),
                ),
                Repr::LogNormal { location, scale } => {
                    LabelLaw::lognormal(location + shift, *scale)
                }
                Repr::LogUniform { lower, upper } => {
                    LabelLaw::loguniform(lower + shift, upper + shift)
                }
                Repr::Deterministic { log, .. } => LabelLaw::deterministic_from_log(log + shift),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { d: self.d, laws })
    }
}

/// Per-entry outcome of the admissibility checks.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EntryAdmissibility {
    pub row: usize,
    pub col: usize,
    pub family: Family,
    pub domain: MomentDomain,
    pub unit_interval_in_domain: bool,
    pub zero_interior: bool,
    pub log_abs_finite: bool,
    pub xlogx_finite: bool,
    pub c2_moments: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AdmissibilityReport {
    pub entries: Vec<EntryAdmissibility>,
    pub unit_interval_in_domain: bool,
    pub zero_interior: bool,
    pub log_abs_finite: bool,
    pub xlogx_finite: bool,
    /// Moment functions are `C^2` on `s >= 0` (closed forms are analytic).
    pub c2_moments: bool,
    /// All `d^2` laws are point masses at a common value.
    pub degenerate: bool,
    /// At least one entry is a point mass.
    pub has_degenerate_entry: bool,
}

impl AdmissibilityReport {
    /// Moment conditions hold; degeneracy is reported separately.
    pub fn passes(&self) -> bool {
        self.unit_interval_in_domain
            && self.zero_interior
            && self.log_abs_finite
            && self.xlogx_finite
            && self.c2_moments
    }
}

/// Moment and regularity conditions, entry by entry.
///
/// For the shipped families `E|log xi|` and `E|xi log xi|` are finite by
/// construction (bounded support or Gaussian log); the report records this.
pub fn check_conditions(model: &ModelSpec) -> AdmissibilityReport {
    let entries: Vec<EntryAdmissibility> = model
        .laws()
        .map(|((row, col), law)| {
            let domain = law.domain();
            EntryAdmissibility {
                row,
                col,
                family: law.family(),
                domain,
                unit_interval_in_domain: domain.contains_unit_interval(),
                zero_interior: domain.zero_interior(),
                log_abs_finite: true,
                xlogx_finite: true,
                c2_moments: true,
                degenerate: law.is_degenerate(),
            }
        })
        .collect();
    AdmissibilityReport {
        unit_interval_in_domain: entries.iter().all(|e| e.unit_interval_in_domain),
        zero_interior: entries.iter().all(|e| e.zero_interior),
        log_abs_finite: entries.iter().all(|e| e.log_abs_finite),
        xlogx_finite: entries.iter().all(|e| e.xlogx_finite),
        c2_moments: entries.iter().all(|e| e.c2_moments),
        degenerate: model.all_deterministic_equal(),
        has_degenerate_entry: entries.iter().any(|e| e.degenerate),
        entries,
    }
}
