//! Noiseless BBOB benchmark functions in their default (untransformed) instance.
//!
//! Every instance transformation is the identity: no optimum shift, no value
//! offset, no rotations. Where a function needs a sign vector to be defined
//! (linear slope, attractive sector, Schwefel, Lunacek) the sign is taken as
//! `+1`. Gallagher peak positions and conditionings come from a fixed seed per
//! (function, dimension), so they are deterministic but not COCO-identical.
//!
//! The informal names `CompositeGR`, `GG101me` and `GG21hi` map to BBOB f19
//! (composite Griewank-Rosenbrock), f21 (Gallagher 101 peaks) and f22
//! (Gallagher 21 peaks).

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, uniform};
use crate::Scalar;

/// Default BBOB search domain per coordinate.
pub const DEFAULT_BOUND: f64 = 5.0;

/// Functions evaluated only at 10-D.
const TEN_D_ONLY: [FunctionKind; 10] = [
    FunctionKind::BentCigar,
    FunctionKind::Discus,
    FunctionKind::Ellipsoid,
    FunctionKind::Katsuura,
    FunctionKind::Rastrigin,
    FunctionKind::Rosenbrock,
    FunctionKind::Schaffers,
    FunctionKind::Schwefel,
    FunctionKind::Sphere,
    FunctionKind::Weierstrass,
];

/// Functions evaluated in 5, 10 and 20 dimensions.
const MULTI_D: [FunctionKind; 12] = [
    FunctionKind::AttractiveSector,
    FunctionKind::BuecheRastrigin,
    FunctionKind::CompositeGR,
    FunctionKind::DifferentPowers,
    FunctionKind::LinearSlope,
    FunctionKind::SharpRidge,
    FunctionKind::StepEllipsoidal,
    FunctionKind::RosenbrockRotated,
    FunctionKind::SchaffersIllConditioned,
    FunctionKind::LunacekBiR,
    FunctionKind::GG101me,
    FunctionKind::GG21hi,
];

const MULTI_DIMS: [usize; 3] = [5, 10, 20];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionKind {
    Sphere,
    Ellipsoid,
    Rastrigin,
    BuecheRastrigin,
    LinearSlope,
    AttractiveSector,
    StepEllipsoidal,
    Rosenbrock,
    RosenbrockRotated,
    Discus,
    BentCigar,
    SharpRidge,
    DifferentPowers,
    Weierstrass,
    Schaffers,
    SchaffersIllConditioned,
    CompositeGR,
    Schwefel,
    GG101me,
    GG21hi,
    Katsuura,
    LunacekBiR,
}

impl FunctionKind {
    pub const ALL: [FunctionKind; 22] = [
        FunctionKind::Sphere,
        FunctionKind::Ellipsoid,
        FunctionKind::Rastrigin,
        FunctionKind::BuecheRastrigin,
        FunctionKind::LinearSlope,
        FunctionKind::AttractiveSector,
        FunctionKind::StepEllipsoidal,
        FunctionKind::Rosenbrock,
        FunctionKind::RosenbrockRotated,
        FunctionKind::Discus,
        FunctionKind::BentCigar,
        FunctionKind::SharpRidge,
        FunctionKind::DifferentPowers,
        FunctionKind::Weierstrass,
        FunctionKind::Schaffers,
        FunctionKind::SchaffersIllConditioned,
        FunctionKind::CompositeGR,
        FunctionKind::Schwefel,
        FunctionKind::GG101me,
        FunctionKind::GG21hi,
        FunctionKind::Katsuura,
        FunctionKind::LunacekBiR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionKind::Sphere => "Sphere",
            FunctionKind::Ellipsoid => "Ellipsoid",
            FunctionKind::Rastrigin => "Rastrigin",
            FunctionKind::BuecheRastrigin => "BuecheRastrigin",
            FunctionKind::LinearSlope => "LinearSlope",
            FunctionKind::AttractiveSector => "AttractiveSector",
            FunctionKind::StepEllipsoidal => "StepEllipsoidal",
            FunctionKind::Rosenbrock => "Rosenbrock",
            FunctionKind::RosenbrockRotated => "RosenbrockRotated",
            FunctionKind::Discus => "Discus",
            FunctionKind::BentCigar => "BentCigar",
            FunctionKind::SharpRidge => "SharpRidge",
            FunctionKind::DifferentPowers => "DifferentPowers",
            FunctionKind::Weierstrass => "Weierstrass",
            FunctionKind::Schaffers => "Schaffers",
            FunctionKind::SchaffersIllConditioned => "SchaffersIllConditioned",
            FunctionKind::CompositeGR => "CompositeGR",
            FunctionKind::Schwefel => "Schwefel",
            FunctionKind::GG101me => "GG101me",
            FunctionKind::GG21hi => "GG21hi",
            FunctionKind::Katsuura => "Katsuura",
            FunctionKind::LunacekBiR => "LunacekBiR",
        }
    }

    /// BBOB function number.
    pub fn bbob_id(self) -> u32 {
        match self {
            FunctionKind::Sphere => 1,
            FunctionKind::Ellipsoid => 2,
            FunctionKind::Rastrigin => 3,
            FunctionKind::BuecheRastrigin => 4,
            FunctionKind::LinearSlope => 5,
            FunctionKind::AttractiveSector => 6,
            FunctionKind::StepEllipsoidal => 7,
            FunctionKind::Rosenbrock => 8,
            FunctionKind::RosenbrockRotated => 9,
            FunctionKind::Discus => 11,
            FunctionKind::BentCigar => 12,
            FunctionKind::SharpRidge => 13,
            FunctionKind::DifferentPowers => 14,
            FunctionKind::Weierstrass => 16,
            FunctionKind::Schaffers => 17,
            FunctionKind::SchaffersIllConditioned => 18,
            FunctionKind::CompositeGR => 19,
            FunctionKind::Schwefel => 20,
            FunctionKind::GG101me => 21,
            FunctionKind::GG21hi => 22,
            FunctionKind::Katsuura => 23,
            FunctionKind::LunacekBiR => 24,
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

/// A registry key: function name plus dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctionId {
    pub name: String,
    pub dimension: usize,
}

impl FunctionId {
    pub fn new(name: impl Into<String>, dimension: usize) -> Self {
        Self { name: name.into(), dimension }
    }

    /// `<name>_<dim>`, the form used for directory names and matrix columns.
    pub fn slug(&self) -> String {
        format!("{}_{}", self.name, self.dimension)
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.dimension)
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    /// Accepts `Name:dim`, `Name_dim` or `Name,dim`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, dim) = s
            .rsplit_once([':', '_', ','])
            .ok_or_else(|| Error::InvalidArgument(format!("expected NAME:DIM, got `{s}`")))?;
        let dimension = dim
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad dimension in `{s}`")))?;
        let kind = FunctionKind::from_name(name.trim()).ok_or_else(|| Error::UnknownFunction {
            name: name.trim().to_string(),
            dimension,
        })?;
        Ok(FunctionId::new(kind.name(), dimension))
    }
}

/// All 46 registered (name, dimension) pairs in canonical order.
pub fn registry_list() -> Vec<FunctionId> {
    let mut out: Vec<FunctionId> = TEN_D_ONLY
        .iter()
        .map(|k| FunctionId::new(k.name(), 10))
        .collect();
    for k in MULTI_D {
        for d in MULTI_DIMS {
            out.push(FunctionId::new(k.name(), d));
        }
    }
    out
}

/// Looks up a registered function (name matched case-insensitively).
pub fn lookup<S: Scalar>(name: &str, dimension: usize) -> Result<BenchmarkFunction<S>> {
    let unknown = || Error::UnknownFunction { name: name.to_string(), dimension };
    let kind = FunctionKind::from_name(name).ok_or_else(unknown)?;
    let registered = if TEN_D_ONLY.contains(&kind) {
        dimension == 10
    } else {
        MULTI_DIMS.contains(&dimension)
    };
    if !registered {
        return Err(unknown());
    }
    Ok(BenchmarkFunction::new(kind, dimension))
}

pub fn lookup_id<S: Scalar>(id: &FunctionId) -> Result<BenchmarkFunction<S>> {
    lookup(&id.name, id.dimension)
}

/// Random local optima of the Gallagher functions.
#[derive(Debug, Clone)]
struct Peaks<S> {
    centers: Vec<Vec<S>>,
    weights: Vec<S>,
    /// Diagonal conditioning per peak, already divided by alpha^(1/4).
    scales: Vec<Vec<S>>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkFunction<S> {
    kind: FunctionKind,
    dimension: usize,
    bounds: Vec<(S, S)>,
    peaks: Option<Peaks<S>>,
}

impl<S: Scalar> BenchmarkFunction<S> {
    /// Builds any of the 22 functions at any dimension ≥ 2, registered or not.
    pub fn new(kind: FunctionKind, dimension: usize) -> Self {
        assert!(dimension >= 2, "benchmark functions need at least 2 dimensions");
        let b = S::lit(DEFAULT_BOUND);
        let peaks = match kind {
            FunctionKind::GG101me => Some(gallagher_peaks(kind, dimension, 101)),
            FunctionKind::GG21hi => Some(gallagher_peaks(kind, dimension, 21)),
            _ => None,
        };
        Self {
            kind,
            dimension,
            bounds: vec![(-b, b); dimension],
            peaks,
        }
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn id(&self) -> FunctionId {
        FunctionId::new(self.name(), self.dimension)
    }

    pub fn bounds(&self) -> &[(S, S)] {
        &self.bounds
    }

    /// Per-coordinate width of the search box.
    pub fn bound_widths(&self) -> Vec<S> {
        self.bounds.iter().map(|&(lo, hi)| hi - lo).collect()
    }

    /// Location of the global optimum of this instance (value 0).
    pub fn optimum(&self) -> Vec<S> {
        let d = self.dimension;
        let c = rosen_scale::<S>(d);
        let v = match self.kind {
            FunctionKind::LinearSlope => S::lit(5.0),
            FunctionKind::Schwefel => S::lit(SCHWEFEL_OPT),
            FunctionKind::RosenbrockRotated | FunctionKind::CompositeGR => S::lit(0.5) / c,
            FunctionKind::LunacekBiR => S::lit(LUNACEK_MU0 / 2.0),
            _ => S::zero(),
        };
        vec![v; d]
    }

    pub fn evaluate(&self, x: &[S]) -> Result<S> {
        if x.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: x.len() });
        }
        Ok(self.eval_unchecked(x))
    }

    fn eval_unchecked(&self, x: &[S]) -> S {
        let d = self.dimension;
        let lit = S::lit;
        match self.kind {
            FunctionKind::Sphere => x.iter().map(|&v| v * v).sum(),
            FunctionKind::Ellipsoid => x
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let z = t_osz(v);
                    lit(10.0).powf(lit(6.0) * ratio(i, d)) * z * z
                })
                .sum(),
            FunctionKind::Rastrigin => {
                let t: Vec<S> = x.iter().map(|&v| t_osz(v)).collect();
                let z: Vec<S> = t_asy(&t, lit(0.2))
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| cond(lit(10.0), i, d) * v)
                    .collect();
                rastrigin_sum(&z) + z.iter().map(|&v| v * v).sum()
            }
            FunctionKind::BuecheRastrigin => {
                let z: Vec<S> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let t = t_osz(v);
                        let mut s = cond(lit(10.0), i, d);
                        if t > S::zero() && i % 2 == 0 {
                            s *= lit(10.0);
                        }
                        s * t
                    })
                    .collect();
                rastrigin_sum(&z) + z.iter().map(|&v| v * v).sum::<S>() + lit(100.0) * penalty(x)
            }
            FunctionKind::LinearSlope => {
                let opt = lit(5.0);
                x.iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let z = if v * opt < opt * opt { v } else { opt };
                        let s = lit(10.0).powf(ratio(i, d));
                        opt * s - s * z
                    })
                    .sum()
            }
            FunctionKind::AttractiveSector => {
                let sum: S = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let z = cond(lit(10.0), i, d) * v;
                        let s = if z > S::zero() { lit(100.0) } else { S::one() };
                        (s * z) * (s * z)
                    })
                    .sum();
                t_osz(sum).powf(lit(0.9))
            }
            FunctionKind::StepEllipsoidal => {
                let half = lit(0.5);
                let zhat: Vec<S> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| cond(lit(10.0), i, d) * v)
                    .collect();
                let sum: S = zhat
                    .iter()
                    .enumerate()
                    .map(|(i, &zh)| {
                        let zt = if zh.abs() > half {
                            (half + zh).floor()
                        } else {
                            (half + lit(10.0) * zh).floor() / lit(10.0)
                        };
                        lit(10.0).powf(lit(2.0) * ratio(i, d)) * zt * zt
                    })
                    .sum();
                lit(0.1) * (zhat[0].abs() / lit(1e4)).max(sum) + penalty(x)
            }
            FunctionKind::Rosenbrock => {
                let c = rosen_scale::<S>(d);
                let z: Vec<S> = x.iter().map(|&v| c * v + S::one()).collect();
                rosenbrock_sum(&z)
            }
            FunctionKind::RosenbrockRotated => {
                let c = rosen_scale::<S>(d);
                let z: Vec<S> = x.iter().map(|&v| c * v + lit(0.5)).collect();
                rosenbrock_sum(&z)
            }
            FunctionKind::Discus => {
                let z0 = t_osz(x[0]);
                lit(1e6) * z0 * z0 + x[1..].iter().map(|&v| t_osz(v) * t_osz(v)).sum::<S>()
            }
            FunctionKind::BentCigar => {
                let z = t_asy(x, lit(0.5));
                z[0] * z[0] + lit(1e6) * z[1..].iter().map(|&v| v * v).sum::<S>()
            }
            FunctionKind::SharpRidge => {
                let z: Vec<S> = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| cond(lit(10.0), i, d) * v)
                    .collect();
                z[0] * z[0] + lit(100.0) * z[1..].iter().map(|&v| v * v).sum::<S>().sqrt()
            }
            FunctionKind::DifferentPowers => x
                .iter()
                .enumerate()
                .map(|(i, &v)| v.abs().powf(lit(2.0) + lit(4.0) * ratio(i, d)))
                .sum::<S>()
                .sqrt(),
            FunctionKind::Weierstrass => {
                let two_pi = S::TAU();
                let half = lit(0.5);
                let f0: S = (0..12)
                    .map(|k| half.powi(k) * (two_pi * lit(3.0).powi(k) * half).cos())
                    .sum();
                let inner: S = x
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let z = cond(lit(0.01), i, d) * t_osz(v);
                        (0..12)
                            .map(|k| half.powi(k) * (two_pi * lit(3.0).powi(k) * (z + half)).cos())
                            .sum::<S>()
                    })
                    .sum();
                let dd = S::from_usize_lossy(d);
                lit(10.0) * (inner / dd - f0).powi(3) + lit(10.0) / dd * penalty(x)
            }
            FunctionKind::Schaffers => schaffers(x, lit(10.0)),
            FunctionKind::SchaffersIllConditioned => schaffers(x, lit(1000.0)),
            FunctionKind::CompositeGR => {
                let c = rosen_scale::<S>(d);
                let z: Vec<S> = x.iter().map(|&v| c * v + lit(0.5)).collect();
                let sum: S = z
                    .windows(2)
                    .map(|w| {
                        let s = lit(100.0) * (w[0] * w[0] - w[1]).powi(2) + (w[0] - S::one()).powi(2);
                        s / lit(4000.0) - s.cos()
                    })
                    .sum();
                lit(10.0) / S::from_usize_lossy(d - 1) * sum + lit(10.0)
            }
            FunctionKind::Schwefel => {
                let two_opt = lit(2.0 * SCHWEFEL_OPT);
                let xhat: Vec<S> = x.iter().map(|&v| lit(2.0) * v).collect();
                let mut zhat = xhat.clone();
                for i in 1..d {
                    zhat[i] = xhat[i] + lit(0.25) * (xhat[i - 1] - two_opt);
                }
                let z: Vec<S> = zhat
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| lit(100.0) * (cond(lit(10.0), i, d) * (v - two_opt) + two_opt))
                    .collect();
                let scaled: Vec<S> = z.iter().map(|&v| v / lit(100.0)).collect();
                let sum: S = z.iter().map(|&v| v * v.abs().sqrt().sin()).sum();
                -sum / (lit(100.0) * S::from_usize_lossy(d))
                    + lit(4.189828872724339)
                    + lit(100.0) * penalty(&scaled)
            }
            FunctionKind::GG101me | FunctionKind::GG21hi => {
                let peaks = self.peaks.as_ref().expect("gallagher peaks initialised");
                let inv = S::one() / (lit(2.0) * S::from_usize_lossy(d));
                let best = peaks
                    .centers
                    .iter()
                    .zip(&peaks.weights)
                    .zip(&peaks.scales)
                    .map(|((y, &w), c)| {
                        let q: S = x
                            .iter()
                            .zip(y)
                            .zip(c)
                            .map(|((&xi, &yi), &ci)| ci * (xi - yi) * (xi - yi))
                            .sum();
                        w * (-inv * q).exp()
                    })
                    .fold(S::neg_infinity(), S::max);
                t_osz(lit(10.0) - best).powi(2) + penalty(x)
            }
            FunctionKind::Katsuura => {
                let dd = S::from_usize_lossy(d);
                let expo = lit(10.0) / dd.powf(lit(1.2));
                let pre = lit(10.0) / (dd * dd);
                let prod = x.iter().enumerate().fold(S::one(), |acc, (i, &v)| {
                    let z = cond(lit(100.0), i, d) * v;
                    let s: S = (1..=32)
                        .map(|j| {
                            let p = lit(2.0).powi(j);
                            (p * z - (p * z).round()).abs() / p
                        })
                        .sum();
                    acc * (S::one() + S::from_usize_lossy(i + 1) * s).powf(expo)
                });
                pre * prod - pre + penalty(x)
            }
            FunctionKind::LunacekBiR => {
                let mu0 = lit(LUNACEK_MU0);
                let dd = S::from_usize_lossy(d);
                let s = S::one() - S::one() / (lit(2.0) * (dd + lit(20.0)).sqrt() - lit(8.2));
                let mu1 = -((mu0 * mu0 - S::one()) / s).sqrt();
                let xhat: Vec<S> = x.iter().map(|&v| lit(2.0) * v).collect();
                let s0: S = xhat.iter().map(|&v| (v - mu0) * (v - mu0)).sum();
                let s1: S = xhat.iter().map(|&v| (v - mu1) * (v - mu1)).sum();
                let z: Vec<S> = xhat
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| cond(lit(100.0), i, d) * (v - mu0))
                    .collect();
                let cos_sum: S = z.iter().map(|&v| (S::TAU() * v).cos()).sum();
                s0.min(dd + s * s1) + lit(10.0) * (dd - cos_sum) + lit(1e4) * penalty(x)
            }
        }
    }
}

const SCHWEFEL_OPT: f64 = 4.2096874633 / 2.0;
const LUNACEK_MU0: f64 = 2.5;

fn ratio<S: Scalar>(i: usize, d: usize) -> S {
    if d <= 1 {
        S::zero()
    } else {
        S::from_usize_lossy(i) / S::from_usize_lossy(d - 1)
    }
}

/// Diagonal entry i of the conditioning matrix Λ^alpha.
fn cond<S: Scalar>(alpha: S, i: usize, d: usize) -> S {
    alpha.powf(S::lit(0.5) * ratio(i, d))
}

fn rosen_scale<S: Scalar>(d: usize) -> S {
    S::one().max(S::from_usize_lossy(d).sqrt() / S::lit(8.0))
}

/// Oscillation transform T_osz applied to one coordinate.
fn t_osz<S: Scalar>(x: S) -> S {
    if x == S::zero() {
        return S::zero();
    }
    let xh = x.abs().ln();
    let (c1, c2) = if x > S::zero() {
        (S::lit(10.0), S::lit(7.9))
    } else {
        (S::lit(5.5), S::lit(3.1))
    };
    x.signum() * (xh + S::lit(0.049) * ((c1 * xh).sin() + (c2 * xh).sin())).exp()
}

/// Asymmetry transform T_asy^beta.
fn t_asy<S: Scalar>(x: &[S], beta: S) -> Vec<S> {
    let d = x.len();
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > S::zero() {
                v.powf(S::one() + beta * ratio(i, d) * v.sqrt())
            } else {
                v
            }
        })
        .collect()
}

/// Boundary penalty Σ max(0, |x_i| − 5)².
fn penalty<S: Scalar>(x: &[S]) -> S {
    let b = S::lit(DEFAULT_BOUND);
    x.iter()
        .map(|&v| {
            let e = (v.abs() - b).max(S::zero());
            e * e
        })
        .sum()
}

fn rastrigin_sum<S: Scalar>(z: &[S]) -> S {
    let d = S::from_usize_lossy(z.len());
    let c: S = z.iter().map(|&v| (S::TAU() * v).cos()).sum();
    S::lit(10.0) * (d - c)
}

fn rosenbrock_sum<S: Scalar>(z: &[S]) -> S {
    z.windows(2)
        .map(|w| S::lit(100.0) * (w[0] * w[0] - w[1]).powi(2) + (w[0] - S::one()).powi(2))
        .sum()
}

fn schaffers<S: Scalar>(x: &[S], alpha: S) -> S {
    let d = x.len();
    let z: Vec<S> = t_asy(x, S::lit(0.5))
        .into_iter()
        .enumerate()
        .map(|(i, v)| cond(alpha, i, d) * v)
        .collect();
    let sum: S = z
        .windows(2)
        .map(|w| {
            let s = (w[0] * w[0] + w[1] * w[1]).sqrt();
            let rs = s.sqrt();
            rs + rs * (S::lit(50.0) * s.powf(S::lit(0.2))).sin().powi(2)
        })
        .sum();
    (sum / S::from_usize_lossy(d - 1)).powi(2) + S::lit(10.0) * penalty(x)
}

fn gallagher_peaks<S: Scalar>(kind: FunctionKind, d: usize, count: usize) -> Peaks<S> {
    let mut rng = stream_rng(u64::from(kind.bbob_id()) * 1000 + d as u64, 0);
    let (alpha_first, spread) = if count == 101 {
        (1000.0f64, S::lit(5.0))
    } else {
        (1e6, S::lit(4.9))
    };
    let others = count - 1;
    let mut alphas: Vec<f64> = (0..others)
        .map(|j| 1000f64.powf(2.0 * j as f64 / (others - 1) as f64))
        .collect();
    alphas.shuffle(&mut rng);
    alphas.insert(0, alpha_first);

    let mut centers = vec![vec![S::zero(); d]];
    for _ in 1..count {
        centers.push((0..d).map(|_| uniform(&mut rng, -spread, spread)).collect());
    }
    let mut weights = vec![S::lit(10.0)];
    for i in 1..count {
        weights.push(S::lit(1.1 + 8.0 * (i - 1) as f64 / (others - 1) as f64));
    }
    let scales = alphas
        .iter()
        .map(|&a| {
            let mut perm: Vec<usize> = (0..d).collect();
            perm.shuffle(&mut rng);
            let a = S::lit(a);
            perm.iter()
                .map(|&p| cond(a, p, d) / a.powf(S::lit(0.25)))
                .collect()
        })
        .collect();
    Peaks { centers, weights, scales }
}

/// Evaluation budget of a single run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalBudget {
    pub max_evaluations: usize,
    pub used: usize,
}

impl EvalBudget {
    pub fn new(max_evaluations: usize) -> Self {
        Self { max_evaluations, used: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.max_evaluations - self.used
    }

    pub fn exhausted(&self) -> bool {
        self.used >= self.max_evaluations
    }
}

impl Default for EvalBudget {
    fn default() -> Self {
        Self::new(500)
    }
}

/// A benchmark function bound to the budget of one run.
#[derive(Debug, Clone)]
pub struct Objective<'a, S> {
    function: &'a BenchmarkFunction<S>,
    budget: EvalBudget,
}

impl<'a, S: Scalar> Objective<'a, S> {
    pub fn new(function: &'a BenchmarkFunction<S>, max_evaluations: usize) -> Self {
        Self { function, budget: EvalBudget::new(max_evaluations) }
    }

    /// Continues charging an existing budget.
    pub fn with_budget(function: &'a BenchmarkFunction<S>, budget: EvalBudget) -> Self {
        Self { function, budget }
    }

    pub fn function(&self) -> &'a BenchmarkFunction<S> {
        self.function
    }

    pub fn budget(&self) -> EvalBudget {
        self.budget
    }

    /// Evaluates `x`, charging exactly one evaluation.
    pub fn evaluate(&mut self, x: &[S]) -> Result<S> {
        if self.budget.exhausted() {
            return Err(Error::BudgetExhausted { max: self.budget.max_evaluations });
        }
        let v = self.function.evaluate(x)?;
        self.budget.used += 1;
        Ok(v)
    }
}
