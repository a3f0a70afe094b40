use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::parse::{Expr, ExprKind};
use super::SimvolError;

/// Largest volume of an ideal triangle.
pub const V2: f64 = PI;
/// Volume of the regular ideal tetrahedron, `3 Lambda(pi/3)`.
pub const V3: f64 = 1.014_941_606_409_653_6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantOrigin {
    /// Shipped value with an independent derivation.
    Registry,
    /// Supplied by the caller.
    Override,
    /// Configured default with no known derivation.
    ConfiguredDefault,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantUse {
    pub name: String,
    pub value: f64,
    pub origin: ConstantOrigin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rule: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constants: Vec<ConstantUse>,
}

/// `lo <= ||M|| <= hi` for a manifold of dimension `dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInterval {
    pub lo: f64,
    #[serde(with = "extended")]
    pub hi: f64,
    pub dim: usize,
    pub vol: Option<f64>,
    pub trace: Vec<TraceStep>,
}

impl BoundInterval {
    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    /// Whether any step used a constant that is not derived.
    pub fn uses_configured_constants(&self) -> bool {
        self.trace
            .iter()
            .flat_map(|s| &s.constants)
            .any(|c| c.origin == ConstantOrigin::ConfiguredDefault)
    }
}

/// `+inf` is written as the string `"inf"`, since JSON has no infinity.
mod extended {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() && *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

/// Constants used by [`evaluate`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// `v_n` overrides by dimension.
    pub volume_constants: BTreeMap<usize, f64>,
    /// Upper product constants `C(n)` by total dimension.
    pub product_constants: BTreeMap<usize, f64>,
}

impl EvalConfig {
    fn volume_constant(&self, n: usize) -> Result<ConstantUse, SimvolError> {
        let name = format!("v{n}");
        if let Some(&value) = self.volume_constants.get(&n) {
            return Ok(ConstantUse {
                name,
                value,
                origin: ConstantOrigin::Override,
            });
        }
        let value = match n {
            2 => V2,
            3 => V3,
            _ => return Err(SimvolError::UnknownConstant { dim: n }),
        };
        Ok(ConstantUse {
            name,
            value,
            origin: ConstantOrigin::Registry,
        })
    }

    fn product_constant(&self, n: usize, n1: usize) -> ConstantUse {
        let name = format!("C({n})");
        match self.product_constants.get(&n) {
            Some(&value) => ConstantUse {
                name,
                value,
                origin: ConstantOrigin::Override,
            },
            None => ConstantUse {
                name,
                value: binomial(n as u64, n1 as u64) as f64,
                origin: ConstantOrigin::ConfiguredDefault,
            },
        }
    }
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// `0 * inf = 0`: a zero bound stays zero whatever the other factor.
fn mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

pub fn evaluate(e: &Expr, config: &EvalConfig) -> Result<BoundInterval, SimvolError> {
    match &e.kind {
        ExprKind::Surface { genus } => {
            let value = 4.0 * (*genus as f64) - 4.0;
            Ok(BoundInterval {
                lo: value,
                hi: value,
                dim: 2,
                vol: Some(4.0 * PI * (*genus as f64 - 1.0)),
                trace: vec![TraceStep {
                    rule: "surface".into(),
                    detail: format!("genus {genus}: ||S|| = 2|chi| = {value}"),
                    constants: Vec::new(),
                }],
            })
        }
        ExprKind::Hyperbolic { n, vol } => {
            let c = config.volume_constant(*n)?;
            let value = vol / c.value;
            Ok(BoundInterval {
                lo: value,
                hi: value,
                dim: *n,
                vol: Some(*vol),
                trace: vec![TraceStep {
                    rule: "proportionality".into(),
                    detail: format!("||M|| = vol / v{n} = {vol} / {}", c.value),
                    constants: vec![c],
                }],
            })
        }
        ExprKind::Opaque { dim, lo, hi, vol } => Ok(BoundInterval {
            lo: *lo,
            hi: *hi,
            dim: *dim,
            vol: *vol,
            trace: vec![TraceStep {
                rule: "opaque".into(),
                detail: format!("given interval [{lo}, {hi}]"),
                constants: Vec::new(),
            }],
        }),
        ExprKind::Product { left, right } => {
            let a = evaluate(left, config)?;
            let b = evaluate(right, config)?;
            let n = a.dim + b.dim;
            let c = config.product_constant(n, a.dim);
            let lo = mul(a.lo, b.lo);
            let hi = mul(c.value, mul(a.hi, b.hi));
            let mut trace = a.trace;
            trace.extend(b.trace);
            trace.push(TraceStep {
                rule: "product".into(),
                detail: format!("[lo1 lo2, C({n}) hi1 hi2] = [{lo}, {hi}]"),
                constants: vec![c],
            });
            Ok(BoundInterval {
                lo,
                hi,
                dim: n,
                vol: a.vol.zip(b.vol).map(|(x, y)| x * y),
                trace,
            })
        }
        ExprKind::ConnectSum { left, right } => {
            let a = evaluate(left, config)?;
            let b = evaluate(right, config)?;
            let lo = a.lo + b.lo;
            let hi = a.hi + b.hi;
            let mut trace = a.trace;
            trace.extend(b.trace);
            trace.push(TraceStep {
                rule: "connect-sum".into(),
                detail: format!("additivity: [{lo}, {hi}]"),
                constants: Vec::new(),
            });
            Ok(BoundInterval {
                lo,
                hi,
                dim: a.dim,
                vol: None,
                trace,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum DegreeBound {
    Bounded(u64),
    /// The source has no finite upper bound.
    Unbounded,
}

/// Bound on `|deg f|` for maps `N -> M`: `floor(||N|| / ||M||)` taken at the
/// pessimistic ends of the intervals. The quotient is rounded up by a relative
/// `1e-12` before the floor so that rounding never drops an integer bound.
pub fn degree_bound(source: &BoundInterval, target: &BoundInterval) -> Result<DegreeBound, SimvolError> {
    if source.dim != target.dim {
        return Err(SimvolError::DimensionMismatch {
            source_dim: source.dim,
            target_dim: target.dim,
        });
    }
    if source.hi == 0.0 {
        return Ok(DegreeBound::Bounded(0));
    }
    if !(target.lo > 0.0) {
        return Err(SimvolError::Indeterminate);
    }
    if source.hi.is_infinite() {
        return Ok(DegreeBound::Unbounded);
    }
    let q = source.hi / target.lo;
    Ok(DegreeBound::Bounded((q * (1.0 + 1e-12)).floor() as u64))
}

/// `2^{-dim} ||M||` at the upper end: bounds the Euler number of flat
/// `dim`-plane bundles over `M`.
pub fn euler_bound(m: &BoundInterval) -> f64 {
    m.hi / 2f64.powi(m.dim as i32)
}
