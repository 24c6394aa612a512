//! Parameter layouts and the constrained <-> unconstrained transforms.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Map from an unconstrained coordinate block to the model's natural scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    /// Real-valued, no transform.
    Identity,
    /// Positive scalar: `x = exp(u)`.
    Log,
    /// Bounded scalar on `(0, upper)`: `x = upper * logistic(u)`.
    ScaledLogit { upper: f64 },
    /// Probability simplex of K weights from K-1 free coordinates, last
    /// coordinate pinned to 0 before the softmax.
    Simplex,
    /// Discrete allocation label stored as its 0-based index.
    Label,
}

impl Transform {
    /// Constrained length for `free` unconstrained coordinates.
    fn constrained_len(&self, free: usize) -> usize {
        match self {
            Transform::Simplex => free + 1,
            _ => free,
        }
    }

    fn free_len(&self, constrained: usize) -> usize {
        match self {
            Transform::Simplex => constrained - 1,
            _ => constrained,
        }
    }

    /// Constrain one block; returns the log absolute Jacobian determinant.
    pub fn forward(&self, u: &[f64], out: &mut Vec<f64>) -> f64 {
        match self {
            Transform::Identity | Transform::Label => {
                out.extend_from_slice(u);
                0.0
            }
            Transform::Log => {
                out.extend(u.iter().map(|v| v.exp()));
                u.iter().sum()
            }
            Transform::ScaledLogit { upper } => {
                let mut lj = 0.0;
                for &v in u {
                    let (s, ln_s, ln_1ms) = logistic_parts(v);
                    out.push(upper * s);
                    lj += upper.ln() + ln_s + ln_1ms;
                }
                lj
            }
            Transform::Simplex => {
                let m = u.iter().copied().fold(0.0_f64, f64::max);
                let denom = (-m).exp() + u.iter().map(|v| (v - m).exp()).sum::<f64>();
                let ln_denom = m + denom.ln();
                let mut lj = 0.0;
                for &v in u {
                    let lp = v - ln_denom;
                    out.push(lp.exp());
                    lj += lp;
                }
                out.push((-ln_denom).exp());
                lj - ln_denom
            }
        }
    }

    /// Inverse of [`Transform::forward`].
    pub fn inverse(&self, x: &[f64], out: &mut Vec<f64>) -> Result<()> {
        match self {
            Transform::Identity | Transform::Label => out.extend_from_slice(x),
            Transform::Log => {
                for &v in x {
                    if !(v > 0.0) {
                        return Err(Error::InvalidParameter(format!("expected positive value, got {v}")));
                    }
                    out.push(v.ln());
                }
            }
            Transform::ScaledLogit { upper } => {
                for &v in x {
                    if !(v > 0.0 && v < *upper) {
                        return Err(Error::InvalidParameter(format!("expected value in (0, {upper}), got {v}")));
                    }
                    let s = v / upper;
                    out.push(s.ln() - (-s).ln_1p());
                }
            }
            Transform::Simplex => {
                let last = *x.last().ok_or_else(|| Error::Empty("simplex".into()))?;
                if x.iter().any(|v| !(*v > 0.0)) || (x.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter("expected a point in the open simplex".into()));
                }
                for &v in &x[..x.len() - 1] {
                    out.push(v.ln() - last.ln());
                }
            }
        }
        Ok(())
    }
}

/// `(s, ln s, ln(1-s))` for `s = logistic(v)`, computed without overflow.
pub(crate) fn logistic_parts(v: f64) -> (f64, f64, f64) {
    let ln_s = -softplus(-v);
    let ln_1ms = -softplus(v);
    (ln_s.exp(), ln_s, ln_1ms)
}

/// `ln(1 + e^x)`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// A named block of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub transform: Transform,
    /// Offset into the unconstrained vector.
    pub offset: usize,
    /// Number of unconstrained coordinates.
    pub free_len: usize,
    /// Offset into the constrained vector.
    pub constrained_offset: usize,
    /// Number of constrained coordinates.
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.free_len
    }

    pub fn constrained_range(&self) -> std::ops::Range<usize> {
        self.constrained_offset..self.constrained_offset + self.len
    }

    /// Whether draws of this block are recorded in chains.
    pub fn monitored(&self) -> bool {
        self.transform != Transform::Label
    }

    fn element_name(&self, i: usize) -> String {
        if self.len == 1 {
            self.name.clone()
        } else {
            format!("{}[{}]", self.name, i + 1)
        }
    }
}

/// Ordered list of parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    blocks: Vec<Block>,
    dim: usize,
    constrained_dim: usize,
}

impl Layout {
    /// Build from `(name, transform, constrained length)` triples.
    pub fn new<S: Into<String>>(specs: impl IntoIterator<Item = (S, Transform, usize)>) -> Self {
        let mut blocks = Vec::new();
        let (mut off, mut coff) = (0, 0);
        for (name, transform, len) in specs {
            let free_len = transform.free_len(len);
            debug_assert_eq!(transform.constrained_len(free_len), len);
            blocks.push(Block {
                name: name.into(),
                transform,
                offset: off,
                free_len,
                constrained_offset: coff,
                len,
            });
            off += free_len;
            coff += len;
        }
        Self { blocks, dim: off, constrained_dim: coff }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    /// Unconstrained dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constrained_dim(&self) -> usize {
        self.constrained_dim
    }

    pub fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() == self.dim {
            Ok(())
        } else {
            Err(Error::Shape { expected: self.dim, got: u.len() })
        }
    }

    /// Constrained values and the total log-Jacobian.
    pub fn constrain(&self, u: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check(u)?;
        let mut out = Vec::with_capacity(self.constrained_dim);
        let mut lj = 0.0;
        for b in &self.blocks {
            lj += b.transform.forward(&u[b.range()], &mut out);
        }
        Ok((out, lj))
    }

    pub fn unconstrain(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.constrained_dim {
            return Err(Error::Shape { expected: self.constrained_dim, got: x.len() });
        }
        let mut out = Vec::with_capacity(self.dim);
        for b in &self.blocks {
            b.transform.inverse(&x[b.constrained_range()], &mut out)?;
        }
        Ok(out)
    }

    /// Constrained values of monitored blocks only (labels dropped).
    pub fn monitored_values(&self, u: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.constrained_dim);
        for b in self.blocks.iter().filter(|b| b.monitored()) {
            b.transform.forward(&u[b.range()], &mut out);
        }
        out
    }

    pub fn monitored_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .filter(|b| b.monitored())
            .flat_map(|b| (0..b.len).map(move |i| b.element_name(i)))
            .collect()
    }

    /// Offset of a monitored block inside the monitored vector.
    pub fn monitored_range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let mut off = 0;
        for b in self.blocks.iter().filter(|b| b.monitored()) {
            if b.name == name {
                return Some(off..off + b.len);
            }
            off += b.len;
        }
        None
    }
}

/// Parameter vector on the unconstrained scale, tied to its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVec {
    pub values: Vec<f64>,
    pub layout: Arc<Layout>,
}

impl ParamVec {
    pub fn new(layout: Arc<Layout>, values: Vec<f64>) -> Result<Self> {
        layout.check(&values)?;
        Ok(Self { values, layout })
    }

    pub fn from_constrained(layout: Arc<Layout>, x: &[f64]) -> Result<Self> {
        let values = layout.unconstrain(x)?;
        Ok(Self { values, layout })
    }

    pub fn constrained(&self) -> Vec<f64> {
        self.layout.constrain(&self.values).expect("length checked at construction").0
    }

    pub fn log_jacobian(&self) -> f64 {
        self.layout.constrain(&self.values).expect("length checked at construction").1
    }
}
