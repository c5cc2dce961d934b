use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ensure, ensure_len, Result};

/// Closed axis-aligned box `[lower, upper]` with positive volume.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        ensure_len("box corners", lower.len(), upper.len())?;
        ensure(!lower.is_empty(), || "box must have at least one dimension".into())?;
        ensure(
            lower
                .iter()
                .zip(&upper)
                .all(|(l, u)| l.is_finite() && u.is_finite() && l < u),
            || format!("box needs lower < upper in every coordinate, got {lower:?} .. {upper:?}"),
        )?;
        Ok(Self { lower, upper })
    }

    /// `[0, 1]^d`.
    pub fn unit(d: usize) -> Self {
        Self {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(p, (l, u))| l <= p && p <= u)
    }

    /// Volume of the intersection with `[lo, hi]`.
    pub fn overlap(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let mut vol = 1.0;
        for i in 0..self.dim() {
            let w = self.upper[i].min(hi[i]) - self.lower[i].max(lo[i]);
            if w <= 0.0 {
                return 0.0;
            }
            vol *= w;
        }
        vol
    }

    fn interiors_meet(&self, other: &AxisBox) -> bool {
        self.overlap(&other.lower, &other.upper) > 0.0
    }

    fn scaled(&self, factors: &[f64]) -> AxisBox {
        AxisBox {
            lower: self.lower.iter().zip(factors).map(|(v, f)| v * f).collect(),
            upper: self.upper.iter().zip(factors).map(|(v, f)| v * f).collect(),
        }
    }
}

/// A finite union of pairwise interior-disjoint closed boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanSet {
    boxes: Vec<AxisBox>,
}

impl JordanSet {
    pub fn new(boxes: Vec<AxisBox>) -> Result<Self> {
        ensure(!boxes.is_empty(), || "a set needs at least one box".into())?;
        let d = boxes[0].dim();
        for b in &boxes {
            ensure_len("box dimension", d, b.dim())?;
        }
        for (i, a) in boxes.iter().enumerate() {
            for (j, b) in boxes.iter().enumerate().skip(i + 1) {
                ensure(!a.interiors_meet(b), || format!("boxes {i} and {j} overlap"))?;
            }
        }
        Ok(Self { boxes })
    }

    /// Skips the quadratic disjointness check for boxes produced by a
    /// partition.
    pub(crate) fn from_partition(boxes: Vec<AxisBox>) -> Self {
        Self { boxes }
    }

    pub fn unit_cube(d: usize) -> Self {
        Self {
            boxes: vec![AxisBox::unit(d)],
        }
    }

    pub fn from_box(b: AxisBox) -> Self {
        Self { boxes: vec![b] }
    }

    pub fn boxes(&self) -> &[AxisBox] {
        &self.boxes
    }

    pub fn dim(&self) -> usize {
        self.boxes[0].dim()
    }

    /// Lebesgue measure `λ(J)`.
    pub fn measure(&self) -> f64 {
        self.boxes.iter().map(AxisBox::volume).sum()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.boxes.iter().any(|b| b.contains(point))
    }

    pub fn overlap(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.boxes.iter().map(|b| b.overlap(lo, hi)).sum()
    }

    pub fn bounding_box(&self) -> AxisBox {
        let d = self.dim();
        let mut lower = vec![f64::INFINITY; d];
        let mut upper = vec![f64::NEG_INFINITY; d];
        for b in &self.boxes {
            for i in 0..d {
                lower[i] = lower[i].min(b.lower[i]);
                upper[i] = upper[i].max(b.upper[i]);
            }
        }
        AxisBox { lower, upper }
    }

    /// `J^x_m`: every coordinate `i` multiplied by `xᵢ · mᵢ`.
    pub fn scale(&self, x: &[f64], m_values: &[f64]) -> Result<Self> {
        ensure_len("scale factors x", self.dim(), x.len())?;
        ensure_len("scale factors m", self.dim(), m_values.len())?;
        ensure(x.iter().chain(m_values).all(|&v| v > 0.0 && v.is_finite()), || {
            format!("scale factors must be positive, got x = {x:?}, m = {m_values:?}")
        })?;
        let factors: Vec<f64> = x.iter().zip(m_values).map(|(a, b)| a * b).collect();
        Ok(Self {
            boxes: self.boxes.iter().map(|b| b.scaled(&factors)).collect(),
        })
    }
}

/// Serialized as a list of `[lower, upper]` corner pairs.
impl Serialize for JordanSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[&[f64]; 2]> = self.boxes.iter().map(|b| [b.lower(), b.upper()]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for JordanSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs: Vec<[Vec<f64>; 2]> = Vec::deserialize(d)?;
        let boxes = pairs
            .into_iter()
            .map(|[lo, hi]| AxisBox::new(lo, hi))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        JordanSet::new(boxes).map_err(serde::de::Error::custom)
    }
}
