use serde::Serialize;

use super::jordan::{AxisBox, JordanSet};
use crate::error::{ensure, Error, Result};

/// Default cap on dyadic cells examined at one refinement level.
pub const CELL_BUDGET: u128 = 1 << 24;

/// Position of a partition cell relative to a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Inside,
    Outside,
    Boundary,
}

/// A bounded region that can classify axis-aligned cells.
///
/// `Inside` must imply the cell lies in the region and `Outside` must imply
/// the cell misses it up to a null set; anything uncertain is `Boundary`.
pub trait Region {
    fn dim(&self) -> usize;
    fn bounding_box(&self) -> AxisBox;
    fn classify(&self, lo: &[f64], hi: &[f64]) -> CellClass;
}

impl Region for JordanSet {
    fn dim(&self) -> usize {
        JordanSet::dim(self)
    }

    fn bounding_box(&self) -> AxisBox {
        JordanSet::bounding_box(self)
    }

    fn classify(&self, lo: &[f64], hi: &[f64]) -> CellClass {
        let cell: f64 = lo.iter().zip(hi).map(|(l, h)| h - l).product();
        let covered = self.overlap(lo, hi);
        if covered <= 0.0 {
            CellClass::Outside
        } else if covered >= cell * (1.0 - 1e-12) {
            CellClass::Inside
        } else {
            CellClass::Boundary
        }
    }
}

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        ensure(!center.is_empty(), || "ball needs at least one dimension".into())?;
        ensure(radius > 0.0 && radius.is_finite(), || {
            format!("radius must be positive, got {radius}")
        })?;
        Ok(Self { center, radius })
    }
}

impl Region for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn bounding_box(&self) -> AxisBox {
        AxisBox::new(
            self.center.iter().map(|c| c - self.radius).collect(),
            self.center.iter().map(|c| c + self.radius).collect(),
        )
        .expect("positive radius gives a proper box")
    }

    fn classify(&self, lo: &[f64], hi: &[f64]) -> CellClass {
        let mut near = 0.0;
        let mut far = 0.0;
        for ((&c, &l), &h) in self.center.iter().zip(lo).zip(hi) {
            let dn = if c < l {
                l - c
            } else if c > h {
                c - h
            } else {
                0.0
            };
            let df = (c - l).abs().max((h - c).abs());
            near += dn * dn;
            far += df * df;
        }
        let r2 = self.radius * self.radius;
        if far <= r2 {
            CellClass::Inside
        } else if near >= r2 {
            CellClass::Outside
        } else {
            CellClass::Boundary
        }
    }
}

/// A region given by a membership predicate inside a bounding box.
///
/// Cells are classified from a `probes^d` lattice of test points including
/// the corners, so thin features between probes can be misclassified.
pub struct PredicateRegion<F> {
    bounds: AxisBox,
    probes: usize,
    predicate: F,
}

impl<F: Fn(&[f64]) -> bool> PredicateRegion<F> {
    pub fn new(bounds: AxisBox, probes: usize, predicate: F) -> Result<Self> {
        ensure(probes >= 2, || format!("need at least 2 probes per axis, got {probes}"))?;
        Ok(Self {
            bounds,
            probes,
            predicate,
        })
    }
}

impl<F: Fn(&[f64]) -> bool> Region for PredicateRegion<F> {
    fn dim(&self) -> usize {
        self.bounds.dim()
    }

    fn bounding_box(&self) -> AxisBox {
        self.bounds.clone()
    }

    fn classify(&self, lo: &[f64], hi: &[f64]) -> CellClass {
        let d = lo.len();
        let total = self.probes.pow(d as u32);
        let mut point = vec![0.0; d];
        let (mut hits, mut misses) = (0usize, 0usize);
        for idx in 0..total {
            let mut rest = idx;
            for i in 0..d {
                let k = rest % self.probes;
                rest /= self.probes;
                point[i] = lo[i] + (hi[i] - lo[i]) * k as f64 / (self.probes - 1) as f64;
            }
            if (self.predicate)(&point) {
                hits += 1;
            } else {
                misses += 1;
            }
            if hits > 0 && misses > 0 {
                return CellClass::Boundary;
            }
        }
        if misses == 0 {
            CellClass::Inside
        } else {
            CellClass::Outside
        }
    }
}

/// Inner and outer box unions `L ⊆ target ⊆ U` on a dyadic partition.
#[derive(Debug, Clone, Serialize)]
pub struct BoxApproximation {
    /// `None` when no cell lies fully inside the target.
    pub inner: Option<JordanSet>,
    pub outer: JordanSet,
    pub inner_measure: f64,
    pub outer_measure: f64,
    pub gap: f64,
    /// Cells per axis are `2^level`.
    pub level: u32,
}

/// Refines a uniform dyadic partition of the region's bounding box until
/// `λ(U) − λ(L) ≤ eps`.
pub fn inner_outer_approx<R: Region + ?Sized>(region: &R, eps: f64, max_cells: u128) -> Result<BoxApproximation> {
    ensure(eps > 0.0 && eps.is_finite(), || {
        format!("eps must be positive, got {eps}")
    })?;
    let d = region.dim();
    let bounds = region.bounding_box();
    ensure(bounds.dim() == d, || {
        "bounding box dimension disagrees with region".into()
    })?;
    let mut level = 0u32;
    loop {
        let per_axis = 1u128 << level;
        let cells = per_axis.checked_pow(d as u32).unwrap_or(u128::MAX);
        if cells > max_cells {
            return Err(Error::Budget {
                what: "dyadic approximation",
                required: cells,
                budget: max_cells,
            });
        }
        let approx = classify_level(region, &bounds, level);
        if approx.gap <= eps {
            return Ok(approx);
        }
        level += 1;
    }
}

fn classify_level<R: Region + ?Sized>(region: &R, bounds: &AxisBox, level: u32) -> BoxApproximation {
    let d = bounds.dim();
    let n = 1usize << level;
    let edge = |i: usize, k: usize| {
        let (l, u) = (bounds.lower()[i], bounds.upper()[i]);
        if k == n {
            u
        } else {
            l + (u - l) * k as f64 / n as f64
        }
    };
    let rows = n.pow(d as u32 - 1);
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for row in 0..rows {
        let mut rest = row;
        for i in (0..d - 1).rev() {
            let k = rest % n;
            rest /= n;
            lo[i] = edge(i, k);
            hi[i] = edge(i, k + 1);
        }
        let mut inner_run: Option<usize> = None;
        let mut outer_run: Option<usize> = None;
        for k in 0..=n {
            let class = if k < n {
                lo[d - 1] = edge(d - 1, k);
                hi[d - 1] = edge(d - 1, k + 1);
                region.classify(&lo, &hi)
            } else {
                CellClass::Outside
            };
            let is_inner = class == CellClass::Inside;
            let is_outer = class != CellClass::Outside;
            close_run(&mut inner_run, is_inner, k, &lo, &hi, d, &edge, &mut inner);
            close_run(&mut outer_run, is_outer, k, &lo, &hi, d, &edge, &mut outer);
        }
    }
    let inner_measure: f64 = inner.iter().map(AxisBox::volume).sum();
    let outer_measure: f64 = outer.iter().map(AxisBox::volume).sum();
    BoxApproximation {
        inner: (!inner.is_empty()).then(|| JordanSet::from_partition(inner)),
        outer: JordanSet::from_partition(outer),
        inner_measure,
        outer_measure,
        gap: outer_measure - inner_measure,
        level,
    }
}

/// Tracks a run of consecutive selected cells along the last axis and emits
/// it as one box when it ends.
#[allow(clippy::too_many_arguments)]
fn close_run(
    run: &mut Option<usize>,
    selected: bool,
    k: usize,
    lo: &[f64],
    hi: &[f64],
    d: usize,
    edge: &impl Fn(usize, usize) -> f64,
    out: &mut Vec<AxisBox>,
) {
    match (*run, selected) {
        (None, true) => *run = Some(k),
        (Some(start), false) => {
            let mut lower = lo.to_vec();
            let mut upper = hi.to_vec();
            lower[d - 1] = edge(d - 1, start);
            upper[d - 1] = edge(d - 1, k);
            out.push(AxisBox::new(lower, upper).expect("dyadic cells have positive width"));
            *run = None;
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn box_union_is_exact_at_first_aligned_level() {
        let j = JordanSet::new(vec![
            AxisBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(),
            AxisBox::new(vec![1.0, 0.0], vec![2.0, 2.0]).unwrap(),
        ])
        .unwrap();
        let a = inner_outer_approx(&j, 1e-9, CELL_BUDGET).unwrap();
        assert_eq!(a.gap, 0.0);
        assert_eq!(a.level, 1);
        assert!((a.inner_measure - 3.0).abs() < 1e-12);
    }

    #[test]
    fn disk_is_bracketed() {
        let disk = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
        let a = inner_outer_approx(&disk, 0.05, CELL_BUDGET).unwrap();
        assert!(a.inner_measure <= PI && PI <= a.outer_measure);
        assert!(a.gap <= 0.05);
        for b in a.inner.as_ref().unwrap().boxes() {
            let far: f64 = b
                .lower()
                .iter()
                .zip(b.upper())
                .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                .sum();
            assert!(far <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn gap_shrinks_with_eps() {
        let disk = Ball::new(vec![0.5, 0.5], 0.5).unwrap();
        let coarse = inner_outer_approx(&disk, 0.1, CELL_BUDGET).unwrap();
        let fine = inner_outer_approx(&disk, 0.01, CELL_BUDGET).unwrap();
        assert!(fine.gap <= coarse.gap);
        assert!(fine.inner_measure >= coarse.inner_measure);
        assert!(fine.outer_measure <= coarse.outer_measure);
    }

    #[test]
    fn predicate_region_and_budget() {
        let bounds = AxisBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let region = PredicateRegion::new(bounds, 3, |p: &[f64]| p[0] * p[0] + p[1] * p[1] <= 1.0).unwrap();
        let a = inner_outer_approx(&region, 0.05, CELL_BUDGET).unwrap();
        assert!(a.inner_measure <= PI && PI <= a.outer_measure);
        let err = inner_outer_approx(&region, 1e-9, 1 << 10).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }
}
