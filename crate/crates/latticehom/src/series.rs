//! Poincaré series of graded F[[U]]-modules.
//!
//! The homology dimensions of a complex at every truncation level determine
//! its module decomposition. The two-variable series P(s,t) packages those
//! dimensions; per summand it has a closed form with denominator
//! (1-s)(1-st^2), and clearing the denominator leaves a polynomial in s
//! whose leading coefficients identify the summands one by one.

use std::collections::BTreeMap;

use num::rational::Ratio;
use thiserror::Error;

use crate::homology::{ModuleDecomposition, SummandKind};
use crate::matrix::Rat;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series is not in the span of module series (residue {residue} at s^{sdeg}, grading {grading})")]
    NotInSpan { sdeg: usize, grading: Rat, residue: i64 },
    #[error("s-degree cutoff {cutoff} too small for a length-{len} summand")]
    CutoffTooSmall { len: u32, cutoff: usize },
}

/// P(s,t) truncated in s: `coeffs[j]` maps a Maslov grading m to the
/// coefficient of s^j t^{-m}, which is the dimension of the homology at
/// truncation n = j + 1 in grading m. The one-off shift between s-degree
/// and truncation level is what makes the closed forms below exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoincareSeries {
    pub coeffs: Vec<BTreeMap<Rat, i64>>,
}

/// A module decomposition with the delta-grading forgotten: the series only
/// sees Maslov gradings, so reconstruction recovers exactly this much.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ModuleShape {
    pub summands: BTreeMap<(Rat, SummandKind), usize>,
}

impl From<&ModuleDecomposition> for ModuleShape {
    fn from(dec: &ModuleDecomposition) -> Self {
        let mut summands = BTreeMap::new();
        for (&(_, d, kind), &mult) in &dec.summands {
            *summands.entry((d, kind)).or_insert(0) += mult;
        }
        ModuleShape { summands }
    }
}

impl ModuleShape {
    /// Largest finite summand length, if any.
    pub fn max_finite_len(&self) -> Option<u32> {
        self.summands
            .keys()
            .filter_map(|&(_, kind)| match kind {
                SummandKind::Finite(k) => Some(k),
                SummandKind::Tower => None,
            })
            .max()
    }
}

impl PoincareSeries {
    pub fn zero(s_cutoff: usize) -> Self {
        PoincareSeries { coeffs: vec![BTreeMap::new(); s_cutoff + 1] }
    }

    pub fn s_cutoff(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn add(&mut self, j: usize, m: Rat, c: i64) {
        let e = self.coeffs[j].entry(m).or_insert(0);
        *e += c;
        if *e == 0 {
            self.coeffs[j].remove(&m);
        }
    }

    pub fn add_series(&mut self, other: &PoincareSeries) {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (j, terms) in other.coeffs.iter().enumerate() {
            for (&m, &c) in terms {
                self.add(j, m, c);
            }
        }
    }
}

fn two() -> Rat {
    Ratio::from_integer(2)
}

fn add_summand(out: &mut PoincareSeries, d: Rat, kind: SummandKind, mult: i64) {
    let nn = out.coeffs.len();
    match kind {
        // t^{-d} / ((1-s)(1-st^2)): at s^j one dimension in each grading
        // d, d-2, ..., d-2j
        SummandKind::Tower => {
            for j in 0..nn {
                for i in 0..=j {
                    out.add(j, d - two() * Ratio::from_integer(i as i128), mult);
                }
            }
        }
        // t^{-d} (1 - (st^2)^k + t^{2k+1}(1 - s^k)) / ((1-s)(1-st^2)):
        // the quotient part tops at d, the Tor part at d - 2k - 1
        SummandKind::Finite(k) => {
            let k = k as usize;
            let tor_top = d - two() * Ratio::from_integer(k as i128) - Ratio::from_integer(1);
            for j in 0..nn {
                for i in 0..=j.min(k - 1) {
                    out.add(j, d - two() * Ratio::from_integer(i as i128), mult);
                }
                for l in j.saturating_sub(k - 1)..=j {
                    out.add(j, tor_top - two() * Ratio::from_integer(l as i128), mult);
                }
            }
        }
    }
}

/// Expand the closed-form series of each summand up to s-degree `s_cutoff`.
pub fn poincare_series(dec: &ModuleDecomposition, s_cutoff: usize) -> PoincareSeries {
    assert!(s_cutoff >= 1);
    poincare_series_of_shape(&ModuleShape::from(dec), s_cutoff)
}

pub fn poincare_series_of_shape(shape: &ModuleShape, s_cutoff: usize) -> PoincareSeries {
    assert!(s_cutoff >= 1);
    let mut out = PoincareSeries::zero(s_cutoff);
    for (&(d, kind), &mult) in &shape.summands {
        add_summand(&mut out, d, kind, mult as i64);
    }
    out
}

/// Assemble a series from measured homology dimensions: `dims[j]` are the
/// (grading -> dimension) marginals at truncation j + 1.
pub fn series_from_measured(dims: &[BTreeMap<Rat, usize>]) -> PoincareSeries {
    assert!(dims.len() >= 2);
    PoincareSeries {
        coeffs: dims
            .iter()
            .map(|d| d.iter().map(|(&m, &c)| (m, c as i64)).collect())
            .collect(),
    }
}

/// Recover the summand multiset from a series. Clearing the denominator
/// (1-s)(1-st^2) leaves a polynomial Q of s-degree max(k); a length-k
/// summand topped at d contributes -s^k t^{-(d-2k)}(1 + t^{-1}) there, so
/// peeling the highest surviving grading at each s-degree from the top down
/// removes summands one at a time. What remains at s^0 are the towers.
/// Requires every finite length to be below the s-cutoff.
pub fn reconstruct_from_series(series: &PoincareSeries) -> Result<ModuleShape, SeriesError> {
    let nn = series.coeffs.len();
    // q[j] = coefficient of s^j in (1-s)(1-st^2) P; multiplying by t^2
    // shifts gradings down by 2
    let mut q: Vec<BTreeMap<Rat, i64>> = vec![BTreeMap::new(); nn];
    let addq = |q: &mut Vec<BTreeMap<Rat, i64>>, j: usize, m: Rat, c: i64| {
        let e = q[j].entry(m).or_insert(0);
        *e += c;
        if *e == 0 {
            q[j].remove(&m);
        }
    };
    for j in 0..nn {
        for (&m, &c) in &series.coeffs[j] {
            addq(&mut q, j, m, c);
            if j + 1 < nn {
                addq(&mut q, j + 1, m, -c);
                addq(&mut q, j + 1, m - two(), -c);
            }
            if j + 2 < nn {
                addq(&mut q, j + 2, m - two(), c);
            }
        }
    }

    let mut shape = ModuleShape::default();
    for j in (1..nn).rev() {
        while let Some((&m, &c)) = q[j].iter().next_back() {
            if c > 0 {
                return Err(SeriesError::NotInSpan { sdeg: j, grading: m, residue: c });
            }
            let mult = -c;
            let k = j as i128;
            let d = m + two() * Ratio::from_integer(k);
            // remove mult copies of (1-s)(1-st^2) P_{M(d,j)}
            // = t^{-d}(1 + t^{2j+1}) - s^j t^{-d}(t^{2j} + t^{2j+1})
            addq(&mut q, 0, d, -mult);
            addq(&mut q, 0, d - two() * Ratio::from_integer(k) - Ratio::from_integer(1), -mult);
            addq(&mut q, j, m, mult);
            addq(&mut q, j, m - Ratio::from_integer(1), mult);
            *shape.summands.entry((d, SummandKind::Finite(j as u32))).or_insert(0) +=
                mult as usize;
        }
    }
    for (&m, &c) in &q[0] {
        if c < 0 {
            return Err(SeriesError::NotInSpan { sdeg: 0, grading: m, residue: c });
        }
        shape.summands.insert((m, SummandKind::Tower), c as usize);
    }
    Ok(shape)
}
