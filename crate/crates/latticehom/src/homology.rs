//! Homology of boxed complexes over F2[U]/U^n.
//!
//! Each generator expands into n U-power slots; the differential becomes a
//! sparse F2 matrix which is reduced column by column (persistence style,
//! lowest gradings first). The U-action survives to homology as a nilpotent
//! endomorphism whose Jordan blocks give the module decomposition.

use std::collections::BTreeMap;

use num::rational::Ratio;
use thiserror::Error;

use crate::charlat::CharVector;
use crate::complex::{BoxSpec, ComplexError, LatticeComplex, TruncationSpec};
use crate::graph::PlumbingGraph;
use crate::matrix::Rat;

#[derive(Debug, Error)]
pub enum HomologyError {
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Charlat(#[from] crate::charlat::CharlatError),
    #[error(transparent)]
    Persist(#[from] crate::persist::PersistError),
    #[error("no stabilization up to radius {cap}")]
    RadiusCapExceeded { cap: i64 },
}

/// A finite chain complex over F2[U]/U^n: cells with gradings and sparse
/// boundary rows carrying U-exponents. Gradings are absolute rationals, or
/// residues in [0, d) when `modulus` is set.
pub struct ChainData {
    pub trunc: u32,
    pub modulus: Option<Rat>,
    pub gr: Vec<Rat>,
    pub delta: Vec<u32>,
    pub rows: Vec<Vec<(u32, u32)>>,
    /// per-cell distance from the box center (Chebyshev norm of the box
    /// coordinate of its K); zero for synthetic complexes
    pub outer: Vec<i64>,
}

pub fn reduce_mod(x: Rat, modulus: &Option<Rat>) -> Rat {
    match modulus {
        None => x,
        Some(d) => {
            let q = (x / d).floor();
            x - q * *d
        }
    }
}

impl ChainData {
    /// Extract the chain data of a complex, either the full box or the good
    /// subcomplex. Returns the data and the complex generator id per cell.
    pub fn from_complex(cx: &LatticeComplex, good_only: bool) -> (Self, Vec<u32>) {
        let total = cx.num_generators() as u32;
        let mut cellmap = Vec::new();
        let mut local = vec![u32::MAX; total as usize];
        for gen in 0..total {
            if !good_only || cx.is_good(gen) {
                local[gen as usize] = cellmap.len() as u32;
                cellmap.push(gen);
            }
        }
        let modulus = if cx.torsion {
            None
        } else {
            Some(Rat::from_integer(cx.divisibility))
        };
        let mut gr = Vec::with_capacity(cellmap.len());
        let mut delta = Vec::with_capacity(cellmap.len());
        let mut rows = Vec::with_capacity(cellmap.len());
        let mut outer = Vec::with_capacity(cellmap.len());
        for &gen in &cellmap {
            gr.push(reduce_mod(cx.maslov(gen, 0), &modulus));
            delta.push(cx.delta_of(gen));
            outer.push(cx.xrad(cx.k_of(gen)));
            let row: Vec<(u32, u32)> = cx
                .boundary_row(gen)
                .into_iter()
                .filter_map(|(t, e)| {
                    let l = local[t as usize];
                    (l != u32::MAX).then_some((l, e))
                })
                .collect();
            rows.push(row);
        }
        (
            ChainData { trunc: cx.trunc, modulus, gr, delta, rows, outer },
            cellmap,
        )
    }

    /// The same complex over a smaller truncation: drop high U-exponents.
    pub fn truncated(&self, n: u32) -> ChainData {
        assert!(n <= self.trunc);
        ChainData {
            trunc: n,
            modulus: self.modulus,
            gr: self.gr.clone(),
            delta: self.delta.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().copied().filter(|&(_, e)| e < n).collect())
                .collect(),
            outer: self.outer.clone(),
        }
    }

    pub fn slot_gr(&self, cell: u32, i: u32) -> Rat {
        reduce_mod(
            self.gr[cell as usize] - Ratio::from_integer(2 * i as i128),
            &self.modulus,
        )
    }
}

/// Homology basis with gradings and the induced U-action.
pub struct Homology {
    pub trunc: u32,
    pub modulus: Option<Rat>,
    pub gr: Vec<Rat>,
    pub delta: Vec<u32>,
    /// image of each basis element under U, as sorted basis indices
    pub u: Vec<Vec<u32>>,
    /// per basis element, the largest `outer` value among the cells
    /// supporting its representative cycle
    pub rep_outer: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedVectorSpace {
    /// (delta, grading) -> dimension
    pub dims: BTreeMap<(u32, Rat), usize>,
}

impl Homology {
    pub fn total_dim(&self) -> usize {
        self.gr.len()
    }

    pub fn graded_dims(&self) -> GradedVectorSpace {
        let mut dims = BTreeMap::new();
        for i in 0..self.gr.len() {
            *dims.entry((self.delta[i], self.gr[i])).or_insert(0) += 1;
        }
        GradedVectorSpace { dims }
    }

    pub fn delta_split(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for &d in &self.delta {
            *out.entry(d).or_insert(0) += 1;
        }
        out
    }
}

fn xor_into(acc: &mut Vec<u32>, other: &[u32]) {
    let mut merged = Vec::with_capacity(acc.len() + other.len());
    let (mut i, mut j) = (0, 0);
    while i < acc.len() || j < other.len() {
        if j == other.len() || (i < acc.len() && acc[i] < other[j]) {
            merged.push(acc[i]);
            i += 1;
        } else if i == acc.len() || other[j] < acc[i] {
            merged.push(other[j]);
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    *acc = merged;
}

/// Gaussian elimination over F2 after expanding each cell into `trunc`
/// U-power slots. Column order is grading-ascending, so chosen
/// representatives are homogeneous.
pub fn compute_homology(data: &ChainData) -> Homology {
    let n = data.trunc;
    let ncells = data.gr.len() as u32;
    let nslots = (ncells * n) as usize;
    // global slot order: (grading, cell, power)
    let mut order: Vec<u32> = (0..nslots as u32).collect();
    let keys: Vec<(Rat, u32, u32)> = (0..nslots as u32)
        .map(|s| {
            let (c, i) = (s / n, s % n);
            (data.slot_gr(c, i), c, i)
        })
        .collect();
    order.sort_by(|&a, &b| keys[a as usize].cmp(&keys[b as usize]));
    let mut pos = vec![0u32; nslots];
    for (p, &s) in order.iter().enumerate() {
        pos[s as usize] = p as u32;
    }

    let col_of = |p: u32| -> Vec<u32> {
        let s = order[p as usize];
        let (c, i) = (s / n, s % n);
        let mut col: Vec<u32> = data.rows[c as usize]
            .iter()
            .filter(|&&(_, e)| i + e < n)
            .map(|&(t, e)| pos[(t * n + i + e) as usize])
            .collect();
        col.sort_unstable();
        col
    };

    const NONE: u32 = u32::MAX;
    let mut pivot = vec![NONE; nslots];
    let mut r_cols: Vec<Vec<u32>> = vec![Vec::new(); nslots];
    let mut v_cols: Vec<Vec<u32>> = vec![Vec::new(); nslots];
    let mut kernel = vec![false; nslots];
    for p in 0..nslots as u32 {
        let mut col = col_of(p);
        let mut vcol = vec![p];
        while let Some(&l) = col.last() {
            let t = pivot[l as usize];
            if t == NONE {
                break;
            }
            xor_into(&mut col, &r_cols[t as usize]);
            xor_into(&mut vcol, &v_cols[t as usize]);
        }
        if col.is_empty() {
            kernel[p as usize] = true;
        } else {
            pivot[*col.last().unwrap() as usize] = p;
        }
        r_cols[p as usize] = col;
        v_cols[p as usize] = vcol;
    }

    // homology basis: kernel columns that are not pivot rows
    let mut basis_of = vec![NONE; nslots];
    let mut basis_slots = Vec::new();
    for p in 0..nslots {
        if kernel[p] && pivot[p] == NONE {
            basis_of[p] = basis_slots.len() as u32;
            basis_slots.push(p as u32);
        }
    }

    // express the class of a cycle in the homology basis: subtract boundary
    // columns where a pivot exists (class unchanged), otherwise peel off the
    // kernel representative topped at that slot
    let express = |z: &mut Vec<u32>| -> Vec<u32> {
        let mut out = Vec::new();
        while let Some(&l) = z.last() {
            let t = pivot[l as usize];
            if t != NONE {
                xor_into(z, &r_cols[t as usize]);
            } else {
                debug_assert!(kernel[l as usize], "cycle reduction left the cycle span");
                debug_assert!(basis_of[l as usize] != NONE);
                out.push(basis_of[l as usize]);
                xor_into(z, &v_cols[l as usize]);
            }
        }
        out.sort_unstable();
        out
    };

    let mut gr = Vec::with_capacity(basis_slots.len());
    let mut delta = Vec::with_capacity(basis_slots.len());
    let mut u_map = Vec::with_capacity(basis_slots.len());
    let mut rep_outer = Vec::with_capacity(basis_slots.len());
    for &p in &basis_slots {
        let s = order[p as usize];
        let (c, i) = (s / n, s % n);
        gr.push(data.slot_gr(c, i));
        delta.push(data.delta[c as usize]);
        rep_outer.push(
            v_cols[p as usize]
                .iter()
                .map(|&q| data.outer[(order[q as usize] / n) as usize])
                .max()
                .unwrap_or(0),
        );
        // U shifts every slot of the representative up one power
        let mut z: Vec<u32> = v_cols[p as usize]
            .iter()
            .filter_map(|&q| {
                let s = order[q as usize];
                let (c, i) = (s / n, s % n);
                (i + 1 < n).then(|| pos[(c * n + i + 1) as usize])
            })
            .collect();
        z.sort_unstable();
        // duplicate positions cannot arise: the shift is injective on slots
        u_map.push(express(&mut z));
    }

    Homology { trunc: n, modulus: data.modulus, gr, delta, u: u_map, rep_outer }
}

/// One indecomposable summand of the homology as a module over F[U]/U^n or
/// its limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SummandKind {
    Tower,
    Finite(u32),
}

/// Multiset of summands keyed by (delta, top grading, kind).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ModuleDecomposition {
    pub trunc: u32,
    pub summands: BTreeMap<(u32, Rat, SummandKind), usize>,
}

impl ModuleDecomposition {
    /// Dimension over F of a summand at this truncation.
    fn len_of(&self, kind: SummandKind) -> usize {
        match kind {
            SummandKind::Tower => self.trunc as usize,
            SummandKind::Finite(k) => k as usize,
        }
    }

    /// Total dimensions per cube dimension delta.
    pub fn delta_dims(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for (&(delta, _, kind), &mult) in &self.summands {
            *out.entry(delta).or_insert(0) += mult * self.len_of(kind);
        }
        out
    }

    /// Total dimensions per Maslov grading: a summand topped at d occupies
    /// d, d-2, ... down its length.
    pub fn graded_dims(&self) -> BTreeMap<Rat, usize> {
        let mut out = BTreeMap::new();
        for (&(_, top, kind), &mult) in &self.summands {
            for i in 0..self.len_of(kind) {
                *out.entry(top - Ratio::from_integer(2 * i as i128)).or_insert(0) += mult;
            }
        }
        out
    }
}

/// Jordan blocks of the nilpotent U-action: multiset keyed by
/// (delta, top grading, length).
pub type RawBlocks = BTreeMap<(u32, Rat, u32), usize>;

fn rank_of(mut vecs: Vec<Vec<u32>>) -> usize {
    let mut pivots: Vec<Vec<u32>> = Vec::new();
    let mut rank = 0;
    for v in vecs.iter_mut() {
        while let Some(&l) = v.last() {
            match pivots.iter().find(|p| *p.last().unwrap() == l) {
                Some(p) => {
                    let p = p.clone();
                    xor_into(v, &p);
                }
                None => {
                    pivots.push(v.clone());
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

/// Decompose the U-action on the whole homology into Jordan blocks.
pub fn decompose_module(h: &Homology) -> RawBlocks {
    let all: Vec<u32> = (0..h.gr.len() as u32).collect();
    decompose_submodule(h, &all)
}

/// Jordan blocks of the U-action on the submodule generated by the given
/// basis elements. The count of blocks topped at grading `d` with length at
/// least `l` is `rank(U^{l-1} on W_d) - rank(U^l on W_{d+2})` where `W_d` is
/// the grading-d piece of the submodule.
pub fn decompose_submodule(h: &Homology, gens: &[u32]) -> RawBlocks {
    let n = h.trunc;
    let apply_u = |v: &[u32]| -> Vec<u32> {
        let mut out: Vec<u32> = Vec::new();
        for &b in v {
            xor_into(&mut out, &h.u[b as usize]);
        }
        out
    };
    // spanning vectors of the submodule per (delta, grading)
    let mut wspan: BTreeMap<(u32, Rat), Vec<Vec<u32>>> = BTreeMap::new();
    for &g in gens {
        let delta = h.delta[g as usize];
        let mut grd = h.gr[g as usize];
        let mut v = vec![g];
        for _ in 0..n {
            if v.is_empty() {
                break;
            }
            wspan.entry((delta, grd)).or_default().push(v.clone());
            v = apply_u(&v);
            grd = reduce_mod(grd - Ratio::from_integer(2), &h.modulus);
        }
    }
    // rank of U^j on each graded piece
    let rank_at = |key: &(u32, Rat), j: u32| -> usize {
        match wspan.get(key) {
            Some(vs) => {
                let mut im = vs.clone();
                for _ in 0..j {
                    im = im.iter().map(|v| apply_u(v)).collect();
                }
                rank_of(im)
            }
            None => 0,
        }
    };
    let keys: Vec<(u32, Rat)> = wspan.keys().copied().collect();
    let mut blocks: RawBlocks = BTreeMap::new();
    for &(delta, gr) in &keys {
        let up = (delta, reduce_mod(gr + Ratio::from_integer(2), &h.modulus));
        let t = |l: u32| -> i64 {
            if l > n {
                return 0;
            }
            rank_at(&(delta, gr), l - 1) as i64 - rank_at(&up, l) as i64
        };
        for l in 1..=n {
            let c = t(l) - t(l + 1);
            assert!(c >= 0, "negative block multiplicity");
            if c > 0 {
                blocks.insert((delta, gr, l), c as usize);
            }
        }
    }
    blocks
}

/// Label the blocks of a truncation-n computation using the computation at
/// n+1: a full-length block whose (delta, top grading) persists with length
/// n+1 is a tower.
pub fn label_towers(at_n: &RawBlocks, at_n1: &RawBlocks, n: u32) -> ModuleDecomposition {
    let mut out = ModuleDecomposition { trunc: n, summands: BTreeMap::new() };
    for (&(delta, gr, len), &mult) in at_n {
        if len < n {
            *out.summands.entry((delta, gr, SummandKind::Finite(len))).or_insert(0) += mult;
        } else {
            let towers = at_n1.get(&(delta, gr, n + 1)).copied().unwrap_or(0).min(mult);
            if towers > 0 {
                *out.summands.entry((delta, gr, SummandKind::Tower)).or_insert(0) += towers;
            }
            if mult > towers {
                *out.summands.entry((delta, gr, SummandKind::Finite(n))).or_insert(0) +=
                    mult - towers;
            }
        }
    }
    out
}

/// Labeled decomposition of the interior-supported part of the homology at
/// one radius, computed at truncations n and n+1 from a single good
/// subcomplex built at n+1. Only Jordan blocks of the submodule generated by
/// classes whose representatives stay in the radius-(r-1) sub-box are
/// counted: classes leaning on the box face are artifacts of the truncated
/// model (their cancelling partners live outside). The `complete` flag
/// reports that nothing was filtered, i.e. the whole homology was
/// interior-supported.
pub fn decomposition_at_radius(
    g: &PlumbingGraph,
    base: &CharVector,
    n: u32,
    radius: i64,
) -> Result<(ModuleDecomposition, bool), HomologyError> {
    if g.intersection_matrix().det() != 0 {
        // invertible form: the complex splits into finite levels and the
        // decomposition is read off the barcode of the level filtration
        let bc = crate::persist::box_barcode(g, base, radius)?;
        return Ok(crate::persist::barcode_decomposition(&bc, n, radius));
    }
    decomposition_at_radius_slots(g, base, n, radius)
}

/// Slot-expansion route: build the good subcomplex at truncation n + 1 and
/// reduce over F2 after expanding U-powers. Handles degenerate forms, where
/// the box collapses along the kernel; also the reference implementation
/// the barcode route is checked against.
pub fn decomposition_at_radius_slots(
    g: &PlumbingGraph,
    base: &CharVector,
    n: u32,
    radius: i64,
) -> Result<(ModuleDecomposition, bool), HomologyError> {
    let cx = LatticeComplex::from_box(
        g,
        &BoxSpec { radius, base: base.clone() },
        TruncationSpec::new(n + 1),
    )?;
    let (data_n1, _) = ChainData::from_complex(&cx, true);
    let data_n = data_n1.truncated(n);
    let mut complete = true;
    let mut raws = Vec::with_capacity(2);
    for data in [&data_n, &data_n1] {
        let h = compute_homology(data);
        let inner: Vec<u32> = (0..h.gr.len() as u32)
            .filter(|&i| h.rep_outer[i as usize] < radius)
            .collect();
        complete &= inner.len() == h.gr.len();
        raws.push(decompose_submodule(&h, &inner));
    }
    Ok((label_towers(&raws[0], &raws[1], n), complete))
}

#[derive(Clone, Debug)]
pub struct StabilizeResult {
    pub decomposition: ModuleDecomposition,
    /// the two consecutive radii whose decompositions agreed
    pub radii: (i64, i64),
    /// set when the intersection form is not negative definite, where box
    /// stabilization is a heuristic rather than a guarantee
    pub heuristic: bool,
}

/// Grow the box until two consecutive radii give identical labeled
/// decompositions of the interior-supported homology. An empty decomposition
/// only counts as agreement when nothing was filtered at either radius:
/// otherwise a too-small box (all classes leaning on the face) would
/// "stabilize" on the empty module before the real classes fit inside.
pub fn stabilize(
    g: &PlumbingGraph,
    base: &CharVector,
    n: u32,
    r_start: i64,
    r_cap: i64,
) -> Result<StabilizeResult, HomologyError> {
    assert!(r_start >= 1 && r_cap >= r_start);
    let heuristic = !g.intersection_matrix().is_negative_definite();
    // center the box on a maximal-square representative: for definite
    // forms that is where the top-grading classes live, and boxes around
    // it stabilize at small radii
    let base = crate::charlat::max_square_representative(g, base)?;
    let mut prev = decomposition_at_radius(g, &base, n, r_start)?;
    for r in r_start + 1..=r_cap {
        let cur = decomposition_at_radius(g, &base, n, r)?;
        let trustworthy = !cur.0.summands.is_empty() || (cur.1 && prev.1);
        if trustworthy && cur.0 == prev.0 {
            return Ok(StabilizeResult { decomposition: cur.0, radii: (r - 1, r), heuristic });
        }
        prev = cur;
    }
    Err(HomologyError::RadiusCapExceeded { cap: r_cap })
}
