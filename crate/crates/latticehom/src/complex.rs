//! Finite boxed models of the cube complex of a plumbing forest.
//!
//! Generators are pairs [K, E] with K running over the characteristic
//! vectors `K0 + 2 M x`, `x` in a coordinate box, and E over vertex subsets.
//! The differential carries U-exponents read off the weight tables; targets
//! that fall outside the box are dropped and the source is flagged
//! non-interior. "Good" cells are those whose iterated boundary never leaves
//! the box; they span an honest subcomplex.

use std::collections::HashMap;
use std::fmt::Write as _;

use num::rational::Ratio;
use num::Zero;
use thiserror::Error;

use crate::charlat::{is_characteristic, CharVector, CharlatError, SpinCContext};
use crate::graph::PlumbingGraph;
use crate::matrix::{rat_to_string, solve_rational, Rat};

#[derive(Clone, Debug)]
pub struct BoxSpec {
    pub radius: i64,
    pub base: CharVector,
}

#[derive(Clone, Copy, Debug)]
pub struct TruncationSpec {
    pub n: u32,
}

impl TruncationSpec {
    pub fn new(n: u32) -> Self {
        assert!(n >= 1, "truncation exponent must be positive");
        TruncationSpec { n }
    }
}

#[derive(Debug, Error)]
pub enum ComplexError {
    #[error(transparent)]
    Charlat(#[from] CharlatError),
    #[error("generator id space exceeds u32")]
    TooLarge,
    #[error("graph too large for subset tables ({0} vertices)")]
    TooManyVertices(usize),
}

pub const NO_K: u32 = u32::MAX;

/// Boxed model of the cube complex over F2[U]/U^n.
pub struct LatticeComplex {
    pub graph: PlumbingGraph,
    pub nv: usize,
    pub trunc: u32,
    /// distinct characteristic vectors in the box, sorted
    pub kset: Vec<CharVector>,
    pub kindex: HashMap<CharVector, u32>,
    /// `shift[k * nv + v]`: index of `K + 2v*`, or NO_K
    shift: Vec<u32>,
    /// `unshift[k * nv + v]`: index of `K - 2v*`, or NO_K
    unshift: Vec<u32>,
    /// g-values, indexed `(k << nv) | e_mask`
    gtab: Vec<i16>,
    /// true when the class of the base vector is torsion
    pub torsion: bool,
    pub divisibility: i128,
    /// per-K grading offset: `gr([K,E]) = grad_base[k] + 2 g + |E|`
    grad_base: Vec<Rat>,
    /// per-K distance from the box center: the Chebyshev norm of the stored
    /// `x` with `K = base + 2 M x` (zero when built from an explicit kset)
    xrad: Vec<i64>,
    good: Vec<u64>,
}

fn bitget(bits: &[u64], i: usize) -> bool {
    bits[i >> 6] & (1 << (i & 63)) != 0
}

fn bitset(bits: &mut [u64], i: usize) {
    bits[i >> 6] |= 1 << (i & 63);
}

impl LatticeComplex {
    /// Enumerate the box `x in [-r, r]^V` and build the complex. Distinct
    /// `x` with equal `K` (kernel directions of `M`) are identified, so the
    /// generator set is indexed by the characteristic vectors themselves.
    pub fn from_box(
        graph: &PlumbingGraph,
        spec: &BoxSpec,
        trunc: TruncationSpec,
    ) -> Result<Self, ComplexError> {
        let nv = graph.n();
        if nv > 16 {
            return Err(ComplexError::TooManyVertices(nv));
        }
        is_characteristic(graph, &spec.base)?;
        let m = graph.intersection_matrix();
        let r = spec.radius;
        // K = base + 2 M x; distinct x with equal K are kernel translates, of
        // which the one nearest the center (then lexicographically least) is
        // kept as the representative
        let norm = |x: &[i64]| x.iter().map(|v| v.abs()).max().unwrap_or(0);
        let mut reps: HashMap<CharVector, Vec<i64>> = HashMap::new();
        let mut x = vec![-r; nv.max(1)];
        if nv == 0 {
            reps.insert(vec![], vec![]);
        } else {
            'outer: loop {
                let xi: Vec<i128> = x.iter().map(|&v| v as i128).collect();
                let mx = m.mul_vec(&xi);
                let k: CharVector =
                    (0..nv).map(|v| spec.base[v] + 2 * mx[v] as i64).collect();
                match reps.get_mut(&k) {
                    Some(old) => {
                        let better = match norm(&x).cmp(&norm(old)) {
                            std::cmp::Ordering::Less => true,
                            std::cmp::Ordering::Equal => x < *old,
                            std::cmp::Ordering::Greater => false,
                        };
                        if better {
                            *old = x.clone();
                        }
                    }
                    None => {
                        reps.insert(k, x.clone());
                    }
                }
                for i in 0..nv {
                    if x[i] < r {
                        x[i] += 1;
                        continue 'outer;
                    }
                    x[i] = -r;
                }
                break;
            }
        }
        let mut pairs: Vec<(CharVector, Vec<i64>)> = reps.into_iter().collect();
        pairs.sort();
        Self::build(graph, &spec.base, pairs, trunc)
    }

    /// Build from an explicit list of characteristic vectors (used by the
    /// surgery-triangle code, where boxes of different graphs must align).
    /// Gradings are anchored at `base`, which must be in the list's span of
    /// classes; vectors get no `x`-coordinates, so the non-torsion grading
    /// anchor uses a rational solve per vector.
    pub fn from_kset(
        graph: &PlumbingGraph,
        base: &[i64],
        kset: Vec<CharVector>,
        trunc: TruncationSpec,
    ) -> Result<Self, ComplexError> {
        let mut pairs: Vec<(CharVector, Vec<i64>)> = Vec::with_capacity(kset.len());
        for k in kset {
            pairs.push((k, vec![]));
        }
        pairs.sort();
        pairs.dedup_by(|a, b| a.0 == b.0);
        Self::build(graph, base, pairs, trunc)
    }

    fn build(
        graph: &PlumbingGraph,
        base: &[i64],
        pairs: Vec<(CharVector, Vec<i64>)>,
        trunc: TruncationSpec,
    ) -> Result<Self, ComplexError> {
        let nv = graph.n();
        if nv > 16 {
            return Err(ComplexError::TooManyVertices(nv));
        }
        for (k, _) in &pairs {
            is_characteristic(graph, k)?;
        }
        let nk = pairs.len();
        if (nk as u64) << nv > u32::MAX as u64 {
            return Err(ComplexError::TooLarge);
        }
        let kset: Vec<CharVector> = pairs.iter().map(|(k, _)| k.clone()).collect();
        let kindex: HashMap<CharVector, u32> =
            kset.iter().enumerate().map(|(i, k)| (k.clone(), i as u32)).collect();

        // shift tables
        let mut shift = vec![NO_K; nk * nv.max(1)];
        let mut unshift = vec![NO_K; nk * nv.max(1)];
        let mut buf: CharVector = vec![0; nv];
        for (ki, k) in kset.iter().enumerate() {
            for v in 0..nv {
                buf.copy_from_slice(k);
                buf[v] += 2 * graph.framing(v);
                let mut nb = graph.nbr_mask(v);
                while nb != 0 {
                    let w = nb.trailing_zeros() as usize;
                    nb &= nb - 1;
                    buf[w] += 2;
                }
                if let Some(&t) = kindex.get(&buf) {
                    shift[ki * nv + v] = t;
                    unshift[t as usize * nv + v] = ki as u32;
                }
            }
        }

        // weight tables: f by subset DP, then g by one-step minimization
        let size = 1usize << nv;
        let mut gtab = vec![0i16; nk << nv];
        let mut f = vec![0i64; size];
        for (ki, k) in kset.iter().enumerate() {
            for mask in 1..size {
                let v = mask.trailing_zeros() as usize;
                let rest = mask & !(1 << v);
                f[mask] = f[rest]
                    + (k[v] + graph.framing(v)) / 2
                    + (graph.nbr_mask(v) & rest as u32).count_ones() as i64;
            }
            let row = &mut gtab[ki << nv..(ki + 1) << nv];
            for mask in 0..size {
                let mut best = f[mask];
                let mut mm = mask;
                while mm != 0 {
                    let v = mm.trailing_zeros() as usize;
                    mm &= mm - 1;
                    best = best.min(row[mask & !(1 << v)] as i64);
                }
                assert!(
                    i16::try_from(best).is_ok(),
                    "weight overflow; box too large for i16 tables"
                );
                row[mask] = best as i16;
            }
        }

        // grading anchors
        let ctx = SpinCContext::new(graph);
        let (torsion, divisibility) = ctx.torsion_data(base);
        let (sigma, chi) = graph.signature_chi();
        let const_term = Ratio::from_integer(-(3 * sigma as i128) - 2 * chi as i128)
            / Ratio::from_integer(4);
        let mmat = graph.intersection_matrix();
        let have_x = nv == 0 || pairs.iter().all(|(_, x)| x.len() == nv);
        let mut grad_base = Vec::with_capacity(nk);
        if torsion && have_x {
            // gr offset = K^2/4 + const, expanded around the base:
            // K^2 = base^2 + 4 base.x + 4 x.Mx for K = base + 2Mx
            let c: Vec<i128> = base.iter().map(|&x| x as i128).collect();
            let y = solve_rational(&mmat, &c)
                .expect("every vector in a torsion class is rationally solvable");
            let mut bsq = Rat::zero();
            for (bi, yi) in c.iter().zip(&y) {
                bsq += Ratio::from_integer(*bi) * yi;
            }
            for (_, x) in &pairs {
                let xi: Vec<i128> = x.iter().map(|&v| v as i128).collect();
                let mx = mmat.mul_vec(&xi);
                let mut extra: i128 = 0;
                for v in 0..nv {
                    extra += 4 * xi[v] * (c[v] + mx[v]);
                }
                grad_base.push(
                    (bsq + Ratio::from_integer(extra)) / Ratio::from_integer(4) + const_term,
                );
            }
        } else {
            // explicit ksets may span several SpinC classes at once (the
            // surgery triangle aligns boxes of different graphs). Anchor
            // each vector absolutely by K^2/4 + const when its class is
            // torsion, relative to the base when reachable from it, and at
            // zero otherwise — nothing reads gradings of the last kind.
            let smith = &ctx.smith;
            for (k, xrep) in &pairs {
                let c: Vec<i128> = k.iter().map(|&x| x as i128).collect();
                if let Some(y) = solve_rational(&mmat, &c) {
                    let mut ksq = Rat::zero();
                    for (ki, yi) in c.iter().zip(&y) {
                        ksq += Ratio::from_integer(*ki) * yi;
                    }
                    grad_base.push(ksq / Ratio::from_integer(4) + const_term);
                    continue;
                }
                // relative offset: (K^2 - base^2)/4 = h.(K+base)/2 with
                // M h = (K - base)/2, h integral
                let h: Option<Vec<i128>> = if xrep.len() == nv && nv > 0 {
                    Some(xrep.iter().map(|&v| v as i128).collect())
                } else {
                    let half: Vec<i128> = k
                        .iter()
                        .zip(base)
                        .map(|(&a, &b)| (a as i128 - b as i128) / 2)
                        .collect();
                    smith.solve(&half)
                };
                match h {
                    Some(h) => {
                        let mut q = Rat::zero();
                        for (hv, (&a, &b)) in h.iter().zip(k.iter().zip(base)) {
                            q += Ratio::from_integer(hv * (a as i128 + b as i128));
                        }
                        grad_base.push(q / Ratio::from_integer(2));
                    }
                    None => grad_base.push(Rat::zero()),
                }
            }
        }

        let xrad: Vec<i64> = pairs
            .iter()
            .map(|(_, x)| x.iter().map(|v| v.abs()).max().unwrap_or(0))
            .collect();
        let mut cx = LatticeComplex {
            graph: graph.clone(),
            nv,
            trunc: trunc.n,
            kset,
            kindex,
            shift,
            unshift,
            gtab,
            torsion,
            divisibility,
            grad_base,
            xrad,
            good: vec![],
        };
        cx.good = cx.compute_good();
        Ok(cx)
    }

    /// Hereditary interiority: a cell is good when every boundary term stays
    /// in the box and lands on a good cell. Good cells form a subcomplex on
    /// which the stored differential is the true one.
    fn compute_good(&self) -> Vec<u64> {
        let total = self.num_generators();
        let mut good = vec![0u64; total.div_ceil(64)];
        let nv = self.nv;
        for delta in 0..=nv {
            for ki in 0..self.kset.len() {
                'cell: for mask in subsets_of_size(nv, delta) {
                    let id = ((ki as u32) << nv) | mask as u32;
                    let mut mm = mask;
                    while mm != 0 {
                        let v = mm.trailing_zeros() as usize;
                        mm &= mm - 1;
                        let rest = (mask & !(1 << v)) as u32;
                        if !bitget(&good, (((ki as u32) << nv) | rest) as usize) {
                            continue 'cell;
                        }
                        let t = self.shift[ki * nv + v];
                        if t == NO_K || !bitget(&good, ((t << nv) | rest) as usize) {
                            continue 'cell;
                        }
                    }
                    bitset(&mut good, id as usize);
                }
            }
        }
        good
    }

    pub fn num_generators(&self) -> usize {
        self.kset.len() << self.nv
    }

    #[inline]
    pub fn k_of(&self, gen: u32) -> u32 {
        gen >> self.nv
    }

    #[inline]
    pub fn e_of(&self, gen: u32) -> u32 {
        gen & ((1 << self.nv) - 1)
    }

    pub fn gen_id(&self, k_idx: u32, e_mask: u32) -> u32 {
        (k_idx << self.nv) | e_mask
    }

    pub fn delta_of(&self, gen: u32) -> u32 {
        self.e_of(gen).count_ones()
    }

    pub fn gen_of_k(&self, k: &[i64], e_mask: u32) -> Option<u32> {
        self.kindex.get(k).map(|&ki| self.gen_id(ki, e_mask))
    }

    #[inline]
    pub fn g_value(&self, k_idx: u32, e_mask: u32) -> i64 {
        self.gtab[((k_idx as usize) << self.nv) | e_mask as usize] as i64
    }

    /// Chebyshev distance of this K from the box center (0 for explicit
    /// ksets, where no box coordinates exist).
    #[inline]
    pub fn xrad(&self, k_idx: u32) -> i64 {
        self.xrad[k_idx as usize]
    }

    pub fn shift_idx(&self, k_idx: u32, v: usize) -> Option<u32> {
        let t = self.shift[k_idx as usize * self.nv + v];
        (t != NO_K).then_some(t)
    }

    pub fn unshift_idx(&self, k_idx: u32, v: usize) -> Option<u32> {
        let t = self.unshift[k_idx as usize * self.nv + v];
        (t != NO_K).then_some(t)
    }

    /// Every boundary term of the first differential stays in the box.
    pub fn is_interior(&self, gen: u32) -> bool {
        let ki = self.k_of(gen);
        let mut mask = self.e_of(gen);
        while mask != 0 {
            let v = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            if self.shift[ki as usize * self.nv + v] == NO_K {
                return false;
            }
        }
        true
    }

    pub fn is_good(&self, gen: u32) -> bool {
        bitget(&self.good, gen as usize)
    }

    /// The two boundary exponents at `v in E`, both nonnegative, one zero.
    pub fn ab(&self, k_idx: u32, e_mask: u32, v: usize) -> (i64, i64) {
        let rest = e_mask & !(1 << v);
        let g = self.g_value(k_idx, e_mask);
        let a = self.g_value(k_idx, rest) - g;
        let b = match self.shift_idx(k_idx, v) {
            Some(t) => {
                let k = &self.kset[k_idx as usize];
                (k[v] + self.graph.framing(v)) / 2 + self.g_value(t, rest) - g
            }
            // target outside the box: the term is dropped anyway
            None => i64::MAX,
        };
        (a, b)
    }

    /// Boundary of a generator as (target, u-exponent) pairs, already reduced
    /// mod 2 (equal pairs cancel) and truncated at U^n. Deterministic order.
    pub fn boundary_row(&self, gen: u32) -> Vec<(u32, u32)> {
        let ki = self.k_of(gen);
        let e = self.e_of(gen);
        let mut out: Vec<(u32, u32)> = Vec::with_capacity(2 * e.count_ones() as usize);
        let mut mask = e;
        while mask != 0 {
            let v = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            let rest = e & !(1 << v);
            let (a, b) = self.ab(ki, e, v);
            if a < self.trunc as i64 {
                out.push((self.gen_id(ki, rest), a as u32));
            }
            if let Some(t) = self.shift_idx(ki, v) {
                let bb = b;
                if bb < self.trunc as i64 {
                    out.push((self.gen_id(t, rest), bb as u32));
                }
            }
        }
        out.sort_unstable();
        // cancel duplicate terms over F2
        let mut w = 0;
        let mut i = 0;
        while i < out.len() {
            if i + 1 < out.len() && out[i] == out[i + 1] {
                i += 2;
            } else {
                out[w] = out[i];
                w += 1;
                i += 1;
            }
        }
        out.truncate(w);
        out
    }

    /// All boundary triples `(source, target, u-exponent)` sorted by
    /// (source delta, source id).
    pub fn materialize(&self) -> Vec<(u32, u32, u32)> {
        let mut ids: Vec<u32> = (0..self.num_generators() as u32).collect();
        ids.sort_by_key(|&g| (self.delta_of(g), g));
        let mut out = Vec::new();
        for g in ids {
            for (t, e) in self.boundary_row(g) {
                out.push((g, t, e));
            }
        }
        out
    }

    /// Maslov grading of `U^i [K,E]`: absolute when the class is torsion,
    /// a representative of the mod-d relative grading otherwise.
    pub fn maslov(&self, gen: u32, u_exp: u32) -> Rat {
        let ki = self.k_of(gen);
        let e = self.e_of(gen);
        self.grad_base[ki as usize]
            + Ratio::from_integer(
                2 * self.g_value(ki, e) as i128 + e.count_ones() as i128 - 2 * u_exp as i128,
            )
    }

    /// Check that the composite of the stored differential with itself
    /// vanishes on generators whose first and second order supports are
    /// interior. Returns the offending generators.
    pub fn verify_d_squared(&self) -> Vec<u32> {
        let mut bad = Vec::new();
        for g in 0..self.num_generators() as u32 {
            if !self.is_interior(g) {
                continue;
            }
            let row = self.boundary_row(g);
            if row.iter().any(|&(t, _)| !self.is_interior(t)) {
                continue;
            }
            let mut acc: Vec<(u32, u32)> = Vec::new();
            for &(t, e1) in &row {
                for (t2, e2) in self.boundary_row(t) {
                    let e = e1 + e2;
                    if e < self.trunc {
                        acc.push((t2, e));
                    }
                }
            }
            acc.sort_unstable();
            let mut odd = false;
            let mut i = 0;
            while i < acc.len() {
                let mut j = i;
                while j < acc.len() && acc[j] == acc[i] {
                    j += 1;
                }
                if (j - i) % 2 == 1 {
                    odd = true;
                    break;
                }
                i = j;
            }
            if odd {
                bad.push(g);
            }
        }
        bad
    }

    /// Line-oriented debug dump: generators, then triples.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for g in 0..self.num_generators() as u32 {
            let ki = self.k_of(g);
            let k = &self.kset[ki as usize];
            let kstr: Vec<String> = k.iter().map(|x| x.to_string()).collect();
            let gr = self.maslov(g, 0);
            let grs = if self.torsion {
                rat_to_string(&gr)
            } else {
                format!("rel:{} mod {}", rat_to_string(&gr), self.divisibility)
            };
            let _ = writeln!(
                s,
                "gen {} K={} E={} delta={} gr={} interior={}",
                g,
                kstr.join(","),
                self.e_of(g),
                self.delta_of(g),
                grs,
                self.is_interior(g) as u8
            );
        }
        for (src, dst, e) in self.materialize() {
            let _ = writeln!(s, "d {src} {dst} {e}");
        }
        s
    }
}

/// Iterate the masks of `n`-bit subsets of size `k` in increasing order.
fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = usize> {
    (0usize..1 << n).filter(move |m| m.count_ones() as usize == k)
}
