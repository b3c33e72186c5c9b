//! Surgery triangle at a distinguished vertex.
//!
//! For a vertex v of G the three graphs G - v, G and G with the framing at
//! v bumped by one fit into a short exact sequence of complexes via the
//! extension map (summing over all evaluations p at v), the framing-bump
//! map (summing over odd shifts of p with controlled U-exponents), and a
//! comparison map through the graph with a (-1)-vertex adjoined at v. All
//! three maps are materialized as boxed sparse matrices; the boxes of the
//! four graphs share their coordinates away from v, and the evaluation at
//! v (and at the adjoined vertex) runs over its own window. Every check
//! compares both sides only where the box cannot have truncated a term.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::charlat::{
    ab_exponents, enumerate_spinc, CharVector, CharlatError, SpinCContext, WeightCache,
};
use crate::complex::{ComplexError, LatticeComplex, TruncationSpec};
use crate::graph::PlumbingGraph;
use crate::homology::{stabilize, HomologyError};

#[derive(Debug, Error)]
pub enum TriangleError {
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Charlat(#[from] CharlatError),
    #[error(transparent)]
    Homology(#[from] HomologyError),
    #[error("vertex index {0} out of range")]
    VertexOutOfRange(usize),
}

/// A graded chain map between two boxed complexes, stored as sparse
/// triples (source generator, target generator, u-exponent), row-sorted.
pub struct ChainMap<'a> {
    pub source: &'a LatticeComplex,
    pub target: &'a LatticeComplex,
    pub triples: Vec<(u32, u32, u32)>,
    row_start: Vec<u32>,
}

impl<'a> ChainMap<'a> {
    fn new(
        source: &'a LatticeComplex,
        target: &'a LatticeComplex,
        mut triples: Vec<(u32, u32, u32)>,
    ) -> Self {
        triples.sort_unstable();
        let n = source.num_generators();
        let mut row_start = vec![0u32; n + 1];
        for &(s, _, _) in &triples {
            row_start[s as usize + 1] += 1;
        }
        for i in 0..n {
            row_start[i + 1] += row_start[i];
        }
        ChainMap { source, target, triples, row_start }
    }

    pub fn row(&self, gen: u32) -> &[(u32, u32, u32)] {
        &self.triples[self.row_start[gen as usize] as usize
            ..self.row_start[gen as usize + 1] as usize]
    }

    /// Both defining invariants at once: nonnegative exponents hold by the
    /// representation; delta-preservation is checked entry by entry.
    pub fn preserves_delta(&self) -> bool {
        self.triples
            .iter()
            .all(|&(s, t, _)| self.source.delta_of(s) == self.target.delta_of(t))
    }
}

/// Report of a generator-by-generator identity check. A violation lists
/// the offending source generator and the uncancelled terms.
#[derive(Debug, Default)]
pub struct ChainMapReport {
    pub checked: usize,
    pub skipped: usize,
    pub boundary_terms: usize,
    pub violations: Vec<(u32, Vec<(u32, u32)>)>,
}

impl ChainMapReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn cancel_mod2(mut terms: Vec<(u32, u32)>) -> Vec<(u32, u32)> {
    terms.sort_unstable();
    let mut w = 0;
    let mut i = 0;
    while i < terms.len() {
        let mut j = i;
        while j < terms.len() && terms[j] == terms[i] {
            j += 1;
        }
        if (j - i) % 2 == 1 {
            terms[w] = terms[i];
            w += 1;
        }
        i = j;
    }
    terms.truncate(w);
    terms
}

/// Check the chain-map identity d f = f d over F2[U]/U^n on every good
/// source generator; uncancelled terms landing on targets where `deep`
/// fails are box-truncation artifacts and only counted.
pub fn verify_chain_map(
    f: &ChainMap,
    n: u32,
    deep: impl Fn(&LatticeComplex, u32) -> bool,
) -> ChainMapReport {
    let mut rep = ChainMapReport::default();
    for s in 0..f.source.num_generators() as u32 {
        if !f.source.is_good(s) {
            rep.skipped += 1;
            continue;
        }
        let mut terms: Vec<(u32, u32)> = Vec::new();
        for &(_, t, e1) in f.row(s) {
            for (t2, e2) in f.target.boundary_row(t) {
                if e1 + e2 < n {
                    terms.push((t2, e1 + e2));
                }
            }
        }
        for (t, e1) in f.source.boundary_row(s) {
            for &(_, t2, e2) in f.row(t) {
                if e1 + e2 < n {
                    terms.push((t2, e1 + e2));
                }
            }
        }
        let diff = cancel_mod2(terms);
        let (bad, boundary): (Vec<(u32, u32)>, Vec<(u32, u32)>) =
            diff.into_iter().partition(|&(t, _)| deep(f.target, t));
        rep.boundary_terms += boundary.len();
        if !bad.is_empty() {
            rep.violations.push((s, bad));
        }
        rep.checked += 1;
    }
    rep
}

/// The triangle of a distinguished vertex, with the four aligned boxed
/// complexes. `kradius` bounds the box of lattice steps away from v;
/// `pradius` bounds the evaluation window at v (and at the adjoined
/// vertex) in steps of 2.
pub struct TriangleInstance {
    pub g: PlumbingGraph,
    pub v: usize,
    pub g_minus: PlumbingGraph,
    pub g_plus: PlumbingGraph,
    pub g_e: PlumbingGraph,
    pub e: usize,
    pub trunc: u32,
    pub kradius: i64,
    pub pradius: i64,
    pub cx_minus: LatticeComplex,
    pub cx_g: LatticeComplex,
    pub cx_plus: LatticeComplex,
    pub cx_e: LatticeComplex,
    /// center of the evaluation window at v (the framing of v in G)
    pbase: i64,
}

fn drop_coord(k: &[i64], v: usize) -> CharVector {
    let mut out = k.to_vec();
    out.remove(v);
    out
}

fn insert_coord(k: &[i64], v: usize, val: i64) -> CharVector {
    let mut out = k.to_vec();
    out.insert(v, val);
    out
}

impl TriangleInstance {
    pub fn new(
        g: &PlumbingGraph,
        v: usize,
        kradius: i64,
        pradius: i64,
        trunc: TruncationSpec,
    ) -> Result<Self, TriangleError> {
        if v >= g.n() {
            return Err(TriangleError::VertexOutOfRange(v));
        }
        let nv = g.n();
        let g_minus = g.delete_vertex(v);
        let g_plus = g.bump_framing(v, 1);
        let (g_e, e) = g.adjoin_e(v);
        let base = g.framings().to_vec();
        let pbase = base[v];

        let cx_minus = LatticeComplex::from_box(
            &g_minus,
            &crate::complex::BoxSpec { radius: kradius, base: drop_coord(&base, v) },
            trunc,
        )?;

        // the v-less parts of the characteristic vectors reachable inside
        // the lattice box of G; evaluations at v and e are free windows
        let m = g.intersection_matrix();
        let mut kparts: Vec<CharVector> = Vec::new();
        let mut x = vec![-kradius; nv];
        'outer: loop {
            let xi: Vec<i128> = x.iter().map(|&c| c as i128).collect();
            let mx = m.mul_vec(&xi);
            let k: CharVector = (0..nv).map(|w| base[w] + 2 * mx[w] as i64).collect();
            kparts.push(drop_coord(&k, v));
            for i in 0..nv {
                if x[i] < kradius {
                    x[i] += 1;
                    continue 'outer;
                }
                x[i] = -kradius;
            }
            break;
        }
        kparts.sort();
        kparts.dedup();

        let window = |center: i64| (-pradius..=pradius).map(move |t| center + 2 * t);
        let mut kset_g = Vec::new();
        let mut kset_plus = Vec::new();
        let mut kset_e = Vec::new();
        for kp in &kparts {
            for p in window(pbase) {
                kset_g.push(insert_coord(kp, v, p));
                for q in window(-1) {
                    let mut ke = insert_coord(kp, v, p);
                    ke.push(q);
                    kset_e.push(ke);
                }
            }
            for p in window(pbase + 1) {
                kset_plus.push(insert_coord(kp, v, p));
            }
        }
        let cx_g = LatticeComplex::from_kset(g, &base, kset_g, trunc)?;
        let cx_plus =
            LatticeComplex::from_kset(&g_plus, g_plus.framings(), kset_plus, trunc)?;
        let cx_e =
            LatticeComplex::from_kset(&g_e, g_e.framings(), kset_e, trunc)?;

        Ok(TriangleInstance {
            g: g.clone(),
            v,
            g_minus,
            g_plus,
            g_e,
            e,
            trunc: trunc.n,
            kradius,
            pradius,
            cx_minus,
            cx_g,
            cx_plus,
            cx_e,
            pbase,
        })
    }

    /// Insert a zero bit at position v: subsets of G - v as subsets of G.
    fn lift_mask(&self, mask: u32) -> u32 {
        let low = mask & ((1 << self.v) - 1);
        ((mask >> self.v) << (self.v + 1)) | low
    }

    /// Extension map: [K,E] goes to the sum of [(K,p),E] over the window.
    pub fn phi_v(&self) -> ChainMap<'_> {
        let mut triples = Vec::new();
        for ki in 0..self.cx_minus.kset.len() as u32 {
            let kp = &self.cx_minus.kset[ki as usize];
            let mut tis = Vec::new();
            for t in -self.pradius..=self.pradius {
                let kv = insert_coord(kp, self.v, self.pbase + 2 * t);
                if let Some(&ti) = self.cx_g.kindex.get(&kv) {
                    tis.push(ti);
                }
            }
            for mask in 0..1u32 << self.cx_minus.nv {
                let s = self.cx_minus.gen_id(ki, mask);
                let tmask = self.lift_mask(mask);
                for &ti in &tis {
                    triples.push((s, self.cx_g.gen_id(ti, tmask), 0));
                }
            }
        }
        ChainMap::new(&self.cx_minus, &self.cx_g, triples)
    }

    /// Framing-bump map: [(K,p),E] goes to the sum over m of
    /// U^{s_m} [(K,p+2m-1),E] with s_m the g-difference plus m(m-1)/2.
    pub fn psi_v(&self) -> ChainMap<'_> {
        let mut triples = Vec::new();
        for ki in 0..self.cx_g.kset.len() as u32 {
            let k = &self.cx_g.kset[ki as usize];
            let p = k[self.v];
            let mut shifts: Vec<(u32, i64)> = Vec::new();
            for t in -self.pradius..=self.pradius {
                let ptgt = self.pbase + 1 + 2 * t;
                // p + 2m - 1 = ptgt
                let mm = (ptgt - p + 1) / 2;
                let kv = insert_coord(&drop_coord(k, self.v), self.v, ptgt);
                if let Some(&ti) = self.cx_plus.kindex.get(&kv) {
                    shifts.push((ti, mm * (mm - 1) / 2));
                }
            }
            for mask in 0..1u32 << self.cx_g.nv {
                let s = self.cx_g.gen_id(ki, mask);
                let gs = self.cx_g.g_value(ki, mask);
                for &(ti, half) in &shifts {
                    let sm = self.cx_plus.g_value(ti, mask) - gs + half;
                    debug_assert!(sm >= 0, "bump-map exponent must be nonnegative");
                    if sm >= 0 && (sm as u32) < self.trunc {
                        triples.push((s, self.cx_plus.gen_id(ti, mask), sm as u32));
                    }
                }
            }
        }
        ChainMap::new(&self.cx_g, &self.cx_plus, triples)
    }

    /// Extension at the adjoined vertex: [(K,p),E] goes to the sum of
    /// [(K,p,q),E] over the odd window at e.
    pub fn phi_e(&self) -> ChainMap<'_> {
        let mut triples = Vec::new();
        for ki in 0..self.cx_g.kset.len() as u32 {
            let k = &self.cx_g.kset[ki as usize];
            let mut tis = Vec::new();
            for t in -self.pradius..=self.pradius {
                let mut ke = k.clone();
                ke.push(-1 + 2 * t);
                if let Some(&ti) = self.cx_e.kindex.get(&ke) {
                    tis.push(ti);
                }
            }
            for mask in 0..1u32 << self.cx_g.nv {
                let s = self.cx_g.gen_id(ki, mask);
                for &ti in &tis {
                    triples.push((s, self.cx_e.gen_id(ti, mask), 0));
                }
            }
        }
        ChainMap::new(&self.cx_g, &self.cx_e, triples)
    }

    /// Blow-down comparison map: [(K,p,2m-1),E] goes to
    /// U^s [(K,p+2m-1),E] when e is not in E and to zero otherwise.
    pub fn map_p(&self) -> ChainMap<'_> {
        let ebit = 1u32 << self.e;
        let mut triples = Vec::new();
        for ki in 0..self.cx_e.kset.len() as u32 {
            let ke = &self.cx_e.kset[ki as usize];
            let mm = (ke[self.e] + 1) / 2;
            let p = ke[self.v];
            let mut kv = ke[..self.e].to_vec();
            kv[self.v] = p + 2 * mm - 1;
            let Some(&ti) = self.cx_plus.kindex.get(&kv) else { continue };
            for mask in 0..1u32 << self.cx_g.nv {
                // masks without the e bit; e in E maps to zero
                let s = self.cx_e.gen_id(ki, mask);
                debug_assert_eq!(mask & ebit, 0);
                let sv = self.cx_plus.g_value(ti, mask) - self.cx_e.g_value(ki, mask)
                    + mm * (mm - 1) / 2;
                debug_assert!(sv >= 0, "comparison-map exponent must be nonnegative");
                if sv >= 0 && (sv as u32) < self.trunc {
                    triples.push((s, self.cx_plus.gen_id(ti, mask), sv as u32));
                }
            }
        }
        ChainMap::new(&self.cx_e, &self.cx_plus, triples)
    }

    fn p_coord(cx: &LatticeComplex, gen: u32, coord: usize) -> i64 {
        cx.kset[cx.k_of(gen) as usize][coord]
    }

    /// Targets whose evaluation at `coord` keeps `margin` of window slack
    /// around `center` — where box truncation cannot reach.
    fn deep(coord: usize, center: i64, half: i64, margin: i64) -> impl Fn(&LatticeComplex, u32) -> bool {
        move |cx, gen| (Self::p_coord(cx, gen, coord) - center).abs() <= 2 * half - margin
    }

    fn mv(&self) -> i64 {
        self.g.framing(self.v)
    }

    /// Largest |m| whose exponent m(m-1)/2 can stay below the truncation.
    fn mmax(n: u32) -> i64 {
        let mut m = 1i64;
        while (m + 1) * m / 2 < n as i64 {
            m += 1;
        }
        m
    }

    /// Largest |m| whose exponent can stay below the truncation after the
    /// g-difference (bounded by |m|) is taken into account.
    fn mmax_slack(n: u32) -> i64 {
        let mut m = 1i64;
        while (m + 1) * (m - 2) / 2 < n as i64 {
            m += 1;
        }
        m
    }

    pub fn verify_phi(&self) -> ChainMapReport {
        let f = self.phi_v();
        assert!(f.preserves_delta());
        verify_chain_map(&f, self.trunc, Self::deep(self.v, self.pbase, self.pradius, 6))
    }

    pub fn verify_psi(&self) -> ChainMapReport {
        let f = self.psi_v();
        assert!(f.preserves_delta());
        let marg = 2 * Self::mmax_slack(self.trunc) + 2 * (self.mv().abs() + 2) + 4;
        verify_chain_map(&f, self.trunc, Self::deep(self.v, self.pbase + 1, self.pradius, marg))
    }

    /// Negative control: verify the bump map after perturbing the
    /// exponents of every even-numbered source. The perturbation is not a
    /// chain map, so the check must produce violations.
    pub fn verify_psi_corrupted(&self) -> ChainMapReport {
        let mut f = self.psi_v();
        for t in f.triples.iter_mut() {
            if t.0 % 2 == 0 {
                t.2 += 1;
            }
        }
        let marg = 2 * Self::mmax_slack(self.trunc) + 2 * (self.mv().abs() + 2) + 4;
        verify_chain_map(&f, self.trunc, Self::deep(self.v, self.pbase + 1, self.pradius, marg))
    }

    pub fn verify_phi_e(&self) -> ChainMapReport {
        let f = self.phi_e();
        assert!(f.preserves_delta());
        verify_chain_map(&f, self.trunc, Self::deep(self.e, -1, self.pradius, 6))
    }

    pub fn verify_p(&self) -> ChainMapReport {
        let f = self.map_p();
        assert!(f.preserves_delta());
        let marg = 2 * Self::mmax_slack(self.trunc) + 2 * (self.mv().abs() + 2) + 4;
        verify_chain_map(&f, self.trunc, Self::deep(self.v, self.pbase + 1, self.pradius, marg))
    }

    /// The composite of the extension and bump maps vanishes identically:
    /// the (p, m) term cancels against (p + 4m - 2, 1 - m). Only targets
    /// deep enough that both partners fit in the window are enforced.
    pub fn psi_phi_zero(&self) -> ChainMapReport {
        let phi = self.phi_v();
        let psi = self.psi_v();
        let marg = 6 * Self::mmax(self.trunc) + 4;
        let deep = Self::deep(self.v, self.pbase + 1, self.pradius, marg);
        let mut rep = ChainMapReport::default();
        for s in 0..self.cx_minus.num_generators() as u32 {
            if !self.cx_minus.is_good(s) {
                rep.skipped += 1;
                continue;
            }
            let mut terms = Vec::new();
            for &(_, t, e1) in phi.row(s) {
                for &(_, t2, e2) in psi.row(t) {
                    if e1 + e2 < self.trunc {
                        terms.push((t2, e1 + e2));
                    }
                }
            }
            let diff = cancel_mod2(terms);
            let (bad, boundary): (Vec<(u32, u32)>, Vec<(u32, u32)>) =
                diff.into_iter().partition(|&(t, _)| deep(&self.cx_plus, t));
            rep.boundary_terms += boundary.len();
            if !bad.is_empty() {
                rep.violations.push((s, bad));
            }
            rep.checked += 1;
        }
        rep
    }

    /// The bump map factors through the adjoined vertex: psi = P after
    /// extension at e, exactly, since the weight of a cube without e is
    /// blind to the evaluation at e.
    pub fn psi_factorization(&self) -> ChainMapReport {
        let psi = self.psi_v();
        let phie = self.phi_e();
        let pm = self.map_p();
        let mut rep = ChainMapReport::default();
        for s in 0..self.cx_g.num_generators() as u32 {
            let mut terms: Vec<(u32, u32)> = psi.row(s).iter().map(|&(_, t, e)| (t, e)).collect();
            for &(_, t, e1) in phie.row(s) {
                for &(_, t2, e2) in pm.row(t) {
                    if e1 + e2 < self.trunc {
                        terms.push((t2, e1 + e2));
                    }
                }
            }
            let diff = cancel_mod2(terms);
            if !diff.is_empty() {
                rep.violations.push((s, diff));
            }
            rep.checked += 1;
        }
        rep
    }
}

/// Report of the per-summand exactness check of the hat-level sequence.
#[derive(Debug, Default)]
pub struct SesReport {
    pub summands: usize,
    pub boundary_excluded: usize,
    pub failures: Vec<String>,
}

impl SesReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

impl TriangleInstance {
    /// Exactness of the U = 0 sequence, summand by summand. For a fixed
    /// characteristic vector K of G - v and subset E, the maps act only on
    /// the evaluation window at v. When v is outside E the bump map sends
    /// p to (p-1) + (p+1); the all-ones extension image spans its kernel
    /// and the upward partial-sum section inverts it. When v is in E the
    /// bump map is an isomorphism, inverted by the half-infinite sums
    /// dictated by comparing the two boundary exponents at v; exactly one
    /// p has them equal. All identities are enforced on window-interior
    /// entries only; truncation artifacts at the window ends are counted.
    pub fn verify_short_exact_hat(&self) -> SesReport {
        let mut rep = SesReport::default();
        let psi = self.psi_v();
        let np = (2 * self.pradius + 1) as usize;
        assert!(np <= 64, "evaluation window too wide for the bitset columns");
        let vbit = 1u32 << self.v;
        let src_p = |i: usize| self.pbase + 2 * (i as i64 - self.pradius);
        let tgt_p = |i: usize| self.pbase + 1 + 2 * (i as i64 - self.pradius);
        let interior = |i: usize| i >= 2 && i + 2 < np;
        let mut cache = WeightCache::new();

        // group the kset of G by the vector away from v
        let mut groups: BTreeMap<CharVector, Vec<u32>> = BTreeMap::new();
        for (ki, k) in self.cx_g.kset.iter().enumerate() {
            groups.entry(drop_coord(k, self.v)).or_default().push(ki as u32);
        }
        for (kp, kis) in &groups {
            if kis.len() != np {
                rep.boundary_excluded += 1;
                continue;
            }
            // source and target column indices by window position
            let mut src = vec![0u32; np];
            for &ki in kis {
                let p = self.cx_g.kset[ki as usize][self.v];
                src[((p - self.pbase) / 2 + self.pradius) as usize] = ki;
            }
            let mut tgt = vec![u32::MAX; np];
            for (i, ti) in tgt.iter_mut().enumerate() {
                let kv = insert_coord(kp, self.v, tgt_p(i));
                if let Some(&t) = self.cx_plus.kindex.get(&kv) {
                    *ti = t;
                }
            }
            if tgt.contains(&u32::MAX) {
                rep.boundary_excluded += 1;
                continue;
            }
            let tpos: HashMap<u32, usize> =
                tgt.iter().enumerate().map(|(i, &t)| (t, i)).collect();
            for mask in 0..1u32 << self.cx_g.nv {
                rep.summands += 1;
                // hat bump map on the window: exponent-zero terms
                let mut cols: Vec<u64> = vec![0; np];
                for (i, &ki) in src.iter().enumerate() {
                    for &(_, t, e) in psi.row(self.cx_g.gen_id(ki, mask)) {
                        if e == 0 && self.cx_plus.e_of(t) == mask {
                            cols[i] |= 1 << tpos[&self.cx_plus.k_of(t)];
                        }
                    }
                }
                if mask & vbit == 0 {
                    // extension image: the all-ones column telescopes to
                    // the window ends
                    let mut img = 0u64;
                    for &c in &cols {
                        img ^= c;
                    }
                    for i in 0..np {
                        if interior(i) && img >> i & 1 == 1 {
                            rep.failures.push(format!(
                                "psi.phi nonzero at K={kp:?} E={mask} window {i}"
                            ));
                        }
                    }
                    // upward partial sums form a section on the interior
                    for qi in 0..np {
                        if !interior(qi) {
                            continue;
                        }
                        let mut out = 0u64;
                        for (i, &c) in cols.iter().enumerate() {
                            if src_p(i) > tgt_p(qi) {
                                out ^= c;
                            }
                        }
                        for i in 0..np {
                            if interior(i) && (out >> i & 1 == 1) != (i == qi) {
                                rep.failures.push(format!(
                                    "section fails at K={kp:?} E={mask} q={qi} row {i}"
                                ));
                            }
                        }
                    }
                    // boxed injectivity (the kernel of the unboxed map is
                    // the full extension image, which no box contains)
                    if rank64(&cols) != np {
                        rep.failures.push(format!("hat bump map singular at K={kp:?} E={mask}"));
                    }
                } else {
                    // v in E: invert via the half-infinite sums picked by
                    // the order of the two boundary exponents at v
                    let mut crossings = 0;
                    let mut qcols: Vec<u64> = vec![0; np];
                    for qi in 0..np {
                        // the target at window qi is [(K, p-1), E] for the
                        // source evaluation p = tgt_p(qi) + 1
                        let p = tgt_p(qi) + 1;
                        let kv = insert_coord(kp, self.v, p);
                        let Ok((a, b)) = ab_exponents(&self.g, &kv, mask, self.v, &mut cache)
                        else {
                            continue;
                        };
                        if a == b {
                            crossings += 1;
                        }
                        for (i, sp) in (0..np).map(src_p).enumerate() {
                            let keep = match a.cmp(&b) {
                                std::cmp::Ordering::Less => sp >= p,
                                std::cmp::Ordering::Greater => sp <= p,
                                std::cmp::Ordering::Equal => true,
                            };
                            if keep {
                                qcols[qi] |= 1 << i;
                            }
                        }
                    }
                    if crossings > 1 {
                        rep.failures.push(format!(
                            "multiple exponent crossings at K={kp:?} E={mask}"
                        ));
                    }
                    // psi q = id and q psi = id on interior entries
                    for j in 0..np {
                        if !interior(j) {
                            continue;
                        }
                        let mut pq = 0u64;
                        let mut qp = 0u64;
                        for i in 0..np {
                            if qcols[j] >> i & 1 == 1 {
                                pq ^= cols[i];
                            }
                            if cols[j] >> i & 1 == 1 {
                                qp ^= qcols[i];
                            }
                        }
                        for i in 0..np {
                            if !interior(i) {
                                continue;
                            }
                            if (pq >> i & 1 == 1) != (i == j) {
                                rep.failures.push(format!(
                                    "psi.q != id at K={kp:?} E={mask} entry ({i},{j})"
                                ));
                            }
                            if (qp >> i & 1 == 1) != (i == j) {
                                rep.failures.push(format!(
                                    "q.psi != id at K={kp:?} E={mask} entry ({i},{j})"
                                ));
                            }
                        }
                    }
                }
            }
        }
        rep
    }
}

fn rank64(cols: &[u64]) -> usize {
    let mut basis: Vec<u64> = Vec::new();
    let mut rank = 0;
    for &c in cols {
        let mut c = c;
        for &b in &basis {
            c = c.min(c ^ b);
        }
        if c != 0 {
            basis.push(c);
            basis.sort_unstable_by(|a, b| b.cmp(a));
            rank += 1;
        }
    }
    rank
}

/// One exact-triangle block of SpinC classes, with the inferred ranks of
/// the connecting maps from the bumped graph back down.
#[derive(Debug)]
pub struct LesBlock {
    pub dims: [BTreeMap<u32, usize>; 3],
    pub connecting: Vec<(u32, i64)>,
    pub ok: bool,
}

#[derive(Debug)]
pub struct LesReport {
    pub n: u32,
    pub heuristic: bool,
    pub blocks: Vec<LesBlock>,
}

impl LesReport {
    pub fn ok(&self) -> bool {
        self.blocks.iter().all(|b| b.ok)
    }
}

/// SpinC representatives: the full list for an invertible intersection
/// form, a window around the framing vector otherwise (the classes
/// outside a modest window carry no homology in the boxed models).
fn spinc_reps(g: &PlumbingGraph, window: i64) -> Result<Vec<CharVector>, CharlatError> {
    if g.n() == 0 {
        return Ok(vec![vec![]]);
    }
    if g.intersection_matrix().det() != 0 {
        return Ok(enumerate_spinc(g)?.into_iter().map(|c| c.representative).collect());
    }
    let ctx = SpinCContext::new(g);
    let nv = g.n();
    let mut seen: Vec<Vec<i128>> = Vec::new();
    let mut out = Vec::new();
    let mut t = vec![-window; nv];
    'outer: loop {
        let k: CharVector = (0..nv).map(|w| g.framing(w) + 2 * t[w]).collect();
        let key = ctx.class_key(&k);
        if !seen.contains(&key) {
            seen.push(key);
            out.push(k);
        }
        for i in 0..nv {
            if t[i] < window {
                t[i] += 1;
                continue 'outer;
            }
            t[i] = -window;
        }
        break;
    }
    Ok(out)
}

/// Necessary numerical conditions for the truncated long exact sequence:
/// within each block of SpinC classes closed under the three maps, the
/// delta-graded dimensions must admit nonnegative map ranks with exactness
/// at every term. Returns the inferred connecting ranks per block.
pub fn les_rank_check(
    g: &PlumbingGraph,
    v: usize,
    n: u32,
    radius_cap: i64,
) -> Result<LesReport, TriangleError> {
    if v >= g.n() {
        return Err(TriangleError::VertexOutOfRange(v));
    }
    let g_minus = g.delete_vertex(v);
    let g_plus = g.bump_framing(v, 1);
    let graphs = [&g_minus, g, &g_plus];
    let reps: Vec<Vec<CharVector>> =
        graphs.iter().map(|gr| spinc_reps(gr, 3)).collect::<Result<_, _>>()?;
    let ctxs: Vec<SpinCContext> = graphs.iter().map(|gr| SpinCContext::new(gr)).collect();

    // union-find over (graph, class key); keys come from the reps plus the
    // vectors the maps link them to
    let mut nodes: HashMap<(usize, Vec<i128>), usize> = HashMap::new();
    let mut parent: Vec<usize> = Vec::new();
    let node = |nodes: &mut HashMap<(usize, Vec<i128>), usize>,
                    parent: &mut Vec<usize>,
                    gi: usize,
                    key: Vec<i128>| {
        *nodes.entry((gi, key)).or_insert_with(|| {
            parent.push(parent.len());
            parent.len() - 1
        })
    };
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut class_of: Vec<Vec<usize>> = vec![Vec::new(); 3];
    for (gi, reps_g) in reps.iter().enumerate() {
        for k in reps_g {
            let id = node(&mut nodes, &mut parent, gi, ctxs[gi].class_key(k));
            class_of[gi].push(id);
        }
    }
    // links: restriction to G - v, all odd shifts at v into the bump, and
    // every extension of a G - v class over a window of evaluations at v
    for k in &reps[1] {
        let a = node(&mut nodes, &mut parent, 1, ctxs[1].class_key(k));
        let b = node(&mut nodes, &mut parent, 0, ctxs[0].class_key(&drop_coord(k, v)));
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
        for m in -3i64..=4 {
            let mut kp = k.clone();
            kp[v] += 2 * m - 1;
            let c = node(&mut nodes, &mut parent, 2, ctxs[2].class_key(&kp));
            let (ra, rc) = (find(&mut parent, a), find(&mut parent, c));
            parent[ra] = rc;
        }
    }
    for k in &reps[0] {
        let b = node(&mut nodes, &mut parent, 0, ctxs[0].class_key(k));
        for t in -3i64..=3 {
            let kv = insert_coord(k, v, g.framing(v) + 2 * t);
            let a = node(&mut nodes, &mut parent, 1, ctxs[1].class_key(&kv));
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }

    // stabilized delta-dims per block and graph
    let mut dims: HashMap<usize, [BTreeMap<u32, usize>; 3]> = HashMap::new();
    let mut heuristic = false;
    for gi in 0..3 {
        for (ci, k) in reps[gi].iter().enumerate() {
            let root = find(&mut parent, class_of[gi][ci]);
            let res = stabilize(graphs[gi], k, n, 1, radius_cap)?;
            heuristic |= res.heuristic;
            let entry = dims.entry(root).or_default();
            for (d, c) in res.decomposition.delta_dims() {
                *entry[gi].entry(d).or_insert(0) += c;
            }
        }
    }

    let mut blocks: Vec<(usize, [BTreeMap<u32, usize>; 3])> = dims.into_iter().collect();
    blocks.sort_by_key(|&(root, _)| root);
    let blocks = blocks
        .into_iter()
        .map(|(_, d)| {
            let (connecting, ok) = solve_ranks(&d);
            LesBlock { dims: d, connecting, ok }
        })
        .collect();
    Ok(LesReport { n, heuristic, blocks })
}

/// Exactness forces the ranks from the top delta down: the connecting rank
/// out of delta i+1 is the bump group's dimension there minus the bump
/// map's rank, and each kernel equals the previous image. All ranks must
/// stay within [0, dim] and the bottom bump map must be onto.
fn solve_ranks(dims: &[BTreeMap<u32, usize>; 3]) -> (Vec<(u32, i64)>, bool) {
    let dmax = dims
        .iter()
        .flat_map(|d| d.keys().copied())
        .max()
        .unwrap_or(0);
    let dim = |gi: usize, i: i64| -> i64 {
        if i < 0 {
            return 0;
        }
        *dims[gi].get(&(i as u32)).unwrap_or(&0) as i64
    };
    let mut connecting = Vec::new();
    let mut ok = true;
    let mut g_up = 0i64; // rank of the bump map one delta above
    for i in (0..=dmax as i64).rev() {
        let c = dim(2, i + 1) - g_up;
        let f = dim(0, i) - c;
        let gq = dim(1, i) - f;
        ok &= c >= 0 && c <= dim(2, i + 1) && c <= dim(0, i);
        ok &= f >= 0 && f <= dim(0, i) && f <= dim(1, i);
        ok &= gq >= 0 && gq <= dim(1, i) && gq <= dim(2, i);
        connecting.push((i as u32, c));
        g_up = gq;
    }
    // the sequence ends at the empty group below delta 0
    ok &= g_up == dim(2, 0);
    connecting.reverse();
    (connecting, ok)
}

/// Human-readable triangle report used by the CLI.
pub fn render_report(
    phi: &ChainMapReport,
    psi: &ChainMapReport,
    pmap: &ChainMapReport,
    compose: &ChainMapReport,
    factor: &ChainMapReport,
    ses: &SesReport,
    les: &LesReport,
) -> String {
    let mut s = String::new();
    let line = |s: &mut String, name: &str, r: &ChainMapReport| {
        let _ = writeln!(
            s,
            "{name}: {} checked={} skipped={} boundary={} violations={}",
            if r.ok() { "pass" } else { "FAIL" },
            r.checked,
            r.skipped,
            r.boundary_terms,
            r.violations.len()
        );
    };
    line(&mut s, "chain-map extension", phi);
    line(&mut s, "chain-map bump", psi);
    line(&mut s, "chain-map comparison", pmap);
    line(&mut s, "composite-zero", compose);
    line(&mut s, "factorization", factor);
    let _ = writeln!(
        s,
        "hat-exactness: {} summands={} boundary_excluded={} failures={}",
        if ses.ok() { "pass" } else { "FAIL" },
        ses.summands,
        ses.boundary_excluded,
        ses.failures.len()
    );
    for f in ses.failures.iter().take(5) {
        let _ = writeln!(s, "  {f}");
    }
    let _ = writeln!(
        s,
        "les-ranks: {} n={} blocks={} heuristic={}",
        if les.ok() { "pass" } else { "FAIL" },
        les.n,
        les.blocks.len(),
        les.heuristic as u8
    );
    for b in &les.blocks {
        let ranks: Vec<String> =
            b.connecting.iter().map(|&(d, r)| format!("{d}:{r}")).collect();
        let _ = writeln!(
            s,
            "  block {} connecting=[{}]",
            if b.ok { "ok" } else { "INCONSISTENT" },
            ranks.join(" ")
        );
    }
    s
}
