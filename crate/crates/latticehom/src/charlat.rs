//! Characteristic vectors, lattice weights, SpinC classes and Maslov
//! gradings.
//!
//! A characteristic vector `K` evaluates on vertices with `K(v) = m_v mod 2`.
//! The weight `f([K,I])` is `(sum_{v in I} K(v) + (sum_{v in I} v)^2) / 2`,
//! and `g([K,E])` its minimum over subsets `I` of `E`. These control every
//! U-exponent in the boundary map.

use std::collections::HashMap;

use num::rational::Ratio;
use num::Zero;
use thiserror::Error;

use crate::graph::PlumbingGraph;
use crate::matrix::{smith_normal_form, solve_rational, Rat, Smith};

pub type CharVector = Vec<i64>;

#[derive(Debug, Error)]
pub enum CharlatError {
    #[error("vector is not characteristic at index {0}")]
    NotCharacteristic(usize),
    #[error("vertex index {0} out of range")]
    VertexOutOfRange(usize),
    #[error("intersection form is degenerate; supply explicit representatives")]
    Degenerate,
    #[error("class is not torsion; absolute gradings are undefined")]
    NotTorsion,
    #[error("class is torsion; use the absolute grading")]
    Torsion,
    #[error("generators lie in different classes")]
    SpinCMismatch,
    #[error("{0} is not in the cube set E")]
    NotInE(usize),
}

pub fn is_characteristic(g: &PlumbingGraph, k: &[i64]) -> Result<(), CharlatError> {
    if k.len() != g.n() {
        return Err(CharlatError::VertexOutOfRange(k.len()));
    }
    for v in 0..g.n() {
        if (k[v] - g.framing(v)).rem_euclid(2) != 0 {
            return Err(CharlatError::NotCharacteristic(v));
        }
    }
    Ok(())
}

/// `f([K,I])`: half of the evaluation of `K` on `sum_{v in I} v` plus the
/// self-pairing of that class.
pub fn weight_f(g: &PlumbingGraph, k: &[i64], i_mask: u32) -> Result<i64, CharlatError> {
    is_characteristic(g, k)?;
    let mut two_f = 0i64;
    for v in 0..g.n() {
        if i_mask & (1 << v) != 0 {
            two_f += k[v] + g.framing(v);
            // each edge inside I is counted from both ends
            two_f += 2 * ((g.nbr_mask(v) & i_mask & ((1 << v) - 1)).count_ones() as i64);
        }
    }
    debug_assert_eq!(two_f % 2, 0);
    Ok(two_f / 2)
}

/// Per-`K` tables of `f` and `g` over all vertex subsets.
struct KTable {
    g: Vec<i64>,
}

fn build_ktable(g: &PlumbingGraph, k: &[i64]) -> KTable {
    let n = g.n();
    assert!(n <= 16, "weight tables need 2^n entries");
    let size = 1usize << n;
    let mut f = vec![0i64; size];
    for mask in 1..size {
        let v = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << v);
        f[mask] = f[rest]
            + (k[v] + g.framing(v)) / 2
            + (g.nbr_mask(v) & rest as u32).count_ones() as i64;
    }
    let mut gt = f;
    for mask in 1..size {
        let mut best = gt[mask];
        let mut m = mask;
        while m != 0 {
            let v = m.trailing_zeros() as usize;
            m &= m - 1;
            best = best.min(gt[mask & !(1 << v)]);
        }
        gt[mask] = best;
    }
    KTable { g: gt }
}

/// Memoized `g`-values, keyed by the characteristic vector. A table covers
/// every subset of `V` at once, so repeated queries against the same `K`
/// are table lookups.
#[derive(Default)]
pub struct WeightCache {
    tables: HashMap<CharVector, KTable>,
}

impl WeightCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn table<'a>(&'a mut self, g: &PlumbingGraph, k: &[i64]) -> &'a KTable {
        if !self.tables.contains_key(k) {
            self.tables.insert(k.to_vec(), build_ktable(g, k));
        }
        &self.tables[k]
    }
}

/// `g([K,E]) = min { f([K,I]) : I subset of E }`.
pub fn min_weight_g(
    g: &PlumbingGraph,
    k: &[i64],
    e_mask: u32,
    cache: &mut WeightCache,
) -> Result<i64, CharlatError> {
    is_characteristic(g, k)?;
    Ok(cache.table(g, k).g[e_mask as usize])
}

/// `K + 2v*`, evaluating as `K(w) + 2 M[v,w]`.
pub fn shift_k(g: &PlumbingGraph, k: &[i64], v: usize) -> Result<CharVector, CharlatError> {
    if v >= g.n() {
        return Err(CharlatError::VertexOutOfRange(v));
    }
    let mut out = k.to_vec();
    out[v] += 2 * g.framing(v);
    let mut m = g.nbr_mask(v);
    while m != 0 {
        let w = m.trailing_zeros() as usize;
        m &= m - 1;
        out[w] += 2;
    }
    Ok(out)
}

/// The two U-exponents of the boundary terms at `v`:
/// `a_v = g([K, E-v]) - g([K,E])` and
/// `b_v = (K(v)+m_v)/2 + g([K+2v*, E-v]) - g([K,E])`.
/// Both are nonnegative and at least one is zero.
pub fn ab_exponents(
    g: &PlumbingGraph,
    k: &[i64],
    e_mask: u32,
    v: usize,
    cache: &mut WeightCache,
) -> Result<(i64, i64), CharlatError> {
    if v >= g.n() || e_mask & (1 << v) == 0 {
        return Err(CharlatError::NotInE(v));
    }
    let rest = e_mask & !(1 << v);
    let a_big = min_weight_g(g, k, rest, cache)?;
    let shifted = shift_k(g, k, v)?;
    let b_big = (k[v] + g.framing(v)) / 2 + min_weight_g(g, &shifted, rest, cache)?;
    let base = a_big.min(b_big);
    debug_assert_eq!(base, min_weight_g(g, k, e_mask, cache)?);
    Ok((a_big - base, b_big - base))
}

/// A generator `U^i [K, E]` of the cube complex.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CubePair {
    pub k: CharVector,
    pub e_mask: u32,
    pub u_exp: u32,
}

impl CubePair {
    pub fn delta(&self) -> u32 {
        self.e_mask.count_ones()
    }
}

/// A class of characteristic vectors modulo `2 Im_Z(M_G)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinCClass {
    pub representative: CharVector,
    /// canonical coset coordinates; equal keys mean equal classes
    pub key: Vec<i128>,
    pub torsion: bool,
    /// divisibility of the class in the cokernel modulo torsion; 0 when torsion
    pub divisibility: i128,
}

/// Smith data of `M_G`, shared by the SpinC operations.
pub struct SpinCContext {
    pub smith: Smith,
    diag_is_zero: Vec<bool>,
}

impl SpinCContext {
    pub fn new(g: &PlumbingGraph) -> Self {
        let smith = smith_normal_form(&g.intersection_matrix());
        let diag_is_zero = smith.d.iter().map(|&d| d == 0).collect();
        SpinCContext { smith, diag_is_zero }
    }

    /// Coset key of `K` under `2 Im M`: coordinates of `U K` reduced mod
    /// `2 d_i` where `d_i != 0`, exact where `d_i = 0`.
    pub fn class_key(&self, k: &[i64]) -> Vec<i128> {
        let c: Vec<i128> = k.iter().map(|&x| x as i128).collect();
        let w = self.smith.u.mul_vec(&c);
        self.smith
            .d
            .iter()
            .zip(&w)
            .map(|(&d, &w)| if d == 0 { w } else { w.rem_euclid(2 * d) })
            .collect()
    }

    pub fn same_class(&self, k1: &[i64], k2: &[i64]) -> bool {
        self.class_key(k1) == self.class_key(k2)
    }

    fn as_i128(k: &[i64]) -> Vec<i128> {
        k.iter().map(|&x| x as i128).collect()
    }

    pub fn torsion_data(&self, k: &[i64]) -> (bool, i128) {
        let w = self.smith.u.mul_vec(&Self::as_i128(k));
        let mut torsion = true;
        let mut div = 0i128;
        for (i, &w) in w.iter().enumerate() {
            if self.diag_is_zero[i] {
                if w != 0 {
                    torsion = false;
                }
                div = crate::matrix::gcd(div, w);
            }
        }
        (torsion, if torsion { 0 } else { div })
    }
}

/// Canonical class of `K`: the representative is the lexicographically least
/// vector among `K + 2 M x` for `x` in the unit box `[-1,1]^V`.
pub fn spinc_of(
    g: &PlumbingGraph,
    ctx: &SpinCContext,
    k: &[i64],
) -> Result<SpinCClass, CharlatError> {
    is_characteristic(g, k)?;
    let n = g.n();
    let m = g.intersection_matrix();
    // reduce to a class-determined base point first: write K = m + 2c and
    // reduce the Smith coordinates of c modulo the diagonal
    let c: Vec<i128> = (0..n).map(|v| (k[v] - g.framing(v)) as i128 / 2).collect();
    let mut w = ctx.smith.u.mul_vec(&c);
    for (i, &d) in ctx.smith.d.iter().enumerate() {
        if d != 0 {
            w[i] = w[i].rem_euclid(d);
        }
    }
    let c0 = ctx.smith.u_inv.mul_vec(&w);
    let k0: Vec<i64> = (0..n).map(|v| g.framing(v) + 2 * c0[v] as i64).collect();
    debug_assert!(ctx.same_class(k, &k0));
    let mut best = k0.clone();
    let mut x = vec![-1i128; n];
    'outer: loop {
        let mx = m.mul_vec(&x);
        let cand: Vec<i64> = (0..n).map(|v| k0[v] + 2 * mx[v] as i64).collect();
        if cand < best {
            best = cand;
        }
        for i in 0..n {
            if x[i] < 1 {
                x[i] += 1;
                continue 'outer;
            }
            x[i] = -1;
        }
        break;
    }
    let (torsion, divisibility) = ctx.torsion_data(k);
    Ok(SpinCClass { representative: best, key: ctx.class_key(k), torsion, divisibility })
}

/// All SpinC classes of a nondegenerate forest; there are `|det M_G|`.
pub fn enumerate_spinc(g: &PlumbingGraph) -> Result<Vec<SpinCClass>, CharlatError> {
    let ctx = SpinCContext::new(g);
    if ctx.smith.d.contains(&0) {
        return Err(CharlatError::Degenerate);
    }
    let n = g.n();
    let framings: Vec<i128> = (0..n).map(|v| g.framing(v) as i128).collect();
    let mut out = Vec::new();
    let mut t = vec![0i128; n];
    'outer: loop {
        // c has Smith coordinates t, so distinct t give distinct cosets of Im M
        let c = ctx.smith.u_inv.mul_vec(&t);
        let k: Vec<i64> = (0..n).map(|v| (framings[v] + 2 * c[v]) as i64).collect();
        out.push(spinc_of(g, &ctx, &k)?);
        for i in 0..n {
            if t[i] + 1 < ctx.smith.d[i] {
                t[i] += 1;
                continue 'outer;
            }
            t[i] = 0;
        }
        break;
    }
    out.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(out)
}

pub fn torsion_data(g: &PlumbingGraph, k: &[i64]) -> (bool, i128) {
    SpinCContext::new(g).torsion_data(k)
}

/// `K^2 = K^T x` for any rational solution of `M x = K`; defined for torsion
/// classes only.
pub fn k_square(g: &PlumbingGraph, k: &[i64]) -> Result<Rat, CharlatError> {
    is_characteristic(g, k)?;
    let c: Vec<i128> = k.iter().map(|&x| x as i128).collect();
    let x = solve_rational(&g.intersection_matrix(), &c).ok_or(CharlatError::NotTorsion)?;
    let mut acc = Rat::zero();
    for (ki, xi) in c.iter().zip(&x) {
        acc += Ratio::from_integer(*ki) * xi;
    }
    Ok(acc)
}

/// A representative of maximal square in the class of `k`, for negative
/// definite forms (otherwise `k` is returned unchanged). `(k + 2Mx)^2 =
/// k^2 + 4(k.x + x M x)` is a concave integer quadratic in `x`; rounding
/// its rational maximizer and hill-climbing finds the lattice maximum.
/// Centering a box here puts the classes of top grading at the origin,
/// which makes box stabilization converge at small radii.
pub fn max_square_representative(
    g: &PlumbingGraph,
    k: &[i64],
) -> Result<CharVector, CharlatError> {
    let m = g.intersection_matrix();
    if !m.is_negative_definite() {
        return Ok(k.to_vec());
    }
    is_characteristic(g, k)?;
    let n = g.n();
    let kk: Vec<i128> = k.iter().map(|&x| x as i128).collect();
    let q = |x: &[i128]| -> i128 {
        let mx = m.mul_vec(x);
        (0..n).map(|v| x[v] * (kk[v] + mx[v])).sum()
    };
    // real maximizer of k.x + xMx is -M^{-1}k / 2
    let y = solve_rational(&m, &kk).expect("definite form is invertible");
    let mut best: Option<(i128, Vec<i128>)> = None;
    let combos = 1usize << n.min(16);
    for bits in 0..combos {
        let x: Vec<i128> = (0..n)
            .map(|v| {
                let half = -y[v] / Ratio::from_integer(2);
                let f = half.floor().to_integer();
                if bits >> v & 1 == 1 { f + 1 } else { f }
            })
            .collect();
        let val = q(&x);
        if best.as_ref().is_none_or(|(b, bx)| val > *b || (val == *b && x < *bx)) {
            best = Some((val, x));
        }
    }
    let (mut val, mut x) = best.unwrap();
    loop {
        let mut improved = false;
        for v in 0..n {
            for step in [1i128, -1] {
                let mut cand = x.clone();
                cand[v] += step;
                let cv = q(&cand);
                if cv > val {
                    val = cv;
                    x = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    let mx = m.mul_vec(&x);
    Ok((0..n).map(|v| k[v] + 2 * mx[v] as i64).collect())
}

/// Absolute Maslov grading
/// `gr(U^i [K,E]) = -2i + 2 g([K,E]) + |E| + (K^2 - 3 sigma - 2 chi) / 4`,
/// defined when the class of `K` is torsion.
pub fn maslov_gr(
    g: &PlumbingGraph,
    gen: &CubePair,
    cache: &mut WeightCache,
) -> Result<Rat, CharlatError> {
    let ksq = k_square(g, &gen.k)?;
    let (sigma, chi) = g.signature_chi();
    let gval = min_weight_g(g, &gen.k, gen.e_mask, cache)?;
    Ok(Rat::from_integer(-2 * gen.u_exp as i128 + 2 * gval as i128 + gen.delta() as i128)
        + (ksq - Ratio::from_integer(3 * sigma as i128 + 2 * chi as i128)) / Ratio::from_integer(4))
}

/// Relative Maslov grading of two generators in the same non-torsion class,
/// as a residue in `[0, d)`. The `K^2` difference is evaluated through an
/// integral lift `h` with `M h = (K - K') / 2`, so the answer is exact; a
/// different lift changes it by a multiple of `d`.
pub fn relative_maslov(
    g: &PlumbingGraph,
    ctx: &SpinCContext,
    gen1: &CubePair,
    gen2: &CubePair,
    cache: &mut WeightCache,
) -> Result<Rat, CharlatError> {
    is_characteristic(g, &gen1.k)?;
    is_characteristic(g, &gen2.k)?;
    if !ctx.same_class(&gen1.k, &gen2.k) {
        return Err(CharlatError::SpinCMismatch);
    }
    let (torsion, d) = ctx.torsion_data(&gen1.k);
    if torsion {
        return Err(CharlatError::Torsion);
    }
    let half_diff: Vec<i128> = gen1
        .k
        .iter()
        .zip(&gen2.k)
        .map(|(&a, &b)| (a as i128 - b as i128) / 2)
        .collect();
    let h = ctx
        .smith
        .solve(&half_diff)
        .expect("same class means the half-difference is in the image");
    // (K^2 - K'^2)/4 = h . (K + K') / 2
    let mut quarter = Rat::zero();
    for (hv, (&a, &b)) in h.iter().zip(gen1.k.iter().zip(&gen2.k)) {
        quarter += Ratio::from_integer(hv * (a as i128 + b as i128));
    }
    quarter /= Ratio::from_integer(2);
    let g1 = min_weight_g(g, &gen1.k, gen1.e_mask, cache)? as i128;
    let g2 = min_weight_g(g, &gen2.k, gen2.e_mask, cache)? as i128;
    let raw = Rat::from_integer(
        -2 * (gen1.u_exp as i128 - gen2.u_exp as i128) + 2 * (g1 - g2) + gen1.delta() as i128
            - gen2.delta() as i128,
    ) + quarter;
    // reduce into [0, d)
    let dq = Rat::from_integer(d);
    let q = (raw / dq).floor();
    Ok(raw - q * dq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::testutil::{e8, graph, single};
    use crate::matrix::rat;

    #[test]
    fn weight_f_examples() {
        let g = single(1);
        assert_eq!(weight_f(&g, &[1], 0).unwrap(), 0);
        assert_eq!(weight_f(&g, &[1], 1).unwrap(), 1);
        let g = graph(&[-2, -2], &[(0, 1)]);
        assert_eq!(weight_f(&g, &[0, 0], 0b11).unwrap(), -1);
        assert!(matches!(
            weight_f(&g, &[1, 0], 0),
            Err(CharlatError::NotCharacteristic(0))
        ));
    }

    #[test]
    fn min_weight_g_examples() {
        let g = single(1);
        let mut c = WeightCache::new();
        assert_eq!(min_weight_g(&g, &[1], 0, &mut c).unwrap(), 0);
        assert_eq!(min_weight_g(&g, &[1], 1, &mut c).unwrap(), 0);
        assert_eq!(min_weight_g(&g, &[-3], 1, &mut c).unwrap(), -1);
    }

    #[test]
    fn shift_examples() {
        let g = single(1);
        assert_eq!(shift_k(&g, &[1], 0).unwrap(), vec![3]);
        let g = single(0);
        assert_eq!(shift_k(&g, &[4], 0).unwrap(), vec![4]);
        let g = graph(&[-2, -2], &[(0, 1)]);
        assert_eq!(shift_k(&g, &[0, 0], 0).unwrap(), vec![-4, 2]);
    }

    #[test]
    fn ab_exponent_examples() {
        let mut c = WeightCache::new();
        let g = single(1);
        for n in -5i64..=5 {
            let (a, b) = ab_exponents(&g, &[2 * n + 1], 1, 0, &mut c).unwrap();
            if n >= -1 {
                assert_eq!((a, b), (0, n + 1), "n={n}");
            } else {
                assert_eq!((a, b), (-(n + 1), 0), "n={n}");
            }
        }
        let g = single(0);
        for n in 1i64..=5 {
            assert_eq!(ab_exponents(&g, &[2 * n], 1, 0, &mut c).unwrap(), (0, n));
            assert_eq!(ab_exponents(&g, &[-2 * n], 1, 0, &mut c).unwrap(), (n, 0));
        }
        assert!(ab_exponents(&g, &[0], 0, 0, &mut c).is_err());
    }

    #[test]
    fn min_ab_zero_and_g_split_property() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let n = rng.gen_range(1..=4);
            let mut edges = Vec::new();
            for j in 1..n {
                if rng.gen_bool(0.7) {
                    edges.push((rng.gen_range(0..j), j));
                }
            }
            let framings: Vec<i64> = (0..n).map(|_| rng.gen_range(-4..=3)).collect();
            let g = graph(&framings, &edges);
            let k: Vec<i64> = (0..n).map(|v| framings[v] + 2 * rng.gen_range(-3i64..=3)).collect();
            let mut c = WeightCache::new();
            for e_mask in 1u32..(1 << n) {
                let gval = min_weight_g(&g, &k, e_mask, &mut c).unwrap();
                let mut m = e_mask;
                while m != 0 {
                    let v = m.trailing_zeros() as usize;
                    m &= m - 1;
                    let (a, b) = ab_exponents(&g, &k, e_mask, v, &mut c).unwrap();
                    assert!(a >= 0 && b >= 0);
                    assert_eq!(a.min(b), 0);
                    // g([K,E]) = min(A_v, B_v)
                    let rest = e_mask & !(1 << v);
                    let a_big = min_weight_g(&g, &k, rest, &mut c).unwrap();
                    let shifted = shift_k(&g, &k, v).unwrap();
                    let b_big =
                        (k[v] + framings[v]) / 2 + min_weight_g(&g, &shifted, rest, &mut c).unwrap();
                    assert_eq!(gval, a_big.min(b_big));
                    // g is <= 0 and monotone under inclusion
                    assert!(gval <= 0);
                    assert!(gval <= min_weight_g(&g, &k, rest, &mut c).unwrap());
                }
            }
        }
    }

    /// Changing the framing at `v` while compensating in `K(v)` so that
    /// `K(v) + m_v` is unchanged leaves both exponents at `v` unchanged.
    #[test]
    fn framing_invariance_of_exponents() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..40 {
            let n = rng.gen_range(1..=4);
            let mut edges = Vec::new();
            for j in 1..n {
                if rng.gen_bool(0.7) {
                    edges.push((rng.gen_range(0..j), j));
                }
            }
            let framings: Vec<i64> = (0..n).map(|_| rng.gen_range(-4..=3)).collect();
            let g = graph(&framings, &edges);
            let v = rng.gen_range(0..n);
            // even shift keeps both K and K' characteristic
            let delta = 2 * rng.gen_range(-2i64..=2);
            let g2 = g.bump_framing(v, delta);
            let k: Vec<i64> = (0..n).map(|w| framings[w] + 2 * rng.gen_range(-3i64..=3)).collect();
            let mut k2 = k.clone();
            k2[v] -= delta; // keeps K(v) + m_v fixed
            let mut c1 = WeightCache::new();
            let mut c2 = WeightCache::new();
            for e_mask in 1u32..(1 << n) {
                if e_mask & (1 << v) == 0 {
                    continue;
                }
                let ab1 = ab_exponents(&g, &k, e_mask, v, &mut c1).unwrap();
                let ab2 = ab_exponents(&g2, &k2, e_mask, v, &mut c2).unwrap();
                assert_eq!(ab1, ab2);
            }
        }
    }

    #[test]
    fn spinc_examples() {
        let g = single(1);
        let ctx = SpinCContext::new(&g);
        assert!(ctx.same_class(&[1], &[3]));
        let s1 = spinc_of(&g, &ctx, &[1]).unwrap();
        let s3 = spinc_of(&g, &ctx, &[3]).unwrap();
        assert_eq!(s1.key, s3.key);
        assert_eq!(s1.representative, s3.representative);
        assert!(s1.torsion);

        let g = single(0);
        let ctx = SpinCContext::new(&g);
        assert!(!ctx.same_class(&[2], &[4]));
        assert!(ctx.same_class(&[2], &[2]));

        let g = single(-2);
        let classes = enumerate_spinc(&g).unwrap();
        assert_eq!(classes.len(), 2);
        let reps: Vec<i64> = classes.iter().map(|c| c.representative[0].rem_euclid(4)).collect();
        assert!(reps.contains(&0) && reps.contains(&2));

        assert_eq!(enumerate_spinc(&single(1)).unwrap().len(), 1);
        assert!(matches!(enumerate_spinc(&single(0)), Err(CharlatError::Degenerate)));
    }

    #[test]
    fn torsion_and_square() {
        let g = single(0);
        assert_eq!(torsion_data(&g, &[2]), (false, 2));
        assert_eq!(torsion_data(&g, &[0]), (true, 0));
        let g = single(1);
        assert_eq!(torsion_data(&g, &[3]), (true, 0));
        assert_eq!(k_square(&g, &[1]).unwrap(), rat(1, 1));
        assert_eq!(k_square(&g, &[3]).unwrap(), rat(9, 1));
        assert_eq!(k_square(&e8(), &[0; 8]).unwrap(), rat(0, 1));
        assert!(k_square(&single(0), &[2]).is_err());
    }

    #[test]
    fn maslov_examples() {
        let mut c = WeightCache::new();
        let g = single(1);
        let gr = maslov_gr(&g, &CubePair { k: vec![1], e_mask: 0, u_exp: 0 }, &mut c).unwrap();
        assert_eq!(gr, rat(-1, 1));
        for n in 0i64..=4 {
            let gen = CubePair {
                k: vec![2 * n + 1],
                e_mask: 1,
                u_exp: (n * (n + 1) / 2) as u32,
            };
            assert_eq!(maslov_gr(&g, &gen, &mut c).unwrap(), rat(0, 1));
        }
        let g = single(0);
        let top = maslov_gr(&g, &CubePair { k: vec![0], e_mask: 1, u_exp: 0 }, &mut c).unwrap();
        let bot = maslov_gr(&g, &CubePair { k: vec![0], e_mask: 0, u_exp: 0 }, &mut c).unwrap();
        assert_eq!(top, rat(1, 2));
        assert_eq!(bot, rat(-1, 2));
    }

    #[test]
    fn torsion_parity() {
        // gradings in a torsion class differ by integers with the parity of
        // the delta difference
        let g = graph(&[-2, -2], &[(0, 1)]);
        let mut c = WeightCache::new();
        let base = CubePair { k: vec![0, 0], e_mask: 0, u_exp: 0 };
        let g0 = maslov_gr(&g, &base, &mut c).unwrap();
        for e_mask in 0u32..4 {
            for shift in [vec![0i64, 0], vec![-4, 2], vec![2, -4], vec![-2, -2]] {
                let k: Vec<i64> = shift.to_vec();
                let gen = CubePair { k, e_mask, u_exp: 0 };
                let gr = maslov_gr(&g, &gen, &mut c).unwrap();
                let diff = gr - g0;
                assert!(diff.is_integer());
                assert_eq!(
                    diff.numer().rem_euclid(2),
                    (gen.delta() as i128).rem_euclid(2),
                    "parity mismatch"
                );
            }
        }
    }

    #[test]
    fn relative_maslov_examples() {
        let g = single(0);
        let ctx = SpinCContext::new(&g);
        let mut c = WeightCache::new();
        let top = CubePair { k: vec![2], e_mask: 1, u_exp: 0 };
        let bot = CubePair { k: vec![2], e_mask: 0, u_exp: 0 };
        assert_eq!(relative_maslov(&g, &ctx, &top, &top, &mut c).unwrap(), rat(0, 1));
        assert_eq!(relative_maslov(&g, &ctx, &top, &bot, &mut c).unwrap(), rat(1, 1));
        // antisymmetry mod d = 2
        let xy = relative_maslov(&g, &ctx, &top, &bot, &mut c).unwrap();
        let yx = relative_maslov(&g, &ctx, &bot, &top, &mut c).unwrap();
        assert_eq!((xy + yx).numer().rem_euclid(2 * xy.denom()), 0);
        // mismatched classes rejected
        let other = CubePair { k: vec![4], e_mask: 0, u_exp: 0 };
        assert!(matches!(
            relative_maslov(&g, &ctx, &top, &other, &mut c),
            Err(CharlatError::SpinCMismatch)
        ));
    }
}
