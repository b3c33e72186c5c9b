//! Barcode of a boxed complex, computed at cell level.
//!
//! When the intersection matrix is invertible the complex splits into
//! finite levels: the slot U^i x [K0 + 2Mx, E] lives in level
//! j = i - g - chi(x), the differential preserves j, and the level-j piece
//! is the cubical subcomplex of cells whose filtration value
//! filt = -(minimal corner weight chi) is at most j. U is the inclusion of
//! one level into the next, so the whole U-module structure of the
//! homology is the persistence barcode of the filtration by filt. This
//! avoids expanding U-power slots entirely: one F2 reduction at cell
//! level replaces the truncated computations at every n.
//!
//! Gradings come for free: at level j a class of cube dimension |E| sits
//! in Maslov grading |E| - 2j + (K0^2 - 3 sigma - 2 chi)/4; the
//! x-dependent terms of the Maslov formula cancel against chi(x).

use num::rational::Ratio;

use crate::charlat::{k_square, CharlatError};
use crate::graph::PlumbingGraph;
use crate::homology::{ModuleDecomposition, SummandKind};
use crate::matrix::Rat;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error(transparent)]
    Charlat(#[from] CharlatError),
    #[error("intersection form is degenerate")]
    Degenerate,
    #[error("boxed complex too large ({cells} cells)")]
    TooLarge { cells: u64 },
}

/// Support envelope of a chain: `env[o]` is the largest filtration value
/// among its cells of Chebyshev box norm >= o, or i32::MIN. Truncation at
/// U^n drops the cells of a representative lying more than n levels below
/// the class, so the norm of the truncated representative is the largest
/// `o` with `env[o]` above the matching threshold.
pub type SupportEnv = Vec<i32>;

pub fn env_outer(env: &[i32], threshold: i64) -> i64 {
    env.iter().rposition(|&f| f as i64 > threshold).unwrap_or(0) as i64
}

/// One bar of the barcode: a class of cube dimension `delta` born at level
/// `birth`, living for `len` levels (None = forever). `cycle_env` is the
/// support envelope of the cycle representative; `chain_env` of the chain
/// that kills it (the generator of the Tor summand after truncation).
#[derive(Clone, Debug)]
pub struct Bar {
    pub delta: u32,
    pub birth: i64,
    pub len: Option<i64>,
    pub cycle_env: SupportEnv,
    pub chain_env: SupportEnv,
}

pub struct BoxBarcode {
    pub bars: Vec<Bar>,
    /// (K0^2 - 3 sigma - 2 chi) / 4 for the box center
    pub grading_const: Rat,
}

/// Extract the selected bits of `mask` at the positions set in `sel`,
/// packed to the low end.
fn pext(mask: u32, sel: u32) -> u32 {
    let (mut out, mut bit, mut s) = (0u32, 0u32, sel);
    while s != 0 {
        let b = s & s.wrapping_neg();
        if mask & b != 0 {
            out |= 1 << bit;
        }
        bit += 1;
        s ^= b;
    }
    out
}

const NONE: u32 = u32::MAX;

/// Persistence barcode of the good subcomplex of the radius-`radius` box
/// centered at the characteristic vector `center`.
pub fn box_barcode(
    g: &PlumbingGraph,
    center: &[i64],
    radius: i64,
) -> Result<BoxBarcode, PersistError> {
    let m = g.intersection_matrix();
    if m.det() == 0 {
        return Err(PersistError::Degenerate);
    }
    let grading_const = {
        let (sigma, chi) = g.signature_chi();
        (k_square(g, center)? - Ratio::from_integer(3 * sigma as i128 + 2 * chi as i128))
            / Ratio::from_integer(4)
    };
    let nv = g.n();
    let r = radius as usize;
    let side = 2 * r + 1;

    let nx = (side as u64).checked_pow(nv as u32).filter(|&n| n < u32::MAX as u64);
    let Some(nx) = nx else {
        return Err(PersistError::TooLarge { cells: u64::MAX });
    };
    let nx = nx as usize;
    // good cells per lattice point: cube directions must keep the whole
    // cube in the box, so only coordinates below the positive face count
    let amask_of = |digits: &[i64]| -> u32 {
        let mut a = 0u32;
        for (v, &d) in digits.iter().enumerate() {
            if d < (side - 1) as i64 {
                a |= 1 << v;
            }
        }
        a
    };
    let mut prefix: Vec<u64> = Vec::with_capacity(nx + 1);
    prefix.push(0);
    {
        let mut digits = vec![0i64; nv];
        for _ in 0..nx {
            let a = amask_of(&digits);
            prefix.push(prefix.last().unwrap() + (1u64 << a.count_ones()));
            for d in digits.iter_mut() {
                *d += 1;
                if *d < side as i64 {
                    break;
                }
                *d = 0;
            }
        }
    }
    let ncells = *prefix.last().unwrap();
    if ncells >= (u32::MAX - 1) as u64 {
        return Err(PersistError::TooLarge { cells: ncells });
    }
    let ncells = ncells as usize;

    // strides for moving one step along a coordinate
    let mut stride = vec![0usize; nv];
    let mut s = 1usize;
    for v in 0..nv {
        stride[v] = s;
        s *= side;
    }
    let framings: Vec<i64> = g.framings().to_vec();
    let mut mrows: Vec<Vec<i64>> = vec![vec![0; nv]; nv];
    for v in 0..nv {
        mrows[v][v] = framings[v];
    }
    for &(a, b) in g.edges() {
        mrows[a][b] = 1;
        mrows[b][a] = 1;
    }

    // filtration value per good cell: -(minimal corner chi), computed by
    // the face recursion filt(x, E) = max of the two faces along any
    // direction; base case filt(x, 0) = -chi(x). Descending x order makes
    // both faces available.
    let mut filt = vec![0i32; ncells];
    {
        let mut digits = vec![(side - 1) as i64; nv];
        for ix in (0..nx).rev() {
            // chi(x) = (K0 . x + x M x) / 2 with x centered at 0
            let x: Vec<i64> = digits.iter().map(|&d| d - r as i64).collect();
            let mut twochi = 0i64;
            for v in 0..nv {
                let mut mx = 0i64;
                for u in 0..nv {
                    mx += mrows[v][u] * x[u];
                }
                twochi += x[v] * (center[v] + mx);
            }
            debug_assert!(twochi % 2 == 0);
            let a = amask_of(&digits);
            let base = prefix[ix];
            let mut sub = 0u32;
            let mut c = 0u64;
            loop {
                let rank = (base + c) as usize;
                if sub == 0 {
                    filt[rank] = i32::try_from(-twochi / 2).expect("weight out of range");
                } else {
                    let v = sub.trailing_zeros() as usize;
                    let fm = sub & !(1 << v);
                    let f1 = filt[(base + pext(fm, a) as u64) as usize];
                    let ix2 = ix + stride[v];
                    // the neighbor's direction mask: x_v moved up by one
                    let a2 = {
                        let mut a2 = 0u32;
                        for (u, &d) in digits.iter().enumerate() {
                            let du = if u == v { d + 1 } else { d };
                            if du < (side - 1) as i64 {
                                a2 |= 1 << u;
                            }
                        }
                        a2
                    };
                    debug_assert_eq!(fm & !a2, 0);
                    let f2 = filt[(prefix[ix2] + pext(fm, a2) as u64) as usize];
                    filt[rank] = f1.max(f2);
                }
                c += 1;
                sub = sub.wrapping_sub(a) & a;
                if sub == 0 {
                    break;
                }
            }
            for d in digits.iter_mut() {
                *d -= 1;
                if *d >= 0 {
                    break;
                }
                *d = (side - 1) as i64;
            }
        }
    }

    // sort cells by (filtration, dimension, id)
    let fmin = *filt.iter().min().unwrap() as i64;
    let mut delta_of = vec![0u8; ncells];
    let mut outer_of = vec![0u8; ncells];
    {
        let mut digits = vec![0i64; nv];
        for ix in 0..nx {
            let a = amask_of(&digits);
            let out0 = digits.iter().map(|&d| (d - r as i64).unsigned_abs()).max().unwrap_or(0);
            let base = prefix[ix];
            let mut sub = 0u32;
            let mut c = 0u64;
            loop {
                delta_of[(base + c) as usize] = sub.count_ones() as u8;
                // box norm of the cube: its upper corners shift digits in E up
                let mut o = out0;
                let mut e = sub;
                while e != 0 {
                    let v = e.trailing_zeros() as usize;
                    e &= e - 1;
                    o = o.max((digits[v] + 1 - r as i64).unsigned_abs());
                }
                outer_of[(base + c) as usize] = o as u8;
                c += 1;
                sub = sub.wrapping_sub(a) & a;
                if sub == 0 {
                    break;
                }
            }
            for d in digits.iter_mut() {
                *d += 1;
                if *d < side as i64 {
                    break;
                }
                *d = 0;
            }
        }
    }
    let mut keys: Vec<u64> = (0..ncells)
        .map(|rank| {
            let fb = (filt[rank] as i64 - fmin) as u64;
            assert!(fb < 1 << 27);
            (fb << 37) | ((delta_of[rank] as u64) << 32) | rank as u64
        })
        .collect();
    keys.sort_unstable();
    let sorted: Vec<u32> = keys.iter().map(|&k| (k & 0xffff_ffff) as u32).collect();
    drop(keys);
    let mut pos = vec![0u32; ncells];
    for (p, &rank) in sorted.iter().enumerate() {
        pos[rank as usize] = p as u32;
    }

    // standard column reduction with clearing, top dimension first
    let mut pair = vec![NONE; ncells];
    // per-column support envelope of the accumulated chain, width r + 1
    let w = r + 1;
    let mut env: Vec<i32> = vec![i32::MIN; ncells * w];
    for p in 0..ncells {
        let rank = sorted[p] as usize;
        let (f, o) = (filt[rank], outer_of[rank] as usize);
        env[p * w..p * w + o + 1].fill(f);
    }
    let env_of_cells = |cells: &[u32]| -> SupportEnv {
        let mut e = vec![i32::MIN; w];
        for &q in cells {
            let rank = sorted[q as usize] as usize;
            let (f, o) = (filt[rank], outer_of[rank] as usize);
            for slot in &mut e[..=o] {
                *slot = (*slot).max(f);
            }
        }
        e
    };
    let mut arena: Vec<u32> = Vec::new();
    let mut col_data: Vec<u64> = vec![u64::MAX; ncells];
    let mut bars: Vec<Bar> = Vec::new();
    let mut buf: Vec<u32> = Vec::new();
    let mut scratch: Vec<u32> = Vec::new();

    // digits/mask of a cell rank, via binary search on the prefix table
    let locate = |rank: u32| -> (usize, u32) {
        let rank = rank as u64;
        let ix = prefix.partition_point(|&p| p <= rank) - 1;
        (ix, (rank - prefix[ix]) as u32)
    };

    for d in (1..=nv as u8).rev() {
        for p in 0..ncells {
            let rank = sorted[p];
            if delta_of[rank as usize] != d || pair[p] != NONE {
                continue;
            }
            let (ix, c) = locate(rank);
            // unrank the mask: c-th submask of amask
            let mut digits = vec![0i64; nv];
            let mut rem = ix;
            for v in 0..nv {
                digits[v] = (rem % side) as i64;
                rem /= side;
            }
            let a = amask_of(&digits);
            let mask = {
                // pdep: scatter the bits of c to the positions of a
                let (mut out, mut bit, mut s) = (0u32, 0u32, a);
                while s != 0 {
                    let b = s & s.wrapping_neg();
                    if (c >> bit) & 1 == 1 {
                        out |= b;
                    }
                    bit += 1;
                    s ^= b;
                }
                out
            };
            buf.clear();
            let mut e = mask;
            while e != 0 {
                let bv = e & e.wrapping_neg();
                let v = bv.trailing_zeros() as usize;
                e ^= bv;
                let fm = mask ^ bv;
                buf.push(pos[(prefix[ix] + pext(fm, a) as u64) as usize]);
                let ix2 = ix + stride[v];
                let a2 = {
                    let mut a2 = 0u32;
                    for (u, &dg) in digits.iter().enumerate() {
                        let du = if u == v { dg + 1 } else { dg };
                        if du < (side - 1) as i64 {
                            a2 |= 1 << u;
                        }
                    }
                    a2
                };
                buf.push(pos[(prefix[ix2] + pext(fm, a2) as u64) as usize]);
            }
            buf.sort_unstable();

            loop {
                let Some(&low) = buf.last() else {
                    // cycle that nothing above killed: an infinite bar
                    bars.push(Bar {
                        delta: d as u32,
                        birth: filt[rank as usize] as i64,
                        len: None,
                        cycle_env: env[p * w..(p + 1) * w].to_vec(),
                        chain_env: vec![i32::MIN; w],
                    });
                    break;
                };
                let t = pair[low as usize];
                if t != NONE {
                    let cd = col_data[t as usize];
                    let (off, len) = ((cd >> 24) as usize, (cd & 0xff_ffff) as usize);
                    let other = &arena[off..off + len];
                    // symmetric difference of sorted position lists
                    scratch.clear();
                    let (mut i, mut j) = (0usize, 0usize);
                    while i < buf.len() || j < len {
                        if j == len || (i < buf.len() && buf[i] < other[j]) {
                            scratch.push(buf[i]);
                            i += 1;
                        } else if i == buf.len() || other[j] < buf[i] {
                            scratch.push(other[j]);
                            j += 1;
                        } else {
                            i += 1;
                            j += 1;
                        }
                    }
                    std::mem::swap(&mut buf, &mut scratch);
                    let (dst, src) = (p * w, t as usize * w);
                    for o in 0..w {
                        env[dst + o] = env[dst + o].max(env[src + o]);
                    }
                    continue;
                }
                pair[low as usize] = p as u32;
                let off = arena.len() as u64;
                assert!(off < 1 << 40 && buf.len() < 1 << 24);
                arena.extend_from_slice(&buf);
                col_data[p] = (off << 24) | buf.len() as u64;
                let birth = filt[sorted[low as usize] as usize] as i64;
                let death = filt[rank as usize] as i64;
                if death > birth {
                    bars.push(Bar {
                        delta: d as u32 - 1,
                        birth,
                        len: Some(death - birth),
                        cycle_env: env_of_cells(&buf),
                        chain_env: env[p * w..(p + 1) * w].to_vec(),
                    });
                }
                break;
            }
        }
    }
    for p in 0..ncells {
        let rank = sorted[p] as usize;
        if delta_of[rank] == 0 && pair[p] == NONE {
            bars.push(Bar {
                delta: 0,
                birth: filt[rank] as i64,
                len: None,
                cycle_env: env_of_cells(&[p as u32]),
                chain_env: vec![i32::MIN; w],
            });
        }
    }
    Ok(BoxBarcode { bars, grading_const })
}

/// Truncated module decomposition read off the barcode, keeping only
/// summands whose supporting chains stay strictly inside `support_radius`.
/// A bar of length l contributes its quotient part M(top, min(l, n)) and a
/// Tor part one cube dimension up; both parts look like towers at
/// truncations n and n+1 exactly when l > n. The returned flag reports
/// that nothing was filtered out.
pub fn barcode_decomposition(
    bc: &BoxBarcode,
    n: u32,
    support_radius: i64,
) -> (ModuleDecomposition, bool) {
    let mut dec = ModuleDecomposition { trunc: n, summands: Default::default() };
    let mut complete = true;
    let two = Ratio::from_integer(2i128);
    let mut add = |delta: u32, top: Rat, kind: SummandKind, keep: bool, complete: &mut bool| {
        if keep {
            *dec.summands.entry((delta, top, kind)).or_insert(0) += 1;
        } else {
            *complete = false;
        }
    };
    for bar in &bc.bars {
        let top = Ratio::from_integer(bar.delta as i128) + bc.grading_const
            - two * Ratio::from_integer(bar.birth as i128);
        // a truncated representative of the class at its top level j* only
        // needs the cells more than n levels inside, i.e. filtration > j* - n
        let cyc_outer = env_outer(&bar.cycle_env, bar.birth - n as i64);
        match bar.len {
            None => add(
                bar.delta,
                top,
                SummandKind::Tower,
                cyc_outer < support_radius,
                &mut complete,
            ),
            Some(l) => {
                debug_assert!(l >= 1);
                let (kind, tor_top) = if l > n as i64 {
                    // full at n and n+1: both parts certify as towers
                    (SummandKind::Tower, top + Ratio::from_integer(1) - two * Ratio::from_integer(l as i128))
                } else {
                    (
                        SummandKind::Finite(l as u32),
                        top + Ratio::from_integer(1) - two * Ratio::from_integer(n as i128),
                    )
                };
                // the Tor generator is the killing chain at its own top
                // level j* = birth + max(l, n)
                let tor_thresh = bar.birth + (l - n as i64).max(0);
                let chn_outer = env_outer(&bar.chain_env, tor_thresh);
                add(bar.delta, top, kind, cyc_outer < support_radius, &mut complete);
                add(bar.delta + 1, tor_top, kind, chn_outer < support_radius, &mut complete);
            }
        }
    }
    (dec, complete)
}
