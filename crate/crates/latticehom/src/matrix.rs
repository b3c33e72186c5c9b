//! Exact integer and rational linear algebra for intersection matrices.
//!
//! Everything here is small and dense: intersection matrices of plumbing
//! forests have at most a few dozen rows, so we favour exactness and
//! determinism over asymptotics. Rationals are `Ratio<i128>` throughout;
//! no floating point appears anywhere in the crate.

use num::rational::Ratio;
use num::{One, Signed, Zero};

pub type Rat = Ratio<i128>;

pub fn rat(p: i128, q: i128) -> Rat {
    Ratio::new(p, q)
}

/// Render a rational as `p` or `p/q` with a reduced positive denominator.
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Dense symmetric integer matrix, row major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMat {
    n: usize,
    a: Vec<i128>,
}

impl IntMat {
    pub fn zero(n: usize) -> Self {
        IntMat { n, a: vec![0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i128>]) -> Self {
        let n = rows.len();
        let mut m = Self::zero(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix rows must be square");
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i128 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: i128) {
        self.a[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[i128] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    /// `M x` for an integer vector.
    pub fn mul_vec(&self, x: &[i128]) -> Vec<i128> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(&m, &v)| m * v).sum())
            .collect()
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> i128 {
        let n = self.n;
        if n == 0 {
            return 1;
        }
        let mut a = self.a.clone();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n - 1 {
            if a[k * n + k] == 0 {
                let Some(p) = (k + 1..n).find(|&i| a[i * n + k] != 0) else {
                    return 0;
                };
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = a[i * n + j] * a[k * n + k] - a[i * n + k] * a[k * n + j];
                    a[i * n + j] = v / prev;
                }
                a[i * n + k] = 0;
            }
            prev = a[k * n + k];
        }
        sign * a[n * n - 1]
    }

    /// Signs of the eigenvalues `(positive, negative, zero)`, computed by
    /// exact symmetric elimination. Nonzero diagonal pivots contribute their
    /// sign; when every remaining diagonal entry vanishes but an off-diagonal
    /// entry survives, that hyperbolic 2x2 block contributes one eigenvalue
    /// of each sign (Sylvester's law of inertia).
    pub fn inertia(&self) -> (usize, usize, usize) {
        let n = self.n;
        let mut b: Vec<Rat> = self.a.iter().map(|&v| Rat::from_integer(v)).collect();
        let mut active: Vec<usize> = (0..n).collect();
        let (mut pos, mut neg, mut zero) = (0usize, 0usize, 0usize);
        let idx = |i: usize, j: usize| i * n + j;
        while !active.is_empty() {
            if let Some(&p) = active.iter().find(|&&i| !b[idx(i, i)].is_zero()) {
                let piv = b[idx(p, p)];
                if piv.is_positive() {
                    pos += 1;
                } else {
                    neg += 1;
                }
                active.retain(|&i| i != p);
                for &i in &active {
                    let f = b[idx(i, p)] / piv;
                    if f.is_zero() {
                        continue;
                    }
                    for &j in &active {
                        let v = b[idx(i, j)] - f * b[idx(p, j)];
                        b[idx(i, j)] = v;
                    }
                }
            } else {
                // all remaining diagonal entries are zero
                let mut pair = None;
                'scan: for (s, &i) in active.iter().enumerate() {
                    for &j in &active[s + 1..] {
                        if !b[idx(i, j)].is_zero() {
                            pair = Some((i, j));
                            break 'scan;
                        }
                    }
                }
                let Some((p, q)) = pair else {
                    zero += active.len();
                    break;
                };
                pos += 1;
                neg += 1;
                let c = b[idx(p, q)];
                active.retain(|&i| i != p && i != q);
                // Schur complement of the block [[0, c], [c, 0]]
                for &i in &active {
                    for &j in &active {
                        let v = b[idx(i, j)]
                            - (b[idx(i, p)] * b[idx(j, q)]
                                + b[idx(i, q)] * b[idx(j, p)])
                                / c;
                        b[idx(i, j)] = v;
                    }
                }
            }
        }
        (pos, neg, zero)
    }

    pub fn signature(&self) -> i64 {
        let (p, m, _) = self.inertia();
        p as i64 - m as i64
    }

    pub fn is_negative_definite(&self) -> bool {
        let (_, m, _) = self.inertia();
        m == self.n
    }
}

/// Smith normal form `U * M * V = D` with all four transforms tracked.
///
/// `d` holds the diagonal of `D` (nonnegative, each dividing the next).
/// `u_inv` satisfies `u_inv * u = I`, which is what coset enumeration needs.
#[derive(Clone, Debug)]
pub struct Smith {
    pub d: Vec<i128>,
    pub u: IntMat,
    pub u_inv: IntMat,
    pub v: IntMat,
}

impl Smith {
    /// Image-membership test: is `c` in `M * Z^n`?
    pub fn in_integer_image(&self, c: &[i128]) -> bool {
        let w = self.u.mul_vec(c);
        self.d.iter().zip(&w).all(|(&d, &w)| if d == 0 { w == 0 } else { w % d == 0 })
    }

    /// Integer solution of `M x = c`, if one exists.
    pub fn solve(&self, c: &[i128]) -> Option<Vec<i128>> {
        let w = self.u.mul_vec(c);
        let mut y = vec![0i128; self.d.len()];
        for (i, (&d, &w)) in self.d.iter().zip(&w).enumerate() {
            if d == 0 {
                if w != 0 {
                    return None;
                }
            } else {
                if w % d != 0 {
                    return None;
                }
                y[i] = w / d;
            }
        }
        Some(self.v.mul_vec(&y))
    }

    /// Canonical coordinates of `c` in `coker M = Z^n / Im M`: the entry at a
    /// diagonal `d_i > 0` is reduced mod `d_i`, entries over `d_i = 0` are
    /// exact integers.
    pub fn coker_key(&self, c: &[i128]) -> Vec<i128> {
        let w = self.u.mul_vec(c);
        self.d
            .iter()
            .zip(&w)
            .map(|(&d, &w)| if d == 0 { w } else { w.rem_euclid(d) })
            .collect()
    }

    /// Is the class of `c` torsion in `coker M`?
    pub fn is_torsion(&self, c: &[i128]) -> bool {
        let w = self.u.mul_vec(c);
        self.d.iter().zip(&w).all(|(&d, &w)| d != 0 || w == 0)
    }

    /// Divisibility of the image of `c` in `coker M` modulo torsion
    /// (0 when the class is torsion).
    pub fn free_divisibility(&self, c: &[i128]) -> i128 {
        let w = self.u.mul_vec(c);
        let mut g = 0i128;
        for (&d, &w) in self.d.iter().zip(&w) {
            if d == 0 {
                g = gcd(g, w.abs());
            }
        }
        g
    }
}

pub fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Compute the Smith normal form of `m` with transforms.
pub fn smith_normal_form(m: &IntMat) -> Smith {
    let n = m.n();
    let mut a = m.clone();
    let mut u = IntMat::identity(n);
    let mut u_inv = IntMat::identity(n);
    let mut v = IntMat::identity(n);

    // row op: a_i += t * a_j (and mirror on u, with the inverse op on u_inv)
    let row_add = |a: &mut IntMat, u: &mut IntMat, u_inv: &mut IntMat, i: usize, j: usize, t: i128| {
        for k in 0..n {
            let x = a.get(j, k) * t;
            a.set(i, k, a.get(i, k) + x);
            let x = u.get(j, k) * t;
            u.set(i, k, u.get(i, k) + x);
        }
        // inverse: column j of u_inv gains -t * column i
        for k in 0..n {
            let x = u_inv.get(k, i) * t;
            u_inv.set(k, j, u_inv.get(k, j) - x);
        }
    };
    let row_swap = |a: &mut IntMat, u: &mut IntMat, u_inv: &mut IntMat, i: usize, j: usize| {
        for k in 0..n {
            let (x, y) = (a.get(i, k), a.get(j, k));
            a.set(i, k, y);
            a.set(j, k, x);
            let (x, y) = (u.get(i, k), u.get(j, k));
            u.set(i, k, y);
            u.set(j, k, x);
            let (x, y) = (u_inv.get(k, i), u_inv.get(k, j));
            u_inv.set(k, i, y);
            u_inv.set(k, j, x);
        }
    };
    let row_neg = |a: &mut IntMat, u: &mut IntMat, u_inv: &mut IntMat, i: usize| {
        for k in 0..n {
            a.set(i, k, -a.get(i, k));
            u.set(i, k, -u.get(i, k));
            u_inv.set(k, i, -u_inv.get(k, i));
        }
    };
    let col_add = |a: &mut IntMat, v: &mut IntMat, j: usize, i: usize, t: i128| {
        // a_col_j += t * a_col_i
        for k in 0..n {
            let x = a.get(k, i) * t;
            a.set(k, j, a.get(k, j) + x);
            let x = v.get(k, i) * t;
            v.set(k, j, v.get(k, j) + x);
        }
    };
    let col_swap = |a: &mut IntMat, v: &mut IntMat, i: usize, j: usize| {
        for k in 0..n {
            let (x, y) = (a.get(k, i), a.get(k, j));
            a.set(k, i, y);
            a.set(k, j, x);
            let (x, y) = (v.get(k, i), v.get(k, j));
            v.set(k, i, y);
            v.set(k, j, x);
        }
    };

    for t in 0..n {
        // find a pivot in the trailing block with least absolute value
        let mut best: Option<(usize, usize)> = None;
        for i in t..n {
            for j in t..n {
                let x = a.get(i, j);
                if x != 0 && best.is_none_or(|(bi, bj)| x.abs() < a.get(bi, bj).abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        if pi != t {
            row_swap(&mut a, &mut u, &mut u_inv, t, pi);
        }
        if pj != t {
            col_swap(&mut a, &mut v, t, pj);
        }
        loop {
            let p = a.get(t, t);
            let mut clean = true;
            for i in t + 1..n {
                let q = a.get(i, t);
                if q != 0 {
                    row_add(&mut a, &mut u, &mut u_inv, i, t, -(q.div_euclid(p)));
                    if a.get(i, t) != 0 {
                        row_swap(&mut a, &mut u, &mut u_inv, t, i);
                        clean = false;
                        break;
                    }
                }
            }
            if !clean {
                continue;
            }
            for j in t + 1..n {
                let q = a.get(t, j);
                if q != 0 {
                    col_add(&mut a, &mut v, j, t, -(q.div_euclid(p)));
                    if a.get(t, j) != 0 {
                        col_swap(&mut a, &mut v, t, j);
                        clean = false;
                        break;
                    }
                }
            }
            if clean {
                break;
            }
        }
        if a.get(t, t) < 0 {
            row_neg(&mut a, &mut u, &mut u_inv, t);
        }
    }

    // enforce the divisor chain d_t | d_{t+1}
    let mut t = 0;
    while t + 1 < n {
        let (p, q) = (a.get(t, t), a.get(t + 1, t + 1));
        if p != 0 && q % p != 0 {
            // fold a_{t+1,t+1} into column t and redo the corner
            col_add(&mut a, &mut v, t, t + 1, 1);
            // now clear with euclidean steps on the 2x2 corner
            loop {
                let p = a.get(t, t);
                let q = a.get(t + 1, t);
                if q == 0 {
                    break;
                }
                row_add(&mut a, &mut u, &mut u_inv, t + 1, t, -(q.div_euclid(p)));
                if a.get(t + 1, t) != 0 {
                    row_swap(&mut a, &mut u, &mut u_inv, t, t + 1);
                }
            }
            let q = a.get(t, t + 1);
            if q != 0 {
                let p = a.get(t, t);
                debug_assert_eq!(q % p, 0);
                col_add(&mut a, &mut v, t + 1, t, -(q / p));
            }
            if a.get(t, t) < 0 {
                row_neg(&mut a, &mut u, &mut u_inv, t);
            }
            if a.get(t + 1, t + 1) < 0 {
                row_neg(&mut a, &mut u, &mut u_inv, t + 1);
            }
            // divisibility may have been disturbed further up
            t = t.saturating_sub(1);
            continue;
        }
        t += 1;
    }

    let d = (0..n).map(|i| a.get(i, i)).collect();
    Smith { d, u, u_inv, v }
}

/// One rational solution of `M x = c`, free variables set to zero.
/// Returns `None` when the system is inconsistent.
pub fn solve_rational(m: &IntMat, c: &[i128]) -> Option<Vec<Rat>> {
    let n = m.n();
    assert_eq!(c.len(), n);
    let cols = n + 1;
    let mut a: Vec<Rat> = Vec::with_capacity(n * cols);
    for i in 0..n {
        for j in 0..n {
            a.push(Rat::from_integer(m.get(i, j)));
        }
        a.push(Rat::from_integer(c[i]));
    }
    let mut pivot_col_of_row = Vec::new();
    let mut r = 0usize;
    for col in 0..n {
        let Some(p) = (r..n).find(|&i| !a[i * cols + col].is_zero()) else {
            continue;
        };
        for j in 0..cols {
            a.swap(r * cols + j, p * cols + j);
        }
        let piv = a[r * cols + col];
        for j in col..cols {
            a[r * cols + j] /= piv;
        }
        for i in 0..n {
            if i != r && !a[i * cols + col].is_zero() {
                let f = a[i * cols + col];
                for j in col..cols {
                    let v = a[i * cols + j] - f * a[r * cols + j];
                    a[i * cols + j] = v;
                }
            }
        }
        pivot_col_of_row.push(col);
        r += 1;
        if r == n {
            break;
        }
    }
    for i in r..n {
        if !a[i * cols + n].is_zero() {
            return None;
        }
    }
    let mut x = vec![Rat::zero(); n];
    for (row, &col) in pivot_col_of_row.iter().enumerate() {
        x[col] = a[row * cols + n];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e8() -> IntMat {
        // E8 tree: chain 1-2-3-4-5-6-7 with 8 hanging off vertex 5, all -2
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (4, 7)];
        let mut m = IntMat::zero(8);
        for i in 0..8 {
            m.set(i, i, -2);
        }
        for &(i, j) in &edges {
            m.set(i, j, 1);
            m.set(j, i, 1);
        }
        m
    }

    /// Cofactor-expansion determinant, the independent route for the E8 check.
    fn det_naive(m: &IntMat) -> i128 {
        let n = m.n();
        if n == 0 {
            return 1;
        }
        if n == 1 {
            return m.get(0, 0);
        }
        let mut d = 0i128;
        for j in 0..n {
            let v = m.get(0, j);
            if v == 0 {
                continue;
            }
            let mut sub = IntMat::zero(n - 1);
            for i in 1..n {
                let mut cc = 0;
                for c in 0..n {
                    if c == j {
                        continue;
                    }
                    sub.set(i - 1, cc, m.get(i, c));
                    cc += 1;
                }
            }
            let s = if j % 2 == 0 { 1 } else { -1 };
            d += s * v * det_naive(&sub);
        }
        d
    }

    #[test]
    fn e8_determinant_both_routes() {
        let m = e8();
        assert_eq!(m.det(), 1);
        assert_eq!(det_naive(&m), 1);
    }

    #[test]
    fn e8_inertia() {
        assert_eq!(e8().inertia(), (0, 8, 0));
        assert_eq!(e8().signature(), -8);
        assert!(e8().is_negative_definite());
    }

    #[test]
    fn inertia_small_cases() {
        assert_eq!(IntMat::from_rows(&[vec![1]]).inertia(), (1, 0, 0));
        assert_eq!(IntMat::from_rows(&[vec![0]]).inertia(), (0, 0, 1));
        assert_eq!(IntMat::from_rows(&[vec![-2, 1], vec![1, -2]]).inertia(), (0, 2, 0));
        // hyperbolic block: zero diagonal, nonzero off-diagonal
        assert_eq!(IntMat::from_rows(&[vec![0, 3], vec![3, 0]]).inertia(), (1, 1, 0));
    }

    #[test]
    fn smith_of_e8_is_unimodular() {
        let m = e8();
        let s = smith_normal_form(&m);
        assert_eq!(s.d, vec![1; 8]);
        // U * M * V has the computed diagonal
        check_smith(&m);
    }

    fn check_smith(m: &IntMat) {
        let n = m.n();
        let s = smith_normal_form(m);
        // D = U M V entrywise
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0i128;
                for k in 0..n {
                    for l in 0..n {
                        acc += s.u.get(i, k) * m.get(k, l) * s.v.get(l, j);
                    }
                }
                let want = if i == j { s.d[i] } else { 0 };
                assert_eq!(acc, want, "D mismatch at ({i},{j})");
            }
        }
        // u_inv * u = I
        for i in 0..n {
            for j in 0..n {
                let acc: i128 = (0..n).map(|k| s.u_inv.get(i, k) * s.u.get(k, j)).sum();
                assert_eq!(acc, (i == j) as i128);
            }
        }
        // divisor chain
        for w in s.d.windows(2) {
            if w[0] != 0 {
                assert!(w[1] == 0 || w[1] % w[0] == 0, "chain broken: {:?}", s.d);
            } else {
                assert_eq!(w[1], 0);
            }
        }
    }

    #[test]
    fn smith_assorted() {
        check_smith(&IntMat::from_rows(&[vec![0]]));
        check_smith(&IntMat::from_rows(&[vec![4, 2], vec![2, 4]]));
        check_smith(&IntMat::from_rows(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, 4, 16]]));
        check_smith(&IntMat::from_rows(&[vec![0, 1], vec![1, 0]]));
        check_smith(&IntMat::from_rows(&[vec![-2, 1, 0], vec![1, -2, 1], vec![0, 1, -2]]));
    }

    #[test]
    fn smith_solve_and_coker() {
        // single vertex 0: coker = Z, divisibility of K = 2 is 2
        let m = IntMat::from_rows(&[vec![0]]);
        let s = smith_normal_form(&m);
        assert!(!s.is_torsion(&[2]));
        assert_eq!(s.free_divisibility(&[2]), 2);
        assert!(s.is_torsion(&[0]));
        // -2 vertex: K = 4 is in 2 * Im(M) i.e. 2 in Im
        let m = IntMat::from_rows(&[vec![-2]]);
        let s = smith_normal_form(&m);
        assert!(s.in_integer_image(&[2]));
        assert!(!s.in_integer_image(&[1]));
        assert_eq!(s.solve(&[2]), Some(vec![-1]));
    }

    #[test]
    fn rational_solve() {
        let m = IntMat::from_rows(&[vec![-2, 1], vec![1, -2]]);
        let x = solve_rational(&m, &[1, 1]).unwrap();
        assert_eq!(x, vec![rat(-1, 1), rat(-1, 1)]);
        // inconsistent: zero matrix, nonzero rhs
        let m = IntMat::from_rows(&[vec![0]]);
        assert!(solve_rational(&m, &[1]).is_none());
        assert_eq!(solve_rational(&m, &[0]).unwrap(), vec![Rat::zero()]);
    }
}
