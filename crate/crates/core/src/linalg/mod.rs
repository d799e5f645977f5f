//! Exact sparse linear algebra over the rationals.
//!
//! Everything in this module is exact: scalars are arbitrary-precision
//! rationals, kernels and homology representatives are echelon-normalized so
//! that repeated runs produce identical output. Matrices are stored sparsely
//! as `(row, col) -> value` maps; elimination works on row lists with pivot
//! selection that favors sparsity.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub mod reduction;

/// Scalar type of the whole crate: arbitrary-precision rational numbers.
pub type Rational = BigRational;

/// Dense column vector.
pub type Vector = Vec<Rational>;

/// Shorthand for an integer rational.
pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Shorthand for `n/d`.
pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Formats a rational as `p/q`, omitting `/q` when the denominator is 1.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `p` or `p/q` with nonzero `q`.
pub fn parse_rational(s: &str) -> Result<Rational, LinalgError> {
    let bad = || LinalgError::BadRational(s.to_string());
    match s.split_once('/') {
        None => {
            let n: BigInt = s.trim().parse().map_err(|_| bad())?;
            Ok(Rational::from_integer(n))
        }
        Some((p, q)) => {
            let n: BigInt = p.trim().parse().map_err(|_| bad())?;
            let d: BigInt = q.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
    }
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("composition is nonzero: d_out * d_in has a nonzero entry at ({row}, {col})")]
    CompositionNonzero { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed rational literal `{0}`")]
    BadRational(String),
}

/// Sparse matrix over the rationals. No zero entry is ever stored.
#[derive(Clone, PartialEq, Eq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    entries: BTreeMap<(usize, usize), Rational>,
}

impl fmt::Debug for SparseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SparseMatrix {}x{} [", self.rows, self.cols)?;
        for ((r, c), v) in &self.entries {
            writeln!(f, "  ({r}, {c}) = {}", format_rational(v))?;
        }
        write!(f, "]")
    }
}

impl SparseMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        SparseMatrix { rows, cols, entries: BTreeMap::new() }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.set(i, i, Rational::one());
        }
        m
    }

    pub fn from_entries<I>(rows: usize, cols: usize, it: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, Rational)>,
    {
        let mut m = Self::zero(rows, cols);
        for (r, c, v) in it {
            m.add_to(r, c, v);
        }
        m
    }

    /// Builds a matrix whose columns are the given dense vectors.
    pub fn from_columns(rows: usize, cols: &[Vector]) -> Self {
        let mut m = Self::zero(rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows);
            for (i, v) in col.iter().enumerate() {
                if !v.is_zero() {
                    m.set(i, j, v.clone());
                }
            }
        }
        m
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rational) {
        assert!(r < self.rows && c < self.cols, "index out of bounds");
        if v.is_zero() {
            self.entries.remove(&(r, c));
        } else {
            self.entries.insert((r, c), v);
        }
    }

    pub fn add_to(&mut self, r: usize, c: usize, v: Rational) {
        if v.is_zero() {
            return;
        }
        assert!(r < self.rows && c < self.cols, "index out of bounds");
        let slot = self.entries.entry((r, c)).or_insert_with(Rational::zero);
        *slot += v;
        if slot.is_zero() {
            self.entries.remove(&(r, c));
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Rational {
        self.entries.get(&(r, c)).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Rational)> {
        self.entries.iter().map(|(&(r, c), v)| (r, c, v))
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = SparseMatrix::zero(self.cols, self.rows);
        for ((r, c), v) in &self.entries {
            t.entries.insert((*c, *r), v.clone());
        }
        t
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, other.rows, "product shape mismatch");
        let mut cols_of_self: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); self.cols];
        for ((r, c), v) in &self.entries {
            cols_of_self[*c].push((*r, v.clone()));
        }
        let mut out = SparseMatrix::zero(self.rows, other.cols);
        let mut cols_of_other: BTreeMap<usize, Vec<(usize, &Rational)>> = BTreeMap::new();
        for ((r, c), v) in &other.entries {
            cols_of_other.entry(*c).or_default().push((*r, v));
        }
        for (c, col) in cols_of_other {
            let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
            for (k, v) in col {
                for (i, w) in &cols_of_self[k] {
                    let slot = acc.entry(*i).or_insert_with(Rational::zero);
                    *slot += w * v;
                }
            }
            for (i, v) in acc {
                if !v.is_zero() {
                    out.entries.insert((i, c), v);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for ((r, c), v) in &other.entries {
            out.add_to(*r, *c, v.clone());
        }
        out
    }

    pub fn sub(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for ((r, c), v) in &other.entries {
            out.add_to(*r, *c, -v.clone());
        }
        out
    }

    pub fn scale(&self, s: &Rational) -> SparseMatrix {
        if s.is_zero() {
            return SparseMatrix::zero(self.rows, self.cols);
        }
        let mut out = self.clone();
        for v in out.entries.values_mut() {
            *v *= s;
        }
        out
    }

    /// Applies the matrix to a dense vector.
    pub fn apply(&self, v: &[Rational]) -> Vector {
        assert_eq!(v.len(), self.cols, "apply shape mismatch");
        let mut out = vec![Rational::zero(); self.rows];
        for ((r, c), w) in &self.entries {
            if !v[*c].is_zero() {
                out[*r] += w * &v[*c];
            }
        }
        out
    }

    pub fn column(&self, c: usize) -> Vector {
        let mut out = vec![Rational::zero(); self.rows];
        for ((r, cc), v) in &self.entries {
            if *cc == c {
                out[*r] = v.clone();
            }
        }
        out
    }

    fn row_lists(&self) -> Vec<Vec<(usize, Rational)>> {
        let mut rows = vec![Vec::new(); self.rows];
        for ((r, c), v) in &self.entries {
            rows[*r].push((*c, v.clone()));
        }
        rows
    }

    /// Reduced row-echelon form together with the pivot columns.
    ///
    /// The RREF of a matrix is unique, so the output is canonical no matter
    /// how rows were ordered. Row selection prefers sparse rows to limit fill.
    pub fn rref(&self) -> (SparseMatrix, Vec<usize>) {
        let mut rows: Vec<BTreeMap<usize, Rational>> = self
            .row_lists()
            .into_iter()
            .map(|r| r.into_iter().collect())
            .collect();
        let mut pivots: Vec<usize> = Vec::new();
        let mut done_rows: Vec<BTreeMap<usize, Rational>> = Vec::new();
        for col in 0..self.cols {
            // candidate rows whose leading entry is this column
            let mut best: Option<usize> = None;
            for (i, row) in rows.iter().enumerate() {
                if let Some((&lead, _)) = row.iter().next() {
                    if lead == col {
                        best = match best {
                            None => Some(i),
                            Some(j) if rows[j].len() > row.len() => Some(i),
                            other => other,
                        };
                    }
                }
            }
            let Some(pi) = best else { continue };
            let mut pivot_row = rows.swap_remove(pi);
            let inv = pivot_row[&col].recip();
            for v in pivot_row.values_mut() {
                *v *= &inv;
            }
            for row in rows.iter_mut().chain(done_rows.iter_mut()) {
                if let Some(f) = row.get(&col).cloned() {
                    for (c, v) in &pivot_row {
                        let slot = row.entry(*c).or_insert_with(Rational::zero);
                        *slot -= &f * v;
                        if slot.is_zero() {
                            row.remove(c);
                        }
                    }
                }
            }
            done_rows.push(pivot_row);
            pivots.push(col);
        }
        let mut out = SparseMatrix::zero(self.rows, self.cols);
        for (i, row) in done_rows.iter().enumerate() {
            for (c, v) in row {
                out.entries.insert((i, *c), v.clone());
            }
        }
        (out, pivots)
    }

    /// Exact rank over the rationals.
    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Canonical basis of the right kernel: one vector per free column, with a
    /// `1` in the free coordinate and the complementary pivot entries solved
    /// from the RREF.  `|basis| + rank = cols`.
    pub fn kernel_basis(&self) -> Vec<Vector> {
        let (r, pivots) = self.rref();
        let pivot_of_col: BTreeMap<usize, usize> =
            pivots.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut basis = Vec::new();
        for free in 0..self.cols {
            if pivot_of_col.contains_key(&free) {
                continue;
            }
            let mut v = vec![Rational::zero(); self.cols];
            v[free] = Rational::one();
            for (&(pr, pc), val) in &r.entries {
                if pc == free {
                    let pivot_col = pivots[pr];
                    v[pivot_col] = -val.clone();
                }
            }
            basis.push(v);
        }
        basis
    }

    /// Canonical (echelonized) basis of the column space, as column vectors.
    pub fn column_space_basis(&self) -> Vec<Vector> {
        let (r, pivots) = self.transpose().rref();
        let mut out = Vec::new();
        for i in 0..pivots.len() {
            let mut v = vec![Rational::zero(); self.rows];
            for (&(rr, c), val) in &r.entries {
                if rr == i {
                    v[c] = val.clone();
                }
            }
            out.push(v);
        }
        out
    }
}

/// Solves `A x = b`, returning any solution, or `None` when the system is
/// inconsistent (`rank [A|b] > rank A`).
pub fn solve_affine(a: &SparseMatrix, b: &[Rational]) -> Option<Vector> {
    assert_eq!(b.len(), a.rows, "rhs length mismatch");
    let mut aug = SparseMatrix::zero(a.rows, a.cols + 1);
    for (r, c, v) in a.iter() {
        aug.set(r, c, v.clone());
    }
    for (r, v) in b.iter().enumerate() {
        if !v.is_zero() {
            aug.set(r, a.cols, v.clone());
        }
    }
    let (rr, pivots) = aug.rref();
    if pivots.contains(&a.cols) {
        return None;
    }
    let mut x = vec![Rational::zero(); a.cols];
    for (i, &pc) in pivots.iter().enumerate() {
        x[pc] = rr.get(i, a.cols);
    }
    Some(x)
}

/// Cycle/boundary/homology data for one spot of a complex.
#[derive(Clone, Debug)]
pub struct SubquotientBasis {
    pub ambient_dim: usize,
    pub cycle_basis: Vec<Vector>,
    pub boundary_basis: Vec<Vector>,
    pub homology_reps: Vec<Vector>,
}

impl SubquotientBasis {
    pub fn dim(&self) -> usize {
        self.homology_reps.len()
    }

    /// Coordinates of a cycle in the homology basis, or `None` if the vector
    /// is not a cycle-plus-boundary combination of the stored data.
    pub fn coords(&self, v: &[Rational]) -> Option<Vector> {
        let n = self.ambient_dim;
        assert_eq!(v.len(), n);
        let cols: Vec<Vector> = self
            .homology_reps
            .iter()
            .chain(self.boundary_basis.iter())
            .cloned()
            .collect();
        let m = SparseMatrix::from_columns(n, &cols);
        let sol = solve_affine(&m, v)?;
        Some(sol[..self.homology_reps.len()].to_vec())
    }
}

/// Homology of `ker(d_out) / im(d_in)`, with `d_out * d_in = 0` checked.
pub fn homology(d_in: &SparseMatrix, d_out: &SparseMatrix) -> Result<SubquotientBasis, LinalgError> {
    if d_in.rows != d_out.cols {
        return Err(LinalgError::DimensionMismatch(format!(
            "d_in lands in dim {}, d_out starts at dim {}",
            d_in.rows, d_out.cols
        )));
    }
    let comp = d_out.mul(d_in);
    if let Some(((r, c), _)) = comp.entries.iter().next() {
        return Err(LinalgError::CompositionNonzero { row: *r, col: *c });
    }
    let cycles = d_out.kernel_basis();
    let boundaries = d_in.column_space_basis();
    let n = d_in.rows;

    // Row-reduce boundaries, then sift cycle vectors through them to pick
    // representatives; finally echelonize the chosen representatives.
    let bnd = SparseMatrix::from_columns(n, &boundaries).transpose();
    let (bnd_rref, bnd_pivots) = bnd.rref();
    let reduce = |v: &Vector| -> Vector {
        let mut v = v.clone();
        for (i, &pc) in bnd_pivots.iter().enumerate() {
            if !v[pc].is_zero() {
                let f = v[pc].clone();
                for (&(rr, c), val) in &bnd_rref.entries {
                    if rr == i {
                        v[c] -= &f * val;
                    }
                }
            }
        }
        v
    };
    let mut reps: Vec<Vector> = Vec::new();
    let mut span_rows: Vec<BTreeMap<usize, Rational>> = Vec::new();
    for v in &cycles {
        let mut w = reduce(v);
        // reduce against the accepted reps
        for row in &span_rows {
            let (&lead, lv) = row.iter().next().unwrap();
            if !w[lead].is_zero() {
                let f = &w[lead] / lv;
                for (c, val) in row {
                    w[*c] -= &f * val;
                }
            }
        }
        if w.iter().any(|x| !x.is_zero()) {
            let mut row = BTreeMap::new();
            for (c, val) in w.iter().enumerate() {
                if !val.is_zero() {
                    row.insert(c, val.clone());
                }
            }
            span_rows.push(row);
            reps.push(v.clone());
        }
    }

    // canonical form: echelonize the representative set itself
    let rep_mat = SparseMatrix::from_columns(n, &reps).transpose();
    let (rep_rref, rep_pivots) = rep_mat.rref();
    let mut homology_reps = Vec::new();
    for i in 0..rep_pivots.len() {
        let mut v = vec![Rational::zero(); n];
        for (&(rr, c), val) in &rep_rref.entries {
            if rr == i {
                v[c] = val.clone();
            }
        }
        homology_reps.push(v);
    }

    Ok(SubquotientBasis {
        ambient_dim: n,
        cycle_basis: cycles,
        boundary_basis: boundaries,
        homology_reps,
    })
}

/// Absolute value of numerator and denominator both 1 (cheap pivot test).
pub(crate) fn is_unit_entry(r: &Rational) -> bool {
    r.numer().abs().is_one() && r.denom().is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[(usize, usize, i64)]) -> SparseMatrix {
        SparseMatrix::from_entries(rows, cols, data.iter().map(|&(r, c, v)| (r, c, rat(v))))
    }

    #[test]
    fn rank_examples() {
        assert_eq!(SparseMatrix::zero(0, 0).rank(), 0);
        assert_eq!(SparseMatrix::identity(2).rank(), 2);
        // proportional rows
        let a = m(2, 2, &[(0, 0, 1), (0, 1, 2), (1, 0, 2), (1, 1, 4)]);
        assert_eq!(a.rank(), 1);
    }

    #[test]
    fn kernel_examples() {
        assert!(SparseMatrix::identity(3).kernel_basis().is_empty());
        assert_eq!(SparseMatrix::zero(2, 3).kernel_basis().len(), 3);
        let a = m(1, 2, &[(0, 0, 1), (0, 1, 1)]);
        let k = a.kernel_basis();
        assert_eq!(k.len(), 1);
        assert_eq!(k[0], vec![rat(-1), rat(1)]);
        // M k = 0 for every kernel vector, and |K| + rank = cols
        for cols in [k.clone()] {
            for v in &cols {
                assert!(a.apply(v).iter().all(|x| x.is_zero()));
            }
        }
        assert_eq!(k.len() + a.rank(), a.cols);
    }

    #[test]
    fn homology_examples() {
        // d_in = 0, d_out = 0 on dim 3
        let h = homology(&SparseMatrix::zero(3, 0), &SparseMatrix::zero(0, 3)).unwrap();
        assert_eq!(h.dim(), 3);
        // d_in = identity, d_out = 0
        let h = homology(&SparseMatrix::identity(2), &SparseMatrix::zero(0, 2)).unwrap();
        assert_eq!(h.dim(), 0);
        // d_in = column (0,1)^T, d_out = row (1,0): product is 0, homology 1-dim...
        // ker(d_out) = span{(0,1)} = im(d_in), so homology dim 0.
        let d_in = m(2, 1, &[(1, 0, 1)]);
        let d_out = m(1, 2, &[(0, 0, 1)]);
        let h = homology(&d_in, &d_out).unwrap();
        assert_eq!(h.dim(), 0);
        // composition check fires
        let bad = homology(&m(2, 1, &[(0, 0, 1)]), &m(1, 2, &[(0, 0, 1)]));
        assert!(matches!(bad, Err(LinalgError::CompositionNonzero { .. })));
    }

    #[test]
    fn solve_examples() {
        let b = vec![rat(5), rat(-3)];
        assert_eq!(solve_affine(&SparseMatrix::identity(2), &b), Some(b.clone()));
        assert_eq!(
            solve_affine(&SparseMatrix::zero(2, 2), &vec![rat(0), rat(0)]),
            Some(vec![rat(0), rat(0)])
        );
        let a = m(1, 2, &[(0, 0, 1), (0, 1, 1)]);
        let x = solve_affine(&a, &vec![rat(2)]).unwrap();
        assert_eq!(&x[0] + &x[1], rat(2));
        // inconsistent iff rank([A|b]) > rank(A)
        let z = SparseMatrix::zero(1, 1);
        assert_eq!(solve_affine(&z, &vec![rat(1)]), None);
    }

    #[test]
    fn rational_strings() {
        assert_eq!(format_rational(&ratio(3, 6)), "1/2");
        assert_eq!(format_rational(&rat(-7)), "-7");
        assert_eq!(parse_rational("4/6").unwrap(), ratio(2, 3));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    // deterministic xorshift, good enough for property sweeps
    fn xorshift(state: &mut u64) -> u64 {
        let mut x = *state;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        *state = x;
        x
    }

    #[test]
    fn kernel_and_solve_properties_random() {
        let mut s = 0x9E3779B97F4A7C15u64;
        for _ in 0..60 {
            let rows = (xorshift(&mut s) % 5) as usize;
            let cols = (xorshift(&mut s) % 5) as usize;
            let mut a = SparseMatrix::zero(rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    if xorshift(&mut s) % 3 == 0 {
                        let v = (xorshift(&mut s) % 7) as i64 - 3;
                        a.add_to(r, c, rat(v));
                    }
                }
            }
            let k = a.kernel_basis();
            assert_eq!(k.len() + a.rank(), a.cols);
            for v in &k {
                assert!(a.apply(v).iter().all(|x| x.is_zero()));
            }
            // rref is idempotent
            let (r1, _) = a.rref();
            let (r2, _) = r1.rref();
            assert_eq!(r1, r2);
            // solve consistency
            let b: Vector = (0..rows).map(|_| rat((xorshift(&mut s) % 5) as i64 - 2)).collect();
            let mut aug = SparseMatrix::zero(rows, cols + 1);
            for (r, c, v) in a.iter() {
                aug.set(r, c, v.clone());
            }
            for (r, v) in b.iter().enumerate() {
                aug.set(r, cols, v.clone());
            }
            match solve_affine(&a, &b) {
                Some(x) => assert_eq!(a.apply(&x), b),
                None => assert!(aug.rank() > a.rank()),
            }
        }
    }
}

/// Columns of the matrix as `(row, value)` lists with `i128` entries, if all
/// entries are integers of moderate size. Fast path for identity checks on
/// combinatorial matrices.
pub fn integer_columns(m: &SparseMatrix) -> Option<Vec<Vec<(u32, i128)>>> {
    use num_traits::ToPrimitive;
    let mut cols: Vec<Vec<(u32, i128)>> = vec![Vec::new(); m.cols];
    for (r, c, v) in m.iter() {
        if !v.denom().is_one() {
            return None;
        }
        let n = v.numer().to_i128()?;
        if n.abs() > (1i128 << 40) {
            return None;
        }
        cols[c].push((r as u32, n));
    }
    Some(cols)
}

/// Exact check that `a·b + c·d = 0`, with an integer fast path.
pub fn product_sum_is_zero(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c: &SparseMatrix,
    d: &SparseMatrix,
) -> bool {
    assert_eq!(a.cols, b.rows);
    assert_eq!(c.cols, d.rows);
    assert_eq!(b.cols, d.cols);
    assert_eq!(a.rows, c.rows);
    if let (Some(ac), Some(bc), Some(cc), Some(dc)) = (
        integer_columns(a),
        integer_columns(b),
        integer_columns(c),
        integer_columns(d),
    ) {
        let mut acc: std::collections::HashMap<u32, i128> = std::collections::HashMap::new();
        for col in 0..b.cols {
            acc.clear();
            for &(k, v) in &bc[col] {
                for &(r, w) in &ac[k as usize] {
                    *acc.entry(r).or_insert(0) += v.checked_mul(w).expect("product fits");
                }
            }
            for &(k, v) in &dc[col] {
                for &(r, w) in &cc[k as usize] {
                    *acc.entry(r).or_insert(0) += v.checked_mul(w).expect("product fits");
                }
            }
            if acc.values().any(|&x| x != 0) {
                return false;
            }
        }
        true
    } else {
        a.mul(b).add(&c.mul(d)).is_zero()
    }
}
