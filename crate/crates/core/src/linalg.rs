//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;

const SCHUR_EPS: f64 = 1e-14;
const SCHUR_MAX_ITERS: usize = 10_000;

/// Eigenvalues of a general real square matrix, sorted by (real, imag).
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), SCHUR_EPS, SCHUR_MAX_ITERS)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let mut eigs: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    sort_complex(&mut eigs);
    Ok(eigs)
}

pub(crate) fn sort_complex(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Operator 2-norm (largest singular value).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `(m + mᵀ) / 2`, written entry by entry so the result is exactly symmetric.
pub fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

pub fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Solve `a x = b` with LU, failing on singular or non-finite solutions.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Conditioning("singular linear system".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Conditioning("non-finite linear solve".into()));
    }
    Ok(x)
}

pub fn solve_vec(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Conditioning("singular linear system".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Conditioning("non-finite linear solve".into()));
    }
    Ok(x)
}

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::Dimension {
            expected: ncols,
            got: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}


/// Serialize matrices as row-major nested arrays.
pub mod serde_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        super::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        super::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Row-major nested arrays for a list of matrices.
pub mod serde_rows_vec {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(super::to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        all.iter()
            .map(|rows| super::from_rows(rows).map_err(serde::de::Error::custom))
            .collect()
    }
}
