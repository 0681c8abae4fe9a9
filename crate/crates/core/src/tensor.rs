//! Packed symmetric 3-tensors and the sequential STTSV kernels.
//!
//! Only the lower tetrahedron `i >= j >= k` is stored. Indices are 0-based;
//! entry `(i, j, k)` lives at `i(i+1)(i+2)/6 + j(j+1)/2 + k`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type DenseVector = Vec<f64>;

const TENSOR_MAGIC: &[u8; 4] = b"PST3";
const VECTOR_MAGIC: &[u8; 4] = b"VEC1";

/// Number of stored entries for dimension `n`.
pub fn packed_len(n: usize) -> usize {
    n * (n + 1) * (n + 2) / 6
}

#[inline]
fn linear_index(i: usize, j: usize, k: usize) -> usize {
    i * (i + 1) * (i + 2) / 6 + j * (j + 1) / 2 + k
}

#[inline]
fn sort3(i: usize, j: usize, k: usize) -> (usize, usize, usize) {
    let mut v = [i, j, k];
    v.sort_unstable_by(|a, b| b.cmp(a));
    (v[0], v[1], v[2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedSymTensor {
    n: usize,
    data: Vec<f64>,
}

impl PackedSymTensor {
    pub fn zeros(n: usize) -> Self {
        PackedSymTensor { n, data: vec![0.0; packed_len(n)] }
    }

    pub fn from_data(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != packed_len(n) {
            return Err(Error::DimensionMismatch { expected: packed_len(n), found: data.len() });
        }
        Ok(PackedSymTensor { n, data })
    }

    /// Fills the lower tetrahedron from `f(i, j, k)` with `i >= j >= k`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in 0..=i {
                for k in 0..=j {
                    data.push(f(i, j, k));
                }
            }
        }
        PackedSymTensor { n, data }
    }

    /// Σ_ℓ x_ℓ ∘ x_ℓ ∘ x_ℓ over the columns of `factors` (n × r).
    pub fn from_cp(factors: &Array2<f64>) -> Self {
        let r = factors.ncols();
        Self::from_fn(factors.nrows(), |i, j, k| {
            (0..r).map(|l| factors[[i, l]] * factors[[j, l]] * factors[[k, l]]).sum()
        })
    }

    /// Uniform entries in [-1, 1] from a seeded generator.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..packed_len(n)).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        PackedSymTensor { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Entry at any index permutation.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let (i, j, k) = sort3(i, j, k);
        self.data[linear_index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let (i, j, k) = sort3(i, j, k);
        self.data[linear_index(i, j, k)] = value;
    }

    /// Squared Frobenius norm over all n³ entries.
    pub fn full_norm_sq(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            for j in 0..=i {
                for k in 0..=j {
                    let mult = match (i == j, j == k) {
                        (true, true) => 1.0,
                        (false, false) => 6.0,
                        _ => 3.0,
                    };
                    let a = self.data[linear_index(i, j, k)];
                    total += mult * a * a;
                }
            }
        }
        total
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(TENSOR_MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let n = read_header(&mut r, TENSOR_MAGIC)?;
        let data = read_f64s(&mut r, packed_len(n))?;
        Ok(PackedSymTensor { n, data })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::with_capacity(12 + 8 * self.data.len());
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::read(path)?.as_slice())
    }
}

pub fn random_vector(n: usize, seed: u64) -> DenseVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

pub fn write_vector(x: &[f64], mut w: impl Write) -> Result<()> {
    w.write_all(VECTOR_MAGIC)?;
    w.write_all(&(x.len() as u64).to_le_bytes())?;
    for v in x {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_vector(mut r: impl Read) -> Result<DenseVector> {
    let n = read_header(&mut r, VECTOR_MAGIC)?;
    read_f64s(&mut r, n)
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<usize> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &head[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&head[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let n = u64::from_le_bytes(head[4..].try_into().unwrap());
    usize::try_from(n).map_err(|_| Error::Format(format!("dimension {n} too large")))
}

fn read_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format(format!("expected {count} values")))?;
    let mut rest = Vec::new();
    if r.read_to_end(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Ternary multiplications of the symmetric kernel: n²(n+1)/2.
pub fn ternary_count(n: u64) -> u64 {
    n * n * (n + 1) / 2
}

/// Iteration points in the strict lower tetrahedron: n(n−1)(n−2)/6.
pub fn strict_ternary_points(n: u64) -> u64 {
    if n < 3 {
        return 0;
    }
    n * (n - 1) * (n - 2) / 6
}

/// The four-case update for one stored entry `a = a_{ijk}`, `i >= j >= k`.
/// `add(idx, v)` accumulates `v` into `y[idx]`; returns the number of
/// ternary multiplications performed.
#[inline]
pub(crate) fn symmetric_update(
    (i, j, k): (usize, usize, usize),
    a: f64,
    (xi, xj, xk): (f64, f64, f64),
    mut add: impl FnMut(usize, f64),
) -> u64 {
    match (i == j, j == k) {
        (false, false) => {
            add(i, 2.0 * a * xj * xk);
            add(j, 2.0 * a * xi * xk);
            add(k, 2.0 * a * xi * xj);
            3
        }
        (true, false) => {
            add(i, 2.0 * a * xj * xk);
            add(k, a * xi * xj);
            2
        }
        (false, true) => {
            add(i, a * xj * xk);
            add(j, 2.0 * a * xi * xk);
            2
        }
        (true, true) => {
            add(i, a * xj * xk);
            1
        }
    }
}

fn check_dims(a: &PackedSymTensor, x: &[f64]) -> Result<()> {
    if x.len() != a.n {
        return Err(Error::DimensionMismatch { expected: a.n, found: x.len() });
    }
    Ok(())
}

/// y = A ×₂ x ×₃ x over all n³ index triples.
pub fn sttsv_naive(a: &PackedSymTensor, x: &[f64]) -> Result<DenseVector> {
    sttsv_naive_counted(a, x).map(|(y, _)| y)
}

pub fn sttsv_naive_counted(a: &PackedSymTensor, x: &[f64]) -> Result<(DenseVector, u64)> {
    check_dims(a, x)?;
    let n = a.n;
    let mut y = vec![0.0; n];
    let mut count = 0u64;
    for (i, yi) in y.iter_mut().enumerate() {
        for (j, &xj) in x.iter().enumerate() {
            for (k, &xk) in x.iter().enumerate() {
                *yi += a.get(i, j, k) * xj * xk;
                count += 1;
            }
        }
    }
    Ok((y, count))
}

/// y = A ×₂ x ×₃ x touching each stored entry once.
pub fn sttsv_symmetric(a: &PackedSymTensor, x: &[f64]) -> Result<DenseVector> {
    sttsv_symmetric_counted(a, x).map(|(y, _)| y)
}

pub fn sttsv_symmetric_counted(a: &PackedSymTensor, x: &[f64]) -> Result<(DenseVector, u64)> {
    check_dims(a, x)?;
    let mut y = vec![0.0; a.n];
    let mut count = 0u64;
    let mut entries = a.data.iter();
    for i in 0..a.n {
        for j in 0..=i {
            for k in 0..=j {
                let v = *entries.next().unwrap();
                count += symmetric_update((i, j, k), v, (x[i], x[j], x[k]), |idx, d| y[idx] += d);
            }
        }
    }
    Ok((y, count))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HopmResult {
    pub lambda: f64,
    pub x: DenseVector,
    pub iters: usize,
    pub converged: bool,
}

/// Higher-order power method from a seeded random unit start.
pub fn hopm(a: &PackedSymTensor, seed: u64, tol: f64, max_iters: usize) -> Result<HopmResult> {
    let x0 = random_vector(a.n, seed);
    hopm_from(a, &x0, tol, max_iters)
}

/// Higher-order power method from `x0` (normalized first).
///
/// Stops once min(‖x − x_old‖, ‖x + x_old‖) < `tol`, or after `max_iters`.
pub fn hopm_from(a: &PackedSymTensor, x0: &[f64], tol: f64, max_iters: usize) -> Result<HopmResult> {
    check_dims(a, x0)?;
    let n0 = norm(x0);
    if n0 == 0.0 {
        return Err(Error::DegenerateIterate { iteration: 0 });
    }
    let mut x: Vec<f64> = x0.iter().map(|v| v / n0).collect();
    let mut iters = 0;
    let mut converged = false;
    while iters < max_iters {
        iters += 1;
        let y = sttsv_symmetric(a, &x)?;
        let ny = norm(&y);
        if ny == 0.0 || !ny.is_finite() {
            return Err(Error::DegenerateIterate { iteration: iters });
        }
        let next: Vec<f64> = y.iter().map(|v| v / ny).collect();
        let minus = next.iter().zip(&x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let plus = next.iter().zip(&x).map(|(p, q)| (p + q).powi(2)).sum::<f64>().sqrt();
        x = next;
        if minus.min(plus) < tol {
            converged = true;
            break;
        }
    }
    let lambda = dot(&x, &sttsv_symmetric(a, &x)?);
    Ok(HopmResult { lambda, x, iters, converged })
}

/// Gradient of f(X) = ⅙‖A − Σ_ℓ x_ℓ∘x_ℓ∘x_ℓ‖² with respect to X (n × r):
/// X·G − Y with G = (XᵀX) ∗ (XᵀX) and y_ℓ = A ×₂ x_ℓ ×₃ x_ℓ.
pub fn cp_gradient(a: &PackedSymTensor, x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.nrows() != a.n {
        return Err(Error::DimensionMismatch { expected: a.n, found: x.nrows() });
    }
    let gram = x.t().dot(x);
    let g = &gram * &gram;
    let mut out = x.dot(&g);
    for (l, col) in x.columns().into_iter().enumerate() {
        let y = sttsv_symmetric(a, &col.to_vec())?;
        for (i, v) in y.into_iter().enumerate() {
            out[[i, l]] -= v;
        }
    }
    Ok(out)
}
