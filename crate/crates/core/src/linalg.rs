//! Dense complex linear algebra on tensor-product spaces.
//!
//! Basis convention: site 0 is the most significant digit, so the index of
//! `|s_0 s_1 … s_{n-1}⟩` is `Σ s_i Π_{j>i} d_j`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::{cabs, cis, creal, Real, C};

pub type CMat<T> = DMatrix<C<T>>;
pub type CVec<T> = DVector<C<T>>;

pub fn zeros<T: Real>(r: usize, c: usize) -> CMat<T> {
    CMat::<T>::zeros(r, c)
}

pub fn eye<T: Real>(n: usize) -> CMat<T> {
    CMat::<T>::identity(n, n)
}

pub fn basis_vec<T: Real>(n: usize, i: usize) -> CVec<T> {
    let mut v = CVec::<T>::zeros(n);
    v[i] = C::new(T::one(), T::zero());
    v
}

pub fn from_real<T: Real>(rows: usize, cols: usize, data: &[f64]) -> CMat<T> {
    CMat::<T>::from_row_iterator(rows, cols, data.iter().map(|&x| creal(T::lit(x))))
}

pub fn kron<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    a.kronecker(b)
}

pub fn kron_vec<T: Real>(a: &CVec<T>, b: &CVec<T>) -> CVec<T> {
    a.kronecker(b)
}

pub fn kron_all<T: Real>(ops: &[CMat<T>]) -> CMat<T> {
    ops.iter().fold(eye::<T>(1), |acc, o| acc.kronecker(o))
}

pub fn dagger<T: Real>(m: &CMat<T>) -> CMat<T> {
    m.adjoint()
}

pub fn outer<T: Real>(a: &CVec<T>, b: &CVec<T>) -> CMat<T> {
    a * b.adjoint()
}

pub fn commutator<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    a * b - b * a
}

pub fn frob<T: Real>(m: &CMat<T>) -> T {
    m.norm()
}

pub fn vnorm<T: Real>(v: &CVec<T>) -> T {
    v.norm()
}

pub fn hermitian_residual<T: Real>(m: &CMat<T>) -> T {
    (m - m.adjoint()).norm()
}

pub fn symmetrize<T: Real>(m: &CMat<T>) -> CMat<T> {
    (m + m.adjoint()) * creal(T::lit(0.5))
}

/// Ascending eigenvalues and matching eigenvector columns of a Hermitian matrix.
pub fn eigh<T: Real>(m: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let e = nalgebra::SymmetricEigen::new(symmetrize(m));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].partial_cmp(&e.eigenvalues[b]).unwrap());
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let mut vecs = zeros::<T>(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &e.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn eigvalsh<T: Real>(m: &CMat<T>) -> Vec<T> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<T> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

pub fn singular_values<T: Real>(m: &CMat<T>) -> Vec<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<T> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Spectral norm.
pub fn op_norm<T: Real>(m: &CMat<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    if m.nrows() > 2 * m.ncols() {
        let g = m.adjoint() * m;
        return eigvalsh(&g).last().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt();
    }
    if m.ncols() > 2 * m.nrows() {
        let g = m * m.adjoint();
        return eigvalsh(&g).last().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt();
    }
    singular_values(m).first().copied().unwrap_or_else(T::zero)
}

/// Spectral norm of a Hermitian matrix.
pub fn herm_norm<T: Real>(m: &CMat<T>) -> T {
    let v = eigvalsh(m);
    match (v.first(), v.last()) {
        (Some(&a), Some(&b)) => a.abs().max(b.abs()),
        _ => T::zero(),
    }
}

/// `f(H) = V f(Λ) V†` for Hermitian `H`.
pub fn herm_fn<T: Real>(vals: &[T], vecs: &CMat<T>, f: impl Fn(T) -> C<T>) -> CMat<T> {
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let c = f(l);
        scaled.column_mut(j).scale_mut_c(c);
    }
    scaled * vecs.adjoint()
}

trait ScaleC<T: Real> {
    fn scale_mut_c(&mut self, c: C<T>);
}

impl<T: Real, S> ScaleC<T> for nalgebra::Matrix<C<T>, nalgebra::Dyn, nalgebra::U1, S>
where
    S: nalgebra::StorageMut<C<T>, nalgebra::Dyn, nalgebra::U1>,
{
    fn scale_mut_c(&mut self, c: C<T>) {
        for x in self.iter_mut() {
            *x *= c;
        }
    }
}

/// `e^{-i t H}` for Hermitian `H`.
pub fn expm_herm<T: Real>(h: &CMat<T>, t: T) -> CMat<T> {
    let (vals, vecs) = eigh(h);
    herm_fn(&vals, &vecs, |l| cis(-(l * t)))
}

/// Projector onto eigenvectors whose eigenvalue satisfies `keep`.
pub fn spectral_projector<T: Real>(vals: &[T], vecs: &CMat<T>, keep: impl Fn(T) -> bool) -> CMat<T> {
    herm_fn(vals, vecs, |l| if keep(l) { creal(T::one()) } else { creal(T::zero()) })
}

pub fn is_unitary<T: Real>(u: &CMat<T>, tol: T) -> bool {
    u.nrows() == u.ncols() && (u.adjoint() * u - eye::<T>(u.nrows())).norm() <= tol
}

/// Strides of each site in the big-endian product basis.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

pub fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Offsets contributed by each configuration of `sites` (in the given order).
pub fn config_offsets(sites: &[usize], dims: &[usize]) -> Vec<usize> {
    let st = strides(dims);
    let mut offs = vec![0usize];
    for &s in sites {
        let mut next = Vec::with_capacity(offs.len() * dims[s]);
        for &o in &offs {
            for v in 0..dims[s] {
                next.push(o + v * st[s]);
            }
        }
        offs = next;
    }
    offs
}

fn complement(sites: &[usize], n: usize) -> Vec<usize> {
    (0..n).filter(|i| !sites.contains(i)).collect()
}

/// Applies `op` (acting on `support`, in the order given) to every column of
/// `target`, a matrix whose rows index the full product space.
pub fn apply_local<T: Real>(op: &CMat<T>, support: &[usize], dims: &[usize], target: &mut CMat<T>) {
    let local = config_offsets(support, dims);
    debug_assert_eq!(local.len(), op.nrows());
    let rest = config_offsets(&complement(support, dims.len()), dims);
    let ds = local.len();
    let mut buf = vec![C::new(T::zero(), T::zero()); ds];
    for col in 0..target.ncols() {
        for &base in &rest {
            for (k, &o) in local.iter().enumerate() {
                buf[k] = target[(base + o, col)];
            }
            for (r, &o) in local.iter().enumerate() {
                let mut acc = C::new(T::zero(), T::zero());
                for (k, &b) in buf.iter().enumerate() {
                    acc += op[(r, k)] * b;
                }
                target[(base + o, col)] = acc;
            }
        }
    }
}

pub fn apply_local_vec<T: Real>(op: &CMat<T>, support: &[usize], dims: &[usize], v: &CVec<T>) -> CVec<T> {
    let mut m = CMat::<T>::from_column_slice(v.len(), 1, v.as_slice());
    apply_local(op, support, dims, &mut m);
    CVec::<T>::from_column_slice(m.as_slice())
}

/// Full-space matrix of a local operator.
pub fn embed<T: Real>(op: &CMat<T>, support: &[usize], dims: &[usize]) -> CMat<T> {
    let mut m = eye::<T>(total_dim(dims));
    apply_local(op, support, dims, &mut m);
    m
}

/// Index tables mapping `(a, b)` local indices of two complementary site
/// lists to the full product index.
pub fn bipartite_index(side_a: &[usize], side_b: &[usize], dims: &[usize]) -> (Vec<usize>, Vec<usize>) {
    (config_offsets(side_a, dims), config_offsets(side_b, dims))
}

/// Reshapes a state into the `dim(A) × dim(B)` coefficient matrix.
pub fn state_matrix<T: Real>(state: &CVec<T>, side_a: &[usize], side_b: &[usize], dims: &[usize]) -> CMat<T> {
    let (ia, ib) = bipartite_index(side_a, side_b, dims);
    CMat::<T>::from_fn(ia.len(), ib.len(), |a, b| state[ia[a] + ib[b]])
}

/// Realigns an operator so that rows index `(a_out, a_in)` and columns index
/// `(b_out, b_in)`; its singular values are the operator Schmidt coefficients.
pub fn operator_realign<T: Real>(k: &CMat<T>, side_a: &[usize], side_b: &[usize], dims: &[usize]) -> CMat<T> {
    let (ia, ib) = bipartite_index(side_a, side_b, dims);
    let (da, db) = (ia.len(), ib.len());
    CMat::<T>::from_fn(da * da, db * db, |r, c| {
        let (ao, ai) = (r / da, r % da);
        let (bo, bi) = (c / db, c % db);
        k[(ia[ao] + ib[bo], ia[ai] + ib[bi])]
    })
}

/// Haar-random unitary via QR of a complex Ginibre matrix with phase fix.
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(p: usize, rng: &mut R) -> CMat<T> {
    let g = CMat::<T>::from_fn(p, p, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C::new(T::lit(re), T::lit(im))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        let d = r[(j, j)];
        let a = cabs(d);
        let ph = if a > T::zero() { d / creal(a) } else { creal(T::one()) };
        for i in 0..p {
            q[(i, j)] *= ph;
        }
    }
    q
}

pub fn random_state<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVec<T> {
    let v = CVec::<T>::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C::new(T::lit(re), T::lit(im))
    });
    let nv = v.norm();
    v / creal(nv)
}

/// Maximally entangled state `Σ_i |ii⟩/√p`.
pub fn max_entangled<T: Real>(p: usize) -> CVec<T> {
    let mut v = CVec::<T>::zeros(p * p);
    let a = creal(T::one() / T::from_usize_lossy(p).sqrt());
    for i in 0..p {
        v[i * p + i] = a;
    }
    v
}

pub fn ceil_log2(q: u128) -> u32 {
    if q <= 1 {
        0
    } else {
        128 - (q - 1).leading_zeros()
    }
}

/// Single-qubit Paulis.
pub fn pauli<T: Real>(k: usize) -> CMat<T> {
    let (o, z) = (T::one(), T::zero());
    let m = |a: [(T, T); 4]| CMat::<T>::from_row_slice(2, 2, &a.map(|(r, i)| C::new(r, i)));
    match k {
        0 => m([(o, z), (z, z), (z, z), (o, z)]),
        1 => m([(z, z), (o, z), (o, z), (z, z)]),
        2 => m([(z, z), (z, -o), (z, o), (z, z)]),
        3 => m([(o, z), (z, z), (z, z), (-o, z)]),
        _ => panic!("pauli index {k}"),
    }
}

/// Heisenberg–Weyl operator `X^a Z^b` on a qudit of dimension `d`.
pub fn weyl<T: Real>(d: usize, a: usize, b: usize) -> CMat<T> {
    let mut m = zeros::<T>(d, d);
    let w = T::two_pi() / T::from_usize_lossy(d);
    for j in 0..d {
        let ph = cis(w * T::from_usize_lossy((b * j) % d));
        m[((j + a) % d, j)] = ph;
    }
    m
}

/// Least-squares line `y ≈ slope·x + intercept`; returns
/// `(slope, intercept, rms residual)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len().min(ys.len()) as f64;
    if n < 2.0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type M = CMat<f64>;

    #[test]
    fn embed_matches_kron() {
        let x = pauli::<f64>(1);
        let z = pauli::<f64>(3);
        let xz = kron(&x, &z);
        let dims = [2, 2, 2];
        let full = embed(&xz, &[0, 2], &dims);
        let oracle = kron_all(&[x.clone(), eye(2), z.clone()]);
        assert!((full - oracle).norm() < 1e-14);
        // reversed support order swaps the factors
        let full = embed(&xz, &[2, 0], &dims);
        let oracle = kron_all(&[z, eye(2), x]);
        assert!((full - oracle).norm() < 1e-14);
    }

    #[test]
    fn realign_swap_rank_four() {
        let mut swap: M = zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                swap[(i * 2 + j, j * 2 + i)] = creal(1.0);
            }
        }
        let r = operator_realign(&swap, &[0], &[1], &[2, 2]);
        let s = singular_values(&r);
        assert_eq!(s.iter().filter(|&&x| x > 1e-10).count(), 4);
    }

    #[test]
    fn haar_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: M = haar_unitary(6, &mut rng);
        assert!(is_unitary(&u, 1e-12));
    }

    #[test]
    fn expm_against_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: M = haar_unitary(4, &mut rng);
        let h = symmetrize(&(a.clone() + a.adjoint()));
        let t = 0.3;
        let mut term: M = eye(4);
        let mut sum: M = eye(4);
        for k in 1..30 {
            term = &term * &h * C::new(0.0, -t / k as f64);
            sum += &term;
        }
        assert!((expm_herm(&h, t) - sum).norm() < 1e-12);
    }

    #[test]
    fn weyl_qubit_is_pauli() {
        assert!((weyl::<f64>(2, 1, 0) - pauli(1)).norm() < 1e-14);
        assert!((weyl::<f64>(2, 0, 1) - pauli(3)).norm() < 1e-14);
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(64), 6);
        assert_eq!(ceil_log2(65), 7);
    }
}
