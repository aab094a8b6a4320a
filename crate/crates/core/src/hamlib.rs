//! Local Hamiltonians on interaction hypergraphs, bipartitions and the
//! boundary unitary decomposition.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::scalar::{cabs, cplx, creal, Real};

/// Tolerance on `0 ⪯ h ⪯ 𝟙` and on Hermiticity of explicit terms.
pub const TERM_TOL: f64 = 1e-10;
/// Ground-space degeneracy threshold on `E_1 − E_0`.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Dimension limits for dense work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    /// log2 of the largest dense state vector.
    pub state_qubits: u32,
    /// log2 of the largest dense operator dimension.
    pub operator_qubits: u32,
    /// log2 of the largest per-side dimension of an operator-space SVD.
    pub osvd_qubits: u32,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { state_qubits: 14, operator_qubits: 12, osvd_qubits: 10 }
    }
}

impl Caps {
    pub fn with_state_qubits(q: u32) -> Self {
        Caps {
            state_qubits: q,
            operator_qubits: q.min(12),
            osvd_qubits: q.min(10),
        }
    }

    pub fn check_operator(&self, what: &'static str, dim: usize) -> Result<()> {
        let cap = 1u128 << self.operator_qubits;
        if dim as u128 > cap {
            return Err(Error::CapExceeded { what, dim: dim as u128, cap });
        }
        Ok(())
    }

    pub fn check_state(&self, what: &'static str, dim: u128) -> Result<()> {
        let cap = 1u128 << self.state_qubits;
        if dim > cap {
            return Err(Error::CapExceeded { what, dim, cap });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Site {
    pub index: usize,
    pub local_dimension: usize,
}

#[derive(Clone, Debug)]
pub struct LocalTerm<T: Real> {
    pub support: Vec<usize>,
    pub operator: CMat<T>,
    pub label: String,
}

impl<T: Real> LocalTerm<T> {
    pub fn new(support: Vec<usize>, operator: CMat<T>, label: impl Into<String>) -> Self {
        LocalTerm { support, operator, label: label.into() }
    }

    pub fn is_projector(&self, tol: T) -> bool {
        (&self.operator * &self.operator - &self.operator).norm() <= tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    GeneralGraph,
    Lattice(Vec<usize>),
}

/// Affine map applied to the raw model: `h_k = scale · (h_k^raw − m_k 𝟙)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rescaling {
    pub scale: f64,
    /// `Σ_k m_k`, so that `H_raw = H / scale + shift`.
    pub shift: f64,
}

impl Rescaling {
    pub const IDENTITY: Rescaling = Rescaling { scale: 1.0, shift: 0.0 };

    pub fn raw_energy(&self, e: f64) -> f64 {
        e / self.scale + self.shift
    }

    pub fn raw_gap(&self, gap: f64) -> f64 {
        gap / self.scale
    }
}

#[derive(Clone, Debug)]
pub struct LocalHamiltonian<T: Real> {
    pub sites: Vec<Site>,
    pub terms: Vec<LocalTerm<T>>,
    pub geometry: Geometry,
    pub rescaling: Rescaling,
    pub label: String,
}

impl<T: Real> LocalHamiltonian<T> {
    pub fn new(dims: &[usize], terms: Vec<LocalTerm<T>>, geometry: Geometry, label: impl Into<String>) -> Result<Self> {
        let sites: Vec<Site> = dims
            .iter()
            .enumerate()
            .map(|(index, &local_dimension)| Site { index, local_dimension })
            .collect();
        let h = LocalHamiltonian { sites, terms, geometry, rescaling: Rescaling::IDENTITY, label: label.into() };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<()> {
        if self.sites.iter().any(|s| s.local_dimension < 2) {
            return Err(Error::InvalidParameter("local dimension must be at least 2".into()));
        }
        let n = self.n();
        for t in &self.terms {
            let set: BTreeSet<usize> = t.support.iter().copied().collect();
            if set.len() != t.support.len() || t.support.iter().any(|&s| s >= n) || t.support.is_empty() {
                return Err(Error::InvalidParameter(format!("bad support {:?} for `{}`", t.support, t.label)));
            }
            let d: usize = t.support.iter().map(|&s| self.sites[s].local_dimension).product();
            if t.operator.nrows() != d || t.operator.ncols() != d {
                return Err(Error::DimensionMismatch(format!("term `{}` has dimension {} but support needs {d}", t.label, t.operator.nrows())));
            }
            if linalg::hermitian_residual(&t.operator).as_f64() > TERM_TOL {
                return Err(Error::NonHermitian(t.label.clone()));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.sites.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.sites.iter().map(|s| s.local_dimension).collect()
    }

    pub fn dim(&self) -> usize {
        linalg::total_dim(&self.dims())
    }

    pub fn dim_of(&self, sites: &[usize]) -> usize {
        sites.iter().map(|&s| self.sites[s].local_dimension).product()
    }

    /// Whether every term satisfies `0 ⪯ h ⪯ 𝟙`.
    pub fn is_normalized(&self) -> bool {
        let tol = T::lit(TERM_TOL);
        self.terms.iter().all(|t| {
            let v = linalg::eigvalsh(&t.operator);
            v.first().map_or(true, |&a| a >= -tol) && v.last().map_or(true, |&b| b <= T::one() + tol)
        })
    }

    /// Rescales every term into `[0, 1]`: each term is shifted so its
    /// smallest eigenvalue is 0, then all terms share one scale so that the
    /// widest term spans exactly `[0, 1]`.
    pub fn normalize(mut self) -> Self {
        let mut shift = 0.0;
        let mut widest = 0.0f64;
        let mut mins = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            let v = linalg::eigvalsh(&t.operator);
            let (lo, hi) = (v[0].as_f64(), v[v.len() - 1].as_f64());
            mins.push(lo);
            shift += lo;
            widest = widest.max(hi - lo);
        }
        let scale = if widest > 0.0 { 1.0 / widest } else { 1.0 };
        for (t, &m) in self.terms.iter_mut().zip(&mins) {
            let d = t.operator.nrows();
            t.operator = (&t.operator - linalg::eye::<T>(d) * creal(T::lit(m))) * creal(T::lit(scale));
        }
        self.rescaling = Rescaling { scale, shift };
        self.label = format!("{} [scale={scale} shift={shift}]", self.label);
        self
    }

    pub fn normalize_if_needed(self) -> Self {
        if self.is_normalized() {
            self
        } else {
            self.normalize()
        }
    }

    /// Dense matrix of a subset of terms on the full space.
    pub fn dense_terms(&self, idx: &[usize]) -> CMat<T> {
        let dims = self.dims();
        let mut h = linalg::zeros::<T>(self.dim(), self.dim());
        for &k in idx {
            let t = &self.terms[k];
            h += linalg::embed(&t.operator, &t.support, &dims);
        }
        h
    }

    pub fn dense(&self) -> CMat<T> {
        let all: Vec<usize> = (0..self.terms.len()).collect();
        self.dense_terms(&all)
    }

    pub fn dense_checked(&self, caps: &Caps) -> Result<CMat<T>> {
        caps.check_operator("hamiltonian", self.dim())?;
        Ok(self.dense())
    }

    /// The terms `idx` as a Hamiltonian on the listed sites only (sites
    /// renumbered in the given order).
    pub fn restrict(&self, sites: &[usize], idx: &[usize]) -> LocalHamiltonian<T> {
        let map = |s: usize| sites.iter().position(|&x| x == s).expect("term inside region");
        let terms = idx
            .iter()
            .map(|&k| {
                let t = &self.terms[k];
                LocalTerm::new(t.support.iter().map(|&s| map(s)).collect(), t.operator.clone(), t.label.clone())
            })
            .collect();
        LocalHamiltonian {
            sites: sites
                .iter()
                .enumerate()
                .map(|(i, &s)| Site { index: i, local_dimension: self.sites[s].local_dimension })
                .collect(),
            terms,
            geometry: Geometry::GeneralGraph,
            rescaling: self.rescaling,
            label: format!("{}|{:?}", self.label, sites),
        }
    }

    /// Site adjacency induced by shared term supports.
    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.n()];
        for t in &self.terms {
            for &a in &t.support {
                for &b in &t.support {
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
        }
        adj
    }

    /// Graph distance from a set of sites (usize::MAX when unreachable).
    pub fn distances_from(&self, sources: &BTreeSet<usize>) -> Vec<usize> {
        let adj = self.adjacency();
        let mut dist = vec![usize::MAX; self.n()];
        let mut queue = VecDeque::new();
        for &s in sources {
            dist[s] = 0;
            queue.push_back(s);
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Declarative model description.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    /// `Σ_i (𝟙 − |0⟩⟨0|_i)` on `n` qubits.
    AllZeros { n: usize },
    /// `−J Σ Z_i Z_j − g Σ X_i` on a lattice (`dims = [n]` is a chain).
    Tfim { dims: Vec<usize>, j: f64, g: f64, periodic: bool },
    /// `J Σ (XX + YY + ZZ)` on a lattice.
    Heisenberg { dims: Vec<usize>, j: f64, periodic: bool },
    /// Random frustration-free chain of rank-`rank` two-qubit projectors,
    /// each annihilating a random product state.
    FfChain { n: usize, rank: usize, seed: u64 },
    /// Product of two-qubit states `a_0|00⟩ + a_1|11⟩` paired along the first
    /// lattice axis, starting at coordinate `pair_offset`. Unpaired sites are
    /// pinned to `|0⟩`.
    PairedProduct { dims: Vec<usize>, amplitudes: (f64, f64), pair_offset: usize },
    /// Explicit terms given as row-major `(re, im)` entries.
    Explicit { local_dims: Vec<usize>, terms: Vec<ExplicitTerm> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitTerm {
    pub support: Vec<usize>,
    pub entries: Vec<(f64, f64)>,
    pub label: String,
}

pub fn lattice_sites(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Site index of a lattice coordinate (first axis most significant).
pub fn lattice_index(dims: &[usize], coord: &[usize]) -> usize {
    coord.iter().zip(dims).fold(0, |acc, (&c, &d)| acc * d + c)
}

pub fn lattice_coord(dims: &[usize], mut idx: usize) -> Vec<usize> {
    let mut c = vec![0; dims.len()];
    for a in (0..dims.len()).rev() {
        c[a] = idx % dims[a];
        idx /= dims[a];
    }
    c
}

/// Nearest-neighbour bonds of a hypercubic lattice.
pub fn lattice_bonds(dims: &[usize], periodic: bool) -> Vec<(usize, usize)> {
    let mut bonds = Vec::new();
    for i in 0..lattice_sites(dims) {
        let c = lattice_coord(dims, i);
        for a in 0..dims.len() {
            let mut c2 = c.clone();
            if c[a] + 1 < dims[a] {
                c2[a] += 1;
            } else if periodic && dims[a] > 2 {
                c2[a] = 0;
            } else {
                continue;
            }
            bonds.push((i, lattice_index(dims, &c2)));
        }
    }
    bonds
}

fn geometry_of(dims: &[usize]) -> Geometry {
    Geometry::Lattice(dims.to_vec())
}

pub fn build_model<T: Real>(spec: &ModelSpec, caps: &Caps) -> Result<LocalHamiltonian<T>> {
    let n = match spec {
        ModelSpec::AllZeros { n } | ModelSpec::FfChain { n, .. } => *n,
        ModelSpec::Tfim { dims, .. } | ModelSpec::Heisenberg { dims, .. } | ModelSpec::PairedProduct { dims, .. } => {
            lattice_sites(dims)
        }
        ModelSpec::Explicit { local_dims, .. } => local_dims.len(),
    };
    if n == 0 {
        return Err(Error::InvalidParameter("model has no sites".into()));
    }
    let dim: u128 = match spec {
        ModelSpec::Explicit { local_dims, .. } => local_dims.iter().map(|&d| d as u128).product(),
        _ => 1u128 << n.min(127),
    };
    caps.check_state("model", dim)?;
    let pauli = |k| linalg::pauli::<T>(k);
    match spec {
        ModelSpec::AllZeros { n } => {
            let p1 = linalg::from_real::<T>(2, 2, &[0.0, 0.0, 0.0, 1.0]);
            let terms = (0..*n).map(|i| LocalTerm::new(vec![i], p1.clone(), format!("P1[{i}]"))).collect();
            LocalHamiltonian::new(&vec![2; *n], terms, Geometry::Lattice(vec![*n]), format!("all_zeros(n={n})"))
        }
        ModelSpec::Tfim { dims, j, g, periodic } => {
            let zz = linalg::kron(&pauli(3), &pauli(3)) * creal(T::lit(-j));
            let x = pauli(1) * creal(T::lit(-g));
            let mut terms = Vec::new();
            for (a, b) in lattice_bonds(dims, *periodic) {
                terms.push(LocalTerm::new(vec![a, b], zz.clone(), format!("ZZ[{a},{b}]")));
            }
            for i in 0..n {
                terms.push(LocalTerm::new(vec![i], x.clone(), format!("X[{i}]")));
            }
            let label = format!("tfim(dims={dims:?},J={j},g={g},periodic={periodic})");
            Ok(LocalHamiltonian::new(&vec![2; n], terms, geometry_of(dims), label)?.normalize())
        }
        ModelSpec::Heisenberg { dims, j, periodic } => {
            let mut h = linalg::zeros::<T>(4, 4);
            for k in 1..4 {
                h += linalg::kron(&pauli(k), &pauli(k));
            }
            let h = h * creal(T::lit(*j));
            let terms = lattice_bonds(dims, *periodic)
                .into_iter()
                .map(|(a, b)| LocalTerm::new(vec![a, b], h.clone(), format!("SS[{a},{b}]")))
                .collect();
            let label = format!("heisenberg(dims={dims:?},J={j},periodic={periodic})");
            Ok(LocalHamiltonian::new(&vec![2; n], terms, geometry_of(dims), label)?.normalize())
        }
        ModelSpec::FfChain { n, rank, seed } => ff_chain(*n, *rank, *seed),
        ModelSpec::PairedProduct { dims, amplitudes, pair_offset } => paired_product(dims, *amplitudes, *pair_offset),
        ModelSpec::Explicit { local_dims, terms } => {
            let mut out = Vec::new();
            for t in terms {
                let d: usize = t.support.iter().map(|&s| local_dims.get(s).copied().unwrap_or(0)).product();
                if t.entries.len() != d * d {
                    return Err(Error::DimensionMismatch(format!(
                        "term `{}` has {} entries, support needs {}",
                        t.label,
                        t.entries.len(),
                        d * d
                    )));
                }
                let m = CMat::<T>::from_row_iterator(d, d, t.entries.iter().map(|&(r, i)| cplx(T::lit(r), T::lit(i))));
                out.push(LocalTerm::new(t.support.clone(), m, t.label.clone()));
            }
            let label = format!("explicit({} terms)", out.len());
            Ok(LocalHamiltonian::new(local_dims, out, Geometry::GeneralGraph, label)?.normalize_if_needed())
        }
    }
}

fn random_qubit<T: Real>(rng: &mut ChaCha8Rng) -> CVec<T> {
    linalg::random_state::<T, _>(2, rng)
}

/// Projector onto a uniformly random `rank`-dimensional subspace of the
/// orthogonal complement of `v`.
fn random_projector_avoiding<T: Real>(v: &CVec<T>, rank: usize, rng: &mut ChaCha8Rng) -> CMat<T> {
    let d = v.len();
    let mut basis: Vec<CVec<T>> = Vec::new();
    while basis.len() < rank {
        let mut w = linalg::random_state::<T, _>(d, rng);
        for b in std::iter::once(v).chain(basis.iter()) {
            let c = b.dotc(&w);
            w -= b * c;
        }
        let nw = w.norm();
        if nw > T::lit(1e-6) {
            basis.push(w / creal(nw));
        }
    }
    let mut p = linalg::zeros::<T>(d, d);
    for b in &basis {
        p += linalg::outer(b, b);
    }
    linalg::symmetrize(&p)
}

fn ff_chain<T: Real>(n: usize, rank: usize, seed: u64) -> Result<LocalHamiltonian<T>> {
    if n < 2 || rank == 0 || rank > 3 {
        return Err(Error::InvalidParameter(format!("ff_chain needs n ≥ 2 and rank in 1..=3 (got n={n}, rank={rank})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..64u32 {
        let states: Vec<CVec<T>> = (0..n).map(|_| random_qubit(&mut rng)).collect();
        let mut terms = Vec::new();
        for i in 0..n - 1 {
            let v = linalg::kron_vec(&states[i], &states[i + 1]);
            let p = random_projector_avoiding(&v, rank, &mut rng);
            terms.push(LocalTerm::new(vec![i, i + 1], p, format!("P[{i},{}]", i + 1)));
        }
        let h = LocalHamiltonian::new(&vec![2; n], terms, Geometry::Lattice(vec![n]), format!("ff_chain(n={n},rank={rank},seed={seed},attempt={attempt})"))?;
        if n > 10 {
            return Ok(h);
        }
        let ev = linalg::eigvalsh(&h.dense());
        if (ev[1] - ev[0]).as_f64() > 1e-6 && ev[0].abs().as_f64() < 1e-9 {
            return Ok(h);
        }
        let _: u32 = rng.random();
    }
    Err(Error::InvalidParameter(format!("ff_chain(n={n}, rank={rank}, seed={seed}) never produced a unique ground state")))
}

fn paired_product<T: Real>(dims: &[usize], amplitudes: (f64, f64), pair_offset: usize) -> Result<LocalHamiltonian<T>> {
    let (a0, a1) = amplitudes;
    let norm = (a0 * a0 + a1 * a1).sqrt();
    if norm == 0.0 || dims.is_empty() || pair_offset > 1 {
        return Err(Error::InvalidParameter("paired_product needs nonzero amplitudes and pair_offset in {0,1}".into()));
    }
    let mut psi = CVec::<T>::zeros(4);
    psi[0] = creal(T::lit(a0 / norm));
    psi[3] = creal(T::lit(a1 / norm));
    let term = linalg::eye::<T>(4) - linalg::outer(&psi, &psi);
    let pin = linalg::from_real::<T>(2, 2, &[0.0, 0.0, 0.0, 1.0]);
    let n = lattice_sites(dims);
    let mut paired = vec![false; n];
    let mut terms = Vec::new();
    for i in 0..n {
        let c = lattice_coord(dims, i);
        if c[0] % 2 == pair_offset % 2 && c[0] + 1 < dims[0] {
            let mut c2 = c.clone();
            c2[0] += 1;
            let j = lattice_index(dims, &c2);
            paired[i] = true;
            paired[j] = true;
            terms.push(LocalTerm::new(vec![i, j], term.clone(), format!("1-Psi[{i},{j}]")));
        }
    }
    for (i, &p) in paired.iter().enumerate() {
        if !p {
            terms.push(LocalTerm::new(vec![i], pin.clone(), format!("P1[{i}]")));
        }
    }
    let label = format!("paired_product(dims={dims:?},amps=({a0},{a1}),offset={pair_offset})");
    LocalHamiltonian::new(&vec![2; n], terms, geometry_of(dims), label)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bipartition {
    pub side_a: Vec<usize>,
    pub side_b: Vec<usize>,
    pub width_w: usize,
}

impl Bipartition {
    /// `side_a` plus its complement among `n` sites.
    pub fn new(side_a: &[usize], n: usize, width_w: usize) -> Result<Self> {
        let a: BTreeSet<usize> = side_a.iter().copied().collect();
        if a.len() != side_a.len() || a.iter().any(|&s| s >= n) {
            return Err(Error::InvalidBipartition(format!("side A {side_a:?} is not a set of sites below {n}")));
        }
        if width_w == 0 {
            return Err(Error::InvalidBipartition("width must be at least 1".into()));
        }
        Ok(Bipartition {
            side_a: a.iter().copied().collect(),
            side_b: (0..n).filter(|s| !a.contains(s)).collect(),
            width_w,
        })
    }

    pub fn from_sides(side_a: &[usize], side_b: &[usize], width_w: usize) -> Result<Self> {
        let n = side_a.len() + side_b.len();
        let cut = Self::new(side_a, n, width_w)?;
        let b: BTreeSet<usize> = side_b.iter().copied().collect();
        if b.len() != side_b.len() || b.iter().copied().collect::<Vec<_>>() != cut.side_b {
            return Err(Error::InvalidBipartition("sides must partition 0..n".into()));
        }
        Ok(cut)
    }

    /// `A = {0, …, k−1}` on `n` sites.
    pub fn prefix(k: usize, n: usize) -> Self {
        Self::new(&(0..k).collect::<Vec<_>>(), n, 1).expect("prefix cut")
    }

    pub fn half(n: usize) -> Self {
        Self::prefix(n / 2, n)
    }

    pub fn n(&self) -> usize {
        self.side_a.len() + self.side_b.len()
    }

    pub fn in_a(&self, s: usize) -> bool {
        self.side_a.binary_search(&s).is_ok()
    }

    pub fn with_width(mut self, w: usize) -> Self {
        self.width_w = w.max(1);
        self
    }
}

impl std::fmt::Display for Bipartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a: Vec<String> = self.side_a.iter().map(|s| s.to_string()).collect();
        let b: Vec<String> = self.side_b.iter().map(|s| s.to_string()).collect();
        write!(f, "{}|{}", a.join(" "), b.join(" "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    A,
    B,
    Boundary,
}

#[derive(Clone, Debug)]
pub struct SplitHamiltonian<T: Real> {
    pub full: LocalHamiltonian<T>,
    pub cut: Bipartition,
    pub a_terms: Vec<usize>,
    pub b_terms: Vec<usize>,
    pub boundary_terms: Vec<usize>,
    /// Terms of `∂_w A`: support within distance `w − 1` of the boundary sites.
    pub extended_terms: Vec<usize>,
    pub boundary_size: usize,
    pub extended_boundary_size: usize,
}

pub fn split<T: Real>(h: &LocalHamiltonian<T>, cut: &Bipartition) -> Result<SplitHamiltonian<T>> {
    if cut.n() != h.n() {
        return Err(Error::InvalidBipartition(format!("cut covers {} sites, Hamiltonian has {}", cut.n(), h.n())));
    }
    let mut a_terms = Vec::new();
    let mut b_terms = Vec::new();
    let mut boundary_terms = Vec::new();
    for (k, t) in h.terms.iter().enumerate() {
        let na = t.support.iter().filter(|&&s| cut.in_a(s)).count();
        if na == t.support.len() {
            a_terms.push(k);
        } else if na == 0 {
            b_terms.push(k);
        } else {
            boundary_terms.push(k);
        }
    }
    let extended_terms = extended_boundary(h, &boundary_terms, cut.width_w);
    Ok(SplitHamiltonian {
        full: h.clone(),
        cut: cut.clone(),
        boundary_size: boundary_terms.len(),
        extended_boundary_size: extended_terms.len(),
        a_terms,
        b_terms,
        boundary_terms,
        extended_terms,
    })
}

fn extended_boundary<T: Real>(h: &LocalHamiltonian<T>, boundary_terms: &[usize], w: usize) -> Vec<usize> {
    let sources: BTreeSet<usize> = boundary_terms.iter().flat_map(|&k| h.terms[k].support.iter().copied()).collect();
    if sources.is_empty() {
        return Vec::new();
    }
    let dist = h.distances_from(&sources);
    (0..h.terms.len())
        .filter(|&k| boundary_terms.contains(&k) || h.terms[k].support.iter().all(|&s| dist[s] < w))
        .collect()
}

impl<T: Real> SplitHamiltonian<T> {
    pub fn side_of(&self, k: usize) -> Side {
        if self.a_terms.contains(&k) {
            Side::A
        } else if self.b_terms.contains(&k) {
            Side::B
        } else {
            Side::Boundary
        }
    }

    /// Restriction of the terms `idx` (all inside A) to the A sites.
    pub fn block_a(&self, idx: &[usize]) -> LocalHamiltonian<T> {
        self.full.restrict(&self.cut.side_a, idx)
    }

    pub fn block_b(&self, idx: &[usize]) -> LocalHamiltonian<T> {
        self.full.restrict(&self.cut.side_b, idx)
    }

    /// `H_A` on the A sites.
    pub fn h_a(&self) -> LocalHamiltonian<T> {
        self.block_a(&self.a_terms)
    }

    pub fn h_b(&self) -> LocalHamiltonian<T> {
        self.block_b(&self.b_terms)
    }

    pub fn dense_a(&self) -> CMat<T> {
        self.full.dense_terms(&self.a_terms)
    }

    pub fn dense_b(&self) -> CMat<T> {
        self.full.dense_terms(&self.b_terms)
    }

    pub fn dense_boundary(&self) -> CMat<T> {
        self.full.dense_terms(&self.boundary_terms)
    }

    /// Sites touched by crossing terms, sorted.
    pub fn boundary_sites(&self) -> Vec<usize> {
        let s: BTreeSet<usize> = self.boundary_terms.iter().flat_map(|&k| self.full.terms[k].support.iter().copied()).collect();
        s.into_iter().collect()
    }

    /// Largest support among `∂_w A` terms.
    pub fn max_extended_support(&self) -> usize {
        self.extended_terms.iter().map(|&k| self.full.terms[k].support.len()).max().unwrap_or(0)
    }
}

/// `H_∂A = Σ_j β_j u_j^A ⊗ u_j^B` with `β_j > 0`.
#[derive(Clone, Debug)]
pub struct UnitaryDecomposition<T: Real> {
    pub coefficients: Vec<T>,
    pub factors: Vec<(CMat<T>, CMat<T>)>,
    /// Sites of the A factors (global indices, in tensor order).
    pub sites_a: Vec<usize>,
    pub sites_b: Vec<usize>,
    /// Basis labels `(a-digits, b-digits)` of each term, for reproducibility.
    pub labels: Vec<String>,
}

impl<T: Real> UnitaryDecomposition<T> {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn beta_sum(&self) -> T {
        self.coefficients.iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Reassembles `Σ β_j u^A ⊗ u^B` on the `(sites_a, sites_b)` space.
    pub fn reconstruct_local(&self) -> CMat<T> {
        let da = self.factors.first().map_or(1, |f| f.0.nrows());
        let db = self.factors.first().map_or(1, |f| f.1.nrows());
        let mut m = linalg::zeros::<T>(da * db, da * db);
        for (b, (ua, ub)) in self.coefficients.iter().zip(&self.factors) {
            m += linalg::kron(ua, ub) * creal(*b);
        }
        m
    }

    /// The same operator on the full space of `dims`.
    pub fn reconstruct_full(&self, dims: &[usize]) -> CMat<T> {
        let n: usize = dims.iter().product();
        if self.is_empty() {
            return linalg::zeros(n, n);
        }
        let support: Vec<usize> = self.sites_a.iter().chain(&self.sites_b).copied().collect();
        linalg::embed(&self.reconstruct_local(), &support, dims)
    }
}

/// Expands an operator on `sites_a ∪ sites_b` (tensor order `A` then `B`) in
/// the Heisenberg–Weyl basis `⊗_s X^{a_s} Z^{b_s}`, absorbing phases into
/// the A factor.
pub fn decompose_operator<T: Real>(op: &CMat<T>, sites_a: &[usize], sites_b: &[usize], dims: &[usize]) -> Result<UnitaryDecomposition<T>> {
    let all: Vec<usize> = sites_a.iter().chain(sites_b).copied().collect();
    let local_dims: Vec<usize> = all.iter().map(|&s| dims[s]).collect();
    let d: usize = local_dims.iter().product();
    if op.nrows() != d {
        return Err(Error::DimensionMismatch(format!("operator has dimension {} but support needs {d}", op.nrows())));
    }
    let na = sites_a.len();
    // each site contributes d_s² basis elements (a, b)
    let counts: Vec<usize> = local_dims.iter().map(|&q| q * q).collect();
    let total: usize = counts.iter().product();
    let weyls: Vec<Vec<CMat<T>>> =
        local_dims.iter().map(|&q| (0..q * q).map(|ab| linalg::weyl::<T>(q, ab / q, ab % q)).collect()).collect();
    let tol = T::lit(1e-13);
    let mut out = UnitaryDecomposition {
        coefficients: Vec::new(),
        factors: Vec::new(),
        sites_a: sites_a.to_vec(),
        sites_b: sites_b.to_vec(),
        labels: Vec::new(),
    };
    let inv_d = creal(T::one() / T::from_usize_lossy(d));
    for idx in 0..total {
        let mut digits = vec![0usize; all.len()];
        let mut r = idx;
        for s in (0..all.len()).rev() {
            digits[s] = r % counts[s];
            r /= counts[s];
        }
        let ua = linalg::kron_all(&(0..na).map(|s| weyls[s][digits[s]].clone()).collect::<Vec<_>>());
        let ub = linalg::kron_all(&(na..all.len()).map(|s| weyls[s][digits[s]].clone()).collect::<Vec<_>>());
        let p = linalg::kron(&ua, &ub);
        // Weyl products have one nonzero per column, so Tr(P†K) is a sparse sum
        let mut c = cplx(T::zero(), T::zero());
        for j in 0..d {
            if let Some(i) = (0..d).find(|&i| p[(i, j)] != cplx(T::zero(), T::zero())) {
                c += p[(i, j)].conj() * op[(i, j)];
            }
        }
        let c = c * inv_d;
        let mag = cabs(c);
        if mag <= tol {
            continue;
        }
        let phase = c / creal(mag);
        out.coefficients.push(mag);
        out.factors.push((ua * phase, ub));
        let fmt = |r: std::ops::Range<usize>| {
            r.map(|s| format!("{}.{}", digits[s] / local_dims[s], digits[s] % local_dims[s])).collect::<Vec<_>>().join(",")
        };
        out.labels.push(format!("[{}|{}]", fmt(0..na), fmt(na..all.len())));
    }
    let resid = (out.reconstruct_local() - op).norm();
    if resid.as_f64() > 1e-10 * (1.0 + op.norm().as_f64()) {
        return Err(Error::Internal(format!("boundary decomposition residual {resid}")));
    }
    Ok(out)
}

pub fn decompose_boundary<T: Real>(sh: &SplitHamiltonian<T>) -> Result<UnitaryDecomposition<T>> {
    let sites = sh.boundary_sites();
    let sites_a: Vec<usize> = sites.iter().copied().filter(|&s| sh.cut.in_a(s)).collect();
    let sites_b: Vec<usize> = sites.iter().copied().filter(|&s| !sh.cut.in_a(s)).collect();
    if sh.boundary_terms.is_empty() {
        return Ok(UnitaryDecomposition { coefficients: vec![], factors: vec![], sites_a, sites_b, labels: vec![] });
    }
    let dims = sh.full.dims();
    let support: Vec<usize> = sites_a.iter().chain(&sites_b).copied().collect();
    let local_dims: Vec<usize> = support.iter().map(|&s| dims[s]).collect();
    let d: usize = local_dims.iter().product();
    if d > 1 << 10 {
        return Err(Error::CapExceeded { what: "boundary support", dim: d as u128, cap: 1 << 10 });
    }
    let mut op = linalg::zeros::<T>(d, d);
    for &k in &sh.boundary_terms {
        let t = &sh.full.terms[k];
        let local: Vec<usize> = t.support.iter().map(|s| support.iter().position(|x| x == s).unwrap()).collect();
        op += linalg::embed(&t.operator, &local, &local_dims);
    }
    decompose_operator(&op, &sites_a, &sites_b, &dims)
}

/// `‖Σ_j β_j u^A ⊗ u^B − H_∂A‖` on the full space.
pub fn decomposition_residual<T: Real>(sh: &SplitHamiltonian<T>, dec: &UnitaryDecomposition<T>) -> T {
    let dims = sh.full.dims();
    linalg::op_norm(&(dec.reconstruct_full(&dims) - sh.dense_boundary()))
}
