//! Exact diagonalization, Schmidt spectra and smooth entropies.

use crate::error::{Error, Result};
use crate::hamlib::{Bipartition, Caps, LocalHamiltonian, DEGENERACY_TOL};
use crate::linalg::{self, CMat, CVec};
use crate::scalar::{cabs, creal, Real};

/// Schmidt values below this are dropped before counting rank.
pub const LAMBDA_FLOOR: f64 = 1e-14;
/// Slack on mass comparisons in the smoothing rules.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SpectrumSummary<T: Real> {
    pub ground_energy: T,
    pub first_excited: T,
    pub max_energy: T,
    pub gap: T,
    pub ground_state: CVec<T>,
}

#[derive(Clone, Debug)]
pub struct Eigensystem<T: Real> {
    pub values: Vec<T>,
    pub vectors: CMat<T>,
}

impl<T: Real> Eigensystem<T> {
    pub fn of(m: &CMat<T>) -> Self {
        let (values, vectors) = linalg::eigh(m);
        Eigensystem { values, vectors }
    }

    pub fn state(&self, i: usize) -> CVec<T> {
        self.vectors.column(i).into_owned()
    }

    pub fn summary(&self) -> Result<SpectrumSummary<T>> {
        let v = &self.values;
        if v.is_empty() {
            return Err(Error::DimensionMismatch("empty spectrum".into()));
        }
        let e1 = if v.len() > 1 { v[1] } else { v[0] };
        let gap = e1 - v[0];
        if v.len() > 1 && gap.as_f64() < DEGENERACY_TOL {
            return Err(Error::DegenerateGround { splitting: gap.as_f64() });
        }
        Ok(SpectrumSummary {
            ground_energy: v[0],
            first_excited: e1,
            max_energy: v[v.len() - 1],
            gap,
            ground_state: fix_phase(self.state(0)),
        })
    }
}

/// Rotates a vector so that its largest-magnitude entry is real positive.
pub fn fix_phase<T: Real>(mut v: CVec<T>) -> CVec<T> {
    let mut best = 0;
    for i in 0..v.len() {
        if cabs(v[i]) > cabs(v[best]) + T::lit(1e-12) {
            best = i;
        }
    }
    let a = cabs(v[best]);
    if a > T::zero() {
        let ph = v[best].conj() / creal(a);
        v *= ph;
    }
    v
}

pub fn diagonalize<T: Real>(h: &LocalHamiltonian<T>, caps: &Caps) -> Result<SpectrumSummary<T>> {
    eigensystem(h, caps)?.summary()
}

pub fn eigensystem<T: Real>(h: &LocalHamiltonian<T>, caps: &Caps) -> Result<Eigensystem<T>> {
    Ok(Eigensystem::of(&h.dense_checked(caps)?))
}

/// One distinct Schmidt value with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level<T> {
    pub value: T,
    pub multiplicity: u64,
}

/// Descending squared Schmidt coefficients, stored as grouped levels so that
/// large product spectra stay cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum<T: Real> {
    pub levels: Vec<Level<T>>,
    pub cut: Option<Bipartition>,
}

impl<T: Real> SchmidtSpectrum<T> {
    /// Builds a spectrum from raw reduced-state eigenvalues. Values below the
    /// floor are dropped; the rest must sum to one within `1e−10`.
    pub fn from_values(values: &[T]) -> Result<Self> {
        let mut v: Vec<T> = values.iter().copied().filter(|&x| x > T::lit(LAMBDA_FLOOR)).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let total = v.iter().fold(T::zero(), |a, &b| a + b);
        if (total - T::one()).abs().as_f64() > 1e-10 {
            return Err(Error::NotNormalized { norm: total.as_f64() });
        }
        let mut levels: Vec<Level<T>> = Vec::new();
        for x in v {
            match levels.last_mut() {
                Some(l) if l.value == x => l.multiplicity += 1,
                _ => levels.push(Level { value: x, multiplicity: 1 }),
            }
        }
        Ok(SchmidtSpectrum { levels, cut: None })
    }

    pub fn from_levels(mut levels: Vec<Level<T>>) -> Self {
        levels.retain(|l| l.value > T::lit(LAMBDA_FLOOR) && l.multiplicity > 0);
        levels.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap());
        SchmidtSpectrum { levels: merge_close(levels), cut: None }
    }

    /// Uniform spectrum of `Φ_p`.
    pub fn maximally_entangled(p: u64) -> Self {
        SchmidtSpectrum { levels: vec![Level { value: T::one() / T::lit(p as f64), multiplicity: p }], cut: None }
    }

    pub fn with_cut(mut self, cut: Bipartition) -> Self {
        self.cut = Some(cut);
        self
    }

    pub fn rank(&self) -> u64 {
        self.levels.iter().map(|l| l.multiplicity).sum()
    }

    pub fn largest(&self) -> T {
        self.levels[0].value
    }

    pub fn total_mass(&self) -> T {
        self.levels.iter().fold(T::zero(), |a, l| a + l.value * T::lit(l.multiplicity as f64))
    }

    /// Expanded descending list `λ_1 ≥ … ≥ λ_r`.
    pub fn coefficients(&self) -> Vec<T> {
        self.levels.iter().flat_map(|l| std::iter::repeat(l.value).take(l.multiplicity as usize)).collect()
    }

    /// Spectrum of the tensor product of two states.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut lv = Vec::with_capacity(self.levels.len() * other.levels.len());
        for a in &self.levels {
            for b in &other.levels {
                lv.push(Level { value: a.value * b.value, multiplicity: a.multiplicity * b.multiplicity });
            }
        }
        Self::from_levels(lv)
    }

    pub fn tensor_power(&self, k: usize) -> Self {
        let mut out = SchmidtSpectrum { levels: vec![Level { value: T::one(), multiplicity: 1 }], cut: None };
        for _ in 0..k {
            out = out.tensor(self);
        }
        out
    }

    /// Sum of the `r` largest values.
    pub fn top_mass(&self, r: u64) -> T {
        let mut left = r;
        let mut acc = T::zero();
        for l in &self.levels {
            let take = left.min(l.multiplicity);
            acc += l.value * T::lit(take as f64);
            left -= take;
            if left == 0 {
                break;
            }
        }
        acc
    }
}

fn merge_close<T: Real>(levels: Vec<Level<T>>) -> Vec<Level<T>> {
    let mut out: Vec<Level<T>> = Vec::with_capacity(levels.len());
    for l in levels {
        match out.last_mut() {
            Some(p) if (p.value - l.value).abs() <= T::lit(1e-12) * p.value => p.multiplicity += l.multiplicity,
            _ => out.push(l),
        }
    }
    out
}

/// Singular-value form of a bipartite state.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition<T: Real> {
    pub singular_values: Vec<T>,
    /// Columns are the A-side Schmidt vectors.
    pub left: CMat<T>,
    /// Columns are the B-side Schmidt vectors.
    pub right: CMat<T>,
    pub cut: Bipartition,
    pub dims: Vec<usize>,
}

impl<T: Real> SchmidtDecomposition<T> {
    /// `Σ_{i ∈ idx} s_i |a_i⟩|b_i⟩` in the full product basis.
    pub fn partial_state(&self, idx: impl IntoIterator<Item = usize>) -> CVec<T> {
        let (ia, ib) = linalg::bipartite_index(&self.cut.side_a, &self.cut.side_b, &self.dims);
        let mut v = CVec::<T>::zeros(ia.len() * ib.len());
        for i in idx {
            let s = creal(self.singular_values[i]);
            for (a, &oa) in ia.iter().enumerate() {
                let ca = self.left[(a, i)] * s;
                for (b, &ob) in ib.iter().enumerate() {
                    v[oa + ob] += ca * self.right[(b, i)];
                }
            }
        }
        v
    }

    pub fn reconstruct(&self) -> CVec<T> {
        self.partial_state(0..self.singular_values.len())
    }
}

fn check_unit<T: Real>(state: &CVec<T>) -> Result<()> {
    let n = state.norm().as_f64();
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm: n });
    }
    Ok(())
}

pub fn schmidt_decomposition<T: Real>(state: &CVec<T>, cut: &Bipartition, dims: &[usize]) -> Result<SchmidtDecomposition<T>> {
    check_unit(state)?;
    if linalg::total_dim(dims) != state.len() || cut.n() != dims.len() {
        return Err(Error::DimensionMismatch(format!("state of length {} does not factor over {dims:?}", state.len())));
    }
    let m = linalg::state_matrix(state, &cut.side_a, &cut.side_b, dims);
    let svd = m.svd(true, true);
    let u = svd.u.expect("left vectors");
    let vt = svd.v_t.expect("right vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let mut left = linalg::zeros::<T>(u.nrows(), order.len());
    let mut right = linalg::zeros::<T>(vt.ncols(), order.len());
    for (k, &i) in order.iter().enumerate() {
        left.set_column(k, &u.column(i));
        right.set_column(k, &vt.row(i).transpose());
    }
    Ok(SchmidtDecomposition {
        singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
        left,
        right,
        cut: cut.clone(),
        dims: dims.to_vec(),
    })
}

pub fn schmidt<T: Real>(state: &CVec<T>, cut: &Bipartition, dims: &[usize]) -> Result<SchmidtSpectrum<T>> {
    let d = schmidt_decomposition(state, cut, dims)?;
    let sq: Vec<T> = d.singular_values.iter().map(|&s| s * s).filter(|&x| x > T::lit(LAMBDA_FLOOR)).collect();
    let total = sq.iter().fold(T::zero(), |a, &b| a + b);
    let normed: Vec<T> = sq.iter().map(|&x| x / total).collect();
    Ok(SchmidtSpectrum::from_values(&normed)?.with_cut(cut.clone()))
}

/// Smallest number of leading values whose mass reaches `1 − δ`.
pub fn smooth_max_count<T: Real>(s: &SchmidtSpectrum<T>, delta: T) -> u64 {
    let target = T::one() - delta - T::lit(MASS_TOL);
    let mut acc = T::zero();
    let mut count = 0u64;
    for l in &s.levels {
        let full = acc + l.value * T::lit(l.multiplicity as f64);
        if full >= target {
            let mut j = ((target - acc) / l.value).ceil().as_f64().max(0.0) as u64;
            j = j.min(l.multiplicity);
            // guard against rounding in the division
            while j > 0 && acc + l.value * T::lit((j - 1) as f64) >= target {
                j -= 1;
            }
            while j < l.multiplicity && acc + l.value * T::lit(j as f64) < target {
                j += 1;
            }
            return (count + j).max(1);
        }
        acc = full;
        count += l.multiplicity;
    }
    count.max(1)
}

/// `S_max^δ` in bits.
pub fn smooth_max_entropy<T: Real>(s: &SchmidtSpectrum<T>, delta: T) -> T {
    T::lit(smooth_max_count(s, delta) as f64).log2()
}

/// Smallest achievable largest value after removing at most mass `δ`.
pub fn smooth_min_value<T: Real>(s: &SchmidtSpectrum<T>, delta: T) -> T {
    let budget = delta + T::lit(MASS_TOL);
    let mut dropped = T::zero();
    for l in &s.levels {
        let m = dropped + l.value * T::lit(l.multiplicity as f64);
        if m > budget {
            return l.value;
        }
        dropped = m;
    }
    s.levels.last().map(|l| l.value).unwrap_or_else(T::one)
}

/// `S_min^δ` in bits.
pub fn smooth_min_entropy<T: Real>(s: &SchmidtSpectrum<T>, delta: T) -> T {
    -smooth_min_value(s, delta).log2()
}

/// `ES_δ = S_max^δ − S_min^δ`.
pub fn entanglement_spread<T: Real>(s: &SchmidtSpectrum<T>, delta: T) -> T {
    smooth_max_entropy(s, delta) - smooth_min_entropy(s, delta)
}

#[derive(Clone, Debug)]
pub struct HeavyLightSplit<T: Real> {
    /// `b`: smallest integer with `Σ_{i<b} λ_i ≥ ε` (1-based `λ`).
    pub cutoff_index: usize,
    pub heavy_mass: T,
    pub heavy_state: CVec<T>,
    /// Absent when the heavy part carries all the mass.
    pub light_state: Option<CVec<T>>,
    pub lambdas: Vec<T>,
}

impl<T: Real> HeavyLightSplit<T> {
    pub fn reconstruct(&self) -> CVec<T> {
        let mut v = &self.heavy_state * creal(self.heavy_mass.sqrt());
        if let Some(l) = &self.light_state {
            v += l * creal((T::one() - self.heavy_mass).max(T::zero()).sqrt());
        }
        v
    }
}

pub fn heavy_light_split<T: Real>(state: &CVec<T>, cut: &Bipartition, dims: &[usize], epsilon: T) -> Result<HeavyLightSplit<T>> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::InvalidEpsilon(epsilon.as_f64()));
    }
    let d = schmidt_decomposition(state, cut, dims)?;
    let lambdas: Vec<T> = d.singular_values.iter().map(|&s| s * s).collect();
    let mut acc = T::zero();
    let mut b = None;
    for (i, &l) in lambdas.iter().enumerate() {
        acc += l;
        if acc >= epsilon - T::lit(MASS_TOL) {
            b = Some(i + 2);
            break;
        }
    }
    let b = b.ok_or(Error::InvalidEpsilon(epsilon.as_f64()))?;
    let heavy_mass = acc.min(T::one());
    let heavy = d.partial_state(0..b - 1) / creal(heavy_mass.sqrt());
    let rest = T::one() - heavy_mass;
    let light = if rest.as_f64() > MASS_TOL && b - 1 < lambdas.len() {
        let l = d.partial_state(b - 1..lambdas.len());
        let nl = l.norm();
        Some(l / creal(nl))
    } else {
        None
    };
    Ok(HeavyLightSplit { cutoff_index: b, heavy_mass, heavy_state: heavy, light_state: light, lambdas })
}

/// Largest squared overlap of a Schmidt-rank-`r` state with a state of this
/// spectrum.
pub fn top_r_overlap_bound<T: Real>(s: &SchmidtSpectrum<T>, r: u64) -> T {
    s.top_mass(r)
}
