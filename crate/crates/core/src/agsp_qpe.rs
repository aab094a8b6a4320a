//! Phase-estimation AGSP with exact matrix exponentials.
//!
//! With the energy reference shifted so that `E_0 ↦ 0`, eigenphase
//! `θ_i = (E_i − E_0)·t_0` and `F|m⟩ = N^{-1/2} Σ_j e^{2πijm/N}|j⟩`, the
//! ancilla block of `PHASE` between outcomes `m` and `m′` is
//! `Σ_i a_{m−m′}(θ_i) |E_i⟩⟨E_i|` with
//! `a_r(θ) = N^{-1} Σ_j e^{−ij(θ + 2πr/N)}`.

use std::f64::consts::PI;

use crate::agsp_cheby::rank_artifact;
use crate::artifact::{AgspArtifact, Provenance};
use crate::error::{Error, Result};
use crate::hamlib::{Caps, SplitHamiltonian};
use crate::linalg::{self, CMat};
use crate::scalar::{cplx, creal, Real, C};
use crate::spectra::Eigensystem;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpeConfig {
    pub ancilla_bits: u32,
    pub repetitions: u32,
    /// `t_0`: evolution time per unit of the phase register.
    pub time_unit: f64,
    /// Energy resolution `2π/(2^f t_0)`.
    pub energy_window: f64,
}

/// Relative head-room added to the spectral range before fixing `t_0`.
pub const RANGE_MARGIN: f64 = 0.1;

impl QpeConfig {
    /// `t_0 = 2π / ((E_max − E_0)(1 + margin))`, so the whole spectrum fits in
    /// one phase period.
    pub fn calibrated(ancilla_bits: u32, repetitions: u32, spectral_range: f64) -> Self {
        let time_unit = 2.0 * PI / (spectral_range * (1.0 + RANGE_MARGIN));
        Self::with_time_unit(ancilla_bits, repetitions, time_unit)
    }

    pub fn with_time_unit(ancilla_bits: u32, repetitions: u32, time_unit: f64) -> Self {
        let n = (1u64 << ancilla_bits) as f64;
        QpeConfig { ancilla_bits, repetitions, time_unit, energy_window: 2.0 * PI / (n * time_unit) }
    }

    pub fn n_outcomes(&self) -> usize {
        1usize << self.ancilla_bits
    }

    pub fn validate(&self) -> Result<()> {
        if self.ancilla_bits == 0 || self.repetitions == 0 || !(self.time_unit > 0.0) {
            return Err(Error::InvalidParameter("QPE needs f ≥ 1, k ≥ 1 and a positive time unit".into()));
        }
        Ok(())
    }
}

/// `a_r(θ) = N^{-1} Σ_{j<N} e^{−ij(θ + 2πr/N)}`.
pub fn kernel_amplitude(n: usize, r: usize, theta: f64) -> (f64, f64) {
    let phi = theta + 2.0 * PI * r as f64 / n as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for j in 0..n {
        let a = -(j as f64) * phi;
        re += a.cos();
        im += a.sin();
    }
    (re / n as f64, im / n as f64)
}

/// Eigen-resolved phase-estimation data for one Hamiltonian.
#[derive(Clone, Debug)]
pub struct QpeKernel<T: Real> {
    pub cfg: QpeConfig,
    pub eigen: Eigensystem<T>,
    pub e0: f64,
    pub thetas: Vec<f64>,
    /// `amps[i][r] = a_r(θ_i)`.
    pub amps: Vec<Vec<C<T>>>,
}

impl<T: Real> QpeKernel<T> {
    /// Checks wrap-around and resolvability and tabulates the kernel.
    pub fn new(eigen: Eigensystem<T>, cfg: QpeConfig) -> Result<Self> {
        cfg.validate()?;
        let e0 = eigen.values[0].as_f64();
        let range = eigen.values[eigen.values.len() - 1].as_f64() - e0;
        let limit = 2.0 * PI / cfg.time_unit;
        if range >= limit {
            return Err(Error::PhaseWrap { range, limit });
        }
        if eigen.values.len() > 1 {
            let gap = eigen.values[1].as_f64() - e0;
            if gap < 2.0 * cfg.energy_window {
                return Err(Error::UnresolvableGap { gap, resolution: cfg.energy_window });
            }
        }
        Ok(Self::tabulate(eigen, cfg))
    }

    /// Same as [`QpeKernel::new`] without the resolvability check.
    pub fn unchecked(eigen: Eigensystem<T>, cfg: QpeConfig) -> Self {
        Self::tabulate(eigen, cfg)
    }

    fn tabulate(eigen: Eigensystem<T>, cfg: QpeConfig) -> Self {
        let e0 = eigen.values[0].as_f64();
        let n = cfg.n_outcomes();
        let thetas: Vec<f64> = eigen.values.iter().map(|&e| (e.as_f64() - e0) * cfg.time_unit).collect();
        let amps = thetas
            .iter()
            .map(|&th| {
                (0..n)
                    .map(|r| {
                        let (re, im) = kernel_amplitude(n, r, th);
                        cplx(T::lit(re), T::lit(im))
                    })
                    .collect()
            })
            .collect();
        QpeKernel { cfg, eigen, e0, thetas, amps }
    }

    pub fn dim(&self) -> usize {
        self.eigen.values.len()
    }

    /// `Σ_i f(i) |E_i⟩⟨E_i|`.
    fn diag_op(&self, f: impl Fn(usize) -> C<T>) -> CMat<T> {
        let v = &self.eigen.vectors;
        let mut s = v.clone();
        for i in 0..self.dim() {
            let c = f(i);
            for r in 0..self.dim() {
                s[(r, i)] *= c;
            }
        }
        s * v.adjoint()
    }

    /// Ancilla block `r = m − m′ (mod N)` of `PHASE`.
    pub fn block(&self, r: usize) -> CMat<T> {
        self.diag_op(|i| self.amps[i][r])
    }

    /// Dense `PHASE` on `ancilla ⊗ system` (ancilla most significant).
    pub fn phase_operator(&self, caps: &Caps) -> Result<CMat<T>> {
        let n = self.cfg.n_outcomes();
        let d = self.dim();
        caps.check_operator("phase estimation operator", n * d)?;
        let blocks: Vec<CMat<T>> = (0..n).map(|r| self.block(r)).collect();
        let mut p = linalg::zeros::<T>(n * d, n * d);
        for m in 0..n {
            for mp in 0..n {
                let b = &blocks[(m + n - mp) % n];
                p.view_mut((m * d, mp * d), (d, d)).copy_from(b);
            }
        }
        Ok(p)
    }

    /// `⟨0|PHASE|0⟩ = Σ_i a_0(θ_i)|E_i⟩⟨E_i|`.
    pub fn accept_amplitude(&self) -> CMat<T> {
        self.block(0)
    }

    /// `max_{i≥1} |a_0(θ_i)|`, the per-block tail constant.
    pub fn sigma(&self) -> f64 {
        self.amps.iter().skip(1).map(|a| crate::scalar::cabs(a[0]).as_f64()).fold(0.0, f64::max)
    }

    /// `‖K|0⟩|E_i⟩‖ = |a_0(θ_i)|^k`.
    pub fn leakage(&self, i: usize, k: u32) -> f64 {
        crate::scalar::cabs(self.amps[i][0]).as_f64().powi(k as i32)
    }

    /// Closed form of the defining error: `max_{i≥1} |a_0(θ_i)|^k`, together
    /// with the ground-state term `√(1 − |a_0(θ_0)|^{2k})` (zero when `θ_0 = 0`).
    pub fn closed_form_error(&self, k: u32) -> f64 {
        let ground = (1.0 - self.leakage(0, k).powi(2)).max(0.0).sqrt();
        self.sigma().powi(k as i32).max(ground)
    }

    /// `‖(K − 𝟙⊗|Ω⟩⟨Ω|)(|0⟩⊗𝟙)‖` for `k` parallel blocks. With `B = ⟨0|PHASE|0⟩^k`
    /// and `P = |Ω⟩⟨Ω|` the Gram matrix is `(𝟙−P)B†B(𝟙−P) + (1 − ‖BΩ‖²)P`, so the
    /// norm is that of the stacked factor `[B(𝟙−P); √(1 − ‖BΩ‖²)⟨Ω|]`. Taking the
    /// SVD of the factor keeps small errors out of the square-root floor.
    pub fn defining_error(&self, k: u32) -> f64 {
        let a = self.accept_amplitude();
        let d = self.dim();
        let mut b = linalg::eye::<T>(d);
        for _ in 0..k {
            b = &a * &b;
        }
        let omega = self.eigen.state(0);
        let p = linalg::outer(&omega, &omega);
        let top = &b * (linalg::eye::<T>(d) - &p);
        let c = (T::one() - (&b * &omega).norm_squared()).max(T::zero()).sqrt();
        let mut g = linalg::zeros::<T>(d + 1, d);
        g.view_mut((0, 0), (d, d)).copy_from(&top);
        for j in 0..d {
            g[(d, j)] = omega[j].conj() * creal(c);
        }
        linalg::op_norm(&g).as_f64()
    }

    /// `⟨0|K|0⟩ = Σ_i |a_0(θ_i)|^{2k} |E_i⟩⟨E_i|`, the system operator seen by
    /// an ancilla prepared in `|0⟩`.
    pub fn effective_operator(&self, k: u32) -> CMat<T> {
        self.diag_op(|i| creal(T::lit(self.leakage(i, k).powi(2))))
    }
}

/// `PHASE` for a Hamiltonian given by its split form.
pub fn phase_estimation_operator<T: Real>(sh: &SplitHamiltonian<T>, cfg: QpeConfig, caps: &Caps) -> Result<CMat<T>> {
    let eig = Eigensystem::of(&sh.full.dense_checked(caps)?);
    QpeKernel::new(eig, cfg)?.phase_operator(caps)
}

#[derive(Clone, Debug)]
pub struct QpeAgsp<T: Real> {
    pub artifact: AgspArtifact<T>,
    pub kernel: QpeKernel<T>,
    pub sigma: f64,
    /// Defining error for `k = 1..=repetitions`, evaluated in the eigenbasis.
    pub delta_by_k: Vec<f64>,
}

/// Builds the `k`-fold unanimous-accept POVM and measures its error.
pub fn qpe_agsp<T: Real>(sh: &SplitHamiltonian<T>, cfg: QpeConfig, caps: &Caps) -> Result<QpeAgsp<T>> {
    let eig = Eigensystem::of(&sh.full.dense_checked(caps)?);
    eig.summary()?;
    let kernel = QpeKernel::new(eig, cfg)?;
    // spectral evaluation; the dense one bottoms out near 1e-8
    let delta_by_k: Vec<f64> = (1..=cfg.repetitions).map(|k| kernel.closed_form_error(k)).collect();
    let delta = *delta_by_k.last().unwrap();
    let k_eff = kernel.effective_operator(cfg.repetitions);
    let artifact = rank_artifact(
        k_eff,
        delta,
        Provenance::Qpe { f: cfg.ancilla_bits, k: cfg.repetitions },
        kernel.eigen.state(0),
        sh,
        caps,
        format!("QPE(f={},k={})", cfg.ancilla_bits, cfg.repetitions),
    )?;
    Ok(QpeAgsp { sigma: kernel.sigma(), artifact, kernel, delta_by_k })
}

/// Smallest `k` with `σ^k ≤ target`.
pub fn repetitions_for(sigma: f64, target: f64) -> u32 {
    if sigma <= target {
        return 1;
    }
    (target.ln() / sigma.ln()).ceil().max(1.0) as u32
}
