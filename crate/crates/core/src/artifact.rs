use std::fmt;

use crate::hamlib::Bipartition;
use crate::linalg::{self, CMat, CVec};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Detectability,
    /// `Π_A Π_B` times the boundary-restricted detectability operator.
    DetectabilityAbsorbed,
    Chebyshev { q: usize },
    Qpe { f: u32, k: u32 },
    /// Realized POVM element of the distributed phase-estimation protocol.
    Protocol { f: u32, k: u32 },
    Compressed,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Detectability => write!(f, "detectability"),
            Provenance::DetectabilityAbsorbed => write!(f, "detectability-absorbed"),
            Provenance::Chebyshev { q } => write!(f, "chebyshev(q={q})"),
            Provenance::Qpe { f: b, k } => write!(f, "qpe(f={b},k={k})"),
            Provenance::Protocol { f: b, k } => write!(f, "protocol(f={b},k={k})"),
            Provenance::Compressed => write!(f, "compressed"),
        }
    }
}

/// An approximate ground-space projector with its measured error and rank.
#[derive(Clone, Debug)]
pub struct AgspArtifact<T: Real> {
    /// Dense operator on the system, when it fits in memory.
    pub operator: Option<CMat<T>>,
    /// `Δ`: measured defining error.
    pub error_delta: f64,
    /// `D`: operator Schmidt rank across the cut (or `2^c` for protocols).
    pub schmidt_rank: u64,
    /// `log2 D`; kept separately because `2^c` overflows quickly.
    pub log2_rank: f64,
    /// Communication cost `c` for protocol-built artifacts.
    pub comm_cost: Option<u64>,
    pub provenance: Provenance,
    /// The state the operator approximately projects onto.
    pub target_state: CVec<T>,
    pub cut: Bipartition,
    pub dims: Vec<usize>,
    pub label: String,
}

impl<T: Real> AgspArtifact<T> {
    /// `log2 D` entering the spread bound: `c` for protocol artifacts.
    pub fn log_d(&self) -> f64 {
        match self.comm_cost {
            Some(c) => c as f64,
            None => self.log2_rank,
        }
    }
}

/// Numerical rank of the operator-space realignment and its singular values.
pub fn operator_schmidt_rank<T: Real>(k: &CMat<T>, cut: &Bipartition, dims: &[usize], rel_threshold: f64) -> (u64, Vec<T>) {
    let r = linalg::operator_realign(k, &cut.side_a, &cut.side_b, dims);
    let s = linalg::singular_values(&r);
    let top = s.first().copied().unwrap_or_else(T::zero);
    let rank = s.iter().filter(|&&x| x > top * T::lit(rel_threshold)).count() as u64;
    (rank.max(1), s)
}

pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-10;
