//! Full-counting-statistics work distributions.
//!
//! For a stroke with propagator `U`, initial state `rho` expressed in the
//! initial eigenbasis `{psi0_m}` and final eigenbasis `{psiT_l}`, the
//! characteristic function
//!
//! ```text
//! chi(u) = Tr[ e^{iu H_T} U e^{-iu H_0/2} rho e^{-iu H_0/2} U^dagger ]
//!        = sum_{lmn} A_lm rho_mn conj(A_ln) e^{iu (e^T_l - (e^0_m + e^0_n)/2)}
//! ```
//!
//! with `A_lm = <psiT_l|U|psi0_m>` is a finite sum of phases, so its Fourier
//! transform is an exact comb of deltas. Terms with `m == n` carry the
//! populations of `rho` (the two-point-measurement part); terms with
//! `m != n` carry its coherences and come in complex-conjugate pairs.
//!
//! Work is the energy change of the working system. Cycle work is the sum of
//! the two stroke works, `w = w1 + w2`, and its characteristic function is
//! the product of the stroke ones.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycle::CycleRecord;
use crate::error::Result;
use crate::propagator::{amplitude_matrix, Propagator};
use crate::spin_model::{eigensystem_at, EigenSystem, EngineMode};
use crate::thermo::DensityMatrix;

/// Work values closer than this (energy units) are one support point.
pub const CLUSTER_TOLERANCE: f64 = 1e-9;

/// Largest imaginary part a clustered weight may keep.
pub const IMAGINARY_TOLERANCE: f64 = 1e-9;

/// Terms of smaller modulus are rounding noise (structurally forbidden
/// transitions, coherences of a thermal state) and are dropped.
pub const AMPLITUDE_CUTOFF: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcsError {
    #[error("weight at w = {work} keeps imaginary part {residue:e}; conjugate terms are unpaired")]
    ImaginaryResidue { work: f64, residue: f64 },
    #[error("the compression-stroke expansion needs a measurement-based cycle")]
    NotMeasurementMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Expansion stroke A -> B.
    Ab,
    /// Compression stroke C -> D.
    Cd,
    FullCycle,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ab => "AB",
            Stage::Cd => "CD",
            Stage::FullCycle => "cycle",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Only population (`m == n`) terms.
    Diagonal,
    /// Only coherence (`m != n`) terms.
    OffDiagonal,
    /// Both kinds coincide at this work value.
    Merged,
}

impl Origin {
    fn from_flags(diagonal: bool, off_diagonal: bool) -> Self {
        match (diagonal, off_diagonal) {
            (true, false) => Origin::Diagonal,
            (false, true) => Origin::OffDiagonal,
            _ => Origin::Merged,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Diagonal => "diagonal",
            Origin::OffDiagonal => "off_diagonal",
            Origin::Merged => "merged",
        }
    }
}

/// One `A_lm rho_mn conj(A_ln)` contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub amplitude: Complex64,
    pub frequency: f64,
    /// `(l, m, n)`; for products of stage functions, those of the first
    /// factor.
    pub indices: (usize, usize, usize),
    pub diagonal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicFunction {
    pub stage: Stage,
    pub terms: Vec<Term>,
}

impl CharacteristicFunction {
    /// `sum_k a_k e^{i u f_k}`
    pub fn evaluate(&self, u: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.amplitude * Complex64::from_polar(1.0, u * t.frequency))
            .sum()
    }

    /// `(-i)^k d^k chi/du^k` at `u = 0`, i.e. `sum_k a_k f_k^k`.
    pub fn moment(&self, k: u32) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.amplitude * t.frequency.powi(k as i32))
            .sum()
    }

    /// `sum_k |a_k|`, an upper bound on `|chi(u)|`.
    pub fn amplitude_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.amplitude.norm()).sum()
    }

    /// Characteristic function of the summed work of two independent strokes.
    pub fn product(&self, other: &CharacteristicFunction) -> CharacteristicFunction {
        let terms = self
            .terms
            .iter()
            .flat_map(|a| {
                other.terms.iter().map(move |b| Term {
                    amplitude: a.amplitude * b.amplitude,
                    frequency: a.frequency + b.frequency,
                    indices: a.indices,
                    diagonal: a.diagonal && b.diagonal,
                })
            })
            .collect();
        CharacteristicFunction {
            stage: Stage::FullCycle,
            terms,
        }
    }
}

/// Term list of a single stroke.
pub fn stage_characteristic(
    rho0: &DensityMatrix,
    propagator: &Propagator,
    basis0: &EigenSystem,
    basis_tau: &EigenSystem,
    stage: Stage,
) -> CharacteristicFunction {
    let a = amplitude_matrix(propagator, basis0, basis_tau);
    let rho = basis0.to_eigenbasis(rho0.entries());
    let mut terms = Vec::with_capacity(64);
    for l in 0..4 {
        for m in 0..4 {
            for n in 0..4 {
                let amplitude = a[(l, m)] * rho[(m, n)] * a[(l, n)].conj();
                if amplitude.norm() < AMPLITUDE_CUTOFF {
                    continue;
                }
                terms.push(Term {
                    amplitude,
                    frequency: basis_tau.energies[l]
                        - 0.5 * (basis0.energies[m] + basis0.energies[n]),
                    indices: (l, m, n),
                    diagonal: m == n,
                });
            }
        }
    }
    CharacteristicFunction { stage, terms }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub work: f64,
    /// Total quasi-probability, `diagonal + off_diagonal`.
    pub probability: f64,
    pub diagonal: f64,
    pub off_diagonal: f64,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkDistribution {
    pub stage: Stage,
    /// Sorted by work.
    pub support: Vec<SupportPoint>,
}

impl WorkDistribution {
    pub fn total(&self) -> f64 {
        self.support.iter().map(|p| p.probability).sum()
    }

    /// `|sum p - 1|`
    pub fn normalization_residual(&self) -> f64 {
        (self.total() - 1.0).abs()
    }

    /// Summed weight of the coherence terms; zero for a valid distribution.
    pub fn off_diagonal_total(&self) -> f64 {
        self.support.iter().map(|p| p.off_diagonal).sum()
    }

    pub fn min_probability(&self) -> f64 {
        self.support
            .iter()
            .map(|p| p.probability)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn negative_points(&self) -> impl Iterator<Item = &SupportPoint> {
        self.support.iter().filter(|p| p.probability < 0.0)
    }

    /// The population part alone, as a distribution of its own.
    pub fn diagonal_part(&self) -> WorkDistribution {
        WorkDistribution {
            stage: self.stage,
            support: self
                .support
                .iter()
                .filter(|p| p.origin != Origin::OffDiagonal)
                .map(|p| SupportPoint {
                    probability: p.diagonal,
                    off_diagonal: 0.0,
                    origin: Origin::Diagonal,
                    ..*p
                })
                .collect(),
        }
    }
}

struct Contribution {
    work: f64,
    diagonal: Complex64,
    off_diagonal: Complex64,
    has_diagonal: bool,
    has_off_diagonal: bool,
}

/// Agglomerative merge in sorted order: a point joins the current cluster
/// when it lies within `CLUSTER_TOLERANCE` of the previous point.
fn cluster(mut items: Vec<Contribution>, stage: Stage) -> Result<WorkDistribution, FcsError> {
    items.sort_by(|a, b| a.work.total_cmp(&b.work));
    let mut support = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let mut j = i + 1;
        while j < items.len() && items[j].work - items[j - 1].work <= CLUSTER_TOLERANCE {
            j += 1;
        }
        let group = &items[i..j];
        let work = group.iter().map(|c| c.work).sum::<f64>() / group.len() as f64;
        let diagonal: Complex64 = group.iter().map(|c| c.diagonal).sum();
        let off_diagonal: Complex64 = group.iter().map(|c| c.off_diagonal).sum();
        let residue = diagonal.im.abs().max(off_diagonal.im.abs());
        if residue > IMAGINARY_TOLERANCE {
            return Err(FcsError::ImaginaryResidue { work, residue });
        }
        support.push(SupportPoint {
            work,
            probability: diagonal.re + off_diagonal.re,
            diagonal: diagonal.re,
            off_diagonal: off_diagonal.re,
            origin: Origin::from_flags(
                group.iter().any(|c| c.has_diagonal),
                group.iter().any(|c| c.has_off_diagonal),
            ),
        });
        i = j;
    }
    Ok(WorkDistribution { stage, support })
}

/// Fourier transform of a term list: one support point per distinct
/// frequency, weighted by the real part of the summed amplitudes.
pub fn stage_distribution(cf: &CharacteristicFunction) -> Result<WorkDistribution, FcsError> {
    let zero = Complex64::new(0.0, 0.0);
    let items = cf
        .terms
        .iter()
        .map(|t| Contribution {
            work: t.frequency,
            diagonal: if t.diagonal { t.amplitude } else { zero },
            off_diagonal: if t.diagonal { zero } else { t.amplitude },
            has_diagonal: t.diagonal,
            has_off_diagonal: !t.diagonal,
        })
        .collect();
    cluster(items, cf.stage)
}

/// Distribution of `w1 + w2` for independent strokes: every pair of
/// support points contributes the product of its weights. The pair is
/// diagonal only when both factors are.
pub fn cycle_distribution(
    dist_ab: &WorkDistribution,
    dist_cd: &WorkDistribution,
) -> WorkDistribution {
    let c = |x: f64| Complex64::new(x, 0.0);
    let items = dist_ab
        .support
        .iter()
        .flat_map(|a| {
            dist_cd.support.iter().map(move |b| {
                let a_off = a.origin != Origin::Diagonal;
                let b_off = b.origin != Origin::Diagonal;
                Contribution {
                    work: a.work + b.work,
                    diagonal: c(a.diagonal * b.diagonal),
                    off_diagonal: c(a.diagonal * b.off_diagonal
                        + a.off_diagonal * b.diagonal
                        + a.off_diagonal * b.off_diagonal),
                    has_diagonal: a.origin != Origin::OffDiagonal
                        && b.origin != Origin::OffDiagonal,
                    has_off_diagonal: a_off || b_off,
                }
            })
        })
        .collect();
    cluster(items, Stage::FullCycle).expect("products of real weights carry no imaginary part")
}

/// `sum w^k p`
pub fn moments(dist: &WorkDistribution, k: u32) -> f64 {
    dist.support
        .iter()
        .map(|p| p.work.powi(k as i32) * p.probability)
        .sum()
}

/// `<W^2> - <W>^2`
pub fn variance(dist: &WorkDistribution) -> f64 {
    let mean = moments(dist, 1);
    moments(dist, 2) - mean * mean
}

/// First moments of the population and coherence parts, `(W_D, W_OD)`.
pub fn average_split(dist: &WorkDistribution) -> (f64, f64) {
    dist.support.iter().fold((0.0, 0.0), |(d, o), p| {
        (d + p.work * p.diagonal, o + p.work * p.off_diagonal)
    })
}

/// Characteristic functions and distributions of both strokes and of the
/// whole cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleStatistics {
    pub chi_ab: CharacteristicFunction,
    pub chi_cd: CharacteristicFunction,
    pub ab: WorkDistribution,
    pub cd: WorkDistribution,
    pub full: WorkDistribution,
}

impl CycleStatistics {
    pub fn stages(&self) -> [&WorkDistribution; 3] {
        [&self.ab, &self.cd, &self.full]
    }
}

pub fn work_statistics(record: &CycleRecord) -> Result<CycleStatistics> {
    let p = &record.params;
    let es1 = eigensystem_at(p, p.field_initial())?;
    let es2 = eigensystem_at(p, p.field_final())?;
    let chi_ab = stage_characteristic(&record.rho_a, &record.expansion, &es1, &es2, Stage::Ab);
    let chi_cd = stage_characteristic(&record.rho_c, &record.compression, &es2, &es1, Stage::Cd);
    let ab = stage_distribution(&chi_ab)?;
    let cd = stage_distribution(&chi_cd)?;
    let full = cycle_distribution(&ab, &cd);
    Ok(CycleStatistics {
        chi_ab,
        chi_cd,
        ab,
        cd,
        full,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionKind {
    Population,
    Interference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionTerm {
    pub label: &'static str,
    pub kind: ExpansionKind,
    pub work: f64,
    pub value: f64,
}

/// The eight contributions to the compression-stroke distribution for a
/// post-measurement state whose only coherence is between labels 0 and 3.
/// Energies: `eC` of `H(B2)` at C, `eD` of `H(B1)` at D.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdExpansion {
    pub terms: [ExpansionTerm; 8],
}

impl CdExpansion {
    pub fn interference_total(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.kind == ExpansionKind::Interference)
            .map(|t| t.value)
            .sum()
    }

    /// Clusters the terms into a distribution.
    pub fn assemble(&self) -> WorkDistribution {
        let items = self
            .terms
            .iter()
            .map(|t| {
                let v = Complex64::new(t.value, 0.0);
                let zero = Complex64::new(0.0, 0.0);
                let pop = t.kind == ExpansionKind::Population;
                Contribution {
                    work: t.work,
                    diagonal: if pop { v } else { zero },
                    off_diagonal: if pop { zero } else { v },
                    has_diagonal: pop,
                    has_off_diagonal: !pop,
                }
            })
            .collect();
        cluster(items, Stage::Cd).expect("expansion terms are real")
    }
}

pub fn stage_cd_expansion(record: &CycleRecord, compression: &Propagator) -> Result<CdExpansion> {
    let p = &record.params;
    if p.mode() != EngineMode::MeasurementBased {
        return Err(FcsError::NotMeasurementMode.into());
    }
    let es_c = eigensystem_at(p, p.field_final())?;
    let es_d = eigensystem_at(p, p.field_initial())?;
    let a = amplitude_matrix(compression, &es_c, &es_d);
    let rho = es_c.to_eigenbasis(record.rho_c.entries());
    let ec = es_c.energies;
    let ed = es_d.energies;
    let pop = |i: usize, j: usize, label| ExpansionTerm {
        label,
        kind: ExpansionKind::Population,
        work: ed[i] - ec[j],
        value: rho[(j, j)].re * a[(i, j)].norm_sqr(),
    };
    // 2 Re[A_i3 rho_30 conj(A_i0)] at eD_i - (eC_0 + eC_3)/2
    let interference = |i: usize, label| ExpansionTerm {
        label,
        kind: ExpansionKind::Interference,
        work: ed[i] - 0.5 * (ec[0] + ec[3]),
        value: 2.0 * (a[(i, 3)] * rho[(3, 0)] * a[(i, 0)].conj()).re,
    };
    Ok(CdExpansion {
        terms: [
            pop(3, 0, "rho00 |A30|^2"),
            pop(3, 3, "rho33 |A33|^2"),
            interference(3, "2 Re[A33 rho30 A'03]"),
            pop(0, 0, "rho00 |A00|^2"),
            pop(0, 3, "rho33 |A03|^2"),
            interference(0, "2 Re[A03 rho30 A'00]"),
            pop(1, 1, "rho11 |A11|^2"),
            pop(2, 2, "rho22 |A22|^2"),
        ],
    })
}
