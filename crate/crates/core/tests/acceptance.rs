//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Every reference value is recomputed here from first principles: the
//! Hamiltonian from Kronecker products of Pauli matrices, eigenpairs and
//! matrix exponentials from a generic Hermitian eigensolver, and
//! two-point-measurement statistics by direct enumeration.

use std::time::Instant;

use nalgebra::{Matrix2, SymmetricEigen};
use num_complex::Complex64;
use otto_fcs::linalg::{unitarity_defect, CMatrix4};
use otto_fcs::propagator::propagate_fixed;
use otto_fcs::{
    moments, run_cycle, run_cycle_with, sweep_tau, work_statistics, CycleRecord, EngineMode,
    EngineParams, RampProtocol, Scheme, WorkDistribution, DEFAULT_TOLERANCE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = DEFAULT_TOLERANCE;

type Outcome = Result<String, String>;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn hamiltonian(j: f64, g: f64, b: f64) -> CMatrix4 {
    let i = Complex64::new(0.0, 1.0);
    let x = Matrix2::new(c(0.), c(1.), c(1.), c(0.));
    let y = Matrix2::new(c(0.), -i, i, c(0.));
    let z = Matrix2::new(c(1.), c(0.), c(0.), c(-1.));
    let id = Matrix2::<Complex64>::identity();
    let k = |a: &Matrix2<Complex64>, b: &Matrix2<Complex64>| {
        let out = a.kronecker(b);
        CMatrix4::from_fn(|r, col| out[(r, col)])
    };
    (k(&z, &id) + k(&id, &z)) * c(b) + k(&x, &x) * c(j * (1. + g)) + k(&y, &y) * c(j * (1. - g))
}

/// Eigenvalues and orthonormal eigenvectors of a Hermitian matrix.
struct Spectrum {
    values: [f64; 4],
    vectors: CMatrix4,
}

impl Spectrum {
    /// Levels in ascending order.
    fn of(h: &CMatrix4) -> Self {
        let e = SymmetricEigen::new(*h);
        let mut order = [0, 1, 2, 3];
        order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
        Spectrum {
            values: order.map(|k| e.eigenvalues[k]),
            vectors: CMatrix4::from_fn(|r, col| e.eigenvectors[(r, order[col])]),
        }
    }

    /// `exp(i s H)`
    fn expm_i(&self, s: f64) -> CMatrix4 {
        let d = CMatrix4::from_diagonal(&nalgebra::Vector4::from_fn(|k, _| {
            Complex64::from_polar(1.0, s * self.values[k])
        }));
        self.vectors * d * self.vectors.adjoint()
    }
}

fn spectra(p: &EngineParams) -> (Spectrum, Spectrum) {
    let h = |b| hamiltonian(p.coupling(), p.anisotropy(), b);
    (
        Spectrum::of(&h(p.field_initial())),
        Spectrum::of(&h(p.field_final())),
    )
}

/// Sorted `(w, p)` list with points closer than `1e-9` merged.
fn merge(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64, usize)> = Vec::new();
    for (w, p) in pts {
        match out.last_mut() {
            Some(last) if w - last.0 / last.2 as f64 <= 1e-9 => {
                last.0 += w;
                last.1 += p;
                last.2 += 1;
            }
            _ => out.push((w, p, 1)),
        }
    }
    out.into_iter().map(|(w, p, n)| (w / n as f64, p)).collect()
}

/// Two-point-measurement statistics of one stroke from a state diagonal in
/// the initial eigenbasis.
fn tpm(rho: &CMatrix4, u: &CMatrix4, from: &Spectrum, to: &Spectrum) -> Vec<(f64, f64)> {
    let a = to.vectors.adjoint() * u * from.vectors;
    let rho_e = from.vectors.adjoint() * rho * from.vectors;
    let mut pts = Vec::new();
    for l in 0..4 {
        for m in 0..4 {
            pts.push((
                to.values[l] - from.values[m],
                a[(l, m)].norm_sqr() * rho_e[(m, m)].re,
            ));
        }
    }
    merge(pts)
}

fn convolve(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    merge(
        a.iter()
            .flat_map(|x| b.iter().map(move |y| (x.0 + y.0, x.1 * y.1)))
            .collect(),
    )
}

fn points(d: &WorkDistribution) -> Vec<(f64, f64)> {
    d.support.iter().map(|s| (s.work, s.probability)).collect()
}

/// Largest weight mismatch between two discrete distributions. A point
/// present on one side only counts with its full weight.
fn distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let one_way = |x: &[(f64, f64)], y: &[(f64, f64)]| {
        x.iter()
            .map(|&(w, p)| {
                let q: f64 = y
                    .iter()
                    .filter(|(v, _)| (v - w).abs() <= 1e-8)
                    .map(|(_, q)| q)
                    .sum();
                (p - q).abs()
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

fn log_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (start.ln() + (stop.ln() - start.ln()) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn reference_params(g: f64, tau: f64) -> EngineParams {
    EngineParams::new(1.0, g, 1.0, 2.0, 1.0, tau, EngineMode::MeasurementBased).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng) -> EngineParams {
    let open = |rng: &mut ChaCha8Rng, hi: f64| hi - rng.random_range(0.0..hi);
    let g = rng.random_range(-1.0..=1.0);
    let j = open(rng, 2.0);
    let b1 = open(rng, 3.0);
    let b2 = open(rng, 3.0);
    let t = 5.0 - rng.random_range(0.0..4.8);
    let tau = (1e-3f64.ln() + rng.random_range(0.0..=1.0) * (20f64.ln() - 1e-3f64.ln())).exp();
    EngineParams::new(j, g, b1, b2, t, tau, EngineMode::MeasurementBased).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fmt_params(p: &EngineParams) -> String {
    format!(
        "J={:.4} g={:.4} B1={:.4} B2={:.4} T={:.4} tau={:.4}",
        p.coupling(),
        p.anisotropy(),
        p.field_initial(),
        p.field_final(),
        p.temperature(),
        p.tau()
    )
}

struct Shared {
    draws: Vec<CycleRecord>,
    unitarity: f64,
}

fn criterion_1(shared: &mut Shared) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut norm, mut off) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let p = random_params(&mut rng);
        let r = run_cycle(&p, TOL).map_err(|e| format!("{}: {e}", fmt_params(&p)))?;
        let s = work_statistics(&r).map_err(|e| format!("{}: {e}", fmt_params(&p)))?;
        for d in s.stages() {
            norm = norm.max(d.normalization_residual());
            off = off.max(d.off_diagonal_total().abs());
        }
        shared.unitarity = shared
            .unitarity
            .max(r.expansion.unitarity_defect())
            .max(r.compression.unitarity_defect());
        shared.draws.push(r);
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        norm <= 1e-9 && off <= 1e-9 && secs < 60.0,
        format!(
            "max |sum p - 1| = {norm:.2e}, max |sum p_od| = {off:.2e}, {secs:.2}s for 50 draws"
        ),
    )
}

fn criterion_2() -> Outcome {
    let neg = |tau| -> Result<f64, String> {
        let r = run_cycle(&reference_params(1.0, tau), TOL).map_err(|e| e.to_string())?;
        let s = work_statistics(&r).map_err(|e| e.to_string())?;
        Ok(s.full.min_probability())
    };
    let short = neg(0.001)?;
    let long = neg(20.0)?;
    check(
        short <= -1e-6 && long < -1e-12 && long.abs() < short.abs(),
        format!("min p at tau=0.001: {short:.3e}; at tau=20: {long:.3e}"),
    )
}

fn criterion_3() -> Outcome {
    let dist = |tau| -> Result<WorkDistribution, String> {
        let r = run_cycle(&reference_params(0.0, tau), TOL).map_err(|e| e.to_string())?;
        Ok(work_statistics(&r).map_err(|e| e.to_string())?.full)
    };
    let a = dist(0.001)?;
    let b = dist(20.0)?;
    let min = a.min_probability().min(b.min_probability());
    let gap = distance(&points(&a), &points(&b));
    check(
        min >= -1e-12 && gap <= 1e-8,
        format!("min p = {min:.3e}, pointwise gap tau=0.001 vs 20 = {gap:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = random_params(&mut rng);
        let r = run_cycle(&p, TOL).map_err(|e| e.to_string())?;
        let s = work_statistics(&r).map_err(|e| e.to_string())?;
        let (s1, s2) = spectra(&p);
        let oracle = tpm(r.rho_a.entries(), &r.expansion.matrix, &s1, &s2);
        worst = worst.max(distance(&points(&s.ab), &oracle));
    }
    check(
        worst <= 1e-10,
        format!("max |p_FCS - p_TPM| over 20 draws = {worst:.2e}"),
    )
}

fn criterion_5(shared: &mut Shared) -> Outcome {
    let grid = log_grid(0.001, 20.0, 50);
    let mut worst = 0.0f64;
    for g in [0.0, 0.5, 1.0] {
        for r in sweep_tau(&reference_params(g, 1.0), &grid, Scheme::Magnus4, TOL) {
            let r = r.map_err(|e| e.to_string())?;
            let s = work_statistics(&r).map_err(|e| e.to_string())?;
            let bookkeeping = (r.energy_b - r.energy_a) + (r.energy_d - r.energy_c);
            worst = worst.max((moments(&s.full, 1) - bookkeeping).abs());
            shared.unitarity = shared
                .unitarity
                .max(r.expansion.unitarity_defect())
                .max(r.compression.unitarity_defect());
        }
    }
    check(
        worst <= 1e-8,
        format!("max |<w>_FCS - (W1 + W2)| over 150 points = {worst:.2e}"),
    )
}

fn mean_work_curve(g: f64, grid: &[f64]) -> Result<Vec<f64>, String> {
    sweep_tau(&reference_params(g, 1.0), grid, Scheme::Magnus4, TOL)
        .into_iter()
        .map(|r| {
            let r = r.map_err(|e| e.to_string())?;
            Ok(moments(
                &work_statistics(&r).map_err(|e| e.to_string())?.full,
                1,
            ))
        })
        .collect()
}

fn criterion_6() -> Outcome {
    let grid = log_grid(0.001, 20.0, 200);
    let wavy = mean_work_curve(1.0, &grid)?;
    let slopes: Vec<f64> = wavy
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.abs() > 1e-12)
        .collect();
    let changes = slopes
        .windows(2)
        .filter(|s| s[0].signum() != s[1].signum())
        .count();
    let flat = mean_work_curve(0.0, &grid)?;
    let spread = flat.iter().copied().fold(f64::MIN, f64::max)
        - flat.iter().copied().fold(f64::MAX, f64::min);
    check(
        changes >= 2 && spread <= 1e-8,
        format!("gamma=1: {changes} slope sign changes; gamma=0: spread {spread:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let mut iso = 0.0f64;
    let mut aniso = f64::INFINITY;
    let mut stray = 0.0f64;
    for tau in [0.001, 1.0, 20.0] {
        for g in [0.0, 1.0] {
            let p = reference_params(g, tau);
            let r = run_cycle(&p, TOL).map_err(|e| e.to_string())?;
            let (_, s2) = spectra(&p);
            let rho = s2.vectors.adjoint() * r.rho_c.entries() * s2.vectors;
            let mut l1 = 0.0;
            // the eigensolver orders levels ascending, so the pair mixed by
            // the Bell measurement is (lowest, highest)
            for i in 0..4 {
                for j in 0..4 {
                    if i == j {
                        continue;
                    }
                    l1 += rho[(i, j)].norm();
                    if (i.min(j), i.max(j)) != (0, 3) {
                        stray = stray.max(rho[(i, j)].norm());
                    }
                }
            }
            if g == 0.0 {
                iso = iso.max(l1);
            } else {
                aniso = aniso.min(l1);
            }
            let reported = r.coherence[2];
            if (reported - l1).abs() > 1e-10 {
                return Err(format!(
                    "library coherence {reported:e} disagrees with oracle {l1:e} at tau={tau}"
                ));
            }
        }
    }
    check(
        iso <= 1e-12 && aniso > 0.0 && stray <= 1e-10,
        format!("gamma=0 max C = {iso:.2e}; gamma=1 min C = {aniso:.4}; max stray off-diagonal = {stray:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let p = reference_params(1.0, 0.001)
        .with_mode(EngineMode::TwoBath {
            hot_temperature: 10.0,
        })
        .unwrap();
    let r = run_cycle(&p, TOL).map_err(|e| e.to_string())?;
    let s = work_statistics(&r).map_err(|e| e.to_string())?;
    let (s1, s2) = spectra(&p);
    let ab = tpm(r.rho_a.entries(), &r.expansion.matrix, &s1, &s2);
    let cd = tpm(r.rho_c.entries(), &r.compression.matrix, &s2, &s1);
    let full = convolve(&ab, &cd);
    let gap = distance(&points(&s.ab), &ab)
        .max(distance(&points(&s.cd), &cd))
        .max(distance(&points(&s.full), &full));
    let min = s
        .stages()
        .iter()
        .map(|d| d.min_probability())
        .fold(f64::INFINITY, f64::min);
    check(
        min >= -1e-12 && gap <= 1e-10,
        format!("min p = {min:.3e}, max |p_FCS - p_TPM| = {gap:.2e}"),
    )
}

/// Characteristic function of one stroke in trace form,
/// `Tr[e^{iuH_tau} U e^{-iuH_0/2} rho e^{-iuH_0/2} U^dagger]`.
fn chi_trace(
    rho: &CMatrix4,
    u_mat: &CMatrix4,
    from: &Spectrum,
    to: &Spectrum,
    u: f64,
) -> Complex64 {
    let half = from.expm_i(-0.5 * u);
    (to.expm_i(u) * u_mat * half * rho * half * u_mat.adjoint()).trace()
}

const GRID: usize = 1 << 14;
/// Half-width of the sampled window in units of the Gaussian width.
const WINDOW_SIGMAS: f64 = 6.5;

/// Weight of `chi` at each requested work value, recovered from samples on a
/// uniform grid through a Gaussian-windowed discrete Fourier transform.
fn fourier_weights(chi: &[Complex64], du: f64, sigma: f64, at: &[f64]) -> Vec<f64> {
    let half = (GRID / 2) as f64;
    let window: Vec<f64> = (0..GRID)
        .map(|k| {
            let u = (k as f64 - half) * du;
            (-0.5 * (u / sigma).powi(2)).exp()
        })
        .collect();
    let norm: f64 = window.iter().sum();
    at.iter()
        .map(|&w| {
            let s: Complex64 = (0..GRID)
                .map(|k| {
                    let u = (k as f64 - half) * du;
                    chi[k] * window[k] * Complex64::from_polar(1.0, -u * w)
                })
                .sum();
            s.re / norm
        })
        .collect()
}

/// Worst leakage a Gaussian of width `sigma` lets neighbouring points
/// contribute to any point of `pts`.
fn leakage(pts: &[(f64, f64)], sigma: f64) -> f64 {
    pts.iter()
        .map(|&(w, _)| {
            pts.iter()
                .filter(|&&(v, _)| v != w)
                .map(|&(v, q)| q.abs() * (-0.5 * (sigma * (v - w)).powi(2)).exp())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut accepted = 0;
    let mut tried = 0;
    let mut worst = 0.0f64;
    while accepted < 10 {
        tried += 1;
        if tried > 5000 {
            return Err(format!(
                "only {accepted} resolvable configurations in {tried} draws"
            ));
        }
        let p = random_params(&mut rng);
        let r = run_cycle(&p, TOL).map_err(|e| e.to_string())?;
        let s = work_statistics(&r).map_err(|e| e.to_string())?;
        let (s1, s2) = spectra(&p);
        // every stroke work lies within the spectral width of both Hamiltonians
        let reach = (s1.values[3] - s1.values[0]).max(s2.values[3] - s2.values[0]);
        let bound = 2.0 * reach;
        let du = 2.0 * std::f64::consts::PI / (2.5 * bound);
        let sigma = GRID as f64 * du / (2.0 * WINDOW_SIGMAS);
        let full = points(&s.full);
        if leakage(&points(&s.ab), sigma)
            .max(leakage(&points(&s.cd), sigma))
            .max(leakage(&full, sigma))
            > 1e-8
        {
            continue;
        }
        let half = (GRID / 2) as f64;
        let samples: Vec<(Complex64, Complex64)> = (0..GRID)
            .map(|k| {
                let u = (k as f64 - half) * du;
                (
                    chi_trace(r.rho_a.entries(), &r.expansion.matrix, &s1, &s2, u),
                    chi_trace(r.rho_c.entries(), &r.compression.matrix, &s2, &s1, u),
                )
            })
            .collect();
        let chi_ab: Vec<Complex64> = samples.iter().map(|x| x.0).collect();
        let chi_cd: Vec<Complex64> = samples.iter().map(|x| x.1).collect();
        let chi_full: Vec<Complex64> = samples.iter().map(|x| x.0 * x.1).collect();
        for (chi, d) in [(&chi_ab, &s.ab), (&chi_cd, &s.cd), (&chi_full, &s.full)] {
            let pts = points(d);
            let at: Vec<f64> = pts.iter().map(|x| x.0).collect();
            let got = fourier_weights(chi, du, sigma, &at);
            for ((w, listed), q) in pts.iter().zip(got) {
                let gap = (listed - q).abs();
                if gap > worst {
                    worst = gap;
                }
                if gap > 1e-6 {
                    return Err(format!(
                        "{} stage {}: w={w:.6} term list {listed:.3e} vs Fourier {q:.3e}",
                        fmt_params(&p),
                        d.stage
                    ));
                }
            }
        }
        accepted += 1;
    }
    check(
        worst <= 1e-6,
        format!("10 configurations ({tried} drawn), max |p_list - p_Fourier| = {worst:.2e} over AB, CD and cycle"),
    )
}

fn criterion_10(shared: &Shared) -> Outcome {
    // isotropic ramps commute with themselves, so the propagator is the
    // exponential of the time-averaged Hamiltonian
    let mut closed = 0.0f64;
    let mut unitarity = shared.unitarity;
    for (j, b1, b2, tau) in [
        (1.0, 1.0, 2.0, 0.3),
        (0.4, 2.5, 0.2, 7.0),
        (1.7, 0.1, 3.0, 20.0),
    ] {
        let p = EngineParams::new(j, 0.0, b1, b2, 1.0, tau, EngineMode::MeasurementBased).unwrap();
        let mean = Spectrum::of(&hamiltonian(j, 0.0, 0.5 * (b1 + b2)));
        let exact = mean.expm_i(-tau);
        for scheme in [Scheme::Magnus4, Scheme::ExponentialMidpoint] {
            let r = run_cycle_with(&p, scheme, TOL).map_err(|e| e.to_string())?;
            for u in [&r.expansion.matrix, &r.compression.matrix] {
                closed = closed.max(max_abs(&(u - exact)));
                unitarity = unitarity.max(unitarity_defect(u));
            }
        }
    }
    // empirical order on an anisotropic ramp against a fine reference
    let p = reference_params(1.0, 2.0);
    let protocol = RampProtocol::expansion(&p);
    let mut orders = Vec::new();
    for (scheme, base) in [(Scheme::ExponentialMidpoint, 64), (Scheme::Magnus4, 16)] {
        let reference = propagate_fixed(&p, &protocol, Scheme::Magnus4, 1 << 14);
        let err = |n| max_abs(&(propagate_fixed(&p, &protocol, scheme, n) - reference));
        let (e1, e2) = (err(base), err(2 * base));
        orders.push((scheme, (e1 / e2).log2()));
    }
    let min_order = orders.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
    check(
        closed <= 1e-8 && unitarity <= 1e-9 && min_order >= 2.0,
        format!(
            "closed-form gap {closed:.2e}, max unitarity defect {unitarity:.2e}, measured orders {}",
            orders
                .iter()
                .map(|(s, o)| format!("{s} {o:.2}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn max_abs(m: &CMatrix4) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn criterion_11(shared: &Shared) -> Outcome {
    let worst = shared
        .draws
        .iter()
        .map(|r| (r.w1 + r.q_in + r.w2 + r.q_l).abs())
        .fold(0.0, f64::max);
    check(
        worst <= 1e-9 && shared.draws.len() == 50,
        format!(
            "max |W1 + Q_in + W2 + Q_L| over {} runs = {worst:.2e}",
            shared.draws.len()
        ),
    )
}

fn main() {
    let mut shared = Shared {
        draws: Vec::new(),
        unitarity: 0.0,
    };
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "normalization", criterion_1(&mut shared)),
        (2, "negative quasi-probability", criterion_2()),
        (3, "isotropic null", criterion_3()),
        (4, "TPM equivalence", criterion_4()),
        (5, "moment consistency", criterion_5(&mut shared)),
        (6, "oscillation signature", criterion_6()),
        (7, "coherence structure", criterion_7()),
        (8, "two-bath null", criterion_8()),
        (9, "Fourier-grid oracle", criterion_9()),
        (10, "integrator verification", criterion_10(&shared)),
        (11, "first-law closure", criterion_11(&shared)),
    ];

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n:>2} ({name}): {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
