//! Physical values of discrimination-type SDPs.
//!
//! The primal problem is
//!
//! ```text
//! maximize  sum_a Tr(M_a R_a)   subject to  sum_a M_a = 1,  M_a >= 0
//! ```
//!
//! with `R_a = sum_{x:(x,a) in sigma} p(x) rho_x`. Its dual,
//!
//! ```text
//! minimize  Tr Y   subject to  Y >= R_a  for every a,
//! ```
//!
//! has a single `d x d` variable, so we follow the dual log-barrier central
//! path `t Tr Y - sum_a log det(Y - R_a)` with damped Newton steps. On the
//! path `M_a = (Y - R_a)^{-1} / t` is a POVM up to Newton residual; a
//! congruence by `(sum_a M_a)^{-1/2}` makes it exactly complete before the
//! primal value is reported. The certified gap is `Tr Y - sum_a Tr(M_a R_a)`.
//!
//! Complex inputs are solved through the real embedding
//! `A + iB -> [[A, -B], [B, A]]`, which doubles every trace.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{AnswerSpace, Ensemble};
use crate::matchings::Family;
use crate::numerics::{self, HermitianOperator};

pub const MAX_DIM: usize = 64;
pub const MAX_ANSWERS: usize = 256;

/// Weighted targets `R_a`, one per joint answer.
#[derive(Debug, Clone)]
pub struct DiscriminationProblem {
    dim: usize,
    targets: Vec<HermitianOperator>,
    structure: DualStructure,
}

/// Subspace searched for the dual variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualStructure {
    /// Every symmetric (Hermitian) matrix.
    #[default]
    Full,
    /// Diagonal matrices only. Optimal when the target set is invariant
    /// under a group of diagonal sign unitaries whose commutant is the
    /// diagonal algebra (bit-flip symmetry in a character basis). The gap is
    /// certified either way; if the restricted path does not certify, the
    /// full space is searched.
    Diagonal,
}

impl DiscriminationProblem {
    pub fn new(targets: Vec<HermitianOperator>) -> Result<Self> {
        let dim = targets.first().ok_or(Error::EmptyFamily)?.dim();
        if dim > MAX_DIM {
            return Err(Error::Unsupported {
                name: "carrier dimension",
                value: dim,
                min: 1,
                max: MAX_DIM,
            });
        }
        if targets.len() > MAX_ANSWERS {
            return Err(Error::Unsupported {
                name: "answer count",
                value: targets.len(),
                min: 1,
                max: MAX_ANSWERS,
            });
        }
        for r in &targets {
            if r.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.dim(),
                });
            }
            let lo = numerics::min_eigenvalue(r)?;
            if lo < -1e-10 {
                return Err(Error::NotPsd(lo));
            }
        }
        Ok(Self {
            dim,
            targets,
            structure: DualStructure::Full,
        })
    }

    /// Targets of the joint relation of `family` over `ensemble`.
    pub fn from_ensemble(ensemble: &Ensemble, family: &Family) -> Result<Self> {
        let tr = ensemble.average_state().trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::OutOfRange {
                name: "ensemble trace",
                value: tr,
            });
        }
        let space = AnswerSpace::new(family);
        if space.count() > MAX_ANSWERS as u128 {
            return Err(Error::AnswerSpaceOverflow {
                count: space.count(),
                limit: MAX_ANSWERS as u128,
            });
        }
        Self::new(space.iter().map(|a| ensemble.weighted_target(&a)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn targets(&self) -> &[HermitianOperator] {
        &self.targets
    }

    pub fn structure(&self) -> DualStructure {
        self.structure
    }

    pub fn with_structure(self, structure: DualStructure) -> Self {
        Self { structure, ..self }
    }

}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Target for the certified duality gap.
    pub tol: f64,
    /// Cap on Newton iterations.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub povm: Vec<HermitianOperator>,
    pub dual: HermitianOperator,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
}

impl SdpSolution {
    /// `key=value` report lines.
    pub fn report(&self, problem: &DiscriminationProblem) -> Result<String> {
        let margin = dual_feasibility_margin(self, problem)?;
        let residual = completeness_residual(&self.povm)?;
        Ok(format!(
            "primal_value={:.12}\ndual_value={:.12}\ngap={:.3e}\niterations={}\ndual_margin={:.3e}\npovm_residual={:.3e}\n",
            self.primal_value, self.dual_value, self.gap, self.iterations, margin, residual
        ))
    }
}

/// `min_a lambda_min(Y - R_a)`; nonnegative for a feasible dual.
pub fn dual_feasibility_margin(solution: &SdpSolution, problem: &DiscriminationProblem) -> Result<f64> {
    problem
        .targets
        .iter()
        .map(|r| numerics::min_eigenvalue(&solution.dual.sub(r)))
        .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
}

/// `|| sum_a M_a - 1 ||`
pub fn completeness_residual(povm: &[HermitianOperator]) -> Result<f64> {
    let d = povm.first().map_or(0, |m| m.dim());
    let sum = povm.iter().fold(HermitianOperator::zeros(d), |acc, m| acc.add(m));
    numerics::spectral_norm(&sum.sub(&HermitianOperator::identity(d)))
}

/// Solves for the physical value with a certified duality gap.
pub fn physical_value(problem: &DiscriminationProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    let complex = problem.targets.iter().any(|r| r.max_imag() > 1e-14);
    let real_targets: Vec<DMatrix<f64>> = problem
        .targets
        .iter()
        .map(|r| if complex { embed(r.matrix()) } else { r.matrix().map(|z| z.re) })
        .collect();
    let trace_scale = if complex { 2.0 } else { 1.0 };
    let raw = match (problem.structure, complex) {
        (DualStructure::Diagonal, false) => match solve_real(&real_targets, opts, DualSpace::Diagonal(problem.dim)) {
            Ok(r) if r.converged => r,
            _ => solve_real(&real_targets, opts, DualSpace::Full(SymBasis::new(problem.dim)))?,
        },
        _ => solve_real(&real_targets, opts, DualSpace::Full(SymBasis::new(real_targets[0].nrows())))?,
    };
    let lift = |m: &DMatrix<f64>| {
        if complex {
            unembed(m)
        } else {
            HermitianOperator::from_real(m.clone()).expect("finite")
        }
    };
    let povm: Vec<HermitianOperator> = raw.povm.iter().map(lift).collect();
    let dual = lift(&raw.dual);
    let primal_value = povm
        .iter()
        .zip(&problem.targets)
        .map(|(m, r)| (m.matrix() * r.matrix()).trace().re)
        .sum::<f64>();
    let dual_value = dual.trace();
    let solution = SdpSolution {
        povm,
        dual,
        primal_value,
        dual_value,
        gap: dual_value - primal_value,
        iterations: raw.iterations,
    };
    debug_assert!((raw.dual.trace() / trace_scale - dual_value).abs() < 1e-8);
    if !raw.converged || solution.gap > opts.tol {
        return Err(Error::NotConverged {
            best_gap: solution.gap.max(raw.gap / trace_scale),
            iterations: raw.iterations,
        });
    }
    Ok(solution)
}

fn embed(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let d = m.nrows();
    DMatrix::from_fn(2 * d, 2 * d, |r, c| {
        let z = m[(r % d, c % d)];
        match (r < d, c < d) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Inverse of [`embed`], averaging the two copies of each block.
fn unembed(m: &DMatrix<f64>) -> HermitianOperator {
    let d = m.nrows() / 2;
    let z = DMatrix::from_fn(d, d, |r, c| {
        let re = 0.5 * (m[(r, c)] + m[(r + d, c + d)]);
        let im = 0.5 * (m[(r + d, c)] - m[(r, c + d)]);
        Complex64::new(re, im)
    });
    HermitianOperator::new(z).expect("finite")
}

struct RealSolution {
    povm: Vec<DMatrix<f64>>,
    dual: DMatrix<f64>,
    gap: f64,
    iterations: usize,
    converged: bool,
}

/// Coordinates of symmetric matrices in the orthonormal basis
/// `B_(i,j) = kappa (E_ij + E_ji)`, `kappa = 1/2` on the diagonal and
/// `1/sqrt 2` off it.
struct SymBasis {
    d: usize,
    pairs: Vec<(usize, usize)>,
    kappa: Vec<f64>,
}

impl SymBasis {
    fn new(d: usize) -> Self {
        let mut pairs = Vec::with_capacity(d * (d + 1) / 2);
        let mut kappa = Vec::with_capacity(pairs.capacity());
        for i in 0..d {
            for j in i..d {
                pairs.push((i, j));
                kappa.push(if i == j { 0.5 } else { std::f64::consts::FRAC_1_SQRT_2 });
            }
        }
        Self { d, pairs, kappa }
    }

    fn len(&self) -> usize {
        self.pairs.len()
    }

    /// `g_p = Tr(B_p G)`
    fn coords(&self, g: &DMatrix<f64>) -> Vec<f64> {
        self.pairs
            .iter()
            .zip(&self.kappa)
            .map(|(&(i, j), &k)| 2.0 * k * g[(i, j)])
            .collect()
    }

    fn matrix(&self, v: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.d, self.d);
        for ((&(i, j), &k), &x) in self.pairs.iter().zip(&self.kappa).zip(v) {
            if i == j {
                m[(i, i)] = x;
            } else {
                m[(i, j)] = k * x;
                m[(j, i)] = k * x;
            }
        }
        m
    }

    /// `H_pq = sum_a Tr(B_p W_a B_q W_a)`
    fn hessian(&self, ws: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.len();
        let mut data = vec![0.0; m * m];
        data.par_chunks_mut(m).enumerate().for_each(|(p, row)| {
            let (i, j) = self.pairs[p];
            let kp = self.kappa[p];
            for w in ws {
                for (q, cell) in row.iter_mut().enumerate().skip(p) {
                    let (k, l) = self.pairs[q];
                    *cell += 2.0 * kp * self.kappa[q] * (w[(i, k)] * w[(j, l)] + w[(i, l)] * w[(j, k)]);
                }
            }
        });
        for p in 0..m {
            for q in 0..p {
                data[p * m + q] = data[q * m + p];
            }
        }
        DMatrix::from_row_slice(m, m, &data)
    }
}

enum DualSpace {
    Full(SymBasis),
    /// Orthonormal basis `E_pp` of the diagonal matrices.
    Diagonal(usize),
}

impl DualSpace {
    fn coords(&self, g: &DMatrix<f64>) -> Vec<f64> {
        match self {
            DualSpace::Full(b) => b.coords(g),
            DualSpace::Diagonal(_) => g.diagonal().iter().copied().collect(),
        }
    }

    fn matrix(&self, v: &[f64]) -> DMatrix<f64> {
        match self {
            DualSpace::Full(b) => b.matrix(v),
            DualSpace::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&v[..*d])),
        }
    }

    /// For the diagonal basis `Tr(E_pp W E_qq W) = W_pq^2`.
    fn hessian(&self, ws: &[DMatrix<f64>]) -> DMatrix<f64> {
        match self {
            DualSpace::Full(b) => b.hessian(ws),
            DualSpace::Diagonal(d) => {
                let mut h = DMatrix::zeros(*d, *d);
                for w in ws {
                    h += w.component_mul(w);
                }
                h
            }
        }
    }
}

/// Per-iterate barrier data.
struct Barrier {
    value: f64,
    inverses: Vec<DMatrix<f64>>,
}

fn barrier(y: &DMatrix<f64>, targets: &[DMatrix<f64>], t: f64) -> Option<Barrier> {
    let mut value = t * y.trace();
    let mut inverses = Vec::with_capacity(targets.len());
    for r in targets {
        let chol = Cholesky::new(y - r)?;
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        value -= logdet;
        inverses.push(chol.inverse());
    }
    Some(Barrier { value, inverses })
}

fn barrier_value(y: &DMatrix<f64>, targets: &[DMatrix<f64>], t: f64) -> Option<f64> {
    let mut value = t * y.trace();
    for r in targets {
        let chol = Cholesky::new(y - r)?;
        value -= chol.l_dirty().diagonal().iter().map(|v| 2.0 * v.ln()).sum::<f64>();
    }
    value.is_finite().then_some(value)
}

fn solve_linear(h: DMatrix<f64>, rhs: &[f64]) -> Option<Vec<f64>> {
    let b = nalgebra::DVector::from_column_slice(rhs);
    let scale = h.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut ridge = 0.0;
    for _ in 0..6 {
        let mut hh = h.clone();
        if ridge > 0.0 {
            for p in 0..hh.nrows() {
                hh[(p, p)] += ridge;
            }
        }
        if let Some(ch) = Cholesky::<f64, Dyn>::new(hh) {
            let x = ch.solve(&b);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x.iter().copied().collect());
            }
        }
        ridge = if ridge == 0.0 { scale * 1e-14 } else { ridge * 100.0 };
    }
    None
}

/// Eigenvalues of `L^-1 dY L^-T` over every block `Y - R_a = L L^T`. Along
/// the line the log-det part of the barrier is `-sum log(1 + s mu)`.
fn line_spectrum(y: &DMatrix<f64>, dy: &DMatrix<f64>, targets: &[DMatrix<f64>]) -> Option<Vec<f64>> {
    let mut mus = Vec::with_capacity(targets.len() * y.nrows());
    for r in targets {
        let l = Cholesky::new(y - r)?.unpack();
        let half = l.solve_lower_triangular(dy)?;
        let scaled = l.solve_lower_triangular(&half.transpose())?;
        mus.extend(SymmetricEigen::new((&scaled + scaled.transpose()) * 0.5).eigenvalues.iter());
    }
    Some(mus)
}

/// Minimiser of `phi(s) = slope s - sum log(1 + s mu)` over the feasible
/// interval; `phi` is convex and `phi'(0) < 0` along a descent direction.
fn exact_step(slope: f64, mus: &[f64]) -> f64 {
    let dphi = |s: f64| slope - mus.iter().map(|m| m / (1.0 + s * m)).sum::<f64>();
    let limit = mus
        .iter()
        .filter(|m| **m < 0.0)
        .map(|m| -1.0 / m)
        .fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, limit);
    if !hi.is_finite() {
        hi = 1.0;
        while dphi(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return hi;
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dphi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi {
            break;
        }
    }
    lo
}

/// Restores completeness by congruence and evaluates the certified pair.
fn certify(
    y: &DMatrix<f64>,
    inverses: &[DMatrix<f64>],
    targets: &[DMatrix<f64>],
    t: f64,
) -> Option<(Vec<DMatrix<f64>>, DMatrix<f64>, f64)> {
    let d = y.nrows();
    let raw: Vec<DMatrix<f64>> = inverses.iter().map(|w| w / t).collect();
    let z = raw.iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m);
    let eig = SymmetricEigen::new(z);
    if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
        return None;
    }
    let isqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.powf(-0.5)))
        * eig.eigenvectors.transpose();
    let povm: Vec<DMatrix<f64>> = raw
        .iter()
        .map(|m| {
            let c = &isqrt * m * &isqrt;
            (&c + c.transpose()) * 0.5
        })
        .collect();
    let primal: f64 = povm.iter().zip(targets).map(|(m, r)| (m * r).trace()).sum();
    // shift Y onto the feasible cone if round-off left it marginally outside
    let margin = targets
        .iter()
        .map(|r| SymmetricEigen::new(y - r).eigenvalues.min())
        .fold(f64::INFINITY, f64::min);
    let mut dual = y.clone();
    if margin < 0.0 {
        for i in 0..d {
            dual[(i, i)] -= margin;
        }
    }
    let gap = dual.trace() - primal;
    Some((povm, dual, gap))
}

fn solve_real(targets: &[DMatrix<f64>], opts: &SolverOptions, basis: DualSpace) -> Result<RealSolution> {
    let d = targets[0].nrows();
    let count = targets.len();
    let top = targets
        .iter()
        .map(|r| SymmetricEigen::new(r.clone()).eigenvalues.max())
        .fold(0.0f64, f64::max);
    if top <= 0.0 && targets.iter().all(|r| r.iter().all(|v| *v == 0.0)) {
        let mut povm = vec![DMatrix::zeros(d, d); count];
        povm[0] = DMatrix::identity(d, d);
        return Ok(RealSolution {
            povm,
            dual: DMatrix::zeros(d, d),
            gap: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let mut y = DMatrix::<f64>::identity(d, d) * (top + 1.0);
    let weight = (count * d) as f64;
    let mut t = weight / y.trace();
    // long steps leave the iterate far from the new centre, which costs
    // hundreds of Newton steps on problems with many blocks
    const MU: f64 = 8.0;
    // the certificate is evaluated exactly, so the iterate only needs to be
    // roughly centred; tighter targets stall on roundoff at large t
    const NEWTON_EPS: f64 = 1e-7;
    const MAX_CENTERING: usize = 400;
    let mut iterations = 0;
    let mut best: Option<(Vec<DMatrix<f64>>, DMatrix<f64>, f64)> = None;

    while iterations < opts.max_iter {
        // centering
        let mut current = barrier(&y, targets, t).ok_or(Error::NotPsd(0.0))?;
        for _ in 0..MAX_CENTERING {
            if iterations >= opts.max_iter {
                break;
            }
            let grad_m = DMatrix::<f64>::identity(d, d) * t
                - current.inverses.iter().fold(DMatrix::zeros(d, d), |acc, w| acc + w);
            let g = basis.coords(&grad_m);
            let h = basis.hessian(&current.inverses);
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(step) = solve_linear(h, &neg_g) else {
                break;
            };
            let decrement: f64 = -g.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>();
            iterations += 1;
            if decrement.is_nan() || decrement / 2.0 <= NEWTON_EPS {
                break;
            }
            let dy = basis.matrix(&step);
            // exact line search: a unit Newton step can be orders of
            // magnitude short when a block sits close to its boundary
            let mut s = match line_spectrum(&y, &dy, targets) {
                Some(mus) => exact_step(t * dy.trace(), &mus),
                None => 1.0,
            };
            let mut accepted = None;
            let mut halvings = 0;
            while s > 1e-12 {
                let cand = &y + &dy * s;
                if let Some(v) = barrier_value(&cand, targets, t) {
                    if v <= current.value - 0.25 * s * decrement {
                        accepted = Some(cand);
                        break;
                    }
                }
                s *= 0.5;
                halvings += 1;
            }
            let Some(next) = accepted else {
                break;
            };
            match barrier(&next, targets, t) {
                Some(b) => {
                    y = next;
                    current = b;
                }
                None => break,
            }
            // the line search no longer trusts the model: roundoff, not
            // distance from the path, is what limits progress now
            if halvings > 10 {
                break;
            }
        }

        if let Some(cert) = certify(&y, &current.inverses, targets, t) {
            let better = best.as_ref().is_none_or(|b| cert.2 < b.2);
            if better {
                best = Some(cert);
            }
        }
        if let Some(b) = &best {
            if b.2 <= opts.tol * 0.5 {
                break;
            }
        }
        if weight / t < opts.tol * 1e-3 {
            // the path cannot improve the certificate any further
            break;
        }
        t *= MU;
    }

    let (povm, dual, gap) = best.ok_or(Error::NotConverged {
        best_gap: f64::INFINITY,
        iterations,
    })?;
    Ok(RealSolution {
        converged: gap <= opts.tol,
        povm,
        dual,
        gap,
        iterations,
    })
}

/// Selective and physical value side by side.
#[derive(Debug, Clone)]
pub struct ValueComparison {
    pub sv: f64,
    pub pv: f64,
    pub solution: SdpSolution,
    /// Whether the two agree to `1e-4`.
    pub equal: bool,
}

/// Computes both values and checks `pv <= sv + 1e-6`.
pub fn selective_vs_physical(ensemble: &Ensemble, family: &Family, opts: &SolverOptions) -> Result<ValueComparison> {
    let sv = crate::game::ensemble_selective_value(ensemble, family)?;
    let problem = DiscriminationProblem::from_ensemble(ensemble, family)?;
    let solution = physical_value(&problem, opts)?;
    let pv = solution.primal_value;
    if pv > sv + 1e-6 {
        return Err(Error::ValueOrdering { sv, pv });
    }
    Ok(ValueComparison {
        sv,
        pv,
        equal: (sv - pv).abs() <= 1e-4,
        solution,
    })
}
