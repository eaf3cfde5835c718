//! Coherent-state version of the hidden-matching game.
//!
//! Alice sends `|alpha, x> = ⊗_i |(-1)^{x_i} alpha / sqrt(n)>`. Bob interferes
//! the pulses paired by his matching on a balanced beam splitter; with loss
//! `eta` and interference quality `nu` each slot leaves the correct detector
//! with amplitude `sqrt(2 eta nu / n) alpha` and the wrong one with
//! `sqrt(2 eta (1 - nu) / n) alpha`.
//!
//! The cheating probability is the physical value of the joint game over the
//! signal states, computed in the span of the `2^n` signals.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{BitString, Ensemble};
use crate::matchings::{is_independent, Family};
use crate::numerics::{ComplexVector, HermitianOperator};
use crate::sdp::{self, DiscriminationProblem, DualStructure, SdpSolution, SolverOptions};

/// Largest mode count for which the cheating SDP is set up (`2^6 = 64`).
pub const MAX_CHEATING_N: usize = 6;
/// Relative eigenvalue cutoff used when embedding the signal Gram matrix.
pub const GRAM_TOL: f64 = 1e-12;
pub const MAX_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentGameParams {
    family: Family,
    alpha: f64,
    eta: f64,
    nu: f64,
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange { name, value });
    }
    Ok(())
}

impl CoherentGameParams {
    pub fn new(family: Family, alpha: f64, eta: f64, nu: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::OutOfRange { name: "alpha", value: alpha });
        }
        check_unit("eta", eta)?;
        check_unit("nu", nu)?;
        let ind = is_independent(family.matchings())?;
        if !ind.independent {
            let w = ind.witness.map(|w| w.to_string()).unwrap_or_default();
            return Err(Error::DependentFamily(w));
        }
        Ok(Self { family, alpha, eta, nu })
    }

    /// Lossless, perfectly interfering setup.
    pub fn ideal(family: Family, alpha: f64) -> Result<Self> {
        Self::new(family, alpha, 1.0, 1.0)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::OutOfRange { name: "alpha", value: alpha });
        }
        Ok(Self { alpha, ..self.clone() })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.family.n()
    }

    pub fn k(&self) -> usize {
        self.family.k()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

/// Per-mode amplitudes `(-1)^{x_i} alpha / sqrt(n)`.
pub fn signal_amplitudes(x: &BitString, params: &CoherentGameParams) -> Result<Vec<f64>> {
    let n = params.n();
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    let a = params.alpha / (n as f64).sqrt();
    Ok((1..=n).map(|i| if x.bit(i) == 0 { a } else { -a }).collect())
}

/// `<alpha, x | alpha, y> = exp(-2 alpha^2 d_H(x, y) / n)`.
pub fn overlap(x: &BitString, y: &BitString, alpha: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let n = x.len() as f64;
    Ok((-2.0 * alpha * alpha * x.hamming(y) as f64 / n).exp())
}

/// Gram matrix of the `2^n` signal states, indexed by packed strings.
pub fn gram_matrix(n: usize, alpha: f64) -> Result<HermitianOperator> {
    if n == 0 || n > MAX_CHEATING_N {
        return Err(Error::Unsupported {
            name: "n",
            value: n,
            min: 2,
            max: MAX_CHEATING_N,
        });
    }
    let per_flip = (-2.0 * alpha * alpha / n as f64).exp();
    let d = 1usize << n;
    let g = nalgebra::DMatrix::from_fn(d, d, |x, y| per_flip.powi((x ^ y).count_ones() as i32));
    HermitianOperator::from_real(g)
}

/// Gram embedding for a kernel that depends only on `x xor y`.
///
/// Such a matrix is diagonalized by the characters `(-1)^{w.x}`, with
/// eigenvalues the Walsh-Hadamard transform of its first row, so
/// `v_x[w] = sqrt(lambda_w / 2^n) (-1)^{w.x}`. Unlike a generic eigensolver
/// this keeps the bit-flip symmetry visible: flipping `x` by `s` multiplies
/// coordinate `w` by `(-1)^{w.s}`. Eigenvalues at or below `tol * lambda_max`
/// are dropped.
pub fn character_embed(g: &HermitianOperator, tol: f64) -> Result<Vec<ComplexVector>> {
    let d = g.dim();
    if !d.is_power_of_two() {
        return Err(Error::DimensionMismatch {
            expected: d.next_power_of_two(),
            got: d,
        });
    }
    let m = g.matrix();
    let mut dev = 0.0f64;
    for x in 0..d {
        for y in 0..d {
            dev = dev.max((m[(x, y)] - m[(0, x ^ y)]).norm());
        }
    }
    if dev > 1e-12 {
        return Err(Error::NotShiftInvariant(dev));
    }
    // in-place fast Walsh-Hadamard transform of the first row
    let mut lam: Vec<f64> = (0..d).map(|z| m[(0, z)].re).collect();
    let mut h = 1;
    while h < d {
        for block in (0..d).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (lam[i], lam[i + h]);
                lam[i] = a + b;
                lam[i + h] = a - b;
            }
        }
        h *= 2;
    }
    let top = lam.iter().fold(0.0f64, |a, &v| a.max(v));
    if let Some(&lo) = lam.iter().min_by(|a, b| a.total_cmp(b)) {
        if lo < -1e-12 * top.max(1.0) {
            return Err(Error::NotPsd(lo));
        }
    }
    let kept: Vec<usize> = (0..d).filter(|&w| lam[w] > tol * top && lam[w] > 0.0).collect();
    Ok((0..d)
        .map(|x| {
            ComplexVector::from_iterator(
                kept.len(),
                kept.iter().map(|&w| {
                    let sign = if (w & x).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    num_complex::Complex64::new(sign * (lam[w] / d as f64).sqrt(), 0.0)
                }),
            )
        })
        .collect())
}

/// Signal states as vectors in the span of the signals, uniform prior.
pub fn signal_ensemble(params: &CoherentGameParams) -> Result<Ensemble> {
    let n = params.n();
    let g = gram_matrix(n, params.alpha)?;
    let states = character_embed(&g, GRAM_TOL)?;
    let count = states.len();
    Ensemble::new(n, states, vec![1.0 / count as f64; count])
}

/// Targets of the joint (all-k) game; loss and visibility do not enter.
///
/// Flipping the input by `s` maps the target set onto itself, so a diagonal
/// dual variable suffices in the character basis.
pub fn cheating_problem(params: &CoherentGameParams) -> Result<DiscriminationProblem> {
    Ok(DiscriminationProblem::from_ensemble(&signal_ensemble(params)?, params.family())?
        .with_structure(DualStructure::Diagonal))
}

pub fn cheating_probability(params: &CoherentGameParams, opts: &SolverOptions) -> Result<SdpSolution> {
    sdp::physical_value(&cheating_problem(params)?, opts)
}

/// Output of the beam splitter for one matched pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterOutput {
    /// Detector that fires when interference is perfect: `x_i xor x_j`.
    pub correct_detector: u8,
    pub amp_correct: f64,
    pub amp_wrong: f64,
}

pub fn beam_splitter_pair(xi: u8, xj: u8, params: &CoherentGameParams) -> BeamSplitterOutput {
    let base = 2.0 * params.eta / params.n() as f64;
    BeamSplitterOutput {
        correct_detector: (xi ^ xj) & 1,
        amp_correct: (base * params.nu).sqrt() * params.alpha,
        amp_wrong: (base * (1.0 - params.nu)).sqrt() * params.alpha,
    }
}

/// `1 - exp(-alpha^2) / 2`
pub fn ideal_winning(alpha: f64) -> f64 {
    1.0 - 0.5 * (-alpha * alpha).exp()
}

/// Reading of the single-slot error probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `p_w (1 - p_c) + p_w p_c / 2`, as printed.
    PaperExact,
    /// The same quantity divided by the probability that the slot clicked.
    Conditional,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::PaperExact, Variant::Conditional];

    pub fn name(self) -> &'static str {
        match self {
            Variant::PaperExact => "paper",
            Variant::Conditional => "conditional",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "paper_exact" => Ok(Variant::PaperExact),
            "conditional" => Ok(Variant::Conditional),
            _ => Err(Error::Parse {
                line: 0,
                msg: format!("unknown variant {s:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClickModel {
    /// Click in the correct detector of one slot.
    pub p_c: f64,
    /// Click in the wrong detector of one slot.
    pub p_w: f64,
    /// No click anywhere in the run.
    pub p_0: f64,
    /// Wrong answer from a clicked slot.
    pub p_1: f64,
    pub variant: Variant,
}

pub fn click_model(params: &CoherentGameParams, variant: Variant) -> ClickModel {
    let n = params.n() as f64;
    let a2 = params.alpha * params.alpha;
    let p_c = -(-2.0 * params.eta * params.nu * a2 / n).exp_m1();
    let p_w = -(-2.0 * params.eta * (1.0 - params.nu) * a2 / n).exp_m1();
    let p_0 = (-params.eta * a2).exp();
    let wrong = p_w * (1.0 - p_c) + 0.5 * p_w * p_c;
    let p_1 = match variant {
        Variant::PaperExact => wrong,
        Variant::Conditional => {
            let clicked = p_c + p_w - p_c * p_w;
            if clicked > 0.0 {
                wrong / clicked
            } else {
                0.0
            }
        }
    };
    ClickModel { p_c, p_w, p_0, p_1, variant }
}

/// `1 - p_0 / 2 - (1 - p_0) p_1`
pub fn imperfect_winning(params: &CoherentGameParams, variant: Variant) -> f64 {
    let m = click_model(params, variant);
    1.0 - 0.5 * m.p_0 - (1.0 - m.p_0) * m.p_1
}

/// Evenly spaced `alpha` values; a single step yields just `min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGrid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AlphaGrid {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min < 0.0 || min > max {
            return Err(Error::OutOfRange { name: "alpha grid", value: min });
        }
        if steps == 0 || steps > MAX_GRID_POINTS {
            return Err(Error::Unsupported {
                name: "steps",
                value: steps,
                min: 1,
                max: MAX_GRID_POINTS,
            });
        }
        Ok(Self { min, max, steps })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.max } else { self.min + h * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub alpha: f64,
    pub winning_paper: f64,
    pub winning_conditional: f64,
    /// `None` when not requested or when the solver failed at this point.
    pub cheating: Option<f64>,
    pub threshold: Option<f64>,
}

/// Winning probabilities along `grid` at fixed `eta`, `nu`; cheating
/// probabilities too when `with_cheating` and `n <= 6`.
pub fn curve(
    family: &Family,
    grid: &AlphaGrid,
    eta: f64,
    nu: f64,
    with_cheating: bool,
    opts: &SolverOptions,
) -> Result<Vec<CurveRow>> {
    let base = CoherentGameParams::new(family.clone(), grid.min, eta, nu)?;
    let cheat = with_cheating && family.n() <= MAX_CHEATING_N;
    grid.points()
        .into_par_iter()
        .map(|alpha| {
            let p = base.with_alpha(alpha)?;
            let cheating = if cheat {
                cheating_probability(&p, opts).ok().map(|s| s.primal_value)
            } else {
                None
            };
            Ok(CurveRow {
                alpha,
                winning_paper: imperfect_winning(&p, Variant::PaperExact),
                winning_conditional: imperfect_winning(&p, Variant::Conditional),
                cheating,
                threshold: cheating.map(|e| 0.5 * (1.0 + e)),
            })
        })
        .collect()
}

pub const CURVE_HEADER: &str = "alpha,winning_paper,winning_conditional,cheating,threshold";

/// Shortest decimal that round-trips the value rounded to 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if !v.is_finite() {
        return "NA".to_string();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), format_sig9)
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_sig9(r.alpha),
            format_sig9(r.winning_paper),
            format_sig9(r.winning_conditional),
            opt_cell(r.cheating),
            opt_cell(r.threshold)
        ));
    }
    out
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CURVE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing curve header".into(),
            })
        }
    }
    let cell = |line: usize, s: &str| -> Result<Option<f64>> {
        if s == "NA" {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| Error::Parse {
            line,
            msg: format!("bad number {s:?}"),
        })
    };
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let line = i + 1;
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected 5 fields, got {}", f.len()),
                });
            }
            let req = |s: &str| {
                cell(line, s)?.ok_or(Error::Parse {
                    line,
                    msg: "NA in a required column".into(),
                })
            };
            Ok(CurveRow {
                alpha: req(f[0])?,
                winning_paper: req(f[1])?,
                winning_conditional: req(f[2])?,
                cheating: cell(line, f[3])?,
                threshold: cell(line, f[4])?,
            })
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::matchings::{canonical_family, sextet_family};
    use crate::numerics;

    fn params(alpha: f64, eta: f64, nu: f64) -> CoherentGameParams {
        CoherentGameParams::new(canonical_family(2).unwrap(), alpha, eta, nu).unwrap()
    }

    /// `<beta|gamma>` for real coherent amplitudes.
    fn mode_overlap(beta: f64, gamma: f64) -> f64 {
        (-(beta * beta + gamma * gamma) / 2.0 + beta * gamma).exp()
    }

    #[test]
    fn amplitudes() {
        let f = crate::matchings::Family::from_matchings(vec![crate::matchings::Matching::new(2, [(1, 2)]).unwrap()]).unwrap();
        let p = CoherentGameParams::ideal(f, 1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let close = |a: Vec<f64>, b: [f64; 2]| a.iter().zip(b).all(|(u, v)| (u - v).abs() < 1e-15);
        assert!(close(signal_amplitudes(&BitString::parse("00").unwrap(), &p).unwrap(), [s, s]));
        assert!(close(signal_amplitudes(&BitString::parse("01").unwrap(), &p).unwrap(), [s, -s]));
        assert!(signal_amplitudes(&BitString::parse("011").unwrap(), &p).is_err());
        let q = params(1.7, 1.0, 1.0);
        for x in 0..16 {
            let e: f64 = signal_amplitudes(&BitString::new(4, x), &q).unwrap().iter().map(|a| a * a).sum();
            assert!((e - 1.7 * 1.7).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_matches_per_mode_product() {
        for n in [2usize, 4, 6] {
            for alpha in [0.0, 0.3, 1.0, 2.5] {
                let a = alpha / (n as f64).sqrt();
                for x in 0..(1u64 << n) {
                    for y in 0..(1u64 << n) {
                        let (bx, by) = (BitString::new(n, x), BitString::new(n, y));
                        let want: f64 = (1..=n)
                            .map(|i| {
                                let s = |b: u8| if b == 0 { a } else { -a };
                                mode_overlap(s(bx.bit(i)), s(by.bit(i)))
                            })
                            .product();
                        assert!((overlap(&bx, &by, alpha).unwrap() - want).abs() < 1e-12);
                    }
                }
            }
        }
        let x = BitString::parse("0000").unwrap();
        let y = BitString::parse("1000").unwrap();
        assert!((overlap(&x, &y, 1.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(overlap(&x, &x, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn embedding_reproduces_gram() {
        let p = params(1.0, 1.0, 1.0);
        let g = gram_matrix(4, 1.0).unwrap();
        let e = signal_ensemble(&p).unwrap();
        for x in 0..16 {
            for y in 0..16 {
                let ip = numerics::inner(&e.states()[x], &e.states()[y]);
                assert!((ip - g.matrix()[(x, y)]).norm() < 1e-10);
            }
        }
        assert!(e.dim() <= 16);
    }

    #[test]
    fn character_embedding_agrees_with_generic() {
        for alpha in [0.0, 0.7, 2.0] {
            let g = gram_matrix(4, alpha).unwrap();
            let fast = character_embed(&g, GRAM_TOL).unwrap();
            let slow = numerics::gram_embed(&g, GRAM_TOL).unwrap();
            assert_eq!(fast[0].len(), slow[0].len());
            for x in 0..16 {
                for y in 0..16 {
                    let a = numerics::inner(&fast[x], &fast[y]);
                    let b = numerics::inner(&slow[x], &slow[y]);
                    assert!((a - b).norm() < 1e-10);
                }
            }
        }
        let skew = HermitianOperator::from_real(nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.9])).unwrap();
        assert!(matches!(character_embed(&skew, GRAM_TOL), Err(Error::NotShiftInvariant(_))));
    }

    #[test]
    fn restricted_dual_matches_full_solve() {
        // same states in a generic eigenbasis, solved over the full dual space
        let p = params(0.9, 1.0, 1.0);
        let g = gram_matrix(4, 0.9).unwrap();
        let states = numerics::gram_embed(&g, GRAM_TOL).unwrap();
        let e = Ensemble::new(4, states, vec![1.0 / 16.0; 16]).unwrap();
        let full = sdp::physical_value(&DiscriminationProblem::from_ensemble(&e, p.family()).unwrap(), &SolverOptions::default()).unwrap();
        let fast = cheating_probability(&p, &SolverOptions::default()).unwrap();
        assert!((full.primal_value - fast.primal_value).abs() < 1e-6);
        assert!(fast.gap <= 1e-6);
    }

    #[test]
    fn cheating_at_zero_is_prior_guess() {
        let sol = cheating_probability(&params(0.0, 1.0, 1.0), &SolverOptions::default()).unwrap();
        assert!((sol.primal_value - 0.25).abs() < 1e-6);
    }

    #[test]
    fn cheating_limits_pair() {
        let opts = SolverOptions::default();
        let small = cheating_probability(&params(1e-3, 1.0, 1.0), &opts).unwrap().primal_value;
        assert!((small - 0.25).abs() < 1e-3, "{small}");
        let big = cheating_probability(&params(4.0, 1.0, 1.0), &opts).unwrap().primal_value;
        assert!(big >= 0.99, "{big}");
        let huge = cheating_probability(&params(6.0, 1.0, 1.0), &opts).unwrap().primal_value;
        assert!((huge - 1.0).abs() < 1e-2, "{huge}");
    }

    #[test]
    fn cheating_below_selective_value() {
        let p = params(1.0, 1.0, 1.0);
        let e = signal_ensemble(&p).unwrap();
        let cmp = sdp::selective_vs_physical(&e, p.family(), &SolverOptions::default()).unwrap();
        assert!(cmp.pv <= cmp.sv + 1e-6);
    }

    #[test]
    fn cheating_problem_rejects_large_n() {
        let p = CoherentGameParams::ideal(sextet_family(3).unwrap(), 1.0).unwrap();
        assert_eq!(cheating_problem(&p).unwrap().targets().len(), 216);
        let p = CoherentGameParams::ideal(canonical_family(3).unwrap(), 1.0).unwrap();
        assert!(matches!(cheating_problem(&p), Err(Error::Unsupported { .. })));
    }

    #[test]
    fn beam_splitter_bookkeeping() {
        let p = params(1.3, 1.0, 1.0);
        let o = beam_splitter_pair(0, 1, &p);
        assert_eq!(o.correct_detector, 1);
        assert!((o.amp_correct - (0.5f64).sqrt() * 1.3).abs() < 1e-15);
        assert_eq!(o.amp_wrong, 0.0);
        assert_eq!(beam_splitter_pair(1, 1, &p).correct_detector, 0);
        let z = beam_splitter_pair(0, 0, &params(1.3, 0.0, 0.7));
        assert_eq!((z.amp_correct, z.amp_wrong), (0.0, 0.0));
        let q = params(1.3, 0.8, 0.9);
        let o = beam_splitter_pair(0, 0, &q);
        let e = o.amp_correct.powi(2) + o.amp_wrong.powi(2);
        assert!((e - 2.0 * 0.8 * 1.3 * 1.3 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn ideal_formula() {
        assert_eq!(ideal_winning(0.0), 0.5);
        assert!((ideal_winning(2f64.ln().sqrt()) - 0.75).abs() < 1e-15);
        assert!((ideal_winning(1.0) - 0.816_060_279_414_278_8).abs() < 1e-15);
    }

    #[test]
    fn click_model_examples() {
        for v in Variant::ALL {
            let m = click_model(&params(1.0, 1.0, 1.0), v);
            assert_eq!((m.p_w, m.p_1), (0.0, 0.0));
            assert!((m.p_c - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
            let m = click_model(&params(1.0, 0.0, 0.5), v);
            assert_eq!((m.p_0, m.p_c, m.p_w, m.p_1), (1.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn no_click_probability_factorizes() {
        for i in 0..10 {
            for j in 0..10 {
                for l in 0..10 {
                    let p = params(0.3 * i as f64, j as f64 / 9.0, l as f64 / 9.0);
                    let m = click_model(&p, Variant::PaperExact);
                    let lhs = (1.0 - m.p_c).powi(2) * (1.0 - m.p_w).powi(2);
                    assert!((lhs - m.p_0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn reductions() {
        for a in [0.0, 0.4, 1.0, 2.2] {
            for v in Variant::ALL {
                assert_eq!(imperfect_winning(&params(a, 1.0, 1.0), v), ideal_winning(a));
                assert_eq!(imperfect_winning(&params(a, 0.0, 0.8), v), 0.5);
            }
        }
    }

    #[test]
    fn winning_monotone() {
        let alphas: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        for w in alphas.windows(2) {
            assert!(ideal_winning(w[1]) > ideal_winning(w[0]));
        }
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for v in Variant::ALL {
            for &a in &[0.5, 1.0, 1.5] {
                for &fixed in &[0.8, 0.9, 1.0] {
                    for w in grid.windows(2) {
                        assert!(imperfect_winning(&params(a, w[1], fixed), v) >= imperfect_winning(&params(a, w[0], fixed), v) - 1e-15);
                        assert!(imperfect_winning(&params(a, fixed, w[1]), v) >= imperfect_winning(&params(a, fixed, w[0]), v) - 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn bright_pulses_with_poor_visibility_lose_to_double_clicks() {
        // more transmission means more double clicks once nearly every run has a click
        for v in Variant::ALL {
            let lo = imperfect_winning(&params(2.0, 0.9, 0.8), v);
            let hi = imperfect_winning(&params(2.0, 1.0, 0.8), v);
            assert!(hi < lo, "{v:?}");
        }
    }

    #[test]
    fn variant_values_at_reference_point() {
        let p = params(1.0, 1.0, 0.9);
        assert!((imperfect_winning(&p, Variant::PaperExact) - 0.7909).abs() < 1e-4);
        assert!((imperfect_winning(&p, Variant::Conditional) - 0.7519).abs() < 1e-4);
    }

    /// `montecarlo::run_trials` at eta=0.8, nu=0.95, alpha=1, n=4, first
    /// matching, 10^6 trials, seed 2024: (estimate, stderr).
    pub(crate) const MC_REFERENCE: (f64, f64) = (0.747921, 0.000434206377);

    #[test]
    fn imperfect_point_against_simulation() {
        let p = params(1.0, 0.8, 0.95);
        let (est, se) = MC_REFERENCE;
        assert!((imperfect_winning(&p, Variant::Conditional) - est).abs() < 3.0 * se);
        assert!((imperfect_winning(&p, Variant::PaperExact) - est).abs() > 10.0 * se);
    }

    #[test]
    fn grid_points() {
        assert_eq!(AlphaGrid::new(0.5, 2.0, 1).unwrap().points(), vec![0.5]);
        let g = AlphaGrid::new(0.0, 3.0, 61).unwrap().points();
        assert_eq!(g.len(), 61);
        assert_eq!((g[0], g[60]), (0.0, 3.0));
        assert!((g[20] - 1.0).abs() < 1e-15);
        assert!(AlphaGrid::new(2.0, 1.0, 3).is_err());
        assert!(AlphaGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn curve_first_row_and_csv_round_trip() {
        let grid = AlphaGrid::new(0.0, 2.0, 5).unwrap();
        let rows = curve(&canonical_family(2).unwrap(), &grid, 1.0, 1.0, true, &SolverOptions::default()).unwrap();
        let r0 = &rows[0];
        assert_eq!((r0.alpha, r0.winning_paper), (0.0, 0.5));
        assert!((r0.cheating.unwrap() - 0.25).abs() < 1e-6);
        assert!((r0.threshold.unwrap() - 0.625).abs() < 1e-6);
        let text = curve_csv(&rows);
        let back = parse_curve_csv(&text).unwrap();
        assert_eq!(curve_csv(&back), text);
        for (a, b) in rows.iter().zip(&back) {
            assert!((a.winning_paper - b.winning_paper).abs() <= 1e-9 * a.winning_paper.abs());
        }
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(0.816060279414), "0.816060279");
        assert_eq!(format_sig9(123456789012.0), "123456789000");
        assert_eq!(format_sig9(f64::NAN), "NA");
    }
}
