//! Hidden-matching retrieval games: signal states, relations, the honest
//! measurement, the `O_a` operators and the selective value.
//!
//! Strings `x in {0,1}^n` are packed little-endian into a `u64`: bit `i - 1`
//! holds `x_i`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matchings::{is_independent, Family, Matching};
use crate::numerics::{self, ComplexVector, HermitianOperator, DEFAULT_SUPPORT_TOL};
use num_complex::Complex64;

/// Largest `n` for which sums over all `2^n` strings are carried out.
pub const MAX_EXHAUSTIVE_N: usize = 20;
/// Largest joint-answer space enumerated by [`selective_value`].
pub const MAX_EXHAUSTIVE_ANSWERS: u128 = 1_000_000;

/// An `n`-bit string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitString {
    n: usize,
    bits: u64,
}

impl BitString {
    pub fn new(n: usize, bits: u64) -> Self {
        assert!(n <= 64, "bit strings hold at most 64 bits");
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        Self { n, bits: bits & mask }
    }

    /// Parses `x_1 x_2 ... x_n` written left to right, e.g. `"0101"`.
    pub fn parse(s: &str) -> Result<Self> {
        if s.len() > 64 {
            return Err(Error::DimensionMismatch {
                expected: 64,
                got: s.len(),
            });
        }
        let mut bits = 0u64;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << i,
                _ => {
                    return Err(Error::Parse {
                        line: 1,
                        msg: format!("`{c}` is not a bit"),
                    })
                }
            }
        }
        Ok(Self::new(s.len(), bits))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// `x_i` for a 1-based position.
    pub fn bit(&self, i: usize) -> u8 {
        ((self.bits >> (i - 1)) & 1) as u8
    }

    pub fn hamming(&self, other: &Self) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 1..=self.n {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

/// The state `(1/sqrt n) sum_i (-1)^{x_i} |i>`.
pub fn hm_state(x: &BitString) -> ComplexVector {
    let amp = 1.0 / (x.len() as f64).sqrt();
    ComplexVector::from_iterator(
        x.len(),
        (1..=x.len()).map(|i| Complex64::new(if x.bit(i) == 0 { amp } else { -amp }, 0.0)),
    )
}

/// [`hm_state`] with a length check against the game size.
pub fn hm_state_checked(x: &BitString, n: usize) -> Result<ComplexVector> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    Ok(hm_state(x))
}

/// One relation's answer: the edge `(i, j)` (1-based, `i < j`) and claimed
/// parity `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeAnswer {
    pub i: usize,
    pub j: usize,
    pub b: u8,
}

impl EdgeAnswer {
    pub fn new(i: usize, j: usize, b: u8) -> Self {
        Self {
            i: i.min(j),
            j: i.max(j),
            b: b & 1,
        }
    }

    /// Whether `x_i xor x_j = b` (edge membership not checked).
    pub fn parity_holds(&self, x: u64) -> bool {
        (((x >> (self.i - 1)) ^ (x >> (self.j - 1))) & 1) as u8 == self.b
    }
}

impl fmt::Display for EdgeAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.i, self.j, self.b)
    }
}

/// A joint answer: one [`EdgeAnswer`] per relation of the family.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Answer(pub Vec<EdgeAnswer>);

impl Answer {
    pub fn parts(&self) -> &[EdgeAnswer] {
        &self.0
    }

    pub fn consistent_with(&self, x: u64) -> bool {
        self.0.iter().all(|e| e.parity_holds(x))
    }

    /// The same edges with every parity flipped.
    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|e| EdgeAnswer { b: e.b ^ 1, ..*e }).collect())
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        f.write_str(&parts.join(""))
    }
}

pub fn in_relation(x: &BitString, ans: &EdgeAnswer, m: &Matching) -> bool {
    m.contains(ans.i, ans.j) && ans.parity_holds(x.bits())
}

/// Enumeration of joint answers in lexicographic order of
/// `(matching index, edge index, b)`, the first matching most significant.
#[derive(Debug, Clone)]
pub struct AnswerSpace<'a> {
    family: &'a Family,
}

impl<'a> AnswerSpace<'a> {
    pub fn new(family: &'a Family) -> Self {
        Self { family }
    }

    /// Number of joint answers, `n^k`.
    pub fn count(&self) -> u128 {
        (self.family.n() as u128).saturating_pow(self.family.k() as u32)
    }

    pub fn answer(&self, mut index: u128) -> Answer {
        let radix = self.family.n() as u128;
        let mut parts = vec![EdgeAnswer { i: 0, j: 0, b: 0 }; self.family.k()];
        for (slot, m) in parts.iter_mut().zip(self.family.matchings()).rev() {
            let digit = (index % radix) as usize;
            index /= radix;
            let (i, j) = m.pairs()[digit / 2];
            *slot = EdgeAnswer {
                i,
                j,
                b: (digit % 2) as u8,
            };
        }
        Answer(parts)
    }

    pub fn iter(&self) -> impl Iterator<Item = Answer> + '_ {
        (0..self.count()).map(|i| self.answer(i))
    }
}

/// One outcome of the honest measurement for a single matching.
#[derive(Debug, Clone)]
pub struct HonestOutcome {
    pub answer: EdgeAnswer,
    pub vector: ComplexVector,
}

/// The basis `{(|i> +- |j>)/sqrt 2 : (i,j) in M}`; the `+` vector reports
/// parity 0, the `-` vector parity 1.
pub fn honest_basis(m: &Matching) -> Vec<HonestOutcome> {
    let n = m.n();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n);
    for &(i, j) in m.pairs() {
        for b in 0..2u8 {
            let mut v = ComplexVector::zeros(n);
            v[i - 1] = Complex64::new(h, 0.0);
            v[j - 1] = Complex64::new(if b == 0 { h } else { -h }, 0.0);
            out.push(HonestOutcome {
                answer: EdgeAnswer { i, j, b },
                vector: v,
            });
        }
    }
    out
}

/// A priori distribution over `{0,1}^n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Prior {
    Uniform,
    /// Explicit weights indexed by the packed string.
    Weights(Vec<f64>),
}

/// A (1-out-of-k) hidden-matching game.
#[derive(Debug, Clone)]
pub struct HiddenMatchingGame {
    family: Family,
    prior: Prior,
    independent: bool,
}

impl HiddenMatchingGame {
    /// Game with the uniform prior `1/2^n`.
    pub fn new(family: Family) -> Result<Self> {
        let independent = is_independent(family.matchings())?.independent;
        Ok(Self {
            family,
            prior: Prior::Uniform,
            independent,
        })
    }

    pub fn with_prior(family: Family, weights: Vec<f64>) -> Result<Self> {
        check_exhaustive(family.n())?;
        let expected = 1usize << family.n();
        if weights.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: weights.len(),
            });
        }
        if let Some(&w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::OutOfRange {
                name: "prior weight",
                value: w,
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::OutOfRange {
                name: "prior total",
                value: total,
            });
        }
        let mut game = Self::new(family)?;
        game.prior = Prior::Weights(weights);
        Ok(game)
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

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn is_independent(&self) -> bool {
        self.independent
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.prior, Prior::Uniform)
    }

    pub fn probability(&self, x: u64) -> f64 {
        match &self.prior {
            Prior::Uniform => (-(self.n() as f64)).exp2(),
            Prior::Weights(w) => w[x as usize],
        }
    }

    /// The full state ensemble (requires `n <= 20`).
    pub fn ensemble(&self) -> Result<Ensemble> {
        check_exhaustive(self.n())?;
        let n = self.n();
        let states = (0..1u64 << n).map(|x| hm_state(&BitString::new(n, x))).collect();
        let prior = (0..1u64 << n).map(|x| self.probability(x)).collect();
        Ensemble::new(n, states, prior)
    }

    /// Probability that the honest measurement for matching `index` returns
    /// a correct answer, summed exhaustively over strings and outcomes.
    pub fn honest_winning_probability(&self, index: usize) -> Result<f64> {
        check_exhaustive(self.n())?;
        let m = &self.family.matchings()[index];
        let basis = honest_basis(m);
        let n = self.n();
        let mut total = 0.0;
        for x in 0..1u64 << n {
            let bs = BitString::new(n, x);
            let psi = hm_state(&bs);
            let won: f64 = basis
                .iter()
                .filter(|o| in_relation(&bs, &o.answer, m))
                .map(|o| o.vector.dotc(&psi).norm_sqr())
                .sum();
            total += self.probability(x) * won;
        }
        Ok(total)
    }
}

fn check_exhaustive(n: usize) -> Result<()> {
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::NodeCountOutOfRange {
            n,
            max: MAX_EXHAUSTIVE_N,
        });
    }
    Ok(())
}

/// A weighted family of pure states indexed by packed strings.
#[derive(Debug, Clone)]
pub struct Ensemble {
    n: usize,
    states: Vec<ComplexVector>,
    prior: Vec<f64>,
}

impl Ensemble {
    pub fn new(n: usize, states: Vec<ComplexVector>, prior: Vec<f64>) -> Result<Self> {
        check_exhaustive(n)?;
        let count = 1usize << n;
        for len in [states.len(), prior.len()] {
            if len != count {
                return Err(Error::DimensionMismatch {
                    expected: count,
                    got: len,
                });
            }
        }
        let d = states[0].len();
        if let Some(s) = states.iter().find(|s| s.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.len(),
            });
        }
        Ok(Self { n, states, prior })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Carrier dimension.
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn states(&self) -> &[ComplexVector] {
        &self.states
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    /// `rho = sum_x p(x) |x><x|`
    pub fn average_state(&self) -> HermitianOperator {
        let mut rho = HermitianOperator::zeros(self.dim());
        for (v, &p) in self.states.iter().zip(&self.prior) {
            if p != 0.0 {
                rho.add_outer(v, p);
            }
        }
        rho
    }

    /// `sum_{x consistent with a} p(x) |x><x|`
    pub fn weighted_target(&self, answer: &Answer) -> HermitianOperator {
        let mut r = HermitianOperator::zeros(self.dim());
        for (x, (v, &p)) in self.states.iter().zip(&self.prior).enumerate() {
            if p != 0.0 && answer.consistent_with(x as u64) {
                r.add_outer(v, p);
            }
        }
        r
    }
}

/// How [`build_oa`] evaluates the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OaMode {
    /// Piecewise formula from the parity closure (uniform prior,
    /// independent family).
    ClosedForm,
    /// Direct sum `sum_x p(x) rho^{-1/2} rho_x rho^{-1/2}`.
    Numeric,
}

/// Answer edges `S`, the implied edges `P`, and the parity sign of every
/// node pair joined through `S`.
#[derive(Debug, Clone)]
pub struct ParityClosure {
    n: usize,
    /// Component root of each 0-based node.
    root: Vec<usize>,
    /// Parity of `x_v xor x_root(v)` implied by `S`.
    potential: Vec<u8>,
    /// False when `S` contains a cycle with odd parity sum.
    consistent: bool,
    s_edges: Vec<(usize, usize)>,
}

impl ParityClosure {
    pub fn is_consistent(&self) -> bool {
        self.consistent
    }

    /// The edges of `S`, 1-based.
    pub fn s_edges(&self) -> &[(usize, usize)] {
        &self.s_edges
    }

    /// Node pairs (1-based, `i < j`) joined by a path through `S` but not
    /// themselves in `S`.
    pub fn implied_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                let e = (i + 1, j + 1);
                if self.root[i] == self.root[j] && !self.s_edges.contains(&e) {
                    out.push(e);
                }
            }
        }
        out
    }

    /// `(-1)^{x_i xor x_j}` when fixed by `S` (1-based nodes).
    pub fn sign(&self, i: usize, j: usize) -> Option<i8> {
        let (a, b) = (i - 1, j - 1);
        (self.root[a] == self.root[b]).then(|| if self.potential[a] ^ self.potential[b] == 0 { 1 } else { -1 })
    }

    /// Connected components with at least two nodes, 1-based and sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut comps: Vec<Vec<usize>> = Vec::new();
        let mut index = vec![usize::MAX; self.n];
        for v in 0..self.n {
            let r = self.root[v];
            if index[r] == usize::MAX {
                index[r] = comps.len();
                comps.push(Vec::new());
            }
            comps[index[r]].push(v + 1);
        }
        comps.retain(|c| c.len() > 1);
        comps
    }
}

pub fn parity_closure(n: usize, ans: &Answer) -> ParityClosure {
    // union-find with parity to the parent
    let mut parent: Vec<usize> = (0..n).collect();
    let mut par: Vec<u8> = vec![0; n];
    fn find(parent: &mut [usize], par: &mut [u8], v: usize) -> (usize, u8) {
        if parent[v] == v {
            return (v, 0);
        }
        let (r, p) = find(parent, par, parent[v]);
        par[v] ^= p;
        parent[v] = r;
        (r, par[v])
    }
    let mut consistent = true;
    for e in ans.parts() {
        let (ri, pi) = find(&mut parent, &mut par, e.i - 1);
        let (rj, pj) = find(&mut parent, &mut par, e.j - 1);
        if ri == rj {
            if pi ^ pj != e.b {
                consistent = false;
            }
        } else {
            parent[ri] = rj;
            par[ri] = pi ^ pj ^ e.b;
        }
    }
    let mut root = vec![0; n];
    let mut potential = vec![0; n];
    for v in 0..n {
        let (r, p) = find(&mut parent, &mut par, v);
        root[v] = r;
        potential[v] = p;
    }
    let mut s_edges: Vec<(usize, usize)> = ans.parts().iter().map(|e| (e.i, e.j)).collect();
    s_edges.sort_unstable();
    s_edges.dedup();
    ParityClosure {
        n,
        root,
        potential,
        consistent,
        s_edges,
    }
}

/// Builds `O_a` operators for one game, caching whatever the mode needs.
pub struct OaBuilder<'g> {
    game: &'g HiddenMatchingGame,
    kind: BuilderKind,
}

enum BuilderKind {
    Closed,
    Numeric(WhitenedEnsemble),
}

impl<'g> OaBuilder<'g> {
    pub fn new(game: &'g HiddenMatchingGame, mode: OaMode) -> Result<Self> {
        let kind = match mode {
            OaMode::ClosedForm => {
                if !game.is_independent() {
                    return Err(Error::ClosedFormUnavailable("an independent family"));
                }
                if !game.is_uniform() {
                    return Err(Error::ClosedFormUnavailable("the uniform prior"));
                }
                BuilderKind::Closed
            }
            OaMode::Numeric => BuilderKind::Numeric(WhitenedEnsemble::new(&game.ensemble()?)?),
        };
        Ok(Self { game, kind })
    }

    pub fn build(&self, ans: &Answer) -> HermitianOperator {
        match &self.kind {
            BuilderKind::Closed => closed_form_oa(self.game.n(), ans),
            BuilderKind::Numeric(w) => w.oa(ans),
        }
    }
}

fn closed_form_oa(n: usize, ans: &Answer) -> HermitianOperator {
    let closure = parity_closure(n, ans);
    let w = (-(ans.parts().len() as f64)).exp2();
    let mut m = nalgebra::DMatrix::<Complex64>::zeros(n, n);
    for i in 1..=n {
        for j in 1..=n {
            if let Some(s) = closure.sign(i, j) {
                m[(i - 1, j - 1)] = Complex64::new(w * s as f64, 0.0);
            }
        }
    }
    HermitianOperator::new(m).expect("finite entries")
}

/// States pre-multiplied by `rho^{-1/2}`.
#[derive(Debug, Clone)]
pub struct WhitenedEnsemble {
    states: Vec<ComplexVector>,
    prior: Vec<f64>,
}

impl WhitenedEnsemble {
    pub fn new(ensemble: &Ensemble) -> Result<Self> {
        let r = numerics::pinv_sqrt(&ensemble.average_state(), DEFAULT_SUPPORT_TOL)?;
        let states = ensemble.states().iter().map(|v| r.matrix() * v).collect();
        Ok(Self {
            states,
            prior: ensemble.prior().to_vec(),
        })
    }

    pub fn oa(&self, ans: &Answer) -> HermitianOperator {
        let d = self.states[0].len();
        let mut o = HermitianOperator::zeros(d);
        for (x, (v, &p)) in self.states.iter().zip(&self.prior).enumerate() {
            if p != 0.0 && ans.consistent_with(x as u64) {
                o.add_outer(v, p);
            }
        }
        o
    }
}

pub fn build_oa(game: &HiddenMatchingGame, ans: &Answer, mode: OaMode) -> Result<HermitianOperator> {
    check_answer(game.family(), ans)?;
    Ok(OaBuilder::new(game, mode)?.build(ans))
}

fn check_answer(family: &Family, ans: &Answer) -> Result<()> {
    if ans.parts().len() != family.k() {
        return Err(Error::DimensionMismatch {
            expected: family.k(),
            got: ans.parts().len(),
        });
    }
    for (e, m) in ans.parts().iter().zip(family.matchings()) {
        if !m.contains(e.i, e.j) {
            return Err(Error::InvalidMatching(format!("edge ({},{}) not in its matching", e.i, e.j)));
        }
    }
    Ok(())
}

/// Number of strings consistent with every part of `ans` (exhaustive).
pub fn count_consistent(game: &HiddenMatchingGame, ans: &Answer) -> Result<u64> {
    check_exhaustive(game.n())?;
    check_answer(game.family(), ans)?;
    Ok((0..1u64 << game.n()).filter(|&x| ans.consistent_with(x)).count() as u64)
}

/// Selective value with the `(k+1)/2^k` bound recorded alongside.
#[derive(Debug, Clone)]
pub struct GameValues {
    pub sv: f64,
    pub bound: f64,
    pub pv: Option<f64>,
    /// First answer (in enumeration order) attaining `sv`.
    pub argmax: Answer,
    pub answers_examined: u128,
}

pub fn cheating_bound(k: usize) -> f64 {
    (k as f64 + 1.0) / (k as f64).exp2()
}

/// `max_a ||O_a||` over every joint answer.
pub fn selective_value(game: &HiddenMatchingGame, mode: OaMode) -> Result<GameValues> {
    let space = AnswerSpace::new(game.family());
    let count = space.count();
    if count > MAX_EXHAUSTIVE_ANSWERS {
        return Err(Error::AnswerSpaceOverflow {
            count,
            limit: MAX_EXHAUSTIVE_ANSWERS,
        });
    }
    let builder = OaBuilder::new(game, mode)?;
    let (sv, idx) = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let o = builder.build(&space.answer(i as u128));
            numerics::spectral_norm(&o).map(|v| (v, i))
        })
        .try_reduce(|| (f64::NEG_INFINITY, u64::MAX), |a, b| Ok(better(a, b)))?;
    Ok(GameValues {
        sv,
        bound: cheating_bound(game.k()),
        pv: None,
        argmax: space.answer(idx as u128),
        answers_examined: count,
    })
}

/// Larger value wins; ties go to the earlier answer.
fn better(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

/// Maximum of `||O_a||` over `samples` uniformly drawn joint answers; a
/// lower estimate of the selective value for answer spaces too large to
/// enumerate.
pub fn selective_value_sampled(
    game: &HiddenMatchingGame,
    mode: OaMode,
    samples: usize,
    seed: u64,
) -> Result<GameValues> {
    let space = AnswerSpace::new(game.family());
    let builder = OaBuilder::new(game, mode)?;
    let n = game.n();
    let indices: Vec<u128> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|_| {
                (0..game.k()).fold(0u128, |acc, _| acc * n as u128 + rng.random_range(0..n) as u128)
            })
            .collect()
    };
    let (sv, pos) = indices
        .par_iter()
        .enumerate()
        .map(|(pos, &i)| numerics::spectral_norm(&builder.build(&space.answer(i))).map(|v| (v, pos as u64)))
        .try_reduce(|| (f64::NEG_INFINITY, u64::MAX), |a, b| Ok(better(a, b)))?;
    Ok(GameValues {
        sv,
        bound: cheating_bound(game.k()),
        pv: None,
        argmax: space.answer(indices[pos as usize]),
        answers_examined: samples as u128,
    })
}

/// Numeric selective value of an arbitrary ensemble under the joint
/// relation of `family`.
pub fn ensemble_selective_value(ensemble: &Ensemble, family: &Family) -> Result<f64> {
    let space = AnswerSpace::new(family);
    let count = space.count();
    if count > MAX_EXHAUSTIVE_ANSWERS {
        return Err(Error::AnswerSpaceOverflow {
            count,
            limit: MAX_EXHAUSTIVE_ANSWERS,
        });
    }
    let w = WhitenedEnsemble::new(ensemble)?;
    (0..count as u64)
        .into_par_iter()
        .map(|i| numerics::spectral_norm(&w.oa(&space.answer(i as u128))))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Whether a `(p, eps)` game clears the threshold `p > (1 + eps)/2`.
pub fn usefulness_condition(p: f64, eps: f64) -> bool {
    p > (1.0 + eps) / 2.0
}
