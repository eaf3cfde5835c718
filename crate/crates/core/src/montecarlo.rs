//! Seeded simulation of the honest coherent-state protocol.
//!
//! Every trial draws from its own ChaCha8 stream: the generator is seeded with
//! `seed` and switched to stream `trial index`, so results do not depend on
//! how trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coherent::{beam_splitter_pair, format_sig9, imperfect_winning, CoherentGameParams, Variant};
use crate::error::{Error, Result};
use crate::game::{in_relation, BitString, EdgeAnswer};

/// What the two detectors behind one matched pair reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotClicks {
    pub d0: bool,
    pub d1: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    None,
    Correct,
    Wrong,
    Both,
}

impl SlotClicks {
    pub fn any(self) -> bool {
        self.d0 || self.d1
    }

    /// Classifies the slot against the true parity of the pair.
    pub fn kind(self, parity: u8) -> SlotKind {
        let (correct, wrong) = if parity == 0 { (self.d0, self.d1) } else { (self.d1, self.d0) };
        match (correct, wrong) {
            (false, false) => SlotKind::None,
            (true, false) => SlotKind::Correct,
            (false, true) => SlotKind::Wrong,
            (true, true) => SlotKind::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub x: BitString,
    pub matching_index: usize,
    /// One entry per pair of the matching, in pair order.
    pub slots: Vec<SlotClicks>,
    /// Slot Bob answered from; `None` when nothing clicked.
    pub chosen: Option<usize>,
    pub answer: EdgeAnswer,
    pub correct: bool,
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn check_matching(params: &CoherentGameParams, matching_index: usize) -> Result<()> {
    if matching_index >= params.k() {
        return Err(Error::Unsupported {
            name: "matching index",
            value: matching_index,
            min: 0,
            max: params.k() - 1,
        });
    }
    if params.n() > 64 {
        return Err(Error::NodeCountOutOfRange { n: params.n(), max: 64 });
    }
    Ok(())
}

/// Plays trial number `trial` of the run seeded with `seed`.
pub fn simulate_trial(params: &CoherentGameParams, matching_index: usize, seed: u64, trial: u64) -> Result<TrialOutcome> {
    check_matching(params, matching_index)?;
    let mut rng = trial_rng(seed, trial);
    Ok(play(params, matching_index, &mut rng))
}

fn play(params: &CoherentGameParams, matching_index: usize, rng: &mut ChaCha8Rng) -> TrialOutcome {
    let n = params.n();
    let m = &params.family().matchings()[matching_index];
    let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let x = BitString::new(n, rng.random::<u64>() & mask);

    let slots: Vec<SlotClicks> = m
        .pairs()
        .iter()
        .map(|&(i, j)| {
            let out = beam_splitter_pair(x.bit(i), x.bit(j), params);
            let correct = rng.random_bool(-(-out.amp_correct * out.amp_correct).exp_m1());
            let wrong = rng.random_bool(-(-out.amp_wrong * out.amp_wrong).exp_m1());
            if out.correct_detector == 0 {
                SlotClicks { d0: correct, d1: wrong }
            } else {
                SlotClicks { d0: wrong, d1: correct }
            }
        })
        .collect();

    let clicked: Vec<usize> = (0..slots.len()).filter(|&s| slots[s].any()).collect();
    let (chosen, slot) = if clicked.is_empty() {
        (None, rng.random_range(0..slots.len()))
    } else {
        let s = clicked[rng.random_range(0..clicked.len())];
        (Some(s), s)
    };
    let c = slots[slot];
    let b = match (chosen, c.d0, c.d1) {
        (Some(_), true, false) => 0,
        (Some(_), false, true) => 1,
        _ => rng.random_range(0..2u8),
    };
    let (i, j) = m.pairs()[slot];
    let answer = EdgeAnswer::new(i, j, b);
    let correct = in_relation(&x, &answer, m);
    TrialOutcome {
        x,
        matching_index,
        slots,
        chosen,
        answer,
        correct,
    }
}

/// Checks that a recorded trial follows the answering rule.
pub fn audit_trial(params: &CoherentGameParams, outcome: &TrialOutcome) -> bool {
    let Some(m) = params.family().matchings().get(outcome.matching_index) else {
        return false;
    };
    if outcome.slots.len() != m.pairs().len() {
        return false;
    }
    let a = outcome.answer;
    let Some(slot) = m.edge_index(a.i, a.j) else {
        return false;
    };
    let any = outcome.slots.iter().any(|s| s.any());
    let rule_ok = match outcome.chosen {
        None => !any,
        Some(s) => {
            let c = outcome.slots[s];
            s == slot
                && c.any()
                && match (c.d0, c.d1) {
                    (true, false) => a.b == 0,
                    (false, true) => a.b == 1,
                    _ => true,
                }
        }
    };
    rule_ok && outcome.correct == in_relation(&outcome.x, &a, m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub trials: u64,
    pub wins: u64,
    pub estimate: f64,
    pub stderr: f64,
    pub seed: u64,
    /// Trials in which no detector clicked.
    pub no_click: u64,
    pub eta: f64,
    pub nu: f64,
    pub alpha: f64,
    pub n: usize,
    pub k: usize,
}

pub const ESTIMATE_HEADER: &str = "trials,wins,estimate,stderr,seed,eta,nu,alpha,n,k";

impl EstimateReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.trials,
            self.wins,
            format_sig9(self.estimate),
            format_sig9(self.stderr),
            self.seed,
            format_sig9(self.eta),
            format_sig9(self.nu),
            format_sig9(self.alpha),
            self.n,
            self.k
        )
    }

    /// Header plus one row.
    pub fn to_csv(&self) -> String {
        format!("{ESTIMATE_HEADER}\n{}\n", self.csv_row())
    }

    /// Distance of `value` from the estimate in standard errors.
    pub fn sigmas(&self, value: f64) -> f64 {
        let d = (self.estimate - value).abs();
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Parses rows written by [`EstimateReport::to_csv`]; `no_click` is not stored
/// and comes back as zero.
pub fn parse_estimate_csv(text: &str) -> Result<Vec<EstimateReport>> {
    let mut lines = text.lines();
    if lines.next() != Some(ESTIMATE_HEADER) {
        return Err(Error::Parse {
            line: 1,
            msg: "missing estimate header".into(),
        });
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let line = i + 2;
            let bad = |msg: String| Error::Parse { line, msg };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 10 {
                return Err(bad(format!("expected 10 fields, got {}", f.len())));
            }
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("bad integer {s:?}")));
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
            Ok(EstimateReport {
                trials: int(f[0])?,
                wins: int(f[1])?,
                estimate: real(f[2])?,
                stderr: real(f[3])?,
                seed: int(f[4])?,
                no_click: 0,
                eta: real(f[5])?,
                nu: real(f[6])?,
                alpha: real(f[7])?,
                n: int(f[8])? as usize,
                k: int(f[9])? as usize,
            })
        })
        .collect()
}

/// Runs `trials` independent trials in parallel.
pub fn run_trials(params: &CoherentGameParams, matching_index: usize, trials: u64, seed: u64) -> Result<EstimateReport> {
    check_matching(params, matching_index)?;
    if trials == 0 {
        return Err(Error::Unsupported {
            name: "trials",
            value: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    let (wins, no_click) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let o = play(params, matching_index, &mut trial_rng(seed, t));
            (o.correct as u64, o.chosen.is_none() as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let estimate = wins as f64 / trials as f64;
    Ok(EstimateReport {
        trials,
        wins,
        estimate,
        stderr: (estimate * (1.0 - estimate) / trials as f64).sqrt(),
        seed,
        no_click,
        eta: params.eta(),
        nu: params.nu(),
        alpha: params.alpha(),
        n: params.n(),
        k: params.k(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Paper,
    Conditional,
    /// Both formulas lie within 3 standard errors.
    Indistinguishable,
    Neither,
}

pub const PASS_SIGMAS: f64 = 3.0;
pub const FLAG_SIGMAS: f64 = 3.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Adjudication {
    pub report: EstimateReport,
    pub paper: f64,
    pub conditional: f64,
    pub sigmas_paper: f64,
    pub sigmas_conditional: f64,
    pub verdict: Verdict,
}

impl Adjudication {
    /// `key=value` lines.
    pub fn summary(&self) -> String {
        let verdict = match self.verdict {
            Verdict::Paper => "paper",
            Verdict::Conditional => "conditional",
            Verdict::Indistinguishable => "indistinguishable",
            Verdict::Neither => "neither",
        };
        format!(
            "estimate={}\nstderr={}\nwinning_paper={}\nwinning_conditional={}\nsigmas_paper={:.3}\nsigmas_conditional={:.3}\nverdict={verdict}\n",
            format_sig9(self.report.estimate),
            format_sig9(self.report.stderr),
            format_sig9(self.paper),
            format_sig9(self.conditional),
            self.sigmas_paper,
            self.sigmas_conditional,
        )
    }
}

/// Compares a simulated estimate (first matching) with both analytic variants.
pub fn adjudicate_p1(params: &CoherentGameParams, trials: u64, seed: u64) -> Result<Adjudication> {
    Ok(adjudicate(params, run_trials(params, 0, trials, seed)?))
}

/// Places an existing estimate against both analytic variants.
pub fn adjudicate(params: &CoherentGameParams, report: EstimateReport) -> Adjudication {
    let paper = imperfect_winning(params, Variant::PaperExact);
    let conditional = imperfect_winning(params, Variant::Conditional);
    let sigmas_paper = report.sigmas(paper);
    let sigmas_conditional = report.sigmas(conditional);
    let verdict = match (sigmas_paper <= PASS_SIGMAS, sigmas_conditional <= PASS_SIGMAS) {
        (true, true) => Verdict::Indistinguishable,
        (true, false) => Verdict::Paper,
        (false, true) => Verdict::Conditional,
        (false, false) => Verdict::Neither,
    };
    Adjudication {
        report,
        paper,
        conditional,
        sigmas_paper,
        sigmas_conditional,
        verdict,
    }
}
