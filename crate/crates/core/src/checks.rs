//! Pass/fail rules for the reproduction studies, shared by the command-line
//! `repro` harness and the test suite.

use std::fmt;

use crate::eval::TransferReport;
use crate::experiments::{SyntheticGaps, SyntheticTransfer};

/// Outcome of one rule with a human-readable account of the numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {}", self.name, self.detail)
    }
}

/// Reference gap values: forest-fire to forest-fire, Barabási to forest-fire.
pub const SYNTHETIC_GAPS: (f64, f64) = (0.752, 0.883);
pub const SYNTHETIC_GAP_TOL: f64 = 0.20;

/// Europe to USA, Europe to Brazil.
pub const AIRPORT_GAPS: (f64, f64) = (0.869, 0.851);
pub const AIRPORT_GAP_TOL: f64 = 0.10;

/// Europe to USA at k = 1, 2, 3.
pub const K_SWEEP: [f64; 3] = [0.385, 0.869, 0.912];
pub const K_SWEEP_TOL: f64 = 0.15;

/// Europe, USA, Brazil accuracies of the Europe-trained encoder.
pub const AIRPORT_ACC: [f64; 3] = [0.592, 0.646, 0.732];
pub const AIRPORT_ACC_TOL: f64 = 0.06;

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

pub fn gap_ordering(gaps: &SyntheticGaps) -> Check {
    let (f, b) = (gaps.ff_mean(), gaps.ba_mean());
    let (rf, rb) = SYNTHETIC_GAPS;
    let pass = f < b && within(f, rf, SYNTHETIC_GAP_TOL) && within(b, rb, SYNTHETIC_GAP_TOL);
    Check {
        name: "synthetic gap ordering".into(),
        pass,
        detail: format!(
            "gap(F,F) = {f:.4} (ref {rf} ± {SYNTHETIC_GAP_TOL}), gap(B,F) = {b:.4} (ref {rb} ± {SYNTHETIC_GAP_TOL}), \
             F closer on {}/{} targets",
            gaps.ff_closer(),
            gaps.from_ff.len()
        ),
    }
}

struct TransferStats {
    gain: f64,
    delta: f64,
    acc: f64,
    base: f64,
}

fn transfer_stats(runs: &[SyntheticTransfer]) -> TransferStats {
    let pick = |f: &dyn Fn(&SyntheticTransfer) -> f64| median(&runs.iter().map(f).collect::<Vec<_>>());
    TransferStats {
        gain: pick(&SyntheticTransfer::gain),
        delta: pick(&SyntheticTransfer::delta),
        acc: pick(&|r| r.ff.mean_accuracy()),
        base: pick(&|r| r.ff.mean_baseline()),
    }
}

/// With structure-respecting features the trained encoder should clearly
/// beat its own initialization and favour the similar source (medians over
/// training seeds).
pub fn transfer_with_structural_features(runs: &[SyntheticTransfer]) -> Check {
    let s = transfer_stats(runs);
    Check {
        name: "positive transfer with degree features".into(),
        pass: s.gain >= 0.05 && s.delta > 0.0,
        detail: format!(
            "F->F acc {:.4} vs untrained {:.4}: gain {:+.4} (need >= 0.05); delta(F->F, B->F) {:+.4} (need > 0); median of {} seeds",
            s.acc, s.base, s.gain, s.delta, runs.len()
        ),
    }
}

/// With uninformative features neither training nor the choice of source
/// should matter.
pub fn transfer_with_uninformative_features(runs: &[SyntheticTransfer]) -> Check {
    let s = transfer_stats(runs);
    Check {
        name: "no transfer with constant features".into(),
        pass: s.delta.abs() < 0.05 && s.gain <= 0.05,
        detail: format!(
            "F->F acc {:.4} vs untrained {:.4}: gain {:+.4} (need <= 0.05); delta(F->F, B->F) {:+.4} (need |.| < 0.05); median of {} seeds",
            s.acc, s.base, s.gain, s.delta, runs.len()
        ),
    }
}

/// Both halves of the feature-gating study.
pub fn transfer_gating(degree: &[SyntheticTransfer], constant: &[SyntheticTransfer]) -> Check {
    let (a, b) = (
        transfer_with_structural_features(degree),
        transfer_with_uninformative_features(constant),
    );
    Check {
        name: "positive transfer and feature gating".into(),
        pass: a.pass && b.pass,
        detail: format!("[{}] [{}]", a, b),
    }
}

pub fn airport_gaps(europe_usa: f64, europe_brazil: f64) -> Check {
    let (ru, rb) = AIRPORT_GAPS;
    let pass = within(europe_usa, ru, AIRPORT_GAP_TOL)
        && within(europe_brazil, rb, AIRPORT_GAP_TOL)
        && (europe_usa - europe_brazil).abs() < AIRPORT_GAP_TOL;
    Check {
        name: "airport gaps".into(),
        pass,
        detail: format!(
            "gap(Europe,USA) = {europe_usa:.4} (ref {ru}), gap(Europe,Brazil) = {europe_brazil:.4} (ref {rb}), \
             tolerance {AIRPORT_GAP_TOL}, difference {:.4}",
            (europe_usa - europe_brazil).abs()
        ),
    }
}

/// `few` and `many` are (mean, std) over repeated sampled estimates.
pub fn sampling_convergence(few: (f64, f64), many: (f64, f64), exact: f64) -> Check {
    let pass = few.1 > many.1 && within(many.0, exact, 0.05);
    Check {
        name: "sampled gap convergence".into(),
        pass,
        detail: format!(
            "100 pairs {:.4} ± {:.4}, 1000 pairs {:.4} ± {:.4}, all pairs {exact:.4}",
            few.0, few.1, many.0, many.1
        ),
    }
}

pub fn k_sweep(gaps: &[f64; 3]) -> Check {
    let increasing = gaps[0] < gaps[1] && gaps[1] < gaps[2];
    let close = gaps.iter().zip(K_SWEEP).all(|(&g, r)| within(g, r, K_SWEEP_TOL));
    Check {
        name: "gap grows with k".into(),
        pass: increasing && close,
        detail: format!(
            "k=1 {:.4}, k=2 {:.4}, k=3 {:.4} (refs {:?} ± {K_SWEEP_TOL})",
            gaps[0], gaps[1], gaps[2], K_SWEEP
        ),
    }
}

/// `report` must list Europe, USA and Brazil in that order.
pub fn airport_transfer(report: &TransferReport) -> Check {
    let r = &report.records;
    if r.len() != 3 {
        return Check {
            name: "airport direct transfer".into(),
            pass: false,
            detail: format!("expected 3 targets, found {}", r.len()),
        };
    }
    let source_ok = r[0].egi.mean >= r[0].untrained.mean;
    let close = r.iter().zip(AIRPORT_ACC).all(|(x, a)| within(x.egi.mean, a, AIRPORT_ACC_TOL));
    let ordered = r.iter().all(|x| x.egi.mean >= x.untrained.mean)
        && r[1].egi.mean > r[1].untrained.mean
        && r[2].egi.mean > r[2].untrained.mean;
    let rows: Vec<String> = r
        .iter()
        .zip(AIRPORT_ACC)
        .map(|(x, a)| {
            format!(
                "{} {:.4}±{:.4} vs untrained {:.4} (ref {a})",
                x.target, x.egi.mean, x.egi.std, x.untrained.mean
            )
        })
        .collect();
    Check {
        name: "airport direct transfer".into(),
        pass: source_ok && (close || ordered),
        detail: format!(
            "{}; within ±{AIRPORT_ACC_TOL}: {close}, ordering holds: {ordered}",
            rows.join(", ")
        ),
    }
}
