//! Detection-quality metrics: instance accuracy, duration accuracy,
//! responsiveness and false-alarm rate, computed from detected Near
//! intervals against ground-truth proximity intervals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::{DetectionEvent, EventKind};
use crate::synth::GroundTruthEvent;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("detections must alternate enter/exit; event {index} breaks the pattern")]
    NonAlternating { index: usize },
    #[error("intervals must be time-ordered and non-overlapping ({what} at index {index})")]
    Overlapping { what: &'static str, index: usize },
}

/// One detected Near stay. `exit` is `None` when the stream ended while the
/// detector was still in the Near/Leaving stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionInterval {
    pub enter: f64,
    pub exit: Option<f64>,
}

impl DetectionInterval {
    fn end_or(&self, span_end: f64) -> f64 {
        self.exit.unwrap_or(span_end)
    }
}

/// A GT-empty stretch of the timeline, the denominator unit of the
/// false-alarm rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmptySegment {
    pub start: f64,
    pub end: f64,
}

/// Full metric report over one stream or a pooled corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Matched detections over ground-truth occurrences; `None` when there is
    /// no ground truth to measure against.
    pub ia: Option<f64>,
    /// Mean clipped overlap ratio over pairs with both boundaries detected.
    pub da: Option<f64>,
    /// Mean |enter delay| over matched pairs.
    pub tau_mean: Option<f64>,
    /// Signed enter delay per matched pair (positive = late).
    pub tau_per_event: Vec<f64>,
    /// False detections over GT-empty segments; `None` without empty segments.
    pub fa: Option<f64>,
    /// Index pairs (gt, detection) of the greedy overlap matching.
    pub matched_pairs: Vec<(usize, usize)>,
    pub n_gt: usize,
    pub n_detections: usize,
    pub n_matched: usize,
    pub n_misses: usize,
    pub n_false_alarms: usize,
    pub n_empty_segments: usize,
    /// Matched pairs that qualified for duration accuracy (closed detections).
    pub n_da_pairs: usize,
}

/// Pairs alternating enter/exit events into Near intervals. A trailing
/// unmatched enter becomes an open interval.
pub fn intervals_from_events(
    events: &[DetectionEvent],
) -> Result<Vec<DetectionInterval>, EvalError> {
    let mut out = Vec::new();
    let mut open: Option<f64> = None;
    for (i, e) in events.iter().enumerate() {
        match (e.kind, open) {
            (EventKind::NearEntered, None) => open = Some(e.t),
            (EventKind::NearExited, Some(enter)) => {
                out.push(DetectionInterval { enter, exit: Some(e.t) });
                open = None;
            }
            _ => return Err(EvalError::NonAlternating { index: i }),
        }
    }
    if let Some(enter) = open {
        out.push(DetectionInterval { enter, exit: None });
    }
    Ok(out)
}

/// Greedy one-to-one matching in time order: a detection matches a GT event
/// iff their intervals overlap. Returns `(gt_index, detection_index)` pairs.
pub fn match_events(
    detections: &[DetectionInterval],
    gt: &[GroundTruthEvent],
    span_end: f64,
) -> Result<Vec<(usize, usize)>, EvalError> {
    check_sorted_detections(detections, span_end)?;
    check_sorted_gt(gt)?;
    let mut pairs = Vec::new();
    let (mut di, mut gi) = (0usize, 0usize);
    while di < detections.len() && gi < gt.len() {
        let d = &detections[di];
        let g = &gt[gi];
        let d_end = d.end_or(span_end);
        if overlap(d.enter, d_end, g.enter_t, g.exit_t) > 0.0 {
            pairs.push((gi, di));
            di += 1;
            gi += 1;
        } else if d_end <= g.enter_t {
            di += 1;
        } else {
            gi += 1;
        }
    }
    Ok(pairs)
}

fn check_sorted_detections(
    detections: &[DetectionInterval],
    span_end: f64,
) -> Result<(), EvalError> {
    for (i, w) in detections.windows(2).enumerate() {
        if w[0].end_or(span_end) > w[1].enter {
            return Err(EvalError::Overlapping { what: "detections", index: i + 1 });
        }
        if w[0].exit.is_none() {
            // only the last interval may be open
            return Err(EvalError::Overlapping { what: "detections", index: i });
        }
    }
    Ok(())
}

fn check_sorted_gt(gt: &[GroundTruthEvent]) -> Result<(), EvalError> {
    for (i, w) in gt.windows(2).enumerate() {
        if w[0].exit_t > w[1].enter_t {
            return Err(EvalError::Overlapping { what: "ground truth", index: i + 1 });
        }
    }
    Ok(())
}

fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// IA = matched detections / ground-truth occurrences.
pub fn instance_accuracy(n_matched: usize, n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        None
    } else {
        Some(n_matched as f64 / n_gt as f64)
    }
}

/// DA for one matched pair: overlap with the GT interval over the GT
/// duration, clipped at 1 — extending a detection beyond the ground truth
/// cannot raise it above 100%. `None` when the GT interval has zero length.
pub fn duration_accuracy(det: &DetectionInterval, gt: &GroundTruthEvent) -> Option<f64> {
    let exit = det.exit?;
    let t_gt = gt.exit_t - gt.enter_t;
    if t_gt <= 0.0 {
        return None;
    }
    Some((overlap(det.enter, exit, gt.enter_t, gt.exit_t) / t_gt).min(1.0))
}

/// Signed enter delay of a matched pair; positive when the detection is late.
pub fn responsiveness(det: &DetectionInterval, gt: &GroundTruthEvent) -> f64 {
    det.enter - gt.enter_t
}

/// FA = detections overlapping no GT event at all, over the number of
/// GT-empty segments. `None` without empty segments.
pub fn false_alarm_rate(
    detections: &[DetectionInterval],
    gt: &[GroundTruthEvent],
    empty_segments: &[EmptySegment],
    span_end: f64,
) -> Option<f64> {
    if empty_segments.is_empty() {
        return None;
    }
    let n_false = count_false_alarms(detections, gt, span_end);
    Some(n_false as f64 / empty_segments.len() as f64)
}

fn count_false_alarms(
    detections: &[DetectionInterval],
    gt: &[GroundTruthEvent],
    span_end: f64,
) -> usize {
    detections
        .iter()
        .filter(|d| {
            let d_end = d.end_or(span_end);
            !gt.iter().any(|g| overlap(d.enter, d_end, g.enter_t, g.exit_t) > 0.0)
        })
        .count()
}

/// GT-free stretches of `[0, span_end]`; the complement of the GT intervals.
pub fn empty_segments(gt: &[GroundTruthEvent], span_end: f64) -> Vec<EmptySegment> {
    let mut out = Vec::new();
    let mut cursor = 0.0;
    for g in gt {
        if g.enter_t > cursor {
            out.push(EmptySegment { start: cursor, end: g.enter_t });
        }
        cursor = cursor.max(g.exit_t);
    }
    if span_end > cursor {
        out.push(EmptySegment { start: cursor, end: span_end });
    }
    out
}

/// Computes the full report for one stream.
pub fn evaluate(
    detections: &[DetectionInterval],
    gt: &[GroundTruthEvent],
    empty: &[EmptySegment],
    span_end: f64,
) -> Result<EvalReport, EvalError> {
    let pairs = match_events(detections, gt, span_end)?;
    let mut taus = Vec::with_capacity(pairs.len());
    let mut da_sum = 0.0;
    let mut da_n = 0usize;
    for &(gi, di) in &pairs {
        taus.push(responsiveness(&detections[di], &gt[gi]));
        if let Some(da) = duration_accuracy(&detections[di], &gt[gi]) {
            da_sum += da;
            da_n += 1;
        }
    }
    let n_false = count_false_alarms(detections, gt, span_end);
    Ok(EvalReport {
        ia: instance_accuracy(pairs.len(), gt.len()),
        da: if da_n > 0 { Some(da_sum / da_n as f64) } else { None },
        tau_mean: if taus.is_empty() {
            None
        } else {
            Some(taus.iter().map(|t| t.abs()).sum::<f64>() / taus.len() as f64)
        },
        tau_per_event: taus,
        fa: if empty.is_empty() { None } else { Some(n_false as f64 / empty.len() as f64) },
        matched_pairs: pairs.clone(),
        n_gt: gt.len(),
        n_detections: detections.len(),
        n_matched: pairs.len(),
        n_misses: gt.len() - pairs.len(),
        n_false_alarms: n_false,
        n_empty_segments: empty.len(),
        n_da_pairs: da_n,
    })
}

/// One stream's inputs for corpus-level evaluation.
pub struct StreamEval<'a> {
    pub detections: &'a [DetectionInterval],
    pub gt: &'a [GroundTruthEvent],
    pub empty: &'a [EmptySegment],
    pub span_end: f64,
}

/// Pools several streams into one report: counts add, per-pair statistics
/// are concatenated before averaging.
pub fn evaluate_corpus(streams: &[StreamEval<'_>]) -> Result<EvalReport, EvalError> {
    let mut taus = Vec::new();
    let mut pairs_all = Vec::new();
    let (mut n_gt, mut n_det, mut n_false, mut n_empty, mut da_n) = (0, 0, 0, 0, 0);
    let mut da_sum = 0.0;
    for s in streams {
        let r = evaluate(s.detections, s.gt, s.empty, s.span_end)?;
        for &(gi, di) in &r.matched_pairs {
            pairs_all.push((n_gt + gi, n_det + di));
        }
        taus.extend_from_slice(&r.tau_per_event);
        if let Some(da) = r.da {
            da_sum += da * r.n_da_pairs as f64;
            da_n += r.n_da_pairs;
        }
        n_gt += r.n_gt;
        n_det += r.n_detections;
        n_false += r.n_false_alarms;
        n_empty += r.n_empty_segments;
    }
    let n_matched = pairs_all.len();
    Ok(EvalReport {
        ia: instance_accuracy(n_matched, n_gt),
        da: if da_n > 0 { Some(da_sum / da_n as f64) } else { None },
        tau_mean: if taus.is_empty() {
            None
        } else {
            Some(taus.iter().map(|t| t.abs()).sum::<f64>() / taus.len() as f64)
        },
        tau_per_event: taus,
        fa: if n_empty > 0 { Some(n_false as f64 / n_empty as f64) } else { None },
        matched_pairs: pairs_all,
        n_gt,
        n_detections: n_det,
        n_matched,
        n_misses: n_gt - n_matched,
        n_false_alarms: n_false,
        n_empty_segments: n_empty,
        n_da_pairs: da_n,
    })
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fn pct(v: Option<f64>) -> String {
            v.map_or("n/a".into(), |x| format!("{:.2}%", 100.0 * x))
        }
        fn secs(v: Option<f64>) -> String {
            v.map_or("n/a".into(), |x| format!("{x:.3}s"))
        }
        writeln!(f, "samples_ia  IA       DA       tau      samples_fa  FA")?;
        writeln!(
            f,
            "{:<11} {:<8} {:<8} {:<8} {:<11} {}",
            self.n_gt,
            pct(self.ia),
            pct(self.da),
            secs(self.tau_mean),
            self.n_empty_segments,
            pct(self.fa),
        )?;
        writeln!(
            f,
            "matched {} / {} GT; {} detections, {} false alarms, {} misses",
            self.n_matched, self.n_gt, self.n_detections, self.n_false_alarms, self.n_misses
        )
    }
}
