//! Per-frame vertex matching between predicted and reference cell instances.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::lineage::{TrackId, TrackedPoints};

use super::assignment::{self, FORBIDDEN};

/// Sub-pixel resolution used when quantizing Euclidean distances to integer
/// assignment costs (1/4096 px).
const COST_SCALE: f64 = 4096.0;

/// One cell instance in one frame. `radius` is the per-cell matching radius
/// of reference instances; predicted instances leave it `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointInstance {
    pub id: TrackId,
    pub x: f64,
    pub y: f64,
    pub radius: Option<f64>,
}

impl PointInstance {
    pub fn new(id: TrackId, x: f64, y: f64) -> Self {
        Self {
            id,
            x,
            y,
            radius: None,
        }
    }
}

/// Matching result for one frame: injective (ref id, pred id) pairs plus
/// the instances left unmatched on each side.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatch {
    pub pairs: Vec<(TrackId, TrackId)>,
    pub unmatched_ref: Vec<TrackId>,
    pub unmatched_pred: Vec<TrackId>,
}

/// Per-frame partial one-to-one map from reference to predicted instances.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexMatch {
    pub frames: Vec<FrameMatch>,
}

fn check_unique_ids(instances: &[PointInstance], side: &str, frame: usize) -> Result<()> {
    let mut seen = HashSet::new();
    for inst in instances {
        if !seen.insert(inst.id) {
            return Err(Error::Format(format!(
                "duplicate {side} id {} in frame {frame}",
                inst.id
            )));
        }
    }
    Ok(())
}

/// Effective pairing radius for a reference instance: the global matching
/// radius, tightened by the instance's own radius when it has one.
pub fn effective_radius(reference: &PointInstance, match_radius: f64) -> f64 {
    match reference.radius {
        Some(r) => match_radius.min(r),
        None => match_radius,
    }
}

fn distance(a: &PointInstance, b: &PointInstance) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Matches predicted to reference instances frame by frame with a
/// minimum-total-distance one-to-one assignment. Pairs farther apart than
/// the reference instance's effective radius are forbidden. Instances are
/// processed in (ref id, pred id) order, so ties between equal-cost
/// assignments resolve deterministically in favor of low-id pairs.
pub fn match_vertices(
    ref_frames: &[Vec<PointInstance>],
    pred_frames: &[Vec<PointInstance>],
    match_radius: f64,
) -> Result<VertexMatch> {
    if ref_frames.len() != pred_frames.len() {
        return Err(Error::Shape(format!(
            "reference has {} frames, prediction {}",
            ref_frames.len(),
            pred_frames.len()
        )));
    }
    if !(match_radius > 0.0) {
        return Err(Error::Domain(format!(
            "match radius {match_radius} must be positive"
        )));
    }
    let mut frames = Vec::with_capacity(ref_frames.len());
    for (f, (refs, preds)) in ref_frames.iter().zip(pred_frames.iter()).enumerate() {
        frames.push(match_frame(refs, preds, match_radius, f)?);
    }
    Ok(VertexMatch { frames })
}

fn match_frame(
    refs: &[PointInstance],
    preds: &[PointInstance],
    match_radius: f64,
    frame: usize,
) -> Result<FrameMatch> {
    check_unique_ids(refs, "reference", frame)?;
    check_unique_ids(preds, "predicted", frame)?;

    let mut refs: Vec<&PointInstance> = refs.iter().collect();
    let mut preds: Vec<&PointInstance> = preds.iter().collect();
    refs.sort_by_key(|r| r.id);
    preds.sort_by_key(|p| p.id);

    let n = refs.len();
    let m = preds.len();
    let mut out = FrameMatch::default();
    if n == 0 || m == 0 {
        out.unmatched_ref = refs.iter().map(|r| r.id).collect();
        out.unmatched_pred = preds.iter().map(|p| p.id).collect();
        return Ok(out);
    }

    let mut cost = vec![FORBIDDEN; n * m];
    for (i, r) in refs.iter().enumerate() {
        let allowed = effective_radius(r, match_radius);
        for (j, p) in preds.iter().enumerate() {
            let d = distance(r, p);
            if d <= allowed {
                cost[i * m + j] = (d * COST_SCALE).round() as i64;
            }
        }
    }

    let assign = assignment::solve(&cost, n, m);
    let mut pred_taken = vec![false; m];
    for (i, a) in assign.iter().enumerate() {
        match a {
            Some(j) => {
                out.pairs.push((refs[i].id, preds[*j].id));
                pred_taken[*j] = true;
            }
            None => out.unmatched_ref.push(refs[i].id),
        }
    }
    for (j, taken) in pred_taken.iter().enumerate() {
        if !taken {
            out.unmatched_pred.push(preds[j].id);
        }
    }
    Ok(out)
}

/// Expands a tracked point set into per-frame instance lists, attaching
/// `radius` to every instance when given.
pub fn frame_instances(tp: &TrackedPoints, radius: Option<f64>) -> Vec<Vec<PointInstance>> {
    let frames = tp.graph.frame_count();
    let mut out = vec![Vec::new(); frames];
    for (k, track) in tp.graph.tracks().iter().enumerate() {
        for (offset, &(x, y)) in tp.positions[k].iter().enumerate() {
            let t = track.begin + offset;
            out[t].push(PointInstance {
                id: track.id,
                x,
                y,
                radius,
            });
        }
    }
    for frame in &mut out {
        frame.sort_by_key(|i| i.id);
    }
    out
}
