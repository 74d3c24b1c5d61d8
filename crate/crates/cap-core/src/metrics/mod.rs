//! AOGM/TRA evaluation of a predicted lineage against a reference.
//!
//! Vertices are per-frame cell instances matched point-to-point within a
//! radius; edges are temporal links of two semantic kinds, track
//! continuation and mother-daughter. The score is the weighted count of the
//! edit operations (ES, EA, ED, ESM, FP, FN) needed to turn the predicted
//! graph into the reference, normalized against the cost of building the
//! reference from nothing.
//!
//! Because this toolkit is mask-free, vertex matching is a minimum-distance
//! one-to-one assignment rather than marker overlap, and ES counts predicted
//! points that sit within the matching radius of two or more reference cells
//! that no other prediction claims — the closest point analogue of splitting
//! a merged marker.

mod assignment;
mod matching;

pub use matching::{frame_instances, match_vertices, FrameMatch, PointInstance, VertexMatch};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lineage::{TrackId, TrackedPoints};

/// Weights of the six edit operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWeights {
    pub w_es: f64,
    pub w_ea: f64,
    pub w_ed: f64,
    pub w_esm: f64,
    pub w_fp: f64,
    pub w_fn: f64,
}

impl Default for MetricWeights {
    /// The conventional weights used with this metric family.
    fn default() -> Self {
        Self {
            w_es: 5.0,
            w_ea: 1.5,
            w_ed: 1.0,
            w_esm: 1.0,
            w_fp: 1.0,
            w_fn: 10.0,
        }
    }
}

impl MetricWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.w_es, self.w_ea, self.w_ed, self.w_esm, self.w_fp, self.w_fn,
        ];
        if all.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::Domain("metric weights must be nonnegative".into()));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(Error::Domain("at least one metric weight must be > 0".into()));
        }
        Ok(())
    }
}

/// Counts of the six correction operations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    /// Predicted vertices that would have to be split (cover >= 2 claimable
    /// reference cells).
    pub es: u64,
    /// Reference edges missing from the prediction.
    pub ea: u64,
    /// Predicted edges with no reference counterpart.
    pub ed: u64,
    /// Matched edges whose semantics differ (continuation vs parent link).
    pub esm: u64,
    /// Predicted vertices with no reference match.
    pub fp: u64,
    /// Reference vertices with no predicted match.
    pub fn_: u64,
}

/// Edge semantics: a link within one track or a mother-to-daughter link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Continuation,
    Parent,
}

/// (track, frame) -> (track, frame+1) edge endpoints.
pub type EdgeKey = ((TrackId, usize), (TrackId, usize));

/// All temporal edges of a tracked point set, keyed by endpoints.
pub fn graph_edges(tp: &TrackedPoints) -> HashMap<EdgeKey, EdgeKind> {
    let mut edges = HashMap::new();
    for track in tp.graph.tracks() {
        for t in track.begin..track.end {
            edges.insert(
                ((track.id, t), (track.id, t + 1)),
                EdgeKind::Continuation,
            );
        }
        if let Some(pid) = track.parent {
            let parent = tp.graph.track(pid).expect("validated parent");
            edges.insert(
                ((pid, parent.end), (track.id, track.begin)),
                EdgeKind::Parent,
            );
        }
    }
    edges
}

/// Counts the edit operations implied by a vertex matching.
///
/// `ref_frames`/`pred_frames` must be the same per-frame instances the match
/// was produced from, and `match_radius` the same radius.
pub fn count_operations(
    ref_frames: &[Vec<PointInstance>],
    pred_frames: &[Vec<PointInstance>],
    ref_tp: &TrackedPoints,
    pred_tp: &TrackedPoints,
    vm: &VertexMatch,
    match_radius: f64,
) -> Result<OpCounts> {
    if vm.frames.len() != ref_frames.len() || vm.frames.len() != pred_frames.len() {
        return Err(Error::Shape(format!(
            "match covers {} frames, instances {}x{}",
            vm.frames.len(),
            ref_frames.len(),
            pred_frames.len()
        )));
    }
    let mut counts = OpCounts::default();

    // Vertex operations.
    let mut ref_to_pred: HashMap<(TrackId, usize), (TrackId, usize)> = HashMap::new();
    let mut pred_to_ref: HashMap<(TrackId, usize), (TrackId, usize)> = HashMap::new();
    for (t, frame) in vm.frames.iter().enumerate() {
        counts.fn_ += frame.unmatched_ref.len() as u64;
        counts.fp += frame.unmatched_pred.len() as u64;
        for &(r, p) in &frame.pairs {
            ref_to_pred.insert((r, t), (p, t));
            pred_to_ref.insert((p, t), (r, t));
        }
    }

    // ES: predicted instances within radius of >= 2 reference instances
    // that are either unmatched or matched to this very prediction.
    for (t, frame) in vm.frames.iter().enumerate() {
        let matched_to: HashMap<TrackId, TrackId> = frame.pairs.iter().copied().collect();
        for p in &pred_frames[t] {
            let mut claimable = 0usize;
            for r in &ref_frames[t] {
                let allowed = matching::effective_radius(r, match_radius);
                let d = ((r.x - p.x).powi(2) + (r.y - p.y).powi(2)).sqrt();
                if d <= allowed {
                    match matched_to.get(&r.id) {
                        None => claimable += 1,
                        Some(&pid) if pid == p.id => claimable += 1,
                        Some(_) => {}
                    }
                }
            }
            if claimable >= 2 {
                counts.es += 1;
            }
        }
    }

    // Edge operations: a reference edge corresponds to a predicted edge when
    // both endpoints are matched and the prediction links the matched pair.
    let ref_edges = graph_edges(ref_tp);
    let pred_edges = graph_edges(pred_tp);
    for ((u, v), kind) in &ref_edges {
        let linked = match (ref_to_pred.get(u), ref_to_pred.get(v)) {
            (Some(a), Some(b)) => pred_edges.get(&(*a, *b)),
            _ => None,
        };
        match linked {
            None => counts.ea += 1,
            Some(pk) if pk != kind => counts.esm += 1,
            Some(_) => {}
        }
    }
    for (a, b) in pred_edges.keys() {
        let has_counterpart = match (pred_to_ref.get(a), pred_to_ref.get(b)) {
            (Some(u), Some(v)) => ref_edges.contains_key(&(*u, *v)),
            _ => false,
        };
        if !has_counterpart {
            counts.ed += 1;
        }
    }
    Ok(counts)
}

/// Weighted sum of the operation counts.
pub fn aogm(counts: &OpCounts, w: &MetricWeights) -> f64 {
    w.w_es * counts.es as f64
        + w.w_ea * counts.ea as f64
        + w.w_ed * counts.ed as f64
        + w.w_esm * counts.esm as f64
        + w.w_fp * counts.fp as f64
        + w.w_fn * counts.fn_ as f64
}

/// Full evaluation output: counts, raw costs, and the normalized score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub counts: OpCounts,
    pub aogm: f64,
    pub aogm_empty: f64,
    pub tra: f64,
}

/// Evaluates a prediction against a reference: matches vertices, counts
/// operations, and computes TRA = 1 - min(AOGM, AOGM_0)/AOGM_0, where
/// AOGM_0 is the cost of building the reference from an empty prediction.
pub fn evaluate(
    ref_tp: &TrackedPoints,
    pred_tp: &TrackedPoints,
    w: &MetricWeights,
    match_radius: f64,
    ref_radius: Option<f64>,
) -> Result<Evaluation> {
    w.validate()?;
    if ref_tp.graph.is_empty() {
        return Err(Error::UndefinedMetric);
    }
    if ref_tp.graph.frame_count() != pred_tp.graph.frame_count() {
        return Err(Error::Shape(format!(
            "reference spans {} frames, prediction {}",
            ref_tp.graph.frame_count(),
            pred_tp.graph.frame_count()
        )));
    }
    let ref_frames = frame_instances(ref_tp, ref_radius);
    let pred_frames = frame_instances(pred_tp, None);
    let vm = match_vertices(&ref_frames, &pred_frames, match_radius)?;
    let counts = count_operations(
        &ref_frames,
        &pred_frames,
        ref_tp,
        pred_tp,
        &vm,
        match_radius,
    )?;
    let cost = aogm(&counts, w);

    // Cost of the empty prediction, computed through the same pipeline.
    let empty_tp = TrackedPoints {
        graph: crate::lineage::LineageGraph::new(Vec::new(), ref_tp.graph.frame_count())?,
        positions: Vec::new(),
    };
    let empty_frames = frame_instances(&empty_tp, None);
    let vm0 = match_vertices(&ref_frames, &empty_frames, match_radius)?;
    let counts0 = count_operations(
        &ref_frames,
        &empty_frames,
        ref_tp,
        &empty_tp,
        &vm0,
        match_radius,
    )?;
    let cost0 = aogm(&counts0, w);
    if cost0 <= 0.0 {
        return Err(Error::UndefinedMetric);
    }
    Ok(Evaluation {
        counts,
        aogm: cost,
        aogm_empty: cost0,
        tra: 1.0 - cost.min(cost0) / cost0,
    })
}

/// TRA score only; see [`evaluate`].
pub fn tra(
    ref_tp: &TrackedPoints,
    pred_tp: &TrackedPoints,
    w: &MetricWeights,
    match_radius: f64,
    ref_radius: Option<f64>,
) -> Result<f64> {
    Ok(evaluate(ref_tp, pred_tp, w, match_radius, ref_radius)?.tra)
}
