//! Cell identities, trajectories, visibilities, and the acyclic lineage forest.
//!
//! A cell row carries three slots: slot 0 is the cell itself, slots 1 and 2
//! are reserved for its two potential daughters. Per frame the binarized
//! slot pattern is one of four admissible states (undivided, divided with one
//! or two visible daughters, absent), and transitions are irreversible: once
//! a row leaves the undivided state it never returns to it.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Track identifier. Ids are positive; 0 is reserved for "no parent" in
/// on-disk track tables.
pub type TrackId = u32;

/// One track: a cell from its first to its last visible frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackRecord {
    pub id: TrackId,
    /// First frame (0-based, inclusive).
    pub begin: usize,
    /// Last frame (inclusive).
    pub end: usize,
    /// Mother track, if this cell was born by division.
    pub parent: Option<TrackId>,
}

/// Acyclic forest of track records over a fixed number of frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineageGraph {
    tracks: Vec<TrackRecord>,
    frame_count: usize,
}

impl LineageGraph {
    /// Builds a graph and validates all structural invariants: unique
    /// positive ids, frame bounds, parent existence, daughters born exactly
    /// one frame after the mother's last frame, at most two children per
    /// track, and acyclicity (checked by topological sort).
    pub fn new(mut tracks: Vec<TrackRecord>, frame_count: usize) -> Result<Self> {
        tracks.sort_by_key(|t| t.id);
        let graph = Self {
            tracks,
            frame_count,
        };
        graph.validate()?;
        Ok(graph)
    }

    fn validate(&self) -> Result<()> {
        let mut by_id: HashMap<TrackId, &TrackRecord> = HashMap::new();
        for t in &self.tracks {
            if t.id == 0 {
                return Err(Error::Record("track id 0 is reserved".into()));
            }
            if by_id.insert(t.id, t).is_some() {
                return Err(Error::Record(format!("duplicate track id {}", t.id)));
            }
            if t.begin > t.end {
                return Err(Error::Record(format!(
                    "track {}: begin {} > end {}",
                    t.id, t.begin, t.end
                )));
            }
            if t.end >= self.frame_count {
                return Err(Error::Record(format!(
                    "track {}: end {} outside {} frames",
                    t.id, t.end, self.frame_count
                )));
            }
        }
        let mut child_count: HashMap<TrackId, usize> = HashMap::new();
        for t in &self.tracks {
            if let Some(pid) = t.parent {
                let parent = by_id.get(&pid).ok_or_else(|| {
                    Error::Record(format!("track {}: unknown parent {}", t.id, pid))
                })?;
                if parent.end + 1 != t.begin {
                    return Err(Error::Record(format!(
                        "track {}: begin {} is not parent {}'s end {} + 1",
                        t.id, t.begin, pid, parent.end
                    )));
                }
                let n = child_count.entry(pid).or_insert(0);
                *n += 1;
                if *n > 2 {
                    return Err(Error::Record(format!("track {} has >2 children", pid)));
                }
            }
        }
        // Kahn's algorithm over parent->child edges; a leftover node means a
        // cycle (unreachable when child.begin == parent.end + 1, but the
        // check is cheap and guards hand-built inputs).
        let mut indegree: HashMap<TrackId, usize> =
            self.tracks.iter().map(|t| (t.id, 0)).collect();
        for t in &self.tracks {
            if t.parent.is_some() {
                *indegree.get_mut(&t.id).unwrap() += 1;
            }
        }
        let mut queue: Vec<TrackId> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| *id)
            .collect();
        let mut visited = 0usize;
        while let Some(id) = queue.pop() {
            visited += 1;
            for t in &self.tracks {
                if t.parent == Some(id) {
                    let d = indegree.get_mut(&t.id).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        queue.push(t.id);
                    }
                }
            }
        }
        if visited != self.tracks.len() {
            return Err(Error::Record("lineage graph contains a cycle".into()));
        }
        Ok(())
    }

    pub fn tracks(&self) -> &[TrackRecord] {
        &self.tracks
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    pub fn track(&self, id: TrackId) -> Option<&TrackRecord> {
        self.tracks.iter().find(|t| t.id == id)
    }

    pub fn children_of(&self, id: TrackId) -> Vec<&TrackRecord> {
        self.tracks.iter().filter(|t| t.parent == Some(id)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }
}

/// Per-cell, per-frame, 3-slot point locations in pixel units.
///
/// Slot order is (self, D1, D2).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTensor {
    cells: usize,
    frames: usize,
    data: Vec<[f64; 2]>,
}

impl TrajectoryTensor {
    pub fn zeros(cells: usize, frames: usize) -> Self {
        Self {
            cells,
            frames,
            data: vec![[0.0, 0.0]; cells * frames * 3],
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    fn idx(&self, cell: usize, frame: usize, slot: usize) -> usize {
        debug_assert!(cell < self.cells && frame < self.frames && slot < 3);
        (cell * self.frames + frame) * 3 + slot
    }

    #[inline]
    pub fn get(&self, cell: usize, frame: usize, slot: usize) -> (f64, f64) {
        let p = self.data[self.idx(cell, frame, slot)];
        (p[0], p[1])
    }

    #[inline]
    pub fn set(&mut self, cell: usize, frame: usize, slot: usize, x: f64, y: f64) {
        let i = self.idx(cell, frame, slot);
        self.data[i] = [x, y];
    }
}

/// Per-cell, per-frame, 3-slot existence flags: {0,1} for ground truth,
/// [0,1] probabilities for predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityTensor {
    cells: usize,
    frames: usize,
    data: Vec<f64>,
}

impl VisibilityTensor {
    pub fn zeros(cells: usize, frames: usize) -> Self {
        Self {
            cells,
            frames,
            data: vec![0.0; cells * frames * 3],
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    fn idx(&self, cell: usize, frame: usize, slot: usize) -> usize {
        debug_assert!(cell < self.cells && frame < self.frames && slot < 3);
        (cell * self.frames + frame) * 3 + slot
    }

    #[inline]
    pub fn get(&self, cell: usize, frame: usize, slot: usize) -> f64 {
        self.data[self.idx(cell, frame, slot)]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, frame: usize, slot: usize, v: f64) {
        let i = self.idx(cell, frame, slot);
        self.data[i] = v;
    }

    /// Binarized slot triple at `threshold` (visible iff value >= threshold).
    pub fn pattern(&self, cell: usize, frame: usize, threshold: f64) -> [bool; 3] {
        [
            self.get(cell, frame, 0) >= threshold,
            self.get(cell, frame, 1) >= threshold,
            self.get(cell, frame, 2) >= threshold,
        ]
    }
}

/// The four admissible binarized slot states of a cell row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    /// (1,0,0): the cell exists and has not divided.
    Undivided,
    /// (0,1,0): the cell divided and only daughter 1 is visible.
    DividedOne,
    /// (0,1,1): the cell divided and both daughters are visible.
    DividedTwo,
    /// (0,0,0): no cell in this row at this frame.
    Absent,
}

/// Classifies a binarized slot triple; the other four triples are invalid.
pub fn classify_slot_pattern(flags: [bool; 3]) -> Result<PatternKind> {
    match flags {
        [true, false, false] => Ok(PatternKind::Undivided),
        [false, true, false] => Ok(PatternKind::DividedOne),
        [false, true, true] => Ok(PatternKind::DividedTwo),
        [false, false, false] => Ok(PatternKind::Absent),
        [a, b, c] => Err(Error::InvalidPattern(a as u8, b as u8, c as u8)),
    }
}

/// A lineage graph together with each track's per-frame positions
/// (`positions[k][f]` is track `tracks()[k]` at frame `begin + f`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedPoints {
    pub graph: LineageGraph,
    pub positions: Vec<Vec<(f64, f64)>>,
}

/// Reconstructs the lineage graph from point-level records.
///
/// Binarizes `v` at `threshold`; each maximal run of the undivided pattern
/// becomes a track; daughter tracks are opened from the mother's daughter
/// slots when they first become visible, with the mother ending at the frame
/// before. The absent pattern ends a track, and a row that becomes visible
/// again after ending is rejected.
pub fn graph_from_point_records(
    l: &TrajectoryTensor,
    v: &VisibilityTensor,
    threshold: f64,
) -> Result<LineageGraph> {
    Ok(tracked_points_from_records(l, v, threshold)?.graph)
}

/// Like [`graph_from_point_records`], also extracting each track's positions
/// from the slot it resides in.
pub fn tracked_points_from_records(
    l: &TrajectoryTensor,
    v: &VisibilityTensor,
    threshold: f64,
) -> Result<TrackedPoints> {
    if l.cells() != v.cells() || l.frames() != v.frames() {
        return Err(Error::Shape(format!(
            "trajectory {}x{} vs visibility {}x{}",
            l.cells(),
            l.frames(),
            v.cells(),
            v.frames()
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Domain(format!(
            "threshold {threshold} outside (0,1)"
        )));
    }

    struct OpenTrack {
        id: TrackId,
        begin: usize,
        parent: Option<TrackId>,
        slot: usize,
        row: usize,
        positions: Vec<(f64, f64)>,
    }

    let frames = l.frames();
    let mut next_id: TrackId = 1;
    let mut done: Vec<(TrackRecord, Vec<(f64, f64)>)> = Vec::new();

    for row in 0..l.cells() {
        // Per-row state: the open mother, open daughters, and whether each
        // stage has irrevocably ended.
        let mut mother: Option<OpenTrack> = None;
        let mut mother_id: Option<TrackId> = None;
        let mut mother_closed = false;
        let mut d1: Option<OpenTrack> = None;
        let mut d1_closed = false;
        let mut d2: Option<OpenTrack> = None;
        let mut d2_closed = false;
        let mut row_dead = false;

        let mut close =
            |t: OpenTrack, end_frame: usize, done: &mut Vec<(TrackRecord, Vec<(f64, f64)>)>| {
                done.push((
                    TrackRecord {
                        id: t.id,
                        begin: t.begin,
                        end: end_frame,
                        parent: t.parent,
                    },
                    t.positions,
                ));
            };

        for t in 0..frames {
            let kind = classify_slot_pattern(v.pattern(row, t, threshold))?;
            match kind {
                PatternKind::Undivided => {
                    if mother_closed || d1.is_some() || d1_closed || row_dead {
                        return Err(Error::Record(format!(
                            "row {row}: returns to the undivided state at frame {t}"
                        )));
                    }
                    let m = mother.get_or_insert_with(|| {
                        let id = next_id;
                        next_id += 1;
                        mother_id = Some(id);
                        OpenTrack {
                            id,
                            begin: t,
                            parent: None,
                            slot: 0,
                            row,
                            positions: Vec::new(),
                        }
                    });
                    let (x, y) = l.get(m.row, t, m.slot);
                    m.positions.push((x, y));
                }
                PatternKind::DividedOne | PatternKind::DividedTwo => {
                    if row_dead {
                        return Err(Error::Record(format!(
                            "row {row}: daughter slot active after the row ended (frame {t})"
                        )));
                    }
                    if mother.is_none() && mother_id.is_none() {
                        return Err(Error::Record(format!(
                            "row {row}: daughter slot active with no preceding mother (frame {t})"
                        )));
                    }
                    if let Some(m) = mother.take() {
                        // Division: the mother ends at the previous frame.
                        close(m, t - 1, &mut done);
                        mother_closed = true;
                    }
                    if d1_closed {
                        return Err(Error::Record(format!(
                            "row {row}: daughter 1 reappears at frame {t}"
                        )));
                    }
                    let mid = mother_id.expect("mother id set");
                    let dt1 = d1.get_or_insert_with(|| {
                        let id = next_id;
                        next_id += 1;
                        OpenTrack {
                            id,
                            begin: t,
                            parent: Some(mid),
                            slot: 1,
                            row,
                            positions: Vec::new(),
                        }
                    });
                    let (x, y) = l.get(dt1.row, t, dt1.slot);
                    dt1.positions.push((x, y));
                    if kind == PatternKind::DividedTwo {
                        if d2_closed {
                            return Err(Error::Record(format!(
                                "row {row}: daughter 2 reappears at frame {t}"
                            )));
                        }
                        let dt2 = d2.get_or_insert_with(|| {
                            let id = next_id;
                            next_id += 1;
                            OpenTrack {
                                id,
                                begin: t,
                                parent: Some(mid),
                                slot: 2,
                                row,
                                positions: Vec::new(),
                            }
                        });
                        let (x, y) = l.get(dt2.row, t, dt2.slot);
                        dt2.positions.push((x, y));
                    } else if let Some(dt2) = d2.take() {
                        // Daughter 2 went invisible: her track ended.
                        close(dt2, t - 1, &mut done);
                        d2_closed = true;
                    }
                }
                PatternKind::Absent => {
                    if let Some(m) = mother.take() {
                        close(m, t - 1, &mut done);
                        mother_closed = true;
                        row_dead = true;
                    }
                    if let Some(dt1) = d1.take() {
                        close(dt1, t - 1, &mut done);
                        d1_closed = true;
                        row_dead = true;
                    }
                    if let Some(dt2) = d2.take() {
                        close(dt2, t - 1, &mut done);
                        d2_closed = true;
                    }
                    if mother_closed || d1_closed {
                        row_dead = true;
                    }
                }
            }
        }
        let last = frames - 1;
        if let Some(m) = mother.take() {
            close(m, last, &mut done);
        }
        if let Some(dt1) = d1.take() {
            close(dt1, last, &mut done);
        }
        if let Some(dt2) = d2.take() {
            close(dt2, last, &mut done);
        }
    }

    done.sort_by_key(|(r, _)| r.id);
    let positions = done.iter().map(|(_, p)| p.clone()).collect();
    let tracks = done.into_iter().map(|(r, _)| r).collect();
    let graph = LineageGraph::new(tracks, frames)?;
    Ok(TrackedPoints { graph, positions })
}

/// All division events of a graph as (mother id, division frame) pairs,
/// where the division frame is the mother's last frame. Sorted by
/// (frame, mother id).
pub fn division_events(g: &LineageGraph) -> Vec<(TrackId, usize)> {
    let mut events: Vec<(TrackId, usize)> = g
        .tracks()
        .iter()
        .filter(|t| !g.children_of(t.id).is_empty())
        .map(|t| (t.id, t.end))
        .collect();
    events.sort_by_key(|&(id, t)| (t, id));
    events
}
