//! Structured trace records. One record per simulation event of interest;
//! the companion crate renders them as line-delimited objects.

use alloc::vec::Vec;

use crate::perception::ObjectClass;
use crate::pipeline::Modality;
use crate::timebase::{Duration, TimePoint};

/// Bumped when any record's field set changes.
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// A packet arriving at the fusion node's input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    pub stream: u32,
    pub modality: Modality,
    pub seq: u64,
    pub t_act: TimePoint,
    pub t_pre: TimePoint,
    pub arrival: TimePoint,
    pub frame: u64,
    pub forged: bool,
    /// True when the packet was injected directly by an impersonating node
    /// rather than carried by the stream's channel.
    pub injected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TupleMemberRecord {
    pub stream: u32,
    pub seq: u64,
    pub t_act: TimePoint,
    pub t_pre: TimePoint,
    pub frame: u64,
    pub content_offset: i64,
    pub forged: bool,
}

/// One synchronizer emission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleRecord {
    pub index: u64,
    pub t_sys: TimePoint,
    pub pivot: TimePoint,
    pub spread: Duration,
    pub members: Vec<TupleMemberRecord>,
}

/// One fused detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecord {
    pub t_sys: TimePoint,
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub class: Option<ObjectClass>,
    pub camera_support: bool,
    pub lidar_support: bool,
    /// Ground-truth object this detection was scored against, if matched.
    pub matched_oid: Option<u32>,
}

/// One reported track state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub t_sys: TimePoint,
    pub tid: u64,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub age: u32,
    pub class: Option<ObjectClass>,
}

/// Out-of-band events worth keeping next to the data they annotate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoteRecord {
    /// Detection scoring summary for one fused frame.
    FrameEval {
        t_sys: TimePoint,
        true_pos: u64,
        false_pos: u64,
        false_neg: u64,
        gt_alive: u64,
        detections: u64,
    },
    DuplicateDropped { t_sys: TimePoint, stream: u32, seq: u64, t_pre: TimePoint },
    QueueEvicted { t_sys: TimePoint, stream: u32, seq: u64, t_pre: TimePoint },
    /// A stale-content lookback reached past the buffered history.
    HistoryClamped { t_sys: TimePoint, stream: u32, seq: u64, used_frame: u64 },
    IdSwitch { t_sys: TimePoint, oid: u32, old_tid: u64, new_tid: u64 },
    /// A targeted stream's clock was corrupted at attack onset.
    ClockCorrupted { t_sys: TimePoint, stream: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceRecord {
    Packet(PacketRecord),
    Tuple(TupleRecord),
    Detection(DetectionRecord),
    Track(TrackRecord),
    Note(NoteRecord),
}
