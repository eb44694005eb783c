//! Trace serialization: one JSON object per line, schema-versioned, with
//! keys sorted so identical runs produce identical bytes.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use misalign_core::perception::ObjectClass;
use misalign_core::trace::{NoteRecord, TraceRecord, TRACE_SCHEMA_VERSION};

use crate::error::SimError;

fn class_str(class: Option<ObjectClass>) -> String {
    match class {
        None => "unknown".into(),
        Some(c) => c.to_string(),
    }
}

/// Render one record as a single JSON line (no trailing newline).
pub fn record_to_line(record: &TraceRecord) -> String {
    let value = match record {
        TraceRecord::Packet(p) => json!({
            "v": TRACE_SCHEMA_VERSION,
            "kind": "packet",
            "stream": p.stream,
            "modality": p.modality.to_string(),
            "seq": p.seq,
            "t_act_ns": p.t_act.ns(),
            "t_pre_ns": p.t_pre.ns(),
            "arrival_ns": p.arrival.ns(),
            "frame": p.frame,
            "forged": p.forged,
            "injected": p.injected,
        }),
        TraceRecord::Tuple(t) => {
            let mut fields = Map::new();
            fields.insert("v".into(), json!(TRACE_SCHEMA_VERSION));
            fields.insert("kind".into(), json!("tuple"));
            fields.insert("index".into(), json!(t.index));
            fields.insert("t_sys_ns".into(), json!(t.t_sys.ns()));
            fields.insert("pivot_ns".into(), json!(t.pivot.ns()));
            fields.insert("spread_ns".into(), json!(t.spread.ns()));
            for m in &t.members {
                let p = format!("s{}_", m.stream);
                fields.insert(format!("{p}seq"), json!(m.seq));
                fields.insert(format!("{p}t_act_ns"), json!(m.t_act.ns()));
                fields.insert(format!("{p}t_pre_ns"), json!(m.t_pre.ns()));
                fields.insert(format!("{p}frame"), json!(m.frame));
                fields.insert(format!("{p}offset"), json!(m.content_offset));
                fields.insert(format!("{p}forged"), json!(m.forged));
            }
            Value::Object(fields)
        }
        TraceRecord::Detection(d) => json!({
            "v": TRACE_SCHEMA_VERSION,
            "kind": "detection",
            "t_sys_ns": d.t_sys.ns(),
            "index": d.index,
            "x": d.x,
            "y": d.y,
            "class": class_str(d.class),
            "camera_support": d.camera_support,
            "lidar_support": d.lidar_support,
            "matched_oid": d.matched_oid,
        }),
        TraceRecord::Track(t) => json!({
            "v": TRACE_SCHEMA_VERSION,
            "kind": "track",
            "t_sys_ns": t.t_sys.ns(),
            "tid": t.tid,
            "x": t.x,
            "y": t.y,
            "vx": t.vx,
            "vy": t.vy,
            "age": t.age,
            "class": class_str(t.class),
        }),
        TraceRecord::Note(n) => note_to_value(n),
    };
    serde_json::to_string(&value).expect("trace values are finite and serializable")
}

fn note_to_value(note: &NoteRecord) -> Value {
    match *note {
        NoteRecord::FrameEval { t_sys, true_pos, false_pos, false_neg, gt_alive, detections } => json!({
            "v": TRACE_SCHEMA_VERSION,
            "kind": "note",
            "note": "frame_eval",
            "t_sys_ns": t_sys.ns(),
            "tp": true_pos,
            "fp": false_pos,
            "fn": false_neg,
            "gt": gt_alive,
            "detections": detections,
        }),
        NoteRecord::DuplicateDropped { t_sys, stream, seq, t_pre } => json!({
            "v": TRACE_SCHEMA_VERSION,
            "kind": "note",
            "note": "duplicate_dropped",
            "t_sys_ns": t_sys.ns(),
            "stream": stream,
            "seq": seq,
            "t_pre_ns": t_pre.ns(),
        }),
        NoteRecord::QueueEvicted { t_sys, stream, seq, t_pre } => json!({
            "v": TRACE_SCHEMA_VERSION,
            "kind": "note",
            "note": "queue_evicted",
            "t_sys_ns": t_sys.ns(),
            "stream": stream,
            "seq": seq,
            "t_pre_ns": t_pre.ns(),
        }),
        NoteRecord::HistoryClamped { t_sys, stream, seq, used_frame } => json!({
            "v": TRACE_SCHEMA_VERSION,
            "kind": "note",
            "note": "history_clamped",
            "t_sys_ns": t_sys.ns(),
            "stream": stream,
            "seq": seq,
            "used_frame": used_frame,
        }),
        NoteRecord::IdSwitch { t_sys, oid, old_tid, new_tid } => json!({
            "v": TRACE_SCHEMA_VERSION,
            "kind": "note",
            "note": "id_switch",
            "t_sys_ns": t_sys.ns(),
            "oid": oid,
            "old_tid": old_tid,
            "new_tid": new_tid,
        }),
        NoteRecord::ClockCorrupted { t_sys, stream } => json!({
            "v": TRACE_SCHEMA_VERSION,
            "kind": "note",
            "note": "clock_corrupted",
            "t_sys_ns": t_sys.ns(),
            "stream": stream,
        }),
    }
}

pub fn trace_to_string(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&record_to_line(r));
        out.push('\n');
    }
    out
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<(), SimError> {
    fs::write(path, trace_to_string(records))
        .map_err(|source| SimError::Write { path: path.to_path_buf(), source })
}
