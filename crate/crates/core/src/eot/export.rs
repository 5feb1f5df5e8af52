use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tracker::{HistoryEntry, Track, TrackHistory, TrackStatus};
use crate::geometry::io::{column_map, csv_error, csv_reader, csv_writer, finish, parse_f64, write_header};
use crate::geometry::{BehaviorLabel, LabeledCloud, LabeledPoint};
use crate::{Error, Result};

/// Default curvature threshold for trajectory labels, rad/m.
pub const DEFAULT_ETA: f64 = 0.01;
/// States slower than this are not labeled, m/s.
pub const DEFAULT_V_MIN: f64 = 0.5;

/// Label from the path curvature `κ = φ̇ / v`; `None` below `v_min`.
pub fn label_from_curvature(phi_dot: f64, v: f64, eta: f64, v_min: f64) -> Option<BehaviorLabel> {
    if !(v > v_min) {
        return None;
    }
    let kappa = phi_dot / v;
    Some(if kappa > eta {
        BehaviorLabel::LeftTurn
    } else if kappa < -eta {
        BehaviorLabel::RightTurn
    } else {
        BehaviorLabel::Straight
    })
}

/// Emits every entry's points with the label of that entry's state, z = 0.
pub fn label_track_points(track: &TrackHistory, eta: f64, v_min: f64) -> LabeledCloud {
    let mut out = LabeledCloud::new();
    for e in &track.entries {
        if let Some(label) = label_from_curvature(e.state[5], e.state[2], eta, v_min) {
            out.points.extend(e.points.iter().map(|p| LabeledPoint::new(p[0], p[1], 0.0, label)));
        }
    }
    out
}

/// Which confirmed tracks feed the source cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    All,
    Ids(Vec<u64>),
    /// `count` tracks drawn without replacement; all if fewer exist.
    Random {
        count: usize,
        seed: u64,
    },
}

/// Resolves a selection against the tracks that were ever confirmed,
/// returning them in ascending id order.
pub fn select_tracks<'a>(tracks: &'a [TrackHistory], selection: &Selection) -> Result<Vec<&'a TrackHistory>> {
    let mut confirmed: Vec<&TrackHistory> = tracks.iter().filter(|t| t.was_confirmed()).collect();
    confirmed.sort_by_key(|t| t.id);
    match selection {
        Selection::All => Ok(confirmed),
        Selection::Ids(ids) => {
            if ids.is_empty() {
                return Err(Error::InvalidParameter("empty track selection".into()));
            }
            Ok(confirmed.into_iter().filter(|t| ids.contains(&t.id)).collect())
        }
        Selection::Random { count, seed } => {
            if *count == 0 {
                return Err(Error::InvalidParameter("empty track selection".into()));
            }
            if *count >= confirmed.len() {
                return Ok(confirmed);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut picked = rand::seq::index::sample(&mut rng, confirmed.len(), *count).into_vec();
            picked.sort_unstable();
            Ok(picked.into_iter().map(|i| confirmed[i]).collect())
        }
    }
}

/// Concatenated labeled points of the selected confirmed tracks.
pub fn export_source_cloud(tracks: &[TrackHistory], selection: &Selection, eta: f64, v_min: f64) -> Result<LabeledCloud> {
    let mut out = LabeledCloud::new();
    for t in select_tracks(tracks, selection)? {
        out.extend_from(&label_track_points(t, eta, v_min));
    }
    Ok(out)
}

pub fn histories(tracks: &[Track]) -> Vec<TrackHistory> {
    tracks.iter().map(|t| t.history.clone()).collect()
}

#[derive(Serialize, Deserialize)]
struct HistoryRecord {
    track_id: u64,
    timestamp: f64,
    state: [f64; 6],
    radii: Vec<f64>,
    status: TrackStatus,
    points: usize,
}

/// One JSON object per line and history entry, ordered by track id then time.
pub fn write_track_history(path: impl AsRef<Path>, tracks: &[TrackHistory]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut sorted: Vec<&TrackHistory> = tracks.iter().collect();
    sorted.sort_by_key(|t| t.id);
    for t in sorted {
        for e in &t.entries {
            let rec = HistoryRecord {
                track_id: t.id,
                timestamp: e.timestamp,
                state: e.state,
                radii: e.radii.clone(),
                status: e.status,
                points: e.points.len(),
            };
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Associated points as CSV `track_id,timestamp,x,y`.
pub fn write_track_points(path: impl AsRef<Path>, tracks: &[TrackHistory]) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv_writer(path)?;
    write_header(&mut wtr, path, &["track_id", "timestamp", "x", "y"])?;
    let mut sorted: Vec<&TrackHistory> = tracks.iter().collect();
    sorted.sort_by_key(|t| t.id);
    for t in sorted {
        for e in &t.entries {
            for p in &e.points {
                wtr.serialize((t.id, e.timestamp, p[0], p[1])).map_err(|e| csv_error(path, e))?;
            }
        }
    }
    finish(wtr, path)
}

/// Reads histories written by [`write_track_history`] and attaches the points
/// from [`write_track_points`].
pub fn read_tracks(history_path: impl AsRef<Path>, points_path: impl AsRef<Path>) -> Result<Vec<TrackHistory>> {
    let hp = history_path.as_ref();
    let file = std::fs::File::open(hp).map_err(|e| Error::io(hp, e))?;
    let mut tracks: BTreeMap<u64, TrackHistory> = BTreeMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(hp, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: HistoryRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(hp, n as u64 + 1, e.to_string()))?;
        let t = tracks.entry(rec.track_id).or_insert_with(|| TrackHistory {
            id: rec.track_id,
            entries: Vec::new(),
        });
        if t.entries.last().is_some_and(|e| e.timestamp >= rec.timestamp) {
            return Err(Error::parse(hp, n as u64 + 1, "timestamps of a track must increase"));
        }
        t.entries.push(HistoryEntry {
            timestamp: rec.timestamp,
            state: rec.state,
            radii: rec.radii,
            status: rec.status,
            points: Vec::with_capacity(rec.points),
        });
    }

    let pp = points_path.as_ref();
    let mut rdr = csv_reader(pp)?;
    let headers = rdr.headers().map_err(|e| csv_error(pp, e))?.clone();
    let [ci, ct, cx, cy] = column_map(pp, &headers, ["track_id", "timestamp", "x", "y"])?;
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(pp, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id: u64 = record
            .get(ci)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(pp, line, "bad track_id"))?;
        let t = parse_f64(pp, &record, ct, "timestamp")?;
        let p = [parse_f64(pp, &record, cx, "x")?, parse_f64(pp, &record, cy, "y")?];
        let entry = tracks
            .get_mut(&id)
            .and_then(|h| h.entries.iter_mut().find(|e| e.timestamp == t))
            .ok_or_else(|| Error::parse(pp, line, format!("no history entry for track {id} at {t}")))?;
        entry.points.push(p);
    }
    Ok(tracks.into_values().collect())
}
