//! Trajectory ingestion: CSV parsing, pixel-to-meter calibration, region
//! membership, resampling, and extraction of labeled raw sequences.

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::types::Label;
use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackPoint<S> {
    pub t: S,
    pub x: S,
    pub y: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub track_id: u64,
    pub points: Vec<TrackPoint<S>>,
}

#[derive(Clone, Copy, Debug)]
pub struct Calibration<S> {
    pub meters_per_pixel: S,
}

impl<S: Scalar> Calibration<S> {
    pub fn new(meters_per_pixel: S) -> Result<Self> {
        if meters_per_pixel <= S::zero() || !meters_per_pixel.is_finite() {
            return Err(Error::data("meters_per_pixel must be positive"));
        }
        Ok(Calibration { meters_per_pixel })
    }
}

#[derive(Clone, Debug)]
pub struct RegionSpec<S> {
    pub region_id: String,
    pub polygon: Vec<(S, S)>,
    pub direction_code: u8,
    pub state_code: char,
    pub meters_per_pixel: S,
}

#[derive(Clone, Debug)]
pub struct StateAnnotation<S> {
    pub region_id: String,
    pub start_s: S,
    pub end_s: S,
    pub label: Label,
}

/// One resampled frame: all in-region road users at one grid time.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<S> {
    pub t: S,
    pub users: Vec<(u64, S, S)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawSequence<S> {
    pub region_id: String,
    pub label: Label,
    pub frames: Vec<Frame<S>>,
    pub unique_user_count: usize,
}

const GRID_EPS: f64 = 1e-9;

enum TrajSchema {
    PixelFrame, // frame,track_id,x_px,y_px
    MeterTime,  // t,track_id,x_m,y_m
}

/// Parse a trajectory CSV. The pixel/frame schema needs a frame rate, taken
/// from a `# fps=<n>` comment line or the `fps` argument (argument wins).
pub fn parse_trajectories<S: Scalar>(
    source: impl BufRead,
    cal: Calibration<S>,
    fps: Option<f64>,
) -> Result<Vec<Trajectory<S>>> {
    let mut schema: Option<TrajSchema> = None;
    let mut file_fps: Option<f64> = None;
    // track_id -> time key -> point; last occurrence wins
    let mut tracks: BTreeMap<u64, BTreeMap<i64, (f64, S, S)>> = BTreeMap::new();

    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("fps=") {
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad fps value"))?;
                file_fps = Some(v);
            }
            continue;
        }
        if schema.is_none() {
            schema = Some(match line {
                "frame,track_id,x_px,y_px" => TrajSchema::PixelFrame,
                "t,track_id,x_m,y_m" => TrajSchema::MeterTime,
                _ => return Err(Error::parse(lineno, "unrecognized trajectory header")),
            });
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(lineno, "expected 4 fields"));
        }
        match schema.as_ref().unwrap() {
            TrajSchema::PixelFrame => {
                let rate = fps.or(file_fps).ok_or_else(|| {
                    Error::parse(lineno, "frame-indexed trajectories need a frame rate")
                })?;
                if rate <= 0.0 || !rate.is_finite() {
                    return Err(Error::parse(lineno, "non-positive frame rate"));
                }
                let frame: i64 = fields[0]
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad frame number"))?;
                let id: u64 = fields[1]
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad track id"))?;
                let x_px: f64 = fields[2]
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad x coordinate"))?;
                let y_px: f64 = fields[3]
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad y coordinate"))?;
                if !x_px.is_finite() || !y_px.is_finite() {
                    return Err(Error::parse(lineno, "non-finite coordinate"));
                }
                let t = frame as f64 / rate;
                let x = S::of(x_px) * cal.meters_per_pixel;
                let y = S::of(y_px) * cal.meters_per_pixel;
                tracks.entry(id).or_default().insert(frame, (t, x, y));
            }
            TrajSchema::MeterTime => {
                let t: f64 = fields[0]
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad time"))?;
                let id: u64 = fields[1]
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad track id"))?;
                let x: f64 = fields[2]
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad x coordinate"))?;
                let y: f64 = fields[3]
                    .parse()
                    .map_err(|_| Error::parse(lineno, "bad y coordinate"))?;
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::parse(lineno, "bad time"));
                }
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::parse(lineno, "non-finite coordinate"));
                }
                tracks
                    .entry(id)
                    .or_default()
                    .insert(t.to_bits() as i64, (t, S::of(x), S::of(y)));
            }
        }
    }

    Ok(tracks
        .into_iter()
        .map(|(track_id, pts)| {
            let mut points: Vec<TrackPoint<S>> = pts
                .into_values()
                .map(|(t, x, y)| TrackPoint { t: S::of(t), x, y })
                .collect();
            points.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
            Trajectory { track_id, points }
        })
        .collect())
}

/// Even-odd polygon membership; boundary points count as inside.
pub fn point_in_region<S: Scalar>(p: (S, S), r: &RegionSpec<S>) -> bool {
    let poly = &r.polygon;
    let n = poly.len();
    let (px, py) = p;
    let tol = S::of(1e-9);

    // boundary check
    for i in 0..n {
        let (ax, ay) = poly[i];
        let (bx, by) = poly[(i + 1) % n];
        let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
        if cross.abs() <= tol
            && px >= ax.min(bx) - tol
            && px <= ax.max(bx) + tol
            && py >= ay.min(by) - tol
            && py <= ay.max(by) + tol
        {
            return true;
        }
    }

    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > py) != (yj > py) {
            let x_int = (xj - xi) * (py - yi) / (yj - yi) + xi;
            if px < x_int {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Resample a track to the uniform grid k/rate_hz over its own time range.
/// Positions are linearly interpolated; nothing is extrapolated.
pub fn resample<S: Scalar>(track: &Trajectory<S>, rate_hz: S) -> Result<Trajectory<S>> {
    if rate_hz <= S::zero() || !rate_hz.is_finite() {
        return Err(Error::data("resample rate must be positive"));
    }
    let pts = &track.points;
    if pts.is_empty() {
        return Err(Error::data("cannot resample an empty track"));
    }
    if pts.len() == 1 {
        return Ok(track.clone());
    }
    let t0 = pts.first().unwrap().t.as_f64();
    let t1 = pts.last().unwrap().t.as_f64();
    let rate = rate_hz.as_f64();
    let k0 = (t0 * rate - GRID_EPS).ceil() as i64;
    let k1 = (t1 * rate + GRID_EPS).floor() as i64;

    let mut out = Vec::new();
    let mut seg = 0usize; // index of segment start; pts[seg].t <= t
    for k in k0..=k1 {
        let t = S::of(k as f64) / rate_hz;
        while seg + 2 < pts.len() && pts[seg + 1].t <= t {
            seg += 1;
        }
        let a = &pts[seg];
        let b = &pts[seg + 1];
        let p = if t <= a.t {
            TrackPoint { t: a.t, x: a.x, y: a.y }
        } else if t >= b.t {
            TrackPoint { t: b.t, x: b.x, y: b.y }
        } else {
            let alpha = (t - a.t) / (b.t - a.t);
            TrackPoint {
                t,
                x: a.x + alpha * (b.x - a.x),
                y: a.y + alpha * (b.y - a.y),
            }
        };
        out.push(TrackPoint { t, ..p });
    }
    Ok(Trajectory { track_id: track.track_id, points: out })
}

/// Slice resampled tracks by annotated spatio-temporal region and drop
/// sequences with fewer than `min_users` unique road users.
pub fn extract_sequences<S: Scalar>(
    tracks: &[Trajectory<S>],
    regions: &[RegionSpec<S>],
    annotations: &[StateAnnotation<S>],
    rate_hz: S,
    min_users: usize,
) -> Result<Vec<RawSequence<S>>> {
    let resampled: Vec<Trajectory<S>> = tracks
        .iter()
        .map(|t| resample(t, rate_hz))
        .collect::<Result<_>>()?;
    let rate = rate_hz.as_f64();

    let mut out = Vec::new();
    for ann in annotations {
        let region = regions
            .iter()
            .find(|r| r.region_id == ann.region_id)
            .ok_or_else(|| {
                Error::data(format!("annotation references unknown region `{}`", ann.region_id))
            })?;
        if ann.start_s >= ann.end_s {
            return Err(Error::data(format!(
                "annotation for `{}` has empty time window",
                ann.region_id
            )));
        }

        let k0 = (ann.start_s.as_f64() * rate - GRID_EPS).ceil() as i64;
        let k1 = (ann.end_s.as_f64() * rate + GRID_EPS).floor() as i64;
        if k1 < k0 {
            continue;
        }
        let mut frames: Vec<Frame<S>> = (k0..=k1)
            .map(|k| Frame { t: S::of(k as f64) / rate_hz, users: Vec::new() })
            .collect();
        let mut ids = BTreeSet::new();
        for track in &resampled {
            for p in &track.points {
                let tk = (p.t.as_f64() * rate).round() as i64;
                if tk < k0 || tk > k1 {
                    continue;
                }
                if point_in_region((p.x, p.y), region) {
                    frames[(tk - k0) as usize].users.push((track.track_id, p.x, p.y));
                    ids.insert(track.track_id);
                }
            }
        }
        for f in &mut frames {
            f.users.sort_by_key(|u| u.0);
        }
        if ids.len() < min_users {
            continue;
        }
        out.push(RawSequence {
            region_id: ann.region_id.clone(),
            label: ann.label,
            frames,
            unique_user_count: ids.len(),
        });
    }
    out.sort_by(|a, b| {
        a.region_id
            .cmp(&b.region_id)
            .then(a.frames.first().map(|f| f.t.as_f64()).unwrap_or(0.0).partial_cmp(
                &b.frames.first().map(|f| f.t.as_f64()).unwrap_or(0.0),
            ).unwrap())
    });
    Ok(out)
}

fn segments_properly_intersect<S: Scalar>(a: (S, S), b: (S, S), c: (S, S), d: (S, S)) -> bool {
    let orient = |p: (S, S), q: (S, S), r: (S, S)| -> S {
        (q.0 - p.0) * (r.1 - p.1) - (q.1 - p.1) * (r.0 - p.0)
    };
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    (d1 * d2 < S::zero()) && (d3 * d4 < S::zero())
}

fn validate_region<S: Scalar>(r: &RegionSpec<S>, lineno: usize) -> Result<()> {
    if r.polygon.len() < 3 {
        return Err(Error::parse(lineno, "polygon needs at least 3 vertices"));
    }
    if !(1..=4).contains(&r.direction_code) {
        return Err(Error::parse(lineno, "direction code must be 1..4"));
    }
    if !matches!(r.state_code, 'c' | 'n' | 'u') {
        return Err(Error::parse(lineno, "state code must be c, n, or u"));
    }
    if r.meters_per_pixel <= S::zero() {
        return Err(Error::parse(lineno, "meters_per_pixel must be positive"));
    }
    let n = r.polygon.len();
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex; skip them
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a, b) = (r.polygon[i], r.polygon[(i + 1) % n]);
            let (c, d) = (r.polygon[j], r.polygon[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return Err(Error::parse(lineno, "polygon is self-intersecting"));
            }
        }
    }
    Ok(())
}

/// Region file: whitespace-separated records, one per line:
/// `region_id direction_code state_code meters_per_pixel x1,y1 x2,y2 x3,y3 ...`
pub fn parse_regions<S: Scalar>(source: impl BufRead) -> Result<Vec<RegionSpec<S>>> {
    let mut out = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 7 {
            return Err(Error::parse(lineno, "region record too short"));
        }
        let direction_code: u8 = fields[1]
            .parse()
            .map_err(|_| Error::parse(lineno, "bad direction code"))?;
        let state_code = fields[2]
            .chars()
            .next()
            .filter(|_| fields[2].len() == 1)
            .ok_or_else(|| Error::parse(lineno, "bad state code"))?;
        let mpp: f64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(lineno, "bad meters_per_pixel"))?;
        let mut polygon = Vec::new();
        for v in &fields[4..] {
            let (xs, ys) = v
                .split_once(',')
                .ok_or_else(|| Error::parse(lineno, "bad polygon vertex"))?;
            let x: f64 = xs.parse().map_err(|_| Error::parse(lineno, "bad vertex x"))?;
            let y: f64 = ys.parse().map_err(|_| Error::parse(lineno, "bad vertex y"))?;
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::parse(lineno, "non-finite vertex"));
            }
            polygon.push((S::of(x), S::of(y)));
        }
        let region = RegionSpec {
            region_id: fields[0].to_string(),
            polygon,
            direction_code,
            state_code,
            meters_per_pixel: S::of(mpp),
        };
        validate_region(&region, lineno)?;
        out.push(region);
    }
    Ok(out)
}

/// Annotation CSV: `region_id,start_s,end_s,label`, labels either full words
/// or the single-letter codes.
pub fn parse_annotations<S: Scalar>(source: impl BufRead) -> Result<Vec<StateAnnotation<S>>> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "region_id,start_s,end_s,label" {
                return Err(Error::parse(lineno, "unrecognized annotation header"));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(lineno, "expected 4 fields"));
        }
        let start_s: f64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(lineno, "bad start time"))?;
        let end_s: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(lineno, "bad end time"))?;
        if !(start_s.is_finite() && end_s.is_finite() && start_s < end_s) {
            return Err(Error::parse(lineno, "annotation times must satisfy start < end"));
        }
        let label = Label::parse(fields[3]).map_err(|e| Error::parse(lineno, e.to_string()))?;
        out.push(StateAnnotation {
            region_id: fields[0].to_string(),
            start_s: S::of(start_s),
            end_s: S::of(end_s),
            label,
        });
    }
    Ok(out)
}
