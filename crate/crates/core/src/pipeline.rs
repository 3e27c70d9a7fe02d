//! End-to-end wiring: raw sequences -> adjacency sequences -> feature
//! tensors, plus reading/writing whole dataset directories.

use crate::error::{Error, Result};
use crate::features::{extract_features, normalize_length, FeatureSequence};
use crate::graph::{build_adjacency, render_image, AdjacencySequence};
use crate::ingest::{
    extract_sequences, parse_annotations, parse_regions, parse_trajectories, Calibration,
    RawSequence,
};
use crate::num::Scalar;
use crate::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PipelineParams {
    /// proximity threshold in meters
    pub mu_m: f64,
    /// sampling rate in Hz
    pub rate_hz: f64,
    pub min_users: usize,
    /// fixed sequence length T
    pub t_len: usize,
    /// adjacency canvas capacity (max users per sequence)
    pub canvas_n: usize,
    /// rendered image side
    pub img_size: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            mu_m: 10.0,
            rate_hz: 5.0,
            min_users: 20,
            t_len: 50,
            canvas_n: 110,
            img_size: 56,
        }
    }
}

pub fn raw_to_adjacency<S: Scalar>(
    raw: &RawSequence<S>,
    mu_m: S,
) -> Result<AdjacencySequence<S>> {
    let mats = raw
        .frames
        .iter()
        .map(|f| build_adjacency(&f.users, mu_m))
        .collect::<Result<Vec<_>>>()?;
    Ok(AdjacencySequence {
        label: raw.label,
        region_id: raw.region_id.clone(),
        mats,
    })
}

/// Full per-sequence pipeline: adjacency, image, pooled features, fixed length.
pub fn sequence_features<S: Scalar>(
    raw: &RawSequence<S>,
    params: &PipelineParams,
) -> Result<FeatureSequence<S>> {
    if raw.frames.is_empty() {
        return Err(Error::data(format!(
            "sequence `{}` has no frames",
            raw.region_id
        )));
    }
    let mu = S::of(params.mu_m);
    let mut vectors = Vec::with_capacity(raw.frames.len());
    for frame in &raw.frames {
        let adj = build_adjacency(&frame.users, mu)?;
        let img = render_image(&adj, params.canvas_n, params.img_size)?;
        vectors.push(extract_features(&img)?);
    }
    Ok(FeatureSequence {
        label: raw.label,
        region_id: raw.region_id.clone(),
        steps: normalize_length(&vectors, params.t_len)?,
    })
}

pub fn dataset_features<S: Scalar>(
    raws: &[RawSequence<S>],
    params: &PipelineParams,
) -> Result<Vec<FeatureSequence<S>>> {
    raws.iter().map(|r| sequence_features(r, params)).collect()
}

pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const REGION_FILE: &str = "regions.txt";
pub const ANNOTATION_FILE: &str = "annotations.csv";

/// spatial offset between consecutive synthetic regions (m)
const REGION_PITCH_M: f64 = 400.0;
/// half-side of each synthetic region box around its center (m)
const REGION_HALF_M: f64 = 120.0;
const TRACK_ID_PITCH: u64 = 100_000;

/// Write generated sequences as the same trajectory/region/annotation files
/// the ingest module consumes. Each sequence gets its own spatially offset
/// region and globally unique track ids.
pub fn write_dataset_files<S: Scalar>(
    dir: &Path,
    seqs: &[RawSequence<S>],
    cfg: &SynthConfig,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut traj = std::io::BufWriter::new(std::fs::File::create(dir.join(TRAJECTORY_FILE))?);
    writeln!(traj, "t,track_id,x_m,y_m")?;
    let mut regions = std::io::BufWriter::new(std::fs::File::create(dir.join(REGION_FILE))?);
    writeln!(regions, "# region_id direction_code state_code meters_per_pixel polygon")?;
    let mut anns = std::io::BufWriter::new(std::fs::File::create(dir.join(ANNOTATION_FILE))?);
    writeln!(anns, "region_id,start_s,end_s,label")?;

    let (cx, cy) = cfg.stop_line;
    for (k, seq) in seqs.iter().enumerate() {
        let dx = k as f64 * REGION_PITCH_M;
        for frame in &seq.frames {
            for &(id, x, y) in &frame.users {
                writeln!(
                    traj,
                    "{},{},{},{}",
                    frame.t.as_f64(),
                    id + k as u64 * TRACK_ID_PITCH,
                    x.as_f64() + dx,
                    y.as_f64()
                )?;
            }
        }
        let (x0, x1) = (cx + dx - REGION_HALF_M, cx + dx + REGION_HALF_M);
        let (y0, y1) = (cy - REGION_HALF_M, cy + REGION_HALF_M);
        writeln!(
            regions,
            "{} {} {} 1 {x0},{y0} {x1},{y0} {x1},{y1} {x0},{y1}",
            seq.region_id,
            k % 4 + 1,
            seq.label.code(),
        )?;
        writeln!(
            anns,
            "{},0,{},{}",
            seq.region_id, cfg.duration_s, seq.label
        )?;
    }
    traj.flush()?;
    regions.flush()?;
    anns.flush()?;
    Ok(())
}

/// Load a dataset directory (the three files above) into raw sequences.
pub fn load_dataset_dir<S: Scalar>(
    dir: &Path,
    rate_hz: f64,
    min_users: usize,
    fps: Option<f64>,
    meters_per_pixel: f64,
) -> Result<Vec<RawSequence<S>>> {
    let open = |name: &str| -> Result<std::io::BufReader<std::fs::File>> {
        Ok(std::io::BufReader::new(std::fs::File::open(dir.join(name))?))
    };
    let cal = Calibration::new(S::of(meters_per_pixel))?;
    let tracks = parse_trajectories(open(TRAJECTORY_FILE)?, cal, fps)?;
    let regions = parse_regions(open(REGION_FILE)?)?;
    let annotations = parse_annotations(open(ANNOTATION_FILE)?)?;
    extract_sequences(&tracks, &regions, &annotations, S::of(rate_hz), min_users)
}
