//! `traffic-states`: command-line front end for the trajectory -> traffic
//! graph -> recurrent classifier pipeline.

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;
use traffic_states::error::{Error, Result};
use traffic_states::features::SEQ_LEN;
use traffic_states::graph::density;
use traffic_states::harness::{
    evaluate, leave_one_out, run_variants, split, variant_by_name, variants, EvalReport,
    SplitSpec,
};
use traffic_states::io::{
    read_checkpoint, read_tensor_file, write_checkpoint, write_confusion_csv,
    write_confusion_pgm, write_pgm, write_tensor_file, write_training_log, RunManifest,
};
use traffic_states::neural::{init::init_model, train, TrainConfig};
use traffic_states::pipeline::{
    dataset_features, load_dataset_dir, raw_to_adjacency, write_dataset_files, PipelineParams,
    ANNOTATION_FILE, REGION_FILE, TRAJECTORY_FILE,
};
use traffic_states::synth::{generate_dataset, SynthConfig};
use traffic_states::types::Label;
use traffic_states::FeatureSequence;

#[derive(Parser)]
#[command(name = "traffic-states", version, about = "traffic-state identification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct IngestFlags {
    /// dataset directory (trajectories.csv, regions.txt, annotations.csv)
    #[arg(long)]
    data: PathBuf,
    /// proximity threshold in meters
    #[arg(long, default_value_t = 10.0)]
    mu: f64,
    /// resampling rate in Hz
    #[arg(long, default_value_t = 5.0)]
    rate: f64,
    /// minimum unique road users per sequence
    #[arg(long, default_value_t = 20)]
    min_users: usize,
    /// source frame rate when trajectory timestamps are frame numbers
    #[arg(long)]
    fps: Option<f64>,
    /// meters per pixel for pixel-coordinate trajectories
    #[arg(long, default_value_t = 1.0)]
    mpp: f64,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.6)]
    dropout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainFlags {
    fn to_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            batch_size: self.batch,
            recurrent_dropout: self.dropout,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset as trajectory/region/annotation files
    Synth {
        /// sequences per class (neutral, clumping, unclumping)
        #[arg(long, default_value_t = 5)]
        per_class: usize,
        /// position jitter sigma in meters
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest a dataset directory and write the feature tensor file
    Build {
        #[command(flatten)]
        ingest: IngestFlags,
        /// fixed sequence length T
        #[arg(long, default_value_t = SEQ_LEN)]
        frames: usize,
        /// adjacency canvas capacity (max users)
        #[arg(long, default_value_t = 110)]
        canvas: usize,
        /// rendered image side in pixels
        #[arg(long, default_value_t = 56)]
        img: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one network variant on a feature tensor file
    Train {
        #[arg(long)]
        tensors: PathBuf,
        /// Table II variant name, e.g. GRU-A(100,50)
        #[arg(long, default_value = "GRU-A(100,50)")]
        variant: String,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the seeded test partition (or the whole file)
    Eval {
        #[arg(long)]
        tensors: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// split seed used during training
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// evaluate every sequence instead of the test partition
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and compare all seven network variants
    Variants {
        #[arg(long)]
        tensors: PathBuf,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-intersection-out protocol over named tensor files
    Loio {
        /// repeated NAME=TENSOR_FILE pairs
        #[arg(long, required = true)]
        data: Vec<String>,
        #[arg(long, default_value = "GRU-A(100,50)")]
        variant: String,
        #[command(flatten)]
        train: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump per-frame adjacency matrices as PGM images plus a density CSV
    DumpAdjacency {
        #[command(flatten)]
        ingest: IngestFlags,
        /// region id to dump (default: first sequence)
        #[arg(long)]
        region: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_report(title: &str, report: &EvalReport) {
    println!("{title}: total accuracy {:.4} over {} samples", report.total, report.confusion.total());
    for (c, label) in Label::ALL.iter().enumerate() {
        println!("  {label}: {:.4} (n = {})", report.per_class[c], report.confusion.row_sum(c));
    }
}

fn load_sequences(ingest: &IngestFlags) -> Result<Vec<traffic_states::RawSequence>> {
    load_dataset_dir(&ingest.data, ingest.rate, ingest.min_users, ingest.fps, ingest.mpp)
}

fn ingest_inputs(manifest: &mut RunManifest, ingest: &IngestFlags) -> Result<()> {
    for name in [TRAJECTORY_FILE, REGION_FILE, ANNOTATION_FILE] {
        manifest.add_input(&ingest.data.join(name))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { per_class, noise, seed, out } => {
            let cfg = SynthConfig { noise_sigma: noise, seed, ..Default::default() };
            let seqs = generate_dataset::<f64>([per_class; 3], &cfg, seed)?;
            write_dataset_files(&out, &seqs, &cfg)?;
            let manifest = RunManifest::new("synth", json!({"per_class": per_class, "synth": cfg}), seed);
            manifest.write(&out)?;
            println!("wrote {} sequences to {}", seqs.len(), out.display());
        }
        Command::Build { ingest, frames, canvas, img, out } => {
            let params = PipelineParams {
                mu_m: ingest.mu,
                rate_hz: ingest.rate,
                min_users: ingest.min_users,
                t_len: frames,
                canvas_n: canvas,
                img_size: img,
            };
            let raws = load_sequences(&ingest)?;
            let feats = dataset_features(&raws, &params)?;
            std::fs::create_dir_all(&out)?;
            write_tensor_file(&out.join("features.bin"), &feats)?;
            let mut manifest = RunManifest::new(
                "build",
                json!({"pipeline": params, "fps": ingest.fps, "meters_per_pixel": ingest.mpp}),
                0,
            );
            ingest_inputs(&mut manifest, &ingest)?;
            manifest.write(&out)?;
            println!("built {} feature sequences (T = {frames}) into {}", feats.len(), out.display());
        }
        Command::Train { tensors, variant, train: tf, out } => {
            let data: Vec<FeatureSequence> = read_tensor_file(&tensors)?;
            let input_dim = data
                .first()
                .map(|s| s.steps.cols())
                .ok_or_else(|| Error::data("tensor file is empty"))?;
            let spec = variant_by_name(&variant, input_dim)?;
            let tc = tf.to_config();
            let (train_set, val_set, test_set) = split(&data, &SplitSpec::new(tc.seed));
            let model = init_model::<f64>(&spec.config, tc.seed)?;
            let (trained, log) = train(model, &train_set, &val_set, &tc)?;
            let report = evaluate(&trained, &test_set)?;
            std::fs::create_dir_all(&out)?;
            write_checkpoint(&out.join("model.ckpt"), &trained)?;
            write_training_log(&out.join("training_log.csv"), &log)?;
            write_confusion_csv(&out.join("confusion.csv"), &report.confusion)?;
            let mut manifest = RunManifest::new(
                "train",
                json!({"variant": spec.name, "model": spec.config, "train": tc}),
                tc.seed,
            );
            manifest.add_input(&tensors)?;
            manifest.write(&out)?;
            print_report(spec.name, &report);
        }
        Command::Eval { tensors, checkpoint, seed, full, out } => {
            let data: Vec<FeatureSequence> = read_tensor_file(&tensors)?;
            let model = read_checkpoint::<f64>(&checkpoint)?;
            let test_set = if full {
                data
            } else {
                split(&data, &SplitSpec::new(seed)).2
            };
            let report = evaluate(&model, &test_set)?;
            std::fs::create_dir_all(&out)?;
            write_confusion_csv(&out.join("confusion.csv"), &report.confusion)?;
            write_confusion_pgm(&out.join("confusion.pgm"), &report.confusion)?;
            let mut manifest =
                RunManifest::new("eval", json!({"full": full, "model": model.config}), seed);
            manifest.add_input(&tensors)?;
            manifest.add_input(&checkpoint)?;
            manifest.write(&out)?;
            print_report(if full { "full set" } else { "test partition" }, &report);
        }
        Command::Variants { tensors, train: tf, out } => {
            let data: Vec<FeatureSequence> = read_tensor_file(&tensors)?;
            let input_dim = data
                .first()
                .map(|s| s.steps.cols())
                .ok_or_else(|| Error::data("tensor file is empty"))?;
            let tc = tf.to_config();
            let specs = variants(input_dim);
            let results = run_variants(&data, &specs, &tc, &SplitSpec::new(tc.seed))?;
            std::fs::create_dir_all(&out)?;
            let mut body = String::from("variant,neutral,clumping,unclumping,total\n");
            for r in &results {
                let p = r.report.per_class;
                body.push_str(&format!(
                    "\"{}\",{},{},{},{}\n",
                    r.name, p[0], p[1], p[2], r.report.total
                ));
                print_report(r.name, &r.report);
            }
            std::fs::write(out.join("variants.csv"), body)?;
            let mut manifest = RunManifest::new("variants", json!({"train": tc}), tc.seed);
            manifest.add_input(&tensors)?;
            manifest.write(&out)?;
        }
        Command::Loio { data, variant, train: tf, out } => {
            let tc = tf.to_config();
            let mut sets = Vec::new();
            let mut inputs = Vec::new();
            for entry in &data {
                let (name, path) = entry
                    .split_once('=')
                    .ok_or_else(|| Error::data(format!("expected NAME=FILE, got `{entry}`")))?;
                let seqs: Vec<FeatureSequence> = read_tensor_file(path.as_ref())?;
                sets.push((name.to_string(), seqs));
                inputs.push(PathBuf::from(path));
            }
            let input_dim = sets
                .iter()
                .find_map(|(_, d)| d.first().map(|s| s.steps.cols()))
                .ok_or_else(|| Error::data("all tensor files are empty"))?;
            let spec = variant_by_name(&variant, input_dim)?;
            let result = leave_one_out(&sets, &spec.config, &tc, tc.seed)?;
            std::fs::create_dir_all(&out)?;
            let mut body = format!("train\\test,{}\n", result.names.join(","));
            for (i, name) in result.names.iter().enumerate() {
                let row: Vec<String> =
                    result.accuracy[i].iter().map(|a| a.to_string()).collect();
                body.push_str(&format!("{name},{}\n", row.join(",")));
                println!("trained on {name}: {:?}", result.accuracy[i]);
            }
            std::fs::write(out.join("loio.csv"), body)?;
            let mut manifest = RunManifest::new(
                "loio",
                json!({"variant": spec.name, "model": spec.config, "train": tc}),
                tc.seed,
            );
            for path in &inputs {
                manifest.add_input(path)?;
            }
            manifest.write(&out)?;
        }
        Command::DumpAdjacency { ingest, region, out } => {
            let raws = load_sequences(&ingest)?;
            let raw = match &region {
                Some(id) => raws
                    .iter()
                    .find(|r| &r.region_id == id)
                    .ok_or_else(|| Error::data(format!("no sequence for region `{id}`")))?,
                None => raws.first().ok_or_else(|| Error::data("no sequences in dataset"))?,
            };
            let adj = raw_to_adjacency(raw, ingest.mu)?;
            std::fs::create_dir_all(&out)?;
            let mut csv = String::from("frame,t,density\n");
            for (k, mat) in adj.mats.iter().enumerate() {
                let side = mat.w.rows();
                let values: Vec<f64> = mat.w.data().to_vec();
                write_pgm(&out.join(format!("frame_{k:04}.pgm")), side, side, &values)?;
                csv.push_str(&format!("{k},{},{}\n", raw.frames[k].t, density(mat)));
            }
            std::fs::write(out.join("density.csv"), csv)?;
            let mut manifest = RunManifest::new(
                "dump-adjacency",
                json!({"region": raw.region_id, "mu": ingest.mu, "rate": ingest.rate}),
                0,
            );
            ingest_inputs(&mut manifest, &ingest)?;
            manifest.write(&out)?;
            println!("dumped {} frames for region {}", adj.mats.len(), raw.region_id);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit code 0
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
