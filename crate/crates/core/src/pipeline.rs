//! Batch stages behind the command-line tool: synthesize or load a scene,
//! extract the feature blocks, classify, score and render.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classify::{evaluate, nn_classify, rf_classify, ForestParams, Metrics};
use crate::config::PipelineConfig;
use crate::cube_io::synth::generate_synthetic;
use crate::cube_io::{
    load_cube, load_features, load_labels, load_samples, save_cube, save_features, save_labels, save_samples, DataType,
    FeatureMatrix, HyperCube, Interleave, LabelMap, SampleSet, Stage,
};
use crate::error::{IapError, Result};
use crate::io_util::write_atomic;
use crate::numerics::pca::PcaModel;
use crate::profile::{assemble_iap, extract_blocks, reduce, stack_standardized, Extraction, IapConfig};
use crate::render::save_png;

/// The rows of an ablation study, from spectra alone to the full profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureSet {
    Osf,
    Sif,
    Fif,
    OsfSif,
    /// `[OSF | SIF | FIF]` without reduction.
    NoDr,
    /// The reduced profile.
    Iap,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 6] = [
        FeatureSet::Osf,
        FeatureSet::Sif,
        FeatureSet::Fif,
        FeatureSet::OsfSif,
        FeatureSet::NoDr,
        FeatureSet::Iap,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FeatureSet::Osf => "osf",
            FeatureSet::Sif => "sif",
            FeatureSet::Fif => "fif",
            FeatureSet::OsfSif => "osf+sif",
            FeatureSet::NoDr => "nodr",
            FeatureSet::Iap => "iap",
        }
    }

    /// File stem of the matrix this set is read from.
    fn stem(&self) -> &'static str {
        match self {
            FeatureSet::Osf => "osf",
            FeatureSet::Sif => "sif",
            FeatureSet::Fif => "fif",
            FeatureSet::OsfSif => "osf_sif",
            FeatureSet::NoDr => "iap",
            FeatureSet::Iap => "reduced",
        }
    }
}

impl FromStr for FeatureSet {
    type Err = IapError;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| IapError::invalid(format!("unknown feature set `{s}`")))
    }
}

/// A scene ready for extraction.
#[derive(Clone, Debug)]
pub struct Input {
    pub cube: HyperCube,
    pub labels: Option<LabelMap>,
    pub samples: Option<SampleSet>,
}

/// Loads the `[data]` files or renders the `[scene]`.
pub fn load_input(cfg: &PipelineConfig) -> Result<Input> {
    if let Some(scene) = &cfg.scene {
        let (cube, labels, samples) = generate_synthetic(scene, cfg.substream("synth"))?;
        return Ok(Input {
            cube,
            labels: Some(labels),
            samples: Some(samples),
        });
    }
    let data = cfg.data.as_ref().ok_or_else(|| IapError::Config {
        line: None,
        message: "a [data] or [scene] section is required".into(),
    })?;
    let cube = load_cube(&data.header, &data.raw)?;
    let labels = match (&data.labels_header, &data.labels_raw) {
        (Some(h), Some(r)) => Some(load_labels(h, r)?),
        (None, None) => None,
        _ => {
            return Err(IapError::Config {
                line: None,
                message: "labels_header and labels_raw must be given together".into(),
            })
        }
    };
    let samples = match &data.samples {
        Some(p) => {
            let s = load_samples(p)?;
            s.validate(cube.pixels()).map_err(|e| IapError::Config {
                line: None,
                message: format!("{}: {e}", p.display()),
            })?;
            Some(s)
        }
        None => None,
    };
    Ok(Input { cube, labels, samples })
}

/// Everything one extraction run produces.
#[derive(Clone, Debug)]
pub struct Features {
    pub blocks: Extraction,
    pub iap: FeatureMatrix,
    pub reduced: FeatureMatrix,
    pub pca: PcaModel,
}

impl Features {
    /// The matrix a given ablation row classifies.
    pub fn select(&self, set: FeatureSet) -> Result<FeatureMatrix> {
        Ok(match set {
            FeatureSet::Osf => self.blocks.osf.clone(),
            FeatureSet::Sif => self.blocks.sif.clone(),
            FeatureSet::Fif => self.blocks.fif.clone(),
            FeatureSet::OsfSif => stack_standardized(&[&self.blocks.osf, &self.blocks.sif])?,
            FeatureSet::NoDr => self.iap.clone(),
            FeatureSet::Iap => self.reduced.clone(),
        })
    }
}

fn timed<T>(stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    log::info!("{stage}: {:.3} s", start.elapsed().as_secs_f64());
    out
}

pub fn extract_features(cube: &HyperCube, iap: &IapConfig, cfg: &PipelineConfig) -> Result<Features> {
    let blocks = timed("grouping, SIF and FIF", || {
        extract_blocks(cube, iap, &cfg.slic, cfg.substream("grouping"))
    })?;
    let stacked = timed("stacking", || assemble_iap(&blocks.osf, &blocks.sif, &blocks.fif))?;
    let (reduced, pca) = timed("reduction", || reduce(&stacked, iap.reduced_dim))?;
    Ok(Features {
        blocks,
        iap: stacked,
        reduced,
        pca,
    })
}

fn features_dir(out: &Path) -> PathBuf {
    out.join("features")
}

/// Writes every feature matrix with its sidecar.
pub fn write_features(out: &Path, f: &Features, hash: &str) -> Result<()> {
    let dir = features_dir(out);
    save_features(&dir.join("osf"), &f.blocks.osf, hash)?;
    save_features(&dir.join("sif"), &f.blocks.sif, hash)?;
    save_features(&dir.join("fif"), &f.blocks.fif, hash)?;
    save_features(&dir.join("iap"), &f.iap, hash)?;
    save_features(&dir.join("reduced"), &f.reduced, hash)?;
    let g: Vec<String> = f.blocks.grouping.assignment().iter().map(|g| g.to_string()).collect();
    write_atomic(&out.join("grouping.txt"), format!("{}\n", g.join(" ")).as_bytes())?;
    let sp = &f.blocks.superpixels;
    save_labels(
        sp.to_label_map().labels(),
        sp.width(),
        sp.height(),
        &out.join("superpixels.hdr"),
        &out.join("superpixels.raw"),
    )
}

fn output_dir(cfg: &PipelineConfig) -> Result<PathBuf> {
    cfg.run.out.clone().ok_or_else(|| IapError::Config {
        line: None,
        message: "no output directory: pass --out or set [run] out".into(),
    })
}

/// `extract`: load, extract, write all feature matrices.
pub fn cmd_extract(cfg: &PipelineConfig) -> Result<Features> {
    let out = output_dir(cfg)?;
    let input = timed("loading", || load_input(cfg))?;
    let features = extract_features(&input.cube, &cfg.iap, cfg)?;
    timed("writing features", || write_features(&out, &features, &cfg.hash()))?;
    Ok(features)
}

/// Predictions for every pixel plus scores on the test split.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub nn_map: Vec<u32>,
    pub rf_map: Vec<u32>,
    pub nn: Metrics,
    pub rf: Metrics,
}

/// Trains 1-NN and the forest on the training split and scores the test split.
pub fn evaluate_features(x: &FeatureMatrix, samples: &SampleSet, forest: &ForestParams) -> Result<Evaluation> {
    samples.validate(x.rows())?;
    if samples.train.is_empty() || samples.test.is_empty() {
        return Err(IapError::invalid("the manifest needs both train and test samples"));
    }
    let train_idx: Vec<usize> = samples.train.iter().map(|s| s.0).collect();
    let train_y: Vec<u32> = samples.train.iter().map(|s| s.1).collect();
    let train = x.select_rows(&train_idx);
    let nn_map = timed("nearest neighbour", || nn_classify(&train, &train_y, x))?;
    let rf_map = timed("random forest", || rf_classify(&train, &train_y, x, forest))?;
    let truth: Vec<u32> = samples.test.iter().map(|s| s.1).collect();
    let pick = |map: &[u32]| samples.test.iter().map(|s| map[s.0]).collect::<Vec<u32>>();
    Ok(Evaluation {
        nn: evaluate(&pick(&nn_map), &truth)?,
        rf: evaluate(&pick(&rf_map), &truth)?,
        nn_map,
        rf_map,
    })
}

pub fn forest_params(cfg: &PipelineConfig) -> ForestParams {
    ForestParams {
        seed: cfg.substream("forest"),
        ..cfg.forest.clone()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ClassifyOptions {
    /// Evaluate one ablation row instead of the reduced profile.
    pub ablate: Option<FeatureSet>,
    /// Accept matrices that are not at the REDUCED stage.
    pub raw: bool,
    /// Explicit feature stem; defaults to `<out>/features/<set>`.
    pub features: Option<PathBuf>,
}

fn write_evaluation(out: &Path, tag: &str, eval: &Evaluation, width: usize, height: usize) -> Result<()> {
    let title = |c: &str| format!("{c} on {tag} features");
    write_atomic(
        &out.join(format!("metrics_{tag}_nn.txt")),
        eval.nn.render(&title("NN")).as_bytes(),
    )?;
    write_atomic(
        &out.join(format!("metrics_{tag}_rf.txt")),
        eval.rf.render(&title("RF")).as_bytes(),
    )?;
    for (name, map) in [("nn", &eval.nn_map), ("rf", &eval.rf_map)] {
        save_labels(
            map,
            width,
            height,
            &out.join(format!("pred_{tag}_{name}.hdr")),
            &out.join(format!("pred_{tag}_{name}.raw")),
        )?;
        save_png(map, width, height, &out.join(format!("map_{tag}_{name}.png")))?;
    }
    Ok(())
}

/// `classify`: reads extracted features from the output directory and
/// evaluates NN and RF.
pub fn cmd_classify(cfg: &PipelineConfig, opts: &ClassifyOptions) -> Result<Evaluation> {
    let out = output_dir(cfg)?;
    let input = load_input(cfg)?;
    let samples = require_samples(cfg, &input)?;
    let set = opts.ablate.unwrap_or(FeatureSet::Iap);
    let x = match &opts.features {
        Some(stem) => read_checked(stem, cfg)?,
        None if set == FeatureSet::OsfSif => {
            let osf = read_checked(&features_dir(&out).join("osf"), cfg)?;
            let sif = read_checked(&features_dir(&out).join("sif"), cfg)?;
            stack_standardized(&[&osf, &sif])?
        }
        None => read_checked(&features_dir(&out).join(set.stem()), cfg)?,
    };
    if x.stage() != Stage::Reduced && !opts.raw && opts.ablate.is_none() {
        return Err(IapError::invalid(format!(
            "features are at stage {}, not REDUCED; pass --raw to classify them anyway",
            x.stage()
        )));
    }
    if x.rows() != input.cube.pixels() {
        return Err(IapError::dims(format!(
            "{} feature rows for a scene of {} pixels",
            x.rows(),
            input.cube.pixels()
        )));
    }
    let eval = evaluate_features(&x, samples, &forest_params(cfg))?;
    write_evaluation(&out, set.stem(), &eval, input.cube.width(), input.cube.height())?;
    Ok(eval)
}

fn read_checked(stem: &Path, cfg: &PipelineConfig) -> Result<FeatureMatrix> {
    let (x, hash) = load_features(stem)?;
    if hash != cfg.hash() {
        log::warn!(
            "{} was extracted under config {hash}, current config is {}",
            stem.display(),
            cfg.hash()
        );
    }
    Ok(x)
}

fn require_samples<'a>(cfg: &PipelineConfig, input: &'a Input) -> Result<&'a SampleSet> {
    input.samples.as_ref().ok_or_else(|| IapError::Config {
        line: None,
        message: match cfg.data.as_ref().and_then(|d| d.labels_header.as_ref()) {
            Some(h) => format!(
                "no train/test manifest for the labels in {}; set [data] samples",
                h.display()
            ),
            None => "no train/test manifest; set [data] samples".into(),
        },
    })
}

/// `render`: colors a label raster.
pub fn cmd_render(header: &Path, raw: &Path, png: &Path) -> Result<()> {
    let labels = load_labels(header, raw)?;
    save_png(labels.labels(), labels.width(), labels.height(), png)
}

/// `synth`: writes the configured scene as a cube, a label raster and a manifest.
pub fn cmd_synth(cfg: &PipelineConfig) -> Result<()> {
    let out = output_dir(cfg)?;
    let scene = cfg.scene.as_ref().ok_or_else(|| IapError::Config {
        line: None,
        message: "synth needs a [scene] section".into(),
    })?;
    let (cube, labels, samples) = generate_synthetic(scene, cfg.substream("synth"))?;
    save_cube(
        &cube,
        &out.join("scene.hdr"),
        &out.join("scene.raw"),
        DataType::F64,
        Interleave::Bsq,
    )?;
    save_labels(
        labels.labels(),
        labels.width(),
        labels.height(),
        &out.join("labels.hdr"),
        &out.join("labels.raw"),
    )?;
    save_samples(&samples, &out.join("samples.txt"))?;
    save_png(
        labels.labels(),
        labels.width(),
        labels.height(),
        &out.join("labels.png"),
    )
}

/// `pipeline`: extract, classify and render in one run.
pub fn cmd_pipeline(cfg: &PipelineConfig, opts: &ClassifyOptions) -> Result<Evaluation> {
    let out = output_dir(cfg)?;
    let input = timed("loading", || load_input(cfg))?;
    let samples = require_samples(cfg, &input)?;
    let features = extract_features(&input.cube, &cfg.iap, cfg)?;
    timed("writing features", || write_features(&out, &features, &cfg.hash()))?;
    let set = opts.ablate.unwrap_or(FeatureSet::Iap);
    let x = features.select(set)?;
    let eval = evaluate_features(&x, samples, &forest_params(cfg))?;
    let (w, h) = (input.cube.width(), input.cube.height());
    write_evaluation(&out, set.stem(), &eval, w, h)?;
    if let Some(labels) = &input.labels {
        save_png(labels.labels(), w, h, &out.join("truth.png"))?;
    }
    Ok(eval)
}

/// Parameter grid for `sweep`. Empty lists fall back to the `[iap]` values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub groups: Vec<usize>,
    pub radii: Vec<Vec<usize>>,
    /// Number of Fourier orders `k` (orders `0..k`).
    pub orders: Vec<usize>,
    pub reduced_dim: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub groups: usize,
    pub radii: Vec<usize>,
    pub orders: usize,
    pub reduced_dim: usize,
    /// `(OA NN, OA RF)` or the failure message.
    pub outcome: std::result::Result<(f64, f64), String>,
}

impl SweepGrid {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| IapError::Config {
            line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
            message: e.message().to_string(),
        })
    }

    fn axes(&self, base: &IapConfig) -> (Vec<usize>, Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
        let or = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
        (
            or(&self.groups, base.groups),
            if self.radii.is_empty() {
                vec![base.radii.clone()]
            } else {
                self.radii.clone()
            },
            or(&self.orders, base.orders.len()),
            or(&self.reduced_dim, base.reduced_dim),
        )
    }
}

/// Runs the pipeline for every grid cell. A failing cell is recorded and the
/// sweep moves on; extraction is shared between cells that differ only in `d`.
pub fn cmd_sweep(cfg: &PipelineConfig, grid: &SweepGrid) -> Result<Vec<SweepCell>> {
    let input = load_input(cfg)?;
    let samples = require_samples(cfg, &input)?;
    let forest = forest_params(cfg);
    let (groups, radii, orders, dims) = grid.axes(&cfg.iap);
    let mut cells = Vec::new();
    for &g in &groups {
        for r in &radii {
            for &k in &orders {
                let iap = IapConfig {
                    groups: g,
                    radii: r.clone(),
                    orders: (0..k as i32).collect(),
                    ..cfg.iap.clone()
                };
                let stacked = extract_blocks(&input.cube, &iap, &cfg.slic, cfg.substream("grouping"))
                    .and_then(|b| assemble_iap(&b.osf, &b.sif, &b.fif));
                for &d in &dims {
                    let outcome = match &stacked {
                        Err(e) => Err(e.to_string()),
                        Ok(x) => reduce(x, d)
                            .and_then(|(red, _)| evaluate_features(&red, samples, &forest))
                            .map(|e| (e.nn.oa, e.rf.oa))
                            .map_err(|e| e.to_string()),
                    };
                    if let Err(msg) = &outcome {
                        log::warn!("sweep cell groups={g} radii={r:?} k={k} d={d} failed: {msg}");
                    }
                    cells.push(SweepCell {
                        groups: g,
                        radii: r.clone(),
                        orders: k,
                        reduced_dim: d,
                        outcome,
                    });
                }
            }
        }
    }
    if let Some(out) = &cfg.run.out {
        write_atomic(&out.join("sweep.tsv"), render_sweep(&cells).as_bytes())?;
    }
    Ok(cells)
}

/// Tab-separated table, one row per cell.
pub fn render_sweep(cells: &[SweepCell]) -> String {
    let mut s = String::from("groups\tradii\torders\treduced_dim\tstatus\toa_nn\toa_rf\n");
    for c in cells {
        let radii: Vec<String> = c.radii.iter().map(|r| r.to_string()).collect();
        let _ = write!(
            s,
            "{}\t{}\t{}\t{}\t",
            c.groups,
            radii.join(","),
            c.orders,
            c.reduced_dim
        );
        let _ = match &c.outcome {
            Ok((nn, rf)) => writeln!(s, "ok\t{nn:.6}\t{rf:.6}"),
            Err(msg) => writeln!(s, "failed: {}\t-\t-", msg.replace(['\t', '\n'], " ")),
        };
    }
    s
}
