//! Command-line front end: `synth`, `discover`, `report`, `baseline`.
//!
//! Every command reads an optional JSON run config, applies flag overrides,
//! validates, and writes its outputs plus a `manifest-<command>.json` into
//! `--out`.
//! Outputs are a pure function of inputs and `--seed`.

use std::ffi::OsString;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{
    load_csv_with, read_feature_specs, synth_local_structures, write_csv, Dataset, EncodeOptions, FeatureSpec,
    LabelMode, LoadOptions, SynthParams,
};
use crate::error::{Error, Result};
use crate::eval::{
    compare_whole_vs_subsets, evaluate_baseline, write_baseline_files, write_json, write_report_files, BaselineSpec,
    EvalSettings,
};
use crate::seed::substream;
use crate::subsetting::{run, SubsettingConfig, SubsettingResult};

const TOOL: &str = env!("CARGO_PKG_NAME");
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// CSV path, relative to the config file.
    pub csv: PathBuf,
    /// JSON array of feature specs, relative to the config file.
    pub feature_spec: PathBuf,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default)]
    pub label: LabelMode,
    /// Keep only rows whose column renders to `equals`.
    #[serde(default)]
    pub filter: Option<RowFilter>,
    #[serde(default = "yes")]
    pub standardize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowFilter {
    pub column: String,
    pub equals: String,
}

fn default_label_column() -> String {
    "label".into()
}

fn yes() -> bool {
    true
}

/// Everything a run needs. Unknown keys are rejected. `subsetting.rng_seed`
/// is always replaced by a substream of `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dataset: Option<DatasetConfig>,
    #[serde(default)]
    pub synth: SynthParams,
    #[serde(default)]
    pub subsetting: SubsettingConfig,
    #[serde(default = "default_cp_list")]
    pub cp_list: Vec<f64>,
    #[serde(default = "default_detail_cp")]
    pub detail_cp: f64,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_min_node")]
    pub min_node: usize,
    #[serde(default = "yes")]
    pub baseline: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_cp_list() -> Vec<f64> {
    EvalSettings::default().cp_list
}
fn default_detail_cp() -> f64 {
    EvalSettings::default().detail_cp
}
fn default_folds() -> usize {
    EvalSettings::default().folds
}
fn default_min_node() -> usize {
    EvalSettings::default().min_node
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl RunConfig {
    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            cp_list: self.cp_list.clone(),
            detail_cp: self.detail_cp,
            folds: self.folds,
            min_node: self.min_node,
            seed: substream(self.seed, "evaluate"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.subsetting.validate()?;
        self.eval_settings().validate()?;
        if self.cp_list.is_empty() {
            return Err(Error::config("cp_list must not be empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "subsetter", version, about = "Bottom-up subset discovery in KNN space with per-subset trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the planted local-structure dataset and a ready-to-use run config.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long)]
        per_cluster: Option<usize>,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        features: Option<usize>,
    },
    /// Discover subsets and write `subsets.json` plus the iteration log.
    Discover {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[arg(long)]
        sst: Option<usize>,
        #[arg(long, allow_negative_numbers = true)]
        alpha_l: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        alpha_u: Option<f64>,
        #[arg(long)]
        coverage_target: Option<f64>,
        #[arg(long)]
        seed_fraction: Option<f64>,
    },
    /// Evaluate whole-dataset and per-subset trees and write the report tables.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        eval: EvalFlags,
        /// Skip the random-subset baseline.
        #[arg(long)]
        no_baseline: bool,
    },
    /// Evaluate random control subsets sized like the discovered ones.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        eval: EvalFlags,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run config; relative paths inside it resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: config `out`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataFlags {
    /// Dataset CSV (overrides the config).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Feature spec JSON (overrides the config).
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    label_column: Option<String>,
    /// Subsetting result to evaluate (default: `<out>/subsets.json`).
    #[arg(long)]
    result: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalFlags {
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    cp: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    detail_cp: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    min_node: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    dataset_hash: &'a str,
    instance_count: usize,
    files: Vec<String>,
}

/// Resolved config plus where it came from.
struct Loaded {
    config: RunConfig,
    base: PathBuf,
    out: PathBuf,
}

fn load_config(common: &Common) -> Result<Loaded> {
    let (mut config, base) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let config: RunConfig =
                serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (config, base)
        }
        None => (RunConfig::default(), PathBuf::new()),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = match (&common.out, &config.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("out"),
    };
    Ok(Loaded { config, base, out })
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::path::absolute(p).map_err(|e| Error::io(p, e))
}

// Flag paths are relative to the working directory, not the config file.
fn apply_data_flags(loaded: &mut Loaded, flags: &DataFlags) -> Result<()> {
    match (&mut loaded.config.dataset, &flags.data, &flags.features) {
        (Some(d), data, features) => {
            if let Some(p) = data {
                d.csv = absolute(p)?;
            }
            if let Some(p) = features {
                d.feature_spec = absolute(p)?;
            }
        }
        (None, Some(csv), Some(spec)) => {
            loaded.config.dataset = Some(DatasetConfig {
                csv: absolute(csv)?,
                feature_spec: absolute(spec)?,
                label_column: default_label_column(),
                label: LabelMode::default(),
                filter: None,
                standardize: true,
            });
        }
        (None, _, _) => {
            return Err(Error::config("no dataset: pass --config with a `dataset` block, or --data and --features"))
        }
    }
    if let (Some(d), Some(col)) = (&mut loaded.config.dataset, &flags.label_column) {
        d.label_column = col.clone();
    }
    Ok(())
}

fn apply_eval_flags(config: &mut RunConfig, flags: &EvalFlags) {
    if let Some(cp) = &flags.cp {
        config.cp_list = cp.clone();
    }
    if let Some(v) = flags.detail_cp {
        config.detail_cp = v;
    }
    if let Some(v) = flags.folds {
        config.folds = v;
    }
    if let Some(v) = flags.min_node {
        config.min_node = v;
    }
}

fn load_dataset(loaded: &Loaded) -> Result<Dataset> {
    let d = loaded.config.dataset.as_ref().expect("dataset resolved before loading");
    let specs: Vec<FeatureSpec> = read_feature_specs(loaded.base.join(&d.feature_spec))?;
    let options = LoadOptions {
        encode: EncodeOptions {
            standardize: d.standardize,
        },
        label: d.label.clone(),
    };
    let dataset = load_csv_with(loaded.base.join(&d.csv), &specs, &d.label_column, &options)?;
    match &d.filter {
        None => Ok(dataset),
        Some(f) => {
            if !dataset.is_empty() && dataset.row_view(0).get(&f.column).is_none() {
                return Err(Error::config(format!("filter column '{}' not found", f.column)));
            }
            dataset.filter_rows(|row| row.text(&f.column).as_deref() == Some(f.equals.as_str()))
        }
    }
}

fn result_path(loaded: &Loaded, flags: &DataFlags) -> PathBuf {
    flags.result.clone().unwrap_or_else(|| loaded.out.join("subsets.json"))
}

fn read_result(path: &Path) -> Result<SubsettingResult> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn create_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn file_names(paths: &[PathBuf]) -> Vec<String> {
    paths
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect()
}

/// Commands may share an output directory, so each gets its own manifest.
pub fn manifest_name(command: &str) -> String {
    format!("manifest-{command}.json")
}

fn write_manifest(
    dir: &Path,
    command: &'static str,
    config: &RunConfig,
    dataset: &Dataset,
    written: &[PathBuf],
) -> Result<()> {
    let name = manifest_name(command);
    let mut files = file_names(written);
    files.push(name.clone());
    let manifest = Manifest {
        tool: TOOL,
        version: VERSION,
        command,
        config,
        dataset_hash: &dataset.content_hash(),
        instance_count: dataset.len(),
        files,
    };
    write_json(&dir.join(name), &manifest)
}

fn cmd_synth(
    common: &Common,
    clusters: Option<usize>,
    per_cluster: Option<usize>,
    classes: Option<usize>,
    noise: Option<f64>,
    features: Option<usize>,
) -> Result<()> {
    let mut loaded = load_config(common)?;
    let c = &mut loaded.config;
    let p = &mut c.synth;
    if let Some(v) = clusters {
        p.cluster_count = v;
    }
    if let Some(v) = per_cluster {
        p.per_cluster_size = v;
    }
    if let Some(v) = classes {
        p.class_count = v;
    }
    if let Some(v) = noise {
        p.noise_rate = v;
    }
    if let Some(v) = features {
        p.feature_count = v;
    }
    p.rng_seed = substream(c.seed, "synth");
    let data = synth_local_structures(p)?;

    let out = &loaded.out;
    create_out(out)?;
    let csv = out.join("data.csv");
    write_csv(&data.dataset, &csv, "label")?;
    let spec = out.join("features.json");
    write_json(&spec, &data.dataset.features())?;
    let truth = out.join("truth.json");
    write_json(&truth, &data.truth)?;

    // A config that `discover`/`report` can consume as-is from this directory.
    let mut run_config = c.clone();
    run_config.dataset = Some(DatasetConfig {
        csv: "data.csv".into(),
        feature_spec: "features.json".into(),
        label_column: "label".into(),
        label: LabelMode::Classes,
        filter: None,
        standardize: true,
    });
    run_config.out = Some("run".into());
    let rc = out.join("run_config.json");
    write_json(&rc, &run_config)?;

    write_manifest(out, "synth", c, &data.dataset, &[csv, spec, truth, rc])
}

#[allow(clippy::too_many_arguments)]
fn cmd_discover(
    common: &Common,
    data: &DataFlags,
    sst: Option<usize>,
    alpha_l: Option<f64>,
    alpha_u: Option<f64>,
    coverage_target: Option<f64>,
    seed_fraction: Option<f64>,
) -> Result<()> {
    let mut loaded = load_config(common)?;
    apply_data_flags(&mut loaded, data)?;
    let c = &mut loaded.config;
    let s = &mut c.subsetting;
    if let Some(v) = sst {
        s.sst = v;
    }
    if let Some(v) = alpha_l {
        s.alpha_l = v;
    }
    if let Some(v) = alpha_u {
        s.alpha_u = v;
    }
    if let Some(v) = coverage_target {
        s.coverage_target = v;
    }
    if let Some(v) = seed_fraction {
        s.seed_fraction = v;
    }
    s.rng_seed = substream(c.seed, "discover");
    c.validate()?;

    let dataset = load_dataset(&loaded)?;
    let result = run(&dataset, &loaded.config.subsetting)?;

    let out = &loaded.out;
    create_out(out)?;
    let subsets = out.join("subsets.json");
    write_json(&subsets, &result)?;
    let log = out.join("iterations.csv");
    let csv_err = |source| Error::Csv {
        path: log.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&log).map_err(csv_err)?;
    for it in &result.iterations {
        w.serialize(it).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&log, e))?;

    write_manifest(out, "discover", &loaded.config, &dataset, &[subsets, log])
}

fn prepare_eval(common: &Common, data: &DataFlags, eval: &EvalFlags) -> Result<(Loaded, Dataset, SubsettingResult)> {
    let mut loaded = load_config(common)?;
    apply_data_flags(&mut loaded, data)?;
    apply_eval_flags(&mut loaded.config, eval);
    loaded.config.validate()?;
    let dataset = load_dataset(&loaded)?;
    let result = read_result(&result_path(&loaded, data))?;
    // The result carries the config it was produced with.
    loaded.config.subsetting = result.config.clone();
    Ok((loaded, dataset, result))
}

fn cmd_report(common: &Common, data: &DataFlags, eval: &EvalFlags, no_baseline: bool) -> Result<()> {
    let (mut loaded, dataset, result) = prepare_eval(common, data, eval)?;
    if no_baseline {
        loaded.config.baseline = false;
    }
    let c = &loaded.config;
    let baseline = c
        .baseline
        .then(|| BaselineSpec::from_result(&result, substream(c.seed, "baseline")));
    let report = compare_whole_vs_subsets(&dataset, &result, &c.eval_settings(), baseline.as_ref())?;
    create_out(&loaded.out)?;
    let written = write_report_files(&report, &loaded.out)?;
    write_manifest(&loaded.out, "report", c, &dataset, &written)
}

fn cmd_baseline(common: &Common, data: &DataFlags, eval: &EvalFlags) -> Result<()> {
    let (mut loaded, dataset, result) = prepare_eval(common, data, eval)?;
    loaded.config.baseline = true;
    let c = &loaded.config;
    let settings = c.eval_settings();
    let spec = BaselineSpec::from_result(&result, substream(c.seed, "baseline"));
    let report = compare_whole_vs_subsets(&dataset, &result, &settings, None)?;
    let baseline = evaluate_baseline(&dataset, &spec, &settings)?;
    create_out(&loaded.out)?;
    let written = write_baseline_files(&baseline, &report, &loaded.out)?;
    write_manifest(&loaded.out, "baseline", c, &dataset, &written)
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::Synth {
            common,
            clusters,
            per_cluster,
            classes,
            noise,
            features,
        } => cmd_synth(common, *clusters, *per_cluster, *classes, *noise, *features),
        Command::Discover {
            common,
            data,
            sst,
            alpha_l,
            alpha_u,
            coverage_target,
            seed_fraction,
        } => cmd_discover(common, data, *sst, *alpha_l, *alpha_u, *coverage_target, *seed_fraction),
        Command::Report {
            common,
            data,
            eval,
            no_baseline,
        } => cmd_report(common, data, eval, *no_baseline),
        Command::Baseline { common, data, eval } => cmd_baseline(common, data, eval),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    run_with(std::env::args_os())
}
