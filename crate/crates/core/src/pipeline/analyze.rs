use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;

use super::cache;
use super::config::{RunConfig, SpectraLayout};
use super::fmt::sig9;
use super::manifest::{sha256_hex, ImageSelectionRecord, InputFiles, RunManifest};
use super::select::ImageSelection;
use super::{display, thread_pool, LoadedModel, OutputWriter, TOOL_NAME, TOOL_VERSION};
use crate::cifar;
use crate::error::{Error, Result};
use crate::importance::{assess, component_snr_table, layer_histogram, ImageTable, SnrTable};
use crate::prunekit::inventory;
use crate::spectra::{enumerate_components, BinScore, ComponentSet, Spectrum, SpectrumAnalyzer};
use crate::stimgen::{default_half_mask, tag_image_sequence, RegionMask, SourceImage};
use crate::tinynet::{collect_traces, ActivationTrace, FilterId, Model};

/// Inputs of `analyze` and `report`.
#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub config: RunConfig,
    pub graph: PathBuf,
    pub weights: PathBuf,
    pub data: PathBuf,
    /// `None` samples up to 100 images.
    pub images: Option<ImageSelection>,
    pub seed: u64,
    pub out: PathBuf,
    /// Trace cache directory; defaults to `<out>/cache`.
    pub cache: Option<PathBuf>,
    /// Worker count; `None` uses every core.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    Analyze,
    Report,
}

/// Full analysis: spectra CSVs, SNR tables, importance report, layer
/// histogram, config snapshot and manifest.
pub fn run_analyze(opts: &AnalyzeOptions) -> Result<RunManifest> {
    run(opts, Command::Analyze)
}

/// Like [`run_analyze`] but skips the spectra export. Traces already in the
/// cache are reused, so re-thresholding an analyzed image set needs no
/// inference.
pub fn run_report(opts: &AnalyzeOptions) -> Result<RunManifest> {
    run(opts, Command::Report)
}

struct Context<'a> {
    model: &'a Model,
    mask: RegionMask,
    analyzer: SpectrumAnalyzer,
    components: ComponentSet,
    config: &'a RunConfig,
    fingerprint: &'a str,
    cache_dir: PathBuf,
    filters: usize,
}

struct ImageResult {
    image_id: usize,
    spectra: Vec<(FilterId, Spectrum)>,
    table: SnrTable,
    fresh_traces: Option<Vec<ActivationTrace>>,
}

fn run(opts: &AnalyzeOptions, command: Command) -> Result<RunManifest> {
    let config = &opts.config;
    config.validate()?;
    let loaded = LoadedModel::open(&opts.graph, &opts.weights)?;
    let input = loaded.model.input_spec();
    if (input.channels, input.height, input.width) != (3, cifar::SIDE, cifar::SIDE) {
        return Err(Error::arg(format!(
            "model expects {}x{}x{} inputs, the dataset holds 3x{side}x{side} images",
            input.channels,
            input.height,
            input.width,
            side = cifar::SIDE
        )));
    }
    if loaded.model.taps().is_empty() {
        return Err(Error::arg("model declares no taps, there is nothing to assess"));
    }
    let data = super::read_file(&opts.data)?;
    let ids = ImageSelection::resolve_default(opts.images.as_ref(), cifar::record_count(&data)?, opts.seed)?;

    let tagging = &config.tagging;
    let icfg = config.importance_config();
    let ctx = Context {
        model: &loaded.model,
        mask: default_half_mask(cifar::SIDE, cifar::SIDE)?,
        analyzer: SpectrumAnalyzer::new(tagging.frame_count(), tagging.fps)?,
        components: enumerate_components(icfg.f1, icfg.f2, icfg.max_order, tagging.delta_f(), tagging.fps / 2.0)?,
        config,
        fingerprint: &loaded.fingerprint,
        cache_dir: opts.cache.clone().unwrap_or_else(|| opts.out.join("cache")),
        filters: inventory(&loaded.model).len(),
    };
    fs::create_dir_all(&ctx.cache_dir)?;

    let pool = thread_pool(opts.threads)?;
    let chunk = 2 * pool.current_num_threads().max(1);
    let mut writer = OutputWriter::new(&opts.out)?;
    let mut tables = Vec::with_capacity(ids.len());
    for chunk_ids in ids.chunks(chunk) {
        let records = cifar::decode_records(&data, chunk_ids)?;
        let results: Vec<ImageResult> = pool.install(|| {
            chunk_ids
                .par_iter()
                .zip(records.par_iter())
                .map(|(&id, (img, _))| analyze_image(&ctx, id, img))
                .collect::<Result<_>>()
        })?;
        for r in results {
            if let Some(traces) = &r.fresh_traces {
                let key = cache::cache_key(ctx.fingerprint, r.image_id, tagging, config.analysis.reduction);
                fs::write(cache::cache_path(&ctx.cache_dir, &key), cache::encode(traces))?;
            }
            if command == Command::Analyze {
                write_spectra(&mut writer, &r, config.analysis.spectra_layout)?;
            }
            writer.write(
                &format!("snr/image_{:05}.csv", r.image_id),
                "snr_table",
                Some(r.image_id),
                snr_csv(r.image_id, &r.table).as_bytes(),
            )?;
            tables.push(ImageTable {
                image_id: r.image_id,
                table: r.table,
            });
        }
    }

    let mut report = assess(&tables, &icfg)?;
    report.provenance.model_fingerprint = Some(loaded.fingerprint.clone());
    writer.write("report.json", "report", None, report.to_json().as_bytes())?;
    let mut hist = String::from("layer_index,n_filters,n_important\n");
    for l in &report.layers {
        writeln!(hist, "{},{},{}", l.layer, l.n_filters, l.n_important).unwrap();
    }
    debug_assert_eq!(
        layer_histogram(&report),
        report.layers.iter().map(|l| (l.layer, l.n_important)).collect::<Vec<_>>()
    );
    writer.write("layer_histogram.csv", "layer_histogram", None, hist.as_bytes())?;
    writer.write("config.toml", "config", None, config.to_toml().as_bytes())?;

    writer.finish(RunManifest {
        tool: TOOL_NAME.into(),
        tool_version: TOOL_VERSION.into(),
        command: match command {
            Command::Analyze => "analyze",
            Command::Report => "report",
        }
        .into(),
        config: Some(config.clone()),
        model_fingerprint: loaded.fingerprint.clone(),
        inputs: InputFiles {
            graph: display(&opts.graph),
            weights: display(&opts.weights),
            data: display(&opts.data),
            data_sha256: sha256_hex(&data),
            report: None,
            report_sha256: None,
        },
        selection: ImageSelectionRecord {
            requested: opts.images.as_ref().map_or_else(|| "default".into(), |s| s.to_string()),
            seed: opts.seed,
            image_ids: ids,
        },
        artifacts: Vec::new(),
    })
}

fn load_cached(ctx: &Context, key: &str) -> Option<Vec<ActivationTrace>> {
    let bytes = fs::read(cache::cache_path(&ctx.cache_dir, key)).ok()?;
    let traces = cache::decode(&bytes, ctx.config.analysis.reduction).ok()?;
    let frames = ctx.config.tagging.frame_count();
    (traces.len() == ctx.filters && traces.iter().all(|t| t.values.len() == frames)).then_some(traces)
}

fn analyze_image(ctx: &Context, image_id: usize, img: &SourceImage) -> Result<ImageResult> {
    let tagging = &ctx.config.tagging;
    let reduction = ctx.config.analysis.reduction;
    let key = cache::cache_key(ctx.fingerprint, image_id, tagging, reduction);
    let (traces, fresh) = match load_cached(ctx, &key) {
        Some(t) => (t, false),
        None => {
            let seq = tag_image_sequence(img, &ctx.mask, tagging)?;
            (collect_traces(ctx.model, &seq, reduction)?, true)
        }
    };
    let spectra = traces
        .iter()
        .map(|t| Ok((t.filter, ctx.analyzer.analyze(&t.values)?)))
        .collect::<Result<Vec<_>>>()?;
    let table = component_snr_table(&spectra, &ctx.components, &ctx.config.importance.baseline_offsets)?;
    Ok(ImageResult {
        image_id,
        spectra,
        table,
        fresh_traces: fresh.then_some(traces),
    })
}

fn write_spectra(writer: &mut OutputWriter, r: &ImageResult, layout: SpectraLayout) -> Result<()> {
    let comp_index: HashMap<usize, usize> = r
        .table
        .components
        .components
        .iter()
        .enumerate()
        .map(|(k, c)| (c.bin, k))
        .collect();
    let row_of = |f: FilterId| r.table.filters.binary_search(&f).expect("table covers every traced filter");
    const COLUMNS: &str = "frequency_hz,amplitude,is_component,component_kind,component_order,snr,sns";

    let rows = |out: &mut String, filter: FilterId, spec: &Spectrum, prefix: &str| {
        let row = row_of(filter);
        for bin in 0..spec.len() {
            out.push_str(prefix);
            write!(out, "{},{},", sig9(spec.frequency(bin)), sig9(spec.amplitude(bin))).unwrap();
            match comp_index.get(&bin) {
                Some(&k) => {
                    let c = &r.table.components.components[k];
                    let score = r.table.score(row, k);
                    writeln!(
                        out,
                        "1,{},{},{},{}",
                        c.kind.as_str(),
                        c.order,
                        super::fmt::opt(score.snr()),
                        super::fmt::opt(score.sns())
                    )
                    .unwrap();
                }
                None => out.push_str("0,,,,\n"),
            }
        }
    };

    match layout {
        SpectraLayout::Combined => {
            let mut out = format!("image_id,layer,channel,{COLUMNS}\n");
            for (filter, spec) in &r.spectra {
                let prefix = format!("{},{},{},", r.image_id, filter.layer, filter.channel);
                rows(&mut out, *filter, spec, &prefix);
            }
            writer.write(
                &format!("spectra/image_{:05}.csv", r.image_id),
                "spectrum",
                Some(r.image_id),
                out.as_bytes(),
            )
        }
        SpectraLayout::PerFilter => {
            for (filter, spec) in &r.spectra {
                let mut out = format!("{COLUMNS}\n");
                rows(&mut out, *filter, spec, "");
                writer.write(
                    &format!(
                        "spectra/image_{:05}/layer{:02}_ch{:03}.csv",
                        r.image_id, filter.layer, filter.channel
                    ),
                    "spectrum",
                    Some(r.image_id),
                    out.as_bytes(),
                )?;
            }
            Ok(())
        }
    }
}

fn snr_csv(image_id: usize, table: &SnrTable) -> String {
    let mut out = String::from("image_id,layer,channel,frequency_hz,component_kind,component_order,status,snr,sns\n");
    for (f, filter) in table.filters.iter().enumerate() {
        for (k, c) in table.components.components.iter().enumerate() {
            let score = table.score(f, k);
            let status = match score {
                BinScore::Valid { .. } => "valid",
                BinScore::InvalidBaseline { .. } => "invalid_baseline",
            };
            writeln!(
                out,
                "{image_id},{},{},{},{},{},{status},{},{}",
                filter.layer,
                filter.channel,
                sig9(c.frequency),
                c.kind.as_str(),
                c.order,
                super::fmt::opt(score.snr()),
                super::fmt::opt(score.sns())
            )
            .unwrap();
        }
    }
    out
}
