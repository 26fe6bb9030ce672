use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use decomind::catalog::{
    build_catalog, load_index, persist_index, BorderFloodMatting, BorderUniformityDetector, BuildOptions, CategoryMap,
    ExclusionListDetector, SceneDetector, DEFAULT_SCENE_THRESHOLD,
};
use decomind::layout::{compose_layout, place_furniture, FootprintTable, DEFAULT_PIXELS_PER_M};
use decomind::model::{validate_request, DesignRequest, FurnitureSelection, LabelSets};
use decomind::retrieval::{select_furniture, StubEmbeddingProvider};
use decomind::service::{api, JobService, JobState, LayoutMeta, ServiceConfig};

#[derive(Parser)]
#[command(name = "decomind", version, about = "Catalog-grounded interior design generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the job service and REST API.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one request through the whole pipeline and write its artifacts.
    Run {
        #[arg(long)]
        request: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured catalog.
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Catalog maintenance.
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
    /// Select furniture for a request from a built catalog.
    Retrieve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        request: PathBuf,
        #[arg(long, default_value = "selection.json")]
        out: PathBuf,
    },
    /// Control-layout tools.
    Layout {
        #[command(subcommand)]
        command: LayoutCommand,
    },
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// Ingest, clean and embed an image tree into a catalog archive.
    Build {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value = "ikea")]
        store: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SCENE_THRESHOLD)]
        scene_threshold: f64,
        #[arg(long)]
        no_matting: bool,
        /// Skip scene-image filtering.
        #[arg(long)]
        no_scene_filter: bool,
        /// Use a list of asset ids (one per line) instead of the border heuristic.
        #[arg(long)]
        exclude_list: Option<PathBuf>,
        /// JSON object mapping folder names to categories.
        #[arg(long)]
        category_map: Option<PathBuf>,
        #[arg(long, default_value_t = StubEmbeddingProvider::DEFAULT_DIMENSION)]
        dimension: usize,
    },
}

#[derive(Subcommand)]
enum LayoutCommand {
    /// Place the selection and render the layout PNG (plus a JSON sidecar).
    Render {
        #[arg(long)]
        request: PathBuf,
        #[arg(long)]
        selection: PathBuf,
        #[arg(long, default_value = "layout.png")]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PIXELS_PER_M)]
        pixels_per_m: u32,
    },
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Box<dyn std::error::Error>> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(serde_json::from_slice(&bytes).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn read_request(path: &Path) -> Result<DesignRequest, Box<dyn std::error::Error>> {
    Ok(validate_request(read_json(path)?, &LabelSets::default())?)
}

fn serve(config: &Path) -> CliResult {
    let config = ServiceConfig::load(config)?;
    let service = JobService::open(config.clone())?;
    let recovered = service.start()?;
    if recovered > 0 {
        tracing::info!(recovered, "re-queued unfinished jobs");
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let (listener, addr) = api::bind(&config.listen).await?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        api::serve(service.clone(), listener).await
    })?;
    service.shutdown();
    Ok(ExitCode::SUCCESS)
}

fn run(request: &Path, out: &Path, config: Option<&Path>, catalog: Option<PathBuf>) -> CliResult {
    let mut config = match config {
        Some(path) => ServiceConfig::load(path)?,
        None => ServiceConfig { data_dir: out.join(".decomind"), ..Default::default() },
    };
    if catalog.is_some() {
        config.catalog_path = catalog;
    }
    let request: DesignRequest = read_json(request)?;
    let service = JobService::open(config)?;
    let job_id = service.submit(request)?;
    service.run_job(&job_id)?;
    let job = service.export_job(&job_id, out)?;
    let summary = serde_json::json!({
        "job_id": job.job_id,
        "state": job.state,
        "final_score": job.report.as_ref().map(|r| r.final_score),
        "error": job.error,
        "out": out,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(if job.state == JobState::Done { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

#[allow(clippy::too_many_arguments)]
fn catalog_build(
    root: &Path,
    store: &str,
    out: &Path,
    scene_threshold: f64,
    no_matting: bool,
    no_scene_filter: bool,
    exclude_list: Option<&Path>,
    category_map: Option<&Path>,
    dimension: usize,
) -> CliResult {
    let heuristic = BorderUniformityDetector::default();
    let listed = exclude_list.map(ExclusionListDetector::from_file).transpose()?;
    let detector: Option<&dyn SceneDetector> = match (&listed, no_scene_filter) {
        (_, true) => None,
        (Some(list), false) => Some(list),
        (None, false) => Some(&heuristic),
    };
    let matting = BorderFloodMatting::default();
    let options = BuildOptions {
        category_map: category_map.map(read_json::<CategoryMap>).transpose()?.unwrap_or_default(),
        scene_detector: detector,
        scene_threshold,
        matting: if no_matting { None } else { Some(&matting) },
    };
    let (index, warnings) = build_catalog(root, store, &options, &StubEmbeddingProvider::new(dimension))?;
    persist_index(&index, out)?;
    let summary = serde_json::json!({
        "out": out,
        "store": index.store,
        "assets": index.assets.len(),
        "active_assets": index.active_assets().count(),
        "categories": index.categories(),
        "provider_id": index.provider_id,
        "warnings": warnings.len(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(ExitCode::SUCCESS)
}

fn retrieve(index: &Path, request: &Path, out: &Path) -> CliResult {
    let index = load_index(index)?;
    let request = read_request(request)?;
    let provider = StubEmbeddingProvider::new(index.dimension().unwrap_or(StubEmbeddingProvider::DEFAULT_DIMENSION));
    let selection = select_furniture(&request, &index, &provider)?;
    std::fs::write(out, serde_json::to_vec_pretty(&selection)?)?;
    for category in selection.empty_categories() {
        eprintln!("warning: no {category} assets in the {} catalog", index.store);
    }
    Ok(ExitCode::SUCCESS)
}

fn layout_render(request: &Path, selection: &Path, out: &Path, pixels_per_m: u32) -> CliResult {
    let request = read_request(request)?;
    let selection: FurnitureSelection = read_json(selection)?;
    let placed = place_furniture(&request, &selection, &FootprintTable::default());
    let layout = compose_layout(&request, &placed.placements, pixels_per_m)?;
    std::fs::write(out, layout.png_bytes())?;
    let meta = LayoutMeta { sidecar: layout.sidecar(), unplaceable: placed.unplaceable };
    std::fs::write(out.with_extension("json"), serde_json::to_vec_pretty(&meta)?)?;
    for item in &meta.unplaceable {
        eprintln!("warning: could not place {} ({}): {}", item.asset_id, item.category, item.reason);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let filter = tracing_subscriber::EnvFilter::try_from_env("DECOMIND_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).with_target(false).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve { config } => serve(&config),
        Command::Run { request, out, config, catalog } => run(&request, &out, config.as_deref(), catalog),
        Command::Catalog {
            command:
                CatalogCommand::Build {
                    root,
                    store,
                    out,
                    scene_threshold,
                    no_matting,
                    no_scene_filter,
                    exclude_list,
                    category_map,
                    dimension,
                },
        } => catalog_build(
            &root,
            &store,
            &out,
            scene_threshold,
            no_matting,
            no_scene_filter,
            exclude_list.as_deref(),
            category_map.as_deref(),
            dimension,
        ),
        Command::Retrieve { index, request, out } => retrieve(&index, &request, &out),
        Command::Layout { command: LayoutCommand::Render { request, selection, out, pixels_per_m } } => {
            layout_render(&request, &selection, &out, pixels_per_m)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
