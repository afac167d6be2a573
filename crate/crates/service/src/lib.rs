//! HTTP JSON API over one immutable checkpoint.
//!
//! Every handler is a pure function of the loaded model and the request
//! body, so identical requests yield byte-identical responses. The latent
//! map is computed once on first use and shared.

mod error;

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, Method};
use axum::routing::{get, post};
use axum::{Json, Router};
use hea_dvae::data::AlloyRecord;
use hea_dvae::design::{self, DesignTrace, Generated, LatentMap, MapInput, DEFAULT_DENSITY_GRID};
use hea_dvae::dvae::{DvaeConfig, DvaeModel, LatentPoint, ModelMetadata};
use hea_dvae::explain::{
    background_rows, explain_alloy, subsample_background, ShapExplanation, ShapOptions,
};
use hea_dvae::featurize::FEATURE_NAMES;
use hea_dvae::kde::density_at;
use hea_dvae::{Composition, FeatureVector8, Vocabulary};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::sync::OnceCell;
use tower_http::cors::{Any, CorsLayer};
use tower_http::services::ServeDir;

pub use error::{ApiError, ErrorCode};

/// Inversion runs longer than this are rejected.
pub const MAX_INVERT_ITERS: usize = 1000;
pub const DEFAULT_INVERT_ITERS: usize = 20;
/// Density quantile under which a generated point is flagged.
pub const LOW_DENSITY_QUANTILE: f64 = 0.1;

struct Loaded {
    model: DvaeModel,
    checkpoint_hash: String,
    background: Vec<Vec<f64>>,
}

/// Shared, read-only service state.
pub struct ServiceState {
    loaded: Option<Loaded>,
    records: Vec<AlloyRecord>,
    latent_map: OnceCell<Arc<LatentMap>>,
}

impl ServiceState {
    /// `records` feed the latent map and, through the checkpoint's recorded
    /// split, the SHAP background (the labelled training rows).
    pub fn new(model: DvaeModel, records: Vec<AlloyRecord>) -> Result<Self, ApiError> {
        let checkpoint_hash = model.checkpoint_hash();
        let comps: Vec<Composition> = match model.metadata.splits(records.len()) {
            Some(s) => s.labelled.iter().map(|&i| records[i].composition).collect(),
            None => records.iter().map(|r| r.composition).collect(),
        };
        let opts = ShapOptions::default();
        let background = subsample_background(
            &background_rows(&model, &comps)?,
            opts.max_background,
            opts.seed,
        );
        Ok(Self {
            loaded: Some(Loaded {
                model,
                checkpoint_hash,
                background,
            }),
            records,
            latent_map: OnceCell::new(),
        })
    }

    /// A state without a model; model endpoints answer `model_not_loaded`.
    pub fn empty() -> Self {
        Self {
            loaded: None,
            records: Vec::new(),
            latent_map: OnceCell::new(),
        }
    }

    fn loaded(&self) -> Result<&Loaded, ApiError> {
        self.loaded
            .as_ref()
            .ok_or_else(|| ApiError::new(ErrorCode::ModelNotLoaded, "no checkpoint loaded"))
    }

    fn model(&self) -> Result<&DvaeModel, ApiError> {
        Ok(&self.loaded()?.model)
    }

    async fn latent_map(self: &Arc<Self>) -> Result<Arc<LatentMap>, ApiError> {
        let state = Arc::clone(self);
        self.latent_map
            .get_or_try_init(|| async move {
                state.model()?;
                if state.records.is_empty() {
                    return Err(ApiError::new(
                        ErrorCode::ModelNotLoaded,
                        "no dataset loaded for the latent map",
                    ));
                }
                blocking(move || {
                    let inputs: Vec<MapInput> = state
                        .records
                        .iter()
                        .map(|r| MapInput {
                            composition: r.composition,
                            label: Some(r.label),
                        })
                        .collect();
                    Ok(Arc::new(design::latent_map(
                        state.model()?,
                        &inputs,
                        DEFAULT_DENSITY_GRID,
                    )?))
                })
                .await
            })
            .await
            .cloned()
    }
}

type AppState = Arc<ServiceState>;

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

/// Malformed bodies are client faults, reported as `bad_formula`.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(ErrorCode::BadFormula, format!("invalid request body: {e}")))
}

fn check_probability(name: &str, p: f64) -> Result<(), ApiError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ApiError::out_of_range(format!(
            "{name} must lie in [0, 1], got {p}"
        )))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FormulaRequest {
    pub formula: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncodeRequest {
    pub formula: String,
    #[serde(default)]
    pub phi: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub z: Vec<f64>,
    pub target_p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvertRequest {
    pub formula: String,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub formula: String,
    pub probability: f64,
    pub single_phase: bool,
    pub features8_raw: FeatureVector8,
    pub features8_std: [f64; 8],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeResponse {
    pub formula: String,
    pub phi: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// A generated candidate plus where `z` sits in the data density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    #[serde(flatten)]
    pub generated: Generated,
    pub density: Option<f64>,
    /// Fraction of density-grid nodes below the density at `z`.
    pub density_quantile: Option<f64>,
    pub low_density: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentMapResponse {
    pub checkpoint_hash: String,
    #[serde(flatten)]
    pub map: LatentMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub checkpoint_hash: String,
    pub vocabulary: Vec<String>,
    pub feature_names: Vec<String>,
    pub config: DvaeConfig,
    pub phase_prior_r: f64,
    pub metrics: std::collections::BTreeMap<String, f64>,
    pub metadata: ModelMetadata,
    pub dataset_size: usize,
}

async fn classify(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Json<ClassifyResponse>, ApiError> {
    let req: FormulaRequest = parse(&body)?;
    let model = state.model()?;
    let c = Composition::parse(&req.formula)?;
    let raw = model.features(&c)?;
    let std = model.scaler.apply(&raw);
    let probability = model.classify_standardized(&std)?;
    Ok(Json(ClassifyResponse {
        formula: c.format_standard(),
        probability,
        single_phase: probability >= 0.5,
        features8_raw: raw,
        features8_std: std,
    }))
}

async fn encode(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Json<EncodeResponse>, ApiError> {
    let req: EncodeRequest = parse(&body)?;
    let model = state.model()?;
    let c = Composition::parse(&req.formula)?;
    let phi = match req.phi {
        Some(p) => {
            check_probability("phi", p)?;
            p
        }
        None => model.classify(&c)?,
    };
    let (mu, sigma) = model.encode(&c, phi)?;
    Ok(Json(EncodeResponse {
        formula: c.format_standard(),
        phi,
        mu: mu.0,
        sigma,
    }))
}

async fn generate(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Json<GenerateResponse>, ApiError> {
    let req: GenerateRequest = parse(&body)?;
    let model = state.model()?;
    if req.z.len() != model.latent_dim() {
        return Err(ApiError::out_of_range(format!(
            "z has {} coordinates, model expects {}",
            req.z.len(),
            model.latent_dim()
        )));
    }
    check_probability("target_p", req.target_p)?;
    let generated = design::generate(model, &LatentPoint(req.z.clone()), req.target_p)?;
    let (mut density, mut density_quantile, mut low_density) = (None, None, None);
    if model.latent_dim() == 2 && !state.records.is_empty() {
        let map = state.latent_map().await?;
        let pts: Vec<[f64; 2]> = map.points.iter().map(|p| [p.z.0[0], p.z.0[1]]).collect();
        let d = density_at(&pts, map.density.bandwidth, [req.z[0], req.z[1]]);
        let q = map.density.quantile_of(d);
        density = Some(d);
        density_quantile = Some(q);
        low_density = Some(q < LOW_DENSITY_QUANTILE);
    }
    Ok(Json(GenerateResponse {
        generated,
        density,
        density_quantile,
        low_density,
    }))
}

async fn invert(State(state): State<AppState>, body: Bytes) -> Result<Json<DesignTrace>, ApiError> {
    let req: InvertRequest = parse(&body)?;
    let model = state.model()?;
    let c = Composition::parse(&req.formula)?;
    let cutoff = req.cutoff.unwrap_or(model.config.sp_cutoff);
    check_probability("cutoff", cutoff)?;
    let max_iters = req.max_iters.unwrap_or(DEFAULT_INVERT_ITERS);
    if !(1..=MAX_INVERT_ITERS).contains(&max_iters) {
        return Err(ApiError::out_of_range(format!(
            "max_iters must lie in 1..={MAX_INVERT_ITERS}"
        )));
    }
    Ok(Json(design::invert(model, &c, cutoff, max_iters)?))
}

async fn latent_map(State(state): State<AppState>) -> Result<Json<LatentMapResponse>, ApiError> {
    let map = state.latent_map().await?;
    Ok(Json(LatentMapResponse {
        checkpoint_hash: state.loaded()?.checkpoint_hash.clone(),
        map: (*map).clone(),
    }))
}

async fn shap(
    State(state): State<AppState>,
    body: Bytes,
) -> Result<Json<ShapExplanation>, ApiError> {
    let req: FormulaRequest = parse(&body)?;
    state.model()?;
    let c = Composition::parse(&req.formula)?;
    let st = Arc::clone(&state);
    let explanation = blocking(move || {
        let loaded = st.loaded()?;
        Ok(explain_alloy(&loaded.model, &c, &loaded.background)?)
    })
    .await?;
    Ok(Json(explanation))
}

async fn model_info(State(state): State<AppState>) -> Result<Json<ModelInfo>, ApiError> {
    let loaded = state.loaded()?;
    let m = &loaded.model;
    Ok(Json(ModelInfo {
        checkpoint_hash: loaded.checkpoint_hash.clone(),
        vocabulary: Vocabulary::global().symbols().to_vec(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        config: m.config.clone(),
        phase_prior_r: m.phase_prior_r,
        metrics: m.metadata.metrics.clone(),
        metadata: m.metadata.clone(),
        dataset_size: state.records.len(),
    }))
}

/// The API under `/api`, CORS-enabled, with optional static assets for
/// every other path.
pub fn router(state: Arc<ServiceState>, static_dir: Option<PathBuf>) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    let api = Router::new()
        .route("/api/classify", post(classify))
        .route("/api/encode", post(encode))
        .route("/api/generate", post(generate))
        .route("/api/invert", post(invert))
        .route("/api/latent-map", get(latent_map))
        .route("/api/shap", post(shap))
        .route("/api/model", get(model_info))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(cors)
}

/// Serves `app` until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}
