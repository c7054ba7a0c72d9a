//! HTTP API over one loaded dataset. Render and pick requests carry their
//! whole session, so responses depend only on the body and the built cubes.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sth_core::dataset::{Dataset, Lifespan, ObjectId, PropertyValue, Time};
use sth_core::geometry::CutPlane;
use sth_core::render::{
    pick_mesh, pick_stc, render_mesh_view, render_stc, Camera, ColorGradient, RenderError, RenderStyle, ValueTexture,
    GRADIENT_NAMES,
};
use sth_core::session::SessionState;
use sth_core::stc::{build_stc, compute_normals, NormalVolume, StcVolume};

pub const MAX_RESOLUTION: usize = 2048;
pub const DEFAULT_IMAGE_SIZE: usize = 256;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl From<RenderError> for ApiError {
    fn from(e: RenderError) -> Self {
        Self::bad_request(e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// A built cube and its normals.
pub struct BuiltStc {
    pub volume: StcVolume,
    pub normals: NormalVolume,
}

enum Slot {
    Building,
    Ready(Arc<BuiltStc>),
    Failed(String),
}

#[derive(Default)]
struct Registry {
    slots: HashMap<String, Slot>,
    by_request: HashMap<String, String>,
    next: u64,
}

struct Inner {
    dataset: Dataset,
    textures: Mutex<HashMap<String, Arc<ValueTexture>>>,
    registry: Mutex<Registry>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(dataset: Dataset) -> Self {
        Self(Arc::new(Inner {
            dataset,
            textures: Mutex::new(HashMap::new()),
            registry: Mutex::new(Registry::default()),
        }))
    }

    pub fn dataset(&self) -> &Dataset {
        &self.0.dataset
    }

    /// Registers an already built cube (e.g. loaded from a cache file).
    pub fn insert_stc(&self, volume: StcVolume, normals: NormalVolume) -> String {
        let mut reg = self.0.registry.lock().expect("registry lock");
        let id = format!("stc-{}", reg.next);
        reg.next += 1;
        reg.slots
            .insert(id.clone(), Slot::Ready(Arc::new(BuiltStc { volume, normals })));
        id
    }

    fn texture(&self, name: &str) -> ApiResult<Arc<ValueTexture>> {
        let mut cache = self.0.textures.lock().expect("texture lock");
        if let Some(t) = cache.get(name) {
            return Ok(t.clone());
        }
        let t = Arc::new(sth_core::render::bake_value_texture(&self.0.dataset, name)?);
        cache.insert(name.to_string(), t.clone());
        Ok(t)
    }

    fn ready_stc(&self, id: &str) -> ApiResult<Arc<BuiltStc>> {
        let reg = self.0.registry.lock().expect("registry lock");
        match reg.slots.get(id) {
            None => Err(ApiError::not_found(format!("unknown stc_id {id:?}"))),
            Some(Slot::Building) => Err(ApiError::new(StatusCode::CONFLICT, format!("{id} is still building"))),
            Some(Slot::Failed(e)) => Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("{id} failed to build: {e}"),
            )),
            Some(Slot::Ready(b)) => Ok(b.clone()),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/info", get(info))
        .route("/api/stc", post(create_stc))
        .route("/api/stc/{id}/status", get(stc_status))
        .route("/api/render", post(render))
        .route("/api/pick", post(pick))
        .route("/api/lineage/{id}", get(lineage))
        .route("/api/histogram/divisions", get(division_histogram))
        .route("/api/session/cycle", post(cycle))
        .with_state(state)
}

/// Strict JSON body parsing: any syntax or schema error is a 400.
fn parse<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

async fn info(State(s): State<AppState>) -> Json<Value> {
    let d = s.dataset();
    let range = d.time_range();
    let properties: Vec<Value> = d
        .properties
        .iter()
        .map(|(name, p)| json!({ "name": name, "kind": p.kind }))
        .collect();
    Json(json!({
        "name": d.name,
        "units": d.units,
        "time_range": [range.start, range.end - 1],
        "time_steps": d.step_count(),
        "object_count": d.object_count(),
        "objects_per_step": d.time_steps().map(|t| d.object_count_at(t)).collect::<Vec<_>>(),
        "properties": properties,
        "gradients": GRADIENT_NAMES,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StcRequest {
    plane: CutPlane,
    #[serde(default = "default_resolution")]
    resolution: usize,
    /// Half-open `[start, end)`; the whole dataset when absent.
    #[serde(default)]
    t_range: Option<[Time; 2]>,
}

fn default_resolution() -> usize {
    DEFAULT_IMAGE_SIZE
}

fn status_json(id: &str, slot: &Slot) -> Value {
    match slot {
        Slot::Building => json!({ "stc_id": id, "status": "building" }),
        Slot::Failed(e) => json!({ "stc_id": id, "status": "failed", "error": e }),
        Slot::Ready(b) => {
            let v = &b.volume;
            json!({
                "stc_id": id,
                "status": "ready",
                "dims": [v.width, v.height, v.depth],
                "time_map": v.time_map,
                "viewport": {
                    "center_uv": v.viewport.center_uv,
                    "half_extent": v.viewport.half_extent,
                    "epsilon": v.viewport.epsilon,
                },
            })
        }
    }
}

async fn create_stc(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: StcRequest = parse(&body)?;
    if !(2..=MAX_RESOLUTION).contains(&req.resolution) {
        return Err(ApiError::bad_request(format!(
            "resolution must be within 2..={MAX_RESOLUTION}"
        )));
    }
    let range = req.t_range.map(|[a, b]| a..b);
    let full = s.dataset().time_range();
    if let Some(r) = &range {
        if r.is_empty() || r.start < full.start || r.end > full.end {
            return Err(ApiError::bad_request(format!(
                "t_range {}..{} must be a non-empty part of {}..{}",
                r.start, r.end, full.start, full.end
            )));
        }
    }
    let key =
        serde_json::to_string(&(req.plane.origin, req.plane.normal, req.resolution, req.t_range)).expect("plain data");

    let id = {
        let mut reg = s.0.registry.lock().expect("registry lock");
        if let Some(id) = reg.by_request.get(&key) {
            let id = id.clone();
            return Ok((StatusCode::OK, Json(status_json(&id, &reg.slots[&id]))).into_response());
        }
        let id = format!("stc-{}", reg.next);
        reg.next += 1;
        reg.slots.insert(id.clone(), Slot::Building);
        reg.by_request.insert(key, id.clone());
        id
    };

    let state = s.clone();
    let task_id = id.clone();
    tokio::task::spawn_blocking(move || {
        let slot = match build_stc(state.dataset(), &req.plane, req.resolution, range) {
            Ok(volume) => {
                let normals = compute_normals(&volume);
                Slot::Ready(Arc::new(BuiltStc { volume, normals }))
            }
            Err(e) => Slot::Failed(e.to_string()),
        };
        state
            .0
            .registry
            .lock()
            .expect("registry lock")
            .slots
            .insert(task_id, slot);
    });
    Ok((
        StatusCode::ACCEPTED,
        Json(json!({ "stc_id": id, "status": "building" })),
    )
        .into_response())
}

async fn stc_status(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let reg = s.0.registry.lock().expect("registry lock");
    let slot = reg
        .slots
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("unknown stc_id {id:?}")))?;
    Ok(Json(status_json(&id, slot)))
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum View {
    Stc,
    Mesh,
}

/// A full camera object, or `{"preset": name, "width": w, "height": h}`.
fn camera_from(v: Option<&Value>, view: View, d: &Dataset) -> ApiResult<Camera> {
    let preset = |name: &str, w: usize, h: usize| match view {
        View::Stc => Camera::stc_preset(name, w, h),
        View::Mesh => {
            let (lo, hi) = d.bounds().unwrap_or((Default::default(), Default::default()));
            Camera::mesh_preset(name, lo, hi, w, h)
        }
    };
    let Some(v) = v else {
        return Ok(preset("iso", DEFAULT_IMAGE_SIZE, DEFAULT_IMAGE_SIZE)?);
    };
    if let Some(name) = v.get("preset") {
        let name = name
            .as_str()
            .ok_or_else(|| ApiError::bad_request("camera preset must be a string"))?;
        let dim = |k: &str| -> ApiResult<usize> {
            match v.get(k) {
                None => Ok(DEFAULT_IMAGE_SIZE),
                Some(x) => x
                    .as_u64()
                    .map(|x| x as usize)
                    .ok_or_else(|| ApiError::bad_request(format!("camera {k} must be a positive integer"))),
            }
        };
        return Ok(preset(name, dim("width")?, dim("height")?)?);
    }
    Camera::deserialize(v).map_err(|e| ApiError::bad_request(format!("camera: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewRequest {
    view: View,
    #[serde(default)]
    stc_id: Option<String>,
    #[serde(default)]
    time: Option<Time>,
    #[serde(default)]
    camera: Option<Value>,
    #[serde(default)]
    style: RenderStyle,
    #[serde(default)]
    session: SessionState,
    #[serde(default)]
    pixel: Option<[usize; 2]>,
}

struct Prepared {
    cam: Camera,
    vt: Arc<ValueTexture>,
    stc: Option<Arc<BuiltStc>>,
    time: Time,
}

fn prepare(s: &AppState, req: &ViewRequest) -> ApiResult<Prepared> {
    let d = s.dataset();
    let cam = camera_from(req.camera.as_ref(), req.view, d)?;
    req.style.validate()?;
    let vt = s.texture(&req.session.active_property)?;
    let stc = match (&req.stc_id, req.view) {
        (Some(id), _) => Some(s.ready_stc(id)?),
        (None, View::Stc) => return Err(ApiError::bad_request("stc view needs stc_id")),
        (None, View::Mesh) => None,
    };
    let time = req.time.unwrap_or_else(|| req.session.cursor_or(d.time_range().start));
    if req.view == View::Mesh && !d.time_range().contains(&time) {
        return Err(ApiError::bad_request(format!("time {time} is outside the dataset")));
    }
    Ok(Prepared { cam, vt, stc, time })
}

async fn render(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: ViewRequest = parse(&body)?;
    let grad = ColorGradient::named(&req.session.active_gradient)?;
    let p = prepare(&s, &req)?;
    let png = blocking(move || -> ApiResult<Vec<u8>> {
        let img = match req.view {
            View::Stc => {
                let b = p.stc.as_ref().expect("checked in prepare");
                render_stc(&b.volume, &b.normals, &p.cam, &req.style, &req.session, &p.vt, &grad)?
            }
            View::Mesh => {
                let marker = p.stc.as_ref().map(|b| b.volume.plane);
                render_mesh_view(
                    s.dataset(),
                    p.time,
                    &p.cam,
                    &req.session,
                    &p.vt,
                    &grad,
                    &req.style,
                    marker.as_ref(),
                )?
            }
        };
        img.encode_png()
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
    })
    .await??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

/// Property values and remaining lifespan of one instance.
pub fn summary(d: &Dataset, id: ObjectId, t: Time) -> Value {
    let properties: BTreeMap<&str, Option<&PropertyValue>> = d
        .properties
        .iter()
        .map(|(name, p)| (name, p.values.get(&sth_core::dataset::Node::new(id, t))))
        .collect();
    let lifespan: Option<Lifespan> = d.remaining_lifespan(id, t).ok();
    json!({ "properties": properties, "lifespan": lifespan })
}

async fn pick(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: ViewRequest = parse(&body)?;
    let [i, j] = req.pixel.ok_or_else(|| ApiError::bad_request("pick needs pixel"))?;
    let p = prepare(&s, &req)?;
    let hit = match req.view {
        View::Stc => {
            let b = p.stc.as_ref().expect("checked in prepare");
            pick_stc(&b.volume, &p.cam, (i, j), &req.style, &req.session, &p.vt)?
                .map(|h| (ObjectId::new(h.id).expect("hits are nonzero"), h.t))
        }
        View::Mesh => pick_mesh(s.dataset(), p.time, &p.cam, (i, j), &req.session, &p.vt)?.map(|id| (id, p.time)),
    };
    Ok(Json(match hit {
        None => Value::Null,
        Some((id, t)) => json!({ "id": id, "t": t, "summary": summary(s.dataset(), id, t) }),
    }))
}

#[derive(Deserialize)]
struct LineageQuery {
    t: Option<Time>,
}

fn object_id(raw: &str) -> ApiResult<ObjectId> {
    raw.parse::<u32>()
        .ok()
        .and_then(ObjectId::new)
        .ok_or_else(|| ApiError::bad_request(format!("invalid object id {raw:?}")))
}

/// Descendants of `(id, t)`, or of the latest instance of `id` without `t`.
async fn lineage(
    State(s): State<AppState>,
    Path(raw): Path<String>,
    Query(q): Query<LineageQuery>,
) -> ApiResult<Json<Value>> {
    let id = object_id(&raw)?;
    let d = s.dataset();
    let t = match q.t {
        Some(t) => t,
        None => d
            .lineage
            .instances(id)
            .map(|n| n.t)
            .max()
            .ok_or_else(|| ApiError::not_found(format!("unknown object {id}")))?,
    };
    let nodes = d
        .lineage
        .descendants(id, t)
        .map_err(|e| ApiError::not_found(e.to_string()))?;
    let mut ids: Vec<u32> = nodes.iter().map(|n| n.id.get()).collect();
    ids.sort_unstable();
    ids.dedup();
    let descendants: Vec<Value> = nodes.iter().map(|n| json!({ "id": n.id, "t": n.t })).collect();
    Ok(Json(
        json!({ "id": id, "t": t, "descendants": descendants, "ids": ids }),
    ))
}

async fn division_histogram(State(s): State<AppState>) -> Json<Value> {
    let h: Vec<Value> = s
        .dataset()
        .lineage
        .division_histogram()
        .into_iter()
        .map(|(t, n)| json!({ "t": t, "divisions": n }))
        .collect();
    Json(Value::Array(h))
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct CycleRequest {
    #[serde(default)]
    session: SessionState,
    id: u32,
}

/// Applies the click cycle (normal, highlighted, masked) to an object and its
/// lineage, returning the new session.
async fn cycle(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<SessionState>> {
    let req: CycleRequest = parse(&body)?;
    req.session
        .cycle_object_state(req.id, &s.dataset().lineage)
        .map(Json)
        .map_err(|e| ApiError::not_found(e.to_string()))
}

/// Serves the API on `0.0.0.0:port` until the process is stopped.
pub async fn serve(state: AppState, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
