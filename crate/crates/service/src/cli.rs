use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use sth_core::dataset::{load_dataset, write_dataset, Dataset, ObjectId, Time};
use sth_core::geometry::CutPlane;
use sth_core::image::encode_id_png;
use sth_core::math::Vec3;
use sth_core::render::{
    bake_value_texture, render_mesh_view, render_stc, Camera, ColorGradient, RenderStyle, ValueTexture,
};
use sth_core::session::{ObjectState, SessionState};
use sth_core::stc::{
    build_stc, compute_normals, read_cache_file, write_cache_file, NormalVolume, SliceAxis, StcVolume,
};
use sth_core::synth::{embryo, EmbryoConfig};

use crate::api::{self, AppState};

#[derive(Parser, Debug)]
#[command(name = "sth", version, about = "Space-time cube builder, renderer and server")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ViewArg {
    Stc,
    Mesh,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum AxisArg {
    T,
    X,
    Y,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Check a dataset manifest; exits nonzero when it has errors.
    Validate { manifest: PathBuf },
    /// Build a space-time cube and write it as a volume cache.
    Build {
        manifest: PathBuf,
        /// Cutting plane `ox,oy,oz:nx,ny,nz`, or `xy`, `xz`, `yz` through the
        /// dataset's center.
        #[arg(long)]
        plane: String,
        #[arg(long, default_value_t = 256)]
        res: usize,
        /// Half-open time range `a:b`.
        #[arg(long = "t")]
        t_range: Option<String>,
        /// Store precomputed normals in the cache.
        #[arg(long)]
        normals: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Render a cube (or the mesh view at one time step) to a PNG.
    Render {
        stc: PathBuf,
        /// Dataset the cube was built from; needed for properties and the mesh view.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "stc")]
        view: ViewArg,
        /// Preset name (`t`, `x`, `y`, `iso` for the cube; `front`, `side`,
        /// `top`, `iso` for meshes) or a camera JSON file.
        #[arg(long, default_value = "iso")]
        camera: String,
        #[arg(long, default_value_t = 256)]
        width: usize,
        #[arg(long, default_value_t = 256)]
        height: usize,
        /// Session JSON file; the flags below override its fields.
        #[arg(long)]
        session: Option<PathBuf>,
        /// Render style JSON file.
        #[arg(long)]
        style: Option<PathBuf>,
        #[arg(long)]
        property: Option<String>,
        #[arg(long)]
        gradient: Option<String>,
        /// Normalized value range `lo:hi`.
        #[arg(long)]
        value_filter: Option<String>,
        /// Inclusive time window `a:b`.
        #[arg(long)]
        time_window: Option<String>,
        /// Comma-separated category labels to keep.
        #[arg(long)]
        categories: Option<String>,
        /// Comma-separated object IDs to mask.
        #[arg(long)]
        mask: Option<String>,
        /// Comma-separated object IDs to highlight.
        #[arg(long)]
        highlight: Option<String>,
        /// Time step of the mesh view (defaults to the session cursor).
        #[arg(long)]
        time: Option<Time>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write one axis-aligned slice of a cube as a 16-bit ID PNG.
    Slice {
        stc: PathBuf,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long)]
        index: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Time a full build and renders; prints JSON.
    Bench {
        manifest: PathBuf,
        #[arg(long, default_value = "xy")]
        plane: String,
        #[arg(long, default_value_t = 256)]
        res: usize,
        #[arg(long, default_value_t = 256)]
        image: usize,
    },
    /// Serve the HTTP API for one dataset.
    Serve {
        manifest: PathBuf,
        #[arg(long, env = "STH_PORT", default_value_t = 8080)]
        port: u16,
        /// Volume caches to register at startup as `stc-0`, `stc-1`, ...
        #[arg(long)]
        stc: Vec<PathBuf>,
    },
    /// Generate the synthetic embryo-like dataset.
    Synth {
        output: PathBuf,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 160)]
        cells: usize,
        /// Comma-separated steps at which division waves happen.
        #[arg(long, default_value = "20,45,70")]
        waves: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn parse_pair<T: std::str::FromStr>(s: &str, what: &str) -> Result<(T, T)> {
    let (a, b) = s.split_once(':').ok_or_else(|| anyhow!("{what} must look like a:b"))?;
    let p = |x: &str| x.trim().parse::<T>().map_err(|_| anyhow!("bad {what} bound {x:?}"));
    Ok((p(a)?, p(b)?))
}

fn parse_vec3(s: &str) -> Result<Vec3> {
    let c: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| anyhow!("bad vector {s:?}"))?;
    match c[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => bail!("vector {s:?} needs three components"),
    }
}

/// `ox,oy,oz:nx,ny,nz`, or an axis-plane preset through the dataset center.
pub fn parse_plane(s: &str, d: &Dataset) -> Result<CutPlane> {
    let center = || d.bounds().map(|(lo, hi)| (lo + hi) * 0.5).unwrap_or(Vec3::ZERO);
    let normal = match s {
        "xy" => Some(Vec3::Z),
        "xz" => Some(Vec3::Y),
        "yz" => Some(Vec3::X),
        _ => None,
    };
    if let Some(n) = normal {
        return Ok(CutPlane::new(center(), n)?);
    }
    let (o, n) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("plane must be ox,oy,oz:nx,ny,nz or xy|xz|yz"))?;
    Ok(CutPlane::new(parse_vec3(o)?, parse_vec3(n)?)?)
}

fn parse_ids(s: &str) -> Result<Vec<ObjectId>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| {
            x.trim()
                .parse::<u32>()
                .ok()
                .and_then(ObjectId::new)
                .ok_or_else(|| anyhow!("bad object id {x:?}"))
        })
        .collect()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load(manifest: &Path) -> Result<Dataset> {
    load_dataset(manifest).with_context(|| format!("loading {}", manifest.display()))
}

fn load_stc(path: &Path) -> Result<(StcVolume, NormalVolume)> {
    let (v, n) = read_cache_file(path).with_context(|| format!("reading {}", path.display()))?;
    let n = n.unwrap_or_else(|| compute_normals(&v));
    Ok((v, n))
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { manifest } => {
            let d = load(&manifest)?;
            let report = d.validate();
            print!("{report}");
            Ok(if report.is_accepted() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Build {
            manifest,
            plane,
            res,
            t_range,
            normals,
            output,
        } => {
            let d = load(&manifest)?;
            let plane = parse_plane(&plane, &d)?;
            let range = t_range.map(|r| parse_pair::<Time>(&r, "time range")).transpose()?;
            let v = build_stc(&d, &plane, res, range.map(|(a, b)| a..b))?;
            let n = normals.then(|| compute_normals(&v));
            write_cache_file(&output, &v, n.as_ref())?;
            eprintln!("wrote {} ({}x{}x{})", output.display(), v.width, v.height, v.depth);
            Ok(ExitCode::SUCCESS)
        }
        Command::Render {
            stc,
            manifest,
            view,
            camera,
            width,
            height,
            session,
            style,
            property,
            gradient,
            value_filter,
            time_window,
            categories,
            mask,
            highlight,
            time,
            output,
        } => {
            let mut s: SessionState = match &session {
                Some(p) => read_json(p)?,
                None => SessionState::default(),
            };
            if let Some(p) = property {
                s = s.set_property(&p);
            }
            if let Some(g) = gradient {
                s = s.set_gradient(&g);
            }
            if let Some(r) = value_filter {
                s = s.set_value_filter(Some(parse_pair(&r, "value filter")?))?;
            }
            if let Some(r) = time_window {
                s = s.set_time_window(Some(parse_pair(&r, "time window")?))?;
            }
            if let Some(c) = categories {
                let set: BTreeSet<String> = c.split(',').map(|x| x.trim().to_string()).collect();
                s = s.set_category_filter(Some(set));
            }
            for id in parse_ids(mask.as_deref().unwrap_or(""))? {
                s = s.set_object_state(id, ObjectState::Masked);
            }
            for id in parse_ids(highlight.as_deref().unwrap_or(""))? {
                s = s.set_object_state(id, ObjectState::Highlighted);
            }
            let style: RenderStyle = match &style {
                Some(p) => read_json(p)?,
                None => RenderStyle::default(),
            };
            let grad = ColorGradient::named(&s.active_gradient)?;
            let (v, n) = load_stc(&stc)?;
            let d = manifest.as_deref().map(load).transpose()?;
            let vt = match &d {
                Some(d) => bake_value_texture(d, &s.active_property)?,
                None => {
                    let r = v.time_range();
                    ValueTexture::empty(&s.active_property, r.start, v.depth)
                }
            };
            let camera_file = Path::new(&camera);
            let img = match view {
                ViewArg::Stc => {
                    let cam = if camera_file.is_file() {
                        read_json::<Camera>(camera_file)?
                    } else {
                        Camera::stc_preset(&camera, width, height)?
                    };
                    render_stc(&v, &n, &cam, &style, &s, &vt, &grad)?
                }
                ViewArg::Mesh => {
                    let d = d.as_ref().ok_or_else(|| anyhow!("the mesh view needs --manifest"))?;
                    let cam = if camera_file.is_file() {
                        read_json::<Camera>(camera_file)?
                    } else {
                        let (lo, hi) = d.bounds().ok_or_else(|| anyhow!("dataset has no meshes"))?;
                        Camera::mesh_preset(&camera, lo, hi, width, height)?
                    };
                    let t = time.unwrap_or_else(|| s.cursor_or(d.time_range().start));
                    render_mesh_view(d, t, &cam, &s, &vt, &grad, &style, Some(&v.plane))?
                }
            };
            img.write_png(&output)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Slice {
            stc,
            axis,
            index,
            output,
        } => {
            let (v, _) = read_cache_file(&stc).with_context(|| format!("reading {}", stc.display()))?;
            let axis = match axis {
                AxisArg::T => SliceAxis::T,
                AxisArg::X => SliceAxis::X,
                AxisArg::Y => SliceAxis::Y,
            };
            let img = v.slice(axis, index)?;
            std::fs::write(&output, encode_id_png(&img)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench {
            manifest,
            plane,
            res,
            image,
        } => {
            let t0 = Instant::now();
            let d = load(&manifest)?;
            let load_s = t0.elapsed().as_secs_f64();
            let plane = parse_plane(&plane, &d)?;
            let t0 = Instant::now();
            let v = build_stc(&d, &plane, res, None)?;
            let build_s = t0.elapsed().as_secs_f64();
            let t0 = Instant::now();
            let n = compute_normals(&v);
            let normals_s = t0.elapsed().as_secs_f64();
            let s = SessionState::default();
            let vt = bake_value_texture(&d, &s.active_property)?;
            let grad = ColorGradient::named(&s.active_gradient)?;
            let style = RenderStyle::default();
            let cam = Camera::stc_preset("iso", image, image)?;
            let t0 = Instant::now();
            render_stc(&v, &n, &cam, &style, &s, &vt, &grad)?;
            let render_stc_s = t0.elapsed().as_secs_f64();
            let (lo, hi) = d.bounds().ok_or_else(|| anyhow!("dataset has no meshes"))?;
            let mcam = Camera::mesh_preset("iso", lo, hi, image, image)?;
            let t0 = Instant::now();
            render_mesh_view(&d, d.time_range().start, &mcam, &s, &vt, &grad, &style, Some(&v.plane))?;
            let render_mesh_s = t0.elapsed().as_secs_f64();
            let out = json!({
                "dataset": d.name,
                "objects": d.object_count(),
                "time_steps": d.step_count(),
                "dims": [v.width, v.height, v.depth],
                "threads": std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
                "load_s": load_s,
                "build_s": build_s,
                "normals_s": normals_s,
                "render_stc_s": render_stc_s,
                "render_mesh_s": render_mesh_s,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { manifest, port, stc } => {
            let state = AppState::new(load(&manifest)?);
            for path in &stc {
                let (v, n) = load_stc(path)?;
                let id = state.insert_stc(v, n);
                eprintln!("{} -> {id}", path.display());
            }
            tokio::runtime::Runtime::new()?.block_on(api::serve(state, port))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth {
            output,
            steps,
            cells,
            waves,
            seed,
        } => {
            let wave_steps = waves
                .split(',')
                .filter(|x| !x.trim().is_empty())
                .map(|x| x.trim().parse::<Time>().map_err(|_| anyhow!("bad wave step {x:?}")))
                .collect::<Result<Vec<_>>>()?;
            let cfg = EmbryoConfig {
                steps,
                initial_cells: cells,
                wave_steps,
                seed,
                ..EmbryoConfig::default()
            };
            let (d, stats) = embryo(&cfg)?;
            let path = write_dataset(&d, &output)?;
            eprintln!(
                "{} instances, {} distinct objects, {} lineage edges",
                stats.total_instances(),
                stats.distinct_ids,
                stats.lineage_edges
            );
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
