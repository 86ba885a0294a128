//! Live simulation over WebSocket.
//!
//! One task owns the [`Simulator`] and steps it in real time. Connection
//! tasks forward parsed client commands to it through a queue and relay the
//! JSON state frames it broadcasts. Commands are applied between ticks, so a
//! frame never shows a half-applied command.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

use super::{CliError, ServeArgs};
use crate::config::{Config, GainsPatch};
use crate::sim::{scenario_fixation, SimError, Simulator, TraceRecord};
use crate::vision::{FaceTarget, HeadPose};

/// Distance of the face when the server starts or is reset, m.
pub const START_DISTANCE: f64 = 2.0;
/// Target rate of state frames, Hz.
pub const FRAME_RATE: f64 = 30.0;

/// Messages accepted from clients.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientCommand {
    /// Face position, m, in the body frame.
    SetTarget { x: f64, y: f64, z: f64 },
    /// Head orientation, deg.
    SetHead { yaw: f64, pitch: f64 },
    SetGains {
        #[serde(default)]
        pursuit: Option<GainsPatch>,
        #[serde(default)]
        saccade: Option<GainsPatch>,
        #[serde(default)]
        vor_gain: Option<f64>,
        #[serde(default)]
        vor_enabled: Option<bool>,
    },
    Reset,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EyeFrame {
    pub u: f64,
    pub v: f64,
    pub valid: bool,
    pub ex: f64,
    pub ey: f64,
    pub pan_deg: f64,
    pub tilt_deg: f64,
    pub mode: &'static str,
    pub vor_active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeadFrame {
    pub yaw: f64,
    pub pitch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetFrame {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// One broadcast message. Unknown numeric values (no detection) are
/// serialised as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateFrame {
    pub t: f64,
    pub left: EyeFrame,
    pub right: EyeFrame,
    pub head: HeadFrame,
    pub target: TargetFrame,
    pub vor_enabled: bool,
}

impl StateFrame {
    pub fn from_records(records: &[TraceRecord; 2], vor_enabled: bool) -> Self {
        let eye = |r: &TraceRecord| EyeFrame {
            u: r.u,
            v: r.v,
            valid: r.valid,
            ex: r.ex,
            ey: r.ey,
            pan_deg: r.pan_deg,
            tilt_deg: r.tilt_deg,
            mode: r.mode.label(),
            vor_active: r.vor_active,
        };
        let r = &records[0];
        Self {
            t: r.t,
            left: eye(&records[0]),
            right: eye(&records[1]),
            head: HeadFrame { yaw: r.head_yaw, pitch: r.head_pitch },
            target: TargetFrame { x: r.target[0], y: r.target[1], z: r.target[2] },
            vor_enabled,
        }
    }
}

fn error_frame(msg: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": msg.to_string() }).to_string()
}

struct Envelope {
    cmd: ClientCommand,
    reply: mpsc::UnboundedSender<String>,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Envelope>,
    frames: broadcast::Sender<String>,
}

fn live_simulator(cfg: &Config) -> Result<Simulator, SimError> {
    let mut s = scenario_fixation(START_DISTANCE, &cfg.geometry)?
        .with_noise(cfg.face.noise_px)
        .with_face_width(cfg.face.width_m)
        .with_seed(cfg.sim.seed);
    s.name = "live".into();
    Simulator::new(s, cfg.sim_config())
}

fn apply(sim: &mut Simulator, cfg: &Config, cmd: ClientCommand) -> Result<(), String> {
    let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
    match cmd {
        ClientCommand::SetTarget { x, y, z } => {
            if !finite(&[x, y, z]) {
                return Err("target coordinates must be finite".into());
            }
            let face_width = sim.target().face_width;
            sim.set_target(FaceTarget { position: Vector3::new(x, y, z), face_width });
        }
        ClientCommand::SetHead { yaw, pitch } => {
            if !finite(&[yaw, pitch]) {
                return Err("head angles must be finite".into());
            }
            sim.set_head(HeadPose::new(yaw.to_radians(), pitch.to_radians()));
        }
        ClientCommand::SetGains { pursuit, saccade, vor_gain, vor_enabled } => {
            let mut s = *sim.supervisor();
            if let Some(p) = pursuit {
                s.pursuit = p.apply(s.pursuit);
            }
            if let Some(p) = saccade {
                s.saccade = p.apply(s.saccade);
            }
            s.vor_gain = vor_gain.unwrap_or(s.vor_gain);
            s.vor_enabled = vor_enabled.unwrap_or(s.vor_enabled);
            sim.set_supervisor(s).map_err(|e| e.to_string())?;
        }
        ClientCommand::Reset => {
            *sim = live_simulator(cfg).map_err(|e| e.to_string())?;
        }
    }
    Ok(())
}

async fn sim_loop(
    cfg: Config,
    mut sim: Simulator,
    mut commands: mpsc::UnboundedReceiver<Envelope>,
    frames: broadcast::Sender<String>,
) {
    let dt = sim.dt();
    let every = ((1.0 / dt) / FRAME_RATE).floor().max(1.0) as u64;
    // `interval` keeps its schedule anchored to the start time, so late ticks
    // are caught up instead of accumulating drift.
    let mut clock = tokio::time::interval(Duration::from_secs_f64(dt));
    let mut count: u64 = 0;
    loop {
        clock.tick().await;
        while let Ok(env) = commands.try_recv() {
            if let Err(e) = apply(&mut sim, &cfg, env.cmd) {
                let _ = env.reply.send(error_frame(e));
            }
        }
        let records = match sim.step() {
            Ok(r) => r,
            Err(e) => {
                log::error!("simulation step failed: {e}; resetting");
                match live_simulator(&cfg) {
                    Ok(s) => sim = s,
                    Err(e) => {
                        log::error!("cannot rebuild simulation: {e}");
                        return;
                    }
                }
                continue;
            }
        };
        if count.is_multiple_of(every) && frames.receiver_count() > 0 {
            let frame = StateFrame::from_records(&records, sim.supervisor().vor_enabled);
            match serde_json::to_string(&frame) {
                Ok(json) => {
                    let _ = frames.send(json);
                }
                Err(e) => log::error!("cannot serialise frame: {e}"),
            }
        }
        count += 1;
    }
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn connection(socket: WebSocket, state: AppState) {
    let (mut sink, mut stream) = socket.split();
    let mut frames = state.frames.subscribe();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();
    loop {
        let out = tokio::select! {
            f = frames.recv() => match f {
                Ok(json) => json,
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => break,
            },
            Some(e) = reply_rx.recv() => e,
            msg = stream.next() => match msg {
                Some(Ok(Message::Text(text))) => {
                    match serde_json::from_str::<ClientCommand>(&text) {
                        Ok(cmd) => {
                            if state.commands.send(Envelope { cmd, reply: reply_tx.clone() }).is_err() {
                                break;
                            }
                            continue;
                        }
                        Err(e) => error_frame(format!("malformed command: {e}")),
                    }
                }
                Some(Ok(Message::Binary(_))) => error_frame("binary messages are not supported"),
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => continue,
            },
        };
        if sink.send(Message::Text(out)).await.is_err() {
            break;
        }
    }
}

/// A running server; dropping it leaves the tasks running until
/// [`ServerHandle::shutdown`] or runtime exit.
pub struct ServerHandle {
    pub addr: SocketAddr,
    server: JoinHandle<()>,
    sim: JoinHandle<()>,
}

impl ServerHandle {
    pub fn shutdown(self) {
        self.server.abort();
        self.sim.abort();
    }
}

/// Bind `addr` and start the simulation and HTTP tasks on the current
/// runtime.
pub async fn start(cfg: Config, addr: SocketAddr, ui_dir: Option<PathBuf>) -> Result<ServerHandle, CliError> {
    let sim = live_simulator(&cfg)?;
    let (cmd_tx, cmd_rx) = mpsc::unbounded_channel();
    let (frame_tx, _) = broadcast::channel(64);
    let state = AppState { commands: cmd_tx, frames: frame_tx.clone() };

    let mut app = Router::new().route("/ws", get(ws_handler)).with_state(state);
    if let Some(dir) = ui_dir.filter(|d| d.is_dir()) {
        log::info!("serving UI from {}", dir.display());
        app = app.fallback_service(ServeDir::new(dir));
    }
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let sim = tokio::spawn(sim_loop(cfg, sim, cmd_rx, frame_tx));
    let server = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            log::error!("server error: {e}");
        }
    });
    Ok(ServerHandle { addr, server, sim })
}

pub fn cmd_serve(args: ServeArgs) -> Result<(), CliError> {
    let cfg = Config::load(args.config.as_deref())?;
    let ip: std::net::IpAddr = args
        .host
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid host address {:?}", args.host)))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let handle = start(cfg, SocketAddr::new(ip, args.port), Some(args.ui_dir)).await?;
        println!("listening on ws://{}/ws", handle.addr);
        tokio::signal::ctrl_c().await?;
        handle.shutdown();
        Ok(())
    })
}
