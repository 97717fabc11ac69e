//! Teleoperation endpoint: JSON messages over a websocket, one environment
//! per connection.
//!
//! Every message is a JSON object with a `type` field and a `seq` number;
//! numbers sent by the server strictly increase within a session. On connect
//! the server sends `hello` carrying the protocol version and the robot's
//! control description. Clients then send `reset`, `action`, `key` and
//! `record_toggle`; the server answers each `reset` and accepted action with
//! a self-contained `state`, adds `episode_end` when the episode finishes and
//! reports problems with `error`.

use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use socnav_core::config::{ActionSpace, Steering};
use socnav_core::env::EpisodeRecord;
use socnav_core::metrics::{EpisodeSummary, Outcome, StepInfo};
use socnav_core::observe::{relationships, Relationships};
use socnav_core::{Action, EntityId, Env, ScenarioConfig, World};
use tungstenite::{Message, WebSocket};

use crate::error::RunError;
use crate::runner::{make_env, save_log, stop_action};

pub const WIRE_PROTOCOL: &str = "socnav-wire/1";

/// Number of key presses from standstill to full speed.
pub const KEY_STEPS: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlInfo {
    pub steering: Steering,
    pub action_space: ActionSpace,
    pub v_max: f64,
    pub omega_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatePayload {
    pub step: u32,
    pub world: World,
    /// Adjacency over all humans and objects.
    pub interactions: Relationships,
    pub reward: Option<f64>,
    pub info: Option<StepInfo>,
    pub terminated: bool,
    pub truncated: bool,
    pub recording: bool,
    pub fov_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WireMessage {
    Hello {
        protocol: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        control: Option<ControlInfo>,
    },
    Reset {
        seed: u64,
    },
    Action {
        action: Action,
    },
    Key {
        key: String,
    },
    State(Box<StatePayload>),
    /// From the client: `on` picks the state, absent flips it. From the
    /// server: the new state, and where a finished recording went.
    RecordToggle {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steps: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        saved: Option<String>,
    },
    EpisodeEnd {
        outcome: Outcome,
        summary: Box<EpisodeSummary>,
    },
    Error {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    #[serde(default)]
    pub seq: u64,
    #[serde(flatten)]
    pub message: WireMessage,
}

/// Action for a key press, or `None` for an unbound key.
///
/// | space | steering | key | action |
/// |---|---|---|---|
/// | continuous | non-holonomic | ArrowUp / ArrowDown | v ± v_max/4 |
/// | continuous | non-holonomic | ArrowLeft / ArrowRight | ω ± ω_max/4 |
/// | continuous | holonomic | w / s | vx = ±v_max |
/// | continuous | holonomic | a / d | vy = ±v_max |
/// | discrete | non-holonomic | ArrowUp, ArrowDown, ArrowLeft, ArrowRight | 1, 0, 3, 4 |
/// | discrete | holonomic | w, s, a, d | 1, 5, 3, 7 |
///
/// Space stops in every mode. Letters are case-insensitive. Increments start
/// from `current` and saturate at the caps.
pub fn key_to_action(key: &str, control: &ControlInfo, current: &Action) -> Option<Action> {
    let key = if key == "Space" { " " } else { key };
    let letter = key.to_ascii_lowercase();
    if key == " " {
        return Some(stop_action(control.steering, control.action_space));
    }
    match (control.action_space, control.steering) {
        (ActionSpace::Continuous, Steering::NonHolonomic) => {
            let (v, omega) = match *current {
                Action::ContinuousNonHolonomic { v, omega } => (v, omega),
                _ => (0.0, 0.0),
            };
            let dv = control.v_max / KEY_STEPS;
            let dw = control.omega_max / KEY_STEPS;
            let (v, omega) = match key {
                "ArrowUp" => (v + dv, omega),
                "ArrowDown" => (v - dv, omega),
                "ArrowLeft" => (v, omega + dw),
                "ArrowRight" => (v, omega - dw),
                _ => return None,
            };
            Some(Action::ContinuousNonHolonomic {
                v: v.clamp(-control.v_max, control.v_max),
                omega: omega.clamp(-control.omega_max, control.omega_max),
            })
        }
        (ActionSpace::Continuous, Steering::Holonomic) => {
            let v = control.v_max;
            let (vx, vy) = match letter.as_str() {
                "w" => (v, 0.0),
                "s" => (-v, 0.0),
                "a" => (0.0, v),
                "d" => (0.0, -v),
                _ => return None,
            };
            Some(Action::ContinuousHolonomic { vx, vy, omega: 0.0 })
        }
        (ActionSpace::Discrete, Steering::NonHolonomic) => {
            let index = match key {
                "ArrowUp" => 1,
                "ArrowDown" => 0,
                "ArrowLeft" => 3,
                "ArrowRight" => 4,
                _ => return None,
            };
            Some(Action::Discrete { index })
        }
        (ActionSpace::Discrete, Steering::Holonomic) => {
            let index = match letter.as_str() {
                "w" => 1,
                "s" => 5,
                "a" => 3,
                "d" => 7,
                _ => return None,
            };
            Some(Action::Discrete { index })
        }
    }
}

/// Protocol state of one connection.
pub struct Session {
    pub id: u64,
    env: Env,
    control: ControlInfo,
    seq: u64,
    command: Action,
    out: Option<PathBuf>,
    saved: usize,
    /// Records finished during this session, oldest first.
    pub records: Vec<EpisodeRecord>,
}

impl Session {
    pub fn new(
        id: u64,
        config: ScenarioConfig,
        base_dir: Option<&Path>,
        out: Option<PathBuf>,
    ) -> Result<Session, RunError> {
        let control = ControlInfo {
            steering: config.robot.steering,
            action_space: config.robot.action_space,
            v_max: config.robot.max_speed,
            omega_max: config.robot.max_angular_speed,
        };
        let env = make_env(config, base_dir)?;
        Ok(Session {
            id,
            command: stop_action(control.steering, control.action_space),
            env,
            control,
            seq: 0,
            out,
            saved: 0,
            records: Vec::new(),
        })
    }

    fn wrap(&mut self, message: WireMessage) -> Envelope {
        self.seq += 1;
        Envelope {
            seq: self.seq,
            message,
        }
    }

    fn error(&mut self, message: impl Into<String>) -> Envelope {
        self.wrap(WireMessage::Error {
            message: message.into(),
        })
    }

    pub fn hello(&mut self) -> Envelope {
        let msg = WireMessage::Hello {
            protocol: WIRE_PROTOCOL.to_string(),
            session: Some(self.id),
            control: Some(self.control),
        };
        self.wrap(msg)
    }

    fn state(
        &mut self,
        reward: Option<f64>,
        info: Option<StepInfo>,
        terminated: bool,
        truncated: bool,
    ) -> Envelope {
        let world = self.env.world().expect("state after reset").clone();
        let ids: Vec<EntityId> = world
            .humans
            .iter()
            .map(|h| h.entity.id)
            .chain(world.objects.iter().map(|o| o.id))
            .collect();
        let payload = StatePayload {
            step: world.step_index,
            interactions: relationships(&world, &ids),
            world,
            reward,
            info,
            terminated,
            truncated,
            recording: self.env.is_recording(),
            fov_deg: self.env.config().observation.robot_fov_deg,
        };
        self.wrap(WireMessage::State(Box::new(payload)))
    }

    /// Moves a non-empty recording out of the env; returns its step count
    /// and file name.
    fn take_record(&mut self) -> Result<(usize, Option<String>), RunError> {
        let Some(record) = self.env.stop_recording() else {
            return Ok((0, None));
        };
        let steps = record.steps.len();
        if steps == 0 {
            return Ok((0, None));
        }
        let mut saved = None;
        if let Some(dir) = &self.out {
            let name = format!("session{}_record{:03}.ndjson", self.id, self.saved);
            std::fs::create_dir_all(dir)
                .map_err(RunError::io(format!("cannot create {}", dir.display())))?;
            save_log(&dir.join(&name), &record, None)?;
            saved = Some(name);
        }
        self.saved += 1;
        self.records.push(record);
        Ok((steps, saved))
    }

    pub fn handle(&mut self, message: WireMessage) -> Vec<Envelope> {
        match self.dispatch(message) {
            Ok(replies) => replies,
            Err(e) => vec![self.error(e.to_string())],
        }
    }

    fn dispatch(&mut self, message: WireMessage) -> Result<Vec<Envelope>, RunError> {
        match message {
            WireMessage::Hello { protocol, .. } if protocol == WIRE_PROTOCOL => Ok(Vec::new()),
            WireMessage::Hello { protocol, .. } => Ok(vec![self.error(format!(
                "protocol `{protocol}` not supported; server speaks {WIRE_PROTOCOL}"
            ))]),
            WireMessage::Reset { seed } => {
                let recording = self.env.is_recording();
                if recording {
                    self.take_record()?;
                }
                self.env.reset(seed)?;
                if recording {
                    self.env.start_recording();
                }
                self.command = stop_action(self.control.steering, self.control.action_space);
                Ok(vec![self.state(None, None, false, false)])
            }
            WireMessage::Action { action } => self.step(action),
            WireMessage::Key { key } => match key_to_action(&key, &self.control, &self.command) {
                Some(action) => {
                    self.command = action;
                    self.step(action)
                }
                None => Ok(vec![self.error(format!("key `{key}` is not bound"))]),
            },
            WireMessage::RecordToggle { on, .. } => {
                let want = on.unwrap_or(!self.env.is_recording());
                let (steps, saved) = if want {
                    self.env.start_recording();
                    (0, None)
                } else {
                    self.take_record()?
                };
                let reply = WireMessage::RecordToggle {
                    on: Some(want),
                    steps: Some(steps),
                    saved,
                };
                Ok(vec![self.wrap(reply)])
            }
            WireMessage::State(_) | WireMessage::EpisodeEnd { .. } | WireMessage::Error { .. } => {
                Ok(vec![self.error(
                    "clients may not send state, episode_end or error messages",
                )])
            }
        }
    }

    fn step(&mut self, action: Action) -> Result<Vec<Envelope>, RunError> {
        let out = self.env.step(&action)?;
        let mut replies = vec![self.state(
            Some(out.reward),
            Some(out.info.clone()),
            out.terminated,
            out.truncated,
        )];
        if out.terminated || out.truncated {
            let summary = self.env.summary().expect("stepped");
            replies.push(self.wrap(WireMessage::EpisodeEnd {
                outcome: summary.outcome,
                summary: Box::new(summary),
            }));
        }
        Ok(replies)
    }

    /// Saves a recording still in progress.
    pub fn finish(&mut self) -> Result<(), RunError> {
        self.take_record().map(|_| ())
    }
}

fn send(ws: &mut WebSocket<TcpStream>, env: &Envelope) -> Result<(), RunError> {
    let text = serde_json::to_string(env).expect("wire messages serialize");
    ws.send(Message::Text(text))?;
    Ok(())
}

fn run_connection(stream: TcpStream, session: Result<Session, RunError>) -> Result<(), RunError> {
    let mut ws = tungstenite::accept(stream).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(e) => RunError::Socket(e),
        tungstenite::HandshakeError::Interrupted(_) => {
            RunError::Usage(String::from("websocket handshake interrupted"))
        }
    })?;
    let mut session = match session {
        Ok(s) => s,
        Err(e) => {
            send(
                &mut ws,
                &Envelope {
                    seq: 1,
                    message: WireMessage::Error {
                        message: e.to_string(),
                    },
                },
            )?;
            let _ = ws.close(None);
            return Err(e);
        }
    };
    let hello = session.hello();
    send(&mut ws, &hello)?;
    loop {
        let text = match ws.read() {
            Ok(Message::Text(t)) => t,
            Ok(Message::Close(_)) => break,
            Ok(_) => continue,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break,
            Err(e) => {
                session.finish()?;
                return Err(e.into());
            }
        };
        let replies = match serde_json::from_str::<Envelope>(&text) {
            Ok(env) => session.handle(env.message),
            Err(e) => vec![session.error(format!("malformed message: {e}"))],
        };
        for r in &replies {
            send(&mut ws, r)?;
        }
    }
    session.finish()
}

/// Accepts connections until the listener fails, each on its own thread.
pub fn serve(
    listener: TcpListener,
    config: ScenarioConfig,
    base_dir: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(), RunError> {
    let next_id = Arc::new(AtomicU64::new(1));
    for stream in listener.incoming() {
        let stream = stream.map_err(RunError::io("accept"))?;
        let id = next_id.fetch_add(1, Ordering::Relaxed);
        let session = Session::new(id, config.clone(), base_dir.as_deref(), out.clone());
        std::thread::spawn(move || {
            if let Err(e) = run_connection(stream, session) {
                eprintln!("session {id}: {e}");
            }
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use socnav_core::preset;

    fn control(space: ActionSpace, steering: Steering) -> ControlInfo {
        ControlInfo {
            steering,
            action_space: space,
            v_max: 1.0,
            omega_max: 2.0,
        }
    }

    #[test]
    fn key_table() {
        let nh = control(ActionSpace::Continuous, Steering::NonHolonomic);
        let stop = Action::STOP_NON_HOLONOMIC;
        let cont = |v, omega| Some(Action::ContinuousNonHolonomic { v, omega });
        assert_eq!(key_to_action("ArrowUp", &nh, &stop), cont(0.25, 0.0));
        assert_eq!(key_to_action("ArrowDown", &nh, &stop), cont(-0.25, 0.0));
        assert_eq!(key_to_action("ArrowLeft", &nh, &stop), cont(0.0, 0.5));
        assert_eq!(key_to_action("ArrowRight", &nh, &stop), cont(0.0, -0.5));
        assert_eq!(
            key_to_action(
                " ",
                &nh,
                &Action::ContinuousNonHolonomic { v: 0.5, omega: 1.0 }
            ),
            cont(0.0, 0.0)
        );
        assert_eq!(
            key_to_action(
                "ArrowUp",
                &nh,
                &Action::ContinuousNonHolonomic { v: 0.9, omega: 0.3 }
            ),
            cont(1.0, 0.3)
        );
        assert_eq!(key_to_action("q", &nh, &stop), None);

        let h = control(ActionSpace::Continuous, Steering::Holonomic);
        let hol = |vx, vy| Some(Action::ContinuousHolonomic { vx, vy, omega: 0.0 });
        assert_eq!(key_to_action("w", &h, &stop), hol(1.0, 0.0));
        assert_eq!(key_to_action("W", &h, &stop), hol(1.0, 0.0));
        assert_eq!(key_to_action("s", &h, &stop), hol(-1.0, 0.0));
        assert_eq!(key_to_action("a", &h, &stop), hol(0.0, 1.0));
        assert_eq!(key_to_action("d", &h, &stop), hol(0.0, -1.0));
        assert_eq!(key_to_action("Space", &h, &stop), hol(0.0, 0.0));
        assert_eq!(key_to_action("ArrowUp", &h, &stop), None);

        let d = |i| Some(Action::Discrete { index: i });
        let dn = control(ActionSpace::Discrete, Steering::NonHolonomic);
        let keys = ["ArrowUp", "ArrowDown", "ArrowLeft", "ArrowRight", " "];
        let got: Vec<_> = keys.iter().map(|k| key_to_action(k, &dn, &stop)).collect();
        assert_eq!(got, [d(1), d(0), d(3), d(4), d(0)]);
        let dh = control(ActionSpace::Discrete, Steering::Holonomic);
        let got: Vec<_> = ["w", "s", "a", "d", " ", "x"]
            .iter()
            .map(|k| key_to_action(k, &dh, &stop))
            .collect();
        assert_eq!(got, [d(1), d(5), d(3), d(7), d(0), None]);
    }

    #[test]
    fn envelope_json_shape() {
        let e = Envelope {
            seq: 3,
            message: WireMessage::Reset { seed: 9 },
        };
        let text = serde_json::to_string(&e).unwrap();
        assert_eq!(text, r#"{"seq":3,"type":"reset","seed":9}"#);
        assert_eq!(serde_json::from_str::<Envelope>(&text).unwrap(), e);
        let a: Envelope =
            serde_json::from_str(r#"{"type":"action","action":{"type":"discrete","index":2}}"#)
                .unwrap();
        assert_eq!(
            a.message,
            WireMessage::Action {
                action: Action::Discrete { index: 2 }
            }
        );
    }

    #[test]
    fn session_sequence_increases_and_steps_once() {
        let mut s = Session::new(1, preset(1).unwrap(), None, None).unwrap();
        let mut seqs = vec![s.hello().seq];
        let r = s.handle(WireMessage::Action {
            action: Action::Discrete { index: 0 },
        });
        assert!(matches!(r[0].message, WireMessage::Error { .. }));
        seqs.push(r[0].seq);
        let r = s.handle(WireMessage::Reset { seed: 4 });
        let WireMessage::State(first) = &r[0].message else {
            panic!()
        };
        assert_eq!(first.step, 0);
        seqs.push(r[0].seq);
        let r = s.handle(WireMessage::Key {
            key: String::from("ArrowUp"),
        });
        let WireMessage::State(next) = &r[0].message else {
            panic!()
        };
        assert_eq!(next.step, 1);
        seqs.extend(r.iter().map(|e| e.seq));
        assert!(seqs.windows(2).all(|w| w[0] < w[1]));
    }
}
