//! Social scorer registry.
//!
//! Descriptors:
//!
//! - `surrogate`: the built-in analytic scorer with default shape;
//! - `file:<path>`: the analytic scorer with its shape read from a TOML file
//!   of [`SurrogateParams`] keys;
//! - `process:<program> [args...]`: an external process speaking the pipe
//!   protocol below. Arguments are split on whitespace.
//!
//! Pipe protocol: on start the process writes the banner line
//! `socnav-scorer/1`. Then, per request, it reads one `state` log line (a JSON
//! object `{"kind":"state","state":<world>}`) and answers with one line
//! holding a decimal number in [0, 1]. One request is in flight at a time.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use socnav_core::error::ScorerError;
use socnav_core::reward::{
    builtin_scorer, check_score, SocialScorer, SurrogateParams, SurrogateScorer,
};
use socnav_core::World;

use crate::log::{state_line, LogLine};

pub const SCORER_BANNER: &str = "socnav-scorer/1";

/// Resolves a scorer descriptor; relative `file:` paths are taken from
/// `base_dir` when given.
pub fn load_scorer(
    descriptor: &str,
    base_dir: Option<&Path>,
) -> Result<Box<dyn SocialScorer>, ScorerError> {
    if let Some(path) = descriptor.strip_prefix("file:") {
        let path = resolve(path, base_dir);
        let params = read_params(&path)?;
        return Ok(Box::new(SurrogateScorer { params }));
    }
    if let Some(cmd) = descriptor.strip_prefix("process:") {
        return Ok(Box::new(ProcessScorer::spawn(cmd)?));
    }
    builtin_scorer(descriptor)
}

fn resolve(path: &str, base_dir: Option<&Path>) -> PathBuf {
    let p = PathBuf::from(path);
    match base_dir {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

pub fn read_params(path: &Path) -> Result<SurrogateParams, ScorerError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ScorerError::Handshake(format!("cannot read scorer file {}: {e}", path.display()))
    })?;
    toml::from_str(&text).map_err(|e| {
        ScorerError::Handshake(format!("scorer file {}: {}", path.display(), e.message()))
    })
}

/// A scorer running in a child process.
pub struct ProcessScorer {
    command: String,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ProcessScorer {
    pub fn spawn(command: &str) -> Result<ProcessScorer, ScorerError> {
        let mut words = command.split_whitespace();
        let program = words
            .next()
            .ok_or_else(|| ScorerError::Handshake(String::from("empty scorer command")))?;
        let mut child = Command::new(program)
            .args(words)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| ScorerError::Handshake(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped");
        let mut stdout = BufReader::new(child.stdout.take().expect("piped"));
        let mut banner = String::new();
        let read = stdout.read_line(&mut banner);
        if !matches!(read, Ok(n) if n > 0) || banner.trim_end() != SCORER_BANNER {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ScorerError::Handshake(format!(
                "`{command}` sent {:?} instead of the banner {SCORER_BANNER:?}",
                banner.trim_end()
            )));
        }
        Ok(ProcessScorer {
            command: command.to_string(),
            child,
            stdin,
            stdout,
        })
    }
}

impl SocialScorer for ProcessScorer {
    fn name(&self) -> &str {
        &self.command
    }

    fn score(&mut self, world: &World) -> Result<f64, ScorerError> {
        let fail = |what: String| ScorerError::Failed(what);
        let mut request = state_line(world);
        request.push('\n');
        self.stdin
            .write_all(request.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| fail(format!("write to scorer: {e}")))?;
        let mut reply = String::new();
        match self.stdout.read_line(&mut reply) {
            Ok(0) => return Err(fail(String::from("scorer closed its output"))),
            Err(e) => return Err(fail(format!("read from scorer: {e}"))),
            Ok(_) => {}
        }
        let value: f64 = reply
            .trim()
            .parse()
            .map_err(|_| fail(format!("not a number: {:?}", reply.trim())))?;
        check_score(value)
    }
}

impl Drop for ProcessScorer {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Reference implementation of the scorer side of the pipe protocol, backed
/// by the analytic scorer. Returns when the input ends.
pub fn serve_scorer<R: BufRead, W: Write>(
    params: SurrogateParams,
    input: R,
    mut output: W,
) -> std::io::Result<()> {
    let mut scorer = SurrogateScorer { params };
    writeln!(output, "{SCORER_BANNER}")?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        let world = match serde_json::from_str::<LogLine>(&line) {
            Ok(LogLine::State { state }) => state,
            _ => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    "expected a state record",
                ))
            }
        };
        let s = scorer
            .score(&world)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        writeln!(output, "{s}")?;
        output.flush()?;
    }
    Ok(())
}
