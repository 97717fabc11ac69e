//! Strict TOML loading for scenario configs.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use socnav_core::config::{CountRange, NoiseSpec, RoomKind, ScenarioConfig, Span};
use socnav_core::error::ConfigViolation;
use socnav_core::{Vec2, Wall};
use thiserror::Error;
use toml_edit::{ImDocument, Item, TableLike};

/// Line and column, both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl Location {
    pub fn of(src: &str, offset: usize) -> Location {
        let before = &src[..offset.min(src.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        Location { line, column }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownKey {
    /// Dotted path of the rejected key.
    pub path: String,
    pub at: Option<Location>,
    pub suggestion: Option<String>,
}

impl fmt::Display for UnknownKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown key `{}`", self.path)?;
        if let Some(at) = self.at {
            write!(f, " at {at}")?;
        }
        if let Some(s) = &self.suggestion {
            write!(f, "; did you mean `{s}`?")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("syntax error at {at}: {message}")]
    Syntax { at: Location, message: String },
    #[error("{}", list(.0))]
    UnknownKeys(Vec<UnknownKey>),
    #[error("bad value{}: {message}", .at.map(|a| format!(" at {a}")).unwrap_or_default())]
    Value {
        at: Option<Location>,
        message: String,
    },
    #[error("{}", list(.0))]
    Invalid(Vec<ConfigViolation>),
}

fn list<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn span_location(src: &str, span: Option<Range<usize>>) -> Option<Location> {
    span.map(|s| Location::of(src, s.start))
}

/// A config with every optional key present, so its serialization lists the
/// whole schema.
fn schema() -> toml::Table {
    let mut c = ScenarioConfig::default();
    c.room.shape = RoomKind::LShaped;
    c.room.width = Some(1.0);
    c.room.height = Some(1.0);
    c.room.notch_width = Some(1.0);
    c.room.notch_height = Some(1.0);
    c.room.corridors = vec![Wall {
        a: Vec2::ZERO,
        b: Vec2::new(1.0, 0.0),
        thickness: 0.0,
    }];
    c.observation.robot_range = Some(1.0);
    let n = Some(NoiseSpec {
        mean: 0.0,
        std: 0.0,
    });
    c.noise.humans = n;
    c.noise.objects = n;
    c.noise.walls = n;
    c.humans.count = CountRange { min: 0, max: 1 };
    c.objects.table_radius = Span::new(0.0, 1.0);
    toml::Table::try_from(&c).expect("config serializes to a table")
}

/// Closest candidate by edit distance, else the one sharing the longest
/// prefix of at least three characters.
fn nearest(key: &str, candidates: &[&String]) -> Option<String> {
    let by_edits = candidates
        .iter()
        .map(|c| (strsim::normalized_damerau_levenshtein(key, c), c))
        .filter(|(score, _)| *score >= 0.5)
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let by_prefix = || {
        candidates
            .iter()
            .map(|c| {
                (
                    key.chars()
                        .zip(c.chars())
                        .take_while(|(a, b)| a == b)
                        .count(),
                    c,
                )
            })
            .filter(|(n, _)| *n >= 3)
            .max_by_key(|(n, _)| *n)
    };
    by_edits
        .map(|(_, c)| c)
        .or_else(|| by_prefix().map(|(_, c)| c))
        .map(|c| c.to_string())
}

fn check_table(
    src: &str,
    doc: &dyn TableLike,
    schema: &toml::Table,
    prefix: &str,
    out: &mut Vec<UnknownKey>,
) {
    for (key, item) in doc.iter() {
        let path = if prefix.is_empty() {
            key.to_string()
        } else {
            format!("{prefix}.{key}")
        };
        match schema.get(key) {
            None => {
                let at = span_location(src, doc.key(key).and_then(|k| k.span()));
                let suggestion = nearest(key, &schema.keys().collect::<Vec<_>>()).map(|s| {
                    if prefix.is_empty() {
                        s
                    } else {
                        format!("{prefix}.{s}")
                    }
                });
                out.push(UnknownKey {
                    path,
                    at,
                    suggestion,
                });
            }
            Some(toml::Value::Table(sub)) => {
                if let Some(t) = item.as_table_like() {
                    check_table(src, t, sub, &path, out);
                }
            }
            Some(toml::Value::Array(elems)) => {
                let Some(toml::Value::Table(sub)) = elems.first() else {
                    continue;
                };
                let tables: Vec<&dyn TableLike> = match item {
                    Item::ArrayOfTables(aot) => aot.iter().map(|t| t as &dyn TableLike).collect(),
                    _ => item
                        .as_array()
                        .map(|a| {
                            a.iter()
                                .filter_map(|v| v.as_inline_table())
                                .map(|t| t as &dyn TableLike)
                                .collect()
                        })
                        .unwrap_or_default(),
                };
                for (i, t) in tables.into_iter().enumerate() {
                    check_table(src, t, sub, &format!("{path}[{i}]"), out);
                }
            }
            Some(_) => {}
        }
    }
}

/// Parses and validates a config from TOML text.
///
/// Unknown keys are all reported with their position and the closest known
/// key; constraint violations are all reported together.
pub fn parse_config(src: &str) -> Result<ScenarioConfig, ConfigError> {
    let doc = ImDocument::parse(src).map_err(|e| ConfigError::Syntax {
        at: span_location(src, e.span()).unwrap_or(Location { line: 1, column: 1 }),
        message: e.message().trim().to_string(),
    })?;
    let mut unknown = Vec::new();
    check_table(src, doc.as_table(), &schema(), "", &mut unknown);
    if !unknown.is_empty() {
        return Err(ConfigError::UnknownKeys(unknown));
    }
    let config: ScenarioConfig = toml::from_str(src).map_err(|e| ConfigError::Value {
        at: span_location(src, e.span()),
        message: e.message().trim().to_string(),
    })?;
    let config = config.normalized();
    config.validate().map_err(ConfigError::Invalid)?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&src)
}

/// TOML text that loads back to `config`.
pub fn to_toml(config: &ScenarioConfig) -> String {
    toml::to_string(config).expect("config serializes to TOML")
}
