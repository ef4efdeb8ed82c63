//! Sweep specifications: the per-command parameter schema, config files and flag overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use twistlab::{GridSpec, Scale};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    EchoSweep,
    NoiseSweep,
    CavityGain,
    CavityMap,
    RydbergDesign,
    Baselines,
    Wigner,
    OracleCheck,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::EchoSweep,
        Command::NoiseSweep,
        Command::CavityGain,
        Command::CavityMap,
        Command::RydbergDesign,
        Command::Baselines,
        Command::Wigner,
        Command::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::EchoSweep => "echo-sweep",
            Command::NoiseSweep => "noise-sweep",
            Command::CavityGain => "cavity-gain",
            Command::CavityMap => "cavity-map",
            Command::RydbergDesign => "rydberg-design",
            Command::Baselines => "baselines",
            Command::Wigner => "wigner",
            Command::OracleCheck => "oracle-check",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::EchoSweep => "Echo sensitivity and gain versus twisting strength",
            Command::NoiseSweep => "Echo, squeezing and GHZ gain versus detection resolution",
            Command::CavityGain => "Optimized cavity-twisting gain over atom number, cooperativity and detuning",
            Command::CavityMap => "Cavity drive parameters mapped to twist, dephasing and scattering",
            Command::RydbergDesign => "Rydberg-dressing detuning window and constrained gain versus atom number",
            Command::Baselines => "Echo gain against QCRB, squeezing and reference limits versus twisting strength",
            Command::Wigner => "Spherical Wigner function of the twisted state",
            Command::OracleCheck => "Compare the echo pipeline with dense matrix exponentials",
        }
    }

    pub fn schema(self) -> &'static [ParamDef] {
        match self {
            Command::EchoSweep => ECHO_SWEEP,
            Command::NoiseSweep => NOISE_SWEEP,
            Command::CavityGain => CAVITY_GAIN,
            Command::CavityMap => CAVITY_MAP,
            Command::RydbergDesign => RYDBERG_DESIGN,
            Command::Baselines => BASELINES,
            Command::Wigner => WIGNER,
            Command::OracleCheck => ORACLE_CHECK,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| CliError::config("command", format!("unknown command '{s}'")))
    }
}

/// What a parameter accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// Atom number, at least one.
    Atoms,
    /// Positive integer other than an atom number.
    Count,
    Float,
    Flag,
    Scale,
    /// A grid of reals: `min:max:points[:lin|log]` or a comma list.
    Grid,
    /// A grid of atom numbers; range points are rounded and deduplicated.
    AtomGrid,
    /// A real or the given keyword.
    FloatOr(&'static str),
    /// A grid or the given keyword.
    GridOr(&'static str),
}

#[derive(Clone, Copy, Debug)]
pub struct ParamDef {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

const fn p(key: &'static str, kind: Kind, default: &'static str, help: &'static str) -> ParamDef {
    ParamDef {
        key,
        kind,
        default,
        help,
    }
}

const Q_MAX_HELP: &str = "Largest twisting strength; auto = N*pi/2";

static ECHO_SWEEP: &[ParamDef] = &[
    p("n", Kind::Atoms, "1000", "Number of atoms"),
    p("q-min", Kind::Float, "0.1", "Smallest twisting strength"),
    p("q-max", Kind::FloatOr("auto"), "auto", Q_MAX_HELP),
    p("points", Kind::Count, "200", "Number of twisting strengths"),
    p("scale", Kind::Scale, "log", "Spacing of the twisting grid (lin or log)"),
    p("r-det", Kind::Float, "0", "Detection noise relative to the coherent-state projection noise"),
    p("include-optimum", Kind::Flag, "true", "Insert the optimal twisting strength into the grid"),
];

static NOISE_SWEEP: &[ParamDef] = &[
    p("n", Kind::Atoms, "1000", "Number of atoms"),
    p("q", Kind::FloatOr("opt"), "opt", "Echo twisting strength; opt = noiseless optimum"),
    p("delta-n", Kind::Grid, "0.1:1000:81:log", "Detection resolution in atom number"),
];

static CAVITY_GAIN: &[ParamDef] = &[
    p("n", Kind::AtomGrid, "100000", "Atom numbers"),
    p("eta", Kind::Grid, "1", "Single-atom cooperativities"),
    p("d", Kind::GridOr("free"), "free", "Cavity detunings in half linewidths; free = optimized"),
    p("r", Kind::Float, "0.5", "Probability that a scattered photon flips the atom"),
];

static CAVITY_MAP: &[ParamDef] = &[
    p("n", Kind::Atoms, "1000", "Number of atoms"),
    p("photons", Kind::Grid, "1000:10000000:41:log", "Photons transmitted through the cavity"),
    p("phase", Kind::Float, "0.001", "Single-atom phase shift of a photon"),
    p("d", Kind::Float, "1", "Cavity detuning in half linewidths"),
    p("eta", Kind::Float, "1", "Single-atom cooperativity"),
];

static RYDBERG_DESIGN: &[ParamDef] = &[
    p("n", Kind::AtomGrid, "2:2000:120:log", "Atom numbers"),
    p("epsilon", Kind::Float, "0.1", "Rydberg population fraction"),
    p("c-tilde-min", Kind::Float, "1e10", "Lower end of the C6/(Gamma a^6) band"),
    p("c-tilde-max", Kind::Float, "1e11", "Upper end of the C6/(Gamma a^6) band"),
];

static BASELINES: &[ParamDef] = &[
    p("n", Kind::Atoms, "1000", "Number of atoms"),
    p("q-min", Kind::Float, "0.1", "Smallest twisting strength"),
    p("q-max", Kind::FloatOr("auto"), "auto", Q_MAX_HELP),
    p("points", Kind::Count, "200", "Number of twisting strengths"),
    p("scale", Kind::Scale, "log", "Spacing of the twisting grid (lin or log)"),
];

static WIGNER: &[ParamDef] = &[
    p("n", Kind::Atoms, "30", "Number of atoms"),
    p("q", Kind::FloatOr("opt"), "opt", "Twisting strength; opt = echo optimum"),
    p("n-theta", Kind::Count, "91", "Polar samples, poles included"),
    p("n-phi", Kind::Count, "180", "Azimuthal samples"),
];

static ORACLE_CHECK: &[ParamDef] = &[
    p("n", Kind::Atoms, "4", "Number of atoms"),
    p("q", Kind::FloatOr("opt"), "opt", "Twisting strength; opt = echo optimum"),
    p("phi", Kind::Float, "0.01", "Rotation angle between the twists"),
];

/// Keys accepted in a config file besides the command parameters.
const FILE_KEYS: [&str; 3] = ["command", "out", "format"];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::config("format", format!("unknown format '{other}' (csv or json)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// A parsed parameter value.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(usize),
    Float(f64),
    Flag(bool),
    Scale(Scale),
    Grid(GridSpec),
    Atoms(Vec<usize>),
    Keyword(&'static str),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Flag(v) => write!(f, "{v}"),
            Value::Scale(s) => write!(f, "{s}"),
            Value::Grid(g) => write!(f, "{g}"),
            Value::Atoms(v) => {
                let parts: Vec<String> = v.iter().map(|n| n.to_string()).collect();
                f.write_str(&parts.join(","))
            }
            Value::Keyword(k) => f.write_str(k),
        }
    }
}

fn parse_number(key: &str, raw: &str) -> Result<f64, CliError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| CliError::config(key, format!("malformed number '{raw}' for '{key}'")))?;
    if !v.is_finite() {
        return Err(CliError::config(key, format!("'{key}' must be finite, got '{raw}'")));
    }
    Ok(v)
}

fn parse_integer(key: &str, raw: &str) -> Result<usize, CliError> {
    // Accept 1e5 as well as 100000, but only for exact integers.
    let v = parse_number(key, raw)?;
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(CliError::config(key, format!("'{key}' must be a non-negative integer, got '{raw}'")));
    }
    Ok(v as usize)
}

fn parse_grid(key: &str, raw: &str) -> Result<GridSpec, CliError> {
    if raw.trim().is_empty() {
        return Err(CliError::config(key, format!("empty grid for '{key}'")));
    }
    raw.parse::<GridSpec>()
        .map_err(|e| CliError::config(key, format!("'{key}': {e}")))
}

fn atom_error(key: &str, got: usize) -> CliError {
    CliError::config(key, format!("atom count '{key}' must be at least 1, got {got}"))
}

fn parse_atom_grid(key: &str, raw: &str) -> Result<Vec<usize>, CliError> {
    let values = parse_grid(key, raw)?
        .values()
        .map_err(|e| CliError::config(key, format!("'{key}': {e}")))?;
    let mut out: Vec<usize> = Vec::with_capacity(values.len());
    for v in values {
        if v < 0.5 {
            return Err(atom_error(key, v.max(0.0).round() as usize));
        }
        let n = v.round() as usize;
        if out.last() != Some(&n) {
            out.push(n);
        }
    }
    Ok(out)
}

impl ParamDef {
    pub fn parse(&self, raw: &str) -> Result<Value, CliError> {
        let key = self.key;
        let raw = raw.trim();
        match self.kind {
            Kind::Atoms => {
                let n = parse_integer(key, raw)?;
                if n == 0 {
                    return Err(atom_error(key, n));
                }
                Ok(Value::Int(n))
            }
            Kind::Count => {
                let n = parse_integer(key, raw)?;
                if n == 0 {
                    return Err(CliError::config(key, format!("empty grid: '{key}' must be at least 1")));
                }
                Ok(Value::Int(n))
            }
            Kind::Float => parse_number(key, raw).map(Value::Float),
            Kind::Flag => match raw {
                "true" | "1" | "yes" => Ok(Value::Flag(true)),
                "false" | "0" | "no" => Ok(Value::Flag(false)),
                _ => Err(CliError::config(key, format!("'{key}' expects true or false, got '{raw}'"))),
            },
            Kind::Scale => raw
                .parse::<Scale>()
                .map(Value::Scale)
                .map_err(|e| CliError::config(key, format!("'{key}': {e}"))),
            Kind::Grid => parse_grid(key, raw).map(Value::Grid),
            Kind::AtomGrid => parse_atom_grid(key, raw).map(Value::Atoms),
            Kind::FloatOr(word) if raw == word => Ok(Value::Keyword(word)),
            Kind::FloatOr(_) => parse_number(key, raw).map(Value::Float),
            Kind::GridOr(word) if raw == word => Ok(Value::Keyword(word)),
            Kind::GridOr(_) => parse_grid(key, raw).map(Value::Grid),
        }
    }
}

/// A validated, fully resolved run description.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub command: Command,
    /// Every schema key, with defaults filled in.
    pub params: BTreeMap<&'static str, Value>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

/// Config keys may be written with underscores; flags use dashes.
pub fn normalize_key(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('_', "-").to_ascii_lowercase()
}

/// Reads a flat config: a JSON object or `key = value` lines with `#` comments.
pub fn read_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    if text.trim_start().starts_with('{') {
        return read_json_config(text);
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::config("config", format!("line {}: expected key = value, got '{line}'", i + 1))
        })?;
        out.push((normalize_key(k), v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

fn read_json_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    use serde_json::Value as J;
    let root: J = serde_json::from_str(text)
        .map_err(|e| CliError::config("config", format!("malformed JSON config: {e}")))?;
    let J::Object(map) = root else {
        return Err(CliError::config("config", "JSON config must be a flat object"));
    };
    let scalar = |key: &str, v: &J| -> Result<String, CliError> {
        match v {
            J::String(s) => Ok(s.clone()),
            J::Number(x) => Ok(x.to_string()),
            J::Bool(b) => Ok(b.to_string()),
            _ => Err(CliError::config(key, format!("'{key}' must be a string, number or boolean"))),
        }
    };
    let mut out = Vec::new();
    for (k, v) in &map {
        let key = normalize_key(k);
        let raw = match v {
            J::Array(items) => items
                .iter()
                .map(|x| scalar(&key, x))
                .collect::<Result<Vec<_>, _>>()?
                .join(","),
            other => scalar(&key, other)?,
        };
        out.push((key, raw));
    }
    Ok(out)
}

/// Builds a spec from config-file entries and flag overrides, in that precedence order.
///
/// Unknown keys are rejected, whatever their source.
pub fn resolve(
    command: Command,
    file: &[(String, String)],
    flags: &[(String, String)],
) -> Result<SweepSpec, CliError> {
    let schema = command.schema();
    let mut raw: BTreeMap<&'static str, String> = BTreeMap::new();
    let mut output_path = None;
    let mut format = None;

    for (key, value) in file.iter().chain(flags) {
        let key = normalize_key(key);
        if let Some(def) = schema.iter().find(|d| d.key == key) {
            raw.insert(def.key, value.clone());
            continue;
        }
        match key.as_str() {
            "command" => {
                let named: Command = value.parse()?;
                if named != command {
                    return Err(CliError::config(
                        "command",
                        format!("config is for '{named}' but '{command}' was invoked"),
                    ));
                }
            }
            "out" => output_path = Some(PathBuf::from(value)),
            "format" => format = Some(value.parse::<Format>()?),
            _ => {
                let known: Vec<&str> = schema.iter().map(|d| d.key).chain(FILE_KEYS).collect();
                return Err(CliError::config(
                    &key,
                    format!("unknown key '{key}' for {command} (expected one of: {})", known.join(", ")),
                ));
            }
        }
    }

    let mut params = BTreeMap::new();
    for def in schema {
        let text = raw.get(def.key).map_or(def.default, String::as_str);
        params.insert(def.key, def.parse(text)?);
    }
    Ok(SweepSpec {
        command,
        params,
        output_path,
        format: format.unwrap_or_default(),
    })
}

/// Reads the config file, if any, then applies the flags.
pub fn parse_config(
    command: Command,
    config_file: Option<&Path>,
    flags: &[(String, String)],
) -> Result<SweepSpec, CliError> {
    let file = match config_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            read_config_text(&text)?
        }
        None => Vec::new(),
    };
    resolve(command, &file, flags)
}

impl SweepSpec {
    /// Parses a spec from a config text alone.
    pub fn from_config_text(command: Command, text: &str) -> Result<Self, CliError> {
        resolve(command, &read_config_text(text)?, &[])
    }

    /// `key = value` lines that parse back to this spec.
    pub fn to_config_text(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        for (k, v) in &self.params {
            s.push_str(&format!("{k} = {v}\n"));
        }
        if let Some(p) = &self.output_path {
            s.push_str(&format!("out = {}\n", p.display()));
        }
        s.push_str(&format!("format = {}\n", self.format));
        s
    }

    fn get(&self, key: &str) -> &Value {
        self.params
            .get(key)
            .unwrap_or_else(|| panic!("'{key}' is not a parameter of {}", self.command))
    }

    pub fn int(&self, key: &str) -> usize {
        match self.get(key) {
            Value::Int(v) => *v,
            other => panic!("'{key}' holds {other:?}, not an integer"),
        }
    }

    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            other => panic!("'{key}' holds {other:?}, not a number"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        matches!(self.get(key), Value::Flag(true))
    }

    pub fn scale(&self, key: &str) -> Scale {
        match self.get(key) {
            Value::Scale(s) => *s,
            other => panic!("'{key}' holds {other:?}, not a scale"),
        }
    }

    /// `None` when the keyword was given instead of a number.
    pub fn float_or_keyword(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    /// `None` when the keyword was given instead of a grid.
    pub fn grid(&self, key: &str) -> Option<Vec<f64>> {
        match self.get(key) {
            Value::Grid(g) => Some(g.values().expect("validated at parse time")),
            _ => None,
        }
    }

    pub fn atoms(&self, key: &str) -> Vec<usize> {
        match self.get(key) {
            Value::Atoms(v) => v.clone(),
            other => panic!("'{key}' holds {other:?}, not atom numbers"),
        }
    }

    /// Resolved parameters as text, for table metadata.
    pub fn echo(&self) -> Vec<(String, String)> {
        self.params.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }
}
