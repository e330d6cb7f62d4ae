//! Sectioned `key = value` run configuration.
//!
//! ```text
//! command = sweep          # verify | sweep | sequences | interpolate
//! seed = 42
//!
//! [problem.1]
//! sigma = affine(1.0, 0.5)   # or poly(0,0,1) or sampled(tanh, order=128)
//! b = affine(0, 0)
//! p = 1.0
//!
//! [sweep]
//! k = 8 16 32 64 128 256 512
//! tol = 1e-6
//!
//! [output]
//! path = report.csv
//!
//! [sequences]
//! w = 1+2i
//! n_max = 1000000
//!
//! [interpolate]
//! y_max = 20
//! y_samples = 401
//! phi_k = 32
//! ```
//!
//! Sampled multipliers come from a fixed registry (`tanh`, `sin`, `atan`,
//! `gauss_bump`); parse errors carry the offending line number.

use std::fmt;

use hermsob::MultiplierSpec;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Verify,
    Sweep,
    Sequences,
    Interpolate,
}

impl CommandKind {
    pub fn parse(s: &str) -> Option<CommandKind> {
        match s {
            "verify" => Some(CommandKind::Verify),
            "sweep" => Some(CommandKind::Sweep),
            "sequences" => Some(CommandKind::Sequences),
            "interpolate" => Some(CommandKind::Interpolate),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub index: usize,
    pub sigma: MultiplierSpec,
    pub b: MultiplierSpec,
    pub p: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub seed: u64,
    pub problems: Vec<ProblemConfig>,
    pub k_schedule: Vec<usize>,
    pub tol: f64,
    pub output: Option<String>,
    pub seq_w: Complex64,
    pub seq_n_max: u64,
    pub interp_y_max: f64,
    pub interp_y_samples: usize,
    pub interp_phi_k: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: CommandKind::Verify,
            seed: 0,
            problems: Vec::new(),
            k_schedule: vec![8, 16, 32, 64, 128, 256, 512],
            tol: 1e-6,
            output: None,
            seq_w: Complex64::new(1.0, 0.0),
            seq_n_max: 1_000_000,
            interp_y_max: 20.0,
            interp_y_samples: 401,
            interp_phi_k: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError {
        line,
        msg: msg.into(),
    }
}

/// The fixed registry of sampled multipliers with their derivative bounds.
pub fn registry_multiplier(name: &str, order: Option<usize>) -> Option<MultiplierSpec> {
    match name {
        "tanh" => Some(MultiplierSpec::sampled(
            |x| x.tanh(),
            "tanh",
            order,
            Some(1.0),
        )),
        "sin" => Some(MultiplierSpec::sampled(
            |x| x.sin(),
            "sin",
            order,
            Some(1.0),
        )),
        "atan" => Some(MultiplierSpec::sampled(
            |x| x.atan(),
            "atan",
            order,
            Some(1.0),
        )),
        "gauss_bump" => Some(MultiplierSpec::sampled(
            |x| (-x * x).exp(),
            "gauss_bump",
            order,
            Some((2.0 / std::f64::consts::E).sqrt()),
        )),
        _ => None,
    }
}

fn parse_multiplier(value: &str, line: usize) -> Result<MultiplierSpec, ParseError> {
    let value = value.trim();
    let open = value
        .find('(')
        .ok_or_else(|| err(line, format!("malformed multiplier '{value}'")))?;
    if !value.ends_with(')') {
        return Err(err(line, format!("malformed multiplier '{value}'")));
    }
    let kind = &value[..open];
    let args: Vec<&str> = value[open + 1..value.len() - 1]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let parse_f64 = |s: &str| -> Result<f64, ParseError> {
        s.parse()
            .map_err(|_| err(line, format!("bad number '{s}' in multiplier")))
    };
    match kind {
        "affine" => {
            if args.len() != 2 {
                return Err(err(
                    line,
                    format!("affine takes 2 arguments, got {}", args.len()),
                ));
            }
            Ok(MultiplierSpec::affine(
                parse_f64(args[0])?,
                parse_f64(args[1])?,
            ))
        }
        "poly" => {
            if args.is_empty() {
                return Err(err(line, "poly needs at least one coefficient"));
            }
            let coeffs = args
                .iter()
                .map(|s| parse_f64(s))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(MultiplierSpec::poly(coeffs))
        }
        "sampled" => {
            if args.is_empty() || args.len() > 2 {
                return Err(err(line, "sampled takes a name and an optional order=N"));
            }
            let name = args[0];
            let order = match args.get(1) {
                None => None,
                Some(s) => {
                    let v = s
                        .strip_prefix("order=")
                        .ok_or_else(|| err(line, format!("expected order=N, got '{s}'")))?;
                    Some(
                        v.parse::<usize>()
                            .map_err(|_| err(line, format!("bad quadrature order '{v}'")))?,
                    )
                }
            };
            registry_multiplier(name, order)
                .ok_or_else(|| err(line, format!("unknown sampled multiplier '{name}'")))
        }
        other => Err(err(line, format!("unknown multiplier kind '{other}'"))),
    }
}

/// Parse `1`, `-2.5`, `2i`, `1+2i`, `0.5-1i`.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim().replace(' ', "");
    if let Some(im) = s.strip_suffix('i') {
        // find a +/- separating real and imaginary parts (not at position 0,
        // not following an exponent marker)
        let bytes = im.as_bytes();
        let mut split = None;
        for k in (1..bytes.len()).rev() {
            let c = bytes[k] as char;
            if (c == '+' || c == '-') && !matches!(bytes[k - 1] as char, 'e' | 'E') {
                split = Some(k);
                break;
            }
        }
        match split {
            Some(k) => {
                let re: f64 = im[..k].parse().ok()?;
                let im_part = &im[k..];
                let imv: f64 = if im_part == "+" {
                    1.0
                } else if im_part == "-" {
                    -1.0
                } else {
                    im_part.parse().ok()?
                };
                Some(Complex64::new(re, imv))
            }
            None => {
                let imv: f64 = if im.is_empty() {
                    1.0
                } else if im == "-" {
                    -1.0
                } else {
                    im.parse().ok()?
                };
                Some(Complex64::new(0.0, imv))
            }
        }
    } else {
        s.parse().ok().map(|re| Complex64::new(re, 0.0))
    }
}

pub fn format_complex(w: Complex64) -> String {
    if w.im == 0.0 {
        format!("{}", w.re)
    } else if w.re == 0.0 {
        format!("{}i", w.im)
    } else if w.im < 0.0 {
        format!("{}{}i", w.re, w.im)
    } else {
        format!("{}+{}i", w.re, w.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Problem(usize),
    Sweep,
    Output,
    Sequences,
    Interpolate,
}

/// Partially parsed `[problem.N]` section: index, header line, sigma, b, p.
type ProblemDraft = (
    usize,
    usize,
    Option<MultiplierSpec>,
    Option<MultiplierSpec>,
    Option<f64>,
);

/// Parse the sectioned config text into a validated `RunConfig`.
pub fn parse_config(text: &str) -> Result<RunConfig, ParseError> {
    let mut config = RunConfig::default();
    let mut section = Section::Top;
    let mut problems: Vec<ProblemDraft> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(lineno, "unterminated section header"))?
                .trim();
            section = if let Some(idx) = name.strip_prefix("problem.") {
                let idx: usize = idx
                    .parse()
                    .map_err(|_| err(lineno, format!("bad problem index '{idx}'")))?;
                if problems.iter().any(|p| p.0 == idx) {
                    return Err(err(lineno, format!("duplicate section [problem.{idx}]")));
                }
                problems.push((idx, lineno, None, None, None));
                Section::Problem(problems.len() - 1)
            } else {
                match name {
                    "sweep" => Section::Sweep,
                    "output" => Section::Output,
                    "sequences" => Section::Sequences,
                    "interpolate" => Section::Interpolate,
                    other => return Err(err(lineno, format!("unknown section [{other}]"))),
                }
            };
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(lineno, format!("expected key = value, got '{line}'")))?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |v: &str| -> Result<f64, ParseError> {
            v.parse()
                .map_err(|_| err(lineno, format!("bad number '{v}'")))
        };
        match (section, key) {
            (Section::Top, "command") => {
                config.command = CommandKind::parse(value)
                    .ok_or_else(|| err(lineno, format!("unknown command '{value}'")))?;
            }
            (Section::Top, "seed") => {
                config.seed = value
                    .parse()
                    .map_err(|_| err(lineno, format!("bad seed '{value}'")))?;
            }
            (Section::Problem(slot), "sigma") => {
                problems[slot].2 = Some(parse_multiplier(value, lineno)?);
            }
            (Section::Problem(slot), "b") => {
                problems[slot].3 = Some(parse_multiplier(value, lineno)?);
            }
            (Section::Problem(slot), "p") => {
                problems[slot].4 = Some(parse_f64(value)?);
            }
            (Section::Sweep, "k") => {
                let ks = value
                    .split([' ', ','])
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<usize>()
                            .map_err(|_| err(lineno, format!("bad K value '{s}'")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if ks.is_empty() {
                    return Err(err(lineno, "empty K schedule"));
                }
                if !ks.windows(2).all(|w| w[0] < w[1]) {
                    return Err(err(lineno, "K schedule must be strictly increasing"));
                }
                if ks.iter().any(|&k| k == 0 || k > 8192) {
                    return Err(err(lineno, "K values must be in 1..=8192"));
                }
                config.k_schedule = ks;
            }
            (Section::Sweep, "tol") => {
                let tol = parse_f64(value)?;
                if tol <= 0.0 {
                    return Err(err(lineno, "tolerance must be positive"));
                }
                config.tol = tol;
            }
            (Section::Output, "path") => {
                config.output = Some(value.to_string());
            }
            (Section::Sequences, "w") => {
                config.seq_w = parse_complex(value)
                    .ok_or_else(|| err(lineno, format!("bad complex number '{value}'")))?;
            }
            (Section::Sequences, "n_max") => {
                config.seq_n_max = value
                    .parse()
                    .map_err(|_| err(lineno, format!("bad n_max '{value}'")))?;
                if config.seq_n_max < 100 {
                    return Err(err(lineno, "n_max must be at least 100"));
                }
            }
            (Section::Interpolate, "y_max") => {
                let y = parse_f64(value)?;
                if y < 10.0 {
                    return Err(err(lineno, "y_max must be at least 10"));
                }
                config.interp_y_max = y;
            }
            (Section::Interpolate, "y_samples") => {
                let n: usize = value
                    .parse()
                    .map_err(|_| err(lineno, format!("bad y_samples '{value}'")))?;
                if n < 101 || n.is_multiple_of(2) {
                    return Err(err(lineno, "y_samples must be odd and at least 101"));
                }
                config.interp_y_samples = n;
            }
            (Section::Interpolate, "phi_k") => {
                let k: usize = value
                    .parse()
                    .map_err(|_| err(lineno, format!("bad phi_k '{value}'")))?;
                if k == 0 || k > 4096 {
                    return Err(err(lineno, "phi_k must be in 1..=4096"));
                }
                config.interp_phi_k = k;
            }
            (_, key) => {
                return Err(err(lineno, format!("unknown key '{key}' in this section")));
            }
        }
    }

    problems.sort_by_key(|p| p.0);
    for (idx, lineno, sigma, b, p) in problems {
        let sigma = sigma.ok_or_else(|| err(lineno, format!("[problem.{idx}] missing sigma")))?;
        let b = b.ok_or_else(|| err(lineno, format!("[problem.{idx}] missing b")))?;
        let p = p.ok_or_else(|| err(lineno, format!("[problem.{idx}] missing p")))?;
        config.problems.push(ProblemConfig {
            index: idx,
            sigma,
            b,
            p,
        });
    }
    Ok(config)
}
