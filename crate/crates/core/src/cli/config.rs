//! INI-style run configuration with line-numbered diagnostics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::averaging_lab::{low_mode_basis, ProbeOptions};
use crate::coefficients::{
    Dissipation, EllipticCoefficients, Growth, HomotopyParam, NonlinearTerm, NonlinearitySpec, ScalarProfile,
    SpaceTimeProfile, SpatialKind, SpatialProfile,
};
use crate::conley::{IndexOptions, PotentialSpec};
use crate::error::{Error, Result};
use crate::process::{Model, StepControl};
use crate::recurrence::{FieldMetric, ProductMetric, RecurrenceOptions};
use crate::spectral_field::{Field, Grid};
use crate::symbols::{HullPhase, Mode, QuasiPeriodicSignal};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Parsed `[section]` / `key = value` document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    sections: BTreeMap<String, Section>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut ini = Ini::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = strip_comment(raw).trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config_at(line, "unterminated section header"))?
                    .trim()
                    .to_ascii_lowercase();
                if name.is_empty() {
                    return Err(Error::config_at(line, "empty section name"));
                }
                if ini.sections.contains_key(&name) {
                    return Err(Error::config_at(line, format!("duplicate section [{name}]")));
                }
                ini.sections.insert(name.clone(), Section { line, entries: BTreeMap::new() });
                current = Some(name);
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| Error::config_at(line, format!("expected `key = value`, got `{body}`")))?;
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::config_at(line, "empty key"));
            }
            let section = current
                .as_ref()
                .ok_or_else(|| Error::config_at(line, "key outside of any section"))?;
            let sec = ini.sections.get_mut(section).expect("section exists");
            if sec.entries.contains_key(&key) {
                return Err(Error::config_at(line, format!("duplicate key `{key}` in [{section}]")));
            }
            sec.entries.insert(key, Entry { value: value.trim().to_string(), line });
        }
        Ok(ini)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    fn section(&self, name: &str) -> Result<&Section> {
        self.sections
            .get(name)
            .ok_or_else(|| Error::config(format!("missing section [{name}]")))
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.entries.get(key))
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    fn require(&self, section: &str, key: &str) -> Result<&Entry> {
        let sec = self.section(section)?;
        sec.entries
            .get(key)
            .ok_or_else(|| Error::config_at(sec.line, format!("[{section}] is missing `{key}`")))
    }

    fn parse_with<T>(&self, section: &str, key: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => f(&e.value)
                .map(Some)
                .map_err(|m| Error::config_at(e.line, format!("[{section}] {key}: {m}"))),
        }
    }

    pub fn f64_opt(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.parse_with(section, key, parse_number)
    }

    pub fn f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(section, key)?.unwrap_or(default))
    }

    pub fn f64_req(&self, section: &str, key: &str) -> Result<f64> {
        let e = self.require(section, key)?;
        parse_number(&e.value).map_err(|m| Error::config_at(e.line, format!("[{section}] {key}: {m}")))
    }

    pub fn usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        Ok(self
            .parse_with(section, key, |v| v.parse::<usize>().map_err(|e| format!("`{v}`: {e}")))?
            .unwrap_or(default))
    }

    pub fn u64_or(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        Ok(self
            .parse_with(section, key, |v| v.parse::<u64>().map_err(|e| format!("`{v}`: {e}")))?
            .unwrap_or(default))
    }

    pub fn bool_or(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        Ok(self
            .parse_with(section, key, |v| match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(format!("`{v}` is not a boolean")),
            })?
            .unwrap_or(default))
    }

    pub fn list_opt(&self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        self.parse_with(section, key, parse_list)
    }

    /// Keys of `section` that start with `prefix.`, in numeric suffix order.
    fn indexed(&self, section: &str, prefix: &str) -> Result<Vec<(&Entry, String)>> {
        let Some(sec) = self.sections.get(section) else { return Ok(Vec::new()) };
        let mut out = Vec::new();
        for (k, e) in &sec.entries {
            if let Some(rest) = k.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')) {
                let idx: u32 = rest
                    .parse()
                    .map_err(|_| Error::config_at(e.line, format!("`{k}`: suffix must be an integer")))?;
                out.push((idx, e, k.clone()));
            }
        }
        out.sort_by_key(|(i, _, _)| *i);
        Ok(out.into_iter().map(|(_, e, k)| (e, k)).collect())
    }

    /// Rejects keys not listed in `known`, pointing at the offending line.
    fn check_keys(&self, section: &str, known: &[&str], prefixes: &[&str]) -> Result<()> {
        if let Some(sec) = self.sections.get(section) {
            for (k, e) in &sec.entries {
                let ok = known.contains(&k.as_str())
                    || prefixes.iter().any(|p| k.strip_prefix(p).is_some_and(|r| r.starts_with('.')));
                if !ok {
                    return Err(Error::config_at(e.line, format!("unknown key `{k}` in [{section}]")));
                }
            }
        }
        Ok(())
    }
}

/// Full-line comments start with `#` or `;`; inline comments with ` #`.
fn strip_comment(line: &str) -> &str {
    let t = line.trim_start();
    if t.starts_with('#') || t.starts_with(';') {
        return "";
    }
    match line.find(" #").or_else(|| line.find("\t#")) {
        Some(i) => &line[..i],
        None => line,
    }
}

/// A real number, `pi`, `sqrt(x)`, or a product/quotient such as `2*pi` or `pi/4`.
pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty number".into());
    }
    if let Some((a, b)) = s.rsplit_once('/') {
        return Ok(parse_number(a)? / parse_number(b)?);
    }
    if let Some((a, b)) = s.rsplit_once('*') {
        return Ok(parse_number(a)? * parse_number(b)?);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest.trim()),
        None => (false, s),
    };
    let v = if body.eq_ignore_ascii_case("pi") {
        std::f64::consts::PI
    } else if let Some(inner) = body.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
        let x = parse_number(inner)?;
        if x < 0.0 {
            return Err(format!("sqrt of negative number {x}"));
        }
        x.sqrt()
    } else {
        body.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))?
    };
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(if neg { -v } else { v })
}

pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(parse_number).collect()
}

/// `mean; f:a:b, f:a:b`.
pub fn parse_signal(s: &str) -> std::result::Result<QuasiPeriodicSignal, String> {
    let (mean, modes) = match s.split_once(';') {
        Some((m, rest)) => (m, rest),
        None => (s, ""),
    };
    let mean = parse_number(mean)?;
    let mut out = Vec::new();
    for part in modes.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 3 {
            return Err(format!("mode `{part}` must be frequency:cos_amp:sin_amp"));
        }
        out.push(Mode::new(parse_number(fields[0])?, parse_number(fields[1])?, parse_number(fields[2])?));
    }
    QuasiPeriodicSignal::new(mean, out).map_err(|e| e.to_string())
}

/// `name(key=value, ...)` with names `gaussian`, `sech`, `sech2`, `bump`, `constant`.
pub fn parse_profile(s: &str) -> std::result::Result<SpatialProfile, String> {
    let s = s.trim();
    let (name, args) = match s.split_once('(') {
        Some((n, rest)) => (
            n.trim(),
            rest.strip_suffix(')').ok_or_else(|| format!("profile `{s}`: missing `)`"))?,
        ),
        None => (s, ""),
    };
    let mut p = match name {
        "gaussian" => SpatialProfile::gaussian(1.0),
        "sech" => SpatialProfile::sech(1.0),
        "sech2" => SpatialProfile::sech2(1.0),
        "bump" => SpatialProfile::bump(1.0),
        "constant" => SpatialProfile::constant(1.0),
        other => return Err(format!("unknown spatial profile `{other}`")),
    };
    for arg in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
        let (k, v) = arg.split_once('=').ok_or_else(|| format!("profile argument `{arg}` must be key=value"))?;
        match k.trim() {
            "width" | "radius" => p.width = parse_number(v)?,
            "amplitude" => p.amplitude = parse_number(v)?,
            "power" => p.power = parse_number(v)?,
            "center" => {
                let c: Vec<f64> = v.split(':').map(parse_number).collect::<std::result::Result<_, _>>()?;
                p.center = match c.as_slice() {
                    [x] => [*x, 0.0],
                    [x, y] => [*x, *y],
                    _ => return Err("center takes one or two coordinates".into()),
                };
            }
            other => return Err(format!("unknown profile argument `{other}`")),
        }
    }
    if p.kind == SpatialKind::Constant && p.power != 1.0 {
        return Err("constant profile takes no power".into());
    }
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

fn split_fields(s: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for part in s.split('|') {
        let (k, v) = part
            .split_once(':')
            .ok_or_else(|| format!("`{}` must be `name: value`", part.trim()))?;
        let k = k.trim().to_ascii_lowercase();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(format!("field `{k}` repeated"));
        }
    }
    Ok(out)
}

/// `signal: ... | space: ... | psi: ...`.
pub fn parse_term(s: &str) -> std::result::Result<NonlinearTerm, String> {
    let f = split_fields(s)?;
    for k in f.keys() {
        if !["signal", "space", "psi"].contains(&k.as_str()) {
            return Err(format!("unknown term field `{k}`"));
        }
    }
    let signal = parse_signal(f.get("signal").ok_or("term needs `signal:`")?)?;
    let space = parse_profile(f.get("space").map(String::as_str).unwrap_or("constant"))?;
    let psi_name = f.get("psi").ok_or("term needs `psi:`")?;
    let psi = ScalarProfile::from_name(psi_name).ok_or_else(|| format!("unknown scalar profile `{psi_name}`"))?;
    Ok(NonlinearTerm::new(signal, space, psi))
}

/// `signal: ... | space: ...`.
fn parse_space_time(s: &str) -> std::result::Result<(QuasiPeriodicSignal, SpatialProfile), String> {
    let f = split_fields(s)?;
    for k in f.keys() {
        if !["signal", "space"].contains(&k.as_str()) {
            return Err(format!("unknown field `{k}`"));
        }
    }
    let signal = parse_signal(f.get("signal").ok_or("needs `signal:`")?)?;
    let space = parse_profile(f.get("space").ok_or("needs `space:`")?)?;
    Ok((signal, space))
}

/// Initial datum description.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Zero,
    Profile(SpatialProfile),
    /// Random combination of the lowest `modes` Fourier modes, coefficients
    /// uniform in `[−amplitude, amplitude]`.
    Random { modes: usize, amplitude: f64 },
}

impl InitialData {
    fn parse(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "zero" {
            return Ok(InitialData::Zero);
        }
        if let Some(args) = s.strip_prefix("random") {
            let args = args.trim().trim_start_matches('(').trim_end_matches(')');
            let (mut modes, mut amplitude) = (8usize, 1.0);
            for arg in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
                match arg.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                    Some(("modes", v)) => modes = v.parse().map_err(|_| format!("bad mode count `{v}`"))?,
                    Some(("amplitude", v)) => amplitude = parse_number(v)?,
                    _ => return Err(format!("unknown random() argument `{arg}`")),
                }
            }
            return Ok(InitialData::Random { modes, amplitude });
        }
        parse_profile(s).map(InitialData::Profile)
    }

    pub fn build(&self, grid: Grid, seed: u64) -> Result<Field> {
        Ok(match self {
            InitialData::Zero => Field::zeros(grid),
            InitialData::Profile(p) => Field::from_values(grid, p.at_nodes(&grid))?,
            InitialData::Random { modes, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut u = Field::zeros(grid);
                for e in low_mode_basis(&grid, *modes) {
                    u = u.add_scaled(amplitude * rng.random_range(-1.0..=1.0), &e)?;
                }
                u
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub omega: f64,
    pub lambda: HomotopyParam,
    pub s: f64,
    pub t_end: f64,
    pub u0: InitialData,
    pub seed: u64,
    pub phase_angles: Option<Vec<f64>>,
    pub omega_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSettings {
    pub tau_samples: usize,
    pub xi_samples: usize,
    pub phase_samples: usize,
    pub u_max: f64,
    pub u_samples: usize,
    pub stride: usize,
    pub tail_k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceSettings {
    pub burn_in: f64,
    pub epsilon: Option<f64>,
    pub epsilon_fraction: f64,
    pub options: RecurrenceOptions,
    pub delta: Option<f64>,
    pub dense_t_max: f64,
    pub target: Option<Vec<f64>>,
    pub cluster_eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexSettings {
    pub options: IndexOptions,
    /// Explicit potential; otherwise read off the averaged nonlinearity.
    pub potential: Option<PotentialSpec>,
}

/// Fully typed configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub run: RunSettings,
    pub control: StepControl,
    pub snapshot_every: usize,
    pub tail_k: Vec<f64>,
    pub validate: ValidateSettings,
    pub recurrence: RecurrenceSettings,
    pub index: IndexSettings,
    pub probe: Option<(ProbeOptions, Vec<f64>)>,
    pub has_dissipation: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::parse(text)?;
        for name in ini.sections.keys() {
            const KNOWN: [&str; 11] = [
                "grid", "coefficients", "nonlinearity", "dissipation", "run", "control", "outputs", "validate",
                "index", "recurrence", "probe",
            ];
            if !KNOWN.contains(&name.as_str()) {
                let line = ini.sections[name].line;
                return Err(Error::config_at(line, format!("unknown section [{name}]")));
            }
        }
        ini.check_keys("grid", &["dim", "half_width", "points"], &[])?;
        ini.check_keys("coefficients", &["nu0", "a11", "a12", "a22"], &[])?;
        ini.check_keys("nonlinearity", &["growth_c", "growth_beta"], &["term"])?;
        ini.check_keys("dissipation", &["nu", "q", "p", "young_epsilon"], &["b", "c"])?;
        ini.check_keys(
            "run",
            &["omega", "lambda", "s", "t_end", "u0", "seed", "phase0", "omega_list"],
            &[],
        )?;
        ini.check_keys("control", &["h_max", "osc_resolution", "r_guard", "guard_slack", "sample_every"], &[])?;
        ini.check_keys("outputs", &["snapshot_every", "tail_k"], &[])?;
        ini.check_keys(
            "validate",
            &["tau_samples", "xi_samples", "phase_samples", "u_max", "u_samples", "stride", "tail_k"],
            &[],
        )?;
        ini.check_keys(
            "index",
            &["half_width", "points", "tol_neg", "tol_ker", "include_symbol_space", "nu_tilde"],
            &["v2"],
        )?;
        ini.check_keys(
            "recurrence",
            &[
                "burn_in", "epsilon", "epsilon_fraction", "metric", "torus_weight", "gap_fraction", "delta",
                "dense_t_max", "target", "cluster_eps",
            ],
            &[],
        )?;
        ini.check_keys(
            "probe",
            &["radius", "modes", "n_starts", "horizon", "boundary_tol", "bins", "lambdas"],
            &[],
        )?;

        let dim = ini.usize_or("grid", "dim", 1)?;
        let grid_line = ini.section("grid")?.line;
        let grid = Grid::new(dim, ini.f64_req("grid", "half_width")?, ini.usize_or("grid", "points", 256)?)
            .map_err(|e| Error::config_at(grid_line, e.to_string()))?;

        let coeff_line = ini.sections.get("coefficients").map(|s| s.line);
        let signal = |key: &str, default: &str| -> Result<QuasiPeriodicSignal> {
            match ini.entry("coefficients", key) {
                Some(e) => parse_signal(&e.value).map_err(|m| Error::config_at(e.line, format!("{key}: {m}"))),
                None => Ok(parse_signal(default).expect("default signal")),
            }
        };
        let upper = match dim {
            1 => vec![signal("a11", "1")?],
            _ => vec![signal("a11", "1")?, signal("a12", "0")?, signal("a22", "1")?],
        };
        let coeffs = EllipticCoefficients::new(dim, upper, ini.f64_or("coefficients", "nu0", 1.0)?)
            .map_err(|e| Error::Config { line: coeff_line, message: e.to_string() })?;

        let mut terms = Vec::new();
        for (e, key) in ini.indexed("nonlinearity", "term")? {
            terms.push(parse_term(&e.value).map_err(|m| Error::config_at(e.line, format!("{key}: {m}")))?);
        }
        let mut nonlinearity = NonlinearitySpec::new(terms);
        if let Some(c) = ini.f64_opt("nonlinearity", "growth_c")? {
            nonlinearity.growth = Some(Growth { c, beta: ini.f64_or("nonlinearity", "growth_beta", 0.0)? });
        }
        let has_dissipation = ini.has_section("dissipation");
        if has_dissipation {
            let line = ini.section("dissipation")?.line;
            let d = match ini.f64_opt("dissipation", "young_epsilon")? {
                Some(eps) if ini.raw("dissipation", "nu").is_none() => {
                    nonlinearity.young_split(eps).map_err(|e| match e {
                        Error::Hypothesis(m) => Error::Hypothesis(m),
                        other => Error::config_at(line, other.to_string()),
                    })?
                }
                _ => {
                    let mut b = SpaceTimeProfile::zero();
                    let mut c = SpaceTimeProfile::zero();
                    for (prefix, target) in [("b", &mut b), ("c", &mut c)] {
                        for (e, key) in ini.indexed("dissipation", prefix)? {
                            target.terms.push(
                                parse_space_time(&e.value).map_err(|m| Error::config_at(e.line, format!("{key}: {m}")))?,
                            );
                        }
                    }
                    Dissipation {
                        nu: ini.f64_req("dissipation", "nu")?,
                        q: ini.f64_or("dissipation", "q", 2.0)?,
                        p: ini.f64_or("dissipation", "p", 1.0)?,
                        b,
                        c,
                    }
                }
            };
            d.validate(dim).map_err(|e| Error::config_at(line, e.to_string()))?;
            nonlinearity.dissipation = Some(d);
        }
        let model = Model::new(grid, coeffs, nonlinearity)?;

        let run_line = ini.section("run")?.line;
        let lambda = HomotopyParam::new(ini.f64_or("run", "lambda", 1.0)?)
            .map_err(|e| Error::config_at(run_line, e.to_string()))?;
        let u0 = match ini.entry("run", "u0") {
            Some(e) => InitialData::parse(&e.value).map_err(|m| Error::config_at(e.line, format!("u0: {m}")))?,
            None => InitialData::Zero,
        };
        let omega = ini.f64_or("run", "omega", 1.0)?;
        if !(omega > 0.0) {
            return Err(Error::config_at(ini.entry("run", "omega").map_or(run_line, |e| e.line), "omega must be positive"));
        }
        let s = ini.f64_or("run", "s", 0.0)?;
        let t_end = ini.f64_or("run", "t_end", s)?;
        if t_end < s {
            return Err(Error::Order { s, t: t_end });
        }
        let run = RunSettings {
            omega,
            lambda,
            s,
            t_end,
            u0,
            seed: ini.u64_or("run", "seed", 0)?,
            phase_angles: ini.list_opt("run", "phase0")?,
            omega_list: ini.list_opt("run", "omega_list")?,
        };

        let control = StepControl {
            h_max: ini.f64_or("control", "h_max", 0.01)?,
            osc_resolution: ini.usize_or("control", "osc_resolution", 16)?,
            r_guard: ini.f64_opt("control", "r_guard")?,
            guard_slack: ini.f64_or("control", "guard_slack", 10.0)?,
            sample_every: ini.usize_or("control", "sample_every", 1)?,
        };
        if let Err(e) = control.validate() {
            let line = ini.sections.get("control").map(|s| s.line);
            return Err(match line {
                Some(l) => Error::config_at(l, e.to_string()),
                None => e,
            });
        }

        let default_k = vec![grid.half_width() / 4.0, grid.half_width() / 2.0];
        let tail_k = ini.list_opt("outputs", "tail_k")?.unwrap_or_else(|| default_k.clone());
        let validate = ValidateSettings {
            tau_samples: ini.usize_or("validate", "tau_samples", 128)?,
            xi_samples: ini.usize_or("validate", "xi_samples", 16)?,
            phase_samples: ini.usize_or("validate", "phase_samples", 16)?,
            u_max: ini.f64_or("validate", "u_max", 10.0)?,
            u_samples: ini.usize_or("validate", "u_samples", 41)?,
            stride: ini.usize_or("validate", "stride", 1)?,
            tail_k: ini.list_opt("validate", "tail_k")?.unwrap_or(default_k),
        };

        let metric = match ini.raw("recurrence", "metric").unwrap_or("h1") {
            "h1" | "H1" => FieldMetric::H1,
            "l2" | "L2" => FieldMetric::L2,
            other => {
                let line = ini.entry("recurrence", "metric").map(|e| e.line);
                return Err(Error::Config { line, message: format!("metric must be h1 or l2, got `{other}`") });
            }
        };
        let recurrence = RecurrenceSettings {
            burn_in: ini.f64_or("recurrence", "burn_in", 0.0)?,
            epsilon: ini.f64_opt("recurrence", "epsilon")?,
            epsilon_fraction: ini.f64_or("recurrence", "epsilon_fraction", 0.1)?,
            options: RecurrenceOptions {
                metric: ProductMetric { field: metric, torus_weight: ini.f64_or("recurrence", "torus_weight", 1.0)? },
                gap_fraction: ini.f64_or("recurrence", "gap_fraction", 1.0 / 3.0)?,
                ..RecurrenceOptions::default()
            },
            delta: ini.f64_opt("recurrence", "delta")?,
            dense_t_max: ini.f64_or("recurrence", "dense_t_max", t_end - s)?,
            target: ini.list_opt("recurrence", "target")?,
            cluster_eps: ini.f64_opt("recurrence", "cluster_eps")?,
        };

        let potential = match ini.f64_opt("index", "nu_tilde")? {
            Some(nu_tilde) => {
                let mut v2 = Vec::new();
                for (e, key) in ini.indexed("index", "v2")? {
                    v2.push(parse_profile(&e.value).map_err(|m| Error::config_at(e.line, format!("{key}: {m}")))?);
                }
                Some(PotentialSpec::constant_shift(dim, nu_tilde, v2)?)
            }
            None => None,
        };
        let index = IndexSettings {
            options: IndexOptions {
                half_width: ini.f64_or("index", "half_width", grid.half_width())?,
                n: ini.usize_or("index", "points", if dim == 1 { 2048 } else { 48 })?,
                tol_neg: ini.f64_opt("index", "tol_neg")?,
                tol_ker: ini.f64_opt("index", "tol_ker")?,
                include_symbol_space: ini.bool_or("index", "include_symbol_space", false)?,
            },
            potential,
        };

        let probe = if ini.has_section("probe") {
            let d = ProbeOptions::default();
            Some((
                ProbeOptions {
                    radius: ini.f64_or("probe", "radius", d.radius)?,
                    modes: ini.usize_or("probe", "modes", d.modes)?,
                    n_starts: ini.usize_or("probe", "n_starts", d.n_starts)?,
                    horizon: ini.f64_or("probe", "horizon", d.horizon)?,
                    boundary_tol: ini.f64_or("probe", "boundary_tol", d.boundary_tol)?,
                    histogram_bins: ini.usize_or("probe", "bins", d.histogram_bins)?,
                },
                ini.list_opt("probe", "lambdas")?.unwrap_or_else(|| vec![0.0, 1.0]),
            ))
        } else {
            None
        };

        Ok(Self {
            model,
            run,
            control,
            snapshot_every: ini.usize_or("outputs", "snapshot_every", 0)?,
            tail_k,
            validate,
            recurrence,
            index,
            probe,
            has_dissipation,
        })
    }

    /// Hull element at time zero.
    pub fn phase0(&self) -> Result<HullPhase> {
        let freqs = self.model.frequencies();
        match &self.run.phase_angles {
            None => Ok(HullPhase::zero(freqs)),
            Some(a) => HullPhase::new(freqs, a.clone()),
        }
    }

    pub fn initial_field(&self) -> Result<Field> {
        self.run.u0.build(self.model.grid, self.run.seed)
    }
}
