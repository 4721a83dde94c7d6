//! Run configuration: flat `key = value` file, overridden by flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use qhj::{Constants, Microstate, Oscillator, Potential, SquareWell, Tolerances};
use serde_json::{json, Map, Value};

use crate::CliError;

/// Every key a config file may set.
pub const KEYS: &[&str] = &[
    "potential", "omega", "v0", "a", "hbar", "mass", "energy", "q0", "w0", "p0", "pp0", "epsilon", "qmax",
    "points", "out", "format", "abs_tol", "rel_tol", "case", "n", "bracket", "jobs",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Lho,
    Well,
}

/// Validated settings for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub potential: PotentialKind,
    pub constants: Constants<f64>,
    pub omega: f64,
    pub v0: f64,
    pub a: f64,
    pub energies: Vec<f64>,
    pub q0: f64,
    pub w0: f64,
    /// None selects p0 = (2mE)^{1/2} at each energy.
    pub p0: Option<f64>,
    pub pp0: f64,
    pub epsilon: f64,
    pub qmax: Option<f64>,
    pub points: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub tolerances: Tolerances<f64>,
    pub case: Option<String>,
    pub n: u32,
    pub bracket: Option<(f64, f64)>,
    pub jobs: Option<usize>,
    /// Merged raw settings, echoed in the sidecar.
    pub raw: BTreeMap<String, String>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key '{}'", i + 1, k.trim())));
        }
        if map.insert(key, v.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key '{}'", i + 1, k.trim())));
        }
    }
    Ok(map)
}

fn num(raw: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>, CliError> {
    raw.get(key)
        .map(|v| {
            let x: f64 = v.parse().map_err(|_| CliError::Usage(format!("{key}: '{v}' is not a number")))?;
            if !x.is_finite() {
                return Err(CliError::Usage(format!("{key} must be finite")));
            }
            Ok(x)
        })
        .transpose()
}

fn positive(raw: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64, CliError> {
    let x = num(raw, key)?.unwrap_or(default);
    if x <= 0.0 {
        return Err(CliError::Usage(format!("{key} must be positive")));
    }
    Ok(x)
}

fn integer<T: std::str::FromStr>(raw: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, CliError> {
    raw.get(key)
        .map(|v| v.parse().map_err(|_| CliError::Usage(format!("{key}: '{v}' is not a non-negative integer"))))
        .transpose()
}

fn list(raw: &BTreeMap<String, String>, key: &str) -> Result<Vec<f64>, CliError> {
    let Some(v) = raw.get(key) else { return Ok(Vec::new()) };
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Usage(format!("{key}: '{s}' is not a finite number")))
        })
        .collect()
}

impl RunConfig {
    pub fn from_map(raw: BTreeMap<String, String>) -> Result<Self, CliError> {
        if let Some(k) = raw.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown key '{k}'")));
        }
        let potential = match raw.get("potential").map(String::as_str).unwrap_or("lho") {
            "lho" | "oscillator" => PotentialKind::Lho,
            "well" | "square-well" => PotentialKind::Well,
            other => return Err(CliError::Usage(format!("potential: unknown '{other}', expected lho or well"))),
        };
        let constants = Constants::new(positive(&raw, "hbar", 1.0)?, positive(&raw, "mass", 1.0)?)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let format = match raw.get("format").map(String::as_str).unwrap_or("csv") {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => return Err(CliError::Usage(format!("format: unknown '{other}', expected csv or json"))),
        };
        let p0 = num(&raw, "p0")?;
        if p0.is_some_and(|p| p <= 0.0) {
            return Err(CliError::Usage("p0 must be positive".into()));
        }
        let bracket = match list(&raw, "bracket")?.as_slice() {
            [] => None,
            [lo, hi] => Some((*lo, *hi)),
            _ => return Err(CliError::Usage("bracket: expected two comma-separated energies".into())),
        };
        let points: Option<usize> = integer(&raw, "points")?;
        if points.is_some_and(|n| n < 2) {
            return Err(CliError::Usage("points must be at least 2".into()));
        }
        let jobs: Option<usize> = integer(&raw, "jobs")?;
        if jobs == Some(0) {
            return Err(CliError::Usage("jobs must be at least 1".into()));
        }
        let n: u32 = integer(&raw, "n")?.unwrap_or(1);
        if n == 0 {
            return Err(CliError::Usage("n must be at least 1".into()));
        }
        let tolerances = Tolerances::new(positive(&raw, "abs_tol", 1e-13)?, positive(&raw, "rel_tol", 1e-13)?);
        tolerances.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let qmax = num(&raw, "qmax")?;
        Ok(Self {
            potential,
            constants,
            omega: positive(&raw, "omega", 1.0)?,
            v0: positive(&raw, "v0", 1.0)?,
            a: positive(&raw, "a", std::f64::consts::FRAC_PI_4)?,
            energies: list(&raw, "energy")?,
            q0: num(&raw, "q0")?.unwrap_or(0.0),
            w0: num(&raw, "w0")?.unwrap_or(0.0),
            p0,
            pp0: num(&raw, "pp0")?.unwrap_or(0.0),
            epsilon: positive(&raw, "epsilon", qhj::jacobi::DEFAULT_EPSILON)?,
            qmax,
            points,
            out: raw.get("out").map(PathBuf::from),
            format,
            tolerances,
            case: raw.get("case").cloned(),
            n,
            bracket,
            jobs,
            raw,
        })
    }

    pub fn build_potential(&self) -> Result<Potential<f64>, CliError> {
        let p = match self.potential {
            PotentialKind::Lho => Potential::HarmonicOscillator(Oscillator::new(self.constants, self.omega)?),
            PotentialKind::Well => Potential::FiniteSquareWell(SquareWell::new(self.v0, self.a, self.constants)?),
        };
        Ok(p)
    }

    pub fn microstate(&self) -> Result<Microstate<f64>, CliError> {
        match self.p0 {
            Some(p0) => Ok(Microstate::fixed(self.q0, self.w0, p0, self.pp0)?),
            None => {
                if self.q0 != 0.0 || self.w0 != 0.0 || self.pp0 != 0.0 {
                    return Err(CliError::Usage("q0, w0 and pp0 need an explicit p0".into()));
                }
                Ok(Microstate::energy_scaled())
            }
        }
    }

    pub fn require_energies(&self) -> Result<&[f64], CliError> {
        if self.energies.is_empty() {
            return Err(CliError::Usage("no energy given (use --energy)".into()));
        }
        Ok(&self.energies)
    }

    pub fn single_energy(&self) -> Result<f64, CliError> {
        match self.require_energies()? {
            [e] => Ok(*e),
            _ => Err(CliError::Usage("this command takes exactly one energy".into())),
        }
    }

    /// Settings as a flat JSON object with typed values where they parse.
    pub fn echo(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in &self.raw {
            let value = match v.parse::<f64>() {
                Ok(x) if x.is_finite() => json!(x),
                _ => json!(v),
            };
            m.insert(k.clone(), value);
        }
        Value::Object(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn file_parsing() {
        let m = parse_file("# comment\npotential = well\n\nv0 = 2 # trailing\nabs-tol=1e-12\n").unwrap();
        assert_eq!(m["potential"], "well");
        assert_eq!(m["v0"], "2");
        assert_eq!(m["abs_tol"], "1e-12");
    }

    #[test]
    fn unknown_and_malformed_lines() {
        assert!(matches!(parse_file("colour = red"), Err(CliError::Usage(_))));
        assert!(matches!(parse_file("energy 0.5"), Err(CliError::Usage(_))));
        assert!(matches!(parse_file("energy = 1\nenergy = 2"), Err(CliError::Usage(_))));
    }

    #[test]
    fn defaults() {
        let c = RunConfig::from_map(BTreeMap::new()).unwrap();
        assert_eq!(c.potential, PotentialKind::Lho);
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.p0, None);
        assert_eq!(c.n, 1);
        assert!(c.require_energies().is_err());
    }

    #[test]
    fn energy_lists_and_brackets() {
        let c = RunConfig::from_map(map(&[("energy", "0.4, 0.5,0.6"), ("bracket", "0.4,0.6")])).unwrap();
        assert_eq!(c.energies, vec![0.4, 0.5, 0.6]);
        assert_eq!(c.bracket, Some((0.4, 0.6)));
        assert!(c.single_energy().is_err());
        assert!(RunConfig::from_map(map(&[("energy", "0.4,x")])).is_err());
        assert!(RunConfig::from_map(map(&[("bracket", "1")])).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        for (k, v) in [("p0", "-1"), ("format", "xml"), ("potential", "morse"), ("points", "1"), ("jobs", "0"), ("hbar", "0"), ("n", "0"), ("v0", "nan")] {
            assert!(RunConfig::from_map(map(&[(k, v)])).is_err(), "{k}={v}");
        }
    }

    #[test]
    fn microstate_selection() {
        let c = RunConfig::from_map(map(&[("p0", "1"), ("pp0", "0.5")])).unwrap();
        let m = c.microstate().unwrap();
        assert_eq!((m.p0, m.pp0), (1.0, 0.5));
        let c = RunConfig::from_map(map(&[("pp0", "0.5")])).unwrap();
        assert!(c.microstate().is_err());
    }

    #[test]
    fn echo_types_values() {
        let c = RunConfig::from_map(map(&[("energy", "0.5"), ("potential", "lho")])).unwrap();
        let v = c.echo();
        assert_eq!(v["energy"], json!(0.5));
        assert_eq!(v["potential"], json!("lho"));
    }
}
