use crate::error::{Error, Result};
use ini::Ini;
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    PsiCheck,
    EjsDiscrete,
    Burke,
    DerivativeSigns,
    ExitTail,
    MgfTails,
    TailMachinery,
    DiffusionStationarity,
    EjsDiffusion,
    PseudoGibbs,
    DiffusionDerivs,
    WedgeBound,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 12] = [
        ExperimentKind::PsiCheck,
        ExperimentKind::EjsDiscrete,
        ExperimentKind::Burke,
        ExperimentKind::DerivativeSigns,
        ExperimentKind::ExitTail,
        ExperimentKind::MgfTails,
        ExperimentKind::TailMachinery,
        ExperimentKind::DiffusionStationarity,
        ExperimentKind::EjsDiffusion,
        ExperimentKind::PseudoGibbs,
        ExperimentKind::DiffusionDerivs,
        ExperimentKind::WedgeBound,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::PsiCheck => "psi-check",
            ExperimentKind::EjsDiscrete => "ejs-discrete",
            ExperimentKind::Burke => "burke",
            ExperimentKind::DerivativeSigns => "derivative-signs",
            ExperimentKind::ExitTail => "exit-tail",
            ExperimentKind::MgfTails => "mgf-tails",
            ExperimentKind::TailMachinery => "tail-machinery",
            ExperimentKind::DiffusionStationarity => "diffusion-stationarity",
            ExperimentKind::EjsDiffusion => "ejs-diffusion",
            ExperimentKind::PseudoGibbs => "pseudo-gibbs",
            ExperimentKind::DiffusionDerivs => "diffusion-derivs",
            ExperimentKind::WedgeBound => "wedge-bound",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("experiment.kind", format!("unknown experiment kind `{s}`")))
    }
}

/// Parsed `key = value` configuration with `[section]` headers.
///
/// `[experiment]` holds `kind`, `seed`, `workers` and `out`; suites read their own
/// sections (`[model]`, `[potential]`, `[suite]`).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    text: String,
    ini: Ini,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        let mut cfg = ExperimentConfig {
            kind: ExperimentKind::PsiCheck,
            seed: 0,
            workers: 0,
            out: None,
            text: text.to_string(),
            ini,
        };
        let kind = cfg
            .raw("experiment", "kind")
            .ok_or_else(|| Error::config("experiment.kind", "missing"))?;
        cfg.kind = kind.parse()?;
        cfg.seed = cfg.parse_or("experiment", "seed", 0u64)?;
        cfg.workers = cfg.parse_or("experiment", "workers", 0usize)?;
        cfg.out = cfg.raw("experiment", "out").map(PathBuf::from);
        Ok(cfg)
    }

    /// Parses `text` for a known suite; `experiment.kind` may be omitted but must agree
    /// with `kind` when present.
    pub fn parse_for(text: &str, kind: ExperimentKind) -> Result<Self> {
        let mut ini = Ini::load_from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        let given = ini.get_from(Some("experiment"), "kind").map(|s| s.trim().to_string());
        match given {
            Some(k) if !k.is_empty() => {
                if k.parse::<ExperimentKind>()? != kind {
                    return Err(Error::config(
                        "experiment.kind",
                        format!("config is for `{k}` but `{kind}` was requested"),
                    ));
                }
            }
            _ => {
                ini.with_section(Some("experiment")).set("kind", kind.name());
            }
        }
        let mut buf = Vec::new();
        ini.write_to(&mut buf).map_err(|e| Error::Io(e.to_string()))?;
        let mut cfg = Self::parse(&String::from_utf8_lossy(&buf))?;
        cfg.text = text.to_string();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The configuration text exactly as given.
    pub fn verbatim(&self) -> &str {
        &self.text
    }

    /// SHA-256 of the canonical form: sorted sections and keys with the effective seed,
    /// excluding `workers` and `out`, which do not affect results.
    pub fn hash(&self) -> String {
        let mut lines = Vec::new();
        for (sec, props) in self.ini.iter() {
            let sec = sec.unwrap_or("").trim().to_string();
            for (k, v) in props.iter() {
                let k = k.trim();
                if sec == "experiment" && matches!(k, "workers" | "out" | "seed") {
                    continue;
                }
                lines.push(format!("{sec}.{k}={}", v.trim()));
            }
        }
        lines.push(format!("experiment.seed={}", self.seed));
        lines.sort();
        hex::encode(Sha256::digest(lines.join("\n").as_bytes()))
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.ini
            .section(Some(section))
            .and_then(|s| s.get(key))
            .map(str::trim)
            .filter(|s| !s.is_empty())
    }

    pub fn parse_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.raw(section, key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|e| Error::config(format!("{section}.{key}"), format!("`{s}`: {e}"))),
        }
    }

    pub fn list_or<T: FromStr>(&self, section: &str, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
        T: Clone,
    {
        match self.raw(section, key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(|v| {
                    v.parse()
                        .map_err(|e| Error::config(format!("{section}.{key}"), format!("`{v}`: {e}")))
                })
                .collect(),
        }
    }

    /// `m x n` pairs such as `1x1, 3x3, 1x0`.
    pub fn sizes_or(&self, section: &str, key: &str, default: &[(usize, usize)]) -> Result<Vec<(usize, usize)>> {
        let field = format!("{section}.{key}");
        match self.raw(section, key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(|v| {
                    let (a, b) = v
                        .split_once(['x', 'X'])
                        .ok_or_else(|| Error::config(field.clone(), format!("`{v}` is not of the form MxN")))?;
                    let p = |t: &str| {
                        t.trim()
                            .parse::<usize>()
                            .map_err(|e| Error::config(field.clone(), format!("`{v}`: {e}")))
                    };
                    Ok((p(a)?, p(b)?))
                })
                .collect(),
        }
    }

    /// Replaces the master seed (command-line override).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_out(mut self, out: PathBuf) -> Self {
        self.out = Some(out);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "[experiment]\nkind = ejs-discrete\nseed = 7\nworkers = 3\n\n[suite]\nlambdas = 0.1, 0.25\nsizes = 1x1, 3x3,1x0\n";

    #[test]
    fn parses_sections_and_lists() {
        let c = ExperimentConfig::parse(TEXT).unwrap();
        assert_eq!(c.kind, ExperimentKind::EjsDiscrete);
        assert_eq!((c.seed, c.workers), (7, 3));
        assert_eq!(c.list_or::<f64>("suite", "lambdas", &[]).unwrap(), vec![0.1, 0.25]);
        assert_eq!(c.sizes_or("suite", "sizes", &[]).unwrap(), vec![(1, 1), (3, 3), (1, 0)]);
        assert_eq!(c.parse_or("suite", "replicas", 5usize).unwrap(), 5);
        assert_eq!(c.verbatim(), TEXT);
    }

    #[test]
    fn hash_ignores_workers_but_not_seed() {
        let a = ExperimentConfig::parse(TEXT).unwrap();
        let b = ExperimentConfig::parse(&TEXT.replace("workers = 3", "workers = 1")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), a.clone().with_seed(8).hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn field_level_errors() {
        let bad = TEXT.replace("0.1, 0.25", "0.1, x");
        let c = ExperimentConfig::parse(&bad).unwrap();
        match c.list_or::<f64>("suite", "lambdas", &[]) {
            Err(Error::ConfigError { field, .. }) => assert_eq!(field, "suite.lambdas"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            ExperimentConfig::parse("[experiment]\nkind = nope\n"),
            Err(Error::ConfigError { .. })
        ));
        assert!(ExperimentConfig::parse("[experiment]\nseed = 1\n").is_err());
        assert!(c.sizes_or("suite", "lambdas", &[]).is_err());
    }

    #[test]
    fn kind_from_subcommand() {
        let c = ExperimentConfig::parse_for("[suite]\nn = 2\n", ExperimentKind::WedgeBound).unwrap();
        assert_eq!(c.kind, ExperimentKind::WedgeBound);
        assert_eq!(c.verbatim(), "[suite]\nn = 2\n");
        assert!(ExperimentConfig::parse_for(TEXT, ExperimentKind::Burke).is_err());
        assert!(ExperimentConfig::parse_for(TEXT, ExperimentKind::EjsDiscrete).is_ok());
    }
}
