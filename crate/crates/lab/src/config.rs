//! Configuration: a flat key-value text file with one `[experiment]` section
//! per experiment, overridden one-to-one by `--key value` flags. Every key is
//! declared in the registry below, which is also the generated reference page
//! (`lab help-keys`). Resolution order: registry default < file global scope <
//! file section < flag.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use gp_lab::error::{LabError, Result};
use gp_lab::torus::QuadraticForm;

/// One configuration key. `default: None` means the value is optional or is
/// resolved in code (the doc string says how); resolved values are written
/// back into the config echo so reports never carry hidden defaults.
#[derive(Debug)]
pub struct KeySpec {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub doc: &'static str,
}

#[derive(Debug)]
pub struct ExperimentSpec {
    pub name: &'static str,
    pub schema_version: u32,
    pub doc: &'static str,
    pub keys: &'static [KeySpec],
}

pub const GLOBAL_KEYS: &[KeySpec] = &[
    KeySpec { name: "d", default: Some("2"), doc: "ambient dimension" },
    KeySpec {
        name: "theta",
        default: None,
        doc: "comma-separated positive decimals, one per axis; for d = 2 \
              defaults to 1.0,1.41421356237 with a logged notice",
    },
    KeySpec { name: "outdir", default: Some("out"), doc: "output directory (created if absent)" },
    KeySpec {
        name: "seed",
        default: Some("424242"),
        doc: "seed of the ChaCha8 counter-based generator used wherever an \
              experiment draws random matrices",
    },
    KeySpec {
        name: "threads",
        default: Some("0"),
        doc: "rayon worker count; 0 keeps the library default. Outputs are \
              byte-identical for a fixed (config, thread count, build)",
    },
];

pub const EXPERIMENTS: &[ExperimentSpec] = &[
    ExperimentSpec {
        name: "expsum-l4",
        schema_version: 1,
        doc: "L4 time norm of the quadratic exponential sum over a full period, \
              checked against the exact divisor-count value, dyadic N sweep",
        keys: &[
            KeySpec { name: "b", default: Some("0"), doc: "frequency offset of the quadratic phase" },
            KeySpec { name: "n_min", default: Some("16"), doc: "first N of the dyadic sweep" },
            KeySpec { name: "n_max", default: Some("256"), doc: "last N of the dyadic sweep (inclusive)" },
        ],
    },
    ExperimentSpec {
        name: "expsum-lp",
        schema_version: 1,
        doc: "growth of the Lp integral of the exponential sum, dyadic N sweep; \
              the fitted slope is checked against p - 2 + 0.2",
        keys: &[
            KeySpec { name: "p", default: Some("6"), doc: "Lebesgue exponent, p >= 2" },
            KeySpec { name: "b", default: Some("0"), doc: "frequency offset of the quadratic phase" },
            KeySpec { name: "n_min", default: Some("16"), doc: "first N of the dyadic sweep" },
            KeySpec { name: "n_max", default: Some("256"), doc: "last N of the dyadic sweep (inclusive)" },
        ],
    },
    ExperimentSpec {
        name: "divisor",
        schema_version: 1,
        doc: "level-set counts S_{l,b}(N) of m1^2 - m2^2 over [b, b+N)^2: one \
              row for a given l, or the full scan when l is omitted; far-offset \
              uniqueness is checked when |b| >= 10 N^2 + 1",
        keys: &[
            KeySpec { name: "l", default: None, doc: "level to count; omit to scan every achieved level" },
            KeySpec { name: "b", default: Some("0"), doc: "window offset" },
            KeySpec { name: "n", default: Some("10"), doc: "window length (scan mode caps at 512, single level at 4096)" },
        ],
    },
    ExperimentSpec {
        name: "multiplier-scan",
        schema_version: 1,
        doc: "truncated multiplier sum I(tau, p) in the original and polarized \
              representations across three truncation radii",
        keys: &[
            KeySpec { name: "tau", default: Some("0.5"), doc: "time frequency" },
            KeySpec { name: "p", default: None, doc: "comma-separated integer frequency, d entries; defaults to the first unit vector" },
            KeySpec { name: "alpha", default: Some("0.75"), doc: "regularity of the weight, > 0" },
            KeySpec { name: "truncation", default: Some("0"), doc: "lattice radius R; 0 picks an interactive default (128 in 2D, 32 in 3D)" },
        ],
    },
    ExperimentSpec {
        name: "dyadic-count",
        schema_version: 1,
        doc: "dyadic level-set counts against the two-exponent bound \
              2^((d-1+eps)(j_min+j_med)), with the cap-stability ratio checked \
              between two caps",
        keys: &[
            KeySpec { name: "p", default: None, doc: "comma-separated integer frequency, d entries; defaults to 12 e_1" },
            KeySpec {
                name: "tau",
                default: None,
                doc: "time frequency; defaults to Q(p) - 2 theta_1^2 + 0.4, which \
                      aligns the unit window with the near-diagonal level set",
            },
            KeySpec { name: "cap", default: Some("6"), doc: "largest shell exponent j_max, 1..=8" },
            KeySpec { name: "cap_lo", default: Some("4"), doc: "smaller cap for the stability comparison" },
            KeySpec { name: "epsilon", default: Some("0.5"), doc: "excess exponent in the bound" },
        ],
    },
    ExperimentSpec {
        name: "endpoint-slice",
        schema_version: 1,
        doc: "endpoint slice sum against ln kappa over a dyadic kappa sweep; \
              the regression must have positive slope with R^2 >= 0.99",
        keys: &[
            KeySpec { name: "kappa_log2_min", default: Some("4"), doc: "first exponent of the kappa sweep" },
            KeySpec { name: "kappa_log2_max", default: None, doc: "last exponent; defaults to 14 (d = 2) or 9 (d = 3)" },
            KeySpec { name: "m", default: Some("0"), doc: "transverse cutoff; 0 uses kappa^2 per row" },
        ],
    },
    ExperimentSpec {
        name: "nls-converge",
        schema_version: 1,
        doc: "Strang-splitting self-convergence under dt halving, with mass, \
              energy, and alias-band tracking; the finest trajectory is \
              checkpointed as order-1 density matrices",
        keys: &[
            KeySpec { name: "grid", default: Some("64"), doc: "collocation points per axis (power of two)" },
            KeySpec { name: "b0", default: Some("1"), doc: "coupling of the cubic nonlinearity" },
            KeySpec { name: "t", default: Some("0.5"), doc: "final time" },
            KeySpec { name: "dt", default: Some("0.004"), doc: "coarsest step; level i runs at dt / 2^i" },
            KeySpec { name: "levels", default: Some("3"), doc: "number of halvings + 1, >= 3 for an observed order" },
            KeySpec { name: "stride", default: Some("25"), doc: "record every stride-th step" },
            KeySpec {
                name: "modes",
                default: Some("1,0:0.35,0;-2,1:0,0.2;0,-1:0.15,-0.1"),
                doc: "initial data as xi_1,..,xi_d:re,im triples joined by ';'",
            },
        ],
    },
    ExperimentSpec {
        name: "hierarchy-residual",
        schema_version: 1,
        doc: "Duhamel residual of the factorized trajectory under dt halving, \
              in both the retarded and verbatim mild forms, plus the exact \
              b0 = 0 cancellation; the coarse trajectory's order-1 entry is \
              checkpointed",
        keys: &[
            KeySpec { name: "grid", default: Some("32"), doc: "collocation points per axis (power of two)" },
            KeySpec { name: "b0", default: Some("1"), doc: "coupling of the cubic nonlinearity" },
            KeySpec { name: "t", default: Some("0.12"), doc: "final time" },
            KeySpec { name: "dt", default: Some("0.006"), doc: "coarse step; the fine run uses dt / 2" },
            KeySpec { name: "k_max", default: Some("2"), doc: "deepest hierarchy entry, >= 2" },
            KeySpec { name: "stride", default: Some("2"), doc: "record every stride-th step (the quadrature grid)" },
            KeySpec { name: "alpha", default: Some("0.6"), doc: "Sobolev regularity of the residual norm" },
            KeySpec { name: "xi", default: Some("0.5"), doc: "geometric weight of the hierarchy norm, > 0" },
            KeySpec {
                name: "modes",
                default: Some("1,0:0.45,0;0,1:0,0.3"),
                doc: "initial data as xi_1,..,xi_d:re,im triples joined by ';'",
            },
        ],
    },
    ExperimentSpec {
        name: "rescale-check",
        schema_version: 1,
        doc: "commutation of the collision operator with lattice rescaling at \
              the exact amplitude factor, plus the round trip, on random \
              Hermitian matrices",
        keys: &[
            KeySpec { name: "matrices", default: Some("100"), doc: "number of random matrices" },
            KeySpec { name: "cutoff", default: Some("16"), doc: "frequency box of the random entries" },
            KeySpec { name: "pairs", default: Some("12"), doc: "sparse entries drawn per matrix" },
        ],
    },
    ExperimentSpec {
        name: "extremizer-sweep",
        schema_version: 1,
        doc: "collision spacetime-norm ratio on the endpoint extremizer \
              family: ratio^2 regressed against ln kappa at two bump widths",
        keys: &[
            KeySpec { name: "alpha", default: None, doc: "regularity; defaults to 0.5 (d = 2) or 1.0 (d = 3)" },
            KeySpec { name: "delta", default: Some("0.05"), doc: "time-window bump width" },
            KeySpec { name: "delta_alt", default: None, doc: "second width for slope stability; defaults to delta / 2, 0 disables" },
            KeySpec { name: "kappa_log2_min", default: Some("4"), doc: "first exponent of the kappa sweep" },
            KeySpec { name: "kappa_log2_max", default: None, doc: "last exponent; defaults to 12 (d = 2) or 9 (d = 3)" },
        ],
    },
    ExperimentSpec {
        name: "bump-verify",
        schema_version: 1,
        doc: "compactly supported bump with nonnegative transform: support, \
              interior positivity, transform nonnegativity, and the core lower \
              bound, all on sampled grids",
        keys: &[KeySpec { name: "delta", default: Some("0.05"), doc: "half-width of the support" }],
    },
];

pub fn experiment_spec(name: &str) -> Option<&'static ExperimentSpec> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

fn key_known(spec: &ExperimentSpec, key: &str) -> bool {
    GLOBAL_KEYS.iter().chain(spec.keys).any(|k| k.name == key)
}

/// Raw command line: experiment, optional config file, flag overrides.
pub struct Cli {
    pub experiment: String,
    pub config_path: Option<String>,
    pub flags: Vec<(String, String)>,
}

/// `lab <experiment> [--config FILE] [--key value ...]`. The value after a
/// flag is taken verbatim, so negative numbers need no escaping.
pub fn parse_cli(args: &[String]) -> Result<Cli> {
    let experiment = args[0].clone();
    let mut config_path = None;
    let mut flags = Vec::new();
    let mut i = 1;
    while i < args.len() {
        let key = args[i].strip_prefix("--").ok_or_else(|| {
            LabError::InvalidArgument(format!("expected --key, got '{}'", args[i]))
        })?;
        let Some(value) = args.get(i + 1) else {
            return Err(LabError::InvalidArgument(format!("flag --{key} is missing its value")));
        };
        if key == "config" {
            config_path = Some(value.clone());
        } else {
            flags.push((key.to_string(), value.clone()));
        }
        i += 2;
    }
    Ok(Cli { experiment, config_path, flags })
}

/// Fully resolved configuration for one experiment run.
#[derive(Debug)]
pub struct Config {
    pub spec: &'static ExperimentSpec,
    values: BTreeMap<String, String>,
    pub notices: Vec<String>,
}

pub fn resolve(cli: &Cli) -> Result<Config> {
    let spec = experiment_spec(&cli.experiment).ok_or_else(|| {
        LabError::InvalidArgument(format!(
            "unknown experiment '{}' (run `lab help` for the list)",
            cli.experiment
        ))
    })?;
    let mut values = BTreeMap::new();
    for k in GLOBAL_KEYS.iter().chain(spec.keys) {
        if let Some(d) = k.default {
            values.insert(k.name.to_string(), d.to_string());
        }
    }
    if let Some(path) = &cli.config_path {
        apply_file(path, spec, &mut values)?;
    }
    for (k, v) in &cli.flags {
        if !key_known(spec, k) {
            return Err(LabError::InvalidArgument(format!(
                "unknown key --{k} for experiment {} (see `lab help-keys {}`)",
                spec.name, spec.name
            )));
        }
        values.insert(k.clone(), v.clone());
    }
    Ok(Config { spec, values, notices: Vec::new() })
}

/// Apply one config file: keys before any section are global, `[name]` opens
/// the section of that experiment. Sections of other experiments are
/// validated but do not contribute to this run.
fn apply_file(path: &str, target: &'static ExperimentSpec, values: &mut BTreeMap<String, String>) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    let mut section: Option<&'static ExperimentSpec> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = Some(experiment_spec(name.trim()).ok_or_else(|| LabError::Parse {
                line: lineno,
                message: format!("unknown experiment section '[{}]'", name.trim()),
            })?);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(LabError::Parse {
                line: lineno,
                message: format!("expected 'key = value' or '[section]', got '{line}'"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let scope = section.unwrap_or(target);
        let global = GLOBAL_KEYS.iter().any(|k| k.name == key);
        let scoped = section.is_some() && scope.keys.iter().any(|k| k.name == key);
        let in_target_scope = section.is_none() || std::ptr::eq(scope, target);
        if section.is_none() {
            if !global {
                return Err(LabError::Parse {
                    line: lineno,
                    message: format!("'{key}' is not a global key; put it under an experiment section"),
                });
            }
        } else if !global && !scoped {
            return Err(LabError::Parse {
                line: lineno,
                message: format!("unknown key '{key}' for experiment {}", scope.name),
            });
        }
        if in_target_scope {
            values.insert(key.to_string(), value.to_string());
        }
    }
    Ok(())
}

impl Config {
    pub fn experiment(&self) -> &'static str {
        self.spec.name
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The full resolved key-value map, for the report's config echo.
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Record a value resolved in code so the echo has no hidden defaults.
    pub fn resolve_key(&mut self, key: &str, value: String) {
        self.notices.push(format!("notice: {key} defaulted to {value}"));
        self.values.insert(key.to_string(), value);
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key)
            .ok_or_else(|| LabError::InvalidArgument(format!("config key '{key}' is required")))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let raw = self.required(key)?;
        raw.parse().map_err(|_| {
            LabError::InvalidArgument(format!("config key '{key}': cannot parse '{raw}' as a real"))
        })
    }

    pub fn get_i64(&self, key: &str) -> Result<i64> {
        let raw = self.required(key)?;
        raw.parse().map_err(|_| {
            LabError::InvalidArgument(format!("config key '{key}': cannot parse '{raw}' as an integer"))
        })
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        let raw = self.required(key)?;
        raw.parse().map_err(|_| {
            LabError::InvalidArgument(format!(
                "config key '{key}': cannot parse '{raw}' as a nonnegative integer"
            ))
        })
    }

    pub fn get_u32(&self, key: &str) -> Result<u32> {
        let raw = self.required(key)?;
        raw.parse().map_err(|_| {
            LabError::InvalidArgument(format!(
                "config key '{key}': cannot parse '{raw}' as a nonnegative integer"
            ))
        })
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        let raw = self.required(key)?;
        raw.parse().map_err(|_| {
            LabError::InvalidArgument(format!(
                "config key '{key}': cannot parse '{raw}' as a nonnegative integer"
            ))
        })
    }

    pub fn get_i64_list(&self, key: &str) -> Result<Vec<i64>> {
        let raw = self.required(key)?;
        raw.split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    LabError::InvalidArgument(format!(
                        "config key '{key}': cannot parse '{}' as an integer",
                        s.trim()
                    ))
                })
            })
            .collect()
    }

    /// The quadratic form from `d` and `theta`, filling the documented d = 2
    /// default when theta is absent.
    pub fn form(&mut self) -> Result<QuadraticForm> {
        let d = self.get_usize("d")?;
        if d == 0 {
            return Err(LabError::InvalidArgument("config key 'd': must be >= 1".into()));
        }
        if self.raw("theta").is_none() {
            if d == 2 {
                self.resolve_key("theta", "1.0,1.41421356237".into());
            } else {
                return Err(LabError::InvalidArgument(format!(
                    "config key 'theta' is required for d = {d} (the documented default exists only for d = 2)"
                )));
            }
        }
        let raw = self.required("theta")?;
        let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
        if parts.len() != d {
            return Err(LabError::InvalidArgument(format!(
                "config key 'theta': {} entries but d = {d}",
                parts.len()
            )));
        }
        let mut theta = Vec::with_capacity(d);
        for (i, part) in parts.iter().enumerate() {
            let v: f64 = part.parse().map_err(|_| {
                LabError::InvalidArgument(format!(
                    "config key 'theta': cannot parse entry {} ('{part}') as a real",
                    i + 1
                ))
            })?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(LabError::InvalidArgument(format!(
                    "config key 'theta': entry {} = {part} must be a positive real",
                    i + 1
                )));
            }
            theta.push(v);
        }
        QuadraticForm::new(&theta)
    }
}

/// The generated key reference (`lab help-keys [experiment]`).
pub fn reference_page(filter: Option<&str>) -> Result<String> {
    let mut out = String::new();
    let write_keys = |out: &mut String, keys: &[KeySpec]| {
        for k in keys {
            let default = k.default.map(|d| format!("default {d}")).unwrap_or_else(|| "resolved".into());
            let _ = writeln!(out, "  {:<16}{:<22}{}", k.name, default, k.doc);
        }
    };
    if let Some(name) = filter {
        let spec = experiment_spec(name).ok_or_else(|| {
            LabError::InvalidArgument(format!("unknown experiment '{name}'"))
        })?;
        let _ = writeln!(out, "{} — {}", spec.name, spec.doc);
        write_keys(&mut out, spec.keys);
        let _ = writeln!(out, "global keys");
        write_keys(&mut out, GLOBAL_KEYS);
        return Ok(out);
    }
    let _ = writeln!(out, "global keys (any experiment)");
    write_keys(&mut out, GLOBAL_KEYS);
    for spec in EXPERIMENTS {
        let _ = writeln!(out, "\n{} — {}", spec.name, spec.doc);
        write_keys(&mut out, spec.keys);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(experiment: &str, flags: &[(&str, &str)]) -> Cli {
        Cli {
            experiment: experiment.into(),
            config_path: None,
            flags: flags.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    #[test]
    fn defaults_fill_and_flags_override() {
        let cfg = resolve(&cli("divisor", &[("n", "12")])).unwrap();
        assert_eq!(cfg.get_u64("n").unwrap(), 12);
        assert_eq!(cfg.get_i64("b").unwrap(), 0);
        assert!(cfg.raw("l").is_none());
        assert_eq!(cfg.raw("outdir"), Some("out"));
    }

    #[test]
    fn unknown_experiment_and_key_are_rejected() {
        assert!(resolve(&cli("no-such", &[])).is_err());
        let err = resolve(&cli("divisor", &[("grid", "8")])).unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
    }

    #[test]
    fn file_sections_scope_their_keys() {
        let dir = std::env::temp_dir().join(format!("lab-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.cfg");
        std::fs::write(
            &path,
            "# comment\nseed = 7\n[divisor]\nn = 30\n[bump-verify]\ndelta = 0.01\n",
        )
        .unwrap();
        let mut c = cli("divisor", &[]);
        c.config_path = Some(path.to_string_lossy().into_owned());
        let cfg = resolve(&c).unwrap();
        assert_eq!(cfg.get_u64("seed").unwrap(), 7);
        assert_eq!(cfg.get_u64("n").unwrap(), 30);
        // the other section's key must not leak into this run
        assert!(cfg.raw("delta").is_none());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let dir = std::env::temp_dir().join(format!("lab-config-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.cfg");
        std::fs::write(&path, "seed = 1\nnot a line\n").unwrap();
        let mut c = cli("divisor", &[]);
        c.config_path = Some(path.to_string_lossy().into_owned());
        let err = resolve(&c).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn theta_default_and_range_errors() {
        let mut cfg = resolve(&cli("rescale-check", &[])).unwrap();
        let form = cfg.form().unwrap();
        assert_eq!(form.thetas(), &[1.0, 1.41421356237]);
        assert!(cfg.notices.iter().any(|n| n.contains("theta")));
        assert_eq!(cfg.raw("theta"), Some("1.0,1.41421356237"));

        let mut bad = resolve(&cli("rescale-check", &[("theta", "1,-2")])).unwrap();
        let err = bad.form().unwrap_err();
        assert!(err.to_string().contains("positive"), "{err}");

        let mut three = resolve(&cli("rescale-check", &[("d", "3")])).unwrap();
        assert!(three.form().is_err());
    }

    #[test]
    fn reference_page_lists_every_key() {
        let page = reference_page(None).unwrap();
        for spec in EXPERIMENTS {
            assert!(page.contains(spec.name));
            for k in spec.keys {
                assert!(page.contains(k.name), "missing {}", k.name);
            }
        }
        assert!(reference_page(Some("divisor")).is_ok());
        assert!(reference_page(Some("nope")).is_err());
    }
}
