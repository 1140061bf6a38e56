//! Command-line flags, the `key = value` config file, and the resolved
//! [`RunConfig`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use nlspec_core::relations::Suite;
use nlspec_core::solver::Rhs;
use nlspec_core::{Mesh, MinimizeConfig, OperatorSpec, SolveConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Eig,
    Scan,
    Verify,
    Solve,
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

/// Raw flags; every field is optional so a config file can fill gaps.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "nlspec", version, about = "Relative first eigenvalues of nonlinear operators")]
pub struct Cli {
    /// eig | scan | verify | solve | report
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Space dimension (1 or 2).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Interior nodes per axis (default 256 in 1D, 64 in 2D).
    #[arg(long)]
    pub n: Option<usize>,
    /// Domain side lengths, comma separated (default 1).
    #[arg(long, value_delimiter = ',')]
    pub extent: Option<Vec<f64>>,
    /// Numerator operator, e.g. `plaplacian:p=3`.
    #[arg(long = "F")]
    pub f: Option<String>,
    /// Denominator operator, e.g. `gradweighted:p0=2,p1=1`.
    #[arg(long = "G")]
    pub g: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub p1: Option<f64>,
    /// Single lambda for `solve`.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Sweep lambdas for `solve`, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambdas: Option<Vec<f64>>,
    /// Sweep lambdas as fractions of the discrete first eigenvalue.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Ray radii for `scan`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Right-hand side for `solve`: zero, constant[:c], mode[:s], noise[:a[:seed]].
    #[arg(long)]
    pub rhs: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Residual tolerance (eigen-residual for eig/verify, equation residual for solve).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Output file (written atomically); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// prop1 | ineq33 | power | bilap_grad | bilap_density | coercivity | all
    #[arg(long)]
    pub suite: Option<String>,
}

fn parse_value<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T, CliError> {
    raw.trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("config line {line}: invalid value for `{key}`: '{}'", raw.trim())))
}

fn parse_list(key: &str, raw: &str, line: usize) -> Result<Vec<f64>, CliError> {
    raw.split(',').map(|v| parse_value(key, v, line)).collect()
}

fn parse_enum<T: ValueEnum>(key: &str, raw: &str, line: usize) -> Result<T, CliError> {
    T::from_str(raw.trim(), true)
        .map_err(|_| CliError::Validation(format!("config line {line}: invalid value for `{key}`: '{}'", raw.trim())))
}

impl Cli {
    /// Parses a config file body; later keys override earlier ones.
    pub fn from_config_text(text: &str) -> Result<Cli, CliError> {
        let mut c = Cli::default();
        for (k, raw_line) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw_line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "config line {line}: expected `key = value`, found '{body}'"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            match key {
                "command" => c.command = Some(parse_enum(key, value, line)?),
                "dim" => c.dim = Some(parse_value(key, value, line)?),
                "n" => c.n = Some(parse_value(key, value, line)?),
                "extent" => c.extent = Some(parse_list(key, value, line)?),
                "F" => c.f = Some(value.to_string()),
                "G" => c.g = Some(value.to_string()),
                "p" => c.p = Some(parse_value(key, value, line)?),
                "p0" => c.p0 = Some(parse_value(key, value, line)?),
                "p1" => c.p1 = Some(parse_value(key, value, line)?),
                "lambda" => c.lambda = Some(parse_value(key, value, line)?),
                "lambdas" => c.lambdas = Some(parse_list(key, value, line)?),
                "fractions" => c.fractions = Some(parse_list(key, value, line)?),
                "radii" => c.radii = Some(parse_list(key, value, line)?),
                "rhs" => c.rhs = Some(value.to_string()),
                "seed" => c.seed = Some(parse_value(key, value, line)?),
                "tol" => c.tol = Some(parse_value(key, value, line)?),
                "restarts" => c.restarts = Some(parse_value(key, value, line)?),
                "max_iter" | "max-iter" => c.max_iter = Some(parse_value(key, value, line)?),
                "out" => c.out = Some(PathBuf::from(value)),
                "format" => c.format = Some(parse_enum(key, value, line)?),
                "suite" => c.suite = Some(value.to_string()),
                other => {
                    return Err(CliError::Validation(format!("config line {line}: unknown key `{other}`")));
                }
            }
        }
        Ok(c)
    }

    pub fn from_config_file(path: &Path) -> Result<Cli, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config `{}`: {e}", path.display())))?;
        Cli::from_config_text(&text)
    }

    /// Fields set in `self` win over `base`.
    pub fn over(self, base: Cli) -> Cli {
        Cli {
            command: self.command.or(base.command),
            dim: self.dim.or(base.dim),
            n: self.n.or(base.n),
            extent: self.extent.or(base.extent),
            f: self.f.or(base.f),
            g: self.g.or(base.g),
            p: self.p.or(base.p),
            p0: self.p0.or(base.p0),
            p1: self.p1.or(base.p1),
            lambda: self.lambda.or(base.lambda),
            lambdas: self.lambdas.or(base.lambdas),
            fractions: self.fractions.or(base.fractions),
            radii: self.radii.or(base.radii),
            rhs: self.rhs.or(base.rhs),
            seed: self.seed.or(base.seed),
            tol: self.tol.or(base.tol),
            restarts: self.restarts.or(base.restarts),
            max_iter: self.max_iter.or(base.max_iter),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            config: self.config.or(base.config),
            suite: self.suite.or(base.suite),
        }
    }
}

/// Fully resolved and validated run parameters; serialized as the config
/// echo of a run record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    pub n: usize,
    pub extent: Vec<f64>,
    pub f: Option<String>,
    pub g: Option<String>,
    pub p: Option<f64>,
    pub p0: Option<f64>,
    pub p1: Option<f64>,
    pub lambda: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub fractions: Option<Vec<f64>>,
    pub radii: Vec<f64>,
    pub rhs: Option<String>,
    pub suite: Option<String>,
    pub seed: u64,
    pub format: Format,
    pub minimize: MinimizeConfig,
    pub solve: SolveConfig,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_RADII: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("invalid `{field}`: {msg}"))
}

/// Keeps the core's own field diagnostics; other failures are attributed
/// to `field`.
fn core_invalid(field: &str, e: nlspec_core::Error) -> CliError {
    match e {
        nlspec_core::Error::InvalidParameter { .. } => CliError::Core(e),
        other => invalid(field, other),
    }
}

fn check_exponent(field: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !x.is_finite() => Err(invalid(field, format!("{x} is not finite"))),
        _ => Ok(()),
    }
}

fn parse_spec(field: &str, s: &str) -> Result<OperatorSpec, CliError> {
    s.parse::<OperatorSpec>().map_err(|e| invalid(field, e))
}

impl RunConfig {
    pub fn resolve(cli: Cli) -> Result<RunConfig, CliError> {
        let command = cli
            .command
            .ok_or_else(|| invalid("command", "missing (eig, scan, verify, solve or report)"))?;
        let dim = cli.dim.unwrap_or(1);
        if !(dim == 1 || dim == 2) {
            return Err(invalid("dim", format!("{dim} (expected 1 or 2)")));
        }
        let n = cli.n.unwrap_or(if dim == 1 { 256 } else { 64 });
        let extent = match cli.extent {
            None => vec![1.0; dim],
            Some(e) if e.len() == 1 => vec![e[0]; dim],
            Some(e) if e.len() == dim => e,
            Some(e) => return Err(invalid("extent", format!("{} values for dimension {dim}", e.len()))),
        };
        for (field, v) in [("p", cli.p), ("p0", cli.p0), ("p1", cli.p1), ("lambda", cli.lambda)] {
            check_exponent(field, v)?;
        }
        let seed = cli.seed.unwrap_or(0);
        let mut minimize = MinimizeConfig {
            seed,
            ..MinimizeConfig::default()
        };
        let mut solve = SolveConfig {
            seed,
            ..SolveConfig::default()
        };
        if let Some(t) = cli.tol {
            if !(t > 0.0) || !t.is_finite() {
                return Err(invalid("tol", format!("{t} (tolerance > 0)")));
            }
            minimize.residual_tol = t;
            solve.tol = t;
        }
        if let Some(r) = cli.restarts {
            minimize.restarts = r;
        }
        if let Some(m) = cli.max_iter {
            minimize.max_iter = m;
            solve.max_iter = m;
        }
        if minimize.restarts == 0 {
            return Err(invalid("restarts", "0 (restarts >= 1)"));
        }
        if minimize.max_iter == 0 {
            return Err(invalid("max_iter", "0 (max_iter >= 1)"));
        }

        let radii = cli.radii.unwrap_or_else(|| DEFAULT_RADII.to_vec());
        if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(invalid("radii", "radii must be positive"));
        }
        for (field, list) in [("lambdas", &cli.lambdas), ("fractions", &cli.fractions)] {
            if let Some(l) = list {
                if l.is_empty() || l.iter().any(|v| !v.is_finite()) {
                    return Err(invalid(field, "expected a nonempty list of finite numbers"));
                }
                if l.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid(field, "values must be strictly increasing"));
                }
            }
        }
        if let Some(r) = &cli.rhs {
            r.parse::<Rhs>().map_err(|e| core_invalid("rhs", e))?;
        }
        if let Some(s) = &cli.suite {
            s.parse::<Suite>().map_err(|e| core_invalid("suite", e))?;
        }

        let mut cfg = RunConfig {
            command,
            dim,
            n,
            extent,
            f: cli.f,
            g: cli.g,
            p: cli.p,
            p0: cli.p0,
            p1: cli.p1,
            lambda: cli.lambda,
            lambdas: cli.lambdas,
            fractions: cli.fractions,
            radii,
            rhs: cli.rhs,
            suite: cli.suite,
            seed,
            format: cli.format.unwrap_or(Format::Json),
            minimize,
            solve,
            out: cli.out,
        };
        cfg.mesh()?;
        match command {
            Command::Eig | Command::Scan | Command::Report => {
                let (f, g) = cfg.operators()?;
                cfg.f = Some(f.to_string());
                cfg.g = Some(g.to_string());
            }
            Command::Solve => {
                let (p0, p1) = cfg.solve_exponents()?;
                OperatorSpec::p_laplacian(p0 + p1).map_err(|e| core_invalid("p", e))?;
                OperatorSpec::grad_weighted_power(p0, p1).map_err(|e| core_invalid("p0", e))?;
                if cfg.lambda.is_some() && (cfg.lambdas.is_some() || cfg.fractions.is_some()) {
                    return Err(invalid("lambda", "give either --lambda or a sweep list, not both"));
                }
                if cfg.lambdas.is_some() && cfg.fractions.is_some() {
                    return Err(invalid("lambdas", "give either --lambdas or --fractions, not both"));
                }
            }
            Command::Verify => {
                if let Some(p) = cfg.p {
                    if !(p >= 2.0) {
                        return Err(invalid("p", format!("{p} (p >= 2)")));
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn mesh(&self) -> Result<Mesh, CliError> {
        let m = if self.dim == 1 {
            Mesh::interval(self.extent[0], self.n)
        } else {
            Mesh::rectangle(self.extent[0], self.extent[1], self.n, self.n)
        };
        m.map_err(|e| core_invalid("n", e))
    }

    /// `F` and `G` from explicit specs, or from the exponents: `p0`/`p1`
    /// select the gradient-weighted pair, `p` alone the matched power pair.
    pub fn operators(&self) -> Result<(OperatorSpec, OperatorSpec), CliError> {
        let f = match &self.f {
            Some(s) => parse_spec("F", s)?,
            None => {
                let p = match (self.p0, self.p1) {
                    (Some(a), Some(b)) => a + b,
                    (Some(a), None) => a,
                    _ => self.p.unwrap_or(2.0),
                };
                OperatorSpec::p_laplacian(p).map_err(|e| core_invalid("p", e))?
            }
        };
        let g = match &self.g {
            Some(s) => parse_spec("G", s)?,
            None => match (self.p0, self.p1) {
                (None, None) => {
                    OperatorSpec::power_identity(self.p.unwrap_or(2.0)).map_err(|e| core_invalid("p", e))?
                }
                (p0, p1) => OperatorSpec::grad_weighted_power(p0.unwrap_or(2.0), p1.unwrap_or(0.0))
                    .map_err(|e| core_invalid("p0", e))?,
            },
        };
        let mesh = self.mesh()?;
        f.validate_on(&mesh).map_err(|e| core_invalid("F", e))?;
        g.validate_on(&mesh).map_err(|e| core_invalid("G", e))?;
        Ok((f, g))
    }

    /// `(p0, p1)` for `solve`; `p` alone means `(p, 0)`.
    pub fn solve_exponents(&self) -> Result<(f64, f64), CliError> {
        let pair = match (self.p0, self.p1, self.p) {
            (Some(a), Some(b), _) => (a, b),
            (Some(a), None, Some(p)) => (a, p - a),
            (None, Some(b), Some(p)) => (p - b, b),
            (Some(a), None, None) => (a, 0.0),
            (None, None, Some(p)) => (p, 0.0),
            (None, Some(_), None) => return Err(invalid("p1", "needs --p0 or --p")),
            (None, None, None) => (2.0, 0.0),
        };
        if let Some(p) = self.p {
            if (pair.0 + pair.1 - p).abs() > 1e-12 {
                return Err(invalid("p", format!("{p} differs from p0 + p1 = {}", pair.0 + pair.1)));
            }
        }
        Ok(pair)
    }

    pub fn rhs(&self) -> Rhs {
        self.rhs
            .as_deref()
            .map(|s| s.parse().expect("validated during resolve"))
            .unwrap_or(Rhs::Constant { value: 1.0 })
    }

    pub fn suite(&self) -> Suite {
        self.suite
            .as_deref()
            .map(|s| s.parse().expect("validated during resolve"))
            .unwrap_or(Suite::All)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        let mut full = vec!["nlspec"];
        full.extend_from_slice(args);
        Cli::try_parse_from(full).unwrap()
    }

    #[test]
    fn defaults_resolve() {
        let cfg = RunConfig::resolve(cli(&["eig"])).unwrap();
        assert_eq!(cfg.n, 256);
        assert_eq!(cfg.extent, vec![1.0]);
        assert_eq!(cfg.f.as_deref(), Some("plaplacian:p=2"));
        assert_eq!(cfg.g.as_deref(), Some("power:q=2"));
        let cfg = RunConfig::resolve(cli(&["eig", "--dim", "2"])).unwrap();
        assert_eq!((cfg.n, cfg.extent.len()), (64, 2));
    }

    #[test]
    fn invalid_exponent_names_field() {
        let err = RunConfig::resolve(cli(&["eig", "--p", "1.5"])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("`p`"), "{msg}");
        assert!(msg.contains("p >= 2"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn config_file_lines() {
        let c = Cli::from_config_text("# sweep\ncommand = solve\nlambdas = 0, 1.5, 3\n\nmax-iter = 40\n").unwrap();
        assert_eq!(c.command, Some(Command::Solve));
        assert_eq!(c.lambdas, Some(vec![0.0, 1.5, 3.0]));
        assert_eq!(c.max_iter, Some(40));
        let err = Cli::from_config_text("n = 12\nn = x\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        let err = Cli::from_config_text("colour = red\n").unwrap_err();
        assert!(err.to_string().contains("unknown key `colour`"));
        let err = Cli::from_config_text("just words\n").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn flags_override_file() {
        let file = Cli::from_config_text("command = eig\nn = 64\nseed = 3\n").unwrap();
        let merged = cli(&["--n", "32"]).over(file);
        let cfg = RunConfig::resolve(merged).unwrap();
        assert_eq!((cfg.command, cfg.n, cfg.seed), (Command::Eig, 32, 3));
    }

    #[test]
    fn solve_exponent_forms() {
        let cfg = RunConfig::resolve(cli(&["solve", "--p", "4", "--p0", "2"])).unwrap();
        assert_eq!(cfg.solve_exponents().unwrap(), (2.0, 2.0));
        assert!(RunConfig::resolve(cli(&["solve", "--p", "4", "--p0", "2", "--p1", "1"])).is_err());
        assert!(RunConfig::resolve(cli(&["solve", "--lambdas", "2,1"])).is_err());
        assert!(RunConfig::resolve(cli(&["solve", "--rhs", "wave"])).is_err());
    }

    #[test]
    fn unknown_suite_rejected() {
        let err = RunConfig::resolve(cli(&["verify", "--suite", "everything"])).unwrap_err();
        assert!(err.to_string().contains("`suite`"));
    }
}
