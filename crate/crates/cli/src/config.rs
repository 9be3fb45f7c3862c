//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use spdectl::dynamics::{constant, indicator};
use spdectl::spatial::FemBoundary;
use spdectl::{
    model, riccati_solve, spectral_basis, Activation, ControlProblem, Family, Field, ProblemSetup,
    Space, TrainConfig,
};

/// A configuration problem, always naming the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key '{}': {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(key: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError { key: key.to_string(), message: message.into() })
}

/// Every accepted key: name, default (`None` means required), description.
pub const KEYS: &[(&str, Option<&str>, &str)] = &[
    ("problem", None, "model: heat-lq, nagumo-l2 or nagumo-nemytskii"),
    ("basis", None, "spatial discretization: spectral or fem"),
    ("length", None, "domain length L of (0, L)"),
    ("modes", None, "n: highest cosine mode, or number of finite elements"),
    ("fem_boundary", Some("half-hats"), "hat basis at the ends: half-hats or left-truncated"),
    ("horizon", None, "final time T"),
    ("dt", None, "time step; T / dt must be an integer"),
    ("sigma", None, "additive noise amplitude"),
    ("nu", Some("model"), "control cost weight, or 'model' for the model default"),
    ("initial", None, "initial state: 'indicator A B', 'constant C' or 'zero'"),
    ("family", None, "feedback: zero, linear-diagonal, one-layer, two-layer, rbf-nemytskii, riccati"),
    ("hidden", Some("50"), "neurons of the (first) hidden layer"),
    ("hidden2", Some("50"), "neurons of the second hidden layer (two-layer)"),
    ("activation", Some("tanh"), "network activation: tanh or relu"),
    ("cutoff", Some("none"), "radial input cutoff radius, or none"),
    ("time_scale", Some("auto"), "factor on the time input of networks; auto means 1/T"),
    ("neurons", Some("40"), "RBF neurons m"),
    ("intervals", Some("20"), "time intervals r of piecewise-constant families"),
    ("kappa", Some("6"), "RBF width parameter"),
    ("train_centers", Some("true"), "whether RBF centres are trained"),
    ("init_seed", Some("1"), "seed of the parameter initialization"),
    ("params", Some("none"), "parameter file for simulate and evaluate, or none"),
    ("step_size", Some("0.05"), "SGD step size s"),
    ("decay", Some("none"), "step decay horizon tau (s / (1 + it / tau)), or none"),
    ("batch", Some("8"), "Monte-Carlo batch size B"),
    ("max_iterations", Some("2000"), "SGD iteration budget"),
    ("tolerance", Some("1e-6"), "stop when the estimated gradient norm drops below this"),
    ("seed", Some("0"), "master seed of all noise"),
    ("eval_samples", Some("1000"), "evaluation paths for cost estimates"),
    ("snapshot_every", Some("0"), "write parameters every this many iterations (0: never)"),
    ("dump_trajectories", Some("0"), "number of simulated paths dumped as binary field files"),
    ("dump_controls", Some("false"), "also dump the controls of dumped paths"),
    ("dump_gains", Some("true"), "write Riccati gains as CSV"),
    ("dump_history", Some("true"), "write the training history as CSV"),
    ("grad_check_steps", Some("1e-2,1e-3,1e-4,1e-5,1e-6"), "finite-difference steps of grad-check"),
    ("grad_check_tolerance", Some("1e-6"), "relative error accepted by grad-check"),
];

/// Resolved configuration: every key from [`KEYS`] has a value.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

fn strip(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

/// Splits `key = value` (or `key=value`).
pub fn split_assignment(text: &str) -> Option<(String, String)> {
    let (k, v) = text.split_once('=')?;
    let k = k.trim();
    if k.is_empty() {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

impl Config {
    /// Parses config text, then applies `overrides` in order.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut raw = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = strip(line);
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = split_assignment(line) else {
                return err(line, format!("line {} is not of the form key = value", i + 1));
            };
            if raw.insert(k.clone(), v).is_some() {
                return err(&k, "given more than once");
            }
        }
        for (k, v) in overrides {
            raw.insert(k.clone(), v.clone());
        }
        let mut values = BTreeMap::new();
        for (k, v) in &raw {
            if !KEYS.iter().any(|(name, _, _)| name == k) {
                return err(k, "unknown key");
            }
            values.insert(k.clone(), v.clone());
        }
        for (name, default, _) in KEYS {
            if !values.contains_key(*name) {
                match default {
                    Some(d) => {
                        values.insert(name.to_string(), d.to_string());
                    }
                    None => return err(name, "missing required key"),
                }
            }
        }
        let cfg = Config { values };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Text form with every key, parseable back into an equal config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, _, _) in KEYS {
            out.push_str(&format!("{name} = {}\n", self.values[*name]));
        }
        out
    }

    pub fn get(&self, key: &str) -> &str {
        &self.values[key]
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        match self.get(key).parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => err(key, "must be finite"),
            Err(_) => err(key, format!("'{}' is not a number", self.get(key))),
        }
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            err(key, format!("must be positive, got {v}"))
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        self.get(key).parse::<usize>().or_else(|_| err(key, format!("'{}' is not a nonnegative integer", self.get(key))))
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        self.get(key).parse::<u64>().or_else(|_| err(key, format!("'{}' is not a nonnegative integer", self.get(key))))
    }

    pub fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.get(key) {
            "true" => Ok(true),
            "false" => Ok(false),
            other => err(key, format!("'{other}' is not true or false")),
        }
    }

    fn optional_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        if self.get(key) == "none" {
            Ok(None)
        } else {
            self.positive(key).map(Some)
        }
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.u64("seed")
    }

    pub fn steps_list(&self) -> Result<Vec<f64>, ConfigError> {
        let key = "grad_check_steps";
        let mut out = Vec::new();
        for part in self.get(key).split(',') {
            match part.trim().parse::<f64>() {
                Ok(h) if h > 0.0 && h.is_finite() => out.push(h),
                _ => return err(key, format!("'{}' is not a positive step", part.trim())),
            }
        }
        Ok(out)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let problem = self.get("problem");
        if model(problem).is_err() {
            return err("problem", format!("unknown model '{problem}'"));
        }
        if !matches!(self.get("basis"), "spectral" | "fem") {
            return err("basis", format!("unknown basis '{}'", self.get("basis")));
        }
        if !matches!(self.get("fem_boundary"), "half-hats" | "left-truncated") {
            return err("fem_boundary", format!("unknown boundary '{}'", self.get("fem_boundary")));
        }
        self.positive("length")?;
        if self.usize("modes")? == 0 {
            return err("modes", "must be at least 1");
        }
        let horizon = self.positive("horizon")?;
        let dt = self.positive("dt")?;
        let ratio = horizon / dt;
        if dt >= horizon || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return err("dt", format!("T / dt = {ratio} must be an integer greater than 1"));
        }
        if self.f64("sigma")? < 0.0 {
            return err("sigma", "must be nonnegative");
        }
        if self.get("nu") != "model" && self.f64("nu")? < 0.0 {
            return err("nu", "must be nonnegative");
        }
        self.initial_spec()?;
        self.family()?;
        self.train_config()?;
        self.usize("eval_samples")?;
        self.usize("snapshot_every")?;
        self.usize("dump_trajectories")?;
        self.u64("init_seed")?;
        for key in ["dump_controls", "dump_gains", "dump_history"] {
            self.bool(key)?;
        }
        self.steps_list()?;
        self.positive("grad_check_tolerance")?;
        Ok(())
    }

    fn initial_spec(&self) -> Result<InitialSpec, ConfigError> {
        let key = "initial";
        let parts: Vec<&str> = self.get(key).split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().or_else(|_| err(key, format!("'{s}' is not a number")));
        match parts.as_slice() {
            ["zero"] => Ok(InitialSpec::Constant(0.0)),
            ["constant", c] => Ok(InitialSpec::Constant(num(c)?)),
            ["indicator", a, b] => {
                let (a, b) = (num(a)?, num(b)?);
                if a >= b {
                    return err(key, "indicator needs A < B");
                }
                Ok(InitialSpec::Indicator(a, b))
            }
            _ => err(key, format!("'{}' is not 'indicator A B', 'constant C' or 'zero'", self.get(key))),
        }
    }

    pub fn space(&self) -> Result<Space, ConfigError> {
        let length = self.positive("length")?;
        let n = self.usize("modes")?;
        match self.get("basis") {
            "spectral" => spectral_basis(length, n).map(Space::from).or_else(|e| err("modes", e.to_string())),
            _ => {
                let boundary = match self.get("fem_boundary") {
                    "left-truncated" => FemBoundary::LeftTruncated,
                    _ => FemBoundary::HalfHats,
                };
                spdectl::FemBasis::with_boundary(length, n, boundary)
                    .map(Space::from)
                    .or_else(|e| err("modes", e.to_string()))
            }
        }
    }

    /// Builds the problem; tracking models get the deterministic uncontrolled
    /// solution as reference.
    pub fn problem(&self) -> Result<ControlProblem, ConfigError> {
        let space = self.space()?;
        let initial: Field = match self.initial_spec()? {
            InitialSpec::Constant(c) => constant(&space, c),
            InitialSpec::Indicator(a, b) => indicator(&space, a, b),
        };
        let mut m = model(self.get("problem")).or_else(|e| err("problem", e.to_string()))?;
        if self.get("nu") != "model" {
            m.nu = self.f64("nu")?;
        }
        let setup = ProblemSetup::from_model(space, m, self.f64("horizon")?, self.f64("dt")?, self.f64("sigma")?, initial);
        let problem = setup.build().or_else(|e| err("dt", e.to_string()))?;
        if self.get("problem").starts_with("nagumo") {
            let reference = spdectl::reference_profile(&problem).or_else(|e| err("initial", e.to_string()))?;
            return problem.with_reference(&reference.fields(&problem)).or_else(|e| err("initial", e.to_string()));
        }
        Ok(problem)
    }

    pub fn family(&self) -> Result<Family, ConfigError> {
        let horizon = self.positive("horizon")?;
        let activation = Activation::parse(self.get("activation")).or_else(|e| err("activation", e.to_string()))?;
        let cutoff = self.optional_f64("cutoff")?;
        let time_scale = match self.get("time_scale") {
            "auto" => 1.0 / horizon,
            _ => self.f64("time_scale")?,
        };
        let positive_count = |key: &str| -> Result<usize, ConfigError> {
            match self.usize(key)? {
                0 => err(key, "must be at least 1"),
                v => Ok(v),
            }
        };
        Ok(match self.get("family") {
            "zero" => Family::Zero,
            "linear-diagonal" => Family::LinearDiagonal { intervals: positive_count("intervals")? },
            "one-layer" => Family::OneLayer { hidden: positive_count("hidden")?, activation, cutoff, time_scale },
            "two-layer" => Family::TwoLayer {
                hidden1: positive_count("hidden")?,
                hidden2: positive_count("hidden2")?,
                activation,
                cutoff,
                time_scale,
            },
            "rbf-nemytskii" => {
                if self.get("basis") != "fem" {
                    return err("family", "rbf-nemytskii acts node by node and needs basis = fem");
                }
                Family::RbfNemytskii {
                    neurons: positive_count("neurons")?,
                    intervals: positive_count("intervals")?,
                    kappa: self.positive("kappa")?,
                    train_centers: self.bool("train_centers")?,
                }
            }
            "riccati" => {
                if self.get("basis") != "spectral" || self.get("problem") != "heat-lq" {
                    return err("family", "riccati feedback needs problem = heat-lq and basis = spectral");
                }
                let sol = riccati_solve(self.f64("length")?, self.usize("modes")?, horizon, self.f64("dt")?)
                    .or_else(|e| err("dt", e.to_string()))?;
                Family::Riccati(Arc::new(sol))
            }
            other => return err("family", format!("unknown family '{other}'")),
        })
    }

    pub fn train_config(&self) -> Result<TrainConfig, ConfigError> {
        let batch = self.usize("batch")?;
        if batch == 0 {
            return err("batch", "must be at least 1");
        }
        let tolerance = match self.get("tolerance") {
            "inf" | "infinity" => f64::INFINITY,
            _ => self.positive("tolerance")?,
        };
        Ok(TrainConfig {
            step_size: self.positive("step_size")?,
            batch,
            max_iterations: self.usize("max_iterations")?,
            tolerance,
            seed: self.seed()?,
            decay: self.optional_f64("decay")?,
        })
    }
}

enum InitialSpec {
    Constant(f64),
    Indicator(f64, f64),
}

/// The `--help` listing of all keys.
pub fn key_help() -> String {
    let mut s = String::from("Config keys (flat 'key = value' lines, '#' starts a comment):\n");
    for (name, default, doc) in KEYS {
        match default {
            Some(d) => s.push_str(&format!("  {name:<22} {doc} [default: {d}]\n")),
            None => s.push_str(&format!("  {name:<22} {doc} [required]\n")),
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAT: &str = "problem = heat-lq\nbasis = spectral\nlength = 20\nmodes = 8\nhorizon = 1\ndt = 0.05\n\
                        sigma = 0.05\ninitial = indicator 6.666666666666667 13.333333333333334\nfamily = one-layer\n";

    #[test]
    fn defaults_are_filled_and_render_round_trips() {
        let cfg = Config::parse(HEAT, &[]).unwrap();
        assert_eq!(cfg.get("batch"), "8");
        let again = Config::parse(&cfg.render(), &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn missing_and_unknown_keys_are_named() {
        for (name, default, _) in KEYS {
            if default.is_some() {
                continue;
            }
            let text: String = HEAT.lines().filter(|l| !l.starts_with(&format!("{name} "))).map(|l| format!("{l}\n")).collect();
            let e = Config::parse(&text, &[]).unwrap_err();
            assert_eq!(e.key, *name);
        }
        let e = Config::parse(&format!("{HEAT}stepsize = 0.1\n"), &[]).unwrap_err();
        assert_eq!(e.key, "stepsize");
    }

    #[test]
    fn bad_values_are_named() {
        let cases = [
            ("problem", "heat"),
            ("basis", "wavelet"),
            ("dt", "0.3"),
            ("sigma", "-1"),
            ("initial", "bump"),
            ("family", "three-layer"),
            ("activation", "sigmoid"),
            ("batch", "0"),
            ("step_size", "abc"),
            ("dump_gains", "yes"),
            ("grad_check_steps", "1e-3,-1"),
        ];
        for (key, value) in cases {
            let e = Config::parse(HEAT, &[(key.to_string(), value.to_string())]).unwrap_err();
            assert_eq!(e.key, key, "{e}");
        }
        let e = Config::parse(HEAT, &[("family".into(), "rbf-nemytskii".into())]).unwrap_err();
        assert_eq!(e.key, "family");
    }

    #[test]
    fn duplicates_are_rejected() {
        let e = Config::parse(&format!("{HEAT}modes = 4\n"), &[]).unwrap_err();
        assert_eq!(e.key, "modes");
    }

    #[test]
    fn overrides_win() {
        let cfg = Config::parse(HEAT, &[("modes".into(), "4".into())]).unwrap();
        assert_eq!(cfg.space().unwrap().dim(), 5);
        assert_eq!(cfg.problem().unwrap().steps(), 20);
    }
}
