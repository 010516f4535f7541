//! Flat `key = value` settings shared by flags and config files, and their
//! expansion into experiments.

use std::collections::BTreeMap;
use std::fmt;

use hbpsim::algos::Algorithm;
use hbpsim::metrics::Experiment;
use hbpsim::sched::SchedulerKind;

/// Keys accepted in config files; flags use the same names.
pub const KEYS: &[&str] = &[
    "alg",
    "sched",
    "n",
    "p",
    "M",
    "B",
    "hit-cost",
    "miss-cost",
    "steal-cost",
    "sched-interval",
    "padded",
    "gapped",
    "stress",
    "seed",
    "out-dir",
    "trace",
    "max-runs",
    "sweep",
];

/// Keys that may be swept.
pub const AXES: &[&str] = &[
    "alg",
    "sched",
    "n",
    "p",
    "M",
    "B",
    "hit-cost",
    "miss-cost",
    "steal-cost",
    "sched-interval",
    "padded",
    "gapped",
    "stress",
    "seed",
];

pub const DEFAULT_MAX_RUNS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl Axis {
    /// Parses `key=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self, UsageError> {
        let Some((key, list)) = spec.split_once('=') else {
            return usage(format!("sweep {spec:?}: expected axis=v1,v2,..."));
        };
        let key = normalize(key.trim());
        if !AXES.contains(&key.as_str()) {
            return usage(format!(
                "cannot sweep {key:?}; axes are {}",
                AXES.join(", ")
            ));
        }
        let values: Vec<String> = list
            .split(',')
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .map(String::from)
            .collect();
        if values.is_empty() {
            return usage(format!("sweep axis {key:?} has no values"));
        }
        Ok(Self { key, values })
    }
}

fn normalize(key: &str) -> String {
    match key {
        "m" => "M".into(),
        "b" => "B".into(),
        _ => key.replace('_', "-"),
    }
}

/// Settings merged from a config file and command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
    pub axes: Vec<Axis>,
}

impl Settings {
    /// Parses a config file: one `key = value` per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut s = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("config line {}: expected key = value", i + 1));
            };
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        let key = normalize(key);
        if !KEYS.contains(&key.as_str()) {
            return usage(format!("unknown setting {key:?}"));
        }
        if key == "sweep" {
            self.axes.push(Axis::parse(value)?);
        } else {
            self.values.insert(key, value.to_string());
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn num(&self, key: &str) -> Result<Option<u64>, UsageError> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| UsageError(format!("{key}: {v:?} is not a non-negative integer")))
            })
            .transpose()
    }

    pub fn flag(&self, key: &str) -> Result<bool, UsageError> {
        match self.get(key) {
            None | Some("false") | Some("0") => Ok(false),
            Some("true") | Some("1") => Ok(true),
            Some(v) => usage(format!("{key}: expected true or false, got {v:?}")),
        }
    }

    pub fn max_runs(&self) -> Result<usize, UsageError> {
        Ok(self
            .num("max-runs")?
            .map_or(DEFAULT_MAX_RUNS, |v| v as usize))
    }

    /// The single experiment these settings describe.
    pub fn experiment(&self) -> Result<Experiment, UsageError> {
        let required = |key: &str| match self.num(key)? {
            Some(v) => Ok(v),
            None => usage(format!("missing --{key}")),
        };
        let alg: Algorithm = match self.get("alg") {
            Some(a) => a.parse().map_err(|e| UsageError(format!("{e}")))?,
            None => return usage("missing --alg"),
        };
        let sched: SchedulerKind = self
            .get("sched")
            .unwrap_or("pws")
            .parse()
            .map_err(UsageError)?;
        let n = required("n")?;
        let p = self.num("p")?.unwrap_or(1);
        let m = required("M")?;
        let b = required("B")?;
        let seed = required("seed")?;
        for (key, v) in [("n", n), ("M", m), ("B", b)] {
            if !v.is_power_of_two() {
                return usage(format!("{key} = {v} must be a power of two"));
            }
        }
        if p == 0 {
            return usage("p must be at least 1");
        }
        if m < b {
            return usage(format!("M = {m} must be at least B = {b}"));
        }
        let mut e = Experiment::new(alg, sched, n as usize, p as usize, m, b).with_seed(seed);
        let c = &mut e.cost;
        for (key, slot) in [
            ("hit-cost", &mut c.hit_cost),
            ("miss-cost", &mut c.miss_cost),
            ("steal-cost", &mut c.steal_cost),
            ("sched-interval", &mut c.sched_interval),
        ] {
            if let Some(v) = self.num(key)? {
                *slot = v;
            }
        }
        e.padded = self.flag("padded")?;
        e.gapped = self.flag("gapped")?;
        e.stress = self.flag("stress")?;
        let trace = self.flag("trace")?;
        e.events = trace;
        e.tasks = trace;
        e.validate().map_err(|err| UsageError(err.to_string()))?;
        Ok(e)
    }

    /// One experiment per point of the Cartesian product of the axes.
    pub fn points(&self) -> Result<Vec<Experiment>, UsageError> {
        if self.axes.is_empty() {
            return usage("sweep needs at least one --sweep axis=v1,v2,...");
        }
        let total = self
            .axes
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.values.len()))
            .unwrap_or(usize::MAX);
        let cap = self.max_runs()?;
        if total > cap {
            return usage(format!("sweep has {total} points, above max-runs = {cap}"));
        }
        let mut out = Vec::with_capacity(total);
        for i in 0..total {
            let mut s = self.clone();
            s.axes.clear();
            let mut rest = i;
            for a in self.axes.iter().rev() {
                let v = &a.values[rest % a.values.len()];
                rest /= a.values.len();
                s.values.insert(a.key.clone(), v.clone());
            }
            out.push(s.experiment()?);
        }
        Ok(out)
    }
}

/// Total order on experiments used to sort sweep rows.
pub fn sort_key(e: &Experiment) -> impl Ord {
    (
        (e.alg.name(), e.sched.as_str(), e.n, e.p, e.m, e.b),
        (
            e.cost.hit_cost,
            e.cost.miss_cost,
            e.cost.steal_cost,
            e.cost.sched_interval,
        ),
        (e.padded, e.gapped, e.stress, e.seed),
    )
}

/// Value of a sweep axis in `e`, as a number when the axis is numeric.
pub fn axis_value(e: &Experiment, key: &str) -> Option<f64> {
    let v = match key {
        "n" => e.n as u64,
        "p" => e.p as u64,
        "M" => e.m,
        "B" => e.b,
        "hit-cost" => e.cost.hit_cost,
        "miss-cost" => e.cost.miss_cost,
        "steal-cost" => e.cost.steal_cost,
        "sched-interval" => e.cost.sched_interval,
        "seed" => e.seed,
        _ => return None,
    };
    Some(v as f64)
}

/// Text value of any sweep axis in `e`.
pub fn axis_text(e: &Experiment, key: &str) -> String {
    match key {
        "alg" => e.alg.name().to_string(),
        "sched" => e.sched.as_str().to_string(),
        "padded" => e.padded.to_string(),
        "gapped" => e.gapped.to_string(),
        "stress" => e.stress.to_string(),
        _ => axis_value(e, key)
            .map(|v| v.to_string())
            .unwrap_or_default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Settings {
        Settings::parse("alg = msum\nn = 1024\nM = 4096\nB = 32\nseed = 1\n").unwrap()
    }

    #[test]
    fn file_round_trip() {
        let s = Settings::parse("# comment\nalg=scan\nn = 64 # inline\nsweep = p=1,2\n").unwrap();
        assert_eq!(s.get("alg"), Some("scan"));
        assert_eq!(s.get("n"), Some("64"));
        assert_eq!(s.axes, vec![Axis::parse("p=1,2").unwrap()]);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(Settings::parse("nonsense = 1").is_err());
        assert!(Settings::parse("alg msum").is_err());
        assert!(Axis::parse("p=").is_err());
        assert!(Axis::parse("p").is_err());
        assert!(Axis::parse("out-dir=a,b").is_err());
    }

    #[test]
    fn experiment_validation() {
        assert!(base().experiment().is_ok());
        for (k, v) in [
            ("p", "0"),
            ("n", "1000"),
            ("M", "16"),
            ("seed", "x"),
            ("padded", "maybe"),
        ] {
            let mut s = base();
            s.set(k, v).unwrap();
            assert!(s.experiment().is_err(), "{k} = {v}");
        }
        let mut s = base();
        s.values.remove("seed");
        assert!(s.experiment().is_err());
    }

    #[test]
    fn cartesian_points_and_cap() {
        let mut s = base();
        s.set("sweep", "p=1,2,4").unwrap();
        s.set("sweep", "B=16,32").unwrap();
        let pts = s.points().unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!((pts[0].p, pts[0].b), (1, 16));
        assert_eq!((pts[1].p, pts[1].b), (1, 32));
        assert_eq!((pts[5].p, pts[5].b), (4, 32));
        s.set("max-runs", "5").unwrap();
        assert!(s.points().is_err());
        assert!(base().points().is_err());
    }
}
