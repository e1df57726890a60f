//! `family:key=value,...` distribution specs.
//!
//! | family        | keys                                  |
//! |---------------|---------------------------------------|
//! | `exponential` | `mu` (or `rate`)                      |
//! | `erlang`      | `m`, `eta` (or `rate`)                |
//! | `weibull`     | `tau`, and exactly one of `mu`/`mean` |
//! | `powerlaw`    | `mu`, `alpha`                         |
//! | `almostexp`   | `alpha`                               |
//! | `ph`          | `path` (text file, see `PhRepresentation::from_text`) |

use std::collections::BTreeMap;
use std::path::Path;

use super::{DistributionError, ServiceDistribution};
use crate::phasetype::PhRepresentation;

pub fn parse_distribution(spec: &str) -> Result<ServiceDistribution, DistributionError> {
    let fail = |message: String| DistributionError::Parse {
        spec: spec.to_string(),
        message,
    };
    let (family, rest) = spec
        .trim()
        .split_once(':')
        .ok_or_else(|| fail("expected 'family:key=value,...'".into()))?;

    let mut params: BTreeMap<&str, &str> = BTreeMap::new();
    for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| fail(format!("'{pair}' is not key=value")))?;
        let key = key.trim();
        if params.insert(key, value.trim()).is_some() {
            return Err(fail(format!("duplicate key '{key}'")));
        }
    }

    let mut p = Params { spec, params };
    let dist = match family.trim().to_ascii_lowercase().as_str() {
        "exponential" | "exp" => {
            let rate = p.number_alias(&["mu", "rate"])?;
            ServiceDistribution::exponential(rate)
        }
        "erlang" => {
            let m = p.integer("m")?;
            let rate = p.number_alias(&["eta", "rate"])?;
            ServiceDistribution::erlang(m, rate)
        }
        "weibull" => {
            let tau = p.number("tau")?;
            match (p.take("mu"), p.take("mean")) {
                (Some(mu), None) => ServiceDistribution::weibull(tau, p.parse_number("mu", mu)?),
                (None, Some(mean)) => ServiceDistribution::weibull_with_mean(tau, p.parse_number("mean", mean)?),
                _ => return Err(fail("weibull needs exactly one of 'mu' or 'mean'".into())),
            }
        }
        "powerlaw" | "power-law" => {
            let mu = p.number("mu")?;
            let alpha = p.number("alpha")?;
            ServiceDistribution::power_law(mu, alpha)
        }
        "almostexp" | "almost-exponential" => {
            let alpha = p.number("alpha")?;
            ServiceDistribution::almost_exponential(alpha)
        }
        "ph" => {
            let path = p
                .take("path")
                .ok_or_else(|| fail("missing key 'path'".into()))?;
            PhRepresentation::from_file(Path::new(path))
                .map(ServiceDistribution::PhaseType)
                .map_err(DistributionError::from)
        }
        other => return Err(fail(format!("unknown family '{other}'"))),
    }
    .map_err(|e| match e {
        DistributionError::Parse { .. } => e,
        other => fail(other.to_string()),
    })?;
    p.finish()?;
    Ok(dist)
}

struct Params<'a> {
    spec: &'a str,
    params: BTreeMap<&'a str, &'a str>,
}

impl<'a> Params<'a> {
    fn fail(&self, message: String) -> DistributionError {
        DistributionError::Parse {
            spec: self.spec.to_string(),
            message,
        }
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.params.remove(key)
    }

    fn parse_number(&self, key: &str, raw: &str) -> Result<f64, DistributionError> {
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.fail(format!("'{key}={raw}' is not a finite number")))
    }

    fn number(&mut self, key: &str) -> Result<f64, DistributionError> {
        let raw = self
            .take(key)
            .ok_or_else(|| self.fail(format!("missing key '{key}'")))?;
        self.parse_number(key, raw)
    }

    fn number_alias(&mut self, keys: &[&str]) -> Result<f64, DistributionError> {
        let found: Vec<(&str, &str)> = keys
            .iter()
            .filter_map(|k| self.take(k).map(|v| (*k, v)))
            .collect();
        match found.as_slice() {
            [(key, raw)] => self.parse_number(key, raw),
            [] => Err(self.fail(format!("missing key '{}'", keys[0]))),
            _ => Err(self.fail(format!("keys {keys:?} are aliases; give only one"))),
        }
    }

    fn integer(&mut self, key: &str) -> Result<u32, DistributionError> {
        let raw = self
            .take(key)
            .ok_or_else(|| self.fail(format!("missing key '{key}'")))?;
        raw.parse::<u32>()
            .map_err(|_| self.fail(format!("'{key}={raw}' is not a non-negative integer")))
    }

    fn finish(self) -> Result<(), DistributionError> {
        match self.params.keys().next() {
            Some(key) => Err(self.fail(format!("unknown key '{key}'"))),
            None => Ok(()),
        }
    }
}
