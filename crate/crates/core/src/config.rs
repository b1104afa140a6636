//! Flat `key = value` run configuration files.
//!
//! Blank lines and text after `#` are ignored. Every key is optional; any
//! key not listed in [`KEYS`] is an error. [`render_config`] writes a fully
//! resolved file that parses back to the same configuration.

use std::path::Path;

use crate::env_model::{Fluctuation, RateUnit};
use crate::error::{Error, Result};
use crate::fl_sim::RunConfig;
use crate::strategies::StrategyKind;

pub const KEYS: &[&str] = &[
    "clients",
    "cell_radius_m",
    "carrier_ghz",
    "bs_height_m",
    "client_height_m",
    "tx_power_dbm",
    "antenna_gain_dbi",
    "rb_bandwidth_hz",
    "noise_figure_db",
    "delta_loss",
    "rho_max",
    "model_size_mbit",
    "eta",
    "throughput_fluct_unit",
    "min_rate_fraction",
    "strategy",
    "alpha",
    "beta",
    "window",
    "candidate_fraction",
    "s_round",
    "rounds",
    "seed",
];

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |key: &str, message: String| Error::Config {
            key: Some(key.to_owned()),
            line: Some(line_no),
            message,
        };
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            key: None,
            line: Some(line_no),
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(err(key, "unknown key".into()));
        };
        if seen.contains(&known) {
            return Err(err(key, "duplicate key".into()));
        }
        seen.push(known);
        apply(&mut cfg, known, value).map_err(|e| match e {
            Error::Config { message, .. } => err(key, message),
            other => err(key, other.to_string()),
        })?;
    }
    cfg.validate().map_err(|e| match e {
        Error::Config { key, message, .. } => {
            let line = key
                .as_deref()
                .and_then(|k| text.lines().position(|l| l.split('=').next().map(str::trim) == Some(k)))
                .map(|i| i + 1);
            Error::Config { key, line, message }
        }
        other => other,
    })?;
    Ok(cfg)
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn apply(cfg: &mut RunConfig, key: &str, value: &str) -> Result<()> {
    let env = &mut cfg.env;
    match key {
        "clients" => env.clients = num(key, value)?,
        "cell_radius_m" => env.cell_radius_m = num(key, value)?,
        "carrier_ghz" => env.carrier_ghz = num(key, value)?,
        "bs_height_m" => env.bs_height_m = num(key, value)?,
        "client_height_m" => env.client_height_m = num(key, value)?,
        "tx_power_dbm" => env.tx_power_dbm = num(key, value)?,
        "antenna_gain_dbi" => env.antenna_gain_dbi = num(key, value)?,
        "rb_bandwidth_hz" => env.rb_bandwidth_hz = num(key, value)?,
        "noise_figure_db" => env.noise_figure_db = num(key, value)?,
        "delta_loss" => env.delta_loss = num(key, value)?,
        "rho_max" => env.rho_max = num(key, value)?,
        "model_size_mbit" => env.model_size_mbit = num(key, value)?,
        "eta" => env.fluctuation = Fluctuation::parse(value)?,
        "throughput_fluct_unit" => {
            env.throughput_fluct_unit = RateUnit::parse(value)
                .ok_or_else(|| Error::config(key, format!("expected `bps` or `mbps`, got `{value}`")))?
        }
        "min_rate_fraction" => env.min_rate_fraction = num(key, value)?,
        "strategy" => cfg.strategy.kind = value.parse::<StrategyKind>()?,
        "alpha" => cfg.strategy.alpha = num(key, value)?,
        "beta" => cfg.strategy.beta = num(key, value)?,
        "window" => cfg.strategy.window = num(key, value)?,
        "candidate_fraction" => cfg.candidate_fraction = num(key, value)?,
        "s_round" => cfg.s_round = num(key, value)?,
        "rounds" => cfg.rounds = num(key, value)?,
        "seed" => cfg.master_seed = num(key, value)?,
        _ => unreachable!("key list and match arms out of sync: {key}"),
    }
    Ok(())
}

/// Fully resolved configuration in the same format `parse_config` reads.
pub fn render_config(cfg: &RunConfig) -> String {
    let e = &cfg.env;
    let s = &cfg.strategy;
    let eta = match e.fluctuation {
        Fluctuation::None => "none".to_owned(),
        Fluctuation::Exponent(x) => x.to_string(),
    };
    let values: Vec<(&str, String)> = vec![
        ("clients", e.clients.to_string()),
        ("cell_radius_m", e.cell_radius_m.to_string()),
        ("carrier_ghz", e.carrier_ghz.to_string()),
        ("bs_height_m", e.bs_height_m.to_string()),
        ("client_height_m", e.client_height_m.to_string()),
        ("tx_power_dbm", e.tx_power_dbm.to_string()),
        ("antenna_gain_dbi", e.antenna_gain_dbi.to_string()),
        ("rb_bandwidth_hz", e.rb_bandwidth_hz.to_string()),
        ("noise_figure_db", e.noise_figure_db.to_string()),
        ("delta_loss", e.delta_loss.to_string()),
        ("rho_max", e.rho_max.to_string()),
        ("model_size_mbit", e.model_size_mbit.to_string()),
        ("eta", eta),
        ("throughput_fluct_unit", e.throughput_fluct_unit.name().to_owned()),
        ("min_rate_fraction", e.min_rate_fraction.to_string()),
        ("strategy", s.kind.name().to_owned()),
        ("alpha", s.alpha.to_string()),
        ("beta", s.beta.to_string()),
        ("window", s.window.to_string()),
        ("candidate_fraction", cfg.candidate_fraction.to_string()),
        ("s_round", cfg.s_round.to_string()),
        ("rounds", cfg.rounds.to_string()),
        ("seed", cfg.master_seed.to_string()),
    ];
    debug_assert_eq!(values.len(), KEYS.len());
    let mut out = String::from("# resolved configuration\n");
    for (k, v) in values {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.env.clients, 100);
        assert_eq!(cfg.candidate_fraction, 0.1);
        assert_eq!(cfg.s_round, 5);
        assert_eq!(cfg.strategy.alpha, 1000.0);
        assert_eq!(cfg.strategy.beta, 50.0);
        assert_eq!(cfg.env.fluctuation, Fluctuation::Exponent(1.5));
        assert_eq!(cfg.rounds, 500);
    }

    #[test]
    fn eta_values() {
        let err = parse_config_str("# header\neta = 2.5\n").unwrap_err();
        match err {
            Error::Config { key, line, .. } => {
                assert_eq!(key.as_deref(), Some("eta"));
                assert_eq!(line, Some(2));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(parse_config_str("eta = none").unwrap().env.fluctuation, Fluctuation::None);
        assert_eq!(
            parse_config_str("eta = 1.99  # heavy").unwrap().env.fluctuation,
            Fluctuation::Exponent(1.99)
        );
    }

    #[test]
    fn rejects_bad_input() {
        let unknown = parse_config_str("rounds = 3\nfoo = 1").unwrap_err().to_string();
        assert!(unknown.contains("foo") && unknown.contains("line 2"), "{unknown}");
        let bad = parse_config_str("alpha = lots").unwrap_err().to_string();
        assert!(bad.contains("alpha") && bad.contains("line 1"), "{bad}");
        assert!(parse_config_str("alpha").is_err());
        assert!(parse_config_str("rounds = 1\nrounds = 2").is_err());
        let inv = parse_config_str("\n\ncandidate_fraction = 1.5").unwrap_err().to_string();
        assert!(inv.contains("candidate_fraction") && inv.contains("line 3"), "{inv}");
        assert!(parse_config_str("strategy = fedavg").is_err());
        assert!(parse_config_str("throughput_fluct_unit = kbps").is_err());
    }

    proptest! {
        #[test]
        fn render_round_trips(clients in 1usize..500, c in 0.01f64..=1.0, s_round in 1usize..20,
                              eta in prop::option::of(-1.0f64..1.999), alpha in 1.0f64..1e4,
                              seed in any::<u64>(), kind in 0usize..4, nf in 5.0f64..13.0) {
            let mut cfg = RunConfig::default();
            cfg.env.clients = clients;
            cfg.candidate_fraction = c;
            cfg.s_round = s_round;
            cfg.env.fluctuation = eta.map_or(Fluctuation::None, Fluctuation::Exponent);
            cfg.strategy.alpha = alpha;
            cfg.strategy.kind = StrategyKind::ALL[kind];
            cfg.env.noise_figure_db = nf;
            cfg.master_seed = seed;
            prop_assert_eq!(parse_config_str(&render_config(&cfg)).unwrap(), cfg);
        }
    }
}
