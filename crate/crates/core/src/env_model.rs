//! Client population and per-round resource realization.
//!
//! Clients sit uniformly in a single cell. Mean uplink throughput follows
//! from the urban-micro NLOS median pathloss and a capped, loss-scaled
//! Shannon rate over the allocated resource blocks. Every round, each
//! client's throughput and compute capability are redrawn from a normal
//! distribution truncated to `mean ± sigma` with `sigma^2 = mean^eta`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastics::{sample_trunc_normal, RngStream, TruncNormalParams};
use crate::ClientId;

/// Distances below this are clamped before evaluating the pathloss model.
pub const MIN_DISTANCE_M: f64 = 10.0;

pub const GAMMA_RANGE: (f64, f64) = (10.0, 100.0);
pub const DATASET_RANGE: (u32, u32) = (100, 1000);

/// Thermal noise density at room temperature, dBm/Hz.
const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

/// How much client resources fluctuate between rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Fluctuation {
    /// Every round realizes exactly the client's mean resources.
    None,
    /// Truncated-normal fluctuation with `sigma^2 = mean^eta`, `eta < 2`.
    Exponent(f64),
}

impl Fluctuation {
    pub fn label(&self) -> String {
        match self {
            Fluctuation::None => "none".to_owned(),
            Fluctuation::Exponent(eta) => format!("{eta}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("none") {
            return Ok(Fluctuation::None);
        }
        let eta: f64 = s
            .parse()
            .map_err(|_| Error::config("eta", format!("cannot parse `{s}` as a number or `none`")))?;
        let f = Fluctuation::Exponent(eta);
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if let Fluctuation::Exponent(eta) = *self {
            if !eta.is_finite() || eta >= 2.0 {
                return Err(Error::config("eta", format!("eta must be finite and < 2, got {eta}")));
            }
        }
        Ok(())
    }
}

/// Unit in which throughput is expressed when evaluating `mean^eta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateUnit {
    BitsPerSecond,
    MegabitsPerSecond,
}

impl RateUnit {
    /// Multiplier from Mbit/s into this unit.
    pub fn scale(&self) -> f64 {
        match self {
            RateUnit::BitsPerSecond => 1e6,
            RateUnit::MegabitsPerSecond => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RateUnit::BitsPerSecond => "bps",
            RateUnit::MegabitsPerSecond => "mbps",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "bps" => Some(RateUnit::BitsPerSecond),
            "mbps" => Some(RateUnit::MegabitsPerSecond),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub clients: usize,
    pub cell_radius_m: f64,
    pub carrier_ghz: f64,
    /// Not used by the median NLOS pathloss formula; kept for the record.
    pub bs_height_m: f64,
    pub client_height_m: f64,
    pub tx_power_dbm: f64,
    /// Combined antenna gain of the link (base station 20 dBi, client 0 dBi).
    pub antenna_gain_dbi: f64,
    pub rb_bandwidth_hz: f64,
    /// Calibrated so the default population averages about 1.4 Mbit/s.
    pub noise_figure_db: f64,
    pub delta_loss: f64,
    pub rho_max: f64,
    pub model_size_mbit: f64,
    pub fluctuation: Fluctuation,
    pub throughput_fluct_unit: RateUnit,
    /// Lower truncation bound never drops below this fraction of the mean.
    pub min_rate_fraction: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            clients: 100,
            cell_radius_m: 2000.0,
            carrier_ghz: 2.5,
            bs_height_m: 11.0,
            client_height_m: 1.0,
            tx_power_dbm: 20.0,
            antenna_gain_dbi: 20.0,
            rb_bandwidth_hz: 1.8e6,
            noise_figure_db: 6.0,
            delta_loss: 1.6,
            rho_max: 4.8,
            // 18.3 MB of 32-bit weights.
            model_size_mbit: 146.4,
            fluctuation: Fluctuation::Exponent(1.5),
            throughput_fluct_unit: RateUnit::BitsPerSecond,
            min_rate_fraction: 0.01,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::config("clients", "need at least one client"));
        }
        let positive = [
            ("cell_radius_m", self.cell_radius_m),
            ("carrier_ghz", self.carrier_ghz),
            ("bs_height_m", self.bs_height_m),
            ("client_height_m", self.client_height_m),
            ("rb_bandwidth_hz", self.rb_bandwidth_hz),
            ("delta_loss", self.delta_loss),
            ("rho_max", self.rho_max),
            ("model_size_mbit", self.model_size_mbit),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be positive and finite, got {v}")));
            }
        }
        for (key, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("antenna_gain_dbi", self.antenna_gain_dbi),
            ("noise_figure_db", self.noise_figure_db),
        ] {
            if !v.is_finite() {
                return Err(Error::config(key, format!("must be finite, got {v}")));
            }
        }
        if !(self.min_rate_fraction > 0.0 && self.min_rate_fraction < 1.0) {
            return Err(Error::config(
                "min_rate_fraction",
                format!("must lie in (0, 1), got {}", self.min_rate_fraction),
            ));
        }
        self.fluctuation.validate()
    }

    /// Throughput ceiling `rho_max * bandwidth`, Mbit/s.
    pub fn throughput_cap_mbps(&self) -> f64 {
        self.rho_max * self.rb_bandwidth_hz / 1e6
    }

    pub fn noise_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_HZ + 10.0 * self.rb_bandwidth_hz.log10() + self.noise_figure_db
    }
}

/// Static ground truth for one client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientProfile {
    pub client_id: ClientId,
    pub distance_m: f64,
    /// Mean throughput, Mbit/s.
    pub theta_mean: f64,
    /// Mean compute capability, samples/s.
    pub gamma_mean: f64,
    pub dataset_size: u32,
}

/// Resources a client actually has in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceRealization {
    pub round_index: usize,
    pub client_id: ClientId,
    pub theta_tmp: f64,
    pub gamma_tmp: f64,
    pub t_update_s: f64,
    pub t_upload_s: f64,
}

/// Distances of `count` clients dropped uniformly over a disk.
pub fn place_clients(rng: &mut RngStream, count: usize, radius_m: f64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Domain("cannot place zero clients".into()));
    }
    if !(radius_m.is_finite() && radius_m > 0.0) {
        return Err(Error::Domain(format!("cell radius must be positive, got {radius_m}")));
    }
    Ok((0..count)
        .map(|_| distance_from_uniform(rng.uniform_open01(), radius_m))
        .collect())
}

/// Radius of an area-uniform point on the disk for a uniform draw `u`.
pub fn distance_from_uniform(u: f64, radius_m: f64) -> f64 {
    radius_m * u.sqrt()
}

/// Median urban-micro NLOS pathloss in dB. Distances under 10 m are clamped.
pub fn pathloss_db(distance_m: f64, carrier_ghz: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    22.7 + 36.7 * d.log10() + 26.0 * carrier_ghz.log10()
}

/// Loss-scaled Shannon efficiency `min(rho_max, log2(1 + sinr) / delta)`.
pub fn spectral_efficiency(sinr_linear: f64, delta_loss: f64, rho_max: f64) -> f64 {
    ((1.0 + sinr_linear).log2() / delta_loss).min(rho_max)
}

pub fn sinr_db(distance_m: f64, cfg: &EnvConfig) -> f64 {
    cfg.tx_power_dbm + cfg.antenna_gain_dbi - pathloss_db(distance_m, cfg.carrier_ghz) - cfg.noise_dbm()
}

/// Mean uplink throughput in Mbit/s for a client at `distance_m`.
pub fn mean_throughput(distance_m: f64, cfg: &EnvConfig) -> f64 {
    let sinr = 10f64.powf(sinr_db(distance_m, cfg) / 10.0);
    spectral_efficiency(sinr, cfg.delta_loss, cfg.rho_max) * cfg.rb_bandwidth_hz / 1e6
}

/// Draws the static population: positions, then compute capability, then
/// dataset sizes, all from the one stream.
pub fn init_population(rng: &mut RngStream, cfg: &EnvConfig) -> Result<Vec<ClientProfile>> {
    cfg.validate()?;
    let distances = place_clients(rng, cfg.clients, cfg.cell_radius_m)?;
    let gammas: Vec<f64> = (0..cfg.clients)
        .map(|_| rng.gen_range(GAMMA_RANGE.0..=GAMMA_RANGE.1))
        .collect();
    let sizes: Vec<u32> = (0..cfg.clients)
        .map(|_| rng.gen_range(DATASET_RANGE.0..=DATASET_RANGE.1))
        .collect();
    Ok(distances
        .into_iter()
        .zip(gammas)
        .zip(sizes)
        .enumerate()
        .map(|(client_id, ((distance_m, gamma_mean), dataset_size))| ClientProfile {
            client_id,
            distance_m,
            theta_mean: mean_throughput(distance_m, cfg),
            gamma_mean,
            dataset_size,
        })
        .collect())
}

/// The population for a master seed.
pub fn population_for_seed(master_seed: u64, cfg: &EnvConfig) -> Result<Vec<ClientProfile>> {
    init_population(&mut RngStream::new(master_seed, "population", &[]), cfg)
}

/// Truncation parameters for a fluctuating quantity with the given mean.
///
/// `unit_scale` converts the mean into the unit in which `mean^eta` is
/// evaluated; `sigma` is converted back afterwards.
pub fn fluctuation_params(
    mean: f64,
    eta: f64,
    unit_scale: f64,
    min_fraction: f64,
) -> Result<TruncNormalParams> {
    let sigma = (mean * unit_scale).powf(eta / 2.0) / unit_scale;
    let lower = (mean - sigma).max(min_fraction * mean);
    TruncNormalParams::new(mean, sigma, lower, mean + sigma)
}

/// Resources of every client in `round_index`, keyed only by
/// `(master_seed, round, client)`.
pub fn realize_round_resources(
    profiles: &[ClientProfile],
    round_index: usize,
    cfg: &EnvConfig,
    master_seed: u64,
) -> Result<Vec<ResourceRealization>> {
    cfg.fluctuation.validate()?;
    profiles
        .iter()
        .map(|p| {
            let (theta_tmp, gamma_tmp) = match cfg.fluctuation {
                Fluctuation::None => (p.theta_mean, p.gamma_mean),
                Fluctuation::Exponent(eta) => {
                    let idx = [round_index as u64, p.client_id as u64];
                    let tp = fluctuation_params(
                        p.theta_mean,
                        eta,
                        cfg.throughput_fluct_unit.scale(),
                        cfg.min_rate_fraction,
                    )?;
                    let gp = fluctuation_params(p.gamma_mean, eta, 1.0, cfg.min_rate_fraction)?;
                    let theta = sample_trunc_normal(&mut RngStream::new(master_seed, "theta", &idx), &tp)?;
                    let gamma = sample_trunc_normal(&mut RngStream::new(master_seed, "gamma", &idx), &gp)?;
                    (theta, gamma)
                }
            };
            Ok(ResourceRealization {
                round_index,
                client_id: p.client_id,
                theta_tmp,
                gamma_tmp,
                t_update_s: f64::from(p.dataset_size) / gamma_tmp,
                t_upload_s: cfg.model_size_mbit / theta_tmp,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn profile(theta: f64, gamma: f64, size: u32) -> ClientProfile {
        ClientProfile {
            client_id: 0,
            distance_m: 100.0,
            theta_mean: theta,
            gamma_mean: gamma,
            dataset_size: size,
        }
    }

    #[test]
    fn placement_support_and_mapping() {
        let mut rng = RngStream::new(3, "place", &[]);
        let d = place_clients(&mut rng, 1000, 2000.0).unwrap();
        assert!(d.iter().all(|&x| x > 0.0 && x <= 2000.0));
        assert_eq!(distance_from_uniform(0.25, 2000.0), 1000.0);
        assert!(place_clients(&mut rng, 0, 2000.0).is_err());
    }

    #[test]
    fn placement_mean_is_two_thirds_radius() {
        let mut rng = RngStream::new(11, "place", &[]);
        let d = place_clients(&mut rng, 100_000, 2000.0).unwrap();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let expected = 2.0 / 3.0 * 2000.0;
        assert!((mean - expected).abs() / expected < 0.01, "mean {mean}");
    }

    #[test]
    fn pathloss_values() {
        // 22.7 + 36.7 * 3 + 26 * log10(2.5)
        assert_abs_diff_eq!(pathloss_db(1000.0, 2.5), 143.146_440_1, epsilon = 1e-6);
        // 22.7 + 36.7 + 26 * log10(2.5)
        assert_abs_diff_eq!(pathloss_db(10.0, 2.5), 69.746_440_1, epsilon = 1e-6);
        let slope = pathloss_db(800.0, 2.5) - pathloss_db(400.0, 2.5);
        assert_abs_diff_eq!(slope, 36.7 * 2f64.log10(), epsilon = 1e-12);
        assert_eq!(pathloss_db(1.0, 2.5), pathloss_db(10.0, 2.5));
    }

    #[test]
    fn throughput_cap_and_zero() {
        let cfg = EnvConfig::default();
        assert_abs_diff_eq!(mean_throughput(10.0, &cfg), 8.64, epsilon = 1e-12);
        assert_abs_diff_eq!(cfg.throughput_cap_mbps(), 8.64, epsilon = 1e-12);
        assert_eq!(spectral_efficiency(0.0, 1.6, 4.8), 0.0);
        let near = mean_throughput(50.0, &cfg);
        let far = mean_throughput(1500.0, &cfg);
        assert!(near > far && far > 0.0);
    }

    #[test]
    fn population_ranges_and_determinism() {
        let cfg = EnvConfig::default();
        let a = population_for_seed(5, &cfg).unwrap();
        let b = population_for_seed(5, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        for p in &a {
            assert!((10.0..=100.0).contains(&p.gamma_mean));
            assert!((100..=1000).contains(&p.dataset_size));
            assert!(p.theta_mean > 0.0 && p.theta_mean <= cfg.throughput_cap_mbps());
            assert!(p.distance_m <= cfg.cell_radius_m);
        }
        assert_ne!(a, population_for_seed(6, &cfg).unwrap());
    }

    #[test]
    fn max_throughput_never_exceeds_cap() {
        let cfg = EnvConfig::default();
        let cap = cfg.rho_max * cfg.rb_bandwidth_hz / 1e6;
        for seed in 0..50 {
            let pop = population_for_seed(seed, &cfg).unwrap();
            assert!(pop.iter().all(|p| p.theta_mean <= cap));
        }
    }

    #[test]
    fn no_fluctuation_times() {
        let cfg = EnvConfig {
            fluctuation: Fluctuation::None,
            ..EnvConfig::default()
        };
        let r = realize_round_resources(&[profile(1.4, 50.0, 500)], 0, &cfg, 1).unwrap();
        assert_eq!(r[0].t_update_s, 10.0);
        assert_abs_diff_eq!(r[0].t_upload_s, 104.571_428_57, epsilon = 1e-6);
        let later = realize_round_resources(&[profile(1.4, 50.0, 500)], 9, &cfg, 1).unwrap();
        assert_eq!(r[0].t_upload_s, later[0].t_upload_s);
    }

    #[test]
    fn fluctuation_support_mbps() {
        let cfg = EnvConfig {
            fluctuation: Fluctuation::Exponent(1.5),
            throughput_fluct_unit: RateUnit::MegabitsPerSecond,
            ..EnvConfig::default()
        };
        let sigma = 1.4f64.powf(0.75);
        let pop = [profile(1.4, 50.0, 500)];
        for round in 0..500 {
            let r = &realize_round_resources(&pop, round, &cfg, 2).unwrap()[0];
            assert!(r.theta_tmp >= 1.4 - sigma && r.theta_tmp <= 1.4 + sigma);
            let gs = 50f64.powf(0.75);
            assert!(r.gamma_tmp >= 50.0 - gs && r.gamma_tmp <= 50.0 + gs);
            assert!(r.t_update_s.is_finite() && r.t_upload_s.is_finite());
        }
    }

    #[test]
    fn fluctuation_support_bps() {
        let cfg = EnvConfig {
            fluctuation: Fluctuation::Exponent(1.99),
            ..EnvConfig::default()
        };
        let pop = [profile(0.2, 10.0, 100)];
        let sigma = (0.2e6f64).powf(0.995) / 1e6;
        for round in 0..500 {
            let r = &realize_round_resources(&pop, round, &cfg, 2).unwrap()[0];
            assert!(r.theta_tmp >= 0.2 - sigma && r.theta_tmp <= 0.2 + sigma);
            assert!(r.theta_tmp > 0.0 && r.gamma_tmp > 0.0);
        }
    }

    #[test]
    fn floor_keeps_rates_positive() {
        // In Mbit/s a slow client would otherwise get a negative lower bound.
        let p = fluctuation_params(0.05, 1.5, 1.0, 0.01).unwrap();
        assert_abs_diff_eq!(p.lower, 0.0005, epsilon = 1e-15);
        assert!(p.upper > 0.05);
    }

    #[test]
    fn eta_bound_enforced() {
        let cfg = EnvConfig {
            fluctuation: Fluctuation::Exponent(2.0),
            ..EnvConfig::default()
        };
        assert!(realize_round_resources(&[profile(1.0, 10.0, 100)], 0, &cfg, 0).is_err());
        assert!(Fluctuation::parse("2.5").is_err());
        assert_eq!(Fluctuation::parse("none").unwrap(), Fluctuation::None);
        assert_eq!(Fluctuation::parse("1.99").unwrap(), Fluctuation::Exponent(1.99));
    }

    #[test]
    fn realizations_keyed_by_round_and_client() {
        let cfg = EnvConfig::default();
        let pop = population_for_seed(1, &cfg).unwrap();
        let a = realize_round_resources(&pop, 4, &cfg, 1).unwrap();
        let b = realize_round_resources(&pop[10..20], 4, &cfg, 1).unwrap();
        assert_eq!(&a[10..20], &b[..]);
        let c = realize_round_resources(&pop, 5, &cfg, 1).unwrap();
        assert_ne!(a, c);
    }
}
