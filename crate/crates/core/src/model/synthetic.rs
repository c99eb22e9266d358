//! Seeded synthetic building clusters whose aggregate obeys the measurement
//! equation exactly (up to the injected noise).
//!
//! Every zone runs its own M-order difference equation. All zones share the
//! aggregate autoregressive coefficients; the input coefficients differ per zone
//! and are constructed so their ξ-weighted combination equals the aggregate
//! ones. Zone-specific disturbances are centred so they cancel in the ξ-weighted
//! sum, leaving the aggregate residual equal to the injected noise `ε_t`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::{ar_spectral_radius, AtdmParameters, ClusterDataset, ModelError};

/// Warm-up periods simulated and discarded before the first stored row.
const BURN_IN: usize = 200;

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub zones: usize,
    pub horizon: usize,
    pub order: usize,
    pub t_occ: usize,
    /// Standard deviation of the aggregate equation error.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Aggregate parameters to reproduce; drawn from the seed when `None`.
    pub true_params: Option<AtdmParameters>,
    /// Relative spread of per-zone γ, θ, τ_occ around the aggregate values.
    pub zone_spread: f64,
    /// Standard deviation of zone-level disturbances that cancel in aggregate.
    pub zone_disturbance: f64,
    pub dt_minutes: f64,
}

impl SyntheticConfig {
    pub fn new(zones: usize, horizon: usize, order: usize, seed: u64) -> Self {
        Self {
            zones,
            horizon,
            order,
            t_occ: 48,
            noise_sigma: 0.05,
            seed,
            true_params: None,
            zone_spread: 0.1,
            zone_disturbance: 0.05,
            dt_minutes: 30.0,
        }
    }
}

/// Monic polynomial with the given real roots, returned as AR coefficients:
/// `Π (z - r_j) = z^M - α_1 z^{M-1} - … - α_M`.
fn ar_from_roots(roots: &[f64]) -> Vec<f64> {
    let mut poly = vec![1.0];
    for r in roots {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        poly = next;
    }
    poly[1..].iter().map(|c| -c).collect()
}

/// Lag weights decaying geometrically, normalized to one.
fn lag_profile(order: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..=order).map(|m| 0.5f64.powi(m as i32)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Draws a plausible aggregate parameter set.
pub fn default_true_params(zones: usize, order: usize, t_occ: usize, seed: u64) -> AtdmParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0A7D_u64);
    let roots: Vec<f64> = (0..order).map(|j| 0.85 * 0.45f64.powi(j as i32)).collect();
    let alpha = ar_from_roots(&roots);
    let gain = 1.0 - alpha.iter().sum::<f64>();

    let weights: Vec<f64> = (0..zones).map(|_| 0.5 + rng.random::<f64>()).collect();
    let total: f64 = weights.iter().sum();
    let xi = weights.iter().map(|w| w / total).collect();

    // Steady-state contributions (°C): loads 4, outdoor 2.4, solar 0.3, occupancy rest.
    let profile = lag_profile(order);
    let mean_cluster_load = 2.0 * zones as f64;
    let scale = |total: f64| profile.iter().map(|p| p * total).collect::<Vec<f64>>();
    let beta = scale(gain * 4.0 / mean_cluster_load);
    let gamma = scale(gain * 0.3);
    let theta = scale(gain * 2.0);
    let tau_occ_free = (0..t_occ)
        .map(|s| gain * (13.3 + (2.0 * std::f64::consts::PI * s as f64 / t_occ as f64).sin()))
        .collect();
    AtdmParameters { xi, alpha, beta, gamma, theta, tau_occ_free }
}

/// Per-zone coefficients whose ξ-weighted mean matches `target` exactly.
fn spread_around(target: f64, xi: &[f64], spread: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let draw = Uniform::new_inclusive(-spread, spread).expect("finite spread");
    let mut values: Vec<f64> = xi.iter().map(|_| target * (1.0 + draw.sample(rng))).collect();
    let shift = values.iter().zip(xi).map(|(v, w)| v * w).sum::<f64>() - target;
    values.iter_mut().for_each(|v| *v -= shift);
    values
}

/// Generates a dataset and the aggregate parameters it was generated from.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(ClusterDataset, AtdmParameters), ModelError> {
    let k = cfg.zones;
    let m = cfg.order;
    if k == 0 || m == 0 || cfg.horizon == 0 || cfg.t_occ == 0 {
        return Err(ModelError::InvalidArgument("zones, horizon, order and T_occ must be positive".into()));
    }
    if !(cfg.noise_sigma >= 0.0) || !(cfg.zone_disturbance >= 0.0) || !(cfg.zone_spread >= 0.0) {
        return Err(ModelError::InvalidArgument("noise levels and spread must be non-negative".into()));
    }
    let params = match &cfg.true_params {
        Some(p) => p.clone(),
        None => default_true_params(k, m, cfg.t_occ, cfg.seed),
    };
    params.validate(k, m, cfg.t_occ)?;
    if let Some(i) = params.xi.iter().position(|x| *x <= 1e-6) {
        return Err(ModelError::InvalidArgument(format!(
            "zone {i} has aggregation weight {} and cannot be simulated",
            params.xi[i]
        )));
    }
    let radius = ar_spectral_radius(&params.alpha);
    if radius >= 1.0 {
        return Err(ModelError::UnstableDynamics { radius });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows = BURN_IN + cfg.horizon + m;
    let day = (1440.0 / cfg.dt_minutes).round().max(1.0);
    let phase = |r: usize| 2.0 * std::f64::consts::PI * (r as f64 % day) / day;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    // Outdoor temperature: daily cycle plus AR(1) weather noise.
    let mut tau_out = DVector::zeros(rows);
    let mut weather = 0.0;
    for r in 0..rows {
        weather = 0.95 * weather + 0.3 * std_normal.sample(&mut rng);
        tau_out[r] = 8.0 + 5.0 * (phase(r) - 2.0).sin() + weather;
    }
    // Solar radiation: clipped daylight bump with a per-day cloud factor.
    let mut h_rad = DVector::zeros(rows);
    let mut cloud = 1.0;
    for r in 0..rows {
        if r as f64 % day == 0.0 {
            cloud = rng.random_range(0.4..1.0);
        }
        h_rad[r] = (0.6 * cloud * (phase(r) - std::f64::consts::FRAC_PI_2).sin()).max(0.0);
    }
    // Zone loads: individually phased daily cycles with independent AR(1) noise.
    let mut h_load = DMatrix::zeros(rows, k);
    for i in 0..k {
        let shift = rng.random_range(0.0..std::f64::consts::TAU);
        let mut ar = 0.0;
        for r in 0..rows {
            ar = 0.8 * ar + 0.5 * std_normal.sample(&mut rng);
            h_load[(r, i)] = (2.0 + 0.8 * (phase(r) + shift).sin() + ar).max(0.0);
        }
    }

    // Per-zone input coefficients.
    let xi = &params.xi;
    let beta_zone: Vec<Vec<f64>> = xi.iter().map(|w| params.beta.iter().map(|b| b / w).collect()).collect();
    let spread_group = |group: &[f64], rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        let per_coeff: Vec<Vec<f64>> = group.iter().map(|g| spread_around(*g, xi, cfg.zone_spread, rng)).collect();
        (0..k).map(|i| per_coeff.iter().map(|c| c[i]).collect()).collect()
    };
    let gamma_zone = spread_group(&params.gamma, &mut rng);
    let theta_zone = spread_group(&params.theta, &mut rng);
    let occ_zone = spread_group(&params.tau_occ_free, &mut rng);

    let eps = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let zone_noise = Normal::new(0.0, cfg.zone_disturbance.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let gain = 1.0 - params.alpha.iter().sum::<f64>();

    let mut tau_in = DMatrix::zeros(rows, k);
    for i in 0..k {
        // Start each zone near its own steady state.
        let drive_mean = beta_zone[i].iter().sum::<f64>() * 2.0
            + gamma_zone[i].iter().sum::<f64>() * 8.0
            + occ_zone[i].iter().sum::<f64>() / cfg.t_occ as f64;
        for r in 0..m {
            tau_in[(r, i)] = drive_mean / gain;
        }
    }
    let mut eta = vec![0.0; k];
    for r in m..rows {
        // Period index of row r relative to the first stored estimation period.
        let period = r as i64 - (BURN_IN + m) as i64;
        let slot = period.rem_euclid(cfg.t_occ as i64) as usize;
        let common = if cfg.noise_sigma > 0.0 { eps.sample(&mut rng) } else { 0.0 };
        for e in eta.iter_mut() {
            *e = if cfg.zone_disturbance > 0.0 { zone_noise.sample(&mut rng) } else { 0.0 };
        }
        let eta_mean: f64 = eta.iter().zip(xi).map(|(e, w)| e * w).sum();
        for i in 0..k {
            let mut v = occ_zone[i][slot] + common + (eta[i] - eta_mean);
            for (lag, a) in (1..=m).zip(&params.alpha) {
                v += a * tau_in[(r - lag, i)];
            }
            for lag in 0..=m {
                v += beta_zone[i][lag] * h_load[(r - lag, i)]
                    + gamma_zone[i][lag] * tau_out[r - lag]
                    + theta_zone[i][lag] * h_rad[r - lag];
            }
            tau_in[(r, i)] = v;
        }
    }

    let keep = cfg.horizon + m;
    let dataset = ClusterDataset::new(
        m,
        cfg.dt_minutes,
        tau_in.rows(BURN_IN, keep).into_owned(),
        h_load.rows(BURN_IN, keep).into_owned(),
        tau_out.rows(BURN_IN, keep).into_owned(),
        h_rad.rows(BURN_IN, keep).into_owned(),
    )?;
    Ok((dataset, params))
}
