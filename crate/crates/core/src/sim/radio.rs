use super::config::{AntennaConfig, PathlossConfig};

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Log-distance path loss without shadowing; distances below the configured
/// minimum are clamped.
pub fn pathloss_db(distance_m: f64, cfg: &PathlossConfig) -> f64 {
    let d = distance_m.max(cfg.min_distance_m);
    cfg.pl0_db + 10.0 * cfg.exponent * (d / cfg.d0_m).log10()
}

/// Path loss between two points with an additive shadowing term.
pub fn pathloss(tx: [f64; 2], rx: [f64; 2], shadow_db: f64, cfg: &PathlossConfig) -> f64 {
    let d = (tx[0] - rx[0]).hypot(tx[1] - rx[1]);
    pathloss_db(d, cfg) + shadow_db
}

/// Horizontal sector pattern: parabolic main lobe floored at the maximum attenuation.
pub fn antenna_gain_db(tx: [f64; 2], azimuth_deg: f64, rx: [f64; 2], cfg: &AntennaConfig) -> f64 {
    let bearing = (rx[1] - tx[1]).atan2(rx[0] - tx[0]).to_degrees();
    let mut off = (bearing - azimuth_deg).rem_euclid(360.0);
    if off > 180.0 {
        off = 360.0 - off;
    }
    cfg.max_gain_dbi - (12.0 * (off / cfg.beamwidth_deg).powi(2)).min(cfg.max_attenuation_db)
}

/// Correlation of shadowing between two positions `moved_m` apart.
pub fn shadow_correlation(moved_m: f64, decorrelation_m: f64) -> f64 {
    (-moved_m / decorrelation_m).exp()
}

/// SINR in dB. Each interferer contributes its received power scaled by its
/// activity factor (the interfering cell's load).
pub fn compute_sinr(
    serving_dbm: f64,
    interferers: impl IntoIterator<Item = (f64, f64)>,
    noise_dbm: f64,
) -> f64 {
    let interference: f64 = interferers
        .into_iter()
        .map(|(dbm, activity)| dbm_to_mw(dbm) * activity)
        .sum();
    serving_dbm - mw_to_dbm(interference + dbm_to_mw(noise_dbm))
}

pub fn spectral_efficiency(sinr_db: f64, cap: f64) -> f64 {
    (1.0 + 10f64.powf(sinr_db / 10.0)).log2().min(cap)
}
