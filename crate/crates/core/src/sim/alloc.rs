use super::config::LatencyConfig;
use super::radio::spectral_efficiency;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UserDemand {
    pub slice: usize,
    pub demand_mbps: f64,
    pub sinr_db: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UserService {
    pub rate_mbps: f64,
    pub latency_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellAllocation {
    /// One entry per input demand, same order.
    pub services: Vec<UserService>,
    /// Fraction of the cell's resources used by each slice.
    pub slice_load: Vec<f64>,
    pub utilization: f64,
}

/// Equal-share scheduler: every active user gets `1/K` of the band and uses as
/// much of it as its demand needs.
pub fn allocate_resources(
    users: &[UserDemand],
    n_slices: usize,
    bandwidth_mhz: f64,
    max_spectral_eff: f64,
    latency: &LatencyConfig,
) -> CellAllocation {
    let mut slice_load = vec![0.0; n_slices];
    if users.is_empty() {
        return CellAllocation {
            services: Vec::new(),
            slice_load,
            utilization: 0.0,
        };
    }
    let k = users.len() as f64;
    let share = bandwidth_mhz / k;
    let mut usage = Vec::with_capacity(users.len());
    let mut rates = Vec::with_capacity(users.len());
    for u in users {
        let capacity = share * spectral_efficiency(u.sinr_db, max_spectral_eff);
        let used = if capacity > 0.0 {
            (u.demand_mbps / capacity).min(1.0)
        } else {
            1.0
        };
        usage.push(used);
        rates.push(u.demand_mbps.min(capacity));
        slice_load[u.slice] += used / k;
    }
    let rho = usage.iter().sum::<f64>() / k;
    let queueing = latency.queue_ms * rho / (1.0 - rho + latency.eps);
    let services = rates
        .into_iter()
        .map(|rate| UserService {
            rate_mbps: rate,
            latency_ms: latency.packet_kbit / rate + queueing,
        })
        .collect();
    CellAllocation {
        services,
        slice_load,
        utilization: rho,
    }
}
