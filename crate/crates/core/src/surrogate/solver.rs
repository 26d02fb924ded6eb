use rand_distr::{Distribution, Normal};

use crate::evaluator::{EvaluationError, FidelityVector, OutletSeries, SimulationResult, FIDELITY_BOUNDS};
use crate::optim::rng_from_seed;

use super::{DispersionProfile, GeometryFeatures, SurrogateConfig};

/// Relative velocities of `channels` equal-area sub-channels, fastest first;
/// their mean is exactly one.
pub fn velocity_factors(channels: usize, shear_fraction: f64) -> Vec<f64> {
    (0..channels)
        .map(|j| 1.0 + shear_fraction * (1.0 - 2.0 * (j as f64 + 0.5) / channels as f64))
        .collect()
}

/// Thomas solve of `(V + dt·(G_w + G_e)) cᵢ − dt·G_w cᵢ₋₁ − dt·G_e cᵢ₊₁ = V cᵢ*`
/// with zero-flux ends, in place.
fn implicit_dispersion(c: &mut [f64], volume: &[f64], conductance: &[f64], dt: f64, scratch: &mut [f64]) {
    let n = c.len();
    if n == 1 {
        return;
    }
    // conductance[i] couples cells i and i + 1
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for i in 0..n {
        let w = if i > 0 { dt * conductance[i - 1] } else { 0.0 };
        let e = if i + 1 < n { dt * conductance[i] } else { 0.0 };
        let diag = volume[i] + w + e - w * prev_c;
        scratch[i] = e / diag;
        let d = (volume[i] * c[i] + w * prev_d) / diag;
        c[i] = d;
        prev_c = scratch[i];
        prev_d = d;
    }
    for i in (0..n - 1).rev() {
        c[i] += scratch[i] * c[i + 1];
    }
}

/// Impulse response of the multi-channel advection–dispersion model.
///
/// Upwind advection and nearest-neighbour channel exchange are explicit; axial
/// dispersion is backward Euler. The step obeys the advective Courant limit.
/// The outlet is the flow-weighted mixing-cup concentration, normalised so
/// the injected tracer integrates to one.
pub fn simulate_rtd(
    features: &GeometryFeatures,
    dispersion: &DispersionProfile,
    z: FidelityVector,
    seed: u64,
    flow_rate: f64,
    config: &SurrogateConfig,
) -> Result<SimulationResult, EvaluationError> {
    let n = features.cells();
    let channels = z.radial.round().max(1.0) as usize;
    if dispersion.coefficient.len() != n || n == 0 {
        return Err(EvaluationError::InvalidInput("dispersion profile does not match the cells".into()));
    }
    let dx = features.cell_length;
    let factors = velocity_factors(channels, config.shear_fraction);
    let q: Vec<f64> = factors.iter().map(|f| flow_rate * f / channels as f64).collect();
    let volume: Vec<f64> = features.area.iter().map(|a| a / channels as f64 * dx).collect();
    let conductance: Vec<f64> = (0..n.saturating_sub(1))
        .map(|i| {
            let d = 0.5 * (dispersion.coefficient[i] + dispersion.coefficient[i + 1]);
            let a = 0.5 * (features.area[i] + features.area[i + 1]) / channels as f64;
            d * a / dx
        })
        .collect();
    // neighbouring layers are 1/K of the section apart, so diffusive coupling
    // grows as K² and the channel count refines one continuum model
    let layers = (channels * channels) as f64;
    let exchange: Vec<f64> = dispersion.modifier.iter().map(|g| config.exchange_rate * layers / g).collect();

    let q_max = q.iter().copied().fold(0.0, f64::max);
    let v_min = volume.iter().copied().fold(f64::INFINITY, f64::min);
    let mut dt = config.courant * v_min / q_max;
    if channels > 1 {
        let k_max = exchange.iter().copied().fold(0.0, f64::max);
        dt = dt.min(0.25 / k_max);
    }
    let total_volume: f64 = features.area.iter().map(|a| a * dx).sum();
    let t_limit = 50.0 * total_volume / flow_rate;

    // channel-major state
    let mut c = vec![0.0; n * channels];
    for j in 0..channels {
        c[j * n] = q[j] / volume[0];
    }
    let injected = flow_rate;
    let mut scratch = vec![0.0; n];
    let mut delta = vec![0.0; channels];
    let mut time = Vec::new();
    let mut outlet = Vec::new();
    let mut peak = 0.0f64;
    let mut t = 0.0;
    loop {
        let c_out: f64 = (0..channels).map(|j| q[j] * c[j * n + n - 1]).sum::<f64>() / flow_rate;
        time.push(t);
        outlet.push(c_out);
        peak = peak.max(c_out);
        let inside: f64 = (0..channels)
            .map(|j| (0..n).map(|i| c[j * n + i] * volume[i]).sum::<f64>())
            .sum();
        if !inside.is_finite() || !c_out.is_finite() {
            return Err(EvaluationError::Solver(format!("non-finite state at t = {t:.3} s")));
        }
        let past_peak = peak > 0.0 && c_out < peak;
        if past_peak && c_out < config.termination_fraction * peak && inside < config.residual_mass * injected {
            break;
        }
        if t > t_limit {
            return Err(EvaluationError::Solver(format!(
                "tracer not flushed after {t:.1} s ({:.3} remaining)",
                inside / injected
            )));
        }

        for j in 0..channels {
            let row = &mut c[j * n..(j + 1) * n];
            let flux = q[j] * dt;
            for i in (1..n).rev() {
                row[i] += flux * (row[i - 1] - row[i]) / volume[i];
            }
            row[0] -= flux * row[0] / volume[0];
        }
        if channels > 1 {
            for i in 0..n {
                let rate = exchange[i] * dt;
                delta.iter_mut().for_each(|d| *d = 0.0);
                for j in 0..channels - 1 {
                    let f = rate * (c[(j + 1) * n + i] - c[j * n + i]);
                    delta[j] += f;
                    delta[j + 1] -= f;
                }
                for j in 0..channels {
                    c[j * n + i] += delta[j];
                }
            }
        }
        for j in 0..channels {
            implicit_dispersion(&mut c[j * n..(j + 1) * n], &volume, &conductance, dt, &mut scratch);
        }
        t += dt;
    }

    let sigma = config.noise_fraction * peak * (1.0 - mean_normalized(z));
    if sigma > 0.0 {
        add_noise(&time, &mut outlet, sigma, seed);
    }
    Ok(SimulationResult {
        outlet_series: OutletSeries {
            time,
            concentration: outlet,
        },
        cost: 0.0,
        fidelity_used: z,
        seed,
    })
}

fn mean_normalized(z: FidelityVector) -> f64 {
    let [a, r] = z.normalized(&FIDELITY_BOUNDS);
    0.5 * (a + r)
}

/// Zero-mean Gaussian noise, clipped at zero, then rescaled to keep `∫C dt`.
fn add_noise(time: &[f64], values: &mut [f64], sigma: f64, seed: u64) {
    let before = crate::rtd::trapezoid(time, values);
    let mut rng = rng_from_seed(seed);
    let normal = Normal::new(0.0, sigma).expect("positive standard deviation");
    for v in values.iter_mut() {
        *v = (*v + normal.sample(&mut rng)).max(0.0);
    }
    let after = crate::rtd::trapezoid(time, values);
    if after > 0.0 {
        let scale = before / after;
        for v in values.iter_mut() {
            *v *= scale;
        }
    }
}
