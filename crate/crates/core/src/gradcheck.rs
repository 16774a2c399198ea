//! Finite-difference check of the analytic network gradients.

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;
use serde::Serialize;

use crate::error::Result;
use crate::nn::{init_mlp, MlpParams, Workspace};

/// Pre-activations closer to zero than this make the ReLU kink visible to
/// central differences, so such cases are skipped.
pub const KINK_GUARD: f64 = 1e-3;
const STEP: f64 = 1e-6;
const DENOM_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub cases: usize,
    pub skipped: usize,
    pub max_rel_err_params: f64,
    pub max_rel_err_input: f64,
}

impl GradcheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.max_rel_err_params.max(self.max_rel_err_input)
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(DENOM_FLOOR)
}

fn near_kink(net: &MlpParams, x: &[f64]) -> bool {
    let mut ws = Workspace::new(net);
    net.forward_ws(x, &mut ws);
    ws.pre_activations().iter().flatten().any(|z| z.abs() < KINK_GUARD)
}

/// Checks `cases` random networks (depth 2 to 4, width up to 16) at random inputs.
pub fn run_battery(cases: usize, seed: u64) -> Result<GradcheckReport> {
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut report = GradcheckReport::default();
    while report.cases < cases {
        let depth = rng.random_range(2..=4);
        let width = rng.random_range(1..=16);
        let d = rng.random_range(1..=12);
        let mut net = init_mlp(d, width, depth, rng.random())?;
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        if near_kink(&net, &x) {
            report.skipped += 1;
            continue;
        }
        report.cases += 1;

        let analytic = net.grad_params(x.as_slice(), 1.0)?;
        let analytic: Vec<f64> = analytic.iter().copied().collect();
        for (j, &a) in analytic.iter().enumerate() {
            let orig = *net.iter().nth(j).expect("index in range");
            *net.iter_mut().nth(j).expect("index in range") = orig + STEP;
            let plus = net.forward(x.as_slice())?;
            *net.iter_mut().nth(j).expect("index in range") = orig - STEP;
            let minus = net.forward(x.as_slice())?;
            *net.iter_mut().nth(j).expect("index in range") = orig;
            let numeric = (plus - minus) / (2.0 * STEP);
            report.max_rel_err_params = report.max_rel_err_params.max(rel_err(a, numeric));
        }

        let gx = net.grad_input(x.as_slice())?;
        let mut xp = x.clone();
        for j in 0..d {
            xp[j] = x[j] + STEP;
            let plus = net.forward(xp.as_slice())?;
            xp[j] = x[j] - STEP;
            let minus = net.forward(xp.as_slice())?;
            xp[j] = x[j];
            let numeric = (plus - minus) / (2.0 * STEP);
            report.max_rel_err_input = report.max_rel_err_input.max(rel_err(gx[j], numeric));
        }
    }
    Ok(report)
}
