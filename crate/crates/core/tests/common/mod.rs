//! Reference fixtures and independent oracles shared by the test targets.
#![allow(dead_code)]

use mixlaw::model::{DomainCatalog, FitDiagnostics, FittedModel, ScalingParams, TransferMatrix};

pub const DOMAINS: [&str; 6] = ["ABD_CT", "ABD_MRI", "BRAIN_T1", "BRAIN_T2", "HEAD_CT", "HEAD_PET"];

pub const REFERENCE_BUDGET: f64 = 100_000.0;

/// Transfer-aware mixture behind the reference decomposition.
pub const REFERENCE_MIXTURE: [f64; 6] = [0.237, 0.05, 0.05, 0.05, 0.05, 0.563];

/// Reference per-source contributions `tau_ij * h_j * T`; rows are targets.
pub const REFERENCE_CONTRIBUTIONS: [[f64; 6]; 6] = [
    [23_700.0, 2_800.0, 1_200.0, 2_450.0, 1_250.0, 2_252.0],
    [11_139.0, 5_000.0, 800.0, 1_600.0, 700.0, 1_689.0],
    [7_584.0, 1_000.0, 5_000.0, 1_300.0, 1_950.0, 3_378.0],
    [8_295.0, 1_300.0, 1_100.0, 5_000.0, 950.0, 1_689.0],
    [5_925.0, 700.0, 1_950.0, 950.0, 5_000.0, 15_764.0],
    [948.0, 150.0, 300.0, 150.0, 1_400.0, 56_300.0],
];

pub const REFERENCE_TOTALS: [f64; 6] = [33_652.0, 20_928.0, 20_212.0, 18_334.0, 30_289.0, 59_248.0];

pub const REFERENCE_AMPLIFICATION: [f64; 6] = [1.4, 4.2, 4.0, 3.7, 6.1, 1.1];

/// Exponent and scale fitted for the transfer-aware runs, floor taken as zero.
pub const REFERENCE_SELF_PARAMS: [(f64, f64); 6] = [
    (0.407, 5.02),
    (0.487, 9.51),
    (0.209, 0.21),
    (0.243, 0.30),
    (0.436, 8.12),
    (0.724, 39.80),
];

pub const VOLUME_COUNTS: [i64; 6] = [500, 150, 500, 500, 500, 150];
pub const DATA_PROPORTIONAL: [f64; 6] = [0.217, 0.065, 0.217, 0.217, 0.217, 0.065];

pub const BUDGET_RATIOS: [f64; 6] = [0.72, 0.69, 0.45, 0.46, 0.71, 3.80];
pub const LOSS_RATIOS: [f64; 6] = [1.32, 1.51, 1.18, 1.16, 1.32, 2.96];
pub const RATIO_CORRELATION: f64 = 0.992;

/// Reference mean transfer (outgoing, incoming) per domain.
pub const MEAN_TRANSFER: [(f64, f64); 6] = [
    (0.29, 0.32),
    (0.24, 0.22),
    (0.21, 0.25),
    (0.26, 0.21),
    (0.25, 0.25),
    (0.09, 0.09),
];

pub fn names() -> Vec<String> {
    DOMAINS.iter().map(|s| s.to_string()).collect()
}

/// `tau_ij = contribution_ij / (h_j * T)` with an exact unit diagonal.
pub fn reference_tau() -> TransferMatrix {
    let rows = (0..6)
        .map(|i| {
            (0..6)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        REFERENCE_CONTRIBUTIONS[i][j] / (REFERENCE_MIXTURE[j] * REFERENCE_BUDGET)
                    }
                })
                .collect()
        })
        .collect();
    TransferMatrix::new(rows).unwrap()
}

pub fn reference_model() -> FittedModel {
    let params = REFERENCE_SELF_PARAMS
        .iter()
        .map(|&(beta, c)| ScalingParams::new(0.0, c, beta).unwrap())
        .collect();
    FittedModel::new(
        DomainCatalog::new(names(), Some(VOLUME_COUNTS.to_vec())).unwrap(),
        params,
        reference_tau(),
        FitDiagnostics::default(),
    )
    .unwrap()
}

pub fn model_from(params: &[(f64, f64, f64)], tau: Vec<Vec<f64>>) -> FittedModel {
    let names: Vec<String> = (0..params.len()).map(|i| format!("d{i}")).collect();
    FittedModel::new(
        DomainCatalog::from_names(names).unwrap(),
        params
            .iter()
            .map(|&(e, c, b)| ScalingParams::new(e, c, b).unwrap())
            .collect(),
        TransferMatrix::new(tau).unwrap(),
        FitDiagnostics::default(),
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// Oracles written directly from the law, independent of the library's paths.
// ---------------------------------------------------------------------------

pub fn oracle_loss(model: &FittedModel, h: &[f64], budget: f64, target: usize) -> f64 {
    let p = &model.params()[target];
    let t_eff: f64 = (0..h.len()).map(|j| model.tau().get(target, j) * h[j] * budget).sum();
    p.e() + p.c() / t_eff.powf(p.beta())
}

pub fn oracle_objective(model: &FittedModel, h: &[f64], budget: f64, weights: &[f64]) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(i, w)| w * oracle_loss(model, h, budget, i))
        .sum()
}

/// Exhaustive search over the floored simplex on a grid of spacing `1/steps`.
pub fn grid_minimum(model: &FittedModel, budget: f64, weights: &[f64], floor: f64, steps: usize) -> (f64, Vec<f64>) {
    fn walk(
        units: &mut Vec<usize>,
        remaining: usize,
        k: usize,
        steps: usize,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if units.len() == k - 1 {
            units.push(remaining);
            visit(units);
            units.pop();
            return;
        }
        for u in 0..=remaining {
            units.push(u);
            walk(units, remaining - u, k, steps, visit);
            units.pop();
        }
    }
    let k = model.num_domains();
    let min_units = (floor * steps as f64 - 1e-9).ceil() as usize;
    let mut best = (f64::INFINITY, vec![]);
    walk(&mut Vec::with_capacity(k), steps, k, steps, &mut |units| {
        if units.iter().any(|&u| u < min_units) {
            return;
        }
        let h: Vec<f64> = units.iter().map(|&u| u as f64 / steps as f64).collect();
        let v = oracle_objective(model, &h, budget, weights);
        if v < best.0 {
            best = (v, h);
        }
    });
    best
}

/// Flat Dirichlet point on the floored simplex from a seeded generator.
pub fn random_interior<R: rand::Rng>(rng: &mut R, k: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| floor + (1.0 - k as f64 * floor) * x / total).collect()
}
