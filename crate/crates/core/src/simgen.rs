//! Seeded generators for the cross-sectional confounding design and the
//! staggered-adoption latent-factor design.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::panel::PanelData;
use crate::rng::stream;
use crate::scalar::Real;

/// `√(1 − 2/π)`, the standard deviation of `|Z|` for standard normal `Z`.
pub fn abs_normal_sd() -> f64 {
    (1.0 - 2.0 / std::f64::consts::PI).sqrt()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossSectionSim<T> {
    pub y: Vec<T>,
    pub d: Vec<T>,
    pub x1: Vec<T>,
    pub x2: Vec<T>,
    pub x3: Vec<T>,
    pub u: Vec<T>,
    pub gamma: T,
    pub tau_true: T,
}

impl<T: Real> CrossSectionSim<T> {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Working design `[1?, d, x₁]`; the treatment coefficient is column 0
    /// without an intercept and column 1 with one.
    pub fn design(&self, intercept: bool) -> Matrix<T> {
        let cols = if intercept { 3 } else { 2 };
        let mut data = Vec::with_capacity(self.len() * cols);
        for i in 0..self.len() {
            if intercept {
                data.push(T::one());
            }
            data.push(self.d[i]);
            data.push(self.x1[i]);
        }
        Matrix::from_row_major(self.len(), cols, data).expect("consistent design shape")
    }
}

/// `X₁, X₂, X₃ ~ N(0, 1)`, `U = |X₁|/√(1 − 2/π)`,
/// `D ~ Bernoulli(expit(0.4U + 0.4X₂ + 0.8X₃))`, `Y ~ N(τD + X₁ + γU, 1)`.
pub fn simulate_cross_section<T: Real>(n: usize, gamma: T, tau_true: T, seed: u64) -> Result<CrossSectionSim<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let mut rng = stream(seed, "sim-cross-section", 0);
    let normals = |rng: &mut crate::rng::StreamRng| -> Vec<f64> { (0..n).map(|_| f64::sample_std_normal(rng)).collect() };
    let x1 = normals(&mut rng);
    let x2 = normals(&mut rng);
    let x3 = normals(&mut rng);
    let sd = abs_normal_sd();
    let u: Vec<f64> = x1.iter().map(|x| x.abs() / sd).collect();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let p = expit(0.4 * u[i] + 0.4 * x2[i] + 0.8 * x3[i]);
            if rng.random::<f64>() < p { 1.0 } else { 0.0 }
        })
        .collect();
    let (g, tau) = (gamma.as_f64(), tau_true.as_f64());
    let y: Vec<f64> = (0..n).map(|i| tau * d[i] + x1[i] + g * u[i] + f64::sample_std_normal(&mut rng)).collect();
    let cast = |v: Vec<f64>| v.into_iter().map(T::lit).collect();
    Ok(CrossSectionSim { y: cast(y), d: cast(d), x1: cast(x1), x2: cast(x2), x3: cast(x3), u: cast(u), gamma, tau_true })
}

/// Law of `τ_it` on treated cells.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauSpec {
    Constant(f64),
    /// `base + slope · (t − T_i)`.
    Ramp { base: f64, slope: f64 },
}

impl TauSpec {
    fn at(self, exposure: usize) -> f64 {
        match self {
            Self::Constant(c) => c,
            Self::Ramp { base, slope } => base + slope * exposure as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PanelSimConfig {
    pub n_units: usize,
    pub n_times: usize,
    pub k: usize,
    pub beta_u: f64,
    pub tau: TauSpec,
    /// Inclusive range of uniform start times; starts at or beyond `T`
    /// leave the unit untreated. `None` makes every unit a control.
    pub start_range: Option<(usize, usize)>,
    /// The first `never_treated` units receive no start.
    pub never_treated: usize,
}

impl Default for PanelSimConfig {
    fn default() -> Self {
        Self { n_units: 30, n_times: 100, k: 2, beta_u: 0.0, tau: TauSpec::Constant(1.0), start_range: Some((40, 95)), never_treated: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PanelSim<T> {
    pub panel: PanelData<T>,
    /// `τ_it`, unit-major.
    pub true_tau: Vec<T>,
    /// Untreated potential outcomes `Y_it(0) = Y_it − τ_it D_it`, unit-major.
    pub y0: Vec<T>,
    pub beta_u: T,
    pub true_k: usize,
    pub u: Vec<T>,
    pub loadings: Vec<T>,
    pub factors: Vec<T>,
}

impl<T: Real> PanelSim<T> {
    pub fn tau(&self, unit: usize, time: usize) -> T {
        self.true_tau[unit * self.panel.n_times() + time]
    }

    pub fn untreated(&self, unit: usize, time: usize) -> T {
        self.y0[unit * self.panel.n_times() + time]
    }

    /// Panel whose outcomes are the untreated potential outcomes everywhere.
    pub fn oracle_untreated_panel(&self) -> Result<PanelData<T>> {
        let t = self.panel.n_times();
        let rows = (0..self.panel.n_units()).map(|i| (0..t).map(|s| Some(self.untreated(i, s))).collect()).collect();
        PanelData::new(self.panel.unit_ids().to_vec(), self.panel.time_ids().to_vec(), rows, self.panel.treatment_start().to_vec())
    }
}

/// `y_it = τ_it D_it + λ_iᵀ f_t + β_U U_it (1 − D_it) + ε_it` with
/// `λ_i, f_t ~ N_K(0, I)`, `U_it = |X_it|/√(1 − 2/π)`, `X_it, ε_it ~ N(0, 1)`.
///
/// Randomness is consumed in a fixed order (loadings, factors, starts, X,
/// ε), so two configurations differing only in `β_U` share every draw.
pub fn simulate_panel<T: Real>(cfg: &PanelSimConfig, seed: u64) -> Result<PanelSim<T>> {
    let (n, nt, k) = (cfg.n_units, cfg.n_times, cfg.k);
    if n < 2 || nt < 2 {
        return Err(Error::InvalidArgument(format!("need N ≥ 2 and T ≥ 2, got {n}×{nt}")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    if cfg.never_treated > n {
        return Err(Error::InvalidArgument("never_treated exceeds N".into()));
    }
    if let Some((lo, hi)) = cfg.start_range {
        if lo == 0 || lo > hi {
            return Err(Error::InvalidArgument(format!("start range ({lo}, {hi}) must satisfy 1 ≤ lo ≤ hi")));
        }
    }
    if !cfg.beta_u.is_finite() {
        return Err(Error::NonFinite("beta_u".into()));
    }
    let mut rng = stream(seed, "sim-panel", 0);
    let lam: Vec<f64> = (0..n * k).map(|_| f64::sample_std_normal(&mut rng)).collect();
    let fac: Vec<f64> = (0..nt * k).map(|_| f64::sample_std_normal(&mut rng)).collect();
    let starts: Vec<Option<usize>> = (0..n)
        .map(|i| {
            let s = cfg.start_range.map(|(lo, hi)| rng.random_range(lo..=hi));
            if i < cfg.never_treated {
                None
            } else {
                s.filter(|&s| s < nt)
            }
        })
        .collect();
    let sd = abs_normal_sd();
    let u: Vec<f64> = (0..n * nt).map(|_| f64::sample_std_normal(&mut rng).abs() / sd).collect();
    let eps: Vec<f64> = (0..n * nt).map(|_| f64::sample_std_normal(&mut rng)).collect();

    let mut y = vec![Vec::with_capacity(nt); n];
    let mut tau = vec![0.0; n * nt];
    let mut y0 = vec![0.0; n * nt];
    for i in 0..n {
        for t in 0..nt {
            let j = i * nt + t;
            let treated = starts[i].is_some_and(|s| t >= s);
            let common: f64 = (0..k).map(|a| lam[i * k + a] * fac[t * k + a]).sum::<f64>() + eps[j];
            let untreated = if treated { common } else { common + cfg.beta_u * u[j] };
            if treated {
                tau[j] = cfg.tau.at(t - starts[i].expect("treated"));
            }
            y0[j] = untreated;
            y[i].push(Some(T::lit(untreated + tau[j])));
        }
    }
    let panel = PanelData::new(
        (0..n).map(|i| format!("unit{i:03}")).collect(),
        (0..nt).map(|t| format!("{t}")).collect(),
        y,
        starts,
    )?;
    let cast = |v: Vec<f64>| v.into_iter().map(T::lit).collect();
    Ok(PanelSim {
        panel,
        true_tau: cast(tau),
        y0: cast(y0),
        beta_u: T::lit(cfg.beta_u),
        true_k: k,
        u: cast(u),
        loadings: cast(lam),
        factors: cast(fac),
    })
}
