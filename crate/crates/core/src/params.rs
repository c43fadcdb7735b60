//! Physical and dimensionless parameters.
//!
//! [`SimParams`] is the single source of truth for every coefficient in the
//! flow equations and the wall law. Derived groups (`beta`, `friction_ratio`)
//! are methods so they can never go stale.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Dimensional inputs, assumed to be in one consistent unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Kinematic viscosity.
    pub nu: f64,
    /// Thermal energy k_B T.
    pub kb_t: f64,
    /// Polymer length scale.
    pub r: f64,
    /// Grafted number density.
    pub n_p: f64,
    /// Dimensionless spring constant.
    pub h: f64,
    /// Bead friction coefficient.
    pub zeta: f64,
    /// Solvent mass density.
    pub rho: f64,
    /// Bead width.
    pub a: f64,
    /// Characteristic velocity.
    pub v: f64,
    /// Characteristic length.
    pub l: f64,
    /// When set, `zeta` is tied to `6 pi rho nu a`.
    pub stokes_einstein: bool,
}

impl PhysicalParams {
    /// Builds a parameter set with `zeta` computed from the Stokes-Einstein relation.
    #[allow(clippy::too_many_arguments)]
    pub fn with_stokes_einstein(
        nu: f64,
        kb_t: f64,
        r: f64,
        n_p: f64,
        h: f64,
        rho: f64,
        a: f64,
        v: f64,
        l: f64,
    ) -> Result<Self> {
        let p = Self {
            nu,
            kb_t,
            r,
            n_p,
            h,
            zeta: stokes_einstein_zeta(rho, nu, a),
            rho,
            a,
            v,
            l,
            stokes_einstein: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("nu", self.nu),
            ("kb_t", self.kb_t),
            ("r", self.r),
            ("n_p", self.n_p),
            ("h", self.h),
            ("zeta", self.zeta),
            ("rho", self.rho),
            ("a", self.a),
            ("v", self.v),
            ("l", self.l),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.stokes_einstein {
            let expected = stokes_einstein_zeta(self.rho, self.nu, self.a);
            if ((self.zeta - expected) / expected).abs() > 1e-12 {
                return Err(Error::ParameterDomain(format!(
                    "zeta = {} violates Stokes-Einstein value {expected}",
                    self.zeta
                )));
            }
        }
        Ok(())
    }

    /// Polymer relaxation time `zeta R^2 / (4 H k_B T)`.
    pub fn relaxation_time(&self) -> f64 {
        self.zeta * self.r * self.r / (4.0 * self.h * self.kb_t)
    }

    /// Solvent dynamic viscosity.
    pub fn mu_s(&self) -> f64 {
        self.rho * self.nu
    }

    /// Polymer dynamic viscosity.
    pub fn mu_p(&self) -> f64 {
        self.n_p * self.relaxation_time() * self.kb_t
    }
}

/// Three-dimensional Stokes-Einstein friction `6 pi rho nu a`.
pub fn stokes_einstein_zeta(rho: f64, nu: f64, a: f64) -> f64 {
    6.0 * PI * rho * nu * a
}

/// Dimensionless groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub re: f64,
    pub wi: f64,
    pub tau: f64,
    pub alpha: f64,
    pub kappa: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            re: 1000.0,
            wi: 1.0,
            tau: 1.0,
            alpha: 10.0,
            kappa: 0.0,
        }
    }
}

impl SimParams {
    pub fn new(re: f64, wi: f64, tau: f64, alpha: f64, kappa: f64) -> Result<Self> {
        let p = Self {
            re,
            wi,
            tau,
            alpha,
            kappa,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("re", self.re),
            ("wi", self.wi),
            ("tau", self.tau),
            ("alpha", self.alpha),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if !self.kappa.is_finite() || self.alpha <= 4.0 * self.kappa {
            return Err(Error::ParameterDomain(format!(
                "alpha = {} must exceed 4 kappa = {}",
                self.alpha,
                4.0 * self.kappa
            )));
        }
        Ok(())
    }

    /// `2 kappa - alpha / 2`.
    pub fn beta(&self) -> f64 {
        2.0 * self.kappa - 0.5 * self.alpha
    }

    /// `alpha Re Wi / tau`, the effective wall friction coefficient.
    pub fn friction_ratio(&self) -> f64 {
        self.alpha * self.re * self.wi / self.tau
    }

    /// Forcing coefficient `alpha Re / tau` of the boundary ODE.
    pub fn boundary_gain(&self) -> f64 {
        self.alpha * self.re / self.tau
    }

    /// Copy with `tau` chosen so that `friction_ratio` equals `target`.
    pub fn with_friction_ratio(&self, target: f64) -> Result<Self> {
        let mut p = *self;
        p.tau = self.alpha * self.re * self.wi / target;
        p.validate()?;
        Ok(p)
    }
}

/// Maps dimensional inputs to the dimensionless groups.
pub fn derive_sim_params(p: &PhysicalParams) -> Result<SimParams> {
    p.validate()?;
    let lambda = p.relaxation_time();
    SimParams::new(
        p.v * p.l / p.nu,
        lambda * p.v / p.l,
        p.rho * p.v * p.v / (p.kb_t * p.n_p),
        p.l / p.r,
        0.0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    VaryV,
    VaryNu,
    VaryRWithNu,
}

impl ScalingMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "vary_V" | "vary_v" => Ok(Self::VaryV),
            "vary_nu" => Ok(Self::VaryNu),
            "vary_R_with_nu" | "vary_r_with_nu" => Ok(Self::VaryRWithNu),
            other => Err(Error::Input(format!("unknown scaling mode '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::VaryV => "vary_V",
            Self::VaryNu => "vary_nu",
            Self::VaryRWithNu => "vary_R_with_nu",
        }
    }
}

/// How the physical inputs move as Re is swept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingScenario {
    pub mode: ScalingMode,
    /// Shrink exponent: `R ~ Re^(-gamma)`.
    pub gamma: f64,
    /// Bead-width exponent: `a ~ R^beta_exp`.
    pub beta_exp: f64,
}

impl Default for ScalingScenario {
    fn default() -> Self {
        Self {
            mode: ScalingMode::VaryNu,
            gamma: 0.0,
            beta_exp: 1.0,
        }
    }
}

impl ScalingScenario {
    pub fn validate(&self) -> Result<()> {
        if self.mode == ScalingMode::VaryRWithNu
            && (!(0.0..=1.0).contains(&self.gamma) || !(self.beta_exp >= 1.0))
        {
            return Err(Error::ParameterDomain(format!(
                "vary_R_with_nu needs gamma in [0, 1] and beta_exp >= 1, got {} and {}",
                self.gamma, self.beta_exp
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub re: f64,
    pub alpha: f64,
    pub friction_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Fitted exponent of alpha against Re (0 for a single row).
    pub alpha_order: f64,
    /// Fitted exponent of friction_ratio against Re.
    pub friction_order: f64,
    pub warning: Option<String>,
}

/// Reference dimensional set: every input 1 and `H = 1/4`, so all groups are 1.
pub fn unit_physical_params() -> PhysicalParams {
    PhysicalParams {
        nu: 1.0,
        kb_t: 1.0,
        r: 1.0,
        n_p: 1.0,
        h: 0.25,
        zeta: 1.0,
        rho: 1.0,
        a: 1.0,
        v: 1.0,
        l: 1.0,
        stokes_einstein: false,
    }
}

/// Evaluates `(Re, alpha, friction_ratio)` along a scaling path anchored at `base`.
///
/// `vary_V` moves the velocity, `vary_nu` the viscosity (with `zeta` following
/// Stokes-Einstein when `base` enforces it), and `vary_R_with_nu` additionally
/// shrinks `R ~ (Re/Re_0)^(-gamma)` with `N_P ~ 1/R` and `a ~ R^beta_exp`.
pub fn classify_scaling(
    base: &PhysicalParams,
    s: &ScalingScenario,
    re_values: &[f64],
) -> Result<ScalingReport> {
    base.validate()?;
    s.validate()?;
    if re_values.is_empty() {
        return Err(Error::Input("no Re values".into()));
    }
    if re_values.windows(2).any(|w| w[1] <= w[0]) || re_values[0] <= 0.0 {
        return Err(Error::Input("Re values must be positive and increasing".into()));
    }
    let re0 = base.v * base.l / base.nu;
    let mut rows = Vec::with_capacity(re_values.len());
    for &re in re_values {
        let mut p = *base;
        match s.mode {
            ScalingMode::VaryV => p.v = re * base.nu / base.l,
            ScalingMode::VaryNu | ScalingMode::VaryRWithNu => {
                p.nu = base.v * base.l / re;
                if s.mode == ScalingMode::VaryRWithNu {
                    let shrink = (re / re0).powf(-s.gamma);
                    p.r = base.r * shrink;
                    p.n_p = base.n_p / shrink;
                    p.a = base.a * shrink.powf(s.beta_exp);
                }
                if p.stokes_einstein {
                    p.zeta = stokes_einstein_zeta(p.rho, p.nu, p.a);
                }
            }
        }
        let sim = derive_sim_params(&p)?;
        rows.push(ScalingRow {
            re: sim.re,
            alpha: sim.alpha,
            friction_ratio: sim.friction_ratio(),
        });
    }
    let log_re: Vec<f64> = rows.iter().map(|r| r.re.ln()).collect();
    let alpha_order = log_slope(&log_re, rows.iter().map(|r| r.alpha.ln()));
    let friction_order = log_slope(&log_re, rows.iter().map(|r| r.friction_ratio.ln()));
    let warning = (s.mode == ScalingMode::VaryRWithNu && s.gamma == 1.0)
        .then(|| "critical: parallel to critical Navier-slip".to_string());
    Ok(ScalingReport {
        rows,
        alpha_order,
        friction_order,
        warning,
    })
}

fn log_slope(x: &[f64], y: impl Iterator<Item = f64>) -> f64 {
    let y: Vec<f64> = y.collect();
    if x.len() < 2 {
        return 0.0;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Parameter-level configuration: the dimensionless groups plus sweep scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamsConfig {
    pub sim: SimParams,
    pub stokes_einstein: bool,
    pub scenario: ScalingScenario,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            sim: SimParams::default(),
            stokes_einstein: true,
            scenario: ScalingScenario::default(),
        }
    }
}

impl ParamsConfig {
    pub const KEYS: [&'static str; 9] = [
        "re",
        "wi",
        "tau",
        "alpha",
        "kappa",
        "stokes_einstein",
        "scaling_mode",
        "gamma",
        "beta_exp",
    ];

    /// Applies one `key = value` pair. Returns `Ok(false)` for keys this
    /// section does not own.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "re" => self.sim.re = parse_f64(key, value)?,
            "wi" => self.sim.wi = parse_f64(key, value)?,
            "tau" => self.sim.tau = parse_f64(key, value)?,
            "alpha" => self.sim.alpha = parse_f64(key, value)?,
            "kappa" => self.sim.kappa = parse_f64(key, value)?,
            "stokes_einstein" => self.stokes_einstein = parse_bool(key, value)?,
            "scaling_mode" => self.scenario.mode = ScalingMode::parse(value)?,
            "gamma" => self.scenario.gamma = parse_f64(key, value)?,
            "beta_exp" => self.scenario.beta_exp = parse_f64(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.scenario.validate()
    }

    /// Parses a stand-alone parameter file; unknown keys are rejected.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, key, value) in kv_lines(text)? {
            if !cfg.set_key(key, value)? {
                return Err(Error::Input(format!("line {lineno}: unknown key '{key}'")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Splits `key=value` text into trimmed pairs with 1-based line numbers.
/// Blank lines and `#` comments are skipped.
pub fn kv_lines(text: &str) -> Result<Vec<(usize, &str, &str)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("line {}: expected key=value", i + 1)))?;
        out.push((i + 1, k.trim(), v.trim()));
    }
    Ok(out)
}

pub fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Input(format!("{key}: expected a number, got '{value}'")))
}

pub fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(Error::Input(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn unit_inputs_give_unit_groups() {
        let sim = derive_sim_params(&unit_physical_params()).unwrap();
        assert_eq!(unit_physical_params().relaxation_time(), 1.0);
        assert_eq!((sim.re, sim.wi, sim.tau, sim.alpha), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn viscosity_ratio_identity() {
        let p = PhysicalParams {
            nu: 1.3e-6,
            kb_t: 4.1e-21,
            r: 2.0e-8,
            n_p: 3.0e14,
            h: 0.7,
            zeta: 2.2e-11,
            rho: 998.0,
            a: 1.1e-9,
            v: 0.8,
            l: 0.05,
            stokes_einstein: false,
        };
        let s = derive_sim_params(&p).unwrap();
        let lhs = s.alpha * s.re / s.tau;
        let rhs = s.alpha / s.wi * p.mu_p() / p.mu_s();
        assert!(rel(lhs, rhs) < 1e-12);
    }

    #[test]
    fn doubling_velocity_keeps_friction_ratio() {
        let p = unit_physical_params();
        let mut q = p;
        q.v *= 2.0;
        let (a, b) = (derive_sim_params(&p).unwrap(), derive_sim_params(&q).unwrap());
        // Re ~ V, Wi ~ V, tau ~ V^2.
        assert_eq!(b.re, 2.0 * a.re);
        assert_eq!(b.wi, 2.0 * a.wi);
        assert_eq!(b.tau, 4.0 * a.tau);
        assert!(rel(b.friction_ratio(), a.friction_ratio()) < 1e-14);
    }

    #[test]
    fn halving_viscosity_with_stokes_einstein() {
        let p = PhysicalParams::with_stokes_einstein(0.3, 1.0, 0.5, 2.0, 0.25, 1.0, 0.1, 1.0, 1.0)
            .unwrap();
        let q = PhysicalParams::with_stokes_einstein(0.15, 1.0, 0.5, 2.0, 0.25, 1.0, 0.1, 1.0, 1.0)
            .unwrap();
        let (a, b) = (derive_sim_params(&p).unwrap(), derive_sim_params(&q).unwrap());
        assert!(rel(b.re, 2.0 * a.re) < 1e-14);
        assert!(rel(q.mu_p() / q.mu_s(), p.mu_p() / p.mu_s()) < 1e-14);
        assert!(rel(b.friction_ratio(), a.friction_ratio()) < 1e-14);
    }

    #[test]
    fn rejects_nonpositive_and_broken_stokes_einstein() {
        let mut p = unit_physical_params();
        p.nu = 0.0;
        assert!(derive_sim_params(&p).is_err());
        let mut q = unit_physical_params();
        q.stokes_einstein = true;
        assert!(q.validate().is_err());
    }

    #[test]
    fn alpha_must_exceed_four_kappa() {
        assert!(SimParams::new(1.0, 1.0, 1.0, 2.0, 1.0).is_err());
        assert!(SimParams::new(1.0, 1.0, 1.0, 4.0, 1.0).is_err());
        let p = SimParams::new(1.0, 1.0, 1.0, 10.0, 1.0).unwrap();
        assert_eq!(p.beta(), -3.0);
    }

    #[test]
    fn classify_modes() {
        let base = PhysicalParams::with_stokes_einstein(0.01, 1.0, 0.2, 5.0, 0.25, 1.0, 0.05, 1.0, 1.0)
            .unwrap();
        for mode in [ScalingMode::VaryV, ScalingMode::VaryNu] {
            let s = ScalingScenario {
                mode,
                ..Default::default()
            };
            let rep = classify_scaling(&base, &s, &[100.0, 1000.0]).unwrap();
            assert!(rel(rep.rows[1].re, 1000.0) < 1e-12);
            assert!(rel(rep.rows[0].alpha, rep.rows[1].alpha) < 1e-14);
            assert!(rel(rep.rows[0].friction_ratio, rep.rows[1].friction_ratio) < 1e-14);
            assert!(rep.warning.is_none());
        }
        let nu_rows = classify_scaling(
            &base,
            &ScalingScenario {
                mode: ScalingMode::VaryNu,
                ..Default::default()
            },
            &[100.0, 1000.0],
        )
        .unwrap();
        let r_rows = classify_scaling(
            &base,
            &ScalingScenario {
                mode: ScalingMode::VaryRWithNu,
                gamma: 0.0,
                beta_exp: 1.0,
            },
            &[100.0, 1000.0],
        )
        .unwrap();
        assert_eq!(nu_rows.rows, r_rows.rows);

        let s = ScalingScenario {
            mode: ScalingMode::VaryRWithNu,
            gamma: 0.5,
            beta_exp: 2.0,
        };
        let rep = classify_scaling(&base, &s, &[100.0, 400.0, 1600.0]).unwrap();
        assert!((rep.alpha_order - 0.5).abs() < 1e-10);
        // friction_ratio ~ R^beta_exp ~ Re^(-beta_exp gamma) in two dimensions
        assert!((rep.friction_order + 1.0).abs() < 1e-10);

        let crit = ScalingScenario {
            mode: ScalingMode::VaryRWithNu,
            gamma: 1.0,
            beta_exp: 1.0,
        };
        let rep = classify_scaling(&base, &crit, &[100.0, 200.0]).unwrap();
        assert!(rep.warning.unwrap().contains("critical"));
    }

    #[test]
    fn config_keys() {
        let cfg = ParamsConfig::from_kv_text("# comment\nre = 250\nalpha=20 # trailing\n").unwrap();
        assert_eq!(cfg.sim.re, 250.0);
        assert_eq!(cfg.sim.alpha, 20.0);
        let err = ParamsConfig::from_kv_text("re=1\nbogus=2\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
        assert!(ParamsConfig::from_kv_text("alpha=2\nkappa=1\n").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn velocity_map_keeps_alpha_and_friction(scale in 0.01f64..100.0, nu in 1e-4f64..1.0, r in 1e-3f64..1.0) {
                let mut p = unit_physical_params();
                p.nu = nu;
                p.r = r;
                let mut q = p;
                q.v *= scale;
                let (a, b) = (derive_sim_params(&p).unwrap(), derive_sim_params(&q).unwrap());
                prop_assert!(rel(b.alpha, a.alpha) <= 1e-14);
                prop_assert!(rel(b.friction_ratio(), a.friction_ratio()) <= 1e-14);
            }

            #[test]
            fn viscosity_map_keeps_alpha_and_friction(scale in 0.01f64..100.0, nu in 1e-4f64..1.0) {
                let p = PhysicalParams::with_stokes_einstein(nu, 1.0, 0.3, 2.0, 0.25, 1.0, 0.02, 1.0, 1.0).unwrap();
                let q = PhysicalParams::with_stokes_einstein(nu * scale, 1.0, 0.3, 2.0, 0.25, 1.0, 0.02, 1.0, 1.0).unwrap();
                let (a, b) = (derive_sim_params(&p).unwrap(), derive_sim_params(&q).unwrap());
                prop_assert!(rel(b.alpha, a.alpha) <= 1e-14);
                prop_assert!(rel(b.friction_ratio(), a.friction_ratio()) <= 1e-14);
            }
        }
    }
}
