//! Physical parameters of the coupled laser pair and their semiclassical
//! steady state.
//!
//! Time is measured in units of 1/kappa by default (kappa = 1), so every
//! rate is a dimensionless multiple of the 2-laser mode width; all spectra
//! depend only on rate ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances;

/// Microscopic three-level-medium parameters, used to derive the coherent
/// excitation rate kappa0 = gamma2_tilde * (g13/g12)^2 * N_tilde / n_tilde.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroParams {
    /// Incoherent excitation rate on the lasing recycling transition.
    pub gamma2_tilde: f64,
    /// Spontaneous decay rate of the upper lasing state.
    pub gamma1_tilde: f64,
    /// Dipole coupling constant on the pumped (1-3) transition.
    pub g13_tilde: f64,
    /// Dipole coupling constant on the lasing (1-2) transition.
    pub g12_tilde: f64,
    /// Number of three-level atoms.
    #[serde(rename = "N_tilde")]
    pub atom_count: f64,
    /// Mean intracavity photon number of the three-level laser.
    pub n_tilde: f64,
}

/// All physical rates and statistical parameters of the coupled pair.
///
/// `p` is not stored: it is always `-2 * xi` and available via
/// [`LaserParams::p`], which keeps the pair consistent by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    /// Spectral mode width of the 2-laser cavity.
    pub kappa: f64,
    /// Spectral mode width of the 3-laser cavity.
    pub kappa_tilde: f64,
    /// Mean coherent-excitation rate of the three-level medium.
    pub kappa0: f64,
    /// Mandel pump parameter of the 2-laser.
    pub xi: f64,
    /// Mean incoherent pump rate R of the 2-laser.
    pub pump_rate: f64,
    /// Feedback strength (0 disables the feedback loop).
    #[serde(default)]
    pub lambda_fb: f64,
    /// Optional microscopic record behind kappa0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub micro: Option<MicroParams>,
}

/// Classification of the pump statistics by the Mandel parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PumpClass {
    Poissonian,
    SubPoissonian,
    SuperPoissonian,
}

impl std::fmt::Display for PumpClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PumpClass::Poissonian => write!(f, "Poissonian"),
            PumpClass::SubPoissonian => write!(f, "sub-Poissonian"),
            PumpClass::SuperPoissonian => write!(f, "super-Poissonian"),
        }
    }
}

impl LaserParams {
    /// Parameters without feedback or microscopic record.
    pub fn new(kappa: f64, kappa_tilde: f64, kappa0: f64, xi: f64, pump_rate: f64) -> Self {
        LaserParams {
            kappa,
            kappa_tilde,
            kappa0,
            xi,
            pump_rate,
            lambda_fb: 0.0,
            micro: None,
        }
    }

    pub fn with_feedback(mut self, lambda_fb: f64) -> Self {
        self.lambda_fb = lambda_fb;
        self
    }

    pub fn with_micro(mut self, micro: MicroParams) -> Self {
        self.micro = Some(micro);
        self
    }

    /// Pump-statistics parameter, p = -2 xi.
    pub fn p(&self) -> f64 {
        -2.0 * self.xi
    }

    pub fn pump_class(&self) -> PumpClass {
        classify_xi(self.xi)
    }

    /// Checks all hard constraints; returns the soft-warning list on success.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.validate_with(tolerances::MICRO_GAMMA_RATIO_MAX)
    }

    /// Like [`validate`](Self::validate) with a caller-chosen bound on
    /// gamma2_tilde / gamma1_tilde.
    pub fn validate_with(&self, max_gamma_ratio: f64) -> Result<Vec<String>> {
        let finite = [
            self.kappa,
            self.kappa_tilde,
            self.kappa0,
            self.xi,
            self.pump_rate,
            self.lambda_fb,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParams(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if self.kappa_tilde < 0.0 {
            return Err(Error::InvalidParams(format!(
                "kappa_tilde must be >= 0, got {}",
                self.kappa_tilde
            )));
        }
        if self.kappa0 < 0.0 {
            return Err(Error::InvalidParams(format!("kappa0 must be >= 0, got {}", self.kappa0)));
        }
        if self.pump_rate <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "pump_rate must be > 0, got {}",
                self.pump_rate
            )));
        }
        if self.lambda_fb < 0.0 {
            return Err(Error::InvalidParams(format!(
                "lambda_fb must be >= 0, got {}",
                self.lambda_fb
            )));
        }

        let mut warnings = Vec::new();
        // Pump statistics admit p < 1 (xi > -1/2); the perfectly regular
        // pump p = 1 is the physical boundary and is let through noisily.
        if self.xi < -0.5 {
            return Err(Error::OutOfRange(format!(
                "xi must be >= -1/2 (p <= 1), got xi = {}",
                self.xi
            )));
        }
        if self.xi == -0.5 {
            warnings.push("xi = -1/2 (p = 1): perfectly regular pump boundary".into());
        }

        if let Some(micro) = &self.micro {
            let micro_fields = [
                micro.gamma2_tilde,
                micro.gamma1_tilde,
                micro.g13_tilde,
                micro.g12_tilde,
                micro.atom_count,
                micro.n_tilde,
            ];
            if micro_fields.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(Error::InvalidParams("micro parameters must be positive".into()));
            }
            let ratio = micro.gamma2_tilde / micro.gamma1_tilde;
            if ratio > max_gamma_ratio {
                return Err(Error::InvalidParams(format!(
                    "gamma2_tilde/gamma1_tilde = {ratio:.3} exceeds {max_gamma_ratio} \
                     (the adiabatic regime requires gamma2_tilde << gamma1_tilde)"
                )));
            }
        }

        Ok(warnings)
    }
}

/// Semiclassical steady state of the pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    /// Mean intracavity photon number of the 2-laser.
    pub n: f64,
    /// Mean intracavity photon number of the 3-laser.
    pub n_tilde: f64,
    /// Mean photocurrent of the 2-laser channel, kappa * n.
    pub i_bar: f64,
    /// Mean photocurrent of the 3-laser channel, kappa_tilde * n_tilde.
    pub i_tilde_bar: f64,
}

impl SteadyState {
    /// Soft validity notes: the linearized model needs large photon numbers.
    pub fn validity_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.n < tolerances::PHOTON_NUMBER_WARN {
            w.push(format!("n = {:.3} < {}: linearization marginal", self.n, tolerances::PHOTON_NUMBER_WARN));
        }
        if self.n_tilde > 0.0 && self.n_tilde < tolerances::PHOTON_NUMBER_WARN {
            w.push(format!(
                "n_tilde = {:.3} < {}: linearization marginal",
                self.n_tilde,
                tolerances::PHOTON_NUMBER_WARN
            ));
        }
        w
    }
}

/// Solves the photon-number balance: kappa_tilde * n_tilde = kappa0 * n and
/// (kappa + kappa0) * n = R.
pub fn steady_state(params: &LaserParams) -> Result<SteadyState> {
    params.validate()?;
    let denom = params.kappa + params.kappa0;
    if denom <= 0.0 {
        return Err(Error::InvalidParams("kappa + kappa0 must be > 0".into()));
    }
    let n = params.pump_rate / denom;
    let n_tilde = if params.kappa_tilde > 0.0 {
        params.kappa0 * n / params.kappa_tilde
    } else if params.kappa0 == 0.0 {
        0.0
    } else {
        return Err(Error::InconsistentSteadyState(
            "kappa_tilde = 0 with kappa0 > 0 leaves no finite n_tilde balancing kappa0 * n".into(),
        ));
    };
    Ok(SteadyState {
        n,
        n_tilde,
        i_bar: params.kappa * n,
        i_tilde_bar: params.kappa_tilde * n_tilde,
    })
}

/// Coherent excitation rate from the microscopic record:
/// gamma2_tilde * (g13/g12)^2 * N_tilde / n_tilde.
pub fn kappa0_from_micro(micro: &MicroParams) -> Result<f64> {
    let fields = [
        micro.gamma2_tilde,
        micro.gamma1_tilde,
        micro.g13_tilde,
        micro.g12_tilde,
        micro.atom_count,
    ];
    if fields.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidParams("micro parameters must be positive".into()));
    }
    if micro.n_tilde == 0.0 {
        return Err(Error::InvalidParams("n_tilde = 0: kappa0 diverges".into()));
    }
    if !micro.n_tilde.is_finite() || micro.n_tilde < 0.0 {
        return Err(Error::InvalidParams("n_tilde must be positive".into()));
    }
    let g_ratio = micro.g13_tilde / micro.g12_tilde;
    Ok(micro.gamma2_tilde * g_ratio * g_ratio * micro.atom_count / micro.n_tilde)
}

/// Maps the pump-statistics parameter p to the Mandel parameter xi = -p/2
/// and classifies it. The boundary p = 1 is accepted; p > 1 is rejected.
pub fn xi_from_pump(p: f64) -> Result<(f64, PumpClass)> {
    if !p.is_finite() {
        return Err(Error::OutOfRange("p must be finite".into()));
    }
    if p > 1.0 {
        return Err(Error::OutOfRange(format!("p must be <= 1, got {p}")));
    }
    let xi = -p / 2.0;
    Ok((xi, classify_xi(xi)))
}

fn classify_xi(xi: f64) -> PumpClass {
    if xi == 0.0 {
        PumpClass::Poissonian
    } else if xi < 0.0 {
        PumpClass::SubPoissonian
    } else {
        PumpClass::SuperPoissonian
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn steady_state_symmetric_point() {
        let p = LaserParams::new(1.0, 1.0, 1.0, 0.0, 10.0);
        let s = steady_state(&p).unwrap();
        assert_relative_eq!(s.n, 5.0);
        assert_relative_eq!(s.n_tilde, 5.0);
        assert_relative_eq!(s.i_bar, 5.0);
        assert_relative_eq!(s.i_tilde_bar, 5.0);
    }

    #[test]
    fn steady_state_isolated() {
        let p = LaserParams::new(1.0, 0.0, 0.0, 0.0, 10.0);
        let s = steady_state(&p).unwrap();
        assert_relative_eq!(s.n, 10.0);
        assert_relative_eq!(s.n_tilde, 0.0);
    }

    #[test]
    fn steady_state_strong_coupling() {
        let p = LaserParams::new(1.0, 1.0, 100.0, 0.0, 1000.0);
        let s = steady_state(&p).unwrap();
        assert_relative_eq!(s.n, 1000.0 / 101.0, max_relative = 1e-14);
        assert_relative_eq!(s.n_tilde, 100e3 / 101.0, max_relative = 1e-14);
    }

    #[test]
    fn steady_state_rejects_dark_three_level_cavity() {
        let p = LaserParams::new(1.0, 0.0, 1.0, 0.0, 10.0);
        assert!(matches!(steady_state(&p), Err(Error::InconsistentSteadyState(_))));
    }

    #[test]
    fn kappa0_micro_examples() {
        let m = MicroParams {
            gamma2_tilde: 1.0,
            gamma1_tilde: 100.0,
            g13_tilde: 1.0,
            g12_tilde: 1.0,
            atom_count: 100.0,
            n_tilde: 100.0,
        };
        assert_relative_eq!(kappa0_from_micro(&m).unwrap(), 1.0);

        let m = MicroParams { gamma2_tilde: 0.1, g13_tilde: 2.0, atom_count: 1000.0, ..m };
        assert_relative_eq!(kappa0_from_micro(&m).unwrap(), 4.0);

        let m = MicroParams {
            gamma2_tilde: 0.5,
            gamma1_tilde: 100.0,
            g13_tilde: 1.0,
            g12_tilde: 1.0,
            atom_count: 200.0,
            n_tilde: 400.0,
        };
        assert_relative_eq!(kappa0_from_micro(&m).unwrap(), 0.25);

        let m = MicroParams { n_tilde: 0.0, ..m };
        assert!(kappa0_from_micro(&m).is_err());
    }

    #[test]
    fn pump_parameter_mapping() {
        let (xi, class) = xi_from_pump(0.0).unwrap();
        assert_eq!(xi, 0.0);
        assert_eq!(class, PumpClass::Poissonian);

        let (xi, class) = xi_from_pump(1.0).unwrap();
        assert_relative_eq!(xi, -0.5);
        assert_eq!(class, PumpClass::SubPoissonian);

        let (xi, class) = xi_from_pump(-2.0).unwrap();
        assert_relative_eq!(xi, 1.0);
        assert_eq!(class, PumpClass::SuperPoissonian);

        assert!(xi_from_pump(1.5).is_err());
    }

    #[test]
    fn regular_pump_boundary_warns() {
        let p = LaserParams::new(1.0, 1.0, 1.0, -0.5, 10.0);
        let warnings = p.validate().unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("regular pump"));

        let p = LaserParams::new(1.0, 1.0, 1.0, -0.51, 10.0);
        assert!(matches!(p.validate(), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn micro_adiabatic_ratio_enforced() {
        let micro = MicroParams {
            gamma2_tilde: 1.0,
            gamma1_tilde: 2.0,
            g13_tilde: 1.0,
            g12_tilde: 1.0,
            atom_count: 10.0,
            n_tilde: 10.0,
        };
        let p = LaserParams::new(1.0, 1.0, 1.0, 0.0, 10.0).with_micro(micro.clone());
        assert!(p.validate().is_err());
        // Relaxing the bound admits the same record.
        assert!(p.validate_with(0.6).is_ok());
    }
}
