//! Catalogue of classical pairs with known asymptotics, and the fits used
//! to read exponents off numerically computed functions.

use serde::Serialize;

use super::derived::{
    kappa_of, normalize_assumption_a, rho_of, tilde_phi, zeta_of, GeneralizedYoungFn,
};
use super::{YoungFn, YoungLike};
use crate::error::{Error, Result};
use crate::numeric::{golden_max, least_squares, log_grid};

/// Which derived function a case describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Rho,
    Zeta,
    TildePhi,
    Kappa,
}

/// Shape of the asymptotic formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `x^a`
    Power,
    /// `x^a (ln x)^b`
    PowerLog,
    /// `exp(x^a)`
    StretchedExp,
}

/// Expected asymptotics: `x^exponent log^log_power x` or `exp(x^exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForm {
    pub kind: FitKind,
    pub exponent: f64,
    pub log_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseParams {
    pub p: f64,
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenCase {
    pub id: &'static str,
    pub target: Target,
    pub formula: &'static str,
    pub params: CaseParams,
}

const CASES: [(&str, Target, &str); 12] = [
    ("nu-1", Target::Rho, "phi=x^p, psi=x^r (r>p>=1): rho ~ x^(p(r-1)/(r-p))"),
    ("nu-2", Target::Rho, "phi=exp(x^alpha)-1, psi=exp(x^beta)-1 (beta>alpha): rho ~ exp(x^(alpha beta/(beta-alpha)))"),
    ("nu-3", Target::Rho, "phi=x^p, psi=exp(x^beta)-1: rho ~ x^p log^((p-1)/beta) x"),
    ("nu-4", Target::TildePhi, "psi=x^r, rho=x^p: phi ~ x^(rp/(r+p-1))"),
    ("nu-5", Target::TildePhi, "psi=exp(x^beta)-1, rho=exp(x^alpha)-1: phi ~ exp(x^(alpha beta/(alpha+beta)))"),
    ("nu-6", Target::TildePhi, "psi=exp(x^beta)-1, rho=x^p: phi ~ x^p / log^((p-1)/beta) x"),
    ("pi-1", Target::Zeta, "phi=x^p, psi=x^r (r>p+1): zeta ~ x^(p(r-1)/(r-p-1))"),
    ("pi-2", Target::Zeta, "phi=exp(x^alpha)-1, psi=exp(x^beta)-1 (beta>alpha): zeta ~ exp(x^(alpha beta/(beta-alpha)))"),
    ("pi-3", Target::Zeta, "phi=x^p, psi=exp(x^beta)-1: zeta ~ x^p log^(p/beta) x"),
    ("pi-4", Target::Kappa, "psi=x^r, zeta=x^p: phi ~ x^((r-1)p/(r+p-1))"),
    ("pi-5", Target::Kappa, "psi=exp(x^beta)-1, zeta=exp(x^alpha)-1: phi ~ exp(x^(alpha beta/(alpha+beta)))"),
    ("pi-6", Target::Kappa, "psi=exp(x^beta)-1, zeta=x^p: phi ~ x^p / log^(p/beta) x"),
];

fn default_params(id: &str) -> CaseParams {
    let (p, r, alpha, beta) = match id {
        "nu-1" => (2.0, 4.0, 1.0, 1.0),
        "nu-2" | "pi-2" => (1.0, 1.0, 1.0, 2.0),
        "nu-3" | "pi-3" | "nu-6" | "pi-6" => (2.0, 1.0, 1.0, 1.0),
        "nu-4" => (2.0, 3.0, 1.0, 1.0),
        "nu-5" | "pi-5" => (1.0, 1.0, 1.0, 1.0),
        "pi-1" => (2.0, 4.0, 1.0, 1.0),
        _ => (2.0, 4.0, 1.0, 1.0), // pi-4
    };
    CaseParams { p, r, alpha, beta }
}

/// The case with default parameters.
pub fn closed_form_lookup(case_id: &str) -> Result<GoldenCase> {
    let (id, target, formula) = CASES
        .iter()
        .find(|c| c.0 == case_id)
        .copied()
        .ok_or_else(|| Error::UnknownCase(case_id.to_string()))?;
    Ok(GoldenCase {
        id,
        target,
        formula,
        params: default_params(id),
    })
}

pub fn golden_cases() -> Vec<GoldenCase> {
    CASES
        .iter()
        .map(|c| closed_form_lookup(c.0).unwrap())
        .collect()
}

impl GoldenCase {
    pub fn with_params(mut self, params: CaseParams) -> GoldenCase {
        self.params = params;
        self
    }

    pub fn expected(&self) -> ClosedForm {
        let CaseParams {
            p,
            r,
            alpha: a,
            beta: b,
        } = self.params;
        let (kind, exponent, log_power) = match self.id {
            "nu-1" => (FitKind::Power, p * (r - 1.0) / (r - p), 0.0),
            "nu-2" | "pi-2" => (FitKind::StretchedExp, a * b / (b - a), 0.0),
            "nu-3" => (FitKind::PowerLog, p, (p - 1.0) / b),
            "nu-4" => (FitKind::Power, r * p / (r + p - 1.0), 0.0),
            "nu-5" | "pi-5" => (FitKind::StretchedExp, a * b / (a + b), 0.0),
            "nu-6" => (FitKind::PowerLog, p, -(p - 1.0) / b),
            "pi-1" => (FitKind::Power, p * (r - 1.0) / (r - p - 1.0), 0.0),
            "pi-3" => (FitKind::PowerLog, p, p / b),
            "pi-4" => (FitKind::Power, (r - 1.0) * p / (r + p - 1.0), 0.0),
            _ => (FitKind::PowerLog, p, -p / b), // pi-6
        };
        ClosedForm {
            kind,
            exponent,
            log_power,
        }
    }

    /// The two input Young functions, in the order named by the formula.
    /// Stretched exponentials in the `ψ` slot are normalized first.
    pub fn inputs(&self) -> Result<(YoungFn, YoungFn)> {
        let CaseParams { p, r, alpha, beta } = self.params;
        let norm = |f: YoungFn| normalize_assumption_a(&f).psi;
        Ok(match self.id {
            "nu-1" | "pi-1" => (YoungFn::power(p)?, YoungFn::power(r)?),
            "nu-2" | "pi-2" => (YoungFn::exp_power(alpha)?, norm(YoungFn::exp_power(beta)?)),
            "nu-3" | "pi-3" => (YoungFn::power(p)?, norm(YoungFn::exp_power(beta)?)),
            "nu-4" => (YoungFn::power(r)?, YoungFn::power(p)?),
            "nu-5" => (YoungFn::exp_power(beta)?, YoungFn::exp_power(alpha)?),
            "nu-6" => (YoungFn::exp_power(beta)?, YoungFn::power(p)?),
            "pi-4" => (YoungFn::power(r)?, YoungFn::power(p)?),
            "pi-5" => (norm(YoungFn::exp_power(beta)?), YoungFn::exp_power(alpha)?),
            _ => (norm(YoungFn::exp_power(beta)?), YoungFn::power(p)?),
        })
    }

    /// Computes the derived function numerically.
    pub fn compute(&self) -> Result<GeneralizedYoungFn> {
        let (a, b) = self.inputs()?;
        match self.target {
            Target::Rho => rho_of(&a, &b),
            Target::Zeta => zeta_of(&a, &b),
            Target::TildePhi => tilde_phi(&a, &b),
            Target::Kappa => Ok(GeneralizedYoungFn::Table(kappa_of(&b, &a)?.kappa)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FittedExponents {
    pub exponent: f64,
    /// Present for [`FitKind::PowerLog`] fits.
    pub log_power: Option<f64>,
    /// Root-mean-square residual of the fit in `ln f`.
    pub rms: f64,
}

/// Fits the asymptotic shape `kind` to `ln f` on `n` log-spaced points of
/// `[lo, hi]`.
///
/// Power: `ln f = a ln x + c`. PowerLog: `ln f = a ln x + b ln ln x + c`.
/// StretchedExp: `ln f = A x^a + b ln x + c`, with `a` found by golden
/// search on the residual and the rest by least squares, so polynomial
/// prefactors do not bias the exponent.
pub fn fit_exponents(
    f: &dyn YoungLike,
    kind: FitKind,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<FittedExponents> {
    let xs = log_grid(lo, hi, n);
    let ys: Vec<f64> = xs.iter().map(|&x| f.ln_value(x)).collect();
    if ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::Domain(
            "function is zero or infinite on the fit range".into(),
        ));
    }
    let rms = |design: &[Vec<f64>], coef: &[f64]| -> f64 {
        let ss: f64 = design
            .iter()
            .zip(&ys)
            .map(|(row, y)| {
                let pred: f64 = row.iter().zip(coef).map(|(a, b)| a * b).sum();
                (y - pred).powi(2)
            })
            .sum();
        (ss / ys.len() as f64).sqrt()
    };
    match kind {
        FitKind::Power => {
            let d: Vec<Vec<f64>> = xs.iter().map(|x| vec![x.ln(), 1.0]).collect();
            let c = least_squares(&d, &ys);
            Ok(FittedExponents {
                exponent: c[0],
                log_power: None,
                rms: rms(&d, &c),
            })
        }
        FitKind::PowerLog => {
            let d: Vec<Vec<f64>> = xs.iter().map(|x| vec![x.ln(), x.ln().ln(), 1.0]).collect();
            let c = least_squares(&d, &ys);
            Ok(FittedExponents {
                exponent: c[0],
                log_power: Some(c[1]),
                rms: rms(&d, &c),
            })
        }
        FitKind::StretchedExp => {
            let design = |a: f64| -> Vec<Vec<f64>> {
                xs.iter().map(|x| vec![x.powf(a), x.ln(), 1.0]).collect()
            };
            let neg_rms = |la: f64| {
                let d = design(la.exp());
                let c = least_squares(&d, &ys);
                -rms(&d, &c)
            };
            let (la, v) = golden_max(neg_rms, (0.05f64).ln(), (8.0f64).ln(), 1e-9);
            Ok(FittedExponents {
                exponent: la.exp(),
                log_power: None,
                rms: -v,
            })
        }
    }
}

/// Tolerance on fitted exponents.
pub const EXPONENT_TOL: f64 = 0.05;
/// Tolerance on fitted log powers.
pub const LOG_POWER_TOL: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenOutcome {
    pub case: GoldenCase,
    pub expected: ClosedForm,
    pub fitted: FittedExponents,
    pub exponent_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_power_error: Option<f64>,
    pub pass: bool,
}

/// Computes the case numerically and fits its expected shape on `n`
/// log-spaced points of `[lo, hi]`.
pub fn evaluate_case(case: &GoldenCase, lo: f64, hi: f64, n: usize) -> Result<GoldenOutcome> {
    let expected = case.expected();
    let f = case.compute()?;
    let fitted = fit_exponents(&f, expected.kind, lo, hi, n)?;
    let exponent_error = (fitted.exponent - expected.exponent).abs();
    let log_power_error = fitted.log_power.map(|b| (b - expected.log_power).abs());
    let pass = exponent_error <= EXPONENT_TOL && log_power_error.is_none_or(|e| e <= LOG_POWER_TOL);
    Ok(GoldenOutcome {
        case: case.clone(),
        expected,
        fitted,
        exponent_error,
        log_power_error,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        let c = closed_form_lookup("nu-3").unwrap();
        assert_eq!(c.target, Target::Rho);
        let e = c.expected();
        assert_eq!(
            (e.kind, e.exponent, e.log_power),
            (FitKind::PowerLog, 2.0, 1.0)
        );
        let e = closed_form_lookup("pi-3").unwrap().expected();
        assert_eq!(e.log_power, 2.0);
        let e = closed_form_lookup("pi-6").unwrap().expected();
        assert_eq!((e.exponent, e.log_power), (2.0, -2.0));
        assert!(matches!(
            closed_form_lookup("nu-9"),
            Err(Error::UnknownCase(_))
        ));
        assert_eq!(golden_cases().len(), 12);
    }

    #[test]
    fn fits_recover_synthetic_shapes() {
        let f = YoungFn::power_log(2.5, 1.5).unwrap();
        let r = fit_exponents(&f, FitKind::PowerLog, 1e3, 1e8, 60).unwrap();
        assert!(
            (r.exponent - 2.5).abs() < 0.05 && (r.log_power.unwrap() - 1.5).abs() < 0.15,
            "{r:?}"
        );
        let e = YoungFn::exp_power(0.5).unwrap();
        let r = fit_exponents(&e, FitKind::StretchedExp, 10.0, 1e3, 60).unwrap();
        assert!((r.exponent - 0.5).abs() < 0.01, "{r:?}");
        let r =
            fit_exponents(&YoungFn::power(3.0).unwrap(), FitKind::Power, 10.0, 1e3, 20).unwrap();
        assert!((r.exponent - 3.0).abs() < 1e-12);
    }
}
