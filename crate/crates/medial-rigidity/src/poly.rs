//! Parameterized maps between Euclidean spaces with first and second
//! derivatives, either analytic (polynomials, closures with supplied
//! derivatives) or by central differences.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// First-derivative finite-difference step.
pub const FD_STEP1: f64 = 1e-5;
/// Second-derivative finite-difference step.
pub const FD_STEP2: f64 = 1e-4;

/// A smooth map between Euclidean spaces. `jacobian` and
/// `second_derivative` default to central differences; implementations with
/// analytic derivatives override them.
pub trait ParamMap {
    fn dom_dim(&self) -> usize;
    fn cod_dim(&self) -> usize;
    fn eval(&self, u: &DVector<f64>) -> DVector<f64>;

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.cod_dim(), self.dom_dim());
        for col in 0..self.dom_dim() {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[col] += FD_STEP1;
            dn[col] -= FD_STEP1;
            let d = (self.eval(&up) - self.eval(&dn)) / (2.0 * FD_STEP1);
            jac.set_column(col, &d);
        }
        jac
    }

    /// Symmetric bilinear second derivative d²f(a, b) evaluated by a mixed
    /// central-difference stencil and symmetrized.
    fn second_derivative(
        &self,
        u: &DVector<f64>,
        a: &DVector<f64>,
        b: &DVector<f64>,
    ) -> DVector<f64> {
        let h = FD_STEP2;
        let f = |s: f64, t: f64| self.eval(&(u + a * (s * h) + b * (t * h)));
        (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * h * h)
    }
}

/// A map defined by closures; derivatives are numeric unless a Jacobian
/// closure is supplied.
pub struct FnMap {
    dom: usize,
    cod: usize,
    f: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    #[allow(clippy::type_complexity)]
    jac: Option<Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>>,
}

impl FnMap {
    pub fn new<F>(dom: usize, cod: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        FnMap {
            dom,
            cod,
            f: Box::new(f),
            jac: None,
        }
    }

    pub fn with_jacobian<F, J>(dom: usize, cod: usize, f: F, jac: J) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        J: Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    {
        FnMap {
            dom,
            cod,
            f: Box::new(f),
            jac: Some(Box::new(jac)),
        }
    }
}

impl ParamMap for FnMap {
    fn dom_dim(&self) -> usize {
        self.dom
    }

    fn cod_dim(&self) -> usize {
        self.cod
    }

    fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.f)(u)
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        match &self.jac {
            Some(j) => j(u),
            None => {
                let mut jac = DMatrix::zeros(self.cod, self.dom);
                for col in 0..self.dom {
                    let mut up = u.clone();
                    let mut dn = u.clone();
                    up[col] += FD_STEP1;
                    dn[col] -= FD_STEP1;
                    let d = (self.eval(&up) - self.eval(&dn)) / (2.0 * FD_STEP1);
                    jac.set_column(col, &d);
                }
                jac
            }
        }
    }
}

/// One monomial term: coefficient times the product of domain variables
/// raised to `powers`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

/// Polynomial map given by per-output-coordinate term lists; derivatives are
/// analytic. Serializable as the on-disk patch/diffeo coefficient format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyMap {
    pub dom_dim: usize,
    /// Per output coordinate: a list of monomial terms.
    pub coordinates: Vec<Vec<PolyTerm>>,
    /// Optional domain box, one [lo, hi] pair per domain variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Vec<[f64; 2]>>,
}

impl PolyMap {
    pub fn validate(&self) -> Result<()> {
        if self.dom_dim == 0 || self.coordinates.is_empty() {
            return Err(Error::SchemaError(
                "polynomial map needs positive dimensions".into(),
            ));
        }
        for (i, coord) in self.coordinates.iter().enumerate() {
            for term in coord {
                if term.powers.len() != self.dom_dim {
                    return Err(Error::SchemaError(format!(
                        "coordinate {i}: term has {} exponents, domain dimension is {}",
                        term.powers.len(),
                        self.dom_dim
                    )));
                }
                if !term.coeff.is_finite() {
                    return Err(Error::SchemaError(format!(
                        "coordinate {i}: non-finite coefficient"
                    )));
                }
            }
        }
        if let Some(domain) = &self.domain {
            if domain.len() != self.dom_dim {
                return Err(Error::SchemaError(
                    "domain box length must match domain dimension".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: PolyMap = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }

    /// Affine map u -> A u + b as a degree-1 polynomial map.
    pub fn affine(a: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        let dom = a.ncols();
        let coordinates = (0..a.nrows())
            .map(|row| {
                let mut terms = vec![PolyTerm {
                    coeff: b[row],
                    powers: vec![0; dom],
                }];
                for col in 0..dom {
                    let mut powers = vec![0; dom];
                    powers[col] = 1;
                    terms.push(PolyTerm {
                        coeff: a[(row, col)],
                        powers,
                    });
                }
                terms
            })
            .collect();
        PolyMap {
            dom_dim: dom,
            coordinates,
            domain: None,
        }
    }

    fn eval_term(term: &PolyTerm, u: &DVector<f64>) -> f64 {
        term.coeff
            * term
                .powers
                .iter()
                .enumerate()
                .map(|(i, &p)| u[i].powi(p as i32))
                .product::<f64>()
    }

    /// Partial derivative of a term with respect to variable `var`.
    fn diff_term(term: &PolyTerm, var: usize) -> Option<PolyTerm> {
        if term.powers[var] == 0 {
            return None;
        }
        let mut powers = term.powers.clone();
        powers[var] -= 1;
        Some(PolyTerm {
            coeff: term.coeff * term.powers[var] as f64,
            powers,
        })
    }
}

impl ParamMap for PolyMap {
    fn dom_dim(&self) -> usize {
        self.dom_dim
    }

    fn cod_dim(&self) -> usize {
        self.coordinates.len()
    }

    fn eval(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.coordinates.len(),
            self.coordinates
                .iter()
                .map(|terms| terms.iter().map(|t| Self::eval_term(t, u)).sum()),
        )
    }

    fn jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.cod_dim(), self.dom_dim);
        for (row, terms) in self.coordinates.iter().enumerate() {
            for col in 0..self.dom_dim {
                jac[(row, col)] = terms
                    .iter()
                    .filter_map(|t| Self::diff_term(t, col))
                    .map(|t| Self::eval_term(&t, u))
                    .sum();
            }
        }
        jac
    }

    fn second_derivative(
        &self,
        u: &DVector<f64>,
        a: &DVector<f64>,
        b: &DVector<f64>,
    ) -> DVector<f64> {
        let mut out = DVector::zeros(self.cod_dim());
        for (row, terms) in self.coordinates.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..self.dom_dim {
                for j in 0..self.dom_dim {
                    let hij: f64 = terms
                        .iter()
                        .filter_map(|t| Self::diff_term(t, i))
                        .filter_map(|t| Self::diff_term(&t, j))
                        .map(|t| Self::eval_term(&t, u))
                        .sum();
                    acc += hij * a[i] * b[j];
                }
            }
            out[row] = acc;
        }
        out
    }
}
