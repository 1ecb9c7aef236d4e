//! Exact moments of the branching random walk and cumulants of its
//! occupation times.

mod brute;
mod cumulant;

pub use brute::{brute_force_mgf, DEFAULT_ENUMERATION_BUDGET};
pub use cumulant::{cumulant_final, cumulant_recursion, cumulant_recursion_iterated, cumulant_time_increment, nu_recursion, CumulantTable, DIVERGENCE_CEILING};

use crate::brw::OffspringLaw;
use crate::error::{Error, Result};
use crate::field::LatticeField;
use crate::grid::{compensated_sum, BoxGrid};
use crate::kernel::{convolve_field, green_convolve, KernelTable};
use crate::lattice::{Site, WalkSpec};
use serde::{Deserialize, Serialize};

/// Which generations an occupation time counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// `R_n = X_0 + ... + X_{n-1}`.
    #[serde(rename = "gen_0_to_n_minus_1")]
    Gen0ToNMinus1,
    /// `X_1 + ... + X_n`.
    #[serde(rename = "gen_1_to_n")]
    Gen1ToN,
}

/// Highest order kept in the expansion of `f(u) = log E u^Z` around `u = 1`.
pub const EXPANSION_ORDER: usize = 12;

/// Taylor coefficients `c_l = f^(l)(1) / l!` of the log generating function.
#[derive(Clone, Debug, PartialEq)]
pub struct LawExpansion {
    pub coeffs: Vec<f64>,
    pgf: Option<Vec<f64>>,
}

impl LawExpansion {
    pub fn new(law: &OffspringLaw) -> Result<LawExpansion> {
        match law {
            OffspringLaw::PoissonUnit => Ok(LawExpansion { coeffs: vec![0.0, 1.0], pgf: None }),
            OffspringLaw::Custom(q) => {
                law.validate()?;
                // g(v) = E (1 + v)^Z = sum_k b_k v^k, b_k = sum_j q_j C(j, k).
                let mut b = vec![0.0; EXPANSION_ORDER + 1];
                for (j, &p) in q.iter().enumerate() {
                    let mut binom = 1.0;
                    for (k, bk) in b.iter_mut().enumerate().take(j.min(EXPANSION_ORDER) + 1) {
                        *bk += p * binom;
                        binom *= (j - k) as f64 / (k + 1) as f64;
                    }
                }
                // (log g)' g = g'  =>  k L_k = k b_k - sum_{i<k} i L_i b_{k-i}.
                let mut l = vec![0.0; EXPANSION_ORDER + 1];
                for k in 1..=EXPANSION_ORDER {
                    let mut s = k as f64 * b[k];
                    for i in 1..k {
                        s -= i as f64 * l[i] * b[k - i];
                    }
                    l[k] = s / k as f64 / b[0];
                }
                Ok(LawExpansion { coeffs: l, pgf: Some(q.clone()) })
            }
            OffspringLaw::EnvelopeN(_) => Err(Error::Param(
                "cumulant recursions need i.i.d. placement (poisson_unit or a custom law)".into(),
            )),
        }
    }

    /// `sum_l c_l v^l`.
    pub fn apply(&self, v: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * v + c)
    }

    /// `log E (1 + v)^Z` computed directly, for custom laws.
    pub fn exact(&self, v: f64) -> Option<f64> {
        let q = self.pgf.as_ref()?;
        let u = 1.0 + v;
        Some(q.iter().rev().fold(0.0, |acc, &p| acc * u + p).ln())
    }

    pub fn linear(&self) -> f64 {
        self.coeffs.get(1).copied().unwrap_or(0.0)
    }
}

/// `(E X_n, E R_n) = (mu * P_n, mu * G_n)`.
pub fn mean_fields(mu: &LatticeField, table: &KernelTable, n: usize) -> Result<(BoxGrid, BoxGrid)> {
    let ex = convolve_field(mu, table.p(n)?);
    let er = green_convolve(table, mu, n)?;
    Ok((ex, er))
}

/// `E X_n(x)^2` for one ancestor at the origin.
///
/// For i.i.d. placement this is `P_n(x) + E[Z(Z-1)] sum_{i<n} sum_z P_i(z)
/// P_{n-i}(x-z)^2`. Under the envelope law the numbers sent to distinct
/// neighbours are independent, and the same-neighbour pairs lose a factor
/// `1 - 1/N`.
pub fn second_moment(x: Site, n: usize, law: &OffspringLaw, table: &KernelTable) -> Result<f64> {
    table.p(n)?;
    let d = table.d();
    let moves = WalkSpec { d }.moves();
    let nb = (2 * d + 1) as f64;
    let sq = |g: &BoxGrid, s: Site| {
        let v = g.at(s);
        v * v
    };
    let mut terms = vec![table.prob(n, x)];
    for i in 0..n {
        let pi = table.p(i)?;
        let pn = table.p(n - i)?;
        for (c, w) in pi.iter() {
            if w == 0.0 {
                continue;
            }
            let z = Site::new(c[0], c[1], c[2]);
            let y = x.offset(z.neg());
            let pair = match law {
                OffspringLaw::EnvelopeN(nv) => {
                    let prev = table.p(n - i - 1)?;
                    let same: f64 = moves.iter().map(|e| sq(prev, y.offset(Site::new(-e[0], -e[1], -e[2])))).sum();
                    sq(pn, y) - same / (*nv as f64 * nb * nb)
                }
                _ => law.factorial_moment2(d) * sq(pn, y),
            };
            terms.push(w * pair);
        }
    }
    Ok(compensated_sum(terms))
}

/// A grid as `{origin, extents, values}` restricted to the active axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridJson {
    pub origin: Vec<i32>,
    pub extents: Vec<usize>,
    pub values: Vec<f64>,
}

impl From<&BoxGrid> for GridJson {
    fn from(g: &BoxGrid) -> GridJson {
        GridJson { origin: g.lo[..g.d].to_vec(), extents: g.ext[..g.d].to_vec(), values: g.data.clone() }
    }
}

impl GridJson {
    pub fn to_grid(&self) -> Result<BoxGrid> {
        let d = self.origin.len();
        if !(2..=3).contains(&d) || self.extents.len() != d {
            return Err(Error::Param("grid json must have 2 or 3 axes".into()));
        }
        let mut lo = [0; 3];
        let mut ext = [1; 3];
        lo[..d].copy_from_slice(&self.origin);
        ext[..d].copy_from_slice(&self.extents);
        let mut g = BoxGrid::zeros(d, lo, ext);
        if g.data.len() != self.values.len() {
            return Err(Error::Param("grid json value count does not match extents".into()));
        }
        g.data.copy_from_slice(&self.values);
        Ok(g)
    }
}

/// One exact quantity, with enough metadata to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub quantity: String,
    pub d: usize,
    pub n: usize,
    pub convention: Option<Convention>,
    pub psi: Option<GridJson>,
    pub scalar: Option<f64>,
    pub grids: Vec<GridJson>,
}
