use serde::Serialize;

use crate::automaton::Automaton;
use crate::spectral::{
    approx2_lengths, growth_rate, lem_approx2_tv, lem_tv_distance, limit_vectors, mu_measure, pi_measure, tau_measure,
    tau_tilde_measure, tv_distance, TransitionMatrix, DEFAULT_TOL,
};
use crate::stats::{geometric_ratio, power_law_exponent};
use crate::{Error, Result};

/// `‖τ_{np+r} − μ_{np+r}‖_TV` at one `(r, n)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemTvRow {
    pub r: usize,
    pub n: usize,
    pub tv: f64,
    /// Same distance from fully enumerated measures, when requested.
    pub tv_exhaustive: Option<f64>,
}

/// `‖π_{n′} − τ̃^c_{np}‖_TV` at one `(c, n)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Approx2Row {
    pub c: f64,
    pub n: usize,
    /// `⌊c ln n⌋`.
    pub l: usize,
    pub n_prime: usize,
    pub tv: f64,
    pub tv_exhaustive: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltSuiteReport {
    pub lambda: f64,
    pub p_common: usize,
    pub lem_tv: Vec<LemTvRow>,
    /// Fitted `θ` in `TV ≈ Cθⁿ`, per residue `r` (`None` if all zero).
    pub geometric_ratios: Vec<(usize, Option<f64>)>,
    pub approx2: Vec<Approx2Row>,
    /// Fitted `β` in `TV ≈ Cn^β`, per `c`.
    pub power_exponents: Vec<(f64, Option<f64>)>,
}

impl CltSuiteReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("lemma,r_or_c,n,l,n_prime,tv,tv_exhaustive\n");
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.12e}")).unwrap_or_default();
        for row in &self.lem_tv {
            out.push_str(&format!("tv,{},{},,,{:.12e},{}\n", row.r, row.n, row.tv, opt(row.tv_exhaustive)));
        }
        for row in &self.approx2 {
            out.push_str(&format!(
                "approx2,{},{},{},{},{:.12e},{}\n",
                row.c, row.n, row.l, row.n_prime, row.tv, opt(row.tv_exhaustive)
            ));
        }
        out
    }
}

/// Total-variation tables for the prefix comparison `τ` vs `μ` (each residue
/// `r < p`) and the endpoint comparison `π_{n′}` vs `τ̃^c` (each `c`).
///
/// Distances are computed by factoring through prefixes/endpoints; with
/// `exhaustive` the fully enumerated measures are compared as well and
/// supports that are too large are an error.
pub fn clt_comparison_suite(
    aut: &Automaton,
    n_list: &[usize],
    p_common: usize,
    c_list: &[f64],
    exhaustive: bool,
) -> Result<CltSuiteReport> {
    if p_common == 0 {
        return Err(Error::InvalidArgument("p must be positive".into()));
    }
    let a = TransitionMatrix::from_automaton(aut);
    let lambda = growth_rate(&a, DEFAULT_TOL)?;
    let lv = limit_vectors(&a, lambda, p_common, 1e-14)?;
    let mut lem_tv = Vec::new();
    let mut geometric_ratios = Vec::new();
    for r in 0..p_common {
        let mut ns = Vec::new();
        let mut tvs = Vec::new();
        for &n in n_list {
            let tv = lem_tv_distance(&a, &lv, n, r)?;
            let tv_exhaustive = if exhaustive {
                Some(tv_distance(&tau_measure(&a, n * p_common + r)?, &mu_measure(&a, &lv, n, r)?)?)
            } else {
                None
            };
            ns.push(n as f64);
            tvs.push(tv);
            lem_tv.push(LemTvRow { r, n, tv, tv_exhaustive });
        }
        geometric_ratios.push((r, geometric_ratio(&ns, &tvs).ok()));
    }
    let mut approx2 = Vec::new();
    let mut power_exponents = Vec::new();
    for &c in c_list {
        let mut ns = Vec::new();
        let mut tvs = Vec::new();
        for &n in n_list {
            let Some((l, n_prime)) = approx2_lengths(n, p_common, c) else { continue };
            let tv = lem_approx2_tv(&a, &lv, n, c).expect("lengths checked");
            let tv_exhaustive = if exhaustive {
                let tt = tau_tilde_measure(&a, &lv, n, c)?;
                Some(tv_distance(&pi_measure(&a, &lv, n_prime)?, &tt)?)
            } else {
                None
            };
            ns.push(n as f64);
            tvs.push(tv);
            approx2.push(Approx2Row { c, n, l, n_prime, tv, tv_exhaustive });
        }
        power_exponents.push((c, power_law_exponent(&ns, &tvs).ok()));
    }
    Ok(CltSuiteReport { lambda, p_common, lem_tv, geometric_ratios, approx2, power_exponents })
}
