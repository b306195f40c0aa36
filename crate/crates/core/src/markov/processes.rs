use serde::Serialize;

use super::{estimate_lambda_sigma, FiniteChain, MarkovMatrixProcess, StartLaw};
use crate::automaton::{Automaton, Label};
use crate::group::LinearRepresentation;
use crate::linalg::Matrix;
use crate::spectral::{
    edge_chain, growth_rate, maximal_components, parry_measure, scc_decomposition, ParryMeasure, TransitionMatrix,
    DEFAULT_TOL,
};
use crate::{Error, Result};

/// Paths `(x₁,…,x_p)` with positive probability, from every state.
fn admissible_paths(chain: &FiniteChain, p: usize) -> Vec<(Vec<usize>, f64)> {
    let k = chain.kernel();
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, f64)> = (0..chain.len()).map(|x| (vec![x], 1.0)).collect();
    stack.reverse();
    while let Some((path, w)) = stack.pop() {
        if path.len() == p {
            out.push((path, w));
            continue;
        }
        let last = *path.last().expect("nonempty");
        for y in (0..chain.len()).rev() {
            let q = k[(last, y)];
            if q > 0.0 {
                let mut next = path.clone();
                next.push(y);
                stack.push((next, w * q));
            }
        }
    }
    out
}

fn hat_parts(chain: &FiniteChain, p: usize) -> Result<(FiniteChain, Vec<Vec<usize>>)> {
    let d = chain.period()?;
    if p == 0 || p % d != 0 {
        return Err(Error::InvalidArgument(format!("block length {p} is not a multiple of the period {d}")));
    }
    let paths = admissible_paths(chain, p);
    let k = chain.kernel();
    let m = paths.len();
    let mut kernel = Matrix::zeros(m, m);
    for (i, (x, _)) in paths.iter().enumerate() {
        let last = *x.last().expect("p ≥ 1");
        for (j, (y, w)) in paths.iter().enumerate() {
            kernel[(i, j)] = k[(last, y[0])] * w;
        }
    }
    let start_mass = |x: usize| match chain.start() {
        StartLaw::State(s) => f64::from(u8::from(*s == x)),
        StartLaw::Distribution(d) => d[x],
    };
    let start: Vec<f64> = paths.iter().map(|(y, w)| start_mass(y[0]) * w).collect();
    let names = paths
        .iter()
        .map(|(y, _)| y.iter().map(|&s| chain.states()[s].as_str()).collect::<Vec<_>>().join("|"))
        .collect();
    let hat = FiniteChain::new(names, kernel, StartLaw::Distribution(start))?;
    Ok((hat, paths.into_iter().map(|(y, _)| y).collect()))
}

/// Chain on admissible length-`p` paths with
/// `P̂(x, y) = P(x_p, y₁) ∏ P(y_j, y_{j+1})`.
///
/// Paths from every state are kept, so the result splits into one closed
/// class per cyclic class of the original chain. The start law is the law of
/// the first block `(z₁,…,z_p)`.
pub fn hat_chain(chain: &FiniteChain, p: usize) -> Result<FiniteChain> {
    hat_parts(chain, p).map(|(c, _)| c)
}

/// Process on the hat chain with `X̂(y) = X(y_p)⋯X(y₁)`, so that `M̂_n` has
/// the law of `M_{np}`.
pub fn hat_process(proc: &MarkovMatrixProcess, p: usize) -> Result<MarkovMatrixProcess> {
    let (chain, paths) = hat_parts(proc.chain(), p)?;
    let mats = paths
        .iter()
        .map(|y| y.iter().fold(Matrix::identity(proc.dimension()), |acc, &s| &proc.matrices()[s] * &acc))
        .collect();
    MarkovMatrixProcess::new(chain, mats)
}

/// Edge-chain process with `X((v₁,v₂)) = ρ(label(v₁,v₂))ᵀ`, started from the
/// stationary law.
pub fn parry_product_process(
    aut: &Automaton,
    parry_edge: &ParryMeasure,
    rep: &LinearRepresentation,
) -> Result<MarkovMatrixProcess> {
    let verts = aut.counting_vertices();
    let mut mats = Vec::with_capacity(parry_edge.len());
    for (state, name) in parry_edge.states.iter().zip(&parry_edge.state_names) {
        let [from, to] = state[..] else {
            return Err(Error::InvalidArgument("expected an edge chain".into()));
        };
        let (from, to) = (verts[from], verts[to]);
        let letter = match aut.label(from, to) {
            Some(Label::Letter(l)) => l,
            _ => return Err(Error::LabelMismatch(format!("edge `{name}` carries no letter"))),
        };
        let symbol = aut.alphabet().symbol(letter);
        let l = rep
            .alphabet()
            .lookup(symbol)
            .map_err(|_| Error::LabelMismatch(format!("letter `{symbol}` is not in the representation alphabet")))?;
        mats.push(rep.image(l).transpose());
    }
    let chain = FiniteChain::new(
        parry_edge.state_names.clone(),
        parry_edge.kernel.clone(),
        StartLaw::Distribution(parry_edge.stationary.clone()),
    )?;
    MarkovMatrixProcess::new(chain, mats)
}

/// States `H`, `T` with i.i.d. fair transitions; `X(H) = diag(4, ¼)`,
/// `X(T) = I`. `Λ = log 2` and `σ² = (log 2)²`.
pub fn coin_diagonal_process() -> Result<MarkovMatrixProcess> {
    let k = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
    let chain = FiniteChain::new(vec!["H".into(), "T".into()], k, StartLaw::Distribution(vec![0.5, 0.5]))?;
    MarkovMatrixProcess::new(chain, vec![Matrix::diag(&[4.0, 0.25]), Matrix::identity(2)])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentEstimate {
    pub vertices: Vec<String>,
    pub lambda: f64,
    pub lambda_se: f64,
    pub sigma2: f64,
    pub sigma2_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossComponentReport {
    pub components: Vec<ComponentEstimate>,
    /// Largest `|Λ_i − Λ_j| / √(se_i² + se_j²)` over pairs.
    pub max_lambda_z: f64,
    pub max_sigma2_z: f64,
    /// Fewer than two maximal components.
    pub vacuous: bool,
    /// No pair differs by more than 3 joint standard errors.
    pub consistent: bool,
}

/// Per maximal component: the Parry edge process with representation `reps[i]`
/// (or `reps[0]` for all), and batch-means estimates of `Λ` and `σ²`.
pub fn cross_component_consistency(
    aut: &Automaton,
    reps: &[LinearRepresentation],
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<CrossComponentReport> {
    let a = TransitionMatrix::from_automaton(aut);
    let decomp = scc_decomposition(&a);
    let lambda = growth_rate(&a, DEFAULT_TOL)?;
    let maximal = maximal_components(&a, &decomp, lambda, 1e-9)?;
    if reps.is_empty() || (reps.len() != 1 && reps.len() != maximal.indices.len()) {
        return Err(Error::InvalidArgument(format!(
            "expected 1 or {} representations, got {}",
            maximal.indices.len(),
            reps.len()
        )));
    }
    let block = (n / 16).max(1);
    let mut components = Vec::new();
    for (i, &c) in maximal.indices.iter().enumerate() {
        let comp = &decomp.components[c];
        let rep = &reps[if reps.len() == 1 { 0 } else { i }];
        let parry = edge_chain(&parry_measure(&a, comp)?);
        let proc = parry_product_process(aut, &parry, rep)?;
        let est = estimate_lambda_sigma(&proc, n, trials, block, seed.wrapping_add(i as u64))?;
        components.push(ComponentEstimate {
            vertices: comp.iter().map(|&v| a.names()[v].clone()).collect(),
            lambda: est.lambda,
            lambda_se: est.standard_error,
            sigma2: est.sigma2,
            sigma2_se: est.sigma2_standard_error,
        });
    }
    let z = |x: f64, sx: f64, y: f64, sy: f64| {
        let s = (sx * sx + sy * sy).sqrt();
        if s > 0.0 {
            (x - y).abs() / s
        } else if (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0) {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let (mut max_lambda_z, mut max_sigma2_z) = (0.0f64, 0.0f64);
    for i in 0..components.len() {
        for j in i + 1..components.len() {
            let (x, y) = (&components[i], &components[j]);
            max_lambda_z = max_lambda_z.max(z(x.lambda, x.lambda_se, y.lambda, y.lambda_se));
            max_sigma2_z = max_sigma2_z.max(z(x.sigma2, x.sigma2_se, y.sigma2, y.sigma2_se));
        }
    }
    Ok(CrossComponentReport {
        vacuous: components.len() < 2,
        consistent: max_lambda_z <= 3.0 && max_sigma2_z <= 3.0,
        components,
        max_lambda_z,
        max_sigma2_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::group::GroupOracle;

    fn cycle(n: usize) -> FiniteChain {
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            k[(i, (i + 1) % n)] = 1.0;
        }
        FiniteChain::new((0..n).map(|i| format!("s{i}")).collect(), k, StartLaw::State(0)).unwrap()
    }

    fn edge_parry(aut: &Automaton) -> ParryMeasure {
        let a = TransitionMatrix::from_automaton(aut);
        let d = scc_decomposition(&a);
        let lam = growth_rate(&a, DEFAULT_TOL).unwrap();
        let m = maximal_components(&a, &d, lam, 1e-9).unwrap();
        edge_chain(&parry_measure(&a, &d.components[m.indices[0]]).unwrap())
    }

    #[test]
    fn hat_of_cycle_is_identity() {
        let h = hat_chain(&cycle(3), 3).unwrap();
        assert_eq!(h.len(), 3);
        assert!(h.kernel().max_abs_diff(&Matrix::identity(3)) == 0.0);
        assert!(h.is_aperiodic());
        assert!(matches!(hat_chain(&cycle(3), 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn hat_of_aperiodic_chain_with_p1_is_same() {
        let k = Matrix::from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]);
        let c = FiniteChain::new(vec!["a".into(), "b".into()], k.clone(), StartLaw::State(1)).unwrap();
        let h = hat_chain(&c, 1).unwrap();
        assert_eq!(h.kernel(), &k);
        assert_eq!(h.start(), &StartLaw::Distribution(vec![0.0, 1.0]));
    }

    #[test]
    fn free_product_edge_chain_hat_is_aperiodic() {
        let aut = builtins::free_product_automaton(&[2, 3]);
        let parry = edge_parry(&aut);
        assert_eq!(parry.len(), 4);
        let c = FiniteChain::new(parry.state_names.clone(), parry.kernel.clone(), StartLaw::State(0)).unwrap();
        assert_eq!(c.period().unwrap(), 2);
        let h = hat_chain(&c, 2).unwrap();
        assert!(h.is_aperiodic());
        assert!(!c.is_aperiodic());
    }

    #[test]
    fn parry_processes() {
        let aut = builtins::free_group_automaton(2);
        let parry = edge_parry(&aut);
        let rep = builtins::sanov(aut.alphabet()).unwrap();
        let p = parry_product_process(&aut, &parry, &rep).unwrap();
        assert_eq!(p.chain().len(), 12);
        let ortho = builtins::orthogonal(&GroupOracle::free(2).unwrap()).unwrap();
        let p = parry_product_process(&aut, &parry, &ortho).unwrap();
        let t = super::super::simulate(&p, 2000, 5, 0);
        assert!(t.log_norm.iter().all(|l| l.abs() < 1e-9));
        let fp = builtins::free_product_automaton(&[2, 3]);
        let other = builtins::modular(fp.alphabet()).unwrap();
        assert!(matches!(parry_product_process(&aut, &parry, &other), Err(Error::LabelMismatch(_))));
    }

    #[test]
    fn hat_process_matches_block_products() {
        let aut = builtins::free_product_automaton(&[2, 3]);
        let parry = edge_parry(&aut);
        let rep = builtins::modular(aut.alphabet()).unwrap();
        let p = parry_product_process(&aut, &parry, &rep).unwrap().with_start(StartLaw::State(0)).unwrap();
        let h = hat_process(&p, 2).unwrap();
        for (y, x) in h.chain().states().iter().zip(h.matrices()) {
            let parts: Vec<usize> = y.split('|').map(|s| p.chain().state_index(s).unwrap()).collect();
            let expect = &p.matrices()[parts[1]] * &p.matrices()[parts[0]];
            assert!(x.max_abs_diff(&expect) < 1e-15);
        }
    }

    #[test]
    fn cross_component_vacuous_and_symmetric() {
        let aut = builtins::free_group_automaton(2);
        let rep = builtins::sanov(aut.alphabet()).unwrap();
        let r = cross_component_consistency(&aut, &[rep.clone()], 3200, 4, 1).unwrap();
        assert!(r.vacuous && r.consistent && r.components.len() == 1);
        let two = builtins::two_copy_free_automaton();
        let r = cross_component_consistency(&two, &[rep], 3200, 4, 1).unwrap();
        assert_eq!(r.components.len(), 2);
        assert!(!r.vacuous);
    }

    #[test]
    fn coin_process_shape() {
        let p = coin_diagonal_process().unwrap();
        assert_eq!(p.chain().stationary().unwrap(), vec![0.5, 0.5]);
        assert!((p.expected_log_det().unwrap()).abs() < 1e-15);
    }
}
