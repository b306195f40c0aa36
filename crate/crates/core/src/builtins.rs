//! Built-in groups, automata, fixtures and representations.

use crate::automaton::{Automaton, Label, START};
use crate::group::{Alphabet, DehnPresentation, GroupOracle, LinearRepresentation};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// A named group: its word-problem oracle and, when known, a strongly Markov
/// structure for it.
#[derive(Clone, Debug)]
pub struct BuiltinGroup {
    pub name: String,
    pub oracle: GroupOracle,
    pub automaton: Option<Automaton>,
}

/// Parses `free:K`, `product:M1,M2,…` or `surface:G`.
///
/// Surface groups come with an oracle only; their automata are loaded from
/// files.
pub fn parse_group(spec: &str) -> Result<BuiltinGroup> {
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::InvalidArgument(format!("group `{spec}` is not of the form kind:args")))?;
    let bad = |what: &str| Error::InvalidArgument(format!("bad {what} in group `{spec}`"));
    match kind {
        "free" => {
            let k: usize = arg.trim().parse().map_err(|_| bad("rank"))?;
            Ok(BuiltinGroup { name: spec.to_string(), oracle: GroupOracle::free(k)?, automaton: Some(Automaton::free_group(k)?) })
        }
        "product" => {
            let orders: Vec<u32> =
                arg.split(',').map(|s| s.trim().parse().map_err(|_| bad("order"))).collect::<Result<_>>()?;
            Ok(BuiltinGroup {
                name: spec.to_string(),
                oracle: GroupOracle::free_product(&orders)?,
                automaton: Some(Automaton::free_product(&orders)?),
            })
        }
        "surface" => {
            let g: usize = arg.trim().parse().map_err(|_| bad("genus"))?;
            Ok(BuiltinGroup { name: spec.to_string(), oracle: GroupOracle::dehn(surface_presentation(g)?), automaton: None })
        }
        _ => Err(Error::InvalidArgument(format!("unknown group kind `{kind}`"))),
    }
}

/// `⟨a₁,b₁,…,a_g,b_g | [a₁,b₁]⋯[a_g,b_g]⟩` for `g ≥ 2`, written on letters
/// `a, b, c, d, …`.
pub fn surface_presentation(genus: usize) -> Result<DehnPresentation> {
    if !(2..=13).contains(&genus) {
        return Err(Error::InvalidArgument(format!("genus {genus} out of range 2..=13")));
    }
    let gens: Vec<String> = (0..2 * genus).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
    let mut rel = String::new();
    for i in 0..genus {
        let (x, y) = (&gens[2 * i], &gens[2 * i + 1]);
        rel.push_str(&format!("{x}{y}{}{}", x.to_uppercase(), y.to_uppercase()));
    }
    DehnPresentation::new(&gens, &[rel])
}

pub fn free_group_automaton(rank: usize) -> Automaton {
    Automaton::free_group(rank).expect("valid rank")
}

pub fn free_product_automaton(orders: &[u32]) -> Automaton {
    Automaton::free_product(orders).expect("valid orders")
}

fn build(alphabet: Alphabet, vertices: &[&str], edges: &[(&str, &str, &str)]) -> Automaton {
    let edges: Vec<(String, String, Label)> = edges
        .iter()
        .map(|&(f, t, l)| (f.to_string(), t.to_string(), Label::Letter(alphabet.lookup(l).expect("known letter"))))
        .collect();
    let vertices = vertices.iter().map(|s| s.to_string()).collect();
    Automaton::new(alphabet, vertices, START, &edges, false).expect("valid fixture")
}

/// Two disjoint copies of the rank-2 reduced-word graph, entered only from `∗`.
pub fn two_copy_free_automaton() -> Automaton {
    let alphabet = Alphabet::free(2).expect("rank 2");
    let letters = ["a", "A", "b", "B"];
    let inverse = |x: &str| match x {
        "a" => "A",
        "A" => "a",
        "b" => "B",
        _ => "b",
    };
    let mut vertices = vec![START.to_string()];
    let mut edges = Vec::new();
    for copy in ["1", "2"] {
        for x in letters {
            let xv = format!("{x}{copy}");
            vertices.push(xv.clone());
            edges.push((START.to_string(), xv.clone(), x));
            for y in letters.iter().filter(|&&y| y != inverse(x)) {
                edges.push((xv.clone(), format!("{y}{copy}"), *y));
            }
        }
    }
    let v: Vec<&str> = vertices.iter().map(String::as_str).collect();
    let e: Vec<(&str, &str, &str)> = edges.iter().map(|(f, t, l)| (f.as_str(), t.as_str(), *l)).collect();
    build(alphabet, &v, &e)
}

/// A single period-2 component `{x1, x2} ⇄ {y1, y2}` entered from `∗` through
/// `x1` and `y1`; its growth rate is `√(1+√2)`.
pub fn bipartite_period_two_automaton() -> Automaton {
    let alphabet = Alphabet::free(2).expect("rank 2");
    build(
        alphabet,
        &[START, "x1", "x2", "y1", "y2"],
        &[
            (START, "x1", "a"),
            (START, "y1", "b"),
            ("x1", "y1", "b"),
            ("x1", "y2", "B"),
            ("x2", "y1", "b"),
            ("y1", "x1", "a"),
            ("y2", "x1", "a"),
            ("y2", "x2", "A"),
        ],
    )
}

/// Names accepted by [`builtin_representation`].
pub const REPRESENTATIONS: &[&str] = &["sanov", "orthogonal", "modular"];

/// `a ↦ [[1,2],[0,1]]`, `b ↦ [[1,0],[2,1]]`: a faithful image of `F₂`.
pub fn sanov(alphabet: &Alphabet) -> Result<LinearRepresentation> {
    LinearRepresentation::from_generators(
        alphabet.clone(),
        &[
            ("a", Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]])),
            ("b", Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 1.0]])),
        ],
    )
}

fn rotation(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    Matrix::from_rows(&[vec![c, -s], vec![s, c]])
}

/// Plane rotations: angle `√(i+2)` for the `i`-th generator of a free group,
/// `2π/m` for a cyclic factor of order `m`.
pub fn orthogonal(oracle: &GroupOracle) -> Result<LinearRepresentation> {
    let alphabet = oracle.alphabet().clone();
    let angles: Vec<f64> = match oracle.kind() {
        crate::group::OracleKind::Free { rank } => (0..*rank).map(|i| ((i + 2) as f64).sqrt()).collect(),
        crate::group::OracleKind::FreeProduct { orders } => {
            orders.iter().map(|&m| 2.0 * std::f64::consts::PI / m as f64).collect()
        }
        crate::group::OracleKind::Dehn(_) => {
            return Err(Error::InvalidArgument("no built-in orthogonal representation for presentations".into()))
        }
    };
    let names: Vec<String> = (0..angles.len()).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
    let gens: Vec<(&str, Matrix)> = names.iter().zip(&angles).map(|(n, &t)| (n.as_str(), rotation(t))).collect();
    LinearRepresentation::from_generators(alphabet, &gens)
}

/// `a ↦ [[1,1],[0,−1]]` (order 2), `b ↦ [[0,−1],[1,−1]]` (order 3): a faithful
/// discrete image of `ℤ/2 ∗ ℤ/3`.
pub fn modular(alphabet: &Alphabet) -> Result<LinearRepresentation> {
    LinearRepresentation::from_generators(
        alphabet.clone(),
        &[
            ("a", Matrix::from_rows(&[vec![1.0, 1.0], vec![0.0, -1.0]])),
            ("b", Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, -1.0]])),
        ],
    )
}

/// Looks up a representation by name for the given group.
pub fn builtin_representation(name: &str, oracle: &GroupOracle) -> Result<LinearRepresentation> {
    match name {
        "sanov" => match oracle.kind() {
            crate::group::OracleKind::Free { rank: 2 } => sanov(oracle.alphabet()),
            _ => Err(Error::InvalidArgument("`sanov` needs free:2".into())),
        },
        "orthogonal" => orthogonal(oracle),
        "modular" => match oracle.kind() {
            crate::group::OracleKind::FreeProduct { orders } if orders.as_slice() == [2, 3] => modular(oracle.alphabet()),
            _ => Err(Error::InvalidArgument("`modular` needs product:2,3".into())),
        },
        _ => Err(Error::InvalidArgument(format!("unknown representation `{name}`; built-ins: {}", REPRESENTATIONS.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_groups() {
        let g = parse_group("free:2").unwrap();
        assert_eq!(g.automaton.unwrap().vertices().len(), 5);
        let p = parse_group("product:2,3").unwrap();
        assert_eq!(p.oracle.alphabet().len(), 3);
        let s = parse_group("surface:2").unwrap();
        assert!(s.automaton.is_none());
        assert!(parse_group("free").is_err());
        assert!(parse_group("torus:1").is_err());
        assert!(parse_group("product:1,3").is_err());
    }

    #[test]
    fn representations_respect_relations() {
        let p = parse_group("product:2,3").unwrap();
        let m = modular(p.oracle.alphabet()).unwrap();
        let w = p.oracle.alphabet().parse_word("bbb").unwrap();
        let e = m.eval(&w).unwrap().to_matrix();
        assert!(e.max_abs_diff(&Matrix::identity(2)) < 1e-12);
        let o = orthogonal(&p.oracle).unwrap();
        let e = o.eval(&w).unwrap().to_matrix();
        assert!(e.max_abs_diff(&Matrix::identity(2)) < 1e-12);
        let f = parse_group("free:2").unwrap();
        assert!(builtin_representation("sanov", &f.oracle).is_ok());
        assert!(builtin_representation("sanov", &p.oracle).is_err());
        assert!(builtin_representation("modular", &f.oracle).is_err());
        assert!(builtin_representation("nope", &f.oracle).is_err());
    }

    #[test]
    fn fixtures_build() {
        assert_eq!(two_copy_free_automaton().vertices().len(), 9);
        assert_eq!(bipartite_period_two_automaton().path_counts(3), vec![1, 2, 3, 5]);
    }
}
