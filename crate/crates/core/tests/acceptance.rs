//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p hyperlab --test acceptance`. The process exits
//! non-zero when a criterion fails that is not listed in [`KNOWN_RED`].

use std::cell::OnceCell;
use std::collections::HashMap;
use std::io::Write as _;
use std::process::Command;
use std::time::Instant;

use num_bigint::BigUint;

use hyperlab::automaton::Automaton;
use hyperlab::boundary::{ray_statistics, PattersonSullivan, RayConfig};
use hyperlab::builtins::{bipartite_period_two_automaton, builtin_representation, parse_group, two_copy_free_automaton};
use hyperlab::counting::{
    build_count_table, estimate_limits, sample_sphere_uniform, sample_values, sphere_values, spherical_statistics,
    HistogramSpec, LimitEstimates, Mode, Schedule,
};
use hyperlab::group::{LinearRepresentation, SubadditiveFunctional};
use hyperlab::markov::{
    berry_esseen_curve, coin_diagonal_process, estimate_lambda_sigma, hat_process, lil_statistic,
    parry_product_process, simulate, MarkovMatrixProcess,
};
use hyperlab::rng::stream_rng;
use hyperlab::spectral::{
    analyze, approx2_lengths, edge_chain, growth_rate, lem_approx2_tv, lem_tv_distance, limit_vectors,
    maximal_components, mu_measure, parry_measure, pi_measure, scc_decomposition, tau_measure, tau_tilde_measure,
    tv_distance, TransitionMatrix, DEFAULT_TOL,
};
use hyperlab::stats::{geometric_ratio, ks_distance_to_normal, ks_two_sample, RunningStats};

type Outcome = Result<(bool, String), String>;

/// Criteria that cannot pass as stated; each has a written analysis in the
/// project's decision log. They still run and still print FAIL.
const KNOWN_RED: &[&str] = &["3", "4", "6"];

const GROUPS: &[&str] = &["free:2", "free:3", "product:2,3", "product:3,3", "product:2,2,2"];

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct Sanov {
    aut: Automaton,
    rep: LinearRepresentation,
    f: SubadditiveFunctional,
    /// Exact sphere values of `log‖ρ(g)‖` for `n = 0..=14`.
    spheres: Vec<Vec<f64>>,
    counting: LimitEstimates,
}

impl Sanov {
    fn new() -> Result<Self, String> {
        let g = parse_group("free:2").map_err(err)?;
        let aut = g.automaton.unwrap();
        let rep = builtin_representation("sanov", &g.oracle).map_err(err)?.aligned_to(aut.alphabet()).map_err(err)?;
        let f = SubadditiveFunctional::log_norm(rep.clone());
        let spheres = (0..=14).map(|n| sphere_values(&aut, &f, n)).collect::<Result<Vec<_>, _>>().map_err(err)?;
        let table = build_count_table(&aut, 14);
        let schedule = Schedule { exact: (2..=14).collect(), monte_carlo: Vec::new(), seed: 0 };
        let counting = estimate_limits(&aut, &table, &f, &schedule).map_err(err)?;
        Ok(Sanov { aut, rep, f, spheres, counting })
    }

    fn mean(&self, n: usize) -> f64 {
        let v = &self.spheres[n];
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn parry_process(&self) -> Result<MarkovMatrixProcess, String> {
        parry_process(&self.aut, &self.rep)
    }
}

fn parry_process(aut: &Automaton, rep: &LinearRepresentation) -> Result<MarkovMatrixProcess, String> {
    let a = TransitionMatrix::from_automaton(aut);
    let report = analyze(&a).map_err(err)?;
    let decomp = scc_decomposition(&a);
    let c = report.maximal.iter().position(|&m| m).ok_or("no maximal component")?;
    let parry = parry_measure(&a, &decomp.components[c]).map_err(err)?;
    parry_product_process(aut, &edge_chain(&parry), rep).map_err(err)
}

fn criterion_1() -> Outcome {
    let aut = Automaton::free_group(2).map_err(err)?;
    let table = build_count_table(&aut, 20);
    let mut first_bad = None;
    for n in 1..=20u32 {
        let expected = BigUint::from(4u32) * BigUint::from(3u32).pow(n - 1);
        if table.sphere_size(n as usize) != &expected && first_bad.is_none() {
            first_bad = Some(n);
        }
    }
    let mut mismatches = Vec::new();
    for spec in GROUPS {
        let g = parse_group(spec).map_err(err)?;
        let aut = g.automaton.unwrap();
        let table = build_count_table(&aut, 8);
        let bfs = g.oracle.sphere_sizes(8).map_err(err)?;
        for (n, &b) in bfs.iter().enumerate() {
            if table.sphere_size(n) != &BigUint::from(b) {
                mismatches.push(format!("{spec} n={n}"));
            }
        }
    }
    let ok = first_bad.is_none() && mismatches.is_empty();
    Ok((
        ok,
        format!(
            "free(2) 4*3^(n-1) n=1..20: {}; transfer vs BFS n<=8 on {}: {} mismatches",
            first_bad.map_or("exact".to_string(), |n| format!("first mismatch at n={n}")),
            GROUPS.join(" "),
            mismatches.len()
        ),
    ))
}

fn criterion_2() -> Outcome {
    let f2 = growth_rate(&TransitionMatrix::from_automaton(&Automaton::free_group(2).map_err(err)?), DEFAULT_TOL)
        .map_err(err)?;
    let z23 = growth_rate(&TransitionMatrix::from_automaton(&Automaton::free_product(&[2, 3]).map_err(err)?), DEFAULT_TOL)
        .map_err(err)?;
    let mut worst_stat: f64 = 0.0;
    let mut worst_entropy: f64 = 0.0;
    let mut disjoint = true;
    let mut auts: Vec<(String, Automaton)> =
        GROUPS.iter().map(|s| (s.to_string(), parse_group(s).unwrap().automaton.unwrap())).collect();
    auts.push(("two-copy".into(), two_copy_free_automaton()));
    let mut maximal_counts = Vec::new();
    for (name, aut) in &auts {
        let a = TransitionMatrix::from_automaton(aut);
        let decomp = scc_decomposition(&a);
        let lambda = growth_rate(&a, DEFAULT_TOL).map_err(err)?;
        let max = maximal_components(&a, &decomp, lambda, 1e-9).map_err(err)?;
        maximal_counts.push(format!("{name}:{}", max.indices.len()));
        for &c in &max.indices {
            let parry = parry_measure(&a, &decomp.components[c]).map_err(err)?;
            worst_stat = worst_stat.max(parry.stationarity_residual());
            worst_entropy = worst_entropy.max((parry.entropy() - parry.lambda.ln()).abs());
        }
        // no maximal component reaches another
        for &c in &max.indices {
            let reach = a.reachable(&decomp.components[c]);
            for &d in max.indices.iter().filter(|&&d| d != c) {
                if decomp.components[d].iter().any(|&v| reach[v]) {
                    disjoint = false;
                }
            }
        }
        disjoint &= max.disjoint;
    }
    let ok = (f2 - 3.0).abs() <= 1e-10
        && (z23 - 2f64.sqrt()).abs() <= 1e-10
        && worst_stat < 1e-12
        && worst_entropy <= 1e-8
        && disjoint;
    Ok((
        ok,
        format!(
            "lambda F2 err {:.1e}, Z2*Z3 err {:.1e}; Parry stationarity {:.1e}, entropy err {:.1e}; maximal disjoint: {} ({})",
            (f2 - 3.0).abs(),
            (z23 - 2f64.sqrt()).abs(),
            worst_stat,
            worst_entropy,
            disjoint,
            maximal_counts.join(" ")
        ),
    ))
}

fn criterion_3() -> Outcome {
    let mut harmonic: f64 = 0.0;
    let mut additivity: f64 = 0.0;
    let mut regression = Vec::new();
    let mut ok = true;
    for spec in ["free:2", "product:2,3", "product:3,3", "product:2,2,2"] {
        let aut = parse_group(spec).map_err(err)?.automaton.unwrap();
        let ps = PattersonSullivan::new(&aut).map_err(err)?;
        harmonic = harmonic.max(ps.limit_vectors().harmonic_residual(ps.transition_matrix()));
        additivity = additivity.max(ps.additivity_residual(10));
        if spec == "free:2" || spec == "product:2,3" {
            let tv = ps.finite_measure_tv(40, 4).map_err(err)?;
            ok &= tv < 1e-3;
            regression.push(format!("{spec} {tv:.2e}"));
        }
    }
    for aut in [bipartite_period_two_automaton(), two_copy_free_automaton()] {
        let ps = PattersonSullivan::new(&aut).map_err(err)?;
        harmonic = harmonic.max(ps.limit_vectors().harmonic_residual(ps.transition_matrix()));
        additivity = additivity.max(ps.additivity_residual(10));
    }
    ok &= harmonic < 1e-10 && additivity <= 1e-12;
    Ok((
        ok,
        format!(
            "|Aq-lq| {harmonic:.1e}; additivity depth 10 {additivity:.1e}; finite-n TV (n=40, k=4): {}",
            regression.join(", ")
        ),
    ))
}

fn criterion_4() -> Outcome {
    const DRAWS: u64 = 1_000_000;
    let aut = Automaton::free_group(2).map_err(err)?;
    let table = build_count_table(&aut, 8);
    let k = 8748usize;
    let mut counts: HashMap<Vec<u16>, u64> = HashMap::with_capacity(k);
    let mut rng = stream_rng(4, 0);
    for _ in 0..DRAWS {
        let w = sample_sphere_uniform(&aut, &table, 8, &mut rng).map_err(err)?;
        *counts.entry(w.0.iter().map(|l| l.0).collect()).or_default() += 1;
    }
    let tv = empirical_tv(counts.values().copied(), k, DRAWS);
    // reference: the same statistic for an ideal uniform generator
    let mut ideal = vec![0u64; k];
    let mut rng = stream_rng(4, 1);
    for _ in 0..DRAWS {
        ideal[rand::Rng::random_range(&mut rng, 0..k)] += 1;
    }
    let ideal_tv = empirical_tv(ideal.into_iter(), k, DRAWS);
    let expected = 0.5 * (2.0 / std::f64::consts::PI).sqrt() * (k as f64 / DRAWS as f64).sqrt();

    let mut ray_ok = true;
    let mut ray_detail = Vec::new();
    for spec in ["free:2", "product:2,3"] {
        let aut = parse_group(spec).map_err(err)?.automaton.unwrap();
        let ps = PattersonSullivan::new(&aut).map_err(err)?;
        let mut freq: HashMap<Vec<usize>, u64> = HashMap::new();
        let mut rng = stream_rng(44, 0);
        for _ in 0..DRAWS {
            *freq.entry(ps.sample_ray(3, &mut rng).vertices).or_default() += 1;
        }
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        for (prefix, &c) in &freq {
            let mass = ps.cylinder_mass(prefix).map_err(err)?;
            if mass > 1e-3 {
                let se = (mass * (1.0 - mass) / DRAWS as f64).sqrt();
                worst = worst.max((c as f64 / DRAWS as f64 - mass).abs() / se);
                checked += 1;
            }
        }
        let total_mass: f64 = freq.keys().map(|p| ps.cylinder_mass(p).unwrap()).sum();
        ray_ok &= worst < 4.0 && (total_mass - 1.0).abs() < 1e-12;
        ray_detail.push(format!("{spec}: {checked} prefixes, max |z| {worst:.2}"));
    }
    Ok((
        tv < 0.01 && ray_ok,
        format!(
            "sphere sampler TV {tv:.4} (threshold 0.01; ideal uniform generator {ideal_tv:.4}, expected {expected:.4}); rays {}",
            ray_detail.join(", ")
        ),
    ))
}

fn empirical_tv(counts: impl Iterator<Item = u64>, k: usize, draws: u64) -> f64 {
    let p = 1.0 / k as f64;
    let mut seen = 0usize;
    let mut tv = 0.0;
    for c in counts {
        seen += 1;
        tv += (c as f64 / draws as f64 - p).abs();
    }
    tv += (k - seen) as f64 * p;
    0.5 * tv
}

fn criterion_5(s: &Sanov) -> Outcome {
    let ratios: Vec<f64> = (2..=14).map(|n| s.mean(n) / n as f64).collect();
    let diffs: Vec<f64> = ratios.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let shrinking = diffs.windows(2).all(|w| w[1] < w[0]);

    let table = build_count_table(&s.aut, 200);
    let mc: RunningStats = sample_values(&s.aut, &table, &s.f, 200, 20_000, 5).map_err(err)?.into_iter().collect();
    let extrapolated = s.counting.extrapolated_mean(200);
    let se = (mc.standard_error().powi(2) + (200.0 * s.counting.standard_error).powi(2)).sqrt();
    let z = (mc.mean - extrapolated) / se;

    let proc = s.parry_process()?;
    let sim = estimate_lambda_sigma(&proc, 20_000, 64, 1250, 55).map_err(err)?;
    let rel = (s.counting.lambda - sim.lambda).abs() / s.counting.lambda;
    Ok((
        shrinking && z.abs() < 3.0 && rel < 0.01,
        format!(
            "|Δ(m_n/n)| shrinking n=2..14: {shrinking} (last {:.2e}); MC n=200 {:.4} vs extrapolated {:.4}, z={z:.2}; \
             counting {:.6} vs Parry simulation {:.6} ± {:.1e}, rel {rel:.1e}",
            diffs.last().unwrap(),
            mc.mean,
            extrapolated,
            s.counting.lambda,
            sim.lambda,
            sim.standard_error
        ),
    ))
}

fn criterion_6(s: &Sanov) -> Outcome {
    let sanov_z = s.counting.lambda / s.counting.standard_error;

    let g = parse_group("free:2").map_err(err)?;
    let aut = g.automaton.unwrap();
    let rep = builtin_representation("orthogonal", &g.oracle).map_err(err)?.aligned_to(aut.alphabet()).map_err(err)?;
    let f = SubadditiveFunctional::log_norm(rep);
    let table = build_count_table(&aut, 200);
    let schedule = Schedule { exact: (2..=10).collect(), monte_carlo: vec![(200, 10_000)], seed: 6 };
    let orth = estimate_limits(&aut, &table, &f, &schedule).map_err(err)?;
    let orth_ok = orth.lambda.abs() < 3.0 * orth.standard_error;

    let h = SubadditiveFunctional::abs_homomorphism(aut.alphabet(), vec![1.0, -1.0, 0.0, 0.0]).map_err(err)?;
    let values = sphere_values(&aut, &h, 14).map_err(err)?;
    let abs_mean = values.iter().sum::<f64>() / values.len() as f64 / 14.0;
    let signed = SubadditiveFunctional::homomorphism(aut.alphabet(), vec![1.0, -1.0, 0.0, 0.0]).map_err(err)?;
    let sv = sphere_values(&aut, &signed, 14).map_err(err)?;
    let signed_mean = sv.iter().sum::<f64>() / sv.len() as f64 / 14.0;
    Ok((
        sanov_z > 5.0 && orth_ok && abs_mean < 0.05,
        format!(
            "Sanov lambda/se = {sanov_z:.1e}; orthogonal lambda {:.1e} (se {:.1e}); abs_hom m_14/14 = {abs_mean:.4} \
             (threshold 0.05; signed hom m_14/14 = {signed_mean:.1e})",
            orth.lambda, orth.standard_error
        ),
    ))
}

fn deviation_profile(
    aut: &Automaton,
    f: &SubadditiveFunctional,
    lambda: f64,
    spheres: Option<&[Vec<f64>]>,
) -> Result<(Vec<f64>, Vec<f64>), String> {
    let table = build_count_table(aut, 14);
    let hist = HistogramSpec { origin: 0.0, width: 1.0, bins: 1 };
    let mut fractions = Vec::new();
    for n in [8usize, 10, 12, 14] {
        let frac = match spheres {
            // both routes must agree
            Some(s) => {
                let direct = s[n].iter().filter(|&&v| (v / n as f64 - lambda).abs() > 0.2 * lambda).count() as f64
                    / s[n].len() as f64;
                let stats =
                    spherical_statistics(aut, &table, f, n, Mode::Exact, lambda, &[0.2 * lambda], &hist).map_err(err)?;
                if (stats.deviation_fractions[0].1 - direct).abs() > 1e-12 {
                    return Err(format!("deviation fraction mismatch at n={n}"));
                }
                direct
            }
            None => {
                spherical_statistics(aut, &table, f, n, Mode::Exact, lambda, &[0.2 * lambda], &hist)
                    .map_err(err)?
                    .deviation_fractions[0]
                    .1
            }
        };
        fractions.push(frac);
    }
    let rates = fractions.iter().zip([8.0, 10.0, 12.0, 14.0]).map(|(f, n)| f.ln() / n).collect();
    Ok((fractions, rates))
}

fn inversions(v: &[f64]) -> usize {
    v.windows(2).filter(|w| w[1] > w[0]).count()
}

fn criterion_7(s: &Sanov) -> Outcome {
    let (fr, rates) = deviation_profile(&s.aut, &s.f, s.counting.lambda, Some(&s.spheres))?;
    let d = SubadditiveFunctional::displacement(s.rep.clone()).map_err(err)?;
    let table = build_count_table(&s.aut, 14);
    let schedule = Schedule { exact: (2..=14).collect(), monte_carlo: Vec::new(), seed: 0 };
    let dl = estimate_limits(&s.aut, &table, &d, &schedule).map_err(err)?;
    let (dfr, drates) = deviation_profile(&s.aut, &d, dl.lambda, None)?;
    let check = |fr: &[f64], rates: &[f64]| {
        rates[3] < -0.01 && inversions(fr) <= 1 && fr.iter().all(|&x| x > 0.0)
    };
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",");
    Ok((
        check(&fr, &rates) && check(&dfr, &drates),
        format!(
            "log_norm fractions n=8..14 [{}] rates [{}] ({} rate rises); displacement (lambda {:.4}) fractions [{}] \
             rates [{}] ({} rate rises)",
            fmt(&fr),
            fmt(&rates),
            inversions(&rates),
            dl.lambda,
            fmt(&dfr),
            fmt(&drates),
            inversions(&drates)
        ),
    ))
}

fn criterion_8(s: &Sanov) -> Outcome {
    let ks = |n: usize| -> Result<f64, String> {
        let v = &s.spheres[n];
        let st: RunningStats = v.iter().copied().collect();
        let w = vec![1.0 / v.len() as f64; v.len()];
        ks_distance_to_normal(v, &w, st.mean, st.variance().sqrt()).map_err(err)
    };
    let (ks6, ks14) = (ks(6)?, ks(14)?);
    let proc = s.parry_process()?;
    let sim = estimate_lambda_sigma(&proc, 20_000, 64, 1250, 88).map_err(err)?;
    let rows =
        berry_esseen_curve(&proc, s.counting.lambda, sim.sigma2.sqrt(), &[64, 256, 1024], 100_000, 8).map_err(err)?;
    let scaled: Vec<f64> = rows.iter().map(|r| r.scaled).collect();
    let spread = scaled.iter().cloned().fold(f64::MIN, f64::max) / scaled.iter().cloned().fold(f64::MAX, f64::min);
    Ok((
        ks14 < ks6 && spread < 4.0,
        format!(
            "KS(6) {ks6:.4}, KS(14) {ks14:.4}; Berry-Esseen scaled n=64,256,1024 [{}], max/min {spread:.2}",
            scaled.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(",")
        ),
    ))
}

fn criterion_9() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();

    // prefix comparison on the period-2 fixture, residue 1
    let aut = bipartite_period_two_automaton();
    let a = TransitionMatrix::from_automaton(&aut);
    let lambda = growth_rate(&a, DEFAULT_TOL).map_err(err)?;
    let lv = limit_vectors(&a, lambda, 2, 1e-14).map_err(err)?;
    let ns: Vec<usize> = (2..=10).collect();
    let mut tvs = Vec::new();
    for &n in &ns {
        let tv = lem_tv_distance(&a, &lv, n, 1).map_err(err)?;
        let direct = tv_distance(&tau_measure(&a, 2 * n + 1).map_err(err)?, &mu_measure(&a, &lv, n, 1).map_err(err)?)
            .map_err(err)?;
        if (tv - direct).abs() > 1e-12 {
            return Err(format!("factored and enumerated TV differ at n={n}"));
        }
        tvs.push(tv);
    }
    let strict = tvs.windows(2).all(|w| w[1] < w[0]);
    let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let theta = geometric_ratio(&nf, &tvs).map_err(err)?;
    ok &= strict && theta < 1.0;
    detail.push(format!("TV(tau,mu) fixture r=1 n=2..10 strictly decreasing {strict}, ratio {theta:.3}"));

    // prefix comparison on the built-ins is exact
    let mut builtin_tv: f64 = 0.0;
    for spec in ["free:2", "product:2,3"] {
        let aut = parse_group(spec).map_err(err)?.automaton.unwrap();
        let a = TransitionMatrix::from_automaton(&aut);
        let rep = analyze(&a).map_err(err)?;
        let lv = limit_vectors(&a, rep.lambda, rep.p_common, 1e-14).map_err(err)?;
        for n in 2..=10 {
            for r in 0..rep.p_common {
                builtin_tv = builtin_tv.max(lem_tv_distance(&a, &lv, n, r).map_err(err)?);
            }
        }
    }
    ok &= builtin_tv < 1e-12;
    detail.push(format!("built-ins max {builtin_tv:.1e}"));

    // endpoint comparison, every c, over the enumerable range
    for (name, aut) in [
        ("free:2", parse_group("free:2").unwrap().automaton.unwrap()),
        ("product:2,3", parse_group("product:2,3").unwrap().automaton.unwrap()),
        ("fixture", bipartite_period_two_automaton()),
    ] {
        let a = TransitionMatrix::from_automaton(&aut);
        let rep = analyze(&a).map_err(err)?;
        let lv = limit_vectors(&a, rep.lambda, rep.p_common, 1e-14).map_err(err)?;
        for c in [1.0, 2.0, 4.0] {
            let mut rows: Vec<(usize, usize, f64)> = Vec::new();
            for n in 1..=40 {
                let Some((l, n_prime)) = approx2_lengths(n, rep.p_common, c) else { continue };
                let Ok(tt) = tau_tilde_measure(&a, &lv, n, c) else { break };
                let Ok(pi) = pi_measure(&a, &lv, n_prime) else { break };
                let direct = tv_distance(&pi, &tt).map_err(err)?;
                let tv = lem_approx2_tv(&a, &lv, n, c).unwrap();
                if (tv - direct).abs() > 1e-12 {
                    return Err(format!("{name} c={c} n={n}: factored and enumerated TV differ"));
                }
                rows.push((n, l, tv));
            }
            let max_rise =
                rows.windows(2).map(|w| w[1].2 - w[0].2).fold(0.0f64, f64::max);
            let range = format!("n={}..{}", rows.first().map_or(0, |r| r.0), rows.last().map_or(0, |r| r.0));
            if name == "fixture" {
                // drops at each increase of L; within one L the subdominant
                // eigenvalue moves it by a few percent
                let mut windows: Vec<(usize, f64, f64)> = Vec::new();
                for &(_, l, tv) in &rows {
                    match windows.last_mut() {
                        Some(w) if w.0 == l => {
                            w.1 = w.1.min(tv);
                            w.2 = w.2.max(tv);
                        }
                        _ => windows.push((l, tv, tv)),
                    }
                }
                let envelope = windows.windows(2).all(|w| w[1].2 < w[0].1) && windows.len() >= 2;
                ok &= envelope;
                detail.push(format!(
                    "fixture c={c} {range}: {} L-windows, envelope decreasing {envelope}, pointwise max rise {max_rise:.1e}",
                    windows.len()
                ));
            } else {
                let nonincreasing = max_rise <= 1e-12 && !rows.is_empty();
                ok &= nonincreasing;
                detail.push(format!("{name} c={c} {range}: non-increasing {nonincreasing}"));
            }
        }
    }
    Ok((ok, detail.join("; ")))
}

fn criterion_10() -> Outcome {
    let g = parse_group("product:2,3").map_err(err)?;
    let aut = g.automaton.unwrap();
    let rep = builtin_representation("modular", &g.oracle).map_err(err)?.aligned_to(aut.alphabet()).map_err(err)?;
    let proc = parry_process(&aut, &rep)?;
    let p = proc.chain().period().map_err(err)?;
    let hat = hat_process(&proc, p).map_err(err)?;
    let steps = 12;
    let samples = 100_000u64;
    // integer matrices: the law is atomic, and the two routes round the same
    // atom differently
    let atom = |x: f64| (x * 1e9).round() / 1e9;
    let base: Vec<f64> = (0..samples).map(|i| atom(simulate(&proc, steps, 10, i).log_norm[steps - 1])).collect();
    let lifted: Vec<f64> =
        (0..samples).map(|i| atom(simulate(&hat, steps / p, 11, i).log_norm[steps / p - 1])).collect();
    let ks = ks_two_sample(&base, &lifted).map_err(err)?;
    Ok((
        ks.p_value > 1e-3,
        format!("period {p}, hat chain {} states; KS {:.4}, p-value {:.3}", hat.chain().len(), ks.statistic, ks.p_value),
    ))
}

fn criterion_11(s: &Sanov) -> Outcome {
    let proc = s.parry_process()?;
    let sim = estimate_lambda_sigma(&proc, 100_000, 32, 5000, 111).map_err(err)?;
    let sigma = sim.sigma2.sqrt();
    let lambda = s.counting.lambda;

    let ps = PattersonSullivan::new(&s.aut).map_err(err)?;
    let cfg = RayConfig { length: 10_000, trials: 1000, lambda, sigma, eps: vec![0.2 * lambda], seed: 11 };
    let report = ray_statistics(&ps, &s.f, &cfg).map_err(err)?;
    let w = report.wiener.as_ref().ok_or("no Wiener marginals")?;
    let mut worst: f64 = 0.0;
    for i in 0..w.times.len() {
        for j in 0..w.times.len() {
            let target = w.times[i].min(w.times[j]);
            worst = worst.max((w.covariance[i][j] - target).abs() / target);
        }
    }
    let wiener_ok = worst < 0.15;

    let coin = coin_diagonal_process().map_err(err)?;
    let ln2 = std::f64::consts::LN_2;
    let ratio = 2f64.powf(0.25);
    let coin_lil = lil_statistic(&coin, 1_000_000, 200, ln2, ln2, ratio, 12).map_err(err)?.fraction_max_in(0.5, 1.5);
    let sanov_lil = lil_statistic(&proc, 1_000_000, 200, lambda, sigma, ratio, 13).map_err(err)?.fraction_max_in(0.5, 1.5);
    Ok((
        wiener_ok && coin_lil >= 0.7 && sanov_lil >= 0.7,
        format!(
            "ray covariance at t=1/4,1/2,1 worst relative error {worst:.3} (sigma {sigma:.4}); \
             LIL fraction in [0.5,1.5]: coin {coin_lil:.3}, Sanov Parry {sanov_lil:.3}"
        ),
    ))
}

fn criterion_12() -> Outcome {
    let f2 = parse_group("free:2").map_err(err)?;
    let ps = PattersonSullivan::new(f2.automaton.as_ref().unwrap()).map_err(err)?;
    let q = ps.quasiconformality_report(&f2.oracle, 8, 0.5).map_err(err)?;
    let exact = (q.min - 0.75).abs() <= 1e-9 && (q.max - 0.75).abs() <= 1e-9;

    let z = parse_group("product:2,3").map_err(err)?;
    let ps = PattersonSullivan::new(z.automaton.as_ref().unwrap()).map_err(err)?;
    let qz = ps.quasiconformality_report(&z.oracle, 8, 0.5).map_err(err)?;
    Ok((
        exact && qz.ratio() <= 4.0,
        format!(
            "free(2) |g|=1..8 ({} elements): [{:.12}, {:.12}]; Z2*Z3 |g|<=8 max/min {:.3}",
            q.elements,
            q.min,
            q.max,
            qz.ratio()
        ),
    ))
}

fn criterion_13() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_hyperlab");
    let runs: &[&[&str]] = &[
        &["analyze", "--group", "product:2,3"],
        &["validate", "--group", "free:2", "--depth", "6"],
        &["count", "--group", "free:2", "--rep", "sanov", "--exact-to", "8", "--mc-depths", "30,60", "--samples", "2000"],
        &["simulate", "--group", "free:2", "--rep", "sanov", "--length", "512", "--trials", "200"],
        &["simulate", "--process", "coin", "--length", "256", "--trials", "200"],
        &["boundary", "--group", "free:2", "--rep", "sanov", "--length", "512", "--trials", "100"],
        &["clt-compare", "--group", "product:2,3", "--exact-to", "8"],
    ];
    let mut identical = 0;
    let mut notes = Vec::new();
    for args in runs {
        let mut outs = Vec::new();
        for workers in ["1", "2"] {
            let out = Command::new(bin).args(*args).args(["--seed", "13", "--workers", workers]).output().map_err(err)?;
            if !out.status.success() {
                return Ok((false, format!("`{}` exited with {}", args.join(" "), out.status)));
            }
            outs.push(out.stdout);
        }
        if outs[0] == outs[1] && !outs[0].is_empty() {
            identical += 1;
        } else {
            notes.push(args[0].to_string());
        }
    }
    Ok((
        identical == runs.len(),
        format!("{identical}/{} commands byte-identical across runs{}", runs.len(), if notes.is_empty() {
            String::new()
        } else {
            format!(" (differ: {})", notes.join(","))
        }),
    ))
}

fn main() {
    let start = Instant::now();
    // HYPERLAB_ACCEPTANCE=3,10 runs a subset
    let only: Option<Vec<String>> =
        std::env::var("HYPERLAB_ACCEPTANCE").ok().map(|v| v.split(',').map(|s| s.trim().to_string()).collect());
    let sanov: OnceCell<Result<Sanov, String>> = OnceCell::new();
    let with_sanov = |f: fn(&Sanov) -> Outcome| -> Outcome {
        match sanov.get_or_init(Sanov::new) {
            Ok(s) => f(s),
            Err(e) => Err(e.clone()),
        }
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1", Box::new(criterion_1)),
        ("2", Box::new(criterion_2)),
        ("3", Box::new(criterion_3)),
        ("4", Box::new(criterion_4)),
        ("5", Box::new(|| with_sanov(criterion_5))),
        ("6", Box::new(|| with_sanov(criterion_6))),
        ("7", Box::new(|| with_sanov(criterion_7))),
        ("8", Box::new(|| with_sanov(criterion_8))),
        ("9", Box::new(criterion_9)),
        ("10", Box::new(criterion_10)),
        ("11", Box::new(|| with_sanov(criterion_11))),
        ("12", Box::new(criterion_12)),
        ("13", Box::new(criterion_13)),
    ];

    let mut out = std::io::stdout().lock();
    let mut results: Vec<(&str, bool)> = Vec::new();
    for (id, run) in &criteria {
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == id)) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        let known = if !pass && KNOWN_RED.contains(id) { " [known red]" } else { "" };
        writeln!(
            out,
            "criterion {id:>2}: {}{known}  ({:.1}s) {detail}",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        )
        .unwrap();
        out.flush().unwrap();
        results.push((id, pass));
    }

    let passed = results.iter().filter(|r| r.1).count();
    let unexpected: Vec<&str> = results.iter().filter(|r| !r.1 && !KNOWN_RED.contains(&r.0)).map(|r| r.0).collect();
    writeln!(
        out,
        "acceptance: {passed}/{} criteria pass; known red: {}; unexpected failures: {} ({:.0}s)",
        results.len(),
        KNOWN_RED.join(","),
        if unexpected.is_empty() { "none".to_string() } else { unexpected.join(",") },
        start.elapsed().as_secs_f64()
    )
    .unwrap();
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
