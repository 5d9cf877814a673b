//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a non-zero status if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wilson_index::clifford::{build_gamma_rep, GammaRep};
use wilson_index::continuum::continuum_index;
use wilson_index::gauge::{
    discretize, gauge_transform, make_generalized_link, random_gauge, ConnectionDescriptor, GeneralizedLink, LinkField,
};
use wilson_index::interp::{
    check_dirac_convergence, check_f_bounds, tent_overlap_sum, vertices_cube, partition_of_unity_defect,
    staple_gap_scan, unit_mass_defect, CellQuadrature, CombinedOperator, StapleConfig,
};
use wilson_index::latops::{a_priori_check, wilson_dirac, wilson_term};
use wilson_index::overlap::{build_overlap, gw_residual, overlap_index};
use wilson_index::spectral::{eta, spectral_flow, AffineFamily, MassGrid};

const CHARGES: [i64; 7] = [-3, -2, -1, 0, 1, 2, 3];
const SIZES: [usize; 2] = [12, 16];
const M: f64 = 1.0;
const MASS_POINTS: usize = 65;
const CONTINUUM_CUTOFF: usize = 8;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn link(q: i64) -> GeneralizedLink {
    let desc = if q == 0 { ConnectionDescriptor::trivial(2, 1) } else { ConnectionDescriptor::u1_flux(q) };
    make_generalized_link(desc).expect("valid descriptor")
}

struct SuiteField {
    charge: i64,
    size: usize,
    lf: LinkField,
}

fn suite_fields() -> Vec<SuiteField> {
    let mut out = Vec::new();
    for q in CHARGES {
        for size in SIZES {
            out.push(SuiteField { charge: q, size, lf: discretize(&link(q), size).unwrap() });
        }
    }
    out
}

fn label(f: &SuiteField) -> String {
    format!("Q={} N={}", f.charge, f.size)
}

/// Wilson index, `η(−M)`, `η(+M)`, overlap index.
fn invariants(lf: &LinkField, rep: &GammaRep) -> wilson_index::Result<(i64, i64, i64)> {
    let minus = eta(&wilson_dirac(lf, rep, -M)?)?.eta;
    let plus = eta(&wilson_dirac(lf, rep, M)?)?.eta;
    let ov = overlap_index(&build_overlap(lf, rep, M)?)?;
    Ok((minus, plus, ov))
}

/// Criteria 1 and 8 share the spectral flows.
fn index_and_flow(rep: &GammaRep, fields: &[SuiteField]) -> (Outcome, Outcome) {
    let grid = MassGrid::uniform(M, MASS_POINTS).unwrap();
    let mut bad_index = Vec::new();
    let mut bad_flow = Vec::new();
    for f in fields {
        let flow = AffineFamily::wilson(&f.lf, rep).and_then(|fam| spectral_flow(&fam, &grid, None));
        let inv = invariants(&f.lf, rep);
        let cont = continuum_index(link(f.charge).descriptor(), rep, CONTINUUM_CUTOFF);
        match (&flow, &inv, &cont) {
            (Ok(fl), Ok((minus, _, ov)), Ok(ci)) => {
                let w = -minus / 2;
                if !(w == f.charge && *ov == f.charge && fl.sf == f.charge && *ci == f.charge) {
                    bad_index.push(format!("{}: wilson {w} overlap {ov} sf {} continuum {ci}", label(f), fl.sf));
                }
            }
            _ => bad_index.push(format!(
                "{}: {:?} {:?} {:?}",
                label(f),
                flow.as_ref().err(),
                inv.as_ref().err(),
                cont.as_ref().err()
            )),
        }
        match &flow {
            Ok(fl) if fl.sf == fl.sf_from_eta() => {}
            Ok(fl) => bad_flow.push(format!("{}: crossings {} eta {}", label(f), fl.sf, fl.sf_from_eta())),
            Err(e) => bad_flow.push(format!("{}: {e}", label(f))),
        }
    }
    let n = fields.len();
    (
        outcome(bad_index.is_empty(), if bad_index.is_empty() { format!("{n} fields, all four indices = Q") } else { bad_index.join("; ") }),
        outcome(bad_flow.is_empty(), if bad_flow.is_empty() { format!("{n} runs, crossings = eta difference") } else { bad_flow.join("; ") }),
    )
}

fn eta_positive_masses(rep: &GammaRep, fields: &[SuiteField]) -> Outcome {
    let masses = [0.25, 0.5, 1.0, 2.0];
    let mut bad = Vec::new();
    for f in fields {
        for m in masses {
            match wilson_dirac(&f.lf, rep, m).and_then(|h| eta(&h)) {
                Ok(e) if e.eta == 0 => {}
                Ok(e) => bad.push(format!("{} m={m}: eta {}", label(f), e.eta)),
                Err(e) => bad.push(format!("{} m={m}: {e}", label(f))),
            }
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { format!("{} fields × {} masses", fields.len(), masses.len()) } else { bad.join("; ") })
}

fn wilson_term_positivity(rep: &GammaRep, fields: &[SuiteField]) -> Outcome {
    let mut worst = f64::INFINITY;
    for f in fields {
        let min = wilson_term(&f.lf, rep).and_then(|w| w.eigenvalues()).map(|v| v[0]).unwrap_or(f64::NEG_INFINITY);
        worst = worst.min(min);
    }
    outcome(worst >= -1e-10, format!("min eig W = {worst:.3e}"))
}

fn a_priori(rep: &GammaRep) -> Outcome {
    let mut violations = 0;
    let mut bad = Vec::new();
    let mut worst_margin = f64::NEG_INFINITY;
    for q in CHARGES {
        for size in [8, 16] {
            let lf = discretize(&link(q), size).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + size as u64 + (q + 10) as u64 * 100);
            match a_priori_check(&lf, rep, 1000, &mut rng) {
                Ok(r) => {
                    violations += r.violations;
                    worst_margin = worst_margin.max(r.worst_sample - r.constant);
                }
                Err(e) => bad.push(format!("Q={q} N={size}: {e}")),
            }
        }
    }
    outcome(
        violations == 0 && bad.is_empty(),
        format!("{violations} violations over 14 fields × 1000 vectors, max(sample − C) = {worst_margin:.3}{}", bad.join("; ")),
    )
}

fn ginsparg_wilson(rep: &GammaRep, fields: &[SuiteField]) -> Outcome {
    let mut worst = 0.0f64;
    let mut control = f64::INFINITY;
    let mut bad = Vec::new();
    for f in fields {
        match build_overlap(&f.lf, rep, M) {
            Ok(ov) => {
                worst = worst.max(gw_residual(&ov));
                control = control.min(gw_residual(&ov.corrupted().unwrap()));
            }
            Err(e) => bad.push(format!("{}: {e}", label(f))),
        }
    }
    outcome(
        worst < 1e-9 && control > 0.1 && bad.is_empty(),
        format!("max residual {worst:.3e}, min corrupted residual {control:.3}{}", bad.join("; ")),
    )
}

fn interp_scaling(rep: &GammaRep) -> Outcome {
    let sizes = [4, 8, 16];
    let mut ok = true;
    let mut parts = Vec::new();
    for q in [0, 1] {
        let l = link(q);
        match (check_f_bounds(&l, rep, &sizes, 5, 10, 7), check_dirac_convergence(&l, rep, &sizes, 4, 3, 9)) {
            (Ok(b), Ok(d)) => {
                ok &= b.residual_order >= 0.8 && b.reconstruction_decreasing && d.order >= 0.8;
                parts.push(format!(
                    "Q={q}: f*f order {:.2}, ff* decreasing {}, Dirac order {:.2}",
                    b.residual_order, b.reconstruction_decreasing, d.order
                ));
            }
            (b, d) => {
                ok = false;
                parts.push(format!("Q={q}: {:?} {:?}", b.err(), d.err()));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

fn staple(rep: &GammaRep) -> Outcome {
    let cfg = StapleConfig::new(M);
    let mut ok = true;
    let mut parts = Vec::new();
    for q in [0, 1] {
        match staple_gap_scan(&link(q), rep, 16, 32, &cfg) {
            Ok(r) => parts.push(format!("Q={q}: min gap {:.4} at {:?}", r.min_gap, r.at)),
            Err(e) => {
                ok = false;
                parts.push(format!("Q={q}: {e}"));
            }
        }
    }
    match CombinedOperator::new(&link(1), rep, 16, 32, None).and_then(|op| op.min_abs_eig(0.0, 0.0)) {
        Ok(g) => {
            ok &= g < 1e-6;
            parts.push(format!("control gap {g:.3e}"));
        }
        Err(e) => {
            ok = false;
            parts.push(format!("control: {e}"));
        }
    }
    outcome(ok, parts.join("; "))
}

fn gauge_invariance(rep: &GammaRep, fields: &[SuiteField]) -> Outcome {
    let mut changed = Vec::new();
    for f in fields {
        let base = invariants(&f.lf, rep).ok();
        let mut rng = ChaCha8Rng::seed_from_u64(77 + f.size as u64 + (f.charge + 10) as u64 * 31);
        for t in 0..20 {
            let g = random_gauge(&mut rng, f.lf.lattice(), f.lf.n_c());
            let after = gauge_transform(&f.lf, &g).ok().and_then(|lf| invariants(&lf, rep).ok());
            if after.is_none() || after != base {
                changed.push(format!("{} transform {t}", label(f)));
            }
        }
    }
    outcome(changed.is_empty(), if changed.is_empty() { format!("{} fields × 20 transforms", fields.len()) } else { changed.join("; ") })
}

fn cutoff_identities() -> Outcome {
    let quad = CellQuadrature::new(8).unwrap();
    let mut pou = 0.0f64;
    let mut mass = 0.0f64;
    let mut overlap = 0.0f64;
    for size in [4, 8, 12, 16] {
        pou = pou.max(partition_of_unity_defect(2, size, 1000, size as u64));
        mass = mass.max(unit_mass_defect(2, size, &quad));
        overlap = overlap.max((tent_overlap_sum(2, size, &vertices_cube(2), &quad) - 1.0).abs());
    }
    outcome(
        pou < 1e-8 && mass < 1e-8 && overlap < 1e-8,
        format!("partition {pou:.2e}, unit mass {mass:.2e}, overlap sum {overlap:.2e}"),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let rep = build_gamma_rep(2).unwrap();
    let fields = suite_fields();

    let (c1, c8) = index_and_flow(&rep, &fields);
    let results = [
        ("1 index equality", c1),
        ("2 eta at positive mass", eta_positive_masses(&rep, &fields)),
        ("3 Wilson term positivity", wilson_term_positivity(&rep, &fields)),
        ("4 a priori estimate", a_priori(&rep)),
        ("5 Ginsparg-Wilson relation", ginsparg_wilson(&rep, &fields)),
        ("6 interpolation scaling", interp_scaling(&rep)),
        ("7 staple gap", staple(&rep)),
        ("8 two-method spectral flow", c8),
        ("9 gauge invariance", gauge_invariance(&rep, &fields)),
        ("10 cutoff identities", cutoff_identities()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed in {:.1}s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
