//! Randomized property suites. Each returns the number of cases run, or the
//! first failure after shrinking.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use proptest::prelude::*;
use proptest::sample::Index;
use proptest::test_runner::TestCaseError;

use rpqwidth::approximation::{mua_hom_bounded, ApproxLimits, WidthClass};
use rpqwidth::automata::{inverse_language, parse_regex, regular_path_pairs, sublanguage, Letter, Nfa};
use rpqwidth::decomposition::keylemma::nonbranching_paths;
use rpqwidth::decomposition::{
    exact_pathwidth, exact_treewidth, m0, make_locally_acyclic, pigeonhole, query_width, shorten_nonbranching, tag_atoms,
    SlotKind, TaggedTreeDecomposition, TreeDecomposition, Trio, WidthKind,
};
use rpqwidth::evaluation::{evaluate_naive, evaluate_pathwidth, evaluate_treewidth, optimal_decomposition, MATERIALIZATION_CAP};
use rpqwidth::graphdb::{load_db, GraphDb};
use rpqwidth::morphism::{cq_core, find_homomorphism, find_homomorphisms, homomorphic_images, is_isomorphic, quotient};
use rpqwidth::query_model::{
    condense, contract, enumerate_expansions, enumerate_refinements, parse_union, AtomTrace, C2rpq, ContractionMode, Uc2rpq, Var,
};
use rpqwidth::semantics::{canonical_db, contained_bounded, cq_contained, decide_semantic_width, replay_witness};
use rpqwidth::{DecompositionKind, Multigraph};

use super::gen::{self, check};
use super::oracles::{self, Db, OQuery, Re};

pub type Outcome = Result<u32, String>;

const AB: &[&str] = &["a", "b"];
const AB_INV: &[&str] = &["a", "b", "a^-"];

pub fn union(text: &str) -> Uc2rpq {
    parse_union(text).unwrap_or_else(|e| panic!("{text}: {e}"))
}

pub fn c2rpq(q: &OQuery) -> C2rpq {
    union(&q.render("Q")).disjuncts.remove(0)
}

pub fn graph_db(db: &Db) -> GraphDb {
    load_db(&db.render()).expect("generated database parses")
}

fn letters(w: &[String]) -> Vec<Letter> {
    w.iter().map(|t| Letter::parse(t).expect("token")).collect()
}

fn nfa_of(states: usize, trans: &[(usize, String, usize)], initial: &[usize], finals: &[usize]) -> Nfa {
    let t = trans.iter().map(|(p, l, q)| (*p, Letter::parse(l).expect("token"), *q));
    Nfa::new(states, t, initial.iter().copied(), finals.iter().copied()).expect("states in range")
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

/// Bounded expansions of `small` are all contained in `big`.
fn expansions_contained(small: &C2rpq, big: &Uc2rpq, bound: usize, limit: usize) -> Result<(), TestCaseError> {
    for e in enumerate_expansions(small, bound).take(limit) {
        let ok = cq_contained(&e.query, big).map_err(|e| fail(e.to_string()))?;
        prop_assert!(ok, "expansion {:?} not contained", rpqwidth::query_model::render_query(&e.query));
    }
    Ok(())
}

fn eval_subset(small: &Uc2rpq, big: &Uc2rpq, db: &GraphDb) -> Result<(), TestCaseError> {
    let a = evaluate_naive(small, db);
    let b = evaluate_naive(big, db);
    prop_assert!(a.tuples.is_subset(&b.tuples), "{:?} not within {:?}", a.tuples, b.tuples);
    Ok(())
}

// ---------------------------------------------------------------- automata

/// Nfa membership agrees with the recursive matcher on all words of length
/// at most four over {a, b, a⁻}.
pub fn regex_membership() -> Outcome {
    let words = oracles::all_words(AB_INV, 4);
    check("regex_membership", 100, gen::re(AB_INV, 3), |re| {
        let nfa = parse_regex(&re.render()).map_err(|e| fail(e.to_string()))?;
        for w in &words {
            prop_assert_eq!(nfa.accepts(&letters(w)), oracles::matches(&re, w), "word {:?}", w);
        }
        Ok(())
    })
}

/// Sublanguages are exactly the languages of runs between two states, and
/// their union over initial and final states is the whole language.
pub fn sublanguages() -> Outcome {
    let words = oracles::all_words(AB, 4);
    check("sublanguages", 100, gen::nfa(4, AB), |(n, trans, init, fin)| {
        let a = nfa_of(n, &trans, &init, &fin);
        for q in 0..n {
            for q2 in 0..n {
                let sub = sublanguage(&a, q, q2).map_err(|e| fail(e.to_string()))?;
                for w in &words {
                    prop_assert_eq!(sub.accepts(&letters(w)), oracles::has_run(&trans, q, q2, w));
                }
            }
        }
        for w in &words {
            let any = init.iter().any(|&i| fin.iter().any(|&f| oracles::has_run(&trans, i, f, w)));
            prop_assert_eq!(a.accepts(&letters(w)), any);
        }
        Ok(())
    })
}

/// `w ∈ L` iff the reversed, inverted word is in `L⁻`; inversion is an
/// involution; and it matches the expression-level inverse.
pub fn inverse_words() -> Outcome {
    let words = oracles::all_words(AB_INV, 4);
    check("inverse_words", 100, gen::re(AB_INV, 3), |re| {
        let a = parse_regex(&re.render()).map_err(|e| fail(e.to_string()))?;
        let inv = inverse_language(&a);
        let back = inverse_language(&inv);
        let by_re = parse_regex(&oracles::inverse_re(&re).render()).map_err(|e| fail(e.to_string()))?;
        for w in &words {
            let iw = oracles::inverse_word(w);
            prop_assert_eq!(a.accepts(&letters(w)), inv.accepts(&letters(&iw)), "word {:?}", w);
            prop_assert_eq!(a.accepts(&letters(w)), back.accepts(&letters(w)));
            prop_assert_eq!(inv.accepts(&letters(w)), by_re.accepts(&letters(w)));
        }
        Ok(())
    })
}

/// Product reachability equals the relation-algebra semantics.
pub fn path_pairs() -> Outcome {
    check("path_pairs", 100, (gen::re(AB_INV, 3), gen::db(8, AB)), |(re, db)| {
        let a = parse_regex(&re.render()).map_err(|e| fail(e.to_string()))?;
        let got = regular_path_pairs(&a, &graph_db(&db));
        let want: BTreeSet<(String, String)> =
            oracles::re_relation(&re, &db).into_iter().map(|(u, v)| (Db::name(u), Db::name(v))).collect();
        prop_assert_eq!(got, want);
        Ok(())
    })
}

// ---------------------------------------------------------------- graphdb

/// Serialization round-trips the edge multiset; inverse expansion adds one
/// reversed edge per edge.
pub fn database_round_trip() -> Outcome {
    check("database_round_trip", 100, gen::db(12, AB), |db| {
        let g = graph_db(&db);
        let again = load_db(&g.serialize()).map_err(|e| fail(e.to_string()))?;
        let names = |g: &GraphDb| {
            let mut v: Vec<(String, Letter, String)> =
                g.edges().iter().map(|(u, l, w)| (g.node_name(*u).to_string(), l.clone(), g.node_name(*w).to_string())).collect();
            v.sort();
            v
        };
        prop_assert_eq!(names(&g), names(&again));
        let x = g.expand_inverses().map_err(|e| fail(e.to_string()))?;
        let edges = names(&x);
        for label in AB {
            let fwd: Vec<_> = edges.iter().filter(|(_, l, _)| *l == Letter::new(*label)).collect();
            let inv: Vec<_> = edges.iter().filter(|(_, l, _)| *l == Letter::inv(*label)).collect();
            prop_assert_eq!(fwd.len(), inv.len());
            for (u, _, w) in fwd {
                prop_assert!(edges.contains(&(w.clone(), Letter::inv(*label), u.clone())));
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- query model

/// Every bounded expansion of every refinement is contained in the query.
pub fn refinement_soundness() -> Outcome {
    check("refinement_soundness", 100, (gen::query(AB_INV, 2, 2, 3, 2), 1usize..=2), |(q, m)| {
        let g = c2rpq(&q);
        let gu = Uc2rpq::single(g.clone());
        let it = enumerate_refinements(&g, m);
        for i in 0..it.total().min(40) {
            let r = it.get(i).expect("in range");
            expansions_contained(&r.result, &gu, 2, 12)?;
        }
        Ok(())
    })
}

/// For a condensation ρ′ of ρ: expansions of ρ lie in ρ′, and expansions of
/// ρ′ lie in γ.
pub fn condensation_ordering() -> Outcome {
    let strat = (gen::query(AB_INV, 2, 2, 3, 2), 2usize..=3, any::<Index>(), any::<Index>());
    check("condensation_ordering", 100, strat, |(q, m, ri, pi)| {
        let g = c2rpq(&q);
        let gu = Uc2rpq::single(g.clone());
        let it = enumerate_refinements(&g, m);
        prop_assume!(it.total() > 0);
        let r = it.get(ri.index(it.total())).expect("in range");
        let candidates: Vec<(usize, usize, usize)> = r
            .per_atom
            .iter()
            .enumerate()
            .flat_map(|(a, t)| {
                let n = match t {
                    AtomTrace::Path { segments, .. } => segments.len(),
                    AtomTrace::EqualityCollapse => 0,
                };
                (0..n).flat_map(move |i| (i + 2..=n).map(move |j| (a, i, j)))
            })
            .collect();
        prop_assume!(!candidates.is_empty());
        let (a, i, j) = candidates[pi.index(candidates.len())];
        let rc = condense(&r, a, i, j).map_err(|e| fail(e.to_string()))?;
        expansions_contained(&r.result, &Uc2rpq::single(rc.result.clone()), 2, 12)?;
        expansions_contained(&rc.result, &gu, 2, 12)?;
        Ok(())
    })
}

/// Expansions with words of length at most `m` are, up to isomorphism,
/// the refinements of length at most `m` made only of letters.
pub fn expansions_are_letter_refinements() -> Outcome {
    check("expansions_are_letter_refinements", 100, gen::query(AB_INV, 2, 2, 3, 2), |q| {
        let g = c2rpq(&q);
        let m = 2;
        let exps: Vec<C2rpq> = enumerate_expansions(&g, m).map(|e| e.query).collect();
        let it = enumerate_refinements(&g, m);
        let refs: Vec<C2rpq> = (0..it.total())
            .map(|i| it.get(i).expect("in range"))
            .filter(|r| r.per_atom.iter().all(AtomTrace::is_all_letters))
            .map(|r| r.result)
            .collect();
        for e in &exps {
            prop_assert!(refs.iter().any(|r| is_isomorphic(r, e)), "expansion without refinement");
        }
        for r in &refs {
            prop_assert!(exps.iter().any(|e| is_isomorphic(r, e)), "letter refinement without expansion");
        }
        Ok(())
    })
}

/// Refinements of a query of tree-width at most `k >= 2` keep tree-width at
/// most `k`.
pub fn width_preservation(k: usize) -> Outcome {
    let name = format!("width_preservation_k{k}");
    check(&name, 100, gen::query(AB, 1, 6, 5, 2), |q| {
        let g = c2rpq(&q);
        let w = exact_treewidth(&g.underlying_multigraph()).map_err(|e| fail(e.to_string()))?.0;
        prop_assume!(w <= k);
        let it = enumerate_refinements(&g, 3);
        let total = it.total();
        let samples = total.min(60);
        for s in 0..samples {
            let r = it.get(s * total / samples).expect("in range");
            let rw = exact_treewidth(&r.result.underlying_multigraph()).map_err(|e| fail(e.to_string()))?.0;
            prop_assert!(rw <= k, "refinement of width {} from width {}", rw, w);
        }
        Ok(())
    })
}

/// Contraction in either mode leaves answers unchanged.
pub fn contraction_invariance() -> Outcome {
    check("contraction_invariance", 100, (gen::query(AB_INV, 2, 4, 5, 2), gen::db(12, AB)), |(q, db)| {
        let g = c2rpq(&q);
        let d = graph_db(&db);
        let base = evaluate_naive(&Uc2rpq::single(g.clone()), &d);
        for mode in [ContractionMode::TwoWay, ContractionMode::OneWay] {
            let c = contract(&g, mode);
            prop_assert_eq!(&evaluate_naive(&Uc2rpq::single(c), &d).tuples, &base.tuples, "{:?}", mode);
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- morphism

/// Homomorphism search agrees with the exhaustive map search on CQs.
pub fn homomorphism_oracle() -> Outcome {
    check("homomorphism_oracle", 200, (gen::cq(AB_INV, 4, 4, 1), gen::cq(AB_INV, 4, 3, 1)), |(s, d)| {
        prop_assume!(s.output.len() == d.output.len());
        let src = union(&s.render("S")).disjuncts.remove(0);
        let dst = union(&d.render("D")).disjuncts.remove(0);
        prop_assert_eq!(find_homomorphism(&src, &dst, false).is_some(), oracles::hom_exists(&s, &d));
        Ok(())
    })
}

/// A homomorphism γ → δ implies δ ⊑ γ on random databases; images contain
/// the query itself; the core is idempotent.
pub fn homomorphism_semantics() -> Outcome {
    let strat = (gen::query(AB_INV, 2, 3, 4, 2), gen::re(AB, 1), prop::collection::vec(any::<Index>(), 6), gen::db(10, AB));
    check("homomorphism_semantics", 100, strat, |(q, extra, parts, db)| {
        let g = c2rpq(&q);
        let mut bigger = q.clone();
        let vs = q.vars();
        bigger.atoms.push((vs[0].clone(), extra, vs[vs.len() - 1].clone()));
        let b = c2rpq(&bigger);
        let mut rgs = Vec::new();
        let mut blocks = 0;
        for (i, _) in b.vars.iter().enumerate() {
            let x = parts[i % parts.len()].index(blocks + 1);
            rgs.push(x);
            blocks = blocks.max(x + 1);
        }
        let delta = quotient(&b, &rgs);
        let homs = find_homomorphisms(&g, &delta, false).map_err(|e| fail(e.to_string()))?;
        prop_assert!(!homs.is_empty());
        let d = graph_db(&db);
        eval_subset(&Uc2rpq::single(delta.clone()), &Uc2rpq::single(g.clone()), &d)?;
        let imgs = homomorphic_images(&g);
        prop_assert!(is_isomorphic(&imgs[0].query, &g));
        Ok(())
    })
}

pub fn core_idempotent() -> Outcome {
    check("core_idempotent", 100, gen::cq(AB_INV, 5, 4, 2), |c| {
        let q = union(&c.render("C")).disjuncts.remove(0);
        let core = cq_core(&q).map_err(|e| fail(e.to_string()))?;
        let again = cq_core(&core).map_err(|e| fail(e.to_string()))?;
        prop_assert!(is_isomorphic(&core, &again));
        prop_assert!(find_homomorphism(&q, &core, false).is_some());
        prop_assert!(find_homomorphism(&core, &q, false).is_some());
        Ok(())
    })
}

// ---------------------------------------------------------------- decomposition

/// Exact tree-width and path-width agree with elimination orders and
/// vertex separation on every graph with at most `max_n` vertices.
pub fn exhaustive_small_graphs(max_n: usize) -> Result<usize, String> {
    let mut checked = 0;
    for n in 1..=max_n {
        let perms = oracles::permutations(n);
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        for mask in 0u32..(1 << pairs.len()) {
            let edges: Vec<(usize, usize)> =
                pairs.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, p)| *p).collect();
            let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
            let iso: Vec<&str> = names.iter().map(String::as_str).collect();
            let g = Multigraph::from_edges(&iso, edges.iter().map(|&(u, v)| (names[u].as_str(), names[v].as_str())));
            let (tw, td) = exact_treewidth(&g).map_err(|e| e.to_string())?;
            let (pw, pd) = exact_pathwidth(&g).map_err(|e| e.to_string())?;
            let want_tw = oracles::treewidth_by_elimination(n, &edges, &perms);
            let want_pw = oracles::pathwidth_by_separation(n, &edges, &perms);
            if tw != want_tw || pw != want_pw {
                return Err(format!("n={n} edges {edges:?}: tw {tw} vs {want_tw}, pw {pw} vs {want_pw}"));
            }
            td.validate(&g).map_err(|e| format!("{edges:?}: {e}"))?;
            pd.validate(&g).map_err(|e| format!("{edges:?}: {e}"))?;
            if td.width() != tw || pd.width() != pw {
                return Err(format!("{edges:?}: decomposition width differs from reported width"));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

/// Making a decomposition fine keeps it valid and of the same width.
pub fn make_fine_preserves() -> Outcome {
    check("make_fine_preserves", 100, gen::graph(8), |(n, edges)| {
        let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let iso: Vec<&str> = names.iter().map(String::as_str).collect();
        let g = Multigraph::from_edges(&iso, edges.iter().map(|&(u, v)| (names[u].as_str(), names[v].as_str())));
        for (w, d) in [exact_treewidth(&g).unwrap(), exact_pathwidth(&g).unwrap()] {
            let f = d.make_fine();
            prop_assert!(f.is_fine());
            prop_assert!(f.validate(&g).is_ok());
            prop_assert_eq!(f.width(), w);
        }
        Ok(())
    })
}

/// For 1000 sequences meeting the hypotheses, the search finds a pair with
/// equal non-avoid values at distance at least `d` and no trap between.
pub fn pigeonhole_search() -> Outcome {
    let strat = (0usize..=3, 1usize..=4, 1usize..=4, 0usize..=6).prop_flat_map(|(t, d, n, extra)| {
        let m = 2 * (t + 1) * d * (n + 1) + 2 * t + extra;
        (Just((t, d, n)), prop::collection::vec(0..(n + 2), m), prop::collection::vec(any::<Index>(), t))
    });
    check("pigeonhole", 1000, strat, |((t, d, n), codes, traps)| {
        let m = codes.len();
        let mut seq: Vec<SlotKind<usize>> = codes.iter().map(|&c| if c < n { SlotKind::Profile(c) } else { SlotKind::Avoid }).collect();
        // at most half avoids
        let mut avoids = seq.iter().filter(|s| **s == SlotKind::Avoid).count();
        for s in seq.iter_mut() {
            if avoids * 2 <= m {
                break;
            }
            if *s == SlotKind::Avoid {
                *s = SlotKind::Profile(0);
                avoids -= 1;
            }
        }
        for ix in &traps {
            seq[ix.index(m)] = SlotKind::Trap;
        }
        let traps_used = seq.iter().filter(|s| **s == SlotKind::Trap).count();
        prop_assert!(traps_used <= t);
        prop_assert!(seq.iter().filter(|s| **s == SlotKind::Avoid).count() * 2 <= m);
        let Some((i, j)) = pigeonhole(&seq, d) else {
            return Err(fail(format!("no pair found in {seq:?}")));
        };
        prop_assert!(i < j && j - i >= d);
        prop_assert!(matches!(seq[i], SlotKind::Profile(_)));
        prop_assert_eq!(&seq[i], &seq[j]);
        prop_assert!(seq[i..=j].iter().all(|s| *s != SlotKind::Trap));
        Ok(())
    })
}

// ---------------------------------------------------------------- key lemma

/// A trio built from a random refinement and a random variable merge, with
/// an optimal decomposition of the image.
pub fn random_trio(q: &OQuery, m: usize, ri: Index, parts: &[Index]) -> Option<(Trio, TaggedTreeDecomposition)> {
    let g = c2rpq(q);
    let it = enumerate_refinements(&g, m);
    if it.total() == 0 {
        return None;
    }
    let r = it.get(ri.index(it.total()))?;
    let vars: Vec<Var> = r.result.vars.iter().cloned().collect();
    let mut rep: Vec<Var> = Vec::new();
    let mut f = BTreeMap::new();
    for (i, v) in vars.iter().enumerate() {
        let b = parts[i % parts.len()].index(rep.len() + 2).min(rep.len());
        if b == rep.len() {
            rep.push(v.clone());
        }
        f.insert(v.clone(), rep[b].clone());
    }
    let trio = Trio::onto_image(r, f, "alpha");
    let (_, dec) = exact_treewidth(&trio.alpha.underlying_multigraph()).ok()?;
    let ttd = tag_atoms(&trio.rho.result, &dec, Some(&trio.f)).ok()?;
    Some((trio, ttd))
}

fn trio_post(before: &Trio, after: &Trio, ttd: &TaggedTreeDecomposition, k: usize, db: &GraphDb) -> Result<(), TestCaseError> {
    ttd.check(after).map_err(|e| fail(format!("tagging: {e}")))?;
    prop_assert!(ttd.dec.is_fine(), "not fine");
    prop_assert!(ttd.is_locally_acyclic(after), "not locally acyclic");
    prop_assert!(ttd.dec.width() <= k, "width {} above {}", ttd.dec.width(), k);
    prop_assert!(after.is_strong_onto(), "not strong onto");
    let big = Uc2rpq::single(after.alpha.clone());
    expansions_contained(&before.alpha, &big, 2, 20)?;
    eval_subset(&Uc2rpq::single(before.alpha.clone()), &big, db)?;
    Ok(())
}

fn within_m0(trio: &Trio, ttd: &TaggedTreeDecomposition, k: usize) -> Result<(), TestCaseError> {
    let bound = m0(trio.rho.base.atoms.len(), k);
    for p in nonbranching_paths(&ttd.dec) {
        prop_assert!(BigUint::from(p.len()) < bound, "non-branching path of {} bags", p.len());
    }
    Ok(())
}

/// Both rewrites on random trios: fine, width at most `k`, locally acyclic,
/// strong onto, non-branching paths below `m₀`, and α ⊑ α′. Atomic bags of
/// the input number at most twice the atoms.
pub fn random_trios() -> Outcome {
    let strat = (gen::query(AB_INV, 2, 3, 4, 2), 2usize..=4, any::<Index>(), prop::collection::vec(any::<Index>(), 8), gen::db(8, AB));
    check("random_trios", 100, strat, |(q, m, ri, parts, db)| {
        let Some((trio, ttd)) = random_trio(&q, m, ri, &parts) else {
            return Err(TestCaseError::reject("no refinement"));
        };
        let g_atoms = trio.rho.base.atoms.len();
        prop_assert!(ttd.atomic_bags(&trio).len() <= 2 * g_atoms);
        let restricted = ttd.restrict_to_tags();
        // isolated variables may fall outside the tagged subtree
        restricted.dec.check_tree().map_err(|e| fail(format!("restriction: {e}")))?;
        for (i, a) in trio.rho.result.atoms.iter().enumerate() {
            let bag = &restricted.dec.bags[restricted.tags[i]];
            prop_assert!(bag.contains(trio.map(&a.src)) && bag.contains(trio.map(&a.dst)), "atom {} lost its bag", i);
        }
        prop_assert!(restricted.dec.width() <= ttd.dec.width());
        let k = ttd.dec.width().max(1);
        let d = graph_db(&db);
        let (t2, ttd2) = make_locally_acyclic(&trio, &ttd);
        trio_post(&trio, &t2, &ttd2, k, &d)?;
        let (t3, ttd3) = shorten_nonbranching(&t2, &ttd2, k, 0).map_err(|e| fail(e.to_string()))?;
        trio_post(&trio, &t3, &ttd3, k, &d)?;
        within_m0(&t3, &ttd3, k)?;
        Ok(())
    })
}

/// Path decomposition {t0,t1},{t1},{t1,t2},… along a refinement path.
pub fn chain_decomposition(p: &[Var]) -> TreeDecomposition {
    let mut bags = Vec::new();
    for w in p.windows(2) {
        if !bags.is_empty() {
            bags.push(BTreeSet::from([w[0].clone()]));
        }
        bags.push(BTreeSet::from([w[0].clone(), w[1].clone()]));
    }
    TreeDecomposition::path(bags)
}

/// Minimal automata for `a*`, `(a.b)*`, `a.(b.a)*` and `(a|b.a)*`; Thompson
/// automata have too many states for long refinements.
fn chain_language(which: usize) -> Nfa {
    let t = |v: &[(usize, &str, usize)]| v.iter().map(|&(p, l, q)| (p, l.to_string(), q)).collect::<Vec<_>>();
    match which {
        0 => nfa_of(1, &t(&[(0, "a", 0)]), &[0], &[0]),
        1 => nfa_of(2, &t(&[(0, "a", 1), (1, "b", 0)]), &[0], &[0]),
        2 => nfa_of(2, &t(&[(0, "a", 1), (1, "b", 0)]), &[0], &[1]),
        _ => nfa_of(2, &t(&[(0, "a", 0), (0, "b", 1), (1, "a", 0)]), &[0], &[0]),
    }
}

/// Letter refinements of length 6 to 12 laid out along a chain: shortening
/// leaves a fine, width-1, locally acyclic decomposition with shorter paths.
pub fn long_chain_trios() -> Outcome {
    let strat = (0usize..4).prop_flat_map(|w| (Just(w), 6usize..=if w == 0 { 12 } else { 9 }, any::<Index>(), gen::db(8, AB)));
    check("long_chain_trios", 100, strat, |(which, n, pick, db)| {
        let atom = rpqwidth::Atom::new("x", std::sync::Arc::new(chain_language(which)), "y");
        let g = C2rpq::from_parts("G", vec!["x".into(), "y".into()], vec![atom], Vec::new());
        let it = enumerate_refinements(&g, n);
        let words: Vec<usize> =
            (0..it.total()).filter(|&i| it.get(i).is_some_and(|r| r.per_atom[0].len() == n && r.per_atom[0].is_all_letters())).collect();
        prop_assume!(!words.is_empty());
        let r = it.get(words[pick.index(words.len())]).expect("in range");
        let f: BTreeMap<Var, Var> = r.result.vars.iter().map(|v| (v.clone(), v.clone())).collect();
        let trio = Trio::onto_image(r, f, "alpha");
        let dec = chain_decomposition(&trio.rho.paths[0]);
        let ttd = tag_atoms(&trio.rho.result, &dec, Some(&trio.f)).map_err(|e| fail(e.to_string()))?;
        let d = graph_db(&db);
        let (t2, ttd2) = make_locally_acyclic(&trio, &ttd);
        trio_post(&trio, &t2, &ttd2, 1, &d)?;
        let (t3, ttd3) = shorten_nonbranching(&t2, &ttd2, 1, 0).map_err(|e| fail(e.to_string()))?;
        trio_post(&trio, &t3, &ttd3, 1, &d)?;
        within_m0(&t3, &ttd3, 1)?;
        let longest = |t: &TaggedTreeDecomposition| nonbranching_paths(&t.dec).iter().map(Vec::len).max().unwrap_or(0);
        prop_assert!(longest(&ttd3) <= longest(&ttd2));
        Ok(())
    })
}

// ---------------------------------------------------------------- evaluation

struct EngineRun {
    relations: usize,
}

fn engines_on(q: &OQuery, db: &Db) -> Result<EngineRun, TestCaseError> {
    let g = c2rpq(q);
    let d = graph_db(db);
    let want = oracles::named(&oracles::evaluate(q, db));
    let naive = evaluate_naive(&Uc2rpq::single(g.clone()), &d);
    prop_assert_eq!(&naive.tuples, &want, "naive vs oracle");
    let n = d.num_nodes() as u128;
    let (tq, ttd) = optimal_decomposition(&g, DecompositionKind::Tree).map_err(|e| fail(e.to_string()))?;
    let (tw, ts) = evaluate_treewidth(&tq, &d, &ttd, MATERIALIZATION_CAP).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(&tw.tuples, &want, "tw vs oracle");
    prop_assert!(ts.max_relation as u128 <= ts.size_bound, "bag relation {} above {}", ts.max_relation, ts.size_bound);
    let (pq, pd) = optimal_decomposition(&g, DecompositionKind::Path).map_err(|e| fail(e.to_string()))?;
    let (pw, ps) = evaluate_pathwidth(&pq, &d, &pd).map_err(|e| fail(e.to_string()))?;
    prop_assert_eq!(&pw.tuples, &want, "pw vs oracle");
    let outputs = n.saturating_pow(g.output.len() as u32);
    prop_assert!(ps.max_relation as u128 <= ps.size_bound.saturating_mul(outputs), "frontier {} too large", ps.max_relation);
    Ok(EngineRun { relations: ts.bags })
}

fn small_width(q: &OQuery) -> bool {
    query_width(&c2rpq(q), WidthKind::TreeWidth).is_ok_and(|w| w <= 2)
}

/// Naive, tree-decomposition and path-decomposition engines agree with the
/// relation-algebra oracle on queries of width at most two.
pub fn engine_agreement() -> Outcome {
    let strat = (gen::query(AB_INV, 2, 4, 4, 2).prop_filter("width at most 2", small_width), gen::db(12, AB));
    check("engine_agreement", 200, strat, |(q, db)| engines_on(&q, &db).map(|_| ()))
}

/// Every bag relation built by the tree-decomposition engine stays within
/// `|V|^(k+1)`; returns the number of bag relations checked.
pub fn size_guard() -> Result<usize, String> {
    let counted = std::cell::Cell::new(0usize);
    let strat = (gen::query(AB_INV, 2, 5, 5, 2), gen::db(12, AB));
    check("size_guard", 200, strat, |(q, db)| {
        let run = engines_on(&q, &db)?;
        counted.set(counted.get() + run.relations);
        Ok(())
    })?;
    Ok(counted.get())
}

// ---------------------------------------------------------------- approximation

fn small_queries() -> impl Strategy<Value = OQuery> {
    gen::query(AB, 2, 2, 3, 2)
}

fn class_strategy() -> impl Strategy<Value = WidthClass> {
    (prop::sample::select(&WidthKind::ALL[..]), 1usize..=2).prop_map(|(kind, k)| WidthClass::new(kind, k).expect("k positive"))
}

/// Every disjunct is certified and in the class, and the union returns a
/// subset of the query's answers.
pub fn under_approximation() -> Outcome {
    let strat = (small_queries(), class_strategy(), 1usize..=2, gen::db(10, AB));
    check("under_approximation", 100, strat, |(q, cls, m, db)| {
        let g = Uc2rpq::single(c2rpq(&q));
        let app = mua_hom_bounded(&g, cls, m, ApproxLimits::default()).map_err(|e| fail(e.to_string()))?;
        app.validate().map_err(fail)?;
        eval_subset(&app.union, &g, &graph_db(&db))?;
        Ok(())
    })
}

/// The output for `m` embeds, up to isomorphism, in the output for `m + 1`.
pub fn monotonicity() -> Outcome {
    check("monotonicity", 100, (small_queries(), class_strategy()), |(q, cls)| {
        let g = Uc2rpq::single(c2rpq(&q));
        let a = mua_hom_bounded(&g, cls, 1, ApproxLimits::default()).map_err(|e| fail(e.to_string()))?;
        let b = mua_hom_bounded(&g, cls, 2, ApproxLimits::default()).map_err(|e| fail(e.to_string()))?;
        for d in &a.union.disjuncts {
            prop_assert!(b.union.disjuncts.iter().any(|e| is_isomorphic(d, e)), "lost {}", d.name);
        }
        Ok(())
    })
}

/// Expansions with words of length at most `m` whose tree-width is at most
/// `k` are contained in the approximation built with the same `m`; longer
/// expansions need `m` near the completeness bound.
pub fn small_expansions_captured() -> Outcome {
    let strat = (gen::query(AB, 2, 3, 4, 2), 2usize..=3, 1usize..=2);
    check("small_expansions_captured", 100, strat, |(q, k, m)| {
        let g = Uc2rpq::single(c2rpq(&q));
        let cls = WidthClass::new(WidthKind::TreeWidth, k).expect("k positive");
        let app = mua_hom_bounded(&g, cls, m, ApproxLimits::default()).map_err(|e| fail(e.to_string()))?;
        prop_assume!(app.exhaustive);
        for e in enumerate_expansions(&g.disjuncts[0], m).take(200) {
            let w = exact_treewidth(&e.query.underlying_multigraph()).map_err(|e| fail(e.to_string()))?.0;
            if w <= k {
                let ok = cq_contained(&e.query, &app.union).map_err(|e| fail(e.to_string()))?;
                prop_assert!(ok, "expansion of width {} missed", w);
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- semantics

fn pair_queries() -> impl Strategy<Value = (OQuery, OQuery)> {
    let side = || {
        (gen::re(AB_INV, 2), prop::collection::vec((prop::sample::select(&["x", "y", "z"][..]), gen::re(AB, 1), prop::sample::select(&["x", "y", "z"][..])), 0..=2))
            .prop_map(|(first, rest)| {
                let mut atoms = vec![("x".to_string(), first, "y".to_string())];
                atoms.extend(rest.into_iter().map(|(a, r, b)| (a.to_string(), r, b.to_string())));
                OQuery { output: vec!["x".into(), "y".into()], atoms }
            })
    };
    (side(), side())
}

/// Witnesses replay, their canonical databases separate the two queries,
/// exact yes answers hold on random databases, and a homomorphism δ → γ
/// rules out a no.
pub fn containment_verdicts() -> Outcome {
    check("containment_verdicts", 100, (pair_queries(), gen::db(8, AB)), |((a, b), db)| {
        let g = Uc2rpq::single(c2rpq(&a));
        let d = Uc2rpq::single(c2rpq(&b));
        let v = contained_bounded(&g, &d, 3).map_err(|e| fail(e.to_string()))?;
        if let Some(w) = &v.witness {
            prop_assert!(v.is_no());
            prop_assert!(replay_witness(&g, &d, w), "witness does not replay");
            let (cdb, _) = canonical_db(&w.query).map_err(|e| fail(e.to_string()))?;
            let tuple: Vec<&str> = w.query.output.iter().map(String::as_str).collect();
            prop_assert!(evaluate_naive(&g, &cdb).contains(&tuple), "canonical db misses γ");
            prop_assert!(!evaluate_naive(&d, &cdb).contains(&tuple), "canonical db satisfies δ");
        }
        if v.is_yes() && v.exact {
            eval_subset(&g, &d, &graph_db(&db))?;
        }
        if find_homomorphism(&d.disjuncts[0], &g.disjuncts[0], false).is_some() {
            prop_assert!(!v.is_no(), "hom δ → γ but verdict No");
        }
        // γ with an extra atom always maps back from γ
        let mut more = a.clone();
        more.atoms.push(("y".into(), Re::sym("b"), "x".into()));
        let gm = Uc2rpq::single(c2rpq(&more));
        prop_assert!(!contained_bounded(&gm, &g, 2).map_err(|e| fail(e.to_string()))?.is_no());
        Ok(())
    })
}

/// The approximation used by the decision procedure under-approximates.
pub fn decision_approximation_sound() -> Outcome {
    let strat = (small_queries(), gen::db(10, AB), prop::collection::vec(gen::db(6, AB), 3));
    check("decision_approximation_sound", 100, strat, |(q, db, more)| {
        let g = Uc2rpq::single(c2rpq(&q));
        let tw1 = WidthClass::new(WidthKind::TreeWidth, 1).expect("k positive");
        let d = decide_semantic_width(&g, tw1, 1, 2, ApproxLimits::default()).map_err(|e| fail(e.to_string()))?;
        for x in std::iter::once(&db).chain(&more) {
            eval_subset(&d.approximation.union, &g, &graph_db(x))?;
        }
        Ok(())
    })
}

/// Named suites for criterion-style reporting.
pub fn all_suites() -> Vec<(&'static str, fn() -> Outcome)> {
    vec![
        ("regex membership vs recursive matcher", regex_membership),
        ("sublanguages vs run enumeration", sublanguages),
        ("L⁻ word test", inverse_words),
        ("regular path pairs vs relation algebra", path_pairs),
        ("database round trip", database_round_trip),
        ("refinement soundness", refinement_soundness),
        ("condensation ordering", condensation_ordering),
        ("expansions are letter refinements", expansions_are_letter_refinements),
        ("width preservation k=2", || width_preservation(2)),
        ("width preservation k=3", || width_preservation(3)),
        ("contraction invariance", contraction_invariance),
        ("homomorphism vs exhaustive search", homomorphism_oracle),
        ("homomorphism semantics", homomorphism_semantics),
        ("core idempotent", core_idempotent),
        ("make_fine preserves width", make_fine_preserves),
        ("pigeonhole search", pigeonhole_search),
        ("random trios", random_trios),
        ("long chain trios", long_chain_trios),
        ("engine agreement", engine_agreement),
        ("under-approximation", under_approximation),
        ("monotonicity in m", monotonicity),
        ("small expansions captured", small_expansions_captured),
        ("containment verdicts", containment_verdicts),
        ("decision approximation sound", decision_approximation_sound),
    ]
}
