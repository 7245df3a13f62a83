use std::collections::BTreeSet;

use proptest::prelude::*;

use pathplan::bench::{generate_instance, GeneratorParams};
use pathplan::chase::{chase, evaluate, LazyChase};
use pathplan::lang::{intersect_cfg_nfa, Cfg, GrammarSymbol, Nfa, Regex};
use pathplan::plan::{Atom, ConjunctiveQuery, Term, Word};
use pathplan::schema::{close_uids, derive_uids_from_functions, Alphabet, RelationSymbol, UidSet};

const RELATIONS: [&str; 3] = ["r", "s", "t"];

fn alphabet() -> Alphabet {
    Alphabet::from_relations(RELATIONS).unwrap()
}

fn symbol() -> impl Strategy<Value = RelationSymbol> {
    (0..RELATIONS.len(), any::<bool>()).prop_map(|(i, inv)| RelationSymbol::new(RELATIONS[i], inv))
}

fn uid_pairs() -> impl Strategy<Value = Vec<(RelationSymbol, RelationSymbol)>> {
    prop::collection::vec((symbol(), symbol()), 0..6)
}

fn word(max: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec(symbol(), 0..=max).prop_map(Word::new)
}

fn regex() -> impl Strategy<Value = Regex> {
    let leaf = prop_oneof![
        Just(Regex::Epsilon),
        Just(Regex::Empty),
        (0..2usize).prop_map(|i| Regex::Symbol(RelationSymbol::forward(["a", "b"][i]))),
    ];
    leaf.prop_recursive(4, 16, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..3).prop_map(Regex::Concat),
            prop::collection::vec(inner.clone(), 2..3).prop_map(Regex::Alt),
            inner.prop_map(|r| Regex::Star(Box::new(r))),
        ]
    })
}

fn ab() -> Vec<RelationSymbol> {
    vec![RelationSymbol::forward("a"), RelationSymbol::forward("b")]
}

/// Words of length at most `n` over `{a, b}`.
fn ab_words(n: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut layer = vec![Word::empty()];
    for _ in 0..n {
        layer = layer
            .iter()
            .flat_map(|w| {
                ab().into_iter().map(move |s| {
                    let mut v = w.0.clone();
                    v.push(s);
                    Word::new(v)
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Rule bodies over terminals `a`, `b` (`Ok`) and nonterminals S, A, B (`Err`).
fn rules() -> impl Strategy<Value = Vec<(usize, Vec<Result<usize, usize>>)>> {
    let item = prop_oneof![(0..2usize).prop_map(Ok), (0..3usize).prop_map(Err)];
    prop::collection::vec((0..3usize, prop::collection::vec(item, 0..4)), 1..7)
}

fn grammar(rules: &[(usize, Vec<Result<usize, usize>>)]) -> Cfg {
    let names = ["S", "A", "B"];
    let mut g = Cfg::with_terminals("S", &ab());
    for (lhs, rhs) in rules {
        let body: Vec<_> = rhs
            .iter()
            .map(|s| match s {
                Ok(t) => GrammarSymbol::Terminal(ab()[*t].clone()),
                Err(n) => GrammarSymbol::n(names[*n]),
            })
            .collect();
        g.add_production(names[*lhs], &body);
    }
    g
}

fn in_grammar(g: &Cfg, w: &Word) -> bool {
    g.nonterminals().iter().any(|n| n == g.start()) && g.derives(g.start(), w).unwrap()
}

proptest! {
    #[test]
    fn closure_is_reflexive_transitive_and_idempotent(pairs in uid_pairs()) {
        let a = alphabet();
        let c = close_uids(&pairs, &a).unwrap();
        for s in a.symbols() {
            prop_assert!(c.contains(s, s));
        }
        for (x, y) in c.iter() {
            for z in c.implied_by(y) {
                prop_assert!(c.contains(x, z));
            }
        }
        for (x, y) in &pairs {
            prop_assert!(c.contains(x, y));
        }
        prop_assert_eq!(close_uids(c.iter(), &a).unwrap(), c);
    }

    #[test]
    fn words_print_and_parse(w in word(6)) {
        prop_assert_eq!(w.to_string().parse::<Word>().unwrap(), w);
    }

    #[test]
    fn inverse_is_an_involution(s in symbol()) {
        prop_assert_eq!(s.inverse().inverse(), s.clone());
        prop_assert_ne!(s.inverse(), s);
    }

    #[test]
    fn automaton_transformations_keep_the_language(re in regex()) {
        let nfa = re.to_nfa();
        let words = nfa.words_up_to(&ab(), 5);
        prop_assert_eq!(&nfa.remove_epsilons().words_up_to(&ab(), 5), &words);
        prop_assert_eq!(&nfa.determinize().words_up_to(&ab(), 5), &words);
        let m = nfa.minimize();
        prop_assert_eq!(&m.words_up_to(&ab(), 5), &words);
        prop_assert_eq!(m.minimize().state_count(), m.state_count());
        prop_assert!(m.state_count() <= nfa.determinize().state_count().max(1));
    }

    #[test]
    fn grammar_normal_forms_keep_the_language(rs in rules()) {
        let g = grammar(&rs);
        let b = g.binarize();
        let t = g.trim();
        for w in ab_words(5) {
            let x = in_grammar(&g, &w);
            prop_assert_eq!(in_grammar(&b, &w), x, "binarized on {}", w);
            prop_assert_eq!(in_grammar(&t, &w), x, "trimmed on {}", w);
        }
        prop_assert_eq!(g.is_empty(), g.shortest_word_length().is_none());
    }

    #[test]
    fn enumeration_matches_membership(rs in rules()) {
        let g = grammar(&rs);
        let listed: BTreeSet<Word> = g.enumerate_words(5, usize::MAX).collect();
        let members: BTreeSet<Word> = ab_words(5).into_iter().filter(|w| in_grammar(&g, w)).collect();
        prop_assert_eq!(&listed, &members);
        if let Some(min) = members.iter().map(Word::len).min() {
            prop_assert_eq!(g.shortest_word_length(), Some(min));
        }
    }

    #[test]
    fn intersection_is_the_common_language(rs in rules(), re in regex()) {
        let g = grammar(&rs);
        let nfa: Nfa = re.to_nfa();
        let product = intersect_cfg_nfa(&g, &nfa);
        for w in ab_words(5) {
            let both = in_grammar(&g, &w) && nfa.accepts(&w);
            prop_assert_eq!(in_grammar(&product, &w), both, "on {}", w);
        }
    }

    #[test]
    fn chase_invariants(pairs in uid_pairs(), seed in symbol(), depth in 0usize..4) {
        let uids: UidSet = close_uids(&pairs, &alphabet()).unwrap();
        let c = chase(&seed, "a", &uids, depth);
        let again = chase(&seed, "a", &uids, depth);
        let facts: Vec<_> = c.facts().map(|(r, s, o)| (r.clone(), s.to_string(), o.to_string())).collect();
        let facts2: Vec<_> = again.facts().map(|(r, s, o)| (r.clone(), s.to_string(), o.to_string())).collect();
        prop_assert_eq!(&facts, &facts2);
        // at most one outgoing fact per element and symbol, both directions
        let mut seen = BTreeSet::new();
        for (r, s, o) in &facts {
            prop_assert!(seen.insert((r.clone(), s.clone())));
            prop_assert!(seen.insert((r.inverse(), o.clone())));
        }
        let deeper = chase(&seed, "a", &uids, depth + 1);
        for (r, s, o) in &facts {
            prop_assert!(deeper.contains(r, s, o));
        }
    }

    #[test]
    fn lazy_and_materialized_chase_agree(pairs in uid_pairs(), seed in symbol(), w in word(4), depth in 1usize..5) {
        let uids = close_uids(&pairs, &alphabet()).unwrap();
        // the path query w(a, x)
        let mut atoms = Vec::new();
        let mut prev = Term::Const("a".into());
        for (k, s) in w.symbols().iter().enumerate() {
            let next = Term::Var(format!("v{}", k + 1));
            atoms.push(Atom::new(s.clone(), prev, next.clone()));
            prev = next;
        }
        prop_assume!(!atoms.is_empty());
        let out = format!("v{}", atoms.len());
        let cq = ConjunctiveQuery::new(atoms, out).unwrap();
        let mut lazy = LazyChase::new(&seed, "a", "b", &uids, depth);
        let lazy_answers = evaluate(&mut lazy, &cq);
        let full = LazyChase::new(&seed, "a", "b", &uids, depth).materialize();
        let full_answers = full.evaluate(&cq);
        // fresh names follow expansion order, so only seed names are comparable
        let named = |xs: &BTreeSet<String>| xs.iter().filter(|x| *x == "a" || *x == "b").cloned().collect::<Vec<_>>();
        prop_assert_eq!(lazy_answers.len(), full_answers.len());
        prop_assert_eq!(named(&lazy_answers), named(&full_answers));
        // path queries embed at most once
        prop_assert!(full_answers.len() <= 1);
    }

    #[test]
    fn generated_instances_are_valid(seed in any::<u64>(), relations in 1usize..6, functions in 0usize..8, p in 0.0f64..=1.0) {
        let params = GeneratorParams { relations, functions, p_existential: p, max_body: 4 };
        let inst = generate_instance(&params, seed).unwrap();
        prop_assert_eq!(inst.functions.len(), functions);
        for f in &inst.functions {
            prop_assert!((1..=4).contains(&f.len()));
            prop_assert!(!f.outputs().is_empty());
            prop_assert!(f.body().iter().all(|s| inst.alphabet.contains(s)));
        }
        for (x, y) in derive_uids_from_functions(&inst.functions) {
            prop_assert!(inst.uids.contains(&x, &y));
        }
        prop_assert_eq!(&close_uids(inst.uids.iter(), &inst.alphabet).unwrap(), &inst.uids);
    }
}
