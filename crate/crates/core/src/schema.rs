//! Relation symbols, unary inclusion dependencies and atomic queries.
//!
//! Every relation `r` of the schema contributes two symbols to the alphabet:
//! `r` itself and its inverse `r-`, where `r-(b, a)` holds exactly when
//! `r(a, b)` holds. A unary inclusion dependency `r ⇝ s` states that every
//! element with an outgoing `r`-fact also has an outgoing `s`-fact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::plan::PathFunction;

/// A binary relation name together with its polarity.
///
/// The textual form appends `-` to the base name for the inverse
/// direction, e.g. `onAlbum-`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationSymbol {
    name: Arc<str>,
    inverted: bool,
}

impl RelationSymbol {
    pub fn new(name: impl AsRef<str>, inverted: bool) -> Self {
        RelationSymbol {
            name: Arc::from(name.as_ref()),
            inverted,
        }
    }

    pub fn forward(name: impl AsRef<str>) -> Self {
        Self::new(name, false)
    }

    pub fn base_name(&self) -> &str {
        &self.name
    }

    pub fn is_inverted(&self) -> bool {
        self.inverted
    }

    /// Flips the polarity. `s.inverse().inverse() == s` always holds.
    pub fn inverse(&self) -> Self {
        RelationSymbol {
            name: Arc::clone(&self.name),
            inverted: !self.inverted,
        }
    }
}

impl fmt::Display for RelationSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverted {
            write!(f, "{}-", self.name)
        } else {
            f.write_str(&self.name)
        }
    }
}

impl fmt::Debug for RelationSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for RelationSymbol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, inverted) = match s.strip_suffix('-') {
            Some(base) => (base, true),
            None => (s, false),
        };
        if name.is_empty() || name.ends_with('-') {
            return Err(Error::Parse(format!("invalid relation symbol `{s}`")));
        }
        Ok(RelationSymbol::new(name, inverted))
    }
}

/// Free-standing form of [`RelationSymbol::inverse`].
pub fn inverse(s: &RelationSymbol) -> RelationSymbol {
    s.inverse()
}

/// The ordered set of relation symbols a schema speaks about.
///
/// Declaration order matters: it fixes the terminal order of every grammar
/// built over the alphabet, and therefore the lexicographic order in which
/// words are enumerated. Each relation contributes `r` followed by `r-`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Alphabet {
    symbols: Vec<RelationSymbol>,
}

impl Alphabet {
    /// Builds the alphabet of the given relation names and their inverses.
    pub fn from_relations<I, S>(relations: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut alphabet = Alphabet::default();
        for rel in relations {
            let rel = rel.as_ref();
            let sym: RelationSymbol = rel.parse()?;
            if sym.is_inverted() {
                return Err(Error::Parse(format!(
                    "relation `{rel}` must be declared without an inverse marker"
                )));
            }
            if alphabet.contains(&sym) {
                continue;
            }
            alphabet.symbols.push(sym.clone());
            alphabet.symbols.push(sym.inverse());
        }
        Ok(alphabet)
    }

    pub fn symbols(&self) -> &[RelationSymbol] {
        &self.symbols
    }

    /// The non-inverted symbols, in declaration order.
    pub fn relations(&self) -> impl Iterator<Item = &RelationSymbol> {
        self.symbols.iter().filter(|s| !s.is_inverted())
    }

    pub fn contains(&self, s: &RelationSymbol) -> bool {
        self.symbols.contains(s)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn check(&self, s: &RelationSymbol) -> Result<()> {
        if self.contains(s) {
            Ok(())
        } else {
            Err(Error::UnknownRelation(s.to_string()))
        }
    }
}

/// A set of unary inclusion dependencies closed under implication.
///
/// Each pair `(r, s)` reads `r ⇝ s`. The set is transitively closed and
/// holds `(r, r)` for every symbol of the alphabet it was closed over.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct UidSet {
    pairs: BTreeSet<(RelationSymbol, RelationSymbol)>,
}

impl UidSet {
    pub fn contains(&self, from: &RelationSymbol, to: &RelationSymbol) -> bool {
        // avoid cloning for the lookup by scanning the range of `from`
        self.implied_by(from).any(|t| t == to)
    }

    /// All `s` with `from ⇝ s`.
    pub fn implied_by<'a>(
        &'a self,
        from: &'a RelationSymbol,
    ) -> impl Iterator<Item = &'a RelationSymbol> + 'a {
        self.pairs
            .iter()
            .skip_while(move |(r, _)| r < from)
            .take_while(move |(r, _)| r == from)
            .map(|(_, s)| s)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(RelationSymbol, RelationSymbol)> {
        self.pairs.iter()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn as_set(&self) -> &BTreeSet<(RelationSymbol, RelationSymbol)> {
        &self.pairs
    }
}

/// Closes `declared` under transitivity and adds `(r, r)` for every symbol.
///
/// The closure does not add `s- ⇝ r-` for `r ⇝ s`: that implication does not
/// hold for inclusion dependencies.
pub fn close_uids<'a, I>(declared: I, alphabet: &Alphabet) -> Result<UidSet>
where
    I: IntoIterator<Item = &'a (RelationSymbol, RelationSymbol)>,
{
    let mut succ: BTreeMap<&RelationSymbol, BTreeSet<&RelationSymbol>> = BTreeMap::new();
    for sym in alphabet.symbols() {
        succ.entry(sym).or_default().insert(sym);
    }
    for (r, s) in declared {
        alphabet.check(r)?;
        alphabet.check(s)?;
        let r = alphabet.symbols().iter().find(|x| *x == r).unwrap();
        let s = alphabet.symbols().iter().find(|x| *x == s).unwrap();
        succ.entry(r).or_default().insert(s);
    }

    // reachability from every symbol; the alphabet is small
    let mut pairs = BTreeSet::new();
    for &start in succ.keys() {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(cur) = stack.pop() {
            for &next in &succ[cur] {
                if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        pairs.extend(seen.into_iter().map(|t| (start.clone(), t.clone())));
    }
    Ok(UidSet { pairs })
}

/// Derives the dependencies implied by consecutive body atoms.
///
/// Whenever a function body contains `t` directly followed by `s`, the
/// element between them has an incoming `t` (so an outgoing `t-`) and an
/// outgoing `s`, which yields `t- ⇝ s`. The result is not closed.
pub fn derive_uids_from_functions<'a, I>(functions: I) -> BTreeSet<(RelationSymbol, RelationSymbol)>
where
    I: IntoIterator<Item = &'a PathFunction>,
{
    functions
        .into_iter()
        .flat_map(|f| {
            f.body()
                .windows(2)
                .map(|w| (w[0].inverse(), w[1].clone()))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// The query `q(x) <- r(a, x)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AtomicQuery {
    pub relation: RelationSymbol,
    pub constant: String,
    pub output: String,
}

impl AtomicQuery {
    pub fn new(relation: RelationSymbol, constant: impl Into<String>) -> Self {
        AtomicQuery {
            relation,
            constant: constant.into(),
            output: "x".to_string(),
        }
    }

    /// Checks that the query relation belongs to `alphabet`.
    pub fn validate(&self, alphabet: &Alphabet) -> Result<()> {
        alphabet.check(&self.relation)
    }
}

impl fmt::Display for AtomicQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "q({}) <- {}({}, {})",
            self.output, self.relation, self.constant, self.output
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(s: &str) -> RelationSymbol {
        s.parse().unwrap()
    }

    fn pair(a: &str, b: &str) -> (RelationSymbol, RelationSymbol) {
        (sym(a), sym(b))
    }

    #[test]
    fn inverse_flips_polarity() {
        assert_eq!(inverse(&sym("r")), sym("r-"));
        assert_eq!(inverse(&sym("r-")), sym("r"));
        assert_eq!(sym("onAlbum").inverse().to_string(), "onAlbum-");
        assert_ne!(sym("r"), sym("r-"));
    }

    #[test]
    fn parse_rejects_bad_symbols() {
        assert!("".parse::<RelationSymbol>().is_err());
        assert!("-".parse::<RelationSymbol>().is_err());
        assert!("r--".parse::<RelationSymbol>().is_err());
    }

    #[test]
    fn alphabet_interleaves_inverses() {
        let a = Alphabet::from_relations(["r", "s"]).unwrap();
        let shown: Vec<_> = a.symbols().iter().map(|s| s.to_string()).collect();
        assert_eq!(shown, ["r", "r-", "s", "s-"]);
        assert!(Alphabet::from_relations(["r-"]).is_err());
    }

    #[test]
    fn closing_nothing_gives_reflexive_pairs() {
        let a = Alphabet::from_relations(["r"]).unwrap();
        let u = close_uids(&[], &a).unwrap();
        let expected: BTreeSet<_> = [pair("r", "r"), pair("r-", "r-")].into();
        assert_eq!(u.as_set(), &expected);
    }

    #[test]
    fn closing_forces_transitivity() {
        let a = Alphabet::from_relations(["r", "s", "t"]).unwrap();
        let u = close_uids(&[pair("r", "s"), pair("s", "t")], &a).unwrap();
        assert!(u.contains(&sym("r"), &sym("t")));
        assert!(!u.contains(&sym("t"), &sym("r")));
        // no inverse closure
        assert!(!u.contains(&sym("s-"), &sym("r-")));
    }

    #[test]
    fn closing_music_dependency() {
        let a = Alphabet::from_relations(["onAlbum", "sang", "relAlbum"]).unwrap();
        let u = close_uids(&[pair("sang-", "onAlbum")], &a).unwrap();
        let mut expected: BTreeSet<_> =
            a.symbols().iter().map(|s| (s.clone(), s.clone())).collect();
        expected.insert(pair("sang-", "onAlbum"));
        assert_eq!(u.as_set(), &expected);
    }

    #[test]
    fn closing_rejects_unknown_symbols() {
        let a = Alphabet::from_relations(["r"]).unwrap();
        let err = close_uids(&[pair("r", "s")], &a).unwrap_err();
        assert_eq!(err, Error::UnknownRelation("s".into()));
    }

    #[test]
    fn implied_by_lists_targets() {
        let a = Alphabet::from_relations(["r", "s"]).unwrap();
        let u = close_uids(&[pair("r", "s-")], &a).unwrap();
        let targets: Vec<_> = u.implied_by(&sym("r")).cloned().collect();
        assert_eq!(targets, vec![sym("r"), sym("s-")]);
        assert_eq!(u.implied_by(&sym("s")).count(), 1);
    }

    #[test]
    fn derived_dependencies_from_bodies() {
        let details = PathFunction::new(
            "getAlbumDetails",
            vec![sym("onAlbum-"), sym("sang-")],
            vec![1, 2],
        )
        .unwrap();
        let single = PathFunction::new("f", vec![sym("r")], vec![1]).unwrap();
        let back = PathFunction::new("g", vec![sym("r"), sym("r-")], vec![2]).unwrap();

        let d = derive_uids_from_functions([&details]);
        assert_eq!(d, [pair("onAlbum", "sang-")].into());
        assert!(derive_uids_from_functions([&single]).is_empty());
        assert_eq!(
            derive_uids_from_functions([&back]),
            [pair("r-", "r-")].into()
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_declared() -> impl Strategy<Value = Vec<(usize, usize)>> {
            prop::collection::vec((0usize..8, 0usize..8), 0..10)
        }

        proptest! {
            #[test]
            fn closure_is_idempotent_superset_and_transitive(decl in arb_declared()) {
                let a = Alphabet::from_relations(["p", "q", "r", "s"]).unwrap();
                let syms = a.symbols();
                let declared: Vec<_> = decl.iter().map(|&(i, j)| (syms[i].clone(), syms[j].clone())).collect();
                let once = close_uids(&declared, &a).unwrap();
                let twice = close_uids(once.iter(), &a).unwrap();
                prop_assert_eq!(&once, &twice);
                for p in &declared {
                    prop_assert!(once.as_set().contains(p));
                }
                for (r, s) in once.iter() {
                    for t in once.implied_by(s) {
                        prop_assert!(once.contains(r, t));
                    }
                }
            }
        }
    }
}
