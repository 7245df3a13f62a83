use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::plan::Word;
use crate::schema::RelationSymbol;

/// A symbol on the right-hand side of a production, by name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GrammarSymbol {
    Terminal(RelationSymbol),
    Nonterminal(String),
}

impl GrammarSymbol {
    pub fn t(s: &RelationSymbol) -> Self {
        GrammarSymbol::Terminal(s.clone())
    }

    pub fn n(name: impl Into<String>) -> Self {
        GrammarSymbol::Nonterminal(name.into())
    }
}

/// Interned symbol: terminal or nonterminal index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Sym {
    T(usize),
    N(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Production {
    pub lhs: usize,
    pub rhs: Vec<Sym>,
}

/// A context-free grammar over relation symbols.
///
/// Terminals are ordered by first mention (or by the order given to
/// [`Cfg::with_terminals`]); that order is the lexicographic order used by
/// [`Cfg::enumerate_words`].
#[derive(Clone, Debug)]
pub struct Cfg {
    terminals: Vec<RelationSymbol>,
    terminal_index: HashMap<RelationSymbol, usize>,
    nonterminals: Vec<String>,
    nonterminal_index: HashMap<String, usize>,
    start: usize,
    productions: Vec<Production>,
    seen: BTreeSet<Production>,
    binarized: OnceLock<Arc<Cfg>>,
}

impl Cfg {
    pub fn new(start: &str) -> Self {
        let mut g = Cfg {
            terminals: Vec::new(),
            terminal_index: HashMap::new(),
            nonterminals: Vec::new(),
            nonterminal_index: HashMap::new(),
            start: 0,
            productions: Vec::new(),
            seen: BTreeSet::new(),
            binarized: OnceLock::new(),
        };
        g.start = g.intern_nonterminal(start);
        g
    }

    /// Fixes the terminal order up front.
    pub fn with_terminals<'a, I>(start: &str, terminals: I) -> Self
    where
        I: IntoIterator<Item = &'a RelationSymbol>,
    {
        let mut g = Cfg::new(start);
        for t in terminals {
            g.intern_terminal(t);
        }
        g
    }

    pub(crate) fn intern_terminal(&mut self, t: &RelationSymbol) -> usize {
        if let Some(&i) = self.terminal_index.get(t) {
            return i;
        }
        self.terminals.push(t.clone());
        self.terminal_index
            .insert(t.clone(), self.terminals.len() - 1);
        self.terminals.len() - 1
    }

    pub(crate) fn intern_nonterminal(&mut self, name: &str) -> usize {
        if let Some(&i) = self.nonterminal_index.get(name) {
            return i;
        }
        self.nonterminals.push(name.to_string());
        self.nonterminal_index
            .insert(name.to_string(), self.nonterminals.len() - 1);
        self.nonterminals.len() - 1
    }

    /// Adds `lhs -> rhs`; an empty `rhs` is an ε-production. Duplicates are
    /// ignored.
    pub fn add_production(&mut self, lhs: &str, rhs: &[GrammarSymbol]) {
        let lhs = self.intern_nonterminal(lhs);
        let rhs = rhs
            .iter()
            .map(|s| match s {
                GrammarSymbol::Terminal(t) => Sym::T(self.intern_terminal(t)),
                GrammarSymbol::Nonterminal(n) => Sym::N(self.intern_nonterminal(n)),
            })
            .collect();
        self.push(Production { lhs, rhs });
    }

    pub(crate) fn push(&mut self, p: Production) {
        if self.seen.insert(p.clone()) {
            self.productions.push(p);
            self.binarized = OnceLock::new();
        }
    }

    pub fn start(&self) -> &str {
        &self.nonterminals[self.start]
    }

    pub fn terminals(&self) -> &[RelationSymbol] {
        &self.terminals
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nonterminals
    }

    pub fn production_count(&self) -> usize {
        self.productions.len()
    }

    pub(crate) fn start_index(&self) -> usize {
        self.start
    }

    pub(crate) fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub(crate) fn terminal_id(&self, t: &RelationSymbol) -> Option<usize> {
        self.terminal_index.get(t).copied()
    }

    pub(crate) fn nonterminal_id(&self, name: &str) -> Option<usize> {
        self.nonterminal_index.get(name).copied()
    }

    /// Productions in readable form.
    pub fn production_list(&self) -> Vec<(String, Vec<GrammarSymbol>)> {
        self.productions
            .iter()
            .map(|p| {
                let rhs = p
                    .rhs
                    .iter()
                    .map(|s| match *s {
                        Sym::T(t) => GrammarSymbol::Terminal(self.terminals[t].clone()),
                        Sym::N(n) => GrammarSymbol::Nonterminal(self.nonterminals[n].clone()),
                    })
                    .collect();
                (self.nonterminals[p.lhs].clone(), rhs)
            })
            .collect()
    }

    pub fn has_production(&self, lhs: &str, rhs: &[GrammarSymbol]) -> bool {
        self.production_list()
            .iter()
            .any(|(l, r)| l == lhs && r.as_slice() == rhs)
    }

    fn nonterminal(&self, name: &str) -> Result<usize> {
        self.nonterminal_id(name)
            .ok_or_else(|| Error::UnknownNonterminal(name.to_string()))
    }

    /// Nonterminals that derive at least one terminal word.
    pub(crate) fn productive(&self) -> Vec<bool> {
        let mut productive = vec![false; self.nonterminals.len()];
        let mut changed = true;
        while changed {
            changed = false;
            for p in &self.productions {
                if !productive[p.lhs]
                    && p.rhs.iter().all(|s| match *s {
                        Sym::T(_) => true,
                        Sym::N(n) => productive[n],
                    })
                {
                    productive[p.lhs] = true;
                    changed = true;
                }
            }
        }
        productive
    }

    pub fn is_empty(&self) -> bool {
        !self.productive()[self.start]
    }

    pub(crate) fn nullable(&self) -> Vec<bool> {
        let mut nullable = vec![false; self.nonterminals.len()];
        let mut changed = true;
        while changed {
            changed = false;
            for p in &self.productions {
                if !nullable[p.lhs] && p.rhs.iter().all(|s| matches!(*s, Sym::N(n) if nullable[n]))
                {
                    nullable[p.lhs] = true;
                    changed = true;
                }
            }
        }
        nullable
    }

    /// Removes nonterminals that are unproductive or unreachable from the
    /// start symbol, with the productions that mention them. The start
    /// symbol is always kept.
    pub fn trim(&self) -> Cfg {
        let productive = self.productive();
        let useful: Vec<&Production> = self
            .productions
            .iter()
            .filter(|p| {
                productive[p.lhs]
                    && p.rhs.iter().all(|s| match *s {
                        Sym::T(_) => true,
                        Sym::N(n) => productive[n],
                    })
            })
            .collect();
        let mut reachable = vec![false; self.nonterminals.len()];
        reachable[self.start] = true;
        let mut stack = vec![self.start];
        let mut by_lhs: Vec<Vec<&Production>> = vec![Vec::new(); self.nonterminals.len()];
        for p in &useful {
            by_lhs[p.lhs].push(p);
        }
        while let Some(a) = stack.pop() {
            for p in &by_lhs[a] {
                for s in &p.rhs {
                    if let Sym::N(n) = *s {
                        if !reachable[n] {
                            reachable[n] = true;
                            stack.push(n);
                        }
                    }
                }
            }
        }
        let mut g = Cfg::with_terminals(self.start(), &self.terminals);
        for p in useful.into_iter().filter(|p| reachable[p.lhs]) {
            let rhs: Vec<_> = p
                .rhs
                .iter()
                .map(|s| match *s {
                    Sym::T(t) => GrammarSymbol::Terminal(self.terminals[t].clone()),
                    Sym::N(n) => GrammarSymbol::Nonterminal(self.nonterminals[n].clone()),
                })
                .collect();
            g.add_production(&self.nonterminals[p.lhs], &rhs);
        }
        g
    }

    /// An equivalent grammar whose right-hand sides have length at most 2;
    /// fresh nonterminals are named `<lhs>#<k>`.
    pub fn binarize(&self) -> Cfg {
        self.binarized().as_ref().clone()
    }

    pub(crate) fn binarized(&self) -> Arc<Cfg> {
        Arc::clone(
            self.binarized
                .get_or_init(|| Arc::new(self.binarize_uncached())),
        )
    }

    fn binarize_uncached(&self) -> Cfg {
        let mut g = Cfg::with_terminals(self.start(), &self.terminals);
        for n in &self.nonterminals {
            g.intern_nonterminal(n);
        }
        let mut fresh = 0usize;
        for p in &self.productions {
            if p.rhs.len() <= 2 {
                g.push(p.clone());
                continue;
            }
            let mut lhs = p.lhs;
            for (k, s) in p.rhs.iter().enumerate() {
                if k == p.rhs.len() - 2 {
                    g.push(Production {
                        lhs,
                        rhs: vec![*s, p.rhs[k + 1]],
                    });
                    break;
                }
                fresh += 1;
                let name = format!("{}#{fresh}", self.nonterminals[p.lhs]);
                let next = g.intern_nonterminal(&name);
                g.push(Production {
                    lhs,
                    rhs: vec![*s, Sym::N(next)],
                });
                lhs = next;
            }
        }
        g
    }

    fn word_ids(&self, word: &Word) -> Option<Vec<usize>> {
        word.symbols().iter().map(|s| self.terminal_id(s)).collect()
    }

    /// Whether the nonterminal `from` derives `word` (CYK over the binarized
    /// grammar, with ε and unit productions closed per span).
    pub fn derives(&self, from: &str, word: &Word) -> Result<bool> {
        let from = self.nonterminal(from)?;
        let Some(ids) = self.word_ids(word) else {
            return Ok(false);
        };
        let b = self.binarized();
        Ok(b.cyk_table(&ids)[0][ids.len()][from])
    }

    /// `table[i][j][A]` holds when `A` derives `word[i..j]`.
    fn cyk_table(&self, word: &[usize]) -> Vec<Vec<Vec<bool>>> {
        let n = word.len();
        let nt = self.nonterminals.len();
        let nullable = self.nullable();
        let mut table = vec![vec![vec![false; nt]; n + 1]; n + 1];
        for (i, row) in table.iter_mut().enumerate() {
            row[i].clone_from(&nullable);
        }
        for len in 1..=n {
            for i in 0..=n - len {
                let j = i + len;
                loop {
                    let mut changed = false;
                    for p in &self.productions {
                        if table[i][j][p.lhs] {
                            continue;
                        }
                        let hit = match p.rhs.as_slice() {
                            [] => false,
                            [x] => sym_spans(&table, word, *x, i, j),
                            [x, y] => (i..=j).any(|k| {
                                sym_spans(&table, word, *x, i, k)
                                    && sym_spans(&table, word, *y, k, j)
                            }),
                            _ => unreachable!("binarized"),
                        };
                        if hit {
                            table[i][j][p.lhs] = true;
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                }
            }
        }
        table
    }

    /// Words of the language in order of length, then lexicographically by
    /// terminal order, up to `max_length` symbols and `max_words` words.
    pub fn enumerate_words(&self, max_length: usize, max_words: usize) -> std::vec::IntoIter<Word> {
        self.enumerate_words_from(self.start, max_length, max_words)
            .into_iter()
            .map(|w| w.into_iter().map(|t| self.terminals[t].clone()).collect())
            .collect::<Vec<Word>>()
            .into_iter()
    }

    fn enumerate_words_from(
        &self,
        root: usize,
        max_length: usize,
        max_words: usize,
    ) -> Vec<Vec<usize>> {
        if max_words == 0 {
            return Vec::new();
        }
        let b = self.binarized();
        let k = max_words;
        let nt = b.nonterminals.len();
        // best[l][A]: the k smallest words of length l derived by A
        let mut best: Vec<Vec<BTreeSet<Vec<usize>>>> = Vec::with_capacity(max_length + 1);
        let mut out = Vec::new();
        for l in 0..=max_length {
            best.push(vec![BTreeSet::new(); nt]);
            loop {
                let mut changed = false;
                for p in &b.productions {
                    let mut found: Vec<Vec<usize>> = Vec::new();
                    match p.rhs.as_slice() {
                        [] => {
                            if l == 0 {
                                found.push(Vec::new());
                            }
                        }
                        [x] => found.extend(words_of(&best, *x, l, k)),
                        [x, y] => {
                            for l1 in 0..=l {
                                let xs = words_of(&best, *x, l1, k);
                                if xs.is_empty() {
                                    continue;
                                }
                                let ys = words_of(&best, *y, l - l1, k);
                                // pairs in (x, y) order are already sorted, so the
                                // first k of this split are its k smallest
                                let pairs =
                                    xs.iter().flat_map(|xw| ys.iter().map(move |yw| (xw, yw)));
                                for (xw, yw) in pairs.take(k) {
                                    let mut w = xw.clone();
                                    w.extend_from_slice(yw);
                                    found.push(w);
                                }
                            }
                        }
                        _ => unreachable!("binarized"),
                    }
                    let set = &mut best[l][p.lhs];
                    for w in found {
                        if set.len() >= k {
                            if set.last().is_some_and(|m| w >= *m) {
                                continue;
                            }
                            if set.contains(&w) {
                                continue;
                            }
                            set.pop_last();
                        }
                        if set.insert(w) {
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            for w in &best[l][root] {
                if out.len() >= max_words {
                    return out;
                }
                out.push(w.clone());
            }
        }
        out
    }

    /// Length of a shortest word, or `None` if the language is empty.
    pub fn shortest_word_length(&self) -> Option<usize> {
        let nt = self.nonterminals.len();
        let mut dist: Vec<Option<usize>> = vec![None; nt];
        let mut changed = true;
        while changed {
            changed = false;
            for p in &self.productions {
                let mut total = 0usize;
                let mut ok = true;
                for s in &p.rhs {
                    match *s {
                        Sym::T(_) => total += 1,
                        Sym::N(n) => match dist[n] {
                            Some(d) => total += d,
                            None => {
                                ok = false;
                                break;
                            }
                        },
                    }
                }
                if ok && dist[p.lhs].is_none_or(|d| total < d) {
                    dist[p.lhs] = Some(total);
                    changed = true;
                }
            }
        }
        dist[self.start]
    }

    pub(crate) fn sym_name(&self, s: Sym) -> String {
        match s {
            Sym::T(t) => self.terminals[t].to_string(),
            Sym::N(n) => self.nonterminals[n].clone(),
        }
    }
}

fn sym_spans(table: &[Vec<Vec<bool>>], word: &[usize], s: Sym, i: usize, j: usize) -> bool {
    match s {
        Sym::T(t) => j == i + 1 && word[i] == t,
        Sym::N(n) => table[i][j][n],
    }
}

fn words_of(best: &[Vec<BTreeSet<Vec<usize>>>], s: Sym, l: usize, k: usize) -> Vec<Vec<usize>> {
    match s {
        Sym::T(t) => {
            if l == 1 {
                vec![vec![t]]
            } else {
                Vec::new()
            }
        }
        Sym::N(n) => best[l][n].iter().take(k).cloned().collect(),
    }
}

impl fmt::Display for Cfg {
    /// One production per line, `A -> X Y`, with `ε` for empty bodies.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.productions {
            let rhs: Vec<_> = p.rhs.iter().map(|s| self.sym_name(*s)).collect();
            let rhs = if rhs.is_empty() {
                "ε".to_string()
            } else {
                rhs.join(" ")
            };
            writeln!(f, "{} -> {}", self.nonterminals[p.lhs], rhs)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> GrammarSymbol {
        GrammarSymbol::Terminal(s.parse().unwrap())
    }

    fn n(s: &str) -> GrammarSymbol {
        GrammarSymbol::n(s)
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    /// S -> r A; A -> r- A | ε
    fn r_then_inverses() -> Cfg {
        let mut g = Cfg::new("S");
        g.add_production("S", &[t("r"), n("A")]);
        g.add_production("A", &[t("r-"), n("A")]);
        g.add_production("A", &[]);
        g
    }

    #[test]
    fn enumeration_order() {
        let g = r_then_inverses();
        let words: Vec<_> = g.enumerate_words(3, 10).map(|w| w.to_string()).collect();
        assert_eq!(words, ["r", "r r-", "r r- r-"]);
        assert_eq!(g.enumerate_words(3, 2).count(), 2);
        assert_eq!(g.enumerate_words(3, 0).count(), 0);
    }

    #[test]
    fn enumeration_is_lexicographic_within_length() {
        // S -> a S | b S | ε with terminal order b < a
        let mut g = Cfg::with_terminals("S", &["b".parse().unwrap(), "a".parse().unwrap()]);
        g.add_production("S", &[t("a"), n("S")]);
        g.add_production("S", &[t("b"), n("S")]);
        g.add_production("S", &[]);
        let words: Vec<_> = g.enumerate_words(2, 100).map(|w| w.to_string()).collect();
        assert_eq!(words, ["ε", "b", "a", "b b", "b a", "a b", "a a"]);
        let capped: Vec<_> = g.enumerate_words(2, 4).map(|w| w.to_string()).collect();
        assert_eq!(capped, ["ε", "b", "a", "b b"]);
    }

    #[test]
    fn emptiness() {
        let mut g = Cfg::new("S");
        assert!(g.is_empty());
        g.add_production("S", &[n("A")]);
        g.add_production("A", &[t("r"), n("A")]);
        assert!(g.is_empty());
        assert_eq!(g.enumerate_words(5, 5).count(), 0);
        assert_eq!(g.shortest_word_length(), None);
        g.add_production("A", &[t("r")]);
        assert!(!g.is_empty());
        assert_eq!(g.shortest_word_length(), Some(1));
    }

    #[test]
    fn membership() {
        let g = r_then_inverses();
        assert!(g.derives("S", &w("r r- r-")).unwrap());
        assert!(!g.derives("S", &w("r- r")).unwrap());
        assert!(!g.derives("S", &w("")).unwrap());
        assert!(g.derives("A", &w("")).unwrap());
        assert!(!g.derives("S", &w("zzz")).unwrap());
        assert!(matches!(
            g.derives("Q", &w("r")),
            Err(Error::UnknownNonterminal(_))
        ));
    }

    #[test]
    fn membership_with_nullable_and_unit_cycles() {
        // S -> A B; A -> B | ε; B -> A | b | S S
        let mut g = Cfg::new("S");
        g.add_production("S", &[n("A"), n("B")]);
        g.add_production("A", &[n("B")]);
        g.add_production("A", &[]);
        g.add_production("B", &[n("A")]);
        g.add_production("B", &[t("b")]);
        g.add_production("B", &[n("S"), n("S")]);
        for k in 0..5 {
            let word: Word = std::iter::repeat_n("b".parse().unwrap(), k).collect();
            assert!(g.derives("S", &word).unwrap(), "b^{k}");
        }
    }

    #[test]
    fn binarize_preserves_words() {
        let mut g = Cfg::new("S");
        g.add_production("S", &[t("a"), n("S"), t("b"), n("S")]);
        g.add_production("S", &[]);
        let b = g.binarize();
        assert!(b.productions().iter().all(|p| p.rhs.len() <= 2));
        let lhs: Vec<_> = g.enumerate_words(6, 1000).collect();
        let rhs: Vec<_> = b.enumerate_words(6, 1000).collect();
        assert_eq!(lhs, rhs);
        assert_eq!(lhs.len(), 1 + 1 + 2 + 5);
    }

    #[test]
    fn trimming() {
        let mut g = Cfg::new("S");
        g.add_production("S", &[t("a")]);
        g.add_production("S", &[n("Dead")]);
        g.add_production("Dead", &[n("Dead"), t("a")]);
        g.add_production("Orphan", &[t("b")]);
        let trimmed = g.trim();
        assert_eq!(trimmed.production_count(), 1);
        assert_eq!(trimmed.to_string(), "S -> a\n");
    }

    #[test]
    fn display() {
        let g = r_then_inverses();
        assert_eq!(g.to_string(), "S -> r A\nA -> r- A\nA -> ε\n");
        assert!(g.has_production("A", &[]));
    }

    #[test]
    fn duplicate_productions_are_ignored() {
        let mut g = r_then_inverses();
        g.add_production("A", &[]);
        assert_eq!(g.production_count(), 3);
    }
}
