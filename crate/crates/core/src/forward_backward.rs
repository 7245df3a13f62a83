//! The grammar of forward-backward paths for an atomic query.
//!
//! `B_r` derives the loops that must exist from any element with an outgoing
//! `r`-fact, given the dependencies; `L_s` walks an `s`-edge, loops at the
//! far end, and comes back. A word of the start symbol is a path from `a`
//! that provably reaches `b` in `r(a, b)`.

use crate::error::Result;
use crate::lang::{Cfg, GrammarSymbol};
use crate::plan::Word;
use crate::schema::{Alphabet, AtomicQuery, RelationSymbol, UidSet};

pub fn b_name(r: &RelationSymbol) -> String {
    format!("B_{r}")
}

pub fn l_name(r: &RelationSymbol) -> String {
    format!("L_{r}")
}

/// Builds `S -> B_r r | B_r r B_{r-} r-`, `B_ri -> B_ri L_rj` for each
/// dependency `ri ⇝ rj`, and `B_ri -> ε`, `L_ri -> ri B_{ri-} ri-` for each
/// symbol. `uids` should already be closed.
pub fn build_forward_backward_grammar(
    alphabet: &Alphabet,
    uids: &UidSet,
    query: &AtomicQuery,
) -> Result<Cfg> {
    query.validate(alphabet)?;
    for (ri, rj) in uids.iter() {
        alphabet.check(ri)?;
        alphabet.check(rj)?;
    }
    let r = &query.relation;
    let ri = r.inverse();
    let t = GrammarSymbol::t;
    let n = |s: String| GrammarSymbol::Nonterminal(s);
    let mut g = Cfg::with_terminals("S", alphabet.symbols());
    g.add_production("S", &[n(b_name(r)), t(r)]);
    g.add_production("S", &[n(b_name(r)), t(r), n(b_name(&ri)), t(&ri)]);
    for (a, b) in uids.iter() {
        g.add_production(&b_name(a), &[n(b_name(a)), n(l_name(b))]);
    }
    for s in alphabet.symbols() {
        g.add_production(&b_name(s), &[]);
    }
    for s in alphabet.symbols() {
        let inv = s.inverse();
        g.add_production(&l_name(s), &[t(s), n(b_name(&inv)), t(&inv)]);
    }
    Ok(g)
}

/// Whether `B_r` derives `w`, i.e. the loop `w(a, a)` is implied by `r(a, b)`
/// and the dependencies the grammar was built from.
pub fn loop_word_derivable(g: &Cfg, query: &AtomicQuery, w: &Word) -> bool {
    g.derives(&b_name(&query.relation), w).unwrap_or(false)
}
