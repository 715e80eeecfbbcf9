//! Contraction of degree-two existential variables.

use std::sync::Arc;

use super::{Atom, C2rpq, Var};
use crate::automata::{concat, inverse_language};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ContractionMode {
    /// An existential variable touched by exactly two non-loop atoms, in
    /// any direction.
    TwoWay,
    /// An existential variable with one incoming and one outgoing non-loop atom.
    OneWay,
}

/// Repeatedly eliminates the least eligible existential variable `t` by
/// joining its two atoms into one atom whose language is the concatenation
/// (inverting a side where needed). Output variables are never removed.
pub fn contract(q: &C2rpq, mode: ContractionMode) -> C2rpq {
    let mut cur = q.clone();
    while let Some((t, e1, e2)) = eligible(&cur, mode) {
        let (a1, a2) = (cur.atoms[e1].clone(), cur.atoms[e2].clone());
        let (u, k1) = if a1.dst == t {
            (a1.src.clone(), a1.lang.as_ref().clone())
        } else {
            (a1.dst.clone(), inverse_language(&a1.lang))
        };
        let (w, k2) = if a2.src == t {
            (a2.dst.clone(), a2.lang.as_ref().clone())
        } else {
            (a2.src.clone(), inverse_language(&a2.lang))
        };
        let joined = Atom::new(u, Arc::new(concat(&k1, &k2)), w);
        let (hi, lo) = (e1.max(e2), e1.min(e2));
        cur.atoms.remove(hi);
        cur.atoms.remove(lo);
        cur.atoms.push(joined);
        cur.vars.remove(&t);
    }
    cur
}

/// The least eligible variable with its two atoms, ordered so that the
/// first one leads into the variable when the mode requires it.
fn eligible(q: &C2rpq, mode: ContractionMode) -> Option<(Var, usize, usize)> {
    for t in q.existential_vars() {
        let touching: Vec<usize> = (0..q.atoms.len()).filter(|&i| q.atoms[i].src == *t || q.atoms[i].dst == *t).collect();
        if touching.len() != 2 || touching.iter().any(|&i| q.atoms[i].is_loop()) {
            continue;
        }
        if q.equalities.iter().any(|(x, y)| x == t || y == t) {
            continue;
        }
        let (e1, e2) = (touching[0], touching[1]);
        match mode {
            ContractionMode::TwoWay => return Some((t.clone(), e1, e2)),
            ContractionMode::OneWay => {
                let into = |i: usize| q.atoms[i].dst == *t;
                match (into(e1), into(e2)) {
                    (true, false) => return Some((t.clone(), e1, e2)),
                    (false, true) => return Some((t.clone(), e2, e1)),
                    _ => {}
                }
            }
        }
    }
    None
}
