//! Tagged decompositions of a refinement mapped onto an approximation.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::tree::TreeDecomposition;
use super::DecompositionError;
use crate::morphism::atom_key;
use crate::query_model::{Atom, C2rpq, Refinement, Var};

/// A strong onto homomorphism `f` from a refinement of some query onto `alpha`.
#[derive(Clone, Debug)]
pub struct Trio {
    pub rho: Refinement,
    pub alpha: C2rpq,
    pub f: BTreeMap<Var, Var>,
}

impl Trio {
    /// Checks that `f` is a strong onto homomorphism from `rho` to `alpha`.
    pub fn new(rho: Refinement, alpha: C2rpq, f: BTreeMap<Var, Var>) -> Result<Trio, DecompositionError> {
        let t = Trio { rho, alpha, f };
        if !t.is_strong_onto() {
            return Err(DecompositionError::NotAHomomorphism);
        }
        Ok(t)
    }

    /// The trio onto the image of `rho` under `f`.
    pub fn onto_image(rho: Refinement, f: BTreeMap<Var, Var>, name: &str) -> Trio {
        let alpha = image(&rho.result, &f, name);
        Trio { rho, alpha, f }
    }

    pub fn map<'a>(&'a self, v: &'a str) -> &'a str {
        self.f.get(v).map(String::as_str).unwrap_or(v)
    }

    pub fn is_strong_onto(&self) -> bool {
        let q = &self.rho.result;
        if q.vars.iter().any(|v| !self.f.contains_key(v) || !self.alpha.vars.contains(&self.f[v])) {
            return false;
        }
        let outs: Vec<&str> = q.output.iter().map(|v| self.map(v)).collect();
        if outs != self.alpha.output.iter().map(String::as_str).collect::<Vec<_>>() {
            return false;
        }
        let target: HashSet<(Var, u32, Var)> = self.alpha.atoms.iter().map(atom_key).collect();
        let mut hit = HashSet::new();
        for a in &q.atoms {
            let k = self.image_key(a);
            if !target.contains(&k) {
                return false;
            }
            hit.insert(k);
        }
        let onto_vars: BTreeSet<&str> = q.vars.iter().map(|v| self.map(v)).collect();
        hit.len() == target.len() && self.alpha.vars.iter().all(|v| onto_vars.contains(v.as_str()))
    }

    fn image_key(&self, a: &Atom) -> (Var, u32, Var) {
        let (s, c, d) = atom_key(a);
        (self.map(&s).to_string(), c, self.map(&d).to_string())
    }

    /// Variables of the refined query, named as in `rho`.
    pub fn base_vars(&self) -> BTreeSet<Var> {
        self.rho.base.vars.iter().map(|v| self.rho.renaming.get(v).cloned().unwrap_or_else(|| v.clone())).collect()
    }

    /// Images of the path variables of one atom refinement.
    pub fn path_images(&self, base_atom: usize) -> Vec<Var> {
        self.rho.paths[base_atom].iter().map(|v| self.map(v).to_string()).collect()
    }
}

/// The image of `q` under `f`, atoms deduplicated by orientation-normalized key.
pub fn image(q: &C2rpq, f: &BTreeMap<Var, Var>, name: &str) -> C2rpq {
    let m = |v: &Var| f.get(v).cloned().unwrap_or_else(|| v.clone());
    let mut seen = HashSet::new();
    let mut atoms = Vec::new();
    for a in &q.atoms {
        let b = Atom::new(m(&a.src), a.lang.clone(), m(&a.dst));
        if seen.insert(atom_key(&b)) {
            atoms.push(b);
        }
    }
    C2rpq {
        name: name.to_string(),
        vars: q.vars.iter().map(m).collect(),
        output: q.output.iter().map(m).collect(),
        atoms,
        equalities: Vec::new(),
    }
}

/// A decomposition of the target with one tag (bag index) per source atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedTreeDecomposition {
    pub dec: TreeDecomposition,
    pub tags: Vec<usize>,
    pub fine: bool,
}

/// Tags every atom of `q` in the first bag, breadth-first from the root,
/// containing both endpoint images under `f` (identity when `None`).
pub fn tag_atoms(
    q: &C2rpq,
    dec: &TreeDecomposition,
    f: Option<&BTreeMap<Var, Var>>,
) -> Result<TaggedTreeDecomposition, DecompositionError> {
    let m = |v: &Var| -> Var { f.and_then(|f| f.get(v)).cloned().unwrap_or_else(|| v.clone()) };
    let order = dec.bfs_order();
    let mut tags = Vec::with_capacity(q.atoms.len());
    for (i, a) in q.atoms.iter().enumerate() {
        let (s, d) = (m(&a.src), m(&a.dst));
        let b = order
            .iter()
            .copied()
            .find(|&b| dec.bags[b].contains(&s) && dec.bags[b].contains(&d))
            .ok_or(DecompositionError::NoCoveringBag(i))?;
        tags.push(b);
    }
    Ok(TaggedTreeDecomposition { fine: dec.is_fine(), dec: dec.clone(), tags })
}

/// One element of an induced path: a bag, a target variable, and the index
/// `l` of the path variable `t_l` whose image it carries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathElem {
    pub bag: usize,
    pub var: Var,
    pub block: usize,
}

/// Induced path of a source path with variable images `images[0..=n]` and
/// atom tags `tags[0..n]`.
pub fn induced_from(dec: &TreeDecomposition, images: &[Var], tags: &[usize]) -> Vec<PathElem> {
    let mut out = Vec::new();
    for (l, &b) in tags.iter().enumerate() {
        if l > 0 {
            let link = dec.tree_path(tags[l - 1], b);
            for &mid in link.iter().skip(1).take(link.len().saturating_sub(2)) {
                out.push(PathElem { bag: mid, var: images[l].clone(), block: l });
            }
        }
        out.push(PathElem { bag: b, var: images[l].clone(), block: l });
        out.push(PathElem { bag: b, var: images[l + 1].clone(), block: l + 1 });
    }
    out
}

/// Induced path of a sequence of atoms of `q` forming a path, in the given
/// order. Orientation of each atom is inferred from its neighbours.
pub fn induced_path(
    ttd: &TaggedTreeDecomposition,
    q: &C2rpq,
    f: &BTreeMap<Var, Var>,
    atoms: &[usize],
) -> Result<Vec<PathElem>, DecompositionError> {
    let m = |v: &Var| f.get(v).cloned().unwrap_or_else(|| v.clone());
    let Some(&first) = atoms.first() else { return Ok(Vec::new()) };
    let get = |i: usize| q.atoms.get(i).ok_or(DecompositionError::NotAPath);
    let a0 = get(first)?;
    'orient: for start in [&a0.src, &a0.dst] {
        let mut vars = vec![start.clone()];
        for &i in atoms {
            let a = get(i)?;
            let cur = vars.last().expect("nonempty");
            let next = if &a.src == cur {
                a.dst.clone()
            } else if &a.dst == cur {
                a.src.clone()
            } else {
                continue 'orient;
            };
            vars.push(next);
        }
        let images: Vec<Var> = vars.iter().map(m).collect();
        let tags: Vec<usize> = atoms.iter().map(|&i| ttd.tags[i]).collect();
        return Ok(induced_from(&ttd.dec, &images, &tags));
    }
    Err(DecompositionError::NotAPath)
}

/// Whether some bag occurs at two positions `i + 2 <= j`.
pub fn is_cyclic(path: &[PathElem]) -> bool {
    cyclic_pair(path).is_some()
}

/// The first pair `(i, j)`, `i + 2 <= j`, of positions with the same bag.
pub fn cyclic_pair(path: &[PathElem]) -> Option<(usize, usize)> {
    let mut first: BTreeMap<usize, usize> = BTreeMap::new();
    for (j, e) in path.iter().enumerate() {
        match first.get(&e.bag) {
            Some(&i) if i + 2 <= j => return Some((i, j)),
            Some(_) => {}
            None => {
                first.insert(e.bag, j);
            }
        }
    }
    None
}

/// Positions where the path leaves its bag: the last element, or one whose
/// successor has a different bag.
pub fn leave_positions(path: &[PathElem]) -> Vec<usize> {
    (0..path.len()).filter(|&i| i + 1 == path.len() || path[i + 1].bag != path[i].bag).collect()
}

/// Types of the variables of a bag, and whether the bag is atomic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BagProfile {
    /// Per bag variable, the base atoms whose refinement leaves the bag there.
    pub types: BTreeMap<Var, BTreeSet<usize>>,
    pub atomic: bool,
}

impl BagProfile {
    /// The multiset of types, as a sorted list.
    pub fn profile(&self) -> Vec<BTreeSet<usize>> {
        let mut p: Vec<BTreeSet<usize>> = self.types.values().cloned().collect();
        p.sort();
        p
    }
}

impl TaggedTreeDecomposition {
    /// Tagging invariant against the trio, decomposition validity for
    /// `alpha`, and the fine flag.
    pub fn check(&self, trio: &Trio) -> Result<(), DecompositionError> {
        self.dec.validate_query(&trio.alpha)?;
        if self.tags.len() != trio.rho.result.atoms.len() {
            return Err(DecompositionError::NotATree(": one tag per atom expected".into()));
        }
        for (i, a) in trio.rho.result.atoms.iter().enumerate() {
            let bag = self.dec.bags.get(self.tags[i]).ok_or(DecompositionError::NoCoveringBag(i))?;
            if !bag.contains(trio.map(&a.src)) || !bag.contains(trio.map(&a.dst)) {
                return Err(DecompositionError::NoCoveringBag(i));
            }
        }
        if self.fine != self.dec.is_fine() {
            return Err(DecompositionError::NotFine);
        }
        Ok(())
    }

    /// Induced path of the refinement of one base atom (empty for a
    /// refinement by equality).
    pub fn refinement_path(&self, trio: &Trio, base_atom: usize) -> Vec<PathElem> {
        let tags: Vec<usize> = trio.rho.path_atoms[base_atom].iter().map(|&(i, _)| self.tags[i]).collect();
        if tags.is_empty() {
            return Vec::new();
        }
        induced_from(&self.dec, &trio.path_images(base_atom), &tags)
    }

    pub fn is_locally_acyclic(&self, trio: &Trio) -> bool {
        (0..trio.rho.per_atom.len()).all(|a| !is_cyclic(&self.refinement_path(trio, a)))
    }

    /// Bags tagging an atom with an endpoint among the base variables.
    pub fn atomic_bags(&self, trio: &Trio) -> BTreeSet<usize> {
        let base = trio.base_vars();
        trio.rho
            .result
            .atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| base.contains(&a.src) || base.contains(&a.dst))
            .map(|(i, _)| self.tags[i])
            .collect()
    }

    /// Profiles of all bags; types are left empty for atomic bags.
    pub fn profiles(&self, trio: &Trio) -> Vec<BagProfile> {
        let atomic = self.atomic_bags(trio);
        let mut out: Vec<BagProfile> = (0..self.dec.len())
            .map(|b| BagProfile {
                types: if atomic.contains(&b) {
                    BTreeMap::new()
                } else {
                    self.dec.bags[b].iter().map(|v| (v.clone(), BTreeSet::new())).collect()
                },
                atomic: atomic.contains(&b),
            })
            .collect();
        for a in 0..trio.rho.per_atom.len() {
            let path = self.refinement_path(trio, a);
            for p in leave_positions(&path) {
                let e = &path[p];
                if let Some(t) = out[e.bag].types.get_mut(&e.var) {
                    t.insert(a);
                }
            }
        }
        out
    }

    pub fn profile_of_bag(&self, trio: &Trio, bag: usize) -> BagProfile {
        self.profiles(trio).swap_remove(bag)
    }

    /// Keeps only the smallest subtree containing every tag.
    pub fn restrict_to_tags(&self) -> TaggedTreeDecomposition {
        let terminals: BTreeSet<usize> = self.tags.iter().copied().collect();
        let keep: Vec<usize> = self.dec.steiner(&terminals).into_iter().collect();
        let (dec, map) = self.dec.restrict_to(&keep);
        let tags = self.tags.iter().map(|&t| map[t].expect("tag kept")).collect();
        TaggedTreeDecomposition { fine: dec.is_fine(), dec, tags }
    }

    pub fn dump(&self) -> String {
        self.dec.dump(Some(&self.tags))
    }
}
