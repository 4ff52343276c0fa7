//! Must-link / cannot-link side information over pixel pairs.
//!
//! Pairs are unordered and stored as `(min, max)`. A [`ConstraintSet`] is
//! always closed: must-link pairs are grouped into connected components
//! (every pair inside a component is must-linked), and a cannot-link pair
//! between two pixels forbids every pair across their two components.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::segmentation::Segmentation;

#[inline]
fn ordered(m: usize, l: usize) -> (usize, usize) {
    if m <= l {
        (m, l)
    } else {
        (l, m)
    }
}

/// Unvalidated pair lists, as read from a file or sampled from ground truth.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConstraints {
    pub must_link: Vec<(usize, usize)>,
    pub cannot_link: Vec<(usize, usize)>,
}

impl RawConstraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn must_link(mut self, m: usize, l: usize) -> Self {
        self.must_link.push((m, l));
        self
    }

    pub fn cannot_link(mut self, m: usize, l: usize) -> Self {
        self.cannot_link.push((m, l));
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    declared_must_link: BTreeSet<(usize, usize)>,
    cannot_link: BTreeSet<(usize, usize)>,
    component_of: BTreeMap<usize, usize>,
    components: Vec<Vec<usize>>,
    cl_neighbors: Vec<Vec<usize>>,
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Closes the must-link relation transitively and checks it against the
/// cannot-link pairs.
///
/// Fails with [`Error::InconsistentConstraints`] on the first cannot-link pair
/// whose endpoints end up in the same must-link component, and with
/// [`Error::SelfPair`] on a pair `(m, m)`.
pub fn close_constraints(raw: &RawConstraints) -> Result<ConstraintSet> {
    let mut declared_must_link = BTreeSet::new();
    for &(m, l) in &raw.must_link {
        if m == l {
            return Err(Error::SelfPair(m));
        }
        declared_must_link.insert(ordered(m, l));
    }
    let mut cannot_link = BTreeSet::new();
    for &(m, l) in &raw.cannot_link {
        if m == l {
            return Err(Error::SelfPair(m));
        }
        cannot_link.insert(ordered(m, l));
    }

    let pixels: BTreeSet<usize> =
        declared_must_link.iter().chain(cannot_link.iter()).flat_map(|&(m, l)| [m, l]).collect();
    let index: BTreeMap<usize, usize> = pixels.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    let mut sets = DisjointSets::new(pixels.len());
    for (m, l) in &declared_must_link {
        sets.union(index[m], index[l]);
    }

    // Components are numbered by their smallest pixel.
    let mut root_to_component = BTreeMap::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut component_of = BTreeMap::new();
    for (&p, &i) in &index {
        let root = sets.find(i);
        let c = *root_to_component.entry(root).or_insert_with(|| {
            components.push(Vec::new());
            components.len() - 1
        });
        components[c].push(p);
        component_of.insert(p, c);
    }

    let mut cl_neighbors = vec![Vec::new(); components.len()];
    for &(m, l) in &cannot_link {
        let (cm, cl) = (component_of[&m], component_of[&l]);
        if cm == cl {
            return Err(Error::InconsistentConstraints(m, l));
        }
        cl_neighbors[cm].push(cl);
        cl_neighbors[cl].push(cm);
    }
    for n in &mut cl_neighbors {
        n.sort_unstable();
        n.dedup();
    }

    Ok(ConstraintSet { declared_must_link, cannot_link, component_of, components, cl_neighbors })
}

impl ConstraintSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.declared_must_link.is_empty() && self.cannot_link.is_empty()
    }

    /// Transitive closure of the must-link relation, as `(min, max)` pairs.
    pub fn must_link(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.components.iter().flat_map(|comp| {
            comp.iter().enumerate().flat_map(move |(i, &m)| comp[i + 1..].iter().map(move |&l| (m, l)))
        })
    }

    /// Number of pairs in the must-link closure.
    pub fn must_link_count(&self) -> u64 {
        self.components.iter().map(|c| pairs(c.len() as u64)).sum()
    }

    /// Must-link pairs exactly as declared (deduplicated, ordered).
    pub fn declared_must_link(&self) -> &BTreeSet<(usize, usize)> {
        &self.declared_must_link
    }

    pub fn cannot_link(&self) -> &BTreeSet<(usize, usize)> {
        &self.cannot_link
    }

    /// Must-link components over all constrained pixels; pixels that only
    /// appear in cannot-link pairs form singleton components.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_of(&self, pixel: usize) -> Option<usize> {
        self.component_of.get(&pixel).copied()
    }

    /// Components joined to `component` by at least one cannot-link pair.
    pub fn cannot_link_neighbors(&self, component: usize) -> &[usize] {
        &self.cl_neighbors[component]
    }

    /// Unordered component pairs `(a, b)`, `a < b`, that must differ.
    pub fn cannot_link_components(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cl_neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    pub fn requires_same(&self, m: usize, l: usize) -> bool {
        if m == l {
            return true;
        }
        match (self.component_of(m), self.component_of(l)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    /// True when `(m, l)` is cannot-linked directly or through must-links.
    pub fn requires_different(&self, m: usize, l: usize) -> bool {
        match (self.component_of(m), self.component_of(l)) {
            (Some(a), Some(b)) => self.cl_neighbors[a].binary_search(&b).is_ok(),
            _ => false,
        }
    }

    pub fn max_pixel(&self) -> Option<usize> {
        self.component_of.keys().next_back().copied()
    }

    /// Checks that every constrained pixel exists in a grid of `len` pixels.
    pub fn check_pixels(&self, len: usize) -> Result<()> {
        match self.max_pixel() {
            Some(p) if p >= len => Err(Error::PixelOutOfRange { index: p, len }),
            _ => Ok(()),
        }
    }

    /// Violated pairs as `(must_link, cannot_link)` counts, over the must-link
    /// closure and the declared cannot-link pairs.
    pub fn violations(&self, seg: &Segmentation) -> (u64, u64) {
        let mut ml = 0;
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for comp in &self.components {
            counts.clear();
            for &p in comp {
                *counts.entry(seg.label(p)).or_insert(0) += 1;
            }
            let agreeing: u64 = counts.values().map(|&c| pairs(c)).sum();
            ml += pairs(comp.len() as u64) - agreeing;
        }
        let cl = self.cannot_link.iter().filter(|&&(m, l)| seg.label(m) == seg.label(l)).count() as u64;
        (ml, cl)
    }

    pub fn is_satisfied_by(&self, seg: &Segmentation) -> bool {
        self.check_pixels(seg.len()).is_ok() && self.violations(seg) == (0, 0)
    }

    /// Back to declared pair lists.
    pub fn to_raw(&self) -> RawConstraints {
        RawConstraints {
            must_link: self.declared_must_link.iter().copied().collect(),
            cannot_link: self.cannot_link.iter().copied().collect(),
        }
    }
}

#[inline]
pub(crate) fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}
