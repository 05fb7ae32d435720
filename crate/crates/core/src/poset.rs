//! Finite posets, cuts (down-sets) and causality functions.

use std::cmp::Reverse;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::hash::{Hash, Hasher};

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};

/// Default cap on the number of cuts produced by [`Poset::enumerate_cuts`].
pub const DEFAULT_CUT_CAP: usize = 1 << 16;

/// A finite partially ordered set of position labels.
#[derive(Debug, Clone)]
pub struct Poset {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    covers: Vec<(usize, usize)>,
    // down[t] = { s : s <= t }
    down: Vec<FixedBitSet>,
    order: Vec<usize>,
    rank: Vec<usize>,
    fingerprint: u64,
}

impl PartialEq for Poset {
    fn eq(&self, other: &Self) -> bool {
        self.fingerprint == other.fingerprint && self.labels == other.labels && self.down == other.down
    }
}

impl Eq for Poset {}

impl Poset {
    /// Builds a poset from labels and cover pairs `(lower, upper)`.
    pub fn new<S: AsRef<str>>(elements: &[S], covers: &[(S, S)]) -> Result<Poset> {
        let labels: Vec<String> = elements.iter().map(|s| s.as_ref().to_string()).collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        let lookup = |s: &str| index.get(s).copied().ok_or_else(|| Error::UnknownLabel(s.to_string()));
        let mut cov = Vec::with_capacity(covers.len());
        for (a, b) in covers {
            cov.push((lookup(a.as_ref())?, lookup(b.as_ref())?));
        }
        Self::from_indices(labels, cov)
    }

    fn from_indices(labels: Vec<String>, covers: Vec<(usize, usize)>) -> Result<Poset> {
        let n = labels.len();
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(a, b) in &covers {
            preds[b].push(a);
            succs[a].push(b);
        }

        // Kahn's algorithm, always taking the earliest label in input order.
        let mut indeg: Vec<usize> = preds.iter().map(|p| p.len()).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indeg[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(t)) = ready.pop() {
            order.push(t);
            for &s in &succs[t] {
                indeg[s] -= 1;
                if indeg[s] == 0 {
                    ready.push(Reverse(s));
                }
            }
        }
        if order.len() < n {
            let stuck = (0..n).find(|&i| indeg[i] > 0).unwrap_or(0);
            return Err(Error::Cycle(labels[stuck].clone()));
        }
        let mut rank = vec![0; n];
        for (r, &t) in order.iter().enumerate() {
            rank[t] = r;
        }

        let mut down = vec![FixedBitSet::with_capacity(n); n];
        for &t in &order {
            let mut d = FixedBitSet::with_capacity(n);
            d.insert(t);
            for &p in &preds[t] {
                d.union_with(&down[p]);
            }
            down[t] = d;
        }

        let mut h = DefaultHasher::new();
        labels.hash(&mut h);
        for d in &down {
            d.ones().collect::<Vec<_>>().hash(&mut h);
        }
        Ok(Poset { labels, index, covers, down, order, rank, fingerprint: h.finish() })
    }

    /// The chain `1 < 2 < ... < n` with labels `"1"`, ..., `"n"`.
    pub fn chain(n: usize) -> Poset {
        let labels: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        let covers = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_indices(labels, covers).expect("a chain is acyclic")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn covers(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.covers.iter().map(|&(a, b)| (self.labels[a].as_str(), self.labels[b].as_str()))
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.index.get(label).copied().ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Structural fingerprint; equal posets share it.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// `s <= t` in the poset.
    pub fn leq(&self, s: usize, t: usize) -> bool {
        self.down[t].contains(s)
    }

    /// The fixed linear extension used for all canonical orderings.
    pub fn linear_extension(&self) -> &[usize] {
        &self.order
    }

    /// Position of `t` in the linear extension.
    pub fn rank(&self, t: usize) -> usize {
        self.rank[t]
    }

    pub fn is_chain(&self) -> bool {
        self.order.windows(2).all(|w| self.leq(w[0], w[1]))
    }

    pub fn is_maximal(&self, t: usize) -> bool {
        (0..self.len()).all(|s| s == t || !self.leq(t, s))
    }

    /// `T^{<=t}`.
    pub fn past(&self, t: usize) -> Cut {
        Cut { fingerprint: self.fingerprint, bits: self.down[t].clone() }
    }

    /// `T^{<t}`.
    pub fn strict_past(&self, t: usize) -> Cut {
        let mut bits = self.down[t].clone();
        bits.set(t, false);
        Cut { fingerprint: self.fingerprint, bits }
    }

    pub fn empty_cut(&self) -> Cut {
        Cut { fingerprint: self.fingerprint, bits: FixedBitSet::with_capacity(self.len()) }
    }

    pub fn full_cut(&self) -> Cut {
        let mut bits = FixedBitSet::with_capacity(self.len());
        bits.insert_range(..);
        Cut { fingerprint: self.fingerprint, bits }
    }

    /// Smallest cut containing `points`.
    pub fn down_closure<S: AsRef<str>>(&self, points: &[S]) -> Result<Cut> {
        let mut idx = Vec::with_capacity(points.len());
        for p in points {
            idx.push(self.index_of(p.as_ref())?);
        }
        Ok(self.down_closure_of(idx))
    }

    pub fn down_closure_of(&self, points: impl IntoIterator<Item = usize>) -> Cut {
        let mut bits = FixedBitSet::with_capacity(self.len());
        for p in points {
            bits.union_with(&self.down[p]);
        }
        Cut { fingerprint: self.fingerprint, bits }
    }

    /// Wraps a bitset, checking that it is downward closed.
    pub fn cut_from_bits(&self, bits: FixedBitSet) -> Option<Cut> {
        if bits.len() != self.len() {
            return None;
        }
        let closed = bits.ones().all(|t| self.down[t].is_subset(&bits));
        closed.then_some(Cut { fingerprint: self.fingerprint, bits })
    }

    /// All cuts of the poset, from the empty cut upward in a fixed order.
    pub fn enumerate_cuts(&self) -> Result<Vec<Cut>> {
        self.enumerate_cuts_capped(DEFAULT_CUT_CAP)
    }

    pub fn enumerate_cuts_capped(&self, cap: usize) -> Result<Vec<Cut>> {
        let mut out = Vec::new();
        let mut current = FixedBitSet::with_capacity(self.len());
        self.cut_search(0, &mut current, &mut out, cap)?;
        out.sort_by(|a, b| a.bits.count_ones(..).cmp(&b.bits.count_ones(..)).then_with(|| a.ranked(self).cmp(&b.ranked(self))));
        Ok(out)
    }

    fn cut_search(&self, k: usize, current: &mut FixedBitSet, out: &mut Vec<Cut>, cap: usize) -> Result<()> {
        if k == self.order.len() {
            if out.len() == cap {
                return Err(Error::Size { what: "cut enumeration".into(), size: cap + 1, cap });
            }
            out.push(Cut { fingerprint: self.fingerprint, bits: current.clone() });
            return Ok(());
        }
        let t = self.order[k];
        self.cut_search(k + 1, current, out, cap)?;
        let mut preds = self.down[t].clone();
        preds.set(t, false);
        if preds.is_subset(current) {
            current.insert(t);
            self.cut_search(k + 1, current, out, cap)?;
            current.set(t, false);
        }
        Ok(())
    }

    pub fn strict_past_causality(&self) -> CausalityFn {
        let images = (0..self.len()).map(|t| self.strict_past(t).bits).collect();
        CausalityFn { fingerprint: self.fingerprint, images }
    }

    /// Validates a pointwise causality function `t -> chi(t)`.
    pub fn causality_fn<S: AsRef<str> + Ord>(&self, pointwise: &BTreeMap<S, Vec<S>>) -> Result<CausalityFn> {
        let mut images = vec![FixedBitSet::with_capacity(self.len()); self.len()];
        for (t, img) in pointwise {
            let ti = self.index_of(t.as_ref())?;
            for s in img {
                images[ti].insert(self.index_of(s.as_ref())?);
            }
        }
        self.causality_fn_from_bits(images)
    }

    pub fn causality_fn_from_bits(&self, images: Vec<FixedBitSet>) -> Result<CausalityFn> {
        if images.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: images.len() });
        }
        for (t, img) in images.iter().enumerate() {
            if img.len() != self.len() {
                return Err(Error::PosetMismatch);
            }
            if !img.ones().all(|s| self.down[s].is_subset(img)) {
                return Err(Error::NotACut(self.labels[t].clone()));
            }
            if img.contains(t) || !img.is_subset(&self.down[t]) {
                return Err(Error::NotStrict(self.labels[t].clone()));
            }
        }
        let chi = CausalityFn { fingerprint: self.fingerprint, images };
        let mut c = self.full_cut();
        for _ in 0..self.len() {
            c = chi.apply(&c)?;
        }
        if !c.is_empty() {
            return Err(Error::NotFinite);
        }
        Ok(chi)
    }
}

/// A downward-closed subset of a poset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cut {
    fingerprint: u64,
    bits: FixedBitSet,
}

impl Cut {
    pub fn bits(&self) -> &FixedBitSet {
        &self.bits
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn contains(&self, t: usize) -> bool {
        self.bits.contains(t)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn is_subset(&self, other: &Cut) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn union(&self, other: &Cut) -> Result<Cut> {
        self.same_poset(other)?;
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        Ok(Cut { fingerprint: self.fingerprint, bits })
    }

    pub fn intersection(&self, other: &Cut) -> Result<Cut> {
        self.same_poset(other)?;
        let mut bits = self.bits.clone();
        bits.intersect_with(&other.bits);
        Ok(Cut { fingerprint: self.fingerprint, bits })
    }

    /// Labels of the members in linear-extension order.
    pub fn labels(&self, poset: &Poset) -> Vec<String> {
        self.ranked(poset).into_iter().map(|r| poset.labels[poset.order[r]].clone()).collect()
    }

    fn ranked(&self, poset: &Poset) -> Vec<usize> {
        let mut r: Vec<usize> = self.bits.ones().map(|t| poset.rank[t]).collect();
        r.sort_unstable();
        r
    }

    fn same_poset(&self, other: &Cut) -> Result<()> {
        if self.fingerprint == other.fingerprint {
            Ok(())
        } else {
            Err(Error::PosetMismatch)
        }
    }
}

/// A causality function stored pointwise; `chi(C)` is the union of the images of the members of `C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalityFn {
    fingerprint: u64,
    images: Vec<FixedBitSet>,
}

impl CausalityFn {
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn image(&self, t: usize) -> &FixedBitSet {
        &self.images[t]
    }

    pub fn apply(&self, cut: &Cut) -> Result<Cut> {
        if cut.fingerprint != self.fingerprint {
            return Err(Error::PosetMismatch);
        }
        let mut bits = FixedBitSet::with_capacity(self.images.len());
        for t in cut.bits.ones() {
            bits.union_with(&self.images[t]);
        }
        Ok(Cut { fingerprint: self.fingerprint, bits })
    }

    /// `chi^n(cut)`.
    pub fn iterate(&self, cut: &Cut, n: usize) -> Result<Cut> {
        let mut c = cut.clone();
        if c.fingerprint != self.fingerprint {
            return Err(Error::PosetMismatch);
        }
        for _ in 0..n {
            if c.is_empty() {
                break;
            }
            c = self.apply(&c)?;
        }
        Ok(c)
    }

    /// The chain `cut, chi(cut), chi^2(cut), ...` down to and including the empty cut.
    pub fn descending_chain(&self, cut: &Cut) -> Result<Vec<Cut>> {
        let mut chain = vec![cut.clone()];
        let mut c = cut.clone();
        while !c.is_empty() {
            c = self.apply(&c)?;
            chain.push(c.clone());
        }
        Ok(chain)
    }

    /// Pointwise union; the result is revalidated against `poset`.
    pub fn union(&self, other: &CausalityFn, poset: &Poset) -> Result<CausalityFn> {
        if self.fingerprint != other.fingerprint || self.fingerprint != poset.fingerprint {
            return Err(Error::PosetMismatch);
        }
        let images = self
            .images
            .iter()
            .zip(&other.images)
            .map(|(a, b)| {
                let mut u = a.clone();
                u.union_with(b);
                u
            })
            .collect();
        poset.causality_fn_from_bits(images)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn figure_poset() -> Poset {
        let labels: Vec<String> = (1..=11).map(|i| format!("t{i}")).collect();
        let edges = [(1, 4), (2, 5), (3, 6), (4, 7), (5, 7), (5, 8), (6, 8), (7, 11), (8, 9), (8, 10), (9, 11)];
        let covers: Vec<(String, String)> = edges.iter().map(|(a, b)| (format!("t{a}"), format!("t{b}"))).collect();
        Poset::new(&labels, &covers).unwrap()
    }

    fn brute_force_cuts(p: &Poset) -> Vec<FixedBitSet> {
        let n = p.len();
        (0u32..1 << n)
            .map(|mask| {
                let mut b = FixedBitSet::with_capacity(n);
                for t in 0..n {
                    if mask >> t & 1 == 1 {
                        b.insert(t);
                    }
                }
                b
            })
            .filter(|b| b.ones().all(|t| (0..n).all(|s| !p.leq(s, t) || b.contains(s))))
            .collect()
    }

    fn poset_from_mask(n: usize, mask: u64) -> Poset {
        let labels: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let mut covers = Vec::new();
        let mut bit = 0;
        for i in 0..n {
            for j in i + 1..n {
                if mask >> (bit % 64) & 1 == 1 {
                    covers.push((labels[i].clone(), labels[j].clone()));
                }
                bit += 1;
            }
        }
        Poset::new(&labels, &covers).unwrap()
    }

    #[test]
    fn chain_is_total() {
        let p = Poset::chain(6);
        assert!(p.is_chain());
        assert!(p.leq(0, 5));
        assert!(!p.leq(5, 0));
        assert_eq!(p.enumerate_cuts().unwrap().len(), 7);
    }

    #[test]
    fn two_cycle_is_rejected() {
        let r = Poset::new(&["a", "b"], &[("a", "b"), ("b", "a")]);
        assert!(matches!(r, Err(Error::Cycle(_))));
    }

    #[test]
    fn dangling_and_duplicate_labels() {
        assert!(matches!(Poset::new(&["a"], &[("a", "z")]), Err(Error::UnknownLabel(_))));
        assert!(matches!(Poset::new(&["a", "a"], &[]), Err(Error::DuplicateLabel(_))));
    }

    #[test]
    fn figure_poset_reachability() {
        let p = figure_poset();
        let i = |s: &str| p.index_of(s).unwrap();
        assert!(p.leq(i("t1"), i("t11")));
        assert!(p.leq(i("t3"), i("t10")));
        assert!(!p.leq(i("t1"), i("t8")));
        assert!(!p.leq(i("t9"), i("t10")));
    }

    #[test]
    fn figure_cuts() {
        let p = figure_poset();
        let c = p.down_closure(&["t4", "t5", "t6"]).unwrap();
        assert_eq!(c.labels(&p), vec!["t1", "t2", "t3", "t4", "t5", "t6"]);
        let d = p.down_closure(&["t7", "t8"]).unwrap();
        assert_eq!(d.len(), 8);
        assert!(c.is_subset(&d));
        let chi = p.strict_past_causality();
        assert_eq!(chi.apply(&d).unwrap(), c);
        let brute = brute_force_cuts(&p);
        let cuts = p.enumerate_cuts().unwrap();
        assert_eq!(cuts.len(), brute.len());
        for b in &brute {
            assert!(cuts.iter().any(|c| c.bits() == b));
        }
    }

    #[test]
    fn down_closure_basics() {
        let p = Poset::chain(6);
        assert_eq!(p.down_closure(&["4"]).unwrap().labels(&p), vec!["1", "2", "3", "4"]);
        assert!(p.down_closure::<&str>(&[]).unwrap().is_empty());
        assert!(matches!(p.down_closure(&["9"]), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn antichain_has_four_cuts() {
        let p = Poset::new(&["a", "b"], &[]).unwrap();
        assert_eq!(p.enumerate_cuts().unwrap().len(), brute_force_cuts(&p).len());
        assert_eq!(p.enumerate_cuts().unwrap().len(), 4);
    }

    #[test]
    fn cut_cap_is_enforced() {
        let labels: Vec<String> = (0..12).map(|i| i.to_string()).collect();
        let p = Poset::new::<String>(&labels, &[]).unwrap();
        assert!(matches!(p.enumerate_cuts_capped(100), Err(Error::Size { .. })));
    }

    #[test]
    fn strict_past_on_chain_empties() {
        let p = Poset::chain(6);
        let chi = p.strict_past_causality();
        assert!(chi.iterate(&p.full_cut(), 6).unwrap().is_empty());
        assert!(chi.apply(&p.empty_cut()).unwrap().is_empty());
        assert_eq!(chi.descending_chain(&p.full_cut()).unwrap().len(), 7);
    }

    #[test]
    fn causality_validation_errors() {
        let p = Poset::chain(3);
        let mut m: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        m.insert("2", vec!["2", "1"]);
        assert!(matches!(p.causality_fn(&m), Err(Error::NotStrict(_))));
        let q = Poset::new(&["a", "b", "c"], &[("a", "c")]).unwrap();
        let mut m: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        m.insert("c", vec!["a", "b"]);
        assert!(matches!(q.causality_fn(&m), Err(Error::NotStrict(_))));
        let mut m: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        m.insert("3", vec!["2"]);
        assert!(matches!(p.causality_fn(&m), Err(Error::NotACut(_))));
        let mut m: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        m.insert("3", vec!["1", "2"]);
        assert!(p.causality_fn(&m).is_ok());
    }

    #[test]
    fn union_with_two_step_past() {
        let p = Poset::chain(5);
        let strict = p.strict_past_causality();
        let two: Vec<FixedBitSet> = (0..5usize)
            .map(|t| {
                let mut b = FixedBitSet::with_capacity(5);
                for s in 0..t.saturating_sub(1) {
                    b.insert(s);
                }
                b
            })
            .collect();
        let two = p.causality_fn_from_bits(two).unwrap();
        assert_eq!(strict.union(&two, &p).unwrap(), strict);
        assert_eq!(strict.union(&strict, &p).unwrap(), strict);
    }

    #[test]
    fn cuts_of_other_posets_are_rejected() {
        let p = Poset::chain(3);
        let q = Poset::chain(4);
        let chi = p.strict_past_causality();
        assert_eq!(chi.apply(&q.full_cut()), Err(Error::PosetMismatch));
        assert_eq!(p.full_cut().union(&q.full_cut()), Err(Error::PosetMismatch));
    }

    proptest! {
        #[test]
        fn enumeration_matches_brute_force(n in 1usize..=10, mask in any::<u64>()) {
            let p = poset_from_mask(n, mask);
            let cuts = p.enumerate_cuts().unwrap();
            let brute = brute_force_cuts(&p);
            prop_assert_eq!(cuts.len(), brute.len());
            for c in &cuts {
                prop_assert!(brute.contains(c.bits()));
            }
        }

        #[test]
        fn lifted_chi_is_homomorphic_and_monotone(n in 1usize..=7, mask in any::<u64>()) {
            let p = poset_from_mask(n, mask);
            let chi = p.strict_past_causality();
            let cuts = p.enumerate_cuts().unwrap();
            for a in &cuts {
                let ca = chi.apply(a).unwrap();
                if !a.is_empty() {
                    prop_assert!(ca.is_subset(a) && ca != *a);
                }
                for b in &cuts {
                    let u = chi.apply(&a.union(b).unwrap()).unwrap();
                    prop_assert_eq!(&u, &ca.union(&chi.apply(b).unwrap()).unwrap());
                    if a.is_subset(b) {
                        prop_assert!(ca.is_subset(&chi.apply(b).unwrap()));
                    }
                }
            }
            prop_assert!(chi.iterate(&p.full_cut(), p.len()).unwrap().is_empty());
        }
    }
}
